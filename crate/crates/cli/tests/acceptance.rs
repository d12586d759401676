//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

use std::sync::Arc;

use conslaw::dynamics::make_synthetic_dataset;
use conslaw::dynamics::network::{loss, loss_gradient};
use conslaw::laws::{gap, predicted_counts};
use conslaw::lie::lie_bracket;
use conslaw::model::{build_phi, grad_phi, Architecture, FlowMode};
use conslaw::ratpoly::{exact_nullspace, exact_rank, ExactScalar, Polynomial, RatMatrix, VariableSpace, VectorField};
use conslaw_cli::config::parse_jobs;
use conslaw_cli::run_job;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn job(v: Value) -> Value {
    let jobs = parse_jobs(&v.to_string()).expect("valid job");
    let report = run_job(&jobs[0]).expect("job runs");
    serde_json::to_value(&report).expect("serializable")
}

/// Two-layer linear network from `(n, m, r)`; widths are `[n, r, m]`.
fn linear(n: usize, m: usize, r: usize) -> Value {
    json!({"kind": "linear", "dims": [n, r, m]})
}

fn relu(n: usize, m: usize, r: usize, bias: bool) -> Value {
    json!({"kind": "relu2", "dims": [n, m, r], "bias": bias})
}

fn compare(arch: Value, metric: &str, mode: &str, degree: Option<u32>) -> Value {
    let mut j = json!({
        "command": "compare",
        "architecture": arch,
        "metric": {"metric": metric, "mode": mode, "tau": "1"},
    });
    if let Some(d) = degree {
        j["degree"] = json!(d);
    }
    job(j)
}

/// `(solver, lie, formula)` of a compare report.
fn counts(r: &Value) -> (u64, u64, Option<u64>) {
    let res = &r["result"];
    (
        res["solver"]["count"].as_u64().unwrap_or(u64::MAX),
        res["lie"]["count"].as_u64().unwrap_or(u64::MAX),
        res["formula"].as_u64(),
    )
}

fn agree(r: &Value, want: u64) -> Result<(), String> {
    let (s, l, f) = counts(r);
    if r["status"] != "ok" || s != want || l != want || f.is_some_and(|f| f != want) {
        return Err(format!(
            "expected {want}, got solver {s} lie {l} formula {f:?} (status {})",
            r["status"]
        ));
    }
    Ok(())
}

fn closed_form(r: &Value) -> (bool, u64, u64) {
    let c = &r["result"]["closed_form"];
    (
        c["conserved"].as_bool().unwrap_or(false),
        c["rank"].as_u64().unwrap_or(0),
        c["joint_rank"].as_u64().unwrap_or(0),
    )
}

fn euclidean_gf_counts() -> Check {
    let mut seen = Vec::new();
    let mut errs = Vec::new();
    for ((n, m, r), want) in [((2, 1, 1), 1), ((2, 2, 2), 3), ((3, 2, 2), 5)] {
        let rep = compare(linear(n, m, r), "euclidean", "gf", None);
        seen.push(counts(&rep).0);
        if let Err(e) = agree(&rep, want) {
            errs.push(format!("({n},{m},{r}): {e}"));
        }
    }
    if errs.is_empty() {
        Ok(format!("counts {seen:?}"))
    } else {
        Err(errs.join("; "))
    }
}

fn euclidean_mf_counts() -> Check {
    let mut errs = Vec::new();
    for ((n, m, r), want) in [((2, 1, 1), 0), ((2, 1, 2), 1), ((2, 2, 2), 1), ((1, 1, 4), 10)] {
        if let Err(e) = agree(&compare(linear(n, m, r), "euclidean", "mf", Some(3)), want) {
            errs.push(format!("({n},{m},{r}): {e}"));
        }
    }
    if errs.is_empty() {
        Ok("counts [0, 1, 1], extended 10".into())
    } else {
        Err(errs.join("; "))
    }
}

fn conservation_gap() -> Check {
    for (n, m, r) in [(2, 1, 1), (2, 2, 2), (3, 2, 2)] {
        let gf = counts(&compare(linear(n, m, r), "euclidean", "gf", None)).0 as i64;
        let mf = counts(&compare(linear(n, m, r), "euclidean", "mf", Some(3))).0 as i64;
        if gf - mf != r as i64 {
            return Err(format!("({n},{m},{r}): computed gap {gf} − {mf} ≠ {r}"));
        }
    }
    let g = gap(1, 2, 8).map_err(|e| e.to_string())?;
    let gf = predicted_counts(1, 2, 8, FlowMode::Gf, None).map_err(|e| e.to_string())?;
    let mf = predicted_counts(1, 2, 8, FlowMode::Mf, None).map_err(|e| e.to_string())?;
    let cross = (1 + 2) * ((8 - 2 * (1 + 2)) + 8 - 1);
    if (gf, mf, g, cross) != (21, 27, -6, 27) {
        return Err(format!("(1,2,8): gf {gf} mf {mf} gap {g} cross-check {cross}"));
    }
    Ok("gap = r on three networks; (1,2,8) gap −6".into())
}

fn lie_dimensions() -> Check {
    let rep = job(json!({
        "command": "count",
        "architecture": linear(2, 1, 2),
        "metric": {"metric": "euclidean", "mode": "mf", "tau": "1"},
    }));
    let dim = rep["result"]["dim"].as_u64();
    if dim != Some(12) || rep["result"]["exact"] != true {
        return Err(format!("(2,1,2) dimension {dim:?}, stop {}", rep["result"]["stop"]));
    }
    for (n, m) in [(1, 1), (2, 1), (2, 3)] {
        for bias in [false, true] {
            let rep = job(json!({
                "command": "count",
                "architecture": relu(n, m, 1, bias),
                "metric": {"metric": "euclidean", "mode": "mf", "tau": "1"},
            }));
            let laws = rep["result"]["law_count"].as_u64();
            if laws != Some(0) || rep["result"]["exact"] != true {
                return Err(format!("relu ({n},{m},1) bias {bias}: {laws:?} laws"));
            }
        }
    }
    Ok("(2,1,2) dimension 12; single-neuron ReLU blocks have no momentum laws".into())
}

fn nmf() -> Check {
    let gf = compare(linear(2, 3, 2), "mirror", "gf", None);
    agree(&gf, 2)?;
    let (conserved, rank, joint) = closed_form(&gf);
    if !(conserved && rank == 2 && joint == 2) {
        return Err(format!("closed form conserved {conserved}, rank {rank}, joint {joint}"));
    }
    agree(&compare(linear(2, 3, 2), "mirror", "mf", Some(3)), 0).map_err(|e| format!("mf: {e}"))?;
    Ok("2 laws spanned by the column sums; momentum 0".into())
}

fn icnn() -> Check {
    let gf = compare(relu(2, 2, 3, true), "icnn", "gf", None);
    agree(&gf, 3)?;
    let (conserved, rank, joint) = closed_form(&gf);
    if !(conserved && rank == 3 && joint == 3) {
        return Err(format!("closed form conserved {conserved}, rank {rank}, joint {joint}"));
    }
    agree(&compare(relu(2, 2, 3, true), "icnn", "mf", None), 0).map_err(|e| format!("mf: {e}"))?;
    Ok("3 laws with full gradient-rank agreement; momentum 0".into())
}

fn relu_euclidean() -> Check {
    let gf = compare(relu(2, 2, 2, false), "euclidean", "gf", None);
    agree(&gf, 2)?;
    let (conserved, rank, joint) = closed_form(&gf);
    if !(conserved && rank == 2 && joint == 2) {
        return Err(format!("closed form conserved {conserved}, rank {rank}, joint {joint}"));
    }
    agree(&compare(relu(2, 2, 2, false), "euclidean", "mf", None), 0).map_err(|e| format!("mf: {e}"))?;
    Ok("2 per-neuron laws; momentum 0".into())
}

fn annihilation() -> Check {
    let reports = [
        compare(linear(2, 1, 1), "euclidean", "gf", None),
        compare(linear(2, 2, 2), "euclidean", "gf", None),
        compare(linear(3, 2, 2), "euclidean", "gf", None),
        compare(linear(2, 1, 2), "euclidean", "mf", Some(3)),
        compare(linear(2, 2, 2), "euclidean", "mf", Some(3)),
        compare(linear(1, 1, 4), "euclidean", "mf", Some(3)),
        compare(linear(2, 3, 2), "mirror", "gf", None),
        compare(relu(2, 2, 3, true), "icnn", "gf", None),
        compare(relu(2, 2, 2, false), "euclidean", "gf", None),
    ];
    let mut families = 0;
    for r in &reports {
        let c = &r["result"]["closed_form"];
        if c["conserved"] != true {
            return Err(format!("families not annihilated for {}", r["config"]["architecture"]));
        }
        families += c["families"].as_u64().unwrap_or(0);
    }
    Ok(format!("{families} families expand to zero"))
}

fn structure_theorem() -> Check {
    let rep = job(json!({
        "command": "free-flow",
        "seed": 0,
        "free_flow": {"tau": 1.0, "t_end": 2.0, "runs": 10, "tolerance": 1e-9},
    }));
    let (a, b) = (&rep["result"]["max_dev_a"], &rep["result"]["max_dev_b"]);
    if rep["status"] != "ok" {
        return Err(format!("deviations a {a}, b {b}"));
    }
    Ok(format!("max deviation a {a}, b {b} over 10 seeds"))
}

/// Largest drift among laws whose id starts with one of `prefixes`.
fn simulated_drift(
    mu: f64,
    delta: f64,
    steps: usize,
    geometry: &str,
    velocity: f64,
    prefixes: &[&str],
) -> Result<f64, String> {
    let rep = job(json!({
        "command": "simulate",
        "architecture": linear(2, 2, 2),
        "simulation": {
            "geometry": geometry, "mu": mu, "nu": 1.0, "delta": delta, "steps": steps,
            "samples": 16, "data_seed": 1, "init_seed": 2, "init_velocity": velocity,
        },
    }));
    if rep["status"] != "ok" {
        return Err(format!("simulation failed: {}", rep["error"]));
    }
    let laws = rep["result"]["manifest"]["laws"]
        .as_array()
        .cloned()
        .unwrap_or_default();
    let picked: Vec<f64> = laws
        .iter()
        .filter(|l| {
            prefixes
                .iter()
                .any(|p| l["law_id"].as_str().unwrap_or("").starts_with(p))
        })
        .filter_map(|l| l["max_abs_drift"].as_f64())
        .collect();
    if picked.is_empty() {
        return Err(format!("no {prefixes:?} laws tracked"));
    }
    Ok(picked.into_iter().fold(0.0, f64::max))
}

fn halving_factors(drifts: &[f64]) -> Vec<f64> {
    drifts.windows(2).map(|w| w[0] / w[1]).collect()
}

fn in_band(factors: &[f64]) -> bool {
    factors.iter().all(|f| (1.5..=3.0).contains(f))
}

fn discretization_drift() -> Check {
    let ladder = [1e-2, 5e-3, 2.5e-3];
    let horizon = 1.0;
    let steps = |d: f64| (horizon / d).round() as usize;
    let gd: Vec<f64> = ladder
        .iter()
        .map(|&d| simulated_drift(0.0, d, steps(d), "euclidean", 0.0, &["balancedness"]))
        .collect::<Result<_, _>>()?;
    let gd_f = halving_factors(&gd);
    if !in_band(&gd_f) {
        return Err(format!("gradient descent halving factors {gd_f:?}"));
    }
    let hb = simulated_drift(1.0, 2.5e-3, steps(2.5e-3), "euclidean", 0.0, &["balancedness"])?;
    if hb <= 10.0 * gd[2] {
        return Err(format!(
            "heavy ball balancedness drift {hb:e} vs gradient descent {:e}",
            gd[2]
        ));
    }
    let mom: Vec<f64> = ladder
        .iter()
        .map(|&d| simulated_drift(1.0, d, steps(d), "euclidean", 1.0, &["pca_mf"]))
        .collect::<Result<_, _>>()?;
    let mom_f = halving_factors(&mom);
    if !in_band(&mom_f) {
        return Err(format!("momentum law halving factors {mom_f:?}"));
    }
    Ok(format!(
        "GD factors {gd_f:.2?}; heavy ball {hb:.2e} vs GD {:.2e}; momentum-law factors {mom_f:.2?}",
        gd[2]
    ))
}

fn natural_gradient() -> Check {
    let d = simulated_drift(0.0, 1e-4, 5000, "natural_gradient", 0.0, &["balancedness"])?;
    if d > 1e-4 {
        return Err(format!("max drift {d:e}"));
    }
    Ok(format!("max drift {d:.2e}"))
}

fn scalar() -> impl Strategy<Value = ExactScalar> {
    (-9i64..=9, 1i64..=5).prop_map(|(p, q)| ExactScalar::ratio(p, q))
}

fn poly(space: Arc<VariableSpace>) -> impl Strategy<Value = Polynomial> {
    let n = space.len();
    prop::collection::vec((prop::collection::vec(0u16..=2, n), scalar()), 0..=4)
        .prop_map(move |ts| Polynomial::from_terms(&space, ts).expect("well-formed terms"))
}

fn field(space: Arc<VariableSpace>) -> impl Strategy<Value = VectorField> {
    let n = space.len();
    prop::collection::vec(poly(space.clone()), n)
        .prop_map(move |cs| VectorField::new(&space, cs).expect("matching space"))
}

fn run_property<S: Strategy>(
    name: &str,
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| format!("{name}: {e}"))
}

fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], k: usize, h: f64) -> f64 {
    let (mut a, mut b) = (x.to_vec(), x.to_vec());
    a[k] += h;
    b[k] -= h;
    (f(&a) - f(&b)) / (2.0 * h)
}

fn rel_err(approx: f64, exact: f64) -> f64 {
    (approx - exact).abs() / exact.abs().max(1.0)
}

fn property_suites() -> Check {
    let xyz = VariableSpace::plain(&["x", "y", "z"]);
    let s = xyz.clone();
    run_property(
        "ring axioms",
        100,
        (poly(s.clone()), poly(s.clone()), poly(s)),
        |(a, b, c)| {
            prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            prop_assert_eq!(&a + &b, &b + &a);
            Ok(())
        },
    )?;
    let matrices =
        (1usize..=5, 1usize..=5).prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(-9i64..=9, c), r));
    run_property("rank plus nullity", 100, matrices, |rows| {
        let refs: Vec<&[i64]> = rows.iter().map(Vec::as_slice).collect();
        let m = RatMatrix::from_i64(&refs);
        let null = exact_nullspace(&m);
        prop_assert_eq!(exact_rank(&m) + null.len(), m.cols());
        for v in &null {
            prop_assert!(m.mul_vec(v).iter().all(ExactScalar::is_zero));
        }
        Ok(())
    })?;
    let s = xyz.clone();
    run_property("bracket antisymmetry", 50, (field(s.clone()), field(s)), |(x, y)| {
        let xy = lie_bracket(&x, &y).unwrap();
        prop_assert!(xy.checked_add(&lie_bracket(&y, &x).unwrap()).unwrap().is_zero());
        Ok(())
    })?;
    let s = xyz;
    run_property(
        "Jacobi identity",
        20,
        (field(s.clone()), field(s.clone()), field(s)),
        |(x, y, z)| {
            let b = |p: &VectorField, q: &VectorField| lie_bracket(p, q).unwrap();
            let sum = b(&x, &b(&y, &z))
                .checked_add(&b(&y, &b(&z, &x)))
                .unwrap()
                .checked_add(&b(&z, &b(&x, &y)))
                .unwrap();
            prop_assert!(sum.is_zero());
            Ok(())
        },
    )?;
    let archs = [
        Architecture::two_layer(2, 2, 2),
        Architecture::linear(&[2, 3, 2, 1]).unwrap(),
        Architecture::relu2(2, 2, 2, false),
        Architecture::relu2(2, 2, 3, true),
    ];
    run_property("finite-difference gradients", 20, any::<u64>(), |seed| {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for arch in &archs {
            let phi = build_phi(arch).unwrap();
            let grads = grad_phi(&phi, &phi.space).unwrap();
            let x: Vec<f64> = (0..phi.space.len()).map(|_| rng.random_range(-2.0..2.0)).collect();
            for (p, g) in phi.components.iter().zip(&grads) {
                let exact = g.eval_f64(&x);
                for (k, &e) in exact.iter().enumerate() {
                    let fd = central_difference(|y| p.eval_f64(y), &x, k, 1e-5);
                    prop_assert!(rel_err(fd, e) <= 1e-6);
                }
            }
            let data = make_synthetic_dataset(arch, 8, seed, false).unwrap();
            let theta: Vec<f64> = (0..arch.num_params()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let g = loss_gradient(arch, &theta, &data).unwrap();
            for (k, &gk) in g.iter().enumerate() {
                let fd = central_difference(|t| loss(arch, t, &data).unwrap(), &theta, k, 1e-5);
                prop_assert!(rel_err(fd, gk) <= 1e-6);
            }
        }
        Ok(())
    })?;
    let draws = (1usize..=6, 1usize..=6, 1usize..=40).prop_filter("(n,m) = (1,1)", |&(n, m, _)| (n, m) != (1, 1));
    run_property("formula consistency", 100, draws, |(n, m, r)| {
        let mf = predicted_counts(n, m, r, FlowMode::Mf, None).unwrap();
        let x = n + m;
        if 2 * x <= r {
            prop_assert_eq!(mf, x * ((r - 2 * x) + r - 1));
        } else {
            prop_assert_eq!(
                predicted_counts(n, m, r, FlowMode::Mf, Some(r)).unwrap(),
                r * (r - 1) / 2
            );
        }
        Ok(())
    })?;
    Ok("ratpoly, Lie bracket, finite-difference and formula properties".into())
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("Euclidean gradient-flow counts", euclidean_gf_counts),
        ("Euclidean momentum-flow counts", euclidean_mf_counts),
        ("conservation gap", conservation_gap),
        ("Lie-dimension formulas", lie_dimensions),
        ("NMF", nmf),
        ("ICNN", icnn),
        ("ReLU Euclidean", relu_euclidean),
        ("closed-form annihilation", annihilation),
        ("structure theorem", structure_theorem),
        ("discretization drift", discretization_drift),
        ("natural gradient", natural_gradient),
        ("property suites", property_suites),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
