//! Polynomial conservation laws up to a degree bound.
//!
//! A law `h = Σ_k c_k m_k` over an ansatz of monomials must satisfy
//! `⟨∇h, χ_i⟩ ≡ 0` for every field. Expanding each `⟨∇m_k, χ_i⟩` gives a
//! sparse linear system in the `c_k` whose nullspace is exactly the space of
//! degree-bounded laws. The system splits into connected components (columns
//! sharing a row), which are solved independently.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::ratpoly::linalg::{sparse_nullspace, SparseRow};
use crate::ratpoly::poly::monomial_degree;
use crate::ratpoly::{exact_rank, ExactScalar, Monomial, Polynomial, RatMatrix, VariableSpace, VectorField};
use crate::witness::{find_witness, Genericity, Witness};

/// All monomials of total degree ≤ `degree` whose time-like exponent is at
/// most `time_degree_cap`, in graded-lexicographic order.
pub fn monomial_basis(space: &VariableSpace, degree: u32, time_degree_cap: u32) -> Vec<Monomial> {
    let n = space.len();
    let time = space.time_index();
    let mut out = Vec::new();
    let mut cur = vec![0u16; n];
    fn rec(i: usize, left: u32, cur: &mut Vec<u16>, out: &mut Vec<Monomial>, time: Option<usize>, cap: u32) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        let max = if Some(i) == time { left.min(cap) } else { left };
        for k in 0..=max {
            cur[i] = k as u16;
            rec(i + 1, left - k, cur, out, time, cap);
        }
        cur[i] = 0;
    }
    rec(0, degree, &mut cur, &mut out, time, time_degree_cap);
    out.sort_by(|a, b| monomial_degree(a).cmp(&monomial_degree(b)).then_with(|| b.cmp(a)));
    out
}

/// Terms of `⟨∇m, X⟩` for a monomial `m`.
fn derivative_along(m: &[u16], field: &VectorField) -> BTreeMap<Monomial, ExactScalar> {
    let mut acc: BTreeMap<Monomial, ExactScalar> = BTreeMap::new();
    for (j, &k) in m.iter().enumerate() {
        if k == 0 {
            continue;
        }
        let xj = field.component(j);
        if xj.is_zero() {
            continue;
        }
        let factor = ExactScalar::from_int(k as i64);
        for (e, c) in xj.terms() {
            let mut r: Monomial = m.iter().zip(e).map(|(a, b)| a + b).collect();
            r[j] -= 1;
            let v = c * &factor;
            let entry = acc.entry(r).or_default();
            *entry += &v;
        }
    }
    acc.retain(|_, v| !v.is_zero());
    acc
}

/// The linear system `⟨∇h, χ_i⟩ ≡ 0` in the ansatz coefficients.
#[derive(Clone, Debug)]
pub struct OrthogonalitySystem {
    pub space: Arc<VariableSpace>,
    /// Ansatz monomials, one per column.
    pub columns: Vec<Monomial>,
    /// Row keys `(field index, result monomial)`, sorted.
    pub row_keys: Vec<(usize, Monomial)>,
    /// Sparse rows aligned with `row_keys`, as `(column, coefficient)`.
    pub rows: Vec<Vec<(usize, ExactScalar)>>,
}

impl OrthogonalitySystem {
    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.columns.len()
    }

    /// Dense copy of the matrix; intended for small systems and tests.
    pub fn to_dense(&self) -> RatMatrix {
        let mut m = vec![vec![ExactScalar::zero(); self.columns.len()]; self.rows.len()];
        for (i, row) in self.rows.iter().enumerate() {
            for (j, v) in row {
                m[i][*j] = v.clone();
            }
        }
        RatMatrix::new(m, self.columns.len())
    }

    /// Polynomial with the given coefficient per column.
    pub fn polynomial(&self, coeffs: &[ExactScalar]) -> Polynomial {
        let mut p = Polynomial::zero(&self.space);
        for (m, c) in self.columns.iter().zip(coeffs) {
            if !c.is_zero() {
                p.add_term(m.clone(), c);
            }
        }
        p
    }

    /// Coefficient vector of `p` over the ansatz, or `None` if `p` uses a
    /// monomial outside it.
    pub fn coefficients(&self, p: &Polynomial) -> Option<Vec<ExactScalar>> {
        let index: BTreeMap<&Monomial, usize> = self.columns.iter().enumerate().map(|(i, m)| (m, i)).collect();
        let mut out = vec![ExactScalar::zero(); self.columns.len()];
        for (e, c) in p.terms() {
            out[*index.get(e)?] = c.clone();
        }
        Some(out)
    }

    /// Whether `coeffs` is annihilated by every row.
    pub fn annihilates(&self, coeffs: &[ExactScalar]) -> bool {
        self.rows.iter().all(|row| {
            row.iter()
                .fold(ExactScalar::zero(), |acc, (j, v)| acc + v * &coeffs[*j])
                .is_zero()
        })
    }

    /// Groups columns into connected components; returns the column lists
    /// and, for each component, the indices of its rows.
    fn components(&self) -> Vec<(Vec<usize>, Vec<usize>)> {
        let n = self.columns.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for row in &self.rows {
            if let Some(&(first, _)) = row.first() {
                let a = find(&mut parent, first);
                for (j, _) in &row[1..] {
                    let b = find(&mut parent, *j);
                    if a != b {
                        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                        parent[hi] = lo;
                    }
                }
                let _ = find(&mut parent, first);
            }
        }
        let mut groups: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
        for j in 0..n {
            let r = find(&mut parent, j);
            groups.entry(r).or_default().0.push(j);
        }
        for (i, row) in self.rows.iter().enumerate() {
            if let Some(&(first, _)) = row.first() {
                let r = find(&mut parent, first);
                groups.get_mut(&r).expect("root").1.push(i);
            }
        }
        groups.into_values().collect()
    }
}

/// Assembles the orthogonality system. Columns are expanded in parallel and
/// merged by sorted row key, so the result does not depend on `exec`.
pub fn build_orthogonality_system(
    fields: &[VectorField],
    degree: u32,
    time_degree_cap: u32,
    exec: Exec,
) -> Result<OrthogonalitySystem> {
    let space = fields.first().ok_or(Error::EmptyFields)?.space().clone();
    if fields.iter().any(|f| f.space().as_ref() != space.as_ref()) {
        return Err(Error::SpaceMismatch);
    }
    let columns = monomial_basis(&space, degree, time_degree_cap);
    let per_column: Vec<Vec<(usize, Monomial, ExactScalar)>> = exec.map(&columns, |m| {
        fields
            .iter()
            .enumerate()
            .flat_map(|(i, f)| derivative_along(m, f).into_iter().map(move |(r, c)| (i, r, c)))
            .collect()
    });
    let mut by_row: BTreeMap<(usize, Monomial), Vec<(usize, ExactScalar)>> = BTreeMap::new();
    for (j, entries) in per_column.into_iter().enumerate() {
        for (i, r, c) in entries {
            by_row.entry((i, r)).or_default().push((j, c));
        }
    }
    let (row_keys, rows) = by_row.into_iter().unzip();
    Ok(OrthogonalitySystem {
        space,
        columns,
        row_keys,
        rows,
    })
}

/// Laws found up to a degree bound, with their independence count.
#[derive(Clone, Debug)]
pub struct LawBasis {
    pub space: Arc<VariableSpace>,
    /// Non-constant laws, each scaled to primitive integer coefficients.
    pub laws: Vec<Polynomial>,
    pub degree: u32,
    pub time_degree_cap: u32,
    /// Rank of the law gradients at the witness.
    pub independent: usize,
    pub witness: Witness,
    /// Dimension of the full nullspace (constants included).
    pub nullity: usize,
    pub columns: usize,
    pub rows: usize,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolveOptions {
    pub degree: u32,
    pub time_degree_cap: u32,
    pub seed: u64,
    pub exec: Exec,
}

impl SolveOptions {
    pub fn new(degree: u32, time_degree_cap: u32, seed: u64) -> Self {
        Self {
            degree,
            time_degree_cap,
            seed,
            exec: Exec::default(),
        }
    }
}

/// Checks `⟨∇h, χ_i⟩ ≡ 0` for all fields; returns the first failing index.
pub fn verify_law(h: &Polynomial, fields: &[VectorField]) -> Result<Option<usize>> {
    for (i, f) in fields.iter().enumerate() {
        if !f.lie_derivative(h)?.is_zero() {
            return Ok(Some(i));
        }
    }
    Ok(None)
}

/// Nullspace basis of the system as polynomials (constants included), each
/// exactly re-verified against `fields`.
pub fn law_space(system: &OrthogonalitySystem, fields: &[VectorField]) -> Result<Vec<Polynomial>> {
    let mut out = Vec::new();
    for (cols, row_ids) in system.components() {
        let local: BTreeMap<usize, usize> = cols.iter().enumerate().map(|(l, &g)| (g, l)).collect();
        let rows: Vec<SparseRow> = row_ids
            .iter()
            .map(|&i| SparseRow::from_rational(system.rows[i].iter().map(|(j, v)| (local[j], v.clone())).collect()))
            .collect();
        let mut found = None;
        for all_rows in [false, true] {
            let ns = sparse_nullspace(cols.len(), &rows, all_rows);
            let polys: Vec<Polynomial> = ns
                .basis
                .iter()
                .map(|b| {
                    let mut full = vec![ExactScalar::zero(); system.columns.len()];
                    for (l, v) in b.iter().enumerate() {
                        full[cols[l]] = v.clone();
                    }
                    system.polynomial(&full)
                })
                .collect();
            let mut failure = None;
            for p in &polys {
                if let Some(i) = verify_law(p, fields)? {
                    failure = Some(i);
                    break;
                }
            }
            match failure {
                None => {
                    found = Some(polys);
                    break;
                }
                Some(i) if all_rows => return Err(Error::UnsoundLaw { field: i }),
                Some(_) => continue,
            }
        }
        out.extend(found.expect("verified basis"));
    }
    Ok(out)
}

/// Rank of the gradient matrix `[∇h_k(witness)]`.
pub fn count_independent(laws: &[Polynomial], witness: &[ExactScalar]) -> Result<usize> {
    if laws.is_empty() {
        return Ok(0);
    }
    let rows = laws
        .iter()
        .map(|h| {
            if h.space().len() != witness.len() {
                return Err(Error::DimensionMismatch {
                    expected: h.space().len(),
                    got: witness.len(),
                });
            }
            h.gradient().iter().map(|g| g.eval(witness)).collect()
        })
        .collect::<Result<Vec<Vec<_>>>>()?;
    Ok(exact_rank(&RatMatrix::from_rows(rows)))
}

/// Finds every polynomial law up to the degree bound and counts the
/// independent ones at a generic witness.
pub fn solve_laws(fields: &[VectorField], opts: &SolveOptions, cert: &Genericity) -> Result<LawBasis> {
    let system = build_orthogonality_system(fields, opts.degree, opts.time_degree_cap, opts.exec)?;
    let basis = law_space(&system, fields)?;
    let nullity = basis.len();
    let laws: Vec<Polynomial> = basis
        .into_iter()
        .filter(|p| !p.is_constant())
        .map(|p| p.primitive())
        .collect();
    let witness = find_witness(&system.space, cert, opts.seed)?;
    let independent = count_independent(&laws, &witness.point)?;
    Ok(LawBasis {
        space: system.space.clone(),
        laws,
        degree: opts.degree,
        time_degree_cap: opts.time_degree_cap,
        independent,
        witness,
        nullity,
        columns: system.num_cols(),
        rows: system.num_rows(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratpoly::exact_nullspace;

    fn uv_field() -> (Arc<VariableSpace>, VectorField) {
        let s = VariableSpace::plain(&["u", "v"]);
        let u = Polynomial::var(&s, 0);
        let v = Polynomial::var(&s, 1);
        let f = VectorField::new(&s, vec![v, u]).unwrap();
        (s, f)
    }

    #[test]
    fn monomial_counts_and_order() {
        let s = VariableSpace::plain(&["u", "v"]);
        let b = monomial_basis(&s, 2, 0);
        assert_eq!(
            b,
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
        let s3 = VariableSpace::plain(&["a", "b", "c"]);
        assert_eq!(monomial_basis(&s3, 1, 0).len(), 4);

        let lifted = VariableSpace::lifted(
            vec![crate::ratpoly::LayerShape::new("U", 1, 1)],
            crate::ratpoly::TimeCoordinate::Surrogate,
        )
        .unwrap();
        let capped = monomial_basis(&lifted, 3, 1);
        assert!(capped.iter().all(|m| m[0] <= 1));
        assert!(capped.iter().any(|m| m[0] == 1 && monomial_degree(m) == 3));
    }

    #[test]
    fn single_field_degree_two() {
        let (_, f) = uv_field();
        let sys = build_orthogonality_system(std::slice::from_ref(&f), 2, 0, Exec::Sequential).unwrap();
        // Oracle: dense nullspace of the assembled matrix.
        let dense = exact_nullspace(&sys.to_dense());
        assert_eq!(dense.len(), 2);
        let laws = law_space(&sys, &[f]).unwrap();
        assert_eq!(laws.len(), 2);
        let nonconst: Vec<_> = laws.iter().filter(|p| !p.is_constant()).collect();
        assert_eq!(nonconst.len(), 1);
        assert_eq!(nonconst[0].primitive().to_string(), "u^2 - v^2");
    }

    #[test]
    fn euclidean_degree_one_has_only_constants() {
        let (_, f) = uv_field();
        let sys = build_orthogonality_system(std::slice::from_ref(&f), 1, 0, Exec::Sequential).unwrap();
        let laws = law_space(&sys, &[f]).unwrap();
        assert_eq!(laws.len(), 1);
        assert!(laws[0].is_constant());
    }

    #[test]
    fn empty_field_list_errors() {
        assert!(matches!(
            build_orthogonality_system(&[], 2, 0, Exec::Sequential),
            Err(Error::EmptyFields)
        ));
    }

    #[test]
    fn count_independent_examples() {
        let s = VariableSpace::plain(&["u", "v"]);
        let u = Polynomial::var(&s, 0);
        let v = Polynomial::var(&s, 1);
        let h = &(&u * &u) - &(&v * &v);
        let h2 = h.scale(&ExactScalar::from_int(2));
        let pt = [ExactScalar::from_int(3), ExactScalar::from_int(2)];
        assert_eq!(count_independent(&[h.clone(), h2], &pt).unwrap(), 1);
        assert_eq!(count_independent(&[h.clone(), &h * &h], &pt).unwrap(), 1);
    }

    #[test]
    fn parallel_and_sequential_systems_match() {
        let (_, f) = uv_field();
        let a = build_orthogonality_system(std::slice::from_ref(&f), 4, 0, Exec::Sequential).unwrap();
        let b = build_orthogonality_system(&[f], 4, 0, Exec::Parallel).unwrap();
        assert_eq!(a.row_keys, b.row_keys);
        assert_eq!(a.rows, b.rows);
    }
}
