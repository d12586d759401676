//! Lie brackets and the Lie algebra generated by a family of fields.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::FlowMode;
use crate::ratpoly::linalg::{IntEchelon, SparseRow};
use crate::ratpoly::{ExactScalar, Monomial, Polynomial, VariableSpace, VectorField};
use crate::witness::{find_witness, Genericity, Witness};

/// `[X, Y] = ∂X·Y − ∂Y·X`.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> Result<VectorField> {
    let space = x.space();
    if y.space().as_ref() != space.as_ref() {
        return Err(Error::SpaceMismatch);
    }
    let components = x
        .components()
        .iter()
        .zip(y.components())
        .map(|(xi, yi)| y.lie_derivative(xi)?.checked_sub(&x.lie_derivative(yi)?))
        .collect::<Result<Vec<Polynomial>>>()?;
    VectorField::new(space, components)
}

/// Why generation stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// A full round of brackets added no independent field.
    Closed,
    /// The trace already spans the ambient space.
    Saturated,
    /// The trace rank did not grow for `patience` rounds (nonlinear
    /// generators only).
    Plateau,
    /// The iteration cap was reached.
    Cap,
}

impl StopReason {
    /// Whether the trace dimension is exact rather than a lower bound.
    pub fn is_exact(self) -> bool {
        matches!(self, Self::Closed | Self::Saturated)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LieOptions {
    pub cap: usize,
    pub patience: usize,
    /// Brackets of higher component degree are kept but reported.
    pub degree_warning: u32,
    /// Hard limit on the number of basis fields.
    pub max_basis: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for LieOptions {
    fn default() -> Self {
        Self {
            cap: 16,
            patience: 2,
            degree_warning: 12,
            max_basis: 4096,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct LieBasis {
    pub space: Arc<VariableSpace>,
    pub generators: Vec<VectorField>,
    /// Linearly independent bracket-generated fields, generators first.
    pub basis: Vec<VectorField>,
    pub iterations: usize,
    pub stabilized: bool,
    pub stop: StopReason,
    pub cap: usize,
    /// Trace rank at the witness after each round (round 0 = generators).
    pub trace: Vec<usize>,
    pub witness: Witness,
    pub warnings: Vec<String>,
}

impl LieBasis {
    /// Final trace dimension at the generation witness.
    pub fn dim(&self) -> usize {
        *self.trace.last().expect("at least one round")
    }
}

/// Assigns stable column indices to `(component, monomial)` keys.
#[derive(Default)]
struct KeyIndex {
    keys: BTreeMap<(usize, Monomial), usize>,
}

impl KeyIndex {
    fn row(&mut self, f: &VectorField) -> SparseRow {
        let mut entries = Vec::new();
        for (i, p) in f.components().iter().enumerate() {
            for (m, c) in p.terms() {
                let next = self.keys.len();
                let col = *self.keys.entry((i, m.clone())).or_insert(next);
                entries.push((col, c.clone()));
            }
        }
        SparseRow::from_rational(entries)
    }

    fn len(&self) -> usize {
        self.keys.len()
    }
}

struct Filter {
    keys: KeyIndex,
    coeffs: IntEchelon,
    point: Vec<ExactScalar>,
    values: IntEchelon,
}

impl Filter {
    fn new(point: Vec<ExactScalar>) -> Self {
        let n = point.len();
        Self {
            keys: KeyIndex::default(),
            coeffs: IntEchelon::new(0),
            point,
            values: IntEchelon::new(n),
        }
    }

    /// Inserts `f` if it is independent of the fields kept so far.
    fn insert(&mut self, f: &VectorField) -> Result<bool> {
        if f.is_zero() {
            return Ok(false);
        }
        let row = self.keys.row(f);
        self.coeffs.extend_cols(self.keys.len());
        if !self.coeffs.insert(row) {
            return Ok(false);
        }
        let v = f.eval(&self.point)?;
        self.values
            .insert(SparseRow::from_rational(v.into_iter().enumerate().collect()));
        Ok(true)
    }

    fn trace_rank(&self) -> usize {
        self.values.rank()
    }
}

/// Iterates `W_k = W_{k−1} + [W_0, W_{k−1}]`, keeping a linearly
/// independent list of fields and tracking the trace rank at a witness.
///
/// Affine generators span a finite-dimensional algebra, so for them only
/// closure, saturation or the cap end the loop. With nonlinear generators
/// the algebra may be infinite-dimensional and the plateau rule applies.
pub fn generate_lie_algebra(generators: &[VectorField], cert: &Genericity, opts: &LieOptions) -> Result<LieBasis> {
    let space = generators.first().ok_or(Error::EmptyFields)?.space().clone();
    if generators.iter().any(|g| g.space().as_ref() != space.as_ref()) {
        return Err(Error::SpaceMismatch);
    }
    if opts.cap == 0 {
        return Err(Error::Precondition("cap must be at least 1".into()));
    }
    let witness = find_witness(&space, cert, opts.seed)?;
    let ambient = space.len();
    let plateau = generators.iter().any(|g| g.max_degree() > 1);
    let mut filter = Filter::new(witness.point.clone());
    let mut basis = Vec::new();
    let mut warnings = Vec::new();
    for g in generators {
        if filter.insert(g)? {
            basis.push(g.clone());
        }
    }
    let mut frontier: Vec<usize> = (0..basis.len()).collect();
    let mut trace = vec![filter.trace_rank()];
    let mut iterations = 0;
    let mut flat = 0;
    let stop = loop {
        if trace[iterations] == ambient {
            break StopReason::Saturated;
        }
        if iterations == opts.cap {
            break StopReason::Cap;
        }
        iterations += 1;
        let pairs: Vec<(usize, usize)> = (0..generators.len())
            .flat_map(|g| frontier.iter().map(move |&f| (g, f)))
            .collect();
        let candidates = opts.exec.map(&pairs, |&(g, f)| lie_bracket(&generators[g], &basis[f]));
        let mut next = Vec::new();
        for c in candidates {
            let c = c?;
            if filter.insert(&c)? {
                let deg = c.max_degree();
                if deg > opts.degree_warning {
                    warnings.push(format!(
                        "iteration {iterations}: bracket of degree {deg} exceeds {}",
                        opts.degree_warning
                    ));
                }
                next.push(basis.len());
                basis.push(c);
                if basis.len() > opts.max_basis {
                    return Err(Error::LieBudget {
                        budget: opts.max_basis,
                        iteration: iterations,
                    });
                }
            }
        }
        let rank = filter.trace_rank();
        flat = if rank == trace[iterations - 1] { flat + 1 } else { 0 };
        trace.push(rank);
        if next.is_empty() {
            break StopReason::Closed;
        }
        frontier = next;
        if plateau && rank < ambient && flat >= opts.patience {
            break StopReason::Plateau;
        }
    };
    Ok(LieBasis {
        space,
        generators: generators.to_vec(),
        basis,
        iterations,
        stabilized: stop == StopReason::Closed,
        stop,
        cap: opts.cap,
        trace,
        witness,
        warnings,
    })
}

/// Rank of the basis fields evaluated at `point`.
pub fn trace_dimension(basis: &LieBasis, point: &[ExactScalar]) -> Result<usize> {
    if point.len() != basis.space.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.space.len(),
            got: point.len(),
        });
    }
    let mut ech = IntEchelon::new(point.len());
    for f in &basis.basis {
        let v = f.eval(point)?;
        ech.insert(SparseRow::from_rational(v.into_iter().enumerate().collect()));
    }
    Ok(ech.rank())
}

/// Number of independent laws given the trace dimension: `2D+1−dim` for
/// momentum flows, `D−dim` for gradient flows.
pub fn law_count_from_dim(dim: usize, d: usize, mode: FlowMode) -> Result<usize> {
    let ambient = match mode {
        FlowMode::Gf => d,
        FlowMode::Mf => 2 * d + 1,
    };
    ambient
        .checked_sub(dim)
        .ok_or_else(|| Error::Precondition(format!("dimension {dim} exceeds ambient {ambient}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> ExactScalar {
        ExactScalar::from_int(n)
    }

    #[test]
    fn matrix_commutator() {
        let s = VariableSpace::plain(&["x", "y"]);
        let a1 = VectorField::linear(&s, &[vec![q(0), q(1)], vec![q(0), q(0)]]).unwrap();
        let a2 = VectorField::linear(&s, &[vec![q(0), q(0)], vec![q(1), q(0)]]).unwrap();
        // [x↦Ax, x↦Bx] = x↦(AB − BA)x
        let b = lie_bracket(&a1, &a2).unwrap();
        let expect = VectorField::linear(&s, &[vec![q(1), q(0)], vec![q(0), q(-1)]]).unwrap();
        assert_eq!(b.components(), expect.components());
        assert!(lie_bracket(&a1, &a1).unwrap().is_zero());
    }

    #[test]
    fn swap_field_bracket() {
        let s = VariableSpace::plain(&["u", "v"]);
        let u = Polynomial::var(&s, 0);
        let v = Polynomial::var(&s, 1);
        let x = VectorField::new(&s, vec![v.clone(), u.clone()]).unwrap();
        let y = VectorField::new(&s, vec![u.clone(), v.clone()]).unwrap();
        // y is the Euler field, which commutes with every linear field.
        assert!(lie_bracket(&x, &y).unwrap().is_zero());
        let w = VectorField::new(&s, vec![&u * &u, Polynomial::zero(&s)]).unwrap();
        // ∂X·W = (0, u²), ∂W·X = (2uv, 0)
        let b = lie_bracket(&x, &w).unwrap();
        let two = ExactScalar::from_int(2);
        assert_eq!(b.components(), &[-(&u * &v).scale(&two), &u * &u]);
    }

    #[test]
    fn small_algebras() {
        let s = VariableSpace::plain(&["u", "v"]);
        let u = Polynomial::var(&s, 0);
        let v = Polynomial::var(&s, 1);
        let x = VectorField::new(&s, vec![v, u]).unwrap();
        let opts = LieOptions::default();
        let l = generate_lie_algebra(std::slice::from_ref(&x), &Genericity::Unconditional, &opts).unwrap();
        assert_eq!(l.basis.len(), 1);
        assert!(l.stabilized);
        assert_eq!(l.iterations, 1);
        let pt = [q(3), q(2)];
        assert_eq!(trace_dimension(&l, &pt).unwrap(), 1);

        let e1 = VectorField::new(&s, vec![Polynomial::one(&s), Polynomial::zero(&s)]).unwrap();
        let e2 = VectorField::new(&s, vec![Polynomial::zero(&s), Polynomial::one(&s)]).unwrap();
        let l = generate_lie_algebra(&[e1, e2], &Genericity::Unconditional, &opts).unwrap();
        assert_eq!(l.basis.len(), 2);
        assert_eq!(l.stop, StopReason::Saturated);
        assert_eq!(l.dim(), 2);
    }

    #[test]
    fn law_counts() {
        assert_eq!(law_count_from_dim(12, 6, FlowMode::Mf).unwrap(), 1);
        assert_eq!(law_count_from_dim(1, 2, FlowMode::Gf).unwrap(), 1);
        assert_eq!(law_count_from_dim(5, 2, FlowMode::Mf).unwrap(), 0);
        assert!(law_count_from_dim(3, 2, FlowMode::Gf).is_err());
    }
}
