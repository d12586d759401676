use std::fmt;
use std::sync::Arc;

use super::poly::{same_space, Polynomial};
use super::scalar::ExactScalar;
use super::space::VariableSpace;
use crate::error::{Error, Result};

/// Polynomial vector field: one component per ambient coordinate.
#[derive(Clone, PartialEq, Eq)]
pub struct VectorField {
    space: Arc<VariableSpace>,
    components: Vec<Polynomial>,
}

impl VectorField {
    pub fn new(space: &Arc<VariableSpace>, components: Vec<Polynomial>) -> Result<Self> {
        if components.len() != space.len() {
            return Err(Error::DimensionMismatch {
                expected: space.len(),
                got: components.len(),
            });
        }
        if components.iter().any(|c| !same_space(c.space(), space)) {
            return Err(Error::SpaceMismatch);
        }
        Ok(Self {
            space: space.clone(),
            components,
        })
    }

    pub fn zero(space: &Arc<VariableSpace>) -> Self {
        Self {
            space: space.clone(),
            components: vec![Polynomial::zero(space); space.len()],
        }
    }

    /// The linear field `x ↦ A x` for a square rational matrix `A`.
    pub fn linear(space: &Arc<VariableSpace>, a: &[Vec<ExactScalar>]) -> Result<Self> {
        let n = space.len();
        if a.len() != n || a.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.len(),
            });
        }
        let comps = a
            .iter()
            .map(|row| {
                row.iter().enumerate().fold(Polynomial::zero(space), |acc, (j, c)| {
                    &acc + &Polynomial::var(space, j).scale(c)
                })
            })
            .collect();
        Self::new(space, comps)
    }

    pub fn space(&self) -> &Arc<VariableSpace> {
        &self.space
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Polynomial {
        &self.components[i]
    }

    pub fn into_components(self) -> Vec<Polynomial> {
        self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Polynomial::is_zero)
    }

    pub fn max_degree(&self) -> u32 {
        self.components.iter().filter_map(Polynomial::degree).max().unwrap_or(0)
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        if !same_space(&self.space, &other.space) {
            return Err(Error::SpaceMismatch);
        }
        Ok(Self {
            space: self.space.clone(),
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.checked_add(&other.scale(&ExactScalar::from_int(-1)))
    }

    pub fn scale(&self, c: &ExactScalar) -> Self {
        Self {
            space: self.space.clone(),
            components: self.components.iter().map(|p| p.scale(c)).collect(),
        }
    }

    /// Multiplies every component by the polynomial `f`.
    pub fn mul_poly(&self, f: &Polynomial) -> Result<Self> {
        let components = self
            .components
            .iter()
            .map(|p| p.checked_mul(f))
            .collect::<Result<_>>()?;
        Ok(Self {
            space: self.space.clone(),
            components,
        })
    }

    /// `⟨∇h, X⟩ = Σ_j X_j ∂_j h`, the derivative of `h` along the field.
    pub fn lie_derivative(&self, h: &Polynomial) -> Result<Polynomial> {
        if !same_space(&self.space, h.space()) {
            return Err(Error::SpaceMismatch);
        }
        let mut acc = Polynomial::zero(&self.space);
        for (j, xj) in self.components.iter().enumerate() {
            if xj.is_zero() {
                continue;
            }
            let d = h.partial(j)?;
            if d.is_zero() {
                continue;
            }
            acc = &acc + &(xj * &d);
        }
        Ok(acc)
    }

    pub fn eval(&self, point: &[ExactScalar]) -> Result<Vec<ExactScalar>> {
        self.components.iter().map(|c| c.eval(point)).collect()
    }

    pub fn eval_f64(&self, point: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.eval_f64(point)).collect()
    }

    /// Reinterprets over a space with identical length.
    pub fn rehome(&self, target: &Arc<VariableSpace>) -> Result<Self> {
        let components = self
            .components
            .iter()
            .map(|c| c.rehome(target))
            .collect::<Result<_>>()?;
        Ok(Self {
            space: target.clone(),
            components,
        })
    }
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.components.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lie_derivative_of_balancedness() {
        let s = VariableSpace::plain(&["u", "v"]);
        let u = Polynomial::var(&s, 0);
        let v = Polynomial::var(&s, 1);
        let x = VectorField::new(&s, vec![v.clone(), u.clone()]).unwrap();
        let h = &(&u * &u) - &(&v * &v);
        assert!(x.lie_derivative(&h).unwrap().is_zero());
        assert!(!x.lie_derivative(&u).unwrap().is_zero());
    }

    #[test]
    fn rejects_wrong_length() {
        let s = VariableSpace::plain(&["u", "v"]);
        assert!(VectorField::new(&s, vec![Polynomial::zero(&s)]).is_err());
    }
}
