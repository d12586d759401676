//! Seeded random rational points with a genericity certificate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ratpoly::{exact_rank, ExactScalar, Polynomial, RatMatrix, VarKind, VariableSpace};

/// Resamples allowed before a point is declared degenerate.
pub const MAX_ATTEMPTS: usize = 32;

#[derive(Clone, Debug)]
pub struct WitnessSampler {
    rng: ChaCha8Rng,
}

impl WitnessSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Numerators uniform in `[−19, 19] \ {0}`, denominators in `[1, 7]`.
    /// Time-like coordinates are drawn positive.
    pub fn sample(&mut self, space: &VariableSpace) -> Vec<ExactScalar> {
        (0..space.len())
            .map(|i| {
                let positive = matches!(space.kind(i), VarKind::Time | VarKind::TimeSurrogate);
                let num = loop {
                    let n: i64 = if positive {
                        self.rng.random_range(1..=19)
                    } else {
                        self.rng.random_range(-19..=19)
                    };
                    if n != 0 {
                        break n;
                    }
                };
                let den: i64 = self.rng.random_range(1..=7);
                ExactScalar::ratio(num, den)
            })
            .collect()
    }
}

/// Condition a witness must meet before ranks are read off it.
#[derive(Clone, Debug)]
pub enum Genericity {
    /// No condition beyond nonzero coordinates.
    Unconditional,
    /// The matrix of coordinates (indices into the point) must have full rank.
    FullRank { matrix: Vec<Vec<usize>> },
    /// The polynomial matrix (e.g. the Jacobian of `φ`) must reach `rank`.
    PolyRank { matrix: Vec<Vec<Polynomial>>, rank: usize },
}

impl Genericity {
    /// Rank of the certificate matrix at `point`.
    pub fn rank_at(&self, point: &[ExactScalar]) -> Result<usize> {
        Ok(match self {
            Self::Unconditional => 0,
            Self::FullRank { matrix } => exact_rank(&RatMatrix::from_rows(
                matrix
                    .iter()
                    .map(|r| r.iter().map(|&i| point[i].clone()).collect())
                    .collect(),
            )),
            Self::PolyRank { matrix, .. } => {
                let rows = matrix
                    .iter()
                    .map(|r| r.iter().map(|p| p.eval(point)).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?;
                exact_rank(&RatMatrix::from_rows(rows))
            }
        })
    }

    pub fn required_rank(&self) -> usize {
        match self {
            Self::Unconditional => 0,
            Self::FullRank { matrix } => matrix.len().min(matrix.first().map_or(0, Vec::len)),
            Self::PolyRank { rank, .. } => *rank,
        }
    }

    pub fn holds(&self, point: &[ExactScalar]) -> Result<bool> {
        Ok(self.rank_at(point)? >= self.required_rank())
    }

    /// Builds a `PolyRank` certificate whose target is the maximum rank seen
    /// over `samples` random points.
    pub fn poly_rank(matrix: Vec<Vec<Polynomial>>, space: &VariableSpace, seed: u64, samples: usize) -> Result<Self> {
        let mut sampler = WitnessSampler::new(seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut cert = Self::PolyRank { matrix, rank: 0 };
        let mut best = 0;
        for _ in 0..samples {
            best = best.max(cert.rank_at(&sampler.sample(space))?);
        }
        if let Self::PolyRank { rank, .. } = &mut cert {
            *rank = best;
        }
        Ok(cert)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub point: Vec<ExactScalar>,
    pub seed: u64,
    /// Number of resamples needed (0 = first draw).
    pub attempt: usize,
    /// Rank of the certificate matrix at the point.
    pub certificate_rank: usize,
}

/// Draws points until `cert` holds, at most [`MAX_ATTEMPTS`] times.
pub fn find_witness(space: &VariableSpace, cert: &Genericity, seed: u64) -> Result<Witness> {
    let mut sampler = WitnessSampler::new(seed);
    for attempt in 0..MAX_ATTEMPTS {
        let point = sampler.sample(space);
        let rank = cert.rank_at(&point)?;
        if rank >= cert.required_rank() {
            return Ok(Witness {
                point,
                seed,
                attempt,
                certificate_rank: rank,
            });
        }
    }
    Err(Error::DegenerateWitness { attempts: MAX_ATTEMPTS })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratpoly::{LayerShape, TimeCoordinate};

    #[test]
    fn sampling_is_seeded_and_in_range() {
        let space = VariableSpace::lifted(vec![LayerShape::new("U", 2, 2)], TimeCoordinate::Surrogate).unwrap();
        let a = WitnessSampler::new(5).sample(&space);
        let b = WitnessSampler::new(5).sample(&space);
        assert_eq!(a, b);
        assert!(a[0].is_positive());
        for x in &a {
            assert!(!x.is_zero());
            assert!(x.abs() <= ExactScalar::from_int(19));
            assert!(x.denom() <= &num_bigint::BigInt::from(7));
        }
    }

    #[test]
    fn degenerate_certificate_fails() {
        let space = VariableSpace::plain(&["u", "v"]);
        // The matrix [[u, u], [v, v]] never has rank 2.
        let cert = Genericity::FullRank {
            matrix: vec![vec![0, 0], vec![1, 1]],
        };
        assert!(matches!(
            find_witness(&space, &cert, 1),
            Err(Error::DegenerateWitness { attempts: 32 })
        ));
        let ok = Genericity::FullRank {
            matrix: vec![vec![0], vec![1]],
        };
        assert_eq!(find_witness(&space, &ok, 1).unwrap().certificate_rank, 1);
    }
}
