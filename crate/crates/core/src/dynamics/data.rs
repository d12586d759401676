use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::network::{input_dim, output_dim, predict};
use crate::error::{Error, Result};
use crate::model::Architecture;

/// Inputs `x` (columns are samples) and targets `y`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub seed: u64,
}

impl Dataset {
    pub fn samples(&self) -> usize {
        self.x.ncols()
    }
}

pub(crate) fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Standard-normal inputs with targets from a random teacher of the same
/// architecture (a random linear map for linear networks). With
/// `nonnegative`, targets are replaced by their absolute values.
pub fn make_synthetic_dataset(arch: &Architecture, p: usize, seed: u64, nonnegative: bool) -> Result<Dataset> {
    arch.validate()?;
    if p == 0 {
        return Err(Error::Precondition("need at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = normal_matrix(&mut rng, input_dim(arch), p);
    let mut y = match arch {
        Architecture::Linear { .. } => normal_matrix(&mut rng, output_dim(arch), input_dim(arch)) * &x,
        Architecture::Relu2 { .. } => {
            let teacher: Vec<f64> = (0..arch.num_params())
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            predict(arch, &teacher, &x)?
        }
    };
    if nonnegative {
        y.apply(|v| *v = v.abs());
    }
    Ok(Dataset { x, y, seed })
}
