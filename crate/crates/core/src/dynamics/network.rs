//! Numeric forward pass, quadratic loss, its gradient and the model
//! Jacobian. Parameters are laid out as in the symbolic parameter space:
//! layers in order, each column-major.

use nalgebra::{DMatrix, DVector};

use super::data::Dataset;
use crate::error::{Error, Result};
use crate::model::Architecture;

pub fn input_dim(arch: &Architecture) -> usize {
    match arch {
        Architecture::Linear { widths } => *widths.last().expect("validated"),
        Architecture::Relu2 { m, .. } => *m,
    }
}

pub fn output_dim(arch: &Architecture) -> usize {
    match arch {
        Architecture::Linear { widths } => widths[0],
        Architecture::Relu2 { n, .. } => *n,
    }
}

/// The layers of `theta` as matrices.
pub fn unpack(arch: &Architecture, theta: &[f64]) -> Result<Vec<DMatrix<f64>>> {
    if theta.len() != arch.num_params() {
        return Err(Error::DimensionMismatch {
            expected: arch.num_params(),
            got: theta.len(),
        });
    }
    let mut off = 0;
    Ok(arch
        .layers()
        .iter()
        .map(|l| {
            let m = DMatrix::from_column_slice(l.rows, l.cols, &theta[off..off + l.len()]);
            off += l.len();
            m
        })
        .collect())
}

fn pack(mats: &[DMatrix<f64>]) -> Vec<f64> {
    mats.iter().flat_map(|m| m.as_slice().iter().copied()).collect()
}

fn relu(z: f64) -> f64 {
    z.max(0.0)
}

fn relu_grad(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Pre-activations `Vᵀx + b` of a ReLU network.
fn pre_activation(mats: &[DMatrix<f64>], bias: bool, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut z = mats[1].transpose() * x;
    if bias {
        for mut col in z.column_iter_mut() {
            col += mats[2].row(0).transpose();
        }
    }
    z
}

fn chain(mats: &[DMatrix<f64>], from: usize, to: usize, dim: usize) -> DMatrix<f64> {
    mats[from..to]
        .iter()
        .fold(DMatrix::identity(dim, dim), |acc, m| acc * m)
}

/// Network outputs for the columns of `x`.
pub fn predict(arch: &Architecture, theta: &[f64], x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mats = unpack(arch, theta)?;
    Ok(match arch {
        Architecture::Linear { widths } => chain(&mats, 0, mats.len(), widths[0]) * x,
        &Architecture::Relu2 { bias, out_bias, .. } => {
            let a = pre_activation(&mats, bias, x).map(relu);
            let mut out = &mats[0] * a;
            if out_bias {
                let c = &mats[if bias { 3 } else { 2 }];
                for mut col in out.column_iter_mut() {
                    col += c.column(0);
                }
            }
            out
        }
    })
}

/// `E(θ) = (1/p) Σ_i ‖g(θ, x_i) − y_i‖²`.
pub fn loss(arch: &Architecture, theta: &[f64], data: &Dataset) -> Result<f64> {
    let r = predict(arch, theta, &data.x)? - &data.y;
    Ok(r.norm_squared() / data.samples() as f64)
}

/// `∇E(θ)` in the parameter layout.
pub fn loss_gradient(arch: &Architecture, theta: &[f64], data: &Dataset) -> Result<Vec<f64>> {
    let mats = unpack(arch, theta)?;
    let p = data.samples() as f64;
    Ok(match arch {
        Architecture::Linear { widths } => {
            let q = mats.len();
            let prod = chain(&mats, 0, q, widths[0]);
            let g = (prod * &data.x - &data.y) * data.x.transpose() * (2.0 / p);
            let grads: Vec<DMatrix<f64>> = (0..q)
                .map(|i| {
                    let left = chain(&mats, 0, i, widths[0]);
                    let right = chain(&mats, i + 1, q, widths[i + 1]);
                    left.transpose() * &g * right.transpose()
                })
                .collect();
            pack(&grads)
        }
        &Architecture::Relu2 { bias, out_bias, .. } => {
            let z = pre_activation(&mats, bias, &data.x);
            let a = z.map(relu);
            let mut out = &mats[0] * &a;
            if out_bias {
                let c = &mats[if bias { 3 } else { 2 }];
                for mut col in out.column_iter_mut() {
                    col += c.column(0);
                }
            }
            let g = (out - &data.y) * (2.0 / p);
            let mut grads = vec![&g * a.transpose()];
            let dz = (mats[0].transpose() * &g).component_mul(&z.map(relu_grad));
            grads.push(&data.x * dz.transpose());
            if bias {
                grads.push(DMatrix::from_row_slice(1, dz.nrows(), dz.column_sum().as_slice()));
            }
            if out_bias {
                grads.push(DMatrix::from_column_slice(g.nrows(), 1, g.column_sum().as_slice()));
            }
            pack(&grads)
        }
    })
}

/// `∂g(θ, x)/∂θ` for one input, shape `out × D`.
pub fn jacobian(arch: &Architecture, theta: &[f64], x: &DVector<f64>) -> Result<DMatrix<f64>> {
    let mats = unpack(arch, theta)?;
    let out_dim = output_dim(arch);
    let mut jac = DMatrix::zeros(out_dim, arch.num_params());
    let mut col = 0;
    match arch {
        Architecture::Linear { widths } => {
            let q = mats.len();
            for i in 0..q {
                let left = chain(&mats, 0, i, widths[0]);
                let rx = chain(&mats, i + 1, q, widths[i + 1]) * x;
                // ∂(U_1⋯U_q x)/∂U_i[a,b] = left[:, a] · (rest·x)[b]
                for b in 0..widths[i + 1] {
                    for a in 0..widths[i] {
                        jac.set_column(col, &(left.column(a) * rx[b]));
                        col += 1;
                    }
                }
            }
        }
        &Architecture::Relu2 {
            n,
            m,
            r,
            bias,
            out_bias,
        } => {
            let xm = DMatrix::from_column_slice(x.len(), 1, x.as_slice());
            let z = pre_activation(&mats, bias, &xm);
            let u = &mats[0];
            for j in 0..r {
                for k in 0..n {
                    jac[(k, col)] = relu(z[(j, 0)]);
                    col += 1;
                }
            }
            let grad_at = |j: usize| u.column(j) * relu_grad(z[(j, 0)]);
            for j in 0..r {
                for l in 0..m {
                    jac.set_column(col, &(grad_at(j) * x[l]));
                    col += 1;
                }
            }
            if bias {
                for j in 0..r {
                    jac.set_column(col, &grad_at(j));
                    col += 1;
                }
            }
            if out_bias {
                for k in 0..n {
                    jac[(k, col)] = 1.0;
                    col += 1;
                }
            }
        }
    }
    Ok(jac)
}

/// `H = (1/p) Σ_i J_iᵀ J_i`.
pub fn gram(arch: &Architecture, theta: &[f64], data: &Dataset) -> Result<DMatrix<f64>> {
    let d = arch.num_params();
    let mut h = DMatrix::zeros(d, d);
    for x in data.x.column_iter() {
        let j = jacobian(arch, theta, &x.into_owned())?;
        h += j.transpose() * j;
    }
    Ok(h / data.samples() as f64)
}

/// Relative cutoff for singular values in [`pseudo_inverse`].
pub const PINV_RTOL: f64 = 1e-10;

/// Moore–Penrose pseudo-inverse; singular values below
/// `PINV_RTOL · σ_max` are treated as zero.
pub fn pseudo_inverse(h: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = h.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return DMatrix::zeros(h.ncols(), h.nrows());
    }
    svd.pseudo_inverse(PINV_RTOL * smax).expect("u and v were computed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::data::make_synthetic_dataset;

    #[test]
    fn scalar_gram() {
        let arch = Architecture::linear(&[1, 1, 1]).unwrap();
        let data = Dataset {
            x: DMatrix::from_row_slice(1, 2, &[1.0, 2.0]),
            y: DMatrix::zeros(1, 2),
            seed: 0,
        };
        // g = u·v·x: J = (v x, u x); at u = 1, v = 1, H = mean(x²)·[[1,1],[1,1]].
        let h = gram(&arch, &[1.0, 1.0], &data).unwrap();
        assert!((h[(0, 0)] - 2.5).abs() < 1e-15);
        assert!((h[(0, 1)] - 2.5).abs() < 1e-15);
        let zero = pseudo_inverse(&DMatrix::zeros(2, 2));
        assert_eq!(zero, DMatrix::zeros(2, 2));
    }

    #[test]
    fn relu_prediction_matches_hand_value() {
        let arch = Architecture::relu2(1, 1, 2, true);
        // U = [1, 2], V = [3, −1], b = [0.5, 0.5], x = 1:
        // σ(3.5) = 3.5, σ(−0.5) = 0 → 3.5.
        let theta = [1.0, 2.0, 3.0, -1.0, 0.5, 0.5];
        let y = predict(&arch, &theta, &DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert_eq!(y[(0, 0)], 3.5);
        let d = make_synthetic_dataset(&arch, 4, 3, false).unwrap();
        assert!(loss(&arch, &theta, &d).unwrap().is_finite());
    }
}
