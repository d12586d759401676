use std::sync::Arc;

use super::poly::Polynomial;
use super::space::VariableSpace;

/// Small dense matrix of polynomials, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Polynomial>,
}

/// Which block of a lifted space a symbolic weight matrix reads from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    Parameter,
    Velocity,
}

impl PolyMatrix {
    pub fn zeros(space: &Arc<VariableSpace>, rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Polynomial::zero(space); rows * cols],
        }
    }

    /// Symbolic weight matrix `layer` of `space` (or its velocity).
    pub fn layer(space: &Arc<VariableSpace>, layer: usize, block: Block) -> Self {
        let shape = &space.layers()[layer];
        let mut m = Self::zeros(space, shape.rows, shape.cols);
        for i in 0..shape.rows {
            for j in 0..shape.cols {
                let k = space.entry(layer, i, j);
                let var = match block {
                    Block::Parameter => space.param(k),
                    Block::Velocity => space.velocity(k).expect("space has velocities"),
                };
                m.data[i * shape.cols + j] = Polynomial::var(space, var);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &Polynomial {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, p: Polynomial) {
        self.data[i * self.cols + j] = p;
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j).clone());
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "shape mismatch");
        let space = self.data[0].space();
        let mut out = Self::zeros(space, self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = Polynomial::zero(space);
                for k in 0..self.cols {
                    acc = &acc + &(self.get(i, k) * other.get(k, j));
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Frobenius inner product `Tr(AᵀB)`.
    pub fn inner(&self, other: &Self) -> Polynomial {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let space = self.data[0].space();
        self.data
            .iter()
            .zip(&other.data)
            .fold(Polynomial::zero(space), |acc, (a, b)| &acc + &(a * b))
    }

    /// Entries in column-major order.
    pub fn column_major(&self) -> Vec<Polynomial> {
        let mut out = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.push(self.get(i, j).clone());
            }
        }
        out
    }
}
