//! Exact rationals, sparse multivariate polynomials, polynomial vector fields
//! and exact linear algebra.

pub mod field;
pub mod linalg;
pub mod poly;
pub mod polymat;
pub mod scalar;
pub mod space;

pub use field::VectorField;
pub use linalg::{exact_nullspace, exact_rank, RatMatrix};
pub use poly::{Monomial, Polynomial, PolynomialJson};
pub use polymat::{Block, PolyMatrix};
pub use scalar::ExactScalar;
pub use space::{LayerShape, TimeCoordinate, VarKind, VariableSpace};
