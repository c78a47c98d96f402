//! Exact integer and rational linear algebra, polynomials and lattice primitives.

pub mod arith;
pub mod bivariate;
pub mod lattice;
pub mod matrix;
pub mod modpoly;
pub mod mpoly;
pub mod normal_form;
pub mod poly;

pub use arith::perfect_square_part;
pub use bivariate::BiPoly;
pub use lattice::{lattice_points_in_box, reduce_basis, LatticeBasis};
pub use matrix::IntMatrix;
pub use normal_form::{congruence_kernel, hnf, snf};
pub use poly::{poly_square_root, resultant, IntPolynomial};
