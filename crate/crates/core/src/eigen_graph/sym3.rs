//! Eigendecomposition of symmetric 3×3 matrices.
//!
//! The eigenvalues come from the trace-shifted characteristic cubic solved
//! with the trigonometric formula. Eigenvectors of well-separated eigenvalues
//! come from cross products of rows of `A - λI`; when two eigenvalues nearly
//! collide the whole decomposition is redone with cyclic Jacobi sweeps, which
//! keeps the basis orthonormal.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Maximum |A - Aᵀ| accepted as symmetric.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;
/// Eigenvalues in `[-ZERO_CLAMP, 0)` are reported as exactly zero.
pub const ZERO_CLAMP: f64 = 1e-10;
/// Relative eigenvalue gap below which the Jacobi path is used.
pub const JACOBI_GAP: f64 = 1e-6;

/// Eigenvalues in descending order and the matching unit eigenvectors as
/// the columns of a proper rotation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymEigen {
    pub values: [f64; 3],
    pub vectors: Matrix3<f64>,
}

impl SymEigen {
    pub fn reconstruct(&self) -> Matrix3<f64> {
        let l = Matrix3::from_diagonal(&Vector3::from(self.values));
        self.vectors * l * self.vectors.transpose()
    }
}

/// Decomposes a symmetric matrix; asymmetry beyond [`SYMMETRY_TOLERANCE`]
/// is rejected.
pub fn eig_sym3(c: &Matrix3<f64>) -> Result<SymEigen> {
    let asym = (c - c.transpose()).amax();
    if !(asym <= SYMMETRY_TOLERANCE) {
        return Err(Error::invalid(format!(
            "eig_sym3: matrix is not symmetric (max |A - Aᵀ| = {asym:e})"
        )));
    }
    let a = (c + c.transpose()) * 0.5;
    let mut out = analytic(&a).unwrap_or_else(|| jacobi(&a));
    for v in out.values.iter_mut() {
        if *v < 0.0 && *v >= -ZERO_CLAMP {
            *v = 0.0;
        }
    }
    Ok(out)
}

fn analytic(a: &Matrix3<f64>) -> Option<SymEigen> {
    let p1 = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
    if p1 == 0.0 {
        return Some(diagonal(a));
    }
    let q = a.trace() / 3.0;
    let p2 = (a[(0, 0)] - q).powi(2) + (a[(1, 1)] - q).powi(2) + (a[(2, 2)] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b = (a - Matrix3::identity() * q) / p;
    let r = (b.determinant() / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let l1 = q + 2.0 * p * phi.cos();
    let l3 = q + 2.0 * p * (phi + TAU / 3.0).cos();
    let l2 = 3.0 * q - l1 - l3;

    let scale = l1.abs().max(l3.abs());
    let gap = (l1 - l2).min(l2 - l3);
    if !(gap > JACOBI_GAP * scale) {
        return None;
    }
    let v1 = null_vector(a, l1)?;
    let v3 = null_vector(a, l3)?;
    let v3 = (v3 - v1 * v1.dot(&v3)).try_normalize(0.0)?;
    let v2 = v3.cross(&v1);
    Some(SymEigen {
        values: [l1, l2, l3],
        vectors: Matrix3::from_columns(&[v1, v2, v3]),
    })
}

/// Unit vector spanning the null space of `A - λI` for a simple eigenvalue.
fn null_vector(a: &Matrix3<f64>, lambda: f64) -> Option<Vector3<f64>> {
    let m = a - Matrix3::identity() * lambda;
    let r0 = m.row(0).transpose();
    let r1 = m.row(1).transpose();
    let r2 = m.row(2).transpose();
    let candidates = [r0.cross(&r1), r0.cross(&r2), r1.cross(&r2)];
    let best = candidates
        .iter()
        .max_by(|x, y| x.norm_squared().total_cmp(&y.norm_squared()))?;
    best.try_normalize(0.0)
}

fn diagonal(a: &Matrix3<f64>) -> SymEigen {
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    sorted_pairs(a.diagonal().into(), Matrix3::identity(), order)
}

/// Packs eigenpairs in the given order, flipping the last column if needed
/// so the basis has determinant +1.
fn sorted_pairs(values: [f64; 3], vectors: Matrix3<f64>, order: [usize; 3]) -> SymEigen {
    let mut v = Matrix3::from_columns(&[
        vectors.column(order[0]).into_owned(),
        vectors.column(order[1]).into_owned(),
        vectors.column(order[2]).into_owned(),
    ]);
    if v.determinant() < 0.0 {
        v.set_column(2, &(-v.column(2)));
    }
    SymEigen {
        values: [values[order[0]], values[order[1]], values[order[2]]],
        vectors: v,
    }
}

fn jacobi(a: &Matrix3<f64>) -> SymEigen {
    let mut m = *a;
    let mut v = Matrix3::<f64>::identity();
    let norm = m.norm();
    for _sweep in 0..64 {
        let off = m[(0, 1)].abs() + m[(0, 2)].abs() + m[(1, 2)].abs();
        if off <= f64::EPSILON * 1e-3 * norm || off == 0.0 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let apq = m[(p, q)];
            if apq == 0.0 {
                continue;
            }
            let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut rot = Matrix3::<f64>::identity();
            rot[(p, p)] = c;
            rot[(q, q)] = c;
            rot[(p, q)] = s;
            rot[(q, p)] = -s;
            m = rot.transpose() * m * rot;
            m[(p, q)] = 0.0;
            m[(q, p)] = 0.0;
            v *= rot;
        }
    }
    let values: [f64; 3] = m.diagonal().into();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    sorted_pairs(values, v, order)
}
