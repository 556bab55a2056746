//! Classical (Torgerson) multidimensional scaling to two dimensions.
//!
//! The squared-distance matrix is double-centered, `B = -1/2 J D² J`, and
//! the top two eigenpairs of `B` give the coordinates `v_k * sqrt(λ_k)`.
//! Eigenpairs come from cyclic Jacobi rotations, which is plenty for the few
//! hundred points a plot needs and keeps the output deterministic.

// Index loops mirror the matrix notation.
#![allow(clippy::needless_range_loop)]

use std::fmt::Write as _;

use log::warn;
use thiserror::Error;

pub const JACOBI_TOLERANCE: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;

#[derive(Debug, Error)]
pub enum MdsError {
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("invalid distance matrix: {0}")]
    InvalidDistances(String),
    #[error("points have inconsistent dimensions")]
    RaggedPoints,
}

pub enum MdsInput<'a> {
    Points(&'a [Vec<f64>]),
    /// Square, symmetric, zero diagonal, nonnegative.
    Distances(&'a [Vec<f64>]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mds2D {
    pub labels: Vec<(String, usize)>,
    pub coords: Vec<[f64; 2]>,
    /// Top two eigenvalues of the centered Gram matrix, before clamping.
    pub eigenvalues: [f64; 2],
}

impl Mds2D {
    /// `label,occurrence_id,x,y` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("label,occurrence_id,x,y\n");
        for ((w, id), [x, y]) in self.labels.iter().zip(&self.coords) {
            let _ = writeln!(s, "{w},{id},{x},{y}");
        }
        s
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.coords[i], self.coords[j]);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    /// Mean position of all points carrying `label`.
    pub fn centroid(&self, label: &str) -> Option<[f64; 2]> {
        let pts: Vec<&[f64; 2]> = self
            .labels
            .iter()
            .zip(&self.coords)
            .filter(|((w, _), _)| w == label)
            .map(|(_, c)| c)
            .collect();
        if pts.is_empty() {
            return None;
        }
        let n = pts.len() as f64;
        Some([
            pts.iter().map(|p| p[0]).sum::<f64>() / n,
            pts.iter().map(|p| p[1]).sum::<f64>() / n,
        ])
    }

    pub fn centroid_distance(&self, a: &str, b: &str) -> Option<f64> {
        let (ca, cb) = (self.centroid(a)?, self.centroid(b)?);
        Some(((ca[0] - cb[0]).powi(2) + (ca[1] - cb[1]).powi(2)).sqrt())
    }
}

fn squared_distances(input: &MdsInput<'_>) -> Result<Vec<Vec<f64>>, MdsError> {
    match input {
        MdsInput::Points(pts) => {
            let n = pts.len();
            if n < 3 {
                return Err(MdsError::TooFewPoints(n));
            }
            let d = pts[0].len();
            if pts.iter().any(|p| p.len() != d) {
                return Err(MdsError::RaggedPoints);
            }
            let mut out = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in i + 1..n {
                    let s: f64 = pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                    out[i][j] = s;
                    out[j][i] = s;
                }
            }
            Ok(out)
        }
        MdsInput::Distances(m) => {
            let n = m.len();
            if n < 3 {
                return Err(MdsError::TooFewPoints(n));
            }
            for (i, row) in m.iter().enumerate() {
                if row.len() != n {
                    return Err(MdsError::InvalidDistances("matrix is not square".into()));
                }
                if row[i] != 0.0 {
                    return Err(MdsError::InvalidDistances(format!("nonzero diagonal at {i}")));
                }
                for (j, &v) in row.iter().enumerate() {
                    if !v.is_finite() || v < 0.0 {
                        return Err(MdsError::InvalidDistances(format!("bad entry at ({i}, {j})")));
                    }
                    let w = m[j][i];
                    if (v - w).abs() > 1e-12 * v.abs().max(w.abs()).max(1.0) {
                        return Err(MdsError::InvalidDistances(format!("asymmetric at ({i}, {j})")));
                    }
                }
            }
            Ok(m.iter()
                .enumerate()
                .map(|(i, row)| {
                    row.iter()
                        .enumerate()
                        .map(|(j, &v)| {
                            let s = 0.5 * (v + m[j][i]);
                            s * s
                        })
                        .collect()
                })
                .collect())
        }
    }
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and column eigenvectors (`vecs[row][k]`), unsorted.
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let scale: f64 = a
        .iter()
        .flatten()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(f64::MIN_POSITIVE);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_TOLERANCE * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

pub fn classical_mds(input: MdsInput<'_>, labels: Vec<(String, usize)>) -> Result<Mds2D, MdsError> {
    let d2 = squared_distances(&input)?;
    let n = d2.len();
    if labels.len() != n {
        return Err(MdsError::InvalidDistances(format!(
            "{} labels for {n} points",
            labels.len()
        )));
    }

    let row_mean: Vec<f64> = d2.iter().map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let mut b = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            // column means equal row means by symmetry
            b[i][j] = -0.5 * (d2[i][j] - row_mean[i] - row_mean[j] + grand);
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let s = 0.5 * (b[i][j] + b[j][i]);
            b[i][j] = s;
            b[j][i] = s;
        }
    }

    let (vals, vecs) = jacobi_eigen(b);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| vals[y].total_cmp(&vals[x]).then(x.cmp(&y)));

    let mut coords = vec![[0.0; 2]; n];
    let mut eigenvalues = [0.0; 2];
    for axis in 0..2 {
        let k = order[axis];
        let lambda = vals[k];
        eigenvalues[axis] = lambda;
        if lambda < 0.0 {
            warn!("eigenvalue {lambda:.3e} on axis {axis} clamped to zero; distances are not Euclidean");
        }
        let scale = lambda.max(0.0).sqrt();
        let mut col: Vec<f64> = (0..n).map(|i| vecs[i][k] * scale).collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        col.iter_mut().for_each(|c| *c -= mean);
        // Largest-magnitude entry positive; first index wins ties.
        let pivot = col
            .iter()
            .enumerate()
            .fold(0, |best, (i, c)| if c.abs() > col[best].abs() { i } else { best });
        if col[pivot] < 0.0 {
            col.iter_mut().for_each(|c| *c = -*c);
        }
        for (i, c) in col.into_iter().enumerate() {
            coords[i][axis] = c;
        }
    }
    Ok(Mds2D {
        labels,
        coords,
        eigenvalues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use rand::Rng;

    fn labels(n: usize) -> Vec<(String, usize)> {
        (0..n).map(|i| (format!("p{i}"), i)).collect()
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }

    #[test]
    fn rejects_small_and_bad_inputs() {
        let two = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(matches!(
            classical_mds(MdsInput::Distances(&two), labels(2)),
            Err(MdsError::TooFewPoints(2))
        ));
        let asym = vec![vec![0.0, 1.0, 2.0], vec![1.5, 0.0, 1.0], vec![2.0, 1.0, 0.0]];
        assert!(matches!(
            classical_mds(MdsInput::Distances(&asym), labels(3)),
            Err(MdsError::InvalidDistances(_))
        ));
    }

    #[test]
    fn collinear_three_points() {
        let d = vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]];
        let m = classical_mds(MdsInput::Distances(&d), labels(3)).unwrap();
        for i in 0..3 {
            assert!(m.coords[i][1].abs() < 1e-9);
            for j in 0..3 {
                assert!((m.distance(i, j) - d[i][j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn jacobi_diagonalizes() {
        let a = vec![vec![4.0, 1.0, 2.0], vec![1.0, 3.0, 0.5], vec![2.0, 0.5, 1.0]];
        let (vals, vecs) = jacobi_eigen(a.clone());
        for k in 0..3 {
            for i in 0..3 {
                let av: f64 = (0..3).map(|j| a[i][j] * vecs[j][k]).sum();
                assert!((av - vals[k] * vecs[i][k]).abs() < 1e-10);
            }
        }
        assert!((vals.iter().sum::<f64>() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn planar_points_recovered_in_high_dim() {
        let mut rng = seeded(11);
        let plane: Vec<[f64; 2]> = (0..30)
            .map(|_| [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)])
            .collect();
        // Two orthonormal 50-d directions via Gram-Schmidt.
        let mut u: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
        let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        u.iter_mut().for_each(|x| *x /= nu);
        let mut w: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p: f64 = u.iter().zip(&w).map(|(a, b)| a * b).sum();
        w.iter_mut().zip(&u).for_each(|(x, y)| *x -= p * y);
        let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        w.iter_mut().for_each(|x| *x /= nw);
        let offset: Vec<f64> = (0..50).map(|_| rng.random_range(-5.0..5.0)).collect();
        let pts: Vec<Vec<f64>> = plane
            .iter()
            .map(|q| (0..50).map(|k| offset[k] + q[0] * u[k] + q[1] * w[k]).collect())
            .collect();
        let m = classical_mds(MdsInput::Points(&pts), labels(30)).unwrap();
        for i in 0..30 {
            for j in 0..30 {
                assert!((m.distance(i, j) - dist(&pts[i], &pts[j])).abs() < 1e-8);
            }
        }
        let cx: f64 = m.coords.iter().map(|c| c[0]).sum::<f64>() / 30.0;
        let cy: f64 = m.coords.iter().map(|c| c[1]).sum::<f64>() / 30.0;
        assert!(cx.abs() < 1e-9 && cy.abs() < 1e-9);
    }

    #[test]
    fn deterministic_and_sign_canonical() {
        let mut rng = seeded(3);
        let pts: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let a = classical_mds(MdsInput::Points(&pts), labels(12)).unwrap();
        let b = classical_mds(MdsInput::Points(&pts), labels(12)).unwrap();
        assert_eq!(a, b);
        for axis in 0..2 {
            let big = a
                .coords
                .iter()
                .map(|c| c[axis])
                .fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn rotation_invariant_distances() {
        let mut rng = seeded(5);
        let pts: Vec<Vec<f64>> = (0..10)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0])
            .collect();
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let rot: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| vec![c * p[0] - s * p[1], s * p[0] + c * p[1], p[2] + 2.0])
            .collect();
        let a = classical_mds(MdsInput::Points(&pts), labels(10)).unwrap();
        let b = classical_mds(MdsInput::Points(&rot), labels(10)).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                assert!((a.distance(i, j) - b.distance(i, j)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn csv_shape() {
        let d = vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
        let m = classical_mds(
            MdsInput::Distances(&d),
            vec![("a".into(), 0), ("a".into(), 1), ("b".into(), 0)],
        )
        .unwrap();
        let csv = m.to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("label,occurrence_id,x,y\n"));
        assert!(m.centroid_distance("a", "b").unwrap() > 0.0);
    }
}
