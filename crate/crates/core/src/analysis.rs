//! Interpretive transforms of fitted models and raw perception tensors.

use ndarray::{s, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{matrix_rows, NNTuckModel};
use crate::tensor::Tensor3;

/// Smallest singular value a basis selection may have.
pub const BASIS_RANK_TOL: f64 = 1e-8;

/// `Y` and the core rewritten so `C` chosen layers become the coordinate axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeSpace {
    pub basis_layers: Vec<usize>,
    /// Rows of `Y` at `basis_layers`.
    #[serde(with = "matrix_rows")]
    pub b: Array2<f64>,
    /// `Y · B⁻¹`; entries may be negative.
    #[serde(with = "matrix_rows")]
    pub y_star: Array2<f64>,
    /// `G ×₃ B`.
    pub g_star: Tensor3,
}

impl RelativeSpace {
    /// `G* ×₁ U ×₂ V ×₃ Y*` as row-major values. Equal to the original
    /// reconstruction up to rounding; may hold tiny negative values.
    pub fn reconstruct(&self, m: &NNTuckModel) -> Vec<f64> {
        self.g_star
            .mode_product_view(m.u().view(), 1)
            .mode_product_view(m.v().view(), 2)
            .mode_product_view(self.y_star.view(), 3)
            .into_values()
    }
}

/// Picks `C` rows of the `L × C` matrix `y` spanning a large volume.
///
/// Greedy pivoting takes, at each step, the row with the largest component
/// orthogonal to the rows already chosen; single-row swaps then run until no
/// swap increases `|det B|`. The result is locally optimal under swaps.
pub fn select_basis_layers(y: &Array2<f64>) -> Result<Vec<usize>> {
    let (l, c) = y.dim();
    if c == 0 || c > l {
        return Err(Error::arg(format!("Y is {l} × {c}; need 1 ≤ C ≤ L")));
    }
    let mut residual = y.clone();
    let mut chosen: Vec<usize> = Vec::with_capacity(c);
    for step in 0..c {
        let (pivot, norm) = (0..l)
            .filter(|r| !chosen.contains(r))
            .map(|r| (r, residual.row(r).dot(&residual.row(r)).sqrt()))
            .fold((usize::MAX, -1.0), |best, cand| if cand.1 > best.1 { cand } else { best });
        if norm <= BASIS_RANK_TOL {
            return Err(Error::RankDeficient(format!(
                "Y ({l} × {c}) has rank {step} < C = {c}: no row adds a new direction after {step} picks"
            )));
        }
        chosen.push(pivot);
        let q = residual.row(pivot).to_owned() / norm;
        for r in 0..l {
            let proj = residual.row(r).dot(&q);
            residual.row_mut(r).scaled_add(-proj, &q);
        }
    }
    let mut current = abs_det(&gather_rows(y, &chosen));
    let mut improved = true;
    while improved {
        improved = false;
        for pos in 0..c {
            for r in 0..l {
                if chosen.contains(&r) {
                    continue;
                }
                let mut trial = chosen.clone();
                trial[pos] = r;
                let d = abs_det(&gather_rows(y, &trial));
                if d > current * (1.0 + 1e-12) {
                    chosen = trial;
                    current = d;
                    improved = true;
                }
            }
        }
    }
    let sigma = min_singular_value(&gather_rows(y, &chosen));
    if sigma <= BASIS_RANK_TOL {
        return Err(Error::RankDeficient(format!(
            "Y ({l} × {c}) is numerically below rank C = {c}: best selection has smallest singular value {sigma:e}"
        )));
    }
    Ok(chosen)
}

/// Rewrites `m` in the basis of the layers `basis`.
pub fn to_relative(m: &NNTuckModel, basis: &[usize]) -> Result<RelativeSpace> {
    let (l, c) = m.y().dim();
    if basis.len() != c {
        return Err(Error::arg(format!("basis needs C = {c} layers, got {}", basis.len())));
    }
    for (idx, &r) in basis.iter().enumerate() {
        if r >= l {
            return Err(Error::arg(format!("basis layer {r} out of range for L = {l}")));
        }
        if basis[..idx].contains(&r) {
            return Err(Error::arg(format!("basis layer {r} listed twice")));
        }
    }
    let b = gather_rows(m.y(), basis);
    let b_inv = inverse(&b).ok_or_else(|| Error::arg(format!("basis rows {basis:?} of Y are singular")))?;
    let y_star = m.y().dot(&b_inv);
    let g_star = m.core().mode_product(&b, 3)?;
    Ok(RelativeSpace {
        basis_layers: basis.to_vec(),
        b,
        y_star,
        g_star,
    })
}

/// Edge `(i, j)` when at least half of the layers report it (`2·count ≥ L`).
pub fn consensus(a: &Tensor3) -> Array2<u8> {
    let [n1, n2, l] = a.dims();
    Array2::from_shape_fn((n1, n2), |(i, j)| {
        let count = (0..l).filter(|&k| a.get(i, j, k) > 0.0).count();
        u8::from(2 * count >= l)
    })
}

/// Edge `(i, j)` when the sender's own layer `i` reports it. Needs `L = N`.
pub fn locally_aggregated(a: &Tensor3) -> Result<Array2<u8>> {
    let [n1, n2, l] = a.dims();
    if n1 != n2 || l != n1 {
        return Err(Error::arg(format!(
            "locally aggregated structure needs an N × N × N tensor, got {n1} × {n2} × {l}"
        )));
    }
    Ok(Array2::from_shape_fn((n1, n2), |(i, j)| u8::from(a.get(i, j, i) > 0.0)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    /// Each nonzero row divided by its sum.
    #[serde(with = "matrix_rows")]
    pub matrix: Array2<f64>,
    /// Rows that were all zero and stay zero.
    pub zero_rows: Vec<usize>,
}

/// Normalizes the rows of a nonnegative matrix to sum to one.
pub fn proportional_membership(m: &Array2<f64>) -> Membership {
    let mut matrix = m.clone();
    let mut zero_rows = Vec::new();
    for (r, mut row) in matrix.rows_mut().into_iter().enumerate() {
        let sum: f64 = row.sum();
        if sum > 0.0 {
            row /= sum;
        } else {
            zero_rows.push(r);
        }
    }
    Membership { matrix, zero_rows }
}

fn gather_rows(m: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((rows.len(), m.ncols()));
    for (dst, &src) in rows.iter().enumerate() {
        out.row_mut(dst).assign(&m.row(src));
    }
    out
}

/// LU factorization with partial pivoting: `(lu, row permutation, sign)`,
/// `None` on an exactly zero pivot.
fn lu(a: &Array2<f64>) -> Option<(Array2<f64>, Vec<usize>, f64)> {
    let n = a.nrows();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| lu[[x, col]].abs().total_cmp(&lu[[y, col]].abs()))?;
        if lu[[pivot, col]] == 0.0 {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                lu.swap([pivot, j], [col, j]);
            }
            perm.swap(pivot, col);
            sign = -sign;
        }
        for r in col + 1..n {
            let factor = lu[[r, col]] / lu[[col, col]];
            lu[[r, col]] = factor;
            for j in col + 1..n {
                lu[[r, j]] -= factor * lu[[col, j]];
            }
        }
    }
    Some((lu, perm, sign))
}

fn abs_det(a: &Array2<f64>) -> f64 {
    match lu(a) {
        Some((lu, _, _)) => (0..a.nrows()).map(|i| lu[[i, i]]).product::<f64>().abs(),
        None => 0.0,
    }
}

fn inverse(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let (lu, perm, _) = lu(a)?;
    let mut inv = Array2::zeros((n, n));
    for col in 0..n {
        // solve L U x = P e_col
        let mut x: Vec<f64> = (0..n).map(|r| if perm[r] == col { 1.0 } else { 0.0 }).collect();
        for r in 0..n {
            for j in 0..r {
                x[r] -= lu[[r, j]] * x[j];
            }
        }
        for r in (0..n).rev() {
            for j in r + 1..n {
                x[r] -= lu[[r, j]] * x[j];
            }
            x[r] /= lu[[r, r]];
        }
        inv.slice_mut(s![.., col]).assign(&ndarray::Array1::from(x));
    }
    inv.iter().all(|x| x.is_finite()).then_some(inv)
}

/// Smallest singular value via cyclic Jacobi on `AᵀA`.
fn min_singular_value(a: &Array2<f64>) -> f64 {
    let mut m = a.t().dot(a);
    let n = m.nrows();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| m[[p, q]] * m[[p, q]])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * m[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let (cos, sin) = (1.0 / (t * t + 1.0).sqrt(), t / (t * t + 1.0).sqrt());
                for k in 0..n {
                    let (mkp, mkq) = (m[[k, p]], m[[k, q]]);
                    m[[k, p]] = cos * mkp - sin * mkq;
                    m[[k, q]] = sin * mkp + cos * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[[p, k]], m[[q, k]]);
                    m[[p, k]] = cos * mpk - sin * mqk;
                    m[[q, k]] = sin * mpk + cos * mqk;
                }
            }
        }
    }
    (0..n).map(|i| m[[i, i]]).fold(f64::INFINITY, f64::min).max(0.0).sqrt()
}
