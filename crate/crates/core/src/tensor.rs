//! Dense third-order tensors, observation masks, and the multilinear kernel.
//!
//! Storage is row-major in `(i, j, k)`: entry `(i, j, k)` of a tensor with
//! dims `(n1, n2, n3)` lives at offset `(i * n2 + j) * n3 + k`.
//!
//! Unfoldings follow the Kolda–Bader convention: the mode-`n` fibers become
//! columns and, among the remaining modes, the earlier one varies fastest.
//! So the mode-1 unfolding places `(i, j, k)` at row `i`, column `j + k * n2`.

use ndarray::{linalg::general_mat_mul, Array2, ArrayView2, ArrayViewMut2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::ln_factorial;

/// Floor applied to reconstructed rates inside logarithms and ratios.
pub const RATE_FLOOR: f64 = 1e-10;

/// Dense nonnegative `n1 × n2 × n3` tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTensor", into = "RawTensor")]
pub struct Tensor3 {
    dims: [usize; 3],
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawTensor {
    dims: [usize; 3],
    values: Vec<f64>,
}

impl TryFrom<RawTensor> for Tensor3 {
    type Error = Error;

    fn try_from(raw: RawTensor) -> Result<Self> {
        Tensor3::new(raw.dims, raw.values)
    }
}

impl From<Tensor3> for RawTensor {
    fn from(t: Tensor3) -> Self {
        RawTensor {
            dims: t.dims,
            values: t.values,
        }
    }
}

impl Tensor3 {
    /// Builds a tensor, rejecting empty dims, length mismatches, and
    /// negative or non-finite entries.
    pub fn new(dims: [usize; 3], values: Vec<f64>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::arg(format!("tensor dims must be positive, got {dims:?}")));
        }
        let expected = dims[0] * dims[1] * dims[2];
        if values.len() != expected {
            return Err(Error::arg(format!(
                "tensor dims {dims:?} need {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::arg(format!(
                "tensor entries must be finite and nonnegative; entry {pos} is {}",
                values[pos]
            )));
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: [usize; 3]) -> Self {
        assert!(dims.iter().all(|&d| d > 0), "tensor dims must be positive");
        Self {
            dims,
            values: vec![0.0; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(dims.iter().product());
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    values.push(f(i, j, k));
                }
            }
        }
        Self::new(dims, values)
    }

    /// Caller guarantees length and sign invariants.
    pub(crate) fn from_raw(dims: [usize; 3], values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), dims[0] * dims[1] * dims[2]);
        Self { dims, values }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.offset(i, j, k)]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &Tensor3) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Mode-`mode` unfolding (`mode` is 1, 2 or 3).
    pub fn unfold(&self, mode: usize) -> Result<Array2<f64>> {
        let [n1, n2, n3] = self.dims;
        let out = match mode {
            1 => Array2::from_shape_fn((n1, n2 * n3), |(i, col)| self.get(i, col % n2, col / n2)),
            2 => Array2::from_shape_fn((n2, n1 * n3), |(j, col)| self.get(col % n1, j, col / n1)),
            3 => Array2::from_shape_fn((n3, n1 * n2), |(k, col)| self.get(col % n1, col / n1, k)),
            _ => return Err(invalid_mode(mode)),
        };
        Ok(out)
    }

    /// Inverse of [`Tensor3::unfold`].
    pub fn fold(matrix: &Array2<f64>, mode: usize, dims: [usize; 3]) -> Result<Tensor3> {
        let [n1, n2, n3] = dims;
        let shape = match mode {
            1 => (n1, n2 * n3),
            2 => (n2, n1 * n3),
            3 => (n3, n1 * n2),
            _ => return Err(invalid_mode(mode)),
        };
        if matrix.dim() != shape {
            return Err(Error::arg(format!(
                "cannot fold a {:?} matrix along mode {mode} into dims {dims:?}",
                matrix.dim()
            )));
        }
        Tensor3::from_fn(dims, |i, j, k| match mode {
            1 => matrix[[i, j + k * n2]],
            2 => matrix[[j, i + k * n1]],
            _ => matrix[[k, i + j * n1]],
        })
    }

    /// Mode-`mode` product `self ×ₙ m`, where `m` has as many columns as
    /// `self` has entries along `mode`. The result equals
    /// `fold(m · unfold(self, mode), mode)`.
    pub fn mode_product(&self, m: &Array2<f64>, mode: usize) -> Result<Tensor3> {
        if !(1..=3).contains(&mode) {
            return Err(invalid_mode(mode));
        }
        let along = self.dims[mode - 1];
        if m.ncols() != along {
            return Err(Error::arg(format!(
                "mode-{mode} product needs a matrix with {along} columns, got {:?}",
                m.dim()
            )));
        }
        if let Some(bad) = m.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::arg(format!("mode product matrix must be nonnegative, found {bad}")));
        }
        Ok(self.mode_product_view(m.view(), mode))
    }

    /// Unchecked mode product on views; shapes are the caller's problem.
    pub(crate) fn mode_product_view(&self, m: ArrayView2<f64>, mode: usize) -> Tensor3 {
        let [n1, n2, n3] = self.dims;
        let r = m.nrows();
        match mode {
            1 => {
                let t = ArrayView2::from_shape((n1, n2 * n3), &self.values).unwrap();
                let out = m.dot(&t);
                Tensor3::from_raw([r, n2, n3], into_vec(out))
            }
            2 => {
                let mut values = vec![0.0; n1 * r * n3];
                for (i, chunk) in values.chunks_exact_mut(r * n3).enumerate() {
                    let slice = ArrayView2::from_shape((n2, n3), &self.values[i * n2 * n3..(i + 1) * n2 * n3]).unwrap();
                    let mut dst = ArrayViewMut2::from_shape((r, n3), chunk).unwrap();
                    general_mat_mul(1.0, &m, &slice, 0.0, &mut dst);
                }
                Tensor3::from_raw([n1, r, n3], values)
            }
            _ => {
                let t = ArrayView2::from_shape((n1 * n2, n3), &self.values).unwrap();
                let out = t.dot(&m.t());
                Tensor3::from_raw([n1, n2, r], into_vec(out))
            }
        }
    }

    /// `X₍ₙ₎ · Y₍ₙ₎ᵀ` for two tensors that agree on every mode except `mode`.
    pub(crate) fn mode_gram(&self, other: &Tensor3, mode: usize) -> Array2<f64> {
        let [n1, n2, n3] = self.dims;
        let [m1, m2, m3] = other.dims;
        match mode {
            1 => {
                debug_assert_eq!((n2, n3), (m2, m3));
                let x = ArrayView2::from_shape((n1, n2 * n3), &self.values).unwrap();
                let y = ArrayView2::from_shape((m1, m2 * m3), &other.values).unwrap();
                x.dot(&y.t())
            }
            2 => {
                debug_assert_eq!((n1, n3), (m1, m3));
                let mut out = Array2::<f64>::zeros((n2, m2));
                for i in 0..n1 {
                    let x = ArrayView2::from_shape((n2, n3), &self.values[i * n2 * n3..(i + 1) * n2 * n3]).unwrap();
                    let y = ArrayView2::from_shape((m2, m3), &other.values[i * m2 * m3..(i + 1) * m2 * m3]).unwrap();
                    general_mat_mul(1.0, &x, &y.t(), 1.0, &mut out);
                }
                out
            }
            _ => {
                debug_assert_eq!((n1, n2), (m1, m2));
                let x = ArrayView2::from_shape((n1 * n2, n3), &self.values).unwrap();
                let y = ArrayView2::from_shape((m1 * m2, m3), &other.values).unwrap();
                x.t().dot(&y)
            }
        }
    }

    /// True when every frontal slice `(·, ·, k)` is exactly symmetric.
    pub fn has_symmetric_slices(&self) -> bool {
        let [n1, n2, n3] = self.dims;
        if n1 != n2 {
            return false;
        }
        (0..n1).all(|i| (i + 1..n2).all(|j| (0..n3).all(|k| self.get(i, j, k) == self.get(j, i, k))))
    }
}

fn into_vec(a: Array2<f64>) -> Vec<f64> {
    if a.is_standard_layout() {
        a.into_raw_vec_and_offset().0
    } else {
        a.iter().copied().collect()
    }
}

fn invalid_mode(mode: usize) -> Error {
    Error::arg(format!("tensor mode must be 1, 2 or 3, got {mode}"))
}

/// Binary observation mask; `true` marks an observed (training) cell.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask3 {
    dims: [usize; 3],
    bits: Vec<bool>,
}

impl Mask3 {
    pub fn full(dims: [usize; 3]) -> Self {
        Self {
            dims,
            bits: vec![true; dims.iter().product()],
        }
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(dims.iter().product());
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    bits.push(f(i, j, k));
                }
            }
        }
        Self { dims, bits }
    }

    /// The structural mask of an `n × n × l` network tensor: every cell is
    /// observed except self-ties `(i, i, ·)` unless `include_self_ties`.
    pub fn structural(n: usize, l: usize, include_self_ties: bool) -> Self {
        Self::from_fn([n, n, l], |i, j, _| include_self_ties || i != j)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.bits[(i * self.dims[1] + j) * self.dims[2] + k]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn observed_count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    /// Cell-wise conjunction.
    pub fn and(&self, other: &Mask3) -> Result<Mask3> {
        check_dims(self.dims, other.dims)?;
        Ok(Mask3 {
            dims: self.dims,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect(),
        })
    }

    /// A tubular mask hides a dyad in every layer or in none.
    pub fn is_tubular(&self) -> bool {
        let [n1, n2, n3] = self.dims;
        (0..n1).all(|i| {
            (0..n2).all(|j| {
                let first = self.get(i, j, 0);
                (1..n3).all(|k| self.get(i, j, k) == first)
            })
        })
    }

    pub(crate) fn to_tensor(&self) -> Tensor3 {
        Tensor3::from_raw(self.dims, self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
    }
}

pub(crate) fn check_dims(a: [usize; 3], b: [usize; 3]) -> Result<()> {
    if a != b {
        return Err(Error::arg(format!("dimension mismatch: {a:?} vs {b:?}")));
    }
    Ok(())
}

/// Generalized KL divergence `Σ_observed a·ln(a/â) − a + â`, with
/// `0·ln 0 = 0` and `â` floored at [`RATE_FLOOR`] inside the logarithm.
pub fn kl_div(a: &Tensor3, ahat: &Tensor3, mask: &Mask3) -> Result<f64> {
    check_dims(a.dims, ahat.dims)?;
    check_dims(a.dims, mask.dims)?;
    Ok(kl_div_unchecked(&a.values, &ahat.values, &mask.bits))
}

pub(crate) fn kl_div_unchecked(a: &[f64], ahat: &[f64], mask: &[bool]) -> f64 {
    let mut total = 0.0;
    for ((&x, &r), &m) in a.iter().zip(ahat).zip(mask) {
        if !m {
            continue;
        }
        if x > 0.0 {
            total += x * (x / r.max(RATE_FLOOR)).ln() - x + r;
        } else {
            total += r;
        }
    }
    total
}

/// Poisson log-likelihood `Σ_observed a·ln â − â − ln Γ(a + 1)`.
pub fn poisson_loglik(a: &Tensor3, ahat: &Tensor3, mask: &Mask3) -> Result<f64> {
    check_dims(a.dims, ahat.dims)?;
    check_dims(a.dims, mask.dims)?;
    Ok(poisson_loglik_unchecked(&a.values, &ahat.values, &mask.bits))
}

pub(crate) fn poisson_loglik_unchecked(a: &[f64], ahat: &[f64], mask: &[bool]) -> f64 {
    let mut total = 0.0;
    for ((&x, &r), &m) in a.iter().zip(ahat).zip(mask) {
        if !m {
            continue;
        }
        if x > 0.0 {
            total += x * r.max(RATE_FLOOR).ln() - r - ln_factorial(x);
        } else {
            total -= r;
        }
    }
    total
}

/// The part of the log-likelihood that does not depend on `â`:
/// `loglik = −kl + saturated_loglik`.
pub fn saturated_loglik(a: &Tensor3, mask: &Mask3) -> Result<f64> {
    check_dims(a.dims, mask.dims)?;
    Ok(poisson_loglik_unchecked(&a.values, &a.values, &mask.bits))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn counting() -> Tensor3 {
        // a(i,j,k) = i + 2j + 4k + 1 with 0-based indices
        Tensor3::from_fn([2, 2, 2], |i, j, k| (i + 2 * j + 4 * k + 1) as f64).unwrap()
    }

    #[test]
    fn mode1_unfolding_matches_fiber_enumeration() {
        let u = counting().unfold(1).unwrap();
        assert_eq!(u, array![[1.0, 3.0, 5.0, 7.0], [2.0, 4.0, 6.0, 8.0]]);
    }

    #[test]
    fn unfold_shapes_and_roundtrip() {
        let t = Tensor3::from_fn([2, 3, 4], |i, j, k| (i * 12 + j * 4 + k) as f64).unwrap();
        assert_eq!(t.unfold(1).unwrap().dim(), (2, 12));
        assert_eq!(t.unfold(2).unwrap().dim(), (3, 8));
        assert_eq!(t.unfold(3).unwrap().dim(), (4, 6));
        for mode in 1..=3 {
            let back = Tensor3::fold(&t.unfold(mode).unwrap(), mode, t.dims()).unwrap();
            assert_eq!(back, t);
        }
    }

    #[test]
    fn degenerate_tensor_unfolds_to_scalar() {
        let t = Tensor3::new([1, 1, 1], vec![3.5]).unwrap();
        for mode in 1..=3 {
            assert_eq!(t.unfold(mode).unwrap(), array![[3.5]]);
        }
    }

    #[test]
    fn invalid_mode_is_argument_error() {
        let t = counting();
        assert!(matches!(t.unfold(0), Err(Error::Argument(_))));
        assert!(matches!(t.unfold(4), Err(Error::Argument(_))));
        assert!(matches!(t.mode_product(&array![[1.0, 0.0]], 4), Err(Error::Argument(_))));
    }

    #[test]
    fn mode_product_shape_rule() {
        let g = Tensor3::from_fn([2, 2, 3], |i, j, k| (i + j + k) as f64).unwrap();
        let u = Array2::from_elem((4, 2), 0.5);
        assert_eq!(g.mode_product(&u, 1).unwrap().dims(), [4, 2, 3]);
        assert_eq!(g.mode_product(&u, 2).unwrap().dims(), [2, 4, 3]);
        let y = Array2::from_elem((5, 3), 0.5);
        assert_eq!(g.mode_product(&y, 3).unwrap().dims(), [2, 2, 5]);
        assert!(g.mode_product(&y, 1).is_err());
    }

    #[test]
    fn mode_product_matches_unfold_definition() {
        let t = Tensor3::from_fn([3, 2, 4], |i, j, k| ((i * 7 + j * 3 + k * 5) % 11) as f64).unwrap();
        for mode in 1..=3 {
            let n = t.dims()[mode - 1];
            let m = Array2::from_shape_fn((2, n), |(r, c)| (r + 2 * c) as f64 * 0.25);
            let direct = t.mode_product(&m, mode).unwrap();
            let mut dims = t.dims();
            dims[mode - 1] = 2;
            let via_unfold = Tensor3::fold(&m.dot(&t.unfold(mode).unwrap()), mode, dims).unwrap();
            assert!(direct.max_abs_diff(&via_unfold) < 1e-12);
        }
    }

    #[test]
    fn identity_mode_product() {
        let t = counting();
        let eye = Array2::eye(2);
        for mode in 1..=3 {
            assert_eq!(t.mode_product(&eye, mode).unwrap(), t);
        }
    }

    #[test]
    fn kl_examples() {
        let a = Tensor3::new([1, 1, 1], vec![2.0]).unwrap();
        let ahat = Tensor3::new([1, 1, 1], vec![1.0]).unwrap();
        let m = Mask3::full([1, 1, 1]);
        let kl = kl_div(&a, &ahat, &m).unwrap();
        assert_relative_eq!(kl, 2.0 * 2f64.ln() - 1.0, epsilon = 1e-15);
        assert_relative_eq!(kl, 0.386_294, epsilon = 1e-6);
        assert_eq!(kl_div(&a, &a, &m).unwrap(), 0.0);
    }

    #[test]
    fn kl_ignores_masked_cells() {
        let a = counting();
        let mut b = counting();
        let mask = Mask3::from_fn([2, 2, 2], |i, _, _| i == 0);
        let base = kl_div(&a, &b, &mask).unwrap();
        for (idx, v) in b.values_mut().iter_mut().enumerate() {
            if idx >= 4 {
                *v = 100.0;
            }
        }
        assert_eq!(kl_div(&a, &b, &mask).unwrap(), base);
    }

    #[test]
    fn kl_dims_mismatch() {
        let a = Tensor3::zeros([1, 1, 2]);
        let b = Tensor3::zeros([1, 2, 1]);
        assert!(kl_div(&a, &b, &Mask3::full([1, 1, 2])).is_err());
    }

    #[test]
    fn loglik_examples() {
        let m = Mask3::full([1, 1, 1]);
        let one = Tensor3::new([1, 1, 1], vec![1.0]).unwrap();
        let zero = Tensor3::new([1, 1, 1], vec![0.0]).unwrap();
        assert_relative_eq!(poisson_loglik(&zero, &one, &m).unwrap(), -1.0);
        assert_relative_eq!(poisson_loglik(&one, &one, &m).unwrap(), -1.0);
    }

    #[test]
    fn loglik_peaks_at_the_data() {
        let m = Mask3::full([1, 1, 1]);
        let a = Tensor3::new([1, 1, 1], vec![3.0]).unwrap();
        let ll = |r: f64| poisson_loglik(&a, &Tensor3::new([1, 1, 1], vec![r]).unwrap(), &m).unwrap();
        let grid: Vec<f64> = (1..=60).map(|s| s as f64 * 0.1).collect();
        for w in grid.windows(2) {
            if w[1] <= 3.0 {
                assert!(ll(w[1]) > ll(w[0]));
            } else if w[0] >= 3.0 {
                assert!(ll(w[1]) < ll(w[0]));
            }
        }
    }

    #[test]
    fn rejects_negative_entries() {
        assert!(Tensor3::new([1, 1, 2], vec![1.0, -1.0]).is_err());
        assert!(Tensor3::new([1, 1, 2], vec![1.0]).is_err());
        assert!(Tensor3::new([0, 1, 2], vec![]).is_err());
    }

    #[test]
    fn structural_mask_hides_self_ties() {
        let m = Mask3::structural(3, 2, false);
        assert!(!m.get(1, 1, 0) && m.get(0, 1, 1));
        assert_eq!(m.observed_count(), 12);
        assert!(m.is_tubular());
        assert_eq!(Mask3::structural(3, 2, true).observed_count(), 18);
    }
}
