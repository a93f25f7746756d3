//! Kernels checked against direct, slow re-derivations.

use nntuck::modelselect::auc;
use nntuck::ndarray::Array2;
use nntuck::stats::chi2_sf;
use nntuck::{kl_div, poisson_loglik, Mask3, NNTuckModel, Tensor3};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(0.0f64..3.0, rows * cols).prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
}

fn tensor(dims: [usize; 3]) -> impl Strategy<Value = Tensor3> {
    prop::collection::vec(0.0f64..3.0, dims[0] * dims[1] * dims[2]).prop_map(move |v| Tensor3::new(dims, v).unwrap())
}

fn model() -> impl Strategy<Value = NNTuckModel> {
    (1usize..6, 1usize..5, 1usize..6, 1usize..4)
        .prop_flat_map(|(n, k, l, c)| (matrix(n, k), matrix(n, k), matrix(l, c), tensor([k, k, c])))
        .prop_map(|(u, v, y, g)| NNTuckModel::new(u, v, y, g).unwrap())
}

fn quadruple_loop(m: &NNTuckModel) -> Vec<f64> {
    let (u, v, y, g) = (m.u(), m.v(), m.y(), m.core());
    let (n, k, l, c) = (m.n(), m.k(), m.l(), m.c());
    let mut out = Vec::with_capacity(n * n * l);
    for i in 0..n {
        for j in 0..n {
            for ell in 0..l {
                let mut acc = 0.0;
                for a in 0..k {
                    for b in 0..k {
                        for s in 0..c {
                            acc += u[[i, a]] * v[[j, b]] * y[[ell, s]] * g.get(a, b, s);
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

/// Column of element `idx` in the mode-`mode` unfolding: the remaining
/// indices in increasing mode order, the earliest varying fastest.
fn unfold_column(idx: [usize; 3], dims: [usize; 3], mode: usize) -> usize {
    let mut col = 0;
    let mut stride = 1;
    for m in 0..3 {
        if m != mode - 1 {
            col += idx[m] * stride;
            stride *= dims[m];
        }
    }
    col
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn reconstruct_matches_quadruple_loop(m in model()) {
        let fast = m.reconstruct();
        for (x, want) in fast.values().iter().zip(quadruple_loop(&m)) {
            prop_assert!((x - want).abs() <= 1e-10 * want.abs().max(1.0), "{x} vs {want}");
        }
    }

    #[test]
    fn unfold_matches_fiber_enumeration(
        t in (1usize..5, 1usize..5, 1usize..5).prop_flat_map(|(a, b, c)| tensor([a, b, c])),
        mode in 1usize..4,
    ) {
        let dims = t.dims();
        let m = t.unfold(mode).unwrap();
        let other: usize = dims.iter().product::<usize>() / dims[mode - 1];
        prop_assert_eq!(m.dim(), (dims[mode - 1], other));
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    let idx = [i, j, k];
                    prop_assert_eq!(m[[idx[mode - 1], unfold_column(idx, dims, mode)]], t.get(i, j, k));
                }
            }
        }
        prop_assert_eq!(Tensor3::fold(&m, mode, dims).unwrap(), t);
    }

    #[test]
    fn mode_product_matches_definition(
        (t, mode, mat) in (1usize..5, 1usize..5, 1usize..5, 1usize..4, 1usize..5).prop_flat_map(|(a, b, c, mode, r)| {
            let along = [a, b, c][mode - 1];
            (tensor([a, b, c]), Just(mode), matrix(r, along))
        }),
    ) {
        let out = t.mode_product(&mat, mode).unwrap();
        let mut dims = t.dims();
        dims[mode - 1] = mat.nrows();
        prop_assert_eq!(out.dims(), dims);
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    let mut acc = 0.0;
                    for p in 0..mat.ncols() {
                        let src = match mode {
                            1 => t.get(p, j, k),
                            2 => t.get(i, p, k),
                            _ => t.get(i, j, p),
                        };
                        let row = [i, j, k][mode - 1];
                        acc += mat[[row, p]] * src;
                    }
                    prop_assert!((out.get(i, j, k) - acc).abs() <= 1e-12 * acc.max(1.0));
                }
            }
        }
    }

    #[test]
    fn auc_matches_pair_counting(
        data in prop::collection::vec((0u8..12, any::<bool>()), 0..200),
    ) {
        let scores: Vec<f64> = data.iter().map(|&(s, _)| f64::from(s) / 4.0).collect();
        let labels: Vec<bool> = data.iter().map(|&(_, y)| y).collect();
        let pos: Vec<f64> = scores.iter().zip(&labels).filter(|(_, &y)| y).map(|(&s, _)| s).collect();
        let neg: Vec<f64> = scores.iter().zip(&labels).filter(|(_, &y)| !y).map(|(&s, _)| s).collect();
        let want = if pos.is_empty() || neg.is_empty() {
            None
        } else {
            let mut doubled: u64 = 0;
            for &p in &pos {
                for &q in &neg {
                    doubled += if p > q { 2 } else if p == q { 1 } else { 0 };
                }
            }
            Some(doubled as f64 / (2 * pos.len() * neg.len()) as f64)
        };
        prop_assert_eq!(auc(&scores, &labels), want);
    }

    #[test]
    fn kl_and_loglik_match_cellwise_sums(
        (a, ahat, bits) in (1usize..4, 1usize..4).prop_flat_map(|(n, l)| {
            (
                prop::collection::vec(0u8..5, n * n * l),
                tensor([n, n, l]),
                prop::collection::vec(any::<bool>(), n * n * l),
                Just((n, l)),
            )
        }).prop_map(|(counts, ahat, bits, (n, l))| {
            let a = Tensor3::new([n, n, l], counts.into_iter().map(f64::from).collect()).unwrap();
            (a, ahat, bits)
        }),
    ) {
        let dims = a.dims();
        let mask = Mask3::from_fn(dims, |i, j, k| bits[(i * dims[1] + j) * dims[2] + k]);
        let (mut kl, mut ll) = (0.0, 0.0);
        for idx in 0..a.len() {
            if !bits[idx] {
                continue;
            }
            let (x, r) = (a.values()[idx], ahat.values()[idx].max(1e-10));
            if x > 0.0 {
                kl += x * (x / r).ln();
            }
            kl += r - x;
            let mut ln_fact = 0.0;
            for f in 2..=(x as u32) {
                ln_fact += f64::from(f).ln();
            }
            ll += x * r.ln() - r - ln_fact;
        }
        let got_kl = kl_div(&a, &ahat, &mask).unwrap();
        let got_ll = poisson_loglik(&a, &ahat, &mask).unwrap();
        prop_assert!((got_kl - kl).abs() <= 1e-9 * kl.abs().max(1.0), "{got_kl} vs {kl}");
        prop_assert!((got_ll - ll).abs() <= 1e-9 * ll.abs().max(1.0), "{got_ll} vs {ll}");
    }
}

/// `ln Γ(df/2)` by the half-integer recurrence from `Γ(1) = 1`, `Γ(1/2) = √π`.
fn ln_gamma_half(df: usize) -> f64 {
    let (mut x, mut acc) = if df % 2 == 0 { (1.0, 0.0) } else { (0.5, 0.5 * std::f64::consts::PI.ln()) };
    let target = df as f64 / 2.0;
    while x < target {
        acc += x.ln();
        x += 1.0;
    }
    acc
}

#[test]
fn chi2_sf_matches_trapezoid_integration() {
    // After t = u², the mass on [0, x] is ∫₀^√x 2u^(df-1) e^(-u²/2) / (2^(df/2) Γ(df/2)) du,
    // a smooth integrand for every df ≥ 1.
    const H: f64 = 2e-4;
    let u_max = 300f64.sqrt();
    let steps = (u_max / H).ceil() as usize;
    let xs: Vec<f64> = (0..=600).map(|i| i as f64 * 0.5).collect();
    let mut worst: f64 = 0.0;
    for df in 1..=200usize {
        let log_norm = -(df as f64 / 2.0) * 2f64.ln() - ln_gamma_half(df) + 2f64.ln();
        let density = |u: f64| {
            if u == 0.0 {
                return if df == 1 { log_norm.exp() } else { 0.0 };
            }
            (log_norm + (df as f64 - 1.0) * u.ln() - u * u / 2.0).exp()
        };
        let mut cumulative = vec![0.0; steps + 1];
        let mut prev = density(0.0);
        for s in 1..=steps {
            let cur = density(s as f64 * H);
            cumulative[s] = cumulative[s - 1] + 0.5 * H * (prev + cur);
            prev = cur;
        }
        for &x in &xs {
            let u = x.sqrt();
            let s = ((u / H).floor() as usize).min(steps - 1);
            let frac = u - s as f64 * H;
            // partial trapezoid to the exact end point
            let mass = cumulative[s] + 0.5 * frac * (density(s as f64 * H) + density(u));
            let err = (chi2_sf(x, df) - (1.0 - mass)).abs();
            worst = worst.max(err);
            assert!(err <= 1e-6, "df {df}, x {x}: {} vs {}", chi2_sf(x, df), 1.0 - mass);
        }
    }
    assert!(worst <= 1e-6, "worst {worst:e}");
    eprintln!("chi2 worst abs error {worst:e}");
}

#[test]
fn chi2_sf_is_monotone() {
    for df in [1, 3, 10, 99, 123] {
        let mut prev = 1.0;
        for i in 0..2000 {
            let v = chi2_sf(i as f64 * 0.25, df);
            assert!(v <= prev + 1e-15 && (0.0..=1.0).contains(&v));
            prev = v;
        }
    }
}
