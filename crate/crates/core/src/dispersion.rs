//! The lattice Klein-Gordon dispersion relation and its derivatives.
//!
//! On the torus `[0,2π)^d` the plane wave `e^{ix·ξ}` satisfies
//! `(1 - Δ) e_ξ = ω(ξ)² e_ξ` with
//!
//! ```text
//! ω(ξ) = sqrt(1 + Σ_j 2(1 - cos ξ_j))  ≥ 1.
//! ```
//!
//! Group velocities `∇ω` fill a ball of radius strictly below 1; its exact
//! radius per dimension is [`group_speed_sup`]. The singularity analysis
//! works not with the ray phase `v·ξ - ω(ξ)` directly but with the
//! radical-free product phase [`phi_aux`], which has the same singularity
//! type at each critical point and the Hessian [`hessian_phi`].

use crate::linalg::Mat;

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// A frequency point on the torus, components reduced into `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frequency {
    xi: Vec<f64>,
}

impl Frequency {
    pub fn new(components: impl Into<Vec<f64>>) -> Self {
        let mut xi = components.into();
        assert!(!xi.is_empty(), "dimension must be at least 1");
        for x in &mut xi {
            *x = x.rem_euclid(TAU);
            // rem_euclid can return TAU when the input is a tiny negative number
            if *x >= TAU {
                *x = 0.0;
            }
        }
        Frequency { xi }
    }

    pub fn dim(&self) -> usize {
        self.xi.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.xi
    }

    /// Shortest distance to `other` on the torus, in the max norm.
    pub fn torus_dist(&self, other: &Frequency) -> f64 {
        self.xi
            .iter()
            .zip(&other.xi)
            .map(|(a, b)| {
                let d = (a - b).abs();
                d.min(TAU - d)
            })
            .fold(0.0, f64::max)
    }
}

/// Cached cosines, sines and `ω²` of a frequency point. Computed once per
/// point so every downstream formula sees the same values.
#[derive(Debug, Clone)]
pub struct TrigData {
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
    pub omega_sq: f64,
}

impl TrigData {
    pub fn new(xi: &Frequency) -> Self {
        let cos: Vec<f64> = xi.components().iter().map(|x| x.cos()).collect();
        let sin: Vec<f64> = xi.components().iter().map(|x| x.sin()).collect();
        let omega_sq = 1.0 + cos.iter().map(|c| 2.0 * (1.0 - c)).sum::<f64>();
        TrigData { cos, sin, omega_sq }
    }

    pub fn omega(&self) -> f64 {
        self.omega_sq.sqrt()
    }
}

/// `ω(ξ) = sqrt(1 + Σ 2(1 - cos ξ_j))`; always ≥ 1.
pub fn omega(xi: &Frequency) -> f64 {
    TrigData::new(xi).omega()
}

/// The group velocity `∇ω(ξ)`, with components `sin ξ_j / ω(ξ)`.
pub fn grad_omega(xi: &Frequency) -> Vec<f64> {
    let trig = TrigData::new(xi);
    let w = trig.omega();
    trig.sin.iter().map(|s| s / w).collect()
}

/// Hessian of the product phase at its critical point:
/// `(Hφ)_{kj} = 2 (c_j δ_{kj} - s_k s_j / ω²)`, symmetric, equal to `D - S`
/// with `D = 2 diag(c)` and the rank-one `S = 2 s sᵀ / ω²`.
pub fn hessian_phi(xi: &Frequency) -> Mat {
    let trig = TrigData::new(xi);
    hessian_phi_trig(&trig)
}

pub fn hessian_phi_trig(trig: &TrigData) -> Mat {
    let d = trig.cos.len();
    let mut h = Mat::zeros(d);
    for k in 0..d {
        for j in 0..d {
            let mut v = -2.0 * trig.sin[k] * trig.sin[j] / trig.omega_sq;
            if k == j {
                v += 2.0 * trig.cos[j];
            }
            h.set(k, j, v);
        }
    }
    h
}

/// Closed-form determinant of [`hessian_phi`]:
/// `2^d (Π_k c_k - Σ_j s_j² Π_{m≠j} c_m / ω²)`, valid also when cosines
/// vanish.
pub fn det_hessian(xi: &Frequency) -> f64 {
    det_hessian_trig(&TrigData::new(xi))
}

pub fn det_hessian_trig(trig: &TrigData) -> f64 {
    let d = trig.cos.len();
    let prod_all: f64 = trig.cos.iter().product();
    let mut corr = 0.0;
    for j in 0..d {
        let mut prod = 1.0;
        for m in 0..d {
            if m != j {
                prod *= trig.cos[m];
            }
        }
        corr += trig.sin[j] * trig.sin[j] * prod;
    }
    2f64.powi(d as i32) * (prod_all - corr / trig.omega_sq)
}

/// The radical-free product phase in critical-point coordinates `η = ξ - ξ⁰`:
///
/// ```text
/// φ(η) = ω(ξ⁰+η)² - (Σ_j s_j η_j + ω(ξ⁰)²)² / ω(ξ⁰)².
/// ```
///
/// Always satisfies `φ(0) = 0` and `∇φ(0) = 0`, and has the same singularity
/// type at `0` as the ray phase `v·ξ - ω(ξ)` with `v = ∇ω(ξ⁰)`.
pub fn phi_aux(eta: &[f64], xi0: &Frequency) -> f64 {
    let trig = TrigData::new(xi0);
    phi_aux_trig(eta, xi0, &trig)
}

pub fn phi_aux_trig(eta: &[f64], xi0: &Frequency, trig: &TrigData) -> f64 {
    let d = xi0.dim();
    assert_eq!(eta.len(), d);
    let mut omega_sq_shifted = 1.0;
    let mut linear = 0.0;
    for ((e, x0), s) in eta.iter().zip(xi0.components()).zip(&trig.sin) {
        omega_sq_shifted += 2.0 * (1.0 - (x0 + e).cos());
        linear += s * e;
    }
    let shifted = linear + trig.omega_sq;
    omega_sq_shifted - shifted * shifted / trig.omega_sq
}

/// Exact supremum of `|∇ω|` over the torus. The maximum sits on the main
/// diagonal `ξ_j ≡ θ` with `cos θ = (1 + 2d - sqrt(1 + 4d)) / (2d)`, where
/// `|∇ω|² = cos θ`; stationarity forces all non-frozen coordinates to share
/// one cosine and frozen ones to sit at 0, which reduces to lower `d`.
pub fn group_speed_sup(d: usize) -> f64 {
    let df = d as f64;
    let c = (1.0 + 2.0 * df - (1.0 + 4.0 * df).sqrt()) / (2.0 * df);
    c.sqrt()
}

/// Brute-force maximum of `|∇ω|` over a `grid_n^d` frequency grid, refined by
/// gradient ascent from the best grid point. Agrees with [`group_speed_sup`]
/// to solver precision; kept as the scan-based check of that closed form.
pub fn max_group_speed(d: usize, grid_n: usize) -> f64 {
    assert!(grid_n >= 8);
    let cos_tab: Vec<f64> = (0..grid_n).map(|i| (TAU * i as f64 / grid_n as f64).cos()).collect();
    let sin_tab: Vec<f64> = (0..grid_n).map(|i| (TAU * i as f64 / grid_n as f64).sin()).collect();
    let total = grid_n.pow(d as u32);
    let (best_sq, best_idx) = crate::par::stable_max(total, |flat| {
        let mut rest = flat;
        let mut omega_sq = 1.0;
        let mut s_sq = 0.0;
        for _ in 0..d {
            let i = rest % grid_n;
            rest /= grid_n;
            omega_sq += 2.0 * (1.0 - cos_tab[i]);
            s_sq += sin_tab[i] * sin_tab[i];
        }
        s_sq / omega_sq
    });
    let mut xi = Vec::with_capacity(d);
    let mut rest = best_idx;
    for _ in 0..d {
        xi.push(TAU * (rest % grid_n) as f64 / grid_n as f64);
        rest /= grid_n;
    }
    let refined = ascend_speed_sq(&mut xi).max(best_sq);
    refined.sqrt()
}

/// Gradient ascent on `G(ξ) = |∇ω(ξ)|²` with backtracking. Returns the
/// reached value of G.
fn ascend_speed_sq(xi: &mut [f64]) -> f64 {
    let d = xi.len();
    let eval = |x: &[f64]| -> f64 {
        let mut omega_sq = 1.0;
        let mut s_sq = 0.0;
        for v in x {
            omega_sq += 2.0 * (1.0 - v.cos());
            s_sq += v.sin() * v.sin();
        }
        s_sq / omega_sq
    };
    let mut g = eval(xi);
    for _ in 0..400 {
        // ∂_k G = 2 s_k (c_k ω² - Σ s²) / ω⁴
        let mut omega_sq = 1.0;
        let mut s_sq = 0.0;
        for v in xi.iter() {
            omega_sq += 2.0 * (1.0 - v.cos());
            s_sq += v.sin() * v.sin();
        }
        let grad: Vec<f64> = xi
            .iter()
            .map(|v| 2.0 * v.sin() * (v.cos() * omega_sq - s_sq) / (omega_sq * omega_sq))
            .collect();
        let gnorm = grad.iter().map(|x| x * x).sum::<f64>().sqrt();
        if gnorm < 1e-15 {
            break;
        }
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..50 {
            let trial: Vec<f64> = xi.iter().zip(&grad).map(|(x, gr)| x + step * gr).collect();
            let gt = eval(&trial);
            if gt > g {
                xi.copy_from_slice(&trial);
                g = gt;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let _ = d;
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PI: f64 = std::f64::consts::PI;

    fn fd_gradient(xi: &Frequency, h: f64) -> Vec<f64> {
        let d = xi.dim();
        (0..d)
            .map(|j| {
                let mut plus = xi.components().to_vec();
                let mut minus = plus.clone();
                plus[j] += h;
                minus[j] -= h;
                (omega(&Frequency::new(plus)) - omega(&Frequency::new(minus))) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn omega_at_reference_points() {
        for d in 1..=4 {
            let zero = Frequency::new(vec![0.0; d]);
            assert!((omega(&zero) - 1.0).abs() < 1e-15);
            let pi_pt = Frequency::new(vec![PI; d]);
            assert!((omega(&pi_pt) - (1.0 + 4.0 * d as f64).sqrt()).abs() < 1e-14);
        }
        let q = Frequency::new(vec![PI / 2.0, PI / 2.0]);
        assert!((omega(&q) - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn gradient_reference_points() {
        let zero = Frequency::new(vec![0.0, 0.0, 0.0]);
        assert!(grad_omega(&zero).iter().all(|g| g.abs() < 1e-15));
        let q = Frequency::new(vec![PI / 2.0, PI / 2.0]);
        for g in grad_omega(&q) {
            assert!((g - 1.0 / 5f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for d in 2..=4 {
            for _ in 0..100 {
                let xi = Frequency::new((0..d).map(|_| next() * TAU).collect::<Vec<_>>());
                let g = grad_omega(&xi);
                let fd = fd_gradient(&xi, 1e-5);
                for j in 0..d {
                    assert!((g[j] - fd[j]).abs() < 1e-7, "d={d} j={j}: {} vs {}", g[j], fd[j]);
                }
            }
        }
    }

    #[test]
    fn hessian_at_degenerate_point() {
        let q = Frequency::new(vec![PI / 2.0, PI / 2.0]);
        let h = hessian_phi(&q);
        for i in 0..2 {
            for j in 0..2 {
                assert!((h.at(i, j) + 2.0 / 5.0).abs() < 1e-15);
            }
        }
        assert!(h.det_lu().abs() < 1e-15);
        assert_eq!(h.sym_rank(1e-10), 1);
        assert!(det_hessian(&q).abs() < 1e-15);
    }

    #[test]
    fn hessian_nondegenerate_case() {
        // one cosine zero, one not: determinant away from zero
        let q = Frequency::new(vec![PI / 2.0, 0.0]);
        let det = det_hessian(&q);
        assert!(det.abs() > 0.1);
        assert!((det - hessian_phi(&q).det_lu()).abs() < 1e-13 * det.abs());
    }

    #[test]
    fn hessian_matches_second_differences_of_phi_aux() {
        let mut state = 0x2545f4914f6cdd1du64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        // second differences: rounding noise scales like eps/h², so the
        // near-optimal step is eps^{1/4} ~ 1e-4
        let h = 1e-4;
        for _ in 0..100 {
            let xi = Frequency::new((0..3).map(|_| 0.3 + next() * 5.5).collect::<Vec<_>>());
            let hess = hessian_phi(&xi);
            for k in 0..3 {
                for j in 0..3 {
                    let mut epp = vec![0.0; 3];
                    epp[k] += h;
                    epp[j] += h;
                    let mut epm = vec![0.0; 3];
                    epm[k] += h;
                    epm[j] -= h;
                    let mut emp = vec![0.0; 3];
                    emp[k] -= h;
                    emp[j] += h;
                    let mut emm = vec![0.0; 3];
                    emm[k] -= h;
                    emm[j] -= h;
                    let fd = (phi_aux(&epp, &xi) - phi_aux(&epm, &xi) - phi_aux(&emp, &xi)
                        + phi_aux(&emm, &xi))
                        / (4.0 * h * h);
                    let scale = hess.at(k, j).abs().max(1.0);
                    assert!(
                        (hess.at(k, j) - fd).abs() < 1e-5 * scale,
                        "entry ({k},{j}): {} vs {}",
                        hess.at(k, j),
                        fd
                    );
                }
            }
        }
    }

    #[test]
    fn det_formula_matches_lu_determinant() {
        let mut state = 0xdeadbeef12345678u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for d in 2..=4 {
            let mut checked = 0;
            while checked < 50 {
                let xi = Frequency::new((0..d).map(|_| next() * TAU).collect::<Vec<_>>());
                let trig = TrigData::new(&xi);
                if trig.cos.iter().any(|c| c.abs() < 0.1) {
                    continue;
                }
                checked += 1;
                let formula = det_hessian(&xi);
                let lu = hessian_phi(&xi).det_lu();
                assert!(
                    (formula - lu).abs() <= 1e-10 * formula.abs().max(1e-30),
                    "d={d}: {formula} vs {lu}"
                );
            }
        }
    }

    #[test]
    fn det_vanishes_when_all_cosines_vanish() {
        for d in 2..=4 {
            let mut xs = vec![PI / 2.0; d];
            xs[0] = 3.0 * PI / 2.0;
            let xi = Frequency::new(xs);
            assert!(det_hessian(&xi).abs() < 1e-14);
        }
    }

    #[test]
    fn det_zero_curve_in_two_dims() {
        // Solve 5 - (c1 + c2) - (1/c1 + 1/c2) = 0 for c2 given c1 = 0.9 by
        // bisection, then confirm the determinant formula vanishes there.
        let c1: f64 = 0.9;
        let f = |c2: f64| 5.0 - (c1 + c2) - (1.0 / c1 + 1.0 / c2);
        let (mut lo, mut hi) = (0.2, 0.9);
        assert!(f(lo) * f(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let c2 = 0.5 * (lo + hi);
        let xi = Frequency::new(vec![c1.acos(), c2.acos()]);
        assert!(det_hessian(&xi).abs() < 1e-10, "det = {}", det_hessian(&xi));
    }

    #[test]
    fn phi_aux_reference_values() {
        let q2 = Frequency::new(vec![PI / 2.0, PI / 2.0]);
        assert_eq!(phi_aux(&[0.0, 0.0], &q2), 0.0);
        // Taylor form: φ(η) = -(s1η1+s2η2)²/5 - (η1³+η2³)/3 + O(|η|^5)
        for &(e1, e2) in &[(1e-2, -2e-2), (3e-3, 1e-3), (-1e-2, -1e-2)] {
            let lin: f64 = e1 + e2;
            let taylor = -lin * lin / 5.0 - (e1.powi(3) + e2.powi(3)) / 3.0;
            let exact = phi_aux(&[e1, e2], &q2);
            let eta_norm = (e1 * e1 + e2 * e2).sqrt();
            assert!(
                (exact - taylor).abs() < 10.0 * eta_norm.powi(5),
                "eta=({e1},{e2}): {exact} vs {taylor}"
            );
        }
        // gradient at 0 vanishes in d=3
        let q3 = Frequency::new(vec![PI / 2.0; 3]);
        let h = 1e-6;
        for j in 0..3 {
            let mut ep = vec![0.0; 3];
            ep[j] = h;
            let mut em = vec![0.0; 3];
            em[j] = -h;
            let g = (phi_aux(&ep, &q3) - phi_aux(&em, &q3)) / (2.0 * h);
            assert!(g.abs() < 1e-9);
        }
    }

    #[test]
    fn group_speed_closed_form_and_scan_agree() {
        // d=1: maximizing sin ξ / sqrt(3 - 2 cos ξ) gives cos ξ = (3-√5)/2 and
        // speed sqrt((3-√5)/2) = (√5-1)/2 ≈ 0.61803, the value frozen here.
        assert!((group_speed_sup(1) - 0.6180339887498949).abs() < 1e-15);
        // d=2: 2 sin²θ/(5-4cosθ) is maximal at cosθ = 1/2, giving 1/√2.
        assert!((group_speed_sup(2) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        for d in 1..=4 {
            let scan = max_group_speed(d, if d == 4 { 24 } else { 64 });
            assert!(
                (scan - group_speed_sup(d)).abs() < 1e-10,
                "d={d}: scan {scan} vs closed form {}",
                group_speed_sup(d)
            );
            assert!(scan < 1.0);
        }
    }

    #[test]
    fn group_speed_monotone_in_dimension() {
        for d in 1..4 {
            assert!(group_speed_sup(d + 1) > group_speed_sup(d));
        }
    }

    #[test]
    fn omega_bounded_below_on_dense_sample() {
        let mut state = 0x853c49e6748fea9bu64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for d in 1..=4 {
            for _ in 0..100_000 {
                let xi = Frequency::new((0..d).map(|_| next() * TAU).collect::<Vec<_>>());
                let trig = TrigData::new(&xi);
                assert!(trig.omega_sq >= 1.0 - 1e-14);
                let speed: f64 = trig.sin.iter().map(|s| s * s).sum::<f64>().sqrt() / trig.omega();
                assert!(speed < 1.0);
                for j in 0..d {
                    let unit = trig.cos[j] * trig.cos[j] + trig.sin[j] * trig.sin[j];
                    assert!((unit - 1.0).abs() < 1e-14);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn symmetry_under_permutation_and_reflection(
            raw in proptest::collection::vec(0.0f64..TAU, 2..=4),
            swap_a in 0usize..4,
            swap_b in 0usize..4,
        ) {
            let d = raw.len();
            let xi = Frequency::new(raw.clone());
            let w = omega(&xi);
            let det = det_hessian(&xi);

            let mut permuted = raw.clone();
            permuted.swap(swap_a % d, swap_b % d);
            let xp = Frequency::new(permuted);
            prop_assert!((omega(&xp) - w).abs() < 1e-13);
            prop_assert!((det_hessian(&xp).abs() - det.abs()) .abs() < 1e-12);

            let reflected: Vec<f64> = raw.iter().map(|x| TAU - x).collect();
            let xr = Frequency::new(reflected);
            prop_assert!((omega(&xr) - w).abs() < 1e-13);
            prop_assert!((det_hessian(&xr).abs() - det.abs()).abs() < 1e-12);
        }

        #[test]
        fn frequency_reduces_modulo_two_pi(raw in proptest::collection::vec(-50.0f64..50.0, 1..=4)) {
            let xi = Frequency::new(raw.clone());
            for (orig, red) in raw.iter().zip(xi.components()) {
                prop_assert!(*red >= 0.0 && *red < TAU);
                let diff = (orig - red) / TAU;
                prop_assert!((diff - diff.round()).abs() < 1e-9);
            }
        }
    }
}
