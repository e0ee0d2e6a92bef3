//! Critical points of the ray phase and their singularity classification.
//!
//! For a velocity `v` inside the group-velocity ball, the stationary points
//! of `ξ ↦ v·ξ - ω(ξ)` are the solutions of `∇ω(ξ) = v`; the local decay of
//! the kernel along the ray `x = vt` is `t^{-(d/2 - index)}` where the
//! singular index depends on the degeneracy of the phase Hessian at the
//! critical point. The decision tree, keyed on how many cosines vanish and a
//! handful of scalar degeneracy quantities, is:
//!
//! - every `A_k` stratum: index `(k-1)/(2k+2)`, so A1 → 0, A2 → 1/6,
//!   A3 → 1/4, A5 → 1/3;
//! - `D_4^-` (three or all-but-one cosines zero): index 1/3;
//! - `T_{4,4,4}` (d=4, all cosines zero): index 1/2 with a logarithmic
//!   factor;
//! - d=4 points where only rank ≥ 3 of the Hessian is established carry the
//!   stationary-phase bound `t^{-3/2}`, reported as `CorankOneResidual`.
//!
//! The two nonexistence scans ([`verify_d2_lemma`], [`verify_d3_condition`])
//! back the branches of the tree that rely on a polynomial system having no
//! solution in the open unit cube.

use serde::Serialize;

use crate::dispersion::{
    det_hessian_trig, grad_omega, group_speed_sup, hessian_phi_trig, Frequency, TrigData,
};
use crate::linalg::Mat;
use crate::par;
use crate::ratio::Ratio;
use crate::roots;

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// Default tolerance for deciding that a cosine vanishes.
pub const DEFAULT_TAU_COS: f64 = 1e-9;
/// Default tolerance for scalar degeneracy quantities (determinant and the
/// branch discriminants).
pub const DEFAULT_TAU_DEGEN: f64 = 1e-8;

/// Singularity type of a critical point of the lattice phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SingularityClass {
    A1,
    A2,
    A3,
    A5,
    #[serde(rename = "D4minus")]
    D4Minus,
    T444,
    /// d=4 cases where only `rank ≥ 3` is established; decay exponent 3/2
    /// without a normal-form identification.
    CorankOneResidual,
}

impl std::fmt::Display for SingularityClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = match self {
            SingularityClass::A1 => "A1",
            SingularityClass::A2 => "A2",
            SingularityClass::A3 => "A3",
            SingularityClass::A5 => "A5",
            SingularityClass::D4Minus => "D4minus",
            SingularityClass::T444 => "T444",
            SingularityClass::CorankOneResidual => "CorankOneResidual",
        };
        f.write_str(tag)
    }
}

impl SingularityClass {
    /// Singular index `d/2 - σ` of the class.
    pub fn singular_index(self) -> Ratio {
        match self {
            SingularityClass::A1 => Ratio::from_int(0),
            SingularityClass::A2 => Ratio::new(1, 6),
            SingularityClass::A3 => Ratio::new(1, 4),
            SingularityClass::A5 => Ratio::new(1, 3),
            SingularityClass::D4Minus => Ratio::new(1, 3),
            SingularityClass::T444 => Ratio::new(1, 2),
            SingularityClass::CorankOneResidual => Ratio::new(1, 2),
        }
    }

    /// Whether the decay carries a `log t` factor.
    pub fn has_log(self) -> bool {
        matches!(self, SingularityClass::T444)
    }
}

/// Everything known about one classified critical point.
#[derive(Debug, Clone, Serialize)]
pub struct CriticalPointReport {
    pub xi0: Vec<f64>,
    pub v: Vec<f64>,
    #[serde(rename = "c")]
    pub cosines: Vec<f64>,
    #[serde(rename = "s")]
    pub sines: Vec<f64>,
    #[serde(rename = "det")]
    pub hessian_det: f64,
    #[serde(rename = "rank")]
    pub hessian_rank: usize,
    #[serde(rename = "zero_cosines")]
    pub zero_cosine_count: usize,
    #[serde(rename = "class")]
    pub class: SingularityClass,
    pub singular_index: Ratio,
    pub decay_exponent: Ratio,
    pub log_correction: bool,
    /// Smallest |decision quantity| met along the branch taken; ~0 means the
    /// point sits exactly on a degenerate stratum.
    #[serde(rename = "margin")]
    pub degeneracy_margin: f64,
    /// Set when some decision quantity fell inside `(τ/10, τ)` for its
    /// threshold τ, i.e. uncomfortably close to a branch boundary.
    #[serde(skip)]
    pub ambiguous: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum ClassifyError {
    #[error("dimension {0} unsupported (classification implemented for d = 2, 3, 4)")]
    UnsupportedDimension(usize),
    #[error("tolerances must lie in (0, 1e-3]: tau_c = {tau_c}, tau_d = {tau_d}")]
    BadTolerance { tau_c: f64, tau_d: f64 },
    #[error("point is not critical for the supplied velocity: |∇ω - v| = {residual:.3e}")]
    InvalidCriticalPoint { residual: f64 },
}

/// Tracks the scalar quantities tested while walking the decision tree.
struct MarginTracker {
    min_abs: f64,
    ambiguous: bool,
}

impl MarginTracker {
    fn new() -> Self {
        MarginTracker { min_abs: f64::INFINITY, ambiguous: false }
    }

    /// Records |q| tested against `threshold`; returns whether |q| ≤ threshold.
    fn test(&mut self, q: f64, threshold: f64) -> bool {
        let a = q.abs();
        self.min_abs = self.min_abs.min(a);
        if a > threshold / 10.0 && a < threshold {
            self.ambiguous = true;
        }
        a <= threshold
    }
}

/// Classifies the critical point at `xi0` (every torus point is critical for
/// its own group velocity `v = ∇ω(xi0)`).
pub fn classify(
    xi0: &Frequency,
    tau_c: f64,
    tau_d: f64,
) -> Result<CriticalPointReport, ClassifyError> {
    let d = xi0.dim();
    if !(2..=4).contains(&d) {
        return Err(ClassifyError::UnsupportedDimension(d));
    }
    if !(tau_c > 0.0 && tau_c <= 1e-3 && tau_d > 0.0 && tau_d <= 1e-3) {
        return Err(ClassifyError::BadTolerance { tau_c, tau_d });
    }

    let trig = TrigData::new(xi0);
    let v = grad_omega(xi0);
    let det = det_hessian_trig(&trig);
    let hess = hessian_phi_trig(&trig);
    let rank = hess.sym_rank(1e-9);

    let mut tr = MarginTracker::new();
    let zero_flags: Vec<bool> = trig.cos.iter().map(|c| tr.test(*c, tau_c)).collect();
    let count = zero_flags.iter().filter(|z| **z).count();

    let class = match d {
        2 => classify_d2(&trig, count, det, tau_c, tau_d, &mut tr),
        3 => classify_d3(&trig, &zero_flags, count, det, tau_c, tau_d, &mut tr),
        4 => classify_d4(count),
        _ => unreachable!(),
    };

    let index = class.singular_index();
    let decay = Ratio::new(d as i64, 2) - index;
    Ok(CriticalPointReport {
        xi0: xi0.components().to_vec(),
        v,
        cosines: trig.cos.clone(),
        sines: trig.sin.clone(),
        hessian_det: det,
        hessian_rank: rank,
        zero_cosine_count: count,
        class,
        singular_index: index,
        decay_exponent: decay,
        log_correction: class.has_log(),
        degeneracy_margin: if tr.min_abs.is_finite() { tr.min_abs } else { 0.0 },
        ambiguous: tr.ambiguous,
    })
}

/// Like [`classify`], but checks that `xi0` is critical for the supplied
/// velocity: `|∇ω(xi0) - v| ≤ 1e-9` componentwise.
pub fn classify_for_velocity(
    xi0: &Frequency,
    v: &[f64],
    tau_c: f64,
    tau_d: f64,
) -> Result<CriticalPointReport, ClassifyError> {
    let g = grad_omega(xi0);
    let residual = g.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if residual > 1e-9 {
        return Err(ClassifyError::InvalidCriticalPoint { residual });
    }
    classify(xi0, tau_c, tau_d)
}

fn classify_d2(
    trig: &TrigData,
    count: usize,
    det: f64,
    tau_c: f64,
    tau_d: f64,
    tr: &mut MarginTracker,
) -> SingularityClass {
    match count {
        2 => SingularityClass::A3,
        1 => SingularityClass::A1,
        _ => {
            if !tr.test(det, tau_d) {
                SingularityClass::A1
            } else {
                // det ≈ 0 with both cosines nonzero: a vanishing sine means a
                // pure fold; otherwise the unit-cube nonexistence of the
                // cleared system rules out A_k, k ≥ 3, and det = 0 rules out
                // A1, leaving A2 either way.
                let min_sin = trig.sin.iter().fold(f64::INFINITY, |m, s| m.min(s.abs()));
                tr.test(min_sin, tau_c);
                SingularityClass::A2
            }
        }
    }
}

fn classify_d3(
    trig: &TrigData,
    zero_flags: &[bool],
    count: usize,
    det: f64,
    tau_c: f64,
    tau_d: f64,
    tr: &mut MarginTracker,
) -> SingularityClass {
    match count {
        3 => SingularityClass::D4Minus,
        1 => SingularityClass::A1,
        2 => {
            // quartic coefficient along the active direction degenerates
            // exactly when 1 + c² - 7c = 0, i.e. c = 2/(7 + 3√5)
            let c = trig
                .cos
                .iter()
                .zip(zero_flags)
                .find(|(_, z)| !**z)
                .map(|(c, _)| *c)
                .expect("one nonzero cosine");
            let q = 1.0 + c * c - 7.0 * c;
            if !tr.test(q, tau_d) {
                SingularityClass::A3
            } else {
                SingularityClass::A5
            }
        }
        _ => {
            if !tr.test(det, tau_d) {
                SingularityClass::A1
            } else {
                let min_sin = trig.sin.iter().fold(f64::INFINITY, |m, s| m.min(s.abs()));
                if tr.test(min_sin, tau_c) {
                    SingularityClass::A2
                } else {
                    let cubic: f64 =
                        trig.sin.iter().zip(&trig.cos).map(|(s, c)| s.powi(4) / c.powi(3)).sum();
                    if !tr.test(cubic, tau_d) {
                        SingularityClass::A2
                    } else {
                        // quartic coefficient of the reduced phase; nonzero on
                        // the whole open unit cube per the d3-condition scan
                        let q = quartic_coefficient_d3(trig);
                        tr.test(q, tau_d);
                        SingularityClass::A3
                    }
                }
            }
        }
    }
}

fn classify_d4(count: usize) -> SingularityClass {
    match count {
        4 => SingularityClass::T444,
        3 => SingularityClass::D4Minus,
        1 => SingularityClass::A1,
        _ => SingularityClass::CorankOneResidual,
    }
}

/// The quartic coefficient quantity
/// `s₁⁶c₂⁵c₃⁵(7-2Σc) + c₁⁵s₂²s₃²(c₃²-c₂²)²` with the distinguished
/// coordinate chosen (permutation-invariantly) as the one maximizing
/// `|c_j - s_j²/ω²|`, matching the reduction's nondegeneracy requirement.
fn quartic_coefficient_d3(trig: &TrigData) -> f64 {
    let r = |j: usize| trig.cos[j] - trig.sin[j] * trig.sin[j] / trig.omega_sq;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        r(b).abs()
            .partial_cmp(&r(a).abs())
            .unwrap()
            .then(trig.cos[a].partial_cmp(&trig.cos[b]).unwrap())
    });
    let [i1, i2, i3] = order;
    let (c1, c2, c3) = (trig.cos[i1], trig.cos[i2], trig.cos[i3]);
    let (s1, s2, s3) = (trig.sin[i1], trig.sin[i2], trig.sin[i3]);
    let sum2 = 7.0 - 2.0 * (c1 + c2 + c3);
    let dsq = c3 * c3 - c2 * c2;
    s1.powi(6) * c2.powi(5) * c3.powi(5) * sum2 + c1.powi(5) * s2 * s2 * s3 * s3 * dsq * dsq
}

/// Result of a multistart critical-point solve.
#[derive(Debug, Clone)]
pub struct CriticalRoots {
    pub roots: Vec<Frequency>,
    /// `|v|` lies within 1e-3 of the group-speed supremum; Newton is
    /// ill-conditioned near the cone edge.
    pub near_cone: bool,
    /// Seeds that did not converge (expected; they are dropped).
    pub failed_seeds: usize,
}

/// Solves `∇ω(ξ) = v` by multistart damped Newton from a uniform seed grid.
///
/// Every returned root satisfies `|∇ω(ξ) - v|_∞ ≤ 1e-11`, deduplicated on
/// the torus (radius 1e-8; clusters of a degenerate root are merged at 5e-5).
/// Velocities outside the group-velocity ball return an empty list.
pub fn solve_critical(v: &[f64], seeds_per_axis: usize) -> CriticalRoots {
    let d = v.len();
    assert!(seeds_per_axis >= 8, "need at least 8 seeds per axis");
    let speed = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let sup = group_speed_sup(d);
    let near_cone = (speed - sup).abs() <= 1e-3;
    if speed > sup {
        return CriticalRoots { roots: Vec::new(), near_cone, failed_seeds: 0 };
    }

    let n_seeds = seeds_per_axis.pow(d as u32);
    let results = par::map_index(n_seeds, |flat| {
        let mut rest = flat;
        let mut xi = vec![0.0; d];
        for x in xi.iter_mut() {
            *x = TAU * (rest % seeds_per_axis) as f64 / seeds_per_axis as f64;
            rest /= seeds_per_axis;
        }
        newton_critical(&xi, v)
    });

    let mut failed = 0;
    let mut converged: Vec<(Vec<f64>, f64)> = Vec::new();
    for r in results {
        match r {
            Some(root) => converged.push(root),
            None => failed += 1,
        }
    }
    converged.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    // dedup: base radius 1e-8; degenerate roots (singular Jacobian) only
    // localize to ~sqrt of the residual tolerance, so their clusters merge
    // at a wider radius
    let mut kept: Vec<(Frequency, f64, bool)> = Vec::new();
    for (xi, res) in converged {
        let f = Frequency::new(xi);
        let degen = det_hessian_trig(&TrigData::new(&f)).abs() < 1e-6;
        let mut merged = false;
        for (rep, rep_res, rep_degen) in kept.iter_mut() {
            let radius = if degen && *rep_degen { 5e-5 } else { 1e-8 };
            if f.torus_dist(rep) <= radius {
                if res < *rep_res {
                    *rep = f.clone();
                    *rep_res = res;
                }
                merged = true;
                break;
            }
        }
        if !merged {
            kept.push((f, res, degen));
        }
    }
    let mut roots: Vec<Frequency> = kept.into_iter().map(|(f, _, _)| f).collect();
    roots.sort_by(|a, b| a.components().partial_cmp(b.components()).unwrap());
    CriticalRoots { roots, near_cone, failed_seeds: failed }
}

/// Damped Newton for `∇ω(ξ) = v` from one seed. The Jacobian is the
/// (symmetric) Hessian of ω, solved through its eigendecomposition with tiny
/// eigenvalues truncated, which keeps steps sane on caustics. Returns the
/// root and its final residual.
fn newton_critical(seed: &[f64], v: &[f64]) -> Option<(Vec<f64>, f64)> {
    let d = seed.len();
    let mut xi = seed.to_vec();
    let res_of = |x: &[f64]| -> (Vec<f64>, f64) {
        let f = Frequency::new(x.to_vec());
        let g = grad_omega(&f);
        let r: Vec<f64> = g.iter().zip(v).map(|(a, b)| a - b).collect();
        let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        (r, n)
    };
    let (mut f_val, mut f_norm) = res_of(&xi);
    for _ in 0..60 {
        if f_norm <= 1e-13 {
            break;
        }
        let freq = Frequency::new(xi.clone());
        let trig = TrigData::new(&freq);
        let omega = trig.omega();
        // Hess ω = Hφ / (2ω)
        let hphi = hessian_phi_trig(&trig);
        let mut jac = Mat::zeros(d);
        for i in 0..d {
            for j in 0..d {
                jac.set(i, j, hphi.at(i, j) / (2.0 * omega));
            }
        }
        let eig_scale = jac.sym_eigenvalues().iter().fold(0.0f64, |m, e| m.max(e.abs()));
        let delta = jac.sym_pinv_solve(&f_val, 1e-12 * eig_scale.max(1e-12));
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..25 {
            let trial: Vec<f64> = xi.iter().zip(&delta).map(|(x, dl)| x - step * dl).collect();
            let (ft, nt) = res_of(&trial);
            if nt < f_norm {
                xi = trial.iter().map(|x| x.rem_euclid(TAU)).collect();
                f_val = ft;
                f_norm = nt;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let inf_norm = f_val.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if inf_norm <= 1e-11 {
        Some((xi, inf_norm))
    } else {
        None
    }
}

/// A frequency-space point on the caustic set (`det Hφ = 0`) with its image
/// velocity.
#[derive(Debug, Clone, Serialize)]
pub struct CausticPoint {
    pub xi: Vec<f64>,
    pub velocity: Vec<f64>,
    pub hessian_det: f64,
}

/// Scans a `grid_n^d` frequency grid for sign changes of the Hessian
/// determinant, refining each crossing edge by bisection to `|det| ≤ 1e-10`.
/// Grid nodes already satisfying `|det| ≤ 1e-10` are emitted directly. The
/// output is sorted, so it is independent of chunking.
pub fn caustic_scan(d: usize, grid_n: usize) -> Vec<CausticPoint> {
    assert!(grid_n >= 32);
    let h = TAU / grid_n as f64;
    let det_at = |xi: &[f64]| det_hessian_trig(&TrigData::new(&Frequency::new(xi.to_vec())));
    let total = grid_n.pow(d as u32);
    let per_node = par::map_index(total, |flat| {
        let mut rest = flat;
        let mut xi = vec![0.0; d];
        for x in xi.iter_mut() {
            *x = h * (rest % grid_n) as f64;
            rest /= grid_n;
        }
        let det0 = det_at(&xi);
        let mut found: Vec<CausticPoint> = Vec::new();
        if det0.abs() <= 1e-10 {
            let f = Frequency::new(xi.clone());
            found.push(CausticPoint {
                xi: f.components().to_vec(),
                velocity: grad_omega(&f),
                hessian_det: det0,
            });
        }
        for axis in 0..d {
            let mut nb = xi.clone();
            nb[axis] += h;
            let det1 = det_at(&nb);
            if det0 * det1 < 0.0 {
                // bisection along the edge
                let (mut lo, mut hi, mut flo) = (0.0f64, 1.0f64, det0);
                let mut mid_xi = xi.clone();
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    mid_xi[axis] = xi[axis] + mid * h;
                    let fm = det_at(&mid_xi);
                    if fm.abs() <= 1e-10 {
                        break;
                    }
                    if flo * fm < 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        flo = fm;
                    }
                }
                let f = Frequency::new(mid_xi.clone());
                let det_m = det_at(&mid_xi);
                if det_m.abs() <= 1e-10 {
                    found.push(CausticPoint {
                        xi: f.components().to_vec(),
                        velocity: grad_omega(&f),
                        hessian_det: det_m,
                    });
                }
            }
        }
        found
    });
    let mut out: Vec<CausticPoint> = per_node.into_iter().flatten().collect();
    out.sort_by(|a, b| a.xi.partial_cmp(&b.xi).unwrap());
    out
}

/// Outcome of a brute-force nonexistence scan.
#[derive(Debug, Clone, Serialize)]
pub struct ScanReport {
    /// Minimum of the summed cleared residuals over the grid.
    pub min_residual: f64,
    /// Grid point attaining the minimum.
    pub witness: Vec<f64>,
    /// Cells where every scanned equation changes sign (common-zero
    /// candidates, handed to Newton).
    pub candidate_cells: usize,
    /// Common zeros found strictly inside the admissible region. Empty
    /// supports the nonexistence claim.
    pub common_zeros: Vec<Vec<f64>>,
}

/// Scans `(c₁, c₂) ∈ (0,1) × (-1,0)` for common zeros of the cleared system
///
/// ```text
/// eq2': 5c₁c₂ - (c₁+c₂)c₁c₂ - (c₁+c₂) = 0      (determinant vanishing)
/// eq3 : (1-c₁²)²c₂³ + (1-c₂²)²c₁³     = 0      (higher-order degeneracy)
/// ```
///
/// on a midpoint grid (never hitting the cleared form's spurious zeros on
/// the axes), then polishes every both-sign-change cell with Newton. A
/// strictly positive minimum with no interior common zero supports the claim
/// that the pair has no solution with `0 < c₁ < 1`, `-1 < c₂ < 0`.
pub fn verify_d2_lemma(grid_n: usize) -> ScanReport {
    assert!(grid_n >= 500);
    let hstep = 1.0 / grid_n as f64;
    let c1_at = |i: usize| (i as f64 + 0.5) * hstep;
    let c2_at = |j: usize| -((j as f64 + 0.5) * hstep);

    let eq2c = |c1: f64, c2: f64| 5.0 * c1 * c2 - (c1 + c2) * c1 * c2 - (c1 + c2);
    let eq3 = |c1: f64, c2: f64| {
        let w1 = 1.0 - c1 * c1;
        let w2 = 1.0 - c2 * c2;
        w1 * w1 * c2 * c2 * c2 + w2 * w2 * c1 * c1 * c1
    };

    // residual minimum over rows, tracked per row then reduced in order
    let rows = par::map_index(grid_n, |i| {
        let c1 = c1_at(i);
        let mut best = f64::INFINITY;
        let mut best_j = 0;
        for j in 0..grid_n {
            let c2 = c2_at(j);
            let r = eq2c(c1, c2).abs() + eq3(c1, c2).abs();
            if r < best {
                best = r;
                best_j = j;
            }
        }
        (best, best_j)
    });
    let (mut min_residual, mut witness) = (f64::INFINITY, vec![0.0, 0.0]);
    for (i, (r, j)) in rows.iter().enumerate() {
        if *r < min_residual {
            min_residual = *r;
            witness = vec![c1_at(i), c2_at(*j)];
        }
    }

    // both-sign-change cells between adjacent midpoints
    let cells = par::map_index(grid_n - 1, |i| {
        let mut local: Vec<[f64; 2]> = Vec::new();
        for j in 0..(grid_n - 1) {
            let corners = [
                (c1_at(i), c2_at(j)),
                (c1_at(i + 1), c2_at(j)),
                (c1_at(i), c2_at(j + 1)),
                (c1_at(i + 1), c2_at(j + 1)),
            ];
            let v2: Vec<f64> = corners.iter().map(|(a, b)| eq2c(*a, *b)).collect();
            let v3: Vec<f64> = corners.iter().map(|(a, b)| eq3(*a, *b)).collect();
            let mixed = |v: &[f64]| v.iter().any(|x| *x > 0.0) && v.iter().any(|x| *x < 0.0);
            if mixed(&v2) && mixed(&v3) {
                local.push([0.5 * (c1_at(i) + c1_at(i + 1)), 0.5 * (c2_at(j) + c2_at(j + 1))]);
            }
        }
        local
    });
    let candidates: Vec<[f64; 2]> = cells.into_iter().flatten().collect();

    let zeros = par::map_index(candidates.len(), |k| {
        let start = candidates[k];
        newton_2d(start, &|p| [eq2c(p[0], p[1]), eq3(p[0], p[1])]).filter(|p| {
            p[0] >= roots::PLANE_GUARD && p[0] < 1.0 && p[1] <= -roots::PLANE_GUARD && p[1] > -1.0
        })
    });
    let mut common_zeros: Vec<Vec<f64>> = zeros.into_iter().flatten().map(|p| p.to_vec()).collect();
    common_zeros.sort_by(|a, b| a.partial_cmp(b).unwrap());
    common_zeros.dedup_by(|a, b| a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() < 1e-8));

    ScanReport { min_residual, witness, candidate_cells: candidates.len(), common_zeros }
}

/// 2-D Newton with a finite-difference Jacobian; good enough to decide
/// whether a candidate cell actually contains a common zero.
fn newton_2d(start: [f64; 2], f: &dyn Fn(&[f64; 2]) -> [f64; 2]) -> Option<[f64; 2]> {
    let mut p = start;
    for _ in 0..80 {
        let v = f(&p);
        let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
        if n < 1e-13 {
            return Some(p);
        }
        if !n.is_finite() || p.iter().any(|x| x.abs() > 1e3) {
            return None;
        }
        let h = 1e-7;
        let mut jac = Mat::zeros(2);
        for col in 0..2 {
            let mut pp = p;
            pp[col] += h;
            let mut pm = p;
            pm[col] -= h;
            let fp = f(&pp);
            let fm = f(&pm);
            for row in 0..2 {
                jac.set(row, col, (fp[row] - fm[row]) / (2.0 * h));
            }
        }
        let delta = jac.solve(&v)?;
        let mut step = 1.0;
        let mut ok = false;
        for _ in 0..25 {
            let trial = [p[0] - step * delta[0], p[1] - step * delta[1]];
            let vt = f(&trial);
            if (vt[0] * vt[0] + vt[1] * vt[1]).sqrt() < n {
                p = trial;
                ok = true;
                break;
            }
            step *= 0.5;
        }
        if !ok {
            return None;
        }
    }
    None
}

/// Scans `(c₁,c₂,c₃) ∈ (-1,1)³` for simultaneous zeros of the cleared
/// three-equation system of [`roots`] (determinant vanishing, vanishing
/// cubic coefficient, vanishing quartic coefficient). A strictly positive
/// minimum residual with no interior common zero supports the claim that
/// every real solution leaves the open unit cube.
pub fn verify_d3_condition(grid_n: usize) -> ScanReport {
    assert!(grid_n >= 200);
    let step = 2.0 / grid_n as f64;
    let at = |i: usize| -1.0 + (i as f64 + 0.5) * step;

    // rolling pair of layers over c1 so memory stays at O(grid_n²)
    let layer = |i: usize| -> Vec<[f64; 3]> {
        let c1 = at(i);
        par::map_index(grid_n * grid_n, move |flat| {
            let j = flat / grid_n;
            let k = flat % grid_n;
            roots::system_cleared(&[c1, at(j), at(k)])
        })
    };

    let mut min_residual = f64::INFINITY;
    let mut witness = vec![0.0; 3];
    let mut candidates: Vec<[f64; 3]> = Vec::new();
    let mut prev = layer(0);
    scan_layer_minimum(&prev, grid_n, at(0), &at, &mut min_residual, &mut witness);
    for i in 1..grid_n {
        let cur = layer(i);
        scan_layer_minimum(&cur, grid_n, at(i), &at, &mut min_residual, &mut witness);
        // cells between layers i-1 and i
        for j in 0..(grid_n - 1) {
            for k in 0..(grid_n - 1) {
                let mut mixed = [false; 3];
                let mut pos = [false; 3];
                let mut neg = [false; 3];
                for layer_vals in [&prev, &cur] {
                    for (dj, dk) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                        let v = layer_vals[(j + dj) * grid_n + (k + dk)];
                        for e in 0..3 {
                            if v[e] > 0.0 {
                                pos[e] = true;
                            }
                            if v[e] < 0.0 {
                                neg[e] = true;
                            }
                        }
                    }
                }
                for e in 0..3 {
                    mixed[e] = pos[e] && neg[e];
                }
                if mixed.iter().all(|m| *m) {
                    candidates.push([at(i) - 0.5 * step, at(j) + 0.5 * step, at(k) + 0.5 * step]);
                }
            }
        }
        prev = cur;
    }

    let zeros = par::map_index(candidates.len(), |idx| {
        roots::newton_cleared(candidates[idx], 80, 1e-13)
            .filter(|p| p.iter().all(|c| c.abs() >= roots::PLANE_GUARD && c.abs() < 1.0))
            .filter(|p| roots::is_genuine_root(p, 1e-10))
    });
    let mut common_zeros: Vec<Vec<f64>> = zeros.into_iter().flatten().map(|p| p.to_vec()).collect();
    common_zeros.sort_by(|a, b| a.partial_cmp(b).unwrap());
    common_zeros.dedup_by(|a, b| a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() < 1e-8));

    ScanReport { min_residual, witness, candidate_cells: candidates.len(), common_zeros }
}

fn scan_layer_minimum(
    layer: &[[f64; 3]],
    grid_n: usize,
    c1: f64,
    at: &dyn Fn(usize) -> f64,
    min_residual: &mut f64,
    witness: &mut Vec<f64>,
) {
    for (flat, v) in layer.iter().enumerate() {
        let r = v[0].abs() + v[1].abs() + v[2].abs();
        if r < *min_residual {
            *min_residual = r;
            *witness = vec![c1, at(flat / grid_n), at(flat % grid_n)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PI: f64 = std::f64::consts::PI;

    fn classify_default(xi: &Frequency) -> CriticalPointReport {
        classify(xi, DEFAULT_TAU_COS, DEFAULT_TAU_DEGEN).unwrap()
    }

    #[test]
    fn d2_all_cosines_zero_is_a3() {
        let r = classify_default(&Frequency::new(vec![PI / 2.0, PI / 2.0]));
        assert_eq!(r.class, SingularityClass::A3);
        assert_eq!(r.singular_index, Ratio::new(1, 4));
        assert_eq!(r.decay_exponent, Ratio::new(3, 4));
        assert!(!r.log_correction);
        assert_eq!(r.zero_cosine_count, 2);
        assert_eq!(r.hessian_rank, 1);
    }

    #[test]
    fn d2_one_cosine_zero_is_a1() {
        let r = classify_default(&Frequency::new(vec![PI / 2.0, 1.0]));
        assert_eq!(r.class, SingularityClass::A1);
        assert_eq!(r.decay_exponent, Ratio::from_int(1));
    }

    #[test]
    fn d2_generic_point_is_a1() {
        let r = classify_default(&Frequency::new(vec![0.7, 1.9]));
        assert_eq!(r.class, SingularityClass::A1);
    }

    #[test]
    fn d2_fold_point_is_a2() {
        // on the determinant-zero curve with both cosines nonzero
        let c1: f64 = 0.9;
        let f = |c2: f64| 5.0 - (c1 + c2) - (1.0 / c1 + 1.0 / c2);
        let (mut lo, mut hi) = (0.2f64, 0.9f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let xi = Frequency::new(vec![c1.acos(), (0.5 * (lo + hi)).acos()]);
        let r = classify(&xi, DEFAULT_TAU_COS, 1e-6).unwrap();
        assert_eq!(r.class, SingularityClass::A2);
        assert_eq!(r.decay_exponent, Ratio::new(5, 6));
    }

    #[test]
    fn d3_reference_classes() {
        let r = classify_default(&Frequency::new(vec![PI / 2.0; 3]));
        assert_eq!(r.class, SingularityClass::D4Minus);
        assert_eq!(r.decay_exponent, Ratio::new(7, 6));

        let r = classify_default(&Frequency::new(vec![PI / 2.0, 0.9, 2.2]));
        assert_eq!(r.class, SingularityClass::A1);
        assert_eq!(r.decay_exponent, Ratio::new(3, 2));
    }

    #[test]
    fn d3_a5_threshold() {
        // c₃ = 2/(7+3√5) = (7-3√5)/2 kills the quartic coefficient
        let c3 = (7.0 - 3.0 * 5f64.sqrt()) / 2.0;
        let xi = Frequency::new(vec![PI / 2.0, PI / 2.0, c3.acos()]);
        let r = classify_default(&xi);
        assert_eq!(r.class, SingularityClass::A5);
        assert_eq!(r.singular_index, Ratio::new(1, 3));
        assert_eq!(r.decay_exponent, Ratio::new(7, 6));
        assert!(r.degeneracy_margin < 1e-12);

        for delta in [0.01, -0.01] {
            let xi = Frequency::new(vec![PI / 2.0, PI / 2.0, (c3 + delta).acos()]);
            let r = classify_default(&xi);
            assert_eq!(r.class, SingularityClass::A3, "delta={delta}");
        }
    }

    #[test]
    fn d4_reference_classes() {
        let r = classify_default(&Frequency::new(vec![PI / 2.0; 4]));
        assert_eq!(r.class, SingularityClass::T444);
        assert_eq!(r.decay_exponent, Ratio::new(3, 2));
        assert!(r.log_correction);
        assert_eq!(r.hessian_rank, 1);

        let r = classify_default(&Frequency::new(vec![PI / 2.0, PI / 2.0, PI / 2.0, 1.0]));
        assert_eq!(r.class, SingularityClass::D4Minus);
        assert_eq!(r.decay_exponent, Ratio::new(5, 3));

        let r = classify_default(&Frequency::new(vec![PI / 2.0, 0.9, 2.2, 1.4]));
        assert_eq!(r.class, SingularityClass::A1);
        assert_eq!(r.decay_exponent, Ratio::from_int(2));

        let r = classify_default(&Frequency::new(vec![PI / 2.0, PI / 2.0, 0.9, 2.2]));
        assert_eq!(r.class, SingularityClass::CorankOneResidual);
        assert_eq!(r.decay_exponent, Ratio::new(3, 2));
        assert!(r.hessian_rank >= 3, "rank = {}", r.hessian_rank);
    }

    #[test]
    fn exponent_equals_half_dim_minus_index() {
        for (d, xi) in [
            (2, Frequency::new(vec![0.4, 2.0])),
            (3, Frequency::new(vec![PI / 2.0; 3])),
            (4, Frequency::new(vec![PI / 2.0; 4])),
        ] {
            let r = classify_default(&xi);
            assert_eq!(r.decay_exponent, Ratio::new(d as i64, 2) - r.singular_index);
        }
    }

    #[test]
    fn classification_invariant_under_symmetries() {
        let mut state = 0xc0ffee123u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for d in 2..=4usize {
            for _ in 0..200 {
                // mix generic points with exact degenerate coordinates
                let comps: Vec<f64> = (0..d)
                    .map(|_| match (next() * 4.0) as usize {
                        0 => PI / 2.0,
                        1 => 3.0 * PI / 2.0,
                        _ => next() * TAU,
                    })
                    .collect();
                let xi = Frequency::new(comps.clone());
                let base = classify_default(&xi);

                let mut perm = comps.clone();
                perm.rotate_left(1);
                let rp = classify_default(&Frequency::new(perm));
                assert_eq!(rp.class, base.class, "permutation at {comps:?}");

                let refl: Vec<f64> = comps.iter().map(|x| TAU - x).collect();
                let rr = classify_default(&Frequency::new(refl));
                assert_eq!(rr.class, base.class, "reflection at {comps:?}");
            }
        }
    }

    #[test]
    fn report_serializes_to_contracted_keys() {
        let r = classify_default(&Frequency::new(vec![PI / 2.0; 3]));
        let json = serde_json::to_value(&r).unwrap();
        for key in [
            "xi0",
            "v",
            "c",
            "s",
            "det",
            "rank",
            "zero_cosines",
            "class",
            "singular_index",
            "decay_exponent",
            "log_correction",
            "margin",
        ] {
            assert!(json.get(key).is_some(), "missing key {key}");
        }
        assert_eq!(json["class"], "D4minus");
        assert_eq!(json["decay_exponent"], "7/6");
        assert_eq!(json["singular_index"], "1/3");
    }

    #[test]
    fn tolerance_and_dimension_validation() {
        let xi = Frequency::new(vec![0.4, 1.0]);
        assert!(matches!(
            classify(&xi, 0.5, DEFAULT_TAU_DEGEN),
            Err(ClassifyError::BadTolerance { .. })
        ));
        assert!(matches!(
            classify(&xi, DEFAULT_TAU_COS, 0.0),
            Err(ClassifyError::BadTolerance { .. })
        ));
        let xi1 = Frequency::new(vec![0.4]);
        assert!(matches!(
            classify(&xi1, DEFAULT_TAU_COS, DEFAULT_TAU_DEGEN),
            Err(ClassifyError::UnsupportedDimension(1))
        ));
    }

    #[test]
    fn invalid_critical_point_is_rejected() {
        let xi = Frequency::new(vec![0.4, 1.0]);
        let bad_v = vec![0.9, 0.9];
        let err = classify_for_velocity(&xi, &bad_v, DEFAULT_TAU_COS, DEFAULT_TAU_DEGEN);
        assert!(matches!(err, Err(ClassifyError::InvalidCriticalPoint { .. })));
        let good_v = grad_omega(&xi);
        assert!(classify_for_velocity(&xi, &good_v, DEFAULT_TAU_COS, DEFAULT_TAU_DEGEN).is_ok());
    }

    #[test]
    fn solve_critical_zero_velocity_d2() {
        let out = solve_critical(&[0.0, 0.0], 8);
        assert_eq!(out.roots.len(), 4);
        let expected = [[0.0, 0.0], [0.0, PI], [PI, 0.0], [PI, PI]];
        for e in expected {
            assert!(
                out.roots.iter().any(|r| Frequency::new(e.to_vec()).torus_dist(r) < 1e-9),
                "missing root {e:?}"
            );
        }
        for r in &out.roots {
            let g = grad_omega(r);
            assert!(g.iter().all(|x| x.abs() <= 1e-11));
        }
    }

    #[test]
    fn solve_critical_on_caustic_velocity() {
        let v = [1.0 / 5f64.sqrt(), 1.0 / 5f64.sqrt()];
        let out = solve_critical(&v, 12);
        let target = Frequency::new(vec![PI / 2.0, PI / 2.0]);
        assert!(
            out.roots.iter().any(|r| target.torus_dist(r) < 1e-4),
            "roots: {:?}",
            out.roots.iter().map(|r| r.components().to_vec()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn solve_critical_outside_cone_is_empty() {
        let out = solve_critical(&[2.0, 0.0], 8);
        assert!(out.roots.is_empty());
        let out = solve_critical(&[0.6, 0.6], 8); // |v| = 0.848 > 1/√2
        assert!(out.roots.is_empty());
    }

    #[test]
    fn solve_critical_roundtrip_residual() {
        let v = [0.2, -0.1, 0.05];
        let out = solve_critical(&v, 8);
        assert!(!out.roots.is_empty());
        for r in &out.roots {
            let g = grad_omega(r);
            for j in 0..3 {
                assert!((g[j] - v[j]).abs() <= 1e-11);
            }
        }
    }

    #[test]
    fn caustic_scan_finds_reference_velocities() {
        let d2 = caustic_scan(2, 64);
        assert!(!d2.is_empty());
        let target = [1.0 / 5f64.sqrt(), 1.0 / 5f64.sqrt()];
        let nearest = d2
            .iter()
            .map(|p| {
                p.velocity.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
            })
            .fold(f64::INFINITY, f64::min);
        assert!(nearest < 0.05, "nearest velocity distance {nearest}");
        for p in &d2 {
            assert!(p.hessian_det.abs() <= 1e-10);
        }

        let d3 = caustic_scan(3, 32);
        let t3 = [1.0 / 7f64.sqrt(); 3];
        let nearest3 = d3
            .iter()
            .map(|p| p.velocity.iter().zip(&t3).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .fold(f64::INFINITY, f64::min);
        assert!(nearest3 < 0.05, "nearest velocity distance {nearest3}");
        for p in &d3 {
            assert!(p.hessian_det.abs() <= 1e-10);
        }
    }

    #[test]
    fn d2_lemma_scan_is_positive() {
        let report = verify_d2_lemma(500);
        assert!(report.min_residual > 0.0);
        assert!(report.common_zeros.is_empty(), "zeros: {:?}", report.common_zeros);
    }

    #[test]
    fn d2_lemma_factorization_identity() {
        // (1-c₁²)²c₂³ + (1-c₂²)²c₁³ = (c₁+c₂)(c₁²-c₁c₂+c₂²-2c₁²c₂²+c₁³c₂³)
        let mut state = 0xabcd1234u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        for _ in 0..200 {
            let (c1, c2) = (next(), next());
            let w1 = 1.0 - c1 * c1;
            let w2 = 1.0 - c2 * c2;
            let lhs = w1 * w1 * c2 * c2 * c2 + w2 * w2 * c1 * c1 * c1;
            let rhs = (c1 + c2)
                * (c1 * c1 - c1 * c2 + c2 * c2 - 2.0 * c1 * c1 * c2 * c2
                    + c1 * c1 * c1 * c2 * c2 * c2);
            assert!((lhs - rhs).abs() < 1e-12);
        }
        // on the line c₂ = -c₁ the second factor survives but eq2' does not vanish
        let c1 = 0.5f64;
        let c2 = -0.5f64;
        let w = 1.0 - c1 * c1;
        let eq3 = w * w * c2 * c2 * c2 + w * w * c1 * c1 * c1;
        assert_eq!(eq3, 0.0);
        let eq2c = 5.0 * c1 * c2 - (c1 + c2) * c1 * c2 - (c1 + c2);
        assert!(eq2c.abs() > 1.0);
    }

    #[test]
    fn d3_condition_scan_is_positive() {
        let report = verify_d3_condition(200);
        assert!(report.min_residual > 0.0);
        assert!(report.common_zeros.is_empty(), "zeros: {:?}", report.common_zeros);
        // the tabulated tabulated roots all leave the unit cube
        for r in &roots::KNOWN_REAL_ROOTS {
            assert!(r.iter().any(|c| c.abs() >= 1.0));
        }
    }

    #[test]
    fn d3_condition_sign_pattern() {
        // all-negative coordinates: Σ(c + 1/c) ≤ -6 on (-1,0)³, never 7
        for c in [-0.9f64, -0.5, -0.1, -0.99] {
            assert!(c + 1.0 / c <= -2.0);
        }
        // all-positive coordinates: every term of the second equation is
        // positive, so it cannot vanish
        for c in [0.9f64, 0.5, 0.1, 0.99] {
            let s4_over_c3 = (1.0 - c * c) * (1.0 - c * c) / (c * c * c);
            assert!(s4_over_c3 > 0.0);
        }
    }
}
