//! Multistart damped Newton for the three-equation polynomial system that
//! decides the most degenerate three-dimensional phase case:
//!
//! ```text
//! 7 - (x+y+z) - 1/x - 1/y - 1/z                                  = 0
//! (1-x²)²/x³ + (1-y²)²/y³ + (1-z²)²/z³                           = 0
//! (1-x²)³ y⁵z⁵ (7 - 2(x+y+z)) + x⁵ (1-y²)(1-z²)(z²-y²)²          = 0
//! ```
//!
//! Newton runs on the denominator-cleared form (equation 1 times `xyz`,
//! equation 2 times `x³y³z³`), which is smooth everywhere; clearing
//! introduces spurious roots on the coordinate planes, which are filtered by
//! requiring every coordinate magnitude ≥ 1e-3. Residuals are reported in
//! the raw form as well. The system is symmetric under swapping `y ↔ z`, so
//! real roots come in pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::linalg::Mat;
use crate::par;

/// The four real roots of the system inside `[-15, 15]³`, tabulated to six
/// significant digits and used to cross-check [`find_real_roots`].
pub const KNOWN_REAL_ROOTS: [[f64; 3]; 4] = [
    [-0.143939, 0.144912, 6.90076],
    [-0.143939, 6.90076, 0.144912],
    [12.6977, -2.486, -0.402253],
    [12.6977, -0.402253, -2.486],
];

/// Smallest admissible coordinate magnitude; anything closer to a coordinate
/// plane is a spurious zero of the cleared form.
pub const PLANE_GUARD: f64 = 1e-3;

/// A real root of the system.
///
/// `residual` is the cleared-form residual scaled by the magnitude of each
/// equation's largest monomial (a backward error). The raw residual floor at
/// the two large roots is set by cancellation between ~5e7-sized terms, so an
/// absolute threshold would say nothing; the scaled one is ~1e-15 at a
/// converged root.
#[derive(Debug, Clone, Serialize)]
pub struct RootTriple {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub residual: f64,
}

impl RootTriple {
    pub fn coords(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Raw residuals (with denominators) of the three equations.
    pub fn raw_residual(&self) -> [f64; 3] {
        system_raw(&self.coords())
    }

    /// Index into [`KNOWN_REAL_ROOTS`] if this root matches one to `tol`
    /// componentwise.
    pub fn matches_known(&self, tol: f64) -> Option<usize> {
        let c = self.coords();
        KNOWN_REAL_ROOTS.iter().position(|k| (0..3).all(|i| (c[i] - k[i]).abs() <= tol))
    }
}

/// Raw residuals; requires nonzero coordinates.
pub fn system_raw(p: &[f64; 3]) -> [f64; 3] {
    let [x, y, z] = *p;
    let f1 = 7.0 - (x + y + z) - (1.0 / x + 1.0 / y + 1.0 / z);
    let sq = |v: f64| (1.0 - v * v) * (1.0 - v * v);
    let f2 = sq(x) / (x * x * x) + sq(y) / (y * y * y) + sq(z) / (z * z * z);
    [f1, f2, eq3(x, y, z)]
}

/// Cleared residuals, defined everywhere.
pub fn system_cleared(p: &[f64; 3]) -> [f64; 3] {
    let [x, y, z] = *p;
    let f1 = 7.0 * x * y * z - (x + y + z) * x * y * z - (x * y + y * z + z * x);
    let c = |v: f64| (1.0 - v * v) * (1.0 - v * v);
    let (x3, y3, z3) = (x * x * x, y * y * y, z * z * z);
    let f2 = c(x) * y3 * z3 + c(y) * x3 * z3 + c(z) * x3 * y3;
    [f1, f2, eq3(x, y, z)]
}

/// Per-equation scale: the sum of monomial magnitudes, floored at 1. Scaled
/// residuals `|F_i| / scale_i` are meaningful backward errors at any point.
pub fn system_scales(p: &[f64; 3]) -> [f64; 3] {
    let [x, y, z] = *p;
    let s1 = 7.0 * (x * y * z).abs()
        + ((x + y + z) * x * y * z).abs()
        + (x * y).abs()
        + (y * z).abs()
        + (z * x).abs();
    let c = |v: f64| (1.0 - v * v) * (1.0 - v * v);
    let (x3, y3, z3) = (x * x * x, y * y * y, z * z * z);
    let s2 = (c(x) * y3 * z3).abs() + (c(y) * x3 * z3).abs() + (c(z) * x3 * y3).abs();
    let cube = |v: f64| {
        let w = 1.0 - v * v;
        w * w * w
    };
    let x5 = x.powi(5);
    let (y5, z5) = (y.powi(5), z.powi(5));
    let s3 = (cube(x) * y5 * z5 * (7.0 - 2.0 * (x + y + z))).abs()
        + (x5 * (1.0 - y * y) * (1.0 - z * z) * (z * z - y * y) * (z * z - y * y)).abs();
    [s1.max(1.0), s2.max(1.0), s3.max(1.0)]
}

fn eq3(x: f64, y: f64, z: f64) -> f64 {
    let w = 1.0 - x * x;
    let d = z * z - y * y;
    w * w * w * y.powi(5) * z.powi(5) * (7.0 - 2.0 * (x + y + z))
        + x.powi(5) * (1.0 - y * y) * (1.0 - z * z) * d * d
}

/// Natural scales of the raw equations (sum of term magnitudes).
pub fn raw_scales(p: &[f64; 3]) -> [f64; 3] {
    let [x, y, z] = *p;
    let s1 = 7.0 + [x, y, z].iter().map(|v| v.abs() + 1.0 / v.abs()).sum::<f64>();
    let s2 = [x, y, z].iter().map(|v| (1.0 - v * v) * (1.0 - v * v) / v.abs().powi(3)).sum::<f64>();
    let s3 = system_scales(p)[2];
    [s1, s2.max(1.0), s3]
}

/// Whether `p` solves the raw system to backward error `tol_raw`.
///
/// Near the coordinate planes the cleared system has pinch sets (for
/// example `y = -z`, `x² - 7x + 1 = 0`) where all three cleared residuals are
/// `O(z⁶)` without the raw system being anywhere near zero; Newton on the
/// cleared form stalls there below any absolute tolerance. True roots must
/// survive this raw-form check.
pub fn is_genuine_root(p: &[f64; 3], tol_raw: f64) -> bool {
    if p.iter().any(|v| v.abs() < PLANE_GUARD) {
        return false;
    }
    let raw = system_raw(p);
    let sc = raw_scales(p);
    (0..3).all(|i| raw[i].abs() <= tol_raw * sc[i])
}

/// Analytic Jacobian of [`system_cleared`].
pub fn jacobian_cleared(p: &[f64; 3]) -> Mat {
    let [x, y, z] = *p;
    let mut j = Mat::zeros(3);

    // f1 = 7xyz - x²yz - xy²z - xyz² - xy - yz - zx
    j.set(0, 0, 7.0 * y * z - 2.0 * x * y * z - y * y * z - y * z * z - y - z);
    j.set(0, 1, 7.0 * x * z - x * x * z - 2.0 * x * y * z - x * z * z - x - z);
    j.set(0, 2, 7.0 * x * y - x * x * y - x * y * y - 2.0 * x * y * z - x - y);

    // f2 = (1-x²)²y³z³ + (1-y²)²x³z³ + (1-z²)²x³y³
    let c = |v: f64| (1.0 - v * v) * (1.0 - v * v);
    let (x3, y3, z3) = (x * x * x, y * y * y, z * z * z);
    j.set(1, 0, -4.0 * x * (1.0 - x * x) * y3 * z3 + 3.0 * x * x * (c(y) * z3 + c(z) * y3));
    j.set(1, 1, -4.0 * y * (1.0 - y * y) * x3 * z3 + 3.0 * y * y * (c(x) * z3 + c(z) * x3));
    j.set(1, 2, -4.0 * z * (1.0 - z * z) * x3 * y3 + 3.0 * z * z * (c(x) * y3 + c(y) * x3));

    // f3 = (1-x²)³ y⁵z⁵ (7-2Σ) + x⁵ (1-y²)(1-z²)(z²-y²)²
    let wx = 1.0 - x * x;
    let (wy, wz) = (1.0 - y * y, 1.0 - z * z);
    let (x5, y5, z5) = (x.powi(5), y.powi(5), z.powi(5));
    let (x4, y4, z4) = (x.powi(4), y.powi(4), z.powi(4));
    let sum2 = 7.0 - 2.0 * (x + y + z);
    let dsq = z * z - y * y;
    j.set(
        2,
        0,
        -6.0 * x * wx * wx * y5 * z5 * sum2 - 2.0 * wx * wx * wx * y5 * z5
            + 5.0 * x4 * wy * wz * dsq * dsq,
    );
    j.set(
        2,
        1,
        wx * wx * wx * z5 * (5.0 * y4 * sum2 - 2.0 * y5)
            + x5 * wz * (-2.0 * y * dsq * dsq - 4.0 * y * wy * dsq),
    );
    j.set(
        2,
        2,
        wx * wx * wx * y5 * (5.0 * z4 * sum2 - 2.0 * z5)
            + x5 * wy * (-2.0 * z * dsq * dsq + 4.0 * z * wz * dsq),
    );
    j
}

/// Damped Newton on the cleared system. Returns the converged point when the
/// scaled residual drops below `tol`.
pub fn newton_cleared(start: [f64; 3], max_iter: usize, tol: f64) -> Option<[f64; 3]> {
    let mut p = start;
    let norm = |f: &[f64; 3], s: &[f64; 3]| -> f64 {
        (0..3).map(|i| (f[i] / s[i]).powi(2)).sum::<f64>().sqrt()
    };
    let mut f = system_cleared(&p);
    let mut r = norm(&f, &system_scales(&p));
    for _ in 0..max_iter {
        if r < tol {
            return Some(p);
        }
        if !r.is_finite() || p.iter().any(|v| v.abs() > 1e6) {
            return None;
        }
        let j = jacobian_cleared(&p);
        let delta = j.solve(&f)?;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = [p[0] - step * delta[0], p[1] - step * delta[1], p[2] - step * delta[2]];
            let ft = system_cleared(&trial);
            let rt = norm(&ft, &system_scales(&trial));
            if rt < r {
                p = trial;
                f = ft;
                r = rt;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    if r < tol {
        Some(p)
    } else {
        None
    }
}

/// Multistart search for real roots in the cube `[-box_half, box_half]³`.
///
/// Starts are drawn from a seeded generator; converged points with any
/// coordinate magnitude below [`PLANE_GUARD`] are dropped as clearing
/// artifacts, the rest deduplicated (radius 1e-6) and polished. The returned
/// set is sorted and independent of the seed and of the thread count.
pub fn find_real_roots(n_starts: usize, box_half: f64, seed: u64) -> Vec<RootTriple> {
    assert!(box_half > 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<[f64; 3]> = (0..n_starts)
        .map(|_| loop {
            let p = [
                rng.gen_range(-box_half..box_half),
                rng.gen_range(-box_half..box_half),
                rng.gen_range(-box_half..box_half),
            ];
            if p.iter().all(|v| v.abs() >= PLANE_GUARD) {
                return p;
            }
        })
        .collect();

    let found = par::map_index(starts.len(), |i| newton_cleared(starts[i], 100, 1e-13));
    let mut roots: Vec<[f64; 3]> = found
        .into_iter()
        .flatten()
        .filter(|p| p.iter().all(|v| v.abs() >= PLANE_GUARD && v.abs() <= 10.0 * box_half))
        .collect();
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut dedup: Vec<[f64; 3]> = Vec::new();
    for r in roots {
        let dup =
            dedup.iter().any(|q| (0..3).map(|i| (q[i] - r[i]).powi(2)).sum::<f64>().sqrt() <= 1e-6);
        if !dup {
            dedup.push(r);
        }
    }
    let mut out: Vec<RootTriple> = dedup
        .into_iter()
        .filter_map(|p| {
            // polish with a few more iterations at a tighter target
            let polished = newton_cleared(p, 6, 1e-15).unwrap_or(p);
            if !is_genuine_root(&polished, 1e-10) {
                return None;
            }
            let f = system_cleared(&polished);
            let s = system_scales(&polished);
            let res = (0..3).map(|i| (f[i] / s[i]).abs()).fold(0.0, f64::max);
            if res <= 1e-10 {
                Some(RootTriple { x: polished[0], y: polished[1], z: polished[2], residual: res })
            } else {
                None
            }
        })
        .collect();
    // order on a coarse key: paired roots agree in x to an ulp, so a plain
    // float sort would be seed-dependent
    let key = |r: &RootTriple| {
        let q = |v: f64| (v * 1e8).round() as i64;
        [q(r.x), q(r.y), q(r.z)]
    };
    out.sort_by_key(key);
    out
}

/// Writes roots as CSV, 12 significant digits: `x,y,z,residual`.
pub fn write_roots_csv<W: std::io::Write>(roots: &[RootTriple], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "x,y,z,residual")?;
    for r in roots {
        writeln!(
            w,
            "{},{},{},{}",
            crate::fmt_f64(r.x),
            crate::fmt_f64(r.y),
            crate::fmt_f64(r.z),
            crate::fmt_f64(r.residual)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_residuals_small_at_tabulated_roots() {
        for known in &KNOWN_REAL_ROOTS {
            let raw = system_raw(known);
            // tabulated to six digits only
            assert!(raw[0].abs() < 1e-4, "{known:?}: f1 = {}", raw[0]);
        }
    }

    #[test]
    fn unit_point_is_not_a_root() {
        let raw = system_raw(&[1.0, 1.0, 1.0]);
        assert!((raw[0] - 1.0).abs() < 1e-15); // 7 - 3 - 3 = 1
    }

    #[test]
    fn swap_symmetry_in_y_and_z() {
        let p = [0.7, -0.3, 2.1];
        let swapped = [0.7, 2.1, -0.3];
        let a = system_cleared(&p);
        let b = system_cleared(&swapped);
        for i in 0..3 {
            assert!((a[i].abs() - b[i].abs()).abs() < 1e-12);
        }
        let ra = system_raw(&p);
        let rb = system_raw(&swapped);
        for i in 0..3 {
            assert!((ra[i].abs() - rb[i].abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let pts = [[0.4, -0.8, 1.7], [2.0, 3.0, -1.5], [-0.14, 0.14, 6.9]];
        for p in pts {
            let j = jacobian_cleared(&p);
            let h = 1e-6;
            for col in 0..3 {
                let mut pp = p;
                pp[col] += h;
                let mut pm = p;
                pm[col] -= h;
                let fp = system_cleared(&pp);
                let fm = system_cleared(&pm);
                for row in 0..3 {
                    let fd = (fp[row] - fm[row]) / (2.0 * h);
                    let scale = j.at(row, col).abs().max(1.0);
                    assert!(
                        (j.at(row, col) - fd).abs() < 1e-4 * scale,
                        "({row},{col}) at {p:?}: {} vs {}",
                        j.at(row, col),
                        fd
                    );
                }
            }
        }
    }

    #[test]
    fn newton_converges_from_near_a_root() {
        let root = newton_cleared([-0.14, 0.15, 6.95], 60, 1e-13).expect("convergence");
        assert!((root[0] + 0.143939).abs() < 1e-4);
        assert!((root[1] - 0.144912).abs() < 1e-4);
        assert!((root[2] - 6.90076).abs() < 1e-4);
    }

    #[test]
    fn finds_all_four_roots_and_pairs() {
        let roots = find_real_roots(4000, 15.0, 7);
        let mut hit = [false; 4];
        for r in &roots {
            if let Some(i) = r.matches_known(1e-4) {
                hit[i] = true;
            }
            assert!(r.residual <= 1e-10);
            // raw residual, measured against the raw equations' own term sizes
            let raw = r.raw_residual();
            let c = r.coords();
            let raw_scale = [
                7.0 + c.iter().map(|v| v.abs() + 1.0 / v.abs()).sum::<f64>(),
                c.iter().map(|v| (1.0 - v * v).powi(2).abs() / v.abs().powi(3)).sum::<f64>(),
                system_scales(&c)[2],
            ];
            for i in 0..3 {
                assert!(raw[i].abs() <= 1e-8 * raw_scale[i].max(1.0), "root {c:?} eq {i}");
            }
            // consistency with the degenerate-case nonexistence claim
            assert!(!c.iter().all(|v| v.abs() < 1.0), "root inside unit cube: {c:?}");
        }
        assert!(hit.iter().all(|h| *h), "missing tabulated roots: {hit:?}");
        // y <-> z exchange pairs each root with another member of the set
        for r in &roots {
            let swapped = [r.x, r.z, r.y];
            assert!(
                roots.iter().any(|q| {
                    (0..3).map(|i| (q.coords()[i] - swapped[i]).powi(2)).sum::<f64>().sqrt() < 1e-6
                }),
                "unpaired root {:?}",
                r.coords()
            );
        }
    }

    #[test]
    fn root_set_is_seed_independent() {
        let a = find_real_roots(3000, 15.0, 1);
        let b = find_real_roots(3000, 15.0, 2);
        assert_eq!(a.len(), b.len());
        for (ra, rb) in a.iter().zip(&b) {
            for i in 0..3 {
                assert!((ra.coords()[i] - rb.coords()[i]).abs() < 1e-6);
            }
        }
    }
}
