//! Decay measurement: sup-norm scans over kernel grids, fixed-velocity ray
//! scans, and log-log exponent fits.
//!
//! The sup norm `M(t) = max_x |I(t,x)|` obeys `M(t) ≍ t^{-3/4}` (d=2),
//! `t^{-7/6}` (d=3) and `t^{-3/2} log t` (d=4); along a ray `x = vt` the
//! exponent is `d/2 - index` for the singularity class of the critical
//! points mapping onto `v`. Fits are least squares on `(log t, log M)`, or on
//! `log(M / log t)` when a logarithmic correction is expected.

use serde::Serialize;

use crate::kernel::{aliasing_risk, kernel_fft, Amplitude};

/// One sup-norm sample.
#[derive(Debug, Clone, Serialize)]
pub struct SupSample {
    pub t: f64,
    pub sup: f64,
    pub argmax: Vec<i64>,
    pub aliasing_risk: bool,
}

/// A fitted power law `M ≈ C t^{-exponent}` (times `log t` when
/// `log_correction`).
#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub log_correction: bool,
    pub constant: f64,
    pub r_squared: f64,
    pub t_window: (f64, f64),
    pub samples: Vec<(f64, f64)>,
    /// All samples sat below 1e-10: the ray is outside the light cone and
    /// no power law is meaningful.
    pub rapid_decay: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum FitError {
    #[error("need at least 6 samples spanning a factor of 4 in t (got {n} over x{span:.2})")]
    InsufficientSpan { n: usize, span: f64 },
    #[error("samples must have positive t and M for a log-log fit")]
    NonPositiveSample,
}

/// Sup-norm scan: `M(t) = max_x |I(t,x)|` over the centered box, one kernel
/// grid per time. Times are processed in order; the kernel evaluation itself
/// is data-parallel.
pub fn sup_scan(d: usize, amp: Amplitude, t_list: &[f64], n: usize) -> Vec<SupSample> {
    t_list
        .iter()
        .map(|&t| {
            let grid = kernel_fft(t, d, n, amp);
            let (sup, argmax) = grid.max_abs();
            SupSample { t, sup, argmax, aliasing_risk: aliasing_risk(d, n, t) }
        })
        .collect()
}

/// Least-squares power-law fit through `(log t, log M)` (or
/// `log(M / log t)` with the correction).
pub fn fit_decay(samples: &[(f64, f64)], log_correction: bool) -> Result<DecayFit, FitError> {
    let span = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max)
        / samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    if samples.len() < 6 || !(span >= 4.0) {
        return Err(FitError::InsufficientSpan { n: samples.len(), span });
    }
    if samples.iter().any(|s| s.0 <= 0.0 || s.1 <= 0.0) {
        return Err(FitError::NonPositiveSample);
    }
    let xy: Vec<(f64, f64)> = samples
        .iter()
        .map(|&(t, m)| {
            let y = if log_correction { (m / t.ln()).ln() } else { m.ln() };
            (t.ln(), y)
        })
        .collect();
    let n = xy.len() as f64;
    let sx: f64 = xy.iter().map(|p| p.0).sum();
    let sy: f64 = xy.iter().map(|p| p.1).sum();
    let sxx: f64 = xy.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = xy.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    let intercept = (sy - slope * sx) / n;
    let mean_y = sy / n;
    let ss_res: f64 = xy.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
    let ss_tot: f64 = xy.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let t_min = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let t_max = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(DecayFit {
        exponent: -slope,
        log_correction,
        constant: intercept.exp(),
        r_squared,
        t_window: (t_min, t_max),
        samples: samples.to_vec(),
        rapid_decay: false,
    })
}

/// Decay of `|I(t, round(vt))|` along the ray with velocity `v`. Outside the
/// group-velocity ball the samples vanish to rounding and the result is
/// flagged `rapid_decay` instead of fitted.
pub fn ray_decay(
    v: &[f64],
    amp: Amplitude,
    t_list: &[f64],
    n: usize,
    log_correction: bool,
) -> Result<DecayFit, FitError> {
    let d = v.len();
    let samples: Vec<(f64, f64)> = t_list
        .iter()
        .map(|&t| {
            let grid = kernel_fft(t, d, n, amp);
            let site: Vec<i64> = v.iter().map(|vj| (vj * t).round() as i64).collect();
            let val = grid.value_at(&site).map(|c| c.norm()).unwrap_or(0.0);
            (t, val)
        })
        .collect();
    if samples.iter().all(|s| s.1 < 1e-10) {
        let t_min = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
        let t_max = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
        return Ok(DecayFit {
            exponent: f64::INFINITY,
            log_correction,
            constant: 0.0,
            r_squared: 1.0,
            t_window: (t_min, t_max),
            samples,
            rapid_decay: true,
        });
    }
    fit_decay(&samples, log_correction)
}

/// Maximum kernel modulus outside the dilated light cone
/// `|x|_∞ ≥ (1+delta) t v_max`. At `t = 0` the region is every site but the
/// origin.
pub fn lightcone_tail(t: f64, d: usize, n: usize, delta: f64) -> f64 {
    let grid = kernel_fft(t, d, n, Amplitude::One);
    let radius = (1.0 + delta) * t * crate::dispersion::group_speed_sup(d);
    grid.max_abs_outside(radius.max(0.5))
}

/// Writes sup-scan samples as CSV: `t,sup,argmax…`.
pub fn write_sup_csv<W: std::io::Write>(samples: &[SupSample], w: &mut W) -> std::io::Result<()> {
    let d = samples.first().map(|s| s.argmax.len()).unwrap_or(0);
    let coords: Vec<String> = (1..=d).map(|j| format!("argmax{j}")).collect();
    writeln!(w, "t,sup,{}", coords.join(","))?;
    for s in samples {
        let arg: Vec<String> = s.argmax.iter().map(|c| c.to_string()).collect();
        writeln!(w, "{},{},{}", crate::fmt_f64(s.t), crate::fmt_f64(s.sup), arg.join(","))?;
    }
    Ok(())
}
