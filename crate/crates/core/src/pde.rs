//! Evolution of the (nonlinear) lattice Klein-Gordon equation
//! `u_tt - Δu + u ± |u|^{2s} u = 0` on periodic boxes `{0,…,m-1}^d`.
//!
//! The linear flow is exact in frequency space: per mode, `(û, p̂)` rotates by
//!
//! ```text
//! û ← cos(dt ω) û + sin(dt ω)/ω p̂,    p̂ ← -ω sin(dt ω) û + cos(dt ω) p̂,
//! ```
//!
//! which conserves the quadratic energy `‖ω û‖² + ‖p̂‖²` to rounding. The
//! nonlinear term has the exact substep `p ← p ∓ dt |u|^{2s} u` (it moves
//! only `p`), and [`Evolver::strang_step`] composes
//! `B(dt/2) ∘ A(dt) ∘ B(dt/2)` for second-order accuracy.
//!
//! A periodic box of side `m ≥ 2 t v_max + margin` reproduces the infinite
//! lattice to wrap-around accuracy ~1e-10 inside the light cone, which is
//! how the decay experiments emulate `Z^d`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};

use crate::decay::{fit_decay, DecayFit, FitError};
use crate::dispersion::group_speed_sup;
use crate::fftgrid::GridTransform;
use crate::par;

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// `(u, u_t)` on a periodic box, plus the nonlinearity parameters.
#[derive(Debug, Clone)]
pub struct FieldState {
    pub d: usize,
    pub m: usize,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub time: f64,
    /// Nonlinearity exponent `s` in `|u|^{2s} u`.
    pub s: f64,
    /// +1 defocusing, -1 focusing.
    pub sign: i8,
}

impl FieldState {
    pub fn zero(d: usize, m: usize, s: f64, sign: i8) -> Self {
        assert!(sign == 1 || sign == -1);
        assert!((1..=4).contains(&d));
        let len = m.pow(d as u32);
        FieldState { d, m, u: vec![0.0; len], p: vec![0.0; len], time: 0.0, s, sign }
    }

    /// Kronecker delta at the origin scaled by `amplitude`, `u_t = 0`.
    pub fn delta(d: usize, m: usize, amplitude: f64, s: f64, sign: i8) -> Self {
        let mut st = Self::zero(d, m, s, sign);
        st.u[0] = amplitude;
        st
    }

    /// Seeded random data supported on five sites, scaled to `‖u‖₂ = eps`.
    pub fn random_five_site(d: usize, m: usize, eps: f64, seed: u64, s: f64, sign: i8) -> Self {
        let mut st = Self::zero(d, m, s, sign);
        let len = st.u.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut placed = 0;
        while placed < 5.min(len) {
            let site = rng.gen_range(0..len);
            if st.u[site] == 0.0 {
                st.u[site] = rng.gen_range(-1.0..1.0);
                placed += 1;
            }
        }
        let norm = st.u.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in st.u.iter_mut() {
            *x *= eps / norm;
        }
        st
    }

    /// Flat index of a lattice site, coordinates wrapped into the box.
    pub fn site_index(&self, x: &[i64]) -> usize {
        let m = self.m as i64;
        let mut flat = 0usize;
        for &c in x {
            flat = flat * self.m + c.rem_euclid(m) as usize;
        }
        flat
    }
}

/// Discrete Hamiltonian
/// `Σ_x [ ½p² + ½u² + ½|∇⁺u|² ± |u|^{2s+2}/(2s+2) ]`
/// with periodic forward differences; conserved by the exact flow.
pub fn energy(state: &FieldState) -> f64 {
    let m = state.m;
    let d = state.d;
    let strides: Vec<usize> = (0..d).map(|j| m.pow((d - 1 - j) as u32)).collect();
    let two_s_plus_2 = 2.0 * state.s + 2.0;
    let sign = state.sign as f64;
    par::stable_sum_fn(state.u.len(), |flat| {
        let u = state.u[flat];
        let p = state.p[flat];
        let mut acc = 0.5 * (p * p + u * u);
        for &stride in &strides {
            let coord = (flat / stride) % m;
            let fwd = if coord + 1 < m {
                state.u[flat + stride]
            } else {
                state.u[flat + stride - stride * m]
            };
            let diff = fwd - u;
            acc += 0.5 * diff * diff;
        }
        acc + sign * pow_abs(u, two_s_plus_2) / two_s_plus_2
    })
}

/// `|u|^e` with fast paths for the even integer exponents that dominate the
/// experiments.
#[inline]
fn pow_abs(u: f64, e: f64) -> f64 {
    if e == 4.0 {
        let q = u * u;
        q * q
    } else if e == 2.0 {
        u * u
    } else if e == 6.0 {
        let q = u * u;
        q * q * q
    } else {
        u.abs().powf(e)
    }
}

/// Discrete ℓ^p norm of `u`; `p = ∞` gives the sup norm.
pub fn lp_norm(state: &FieldState, p: f64) -> f64 {
    assert!(p >= 1.0);
    if p.is_infinite() {
        let (m, _) = par::stable_max(state.u.len(), |i| state.u[i].abs());
        return m;
    }
    let total = par::stable_sum_fn(state.u.len(), |i| pow_abs(state.u[i], p));
    total.powf(1.0 / p)
}

#[derive(Debug, thiserror::Error)]
pub enum PdeError {
    #[error("field overflow (|u| reached {max_abs:.3e} at t = {time:.3}); focusing blow-up?")]
    Overflow { max_abs: f64, time: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
}

/// Spectral evolution engine for one box size. Holds the transform plans,
/// the frequency grid and the symbol cache for the last `dt`.
pub struct Evolver {
    d: usize,
    m: usize,
    transform: GridTransform,
    omega: Vec<f64>,
    symbol_dt: f64,
    cos_sym: Vec<f64>,
    sinc_sym: Vec<f64>,
    wsin_sym: Vec<f64>,
    bu: Vec<Complex64>,
    bp: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Evolver {
    pub fn new(d: usize, m: usize) -> Self {
        assert!((1..=4).contains(&d));
        let len = m.pow(d as u32);
        // ω on the box's discrete frequencies 2πk/m
        let table: Vec<f64> =
            (0..m).map(|k| 2.0 * (1.0 - (TAU * k as f64 / m as f64).cos())).collect();
        let omega = par::map_index_cheap(len, |flat| {
            let mut rest = flat;
            let mut acc = 1.0;
            for _ in 0..d {
                acc += table[rest % m];
                rest /= m;
            }
            acc.sqrt()
        });
        Evolver {
            d,
            m,
            transform: GridTransform::new(m),
            omega,
            symbol_dt: f64::NAN,
            cos_sym: Vec::new(),
            sinc_sym: Vec::new(),
            wsin_sym: Vec::new(),
            bu: vec![Complex64::default(); len],
            bp: vec![Complex64::default(); len],
            scratch: vec![Complex64::default(); len],
        }
    }

    fn ensure_symbols(&mut self, dt: f64) {
        if self.symbol_dt == dt {
            return;
        }
        let omega = &self.omega;
        self.cos_sym = par::map_index_cheap(omega.len(), |i| (dt * omega[i]).cos());
        self.sinc_sym = par::map_index_cheap(omega.len(), |i| (dt * omega[i]).sin() / omega[i]);
        self.wsin_sym = par::map_index_cheap(omega.len(), |i| -omega[i] * (dt * omega[i]).sin());
        self.symbol_dt = dt;
    }

    /// Exact propagator of the linear equation over time `dt`.
    pub fn linear_flow(&mut self, state: &mut FieldState, dt: f64) {
        assert_eq!(state.d, self.d);
        assert_eq!(state.m, self.m);
        if dt == 0.0 {
            return;
        }
        self.ensure_symbols(dt);
        let len = state.u.len();
        for i in 0..len {
            self.bu[i] = Complex64::new(state.u[i], 0.0);
            self.bp[i] = Complex64::new(state.p[i], 0.0);
        }
        self.transform.apply(&mut self.bu, &mut self.scratch, self.d, FftDirection::Forward);
        self.transform.apply(&mut self.bp, &mut self.scratch, self.d, FftDirection::Forward);
        {
            let (cos_s, sinc_s, wsin_s) = (&self.cos_sym, &self.sinc_sym, &self.wsin_sym);
            let bp = &mut self.bp;
            let bu = &mut self.bu;
            for i in 0..len {
                let u_hat = bu[i];
                let p_hat = bp[i];
                bu[i] = u_hat * cos_s[i] + p_hat * sinc_s[i];
                bp[i] = u_hat * wsin_s[i] + p_hat * cos_s[i];
            }
        }
        self.transform.apply(&mut self.bu, &mut self.scratch, self.d, FftDirection::Inverse);
        self.transform.apply(&mut self.bp, &mut self.scratch, self.d, FftDirection::Inverse);
        let inv_len = 1.0 / len as f64;
        for i in 0..len {
            state.u[i] = self.bu[i].re * inv_len;
            state.p[i] = self.bp[i].re * inv_len;
        }
        state.time += dt;
    }

    /// Exact flow of the nonlinear substep `∂_t(u,p) = (0, ∓|u|^{2s}u)`.
    fn nonlinear_kick(&self, state: &mut FieldState, dt: f64) {
        let factor = -(state.sign as f64) * dt;
        let two_s = 2.0 * state.s;
        for (p, &u) in state.p.iter_mut().zip(state.u.iter()) {
            *p += factor * pow_abs(u, two_s) * u;
        }
    }

    /// One Strang step `B(dt/2) ∘ A(dt) ∘ B(dt/2)`; second-order accurate.
    pub fn strang_step(&mut self, state: &mut FieldState, dt: f64) -> Result<(), PdeError> {
        assert!(dt.abs() <= 0.1, "Strang step limited to |dt| ≤ 0.1");
        self.nonlinear_kick(state, 0.5 * dt);
        self.linear_flow(state, dt);
        self.nonlinear_kick(state, 0.5 * dt);
        let (max_abs, _) = par::stable_max(state.u.len(), |i| state.u[i].abs());
        if max_abs > 1e6 {
            return Err(PdeError::Overflow { max_abs, time: state.time });
        }
        Ok(())
    }
}

/// `(p_d, s_d)`: the largest Lebesgue index and the smallest nonlinearity
/// exponent for which the small-data decay statement applies.
pub fn critical_exponents(d: usize) -> (f64, f64) {
    match d {
        2 => ((13.0 + 97f64.sqrt()) / 6.0, (1.0 + 97f64.sqrt()) / 12.0),
        3 => ((27.0 + 337f64.sqrt()) / 14.0, (337f64.sqrt() - 1.0) / 28.0),
        4 => (3.0, 0.5),
        _ => panic!("critical exponents defined for d = 2, 3, 4"),
    }
}

/// Sup-norm decay rate σ_d of the linear kernel (the d=4 value carries a log
/// factor on top).
pub fn sigma_decay(d: usize) -> f64 {
    match d {
        2 => 0.75,
        3 => 7.0 / 6.0,
        4 => 1.5,
        _ => panic!("decay rate defined for d = 2, 3, 4"),
    }
}

/// Configuration of a small-data decay experiment.
#[derive(Debug, Clone)]
pub struct DecayExperiment {
    pub d: usize,
    pub s: f64,
    pub sign: i8,
    pub epsilon: f64,
    /// Lebesgue index to sample; `f64::INFINITY` for the sup norm.
    pub p: f64,
    pub t_max: f64,
    pub dt: f64,
    /// Fit window start (samples before this time are recorded but not fit).
    pub t_min_fit: f64,
    /// Box override; default sizes the box so wrap-around stays below the
    /// light-cone tail for the whole run.
    pub m: Option<usize>,
}

/// Result of a decay experiment: the fit over `[t_min_fit, t_max]` plus the
/// full sampled series.
#[derive(Debug, Clone)]
pub struct DecayExperimentResult {
    pub fit: DecayFit,
    pub series: Vec<(f64, f64)>,
    pub m: usize,
    pub expected_exponent: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Pde(#[from] PdeError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// Evolves ε-scaled delta data and fits the ℓ^p-norm decay exponent, to be
/// compared with `σ_d (p-2)/p`.
pub fn decay_experiment(cfg: &DecayExperiment) -> Result<DecayExperimentResult, ExperimentError> {
    let mut results = decay_experiment_norms(cfg, &[cfg.p])?;
    Ok(results.remove(0))
}

/// One evolution, several sampled norms: fits the decay exponent of each
/// requested ℓ^p norm of the same run.
pub fn decay_experiment_norms(
    cfg: &DecayExperiment,
    ps: &[f64],
) -> Result<Vec<DecayExperimentResult>, ExperimentError> {
    let (p_d, _s_d) = critical_exponents(cfg.d);
    for &p in ps {
        if p < 2.0 || (p > p_d && p.is_finite()) {
            return Err(ExperimentError::Pde(PdeError::InvalidParameters(format!(
                "p = {} outside [2, p_d = {:.3}] (or ∞)",
                p, p_d
            ))));
        }
    }
    let m = cfg.m.unwrap_or_else(|| {
        let needed = 2.0 * cfg.t_max * group_speed_sup(cfg.d) + 32.0;
        let m = needed.ceil() as usize;
        m + m % 2
    });
    let mut state = FieldState::delta(cfg.d, m, cfg.epsilon, cfg.s, cfg.sign);
    let mut evolver = Evolver::new(cfg.d, m);
    let steps = (cfg.t_max / cfg.dt).ceil() as usize;
    // ~48 samples across the run
    let sample_every = (steps / 48).max(1);
    let mut series: Vec<Vec<(f64, f64)>> = vec![Vec::new(); ps.len()];
    for step in 0..steps {
        evolver.strang_step(&mut state, cfg.dt).map_err(ExperimentError::Pde)?;
        if (step + 1) % sample_every == 0 || step + 1 == steps {
            for (k, &p) in ps.iter().enumerate() {
                series[k].push((state.time, lp_norm(&state, p)));
            }
        }
    }
    ps.iter()
        .zip(series)
        .map(|(&p, full)| {
            let window: Vec<(f64, f64)> =
                full.iter().copied().filter(|(t, _)| *t >= cfg.t_min_fit).collect();
            let fit = fit_decay(&window, false)?;
            let expected = if p.is_infinite() {
                sigma_decay(cfg.d)
            } else {
                sigma_decay(cfg.d) * (p - 2.0) / p
            };
            Ok(DecayExperimentResult { fit, series: full, m, expected_exponent: expected })
        })
        .collect()
}

/// On-disk run configuration; round-trips losslessly through JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub d: usize,
    pub m: usize,
    pub dt: f64,
    pub t_max: f64,
    pub s: f64,
    pub sign: i8,
    pub epsilon: f64,
    pub data: DataKind,
    pub seed: u64,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Delta,
    Random,
}

/// Time series produced by [`run_simulation`]: one row per sample time.
#[derive(Debug, Clone)]
pub struct SimSeries {
    pub columns: Vec<String>,
    pub rows: Vec<(f64, Vec<f64>)>,
}

/// Runs a configured simulation, sampling the requested diagnostics
/// (`energy`, `l2`, `linf`, or `l<p>` like `l4`) every `sample_every` steps.
pub fn run_simulation(cfg: &RunConfig, sample_every: usize) -> Result<SimSeries, PdeError> {
    if cfg.sign != 1 && cfg.sign != -1 {
        return Err(PdeError::InvalidParameters("sign must be +1 or -1".into()));
    }
    let kinds: Vec<(String, Option<f64>)> = cfg
        .outputs
        .iter()
        .map(|name| {
            let p = match name.as_str() {
                "energy" => None,
                "linf" => Some(f64::INFINITY),
                other => {
                    let stripped = other.strip_prefix('l').unwrap_or("");
                    match stripped.parse::<f64>() {
                        Ok(p) if p >= 1.0 => Some(p),
                        _ => {
                            return Err(PdeError::InvalidParameters(format!(
                                "unknown output {other:?} (want energy, l2, l4, …, linf)"
                            )))
                        }
                    }
                }
            };
            Ok((name.clone(), p))
        })
        .collect::<Result<_, _>>()?;

    let mut state = match cfg.data {
        DataKind::Delta => FieldState::delta(cfg.d, cfg.m, cfg.epsilon, cfg.s, cfg.sign),
        DataKind::Random => {
            FieldState::random_five_site(cfg.d, cfg.m, cfg.epsilon, cfg.seed, cfg.s, cfg.sign)
        }
    };
    let mut evolver = Evolver::new(cfg.d, cfg.m);
    let steps = (cfg.t_max / cfg.dt).ceil() as usize;
    let sample = |state: &FieldState| -> Vec<f64> {
        kinds
            .iter()
            .map(|(_, p)| match p {
                None => energy(state),
                Some(p) => lp_norm(state, *p),
            })
            .collect()
    };
    let mut rows = vec![(0.0, sample(&state))];
    for step in 0..steps {
        evolver.strang_step(&mut state, cfg.dt)?;
        if (step + 1) % sample_every == 0 || step + 1 == steps {
            rows.push((state.time, sample(&state)));
        }
    }
    Ok(SimSeries { columns: kinds.into_iter().map(|(n, _)| n).collect(), rows })
}

/// CSV writer for [`SimSeries`]: `time,<outputs…>` rows, 12 significant
/// digits.
pub fn write_series_csv<W: std::io::Write>(series: &SimSeries, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "time,{}", series.columns.join(","))?;
    for (t, vals) in &series.rows {
        let cells: Vec<String> = vals.iter().map(|v| crate::fmt_f64(*v)).collect();
        writeln!(w, "{},{}", crate::fmt_f64(*t), cells.join(","))?;
    }
    Ok(())
}
