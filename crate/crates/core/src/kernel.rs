//! Fundamental-solution kernels of the lattice Klein-Gordon equation.
//!
//! The production path [`kernel_fft`] evaluates
//!
//! ```text
//! I(t,x) = ∫_{[0,2π]^d} e^{i(x·ξ - t ω(ξ))} a(ξ) dξ
//! ```
//!
//! by the equispaced (trapezoidal) rule on an `n^d` frequency grid, realized
//! as one inverse DFT; for the smooth periodic integrand this converges
//! spectrally in `n` once the grid resolves the light cone (`n ≳ 2 t v_max`).
//! Two independent oracles validate it: [`kernel_direct`], a tensor
//! Gauss-Legendre rule that never sees the equispaced grid, and
//! [`kernel_ode`], which integrates the lattice ODE system in the time
//! domain with a classical fourth-order scheme on a truncated box.
//!
//! [`propagator_pair`] exposes the unit-normalized cosine and `sin(tω)/ω`
//! propagators that build solutions of the Cauchy problem.

use num_complex::Complex64;
use rustfft::FftDirection;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

use crate::dispersion::group_speed_sup;
use crate::fftgrid::transform_all_axes;
use crate::gauss::gauss_legendre;
use crate::par;

const TAU: f64 = 2.0 * std::f64::consts::PI;

/// The smooth amplitude in the kernel integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Amplitude {
    /// `a(ξ) = 1` (second-kind / cosine-type kernels).
    One,
    /// `a(ξ) = 1/ω(ξ)`, smooth since ω ≥ 1 (first-kind / sine-type kernels).
    InverseOmega,
}

impl Amplitude {
    fn apply(self, omega: f64) -> f64 {
        match self {
            Amplitude::One => 1.0,
            Amplitude::InverseOmega => 1.0 / omega,
        }
    }

    fn tag(self) -> u8 {
        match self {
            Amplitude::One => 0,
            Amplitude::InverseOmega => 1,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Amplitude::One),
            1 => Some(Amplitude::InverseOmega),
            _ => None,
        }
    }
}

/// Kernel values on the centered lattice box `x ∈ {-n/2, …, n/2-1}^d`,
/// row-major, in the bare normalization (no `(2π)^{-d}` prefactor).
#[derive(Debug, Clone)]
pub struct KernelGrid {
    pub d: usize,
    pub n: usize,
    pub t: f64,
    pub amp: Amplitude,
    values: Vec<Complex64>,
}

impl KernelGrid {
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Centered flat index of a lattice site, if inside the box.
    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        debug_assert_eq!(x.len(), self.d);
        let half = (self.n / 2) as i64;
        let mut flat = 0usize;
        for &c in x {
            if c < -half || c >= half {
                return None;
            }
            flat = flat * self.n + (c + half) as usize;
        }
        Some(flat)
    }

    pub fn value_at(&self, x: &[i64]) -> Option<Complex64> {
        self.index_of(x).map(|i| self.values[i])
    }

    /// Lattice site of a flat index.
    pub fn site_of(&self, mut flat: usize) -> Vec<i64> {
        let half = (self.n / 2) as i64;
        let mut x = vec![0i64; self.d];
        for j in (0..self.d).rev() {
            x[j] = (flat % self.n) as i64 - half;
            flat /= self.n;
        }
        x
    }

    /// Maximum modulus and the first site attaining it.
    pub fn max_abs(&self) -> (f64, Vec<i64>) {
        let (m, idx) = par::stable_max(self.values.len(), |i| self.values[i].norm());
        (m, self.site_of(idx))
    }

    /// Maximum modulus over sites with `|x|_∞ ≥ radius`.
    pub fn max_abs_outside(&self, radius: f64) -> f64 {
        let n = self.n;
        let d = self.d;
        let half = (n / 2) as i64;
        let (m, _) = par::stable_max(self.values.len(), |flat| {
            let mut rest = flat;
            let mut linf = 0i64;
            for _ in 0..d {
                let c = (rest % n) as i64 - half;
                rest /= n;
                linf = linf.max(c.abs());
            }
            if (linf as f64) >= radius {
                self.values[flat].norm()
            } else {
                f64::NEG_INFINITY
            }
        });
        if m.is_finite() {
            m
        } else {
            0.0
        }
    }

    /// Squared ℓ² norm of the values (deterministic summation).
    pub fn l2_sq(&self) -> f64 {
        par::stable_sum_fn(self.values.len(), |i| self.values[i].norm_sqr())
    }
}

/// Recommended grid size for time `t`: `2⌈t v_max⌉ + 32`, the light cone plus
/// a safety margin (rounded up to even).
pub fn recommended_n(d: usize, t: f64) -> usize {
    let m = 2 * (t.abs() * group_speed_sup(d)).ceil() as usize + 32;
    m + m % 2
}

/// Undersampling check: the box no longer contains the light cone with an
/// 8-site margin.
pub fn aliasing_risk(d: usize, n: usize, t: f64) -> bool {
    (n as f64) < 2.0 * (t.abs() * group_speed_sup(d)).ceil() + 8.0
}

/// Evaluates the kernel on the full centered box by the equispaced rule:
///
/// ```text
/// values[x] = (2π/n)^d Σ_k e^{-i t ω(2πk/n)} a(2πk/n) e^{i x·2πk/n}.
/// ```
///
/// The centering shift is folded into the symbol as `(-1)^{Σ k_j}`, so one
/// unnormalized inverse DFT produces the centered layout directly.
pub fn kernel_fft(t: f64, d: usize, n: usize, amp: Amplitude) -> KernelGrid {
    assert!(n % 2 == 0, "grid size must be even");
    assert!((1..=4).contains(&d));
    let len = n.pow(d as u32);
    let mut values = vec![Complex64::default(); len];
    fill_symbol(&mut values, n, d, |omega| {
        let (s, c) = (t * omega).sin_cos();
        Complex64::new(c, -s) * amp.apply(omega)
    });
    let scale = (TAU / n as f64).powi(d as i32);
    for v in values.iter_mut() {
        *v *= scale;
    }
    let mut scratch = vec![Complex64::default(); len];
    transform_all_axes(&mut values, &mut scratch, n, d, FftDirection::Inverse);
    KernelGrid { d, n, t, amp, values }
}

/// Fills `values[k] = (-1)^{Σ k_j} g(ω(2πk/n))` for the row-major frequency
/// grid; the alternating sign is the centering shift.
fn fill_symbol(
    values: &mut [Complex64],
    n: usize,
    d: usize,
    g: impl Fn(f64) -> Complex64 + Sync + Send,
) {
    // per-axis table of 2(1 - cos ξ) and of the index parity
    let table: Vec<f64> = (0..n).map(|k| 2.0 * (1.0 - (TAU * k as f64 / n as f64).cos())).collect();
    par::for_each_chunk_mut(values, n, |start, chunk| {
        let mut rest = start / n;
        let mut prefix_sum = 0.0;
        let mut prefix_parity = 0usize;
        for _ in 0..(d - 1) {
            let k = rest % n;
            rest /= n;
            prefix_sum += table[k];
            prefix_parity += k;
        }
        for (k_last, slot) in chunk.iter_mut().enumerate() {
            let omega = (1.0 + prefix_sum + table[k_last]).sqrt();
            let sign = if (prefix_parity + k_last) % 2 == 0 { 1.0 } else { -1.0 };
            *slot = g(omega) * sign;
        }
    });
}

/// Direct tensor Gauss-Legendre evaluation of the kernel at one site;
/// independent of the equispaced grid. Cost grows as `nodes^d`.
pub fn kernel_direct(t: f64, x: &[i64], amp: Amplitude, nodes: usize) -> Complex64 {
    assert!(nodes >= 64);
    let d = x.len();
    let (xs, ws) = gauss_legendre(nodes, 0.0, TAU);
    let cos_tab: Vec<f64> = xs.iter().map(|v| v.cos()).collect();
    let total = nodes.pow(d as u32);
    let chunks = total.div_ceil(4096);
    let partials = par::map_index(chunks, |c| {
        let lo = c * 4096;
        let hi = (lo + 4096).min(total);
        let mut acc = Complex64::default();
        for flat in lo..hi {
            let mut rest = flat;
            let mut w = 1.0;
            let mut phase = 0.0;
            let mut omega_sq = 1.0;
            for &site in x.iter().take(d) {
                let k = rest % nodes;
                rest /= nodes;
                w *= ws[k];
                phase += site as f64 * xs[k];
                omega_sq += 2.0 * (1.0 - cos_tab[k]);
            }
            let omega = omega_sq.sqrt();
            let a = amp.apply(omega);
            let (s, cc) = (phase - t * omega).sin_cos();
            acc += Complex64::new(cc, s) * (w * a);
        }
        acc
    });
    partials.into_iter().sum()
}

/// Real-valued kernel samples on the centered box (used for the cosine and
/// sinc propagators and for comparison with the time-domain oracle).
#[derive(Debug, Clone)]
pub struct RealGrid {
    pub d: usize,
    pub n: usize,
    pub t: f64,
    pub values: Vec<f64>,
}

impl RealGrid {
    pub fn value_at(&self, x: &[i64]) -> Option<f64> {
        let half = (self.n / 2) as i64;
        let mut flat = 0usize;
        for &c in x {
            if c < -half || c >= half {
                return None;
            }
            flat = flat * self.n + (c + half) as usize;
        }
        Some(self.values[flat])
    }
}

/// Unit-normalized propagators on the box:
/// `U0(t)[x] = (2π)^{-d} ∫ cos(tω) e^{ixξ} dξ` (so `U0(0) = δ₀`) and
/// `U1(t)[x] = (2π)^{-d} ∫ sin(tω)/ω e^{ixξ} dξ`; `U0` is even and `U1` odd
/// in `t`.
pub fn propagator_pair(t: f64, d: usize, n: usize) -> (RealGrid, RealGrid) {
    let u0 = real_transform(d, n, |omega| (t * omega).cos());
    let u1 = real_transform(d, n, |omega| (t * omega).sin() / omega);
    (RealGrid { d, n, t, values: u0 }, RealGrid { d, n, t, values: u1 })
}

fn real_transform(d: usize, n: usize, symbol: impl Fn(f64) -> f64 + Sync + Send) -> Vec<f64> {
    assert!(n % 2 == 0);
    let len = n.pow(d as u32);
    let mut values = vec![Complex64::default(); len];
    let scale = 1.0 / len as f64;
    fill_symbol(&mut values, n, d, |omega| Complex64::new(symbol(omega) * scale, 0.0));
    let mut scratch = vec![Complex64::default(); len];
    transform_all_axes(&mut values, &mut scratch, n, d, FftDirection::Inverse);
    // the symbol is real and even, so the transform is real up to rounding
    values.iter().map(|v| v.re).collect()
}

/// State of the time-domain oracle on the truncated box `{-R,…,R}^d` with
/// zero Dirichlet exterior.
#[derive(Debug, Clone)]
pub struct LatticeBoxField {
    pub d: usize,
    pub radius: i64,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub time: f64,
}

impl LatticeBoxField {
    pub fn side(&self) -> usize {
        (2 * self.radius + 1) as usize
    }

    pub fn num_sites(&self) -> usize {
        self.side().pow(self.d as u32)
    }

    pub fn value_at(&self, x: &[i64]) -> Option<f64> {
        let side = self.side() as i64;
        let mut flat = 0i64;
        for &c in x {
            if c < -self.radius || c > self.radius {
                return None;
            }
            flat = flat * side + (c + self.radius);
        }
        Some(self.u[flat as usize])
    }

    /// Discrete energy `½ Σ (p² + u² + |∇⁺u|²)` with forward differences into
    /// the zero exterior counted once per lattice edge.
    pub fn energy(&self) -> f64 {
        let side = self.side();
        let d = self.d;
        let strides: Vec<usize> = (0..d).map(|j| side.pow((d - 1 - j) as u32)).collect();
        par::stable_sum_fn(self.num_sites(), |flat| {
            let u = self.u[flat];
            let p = self.p[flat];
            let mut acc = 0.5 * (p * p + u * u);
            for &stride in &strides {
                let coord = (flat / stride) % side;
                // forward edge
                let fwd = if coord + 1 < side { self.u[flat + stride] } else { 0.0 };
                acc += 0.5 * (fwd - u) * (fwd - u);
                // the edge entering from the exterior on the low side
                if coord == 0 {
                    acc += 0.5 * u * u;
                }
            }
            acc
        })
    }
}

/// Result of the ODE oracle.
#[derive(Debug, Clone)]
pub struct OdeKernel {
    pub field: LatticeBoxField,
    /// Set when the box margin beyond the light cone is under 5 sites.
    pub boundary_warning: bool,
}

/// Integrates `u_tt = Δu - u` with `u(0) = δ₀`, `u_t(0) = 0` on the
/// truncated box by the classical fourth-order Runge-Kutta scheme. The
/// result approximates the unit-normalized cosine propagator `U0(t)` wherever
/// the exterior truncation has not been reached.
pub fn kernel_ode(t: f64, d: usize, box_radius: i64, dt: f64) -> OdeKernel {
    assert!(box_radius >= 1);
    assert!(dt > 0.0 && dt <= 0.01, "dt must be in (0, 0.01]");
    let side = (2 * box_radius + 1) as usize;
    let len = side.pow(d as u32);
    let mut u = vec![0.0f64; len];
    let mut p = vec![0.0f64; len];
    let center: Vec<i64> = vec![0; d];
    let center_flat = {
        let mut flat = 0usize;
        for &c in &center {
            flat = flat * side + (c + box_radius) as usize;
        }
        flat
    };
    u[center_flat] = 1.0;

    let strides: Vec<usize> = (0..d).map(|j| side.pow((d - 1 - j) as u32)).collect();
    let apply_rhs = |field: &[f64], out: &mut Vec<f64>| {
        // out = Δ field - field, zero Dirichlet exterior
        let got = par::map_index_cheap(len, |flat| {
            let mut acc = -(2.0 * d as f64 + 1.0) * field[flat];
            for (j, &stride) in strides.iter().enumerate() {
                let coord = (flat / stride) % side;
                if coord + 1 < side {
                    acc += field[flat + stride];
                }
                if coord > 0 {
                    acc += field[flat - stride];
                }
                let _ = j;
            }
            acc
        });
        *out = got;
    };

    let steps = (t / dt).ceil() as usize;
    let mut k1 = Vec::new();
    let mut k2 = Vec::new();
    let mut k3 = Vec::new();
    let mut k4 = Vec::new();
    let mut time = 0.0;
    for step in 0..steps {
        let h = if step + 1 == steps { t - time } else { dt };
        // k1
        apply_rhs(&u, &mut k1);
        // k2 at u + h/2 p, p + h/2 k1
        let u2: Vec<f64> = par::map_index_cheap(len, |i| u[i] + 0.5 * h * p[i]);
        apply_rhs(&u2, &mut k2);
        // k3 at u + h/2 (p + h/2 k1)
        let u3: Vec<f64> = par::map_index_cheap(len, |i| u[i] + 0.5 * h * (p[i] + 0.5 * h * k1[i]));
        apply_rhs(&u3, &mut k3);
        // k4 at u + h (p + h/2 k2)
        let u4: Vec<f64> = par::map_index_cheap(len, |i| u[i] + h * (p[i] + 0.5 * h * k2[i]));
        apply_rhs(&u4, &mut k4);

        let new_u: Vec<f64> =
            par::map_index_cheap(len, |i| u[i] + h * p[i] + h * h / 6.0 * (k1[i] + k2[i] + k3[i]));
        let new_p: Vec<f64> =
            par::map_index_cheap(len, |i| p[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        u = new_u;
        p = new_p;
        time += h;
    }

    let margin = box_radius as f64 - t * group_speed_sup(d);
    OdeKernel {
        field: LatticeBoxField { d, radius: box_radius, u, p, time },
        boundary_warning: margin < 5.0,
    }
}

/// Binary dump: magic `DKGK`, then `u32 d`, `u32 n`, `f64 t`, `u8 amp`, then
/// the centered row-major values as little-endian `(re, im)` doubles.
pub fn write_kernel_binary<W: Write>(grid: &KernelGrid, w: &mut W) -> std::io::Result<()> {
    w.write_all(b"DKGK")?;
    w.write_all(&(grid.d as u32).to_le_bytes())?;
    w.write_all(&(grid.n as u32).to_le_bytes())?;
    w.write_all(&grid.t.to_le_bytes())?;
    w.write_all(&[grid.amp.tag()])?;
    for v in &grid.values {
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_kernel_binary<R: Read>(r: &mut R) -> std::io::Result<KernelGrid> {
    let bad = |msg: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string());
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != b"DKGK" {
        return Err(bad("bad magic"));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let d = u32::from_le_bytes(b4) as usize;
    r.read_exact(&mut b4)?;
    let n = u32::from_le_bytes(b4) as usize;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let t = f64::from_le_bytes(b8);
    let mut b1 = [0u8; 1];
    r.read_exact(&mut b1)?;
    let amp = Amplitude::from_tag(b1[0]).ok_or_else(|| bad("bad amplitude tag"))?;
    if !(1..=4).contains(&d) || n == 0 || n % 2 != 0 {
        return Err(bad("bad header"));
    }
    let len = n.pow(d as u32);
    let mut values = Vec::with_capacity(len);
    for _ in 0..len {
        r.read_exact(&mut b8)?;
        let re = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let im = f64::from_le_bytes(b8);
        values.push(Complex64::new(re, im));
    }
    Ok(KernelGrid { d, n, t, amp, values })
}

/// CSV slice: sites where coordinate `j` is pinned to `fixed[j]` when
/// `Some`; columns `x1,…,xd,re,im`, floats with 12 significant digits.
pub fn write_kernel_csv<W: Write>(
    grid: &KernelGrid,
    w: &mut W,
    fixed: &[Option<i64>],
) -> std::io::Result<()> {
    assert_eq!(fixed.len(), grid.d);
    let header: Vec<String> = (1..=grid.d).map(|j| format!("x{j}")).collect();
    writeln!(w, "{},re,im", header.join(","))?;
    let half = (grid.n / 2) as i64;
    let mut site: Vec<i64> = fixed.iter().map(|f| f.unwrap_or(-half)).collect();
    loop {
        if let Some(v) = grid.value_at(&site) {
            let coords: Vec<String> = site.iter().map(|c| c.to_string()).collect();
            writeln!(w, "{},{},{}", coords.join(","), crate::fmt_f64(v.re), crate::fmt_f64(v.im))?;
        }
        // advance the free coordinates, last axis fastest
        let mut j = grid.d;
        loop {
            if j == 0 {
                return Ok(());
            }
            j -= 1;
            if fixed[j].is_some() {
                continue;
            }
            site[j] += 1;
            if site[j] < half {
                break;
            }
            site[j] = -half;
        }
    }
}
