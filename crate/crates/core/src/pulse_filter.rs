//! Filter functions of instantaneous π-pulse sequences, dephasing
//! coefficients under `1/f^p` spectra, and the optimal shot time.
//!
//! Times are expressed as fractions of the shot time `t_s`. With the
//! dimensionless frequency `x = ω t_s` the filter function is
//! `F[ω] = t_s F̃(ω t_s)` where `F̃(x) = ∫₀¹ y(τ) e^{ixτ} dτ` and `y(τ) = ±1`
//! is the toggling function.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::golden;
use crate::io::sig12;
use crate::quadrature::{integrate, integrate_panels, Estimate, Tolerance};
use crate::special::gamma;
use crate::{Error, Result, C64};

/// Distance from `p = 1` inside which the series form of the coefficient is
/// used.
pub const SERIES_RADIUS: f64 = 1e-6;

/// `ω_cut t_s` at and above which the power-law closed form is flagged.
pub const CUTOFF_WARN_THRESHOLD: f64 = 0.01;

/// `|Σ c_k τ_k|` below which a sequence counts as DC-free.
const BALANCE_TOL: f64 = 1e-12;

/// Ordered pulse times as fractions of the shot, `0 < θ_1 < … < θ_K < 1`.
/// An empty sequence is free induction decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    thetas: Vec<f64>,
}

impl PulseSequence {
    pub fn new(thetas: Vec<f64>) -> Result<Self> {
        for (i, &t) in thetas.iter().enumerate() {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidParameter(format!("pulse time {t} is outside (0, 1)")));
            }
            if i > 0 && t <= thetas[i - 1] {
                return Err(Error::InvalidParameter("pulse times must be strictly increasing".into()));
            }
        }
        Ok(Self { thetas })
    }

    pub fn fid() -> Self {
        Self { thetas: Vec::new() }
    }

    pub fn hahn() -> Self {
        Self { thetas: vec![0.5] }
    }

    /// Equally spaced CPMG train, `θ_ℓ = (ℓ - 1/2) / K`.
    pub fn cpmg(k: usize) -> Self {
        Self { thetas: (1..=k).map(|l| (l as f64 - 0.5) / k as f64).collect() }
    }

    /// Uhrig sequence, `θ_ℓ = sin²(πℓ / (2K + 2))`.
    pub fn udd(k: usize) -> Self {
        Self { thetas: (1..=k).map(|l| (PI * l as f64 / (2 * k + 2) as f64).sin().powi(2)).collect() }
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn num_pulses(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_fid(&self) -> bool {
        self.thetas.is_empty()
    }

    /// Control points `τ_k = (0, θ_1, …, θ_K, 1)` with weights
    /// `c_k = (-1, 2, -2, …, (-1)^K)` such that `i x F̃(x) = Σ c_k e^{ixτ_k}`.
    fn control_points(&self) -> (Vec<f64>, Vec<f64>) {
        let k = self.thetas.len();
        let mut tau = Vec::with_capacity(k + 2);
        let mut c = Vec::with_capacity(k + 2);
        tau.push(0.0);
        c.push(-1.0);
        for (l, &t) in self.thetas.iter().enumerate() {
            tau.push(t);
            c.push(if l % 2 == 0 { 2.0 } else { -2.0 });
        }
        tau.push(1.0);
        c.push(if k % 2 == 0 { 1.0 } else { -1.0 });
        (tau, c)
    }

    /// `F̃(0) = ∫ y(τ) dτ`; zero for DC-free sequences.
    pub fn dc_weight(&self) -> f64 {
        self.intervals().map(|(a, b, s)| s * (b - a)).sum()
    }

    pub fn is_balanced(&self) -> bool {
        self.dc_weight().abs() < BALANCE_TOL
    }

    /// `(start, end, sign)` for each constant stretch of the toggling function.
    fn intervals(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let k = self.thetas.len();
        (0..=k).map(move |l| {
            let a = if l == 0 { 0.0 } else { self.thetas[l - 1] };
            let b = if l == k { 1.0 } else { self.thetas[l] };
            (a, b, if l % 2 == 0 { 1.0 } else { -1.0 })
        })
    }

    /// Dimensionless filter `F̃(x)`, summed interval by interval as
    /// `e^{ix(a+b)/2} (b-a) sinc(x(b-a)/2)`, which stays accurate near `x = 0`.
    pub fn unit_filter(&self, x: f64) -> C64 {
        self.intervals()
            .map(|(a, b, s)| {
                let w = b - a;
                let h = 0.5 * x * w;
                let sinc = if h.abs() < 1e-4 { 1.0 - h * h / 6.0 } else { h.sin() / h };
                C64::from_polar(s * w * sinc, 0.5 * x * (a + b))
            })
            .sum()
    }

    /// `|F̃(x)|²`.
    pub fn unit_filter_power(&self, x: f64) -> f64 {
        self.unit_filter(x).norm_sqr()
    }

    fn min_exponent_error(&self, p: f64) -> Error {
        Error::UnsupportedExponent { p, pulses: self.thetas.len() }
    }

    /// Checks the exponent window: `(-1, 1)` for sequences with DC weight,
    /// `(-1, 3)` for DC-free ones.
    pub fn check_exponent(&self, p: f64) -> Result<()> {
        let upper = if self.is_balanced() { 3.0 } else { 1.0 };
        if !(p.is_finite() && p > -1.0 && p < upper) {
            if !self.is_balanced() && p == 1.0 {
                return Err(Error::Pole(p));
            }
            return Err(self.min_exponent_error(p));
        }
        Ok(())
    }
}

impl fmt::Display for PulseSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.thetas.iter().map(|t| format!("{t:?}")).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for PulseSequence {
    type Err = Error;

    /// Accepts `fid`, `hahn`, `cpmg:K`, `udd:K` or a comma list of fractions.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let count = |rest: &str| {
            rest.parse::<usize>().map_err(|e| Error::Parse(format!("bad pulse count {rest:?}: {e}")))
        };
        match s {
            "" | "fid" => return Ok(Self::fid()),
            "hahn" => return Ok(Self::hahn()),
            _ => {}
        }
        if let Some(rest) = s.strip_prefix("cpmg:") {
            return Ok(Self::cpmg(count(rest)?));
        }
        if let Some(rest) = s.strip_prefix("udd:") {
            return Ok(Self::udd(count(rest)?));
        }
        let thetas = s
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Parse(format!("bad pulse time {t:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(thetas)
    }
}

/// How the spectrum behaves below the low-frequency cutoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffShape {
    /// `S(ω) = ξ ω_cut^{-p}` for `|ω| < ω_cut`.
    #[default]
    FlattenBelow,
    /// `S(ω) = 0` for `|ω| < ω_cut`.
    HardZero,
}

/// Temporal noise spectrum `S(ω) = ξ |ω|^{-p} c₁(|ω| / ω_cut)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    pub p: f64,
    pub xi: f64,
    pub omega_cut: f64,
    pub cutoff_shape: CutoffShape,
}

impl SpectralModel {
    pub fn new(p: f64, xi: f64, omega_cut: f64, cutoff_shape: CutoffShape) -> Result<Self> {
        let m = Self { p, xi, omega_cut, cutoff_shape };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > -1.0 && self.p < 3.0) {
            return Err(Error::InvalidParameter(format!("spectral exponent must be in (-1, 3), got {}", self.p)));
        }
        if !(self.xi.is_finite() && self.xi > 0.0) {
            return Err(Error::InvalidParameter(format!("xi must be > 0, got {}", self.xi)));
        }
        if !(self.omega_cut.is_finite() && self.omega_cut > 0.0) {
            return Err(Error::InvalidParameter(format!("omega_cut must be > 0, got {}", self.omega_cut)));
        }
        Ok(())
    }

    /// `S(ω)`.
    pub fn spectrum(&self, omega: f64) -> f64 {
        let w = omega.abs();
        if w >= self.omega_cut {
            self.xi * w.powf(-self.p)
        } else {
            match self.cutoff_shape {
                CutoffShape::FlattenBelow => self.xi * self.omega_cut.powf(-self.p),
                CutoffShape::HardZero => 0.0,
            }
        }
    }
}

/// Coefficient `C` in `ζ(t_s) = ξ t_s^{1+p} C` for a pulse sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DephasingCoefficient {
    pub value: f64,
    pub sequence: PulseSequence,
    pub p: f64,
}

/// `F[ω]` at shot time `t_s`.
pub fn filter_function(pulses: &PulseSequence, t_s: f64, omega: f64) -> C64 {
    pulses.unit_filter(omega * t_s) * t_s
}

/// Bracket `B(p) = -Σ_{k<k'} c_k c_k' |τ_k - τ_k'|^{1+p}`.
fn bracket(tau: &[f64], c: &[f64], p: f64) -> f64 {
    let mut acc = 0.0;
    for k in 0..tau.len() {
        for kp in k + 1..tau.len() {
            acc -= c[k] * c[kp] * (tau[kp] - tau[k]).abs().powf(1.0 + p);
        }
    }
    acc
}

/// `B(p) / (p - 1)` near `p = 1` for DC-free sequences, where `B(1) = 0`:
/// `-Σ c c' Δ² Σ_{n≥1} ε^{n-1} (ln Δ)^n / n!` with four terms.
fn bracket_over_eps(tau: &[f64], c: &[f64], eps: f64) -> f64 {
    let mut acc = 0.0;
    for k in 0..tau.len() {
        for kp in k + 1..tau.len() {
            let d = (tau[kp] - tau[k]).abs();
            let l = d.ln();
            let series = l * (1.0 + eps * l / 2.0 * (1.0 + eps * l / 3.0 * (1.0 + eps * l / 4.0)));
            acc -= c[k] * c[kp] * d * d * series;
        }
    }
    acc
}

fn coefficient_direct(tau: &[f64], c: &[f64], p: f64) -> f64 {
    bracket(tau, c, p) / (2.0 * (0.5 * PI * p).cos() * gamma(2.0 + p))
}

fn coefficient_series(tau: &[f64], c: &[f64], p: f64) -> f64 {
    // cos(pπ/2) = -sin(πε/2) and ε / sin(πε/2) = (2/π)(1 + u²/6 + 7u⁴/360)
    let eps = p - 1.0;
    let u = 0.5 * PI * eps;
    let ratio = 2.0 / PI * (1.0 + u * u / 6.0 + 7.0 * u.powi(4) / 360.0);
    -bracket_over_eps(tau, c, eps) * ratio / (2.0 * gamma(2.0 + p))
}

/// Closed-form `C(p) = B(p) / (2 cos(pπ/2) Γ(2+p))`, with the removable
/// singularity at `p = 1` of DC-free sequences evaluated by series.
pub fn coefficient_closed_form(pulses: &PulseSequence, p: f64) -> Result<DephasingCoefficient> {
    pulses.check_exponent(p)?;
    let (tau, c) = pulses.control_points();
    let value = if (p - 1.0).abs() < SERIES_RADIUS {
        coefficient_series(&tau, &c, p)
    } else {
        coefficient_direct(&tau, &c, p)
    };
    if !value.is_finite() {
        return Err(Error::Pole(p));
    }
    Ok(DephasingCoefficient { value, sequence: pulses.clone(), p })
}

/// Flag raised when the shot is long enough for the cutoff to matter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffRegimeWarning {
    pub omega_cut_t: f64,
}

impl fmt::Display for CutoffRegimeWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "omega_cut * t_s = {:e} >= {CUTOFF_WARN_THRESHOLD}; the power-law closed form ignores the cutoff",
            self.omega_cut_t
        )
    }
}

/// Decay exponent together with an optional cutoff-regime flag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Zeta {
    pub value: f64,
    pub warning: Option<CutoffRegimeWarning>,
}

/// `ζ(t_s) = ξ t_s^{1+p} C`.
pub fn zeta_closed_form(spec: &SpectralModel, pulses: &PulseSequence, t_s: f64) -> Result<Zeta> {
    spec.validate()?;
    if !(t_s.is_finite() && t_s >= 0.0) {
        return Err(Error::InvalidParameter(format!("shot time must be >= 0, got {t_s}")));
    }
    let c = coefficient_closed_form(pulses, spec.p)?;
    if t_s == 0.0 {
        return Ok(Zeta { value: 0.0, warning: None });
    }
    let omega_cut_t = spec.omega_cut * t_s;
    let warning = (omega_cut_t >= CUTOFF_WARN_THRESHOLD).then(|| {
        let w = CutoffRegimeWarning { omega_cut_t };
        log::warn!("{w}");
        w
    });
    Ok(Zeta { value: spec.xi * t_s.powf(1.0 + spec.p) * c.value, warning })
}

/// Upper edge of the dense panel region in `x = ω t_s`.
const DENSE_LIMIT: f64 = 2.0 * PI * 64.0;
/// Upper limit of the tail doubling before giving up.
const TAIL_LIMIT: f64 = DENSE_LIMIT * 4096.0;

/// `∫₀^∞ |F̃(x)|² x^{-p} c₁(x / x_c) dx`. A zero `x_c` means no cutoff.
fn weighted_filter_integral(pulses: &PulseSequence, p: f64, x_c: f64, shape: CutoffShape) -> Result<f64> {
    // the integrals are O(0.1..10); the absolute floor stops bisection of
    // negligible panels near the cutoff and far in the tail
    let tol = Tolerance { abs: 1e-17, rel: 1e-11, max_depth: 40 };
    let body = |x: f64| pulses.unit_filter_power(x) * x.powf(-p);

    let mut total = Estimate::default();
    let mut start = x_c;
    if x_c > 0.0 {
        if shape == CutoffShape::FlattenBelow {
            let flat = |x: f64| pulses.unit_filter_power(x);
            total = total + integrate(&flat, 0.0, x_c, tol)? * x_c.powf(-p);
        }
    } else {
        // no cutoff: the integrand is integrable at zero inside the window
        let first = 1.0_f64;
        total = total + integrate(&body, 0.0, first, tol)?;
        start = first;
    }

    let mut edges = vec![start];
    let mut e = start;
    while e < 1.0 {
        e = (2.0 * e).min(1.0);
        edges.push(e);
    }
    while e < DENSE_LIMIT {
        e += PI;
        edges.push(e);
    }
    total = total + integrate_panels(&body, &edges, tol)?;

    // Beyond the dense region: the mean of |F̃|² is Σ c_k² / x² = (4K + 2) / x²,
    // whose tail is integrated exactly; the oscillating remainder is
    // accumulated over doubling chunks.
    let mean = (4 * pulses.num_pulses() + 2) as f64;
    let x_t = e;
    let mean_tail = mean * x_t.powf(-1.0 - p) / (1.0 + p);
    let oscill = |x: f64| (pulses.unit_filter_power(x) - mean / (x * x)) * x.powf(-p);
    let mut lo = x_t;
    let mut tail = 0.0;
    loop {
        let hi = 2.0 * lo;
        let n_panels = ((hi - lo) / PI).ceil() as usize;
        let width = (hi - lo) / n_panels as f64;
        let mut chunk = 0.0;
        for i in 0..n_panels {
            let a = lo + i as f64 * width;
            chunk += integrate(&oscill, a, a + width, tol)?.value;
        }
        tail += chunk;
        let scale = (total.value + mean_tail + tail).abs();
        if chunk.abs() < 1e-9 * scale {
            break;
        }
        if hi >= TAIL_LIMIT {
            if chunk.abs() < 1e-7 * scale {
                break;
            }
            return Err(Error::QuadratureNonConvergence(format!(
                "oscillatory tail chunk {chunk:e} at x = {hi:e} relative to total {scale:e}"
            )));
        }
        lo = hi;
    }
    Ok(total.value + mean_tail + tail)
}

/// `ζ(t_s) = (1/4π) ∫ |F[ω]|² S(ω) dω` by quadrature.
pub fn zeta_quadrature(spec: &SpectralModel, pulses: &PulseSequence, t_s: f64) -> Result<f64> {
    spec.validate()?;
    if !(t_s.is_finite() && t_s > 0.0) {
        return Err(Error::InvalidParameter(format!("shot time must be > 0, got {t_s}")));
    }
    let x_c = spec.omega_cut * t_s;
    let integral = weighted_filter_integral(pulses, spec.p, x_c, spec.cutoff_shape)?;
    Ok((spec.xi * t_s.powf(1.0 + spec.p) / (2.0 * PI) * integral).max(0.0))
}

/// `(1/2π) ∫_{-∞}^{∞} |F[ω]|² dω`, which equals `t_s` for every sequence.
pub fn filter_power_integral(pulses: &PulseSequence, t_s: f64) -> Result<f64> {
    Ok(t_s / PI * weighted_filter_integral(pulses, 0.0, 0.0, CutoffShape::FlattenBelow)?)
}

/// `g(y) = y^{(1+2p)/(1+p)} / (e^{2y} - 1)`.
pub fn g_of_y(y: f64, p: f64) -> f64 {
    let e = (1.0 + 2.0 * p) / (1.0 + p);
    if y == 0.0 {
        return if p == 0.0 {
            0.5
        } else if e > 1.0 {
            0.0
        } else {
            f64::INFINITY
        };
    }
    y.powf(e) / (2.0 * y).exp_m1()
}

/// Maximizer of the per-time single-qubit information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotTimeOptimum {
    /// `ξ t_opt^{1+p} C`.
    pub y0: f64,
    pub t_opt: f64,
    /// Maximum of `ℱ_Q(t_s) / t_s`.
    pub max_rate: f64,
}

/// Maximizes `ℱ_Q(t_s)/t_s` over the shot time. At `p = 0` this is the
/// fast-reset limit `y0 = t_opt = 0`, `max_rate = C/(2ξ)`.
pub fn optimize_shot_time(
    spec: &SpectralModel,
    pulses: &PulseSequence,
    coefficient: &DephasingCoefficient,
) -> Result<ShotTimeOptimum> {
    spec.validate()?;
    let p = spec.p;
    if coefficient.p != p || &coefficient.sequence != pulses {
        return Err(Error::InvalidParameter("coefficient does not belong to this sequence and exponent".into()));
    }
    if p < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "the rate has no interior maximum for p = {p} < 0"
        )));
    }
    let c = coefficient.value;
    let xi = spec.xi;
    let (y0, g0) = if p == 0.0 {
        (0.0, 0.5)
    } else {
        let ext = golden::maximize(|y| g_of_y(y, p), 0.0, 5.0, 1e-10);
        (ext.x, ext.value)
    };
    let t_opt = (y0 / (xi * c)).powf(1.0 / (1.0 + p));
    let max_rate = xi.powf(-(1.0 + 2.0 * p) / (1.0 + p)) * c.powf(1.0 / (1.0 + p)) * g0;
    Ok(ShotTimeOptimum { y0, t_opt, max_rate })
}

/// Single-qubit QFI about ξ per shot:
/// `(t_s^{1+p} C)² / (e^{2ξ t_s^{1+p} C} - 1)`.
pub fn single_qubit_qfi(spec: &SpectralModel, pulses: &PulseSequence, t_s: f64) -> Result<f64> {
    spec.validate()?;
    if !(t_s.is_finite() && t_s >= 0.0) {
        return Err(Error::InvalidParameter(format!("shot time must be >= 0, got {t_s}")));
    }
    let c = coefficient_closed_form(pulses, spec.p)?.value;
    if t_s == 0.0 {
        return Ok(0.0);
    }
    let u = t_s.powf(1.0 + spec.p) * c;
    Ok(u * u / (2.0 * spec.xi * u).exp_m1())
}

/// CSV table with columns `K,thetas,p,C`; pulse times are `;`-separated.
pub fn coefficient_table_csv(rows: &[DephasingCoefficient]) -> String {
    let mut out = String::from("K,thetas,p,C\n");
    for r in rows {
        let thetas: Vec<String> = r.sequence.thetas().iter().map(|&t| sig12(t)).collect();
        out.push_str(&format!("{},{},{},{}\n", r.sequence.num_pulses(), thetas.join(";"), sig12(r.p), sig12(r.value)));
    }
    out
}

/// Parses a table written by [`coefficient_table_csv`].
pub fn coefficient_table_from_csv(text: &str) -> Result<Vec<DephasingCoefficient>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse(format!("line {}: expected 4 fields", i + 1)));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)));
        let thetas = if fields[1].trim().is_empty() {
            Vec::new()
        } else {
            fields[1].split(';').map(num).collect::<Result<Vec<_>>>()?
        };
        let sequence = PulseSequence::new(thetas)?;
        if sequence.num_pulses().to_string() != fields[0].trim() {
            return Err(Error::Parse(format!("line {}: pulse count does not match", i + 1)));
        }
        rows.push(DephasingCoefficient { sequence, p: num(fields[2])?, value: num(fields[3])? });
    }
    Ok(rows)
}
