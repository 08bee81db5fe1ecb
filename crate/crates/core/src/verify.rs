//! Oracle-versus-closed-form batteries. Each suite returns one line per
//! check; with equal seeds the report is bit-identical for any worker count.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::dynamics::{evolve_markovian, evolve_markovian_dxi, evolve_spatiotemporal, PureState, QubitRegisterState};
use crate::linalg::max_abs_diff;
use crate::mc::{
    fidelity_qfi, grid_phase_variance, increment_covariance_check, lindblad_integrate, sample_colored_single,
    sample_colored_spatial, sample_white_correlated, stretched_exponent, trajectory_rng, FrequencyGrid,
};
use crate::noise_model::{build_dephasing_matrix, DephasingMatrix, PowerLawSpatialModel};
use crate::pulse_filter::{
    coefficient_closed_form, coefficient_table_from_csv, filter_power_integral, zeta_closed_form, zeta_quadrature,
    CutoffShape, PulseSequence, SpectralModel,
};
use crate::qfi::{fq_short_time, qfi_sld, richardson_limit};
use crate::{Error, Result, C64};

/// Quadrature-generated coefficient table (see `examples/coefficient_table.rs`).
pub const GOLDEN_COEFFICIENTS: &str = include_str!("../data/coefficients.csv");

pub const SIGMA_BAND: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Lindblad,
    McWhite,
    McColored,
    QfiOracle,
    Filter,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Lindblad, Suite::McWhite, Suite::McColored, Suite::QfiOracle, Suite::Filter];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Lindblad => "lindblad",
            Suite::McWhite => "mc-white",
            Suite::McColored => "mc-colored",
            Suite::QfiOracle => "qfi-oracle",
            Suite::Filter => "filter",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .iter()
            .copied()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown suite {s:?}")))
    }
}

/// One comparison: `metric` (an error or a z-score) must not exceed `limit`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub target: f64,
    pub metric: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, target: f64, metric: f64, limit: f64) -> Self {
        Self { name: name.into(), value, target, metric, limit, pass: metric <= limit }
    }

    pub fn relative(name: impl Into<String>, value: f64, target: f64, limit: f64) -> Self {
        Self::new(name, value, target, (value - target).abs() / target.abs(), limit)
    }

    pub fn absolute(name: impl Into<String>, value: f64, target: f64, limit: f64) -> Self {
        Self::new(name, value, target, (value - target).abs(), limit)
    }

    /// `|value - target| / stderr` against the 3σ band.
    pub fn sigma(name: impl Into<String>, value: f64, stderr: f64, target: f64) -> Self {
        Self::new(name, value, target, (value - target).abs() / stderr, SIGMA_BAND)
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} value={:?} target={:?} metric={:?} limit={:?}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.target,
            self.metric,
            self.limit
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn find<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a Check> + 'a {
        self.checks.iter().filter(move |c| c.name.starts_with(prefix))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&c.to_string());
            out.push('\n');
        }
        out
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::Lindblad => lindblad_suite(seed)?,
        Suite::McWhite => mc_white_suite(seed)?,
        Suite::McColored => mc_colored_suite(seed)?,
        Suite::QfiOracle => qfi_oracle_suite(seed)?,
        Suite::Filter => filter_suite(seed)?,
    };
    Ok(SuiteReport { suite, seed, checks })
}

/// Random PSD matrix `gᵀg` with entries of g uniform in `(-1, 1)`.
pub fn random_psd<R: Rng>(n: usize, gamma: f64, rng: &mut R) -> Result<DephasingMatrix> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    DephasingMatrix::from_entries(g.transpose() * g, gamma)
}

fn example3() -> Result<DephasingMatrix> {
    build_dephasing_matrix(&PowerLawSpatialModel::new(3, 1.0, 1.0)?, 1.0)
}

fn single(v: f64) -> Result<DephasingMatrix> {
    DephasingMatrix::from_entries(DMatrix::from_element(1, 1, v), 1.0)
}

/// Largest step the integrator accepts for `a`.
fn max_dt(a: &DephasingMatrix) -> f64 {
    crate::mc::MAX_STEP_RATE / (a.gamma() * a.max_eigenvalue())
}

pub const LINDBLAD_CASES: usize = 50;

fn lindblad_suite(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for case in 0..LINDBLAD_CASES {
        let mut rng = trajectory_rng(seed, case);
        let n = rng.random_range(1..=4);
        let a = random_psd(n, 1.0, &mut rng)?;
        let rho = PureState::random(n, &mut rng)?.density_matrix();
        let t = rng.random_range(0.0..3.0);
        let num = lindblad_integrate(&rho, &a, t, max_dt(&a))?;
        let exact = evolve_markovian(&rho, &a, t)?;
        let err = max_abs_diff(num.matrix(), exact.matrix());
        checks.push(Check::new(format!("random-case-{case:02}-n{n}"), err, 0.0, err, 1e-7));
    }
    let plus = PureState::plus_product(1)?.density_matrix();
    let a = single(2.0)?;
    let num = lindblad_integrate(&plus, &a, 1.0, 1e-4)?.matrix()[(0, 1)].re;
    checks.push(Check::absolute("n1-plus-coherence", num, 0.5 * (-0.5f64).exp(), 1e-8));
    let a = example3()?;
    let ghz = PureState::ghz(3)?.density_matrix();
    let t = 0.4;
    let num = lindblad_integrate(&ghz, &a, t, max_dt(&a))?.matrix()[(0, 7)].re;
    let rate = -(2.0 * num).ln() / t;
    checks.push(Check::absolute("n3-ghz-decay-rate", rate, 11.0 / 4.0, 1e-7));
    let trace = lindblad_integrate(&ghz, &a, 3.0, max_dt(&a))?.matrix().trace().re;
    checks.push(Check::absolute("trace-preserved", trace, 1.0, 1e-10));
    Ok(checks)
}

pub const WHITE_TRAJECTORIES: usize = 100_000;

fn mc_white_suite(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let a3 = example3()?;
    let z = increment_covariance_check(&a3, 1e-3, WHITE_TRAJECTORIES, seed)?;
    checks.push(Check::new("increment-covariance-max-z", z, 0.0, z, 5.0));

    let plus = PureState::plus_product(1)?.density_matrix();
    let a1 = single(2.0)?;
    let ens = sample_white_correlated(&plus, &a1, 1.0, max_dt(&a1), WHITE_TRAJECTORIES, seed, &[(0, 1)])?;
    let est = ens.re(0, 1).expect("requested element");
    checks.push(Check::sigma("n1-plus-coherence", est.mean, est.stderr, 0.5 * (-0.5f64).exp()));

    let ghz = PureState::ghz(3)?.density_matrix();
    let t = 0.3;
    let ens = sample_white_correlated(&ghz, &a3, t, max_dt(&a3), WHITE_TRAJECTORIES, seed ^ 1, &[(0, 7)])?;
    let est = ens.re(0, 7).expect("requested element");
    checks.push(Check::sigma("n3-ghz-extreme-coherence", est.mean, est.stderr, 0.5 * (-t * 11.0 / 4.0).exp()));
    Ok(checks)
}

pub const COLORED_TRAJECTORIES: usize = 20_000;
pub const STRETCH_TRAJECTORIES: usize = 50_000;
const OMEGA_CUT: f64 = 1e-6;

fn spectral(p: f64, xi: f64) -> Result<SpectralModel> {
    SpectralModel::new(p, xi, OMEGA_CUT, CutoffShape::FlattenBelow)
}

fn mc_colored_suite(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let hahn = PulseSequence::hahn();
    for (i, &p) in [0.5, 1.0].iter().enumerate() {
        let c = coefficient_closed_form(&hahn, p)?.value;
        // ζ(1) = 0.5
        let spec = spectral(p, 0.5 / c)?;
        let grid = FrequencyGrid::standard(&spec, 1.0)?;
        let implied = 0.5 * grid_phase_variance(&spec, &hahn, 1.0, &grid);
        checks.push(Check::relative(format!("grid-zeta-hahn-p{p}"), implied, 0.5, 5e-3));

        let ens = sample_colored_single(&spec, &hahn, 1.0, &grid, COLORED_TRAJECTORIES, seed.wrapping_add(i as u64))?;
        let est = ens.re(0, 1).expect("requested element");
        checks.push(Check::sigma(format!("hahn-p{p}-coherence"), est.mean, est.stderr, 0.5 * (-0.5f64).exp()));

        // ζ from 0.15 to 1.5 over six geometric points
        let mut samples = Vec::new();
        for k in 0..6 {
            let zeta = 0.15 * 10f64.powf(k as f64 / 5.0);
            let t = (zeta / (spec.xi * c)).powf(1.0 / (1.0 + p));
            let grid = FrequencyGrid::standard(&spec, t)?;
            let ens = sample_colored_single(&spec, &hahn, t, &grid, STRETCH_TRAJECTORIES, seed.wrapping_add(100 + 10 * i as u64 + k))?;
            samples.push((t, ens.re(0, 1).expect("requested element").mean));
        }
        let slope = stretched_exponent(&samples)?;
        checks.push(Check::absolute(format!("hahn-p{p}-stretch-exponent"), slope, 1.0 + p, 0.05));
    }

    let fid = PulseSequence::fid();
    let white = spectral(0.0, 1.0)?;
    let grid = FrequencyGrid::standard(&white, 1.0)?;
    let ens = sample_colored_single(&white, &fid, 1.0, &grid, COLORED_TRAJECTORIES, seed.wrapping_add(7))?;
    let est = ens.re(0, 1).expect("requested element");
    checks.push(Check::sigma("fid-p0-white-limit", est.mean, est.stderr, 0.5 * (-0.5f64).exp()));

    // two correlated qubits, GHZ exponent near 1
    let a2 = build_dephasing_matrix(&PowerLawSpatialModel::new(2, 1.0, 1.0)?, 1.0)?;
    let c = coefficient_closed_form(&hahn, 0.5)?.value;
    let spec = spectral(0.5, 1.0 / (a2.total_sum() * c))?;
    let grid = FrequencyGrid::standard(&spec, 1.0)?;
    let ghz2 = PureState::ghz(2)?.density_matrix();
    for (label, a, offset) in [("n2-ghz-correlated", a2.clone(), 11u64), ("n2-ghz-uncorrelated", a2.diagonal_part(), 12)] {
        let ens = sample_colored_spatial(&ghz2, &a, &spec, &hahn, 1.0, &grid, COLORED_TRAJECTORIES, seed.wrapping_add(offset), &[(0, 3)])?;
        let est = ens.re(0, 3).expect("requested element");
        let exact = evolve_spatiotemporal(&ghz2, &a, &spec, &hahn, 1.0)?.matrix()[(0, 3)].re;
        checks.push(Check::sigma(label, est.mean, est.stderr, exact));
    }
    // uncorrelated GHZ decay is the product of single-qubit decays
    let single_decay = (-spec.xi * c * a2.entries()[(0, 0)]).exp();
    let factorized = 0.5 * single_decay * single_decay;
    let exact = evolve_spatiotemporal(&ghz2, &a2.diagonal_part(), &spec, &hahn, 1.0)?.matrix()[(0, 3)].re;
    checks.push(Check::relative("n2-uncorrelated-factorizes", exact, factorized, 1e-12));

    // white noise two ways: colored p = 0 with ξ̃ = 1/2 against the white sampler at γ = 1
    let a3 = example3()?;
    let ghz3 = PureState::ghz(3)?.density_matrix();
    let t = 0.3;
    let spec0 = spectral(0.0, 0.5)?;
    let grid = FrequencyGrid::standard(&spec0, t)?;
    let colored = sample_colored_spatial(&ghz3, &a3, &spec0, &fid, t, &grid, COLORED_TRAJECTORIES, seed.wrapping_add(13), &[(0, 7)])?;
    let white = sample_white_correlated(&ghz3, &a3, t, max_dt(&a3), COLORED_TRAJECTORIES, seed.wrapping_add(14), &[(0, 7)])?;
    let (c_est, w_est) = (colored.re(0, 7).expect("element"), white.re(0, 7).expect("element"));
    let combined = (c_est.stderr.powi(2) + w_est.stderr.powi(2)).sqrt();
    checks.push(Check::new(
        "n3-colored-p0-vs-white",
        c_est.mean,
        w_est.mean,
        (c_est.mean - w_est.mean).abs() / combined,
        SIGMA_BAND,
    ));
    Ok(checks)
}

/// `ℱ_Q(ρ(dt))/dt` with the analytic ξ-derivative.
fn qfi_rate_at(rho0: &QubitRegisterState, a: &DephasingMatrix, xi: f64, dt: f64) -> Result<f64> {
    let rho = evolve_markovian(rho0, a, dt)?;
    let d = evolve_markovian_dxi(rho0, a, xi, dt)?;
    Ok(qfi_sld(rho.matrix(), &d)?.value / dt)
}

/// Richardson limit of `ℱ_Q(ρ(dt))/dt` from `dt ∈ {1e-3, 1e-4}`.
pub fn short_time_limit(psi: &PureState, a: &DephasingMatrix, xi: f64) -> Result<f64> {
    let rho0 = psi.density_matrix();
    let (h1, h2) = (1e-3, 1e-4);
    Ok(richardson_limit(h1, qfi_rate_at(&rho0, a, xi, h1)?, h2, qfi_rate_at(&rho0, a, xi, h2)?))
}

pub const QFI_ORACLE_CASES: usize = 20;

fn qfi_oracle_suite(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for case in 0..QFI_ORACLE_CASES {
        let mut rng = trajectory_rng(seed, case);
        let n = 1 + case % 3;
        let alpha = rng.random_range(0.3..2.0);
        let xi = rng.random_range(0.5..2.0);
        let a = build_dephasing_matrix(&PowerLawSpatialModel::new(n, alpha, xi)?, 1.0)?;
        let rho0 = PureState::random(n, &mut rng)?.density_matrix();
        let t = rng.random_range(0.1..1.5);
        let d = 1e-4 * xi;
        let at = |x: f64| -> Result<DMatrix<C64>> { Ok(evolve_markovian(&rho0, &a.scaled(x / xi), t)?.into_matrix()) };
        let fd = fidelity_qfi(&at(xi - d)?, &at(xi + d)?, d)?.value;
        let rho = evolve_markovian(&rho0, &a, t)?;
        let sld = qfi_sld(rho.matrix(), &evolve_markovian_dxi(&rho0, &a, xi, t)?)?.value;
        checks.push(Check::relative(format!("fidelity-vs-sld-{case:02}-n{n}"), fd, sld, 1e-4));
    }
    for n in 2..=4 {
        let a = build_dephasing_matrix(&PowerLawSpatialModel::new(n, 1.0, 1.0)?, 1.0)?;
        for (label, psi) in [("ghz", PureState::ghz(n)?), ("product", PureState::plus_product(n)?)] {
            let lim = short_time_limit(&psi, &a, 1.0)?;
            let fq = fq_short_time(&psi, &a, 1.0)?;
            checks.push(Check::relative(format!("short-time-limit-{label}-n{n}"), lim, fq, 1e-3));
        }
    }
    Ok(checks)
}

pub const SUM_RULE_CASES: usize = 10;

/// Random sequence with `K ≤ 6` pulses spaced at least `1e-3` apart.
pub fn random_sequence<R: Rng>(rng: &mut R) -> Result<PulseSequence> {
    loop {
        let k = rng.random_range(0..=6);
        let mut t: Vec<f64> = (0..k).map(|_| rng.random_range(0.001..0.999)).collect();
        t.sort_by(f64::total_cmp);
        if t.windows(2).all(|w| w[1] - w[0] >= 1e-3) {
            return PulseSequence::new(t);
        }
    }
}

fn filter_suite(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for row in coefficient_table_from_csv(GOLDEN_COEFFICIENTS)? {
        let c = coefficient_closed_form(&row.sequence, row.p)?.value;
        checks.push(Check::relative(format!("golden-k{}-[{}]-p{}", row.sequence.num_pulses(), row.sequence, row.p), c, row.value, 1e-9));
    }
    let fid = PulseSequence::fid();
    let hahn = PulseSequence::hahn();
    let cpmg = PulseSequence::cpmg(2);
    checks.push(Check::absolute("c-fid-p0", coefficient_closed_form(&fid, 0.0)?.value, 0.5, 1e-9));
    checks.push(Check::absolute("c-fid-p-to-0", coefficient_closed_form(&fid, 1e-9)?.value, 0.5, 1e-9));
    checks.push(Check::absolute(
        "c-hahn-p1",
        coefficient_closed_form(&hahn, 1.0)?.value,
        2f64.ln() / (2.0 * std::f64::consts::PI),
        1e-9,
    ));
    checks.push(Check::absolute("c-hahn-p2", coefficient_closed_form(&hahn, 2.0)?.value, 1.0 / 24.0, 1e-9));
    for (label, seq) in [("hahn", &hahn), ("cpmg2", &cpmg)] {
        for &p in &[0.5, 1.0, 2.0] {
            let spec = spectral(p, 1.0)?;
            let q = zeta_quadrature(&spec, seq, 1.0)?;
            let c = zeta_closed_form(&spec, seq, 1.0)?.value;
            checks.push(Check::relative(format!("zeta-quadrature-{label}-p{p}"), q, c, 1e-3));
        }
    }
    for case in 0..SUM_RULE_CASES {
        let mut rng = trajectory_rng(seed, case);
        let seq = random_sequence(&mut rng)?;
        let t_s = rng.random_range(0.2..5.0);
        let v = filter_power_integral(&seq, t_s)?;
        checks.push(Check::relative(format!("sum-rule-{case:02}-k{}", seq.num_pulses()), v, t_s, 1e-6));
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn check_formatting() {
        let c = Check::relative("x", 1.0, 1.0, 1e-9);
        assert!(c.pass);
        assert_eq!(c.to_string(), "PASS x value=1.0 target=1.0 metric=0.0 limit=1e-9");
        assert!(!Check::sigma("y", 1.0, 0.1, 0.0).pass);
    }

    #[test]
    fn golden_table_parses() {
        let rows = coefficient_table_from_csv(GOLDEN_COEFFICIENTS).unwrap();
        assert!(rows.len() >= 10);
    }

    #[test]
    fn filter_suite_passes() {
        let r = run_suite(Suite::Filter, 7).unwrap();
        assert!(r.all_pass(), "{}", r.to_text());
    }
}
