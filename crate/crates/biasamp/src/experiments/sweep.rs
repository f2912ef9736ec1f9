use rayon::prelude::*;

use super::config::{ResolvedConfig, Scenario};
use crate::error::{Error, Result};
use crate::fixed_point::SolverSettings;
use crate::risk::{
    classical_joint_risk, classical_separate_risk, metrics, rp_joint_risk, rp_separate_risk, BiasAmpMetrics, Family,
    RiskDecomposition,
};
use crate::simulator::{derive_seed, monte_carlo, McConfig, McMode, MonteCarloReport};
use crate::spectral::{Group, JointSpectrum, NoiseAndRegularization, ScalingRegime};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryPoint {
    pub r1_joint: RiskDecomposition,
    pub r2_joint: RiskDecomposition,
    pub r1_sep: RiskDecomposition,
    pub r2_sep: RiskDecomposition,
    pub metrics: BiasAmpMetrics,
}

impl TheoryPoint {
    /// Worst residual and total iterations over the four solves.
    pub fn solve_summary(&self) -> (f64, usize) {
        let all = [self.r1_joint, self.r2_joint, self.r1_sep, self.r2_sep];
        let residual = all.iter().map(|r| r.info.residual).fold(0.0, f64::max);
        (residual, all.iter().map(|r| r.info.iters).sum())
    }
}

/// The four risks and the metrics for one family at one set of rates.
pub fn theory_point(
    family: Family,
    spectrum: &JointSpectrum,
    regime: &ScalingRegime,
    noise: &NoiseAndRegularization,
    settings: &SolverSettings,
) -> Result<TheoryPoint> {
    let (one, two) = (Group::One, Group::Two);
    let [r1_joint, r2_joint, r1_sep, r2_sep] = match family {
        Family::RandomProjection => [
            rp_joint_risk(spectrum, regime, noise, one, settings)?,
            rp_joint_risk(spectrum, regime, noise, two, settings)?,
            rp_separate_risk(spectrum, regime, noise, one, settings)?,
            rp_separate_risk(spectrum, regime, noise, two, settings)?,
        ],
        Family::Classical => {
            let sep = |s: Group| {
                classical_separate_risk(spectrum, regime.phi_s(s), noise.lambda_s(s), noise.sigma_sq(s), s, settings)
            };
            [
                classical_joint_risk(spectrum, regime, noise, one, settings)?,
                classical_joint_risk(spectrum, regime, noise, two, settings)?,
                sep(one)?,
                sep(two)?,
            ]
        }
    };
    let metrics = metrics(r1_joint.total, r2_joint.total, r1_sep.total, r2_sep.total)?;
    Ok(TheoryPoint { r1_joint, r2_joint, r1_sep, r2_sep, metrics })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    /// Requested rates.
    pub phi: f64,
    pub psi: f64,
    pub lambda: f64,
    /// σ₂²/σ₁², when defined.
    pub c: Option<f64>,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub n: usize,
    pub d: usize,
    pub m: usize,
    /// d/n and m/n after rounding; theory is evaluated at these.
    pub phi_realized: f64,
    pub psi_realized: f64,
    pub seed: u64,
    pub theory: Option<TheoryPoint>,
    pub empirical: Option<MonteCarloReport>,
    pub residual: Option<f64>,
    pub iters: Option<usize>,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub scenario: Scenario,
    pub family: Family,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn flagged(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| !r.flags.is_empty())
    }
}

#[derive(Clone, Copy, Debug)]
struct GridPoint {
    index: usize,
    phi: f64,
    psi: f64,
    lambda: f64,
    c: Option<f64>,
    sigma2_sq: f64,
}

fn flag_for(stage: &str, e: &Error) -> String {
    let kind = match e {
        Error::NonConvergence { .. } => "nonconvergent",
        Error::Replicate { source, .. } if matches!(**source, Error::NonConvergence { .. }) => "nonconvergent",
        _ => "error",
    };
    format!("{stage} {kind}: {e}")
}

fn run_point(cfg: &ResolvedConfig, settings: &SolverSettings, pt: GridPoint) -> SweepRow {
    let n = cfg.n;
    let d = (pt.phi * n as f64).round() as usize;
    let m = (pt.psi * n as f64).round() as usize;
    let mut row = SweepRow {
        index: pt.index,
        phi: pt.phi,
        psi: pt.psi,
        lambda: pt.lambda,
        c: pt.c,
        sigma1_sq: cfg.sigma1_sq,
        sigma2_sq: pt.sigma2_sq,
        n,
        d,
        m,
        phi_realized: d as f64 / n as f64,
        psi_realized: m as f64 / n as f64,
        seed: derive_seed(cfg.base_seed, pt.index as u64),
        theory: None,
        empirical: None,
        residual: None,
        iters: None,
        flags: Vec::new(),
    };
    if d == 0 || (cfg.family == Family::RandomProjection && m == 0) {
        row.flags.push(format!("size error: d = {d}, m = {m} after rounding at n = {n}"));
        return row;
    }
    let spectrum = match cfg.build_spectrum(d) {
        Ok(s) => s,
        Err(e) => {
            row.flags.push(flag_for("spectrum", &e));
            return row;
        }
    };
    let noise = match NoiseAndRegularization::uniform(cfg.sigma1_sq, pt.sigma2_sq, pt.lambda) {
        Ok(nz) => nz,
        Err(e) => {
            row.flags.push(flag_for("noise", &e));
            return row;
        }
    };
    // Classical models have no projection; keep ψ out of the regime.
    let psi = if cfg.family == Family::Classical { 1.0 } else { row.psi_realized };
    match ScalingRegime::new(cfg.p1, row.phi_realized, psi)
        .and_then(|regime| theory_point(cfg.family, &spectrum, &regime, &noise, settings))
    {
        Ok(t) => {
            let (res, it) = t.solve_summary();
            row.residual = Some(res);
            row.iters = Some(it);
            row.theory = Some(t);
        }
        Err(e) => row.flags.push(flag_for("theory", &e)),
    }
    if cfg.replicates > 0 {
        let mc = McConfig {
            spectrum,
            n,
            p1: cfg.p1,
            noise,
            family: cfg.family,
            m: Some(m),
            mode: McMode::Flat,
        };
        match monte_carlo(&mc, cfg.replicates, row.seed) {
            Ok(rep) => row.empirical = Some(rep),
            Err(e) => row.flags.push(flag_for("monte-carlo", &e)),
        }
    }
    row
}

/// Grid order is φ (outermost), ψ, λ, then the noise axis. Points run in
/// parallel; rows come back in grid order.
pub fn run_sweep(cfg: &ResolvedConfig, settings: &SolverSettings) -> Result<SweepResult> {
    settings.validate()?;
    let mut points = Vec::with_capacity(cfg.grid_len());
    for &phi in &cfg.phi {
        for &psi in &cfg.psi {
            for &lambda in &cfg.lambda {
                for (c, sigma2_sq) in cfg.noise_points() {
                    points.push(GridPoint { index: points.len(), phi, psi, lambda, c, sigma2_sq });
                }
            }
        }
    }
    log::info!("{}: {} grid points, {} replicates each", cfg.scenario.name(), points.len(), cfg.replicates);
    let rows: Vec<SweepRow> = points.par_iter().map(|&pt| run_point(cfg, settings, pt)).collect();
    for r in rows.iter().filter(|r| !r.flags.is_empty()) {
        log::warn!("grid point {}: {}", r.index, r.flags.join("; "));
    }
    Ok(SweepResult { scenario: cfg.scenario, family: cfg.family, rows })
}
