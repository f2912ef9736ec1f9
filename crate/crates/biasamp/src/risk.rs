//! Deterministic-equivalent bias and variance for the four model variants
//! (classical / random-projection ridge, trained jointly / per group) and
//! the ODD, EDD, ADD metrics built from them.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fixed_point::{
    solve_classical_joint, solve_kappa, solve_rp_joint, solve_rp_separate, solve_theta0, RPJointConstants,
    RegimeCase, SolveInfo, SolverSettings,
};
use crate::spectral::{dof, Eig, Group, JointSpectrum, NoiseAndRegularization, ScalingRegime};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Joint,
    Separate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Classical,
    RandomProjection,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiskDecomposition {
    pub bias: f64,
    pub variance: f64,
    pub total: f64,
    pub group: Group,
    pub mode: Mode,
    pub family: Family,
    pub info: SolveInfo,
}

const NEGATIVE_SLACK: f64 = 1e-10;

fn clamp_nonneg(x: f64, name: &str, scale: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Singular(format!("{name} is not finite")));
    }
    if x >= 0.0 {
        Ok(x)
    } else if x >= -NEGATIVE_SLACK * scale.max(1.0) {
        Ok(0.0)
    } else {
        Err(Error::Singular(format!("{name} = {x:e} is negative beyond rounding")))
    }
}

impl RiskDecomposition {
    fn build(bias: f64, variance: f64, group: Group, mode: Mode, family: Family, info: SolveInfo) -> Result<Self> {
        let scale = bias.abs() + variance.abs();
        let bias = clamp_nonneg(bias, "bias", scale)?;
        let variance = clamp_nonneg(variance, "variance", scale)?;
        Ok(Self { bias, variance, total: bias + variance, group, mode, family, info })
    }
}

// ---------------------------------------------------------------------------
// h-functionals of the joint random-projection model

/// One eigen-direction as seen by the h-functionals: weight, Σ₁, Σ₂, A, B.
type Term = (f64, f64, f64, f64, f64);

fn h_core(k: u8, j: Group, c: &RPJointConstants, regime: &ScalingRegime, terms: impl Iterator<Item = Term>) -> Result<f64> {
    let jp = j.other();
    let (pj, pjp) = (regime.p(j), regime.p(jp));
    let (ej, ejp, uj, ujp) = (c.e(j), c.e(jp), c.u(j), c.u(jp));
    let (g, tau, rho, lam) = (regime.gamma(), c.tau, c.rho, c.lambda);
    let (p1, p2) = (regime.p1, regime.p2());
    let tau2 = tau * tau;
    let mut acc = 0.0;
    for (w, s1, s2, a, b) in terms {
        let (sj, sjp) = match j {
            Group::One => (s1, s2),
            Group::Two => (s2, s1),
        };
        let kk = g * tau * (p1 * c.e1 * s1 + p2 * c.e2 * s2) + lam;
        let q = 1.0 / (kk * kk);
        let v = match k {
            1 => a * sj / kk,
            2 => a * sj * (g * ej * tau2 * b + pjp * g * tau2 * sjp * (ej * ujp - ejp * uj) + ej * rho - lam * uj * tau) * q,
            3 => {
                let inner = g * ej * ej * pj * sj * (pjp * g * tau2 * ujp * sjp + g * tau2 * b + rho);
                let t = pjp * g * ejp * tau * sjp + lam;
                a * sj * (inner + uj * t * t) * q
            }
            4 => {
                let inner = g * tau2 * (ej * ejp * b - pj * ej * ej * ujp * sj - pjp * sjp * ejp * ejp * uj)
                    - lam * tau * (ej * ujp + ejp * uj)
                    + ej * ejp * rho;
                sj * sjp * a * inner * q
            }
            _ => return Err(invalid(format!("h-functional index must be 1..=4, got {k}"))),
        };
        acc += w * v;
    }
    let pre = match k {
        1 => pj * g * ej * tau,
        2 => pj * g,
        3 => pj,
        _ => pj * g * pjp,
    };
    let out = pre * acc;
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::Singular(format!("h^({k}) not finite")))
    }
}

/// h_j^(k)(A, B) for k = 1..4 (h^(1) ignores B). `constants` must have been
/// solved with this same B.
pub fn h_joint(
    k: u8,
    j: Group,
    a: &[f64],
    b: &[f64],
    constants: &RPJointConstants,
    spectrum: &JointSpectrum,
    regime: &ScalingRegime,
) -> Result<f64> {
    let d = spectrum.d();
    if a.len() != d || b.len() != d {
        return Err(invalid("A and B must have the spectrum dimension"));
    }
    if b != constants.b.as_slice() {
        return Err(invalid("B differs from the one the constants were solved with"));
    }
    let w = 1.0 / d as f64;
    let (s1, s2) = (spectrum.sigma1(), spectrum.sigma2());
    h_core(k, j, constants, regime, (0..d).map(|i| (w, s1[i], s2[i], a[i], b[i])))
}

/// h over the compressed atoms with A and B given as functions of the
/// eigen-tuple; B is always Σ_target here.
fn h_atoms(
    k: u8,
    j: Group,
    target: Group,
    a: impl Fn(&Eig) -> f64,
    c: &RPJointConstants,
    spectrum: &JointSpectrum,
    regime: &ScalingRegime,
) -> Result<f64> {
    let terms = spectrum.atoms().iter().map(|(e, w)| (*w, e.sigma1, e.sigma2, a(e), e.sigma(target)));
    h_core(k, j, c, regime, terms)
}

// ---------------------------------------------------------------------------
// Random projections

/// Risk of the joint random-projection model on group s.
pub fn rp_joint_risk(
    spectrum: &JointSpectrum,
    regime: &ScalingRegime,
    noise: &NoiseAndRegularization,
    s: Group,
    settings: &SolverSettings,
) -> Result<RiskDecomposition> {
    noise.validate()?;
    let c = solve_rp_joint(spectrum, regime, noise.lambda_joint, spectrum.sigma(s), settings)?;
    let h = |k: u8, j: Group, a: &dyn Fn(&Eig) -> f64| h_atoms(k, j, s, a, &c, spectrum, regime);
    let (one, two) = (Group::One, Group::Two);
    let sp = s.other();

    let mut variance = 0.0;
    for j in Group::BOTH {
        variance += noise.sigma_sq(j) * regime.phi * h(2, j, &|_| 1.0)?;
    }

    let th = |e: &Eig| e.theta_s(s);
    let th_sig = |e: &Eig| e.theta_s(s) * e.sigma(s);
    let delta = |e: &Eig| e.delta;
    let mut bias = spectrum.tr(th_sig)?;
    bias += h(3, one, &th)? + h(3, two, &th)? + 2.0 * h(4, one, &th)?;
    bias -= 2.0 * (h(1, one, &th_sig)? + h(1, two, &th_sig)?);
    bias += h(3, sp, &delta)?;
    if s == Group::Two {
        let delta_sig2 = |e: &Eig| e.delta * e.sigma2;
        bias -= 2.0 * (h(3, one, &delta)? + h(4, two, &delta)? - h(1, one, &delta_sig2)?);
    }
    RiskDecomposition::build(bias, variance, s, Mode::Joint, Family::RandomProjection, c.info)
}

/// Risk on group s of the random-projection model trained on group s only,
/// at penalty λ_s.
pub fn rp_separate_risk(
    spectrum: &JointSpectrum,
    regime: &ScalingRegime,
    noise: &NoiseAndRegularization,
    s: Group,
    settings: &SolverSettings,
) -> Result<RiskDecomposition> {
    noise.validate()?;
    let c = solve_rp_separate(spectrum, regime, s, noise.lambda_s(s), settings)?;
    let (g, phi_s) = (regime.gamma(), regime.phi_s(s));
    let (e, tau, u, rho, lam) = (c.e, c.tau, c.u, c.rho, c.lambda);
    let tau2 = tau * tau;
    let k_of = |sg: f64| g * tau * e * sg + lam;

    let h2 = spectrum.tr(|a| {
        let sg = a.sigma(s);
        let k = k_of(sg);
        sg * (g * e * tau2 * sg + e * rho - lam * u * tau) / (k * k)
    })? * g;
    let h3 = spectrum.tr(|a| {
        let sg = a.sigma(s);
        let k = k_of(sg);
        a.theta_s(s) * sg * (g * e * e * sg * (g * tau2 * sg + rho) + lam * lam * u) / (k * k)
    })?;
    let h1 = spectrum.tr(|a| {
        let sg = a.sigma(s);
        a.theta_s(s) * sg * sg / k_of(sg)
    })? * g * e * tau;

    let variance = noise.sigma_sq(s) * phi_s * h2;
    let bias = spectrum.tr(|a| a.theta_s(s) * a.sigma(s))? + h3 - 2.0 * h1;
    RiskDecomposition::build(bias, variance, s, Mode::Separate, Family::RandomProjection, c.info)
}

/// λ → 0 limit of `rp_separate_risk`, in closed form per regime.
pub fn rp_separate_risk_unregularized(
    spectrum: &JointSpectrum,
    regime: &ScalingRegime,
    sigma_sq: f64,
    s: Group,
    settings: &SolverSettings,
) -> Result<RiskDecomposition> {
    if !(sigma_sq >= 0.0) {
        return Err(invalid("noise variance must be >= 0"));
    }
    let c = solve_theta0(spectrum, regime, s, settings)?;
    let (psi_s, phi_s, t0) = (regime.psi_s(s), regime.phi_s(s), c.theta0);
    let t1 = || {
        spectrum.tr(|a| {
            let sg = a.sigma(s);
            if sg == 0.0 { 0.0 } else { a.theta_s(s) * sg / (sg + t0) }
        })
    };
    let t2 = || {
        spectrum.tr(|a| {
            let sg = a.sigma(s);
            if sg == 0.0 { 0.0 } else { a.theta_s(s) * sg / ((sg + t0) * (sg + t0)) }
        })
    };
    let (bias, variance) = match c.case {
        RegimeCase::UnderparamNarrow => (t0 * t1()? / (1.0 - psi_s), sigma_sq * psi_s / (1.0 - psi_s)),
        RegimeCase::Interpolating => {
            if phi_s >= 1.0 {
                return Err(Error::Singular("phi_s >= 1 in the interpolating regime".into()));
            }
            (0.0, sigma_sq * phi_s / (1.0 - phi_s))
        }
        RegimeCase::Overparam => {
            if psi_s == 1.0 {
                return Err(Error::Singular("psi_s = 1: risk diverges".into()));
            }
            let i22 = dof(spectrum, s, 2, 2, t0)?;
            let denom = 1.0 - phi_s * i22;
            if denom <= 0.0 {
                return Err(Error::Singular("1 - phi_s I22(theta0) <= 0".into()));
            }
            (
                t0 * t0 * t2()? / denom + t0 * t1()? / (psi_s - 1.0),
                sigma_sq * phi_s * i22 / denom + sigma_sq / (psi_s - 1.0),
            )
        }
    };
    RiskDecomposition::build(bias, variance, s, Mode::Separate, Family::RandomProjection, SolveInfo::default())
}

// ---------------------------------------------------------------------------
// Classical ridge

/// Risk of the jointly trained classical ridge model on group s.
pub fn classical_joint_risk(
    spectrum: &JointSpectrum,
    regime: &ScalingRegime,
    noise: &NoiseAndRegularization,
    s: Group,
    settings: &SolverSettings,
) -> Result<RiskDecomposition> {
    noise.validate()?;
    let c = solve_classical_joint(spectrum, regime, noise.lambda_joint, settings)?;
    let (p1, p2, phi, lam) = (regime.p1, regime.p2(), regime.phi, c.lambda);
    let (e1, e2) = (c.e1, c.e2);
    let (u1, u2) = (c.u(s, Group::One), c.u(s, Group::Two));
    let sp = s.other();
    let (ps, psp) = (regime.p(s), regime.p(sp));
    let (es, esp, us, usp) = (c.e(s), c.e(sp), c.u(s, s), c.u(s, sp));
    let kk = |a: &Eig| p1 * e1 * a.sigma1 + p2 * e2 * a.sigma2 + lam;

    let mut variance = 0.0;
    for k in Group::BOTH {
        let kp = k.other();
        let (ek, ekp, uk, ukp) = (c.e(k), c.e(kp), c.u(s, k), c.u(s, kp));
        let t = spectrum.tr(|a| {
            let q = kk(a);
            a.sigma(k) * (ek * a.sigma(s) - lam * uk + regime.p(kp) * a.sigma(kp) * (ek * ukp - ekp * uk)) / (q * q)
        })?;
        variance += regime.p(k) * noise.sigma_sq(k) * phi * t;
    }

    let b1 = psp
        * spectrum.tr(|a| {
            let q = kk(a);
            let t = ps * es * a.sigma(s) + lam;
            a.delta
                * a.sigma(sp)
                * (psp * (1.0 + ps * us) * esp * esp * a.sigma(sp) * a.sigma(s) + usp * t * t)
                / (q * q)
        })?;
    let b3 = lam
        * lam
        * spectrum.tr(|a| {
            let q = kk(a);
            a.theta_s(s) * (p1 * u1 * a.sigma1 + p2 * u2 * a.sigma2 + a.sigma(s)) / (q * q)
        })?;
    let mut bias = b1 + b3;
    if s == Group::Two {
        let b2 = p1
            * lam
            * spectrum.tr(|a| {
                let q = kk(a);
                a.sigma1 * a.delta * ((1.0 + p2 * u2) * e1 * a.sigma2 - u1 * (p2 * e2 * a.sigma2 + lam)) / (q * q)
            })?;
        bias += 2.0 * b2;
    }
    RiskDecomposition::build(bias, variance, s, Mode::Joint, Family::Classical, c.info)
}

/// Risk on group s of classical ridge trained on group s only.
pub fn classical_separate_risk(
    spectrum: &JointSpectrum,
    phi_s: f64,
    lambda_s: f64,
    sigma_sq: f64,
    s: Group,
    settings: &SolverSettings,
) -> Result<RiskDecomposition> {
    if !(sigma_sq >= 0.0) {
        return Err(invalid("noise variance must be >= 0"));
    }
    let kappa = solve_kappa(spectrum, s, phi_s, lambda_s, settings)?.kappa;
    let df2 = dof(spectrum, s, 2, 2, kappa)?;
    let denom = 1.0 - phi_s * df2;
    if denom <= 0.0 {
        return Err(Error::Singular(format!("1 - phi_s df2 = {denom:e} <= 0")));
    }
    let num = spectrum.tr(|a| {
        let sg = a.sigma(s);
        if sg == 0.0 { 0.0 } else { a.theta_s(s) * sg / ((sg + kappa) * (sg + kappa)) }
    })?;
    let bias = kappa * kappa * num / denom;
    let variance = sigma_sq * phi_s * df2 / denom;
    RiskDecomposition::build(bias, variance, s, Mode::Separate, Family::Classical, SolveInfo::default())
}

// ---------------------------------------------------------------------------
// Metrics

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasAmpMetrics {
    pub odd: f64,
    pub edd: f64,
    /// ODD / EDD; `None` when EDD is numerically zero.
    pub add: Option<f64>,
    /// R₂ − R₁ of the joint model.
    pub signed_odd: f64,
    /// R₂ − R₁ of the separate models.
    pub signed_edd: f64,
}

pub const EDD_ZERO: f64 = 1e-12;

pub fn metrics(r1_joint: f64, r2_joint: f64, r1_sep: f64, r2_sep: f64) -> Result<BiasAmpMetrics> {
    if ![r1_joint, r2_joint, r1_sep, r2_sep].iter().all(|x| x.is_finite()) {
        return Err(invalid("risks must be finite"));
    }
    let signed_odd = r2_joint - r1_joint;
    let signed_edd = r2_sep - r1_sep;
    let (odd, edd) = (signed_odd.abs(), signed_edd.abs());
    let add = if edd < EDD_ZERO { None } else { Some(odd / edd) };
    Ok(BiasAmpMetrics { odd, edd, add, signed_odd, signed_edd })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLawLimits {
    pub odd: f64,
    pub edd: f64,
    /// `None` at c = 1, where ADD diverges.
    pub add: Option<f64>,
}

/// Small-λ limits for power-law spectra with p = 1/2 and noise ratio
/// c = σ₂²/σ₁².
pub fn power_law_limits(c: f64, phi: f64, sigma1_sq: f64) -> Result<PowerLawLimits> {
    if !(phi > 0.0 && phi < 0.5) {
        return Err(invalid(format!("power-law limits need 0 < phi < 1/2, got {phi}")));
    }
    if !(c >= 0.0) || !(sigma1_sq >= 0.0) {
        return Err(invalid("noise ratio and sigma1^2 must be >= 0"));
    }
    let scale = 2.0 * phi * sigma1_sq / (1.0 - 2.0 * phi);
    let add = if c == 1.0 { None } else { Some(c / (c - 1.0).abs()) };
    Ok(PowerLawLimits { odd: scale * c, edd: scale * (c - 1.0).abs(), add })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_arithmetic() {
        let m = metrics(1.0, 2.0, 1.0, 1.5).unwrap();
        assert_eq!((m.odd, m.edd, m.add), (1.0, 0.5, Some(2.0)));
        assert_eq!(metrics(1.0, 1.0, 2.0, 2.0).unwrap().add, None);
        assert!(metrics(f64::NAN, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn power_law_closed_forms() {
        assert_eq!(power_law_limits(2.0, 0.2, 1.0).unwrap().add, Some(2.0));
        assert_eq!(power_law_limits(0.5, 0.2, 1.0).unwrap().add, Some(1.0));
        assert_eq!(power_law_limits(1.0, 0.2, 1.0).unwrap().add, None);
        assert!(power_law_limits(2.0, 0.5, 1.0).is_err());
        assert!(power_law_limits(1e-9, 0.2, 1.0).unwrap().add.unwrap() < 1e-8);
    }
}
