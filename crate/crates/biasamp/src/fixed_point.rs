//! Scalar fixed-point systems behind every risk formula.
//!
//! Nonlinear stages (e, τ) use damped Picard iteration from e = τ = 1,
//! polished by Newton steps once close. Given those, the (u, ρ) stages are
//! affine and are solved exactly as 2×2 or 3×3 linear systems.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::spectral::{dof, Group, JointSpectrum, ScalingRegime};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub lambda_floor: f64,
    /// Finish with Newton steps once Picard is close.
    pub newton_polish: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 20_000, damping: 0.5, lambda_floor: 1e-8, newton_polish: true }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 || !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(invalid(format!("bad solver settings {self:?}")));
        }
        if !(self.lambda_floor > 0.0) {
            return Err(invalid("lambda_floor must be positive"));
        }
        Ok(())
    }

    /// Replace λ = 0 by the floor; reject negative or non-finite λ.
    pub fn effective_lambda(&self, lambda: f64) -> Result<f64> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(invalid(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        if lambda == 0.0 {
            log::warn!("lambda = 0 replaced by floor {}", self.lambda_floor);
            return Ok(self.lambda_floor);
        }
        Ok(lambda)
    }
}

/// How a nonlinear stage terminated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveInfo {
    pub residual: f64,
    pub iters: usize,
}

impl SolveInfo {
    /// Worst of two stages: max residual, summed iterations.
    pub fn combine(self, other: SolveInfo) -> SolveInfo {
        SolveInfo { residual: self.residual.max(other.residual), iters: self.iters + other.iters }
    }
}

fn residual<const N: usize>(x: &[f64; N], fx: &[f64; N]) -> Option<f64> {
    let mut res: f64 = 0.0;
    for i in 0..N {
        if !fx[i].is_finite() || fx[i] <= 0.0 {
            return None;
        }
        res = res.max((fx[i] - x[i]).abs() / x[i].abs());
    }
    Some(res)
}

/// Residual below which Picard hands over to Newton polishing.
const POLISH_AT: f64 = 1e-6;

/// Damped Picard on x = F(x); once the residual is below `POLISH_AT`,
/// Newton steps on F(x) − x with a central-difference Jacobian finish the
/// solve. Picard alone crawls near interpolation thresholds.
fn picard<const N: usize>(
    what: &'static str,
    settings: &SolverSettings,
    mut x: [f64; N],
    map: impl Fn(&[f64; N]) -> [f64; N],
) -> Result<([f64; N], SolveInfo)> {
    settings.validate()?;
    let eta = settings.damping;
    let mut best = f64::INFINITY;
    let mut iter = 0;
    let mut polished = false;
    while iter < settings.max_iter {
        let fx = map(&x);
        let res = residual(&x, &fx).ok_or(Error::NonConvergence { what, residual: f64::INFINITY, iters: iter })?;
        best = best.min(res);
        if res < settings.tol {
            return Ok((x, SolveInfo { residual: res, iters: iter }));
        }
        if settings.newton_polish && !polished && res < POLISH_AT {
            polished = true;
            if let Some((y, r, used)) = newton(&map, x, settings.tol, settings.max_iter - iter) {
                iter += used;
                if r < settings.tol {
                    return Ok((y, SolveInfo { residual: r, iters: iter }));
                }
                x = y;
                best = best.min(r);
                continue;
            }
        }
        for i in 0..N {
            x[i] = (1.0 - eta) * x[i] + eta * fx[i];
        }
        iter += 1;
    }
    Err(Error::NonConvergence { what, residual: best, iters: settings.max_iter })
}

fn newton<const N: usize>(
    map: &impl Fn(&[f64; N]) -> [f64; N],
    mut x: [f64; N],
    tol: f64,
    budget: usize,
) -> Option<([f64; N], f64, usize)> {
    let mut fx = map(&x);
    let mut res = residual(&x, &fx)?;
    let mut used = 0;
    while used < budget.min(50) {
        used += 1;
        let mut jac = DMatrix::<f64>::zeros(N, N);
        for j in 0..N {
            let h = 1e-6 * x[j];
            let (mut xp, mut xm) = (x, x);
            xp[j] += h;
            xm[j] -= h;
            let (fp, fm) = (map(&xp), map(&xm));
            for i in 0..N {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h) - if i == j { 1.0 } else { 0.0 };
            }
        }
        let g = DVector::from_fn(N, |i, _| x[i] - fx[i]);
        let step = jac.lu().solve(&g)?;
        let mut t = 1.0;
        loop {
            let mut y = x;
            for i in 0..N {
                y[i] = x[i] + t * step[i];
            }
            if y.iter().all(|v| *v > 0.0 && v.is_finite()) {
                let fy = map(&y);
                if let Some(r) = residual(&y, &fy) {
                    if r < res {
                        x = y;
                        fx = fy;
                        res = r;
                        break;
                    }
                }
            }
            t *= 0.5;
            if t < 1e-4 {
                return Some((x, res, used));
            }
        }
        if res < tol {
            break;
        }
    }
    Some((x, res, used))
}

fn solve2(a: Matrix2<f64>, b: Vector2<f64>, what: &str) -> Result<Vector2<f64>> {
    let x = a.lu().solve(&b).ok_or_else(|| Error::Singular(format!("{what}: singular 2x2 system")))?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Singular(format!("{what}: non-finite 2x2 solution")))
    }
}

fn solve3(a: Matrix3<f64>, b: Vector3<f64>, what: &str) -> Result<Vector3<f64>> {
    let x = a.lu().solve(&b).ok_or_else(|| Error::Singular(format!("{what}: singular 3x3 system")))?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Singular(format!("{what}: non-finite 3x3 solution")))
    }
}

// ---------------------------------------------------------------------------
// Random projections, joint training

#[derive(Clone, Debug, PartialEq)]
pub struct RPJointConstants {
    pub e1: f64,
    pub e2: f64,
    pub tau: f64,
    pub u1: f64,
    pub u2: f64,
    pub rho: f64,
    /// The B array the linear stage was solved with.
    pub b: Vec<f64>,
    pub lambda: f64,
    pub info: SolveInfo,
}

impl RPJointConstants {
    pub fn e(&self, g: Group) -> f64 {
        match g {
            Group::One => self.e1,
            Group::Two => self.e2,
        }
    }

    pub fn u(&self, g: Group) -> f64 {
        match g {
            Group::One => self.u1,
            Group::Two => self.u2,
        }
    }
}

/// (e₁, e₂, τ) with 1/τ = 1 + tr̄ L K⁻¹ and 1/e_s = 1 + ψτ tr̄ Σ_s K⁻¹,
/// where L = p₁e₁Σ₁ + p₂e₂Σ₂ and K = γτL + λ.
pub fn solve_rp_joint_nonlinear(
    spectrum: &JointSpectrum,
    regime: &ScalingRegime,
    lambda: f64,
    settings: &SolverSettings,
) -> Result<((f64, f64, f64), SolveInfo)> {
    let lambda = settings.effective_lambda(lambda)?;
    let (p1, p2, g, psi) = (regime.p1, regime.p2(), regime.gamma(), regime.psi);
    let atoms = spectrum.atoms();
    let ([e1, e2, tau], info) = picard("random-projection joint constants", settings, [1.0; 3], |x| {
        let [e1, e2, tau] = *x;
        let (mut t_l, mut t_1, mut t_2) = (0.0, 0.0, 0.0);
        for (a, w) in atoms {
            let l = p1 * e1 * a.sigma1 + p2 * e2 * a.sigma2;
            let k = g * tau * l + lambda;
            t_l += w * l / k;
            t_1 += w * a.sigma1 / k;
            t_2 += w * a.sigma2 / k;
        }
        [1.0 / (1.0 + psi * tau * t_1), 1.0 / (1.0 + psi * tau * t_2), 1.0 / (1.0 + t_l)]
    })?;
    Ok(((e1, e2, tau), info))
}

/// Exact (u₁, u₂, ρ) given (e₁, e₂, τ) and D = p₁u₁Σ₁ + p₂u₂Σ₂ + B.
#[allow(clippy::too_many_arguments)]
pub fn solve_rp_joint_linear(
    spectrum: &JointSpectrum,
    regime: &ScalingRegime,
    lambda: f64,
    e1: f64,
    e2: f64,
    tau: f64,
    b: &[f64],
) -> Result<(f64, f64, f64)> {
    if b.len() != spectrum.d() {
        return Err(invalid("B length differs from spectrum dimension"));
    }
    if b.iter().any(|x| !x.is_finite()) {
        return Err(invalid("B must be finite"));
    }
    let (p1, p2, g, psi) = (regime.p1, regime.p2(), regime.gamma(), regime.psi);
    let (s1, s2) = (spectrum.sigma1(), spectrum.sigma2());
    let d = spectrum.d() as f64;

    // Normalized traces against K⁻².
    let (mut l2, mut t1, mut t2, mut tb) = (0.0, 0.0, 0.0, 0.0);
    let (mut t11, mut t12, mut t22, mut t1b, mut t2b) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 0..spectrum.d() {
        let l = p1 * e1 * s1[k] + p2 * e2 * s2[k];
        let kk = g * tau * l + lambda;
        let q = 1.0 / (kk * kk);
        l2 += l * l * q;
        t1 += s1[k] * q;
        t2 += s2[k] * q;
        tb += b[k] * q;
        t11 += s1[k] * s1[k] * q;
        t12 += s1[k] * s2[k] * q;
        t22 += s2[k] * s2[k] * q;
        t1b += s1[k] * b[k] * q;
        t2b += s2[k] * b[k] * q;
    }
    let [l2, t1, t2, tb, t11, t12, t22, t1b, t2b] = [l2, t1, t2, tb, t11, t12, t22, t1b, t2b].map(|x| x / d);

    let (lam2, tau2) = (lambda * lambda, tau * tau);
    let c1 = psi * e1 * e1;
    let c2 = psi * e2 * e2;
    let gt2 = g * tau2;
    #[rustfmt::skip]
    let a = Matrix3::new(
        1.0 - c1 * gt2 * p1 * t11, -c1 * gt2 * p2 * t12,       -c1 * t1,
        -c2 * gt2 * p1 * t12,      1.0 - c2 * gt2 * p2 * t22,  -c2 * t2,
        -lam2 * tau2 * p1 * t1,    -lam2 * tau2 * p2 * t2,     1.0 - gt2 * l2,
    );
    let rhs = Vector3::new(c1 * gt2 * t1b, c2 * gt2 * t2b, lam2 * tau2 * tb);
    let x = solve3(a, rhs, "random-projection joint linear stage")?;
    Ok((x[0], x[1], x[2]))
}

/// Both stages, with the linear stage targeted at B.
pub fn solve_rp_joint(
    spectrum: &JointSpectrum,
    regime: &ScalingRegime,
    lambda: f64,
    b: &[f64],
    settings: &SolverSettings,
) -> Result<RPJointConstants> {
    let lambda = settings.effective_lambda(lambda)?;
    let ((e1, e2, tau), info) = solve_rp_joint_nonlinear(spectrum, regime, lambda, settings)?;
    let (u1, u2, rho) = solve_rp_joint_linear(spectrum, regime, lambda, e1, e2, tau, b)?;
    Ok(RPJointConstants { e1, e2, tau, u1, u2, rho, b: b.to_vec(), lambda, info })
}

// ---------------------------------------------------------------------------
// Random projections, one model per group

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RPSeparateConstants {
    pub group: Group,
    pub e: f64,
    pub tau: f64,
    pub u: f64,
    pub rho: f64,
    pub lambda: f64,
    pub info: SolveInfo,
}

/// Constants of the model trained on group s alone: K = γτe Σ_s + λ_s,
/// 1/e = 1 + ψ_s τ tr̄ Σ_s K⁻¹, 1/τ = 1 + tr̄ e Σ_s K⁻¹, then (u, ρ) exactly.
pub fn solve_rp_separate(
    spectrum: &JointSpectrum,
    regime: &ScalingRegime,
    s: Group,
    lambda_s: f64,
    settings: &SolverSettings,
) -> Result<RPSeparateConstants> {
    let lambda = settings.effective_lambda(lambda_s)?;
    let (g, psi) = (regime.gamma(), regime.psi_s(s));
    let atoms = spectrum.atoms();
    let ([e, tau], info) = picard("random-projection separate constants", settings, [1.0; 2], |x| {
        let [e, tau] = *x;
        let mut t1 = 0.0;
        for (a, w) in atoms {
            let sg = a.sigma(s);
            t1 += w * sg / (g * tau * e * sg + lambda);
        }
        [1.0 / (1.0 + psi * tau * t1), 1.0 / (1.0 + e * t1)]
    })?;

    let (t1, t2) = {
        let (mut t1, mut t2) = (0.0, 0.0);
        for (a, w) in atoms {
            let sg = a.sigma(s);
            let k = g * tau * e * sg + lambda;
            t1 += w * sg / (k * k);
            t2 += w * sg * sg / (k * k);
        }
        (t1, t2)
    };
    let (tau2, lam2, c) = (tau * tau, lambda * lambda, psi * e * e);
    #[rustfmt::skip]
    let a = Matrix2::new(
        1.0 - c * g * tau2 * t2, -c * t1,
        -lam2 * tau2 * t1,       1.0 - g * tau2 * e * e * t2,
    );
    let rhs = Vector2::new(c * g * tau2 * t2, lam2 * tau2 * t1);
    let x = solve2(a, rhs, "random-projection separate linear stage")?;
    Ok(RPSeparateConstants { group: s, e, tau, u: x[0], rho: x[1], lambda, info })
}

// ---------------------------------------------------------------------------
// Classical ridge, joint training

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicalJointConstants {
    pub e1: f64,
    pub e2: f64,
    /// `u[s][k]` is u_k^(s): target group s, coefficient k.
    pub u: [[f64; 2]; 2],
    pub lambda: f64,
    pub info: SolveInfo,
}

impl ClassicalJointConstants {
    pub fn e(&self, g: Group) -> f64 {
        match g {
            Group::One => self.e1,
            Group::Two => self.e2,
        }
    }

    pub fn u(&self, target: Group, k: Group) -> f64 {
        self.u[target.index()][k.index()]
    }
}

/// 1/e_s = 1 + φ tr̄ Σ_s K⁻¹ with K = p₁e₁Σ₁ + p₂e₂Σ₂ + λ, then for each
/// target s the 2×2 system u_k = φe_k² tr̄ Σ_k(p₁u₁Σ₁ + p₂u₂Σ₂ + Σ_s)K⁻².
pub fn solve_classical_joint(
    spectrum: &JointSpectrum,
    regime: &ScalingRegime,
    lambda: f64,
    settings: &SolverSettings,
) -> Result<ClassicalJointConstants> {
    let lambda = settings.effective_lambda(lambda)?;
    let (p1, p2, phi) = (regime.p1, regime.p2(), regime.phi);
    let atoms = spectrum.atoms();
    let ([e1, e2], info) = picard("classical joint constants", settings, [1.0; 2], |x| {
        let [e1, e2] = *x;
        let (mut t1, mut t2) = (0.0, 0.0);
        for (a, w) in atoms {
            let k = p1 * e1 * a.sigma1 + p2 * e2 * a.sigma2 + lambda;
            t1 += w * a.sigma1 / k;
            t2 += w * a.sigma2 / k;
        }
        [1.0 / (1.0 + phi * t1), 1.0 / (1.0 + phi * t2)]
    })?;

    let (mut t11, mut t12, mut t22) = (0.0, 0.0, 0.0);
    for (a, w) in atoms {
        let k = p1 * e1 * a.sigma1 + p2 * e2 * a.sigma2 + lambda;
        let q = w / (k * k);
        t11 += a.sigma1 * a.sigma1 * q;
        t12 += a.sigma1 * a.sigma2 * q;
        t22 += a.sigma2 * a.sigma2 * q;
    }
    let (c1, c2) = (phi * e1 * e1, phi * e2 * e2);
    #[rustfmt::skip]
    let a = Matrix2::new(
        1.0 - c1 * p1 * t11, -c1 * p2 * t12,
        -c2 * p1 * t12,      1.0 - c2 * p2 * t22,
    );
    let mut u = [[0.0; 2]; 2];
    for s in Group::BOTH {
        let rhs = match s {
            Group::One => Vector2::new(c1 * t11, c2 * t12),
            Group::Two => Vector2::new(c1 * t12, c2 * t22),
        };
        let x = solve2(a, rhs, "classical joint linear stage")?;
        u[s.index()] = [x[0], x[1]];
    }
    Ok(ClassicalJointConstants { e1, e2, u, lambda, info })
}

// ---------------------------------------------------------------------------
// Classical ridge, one model per group

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicalSeparateConstants {
    pub group: Group,
    pub kappa: f64,
}

/// κ − λ = κ φ_s df̄₁(κ), by bisection. λ = 0 with φ_s ≤ 1 gives κ = 0.
pub fn solve_kappa(
    spectrum: &JointSpectrum,
    s: Group,
    phi_s: f64,
    lambda_s: f64,
    settings: &SolverSettings,
) -> Result<ClassicalSeparateConstants> {
    settings.validate()?;
    if !(phi_s > 0.0) || !lambda_s.is_finite() || lambda_s < 0.0 {
        return Err(invalid(format!("kappa needs phi_s > 0 and lambda >= 0, got {phi_s}, {lambda_s}")));
    }
    let df1 = |k: f64| dof(spectrum, s, 1, 1, k);
    let g = |k: f64| -> Result<f64> { Ok(k - lambda_s - k * phi_s * df1(k)?) };

    let mean_sigma = spectrum.tr(|e| e.sigma(s))?;
    let hi0 = lambda_s + phi_s * mean_sigma * 2.0 + f64::MIN_POSITIVE;
    let mut hi = hi0;
    let mut lo = if lambda_s > 0.0 {
        lambda_s
    } else {
        // κ(1 − φ_s df̄₁(κ)) < 0 near 0⁺ exactly when φ_s df̄₁(0) > 1.
        if phi_s * df1(0.0)? <= 1.0 {
            return Ok(ClassicalSeparateConstants { group: s, kappa: 0.0 });
        }
        let mut lo = hi;
        while g(lo)? >= 0.0 {
            lo *= 0.5;
            if lo < 1e-300 {
                return Err(Error::NoRoot("kappa lower bracket underflow".into()));
            }
        }
        lo
    };
    if g(hi)? <= 0.0 {
        return Err(Error::NoRoot(format!("kappa bracket [{lo}, {hi}] has no sign change")));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if g(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= settings.tol * 1e-3 * hi {
            break;
        }
    }
    Ok(ClassicalSeparateConstants { group: s, kappa: 0.5 * (lo + hi) })
}

// ---------------------------------------------------------------------------
// Unregularized random projections, one model per group

/// Which of the three unregularized regimes a (ψ_s, γ) pair falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeCase {
    /// γ < 1 and ψ_s < 1: the projection is the bottleneck; I₁,₁(θ₀) = γ.
    UnderparamNarrow,
    /// ψ_s < 1 ≤ γ, or 1 ≤ ψ_s ≤ γ: θ₀ = 0.
    Interpolating,
    /// ψ_s ≥ 1 and ψ_s ≥ γ: I₁,₁(θ₀) = 1/φ_s.
    Overparam,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnregularizedRPConstants {
    pub group: Group,
    pub theta0: f64,
    pub eta0: f64,
    pub e0: f64,
    pub tau0: f64,
    pub case: RegimeCase,
    /// The inputs sit on a boundary shared by two cases.
    pub tie: bool,
}

pub fn classify_regime(psi_s: f64, gamma: f64) -> (RegimeCase, bool) {
    if psi_s >= 1.0 && psi_s >= gamma {
        let tie = psi_s == gamma || (psi_s == 1.0 && gamma <= 1.0);
        (RegimeCase::Overparam, tie)
    } else if psi_s < 1.0 && gamma < 1.0 {
        (RegimeCase::UnderparamNarrow, false)
    } else {
        (RegimeCase::Interpolating, gamma == 1.0)
    }
}

/// Solve I₁,₁(θ₀) = η₀ with η₀ ∈ {γ, 1, 1/φ_s} by regime.
pub fn solve_theta0(
    spectrum: &JointSpectrum,
    regime: &ScalingRegime,
    s: Group,
    settings: &SolverSettings,
) -> Result<UnregularizedRPConstants> {
    settings.validate()?;
    let (g, psi_s, phi_s) = (regime.gamma(), regime.psi_s(s), regime.phi_s(s));
    let (case, tie) = classify_regime(psi_s, g);
    let eta0 = match case {
        RegimeCase::UnderparamNarrow => g,
        RegimeCase::Interpolating => 1.0,
        RegimeCase::Overparam => 1.0 / phi_s,
    };
    let i11 = |t: f64| dof(spectrum, s, 1, 1, t);
    let at_zero = i11(0.0)?;
    // I₁,₁(0) is the fraction of nonzero eigenvalues; summation rounding
    // must not turn the boundary η₀ = I₁,₁(0) into a missing root.
    let theta0 = if eta0 > at_zero * (1.0 + 1e-12) {
        return Err(Error::NoRoot(format!("I11(theta) = {eta0} exceeds I11(0) = {at_zero}")));
    } else if eta0 >= at_zero * (1.0 - 1e-12) {
        0.0
    } else {
        let mut hi = 1.0;
        while i11(hi)? > eta0 {
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::NoRoot("theta0 upper bracket overflow".into()));
            }
        }
        let mut lo = 0.0;
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if i11(mid)? > eta0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= settings.tol * 1e-3 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    };
    Ok(UnregularizedRPConstants {
        group: s,
        theta0,
        eta0,
        e0: 1.0 - phi_s * eta0,
        tau0: (1.0 - eta0 / g).max(0.0),
        case,
        tie,
    })
}

// ---------------------------------------------------------------------------
// Marchenko-Pastur

/// Positive root of 1/m = λ + 1/(1 + γm), by damped iteration.
pub fn solve_mp(gamma: f64, lambda: f64, settings: &SolverSettings) -> Result<(f64, SolveInfo)> {
    if !(gamma > 0.0) || !(lambda > 0.0) {
        return Err(invalid(format!("MP needs gamma > 0 and lambda > 0, got {gamma}, {lambda}")));
    }
    let ([m], info) = picard("Marchenko-Pastur transform", settings, [1.0 / lambda], |x| {
        [1.0 / (lambda + 1.0 / (1.0 + gamma * x[0]))]
    })?;
    Ok((m, info))
}
