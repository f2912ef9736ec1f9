//! Population matrices Σ₁, Σ₂, Θ, Δ are simultaneously diagonalizable, so
//! every normalized trace of a rational expression in them is a mean over
//! eigenvalue tuples. `JointSpectrum` stores those tuples; identical tuples
//! are merged into weighted atoms so isotropic spectra cost O(1) per trace.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    One,
    Two,
}

impl Group {
    pub const BOTH: [Group; 2] = [Group::One, Group::Two];

    pub fn index(self) -> usize {
        match self {
            Group::One => 0,
            Group::Two => 1,
        }
    }

    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn other(self) -> Group {
        match self {
            Group::One => Group::Two,
            Group::Two => Group::One,
        }
    }
}

/// One eigen-direction: the eigenvalues of Σ₁, Σ₂, Θ and Δ along it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eig {
    pub sigma1: f64,
    pub sigma2: f64,
    pub theta: f64,
    pub delta: f64,
}

impl Eig {
    pub fn sigma(&self, g: Group) -> f64 {
        match g {
            Group::One => self.sigma1,
            Group::Two => self.sigma2,
        }
    }

    /// Θ₁ = Θ, Θ₂ = Θ + Δ.
    pub fn theta_s(&self, g: Group) -> f64 {
        match g {
            Group::One => self.theta,
            Group::Two => self.theta + self.delta,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointSpectrum {
    sigma1: Vec<f64>,
    sigma2: Vec<f64>,
    theta: Vec<f64>,
    delta: Vec<f64>,
    core: Option<usize>,
    atoms: Vec<(Eig, f64)>,
}

impl JointSpectrum {
    pub fn new(sigma1: Vec<f64>, sigma2: Vec<f64>, theta: Vec<f64>, delta: Vec<f64>) -> Result<Self> {
        let d = sigma1.len();
        if d == 0 {
            return Err(invalid("spectrum dimension must be positive"));
        }
        if sigma2.len() != d || theta.len() != d || delta.len() != d {
            return Err(invalid("spectrum arrays must share one length"));
        }
        for (name, arr) in [("sigma1", &sigma1), ("sigma2", &sigma2), ("theta", &theta), ("delta", &delta)] {
            if let Some(x) = arr.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                return Err(invalid(format!("{name} has entry {x}; entries must be finite and >= 0")));
            }
        }
        if !sigma1.iter().any(|&x| x > 0.0) || !sigma2.iter().any(|&x| x > 0.0) {
            return Err(invalid("each covariance needs at least one positive eigenvalue"));
        }

        let mut counts: BTreeMap<[u64; 4], usize> = BTreeMap::new();
        for k in 0..d {
            let key = [sigma1[k].to_bits(), sigma2[k].to_bits(), theta[k].to_bits(), delta[k].to_bits()];
            *counts.entry(key).or_default() += 1;
        }
        let atoms = counts
            .into_iter()
            .map(|(key, c)| {
                let e = Eig {
                    sigma1: f64::from_bits(key[0]),
                    sigma2: f64::from_bits(key[1]),
                    theta: f64::from_bits(key[2]),
                    delta: f64::from_bits(key[3]),
                };
                (e, c as f64 / d as f64)
            })
            .collect();

        Ok(Self { sigma1, sigma2, theta, delta, core: None, atoms })
    }

    pub fn d(&self) -> usize {
        self.sigma1.len()
    }

    pub fn sigma1(&self) -> &[f64] {
        &self.sigma1
    }

    pub fn sigma2(&self) -> &[f64] {
        &self.sigma2
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn sigma(&self, g: Group) -> &[f64] {
        match g {
            Group::One => &self.sigma1,
            Group::Two => &self.sigma2,
        }
    }

    pub fn theta_s(&self, g: Group) -> Vec<f64> {
        match g {
            Group::One => self.theta.clone(),
            Group::Two => self.theta.iter().zip(&self.delta).map(|(t, d)| t + d).collect(),
        }
    }

    /// Size of the diatomic core block, when built by `make_diatomic`.
    pub fn core_size(&self) -> Option<usize> {
        self.core
    }

    pub fn eig(&self, k: usize) -> Eig {
        Eig { sigma1: self.sigma1[k], sigma2: self.sigma2[k], theta: self.theta[k], delta: self.delta[k] }
    }

    /// Distinct eigen-tuples with their multiplicity divided by d.
    pub fn atoms(&self) -> &[(Eig, f64)] {
        &self.atoms
    }

    /// Exchange the roles of the two groups' covariances.
    pub fn swapped(&self) -> Result<Self> {
        Self::new(self.sigma2.clone(), self.sigma1.clone(), self.theta.clone(), self.delta.clone())
    }

    /// tr̄ f = (1/d) Σ_k f(eig_k). Fails if any term is not finite.
    pub fn tr(&self, f: impl Fn(&Eig) -> f64) -> Result<f64> {
        let mut acc = 0.0;
        for (e, w) in &self.atoms {
            let v = f(e);
            if !v.is_finite() {
                return Err(Error::Singular(format!("trace term not finite at {e:?}")));
            }
            acc += w * v;
        }
        Ok(acc)
    }
}

/// (1/d) Σ_k f(values_k) over a single eigenvalue array.
pub fn tr_func(values: &[f64], f: impl Fn(f64) -> f64) -> Result<f64> {
    if values.is_empty() {
        return Err(invalid("empty spectrum"));
    }
    let mut acc = 0.0;
    for &x in values {
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::Singular(format!("trace term not finite at eigenvalue {x}")));
        }
        acc += v;
    }
    Ok(acc / values.len() as f64)
}

/// σ^a / (σ + t)^b for a ≥ 1; a zero eigenvalue contributes its t → 0⁺ limit, 0.
pub(crate) fn ratio(sigma: f64, a: i32, b: i32, t: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    sigma.powi(a) / (sigma + t).powi(b)
}

/// I_{a,b}(t) = tr̄ Σ_g^a (Σ_g + t)^{-b}; df̄_m(t) = I_{m,m}(t).
pub fn dof(spectrum: &JointSpectrum, g: Group, a: i32, b: i32, t: f64) -> Result<f64> {
    if a < 1 || b < 1 {
        return Err(invalid("dof exponents must be >= 1"));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid(format!("dof shift must be finite and >= 0, got {t}")));
    }
    if t == 0.0 && b > a && spectrum.sigma(g).contains(&0.0) {
        return Err(Error::Singular("zero eigenvalue with t = 0 and b > a".into()));
    }
    spectrum.tr(|e| ratio(e.sigma(g), a, b, t))
}

pub fn make_isotropic(d: usize, a1: f64, a2: f64, theta_scale: f64, delta_scale: f64) -> Result<JointSpectrum> {
    if d == 0 {
        return Err(invalid("d must be positive"));
    }
    JointSpectrum::new(vec![a1; d], vec![a2; d], vec![theta_scale; d], vec![delta_scale; d])
}

/// Σ₁ = a₁ on the first round(π·d) coordinates and 0 elsewhere;
/// Σ₂ = a₂ on that core block and b₂ on the rest.
pub fn make_diatomic(
    d: usize,
    pi_frac: f64,
    a1: f64,
    a2: f64,
    b2: f64,
    theta_scale: f64,
    delta_scale: f64,
) -> Result<JointSpectrum> {
    if d == 0 {
        return Err(invalid("d must be positive"));
    }
    if !(pi_frac > 0.0 && pi_frac < 1.0) {
        return Err(invalid(format!("core fraction must lie in (0,1), got {pi_frac}")));
    }
    let core = (pi_frac * d as f64).round() as usize;
    if core == 0 || core == d {
        return Err(invalid(format!("core block of size {core} is empty or fills d = {d}")));
    }
    let sigma1 = (0..d).map(|k| if k < core { a1 } else { 0.0 }).collect();
    let sigma2 = (0..d).map(|k| if k < core { a2 } else { b2 }).collect();
    let mut s = JointSpectrum::new(sigma1, sigma2, vec![theta_scale; d], vec![delta_scale; d])?;
    s.core = Some(core);
    Ok(s)
}

/// σ_s[k] = (k+1)^(-β_s), Δ[k] = (k+1)^(-α), Θ ≡ theta_scale.
pub fn make_power_law(d: usize, beta1: f64, beta2: f64, alpha: f64, theta_scale: f64) -> Result<JointSpectrum> {
    if d == 0 {
        return Err(invalid("d must be positive"));
    }
    if !(beta1 > beta2 && beta2 > 0.0) {
        return Err(invalid(format!("power law needs beta1 > beta2 > 0, got {beta1}, {beta2}")));
    }
    if !(alpha > 0.0) {
        return Err(invalid(format!("power law needs alpha > 0, got {alpha}")));
    }
    let pw = |beta: f64| (1..=d).map(|k| (k as f64).powf(-beta)).collect::<Vec<_>>();
    JointSpectrum::new(pw(beta1), pw(beta2), vec![theta_scale; d], pw(alpha))
}

/// Proportionate-limit rates: φ = d/n, ψ = m/n, γ = m/d, and group share p₁.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRegime {
    pub p1: f64,
    pub phi: f64,
    pub psi: f64,
}

impl ScalingRegime {
    pub fn new(p1: f64, phi: f64, psi: f64) -> Result<Self> {
        if !(p1 > 0.0 && p1 < 1.0) {
            return Err(invalid(format!("p1 must lie in (0,1), got {p1}")));
        }
        if !(phi > 0.0 && phi.is_finite()) || !(psi > 0.0 && psi.is_finite()) {
            return Err(invalid(format!("phi and psi must be positive, got {phi}, {psi}")));
        }
        Ok(Self { p1, phi, psi })
    }

    pub fn from_sizes(n: usize, d: usize, m: usize, p1: f64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n must be positive"));
        }
        Self::new(p1, d as f64 / n as f64, m as f64 / n as f64)
    }

    pub fn p2(&self) -> f64 {
        1.0 - self.p1
    }

    pub fn p(&self, g: Group) -> f64 {
        match g {
            Group::One => self.p1,
            Group::Two => self.p2(),
        }
    }

    pub fn gamma(&self) -> f64 {
        self.psi / self.phi
    }

    pub fn phi_s(&self, g: Group) -> f64 {
        self.phi / self.p(g)
    }

    pub fn psi_s(&self, g: Group) -> f64 {
        self.psi / self.p(g)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseAndRegularization {
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub lambda_joint: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl NoiseAndRegularization {
    /// Same penalty for the joint and both separate models.
    pub fn uniform(sigma1_sq: f64, sigma2_sq: f64, lambda: f64) -> Result<Self> {
        let s = Self { sigma1_sq, sigma2_sq, lambda_joint: lambda, lambda1: lambda, lambda2: lambda };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.sigma1_sq, self.sigma2_sq, self.lambda_joint, self.lambda1, self.lambda2];
        if all.iter().all(|x| x.is_finite() && *x >= 0.0) {
            Ok(())
        } else {
            Err(invalid(format!("noise levels and penalties must be finite and >= 0: {self:?}")))
        }
    }

    pub fn sigma_sq(&self, g: Group) -> f64 {
        match g {
            Group::One => self.sigma1_sq,
            Group::Two => self.sigma2_sq,
        }
    }

    pub fn lambda_s(&self, g: Group) -> f64 {
        match g {
            Group::One => self.lambda1,
            Group::Two => self.lambda2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atoms_merge_identical_tuples() {
        let s = make_isotropic(1000, 2.0, 1.0, 2.0, 1.0).unwrap();
        assert_eq!(s.atoms().len(), 1);
        assert_eq!(s.atoms()[0].1, 1.0);
        let s = make_diatomic(10, 0.3, 1.0, 1.0, 0.5, 1.0, 0.0).unwrap();
        assert_eq!(s.atoms().len(), 2);
        assert_eq!(s.core_size(), Some(3));
    }

    #[test]
    fn theta_two_adds_delta() {
        let s = make_isotropic(3, 1.0, 1.0, 2.0, 0.5).unwrap();
        assert_eq!(s.theta_s(Group::Two), vec![2.5; 3]);
        assert_eq!(s.theta_s(Group::One), vec![2.0; 3]);
    }

    #[test]
    fn regime_relations() {
        let r = ScalingRegime::new(0.25, 0.5, 2.0).unwrap();
        assert_eq!(r.gamma(), 4.0);
        assert_eq!(r.phi_s(Group::One) * r.p1, r.phi);
        assert_eq!(r.psi_s(Group::Two), 2.0 / 0.75);
        assert!(ScalingRegime::new(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn rejects_bad_arrays() {
        assert!(JointSpectrum::new(vec![1.0], vec![1.0, 2.0], vec![1.0], vec![0.0]).is_err());
        assert!(JointSpectrum::new(vec![0.0], vec![1.0], vec![1.0], vec![0.0]).is_err());
        assert!(JointSpectrum::new(vec![-1.0, 1.0], vec![1.0, 1.0], vec![1.0; 2], vec![0.0; 2]).is_err());
    }
}
