//! Sweep configuration: a flat JSON object, unknown keys rejected.
//!
//! Every field except `scenario` is optional. Missing fields are filled from
//! the scenario preset; `custom` has no preset, so every model field must be
//! given. `sigma2_sq` and `c` are mutually exclusive: with `c`, the group-2
//! noise is c·σ₁² at each grid value.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk::Family;
use crate::spectral::{make_diatomic, make_isotropic, make_power_law, JointSpectrum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    PhaseDiagram,
    IsotropicSweep,
    RegularizationPath,
    DiatomicMinority,
    PowerLawNoiseRatio,
    Custom,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::PhaseDiagram,
        Scenario::IsotropicSweep,
        Scenario::RegularizationPath,
        Scenario::DiatomicMinority,
        Scenario::PowerLawNoiseRatio,
        Scenario::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::PhaseDiagram => "phase-diagram",
            Scenario::IsotropicSweep => "isotropic-sweep",
            Scenario::RegularizationPath => "regularization-path",
            Scenario::DiatomicMinority => "diatomic-minority",
            Scenario::PowerLawNoiseRatio => "power-law-noise-ratio",
            Scenario::Custom => "custom",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumKind {
    /// Σ₁ = a₁I, Σ₂ = a₂I.
    Isotropic,
    /// Core block of fraction π shared at a₁ / a₂; group 2 adds b₂ elsewhere.
    Diatomic,
    /// σ_s[k] = k^(−β_s), Δ[k] = k^(−α).
    PowerLaw,
}

/// As written in a config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub scenario: Option<Scenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma1_sq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2_sq: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_seed: Option<u64>,
    /// CSV file name, relative to the output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_csv: Option<String>,
    /// Optional SVG written next to the CSV with the scenario's default axes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_svg: Option<String>,
}

/// `k` points from `lo` to `hi`, evenly spaced in log10.
pub fn logspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..k).map(|i| 10f64.powf(a + (b - a) * i as f64 / (k - 1) as f64)).collect()
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Fully populated defaults for a scenario; `custom` only sets the
    /// harness fields.
    pub fn preset(scenario: Scenario) -> Self {
        let base = SweepConfig {
            scenario: Some(scenario),
            family: Some(Family::RandomProjection),
            p1: Some(0.5),
            n: Some(400),
            replicates: Some(25),
            base_seed: Some(0),
            output_csv: Some(format!("{}.csv", scenario.name())),
            ..Default::default()
        };
        let isotropic = |a1: f64, a2: f64| SweepConfig {
            spectrum: Some(SpectrumKind::Isotropic),
            a1: Some(a1),
            a2: Some(a2),
            theta_scale: Some(2.0),
            delta_scale: Some(1.0),
            ..base.clone()
        };
        match scenario {
            // 40×40 log grid over [1e-2, 1e1] in both rates, theory only.
            Scenario::PhaseDiagram => SweepConfig {
                sigma1_sq: Some(1.0),
                sigma2_sq: Some(1.0),
                lambda: Some(vec![1e-6]),
                phi: Some(logspace(1e-2, 10.0, 40)),
                psi: Some(logspace(1e-2, 10.0, 40)),
                n: Some(10_000),
                replicates: Some(0),
                ..isotropic(2.0, 1.0)
            },
            Scenario::IsotropicSweep => SweepConfig {
                sigma1_sq: Some(1.0),
                sigma2_sq: Some(1e-5),
                lambda: Some(vec![1e-6]),
                phi: Some(vec![0.5, 1.0, 2.0]),
                psi: Some(logspace(0.1, 10.0, 13)),
                output_svg: Some(format!("{}.svg", scenario.name())),
                ..isotropic(0.5, 1.0)
            },
            Scenario::RegularizationPath => SweepConfig {
                sigma1_sq: Some(1.0),
                sigma2_sq: Some(1.0),
                lambda: Some(logspace(1e-4, 1e2, 13)),
                phi: Some(vec![0.75]),
                psi: Some(vec![0.5, 0.9, 2.0, 4.0]),
                output_svg: Some(format!("{}.svg", scenario.name())),
                ..isotropic(0.5, 1.0)
            },
            Scenario::DiatomicMinority => SweepConfig {
                spectrum: Some(SpectrumKind::Diatomic),
                a1: Some(2.0),
                a2: Some(2.0),
                b2: Some(0.2),
                pi: Some(0.5),
                theta_scale: Some(1.0),
                delta_scale: Some(0.0),
                p1: Some(0.9),
                sigma1_sq: Some(1.0),
                sigma2_sq: Some(1.0),
                lambda: Some(vec![1e-6]),
                phi: Some(vec![0.5, 1.0, 2.0]),
                psi: Some(logspace(0.1, 10.0, 13)),
                output_svg: Some(format!("{}.svg", scenario.name())),
                ..base
            },
            Scenario::PowerLawNoiseRatio => SweepConfig {
                spectrum: Some(SpectrumKind::PowerLaw),
                beta1: Some(2.0),
                beta2: Some(1.0),
                alpha: Some(1.0),
                theta_scale: Some(1.0),
                sigma1_sq: Some(1.0),
                c: Some(vec![0.1, 0.25, 0.5, 0.75, 1.5, 2.0, 4.0, 10.0]),
                lambda: Some(vec![1e-6]),
                phi: Some(vec![0.2]),
                psi: Some(vec![0.5]),
                n: Some(20_000),
                replicates: Some(0),
                output_svg: Some(format!("{}.svg", scenario.name())),
                ..base
            },
            Scenario::Custom => SweepConfig { family: None, p1: None, n: None, replicates: None, ..base },
        }
    }

    /// Fill gaps from the scenario preset and check everything.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let scenario = self.scenario.ok_or_else(|| Error::Config("missing key `scenario`".into()))?;
        let p = Self::preset(scenario);
        let family = self.family.or(p.family).unwrap_or(Family::RandomProjection);
        let spectrum = req("spectrum", self.spectrum, p.spectrum)?;
        let theta_scale = req("theta_scale", self.theta_scale, p.theta_scale)?;
        let shape = match spectrum {
            SpectrumKind::Isotropic => SpectrumShape::Isotropic {
                a1: req("a1", self.a1, p.a1)?,
                a2: req("a2", self.a2, p.a2)?,
                delta_scale: req("delta_scale", self.delta_scale, p.delta_scale)?,
            },
            SpectrumKind::Diatomic => SpectrumShape::Diatomic {
                pi: req("pi", self.pi, p.pi)?,
                a1: req("a1", self.a1, p.a1)?,
                a2: req("a2", self.a2, p.a2)?,
                b2: req("b2", self.b2, p.b2)?,
                delta_scale: req("delta_scale", self.delta_scale, p.delta_scale)?,
            },
            SpectrumKind::PowerLaw => SpectrumShape::PowerLaw {
                beta1: req("beta1", self.beta1, p.beta1)?,
                beta2: req("beta2", self.beta2, p.beta2)?,
                alpha: req("alpha", self.alpha, p.alpha)?,
            },
        };
        // Keys that the chosen spectrum ignores are almost always mistakes.
        let unused: &[(&str, bool)] = match spectrum {
            SpectrumKind::Isotropic => &[
                ("b2", self.b2.is_some()),
                ("pi", self.pi.is_some()),
                ("beta1", self.beta1.is_some()),
                ("beta2", self.beta2.is_some()),
                ("alpha", self.alpha.is_some()),
            ],
            SpectrumKind::Diatomic => &[
                ("beta1", self.beta1.is_some()),
                ("beta2", self.beta2.is_some()),
                ("alpha", self.alpha.is_some()),
            ],
            SpectrumKind::PowerLaw => &[
                ("a1", self.a1.is_some()),
                ("a2", self.a2.is_some()),
                ("b2", self.b2.is_some()),
                ("pi", self.pi.is_some()),
                ("delta_scale", self.delta_scale.is_some()),
            ],
        };
        if let Some((k, _)) = unused.iter().find(|(_, set)| *set) {
            return Err(Error::Config(format!("key `{k}` does not apply to a {spectrum:?} spectrum")));
        }

        let sigma1_sq = req("sigma1_sq", self.sigma1_sq, p.sigma1_sq)?;
        let noise = match (&self.sigma2_sq, &self.c) {
            (Some(_), Some(_)) => return Err(Error::Config("give either `sigma2_sq` or `c`, not both".into())),
            (Some(s2), None) => NoiseAxis::Fixed(*s2),
            (None, Some(c)) => NoiseAxis::Ratio(c.clone()),
            (None, None) => match (p.sigma2_sq, &p.c) {
                (Some(s2), _) => NoiseAxis::Fixed(s2),
                (None, Some(c)) => NoiseAxis::Ratio(c.clone()),
                (None, None) => return Err(Error::Config("missing key `sigma2_sq` (or `c`)".into())),
            },
        };

        let r = ResolvedConfig {
            scenario,
            family,
            shape,
            theta_scale,
            p1: req("p1", self.p1, p.p1)?,
            sigma1_sq,
            noise,
            phi: req("phi", self.phi.clone(), p.phi)?,
            psi: match family {
                Family::RandomProjection => req("psi", self.psi.clone(), p.psi)?,
                // ψ plays no role without a projection; keep one dummy value.
                Family::Classical => self.psi.clone().or(p.psi).unwrap_or_else(|| vec![1.0]),
            },
            lambda: req("lambda", self.lambda.clone(), p.lambda)?,
            n: req("n", self.n, p.n)?,
            replicates: self.replicates.or(p.replicates).unwrap_or(0),
            base_seed: self.base_seed.or(p.base_seed).unwrap_or(0),
            output_csv: self
                .output_csv
                .clone()
                .or(p.output_csv)
                .unwrap_or_else(|| format!("{}.csv", scenario.name())),
            output_svg: self.output_svg.clone().or(p.output_svg),
        };
        r.validate()?;
        Ok(r)
    }
}

fn req<T>(key: &str, given: Option<T>, preset: Option<T>) -> Result<T> {
    given.or(preset).ok_or_else(|| Error::Config(format!("missing key `{key}`")))
}

#[derive(Clone, Debug, PartialEq)]
pub enum SpectrumShape {
    Isotropic { a1: f64, a2: f64, delta_scale: f64 },
    Diatomic { pi: f64, a1: f64, a2: f64, b2: f64, delta_scale: f64 },
    PowerLaw { beta1: f64, beta2: f64, alpha: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum NoiseAxis {
    Fixed(f64),
    /// σ₂² = c·σ₁² for each c.
    Ratio(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedConfig {
    pub scenario: Scenario,
    pub family: Family,
    pub shape: SpectrumShape,
    pub theta_scale: f64,
    pub p1: f64,
    pub sigma1_sq: f64,
    pub noise: NoiseAxis,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub lambda: Vec<f64>,
    pub n: usize,
    pub replicates: usize,
    pub base_seed: u64,
    pub output_csv: String,
    pub output_svg: Option<String>,
}

impl ResolvedConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n < 2 {
            return bad(format!("n must be >= 2, got {}", self.n));
        }
        if self.replicates == 1 {
            return bad("replicates must be 0 (theory only) or >= 2".into());
        }
        if !(self.p1 > 0.0 && self.p1 < 1.0) {
            return bad(format!("p1 must lie in (0,1), got {}", self.p1));
        }
        if !(self.sigma1_sq >= 0.0) || !(self.theta_scale >= 0.0) {
            return bad("sigma1_sq and theta_scale must be >= 0".into());
        }
        let noise_axis: Vec<f64> = match &self.noise {
            NoiseAxis::Fixed(s2) => vec![*s2],
            NoiseAxis::Ratio(c) => c.clone(),
        };
        for (name, axis, min_ok) in [
            ("phi", &self.phi, 0.0),
            ("psi", &self.psi, 0.0),
            ("lambda", &self.lambda, 0.0),
        ] {
            if axis.is_empty() {
                return bad(format!("grid axis `{name}` is empty"));
            }
            if let Some(x) = axis.iter().find(|x| !(x.is_finite() && **x > min_ok)) {
                return bad(format!("`{name}` values must be finite and > 0, got {x}"));
            }
        }
        if noise_axis.is_empty() {
            return bad("grid axis `c` is empty".into());
        }
        if let Some(x) = noise_axis.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return bad(format!("noise values must be finite and >= 0, got {x}"));
        }
        if self.output_csv.is_empty() {
            return bad("output_csv must not be empty".into());
        }
        // Shape parameters are checked by the constructors; a cheap probe
        // surfaces errors at load time rather than per grid point.
        self.build_spectrum(8).map_err(|e| Error::Config(format!("spectrum: {e}")))?;
        Ok(())
    }

    pub fn build_spectrum(&self, d: usize) -> Result<JointSpectrum> {
        match self.shape {
            SpectrumShape::Isotropic { a1, a2, delta_scale } => make_isotropic(d, a1, a2, self.theta_scale, delta_scale),
            SpectrumShape::Diatomic { pi, a1, a2, b2, delta_scale } => {
                make_diatomic(d, pi, a1, a2, b2, self.theta_scale, delta_scale)
            }
            SpectrumShape::PowerLaw { beta1, beta2, alpha } => make_power_law(d, beta1, beta2, alpha, self.theta_scale),
        }
    }

    /// (c, σ₂²) pairs along the noise axis.
    pub fn noise_points(&self) -> Vec<(Option<f64>, f64)> {
        match &self.noise {
            NoiseAxis::Fixed(s2) => {
                let c = if self.sigma1_sq > 0.0 { Some(s2 / self.sigma1_sq) } else { None };
                vec![(c, *s2)]
            }
            NoiseAxis::Ratio(cs) => cs.iter().map(|&c| (Some(c), c * self.sigma1_sq)).collect(),
        }
    }

    pub fn grid_len(&self) -> usize {
        self.phi.len() * self.psi.len() * self.lambda.len() * self.noise_points().len()
    }
}
