//! Finite-size draws from the two-group mixture, the four ridge fits, exact
//! per-group risks and seeded Monte Carlo replicates.
//!
//! Data live in the shared eigenbasis, so x ~ N(0, diag(Σ_s)) and the risk
//! of ŵ on group s is the Σ_s-weighted squared distance to w*_s.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::risk::{metrics, Family};
use crate::spectral::{Group, JointSpectrum, NoiseAndRegularization};

/// Independent random streams inside one replicate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Group = 1,
    Weights = 2,
    Features = 3,
    Noise = 4,
    Projection = 5,
    TestPoints = 6,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `index` under `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix(base ^ splitmix(index))
}

pub fn stream(seed: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}

const RESEED_OFFSET: u64 = 0xA076_1D64_78BD_642F;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub n: usize,
    pub d: usize,
    pub groups: Vec<Group>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub w1: DVector<f64>,
    pub w2: DVector<f64>,
    pub n1: usize,
    pub n2: usize,
    /// Seed actually used for the group/feature/noise streams (after any reseed).
    pub seed: u64,
}

impl Dataset {
    pub fn w_star(&self, g: Group) -> &DVector<f64> {
        match g {
            Group::One => &self.w1,
            Group::Two => &self.w2,
        }
    }

    pub fn rows(&self, subset: Subset) -> Vec<usize> {
        match subset {
            Subset::Both => (0..self.n).collect(),
            Subset::Group(g) => (0..self.n).filter(|&i| self.groups[i] == g).collect(),
        }
    }
}

/// w₁* ~ N(0, Θ/d), w₂* = w₁* + δ with δ ~ N(0, Δ/d).
pub fn sample_weights(spectrum: &JointSpectrum, seed: u64) -> (DVector<f64>, DVector<f64>) {
    let d = spectrum.d();
    let mut rng = stream(seed, Purpose::Weights);
    let scale = 1.0 / d as f64;
    let w1 = DVector::from_fn(d, |k, _| {
        let z: f64 = rng.sample(StandardNormal);
        z * (spectrum.theta()[k] * scale).sqrt()
    });
    let delta = DVector::from_fn(d, |k, _| {
        let z: f64 = rng.sample(StandardNormal);
        z * (spectrum.delta()[k] * scale).sqrt()
    });
    let w2 = &w1 + delta;
    (w1, w2)
}

/// Group labels, features and noisy labels for given true weights.
pub fn sample_dataset_with_weights(
    spectrum: &JointSpectrum,
    n: usize,
    p1: f64,
    noise: &NoiseAndRegularization,
    w1: DVector<f64>,
    w2: DVector<f64>,
    seed: u64,
) -> Result<Dataset> {
    if n < 2 {
        return Err(invalid("n must be >= 2"));
    }
    if !(p1 > 0.0 && p1 < 1.0) {
        return Err(invalid(format!("p1 must lie in (0,1), got {p1}")));
    }
    let d = spectrum.d();
    if w1.len() != d || w2.len() != d {
        return Err(invalid("weight length differs from spectrum dimension"));
    }

    let mut seed = seed;
    let mut groups = draw_groups(n, p1, seed);
    if !has_both(&groups) {
        seed = seed.wrapping_add(RESEED_OFFSET);
        log::warn!("empty group in draw; reseeding with {seed}");
        groups = draw_groups(n, p1, seed);
        if !has_both(&groups) {
            return Err(invalid(format!("empty group after reseed (n = {n}, p1 = {p1})")));
        }
    }
    let n1 = groups.iter().filter(|&&g| g == Group::One).count();

    let sd: [Vec<f64>; 2] = [
        spectrum.sigma1().iter().map(|v| v.sqrt()).collect(),
        spectrum.sigma2().iter().map(|v| v.sqrt()).collect(),
    ];
    let mut frng = stream(seed, Purpose::Features);
    let mut x = DMatrix::zeros(n, d);
    for (i, g) in groups.iter().enumerate() {
        let sd = &sd[g.index()];
        for k in 0..d {
            let z: f64 = frng.sample(StandardNormal);
            x[(i, k)] = sd[k] * z;
        }
    }

    let mut nrng = stream(seed, Purpose::Noise);
    let clean1 = &x * &w1;
    let clean2 = &x * &w2;
    let y = DVector::from_fn(n, |i, _| {
        let z: f64 = nrng.sample(StandardNormal);
        let g = groups[i];
        let clean = if g == Group::One { clean1[i] } else { clean2[i] };
        clean + noise.sigma_sq(g).sqrt() * z
    });

    Ok(Dataset { n, d, groups, x, y, w1, w2, n1, n2: n - n1, seed })
}

fn draw_groups(n: usize, p1: f64, seed: u64) -> Vec<Group> {
    let mut rng = stream(seed, Purpose::Group);
    (0..n).map(|_| if rng.random::<f64>() < p1 { Group::One } else { Group::Two }).collect()
}

fn has_both(groups: &[Group]) -> bool {
    groups.contains(&Group::One) && groups.contains(&Group::Two)
}

pub fn sample_dataset(
    spectrum: &JointSpectrum,
    n: usize,
    p1: f64,
    noise: &NoiseAndRegularization,
    seed: u64,
) -> Result<Dataset> {
    let (w1, w2) = sample_weights(spectrum, seed);
    sample_dataset_with_weights(spectrum, n, p1, noise, w1, w2, seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Subset {
    Both,
    Group(Group),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FittedModel {
    pub w_hat: DVector<f64>,
    pub family: Family,
    pub trained_on: Subset,
    pub lambda: f64,
    pub projection_seed: Option<u64>,
}

fn gather_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}

/// Minimizer of ‖Fw − y‖² + cλ‖w‖² where c is the row count, via whichever
/// of the primal (cols × cols) or dual (rows × rows) system is smaller.
fn ridge_solve(f: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    let (rows, cols) = f.shape();
    let shift = rows as f64 * lambda;
    let w = if cols <= rows {
        let mut a = f.tr_mul(f);
        for i in 0..cols {
            a[(i, i)] += shift;
        }
        let rhs = f.tr_mul(y);
        let chol = a.cholesky().ok_or_else(|| Error::Factorization("primal ridge system not SPD".into()))?;
        chol.solve(&rhs)
    } else {
        let mut a = f * f.transpose();
        for i in 0..rows {
            a[(i, i)] += shift;
        }
        let chol = a.cholesky().ok_or_else(|| Error::Factorization("dual ridge system not SPD".into()))?;
        f.tr_mul(&chol.solve(y))
    };
    if w.iter().all(|v| v.is_finite()) {
        Ok(w)
    } else {
        Err(Error::Factorization("non-finite ridge solution".into()))
    }
}

fn check_fit_inputs(rows: &[usize], lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid(format!("fits need lambda > 0, got {lambda}")));
    }
    if rows.is_empty() {
        return Err(invalid("training subset is empty"));
    }
    Ok(())
}

/// Classical ridge: (XᵀX + ñλI)ŵ = XᵀY with ñ the subset size.
pub fn fit_classical(dataset: &Dataset, subset: Subset, lambda: f64) -> Result<FittedModel> {
    let rows = dataset.rows(subset);
    check_fit_inputs(&rows, lambda)?;
    let x = gather_rows(&dataset.x, &rows);
    let y = DVector::from_fn(rows.len(), |i, _| dataset.y[rows[i]]);
    let w_hat = ridge_solve(&x, &y, lambda)?;
    Ok(FittedModel { w_hat, family: Family::Classical, trained_on: subset, lambda, projection_seed: None })
}

/// d × m projection with N(0, 1/d) entries.
pub fn draw_projection(d: usize, m: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = stream(seed, Purpose::Projection);
    let scale = 1.0 / (d as f64).sqrt();
    let mut s = DMatrix::zeros(d, m);
    for i in 0..d {
        for j in 0..m {
            let z: f64 = rng.sample(StandardNormal);
            s[(i, j)] = z * scale;
        }
    }
    s
}

/// Random-projection ridge with a given projection S: ŵ = S(ZᵀZ + ñλI)⁻¹ZᵀY, Z = X S.
pub fn fit_rp_with_projection(
    dataset: &Dataset,
    subset: Subset,
    lambda: f64,
    projection: &DMatrix<f64>,
    projection_seed: Option<u64>,
) -> Result<FittedModel> {
    if projection.nrows() != dataset.d {
        return Err(invalid("projection rows differ from d"));
    }
    let z = &dataset.x * projection;
    fit_rp_from_features(dataset, subset, lambda, projection, &z, projection_seed)
}

fn fit_rp_from_features(
    dataset: &Dataset,
    subset: Subset,
    lambda: f64,
    projection: &DMatrix<f64>,
    z_all: &DMatrix<f64>,
    projection_seed: Option<u64>,
) -> Result<FittedModel> {
    let rows = dataset.rows(subset);
    check_fit_inputs(&rows, lambda)?;
    let z = gather_rows(z_all, &rows);
    let y = DVector::from_fn(rows.len(), |i, _| dataset.y[rows[i]]);
    let eta = ridge_solve(&z, &y, lambda)?;
    Ok(FittedModel {
        w_hat: projection * eta,
        family: Family::RandomProjection,
        trained_on: subset,
        lambda,
        projection_seed,
    })
}

pub fn fit_rp(dataset: &Dataset, subset: Subset, lambda: f64, m: usize, proj_seed: u64) -> Result<FittedModel> {
    if m == 0 {
        return Err(invalid("projection width m must be >= 1"));
    }
    let s = draw_projection(dataset.d, m, proj_seed);
    fit_rp_with_projection(dataset, subset, lambda, &s, Some(proj_seed))
}

/// ‖ŵ − w*_s‖²_{Σ_s}, exactly.
pub fn exact_risk(model: &FittedModel, dataset: &Dataset, spectrum: &JointSpectrum, s: Group) -> Result<f64> {
    if model.w_hat.len() != spectrum.d() || dataset.d != spectrum.d() {
        return Err(invalid("model, dataset and spectrum dimensions differ"));
    }
    let w = dataset.w_star(s);
    Ok(spectrum.sigma(s).iter().zip(model.w_hat.iter().zip(w.iter())).map(|(sg, (a, b))| sg * (a - b) * (a - b)).sum())
}

/// Test-sample estimate of the same risk: mean and standard error of
/// (xᵀ(ŵ − w*_s))² over `n_test` fresh x ~ N(0, Σ_s).
pub fn sampled_risk(
    model: &FittedModel,
    dataset: &Dataset,
    spectrum: &JointSpectrum,
    s: Group,
    n_test: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_test < 2 {
        return Err(invalid("need at least two test points"));
    }
    let diff = &model.w_hat - dataset.w_star(s);
    let sd: Vec<f64> = spectrum.sigma(s).iter().map(|v| v.sqrt()).collect();
    let mut rng = stream(seed, Purpose::TestPoints);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n_test {
        let mut dot = 0.0;
        for k in 0..diff.len() {
            let z: f64 = rng.sample(StandardNormal);
            dot += sd[k] * z * diff[k];
        }
        let v = dot * dot;
        sum += v;
        sum_sq += v * v;
    }
    let nf = n_test as f64;
    let mean = sum / nf;
    let var = (sum_sq - nf * mean * mean) / (nf - 1.0);
    Ok((mean, (var.max(0.0) / nf).sqrt()))
}

// ---------------------------------------------------------------------------
// Monte Carlo

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum McMode {
    /// Every replicate draws fresh weights, data, noise and projection.
    Flat,
    /// Weights drawn once per outer run; data, noise and projection per inner run.
    Nested { outer: usize, inner: usize },
}

#[derive(Clone, Debug)]
pub struct McConfig {
    pub spectrum: JointSpectrum,
    pub n: usize,
    pub p1: f64,
    pub noise: NoiseAndRegularization,
    pub family: Family,
    /// Projection width; required for random projections.
    pub m: Option<usize>,
    pub mode: McMode,
}

/// Four risks from one replicate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRisks {
    pub r1_joint: f64,
    pub r2_joint: f64,
    pub r1_sep: f64,
    pub r2_sep: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub std: f64,
    pub count: usize,
}

impl Stat {
    pub fn from_values(xs: &[f64]) -> Stat {
        let count = xs.len();
        if count == 0 {
            return Stat { mean: f64::NAN, std: f64::NAN, count };
        }
        let mean = xs.iter().sum::<f64>() / count as f64;
        let std = if count > 1 {
            (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (count - 1) as f64).sqrt()
        } else {
            f64::NAN
        };
        Stat { mean, std, count }
    }

    pub fn std_err(&self) -> f64 {
        self.std / (self.count as f64).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub r1_joint: Stat,
    pub r2_joint: Stat,
    pub r1_sep: Stat,
    pub r2_sep: Stat,
    pub odd: Stat,
    pub edd: Stat,
    /// Over replicates where the per-replicate EDD is nonzero.
    pub add: Stat,
    pub signed_odd: Stat,
    pub signed_edd: Stat,
    /// |mean signed ODD| / |mean signed EDD|.
    pub add_of_means: Option<f64>,
    pub replicates: Vec<ReplicateRisks>,
    /// Per-replicate data seeds, in replicate order.
    pub seeds: Vec<u64>,
    pub base_seed: u64,
}

const OUTER_SALT: u64 = 0x5851_F42D_4C95_7F2D;

fn run_replicate(cfg: &McConfig, data_seed: u64, weight_seed: u64) -> Result<ReplicateRisks> {
    let (w1, w2) = sample_weights(&cfg.spectrum, weight_seed);
    let ds = sample_dataset_with_weights(&cfg.spectrum, cfg.n, cfg.p1, &cfg.noise, w1, w2, data_seed)?;
    let (one, two) = (Group::One, Group::Two);
    let (joint, sep1, sep2) = match cfg.family {
        Family::Classical => (
            fit_classical(&ds, Subset::Both, cfg.noise.lambda_joint)?,
            fit_classical(&ds, Subset::Group(one), cfg.noise.lambda1)?,
            fit_classical(&ds, Subset::Group(two), cfg.noise.lambda2)?,
        ),
        Family::RandomProjection => {
            let m = cfg.m.ok_or_else(|| invalid("random projections need m"))?;
            if m == 0 {
                return Err(invalid("projection width m must be >= 1"));
            }
            let s = draw_projection(ds.d, m, data_seed);
            // Z = XS once; the per-group features are its rows.
            let z = &ds.x * &s;
            let seed = Some(data_seed);
            (
                fit_rp_from_features(&ds, Subset::Both, cfg.noise.lambda_joint, &s, &z, seed)?,
                fit_rp_from_features(&ds, Subset::Group(one), cfg.noise.lambda1, &s, &z, seed)?,
                fit_rp_from_features(&ds, Subset::Group(two), cfg.noise.lambda2, &s, &z, seed)?,
            )
        }
    };
    let sp = &cfg.spectrum;
    Ok(ReplicateRisks {
        r1_joint: exact_risk(&joint, &ds, sp, one)?,
        r2_joint: exact_risk(&joint, &ds, sp, two)?,
        r1_sep: exact_risk(&sep1, &ds, sp, one)?,
        r2_sep: exact_risk(&sep2, &ds, sp, two)?,
    })
}

/// Replicates run in parallel; aggregation is in replicate order, so the
/// report depends only on (config, replicates, base_seed).
pub fn monte_carlo(config: &McConfig, replicates: usize, base_seed: u64) -> Result<MonteCarloReport> {
    if replicates < 2 {
        return Err(invalid("monte carlo needs at least 2 replicates"));
    }
    config.noise.validate()?;
    let jobs: Vec<(u64, u64)> = match config.mode {
        McMode::Flat => (0..replicates as u64).map(|r| {
            let s = derive_seed(base_seed, r);
            (s, s)
        }).collect(),
        McMode::Nested { outer, inner } => {
            if outer * inner != replicates {
                return Err(invalid(format!("nested {outer}x{inner} does not match {replicates} replicates")));
            }
            (0..replicates as u64)
                .map(|r| (derive_seed(base_seed, r), derive_seed(base_seed ^ OUTER_SALT, r / inner as u64)))
                .collect()
        }
    };

    let results: Vec<Result<ReplicateRisks>> =
        jobs.par_iter().map(|&(data_seed, weight_seed)| run_replicate(config, data_seed, weight_seed)).collect();
    let mut reps = Vec::with_capacity(replicates);
    for (i, r) in results.into_iter().enumerate() {
        reps.push(r.map_err(|e| Error::Replicate { replicate: i, source: Box::new(e) })?);
    }

    let col = |f: fn(&ReplicateRisks) -> f64| reps.iter().map(f).collect::<Vec<_>>();
    let ms = reps
        .iter()
        .map(|r| metrics(r.r1_joint, r.r2_joint, r.r1_sep, r.r2_sep))
        .collect::<Result<Vec<_>>>()?;
    let signed_odd: Vec<f64> = ms.iter().map(|m| m.signed_odd).collect();
    let signed_edd: Vec<f64> = ms.iter().map(|m| m.signed_edd).collect();
    let so = Stat::from_values(&signed_odd);
    let se = Stat::from_values(&signed_edd);
    let add_of_means = if se.mean.abs() < crate::risk::EDD_ZERO { None } else { Some(so.mean.abs() / se.mean.abs()) };

    Ok(MonteCarloReport {
        r1_joint: Stat::from_values(&col(|r| r.r1_joint)),
        r2_joint: Stat::from_values(&col(|r| r.r2_joint)),
        r1_sep: Stat::from_values(&col(|r| r.r1_sep)),
        r2_sep: Stat::from_values(&col(|r| r.r2_sep)),
        odd: Stat::from_values(&ms.iter().map(|m| m.odd).collect::<Vec<_>>()),
        edd: Stat::from_values(&ms.iter().map(|m| m.edd).collect::<Vec<_>>()),
        add: Stat::from_values(&ms.iter().filter_map(|m| m.add).collect::<Vec<_>>()),
        signed_odd: so,
        signed_edd: se,
        add_of_means,
        replicates: reps,
        seeds: jobs.iter().map(|j| j.0).collect(),
        base_seed,
    })
}
