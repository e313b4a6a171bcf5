//! Gaussian-process regression (kriging) over geographic and socio-demographic features.
//!
//! Inputs are standardized per feature, targets are centered, and the kernel
//! is an ARD squared exponential plus a noise diagonal:
//!
//! `k(x, x') = s² exp(-½ Σ_d ((x_d - x'_d) / ℓ_d)²) + σ² [x = x']`
//!
//! Hyperparameters are fitted by gradient ascent on the per-point log
//! marginal likelihood in log-parameter space, halving the step whenever a
//! move would lower the likelihood. The noise variance is parameterized as
//! `jitter + exp(u)` so it never drops below the jitter floor.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::RegionId;
use crate::linalg;
use crate::scoring::ScoreTable;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GpError {
    #[error("need at least {need} training rows, have {have}")]
    TooFewRows { need: usize, have: usize },
    #[error("targets have zero variance")]
    ZeroTargetVariance,
    #[error("row {row} has {found} features, expected {expected}")]
    FeatureCount { row: usize, expected: usize, found: usize },
    #[error("row {0} has missing or non-finite features")]
    MissingFeature(usize),
    #[error("kernel matrix not positive definite even with jitter {0:e}")]
    Factorization(f64),
    #[error("non-finite log marginal likelihood at iteration {0}")]
    NonFinite(usize),
    #[error("feature row {region}: {reason}")]
    InvalidFeature { region: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpConfig {
    pub lr: f64,
    pub iters: usize,
    pub jitter: f64,
    pub seed: u64,
    /// Fit hyperparameters on a seeded random subset of at most this many rows.
    pub max_fit_points: Option<usize>,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            lr: 0.1,
            iters: 500,
            jitter: 1e-6,
            seed: 0,
            max_fit_points: Some(400),
        }
    }
}

/// Kernel hyperparameters in standardized feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters {
    pub length_scales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

const MAX_JITTER: f64 = 1e-2;
const MAX_HALVINGS: usize = 30;
const LOG_BOUND: f64 = 20.0;

/// Standardized training data, targets and kernel settings; no factorization.
#[derive(Debug, Clone)]
struct Problem {
    x: Vec<f64>,
    n: usize,
    d: usize,
    y: Vec<f64>,
    jitter: f64,
}

struct Factor {
    l: Vec<f64>,
    alpha: Vec<f64>,
    lml: f64,
    extra_jitter: f64,
}

impl Problem {
    fn kernel_signal(&self, hp: &Hyperparameters) -> Vec<f64> {
        let (n, d) = (self.n, self.d);
        let inv: Vec<f64> = hp.length_scales.iter().map(|l| 1.0 / l).collect();
        let mut k = alloc::vec![0.0; n * n];
        for i in 0..n {
            k[i * n + i] = hp.signal_variance;
            for j in 0..i {
                let mut s = 0.0;
                for t in 0..d {
                    let z = (self.x[i * d + t] - self.x[j * d + t]) * inv[t];
                    s += z * z;
                }
                let v = hp.signal_variance * libm::exp(-0.5 * s);
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        k
    }

    /// Factorizes `K + σ² I`, escalating jitter on failure.
    fn factor(&self, hp: &Hyperparameters, ksig: &[f64]) -> Result<Factor, GpError> {
        let n = self.n;
        let mut extra = 0.0;
        loop {
            let mut l = ksig.to_vec();
            for i in 0..n {
                l[i * n + i] += hp.noise_variance + extra;
            }
            if linalg::cholesky(&mut l, n) {
                let alpha = linalg::cho_solve(&l, n, &self.y);
                let fit: f64 = self.y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
                let logdet: f64 = (0..n).map(|i| libm::log(l[i * n + i])).sum();
                let lml = -0.5 * fit - logdet - 0.5 * n as f64 * libm::log(2.0 * core::f64::consts::PI);
                return Ok(Factor {
                    l,
                    alpha,
                    lml,
                    extra_jitter: extra,
                });
            }
            extra = if extra == 0.0 { self.jitter * 2.0 } else { extra * 2.0 };
            if extra > MAX_JITTER {
                return Err(GpError::Factorization(extra / 2.0));
            }
        }
    }

    /// Gradient of the log marginal likelihood w.r.t. `[log ℓ_1..d, log s², u]`.
    fn gradient(&self, hp: &Hyperparameters, ksig: &[f64], f: &Factor) -> Vec<f64> {
        let (n, d) = (self.n, self.d);
        let kinv = linalg::cho_inverse(&f.l, n);
        let mut g = alloc::vec![0.0; d + 2];
        let mut trace_w = 0.0;
        let inv2: Vec<f64> = hp.length_scales.iter().map(|l| 1.0 / (l * l)).collect();
        for i in 0..n {
            trace_w += f.alpha[i] * f.alpha[i] - kinv[i * n + i];
            g[d] += 0.5 * (f.alpha[i] * f.alpha[i] - kinv[i * n + i]) * ksig[i * n + i];
            for j in 0..i {
                // symmetric off-diagonal pairs counted twice
                let w = f.alpha[i] * f.alpha[j] - kinv[i * n + j];
                let wk = w * ksig[i * n + j];
                g[d] += wk;
                for t in 0..d {
                    let z = self.x[i * d + t] - self.x[j * d + t];
                    g[t] += wk * z * z * inv2[t];
                }
            }
        }
        g[d + 1] = 0.5 * (hp.noise_variance - self.jitter) * trace_w;
        g
    }
}

fn to_params(hp: &Hyperparameters, jitter: f64) -> Vec<f64> {
    let mut p: Vec<f64> = hp.length_scales.iter().map(|l| libm::log(*l)).collect();
    p.push(libm::log(hp.signal_variance));
    p.push(libm::log((hp.noise_variance - jitter).max(f64::MIN_POSITIVE)));
    p
}

fn from_params(p: &[f64], jitter: f64) -> Hyperparameters {
    let d = p.len() - 2;
    Hyperparameters {
        length_scales: p[..d].iter().map(|v| libm::exp(*v)).collect(),
        signal_variance: libm::exp(p[d]),
        noise_variance: jitter + libm::exp(p[d + 1]),
    }
}

/// Fitted GP with a cached factorization of the regularized kernel matrix.
#[derive(Debug, Clone)]
pub struct GpModel {
    n_features: usize,
    kept: Vec<usize>,
    dropped: Vec<usize>,
    means: Vec<f64>,
    sds: Vec<f64>,
    y_mean: f64,
    hyper: Hyperparameters,
    jitter: f64,
    extra_jitter: f64,
    x: Vec<f64>,
    n: usize,
    l: Vec<f64>,
    alpha: Vec<f64>,
    lml: f64,
    trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Variances below -1e-8 that were clamped to 0.
    pub clamped: usize,
}

fn check_rows(x: &[Vec<f64>]) -> Result<usize, GpError> {
    let d = x.first().map_or(0, Vec::len);
    for (i, row) in x.iter().enumerate() {
        if row.len() != d {
            return Err(GpError::FeatureCount {
                row: i,
                expected: d,
                found: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(GpError::MissingFeature(i));
        }
    }
    Ok(d)
}

fn variance(y: &[f64]) -> f64 {
    let m = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / y.len() as f64
}

struct Standardized {
    kept: Vec<usize>,
    dropped: Vec<usize>,
    means: Vec<f64>,
    sds: Vec<f64>,
}

fn standardize_params(x: &[Vec<f64>], d: usize) -> Standardized {
    let n = x.len() as f64;
    let mut s = Standardized {
        kept: Vec::new(),
        dropped: Vec::new(),
        means: Vec::new(),
        sds: Vec::new(),
    };
    for t in 0..d {
        let m = x.iter().map(|r| r[t]).sum::<f64>() / n;
        let sd = libm::sqrt(x.iter().map(|r| (r[t] - m) * (r[t] - m)).sum::<f64>() / n);
        if sd > 1e-12 * m.abs().max(1.0) {
            s.kept.push(t);
            s.means.push(m);
            s.sds.push(sd);
        } else {
            s.dropped.push(t);
        }
    }
    s
}

impl GpModel {
    fn standardize_row(&self, row: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (k, &t) in self.kept.iter().enumerate() {
            out.push((row[t] - self.means[k]) / self.sds[k]);
        }
    }

    /// Conditions a GP with fixed hyperparameters on the training data.
    ///
    /// `hyper.length_scales` must have one entry per non-constant feature.
    pub fn with_hyperparameters(
        x: &[Vec<f64>],
        y: &[f64],
        hyper: Hyperparameters,
        jitter: f64,
    ) -> Result<Self, GpError> {
        if x.is_empty() || x.len() != y.len() {
            return Err(GpError::TooFewRows { need: 1, have: x.len().min(y.len()) });
        }
        let d = check_rows(x)?;
        let st = standardize_params(x, d);
        let mut hyper = hyper;
        hyper.length_scales.resize(st.kept.len(), 1.0);
        hyper.noise_variance = hyper.noise_variance.max(jitter);
        Self::assemble(x, y, d, st, hyper, jitter, Vec::new())
    }

    fn assemble(
        x: &[Vec<f64>],
        y: &[f64],
        d: usize,
        st: Standardized,
        hyper: Hyperparameters,
        jitter: f64,
        trace: Vec<f64>,
    ) -> Result<Self, GpError> {
        let y_mean = y.iter().sum::<f64>() / y.len() as f64;
        let mut model = GpModel {
            n_features: d,
            kept: st.kept,
            dropped: st.dropped,
            means: st.means,
            sds: st.sds,
            y_mean,
            hyper,
            jitter,
            extra_jitter: 0.0,
            x: Vec::new(),
            n: x.len(),
            l: Vec::new(),
            alpha: Vec::new(),
            lml: 0.0,
            trace,
        };
        let mut buf = Vec::new();
        let mut flat = Vec::with_capacity(x.len() * model.kept.len());
        for row in x {
            model.standardize_row(row, &mut buf);
            flat.extend_from_slice(&buf);
        }
        let problem = Problem {
            x: flat,
            n: x.len(),
            d: model.kept.len(),
            y: y.iter().map(|v| v - y_mean).collect(),
            jitter,
        };
        let ksig = problem.kernel_signal(&model.hyper);
        let f = problem.factor(&model.hyper, &ksig)?;
        model.x = problem.x;
        model.l = f.l;
        model.alpha = f.alpha;
        model.lml = f.lml;
        model.extra_jitter = f.extra_jitter;
        Ok(model)
    }

    pub fn hyperparameters(&self) -> &Hyperparameters {
        &self.hyper
    }

    /// Indices of raw features kept after standardization.
    pub fn kept_features(&self) -> &[usize] {
        &self.kept
    }

    /// Indices of raw features with zero training variance.
    pub fn dropped_features(&self) -> &[usize] {
        &self.dropped
    }

    pub fn target_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.lml
    }

    /// Log marginal likelihood after each accepted optimization step (first = initial).
    pub fn likelihood_trace(&self) -> &[f64] {
        &self.trace
    }

    /// Jitter floor the noise variance is bounded by.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Extra diagonal added beyond the noise variance to factorize.
    pub fn extra_jitter(&self) -> f64 {
        self.extra_jitter
    }

    pub fn n_training(&self) -> usize {
        self.n
    }

    /// Posterior mean and latent-function variance at each query row.
    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Prediction, GpError> {
        let d = self.kept.len();
        let n = self.n;
        let inv: Vec<f64> = self.hyper.length_scales.iter().map(|l| 1.0 / l).collect();
        let mut out = Prediction {
            mean: Vec::with_capacity(rows.len()),
            variance: Vec::with_capacity(rows.len()),
            clamped: 0,
        };
        let mut z = Vec::new();
        let mut k = alloc::vec![0.0; n];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != self.n_features {
                return Err(GpError::FeatureCount {
                    row: r,
                    expected: self.n_features,
                    found: row.len(),
                });
            }
            if self.kept.iter().any(|&t| !row[t].is_finite()) {
                return Err(GpError::MissingFeature(r));
            }
            self.standardize_row(row, &mut z);
            for i in 0..n {
                let mut s = 0.0;
                for t in 0..d {
                    let dz = (z[t] - self.x[i * d + t]) * inv[t];
                    s += dz * dz;
                }
                k[i] = self.hyper.signal_variance * libm::exp(-0.5 * s);
            }
            let mean = self.y_mean + k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>();
            let mut v = k.clone();
            linalg::solve_lower(&self.l, n, &mut v);
            let mut var = self.hyper.signal_variance - v.iter().map(|x| x * x).sum::<f64>();
            if var < 0.0 {
                if var < -1e-8 {
                    out.clamped += 1;
                }
                var = 0.0;
            }
            out.mean.push(mean);
            out.variance.push(var);
        }
        Ok(out)
    }
}

/// Seeded choice of `k` distinct indices out of `n`, returned sorted.
fn sample_indices(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k.min(n) {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    idx.truncate(k.min(n));
    idx.sort_unstable();
    idx
}

/// Fits hyperparameters by marginal-likelihood ascent, then conditions on all rows.
pub fn fit_gp(x: &[Vec<f64>], y: &[f64], config: &GpConfig) -> Result<GpModel, GpError> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(GpError::TooFewRows {
            need: 2,
            have: x.len().min(y.len()),
        });
    }
    let d = check_rows(x)?;
    let var_y = variance(y);
    if !(var_y > 0.0) {
        return Err(GpError::ZeroTargetVariance);
    }
    let st = standardize_params(x, d);
    let jitter = config.jitter;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut perturb = |v: f64| v * (1.0 + rng.random_range(-0.1..=0.1));
    let mut hp = Hyperparameters {
        length_scales: (0..st.kept.len()).map(|_| perturb(1.0)).collect(),
        signal_variance: perturb(var_y),
        noise_variance: 0.0,
    };
    hp.noise_variance = jitter + perturb(0.1 * var_y);

    let fit_rows: Vec<usize> = match config.max_fit_points {
        Some(k) if k >= 2 && x.len() > k => sample_indices(x.len(), k, &mut rng),
        _ => (0..x.len()).collect(),
    };
    let dk = st.kept.len();
    let y_fit: Vec<f64> = fit_rows.iter().map(|&i| y[i]).collect();
    let y_fit_mean = y_fit.iter().sum::<f64>() / y_fit.len() as f64;
    let mut flat = Vec::with_capacity(fit_rows.len() * dk);
    for &i in &fit_rows {
        for (k, &t) in st.kept.iter().enumerate() {
            flat.push((x[i][t] - st.means[k]) / st.sds[k]);
        }
    }
    let problem = Problem {
        x: flat,
        n: fit_rows.len(),
        d: dk,
        y: y_fit.iter().map(|v| v - y_fit_mean).collect(),
        jitter,
    };
    let scale = 1.0 / problem.n as f64;

    let mut params = to_params(&hp, jitter);
    let mut ksig = problem.kernel_signal(&hp);
    let mut fac = problem.factor(&hp, &ksig)?;
    if !fac.lml.is_finite() {
        return Err(GpError::NonFinite(0));
    }
    let mut trace = alloc::vec![fac.lml];
    'outer: for iter in 1..=config.iters {
        let grad = problem.gradient(&hp, &ksig, &fac);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(GpError::NonFinite(iter));
        }
        let mut step = config.lr;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = params
                .iter()
                .zip(&grad)
                .map(|(p, g)| (p + step * g * scale).clamp(-LOG_BOUND, LOG_BOUND))
                .collect();
            let thp = from_params(&trial, jitter);
            let tk = problem.kernel_signal(&thp);
            if let Ok(tf) = problem.factor(&thp, &tk) {
                if tf.lml.is_finite() && tf.lml >= fac.lml {
                    params = trial;
                    hp = thp;
                    ksig = tk;
                    fac = tf;
                    trace.push(fac.lml);
                    continue 'outer;
                }
            }
            step *= 0.5;
        }
        // no ascent direction left at machine precision
        break;
    }
    let model = GpModel::assemble(x, y, d, st, hp, jitter, trace)?;
    if !model.lml.is_finite() {
        return Err(GpError::NonFinite(config.iters));
    }
    Ok(model)
}

/// Column names of the 11 socio-demographic interpolation features.
pub const SOCIO_COLUMNS: [&str; 11] = [
    "median_household_income",
    "pct_bachelors",
    "unemployment_rate",
    "hs_graduation_rate",
    "population_density",
    "median_age",
    "pct_rural",
    "pct_hispanic",
    "pct_female",
    "pct_married",
    "pct_african_american",
];

const PERCENT_COLUMNS: [usize; 8] = [1, 2, 3, 6, 7, 8, 9, 10];

/// County centroid and socio-demographic covariates; `NaN` marks a missing value.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub region: RegionId,
    pub lat: f64,
    pub lon: f64,
    pub socio: [f64; 11],
}

impl FeatureRow {
    /// `[lat, lon, socio...]`.
    pub fn values(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(13);
        v.push(self.lat);
        v.push(self.lon);
        v.extend_from_slice(&self.socio);
        v
    }

    pub fn is_complete(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }

    /// Range checks on present values.
    pub fn validate(&self) -> Result<(), GpError> {
        let bad = |reason: String| GpError::InvalidFeature {
            region: self.region.as_str().into(),
            reason,
        };
        if self.lat.is_finite() && !(-90.0..=90.0).contains(&self.lat) {
            return Err(bad(alloc::format!("latitude {} outside [-90, 90]", self.lat)));
        }
        if self.lon.is_finite() && !(-180.0..=180.0).contains(&self.lon) {
            return Err(bad(alloc::format!("longitude {} outside [-180, 180]", self.lon)));
        }
        for &c in &PERCENT_COLUMNS {
            let v = self.socio[c];
            if v.is_finite() && !(0.0..=100.0).contains(&v) {
                return Err(bad(alloc::format!("{} = {} outside [0, 100]", SOCIO_COLUMNS[c], v)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Observed,
    Interpolated,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Observed => "observed",
            Source::Interpolated => "interpolated",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolatedRow {
    pub region: RegionId,
    pub score: f64,
    /// Posterior variance; `None` for observed rows.
    pub variance: Option<f64>,
    pub source: Source,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapReason {
    /// Observed score but no feature row; excluded from training.
    ObservedWithoutFeatures,
    /// Observed score but incomplete features; excluded from training.
    ObservedIncompleteFeatures,
    /// No score and incomplete features; cannot be interpolated.
    IncompleteFeatures,
}

impl GapReason {
    pub fn as_str(self) -> &'static str {
        match self {
            GapReason::ObservedWithoutFeatures => "observed-without-features",
            GapReason::ObservedIncompleteFeatures => "observed-incomplete-features",
            GapReason::IncompleteFeatures => "incomplete-features",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Interpolation {
    pub rows: Vec<InterpolatedRow>,
    pub gaps: Vec<(RegionId, GapReason)>,
    /// `None` when nothing needed interpolating.
    pub model: Option<GpModel>,
    pub clamped_variances: usize,
}

/// Fits on observed regions, predicts every feature row without a score.
///
/// `scores` must hold a single construct. Observed rows keep their score;
/// interpolated rows carry the posterior mean and variance.
pub fn interpolate_missing(
    scores: &ScoreTable,
    features: &[FeatureRow],
    config: &GpConfig,
) -> Result<Interpolation, GpError> {
    use alloc::collections::BTreeMap;
    let observed: BTreeMap<&RegionId, f64> = scores.rows.iter().map(|r| (&r.region, r.score)).collect();
    let by_region: BTreeMap<&RegionId, &FeatureRow> = features.iter().map(|f| (&f.region, f)).collect();
    let mut gaps = Vec::new();
    let mut train_x = Vec::new();
    let mut train_y = Vec::new();
    for (&region, &score) in &observed {
        match by_region.get(region) {
            None => gaps.push((region.clone(), GapReason::ObservedWithoutFeatures)),
            Some(f) if !f.is_complete() => gaps.push((region.clone(), GapReason::ObservedIncompleteFeatures)),
            Some(f) => {
                train_x.push(f.values());
                train_y.push(score);
            }
        }
    }
    let mut query_ids = Vec::new();
    let mut query_x = Vec::new();
    for (&region, f) in &by_region {
        if observed.contains_key(region) {
            continue;
        }
        if f.is_complete() {
            query_ids.push(region.clone());
            query_x.push(f.values());
        } else {
            gaps.push((region.clone(), GapReason::IncompleteFeatures));
        }
    }
    gaps.sort_by(|a, b| a.0.cmp(&b.0));
    let mut rows: Vec<InterpolatedRow> = observed
        .iter()
        .map(|(&r, &s)| InterpolatedRow {
            region: r.clone(),
            score: s,
            variance: None,
            source: Source::Observed,
        })
        .collect();
    if query_x.is_empty() {
        return Ok(Interpolation {
            rows,
            gaps,
            model: None,
            clamped_variances: 0,
        });
    }
    let model = fit_gp(&train_x, &train_y, config)?;
    let pred = model.predict(&query_x)?;
    for ((region, mean), var) in query_ids.into_iter().zip(pred.mean).zip(pred.variance) {
        rows.push(InterpolatedRow {
            region,
            score: mean,
            variance: Some(var),
            source: Source::Interpolated,
        });
    }
    rows.sort_by(|a, b| a.region.cmp(&b.region));
    Ok(Interpolation {
        rows,
        gaps,
        model: Some(model),
        clamped_variances: pred.clamped,
    })
}

/// Held-out comparison of GP predictions against the training-mean constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Holdout {
    pub n_train: usize,
    pub n_test: usize,
    pub rmse_gp: f64,
    pub rmse_constant: f64,
}

/// Splits rows by a seeded shuffle, fits on `1 - test_fraction`, scores the rest.
pub fn holdout_rmse(x: &[Vec<f64>], y: &[f64], test_fraction: f64, config: &GpConfig) -> Result<Holdout, GpError> {
    let n = x.len();
    let n_test = libm::round((n as f64) * test_fraction.clamp(0.0, 1.0)) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0f_401d);
    let test = sample_indices(n, n_test, &mut rng);
    let mut is_test = alloc::vec![false; n];
    test.iter().for_each(|&i| is_test[i] = true);
    let (mut tx, mut ty, mut qx, mut qy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for i in 0..n {
        if is_test[i] {
            qx.push(x[i].clone());
            qy.push(y[i]);
        } else {
            tx.push(x[i].clone());
            ty.push(y[i]);
        }
    }
    if qx.is_empty() {
        return Err(GpError::TooFewRows { need: 1, have: 0 });
    }
    let model = fit_gp(&tx, &ty, config)?;
    let pred = model.predict(&qx)?;
    let mean_train = ty.iter().sum::<f64>() / ty.len() as f64;
    let rmse = |f: &dyn Fn(usize) -> f64| {
        libm::sqrt(qy.iter().enumerate().map(|(i, v)| (f(i) - v) * (f(i) - v)).sum::<f64>() / qy.len() as f64)
    };
    Ok(Holdout {
        n_train: tx.len(),
        n_test: qx.len(),
        rmse_gp: rmse(&|i| pred.mean[i]),
        rmse_constant: rmse(&|_| mean_train),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    fn hp1(ell: f64, s2: f64, n2: f64) -> Hyperparameters {
        Hyperparameters {
            length_scales: vec![ell],
            signal_variance: s2,
            noise_variance: n2,
        }
    }

    #[test]
    fn single_point_reproduced() {
        let m = GpModel::with_hyperparameters(&[vec![0.3, 2.0]], &[3.7], hp1(1.0, 1.0, 1e-6), 1e-6).unwrap();
        let p = m.predict(&[vec![0.3, 2.0]]).unwrap();
        assert_abs_diff_eq!(p.mean[0], 3.7, epsilon = 1e-6);
    }

    #[test]
    fn two_point_closed_form() {
        let x = [vec![0.0], vec![1.0]];
        let y = [1.0, 3.0];
        let (ell, s2, n2) = (0.7, 1.3, 0.05);
        let m = GpModel::with_hyperparameters(&x, &y, hp1(ell, s2, n2), 1e-9).unwrap();
        // standardized inputs are -1 and +1 (mean 0.5, sd 0.5)
        let kxx = |a: f64, b: f64| s2 * libm::exp(-0.5 * ((a - b) / ell) * ((a - b) / ell));
        let (a, c) = (s2 + n2, kxx(-1.0, 1.0));
        let det = a * a - c * c;
        let inv = [[a / det, -c / det], [-c / det, a / det]];
        let yc = [-1.0, 1.0];
        let q = 0.2; // raw 0.6
        let ks = [kxx(q, -1.0), kxx(q, 1.0)];
        let w = [
            inv[0][0] * ks[0] + inv[0][1] * ks[1],
            inv[1][0] * ks[0] + inv[1][1] * ks[1],
        ];
        let mean = 2.0 + w[0] * yc[0] + w[1] * yc[1];
        let var = s2 - (ks[0] * w[0] + ks[1] * w[1]);
        let p = m.predict(&[vec![0.6]]).unwrap();
        assert_abs_diff_eq!(p.mean[0], mean, epsilon = 1e-8);
        assert_abs_diff_eq!(p.variance[0], var, epsilon = 1e-8);
    }

    #[test]
    fn far_query_reverts_to_prior() {
        let x = [vec![0.0], vec![1.0], vec![2.0]];
        let y = [1.0, 2.0, 0.5];
        let m = GpModel::with_hyperparameters(&x, &y, hp1(0.5, 2.0, 0.01), 1e-6).unwrap();
        let p = m.predict(&[vec![100.0]]).unwrap();
        assert_abs_diff_eq!(p.mean[0], m.target_mean(), epsilon = 1e-9);
        assert_abs_diff_eq!(p.variance[0], 2.0, epsilon = 1e-9);
    }

    #[test]
    fn duplicated_rows_fit() {
        let x = vec![vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 2.0]];
        let y = [0.1, 0.1, 0.7, 0.3];
        let cfg = GpConfig {
            iters: 20,
            ..GpConfig::default()
        };
        let m = fit_gp(&x, &y, &cfg).unwrap();
        assert!(m.hyperparameters().noise_variance >= cfg.jitter);
    }

    #[test]
    fn constant_feature_dropped() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 5.0]).collect();
        let y: Vec<f64> = (0..6).map(|i| libm::sin(i as f64)).collect();
        let cfg = GpConfig {
            iters: 10,
            ..GpConfig::default()
        };
        let m = fit_gp(&x, &y, &cfg).unwrap();
        assert_eq!(m.dropped_features(), &[1]);
        assert_eq!(m.hyperparameters().length_scales.len(), 1);
        // the dropped column is ignored at prediction time
        let a = m.predict(&[vec![2.5, 5.0]]).unwrap();
        let b = m.predict(&[vec![2.5, -40.0]]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fit_rejects_bad_input() {
        assert!(matches!(fit_gp(&[vec![1.0]], &[1.0], &GpConfig::default()), Err(GpError::TooFewRows { .. })));
        assert_eq!(
            fit_gp(&[vec![1.0], vec![2.0]], &[1.0, 1.0], &GpConfig::default()).unwrap_err(),
            GpError::ZeroTargetVariance
        );
        assert!(matches!(
            fit_gp(&[vec![1.0], vec![f64::NAN]], &[1.0, 2.0], &GpConfig::default()),
            Err(GpError::MissingFeature(1))
        ));
    }

    #[test]
    fn feature_row_ranges() {
        let mut f = FeatureRow {
            region: RegionId::parse("01001").unwrap(),
            lat: 32.5,
            lon: -86.6,
            socio: [50_000.0, 25.0, 4.0, 88.0, 90.0, 38.0, 40.0, 3.0, 51.0, 50.0, 20.0],
        };
        assert!(f.validate().is_ok());
        assert!(f.is_complete());
        f.socio[1] = 130.0;
        assert!(f.validate().is_err());
        f.socio[1] = f64::NAN;
        assert!(f.validate().is_ok());
        assert!(!f.is_complete());
        f.lat = 91.0;
        assert!(f.validate().is_err());
    }
}
