//! Validation statistics: correlations, internal consistency, bootstrap tests.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::RegionId;
use crate::scoring::ScoreTable;
use crate::special;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} paired observations, have {have}")]
    TooFew { need: usize, have: usize },
    #[error("zero variance")]
    ZeroVariance,
    #[error("need at least {need} items, have {have}")]
    TooFewItems { need: usize, have: usize },
    #[error("missing cell")]
    Missing,
    #[error("no units in common between scores and indicators")]
    NoOverlap,
    #[error("bootstrap aborted after {0} degenerate redraws")]
    BootstrapAborted(u64),
    #[error("too many indicator columns for exhaustive search ({0})")]
    TooManyColumns(usize),
}

/// Product-moment correlation with its two-sided t-test p-value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationResult {
    pub r: f64,
    pub p: f64,
    pub n: usize,
}

impl CorrelationResult {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p < alpha
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn is_constant(x: &[f64]) -> bool {
    x.windows(2).all(|w| w[0] == w[1])
}

/// Sample correlation, `None` when either series is constant or too short.
pub fn correlation(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 || is_constant(x) || is_constant(y) {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

/// Two-sided p-value for a correlation `r` over `n` observations.
pub fn correlation_p_value(r: f64, n: usize) -> f64 {
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = r * libm::sqrt(df) / libm::sqrt(1.0 - r * r);
    special::t_two_sided(t, df)
}

/// Pearson correlation of two equal-length series (n >= 3).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFew { need: 3, have: x.len() });
    }
    let r = correlation(x, y).ok_or(StatsError::ZeroVariance)?;
    Ok(CorrelationResult {
        r,
        p: correlation_p_value(r, x.len()),
        n: x.len(),
    })
}

/// [`pearson`] over the pairs where both values are present.
pub fn pearson_pairwise(x: &[Option<f64>], y: &[Option<f64>]) -> Result<CorrelationResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let (a, b): (Vec<f64>, Vec<f64>) = x
        .iter()
        .zip(y)
        .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
        .unzip();
    pearson(&a, &b)
}

fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// Cronbach's alpha over item columns (each column = one item across units).
pub fn cronbach_alpha<C: AsRef<[f64]>>(items: &[C]) -> Result<f64, StatsError> {
    let k = items.len();
    if k < 2 {
        return Err(StatsError::TooFewItems { need: 2, have: k });
    }
    let n = items[0].as_ref().len();
    for c in items {
        if c.as_ref().len() != n {
            return Err(StatsError::LengthMismatch(n, c.as_ref().len()));
        }
        if c.as_ref().iter().any(|v| !v.is_finite()) {
            return Err(StatsError::Missing);
        }
    }
    if n < 3 {
        return Err(StatsError::TooFew { need: 3, have: n });
    }
    let totals: Vec<f64> = (0..n).map(|i| items.iter().map(|c| c.as_ref()[i]).sum()).collect();
    let total_var = sample_variance(&totals);
    if !(total_var > 0.0) {
        return Err(StatsError::ZeroVariance);
    }
    let item_var: f64 = items.iter().map(|c| sample_variance(c.as_ref())).sum();
    let k = k as f64;
    Ok(k / (k - 1.0) * (1.0 - item_var / total_var))
}

/// State-level (or any unit-level) validation variables with missing cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IndicatorTable {
    pub units: Vec<RegionId>,
    pub names: Vec<String>,
    /// One column per name, aligned with `units`.
    pub columns: Vec<Vec<Option<f64>>>,
}

impl IndicatorTable {
    pub fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }
}

/// One evaluated indicator subset.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetCandidate {
    pub columns: Vec<String>,
    /// Units with no missing cell across the subset.
    pub n_units: usize,
    /// `None` when alpha is undefined for this subset (logged, skipped).
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSearch {
    pub best: Option<(Vec<String>, f64)>,
    pub candidates: Vec<SubsetCandidate>,
}

/// Cronbach's alpha of one subset with listwise deletion of incomplete units.
fn subset_alpha(table: &IndicatorTable, cols: &[usize]) -> (usize, Option<f64>) {
    let rows: Vec<usize> = (0..table.units.len())
        .filter(|&u| cols.iter().all(|&c| table.columns[c][u].is_some()))
        .collect();
    let items: Vec<Vec<f64>> = cols
        .iter()
        .map(|&c| rows.iter().map(|&u| table.columns[c][u].unwrap_or(f64::NAN)).collect())
        .collect();
    (rows.len(), cronbach_alpha(&items).ok())
}

/// Exhaustive search over column subsets of size >= `min_size` for the highest alpha.
///
/// Ties go to the smaller subset, then to the lexicographically smaller sorted
/// name list. Units missing any cell of a subset are dropped for that subset.
pub fn best_subset(table: &IndicatorTable, min_size: usize) -> Result<SubsetSearch, StatsError> {
    let m = table.names.len();
    let min_size = min_size.max(2);
    if m < min_size {
        return Err(StatsError::TooFewItems { need: min_size, have: m });
    }
    if m > 24 {
        return Err(StatsError::TooManyColumns(m));
    }
    let mut candidates = Vec::new();
    let mut best: Option<(Vec<String>, Vec<String>, f64)> = None;
    for mask in 1u32..(1u32 << m) {
        if (mask.count_ones() as usize) < min_size {
            continue;
        }
        let cols: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let names: Vec<String> = cols.iter().map(|&i| table.names[i].clone()).collect();
        let (n_units, alpha) = subset_alpha(table, &cols);
        if let Some(a) = alpha {
            let mut sorted = names.clone();
            sorted.sort();
            let better = match &best {
                None => true,
                Some((bn, bs, ba)) => {
                    a > *ba || (a == *ba && (names.len() < bn.len() || (names.len() == bn.len() && sorted < *bs)))
                }
            };
            if better {
                best = Some((names.clone(), sorted, a));
            }
        }
        candidates.push(SubsetCandidate {
            columns: names,
            n_units,
            alpha,
        });
    }
    Ok(SubsetSearch {
        best: best.map(|(n, _, a)| (n, a)),
        candidates,
    })
}

/// Correlations of one construct's scores with every indicator column.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub construct: String,
    /// One cell per indicator in table order; `None` when undefined.
    pub cells: Vec<(String, Option<CorrelationResult>)>,
    /// Mean r over the primary indicators with defined correlations.
    pub average_validity: Option<f64>,
}

/// Correlates each construct in `scores` with each indicator column.
///
/// Scores and indicators are joined on region id; missing indicator cells are
/// dropped pairwise. `primary` names the columns averaged into the validity
/// summary (all columns when empty).
pub fn validate_scores(
    scores: &ScoreTable,
    indicators: &IndicatorTable,
    primary: &[String],
) -> Result<Vec<ValidationRow>, StatsError> {
    let mut rows = Vec::new();
    for construct in scores.constructs() {
        let map = scores.score_map(&construct);
        let idx: Vec<(usize, f64)> = indicators
            .units
            .iter()
            .enumerate()
            .filter_map(|(i, u)| map.get(u).map(|s| (i, *s)))
            .collect();
        if idx.is_empty() {
            return Err(StatsError::NoOverlap);
        }
        let x: Vec<Option<f64>> = idx.iter().map(|&(_, s)| Some(s)).collect();
        let mut cells = Vec::new();
        for (name, col) in indicators.names.iter().zip(&indicators.columns) {
            let y: Vec<Option<f64>> = idx.iter().map(|&(i, _)| col[i]).collect();
            cells.push((name.clone(), pearson_pairwise(&x, &y).ok()));
        }
        let rs: Vec<f64> = cells
            .iter()
            .filter(|(n, _)| primary.is_empty() || primary.iter().any(|p| p == n))
            .filter_map(|(_, c)| c.map(|c| c.r))
            .collect();
        let average_validity = (!rs.is_empty()).then(|| mean(&rs));
        rows.push(ValidationRow {
            construct,
            cells,
            average_validity,
        });
    }
    Ok(rows)
}

/// Aligned `(a, b, indicator)` triples over units present in all three maps.
pub fn align3(
    a: &BTreeMap<RegionId, f64>,
    b: &BTreeMap<RegionId, f64>,
    indicator: &BTreeMap<RegionId, f64>,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut out = (Vec::new(), Vec::new(), Vec::new());
    for (k, &x) in a {
        if let (Some(&y), Some(&z)) = (b.get(k), indicator.get(k)) {
            out.0.push(x);
            out.1.push(y);
            out.2.push(z);
        }
    }
    out
}

/// Percentile bootstrap for the difference of two correlations with a shared indicator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub n_boot: usize,
    pub seed: u64,
    /// Two-sided confidence level, 0.95 by default.
    pub level: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            n_boot: 10_000,
            seed: 0,
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    /// `r(a, indicator) - r(b, indicator)` on the full sample.
    pub delta_r: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// CI excludes zero.
    pub significant: bool,
    pub n_boot: usize,
    pub redraws: u64,
}

/// Bootstrap inputs, validated once; replicates can be evaluated in any order.
#[derive(Debug, Clone)]
pub struct BootstrapPlan<'a> {
    a: &'a [f64],
    b: &'a [f64],
    indicator: &'a [f64],
    config: BootstrapConfig,
    delta_r: f64,
}

impl<'a> BootstrapPlan<'a> {
    pub fn new(a: &'a [f64], b: &'a [f64], indicator: &'a [f64], config: BootstrapConfig) -> Result<Self, StatsError> {
        let n = indicator.len();
        if a.len() != n || b.len() != n {
            return Err(StatsError::LengthMismatch(a.len().min(b.len()), n));
        }
        if n < 3 {
            return Err(StatsError::TooFew { need: 3, have: n });
        }
        let ra = correlation(a, indicator).ok_or(StatsError::ZeroVariance)?;
        let rb = correlation(b, indicator).ok_or(StatsError::ZeroVariance)?;
        Ok(Self {
            a,
            b,
            indicator,
            config,
            delta_r: ra - rb,
        })
    }

    pub fn config(&self) -> BootstrapConfig {
        self.config
    }

    fn redraw_cap(&self) -> u64 {
        100 * self.config.n_boot.max(1) as u64
    }

    /// Replicate `i`: its own ChaCha stream keyed by `(seed, i)`.
    ///
    /// Returns the correlation difference and how many degenerate resamples
    /// were redrawn first.
    pub fn replicate(&self, i: usize) -> Result<(f64, u64), StatsError> {
        let n = self.indicator.len();
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(i as u64);
        let (mut xa, mut xb, mut yi) = (alloc::vec![0.0; n], alloc::vec![0.0; n], alloc::vec![0.0; n]);
        let mut redraws = 0u64;
        loop {
            for j in 0..n {
                let k = rng.random_range(0..n);
                xa[j] = self.a[k];
                xb[j] = self.b[k];
                yi[j] = self.indicator[k];
            }
            if let (Some(ra), Some(rb)) = (correlation(&xa, &yi), correlation(&xb, &yi)) {
                return Ok((ra - rb, redraws));
            }
            redraws += 1;
            if redraws >= self.redraw_cap() {
                return Err(StatsError::BootstrapAborted(redraws));
            }
        }
    }

    /// Combines replicate outputs (in replicate order) into the CI.
    pub fn finish(&self, replicates: &[(f64, u64)]) -> Result<BootstrapResult, StatsError> {
        let redraws: u64 = replicates.iter().map(|r| r.1).sum();
        if redraws >= self.redraw_cap() {
            return Err(StatsError::BootstrapAborted(redraws));
        }
        let mut diffs: Vec<f64> = replicates.iter().map(|r| r.0).collect();
        diffs.sort_by(|x, y| x.total_cmp(y));
        let tail = (1.0 - self.config.level) / 2.0;
        let ci_low = quantile_sorted(&diffs, tail);
        let ci_high = quantile_sorted(&diffs, 1.0 - tail);
        Ok(BootstrapResult {
            delta_r: self.delta_r,
            ci_low,
            ci_high,
            significant: ci_low > 0.0 || ci_high < 0.0,
            n_boot: diffs.len(),
            redraws,
        })
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sequential bootstrap test of `r(a, ind) - r(b, ind)`.
pub fn bootstrap_corr_diff(
    a: &[f64],
    b: &[f64],
    indicator: &[f64],
    config: BootstrapConfig,
) -> Result<BootstrapResult, StatsError> {
    let plan = BootstrapPlan::new(a, b, indicator, config)?;
    let reps = (0..config.n_boot).map(|i| plan.replicate(i)).collect::<Result<Vec<_>, _>>()?;
    plan.finish(&reps)
}

/// `*` when p < 0.05.
pub fn star(c: &CorrelationResult) -> &'static str {
    if c.significant(0.05) {
        "*"
    } else {
        ""
    }
}

/// Convenience: unit → value map for one indicator column.
pub fn indicator_map(table: &IndicatorTable, name: &str) -> Option<BTreeMap<RegionId, f64>> {
    let col = table.column(name)?;
    Some(
        table
            .units
            .iter()
            .zip(col)
            .filter_map(|(u, v)| v.map(|v| (u.clone(), v)))
            .collect(),
    )
}
