//! Experiment runners: the joint p-value histogram of a template pair and
//! the rejection-count histogram of the whitened battery, at configurable
//! scale, with deterministic per-index seeding.
//!
//! Every run is a pure function of its configuration: sequence `i` always
//! comes from [`seed_for_index`] with the configured base seed, accumulation
//! happens over integers in index order, and the worker count only changes
//! scheduling, never results.

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bitstream::BitSequence;
use crate::generators::{seed_for_index, GeneratorKind};
use crate::jointdist::{cell_probability, EvenDof, JointDistError, JointParams};
use crate::matching::{block_length_warning, standardized_counts, MatchingError};
use crate::specfun::{chi2_sf, SpecfunError};
use crate::templates::{
    correlation, default_battery, CorrelationMatrix, Template, TemplateError,
};
use crate::whitening::{
    orthogonal_battery, raw_battery, WhiteningError, WhiteningTransform, DEFAULT_ZERO_TOL,
};

/// Errors from experiment configuration and execution.
#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("goodness-of-fit needs at least two bins with expected count >= 5")]
    DegenerateFit,
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error(transparent)]
    JointDist(#[from] JointDistError),
    #[error(transparent)]
    Whitening(#[from] WhiteningError),
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

fn config_error(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

/// Scale and seeding of an experiment run.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    /// Which generator produces the sequences.
    pub generator: GeneratorKind,
    /// Number of sequences (K).
    pub sequences: usize,
    /// Bits per sequence (n).
    pub sequence_bits: usize,
    /// Block count per sequence (N).
    pub blocks: usize,
    /// Grid resolution for joint p-value histograms (G).
    pub grid: usize,
    /// Rejection threshold for battery items.
    pub alpha: f64,
    /// Base seed; per-sequence seeds derive from it.
    pub base_seed: u64,
    /// Worker threads; 0 uses the default pool.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            generator: GeneratorKind::Mt19937,
            sequences: 20_000,
            sequence_bits: 100_000,
            blocks: 8,
            grid: 10,
            alpha: 0.01,
            base_seed: 42,
            workers: 0,
        }
    }
}

impl ExperimentConfig {
    fn validate(&self, template_len: u32) -> Result<(), ExperimentError> {
        if self.sequences == 0 {
            return Err(config_error("sequence count must be at least 1"));
        }
        if self.sequence_bits < self.blocks * template_len as usize {
            return Err(config_error(format!(
                "{} bits cannot hold {} blocks of at least {} bits",
                self.sequence_bits, self.blocks, template_len
            )));
        }
        if self.grid < 2 {
            return Err(config_error("grid resolution must be at least 2"));
        }
        if self.alpha.is_nan() || self.alpha <= 0.0 || self.alpha >= 1.0 {
            return Err(config_error(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }

    /// Runs `per_sequence` for every sequence index on a worker pool and
    /// returns the outputs in index order.
    fn map_sequences<T, F>(&self, per_sequence: F) -> Result<Vec<T>, ExperimentError>
    where
        T: Send,
        F: Fn(usize, BitSequence) -> Result<T, ExperimentError> + Sync,
    {
        let run = || {
            (0..self.sequences)
                .into_par_iter()
                .map(|i| {
                    let spec = seed_for_index(self.generator, self.base_seed, i as u64);
                    per_sequence(i, spec.generate(self.sequence_bits))
                })
                .collect()
        };
        if self.workers == 0 {
            run()
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(self.workers)
                .build()
                .map_err(|e| ExperimentError::ThreadPool(e.to_string()))?;
            pool.install(run)
        }
    }
}

/// Pearson goodness-of-fit result.
#[derive(Debug, Clone, Serialize)]
pub struct GoodnessOfFit {
    pub chi2: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Bins merged into the pooled remainder bucket.
    pub pooled_bins: usize,
}

/// Pearson chi-square of observed counts against fully specified expected
/// counts.
///
/// Bins with expected count below 5 are pooled into one remainder bucket;
/// if the pooled bucket itself stays below 5 it merges into the smallest
/// kept bin. Degrees of freedom are the final bin count minus one.
pub fn pearson_fit(observed: &[u64], expected: &[f64]) -> Result<GoodnessOfFit, ExperimentError> {
    assert_eq!(observed.len(), expected.len(), "bin count mismatch");
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0f64, 0.0f64);
    let mut pooled_bins = 0usize;
    for (&obs, &exp) in observed.iter().zip(expected) {
        if exp >= 5.0 {
            bins.push((obs as f64, exp));
        } else {
            pooled.0 += obs as f64;
            pooled.1 += exp;
            pooled_bins += 1;
        }
    }
    if pooled_bins > 0 {
        if pooled.1 >= 5.0 {
            bins.push(pooled);
        } else if let Some(smallest) = bins
            .iter_mut()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
        {
            smallest.0 += pooled.0;
            smallest.1 += pooled.1;
        }
    }
    if bins.len() < 2 {
        return Err(ExperimentError::DegenerateFit);
    }
    let chi2: f64 = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = bins.len() - 1;
    let p_value = chi2_sf(dof as u32, chi2)?;
    Ok(GoodnessOfFit { chi2, dof, p_value, pooled_bins })
}

/// Expected sequence counts per rejection count under independent items:
/// `total * Binomial(items, alpha)` probabilities for `k = 0..=items`.
pub fn binomial_expected(items: usize, alpha: f64, total: usize) -> Vec<f64> {
    let mut pmf = Vec::with_capacity(items + 1);
    let mut p = (1.0 - alpha).powi(items as i32);
    let odds = alpha / (1.0 - alpha);
    for k in 0..=items {
        pmf.push(p * total as f64);
        p *= odds * (items - k) as f64 / (k + 1) as f64;
    }
    pmf
}

/// Grid cell for a p-value: index `i` covers `(i/G, (i+1)/G]`, with zero
/// landing in the first cell.
fn cell_index(p: f64, grid: usize) -> usize {
    let scaled = (p * grid as f64).ceil() as isize - 1;
    scaled.max(0).min(grid as isize - 1) as usize
}

/// Kolmogorov-Smirnov distance between a sample and the uniform
/// distribution on [0, 1].
pub fn ks_uniform_statistic(p_values: &[f64]) -> f64 {
    let mut sorted = p_values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let hi = (i + 1) as f64 / n - x;
        let lo = x - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    d
}

fn sha256_hex(parts: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Stable digest of an ordered template list.
pub fn template_list_hash(templates: &[Template]) -> String {
    let joined = templates.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",");
    sha256_hex(&[joined.as_bytes()])
}

/// Stable digest of a whitening transform's JSON form.
pub fn transform_hash(transform: &WhiteningTransform) -> String {
    let json = serde_json::to_string(transform).expect("transform serializes");
    sha256_hex(&[json.as_bytes()])
}

/// One template pair's joint p-value histogram against theory.
#[derive(Debug, Clone, Serialize)]
pub struct JointHistogramReport {
    pub config: ExperimentConfig,
    pub template_pair: [Template; 2],
    pub rho: f64,
    /// Row-major `G x G` empirical cell counts; entry `(i, j)` covers
    /// p1 in `(i/G, (i+1)/G]` and p2 in `(j/G, (j+1)/G]`.
    pub counts: Vec<Vec<u64>>,
    /// Matching theoretical cell probabilities.
    pub theory: Vec<Vec<f64>>,
    /// Pearson residuals `(obs - exp) / sqrt(exp)` per cell.
    pub residuals: Vec<Vec<f64>>,
    pub fit: GoodnessOfFit,
    pub template_hash: String,
    pub warnings: Vec<String>,
}

impl JointHistogramReport {
    /// Empirical frequency of the cell where both p-values exceed
    /// `(G-1)/G`, the top corner of the grid.
    pub fn corner_frequency(&self) -> f64 {
        let g = self.config.grid;
        self.counts[g - 1][g - 1] as f64 / self.config.sequences as f64
    }

    /// Theoretical probability of the same corner cell.
    pub fn corner_theory(&self) -> f64 {
        let g = self.config.grid;
        self.theory[g - 1][g - 1]
    }
}

/// Runs both template tests on every generated sequence and bins the
/// p-value pairs on a `G x G` grid, alongside the theoretical cell
/// probabilities derived from the pair's correlation.
pub fn run_joint_histogram(
    config: &ExperimentConfig,
    t1: Template,
    t2: Template,
) -> Result<JointHistogramReport, ExperimentError> {
    let rho = correlation(t1, t2)?;
    config.validate(t1.len())?;
    let g = config.grid;
    let dof = EvenDof::new(u32::try_from(config.blocks).map_err(|_| {
        config_error(format!("block count {} out of range", config.blocks))
    })?)?;
    let params = JointParams::new(dof, rho)?;

    let mut theory = vec![vec![0.0f64; g]; g];
    for i in 0..g {
        for j in 0..g {
            theory[i][j] = cell_probability(
                &params,
                i as f64 / g as f64,
                (i + 1) as f64 / g as f64,
                j as f64 / g as f64,
                (j + 1) as f64 / g as f64,
            )?;
        }
    }

    let templates = [t1, t2];
    let blocks = config.blocks;
    let cells: Vec<(usize, usize)> = config.map_sequences(|_, seq| {
        let std = standardized_counts(&seq, &templates, blocks)?;
        let p1 = chi2_sf(blocks as u32, std.chi_obs(0))?;
        let p2 = chi2_sf(blocks as u32, std.chi_obs(1))?;
        Ok((cell_index(p1, g), cell_index(p2, g)))
    })?;
    let mut counts = vec![vec![0u64; g]; g];
    for (i, j) in cells {
        counts[i][j] += 1;
    }

    let k = config.sequences as f64;
    let mut residuals = vec![vec![0.0f64; g]; g];
    for i in 0..g {
        for j in 0..g {
            let exp = k * theory[i][j];
            residuals[i][j] = if exp > 0.0 {
                (counts[i][j] as f64 - exp) / exp.sqrt()
            } else {
                0.0
            };
        }
    }

    let flat_obs: Vec<u64> = counts.iter().flatten().copied().collect();
    let flat_exp: Vec<f64> = theory.iter().flatten().map(|p| p * k).collect();
    let fit = pearson_fit(&flat_obs, &flat_exp)?;

    let mut warnings = Vec::new();
    if let Some(w) = block_length_warning(config.sequence_bits / blocks, t1.len()) {
        warnings.push(w);
    }

    Ok(JointHistogramReport {
        config: config.clone(),
        template_pair: [t1, t2],
        rho,
        counts,
        theory,
        residuals,
        fit,
        template_hash: template_list_hash(&templates),
        warnings,
    })
}

/// Rejection-count histogram of the default battery against the
/// independent-items binomial expectation.
#[derive(Debug, Clone, Serialize)]
pub struct RejectionReport {
    pub config: ExperimentConfig,
    pub orthogonalized: bool,
    pub battery_size: usize,
    /// `histogram[k]` counts sequences rejected by exactly `k` items.
    pub histogram: Vec<u64>,
    /// `Binomial(battery_size, alpha)` expectations scaled by the sequence
    /// count.
    pub expected: Vec<f64>,
    pub mean_rejections: f64,
    pub fit: GoodnessOfFit,
    pub template_hash: String,
    pub transform_hash: Option<String>,
    pub warnings: Vec<String>,
}

/// Builds the whitening transform for the default 9-bit battery.
pub fn default_battery_transform() -> Result<(Vec<Template>, WhiteningTransform), ExperimentError> {
    default_battery_transform_with_tol(DEFAULT_ZERO_TOL)
}

/// Same as [`default_battery_transform`] with an explicit zero-eigenvalue
/// tolerance.
pub fn default_battery_transform_with_tol(
    tol: f64,
) -> Result<(Vec<Template>, WhiteningTransform), ExperimentError> {
    let battery = default_battery(9)?;
    let removed = vec![
        Template::parse("100000000").unwrap(),
        Template::parse("111111110").unwrap(),
        Template::parse("001010101").unwrap(),
    ];
    let sigma = CorrelationMatrix::build(&battery)?;
    let transform = WhiteningTransform::build(&sigma, tol)?.with_removed(removed);
    Ok((battery, transform))
}

/// Counts per-sequence battery rejections, raw or whitened, and fits the
/// histogram against the binomial expectation that holds when items are
/// independent.
pub fn run_rejection_histogram(
    config: &ExperimentConfig,
    orthogonalize: bool,
) -> Result<RejectionReport, ExperimentError> {
    config.validate(9)?;
    let (battery, transform) = if orthogonalize {
        let (battery, transform) = default_battery_transform()?;
        (battery, Some(transform))
    } else {
        (default_battery(9)?, None)
    };
    let r = battery.len();
    let alpha = config.alpha;
    let blocks = config.blocks;

    let rejections: Vec<usize> = config.map_sequences(|_, seq| {
        let p_values = match &transform {
            Some(tr) => orthogonal_battery(&seq, &battery, blocks, tr)?.item_p_values,
            None => raw_battery(&seq, &battery, blocks)?,
        };
        Ok(p_values.iter().filter(|&&p| p < alpha).count())
    })?;

    let mut histogram = vec![0u64; r + 1];
    for k in &rejections {
        histogram[*k] += 1;
    }
    let expected = binomial_expected(r, alpha, config.sequences);
    let fit = pearson_fit(&histogram, &expected)?;
    let mean_rejections =
        rejections.iter().sum::<usize>() as f64 / config.sequences as f64;

    let mut warnings = Vec::new();
    if let Some(w) = block_length_warning(config.sequence_bits / blocks, 9) {
        warnings.push(w);
    }

    Ok(RejectionReport {
        config: config.clone(),
        orthogonalized: orthogonalize,
        battery_size: r,
        histogram,
        expected,
        mean_rejections,
        fit,
        template_hash: template_list_hash(&battery),
        transform_hash: transform.as_ref().map(transform_hash),
        warnings,
    })
}

/// One test item of a battery report.
#[derive(Debug, Clone, Serialize)]
pub struct BatteryItem {
    pub index: usize,
    /// The template behind a raw item; whitened items mix all templates and
    /// are indexed by eigen-order instead.
    pub template: Option<Template>,
    pub p_value: f64,
    pub reject: bool,
}

/// Battery run on user-supplied data.
#[derive(Debug, Clone, Serialize)]
pub struct BatteryReport {
    pub blocks: usize,
    pub block_len: usize,
    pub alpha: f64,
    pub orthogonalized: bool,
    pub items: Vec<BatteryItem>,
    pub rejections: usize,
    pub template_hash: String,
    pub transform_hash: Option<String>,
    pub warnings: Vec<String>,
}

/// Applies a template battery, plain or whitened, to one sequence.
pub fn run_battery(
    seq: &BitSequence,
    templates: &[Template],
    blocks: usize,
    alpha: f64,
    transform: Option<&WhiteningTransform>,
) -> Result<BatteryReport, ExperimentError> {
    if alpha.is_nan() || alpha <= 0.0 || alpha >= 1.0 {
        return Err(config_error(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let p_values = match transform {
        Some(tr) => orthogonal_battery(seq, templates, blocks, tr)?.item_p_values,
        None => raw_battery(seq, templates, blocks)?,
    };
    let items: Vec<BatteryItem> = p_values
        .iter()
        .enumerate()
        .map(|(index, &p_value)| BatteryItem {
            index,
            template: if transform.is_none() { Some(templates[index]) } else { None },
            p_value,
            reject: p_value < alpha,
        })
        .collect();
    let rejections = items.iter().filter(|i| i.reject).count();
    let block_len = seq.len() / blocks;
    let mut warnings = Vec::new();
    if let Some(t) = templates.first() {
        if let Some(w) = block_length_warning(block_len, t.len()) {
            warnings.push(w);
        }
    }
    Ok(BatteryReport {
        blocks,
        block_len,
        alpha,
        orthogonalized: transform.is_some(),
        items,
        rejections,
        template_hash: template_list_hash(templates),
        transform_hash: transform.map(transform_hash),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitstream::BitOrder;

    fn t(s: &str) -> Template {
        Template::parse(s).unwrap()
    }

    #[test]
    fn cell_index_edges() {
        assert_eq!(cell_index(0.0, 10), 0);
        assert_eq!(cell_index(0.05, 10), 0);
        assert_eq!(cell_index(0.1, 10), 0);
        assert_eq!(cell_index(0.1000001, 10), 1);
        assert_eq!(cell_index(0.95, 10), 9);
        assert_eq!(cell_index(1.0, 10), 9);
    }

    #[test]
    fn binomial_expectation_sums_to_total() {
        let expected = binomial_expected(145, 0.01, 10_000);
        let total: f64 = expected.iter().sum();
        assert!((total - 10_000.0).abs() < 1e-6);
        // Mean rejections under independence.
        let mean: f64 =
            expected.iter().enumerate().map(|(k, e)| k as f64 * e).sum::<f64>() / 10_000.0;
        assert!((mean - 1.45).abs() < 1e-9);
    }

    #[test]
    fn pearson_fit_perfect_match() {
        let observed = [100u64, 200, 300];
        let expected = [100.0, 200.0, 300.0];
        let fit = pearson_fit(&observed, &expected).unwrap();
        assert_eq!(fit.chi2, 0.0);
        assert_eq!(fit.dof, 2);
        assert_eq!(fit.p_value, 1.0);
    }

    #[test]
    fn pearson_fit_pools_sparse_bins() {
        let observed = [50u64, 50, 2, 1, 1];
        let expected = [48.0, 50.0, 2.0, 2.0, 2.0];
        let fit = pearson_fit(&observed, &expected).unwrap();
        // Three sparse bins pool into one bucket of expected 6.
        assert_eq!(fit.pooled_bins, 3);
        assert_eq!(fit.dof, 2);
    }

    #[test]
    fn pearson_fit_rejects_degenerate() {
        assert!(matches!(
            pearson_fit(&[1, 1], &[1.0, 1.0]),
            Err(ExperimentError::DegenerateFit)
        ));
    }

    #[test]
    fn ks_statistic_on_perfect_grid() {
        // Midpoint lattice minimizes the distance at 1/(2n).
        let n = 100;
        let sample: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_uniform_statistic(&sample);
        assert!((d - 0.005).abs() < 1e-12);
    }

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            sequences: 300,
            sequence_bits: 40_000,
            grid: 5,
            base_seed: 7,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn joint_histogram_structural_invariants() {
        let config = small_config();
        let report =
            run_joint_histogram(&config, t("001010101"), t("010101011")).unwrap();
        let total: u64 = report.counts.iter().flatten().sum();
        assert_eq!(total, config.sequences as u64);
        let theory_total: f64 = report.theory.iter().flatten().sum();
        assert!((theory_total - 1.0).abs() < 1e-9);
        assert!((report.rho - 0.652525).abs() < 1e-6);
        assert!(!report.warnings.is_empty(), "desk-scale blocks warrant a warning");
    }

    #[test]
    fn joint_histogram_worker_count_invariant() {
        let mut config = small_config();
        config.sequences = 120;
        config.workers = 1;
        let a = run_joint_histogram(&config, t("001010101"), t("010101011")).unwrap();
        config.workers = 2;
        let b = run_joint_histogram(&config, t("001010101"), t("010101011")).unwrap();
        // Everything but the echoed worker count must be identical.
        assert_eq!(a.counts, b.counts);
        assert_eq!(a.theory, b.theory);
        assert_eq!(a.residuals, b.residuals);
        assert_eq!(a.fit.chi2, b.fit.chi2);
        assert_eq!(a.template_hash, b.template_hash);
    }

    #[test]
    fn joint_histogram_rejects_identical_pair() {
        let config = small_config();
        assert!(run_joint_histogram(&config, t("001010101"), t("001010101")).is_err());
    }

    #[test]
    fn rejection_histogram_structural_invariants() {
        let config = ExperimentConfig {
            sequences: 60,
            sequence_bits: 40_000,
            base_seed: 3,
            ..ExperimentConfig::default()
        };
        let report = run_rejection_histogram(&config, false).unwrap();
        assert_eq!(report.battery_size, 145);
        assert_eq!(report.histogram.iter().sum::<u64>(), 60);
        assert_eq!(report.histogram.len(), 146);
        let expected_total: f64 = report.expected.iter().sum();
        assert!((expected_total - 60.0).abs() < 1e-6);
        assert!(report.transform_hash.is_none());
    }

    #[test]
    fn battery_report_on_degenerate_input() {
        let zeros = BitSequence::from_bytes(&vec![0u8; 125_000], BitOrder::MsbFirst);
        let battery = default_battery(9).unwrap();
        let report = run_battery(&zeros, &battery, 8, 0.01, None).unwrap();
        let ones_template = battery.iter().position(|t| t.to_string() == "000000001").unwrap();
        let item = &report.items[ones_template];
        assert!(item.p_value < 1e-300);
        assert!(item.reject);
        // Identical invocation produces an identical report.
        let again = run_battery(&zeros, &battery, 8, 0.01, None).unwrap();
        assert_eq!(
            serde_json::to_string(&report).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
    }

    #[test]
    fn battery_report_too_short_input() {
        let tiny = BitSequence::from_bytes(&[0xAB, 0xCD], BitOrder::MsbFirst);
        let battery = default_battery(9).unwrap();
        assert!(run_battery(&tiny, &battery, 8, 0.01, None).is_err());
    }
}
