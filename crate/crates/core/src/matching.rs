//! The non-overlapping template matching test: occurrence counting,
//! theoretical moments, the chi-square statistic and its p-value, and
//! standardized count vectors for the whitening stage.
//!
//! Counting scans every window position; for an aperiodic template two
//! matches can never overlap, so this equals the count produced by
//! slide-on-match procedures.

use serde::Serialize;
use thiserror::Error;

use crate::bitstream::{BitSequence, BitstreamError};
use crate::specfun::{chi2_sf, SpecfunError};
use crate::templates::{Template, TemplateError};

/// Histogram counting keeps a table of `2^m` entries; beyond this length the
/// per-template scan is used instead.
pub const MAX_HISTOGRAM_LEN: u32 = 16;

/// Errors from the matching test pipeline.
#[derive(Debug, Error, PartialEq)]
pub enum MatchingError {
    #[error("block of {block_len} bits is shorter than the {template_len}-bit template")]
    BlockTooShort { block_len: usize, template_len: usize },
    #[error("template length must be at least 1")]
    ZeroTemplateLength,
    #[error("pattern histogram supports lengths up to {MAX_HISTOGRAM_LEN}, got {0}")]
    HistogramTooWide(u32),
    #[error("template list is empty")]
    EmptyTemplateList,
    #[error("templates must share one length, found {0} and {1}")]
    MixedTemplateLengths(u32, u32),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Bitstream(#[from] BitstreamError),
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
}

/// Counts the window positions of `block` at which the template occurs.
pub fn count_occurrences(block: &BitSequence, template: Template) -> Result<u64, MatchingError> {
    let m = template.len() as usize;
    let len = block.len();
    if len < m {
        return Err(MatchingError::BlockTooShort { block_len: len, template_len: m });
    }
    let mask = (1u64 << m) - 1;
    let target = template.value() as u64;
    let mut reg = 0u64;
    let mut count = 0u64;
    let mut seen = 0usize;
    #[cfg(debug_assertions)]
    let check_overlap = template.is_aperiodic();
    #[cfg(debug_assertions)]
    let mut last_match = usize::MAX;
    for (wi, &word) in block.words().iter().enumerate() {
        let nbits = (len - wi * 64).min(64);
        for b in 0..nbits {
            reg = ((reg << 1) | ((word >> (63 - b)) & 1)) & mask;
            seen += 1;
            if seen >= m && reg == target {
                #[cfg(debug_assertions)]
                if check_overlap {
                    let pos = seen - m;
                    debug_assert!(
                        last_match == usize::MAX || pos - last_match >= m,
                        "aperiodic template matched overlapping windows"
                    );
                    last_match = pos;
                }
                count += 1;
            }
        }
    }
    Ok(count)
}

/// Occurrence counts of every `m`-bit pattern in one pass: entry `v` of the
/// result is the window count of the pattern with value `v` (leftmost bit
/// most significant). Requires `m <= 16`.
pub fn pattern_histogram(block: &BitSequence, m: u32) -> Result<Vec<u64>, MatchingError> {
    if m == 0 {
        return Err(MatchingError::ZeroTemplateLength);
    }
    if m > MAX_HISTOGRAM_LEN {
        return Err(MatchingError::HistogramTooWide(m));
    }
    let m = m as usize;
    let len = block.len();
    if len < m {
        return Err(MatchingError::BlockTooShort { block_len: len, template_len: m });
    }
    let mask = (1u64 << m) - 1;
    let mut hist = vec![0u64; 1 << m];
    let mut reg = 0u64;
    let mut seen = 0usize;
    for (wi, &word) in block.words().iter().enumerate() {
        let nbits = (len - wi * 64).min(64);
        for b in 0..nbits {
            reg = ((reg << 1) | ((word >> (63 - b)) & 1)) & mask;
            seen += 1;
            if seen >= m {
                hist[reg as usize] += 1;
            }
        }
    }
    Ok(hist)
}

/// Occurrence count for each template of an equal-length list.
///
/// With several templates of moderate length a single histogram pass is far
/// cheaper than one scan per template; both paths count identically.
pub fn count_battery(block: &BitSequence, templates: &[Template]) -> Result<Vec<u64>, MatchingError> {
    let m = battery_len(templates)?;
    if templates.len() >= 2 && m <= MAX_HISTOGRAM_LEN {
        let hist = pattern_histogram(block, m)?;
        Ok(templates.iter().map(|t| hist[t.value() as usize]).collect())
    } else {
        templates.iter().map(|t| count_occurrences(block, *t)).collect()
    }
}

fn battery_len(templates: &[Template]) -> Result<u32, MatchingError> {
    let first = templates.first().ok_or(MatchingError::EmptyTemplateList)?;
    for t in templates {
        if t.len() != first.len() {
            return Err(MatchingError::MixedTemplateLengths(first.len(), t.len()));
        }
    }
    Ok(first.len())
}

/// Expected occurrence count per block: `(M - m + 1) / 2^m`.
pub fn theoretical_mu(block_len: usize, m: u32) -> Result<f64, MatchingError> {
    check_moment_args(block_len, m)?;
    Ok((block_len - m as usize + 1) as f64 / (1u64 << m) as f64)
}

/// Large-block variance of the occurrence count:
/// `M * (1/2^m - (2m - 1)/2^(2m))`.
pub fn theoretical_sigma_sq(block_len: usize, m: u32) -> Result<f64, MatchingError> {
    check_moment_args(block_len, m)?;
    let numerator = block_len as f64 * ((1u64 << m) as f64 - (2 * m - 1) as f64);
    Ok(numerator / (1u64 << (2 * m)) as f64)
}

fn check_moment_args(block_len: usize, m: u32) -> Result<(), MatchingError> {
    if m == 0 {
        return Err(MatchingError::ZeroTemplateLength);
    }
    if block_len < m as usize {
        return Err(MatchingError::BlockTooShort { block_len, template_len: m as usize });
    }
    Ok(())
}

/// Exact first two moments of the occurrence count of an aperiodic template
/// over a uniformly random block of `block_len` bits.
///
/// With `W = M - m + 1` windows the count has mean `W / 2^m` and variance
/// `(W * (2^m - 2m + 1) + m * (m - 1)) / 2^(2m)`; both are dyadic rationals
/// with small numerators, so the returned doubles are exact. Testing oracle
/// only; the test pipeline uses the large-block approximations above.
pub fn exact_count_moments(
    block_len: usize,
    m: u32,
    template: Template,
) -> Result<(f64, f64), MatchingError> {
    check_moment_args(block_len, m)?;
    if !template.is_aperiodic() {
        return Err(TemplateError::NotAperiodic(template).into());
    }
    let windows = (block_len - m as usize + 1) as f64;
    let pow_m = (1u64 << m) as f64;
    let pow_2m = (1u64 << (2 * m)) as f64;
    let mean = windows / pow_m;
    let variance =
        (windows * (pow_m - (2 * m - 1) as f64) + (m * (m - 1)) as f64) / pow_2m;
    Ok((mean, variance))
}

/// Full per-template outcome of the matching test on one sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestOutcome {
    pub template: Template,
    #[serde(rename = "N")]
    pub blocks: usize,
    #[serde(rename = "M")]
    pub block_len: usize,
    pub counts: Vec<u64>,
    pub mu: f64,
    pub sigma_sq: f64,
    pub chi_obs: f64,
    pub p_value: f64,
}

/// Runs the matching test: partition into `blocks` blocks, count template
/// occurrences per block, and compare against the theoretical moments with a
/// chi-square test on `blocks` degrees of freedom.
pub fn run_test(
    seq: &BitSequence,
    template: Template,
    blocks: usize,
) -> Result<TestOutcome, MatchingError> {
    if !template.is_aperiodic() {
        return Err(TemplateError::NotAperiodic(template).into());
    }
    let set = seq.partition(blocks)?;
    let m = template.len();
    let block_len = set.block_len();
    let mu = theoretical_mu(block_len, m)?;
    let sigma_sq = theoretical_sigma_sq(block_len, m)?;
    let counts: Vec<u64> = set
        .blocks()
        .iter()
        .map(|b| count_occurrences(b, template))
        .collect::<Result<_, _>>()?;
    let chi_obs: f64 = counts.iter().map(|&c| (c as f64 - mu).powi(2) / sigma_sq).sum();
    let p_value = chi2_sf(blocks as u32, chi_obs)?;
    Ok(TestOutcome {
        template,
        blocks,
        block_len,
        counts,
        mu,
        sigma_sq,
        chi_obs,
        p_value,
    })
}

/// Standardized per-block counts `(c - mu) / sigma` for a template battery.
///
/// Row `j` holds block `j`; column `r` corresponds to `templates()[r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedCounts {
    values: Vec<f64>,
    blocks: usize,
    block_len: usize,
    templates: Vec<Template>,
}

impl StandardizedCounts {
    /// Number of block rows.
    pub fn blocks(&self) -> usize {
        self.blocks
    }

    /// Block length the standardization used.
    pub fn block_len(&self) -> usize {
        self.block_len
    }

    /// Column order.
    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    /// Entry for block `j`, template column `r`.
    #[inline]
    pub fn get(&self, block: usize, column: usize) -> f64 {
        self.values[block * self.templates.len() + column]
    }

    /// One block row as a slice.
    #[inline]
    pub fn row(&self, block: usize) -> &[f64] {
        let w = self.templates.len();
        &self.values[block * w..(block + 1) * w]
    }

    /// Chi-square statistic of one column; equals the statistic of
    /// [`run_test`] for the same template.
    pub fn chi_obs(&self, column: usize) -> f64 {
        (0..self.blocks).map(|j| self.get(j, column).powi(2)).sum()
    }
}

/// Computes standardized counts for all templates over all blocks.
pub fn standardized_counts(
    seq: &BitSequence,
    templates: &[Template],
    blocks: usize,
) -> Result<StandardizedCounts, MatchingError> {
    let m = battery_len(templates)?;
    for t in templates {
        if !t.is_aperiodic() {
            return Err(TemplateError::NotAperiodic(*t).into());
        }
    }
    let set = seq.partition(blocks)?;
    let block_len = set.block_len();
    let mu = theoretical_mu(block_len, m)?;
    let sigma = theoretical_sigma_sq(block_len, m)?.sqrt();
    let mut values = Vec::with_capacity(blocks * templates.len());
    for block in set.blocks() {
        let counts = count_battery(block, templates)?;
        values.extend(counts.iter().map(|&c| (c as f64 - mu) / sigma));
    }
    Ok(StandardizedCounts { values, blocks, block_len, templates: templates.to_vec() })
}

/// Advisory note when the block length is too small for the normal
/// approximation to be trustworthy.
pub fn block_length_warning(block_len: usize, m: u32) -> Option<String> {
    let recommended = 100u64 << m;
    if (block_len as u64) < recommended {
        Some(format!(
            "block length {block_len} is below the recommended {recommended} bits \
             (100 * 2^{m}); the chi-square approximation may be inaccurate"
        ))
    } else {
        None
    }
}
