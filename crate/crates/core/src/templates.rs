//! Templates, aperiodicity, overlap indicators and the inter-template
//! correlation coefficient.
//!
//! A template is a short bit pattern written left to right: the leftmost
//! character is the first bit compared against a window of the sequence
//! under test. `Template::parse("001")` therefore matches windows that read
//! `0, 0, 1` in stream order. Numerically the leftmost bit is the most
//! significant bit of [`Template::value`]; enumeration order is ascending
//! in that value. Some other tools print templates in the reversed
//! convention, so this one is worth stating.

use thiserror::Error;

/// Supported template lengths.
pub const MIN_TEMPLATE_LEN: u32 = 2;
/// Upper bound keeps pattern values inside a `u32` and histogram sizes sane.
pub const MAX_TEMPLATE_LEN: u32 = 24;

/// Errors for template construction and correlation.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    /// Length outside the supported range.
    #[error("unsupported template length {0}: must be {MIN_TEMPLATE_LEN}..={MAX_TEMPLATE_LEN}")]
    UnsupportedLength(u32),
    /// Pattern value does not fit in the stated length.
    #[error("pattern value {value:#x} does not fit in {len} bits")]
    ValueTooWide { value: u32, len: u32 },
    /// Text contained a character other than '0' or '1'.
    #[error("invalid template character {0:?}: expected '0' or '1'")]
    InvalidChar(char),
    /// The two templates have different lengths.
    #[error("template length mismatch: {0} vs {1}")]
    LengthMismatch(u32, u32),
    /// The correlation coefficient is only defined for distinct templates.
    #[error("correlation requires two distinct templates, got {0} twice")]
    IdenticalPair(Template),
    /// The operation requires an aperiodic template.
    #[error("template {0} is not aperiodic")]
    NotAperiodic(Template),
    /// The templates of a matrix must be pairwise distinct.
    #[error("duplicate template {0} in list")]
    DuplicateTemplate(Template),
    /// The default battery removal set is only defined for 9-bit templates.
    #[error("the default battery is only defined for m = 9, got m = {0}")]
    NoDefaultBattery(u32),
}

/// An `m`-bit pattern; bit 0 (leftmost in text form) is the most significant
/// bit of `value`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Template {
    len: u32,
    value: u32,
}

impl Template {
    /// Builds a template from a numeric pattern value.
    pub fn new(value: u32, len: u32) -> Result<Self, TemplateError> {
        if !(MIN_TEMPLATE_LEN..=MAX_TEMPLATE_LEN).contains(&len) {
            return Err(TemplateError::UnsupportedLength(len));
        }
        if value >> len != 0 {
            return Err(TemplateError::ValueTooWide { value, len });
        }
        Ok(Template { len, value })
    }

    /// Parses a pattern string such as `"001010101"`.
    pub fn parse(text: &str) -> Result<Self, TemplateError> {
        let len = text.len() as u32;
        if !(MIN_TEMPLATE_LEN..=MAX_TEMPLATE_LEN).contains(&len) {
            return Err(TemplateError::UnsupportedLength(len));
        }
        let mut value = 0u32;
        for c in text.chars() {
            value = (value << 1)
                | match c {
                    '0' => 0,
                    '1' => 1,
                    other => return Err(TemplateError::InvalidChar(other)),
                };
        }
        Ok(Template { len, value })
    }

    /// Pattern length in bits (always at least 2).
    #[inline]
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> u32 {
        self.len
    }

    /// Numeric pattern value; the leftmost bit of the text form is the MSB.
    #[inline]
    pub fn value(&self) -> u32 {
        self.value
    }

    /// True when no proper prefix of the pattern equals its same-length
    /// suffix, so a match can never overlap another match.
    pub fn is_aperiodic(&self) -> bool {
        let m = self.len;
        (1..m).all(|k| {
            let keep = m - k;
            let suffix = self.value & ((1u32 << keep) - 1);
            let prefix = self.value >> k;
            suffix != prefix
        })
    }
}

impl std::fmt::Display for Template {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in (0..self.len).rev() {
            write!(f, "{}", (self.value >> i) & 1)?;
        }
        Ok(())
    }
}

impl std::fmt::Debug for Template {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Template({self})")
    }
}

impl std::str::FromStr for Template {
    type Err = TemplateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Template::parse(s)
    }
}

impl serde::Serialize for Template {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for Template {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Template::parse(&text).map_err(serde::de::Error::custom)
    }
}

/// All aperiodic templates of length `m`, in ascending numeric order.
pub fn enumerate_aperiodic(m: u32) -> Result<Vec<Template>, TemplateError> {
    if !(MIN_TEMPLATE_LEN..=MAX_TEMPLATE_LEN).contains(&m) {
        return Err(TemplateError::UnsupportedLength(m));
    }
    Ok((0..1u32 << m)
        .filter_map(|value| {
            let t = Template { len: m, value };
            t.is_aperiodic().then_some(t)
        })
        .collect())
}

/// The standard 9-bit battery: the 148 aperiodic templates minus
/// `100000000`, `111111110` and `001010101`, whose counts are linearly
/// dependent on the rest and make the correlation matrix singular.
pub fn default_battery(m: u32) -> Result<Vec<Template>, TemplateError> {
    if m != 9 {
        return Err(TemplateError::NoDefaultBattery(m));
    }
    let removed = [
        Template::parse("100000000").unwrap(),
        Template::parse("111111110").unwrap(),
        Template::parse("001010101").unwrap(),
    ];
    Ok(enumerate_aperiodic(9)?
        .into_iter()
        .filter(|t| !removed.contains(t))
        .collect())
}

/// Shift-overlap indicators between two equal-length templates.
///
/// For shift `k` in `1..m`, the indicator is 1 when the first template's
/// leading `m - k` bits equal the second template's trailing `m - k` bits;
/// for negative shifts the roles swap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OverlapProfile {
    len: u32,
    /// `positive[k - 1]` holds the indicator for shift `k`.
    positive: Vec<bool>,
    /// `negative[k - 1]` holds the indicator for shift `-k`.
    negative: Vec<bool>,
}

impl OverlapProfile {
    /// Indicator for a nonzero shift `k` in `-(m-1)..=(m-1)`.
    ///
    /// # Panics
    /// Panics when `k` is zero or out of range.
    pub fn indicator(&self, k: i32) -> bool {
        let m = self.len as i32;
        assert!(k != 0 && k.abs() < m, "shift {k} out of range for m = {m}");
        if k > 0 {
            self.positive[(k - 1) as usize]
        } else {
            self.negative[(-k - 1) as usize]
        }
    }
}

/// Computes all `2(m-1)` overlap indicators for a template pair.
pub fn overlap_profile(t1: Template, t2: Template) -> Result<OverlapProfile, TemplateError> {
    if t1.len() != t2.len() {
        return Err(TemplateError::LengthMismatch(t1.len(), t2.len()));
    }
    let m = t1.len();
    let mut positive = Vec::with_capacity((m - 1) as usize);
    let mut negative = Vec::with_capacity((m - 1) as usize);
    for k in 1..m {
        let keep_mask = (1u32 << (m - k)) - 1;
        // Shift k: T1 leads, T2 trails by k positions.
        positive.push(t1.value() >> k == t2.value() & keep_mask);
        // Shift -k: T2 leads, T1 trails.
        negative.push(t1.value() & keep_mask == t2.value() >> k);
    }
    Ok(OverlapProfile { len: m, positive, negative })
}

/// Asymptotic correlation between the standardized per-block occurrence
/// counts of two distinct aperiodic templates.
///
/// The value is the exact rational
/// `(-2m + 1 + sum_k 2^(m-k) * (e_k + e_-k)) / (2^m - 2m + 1)` evaluated in
/// floating point; the finite-block remainder, which vanishes as the block
/// length grows, is dropped.
pub fn correlation(t1: Template, t2: Template) -> Result<f64, TemplateError> {
    if t1 == t2 {
        return Err(TemplateError::IdenticalPair(t1));
    }
    for t in [t1, t2] {
        if !t.is_aperiodic() {
            return Err(TemplateError::NotAperiodic(t));
        }
    }
    let profile = overlap_profile(t1, t2)?;
    let m = t1.len();
    let mut numerator: i64 = 1 - 2 * m as i64;
    for k in 1..m {
        let weight = 1i64 << (m - k);
        numerator += weight * (profile.indicator(k as i32) as i64);
        numerator += weight * (profile.indicator(-(k as i32)) as i64);
    }
    let denominator = (1i64 << m) - 2 * m as i64 + 1;
    Ok(numerator as f64 / denominator as f64)
}

/// Symmetric correlation matrix over an ordered template list.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    templates: Vec<Template>,
    /// Row-major `dim x dim` entries.
    data: Vec<f64>,
}

impl CorrelationMatrix {
    /// Builds the matrix with unit diagonal and pairwise correlations off it.
    pub fn build(templates: &[Template]) -> Result<Self, TemplateError> {
        for (i, t) in templates.iter().enumerate() {
            if templates[..i].contains(t) {
                return Err(TemplateError::DuplicateTemplate(*t));
            }
        }
        let dim = templates.len();
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
            for j in i + 1..dim {
                let rho = correlation(templates[i], templates[j])?;
                data[i * dim + j] = rho;
                data[j * dim + i] = rho;
            }
        }
        Ok(CorrelationMatrix { templates: templates.to_vec(), data })
    }

    /// Matrix dimension (template count).
    pub fn dim(&self) -> usize {
        self.templates.len()
    }

    /// The templates defining row and column order.
    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    /// Entry at `(row, col)`.
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.dim() + col]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.data
    }
}
