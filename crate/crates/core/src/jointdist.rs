//! Joint distribution of two correlated chi-square statistics.
//!
//! Two template test items computed on the same blocks produce statistics
//! `X = sum x_j^2` and `Y = sum y_j^2` where each `(x_j, y_j)` is standard
//! bivariate normal with correlation `rho`. The joint CDF is a series of
//! products of regularized incomplete gamma functions with negative-binomial
//! weights in `rho^2`; the weights sum to one and each gamma factor is at
//! most one, so the accumulated weight gives a rigorous truncation bound.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::specfun::{chi2_sf_inv, ln_gamma, reg_lower_gamma, SpecfunError};

/// Correlations this close to 1 in magnitude are rejected: the series
/// converges like `rho^(2r)` and becomes useless before it becomes wrong.
pub const RHO_LIMIT: f64 = 0.999_999;

/// Errors for the joint distribution routines.
#[derive(Debug, Error, PartialEq)]
pub enum JointDistError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error(
        "series did not reach tolerance within {terms} terms \
         (partial sum {partial}, residual weight bound {bound})"
    )]
    Convergence { partial: f64, bound: f64, terms: usize },
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
}

fn domain(msg: impl Into<String>) -> JointDistError {
    JointDistError::Domain(msg.into())
}

/// An even number of degrees of freedom, at least two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EvenDof(u32);

impl EvenDof {
    pub fn new(n: u32) -> Result<Self, JointDistError> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(domain(format!("degrees of freedom must be even and >= 2, got {n}")));
        }
        Ok(EvenDof(n))
    }

    #[inline]
    pub fn get(self) -> u32 {
        self.0
    }
}

/// Parameters of the bivariate distribution plus series controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointParams {
    dof: EvenDof,
    rho: f64,
    eps: f64,
    max_terms: usize,
}

impl JointParams {
    /// Default truncation tolerance.
    pub const DEFAULT_EPS: f64 = 1e-12;
    /// Default term cap.
    pub const DEFAULT_MAX_TERMS: usize = 10_000;

    pub fn new(dof: EvenDof, rho: f64) -> Result<Self, JointDistError> {
        if !rho.is_finite() || rho.abs() > RHO_LIMIT {
            return Err(domain(format!("|rho| must be at most {RHO_LIMIT}, got {rho}")));
        }
        Ok(JointParams { dof, rho, eps: Self::DEFAULT_EPS, max_terms: Self::DEFAULT_MAX_TERMS })
    }

    /// Overrides the truncation tolerance, which must be in (0, 1e-3).
    pub fn with_eps(mut self, eps: f64) -> Result<Self, JointDistError> {
        if eps.is_nan() || eps <= 0.0 || eps >= 1e-3 {
            return Err(domain(format!("eps must be in (0, 1e-3), got {eps}")));
        }
        self.eps = eps;
        Ok(self)
    }

    /// Overrides the series term cap.
    pub fn with_max_terms(mut self, max_terms: usize) -> Self {
        self.max_terms = max_terms.max(1);
        self
    }

    pub fn dof(&self) -> EvenDof {
        self.dof
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }
}

/// Walks `P(a, x), P(a + 1, x), ...` using
/// `P(a + 1, x) = P(a, x) - x^a e^{-x} / Gamma(a + 1)`,
/// so the whole series needs a single incomplete gamma evaluation.
struct GammaLadder {
    p: f64,
    correction: f64,
    a: f64,
    x: f64,
}

impl GammaLadder {
    fn new(a: f64, x: f64) -> Result<Self, JointDistError> {
        let p = reg_lower_gamma(a, x)?;
        let correction = if x == 0.0 {
            0.0
        } else {
            (a * x.ln() - x - ln_gamma(a + 1.0)).exp()
        };
        Ok(GammaLadder { p, correction, a, x })
    }

    #[inline]
    fn value(&self) -> f64 {
        self.p
    }

    #[inline]
    fn step(&mut self) {
        self.p = (self.p - self.correction).max(0.0);
        self.a += 1.0;
        self.correction *= self.x / self.a;
    }
}

/// Joint CDF `F(x, y) = Prob{X <= x and Y <= y}` for positive `x`, `y`.
pub fn joint_cdf(params: &JointParams, x: f64, y: f64) -> Result<f64, JointDistError> {
    joint_cdf_terms(params, x, y).map(|(f, _)| f)
}

/// Like [`joint_cdf`], also reporting how many series terms were summed.
pub fn joint_cdf_terms(
    params: &JointParams,
    x: f64,
    y: f64,
) -> Result<(f64, usize), JointDistError> {
    if !x.is_finite() || x <= 0.0 || !y.is_finite() || y <= 0.0 {
        return Err(domain(format!("arguments must be positive and finite, got ({x}, {y})")));
    }
    let rho_sq = params.rho * params.rho;
    let scale = 2.0 * (1.0 - rho_sq);
    let a = params.dof.get() as f64 / 2.0;
    let mut ladder_x = GammaLadder::new(a, x / scale)?;
    let mut ladder_y = GammaLadder::new(a, y / scale)?;
    let mut weight = (1.0 - rho_sq).powi((params.dof.get() / 2) as i32);
    let mut cumulative_weight = 0.0;
    let mut sum = 0.0;
    for r in 0..params.max_terms {
        // The gamma factors multiply first so the sum is exactly symmetric
        // in its arguments.
        sum += weight * (ladder_x.value() * ladder_y.value());
        cumulative_weight += weight;
        if 1.0 - cumulative_weight <= params.eps {
            return Ok((sum.min(1.0), r + 1));
        }
        weight *= rho_sq * (r as f64 + a) / (r as f64 + 1.0);
        ladder_x.step();
        ladder_y.step();
    }
    Err(JointDistError::Convergence {
        partial: sum,
        bound: 1.0 - cumulative_weight,
        terms: params.max_terms,
    })
}

/// Joint density at positive `(x, y)`, with relative truncation error below
/// the configured tolerance.
pub fn joint_pdf(params: &JointParams, x: f64, y: f64) -> Result<f64, JointDistError> {
    if !x.is_finite() || x <= 0.0 || !y.is_finite() || y <= 0.0 {
        return Err(domain(format!("arguments must be positive and finite, got ({x}, {y})")));
    }
    let rho_sq = params.rho * params.rho;
    let one_minus = 1.0 - rho_sq;
    let n = params.dof.get() as f64;
    let a = n / 2.0;
    let log_front = (a - 1.0) * (x.ln() + y.ln()) - (x + y) / (2.0 * one_minus)
        - n * std::f64::consts::LN_2
        - a * one_minus.ln()
        - ln_gamma(a);
    let q = rho_sq * x * y / (4.0 * one_minus * one_minus);
    let mut term = (log_front - ln_gamma(a)).exp();
    let mut sum = 0.0;
    for r in 0..params.max_terms {
        sum += term;
        let ratio = q / ((r as f64 + 1.0) * (r as f64 + a));
        if ratio < 1.0 {
            // Terms now shrink at least geometrically.
            let tail_bound = term * ratio / (1.0 - ratio);
            if tail_bound <= params.eps * sum.max(f64::MIN_POSITIVE) {
                return Ok(sum);
            }
        }
        term *= ratio;
    }
    Err(JointDistError::Convergence { partial: sum, bound: term, terms: params.max_terms })
}

/// `Prob{p1 > threshold1 and p2 > threshold2}` for the p-values of two
/// correlated test items: the joint CDF evaluated at the chi-square
/// quantiles of the thresholds.
pub fn joint_pvalue_tail(params: &JointParams, p1: f64, p2: f64) -> Result<f64, JointDistError> {
    for p in [p1, p2] {
        if p.is_nan() || p <= 0.0 || p > 1.0 {
            return Err(domain(format!("p-value thresholds must be in (0, 1], got {p}")));
        }
    }
    if p1 == 1.0 || p2 == 1.0 {
        return Ok(0.0);
    }
    let dof = params.dof.get();
    let x = chi2_sf_inv(dof, p1)?;
    let y = chi2_sf_inv(dof, p2)?;
    joint_cdf(params, x, y)
}

/// Probability that the p-value pair lands in the rectangle
/// `(p1_lo, p1_hi] x (p2_lo, p2_hi]`, by inclusion-exclusion over the tails.
pub fn cell_probability(
    params: &JointParams,
    p1_lo: f64,
    p1_hi: f64,
    p2_lo: f64,
    p2_hi: f64,
) -> Result<f64, JointDistError> {
    for (lo, hi) in [(p1_lo, p1_hi), (p2_lo, p2_hi)] {
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
            return Err(domain(format!("malformed p-value rectangle edge ({lo}, {hi}]")));
        }
    }
    let tail = |a: f64, b: f64| -> Result<f64, JointDistError> {
        // A zero threshold removes its constraint: the p-values are almost
        // surely positive, and each marginal p-value is uniform.
        if a >= 1.0 || b >= 1.0 {
            Ok(0.0)
        } else if a == 0.0 && b == 0.0 {
            Ok(1.0)
        } else if a == 0.0 {
            Ok(1.0 - b)
        } else if b == 0.0 {
            Ok(1.0 - a)
        } else {
            joint_pvalue_tail(params, a, b)
        }
    };
    let p = tail(p1_lo, p2_lo)? - tail(p1_hi, p2_lo)? - tail(p1_lo, p2_hi)?
        + tail(p1_hi, p2_hi)?;
    Ok(p.clamp(0.0, 1.0))
}

/// Monte Carlo sampler of correlated chi-square pairs, used as the
/// simulation oracle for [`joint_cdf`].
///
/// Each item is `(sum x_j^2, sum y_j^2)` over `dof` draws of a standard
/// bivariate normal pair with the configured correlation. The stream is
/// fully determined by the seed.
pub struct JointChiSqSampler {
    rng: ChaCha12Rng,
    dof: u32,
    rho: f64,
    residual: f64,
}

impl JointChiSqSampler {
    pub fn new(dof: EvenDof, rho: f64, seed: u64) -> Result<Self, JointDistError> {
        if !rho.is_finite() || rho.abs() >= 1.0 {
            return Err(domain(format!("|rho| must be below 1, got {rho}")));
        }
        Ok(JointChiSqSampler {
            rng: ChaCha12Rng::seed_from_u64(seed),
            dof: dof.get(),
            rho,
            residual: (1.0 - rho * rho).sqrt(),
        })
    }
}

impl Iterator for JointChiSqSampler {
    type Item = (f64, f64);

    fn next(&mut self) -> Option<(f64, f64)> {
        let mut x_sum = 0.0;
        let mut y_sum = 0.0;
        for _ in 0..self.dof {
            let x: f64 = StandardNormal.sample(&mut self.rng);
            let z: f64 = StandardNormal.sample(&mut self.rng);
            let y = self.rho * x + self.residual * z;
            x_sum += x * x;
            y_sum += y * y;
        }
        Some((x_sum, y_sum))
    }
}
