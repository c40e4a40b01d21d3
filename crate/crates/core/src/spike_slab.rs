//! The scalar spike-and-slab inference kernel.
//!
//! Every coefficient update reduces to one standardized problem: a N(u, 1)
//! observation `s` of a latent u drawn from (1-w)*delta_0 + w*Laplace(alpha).
//! This module computes the marginal slab density, the posterior nonzero
//! probability, and the posterior median of u.
//!
//! The slab marginal has the closed form
//!
//! ```text
//! g(s) = (alpha/2) exp(alpha^2/2) [ exp(-alpha|s|) Phi(|s|-alpha)
//!                                 + exp( alpha|s|) Phi(-|s|-alpha) ]
//! ```
//!
//! and the positive-median equation Phi(|s|-alpha-m) = q with
//!
//! ```text
//! q = Phi(|s|-alpha)/2 + exp(2 alpha |s| + log Phi(-|s|-alpha))/2
//!   + ((1-w)/(w alpha)) phi(|s|-alpha).
//! ```
//!
//! All tail quantities are evaluated in the log domain so the kernel stays
//! finite for arbitrarily large |s|. The quadrature oracle in the test suite
//! is the correctness authority for all of this.

use crate::normal;

/// One standardized coefficient problem: statistic, mixing weight, slab scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdProblem {
    /// Standardized sufficient statistic.
    pub s: f64,
    /// Prior inclusion probability, in [0,1].
    pub w: f64,
    /// Laplace slab scale, > 0.
    pub alpha: f64,
}

impl ThresholdProblem {
    pub fn new(s: f64, w: f64, alpha: f64) -> Self {
        assert!(s.is_finite(), "statistic must be finite");
        assert!((0.0..=1.0).contains(&w), "weight must be in [0,1], got {w}");
        assert!(alpha > 0.0, "alpha must be positive, got {alpha}");
        Self { s, w, alpha }
    }
}

/// Posterior summary of the standardized problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSolution {
    /// Posterior median of u; exactly zero inside the threshold region.
    pub median: f64,
    /// Posterior P(u != 0 | s).
    pub prob_nonzero: f64,
    /// Smallest |s| with nonzero median (infinite when w = 0).
    pub threshold: f64,
}

/// Marginal density of s under the Laplace slab: the N(0,1) kernel convolved
/// with Laplace(alpha). Symmetric, strictly positive, stable for large |s|.
pub fn marginal_density(s: f64, alpha: f64) -> f64 {
    log_marginal_density(s, alpha).exp()
}

/// ln of `marginal_density`.
pub fn log_marginal_density(s: f64, alpha: f64) -> f64 {
    assert!(alpha > 0.0);
    let x = s.abs();
    let t1 = -alpha * x + normal::log_cdf(x - alpha);
    let t2 = alpha * x + normal::log_cdf(-x - alpha);
    (alpha / 2.0).ln() + 0.5 * alpha * alpha + log_sum_exp(t1, t2)
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Posterior probability that u is nonzero: w g(s) / (w g(s) + (1-w) phi(s)).
pub fn posterior_nonzero_prob(problem: &ThresholdProblem) -> f64 {
    let &ThresholdProblem { s, w, alpha } = problem;
    if w == 0.0 {
        return 0.0;
    }
    if w == 1.0 {
        return 1.0;
    }
    let log_slab = w.ln() + log_marginal_density(s, alpha);
    let log_spike = (1.0 - w).ln() + normal::log_pdf(s);
    // logistic of the log Bayes factor
    1.0 / (1.0 + (log_spike - log_slab).exp())
}

/// The q of the median equation, computed for x = |s| >= 0. The posterior
/// median is positive iff Phi(x - alpha) > q.
fn median_q(x: f64, w: f64, alpha: f64) -> f64 {
    let base =
        0.5 * normal::cdf(x - alpha) + 0.5 * (2.0 * alpha * x + normal::log_cdf(-x - alpha)).exp();
    if w == 1.0 {
        base
    } else {
        base + (1.0 - w) / (w * alpha) * normal::pdf(x - alpha)
    }
}

/// Posterior median of u, signed plain value. Antisymmetric in s by
/// construction and clamped to [0, |s|] so shrinkage holds exactly.
pub fn posterior_median_value(s: f64, w: f64, alpha: f64) -> f64 {
    if w == 0.0 || s == 0.0 {
        return 0.0;
    }
    let x = s.abs();
    let q = median_q(x, w, alpha);
    let lhs = normal::cdf(x - alpha);
    if lhs <= q {
        return 0.0;
    }
    // q < Phi(x - alpha) <= 1 here, and q >= Phi(x-alpha)/2 > 0.
    let m = (x - alpha - normal::quantile(q)).clamp(0.0, x);
    if s < 0.0 {
        -m
    } else {
        m
    }
}

/// Full kernel solution: median, nonzero probability, and the selection
/// threshold consistent with the median's zero region.
pub fn posterior_median(problem: &ThresholdProblem) -> ThresholdSolution {
    ThresholdSolution {
        median: posterior_median_value(problem.s, problem.w, problem.alpha),
        prob_nonzero: posterior_nonzero_prob(problem),
        threshold: threshold(problem.w, problem.alpha),
    }
}

/// Smallest |s| at which the posterior median leaves zero.
pub fn threshold(w: f64, alpha: f64) -> f64 {
    assert!((0.0..=1.0).contains(&w));
    assert!(alpha > 0.0);
    if w == 0.0 {
        return f64::INFINITY;
    }
    if w == 1.0 {
        return 0.0;
    }
    let nonzero_at = |x: f64| normal::cdf(x - alpha) > median_q(x, w, alpha);
    let mut hi = 1.0;
    let cap = 4.0 * alpha + 128.0;
    while !nonzero_at(hi) {
        hi *= 2.0;
        if hi > cap {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-13 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if nonzero_at(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Map a standardized median back to the coefficient scale.
pub fn unstandardize_coef(median: f64, scale: f64) -> f64 {
    assert!(scale > 0.0, "scale must be positive, got {scale}");
    median / scale
}
