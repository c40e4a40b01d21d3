//! Independent oracles for the acceptance and integration suites.
//!
//! Everything here works from defining integrals and textbook algorithms
//! only — no kernel internals — so agreement with the library is evidence,
//! not tautology. The spike-and-slab oracle evaluates the posterior by
//! adaptive Simpson quadrature and inverts its CDF by bisection; the Ising
//! oracle is a plain IRLS logistic MLE; the linear-model reference runs the
//! conditional modes/medians cycle directly on y with fresh O(np) dot
//! products per coordinate.

#![allow(dead_code)]

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Recursive adaptive Simpson on [a, b].
fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, eps: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &impl Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        eps: f64,
        depth: u32,
    ) -> f64 {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * eps {
            left + right + delta / 15.0
        } else {
            rec(f, a, fa, m, fm, lm, flm, left, 0.5 * eps, depth - 1)
                + rec(f, m, fm, b, fb, rm, frm, right, 0.5 * eps, depth - 1)
        }
    }
    if a >= b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, b - a);
    rec(f, a, fa, b, fb, m, fm, whole, eps, 48)
}

/// Integrate across the integrand's kinks at 0 and s.
fn integrate_slab(s: f64, alpha: f64, lo: f64, hi: f64, eps: f64) -> f64 {
    let f = |u: f64| phi(s - u) * (alpha / 2.0) * (-alpha * u.abs()).exp();
    let mut pts: Vec<f64> = vec![lo, hi, 0.0, s];
    pts.retain(|&t| (lo..=hi).contains(&t));
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts.windows(2)
        .map(|w| adaptive_simpson(&f, w[0], w[1], eps))
        .sum()
}

/// Marginal slab density by quadrature of the defining convolution; a
/// coarse pass sets the scale, a second pass refines to ~1e-12 relative.
pub fn oracle_marginal_density(s: f64, alpha: f64) -> f64 {
    let lo = s.min(0.0) - 14.0;
    let hi = s.max(0.0) + 14.0;
    let coarse = integrate_slab(s, alpha, lo, hi, 1e-10);
    integrate_slab(s, alpha, lo, hi, (coarse * 1e-12).max(1e-300))
}

/// Posterior nonzero probability by the Bayes rule on quadrature values.
pub fn oracle_posterior_nonzero_prob(s: f64, w: f64, alpha: f64) -> f64 {
    if w == 0.0 {
        return 0.0;
    }
    if w == 1.0 {
        return 1.0;
    }
    let g = oracle_marginal_density(s, alpha);
    w * g / (w * g + (1.0 - w) * phi(s))
}

/// Posterior median by bisection on the posterior upper-tail mass. The
/// bisection only ever integrates the half-interval it discards, so the
/// total work stays near a constant number of full quadratures.
pub fn oracle_posterior_median(s: f64, w: f64, alpha: f64) -> f64 {
    if w == 0.0 || s == 0.0 {
        return 0.0;
    }
    if s < 0.0 {
        return -oracle_posterior_median(-s, w, alpha);
    }
    let g = oracle_marginal_density(s, alpha);
    let denom = w * g + (1.0 - w) * phi(s);
    let hi = s + 14.0;
    let eps = (g * 1e-11).max(1e-300);

    // Upper-tail posterior mass at 0.
    let mut mass_lo = w * integrate_slab(s, alpha, 0.0, hi, eps) / denom;
    if mass_lo <= 0.5 {
        return 0.0;
    }
    let mut lo = 0.0;
    let mut up = hi;
    for _ in 0..60 {
        let mid = 0.5 * (lo + up);
        let shed = w * integrate_slab(s, alpha, lo, mid, eps * 0.05) / denom;
        let mass_mid = mass_lo - shed;
        if mass_mid > 0.5 {
            lo = mid;
            mass_lo = mass_mid;
        } else {
            up = mid;
        }
    }
    0.5 * (lo + up)
}

/// Plain IRLS logistic MLE of y on (1, x), run to gradient sup-norm 1e-10.
/// Returns None when the iteration diverges (separation).
pub fn oracle_logistic_mle(x: &[f64], y: &[u8]) -> Option<(f64, f64)> {
    let n = x.len();
    assert_eq!(n, y.len());
    let mut a = 0.0f64;
    let mut b = 0.0f64;
    for _ in 0..500 {
        let mut ga = 0.0;
        let mut gb = 0.0;
        let mut waa = 0.0;
        let mut wab = 0.0;
        let mut wbb = 0.0;
        for i in 0..n {
            let eta = a + b * x[i];
            let p = 1.0 / (1.0 + (-eta).exp());
            let v = p * (1.0 - p);
            let r = f64::from(y[i]) - p;
            ga += r;
            gb += x[i] * r;
            waa += v;
            wab += x[i] * v;
            wbb += x[i] * x[i] * v;
        }
        if ga.abs().max(gb.abs()) < 1e-10 {
            return Some((a, b));
        }
        let det = waa * wbb - wab * wab;
        if det.abs() < 1e-12 {
            return None;
        }
        a += (wbb * ga - wab * gb) / det;
        b += (waa * gb - wab * ga) / det;
        if !a.is_finite() || !b.is_finite() || a.abs() > 15.0 || b.abs() > 15.0 {
            return None;
        }
    }
    None
}

/// Direct linear-model ICM/M: conditional modes for sigma^2 and omega,
/// conditional medians for each coefficient, intercept by plain weighted
/// mean, active-set + tolerance stopping. Every coordinate statistic is
/// recomputed from scratch.
pub struct LinearIcmmReference {
    pub beta0: f64,
    pub beta: Vec<f64>,
    pub per_iteration: Vec<(f64, Vec<f64>)>,
    pub converged: bool,
}

pub fn linear_icmm_reference(
    x_cols: &[Vec<f64>],
    y: &[f64],
    alpha: f64,
    max_outer: usize,
    coef_tol: f64,
    use_active_set_rule: bool,
) -> LinearIcmmReference {
    let p = x_cols.len();
    let n = y.len();
    let mut beta = vec![0.0f64; p];
    let mut beta0 = 0.0f64;
    let mut per_iteration = Vec::new();
    let mut prev_active: Vec<usize> = Vec::new();
    let mut converged = false;

    let fitted = |beta0: f64, beta: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| {
                let mut e = beta0;
                for (j, col) in x_cols.iter().enumerate() {
                    if beta[j] != 0.0 {
                        e += col[i] * beta[j];
                    }
                }
                e
            })
            .collect()
    };

    for _ in 0..max_outer {
        // Pseudodata for the identity link: Z = y, constant variance from
        // the current residuals.
        let eta = fitted(beta0, &beta);
        let rss: f64 = y.iter().zip(&eta).map(|(yi, e)| (yi - e) * (yi - e)).sum();
        let k = beta.iter().filter(|b| **b != 0.0).count();
        let var = (rss / ((n as i64 - k as i64 - 1).max(1) as f64)).max(1e-10);

        let k = beta.iter().filter(|b| **b != 0.0).count();
        let omega = (k as f64 / p as f64).clamp(1.0 / p as f64, 1.0 - 1.0 / p as f64);

        let mut max_change = 0.0f64;
        for j in 0..p {
            let eta = fitted(beta0, &beta);
            let col = &x_cols[j];
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..n {
                num += col[i] * (y[i] - eta[i] + col[i] * beta[j]) / var;
                den += col[i] * col[i] / var;
            }
            let scale = den.sqrt();
            let u = icmm_core::spike_slab::posterior_median_value(num / scale, omega, alpha);
            let new = u / scale;
            max_change = max_change.max((new - beta[j]).abs());
            beta[j] = new;
        }

        let xbeta: Vec<f64> = fitted(0.0, &beta);
        beta0 = y.iter().zip(&xbeta).map(|(yi, xb)| yi - xb).sum::<f64>() / n as f64;

        per_iteration.push((beta0, beta.clone()));
        let active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
        let same = active == prev_active;
        prev_active = active;
        if (use_active_set_rule && same) || max_change < coef_tol {
            converged = true;
            break;
        }
    }
    LinearIcmmReference {
        beta0,
        beta,
        per_iteration,
        converged,
    }
}
