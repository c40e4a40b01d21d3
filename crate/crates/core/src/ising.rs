//! Ising prior over inclusion indicators and its pseudo-likelihood fit.
//!
//! The pseudo-likelihood of (a, b) is exactly the likelihood of a logistic
//! regression of tau_j on its neighbor sum, so the fit is a damped 2x2
//! Newton solve. Separation (e.g. an all-zero tau in early iterations)
//! drives the MLE to infinity; estimates are clamped to a +-20 box, which
//! keeps the conditional inclusion probabilities inside (2e-9, 1-2e-9).

use crate::data::EdgeList;

/// Clamp box for the pseudo-likelihood estimates.
pub const PARAM_BOX: f64 = 20.0;
const GRAD_TOL: f64 = 1e-8;
const MAX_NEWTON: usize = 100;

/// Ising field parameters: sparsity `a`, interaction `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsingParams {
    pub a: f64,
    pub b: f64,
}

/// Inclusion indicators tau_j = 1{beta_j != 0}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Indicators {
    pub tau: Vec<u8>,
}

impl Indicators {
    pub fn from_coefficients(beta: &[f64]) -> Self {
        Self {
            tau: beta.iter().map(|&b| u8::from(b != 0.0)).collect(),
        }
    }

    pub fn n_active(&self) -> usize {
        self.tau.iter().map(|&t| usize::from(t)).sum()
    }
}

/// Per-predictor count of active neighbors.
pub fn neighbor_sums(tau: &Indicators, graph: &EdgeList) -> Vec<usize> {
    let mut sums = vec![0usize; tau.tau.len()];
    for &(a, b) in graph.edges() {
        sums[a] += usize::from(tau.tau[b]);
        sums[b] += usize::from(tau.tau[a]);
    }
    sums
}

#[inline]
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn clamp_box(v: f64) -> f64 {
    v.clamp(-PARAM_BOX, PARAM_BOX)
}

fn log_pseudo_likelihood(tau: &[u8], x: &[f64], a: f64, b: f64) -> f64 {
    let mut ll = 0.0;
    for (t, xi) in tau.iter().zip(x) {
        let lin = a + b * xi;
        // log sigma(lin) if t=1 else log sigma(-lin), stable form
        let m = if *t == 1 { lin } else { -lin };
        ll += if m >= 0.0 {
            -(-m).exp().ln_1p()
        } else {
            m - m.exp().ln_1p()
        };
    }
    ll
}

/// Maximize the pseudo-likelihood of (a, b): logistic regression of tau_j on
/// the neighbor sum, solved by damped Newton to gradient sup-norm 1e-8.
///
/// Degenerate cases (all-one/all-zero tau, or a constant regressor such as
/// an empty graph) collapse to the intercept-only fit a = logit(k/p), b = 0,
/// clamped to the box.
pub fn fit_ising_pseudolikelihood(tau: &Indicators, graph: &EdgeList) -> IsingParams {
    let p = tau.tau.len();
    assert!(p >= 2, "pseudo-likelihood fit needs p >= 2");
    let k = tau.n_active();
    let x: Vec<f64> = neighbor_sums(tau, graph)
        .into_iter()
        .map(|s| s as f64)
        .collect();

    if k == 0 {
        return IsingParams {
            a: -PARAM_BOX,
            b: 0.0,
        };
    }
    if k == p {
        return IsingParams {
            a: PARAM_BOX,
            b: 0.0,
        };
    }
    if x.iter().all(|&v| v == x[0]) {
        let frac = k as f64 / p as f64;
        return IsingParams {
            a: clamp_box((frac / (1.0 - frac)).ln()),
            b: 0.0,
        };
    }

    let tau = &tau.tau;
    let frac = k as f64 / p as f64;
    let mut a = (frac / (1.0 - frac)).ln();
    let mut b = 0.0;
    let mut ll = log_pseudo_likelihood(tau, &x, a, b);

    for _ in 0..MAX_NEWTON {
        let mut ga = 0.0;
        let mut gb = 0.0;
        let mut haa = 0.0;
        let mut hab = 0.0;
        let mut hbb = 0.0;
        for (t, xi) in tau.iter().zip(&x) {
            let pj = logistic(a + b * xi);
            let r = f64::from(*t) - pj;
            let v = (pj * (1.0 - pj)).max(1e-12);
            ga += r;
            gb += xi * r;
            haa += v;
            hab += xi * v;
            hbb += xi * xi * v;
        }
        if ga.abs().max(gb.abs()) <= GRAD_TOL {
            break;
        }
        // Newton direction: solve [haa hab; hab hbb] d = g.
        let det = haa * hbb - hab * hab;
        let (mut da, mut db) = if det.abs() > 1e-300 {
            ((hbb * ga - hab * gb) / det, (haa * gb - hab * ga) / det)
        } else {
            (ga / haa.max(1e-12), gb / hbb.max(1e-12))
        };

        // Step halving; bail out to the clamp box if no ascent is possible.
        let mut accepted = false;
        for _ in 0..40 {
            let na = clamp_box(a + da);
            let nb = clamp_box(b + db);
            let nll = log_pseudo_likelihood(tau, &x, na, nb);
            if nll >= ll - 1e-12 {
                a = na;
                b = nb;
                ll = nll;
                accepted = true;
                break;
            }
            da *= 0.5;
            db *= 0.5;
        }
        if !accepted {
            break;
        }
        if a.abs() >= PARAM_BOX && b.abs() >= PARAM_BOX {
            break;
        }
    }
    IsingParams {
        a: clamp_box(a),
        b: clamp_box(b),
    }
}

/// Conditional inclusion probability of predictor j given its neighbors:
/// 1 / (1 + exp(-a - b * neighbor_sum_j)).
pub fn conditional_inclusion_prob(
    j: usize,
    tau: &Indicators,
    graph: &EdgeList,
    params: &IsingParams,
) -> f64 {
    let sums = neighbor_sums(tau, graph);
    logistic(params.a + params.b * sums[j] as f64)
}

/// All conditional inclusion probabilities at once (one adjacency traversal).
pub fn conditional_inclusion_probs(
    tau: &Indicators,
    graph: &EdgeList,
    params: &IsingParams,
) -> Vec<f64> {
    neighbor_sums(tau, graph)
        .into_iter()
        .map(|s| logistic(params.a + params.b * s as f64))
        .collect()
}
