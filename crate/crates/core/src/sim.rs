//! Seeded generators for the six simulation designs and their evaluation
//! metrics.
//!
//! Cases 1-3 produce binary responses, cases 4-6 survival responses with a
//! Weibull(10, 1) baseline hazard and uniform censoring calibrated to a 50%
//! expected rate. Every generator is a pure function of its parameters and
//! seed; replays are bit-identical.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{Dataset, EdgeList, ResponseVec};
use crate::family::fitted_prob;
use crate::mat::Matrix;

/// Weibull baseline-hazard shape for the survival designs.
pub const WEIBULL_SHAPE: f64 = 10.0;
/// Weibull baseline-hazard scale.
pub const WEIBULL_SCALE: f64 = 1.0;
/// Target expected censoring rate.
pub const TARGET_CENSOR_RATE: f64 = 0.5;
/// Offset added to a replicate seed to draw its held-out test set.
pub const TEST_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// Generating truth attached to a simulated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTruth {
    pub beta_true: Vec<f64>,
    pub graph: Option<EdgeList>,
    /// Realized censoring fraction (survival designs only).
    pub censor_rate: Option<f64>,
}

impl SimTruth {
    pub fn is_null(&self) -> Vec<bool> {
        self.beta_true.iter().map(|&b| b == 0.0).collect()
    }

    pub fn n_nonzero(&self) -> usize {
        self.beta_true.iter().filter(|b| **b != 0.0).count()
    }
}

/// Selection-quality and estimation-error metrics for one fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    /// Misclassification rate on held-out data (logistic designs only).
    pub mr: Option<f64>,
    pub false_pos: usize,
    pub false_neg: usize,
    pub model_size: usize,
    pub l1: f64,
    pub l2sq: f64,
}

/// Covariates in `n_blocks` independent blocks, each serially AR(1)
/// correlated at `rho` with N(0,1) margins. One block covers the whole row
/// for the chain designs.
fn ar1_block_matrix(n: usize, p: usize, rho: f64, n_blocks: usize, rng: &mut ChaCha8Rng) -> Matrix {
    assert!((0.0..1.0).contains(&rho), "rho must be in [0,1)");
    assert!(
        p.is_multiple_of(n_blocks),
        "p={p} not divisible by {n_blocks} blocks"
    );
    let block = p / n_blocks;
    let innov = (1.0 - rho * rho).sqrt();
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = Vec::with_capacity(p);
        for _ in 0..n_blocks {
            let mut prev: f64 = StandardNormal.sample(rng);
            row.push(prev);
            for _ in 1..block {
                let eps: f64 = StandardNormal.sample(rng);
                prev = rho * prev + innov * eps;
                row.push(prev);
            }
        }
        rows.push(row);
    }
    Matrix::from_rows(&rows)
}

/// Two-state Markov chain for inclusion indicators: start Bernoulli(1/2),
/// P(1|0) = 0.01, P(1|1) = 0.5.
pub fn markov_indicator_chain(p: usize, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut tau = Vec::with_capacity(p);
    let mut cur = u8::from(rng.random::<f64>() < 0.5);
    tau.push(cur);
    for _ in 1..p {
        let stay_prob = if cur == 1 { 0.5 } else { 0.01 };
        cur = u8::from(rng.random::<f64>() < stay_prob);
        tau.push(cur);
    }
    tau
}

fn logistic_response(x: &Matrix, beta: &[f64], rng: &mut ChaCha8Rng) -> Vec<u8> {
    let eta = x.affine(0.0, beta);
    for _ in 0..1000 {
        let y: Vec<u8> = eta
            .iter()
            .map(|&e| {
                let pi = 1.0 / (1.0 + (-e).exp());
                u8::from(rng.random::<f64>() < pi)
            })
            .collect();
        if y.contains(&0) && y.contains(&1) {
            return y;
        }
    }
    panic!("degenerate binary response after 1000 redraws");
}

/// Event times from the proportional-hazards model with Weibull(10, 1)
/// baseline: T = scale * (-ln U / exp(eta))^(1/shape).
pub fn weibull_event_times(eta: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    eta.iter()
        .map(|&e| {
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            WEIBULL_SCALE * (-u.ln() / e.exp()).powf(1.0 / WEIBULL_SHAPE)
        })
        .collect()
}

/// Upper bound c of the Uniform[0, c] censoring law whose expected
/// censoring fraction over the realized event times equals the target.
pub fn calibrate_censor_bound(event_times: &[f64], target: f64) -> f64 {
    // P(censored | T) = P(C < T) = min(T/c, 1), decreasing in c.
    let rate = |c: f64| {
        event_times.iter().map(|&t| (t / c).min(1.0)).sum::<f64>() / event_times.len() as f64
    };
    let mut hi = event_times.iter().cloned().fold(1.0, f64::max);
    while rate(hi) > target {
        hi *= 2.0;
        if hi > 1e300 {
            return hi;
        }
    }
    let mut lo = hi / 2.0;
    while rate(lo) < target {
        lo /= 2.0;
        if lo < 1e-300 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if rate(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn survival_response(x: &Matrix, beta: &[f64], rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<u8>, f64) {
    let eta = x.affine(0.0, beta);
    for _ in 0..1000 {
        let t = weibull_event_times(&eta, rng);
        let c_bound = calibrate_censor_bound(&t, TARGET_CENSOR_RATE);
        let censor: Vec<f64> = (0..t.len())
            .map(|_| rng.random::<f64>() * c_bound)
            .collect();
        let observed: Vec<f64> = t.iter().zip(&censor).map(|(&ti, &ci)| ti.min(ci)).collect();
        let status: Vec<u8> = t
            .iter()
            .zip(&censor)
            .map(|(&ti, &ci)| u8::from(ti <= ci))
            .collect();
        if status.contains(&1) {
            let censored = status.iter().filter(|&&d| d == 0).count() as f64;
            let rate = censored / status.len() as f64;
            return (observed, status, rate);
        }
    }
    panic!("no events after 1000 redraws");
}

fn names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("x{}", j + 1)).collect()
}

fn path_graph(p: usize) -> EdgeList {
    EdgeList::new((0..p.saturating_sub(1)).map(|j| (j, j + 1))).unwrap()
}

/// Case 1: 10 independent blocks of AR(1) covariates, fixed coefficients
/// beta_1..5 = 10 and beta_11..15 = -5 (1-based), binary response.
pub fn gen_case1(n: usize, p: usize, rho: f64, seed: u64) -> (Dataset, SimTruth) {
    assert!(p >= 15, "case 1 needs p >= 15");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = ar1_block_matrix(n, p, rho, 10, &mut rng);
    let mut beta = vec![0.0; p];
    for b in beta.iter_mut().take(5) {
        *b = 10.0;
    }
    for b in beta.iter_mut().take(15).skip(10) {
        *b = -5.0;
    }
    let y = logistic_response(&x, &beta, &mut rng);
    let dataset = Dataset::new(x, ResponseVec::Binary(y), names(p), None).unwrap();
    (
        dataset,
        SimTruth {
            beta_true: beta,
            graph: None,
            censor_rate: None,
        },
    )
}

/// Case 2: Markov-chain inclusion pattern, effects U[3,10], one AR(1)
/// process across all columns, linear-chain graph, binary response.
pub fn gen_case2(n: usize, p: usize, rho: f64, seed: u64) -> (Dataset, SimTruth) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = ar1_block_matrix(n, p, rho, 1, &mut rng);
    let tau = markov_indicator_chain(p, &mut rng);
    let beta: Vec<f64> = tau
        .iter()
        .map(|&t| {
            if t == 1 {
                3.0 + 7.0 * rng.random::<f64>()
            } else {
                0.0
            }
        })
        .collect();
    let y = logistic_response(&x, &beta, &mut rng);
    let graph = path_graph(p);
    let dataset = Dataset::new(x, ResponseVec::Binary(y), names(p), Some(graph.clone())).unwrap();
    (
        dataset,
        SimTruth {
            beta_true: beta,
            graph: Some(graph),
            censor_rate: None,
        },
    )
}

/// Gene/pathway layout for the case 3 design.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Case3Config {
    /// SNP count per gene, in gene order.
    pub gene_sizes: Vec<usize>,
    pub n_pathways: usize,
    /// Leading genes of the first pathway that carry signal.
    pub n_causal_genes: usize,
}

impl Case3Config {
    /// Uniform gene sizes.
    pub fn uniform(n_genes: usize, snps_per_gene: usize, n_pathways: usize) -> Self {
        Self {
            gene_sizes: vec![snps_per_gene; n_genes],
            n_pathways,
            n_causal_genes: 15,
        }
    }

    /// The reference layout: 341 genes holding 1,152 SNPs total (gene
    /// sizes 3 or 4 by largest-remainder quota), 7 pathways, 15 causal
    /// genes.
    pub fn reference_scale() -> Self {
        let total = 1152usize;
        let genes = 341usize;
        let sizes: Vec<usize> = (0..genes)
            .map(|i| (i + 1) * total / genes - i * total / genes)
            .collect();
        debug_assert_eq!(sizes.iter().sum::<usize>(), total);
        Self {
            gene_sizes: sizes,
            n_pathways: 7,
            n_causal_genes: 15,
        }
    }

    pub fn total_snps(&self) -> usize {
        self.gene_sizes.iter().sum()
    }

    /// Contiguous gene ranges per pathway (quota split).
    fn pathway_gene_ranges(&self) -> Vec<(usize, usize)> {
        let g = self.gene_sizes.len();
        let t = self.n_pathways;
        (0..t).map(|k| (k * g / t, (k + 1) * g / t)).collect()
    }
}

/// Case 3 stand-in: within-gene equicorrelated SNP blocks, a graph joining
/// SNPs of a gene and chaining genes within a pathway, and signal confined
/// to the first pathway's leading genes with effects U[1,10].
pub fn gen_case3_like(
    n: usize,
    n_genes: usize,
    snps_per_gene: usize,
    n_pathways: usize,
    seed: u64,
) -> (Dataset, SimTruth) {
    gen_case3_with(
        n,
        &Case3Config::uniform(n_genes, snps_per_gene, n_pathways),
        seed,
    )
}

/// Case 3 at the reference scale: p = 1,152 SNPs over 341 genes.
pub fn gen_case3_reference_scale(n: usize, seed: u64) -> (Dataset, SimTruth) {
    gen_case3_with(n, &Case3Config::reference_scale(), seed)
}

pub fn gen_case3_with(n: usize, config: &Case3Config, seed: u64) -> (Dataset, SimTruth) {
    let p = config.total_snps();
    let n_genes = config.gene_sizes.len();
    assert!(n_genes >= config.n_pathways && config.n_pathways >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Within-gene equicorrelation 0.5 via a shared gene factor.
    let r: f64 = 0.5;
    let (sr, se) = (r.sqrt(), (1.0 - r).sqrt());
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = Vec::with_capacity(p);
        for &size in &config.gene_sizes {
            let f: f64 = StandardNormal.sample(&mut rng);
            for _ in 0..size {
                let e: f64 = StandardNormal.sample(&mut rng);
                row.push(sr * f + se * e);
            }
        }
        rows.push(row);
    }
    let x = Matrix::from_rows(&rows);

    // First SNP index of each gene.
    let mut gene_start = Vec::with_capacity(n_genes);
    let mut acc = 0;
    for &size in &config.gene_sizes {
        gene_start.push(acc);
        acc += size;
    }

    let mut edges = Vec::new();
    for (g, &size) in config.gene_sizes.iter().enumerate() {
        let s = gene_start[g];
        for a in 0..size {
            for b in (a + 1)..size {
                edges.push((s + a, s + b));
            }
        }
    }
    let ranges = config.pathway_gene_ranges();
    for &(lo, hi) in &ranges {
        for g in lo..hi.saturating_sub(1) {
            edges.push((gene_start[g], gene_start[g + 1]));
        }
    }
    let graph = EdgeList::new(edges).unwrap();

    // Signal: leading genes of the first pathway, U[1,10] per SNP.
    let (p0_lo, p0_hi) = ranges[0];
    let causal_genes = p0_lo..(p0_lo + config.n_causal_genes.min(p0_hi - p0_lo));
    let mut beta = vec![0.0; p];
    for g in causal_genes {
        for k in 0..config.gene_sizes[g] {
            beta[gene_start[g] + k] = 1.0 + 9.0 * rng.random::<f64>();
        }
    }

    let y = logistic_response(&x, &beta, &mut rng);
    let dataset = Dataset::new(x, ResponseVec::Binary(y), names(p), Some(graph.clone())).unwrap();
    (
        dataset,
        SimTruth {
            beta_true: beta,
            graph: Some(graph),
            censor_rate: None,
        },
    )
}

/// Case 4: case 1 covariates, fixed coefficients beta_1..10 = 5 and
/// beta_101..110 = 2 (1-based), Weibull proportional-hazards times, 50%
/// uniform censoring.
pub fn gen_case4(n: usize, p: usize, rho: f64, seed: u64) -> (Dataset, SimTruth) {
    assert!(p >= 110, "case 4 needs p >= 110");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = ar1_block_matrix(n, p, rho, 10, &mut rng);
    let mut beta = vec![0.0; p];
    for b in beta.iter_mut().take(10) {
        *b = 5.0;
    }
    for b in beta.iter_mut().take(110).skip(100) {
        *b = 2.0;
    }
    let (time, status, censor_rate) = survival_response(&x, &beta, &mut rng);
    let dataset = Dataset::new(x, ResponseVec::Survival { time, status }, names(p), None).unwrap();
    (
        dataset,
        SimTruth {
            beta_true: beta,
            graph: None,
            censor_rate: Some(censor_rate),
        },
    )
}

/// Case 5: case 2 inclusion chain and covariates, effects U[0.5,5],
/// survival response, linear-chain graph.
pub fn gen_case5(n: usize, p: usize, rho: f64, seed: u64) -> (Dataset, SimTruth) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = ar1_block_matrix(n, p, rho, 1, &mut rng);
    let tau = markov_indicator_chain(p, &mut rng);
    let beta: Vec<f64> = tau
        .iter()
        .map(|&t| {
            if t == 1 {
                0.5 + 4.5 * rng.random::<f64>()
            } else {
                0.0
            }
        })
        .collect();
    let (time, status, censor_rate) = survival_response(&x, &beta, &mut rng);
    let graph = path_graph(p);
    let dataset = Dataset::new(
        x,
        ResponseVec::Survival { time, status },
        names(p),
        Some(graph.clone()),
    )
    .unwrap();
    (
        dataset,
        SimTruth {
            beta_true: beta,
            graph: Some(graph),
            censor_rate: Some(censor_rate),
        },
    )
}

/// Case 6: p = 1000 genes in 10 pathways of 100; the 10 regulated genes of
/// each pathway share pairwise correlation 0.7; 18 causal genes across the
/// first three pathways with effects U[0.5,5]; survival response.
pub fn gen_case6(n: usize, seed: u64) -> (Dataset, SimTruth) {
    let p = 1000usize;
    let n_pathways = 10usize;
    let per_pathway = 100usize;
    let n_regulated = 10usize;
    let rho: f64 = 0.7;
    let (sr, se) = (rho.sqrt(), (1.0 - rho).sqrt());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = Vec::with_capacity(p);
        for _ in 0..n_pathways {
            let f: f64 = StandardNormal.sample(&mut rng);
            for g in 0..per_pathway {
                let e: f64 = StandardNormal.sample(&mut rng);
                if g < n_regulated {
                    row.push(sr * f + se * e);
                } else {
                    row.push(e);
                }
            }
        }
        rows.push(row);
    }
    let x = Matrix::from_rows(&rows);

    // 6 regulated genes from each of the first three pathways carry signal.
    let mut beta = vec![0.0; p];
    for pathway in 0..3 {
        for g in 0..6 {
            beta[pathway * per_pathway + g] = 0.5 + 4.5 * rng.random::<f64>();
        }
    }

    let (time, status, censor_rate) = survival_response(&x, &beta, &mut rng);

    // Chain the genes of each pathway: 10 connected components.
    let mut edges = Vec::new();
    for pathway in 0..n_pathways {
        let base = pathway * per_pathway;
        for g in 0..per_pathway - 1 {
            edges.push((base + g, base + g + 1));
        }
    }
    let graph = EdgeList::new(edges).unwrap();
    let dataset = Dataset::new(
        x,
        ResponseVec::Survival { time, status },
        names(p),
        Some(graph.clone()),
    )
    .unwrap();
    (
        dataset,
        SimTruth {
            beta_true: beta,
            graph: Some(graph),
            censor_rate: Some(censor_rate),
        },
    )
}

/// Selection and estimation metrics against the generating truth; the
/// misclassification rate is computed on held-out binary data by
/// thresholding the fitted probability at 1/2.
pub fn evaluate(
    beta0_hat: f64,
    beta_hat: &[f64],
    truth: &SimTruth,
    test_data: Option<&Dataset>,
) -> MetricRow {
    assert_eq!(beta_hat.len(), truth.beta_true.len());
    let mut false_pos = 0usize;
    let mut false_neg = 0usize;
    let mut model_size = 0usize;
    let mut l1 = 0.0;
    let mut l2sq = 0.0;
    for (bh, bt) in beta_hat.iter().zip(&truth.beta_true) {
        let sel = *bh != 0.0;
        let tru = *bt != 0.0;
        model_size += usize::from(sel);
        false_pos += usize::from(sel && !tru);
        false_neg += usize::from(!sel && tru);
        let d = (bt - bh).abs();
        l1 += d;
        l2sq += d * d;
    }
    let mr = test_data.and_then(|test| match test.response() {
        ResponseVec::Binary(y) => {
            let eta = test.x().affine(beta0_hat, beta_hat);
            let wrong = y
                .iter()
                .zip(&eta)
                .filter(|(&yi, &ei)| u8::from(fitted_prob(ei) > 0.5) != yi)
                .count();
            Some(wrong as f64 / y.len() as f64)
        }
        _ => None,
    });
    MetricRow {
        mr,
        false_pos,
        false_neg,
        model_size,
        l1,
        l2sq,
    }
}

/// FP/FN/size for a bare index selection (FDR-controlled pipelines).
pub fn evaluate_selection(selected: &[usize], truth: &SimTruth) -> (usize, usize, usize) {
    let is_sel: Vec<bool> = {
        let mut v = vec![false; truth.beta_true.len()];
        for &j in selected {
            v[j] = true;
        }
        v
    };
    let mut fp = 0;
    let mut fneg = 0;
    for (j, &sel) in is_sel.iter().enumerate() {
        let tru = truth.beta_true[j] != 0.0;
        fp += usize::from(sel && !tru);
        fneg += usize::from(!sel && tru);
    }
    (fp, fneg, selected.len())
}
