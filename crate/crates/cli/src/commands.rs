//! The fit / simulate / fdr-curve subcommands.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;

use icmm_core::data::{self, Dataset, ResponseSpec};
use icmm_core::engine::{self, FitConfig, Init, ModelFit, PriorFit, PriorSpec};
use icmm_core::family::Family;
use icmm_core::inference;
use icmm_core::sim::{self, MetricRow, SimTruth};

use crate::output::{csv_table, fmt17, write_text, Format};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FamilyArg {
    Gaussian,
    Logistic,
    Cox,
}

impl From<FamilyArg> for Family {
    fn from(v: FamilyArg) -> Family {
        match v {
            FamilyArg::Gaussian => Family::Gaussian,
            FamilyArg::Logistic => Family::Logistic,
            FamilyArg::Cox => Family::Cox,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PriorArg {
    Independent,
    Ising,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum InitArg {
    Zero,
    Lasso,
    File,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// CSV dataset with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// Response column (gaussian: continuous, logistic: 0/1).
    #[arg(long)]
    pub response: Option<String>,
    /// Survival time column (cox).
    #[arg(long)]
    pub time: Option<String>,
    /// Survival status column, 1 = event (cox).
    #[arg(long)]
    pub status: Option<String>,
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long, value_enum, default_value = "independent")]
    pub prior: PriorArg,
    /// Edge-list file for the structured prior.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Laplace slab scale.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value = "lasso")]
    pub init: InitArg,
    /// Coefficient file (name,beta CSV) for --init file.
    #[arg(long)]
    pub init_file: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 100)]
    pub max_outer: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub coef_tol: f64,
    /// Skip internal covariate standardization.
    #[arg(long)]
    pub no_standardize: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

fn response_spec(args: &FitArgs) -> Result<ResponseSpec> {
    match args.family {
        FamilyArg::Gaussian => Ok(ResponseSpec::Continuous {
            column: args
                .response
                .clone()
                .ok_or_else(|| anyhow!("--response is required for --family gaussian"))?,
        }),
        FamilyArg::Logistic => Ok(ResponseSpec::Binary {
            column: args
                .response
                .clone()
                .ok_or_else(|| anyhow!("--response is required for --family logistic"))?,
        }),
        FamilyArg::Cox => Ok(ResponseSpec::Survival {
            time: args
                .time
                .clone()
                .ok_or_else(|| anyhow!("--time is required for --family cox"))?,
            status: args
                .status
                .clone()
                .ok_or_else(|| anyhow!("--status is required for --family cox"))?,
        }),
    }
}

fn read_init_file(path: &Path, names: &[String]) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut by_name = HashMap::new();
    for record in reader.records() {
        let record = record?;
        let beta: f64 = record
            .get(1)
            .ok_or_else(|| anyhow!("init file needs name,beta columns"))?
            .trim()
            .parse()?;
        by_name.insert(record[0].to_string(), beta);
    }
    names
        .iter()
        .map(|n| {
            by_name
                .get(n)
                .copied()
                .ok_or_else(|| anyhow!("init file is missing coefficient for '{n}'"))
        })
        .collect()
}

fn fit_outputs(
    fit: &ModelFit,
    zeta: &[f64],
    names: &[String],
    args_format: Format,
    out_dir: &Path,
) -> Result<()> {
    let coef_rows: Vec<Vec<String>> = names
        .iter()
        .zip(fit.beta.iter().zip(zeta))
        .map(|(name, (beta, z))| vec![name.clone(), fmt17(*beta), fmt17(*z)])
        .collect();

    let mut hyper: Vec<(String, String)> = vec![
        ("family".into(), fit.family.name().to_string()),
        (
            "prior".into(),
            match fit.prior {
                PriorFit::Independent { .. } => "independent".into(),
                PriorFit::Ising { .. } => "ising".into(),
            },
        ),
        ("alpha".into(), fmt17(fit.alpha)),
    ];
    match fit.prior {
        PriorFit::Independent { omega } => hyper.push(("omega".into(), fmt17(omega))),
        PriorFit::Ising { params } => {
            hyper.push(("ising_a".into(), fmt17(params.a)));
            hyper.push(("ising_b".into(), fmt17(params.b)));
        }
    }
    if let Some(b0) = fit.beta0 {
        hyper.push(("beta0".into(), fmt17(b0)));
    }
    hyper.push(("converged".into(), fit.converged.to_string()));
    hyper.push(("iterations".into(), fit.n_outer.to_string()));
    hyper.push(("active_set_size".into(), fit.active_set.len().to_string()));

    let trace_rows: Vec<Vec<String>> = fit
        .trace
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            vec![
                (i + 1).to_string(),
                rec.active_set_size.to_string(),
                fmt17(rec.max_coef_change),
            ]
        })
        .collect();

    match args_format {
        Format::Csv => {
            write_text(
                out_dir,
                "coefficients.csv",
                &csv_table(&["name", "beta", "zeta"], &coef_rows),
            )?;
            let hyper_rows: Vec<Vec<String>> = hyper.into_iter().map(|(k, v)| vec![k, v]).collect();
            write_text(
                out_dir,
                "hyperparameters.csv",
                &csv_table(&["key", "value"], &hyper_rows),
            )?;
            write_text(
                out_dir,
                "trace.csv",
                &csv_table(&["iter", "active_set_size", "max_coef_change"], &trace_rows),
            )?;
        }
        Format::Json => {
            let coefficients: Vec<serde_json::Value> = names
                .iter()
                .zip(fit.beta.iter().zip(zeta))
                .map(|(name, (beta, z))| serde_json::json!({"name": name, "beta": beta, "zeta": z}))
                .collect();
            let trace: Vec<serde_json::Value> = fit
                .trace
                .iter()
                .enumerate()
                .map(|(i, rec)| {
                    serde_json::json!({
                        "iter": i + 1,
                        "active_set_size": rec.active_set_size,
                        "max_coef_change": rec.max_coef_change,
                    })
                })
                .collect();
            let hyper: serde_json::Map<String, serde_json::Value> = hyper
                .into_iter()
                .map(|(k, v)| (k, serde_json::Value::String(v)))
                .collect();
            let doc = serde_json::json!({
                "hyperparameters": hyper,
                "coefficients": coefficients,
                "trace": trace,
            });
            write_text(out_dir, "fit.json", &format!("{:#}\n", doc))?;
        }
    }
    Ok(())
}

pub fn cmd_fit(args: &FitArgs) -> Result<ExitCode> {
    if args.prior == PriorArg::Ising && args.graph.is_none() {
        bail!("ising prior requires --graph");
    }
    let spec = response_spec(args)?;
    let dataset = data::load_dataset(&args.data, &spec, args.graph.as_deref())?;
    let init = match args.init {
        InitArg::Zero => Init::Zero,
        InitArg::Lasso => Init::Lasso,
        InitArg::File => {
            let path = args
                .init_file
                .as_ref()
                .ok_or_else(|| anyhow!("--init file requires --init-file"))?;
            Init::Supplied(read_init_file(path, dataset.names())?)
        }
    };
    let config = FitConfig {
        prior: match args.prior {
            PriorArg::Independent => PriorSpec::Independent,
            PriorArg::Ising => PriorSpec::Ising,
        },
        alpha: args.alpha,
        max_outer: args.max_outer,
        coef_tol: args.coef_tol,
        init,
        seed: args.seed,
        standardize: !args.no_standardize,
        ..FitConfig::default()
    };
    let fit = engine::fit_icmm(&dataset, args.family.into(), &config)?;
    let zeta = inference::local_posterior_probs(&fit, &dataset);
    fit_outputs(&fit, &zeta, dataset.names(), args.format, &args.out_dir)?;
    println!(
        "fit: {} predictors, {} active, converged={} after {} iterations",
        dataset.n_predictors(),
        fit.active_set.len(),
        fit.converged,
        fit.n_outer
    );
    Ok(if fit.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Simulation design, 1-6.
    #[arg(long)]
    pub case: u8,
    #[arg(long, default_value_t = 250)]
    pub n: usize,
    /// Ignored by case 3 (layout-driven) and case 6 (fixed at 1000).
    #[arg(long, default_value_t = 1000)]
    pub p: usize,
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Run the fitting pipeline over this many replicates.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// With --replicates: fit and evaluate each replicate.
    #[arg(long)]
    pub fit: bool,
    /// Comma-separated methods for --fit (icmm, lasso).
    #[arg(long, default_value = "icmm,lasso")]
    pub methods: String,
    /// FDR level for the selection summary in --fit mode.
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
}

fn generate_case(case: u8, n: usize, p: usize, rho: f64, seed: u64) -> Result<(Dataset, SimTruth)> {
    Ok(match case {
        1 => sim::gen_case1(n, p, rho, seed),
        2 => sim::gen_case2(n, p, rho, seed),
        3 => {
            if p == 1152 {
                sim::gen_case3_reference_scale(n, seed)
            } else if p.is_multiple_of(3) && p >= 9 {
                // Desk variant: genes of 3 SNPs, up to 7 pathways.
                let genes = p / 3;
                let pathways = genes.clamp(2, 7);
                sim::gen_case3_like(n, genes, 3, pathways, seed)
            } else {
                bail!("case 3 requires --p 1152 (reference layout) or a multiple of 3")
            }
        }
        4 => sim::gen_case4(n, p, rho, seed),
        5 => sim::gen_case5(n, p, rho, seed),
        6 => sim::gen_case6(n, seed),
        other => bail!("unknown case number {other} (expected 1-6)"),
    })
}

fn case_family(case: u8) -> Family {
    if case <= 3 {
        Family::Logistic
    } else {
        Family::Cox
    }
}

fn case_prior(case: u8) -> PriorSpec {
    match case {
        1 | 4 => PriorSpec::Independent,
        _ => PriorSpec::Ising,
    }
}

fn write_truth(truth: &SimTruth, names: &[String], out_dir: &Path) -> Result<()> {
    let rows: Vec<Vec<String>> = names
        .iter()
        .zip(&truth.beta_true)
        .map(|(n, b)| vec![n.clone(), fmt17(*b)])
        .collect();
    write_text(out_dir, "truth.csv", &csv_table(&["name", "beta"], &rows))?;
    Ok(())
}

struct Replicate {
    method: String,
    row: MetricRow,
}

fn run_replicate(args: &SimulateArgs, methods: &[String], r: usize) -> Result<Vec<Replicate>> {
    let seed = args.seed + r as u64;
    let (train, truth) = generate_case(args.case, args.n, args.p, args.rho, seed)?;
    let family = case_family(args.case);
    let test = if family == Family::Logistic {
        Some(
            generate_case(
                args.case,
                args.n,
                args.p,
                args.rho,
                seed + sim::TEST_SEED_OFFSET,
            )?
            .0,
        )
    } else {
        None
    };

    let mut out = Vec::new();
    for method in methods {
        let row = match method.as_str() {
            "icmm" => {
                let config = FitConfig {
                    prior: case_prior(args.case),
                    ..FitConfig::default()
                };
                let fit = engine::fit_icmm(&train, family, &config)?;
                sim::evaluate(fit.beta0.unwrap_or(0.0), &fit.beta, &truth, test.as_ref())
            }
            "lasso" => {
                let (b0, beta) = engine::fit_lasso_baseline(&train, family)?;
                sim::evaluate(b0, &beta, &truth, test.as_ref())
            }
            other => bail!("unknown method '{other}' (expected icmm or lasso)"),
        };
        out.push(Replicate {
            method: method.clone(),
            row,
        });
    }
    Ok(out)
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() < 2 {
        0.0
    } else {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    };
    (mean, var.sqrt())
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<ExitCode> {
    let (dataset, truth) = generate_case(args.case, args.n, args.p, args.rho, args.seed)?;
    std::fs::create_dir_all(&args.out_dir)?;
    data::write_dataset(
        &dataset,
        args.out_dir.join("dataset.csv"),
        Some(&args.out_dir.join("graph.txt")),
    )?;
    write_truth(&truth, dataset.names(), &args.out_dir)?;
    println!(
        "case {}: wrote dataset.csv ({} x {}), truth.csv, graph.txt",
        args.case,
        dataset.n_obs(),
        dataset.n_predictors()
    );

    let Some(replicates) = args.replicates else {
        return Ok(ExitCode::SUCCESS);
    };
    if !args.fit {
        bail!("--replicates requires --fit");
    }
    let methods: Vec<String> = args
        .methods
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if methods.is_empty() {
        bail!("--methods must name at least one of icmm, lasso");
    }

    // Fan replicates out across workers; results are merged in replicate
    // order so output bytes do not depend on the thread count.
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .context("building worker pool")?;
    let results: Vec<Result<Vec<Replicate>>> = pool.install(|| {
        use rayon::prelude::*;
        (0..replicates)
            .into_par_iter()
            .map(|r| run_replicate(args, &methods, r))
            .collect()
    });

    let mut per_method: HashMap<String, Vec<MetricRow>> = HashMap::new();
    for result in results {
        for rep in result? {
            per_method.entry(rep.method).or_default().push(rep.row);
        }
    }

    let metric_names = ["mr", "fp", "fn", "ms", "l1", "l2sq"];
    let mut rows = Vec::new();
    let mut pretty = String::new();
    pretty.push_str(&format!(
        "{:<8}{}\n",
        "method",
        metric_names
            .iter()
            .map(|m| format!("{m:>16}"))
            .collect::<String>()
    ));
    for method in &methods {
        let metrics = &per_method[method];
        let collect = |f: &dyn Fn(&MetricRow) -> Option<f64>| -> Vec<f64> {
            metrics.iter().filter_map(f).collect()
        };
        let columns: Vec<Vec<f64>> = vec![
            collect(&|m| m.mr),
            collect(&|m| Some(m.false_pos as f64)),
            collect(&|m| Some(m.false_neg as f64)),
            collect(&|m| Some(m.model_size as f64)),
            collect(&|m| Some(m.l1)),
            collect(&|m| Some(m.l2sq)),
        ];
        let mut row = vec![method.clone()];
        pretty.push_str(&format!("{method:<8}"));
        for col in &columns {
            if col.is_empty() {
                row.push(String::new());
                row.push(String::new());
                pretty.push_str(&format!("{:>16}", "-"));
            } else {
                let (mean, sd) = mean_sd(col);
                row.push(fmt17(mean));
                row.push(fmt17(sd));
                pretty.push_str(&format!("{:>16}", format!("{mean:.2}({sd:.2})")));
            }
        }
        pretty.push('\n');
        rows.push(row);
    }
    let header: Vec<String> = std::iter::once("method".to_string())
        .chain(
            metric_names
                .iter()
                .flat_map(|m| [format!("{m}_mean"), format!("{m}_sd")]),
        )
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    match args.format {
        Format::Csv => {
            write_text(
                &args.out_dir,
                "metrics.csv",
                &csv_table(&header_refs, &rows),
            )?;
        }
        Format::Json => {
            let docs: Vec<serde_json::Value> = rows
                .iter()
                .map(|row| {
                    let mut map = serde_json::Map::new();
                    map.insert("method".into(), serde_json::Value::String(row[0].clone()));
                    for (k, name) in metric_names.iter().enumerate() {
                        let mean = &row[1 + 2 * k];
                        let sd = &row[2 + 2 * k];
                        if !mean.is_empty() {
                            map.insert(
                                format!("{name}_mean"),
                                serde_json::json!(mean.parse::<f64>().unwrap()),
                            );
                            map.insert(
                                format!("{name}_sd"),
                                serde_json::json!(sd.parse::<f64>().unwrap()),
                            );
                        }
                    }
                    serde_json::Value::Object(map)
                })
                .collect();
            write_text(
                &args.out_dir,
                "metrics.json",
                &format!("{:#}\n", serde_json::Value::Array(docs)),
            )?;
        }
    }
    print!("{pretty}");
    Ok(ExitCode::SUCCESS)
}

fn worker_count() -> usize {
    std::env::var("ICMM_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(std::num::NonZeroUsize::get)
                .unwrap_or(1)
        })
}

#[derive(Args, Debug)]
pub struct FdrCurveArgs {
    /// Coefficients file from `fit` (name,beta,zeta columns).
    #[arg(long)]
    pub zeta: PathBuf,
    /// Optional truth file (name,beta) enabling the true-FDR column.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Target estimated-FDR level.
    #[arg(long, default_value_t = 0.05)]
    pub level: f64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

fn read_named_column(path: &Path, column: &str) -> Result<Vec<(String, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let name_idx = headers
        .iter()
        .position(|h| h == "name")
        .ok_or_else(|| anyhow!("{} is missing a 'name' column", path.display()))?;
    let value_idx = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| anyhow!("{} is missing a '{column}' column", path.display()))?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let value: f64 = record[value_idx]
            .trim()
            .parse()
            .with_context(|| format!("parsing '{}' in {}", &record[value_idx], path.display()))?;
        out.push((record[name_idx].to_string(), value));
    }
    Ok(out)
}

pub fn cmd_fdr_curve(args: &FdrCurveArgs) -> Result<ExitCode> {
    if !(0.0..1.0).contains(&args.level) {
        bail!("--level must lie in (0,1)");
    }
    let zeta_named = read_named_column(&args.zeta, "zeta")?;
    let zeta: Vec<f64> = zeta_named.iter().map(|(_, z)| *z).collect();
    let names: Vec<String> = zeta_named.into_iter().map(|(n, _)| n).collect();

    let is_null: Option<Vec<bool>> = match &args.truth {
        None => None,
        Some(path) => {
            let truth = read_named_column(path, "beta")?;
            let by_name: HashMap<&str, f64> = truth.iter().map(|(n, b)| (n.as_str(), *b)).collect();
            Some(
                names
                    .iter()
                    .map(|n| {
                        by_name
                            .get(n.as_str())
                            .map(|b| *b == 0.0)
                            .ok_or_else(|| anyhow!("truth file is missing predictor '{n}'"))
                    })
                    .collect::<Result<_>>()?,
            )
        }
    };

    let report = inference::importance_report(zeta.clone(), args.level);
    let mut header = vec!["kappa", "est_fdr"];
    if is_null.is_some() {
        header.push("true_fdr");
    }
    header.push("n_selected");
    let rows: Vec<Vec<String>> = report
        .fdr_curve
        .iter()
        .map(|&(kappa, est, n_sel)| {
            let mut row = vec![fmt17(kappa), fmt17(est)];
            if let Some(is_null) = &is_null {
                row.push(fmt17(inference::true_fdr(&zeta, is_null, kappa)));
            }
            row.push(n_sel.to_string());
            row
        })
        .collect();
    let selected_rows: Vec<Vec<String>> = report
        .selected
        .iter()
        .map(|&j| vec![names[j].clone(), fmt17(zeta[j])])
        .collect();

    match args.format {
        Format::Csv => {
            write_text(&args.out_dir, "fdr_curve.csv", &csv_table(&header, &rows))?;
            write_text(
                &args.out_dir,
                "selected.csv",
                &csv_table(&["name", "zeta"], &selected_rows),
            )?;
        }
        Format::Json => {
            let curve: Vec<serde_json::Value> = report
                .fdr_curve
                .iter()
                .map(|&(kappa, est, n_sel)| {
                    let mut map = serde_json::Map::new();
                    map.insert("kappa".into(), serde_json::json!(kappa));
                    map.insert("est_fdr".into(), serde_json::json!(est));
                    if let Some(is_null) = &is_null {
                        map.insert(
                            "true_fdr".into(),
                            serde_json::json!(inference::true_fdr(&zeta, is_null, kappa)),
                        );
                    }
                    map.insert("n_selected".into(), serde_json::json!(n_sel));
                    serde_json::Value::Object(map)
                })
                .collect();
            let selected: Vec<serde_json::Value> = report
                .selected
                .iter()
                .map(|&j| serde_json::json!({"name": names[j], "zeta": zeta[j]}))
                .collect();
            let doc = serde_json::json!({
                "level": args.level,
                "kappa_star": report.kappa_star,
                "curve": curve,
                "selected": selected,
            });
            write_text(&args.out_dir, "fdr_curve.json", &format!("{:#}\n", doc))?;
        }
    }
    println!(
        "kappa_star = {} selects {} of {} predictors at estimated FDR <= {}",
        report.kappa_star,
        report.selected.len(),
        names.len(),
        args.level
    );
    Ok(ExitCode::SUCCESS)
}
