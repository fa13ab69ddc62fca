mod manifest;
mod report;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use tvor_core::baseline::{chi2_score_reports, myers_index, run_chi2_baseline, whipple_index, DEFAULT_EPSILON};
use tvor_core::edtv::{
    approximation_error_grid, closed_form_dtv, expected_dtv, f_oracle, nonuniform_upper_bound, theoretical_dtv,
    ClosedForm, EdtvMethod, DEFAULT_ORACLE_LIMIT,
};
use tvor_core::experiments::{
    generate_trial, log_spaced_sizes, run_census_pipeline, run_partition_analysis, run_sweep, CensusOptions,
    ExperimentConfig, ModelSource,
};
use tvor_core::hist::circular_dtv;
use tvor_core::io;
use tvor_core::model::{
    build_mc_table, fit_stderr_model, run_mc_scores, run_tvor, score_with_model, Augmentation, DtvModel, McSource,
    RansacParams, ScoreReport, TvorOptions,
};
use tvor_core::numeric::round_significant;
use tvor_core::{dtv, DistributionSpec, Histogram, RngSeed, TvorError};

use manifest::RunManifest;
use report::Format;

#[derive(Parser)]
#[command(name = "tvor", version, about = "Find histograms whose smoothness is out of line with the rest")]
struct Cli {
    /// Base seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write outputs and manifest.json here instead of printing.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Inputs {
    /// Histogram files, value files, or directories of them.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Inputs are raw integer values (one per line), binned one bin per value.
    #[arg(long)]
    values: bool,
    /// Value range `lo:hi` for --values (default: global min/max).
    #[arg(long, value_parser = parse_range)]
    range: Option<(i64, i64)>,
}

#[derive(Args, Clone)]
struct FitArgs {
    /// Fit with RANSAC instead of plain least squares.
    #[arg(long)]
    ransac: bool,
    /// RANSAC inlier threshold on |DTV - m| / sqrt(N).
    #[arg(long, default_value_t = 2.0)]
    threshold: f64,
    #[arg(long, default_value_t = 500)]
    iterations: usize,
    /// Minimum consensus size (default: max(10, 20% of points)).
    #[arg(long)]
    min_points: Option<usize>,
    /// Add this many random subsamples per histogram to the fitting points.
    #[arg(long)]
    augment: Option<usize>,
    /// Smallest subsample size as a fraction of the histogram size.
    #[arg(long, default_value_t = 0.5)]
    augment_min_fraction: f64,
}

impl FitArgs {
    fn options(&self, seed: u64) -> TvorOptions {
        TvorOptions {
            ransac: self.ransac.then_some(RansacParams {
                threshold: self.threshold,
                iterations: self.iterations,
                min_points: self.min_points,
            }),
            augment: self.augment.map(|k| Augmentation {
                per_histogram: k,
                min_fraction: self.augment_min_fraction,
            }),
            seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Discrete total variation of each histogram.
    Dtv {
        #[command(flatten)]
        inputs: Inputs,
        /// Also report the circular variation.
        #[arg(long)]
        circular: bool,
    },
    /// Expected DTV F(n, N) of uniform multinomial histograms.
    Expected {
        /// Bin counts (comma separated).
        #[arg(long = "n", required = true, value_delimiter = ',')]
        bins: Vec<usize>,
        /// Sample sizes (comma separated).
        #[arg(long = "N", required = true, value_delimiter = ',')]
        sizes: Vec<u64>,
        /// closed2, exact, asymptotic, circular, oracle or mc.
        #[arg(long, default_value = "exact")]
        method: EdtvMethod,
        /// Report exact vs asymptotic errors instead.
        #[arg(long)]
        errors: bool,
    },
    /// Theoretical DTV of a distribution.
    Theoretical {
        /// Distribution spec, e.g. `normal(sigma=1, c=5, n=10)`.
        #[arg(long, conflicts_with = "form")]
        dist: Option<DistributionSpec>,
        /// Closed-form approximation, e.g. `triangular` or `poisson(lambda=4)`; needs --n.
        #[arg(long, requires = "bins")]
        form: Option<ClosedForm>,
        #[arg(long = "n")]
        bins: Option<usize>,
        /// Also print the upper bound on the expected DTV at this size (with --dist).
        #[arg(long = "N")]
        size: Option<u64>,
    },
    /// Fit m(N) = a N + b sqrt(N) and print it as JSON.
    Fit {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Score histograms by d' (or d'' with --mc-table).
    Score {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        fit: FitArgs,
        /// Use this model JSON instead of fitting.
        #[arg(long, conflicts_with = "mc_table")]
        model: Option<PathBuf>,
        /// Score by d'' against this Monte Carlo table.
        #[arg(long)]
        mc_table: Option<PathBuf>,
        /// Allow d'' for sizes outside the table range.
        #[arg(long)]
        extrapolate: bool,
    },
    /// Leave-one-out chi-squared scores.
    Baseline {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
    },
    /// Whipple and Myers indices of value files.
    Indices {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_parser = parse_range)]
        whipple_range: Option<(i64, i64)>,
        #[arg(long, value_parser = parse_range)]
        myers_range: Option<(i64, i64)>,
    },
    /// Monte Carlo table of DTV mean and standard deviation per size.
    McTable {
        /// Sample from a distribution.
        #[arg(long, conflicts_with = "pool")]
        dist: Option<DistributionSpec>,
        /// Subsample this histogram file without replacement.
        #[arg(long)]
        pool: Option<PathBuf>,
        /// Sizes (comma separated).
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<u64>,
        /// Log-spaced sizes `lo:hi:count`.
        #[arg(long, value_parser = parse_grid)]
        grid: Option<(u64, u64, usize)>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Run an experiment config and report mean outlier ranks.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured number of trials.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Per-list birth-year histograms scored against each other.
    Census {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Large reference population (value file) for d''.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// fit-on-lists or mc-from-reference.
        #[arg(long, default_value = "fit-on-lists")]
        model_source: ModelSource,
        #[arg(long, default_value_t = 1000)]
        mc_trials: usize,
        #[arg(long, default_value_t = 40)]
        mc_grid: usize,
        #[arg(long)]
        extrapolate: bool,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Add per-group histograms of one list to the set and re-score.
    Partition {
        #[command(flatten)]
        inputs: Inputs,
        /// `value,group` records of the list to split.
        #[arg(long)]
        records: PathBuf,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Expected DTV by enumerating every multinomial outcome.
    Oracle {
        #[arg(long = "n")]
        bins: usize,
        #[arg(long = "N")]
        size: u64,
        /// Bin probabilities (comma separated); uniform if omitted.
        #[arg(long, value_delimiter = ',')]
        probs: Option<Vec<f64>>,
        #[arg(long, default_value_t = DEFAULT_ORACLE_LIMIT)]
        limit: u64,
    },
}

fn parse_range(s: &str) -> Result<(i64, i64), String> {
    let (a, b) = s.split_once(':').ok_or("expected lo:hi")?;
    let lo = a.trim().parse().map_err(|_| format!("bad lower bound `{a}`"))?;
    let hi = b.trim().parse().map_err(|_| format!("bad upper bound `{b}`"))?;
    if lo > hi {
        return Err(format!("empty range {lo}:{hi}"));
    }
    Ok((lo, hi))
}

fn parse_grid(s: &str) -> Result<(u64, u64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, count] = parts[..] else {
        return Err("expected lo:hi:count".into());
    };
    let lo = lo.parse().map_err(|_| format!("bad lower size `{lo}`"))?;
    let hi = hi.parse().map_err(|_| format!("bad upper size `{hi}`"))?;
    let count = count.parse().map_err(|_| format!("bad count `{count}`"))?;
    Ok((lo, hi, count))
}

/// Error in how the tool was invoked, as opposed to bad data.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

struct Output {
    name: String,
    content: String,
    /// Printed to stdout when no output directory is given.
    primary: bool,
}

impl Output {
    fn primary(name: impl Into<String>, content: String) -> Self {
        Self {
            name: name.into(),
            content,
            primary: true,
        }
    }

    fn extra(name: impl Into<String>, content: String) -> Self {
        Self {
            name: name.into(),
            content,
            primary: false,
        }
    }
}

fn ext(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

fn load_histograms(inputs: &Inputs) -> anyhow::Result<Vec<Histogram>> {
    if inputs.values {
        let lists = io::read_value_lists(&inputs.inputs)?;
        Ok(io::value_lists_to_histograms(&lists, inputs.range)?.0)
    } else {
        if inputs.range.is_some() {
            return Err(usage("--range only applies with --values"));
        }
        Ok(io::read_histograms(&inputs.inputs)?)
    }
}

/// Fits and scores; when every histogram has the same size the curve is not
/// identifiable, so the prediction falls back to the mean DTV at that size.
fn fit_and_score(hists: &[Histogram], options: &TvorOptions) -> anyhow::Result<(DtvModel, Vec<ScoreReport>)> {
    match run_tvor(hists, options) {
        Ok(run) => Ok((run.model, run.reports)),
        Err(TvorError::RankDeficient(1)) => {
            let size = hists[0].total();
            let mean = hists.iter().map(|h| dtv(h) as f64).sum::<f64>() / hists.len() as f64;
            log::warn!("all histograms have N = {size}; scoring against the mean DTV {mean}");
            let model = DtvModel::new(mean / size as f64, 0.0);
            let reports = score_with_model(hists, &model)?;
            Ok((model, reports))
        }
        Err(e) => Err(e.into()),
    }
}

fn model_json(model: &DtvModel) -> String {
    serde_json::to_string_pretty(model).expect("model serialises") + "\n"
}

fn number(x: f64) -> String {
    format!("{x}")
}

fn run(cli: &Cli, manifest: &mut RunManifest) -> anyhow::Result<Vec<Output>> {
    let format = cli.format;
    let seed = cli.seed;
    let outputs = match &cli.command {
        Command::Dtv { inputs, circular } => {
            manifest.add_inputs(&inputs.inputs)?;
            let hists = load_histograms(inputs)?;
            if hists.len() == 1 && !circular && format == Format::Csv {
                vec![Output::primary("dtv.txt", format!("{}\n", dtv(&hists[0])))]
            } else {
                let mut header = vec!["label", "N", "dtv"];
                if *circular {
                    header.push("circular_dtv");
                }
                let rows = hists
                    .iter()
                    .enumerate()
                    .map(|(i, h)| {
                        let mut row = vec![
                            h.label().map(str::to_owned).unwrap_or_else(|| i.to_string()),
                            h.total().to_string(),
                            dtv(h).to_string(),
                        ];
                        if *circular {
                            row.push(circular_dtv(h)?.to_string());
                        }
                        Ok(row)
                    })
                    .collect::<Result<Vec<_>, TvorError>>()?;
                vec![Output::primary(format!("dtv.{}", ext(format)), report::table(&header, &rows, format))]
            }
        }
        Command::Expected {
            bins,
            sizes,
            method,
            errors,
        } => {
            if *errors {
                let rows: Vec<Vec<String>> = approximation_error_grid(bins, sizes)?
                    .iter()
                    .map(|r| {
                        vec![
                            r.n.to_string(),
                            r.size.to_string(),
                            number(r.exact),
                            number(r.asymptotic),
                            number(r.abs_err),
                            number(r.rel_err),
                        ]
                    })
                    .collect();
                let header = ["n", "N", "exact", "asymptotic", "abs_err", "rel_err"];
                vec![Output::primary(format!("approximation.{}", ext(format)), report::table(&header, &rows, format))]
            } else if bins.len() == 1 && sizes.len() == 1 && format == Format::Csv {
                let v = expected_dtv(bins[0], sizes[0], *method)?;
                vec![Output::primary("expected.txt", format!("{}\n", v.value))]
            } else {
                let mut rows = Vec::new();
                for &n in bins {
                    for &size in sizes {
                        let v = expected_dtv(n, size, *method)?;
                        rows.push(vec![n.to_string(), size.to_string(), method.to_string(), number(v.value)]);
                    }
                }
                let header = ["n", "N", "method", "value"];
                vec![Output::primary(format!("expected.{}", ext(format)), report::table(&header, &rows, format))]
            }
        }
        Command::Theoretical { dist, form, bins, size } => {
            let value = match (dist, form) {
                (Some(spec), None) => theoretical_dtv(spec)?,
                (None, Some(form)) => closed_form_dtv(*form, bins.expect("clap requires --n"))?,
                _ => return Err(usage("give exactly one of --dist or --form")),
            };
            let mut text = format!("{value}\n");
            if let Some(size) = size {
                let spec = dist.as_ref().ok_or_else(|| usage("--N needs --dist"))?;
                let rows = vec![vec![number(value), size.to_string(), number(nonuniform_upper_bound(spec, *size)?)]];
                text = report::table(&["theoretical_dtv", "N", "expected_dtv_upper_bound"], &rows, format);
            }
            vec![Output::primary("theoretical.txt", text)]
        }
        Command::Fit { inputs, fit } => {
            manifest.add_inputs(&inputs.inputs)?;
            let hists = load_histograms(inputs)?;
            let options = fit.options(seed);
            let run = run_tvor(&hists, &options)?;
            vec![Output::primary("model.json", model_json(&run.model))]
        }
        Command::Score {
            inputs,
            fit,
            model,
            mc_table,
            extrapolate,
        } => {
            manifest.add_inputs(&inputs.inputs)?;
            let hists = load_histograms(inputs)?;
            let name = format!("scores.{}", ext(format));
            if let Some(path) = mc_table {
                manifest.add_inputs(std::slice::from_ref(path))?;
                let table = io::read_mc_table(path)?;
                let reports = run_mc_scores(&hists, &table, *extrapolate)?;
                vec![Output::primary(name, report::scores(&reports, format))]
            } else if let Some(path) = model {
                manifest.add_inputs(std::slice::from_ref(path))?;
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let model: DtvModel = serde_json::from_str(&text)
                    .map_err(|e| TvorError::Parse(format!("{}: {e}", path.display())))?;
                let reports = score_with_model(&hists, &model)?;
                vec![Output::primary(name, report::scores(&reports, format))]
            } else {
                let (model, reports) = fit_and_score(&hists, &fit.options(seed))?;
                vec![
                    Output::primary(name, report::scores(&reports, format)),
                    Output::extra("model.json", model_json(&model)),
                ]
            }
        }
        Command::Baseline { inputs, epsilon } => {
            manifest.add_inputs(&inputs.inputs)?;
            let hists = load_histograms(inputs)?;
            let reports = run_chi2_baseline(&hists, *epsilon)?;
            let scores = chi2_score_reports(&hists, &reports);
            vec![Output::primary(format!("baseline.{}", ext(format)), report::scores(&scores, format))]
        }
        Command::Indices {
            inputs,
            whipple_range,
            myers_range,
        } => {
            manifest.add_inputs(inputs)?;
            let lists = io::read_value_lists(inputs)?;
            let rows = lists
                .iter()
                .map(|(label, values)| {
                    Ok(vec![
                        label.clone(),
                        number(round_significant(whipple_index(values, *whipple_range)?, report::SCORE_DIGITS)),
                        number(round_significant(myers_index(values, *myers_range)?, report::SCORE_DIGITS)),
                    ])
                })
                .collect::<Result<Vec<_>, TvorError>>()?;
            vec![Output::primary(
                format!("indices.{}", ext(format)),
                report::table(&["label", "whipple", "myers"], &rows, format),
            )]
        }
        Command::McTable {
            dist,
            pool,
            sizes,
            grid,
            trials,
        } => {
            let source = match (dist, pool) {
                (Some(spec), None) => McSource::Spec(spec.clone()),
                (None, Some(path)) => {
                    manifest.add_inputs(std::slice::from_ref(path))?;
                    McSource::Pooled(io::read_histogram(path)?)
                }
                _ => return Err(usage("give exactly one of --dist or --pool")),
            };
            let mut all_sizes = sizes.clone();
            if let Some((lo, hi, count)) = grid {
                all_sizes.extend(log_spaced_sizes(*lo, *hi, *count));
            }
            if all_sizes.is_empty() {
                return Err(usage("give --sizes or --grid"));
            }
            let table = build_mc_table(&source, &all_sizes, *trials, RngSeed::new(seed, 0))?;
            match fit_stderr_model(&table) {
                Ok(fit) => log::info!(
                    "std ~ {:.6} sqrt(N), max relative residual {:.4}",
                    fit.scale,
                    fit.max_rel_residual
                ),
                Err(e) => log::info!("no sqrt(N) fit: {e}"),
            }
            let content = match format {
                Format::Csv => io::mc_table_to_csv(&table),
                Format::Json => serde_json::to_string_pretty(&table)? + "\n",
            };
            vec![Output::primary(format!("mc_table.{}", ext(format)), content)]
        }
        Command::Simulate { config, trials } => {
            manifest.add_inputs(std::slice::from_ref(config))?;
            let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg = ExperimentConfig::from_toml(&text)?;
            if let Some(t) = trials {
                cfg.trials = *t;
            }
            cfg.seed = if seed != 0 { seed } else { cfg.seed };
            manifest.seed = cfg.seed;
            manifest.config = serde_json::to_value(&cfg)?;
            let rows: Vec<Vec<String>> = run_sweep(&cfg)?
                .iter()
                .map(|r| {
                    vec![
                        r.n.to_string(),
                        r.outliers.to_string(),
                        r.heaping_fraction.map(number).unwrap_or_default(),
                        r.method.to_string(),
                        number(r.mean_rank),
                        number(r.std_error),
                        number(r.ideal),
                        number(r.random_null),
                    ]
                })
                .collect();
            let header = [
                "n",
                "outliers",
                "heaping_fraction",
                "method",
                "mean_rank",
                "std_error",
                "ideal",
                "random_null",
            ];
            let (hists, flags) = generate_trial(&cfg, 0)?;
            let fit = run_tvor(&hists, &TvorOptions::default())?;
            let scatter: Vec<Vec<String>> = fit
                .reports
                .iter()
                .zip(&flags)
                .map(|(r, o)| {
                    vec![
                        r.label.clone(),
                        r.size.to_string(),
                        r.dtv.to_string(),
                        number(r.predicted.unwrap_or(f64::NAN)),
                        o.to_string(),
                    ]
                })
                .collect();
            vec![
                Output::primary(format!("mean_ranks.{}", ext(format)), report::table(&header, &rows, format)),
                Output::extra(
                    format!("scatter.{}", ext(format)),
                    report::table(&["label", "N", "dtv", "predicted", "outlier"], &scatter, format),
                ),
            ]
        }
        Command::Census {
            inputs,
            reference,
            model_source,
            mc_trials,
            mc_grid,
            extrapolate,
            fit,
        } => {
            manifest.add_inputs(inputs)?;
            let lists = io::read_value_lists(inputs)?;
            let reference = match reference {
                Some(p) => {
                    manifest.add_inputs(std::slice::from_ref(p))?;
                    Some(io::read_values(p)?)
                }
                None => None,
            };
            let options = CensusOptions {
                model_source: *model_source,
                ransac: fit.options(seed).ransac,
                reference,
                mc_trials: *mc_trials,
                mc_grid: *mc_grid,
                extrapolate: *extrapolate,
                seed,
            };
            let result = run_census_pipeline(&lists, &options)?;
            log::info!("bins cover {}..={}", result.range.0, result.range.1);
            let e = ext(format);
            let mut out = vec![
                Output::primary(format!("scores.{e}"), report::scores(&result.d1, format)),
                Output::extra("model.json", model_json(&result.model)),
            ];
            let plot: Vec<Vec<String>> = result
                .plot_rows
                .iter()
                .map(|r| vec![r.label.clone(), r.size.to_string(), r.dtv.to_string(), number(r.predicted)])
                .collect();
            out.push(Output::extra(
                format!("plot.{e}"),
                report::table(&["label", "N", "dtv", "predicted"], &plot, format),
            ));
            let dist: Vec<Vec<String>> = result
                .score_distribution
                .iter()
                .map(|b| vec![number(b.lo), number(b.hi), b.count.to_string()])
                .collect();
            out.push(Output::extra(
                format!("score_distribution.{e}"),
                report::table(&["lo", "hi", "count"], &dist, format),
            ));
            if let Some(d2) = &result.d2 {
                out.push(Output::extra(format!("mc_scores.{e}"), report::scores(d2, format)));
            }
            if let Some(table) = &result.mc_table {
                out.push(Output::extra("mc_table.csv", io::mc_table_to_csv(table)));
            }
            out
        }
        Command::Partition { inputs, records, fit } => {
            manifest.add_inputs(&inputs.inputs)?;
            manifest.add_inputs(std::slice::from_ref(records))?;
            if !inputs.values {
                return Err(usage("partition works on value files; pass --values"));
            }
            let lists = io::read_value_lists(&inputs.inputs)?;
            let recs = io::read_records(records)?;
            let range = match inputs.range {
                Some(r) => r,
                None => {
                    let (lo, hi) = lists
                        .iter()
                        .flat_map(|(_, v)| v.iter())
                        .chain(recs.iter().map(|(v, _)| v))
                        .fold((i64::MAX, i64::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                    if lo > hi {
                        return Err(TvorError::NoValuesInRange.into());
                    }
                    (lo, hi)
                }
            };
            let (hists, (lo, _)) = io::value_lists_to_histograms(&lists, Some(range))?;
            let result = run_partition_analysis(&hists, lo, &recs, &fit.options(seed))?;
            let e = ext(format);
            vec![
                Output::primary(format!("groups.{e}"), report::scores(&result.groups, format)),
                Output::extra(format!("all_scores.{e}"), report::scores(&result.all, format)),
            ]
        }
        Command::Oracle {
            bins,
            size,
            probs,
            limit,
        } => {
            let value = f_oracle(*bins, *size, probs.as_deref(), *limit)?;
            vec![Output::primary("oracle.txt", format!("{value}\n"))]
        }
    };
    Ok(outputs)
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Dtv { .. } => "dtv",
        Command::Expected { .. } => "expected",
        Command::Theoretical { .. } => "theoretical",
        Command::Fit { .. } => "fit",
        Command::Score { .. } => "score",
        Command::Baseline { .. } => "baseline",
        Command::Indices { .. } => "indices",
        Command::McTable { .. } => "mc-table",
        Command::Simulate { .. } => "simulate",
        Command::Census { .. } => "census",
        Command::Partition { .. } => "partition",
        Command::Oracle { .. } => "oracle",
    }
}

fn emit(outputs: &[Output], dir: Option<&Path>, manifest: &mut RunManifest) -> anyhow::Result<()> {
    match dir {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            for o in outputs {
                let path = dir.join(&o.name);
                fs::write(&path, &o.content).with_context(|| format!("writing {}", path.display()))?;
                manifest.outputs.push(o.name.clone());
            }
            manifest.write(dir)?;
            let mut listing = String::new();
            for o in outputs {
                let _ = writeln!(listing, "{}", dir.join(&o.name).display());
            }
            eprint!("{listing}");
        }
        None => {
            for o in outputs.iter().filter(|o| o.primary) {
                print!("{}", o.content);
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<TvorError>() {
        Some(e) if e.is_numerical_guard() => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: could not configure {threads} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let mut manifest = RunManifest::new(command_name(&cli.command), cli.seed);
    let result = run(&cli, &mut manifest).and_then(|outputs| emit(&outputs, cli.output_dir.as_deref(), &mut manifest));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_and_grids_parse() {
        assert_eq!(parse_range("1850:1945"), Ok((1850, 1945)));
        assert!(parse_range("5:1").is_err());
        assert!(parse_range("5").is_err());
        assert_eq!(parse_grid("100:1000:5"), Ok((100, 1000, 5)));
        assert!(parse_grid("100:1000").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn guard_errors_map_to_exit_four() {
        let e: anyhow::Error = TvorError::RankDeficient(1).into();
        assert_eq!(exit_code(&e), 4);
        let e: anyhow::Error = TvorError::EmptyHistogram.into();
        assert_eq!(exit_code(&e), 3);
        assert_eq!(exit_code(&usage("x")), 2);
    }
}
