use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use dualtune::data::{load_dataset, ColumnSchema};
use dualtune::experiment::{emit_report, read_results, run_experiment, summarize, ExperimentConfig, Report, Treatment};
use dualtune::filters::{apply_filter, FilterConfig, FilterKind};
use dualtune::learners::LearnerKind;
use dualtune::metrics::ApMode;
use dualtune::optimize::Goal;
use dualtune::synth::{chronological_split, generate, SynthConfig};
use dualtune::Error;

#[derive(Parser)]
#[command(name = "dualtune", version, about = "Tune pre-processor + learner pipelines for security bug report prediction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one treatment over the seeds and write the report tables.
    Tune {
        #[command(flatten)]
        run: RunArgs,
        /// farsec-baseline, preproc-only, de-preproc, de-learner or swift.
        #[arg(long)]
        treatment: Option<String>,
    },
    /// Run all five treatments and rank them.
    Bench {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Recompute medians and ranks from an existing results.csv.
    Rank {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the filtered training sets.
    Filters {
        #[arg(long)]
        train: PathBuf,
        /// A filter name, or `all`.
        #[arg(long, default_value = "all")]
        filter: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic train/test pair.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        records: usize,
        #[arg(long, default_value_t = 20)]
        features: usize,
        #[arg(long, default_value_t = 0.05)]
        positive_rate: f64,
        #[arg(long, default_value_t = 500)]
        train_size: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Training-data filter (train, farsec, farsecsq, farsectwo, clni, clnifarsec, ...).
    #[arg(long)]
    filter: Option<String>,
    /// Project label written into the report rows.
    #[arg(long)]
    project: Option<String>,
    #[arg(long)]
    goal: Option<String>,
    /// `1..10`, `1..=10` or a comma separated list.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    n1: Option<usize>,
    #[arg(long)]
    n2: Option<usize>,
    #[arg(long)]
    np: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    /// Learner of the untuned baseline.
    #[arg(long)]
    learner: Option<String>,
    /// Average precision over every rank of the cut instead of the relevant ranks only.
    #[arg(long)]
    literal_ap: bool,
    /// TOML file with optimizer, epsilon, n1, n2, np, goal, seed, folds.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    optimizer: Option<String>,
    epsilon: Option<f64>,
    n1: Option<usize>,
    n2: Option<usize>,
    np: Option<usize>,
    goal: Option<String>,
    seed: Option<u64>,
    folds: Option<usize>,
}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    Error::Config(msg.into()).into()
}

fn parse_seeds(s: &str) -> anyhow::Result<Vec<u64>> {
    let s = s.trim();
    let num = |t: &str| t.trim().parse::<u64>().map_err(|_| config_error(format!("bad seed `{t}`")));
    let seeds = if let Some((a, b)) = s.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = s.split_once("..") {
        (num(a)?..=num(b)?).collect()
    } else if s.is_empty() {
        Vec::new()
    } else {
        s.split(',').map(num).collect::<anyhow::Result<Vec<_>>>()?
    };
    if seeds.is_empty() {
        return Err(config_error(format!("seed list `{s}` is empty")));
    }
    Ok(seeds)
}

fn read_file_config(path: &Path) -> anyhow::Result<FileConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

fn require_file(path: &Path) -> anyhow::Result<()> {
    if !path.is_file() {
        return Err(config_error(format!("no such file: {}", path.display())));
    }
    Ok(())
}

/// Flags override the config file, which overrides the defaults.
fn build_config(run: &RunArgs, treatment: Option<&str>, bench: bool) -> anyhow::Result<ExperimentConfig> {
    let file = match &run.config {
        Some(p) => read_file_config(p)?,
        None => FileConfig::default(),
    };
    let mut cfg = ExperimentConfig {
        train_path: run.train.clone(),
        test_path: run.test.clone(),
        ..Default::default()
    };
    require_file(&cfg.train_path)?;
    require_file(&cfg.test_path)?;
    cfg.project = run.project.clone().unwrap_or_else(|| {
        run.train
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "project".into())
    });
    if let Some(f) = &run.filter {
        cfg.filter = f.parse()?;
    }

    let mut optimizer_treatment = None;
    if let Some(opt) = file.optimizer.as_deref() {
        match opt {
            "swift" => optimizer_treatment = Some(Treatment::Swift),
            "de3" | "de10" => {
                optimizer_treatment = Some(Treatment::DeLearner);
                cfg.iters = if opt == "de3" { 3 } else { 10 };
            }
            other => return Err(config_error(format!("unknown optimizer `{other}`"))),
        }
    }
    cfg.treatments = if bench {
        Treatment::ALL.to_vec()
    } else {
        match (treatment, optimizer_treatment) {
            (Some(t), _) => vec![t.parse()?],
            (None, Some(t)) => vec![t],
            (None, None) => vec![Treatment::Swift],
        }
    };

    if let Some(g) = run.goal.as_deref().or(file.goal.as_deref()) {
        cfg.goal = g.parse::<Goal>()?;
    }
    if let Some(s) = &run.seeds {
        cfg.seeds = parse_seeds(s)?;
    } else if let Some(s) = file.seed {
        cfg.seeds = vec![s];
    }
    if let Some(e) = run.epsilon.or(file.epsilon) {
        cfg.swift.epsilon = e;
    }
    if let Some(n) = run.n1.or(file.n1) {
        cfg.swift.n1 = n;
    }
    if let Some(n) = run.n2.or(file.n2) {
        cfg.swift.n2 = n;
    }
    cfg.np = run.np.or(file.np);
    if let Some(i) = run.iters {
        cfg.iters = i;
    }
    if let Some(f) = run.folds.or(file.folds) {
        cfg.folds = f;
    }
    if let Some(l) = &run.learner {
        cfg.baseline_learner = l.parse::<LearnerKind>()?;
    }
    if run.literal_ap {
        cfg.ap_mode = ApMode::Literal;
    }
    if cfg.np.is_some() && cfg.treatments == [Treatment::Swift] {
        log::warn!("--np has no effect on swift");
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(report: &Report) {
    println!("treatment\tpd\tpf\tprec\tf\tg\tifa");
    for m in &report.medians {
        println!(
            "{}\t{:.3}\t{:.3}\t{:.3}\t{:.3}\t{:.3}\t{}",
            m.treatment, m.pd, m.pf, m.prec, m.f, m.g, m.ifa
        );
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Tune { run, treatment } => {
            let cfg = build_config(&run, treatment.as_deref(), false)?;
            let report = run_experiment(&cfg)?;
            emit_report(&report, &run.out)?;
            print_summary(&report);
        }
        Command::Bench { run } => {
            let cfg = build_config(&run, None, true)?;
            let report = run_experiment(&cfg)?;
            emit_report(&report, &run.out)?;
            print_summary(&report);
            for r in report.ranks.iter().filter(|r| r.metric == "g" || r.metric == "pd") {
                println!("rank {}\t{}\t{}", r.metric, r.treatment, r.rank);
            }
        }
        Command::Rank { results, out } => {
            require_file(&results)?;
            let rows = read_results(&results)?;
            if rows.is_empty() {
                bail!(config_error(format!("{} has no rows", results.display())));
            }
            let (medians, ranks) = summarize(&rows)?;
            let report = Report {
                medians,
                ranks,
                ..Default::default()
            };
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            emit_report(&report, &out)?;
            for r in &report.ranks {
                println!("{}\t{}\t{}\t{}\t{}", r.metric, r.filter, r.treatment, r.median, r.rank);
            }
        }
        Command::Filters { train, filter, out } => {
            require_file(&train)?;
            let kinds: Vec<FilterKind> = if filter == "all" {
                FilterKind::ALL.to_vec()
            } else {
                vec![filter.parse()?]
            };
            let ds = load_dataset(&train, &ColumnSchema::default())?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            for kind in kinds {
                let filtered = apply_filter(kind, &ds, &FilterConfig::default())?;
                filtered.write_csv(out.join(format!("{kind}.csv")))?;
                println!("{kind}\t{}\t{}", filtered.len(), filtered.sbr_count());
            }
        }
        Command::Synth {
            out,
            seed,
            records,
            features,
            positive_rate,
            train_size,
        } => {
            let ds = generate(&SynthConfig {
                n_records: records,
                n_features: features,
                positive_rate,
                seed,
                ..Default::default()
            })?;
            let (train, test) = chronological_split(&ds, train_size)?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            train.write_csv(out.join("train.csv"))?;
            test.write_csv(out.join("test.csv"))?;
            println!("train\t{}\t{}\ntest\t{}\t{}", train.len(), train.sbr_count(), test.len(), test.sbr_count());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e.chain().any(|c| c.downcast_ref::<Error>().is_some_and(Error::is_config));
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}
