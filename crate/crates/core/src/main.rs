use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use flowsteer::discrete::RandomStream;
use flowsteer::flow::Stepper;
use flowsteer::harness::{
    load_model, run_ablation_suite, run_experiment, write_eval_outputs, write_json, write_timing, AblationSuite,
    ExperimentConfig, GenJob, Mode, TrainJob,
};
use flowsteer::retro::{generate_dataset, read_reactions, write_reactions};
use flowsteer::{Error, Result};

/// Stream id of the dataset generator.
const GEN_TAG: u64 = 0x6765_6e65_7261_7465;

#[derive(Parser)]
#[command(name = "flowsteer", version, about = "Reward-steered discrete flows on a synthetic reaction benchmark")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "FLOWSTEER_OUT", default_value = "flowsteer-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train/valid/test reaction files.
    GenData(GenArgs),
    /// Fit a tabular denoiser and write `model.json`.
    Train(TrainArgs),
    /// Sample, rank and score every test product.
    Eval(EvalArgs),
    /// Run an ablation suite around a base evaluation config.
    Ablate(AblateArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    count: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training reactions (overrides the config).
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct AblateArgs {
    /// particles, steps, budget-split or matched-compute.
    #[arg(long)]
    suite: String,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    stepper: Option<String>,
    /// Comma-separated per-center budgets.
    #[arg(long, value_delimiter = ',')]
    budgets: Option<Vec<usize>>,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    dump_predictions: bool,
}

impl Overrides {
    fn config(&self, file: Option<&Path>) -> Result<ExperimentConfig> {
        let mut cfg = match file {
            Some(p) => ExperimentConfig::load(p)?,
            None => {
                let mode = self.mode.as_deref().ok_or_else(|| Error::Config("need --config or --mode".into()))?;
                let dataset = self.dataset.clone().ok_or_else(|| Error::Config("need --config or --dataset".into()))?;
                let model = self.model.clone().ok_or_else(|| Error::Config("need --config or --model".into()))?;
                ExperimentConfig::new(mode.parse()?, dataset, model)
            }
        };
        if let Some(m) = &self.mode {
            cfg.mode = m.parse::<Mode>()?;
        }
        if let Some(d) = &self.dataset {
            cfg.dataset = d.clone();
        }
        if let Some(m) = &self.model {
            cfg.model = m.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.steps {
            cfg.steps = t;
        }
        if let Some(n) = self.samples {
            cfg.samples = n;
        }
        if let Some(k) = self.particles {
            cfg.particles = k;
        }
        if let Some(l) = self.lambda {
            cfg.lambda = l;
        }
        if let Some(s) = &self.stepper {
            cfg.stepper = s.parse::<Stepper>()?;
        }
        if let Some(b) = &self.budgets {
            cfg.centers = b.len();
            cfg.budgets = b.clone();
        }
        if self.limit.is_some() {
            cfg.limit = self.limit;
        }
        cfg.dump_predictions |= self.dump_predictions;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn gen_data(out: &Path, args: &GenArgs) -> Result<()> {
    let mut job = match &args.config {
        Some(p) => GenJob::load(p)?,
        None => GenJob { seed: 0, generator: Default::default() },
    };
    if let Some(s) = args.seed {
        job.seed = s;
    }
    if let Some(c) = args.count {
        job.generator.count = c;
    }
    job.generator.validate()?;
    let data = generate_dataset(&job.generator, &RandomStream::new(job.seed, GEN_TAG))?;
    create_dir(out)?;
    write_reactions(out.join("train.jsonl"), &data.train)?;
    write_reactions(out.join("valid.jsonl"), &data.valid)?;
    write_reactions(out.join("test.jsonl"), &data.test)?;
    write_json(out.join("gen_config.json"), &job)
}

fn train(out: &Path, args: &TrainArgs) -> Result<()> {
    let mut job = match (&args.config, &args.dataset) {
        (Some(p), _) => TrainJob::load(p)?,
        (None, Some(d)) => TrainJob::new(d.clone()),
        (None, None) => return Err(Error::Config("need --config or --dataset".into())),
    };
    if let Some(d) = &args.dataset {
        job.dataset = d.clone();
    }
    if let Some(s) = args.seed {
        job.seed = s;
    }
    if let Some(e) = args.epochs {
        job.train.epochs = e;
    }
    if let Some(lr) = args.lr {
        job.train.lr = lr;
    }
    let reactions = read_reactions(&job.dataset)?;
    let model = flowsteer::harness::train_model(&job, &reactions)?;
    create_dir(out)?;
    model.save(out.join("model.json"))?;
    write_json(out.join("train_config.json"), &job)
}

fn eval(out: &Path, args: &EvalArgs) -> Result<()> {
    let cfg = args.overrides.config(args.config.as_deref())?;
    let model = load_model(&cfg.model)?;
    let reactions = read_reactions(&cfg.dataset)?;
    let report = run_experiment(&cfg, &model, &reactions)?;
    write_eval_outputs(out, &report)?;
    let m = &report.metrics;
    for (i, k) in m.ks.iter().enumerate() {
        println!("top-{k}: exact {:.4}  round-trip {:.4}  coverage {:.4}", m.exact[i], m.round_trip[i], m.coverage[i]);
    }
    Ok(())
}

fn ablate(out: &Path, args: &AblateArgs) -> Result<()> {
    let suite: AblationSuite = args.suite.parse()?;
    let cfg = args.overrides.config(args.config.as_deref())?;
    let model = load_model(&cfg.model)?;
    let reactions = read_reactions(&cfg.dataset)?;
    let table = run_ablation_suite(suite, &cfg, &model, &reactions)?;
    create_dir(out)?;
    let csv = out.join(format!("ablation_{}.csv", suite.as_str()));
    std::fs::write(&csv, table.to_csv()).map_err(|e| Error::io(&csv, e))?;
    write_json(out.join(format!("ablation_{}.json", suite.as_str())), &table)?;
    print!("{}", table.to_csv());
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::BudgetMismatch { .. } => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let (name, result) = match &cli.command {
        Command::GenData(a) => ("gen-data", gen_data(&cli.out, a)),
        Command::Train(a) => ("train", train(&cli.out, a)),
        Command::Eval(a) => ("eval", eval(&cli.out, a)),
        Command::Ablate(a) => ("ablate", ablate(&cli.out, a)),
    };
    let result = result.and_then(|_| write_timing(&cli.out, name, start.elapsed().as_secs_f64()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("flowsteer {name}: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
