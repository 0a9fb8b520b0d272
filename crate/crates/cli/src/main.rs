//! Command-line interface: train models, predict bag labels, rank
//! representative instances, run cross-validation benchmarks, and generate
//! synthetic datasets.
//!
//! Exit codes: 0 success, 1 usage or data error, 2 numerical failure.

use clap::{Args, Parser, Subcommand};
use lfda_core::error::ErrorClass;
use lfda_core::harness::{
    emit_report, run_cv, ExperimentSpec, Method, ReportFormat,
};
use lfda_core::lfda::{
    predict_bag_detailed, rank_instances, train_with_preprocessing, BagRule, HyperParams,
    PreprocessSpec, TrainedModel, Variant,
};
use lfda_core::mildata::{
    load_bag_csv, load_musk, save_bag_csv, synth_planted_frac, BagDataset,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "lfda",
    version,
    about = "Latent Fisher discriminant analysis for bag-labeled data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a bag dataset (or a generated synthetic one).
    Train(TrainArgs),
    /// Predict bag labels with a trained model.
    Predict(PredictArgs),
    /// Rank a bag's instances by how representative they are for a class.
    Rank(RankArgs),
    /// Run a cross-validation benchmark over several methods.
    Benchmark(BenchArgs),
    /// Generate a planted-cluster synthetic dataset as bag-CSV.
    Synth(SynthArgs),
}

#[derive(Args, Clone)]
struct SynthParams {
    /// Synthetic generation: classes.
    #[arg(long, default_value_t = 2)]
    synth_classes: usize,
    /// Synthetic generation: bags per class.
    #[arg(long, default_value_t = 20)]
    synth_bags: usize,
    /// Synthetic generation: instances per bag.
    #[arg(long, default_value_t = 10)]
    synth_instances: usize,
    /// Synthetic generation: feature dimension.
    #[arg(long, default_value_t = 10)]
    synth_dim: usize,
    /// Synthetic generation: distance between class signal means.
    #[arg(long, default_value_t = 5.0)]
    synth_sep: f64,
    /// Synthetic generation: signal fraction per bag.
    #[arg(long, default_value_t = 0.3)]
    synth_frac: f64,
}

impl SynthParams {
    fn generate(&self, seed: u64) -> lfda_core::Result<(BagDataset, lfda_core::mildata::GroundTruth)> {
        synth_planted_frac(
            seed,
            self.synth_classes,
            self.synth_bags,
            self.synth_instances,
            self.synth_dim,
            self.synth_sep,
            self.synth_frac,
        )
    }
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Dataset path, or the literal `synth` to generate data in memory.
    #[arg(long)]
    data: String,
    /// Dataset layout: `bag-csv` or `musk` (bag-CSV with 166 features).
    #[arg(long, default_value = "bag-csv")]
    data_format: String,
    #[command(flatten)]
    synth: SynthParams,
}

#[derive(Args, Clone)]
struct HyperArgs {
    /// Mixture components per class (K).
    #[arg(short = 'K', long, default_value_t = 3)]
    components: usize,
    /// Neighbor count for voting and prediction (N).
    #[arg(short = 'N', long, default_value_t = 4)]
    neighbors: usize,
    /// Outer iteration cap (T).
    #[arg(short = 'T', long, default_value_t = 20)]
    max_iterations: usize,
    /// Projection regularizer weight.
    #[arg(long, default_value_t = 40.0)]
    beta: f64,
    /// Convergence threshold on the projection change.
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    /// Selection rule: `lfda` or `jlfda`.
    #[arg(long, default_value = "jlfda")]
    variant: String,
    /// Bag decision rule: `max` or `mean` over instance scores.
    #[arg(long, default_value = "max")]
    bag_rule: String,
    /// RNG seed (falls back to the LFDA_SEED environment variable).
    #[arg(long)]
    seed: Option<u64>,
    /// Disable per-feature standardization fitted on training data.
    #[arg(long)]
    no_standardize: bool,
    /// Reduce features to this many principal components before training.
    #[arg(long)]
    pca_dim: Option<usize>,
}

impl HyperArgs {
    fn seed(&self) -> anyhow::Result<u64> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match std::env::var("LFDA_SEED") {
            Ok(v) => v
                .parse()
                .map_err(|e| anyhow::anyhow!("LFDA_SEED is not an integer: {e}")),
            Err(_) => Ok(0),
        }
    }

    fn hyperparams(&self) -> anyhow::Result<HyperParams> {
        let variant = parse_variant(&self.variant)?;
        let bag_rule = match self.bag_rule.to_ascii_lowercase().as_str() {
            "max" => BagRule::Max,
            "mean" => BagRule::Mean,
            other => anyhow::bail!("unknown bag rule {other:?} (expected max or mean)"),
        };
        Ok(HyperParams {
            components: self.components,
            neighbors: self.neighbors,
            max_iterations: self.max_iterations,
            beta: self.beta,
            epsilon: self.eps,
            variant,
            seed: self.seed()?,
            bag_rule,
        })
    }

    fn preprocess_spec(&self) -> PreprocessSpec {
        PreprocessSpec {
            standardize: !self.no_standardize,
            pca_dim: self.pca_dim,
        }
    }
}

fn parse_variant(s: &str) -> anyhow::Result<Variant> {
    match s.to_ascii_lowercase().as_str() {
        "lfda" => Ok(Variant::Lfda),
        "jlfda" => Ok(Variant::Jlfda),
        other => anyhow::bail!("unknown variant {other:?} (expected lfda or jlfda)"),
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Where to write the trained model (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,
    /// Dataset of bags to predict.
    #[arg(long)]
    data: PathBuf,
    /// Dataset layout: `bag-csv` or `musk`.
    #[arg(long, default_value = "bag-csv")]
    data_format: String,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RankArgs {
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,
    /// Dataset of bags to rank.
    #[arg(long)]
    data: PathBuf,
    /// Dataset layout: `bag-csv` or `musk`.
    #[arg(long, default_value = "bag-csv")]
    data_format: String,
    /// Class to rank for (label name or index); defaults to each bag's own
    /// label.
    #[arg(long)]
    class: Option<String>,
    /// Instances to keep per bag.
    #[arg(long, default_value_t = 10)]
    top: usize,
    /// Scoring rule override (`lfda` distance or `jlfda` density); defaults
    /// to the model's own variant.
    #[arg(long)]
    variant: Option<String>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Experiment file (JSON); command-line flags override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Dataset path override.
    #[arg(long)]
    data: Option<String>,
    /// Dataset layout: `bag-csv` or `musk`.
    #[arg(long, default_value = "bag-csv")]
    data_format: String,
    /// Folds per repeat.
    #[arg(long)]
    folds: Option<usize>,
    /// Cross-validation repeats.
    #[arg(long)]
    repeats: Option<usize>,
    /// Comma-separated methods: lda,lfda,jlfda,rand.
    #[arg(long)]
    methods: Option<String>,
    /// Report format: table, csv, or json.
    #[arg(long, default_value = "table")]
    format: String,
    /// Worker threads for fold-level parallelism.
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    hyper: HyperArgs,
    #[command(flatten)]
    synth: SynthParams,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    params: SynthParams,
    /// Where to write the generated bag-CSV.
    #[arg(long)]
    out: PathBuf,
    /// Optional ground-truth sidecar (bag_id,instance,signal_class rows;
    /// -1 marks background).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Generation seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Rank(args) => cmd_rank(args),
        Command::Benchmark(args) => cmd_benchmark(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .downcast_ref::<lfda_core::Error>()
                .map(|err| match err.class() {
                    ErrorClass::Input => 1,
                    ErrorClass::Numerical => 2,
                })
                .unwrap_or(1);
            ExitCode::from(code)
        }
    }
}

fn load_dataset(
    path: &str,
    format: &str,
    synth: &SynthParams,
    seed: u64,
) -> anyhow::Result<BagDataset> {
    if path == "synth" {
        let (ds, _) = synth.generate(seed)?;
        return Ok(ds);
    }
    let ds = match format.to_ascii_lowercase().as_str() {
        "bag-csv" | "csv" => load_bag_csv(path)?,
        "musk" => load_musk(path)?,
        other => anyhow::bail!("unknown dataset format {other:?} (expected bag-csv or musk)"),
    };
    Ok(ds)
}

fn write_or_print(out: &Option<PathBuf>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<()> {
    let hp = args.hyper.hyperparams()?;
    let ds = load_dataset(
        &args.data.data,
        &args.data.data_format,
        &args.data.synth,
        hp.seed,
    )?;
    let model = train_with_preprocessing(&ds, &hp, &args.hyper.preprocess_spec())?;
    model.save(&args.out)?;

    let last = model.trace.last();
    println!(
        "trained {} on {} bags ({} instances, {} classes, dim {})",
        hp.variant,
        ds.bags.len(),
        ds.total_instances(),
        ds.num_classes,
        ds.dim
    );
    println!(
        "iterations: {} ({}), final projection change: {:.3e}, objective: {:.6}",
        model.trace.len(),
        if model.converged { "converged" } else { "iteration cap" },
        last.map(|r| r.delta_p).unwrap_or(f64::NAN),
        last.map(|r| r.objective).unwrap_or(f64::NAN),
    );
    for (i, rec) in model.trace.iter().enumerate() {
        println!(
            "  iter {:>2}: |dP| = {:.3e}  objective = {:.6}",
            i + 1,
            rec.delta_p,
            rec.objective
        );
    }
    println!("model written to {}", args.out.display());
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> anyhow::Result<()> {
    let model = TrainedModel::load(&args.model)?;
    let ds = match args.data_format.to_ascii_lowercase().as_str() {
        "bag-csv" | "csv" => load_bag_csv(&args.data)?,
        "musk" => load_musk(&args.data)?,
        other => anyhow::bail!("unknown dataset format {other:?}"),
    };
    let mut records = Vec::new();
    for bag in &ds.bags {
        let pred = predict_bag_detailed(&model, bag)?;
        records.push(serde_json::json!({
            "bag": bag.id,
            "predicted_label": model.label_names[pred.label],
            "predicted_index": pred.label,
            "class_scores": pred.class_scores,
            "instances": bag.instances.rows(),
        }));
    }
    let doc = serde_json::to_string_pretty(&serde_json::Value::Array(records))?;
    write_or_print(&args.out, &format!("{doc}\n"))?;
    Ok(())
}

fn cmd_rank(args: RankArgs) -> anyhow::Result<()> {
    let model = TrainedModel::load(&args.model)?;
    let ds = match args.data_format.to_ascii_lowercase().as_str() {
        "bag-csv" | "csv" => load_bag_csv(&args.data)?,
        "musk" => load_musk(&args.data)?,
        other => anyhow::bail!("unknown dataset format {other:?}"),
    };
    let class_override = match &args.class {
        Some(s) => Some(resolve_class(&model, s)?),
        None => None,
    };
    let variant = match &args.variant {
        Some(s) => parse_variant(s)?,
        None => model.hyperparams.variant,
    };
    let mut out = String::from("bag_id,rank,instance,score\n");
    for bag in &ds.bags {
        let class = class_override.unwrap_or(bag.label);
        let ranked = rank_instances(&model, bag, class, args.top, variant)?;
        for (rank, (&idx, &score)) in ranked.order.iter().zip(&ranked.scores).enumerate() {
            out.push_str(&format!("{},{},{},{}\n", bag.id, rank + 1, idx, score));
        }
    }
    write_or_print(&args.out, &out)?;
    Ok(())
}

fn resolve_class(model: &TrainedModel, s: &str) -> anyhow::Result<usize> {
    if let Some(idx) = model.label_names.iter().position(|l| l == s) {
        return Ok(idx);
    }
    if let Ok(idx) = s.parse::<usize>() {
        if idx < model.num_classes() {
            return Ok(idx);
        }
    }
    Err(lfda_core::Error::Label(format!(
        "unknown class {s:?}; expected one of {:?} or an index below {}",
        model.label_names,
        model.num_classes()
    ))
    .into())
}

fn cmd_benchmark(args: BenchArgs) -> anyhow::Result<()> {
    let mut spec = match &args.spec {
        Some(path) => ExperimentSpec::from_json(&std::fs::read_to_string(path)?)?,
        None => ExperimentSpec::default(),
    };
    // Command-line overrides win over spec-file values.
    if let Some(data) = &args.data {
        spec.dataset = Some(data.clone());
    }
    if let Some(folds) = args.folds {
        spec.folds = folds;
    }
    if let Some(repeats) = args.repeats {
        spec.repeats = repeats;
    }
    if let Some(methods) = &args.methods {
        spec.methods = methods
            .split(',')
            .map(|m| Method::parse(m.trim()))
            .collect::<lfda_core::Result<Vec<_>>>()?;
    }
    if args.jobs.is_some() {
        spec.jobs = args.jobs;
    }
    // With a spec file, its hyperparameters stand (except an explicit
    // --seed); without one, the command-line block defines them.
    if args.spec.is_none() {
        spec.hyperparams = args.hyper.hyperparams()?;
        spec.standardize = !args.hyper.no_standardize;
        spec.pca_dim = args.hyper.pca_dim;
        spec.seed = args.hyper.seed()?;
    } else if let Some(seed) = args.hyper.seed {
        spec.seed = seed;
    }

    let path = spec
        .dataset
        .clone()
        .ok_or_else(|| lfda_core::Error::EmptyInput("no dataset given (use --data)".into()))?;
    let ds = load_dataset(&path, &args.data_format, &args.synth, spec.seed)?;

    let format = ReportFormat::parse(&args.format)?;
    let table = run_cv(&ds, &spec)?;
    let report = emit_report(&table, format)?;
    write_or_print(&args.out, &report)?;
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> anyhow::Result<()> {
    let (ds, truth) = args.params.generate(args.seed)?;
    save_bag_csv(&ds, &args.out)?;
    if let Some(truth_path) = &args.truth {
        let mut out = String::from("bag_id,instance,signal_class\n");
        for (bag, labels) in ds.bags.iter().zip(&truth) {
            for (i, l) in labels.iter().enumerate() {
                let class = l.map(|c| c as i64).unwrap_or(-1);
                out.push_str(&format!("{},{},{}\n", bag.id, i, class));
            }
        }
        std::fs::write(truth_path, out)?;
    }
    println!(
        "wrote {} bags ({} instances, dim {}) to {}",
        ds.bags.len(),
        ds.total_instances(),
        ds.dim,
        args.out.display()
    );
    Ok(())
}
