//! Cross-validation benchmarking: repeated stratified bag-level folds,
//! per-fold preprocessing fitted on training data only, and accuracy
//! aggregation across the plain-LDA baseline, both latent variants, and a
//! random baseline.

use crate::error::{Error, Result};
use crate::lda;
use crate::lfda::{
    self, predict_bag, train_with_preprocessing, ClusterWeights, HyperParams, LatentState,
    Preprocess, PreprocessSpec, TrainedModel, Variant,
};
use crate::mildata::{make_folds, Bag, BagDataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Benchmark methods in canonical report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    LdaBaseline,
    Lfda,
    Jlfda,
    RandRank,
}

impl Method {
    pub fn parse(s: &str) -> Result<Method> {
        match s.to_ascii_lowercase().as_str() {
            "lda" | "lda-baseline" => Ok(Method::LdaBaseline),
            "lfda" => Ok(Method::Lfda),
            "jlfda" => Ok(Method::Jlfda),
            "rand" | "rand-rank" => Ok(Method::RandRank),
            other => Err(Error::UnknownFormat(format!("unknown method {other:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::LdaBaseline => "LDA",
            Method::Lfda => "LFDA",
            Method::Jlfda => "JLFDA",
            Method::RandRank => "RAND",
        }
    }

    pub fn all() -> [Method; 4] {
        [
            Method::LdaBaseline,
            Method::Lfda,
            Method::Jlfda,
            Method::RandRank,
        ]
    }
}

/// A full experiment description. Serializable so experiments can live in
/// JSON files; command-line overrides are applied on top by the caller.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// Path of the dataset file (bag-CSV). Ignored when the caller passes
    /// an in-memory dataset.
    #[serde(default)]
    pub dataset: Option<String>,
    #[serde(default = "default_true")]
    pub standardize: bool,
    #[serde(default)]
    pub pca_dim: Option<usize>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub hyperparams: HyperParams,
    /// Worker threads for fold-level parallelism; `None` uses all cores.
    #[serde(default)]
    pub jobs: Option<usize>,
}

fn default_true() -> bool {
    true
}
fn default_folds() -> usize {
    10
}
fn default_repeats() -> usize {
    10
}
fn default_methods() -> Vec<Method> {
    vec![Method::LdaBaseline, Method::Lfda, Method::Jlfda]
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            dataset: None,
            standardize: true,
            pca_dim: None,
            folds: default_folds(),
            repeats: default_repeats(),
            seed: 0,
            methods: default_methods(),
            hyperparams: HyperParams::default(),
            jobs: None,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.repeats < 1 {
            return Err(Error::InvalidParameter("repeats must be >= 1".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidParameter("folds must be >= 2".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("no methods selected".into()));
        }
        self.hyperparams.validate()
    }

    pub fn from_json(text: &str) -> Result<ExperimentSpec> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// One fold evaluation of one method.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldRecord {
    pub repeat: usize,
    pub fold: usize,
    pub accuracy_pct: f64,
    pub runtime_ms: f64,
    pub test_bags: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldFailure {
    pub repeat: usize,
    pub fold: usize,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean_accuracy_pct: f64,
    pub std_accuracy_pct: f64,
    pub records: Vec<FoldRecord>,
    pub failures: Vec<FoldFailure>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultTable {
    pub methods: Vec<MethodSummary>,
    pub config: ExperimentSpec,
    pub notes: Vec<String>,
}

impl ResultTable {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }
}

/// Runs the repeated stratified cross-validation benchmark.
///
/// Per (repeat, fold): preprocessing is fitted on the training bags only,
/// every method trains on the training bags and is scored by bag accuracy
/// on the held-out bags. Fold-level failures are recorded without aborting
/// the run; a failure rate above 20% fails the experiment. Results are
/// deterministic for a fixed spec and independent of the job count.
pub fn run_cv(ds: &BagDataset, spec: &ExperimentSpec) -> Result<ResultTable> {
    spec.validate()?;
    ds.validate()?;

    let mut plans = Vec::with_capacity(spec.repeats);
    for repeat in 0..spec.repeats {
        plans.push(make_folds(
            ds,
            spec.folds,
            spec.seed.wrapping_add(repeat as u64),
        )?);
    }

    let pairs: Vec<(usize, usize)> = (0..spec.repeats)
        .flat_map(|r| (0..spec.folds).map(move |f| (r, f)))
        .collect();

    let run_pairs = || -> Vec<Vec<FoldMethodResult>> {
        pairs
            .par_iter()
            .map(|&(repeat, fold)| run_fold(ds, spec, &plans[repeat], repeat, fold))
            .collect()
    };
    let outcomes = match spec.jobs {
        Some(jobs) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.max(1))
                .build()
                .map_err(|e| Error::Experiment(format!("thread pool: {e}")))?;
            pool.install(run_pairs)
        }
        None => run_pairs(),
    };

    let mut table = Vec::new();
    for &method in &spec.methods {
        let mut records = Vec::new();
        let mut failures = Vec::new();
        for outcome in &outcomes {
            for (m, r) in outcome {
                if *m != method {
                    continue;
                }
                match r {
                    Ok(rec) => records.push(rec.clone()),
                    Err(f) => failures.push(f.clone()),
                }
            }
        }
        let total = records.len() + failures.len();
        if total > 0 && failures.len() * 5 > total {
            return Err(Error::Experiment(format!(
                "method {} failed on {}/{} folds; first failure: {}",
                method.name(),
                failures.len(),
                total,
                failures[0].message
            )));
        }
        let mean = if records.is_empty() {
            f64::NAN
        } else {
            records.iter().map(|r| r.accuracy_pct).sum::<f64>() / records.len() as f64
        };
        let std = if records.len() < 2 {
            0.0
        } else {
            let var = records
                .iter()
                .map(|r| (r.accuracy_pct - mean).powi(2))
                .sum::<f64>()
                / (records.len() - 1) as f64;
            var.sqrt()
        };
        records.sort_by_key(|r| (r.repeat, r.fold));
        table.push(MethodSummary {
            method,
            mean_accuracy_pct: mean,
            std_accuracy_pct: std,
            records,
            failures,
        });
    }
    // Canonical report order.
    table.sort_by_key(|m| Method::all().iter().position(|x| *x == m.method));

    Ok(ResultTable {
        methods: table,
        config: spec.clone(),
        notes: vec![
            "accuracy is bag-level: one prediction per bag, scored against the bag label".into(),
        ],
    })
}

type FoldMethodResult = (Method, std::result::Result<FoldRecord, FoldFailure>);

fn run_fold(
    ds: &BagDataset,
    spec: &ExperimentSpec,
    plan: &crate::mildata::FoldPlan,
    repeat: usize,
    fold: usize,
) -> Vec<FoldMethodResult> {
    let (train_idx, test_idx) = plan.train_test_split(fold);
    let train_ds = ds.subset(&train_idx);
    let test_bags: Vec<&Bag> = test_idx.iter().map(|&i| &ds.bags[i]).collect();

    let prep_spec = PreprocessSpec {
        standardize: spec.standardize,
        pca_dim: spec.pca_dim,
    };
    let mut hp = spec.hyperparams.clone();
    hp.seed = spec.seed.wrapping_add(repeat as u64);

    spec.methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let accuracy = match method {
                Method::RandRank => random_guess_accuracy(
                    &test_bags,
                    ds.num_classes,
                    derive_seed(spec.seed, repeat, fold),
                ),
                Method::LdaBaseline => lda_baseline_train(&train_ds, &hp, &prep_spec)
                    .and_then(|model| evaluate_accuracy(&model, &test_bags)),
                Method::Lfda | Method::Jlfda => {
                    let mut hp = hp.clone();
                    hp.variant = if method == Method::Lfda {
                        Variant::Lfda
                    } else {
                        Variant::Jlfda
                    };
                    train_with_preprocessing(&train_ds, &hp, &prep_spec)
                        .and_then(|model| evaluate_accuracy(&model, &test_bags))
                }
            };
            let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            let outcome = match accuracy {
                Ok(acc) => Ok(FoldRecord {
                    repeat,
                    fold,
                    accuracy_pct: acc,
                    runtime_ms,
                    test_bags: test_bags.len(),
                }),
                Err(e) => Err(FoldFailure {
                    repeat,
                    fold,
                    message: e.to_string(),
                }),
            };
            (method, outcome)
        })
        .collect()
}

fn derive_seed(base: u64, repeat: usize, fold: usize) -> u64 {
    base.wrapping_add(repeat as u64)
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(fold as u64)
}

/// Bag accuracy (%) of a model over held-out bags.
pub fn evaluate_accuracy(model: &TrainedModel, bags: &[&Bag]) -> Result<f64> {
    if bags.is_empty() {
        return Err(Error::EmptyInput("no test bags".into()));
    }
    let mut correct = 0usize;
    for bag in bags {
        let (label, _) = predict_bag(model, bag)?;
        if label == bag.label {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / bags.len() as f64)
}

fn random_guess_accuracy(bags: &[&Bag], num_classes: usize, seed: u64) -> Result<f64> {
    if bags.is_empty() {
        return Err(Error::EmptyInput("no test bags".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut correct = 0usize;
    for bag in bags {
        if rng.gen_range(0..num_classes) == bag.label {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / bags.len() as f64)
}

/// Plain-LDA baseline: instances take their bag label, one discriminant
/// fit, and the whole projected training set serves as the kNN reference.
/// The result is an ordinary [`TrainedModel`], so prediction and ranking
/// behave identically to the latent variants.
pub fn lda_baseline_train(
    ds: &BagDataset,
    hp: &HyperParams,
    prep_spec: &PreprocessSpec,
) -> Result<TrainedModel> {
    ds.validate()?;
    if ds.num_classes < 2 {
        return Err(Error::Label("training needs at least two classes".into()));
    }
    let (x_raw, inst_bag, inst_label) = ds.flatten();
    let preprocess = Preprocess::fit(&x_raw, prep_spec)?;
    let x = preprocess.transform(&x_raw)?;
    let c = ds.num_classes;

    let sc = lda::scatter(&x, &inst_label, c)?;
    let projection = lda::fit_projection(&sc, hp.beta, c - 1)?;
    let objective = lda::objective(&sc, &projection, hp.beta)?;
    let y = lda::project(&projection, &x)?;

    // One-component mixture per class so ranking works on the baseline too.
    let mut mixtures = Vec::with_capacity(c);
    for class in 0..c {
        let members: Vec<usize> = inst_label
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        let pts = y.select_rows(&members);
        mixtures.push(crate::gmm::fit_em(&pts, 1, hp.seed, 1, 1e-6)?);
    }

    let instance_refs = (0..x.rows())
        .map(|i| {
            let bag = inst_bag[i];
            let first = inst_bag.partition_point(|&b| b < bag);
            (bag, i - first)
        })
        .collect();

    Ok(TrainedModel {
        projection,
        mixtures,
        cluster_weights: ClusterWeights::uniform(c, 1),
        latent: LatentState {
            selected: vec![0; c],
            instance_refs,
            labels: inst_label.clone(),
            iteration: 0,
        },
        reference_points: y,
        reference_labels: inst_label,
        preprocess,
        hyperparams: hp.clone(),
        trace: vec![lfda::IterationRecord {
            delta_p: 0.0,
            objective,
        }],
        converged: true,
        label_names: ds.label_names.clone(),
        input_dim: x_raw.cols(),
    })
}

/// Uniform random sample of `top_m` instance indices without replacement.
pub fn rand_rank_baseline(bag: &Bag, top_m: usize, seed: u64) -> Result<Vec<usize>> {
    let n = bag.instances.rows();
    if top_m > n {
        return Err(Error::InvalidParameter(format!(
            "requested {top_m} instances from a bag of {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..n).collect();
    // Partial Fisher-Yates: the first top_m slots are the sample.
    for i in 0..top_m {
        let j = rng.gen_range(i..n);
        indices.swap(i, j);
    }
    indices.truncate(top_m);
    Ok(indices)
}

/// Output formats for benchmark reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Result<ReportFormat> {
        match s.to_ascii_lowercase().as_str() {
            "table" | "text" | "table-text" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::UnknownFormat(format!(
                "unknown report format {other:?}"
            ))),
        }
    }
}

/// Serializes a result table. Text is a human-readable summary; CSV holds
/// one row per (method, repeat, fold) with full float precision; JSON is
/// the whole structure.
pub fn emit_report(rt: &ResultTable, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(rt)?),
        ReportFormat::Csv => {
            let mut out = String::from("method,repeat,fold,accuracy_pct,runtime_ms,test_bags\n");
            for m in &rt.methods {
                for r in &m.records {
                    out.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        m.method.name(),
                        r.repeat,
                        r.fold,
                        r.accuracy_pct,
                        r.runtime_ms,
                        r.test_bags
                    ));
                }
            }
            Ok(out)
        }
        ReportFormat::Text => {
            let mut out = String::new();
            for note in &rt.notes {
                out.push_str(&format!("# {note}\n"));
            }
            out.push_str(&format!(
                "{:<8} {:>8} {:>8} {:>7} {:>9}\n",
                "method", "mean%", "std%", "folds", "failures"
            ));
            for m in &rt.methods {
                out.push_str(&format!(
                    "{:<8} {:>8.2} {:>8.2} {:>7} {:>9}\n",
                    m.method.name(),
                    m.mean_accuracy_pct,
                    m.std_accuracy_pct,
                    m.records.len(),
                    m.failures.len()
                ));
            }
            Ok(out)
        }
    }
}

/// Parses the per-fold CSV back into (method, repeat, fold, accuracy) rows.
pub fn parse_report_csv(text: &str) -> Result<Vec<(String, usize, usize, f64)>> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 4 {
            return Err(Error::Parse {
                line: idx + 1,
                msg: format!("expected at least 4 fields, got {}", fields.len()),
            });
        }
        let parse_err = |msg: String| Error::Parse { line: idx + 1, msg };
        rows.push((
            fields[0].to_string(),
            fields[1]
                .parse()
                .map_err(|e| parse_err(format!("repeat: {e}")))?,
            fields[2]
                .parse()
                .map_err(|e| parse_err(format!("fold: {e}")))?,
            fields[3]
                .parse()
                .map_err(|e| parse_err(format!("accuracy: {e}")))?,
        ));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mildata::synth_planted;

    fn small_spec(methods: Vec<Method>) -> ExperimentSpec {
        ExperimentSpec {
            dataset: None,
            standardize: true,
            pca_dim: None,
            folds: 2,
            repeats: 1,
            seed: 5,
            methods,
            hyperparams: HyperParams {
                components: 2,
                neighbors: 3,
                max_iterations: 5,
                beta: 40.0,
                epsilon: 1e-4,
                variant: Variant::Jlfda,
                seed: 5,
                bag_rule: crate::lfda::BagRule::Max,
            },
            jobs: Some(1),
        }
    }

    #[test]
    fn planted_separation_beats_chance() {
        // Signal share 0.4 keeps the planted cluster the optimum of the
        // joint (prior x vote) selection rule as well.
        let (ds, _) = crate::mildata::synth_planted_frac(41, 2, 12, 8, 4, 10.0, 0.4).unwrap();
        let spec = small_spec(vec![
            Method::LdaBaseline,
            Method::Lfda,
            Method::Jlfda,
            Method::RandRank,
        ]);
        let rt = run_cv(&ds, &spec).unwrap();
        for m in &rt.methods {
            match m.method {
                Method::Lfda | Method::Jlfda => assert!(
                    m.mean_accuracy_pct >= 95.0,
                    "{} scored {}",
                    m.method.name(),
                    m.mean_accuracy_pct
                ),
                // The plain baseline keeps every background instance in its
                // reference set, so saturated false neighbors cap it well
                // below the latent variants; it still must beat chance.
                Method::LdaBaseline => assert!(
                    m.mean_accuracy_pct > 55.0,
                    "baseline scored {}",
                    m.mean_accuracy_pct
                ),
                Method::RandRank => {}
            }
        }
    }

    #[test]
    fn bookkeeping_two_folds() {
        let (ds, _) = synth_planted(43, 2, 4, 3, 3, 6.0).unwrap();
        let mut spec = small_spec(vec![Method::LdaBaseline]);
        spec.folds = 2;
        let rt = run_cv(&ds, &spec).unwrap();
        let m = &rt.methods[0];
        assert_eq!(m.records.len(), 2);
        let manual: f64 =
            m.records.iter().map(|r| r.accuracy_pct).sum::<f64>() / m.records.len() as f64;
        assert!((m.mean_accuracy_pct - manual).abs() < 1e-9);
    }

    #[test]
    fn deterministic_and_jobs_independent() {
        let (ds, _) = synth_planted(47, 2, 8, 5, 3, 5.0).unwrap();
        let mut spec = small_spec(vec![Method::LdaBaseline, Method::Jlfda, Method::RandRank]);
        spec.repeats = 2;
        let a = run_cv(&ds, &spec).unwrap();
        spec.jobs = Some(2);
        let b = run_cv(&ds, &spec).unwrap();
        for (ma, mb) in a.methods.iter().zip(&b.methods) {
            assert_eq!(ma.method, mb.method);
            assert_eq!(ma.records.len(), mb.records.len());
            for (ra, rb) in ma.records.iter().zip(&mb.records) {
                assert_eq!(ra.accuracy_pct, rb.accuracy_pct);
                assert_eq!((ra.repeat, ra.fold), (rb.repeat, rb.fold));
            }
        }
    }

    #[test]
    fn chance_level_at_zero_separation() {
        let (ds, _) = synth_planted(53, 2, 12, 6, 3, 0.0).unwrap();
        let mut spec = small_spec(vec![Method::Lfda]);
        spec.repeats = 2;
        let rt = run_cv(&ds, &spec).unwrap();
        let m = &rt.methods[0];
        // 2-class chance is 50%; with 48 test-bag decisions per repeat the
        // binomial 99.9% interval is roughly +/- 24 points.
        assert!(
            (m.mean_accuracy_pct - 50.0).abs() < 25.0,
            "expected chance-level accuracy, got {}",
            m.mean_accuracy_pct
        );
    }

    #[test]
    fn baseline_equals_latent_on_singleton_bags() {
        let (ds, _) = synth_planted(59, 2, 10, 1, 3, 4.0).unwrap();
        let hp = HyperParams {
            components: 1,
            neighbors: 3,
            max_iterations: 5,
            beta: 2.0,
            epsilon: 1e-4,
            variant: Variant::Lfda,
            seed: 1,
            bag_rule: crate::lfda::BagRule::Max,
        };
        let prep = PreprocessSpec::none();
        let baseline = lda_baseline_train(&ds, &hp, &prep).unwrap();
        let latent = train_with_preprocessing(&ds, &hp, &prep).unwrap();
        for bag in &ds.bags {
            let (a, _) = predict_bag(&baseline, bag).unwrap();
            let (b, _) = predict_bag(&latent, bag).unwrap();
            assert_eq!(a, b, "bag {}", bag.id);
        }
    }

    #[test]
    fn rand_rank_complete_and_deterministic() {
        let bag = Bag {
            id: "b".into(),
            label: 0,
            instances: crate::linalg::Matrix::zeros(5, 2),
        };
        let all = rand_rank_baseline(&bag, 5, 3).unwrap();
        let mut sorted = all.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3, 4]);
        assert_eq!(
            rand_rank_baseline(&bag, 3, 9).unwrap(),
            rand_rank_baseline(&bag, 3, 9).unwrap()
        );
    }

    #[test]
    fn rand_rank_frequencies_uniform() {
        let bag = Bag {
            id: "b".into(),
            label: 0,
            instances: crate::linalg::Matrix::zeros(5, 2),
        };
        let mut counts = [0usize; 5];
        for seed in 0..10_000u64 {
            let pick = rand_rank_baseline(&bag, 1, seed).unwrap()[0];
            counts[pick] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            assert!((c as i64 - 2000).abs() <= 150, "index {i} chosen {c} times");
        }
    }

    #[test]
    fn no_leakage_from_test_folds() {
        // Two datasets identical on training bags, different on the test
        // fold, must produce identical preprocessing statistics.
        let (ds_a, _) = synth_planted(61, 2, 6, 4, 3, 4.0).unwrap();
        let mut ds_b = ds_a.clone();
        let plan = make_folds(&ds_a, 2, 7).unwrap();
        let (train_idx, test_idx) = plan.train_test_split(0);
        for &i in &test_idx {
            let bag = &mut ds_b.bags[i];
            let mut perturbed = bag.instances.clone();
            for r in 0..perturbed.rows() {
                for c in 0..perturbed.cols() {
                    perturbed.set(r, c, perturbed.get(r, c) * 3.0 + 1.0);
                }
            }
            bag.instances = perturbed;
        }
        let train_a = ds_a.subset(&train_idx);
        let train_b = ds_b.subset(&train_idx);
        let spec = PreprocessSpec {
            standardize: true,
            pca_dim: Some(2),
        };
        let (xa, _, _) = train_a.flatten();
        let (xb, _, _) = train_b.flatten();
        let pa = Preprocess::fit(&xa, &spec).unwrap();
        let pb = Preprocess::fit(&xb, &spec).unwrap();
        assert_eq!(
            pa.standardizer.as_ref().unwrap().mean,
            pb.standardizer.as_ref().unwrap().mean
        );
        assert_eq!(
            pa.pca.as_ref().unwrap().basis.data(),
            pb.pca.as_ref().unwrap().basis.data()
        );
    }

    #[test]
    fn report_text_and_csv_roundtrip() {
        let (ds, _) = synth_planted(67, 2, 4, 3, 3, 6.0).unwrap();
        let spec = small_spec(vec![Method::LdaBaseline, Method::RandRank]);
        let rt = run_cv(&ds, &spec).unwrap();

        let text = emit_report(&rt, ReportFormat::Text).unwrap();
        assert!(text.contains("LDA"));
        assert!(text.contains("RAND"));

        let csv = emit_report(&rt, ReportFormat::Csv).unwrap();
        let rows = parse_report_csv(&csv).unwrap();
        assert_eq!(rows.len(), 4); // 2 methods x 2 folds
        for m in &rt.methods {
            for r in &m.records {
                let found = rows
                    .iter()
                    .find(|(name, rep, fold, _)| {
                        name == m.method.name() && *rep == r.repeat && *fold == r.fold
                    })
                    .unwrap();
                assert!((found.3 - r.accuracy_pct).abs() < 1e-9);
            }
        }

        let json = emit_report(&rt, ReportFormat::Json).unwrap();
        let back: ResultTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back.methods.len(), rt.methods.len());
    }

    #[test]
    fn empty_methods_rejected() {
        let (ds, _) = synth_planted(71, 2, 4, 3, 3, 6.0).unwrap();
        let mut spec = small_spec(vec![]);
        spec.methods.clear();
        assert!(matches!(
            run_cv(&ds, &spec),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn spec_json_parsing_with_defaults() {
        let spec = ExperimentSpec::from_json(
            r#"{"dataset": "foo.csv", "seed": 3, "methods": ["lda-baseline", "jlfda"]}"#,
        )
        .unwrap();
        assert_eq!(spec.folds, 10);
        assert_eq!(spec.repeats, 10);
        assert!(spec.standardize);
        assert_eq!(spec.methods, vec![Method::LdaBaseline, Method::Jlfda]);
        assert_eq!(spec.hyperparams.components, 3);
        assert_eq!(spec.hyperparams.beta, 40.0);
    }
}
