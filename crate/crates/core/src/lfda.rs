//! Latent-label training: alternate between per-class Gaussian mixtures in
//! the projected subspace, kNN-vote cluster selection, and a regularized
//! Fisher refit on the relabeled instances.
//!
//! The loop, per outer iteration:
//!
//! 1. project all training instances with the current `P`;
//! 2. per class, fit a `K`-component mixture on that class's instances and
//!    hard-partition them;
//! 3. compute the per-cluster vote weights: every training instance polls
//!    its `N` nearest neighbors in the projected training set, and a
//!    cluster's weight is the average own-class share of its members'
//!    neighborhoods, scaled by the class prior;
//! 4. select one cluster per class (vote weight alone for the plain
//!    variant, mixture prior times vote weight for the joint variant) and
//!    relabel its members with the class label;
//! 5. refit the discriminant projection on the relabeled union and stop
//!    once `P` moves less than `epsilon` in Frobenius norm (after sign
//!    alignment) or the iteration cap is reached.
//!
//! Weights are recomputed from each iteration's own clusters in the same
//! subspace the clusters were fit in, so the selection is always informed.
//! After the loop exits, mixtures and the relabeled reference set are
//! refreshed once in the final subspace so every stored artifact shares one
//! coordinate system.

use crate::error::{Error, Result};
use crate::gmm::{self, ClassMixture, HardPartition};
use crate::lda::{self, Projection};
use crate::linalg::{column_means, pca_fit_transform, sq_dist, Matrix};
use crate::mildata::{Bag, BagDataset, Standardizer};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Cluster-selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Select by posterior vote weight alone.
    Lfda,
    /// Select by the elementwise product of mixture prior and vote weight.
    Jlfda,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Lfda => write!(f, "lfda"),
            Variant::Jlfda => write!(f, "jlfda"),
        }
    }
}

/// How per-instance scores combine into a bag label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BagRule {
    /// Bag score for a class is the maximum instance score.
    Max,
    /// Bag score for a class is the mean instance score.
    Mean,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperParams {
    /// Mixture components per class (K).
    pub components: usize,
    /// Neighbor count for the vote and for prediction (N).
    pub neighbors: usize,
    /// Outer iteration cap (T).
    pub max_iterations: usize,
    /// Regularizer weight on the projection.
    pub beta: f64,
    /// Frobenius-norm convergence threshold on the projection change.
    pub epsilon: f64,
    pub variant: Variant,
    pub seed: u64,
    pub bag_rule: BagRule,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            components: 3,
            neighbors: 4,
            max_iterations: 20,
            beta: 40.0,
            epsilon: 1e-4,
            variant: Variant::Jlfda,
            seed: 0,
            bag_rule: BagRule::Max,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if self.components < 1 {
            return Err(Error::InvalidParameter("components must be >= 1".into()));
        }
        if self.neighbors < 1 {
            return Err(Error::InvalidParameter("neighbors must be >= 1".into()));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidParameter(
                "max_iterations must be >= 1".into(),
            ));
        }
        if self.beta < 0.0 {
            return Err(Error::InvalidParameter("beta must be >= 0".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("epsilon must be > 0".into()));
        }
        Ok(())
    }
}

/// Per-cluster vote weights, one row per class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterWeights {
    pub w: Matrix,
    /// Classes whose entire row is zero (received no votes).
    pub unvoted_classes: Vec<usize>,
}

impl ClusterWeights {
    pub fn uniform(num_classes: usize, k: usize) -> ClusterWeights {
        let mut w = Matrix::zeros(num_classes, k);
        for r in 0..num_classes {
            for c in 0..k {
                w.set(r, c, 1.0 / k as f64);
            }
        }
        ClusterWeights {
            w,
            unvoted_classes: Vec::new(),
        }
    }
}

/// The relabeled training subset: which instances were kept and with what
/// label, plus the per-class selected cluster indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatentState {
    /// Selected cluster index per class.
    pub selected: Vec<usize>,
    /// (bag index, row within bag) for every kept instance.
    pub instance_refs: Vec<(usize, usize)>,
    /// Instance label per kept instance, aligned with `instance_refs`.
    pub labels: Vec<usize>,
    /// Outer iteration that produced this state.
    pub iteration: usize,
}

/// Preprocessing fitted on training data and replayed at prediction time:
/// optional per-feature standardization followed by an optional PCA map.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Preprocess {
    pub standardizer: Option<Standardizer>,
    pub pca: Option<PcaRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaRecord {
    pub mean: Vec<f64>,
    pub basis: Matrix,
}

/// What preprocessing to fit before training.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PreprocessSpec {
    pub standardize: bool,
    pub pca_dim: Option<usize>,
}

impl Default for PreprocessSpec {
    fn default() -> Self {
        PreprocessSpec {
            standardize: true,
            pca_dim: None,
        }
    }
}

impl PreprocessSpec {
    pub fn none() -> Self {
        PreprocessSpec {
            standardize: false,
            pca_dim: None,
        }
    }
}

impl Preprocess {
    /// Fits the configured steps on training instances only.
    pub fn fit(train_instances: &Matrix, spec: &PreprocessSpec) -> Result<Preprocess> {
        let standardizer = spec.standardize.then(|| Standardizer::fit(train_instances));
        let staged = match &standardizer {
            Some(s) => s.transform(train_instances)?,
            None => train_instances.clone(),
        };
        let pca = match spec.pca_dim {
            Some(dim) => {
                let mean = column_means(&staged);
                let (basis, _) = pca_fit_transform(&staged, dim)?;
                Some(PcaRecord { mean, basis })
            }
            None => None,
        };
        Ok(Preprocess { standardizer, pca })
    }

    pub fn transform(&self, instances: &Matrix) -> Result<Matrix> {
        let staged = match &self.standardizer {
            Some(s) => s.transform(instances)?,
            None => instances.clone(),
        };
        match &self.pca {
            Some(p) => {
                if staged.cols() != p.mean.len() {
                    return Err(Error::Dimension(format!(
                        "PCA expects {} features, input has {}",
                        p.mean.len(),
                        staged.cols()
                    )));
                }
                crate::linalg::center_rows(&staged, &p.mean).matmul(&p.basis)
            }
            None => Ok(staged),
        }
    }
}

/// One entry of the convergence trace.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Sign-aligned Frobenius norm of the projection change.
    pub delta_p: f64,
    /// Regularized trace-ratio objective on the relabeled subset.
    pub objective: f64,
}

/// A trained model: projection, per-class mixtures with selected clusters,
/// the labeled reference set, preprocessing, and the convergence trace.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub projection: Projection,
    pub mixtures: Vec<ClassMixture>,
    pub cluster_weights: ClusterWeights,
    pub latent: LatentState,
    /// Relabeled instances projected into the final subspace.
    pub reference_points: Matrix,
    pub reference_labels: Vec<usize>,
    pub preprocess: Preprocess,
    pub hyperparams: HyperParams,
    pub trace: Vec<IterationRecord>,
    pub converged: bool,
    pub label_names: Vec<String>,
    /// Raw feature dimension expected at prediction time.
    pub input_dim: usize,
}

impl TrainedModel {
    pub fn num_classes(&self) -> usize {
        self.mixtures.len()
    }

    pub fn selected(&self) -> &[usize] {
        &self.latent.selected
    }
}

/// Trains on the dataset as-is (no preprocessing).
pub fn train(ds: &BagDataset, hp: &HyperParams) -> Result<TrainedModel> {
    train_with_preprocessing(ds, hp, &PreprocessSpec::none())
}

/// Fits preprocessing on the training instances, then runs the alternating
/// loop in the transformed space.
pub fn train_with_preprocessing(
    ds: &BagDataset,
    hp: &HyperParams,
    prep_spec: &PreprocessSpec,
) -> Result<TrainedModel> {
    hp.validate()?;
    ds.validate()?;
    if ds.num_classes < 2 {
        return Err(Error::Label("training needs at least two classes".into()));
    }

    let (x_raw, inst_bag, inst_label) = ds.flatten();
    let preprocess = Preprocess::fit(&x_raw, prep_spec)?;
    let x = preprocess.transform(&x_raw)?;

    let c = ds.num_classes;
    let k = hp.components;
    let mut class_members: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (i, &l) in inst_label.iter().enumerate() {
        class_members[l].push(i);
    }
    for (class, members) in class_members.iter().enumerate() {
        if members.len() < k {
            return Err(Error::InsufficientData(format!(
                "class {} ({}) has {} instances, need at least {k} for {k} mixture components",
                class,
                ds.label_names[class],
                members.len()
            )));
        }
    }

    // Initialization: plain discriminant fit on bag-propagated labels.
    let sc0 = lda::scatter(&x, &inst_label, c)?;
    let mut projection = lda::fit_projection(&sc0, hp.beta, c - 1)?;

    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations_run = 0;
    // Cluster memberships carried across iterations to warm-start EM; the
    // first iteration fits from scratch.
    let mut carry: Option<Vec<Vec<usize>>> = None;

    for t in 1..=hp.max_iterations {
        iterations_run = t;
        let y = lda::project(&projection, &x)?;
        let fit = fit_iteration(&y, &class_members, &inst_label, hp, c, t, carry.as_deref())?;
        carry = Some(fit.assignments.clone());

        let (x_plus, plus_labels) = build_relabeled(&fit, &class_members);
        let sc_plus = lda::scatter(&x.select_rows(&x_plus), &plus_labels, c)?;
        let new_projection = lda::fit_projection(&sc_plus, hp.beta, c - 1)?;
        let objective = lda::objective(&sc_plus, &new_projection, hp.beta)?;
        let delta_p = aligned_frob_delta(&projection.matrix, &new_projection.matrix);
        trace.push(IterationRecord { delta_p, objective });
        projection = new_projection;

        if delta_p < hp.epsilon {
            converged = true;
            break;
        }
    }

    // Refresh the latent structures once in the final subspace so mixtures,
    // reference set, and projection are mutually consistent.
    let y = lda::project(&projection, &x)?;
    let fit = fit_iteration(
        &y,
        &class_members,
        &inst_label,
        hp,
        c,
        iterations_run + 1,
        carry.as_deref(),
    )?;
    let (x_plus, plus_labels) = build_relabeled(&fit, &class_members);
    let reference_points = y.select_rows(&x_plus);

    let instance_refs = x_plus
        .iter()
        .map(|&i| {
            let bag = inst_bag[i];
            let first = inst_bag.partition_point(|&b| b < bag);
            (bag, i - first)
        })
        .collect();

    Ok(TrainedModel {
        projection,
        mixtures: fit.mixtures,
        cluster_weights: fit.weights,
        latent: LatentState {
            selected: fit.selected,
            instance_refs,
            labels: plus_labels.clone(),
            iteration: iterations_run,
        },
        reference_points,
        reference_labels: plus_labels,
        preprocess,
        hyperparams: hp.clone(),
        trace,
        converged,
        label_names: ds.label_names.clone(),
        input_dim: x_raw.cols(),
    })
}

struct IterationFit {
    mixtures: Vec<ClassMixture>,
    partitions: Vec<HardPartition>,
    /// Per-class hard assignment (class-local indexing), used to warm-start
    /// the next round.
    assignments: Vec<Vec<usize>>,
    weights: ClusterWeights,
    selected: Vec<usize>,
}

/// One latent-inference pass in the current subspace: per-class mixture
/// fit, hard partition, neighborhood vote weights, and selection of a
/// non-empty cluster per class by the variant's rule.
///
/// With `warm_assignments` present, EM starts from the previous round's
/// memberships, which keeps cluster identity stable as the projection
/// settles; the first round fits from scratch with seeded restarts.
#[allow(clippy::too_many_arguments)]
fn fit_iteration(
    y: &Matrix,
    class_members: &[Vec<usize>],
    inst_label: &[usize],
    hp: &HyperParams,
    num_classes: usize,
    iteration: usize,
    warm_assignments: Option<&[Vec<usize>]>,
) -> Result<IterationFit> {
    let mut mixtures = Vec::with_capacity(num_classes);
    let mut partitions = Vec::with_capacity(num_classes);
    for class in 0..num_classes {
        let pts = y.select_rows(&class_members[class]);
        let fresh = gmm::fit_em(
            &pts,
            hp.components,
            hp.seed.wrapping_add(iteration as u64),
            gmm::DEFAULT_MAX_ITER,
            gmm::DEFAULT_LL_TOL,
        )?;
        let mix = match warm_assignments {
            Some(assignments) => {
                let warm = gmm::fit_em_warm(
                    &pts,
                    hp.components,
                    &assignments[class],
                    gmm::DEFAULT_MAX_ITER,
                    gmm::DEFAULT_LL_TOL,
                )?;
                // Keep membership continuity unless the fresh fit is a
                // clearly better optimum.
                let ll_warm = warm.ll_trace.last().copied().unwrap_or(f64::NEG_INFINITY);
                let ll_fresh = fresh.ll_trace.last().copied().unwrap_or(f64::NEG_INFINITY);
                if ll_fresh > ll_warm + 1e-7 * ll_warm.abs().max(1.0) {
                    fresh
                } else {
                    warm
                }
            }
            None => fresh,
        };
        let part = gmm::hard_partition(&mix, &pts)?;
        mixtures.push(mix);
        partitions.push(part);
    }
    let members: Vec<Vec<Vec<usize>>> = partitions
        .iter()
        .enumerate()
        .map(|(class, part)| {
            part.clusters
                .iter()
                .map(|locals| {
                    locals
                        .iter()
                        .map(|&local| class_members[class][local])
                        .collect()
                })
                .collect()
        })
        .collect();
    let n = hp.neighbors.min(y.rows().saturating_sub(1)).max(1);
    let weights = compute_cluster_weights(&members, y, inst_label, n)?;
    let mut selected = Vec::with_capacity(num_classes);
    for class in 0..num_classes {
        let ranked = ranked_clusters(&mixtures[class], weights.w.row(class), hp.variant);
        let sel = ranked
            .iter()
            .copied()
            .find(|&j| !partitions[class].clusters[j].is_empty())
            .expect("at least one cluster holds a point");
        selected.push(sel);
    }
    let assignments = partitions.iter().map(|p| p.assignment.clone()).collect();
    Ok(IterationFit {
        mixtures,
        partitions,
        assignments,
        weights,
        selected,
    })
}

/// Union of the selected clusters, each instance labeled with its class.
fn build_relabeled(fit: &IterationFit, class_members: &[Vec<usize>]) -> (Vec<usize>, Vec<usize>) {
    let mut x_plus = Vec::new();
    let mut labels = Vec::new();
    for (class, part) in fit.partitions.iter().enumerate() {
        for &local in &part.clusters[fit.selected[class]] {
            x_plus.push(class_members[class][local]);
            labels.push(class);
        }
    }
    (x_plus, labels)
}

/// Frobenius norm of the column-wise sign-aligned difference between two
/// projections. Extra columns (rank changes) count with their full norm.
pub fn aligned_frob_delta(prev: &Matrix, new: &Matrix) -> f64 {
    let common = prev.cols().min(new.cols());
    let mut acc = 0.0;
    for c in 0..common {
        let mut dpos = 0.0;
        let mut dneg = 0.0;
        for r in 0..prev.rows().min(new.rows()) {
            let a = prev.get(r, c);
            let b = new.get(r, c);
            dpos += (a - b) * (a - b);
            dneg += (a + b) * (a + b);
        }
        acc += dpos.min(dneg);
    }
    let wider = if prev.cols() > common { prev } else { new };
    for c in common..wider.cols() {
        for r in 0..wider.rows() {
            acc += wider.get(r, c) * wider.get(r, c);
        }
    }
    acc.sqrt()
}

/// Ranks clusters by the variant's selection score with deterministic
/// tie-breaks: larger mixture weight, then lower index.
fn ranked_clusters(mix: &ClassMixture, w_row: &[f64], variant: Variant) -> Vec<usize> {
    let k = mix.k();
    let scores: Vec<f64> = (0..k)
        .map(|j| match variant {
            Variant::Lfda => w_row[j],
            Variant::Jlfda => mix.weights[j] * w_row[j],
        })
        .collect();
    let all_zero = scores.iter().all(|&s| s == 0.0);
    let mut order: Vec<usize> = (0..k).collect();
    if all_zero {
        order.sort_by(|&a, &b| {
            mix.weights[b]
                .partial_cmp(&mix.weights[a])
                .unwrap()
                .then(a.cmp(&b))
        });
    } else {
        order.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .unwrap()
                .then(mix.weights[b].partial_cmp(&mix.weights[a]).unwrap())
                .then(a.cmp(&b))
        });
    }
    order
}

/// Selection outcome: the chosen cluster and whether the all-zero fallback
/// (largest mixture weight) had to be used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub cluster: usize,
    pub fallback: bool,
}

/// Picks the cluster maximizing the variant's score: the vote weight for
/// the plain variant, prior times vote weight for the joint variant. Ties
/// break toward the larger mixture weight, then the lower index. When all
/// scores are zero the largest mixture weight wins and the result is
/// flagged.
pub fn select_cluster(mix: &ClassMixture, w_row: &[f64], variant: Variant) -> Result<Selection> {
    if w_row.len() != mix.k() {
        return Err(Error::Dimension(format!(
            "{} weights for {} components",
            w_row.len(),
            mix.k()
        )));
    }
    let all_zero = match variant {
        Variant::Lfda => w_row.iter().all(|&w| w == 0.0),
        Variant::Jlfda => (0..mix.k()).all(|j| mix.weights[j] * w_row[j] == 0.0),
    };
    let order = ranked_clusters(mix, w_row, variant);
    Ok(Selection {
        cluster: order[0],
        fallback: all_zero,
    })
}

/// Neighborhood vote weights for every (class, cluster) pair.
///
/// Every cluster member polls its `n_neighbors` nearest points in the
/// projected training set `y` (itself excluded); neighbors vote with their
/// bag-propagated labels. The weight of cluster `j` in class `i` is the
/// average class-`i` share of its members' neighborhoods, scaled by the
/// class instance-share prior. Per-neighborhood class counts sum to
/// `n_neighbors`, so the normalization over classes is built in and every
/// weight lies in [0, 1]. Empty clusters get weight zero; classes whose
/// whole row is zero are flagged.
pub fn compute_cluster_weights(
    cluster_members: &[Vec<Vec<usize>>],
    y: &Matrix,
    y_labels: &[usize],
    n_neighbors: usize,
) -> Result<ClusterWeights> {
    let num_classes = cluster_members.len();
    if num_classes == 0 {
        return Err(Error::EmptyInput("no classes".into()));
    }
    let k = cluster_members[0].len();
    if y.rows() != y_labels.len() {
        return Err(Error::Dimension("points and labels disagree".into()));
    }
    if n_neighbors == 0 || n_neighbors >= y.rows() {
        return Err(Error::InvalidParameter(format!(
            "neighbor count {n_neighbors} outside 1..={} (self excluded)",
            y.rows().saturating_sub(1)
        )));
    }
    let mut class_present = vec![false; num_classes];
    for &l in y_labels {
        class_present[l] = true;
    }
    if let Some(missing) = class_present.iter().position(|p| !p) {
        return Err(Error::MissingReference(format!(
            "class {missing} has no points in the voting set"
        )));
    }

    let mut priors = vec![0.0; num_classes];
    for &l in y_labels {
        priors[l] += 1.0;
    }
    for p in &mut priors {
        *p /= y_labels.len() as f64;
    }

    let mut w = Matrix::zeros(num_classes, k);
    let mut counts = vec![0usize; num_classes];
    for (class, clusters) in cluster_members.iter().enumerate() {
        for (j, members) in clusters.iter().enumerate() {
            if members.is_empty() {
                continue;
            }
            let mut hits = 0usize;
            for &g in members {
                let _ = neighbor_scan(
                    y,
                    y_labels,
                    y.row(g),
                    Some(g),
                    n_neighbors,
                    &mut counts,
                );
                hits += counts[class];
            }
            let share = hits as f64 / (members.len() * n_neighbors) as f64;
            w.set(class, j, priors[class] * share);
        }
    }
    let unvoted_classes = (0..num_classes)
        .filter(|&class| (0..k).all(|j| w.get(class, j) == 0.0))
        .collect();
    Ok(ClusterWeights { w, unvoted_classes })
}

/// Counts the class labels among the `n` nearest reference points and
/// returns the mean neighbor distance. Distance ties break toward the
/// lower reference index; `exclude` drops one reference (self queries).
fn neighbor_scan(
    refs: &Matrix,
    ref_labels: &[usize],
    query: &[f64],
    exclude: Option<usize>,
    n: usize,
    counts: &mut [usize],
) -> f64 {
    counts.iter_mut().for_each(|c| *c = 0);
    // Small sorted buffer of (distance, index); refs scanned in index order
    // so strict comparison keeps the lowest index on ties.
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(n + 1);
    for j in 0..refs.rows() {
        if exclude == Some(j) {
            continue;
        }
        let d = sq_dist(refs.row(j), query);
        if best.len() == n && d >= best[n - 1].0 {
            continue;
        }
        let pos = best.partition_point(|&(bd, _)| bd <= d);
        best.insert(pos, (d, j));
        if best.len() > n {
            best.pop();
        }
    }
    let mut dist_sum = 0.0;
    for &(d, j) in &best {
        counts[ref_labels[j]] += 1;
        dist_sum += d.sqrt();
    }
    dist_sum / best.len().max(1) as f64
}

/// Per-instance class scores for one bag: the fraction of each instance's
/// `N` nearest reference points carrying each label.
pub fn instance_scores(model: &TrainedModel, bag: &Bag) -> Result<Matrix> {
    Ok(instance_scores_with_locality(model, bag)?.0)
}

/// Scores plus each instance's mean neighbor distance (how deep inside the
/// reference set it sits).
fn instance_scores_with_locality(model: &TrainedModel, bag: &Bag) -> Result<(Matrix, Vec<f64>)> {
    if bag.instances.cols() != model.input_dim {
        return Err(Error::Dimension(format!(
            "bag instances have dimension {}, model expects {}",
            bag.instances.cols(),
            model.input_dim
        )));
    }
    let transformed = model.preprocess.transform(&bag.instances)?;
    let y = lda::project(&model.projection, &transformed)?;
    let c = model.num_classes();
    let n = model
        .hyperparams
        .neighbors
        .min(model.reference_points.rows());
    let mut scores = Matrix::zeros(y.rows(), c);
    let mut locality = Vec::with_capacity(y.rows());
    let mut counts = vec![0usize; c];
    for i in 0..y.rows() {
        let mean_dist = neighbor_scan(
            &model.reference_points,
            &model.reference_labels,
            y.row(i),
            None,
            n,
            &mut counts,
        );
        for (class, &cnt) in counts.iter().enumerate() {
            scores.set(i, class, cnt as f64 / n as f64);
        }
        locality.push(mean_dist);
    }
    Ok((scores, locality))
}

/// Full prediction output for a bag.
#[derive(Debug, Clone)]
pub struct BagPrediction {
    pub label: usize,
    /// Bag-level score per class after the bag rule.
    pub class_scores: Vec<f64>,
    /// Raw per-instance kNN scores, `n_i x C`.
    pub instance_scores: Matrix,
}

/// Predicts a bag label: per-instance kNN scores combined by the model's
/// bag rule (max-over-instances by default). Exact score ties between
/// classes go to the class whose best-scoring instance sits deepest inside
/// the reference set (smallest mean neighbor distance), then to the lower
/// class index.
pub fn predict_bag(model: &TrainedModel, bag: &Bag) -> Result<(usize, Matrix)> {
    let pred = predict_bag_detailed(model, bag)?;
    Ok((pred.label, pred.instance_scores))
}

/// [`predict_bag`] with the combined bag-level class scores included.
pub fn predict_bag_detailed(model: &TrainedModel, bag: &Bag) -> Result<BagPrediction> {
    let (scores, locality) = instance_scores_with_locality(model, bag)?;
    let c = model.num_classes();
    let mut bag_score = vec![0.0; c];
    let mut champion_dist = vec![f64::INFINITY; c];
    for class in 0..c {
        match model.hyperparams.bag_rule {
            BagRule::Max => {
                let mut best = f64::NEG_INFINITY;
                for i in 0..scores.rows() {
                    let s = scores.get(i, class);
                    if s > best {
                        best = s;
                        champion_dist[class] = locality[i];
                    } else if s == best && locality[i] < champion_dist[class] {
                        champion_dist[class] = locality[i];
                    }
                }
                bag_score[class] = best;
            }
            BagRule::Mean => {
                let sum: f64 = (0..scores.rows()).map(|i| scores.get(i, class)).sum();
                bag_score[class] = sum / scores.rows() as f64;
            }
        }
    }
    let mut label = 0;
    for class in 1..c {
        if bag_score[class] > bag_score[label]
            || (bag_score[class] == bag_score[label]
                && champion_dist[class] < champion_dist[label])
        {
            label = class;
        }
    }
    Ok(BagPrediction {
        label,
        class_scores: bag_score,
        instance_scores: scores,
    })
}

/// Ranked representative instances of a bag for one class.
#[derive(Debug, Clone)]
pub struct RankedInstances {
    /// Instance indices in non-increasing score order.
    pub order: Vec<usize>,
    /// Scores aligned with `order`.
    pub scores: Vec<f64>,
    /// Set when more instances were requested than the bag holds.
    pub truncated: bool,
}

/// Scores instances by the selected cluster of `class`: negative distance
/// to the cluster center for the plain variant, prior-weighted Gaussian
/// log-density for the joint variant. Ties break by instance index.
pub fn rank_instances(
    model: &TrainedModel,
    bag: &Bag,
    class: usize,
    top_m: usize,
    variant: Variant,
) -> Result<RankedInstances> {
    if class >= model.num_classes() {
        return Err(Error::Label(format!(
            "class {class} outside 0..{}",
            model.num_classes()
        )));
    }
    if bag.instances.cols() != model.input_dim {
        return Err(Error::Dimension(format!(
            "bag instances have dimension {}, model expects {}",
            bag.instances.cols(),
            model.input_dim
        )));
    }
    let transformed = model.preprocess.transform(&bag.instances)?;
    let y = lda::project(&model.projection, &transformed)?;
    let mix = &model.mixtures[class];
    let j = model.latent.selected[class];
    let center = mix.means.row(j).to_vec();

    let scores: Vec<f64> = (0..y.rows())
        .map(|i| match variant {
            Variant::Lfda => -sq_dist(y.row(i), &center).sqrt(),
            Variant::Jlfda => mix.weights[j].ln() + mix.component_log_density(j, y.row(i)),
        })
        .collect();
    let mut order: Vec<usize> = (0..y.rows()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let truncated = top_m > order.len();
    let keep = top_m.min(order.len());
    let order: Vec<usize> = order.into_iter().take(keep).collect();
    let ranked_scores = order.iter().map(|&i| scores[i]).collect();
    Ok(RankedInstances {
        order,
        scores: ranked_scores,
        truncated,
    })
}

/// Objective value of a relabeled subset under a projection: scatter on the
/// subset, then the regularized trace ratio.
pub fn evaluate_objective(
    points: &Matrix,
    labels: &[usize],
    num_classes: usize,
    projection: &Projection,
    beta: f64,
) -> Result<f64> {
    let sc = lda::scatter(points, labels, num_classes)?;
    lda::objective(&sc, projection, beta)
}

// ---------------------------------------------------------------------------
// Model serialization
// ---------------------------------------------------------------------------

const MODEL_VERSION: &str = "lfda-model/1";

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: String,
    hyperparams: HyperParams,
    preprocess: Preprocess,
    input_dim: usize,
    label_names: Vec<String>,
    projection: Matrix,
    projection_eigenvalues: Vec<f64>,
    classes: Vec<ClassRecord>,
    cluster_weights: Matrix,
    unvoted_classes: Vec<usize>,
    latent: LatentState,
    reference_points: Matrix,
    reference_labels: Vec<usize>,
    trace: Vec<IterationRecord>,
    converged: bool,
}

#[derive(Serialize, Deserialize)]
struct ClassRecord {
    label: String,
    weights: Vec<f64>,
    means: Matrix,
    covariances: Vec<Matrix>,
    selected: usize,
}

impl TrainedModel {
    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            version: MODEL_VERSION.to_string(),
            hyperparams: self.hyperparams.clone(),
            preprocess: self.preprocess.clone(),
            input_dim: self.input_dim,
            label_names: self.label_names.clone(),
            projection: self.projection.matrix.clone(),
            projection_eigenvalues: self.projection.eigenvalues.clone(),
            classes: self
                .mixtures
                .iter()
                .enumerate()
                .map(|(c, mix)| ClassRecord {
                    label: self.label_names[c].clone(),
                    weights: mix.weights.clone(),
                    means: mix.means.clone(),
                    covariances: mix.covariances.clone(),
                    selected: self.latent.selected[c],
                })
                .collect(),
            cluster_weights: self.cluster_weights.w.clone(),
            unvoted_classes: self.cluster_weights.unvoted_classes.clone(),
            latent: self.latent.clone(),
            reference_points: self.reference_points.clone(),
            reference_labels: self.reference_labels.clone(),
            trace: self.trace.clone(),
            converged: self.converged,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<TrainedModel> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.version != MODEL_VERSION {
            return Err(Error::Model(format!(
                "unsupported model version {:?}, expected {MODEL_VERSION:?}",
                file.version
            )));
        }
        let mixtures = file
            .classes
            .iter()
            .map(|rec| {
                ClassMixture::from_parameters(
                    rec.weights.clone(),
                    rec.means.clone(),
                    rec.covariances.clone(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TrainedModel {
            projection: Projection {
                matrix: file.projection,
                eigenvalues: file.projection_eigenvalues,
            },
            mixtures,
            cluster_weights: ClusterWeights {
                w: file.cluster_weights,
                unvoted_classes: file.unvoted_classes,
            },
            latent: file.latent,
            reference_points: file.reference_points,
            reference_labels: file.reference_labels,
            preprocess: file.preprocess,
            hyperparams: file.hyperparams,
            trace: file.trace,
            converged: file.converged,
            label_names: file.label_names,
            input_dim: file.input_dim,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<TrainedModel> {
        TrainedModel::from_json(&std::fs::read_to_string(path)?)
    }
}
