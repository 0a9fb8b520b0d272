//! Full-covariance Gaussian mixtures fitted by EM, used per class in the
//! projected subspace.
//!
//! Initialization is k-means++ seeding plus a short Lloyd refinement, all
//! driven by a seeded RNG so fits are reproducible. Covariances carry a
//! ridge floor so every component stays positive-definite even on tiny
//! clusters.

use crate::error::{Error, Result};
use crate::linalg::{sq_dist, sym_eigen, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LN_2PI: f64 = 1.8378770664093453;

/// Ratio of mean data variance used as the covariance ridge floor.
const COV_FLOOR_RATIO: f64 = 1e-6;

/// Absolute fallback floor for (near-)constant data.
const COV_FLOOR_MIN: f64 = 1e-12;

/// Effective-count threshold below which a component is considered
/// collapsed and reinitialized.
const COLLAPSE_THRESHOLD: f64 = 1e-6;

const KMEANS_ITERS: usize = 10;

/// Independent EM restarts per fit; the highest-likelihood run wins.
const N_RESTARTS: usize = 8;

pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_LL_TOL: f64 = 1e-6;

/// A fitted Gaussian mixture for one class.
#[derive(Debug, Clone)]
pub struct ClassMixture {
    /// Mixture weights, non-negative, summing to one.
    pub weights: Vec<f64>,
    /// Component means, `K x d`.
    pub means: Matrix,
    /// Component covariances, each `d x d`, positive-definite.
    pub covariances: Vec<Matrix>,
    /// Cached inverses of the covariances.
    precisions: Vec<Matrix>,
    /// Cached log-determinants of the covariances.
    log_dets: Vec<f64>,
    /// Ridge added to covariance diagonals during fitting.
    pub cov_floor: f64,
    /// Training-time responsibilities (`m x K`); absent on reconstructed
    /// mixtures.
    pub responsibilities: Option<Matrix>,
    /// Per-iteration log-likelihood trace from the fit.
    pub ll_trace: Vec<f64>,
}

impl ClassMixture {
    /// Number of components.
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    /// Subspace dimension.
    pub fn dim(&self) -> usize {
        self.means.cols()
    }

    /// Rebuilds a mixture from stored parameters (e.g. a model file),
    /// recomputing the cached inverses.
    pub fn from_parameters(
        weights: Vec<f64>,
        means: Matrix,
        covariances: Vec<Matrix>,
    ) -> Result<ClassMixture> {
        if weights.is_empty() || weights.len() != means.rows() || weights.len() != covariances.len()
        {
            return Err(Error::Dimension(
                "mixture parameters disagree on component count".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mixture weights must be non-negative and sum to 1, got sum {sum}"
            )));
        }
        let mut precisions = Vec::with_capacity(covariances.len());
        let mut log_dets = Vec::with_capacity(covariances.len());
        for cov in &covariances {
            let (prec, log_det) = invert_spd(cov)?;
            precisions.push(prec);
            log_dets.push(log_det);
        }
        Ok(ClassMixture {
            weights,
            means,
            covariances,
            precisions,
            log_dets,
            cov_floor: 0.0,
            responsibilities: None,
            ll_trace: Vec::new(),
        })
    }

    /// Log density of a single component at `point`.
    pub fn component_log_density(&self, comp: usize, point: &[f64]) -> f64 {
        let d = self.dim();
        debug_assert_eq!(point.len(), d);
        let mean = self.means.row(comp);
        let prec = &self.precisions[comp];
        let mut maha = 0.0;
        for r in 0..d {
            let dr = point[r] - mean[r];
            if dr == 0.0 {
                continue;
            }
            for c in 0..d {
                maha += dr * prec.get(r, c) * (point[c] - mean[c]);
            }
        }
        -0.5 * (d as f64 * LN_2PI + self.log_dets[comp] + maha)
    }
}

/// Inverse and log-determinant of a symmetric positive-definite matrix via
/// its eigendecomposition. Non-positive eigenvalues are clamped to keep
/// the result usable on borderline inputs.
fn invert_spd(cov: &Matrix) -> Result<(Matrix, f64)> {
    let eig = sym_eigen(cov)?;
    let d = cov.rows();
    let clamp = eig.eigenvalues[0].abs().max(COV_FLOOR_MIN) * 1e-12;
    let mut prec = Matrix::zeros(d, d);
    let mut log_det = 0.0;
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let lam = lam.max(clamp);
        log_det += lam.ln();
        let inv = 1.0 / lam;
        let col = eig.eigenvectors.column(k);
        for r in 0..d {
            for c in 0..d {
                let v = prec.get(r, c) + inv * col[r] * col[c];
                prec.set(r, c, v);
            }
        }
    }
    Ok((prec, log_det))
}

/// Hard cluster assignment derived from a mixture.
#[derive(Debug, Clone)]
pub struct HardPartition {
    /// Component index per point.
    pub assignment: Vec<usize>,
    /// Point indices per component.
    pub clusters: Vec<Vec<usize>>,
    /// Components that received no points.
    pub empty_components: Vec<usize>,
}

/// Fits a `k`-component full-covariance Gaussian mixture by EM.
///
/// Runs several independently seeded restarts and keeps the run with the
/// highest final log-likelihood. The winning run's per-iteration
/// log-likelihood trace is kept on the result; it is non-decreasing up to
/// floating-point slack. Each run terminates when the relative
/// log-likelihood change drops under `ll_tol` or after `max_iter` rounds.
pub fn fit_em(
    points: &Matrix,
    k: usize,
    seed: u64,
    max_iter: usize,
    ll_tol: f64,
) -> Result<ClassMixture> {
    let restarts = if k == 1 { 1 } else { N_RESTARTS };
    let mut best: Option<ClassMixture> = None;
    for r in 0..restarts {
        let run_seed = seed.wrapping_add(r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mix = fit_em_single(points, k, run_seed, max_iter, ll_tol)?;
        let better = match &best {
            None => true,
            Some(b) => {
                mix.ll_trace.last().copied().unwrap_or(f64::NEG_INFINITY)
                    > b.ll_trace.last().copied().unwrap_or(f64::NEG_INFINITY)
            }
        };
        if better {
            best = Some(mix);
        }
    }
    Ok(best.expect("at least one restart runs"))
}

/// Fits a mixture by EM warm-started from a hard assignment (e.g. the
/// previous round's partition). No randomness is involved.
pub fn fit_em_warm(
    points: &Matrix,
    k: usize,
    init_assignment: &[usize],
    max_iter: usize,
    ll_tol: f64,
) -> Result<ClassMixture> {
    if init_assignment.len() != points.rows() {
        return Err(Error::Dimension(format!(
            "{} initial assignments for {} points",
            init_assignment.len(),
            points.rows()
        )));
    }
    if let Some(&bad) = init_assignment.iter().find(|&&a| a >= k) {
        return Err(Error::InvalidParameter(format!(
            "initial assignment {bad} outside 0..{k}"
        )));
    }
    validate_em_inputs(points, k)?;
    run_em(points, k, init_assignment, max_iter, ll_tol)
}

fn fit_em_single(
    points: &Matrix,
    k: usize,
    seed: u64,
    max_iter: usize,
    ll_tol: f64,
) -> Result<ClassMixture> {
    validate_em_inputs(points, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let assignment = kmeans(points, k, &mut rng);
    run_em(points, k, &assignment, max_iter, ll_tol)
}

fn validate_em_inputs(points: &Matrix, k: usize) -> Result<()> {
    let m = points.rows();
    if k < 1 {
        return Err(Error::InvalidParameter("need at least one component".into()));
    }
    if m < k {
        return Err(Error::InsufficientData(format!(
            "{m} points cannot support {k} mixture components"
        )));
    }
    let all_identical = (1..m).all(|r| points.row(r) == points.row(0));
    if all_identical && k > 1 {
        return Err(Error::DegenerateData(format!(
            "all {m} points identical; cannot fit {k} distinct components"
        )));
    }
    Ok(())
}

fn run_em(
    points: &Matrix,
    k: usize,
    init_assignment: &[usize],
    max_iter: usize,
    ll_tol: f64,
) -> Result<ClassMixture> {
    let m = points.rows();
    let d = points.cols();
    let data_var = per_dim_variance(points);
    let mean_var = data_var.iter().sum::<f64>() / d as f64;
    let floor = (COV_FLOOR_RATIO * mean_var).max(COV_FLOOR_MIN);

    // One M-step from the hard assignment gives the initial model.
    let mut resp = Matrix::zeros(m, k);
    for (i, &a) in init_assignment.iter().enumerate() {
        resp.set(i, a, 1.0);
    }
    let mut params = m_step(points, &resp, floor, &data_var, None)?;

    let mut ll_trace = Vec::new();
    let mut prev_ll = f64::NEG_INFINITY;
    let mut final_resp = resp;
    for iter in 0..max_iter {
        let (ll, resp) = e_step(points, &params);
        ll_trace.push(ll);
        final_resp = resp;
        if iter > 0 {
            let rel = (ll - prev_ll).abs() / prev_ll.abs().max(1.0);
            if rel < ll_tol {
                break;
            }
        }
        prev_ll = ll;
        params = m_step(points, &final_resp, floor, &data_var, Some(&params))?;
    }

    Ok(ClassMixture {
        weights: params.weights,
        means: params.means,
        covariances: params.covariances,
        precisions: params.precisions,
        log_dets: params.log_dets,
        cov_floor: floor,
        responsibilities: Some(final_resp),
        ll_trace,
    })
}

struct MixtureParams {
    weights: Vec<f64>,
    means: Matrix,
    covariances: Vec<Matrix>,
    precisions: Vec<Matrix>,
    log_dets: Vec<f64>,
}

impl MixtureParams {
    fn log_joint(&self, point: &[f64], comp: usize) -> f64 {
        let d = self.means.cols();
        let mean = self.means.row(comp);
        let prec = &self.precisions[comp];
        let mut maha = 0.0;
        for r in 0..d {
            let dr = point[r] - mean[r];
            if dr == 0.0 {
                continue;
            }
            for c in 0..d {
                maha += dr * prec.get(r, c) * (point[c] - mean[c]);
            }
        }
        let w = self.weights[comp];
        let log_w = if w > 0.0 { w.ln() } else { f64::NEG_INFINITY };
        log_w - 0.5 * (d as f64 * LN_2PI + self.log_dets[comp] + maha)
    }
}

fn per_dim_variance(points: &Matrix) -> Vec<f64> {
    let m = points.rows() as f64;
    let mean = crate::linalg::column_means(points);
    let mut var = vec![0.0; points.cols()];
    for r in 0..points.rows() {
        for (v, (x, mu)) in var.iter_mut().zip(points.row(r).iter().zip(&mean)) {
            let dd = x - mu;
            *v += dd * dd;
        }
    }
    for v in &mut var {
        *v /= m;
    }
    var
}

/// E-step: total log-likelihood and normalized responsibilities.
fn e_step(points: &Matrix, params: &MixtureParams) -> (f64, Matrix) {
    let m = points.rows();
    let k = params.weights.len();
    let mut resp = Matrix::zeros(m, k);
    let mut total_ll = 0.0;
    for i in 0..m {
        let x = points.row(i);
        let mut row_max = f64::NEG_INFINITY;
        let mut logs = vec![0.0; k];
        for (c, l) in logs.iter_mut().enumerate() {
            *l = params.log_joint(x, c);
            row_max = row_max.max(*l);
        }
        // log-sum-exp
        let mut sum = 0.0;
        for l in &logs {
            sum += (l - row_max).exp();
        }
        let lse = row_max + sum.ln();
        total_ll += lse;
        for (c, l) in logs.iter().enumerate() {
            resp.set(i, c, (l - lse).exp());
        }
    }
    (total_ll, resp)
}

/// M-step with collapsed-component reinitialization: a component whose
/// effective count vanishes is moved to the lowest-density point and the
/// weights are renormalized.
fn m_step(
    points: &Matrix,
    resp: &Matrix,
    floor: f64,
    data_var: &[f64],
    previous: Option<&MixtureParams>,
) -> Result<MixtureParams> {
    let m = points.rows();
    let d = points.cols();
    let k = resp.cols();

    let mut counts = vec![0.0; k];
    for i in 0..m {
        for (c, v) in counts.iter_mut().zip(resp.row(i)) {
            *c += v;
        }
    }

    let mut weights = vec![0.0; k];
    let mut means = Matrix::zeros(k, d);
    let mut covariances = Vec::with_capacity(k);
    let mut collapsed = Vec::new();

    for c in 0..k {
        if counts[c] < COLLAPSE_THRESHOLD {
            collapsed.push(c);
            covariances.push(Matrix::zeros(d, d)); // placeholder, replaced below
            continue;
        }
        let inv_n = 1.0 / counts[c];
        for i in 0..m {
            let r = resp.get(i, c);
            if r == 0.0 {
                continue;
            }
            for (j, x) in points.row(i).iter().enumerate() {
                let v = means.get(c, j) + r * x;
                means.set(c, j, v);
            }
        }
        for j in 0..d {
            means.set(c, j, means.get(c, j) * inv_n);
        }
        let mut cov = Matrix::zeros(d, d);
        for i in 0..m {
            let r = resp.get(i, c);
            if r == 0.0 {
                continue;
            }
            let x = points.row(i);
            for a in 0..d {
                let da = x[a] - means.get(c, a);
                if da == 0.0 {
                    continue;
                }
                for b in a..d {
                    let v = cov.get(a, b) + r * da * (x[b] - means.get(c, b));
                    cov.set(a, b, v);
                }
            }
        }
        for a in 0..d {
            for b in a..d {
                let v = cov.get(a, b) * inv_n;
                cov.set(a, b, v);
                cov.set(b, a, v);
            }
        }
        for a in 0..d {
            cov.set(a, a, cov.get(a, a) + floor);
        }
        covariances.push(cov);
        weights[c] = counts[c] / m as f64;
    }

    // Reinitialize collapsed components at the lowest-density points under
    // the previous parameters (or the data mean when none exist yet).
    for &c in &collapsed {
        let target = match previous {
            Some(prev) => {
                let mut worst = 0usize;
                let mut worst_ll = f64::INFINITY;
                for i in 0..m {
                    let x = points.row(i);
                    let mut row_max = f64::NEG_INFINITY;
                    for comp in 0..k {
                        row_max = row_max.max(prev.log_joint(x, comp));
                    }
                    if row_max < worst_ll {
                        worst_ll = row_max;
                        worst = i;
                    }
                }
                points.row(worst).to_vec()
            }
            None => crate::linalg::column_means(points),
        };
        for (j, v) in target.iter().enumerate() {
            means.set(c, j, *v);
        }
        let mut cov = Matrix::zeros(d, d);
        for (j, v) in data_var.iter().enumerate() {
            cov.set(j, j, v.max(floor) + floor);
        }
        covariances[c] = cov;
        weights[c] = 1.0 / m as f64;
    }
    let wsum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= wsum;
    }

    let mut precisions = Vec::with_capacity(k);
    let mut log_dets = Vec::with_capacity(k);
    for cov in &covariances {
        let (prec, log_det) = invert_spd(cov)?;
        precisions.push(prec);
        log_dets.push(log_det);
    }
    Ok(MixtureParams {
        weights,
        means,
        covariances,
        precisions,
        log_dets,
    })
}

/// k-means++ seeding followed by a short Lloyd refinement; returns the hard
/// assignment.
fn kmeans(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let m = points.rows();
    let d = points.cols();

    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(points.row(rng.gen_range(0..m)).to_vec());
    let mut min_dist: Vec<f64> = (0..m)
        .map(|i| sq_dist(points.row(i), &centers[0]))
        .collect();
    while centers.len() < k {
        let total: f64 = min_dist.iter().sum();
        let next = if total <= 0.0 {
            // All remaining mass at existing centers; pick uniformly.
            rng.gen_range(0..m)
        } else {
            let mut target = rng.gen_range(0.0..total);
            let mut chosen = m - 1;
            for (i, &w) in min_dist.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        };
        centers.push(points.row(next).to_vec());
        for i in 0..m {
            let dd = sq_dist(points.row(i), centers.last().unwrap());
            if dd < min_dist[i] {
                min_dist[i] = dd;
            }
        }
    }

    let mut assignment = vec![0usize; m];
    for _ in 0..KMEANS_ITERS {
        // Assign.
        for (i, a) in assignment.iter_mut().enumerate() {
            let x = points.row(i);
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let dd = sq_dist(x, center);
                if dd < best_d {
                    best_d = dd;
                    best = c;
                }
            }
            *a = best;
        }
        // Update.
        let mut counts = vec![0usize; k];
        let mut sums = vec![vec![0.0; d]; k];
        for (i, &a) in assignment.iter().enumerate() {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Move the empty center to the point farthest from its
                // current center.
                let mut far = 0usize;
                let mut far_d = -1.0;
                for (i, &a) in assignment.iter().enumerate() {
                    let dd = sq_dist(points.row(i), &centers[a]);
                    if dd > far_d {
                        far_d = dd;
                        far = i;
                    }
                }
                centers[c] = points.row(far).to_vec();
            } else {
                for (j, s) in sums[c].iter().enumerate() {
                    centers[c][j] = s / counts[c] as f64;
                }
            }
        }
    }
    // Final assignment against the refined centers.
    for (i, a) in assignment.iter_mut().enumerate() {
        let x = points.row(i);
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (c, center) in centers.iter().enumerate() {
            let dd = sq_dist(x, center);
            if dd < best_d {
                best_d = dd;
                best = c;
            }
        }
        *a = best;
    }
    assignment
}

/// Assigns every point to its maximum-responsibility component.
pub fn hard_partition(mix: &ClassMixture, points: &Matrix) -> Result<HardPartition> {
    if points.cols() != mix.dim() {
        return Err(Error::Dimension(format!(
            "points have dimension {}, mixture has {}",
            points.cols(),
            mix.dim()
        )));
    }
    let k = mix.k();
    let mut assignment = Vec::with_capacity(points.rows());
    let mut clusters = vec![Vec::new(); k];
    for i in 0..points.rows() {
        let x = points.row(i);
        let mut best = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for c in 0..k {
            let w = mix.weights[c];
            let log_w = if w > 0.0 { w.ln() } else { f64::NEG_INFINITY };
            let score = log_w + mix.component_log_density(c, x);
            if score > best_score {
                best_score = score;
                best = c;
            }
        }
        assignment.push(best);
        clusters[best].push(i);
    }
    let empty_components = clusters
        .iter()
        .enumerate()
        .filter(|(_, members)| members.is_empty())
        .map(|(c, _)| c)
        .collect();
    Ok(HardPartition {
        assignment,
        clusters,
        empty_components,
    })
}

/// Log mixture density at `point` via log-sum-exp over components.
pub fn log_density(mix: &ClassMixture, point: &[f64]) -> Result<f64> {
    if point.len() != mix.dim() {
        return Err(Error::Dimension(format!(
            "point has dimension {}, mixture has {}",
            point.len(),
            mix.dim()
        )));
    }
    let mut logs = Vec::with_capacity(mix.k());
    let mut max = f64::NEG_INFINITY;
    for c in 0..mix.k() {
        let w = mix.weights[c];
        let log_w = if w > 0.0 { w.ln() } else { f64::NEG_INFINITY };
        let l = log_w + mix.component_log_density(c, point);
        max = max.max(l);
        logs.push(l);
    }
    if !max.is_finite() {
        return Ok(f64::NEG_INFINITY);
    }
    let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
    Ok(max + sum.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn two_clouds(seed: u64, n_each: usize, sep: f64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        for i in 0..(2 * n_each) {
            let center = if i < n_each { 0.0 } else { sep };
            rows.push(vec![
                center + 0.5 * rng.gen_range(-1.0..1.0),
                0.5 * rng.gen_range(-1.0..1.0),
            ]);
        }
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn separated_clouds_recovered() {
        let sep = 8.0;
        let pts = two_clouds(1, 60, sep);
        let mix = fit_em(&pts, 2, 3, DEFAULT_MAX_ITER, DEFAULT_LL_TOL).unwrap();
        let mut m0 = mix.means.row(0)[0];
        let mut m1 = mix.means.row(1)[0];
        if m0 > m1 {
            std::mem::swap(&mut m0, &mut m1);
        }
        assert!((m0 - 0.0).abs() < 0.1 * sep, "low mean {m0}");
        assert!((m1 - sep).abs() < 0.1 * sep, "high mean {m1}");
        for w in &mix.weights {
            assert!((w - 0.5).abs() < 0.05, "weight {w}");
        }
    }

    #[test]
    fn k1_closed_form() {
        let pts = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 6.0], vec![5.0, 4.0]]).unwrap();
        let mix = fit_em(&pts, 1, 0, DEFAULT_MAX_ITER, DEFAULT_LL_TOL).unwrap();
        assert!((mix.means.get(0, 0) - 3.0).abs() < 1e-12);
        assert!((mix.means.get(0, 1) - 4.0).abs() < 1e-12);
        // Population covariance plus floor on the diagonal.
        let expect_00 = ((1.0f64 - 3.0).powi(2) + 0.0 + (5.0f64 - 3.0).powi(2)) / 3.0;
        assert!((mix.covariances[0].get(0, 0) - expect_00 - mix.cov_floor).abs() < 1e-12);
        assert_eq!(mix.weights, vec![1.0]);
    }

    #[test]
    fn deterministic_fit() {
        let pts = two_clouds(5, 40, 4.0);
        let a = fit_em(&pts, 3, 11, DEFAULT_MAX_ITER, DEFAULT_LL_TOL).unwrap();
        let b = fit_em(&pts, 3, 11, DEFAULT_MAX_ITER, DEFAULT_LL_TOL).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.means.data(), b.means.data());
        for (ca, cb) in a.covariances.iter().zip(&b.covariances) {
            assert_eq!(ca.data(), cb.data());
        }
    }

    #[test]
    fn insufficient_points_rejected() {
        let pts = Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(matches!(
            fit_em(&pts, 3, 0, 10, 1e-6),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn identical_points_rejected_for_k2() {
        let pts = Matrix::from_rows(&vec![vec![1.0, 1.0]; 5]).unwrap();
        assert!(matches!(
            fit_em(&pts, 2, 0, 10, 1e-6),
            Err(Error::DegenerateData(_))
        ));
    }

    #[test]
    fn identical_points_ok_for_k1() {
        let pts = Matrix::from_rows(&vec![vec![2.0]; 4]).unwrap();
        let mix = fit_em(&pts, 1, 0, 10, 1e-6).unwrap();
        assert!((mix.means.get(0, 0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ll_trace_non_decreasing() {
        for seed in 0..30u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 500);
            let rows: Vec<Vec<f64>> = (0..50)
                .map(|_| vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)])
                .collect();
            let pts = Matrix::from_rows(&rows).unwrap();
            let mix = fit_em(&pts, 3, seed, DEFAULT_MAX_ITER, DEFAULT_LL_TOL).unwrap();
            for w in mix.ll_trace.windows(2) {
                assert!(
                    w[1] >= w[0] - 1e-7 * w[0].abs().max(1.0),
                    "seed {seed}: {} -> {}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn responsibilities_rows_sum_to_one() {
        let pts = two_clouds(9, 25, 3.0);
        let mix = fit_em(&pts, 2, 1, DEFAULT_MAX_ITER, DEFAULT_LL_TOL).unwrap();
        let resp = mix.responsibilities.as_ref().unwrap();
        for i in 0..resp.rows() {
            let s: f64 = resp.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn covariance_floor_respected() {
        let pts = two_clouds(2, 30, 5.0);
        let mix = fit_em(&pts, 2, 7, DEFAULT_MAX_ITER, DEFAULT_LL_TOL).unwrap();
        for cov in &mix.covariances {
            let eig = sym_eigen(cov).unwrap();
            let min = eig.eigenvalues.last().unwrap();
            assert!(*min >= mix.cov_floor * 0.999, "min eigenvalue {min}");
        }
    }

    #[test]
    fn weights_sum_to_one() {
        let pts = two_clouds(3, 20, 2.0);
        let mix = fit_em(&pts, 3, 5, DEFAULT_MAX_ITER, DEFAULT_LL_TOL).unwrap();
        let s: f64 = mix.weights.iter().sum();
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn partition_forced_assignment() {
        let mix = ClassMixture::from_parameters(
            vec![0.5, 0.5],
            Matrix::from_rows(&[vec![0.0, 0.0], vec![10.0, 10.0]]).unwrap(),
            vec![Matrix::identity(2), Matrix::identity(2)],
        )
        .unwrap();
        let pts = Matrix::from_rows(&[vec![10.0, 10.0], vec![0.1, -0.1]]).unwrap();
        let part = hard_partition(&mix, &pts).unwrap();
        assert_eq!(part.assignment, vec![1, 0]);
        assert!(part.empty_components.is_empty());
    }

    #[test]
    fn partition_single_component() {
        let mix = ClassMixture::from_parameters(
            vec![1.0],
            Matrix::from_rows(&[vec![0.0]]).unwrap(),
            vec![Matrix::identity(1)],
        )
        .unwrap();
        let pts = Matrix::from_rows(&[vec![-3.0], vec![0.0], vec![7.0]]).unwrap();
        let part = hard_partition(&mix, &pts).unwrap();
        assert_eq!(part.clusters[0], vec![0, 1, 2]);
    }

    #[test]
    fn partition_matches_density_oracle() {
        // Direct per-point density evaluation with explicit 2x2 inverses.
        let cov_a = Matrix::from_vec(2, 2, vec![2.0, 0.3, 0.3, 1.0]).unwrap();
        let cov_b = Matrix::from_vec(2, 2, vec![0.5, -0.1, -0.1, 0.8]).unwrap();
        let mix = ClassMixture::from_parameters(
            vec![0.3, 0.7],
            Matrix::from_rows(&[vec![-1.0, 0.0], vec![2.0, 1.0]]).unwrap(),
            vec![cov_a.clone(), cov_b.clone()],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0)])
            .collect();
        let pts = Matrix::from_rows(&rows).unwrap();
        let part = hard_partition(&mix, &pts).unwrap();

        let dens = |cov: &Matrix, mean: &[f64], w: f64, x: &[f64]| -> f64 {
            let det = cov.get(0, 0) * cov.get(1, 1) - cov.get(0, 1) * cov.get(1, 0);
            let inv = [
                [cov.get(1, 1) / det, -cov.get(0, 1) / det],
                [-cov.get(1, 0) / det, cov.get(0, 0) / det],
            ];
            let dx = [x[0] - mean[0], x[1] - mean[1]];
            let maha = dx[0] * (inv[0][0] * dx[0] + inv[0][1] * dx[1])
                + dx[1] * (inv[1][0] * dx[0] + inv[1][1] * dx[1]);
            w * (-0.5 * maha).exp() / (2.0 * std::f64::consts::PI * det.sqrt())
        };
        for (i, row) in rows.iter().enumerate() {
            let da = dens(&cov_a, &[-1.0, 0.0], 0.3, row);
            let db = dens(&cov_b, &[2.0, 1.0], 0.7, row);
            let expect = if da >= db { 0 } else { 1 };
            assert_eq!(part.assignment[i], expect, "point {i}");
        }
    }

    #[test]
    fn log_density_standard_normal() {
        let mix = ClassMixture::from_parameters(
            vec![1.0],
            Matrix::from_rows(&[vec![0.0]]).unwrap(),
            vec![Matrix::identity(1)],
        )
        .unwrap();
        let v = log_density(&mix, &[0.0]).unwrap();
        assert!((v - (-0.9189385332046727)).abs() < 1e-9);
    }

    #[test]
    fn log_density_two_component_midpoint() {
        // Equal-weight unit-variance components at 0 and 2; density at the
        // midpoint x = 1 is exp(-1/2)/sqrt(2 pi).
        let mix = ClassMixture::from_parameters(
            vec![0.5, 0.5],
            Matrix::from_rows(&[vec![0.0], vec![2.0]]).unwrap(),
            vec![Matrix::identity(1), Matrix::identity(1)],
        )
        .unwrap();
        let v = log_density(&mix, &[1.0]).unwrap();
        let expect = ((-0.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt()).ln();
        assert!((v - expect).abs() < 1e-9);
    }

    #[test]
    fn density_integrates_to_one() {
        let mix = ClassMixture::from_parameters(
            vec![0.4, 0.6],
            Matrix::from_rows(&[vec![-1.0], vec![1.5]]).unwrap(),
            vec![
                Matrix::from_vec(1, 1, vec![0.7]).unwrap(),
                Matrix::from_vec(1, 1, vec![1.3]).unwrap(),
            ],
        )
        .unwrap();
        // Trapezoid quadrature over a wide grid.
        let (lo, hi, steps) = (-12.0, 12.0, 24_000usize);
        let h = (hi - lo) / steps as f64;
        let mut integral = 0.0;
        for i in 0..=steps {
            let x = lo + h * i as f64;
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            integral += w * log_density(&mix, &[x]).unwrap().exp();
        }
        integral *= h;
        assert!((integral - 1.0).abs() < 1e-3, "integral {integral}");
    }
}
