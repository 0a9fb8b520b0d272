//! Multi-class Fisher discriminant analysis: scatter matrices and the
//! regularized projection obtained from the top eigenvectors of
//! `(S_w + beta I)^+ S_b`.
//!
//! The non-symmetric product is never formed directly. We eigendecompose
//! `S_w + beta I = U L U^T`, build the symmetric
//! `M = L^{-1/2} U^T S_b U L^{-1/2}`, eigendecompose `M`, and map the top
//! eigenvectors back, which keeps the whole solve inside the symmetric
//! eigensolver.

use crate::error::{Error, Result};
use crate::linalg::{normalize_and_fix_sign, sym_eigen, Matrix};

/// Relative eigenvalue cutoff below which trailing discriminant directions
/// are dropped (the between-class scatter has rank at most C-1 and can
/// degenerate further).
const RANK_CUTOFF: f64 = 1e-10;

/// Discriminant projection: a `d x d'` matrix with sign-normalized unit
/// columns and the associated eigenvalues in non-increasing order.
#[derive(Debug, Clone)]
pub struct Projection {
    pub matrix: Matrix,
    pub eigenvalues: Vec<f64>,
}

impl Projection {
    pub fn input_dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.matrix.cols()
    }
}

/// Within/between scatter matrices plus the means they were built from.
#[derive(Debug, Clone)]
pub struct ScatterPair {
    pub within: Matrix,
    pub between: Matrix,
    pub class_means: Matrix,
    pub global_mean: Vec<f64>,
    pub class_counts: Vec<usize>,
}

/// Computes within- and between-class scatter for labeled points.
///
/// Labels are 0-based; every class in `0..num_classes` must have at least
/// one point. `within + between` equals the total scatter.
pub fn scatter(points: &Matrix, labels: &[usize], num_classes: usize) -> Result<ScatterPair> {
    let m = points.rows();
    let d = points.cols();
    if labels.len() != m {
        return Err(Error::Dimension(format!(
            "{m} points but {} labels",
            labels.len()
        )));
    }
    if num_classes < 1 {
        return Err(Error::Label("need at least one class".into()));
    }
    let mut counts = vec![0usize; num_classes];
    for &l in labels {
        if l >= num_classes {
            return Err(Error::Label(format!(
                "label {l} outside 0..{num_classes}"
            )));
        }
        counts[l] += 1;
    }
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Label(format!(
            "class {missing} has no points; scatter needs every class populated"
        )));
    }

    let mut class_means = Matrix::zeros(num_classes, d);
    for (i, &l) in labels.iter().enumerate() {
        for (j, x) in points.row(i).iter().enumerate() {
            let v = class_means.get(l, j) + x;
            class_means.set(l, j, v);
        }
    }
    for c in 0..num_classes {
        let inv = 1.0 / counts[c] as f64;
        for j in 0..d {
            class_means.set(c, j, class_means.get(c, j) * inv);
        }
    }
    let mut global_mean = vec![0.0; d];
    for c in 0..num_classes {
        for (g, mu) in global_mean.iter_mut().zip(class_means.row(c)) {
            *g += counts[c] as f64 * mu;
        }
    }
    for g in &mut global_mean {
        *g /= m as f64;
    }

    let mut within = Matrix::zeros(d, d);
    for (i, &l) in labels.iter().enumerate() {
        let x = points.row(i);
        let mu = class_means.row(l);
        for a in 0..d {
            let da = x[a] - mu[a];
            if da == 0.0 {
                continue;
            }
            for b in a..d {
                let v = within.get(a, b) + da * (x[b] - mu[b]);
                within.set(a, b, v);
            }
        }
    }
    let mut between = Matrix::zeros(d, d);
    for c in 0..num_classes {
        let mu = class_means.row(c);
        let w = counts[c] as f64;
        for a in 0..d {
            let da = mu[a] - global_mean[a];
            if da == 0.0 {
                continue;
            }
            for b in a..d {
                let v = between.get(a, b) + w * da * (mu[b] - global_mean[b]);
                between.set(a, b, v);
            }
        }
    }
    for mat in [&mut within, &mut between] {
        for a in 0..d {
            for b in (a + 1)..d {
                mat.set(b, a, mat.get(a, b));
            }
        }
    }

    Ok(ScatterPair {
        within,
        between,
        class_means,
        global_mean,
        class_counts: counts,
    })
}

/// Solves for the top `target_dim` discriminant directions of
/// `(S_w + beta I)^+ S_b`. The returned width may be smaller when the
/// between-class scatter is rank deficient.
pub fn fit_projection(sc: &ScatterPair, beta: f64, target_dim: usize) -> Result<Projection> {
    if beta < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "regularizer must be >= 0, got {beta}"
        )));
    }
    let d = sc.within.rows();
    if target_dim < 1 || target_dim > d {
        return Err(Error::Dimension(format!(
            "projection width {target_dim} out of range 1..={d}"
        )));
    }

    let total_norm = sc.within.frob_norm() + sc.between.frob_norm();
    if sc.between.frob_norm() <= 1e-12 * total_norm.max(1.0) {
        return Err(Error::NoDiscrimination(
            "between-class scatter is numerically zero; class means coincide".into(),
        ));
    }

    let regularized = sc.within.add_scaled_identity(beta);
    let eig_w = sym_eigen(&regularized)?;
    let lam_max = eig_w
        .eigenvalues
        .iter()
        .map(|l| l.abs())
        .fold(0.0_f64, f64::max);
    let rank_tol = d as f64 * f64::EPSILON * lam_max;

    // T = U L^{-1/2}, with pseudo-inverse semantics on tiny eigenvalues.
    let mut t = Matrix::zeros(d, d);
    for k in 0..d {
        let lam = eig_w.eigenvalues[k];
        if lam.abs() <= rank_tol || lam <= 0.0 {
            continue;
        }
        let s = 1.0 / lam.sqrt();
        for r in 0..d {
            t.set(r, k, eig_w.eigenvectors.get(r, k) * s);
        }
    }

    let m = t.transpose().matmul(&sc.between)?.matmul(&t)?;
    // Guard against asymmetry from accumulated rounding.
    let m = symmetrize(&m);
    let eig_m = sym_eigen(&m)?;

    let top = eig_m.eigenvalues[0];
    if top <= 1e-14 {
        return Err(Error::NoDiscrimination(
            "no positive discriminant eigenvalues; between-class scatter lies in the null space"
                .into(),
        ));
    }
    let mut width = 0;
    for &lam in eig_m.eigenvalues.iter().take(target_dim) {
        if lam > RANK_CUTOFF * top {
            width += 1;
        }
    }
    let width = width.max(1);

    let mut matrix = Matrix::zeros(d, width);
    let mut eigenvalues = Vec::with_capacity(width);
    for k in 0..width {
        let y = eig_m.eigenvectors.column(k);
        let mut col = vec![0.0; d];
        for r in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += t.get(r, j) * y[j];
            }
            col[r] = acc;
        }
        normalize_and_fix_sign(&mut col);
        for (r, v) in col.iter().enumerate() {
            matrix.set(r, k, *v);
        }
        eigenvalues.push(eig_m.eigenvalues[k]);
    }
    Ok(Projection {
        matrix,
        eigenvalues,
    })
}

fn symmetrize(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for r in 0..m.rows() {
        for c in (r + 1)..m.cols() {
            let v = 0.5 * (m.get(r, c) + m.get(c, r));
            out.set(r, c, v);
            out.set(c, r, v);
        }
    }
    out
}

/// Maps points (`m x d`) through the projection: `points * P`.
pub fn project(p: &Projection, points: &Matrix) -> Result<Matrix> {
    if points.cols() != p.input_dim() {
        return Err(Error::Dimension(format!(
            "points have dimension {}, projection expects {}",
            points.cols(),
            p.input_dim()
        )));
    }
    points.matmul(&p.matrix)
}

/// The regularized trace-ratio objective
/// `trace((P^T S_w P)(P^T S_b P)^+) + beta trace(P^T P)`.
pub fn objective(sc: &ScatterPair, p: &Projection, beta: f64) -> Result<f64> {
    let pt = p.matrix.transpose();
    let num = pt.matmul(&sc.within)?.matmul(&p.matrix)?;
    let den = pt.matmul(&sc.between)?.matmul(&p.matrix)?;
    let den_inv = crate::linalg::pseudo_inverse(&symmetrize(&den), None)?;
    let ratio = num.matmul(&den_inv)?.trace();
    let norm: f64 = p.matrix.data().iter().map(|v| v * v).sum();
    Ok(ratio + beta * norm)
}
