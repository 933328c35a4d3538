//! Shared least-squares machinery: ordinary least squares with hat-matrix
//! diagnostics, fast leave-one-out errors with the small-sample correction,
//! balanced fold partitions, and the least-angle-regression path.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::metrics::empirical_variance;

/// Relative singular-value tolerance for rank decisions.
const RANK_TOL: f64 = 1e-12;

/// A hat diagonal this close to one means the point is interpolated and the
/// leave-one-out residual is undefined.
const HAT_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum RegressionError {
    #[error("matrix entry ({0}, {1}) is not finite")]
    NonFinite(usize, usize),
    #[error("matrix has {rows} rows but {targets} targets")]
    ShapeMismatch { rows: usize, targets: usize },
    #[error("matrix must be non-empty")]
    Empty,
    #[error("singular-value decomposition did not converge")]
    SvdFailure,
    #[error("leave-one-out error undefined: point {0} is interpolated (hat diagonal = 1)")]
    InterpolatingFit(usize),
    #[error("model size {p} must be smaller than the sample count {n}")]
    ModelTooLarge { p: usize, n: usize },
    #[error("target variance is zero; relative errors undefined")]
    ZeroTargetVariance,
    #[error("fold count {k} invalid for {n} samples (need 2 <= k <= n)")]
    BadFoldCount { k: usize, n: usize },
    #[error("all predictor columns are degenerate")]
    AllColumnsDegenerate,
}

/// Ordinary least-squares fit with the diagnostics needed for fast
/// cross-validation errors.
#[derive(Debug, Clone)]
pub struct LeastSquaresFit {
    pub coefficients: DVector<f64>,
    /// Diagonal of the projection (hat) matrix, one entry per sample.
    pub hat_diagonal: DVector<f64>,
    /// tr((ΨᵀΨ)⁻¹), restricted to the numerical rank when deficient.
    pub trace_inv_gram: f64,
    pub residuals: DVector<f64>,
    pub rank: usize,
    /// Set when the numerical rank fell short of the column count; the
    /// coefficients are then the minimum-norm solution.
    pub rank_deficient: bool,
}

/// Least-squares solve through an orthogonal factorization: column-pivoted
/// QR when the system has full column rank, otherwise an SVD giving the
/// minimum-norm solution, flagged on the returned fit.
pub fn ols(matrix: &DMatrix<f64>, targets: &DVector<f64>) -> Result<LeastSquaresFit, RegressionError> {
    let (n, p) = (matrix.nrows(), matrix.ncols());
    if n == 0 || p == 0 {
        return Err(RegressionError::Empty);
    }
    if targets.len() != n {
        return Err(RegressionError::ShapeMismatch {
            rows: n,
            targets: targets.len(),
        });
    }
    for j in 0..p {
        for i in 0..n {
            if !matrix[(i, j)].is_finite() {
                return Err(RegressionError::NonFinite(i, j));
            }
        }
    }
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(RegressionError::ShapeMismatch {
            rows: n,
            targets: targets.len(),
        });
    }

    if p <= n {
        if let Some(fit) = ols_qr(matrix, targets) {
            return Ok(fit);
        }
    }
    ols_svd(matrix, targets)
}

/// Full-rank path: Householder QR. Returns `None` when the triangle's
/// diagonal signals possible rank deficiency, deferring to the SVD path.
fn ols_qr(matrix: &DMatrix<f64>, targets: &DVector<f64>) -> Option<LeastSquaresFit> {
    let (n, p) = (matrix.nrows(), matrix.ncols());
    let qr = matrix.clone().qr();
    let r = qr.r();
    let lead = (0..p).map(|k| r[(k, k)].abs()).fold(0.0f64, f64::max);
    if lead == 0.0 {
        return None;
    }
    for k in 0..p {
        if r[(k, k)].abs() <= RANK_TOL * lead {
            return None;
        }
    }
    let q = qr.q();
    let rhs = q.transpose() * targets;
    let coefficients = r.solve_upper_triangular(&rhs)?;
    let mut hat = DVector::<f64>::zeros(n);
    for i in 0..n {
        let mut acc = 0.0;
        for k in 0..p {
            let v = q[(i, k)];
            acc += v * v;
        }
        hat[i] = acc;
    }
    // tr((ΨᵀΨ)⁻¹) = ‖R⁻¹‖²_F, invariant to the column permutation
    let mut r_inv = DMatrix::<f64>::zeros(p, p);
    for col in (0..p).rev() {
        r_inv[(col, col)] = 1.0 / r[(col, col)];
        for row in (0..col).rev() {
            let mut acc = 0.0;
            for k in (row + 1)..=col {
                acc += r[(row, k)] * r_inv[(k, col)];
            }
            r_inv[(row, col)] = -acc / r[(row, row)];
        }
    }
    let trace_inv_gram = r_inv.iter().map(|v| v * v).sum();
    let residuals = targets - matrix * &coefficients;
    Some(LeastSquaresFit {
        coefficients,
        hat_diagonal: hat,
        trace_inv_gram,
        residuals,
        rank: p,
        rank_deficient: false,
    })
}

/// Minimum-norm path through the rank-truncated SVD pseudo-inverse.
fn ols_svd(matrix: &DMatrix<f64>, targets: &DVector<f64>) -> Result<LeastSquaresFit, RegressionError> {
    let (n, p) = (matrix.nrows(), matrix.ncols());
    let svd = matrix
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or(RegressionError::SvdFailure)?;
    let u = svd.u.as_ref().ok_or(RegressionError::SvdFailure)?;
    let v_t = svd.v_t.as_ref().ok_or(RegressionError::SvdFailure)?;
    let sigma = &svd.singular_values;
    let sigma_max = sigma.iter().cloned().fold(0.0f64, f64::max);
    let tol = sigma_max * RANK_TOL;
    let rank = sigma.iter().filter(|&&s| s > tol).count();
    if rank == 0 {
        return Err(RegressionError::AllColumnsDegenerate);
    }

    // minimum-norm solution through the rank-truncated pseudo-inverse
    let uty = u.transpose() * targets;
    let mut scaled = DVector::<f64>::zeros(sigma.len());
    for k in 0..rank {
        scaled[k] = uty[k] / sigma[k];
    }
    let coefficients = v_t.transpose() * scaled;
    let residuals = targets - matrix * &coefficients;

    let mut hat = DVector::<f64>::zeros(n);
    for i in 0..n {
        let mut acc = 0.0;
        for k in 0..rank {
            let q = u[(i, k)];
            acc += q * q;
        }
        hat[i] = acc;
    }
    let trace_inv_gram = (0..rank).map(|k| 1.0 / (sigma[k] * sigma[k])).sum();

    Ok(LeastSquaresFit {
        coefficients,
        hat_diagonal: hat,
        trace_inv_gram,
        residuals,
        rank,
        rank_deficient: rank < p,
    })
}

/// Fast leave-one-out error: (1/N) Σ (residual_i / (1 − h_i))².
pub fn loo_error(fit: &LeastSquaresFit) -> Result<f64, RegressionError> {
    let n = fit.residuals.len();
    let mut acc = 0.0;
    for i in 0..n {
        let denom = 1.0 - fit.hat_diagonal[i];
        if denom <= HAT_TOL {
            return Err(RegressionError::InterpolatingFit(i));
        }
        let r = fit.residuals[i] / denom;
        acc += r * r;
    }
    Ok(acc / n as f64)
}

/// Relative leave-one-out error with the small-sample correction factor
/// (1 − P/N)⁻¹ · (1 + tr((ΨᵀΨ)⁻¹)).
pub fn corrected_loo(
    fit: &LeastSquaresFit,
    targets: &DVector<f64>,
    model_size: usize,
    n: usize,
) -> Result<f64, RegressionError> {
    if model_size >= n {
        return Err(RegressionError::ModelTooLarge { p: model_size, n });
    }
    let var = empirical_variance(targets.as_slice());
    if var <= 0.0 {
        return Err(RegressionError::ZeroTargetVariance);
    }
    let raw = loo_error(fit)?;
    let factor =
        (1.0 - model_size as f64 / n as f64).recip() * (1.0 + fit.trace_inv_gram);
    Ok(raw / var * factor)
}

/// Balanced random partition into `k` folds.
#[derive(Debug, Clone)]
pub struct FoldPartition {
    /// Fold label in 0..k for every sample.
    pub assignments: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl FoldPartition {
    pub fn fold_indices(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn complement_indices(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &f)| f != fold)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Random partition of {0..n} into `k` folds whose sizes differ by at most
/// one; reproducible from the seed.
pub fn kfold_partition(n: usize, k: usize, seed: u64) -> Result<FoldPartition, RegressionError> {
    if k < 2 || k > n {
        return Err(RegressionError::BadFoldCount { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut assignments = vec![0usize; n];
    for (pos, &idx) in order.iter().enumerate() {
        assignments[idx] = pos % k;
    }
    Ok(FoldPartition {
        assignments,
        k,
        seed,
    })
}

/// Result of a least-angle-regression run: nested active sets, one
/// predictor entering per step, plus the columns that were excluded as
/// degenerate before the path started.
#[derive(Debug, Clone)]
pub struct LarPath {
    /// `steps[k]` lists the original column indices active after step k+1;
    /// each is a prefix of the next.
    pub steps: Vec<Vec<usize>>,
    pub excluded_columns: Vec<usize>,
    /// |correlation| of each active predictor with the internal residual
    /// after each step, for the equiangularity diagnostic (the entries of
    /// one step agree for an exact equiangular walk).
    pub active_correlations: Vec<Vec<f64>>,
}

impl LarPath {
    /// Entry order of the predictors (last element of each nested set).
    pub fn entry_order(&self) -> Vec<usize> {
        self.steps.iter().filter_map(|s| s.last().copied()).collect()
    }
}

/// Least-angle regression on centered, unit-normalized columns. The
/// intercept is handled by the caller (targets are centered internally).
/// The path runs for at most min(valid columns, N − 1) steps.
pub fn lar_path(matrix: &DMatrix<f64>, targets: &DVector<f64>) -> Result<LarPath, RegressionError> {
    let (n, p) = (matrix.nrows(), matrix.ncols());
    if n == 0 || p == 0 {
        return Err(RegressionError::Empty);
    }
    if targets.len() != n {
        return Err(RegressionError::ShapeMismatch {
            rows: n,
            targets: targets.len(),
        });
    }

    // center and normalize predictors; drop numerically constant columns
    let mut cols: Vec<DVector<f64>> = Vec::with_capacity(p);
    let mut col_ids: Vec<usize> = Vec::with_capacity(p);
    let mut excluded_columns = Vec::new();
    for j in 0..p {
        let col = matrix.column(j);
        for i in 0..n {
            if !col[i].is_finite() {
                return Err(RegressionError::NonFinite(i, j));
            }
        }
        let mean = col.sum() / n as f64;
        let centered = DVector::from_fn(n, |i, _| col[i] - mean);
        let norm = centered.norm();
        let raw_scale = col.norm().max(1.0);
        if norm <= 1e-12 * raw_scale {
            excluded_columns.push(j);
            continue;
        }
        cols.push(centered / norm);
        col_ids.push(j);
    }
    if cols.is_empty() {
        return Err(RegressionError::AllColumnsDegenerate);
    }

    let y_mean = targets.sum() / n as f64;
    let mut residual = DVector::from_fn(n, |i, _| targets[i] - y_mean);
    let y_scale = residual.norm().max(1e-300);

    let p_valid = cols.len();
    let max_steps = p_valid.min(n.saturating_sub(1));
    let mut active: Vec<usize> = Vec::new(); // positions into `cols`
    let mut signs: Vec<f64> = Vec::new();
    let mut in_active = vec![false; p_valid];
    let mut chol_l: Vec<Vec<f64>> = Vec::new(); // lower factor of signed Gram
    let mut steps: Vec<Vec<usize>> = Vec::new();
    let mut active_correlations: Vec<Vec<f64>> = Vec::new();

    while active.len() < max_steps {
        // correlations with the current residual
        let mut best: Option<(usize, f64)> = None;
        let mut c_all = vec![0.0f64; p_valid];
        for (idx, col) in cols.iter().enumerate() {
            c_all[idx] = col.dot(&residual);
            if !in_active[idx] {
                let a = c_all[idx].abs();
                if best.map_or(true, |(_, b)| a > b) {
                    best = Some((idx, a));
                }
            }
        }
        let Some((entering, c_max)) = best else { break };
        if c_max <= 1e-13 * y_scale {
            break; // residual already orthogonal to everything left
        }

        // grow the signed Gram Cholesky by the entering column
        let s_new = c_all[entering].signum();
        let mut g_new = vec![0.0f64; active.len()];
        for (row, (&a_idx, &s_a)) in active.iter().zip(signs.iter()).enumerate() {
            g_new[row] = s_new * s_a * cols[entering].dot(&cols[a_idx]);
        }
        // forward-substitute L * l12 = g_new
        let mut l12 = g_new;
        for r in 0..l12.len() {
            let mut v = l12[r];
            for c in 0..r {
                v -= chol_l[r][c] * l12[c];
            }
            l12[r] = v / chol_l[r][r];
        }
        let d = 1.0 - l12.iter().map(|v| v * v).sum::<f64>();
        if d <= 1e-12 {
            break; // entering column is numerically collinear with the active set
        }
        let mut new_row = l12;
        new_row.push(d.sqrt());
        chol_l.push(new_row);
        active.push(entering);
        signs.push(s_new);
        in_active[entering] = true;

        let k = active.len();
        // equiangular direction: solve G a = 1 with G = L Lᵀ
        let mut a_vec = vec![1.0f64; k];
        for r in 0..k {
            let mut v = a_vec[r];
            for c in 0..r {
                v -= chol_l[r][c] * a_vec[c];
            }
            a_vec[r] = v / chol_l[r][r];
        }
        for r in (0..k).rev() {
            let mut v = a_vec[r];
            for c in (r + 1)..k {
                v -= chol_l[c][r] * a_vec[c];
            }
            a_vec[r] = v / chol_l[r][r];
        }
        let ones_dot: f64 = a_vec.iter().sum();
        if ones_dot <= 0.0 {
            break;
        }
        let a_norm = ones_dot.sqrt().recip();
        let w: Vec<f64> = a_vec.iter().map(|v| v * a_norm).collect();

        let mut u = DVector::<f64>::zeros(n);
        for ((&a_idx, &s_a), &w_a) in active.iter().zip(signs.iter()).zip(w.iter()) {
            u.axpy(s_a * w_a, &cols[a_idx], 1.0);
        }

        // correlation of the active set (shared by construction)
        let c_active = c_all[entering].abs();

        let gamma = if k == max_steps {
            c_active / a_norm
        } else {
            let mut gamma = c_active / a_norm;
            for (idx, col) in cols.iter().enumerate() {
                if in_active[idx] {
                    continue;
                }
                let aj = col.dot(&u);
                for cand in [
                    (c_active - c_all[idx]) / (a_norm - aj),
                    (c_active + c_all[idx]) / (a_norm + aj),
                ] {
                    if cand > 1e-13 && cand < gamma {
                        gamma = cand;
                    }
                }
            }
            gamma
        };

        residual.axpy(-gamma, &u, 1.0);
        steps.push(active.iter().map(|&idx| col_ids[idx]).collect());
        active_correlations.push(
            active
                .iter()
                .map(|&idx| cols[idx].dot(&residual).abs())
                .collect(),
        );
    }

    Ok(LarPath {
        steps,
        excluded_columns,
        active_correlations,
    })
}

/// Incremental scorer for hybrid least-angle regression: given the LAR
/// entry order, computes the corrected leave-one-out error of the OLS refit
/// on every prefix (a constant column is always included first) without
/// refitting from scratch.
///
/// Returns one entry per prefix size 0..=order.len(), where prefix k keeps
/// the constant plus the first k entered predictors. `None` marks prefixes
/// whose refit is degenerate (interpolating, dependent, or P ≥ N).
pub(crate) fn score_prefixes(
    matrix: &DMatrix<f64>,
    entry_order: &[usize],
    targets: &DVector<f64>,
) -> Result<Vec<Option<f64>>, RegressionError> {
    let n = matrix.nrows();
    let var = empirical_variance(targets.as_slice());
    if var <= 0.0 {
        return Err(RegressionError::ZeroTargetVariance);
    }

    let mut q_cols: Vec<DVector<f64>> = Vec::with_capacity(entry_order.len() + 1);
    let mut r_inv: Vec<Vec<f64>> = Vec::new(); // columns of R⁻¹
    let mut hat = DVector::<f64>::zeros(n);
    let mut fitted = DVector::<f64>::zeros(n);
    let mut trace_inv_gram = 0.0f64;
    let mut scores = Vec::with_capacity(entry_order.len() + 1);
    let mut dead = false;

    // prefix columns: constant first, then predictors in entry order
    let constant = DVector::<f64>::from_element(n, 1.0);
    let mut pending: Vec<DVector<f64>> = vec![constant];
    pending.extend(entry_order.iter().map(|&j| matrix.column(j).into_owned()));

    for (step, x) in pending.into_iter().enumerate() {
        let p = step + 1; // model size including the constant
        if dead || p >= n {
            scores.push(None);
            continue;
        }
        // modified Gram-Schmidt with one reorthogonalization pass
        let mut r_col = vec![0.0f64; q_cols.len()];
        let mut perp = x.clone();
        for (j, q) in q_cols.iter().enumerate() {
            let c = q.dot(&perp);
            perp.axpy(-c, q, 1.0);
            r_col[j] = c;
        }
        for (j, q) in q_cols.iter().enumerate() {
            let c = q.dot(&perp);
            perp.axpy(-c, q, 1.0);
            r_col[j] += c;
        }
        let rho = perp.norm();
        if rho <= 1e-12 * x.norm().max(1.0) {
            dead = true; // numerically dependent column; later prefixes inherit it
            scores.push(None);
            continue;
        }
        let q_new = perp / rho;

        // extend R⁻¹ by its new column: (−R⁻¹ r / ρ, 1/ρ)
        let k = q_cols.len();
        let mut new_col = vec![0.0f64; k + 1];
        for row in 0..k {
            let mut acc = 0.0;
            for (j, col) in r_inv.iter().enumerate().skip(row) {
                if j < k {
                    acc += col[row] * r_col[j];
                }
            }
            new_col[row] = -acc / rho;
        }
        new_col[k] = 1.0 / rho;
        trace_inv_gram += new_col.iter().map(|v| v * v).sum::<f64>();
        r_inv.push(new_col);

        let proj = q_new.dot(targets);
        fitted.axpy(proj, &q_new, 1.0);
        for i in 0..n {
            hat[i] += q_new[i] * q_new[i];
        }
        q_cols.push(q_new);

        // corrected LOO for this prefix
        let mut acc = 0.0;
        let mut interpolating = false;
        for i in 0..n {
            let denom = 1.0 - hat[i];
            if denom <= HAT_TOL {
                interpolating = true;
                break;
            }
            let r = (targets[i] - fitted[i]) / denom;
            acc += r * r;
        }
        if interpolating {
            scores.push(None);
            continue;
        }
        let raw = acc / n as f64;
        let factor = (1.0 - p as f64 / n as f64).recip() * (1.0 + trace_inv_gram);
        scores.push(Some(raw / var * factor));
    }
    Ok(scores)
}
