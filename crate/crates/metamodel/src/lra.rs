//! Canonical low-rank approximations built by a greedy sequence of
//! correction steps (alternating least squares over one dimension at a
//! time) and updating steps (re-solving the normalizing coefficients),
//! with rank and degree selected by 3-fold cross-validation or a corrected
//! leave-one-out criterion.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{eval_univariate_all, PolyFamily};
use crate::metrics::empirical_variance;
use crate::regression::{self, RegressionError};

#[derive(Debug, Error)]
pub enum LraError {
    #[error("need at least {need} design points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("points are {rows}x{cols} but {responses} responses / {dims} degrees given")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        responses: usize,
        dims: usize,
    },
    #[error("response variance is zero; relative errors undefined")]
    ZeroVariance,
    #[error("correction step degenerate: {0}")]
    DegenerateCorrection(String),
    #[error("rank candidates exhausted: {0}")]
    NoValidRank(String),
    #[error("candidate list must not be empty")]
    EmptyCandidates,
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error("model document: {0}")]
    BadDocument(String),
    #[error("expected {expected}-dimensional point, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Exit rule for the alternating sweeps inside one correction step: stop
/// when the decrease of the relative empirical error between two successive
/// sweeps falls below `min_error_decrease` (an increase also stops), or
/// after `max_iterations` sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingRule {
    pub max_iterations: usize,
    pub min_error_decrease: f64,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            min_error_decrease: 1e-6,
        }
    }
}

impl StoppingRule {
    pub fn validate(&self) -> Result<(), LraError> {
        if self.max_iterations == 0 {
            return Err(LraError::BadDocument(
                "stopping rule needs max_iterations >= 1".into(),
            ));
        }
        if !(self.min_error_decrease >= 0.0) {
            return Err(LraError::BadDocument(
                "stopping rule needs min_error_decrease >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// One rank-one term: per-dimension polynomial coefficient vectors, the
/// product of whose univariate expansions forms the term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankOneComponent {
    /// `coeffs[i][k]` multiplies the degree-k orthonormal polynomial in
    /// dimension i; each vector has length p_i + 1.
    pub coeffs: Vec<Vec<f64>>,
}

impl RankOneComponent {
    pub fn eval(&self, families: &[PolyFamily], z: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .zip(families.iter())
            .zip(z.iter())
            .map(|((c, &fam), &x)| {
                let table = eval_univariate_all(fam, c.len() - 1, x);
                c.iter().zip(table.iter()).map(|(a, b)| a * b).sum::<f64>()
            })
            .product()
    }
}

/// Rank/degree choice recorded on a selected model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LraSelection {
    pub rank: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub degree: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub err_cv3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub err_loo_corrected: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cv_seed: Option<u64>,
}

/// A canonical low-rank approximation Σ_l b_l Π_i (Σ_k z_kl P_k(x_i)).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LraModel {
    families: Vec<PolyFamily>,
    degrees: Vec<u32>,
    components: Vec<RankOneComponent>,
    /// Normalizing coefficients, re-estimated at every updating step.
    b: Vec<f64>,
    stopping: StoppingRule,
    /// Sweeps spent in each correction step.
    iterations: Vec<usize>,
    /// Relative empirical error after each updating step, by rank.
    rank_errors: Vec<f64>,
    /// Per-sweep relative error trace of each correction step.
    sweep_errors: Vec<Vec<f64>>,
    /// Corrected leave-one-out error of each updating step, by rank, where
    /// defined.
    loo_errors: Vec<Option<f64>>,
    /// Set when some updating step met collinear components and fell back
    /// to the minimum-norm solution.
    collinear_warning: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    selection: Option<LraSelection>,
}

impl LraModel {
    pub fn rank(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.families.len()
    }

    pub fn families(&self) -> &[PolyFamily] {
        &self.families
    }

    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    pub fn components(&self) -> &[RankOneComponent] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.b
    }

    pub fn iterations(&self) -> &[usize] {
        &self.iterations
    }

    pub fn rank_errors(&self) -> &[f64] {
        &self.rank_errors
    }

    pub fn sweep_errors(&self) -> &[Vec<f64>] {
        &self.sweep_errors
    }

    pub fn loo_errors(&self) -> &[Option<f64>] {
        &self.loo_errors
    }

    pub fn collinear_warning(&self) -> bool {
        self.collinear_warning
    }

    pub fn selection(&self) -> Option<&LraSelection> {
        self.selection.as_ref()
    }

    pub fn predict(&self, z: &[f64]) -> Result<f64, LraError> {
        if z.len() != self.dim() {
            return Err(LraError::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        Ok(self
            .components
            .iter()
            .zip(self.b.iter())
            .map(|(w, &b)| b * w.eval(&self.families, z))
            .sum())
    }

    pub fn predict_batch(&self, points: &DMatrix<f64>) -> Result<Vec<f64>, LraError> {
        if points.ncols() != self.dim() {
            return Err(LraError::DimensionMismatch {
                expected: self.dim(),
                got: points.ncols(),
            });
        }
        let mut out = vec![0.0; points.nrows()];
        let mut z = vec![0.0; self.dim()];
        for i in 0..points.nrows() {
            for d in 0..self.dim() {
                z[d] = points[(i, d)];
            }
            out[i] = self.predict(&z)?;
        }
        Ok(out)
    }
}

/// Univariate polynomial values of every design point, one table per
/// dimension, shared by all correction steps of a fit.
struct EvalTables {
    /// `tables[d]` is N x (p_d + 1).
    tables: Vec<DMatrix<f64>>,
}

impl EvalTables {
    fn new(points: &DMatrix<f64>, families: &[PolyFamily], degrees: &[u32]) -> Self {
        let n = points.nrows();
        let tables = (0..families.len())
            .map(|d| {
                let p = degrees[d] as usize;
                let mut t = DMatrix::<f64>::zeros(n, p + 1);
                for i in 0..n {
                    let vals = eval_univariate_all(families[d], p, points[(i, d)]);
                    for (k, v) in vals.into_iter().enumerate() {
                        t[(i, k)] = v;
                    }
                }
                t
            })
            .collect();
        Self { tables }
    }
}

/// Output of one correction step.
pub struct Correction {
    pub component: RankOneComponent,
    /// Values of the new rank-one term at the design points.
    pub values: DVector<f64>,
    pub iterations: usize,
    /// Relative empirical error after each sweep.
    pub sweep_errors: Vec<f64>,
}

/// Builds one rank-one component against the current residual by
/// alternating least squares: dimensions are swept in order, each inner
/// solve freezing every other dimension at its latest values, starting from
/// the constant function 1 in every dimension.
pub fn correction_step(
    points_std: &DMatrix<f64>,
    residual_targets: &DVector<f64>,
    families: &[PolyFamily],
    degrees: &[u32],
    rule: &StoppingRule,
    response_variance: f64,
) -> Result<Correction, LraError> {
    rule.validate()?;
    let tables = EvalTables::new(points_std, families, degrees);
    correction_step_with_tables(&tables, residual_targets, rule, response_variance)
}

fn correction_step_with_tables(
    tables: &EvalTables,
    residual_targets: &DVector<f64>,
    rule: &StoppingRule,
    response_variance: f64,
) -> Result<Correction, LraError> {
    let n = residual_targets.len();
    let dims = tables.tables.len();
    if response_variance <= 0.0 {
        return Err(LraError::ZeroVariance);
    }

    // v ≡ 1 in every dimension: coefficients (1, 0, .., 0)
    let mut coeffs: Vec<DVector<f64>> = tables
        .tables
        .iter()
        .map(|t| {
            let mut c = DVector::zeros(t.ncols());
            c[0] = 1.0;
            c
        })
        .collect();
    let mut v: Vec<DVector<f64>> = (0..dims).map(|_| DVector::from_element(n, 1.0)).collect();

    let mut sweep_errors: Vec<f64> = Vec::new();
    let mut values = DVector::<f64>::from_element(n, 1.0);
    let mut iterations = 0;

    while iterations < rule.max_iterations {
        iterations += 1;
        // suffix[j] = Π_{d >= j} v_d (values from the previous sweep)
        let mut suffix: Vec<DVector<f64>> = vec![DVector::from_element(n, 1.0); dims + 1];
        for d in (0..dims).rev() {
            suffix[d] = suffix[d + 1].component_mul(&v[d]);
        }
        let mut prefix = DVector::<f64>::from_element(n, 1.0);
        for j in 0..dims {
            let frozen = prefix.component_mul(&suffix[j + 1]);
            if frozen.amax() < 1e-300 {
                // the running product is identically zero; with a (near-)zero
                // target that is already the optimum, otherwise the sweep
                // cannot make progress
                if residual_targets.amax()
                    <= 1e-12 * response_variance.sqrt().max(f64::MIN_POSITIVE)
                {
                    prefix = DVector::zeros(n);
                    break;
                }
                return Err(LraError::DegenerateCorrection(format!(
                    "frozen product vanished at every design point (dimension {j}, sweep {iterations})"
                )));
            }
            let table = &tables.tables[j];
            let cols = table.ncols();
            let mut design = DMatrix::<f64>::zeros(n, cols);
            for i in 0..n {
                let f = frozen[i];
                for k in 0..cols {
                    design[(i, k)] = table[(i, k)] * f;
                }
            }
            let fit = regression::ols(&design, residual_targets).map_err(|e| {
                LraError::DegenerateCorrection(format!(
                    "inner solve failed (dimension {j}, sweep {iterations}): {e}"
                ))
            })?;
            coeffs[j] = fit.coefficients;
            v[j] = table * &coeffs[j];
            prefix.component_mul_assign(&v[j]);
        }
        values = prefix;

        let mut err_abs = 0.0;
        for i in 0..n {
            let d = residual_targets[i] - values[i];
            err_abs += d * d;
        }
        let err = err_abs / n as f64 / response_variance;
        let done = sweep_errors
            .last()
            .map(|prev| prev - err < rule.min_error_decrease)
            .unwrap_or(false);
        sweep_errors.push(err);
        if done || err == 0.0 {
            break;
        }
    }

    Ok(Correction {
        component: RankOneComponent {
            coeffs: coeffs.into_iter().map(|c| c.data.into()).collect(),
        },
        values,
        iterations,
        sweep_errors,
    })
}

/// Solves for the normalizing coefficients b against all rank-one columns
/// built so far; previously fitted entries are re-estimated. Returns the
/// coefficients, the underlying fit (for leave-one-out diagnostics), and
/// whether collinearity forced a minimum-norm solution.
pub fn updating_step(
    component_matrix: &DMatrix<f64>,
    targets: &DVector<f64>,
) -> Result<(DVector<f64>, regression::LeastSquaresFit, bool), LraError> {
    if component_matrix.ncols() > component_matrix.nrows() {
        return Err(LraError::TooFewPoints {
            need: component_matrix.ncols(),
            got: component_matrix.nrows(),
        });
    }
    let fit = regression::ols(component_matrix, targets)?;
    let collinear = fit.rank_deficient;
    Ok((fit.coefficients.clone(), fit, collinear))
}

/// Greedy construction: returns the models of rank 1..=r_max, sharing
/// component prefixes, each with its own re-estimated weight vector. The
/// sequence starts from the zero prediction.
pub fn fit_lra_sequence(
    points_std: &DMatrix<f64>,
    responses: &DVector<f64>,
    families: &[PolyFamily],
    degrees: &[u32],
    r_max: usize,
    rule: &StoppingRule,
) -> Result<Vec<LraModel>, LraError> {
    rule.validate()?;
    let n = points_std.nrows();
    if r_max == 0 {
        return Err(LraError::EmptyCandidates);
    }
    if points_std.ncols() != families.len()
        || degrees.len() != families.len()
        || responses.len() != n
    {
        return Err(LraError::ShapeMismatch {
            rows: n,
            cols: points_std.ncols(),
            responses: responses.len(),
            dims: degrees.len(),
        });
    }
    if n < 2 {
        return Err(LraError::TooFewPoints { need: 2, got: n });
    }
    let var = empirical_variance(responses.as_slice());
    if var <= 0.0 {
        return Err(LraError::ZeroVariance);
    }

    let tables = EvalTables::new(points_std, families, degrees);
    let r_cap = r_max.min(n);

    let mut predictions = DVector::<f64>::zeros(n);
    let mut w_matrix = DMatrix::<f64>::zeros(n, 0);
    let mut components: Vec<RankOneComponent> = Vec::new();
    let mut iterations: Vec<usize> = Vec::new();
    let mut sweep_errors: Vec<Vec<f64>> = Vec::new();
    let mut rank_errors: Vec<f64> = Vec::new();
    let mut loo_errors: Vec<Option<f64>> = Vec::new();
    let mut collinear_warning = false;
    let mut models = Vec::with_capacity(r_cap);

    for r in 1..=r_cap {
        let residual = responses - &predictions;
        let correction = correction_step_with_tables(&tables, &residual, rule, var)?;
        components.push(correction.component);
        iterations.push(correction.iterations);
        sweep_errors.push(correction.sweep_errors);

        w_matrix = {
            let mut grown = DMatrix::<f64>::zeros(n, r);
            grown.columns_mut(0, r - 1).copy_from(&w_matrix);
            grown.column_mut(r - 1).copy_from(&correction.values);
            grown
        };
        let (b, fit, collinear) = updating_step(&w_matrix, responses)?;
        collinear_warning |= collinear;
        predictions = &w_matrix * &b;

        let mut err_abs = 0.0;
        for i in 0..n {
            let d = responses[i] - predictions[i];
            err_abs += d * d;
        }
        rank_errors.push(err_abs / n as f64 / var);
        loo_errors.push(if r < n {
            regression::corrected_loo(&fit, responses, r, n).ok()
        } else {
            None
        });

        models.push(LraModel {
            families: families.to_vec(),
            degrees: degrees.to_vec(),
            components: components.clone(),
            b: b.data.into(),
            stopping: *rule,
            iterations: iterations.clone(),
            rank_errors: rank_errors.clone(),
            sweep_errors: sweep_errors.clone(),
            loo_errors: loo_errors.clone(),
            collinear_warning,
            selection: None,
        });
    }
    Ok(models)
}

/// Rank choice by the corrected leave-one-out error of each updating step
/// (model size = rank). Ranks whose error is undefined are excluded.
pub fn select_rank_loo(models: &[LraModel]) -> Result<(usize, f64), LraError> {
    let mut best: Option<(usize, f64)> = None;
    for model in models {
        let r = model.rank();
        let Some(Some(err)) = model.loo_errors.last().copied() else {
            continue;
        };
        if best.map_or(true, |(_, e)| err < e) {
            best = Some((r, err));
        }
    }
    best.ok_or_else(|| {
        LraError::NoValidRank("no rank has a defined corrected leave-one-out error".into())
    })
}

/// Average held-out relative error per rank over the folds of `partition`;
/// each fold error is normalized by the variance of the fold's responses.
fn cv_rank_scores(
    points_std: &DMatrix<f64>,
    responses: &DVector<f64>,
    families: &[PolyFamily],
    degrees: &[u32],
    r_max: usize,
    rule: &StoppingRule,
    partition: &regression::FoldPartition,
) -> Result<Vec<f64>, LraError> {
    let mut per_rank: Vec<Vec<f64>> = vec![Vec::new(); r_max];
    let mut reachable = r_max;
    for fold in 0..partition.k {
        let train = partition.complement_indices(fold);
        let test = partition.fold_indices(fold);
        if train.len() < 2 || test.len() < 2 {
            return Err(LraError::TooFewPoints {
                need: 2,
                got: train.len().min(test.len()),
            });
        }
        let train_points = points_std.select_rows(train.iter());
        let train_y = DVector::from_fn(train.len(), |i, _| responses[train[i]]);
        let test_points = points_std.select_rows(test.iter());
        let test_y: Vec<f64> = test.iter().map(|&i| responses[i]).collect();
        let var_test = empirical_variance(&test_y);
        if var_test <= 0.0 {
            return Err(LraError::ZeroVariance);
        }

        let seq = fit_lra_sequence(
            &train_points,
            &train_y,
            families,
            degrees,
            r_max.min(train.len()),
            rule,
        )?;
        reachable = reachable.min(seq.len());
        for model in &seq {
            let preds = model.predict_batch(&test_points)?;
            let mut acc = 0.0;
            for (p, a) in preds.iter().zip(test_y.iter()) {
                acc += (a - p) * (a - p);
            }
            per_rank[model.rank() - 1].push(acc / test_y.len() as f64 / var_test);
        }
    }
    if reachable == 0 {
        return Err(LraError::NoValidRank("no fold produced any model".into()));
    }
    Ok(per_rank
        .into_iter()
        .take(reachable)
        .map(|scores| scores.iter().sum::<f64>() / scores.len() as f64)
        .collect())
}

/// Rank selection by 3-fold cross-validation: fold-trained sequences are
/// scored on their held-out folds, the argmin rank (smallest on ties) is
/// refit on the full design, and the averaged held-out error is reported.
pub fn select_rank_cv3(
    points_std: &DMatrix<f64>,
    responses: &DVector<f64>,
    families: &[PolyFamily],
    degrees: &[u32],
    r_max: usize,
    rule: &StoppingRule,
    seed: u64,
) -> Result<(usize, f64, LraModel), LraError> {
    let n = points_std.nrows();
    if n < 6 {
        return Err(LraError::TooFewPoints { need: 6, got: n });
    }
    let partition = regression::kfold_partition(n, 3, seed)?;
    let scores = cv_rank_scores(
        points_std, responses, families, degrees, r_max, rule, &partition,
    )?;
    let (rank, err) = argmin_rank(&scores);
    let mut models = fit_lra_sequence(points_std, responses, families, degrees, rank, rule)?;
    let mut model = models.pop().expect("rank >= 1");
    model.selection = Some(LraSelection {
        rank,
        degree: None,
        err_cv3: Some(err),
        err_loo_corrected: model.loo_errors.last().copied().flatten(),
        cv_seed: Some(seed),
    });
    Ok((rank, err, model))
}

fn argmin_rank(scores: &[f64]) -> (usize, f64) {
    let mut best = (1usize, scores[0]);
    for (i, &s) in scores.iter().enumerate() {
        if s < best.1 {
            best = (i + 1, s);
        }
    }
    best
}

/// Degree selection by 3-fold cross-validation: one fold partition is drawn
/// and shared by every candidate common degree, the inner rank selection
/// runs per degree, and the overall argmin (smaller degree on ties) is
/// refit on the full design.
pub fn select_degree_cv3(
    points_std: &DMatrix<f64>,
    responses: &DVector<f64>,
    families: &[PolyFamily],
    degree_candidates: &[u32],
    r_max: usize,
    rule: &StoppingRule,
    seed: u64,
) -> Result<(u32, LraModel), LraError> {
    if degree_candidates.is_empty() {
        return Err(LraError::EmptyCandidates);
    }
    let n = points_std.nrows();
    if n < 6 {
        return Err(LraError::TooFewPoints { need: 6, got: n });
    }
    let mut candidates = degree_candidates.to_vec();
    candidates.sort_unstable();
    candidates.dedup();

    let partition = regression::kfold_partition(n, 3, seed)?;
    let mut best: Option<(u32, usize, f64)> = None;
    let mut failures = Vec::new();
    for &p in &candidates {
        let degrees = vec![p; families.len()];
        match cv_rank_scores(
            points_std, responses, families, &degrees, r_max, rule, &partition,
        ) {
            Ok(scores) => {
                let (rank, err) = argmin_rank(&scores);
                if best.map_or(true, |(_, _, e)| err < e) {
                    best = Some((p, rank, err));
                }
            }
            Err(e) => failures.push(format!("p={p}: {e}")),
        }
    }
    let Some((p, rank, err)) = best else {
        return Err(LraError::NoValidRank(format!(
            "every degree candidate failed: {}",
            failures.join("; ")
        )));
    };
    let degrees = vec![p; families.len()];
    let mut models = fit_lra_sequence(points_std, responses, families, &degrees, rank, rule)?;
    let mut model = models.pop().expect("rank >= 1");
    model.selection = Some(LraSelection {
        rank,
        degree: Some(p),
        err_cv3: Some(err),
        err_loo_corrected: model.loo_errors.last().copied().flatten(),
        cv_seed: Some(seed),
    });
    Ok((p, model))
}

// ---------------------------------------------------------------------------
// Document format
// ---------------------------------------------------------------------------

impl LraModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("LRA serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, LraError> {
        let model: LraModel =
            serde_json::from_str(text).map_err(|e| LraError::BadDocument(e.to_string()))?;
        let dims = model.families.len();
        if dims == 0 {
            return Err(LraError::BadDocument("no families listed".into()));
        }
        if model.degrees.len() != dims {
            return Err(LraError::BadDocument(format!(
                "{} degrees for {dims} dimensions",
                model.degrees.len()
            )));
        }
        if model.b.len() != model.components.len() {
            return Err(LraError::BadDocument(format!(
                "{} weights for {} components",
                model.b.len(),
                model.components.len()
            )));
        }
        for (l, comp) in model.components.iter().enumerate() {
            if comp.coeffs.len() != dims {
                return Err(LraError::BadDocument(format!(
                    "component {l} covers {} dimensions, expected {dims}",
                    comp.coeffs.len()
                )));
            }
            for (d, c) in comp.coeffs.iter().enumerate() {
                if c.len() != model.degrees[d] as usize + 1 {
                    return Err(LraError::BadDocument(format!(
                        "component {l} dimension {d} has {} coefficients, expected {}",
                        c.len(),
                        model.degrees[d] + 1
                    )));
                }
                if c.iter().any(|v| !v.is_finite()) {
                    return Err(LraError::BadDocument(format!(
                        "component {l} dimension {d} has non-finite coefficients"
                    )));
                }
            }
        }
        if model.b.iter().any(|v| !v.is_finite()) {
            return Err(LraError::BadDocument("non-finite weight".into()));
        }
        model.stopping.validate()?;
        Ok(model)
    }
}
