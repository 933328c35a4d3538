//! Sparse polynomial chaos expansions fit by hybrid least-angle regression
//! over a grid of truncation parameters, selected by minimum corrected
//! leave-one-out error.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::basis::{
    enumerate_hyperbolic_capped, eval_expansion, graded_lex_cmp, BasisError, BasisSet, MultiIndex,
    PolyFamily, Truncation,
};
use crate::regression::{self, RegressionError};

#[derive(Debug, Error)]
pub enum PceError {
    #[error("need at least 3 design points, got {0}")]
    TooFewPoints(usize),
    #[error("response {0} is not finite")]
    NonFiniteResponse(usize),
    #[error("points are {rows}x{cols} but {responses} responses / {dims} families given")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        responses: usize,
        dims: usize,
    },
    #[error("candidate grids must not be empty")]
    EmptyGrid,
    #[error("every candidate fit was degenerate: {0}")]
    AllCandidatesDegenerate(String),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error("model document: {0}")]
    BadDocument(String),
    #[error("expected {expected}-dimensional point, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Grid and cap controlling the sparse fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceFitConfig {
    pub p_t_candidates: Vec<u32>,
    pub q_candidates: Vec<f64>,
    /// Candidate bases larger than this are skipped outright.
    pub basis_cap: usize,
}

impl Default for PceFitConfig {
    fn default() -> Self {
        Self {
            p_t_candidates: (1..=20).collect(),
            q_candidates: vec![0.25, 0.5, 0.75, 1.0],
            basis_cap: 50_000,
        }
    }
}

/// Hyper-parameter choice and score of the winning candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PceSelection {
    pub p_t: u32,
    pub q: f64,
    /// Corrected leave-one-out error of the selected model.
    pub err_loo_corrected: f64,
    /// Cardinality of the winning candidate basis before sparsification.
    pub candidate_cardinality: usize,
}

/// A fitted sparse polynomial chaos expansion.
#[derive(Debug, Clone)]
pub struct PceModel {
    basis: BasisSet,
    coefficients: DVector<f64>,
    selection: PceSelection,
    ed_fingerprint: String,
}

impl PceModel {
    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.coefficients
    }

    pub fn selection(&self) -> &PceSelection {
        &self.selection
    }

    pub fn ed_fingerprint(&self) -> &str {
        &self.ed_fingerprint
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// Ŷ(z) = Σ y_α Ψ_α(z) at a standardized point.
    pub fn predict(&self, z: &[f64]) -> Result<f64, PceError> {
        if z.len() != self.dim() {
            return Err(PceError::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        Ok(eval_expansion(&self.basis, &self.coefficients, z))
    }

    /// Predictions for standardized points stored one per row.
    pub fn predict_batch(&self, points: &DMatrix<f64>) -> Result<Vec<f64>, PceError> {
        if points.ncols() != self.dim() {
            return Err(PceError::DimensionMismatch {
                expected: self.dim(),
                got: points.ncols(),
            });
        }
        let design = self.basis.design_matrix(points)?;
        Ok((design * &self.coefficients).data.into())
    }
}

/// SHA-256 over the little-endian bytes of the design points and responses.
pub fn ed_fingerprint(points: &DMatrix<f64>, responses: &DVector<f64>) -> String {
    let mut hasher = Sha256::new();
    hasher.update((points.nrows() as u64).to_le_bytes());
    hasher.update((points.ncols() as u64).to_le_bytes());
    for i in 0..points.nrows() {
        for j in 0..points.ncols() {
            hasher.update(points[(i, j)].to_le_bytes());
        }
    }
    for v in responses.iter() {
        hasher.update(v.to_le_bytes());
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

struct Candidate {
    score: f64,
    retained: usize,
    p_t: u32,
    q: f64,
    candidate_cardinality: usize,
    indices: Vec<MultiIndex>,
}

impl Candidate {
    /// Smaller score wins; ties break toward the smaller basis, then the
    /// smaller p_t, then the smaller q.
    fn beats(&self, other: &Candidate) -> bool {
        if self.score != other.score {
            return self.score < other.score;
        }
        if self.retained != other.retained {
            return self.retained < other.retained;
        }
        if self.p_t != other.p_t {
            return self.p_t < other.p_t;
        }
        self.q < other.q
    }
}

/// Fits a sparse expansion: for every (p_t, q) cell the hyperbolic candidate
/// basis is enumerated, predictors enter by least-angle regression, every
/// prefix is refit by OLS and scored by corrected leave-one-out error, and
/// the best-scoring prefix across the whole grid is kept.
pub fn fit_sparse_pce(
    points_std: &DMatrix<f64>,
    responses: &DVector<f64>,
    families: &[PolyFamily],
    config: &PceFitConfig,
) -> Result<PceModel, PceError> {
    let n = points_std.nrows();
    if n < 3 {
        return Err(PceError::TooFewPoints(n));
    }
    if points_std.ncols() != families.len() || responses.len() != n {
        return Err(PceError::ShapeMismatch {
            rows: n,
            cols: points_std.ncols(),
            responses: responses.len(),
            dims: families.len(),
        });
    }
    for (i, v) in responses.iter().enumerate() {
        if !v.is_finite() {
            return Err(PceError::NonFiniteResponse(i));
        }
    }
    if config.p_t_candidates.is_empty() || config.q_candidates.is_empty() {
        return Err(PceError::EmptyGrid);
    }

    let mut p_list = config.p_t_candidates.clone();
    p_list.sort_unstable();
    p_list.dedup();
    let mut q_list = config.q_candidates.clone();
    q_list.sort_by(f64::total_cmp);
    q_list.dedup();

    let dim = families.len();
    let mut best: Option<Candidate> = None;
    let mut skipped = Vec::new();

    for &p_t in &p_list {
        for &q in &q_list {
            let Some(indices) = enumerate_hyperbolic_capped(dim, p_t, q, config.basis_cap)?
            else {
                skipped.push(format!("(p_t={p_t}, q={q}): basis above cap"));
                continue;
            };
            let card = indices.len();
            if card < 2 {
                skipped.push(format!("(p_t={p_t}, q={q}): constant-only basis"));
                continue;
            }
            let basis = BasisSet::from_indices(
                families.to_vec(),
                indices,
                Truncation::Hyperbolic { p_t, q },
            )?;
            let design = basis.design_matrix(points_std)?;
            // graded-lex puts the zero index first; LAR runs on the rest
            let predictors = design.columns(1, card - 1).into_owned();
            let path = match regression::lar_path(&predictors, responses) {
                Ok(p) => p,
                Err(e) => {
                    skipped.push(format!("(p_t={p_t}, q={q}): {e}"));
                    continue;
                }
            };
            let order = path.entry_order();
            let scores = match regression::score_prefixes(&predictors, &order, responses) {
                Ok(s) => s,
                Err(e) => {
                    skipped.push(format!("(p_t={p_t}, q={q}): {e}"));
                    continue;
                }
            };
            for (k, score) in scores.iter().enumerate() {
                let Some(score) = *score else { continue };
                let retained = k + 1;
                let challenger = || Candidate {
                    score,
                    retained,
                    p_t,
                    q,
                    candidate_cardinality: card,
                    indices: std::iter::once(basis.indices()[0].clone())
                        .chain(order[..k].iter().map(|&j| basis.indices()[j + 1].clone()))
                        .collect(),
                };
                match &best {
                    None => best = Some(challenger()),
                    Some(current) => {
                        let cand = challenger();
                        if cand.beats(current) {
                            best = Some(cand);
                        }
                    }
                }
            }
        }
    }

    let Some(winner) = best else {
        return Err(PceError::AllCandidatesDegenerate(skipped.join("; ")));
    };

    // final OLS refit on the retained indices in canonical order
    let final_basis = BasisSet::from_indices(
        families.to_vec(),
        winner.indices.clone(),
        Truncation::Hyperbolic {
            p_t: winner.p_t,
            q: winner.q,
        },
    )?;
    let design = final_basis.design_matrix(points_std)?;
    let fit = regression::ols(&design, responses)?;

    Ok(PceModel {
        basis: final_basis,
        coefficients: fit.coefficients,
        selection: PceSelection {
            p_t: winner.p_t,
            q: winner.q,
            err_loo_corrected: winner.score,
            candidate_cardinality: winner.candidate_cardinality,
        },
        ed_fingerprint: ed_fingerprint(points_std, responses),
    })
}

// ---------------------------------------------------------------------------
// Document format
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct PceDoc {
    families: Vec<PolyFamily>,
    indices: Vec<Vec<u32>>,
    coefficients: Vec<f64>,
    selection: PceSelection,
    ed_fingerprint: String,
}

impl PceModel {
    pub fn to_json(&self) -> String {
        let doc = PceDoc {
            families: self.basis.families().to_vec(),
            indices: self.basis.indices().iter().map(|m| m.0.clone()).collect(),
            coefficients: self.coefficients.iter().cloned().collect(),
            selection: self.selection.clone(),
            ed_fingerprint: self.ed_fingerprint.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("PCE serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, PceError> {
        let doc: PceDoc =
            serde_json::from_str(text).map_err(|e| PceError::BadDocument(e.to_string()))?;
        if doc.families.is_empty() {
            return Err(PceError::BadDocument("no families listed".into()));
        }
        if doc.indices.len() != doc.coefficients.len() {
            return Err(PceError::BadDocument(format!(
                "{} indices but {} coefficients",
                doc.indices.len(),
                doc.coefficients.len()
            )));
        }
        if doc.indices.is_empty() {
            return Err(PceError::BadDocument("empty basis".into()));
        }
        if doc.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(PceError::BadDocument("non-finite coefficient".into()));
        }
        let dim = doc.families.len();
        let mut paired: Vec<(MultiIndex, f64)> = doc
            .indices
            .into_iter()
            .zip(doc.coefficients)
            .map(|(idx, c)| (MultiIndex(idx), c))
            .collect();
        for (idx, _) in &paired {
            if idx.dim() != dim {
                return Err(PceError::BadDocument(format!(
                    "index {:?} does not match dimension {dim}",
                    idx.0
                )));
            }
        }
        paired.sort_by(|a, b| graded_lex_cmp(&a.0, &b.0));
        for w in paired.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(PceError::BadDocument(format!(
                    "duplicate index {:?}",
                    w[0].0 .0
                )));
            }
        }
        let (indices, coefficients): (Vec<MultiIndex>, Vec<f64>) = paired.into_iter().unzip();
        let basis = BasisSet::from_indices(
            doc.families,
            indices,
            Truncation::Hyperbolic {
                p_t: doc.selection.p_t,
                q: doc.selection.q,
            },
        )?;
        Ok(Self {
            basis,
            coefficients: DVector::from_vec(coefficients),
            selection: doc.selection,
            ed_fingerprint: doc.ed_fingerprint,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::eval_index;
    use crate::sampling;
    use approx::assert_relative_eq;

    fn standard_points(n: usize, m: usize) -> DMatrix<f64> {
        let design = sampling::sobol(m, n).unwrap();
        DMatrix::from_fn(n, m, |i, j| crate::stdnorm::quantile(design.points[(i, j)]))
    }

    #[test]
    fn recovers_single_basis_function() {
        let families = vec![PolyFamily::Hermite; 3];
        let target_index = MultiIndex(vec![2, 1, 0]);
        let points = standard_points(50, 3);
        let responses = DVector::from_fn(50, |i, _| {
            let z: Vec<f64> = (0..3).map(|d| points[(i, d)]).collect();
            eval_index(&families, &target_index, &z)
        });
        let config = PceFitConfig {
            p_t_candidates: vec![1, 2, 3, 4],
            q_candidates: vec![0.5, 1.0],
            basis_cap: 50_000,
        };
        let model = fit_sparse_pce(&points, &responses, &families, &config).unwrap();
        assert!(model.selection().err_loo_corrected <= 1e-10);
        for (idx, &c) in model.basis().indices().iter().zip(model.coefficients().iter()) {
            if *idx == target_index {
                assert_relative_eq!(c, 1.0, epsilon = 1e-8);
            } else {
                assert!(c.abs() <= 1e-8, "spurious coefficient {c} on {idx:?}");
            }
        }
    }

    #[test]
    fn exact_recovery_of_sparse_combination() {
        let families = vec![PolyFamily::Hermite; 4];
        let active: Vec<(MultiIndex, f64)> = vec![
            (MultiIndex(vec![0, 0, 0, 0]), 3.0),
            (MultiIndex(vec![1, 0, 0, 0]), -2.0),
            (MultiIndex(vec![0, 2, 0, 0]), 0.7),
            (MultiIndex(vec![1, 0, 1, 0]), 1.3),
            (MultiIndex(vec![0, 0, 0, 3]), -0.4),
        ];
        let n = 60;
        let points = standard_points(n, 4);
        let responses = DVector::from_fn(n, |i, _| {
            let z: Vec<f64> = (0..4).map(|d| points[(i, d)]).collect();
            active
                .iter()
                .map(|(idx, c)| c * eval_index(&families, idx, &z))
                .sum()
        });
        let model = fit_sparse_pce(
            &points,
            &responses,
            &families,
            &PceFitConfig {
                p_t_candidates: vec![1, 2, 3, 4, 5],
                q_candidates: vec![0.5, 0.75, 1.0],
                basis_cap: 50_000,
            },
        )
        .unwrap();
        for (idx, want) in &active {
            let got = model
                .basis()
                .indices()
                .iter()
                .zip(model.coefficients().iter())
                .find(|(i, _)| *i == idx)
                .map(|(_, &c)| c)
                .unwrap_or(0.0);
            assert_relative_eq!(got, *want, epsilon = 1e-8);
        }
    }

    #[test]
    fn retained_set_is_sparse() {
        let families = vec![PolyFamily::Hermite; 3];
        let n = 40;
        let points = standard_points(n, 3);
        let responses = DVector::from_fn(n, |i, _| {
            let a = points[(i, 0)];
            let b = points[(i, 1)];
            (a + 0.3 * b).sin()
        });
        let model = fit_sparse_pce(
            &points,
            &responses,
            &families,
            &PceFitConfig::default(),
        )
        .unwrap();
        assert!(model.basis().len() <= n - 1);
        assert_eq!(model.basis().indices()[0].total_degree(), 0);
    }

    #[test]
    fn deterministic_fit() {
        let families = vec![PolyFamily::Hermite; 2];
        let points = standard_points(30, 2);
        let responses = DVector::from_fn(30, |i, _| {
            (points[(i, 0)] * 0.5).cos() + points[(i, 1)]
        });
        let cfg = PceFitConfig::default();
        let a = fit_sparse_pce(&points, &responses, &families, &cfg).unwrap();
        let b = fit_sparse_pce(&points, &responses, &families, &cfg).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn predict_matches_design_matrix() {
        let families = vec![PolyFamily::Hermite; 2];
        let points = standard_points(25, 2);
        let responses =
            DVector::from_fn(25, |i, _| points[(i, 0)] * points[(i, 1)] + 2.0);
        let model = fit_sparse_pce(
            &points,
            &responses,
            &families,
            &PceFitConfig {
                p_t_candidates: vec![1, 2, 3],
                q_candidates: vec![1.0],
                basis_cap: 10_000,
            },
        )
        .unwrap();
        let design = model.basis().design_matrix(&points).unwrap();
        let via_design = design * model.coefficients();
        let via_predict = model.predict_batch(&points).unwrap();
        for (a, b) in via_design.iter().zip(via_predict.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn constant_prediction_model() {
        let model = PceModel::from_json(
            r#"{
                "families": ["hermite", "hermite"],
                "indices": [[0, 0], [1, 0]],
                "coefficients": [5.5, 2.0],
                "selection": {"p_t": 1, "q": 1.0, "err_loo_corrected": 0.0, "candidate_cardinality": 3},
                "ed_fingerprint": ""
            }"#,
        )
        .unwrap();
        assert_relative_eq!(model.predict(&[3.0, -1.0]).unwrap(), 5.5 + 6.0);
        assert_relative_eq!(model.predict(&[0.0, 9.9]).unwrap(), 5.5);
    }

    #[test]
    fn document_round_trip() {
        let families = vec![PolyFamily::Hermite; 2];
        let points = standard_points(20, 2);
        let responses = DVector::from_fn(20, |i, _| points[(i, 0)].powi(2) * 0.5 + 1.0);
        let model = fit_sparse_pce(
            &points,
            &responses,
            &families,
            &PceFitConfig {
                p_t_candidates: vec![2, 3],
                q_candidates: vec![1.0],
                basis_cap: 1000,
            },
        )
        .unwrap();
        let back = PceModel::from_json(&model.to_json()).unwrap();
        for _ in 0..5 {
            let z = [0.3, -0.8];
            assert_relative_eq!(
                model.predict(&z).unwrap(),
                back.predict(&z).unwrap(),
                epsilon = 1e-12
            );
        }
        assert_eq!(model.ed_fingerprint(), back.ed_fingerprint());
    }

    #[test]
    fn document_rejects_mismatches() {
        assert!(PceModel::from_json("not json").is_err());
        assert!(PceModel::from_json(
            r#"{
                "families": ["hermite"],
                "indices": [[0], [1]],
                "coefficients": [1.0],
                "selection": {"p_t": 1, "q": 1.0, "err_loo_corrected": 0.0, "candidate_cardinality": 2},
                "ed_fingerprint": ""
            }"#
        )
        .is_err());
    }
}
