//! Univariate orthonormal polynomial families, their tensorization into
//! multivariate basis functions, and truncated multi-index enumeration.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Comparison slack when testing `‖α‖_q ≤ p_t` in floating point, so that
/// boundary indices are not dropped through rounding.
const QNORM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum BasisError {
    #[error("hyperbolic truncation requires 0 < q <= 1, got {0}")]
    InvalidQ(f64),
    #[error("basis has {expected} dimensions but index has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("multi-index {0:?} is not a member of the basis")]
    IndexNotInBasis(Vec<u32>),
    #[error("family list must not be empty")]
    EmptyFamilies,
}

/// Univariate orthonormal polynomial family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolyFamily {
    /// Probabilists' Hermite, orthonormal w.r.t. the standard normal density.
    Hermite,
    /// Legendre, orthonormal w.r.t. the uniform density on [-1, 1].
    Legendre,
}

/// Value of the degree-`k` orthonormal polynomial at `x`.
///
/// Three-term recurrences in orthonormal form; stable well past degree 20.
pub fn eval_univariate(family: PolyFamily, k: usize, x: f64) -> f64 {
    match family {
        PolyFamily::Hermite => {
            if k == 0 {
                return 1.0;
            }
            let mut prev = 1.0;
            let mut cur = x;
            for j in 1..k {
                let jf = j as f64;
                let next = (x * cur - jf.sqrt() * prev) / (jf + 1.0).sqrt();
                prev = cur;
                cur = next;
            }
            cur
        }
        PolyFamily::Legendre => {
            if k == 0 {
                return 1.0;
            }
            let mut prev = 1.0;
            let mut cur = 3f64.sqrt() * x;
            for j in 1..k {
                let jf = j as f64;
                let next = ((2.0 * jf + 3.0).sqrt())
                    * ((2.0 * jf + 1.0).sqrt() * x * cur - jf * prev / (2.0 * jf - 1.0).sqrt())
                    / (jf + 1.0);
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// Values of the orthonormal polynomials of degree `0..=max_degree` at `x`.
pub fn eval_univariate_all(family: PolyFamily, max_degree: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max_degree + 1);
    out.push(1.0);
    if max_degree == 0 {
        return out;
    }
    match family {
        PolyFamily::Hermite => {
            out.push(x);
            for j in 1..max_degree {
                let jf = j as f64;
                out.push((x * out[j] - jf.sqrt() * out[j - 1]) / (jf + 1.0).sqrt());
            }
        }
        PolyFamily::Legendre => {
            out.push(3f64.sqrt() * x);
            for j in 1..max_degree {
                let jf = j as f64;
                out.push(
                    ((2.0 * jf + 3.0).sqrt())
                        * ((2.0 * jf + 1.0).sqrt() * x * out[j]
                            - jf * out[j - 1] / (2.0 * jf - 1.0).sqrt())
                        / (jf + 1.0),
                );
            }
        }
    }
    out
}

/// Multi-index of polynomial degrees, one per input dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// ‖α‖_q = (Σ α_i^q)^(1/q).
    pub fn q_norm(&self, q: f64) -> f64 {
        let s: f64 = self
            .0
            .iter()
            .filter(|&&a| a > 0)
            .map(|&a| (a as f64).powf(q))
            .sum();
        s.powf(1.0 / q)
    }
}

/// Graded-lexicographic order: by total degree, then lexicographically with
/// the earlier dimensions carrying the higher degree first.
pub fn graded_lex_cmp(a: &MultiIndex, b: &MultiIndex) -> std::cmp::Ordering {
    a.total_degree()
        .cmp(&b.total_degree())
        .then_with(|| b.0.cmp(&a.0))
}

/// Truncation rule that produced a basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Truncation {
    /// ‖α‖_q ≤ p_t.
    Hyperbolic { p_t: u32, q: f64 },
    /// α_i ≤ p_i per dimension (full tensor box).
    TensorDegrees { degrees: Vec<u32> },
}

/// An ordered set of multi-indices with the polynomial family per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSet {
    families: Vec<PolyFamily>,
    indices: Vec<MultiIndex>,
    truncation: Truncation,
}

/// All multi-indices with ‖α‖_q ≤ p_t, graded-lexicographically ordered.
pub fn enumerate_hyperbolic(dim: usize, p_t: u32, q: f64) -> Result<Vec<MultiIndex>, BasisError> {
    enumerate_hyperbolic_capped(dim, p_t, q, usize::MAX).map(|r| r.expect("uncapped"))
}

/// Same as [`enumerate_hyperbolic`] but gives up (returning `None`) as soon
/// as the set exceeds `cap` entries.
pub fn enumerate_hyperbolic_capped(
    dim: usize,
    p_t: u32,
    q: f64,
    cap: usize,
) -> Result<Option<Vec<MultiIndex>>, BasisError> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(BasisError::InvalidQ(q));
    }
    let mut out = Vec::new();
    let mut current = vec![0u32; dim];
    let limit = p_t as f64 + QNORM_TOL;
    // DFS over dimensions; prune on the partial q-norm, which only grows.
    fn recurse(
        current: &mut Vec<u32>,
        d: usize,
        partial_pow_sum: f64,
        q: f64,
        p_t: u32,
        limit: f64,
        cap: usize,
        out: &mut Vec<MultiIndex>,
    ) -> bool {
        if d == current.len() {
            if out.len() >= cap {
                return false;
            }
            out.push(MultiIndex(current.clone()));
            return true;
        }
        for a in 0..=p_t {
            current[d] = a;
            let pow_sum = partial_pow_sum + if a == 0 { 0.0 } else { (a as f64).powf(q) };
            if pow_sum.powf(1.0 / q) > limit {
                break;
            }
            if !recurse(current, d + 1, pow_sum, q, p_t, limit, cap, out) {
                return false;
            }
        }
        current[d] = 0;
        true
    }
    if !recurse(&mut current, 0, 0.0, q, p_t, limit, cap, &mut out) {
        return Ok(None);
    }
    out.sort_by(graded_lex_cmp);
    Ok(Some(out))
}

/// Number of multi-indices with total degree ≤ p_t in `dim` dimensions,
/// i.e. the binomial (dim + p_t choose p_t). Saturates at `u128::MAX`.
pub fn total_degree_count(dim: usize, p_t: u32) -> u128 {
    let mut acc: u128 = 1;
    let p = p_t as u128;
    let m = dim as u128;
    for i in 1..=p {
        acc = match acc.checked_mul(m + i) {
            Some(v) => v / i,
            None => return u128::MAX,
        };
    }
    acc
}

/// Number of terms in the full tensor basis with per-dimension caps,
/// Π (p_i + 1). Saturates at `u128::MAX`.
pub fn tensor_basis_count(degrees: &[u32]) -> u128 {
    let mut acc: u128 = 1;
    for &p in degrees {
        acc = match acc.checked_mul(p as u128 + 1) {
            Some(v) => v,
            None => return u128::MAX,
        };
    }
    acc
}

/// Number of free coefficients in a rank-`rank` separated representation
/// over the same per-dimension polynomial spaces: rank · Σ (p_i + 1).
pub fn lra_parameter_count(degrees: &[u32], rank: usize) -> u128 {
    let per_component: u128 = degrees.iter().map(|&p| p as u128 + 1).sum();
    per_component * rank as u128
}

impl BasisSet {
    /// Hyperbolically truncated basis over the given per-dimension families.
    pub fn hyperbolic(families: Vec<PolyFamily>, p_t: u32, q: f64) -> Result<Self, BasisError> {
        if families.is_empty() {
            return Err(BasisError::EmptyFamilies);
        }
        let indices = enumerate_hyperbolic(families.len(), p_t, q)?;
        Ok(Self {
            families,
            indices,
            truncation: Truncation::Hyperbolic { p_t, q },
        })
    }

    /// Full tensor basis with per-dimension degree caps. Intended for small
    /// boxes; the index count is Π (p_i + 1).
    pub fn tensor(families: Vec<PolyFamily>, degrees: Vec<u32>) -> Result<Self, BasisError> {
        if families.is_empty() {
            return Err(BasisError::EmptyFamilies);
        }
        if families.len() != degrees.len() {
            return Err(BasisError::DimensionMismatch {
                expected: families.len(),
                got: degrees.len(),
            });
        }
        let mut indices = vec![MultiIndex(vec![0; degrees.len()])];
        for (d, &p) in degrees.iter().enumerate() {
            let mut extended = Vec::with_capacity(indices.len() * (p as usize + 1));
            for idx in &indices {
                for a in 0..=p {
                    let mut v = idx.0.clone();
                    v[d] = a;
                    extended.push(MultiIndex(v));
                }
            }
            indices = extended;
        }
        indices.sort_by(graded_lex_cmp);
        Ok(Self {
            families,
            indices,
            truncation: Truncation::TensorDegrees { degrees },
        })
    }

    /// Basis from an explicit index list (used when re-loading fitted models
    /// whose retained set is no longer a full truncation).
    pub fn from_indices(
        families: Vec<PolyFamily>,
        mut indices: Vec<MultiIndex>,
        truncation: Truncation,
    ) -> Result<Self, BasisError> {
        if families.is_empty() {
            return Err(BasisError::EmptyFamilies);
        }
        for idx in &indices {
            if idx.dim() != families.len() {
                return Err(BasisError::DimensionMismatch {
                    expected: families.len(),
                    got: idx.dim(),
                });
            }
        }
        indices.sort_by(graded_lex_cmp);
        indices.dedup();
        Ok(Self {
            families,
            indices,
            truncation,
        })
    }

    pub fn dim(&self) -> usize {
        self.families.len()
    }

    pub fn families(&self) -> &[PolyFamily] {
        &self.families
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn truncation(&self) -> &Truncation {
        &self.truncation
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: &MultiIndex) -> bool {
        self.indices
            .binary_search_by(|probe| graded_lex_cmp(probe, index))
            .is_ok()
    }

    /// Ψ_α(z) = Π_i P_{α_i}(z_i) for a member index.
    pub fn eval_multivariate(&self, index: &MultiIndex, z: &[f64]) -> Result<f64, BasisError> {
        if z.len() != self.dim() {
            return Err(BasisError::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        if !self.contains(index) {
            return Err(BasisError::IndexNotInBasis(index.0.clone()));
        }
        Ok(eval_index(&self.families, index, z))
    }

    /// Max degree appearing in any index, per dimension.
    pub fn max_degrees(&self) -> Vec<u32> {
        let mut caps = vec![0u32; self.dim()];
        for idx in &self.indices {
            for (c, &a) in caps.iter_mut().zip(idx.0.iter()) {
                *c = (*c).max(a);
            }
        }
        caps
    }

    /// Design matrix: entry (i, j) = Ψ_{α_j}(z_i) over standardized points
    /// stored one per row.
    pub fn design_matrix(&self, points: &DMatrix<f64>) -> Result<DMatrix<f64>, BasisError> {
        if points.ncols() != self.dim() {
            return Err(BasisError::DimensionMismatch {
                expected: self.dim(),
                got: points.ncols(),
            });
        }
        let n = points.nrows();
        let caps = self.max_degrees();
        let mut out = DMatrix::<f64>::zeros(n, self.len());
        let mut tables: Vec<Vec<f64>> = Vec::with_capacity(self.dim());
        for i in 0..n {
            tables.clear();
            for d in 0..self.dim() {
                tables.push(eval_univariate_all(
                    self.families[d],
                    caps[d] as usize,
                    points[(i, d)],
                ));
            }
            for (j, idx) in self.indices.iter().enumerate() {
                let mut v = 1.0;
                for (d, &a) in idx.0.iter().enumerate() {
                    v *= tables[d][a as usize];
                }
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }

    /// One multi-index per line, space-separated, for audit.
    pub fn export_table(&self) -> String {
        let mut s = String::new();
        for idx in &self.indices {
            let line: Vec<String> = idx.0.iter().map(|a| a.to_string()).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }
}

/// Ψ_α(z) without membership checks.
pub(crate) fn eval_index(families: &[PolyFamily], index: &MultiIndex, z: &[f64]) -> f64 {
    index
        .0
        .iter()
        .zip(families.iter())
        .zip(z.iter())
        .map(|((&a, &fam), &x)| eval_univariate(fam, a as usize, x))
        .product()
}

/// Gauss quadrature rule with `n` nodes for the family's weight measure
/// (standard normal for Hermite, uniform on [-1, 1] for Legendre). Nodes
/// come from the Jacobi-matrix eigendecomposition, polished by Newton
/// iterations on the degree-n orthonormal polynomial; weights use the
/// Christoffel formula. Weights sum to one.
pub fn gauss_rule(family: PolyFamily, n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let b = match family {
            PolyFamily::Hermite => kf.sqrt(),
            PolyFamily::Legendre => kf / (4.0 * kf * kf - 1.0).sqrt(),
        };
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = nalgebra::SymmetricEigen::new(jacobi);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    nodes.sort_by(f64::total_cmp);

    let derivative = |x: f64| -> f64 {
        // P_n'(x) from the lower-degree values
        let table = eval_univariate_all(family, n, x);
        match family {
            PolyFamily::Hermite => (n as f64).sqrt() * table[n - 1],
            PolyFamily::Legendre => {
                // sqrt(2n+1) L_n'(x) with L_n'(x) = n (x L_n - L_{n-1}) / (x^2 - 1)
                let nf = n as f64;
                let l_n = table[n] / (2.0 * nf + 1.0).sqrt();
                let l_nm1 = table[n - 1] / (2.0 * nf - 1.0).sqrt();
                (2.0 * nf + 1.0).sqrt() * nf * (x * l_n - l_nm1) / (x * x - 1.0)
            }
        }
    };

    let mut weights = Vec::with_capacity(n);
    for node in nodes.iter_mut() {
        for _ in 0..3 {
            let value = eval_univariate(family, n, *node);
            let slope = derivative(*node);
            if slope != 0.0 {
                *node -= value / slope;
            }
        }
        // Christoffel: w = 1 / Σ_{k<n} P_k(x)²
        let table = eval_univariate_all(family, n - 1, *node);
        let k_sum: f64 = table.iter().map(|v| v * v).sum();
        weights.push(1.0 / k_sum);
    }
    (nodes, weights)
}

/// Convenience: evaluate Σ c_j Ψ_{α_j}(z) for coefficients aligned with the
/// basis ordering.
pub fn eval_expansion(basis: &BasisSet, coefficients: &DVector<f64>, z: &[f64]) -> f64 {
    debug_assert_eq!(coefficients.len(), basis.len());
    let caps = basis.max_degrees();
    let tables: Vec<Vec<f64>> = (0..basis.dim())
        .map(|d| eval_univariate_all(basis.families()[d], caps[d] as usize, z[d]))
        .collect();
    basis
        .indices()
        .iter()
        .zip(coefficients.iter())
        .map(|(idx, &c)| {
            let mut v = c;
            for (d, &a) in idx.0.iter().enumerate() {
                v *= tables[d][a as usize];
            }
            v
        })
        .sum()
}
