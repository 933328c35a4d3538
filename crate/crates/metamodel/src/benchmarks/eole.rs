//! Random-field machinery: a standard Gaussian field with square-exponential
//! autocorrelation is discretized on a rectangular grid by expansion optimal
//! linear estimation (EOLE), and a lognormal transform of the field feeds a
//! smooth spatial-average functional that serves as a high-dimensional
//! benchmark response.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::BenchmarkError;
use crate::input::{InputError, InputModel, Marginal};

/// Rectangular grid specification: inclusive bounds with a fixed step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub step: f64,
}

impl GridSpec {
    pub fn points(&self) -> Vec<[f64; 2]> {
        let nx = ((self.x_range[1] - self.x_range[0]) / self.step).round() as usize + 1;
        let ny = ((self.y_range[1] - self.y_range[0]) / self.step).round() as usize + 1;
        let mut pts = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                pts.push([
                    self.x_range[0] + i as f64 * self.step,
                    self.y_range[0] + j as f64 * self.step,
                ]);
            }
        }
        pts
    }
}

/// Discretized field: retained eigenpairs of the grid correlation matrix
/// plus the lognormal transform constants.
#[derive(Debug, Clone)]
pub struct EoleField {
    grid: Vec<[f64; 2]>,
    corr_length: f64,
    /// Retained eigenvalues, descending.
    eigenvalues: Vec<f64>,
    /// Retained eigenvectors, one column per mode.
    eigenvectors: DMatrix<f64>,
    total_trace: f64,
    trace_fraction: f64,
    /// Location constant of the lognormal conductivity transform.
    a_kappa: f64,
    /// Scale constant of the lognormal conductivity transform.
    b_kappa: f64,
    /// Fixed averaging sub-grid of the benchmark functional.
    functional_grid: Vec<[f64; 2]>,
}

fn correlation(a: [f64; 2], b: [f64; 2], ell: f64) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (-(dx * dx + dy * dy) / (ell * ell)).exp()
}

/// Assembles the grid correlation matrix, eigendecomposes it, and retains
/// the smallest leading set of modes whose eigenvalue sum reaches
/// `trace_fraction` of the total.
pub fn eole_build(
    grid: Vec<[f64; 2]>,
    corr_length: f64,
    trace_fraction: f64,
) -> Result<EoleField, BenchmarkError> {
    if !(trace_fraction > 0.0 && trace_fraction <= 1.0) {
        return Err(BenchmarkError::BadTraceFraction(trace_fraction));
    }
    if grid.is_empty() || corr_length <= 0.0 {
        return Err(BenchmarkError::BadGeometry(
            "field grid must be non-empty with a positive correlation length".into(),
        ));
    }
    let n = grid.len();
    let mut c = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = correlation(grid[i], grid[j], corr_length);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    let eig = nalgebra::SymmetricEigen::new(c);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = DMatrix::<f64>::zeros(n, n);
    for (rank, &src) in order.iter().enumerate() {
        let mut value = eig.eigenvalues[src];
        if value < -1e-8 * n as f64 {
            return Err(BenchmarkError::NotPsd(value));
        }
        if value < 0.0 {
            value = 0.0;
        }
        eigenvalues.push(value);
        // deterministic sign: the largest-magnitude entry is positive
        let col = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for i in 1..n {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let flip = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            eigenvectors[(i, rank)] = flip * col[i];
        }
    }

    let total_trace: f64 = eigenvalues.iter().sum();
    let mut retained = n;
    let mut cumulative = 0.0;
    for (i, &v) in eigenvalues.iter().enumerate() {
        cumulative += v;
        if cumulative / total_trace >= trace_fraction {
            retained = i + 1;
            break;
        }
    }

    // lognormal transform constants for mean 1.0 and standard deviation 0.3
    let (mu, sigma) = (1.0f64, 0.3f64);
    let b_kappa = (1.0 + (sigma / mu).powi(2)).ln().sqrt();
    let a_kappa = mu.ln() - 0.5 * b_kappa * b_kappa;

    // averaging sub-grid over the square (-0.3, -0.2) x (-0.3, -0.2)
    let functional_grid = GridSpec {
        x_range: [-0.3, -0.2],
        y_range: [-0.3, -0.2],
        step: 0.025,
    }
    .points();

    Ok(EoleField {
        grid,
        corr_length,
        eigenvalues: eigenvalues[..retained].to_vec(),
        eigenvectors: eigenvectors.columns(0, retained).into_owned(),
        total_trace,
        trace_fraction,
        a_kappa,
        b_kappa,
        functional_grid,
    })
}

/// The default 11x11 unit-square grid with correlation length 0.2 and a
/// 0.99 trace fraction.
pub fn default_field() -> Result<EoleField, BenchmarkError> {
    let grid = GridSpec {
        x_range: [-0.5, 0.5],
        y_range: [-0.5, 0.5],
        step: 0.1,
    };
    eole_build(grid.points(), 0.2, 0.99)
}

impl EoleField {
    /// Number of retained modes M.
    pub fn retained(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn grid_size(&self) -> usize {
        self.grid.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn total_trace(&self) -> f64 {
        self.total_trace
    }

    pub fn trace_fraction(&self) -> f64 {
        self.trace_fraction
    }

    pub fn corr_length(&self) -> f64 {
        self.corr_length
    }

    pub fn transform_constants(&self) -> (f64, f64) {
        (self.a_kappa, self.b_kappa)
    }

    /// Independent standard normals, one per retained mode.
    pub fn input_model(&self) -> Result<InputModel, InputError> {
        let marginals = (0..self.retained())
            .map(|i| Marginal::normal(0.0, 1.0).map(|m| m.with_label(format!("xi{}", i + 1))))
            .collect::<Result<Vec<_>, _>>()?;
        InputModel::independent(marginals)
    }

    /// Field value ĝ(z) = Σ ξ_i/√l_i · φ_iᵀ C_zζ(z) and the lognormal
    /// conductivity κ = exp(a + b·ĝ(z)).
    pub fn realize(&self, xi: &[f64], location: [f64; 2]) -> Result<(f64, f64), BenchmarkError> {
        if xi.len() != self.retained() {
            return Err(BenchmarkError::DimensionMismatch {
                expected: self.retained(),
                got: xi.len(),
            });
        }
        let c_z = DVector::from_fn(self.grid.len(), |k, _| {
            correlation(location, self.grid[k], self.corr_length)
        });
        let projections = self.eigenvectors.transpose() * &c_z;
        let mut g = 0.0;
        for (i, &x) in xi.iter().enumerate() {
            let l = self.eigenvalues[i];
            if l > 0.0 {
                g += x / l.sqrt() * projections[i];
            }
        }
        let kappa = (self.a_kappa + self.b_kappa * g).exp();
        Ok((g, kappa))
    }

    /// Benchmark response: the mean conductivity over the fixed averaging
    /// sub-grid, a smooth strictly positive functional of the mode
    /// coefficients.
    pub fn functional(&self, xi: &[f64]) -> Result<f64, BenchmarkError> {
        let mut acc = 0.0;
        for &loc in &self.functional_grid {
            let (_, kappa) = self.realize(xi, loc)?;
            acc += kappa;
        }
        Ok(acc / self.functional_grid.len() as f64)
    }

    /// Var[ĝ(z)] = Σ_{i≤M} (φ_iᵀ C_zζ(z))² / l_i.
    pub fn pointwise_variance(&self, location: [f64; 2]) -> f64 {
        let c_z = DVector::from_fn(self.grid.len(), |k, _| {
            correlation(location, self.grid[k], self.corr_length)
        });
        let projections = self.eigenvectors.transpose() * &c_z;
        (0..self.retained())
            .filter(|&i| self.eigenvalues[i] > 0.0)
            .map(|i| projections[i] * projections[i] / self.eigenvalues[i])
            .sum()
    }
}
