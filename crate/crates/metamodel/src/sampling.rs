//! Experimental-design generators on the unit hypercube: Sobol
//! low-discrepancy sequences, Latin hypercube designs, maximin-selected
//! Latin hypercubes, and plain Monte Carlo.
//!
//! Every generator is a deterministic pure function of (dimension, size,
//! seed) and emits coordinates strictly inside (0, 1).

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sobol_data;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("Sobol direction-number table covers {max} dimensions, requested {got}")]
    DimensionTooLarge { max: usize, got: usize },
    #[error("design must have at least one point")]
    EmptyDesign,
    #[error("design must have at least one dimension")]
    ZeroDimension,
    #[error("maximin selection requires trials >= 1")]
    ZeroTrials,
}

/// How a design was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    Sobol,
    Lhs,
    MaximinLhs,
    Mcs,
}

/// A point set on the open unit hypercube.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub points: DMatrix<f64>,
    pub generator: Generator,
    pub seed: u64,
}

impl Design {
    pub fn count(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    /// CSV export with header `x1..xM`, shortest round-trip float formatting.
    pub fn to_csv(&self) -> String {
        matrix_to_csv(&self.points)
    }
}

pub(crate) fn matrix_to_csv(points: &DMatrix<f64>) -> String {
    let mut out = String::new();
    let cols: Vec<String> = (1..=points.ncols()).map(|d| format!("x{d}")).collect();
    out.push_str(&cols.join(","));
    out.push('\n');
    for i in 0..points.nrows() {
        for j in 0..points.ncols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format_f64(points[(i, j)]));
        }
        out.push('\n');
    }
    out
}

/// Locale-independent, shortest representation that round-trips the f64.
pub(crate) fn format_f64(v: f64) -> String {
    let mut s = format!("{v}");
    if !s.contains('.') && !s.contains('e') && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

// ---------------------------------------------------------------------------
// Sobol
// ---------------------------------------------------------------------------

/// Fixed-point resolution of the generator; supports up to 2^52 points with
/// coordinates exactly representable in f64.
const SOBOL_BITS: u32 = 52;

fn direction_vectors(dim_index: usize, bits: u32) -> Vec<u64> {
    let bits = bits as usize;
    let mut v = vec![0u64; bits];
    if dim_index == 0 {
        for (i, slot) in v.iter_mut().enumerate() {
            *slot = 1u64 << (SOBOL_BITS as usize - 1 - i);
        }
        return v;
    }
    let (poly, minit) = sobol_data::DIRECTION_SEEDS[dim_index - 1];
    let degree = (32 - poly.leading_zeros() - 1) as usize;
    // inner coefficient bits a_1..a_{s-1} of the primitive polynomial
    let inner = (poly >> 1) & ((1 << (degree - 1)) - 1);
    let mut m = vec![0u64; bits.max(degree)];
    m[..degree.min(bits)].copy_from_slice(&minit[..degree.min(bits)]);
    for i in degree..bits {
        let mut new_m = m[i - degree] ^ (m[i - degree] << degree);
        for k in 1..degree {
            if (inner >> (degree - 1 - k)) & 1 == 1 {
                new_m ^= m[i - k] << k;
            }
        }
        m[i] = new_m;
    }
    for (i, slot) in v.iter_mut().enumerate() {
        *slot = m[i] << (SOBOL_BITS as usize - 1 - i);
    }
    v
}

/// First `count` points of the Sobol sequence in Gray-code order, with the
/// initial all-zeros point skipped so no coordinate is exactly 0.
pub fn sobol(dim: usize, count: usize) -> Result<Design, SamplingError> {
    if dim == 0 {
        return Err(SamplingError::ZeroDimension);
    }
    if dim > sobol_data::MAX_DIMENSION {
        return Err(SamplingError::DimensionTooLarge {
            max: sobol_data::MAX_DIMENSION,
            got: dim,
        });
    }
    if count == 0 {
        return Err(SamplingError::EmptyDesign);
    }
    let scale = (1u64 << SOBOL_BITS) as f64;
    let dirs: Vec<Vec<u64>> = (0..dim).map(|d| direction_vectors(d, SOBOL_BITS)).collect();
    let mut state = vec![0u64; dim];
    let mut points = DMatrix::<f64>::zeros(count, dim);
    for i in 1..=count {
        let bit = (i as u64).trailing_zeros() as usize;
        for d in 0..dim {
            state[d] ^= dirs[d][bit];
            points[(i - 1, d)] = state[d] as f64 / scale;
        }
    }
    Ok(Design {
        points,
        generator: Generator::Sobol,
        seed: 0,
    })
}

// ---------------------------------------------------------------------------
// Latin hypercube and Monte Carlo
// ---------------------------------------------------------------------------

fn strict_unit(rng: &mut ChaCha12Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Latin hypercube design: exactly one point per axis-aligned stratum
/// [(k-1)/N, k/N) in every dimension, with uniform jitter inside each
/// stratum.
pub fn lhs(dim: usize, count: usize, seed: u64) -> Result<Design, SamplingError> {
    if dim == 0 {
        return Err(SamplingError::ZeroDimension);
    }
    if count == 0 {
        return Err(SamplingError::EmptyDesign);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut points = DMatrix::<f64>::zeros(count, dim);
    let n = count as f64;
    for d in 0..dim {
        let mut strata: Vec<usize> = (0..count).collect();
        strata.shuffle(&mut rng);
        for (i, &s) in strata.iter().enumerate() {
            points[(i, d)] = (s as f64 + strict_unit(&mut rng)) / n;
        }
    }
    Ok(Design {
        points,
        generator: Generator::Lhs,
        seed,
    })
}

/// Smallest pairwise Euclidean distance within a point set.
pub fn min_pairwise_distance(points: &DMatrix<f64>) -> f64 {
    let n = points.nrows();
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let mut d2 = 0.0;
            for c in 0..points.ncols() {
                let diff = points[(i, c)] - points[(j, c)];
                d2 += diff * diff;
            }
            best = best.min(d2);
        }
    }
    best.sqrt()
}

/// Best of `trials` Latin hypercube draws under the maximin criterion
/// (largest minimum pairwise distance, measured in the unit hypercube).
/// Candidate `i` uses seed `seed + i`, so trials = 1 reduces to [`lhs`].
pub fn maximin_lhs(
    dim: usize,
    count: usize,
    seed: u64,
    trials: usize,
) -> Result<Design, SamplingError> {
    if trials == 0 {
        return Err(SamplingError::ZeroTrials);
    }
    let mut best: Option<(f64, Design)> = None;
    for t in 0..trials {
        let candidate = lhs(dim, count, seed.wrapping_add(t as u64))?;
        let score = min_pairwise_distance(&candidate.points);
        let better = match &best {
            None => true,
            Some((s, _)) => score > *s,
        };
        if better {
            best = Some((score, candidate));
        }
    }
    let (_, mut design) = best.expect("trials >= 1");
    design.generator = Generator::MaximinLhs;
    design.seed = seed;
    Ok(design)
}

/// Independent uniform points from a counter-based seeded stream (ChaCha12),
/// filled row by row.
pub fn mcs(dim: usize, count: usize, seed: u64) -> Result<Design, SamplingError> {
    if dim == 0 {
        return Err(SamplingError::ZeroDimension);
    }
    if count == 0 {
        return Err(SamplingError::EmptyDesign);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut points = DMatrix::<f64>::zeros(count, dim);
    for i in 0..count {
        for d in 0..dim {
            points[(i, d)] = strict_unit(&mut rng);
        }
    }
    Ok(Design {
        points,
        generator: Generator::Mcs,
        seed,
    })
}
