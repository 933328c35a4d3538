//! Planar pin-jointed truss solved by the direct stiffness method. The
//! random inputs are {A1, A2, E1, E2, P1..P6}: areas [m²] and Young's
//! moduli [MPa] of the horizontal and diagonal bar groups, and six vertical
//! loads [kN] on the top chord. The response is the mid-span sag [m],
//! downward positive.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::BenchmarkError;
use crate::input::{marginal_from_moments, InputError, InputModel, MarginalFamily};

/// Which (area, modulus) pair a bar draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BarGroup {
    Horizontal,
    Diagonal,
}

/// Node coordinates, bar connectivity with group labels, support
/// conditions, the nodes carrying the loads P1..P6, and the node whose
/// vertical displacement is reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrussGeometry {
    /// (x, y) coordinates in meters.
    pub nodes: Vec<[f64; 2]>,
    /// (node a, node b, group).
    pub bars: Vec<(usize, usize, BarGroup)>,
    /// (node, fix x, fix y).
    pub supports: Vec<(usize, bool, bool)>,
    /// Nodes loaded downward by P1..P6, in load order.
    pub load_nodes: Vec<usize>,
    /// Node whose downward displacement is the response.
    pub output_node: usize,
}

impl TrussGeometry {
    /// Two-meter-high Warren layout spanning 24 m: bottom chord of seven
    /// nodes every 4 m, top chord of six nodes offset by 2 m, alternating
    /// diagonals, pin and roller at the ends, loads on the top chord, sag
    /// read at the central bottom node.
    pub fn default_warren() -> Self {
        let mut nodes = Vec::new();
        for i in 0..7 {
            nodes.push([4.0 * i as f64, 0.0]);
        }
        for i in 0..6 {
            nodes.push([2.0 + 4.0 * i as f64, 2.0]);
        }
        let mut bars = Vec::new();
        for i in 0..6 {
            bars.push((i, i + 1, BarGroup::Horizontal));
        }
        for i in 0..5 {
            bars.push((7 + i, 8 + i, BarGroup::Horizontal));
        }
        for i in 0..6 {
            bars.push((i, 7 + i, BarGroup::Diagonal));
            bars.push((7 + i, i + 1, BarGroup::Diagonal));
        }
        Self {
            nodes,
            bars,
            supports: vec![(0, true, true), (6, false, true)],
            load_nodes: (7..13).collect(),
            output_node: 3,
        }
    }

    pub fn validate(&self) -> Result<(), BenchmarkError> {
        let n = self.nodes.len();
        if n < 2 {
            return Err(BenchmarkError::BadGeometry("need at least two nodes".into()));
        }
        if self.nodes.iter().flatten().any(|v| !v.is_finite()) {
            return Err(BenchmarkError::BadGeometry(
                "node coordinates must be finite".into(),
            ));
        }
        if self.bars.is_empty() {
            return Err(BenchmarkError::BadGeometry("no bars".into()));
        }
        for &(a, b, _) in &self.bars {
            if a >= n || b >= n {
                return Err(BenchmarkError::BadGeometry(format!(
                    "bar ({a}, {b}) references a missing node"
                )));
            }
            if a == b {
                return Err(BenchmarkError::BadGeometry(format!(
                    "bar ({a}, {b}) connects a node to itself"
                )));
            }
            let dx = self.nodes[a][0] - self.nodes[b][0];
            let dy = self.nodes[a][1] - self.nodes[b][1];
            if (dx * dx + dy * dy).sqrt() < 1e-12 {
                return Err(BenchmarkError::BadGeometry(format!(
                    "bar ({a}, {b}) has zero length"
                )));
            }
        }
        if self.load_nodes.len() != 6 {
            return Err(BenchmarkError::BadGeometry(format!(
                "expected 6 load nodes, got {}",
                self.load_nodes.len()
            )));
        }
        for &ln in &self.load_nodes {
            if ln >= n {
                return Err(BenchmarkError::BadGeometry(format!(
                    "load node {ln} is missing"
                )));
            }
        }
        if self.output_node >= n {
            return Err(BenchmarkError::BadGeometry(format!(
                "output node {} is missing",
                self.output_node
            )));
        }
        for &(s, _, _) in &self.supports {
            if s >= n {
                return Err(BenchmarkError::BadGeometry(format!(
                    "support node {s} is missing"
                )));
            }
        }
        let fixed: usize = self
            .supports
            .iter()
            .map(|&(_, fx, fy)| usize::from(fx) + usize::from(fy))
            .sum();
        if fixed < 3 {
            return Err(BenchmarkError::BadGeometry(
                "fewer than three constrained degrees of freedom".into(),
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, BenchmarkError> {
        let geometry: TrussGeometry = serde_json::from_str(text)
            .map_err(|e| BenchmarkError::BadGeometry(e.to_string()))?;
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("geometry serialization cannot fail")
    }
}

/// A truss with a fixed geometry, evaluated at 10-dimensional input points.
#[derive(Debug, Clone)]
pub struct TrussProblem {
    geometry: TrussGeometry,
}

impl Default for TrussProblem {
    fn default() -> Self {
        Self {
            geometry: TrussGeometry::default_warren(),
        }
    }
}

impl TrussProblem {
    pub fn new(geometry: TrussGeometry) -> Result<Self, BenchmarkError> {
        geometry.validate()?;
        Ok(Self { geometry })
    }

    pub fn geometry(&self) -> &TrussGeometry {
        &self.geometry
    }

    /// Mid-span sag for x = {A1 [m²], A2 [m²], E1 [MPa], E2 [MPa],
    /// P1..P6 [kN]}, reported downward positive.
    pub fn deflection(&self, x: &[f64]) -> Result<f64, BenchmarkError> {
        if x.len() != 10 {
            return Err(BenchmarkError::DimensionMismatch {
                expected: 10,
                got: x.len(),
            });
        }
        for (i, &v) in x.iter().take(4).enumerate() {
            if !(v > 0.0) {
                return Err(BenchmarkError::NonPositiveInput { index: i, value: v });
            }
        }
        let (a1, a2, e1, e2) = (x[0], x[1], x[2] * 1e3, x[3] * 1e3); // MPa -> kN/m²
        let loads = &x[4..10];

        let geometry = &self.geometry;
        let n = geometry.nodes.len();
        let mut stiffness = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for &(a, b, group) in &geometry.bars {
            let dx = geometry.nodes[b][0] - geometry.nodes[a][0];
            let dy = geometry.nodes[b][1] - geometry.nodes[a][1];
            let length = (dx * dx + dy * dy).sqrt();
            let (c, s) = (dx / length, dy / length);
            let ea = match group {
                BarGroup::Horizontal => e1 * a1,
                BarGroup::Diagonal => e2 * a2,
            };
            let k = ea / length;
            let local = [
                [c * c, c * s, -c * c, -c * s],
                [c * s, s * s, -c * s, -s * s],
                [-c * c, -c * s, c * c, c * s],
                [-c * s, -s * s, c * s, s * s],
            ];
            let dofs = [2 * a, 2 * a + 1, 2 * b, 2 * b + 1];
            for (r, &dr) in dofs.iter().enumerate() {
                for (cidx, &dc) in dofs.iter().enumerate() {
                    stiffness[(dr, dc)] += k * local[r][cidx];
                }
            }
        }

        let mut constrained = vec![false; 2 * n];
        for &(node, fx, fy) in &geometry.supports {
            if fx {
                constrained[2 * node] = true;
            }
            if fy {
                constrained[2 * node + 1] = true;
            }
        }
        let free: Vec<usize> = (0..2 * n).filter(|&d| !constrained[d]).collect();

        let mut forces = DVector::<f64>::zeros(2 * n);
        for (&node, &p) in geometry.load_nodes.iter().zip(loads.iter()) {
            forces[2 * node + 1] -= p;
        }

        let reduced = stiffness.select_rows(free.iter()).select_columns(free.iter());
        let rhs = DVector::from_fn(free.len(), |i, _| forces[free[i]]);
        let chol = Cholesky::new(reduced).ok_or(BenchmarkError::SingularStiffness)?;
        let solution = chol.solve(&rhs);

        let dof = 2 * geometry.output_node + 1;
        let pos = free
            .iter()
            .position(|&d| d == dof)
            .ok_or_else(|| BenchmarkError::BadGeometry("output node is fully constrained".into()))?;
        Ok(-solution[pos])
    }
}

/// Table of marginals: lognormal areas and moduli, Gumbel loads, all
/// independent.
pub fn truss_input_model() -> Result<InputModel, InputError> {
    let mut marginals = vec![
        marginal_from_moments(MarginalFamily::Lognormal, 0.002, 0.10)?.with_label("A1"),
        marginal_from_moments(MarginalFamily::Lognormal, 0.001, 0.10)?.with_label("A2"),
        marginal_from_moments(MarginalFamily::Lognormal, 2.1e5, 0.10)?.with_label("E1"),
        marginal_from_moments(MarginalFamily::Lognormal, 2.1e5, 0.10)?.with_label("E2"),
    ];
    for i in 1..=6 {
        marginals.push(
            marginal_from_moments(MarginalFamily::Gumbel, 50.0, 0.15)?
                .with_label(format!("P{i}")),
        );
    }
    InputModel::independent(marginals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mean_inputs() -> Vec<f64> {
        let mut x = vec![0.002, 0.001, 2.1e5, 2.1e5];
        x.extend(std::iter::repeat(50.0).take(6));
        x
    }

    #[test]
    fn zero_loads_zero_deflection() {
        let problem = TrussProblem::default();
        let mut x = mean_inputs();
        for p in x.iter_mut().skip(4) {
            *p = 0.0;
        }
        let u = problem.deflection(&x).unwrap();
        assert!(u.abs() < 1e-12);
    }

    #[test]
    fn inverse_in_stiffness_scale() {
        let problem = TrussProblem::default();
        let base = problem.deflection(&mean_inputs()).unwrap();
        let mut x = mean_inputs();
        x[2] *= 3.0;
        x[3] *= 3.0;
        let stiffer = problem.deflection(&x).unwrap();
        assert_relative_eq!(stiffer, base / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn deflection_at_mean_is_plausible_sag() {
        let problem = TrussProblem::default();
        let u = problem.deflection(&mean_inputs()).unwrap();
        assert!(u > 0.0, "sag should be downward positive");
        assert!((0.01..0.5).contains(&u), "unexpected magnitude {u}");
    }

    #[test]
    fn two_bar_toy_matches_hand_solution() {
        // symmetric two-bar shallow triangle: load P at the apex, both bars
        // identical; hand-assembled 2x2 stiffness at the apex gives
        // v = P L / (2 E A sin²θ)
        let geometry = TrussGeometry {
            nodes: vec![[0.0, 0.0], [8.0, 0.0], [4.0, 3.0]],
            bars: vec![
                (0, 2, BarGroup::Horizontal),
                (1, 2, BarGroup::Horizontal),
                (0, 1, BarGroup::Diagonal),
            ],
            supports: vec![(0, true, true), (1, true, true)],
            load_nodes: vec![2, 2, 2, 2, 2, 2],
            output_node: 2,
        };
        let problem = TrussProblem::new(geometry).unwrap();
        let (a, e_mpa, p_each) = (0.004, 1.0e5, 10.0);
        let mut x = vec![a, a, e_mpa, e_mpa];
        x.extend(std::iter::repeat(p_each).take(6));
        let u = problem.deflection(&x).unwrap();

        let e = e_mpa * 1e3;
        let length = 5.0;
        let sin = 3.0 / 5.0;
        let total_p = 6.0 * p_each;
        let expect = total_p * length / (2.0 * e * a * sin * sin);
        assert_relative_eq!(u, expect, epsilon = 1e-12, max_relative = 1e-12);
    }

    #[test]
    fn mechanism_detected() {
        // remove the end supports' horizontal restraint and all diagonals:
        // the top chord floats
        let mut geometry = TrussGeometry::default_warren();
        geometry.bars.retain(|&(_, _, g)| g == BarGroup::Horizontal);
        let problem = TrussProblem::new(geometry).unwrap();
        assert!(matches!(
            problem.deflection(&mean_inputs()),
            Err(BenchmarkError::SingularStiffness)
        ));
    }

    #[test]
    fn monotone_decreasing_in_e1() {
        let problem = TrussProblem::default();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(8);
        for _ in 0..100 {
            let mut x = mean_inputs();
            for v in x.iter_mut() {
                *v *= 0.8 + 0.4 * rng.random::<f64>();
            }
            let base = problem.deflection(&x).unwrap();
            let mut bumped = x.clone();
            bumped[2] *= 1.01;
            let less = problem.deflection(&bumped).unwrap();
            assert!(less < base, "deflection did not drop when E1 grew");
        }
    }

    #[test]
    fn geometry_document_round_trip() {
        let geometry = TrussGeometry::default_warren();
        let text = geometry.to_json();
        let back = TrussGeometry::from_json(&text).unwrap();
        assert_eq!(geometry, back);
    }

    #[test]
    fn geometry_document_rejects_bad_references() {
        let mut geometry = TrussGeometry::default_warren();
        geometry.bars.push((0, 99, BarGroup::Diagonal));
        assert!(TrussGeometry::from_json(&geometry.to_json()).is_err());
    }

    #[test]
    fn input_model_families() {
        let model = truss_input_model().unwrap();
        assert_eq!(model.dim(), 10);
        assert_relative_eq!(model.marginals()[0].mean(), 0.002, max_relative = 1e-12);
        assert_relative_eq!(model.marginals()[9].mean(), 50.0, max_relative = 1e-10);
    }
}
