//! Normalized (probabilists') Hermite polynomials, the tensor-product basis
//! over edges, Gauss-Hermite quadrature against the standard Gaussian, and
//! the Ornstein-Uhlenbeck eigenvalue kernel.
//!
//! `h_k` is orthonormal for the standard Gaussian: `E[h_k(xi) h_m(xi)] =
//! delta_{km}`. The first few are `h_0 = 1`, `h_1 = x`,
//! `h_2 = (x^2-1)/sqrt(2)`, `h_3 = (x^3-3x)/sqrt(6)`.

use std::collections::BTreeMap;

use crate::ground_state::CouplingField;
use crate::lattice::{EdgeId, EdgeSet, GridGraph};
use crate::{Error, Result};

/// Largest supported quadrature order.
pub const MAX_QUAD_ORDER: usize = 64;
/// Default per-edge quadrature order for spectral coefficients.
pub const DEFAULT_QUAD_ORDER: usize = 12;

/// Orthonormal Hermite polynomial `h_k(x)` via the stable normalized
/// three-term recurrence `h_{k+1} = (x h_k - sqrt(k) h_{k-1}) / sqrt(k+1)`.
/// The normalization avoids the factorial overflow of the classical
/// polynomials.
pub fn hermite_eval(k: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for j in 0..k {
        let next = (x * cur - (j as f64).sqrt() * prev) / ((j + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// Values `h_0(x) .. h_max_degree(x)` in one recurrence pass.
pub fn hermite_eval_all(max_degree: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max_degree + 1);
    let mut prev = 0.0;
    let mut cur = 1.0;
    out.push(cur);
    for j in 0..max_degree {
        let next = (x * cur - (j as f64).sqrt() * prev) / ((j + 1) as f64).sqrt();
        prev = cur;
        cur = next;
        out.push(cur);
    }
    out
}

/// Sparse multi-index `k = (k_e)` over the edges of a grid: a map from edge
/// to positive degree, with cached weight `|k| = sum k_e` and support
/// `E_k = {e : k_e >= 1}`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MultiIndex {
    degrees: BTreeMap<EdgeId, u32>,
    weight: u32,
    support: EdgeSet,
}

impl MultiIndex {
    /// The zero multi-index (weight 0, empty support).
    pub fn zero(graph: &GridGraph) -> Self {
        MultiIndex {
            degrees: BTreeMap::new(),
            weight: 0,
            support: EdgeSet::empty(graph),
        }
    }

    /// Builds from `(edge, degree)` pairs; zero degrees are dropped.
    pub fn from_pairs(graph: &GridGraph, pairs: &[(EdgeId, u32)]) -> Result<Self> {
        let mut idx = Self::zero(graph);
        for &(e, d) in pairs {
            if e >= graph.num_edges() {
                return Err(Error::InvalidParameter(format!(
                    "multi-index edge {e} out of range"
                )));
            }
            if d == 0 {
                continue;
            }
            if idx.degrees.insert(e, d).is_some() {
                return Err(Error::InvalidParameter(format!(
                    "duplicate multi-index entry for edge {e}"
                )));
            }
            idx.weight += d;
            idx.support.insert(e);
        }
        Ok(idx)
    }

    pub fn degree(&self, e: EdgeId) -> u32 {
        self.degrees.get(&e).copied().unwrap_or(0)
    }

    /// The weight `|k|`.
    pub fn weight(&self) -> u32 {
        self.weight
    }

    /// The support `E_k`.
    pub fn support(&self) -> &EdgeSet {
        &self.support
    }

    pub fn is_zero(&self) -> bool {
        self.weight == 0
    }

    /// `(edge, degree)` entries in edge order.
    pub fn iter(&self) -> impl Iterator<Item = (EdgeId, u32)> + '_ {
        self.degrees.iter().map(|(&e, &d)| (e, d))
    }
}

/// Tensor basis function `h_k({J_e}) = prod_e h_{k_e}(J_e)`; degree-0
/// factors are 1, so only the support contributes.
pub fn hermite_tensor_eval(index: &MultiIndex, couplings: &CouplingField) -> f64 {
    index
        .iter()
        .map(|(e, d)| hermite_eval(d as usize, couplings.get(e)))
        .product()
}

/// Ornstein-Uhlenbeck kernel `E[h_k(J^0) h_m(J^t)] = delta_{km} e^{-kt}`:
/// the Hermite polynomials are eigenfunctions of the OU generator.
pub fn ou_kernel(k: usize, m: usize, t: f64) -> Result<f64> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "ou_kernel requires t >= 0, got {t}"
        )));
    }
    if k != m {
        return Ok(0.0);
    }
    Ok((-(k as f64) * t).exp())
}

/// Gauss-Hermite rule integrating against the standard Gaussian density.
/// Exact for polynomials of degree `<= 2 * order - 1`.
#[derive(Clone, Debug, serde::Serialize)]
pub struct QuadratureRule {
    pub order: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Golub-Welsch construction from the Jacobi matrix of the probabilists'
    /// Hermite recurrence (zero diagonal, off-diagonal `sqrt(k)`). Nodes are
    /// symmetrized about 0 after the eigensolve.
    pub fn gauss_hermite(order: usize) -> Result<Self> {
        if !(1..=MAX_QUAD_ORDER).contains(&order) {
            return Err(Error::InvalidParameter(format!(
                "quadrature order {order} outside 1..={MAX_QUAD_ORDER}"
            )));
        }
        if order == 1 {
            return Ok(QuadratureRule {
                order,
                nodes: vec![0.0],
                weights: vec![1.0],
            });
        }
        let mut jacobi = nalgebra::DMatrix::<f64>::zeros(order, order);
        for i in 0..order - 1 {
            let b = ((i + 1) as f64).sqrt();
            jacobi[(i, i + 1)] = b;
            jacobi[(i + 1, i)] = b;
        }
        let eigen = jacobi.symmetric_eigen();
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|i| {
                let node = eigen.eigenvalues[i];
                // Weight = squared first component of the normalized
                // eigenvector, times the total mass 1 of the Gaussian.
                let w = eigen.eigenvectors[(0, i)].powi(2);
                (node, w)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

        // Enforce exact symmetry about the origin.
        let mut nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let mut weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        for i in 0..order / 2 {
            let j = order - 1 - i;
            let m = 0.5 * (nodes[j] - nodes[i]);
            nodes[i] = -m;
            nodes[j] = m;
            let w = 0.5 * (weights[i] + weights[j]);
            weights[i] = w;
            weights[j] = w;
        }
        if order % 2 == 1 {
            nodes[order / 2] = 0.0;
        }
        Ok(QuadratureRule {
            order,
            nodes,
            weights,
        })
    }

    /// `E[f(xi)]` for a standard Gaussian `xi`, to quadrature accuracy.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Convenience wrapper matching the operation name used by callers.
pub fn quadrature_rule(order: usize) -> Result<QuadratureRule> {
    QuadratureRule::gauss_hermite(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_grid;

    #[test]
    fn low_degree_values() {
        for x in [-3.0, -0.5, 0.0, 1.0, 2.5] {
            assert_eq!(hermite_eval(0, x), 1.0);
            assert_eq!(hermite_eval(1, x), x);
        }
        // h_2(x) = (x^2 - 1)/sqrt(2) vanishes at 1; h_3(x) = (x^3-3x)/sqrt(6)
        // vanishes at 0.
        assert_eq!(hermite_eval(2, 1.0), 0.0);
        assert_eq!(hermite_eval(3, 0.0), 0.0);
        assert!((hermite_eval(2, 2.0) - 3.0 / 2.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn recurrence_matches_high_precision_reference() {
        // Reference values computed with 40-digit arithmetic.
        let cases = [
            (30usize, 8.0, 2539758.777333236),
            (30, -8.0, 2539758.777333236),
            (12, 3.0, -3.0890832078361154),
            (5, 1.5, -0.3337684334797106),
        ];
        for (k, x, want) in cases {
            let got = hermite_eval(k, x);
            assert!(
                (got - want).abs() <= 1e-8 * want.abs().max(1.0),
                "h_{k}({x}) = {got}, want {want}"
            );
        }
        for k in 0..=30 {
            for i in 0..=32 {
                let x = -8.0 + 0.5 * i as f64;
                assert!(hermite_eval(k, x).is_finite());
            }
        }
    }

    #[test]
    fn eval_all_matches_single() {
        let vals = hermite_eval_all(12, 1.7);
        for (k, &v) in vals.iter().enumerate() {
            assert_eq!(v, hermite_eval(k, 1.7));
        }
    }

    #[test]
    fn multi_index_weight_and_support() {
        let g = build_grid(3, 2).unwrap();
        let k = MultiIndex::from_pairs(&g, &[(0, 2), (3, 1), (5, 0)]).unwrap();
        assert_eq!(k.weight(), 3);
        assert_eq!(k.support().to_indices(), vec![0, 3]);
        assert_eq!(k.degree(0), 2);
        assert_eq!(k.degree(5), 0);
        assert!(MultiIndex::from_pairs(&g, &[(99, 1)]).is_err());
        assert!(MultiIndex::from_pairs(&g, &[(0, 1), (0, 2)]).is_err());
    }

    #[test]
    fn tensor_eval_factorizes() {
        let g = build_grid(3, 2).unwrap();
        let mut j = CouplingField::zeros(&g);
        j.set(0, 0.8);
        j.set(3, -1.1);
        let zero = MultiIndex::zero(&g);
        assert_eq!(hermite_tensor_eval(&zero, &j), 1.0);

        let single = MultiIndex::from_pairs(&g, &[(3, 1)]).unwrap();
        assert_eq!(hermite_tensor_eval(&single, &j), -1.1);

        let both = MultiIndex::from_pairs(&g, &[(0, 2), (3, 1)]).unwrap();
        let left = MultiIndex::from_pairs(&g, &[(0, 2)]).unwrap();
        assert_eq!(
            hermite_tensor_eval(&both, &j),
            hermite_tensor_eval(&left, &j) * hermite_tensor_eval(&single, &j)
        );
    }

    #[test]
    fn ou_kernel_values() {
        assert_eq!(ou_kernel(0, 0, 3.7).unwrap(), 1.0);
        assert_eq!(ou_kernel(2, 3, 0.5).unwrap(), 0.0);
        assert!((ou_kernel(1, 1, 2.0_f64.ln()).unwrap() - 0.5).abs() < 1e-15);
        assert!(ou_kernel(1, 1, -0.1).is_err());
    }

    #[test]
    fn tiny_rules_are_exact() {
        let q1 = quadrature_rule(1).unwrap();
        assert_eq!(q1.nodes, vec![0.0]);
        assert_eq!(q1.weights, vec![1.0]);

        // Two-point rule solving the Gaussian moment conditions: nodes +-1,
        // weights 1/2.
        let q2 = quadrature_rule(2).unwrap();
        assert!((q2.nodes[0] + 1.0).abs() < 1e-12);
        assert!((q2.nodes[1] - 1.0).abs() < 1e-12);
        assert!((q2.weights[0] - 0.5).abs() < 1e-12);
        assert!((q2.weights[1] - 0.5).abs() < 1e-12);

        assert!(quadrature_rule(0).is_err());
        assert!(quadrature_rule(MAX_QUAD_ORDER + 1).is_err());
    }

    #[test]
    fn rules_dump_to_json() {
        let rule = quadrature_rule(2).unwrap();
        let json = serde_json::to_string(&rule).unwrap();
        assert!(json.contains("\"order\":2"));
        assert!(json.contains("\"nodes\""));
        assert!(json.contains("\"weights\""));
    }

    #[test]
    fn weights_sum_to_one_and_nodes_symmetric() {
        for q in 1..=MAX_QUAD_ORDER {
            let rule = quadrature_rule(q).unwrap();
            let total: f64 = rule.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "order {q}: sum {total}");
            for i in 0..q {
                assert_eq!(rule.nodes[i], -rule.nodes[q - 1 - i]);
            }
        }
    }

    #[test]
    fn quadrature_reproduces_orthonormality() {
        let rule = quadrature_rule(24).unwrap();
        for k in 0..=12 {
            for m in 0..=12 {
                let val = rule.integrate(|x| hermite_eval(k, x) * hermite_eval(m, x));
                let want = if k == m { 1.0 } else { 0.0 };
                assert!(
                    (val - want).abs() < 1e-10,
                    "k={k} m={m}: got {val}"
                );
            }
        }
    }

    #[test]
    fn quadrature_exact_on_gaussian_moments() {
        // E[x^(2m)] = (2m-1)!!, E[odd] = 0; exact for degree <= 2q-1.
        for q in [3usize, 6, 10, 16] {
            let rule = quadrature_rule(q).unwrap();
            let mut double_fact = 1.0;
            for m in 0..q {
                let even = 2 * m;
                if even < 2 * q {
                    if m > 0 {
                        double_fact *= (even - 1) as f64;
                    }
                    let got = rule.integrate(|x| x.powi(even as i32));
                    assert!(
                        (got - double_fact).abs() <= 1e-10 * double_fact.max(1.0),
                        "q={q} moment {even}: {got} vs {double_fact}"
                    );
                }
                let odd = 2 * m + 1;
                if odd < 2 * q {
                    let got = rule.integrate(|x| x.powi(odd as i32));
                    // Zero up to cancellation noise of the |x|^odd terms.
                    let scale = rule.integrate(|x| x.abs().powi(odd as i32));
                    assert!(
                        got.abs() < 1e-12 * scale.max(1.0),
                        "q={q} odd moment {odd}: {got}"
                    );
                }
            }
        }
    }
}
