//! Estimation of the Hermite-Fourier coefficients `alpha_k` of the relative
//! spin `sigma_u sigma_v`, subset spectral masses via the nested
//! conditional-expectation identity `E[E[sigma_u sigma_v | J_S]^2] =
//! sum_{k subset S} alpha_k^2`, the line mass, and connectivity checks of
//! the estimated spectral support.
//!
//! Quadrature estimates integrate the relative spin over a tensor
//! Gauss-Hermite grid. Grid points can land exactly on degenerate coupling
//! configurations (equal-magnitude frustrated cycles); there the relative
//! spin is defined as the symmetrized value over the set of maximizers
//! (0 when ambiguous), which keeps the estimates exactly antisymmetric
//! under cutset sign flips. Monte Carlo paths draw continuous Gaussians,
//! where ties have probability zero.

use rand::Rng;
use rayon::prelude::*;

use crate::ground_state::{
    solve_enumeration, solve_transfer_matrix, CouplingField, ENUMERATION_CAP,
    TRANSFER_MATRIX_ROW_CAP,
};
use crate::hermite::{hermite_eval_all, quadrature_rule, MultiIndex};
use crate::lattice::{
    component_boundary_cutset, is_connecting, line_l, EdgeId, EdgeSet, GridGraph, TerminalPair,
};
use crate::ou_flow::decorrelation_experiment;
use crate::seeds::{self, stream};
use crate::{Error, Result};

/// Edge-count cap for tensor quadrature (cost is `q^|E|` ground states).
pub const TENSOR_QUAD_EDGE_CAP: usize = 8;
/// Edge-count cap for the spectral census.
pub const CENSUS_EDGE_CAP: usize = 5;
/// Default degree cap for the census. The spectral measure has unbounded
/// support; any finite computation must truncate, so the captured mass is
/// always reported alongside.
pub const DEFAULT_DEGREE_CAP: u32 = 9;
/// Default time grid for decorrelation experiments.
pub const DEFAULT_T_GRID: [f64; 5] = [0.1, 0.25, 0.5, 1.0, 2.0];
/// Safety factor applied to the order-refinement error indicator when
/// bounding quadrature bias in the identity check (the sign integrand
/// converges at rate ~1/q, so halving the error per doubling).
pub const QUAD_REFINEMENT_SAFETY: f64 = 2.5;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum EstimateMethod {
    Quadrature,
    MonteCarlo,
}

/// One estimated Hermite-Fourier coefficient.
#[derive(Clone, Debug)]
pub struct SpectralEstimate {
    pub index: MultiIndex,
    pub alpha_hat: f64,
    /// Zero for quadrature estimates.
    pub stderr: f64,
    pub method: EstimateMethod,
}

/// Estimate of `sum_{k subset S} alpha_k^2` by nested Monte Carlo.
#[derive(Clone, Debug)]
pub struct SubsetMassEstimate {
    pub subset: EdgeSet,
    pub mass_hat: f64,
    pub stderr: f64,
    pub outer_samples: usize,
    /// Inner samples per half-batch.
    pub inner_samples: usize,
    /// Whether cutset-flip pairing was applied (possible only when the
    /// subset does not connect the terminals).
    pub antithetic: bool,
    /// Inner draws excluded because the enumeration solver flagged a
    /// near-degenerate ground state.
    pub excluded_near_ties: usize,
}

enum SolverKind {
    Transfer,
    Enumeration,
}

fn pick_solver(graph: &GridGraph) -> Result<SolverKind> {
    if graph.n_rows() <= TRANSFER_MATRIX_ROW_CAP {
        Ok(SolverKind::Transfer)
    } else if graph.num_vertices() <= ENUMERATION_CAP {
        Ok(SolverKind::Enumeration)
    } else {
        Err(Error::TooLarge(
            "no exact solver can handle this grid size".into(),
        ))
    }
}

/// Relative spin from an exact solve; `near_tie` comes from the enumeration
/// degeneracy gap and is always false for the transfer matrix.
fn solve_product(
    kind: &SolverKind,
    graph: &GridGraph,
    couplings: &CouplingField,
    pair: &TerminalPair,
) -> (i32, bool) {
    let result = match kind {
        SolverKind::Transfer => solve_transfer_matrix(graph, couplings),
        SolverKind::Enumeration => solve_enumeration(graph, couplings),
    }
    .expect("solver capability validated upfront");
    let near_tie = result.is_near_tie();
    (result.spins.product(pair.u, pair.v), near_tie)
}

/// Relative spin for quadrature grids: the value shared by every maximizer
/// of the Hamiltonian, or 0 when maximizers disagree (exact degeneracy).
/// Energies are compared as floats accumulated in edge-index order, which
/// makes the value exactly antisymmetric under cutset sign flips.
fn tie_symmetrized_product(
    graph: &GridGraph,
    couplings: &CouplingField,
    pair: &TerminalPair,
) -> f64 {
    let free = graph.num_vertices() - 1;
    assert!(free < 20, "symmetrized enumeration is for tiny graphs");
    let mut best = f64::NEG_INFINITY;
    let mut has_plus = false;
    let mut has_minus = false;
    for mask in 0u32..1 << free {
        let spin = |v: usize| -> bool {
            // true = spin +1
            v == 0 || mask >> (v - 1) & 1 == 0
        };
        let mut energy = 0.0;
        for e in graph.edge_ids() {
            let (a, b) = graph.endpoints(e);
            energy += if spin(a) == spin(b) {
                couplings.get(e)
            } else {
                -couplings.get(e)
            };
        }
        let product = spin(pair.u) == spin(pair.v);
        if energy > best {
            best = energy;
            has_plus = product;
            has_minus = !product;
        } else if energy == best {
            has_plus |= product;
            has_minus |= !product;
        }
    }
    match (has_plus, has_minus) {
        (true, false) => 1.0,
        (false, true) => -1.0,
        _ => 0.0,
    }
}

/// Deterministic estimate of `alpha_k = E[sigma_u sigma_v h_k({J_e})]` by
/// tensor Gauss-Hermite integration over all edges.
pub fn coefficient_quadrature(
    graph: &GridGraph,
    pair: &TerminalPair,
    index: &MultiIndex,
    order: usize,
) -> Result<SpectralEstimate> {
    let m = graph.num_edges();
    if m > TENSOR_QUAD_EDGE_CAP {
        return Err(Error::TooLarge(format!(
            "tensor quadrature is limited to {TENSOR_QUAD_EDGE_CAP} edges (cost q^|E|), got {m}"
        )));
    }
    let rule = quadrature_rule(order)?;
    let q = rule.order;
    // Per-edge Hermite factors at the nodes; degree-0 edges contribute 1.
    let factors: Vec<Option<Vec<f64>>> = (0..m)
        .map(|e| {
            let d = index.degree(e);
            (d > 0).then(|| {
                rule.nodes
                    .iter()
                    .map(|&x| crate::hermite::hermite_eval(d as usize, x))
                    .collect()
            })
        })
        .collect();

    let mut digits = vec![0usize; m];
    let mut couplings = CouplingField::from_values(graph, vec![rule.nodes[0]; m])?;
    let mut acc = 0.0;
    loop {
        let mut weight = 1.0;
        let mut basis = 1.0;
        for (e, &d) in digits.iter().enumerate() {
            weight *= rule.weights[d];
            if let Some(f) = &factors[e] {
                basis *= f[d];
            }
        }
        let product = tie_symmetrized_product(graph, &couplings, pair);
        acc += weight * product * basis;

        // Odometer over the tensor grid, last edge fastest.
        let mut pos = m;
        loop {
            if pos == 0 {
                return Ok(SpectralEstimate {
                    index: index.clone(),
                    alpha_hat: acc,
                    stderr: 0.0,
                    method: EstimateMethod::Quadrature,
                });
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < q {
                couplings.set(pos, rule.nodes[digits[pos]]);
                break;
            }
            digits[pos] = 0;
            couplings.set(pos, rule.nodes[0]);
        }
    }
}

/// Monte Carlo estimate of the same coefficient: the sample mean of
/// `sigma_u sigma_v * h_k` over i.i.d. coupling draws.
pub fn coefficient_mc<R: Rng + ?Sized>(
    graph: &GridGraph,
    pair: &TerminalPair,
    index: &MultiIndex,
    samples: usize,
    rng: &mut R,
) -> Result<SpectralEstimate> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    let kind = pick_solver(graph)?;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let j = CouplingField::standard_normal(graph, rng);
        let (p, _) = solve_product(&kind, graph, &j, pair);
        let value = p as f64 * crate::hermite::hermite_tensor_eval(index, &j);
        sum += value;
        sum_sq += value * value;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sum_sq - sum * sum / n) / (n - 1.0).max(1.0)).max(0.0);
    Ok(SpectralEstimate {
        index: index.clone(),
        alpha_hat: mean,
        stderr: (var / n).sqrt(),
        method: EstimateMethod::MonteCarlo,
    })
}

/// Nested Monte Carlo estimate of the subset mass
/// `E[E[sigma_u sigma_v | J_S]^2]`.
///
/// The outer loop draws `J_S`; the inner loop draws two independent
/// half-batches of the complementary couplings, estimates the conditional
/// expectation on each half, and multiplies the two half-means — an
/// unbiased estimator of the square (a plain squared mean would carry a
/// `Var/M` bias). With `antithetic` set and a disconnecting subset, every
/// inner draw is paired with its sign flip along a cutset disjoint from
/// `S`, which forces each inner mean to exactly zero.
pub fn subset_mass(
    graph: &GridGraph,
    pair: &TerminalPair,
    subset: &EdgeSet,
    n_outer: usize,
    m_inner: usize,
    antithetic: bool,
    master_seed: u64,
) -> Result<SubsetMassEstimate> {
    if n_outer == 0 || m_inner == 0 {
        return Err(Error::InvalidParameter(
            "outer and inner sample counts must be positive".into(),
        ));
    }
    let kind = pick_solver(graph)?;
    let subset_edges: Vec<EdgeId> = subset.to_indices();
    let complement_edges: Vec<EdgeId> = subset.complement().to_indices();
    let pairing = if antithetic && !is_connecting(graph, subset, pair) {
        Some(component_boundary_cutset(graph, subset, pair)?.cutset)
    } else {
        None
    };
    let applied_antithetic = pairing.is_some();
    // With nothing left to resample the conditional value is the relative
    // spin itself; one inner draw per half suffices.
    let m_eff = if complement_edges.is_empty() { 1 } else { m_inner };

    let per_outer: Vec<(f64, usize)> = (0..n_outer as u64)
        .into_par_iter()
        .map(|outer| {
            let mut outer_rng = seeds::stream_rng(master_seed, &[stream::OUTER_DRAW, outer]);
            let mut couplings = CouplingField::zeros(graph);
            for &e in &subset_edges {
                couplings.set(e, outer_rng.sample(rand_distr::StandardNormal));
            }
            let mut inner_rng = seeds::stream_rng(master_seed, &[stream::INNER_DRAW, outer]);
            let mut excluded = 0usize;
            let half_mean = |j: &mut CouplingField,
                             rng: &mut rand_chacha::ChaCha8Rng,
                             excluded: &mut usize|
             -> f64 {
                let mut sum = 0.0;
                let mut used = 0usize;
                for _ in 0..m_eff {
                    for &e in &complement_edges {
                        j.set(e, rng.sample(rand_distr::StandardNormal));
                    }
                    let (p, near_tie) = solve_product(&kind, graph, j, pair);
                    if near_tie {
                        *excluded += 1;
                        continue;
                    }
                    let contribution = match &pairing {
                        Some(cutset) => {
                            let flipped = crate::ground_state::flip_cutset(j, cutset);
                            let (p2, near_tie2) = solve_product(&kind, graph, &flipped, pair);
                            if near_tie2 {
                                *excluded += 1;
                                continue;
                            }
                            (p + p2) as f64 / 2.0
                        }
                        None => p as f64,
                    };
                    sum += contribution;
                    used += 1;
                }
                if used == 0 {
                    0.0
                } else {
                    sum / used as f64
                }
            };
            let mean_a = half_mean(&mut couplings, &mut inner_rng, &mut excluded);
            let mean_b = half_mean(&mut couplings, &mut inner_rng, &mut excluded);
            (mean_a * mean_b, excluded)
        })
        .collect();

    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut excluded = 0usize;
    for &(est, ex) in &per_outer {
        sum += est;
        sum_sq += est * est;
        excluded += ex;
    }
    let n = n_outer as f64;
    let mean = sum / n;
    let var = ((sum_sq - sum * sum / n) / (n - 1.0).max(1.0)).max(0.0);
    Ok(SubsetMassEstimate {
        subset: subset.clone(),
        mass_hat: mean,
        stderr: (var / n).sqrt(),
        outer_samples: n_outer,
        inner_samples: m_eff,
        antithetic: applied_antithetic,
        excluded_near_ties: excluded,
    })
}

/// Spectral mass of the straight line between the canonical terminals.
/// Strict subsets of the line do not connect the terminals and carry no
/// mass, so the subset estimate targets the line mass itself.
pub fn line_mass(
    graph: &GridGraph,
    pair: &TerminalPair,
    n_outer: usize,
    m_inner: usize,
    master_seed: u64,
) -> Result<SubsetMassEstimate> {
    let canonical = TerminalPair::canonical(graph)?;
    if *pair != canonical {
        return Err(Error::InvalidParameter(
            "line mass is defined for the canonical horizontal pair".into(),
        ));
    }
    let line = line_l(graph, pair)?;
    subset_mass(graph, pair, &line, n_outer, m_inner, false, master_seed)
}

/// One row of the spectral census.
#[derive(Clone, Debug)]
pub struct CensusEntry {
    pub index: MultiIndex,
    pub alpha_hat: f64,
    pub alpha_sq: f64,
    pub weight: u32,
    pub support_connects: bool,
}

#[derive(Clone, Debug)]
pub struct CensusReport {
    pub entries: Vec<CensusEntry>,
    /// `sum alpha_hat^2` over the enumerated multi-indices, against the
    /// Parseval total of 1.
    pub captured_mass: f64,
    pub degree_cap: u32,
    pub quad_order: usize,
}

/// Quadrature coefficients for every multi-index of weight `<= degree_cap`,
/// with connectivity flags for their supports. Cost: one ground-state solve
/// per tensor grid point plus a per-edge contraction.
pub fn spectral_support_census(
    graph: &GridGraph,
    pair: &TerminalPair,
    degree_cap: u32,
    order: usize,
) -> Result<CensusReport> {
    let m = graph.num_edges();
    if m > CENSUS_EDGE_CAP {
        return Err(Error::TooLarge(format!(
            "census is limited to {CENSUS_EDGE_CAP} edges, got {m}"
        )));
    }
    if m == 0 {
        return Err(Error::Geometry("census needs at least one edge".into()));
    }
    let rule = quadrature_rule(order)?;
    let q = rule.order;
    let d1 = degree_cap as usize + 1;

    // Relative spin on the full tensor grid, last edge fastest.
    let grid_len = q.pow(m as u32);
    let mut data = vec![0.0f64; grid_len];
    let mut digits = vec![0usize; m];
    let mut couplings = CouplingField::from_values(graph, vec![rule.nodes[0]; m])?;
    for slot in data.iter_mut() {
        *slot = tie_symmetrized_product(graph, &couplings, pair);
        let mut pos = m;
        while pos > 0 {
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < q {
                couplings.set(pos, rule.nodes[digits[pos]]);
                break;
            }
            digits[pos] = 0;
            couplings.set(pos, rule.nodes[0]);
        }
    }

    // factor[k][j] = w_j h_k(x_j)
    let factor: Vec<Vec<f64>> = {
        let mut by_node: Vec<Vec<f64>> = rule
            .nodes
            .iter()
            .map(|&x| hermite_eval_all(degree_cap as usize, x))
            .collect();
        for (j, col) in by_node.iter_mut().enumerate() {
            for v in col.iter_mut() {
                *v *= rule.weights[j];
            }
        }
        (0..d1)
            .map(|k| (0..q).map(|j| by_node[j][k]).collect())
            .collect()
    };

    // Contract one edge axis at a time: [outer][q][inner] -> [outer][d1][inner].
    let mut tensor = data;
    for axis in 0..m {
        let outer = d1.pow(axis as u32);
        let inner = q.pow((m - axis - 1) as u32);
        let mut next = vec![0.0f64; outer * d1 * inner];
        for o in 0..outer {
            for k in 0..d1 {
                let f = &factor[k];
                for i in 0..inner {
                    let mut acc = 0.0;
                    for (j, &fj) in f.iter().enumerate() {
                        acc += fj * tensor[(o * q + j) * inner + i];
                    }
                    next[(o * d1 + k) * inner + i] = acc;
                }
            }
        }
        tensor = next;
    }

    // Enumerate weight <= degree_cap and build the report.
    let mut entries = Vec::new();
    let mut captured = 0.0;
    let mut k_digits = vec![0u32; m];
    for (flat, &alpha) in tensor.iter().enumerate() {
        let mut rest = flat;
        for pos in (0..m).rev() {
            k_digits[pos] = (rest % d1) as u32;
            rest /= d1;
        }
        let weight: u32 = k_digits.iter().sum();
        if weight > degree_cap {
            continue;
        }
        let pairs: Vec<(EdgeId, u32)> = k_digits
            .iter()
            .enumerate()
            .filter(|(_, &d)| d > 0)
            .map(|(e, &d)| (e, d))
            .collect();
        let index = MultiIndex::from_pairs(graph, &pairs)?;
        let support_connects = is_connecting(graph, index.support(), pair);
        captured += alpha * alpha;
        entries.push(CensusEntry {
            index,
            alpha_hat: alpha,
            alpha_sq: alpha * alpha,
            weight,
            support_connects,
        });
    }
    Ok(CensusReport {
        entries,
        captured_mass: captured,
        degree_cap,
        quad_order: order,
    })
}

/// One row of the decorrelation identity comparison.
#[derive(Clone, Debug)]
pub struct IdentityRow {
    pub t: f64,
    /// Monte Carlo estimate of `Cov(sigma_u^t sigma_v^t, sigma_u^0 sigma_v^0)`.
    pub mc_cov: f64,
    pub mc_stderr: f64,
    /// `sum_{|k| <= D} alpha_hat_k^2 e^{-|k| t}` from the census.
    pub spectral_sum: f64,
    /// Truncated-tail bound plus the order-refinement quadrature allowance.
    pub allowance: f64,
}

/// Compares the Monte Carlo covariance of the relative spins against the
/// truncated spectral sum `sum alpha_k^2 e^{-|k| t}` on a tiny graph.
///
/// The allowance has two parts: the Parseval tail `(1 - captured) *
/// e^{-(D+1) t}` for the dropped weights, and a quadrature-bias bound from
/// comparing the census against one at double the order.
pub fn decorrelation_identity_check(
    graph: &GridGraph,
    pair: &TerminalPair,
    t_grid: &[f64],
    degree_cap: u32,
    order: usize,
    replicas: usize,
    master_seed: u64,
) -> Result<Vec<IdentityRow>> {
    let census = spectral_support_census(graph, pair, degree_cap, order)?;
    let refined = spectral_support_census(
        graph,
        pair,
        degree_cap,
        (2 * order).min(crate::hermite::MAX_QUAD_ORDER),
    )?;
    let mc = decorrelation_experiment(graph, pair, t_grid, replicas, master_seed)?;

    let rows = mc
        .iter()
        .map(|row| {
            let t = row.t;
            let mut spectral_sum = 0.0;
            let mut refine_gap = 0.0;
            for (a, b) in census.entries.iter().zip(&refined.entries) {
                debug_assert_eq!(a.weight, b.weight);
                let damp = (-(a.weight as f64) * t).exp();
                spectral_sum += a.alpha_sq * damp;
                refine_gap += (a.alpha_sq - b.alpha_sq).abs() * damp;
            }
            let tail = (1.0 - census.captured_mass).max(0.0)
                * (-((degree_cap + 1) as f64) * t).exp();
            IdentityRow {
                t,
                mc_cov: row.mean_cov,
                mc_stderr: row.stderr,
                spectral_sum,
                allowance: tail + QUAD_REFINEMENT_SAFETY * refine_gap,
            }
        })
        .collect();
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_grid;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_edge() -> (GridGraph, TerminalPair) {
        let g = build_grid(2, 1).unwrap();
        let pair = TerminalPair::new(0, 1).unwrap();
        (g, pair)
    }

    // Independent reference for the q = 12 rule (40-digit construction).
    const NODES_Q12: [f64; 6] = [
        0.44440300194413895,
        1.3403751971516167,
        2.259464451000799,
        3.2237098287700974,
        4.2718258479322815,
        5.500901704467748,
    ];
    const WEIGHTS_Q12: [f64; 6] = [
        0.32166436151283,
        0.14696704804532998,
        0.029116687912364176,
        0.0022033806875332005,
        4.837184922590645e-05,
        1.4999271676371626e-07,
    ];

    /// 1-D oracle: explicit-polynomial Hermite values on frozen nodes.
    fn oracle_alpha(k: usize) -> f64 {
        // Explicit orthonormal polynomials up to degree 11.
        let poly = |k: usize, x: f64| -> f64 {
            match k {
                0 => 1.0,
                1 => x,
                2 => (x * x - 1.0) / 2.0_f64.sqrt(),
                3 => (x.powi(3) - 3.0 * x) / 6.0_f64.sqrt(),
                4 => (x.powi(4) - 6.0 * x * x + 3.0) / 24.0_f64.sqrt(),
                5 => (x.powi(5) - 10.0 * x.powi(3) + 15.0 * x) / 120.0_f64.sqrt(),
                6 => (x.powi(6) - 15.0 * x.powi(4) + 45.0 * x * x - 15.0) / 720.0_f64.sqrt(),
                7 => {
                    (x.powi(7) - 21.0 * x.powi(5) + 105.0 * x.powi(3) - 105.0 * x)
                        / 5040.0_f64.sqrt()
                }
                8 => {
                    (x.powi(8) - 28.0 * x.powi(6) + 210.0 * x.powi(4) - 420.0 * x * x + 105.0)
                        / 40320.0_f64.sqrt()
                }
                9 => {
                    (x.powi(9) - 36.0 * x.powi(7) + 378.0 * x.powi(5) - 1260.0 * x.powi(3)
                        + 945.0 * x)
                        / 362880.0_f64.sqrt()
                }
                _ => panic!("oracle handles k <= 9"),
            }
        };
        // sign(x) h_k(x) is even for odd k, odd for even k.
        if k.is_multiple_of(2) {
            return 0.0;
        }
        2.0 * NODES_Q12
            .iter()
            .zip(&WEIGHTS_Q12)
            .map(|(&x, &w)| w * poly(k, x))
            .sum::<f64>()
    }

    #[test]
    fn zero_index_coefficient_vanishes() {
        let g = build_grid(3, 1).unwrap();
        let pair = TerminalPair::new(0, 2).unwrap();
        let zero = MultiIndex::zero(&g);
        let est = coefficient_quadrature(&g, &pair, &zero, 8).unwrap();
        assert!(est.alpha_hat.abs() < 1e-12, "alpha_0 = {}", est.alpha_hat);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn single_edge_first_coefficient_matches_oracle() {
        let (g, pair) = single_edge();
        let k1 = MultiIndex::from_pairs(&g, &[(0, 1)]).unwrap();
        let est = coefficient_quadrature(&g, &pair, &k1, 12).unwrap();
        let want = oracle_alpha(1);
        assert!(
            (est.alpha_hat - want).abs() < 1e-10,
            "{} vs oracle {want}",
            est.alpha_hat
        );
        // The quadrature value approximates E|xi| = sqrt(2/pi) ~ 0.79789 up
        // to the sign-kink truncation error of the rule.
        assert!((est.alpha_hat - (2.0 / std::f64::consts::PI).sqrt()).abs() < 0.05);
    }

    #[test]
    fn single_edge_even_coefficients_vanish() {
        let (g, pair) = single_edge();
        for k in [2u32, 4, 6] {
            let idx = MultiIndex::from_pairs(&g, &[(0, k)]).unwrap();
            let est = coefficient_quadrature(&g, &pair, &idx, 12).unwrap();
            assert!(est.alpha_hat.abs() < 1e-12);
        }
    }

    #[test]
    fn tensor_cap_enforced() {
        let g = build_grid(10, 1).unwrap();
        let pair = TerminalPair::new(0, 9).unwrap();
        let zero = MultiIndex::zero(&g);
        assert!(matches!(
            coefficient_quadrature(&g, &pair, &zero, 4),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn mc_agrees_with_quadrature_on_single_edge() {
        let (g, pair) = single_edge();
        let k1 = MultiIndex::from_pairs(&g, &[(0, 1)]).unwrap();
        let quad = coefficient_quadrature(&g, &pair, &k1, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mc = coefficient_mc(&g, &pair, &k1, 20_000, &mut rng).unwrap();
        assert!(
            (mc.alpha_hat - quad.alpha_hat).abs() < 3.0 * mc.stderr + 0.02,
            "mc {} vs quad {}",
            mc.alpha_hat,
            quad.alpha_hat
        );
        // Coefficients of a +-1 observable are bounded by Cauchy-Schwarz.
        assert!(mc.alpha_hat.abs() <= 1.0 + 3.0 * mc.stderr);
        assert!(quad.alpha_hat.abs() <= 1.0);
    }

    #[test]
    fn mc_zero_index_is_small() {
        let g = build_grid(3, 2).unwrap();
        let pair = TerminalPair::canonical(&g).unwrap();
        let zero = MultiIndex::zero(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let n = 4000;
        let est = coefficient_mc(&g, &pair, &zero, n, &mut rng).unwrap();
        assert!(est.alpha_hat.abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn mc_nonconnecting_support_is_small() {
        // k supported on one edge far from connecting u and v.
        let g = build_grid(4, 1).unwrap();
        let pair = TerminalPair::new(0, 3).unwrap();
        let idx = MultiIndex::from_pairs(&g, &[(0, 1)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let est = coefficient_mc(&g, &pair, &idx, 4000, &mut rng).unwrap();
        assert!(est.alpha_hat.abs() <= 3.0 * est.stderr);
    }

    #[test]
    fn full_subset_mass_is_exactly_one() {
        for (cols, rows) in [(2, 2), (3, 2)] {
            let g = build_grid(cols, rows).unwrap();
            let pair = TerminalPair::canonical(&g).unwrap();
            let full = EdgeSet::full(&g);
            let est = subset_mass(&g, &pair, &full, 20, 4, false, 7).unwrap();
            assert_eq!(est.mass_hat, 1.0);
            assert_eq!(est.stderr, 0.0);
            assert_eq!(est.inner_samples, 1);
        }
    }

    #[test]
    fn single_edge_subset_mass_is_one() {
        let (g, pair) = single_edge();
        let s = EdgeSet::full(&g);
        let est = subset_mass(&g, &pair, &s, 10, 3, false, 11).unwrap();
        assert_eq!(est.mass_hat, 1.0);
    }

    #[test]
    fn antithetic_disconnecting_mass_is_bitwise_zero() {
        let g = build_grid(4, 4).unwrap();
        let pair = TerminalPair::canonical(&g).unwrap();
        // A set that misses the terminals entirely.
        let s = EdgeSet::from_edges(&g, [g.vertical_edge(2, 2), g.vertical_edge(3, 2)]);
        assert!(!is_connecting(&g, &s, &pair));
        let est = subset_mass(&g, &pair, &s, 12, 6, true, 13).unwrap();
        assert!(est.antithetic);
        assert_eq!(est.mass_hat.to_bits(), 0.0f64.to_bits());
        assert_eq!(est.stderr.to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn nonantithetic_disconnecting_mass_is_statistically_zero() {
        let g = build_grid(4, 4).unwrap();
        let pair = TerminalPair::canonical(&g).unwrap();
        let s = EdgeSet::from_edges(&g, [g.vertical_edge(2, 2), g.vertical_edge(3, 2)]);
        let est = subset_mass(&g, &pair, &s, 80, 20, false, 17).unwrap();
        assert!(!est.antithetic);
        assert!(est.mass_hat.abs() <= 3.0 * est.stderr);
    }

    #[test]
    fn subset_mass_monotone_in_subset() {
        let g = build_grid(3, 3).unwrap();
        let pair = TerminalPair::canonical(&g).unwrap();
        let small = line_l(&g, &pair).unwrap();
        let mut large = small.clone();
        large.insert(g.vertical_edge(2, 1));
        large.insert(g.vertical_edge(2, 2));
        let m_small = subset_mass(&g, &pair, &small, 150, 40, false, 19).unwrap();
        let m_large = subset_mass(&g, &pair, &large, 150, 40, false, 23).unwrap();
        assert!(m_small.mass_hat <= m_large.mass_hat + 3.0 * (m_small.stderr + m_large.stderr));
    }

    #[test]
    fn line_mass_requires_canonical_pair() {
        let g = build_grid(4, 4).unwrap();
        let off = TerminalPair::new(g.vertex(1, 1), g.vertex(4, 1)).unwrap();
        assert!(line_mass(&g, &off, 5, 5, 1).is_err());
        let pair = TerminalPair::canonical(&g).unwrap();
        let est = line_mass(&g, &pair, 60, 20, 29).unwrap();
        assert!(est.mass_hat > -3.0 * est.stderr);
        assert!(est.mass_hat < 1.0 + 3.0 * est.stderr);
    }

    #[test]
    fn line_mass_on_two_grid_targets_single_edge_mass() {
        // The smallest canonical setup: the line is one horizontal edge and
        // the estimate targets the mass supported exactly on it.
        let g = build_grid(2, 2).unwrap();
        let pair = TerminalPair::canonical(&g).unwrap();
        let line = line_l(&g, &pair).unwrap();
        assert_eq!(line.len(), 1);
        let est = line_mass(&g, &pair, 200, 50, 31).unwrap();
        assert!(est.mass_hat > 0.1, "single-edge line mass {}", est.mass_hat);
        assert!(est.mass_hat < 1.0 + 3.0 * est.stderr);
    }

    #[test]
    fn census_on_single_edge_matches_oracle_sums() {
        let (g, pair) = single_edge();
        let census = spectral_support_census(&g, &pair, 9, 12).unwrap();
        assert_eq!(census.entries.len(), 10);
        let mut oracle_sum = 0.0;
        for entry in &census.entries {
            let k = entry.weight as usize;
            let want = oracle_alpha(k);
            assert!(
                (entry.alpha_hat - want).abs() < 1e-10,
                "k={k}: {} vs {want}",
                entry.alpha_hat
            );
            oracle_sum += want * want;
            assert_eq!(entry.support_connects, k > 0);
        }
        assert!((census.captured_mass - oracle_sum).abs() < 1e-10);
        // Captured mass is nondecreasing in the cap.
        let smaller = spectral_support_census(&g, &pair, 5, 12).unwrap();
        assert!(smaller.captured_mass <= census.captured_mass + 1e-15);
    }

    #[test]
    fn census_nonconnecting_supports_carry_no_mass() {
        // 1x4 path: supports missing an interior edge cannot connect.
        let g = build_grid(4, 1).unwrap();
        let pair = TerminalPair::new(0, 3).unwrap();
        let census = spectral_support_census(&g, &pair, 5, 8).unwrap();
        for entry in &census.entries {
            if !entry.support_connects {
                assert!(
                    entry.alpha_sq <= 1e-8,
                    "nonconnecting {:?} has mass {}",
                    entry.index,
                    entry.alpha_sq
                );
            }
        }
        assert!(census.captured_mass <= 1.0 + 1e-12);
    }

    #[test]
    fn census_respects_caps() {
        let g = build_grid(4, 2).unwrap();
        let pair = TerminalPair::canonical(&g).unwrap();
        assert!(matches!(
            spectral_support_census(&g, &pair, 3, 8),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn identity_check_on_single_edge() {
        let (g, pair) = single_edge();
        let rows =
            decorrelation_identity_check(&g, &pair, &[0.25, 1.0], 9, 12, 30_000, 31).unwrap();
        for row in rows {
            assert!(
                (row.mc_cov - row.spectral_sum).abs() <= 3.0 * row.mc_stderr + row.allowance,
                "t={}: mc {} vs spectral {} (allowance {})",
                row.t,
                row.mc_cov,
                row.spectral_sum,
                row.allowance
            );
        }
    }
}
