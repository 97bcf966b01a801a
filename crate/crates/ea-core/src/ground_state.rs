//! Exact maximization of `H(sigma) = sum_e J_e sigma_u sigma_v` over spin
//! configurations, by gauge-fixed Gray-code enumeration and by a column
//! transfer-matrix dynamic program, plus energy evaluation and the gauge /
//! cutset transformations.
//!
//! The global sign ambiguity of the maximizer is resolved by pinning vertex
//! `(1,1)` to `+1` everywhere; all relative-spin outputs are pin-independent.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::bitset::Bits;
use crate::lattice::{EdgeId, EdgeSet, GridGraph, VertexId, VertexSet};
use crate::{Error, Result};

/// Default vertex-count cap for the enumeration solver.
pub const ENUMERATION_CAP: usize = 26;
/// Row cap for the transfer-matrix solver (state space `2^n_rows`).
pub const TRANSFER_MATRIX_ROW_CAP: usize = 14;
/// Ground states closer than this to the runner-up are flagged as near-ties.
pub const NEAR_TIE_GAP: f64 = 1e-12;

/// One real coupling per edge of a grid, with magnitude/sign views.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingField {
    values: Vec<f64>,
}

impl CouplingField {
    pub fn zeros(graph: &GridGraph) -> Self {
        CouplingField {
            values: vec![0.0; graph.num_edges()],
        }
    }

    pub fn constant(graph: &GridGraph, value: f64) -> Self {
        CouplingField {
            values: vec![value; graph.num_edges()],
        }
    }

    pub fn from_values(graph: &GridGraph, values: Vec<f64>) -> Result<Self> {
        if values.len() != graph.num_edges() {
            return Err(Error::ShapeMismatch(format!(
                "{} coupling values for a graph with {} edges",
                values.len(),
                graph.num_edges()
            )));
        }
        Ok(CouplingField { values })
    }

    /// I.i.d. standard Gaussian couplings.
    pub fn standard_normal<R: Rng + ?Sized>(graph: &GridGraph, rng: &mut R) -> Self {
        CouplingField {
            values: (0..graph.num_edges())
                .map(|_| rng.sample(StandardNormal))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, e: EdgeId) -> f64 {
        self.values[e]
    }

    pub fn set(&mut self, e: EdgeId, value: f64) {
        self.values[e] = value;
    }

    /// `|J_e|`; together with [`CouplingField::sign`] this recovers the
    /// coupling exactly: `J_e = sign(J_e) * |J_e|`.
    pub fn magnitude(&self, e: EdgeId) -> f64 {
        self.values[e].abs()
    }

    /// Sign in `{-1, +1}`; zero couplings (a measure-zero event) map to `+1`.
    pub fn sign(&self, e: EdgeId) -> f64 {
        if self.values[e] < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// One spin in `{-1, +1}` per vertex, stored as a bit set (`bit = 1` means
/// spin `-1`), with an optional record of which vertex is pinned to `+1`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct SpinConfig {
    bits: Bits,
    pinned: Option<VertexId>,
}

impl SpinConfig {
    /// All-`+1` configuration.
    pub fn all_plus(graph: &GridGraph) -> Self {
        SpinConfig {
            bits: Bits::new(graph.num_vertices()),
            pinned: None,
        }
    }

    pub fn from_spins(graph: &GridGraph, spins: &[i8]) -> Result<Self> {
        if spins.len() != graph.num_vertices() {
            return Err(Error::ShapeMismatch(format!(
                "{} spins for a graph with {} vertices",
                spins.len(),
                graph.num_vertices()
            )));
        }
        let mut bits = Bits::new(spins.len());
        for (v, &s) in spins.iter().enumerate() {
            match s {
                1 => {}
                -1 => bits.set(v, true),
                other => {
                    return Err(Error::Decode(format!("spin value {other} is not +1 or -1")))
                }
            }
        }
        Ok(SpinConfig { bits, pinned: None })
    }

    /// Uniformly random spins.
    pub fn random<R: Rng + ?Sized>(graph: &GridGraph, rng: &mut R) -> Self {
        let mut bits = Bits::new(graph.num_vertices());
        for v in 0..graph.num_vertices() {
            bits.set(v, rng.gen::<bool>());
        }
        SpinConfig { bits, pinned: None }
    }

    pub fn num_vertices(&self) -> usize {
        self.bits.len()
    }

    #[inline]
    pub fn spin(&self, v: VertexId) -> i32 {
        if self.bits.get(v) {
            -1
        } else {
            1
        }
    }

    pub fn set_spin(&mut self, v: VertexId, spin: i32) {
        debug_assert!(spin == 1 || spin == -1);
        self.bits.set(v, spin < 0);
    }

    pub fn flip(&mut self, v: VertexId) {
        self.bits.flip(v);
    }

    /// Negates the spins on every vertex of `side`.
    pub fn flip_set(&mut self, side: &VertexSet) {
        self.bits.xor_with(side.bits());
    }

    /// Relative spin `sigma_u sigma_v`.
    #[inline]
    pub fn product(&self, u: VertexId, v: VertexId) -> i32 {
        if self.bits.get(u) == self.bits.get(v) {
            1
        } else {
            -1
        }
    }

    /// Pointwise product `tau * sigma` (gauge action on configurations).
    pub fn pointwise_product(&self, tau: &SpinConfig) -> SpinConfig {
        let mut bits = self.bits.clone();
        bits.xor_with(&tau.bits);
        SpinConfig { bits, pinned: None }
    }

    /// The representative of `{sigma, -sigma}` with `sigma_pin = +1`.
    pub fn pinned_to_plus(&self, pin: VertexId) -> SpinConfig {
        let mut bits = self.bits.clone();
        if bits.get(pin) {
            bits.invert();
        }
        SpinConfig {
            bits,
            pinned: Some(pin),
        }
    }

    pub fn pinned(&self) -> Option<VertexId> {
        self.pinned
    }

    /// Number of vertices on which the two configurations agree.
    pub fn matches(&self, other: &SpinConfig) -> usize {
        self.bits.count_matches(&other.bits)
    }

    pub fn spins(&self) -> Vec<i8> {
        (0..self.bits.len())
            .map(|v| if self.bits.get(v) { -1 } else { 1 })
            .collect()
    }
}

/// Result of an exact ground-state solve. `degeneracy_gap` is the energy
/// margin to the best non-equivalent configuration; it is reported by the
/// enumeration solver only.
#[derive(Clone, Debug)]
pub struct GroundStateResult {
    pub spins: SpinConfig,
    pub energy: f64,
    pub degeneracy_gap: Option<f64>,
}

impl GroundStateResult {
    /// True when enumeration found a runner-up within [`NEAR_TIE_GAP`].
    pub fn is_near_tie(&self) -> bool {
        matches!(self.degeneracy_gap, Some(g) if g < NEAR_TIE_GAP)
    }
}

/// `H(sigma) = sum_e J_e sigma_u sigma_v`, summed in edge-index order.
pub fn energy(graph: &GridGraph, couplings: &CouplingField, spins: &SpinConfig) -> Result<f64> {
    if couplings.len() != graph.num_edges() {
        return Err(Error::ShapeMismatch(
            "coupling field does not match graph".into(),
        ));
    }
    if spins.num_vertices() != graph.num_vertices() {
        return Err(Error::ShapeMismatch(
            "spin configuration does not match graph".into(),
        ));
    }
    let mut total = 0.0;
    for e in graph.edge_ids() {
        let (a, b) = graph.endpoints(e);
        total += couplings.get(e) * (spins.product(a, b) as f64);
    }
    Ok(total)
}

/// Gauge transformation `J^tau_(a,b) = tau_a J_(a,b) tau_b`. Involutive.
pub fn gauge_transform(
    graph: &GridGraph,
    couplings: &CouplingField,
    tau: &SpinConfig,
) -> Result<CouplingField> {
    if couplings.len() != graph.num_edges() || tau.num_vertices() != graph.num_vertices() {
        return Err(Error::ShapeMismatch(
            "gauge transform requires matching shapes".into(),
        ));
    }
    let mut out = couplings.clone();
    for e in graph.edge_ids() {
        let (a, b) = graph.endpoints(e);
        let s = (tau.spin(a) * tau.spin(b)) as f64;
        out.values[e] = s * couplings.values[e];
    }
    Ok(out)
}

/// Negates the couplings on every edge of the cutset.
pub fn flip_cutset(couplings: &CouplingField, cutset: &EdgeSet) -> CouplingField {
    let mut out = couplings.clone();
    for e in cutset.iter() {
        out.values[e] = -out.values[e];
    }
    out
}

/// Exact ground state by gauge-fixed enumeration in Gray-code order with
/// incremental energy deltas. Vertex `(1,1)` is pinned to `+1`; the default
/// cap is [`ENUMERATION_CAP`] vertices.
pub fn solve_enumeration(graph: &GridGraph, couplings: &CouplingField) -> Result<GroundStateResult> {
    solve_enumeration_capped(graph, couplings, ENUMERATION_CAP)
}

pub fn solve_enumeration_capped(
    graph: &GridGraph,
    couplings: &CouplingField,
    cap: usize,
) -> Result<GroundStateResult> {
    let n = graph.num_vertices();
    if n > cap {
        return Err(Error::TooLarge(format!(
            "{n} vertices exceeds the enumeration cap of {cap}; use the transfer-matrix solver"
        )));
    }
    if couplings.len() != graph.num_edges() {
        return Err(Error::ShapeMismatch(
            "coupling field does not match graph".into(),
        ));
    }
    let free = n - 1; // vertex 0 pinned to +1
    let steps = 1u64 << free;

    // All-plus starting energy.
    let mut running: f64 = couplings.values.iter().sum();
    let mut mask: u64 = 0;

    let mut best_mask = 0u64;
    let mut best_energy = running;
    let mut second_mask: Option<u64> = None;
    let mut second_energy = f64::NEG_INFINITY;

    for step in 1..steps {
        // Gray code: flip the vertex given by the lowest set bit of `step`.
        let bit = step.trailing_zeros() as usize;
        let w: VertexId = bit + 1;
        let sigma_w = if mask >> bit & 1 == 1 { -1.0 } else { 1.0 };
        let mut local = 0.0;
        for &(e, x) in graph.neighbors(w) {
            let sigma_x = if x == 0 {
                1.0
            } else if mask >> (x - 1) & 1 == 1 {
                -1.0
            } else {
                1.0
            };
            local += couplings.values[e] * sigma_x;
        }
        running -= 2.0 * sigma_w * local;
        mask ^= 1 << bit;

        if running > best_energy || (running == best_energy && mask < best_mask) {
            if best_mask != mask {
                second_energy = best_energy;
                second_mask = Some(best_mask);
            }
            best_energy = running;
            best_mask = mask;
        } else if running > second_energy {
            second_energy = running;
            second_mask = Some(mask);
        }
    }

    // Recompute the retained energies exactly; incremental sums carry
    // accumulated rounding.
    let spins = spins_from_mask(graph, best_mask);
    let exact_best = energy(graph, couplings, &spins)?;
    let degeneracy_gap = second_mask.map(|m| {
        let second = spins_from_mask(graph, m);
        let exact_second = energy(graph, couplings, &second).expect("shapes match");
        (exact_best - exact_second).max(0.0)
    });
    Ok(GroundStateResult {
        spins,
        energy: exact_best,
        degeneracy_gap,
    })
}

fn spins_from_mask(graph: &GridGraph, mask: u64) -> SpinConfig {
    let mut spins = SpinConfig::all_plus(graph);
    for bit in 0..graph.num_vertices().saturating_sub(1) {
        if mask >> bit & 1 == 1 {
            spins.flip(bit + 1);
        }
    }
    spins.pinned_to_plus(0)
}

/// Exact ground state by a column transfer-matrix dynamic program
/// (Viterbi over per-column spin patterns). Any number of columns;
/// `n_rows <= 14`. Gauge-pinned like [`solve_enumeration`].
pub fn solve_transfer_matrix(
    graph: &GridGraph,
    couplings: &CouplingField,
) -> Result<GroundStateResult> {
    let rows = graph.n_rows();
    let cols = graph.n_cols();
    if rows > TRANSFER_MATRIX_ROW_CAP {
        return Err(Error::TooLarge(format!(
            "{rows} rows exceeds the transfer-matrix cap of {TRANSFER_MATRIX_ROW_CAP}"
        )));
    }
    if couplings.len() != graph.num_edges() {
        return Err(Error::ShapeMismatch(
            "coupling field does not match graph".into(),
        ));
    }
    let states = 1usize << rows;

    // Vertical energy of column x under pattern p, accumulated in row order.
    // Pattern bit r (0-based) set means spin -1 on row r+1.
    let column_vertical = |x: usize| -> Vec<f64> {
        let mut table = vec![0.0f64; states];
        if rows == 1 {
            return table;
        }
        let edge_vals: Vec<f64> = (1..rows)
            .map(|y| couplings.get(graph.vertical_edge(x, y)))
            .collect();
        for (p, slot) in table.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (y, &j) in edge_vals.iter().enumerate() {
                let same = (p >> y & 1) == (p >> (y + 1) & 1);
                acc += if same { j } else { -j };
            }
            *slot = acc;
        }
        table
    };

    // Horizontal transition energy between columns x and x+1 as a function
    // of the XOR of the two patterns, accumulated in row order.
    let transition_table = |x: usize| -> Vec<f64> {
        let edge_vals: Vec<f64> = (1..=rows)
            .map(|y| couplings.get(graph.horizontal_edge(x, y)))
            .collect();
        let mut table = vec![0.0f64; states];
        for (d, slot) in table.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (y, &j) in edge_vals.iter().enumerate() {
                acc += if d >> y & 1 == 1 { -j } else { j };
            }
            *slot = acc;
        }
        table
    };

    // Column 1: pin (1,1), i.e. pattern bit 0 must be clear.
    let mut dp = column_vertical(1);
    for (p, slot) in dp.iter_mut().enumerate() {
        if p & 1 == 1 {
            *slot = f64::NEG_INFINITY;
        }
    }
    let mut predecessors: Vec<Vec<u16>> = Vec::with_capacity(cols.saturating_sub(1));

    for x in 2..=cols {
        let trans = transition_table(x - 1);
        let vert = column_vertical(x);
        let mut next = vec![f64::NEG_INFINITY; states];
        let mut pred = vec![0u16; states];
        for (q, (next_slot, pred_slot)) in next.iter_mut().zip(pred.iter_mut()).enumerate() {
            let mut best = f64::NEG_INFINITY;
            let mut best_p = 0usize;
            for (p, &dp_p) in dp.iter().enumerate() {
                let cand = dp_p + trans[p ^ q];
                if cand > best {
                    best = cand;
                    best_p = p;
                }
            }
            *next_slot = best + vert[q];
            *pred_slot = best_p as u16;
        }
        predecessors.push(pred);
        dp = next;
    }

    // Lexicographically smallest final pattern wins exact ties.
    let mut best_q = 0usize;
    for q in 1..states {
        if dp[q] > dp[best_q] {
            best_q = q;
        }
    }

    let mut patterns = vec![0usize; cols];
    patterns[cols - 1] = best_q;
    for x in (0..cols - 1).rev() {
        patterns[x] = predecessors[x][patterns[x + 1]] as usize;
    }

    let mut spins = SpinConfig::all_plus(graph);
    for (xi, &p) in patterns.iter().enumerate() {
        for y in 1..=rows {
            if p >> (y - 1) & 1 == 1 {
                spins.flip(graph.vertex(xi + 1, y));
            }
        }
    }
    let spins = spins.pinned_to_plus(0);
    let exact = energy(graph, couplings, &spins)?;
    Ok(GroundStateResult {
        spins,
        energy: exact,
        degeneracy_gap: None,
    })
}

/// Picks the solver for a grid: enumeration when it fits under the cap,
/// else the transfer matrix.
pub fn solve_auto(graph: &GridGraph, couplings: &CouplingField) -> Result<GroundStateResult> {
    if graph.num_vertices() <= ENUMERATION_CAP {
        solve_enumeration(graph, couplings)
    } else {
        solve_transfer_matrix(graph, couplings)
    }
}
