//! Barrier configurations, the Good event, the lower-bound coupling
//! construction, and the straight-column/envelope combinatorics.
//!
//! A barrier around a horizontal edge `e` is a local coupling configuration
//! (small magnitudes on a dashed shell, large magnitudes on a solid frame)
//! that makes the relative spin `sigma_u sigma_v` oblivious to the sign of
//! `J_e`: whenever the frame dominates the shell (`2h > 2 |low| l`), the
//! ground state must satisfy positive products
//! `sigma_{w_i} sigma_{w_{i+1}} J_{(w_i,w_{i+1})}` along the boundary walk,
//! which pins the boundary spins and decouples the interior from the
//! exterior.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ground_state::{
    solve_enumeration, solve_transfer_matrix, CouplingField, GroundStateResult, ENUMERATION_CAP,
    TRANSFER_MATRIX_ROW_CAP,
};
use crate::lattice::{line_l, EdgeId, EdgeSet, GridGraph, TerminalPair, VertexId};
use crate::seeds::{self, stream};
use crate::{Error, Result};

/// Default low (shell) threshold.
pub const DEFAULT_LOW_THRESHOLD: f64 = 1.0;
/// Default high (frame) threshold.
pub const DEFAULT_HIGH_THRESHOLD: f64 = 100.0;
/// Width of the barrier template in edge columns.
pub const BARRIER_WIDTH: usize = 5;

// Template geometry in offsets from the left endpoint of the center edge:
// template (tx, ty) sits at grid (x0 - 2 + tx, y0 + ty) where the center
// edge is ((x0, y0), (x0+1, y0)). Horizontal entries are (x, y) for the
// edge (x,y)-(x+1,y); vertical entries are (x, y) for (x,y)-(x,y+1).

const HIGH_HORIZONTAL: [(i64, i64); 6] = [
    (1, 1),
    (2, 1),
    (3, 1), // top frame
    (1, -1),
    (2, -1),
    (3, -1), // bottom frame
];
const HIGH_VERTICAL: [(i64, i64); 3] = [
    (1, -1),
    (1, 0), // left frame
    (4, -1), // lower right frame
];

const LOW_HORIZONTAL: [(i64, i64); 8] = [
    (1, 0),
    (3, 0), // central axis next to the center edge
    (0, -1),
    (0, 0),
    (0, 1), // left leads
    (4, -1),
    (4, 0),
    (4, 1), // right leads
];
const LOW_VERTICAL: [(i64, i64); 13] = [
    (1, 1),
    (2, 1),
    (3, 1),
    (4, 1), // shell above the top frame
    (1, -2),
    (2, -2),
    (3, -2),
    (4, -2), // shell below the bottom frame
    (4, 0), // upper right corner (the walk does not close the loop here)
    (2, 0),
    (3, 0), // interior verticals above the axis
    (2, -1),
    (3, -1), // interior verticals below the axis
];

/// Boundary walk `w_1 .. w_10`: the top-right corner, then anti-clockwise
/// around the frame. The nine walk edges are exactly the high edges.
const WALK: [(i64, i64); 10] = [
    (4, 1),
    (3, 1),
    (2, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (2, -1),
    (3, -1),
    (4, -1),
    (4, 0),
];

/// A barrier template instantiated around a horizontal center edge.
#[derive(Clone, Debug)]
pub struct BarrierSpec {
    pub center_edge: EdgeId,
    pub low_edges: EdgeSet,
    pub high_edges: EdgeSet,
    pub low_threshold: f64,
    pub high_threshold: f64,
    /// `w_1 .. w_10`, anti-clockwise from the top-right corner.
    pub boundary_walk: Vec<VertexId>,
    /// The nine walk edges `(w_i, w_{i+1})`.
    pub walk_edges: Vec<EdgeId>,
}

impl BarrierSpec {
    /// Worst-case energy gain of repairing a violated boundary walk:
    /// `2h - 2 |low| l`. Positive means obliviousness is forced.
    pub fn gap_bound(&self) -> f64 {
        gap_bound(
            self.low_edges.len(),
            self.low_threshold,
            self.high_threshold,
        )
    }
}

/// `2h - 2 * low_count * l`, the energy-gap margin of a template.
pub fn gap_bound(low_count: usize, low_threshold: f64, high_threshold: f64) -> f64 {
    2.0 * high_threshold - 2.0 * low_count as f64 * low_threshold
}

/// Instantiates the barrier template around a horizontal edge.
///
/// Requirements: the template must fit inside the grid, both endpoints of
/// the center edge must be at Manhattan distance at least 2 from each
/// terminal, and the thresholds must satisfy the strict energy-gap
/// condition `2h > 2 |low| l`.
pub fn build_barrier_spec(
    graph: &GridGraph,
    pair: &TerminalPair,
    center: EdgeId,
    low_threshold: f64,
    high_threshold: f64,
) -> Result<BarrierSpec> {
    if !graph.is_horizontal(center) {
        return Err(Error::Geometry(
            "barrier center edge must be horizontal".into(),
        ));
    }
    if low_threshold <= 0.0 || high_threshold <= 0.0 {
        return Err(Error::InvalidParameter(
            "barrier thresholds must be positive".into(),
        ));
    }
    let low_count = LOW_HORIZONTAL.len() + LOW_VERTICAL.len();
    if gap_bound(low_count, low_threshold, high_threshold) <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "thresholds violate the energy-gap condition 2h > 2*{low_count}*l"
        )));
    }
    let ((x0, y0), _) = graph.edge_coords(center);
    let (x0, y0) = (x0 as i64, y0 as i64);

    // Template footprint: columns x0-2 .. x0+3, rows y0-2 .. y0+2.
    if x0 - 2 < 1
        || x0 + 3 > graph.n_cols() as i64
        || y0 - 2 < 1
        || y0 + 2 > graph.n_rows() as i64
    {
        return Err(Error::Geometry(
            "barrier template does not fit inside the grid".into(),
        ));
    }
    // Both endpoints of the center edge at distance >= 2 from each terminal.
    for terminal in [pair.u, pair.v] {
        let (tx, ty) = graph.coords(terminal);
        let (tx, ty) = (tx as i64, ty as i64);
        for ex in [x0, x0 + 1] {
            if (ex - tx).abs() + (y0 - ty).abs() < 2 {
                return Err(Error::Geometry(
                    "barrier center edge is too close to a terminal".into(),
                ));
            }
        }
    }

    let horizontal = |(dx, dy): (i64, i64)| -> EdgeId {
        graph.horizontal_edge((x0 - 2 + dx) as usize, (y0 + dy) as usize)
    };
    let vertical = |(dx, dy): (i64, i64)| -> EdgeId {
        graph.vertical_edge((x0 - 2 + dx) as usize, (y0 + dy) as usize)
    };

    let mut high_edges = EdgeSet::empty(graph);
    for t in HIGH_HORIZONTAL {
        high_edges.insert(horizontal(t));
    }
    for t in HIGH_VERTICAL {
        high_edges.insert(vertical(t));
    }
    let mut low_edges = EdgeSet::empty(graph);
    for t in LOW_HORIZONTAL {
        low_edges.insert(horizontal(t));
    }
    for t in LOW_VERTICAL {
        low_edges.insert(vertical(t));
    }
    debug_assert!(!high_edges.intersects(&low_edges));
    debug_assert!(!high_edges.contains(center) && !low_edges.contains(center));

    let boundary_walk: Vec<VertexId> = WALK
        .iter()
        .map(|&(dx, dy)| graph.vertex((x0 - 2 + dx) as usize, (y0 + dy) as usize))
        .collect();
    let walk_edges: Vec<EdgeId> = boundary_walk
        .windows(2)
        .map(|w| {
            graph
                .neighbors(w[0])
                .iter()
                .find(|&&(_, v)| v == w[1])
                .map(|&(e, _)| e)
                .expect("walk steps are grid edges")
        })
        .collect();
    debug_assert!(walk_edges.iter().all(|&e| high_edges.contains(e)));

    Ok(BarrierSpec {
        center_edge: center,
        low_edges,
        high_edges,
        low_threshold,
        high_threshold,
        boundary_walk,
        walk_edges,
    })
}

/// True when the magnitudes of `couplings` satisfy the barrier constraints.
/// The event depends on absolute values only, never on signs, and never on
/// the center coupling.
pub fn barrier_constraints_hold(couplings: &CouplingField, spec: &BarrierSpec) -> bool {
    spec.low_edges
        .iter()
        .all(|e| couplings.magnitude(e) <= spec.low_threshold)
        && spec
            .high_edges
            .iter()
            .all(|e| couplings.magnitude(e) >= spec.high_threshold)
}

/// Overwrites the template edges of `base` with couplings satisfying the
/// barrier by construction: low magnitudes uniform in `(0, l)`, high
/// magnitudes uniform in `(h, h+1)`, all rewritten signs uniform. Every
/// other edge, including the center edge, is left untouched.
pub fn sample_barrier_couplings<R: Rng + ?Sized>(
    spec: &BarrierSpec,
    base: &CouplingField,
    rng: &mut R,
) -> CouplingField {
    let mut out = base.clone();
    for e in spec.low_edges.iter() {
        let magnitude = rng.gen_range(0.0..spec.low_threshold);
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        out.set(e, sign * magnitude);
    }
    for e in spec.high_edges.iter() {
        let magnitude = spec.high_threshold + rng.gen::<f64>();
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        out.set(e, sign * magnitude);
    }
    out
}

/// Counterexample bundle dumped when an obliviousness assertion fails:
/// the couplings, both spin configurations, and the template that was
/// being verified.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BarrierCounterexample {
    pub couplings: Vec<f64>,
    pub spins_base: Vec<i8>,
    pub spins_flipped: Vec<i8>,
    pub center_edge: EdgeId,
    pub low_edges: Vec<EdgeId>,
    pub high_edges: Vec<EdgeId>,
    pub low_threshold: f64,
    pub high_threshold: f64,
    pub boundary_walk: Vec<VertexId>,
}

/// Outcome of one obliviousness verification.
#[derive(Clone, Debug)]
pub struct BarrierCheck {
    /// Relative spin with the original sign of the center coupling.
    pub product_base: i32,
    /// Relative spin with the center coupling negated.
    pub product_flipped: i32,
    /// Walk positivity in the base solve.
    pub walk_positive_base: bool,
    /// Walk positivity in the flipped solve.
    pub walk_positive_flipped: bool,
    pub passed: bool,
    pub counterexample: Option<BarrierCounterexample>,
}

fn solve_for(graph: &GridGraph, couplings: &CouplingField) -> Result<GroundStateResult> {
    if graph.n_rows() <= TRANSFER_MATRIX_ROW_CAP {
        solve_transfer_matrix(graph, couplings)
    } else if graph.num_vertices() <= ENUMERATION_CAP {
        solve_enumeration(graph, couplings)
    } else {
        Err(Error::TooLarge(
            "no exact solver can handle this grid size".into(),
        ))
    }
}

fn walk_positive(spec: &BarrierSpec, couplings: &CouplingField, spins: &crate::SpinConfig) -> bool {
    spec.walk_edges.iter().enumerate().all(|(i, &e)| {
        let (a, b) = (spec.boundary_walk[i], spec.boundary_walk[i + 1]);
        (spins.product(a, b) as f64) * couplings.get(e) > 0.0
    })
}

/// Solves the ground state with the center coupling as given and with its
/// sign flipped, and checks that the relative spin is identical and that
/// `sigma_{w_i} sigma_{w_{i+1}} J_{(w_i, w_{i+1})} > 0` along the boundary
/// walk in both solves.
pub fn verify_barrier_obliviousness(
    graph: &GridGraph,
    pair: &TerminalPair,
    couplings: &CouplingField,
    spec: &BarrierSpec,
) -> Result<BarrierCheck> {
    if !barrier_constraints_hold(couplings, spec) {
        return Err(Error::Precondition(
            "couplings do not satisfy the barrier constraints".into(),
        ));
    }
    let base = solve_for(graph, couplings)?;
    let mut flipped_couplings = couplings.clone();
    flipped_couplings.set(spec.center_edge, -couplings.get(spec.center_edge));
    let flipped = solve_for(graph, &flipped_couplings)?;

    let product_base = base.spins.product(pair.u, pair.v);
    let product_flipped = flipped.spins.product(pair.u, pair.v);
    let walk_positive_base = walk_positive(spec, couplings, &base.spins);
    let walk_positive_flipped = walk_positive(spec, &flipped_couplings, &flipped.spins);
    let passed = product_base == product_flipped && walk_positive_base && walk_positive_flipped;
    Ok(BarrierCheck {
        product_base,
        product_flipped,
        walk_positive_base,
        walk_positive_flipped,
        passed,
        counterexample: (!passed).then(|| BarrierCounterexample {
            couplings: couplings.values().to_vec(),
            spins_base: base.spins.spins(),
            spins_flipped: flipped.spins.spins(),
            center_edge: spec.center_edge,
            low_edges: spec.low_edges.to_indices(),
            high_edges: spec.high_edges.to_indices(),
            low_threshold: spec.low_threshold,
            high_threshold: spec.high_threshold,
            boundary_walk: spec.boundary_walk.clone(),
        }),
    })
}

/// Log-space probability of one barrier event under standard Gaussian
/// couplings, and the union bound for missing every disjoint template.
#[derive(Clone, Debug)]
pub struct BarrierProbability {
    /// `ln P(Barrier(e)) = |low| ln P(|xi| <= l) + |high| ln P(|xi| >= h)`.
    pub ln_p: f64,
    pub log10_p: f64,
    pub low_count: usize,
    pub high_count: usize,
    /// Number of disjoint template placements along the line.
    pub template_count: usize,
    /// `template_count * ln(1 - p)`; underflows to -0 for thresholds whose
    /// `p` is below the smallest positive double, which is reported as is.
    pub ln_no_barrier_bound: f64,
}

/// Exact per-edge Gaussian product probability of the barrier event, in log
/// space (the default thresholds are astronomically unlikely, far beyond
/// naive sampling; conditioned sampling is used for experiments instead).
pub fn barrier_probability(graph: &GridGraph, pair: &TerminalPair, spec: &BarrierSpec) -> BarrierProbability {
    let low_count = spec.low_edges.len();
    let high_count = spec.high_edges.len();
    let ln_p = low_count as f64 * ln_prob_abs_le(spec.low_threshold)
        + high_count as f64 * ln_prob_abs_ge(spec.high_threshold);
    let template_count = disjoint_template_count(graph, pair);
    let p = ln_p.exp();
    BarrierProbability {
        ln_p,
        log10_p: ln_p / std::f64::consts::LN_10,
        low_count,
        high_count,
        template_count,
        ln_no_barrier_bound: template_count as f64 * (-p).ln_1p(),
    }
}

/// Number of disjoint barrier placements with the center edge on the line
/// between the canonical terminals.
pub fn disjoint_template_count(graph: &GridGraph, pair: &TerminalPair) -> usize {
    let (ux, uy) = graph.coords(pair.u);
    let (vx, _) = graph.coords(pair.v);
    if uy < 3 || uy + 2 > graph.n_rows() {
        return 0;
    }
    // Valid left endpoints x0: template fit plus distance 2 from terminals.
    let lo = (ux + 2).max(3);
    let hi = (vx.saturating_sub(3)).min(graph.n_cols().saturating_sub(3));
    if hi < lo {
        return 0;
    }
    // Each template spans 6 vertex columns.
    (hi - lo) / (BARRIER_WIDTH + 1) + 1
}

/// `ln P(|N(0,1)| <= l)`.
pub fn ln_prob_abs_le(l: f64) -> f64 {
    libm::erf(l / std::f64::consts::SQRT_2).ln()
}

/// `ln P(|N(0,1)| >= h)`, stable for thresholds far in the tail.
pub fn ln_prob_abs_ge(h: f64) -> f64 {
    let z = h / std::f64::consts::SQRT_2;
    if z <= 25.0 {
        libm::erfc(z).ln()
    } else {
        // ln erfc(z) = -z^2 - ln(z sqrt(pi)) + ln(1 - 1/(2z^2) + 3/(4z^4) - ...)
        let zi = 1.0 / (z * z);
        let tail = zi * (-0.5 + zi * (0.75 + zi * (-1.875 + zi * 6.5625)));
        -z * z - (z * std::f64::consts::PI.sqrt()).ln() + tail.ln_1p()
    }
}

/// The line together with every edge sharing a vertex with it.
pub fn line_closure(graph: &GridGraph, pair: &TerminalPair) -> Result<(EdgeSet, EdgeSet)> {
    let line = line_l(graph, pair)?;
    let mut closure = line.clone();
    for e in line.iter() {
        let (a, b) = graph.endpoints(e);
        for v in [a, b] {
            for &(incident, _) in graph.neighbors(v) {
                closure.insert(incident);
            }
        }
    }
    Ok((line, closure))
}

/// Couplings realizing the lower-bound event: `J_e in (100, 101)` on the
/// line, `|J_e| < 1/n` on the edges adjacent to the line, standard Gaussian
/// elsewhere. On this event the ground state aligns every line vertex, so
/// `sigma_u sigma_v = 1` regardless of the remaining disorder.
pub fn build_lower_bound_field<R: Rng + ?Sized>(
    graph: &GridGraph,
    pair: &TerminalPair,
    rng: &mut R,
) -> Result<CouplingField> {
    let canonical = TerminalPair::canonical(graph)?;
    if *pair != canonical {
        return Err(Error::InvalidParameter(
            "lower-bound construction is defined for the canonical pair".into(),
        ));
    }
    let (line, closure) = line_closure(graph, pair)?;
    let fringe = closure.minus(&line);
    let bound = 1.0 / graph.n_cols() as f64;
    let mut field = CouplingField::standard_normal(graph, rng);
    for e in line.iter() {
        field.set(e, 100.0 + rng.gen::<f64>());
    }
    for e in fringe.iter() {
        field.set(e, rng.gen_range(-bound..bound));
    }
    Ok(field)
}

/// Result of the lower-bound conditional-expectation check.
#[derive(Clone, Debug)]
pub struct LowerBoundReport {
    /// Relative spin of the constructed field's ground state.
    pub product: i32,
    pub resamples: usize,
    /// Whether every exterior resample produced the same relative spin.
    pub all_identical: bool,
    /// `|mean of sigma_u sigma_v|` over the resamples; equals 1 exactly on
    /// the lower-bound event.
    pub conditional_abs: f64,
}

/// Verifies `|E[sigma_u sigma_v | J_Lhat]| = 1` on the lower-bound event by
/// resampling the exterior disorder.
pub fn lower_bound_conditional_check(
    graph: &GridGraph,
    pair: &TerminalPair,
    resamples: usize,
    master_seed: u64,
) -> Result<LowerBoundReport> {
    if resamples == 0 {
        return Err(Error::InvalidParameter("resamples must be positive".into()));
    }
    let mut rng = seeds::stream_rng(master_seed, &[stream::BASE_DRAW, 0]);
    let mut field = build_lower_bound_field(graph, pair, &mut rng)?;
    let (_, closure) = line_closure(graph, pair)?;
    let exterior: Vec<EdgeId> = closure.complement().to_indices();

    let base = solve_for(graph, &field)?;
    let product = base.spins.product(pair.u, pair.v);
    let mut sum = 0i64;
    let mut all_identical = true;
    for i in 0..resamples {
        let mut resample_rng = seeds::stream_rng(master_seed, &[stream::INNER_DRAW, i as u64]);
        for &e in &exterior {
            field.set(e, resample_rng.sample(rand_distr::StandardNormal));
        }
        let gs = solve_for(graph, &field)?;
        let p = gs.spins.product(pair.u, pair.v);
        sum += p as i64;
        all_identical &= p == product;
    }
    Ok(LowerBoundReport {
        product,
        resamples,
        all_identical,
        conditional_abs: (sum as f64 / resamples as f64).abs(),
    })
}

/// Classification of the grid's columns with respect to an edge set.
///
/// The horizontal edge positions `0 .. n_cols-1` (0-based left endpoints)
/// are partitioned into blocks of `width`; a trailing narrower block
/// absorbs the remainder when `width` does not divide the position count.
/// A horizontal edge belongs to the block of its left endpoint; a vertical
/// edge on a block boundary belongs to the block on its left (the leftmost
/// grid line belongs to the first block). A column is straight when its
/// edges are exactly one horizontal run at a single row covering every
/// position of the block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnClass {
    pub width: usize,
    pub n_columns: usize,
    /// `(column index, straight-run row)` pairs, 1-based, in column order.
    pub straight: Vec<(usize, usize)>,
}

impl ColumnClass {
    pub fn j_set(&self) -> Vec<usize> {
        self.straight.iter().map(|&(j, _)| j).collect()
    }

    pub fn y_set(&self) -> Vec<usize> {
        self.straight.iter().map(|&(_, y)| y).collect()
    }

    pub fn is_straight(&self, j: usize) -> bool {
        self.straight.iter().any(|&(jj, _)| jj == j)
    }

    /// Fraction of straight columns.
    pub fn straight_fraction(&self) -> f64 {
        self.straight.len() as f64 / self.n_columns as f64
    }
}

/// 0-based position span `[start, end)` of column `j` (1-based).
fn column_span(graph: &GridGraph, width: usize, j: usize) -> (usize, usize) {
    let positions = graph.n_cols() - 1;
    let start = (j - 1) * width;
    let end = (j * width).min(positions);
    (start, end)
}

fn column_count(graph: &GridGraph, width: usize) -> usize {
    (graph.n_cols() - 1).div_ceil(width)
}

/// Column index (1-based) owning an edge, per the convention above.
fn column_of_edge(graph: &GridGraph, width: usize, e: EdgeId) -> usize {
    let ((x, _), _) = graph.edge_coords(e);
    let x0 = x - 1; // 0-based
    if graph.is_horizontal(e) {
        x0 / width + 1
    } else if x0 == 0 {
        1
    } else {
        // Boundary grid lines belong to the block on their left.
        x0.div_ceil(width).min(column_count(graph, width))
    }
}

/// Classifies every column of the grid as straight or not with respect to
/// `s`, returning the straight set and the rows of the straight runs.
pub fn straight_columns(graph: &GridGraph, s: &EdgeSet, width: usize) -> Result<ColumnClass> {
    if width == 0 || width >= graph.n_cols() {
        return Err(Error::InvalidParameter(format!(
            "column width {width} invalid for {} columns of vertices",
            graph.n_cols()
        )));
    }
    let n_columns = column_count(graph, width);
    let mut members: Vec<Vec<EdgeId>> = vec![Vec::new(); n_columns + 1];
    for e in s.iter() {
        members[column_of_edge(graph, width, e)].push(e);
    }
    let mut straight = Vec::new();
    'columns: for (j, column_members) in members.iter().enumerate().skip(1) {
        let (start, end) = column_span(graph, width, j);
        let need = end - start;
        if column_members.len() != need {
            continue;
        }
        let mut row = None;
        let mut seen = vec![false; need];
        for &e in column_members {
            if !graph.is_horizontal(e) {
                continue 'columns;
            }
            let ((x, y), _) = graph.edge_coords(e);
            match row {
                None => row = Some(y),
                Some(r) if r != y => continue 'columns,
                _ => {}
            }
            seen[(x - 1) - start] = true;
        }
        if seen.iter().all(|&b| b) {
            straight.push((j, row.expect("straight column is nonempty")));
        }
    }
    Ok(ColumnClass {
        width,
        n_columns,
        straight,
    })
}

/// The envelope of a straight-column class: the straight runs, every edge
/// of every non-straight column, and the full vertical grid lines on the
/// straight-column boundaries. Every member of the class is contained in
/// its envelope.
pub fn envelope(graph: &GridGraph, class: &ColumnClass) -> EdgeSet {
    let mut out = EdgeSet::empty(graph);
    let straight: std::collections::BTreeMap<usize, usize> =
        class.straight.iter().copied().collect();
    for j in 1..=class.n_columns {
        let (start, end) = column_span(graph, class.width, j);
        match straight.get(&j) {
            Some(&row) => {
                for x0 in start..end {
                    out.insert(graph.horizontal_edge(x0 + 1, row));
                }
                // Vertical grid lines on both block boundaries.
                for x0 in [start, end] {
                    if x0 < graph.n_cols() {
                        for y in 1..graph.n_rows() {
                            out.insert(graph.vertical_edge(x0 + 1, y));
                        }
                    }
                }
            }
            None => {
                // All edges assigned to this column.
                for e in graph.edge_ids() {
                    if column_of_edge(graph, class.width, e) == j {
                        out.insert(e);
                    }
                }
            }
        }
    }
    out
}

/// Samples an edge set connecting the canonical terminals: the straight
/// line plus up to `floor(epsilon * n / 2)` unit vertical detours, so the
/// number of non-rightward steps is at most `epsilon * n` and the total
/// size at most `(1 + epsilon) n`.
pub fn sample_detour_path<R: Rng + ?Sized>(
    graph: &GridGraph,
    pair: &TerminalPair,
    epsilon: f64,
    rng: &mut R,
) -> Result<EdgeSet> {
    let (ux, uy) = graph.coords(pair.u);
    let (vx, vy) = graph.coords(pair.v);
    if uy != vy || ux != 1 || vx != graph.n_cols() {
        return Err(Error::InvalidParameter(
            "path sampler expects the canonical horizontal pair".into(),
        ));
    }
    if epsilon < 0.0 {
        return Err(Error::InvalidParameter("epsilon must be nonnegative".into()));
    }
    let n = graph.n_cols();
    let max_detours = if graph.n_rows() < 2 {
        0 // no room for vertical excursions
    } else {
        ((epsilon * n as f64) / 2.0).floor() as usize
    };
    let positions = n - 1;
    let d = if max_detours == 0 {
        0
    } else {
        rng.gen_range(0..=max_detours.min(positions))
    };
    // Distinct detour positions.
    let mut chosen = std::collections::BTreeSet::new();
    while chosen.len() < d {
        chosen.insert(rng.gen_range(0..positions));
    }
    let mut s = EdgeSet::empty(graph);
    for x0 in 0..positions {
        let x = x0 + 1;
        if chosen.contains(&x0) {
            let can_up = uy < graph.n_rows();
            let can_down = uy > 1;
            let up = if can_up && can_down {
                rng.gen::<bool>()
            } else {
                can_up
            };
            let row = if up { uy + 1 } else { uy - 1 };
            // Vertical out, horizontal across at the detour row, vertical back.
            let v_y = uy.min(row);
            s.insert(graph.vertical_edge(x, v_y));
            s.insert(graph.horizontal_edge(x, row));
            s.insert(graph.vertical_edge(x + 1, v_y));
        } else {
            s.insert(graph.horizontal_edge(x, uy));
        }
    }
    Ok(s)
}

/// Report of the straight-fraction bound check over sampled edge sets.
#[derive(Clone, Debug)]
pub struct ColumnsCheckReport {
    pub samples: usize,
    pub width: usize,
    pub epsilon: f64,
    /// The asserted lower bound `1 - epsilon * width`.
    pub theta_bound: f64,
    pub min_theta: f64,
    pub all_theta_pass: bool,
    pub all_envelope_contain: bool,
    pub all_connecting: bool,
    /// Edge indices of the first failing sample, if any.
    pub failure: Option<Vec<EdgeId>>,
}

/// Samples connecting edge sets of size at most `(1 + epsilon) n`, checks
/// the straight fraction against `theta >= 1 - epsilon * width`, and checks
/// the envelope containment `S subset S_G` for each sample.
pub fn straight_fraction_bound_check(
    graph: &GridGraph,
    pair: &TerminalPair,
    samples: usize,
    width: usize,
    epsilon: f64,
    master_seed: u64,
) -> Result<ColumnsCheckReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    let bound = 1.0 - epsilon * width as f64;
    let mut min_theta = f64::INFINITY;
    let mut all_theta = true;
    let mut all_envelope = true;
    let mut all_connecting = true;
    let mut failure = None;
    for i in 0..samples {
        let mut rng = seeds::stream_rng(master_seed, &[stream::PATH, i as u64]);
        let s = sample_detour_path(graph, pair, epsilon, &mut rng)?;
        let size_cap = ((1.0 + epsilon) * graph.n_cols() as f64).floor() as usize;
        debug_assert!(s.len() <= size_cap);
        all_connecting &= crate::lattice::is_connecting(graph, &s, pair);
        let class = straight_columns(graph, &s, width)?;
        let theta = class.straight_fraction();
        min_theta = min_theta.min(theta);
        let contained = s.is_subset_of(&envelope(graph, &class));
        if (theta < bound || !contained) && failure.is_none() {
            failure = Some(s.to_indices());
        }
        all_theta &= theta >= bound;
        all_envelope &= contained;
    }
    Ok(ColumnsCheckReport {
        samples,
        width,
        epsilon,
        theta_bound: bound,
        min_theta,
        all_theta_pass: all_theta,
        all_envelope_contain: all_envelope,
        all_connecting,
        failure,
    })
}

/// Runs `instances` barrier-conditioned verifications with the template
/// placed at a random valid position on the line.
#[derive(Clone, Debug)]
pub struct BarrierVerifyReport {
    pub instances: usize,
    pub passes: usize,
    pub first_failure: Option<BarrierCounterexample>,
}

pub fn run_barrier_verification(
    graph: &GridGraph,
    pair: &TerminalPair,
    instances: usize,
    low_threshold: f64,
    high_threshold: f64,
    master_seed: u64,
) -> Result<BarrierVerifyReport> {
    if instances == 0 {
        return Err(Error::InvalidParameter("instances must be positive".into()));
    }
    let (_, uy) = graph.coords(pair.u);
    // Valid center-edge placements on the line row.
    let mut placements = Vec::new();
    for x0 in 1..graph.n_cols() {
        let e = graph.horizontal_edge(x0, uy);
        if build_barrier_spec(graph, pair, e, low_threshold, high_threshold).is_ok() {
            placements.push(e);
        }
    }
    if placements.is_empty() {
        return Err(Error::Geometry(
            "no valid barrier placement on this grid".into(),
        ));
    }
    let mut passes = 0;
    let mut first_failure = None;
    for i in 0..instances {
        let mut rng = seeds::stream_rng(master_seed, &[stream::INSTANCE, i as u64]);
        let center = placements[rng.gen_range(0..placements.len())];
        let spec = build_barrier_spec(graph, pair, center, low_threshold, high_threshold)?;
        let base = CouplingField::standard_normal(graph, &mut rng);
        let conditioned = sample_barrier_couplings(&spec, &base, &mut rng);
        let check = verify_barrier_obliviousness(graph, pair, &conditioned, &spec)?;
        if check.passed {
            passes += 1;
        } else if first_failure.is_none() {
            first_failure = check.counterexample;
        }
    }
    Ok(BarrierVerifyReport {
        instances,
        passes,
        first_failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground_state::flip_cutset;
    use crate::lattice::{build_grid, vertical_cutset};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seven_grid() -> (GridGraph, TerminalPair) {
        let g = build_grid(7, 7).unwrap();
        let pair = TerminalPair::canonical(&g).unwrap();
        (g, pair)
    }

    #[test]
    fn template_counts_and_gap() {
        let (g, pair) = seven_grid();
        let e = g.horizontal_edge(3, 4);
        let spec = build_barrier_spec(&g, &pair, e, 1.0, 100.0).unwrap();
        assert_eq!(spec.high_edges.len(), 9);
        assert_eq!(spec.low_edges.len(), 21);
        assert!(!spec.high_edges.intersects(&spec.low_edges));
        assert!(!spec.high_edges.contains(e) && !spec.low_edges.contains(e));
        assert_eq!(spec.boundary_walk.len(), 10);
        assert_eq!(spec.walk_edges.len(), 9);
        // 2h - 2|low|l = 200 - 42 with the figure-derived shell of 21 edges.
        assert_eq!(spec.gap_bound(), 158.0);
        assert!(spec.gap_bound() > 0.0);
        // All template edges stay inside the grid and off the terminals'
        // immediate neighborhoods by construction of the placement rule.
        for edge in spec.low_edges.iter().chain(spec.high_edges.iter()) {
            let ((ax, ay), (bx, by)) = g.edge_coords(edge);
            assert!(ax >= 1 && bx <= 7 && ay >= 1 && by <= 7);
        }
    }

    #[test]
    fn placement_rules() {
        let (g, pair) = seven_grid();
        // Vertical center edge rejected.
        assert!(build_barrier_spec(&g, &pair, g.vertical_edge(3, 3), 1.0, 100.0).is_err());
        // Too close to u: left endpoint at distance 1.
        assert!(build_barrier_spec(&g, &pair, g.horizontal_edge(2, 4), 1.0, 100.0).is_err());
        // Too close to the boundary rows.
        assert!(build_barrier_spec(&g, &pair, g.horizontal_edge(3, 2), 1.0, 100.0).is_err());
        // Gap condition enforced: 2h <= 2*21*l rejected.
        assert!(build_barrier_spec(&g, &pair, g.horizontal_edge(3, 4), 1.0, 20.0).is_err());
        // Valid placements on the 7x7 line: x0 in {3, 4}.
        let ok: Vec<usize> = (1..7)
            .filter(|&x0| build_barrier_spec(&g, &pair, g.horizontal_edge(x0, 4), 1.0, 100.0).is_ok())
            .collect();
        assert_eq!(ok, vec![3, 4]);
    }

    #[test]
    fn scaled_gap_condition_arithmetic() {
        // The iff from the invariant: 2h > 2 |low| l.
        assert!(gap_bound(21, 0.2, 2.5) <= 0.0);
        assert_eq!(gap_bound(21, 0.2, 2.5), 5.0 - 8.4);
        assert!(gap_bound(21, 0.1, 3.0) > 0.0);
    }

    #[test]
    fn sampled_couplings_satisfy_constraints() {
        let (g, pair) = seven_grid();
        let e = g.horizontal_edge(4, 4);
        let spec = build_barrier_spec(&g, &pair, e, 1.0, 100.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let base = CouplingField::standard_normal(&g, &mut rng);
        for _ in 0..1000 {
            let j = sample_barrier_couplings(&spec, &base, &mut rng);
            assert!(barrier_constraints_hold(&j, &spec));
            for f in spec.low_edges.iter() {
                assert!(j.magnitude(f) <= 1.0);
            }
            for f in spec.high_edges.iter() {
                assert!(j.magnitude(f) >= 100.0);
            }
            // The event is a function of magnitudes: resampling every sign
            // preserves it.
            let mut sign_flipped = j.clone();
            for f in spec.low_edges.iter().chain(spec.high_edges.iter()) {
                sign_flipped.set(f, -sign_flipped.get(f));
            }
            assert!(barrier_constraints_hold(&sign_flipped, &spec));
            // The center coupling is untouched and unconstrained.
            assert_eq!(j.get(e), base.get(e));
            let mut wild = j.clone();
            wild.set(e, 1e6);
            assert!(barrier_constraints_hold(&wild, &spec));
        }
    }

    #[test]
    fn obliviousness_on_conditioned_instances() {
        let (g, pair) = seven_grid();
        let report = run_barrier_verification(&g, &pair, 25, 1.0, 100.0, 7).unwrap();
        assert_eq!(report.passes, report.instances);
        assert!(report.first_failure.is_none());
    }

    #[test]
    fn obliviousness_under_extreme_center_coupling() {
        let (g, pair) = seven_grid();
        let e = g.horizontal_edge(3, 4);
        let spec = build_barrier_spec(&g, &pair, e, 1.0, 100.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for magnitude in [1000.0, -1000.0] {
            let base = CouplingField::standard_normal(&g, &mut rng);
            let mut j = sample_barrier_couplings(&spec, &base, &mut rng);
            j.set(e, magnitude);
            let check = verify_barrier_obliviousness(&g, &pair, &j, &spec).unwrap();
            assert!(check.passed);
        }
    }

    #[test]
    fn walk_products_survive_exterior_resampling() {
        // Domain Markov consequence: the walk relative products are a
        // function of the high-edge signs alone.
        let (g, pair) = seven_grid();
        let e = g.horizontal_edge(4, 4);
        let spec = build_barrier_spec(&g, &pair, e, 1.0, 100.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base = CouplingField::standard_normal(&g, &mut rng);
        let conditioned = sample_barrier_couplings(&spec, &base, &mut rng);
        let template: Vec<EdgeId> = spec
            .low_edges
            .iter()
            .chain(spec.high_edges.iter())
            .collect();
        for _ in 0..20 {
            let mut resampled = CouplingField::standard_normal(&g, &mut rng);
            for &f in &template {
                resampled.set(f, conditioned.get(f));
            }
            let gs = solve_for(&g, &resampled).unwrap();
            // Positivity pins each walk product to the sign of its coupling.
            assert!(walk_positive(&spec, &resampled, &gs.spins));
        }
    }

    #[test]
    fn flip_composition_negates_relative_spin_exactly() {
        // Flipping a vertical cutset through the center column, except the
        // center edge itself, negates sigma_u sigma_v whenever the barrier
        // holds: the mechanized content of the conditional symmetry lemma.
        let (g, pair) = seven_grid();
        let e = g.horizontal_edge(3, 4);
        let spec = build_barrier_spec(&g, &pair, e, 1.0, 100.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut paired_sum = 0i64;
        for _ in 0..50 {
            let base = CouplingField::standard_normal(&g, &mut rng);
            let j = sample_barrier_couplings(&spec, &base, &mut rng);
            let mut cutset = vertical_cutset(&g, 3).unwrap();
            assert!(cutset.contains(e));
            cutset.remove(e);
            let j_hat = flip_cutset(&j, &cutset);
            let p = solve_for(&g, &j).unwrap().spins.product(pair.u, pair.v);
            let p_hat = solve_for(&g, &j_hat).unwrap().spins.product(pair.u, pair.v);
            assert_eq!(p_hat, -p);
            paired_sum += (p + p_hat) as i64;
        }
        assert_eq!(paired_sum, 0);
    }

    #[test]
    fn probability_log_values() {
        let (g, pair) = seven_grid();
        let e = g.horizontal_edge(3, 4);
        let spec = build_barrier_spec(&g, &pair, e, 1.0, 100.0).unwrap();
        // High-precision references: ln P(|xi| <= 1), ln P(|xi| >= 100).
        assert!((ln_prob_abs_le(1.0) - (-0.38171514630212605)).abs() < 1e-12);
        assert!((ln_prob_abs_ge(100.0) - (-5004.831061513645)).abs() < 1e-6);
        assert!((ln_prob_abs_ge(2.5) - (-4.388501096718745)).abs() < 1e-12);
        assert!((ln_prob_abs_le(0.2) - (-1.8418781765876036)).abs() < 1e-12);
        let p = barrier_probability(&g, &pair, &spec);
        let want = 21.0 * ln_prob_abs_le(1.0) + 9.0 * ln_prob_abs_ge(100.0);
        assert_eq!(p.ln_p, want);
        assert!(p.log10_p < -19_000.0);
        assert_eq!(p.template_count, 1);
        // Missing every disjoint template has log-probability <= 0; for the
        // default thresholds the bound underflows to -0.
        assert!(p.ln_no_barrier_bound <= 0.0);

        // Loose thresholds give probability near 1.
        let easy = 21.0 * ln_prob_abs_le(1e9) + 9.0 * ln_prob_abs_ge(1e-12);
        assert!(easy.abs() < 1e-6);
    }

    #[test]
    fn disjoint_template_counts_grow_linearly() {
        for (n, want) in [(7usize, 1usize), (12, 2), (18, 3), (24, 4)] {
            let g = build_grid(n, n).unwrap();
            let pair = TerminalPair::canonical(&g).unwrap();
            assert_eq!(disjoint_template_count(&g, &pair), want, "n={n}");
        }
    }

    #[test]
    fn lower_bound_field_pins_the_line() {
        for n in [4usize, 6] {
            let g = build_grid(n, n).unwrap();
            let pair = TerminalPair::canonical(&g).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            let field = build_lower_bound_field(&g, &pair, &mut rng).unwrap();
            let (line, closure) = line_closure(&g, &pair).unwrap();
            for e in line.iter() {
                assert!(field.get(e) > 100.0 && field.get(e) < 101.0);
            }
            for e in closure.minus(&line).iter() {
                assert!(field.magnitude(e) < 1.0 / n as f64);
            }
            let gs = solve_for(&g, &field).unwrap();
            assert_eq!(gs.spins.product(pair.u, pair.v), 1);
            // Every line vertex aligned with u.
            let (_, row) = g.coords(pair.u);
            for x in 1..=n {
                assert_eq!(gs.spins.spin(g.vertex(x, row)), gs.spins.spin(pair.u));
            }
            // Misaligning one line vertex costs at least 100 - 2n(1/n).
            let mut mis = gs.spins.clone();
            mis.flip(g.vertex(2, row));
            let defect = gs.energy - crate::ground_state::energy(&g, &field, &mis).unwrap();
            assert!(defect >= 100.0 - 2.0);
        }
    }

    #[test]
    fn lower_bound_conditional_expectation_is_one() {
        let g = build_grid(4, 4).unwrap();
        let pair = TerminalPair::canonical(&g).unwrap();
        let report = lower_bound_conditional_check(&g, &pair, 50, 11).unwrap();
        assert_eq!(report.product, 1);
        assert!(report.all_identical);
        assert_eq!(report.conditional_abs, 1.0);
    }

    #[test]
    fn straight_line_makes_every_column_straight() {
        let g = build_grid(16, 16).unwrap();
        let pair = TerminalPair::canonical(&g).unwrap();
        let line = line_l(&g, &pair).unwrap();
        let class = straight_columns(&g, &line, 5).unwrap();
        assert_eq!(class.n_columns, 3);
        assert_eq!(class.straight.len(), 3);
        assert!(class.y_set().iter().all(|&y| y == 8));
        assert_eq!(class.straight_fraction(), 1.0);
        // And the envelope of the all-straight class contains the line.
        let env = envelope(&g, &class);
        assert!(line.is_subset_of(&env));
    }

    #[test]
    fn figure_path_classification() {
        // The illustrative 19x19 configuration: a wiggly u-v path plus a few
        // stray edges; with width 3 exactly columns 3 and 5 are straight,
        // even though column 3's left boundary line carries path edges.
        let g = build_grid(19, 19).unwrap();
        let pair = TerminalPair::new(g.vertex(1, 10), g.vertex(19, 10)).unwrap();
        let mut s = EdgeSet::empty(&g);
        let mut h = |x0: usize, y0: usize| s.insert(g.horizontal_edge(x0 + 1, y0 + 1));
        let mut path_h = vec![(0, 9), (1, 9)];
        path_h.extend([(2, 10), (3, 10), (4, 10), (5, 10)]);
        path_h.push((5, 7));
        path_h.extend([(5, 6), (6, 6), (7, 6), (8, 6), (9, 6)]);
        path_h.extend([(10, 10), (11, 10), (12, 10), (13, 10), (14, 10), (15, 10)]);
        path_h.extend([(16, 9), (17, 9)]);
        path_h.extend([(1, 11), (2, 11)]); // stray edges near u
        path_h.push((16, 7)); // stray edge near v
        for (x0, y0) in path_h {
            h(x0, y0);
        }
        let mut v = |x0: usize, y0: usize| s.insert(g.vertical_edge(x0 + 1, y0 + 1));
        for (x0, y0) in [
            (2, 9),
            (6, 9),
            (6, 8),
            (6, 7),
            (5, 6),
            (10, 6),
            (10, 7),
            (10, 8),
            (10, 9),
            (16, 9),
            (1, 9),
            (1, 10),
            (17, 6),
        ] {
            v(x0, y0);
        }
        assert!(crate::lattice::is_connecting(&g, &s, &pair));
        let class = straight_columns(&g, &s, 3).unwrap();
        assert_eq!(class.n_columns, 6);
        assert_eq!(class.j_set(), vec![3, 5]);
        assert_eq!(class.y_set(), vec![7, 11]);
        // Envelope reconstruction contains the member and the straight runs.
        let env = envelope(&g, &class);
        assert!(s.is_subset_of(&env));
        assert!(env.contains(g.horizontal_edge(7, 7)));
        assert!(env.contains(g.horizontal_edge(13, 11)));
        // Straight-column boundary lines are included.
        assert!(env.contains(g.vertical_edge(7, 3)));
        assert!(env.contains(g.vertical_edge(10, 14)));
    }

    #[test]
    fn detour_paths_respect_bound_and_envelope() {
        let g = build_grid(40, 9).unwrap();
        let pair = TerminalPair::canonical(&g).unwrap();
        let report = straight_fraction_bound_check(&g, &pair, 200, 5, 0.1, 17).unwrap();
        assert!(report.all_connecting);
        assert!(report.all_theta_pass, "min theta {}", report.min_theta);
        assert!(report.all_envelope_contain);
        assert_eq!(report.theta_bound, 0.5);
    }

    #[test]
    fn zero_detour_budget_yields_the_line() {
        let g = build_grid(40, 9).unwrap();
        let pair = TerminalPair::canonical(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let s = sample_detour_path(&g, &pair, 0.02, &mut rng).unwrap();
        assert_eq!(s, line_l(&g, &pair).unwrap());
        let class = straight_columns(&g, &s, 5).unwrap();
        assert_eq!(class.straight_fraction(), 1.0);
    }
}
