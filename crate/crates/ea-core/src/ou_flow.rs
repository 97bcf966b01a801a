//! Stationary Ornstein-Uhlenbeck evolution of the coupling field and
//! ground-state overlap observables.
//!
//! The OU flow `dX_t = -X_t dt + sqrt(2) dB_t` is never discretized: the
//! exact one-step transition `J^t = e^{-t} J^0 + sqrt(1 - e^{-2t}) J'` with
//! `J'` fresh standard Gaussian is applied edge-wise, so there is no Euler
//! error to account for.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::ground_state::{
    solve_auto, CouplingField, SpinConfig, ENUMERATION_CAP, TRANSFER_MATRIX_ROW_CAP,
};
use crate::lattice::{GridGraph, TerminalPair};
use crate::seeds::{self, stream};
use crate::{Error, Result};

/// A paired coupling draw `(J^0, J^t)` with its seed record.
#[derive(Clone, Debug)]
pub struct FlowSample {
    pub j0: CouplingField,
    pub jt: CouplingField,
    pub t: f64,
    pub seed: u64,
}

/// Exact OU transition applied to every edge independently.
pub fn evolve<R: Rng + ?Sized>(j0: &CouplingField, t: f64, rng: &mut R) -> Result<CouplingField> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "evolve requires t >= 0, got {t}"
        )));
    }
    let decay = (-t).exp();
    let diffusion = (1.0 - decay * decay).sqrt();
    let mut jt = j0.clone();
    for value in jt.values_mut() {
        let fresh: f64 = rng.sample(StandardNormal);
        *value = decay * *value + diffusion * fresh;
    }
    Ok(jt)
}

/// Draws `J^0` and `J^t` for one replica from dedicated seed streams.
pub fn flow_sample(
    graph: &GridGraph,
    t: f64,
    master_seed: u64,
    replica: u64,
    t_index: u64,
) -> Result<FlowSample> {
    let mut draw_rng = seeds::stream_rng(master_seed, &[stream::BASE_DRAW, replica]);
    let j0 = CouplingField::standard_normal(graph, &mut draw_rng);
    let mut evolve_rng = seeds::stream_rng(master_seed, &[stream::EVOLVE, replica, t_index]);
    let jt = evolve(&j0, t, &mut evolve_rng)?;
    Ok(FlowSample {
        j0,
        jt,
        t,
        seed: master_seed,
    })
}

/// Site overlap `R = <sigma^0, sigma^t> / |V|`, in `[-1, 1]`.
pub fn overlap(s0: &SpinConfig, st: &SpinConfig) -> Result<f64> {
    if s0.num_vertices() != st.num_vertices() {
        return Err(Error::ShapeMismatch(
            "overlap requires configurations on the same graph".into(),
        ));
    }
    let n = s0.num_vertices();
    let matches = s0.matches(st);
    Ok((2.0 * matches as f64 - n as f64) / n as f64)
}

/// One row of the decorrelation table.
#[derive(Clone, Debug)]
pub struct DecorrelationRow {
    pub t: f64,
    /// Mean squared site overlap `R(t)^2`.
    pub mean_r2: f64,
    /// Mean of `sigma_u^t sigma_v^t sigma_u^0 sigma_v^0`; an estimate of the
    /// relative-spin covariance since the annealed mean vanishes.
    pub mean_cov: f64,
    /// Standard error of `mean_cov`.
    pub stderr: f64,
    pub replicas: usize,
}

/// For each replica: draw `J^0`, solve its ground state, evolve to every `t`
/// in the grid, solve again, and accumulate `R(t)^2` and the relative-spin
/// product. Replicas run in parallel; merges are order-fixed so results do
/// not depend on the worker count.
pub fn decorrelation_experiment(
    graph: &GridGraph,
    pair: &TerminalPair,
    t_grid: &[f64],
    replicas: usize,
    master_seed: u64,
) -> Result<Vec<DecorrelationRow>> {
    if replicas == 0 {
        return Err(Error::InvalidParameter("replicas must be positive".into()));
    }
    if graph.num_vertices() > ENUMERATION_CAP && graph.n_rows() > TRANSFER_MATRIX_ROW_CAP {
        return Err(Error::TooLarge(
            "no exact solver can handle this grid size".into(),
        ));
    }
    for &t in t_grid {
        if t < 0.0 || t.is_nan() {
            return Err(Error::InvalidParameter(format!("negative time {t}")));
        }
    }

    // (r2, product) per t, per replica; indexed collection keeps merges
    // deterministic under any parallelism degree.
    let per_replica: Vec<Vec<(f64, f64)>> = (0..replicas as u64)
        .into_par_iter()
        .map(|replica| {
            let mut draw_rng = seeds::stream_rng(master_seed, &[stream::BASE_DRAW, replica]);
            let j0 = CouplingField::standard_normal(graph, &mut draw_rng);
            let gs0 = solve_auto(graph, &j0).expect("validated solver capability");
            let p0 = gs0.spins.product(pair.u, pair.v);
            t_grid
                .iter()
                .enumerate()
                .map(|(ti, &t)| {
                    let mut evolve_rng =
                        seeds::stream_rng(master_seed, &[stream::EVOLVE, replica, ti as u64]);
                    let jt = evolve(&j0, t, &mut evolve_rng).expect("validated t grid");
                    let gst = solve_auto(graph, &jt).expect("validated solver capability");
                    let r = overlap(&gs0.spins, &gst.spins).expect("same graph");
                    let product = (p0 * gst.spins.product(pair.u, pair.v)) as f64;
                    (r * r, product)
                })
                .collect()
        })
        .collect();

    let mut rows = Vec::with_capacity(t_grid.len());
    for (ti, &t) in t_grid.iter().enumerate() {
        let mut sum_r2 = 0.0;
        let mut sum_p = 0.0;
        let mut sum_p2 = 0.0;
        for replica in &per_replica {
            let (r2, p) = replica[ti];
            sum_r2 += r2;
            sum_p += p;
            sum_p2 += p * p;
        }
        let n = replicas as f64;
        let mean_cov = sum_p / n;
        let var = ((sum_p2 - sum_p * sum_p / n) / (n - 1.0).max(1.0)).max(0.0);
        rows.push(DecorrelationRow {
            t,
            mean_r2: sum_r2 / n,
            mean_cov,
            stderr: (var / n).sqrt(),
            replicas,
        });
    }
    Ok(rows)
}
