//! Experiment runners. Every runner is a pure function of the resolved
//! configuration producing named artifacts with deterministic bytes; the
//! parallelism degree never changes the output.

use serde_json::json;

use crate::config::{Experiment, ResolvedConfig, SolverChoice, TOOL_VERSION};
use crate::AppError;
use ea_core::barrier;
use ea_core::ground_state::{solve_auto, solve_enumeration, solve_transfer_matrix, CouplingField};
use ea_core::lattice::{build_grid, GridGraph, TerminalPair};
use ea_core::ou_flow;
use ea_core::seeds::{self, stream};
use ea_core::spectral;

pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    /// Set when an assertion-style experiment found a counterexample; the
    /// caller exits with status 4 after writing the artifacts.
    pub counterexample: bool,
}

fn core_err(e: ea_core::Error) -> AppError {
    AppError::Config(e.to_string())
}

fn header(cfg: &ResolvedConfig, extra: &[(&str, String)]) -> String {
    let mut out = format!(
        "# version = {TOOL_VERSION}\n# experiment = {}\n# config = {}\n",
        cfg.experiment.name(),
        cfg.echo()
    );
    for (key, value) in extra {
        out.push_str(&format!("# {key} = {value}\n"));
    }
    out
}

fn canonical_pair_with_note(
    graph: &GridGraph,
    notes: &mut Vec<(&'static str, String)>,
) -> Result<TerminalPair, AppError> {
    let pair = TerminalPair::canonical(graph).map_err(core_err)?;
    let rows = graph.n_rows();
    if !TerminalPair::canonical_row_is_exact(rows) {
        notes.push((
            "canonical_row",
            format!(
                "{} (middle-row fallback for odd n_rows = {rows})",
                TerminalPair::canonical_row(rows)
            ),
        ));
    }
    Ok(pair)
}

fn solve_with(
    choice: SolverChoice,
    graph: &GridGraph,
    couplings: &CouplingField,
) -> Result<ea_core::ground_state::GroundStateResult, AppError> {
    match choice {
        SolverChoice::Auto => solve_auto(graph, couplings),
        SolverChoice::Enumeration => solve_enumeration(graph, couplings),
        SolverChoice::TransferMatrix => solve_transfer_matrix(graph, couplings),
    }
    .map_err(core_err)
}

fn fmt_opt(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

pub fn run_experiment(cfg: &ResolvedConfig) -> Result<RunOutput, AppError> {
    match cfg.experiment {
        Experiment::GroundState => ground_state(cfg),
        Experiment::Census => census(cfg),
        Experiment::LineMass => line_mass(cfg),
        Experiment::BarrierVerify => barrier_verify(cfg),
        Experiment::LowerBound => lower_bound(cfg),
        Experiment::Decorrelate => decorrelate(cfg),
        Experiment::ColumnsCheck => columns_check(cfg),
    }
}

fn ground_state(cfg: &ResolvedConfig) -> Result<RunOutput, AppError> {
    let graph = build_grid(cfg.n_cols, cfg.n_rows).map_err(core_err)?;
    let mut notes = Vec::new();
    let pair = canonical_pair_with_note(&graph, &mut notes)?;
    let mut rng = seeds::stream_rng(cfg.seed, &[stream::BASE_DRAW, 0]);
    let couplings = CouplingField::standard_normal(&graph, &mut rng);
    let result = solve_with(cfg.solver, &graph, &couplings)?;

    let mut csv = header(cfg, &notes);
    csv.push_str("n_cols,n_rows,energy,degeneracy_gap,product_uv,seed\n");
    csv.push_str(&format!(
        "{},{},{},{},{},{}\n",
        cfg.n_cols,
        cfg.n_rows,
        result.energy,
        fmt_opt(result.degeneracy_gap),
        result.spins.product(pair.u, pair.v),
        cfg.seed
    ));

    let json_doc = json!({
        "meta": {"version": TOOL_VERSION, "experiment": cfg.experiment.name(), "config": cfg},
        "couplings": couplings.values(),
        "spins": result.spins.spins(),
        "energy": result.energy,
        "degeneracy_gap": result.degeneracy_gap,
        "product_uv": result.spins.product(pair.u, pair.v),
    });
    Ok(RunOutput {
        artifacts: vec![
            Artifact {
                name: "ground_state.csv".into(),
                bytes: csv.into_bytes(),
            },
            Artifact {
                name: "ground_state.json".into(),
                bytes: to_pretty_bytes(&json_doc),
            },
        ],
        counterexample: false,
    })
}

fn census(cfg: &ResolvedConfig) -> Result<RunOutput, AppError> {
    let graph = build_grid(cfg.n_cols, cfg.n_rows).map_err(core_err)?;
    let mut notes = Vec::new();
    let pair = canonical_pair_with_note(&graph, &mut notes)?;
    let report = spectral::spectral_support_census(&graph, &pair, cfg.degree_cap, cfg.quad_order)
        .map_err(core_err)?;
    notes.push(("captured_mass", report.captured_mass.to_string()));

    let mut csv = header(cfg, &notes);
    csv.push_str("weight,alpha_sq,support_connects,support\n");
    for entry in &report.entries {
        let support: Vec<String> = entry.index.support().iter().map(|e| e.to_string()).collect();
        csv.push_str(&format!(
            "{},{},{},{}\n",
            entry.weight,
            entry.alpha_sq,
            entry.support_connects,
            support.join(";")
        ));
    }

    let entries: Vec<serde_json::Value> = report
        .entries
        .iter()
        .map(|entry| {
            json!({
                "multi_index": entry.index.iter().collect::<Vec<(usize, u32)>>(),
                "alpha_sq": entry.alpha_sq,
                "weight": entry.weight,
                "support_connects": entry.support_connects,
            })
        })
        .collect();
    let json_doc = json!({
        "meta": {"version": TOOL_VERSION, "experiment": cfg.experiment.name(), "config": cfg},
        "captured_mass": report.captured_mass,
        "degree_cap": report.degree_cap,
        "quad_order": report.quad_order,
        "entries": entries,
    });
    Ok(RunOutput {
        artifacts: vec![
            Artifact {
                name: "census.csv".into(),
                bytes: csv.into_bytes(),
            },
            Artifact {
                name: "census.json".into(),
                bytes: to_pretty_bytes(&json_doc),
            },
        ],
        counterexample: false,
    })
}

fn line_mass(cfg: &ResolvedConfig) -> Result<RunOutput, AppError> {
    let mut notes = Vec::new();
    let mut rows = Vec::new();
    for &n in &cfg.ns {
        let graph = build_grid(n, n).map_err(core_err)?;
        let pair = canonical_pair_with_note(&graph, &mut notes)?;
        let est = spectral::line_mass(
            &graph,
            &pair,
            cfg.n_outer,
            cfg.m_inner,
            seeds::derive(cfg.seed, &[n as u64]),
        )
        .map_err(core_err)?;
        rows.push((n, est));
    }
    let mut csv = header(cfg, &notes);
    csv.push_str("n,subset,estimate,stderr,n_outer,m_inner,antithetic,seed\n");
    for (n, est) in &rows {
        csv.push_str(&format!(
            "{},L,{},{},{},{},{},{}\n",
            n, est.mass_hat, est.stderr, est.outer_samples, est.inner_samples, est.antithetic,
            cfg.seed
        ));
    }
    Ok(RunOutput {
        artifacts: vec![Artifact {
            name: "line_mass.csv".into(),
            bytes: csv.into_bytes(),
        }],
        counterexample: false,
    })
}

fn barrier_verify(cfg: &ResolvedConfig) -> Result<RunOutput, AppError> {
    let graph = build_grid(cfg.n_cols, cfg.n_rows).map_err(core_err)?;
    let mut notes = Vec::new();
    let pair = canonical_pair_with_note(&graph, &mut notes)?;
    let report = barrier::run_barrier_verification(
        &graph,
        &pair,
        cfg.instances,
        cfg.low_threshold,
        cfg.high_threshold,
        cfg.seed,
    )
    .map_err(core_err)?;
    let mut csv = header(cfg, &notes);
    csv.push_str("instances,passes,low_threshold,high_threshold,seed\n");
    csv.push_str(&format!(
        "{},{},{},{},{}\n",
        report.instances, report.passes, cfg.low_threshold, cfg.high_threshold, cfg.seed
    ));
    let mut artifacts = vec![Artifact {
        name: "barrier_verify.csv".into(),
        bytes: csv.into_bytes(),
    }];
    let failed = report.passes != report.instances;
    if let Some(dump) = &report.first_failure {
        let json_doc = json!({
            "meta": {"version": TOOL_VERSION, "experiment": cfg.experiment.name(), "config": cfg},
            "counterexample": dump,
        });
        artifacts.push(Artifact {
            name: "barrier_counterexample.json".into(),
            bytes: to_pretty_bytes(&json_doc),
        });
    }
    Ok(RunOutput {
        artifacts,
        counterexample: failed,
    })
}

fn lower_bound(cfg: &ResolvedConfig) -> Result<RunOutput, AppError> {
    let mut notes = Vec::new();
    let mut rows = Vec::new();
    let mut failed = false;
    for &n in &cfg.ns {
        let graph = build_grid(n, n).map_err(core_err)?;
        let pair = canonical_pair_with_note(&graph, &mut notes)?;
        let report = barrier::lower_bound_conditional_check(
            &graph,
            &pair,
            cfg.resamples,
            seeds::derive(cfg.seed, &[n as u64]),
        )
        .map_err(core_err)?;
        failed |= report.product != 1 || !report.all_identical;
        rows.push((n, report));
    }
    let mut csv = header(cfg, &notes);
    csv.push_str("n,product,resamples,all_identical,conditional_abs,seed\n");
    for (n, report) in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            n,
            report.product,
            report.resamples,
            report.all_identical,
            report.conditional_abs,
            cfg.seed
        ));
    }
    Ok(RunOutput {
        artifacts: vec![Artifact {
            name: "lower_bound.csv".into(),
            bytes: csv.into_bytes(),
        }],
        counterexample: failed,
    })
}

fn decorrelate(cfg: &ResolvedConfig) -> Result<RunOutput, AppError> {
    let graph = build_grid(cfg.n_cols, cfg.n_rows).map_err(core_err)?;
    let mut notes = Vec::new();
    let pair = canonical_pair_with_note(&graph, &mut notes)?;
    let rows = ou_flow::decorrelation_experiment(&graph, &pair, &cfg.t_grid, cfg.replicas, cfg.seed)
        .map_err(core_err)?;
    let mut csv = header(cfg, &notes);
    csv.push_str("t,n,replicas,mean_R2,mean_cov,stderr,seed\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.t, cfg.n_cols, row.replicas, row.mean_r2, row.mean_cov, row.stderr, cfg.seed
        ));
    }
    Ok(RunOutput {
        artifacts: vec![Artifact {
            name: "decorrelate.csv".into(),
            bytes: csv.into_bytes(),
        }],
        counterexample: false,
    })
}

fn columns_check(cfg: &ResolvedConfig) -> Result<RunOutput, AppError> {
    let graph = build_grid(cfg.n_cols, cfg.n_rows).map_err(core_err)?;
    let mut notes = Vec::new();
    let pair = canonical_pair_with_note(&graph, &mut notes)?;
    let report = barrier::straight_fraction_bound_check(
        &graph,
        &pair,
        cfg.samples,
        cfg.width,
        cfg.epsilon,
        cfg.seed,
    )
    .map_err(core_err)?;
    let mut csv = header(cfg, &notes);
    csv.push_str(
        "samples,width,epsilon,theta_bound,min_theta,all_theta_pass,all_envelope_contain,seed\n",
    );
    csv.push_str(&format!(
        "{},{},{},{},{},{},{},{}\n",
        report.samples,
        report.width,
        report.epsilon,
        report.theta_bound,
        report.min_theta,
        report.all_theta_pass,
        report.all_envelope_contain,
        cfg.seed
    ));
    let mut artifacts = vec![Artifact {
        name: "columns_check.csv".into(),
        bytes: csv.into_bytes(),
    }];
    let failed = !(report.all_theta_pass && report.all_envelope_contain);
    if let Some(edges) = &report.failure {
        let json_doc = json!({
            "meta": {"version": TOOL_VERSION, "experiment": cfg.experiment.name(), "config": cfg},
            "failing_edge_set": edges,
        });
        artifacts.push(Artifact {
            name: "columns_failure.json".into(),
            bytes: to_pretty_bytes(&json_doc),
        });
    }
    Ok(RunOutput {
        artifacts,
        counterexample: failed,
    })
}

fn to_pretty_bytes(value: &serde_json::Value) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("artifact JSON serializes");
    bytes.push(b'\n');
    bytes
}
