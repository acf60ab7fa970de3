//! Orchestration of the five entry points: `run`, `check-gradient`,
//! `energy-identity`, `compare-flows`, `kw-solve`. Each takes a resolved
//! [`RunConfig`], produces artifacts under `output.directory`, and returns
//! a JSON-serializable report; process exit codes are 0 (success /
//! threshold met), 2 (configuration), 3 (numerical failure or unmet
//! threshold), 4 (infeasible τ).

use std::path::{Path, PathBuf};

use serde_json::json;

use crate::bundle::{self, BundleSpec, FieldState};
use crate::config::{FlowEngine, InitKind, RunConfig};
use crate::diagnostics;
use crate::energy;
use crate::error::{OracleError, RunnerError};
use crate::flow::{self, FlowSchedule, FlowStatus, MetricState, TraceRow};
use crate::io;
use crate::lattice::LatticeGeometry;
use crate::oracle;

/// Maps a runner error to the documented process exit code.
pub fn exit_code(err: &RunnerError) -> i32 {
    match err {
        RunnerError::Config(_) => 2,
        RunnerError::Infeasible(_) => 4,
        RunnerError::Io { .. } | RunnerError::Divergence(_) | RunnerError::Other(_) => 3,
    }
}

/// Worker-count cap from `KVF_THREADS`. The engine is single-threaded, so
/// the cap is honored trivially; the resolved value is echoed in summaries
/// so callers can confirm it was read.
pub fn thread_cap() -> usize {
    std::env::var("KVF_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v >= 1)
        .unwrap_or(1)
        .min(1)
}

fn other<E: std::fmt::Display>(e: E) -> RunnerError {
    RunnerError::Other(e.to_string())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunnerError + '_ {
    move |source| RunnerError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn geometry(cfg: &RunConfig) -> Result<LatticeGeometry, RunnerError> {
    LatticeGeometry::new(cfg.geometry.m, cfg.geometry.l, cfg.geometry.n).map_err(other)
}

/// Builds the configured initial pair (A₀, φ₀).
pub fn initial_state(cfg: &RunConfig) -> Result<FieldState, RunnerError> {
    let geom = geometry(cfg)?;
    let spec = BundleSpec::new(cfg.bundle.rank, cfg.bundle.degree, &geom).map_err(other)?;
    let mut state = match cfg.init.kind {
        InitKind::Theta => {
            let mut s = bundle::background_state(spec, geom).map_err(other)?;
            *s.phi_mut() = bundle::theta_section(&spec, &geom, cfg.init.truncation)
                .map_err(other)?;
            s.phi_mut().scale(cfg.init.amplitude);
            s
        }
        InitKind::Constant => {
            let mut s = bundle::background_state(spec, geom).map_err(other)?;
            for site in 0..geom.site_count() {
                for z in s.phi_mut().value_mut(site, 0) {
                    z.re = cfg.init.amplitude;
                }
            }
            s
        }
        InitKind::Random => {
            let mut s = bundle::random_state(spec, geom, cfg.init.seed, cfg.init.band_limit)
                .map_err(other)?;
            s.a_mut().scale(cfg.init.a_amplitude);
            s.phi_mut().scale(cfg.init.amplitude);
            s
        }
    };
    state.phi_mut().scale(cfg.init.scale);
    Ok(state)
}

fn schedule(cfg: &RunConfig) -> FlowSchedule {
    FlowSchedule {
        dt_init: cfg.flow.dt_init,
        t_end: cfg.flow.t_end,
        cfl_factor: cfg.flow.cfl_factor,
        adapt: cfg.flow.adapt,
        record_every: cfg.output.record_every,
        eps_vortex: (cfg.flow.eps_vortex > 0.0).then_some(cfg.flow.eps_vortex),
        method: cfg.flow.method,
        driver: cfg.flow.driver,
        holo_threshold: cfg.monitors.holo_threshold,
    }
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, RunnerError> {
    let dir = PathBuf::from(&cfg.output.directory);
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    Ok(dir)
}

fn monitor_report(trace: &[TraceRow], cfg: &RunConfig, metric: bool) -> serde_json::Value {
    let mp = diagnostics::check_max_principle_phi(trace, cfg.tau, cfg.monitors.tol_abs);
    let ehat = diagnostics::check_ehat_monotone(trace, cfg.monitors.ehat_tol_rel);
    let lf = if metric {
        diagnostics::check_metric_lambda_f_bounded(trace, cfg.tau, cfg.monitors.tol_abs)
    } else {
        diagnostics::check_lambda_f_bounded(trace, cfg.tau, cfg.monitors.tol_abs)
    };
    json!({
        "max_principle": { "pass": mp.squared.pass, "margin": mp.squared.margin },
        "ehat_monotone": { "pass": ehat.pass, "margin": ehat.margin },
        "lambda_f_bounded": { "pass": lf.pass, "margin": lf.margin },
    })
}

/// Report common to run-like commands.
pub struct RunReport {
    pub summary: serde_json::Value,
    pub final_state: FieldState,
    pub trace: Vec<TraceRow>,
    pub t_final: f64,
    pub converged: bool,
}

/// `run`: integrates the configured flow and writes trace.csv,
/// final_state.bin and summary.json. On numerical failure the summary with
/// the error report is still written before the error is returned.
pub fn run(cfg: &RunConfig) -> Result<RunReport, RunnerError> {
    let state0 = initial_state(cfg)?;
    let dir = out_dir(cfg)?;
    let sched = schedule(cfg);

    let result = match cfg.flow.engine {
        FlowEngine::Direct => flow::integrate(&state0, cfg.tau, &sched).map(|o| {
            (o.state, o.trace, o.status, o.t_final, o.steps, false)
        }),
        FlowEngine::Metric => MetricState::new(state0.clone()).and_then(|ms| {
            flow::integrate_metric_flow(&ms, cfg.tau, &sched).map(|o| {
                let rec = o.mstate.reconstruct();
                (rec, o.trace, o.status, o.t_final, o.steps, true)
            })
        }),
    };

    let (final_state, trace, status, t_final, steps, metric) = match result {
        Ok(v) => v,
        Err(e) => {
            // Partial artifact: record the failure mode for post-mortem.
            let summary_path = dir.join("summary.json");
            let _ = io::write_summary(
                &summary_path,
                cfg,
                json!({ "status": "failed", "error": e.to_string() }),
            );
            return Err(RunnerError::Divergence(e.to_string()));
        }
    };

    let report = energy::energy_report(&final_state, cfg.tau).map_err(other)?;
    let bradlow = energy::bradlow_check(cfg.bundle.degree, cfg.geometry.l, cfg.tau);
    let plateau = energy::plateau_energy(cfg.bundle.degree, cfg.geometry.l, cfg.tau);
    let last = trace.last().expect("trace always has at least one row");

    let outcome = json!({
        "status": match status {
            FlowStatus::Converged => "converged",
            FlowStatus::ReachedTEnd => "reached_t_end",
        },
        "engine": if metric { "metric" } else { "direct" },
        "t_final": t_final,
        "steps": steps,
        "threads": thread_cap(),
        "final": {
            "ymh": report.ymh_total,
            "vortex_fn": report.moment_sq,
            "moment_inf_norm": last.moment_inf_norm,
            "sup_phi_sq": last.sup_phi_sq,
            "sup_phi": last.sup_phi_sq.sqrt(),
            "dbar_residual": last.dbar_residual,
            "identity_residual_rel": report.relative_residual(),
            "topo_const": report.topo_const,
        },
        "thresholds": {
            "bradlow_threshold": bradlow.threshold,
            "bradlow_feasible": bradlow.feasible,
            "plateau_energy": plateau,
            "plateau_rel_error": (report.ymh_total - plateau).abs() / plateau.abs().max(1e-300),
        },
        "monitors": monitor_report(&trace, cfg, metric),
    });

    let trace_path = dir.join("trace.csv");
    io::write_trace(&trace_path, &trace).map_err(io_err(&trace_path))?;
    let state_path = dir.join("final_state.bin");
    io::write_state(&state_path, &final_state, cfg.tau, t_final).map_err(io_err(&state_path))?;
    let summary_path = dir.join("summary.json");
    io::write_summary(&summary_path, cfg, outcome.clone()).map_err(io_err(&summary_path))?;

    Ok(RunReport {
        summary: outcome,
        final_state,
        trace,
        t_final,
        converged: status == FlowStatus::Converged,
    })
}

pub struct GradientReport {
    pub max_deviation: f64,
    pub tol: f64,
    pub pass: bool,
}

/// `check-gradient`: finite-difference oracle at the configured state.
pub fn check_gradient(cfg: &RunConfig) -> Result<GradientReport, RunnerError> {
    let state = initial_state(cfg)?;
    let dev = oracle::gradient_check(
        &state,
        cfg.tau,
        cfg.oracle.eps,
        cfg.oracle.samples,
        cfg.init.seed,
    )
    .map_err(other)?;
    Ok(GradientReport {
        max_deviation: dev,
        tol: cfg.oracle.grad_tol,
        pass: dev <= cfg.oracle.grad_tol,
    })
}

pub struct IdentityReport {
    pub rel_residual_coarse: f64,
    pub rel_residual_fine: f64,
    pub order: f64,
    pub pass: bool,
}

/// `energy-identity`: relative identity residual at N and 2N; the observed
/// order is log₂ of the ratio. Residuals at rounding floor (both below
/// 1e−12) count as converged.
pub fn energy_identity(cfg: &RunConfig) -> Result<IdentityReport, RunnerError> {
    let rel_at = |n: usize| -> Result<f64, RunnerError> {
        let mut c = cfg.clone();
        c.geometry.n = n;
        let state = initial_state(&c)?;
        let (_, rel) = energy::energy_identity_residual(&state, c.tau).map_err(other)?;
        Ok(rel)
    };
    let coarse = rel_at(cfg.geometry.n)?;
    let fine = rel_at(2 * cfg.geometry.n)?;
    let floor = 1e-12;
    let (order, pass) = if coarse <= floor && fine <= floor {
        (f64::INFINITY, true)
    } else {
        let order = (coarse / fine.max(f64::MIN_POSITIVE)).log2();
        (order, order >= 1.8)
    };
    Ok(IdentityReport {
        rel_residual_coarse: coarse,
        rel_residual_fine: fine,
        order,
        pass,
    })
}

pub struct CompareReport {
    pub max_discrepancy: f64,
    pub rows_compared: usize,
    pub tol: f64,
    pub pass: bool,
}

/// `compare-flows`: direct and metric flows from the same (A₀, φ₀) on a
/// shared fixed time grid (adaptivity off, identical dt and recording);
/// reports the max over recorded t of the relative discrepancy in ymh,
/// sup|φ|²_H and sup iΛF_H.
pub fn compare_flows(cfg: &RunConfig) -> Result<CompareReport, RunnerError> {
    if cfg.bundle.rank != 1 || cfg.geometry.m != 1 {
        return Err(RunnerError::Other(
            "compare-flows requires rank 1 and m = 1".into(),
        ));
    }
    let state0 = initial_state(cfg)?;
    let mut sched = schedule(cfg);
    sched.adapt = false;
    sched.eps_vortex = None; // keep both grids running to t_end

    let direct = flow::integrate(&state0, cfg.tau, &sched).map_err(other)?;
    let ms = MetricState::new(state0).map_err(other)?;
    let metric = flow::integrate_metric_flow(&ms, cfg.tau, &sched).map_err(other)?;

    let nrows = direct.trace.len().min(metric.trace.len());
    let mut worst = 0.0f64;
    for i in 0..nrows {
        let a = &direct.trace[i];
        let b = &metric.trace[i];
        if (a.t - b.t).abs() > 1e-9 * (1.0 + a.t.abs()) {
            return Err(RunnerError::Other(format!(
                "time grids misaligned at row {i}: {} vs {}",
                a.t, b.t
            )));
        }
        for (x, y) in [
            (a.ymh, b.ymh),
            (a.sup_phi_sq, b.sup_phi_sq),
            (a.sup_lambda_f, b.sup_lambda_f),
        ] {
            let rel = (x - y).abs() / x.abs().max(y.abs()).max(1e-12);
            worst = worst.max(rel);
        }
    }
    Ok(CompareReport {
        max_discrepancy: worst,
        rows_compared: nrows,
        tol: cfg.compare.tol,
        pass: worst <= cfg.compare.tol,
    })
}

#[derive(Debug)]
pub struct KwReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub lambda_max: f64,
    pub residual_history: Vec<f64>,
    pub threshold: f64,
}

/// `kw-solve`: stationary oracle; writes u_star.bin and the residual
/// history. Infeasible τ maps to exit code 4 with the threshold reported.
pub fn kw_solve(cfg: &RunConfig) -> Result<KwReport, RunnerError> {
    let base = initial_state(cfg)?;
    let dir = out_dir(cfg)?;
    let sol = match oracle::kw_solve(&base, cfg.tau, cfg.oracle.tol) {
        Ok(s) => s,
        Err(OracleError::Infeasible { tau, threshold }) => {
            return Err(RunnerError::Infeasible(format!(
                "tau = {tau} is at or below the threshold 4*pi*d/L^2 = {threshold}"
            )));
        }
        Err(OracleError::NoConvergence { iterations, .. }) => {
            return Err(RunnerError::Divergence(format!(
                "stationary solver did not reach tolerance in {iterations} iterations"
            )));
        }
        Err(e) => return Err(other(e)),
    };
    let lambda_max = oracle::kw_linearization_lambda_max(&sol.mstate, 200);
    let u_path = dir.join("u_star.bin");
    io::write_u(&u_path, sol.mstate.geometry(), sol.mstate.u()).map_err(io_err(&u_path))?;
    let hist_path = dir.join("kw_residuals.csv");
    let mut text = String::from("iteration,residual_inf\n");
    for (i, r) in sol.residual_history.iter().enumerate() {
        text.push_str(&format!("{i},{r:.16e}\n"));
    }
    std::fs::write(&hist_path, text).map_err(io_err(&hist_path))?;
    let threshold = 4.0 * std::f64::consts::PI * cfg.bundle.degree as f64
        / (cfg.geometry.l * cfg.geometry.l);
    let report = KwReport {
        iterations: sol.iterations,
        final_residual: *sol.residual_history.last().unwrap_or(&f64::NAN),
        lambda_max,
        residual_history: sol.residual_history,
        threshold,
    };
    let summary_path = dir.join("summary.json");
    io::write_summary(
        &summary_path,
        cfg,
        json!({
            "command": "kw-solve",
            "iterations": report.iterations,
            "final_residual": report.final_residual,
            "lambda_max": report.lambda_max,
            "threshold": report.threshold,
        }),
    )
    .map_err(io_err(&summary_path))?;
    Ok(report)
}
