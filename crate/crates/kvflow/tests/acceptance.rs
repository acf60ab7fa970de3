//! Acceptance gate: twelve quantitative criteria, one test (and one
//! pass/fail line) each. The default experiment is n = 1, m = 1, L² = 4π,
//! d = 1, N = 32, theta initial data, τ = 2 (feasible) or τ = 0.5
//! (infeasible); expensive flow runs are shared across criteria.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kvflow::bundle::{
    background_state, covariant_codiff, covariant_codiff2_ad, covariant_d, covariant_d_ad,
    curvature, random_state, theta_section, BundleSpec, FieldState,
};
use kvflow::energy;
use kvflow::flow::{self, FlowOutcome, FlowSchedule, FlowStatus, GradientDriver, StepMethod};
use kvflow::lattice::{
    codifferential, exterior_d, inner, lambda_contract, norm, one_form_parts, FormField,
    LatticeGeometry, ValueKind,
};
use kvflow::oracle;

const AREA: f64 = 4.0 * PI;

fn side() -> f64 {
    AREA.sqrt()
}

fn theta_state(nsite: usize, phi_scale: f64) -> FieldState {
    let geom = LatticeGeometry::new(1, side(), nsite).unwrap();
    let spec = BundleSpec::new(1, 1, &geom).unwrap();
    let mut state = background_state(spec, geom).unwrap();
    *state.phi_mut() = theta_section(&spec, &geom, 8).unwrap();
    state.phi_mut().scale(phi_scale);
    state
}

fn standard_schedule(t_end: f64) -> FlowSchedule {
    FlowSchedule {
        dt_init: f64::INFINITY,
        t_end,
        cfl_factor: 0.2,
        adapt: true,
        record_every: 1,
        eps_vortex: Some(1e-6),
        method: StepMethod::Rk4,
        driver: GradientDriver::Vortex,
        holo_threshold: 0.1,
    }
}

/// Standard feasible run (τ = 2 > τ_c = 1), shared by criteria 4, 6, 7,
/// 10 and 11.
fn standard_run() -> &'static FlowOutcome {
    static RUN: OnceLock<FlowOutcome> = OnceLock::new();
    RUN.get_or_init(|| {
        flow::integrate(&theta_state(32, 1.0), 2.0, &standard_schedule(50.0))
            .expect("standard feasible run must integrate")
    })
}

fn report(criterion: usize, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion:2} ({name}): {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}

/// Least-squares-free order estimate from residuals at N, 2N, 4N: the
/// log₂ of the endpoint ratio averaged over the two refinements. Residuals
/// at the rounding floor count as converged.
fn fitted_order(res: &[f64]) -> f64 {
    let floor = 1e-12;
    if res.iter().all(|&r| r <= floor) {
        return f64::INFINITY;
    }
    ((res[0] / res[res.len() - 1].max(f64::MIN_POSITIVE)).log2()) / (res.len() - 1) as f64
}

fn random_form(geom: LatticeGeometry, degree: usize, kind: ValueKind, seed: u64) -> FormField {
    let mut f = FormField::zeros(geom, degree, kind);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for z in f.data_mut() {
        *z = C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    f
}

#[test]
fn criterion_01_operator_calculus() {
    let mut worst_dd = 0.0f64;
    let mut worst_adj = 0.0f64;
    for (m, nsite) in [(1usize, 16usize), (2, 6)] {
        let geom = LatticeGeometry::new(m, 2.0, nsite).unwrap();
        for pair in 0..20u64 {
            let f = random_form(geom, 0, ValueKind::Scalar, 100 * m as u64 + pair);
            let g = random_form(geom, 1, ValueKind::Scalar, 200 * m as u64 + pair);
            let ddf = exterior_d(&exterior_d(&f, 0).unwrap(), 0).unwrap();
            worst_dd = worst_dd.max(ddf.sup_norm() / f.sup_norm());
            let lhs = inner(&exterior_d(&f, 0).unwrap(), &g);
            let rhs = inner(&f, &codifferential(&g, 0).unwrap());
            worst_adj = worst_adj.max((lhs - rhs).abs() / (norm(&f) * norm(&g)));
        }
    }
    let pass = worst_dd <= 1e-12 && worst_adj <= 1e-12;
    report(
        1,
        "operator calculus",
        pass,
        &format!("max |d∘d| {worst_dd:.2e}, max adjointness defect {worst_adj:.2e} (tol 1e-12)"),
    );
}

#[test]
fn criterion_02_gradient_exactness() {
    let mut worst = 0.0f64;
    for rank in [1usize, 2] {
        let geom = LatticeGeometry::new(1, 2.0, 16).unwrap();
        let spec = BundleSpec::new(rank, 0, &geom).unwrap();
        let state = random_state(spec, geom, 7 + rank as u64, 3).unwrap();
        let dev = oracle::gradient_check(&state, 1.5, 1e-5, 50, 11).unwrap();
        worst = worst.max(dev);
    }
    report(
        2,
        "gradient exactness",
        worst <= 1e-6,
        &format!("max relative FD deviation {worst:.2e} (tol 1e-6)"),
    );
}

#[test]
fn criterion_03_energy_identity_order() {
    let mut detail = String::new();
    let mut pass = true;
    for m in [1usize, 2] {
        let mut res = Vec::new();
        for nsite in [16usize, 32, 64] {
            let geom = LatticeGeometry::new(m, 2.0, nsite).unwrap();
            let spec = BundleSpec::new(1, 0, &geom).unwrap();
            let state = random_state(spec, geom, 42, 2).unwrap();
            let (_, rel) = energy::energy_identity_residual(&state, 1.0).unwrap();
            res.push(rel);
        }
        let order = fitted_order(&res);
        pass &= order >= 1.8;
        detail.push_str(&format!(
            "m={m}: residuals {:.2e}/{:.2e}/{:.2e}, order {order:.2}; ",
            res[0], res[1], res[2]
        ));
    }
    report(3, "energy identity order", pass, &detail);
}

#[test]
fn criterion_04_monotone_decay() {
    let run = standard_run();
    let rows = &run.trace;
    let steps = rows.len().saturating_sub(1);
    let e0 = rows[0].ymh;
    let mut worst_rise = f64::NEG_INFINITY;
    for w in rows.windows(2).take(steps.min(6000)) {
        worst_rise = worst_rise.max(w[1].ymh - w[0].ymh);
    }
    let pass = steps >= 500 && worst_rise <= 1e-12 * e0;
    report(
        4,
        "monotone decay",
        pass,
        &format!(
            "{steps} adaptive RK4 steps, worst per-step energy rise {worst_rise:.2e} \
             (tol {:.2e})",
            1e-12 * e0
        ),
    );
}

#[test]
fn criterion_05_maximum_principle() {
    let tau = 2.0f64;
    // φ₀ scaled so sup|φ₀|² = 4τ (theta is normalized to sup 1).
    let state = theta_state(32, (4.0 * tau).sqrt());
    let mut sched = standard_schedule(3.0);
    sched.eps_vortex = None;
    let run = flow::integrate(&state, tau, &sched).unwrap();
    let bound = (4.0 * tau).max(tau) + 1e-6;
    let sup_seen = run
        .trace
        .iter()
        .fold(0.0f64, |m, r| m.max(r.sup_phi_sq));

    // Constant-data limit: y = |φ|² obeys the logistic y' = y(τ − y).
    let geom = LatticeGeometry::new(1, side(), 16).unwrap();
    let spec = BundleSpec::new(1, 0, &geom).unwrap();
    let mut cstate = background_state(spec, geom).unwrap();
    for site in 0..geom.site_count() {
        cstate.phi_mut().value_mut(site, 0)[0] = C::new((4.0 * tau).sqrt(), 0.0);
    }
    let crun = flow::integrate(&cstate, tau, &sched).unwrap();
    let y0 = 4.0 * tau;
    let t = crun.t_final;
    let exact = tau * y0 * (tau * t).exp() / (tau + y0 * ((tau * t).exp() - 1.0));
    let ode_err = (crun.trace.last().unwrap().sup_phi_sq - exact).abs();

    let pass = sup_seen <= bound && ode_err <= 1e-6;
    report(
        5,
        "maximum principle",
        pass,
        &format!("sup|φ|² {sup_seen:.6} ≤ {bound:.6}; constant-data ODE error {ode_err:.2e}"),
    );
}

#[test]
fn criterion_06_bochner_monotonicity() {
    let run = standard_run();
    let verdict = kvflow::diagnostics::check_ehat_monotone(&run.trace, 1e-6);
    report(
        6,
        "Bochner monotonicity",
        verdict.pass,
        &format!(
            "sup ê per-step rise margin {:.2e} over {} recorded steps",
            verdict.margin,
            run.trace.len()
        ),
    );
}

#[test]
fn criterion_07_feasible_convergence() {
    let run = standard_run();
    let last = run.trace.last().unwrap();
    let target = 2.0 * PI * 2.0; // 2πτd with τ = 2, d = 1
    let rel = (last.ymh - target).abs() / target;
    let pass = run.status == FlowStatus::Converged && last.moment_inf_norm <= 1e-3 && rel <= 0.01;
    report(
        7,
        "feasible convergence",
        pass,
        &format!(
            "‖Ψ‖∞ {:.2e} (tol 1e-3), ymh {:.6} vs 4π = {:.6} (rel {:.2e}, tol 1%)",
            last.moment_inf_norm, last.ymh, target, rel
        ),
    );
}

#[test]
fn criterion_08_infeasible_plateau() {
    let tau = 0.5f64; // below τ_c = 4πd/L² = 1
    let mut sched = standard_schedule(60.0);
    sched.eps_vortex = None;
    sched.record_every = 50;
    let run = flow::integrate(&theta_state(32, 1.0), tau, &sched).unwrap();
    let last = run.trace.last().unwrap();
    let sup_phi = last.sup_phi_sq.sqrt();
    let plateau = energy::plateau_energy(1, side(), tau);
    let rel = (last.ymh - plateau).abs() / plateau;
    let pass = sup_phi <= 1e-2 && rel <= 0.01;
    report(
        8,
        "infeasible plateau",
        pass,
        &format!(
            "final sup|φ| {sup_phi:.2e} (tol 1e-2), ymh {:.6} vs plateau {plateau:.6} \
             (rel {rel:.2e}, tol 1%)",
            last.ymh
        ),
    );
}

#[test]
fn criterion_09_flow_equivalence() {
    let mut cfg = kvflow::config::RunConfig::default();
    cfg.flow.t_end = 6.0;
    cfg.output.record_every = 20;
    let r = kvflow::runner::compare_flows(&cfg).unwrap();
    report(
        9,
        "flow equivalence",
        r.pass,
        &format!(
            "max relative discrepancy {:.2e} over {} aligned rows (tol 1%)",
            r.max_discrepancy, r.rows_compared
        ),
    );
}

#[test]
fn criterion_10_oracle_agreement() {
    let tau = 2.0f64;
    let run = standard_run();
    let base = theta_state(32, 1.0);
    let sol = oracle::kw_solve(&base, tau, 1e-10).unwrap();
    let kw_res = *sol.residual_history.last().unwrap();
    let geom = base.geometry();
    let mut sup_dev = 0.0f64;
    for site in 0..geom.site_count() {
        let target = base.phi().value(site, 0)[0].norm() * sol.mstate.u()[site].exp();
        let flowed = run.state.phi().value(site, 0)[0].norm();
        sup_dev = sup_dev.max((flowed - target).abs());
    }
    let tol = 1e-2 * tau.sqrt();
    let pass = sup_dev <= tol && kw_res <= 1e-10;
    report(
        10,
        "oracle agreement",
        pass,
        &format!(
            "‖|φ_flow(T)| − |φ₀|e^u*‖∞ {sup_dev:.2e} (tol {tol:.2e}), \
             stationary residual {kw_res:.2e} (tol 1e-10)"
        ),
    );
}

#[test]
fn criterion_11_holomorphy_preservation() {
    let run = standard_run();
    let d0 = run.trace[0].dbar_residual;
    let bound = 2.0 * d0 + 1e-8;
    let worst = run
        .trace
        .iter()
        .fold(0.0f64, |m, r| m.max(r.dbar_residual));
    // Initial residual decays at order >= 1.8 under refinement.
    let mut res = Vec::new();
    for nsite in [16usize, 32, 64] {
        res.push(flow::dbar_residual(&theta_state(nsite, 1.0), 2.0).unwrap());
    }
    let order = fitted_order(&res);
    let pass = worst <= bound && order >= 1.8;
    report(
        11,
        "holomorphy preservation",
        pass,
        &format!(
            "max ‖∂̄φ‖ {worst:.2e} ≤ 2·{d0:.2e}+1e-8; initial residual order {order:.2}"
        ),
    );
}

/// Lemma-style first-order identity: d*_A F_A = i(∂_A − ∂̄_A) ΛF_A on
/// End-valued data. Returns the relative residual.
fn codiff_curvature_identity_residual(state: &FieldState) -> f64 {
    let f = curvature(state);
    let lhs = covariant_codiff2_ad(state, &f);
    let lf = lambda_contract(&f);
    let dlf = covariant_d_ad(state, &lf);
    let (p10, p01) = one_form_parts(&dlf);
    let mut rhs = p10;
    rhs.axpy(-1.0, &p01);
    rhs.scale_complex(C::new(0.0, 1.0));
    let mut diff = lhs.clone();
    diff.axpy(-1.0, &rhs);
    norm(&diff) / norm(&lhs).max(norm(&rhs)).max(1e-300)
}

/// Weitzenböck-type identity: (d*_A d_A − iΛF_A)φ = 2 ∂̄*_A ∂̄_A φ.
/// Returns the relative residual.
fn weitzenboeck_identity_residual(state: &FieldState) -> f64 {
    let n = state.spec().rank();
    let dphi = covariant_d(state, state.phi());
    let mut lhs = covariant_codiff(state, &dphi);
    let f = curvature(state);
    let lf = lambda_contract(&f);
    let i = C::new(0.0, 1.0);
    for site in 0..state.geometry().site_count() {
        let m = lf.value(site, 0).to_vec();
        let v = state.phi().value(site, 0).to_vec();
        let dst = lhs.value_mut(site, 0);
        for r in 0..n {
            let mut acc = C::new(0.0, 0.0);
            for c in 0..n {
                acc += m[r * n + c] * v[c];
            }
            dst[r] -= i * acc;
        }
    }
    let (_, dbar) = one_form_parts(&dphi);
    let mut rhs = covariant_codiff(state, &dbar);
    rhs.scale(2.0);
    let mut diff = lhs.clone();
    diff.axpy(-1.0, &rhs);
    norm(&diff) / norm(&lhs).max(norm(&rhs)).max(1e-300)
}

#[test]
fn criterion_12_kahler_identities() {
    // Flat identities: on a flat Kähler torus the centered-difference
    // symbol satisfies ∂̄* = −iΛ∂ on (0,1)-forms exactly, so those
    // residuals sit at the rounding floor at every N (at-floor convergence).
    let mut flat_worst = 0.0f64;
    for (m, nsite) in [(1usize, 16usize), (2, 8)] {
        let geom = LatticeGeometry::new(m, 2.0, nsite).unwrap();
        let f = random_form(geom, 1, ValueKind::Scalar, 3 * m as u64);
        let (_, f01) = one_form_parts(&f);
        let lhs = codifferential(&f01, 0).unwrap();
        let df = exterior_d(&f01, 0).unwrap();
        let mut rhs = lambda_contract(&df);
        rhs.scale_complex(C::new(0.0, -1.0));
        let mut diff = lhs.clone();
        diff.axpy(-1.0, &rhs);
        flat_worst = flat_worst.max(norm(&diff) / norm(&f01).max(1e-300));
    }

    // Covariant identities on smooth N-independent random data, m = 1 and
    // m = 2, refinement N = 16 → 32 → 64.
    let mut detail = format!("flat residual {flat_worst:.2e} (exact); ");
    let mut pass = flat_worst <= 1e-12;
    // m = 1 at rank 2 exercises the commutator terms over the full
    // 16 → 32 → 64 refinement; m = 2 uses rank 1 on 8 → 16 → 32 (the same
    // asymptotic regime) to keep 4-D field-level 2-forms within memory.
    for (m, rank, sizes) in [(1usize, 2usize, [16usize, 32, 64]), (2, 1, [8, 16, 32])] {
        let mut res24 = Vec::new();
        let mut res25 = Vec::new();
        for nsite in sizes {
            let geom = LatticeGeometry::new(m, 2.0, nsite).unwrap();
            let spec = BundleSpec::new(rank, 0, &geom).unwrap();
            let mut state = random_state(spec, geom, 5, 2).unwrap();
            res25.push(weitzenboeck_identity_residual(&state));
            if m == 2 {
                // The codifferential identity presumes F^{0,2} = 0, which is
                // automatic in one complex dimension but a genuine constraint
                // in two. Rebuild a as ∂̄s − (∂̄s)* from a smooth scalar s, so
                // F^{0,2} = ∂̄²s vanishes identically on the lattice.
                let s = state.phi().clone();
                let ds = exterior_d(&s, 0).unwrap();
                let i = C::new(0.0, 1.0);
                for j in 0..geom.complex_dim() {
                    for site in 0..geom.site_count() {
                        let t = (ds.value(site, 2 * j)[0] + i * ds.value(site, 2 * j + 1)[0]) * 0.5;
                        state.a_mut().value_mut(site, 2 * j)[0] = t - t.conj();
                        state.a_mut().value_mut(site, 2 * j + 1)[0] = -i * (t + t.conj());
                    }
                }
            }
            res24.push(codiff_curvature_identity_residual(&state));
        }
        let o24 = fitted_order(&res24);
        let o25 = fitted_order(&res25);
        pass &= o24 >= 1.8 && o25 >= 1.8;
        detail.push_str(&format!(
            "m={m}: d*F identity order {o24:.2}, Weitzenböck order {o25:.2}; "
        ));
    }
    report(12, "Kähler identities", pass, &detail);
}
