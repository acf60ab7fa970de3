//! Independent ground truth: a finite-difference gradient of the discrete
//! energy, the Kazdan–Warner/Newton stationary solver for the rank-1
//! vortex limit, the φ = 0 plateau energy, and a power-iteration bound on
//! the stationary linearization.

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bundle::FieldState;
use crate::conventions::GRADIENT_PAIRING_FACTOR;
use crate::energy;
use crate::error::OracleError;
use crate::flow::{self, MetricState, Tangent};
use crate::smallmat;

/// One real coordinate of a (A, φ) state.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CoordId {
    /// Connection coordinate: coefficient of one anti-Hermitian basis
    /// matrix (n=1: {i}; n=2: {i e11, i e22, e12−e21, i(e12+e21)}).
    A {
        site: usize,
        axis: usize,
        basis: usize,
    },
    /// Higgs coordinate: real or imaginary part of one fiber component.
    Phi {
        site: usize,
        component: usize,
        imag: bool,
    },
}

/// Builds the unit tangent of one coordinate.
fn basis_tangent(state: &FieldState, coord: CoordId) -> Tangent {
    let n = state.spec().rank();
    let mut t = Tangent::zeros(state);
    let i = C::new(0.0, 1.0);
    match coord {
        CoordId::A { site, axis, basis } => {
            let dst = t.da.value_mut(site, axis);
            match (n, basis) {
                (1, 0) => dst[0] = i,
                (2, 0) => dst[0] = i,
                (2, 1) => dst[3] = i,
                (2, 2) => {
                    dst[1] = C::new(1.0, 0.0);
                    dst[2] = C::new(-1.0, 0.0);
                }
                (2, 3) => {
                    dst[1] = i;
                    dst[2] = i;
                }
                _ => panic!("basis index {basis} out of range for rank {n}"),
            }
        }
        CoordId::Phi {
            site,
            component,
            imag,
        } => {
            t.dphi.value_mut(site, 0)[component] = if imag { i } else { C::new(1.0, 0.0) };
        }
    }
    t
}

/// Draws `count` coordinates uniformly (without replacement is not needed:
/// duplicates are harmless for a max-deviation check).
pub fn sample_coordinates(state: &FieldState, count: usize, seed: u64) -> Vec<CoordId> {
    let geom = state.geometry();
    let n = state.spec().rank();
    let n_basis = n * n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            if rng.gen_bool(0.5) {
                CoordId::A {
                    site: rng.gen_range(0..geom.site_count()),
                    axis: rng.gen_range(0..geom.axes()),
                    basis: rng.gen_range(0..n_basis),
                }
            } else {
                CoordId::Phi {
                    site: rng.gen_range(0..geom.site_count()),
                    component: rng.gen_range(0..n),
                    imag: rng.gen_bool(0.5),
                }
            }
        })
        .collect()
}

/// Central finite differences of the discrete YMH along the sampled
/// coordinates: entries (coordinate, ∂E/∂coordinate).
pub fn fd_gradient(
    state: &FieldState,
    tau: f64,
    eps: f64,
    sample: &[CoordId],
) -> Result<Vec<(CoordId, f64)>, OracleError> {
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(OracleError::BadFdStep(eps));
    }
    if sample.is_empty() {
        return Err(OracleError::EmptySample);
    }
    let mut out = Vec::with_capacity(sample.len());
    for &coord in sample {
        let t = basis_tangent(state, coord);
        let ep = energy::ymh(&flow::advance(state, eps, &t), tau)?;
        let em = energy::ymh(&flow::advance(state, -eps, &t), tau)?;
        out.push((coord, (ep - em) / (2.0 * eps)));
    }
    Ok(out)
}

/// Component of the analytic flow direction along a coordinate tangent,
/// under the L² pairing (sparse evaluation; no full inner product).
fn gradient_component(state: &FieldState, g: &Tangent, coord: CoordId) -> f64 {
    let weight = state.geometry().site_weight();
    let t = basis_tangent(state, coord);
    match coord {
        CoordId::A { site, axis, .. } => {
            weight * smallmat::frob_re(g.da.value(site, axis), t.da.value(site, axis))
        }
        CoordId::Phi { site, .. } => {
            weight * smallmat::frob_re(g.dphi.value(site, 0), t.dphi.value(site, 0))
        }
    }
}

/// Max relative deviation between the FD gradient and the analytic flow
/// direction (scaled by the convention pairing factor: ∂E/∂c = −2 g_c).
pub fn gradient_check(
    state: &FieldState,
    tau: f64,
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<f64, OracleError> {
    let sample = sample_coordinates(state, samples, seed);
    let fd = fd_gradient(state, tau, eps, &sample)?;
    let g = flow::ymh_gradient(state, tau)?;
    // Normalize by the largest sampled magnitude so zero-gradient
    // coordinates don't blow up the relative measure.
    let scale = fd
        .iter()
        .map(|(_, v)| v.abs())
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let mut worst = 0.0f64;
    for &(coord, fd_val) in &fd {
        let predicted = -GRADIENT_PAIRING_FACTOR * gradient_component(state, &g, coord);
        worst = worst.max((fd_val - predicted).abs() / scale);
    }
    Ok(worst)
}

/// Solution of the stationary Kazdan–Warner equation
/// Δ_lat u − iΛF_{A₀} − ½|φ₀|²e^{2u} + τ/2 = 0.
#[derive(Clone, Debug)]
pub struct KwSolution {
    pub mstate: MetricState,
    pub residual_history: Vec<f64>,
    pub iterations: usize,
}

/// Newton iteration from u = 0 with CG linear solves and 0.5-damping on
/// residual increase. Requires rank 1, m = 1, φ₀ ≢ 0 and τ strictly above
/// the Bradlow threshold (for d ≥ 1); d = 0 with constant φ₀ is admitted
/// and converges to u* = ½ ln(τ/|φ₀|²).
pub fn kw_solve(base: &FieldState, tau: f64, tol: f64) -> Result<KwSolution, OracleError> {
    if base.spec().rank() != 1 || base.geometry().complex_dim() != 1 {
        return Err(OracleError::Unsupported);
    }
    let geom = *base.geometry();
    let phi0_sq: Vec<f64> = (0..geom.site_count())
        .map(|s| base.phi().value(s, 0)[0].norm_sqr())
        .collect();
    if phi0_sq.iter().all(|&p| p < 1e-30) {
        return Err(OracleError::Unsupported);
    }
    // Mean compatibility: integrating the equation forces
    // ½⟨|φ₀|²e^{2u}⟩ = τ/2 − 2πd/L² > 0.
    let report = energy::bradlow_check(base.spec().degree(), geom.side(), tau);
    if base.spec().degree() >= 1 && !report.feasible {
        return Err(OracleError::Infeasible {
            tau,
            threshold: report.threshold,
        });
    }
    if !(tau.is_finite() && tau > 0.0) {
        return Err(OracleError::Energy(
            crate::error::EnergyError::TauNotPositive(tau),
        ));
    }

    let mut ms = MetricState::new(base.clone()).map_err(OracleError::Flow)?;
    let nsites = geom.site_count();
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let mut history = Vec::new();
    let mut residual = flow::metric_flow_rhs(&ms, tau).map_err(OracleError::Flow)?;
    let mut res_inf = inf(&residual);
    history.push(res_inf);

    let max_newton = 100;
    for iteration in 0..max_newton {
        if res_inf <= tol {
            return Ok(KwSolution {
                mstate: ms,
                residual_history: history,
                iterations: iteration,
            });
        }
        // Solve (−J) δ = r, J v = Δ_lat v − |φ₀|²e^{2u} v; −J is symmetric
        // positive definite whenever the potential term is somewhere
        // positive (φ₀ ≢ 0), with only a near-null constant mode near
        // vanishing potential — CG handles both.
        let potential: Vec<f64> = phi0_sq
            .iter()
            .zip(ms.u().iter())
            .map(|(p, u)| p * (2.0 * u).exp())
            .collect();
        let apply = |v: &[f64]| -> Vec<f64> {
            let lap = ms.laplacian(v);
            (0..nsites)
                .map(|s| -lap[s] + potential[s] * v[s])
                .collect()
        };
        let delta = conjugate_gradient(&apply, &residual, 1e-12, 20 * nsites);
        // Damped update: u ← u + λδ, halving λ while the residual grows.
        let mut lambda = 1.0f64;
        loop {
            let mut trial = ms.clone();
            for (u, d) in trial.u_mut().iter_mut().zip(delta.iter()) {
                *u += lambda * d;
            }
            let r_trial = flow::metric_flow_rhs(&trial, tau).map_err(OracleError::Flow)?;
            let r_inf_trial = inf(&r_trial);
            if r_inf_trial < res_inf || lambda < 1e-4 {
                ms = trial;
                residual = r_trial;
                res_inf = r_inf_trial;
                break;
            }
            lambda *= 0.5;
        }
        history.push(res_inf);
    }
    if res_inf <= tol {
        return Ok(KwSolution {
            mstate: ms,
            residual_history: history,
            iterations: max_newton,
        });
    }
    Err(OracleError::NoConvergence {
        iterations: max_newton,
        history,
    })
}

/// Plain conjugate gradients for a symmetric positive (semi)definite
/// operator; fixed reduction order, deterministic.
fn conjugate_gradient(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut rs = dot(&r, &r);
    let b_norm = rs.sqrt().max(f64::MIN_POSITIVE);
    for _ in 0..max_iter {
        if rs.sqrt() <= rel_tol * b_norm {
            break;
        }
        let ap = apply(&p);
        let alpha = rs / dot(&p, &ap).max(f64::MIN_POSITIVE);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new = dot(&r, &r);
        let beta = rs_new / rs;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_new;
    }
    x
}

/// Largest eigenvalue of the stationary linearization
/// J v = Δ_lat v − |φ₀|²e^{2u*} v at a solved metric, estimated by shifted
/// power iteration. J is negative definite at feasible solutions, so the
/// returned value is expected ≤ 0 (a Rayleigh quotient of J, hence always a
/// valid lower-region certificate even before full convergence).
pub fn kw_linearization_lambda_max(ms: &MetricState, iters: usize) -> f64 {
    let geom = *ms.geometry();
    let nsites = geom.site_count();
    let h = geom.spacing();
    let phi_term: Vec<f64> = ms
        .phi0_sq()
        .iter()
        .zip(ms.u().iter())
        .map(|(p, u)| p * (2.0 * u).exp())
        .collect();
    let sup_potential = phi_term.iter().fold(0.0f64, |m, x| m.max(*x));
    // Spectrum of J lies in [−2·axes/h² − supV, 0); shift makes it
    // nonnegative so power iteration finds the J-largest eigenvalue.
    let shift = 2.0 * geom.axes() as f64 / (h * h) + sup_potential + 1.0;
    let apply_j = |v: &[f64]| -> Vec<f64> {
        let lap = ms.laplacian(v);
        (0..nsites)
            .map(|s| lap[s] - phi_term[s] * v[s])
            .collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut v: Vec<f64> = (0..nsites).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = norm(&v);
    for x in v.iter_mut() {
        *x /= nv;
    }
    let mut rayleigh = 0.0;
    for _ in 0..iters {
        let jv = apply_j(&v);
        rayleigh = v.iter().zip(jv.iter()).map(|(a, b)| a * b).sum::<f64>();
        let mut w: Vec<f64> = jv
            .iter()
            .zip(v.iter())
            .map(|(j, x)| j + shift * x)
            .collect();
        let nw = norm(&w);
        if nw < 1e-300 {
            break;
        }
        for x in w.iter_mut() {
            *x /= nw;
        }
        v = w;
    }
    rayleigh
}

/// Re-export of the closed-form plateau energy (φ = 0 stratum minimum).
pub fn plateau_energy(degree: i64, side: f64, tau: f64) -> f64 {
    energy::plateau_energy(degree, side, tau)
}
