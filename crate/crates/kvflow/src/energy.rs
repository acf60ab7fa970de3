//! The functionals: Yang–Mills–Higgs energy, moment map, vortex functional,
//! the energy-identity decomposition
//!
//!   YMH = ‖Ψ_τ‖² + 4‖F^{0,2}‖² + 2‖∂̄_Aφ‖² + 2πτ C₁ − 8π² Ch₂,
//!
//! and the topological constants. All quadratic terms are evaluated in one
//! streaming pass over sites (no whole-field temporaries), so large m = 2
//! grids stay cheap in memory; field-level operators are used only in tests
//! to cross-check the fused loop.

use num_complex::Complex64 as C;

use crate::bundle::{background_curvature, FieldState};
use crate::error::EnergyError;
use crate::lattice::{FormField, TypeProjector, ValueKind};
use crate::smallmat;

/// Energy terms and the identity residual for one state.
#[derive(Clone, Copy, Debug)]
pub struct EnergyReport {
    /// ‖F_A‖² + ‖d_Aφ‖² + ¼‖φ⊗φ* − τI‖².
    pub ymh_total: f64,
    /// ‖F_A‖².
    pub term_f: f64,
    /// ‖d_Aφ‖².
    pub term_dphi: f64,
    /// ¼‖φ⊗φ* − τI‖².
    pub term_quartic: f64,
    /// ‖Ψ_τ‖² (the vortex functional).
    pub moment_sq: f64,
    /// 4‖F^{0,2}‖².
    pub term_f02: f64,
    /// 2‖∂̄_Aφ‖².
    pub term_dbar: f64,
    /// 2πτ C₁ − 8π² Ch₂.
    pub topo_const: f64,
    /// ymh_total − (moment_sq + term_f02 + term_dbar + topo_const).
    pub identity_residual: f64,
}

impl EnergyReport {
    /// Identity residual normalized by the total energy.
    pub fn relative_residual(&self) -> f64 {
        self.identity_residual.abs() / self.ymh_total.abs().max(f64::MIN_POSITIVE)
    }
}

/// Pointwise scan over the state: weighted energy accumulators plus the
/// sup-norm monitors the diagnostics trace wants. One pass, fixed memory.
#[derive(Clone, Copy, Debug, Default)]
pub struct PointwiseScan {
    pub term_f: f64,
    pub term_dphi: f64,
    pub term_quartic: f64,
    pub moment_sq: f64,
    pub term_f02: f64,
    pub term_dbar: f64,
    /// sup |φ|².
    pub sup_phi_sq: f64,
    /// sup ê = sup |Ψ_τ|².
    pub sup_ehat: f64,
    /// sup |ΛF| (Frobenius).
    pub sup_lambda_f: f64,
}

impl PointwiseScan {
    /// ‖Ψ_τ‖_∞.
    pub fn moment_inf_norm(&self) -> f64 {
        self.sup_ehat.sqrt()
    }

    /// ‖∂̄_Aφ‖.
    pub fn dbar_residual(&self) -> f64 {
        (self.term_dbar / 2.0).max(0.0).sqrt()
    }

    /// ‖F^{0,2}‖.
    pub fn f02_residual(&self) -> f64 {
        (self.term_f02 / 4.0).max(0.0).sqrt()
    }
}

/// Evaluates all pointwise quantities of `state` in a single site loop.
pub fn scan(state: &FieldState, tau: f64) -> Result<PointwiseScan, EnergyError> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(EnergyError::TauNotPositive(tau));
    }
    let geom = *state.geometry();
    let n = state.spec().rank();
    let m = geom.complex_dim();
    let pairs = geom.pairs();
    let ncomp2 = pairs.len();
    let weight = geom.site_weight();
    // (0,2) projector in the real-component basis, nontrivial only for m=2.
    let proj = if m == 2 {
        Some(TypeProjector::new(&geom))
    } else {
        None
    };
    let i = C::new(0.0, 1.0);
    let mut out = PointwiseScan::default();
    let mut dphi = [[C::new(0.0, 0.0); 2]; 4];
    let mut fcomp = vec![[C::new(0.0, 0.0); 4]; ncomp2];
    let mut q = [C::new(0.0, 0.0); 4];
    let mut psi = [C::new(0.0, 0.0); 4];
    let mut lam = [C::new(0.0, 0.0); 4];
    for site in 0..geom.site_count() {
        // Covariant derivative, all axes.
        for axis in 0..geom.axes() {
            state.cov_diff_phi_site(site, axis, &mut dphi[axis][..n]);
            out.term_dphi += smallmat::frob_sq(&dphi[axis][..n]);
        }
        // (0,1) part: per complex axis, coefficient of dz̄_j is
        // (D_x φ + i D_y φ)/2 and ‖∂̄φ‖²(1-form) = 2 Σ_j |coef|².
        for j in 0..m {
            for c in 0..n {
                let w = (dphi[2 * j][c] + i * dphi[2 * j + 1][c]) * 0.5;
                out.term_dbar += 4.0 * w.norm_sqr();
            }
        }
        // Curvature components and Λ-contraction.
        lam[..n * n].fill(C::new(0.0, 0.0));
        for (idx, &(a, b)) in pairs.iter().enumerate() {
            state.curvature_site(site, a, b, &mut fcomp[idx][..n * n]);
            out.term_f += smallmat::frob_sq(&fcomp[idx][..n * n]);
            if b == a + 1 && a % 2 == 0 {
                for k in 0..n * n {
                    lam[k] += fcomp[idx][k];
                }
            }
        }
        out.sup_lambda_f = out.sup_lambda_f.max(smallmat::frob_sq(&lam[..n * n]));
        // (0,2) part (m = 2 only).
        if let Some(p) = proj.as_ref() {
            let mat = p.matrix(2);
            for k in 0..n * n {
                let mut f02_sq = 0.0;
                for row in 0..ncomp2 {
                    let mut acc = C::new(0.0, 0.0);
                    for col in 0..ncomp2 {
                        let w = mat[row * ncomp2 + col];
                        if w.norm_sqr() != 0.0 {
                            acc += w * fcomp[col][k];
                        }
                    }
                    f02_sq += acc.norm_sqr();
                }
                out.term_f02 += 4.0 * f02_sq;
            }
        }
        // Q = φ⊗φ* − τI, Ψ = ΛF − (i/2) Q.
        let phi = state.phi().value(site, 0);
        let phi_sq: f64 = phi.iter().map(|z| z.norm_sqr()).sum();
        out.sup_phi_sq = out.sup_phi_sq.max(phi_sq);
        smallmat::outer(phi, phi, n, &mut q[..n * n]);
        for d in 0..n {
            q[d * n + d] -= tau;
        }
        out.term_quartic += 0.25 * smallmat::frob_sq(&q[..n * n]);
        for k in 0..n * n {
            psi[k] = lam[k] - i * 0.5 * q[k];
        }
        let ehat = smallmat::frob_sq(&psi[..n * n]);
        out.sup_ehat = out.sup_ehat.max(ehat);
        out.moment_sq += ehat;
    }
    out.term_f *= weight;
    out.term_dphi *= weight;
    out.term_dbar *= weight;
    out.term_f02 *= weight;
    out.term_quartic *= weight;
    out.moment_sq *= weight;
    out.sup_lambda_f = out.sup_lambda_f.sqrt();
    Ok(out)
}

/// First Chern and second Chern-character integrals together with the
/// energy-identity constant 2πτ C₁ − 8π² Ch₂, evaluated analytically
/// from (d, L) so the constant carries no quadrature error.
#[derive(Clone, Copy, Debug)]
pub struct TopologicalConstants {
    pub c1: f64,
    pub ch2: f64,
    pub topo_const: f64,
}

pub fn topological_constants(
    state_degree: i64,
    tau: f64,
) -> TopologicalConstants {
    // m = 1: C₁ = d, the Ch₂ term does not contribute on a complex 1-fold.
    // m = 2 is supported only with d = 0: both integrals vanish.
    let c1 = state_degree as f64;
    let ch2 = 0.0;
    TopologicalConstants {
        c1,
        ch2,
        topo_const: 2.0 * std::f64::consts::PI * tau * c1 - 8.0 * std::f64::consts::PI.powi(2) * ch2,
    }
}

/// Full energy report: YMH terms, identity decomposition, topological
/// constant, identity residual.
pub fn energy_report(state: &FieldState, tau: f64) -> Result<EnergyReport, EnergyError> {
    let s = scan(state, tau)?;
    let topo = topological_constants(state.spec().degree(), tau);
    let ymh_total = s.term_f + s.term_dphi + s.term_quartic;
    Ok(EnergyReport {
        ymh_total,
        term_f: s.term_f,
        term_dphi: s.term_dphi,
        term_quartic: s.term_quartic,
        moment_sq: s.moment_sq,
        term_f02: s.term_f02,
        term_dbar: s.term_dbar,
        topo_const: topo.topo_const,
        identity_residual: ymh_total - (s.moment_sq + s.term_f02 + s.term_dbar + topo.topo_const),
    })
}

/// The Yang–Mills–Higgs energy of a state (total of the report).
pub fn ymh(state: &FieldState, tau: f64) -> Result<f64, EnergyError> {
    Ok(energy_report(state, tau)?.ymh_total)
}

/// The moment map Ψ_τ = ΛF_A − (i/2)(φ⊗φ* − τI) as an anti-Hermitian
/// End-valued 0-form.
pub fn moment_map(state: &FieldState, tau: f64) -> Result<FormField, EnergyError> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(EnergyError::TauNotPositive(tau));
    }
    let geom = *state.geometry();
    let n = state.spec().rank();
    let i = C::new(0.0, 1.0);
    let mut out = FormField::zeros(geom, 0, ValueKind::Matrix(n));
    let mut fc = [C::new(0.0, 0.0); 4];
    let mut q = [C::new(0.0, 0.0); 4];
    for site in 0..geom.site_count() {
        // Λ picks the dx_j ∧ dy_j curvature components.
        let mut lam = [C::new(0.0, 0.0); 4];
        for j in 0..geom.complex_dim() {
            state.curvature_site(site, 2 * j, 2 * j + 1, &mut fc[..n * n]);
            for k in 0..n * n {
                lam[k] += fc[k];
            }
        }
        let phi = state.phi().value(site, 0);
        smallmat::outer(phi, phi, n, &mut q[..n * n]);
        for d in 0..n {
            q[d * n + d] -= tau;
        }
        let dst = out.value_mut(site, 0);
        for k in 0..n * n {
            dst[k] = lam[k] - i * 0.5 * q[k];
        }
    }
    Ok(out)
}

/// ℱ = ‖Ψ_τ‖², the vortex functional.
pub fn vortex_functional(state: &FieldState, tau: f64) -> Result<f64, EnergyError> {
    Ok(scan(state, tau)?.moment_sq)
}

/// Absolute and relative energy-identity residual.
pub fn energy_identity_residual(state: &FieldState, tau: f64) -> Result<(f64, f64), EnergyError> {
    let r = energy_report(state, tau)?;
    Ok((r.identity_residual, r.relative_residual()))
}

/// Energy of the φ = 0 stratum minimum (constant-curvature connection):
/// 4π²d²/L² + τ²L²/4 for m = 1.
pub fn plateau_energy(degree: i64, side: f64, tau: f64) -> f64 {
    let pi = std::f64::consts::PI;
    4.0 * pi * pi * (degree as f64).powi(2) / (side * side) + tau * tau * side * side / 4.0
}

/// Bradlow threshold τ_c = 4πd/L² and feasibility verdict (m = 1, n = 1).
#[derive(Clone, Copy, Debug)]
pub struct BradlowReport {
    pub threshold: f64,
    pub feasible: bool,
    pub borderline: bool,
    pub margin: f64,
}

pub fn bradlow_check(degree: i64, side: f64, tau: f64) -> BradlowReport {
    let threshold = 4.0 * std::f64::consts::PI * degree as f64 / (side * side);
    let margin = tau - threshold;
    let borderline = margin.abs() <= 1e-12 * tau.abs().max(threshold.abs());
    BradlowReport {
        threshold,
        feasible: margin > 0.0 && !borderline,
        borderline,
        margin,
    }
}

/// `background_curvature` re-exported check helper: iΛF of the pure
/// background equals 2πd/L² (a positive real number).
pub fn background_i_lambda_f(state: &FieldState) -> f64 {
    (C::new(0.0, 1.0) * background_curvature(state)).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{background_state, covariant_d, curvature, random_state, BundleSpec};
    use crate::lattice::{inner, lambda_contract, one_form_parts, LatticeGeometry, TypeProjector};
    use std::f64::consts::PI;

    #[test]
    fn constant_integrand_examples() {
        // n=1, d=0, A=0, φ=0, L=2, τ=1 → ymh = τ²L²/4 = 1.
        let geom = LatticeGeometry::new(1, 2.0, 8).unwrap();
        let spec = BundleSpec::new(1, 0, &geom).unwrap();
        let state = background_state(spec, geom).unwrap();
        let r = energy_report(&state, 1.0).unwrap();
        assert!((r.ymh_total - 1.0).abs() < 1e-13);
        assert!((r.moment_sq - 1.0).abs() < 1e-13);
        assert!(r.identity_residual.abs() < 1e-13);

        // φ ≡ √τ → ymh = 0, Ψ ≡ 0.
        let mut vortex = state.clone();
        for site in 0..geom.site_count() {
            vortex.phi_mut().value_mut(site, 0)[0] = C::new(1.0, 0.0);
        }
        let rv = energy_report(&vortex, 1.0).unwrap();
        assert!(rv.ymh_total.abs() < 1e-13);
        assert!(rv.moment_sq.abs() < 1e-13);
    }

    #[test]
    fn background_energy_closed_form() {
        // n=1, d=1, background only, φ=0, L=2, τ=1:
        // ymh = 4π²d²/L² + τ²L²/4 = π² + 1.
        let geom = LatticeGeometry::new(1, 2.0, 16).unwrap();
        let spec = BundleSpec::new(1, 1, &geom).unwrap();
        let state = background_state(spec, geom).unwrap();
        let r = energy_report(&state, 1.0).unwrap();
        assert!((r.ymh_total - (PI * PI + 1.0)).abs() < 1e-12);
        assert!((r.ymh_total - plateau_energy(1, 2.0, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn moment_map_zero_state() {
        let geom = LatticeGeometry::new(1, 2.0, 8).unwrap();
        let spec = BundleSpec::new(1, 0, &geom).unwrap();
        let state = background_state(spec, geom).unwrap();
        let psi = moment_map(&state, 1.0).unwrap();
        for site in 0..geom.site_count() {
            assert!((psi.value(site, 0)[0] - C::new(0.0, 0.5)).norm() < 1e-14);
        }
    }

    #[test]
    fn tau_must_be_positive() {
        let geom = LatticeGeometry::new(1, 2.0, 8).unwrap();
        let spec = BundleSpec::new(1, 0, &geom).unwrap();
        let state = background_state(spec, geom).unwrap();
        assert!(ymh(&state, 0.0).is_err());
        assert!(ymh(&state, -1.0).is_err());
    }

    #[test]
    fn scan_matches_field_level_operators() {
        // The fused streaming loop must agree with the general operators.
        for (m, nn, rank) in [(1usize, 8usize, 1usize), (1, 8, 2), (2, 4, 1), (2, 4, 2)] {
            let geom = LatticeGeometry::new(m, 1.7, nn).unwrap();
            let spec = BundleSpec::new(rank, 0, &geom).unwrap();
            let mut state = random_state(spec, geom, 31 + m as u64, 1).unwrap();
            state.a_mut().scale(0.6);
            let tau = 1.3;
            let s = scan(&state, tau).unwrap();
            let f = curvature(&state);
            assert!((s.term_f - inner(&f, &f)).abs() < 1e-10 * (1.0 + s.term_f));
            let dphi = covariant_d(&state, state.phi());
            assert!((s.term_dphi - inner(&dphi, &dphi)).abs() < 1e-10 * (1.0 + s.term_dphi));
            let (_, dbar) = one_form_parts(&dphi);
            assert!(
                (s.term_dbar - 2.0 * inner(&dbar, &dbar)).abs() < 1e-10 * (1.0 + s.term_dbar)
            );
            let psi = moment_map(&state, tau).unwrap();
            assert!((s.moment_sq - inner(&psi, &psi)).abs() < 1e-10 * (1.0 + s.moment_sq));
            if m == 2 {
                let proj = TypeProjector::new(&geom);
                let (_, _, f02) = proj.decompose(&f);
                assert!(
                    (s.term_f02 - 4.0 * inner(&f02, &f02)).abs() < 1e-10 * (1.0 + s.term_f02)
                );
            } else {
                assert_eq!(s.term_f02, 0.0);
            }
            // Λ from the field operator matches sup monitor plumbing.
            let lf = lambda_contract(&f);
            assert!((s.sup_lambda_f - lf.sup_norm()).abs() < 1e-12 * (1.0 + s.sup_lambda_f));
        }
    }

    #[test]
    fn vortex_functional_matches_report() {
        let geom = LatticeGeometry::new(1, 2.0, 8).unwrap();
        let spec = BundleSpec::new(2, 0, &geom).unwrap();
        let state = random_state(spec, geom, 5, 2).unwrap();
        let r = energy_report(&state, 0.9).unwrap();
        let v = vortex_functional(&state, 0.9).unwrap();
        assert_eq!(r.moment_sq, v);
    }

    #[test]
    fn topo_constant_values() {
        let t = topological_constants(1, 2.0);
        assert!((t.topo_const - 4.0 * PI).abs() < 1e-12);
        assert_eq!(topological_constants(0, 7.0).topo_const, 0.0);
    }

    #[test]
    fn plateau_meets_vortex_bound_at_threshold() {
        // plateau(τ_c) = 2πτ_c·d exactly.
        let l = (4.0 * PI).sqrt();
        let d = 1i64;
        let tau_c = 4.0 * PI * d as f64 / (l * l);
        let plateau = plateau_energy(d, l, tau_c);
        let bound = 2.0 * PI * tau_c * d as f64;
        assert!((plateau - bound).abs() < 1e-12);
    }

    #[test]
    fn bradlow_threshold_cases() {
        let l = (4.0 * PI).sqrt();
        let r = bradlow_check(1, l, 2.0);
        assert!(r.feasible && (r.margin - 1.0).abs() < 1e-12);
        let r = bradlow_check(1, l, 0.5);
        assert!(!r.feasible);
        let r = bradlow_check(0, l, 0.3);
        assert!(r.feasible);
        let r = bradlow_check(1, l, 1.0);
        assert!(r.borderline);
    }

    #[test]
    fn identity_residual_refines_at_second_order() {
        for m in [1usize, 2] {
            let mut errs = Vec::new();
            let sizes: &[usize] = if m == 1 { &[16, 32, 64] } else { &[8, 16, 32] };
            for &nn in sizes {
                let geom = LatticeGeometry::new(m, 2.0, nn).unwrap();
                let spec = BundleSpec::new(1, 0, &geom).unwrap();
                let mut state = random_state(spec, geom, 77, 2).unwrap();
                state.a_mut().scale(0.5);
                let (_, rel) = energy_identity_residual(&state, 1.1).unwrap();
                errs.push(rel);
            }
            let o0 = (errs[0] / errs[1]).log2();
            let o1 = (errs[1] / errs[2]).log2();
            assert!(o0 > 1.8 && o1 > 1.8, "m={m} orders {o0} {o1} errs {errs:?}");
        }
    }
}
