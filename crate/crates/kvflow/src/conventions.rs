//! The convention sheet: every sign, factor and layout choice that more
//! than one module relies on, stated once. `summary.json` embeds
//! [`CONVENTIONS_VERSION`] and a content hash of [`CONVENTION_SHEET`] so
//! stored artifacts identify the conventions they were produced under.

/// Human-readable convention sheet. Keep in sync with the code; the hash of
/// this string is embedded in every summary.json.
pub const CONVENTION_SHEET: &str = "\
kvflow convention sheet
=======================
1. Coordinates: real axes ordered (x1, y1[, x2, y2]), z_j = x_j + i y_j,
   dz_j = dx_j + i dy_j, d/dz̄_j = (d/dx_j + i d/dy_j)/2.
   Kähler form ω = Σ_j dx_j ∧ dy_j; Λ(dx_j ∧ dy_j) = 1, so Λ(f ω) = m f.
2. Derivatives: centered differences Δf(x) = [f(x+h ê) − f(x−h ê)]/(2h) on a
   collocated grid. Δ is exactly skew-adjoint: the codifferential is the
   exact L² adjoint of the exterior derivative and d∘d = 0 to rounding.
3. Connection: d_A = d + A with anti-Hermitian A. Curvature
   F = dA + A∧A (component form Δ_a A_b − Δ_b A_a + [A_a, A_b]).
4. Laplacian sign: Δ_op = d* d (positive, analyst's); heat operators read
   ∂_t + Δ_op.
5. Degree d bundle (m = 1, n = 1): background A_bg = −(2πi d x/L²) dy on the
   fundamental domain, twist φ(x+L, y) = e^{2πi d y/L} φ(x, y), periodic in
   y. Background curvature −2πi d/L² dx∧dy added analytically; discrete flux
   (i/2π) Σ tr ΛF h^{2m} = d exactly.
6. Moment map: Ψ_τ = ΛF_A − (i/2)(φ⊗φ* − τ I), anti-Hermitian.
7. Energy identity: YMH = ‖Ψ_τ‖² + 4‖F^{0,2}‖² + 2‖∂̄_Aφ‖² + 2πτC₁ − 8π²Ch₂
   (the ∂̄ term is squared).
8. Flow normalization: flows advance along g = (−(d*_A F_A + J_{A,φ}),
   −(d*_A d_A φ − ½ φ(τ − |φ|²))), which is HALF the Fréchet gradient of the
   discrete YMH: D_v YMH = −2⟨g, v⟩ exactly. Finite-difference gradient
   checks use that factor. The metric flow ∂u/∂t = −iΨ_rec uses the same
   time normalization, so direct and metric flows share a clock.
9. Metric flow (rank 1, m = 1): H = H₀e^{2u}, iΛF_H = iΛF_{A₀} − Δ_lat u,
   |φ|²_H = |φ₀|² e^{2u}, Δ_lat = Σ_a Δ_a Δ_a (composition of centered
   stencils). Reconstructed unitary pair: Ã = A₀ + (−iΔ_y u)dx + (iΔ_x u)dy,
   φ̃ = e^u φ₀; Ψ_rec = i · metric_flow_rhs(u).
10. Trace columns: t, ymh, vortex_fn, sup_phi_sq, sup_ehat, sup_lambdaF,
    dbar_residual (= ‖∂̄_Aφ‖), f02_residual (= ‖F^{0,2}‖), moment_inf_norm
    (= ‖Ψ_τ‖_∞ = sup_ehat^{1/2}), dt_used; 17 significant digits.
11. final_state.bin: magic KVF1; little-endian u32 {m, N, n, d}; f64
    {L, tau, t_final}; then f64 arrays: A direction-major, site-major,
    matrix entries row-major, re/im interleaved; then φ site-major,
    components in order, re/im interleaved.
";

/// Version tag of the convention sheet.
pub const CONVENTIONS_VERSION: &str = "1";

/// FNV-1a hash of the sheet, rendered as fixed-width hex.
pub fn convention_hash() -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in CONVENTION_SHEET.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

/// Pairing factor between the flow direction and the Fréchet gradient of
/// the discrete energy: D_v E = −GRADIENT_PAIRING_FACTOR · ⟨direction, v⟩.
pub const GRADIENT_PAIRING_FACTOR: f64 = 2.0;

#[cfg(test)]
mod tests {
    #[test]
    fn hash_is_stable_format() {
        let h = super::convention_hash();
        assert_eq!(h.len(), 16);
        assert!(h.chars().all(|c| c.is_ascii_hexdigit()));
    }
}
