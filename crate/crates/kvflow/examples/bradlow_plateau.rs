//! The Bradlow obstruction: below τ_c = 4πd/L² no vortex with φ ≢ 0
//! exists, and the flow settles instead on the φ = 0 stratum minimum with
//! energy 4π²d²/L² + τ²L²/4 (plateau). This example runs the same theta
//! initial data at a feasible and an infeasible τ and compares the final
//! energies with the closed forms 2πτd and the plateau value.

use std::f64::consts::PI;

use kvflow::bundle::{background_state, theta_section, BundleSpec};
use kvflow::energy::{bradlow_check, plateau_energy};
use kvflow::flow::{integrate, FlowSchedule, StepMethod};
use kvflow::lattice::LatticeGeometry;

fn main() {
    let l = (4.0 * PI).sqrt(); // τ_c = 1
    let geom = LatticeGeometry::new(1, l, 32).unwrap();
    let spec = BundleSpec::new(1, 1, &geom).unwrap();
    let mut state = background_state(spec, geom).unwrap();
    *state.phi_mut() = theta_section(&spec, &geom, 8).unwrap();

    for tau in [2.0f64, 0.5] {
        let b = bradlow_check(1, l, tau);
        let schedule = FlowSchedule {
            t_end: 60.0,
            record_every: 1000,
            eps_vortex: b.feasible.then_some(1e-3),
            method: StepMethod::Rk4,
            ..FlowSchedule::default()
        };
        let run = integrate(&state, tau, &schedule).unwrap();
        let last = run.trace.last().unwrap();
        let target = if b.feasible {
            2.0 * PI * tau
        } else {
            plateau_energy(1, l, tau)
        };
        println!(
            "τ = {tau}: {} (τ_c = {}), final ymh {:.6} vs {} {:.6}, final sup|φ| {:.3e}",
            if b.feasible { "feasible" } else { "infeasible" },
            b.threshold,
            last.ymh,
            if b.feasible { "2πτd" } else { "plateau" },
            target,
            last.sup_phi_sq.sqrt()
        );
    }
}
