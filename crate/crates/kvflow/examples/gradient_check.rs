//! Finite-difference verification of the analytic flow direction.
//!
//! The flow advances along g = −½∇𝒴ℳℋ, so for any coordinate tangent v
//! the centered finite difference of the energy must satisfy
//! D_v 𝒴ℳℋ = −2⟨g, v⟩. This example samples random coordinates of both
//! the connection and the Higgs field on rank-1 and rank-2 bundles and
//! prints the worst relative deviation.

use kvflow::bundle::{random_state, BundleSpec};
use kvflow::lattice::LatticeGeometry;
use kvflow::oracle::gradient_check;

fn main() {
    let tau = 1.5;
    for rank in [1usize, 2] {
        let geom = LatticeGeometry::new(1, 2.0, 16).unwrap();
        let spec = BundleSpec::new(rank, 0, &geom).unwrap();
        let state = random_state(spec, geom, 7, 3).unwrap();
        let dev = gradient_check(&state, tau, 1e-5, 50, 11).unwrap();
        println!("rank {rank}: max relative FD deviation {dev:.3e} (50 coordinates)");
    }
}
