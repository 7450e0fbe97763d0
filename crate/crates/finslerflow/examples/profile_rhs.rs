use finslerflow::flow::grid::SphereBundleGrid;
use finslerflow::flow::spectral::{kernel_specs, Modes};
use finslerflow::flow::state::FlowState;
use finslerflow::flow::{Flow, FlowKind};
use finslerflow::structure::FinslerStructure;
use std::time::Instant;

fn main() {
    let s = FinslerStructure::perturbed_flat(2, 0.05);
    for nx in [32usize, 64] {
        let grid = SphereBundleGrid::new(nx, 32).unwrap();
        let state = FlowState::sample(&s, grid, 0.0).unwrap();
        let flow = Flow::new(grid, FlowKind::Ricci, None).unwrap();
        let specs = kernel_specs();
        let reps = 6;

        let t0 = Instant::now();
        for _ in 0..reps {
            let _ = Modes::from_field(grid, &state.w);
        }
        let f_fwd = t0.elapsed().as_secs_f64() / reps as f64;

        let modes = Modes::from_field(grid, &state.w);
        let t0 = Instant::now();
        for _ in 0..reps {
            let _ = modes.partial_fields(&specs);
        }
        let f_fields = t0.elapsed().as_secs_f64() / reps as f64;

        let t0 = Instant::now();
        for _ in 0..reps {
            let _ = flow.rhs(&state).unwrap();
        }
        let f_rhs = t0.elapsed().as_secs_f64() / reps as f64;

        println!(
            "nx={nx}: forward {:.1} ms, fields {:.1} ms, full rhs {:.1} ms (node loop+dealias ~{:.1} ms)",
            f_fwd * 1e3,
            f_fields * 1e3,
            f_rhs * 1e3,
            (f_rhs - f_fields - f_fwd) * 1e3
        );
    }
}
