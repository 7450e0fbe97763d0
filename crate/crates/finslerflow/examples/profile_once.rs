use finslerflow::flow::grid::SphereBundleGrid;
use finslerflow::flow::state::FlowState;
use finslerflow::flow::{Flow, FlowKind};
use finslerflow::structure::FinslerStructure;

fn main() {
    let s = FinslerStructure::perturbed_flat(2, 0.05);
    let grid = SphereBundleGrid::new(64, 32).unwrap();
    let state = FlowState::sample(&s, grid, 0.0).unwrap();
    for kind in [FlowKind::Ricci, FlowKind::Deturck] {
        let flow = Flow::new(grid, kind, Some(&s)).unwrap();
        eprintln!("== {kind:?}");
        for _ in 0..4 {
            let t0 = std::time::Instant::now();
            let _ = flow.rhs(&state).unwrap();
            eprintln!("  rhs total {:.1} ms", t0.elapsed().as_secs_f64() * 1e3);
        }
    }
}
