use finslerflow::flow::{run_flow, FlowConfig, FlowKind};
use finslerflow::structure::FinslerStructure;
use std::time::Instant;

fn main() {
    let s = FinslerStructure::perturbed_flat(2, 0.05);
    for (nx, dt, steps) in [(32usize, 1e-4, 40usize), (64, 5e-5, 40)] {
        for kind in [FlowKind::Ricci, FlowKind::Deturck] {
            let mut cfg = FlowConfig::new(kind, nx, 32, dt, dt * steps as f64);
            cfg.diagnostics_every = steps;
            let t0 = Instant::now();
            let run = run_flow(&cfg, &s).unwrap();
            let el = t0.elapsed().as_secs_f64();
            let per_rhs = el / (steps as f64 * 4.0);
            println!(
                "nx={nx} {kind:?}: {:.2} s for {steps} steps -> {:.1} ms/rhs (status {:?})",
                el,
                per_rhs * 1e3,
                run.status
            );
        }
    }
}
