use finslerflow::flow::grid::SphereBundleGrid;
use finslerflow::flow::state::FlowState;
use finslerflow::flow::{diagnostics, Flow, FlowKind};
use finslerflow::structure::FinslerStructure;

fn theta_spectrum_max(state: &FlowState) -> Vec<f64> {
    // max |mode| over base nodes per theta harmonic
    let grid = state.grid;
    let nt = grid.ntheta();
    let mut acc = vec![0.0f64; nt];
    for b in 0..grid.base_nodes() {
        let row = &state.w[b * nt..(b + 1) * nt];
        for m in 0..nt {
            let mut re = 0.0;
            let mut im = 0.0;
            for (k, &v) in row.iter().enumerate() {
                let ph = -2.0 * std::f64::consts::PI * (m * k) as f64 / nt as f64;
                re += v * ph.cos();
                im += v * ph.sin();
            }
            let mag = (re * re + im * im).sqrt() / nt as f64;
            acc[m] = acc[m].max(mag);
        }
    }
    acc
}

fn main() {
    let s = FinslerStructure::perturbed_flat(2, 0.05);
    let grid = SphereBundleGrid::new(16, 16).unwrap();
    let mut state = FlowState::sample(&s, grid, 0.0).unwrap();
    let flow = Flow::new(grid, FlowKind::Ricci, None).unwrap();
    for step in 0..=20 {
        if step % 5 == 0 {
            let rec = diagnostics(&state).unwrap();
            let spec = theta_spectrum_max(&state);
            println!(
                "step {step:3} t={:.4} integ={:.3e} ric={:.3e} spec m=1..5: {:.2e} {:.2e} {:.2e} {:.2e} {:.2e}  m=7,8: {:.2e} {:.2e}",
                state.t, rec.integrability_residual, rec.max_abs_ric,
                spec[1], spec[2], spec[3], spec[4], spec[5], spec[7], spec[8]
            );
        }
        state = flow.step(&state, 1e-3).unwrap();
        state.t = (step + 1) as f64 * 1e-3;
    }
}
