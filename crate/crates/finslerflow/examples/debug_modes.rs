use finslerflow::curvature::ricci_scalar;
use finslerflow::flow::grid::SphereBundleGrid;
use finslerflow::flow::state::FlowState;
use finslerflow::flow::{Flow, FlowKind};
use finslerflow::structure::PointTM;

fn main() {
    let grid = SphereBundleGrid::new(16, 16).unwrap();
    let flow = Flow::new(grid, FlowKind::Ricci, None).unwrap();
    let eps = 1e-7;
    for (kx, m) in [(1usize, 0usize), (1, 2), (1, 4), (1, 6), (1, 8), (2, 4), (0, 4)] {
        let mut w = vec![1.0; grid.nodes()];
        for i1 in 0..16 {
            for i2 in 0..16 {
                for k in 0..16 {
                    let x1 = grid.x_coord(i1);
                    let th = grid.theta(k);
                    w[grid.idx(i1, i2, k)] += eps * (kx as f64 * x1).cos() * (m as f64 * th).cos();
                }
            }
        }
        let state = FlowState { t: 0.0, grid, w: w.clone() };
        let r = flow.rhs(&state).unwrap();
        // project rhs onto the same mode and onto the worst node
        let mut num = 0.0;
        let mut den = 0.0;
        let mut maxr = 0.0f64;
        for i1 in 0..16 {
            for i2 in 0..16 {
                for k in 0..16 {
                    let basis = (kx as f64 * grid.x_coord(i1)).cos() * (m as f64 * grid.theta(k)).cos();
                    let idx = grid.idx(i1, i2, k);
                    num += r[idx] * basis;
                    den += basis * basis;
                    maxr = maxr.max(r[idx].abs());
                }
            }
        }
        let lambda = num / den / eps;
        println!("mode (kx={kx}, m={m}): lambda = {lambda:+.3e}, max|rhs| = {maxr:.3e}");
        // kernel vs generic at one node
        let gs = state.to_structure();
        let (i1, i2, k) = (3usize, 0usize, 5usize);
        let y = grid.fiber_vector(k);
        let p = PointTM::new(vec![grid.x_coord(i1), grid.x_coord(i2)], vec![y[0], y[1]]);
        let ric = ricci_scalar(&gs, &p).unwrap();
        let f2 = 1.0 + eps * (kx as f64 * grid.x_coord(i1)).cos() * (m as f64 * grid.theta(k)).cos();
        let want = -2.0 * f2 * ric;
        let got = r[grid.idx(i1, i2, k)];
        println!("   kernel rhs {got:+.6e} vs generic {want:+.6e}  (diff {:.2e})", (got - want).abs());
    }
}
