use finslerflow::flow::grid::SphereBundleGrid;
use finslerflow::flow::state::FlowState;
use finslerflow::flow::{Flow, FlowKind};
use finslerflow::structure::FinslerStructure;

fn main() {
    let grid = SphereBundleGrid::new(16, 16).unwrap();
    let flat = FinslerStructure::euclidean(2);
    let flow = Flow::new(grid, FlowKind::Deturck, Some(&flat)).unwrap();
    let eps = 1e-7;
    for (kx, m) in [(1usize, 0usize), (1, 2), (1, 3), (1, 4), (1, 6), (1, 8), (2, 4), (3, 6)] {
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
        let state = FlowState { t: 0.0, grid, w };
        let r = flow.rhs(&state).unwrap();
        let mut num = 0.0;
        let mut den = 0.0;
        for i1 in 0..16 {
            for i2 in 0..16 {
                for k in 0..16 {
                    let basis = (kx as f64 * grid.x_coord(i1)).cos() * (m as f64 * grid.theta(k)).cos();
                    num += r[grid.idx(i1, i2, k)] * basis;
                    den += basis * basis;
                }
            }
        }
        println!("gauged mode (kx={kx}, m={m}): lambda = {:+.4e}", num / den / eps);
    }
}
