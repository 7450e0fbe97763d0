use finslerflow::flow::fft::{plans, Axis};
use finslerflow::flow::grid::SphereBundleGrid;
use rustfft::num_complex::Complex64;
use std::time::Instant;

fn main() {
    for nx in [32usize, 64] {
        let grid = SphereBundleGrid::new(nx, 32).unwrap();
        let f = plans(grid);
        let mut buf = vec![Complex64::new(1.0, 0.5); grid.nodes()];
        let reps = 40;
        for (name, axis) in [("theta", 0), ("x2", 1), ("x1", 2)] {
            let t0 = Instant::now();
            for _ in 0..reps {
                let a = match axis {
                    0 => Axis::Theta,
                    1 => Axis::X2,
                    _ => Axis::X1,
                };
                f.transform_axis(&mut buf, a, false);
            }
            println!("nx={nx} axis {name}: {:.2} ms", t0.elapsed().as_secs_f64() / reps as f64 * 1e3);
        }
    }
}
