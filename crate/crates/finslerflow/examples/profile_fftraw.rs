use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::time::Instant;

fn main() {
    let mut planner = FftPlanner::<f64>::new();
    for len in [32usize, 64] {
        let plan = planner.plan_fft_forward(len);
        let total = 32768usize * 4;
        let mut buf = vec![Complex64::new(1.0, 0.5); total];
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        // warm
        plan.process_with_scratch(&mut buf, &mut scratch);
        let reps = 50;
        let t0 = Instant::now();
        for _ in 0..reps {
            plan.process_with_scratch(&mut buf, &mut scratch);
        }
        let dt = t0.elapsed().as_secs_f64() / reps as f64;
        let nffts = total / len;
        println!(
            "len {len}: {:.3} ms for {} ffts ({:.0} ns/fft, {:.2} Gflop/s)",
            dt * 1e3,
            nffts,
            dt / nffts as f64 * 1e9,
            (5.0 * total as f64 * (len as f64).log2()) / dt / 1e9
        );
    }
}
