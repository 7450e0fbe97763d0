use rayon::prelude::*;
use std::time::Instant;

fn main() {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(2).build().unwrap();
    // warm
    pool.install(|| (0..2).into_par_iter().for_each(|_| {}));

    let reps = 200;
    let t0 = Instant::now();
    for _ in 0..reps {
        pool.install(|| (0..2).into_par_iter().for_each(|_| std::hint::black_box(())));
    }
    println!("rayon empty region: {:.1} us", t0.elapsed().as_secs_f64() / reps as f64 * 1e6);

    let t0 = Instant::now();
    for _ in 0..reps {
        pool.install(|| {
            (0..2).into_par_iter().for_each(|_| {
                // ~0.5 ms of work per task
                let mut acc = 0.0f64;
                for i in 0..200_000 {
                    acc += (i as f64).sqrt();
                }
                std::hint::black_box(acc);
            })
        });
    }
    println!("rayon 2x0.5ms-work region: {:.1} us", t0.elapsed().as_secs_f64() / reps as f64 * 1e6);

    let t0 = Instant::now();
    for _ in 0..reps {
        std::thread::scope(|s| {
            for _ in 0..2 {
                s.spawn(|| {
                    let mut acc = 0.0f64;
                    for i in 0..200_000 {
                        acc += (i as f64).sqrt();
                    }
                    std::hint::black_box(acc);
                });
            }
        });
    }
    println!("scoped 2x0.5ms-work region: {:.1} us", t0.elapsed().as_secs_f64() / reps as f64 * 1e6);

    // sequential baseline for the same total work
    let t0 = Instant::now();
    for _ in 0..reps {
        for _ in 0..2 {
            let mut acc = 0.0f64;
            for i in 0..200_000 {
                acc += (i as f64).sqrt();
            }
            std::hint::black_box(acc);
        }
    }
    println!("sequential same work: {:.1} us", t0.elapsed().as_secs_f64() / reps as f64 * 1e6);
}
