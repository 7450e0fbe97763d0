//! Flow machinery: the grid right-hand side against the pointwise pipeline,
//! stepper accuracy, stationarity, diagnostics, and termination paths.

use finslerflow::curvature::ricci_scalar;
use finslerflow::deturck::{lie_derivative_f2, DeturckField};
use finslerflow::expr::Expr;
use finslerflow::flow::grid::SphereBundleGrid;
use finslerflow::flow::state::FlowState;
use finslerflow::flow::{
    diagnostics, rhs, rk4_step, run_flow, step, Flow, FlowConfig, FlowKind, FlowStatus,
};
use finslerflow::structure::{FinslerStructure, PointTM};

fn perturbed_randers() -> FinslerStructure {
    let conf = Expr::constant(1.0).add(Expr::coord(0).sin().scaled(0.05));
    let a = vec![
        vec![conf.clone(), Expr::constant(0.0)],
        vec![Expr::constant(0.0), conf],
    ];
    FinslerStructure::randers(2, a, vec![Expr::constant(0.1), Expr::constant(0.05)]).unwrap()
}

#[test]
fn grid_rhs_matches_pointwise_pipeline() {
    let s = perturbed_randers();
    let grid = SphereBundleGrid::new(16, 16).unwrap();
    let state = FlowState::sample(&s, grid, 0.0).unwrap();
    let r = rhs(&state, FlowKind::Ricci, None).unwrap();
    // spot-check a spread of nodes against -2 F² Ric from the generic jets
    for (i1, i2, k) in [
        (0usize, 0usize, 0usize),
        (3, 7, 5),
        (9, 2, 11),
        (15, 15, 15),
        (8, 4, 2),
        (5, 12, 9),
    ] {
        let y = grid.fiber_vector(k);
        let p = PointTM::new(
            vec![grid.x_coord(i1), grid.x_coord(i2)],
            vec![y[0], y[1]],
        );
        let f2 = s.f2(&p).unwrap();
        let ric = ricci_scalar(&s, &p).unwrap();
        let want = -2.0 * f2 * ric;
        let got = r[grid.idx(i1, i2, k)];
        assert!(
            (got - want).abs() < 1e-7,
            "rhs at ({i1},{i2},{k}): {got} vs {want}"
        );
    }
}

#[test]
fn deturck_rhs_matches_pointwise_pipeline() {
    let s = perturbed_randers();
    let bg = FinslerStructure::perturbed_flat(2, 0.03);
    let grid = SphereBundleGrid::new(16, 16).unwrap();
    let state = FlowState::sample(&s, grid, 0.0).unwrap();
    let r = rhs(&state, FlowKind::Deturck, Some(&bg)).unwrap();
    let field = DeturckField::new(s.clone(), bg.clone()).unwrap();
    for (i1, i2, k) in [(2usize, 5usize, 3usize), (11, 1, 14), (7, 9, 8)] {
        let y = grid.fiber_vector(k);
        let p = PointTM::new(
            vec![grid.x_coord(i1), grid.x_coord(i2)],
            vec![y[0], y[1]],
        );
        let f2 = s.f2(&p).unwrap();
        let ric = ricci_scalar(&s, &p).unwrap();
        let lie = lie_derivative_f2(&s, &field, &p).unwrap();
        let want = -2.0 * f2 * ric - lie;
        let got = r[grid.idx(i1, i2, k)];
        assert!(
            (got - want).abs() < 1e-7,
            "gauge rhs at ({i1},{i2},{k}): {got} vs {want}"
        );
    }
}

#[test]
fn deturck_rhs_reduces_to_ricci_with_matching_background() {
    let s = perturbed_randers();
    let grid = SphereBundleGrid::new(16, 16).unwrap();
    let state = FlowState::sample(&s, grid, 0.0).unwrap();
    let a = rhs(&state, FlowKind::Ricci, None).unwrap();
    let b = rhs(&state, FlowKind::Deturck, Some(&s)).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12, "gauge term should vanish: {}", x - y);
    }
}

#[test]
fn flat_rhs_is_zero_and_flow_stationary() {
    let grid = SphereBundleGrid::new(16, 16).unwrap();
    let s = FinslerStructure::euclidean(2);
    let state = FlowState::sample(&s, grid, 0.0).unwrap();
    let r = rhs(&state, FlowKind::Ricci, None).unwrap();
    assert!(r.iter().all(|v| v.abs() < 1e-12));
    let next = step(&state, FlowKind::Ricci, None, 1e-3).unwrap();
    assert!(state.sup_diff(&next) < 1e-14);
}

#[test]
fn constant_randers_state_is_stationary() {
    let grid = SphereBundleGrid::new(16, 16).unwrap();
    let s = FinslerStructure::randers_flat(2, &[0.3, 0.0]).unwrap();
    let state = FlowState::sample(&s, grid, 0.0).unwrap();
    let r = rhs(&state, FlowKind::Ricci, None).unwrap();
    assert!(r.iter().all(|v| v.abs() < 1e-10));
}

#[test]
fn rk4_scalar_local_error_is_fifth_order() {
    // dW/dt = −W through the generic stepper: local error ~ h⁵/120
    let f = |_t: f64, y: &[f64]| -> finslerflow::Result<Vec<f64>> {
        Ok(y.iter().map(|v| -v).collect())
    };
    let mut errs = Vec::new();
    for h in [0.1, 0.05] {
        let got = rk4_step(&[1.0], 0.0, h, f).unwrap()[0];
        errs.push((got - (-h).exp()).abs());
    }
    let order = (errs[0] / errs[1]).log2();
    assert!(
        (order - 5.0).abs() < 0.2,
        "local order {order}, errors {errs:?}"
    );
}

#[test]
fn ricci_run_self_convergence_is_fourth_order() {
    // strong perturbation so the time-truncation error clears the roundoff
    // floor; reference at dt/8
    let s = FinslerStructure::perturbed_flat(2, 0.4);
    let t_end = 0.05;
    let run_at = |dt: f64| {
        let cfg = FlowConfig::new(FlowKind::Ricci, 16, 16, dt, t_end);
        let run = run_flow(&cfg, &s).unwrap();
        assert_eq!(run.status, FlowStatus::Completed);
        run.snapshots.last().unwrap().clone()
    };
    let coarse = run_at(5e-3);
    let mid = run_at(2.5e-3);
    let fine = run_at(6.25e-4);
    let e1 = coarse.sup_diff(&fine);
    let e2 = mid.sup_diff(&fine);
    let order = (e1 / e2).log2();
    assert!(
        order >= 3.5,
        "observed order {order} ({e1:.3e} vs {e2:.3e})"
    );
}

#[test]
fn diagnostics_fields_and_flat_values() {
    let grid = SphereBundleGrid::new(16, 16).unwrap();
    let s = FinslerStructure::euclidean(2);
    let state = FlowState::sample(&s, grid, 0.0).unwrap();
    let rec = diagnostics(&state).unwrap();
    assert!(rec.max_abs_ric < 1e-12);
    assert!((rec.min_metric_eig - 1.0).abs() < 1e-10);
    assert!(rec.integrability_residual < 1e-12);
    assert!((rec.parabolicity_margin - 1.0).abs() < 1e-10);
    assert_eq!(rec.sup_step_change, 0.0);
    // schema carries exactly the six named fields
    let json = serde_json::to_value(rec).unwrap();
    let obj = json.as_object().unwrap();
    let mut keys: Vec<_> = obj.keys().cloned().collect();
    keys.sort();
    assert_eq!(
        keys,
        vec![
            "integrability_residual",
            "max_abs_ric",
            "min_metric_eig",
            "parabolicity_margin",
            "sup_step_change",
            "t"
        ]
    );
}

#[test]
fn randers_state_integrability_residual_is_tiny() {
    let grid = SphereBundleGrid::new(16, 16).unwrap();
    let s = FinslerStructure::randers_flat(2, &[0.3, 0.0]).unwrap();
    let state = FlowState::sample(&s, grid, 0.0).unwrap();
    let rec = diagnostics(&state).unwrap();
    assert!(
        rec.integrability_residual < 1e-8,
        "residual {}",
        rec.integrability_residual
    );
}

#[test]
fn cfl_guard_rejects_large_steps() {
    let s = FinslerStructure::euclidean(2);
    let cfg = FlowConfig::new(FlowKind::Ricci, 16, 16, 1.0, 2.0);
    let got = run_flow(&cfg, &s);
    assert!(matches!(
        got,
        Err(finslerflow::FinslerError::InvalidConfig(_))
    ));
}

#[test]
fn degenerate_scale_terminates_with_degeneracy_status() {
    // valid structure whose metric sits below a raised eigenvalue floor:
    // the run must stop cleanly at the first diagnostic, not error out
    let s = FinslerStructure::euclidean(2).scaled(0.4).unwrap();
    let mut cfg = FlowConfig::new(FlowKind::Ricci, 16, 16, 1e-3, 0.05);
    cfg.tolerances.min_eig = 0.5;
    let run = run_flow(&cfg, &s).unwrap();
    match run.status {
        FlowStatus::Degeneracy { t, .. } => assert_eq!(t, 0.0),
        other => panic!("expected degeneracy stop, got {other:?}"),
    }
}

#[test]
fn run_reports_monotone_time_and_reconstruction() {
    let s = FinslerStructure::perturbed_flat(2, 0.05);
    let mut cfg = FlowConfig::new(FlowKind::Ricci, 16, 16, 1e-3, 0.02);
    cfg.diagnostics_every = 5;
    let run = run_flow(&cfg, &s).unwrap();
    assert_eq!(run.status, FlowStatus::Completed);
    assert!(run
        .records
        .windows(2)
        .all(|w| w[1].t > w[0].t));
    // g_ij y^i y^j from the evolved interpolant reproduces F² at the nodes
    let last = run.snapshots.last().unwrap();
    let gs = last.to_structure();
    let grid = last.grid;
    for (i1, i2, k) in [(0usize, 0usize, 0usize), (7, 3, 9), (12, 14, 4)] {
        let y = grid.fiber_vector(k);
        let p = PointTM::new(
            vec![grid.x_coord(i1), grid.x_coord(i2)],
            vec![y[0], y[1]],
        );
        let jet = gs.f2_jet(&p, 2).unwrap();
        let w = last.w[grid.idx(i1, i2, k)];
        let mut gyy = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let idx = finslerflow::jet::MultiIndex::zero(4).plus(2 + i).plus(2 + j);
                gyy += 0.5 * jet.partial(&idx).unwrap() * y[i] * y[j];
            }
        }
        assert!((gyy - w).abs() < 1e-12, "reconstruction {gyy} vs {w}");
    }
}

#[test]
fn rhs_timing_smoke() {
    // not an assertion, a budget probe: prints per-evaluation cost
    let s = FinslerStructure::perturbed_flat(2, 0.05);
    let grid = SphereBundleGrid::new(32, 32).unwrap();
    let state = FlowState::sample(&s, grid, 0.0).unwrap();
    let flow = Flow::new(grid, FlowKind::Ricci, None).unwrap();
    let start = std::time::Instant::now();
    let reps = 10;
    for _ in 0..reps {
        let _ = flow.rhs(&state).unwrap();
    }
    let per = start.elapsed().as_secs_f64() / reps as f64;
    println!("ricci rhs at 32x32x32: {:.1} ms", per * 1e3);
    let bgf = Flow::new(grid, FlowKind::Deturck, Some(&s)).unwrap();
    let start = std::time::Instant::now();
    for _ in 0..reps {
        let _ = bgf.rhs(&state).unwrap();
    }
    let per = start.elapsed().as_secs_f64() / reps as f64;
    println!("gauge rhs at 32x32x32: {:.1} ms", per * 1e3);
}
