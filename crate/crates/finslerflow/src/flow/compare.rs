//! Flow correspondence experiment: run the plain flow and the gauge-fixed
//! flow from the same data, transport the gauge-fixed solution back through
//! the integrated diffeomorphisms, and report the discrepancy history.

use super::grid::{SphereBundleGrid, TWO_PI};
use super::{run_flow, Flow, FlowConfig, FlowKind, FlowRun, FlowStatus};
use crate::deturck::{integrate_diffeo_at_times, pullback_state, TimeField};
use crate::error::{FinslerError, Result};
use crate::structure::FinslerStructure;

pub struct CompareResult {
    /// (t, sup-norm relative discrepancy) per retained snapshot.
    pub history: Vec<(f64, f64)>,
    pub final_discrepancy: f64,
    pub ricci: FlowRun,
    pub deturck: FlowRun,
}

/// Gauge field slices stored at snapshot times: values and base Jacobians on
/// the base grid, linearly interpolated in t and Taylor-expanded around the
/// nearest node in x.
struct XiSlices {
    nx: usize,
    dx: f64,
    times: Vec<f64>,
    xi: Vec<Vec<[f64; 2]>>,
    dxi: Vec<Vec<[[f64; 2]; 2]>>,
}

impl XiSlices {
    fn locate(&self, t: f64) -> (usize, usize, f64) {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return (0, 0, 0.0);
        }
        if t >= self.times[n - 1] {
            return (n - 1, n - 1, 0.0);
        }
        let mut hi = 1;
        while self.times[hi] < t {
            hi += 1;
        }
        let lo = hi - 1;
        let w = (t - self.times[lo]) / (self.times[hi] - self.times[lo]);
        (lo, hi, w)
    }

    fn node_and_offset(&self, x: [f64; 2]) -> (usize, [f64; 2]) {
        let mut idx = [0usize; 2];
        let mut delta = [0.0f64; 2];
        for d in 0..2 {
            let q = (x[d] / self.dx).round();
            let i = q.rem_euclid(self.nx as f64) as usize % self.nx;
            let mut off = x[d] - q * self.dx;
            off -= TWO_PI * (off / TWO_PI).round();
            idx[d] = i;
            delta[d] = off;
        }
        (idx[0] * self.nx + idx[1], delta)
    }

    fn xi_at(&self, slice: usize, x: [f64; 2]) -> [f64; 2] {
        let (node, d) = self.node_and_offset(x);
        let v = self.xi[slice][node];
        let j = self.dxi[slice][node];
        [
            v[0] + j[0][0] * d[0] + j[0][1] * d[1],
            v[1] + j[1][0] * d[0] + j[1][1] * d[1],
        ]
    }

    fn jac_at(&self, slice: usize, x: [f64; 2]) -> [[f64; 2]; 2] {
        let (node, _) = self.node_and_offset(x);
        self.dxi[slice][node]
    }
}

impl TimeField for XiSlices {
    fn eval(&self, t: f64, x: [f64; 2], _theta: f64) -> Result<[f64; 2]> {
        let (lo, hi, w) = self.locate(t);
        let a = self.xi_at(lo, x);
        let b = self.xi_at(hi, x);
        Ok([a[0] + w * (b[0] - a[0]), a[1] + w * (b[1] - a[1])])
    }

    fn jacobian(&self, t: f64, x: [f64; 2], _theta: f64) -> Result<[[f64; 2]; 2]> {
        let (lo, hi, w) = self.locate(t);
        let a = self.jac_at(lo, x);
        let b = self.jac_at(hi, x);
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = a[i][j] + w * (b[i][j] - a[i][j]);
            }
        }
        Ok(out)
    }

    fn fiber_independent(&self) -> bool {
        true
    }
}

fn require_completed(run: &FlowRun, which: &str) -> Result<()> {
    match &run.status {
        FlowStatus::Completed => Ok(()),
        s => Err(FinslerError::InvalidConfig(format!(
            "{which} flow terminated early with status {}",
            s.label()
        ))),
    }
}

/// Run both flows from f0 (Riemannian, so the gauge field lives on the
/// base), pull the gauge-fixed solution back through the integrated
/// diffeomorphisms, and report sup-norm relative discrepancies per snapshot.
pub fn compare_pullback(config: &FlowConfig, f0: &FinslerStructure) -> Result<CompareResult> {
    if !f0.is_riemannian() {
        return Err(FinslerError::InvalidConfig(
            "the correspondence experiment needs Riemannian initial data".into(),
        ));
    }
    let mut ricci_cfg = config.clone();
    ricci_cfg.kind = FlowKind::Ricci;
    ricci_cfg.background = None;
    let mut det_cfg = config.clone();
    det_cfg.kind = FlowKind::Deturck;
    det_cfg.background = Some(f0.clone());

    let ricci_run = run_flow(&ricci_cfg, f0)?;
    require_completed(&ricci_run, "direct")?;
    let det_run = run_flow(&det_cfg, f0)?;
    require_completed(&det_run, "gauge-fixed")?;
    if ricci_run.snapshots.len() != det_run.snapshots.len() {
        return Err(FinslerError::InvalidConfig(
            "snapshot cadences of the two runs disagree".into(),
        ));
    }

    let grid = SphereBundleGrid::new(config.nx, config.ntheta)?;
    let flow = Flow::new(grid, FlowKind::Deturck, Some(f0))?;
    let mut times = Vec::new();
    let mut xi = Vec::new();
    let mut dxi = Vec::new();
    for snap in &det_run.snapshots {
        let (v, j) = flow.xi_base_slice(snap)?;
        times.push(snap.t);
        xi.push(v);
        dxi.push(j);
    }
    let slices = XiSlices {
        nx: grid.nx(),
        dx: grid.dx(),
        times: times.clone(),
        xi,
        dxi,
    };

    let diffeos = integrate_diffeo_at_times(&slices, grid, 0.0, &times, config.dt)?;

    let mut history = Vec::with_capacity(times.len());
    for (k, phi) in diffeos.iter().enumerate() {
        let tilde = det_run.snapshots[k].to_structure();
        let pb = pullback_state(phi, &tilde, times[k])?;
        let direct = &ricci_run.snapshots[k];
        let disc = pb.sup_diff(direct) / direct.sup_abs();
        history.push((times[k], disc));
    }
    let final_discrepancy = history.last().map(|&(_, d)| d).unwrap_or(0.0);
    Ok(CompareResult {
        history,
        final_discrepancy,
        ricci: ricci_run,
        deturck: det_run,
    })
}
