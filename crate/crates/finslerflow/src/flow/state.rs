//! Flow state: samples of F² on the unit-fiber grid, its spectral
//! interpolant as a Finsler structure, and snapshot serialization.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::grid::SphereBundleGrid;
use super::spectral::{assemble_f2_jet, f2_taylor_basis, polar_of, Modes};
use crate::error::{FinslerError, Result};
use crate::jet::Jet;
use crate::structure::{EvalScalar, F2Field, FinslerStructure, PointTM};

/// W = F² restricted to unit fiber vectors; the full field is the
/// 2-homogeneous extension F²(x, r y(θ)) = r² W(x, θ).
#[derive(Clone)]
pub struct FlowState {
    pub t: f64,
    pub grid: SphereBundleGrid,
    /// Row-major over (x1, x2, θ), θ fastest.
    pub w: Vec<f64>,
}

impl FlowState {
    /// Sample an analytic structure on the grid.
    pub fn sample(s: &FinslerStructure, grid: SphereBundleGrid, t: f64) -> Result<FlowState> {
        if s.dim() != 2 {
            return Err(FinslerError::InvalidConfig(
                "grid flows are limited to two base dimensions".into(),
            ));
        }
        let mut w = vec![0.0; grid.nodes()];
        for i1 in 0..grid.nx() {
            for i2 in 0..grid.nx() {
                for k in 0..grid.ntheta() {
                    let y = grid.fiber_vector(k);
                    let p = PointTM::new(
                        vec![grid.x_coord(i1), grid.x_coord(i2)],
                        vec![y[0], y[1]],
                    );
                    w[grid.idx(i1, i2, k)] = s.f2(&p)?;
                }
            }
        }
        let st = FlowState { t, grid, w };
        st.check_positive()?;
        Ok(st)
    }

    pub fn check_positive(&self) -> Result<()> {
        for (i, &v) in self.w.iter().enumerate() {
            if !v.is_finite() {
                return Err(FinslerError::NonFinite { t: self.t });
            }
            if v <= 0.0 {
                let k = i % self.grid.ntheta();
                let b = i / self.grid.ntheta();
                return Err(FinslerError::StructuralDegeneracy {
                    min_eig: v,
                    location: Some(format!(
                        "node ({}, {}, {}) at t = {:.6e}",
                        b / self.grid.nx(),
                        b % self.grid.nx(),
                        k,
                        self.t
                    )),
                });
            }
        }
        Ok(())
    }

    pub fn modes(&self) -> Modes {
        Modes::from_field(self.grid, &self.w)
    }

    /// Spectral interpolant as a grid-backed Finsler structure.
    pub fn to_structure(&self) -> FinslerStructure {
        FinslerStructure::from_grid(Arc::new(GridField {
            grid: self.grid,
            modes: self.modes(),
        }))
    }

    pub fn sup_diff(&self, other: &FlowState) -> f64 {
        self.w
            .iter()
            .zip(&other.w)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn sup_abs(&self) -> f64 {
        self.w.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Jet of F² of the state's trigonometric interpolant at a continuous point
/// of the slit bundle (r = |y| need not be 1).
pub fn spectral_jet(
    state: &FlowState,
    x: [f64; 2],
    y: [f64; 2],
    order: usize,
) -> Result<Jet<f64>> {
    let modes = state.modes();
    grid_jet_from_modes(&modes, &PointTM::new(x.to_vec(), y.to_vec()), order)
}

pub(crate) fn grid_jet_from_modes(
    modes: &Modes,
    p: &PointTM,
    order: usize,
) -> Result<Jet<f64>> {
    let (_, th) = polar_of(&p.y)?;
    let w = modes.point_partials([p.x[0], p.x[1]], th, order);
    let basis = f2_taylor_basis::<f64>([p.y[0], p.y[1]], th, order, order)?;
    Ok(assemble_f2_jet(&basis, &w))
}

/// Spectral interpolant of a grid state as an F² field.
pub struct GridField {
    pub(crate) grid: SphereBundleGrid,
    pub(crate) modes: Modes,
}

impl F2Field for GridField {
    fn dim(&self) -> usize {
        2
    }

    fn f2_jet(&self, p: &PointTM, order: usize) -> Result<Jet<f64>> {
        grid_jet_from_modes(&self.modes, p, order)
    }

    fn f2_jet_nested(&self, p: &PointTM, order: usize) -> Result<Jet<Jet<f64>>> {
        let (_, th) = polar_of(&p.y)?;
        let taylor = order + 2;
        let w = self.modes.point_partials([p.x[0], p.x[1]], th, taylor);
        let y = [
            <Jet<f64> as EvalScalar>::lift_y(p.y[0], 0, 2),
            <Jet<f64> as EvalScalar>::lift_y(p.y[1], 1, 2),
        ];
        let basis = f2_taylor_basis::<Jet<f64>>(y, th, order, taylor)?;
        Ok(assemble_f2_jet(&basis, &w))
    }

    fn fiber_profile(&self, x: [f64; 2]) -> Option<Box<dyn Fn(f64) -> f64 + Send + Sync>> {
        let prof = self.modes.theta_profile(x);
        let nt = self.grid.ntheta();
        Some(Box::new(move |theta: f64| {
            let mut acc = 0.0;
            for (k, p) in prof.iter().enumerate() {
                let w = super::fft::wavenumber(nt, k) as f64 * theta;
                acc += p.re * w.cos() - p.im * w.sin();
            }
            acc
        }))
    }
}

/// Snapshot file schema.
#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct Snapshot {
    pub t: f64,
    #[serde(rename = "Nx")]
    pub nx: usize,
    #[serde(rename = "Ntheta")]
    pub ntheta: usize,
    #[serde(rename = "W")]
    pub w: Vec<f64>,
}

impl Snapshot {
    pub fn of(state: &FlowState) -> Snapshot {
        Snapshot {
            t: state.t,
            nx: state.grid.nx(),
            ntheta: state.grid.ntheta(),
            w: state.w.clone(),
        }
    }

    pub fn into_state(self) -> Result<FlowState> {
        let grid = SphereBundleGrid::new(self.nx, self.ntheta)?;
        if self.w.len() != grid.nodes() {
            return Err(FinslerError::InvalidConfig(format!(
                "snapshot W has {} entries, grid wants {}",
                self.w.len(),
                grid.nodes()
            )));
        }
        Ok(FlowState {
            t: self.t,
            grid,
            w: self.w,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::MultiIndex;

    #[test]
    fn flat_state_has_identity_metric_jets() {
        let grid = SphereBundleGrid::new(16, 16).unwrap();
        let s = FinslerStructure::euclidean(2);
        let state = FlowState::sample(&s, grid, 0.0).unwrap();
        assert!(state.w.iter().all(|&v| (v - 1.0).abs() < 1e-14));
        let jet = spectral_jet(&state, [0.3, 0.4], [0.6, 0.8], 4).unwrap();
        assert!((jet.value() - 1.0).abs() < 1e-12);
        let g11 = jet.partial(&MultiIndex::new(&[0, 0, 2, 0])).unwrap() * 0.5;
        let g12 = jet.partial(&MultiIndex::new(&[0, 0, 1, 1])).unwrap() * 0.5;
        assert!((g11 - 1.0).abs() < 1e-12);
        assert!(g12.abs() < 1e-12);
    }

    #[test]
    fn randers_state_jets_match_analytic() {
        let grid = SphereBundleGrid::new(16, 16).unwrap();
        let s = FinslerStructure::randers_flat(2, &[0.3, 0.0]).unwrap();
        let state = FlowState::sample(&s, grid, 0.0).unwrap();
        let gs = state.to_structure();
        for (x, y) in [
            ([0.0, 0.0], [1.0, 0.0]),
            ([1.1, 2.2], [0.3, -0.8]),
            ([4.0, 5.5], [1.5, 0.7]),
        ] {
            let p = PointTM::new(x.to_vec(), y.to_vec());
            let ja = s.f2_jet(&p, 4).unwrap();
            let jg = gs.f2_jet(&p, 4).unwrap();
            for (a, b) in ja.coeffs().iter().zip(jg.coeffs()) {
                assert!((a - b).abs() < 1e-8, "jet entry {a} vs {b}");
            }
        }
    }

    #[test]
    fn homogeneous_extension_by_construction() {
        let grid = SphereBundleGrid::new(16, 16).unwrap();
        let s = FinslerStructure::randers_flat(2, &[0.2, 0.1]).unwrap();
        let state = FlowState::sample(&s, grid, 0.0).unwrap();
        let th = 1.234f64;
        for lam in [0.5, 2.0, 7.0] {
            let j1 = spectral_jet(&state, [0.7, 0.9], [th.cos(), th.sin()], 0).unwrap();
            let j2 = spectral_jet(
                &state,
                [0.7, 0.9],
                [lam * th.cos(), lam * th.sin()],
                0,
            )
            .unwrap();
            assert!((j2.value() - lam * lam * j1.value()).abs() < 1e-11);
        }
    }

    #[test]
    fn snapshot_roundtrip() {
        let grid = SphereBundleGrid::new(16, 16).unwrap();
        let s = FinslerStructure::perturbed_flat(2, 0.05);
        let state = FlowState::sample(&s, grid, 0.25).unwrap();
        let snap = Snapshot::of(&state);
        let json = serde_json::to_string(&snap).unwrap();
        let back: Snapshot = serde_json::from_str(&json).unwrap();
        let st2 = back.into_state().unwrap();
        assert_eq!(st2.t, state.t);
        assert_eq!(st2.w, state.w);
    }
}
