//! Numerical toolkit for thin tubes around closed curves in R^3: harmonic
//! fields in tube coordinates, the isochronous cross-section flow and its
//! KAM-style diagnostics, and globally defined Beltrami fields synthesized
//! from point sources or spherical wave expansions.

pub mod chart;
pub mod curve;
pub mod error;
pub mod flow;
pub mod grid;
pub mod harmonic;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};

#[cfg(test)]
pub(crate) mod testutil {
    //! Solved tubes shared across test modules; the Neumann solve dominates
    //! test time, so each (curve, eps) pair is solved once per process.

    use std::collections::HashMap;
    use std::sync::{Arc, LazyLock, Mutex};

    use crate::chart::TubeChart;
    use crate::curve::trefoil_raw;
    use crate::flow::{boundary_map, field_x, BoundaryMap, FlowField};
    use crate::grid::TubeGrid;
    use crate::solver::{solve_harmonic, SolveOptions, SpectralCoeffs};

    pub struct SolvedTube {
        pub chart: TubeChart,
        pub psi: Arc<SpectralCoeffs>,
    }

    static CACHE: LazyLock<Mutex<HashMap<u64, Arc<SolvedTube>>>> =
        LazyLock::new(|| Mutex::new(HashMap::new()));

    /// Harmonic potential on the arc-length trefoil tube of radius eps.
    pub fn trefoil_tube(eps: f64) -> Arc<SolvedTube> {
        let mut cache = CACHE.lock().unwrap();
        if let Some(v) = cache.get(&eps.to_bits()) {
            return v.clone();
        }
        let curve = trefoil_raw().arclength_reparam(160).unwrap();
        let chart = TubeChart::new(Arc::new(curve), eps).unwrap();
        let grid = TubeGrid::new(256, 14, 32, chart.period()).unwrap();
        let sol = solve_harmonic(&chart, &grid, &SolveOptions::default()).unwrap();
        let psi = Arc::new(SpectralCoeffs::from_field(&sol.psi));
        let tube = Arc::new(SolvedTube { chart, psi });
        cache.insert(eps.to_bits(), tube.clone());
        tube
    }

    /// Cross-section flow field of the trefoil tube.
    pub fn trefoil_field(eps: f64) -> FlowField {
        let tube = trefoil_tube(eps);
        field_x(&tube.chart, &tube.psi).unwrap()
    }

    static MAP_CACHE: LazyLock<Mutex<HashMap<u64, Arc<BoundaryMap>>>> =
        LazyLock::new(|| Mutex::new(HashMap::new()));

    /// Boundary circle map of the trefoil tube, 128 seeds at tol 1e-12.
    pub fn trefoil_map(eps: f64) -> Arc<BoundaryMap> {
        let mut cache = MAP_CACHE.lock().unwrap();
        if let Some(v) = cache.get(&eps.to_bits()) {
            return v.clone();
        }
        let map = Arc::new(boundary_map(&trefoil_field(eps), 128, 1e-12).unwrap());
        cache.insert(eps.to_bits(), map.clone());
        map
    }
}
