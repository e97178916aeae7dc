use std::sync::Arc;
use std::time::Instant;

use tubeflow::chart::TubeChart;
use tubeflow::curve::{self, ClosedCurve};
use tubeflow::flow::{self, TrajectoryState};
use tubeflow::grid::TubeGrid;
use tubeflow::solver::{solve_harmonic, SolveOptions, SpectralCoeffs};

fn solve(eps: f64) -> (TubeChart, Arc<SpectralCoeffs>) {
    let curve = Arc::new(curve::trefoil_raw().arclength_reparam(160).unwrap());
    let chart = TubeChart::new(curve, eps).unwrap();
    let grid = TubeGrid::new(256, 14, 32, chart.period()).unwrap();
    let sol = solve_harmonic(&chart, &grid, &SolveOptions::default()).unwrap();
    let psi = Arc::new(SpectralCoeffs::from_field(&sol.psi));
    (chart, psi)
}

fn main() {
    let t0 = Instant::now();
    let (chart, psi) = solve(0.05);
    let ell = chart.period();
    let field = flow::field_x(&chart, &psi).unwrap();
    eprintln!("[{:?}] solve done", t0.elapsed());

    // 1. reversibility roundtrip under absolute error control
    for tol in [1e-8, 1e-9, 1e-10] {
        let mut dr: f64 = 0.0;
        let mut dth: f64 = 0.0;
        for k in 0..8 {
            let s0 = TrajectoryState::new(0.0, 0.25 + 0.09 * k as f64, 0.9 + 0.7 * k as f64);
            let back = flow::integrate(&field, &s0, -ell, tol).unwrap();
            let fwd = flow::integrate(&field, &back, 0.0, tol).unwrap();
            dr = dr.max((fwd.r - s0.r).abs());
            dth = dth.max((fwd.theta - s0.theta).abs());
        }
        eprintln!(
            "roundtrip tol {:e}: worst dr {:.3e} dth {:.3e} (10 tol = {:e})",
            tol,
            dr,
            dth,
            10.0 * tol
        );
    }

    // 2. bisect z-scale c so the trefoil family hits total torsion 9 pi / 2
    let torsion_at = |c: f64| -> f64 {
        let mut coeffs = curve::trefoil_raw().to_coeffs();
        for s in coeffs.sin.iter_mut() {
            s[2] *= c;
        }
        ClosedCurve::from_coeffs(&coeffs)
            .and_then(|cv| cv.arclength_reparam(320))
            .unwrap()
            .total_torsion()
    };
    let target = 4.5 * std::f64::consts::PI;
    let (mut lo, mut hi) = (1.5_f64, 2.0_f64);
    // T decreases in c on this bracket
    for _ in 0..52 {
        let mid = 0.5 * (lo + hi);
        if torsion_at(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c_star = 0.5 * (lo + hi);
    eprintln!(
        "c* = {c_star:.15} total_torsion {:.15} target {target:.15}",
        torsion_at(c_star)
    );
    {
        let mut coeffs = curve::trefoil_raw().to_coeffs();
        for s in coeffs.sin.iter_mut() {
            s[2] *= c_star;
        }
        let cv = ClosedCurve::from_coeffs(&coeffs)
            .and_then(|cv| cv.arclength_reparam(320))
            .unwrap();
        let mono = flow::monodromy_core(&cv);
        eprintln!(
            "monodromy eigs: {:?} elliptic {}",
            mono.eigenvalues, mono.elliptic
        );
    }

    eprintln!("total {:?}", t0.elapsed());
}
