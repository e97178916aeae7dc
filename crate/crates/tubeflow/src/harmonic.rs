//! The harmonic field of a thin tube and its closed-form asymptotics.
//!
//! The model field h_0 = B^-2 (d_alpha + tau d_theta) is irrotational and
//! tangent to the boundary; adding the metric gradient of the Neumann
//! potential psi makes it divergence free:
//!
//! h = h_0 + grad psi,
//! grad psi = ((psi_a + tau psi_t)/B^2) d_alpha + (psi_r/eps^2) d_r
//!          + ((A psi_t + eps^2 r^2 tau psi_a)/(eps r B)^2) d_theta.
//!
//! The correctors
//!
//! phi_0 = eps^3 (r^3 - 3 r)/8 (tau kappa sin theta - kappa' cos theta),
//! phi_1 = 13 eps^4 (r^4 - 2 r^2)/96 (tau kappa^2 sin 2theta - kappa kappa' cos 2theta)
//!
//! capture psi to the orders D_y psi = D_y phi_0 + O(eps^4) and
//! d_theta psi = d_theta(phi_0 + phi_1) + O(eps^5), which the scaling report
//! verifies empirically.

use crate::chart::TubeChart;
use crate::error::{Error, Result};
use crate::grid::{TubeGrid, TubeScalarField};
use crate::solver::SpectralCoeffs;
use nalgebra::Vector3;
use std::sync::Arc;

/// Polar components below this radius are refused; Cartesian transverse
/// components stay well defined all the way to the axis.
pub const MIN_POLAR_R: f64 = 1e-9;

/// One field value in tube coordinates.  The transverse part is stored in
/// Cartesian disk components (smooth across the axis); polar components are
/// derived on demand.
#[derive(Debug, Clone, Copy)]
pub struct FieldValue {
    pub v_alpha: f64,
    pub v_y1: f64,
    pub v_y2: f64,
    pub r: f64,
    pub theta: f64,
}

impl FieldValue {
    pub fn v_r(&self) -> f64 {
        self.theta.cos() * self.v_y1 + self.theta.sin() * self.v_y2
    }

    pub fn v_theta(&self) -> Result<f64> {
        if self.r < MIN_POLAR_R {
            return Err(Error::AxisEvaluation { r: self.r });
        }
        Ok((-self.theta.sin() * self.v_y1 + self.theta.cos() * self.v_y2) / self.r)
    }
}

/// Provenance of a tube vector field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Harmonic,
    ModelBeltrami,
    Asymptotic,
}

/// Certified bound on the model-Beltrami substitution v ~ h: the alpha
/// component differs by at most `alpha_bound`, the transverse components by
/// `transverse_bound` (sup norms, constant `c` configurable and reported).
#[derive(Debug, Clone, Copy)]
pub struct ModelErrorBound {
    pub lambda: f64,
    pub c: f64,
    pub alpha_bound: f64,
    pub transverse_bound: f64,
}

/// A vector field on the tube: the harmonic field or the model Beltrami
/// field built from it.
pub struct TubeVectorField {
    pub chart: TubeChart,
    pub psi: Arc<SpectralCoeffs>,
    pub kind: FieldKind,
    pub model_error: Option<ModelErrorBound>,
}

/// h_0 value at a chart point: components (B^-2, 0, tau B^-2).
pub fn h0_eval(chart: &TubeChart, alpha: f64, r: f64, theta: f64) -> FieldValue {
    let kappa = chart.curve.kappa(alpha);
    let tau = chart.curve.tau(alpha);
    let b = 1.0 - chart.eps * kappa * r * theta.cos();
    let b2 = b * b;
    FieldValue {
        v_alpha: 1.0 / b2,
        v_y1: -tau * r * theta.sin() / b2,
        v_y2: tau * r * theta.cos() / b2,
        r,
        theta,
    }
}

/// Metric gradient of psi at a chart point, from its spectral jet.
pub fn gradient_eval(
    chart: &TubeChart,
    psi: &SpectralCoeffs,
    alpha: f64,
    r: f64,
    theta: f64,
) -> FieldValue {
    let jet = psi.jet1(alpha, r, theta);
    let kappa = chart.curve.kappa(alpha);
    let tau = chart.curve.tau(alpha);
    let eps = chart.eps;
    let (st, ct) = theta.sin_cos();
    let b = 1.0 - eps * kappa * r * ct;
    let b2 = b * b;
    let inv_e2 = 1.0 / (eps * eps);
    // Cartesian transverse components of grad psi; the 1/r on psi_t is the
    // polar-gradient factor, finite for smooth psi
    let dt_over_r = if r < MIN_POLAR_R { 0.0 } else { jet.d_t / r };
    let v_y1 = inv_e2 * (ct * jet.d_r - st * dt_over_r)
        - tau * tau * r * st * jet.d_t / b2
        - tau * r * st * jet.d_a / b2;
    let v_y2 = inv_e2 * (st * jet.d_r + ct * dt_over_r)
        + tau * tau * r * ct * jet.d_t / b2
        + tau * r * ct * jet.d_a / b2;
    FieldValue {
        v_alpha: (jet.d_a + tau * jet.d_t) / b2,
        v_y1,
        v_y2,
        r,
        theta,
    }
}

/// The harmonic field h = h_0 + grad psi as an evaluatable object.
pub fn harmonic_eval(chart: &TubeChart, psi: Arc<SpectralCoeffs>) -> TubeVectorField {
    TubeVectorField {
        chart: chart.clone(),
        psi,
        kind: FieldKind::Harmonic,
        model_error: None,
    }
}

/// Model Beltrami field: the values of h stand in for the true curl
/// eigenfield v, carrying the certified O(eps lambda) / O(lambda) error
/// record instead of an eigen-solve.
pub fn model_beltrami(
    chart: &TubeChart,
    psi: Arc<SpectralCoeffs>,
    lambda: f64,
    lambda_max: f64,
    c: f64,
) -> Result<TubeVectorField> {
    if lambda.abs() > lambda_max {
        return Err(Error::LambdaTooLarge {
            lambda,
            limit: lambda_max,
        });
    }
    Ok(TubeVectorField {
        chart: chart.clone(),
        psi,
        kind: FieldKind::ModelBeltrami,
        model_error: Some(ModelErrorBound {
            lambda,
            c,
            alpha_bound: c * chart.eps * lambda.abs(),
            transverse_bound: c * lambda.abs(),
        }),
    })
}

impl TubeVectorField {
    pub fn eval(&self, alpha: f64, r: f64, theta: f64) -> FieldValue {
        let h0 = h0_eval(&self.chart, alpha, r, theta);
        let g = gradient_eval(&self.chart, &self.psi, alpha, r, theta);
        FieldValue {
            v_alpha: h0.v_alpha + g.v_alpha,
            v_y1: h0.v_y1 + g.v_y1,
            v_y2: h0.v_y2 + g.v_y2,
            r,
            theta,
        }
    }

    /// Push the value forward to a Euclidean vector at the mapped point.
    pub fn eval_cartesian(&self, alpha: f64, r: f64, theta: f64) -> (Vector3<f64>, Vector3<f64>) {
        let v = self.eval(alpha, r, theta);
        let basis = self.chart.basis_polar(alpha, r, theta);
        let frame = self.chart.frame(alpha);
        let pos = self.chart.to_cartesian_polar(alpha, r, theta);
        // u = v_alpha e_alpha + eps (v_y1 e1 + v_y2 e2); the transverse basis
        // d_{y1} Phi = eps e1 is smooth at the axis, unlike d_r, d_theta
        let u = basis[0] * v.v_alpha
            + (frame.normal * v.v_y1 + frame.binormal * v.v_y2) * self.chart.eps;
        (pos, u)
    }
}

/// phi_0 corrector value.
pub fn phi0_eval(chart: &TubeChart, alpha: f64, r: f64, theta: f64) -> f64 {
    let kappa = chart.curve.kappa(alpha);
    let tau = chart.curve.tau(alpha);
    let kappa_p = chart.curve.kappa_prime(alpha);
    chart.eps.powi(3) * (r.powi(3) - 3.0 * r) / 8.0
        * (tau * kappa * theta.sin() - kappa_p * theta.cos())
}

/// phi_1 corrector value.
pub fn phi1_eval(chart: &TubeChart, alpha: f64, r: f64, theta: f64) -> f64 {
    let kappa = chart.curve.kappa(alpha);
    let tau = chart.curve.tau(alpha);
    let kappa_p = chart.curve.kappa_prime(alpha);
    13.0 * chart.eps.powi(4) * (r.powi(4) - 2.0 * r * r) / 96.0
        * (tau * kappa * kappa * (2.0 * theta).sin() - kappa * kappa_p * (2.0 * theta).cos())
}

pub fn phi0_field(chart: &TubeChart, grid: &Arc<TubeGrid>) -> TubeScalarField {
    TubeScalarField::from_fn(grid.clone(), |a, r, t| phi0_eval(chart, a, r, t))
}

pub fn phi1_field(chart: &TubeChart, grid: &Arc<TubeGrid>) -> TubeScalarField {
    TubeScalarField::from_fn(grid.clone(), |a, r, t| phi1_eval(chart, a, r, t))
}

/// Sup-norm defects of psi against the correctors at one tube radius.
#[derive(Debug, Clone, Copy)]
pub struct AsymptoticDefect {
    pub eps: f64,
    /// || D_y psi - D_y phi_0 ||_inf (Cartesian transverse gradient).
    pub dy_defect: f64,
    /// || d_theta psi - d_theta (phi_0 + phi_1) ||_inf.
    pub theta_defect: f64,
}

/// Convergence orders extracted from defects at successive radii.
#[derive(Debug, Clone)]
pub struct ScalingReport {
    pub rows: Vec<AsymptoticDefect>,
    /// log(defect ratio) / log(eps ratio) per consecutive pair.
    pub dy_orders: Vec<f64>,
    pub theta_orders: Vec<f64>,
}

/// Measure the corrector defects for one solved psi.
pub fn asymptotic_defect(
    chart: &TubeChart,
    psi: &TubeScalarField,
) -> AsymptoticDefect {
    let grid = psi.grid.clone();
    let phi0 = phi0_field(chart, &grid);
    let phi1 = phi1_field(chart, &grid);
    let diff0 = psi.sub(&phi0);
    // D_y in Cartesian disk components: d_{y1} = cos t d_r - (sin t / r) d_t
    let dr = diff0.deriv_r(1);
    let dt = diff0.deriv_theta(1);
    let mut dy_defect = 0.0_f64;
    for ia in 0..grid.n_alpha {
        for ir in 0..grid.n_r {
            let r = grid.r(ir);
            for it in 0..grid.n_theta {
                let i = grid.idx(ia, ir, it);
                let (st, ct) = grid.theta(it).sin_cos();
                let g1 = ct * dr.values[i] - st * dt.values[i] / r;
                let g2 = st * dr.values[i] + ct * dt.values[i] / r;
                dy_defect = dy_defect.max(g1.hypot(g2));
            }
        }
    }
    let mut diff01 = diff0;
    diff01.axpy(-1.0, &phi1);
    let theta_defect = diff01.deriv_theta(1).norm_inf();
    AsymptoticDefect {
        eps: chart.eps,
        dy_defect,
        theta_defect,
    }
}

/// Turn defects measured at decreasing eps into observed orders.
pub fn asymptotic_check(rows: &[AsymptoticDefect]) -> ScalingReport {
    let mut dy_orders = Vec::new();
    let mut theta_orders = Vec::new();
    for pair in rows.windows(2) {
        let scale = (pair[0].eps / pair[1].eps).ln();
        dy_orders.push((pair[0].dy_defect / pair[1].dy_defect).ln() / scale);
        theta_orders.push((pair[0].theta_defect / pair[1].theta_defect).ln() / scale);
    }
    ScalingReport {
        rows: rows.to_vec(),
        dy_orders,
        theta_orders,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{circle, trefoil_raw};
    use crate::solver::{solve_harmonic, SolveOptions};
    use approx::assert_relative_eq;

    fn trefoil_chart(eps: f64) -> TubeChart {
        let c = trefoil_raw().arclength_reparam(160).unwrap();
        TubeChart::new(Arc::new(c), eps).unwrap()
    }

    fn solved(chart: &TubeChart, n_alpha: usize) -> (Arc<TubeGrid>, TubeScalarField) {
        let grid = TubeGrid::new(n_alpha, 14, 32, chart.period()).unwrap();
        let sol = solve_harmonic(chart, &grid, &SolveOptions::default()).unwrap();
        (grid, sol.psi)
    }

    #[test]
    fn h0_closed_form_values() {
        let chart = TubeChart::new(Arc::new(circle()), 0.1).unwrap();
        let v = h0_eval(&chart, 0.0, 1.0, 0.0);
        // B = 1 - 0.1 = 0.9 at theta = 0
        assert_relative_eq!(v.v_alpha, 1.0 / 0.81, epsilon = 1e-14);
        assert_eq!(v.v_r(), 0.0);
        assert_eq!(v.v_theta().unwrap(), 0.0);
        // on the axis B = 1 and the angular part vanishes with r
        let chart3 = trefoil_chart(0.05);
        let v3 = h0_eval(&chart3, 2.0, 0.0, 1.3);
        assert_relative_eq!(v3.v_alpha, 1.0, epsilon = 1e-14);
        assert_eq!(v3.v_y1, 0.0);
        assert_eq!(v3.v_y2, 0.0);
        assert!(v3.v_theta().is_err());
        // r-component of h0 vanishes identically
        let v4 = h0_eval(&chart3, 11.0, 0.7, 2.4);
        assert!(v4.v_r().abs() < 1e-15);
        assert_relative_eq!(
            v4.v_theta().unwrap(),
            chart3.curve.tau(11.0)
                / (1.0 - 0.05 * chart3.curve.kappa(11.0) * 0.7 * (2.4_f64).cos()).powi(2),
            epsilon = 1e-13
        );
    }

    #[test]
    fn gradient_matches_finite_differences_of_psi() {
        let chart = trefoil_chart(0.05);
        let (_, psi) = solved(&chart, 256);
        let sc = SpectralCoeffs::from_field(&psi);
        let h = 1e-3;
        let w = [1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0];
        let off = [-2.0 * h, -h, h, 2.0 * h];
        for &(a, r, t) in &[(0.7, 0.6, 1.0), (5.0, 0.9, 4.2), (15.0, 0.3, 2.8)] {
            let g = gradient_eval(&chart, &sc, a, r, t);
            let mut fd = [0.0_f64; 3];
            for i in 0..4 {
                fd[0] += w[i] * sc.eval(a + off[i], r, t) / h;
                fd[1] += w[i] * sc.eval(a, r + off[i], t) / h;
                fd[2] += w[i] * sc.eval(a, r, t + off[i]) / h;
            }
            let kappa = chart.curve.kappa(a);
            let tau = chart.curve.tau(a);
            let eps = chart.eps;
            let b = 1.0 - eps * kappa * r * t.cos();
            let big_a = b * b + (eps * tau * r).powi(2);
            // polar contravariant components straight from the FD jet
            let va = (fd[0] + tau * fd[2]) / (b * b);
            let vr = fd[1] / (eps * eps);
            let vt = (big_a * fd[2] + (eps * r).powi(2) * tau * fd[0]) / (eps * r * b).powi(2);
            assert_relative_eq!(g.v_alpha, va, epsilon = 1e-6 * va.abs().max(1e-3));
            assert_relative_eq!(g.v_r(), vr, epsilon = 1e-6 * vr.abs().max(1e-3));
            assert_relative_eq!(g.v_theta().unwrap(), vt, epsilon = 1e-6 * vt.abs().max(1e-3));
        }
    }

    #[test]
    fn harmonic_field_is_tangent_and_irrotational() {
        let chart = trefoil_chart(0.05);
        let (grid, psi) = solved(&chart, 256);
        let field = harmonic_eval(&chart, Arc::new(SpectralCoeffs::from_field(&psi)));
        // tangency at the boundary nodes
        let mut worst = 0.0_f64;
        for ia in (0..grid.n_alpha).step_by(7) {
            for it in (0..grid.n_theta).step_by(3) {
                let v = field.eval(grid.alpha(ia), 1.0, grid.theta(it));
                worst = worst.max(v.v_r().abs());
            }
        }
        assert!(worst < 1e-10, "boundary normal component {worst}");

        // Euclidean curl and divergence by 4th-order finite differences of
        // the pushed-forward field around mapped points
        let fd = |x0: Vector3<f64>, alpha_guess: f64| -> (f64, Vector3<f64>) {
            let h = 0.01;
            let w = [1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0];
            let off = [-2.0 * h, -h, h, 2.0 * h];
            let mut jac = [[0.0_f64; 3]; 3];
            for dir in 0..3 {
                for i in 0..4 {
                    let mut x = x0;
                    x[dir] += off[i];
                    let (al, r, t) = chart.invert_near(&x, alpha_guess).unwrap();
                    let (_, u) = field.eval_cartesian(al, r, t);
                    for comp in 0..3 {
                        jac[comp][dir] += w[i] * u[comp] / h;
                    }
                }
            }
            let div = jac[0][0] + jac[1][1] + jac[2][2];
            let curl = Vector3::new(
                jac[2][1] - jac[1][2],
                jac[0][2] - jac[2][0],
                jac[1][0] - jac[0][1],
            );
            (div, curl)
        };
        for &(a, r, t) in &[(0.9, 0.4, 0.6), (7.7, 0.75, 3.0), (21.0, 0.2, 5.1)] {
            let x0 = chart.to_cartesian_polar(a, r, t);
            let (div, curl) = fd(x0, a);
            assert!(curl.norm() < 1e-6, "curl {curl:?} at alpha {a}");
            assert!(div.abs() < 1e-6, "div {div} at alpha {a}");
        }
    }

    #[test]
    fn circle_harmonic_field_is_h0() {
        let chart = TubeChart::new(Arc::new(circle()), 0.1).unwrap();
        let grid = TubeGrid::new(16, 8, 16, chart.period()).unwrap();
        let sol = solve_harmonic(&chart, &grid, &SolveOptions::default()).unwrap();
        let field = harmonic_eval(&chart, Arc::new(SpectralCoeffs::from_field(&sol.psi)));
        for &(a, r, t) in &[(0.3, 0.5, 1.0), (2.0, 1.0, 4.0)] {
            let v = field.eval(a, r, t);
            let v0 = h0_eval(&chart, a, r, t);
            assert_relative_eq!(v.v_alpha, v0.v_alpha, epsilon = 1e-11);
            assert!((v.v_y1 - v0.v_y1).abs() < 1e-11);
            assert!((v.v_y2 - v0.v_y2).abs() < 1e-11);
        }
    }

    #[test]
    fn phi0_satisfies_disk_poisson_identity() {
        // Delta_y phi_0 = eps^3 r (tau kappa sin t - kappa' cos t) =: eps^2 rho_0
        let chart = trefoil_chart(0.07);
        let grid = TubeGrid::new(64, 12, 32, chart.period()).unwrap();
        let phi0 = phi0_field(&chart, &grid);
        let lap_y = {
            let rr = phi0.deriv_r(2);
            let r1 = phi0.deriv_r(1);
            let tt = phi0.deriv_theta(2);
            let mut out = rr.clone();
            for ia in 0..grid.n_alpha {
                for ir in 0..grid.n_r {
                    let r = grid.r(ir);
                    for it in 0..grid.n_theta {
                        let i = grid.idx(ia, ir, it);
                        out.values[i] = rr.values[i] + r1.values[i] / r + tt.values[i] / (r * r);
                    }
                }
            }
            out
        };
        let mut worst = 0.0_f64;
        for ia in 0..grid.n_alpha {
            let a = grid.alpha(ia);
            let kappa = chart.curve.kappa(a);
            let tau = chart.curve.tau(a);
            let kappa_p = chart.curve.kappa_prime(a);
            for ir in 0..grid.n_r {
                let r = grid.r(ir);
                for it in 0..grid.n_theta {
                    let t = grid.theta(it);
                    let expect =
                        chart.eps.powi(3) * r * (tau * kappa * t.sin() - kappa_p * t.cos());
                    let i = grid.idx(ia, ir, it);
                    worst = worst.max((lap_y.values[i] - expect).abs());
                }
            }
        }
        assert!(worst < 1e-12, "disk Poisson defect {worst}");
        // boundary slope of the radial factor vanishes: d_r phi_0 (r=1) = 0
        let dr = phi0.deriv_r(1);
        for it in 0..grid.n_theta {
            assert!(dr.values[grid.idx(5, 0, it)].abs() < 1e-12);
        }
        // r = 1 closed form: phi_0 = -(eps^3/4)(tau kappa sin t - kappa' cos t)
        let a = grid.alpha(9);
        let t = grid.theta(3);
        assert_relative_eq!(
            phi0_eval(&chart, a, 1.0, t),
            -chart.eps.powi(3) / 4.0
                * (chart.curve.tau(a) * chart.curve.kappa(a) * t.sin()
                    - chart.curve.kappa_prime(a) * t.cos()),
            epsilon = 1e-15
        );
    }

    #[test]
    fn corrector_scaling_orders() {
        let mut rows = Vec::new();
        for eps in [0.1, 0.05] {
            let chart = trefoil_chart(eps);
            let (_, psi) = solved(&chart, 256);
            rows.push(asymptotic_defect(&chart, &psi));
        }
        let report = asymptotic_check(&rows);
        assert!(
            report.dy_orders[0] >= 3.5,
            "D_y defect order {} (defects {:?})",
            report.dy_orders[0],
            report.rows
        );
        assert!(
            report.theta_orders[0] >= 4.5,
            "theta defect order {} (defects {:?})",
            report.theta_orders[0],
            report.rows
        );
    }

    #[test]
    fn first_order_structure_of_h() {
        // h = d_alpha + tau d_theta + O(eps): the deviation norms shrink
        // linearly with eps
        let mut devs = Vec::new();
        for eps in [0.1, 0.05] {
            let chart = trefoil_chart(eps);
            let (grid, psi) = solved(&chart, 256);
            let field = harmonic_eval(&chart, Arc::new(SpectralCoeffs::from_field(&psi)));
            let mut dev = 0.0_f64;
            for ia in (0..grid.n_alpha).step_by(5) {
                let a = grid.alpha(ia);
                let tau = chart.curve.tau(a);
                for &r in &[0.4, 0.8, 1.0] {
                    for it in (0..grid.n_theta).step_by(3) {
                        let v = field.eval(a, r, grid.theta(it));
                        dev = dev.max((v.v_alpha - 1.0).abs());
                        dev = dev.max((v.v_theta().unwrap() - tau).abs());
                    }
                }
            }
            devs.push(dev / eps);
        }
        // constant C = dev/eps is stable under halving
        assert!(
            devs[1] < 2.0 * devs[0] + 0.1,
            "deviation constants {devs:?} not stable"
        );
    }

    #[test]
    fn model_beltrami_bounds_and_guard() {
        let chart = trefoil_chart(0.05);
        let (_, psi) = solved(&chart, 256);
        let sc = Arc::new(SpectralCoeffs::from_field(&psi));
        let lam = chart.eps.powi(3);
        let f = model_beltrami(&chart, sc.clone(), lam, 1.0, 1.0).unwrap();
        let b = f.model_error.unwrap();
        assert_relative_eq!(b.alpha_bound, chart.eps.powi(4), epsilon = 1e-15);
        assert_relative_eq!(b.transverse_bound, chart.eps.powi(3), epsilon = 1e-15);
        assert_eq!(f.kind, FieldKind::ModelBeltrami);
        // lambda = 0 keeps h exactly, with zero error budget
        let f0 = model_beltrami(&chart, sc.clone(), 0.0, 1.0, 1.0).unwrap();
        assert_eq!(f0.model_error.unwrap().alpha_bound, 0.0);
        let v = f0.eval(3.0, 0.5, 1.0);
        let h = harmonic_eval(&chart, sc.clone()).eval(3.0, 0.5, 1.0);
        assert_eq!(v.v_alpha, h.v_alpha);
        // guard
        match model_beltrami(&chart, sc, 10.0, 1.0, 1.0) {
            Err(Error::LambdaTooLarge { .. }) => {}
            other => panic!("expected LambdaTooLarge, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn cartesian_form_is_continuous_across_axis() {
        let chart = trefoil_chart(0.05);
        let (_, psi) = solved(&chart, 256);
        let field = harmonic_eval(&chart, Arc::new(SpectralCoeffs::from_field(&psi)));
        let a = 4.0;
        let t = 0.9;
        let (_, u_plus) = field.eval_cartesian(a, 1e-4, t);
        let (_, u_minus) = field.eval_cartesian(a, 1e-4, t + std::f64::consts::PI);
        assert!(
            (u_plus - u_minus).norm() < 1e-3,
            "axis jump {}",
            (u_plus - u_minus).norm()
        );
    }
}
