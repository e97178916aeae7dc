//! Tube coordinates around an arc-length closed curve:
//!
//! Phi(alpha, y) = gamma(alpha) + eps (y1 e1(alpha) + y2 e2(alpha)),
//!
//! with (e1, e2) the Frenet normal and binormal and y = r (cos theta, sin theta).
//! The pulled-back Euclidean metric is
//!
//! ds^2 = A dalpha^2 - 2 eps^2 tau r^2 dtheta dalpha + eps^2 dr^2 + eps^2 r^2 dtheta^2,
//! A = B^2 + (eps tau r)^2,   B = 1 - eps kappa r cos theta,
//!
//! and the volume element is eps^2 B dalpha dy.  The Laplace-Beltrami
//! operator of this metric, organized by derivative, is what
//! [`TubeChart::laplacian_apply`] evaluates; the solid-torus solver treats
//! the singular 1/eps and 1/eps^2 terms exactly through the same
//! coefficients.

use crate::curve::{ClosedCurve, FrenetFrame};
use crate::error::{Error, Result};
use crate::grid::{TubeGrid, TubeScalarField};
use nalgebra::Vector3;
use std::sync::Arc;

/// Metric quantities of the tube chart at one point.
#[derive(Debug, Clone, Copy)]
pub struct MetricData {
    pub a: f64,
    pub b: f64,
    /// Covariant metric in (alpha, r, theta) order.
    pub g_alpha_alpha: f64,
    pub g_alpha_theta: f64,
    pub g_rr: f64,
    pub g_theta_theta: f64,
    /// Density of dV against dalpha dy (i.e. B; multiply by eps^2 r for the
    /// polar coordinate volume element).
    pub volume_density: f64,
}

/// Tube chart of radius `eps` around an arc-length curve.
#[derive(Clone)]
pub struct TubeChart {
    pub curve: Arc<ClosedCurve>,
    pub eps: f64,
}

impl TubeChart {
    pub fn new(curve: Arc<ClosedCurve>, eps: f64) -> Result<Self> {
        if !curve.is_arclength() {
            return Err(Error::InvalidInput(
                "tube chart requires an arc-length parametrized curve".into(),
            ));
        }
        let (_, kappa_max) = curve.kappa_range();
        let eps_kappa = eps * kappa_max;
        if eps_kappa >= 1.0 {
            return Err(Error::DegenerateChart { eps_kappa });
        }
        Ok(TubeChart { curve, eps })
    }

    pub fn period(&self) -> f64 {
        self.curve.period()
    }

    pub fn frame(&self, alpha: f64) -> FrenetFrame {
        self.curve
            .frenet_frame(alpha)
            .expect("admissible curves have a frame everywhere")
    }

    pub fn to_cartesian(&self, alpha: f64, y1: f64, y2: f64) -> Vector3<f64> {
        let f = self.frame(alpha);
        self.curve.position(alpha) + (f.normal * y1 + f.binormal * y2) * self.eps
    }

    pub fn to_cartesian_polar(&self, alpha: f64, r: f64, theta: f64) -> Vector3<f64> {
        self.to_cartesian(alpha, r * theta.cos(), r * theta.sin())
    }

    /// Coordinate basis vectors (d Phi / d alpha, d Phi / d r, d Phi / d theta)
    /// as Cartesian vectors.
    pub fn basis_polar(&self, alpha: f64, r: f64, theta: f64) -> [Vector3<f64>; 3] {
        let f = self.frame(alpha);
        let kappa = self.curve.kappa(alpha);
        let tau = self.curve.tau(alpha);
        let (st, ct) = theta.sin_cos();
        let y1 = r * ct;
        let y2 = r * st;
        let b = 1.0 - self.eps * kappa * y1;
        let e_alpha = f.tangent * b + (f.normal * y2 - f.binormal * y1) * (self.eps * tau);
        let e_r = (f.normal * ct + f.binormal * st) * self.eps;
        let e_theta = (f.binormal * ct - f.normal * st) * (self.eps * r);
        [e_alpha, e_r, e_theta]
    }

    pub fn metric(&self, alpha: f64, r: f64, theta: f64) -> MetricData {
        let kappa = self.curve.kappa(alpha);
        let tau = self.curve.tau(alpha);
        let b = 1.0 - self.eps * kappa * r * theta.cos();
        let etr = self.eps * tau * r;
        let a = b * b + etr * etr;
        let e2 = self.eps * self.eps;
        MetricData {
            a,
            b,
            g_alpha_alpha: a,
            g_alpha_theta: -e2 * tau * r * r,
            g_rr: e2,
            g_theta_theta: e2 * r * r,
            volume_density: b,
        }
    }

    /// Invert the chart near a known parameter (orbit tracking); `alpha` is
    /// continued from the guess, not wrapped, so lifted angles stay smooth.
    pub fn invert_near(&self, x: &Vector3<f64>, alpha_guess: f64) -> Result<(f64, f64, f64)> {
        let mut alpha = alpha_guess;
        let mut converged = false;
        for _ in 0..60 {
            let jet = self.curve.eval_jet(alpha);
            let diff = jet[0] - x;
            let f = diff.dot(&jet[1]);
            let df = jet[1].norm_squared() + diff.dot(&jet[2]);
            let da = f / df;
            alpha -= da;
            if da.abs() < 1e-13 * self.period() {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::ConvergenceFailure(format!(
                "chart inversion stalled near alpha = {alpha_guess}"
            )));
        }
        let f = self.frame(alpha);
        let v = x - self.curve.position(alpha);
        let y1 = v.dot(&f.normal) / self.eps;
        let y2 = v.dot(&f.binormal) / self.eps;
        Ok((alpha, (y1 * y1 + y2 * y2).sqrt(), y2.atan2(y1)))
    }

    /// Global chart inversion (coarse search plus refinement).
    pub fn invert(&self, x: &Vector3<f64>) -> Result<(f64, f64, f64)> {
        let (_, t) = self.curve.distance_to(x);
        self.invert_near(x, t)
    }

    /// integral f r dr dtheta dalpha (the dalpha dy measure).
    pub fn integral_dady(&self, f: &TubeScalarField) -> f64 {
        let g = &f.grid;
        let mut acc = 0.0;
        for ia in 0..g.n_alpha {
            for ir in 0..g.n_r {
                let w = g.radial.weights_rdr[ir];
                let mut row = 0.0;
                for it in 0..g.n_theta {
                    row += f.values[g.idx(ia, ir, it)];
                }
                acc += w * row;
            }
        }
        acc * std::f64::consts::TAU / g.n_theta as f64 * g.period / g.n_alpha as f64
    }

    /// integral f dV over the solid tube (Euclidean volume measure).
    pub fn integral_dv(&self, f: &TubeScalarField) -> f64 {
        let g = &f.grid;
        let mut weighted = f.clone();
        for ia in 0..g.n_alpha {
            let kappa = self.curve.kappa(g.alpha(ia));
            for ir in 0..g.n_r {
                let r = g.r(ir);
                for it in 0..g.n_theta {
                    let b = 1.0 - self.eps * kappa * r * g.theta(it).cos();
                    weighted.values[g.idx(ia, ir, it)] *= b;
                }
            }
        }
        self.eps * self.eps * self.integral_dady(&weighted)
    }

    /// Euclidean volume of the tube.
    pub fn volume(&self, grid: &Arc<TubeGrid>) -> f64 {
        let ones = TubeScalarField::from_fn(grid.clone(), |_, _, _| 1.0);
        self.integral_dv(&ones)
    }

    /// Coefficient grids of the Laplace-Beltrami operator, one per
    /// derivative of psi.  Grouped so that callers can apply the operator as
    ///
    /// Delta psi = c_rr psi_rr + c_r psi_r + c_tt psi_tt + c_aa psi_aa
    ///           + c_at psi_at + c_t psi_t + c_a psi_a.
    pub fn laplacian_coeffs(&self, grid: &Arc<TubeGrid>) -> LaplacianCoeffs {
        let g = grid.clone();
        let eps = self.eps;
        let e2 = eps * eps;
        let mk = |f: &dyn Fn(f64, f64, f64, f64, f64, f64, f64) -> f64| -> Vec<f64> {
            let mut out = vec![0.0; g.len()];
            for ia in 0..g.n_alpha {
                let alpha = g.alpha(ia);
                let kappa = self.curve.kappa(alpha);
                let tau = self.curve.tau(alpha);
                let kappa_p = self.curve.kappa_prime(alpha);
                let tau_p = self.curve.tau_prime(alpha);
                for ir in 0..g.n_r {
                    let r = g.r(ir);
                    for it in 0..g.n_theta {
                        out[g.idx(ia, ir, it)] =
                            f(kappa, tau, kappa_p, tau_p, r, g.theta(it).cos(), g.theta(it).sin());
                    }
                }
            }
            out
        };
        LaplacianCoeffs {
            grid: g.clone(),
            c_rr: mk(&|_, _, _, _, _, _, _| 1.0 / e2),
            c_r: mk(&|k, _, _, _, r, ct, _| {
                let b = 1.0 - eps * k * r * ct;
                1.0 / (e2 * r) - k * ct / (eps * b)
            }),
            c_tt: mk(&|k, t, _, _, r, ct, _| {
                let b = 1.0 - eps * k * r * ct;
                let a = b * b + (eps * t * r).powi(2);
                a / (e2 * r * r * b * b)
            }),
            c_aa: mk(&|k, _, _, _, r, ct, _| {
                let b = 1.0 - eps * k * r * ct;
                1.0 / (b * b)
            }),
            c_at: mk(&|k, t, _, _, r, ct, _| {
                let b = 1.0 - eps * k * r * ct;
                2.0 * t / (b * b)
            }),
            c_t: mk(&|k, t, kp, tp, r, ct, st| {
                let b = 1.0 - eps * k * r * ct;
                let b3 = b * b * b;
                let etr2 = (eps * t * r).powi(2);
                (tp - eps * r * (k * tp - kp * t) * ct) / b3
                    + k * st * (b * b - etr2) / (eps * r * b3)
            }),
            c_a: mk(&|k, t, kp, _, r, ct, st| {
                let b = 1.0 - eps * k * r * ct;
                eps * r * (kp * ct - t * k * st) / (b * b * b)
            }),
        }
    }

    /// Laplace-Beltrami operator applied on the grid (spectral derivatives).
    pub fn laplacian_apply(&self, psi: &TubeScalarField) -> TubeScalarField {
        let coeffs = self.laplacian_coeffs(&psi.grid);
        coeffs.apply(psi)
    }
}

/// Precomputed coefficient grids for the tube Laplacian.
pub struct LaplacianCoeffs {
    pub grid: Arc<TubeGrid>,
    pub c_rr: Vec<f64>,
    pub c_r: Vec<f64>,
    pub c_tt: Vec<f64>,
    pub c_aa: Vec<f64>,
    pub c_at: Vec<f64>,
    pub c_t: Vec<f64>,
    pub c_a: Vec<f64>,
}

impl LaplacianCoeffs {
    pub fn apply(&self, psi: &TubeScalarField) -> TubeScalarField {
        let p_rr = psi.deriv_r(2);
        let p_r = psi.deriv_r(1);
        let p_tt = psi.deriv_theta(2);
        let p_aa = psi.deriv_alpha(2);
        let p_at = psi.deriv_alpha_theta();
        let p_t = psi.deriv_theta(1);
        let p_a = psi.deriv_alpha(1);
        let mut out = TubeScalarField::zeros(psi.grid.clone());
        for i in 0..out.values.len() {
            out.values[i] = self.c_rr[i] * p_rr.values[i]
                + self.c_r[i] * p_r.values[i]
                + self.c_tt[i] * p_tt.values[i]
                + self.c_aa[i] * p_aa.values[i]
                + self.c_at[i] * p_at.values[i]
                + self.c_t[i] * p_t.values[i]
                + self.c_a[i] * p_a.values[i];
        }
        out
    }
}
