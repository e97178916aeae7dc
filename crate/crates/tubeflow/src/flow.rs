//! Trajectories and return-map analysis of the normalized field X = v / v_alpha.
//!
//! Dividing the harmonic field by its alpha component makes the flow
//! isochronous: alpha advances at unit speed, so the Poincare map of the
//! section {alpha = 0} is the time-ell flow and never needs root finding.
//! The boundary circle r = 1 is invariant, and the restriction of the return
//! map to it is an analytic circle diffeomorphism; its rotation number,
//! conjugacy to a rigid rotation and normal torsion are the quantities the
//! tube's stability analysis runs on.
//!
//! Trajectories are integrated in polar tube coordinates, which are only a
//! diffeomorphism away from the axis; interior work therefore starts at
//! r >= R_MIN and the core itself is handled by the closed variational model
//! of `monodromy_core`.

use std::cell::{Cell, RefCell};
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use nalgebra::Matrix3;
use num_complex::Complex64;
use ode_solvers::{Dop853, OutputType, SVector, System};

use crate::chart::TubeChart;
use crate::curve::ClosedCurve;
use crate::error::{Error, Result};
use crate::harmonic::{gradient_eval, h0_eval};
use crate::solver::{PsiJet, SpectralCoeffs};
use crate::spectral::{
    fft_forward, fft_inverse, periodic_antiderivative, periodic_eval, signed_mode, TrigSeries,
};

/// Smallest starting radius for polar trajectory integration.
pub const R_MIN: f64 = 0.1;

/// Hard domain guard: the flow is tangent to r = 1, so any excursion past
/// this is an integration failure, not dynamics.
const DOMAIN_R_MAX: f64 = 1.0 + 1e-6;

/// Divisor floor for the conjugacy linearization e^{ik omega} - 1.
pub const DIVISOR_FLOOR: f64 = 1e-8;

const MAX_NEWTON: usize = 30;

/// Internal step-error margins relative to the caller tolerance. Trajectory
/// integration promises the caller a global bound of a few `tol`, so its
/// per-step budget absorbs signed accumulation over the hundreds of steps a
/// multi-period span takes. Map and variational construction check their
/// results against explicit accuracy budgets instead, so a light margin
/// suffices there.
const TRAJ_STEP_MARGIN: f64 = 1.0 / 256.0;
const MAP_STEP_MARGIN: f64 = 0.25;

// ---------------------------------------------------------------------------
// The flow field

/// Point on a trajectory. `s` is the flow time, which equals the (unwrapped)
/// alpha coordinate because alpha-dot == 1; `theta` is the lift to the real
/// line and is only wrapped for presentation.
#[derive(Debug, Clone, Copy)]
pub struct TrajectoryState {
    pub s: f64,
    pub r: f64,
    pub theta: f64,
}

impl TrajectoryState {
    pub fn new(s: f64, r: f64, theta: f64) -> Self {
        TrajectoryState { s, r, theta }
    }

    pub fn alpha(&self, period: f64) -> f64 {
        self.s.rem_euclid(period)
    }

    pub fn y(&self) -> (f64, f64) {
        (self.r * self.theta.cos(), self.r * self.theta.sin())
    }
}

enum FlowModel {
    /// X = h / h_alpha for the solved harmonic field.
    Full,
    /// Straight-tube stand-in with constant angular speed and flat invariant
    /// density; used as an exactly solvable reference.
    Rigid { tau: f64 },
}

/// Flow-ready evaluator for X = v / v_alpha in tube coordinates.
pub struct FlowField {
    pub chart: TubeChart,
    pub psi: Arc<SpectralCoeffs>,
    model: FlowModel,
}

/// Rates and their transverse linearization at one point: the variational
/// system along a trajectory is M' = J M with J = d(r-dot, theta-dot)/d(r, theta).
struct VarRates {
    rdot: f64,
    thdot: f64,
    j: [[f64; 2]; 2],
}

/// Builds the flow field of the harmonic field with potential `psi`,
/// verifying that v_alpha stays positive: the sum-of-moduli coefficient
/// bound is tried first, and a dense sample sweep only runs when the bound
/// is inconclusive.
pub fn field_x(chart: &TubeChart, psi: &Arc<SpectralCoeffs>) -> Result<FlowField> {
    let (ba, bt) = psi.deriv_linf_bound();
    let (_, _, samples_t) = chart.curve.scalar_samples();
    let tau_max = samples_t.iter().fold(0.0_f64, |a, t| a.max(t.abs()));
    let bound = ba + tau_max * bt;
    if bound >= 0.75 {
        let mut min_d = f64::INFINITY;
        let ell = chart.period();
        for ia in 0..64 {
            for ir in 0..6 {
                for it in 0..32 {
                    let a = ell * ia as f64 / 64.0;
                    let r = 1.0 - ir as f64 / 6.0;
                    let t = TAU * it as f64 / 32.0;
                    let jet = psi.jet1(a, r, t);
                    let d = 1.0 + jet.d_a + chart.curve.tau(a) * jet.d_t;
                    min_d = min_d.min(d);
                }
            }
        }
        if min_d <= 0.0 {
            return Err(Error::NonPositiveDenominator { min: min_d });
        }
    }
    Ok(FlowField {
        chart: chart.clone(),
        psi: psi.clone(),
        model: FlowModel::Full,
    })
}

impl FlowField {
    /// Exactly solvable reference flow (1, 0, tau) with invariant density 1.
    pub fn rigid(chart: TubeChart, tau: f64) -> Self {
        let psi = Arc::new(SpectralCoeffs::empty(chart.period()));
        FlowField {
            chart,
            psi,
            model: FlowModel::Rigid { tau },
        }
    }

    pub fn period(&self) -> f64 {
        self.chart.period()
    }

    /// (alpha-dot, r-dot, theta-dot) at a chart point, for r away from the
    /// axis (polar coordinates; see R_MIN).
    pub fn velocity(&self, s: f64, r: f64, theta: f64) -> Result<(f64, f64, f64)> {
        if let FlowModel::Rigid { tau } = self.model {
            return Ok((1.0, 0.0, tau));
        }
        let jet = self.psi.jet1(s, r, theta);
        let eps = self.chart.eps;
        let kappa = self.chart.curve.kappa(s);
        let tau = self.chart.curve.tau(s);
        let b = 1.0 - eps * kappa * r * theta.cos();
        let a = b * b + (eps * tau * r).powi(2);
        let d = 1.0 + jet.d_a + tau * jet.d_t;
        if d <= 0.0 {
            return Err(Error::NonPositiveDenominator { min: d });
        }
        let e2 = eps * eps;
        let rdot = b * b * jet.d_r / (e2 * d);
        let thdot = (tau + a * jet.d_t / (e2 * r * r) + tau * jet.d_a) / d;
        Ok((1.0, rdot, thdot))
    }

    /// X in Cartesian disk components; smooth across the axis.
    pub fn velocity_cartesian(&self, s: f64, y1: f64, y2: f64) -> Result<(f64, f64, f64)> {
        if let FlowModel::Rigid { tau } = self.model {
            return Ok((1.0, -tau * y2, tau * y1));
        }
        let r = y1.hypot(y2);
        let theta = y2.atan2(y1);
        let h0 = h0_eval(&self.chart, s, r, theta);
        let g = gradient_eval(&self.chart, &self.psi, s, r, theta);
        let va = h0.v_alpha + g.v_alpha;
        if va <= 0.0 {
            return Err(Error::NonPositiveDenominator { min: va });
        }
        Ok((1.0, (h0.v_y1 + g.v_y1) / va, (h0.v_y2 + g.v_y2) / va))
    }

    /// Density of the 2-form the return map preserves on the alpha = 0 disk.
    pub fn density(&self, r: f64, theta: f64) -> f64 {
        match self.model {
            FlowModel::Rigid { .. } => 1.0,
            FlowModel::Full => measure_density(&self.chart, &self.psi, r, theta),
        }
    }

    fn variational(&self, s: f64, r: f64, theta: f64) -> Result<VarRates> {
        match self.model {
            FlowModel::Rigid { tau } => Ok(VarRates {
                rdot: 0.0,
                thdot: tau,
                j: [[0.0; 2]; 2],
            }),
            FlowModel::Full => {
                let jet = self.psi.jet2(s, r, theta);
                self.variational_from_jet(s, r, theta, &jet)
            }
        }
    }

    fn variational_boundary(&self, s: f64, theta: f64, jets: &BoundaryJets) -> Result<VarRates> {
        match self.model {
            FlowModel::Rigid { tau } => Ok(VarRates {
                rdot: 0.0,
                thdot: tau,
                j: [[0.0; 2]; 2],
            }),
            FlowModel::Full => {
                let jet = jets.jet2(s, theta);
                self.variational_from_jet(s, 1.0, theta, &jet)
            }
        }
    }

    fn variational_from_jet(&self, s: f64, r: f64, theta: f64, jet: &PsiJet) -> Result<VarRates> {
        let eps = self.chart.eps;
        let kappa = self.chart.curve.kappa(s);
        let tau = self.chart.curve.tau(s);
        let (st, ct) = theta.sin_cos();
        let e2 = eps * eps;
        let b = 1.0 - eps * kappa * r * ct;
        let b_r = -eps * kappa * ct;
        let b_t = eps * kappa * r * st;
        let a = b * b + (eps * tau * r).powi(2);
        let a_r = 2.0 * b * b_r + 2.0 * e2 * tau * tau * r;
        let a_t = 2.0 * b * b_t;
        let d = 1.0 + jet.d_a + tau * jet.d_t;
        if d <= 0.0 {
            return Err(Error::NonPositiveDenominator { min: d });
        }
        let d_r = jet.d_ar + tau * jet.d_rt;
        let d_t = jet.d_at + tau * jet.d_tt;
        let rdot = b * b * jet.d_r / (e2 * d);
        let rdot_r = (2.0 * b * b_r * jet.d_r + b * b * jet.d_rr) / (e2 * d) - rdot * d_r / d;
        let rdot_t = (2.0 * b * b_t * jet.d_r + b * b * jet.d_rt) / (e2 * d) - rdot * d_t / d;
        let r2 = r * r;
        let n = tau + a * jet.d_t / (e2 * r2) + tau * jet.d_a;
        let n_r = (a_r * jet.d_t + a * jet.d_rt) / (e2 * r2) - 2.0 * a * jet.d_t / (e2 * r2 * r)
            + tau * jet.d_ar;
        let n_t = (a_t * jet.d_t + a * jet.d_tt) / (e2 * r2) + tau * jet.d_at;
        let thdot = n / d;
        Ok(VarRates {
            rdot,
            thdot,
            j: [
                [rdot_r, rdot_t],
                [n_r / d - thdot * d_r / d, n_t / d - thdot * d_t / d],
            ],
        })
    }
}

/// Density of the invariant 2-form G r dr dtheta of the return map at the
/// alpha = 0 section: G = (1 + psi_alpha + tau psi_theta) / B.
pub fn measure_density(chart: &TubeChart, psi: &SpectralCoeffs, r: f64, theta: f64) -> f64 {
    let jet = psi.jet1(0.0, r, theta);
    let tau = chart.curve.tau(0.0);
    let b = 1.0 - chart.eps * chart.curve.kappa(0.0) * r * theta.cos();
    (1.0 + jet.d_a + tau * jet.d_t) / b
}

// ---------------------------------------------------------------------------
// Trajectory integration

/// Runs one DOP853 segment and returns the end state; sparse output, both
/// integration directions supported.
///
/// Error control is purely absolute: `atol` bounds the local error per step
/// componentwise, lifted angles included. A relative weight would let the
/// permitted error grow with the unwrapped angle, breaking accuracy bounds
/// stated in units of the caller tolerance.
///
/// All systems fed through here must be autonomous, with flow time carried
/// as the leading state component: the integrator's 12th stage node is
/// defective (it evaluates at the step start instead of the step end), which
/// silently degrades the order and error estimate of any right-hand side
/// that reads the independent variable. Time as a state component is
/// reconstructed through the stage weights, which are sound, so the
/// augmented formulation restores full order. The stock stiffness heuristic
/// is disabled: near machine-tight tolerances its Lipschitz estimate divides
/// roundoff noise by roundoff noise and misfires on smooth fields.
fn run_segment<const N: usize, F>(
    f: F,
    s0: f64,
    s1: f64,
    y0: SVector<f64, N>,
    atol: f64,
) -> std::result::Result<SVector<f64, N>, String>
where
    F: System<f64, SVector<f64, N>>,
{
    if s1 == s0 {
        return Ok(y0);
    }
    let mut stepper = Dop853::from_param(
        f,
        s0,
        s1,
        s1 - s0,
        y0,
        0.0,
        atol,
        0.9,
        0.0,
        0.333,
        6.0,
        s1 - s0,
        0.0,
        10_000_000,
        u32::MAX,
        OutputType::Sparse,
    );
    match stepper.integrate() {
        Ok(_) => {
            let x_last = *stepper.x_out().last().unwrap();
            if (x_last - s1).abs() > 1e-9 * (1.0 + s1.abs()) {
                Err(format!("integration stopped at s = {x_last}"))
            } else {
                Ok(stepper.y_out().last().unwrap().clone())
            }
        }
        Err(e) => Err(format!("{e:?}")),
    }
}

/// Shared bookkeeping for adapters: first evaluator error wins, and a domain
/// excursion recorded by solout aborts the run.
struct Flags {
    err: RefCell<Option<Error>>,
    left: Cell<Option<(f64, f64)>>,
}

impl Flags {
    fn new() -> Self {
        Flags {
            err: RefCell::new(None),
            left: Cell::new(None),
        }
    }

    fn poisoned(&self) -> bool {
        self.left.get().is_some() || self.err.borrow().is_some()
    }

    fn resolve<const N: usize>(
        &self,
        raw: std::result::Result<SVector<f64, N>, String>,
        s_fallback: f64,
    ) -> Result<SVector<f64, N>> {
        if let Some(e) = self.err.borrow_mut().take() {
            return Err(e);
        }
        if let Some((s, r)) = self.left.get() {
            return Err(Error::LeftDomain { s, r });
        }
        raw.map_err(|detail| Error::StepFailure {
            s: s_fallback,
            detail,
        })
    }
}

/// State layout: (s, r, theta), s the flow time as a state component.
struct PolarSystem<'a> {
    field: &'a FlowField,
    flags: Flags,
}

impl System<f64, SVector<f64, 3>> for &PolarSystem<'_> {
    fn system(&self, _x: f64, y: &SVector<f64, 3>, dy: &mut SVector<f64, 3>) {
        match self.field.velocity(y[0], y[1], y[2]) {
            Ok((_, rdot, thdot)) => {
                dy[0] = 1.0;
                dy[1] = rdot;
                dy[2] = thdot;
            }
            Err(e) => {
                if self.flags.err.borrow().is_none() {
                    *self.flags.err.borrow_mut() = Some(e);
                }
                dy.fill(0.0);
            }
        }
    }

    fn solout(&mut self, s: f64, y: &SVector<f64, 3>, _dy: &SVector<f64, 3>) -> bool {
        let r = y[1];
        if r > DOMAIN_R_MAX || r < 0.5 * R_MIN {
            self.flags.left.set(Some((s, r)));
            return true;
        }
        self.flags.poisoned()
    }
}

/// Integrates the trajectory through `state0` up to flow time `s_end`
/// (either direction), with local error control `tol` per step.
pub fn integrate(
    field: &FlowField,
    state0: &TrajectoryState,
    s_end: f64,
    tol: f64,
) -> Result<TrajectoryState> {
    if !(R_MIN..=DOMAIN_R_MAX).contains(&state0.r) {
        return Err(Error::InvalidInput(format!(
            "trajectory start r = {} outside [{R_MIN}, 1]",
            state0.r
        )));
    }
    let sys = PolarSystem {
        field,
        flags: Flags::new(),
    };
    let raw = run_segment(
        &sys,
        state0.s,
        s_end,
        SVector::<f64, 3>::new(state0.s, state0.r, state0.theta),
        tol * TRAJ_STEP_MARGIN,
    );
    let y = sys.flags.resolve(raw, state0.s)?;
    Ok(TrajectoryState {
        s: s_end,
        r: y[1],
        theta: y[2],
    })
}

/// First-return map of the section {alpha = 0}: the time-ell flow, by
/// isochrony of X. Returns (r, lifted theta).
pub fn poincare_map(field: &FlowField, r0: f64, theta0: f64, tol: f64) -> Result<(f64, f64)> {
    let st = integrate(
        field,
        &TrajectoryState::new(0.0, r0, theta0),
        field.period(),
        tol,
    )?;
    Ok((st.r, st.theta))
}

// ---------------------------------------------------------------------------
// Boundary circle map

/// Per-mode data of psi restricted to r = 1, with phase tables shared per
/// evaluation point; this is what makes the 5-dimensional boundary
/// variational system cheap enough to seed a few hundred trajectories.
struct BoundaryJets {
    w: f64,
    modes: Vec<crate::solver::BoundaryMode>,
    m_max: usize,
    n_max: usize,
}

impl BoundaryJets {
    fn new(psi: &SpectralCoeffs) -> Self {
        let (m_max, n_max) = psi.mode_extents();
        BoundaryJets {
            w: psi.alpha_frequency(),
            modes: psi.boundary_modes(),
            m_max,
            n_max,
        }
    }

    /// Second-order jet of psi at (alpha, 1, theta); d_aa is not populated
    /// (the variational system never differentiates along the flow).
    fn jet2(&self, alpha: f64, theta: f64) -> PsiJet {
        let tab = crate::solver::PhaseTable::new(self.w, alpha, theta, self.m_max, self.n_max);
        let mut out = PsiJet::default();
        for e in &self.modes {
            let kw = self.w * e.m as f64;
            let nf = e.n as f64;
            let phase = tab.phase(e.m, e.n);
            let p = e.v0 * phase;
            let dp = e.v1 * phase;
            out.psi += p.re;
            out.d_a -= kw * p.im;
            out.d_t -= nf * p.im;
            out.d_r += dp.re;
            out.d_ar -= kw * dp.im;
            out.d_rt -= nf * dp.im;
            out.d_rr += (e.v2 * phase).re;
            out.d_at -= kw * nf * p.re;
            out.d_tt -= nf * nf * p.re;
        }
        out
    }
}

/// State layout: (s, theta, M11, M12, M21, M22), M the transverse
/// variational matrix along the boundary trajectory r = 1.
struct BoundarySystem<'a> {
    field: &'a FlowField,
    jets: &'a BoundaryJets,
    flags: Flags,
}

impl System<f64, SVector<f64, 6>> for &BoundarySystem<'_> {
    fn system(&self, _x: f64, y: &SVector<f64, 6>, dy: &mut SVector<f64, 6>) {
        match self.field.variational_boundary(y[0], y[1], self.jets) {
            Ok(v) => {
                dy[0] = 1.0;
                dy[1] = v.thdot;
                dy[2] = v.j[0][0] * y[2] + v.j[0][1] * y[4];
                dy[3] = v.j[0][0] * y[3] + v.j[0][1] * y[5];
                dy[4] = v.j[1][0] * y[2] + v.j[1][1] * y[4];
                dy[5] = v.j[1][0] * y[3] + v.j[1][1] * y[5];
            }
            Err(e) => {
                if self.flags.err.borrow().is_none() {
                    *self.flags.err.borrow_mut() = Some(e);
                }
                dy.fill(0.0);
            }
        }
    }

    fn solout(&mut self, _s: f64, _y: &SVector<f64, 6>, _dy: &SVector<f64, 6>) -> bool {
        self.flags.poisoned()
    }
}

/// The lifted boundary circle map and its first-order data, interpolated
/// trigonometrically from one batch of seed trajectories. All series are
/// 2 pi periodic in the seed angle.
pub struct BoundaryMap {
    increment: TrigSeries,
    deriv: TrigSeries,
    dr_theta: TrigSeries,
    dr_r: TrigSeries,
    pub n_seeds: usize,
    /// Max mismatch between the variational d Pi_theta / d theta0 and the
    /// derivative of the interpolated map; two routes to the same quantity.
    pub consistency: f64,
}

/// Estimator used for the rotation number limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RotationMethod {
    WeightedBirkhoff,
    BirkhoffPlain,
}

/// Rotation number estimate with an error bar from tail differences.
#[derive(Debug, Clone, Copy)]
pub struct RotationEstimate {
    pub omega: f64,
    pub error_estimate: f64,
    pub iterate_count: usize,
    pub method: RotationMethod,
}

/// Builds the boundary circle map of the flow from `n_seeds` boundary
/// trajectories integrated together with their variational systems.
pub fn boundary_map(field: &FlowField, n_seeds: usize, tol: f64) -> Result<BoundaryMap> {
    let n = n_seeds.max(16);
    let jets = BoundaryJets::new(&field.psi);
    let ell = field.period();
    let mut g = vec![0.0; n];
    let mut m11 = vec![0.0; n];
    let mut m21 = vec![0.0; n];
    let mut m22 = vec![0.0; n];
    for (j, gj) in g.iter_mut().enumerate() {
        let theta0 = TAU * j as f64 / n as f64;
        let sys = BoundarySystem {
            field,
            jets: &jets,
            flags: Flags::new(),
        };
        let y0 = SVector::<f64, 6>::new(0.0, theta0, 1.0, 0.0, 0.0, 1.0);
        let raw = run_segment(&sys, 0.0, ell, y0, tol * MAP_STEP_MARGIN);
        let y = sys.flags.resolve(raw, 0.0)?;
        *gj = y[1] - theta0;
        m11[j] = y[2];
        m21[j] = y[4];
        m22[j] = y[5];
    }
    let increment = TrigSeries::from_samples(&g, TAU);
    let deriv = TrigSeries::from_samples(&m22, TAU);
    let dr_theta = TrigSeries::from_samples(&m21, TAU);
    let dr_r = TrigSeries::from_samples(&m11, TAU);
    let mut consistency = 0.0_f64;
    for (j, m22j) in m22.iter().enumerate() {
        let theta0 = TAU * j as f64 / n as f64;
        let from_series = 1.0 + increment.eval_deriv(theta0, 1);
        consistency = consistency.max((from_series - m22j).abs());
    }
    Ok(BoundaryMap {
        increment,
        deriv,
        dr_theta,
        dr_r,
        n_seeds: n,
        consistency,
    })
}

impl BoundaryMap {
    /// Interpolates an externally given lifted circle map; first-order data
    /// comes from the interpolant itself and the radial derivatives are zero
    /// (a map of the circle alone carries no transverse information).
    pub fn from_fn<F: Fn(f64) -> f64>(map: F, n_seeds: usize) -> Self {
        let n = n_seeds.max(16);
        let g: Vec<f64> = (0..n)
            .map(|j| {
                let t = TAU * j as f64 / n as f64;
                map(t) - t
            })
            .collect();
        let increment = TrigSeries::from_samples(&g, TAU);
        let dpi: Vec<f64> = (0..n)
            .map(|j| 1.0 + increment.eval_deriv(TAU * j as f64 / n as f64, 1))
            .collect();
        let zero = TrigSeries::from_samples(&vec![0.0; n], TAU);
        BoundaryMap {
            deriv: TrigSeries::from_samples(&dpi, TAU),
            dr_theta: zero.clone(),
            dr_r: zero,
            increment,
            n_seeds: n,
            consistency: 0.0,
        }
    }

    /// Lifted image of a lifted angle.
    pub fn eval_lift(&self, theta0: f64) -> f64 {
        theta0 + self.increment.eval(theta0)
    }

    /// d Pi_theta / d theta0 on the boundary circle.
    pub fn derivative(&self, theta0: f64) -> f64 {
        self.deriv.eval(theta0)
    }

    /// d Pi_theta / d r0 on the boundary circle (one-sided data, computed by
    /// the variational system, which needs no finite differences).
    pub fn dr_pi_theta(&self, theta0: f64) -> f64 {
        self.dr_theta.eval(theta0)
    }

    /// d Pi_r / d r0 on the boundary circle.
    pub fn dr_pi_r(&self, theta0: f64) -> f64 {
        self.dr_r.eval(theta0)
    }

    /// Rotation number of the lifted map from `n_iter` iterates starting at
    /// `theta0`. The weighted estimator uses the exponential bump
    /// exp(-1/(t(1-t))), which converges super-polynomially for Diophantine
    /// rotation numbers; the plain estimator is the Cesaro fallback.
    pub fn rotation_number(
        &self,
        theta0: f64,
        n_iter: usize,
        method: RotationMethod,
    ) -> RotationEstimate {
        let n = n_iter.max(100);
        let mut incs = Vec::with_capacity(n);
        let mut x = theta0;
        for _ in 0..n {
            let d = self.increment.eval(x);
            incs.push(d);
            x += d;
        }
        let (full, half) = match method {
            RotationMethod::WeightedBirkhoff => {
                (weighted_mean(&incs), weighted_mean(&incs[..n / 2]))
            }
            RotationMethod::BirkhoffPlain => {
                let full = incs.iter().sum::<f64>() / n as f64;
                let half = incs[..n / 2].iter().sum::<f64>() / (n / 2) as f64;
                (full, half)
            }
        };
        RotationEstimate {
            omega: full,
            error_estimate: (full - half).abs().max(f64::EPSILON),
            iterate_count: n,
            method,
        }
    }
}

fn weighted_mean(incs: &[f64]) -> f64 {
    let n = incs.len() as f64;
    let mut sw = 0.0;
    let mut swd = 0.0;
    for (j, &d) in incs.iter().enumerate() {
        let t = (j as f64 + 1.0) / (n + 1.0);
        let w = (-1.0 / (t * (1.0 - t))).exp();
        sw += w;
        swd += w * d;
    }
    swd / sw
}

/// Rotation number of the flow's boundary circle map; builds the map
/// internally. Reuse `boundary_map` + `BoundaryMap::rotation_number` when
/// several analyses share one flow.
pub fn rotation_number(
    field: &FlowField,
    theta0: f64,
    n_iter: usize,
    method: RotationMethod,
) -> Result<RotationEstimate> {
    let map = boundary_map(field, 128, 1e-12)?;
    Ok(map.rotation_number(theta0, n_iter, method))
}

// ---------------------------------------------------------------------------
// Conjugacy to a rigid rotation

/// Circle diffeomorphism Theta(v) = v + H(v) conjugating the boundary map to
/// the rotation by omega, with the zero-mean normalization of H.
#[derive(Debug, Clone)]
pub struct Conjugacy {
    pub omega: f64,
    pub h: TrigSeries,
    pub defect: f64,
    pub newton_iterations: usize,
    /// min over samples of Theta'(v); positive iff orientation preserving.
    pub min_theta_prime: f64,
}

impl Conjugacy {
    pub fn theta(&self, v: f64) -> f64 {
        v + self.h.eval(v)
    }

    pub fn theta_prime(&self, v: f64) -> f64 {
        1.0 + self.h.eval_deriv(v, 1)
    }

    /// Coefficient of sin(v) in H.
    pub fn sin_coefficient(&self) -> f64 {
        -2.0 * self.h.raw_coeffs()[1].im
    }

    /// Conjugacy defect sup |Pi(Theta(v)) - Theta(v + omega)| over a fresh
    /// grid of `n` points (independent of the Newton grid).
    pub fn check_defect(&self, map: &BoundaryMap, n: usize) -> f64 {
        let mut d = 0.0_f64;
        for j in 0..n {
            let v = TAU * (j as f64 + 0.31) / n as f64;
            d = d.max((map.eval_lift(self.theta(v)) - self.theta(v + self.omega)).abs());
        }
        d
    }
}

/// Solves Theta(v + omega) = Pi(Theta(v)) by Newton iteration, linearized
/// diagonally in Fourier space: a residual mode R_k moves H_k by
/// R_k / (e^{ik omega} - 1). Divisors below DIVISOR_FLOOR abort before any
/// iteration; the k = 0 mode is fixed to zero (H has zero mean).
pub fn conjugacy(map: &BoundaryMap, omega: f64, k_modes: usize, tol: f64) -> Result<Conjugacy> {
    for k in 1..=k_modes as i64 {
        let divisor = (Complex64::from_polar(1.0, k as f64 * omega) - 1.0).norm();
        if divisor < DIVISOR_FLOOR {
            return Err(Error::SmallDivisorBreakdown {
                k,
                divisor,
                floor: DIVISOR_FLOOR,
            });
        }
    }
    let n = (4 * k_modes).next_power_of_two();
    let grid: Vec<f64> = (0..n).map(|j| TAU * j as f64 / n as f64).collect();
    let mut h_samples = vec![0.0_f64; n];
    let mut h_series = TrigSeries::from_samples(&h_samples, TAU);
    let mut prev_defect = f64::INFINITY;
    for iter in 0..=MAX_NEWTON {
        let mut res: Vec<Complex64> = Vec::with_capacity(n);
        let mut defect = 0.0_f64;
        for j in 0..n {
            let th = grid[j] + h_samples[j];
            let r = map.eval_lift(th) - (grid[j] + omega + h_series.eval(grid[j] + omega));
            defect = defect.max(r.abs());
            res.push(Complex64::new(r, 0.0));
        }
        if defect <= tol {
            let min_theta_prime = grid
                .iter()
                .map(|&v| 1.0 + h_series.eval_deriv(v, 1))
                .fold(f64::INFINITY, f64::min);
            return Ok(Conjugacy {
                omega,
                h: h_series,
                defect,
                newton_iterations: iter,
                min_theta_prime,
            });
        }
        if defect > 2.0 * prev_defect || iter == MAX_NEWTON {
            return Err(Error::NoConvergence {
                residual: defect,
                iterations: iter,
                target: tol,
            });
        }
        prev_defect = defect;
        fft_forward(&mut res);
        for (k, v) in res.iter_mut().enumerate() {
            let m = signed_mode(k, n);
            if m == 0 || m.unsigned_abs() as usize > k_modes {
                *v = Complex64::new(0.0, 0.0);
            } else {
                *v /= Complex64::from_polar(1.0, m as f64 * omega) - 1.0;
            }
        }
        fft_inverse(&mut res);
        for (hj, rj) in h_samples.iter_mut().zip(&res) {
            *hj += rj.re;
        }
        h_series = TrigSeries::from_samples(&h_samples, TAU);
    }
    unreachable!("newton loop returns or errors before falling through");
}

// ---------------------------------------------------------------------------
// Normal torsion

/// Normal torsion of the return map on the invariant boundary circle:
/// the integral of d_r Pi_theta / (Theta'(v + omega) Theta'(v) G), taken in
/// the conjugating variable over a uniform grid (trapezoid rule, spectrally
/// accurate for periodic integrands).
pub fn normal_torsion(
    field: &FlowField,
    map: &BoundaryMap,
    conj: &Conjugacy,
    n_nodes: usize,
) -> f64 {
    let n = n_nodes.max(16);
    let mut acc = 0.0;
    for i in 0..n {
        let v = TAU * i as f64 / n as f64;
        let th = conj.theta(v);
        let weight = conj.theta_prime(v + conj.omega) * conj.theta_prime(v);
        acc += map.dr_pi_theta(th) / (weight * field.density(1.0, th));
    }
    acc * TAU / n as f64
}

// ---------------------------------------------------------------------------
// Measure preservation

/// Interior variational system: (s, r, theta, M11, M12, M21, M22).
struct VariationalSystem<'a> {
    field: &'a FlowField,
    flags: Flags,
}

impl System<f64, SVector<f64, 7>> for &VariationalSystem<'_> {
    fn system(&self, _x: f64, y: &SVector<f64, 7>, dy: &mut SVector<f64, 7>) {
        match self.field.variational(y[0], y[1], y[2]) {
            Ok(v) => {
                dy[0] = 1.0;
                dy[1] = v.rdot;
                dy[2] = v.thdot;
                dy[3] = v.j[0][0] * y[3] + v.j[0][1] * y[5];
                dy[4] = v.j[0][0] * y[4] + v.j[0][1] * y[6];
                dy[5] = v.j[1][0] * y[3] + v.j[1][1] * y[5];
                dy[6] = v.j[1][0] * y[4] + v.j[1][1] * y[6];
            }
            Err(e) => {
                if self.flags.err.borrow().is_none() {
                    *self.flags.err.borrow_mut() = Some(e);
                }
                dy.fill(0.0);
            }
        }
    }

    fn solout(&mut self, s: f64, y: &SVector<f64, 7>, _dy: &SVector<f64, 7>) -> bool {
        let r = y[1];
        if r > DOMAIN_R_MAX || r < 0.5 * R_MIN {
            self.flags.left.set(Some((s, r)));
            return true;
        }
        self.flags.poisoned()
    }
}

/// Pointwise defects of the invariance identity det(D Pi) G(Pi(p)) = G(p),
/// with D Pi in Cartesian disk coordinates from the polar variational matrix.
#[derive(Debug, Clone)]
pub struct MeasureReport {
    pub max_defect: f64,
    pub defects: Vec<f64>,
}

/// Checks measure preservation of the return map at the given (r, theta)
/// points by integrating the variational equations along each trajectory.
pub fn measure_preservation_check(
    field: &FlowField,
    points: &[(f64, f64)],
    tol: f64,
) -> Result<MeasureReport> {
    let ell = field.period();
    let mut defects = Vec::with_capacity(points.len());
    let mut max_defect = 0.0_f64;
    for &(r0, t0) in points {
        let sys = VariationalSystem {
            field,
            flags: Flags::new(),
        };
        let y0 = SVector::<f64, 7>::from([0.0, r0, t0, 1.0, 0.0, 0.0, 1.0]);
        let raw = run_segment(&sys, 0.0, ell, y0, tol * MAP_STEP_MARGIN);
        let y = sys.flags.resolve(raw, 0.0)?;
        let det_polar = y[3] * y[6] - y[4] * y[5];
        let det = det_polar * y[1] / r0;
        let defect = (det * field.density(y[1], y[2]) - field.density(r0, t0)).abs();
        max_defect = max_defect.max(defect);
        defects.push(defect);
    }
    Ok(MeasureReport {
        max_defect,
        defects,
    })
}

// ---------------------------------------------------------------------------
// Core monodromy

/// Monodromy data of the core trajectory {y = 0} of the straight-tube model
/// field d_alpha + tau (y1 d_{y2} - y2 d_{y1}).
#[derive(Debug, Clone)]
pub struct CoreMonodromy {
    pub matrix: Matrix3<f64>,
    pub eigenvalues: [Complex64; 3],
    pub total_torsion: f64,
    /// Nontrivial eigenvalues on the unit circle and different from +-1.
    pub elliptic: bool,
}

/// Integrates the variational system M' = V(s) M along the core, with
/// V = [[0,0,0],[0,0,-tau],[0,tau,0]]; the result is the identity in the
/// flow direction and a rotation by the total torsion transversally.
pub fn monodromy_core(curve: &ClosedCurve) -> CoreMonodromy {
    let ell = curve.period();
    let n = 8192;
    let h = ell / n as f64;
    let rhs = |s: f64, m: &Matrix3<f64>| -> Matrix3<f64> {
        let tau = curve.tau(s);
        let mut v = Matrix3::zeros();
        v[(1, 2)] = -tau;
        v[(2, 1)] = tau;
        v * m
    };
    let mut m = Matrix3::identity();
    for i in 0..n {
        let s = i as f64 * h;
        let k1 = rhs(s, &m);
        let k2 = rhs(s + 0.5 * h, &(m + k1 * (0.5 * h)));
        let k3 = rhs(s + 0.5 * h, &(m + k2 * (0.5 * h)));
        let k4 = rhs(s + h, &(m + k3 * h));
        m += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    let t = curve.total_torsion();
    let eig = m.complex_eigenvalues();
    let elliptic = (t - (t / PI).round() * PI).abs() > 1e-9;
    CoreMonodromy {
        matrix: m,
        eigenvalues: [eig[0], eig[1], eig[2]],
        total_torsion: t,
        elliptic,
    }
}

// ---------------------------------------------------------------------------
// Diophantine quality

/// Worst constant of the Diophantine condition
/// |omega/2pi - p/k| >= C / k^{1+nu} observed among denominators up to k_max.
#[derive(Debug, Clone, Copy)]
pub struct DiophantineQuality {
    pub c_est: f64,
    pub nu: f64,
    pub k_max: usize,
    pub k_worst: usize,
    pub p_worst: i64,
}

/// C_est = min over 1 <= k <= k_max of k^{1+nu} |omega/2pi - p/k| with the
/// nearest integer p; zero iff omega is (numerically) rational with
/// denominator within range. Requires nu > 1 for the condition to be
/// meaningful; the scan itself runs for any nu.
pub fn diophantine_quality(omega: f64, nu: f64, k_max: usize) -> DiophantineQuality {
    let x = omega / TAU;
    let mut best = f64::INFINITY;
    let mut k_worst = 1;
    let mut p_worst = 0i64;
    for k in 1..=k_max.max(1) {
        let kf = k as f64;
        let p = (kf * x).round();
        let q = kf.powf(1.0 + nu) * (x - p / kf).abs();
        if q < best {
            best = q;
            k_worst = k;
            p_worst = p as i64;
        }
    }
    DiophantineQuality {
        c_est: best,
        nu,
        k_max,
        k_worst,
        p_worst,
    }
}

// ---------------------------------------------------------------------------
// Closed-form trajectory asymptotics

/// Radial coefficient of the first angular correction: (r0^2 - 3)/(8 r0).
pub fn theta1_coefficient(r0: f64) -> f64 {
    (r0 * r0 - 3.0) / (8.0 * r0)
}

/// Coefficient of the kappa^2 tau integral in the second angular
/// correction: (12 - 5 r0^2)/32.
pub fn theta2_integral_coefficient(r0: f64) -> f64 {
    (12.0 - 5.0 * r0 * r0) / 32.0
}

/// integral_0^s kappa^2 tau d alpha, spectrally exact for the curve's
/// interpolated data.
pub fn kappa2_tau_integral(curve: &ClosedCurve, s: f64) -> f64 {
    let (n, ks, ts) = curve.scalar_samples();
    let samples: Vec<f64> = (0..n).map(|i| ks[i] * ks[i] * ts[i]).collect();
    let ell = curve.period();
    let (mean, anti) = periodic_antiderivative(&samples, ell);
    mean * s + periodic_eval(&anti, ell, s) - periodic_eval(&anti, ell, 0.0)
}

/// Perturbative trajectory through (0, r0, theta0) at flow time s, accurate
/// to O(eps^2) in r and O(eps^3) in theta:
///   theta = theta0 + int tau + eps theta1 + eps^2 theta2,
///   r = r0 + eps r1,
/// with the closed-form correction terms in curvature and torsion.
pub fn trajectory_asymptotic(
    curve: &ClosedCurve,
    eps: f64,
    s: f64,
    r0: f64,
    theta0: f64,
) -> (f64, f64) {
    let th0 = theta0 + curve.tau_integral(s);
    let ks = curve.kappa(s);
    let k0 = curve.kappa(0.0);
    let r02 = r0 * r0;
    let th1 = theta1_coefficient(r0) * (ks * th0.sin() - k0 * theta0.sin());
    let th2 = theta2_integral_coefficient(r0) * kappa2_tau_integral(curve, s)
        + 3.0 * (r02 * r02 + 2.0 * r02 - 3.0) * ks * k0 / (64.0 * r02)
            * theta0.cos()
            * th0.sin()
        - (3.0 - r02).powi(2) * ks * k0 / (64.0 * r02) * theta0.sin() * th0.cos()
        + (27.0 - 50.0 * r02 + 25.0 * r02 * r02) * ks * ks / (384.0 * r02) * (2.0 * th0).sin()
        + (27.0 + 14.0 * r02 - 31.0 * r02 * r02) * k0 * k0 / (384.0 * r02) * (2.0 * theta0).sin();
    let r1 = 3.0 * (1.0 - r02) / 8.0 * (ks * th0.cos() - k0 * theta0.cos());
    (r0 + eps * r1, th0 + eps * th1 + eps * eps * th2)
}

// ---------------------------------------------------------------------------
// Assembled circle-map analysis

/// Knobs for `analyze_circle_map`; the defaults match the accuracy targets
/// of the rest of the crate.
#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub n_seeds: usize,
    pub ode_tol: f64,
    pub n_iter: usize,
    pub method: RotationMethod,
    pub k_modes: usize,
    pub conjugacy_tol: f64,
    pub nu: f64,
    pub dioph_k_max: usize,
    pub torsion_nodes: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            n_seeds: 256,
            ode_tol: 1e-12,
            n_iter: 10_000,
            method: RotationMethod::WeightedBirkhoff,
            k_modes: 256,
            conjugacy_tol: 1e-10,
            nu: 1.5,
            dioph_k_max: 1024,
            torsion_nodes: 256,
        }
    }
}

/// Full dynamical record of the boundary circle map: rotation number with
/// error bar, conjugacy, Diophantine quality and normal torsion.
pub struct CircleMapAnalysis {
    pub omega: f64,
    pub omega_error: f64,
    pub iterate_count: usize,
    pub conjugacy: Conjugacy,
    pub dioph: DiophantineQuality,
    pub normal_torsion: f64,
}

pub fn analyze_circle_map(field: &FlowField, opts: &AnalysisOptions) -> Result<CircleMapAnalysis> {
    let map = boundary_map(field, opts.n_seeds, opts.ode_tol)?;
    let rot = map.rotation_number(0.0, opts.n_iter, opts.method);
    let dioph = diophantine_quality(rot.omega, opts.nu, opts.dioph_k_max);
    let conj = conjugacy(&map, rot.omega, opts.k_modes, opts.conjugacy_tol)?;
    let nt = normal_torsion(field, &map, &conj, opts.torsion_nodes);
    Ok(CircleMapAnalysis {
        omega: rot.omega,
        omega_error: rot.error_estimate,
        iterate_count: rot.iterate_count,
        conjugacy: conj,
        dioph,
        normal_torsion: nt,
    })
}
