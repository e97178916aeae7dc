//! Neumann solver for the tube Laplacian.
//!
//! Solves Delta psi = rho on S^1_ell x D^2 with d_r psi(alpha, 1, theta) = 0
//! and the gauge integral psi dalpha dy = 0.  The discretization is
//! collocation on a [`TubeGrid`]: the PDE is enforced at interior radial
//! nodes, the boundary condition at the r = 1 nodes, and GMRES runs on this
//! square system preconditioned by the flat-tube model operator
//!
//! M = d_alpha^2 + (1/eps^2) Delta_y,
//!
//! which diagonalizes per (alpha, theta) Fourier mode into small dense radial
//! blocks.  The full operator differs from M by O(eps) relative terms, so the
//! preconditioned iteration contracts fast for thin tubes.

use crate::chart::{LaplacianCoeffs, TubeChart};
use crate::error::{Error, Result};
use crate::grid::{ModeField, TubeGrid, TubeScalarField};
use crate::spectral::{cheb_derivative_coeffs, clenshaw, signed_mode, RadialBasis};
use nalgebra::{DMatrix, DVector, Dyn, LU};
use num_complex::Complex64;
use std::f64::consts::TAU;
use std::sync::Arc;

/// Source term of the harmonic-field Neumann problem:
/// rho = eps B^-3 r (tau kappa sin theta - kappa' cos theta),
/// minus the divergence of the model field B^-2 (d_alpha + tau d_theta).
pub fn harmonic_source(chart: &TubeChart, grid: &Arc<TubeGrid>) -> TubeScalarField {
    let eps = chart.eps;
    let curve = chart.curve.clone();
    TubeScalarField::from_fn(grid.clone(), |a, r, t| {
        let kappa = curve.kappa(a);
        let tau = curve.tau(a);
        let kappa_p = curve.kappa_prime(a);
        let b = 1.0 - eps * kappa * r * t.cos();
        eps * r * (tau * kappa * t.sin() - kappa_p * t.cos()) / b.powi(3)
    })
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Relative residual target for the preconditioned iteration.
    pub tol: f64,
    /// Krylov dimension cap (no restarts; the iteration is short).
    pub max_iter: usize,
    /// |integral rho dV| above this (relative to ||rho||_inf) is rejected.
    pub compat_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-12,
            max_iter: 120,
            compat_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveReport {
    pub iterations: usize,
    /// Max-norm PDE residual at interior nodes, relative to ||rho||_inf.
    pub residual: f64,
    /// Max |d_r psi| on the boundary after the exact Neumann correction.
    pub bc_defect: f64,
    /// |integral rho dV| as checked against the compatibility condition.
    pub compat: f64,
    pub rho_norm: f64,
}

#[derive(Debug)]
pub struct NeumannSolution {
    pub psi: TubeScalarField,
    pub report: SolveReport,
}

/// Per-mode dense radial blocks of the model operator, LU-factored once.
/// Block key is (|m|, |n|): the wavenumbers enter through their squares and
/// the theta parity only.
pub struct ModelPrecond {
    grid: Arc<TubeGrid>,
    blocks: Vec<LU<f64, Dyn, Dyn>>,
    n_half: usize,
}

impl ModelPrecond {
    pub fn new(grid: &Arc<TubeGrid>, eps: f64) -> Self {
        let g = grid.clone();
        let n_r = g.n_r;
        let m_half = g.n_alpha / 2;
        let n_half = g.n_theta / 2;
        let inv_e2 = 1.0 / (eps * eps);
        let mut blocks = Vec::with_capacity((m_half + 1) * (n_half + 1));
        for m_abs in 0..=m_half {
            let k2 = (TAU * m_abs as f64 / g.period).powi(2);
            for n_abs in 0..=n_half {
                let parity = RadialBasis::parity_index(n_abs as i64);
                let d1 = &g.radial.d1[parity];
                let d2 = &g.radial.d2[parity];
                let bordered = m_abs == 0 && n_abs == 0;
                let dim = if bordered { n_r + 1 } else { n_r };
                let mut a = DMatrix::zeros(dim, dim);
                // boundary row: d_r at r = 1
                for j in 0..n_r {
                    a[(0, j)] = d1[0][j];
                }
                // interior rows: model PDE
                for i in 1..n_r {
                    let r = g.r(i);
                    for j in 0..n_r {
                        a[(i, j)] = inv_e2 * (d2[i][j] + d1[i][j] / r);
                    }
                    a[(i, i)] -= k2 + inv_e2 * (n_abs as f64 / r).powi(2);
                }
                if bordered {
                    // rank fix for the constant kernel: unknown shift mu on
                    // the PDE rows, quadrature gauge row below
                    for i in 1..n_r {
                        a[(i, n_r)] = 1.0;
                    }
                    for j in 0..n_r {
                        a[(n_r, j)] = g.radial.weights_rdr[j];
                    }
                }
                let lu = a.lu();
                assert!(
                    lu.is_invertible(),
                    "model block ({m_abs}, {n_abs}) is singular"
                );
                blocks.push(lu);
            }
        }
        ModelPrecond {
            grid: g,
            blocks,
            n_half,
        }
    }

    /// Apply M^-1 to a residual-layout field (boundary rows are BC values,
    /// interior rows PDE values).
    pub fn apply(&self, v: &TubeScalarField) -> TubeScalarField {
        let g = &self.grid;
        let n_r = g.n_r;
        let modes = v.to_modes();
        let mut out = ModeField::zeros(g.clone());
        let mut col = vec![Complex64::new(0.0, 0.0); n_r];
        for ka in 0..g.n_alpha {
            let m_abs = signed_mode(ka, g.n_alpha).unsigned_abs() as usize;
            for kt in 0..g.n_theta {
                let n_abs = signed_mode(kt, g.n_theta).unsigned_abs() as usize;
                let lu = &self.blocks[m_abs * (self.n_half + 1) + n_abs];
                modes.radial_column(ka, kt, &mut col);
                let bordered = m_abs == 0 && n_abs == 0;
                let dim = if bordered { n_r + 1 } else { n_r };
                let mut re = DVector::zeros(dim);
                let mut im = DVector::zeros(dim);
                for i in 0..n_r {
                    re[i] = col[i].re;
                    im[i] = col[i].im;
                }
                let sre = lu.solve(&re).expect("factored block");
                let sim = lu.solve(&im).expect("factored block");
                for i in 0..n_r {
                    col[i] = Complex64::new(sre[i], sim[i]);
                }
                out.set_radial_column(ka, kt, &col);
            }
        }
        out.to_field()
    }
}

/// The collocation operator: boundary rows carry d_r psi (the Neumann
/// condition), interior rows carry the full Laplacian.
fn apply_collocation(coeffs: &LaplacianCoeffs, psi: &TubeScalarField) -> TubeScalarField {
    let g = &psi.grid;
    let mut out = coeffs.apply(psi);
    let dr = psi.deriv_r(1);
    for ia in 0..g.n_alpha {
        for it in 0..g.n_theta {
            let i = g.idx(ia, 0, it);
            out.values[i] = dr.values[i];
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn nrm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solve the Neumann problem for a given source.  The source must satisfy
/// the compatibility condition integral rho dV = 0.
pub fn solve_neumann(
    chart: &TubeChart,
    grid: &Arc<TubeGrid>,
    rho: &TubeScalarField,
    opts: &SolveOptions,
) -> Result<NeumannSolution> {
    let g = grid.clone();
    let rho_norm = rho.norm_inf();
    let compat = chart.integral_dv(rho).abs();
    if compat > opts.compat_tol * rho_norm.max(1.0) {
        return Err(Error::IncompatibleSource {
            integral: compat,
            tol: opts.compat_tol * rho_norm.max(1.0),
        });
    }

    let coeffs = chart.laplacian_coeffs(&g);
    let precond = ModelPrecond::new(&g, chart.eps);

    // right-hand side in collocation layout: 0 on boundary rows, rho inside
    let mut b = rho.clone();
    for ia in 0..g.n_alpha {
        for it in 0..g.n_theta {
            b.values[g.idx(ia, 0, it)] = 0.0;
        }
    }

    let mean_free = |f: &mut TubeScalarField| {
        let m = f.mean_alpha_y();
        for v in &mut f.values {
            *v -= m;
        }
    };

    // left-preconditioned GMRES, full orthogonalization
    let mut r0 = precond.apply(&b);
    mean_free(&mut r0);
    let beta = nrm2(&r0.values);
    let mut psi = TubeScalarField::zeros(g.clone());
    let mut iterations = 0;
    if beta > 0.0 {
        let max_k = opts.max_iter;
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_k + 1);
        r0.scale(1.0 / beta);
        basis.push(r0.values.clone());
        let mut h = vec![vec![0.0; max_k]; max_k + 1];
        let mut cs = vec![0.0; max_k];
        let mut sn = vec![0.0; max_k];
        let mut s = vec![0.0; max_k + 1];
        s[0] = beta;
        let mut k_used = 0;
        for k in 0..max_k {
            let vk = TubeScalarField {
                grid: g.clone(),
                values: basis[k].clone(),
            };
            let mut w = precond.apply(&apply_collocation(&coeffs, &vk));
            mean_free(&mut w);
            for (j, bj) in basis.iter().enumerate() {
                h[j][k] = dot(&w.values, bj);
                for (wv, bv) in w.values.iter_mut().zip(bj) {
                    *wv -= h[j][k] * bv;
                }
            }
            h[k + 1][k] = nrm2(&w.values);
            // Givens rotations keep an incremental residual estimate
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let denom = f64::hypot(h[k][k], h[k + 1][k]);
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            s[k + 1] = -sn[k] * s[k];
            s[k] *= cs[k];
            k_used = k + 1;
            if s[k + 1].abs() / beta < opts.tol || h[k + 1][k].abs() < 1e-300 {
                break;
            }
            w.scale(1.0 / h[k + 1][k]);
            basis.push(w.values);
        }
        iterations = k_used;
        // back substitution and solution assembly
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut acc = s[i];
            for j in i + 1..k_used {
                acc -= h[i][j] * y[j];
            }
            y[i] = acc / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for (pv, bv) in psi.values.iter_mut().zip(&basis[j]) {
                *pv += yj * bv;
            }
        }
    }

    neumann_cleanup(&mut psi);
    mean_free(&mut psi);

    // honest residual of the final answer
    let lpsi = coeffs.apply(&psi);
    let mut residual = 0.0_f64;
    for ia in 0..g.n_alpha {
        for ir in 1..g.n_r {
            for it in 0..g.n_theta {
                let i = g.idx(ia, ir, it);
                residual = residual.max((lpsi.values[i] - rho.values[i]).abs());
            }
        }
    }
    let dr = psi.deriv_r(1);
    let mut bc_defect = 0.0_f64;
    for ia in 0..g.n_alpha {
        for it in 0..g.n_theta {
            bc_defect = bc_defect.max(dr.values[g.idx(ia, 0, it)].abs());
        }
    }
    let report = SolveReport {
        iterations,
        residual: residual / rho_norm.max(f64::MIN_POSITIVE),
        bc_defect,
        compat,
        rho_norm,
    };
    if report.residual > 1e4 * opts.tol {
        return Err(Error::NoConvergence {
            residual: report.residual,
            iterations,
            target: opts.tol,
        });
    }
    Ok(NeumannSolution { psi, report })
}

/// Solve for the harmonic-field potential of the chart.
pub fn solve_harmonic(
    chart: &TubeChart,
    grid: &Arc<TubeGrid>,
    opts: &SolveOptions,
) -> Result<NeumannSolution> {
    let rho = harmonic_source(chart, grid);
    solve_neumann(chart, grid, &rho, opts)
}

/// Make d_r psi(alpha, 1, theta) vanish exactly: per (alpha, theta) mode,
/// subtract the parity-matched polynomial (r^2/2 or r^3/3, unit slope at
/// r = 1) scaled by the remaining boundary derivative.  The correction is of
/// the order of the converged residual, so it does not disturb the PDE.
pub fn neumann_cleanup(psi: &mut TubeScalarField) {
    let g = psi.grid.clone();
    let n_r = g.n_r;
    let mut modes = psi.to_modes();
    let mut col = vec![Complex64::new(0.0, 0.0); n_r];
    for ka in 0..g.n_alpha {
        for kt in 0..g.n_theta {
            let parity = RadialBasis::parity_index(signed_mode(kt, g.n_theta));
            let d1 = &g.radial.d1[parity];
            modes.radial_column(ka, kt, &mut col);
            let mut slope = Complex64::new(0.0, 0.0);
            for (j, &cj) in col.iter().enumerate() {
                slope += cj * d1[0][j];
            }
            for (i, cv) in col.iter_mut().enumerate() {
                let r = g.r(i);
                let gr = if parity == 0 { 0.5 * r * r } else { r * r * r / 3.0 };
                *cv -= slope * gr;
            }
            modes.set_radial_column(ka, kt, &col);
        }
    }
    *psi = modes.to_field();
}

/// Jet of a scalar field at one off-grid point, in tube coordinates.
#[derive(Debug, Clone, Copy, Default)]
pub struct PsiJet {
    pub psi: f64,
    pub d_a: f64,
    pub d_r: f64,
    pub d_t: f64,
    pub d_aa: f64,
    pub d_ar: f64,
    pub d_at: f64,
    pub d_rr: f64,
    pub d_rt: f64,
    pub d_tt: f64,
}

struct ModeEntry {
    /// signed alpha wavenumber index m (phase e^{i 2 pi m alpha / ell})
    m: i64,
    /// signed theta wavenumber n
    n: i64,
    /// Chebyshev coefficients of the radial profile and its r-derivatives
    c0: Vec<Complex64>,
    c1: Vec<Complex64>,
    c2: Vec<Complex64>,
}

/// Sparse spectral representation of a grid field for off-grid evaluation:
/// Fourier in alpha and theta, Chebyshev in r, truncated to the bins that
/// carry relative weight above the threshold.
pub struct SpectralCoeffs {
    period: f64,
    entries: Vec<ModeEntry>,
    m_max: usize,
    n_max: usize,
}

/// One Fourier mode of a field restricted to the boundary circle r = 1:
/// values of the radial profile and its first two r-derivatives at r = 1.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BoundaryMode {
    pub m: i64,
    pub n: i64,
    pub v0: Complex64,
    pub v1: Complex64,
    pub v2: Complex64,
}

/// Phase tables e^{i k w alpha}, e^{i n theta} for k, n >= 0, built once per
/// evaluation point; negative modes are conjugates.
pub(crate) struct PhaseTable {
    pa: Vec<Complex64>,
    pt: Vec<Complex64>,
}

impl PhaseTable {
    pub fn new(w_alpha: f64, alpha: f64, theta: f64, m_max: usize, n_max: usize) -> Self {
        let mut pa = Vec::with_capacity(m_max + 1);
        let mut pt = Vec::with_capacity(n_max + 1);
        let base_a = Complex64::from_polar(1.0, w_alpha * alpha);
        let base_t = Complex64::from_polar(1.0, theta);
        let mut acc = Complex64::new(1.0, 0.0);
        for _ in 0..=m_max {
            pa.push(acc);
            acc *= base_a;
        }
        acc = Complex64::new(1.0, 0.0);
        for _ in 0..=n_max {
            pt.push(acc);
            acc *= base_t;
        }
        PhaseTable { pa, pt }
    }

    #[inline]
    pub fn phase(&self, m: i64, n: i64) -> Complex64 {
        let a = if m >= 0 {
            self.pa[m as usize]
        } else {
            self.pa[(-m) as usize].conj()
        };
        let t = if n >= 0 {
            self.pt[n as usize]
        } else {
            self.pt[(-n) as usize].conj()
        };
        a * t
    }
}

impl SpectralCoeffs {
    pub fn from_field(field: &TubeScalarField) -> Self {
        Self::with_threshold(field, 1e-13)
    }

    pub fn with_threshold(field: &TubeScalarField, rel_tol: f64) -> Self {
        let g = &field.grid;
        let modes = field.to_modes();
        let norm = 1.0 / (g.n_alpha * g.n_theta) as f64;
        let n_r = g.n_r;
        let mut col = vec![Complex64::new(0.0, 0.0); n_r];
        // largest column magnitude sets the retention scale
        let mut max_mag = 0.0_f64;
        for ka in 0..g.n_alpha {
            for kt in 0..g.n_theta {
                modes.radial_column(ka, kt, &mut col);
                for c in &col {
                    max_mag = max_mag.max(c.norm() * norm);
                }
            }
        }
        let floor = rel_tol * max_mag;
        let mut entries = Vec::new();
        for ka in 0..g.n_alpha {
            let m = signed_mode(ka, g.n_alpha);
            for kt in 0..g.n_theta {
                let n = signed_mode(kt, g.n_theta);
                modes.radial_column(ka, kt, &mut col);
                let mag = col.iter().fold(0.0_f64, |acc, c| acc.max(c.norm())) * norm;
                if mag <= floor {
                    continue;
                }
                for c in col.iter_mut() {
                    *c *= norm;
                }
                let parity = RadialBasis::parity_index(n);
                let c0 = g.radial.coeffs(&col, parity);
                let c1 = cheb_derivative_coeffs(&c0);
                let c2 = cheb_derivative_coeffs(&c1);
                entries.push(ModeEntry { m, n, c0, c1, c2 });
            }
        }
        let m_max = entries.iter().map(|e| e.m.unsigned_abs() as usize).max().unwrap_or(0);
        let n_max = entries.iter().map(|e| e.n.unsigned_abs() as usize).max().unwrap_or(0);
        SpectralCoeffs {
            period: g.period,
            entries,
            m_max,
            n_max,
        }
    }

    /// The zero function, as an empty mode set.
    pub(crate) fn empty(period: f64) -> Self {
        SpectralCoeffs {
            period,
            entries: Vec::new(),
            m_max: 0,
            n_max: 0,
        }
    }

    /// One hand-built mode with prescribed radial jet data; the three
    /// Chebyshev vectors need not be derivatives of one another.
    #[cfg(test)]
    pub(crate) fn test_mode(
        period: f64,
        m: i64,
        n: i64,
        c0: Vec<Complex64>,
        c1: Vec<Complex64>,
        c2: Vec<Complex64>,
    ) -> Self {
        SpectralCoeffs {
            period,
            entries: vec![ModeEntry { m, n, c0, c1, c2 }],
            m_max: m.unsigned_abs() as usize,
            n_max: n.unsigned_abs() as usize,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.entries.len()
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn eval(&self, alpha: f64, r: f64, theta: f64) -> f64 {
        let w = TAU / self.period;
        let tab = PhaseTable::new(w, alpha, theta, self.m_max, self.n_max);
        let mut acc = 0.0;
        for e in &self.entries {
            acc += (clenshaw(&e.c0, r) * tab.phase(e.m, e.n)).re;
        }
        acc
    }

    /// First-order jet (values and first derivatives only).
    pub fn jet1(&self, alpha: f64, r: f64, theta: f64) -> PsiJet {
        self.jet_impl(alpha, r, theta, false)
    }

    /// Full second-order jet.
    pub fn jet2(&self, alpha: f64, r: f64, theta: f64) -> PsiJet {
        self.jet_impl(alpha, r, theta, true)
    }

    fn jet_impl(&self, alpha: f64, r: f64, theta: f64, second: bool) -> PsiJet {
        let w = TAU / self.period;
        let tab = PhaseTable::new(w, alpha, theta, self.m_max, self.n_max);
        let mut out = PsiJet::default();
        for e in &self.entries {
            let kw = w * e.m as f64;
            let nf = e.n as f64;
            let phase = tab.phase(e.m, e.n);
            let p = clenshaw(&e.c0, r) * phase;
            let dp = clenshaw(&e.c1, r) * phase;
            out.psi += p.re;
            out.d_a -= kw * p.im;
            out.d_r += dp.re;
            out.d_t -= nf * p.im;
            if second {
                let ddp = clenshaw(&e.c2, r) * phase;
                out.d_aa -= kw * kw * p.re;
                out.d_ar -= kw * dp.im;
                out.d_at -= kw * nf * p.re;
                out.d_rr += ddp.re;
                out.d_rt -= nf * dp.im;
                out.d_tt -= nf * nf * p.re;
            }
        }
        out
    }

    /// Sum-of-moduli bounds on |d psi / d alpha| and |d psi / d theta| over
    /// the whole tube (Chebyshev coefficients dominate the radial profile).
    pub fn deriv_linf_bound(&self) -> (f64, f64) {
        let w = TAU / self.period;
        let mut ba = 0.0;
        let mut bt = 0.0;
        for e in &self.entries {
            let s: f64 = e.c0.iter().map(|c| c.norm()).sum();
            ba += (e.m as f64 * w).abs() * s;
            bt += (e.n as f64).abs() * s;
        }
        (ba, bt)
    }

    /// Modes collapsed to the boundary circle r = 1, where every Chebyshev
    /// polynomial equals 1 and the radial sums become plain coefficients.
    pub(crate) fn boundary_modes(&self) -> Vec<BoundaryMode> {
        let sum = |c: &[Complex64]| c.iter().fold(Complex64::new(0.0, 0.0), |a, b| a + b);
        self.entries
            .iter()
            .map(|e| BoundaryMode {
                m: e.m,
                n: e.n,
                v0: sum(&e.c0),
                v1: sum(&e.c1),
                v2: sum(&e.c2),
            })
            .collect()
    }

    pub(crate) fn alpha_frequency(&self) -> f64 {
        TAU / self.period
    }

    pub(crate) fn mode_extents(&self) -> (usize, usize) {
        (self.m_max, self.n_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{circle, trefoil_raw};
    use approx::assert_relative_eq;

    fn trefoil_chart(eps: f64) -> TubeChart {
        let c = trefoil_raw().arclength_reparam(160).unwrap();
        TubeChart::new(Arc::new(c), eps).unwrap()
    }

    #[test]
    fn circle_source_vanishes_and_solution_is_zero() {
        // constant curvature, zero torsion: the model field is already
        // divergence free, psi == 0
        let chart = TubeChart::new(Arc::new(circle()), 0.1).unwrap();
        let grid = TubeGrid::new(16, 8, 16, chart.period()).unwrap();
        let rho = harmonic_source(&chart, &grid);
        assert!(rho.norm_inf() < 1e-13);
        let sol = solve_neumann(&chart, &grid, &rho, &SolveOptions::default()).unwrap();
        assert!(sol.psi.norm_inf() < 1e-12);
    }

    #[test]
    fn manufactured_solution_recovered() {
        // psi* = (r^4 - 2 r^2) cos 2theta g(alpha) satisfies the boundary
        // condition exactly; rho* := Delta psi* is consistent by
        // construction, and the solver must recover psi* itself.
        let chart = trefoil_chart(0.05);
        let ell = chart.period();
        let grid = TubeGrid::new(256, 14, 32, ell).unwrap();
        let psi_star = TubeScalarField::from_fn(grid.clone(), |a, r, t| {
            let ga = (TAU * a / ell).cos() + 0.3 * (2.0 * TAU * a / ell).sin();
            (r.powi(4) - 2.0 * r * r) * (2.0 * t).cos() * ga
        });
        // gauge the expected answer the same way the solver does
        let mut expected = psi_star.clone();
        let m = expected.mean_alpha_y();
        for v in &mut expected.values {
            *v -= m;
        }
        let rho = chart.laplacian_apply(&psi_star);
        let sol = solve_neumann(&chart, &grid, &rho, &SolveOptions::default()).unwrap();
        let err = sol.psi.sub(&expected).norm_inf();
        assert!(err < 1e-8, "manufactured solution error {err}");
        assert!(sol.report.bc_defect < 1e-12);
        assert!(sol.report.iterations < 60, "{} iterations", sol.report.iterations);
    }

    #[test]
    fn harmonic_solve_scales_as_eps_squared() {
        let opts = SolveOptions::default();
        let mut norms = Vec::new();
        for eps in [0.1, 0.05] {
            let chart = trefoil_chart(eps);
            let grid = TubeGrid::new(256, 12, 32, chart.period()).unwrap();
            let sol = solve_harmonic(&chart, &grid, &opts).unwrap();
            norms.push(sol.psi.norm_inf());
        }
        let order = (norms[0] / norms[1]).log2();
        assert!(
            (order - 2.0).abs() < 0.35,
            "psi should shrink like eps^2, got order {order}"
        );
    }

    #[test]
    fn spectral_coeffs_jets_match_closed_form() {
        let grid = TubeGrid::new(32, 12, 32, TAU).unwrap();
        // smooth in Cartesian disk coordinates: (r^3 - 3 r) cos t is a
        // polynomial in y, as is (r^4 - 2 r^2) cos 2t
        let f = TubeScalarField::from_fn(grid.clone(), |a, r, t| {
            (r.powi(3) - 3.0 * r) * t.cos() * (2.0 * a).sin()
                + (r.powi(4) - 2.0 * r * r) * (2.0 * t).cos()
        });
        let sc = SpectralCoeffs::from_field(&f);
        for &(a, r, t) in &[(0.37, 0.81, 1.93), (4.4, 0.33, 5.5), (2.0, 0.99, 0.01)] {
            let jet = sc.jet2(a, r, t);
            let p3 = r.powi(3) - 3.0 * r;
            let dp3 = 3.0 * r * r - 3.0;
            let ddp3 = 6.0 * r;
            let p4 = r.powi(4) - 2.0 * r * r;
            let dp4 = 4.0 * r.powi(3) - 4.0 * r;
            let ddp4 = 12.0 * r * r - 4.0;
            let (s2a, c2a) = (2.0 * a).sin_cos();
            assert_relative_eq!(
                jet.psi,
                p3 * t.cos() * s2a + p4 * (2.0 * t).cos(),
                epsilon = 1e-11
            );
            assert_relative_eq!(jet.d_a, 2.0 * p3 * t.cos() * c2a, epsilon = 1e-11);
            assert_relative_eq!(
                jet.d_r,
                dp3 * t.cos() * s2a + dp4 * (2.0 * t).cos(),
                epsilon = 1e-10
            );
            assert_relative_eq!(
                jet.d_t,
                -p3 * t.sin() * s2a - 2.0 * p4 * (2.0 * t).sin(),
                epsilon = 1e-11
            );
            assert_relative_eq!(
                jet.d_rr,
                ddp3 * t.cos() * s2a + ddp4 * (2.0 * t).cos(),
                epsilon = 1e-9
            );
            assert_relative_eq!(jet.d_ar, 2.0 * dp3 * t.cos() * c2a, epsilon = 1e-10);
            assert_relative_eq!(jet.d_at, -2.0 * p3 * t.sin() * c2a, epsilon = 1e-11);
            assert_relative_eq!(
                jet.d_rt,
                -dp3 * t.sin() * s2a - 2.0 * dp4 * (2.0 * t).sin(),
                epsilon = 1e-10
            );
            assert_relative_eq!(
                jet.d_tt,
                -p3 * t.cos() * s2a - 4.0 * p4 * (2.0 * t).cos(),
                epsilon = 1e-11
            );
            assert_relative_eq!(jet.d_aa, -4.0 * p3 * t.cos() * s2a, epsilon = 1e-11);
            // plain eval agrees with the jet value
            assert_relative_eq!(sc.eval(a, r, t), jet.psi, epsilon = 1e-13);
        }
    }

    #[test]
    fn incompatible_source_rejected() {
        let chart = trefoil_chart(0.05);
        let grid = TubeGrid::new(16, 8, 16, chart.period()).unwrap();
        let bad = TubeScalarField::from_fn(grid.clone(), |_, _, _| 1.0);
        match solve_neumann(&chart, &grid, &bad, &SolveOptions::default()) {
            Err(Error::IncompatibleSource { .. }) => {}
            other => panic!("expected IncompatibleSource, got {other:?}"),
        }
    }
}
