//! Shared spectral machinery: periodic Fourier helpers (FFT based) and a
//! Chebyshev radial basis on (0, 1] that handles the polar coordinate
//! singularity by parity.
//!
//! The radial grid is the positive half of a Chebyshev-Lobatto grid with an
//! odd polynomial degree, so r = 0 is never a node.  A scalar field on the
//! disk, expanded in theta modes e^{i n theta}, has radial profiles with
//! parity (-1)^n; differentiation matrices restricted to the positive nodes
//! fold that parity in, which keeps spectral accuracy without ever dividing
//! by r at the axis.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, LazyLock, Mutex};

const TAU: f64 = std::f64::consts::TAU;

// ---------------------------------------------------------------------------
// FFT plumbing

struct PlanCache {
    fwd: HashMap<usize, Arc<dyn Fft<f64>>>,
    inv: HashMap<usize, Arc<dyn Fft<f64>>>,
}

static PLANS: LazyLock<Mutex<PlanCache>> = LazyLock::new(|| {
    Mutex::new(PlanCache {
        fwd: HashMap::new(),
        inv: HashMap::new(),
    })
});

/// In-place forward FFT (no normalization).
pub fn fft_forward(buf: &mut [Complex64]) {
    let plan = {
        let mut cache = PLANS.lock().unwrap();
        let n = buf.len();
        cache
            .fwd
            .entry(n)
            .or_insert_with(|| FftPlanner::new().plan_fft_forward(n))
            .clone()
    };
    plan.process(buf);
}

/// In-place inverse FFT, normalized so that inverse(forward(x)) == x.
pub fn fft_inverse(buf: &mut [Complex64]) {
    let plan = {
        let mut cache = PLANS.lock().unwrap();
        let n = buf.len();
        cache
            .inv
            .entry(n)
            .or_insert_with(|| FftPlanner::new().plan_fft_inverse(n))
            .clone()
    };
    plan.process(buf);
    let scale = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Signed mode number for FFT bin `k` of an `n`-point transform.
#[inline]
pub fn signed_mode(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Spectral derivative of uniformly sampled periodic data.
///
/// `period` is the sample period in the physical variable; `order` >= 1.
/// The Nyquist mode is zeroed for odd orders (its derivative is not
/// representable on the grid).
pub fn periodic_derivative(samples: &[f64], period: f64, order: u32) -> Vec<f64> {
    let n = samples.len();
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_forward(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let m = signed_mode(k, n);
        if order % 2 == 1 && n % 2 == 0 && k == n / 2 {
            *v = Complex64::new(0.0, 0.0);
            continue;
        }
        let ik = Complex64::new(0.0, TAU * m as f64 / period);
        *v *= ik.powu(order);
    }
    fft_inverse(&mut buf);
    buf.into_iter().map(|v| v.re).collect()
}

/// Trigonometric interpolation of uniformly sampled periodic data,
/// evaluated at arbitrary `t` (same convention: samples at j*period/n).
pub fn periodic_eval(samples: &[f64], period: f64, t: f64) -> f64 {
    let n = samples.len();
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_forward(&mut buf);
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, v) in buf.iter().enumerate() {
        let m = signed_mode(k, n) as f64;
        acc += v * Complex64::from_polar(1.0, TAU * m * t / period);
    }
    acc.re / n as f64
}

/// Antiderivative of periodic data split as mean * t + periodic part.
///
/// Returns (mean, periodic_part_samples), where the periodic part has zero
/// mean and F(t) = mean * t + P(t) - P(0) is an antiderivative of the input.
pub fn periodic_antiderivative(samples: &[f64], period: f64) -> (f64, Vec<f64>) {
    let n = samples.len();
    let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fft_forward(&mut buf);
    let mean = buf[0].re / n as f64;
    buf[0] = Complex64::new(0.0, 0.0);
    for (k, v) in buf.iter_mut().enumerate() {
        let m = signed_mode(k, n);
        if m == 0 {
            continue;
        }
        if n % 2 == 0 && k == n / 2 {
            *v = Complex64::new(0.0, 0.0);
            continue;
        }
        *v /= Complex64::new(0.0, TAU * m as f64 / period);
    }
    fft_inverse(&mut buf);
    (mean, buf.into_iter().map(|v| v.re).collect())
}

/// Trigonometric interpolant of uniform periodic samples, precomputed for
/// repeated off-grid evaluation.
#[derive(Debug, Clone)]
pub struct TrigSeries {
    period: f64,
    /// coeffs[k] for signed mode m = signed_mode(k, n), already divided by n.
    coeffs: Vec<Complex64>,
}

impl TrigSeries {
    pub fn from_samples(samples: &[f64], period: f64) -> Self {
        let n = samples.len();
        let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        fft_forward(&mut buf);
        for v in buf.iter_mut() {
            *v /= n as f64;
        }
        TrigSeries {
            period,
            coeffs: buf,
        }
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// FFT bins divided by n: bin k holds the signed-mode coefficient, so a
    /// real signal has cos_k = 2 Re c_k and sin_k = -2 Im c_k for 0 < k < n/2.
    pub fn raw_coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Value at arbitrary t; derivatives via `eval_deriv`.
    pub fn eval(&self, t: f64) -> f64 {
        self.eval_deriv(t, 0)
    }

    pub fn eval_deriv(&self, t: f64, order: u32) -> f64 {
        let n = self.coeffs.len();
        let base = Complex64::from_polar(1.0, TAU * t / self.period);
        // positive modes by recurrence, negative modes are conjugates of the
        // real-sample spectrum; sum positive half and double.
        let mut acc = if order == 0 {
            self.coeffs[0]
        } else {
            Complex64::new(0.0, 0.0)
        };
        let mut phase = Complex64::new(1.0, 0.0);
        let top = (n - 1) / 2;
        for m in 1..=top {
            phase *= base;
            let ik = Complex64::new(0.0, TAU * m as f64 / self.period).powu(order);
            acc += self.coeffs[m] * ik * phase * 2.0;
        }
        // Nyquist mode (even n): real cosine mode, keep for order 0 only.
        if n % 2 == 0 && order == 0 {
            let m = (n / 2) as f64;
            acc += self.coeffs[n / 2] * (TAU * m * t / self.period).cos();
        }
        acc.re
    }
}

// ---------------------------------------------------------------------------
// Gauss-Legendre quadrature (used for setup-time exact integrals)

/// Nodes and weights of n-point Gauss-Legendre quadrature on [a, b].
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-based initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_deriv(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_deriv(n, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    for i in 0..n {
        nodes[i] = mid + half * nodes[i];
        weights[i] *= half;
    }
    (nodes, weights)
}

fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = pk;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

// ---------------------------------------------------------------------------
// Chebyshev radial basis

/// Chebyshev-Lobatto differentiation and quadrature on the positive half
/// grid, with parity folding for the polar axis.
///
/// `degree` is the (odd) polynomial degree N of the full [-1, 1] grid; the
/// positive nodes are x_j = cos(j pi / N) for j = 0 .. (N-1)/2, stored in
/// descending order with x_0 = 1.
#[derive(Debug)]
pub struct RadialBasis {
    pub degree: usize,
    /// Positive nodes, descending; nodes[0] == 1.0.
    pub nodes: Vec<f64>,
    /// First derivative at positive nodes for even / odd radial profiles.
    pub d1: [Vec<Vec<f64>>; 2],
    /// Second derivative, same layout.
    pub d2: [Vec<Vec<f64>>; 2],
    /// Quadrature weights: sum_k w[k] f(nodes[k]) == integral_0^1 f(r) r dr
    /// for f an even polynomial profile of the basis.
    pub weights_rdr: Vec<f64>,
    /// Full-grid values -> Chebyshev coefficients transform (dense).
    dct: Vec<Vec<f64>>,
}

impl RadialBasis {
    /// Build the basis with `n_r` positive nodes (full degree 2*n_r - 1).
    pub fn new(n_r: usize) -> Self {
        assert!(n_r >= 4, "radial resolution too low");
        let n = 2 * n_r - 1; // odd degree: no node at zero
        let nfull = n + 1;
        let x: Vec<f64> = (0..nfull)
            .map(|j| (std::f64::consts::PI * j as f64 / n as f64).cos())
            .collect();

        // Full Lobatto differentiation matrix with the negative-sum trick.
        let c = |i: usize| -> f64 {
            let base = if i == 0 || i == n { 2.0 } else { 1.0 };
            base * if i % 2 == 0 { 1.0 } else { -1.0 }
        };
        let mut d = vec![vec![0.0; nfull]; nfull];
        for i in 0..nfull {
            let mut row_sum = 0.0;
            for j in 0..nfull {
                if i != j {
                    d[i][j] = c(i) / c(j) / (x[i] - x[j]);
                    row_sum += d[i][j];
                }
            }
            d[i][i] = -row_sum;
        }
        let mut d2full = vec![vec![0.0; nfull]; nfull];
        for i in 0..nfull {
            for j in 0..nfull {
                let mut s = 0.0;
                for k in 0..nfull {
                    s += d[i][k] * d[k][j];
                }
                d2full[i][j] = s;
            }
        }

        // Parity folding: value at node N-j is p * value at node j.
        let fold = |m: &Vec<Vec<f64>>, p: f64| -> Vec<Vec<f64>> {
            let mut out = vec![vec![0.0; n_r]; n_r];
            for i in 0..n_r {
                for j in 0..n_r {
                    out[i][j] = m[i][j] + p * m[i][n - j];
                }
            }
            out
        };
        let d1 = [fold(&d, 1.0), fold(&d, -1.0)];
        let d2 = [fold(&d2full, 1.0), fold(&d2full, -1.0)];

        let nodes: Vec<f64> = x[..n_r].to_vec();

        // Quadrature weights for integral_0^1 f(r) r dr, exact for even
        // profiles spanned by T_0, T_2, ..., T_{2(n_r-1)}.
        let (gl_x, gl_w) = gauss_legendre(2 * n_r + 8, 0.0, 1.0);
        let mut vt = nalgebra::DMatrix::zeros(n_r, n_r);
        let mut m = nalgebra::DVector::zeros(n_r);
        for j in 0..n_r {
            for k in 0..n_r {
                vt[(j, k)] = cheb_t(2 * j, nodes[k]);
            }
            m[j] = gl_x
                .iter()
                .zip(&gl_w)
                .map(|(&xx, &ww)| cheb_t(2 * j, xx) * xx * ww)
                .sum::<f64>();
        }
        let weights_rdr = vt
            .lu()
            .solve(&m)
            .expect("radial quadrature system is nonsingular")
            .iter()
            .copied()
            .collect();

        // Values-on-full-grid -> Chebyshev coefficients (Lobatto DCT).
        let mut dct = vec![vec![0.0; nfull]; nfull];
        for k in 0..nfull {
            let ck = if k == 0 || k == n { 2.0 } else { 1.0 };
            for j in 0..nfull {
                let cj = if j == 0 || j == n { 2.0 } else { 1.0 };
                dct[k][j] = 2.0 / (n as f64 * ck * cj)
                    * (std::f64::consts::PI * (j * k) as f64 / n as f64).cos();
            }
        }

        RadialBasis {
            degree: n,
            nodes,
            d1,
            d2,
            weights_rdr,
            dct,
        }
    }

    #[inline]
    pub fn n_r(&self) -> usize {
        self.nodes.len()
    }

    /// Index into the parity-folded matrices: 0 for even profiles, 1 for odd.
    #[inline]
    pub fn parity_index(theta_mode: i64) -> usize {
        (theta_mode.rem_euclid(2)) as usize
    }

    /// Chebyshev coefficients (length degree+1) of a profile given at the
    /// positive nodes, extended by parity to the full grid.
    pub fn coeffs(&self, values: &[Complex64], parity: usize) -> Vec<Complex64> {
        let n = self.degree;
        let nfull = n + 1;
        let n_r = self.n_r();
        let sign = if parity == 0 { 1.0 } else { -1.0 };
        let mut full = vec![Complex64::new(0.0, 0.0); nfull];
        for j in 0..n_r {
            full[j] = values[j];
            full[n - j] = values[j] * sign;
        }
        let mut out = vec![Complex64::new(0.0, 0.0); nfull];
        for (k, row) in self.dct.iter().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &w) in row.iter().enumerate() {
                acc += full[j] * w;
            }
            out[k] = acc;
        }
        out
    }
}

/// T_n(x) by the stable three-term recurrence.
pub fn cheb_t(n: usize, x: f64) -> f64 {
    let mut t0 = 1.0;
    if n == 0 {
        return t0;
    }
    let mut t1 = x;
    for _ in 1..n {
        let t2 = 2.0 * x * t1 - t0;
        t0 = t1;
        t1 = t2;
    }
    t1
}

/// Coefficients of the derivative of a Chebyshev series.
pub fn cheb_derivative_coeffs(a: &[Complex64]) -> Vec<Complex64> {
    let n = a.len();
    let mut c = vec![Complex64::new(0.0, 0.0); n];
    if n < 2 {
        return c;
    }
    c[n - 2] = a[n - 1] * (2.0 * (n - 1) as f64);
    for k in (0..n.saturating_sub(2)).rev() {
        let c2 = if k + 2 < n {
            c[k + 2]
        } else {
            Complex64::new(0.0, 0.0)
        };
        c[k] = c2 + a[k + 1] * (2.0 * (k + 1) as f64);
    }
    c[0] *= 0.5;
    c
}

/// Clenshaw evaluation of a (complex-coefficient) Chebyshev series at x.
pub fn clenshaw(a: &[Complex64], x: f64) -> Complex64 {
    let mut b1 = Complex64::new(0.0, 0.0);
    let mut b2 = Complex64::new(0.0, 0.0);
    for k in (1..a.len()).rev() {
        let b0 = a[k] + b1 * (2.0 * x) - b2;
        b2 = b1;
        b1 = b0;
    }
    a[0] + b1 * x - b2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_sin_is_cos() {
        let n = 64;
        let period = TAU;
        let samples: Vec<f64> = (0..n).map(|j| (TAU * j as f64 / n as f64).sin()).collect();
        let d = periodic_derivative(&samples, period, 1);
        for (j, v) in d.iter().enumerate() {
            let t = TAU * j as f64 / n as f64;
            assert!((v - t.cos()).abs() < 1e-12, "j={j} err={}", (v - t.cos()).abs());
        }
    }

    #[test]
    fn antiderivative_recovers_mean_and_periodic_part() {
        // f(t) = 2 + cos t: F(t) = 2 t + sin t.
        let n = 32;
        let samples: Vec<f64> = (0..n).map(|j| 2.0 + (TAU * j as f64 / n as f64).cos()).collect();
        let (mean, per) = periodic_antiderivative(&samples, TAU);
        assert!((mean - 2.0).abs() < 1e-13);
        for (j, v) in per.iter().enumerate() {
            let t = TAU * j as f64 / n as f64;
            assert!((v - t.sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn periodic_eval_interpolates_offgrid() {
        let n = 64;
        let f = |t: f64| (t.sin() + 0.3 * (3.0 * t).cos()).exp();
        let samples: Vec<f64> = (0..n).map(|j| f(TAU * j as f64 / n as f64)).collect();
        for &t in &[0.1, 1.7, 4.23] {
            assert!((periodic_eval(&samples, TAU, t) - f(t)).abs() < 1e-10);
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8, 0.0, 1.0);
        // integral_0^1 x^9 dx = 1/10, degree 9 < 2*8
        let s: f64 = x.iter().zip(&w).map(|(&xi, &wi)| xi.powi(9) * wi).sum();
        assert!((s - 0.1).abs() < 1e-14);
    }

    #[test]
    fn radial_derivatives_match_even_and_odd_profiles() {
        let rb = RadialBasis::new(12);
        // even profile r^4 - 2 r^2 (theta mode n = 0 or 2)
        let f: Vec<f64> = rb.nodes.iter().map(|&r| r.powi(4) - 2.0 * r * r).collect();
        let df_exact: Vec<f64> = rb.nodes.iter().map(|&r| 4.0 * r.powi(3) - 4.0 * r).collect();
        let d2f_exact: Vec<f64> = rb.nodes.iter().map(|&r| 12.0 * r * r - 4.0).collect();
        for i in 0..rb.n_r() {
            let mut d1 = 0.0;
            let mut d2 = 0.0;
            for j in 0..rb.n_r() {
                d1 += rb.d1[0][i][j] * f[j];
                d2 += rb.d2[0][i][j] * f[j];
            }
            assert!((d1 - df_exact[i]).abs() < 1e-10);
            assert!((d2 - d2f_exact[i]).abs() < 1e-9);
        }
        // odd profile r^3 - 3 r (theta mode n = 1)
        let g: Vec<f64> = rb.nodes.iter().map(|&r| r.powi(3) - 3.0 * r).collect();
        let dg_exact: Vec<f64> = rb.nodes.iter().map(|&r| 3.0 * r * r - 3.0).collect();
        for i in 0..rb.n_r() {
            let mut d1 = 0.0;
            for j in 0..rb.n_r() {
                d1 += rb.d1[1][i][j] * g[j];
            }
            assert!((d1 - dg_exact[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn radial_quadrature_rdr() {
        let rb = RadialBasis::new(10);
        // integral_0^1 (r^4 - 2 r^2) r dr = 1/6 - 1/2 = -1/3
        let s: f64 = rb
            .nodes
            .iter()
            .zip(&rb.weights_rdr)
            .map(|(&r, &w)| (r.powi(4) - 2.0 * r * r) * w)
            .sum();
        assert!((s + 1.0 / 3.0).abs() < 1e-13);
        // and the area: integral_0^1 r dr = 1/2
        let a: f64 = rb.weights_rdr.iter().sum();
        assert!((a - 0.5).abs() < 1e-13);
    }

    #[test]
    fn chebyshev_coeffs_and_clenshaw_roundtrip() {
        let rb = RadialBasis::new(14);
        let f = |r: f64| (2.0 * r * r - 1.0).cos(); // even, smooth
        let vals: Vec<Complex64> = rb.nodes.iter().map(|&r| Complex64::new(f(r), 0.0)).collect();
        let a = rb.coeffs(&vals, 0);
        for &r in &[0.05, 0.33, 0.91, 1.0] {
            assert!((clenshaw(&a, r).re - f(r)).abs() < 1e-12);
        }
        let da = cheb_derivative_coeffs(&a);
        for &r in &[0.2, 0.77] {
            let exact = -(2.0 * r * r - 1.0_f64).sin() * 4.0 * r;
            assert!((clenshaw(&da, r).re - exact).abs() < 1e-10);
        }
    }
}
