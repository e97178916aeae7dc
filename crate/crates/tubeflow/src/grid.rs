//! Collocation grid on the solid torus S^1_ell x D^2 and scalar fields on it.
//!
//! alpha and theta are uniform (Fourier), the radial direction collocates at
//! the positive half of an odd-degree Chebyshev-Lobatto grid (see
//! [`crate::spectral::RadialBasis`]).  Values are stored alpha-major:
//! `idx = (ia * n_r + ir) * n_theta + it`, with `ir = 0` the boundary r = 1.

use crate::error::{Error, Result};
use crate::spectral::{fft_forward, fft_inverse, signed_mode, RadialBasis};
use num_complex::Complex64;
use std::sync::Arc;

const TAU: f64 = std::f64::consts::TAU;

#[derive(Debug)]
pub struct TubeGrid {
    pub n_alpha: usize,
    pub n_r: usize,
    pub n_theta: usize,
    /// alpha period (the curve length for arc-length charts).
    pub period: f64,
    pub radial: RadialBasis,
}

impl TubeGrid {
    pub fn new(n_alpha: usize, n_r: usize, n_theta: usize, period: f64) -> Result<Arc<TubeGrid>> {
        if n_alpha < 8 || n_theta < 8 || n_r < 6 {
            return Err(Error::ResolutionTooLow(format!(
                "grid {n_alpha} x {n_r} x {n_theta} below minimum 8 x 6 x 8"
            )));
        }
        if n_alpha % 2 != 0 || n_theta % 2 != 0 {
            return Err(Error::ResolutionTooLow(
                "alpha and theta resolutions must be even".into(),
            ));
        }
        Ok(Arc::new(TubeGrid {
            n_alpha,
            n_r,
            n_theta,
            period,
            radial: RadialBasis::new(n_r),
        }))
    }

    #[inline]
    pub fn idx(&self, ia: usize, ir: usize, it: usize) -> usize {
        (ia * self.n_r + ir) * self.n_theta + it
    }

    #[inline]
    pub fn alpha(&self, ia: usize) -> f64 {
        self.period * ia as f64 / self.n_alpha as f64
    }

    #[inline]
    pub fn r(&self, ir: usize) -> f64 {
        self.radial.nodes[ir]
    }

    #[inline]
    pub fn theta(&self, it: usize) -> f64 {
        TAU * it as f64 / self.n_theta as f64
    }

    pub fn len(&self) -> usize {
        self.n_alpha * self.n_r * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Real scalar field sampled on a [`TubeGrid`].
#[derive(Debug, Clone)]
pub struct TubeScalarField {
    pub grid: Arc<TubeGrid>,
    pub values: Vec<f64>,
}

impl TubeScalarField {
    pub fn zeros(grid: Arc<TubeGrid>) -> Self {
        let n = grid.len();
        TubeScalarField {
            grid,
            values: vec![0.0; n],
        }
    }

    pub fn from_fn<F: Fn(f64, f64, f64) -> f64>(grid: Arc<TubeGrid>, f: F) -> Self {
        let mut out = Self::zeros(grid);
        let g = out.grid.clone();
        for ia in 0..g.n_alpha {
            let a = g.alpha(ia);
            for ir in 0..g.n_r {
                let r = g.r(ir);
                for it in 0..g.n_theta {
                    out.values[g.idx(ia, ir, it)] = f(a, r, g.theta(it));
                }
            }
        }
        out
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    pub fn axpy(&mut self, a: f64, x: &TubeScalarField) {
        for (v, xv) in self.values.iter_mut().zip(&x.values) {
            *v += a * xv;
        }
    }

    pub fn sub(&self, other: &TubeScalarField) -> TubeScalarField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Spectral alpha derivative of given order.
    pub fn deriv_alpha(&self, order: u32) -> TubeScalarField {
        let g = &self.grid;
        let mut out = self.clone();
        let n = g.n_alpha;
        let stride = g.n_r * g.n_theta;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for col in 0..stride {
            for ia in 0..n {
                buf[ia] = Complex64::new(self.values[ia * stride + col], 0.0);
            }
            fft_forward(&mut buf);
            for (k, v) in buf.iter_mut().enumerate() {
                let m = signed_mode(k, n);
                if order % 2 == 1 && k == n / 2 {
                    *v = Complex64::new(0.0, 0.0);
                    continue;
                }
                *v *= Complex64::new(0.0, TAU * m as f64 / g.period).powu(order);
            }
            fft_inverse(&mut buf);
            for ia in 0..n {
                out.values[ia * stride + col] = buf[ia].re;
            }
        }
        out
    }

    /// Spectral theta derivative of given order.
    pub fn deriv_theta(&self, order: u32) -> TubeScalarField {
        let g = &self.grid;
        let mut out = self.clone();
        let n = g.n_theta;
        let rows = g.n_alpha * g.n_r;
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for row in 0..rows {
            let base = row * n;
            for it in 0..n {
                buf[it] = Complex64::new(self.values[base + it], 0.0);
            }
            fft_forward(&mut buf);
            for (k, v) in buf.iter_mut().enumerate() {
                let m = signed_mode(k, n);
                if order % 2 == 1 && k == n / 2 {
                    *v = Complex64::new(0.0, 0.0);
                    continue;
                }
                *v *= Complex64::new(0.0, m as f64).powu(order);
            }
            fft_inverse(&mut buf);
            for it in 0..n {
                out.values[base + it] = buf[it].re;
            }
        }
        out
    }

    pub fn deriv_alpha_theta(&self) -> TubeScalarField {
        self.deriv_alpha(1).deriv_theta(1)
    }

    /// Radial derivative (`order` 1 or 2), parity-aware per theta mode.
    pub fn deriv_r(&self, order: u32) -> TubeScalarField {
        assert!(order == 1 || order == 2);
        let g = &self.grid;
        let mut out = self.clone();
        let (n_r, n_t) = (g.n_r, g.n_theta);
        let mut slab = vec![Complex64::new(0.0, 0.0); n_r * n_t];
        let mut buf = vec![Complex64::new(0.0, 0.0); n_t];
        let mut col = vec![Complex64::new(0.0, 0.0); n_r];
        for ia in 0..g.n_alpha {
            let base = ia * n_r * n_t;
            // theta FFT of every radial row
            for ir in 0..n_r {
                for it in 0..n_t {
                    buf[it] = Complex64::new(self.values[base + ir * n_t + it], 0.0);
                }
                fft_forward(&mut buf);
                slab[ir * n_t..(ir + 1) * n_t].copy_from_slice(&buf);
            }
            // per-mode radial differentiation with parity folding
            for kt in 0..n_t {
                let n_mode = signed_mode(kt, n_t);
                let parity = RadialBasis::parity_index(n_mode);
                let mat = if order == 1 {
                    &g.radial.d1[parity]
                } else {
                    &g.radial.d2[parity]
                };
                for ir in 0..n_r {
                    col[ir] = slab[ir * n_t + kt];
                }
                for ir in 0..n_r {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (j, &cj) in col.iter().enumerate() {
                        acc += cj * mat[ir][j];
                    }
                    slab[ir * n_t + kt] = acc;
                }
            }
            // back to physical theta
            for ir in 0..n_r {
                buf.copy_from_slice(&slab[ir * n_t..(ir + 1) * n_t]);
                fft_inverse(&mut buf);
                for it in 0..n_t {
                    out.values[base + ir * n_t + it] = buf[it].re;
                }
            }
        }
        out
    }

    /// Mean with respect to d alpha dy = r dr dtheta dalpha, normalized by
    /// the domain measure ell * pi.
    pub fn mean_alpha_y(&self) -> f64 {
        let g = &self.grid;
        let mut acc = 0.0;
        for ia in 0..g.n_alpha {
            for ir in 0..g.n_r {
                let w = g.radial.weights_rdr[ir];
                let mut row = 0.0;
                for it in 0..g.n_theta {
                    row += self.values[g.idx(ia, ir, it)];
                }
                acc += w * row;
            }
        }
        // sum * (2pi/n_theta) * (ell/n_alpha) / (ell * pi)
        acc * TAU / (g.n_theta as f64 * g.n_alpha as f64 * std::f64::consts::PI)
    }

    /// Per-alpha disk average (1/pi) integral_{D^2} psi dy as samples.
    pub fn disk_means(&self) -> Vec<f64> {
        let g = &self.grid;
        let mut out = vec![0.0; g.n_alpha];
        for (ia, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for ir in 0..g.n_r {
                let w = g.radial.weights_rdr[ir];
                let mut row = 0.0;
                for it in 0..g.n_theta {
                    row += self.values[g.idx(ia, ir, it)];
                }
                acc += w * row;
            }
            *slot = acc * TAU / (g.n_theta as f64 * std::f64::consts::PI);
        }
        out
    }

    /// psi minus its per-alpha disk average (the oscillatory part).
    pub fn disk_mean_removed(&self) -> TubeScalarField {
        let means = self.disk_means();
        let mut out = self.clone();
        let g = &self.grid;
        for ia in 0..g.n_alpha {
            for ir in 0..g.n_r {
                for it in 0..g.n_theta {
                    out.values[g.idx(ia, ir, it)] -= means[ia];
                }
            }
        }
        out
    }

    /// Complex mode representation (FFT in alpha and theta, radial physical).
    pub fn to_modes(&self) -> ModeField {
        let g = &self.grid;
        let mut data: Vec<Complex64> = self
            .values
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        // theta first (contiguous), then alpha (strided)
        let n_t = g.n_theta;
        let mut buf = vec![Complex64::new(0.0, 0.0); n_t];
        for row in 0..(g.n_alpha * g.n_r) {
            buf.copy_from_slice(&data[row * n_t..(row + 1) * n_t]);
            fft_forward(&mut buf);
            data[row * n_t..(row + 1) * n_t].copy_from_slice(&buf);
        }
        let n_a = g.n_alpha;
        let stride = g.n_r * n_t;
        let mut abuf = vec![Complex64::new(0.0, 0.0); n_a];
        for col in 0..stride {
            for ia in 0..n_a {
                abuf[ia] = data[ia * stride + col];
            }
            fft_forward(&mut abuf);
            for ia in 0..n_a {
                data[ia * stride + col] = abuf[ia];
            }
        }
        ModeField {
            grid: self.grid.clone(),
            data,
        }
    }
}

/// FFT-space companion of [`TubeScalarField`]: bin (ka, ir, kt) holds the
/// alpha-mode ka, theta-mode kt coefficient at radial node ir (unnormalized
/// FFT convention; `to_field` applies the inverse normalization).
pub struct ModeField {
    pub grid: Arc<TubeGrid>,
    pub data: Vec<Complex64>,
}

impl ModeField {
    pub fn zeros(grid: Arc<TubeGrid>) -> Self {
        let n = grid.len();
        ModeField {
            grid,
            data: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn to_field(&self) -> TubeScalarField {
        let g = &self.grid;
        let mut data = self.data.clone();
        let n_a = g.n_alpha;
        let n_t = g.n_theta;
        let stride = g.n_r * n_t;
        let mut abuf = vec![Complex64::new(0.0, 0.0); n_a];
        for col in 0..stride {
            for ia in 0..n_a {
                abuf[ia] = data[ia * stride + col];
            }
            fft_inverse(&mut abuf);
            for ia in 0..n_a {
                data[ia * stride + col] = abuf[ia];
            }
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); n_t];
        let mut out = TubeScalarField::zeros(self.grid.clone());
        for row in 0..(n_a * g.n_r) {
            buf.copy_from_slice(&data[row * n_t..(row + 1) * n_t]);
            fft_inverse(&mut buf);
            for it in 0..n_t {
                out.values[row * n_t + it] = buf[it].re;
            }
        }
        out
    }

    /// Copy the radial column at (ka, kt) into `col`.
    pub fn radial_column(&self, ka: usize, kt: usize, col: &mut [Complex64]) {
        let g = &self.grid;
        for ir in 0..g.n_r {
            col[ir] = self.data[(ka * g.n_r + ir) * g.n_theta + kt];
        }
    }

    pub fn set_radial_column(&mut self, ka: usize, kt: usize, col: &[Complex64]) {
        let g = &self.grid;
        for ir in 0..g.n_r {
            self.data[(ka * g.n_r + ir) * g.n_theta + kt] = col[ir];
        }
    }
}
