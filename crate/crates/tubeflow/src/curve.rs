//! Closed curves in R^3 as truncated Fourier series, with Frenet data and
//! arc-length reparametrization.
//!
//! gamma(t) = a_0 + sum_{k=1}^{M} a_k cos(2 pi k t / P) + b_k sin(2 pi k t / P)
//!
//! Closure is exact by construction.  Downstream tube machinery requires the
//! arc-length parametrization (|gamma'| == 1), produced by
//! [`ClosedCurve::arclength_reparam`]; curvature must stay bounded away from
//! zero so the Frenet frame is defined everywhere.

use crate::error::{Error, Result};
use crate::spectral::{periodic_antiderivative, periodic_derivative, TrigSeries};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

const TAU: f64 = std::f64::consts::TAU;

/// Threshold of |gamma' x gamma''| / |gamma'|^2 below which the Frenet frame
/// is treated as undefined.
pub const FLAT_POINT_TOL: f64 = 1e-8;

/// Orthonormal Frenet frame at a curve point.
#[derive(Debug, Clone, Copy)]
pub struct FrenetFrame {
    pub tangent: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub binormal: Vector3<f64>,
}

/// Serialized form of the Fourier coefficients.
///
/// `cos[k]` and `sin[k]` hold mode-k coefficients for k = 0..=modes; the
/// sin row at k = 0 must be zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveCoeffs {
    pub modes: usize,
    pub cos: Vec<[f64; 3]>,
    pub sin: Vec<[f64; 3]>,
    /// Parameter period; defaults to 2 pi when absent.
    #[serde(default)]
    pub period: Option<f64>,
}

/// A closed curve given by a truncated Fourier series.
#[derive(Debug, Clone)]
pub struct ClosedCurve {
    period: f64,
    cos: Vec<Vector3<f64>>,
    sin: Vec<Vector3<f64>>,
    /// Cached uniform samples of derived scalars; populated for arc-length
    /// curves where the heavy consumers live.
    cache: Option<CurveCache>,
}

#[derive(Debug, Clone)]
struct CurveCache {
    n: usize,
    kappa: TrigSeries,
    tau: TrigSeries,
    kappa_prime: TrigSeries,
    tau_prime: TrigSeries,
    kappa_samples: Vec<f64>,
    tau_samples: Vec<f64>,
    /// integral_0^alpha tau = tau_mean * alpha + tau_int_periodic(alpha) - tau_int_periodic(0)
    tau_mean: f64,
    tau_int_periodic: TrigSeries,
    kappa_min: f64,
    kappa_max: f64,
    max_speed_defect: f64,
}

impl ClosedCurve {
    /// Build a curve from raw coefficients (arbitrary parametrization).
    pub fn from_coeffs(c: &CurveCoeffs) -> Result<Self> {
        if c.cos.len() != c.modes + 1 || c.sin.len() != c.modes + 1 {
            return Err(Error::InvalidInput(format!(
                "expected {} coefficient rows, got cos: {}, sin: {}",
                c.modes + 1,
                c.cos.len(),
                c.sin.len()
            )));
        }
        if c.sin[0] != [0.0; 3] {
            return Err(Error::InvalidInput(
                "sin coefficient at mode 0 must be zero".into(),
            ));
        }
        Ok(ClosedCurve {
            period: c.period.unwrap_or(TAU),
            cos: c.cos.iter().map(|v| Vector3::from(*v)).collect(),
            sin: c.sin.iter().map(|v| Vector3::from(*v)).collect(),
            cache: None,
        })
    }

    pub fn to_coeffs(&self) -> CurveCoeffs {
        CurveCoeffs {
            modes: self.cos.len() - 1,
            cos: self.cos.iter().map(|v| [v.x, v.y, v.z]).collect(),
            sin: self.sin.iter().map(|v| [v.x, v.y, v.z]).collect(),
            period: Some(self.period),
        }
    }

    pub fn modes(&self) -> usize {
        self.cos.len() - 1
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Whether this curve carries the arc-length caches (unit speed).
    pub fn is_arclength(&self) -> bool {
        self.cache.is_some()
    }

    /// Position and derivatives up to `gamma'''` at parameter t.
    pub fn eval_jet(&self, t: f64) -> [Vector3<f64>; 4] {
        let phi = TAU * t / self.period;
        let w = TAU / self.period;
        let mut out = [Vector3::zeros(); 4];
        out[0] = self.cos[0];
        let (sin1, cos1) = phi.sin_cos();
        let mut ck = 1.0;
        let mut sk = 0.0;
        for k in 1..self.cos.len() {
            // rotate (ck, sk) to mode k
            let c_new = ck * cos1 - sk * sin1;
            let s_new = sk * cos1 + ck * sin1;
            ck = c_new;
            sk = s_new;
            let a = self.cos[k];
            let b = self.sin[k];
            let kw = k as f64 * w;
            // order 0: a cos + b sin
            out[0] += a * ck + b * sk;
            // order 1: -a k w sin + b k w cos
            out[1] += (b * ck - a * sk) * kw;
            // order 2: -(a cos + b sin) (k w)^2
            out[2] -= (a * ck + b * sk) * (kw * kw);
            // order 3: (a sin - b cos) (k w)^3
            out[3] += (a * sk - b * ck) * (kw * kw * kw);
        }
        out
    }

    pub fn position(&self, t: f64) -> Vector3<f64> {
        self.eval_jet(t)[0]
    }

    /// Curvature and torsion at parameter t (any parametrization).
    ///
    /// Torsion follows the convention in which the Frenet equations read
    /// t' = kappa n, n' = -kappa t - tau b, b' = tau n, so
    /// tau = -(gamma' x gamma'') . gamma''' / |gamma' x gamma''|^2 and a
    /// right-handed helix has tau < 0.  All tube formulas in this crate
    /// assume this sign.
    pub fn curvature_torsion(&self, t: f64) -> Result<(f64, f64)> {
        let j = self.eval_jet(t);
        let speed2 = j[1].norm_squared();
        if speed2 < 1e-20 {
            return Err(Error::ZeroSpeed {
                t,
                speed: speed2.sqrt(),
            });
        }
        let cross = j[1].cross(&j[2]);
        let cn = cross.norm();
        if cn < FLAT_POINT_TOL * speed2 {
            return Err(Error::FlatPoint { alpha: t, cross: cn });
        }
        let kappa = cn / speed2.powf(1.5);
        let tau = -cross.dot(&j[3]) / cn.powi(2);
        Ok((kappa, tau))
    }

    /// Frenet frame at parameter t; orthonormal, right-handed.
    pub fn frenet_frame(&self, t: f64) -> Result<FrenetFrame> {
        let j = self.eval_jet(t);
        let speed = j[1].norm();
        if speed < 1e-10 {
            return Err(Error::ZeroSpeed { t, speed });
        }
        let tangent = j[1] / speed;
        let cross = j[1].cross(&j[2]);
        if cross.norm() < FLAT_POINT_TOL * speed * speed {
            return Err(Error::FlatPoint {
                alpha: t,
                cross: cross.norm(),
            });
        }
        let raw = j[2] - tangent * j[2].dot(&tangent);
        let normal = raw / raw.norm();
        let binormal = tangent.cross(&normal);
        Ok(FrenetFrame {
            tangent,
            normal,
            binormal,
        })
    }

    /// Arc length by trapezoid refinement of |gamma'| (spectrally accurate
    /// for these analytic integrands; refinement guards low mode counts).
    pub fn length(&self) -> f64 {
        let mut n = 256.max(8 * self.modes());
        let mut prev = self.length_trapezoid(n);
        for _ in 0..8 {
            n *= 2;
            let cur = self.length_trapezoid(n);
            if (cur - prev).abs() <= 1e-13 * cur.abs() {
                return cur;
            }
            prev = cur;
        }
        prev
    }

    fn length_trapezoid(&self, n: usize) -> f64 {
        let h = self.period / n as f64;
        (0..n)
            .map(|j| self.eval_jet(j as f64 * h)[1].norm())
            .sum::<f64>()
            * h
    }

    /// Reparametrize by arc length and re-project onto `modes` Fourier modes.
    ///
    /// The returned curve has period equal to its length, unit speed within
    /// 1e-10 (checked), and carries the scalar caches used by the tube
    /// machinery.
    pub fn arclength_reparam(&self, modes: usize) -> Result<ClosedCurve> {
        let ell = self.length();
        let n_dense = (8 * self.modes().max(modes)).max(1024).next_power_of_two();

        // s(t) = ell/P * t + periodic part, from the speed samples.
        let speed: Vec<f64> = (0..n_dense)
            .map(|j| self.eval_jet(j as f64 * self.period / n_dense as f64)[1].norm())
            .collect();
        let min_speed = speed.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_speed < 1e-12 {
            return Err(Error::ZeroSpeed {
                t: 0.0,
                speed: min_speed,
            });
        }
        let (mean_speed, s_per) = periodic_antiderivative(&speed, self.period);
        let s_series = TrigSeries::from_samples(&s_per, self.period);
        let s_at = |t: f64| mean_speed * t + s_series.eval(t) - s_series.eval(0.0);
        let speed_series = TrigSeries::from_samples(&speed, self.period);

        // Invert s(t) = alpha_i by Newton; s is strictly increasing.
        let n_fit = (4 * modes).max(512).next_power_of_two();
        let mut samples = vec![Vector3::zeros(); n_fit];
        let mut t = 0.0;
        for (i, slot) in samples.iter_mut().enumerate() {
            let alpha = ell * i as f64 / n_fit as f64;
            // warm start from the previous node
            let mut converged = false;
            for _ in 0..50 {
                let f = s_at(t) - alpha;
                let df = speed_series.eval(t);
                let dt = f / df;
                t -= dt;
                if dt.abs() < 1e-13 * self.period {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::ConvergenceFailure(format!(
                    "arc-length Newton stalled at alpha = {alpha}"
                )));
            }
            *slot = self.position(t);
        }

        // Fourier fit of the resampled points, truncated to `modes`.
        let mut cos = vec![Vector3::zeros(); modes + 1];
        let mut sin = vec![Vector3::zeros(); modes + 1];
        for axis in 0..3 {
            let vals: Vec<f64> = samples.iter().map(|p| p[axis]).collect();
            let spec = TrigSeries::from_samples(&vals, ell);
            let raw = spec.raw_coeffs();
            cos[0][axis] = raw[0].re;
            for k in 1..=modes.min(n_fit / 2 - 1) {
                cos[k][axis] = 2.0 * raw[k].re;
                sin[k][axis] = -2.0 * raw[k].im;
            }
        }

        let mut curve = ClosedCurve {
            period: ell,
            cos,
            sin,
            cache: None,
        };
        curve.build_cache()?;
        let defect = curve.cache.as_ref().unwrap().max_speed_defect;
        if defect > 1e-10 {
            return Err(Error::ConvergenceFailure(format!(
                "unit-speed defect {defect:.3e} after reparametrization; increase mode count"
            )));
        }
        Ok(curve)
    }

    fn build_cache(&mut self) -> Result<()> {
        let n = (8 * self.modes()).max(1024).next_power_of_two();
        let ell = self.period;
        let mut kappa = vec![0.0; n];
        let mut tau = vec![0.0; n];
        let mut max_defect = 0.0_f64;
        for j in 0..n {
            let t = ell * j as f64 / n as f64;
            let jet = self.eval_jet(t);
            max_defect = max_defect.max((jet[1].norm() - 1.0).abs());
            let (k, ta) = self.curvature_torsion(t)?;
            kappa[j] = k;
            tau[j] = ta;
        }
        let kappa_prime = periodic_derivative(&kappa, ell, 1);
        let tau_prime = periodic_derivative(&tau, ell, 1);
        let (tau_mean, tau_int) = periodic_antiderivative(&tau, ell);
        let kappa_min = kappa.iter().cloned().fold(f64::INFINITY, f64::min);
        let kappa_max = kappa.iter().cloned().fold(0.0_f64, f64::max);
        self.cache = Some(CurveCache {
            n,
            kappa: TrigSeries::from_samples(&kappa, ell),
            tau: TrigSeries::from_samples(&tau, ell),
            kappa_prime: TrigSeries::from_samples(&kappa_prime, ell),
            tau_prime: TrigSeries::from_samples(&tau_prime, ell),
            kappa_samples: kappa,
            tau_samples: tau,
            tau_mean,
            tau_int_periodic: TrigSeries::from_samples(&tau_int, ell),
            kappa_min,
            kappa_max,
            max_speed_defect: max_defect,
        });
        Ok(())
    }

    fn cache(&self) -> &CurveCache {
        self.cache
            .as_ref()
            .expect("operation requires an arc-length curve; call arclength_reparam first")
    }

    /// Fast spectral interpolants of the cached scalars (arc-length only).
    pub fn kappa(&self, alpha: f64) -> f64 {
        self.cache().kappa.eval(alpha)
    }

    pub fn tau(&self, alpha: f64) -> f64 {
        self.cache().tau.eval(alpha)
    }

    pub fn kappa_prime(&self, alpha: f64) -> f64 {
        self.cache().kappa_prime.eval(alpha)
    }

    pub fn tau_prime(&self, alpha: f64) -> f64 {
        self.cache().tau_prime.eval(alpha)
    }

    /// integral_0^alpha tau(s) ds (alpha may exceed the period; the linear
    /// part accumulates).
    pub fn tau_integral(&self, alpha: f64) -> f64 {
        let c = self.cache();
        c.tau_mean * alpha + c.tau_int_periodic.eval(alpha) - c.tau_int_periodic.eval(0.0)
    }

    /// Total torsion integral_0^ell tau.
    pub fn total_torsion(&self) -> f64 {
        self.cache().tau_mean * self.period
    }

    pub fn kappa_range(&self) -> (f64, f64) {
        let c = self.cache();
        (c.kappa_min, c.kappa_max)
    }

    pub fn max_speed_defect(&self) -> f64 {
        self.cache().max_speed_defect
    }

    /// Uniform cached samples (n, kappa, tau) for quadratures.
    pub fn scalar_samples(&self) -> (usize, &[f64], &[f64]) {
        let c = self.cache();
        (c.n, &c.kappa_samples, &c.tau_samples)
    }

    /// The curve moved by a rigid motion x -> R x + d.
    pub fn transformed(&self, r: &Matrix3<f64>, d: &Vector3<f64>) -> ClosedCurve {
        let mut out = ClosedCurve {
            period: self.period,
            cos: self.cos.iter().map(|v| r * v).collect(),
            sin: self.sin.iter().map(|v| r * v).collect(),
            cache: None,
        };
        out.cos[0] += d;
        if self.cache.is_some() {
            out.build_cache().expect("rigid motion preserves the cache");
        }
        out
    }

    /// Minimum distance from x to the curve, with the realizing parameter.
    pub fn distance_to(&self, x: &Vector3<f64>) -> (f64, f64) {
        let n = 512.max(4 * self.modes());
        let mut best_t = 0.0;
        let mut best_d2 = f64::INFINITY;
        for j in 0..n {
            let t = self.period * j as f64 / n as f64;
            let d2 = (self.position(t) - x).norm_squared();
            if d2 < best_d2 {
                best_d2 = d2;
                best_t = t;
            }
        }
        // Newton on d/dt |gamma - x|^2 = 2 (gamma - x) . gamma'
        let mut t = best_t;
        for _ in 0..30 {
            let j = self.eval_jet(t);
            let diff = j[0] - x;
            let f = diff.dot(&j[1]);
            let df = j[1].norm_squared() + diff.dot(&j[2]);
            if df.abs() < 1e-14 {
                break;
            }
            let dt = f / df;
            t -= dt;
            if dt.abs() < 1e-13 * self.period {
                break;
            }
        }
        ((self.position(t) - x).norm(), t)
    }

    /// Deform along the binormal: Gamma(alpha) = gamma(alpha) + delta F(alpha) B(alpha).
    ///
    /// Returns the raw deformed curve in the original parametrization; its
    /// speed is 1 + O(delta^2), so callers re-run `arclength_reparam` before
    /// using tube machinery on it.
    pub fn binormal_deform<F: Fn(f64) -> f64>(
        &self,
        profile: F,
        delta: f64,
        modes: usize,
    ) -> Result<ClosedCurve> {
        let n_fit = (4 * modes).max(512).next_power_of_two();
        let mut samples = vec![Vector3::zeros(); n_fit];
        for (j, slot) in samples.iter_mut().enumerate() {
            let t = self.period * j as f64 / n_fit as f64;
            let frame = self.frenet_frame(t)?;
            *slot = self.position(t) + frame.binormal * (delta * profile(t));
        }
        let mut cos = vec![Vector3::zeros(); modes + 1];
        let mut sin = vec![Vector3::zeros(); modes + 1];
        for axis in 0..3 {
            let vals: Vec<f64> = samples.iter().map(|p| p[axis]).collect();
            let spec = TrigSeries::from_samples(&vals, self.period);
            let raw = spec.raw_coeffs();
            cos[0][axis] = raw[0].re;
            for k in 1..=modes.min(n_fit / 2 - 1) {
                cos[k][axis] = 2.0 * raw[k].re;
                sin[k][axis] = -2.0 * raw[k].im;
            }
        }
        Ok(ClosedCurve {
            period: self.period,
            cos,
            sin,
            cache: None,
        })
    }
}

/// Admissibility report for a tube of radius eps around the curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub length: f64,
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub eps: f64,
    pub eps_kappa_max: f64,
    /// Minimum distance between non-adjacent arcs (see `clearance_window`).
    pub min_clearance: f64,
    pub clearance_required: f64,
    /// Arc-distance window below which pairs count as adjacent.
    pub clearance_window: f64,
    pub total_torsion: f64,
    /// min over |n| <= 64 of |total_torsion - n pi|.
    pub torsion_npi_distance: f64,
    pub curvature_positive: bool,
    pub tube_embedded: bool,
    pub elliptic_core: bool,
    pub admissible: bool,
}

/// Check curvature positivity, embeddedness of the eps-tube, and the
/// nondegenerate-torsion (elliptic core) condition.
pub fn check_admissible(curve: &ClosedCurve, eps: f64) -> Result<AdmissibilityReport> {
    let (kappa_min, kappa_max) = curve.kappa_range();
    let ell = curve.period();
    let eps_kappa_max = eps * kappa_max;

    // Non-adjacent self-distance.  Points within arc distance pi/kappa_max
    // cannot approach each other (chord >= (2/pi) arc for such pairs), so
    // only pairs beyond that window are candidates for a genuine near
    // self-intersection; the window is capped at ell/4 so that every curve
    // has candidates.
    let window = (std::f64::consts::PI / kappa_max).min(ell / 4.0);
    let n = 2048;
    let pts: Vec<Vector3<f64>> = (0..n)
        .map(|j| curve.position(ell * j as f64 / n as f64))
        .collect();
    let mut min_clearance = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let arc = (j - i) as f64 * ell / n as f64;
            let arc = arc.min(ell - arc);
            if arc <= window {
                continue;
            }
            let d = (pts[i] - pts[j]).norm();
            if d < min_clearance {
                min_clearance = d;
            }
        }
    }

    let total_torsion = curve.total_torsion();
    let mut torsion_npi_distance = f64::INFINITY;
    for k in -64_i64..=64 {
        torsion_npi_distance =
            torsion_npi_distance.min((total_torsion - k as f64 * std::f64::consts::PI).abs());
    }

    let curvature_positive = kappa_min > 0.0;
    let tube_embedded = eps_kappa_max < 1.0 && min_clearance > 2.0 * eps;
    let elliptic_core = torsion_npi_distance > 1e-6;
    Ok(AdmissibilityReport {
        length: ell,
        kappa_min,
        kappa_max,
        eps,
        eps_kappa_max,
        min_clearance,
        clearance_required: 2.0 * eps,
        clearance_window: window,
        total_torsion,
        torsion_npi_distance,
        curvature_positive,
        tube_embedded,
        elliptic_core,
        admissible: curvature_positive && tube_embedded && elliptic_core,
    })
}

/// The unit circle in the xy-plane; arc-length parametrized as built.
pub fn circle() -> ClosedCurve {
    let mut cos = vec![Vector3::zeros(); 2];
    let mut sin = vec![Vector3::zeros(); 2];
    cos[1] = Vector3::new(1.0, 0.0, 0.0);
    sin[1] = Vector3::new(0.0, 1.0, 0.0);
    let mut c = ClosedCurve {
        period: TAU,
        cos,
        sin,
        cache: None,
    };
    c.build_cache().expect("circle cache");
    c
}

/// Trefoil test curve ((2+cos 3t) cos 2t, (2+cos 3t) sin 2t, sin 3t),
/// as raw (non arc-length) Fourier data.
pub fn trefoil_raw() -> ClosedCurve {
    // cos3t cos2t = (cos5t + cos t)/2, cos3t sin2t = (sin5t - sin t)/2
    let mut cos = vec![Vector3::zeros(); 6];
    let mut sin = vec![Vector3::zeros(); 6];
    cos[2].x = 2.0;
    cos[1].x = 0.5;
    cos[5].x = 0.5;
    sin[2].y = 2.0;
    sin[1].y = -0.5;
    sin[5].y = 0.5;
    sin[3].z = 1.0;
    ClosedCurve {
        period: TAU,
        cos,
        sin,
        cache: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// 6th-order central finite differences on gamma as an independent
    /// oracle for curvature and torsion.
    fn fd_kappa_tau(curve: &ClosedCurve, t: f64) -> (f64, f64) {
        let h = 1e-2;
        let w1 = [-1.0 / 60.0, 3.0 / 20.0, -3.0 / 4.0, 0.0, 3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0];
        let w2 = [1.0 / 90.0, -3.0 / 20.0, 3.0 / 2.0, -49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0];
        let w3 = [1.0 / 8.0, -1.0, 13.0 / 8.0, 0.0, -13.0 / 8.0, 1.0, -1.0 / 8.0];
        let mut d1 = Vector3::zeros();
        let mut d2 = Vector3::zeros();
        let mut d3 = Vector3::zeros();
        for (i, off) in (-3..=3).enumerate() {
            let p = curve.position(t + off as f64 * h);
            d1 += p * w1[i];
            d2 += p * w2[i];
            d3 += p * w3[i];
        }
        d1 /= h;
        d2 /= h * h;
        d3 /= h * h * h;
        let cross = d1.cross(&d2);
        let kappa = cross.norm() / d1.norm().powi(3);
        // same sign convention as the library: b' = tau n
        let tau = -cross.dot(&d3) / cross.norm_squared();
        (kappa, tau)
    }

    #[test]
    fn circle_has_unit_curvature_and_length_tau() {
        let c = circle();
        assert_relative_eq!(c.length(), TAU, epsilon = 1e-12);
        for &t in &[0.0, 1.0, 4.5] {
            let (k, tau) = c.curvature_torsion(t).unwrap();
            assert_relative_eq!(k, 1.0, epsilon = 1e-12);
            assert!(tau.abs() < 1e-10);
        }
        assert!(c.total_torsion().abs() < 1e-10);
        assert!(c.max_speed_defect() < 1e-12);
    }

    #[test]
    fn trefoil_arclength_reparam_unit_speed() {
        let raw = trefoil_raw();
        let ell = raw.length();
        let c = raw.arclength_reparam(160).unwrap();
        assert_relative_eq!(c.period(), ell, epsilon = 1e-10 * ell);
        assert!(c.max_speed_defect() < 1e-10, "defect {}", c.max_speed_defect());
        // closure is exact by construction; spot-check continuity across 0
        let p0 = c.position(0.0);
        let p1 = c.position(c.period());
        assert!((p0 - p1).norm() < 1e-12);
    }

    #[test]
    fn curvature_torsion_match_fd_oracle_on_trefoil() {
        let c = trefoil_raw().arclength_reparam(160).unwrap();
        for &t in &[0.3, 2.0, 7.7, 11.9] {
            let (k, tau) = c.curvature_torsion(t).unwrap();
            let (k_fd, tau_fd) = fd_kappa_tau(&c, t);
            assert_relative_eq!(k, k_fd, epsilon = 1e-6);
            assert_relative_eq!(tau, tau_fd, epsilon = 1e-6);
            // cached interpolants agree with the direct formulas
            assert_relative_eq!(c.kappa(t), k, epsilon = 1e-9);
            assert_relative_eq!(c.tau(t), tau, epsilon = 1e-9);
        }
    }

    #[test]
    fn kappa_prime_matches_fd_of_kappa() {
        let c = trefoil_raw().arclength_reparam(160).unwrap();
        let h = 1e-4;
        for &t in &[0.9, 5.2] {
            let fd = (c.kappa(t + h) - c.kappa(t - h)) / (2.0 * h);
            assert_relative_eq!(c.kappa_prime(t), fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn frenet_frame_orthonormal_and_frenet_odes_hold() {
        let c = trefoil_raw().arclength_reparam(160).unwrap();
        let h = 1e-5;
        for &t in &[0.5, 3.3, 9.8] {
            let f = c.frenet_frame(t).unwrap();
            assert!((f.tangent.norm() - 1.0).abs() < 1e-12);
            assert!((f.normal.norm() - 1.0).abs() < 1e-12);
            assert!(f.tangent.dot(&f.normal).abs() < 1e-12);
            let det = Matrix3::from_columns(&[f.tangent, f.normal, f.binormal]).determinant();
            assert_relative_eq!(det, 1.0, epsilon = 1e-12);
            // Frenet ODEs in this crate's sign convention:
            // t' = kappa n, n' = -kappa t - tau b, b' = tau n
            let fp = c.frenet_frame(t + h).unwrap();
            let fm = c.frenet_frame(t - h).unwrap();
            let (k, tau) = c.curvature_torsion(t).unwrap();
            let dt = (fp.tangent - fm.tangent) / (2.0 * h);
            let dn = (fp.normal - fm.normal) / (2.0 * h);
            let db = (fp.binormal - fm.binormal) / (2.0 * h);
            assert!((dt - f.normal * k).norm() < 1e-6);
            assert!((dn + f.binormal * tau + f.tangent * k).norm() < 1e-6);
            assert!((db - f.normal * tau).norm() < 1e-6);
        }
    }

    #[test]
    fn rigid_motion_preserves_curvature_torsion() {
        let c = trefoil_raw().arclength_reparam(160).unwrap();
        let angle = 0.7_f64;
        let rot = Matrix3::new(
            angle.cos(), -angle.sin(), 0.0,
            angle.sin(), angle.cos(), 0.0,
            0.0, 0.0, 1.0,
        );
        let moved = c.transformed(&rot, &Vector3::new(0.3, -1.0, 2.0));
        for &t in &[0.4, 6.1] {
            let (k0, t0) = c.curvature_torsion(t).unwrap();
            let (k1, t1) = moved.curvature_torsion(t).unwrap();
            assert_relative_eq!(k0, k1, epsilon = 1e-10);
            assert_relative_eq!(t0, t1, epsilon = 1e-10);
        }
    }

    #[test]
    fn total_torsion_matches_quadrature_oracle() {
        let c = trefoil_raw().arclength_reparam(160).unwrap();
        // independent: adaptive Simpson on tau over [0, ell]
        let mut acc = 0.0;
        let n = 4096;
        let h = c.period() / n as f64;
        for j in 0..n {
            let t0 = j as f64 * h;
            let tm = t0 + 0.5 * h;
            let t1 = t0 + h;
            acc += h / 6.0
                * (c.curvature_torsion(t0).unwrap().1
                    + 4.0 * c.curvature_torsion(tm).unwrap().1
                    + c.curvature_torsion(t1).unwrap().1);
        }
        assert_relative_eq!(c.total_torsion(), acc, epsilon = 1e-10);
        // and tau_integral over the full period agrees
        assert_relative_eq!(c.tau_integral(c.period()), acc, epsilon = 1e-10);
    }

    #[test]
    fn circle_is_inadmissible_by_torsion_and_trefoil_by_fat_tube() {
        let c = circle();
        let rep = check_admissible(&c, 0.1).unwrap();
        assert!(rep.curvature_positive);
        assert!(rep.tube_embedded);
        assert!(!rep.elliptic_core, "total torsion 0 is a multiple of pi");
        assert!(!rep.admissible);

        let tr = trefoil_raw().arclength_reparam(160).unwrap();
        let rep = check_admissible(&tr, 2.0).unwrap();
        assert!(!rep.tube_embedded, "eps = 2 exceeds the self-distance scale");
        let rep = check_admissible(&tr, 0.05).unwrap();
        assert!(rep.admissible, "{rep:?}");
    }

    #[test]
    fn binormal_deform_keeps_speed_to_second_order() {
        let c = trefoil_raw().arclength_reparam(160).unwrap();
        let ell = c.period();
        let delta = 1e-4;
        let d = c
            .binormal_deform(|a| (TAU * a / ell).sin(), delta, 200)
            .unwrap();
        let mut max_defect = 0.0_f64;
        for j in 0..256 {
            let t = ell * j as f64 / 256.0;
            max_defect = max_defect.max((d.eval_jet(t)[1].norm() - 1.0).abs());
        }
        assert!(max_defect < 10.0 * delta * delta, "defect {max_defect}");
    }
}

