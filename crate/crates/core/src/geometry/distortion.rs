//! Second-order radial (barrel) distortion model.
//!
//! The model maps an observed sensor position to its corrected position
//! radially about the principal point:
//!
//! ```text
//! r_u = r_d * (1 + k1 * r_d^2 + k2 * r_d^4)
//! ```
//!
//! with radii measured in normalized units (`pixels / norm_scale`).
//! Correcting a point is therefore a direct polynomial evaluation, while
//! mapping a corrected position back onto the sensor solves the radial
//! polynomial for the source radius with Newton iteration.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use super::register::sample_bilinear;
use super::GeometryError;
use crate::frame::ThermalFrame;
use ndarray::Array2;

const NEWTON_MAX_ITERS: usize = 10;
const NEWTON_TOL_PX: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialDistortionModel {
    /// Second-order radial coefficient (dimensionless).
    pub k1: f64,
    /// Fourth-order radial coefficient (dimensionless).
    pub k2: f64,
    /// Principal point in normalized image coordinates.
    pub center_x: f64,
    pub center_y: f64,
    /// Radius normalization factor in pixels.
    pub norm_scale: f64,
    /// Sensor dimensions the model was calibrated for.
    pub calib_width: usize,
    pub calib_height: usize,
    /// Residual RMS (pixels) reported by the last fit, if any.
    pub fitted_rms: Option<f64>,
}

impl RadialDistortionModel {
    /// Identity model for a sensor of the given size.
    pub fn identity(width: usize, height: usize) -> Self {
        let norm_scale = Self::default_norm_scale(width, height);
        Self {
            k1: 0.0,
            k2: 0.0,
            center_x: width as f64 / 2.0 / norm_scale,
            center_y: height as f64 / 2.0 / norm_scale,
            norm_scale,
            calib_width: width,
            calib_height: height,
            fitted_rms: None,
        }
    }

    pub fn with_coefficients(mut self, k1: f64, k2: f64) -> Self {
        self.k1 = k1;
        self.k2 = k2;
        self
    }

    /// Half the sensor diagonal, so the corner radius is about 1.
    pub fn default_norm_scale(width: usize, height: usize) -> f64 {
        ((width * width + height * height) as f64).sqrt() / 2.0
    }

    pub fn is_identity(&self) -> bool {
        self.k1 == 0.0 && self.k2 == 0.0
    }

    fn factor(&self, r2: f64) -> f64 {
        1.0 + self.k1 * r2 + self.k2 * r2 * r2
    }

    /// Derivative of `r * factor(r^2)` with respect to r.
    fn forward_slope(&self, r2: f64) -> f64 {
        1.0 + 3.0 * self.k1 * r2 + 5.0 * self.k2 * r2 * r2
    }

    /// Largest normalized sensor radius (distance from the principal
    /// point to the farthest sensor corner).
    pub fn max_sensor_radius(&self) -> f64 {
        let w = self.calib_width as f64 / self.norm_scale;
        let h = self.calib_height as f64 / self.norm_scale;
        let corners = [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)];
        corners
            .iter()
            .map(|&(x, y)| ((x - self.center_x).powi(2) + (y - self.center_y).powi(2)).sqrt())
            .fold(0.0, f64::max)
    }

    /// Reject parameter sets whose forward map is not monotonic in radius
    /// anywhere on the sensor.
    pub fn validate_monotonic(&self) -> Result<(), GeometryError> {
        let r_max = self.max_sensor_radius();
        // forward_slope is quadratic in r^2; check endpoints and the
        // interior critical point of g(u) = 1 + 3 k1 u + 5 k2 u^2.
        let mut min_slope = self.forward_slope(0.0).min(self.forward_slope(r_max * r_max));
        if self.k2 != 0.0 {
            let u_crit = -3.0 * self.k1 / (10.0 * self.k2);
            if u_crit > 0.0 && u_crit < r_max * r_max {
                min_slope = min_slope.min(self.forward_slope(u_crit));
            }
        }
        if min_slope <= 0.0 {
            return Err(GeometryError::NonMonotonicModel);
        }
        Ok(())
    }

    /// Map an observed (distorted) pixel position to its corrected position.
    pub fn undistort_point(&self, x: f64, y: f64) -> (f64, f64) {
        if self.is_identity() {
            return (x, y);
        }
        let mx = x / self.norm_scale - self.center_x;
        let my = y / self.norm_scale - self.center_y;
        let f = self.factor(mx * mx + my * my);
        (
            (self.center_x + mx * f) * self.norm_scale,
            (self.center_y + my * f) * self.norm_scale,
        )
    }

    /// Map a corrected pixel position back onto the sensor by solving the
    /// radial polynomial for the source radius (Newton iteration).
    pub fn distort_point(&self, x: f64, y: f64) -> (f64, f64) {
        if self.is_identity() {
            return (x, y);
        }
        let mx = x / self.norm_scale - self.center_x;
        let my = y / self.norm_scale - self.center_y;
        let r_u = (mx * mx + my * my).sqrt();
        if r_u == 0.0 {
            return (x, y);
        }
        let tol = NEWTON_TOL_PX / self.norm_scale;
        let mut r_d = r_u;
        for _ in 0..NEWTON_MAX_ITERS {
            let r2 = r_d * r_d;
            let h = r_d * self.factor(r2) - r_u;
            if h.abs() < tol {
                break;
            }
            let slope = self.forward_slope(r2);
            if slope.abs() < 1e-12 {
                break;
            }
            r_d -= h / slope;
            if r_d < 0.0 {
                r_d = r_u * 1e-3;
            }
        }
        let scale = r_d / r_u;
        (
            (self.center_x + mx * scale) * self.norm_scale,
            (self.center_y + my * scale) * self.norm_scale,
        )
    }

    pub fn save(&self, path: &Path) -> Result<(), GeometryError> {
        let text = toml::to_string(self)
            .map_err(|e| GeometryError::BadModelFile(path.to_path_buf(), e.to_string()))?;
        fs::write(path, text).map_err(|e| GeometryError::Io(path.to_path_buf(), e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, GeometryError> {
        let text = fs::read_to_string(path)
            .map_err(|e| GeometryError::Io(path.to_path_buf(), e.to_string()))?;
        toml::from_str(&text)
            .map_err(|e| GeometryError::BadModelFile(path.to_path_buf(), e.to_string()))
    }
}

/// Correct lens distortion by inverse mapping: each output pixel is an
/// undistorted position whose source on the sensor is found by Newton
/// iteration, then sampled bilinearly. Pixels whose source falls outside
/// the sensor are marked invalid.
pub fn undistort(
    frame: &ThermalFrame,
    model: &RadialDistortionModel,
) -> Result<ThermalFrame, GeometryError> {
    model.validate_monotonic()?;
    let (h, w) = (frame.height(), frame.width());
    if (w, h) != (model.calib_width, model.calib_height) {
        return Err(GeometryError::DimensionMismatch {
            got_w: w,
            got_h: h,
            want_w: model.calib_width,
            want_h: model.calib_height,
        });
    }
    if model.is_identity() {
        return Ok(frame.clone());
    }
    let mut temps = Array2::zeros((h, w));
    let mut validity = Array2::from_elem((h, w), false);
    for y in 0..h {
        for x in 0..w {
            let (sx, sy) = model.distort_point(x as f64 + 0.5, y as f64 + 0.5);
            if let Some(v) =
                sample_bilinear(&frame.temps, Some(&frame.validity), sx - 0.5, sy - 0.5)
            {
                temps[[y, x]] = v;
                validity[[y, x]] = true;
            }
        }
    }
    Ok(ThermalFrame {
        temps,
        validity,
        t_out: frame.t_out,
        condition: frame.condition.clone(),
    })
}

/// Outcome of a distortion fit: the model plus its residual RMS in pixels,
/// so coefficients can be fine-tuned manually afterwards.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: RadialDistortionModel,
    pub residual_rms_px: f64,
    pub iterations: usize,
}

/// Least-squares fit of (k1, k2, center) from point correspondences
/// `(distorted, undistorted)`, both in pixel coordinates.
///
/// Levenberg-Marquardt on the corrected-position residual. Requires at
/// least 6 non-collinear correspondences.
pub fn fit_distortion(
    correspondences: &[((f64, f64), (f64, f64))],
    width: usize,
    height: usize,
) -> Result<FitReport, GeometryError> {
    if correspondences.len() < 6 {
        return Err(GeometryError::DegenerateCorrespondences(format!(
            "need at least 6 correspondences, got {}",
            correspondences.len()
        )));
    }
    check_not_collinear(correspondences)?;

    let s = RadialDistortionModel::default_norm_scale(width, height);
    let mut model = RadialDistortionModel::identity(width, height);

    let cost_of = |m: &RadialDistortionModel| -> f64 {
        correspondences
            .iter()
            .map(|&((dx, dy), (ux, uy))| {
                let (px, py) = m.undistort_point(dx, dy);
                (px - ux).powi(2) + (py - uy).powi(2)
            })
            .sum()
    };

    let mut lambda = 1e-3;
    let mut cost = cost_of(&model);
    let mut iterations = 0;
    for _ in 0..100 {
        iterations += 1;
        // Accumulate normal equations J^T J and J^T r over all residuals.
        let mut jtj = [[0.0f64; 4]; 4];
        let mut jtr = [0.0f64; 4];
        for &((dx, dy), (ux, uy)) in correspondences {
            let mx = dx / s - model.center_x;
            let my = dy / s - model.center_y;
            let r2 = mx * mx + my * my;
            let f = model.factor(r2);
            let fp = model.k1 + 2.0 * model.k2 * r2; // df/d(r^2)
            let rx = (model.center_x + mx * f) * s - ux;
            let ry = (model.center_y + my * f) * s - uy;
            // Rows of the Jacobian for this residual pair, params
            // ordered (k1, k2, cx, cy), all in pixels.
            let jx = [
                s * mx * r2,
                s * mx * r2 * r2,
                s * ((1.0 - f) - 2.0 * fp * mx * mx),
                s * (-2.0 * fp * mx * my),
            ];
            let jy = [
                s * my * r2,
                s * my * r2 * r2,
                s * (-2.0 * fp * my * mx),
                s * ((1.0 - f) - 2.0 * fp * my * my),
            ];
            for a in 0..4 {
                for b in 0..4 {
                    jtj[a][b] += jx[a] * jx[b] + jy[a] * jy[b];
                }
                jtr[a] += jx[a] * rx + jy[a] * ry;
            }
        }

        let mut damped = jtj;
        for (a, row) in damped.iter_mut().enumerate() {
            row[a] += lambda * (1.0 + jtj[a][a]);
        }
        let rhs = [-jtr[0], -jtr[1], -jtr[2], -jtr[3]];
        let delta = solve4(&damped, &rhs).ok_or_else(|| {
            GeometryError::DegenerateCorrespondences("normal equations are rank-deficient".into())
        })?;

        let mut trial = model;
        trial.k1 += delta[0];
        trial.k2 += delta[1];
        trial.center_x += delta[2];
        trial.center_y += delta[3];
        let trial_cost = cost_of(&trial);
        if trial_cost < cost {
            let rel_drop = (cost - trial_cost) / cost.max(1e-30);
            model = trial;
            cost = trial_cost;
            lambda = (lambda * 0.3).max(1e-12);
            if rel_drop < 1e-12 || cost < 1e-24 {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e8 {
                break;
            }
        }
    }

    let rms = (cost / correspondences.len() as f64).sqrt();
    model.fitted_rms = Some(rms);
    Ok(FitReport {
        model,
        residual_rms_px: rms,
        iterations,
    })
}

fn check_not_collinear(
    correspondences: &[((f64, f64), (f64, f64))],
) -> Result<(), GeometryError> {
    let n = correspondences.len() as f64;
    let (mut cx, mut cy) = (0.0, 0.0);
    for &((dx, dy), _) in correspondences {
        cx += dx;
        cy += dy;
    }
    cx /= n;
    cy /= n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &((dx, dy), _) in correspondences {
        let (ex, ey) = (dx - cx, dy - cy);
        sxx += ex * ex;
        sxy += ex * ey;
        syy += ey * ey;
    }
    // Smaller eigenvalue of the 2x2 scatter matrix.
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
    let lambda_min = tr / 2.0 - disc;
    if lambda_min <= 1e-9 * tr.max(1e-12) {
        return Err(GeometryError::DegenerateCorrespondences(
            "points are collinear".into(),
        ));
    }
    Ok(())
}

/// Gaussian elimination with partial pivoting for the 4x4 LM step.
fn solve4(a: &[[f64; 4]; 4], b: &[f64; 4]) -> Option<[f64; 4]> {
    let mut m = [[0.0f64; 5]; 4];
    for i in 0..4 {
        m[i][..4].copy_from_slice(&a[i]);
        m[i][4] = b[i];
    }
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-14 {
            return None;
        }
        m.swap(col, pivot);
        for row in 0..4 {
            if row != col {
                let factor = m[row][col] / m[col][col];
                for k in col..5 {
                    m[row][k] -= factor * m[col][k];
                }
            }
        }
    }
    let mut x = [0.0f64; 4];
    for i in 0..4 {
        x[i] = m[i][4] / m[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::full_mask;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model_320x240(k1: f64, k2: f64) -> RadialDistortionModel {
        RadialDistortionModel::identity(320, 240).with_coefficients(k1, k2)
    }

    #[test]
    fn identity_undistort_is_bitwise() {
        let model = model_320x240(0.0, 0.0);
        let mut temps = Array2::zeros((240, 320));
        for ((y, x), t) in temps.indexed_iter_mut() {
            *t = (x as f32 * 0.3 + y as f32 * 0.7).sin();
        }
        let frame = ThermalFrame::new(temps.clone(), -4.0);
        let out = undistort(&frame, &model).unwrap();
        assert_eq!(out.temps, temps);
        assert!(out.validity.iter().all(|&v| v));
    }

    #[test]
    fn constant_frame_stays_constant_on_valid_pixels() {
        let model = model_320x240(-0.2, 0.05);
        let frame = ThermalFrame::new(Array2::from_elem((240, 320), 3.25f32), -4.0);
        let out = undistort(&frame, &model).unwrap();
        let mut any_valid = false;
        for ((y, x), &v) in out.validity.indexed_iter() {
            if v {
                any_valid = true;
                assert_eq!(out.temps[[y, x]], 3.25, "pixel ({x},{y})");
            }
        }
        assert!(any_valid);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let model = model_320x240(-0.1, 0.0);
        let frame = ThermalFrame::new(Array2::zeros((100, 100)), 0.0);
        assert!(matches!(
            undistort(&frame, &model),
            Err(GeometryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn monotonicity_guard_rejects_bad_params() {
        // Strongly negative k1 makes the forward slope cross zero on-sensor.
        let model = model_320x240(-0.5, 0.0);
        assert!(matches!(
            model.validate_monotonic(),
            Err(GeometryError::NonMonotonicModel)
        ));
        assert!(model_320x240(-0.2, 0.05).validate_monotonic().is_ok());
    }

    #[test]
    fn point_roundtrip_within_half_pixel() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut tried = 0;
        while tried < 100 {
            let k1 = rng.gen_range(-0.3..0.3);
            let k2 = rng.gen_range(-0.1..0.1);
            let model = model_320x240(k1, k2);
            if model.validate_monotonic().is_err() {
                continue;
            }
            tried += 1;
            let mut sq_sum = 0.0;
            let mut count = 0;
            for _ in 0..50 {
                // Central region keeps the source on-sensor for all k.
                let x = rng.gen_range(60.0..260.0);
                let y = rng.gen_range(45.0..195.0);
                let (dx, dy) = model.distort_point(x, y);
                let (ux, uy) = model.undistort_point(dx, dy);
                sq_sum += (ux - x).powi(2) + (uy - y).powi(2);
                count += 1;
            }
            let rms = (sq_sum / count as f64).sqrt();
            assert!(rms < 0.5, "rms {rms} for k1={k1} k2={k2}");
        }
    }

    /// Render gaussian blobs at grid corners, synthesize a distorted image
    /// by inverse mapping, undistort it, and check that intensity-weighted
    /// centroids recover the corner positions.
    #[test]
    fn grid_corners_recovered_after_undistortion() {
        let (w, h) = (320usize, 240usize);
        let model = model_320x240(-0.2, 0.05);
        model.validate_monotonic().unwrap();

        let corners: Vec<(f64, f64)> = (1..5)
            .flat_map(|gy| (1..6).map(move |gx| (gx as f64 * 53.0, gy as f64 * 48.0)))
            .collect();
        let ideal = Array2::from_shape_fn((h, w), |(y, x)| {
            let mut v = 0.0f32;
            for &(cx, cy) in &corners {
                let d2 = (x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2);
                v += (255.0 * (-d2 / 4.5).exp()) as f32;
            }
            v.min(255.0)
        });

        // Distorted capture: each sensor pixel sees the scene ray that the
        // correction maps it to, so sample the ideal image there.
        let mask = full_mask(h, w);
        let mut raw = Array2::zeros((h, w));
        for y in 0..h {
            for x in 0..w {
                let (ux, uy) = model.undistort_point(x as f64 + 0.5, y as f64 + 0.5);
                if let Some(v) = sample_bilinear(&ideal, Some(&mask), ux - 0.5, uy - 0.5) {
                    raw[[y, x]] = v;
                }
            }
        }

        let frame = ThermalFrame::new(raw, 0.0);
        let out = undistort(&frame, &model).unwrap();

        let mut sq_sum = 0.0;
        for &(cx, cy) in &corners {
            let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
            for dy in -5i64..=5 {
                for dx in -5i64..=5 {
                    let x = (cx as i64 + dx).clamp(0, w as i64 - 1) as usize;
                    let y = (cy as i64 + dy).clamp(0, h as i64 - 1) as usize;
                    let v = out.temps[[y, x]] as f64;
                    sx += v * (x as f64 + 0.5);
                    sy += v * (y as f64 + 0.5);
                    sw += v;
                }
            }
            assert!(sw > 0.0, "blob at ({cx},{cy}) vanished");
            sq_sum += (sx / sw - cx).powi(2) + (sy / sw - cy).powi(2);
        }
        let rms = (sq_sum / corners.len() as f64).sqrt();
        assert!(rms < 0.5, "corner rms {rms}");
    }

    fn synthetic_correspondences(
        model: &RadialDistortionModel,
    ) -> Vec<((f64, f64), (f64, f64))> {
        let mut out = Vec::new();
        for gy in 0..8 {
            for gx in 0..10 {
                let d = (20.0 + gx as f64 * 31.0, 15.0 + gy as f64 * 30.0);
                out.push((d, model.undistort_point(d.0, d.1)));
            }
        }
        out
    }

    #[test]
    fn fit_identity_yields_zero_coefficients() {
        let truth = model_320x240(0.0, 0.0);
        let report = fit_distortion(&synthetic_correspondences(&truth), 320, 240).unwrap();
        assert!(report.model.k1.abs() < 1e-6, "k1 {}", report.model.k1);
        assert!(report.model.k2.abs() < 1e-6, "k2 {}", report.model.k2);
    }

    #[test]
    fn fit_recovers_known_model() {
        let truth = model_320x240(-0.2, 0.05);
        let report = fit_distortion(&synthetic_correspondences(&truth), 320, 240).unwrap();
        assert!(
            (report.model.k1 - truth.k1).abs() < 1e-4,
            "k1 {}",
            report.model.k1
        );
        assert!(
            (report.model.k2 - truth.k2).abs() < 1e-4,
            "k2 {}",
            report.model.k2
        );
        assert!(report.residual_rms_px < 1e-3, "rms {}", report.residual_rms_px);
        assert_eq!(report.model.fitted_rms, Some(report.residual_rms_px));
    }

    #[test]
    fn too_few_correspondences_degenerate() {
        let truth = model_320x240(-0.1, 0.0);
        let five: Vec<_> = synthetic_correspondences(&truth).into_iter().take(5).collect();
        assert!(matches!(
            fit_distortion(&five, 320, 240),
            Err(GeometryError::DegenerateCorrespondences(_))
        ));
    }

    #[test]
    fn collinear_correspondences_degenerate() {
        let pts: Vec<_> = (0..10)
            .map(|i| {
                let p = (10.0 + i as f64 * 20.0, 120.0);
                (p, p)
            })
            .collect();
        assert!(matches!(
            fit_distortion(&pts, 320, 240),
            Err(GeometryError::DegenerateCorrespondences(_))
        ));
    }

    #[test]
    fn model_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.toml");
        let mut model = model_320x240(-0.17, 0.03);
        model.fitted_rms = Some(0.002);
        model.save(&path).unwrap();
        let back = RadialDistortionModel::load(&path).unwrap();
        assert_eq!(model, back);
        let text = std::fs::read_to_string(&path).unwrap();
        for field in ["k1", "k2", "center_x", "center_y", "norm_scale", "fitted_rms"] {
            assert!(text.contains(field), "missing field {field}");
        }
    }
}
