//! Power-series coefficients of a generating function from samples on a
//! circle `|z| = r`.
//!
//! With `M` equispaced samples the discrete transform returns
//! `c_j r^j + Σ_{k≥1} c_{j+kM} r^{j+kM}`; for coefficients bounded by
//! `max|G|` the alias sum is at most `max|G| r^M / (1-r)` after dividing
//! by `r^j`. Evaluation error `ε·max|G|` in the samples is amplified by
//! `r^{-j}`, so a fixed `r = 0.9` loses everything past `j ≈ 250`. When
//! `adapt_radius` is set the radius is raised to keep that amplification
//! below the tolerance for the requested `J_out`.

use crate::{Complex64, Error, Result};
use rayon::prelude::*;
use rustfft::FftPlanner;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionSettings {
    pub radius: f64,
    pub samples: usize,
    /// Largest acceptable aliasing bound.
    pub tolerance: f64,
    /// Relative accuracy of one generating-function sample.
    pub eval_rel_error: f64,
    pub adapt_radius: bool,
}

impl Default for InversionSettings {
    fn default() -> Self {
        Self {
            radius: 0.9,
            samples: 1 << 14,
            tolerance: 1e-9,
            eval_rel_error: 1e-12,
            adapt_radius: true,
        }
    }
}

impl InversionSettings {
    pub fn check(&self, j_out: usize) -> Result<()> {
        if !(self.radius > 0.0 && self.radius < 1.0) {
            return Err(Error::Domain {
                what: "radius",
                value: self.radius,
            });
        }
        if !self.samples.is_power_of_two() || self.samples < 4 * j_out.max(1) {
            return Err(Error::Precondition(format!(
                "sample count M = {} must be a power of two with M ≥ 4·J_out = {}",
                self.samples,
                4 * j_out
            )));
        }
        Ok(())
    }

    /// Radius actually used for `j_out` coefficients.
    pub fn effective_radius(&self, j_out: usize) -> f64 {
        if !self.adapt_radius || j_out == 0 {
            return self.radius;
        }
        let needed = (10.0 * self.eval_rel_error / self.tolerance).powf(1.0 / j_out as f64);
        self.radius.max(needed).min(1.0 - 1e-6)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSeries {
    pub values: Vec<f64>,
    pub radius: f64,
    pub samples: usize,
    /// Bound on `|c_j - values_j|` from aliasing.
    pub aliasing_bound: f64,
    /// Bound on the amplified sample error at `j = J_out`.
    pub roundoff_bound: f64,
    /// Largest magnitude of a negative entry set to zero.
    pub max_clamp: f64,
}

impl CoefficientSeries {
    pub fn total_bound(&self) -> f64 {
        self.aliasing_bound + self.roundoff_bound
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn j_out(&self) -> usize {
        self.values.len() - 1
    }
}

/// Sample points `r e^{2πik/M}` for `k = 0..=M/2`; the remaining half follows
/// from conjugate symmetry of real-coefficient series.
pub fn half_circle(radius: f64, samples: usize) -> Vec<Complex64> {
    (0..=samples / 2)
        .map(|k| Complex64::from_polar(radius, std::f64::consts::TAU * k as f64 / samples as f64))
        .collect()
}

/// Coefficients `0..=j_out` from samples on the upper half circle.
pub fn invert_half_samples(
    half: &[Complex64],
    radius: f64,
    samples: usize,
    j_out: usize,
    settings: &InversionSettings,
) -> Result<CoefficientSeries> {
    if half.len() != samples / 2 + 1 {
        return Err(Error::InvalidParameter(format!(
            "expected {} half-circle samples, got {}",
            samples / 2 + 1,
            half.len()
        )));
    }
    let mut buffer = vec![Complex64::new(0.0, 0.0); samples];
    buffer[..half.len()].copy_from_slice(half);
    for k in 1..samples / 2 {
        buffer[samples - k] = half[k].conj();
    }
    let max_abs = half.iter().map(|z| z.norm()).fold(0.0, f64::max);
    FftPlanner::new().plan_fft_forward(samples).process(&mut buffer);

    let scale = 1.0 / samples as f64;
    let mut values = Vec::with_capacity(j_out + 1);
    let mut max_clamp = 0.0f64;
    let mut rj = 1.0;
    for c in buffer.iter().take(j_out + 1) {
        let v = c.re * scale / rj;
        if v < 0.0 {
            max_clamp = max_clamp.max(-v);
            values.push(0.0);
        } else {
            values.push(v);
        }
        rj *= radius;
    }
    let aliasing_bound = max_abs * radius.powf(samples as f64) / (1.0 - radius);
    let roundoff_bound = settings.eval_rel_error * max_abs / radius.powi(j_out as i32);
    if aliasing_bound > settings.tolerance {
        return Err(Error::Inversion(format!(
            "aliasing bound {aliasing_bound:e} exceeds tolerance {:e}; raise M or shrink r",
            settings.tolerance
        )));
    }
    Ok(CoefficientSeries {
        values,
        radius,
        samples,
        aliasing_bound,
        roundoff_bound,
        max_clamp,
    })
}

/// Extract coefficients `0..=j_out` of `gf`, evaluating samples in parallel.
pub fn extract<F>(gf: F, j_out: usize, settings: &InversionSettings) -> Result<CoefficientSeries>
where
    F: Fn(Complex64) -> Result<Complex64> + Sync,
{
    settings.check(j_out)?;
    let radius = settings.effective_radius(j_out);
    let points = half_circle(radius, settings.samples);
    let half = points.par_iter().map(|&z| gf(z)).collect::<Result<Vec<_>>>()?;
    invert_half_samples(&half, radius, settings.samples, j_out, settings)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_a_polynomial() {
        let settings = InversionSettings {
            radius: 0.5,
            samples: 64,
            ..Default::default()
        };
        let s = extract(|z| Ok(z * z * 3.0 + z + 0.5), 8, &settings).unwrap();
        for (j, want) in [0.5, 1.0, 3.0, 0.0, 0.0].iter().enumerate() {
            assert!((s.values[j] - want).abs() < 1e-12, "c_{j} = {}", s.values[j]);
        }
    }

    #[test]
    fn geometric_series_within_bounds() {
        // 1/(2 - z) = Σ z^j / 2^{j+1}
        let settings = InversionSettings {
            samples: 1 << 10,
            ..Default::default()
        };
        let s = extract(|z| Ok(Complex64::new(1.0, 0.0) / (Complex64::new(2.0, 0.0) - z)), 100, &settings).unwrap();
        for j in 0..=100 {
            let want = 0.5f64.powi(j as i32 + 1);
            assert!((s.values[j] - want).abs() <= s.total_bound() + 1e-15);
        }
    }

    #[test]
    fn adaptive_radius_grows_with_order() {
        let s = InversionSettings::default();
        assert_eq!(s.effective_radius(10), 0.9);
        let r = s.effective_radius(512);
        assert!(r > 0.98 && r < 0.995, "{r}");
        let fixed = InversionSettings {
            adapt_radius: false,
            ..s
        };
        assert_eq!(fixed.effective_radius(512), 0.9);
    }

    #[test]
    fn preconditions() {
        let bad = InversionSettings {
            samples: 1000,
            ..Default::default()
        };
        assert!(extract(Ok, 4, &bad).is_err());
        let small = InversionSettings {
            samples: 16,
            ..Default::default()
        };
        assert!(extract(Ok, 8, &small).is_err());
    }

    #[test]
    fn aliasing_above_tolerance_is_an_error() {
        let settings = InversionSettings {
            radius: 0.99,
            samples: 64,
            adapt_radius: false,
            ..Default::default()
        };
        assert!(matches!(extract(Ok, 8, &settings), Err(Error::Inversion(_))));
    }

    #[test]
    fn negative_entries_are_clamped_and_recorded() {
        let settings = InversionSettings {
            radius: 0.5,
            samples: 64,
            ..Default::default()
        };
        let s = extract(|z| Ok(Complex64::new(1.0, 0.0) - z * 0.25), 4, &settings).unwrap();
        assert_eq!(s.values[1], 0.0);
        assert!((s.max_clamp - 0.25).abs() < 1e-14);
    }
}
