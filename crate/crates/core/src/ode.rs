//! Dormand–Prince 5(4) embedded Runge–Kutta integration for small complex
//! systems `y' = rhs(t, y)`.
//!
//! Only the terminal value is returned. Error control is componentwise with
//! scale `abs_tol[i] + rel_tol * max(|y_i|, |y_i_new|)`; a zero absolute
//! tolerance gives pure relative control, which is what a solution decaying
//! like a power of `t` needs.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("maximum number of steps ({0}) exceeded")]
    TooManySteps(usize),
    #[error("right-hand side is not finite at t = {0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeSettings {
    pub rel_tol: f64,
    pub max_steps: usize,
}

impl Default for OdeSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_steps: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOutcome<const N: usize> {
    pub y: [Complex64; N],
    pub steps: usize,
    pub rejected: usize,
    /// Sum of accepted local error estimates, in units of the error scale.
    pub error_estimate: f64,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine<const N: usize>(y: &[Complex64; N], h: f64, terms: &[(f64, &[Complex64; N])]) -> [Complex64; N] {
    let mut out = *y;
    for (w, k) in terms {
        for i in 0..N {
            out[i] += k[i] * (h * w);
        }
    }
    out
}

fn finite<const N: usize>(y: &[Complex64; N]) -> bool {
    y.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Integrate from `t0` to `t1 > t0`.
pub fn integrate<const N: usize, F>(
    mut rhs: F,
    t0: f64,
    y0: [Complex64; N],
    t1: f64,
    abs_tol: [f64; N],
    settings: &OdeSettings,
) -> Result<OdeOutcome<N>, OdeError>
where
    F: FnMut(f64, &[Complex64; N]) -> [Complex64; N],
{
    let mut t = t0;
    let mut y = y0;
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(OdeOutcome {
            y,
            steps: 0,
            rejected: 0,
            error_estimate: 0.0,
        });
    }
    let mut k1 = rhs(t, &y);
    if !finite(&k1) {
        return Err(OdeError::NonFinite(t));
    }

    // initial step from the ratio of solution scale to derivative size
    let mut h = {
        let mut ratio = f64::INFINITY;
        for i in 0..N {
            let scale = abs_tol[i] + settings.rel_tol * y[i].norm();
            let d = k1[i].norm();
            if d > 0.0 && scale > 0.0 {
                ratio = ratio.min((y[i].norm() + abs_tol[i]) / d);
            }
        }
        let guess = if ratio.is_finite() { 0.01 * ratio } else { span };
        guess.min(span).max(span * 1e-12)
    };

    let mut steps = 0;
    let mut rejected = 0;
    let mut error_estimate = 0.0;
    while t < t1 {
        if steps + rejected >= settings.max_steps {
            return Err(OdeError::TooManySteps(settings.max_steps));
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        let k2 = rhs(t + C2 * h, &combine(&y, h, &[(A21, &k1)]));
        let k3 = rhs(t + C3 * h, &combine(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = rhs(t + C4 * h, &combine(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = rhs(
            t + C5 * h,
            &combine(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = rhs(
            t + h,
            &combine(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        );
        let y_new = combine(&y, h, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = rhs(t + h, &y_new);

        let ok = finite(&y_new) && finite(&k7);
        let mut err = 0.0f64;
        if ok {
            for i in 0..N {
                let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
                let scale = abs_tol[i] + settings.rel_tol * y[i].norm().max(y_new[i].norm());
                let ratio = if scale > 0.0 {
                    e.norm() / scale
                } else if e.norm() == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
                err = err.max(ratio);
            }
        } else {
            err = f64::INFINITY;
        }

        if err <= 1.0 {
            t = if last { t1 } else { t + h };
            y = y_new;
            k1 = k7;
            steps += 1;
            error_estimate += err;
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
        } else {
            rejected += 1;
            let factor = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            h *= factor;
            if h < 1e-14 * t.abs().max(span) {
                return Err(OdeError::StepUnderflow { t, h });
            }
        }
    }
    Ok(OdeOutcome {
        y,
        steps,
        rejected,
        error_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn exponential_decay() {
        let out = integrate(|_, y: &[Complex64; 1]| [-y[0]], 0.0, [c(1.0)], 5.0, [0.0], &OdeSettings::default()).unwrap();
        assert!((out.y[0].re - (-5.0f64).exp()).abs() / (-5.0f64).exp() < 1e-10);
    }

    #[test]
    fn power_law_decay_with_relative_control() {
        // y' = -y^{3/2}, y(0)=1  =>  y(t) = (1 + t/2)^{-2}
        let t1 = 1e6;
        let out = integrate(
            |_, y: &[Complex64; 1]| [-y[0].powf(1.5)],
            0.0,
            [c(1.0)],
            t1,
            [0.0],
            &OdeSettings::default(),
        )
        .unwrap();
        let exact = (1.0 + 0.5 * t1).powi(-2);
        assert!((out.y[0].re / exact - 1.0).abs() < 1e-9, "{}", out.y[0].re / exact - 1.0);
    }

    #[test]
    fn rotation_in_the_complex_plane() {
        let out = integrate(
            |_, y: &[Complex64; 1]| [Complex64::i() * y[0]],
            0.0,
            [c(1.0)],
            std::f64::consts::PI,
            [1e-14],
            &OdeSettings::default(),
        )
        .unwrap();
        assert!((out.y[0] - c(-1.0)).norm() < 1e-10);
    }

    #[test]
    fn zero_span_is_identity() {
        let out = integrate(|_, y: &[Complex64; 1]| [y[0]], 2.0, [c(3.0)], 2.0, [0.0], &OdeSettings::default()).unwrap();
        assert_eq!(out.y[0], c(3.0));
        assert_eq!(out.steps, 0);
    }

    #[test]
    fn step_budget_is_enforced() {
        let settings = OdeSettings {
            rel_tol: 1e-12,
            max_steps: 5,
        };
        let err = integrate(|_, y: &[Complex64; 1]| [-y[0]], 0.0, [c(1.0)], 100.0, [0.0], &settings);
        assert_eq!(err, Err(OdeError::TooManySteps(5)));
    }
}
