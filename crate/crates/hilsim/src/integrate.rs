//! Fixed-step integration. Every stateful component in the crate (plant,
//! actuator lag, drift integrators, simulated target) advances through the
//! same classical Runge-Kutta step so that a run is deterministic and the
//! schemes stay comparable.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{HilError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorMethod {
    /// Classical 4th-order Runge-Kutta.
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Step size in seconds; constant for a run.
    pub step: f64,
    pub method: IntegratorMethod,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            step: 1e-4,
            method: IntegratorMethod::Rk4,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(HilError::invalid_config("step", "must be positive and finite"));
        }
        Ok(())
    }
}

fn ensure_finite(what: &str, v: &DVector<f64>) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(HilError::NonFinite(what.to_string()))
    }
}

/// One classical RK4 step of `y' = f(t, y)`.
///
/// Deterministic: identical inputs give bit-identical outputs. A non-finite
/// derivative aborts with a diagnostic naming the stage.
pub fn rk4_step<F>(f: &mut F, t: f64, y: &DVector<f64>, h: f64) -> Result<DVector<f64>>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    let k1 = f(t, y)?;
    ensure_finite("rk4 stage k1", &k1)?;
    let k2 = f(t + 0.5 * h, &(y + &k1 * (0.5 * h)))?;
    ensure_finite("rk4 stage k2", &k2)?;
    let k3 = f(t + 0.5 * h, &(y + &k2 * (0.5 * h)))?;
    ensure_finite("rk4 stage k3", &k3)?;
    let k4 = f(t + h, &(y + &k3 * h))?;
    ensure_finite("rk4 stage k4", &k4)?;
    Ok(y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// RK4 step for a scalar first-order system, used by the actuator lag model.
pub fn rk4_step_scalar<F>(f: &F, t: f64, y: f64, h: f64) -> f64
where
    F: Fn(f64, f64) -> f64,
{
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
    let k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
    let k4 = f(t + h, y + h * k3);
    y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    #[test]
    fn constant_velocity_is_exact() {
        let v = 1.7;
        let mut f = |_t: f64, _y: &DVector<f64>| Ok(dvector![v]);
        let h = 0.037;
        let y1 = rk4_step(&mut f, 0.0, &dvector![2.0], h).unwrap();
        assert_eq!(y1[0], 2.0 + v * h);
    }

    #[test]
    fn zero_derivative_is_a_fixed_point() {
        let mut f = |_t: f64, _y: &DVector<f64>| Ok(dvector![0.0, 0.0]);
        let y0 = dvector![0.4, -1.2];
        let y1 = rk4_step(&mut f, 1.0, &y0, 1e-2).unwrap();
        assert_eq!(y1, y0);
    }

    #[test]
    fn harmonic_oscillator_returns_after_one_period() {
        // x'' = -x from (1, 0); the exact solution returns to (1, 0) after 2π.
        let mut f = |_t: f64, y: &DVector<f64>| Ok(dvector![y[1], -y[0]]);
        let h = 1e-3;
        let steps = (2.0 * std::f64::consts::PI / h) as usize;
        let mut y = dvector![1.0, 0.0];
        let mut t = 0.0;
        for _ in 0..steps {
            y = rk4_step(&mut f, t, &y, h).unwrap();
            t += h;
        }
        // Land exactly on t = 2π with a fractional final step.
        let rem = 2.0 * std::f64::consts::PI - t;
        y = rk4_step(&mut f, t, &y, rem).unwrap();
        assert_relative_eq!(y[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(y[1], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn non_finite_derivative_is_reported() {
        let mut f = |_t: f64, _y: &DVector<f64>| Ok(dvector![f64::NAN]);
        let err = rk4_step(&mut f, 0.0, &dvector![0.0], 1e-3).unwrap_err();
        assert!(matches!(err, HilError::NonFinite(_)));
    }

    #[test]
    fn identical_inputs_give_bit_identical_outputs() {
        let mut f = |t: f64, y: &DVector<f64>| Ok(dvector![y[1], -1.3 * y[0] + 0.2 * t]);
        let y0 = dvector![0.3, -0.7];
        let a = rk4_step(&mut f, 0.5, &y0, 1e-3).unwrap();
        let b = rk4_step(&mut f, 0.5, &y0, 1e-3).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }
}
