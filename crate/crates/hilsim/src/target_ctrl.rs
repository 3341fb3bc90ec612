//! The target robot's own controller, i.e. the torque input `τ_s(t)` the
//! simulated robot would receive in orbit. Two modes: an open-loop torque
//! profile, and a resolved-rate controller toward a pose setpoint with
//! velocity saturation and an optional force-accommodation term that backs
//! the commanded velocity off proportionally to the measured force.

use nalgebra::DVector;

use crate::dynamics::TargetModel;
use crate::error::{HilError, Result};

#[derive(Debug, Clone)]
pub struct TorqueSinusoid {
    pub amplitude: DVector<f64>,
    pub omega: f64,
    pub phase: f64,
}

#[derive(Debug, Clone)]
pub enum TargetController {
    /// `τ_s(t) = bias + amplitude sin(ω t + φ)`.
    OpenLoop {
        bias: DVector<f64>,
        sinusoid: Option<TorqueSinusoid>,
    },
    /// Resolved-rate PD: saturated pose-error velocity command, reduced by
    /// the force-accommodation term, mapped through the link Jacobian and
    /// tracked by a velocity loop on the actuated coordinates.
    ResolvedRate {
        setpoint: DVector<f64>,
        /// Pose-error gain (1/s).
        rate_gain: f64,
        /// Velocity-command saturation per axis (m/s).
        max_speed: f64,
        /// Velocity-loop gain (N·m·s/rad).
        velocity_gain: f64,
        /// Force-accommodation gain (m/s per N); zero disables the loop.
        force_gain: f64,
    },
}

impl TargetController {
    pub fn torque(
        &self,
        t: f64,
        target: &TargetModel,
        q_s: &DVector<f64>,
        qd_s: &DVector<f64>,
        f_meas: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        let n = target.task_dim();
        match self {
            TargetController::OpenLoop { bias, sinusoid } => {
                let mut tau = bias.clone();
                if let Some(s) = sinusoid {
                    tau += &s.amplitude * (s.omega * t + s.phase).sin();
                }
                Ok(tau)
            }
            TargetController::ResolvedRate {
                setpoint,
                rate_gain,
                max_speed,
                velocity_gain,
                force_gain,
            } => {
                let p = target.pose(q_s);
                let mut v_cmd = (setpoint - &p) * *rate_gain;
                for i in 0..n {
                    v_cmd[i] = v_cmd[i].clamp(-max_speed, *max_speed);
                }
                v_cmd -= f_meas * *force_gain;

                // Map the task-rate command to the actuated coordinates.
                let split = target.flexible_split().unwrap_or(0);
                let jac = target.jacobian(q_s);
                let j_link = jac.view((0, 0), (n, n)).into_owned();
                let qd_des = j_link.lu().solve(&v_cmd).ok_or_else(|| {
                    HilError::SingularConfiguration(
                        "target link Jacobian is singular in the resolved-rate controller".into(),
                    )
                })?;
                let qd_act = qd_s.rows(split, n).into_owned();
                Ok((qd_des - qd_act) * *velocity_gain)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::appendix_one_dof_pair;
    use nalgebra::dvector;

    #[test]
    fn open_loop_profile() {
        let (_, target) = appendix_one_dof_pair();
        let ctrl = TargetController::OpenLoop {
            bias: dvector![0.3],
            sinusoid: Some(TorqueSinusoid {
                amplitude: dvector![0.1],
                omega: 4.0,
                phase: 0.0,
            }),
        };
        let tau = ctrl
            .torque(
                0.5,
                &target,
                &dvector![0.0, 0.0],
                &dvector![0.0, 0.0],
                &dvector![0.0],
            )
            .unwrap();
        assert!((tau[0] - (0.3 + 0.1 * (2.0_f64).sin())).abs() < 1e-12);
    }

    #[test]
    fn resolved_rate_saturates_and_accommodates_force() {
        let (_, target) = appendix_one_dof_pair();
        let ctrl = TargetController::ResolvedRate {
            setpoint: dvector![1.0],
            rate_gain: 10.0,
            max_speed: 0.03,
            velocity_gain: 2.0,
            force_gain: 0.01,
        };
        // Far from the setpoint at rest: saturated command, torque
        // = velocity_gain * (v_max / l).
        let tau = ctrl
            .torque(
                0.0,
                &target,
                &dvector![0.0, 0.0],
                &dvector![0.0, 0.0],
                &dvector![0.0],
            )
            .unwrap();
        assert!((tau[0] - 2.0 * 0.03 / 0.3).abs() < 1e-12);

        // A pressing force (negative) raises the commanded velocity by
        // -force_gain * f before saturation; already saturated here, so add
        // force through the unsaturated path instead.
        let tau_f = ctrl
            .torque(
                0.0,
                &target,
                &dvector![0.0, 0.0],
                &dvector![0.0, 0.0],
                &dvector![-2.0],
            )
            .unwrap();
        assert!(tau_f[0] > tau[0]);
    }
}
