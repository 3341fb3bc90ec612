//! Torque controllers for the emulating robot.
//!
//! The base computed-torque law makes the rigid arm reproduce the target
//! robot's task-space dynamics at acceleration level; matching accelerations
//! alone drifts, so the working law adds a drift-compensating feedback built
//! on integrals of the estimated target pose acceleration. An optional force
//! error feedback sharpens the contact transition, and a first-order actuator
//! lag model captures finite actuator bandwidth.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::DynTerms;
use crate::error::{HilError, Result};
use crate::integrate::rk4_step_scalar;

/// Drift-compensation and force-feedback gains.
///
/// `G_v` (1/s) and `G_p` (1/s²) shape the pose-error dynamics
/// `ë_p + G_v ė_p + G_p e_p = 0`; `G_f` (dimensionless) scales the optional
/// force-error feedback. In the scalar convention `G_v = k_v I`, `G_p = k_p I`
/// the controller bandwidth is `ω_p = 2 k_p / k_v`.
#[derive(Debug, Clone)]
pub struct ControllerGains {
    pub g_v: DMatrix<f64>,
    pub g_p: DMatrix<f64>,
    pub g_f: DMatrix<f64>,
}

impl ControllerGains {
    /// Diagonal gains `k_v I`, `k_p I` with force feedback disabled.
    pub fn scalar(n: usize, k_v: f64, k_p: f64) -> Self {
        ControllerGains {
            g_v: DMatrix::identity(n, n) * k_v,
            g_p: DMatrix::identity(n, n) * k_p,
            g_f: DMatrix::zeros(n, n),
        }
    }

    pub fn with_force_gain(mut self, k_f: f64) -> Self {
        let n = self.g_v.nrows();
        self.g_f = DMatrix::identity(n, n) * k_f;
        self
    }

    pub fn task_dim(&self) -> usize {
        self.g_v.nrows()
    }

    /// Controller bandwidth `ω_p = 2 k_p / k_v` under the scalar-diagonal
    /// convention.
    pub fn bandwidth(&self) -> f64 {
        2.0 * self.g_p[(0, 0)] / self.g_v[(0, 0)]
    }

    /// Positive-definiteness of `G_v`, `G_p`; non-negativity of `G_f`; and,
    /// when a bound on `‖Ṁ_s‖` is configured, the force-feedback stability
    /// bound `G_f < 2 G_v / λ_max(Ṁ_s)`. With a constant Cartesian inertia
    /// (`Ṁ_s = 0`) the bound is vacuous and only `G_f ≥ 0` is required.
    pub fn validate(&self, ms_rate_bound: f64) -> Result<()> {
        if self.g_v.clone().cholesky().is_none() {
            return Err(HilError::invalid_config(
                "gains.G_v",
                "must be symmetric positive-definite",
            ));
        }
        if self.g_p.clone().cholesky().is_none() {
            return Err(HilError::invalid_config(
                "gains.G_p",
                "must be symmetric positive-definite",
            ));
        }
        let gf_min = self
            .g_f
            .symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |a, b| a.min(*b));
        if gf_min < 0.0 {
            return Err(HilError::invalid_config(
                "gains.G_f",
                "must be non-negative",
            ));
        }
        if ms_rate_bound > 0.0 {
            let gf_max = self
                .g_f
                .symmetric_eigenvalues()
                .iter()
                .fold(f64::NEG_INFINITY, |a, b| a.max(*b));
            let limit = 2.0 * self.g_v[(0, 0)] / ms_rate_bound;
            if gf_max >= limit {
                return Err(HilError::invalid_config(
                    "gains.G_f",
                    format!("must stay below 2 G_v / lambda_max(dM_s/dt) = {limit:.4}"),
                ));
            }
        }
        Ok(())
    }

    /// True when the admittance `s²/(s² + G_v s + G_p)` has a resonant peak
    /// (`G_v² < 2 G_p` in the scalar convention); the validator reports this
    /// as a warning because it breaks the `‖Z‖_∞ = 1` assumption used by the
    /// disturbance-sensitivity bounds.
    pub fn admittance_has_peak(&self) -> bool {
        let k_v = self.g_v[(0, 0)];
        let k_p = self.g_p[(0, 0)];
        k_v * k_v < 2.0 * k_p
    }
}

/// Integrator and bookkeeping state owned by one run.
#[derive(Debug, Clone)]
pub struct ControllerState {
    /// `∫ ã_s dt` — the reference pose rate.
    pub accel_integral: DVector<f64>,
    /// `∫∫ ã_s dt` — the reference pose.
    pub accel_double_integral: DVector<f64>,
}

impl ControllerState {
    /// Initialize the drift integrators from the actual initial pose and pose
    /// rate so that `e_p(0) = ė_p(0) = 0`.
    pub fn consistent(p0: &DVector<f64>, pdot0: &DVector<f64>) -> Self {
        ControllerState {
            accel_integral: pdot0.clone(),
            accel_double_integral: p0.clone(),
        }
    }

    /// Initialize with a deliberate pose-error offset, used by the
    /// error-dynamics studies.
    pub fn with_pose_offset(p0: &DVector<f64>, pdot0: &DVector<f64>, offset: &DVector<f64>) -> Self {
        ControllerState {
            accel_integral: pdot0.clone(),
            accel_double_integral: p0 - offset,
        }
    }

    pub fn reset(&mut self) {
        self.accel_integral.fill(0.0);
        self.accel_double_integral.fill(0.0);
    }
}

/// Estimated pose acceleration of the target robot from its unconstrained
/// model driven by the measured force:
/// `ã_s = J_s M_s⁻¹ (B τ_s - h_s) + J̇_s q̇_s + J_s M_s⁻¹ J_sᵀ f_a`.
pub fn target_pose_accel_estimate(
    target_terms: &DynTerms,
    actuation: &DMatrix<f64>,
    qd_s: &DVector<f64>,
    tau_s: &DVector<f64>,
    f_a: &DVector<f64>,
) -> Result<DVector<f64>> {
    let chol = target_terms
        .mass
        .clone()
        .cholesky()
        .ok_or(HilError::SingularMatrix { what: "target mass matrix" })?;
    let rhs = actuation * tau_s - &target_terms.bias + target_terms.jac.transpose() * f_a;
    Ok(&target_terms.jac * chol.solve(&rhs) + &target_terms.jac_dot * qd_s)
}

fn inverted_jacobian(r: &DynTerms) -> Result<DMatrix<f64>> {
    r.jac
        .clone()
        .try_inverse()
        .ok_or_else(|| HilError::SingularConfiguration("emulating-robot Jacobian is singular".into()))
}

/// Base computed-torque law that equates the physical constraint force with
/// the simulated Lagrange multiplier at acceleration level:
///
/// ```text
///   τ_r^c = h_r + M_r J_r⁻¹ (J_s M_s⁻¹ (B τ_s - h_s) + J̇_s q̇_s - J̇_r q̇_r)
///           - J_rᵀ (I - 𝓜_r 𝓜_s⁻¹) f_a.
/// ```
///
/// The last term is the force feedback; it vanishes when the two Cartesian
/// inertias match.
pub fn base_torque_law(
    rigid_terms: &DynTerms,
    qd_r: &DVector<f64>,
    target_terms: &DynTerms,
    actuation: &DMatrix<f64>,
    qd_s: &DVector<f64>,
    tau_s: &DVector<f64>,
    f_a: &DVector<f64>,
) -> Result<DVector<f64>> {
    let jr_inv = inverted_jacobian(rigid_terms)?;
    let ms_chol = target_terms
        .mass
        .clone()
        .cholesky()
        .ok_or(HilError::SingularMatrix { what: "target mass matrix" })?;

    let motion = &target_terms.jac * ms_chol.solve(&(actuation * tau_s - &target_terms.bias))
        + &target_terms.jac_dot * qd_s
        - &rigid_terms.jac_dot * qd_r;

    let m_r = crate::constraint::cartesian_inertia(&rigid_terms.mass, &rigid_terms.jac)?;
    let m_s = crate::constraint::cartesian_inertia(&target_terms.mass, &target_terms.jac)?;
    let ms_inv = m_s
        .cholesky()
        .ok_or(HilError::SingularMatrix { what: "target Cartesian inertia" })?
        .inverse();
    let n = rigid_terms.jac.nrows();
    let force_gain = DMatrix::identity(n, n) - m_r * ms_inv;

    Ok(&rigid_terms.bias + &rigid_terms.mass * &jr_inv * motion
        - rigid_terms.jac.transpose() * force_gain * f_a)
}

/// Auxiliary input of the drift-compensated law,
/// `u = ã_s - G_v ė_p - G_p e_p`, with `e_p = p_r - ∫∫ã_s` and
/// `ė_p = ṗ_r - ∫ã_s`.
pub fn auxiliary_input(
    a_s_est: &DVector<f64>,
    e_p: &DVector<f64>,
    e_p_dot: &DVector<f64>,
    gains: &ControllerGains,
) -> DVector<f64> {
    a_s_est - &gains.g_v * e_p_dot - &gains.g_p * e_p
}

/// Auxiliary input with force-error feedback,
/// `u = ã_s - G_v ė_p - G_p e_p - G_f e_f`, with `e_f = 𝓜_s ë_p` built from
/// the supplied pose-acceleration-error estimate.
pub fn force_feedback_input(
    a_s_est: &DVector<f64>,
    e_p: &DVector<f64>,
    e_p_dot: &DVector<f64>,
    e_f: &DVector<f64>,
    gains: &ControllerGains,
) -> DVector<f64> {
    a_s_est - &gains.g_v * e_p_dot - &gains.g_p * e_p - &gains.g_f * e_f
}

/// Drift-compensated torque law
/// `τ_r^c = h_r - M_r J_r⁻¹ J̇_r q̇_r - J_rᵀ f_a + M_r J_r⁻¹ u`.
///
/// The `-J_rᵀ f_a` term feeds the measured constraint force forward so the
/// closed loop with an ideal actuator realizes `p̈_r = u` exactly, giving the
/// homogeneous error dynamics `ë_p + G_v ė_p + G_p e_p = 0`.
pub fn drift_compensated_law(
    rigid_terms: &DynTerms,
    qd_r: &DVector<f64>,
    f_a: &DVector<f64>,
    u: &DVector<f64>,
) -> Result<DVector<f64>> {
    let jr_inv = inverted_jacobian(rigid_terms)?;
    if !f_a.iter().all(|x| x.is_finite()) {
        return Err(HilError::NonFinite("measured constraint force".into()));
    }
    Ok(&rigid_terms.bias - &rigid_terms.mass * &jr_inv * (&rigid_terms.jac_dot * qd_r)
        - rigid_terms.jac.transpose() * f_a
        + &rigid_terms.mass * &jr_inv * u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActuatorMode {
    /// `τ_r = τ_r^c` instantaneously.
    Ideal,
    /// First-order lag `τ̇_r = ω_a (τ_r^c - τ_r)`, i.e. `H(s) = 1/(1 + s/ω_a)`.
    FirstOrderLag,
}

/// Actuator dynamics of the emulating robot's joints.
#[derive(Debug, Clone)]
pub struct ActuatorModel {
    pub mode: ActuatorMode,
    /// Bandwidth `ω_a` (rad/s); unused in ideal mode.
    pub bandwidth: f64,
    /// Internal torque state, meaningful in lag mode.
    pub torque: DVector<f64>,
}

impl ActuatorModel {
    pub fn ideal(n: usize) -> Self {
        ActuatorModel {
            mode: ActuatorMode::Ideal,
            bandwidth: f64::INFINITY,
            torque: DVector::zeros(n),
        }
    }

    pub fn first_order_lag(n: usize, bandwidth: f64) -> Self {
        ActuatorModel {
            mode: ActuatorMode::FirstOrderLag,
            bandwidth,
            torque: DVector::zeros(n),
        }
    }

    /// Initialize the lag state so the run starts without a torque step.
    pub fn initialize(&mut self, initial_command: &DVector<f64>) {
        if self.mode == ActuatorMode::FirstOrderLag {
            self.torque = initial_command.clone();
        }
    }

    /// Torque rate of the lag state for a held command.
    pub fn torque_rate(&self, torque: &DVector<f64>, command: &DVector<f64>) -> DVector<f64> {
        match self.mode {
            ActuatorMode::Ideal => DVector::zeros(torque.len()),
            ActuatorMode::FirstOrderLag => (command - torque) * self.bandwidth,
        }
    }

    /// Advance the actuator one step with the shared integrator (command held
    /// over the step). Ideal mode passes the command through. Bandwidths
    /// faster than the step are resolved by internal substepping so the lag
    /// remains stable and accurate all the way to the ideal limit.
    pub fn actuator_step(&mut self, command: &DVector<f64>, h: f64) -> DVector<f64> {
        match self.mode {
            ActuatorMode::Ideal => {
                self.torque = command.clone();
            }
            ActuatorMode::FirstOrderLag => {
                let wa = self.bandwidth;
                let substeps = (wa * h / 0.5).ceil().max(1.0) as usize;
                let hs = h / substeps as f64;
                for i in 0..self.torque.len() {
                    let cmd = command[i];
                    let mut tau = self.torque[i];
                    for _ in 0..substeps {
                        tau = rk4_step_scalar(&|_t, tau| wa * (cmd - tau), 0.0, tau, hs);
                    }
                    self.torque[i] = tau;
                }
            }
        }
        self.torque.clone()
    }
}
