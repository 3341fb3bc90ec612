//! Full emulation runs.
//!
//! * [`Scheme::ConstrainedDae`] (scheme A): the target robot is simulated as a
//!   rheonomically constrained system. Per step: torque command from the
//!   drift-compensated law, actuator, plant integration under contact force
//!   plus disturbance, independent-coordinate integration, velocity
//!   reconstruction with CLIK or Newton-Raphson correction, Lagrange
//!   multiplier, record.
//! * [`Scheme::UnconstrainedOde`] (scheme B): the target robot is simulated
//!   unconstrained, driven by the measured contact force; the controller
//!   matches pose trajectories.
//! * [`Scheme::DirectOracle`]: the target robot alone against the same
//!   environment — the ground truth for dynamic-equivalence claims.
//!
//! Under identical disturbance-free scenarios the two schemes reproduce the
//! same trajectories up to integration error; with disturbance, scheme A
//! keeps the constraint satisfied and shows a force error, scheme B keeps the
//! force consistent and shows a pose error.

use nalgebra::{DMatrix, DVector};

use crate::constraint::{
    general_velocity, independent_accel, lagrange_multiplier, structural_nullspace,
};
use crate::control::{
    auxiliary_input, drift_compensated_law, force_feedback_input, target_pose_accel_estimate,
    ActuatorMode, ControllerGains, ControllerState,
};
use crate::dynamics::{eval_rigid, eval_target, PoseTransform, RigidModel, TargetModel};
use crate::environment::{DisturbanceSource, DisturbanceSpec, Environment};
use crate::error::{HilError, Result};
use crate::ik::{newton_raphson_correct, ClikConfig, NewtonRaphsonConfig};
use crate::integrate::rk4_step;
use crate::target_ctrl::TargetController;
use crate::trace::SimTrace;

/// Force magnitude beyond which a run is aborted as numerically divergent.
const FORCE_ABORT: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Rheonomically constrained (DAE) emulation — scheme A.
    ConstrainedDae,
    /// Unconstrained (ODE) emulation — scheme B.
    UnconstrainedOde,
    /// Direct simulation of the target robot, no emulation layer.
    DirectOracle,
}

#[derive(Debug, Clone)]
pub enum CorrectionMode {
    /// Closed-loop inverse kinematics running at the simulation rate.
    Clik(ClikConfig),
    /// Exact constraint projection after every step.
    NewtonRaphson(NewtonRaphsonConfig),
}

#[derive(Debug, Clone, Copy)]
pub struct ActuatorSetup {
    pub mode: ActuatorMode,
    pub bandwidth: f64,
}

impl ActuatorSetup {
    pub fn ideal() -> Self {
        ActuatorSetup {
            mode: ActuatorMode::Ideal,
            bandwidth: f64::INFINITY,
        }
    }

    pub fn lag(bandwidth: f64) -> Self {
        ActuatorSetup {
            mode: ActuatorMode::FirstOrderLag,
            bandwidth,
        }
    }
}

/// Initial conditions. The target robot's state is derived from the emulating
/// robot's so that the run starts consistent: `Φ(0) = 0` and
/// `J_s q̇_s(0) = J_r q̇_r(0)`.
#[derive(Debug, Clone)]
pub struct InitialState {
    pub q_r: DVector<f64>,
    pub qd_r: DVector<f64>,
    /// Motor-minus-link angle offsets (m-n entries); pre-loads the joint
    /// springs of a flexible target.
    pub motor_offset: DVector<f64>,
    /// Initial self-motion rates; defaults to the rates that keep the joint
    /// springs' deflection constant (motor rates equal link rates).
    pub xi: Option<DVector<f64>>,
    /// Optional initial pose-error offset injected into the drift
    /// integrators, for error-dynamics studies.
    pub pose_error_offset: Option<DVector<f64>>,
}

impl InitialState {
    pub fn rest(n: usize, m: usize) -> Self {
        InitialState {
            q_r: DVector::zeros(n),
            qd_r: DVector::zeros(n),
            motor_offset: DVector::zeros(m - n),
            xi: None,
            pose_error_offset: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub rigid: RigidModel,
    pub target: TargetModel,
    pub scheme: Scheme,
    pub gains: ControllerGains,
    pub actuator: ActuatorSetup,
    pub environment: Option<Environment>,
    pub disturbance: DisturbanceSpec,
    pub target_controller: TargetController,
    pub correction: CorrectionMode,
    pub initial: InitialState,
    pub duration: f64,
    pub step: f64,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let n = self.rigid.joints();
        let m = self.target.coords();
        if self.target.task_dim() != n {
            return Err(HilError::invalid_config(
                "models",
                "emulating and target robots must share the task-space dimension",
            ));
        }
        if !(self.step > 0.0) {
            return Err(HilError::invalid_config("step", "must be positive"));
        }
        if !(self.duration > 0.0) {
            return Err(HilError::invalid_config("duration", "must be positive"));
        }
        self.gains.validate(0.0)?;
        if self.gains.task_dim() != n {
            return Err(HilError::invalid_config(
                "gains",
                "gain dimension must match the task space",
            ));
        }
        if self.actuator.mode == ActuatorMode::FirstOrderLag && !(self.actuator.bandwidth > 0.0) {
            return Err(HilError::invalid_config(
                "actuator.omega_a",
                "must be positive in lag mode",
            ));
        }
        if let Some(env) = &self.environment {
            env.validate()?;
            if env.wall.len() != n {
                return Err(HilError::invalid_config(
                    "environment.wall",
                    "must have one entry per task axis",
                ));
            }
        }
        if self.disturbance.axes.len() != n {
            return Err(HilError::invalid_config(
                "disturbance.axes",
                "must have one entry per task axis",
            ));
        }
        if self.initial.q_r.len() != n || self.initial.qd_r.len() != n {
            return Err(HilError::invalid_config(
                "initial.q_r",
                "dimension must match the emulating robot",
            ));
        }
        if self.initial.motor_offset.len() != m - n {
            return Err(HilError::invalid_config(
                "initial.motor_offset",
                "must have m - n entries",
            ));
        }
        match &self.correction {
            CorrectionMode::Clik(c) => c.validate()?,
            CorrectionMode::NewtonRaphson(c) => c.validate()?,
        }
        Ok(())
    }

    /// Target state consistent with the emulating robot's initial state.
    fn initial_target_state(&self) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let n = self.rigid.joints();
        let m = self.target.coords();
        let p0 = self.rigid.pose(&self.initial.q_r);
        let split = self.target.flexible_split().unwrap_or(n);

        // Solve the link block for the initial pose, seeding with the rigid
        // joint angles (the built-in pairs share link geometry).
        let mut q_s = DVector::zeros(m);
        for i in 0..split.min(n) {
            q_s[i] = self.initial.q_r[i];
        }
        let nr = NewtonRaphsonConfig::default();
        let (mut q_s, _) = newton_raphson_correct(&self.target, &p0, &q_s, &nr)?;
        for i in 0..(m - n) {
            q_s[split + i] += self.initial.motor_offset[i];
        }

        let basis = structural_nullspace(&self.target, &q_s)?;
        let jac = self.target.jacobian(&q_s);
        let pdot0 = self.rigid.jacobian(&self.initial.q_r) * &self.initial.qd_r;
        let xi0 = match &self.initial.xi {
            Some(xi) => xi.clone(),
            None => {
                // Zero initial spring-rate: self-motion follows the link rates.
                let particular = crate::constraint::pseudoinverse(&jac)? * &pdot0;
                basis.transpose() * particular
            }
        };
        let qd_s = general_velocity(&jac, &pdot0, &basis, &xi0)?;
        Ok((q_s, qd_s, xi0))
    }
}

/// Offsets of the state blocks inside the flat integration vector.
struct Layout {
    n: usize,
    m: usize,
    q_r: usize,
    qd_r: usize,
    i1: usize,
    i2: usize,
    q_s: usize,
    /// Scheme A: ξ; scheme B: q̇_s.
    aux: usize,
    aux_len: usize,
    tau: Option<usize>,
    len: usize,
}

impl Layout {
    fn new(n: usize, m: usize, scheme: Scheme, lag: bool) -> Self {
        let aux_len = match scheme {
            Scheme::ConstrainedDae => m - n,
            Scheme::UnconstrainedOde => m,
            Scheme::DirectOracle => unreachable!("oracle uses its own layout"),
        };
        let q_r = 0;
        let qd_r = q_r + n;
        let i1 = qd_r + n;
        let i2 = i1 + n;
        let q_s = i2 + n;
        let aux = q_s + m;
        let tau_off = aux + aux_len;
        let (tau, len) = if lag {
            (Some(tau_off), tau_off + n)
        } else {
            (None, tau_off)
        };
        Layout {
            n,
            m,
            q_r,
            qd_r,
            i1,
            i2,
            q_s,
            aux,
            aux_len,
            tau,
            len,
        }
    }
}

/// All algebraic quantities at one instant, plus the state derivative.
struct Instant {
    deriv: DVector<f64>,
    q_r: DVector<f64>,
    qd_r: DVector<f64>,
    q_s: DVector<f64>,
    qd_s: DVector<f64>,
    xi: DVector<f64>,
    p_r: DVector<f64>,
    p_s: DVector<f64>,
    phi: DVector<f64>,
    f_a: DVector<f64>,
    lambda: DVector<f64>,
    e_p: DVector<f64>,
    e_f: DVector<f64>,
    tau_s: DVector<f64>,
    tau_r_cmd: DVector<f64>,
    tau_r: DVector<f64>,
}

struct EmulationContext<'a> {
    scenario: &'a Scenario,
    layout: Layout,
    disturbance: DisturbanceSource,
    pose_map: PoseTransform,
}

impl<'a> EmulationContext<'a> {
    fn evaluate(&self, t: f64, y: &DVector<f64>) -> Result<Instant> {
        let sc = self.scenario;
        let l = &self.layout;
        let (n, m) = (l.n, l.m);

        let q_r = y.rows(l.q_r, n).into_owned();
        let qd_r = y.rows(l.qd_r, n).into_owned();
        let i1 = y.rows(l.i1, n).into_owned();
        let i2 = y.rows(l.i2, n).into_owned();
        let q_s = y.rows(l.q_s, m).into_owned();

        let r_terms = eval_rigid(&sc.rigid, &q_r, &qd_r)?;
        let p_r = r_terms.pose.clone();
        let pdot_r = &r_terms.jac * &qd_r;

        // Contact force from the environment the emulating robot touches.
        let f = match &sc.environment {
            Some(env) => env.contact_force(&p_r, &pdot_r),
            None => DVector::zeros(n),
        };
        let f_a = self.pose_map.generalized_force(&f);
        let d = self.disturbance.sample(t);

        // Target state estimate.
        let (qd_s, xi, basis) = match sc.scheme {
            Scheme::ConstrainedDae => {
                let xi = y.rows(l.aux, l.aux_len).into_owned();
                let basis = structural_nullspace(&sc.target, &q_s)?;
                let jac_s = sc.target.jacobian(&q_s);
                let qd_s = general_velocity(&jac_s, &pdot_r, &basis, &xi)?;
                (qd_s, xi, basis)
            }
            Scheme::UnconstrainedOde => {
                let qd_s = y.rows(l.aux, l.aux_len).into_owned();
                let basis = structural_nullspace(&sc.target, &q_s)?;
                let xi = basis.transpose() * &qd_s;
                (qd_s, xi, basis)
            }
            Scheme::DirectOracle => unreachable!(),
        };

        let s_terms = eval_target(&sc.target, &q_s, &qd_s)?;
        let actuation = sc.target.actuation();
        let tau_s = sc
            .target_controller
            .torque(t, &sc.target, &q_s, &qd_s, &f_a)?;

        let a_s = target_pose_accel_estimate(&s_terms, &actuation, &qd_s, &tau_s, &f_a)?;
        let e_p = &p_r - &i2;
        let e_p_dot = &pdot_r - &i1;

        let gf_active = sc.gains.g_f.iter().any(|x| *x != 0.0);
        let u = if gf_active {
            let m_s = crate::constraint::cartesian_inertia(&s_terms.mass, &s_terms.jac)?;
            let e_p_ddot = match sc.actuator.mode {
                ActuatorMode::Ideal => {
                    // Ideal actuator closes the loop algebraically:
                    // (I + G_f 𝓜_s) ë_p = -G_v ė_p - G_p e_p + 𝓜_r⁻¹ d.
                    let m_r = crate::constraint::cartesian_inertia(&r_terms.mass, &r_terms.jac)?;
                    let mr_inv_d = m_r
                        .cholesky()
                        .ok_or(HilError::SingularMatrix {
                            what: "emulating Cartesian inertia",
                        })?
                        .solve(&d);
                    let rhs = -(&sc.gains.g_v * &e_p_dot) - &sc.gains.g_p * &e_p + mr_inv_d;
                    let a = DMatrix::identity(n, n) + &sc.gains.g_f * &m_s;
                    a.lu().solve(&rhs).ok_or(HilError::SingularMatrix {
                        what: "force-feedback loop matrix",
                    })?
                }
                ActuatorMode::FirstOrderLag => {
                    // Measured pose acceleration from the plant under the
                    // current actuator torque.
                    let tau_act = y.rows(l.tau.unwrap(), n).into_owned();
                    let rhs = &tau_act - &r_terms.bias + r_terms.jac.transpose() * (&f_a + &d);
                    let qdd =
                        r_terms.mass.clone().cholesky().unwrap().solve(&rhs);
                    &r_terms.jac * qdd + &r_terms.jac_dot * &qd_r - &a_s
                }
            };
            let e_f_est = &m_s * e_p_ddot;
            force_feedback_input(&a_s, &e_p, &e_p_dot, &e_f_est, &sc.gains)
        } else {
            auxiliary_input(&a_s, &e_p, &e_p_dot, &sc.gains)
        };

        let tau_r_cmd = drift_compensated_law(&r_terms, &qd_r, &f_a, &u)?;
        let tau_r = match sc.actuator.mode {
            ActuatorMode::Ideal => tau_r_cmd.clone(),
            ActuatorMode::FirstOrderLag => y.rows(l.tau.unwrap(), n).into_owned(),
        };

        // Plant acceleration: disturbance enters alongside the true contact
        // force on the force channel.
        let plant_rhs = &tau_r - &r_terms.bias + r_terms.jac.transpose() * (&f_a + &d);
        let qdd_r = r_terms
            .mass
            .clone()
            .cholesky()
            .ok_or(HilError::SingularMatrix {
                what: "rigid mass matrix",
            })?
            .solve(&plant_rhs);
        let pddot_r = &r_terms.jac * &qdd_r + &r_terms.jac_dot * &qd_r;

        let lambda = lagrange_multiplier(&sc.target, &q_s, &qd_s, &tau_s, &pddot_r)?;
        let e_f = &f_a - &lambda;

        let p_s = s_terms.pose.clone();
        let phi = &p_r - &p_s;

        // Assemble the derivative.
        let mut deriv = DVector::zeros(l.len);
        deriv.rows_mut(l.q_r, n).copy_from(&qd_r);
        deriv.rows_mut(l.qd_r, n).copy_from(&qdd_r);
        deriv.rows_mut(l.i1, n).copy_from(&a_s);
        deriv.rows_mut(l.i2, n).copy_from(&i1);
        match sc.scheme {
            Scheme::ConstrainedDae => {
                let xidot =
                    independent_accel(&sc.target, &basis, &q_s, &qd_s, &tau_s, &pddot_r)?;
                deriv.rows_mut(l.aux, l.aux_len).copy_from(&xidot);
                let qs_rate = match &sc.correction {
                    CorrectionMode::Clik(cfg) => {
                        crate::ik::clik_step(&sc.target, &q_s, &basis, &xi, &p_r, cfg)?
                    }
                    // Exact-projection mode integrates the reconstructed
                    // velocity and projects after the step.
                    CorrectionMode::NewtonRaphson(_) => qd_s.clone(),
                };
                deriv.rows_mut(l.q_s, m).copy_from(&qs_rate);
            }
            Scheme::UnconstrainedOde => {
                deriv.rows_mut(l.q_s, m).copy_from(&qd_s);
                let rhs = &actuation * &tau_s - &s_terms.bias + s_terms.jac.transpose() * &f_a;
                let qdd_s = s_terms
                    .mass
                    .clone()
                    .cholesky()
                    .ok_or(HilError::SingularMatrix {
                        what: "target mass matrix",
                    })?
                    .solve(&rhs);
                deriv.rows_mut(l.aux, l.aux_len).copy_from(&qdd_s);
            }
            Scheme::DirectOracle => unreachable!(),
        }
        if let Some(off) = l.tau {
            let tau_act = y.rows(off, n).into_owned();
            deriv
                .rows_mut(off, n)
                .copy_from(&((&tau_r_cmd - &tau_act) * sc.actuator.bandwidth));
        }

        Ok(Instant {
            deriv,
            q_r,
            qd_r,
            q_s,
            qd_s,
            xi,
            p_r,
            p_s,
            phi,
            f_a: f_a.clone(),
            lambda,
            e_p,
            e_f,
            tau_s,
            tau_r_cmd,
            tau_r,
        })
    }
}

fn record(trace: &mut SimTrace, t: f64, inst: &Instant) {
    trace.time.push(t);
    trace.q_r.push(inst.q_r.clone());
    trace.qd_r.push(inst.qd_r.clone());
    trace.q_s.push(inst.q_s.clone());
    trace.qd_s.push(inst.qd_s.clone());
    trace.xi.push(inst.xi.clone());
    trace.p_r.push(inst.p_r.clone());
    trace.p_s.push(inst.p_s.clone());
    trace.phi.push(inst.phi.clone());
    trace.f.push(inst.f_a.clone());
    trace.f_a.push(inst.f_a.clone());
    trace.lambda.push(inst.lambda.clone());
    trace.e_p.push(inst.e_p.clone());
    trace.e_f.push(inst.e_f.clone());
    trace.tau_s.push(inst.tau_s.clone());
    trace.tau_r_cmd.push(inst.tau_r_cmd.clone());
    trace.tau_r.push(inst.tau_r.clone());
}

fn abort(step: usize, t: f64, err: HilError) -> HilError {
    match err {
        e @ HilError::SimulationAbort { .. } => e,
        e => HilError::SimulationAbort {
            step,
            t,
            reason: e.to_string(),
        },
    }
}

/// Run the scenario's scheme and return the full trace.
pub fn run(scenario: &Scenario) -> Result<SimTrace> {
    scenario.validate()?;
    match scenario.scheme {
        Scheme::DirectOracle => run_direct_oracle(scenario),
        Scheme::ConstrainedDae | Scheme::UnconstrainedOde => run_emulation(scenario),
    }
}

/// Scheme A entry point: constrained-DAE emulation.
pub fn run_scheme_a(scenario: &Scenario) -> Result<SimTrace> {
    let mut sc = scenario.clone();
    sc.scheme = Scheme::ConstrainedDae;
    run(&sc)
}

/// Scheme B entry point: unconstrained-ODE emulation.
pub fn run_scheme_b(scenario: &Scenario) -> Result<SimTrace> {
    let mut sc = scenario.clone();
    sc.scheme = Scheme::UnconstrainedOde;
    run(&sc)
}

fn run_emulation(scenario: &Scenario) -> Result<SimTrace> {
    let n = scenario.rigid.joints();
    let m = scenario.target.coords();
    let lag = scenario.actuator.mode == ActuatorMode::FirstOrderLag;
    let layout = Layout::new(n, m, scenario.scheme, lag);
    let ctx = EmulationContext {
        scenario,
        disturbance: DisturbanceSource::new(
            &scenario.disturbance,
            scenario.seed,
            scenario.duration,
            scenario.step,
        ),
        pose_map: PoseTransform,
        layout,
    };

    let (q_s0, qd_s0, xi0) = scenario.initial_target_state()?;
    let p0 = scenario.rigid.pose(&scenario.initial.q_r);
    let pdot0 = scenario.rigid.jacobian(&scenario.initial.q_r) * &scenario.initial.qd_r;
    let ctrl0 = match &scenario.initial.pose_error_offset {
        Some(off) => ControllerState::with_pose_offset(&p0, &pdot0, off),
        None => ControllerState::consistent(&p0, &pdot0),
    };

    let l = &ctx.layout;
    let mut y = DVector::zeros(l.len);
    y.rows_mut(l.q_r, n).copy_from(&scenario.initial.q_r);
    y.rows_mut(l.qd_r, n).copy_from(&scenario.initial.qd_r);
    y.rows_mut(l.i1, n).copy_from(&ctrl0.accel_integral);
    y.rows_mut(l.i2, n).copy_from(&ctrl0.accel_double_integral);
    y.rows_mut(l.q_s, m).copy_from(&q_s0);
    match scenario.scheme {
        Scheme::ConstrainedDae => y.rows_mut(l.aux, l.aux_len).copy_from(&xi0),
        Scheme::UnconstrainedOde => y.rows_mut(l.aux, l.aux_len).copy_from(&qd_s0),
        Scheme::DirectOracle => unreachable!(),
    }
    if let Some(off) = l.tau {
        // Lag state starts on the initial command so the run begins without a
        // torque step.
        let inst0 = ctx.evaluate(0.0, &y).map_err(|e| abort(0, 0.0, e))?;
        y.rows_mut(off, n).copy_from(&inst0.tau_r_cmd);
    }

    let h = scenario.step;
    let steps = (scenario.duration / h).round() as usize;
    let mut trace = SimTrace::new(h, n, m, true);

    for k in 0..=steps {
        let t = k as f64 * h;
        let inst = ctx.evaluate(t, &y).map_err(|e| abort(k, t, e))?;
        record(&mut trace, t, &inst);
        if inst.f_a.norm() > FORCE_ABORT {
            return Err(HilError::SimulationAbort {
                step: k,
                t,
                reason: format!("contact force diverged (|f_a| = {:.3e})", inst.f_a.norm()),
            });
        }
        if k == steps {
            break;
        }
        let mut f = |tt: f64, yy: &DVector<f64>| ctx.evaluate(tt, yy).map(|i| i.deriv);
        y = rk4_step(&mut f, t, &y, h).map_err(|e| abort(k, t, e))?;

        // Exact-projection mode: pull the dependent coordinates back onto the
        // constraint at the new pose.
        if scenario.scheme == Scheme::ConstrainedDae {
            if let CorrectionMode::NewtonRaphson(nr) = &scenario.correction {
                let q_r_new = y.rows(l.q_r, n).into_owned();
                let p_r_new = scenario.rigid.pose(&q_r_new);
                let q_s_pred = y.rows(l.q_s, m).into_owned();
                let (q_s_corr, _) =
                    newton_raphson_correct(&scenario.target, &p_r_new, &q_s_pred, nr)
                        .map_err(|e| abort(k + 1, t + h, e))?;
                y.rows_mut(l.q_s, m).copy_from(&q_s_corr);
            }
        }
    }
    Ok(trace)
}

/// Direct simulation of the target robot against the environment — the gold
/// standard the emulation is compared to.
pub fn run_direct_oracle(scenario: &Scenario) -> Result<SimTrace> {
    let n = scenario.target.task_dim();
    let m = scenario.target.coords();
    let pose_map = PoseTransform;
    let disturbance_free = scenario.disturbance.is_zero();

    let (q_s0, qd_s0, _) = scenario.initial_target_state()?;
    let mut y = DVector::zeros(2 * m);
    y.rows_mut(0, m).copy_from(&q_s0);
    y.rows_mut(m, m).copy_from(&qd_s0);

    let h = scenario.step;
    let steps = (scenario.duration / h).round() as usize;
    let mut trace = SimTrace::new(h, n, m, false);

    let eval = |t: f64, y: &DVector<f64>| -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let q_s = y.rows(0, m).into_owned();
        let qd_s = y.rows(m, m).into_owned();
        let p_s = scenario.target.pose(&q_s);
        let jac = scenario.target.jacobian(&q_s);
        let pdot_s = &jac * &qd_s;
        let f = match &scenario.environment {
            Some(env) => env.contact_force(&p_s, &pdot_s),
            None => DVector::zeros(n),
        };
        let f_a = pose_map.generalized_force(&f);
        let tau_s = scenario
            .target_controller
            .torque(t, &scenario.target, &q_s, &qd_s, &f_a)?;
        Ok((f_a, tau_s, qd_s))
    };

    for k in 0..=steps {
        let t = k as f64 * h;
        let q_s = y.rows(0, m).into_owned();
        let qd_s = y.rows(m, m).into_owned();
        let (f_a, tau_s, _) = eval(t, &y).map_err(|e| abort(k, t, e))?;
        let basis = structural_nullspace(&scenario.target, &q_s).map_err(|e| abort(k, t, e))?;

        trace.time.push(t);
        trace.q_s.push(q_s.clone());
        trace.qd_s.push(qd_s.clone());
        trace.xi.push(basis.transpose() * &qd_s);
        trace.p_s.push(scenario.target.pose(&q_s));
        trace.f.push(f_a.clone());
        trace.f_a.push(f_a.clone());
        trace.tau_s.push(tau_s.clone());

        if f_a.norm() > FORCE_ABORT {
            return Err(HilError::SimulationAbort {
                step: k,
                t,
                reason: format!("contact force diverged (|f| = {:.3e})", f_a.norm()),
            });
        }
        if k == steps {
            break;
        }
        let mut f = |tt: f64, yy: &DVector<f64>| {
            let q = yy.rows(0, m).into_owned();
            let qd = yy.rows(m, m).into_owned();
            let (f_a, tau_s, _) = eval(tt, yy)?;
            let qdd = crate::dynamics::forward_accel(&scenario.target, &q, &qd, &tau_s, &f_a)?;
            let mut out = DVector::zeros(2 * m);
            out.rows_mut(0, m).copy_from(&qd);
            out.rows_mut(m, m).copy_from(&qdd);
            Ok(out)
        };
        y = rk4_step(&mut f, t, &y, h).map_err(|e| abort(k, t, e))?;
    }
    let _ = disturbance_free; // the oracle has no emulation loop for d to enter
    Ok(trace)
}

/// Sweepable scenario parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Scale factor on the emulating robot's inertia parameters.
    MassScale,
    /// Target the given maximum eigenvalue of the inertia ratio by scaling
    /// the emulating robot's inertia.
    QRatio,
    /// Actuator bandwidth (switches the actuator to lag mode).
    OmegaA,
    /// Controller bandwidth `ω_p = 2 G_p / G_v`, adjusted through `G_p`.
    OmegaP,
    /// Wall stiffness.
    WallStiffness,
    /// Disturbance amplitude applied to every non-zero disturbance axis.
    DisturbanceAmplitude,
}

impl SweepAxis {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "mass_scale" => Ok(SweepAxis::MassScale),
            "q_ratio" => Ok(SweepAxis::QRatio),
            "omega_a" => Ok(SweepAxis::OmegaA),
            "omega_p" => Ok(SweepAxis::OmegaP),
            "k_e" => Ok(SweepAxis::WallStiffness),
            "dist_amp" => Ok(SweepAxis::DisturbanceAmplitude),
            other => Err(HilError::invalid_config(
                "sweep.axis",
                format!(
                    "unknown axis `{other}` (expected one of mass_scale, q_ratio, omega_a, \
                     omega_p, k_e, dist_amp)"
                ),
            )),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::MassScale => "mass_scale",
            SweepAxis::QRatio => "q_ratio",
            SweepAxis::OmegaA => "omega_a",
            SweepAxis::OmegaP => "omega_p",
            SweepAxis::WallStiffness => "k_e",
            SweepAxis::DisturbanceAmplitude => "dist_amp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVerdict {
    Bounded,
    Diverging,
}

impl std::fmt::Display for SweepVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepVerdict::Bounded => write!(f, "bounded"),
            SweepVerdict::Diverging => write!(f, "diverging"),
        }
    }
}

/// One row of a sweep summary.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub verdict: SweepVerdict,
    /// max‖Φ‖ over the final 20 % of the run.
    pub steady_phi: f64,
    /// max‖e_f‖ over the final 20 % of the run.
    pub steady_ef: f64,
    /// Peak transmissivity proxy: max‖f_a‖ / max‖λ‖ over the post-transient
    /// window.
    pub peak_t_proxy: f64,
    /// Static contact-force reference from a direct-oracle run of the same
    /// scenario.
    pub static_force: f64,
}

/// Apply one axis value to a scenario template.
pub fn apply_axis(scenario: &mut Scenario, axis: SweepAxis, value: f64) -> Result<()> {
    match axis {
        SweepAxis::MassScale => {
            if !(value > 0.0) {
                return Err(HilError::invalid_config("sweep.values", "mass scale must be positive"));
            }
            scenario.rigid.scale_mass(value);
        }
        SweepAxis::QRatio => {
            if !(value > 0.0) {
                return Err(HilError::invalid_config("sweep.values", "Q ratio must be positive"));
            }
            let q0 = &scenario.initial.q_r;
            let (q_s0, _, _) = scenario.initial_target_state()?;
            let m_r = crate::constraint::cartesian_inertia(
                &scenario.rigid.mass_matrix(q0),
                &scenario.rigid.jacobian(q0),
            )?;
            let m_s = crate::constraint::cartesian_inertia(
                &scenario.target.mass_matrix(&q_s0),
                &scenario.target.jacobian(&q_s0),
            )?;
            let eigs = crate::constraint::inertia_ratio_eigenvalues(&m_s, &m_r)?;
            let lambda_max = *eigs.last().unwrap();
            scenario.rigid.scale_mass(lambda_max / value);
        }
        SweepAxis::OmegaA => {
            if !(value > 0.0) {
                return Err(HilError::invalid_config("sweep.values", "omega_a must be positive"));
            }
            scenario.actuator = ActuatorSetup::lag(value);
        }
        SweepAxis::OmegaP => {
            if !(value > 0.0) {
                return Err(HilError::invalid_config("sweep.values", "omega_p must be positive"));
            }
            let n = scenario.gains.task_dim();
            let k_v = scenario.gains.g_v[(0, 0)];
            scenario.gains.g_p = DMatrix::identity(n, n) * (value * k_v / 2.0);
        }
        SweepAxis::WallStiffness => {
            match &mut scenario.environment {
                Some(env) => env.stiffness = value,
                None => {
                    return Err(HilError::invalid_config(
                        "sweep.axis",
                        "k_e sweep requires an environment",
                    ))
                }
            }
        }
        SweepAxis::DisturbanceAmplitude => {
            use crate::environment::DisturbanceSignal as Sig;
            let mut any = false;
            for sig in &mut scenario.disturbance.axes {
                match sig {
                    Sig::Zero => {}
                    Sig::Constant { value: v } => {
                        *v = value;
                        any = true;
                    }
                    Sig::Sinusoid { amplitude, .. } | Sig::BandLimitedNoise { amplitude, .. } => {
                        *amplitude = value;
                        any = true;
                    }
                }
            }
            if !any {
                return Err(HilError::invalid_config(
                    "sweep.axis",
                    "dist_amp sweep requires a non-zero disturbance spec",
                ));
            }
        }
    }
    Ok(())
}

fn summarize(scenario: &Scenario, trace: Result<SimTrace>, static_force: f64) -> Result<SweepRow> {
    let threshold = if static_force > 1e-9 {
        100.0 * static_force
    } else {
        f64::INFINITY
    };
    match trace {
        Ok(trace) => {
            let tail = (trace.len() * 4) / 5;
            let mid = trace.len() / 2;
            let peak_force = SimTrace::max_norm(&trace.f_a, 0);
            let verdict = if peak_force > threshold {
                SweepVerdict::Diverging
            } else {
                SweepVerdict::Bounded
            };
            let peak_lambda = SimTrace::max_norm(&trace.lambda, mid);
            SweepRow {
                value: f64::NAN,
                verdict,
                steady_phi: SimTrace::max_norm(&trace.phi, tail),
                steady_ef: SimTrace::max_norm(&trace.e_f, tail),
                peak_t_proxy: if peak_lambda > 0.0 {
                    SimTrace::max_norm(&trace.f_a, mid) / peak_lambda
                } else {
                    f64::NAN
                },
                static_force,
            }
            .pipe_ok()
        }
        // A numerically diverged run is a verdict, not a failure.
        Err(HilError::SimulationAbort { .. }) => SweepRow {
            value: f64::NAN,
            verdict: SweepVerdict::Diverging,
            steady_phi: f64::INFINITY,
            steady_ef: f64::INFINITY,
            peak_t_proxy: f64::INFINITY,
            static_force,
        }
        .pipe_ok(),
        Err(e) => {
            let _ = scenario;
            Err(e)
        }
    }
}

trait PipeOk: Sized {
    fn pipe_ok(self) -> Result<Self> {
        Ok(self)
    }
}
impl PipeOk for SweepRow {}

/// Run the scenario template once per axis value and summarize each run.
/// `jobs > 1` executes runs concurrently; rows come back in input order
/// either way.
pub fn sweep(
    template: &Scenario,
    axis: SweepAxis,
    values: &[f64],
    jobs: usize,
) -> Result<Vec<SweepRow>> {
    let run_one = |value: f64| -> Result<SweepRow> {
        let mut scenario = template.clone();
        apply_axis(&mut scenario, axis, value)?;
        scenario.validate()?;

        // Static force reference: the target robot alone in the same scene.
        let mut oracle = scenario.clone();
        oracle.scheme = Scheme::DirectOracle;
        let oracle_trace = run_direct_oracle(&oracle)?;
        let from = oracle_trace.len() / 2;
        let mut forces: Vec<f64> = oracle_trace.f_a[from..].iter().map(|v| v.norm()).collect();
        forces.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let static_force = if forces.is_empty() {
            0.0
        } else {
            forces[forces.len() / 2]
        };

        let mut row = summarize(&scenario, run(&scenario), static_force)?;
        row.value = value;
        Ok(row)
    };

    let jobs = jobs.max(1).min(values.len().max(1));
    if jobs == 1 {
        values.iter().map(|v| run_one(*v)).collect()
    } else {
        let mut rows: Vec<Option<Result<SweepRow>>> = (0..values.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let chunks: Vec<Vec<usize>> = (0..jobs)
                .map(|w| (w..values.len()).step_by(jobs).collect())
                .collect();
            let mut handles = Vec::new();
            for chunk in chunks {
                let run_one = &run_one;
                handles.push(scope.spawn(move || {
                    chunk
                        .into_iter()
                        .map(|i| (i, run_one(values[i])))
                        .collect::<Vec<_>>()
                }));
            }
            for handle in handles {
                for (i, r) in handle.join().expect("sweep worker panicked") {
                    rows[i] = Some(r);
                }
            }
        });
        rows.into_iter().map(|r| r.unwrap()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::appendix_one_dof_pair;
    use crate::environment::DisturbanceSignal;
    use nalgebra::dvector;

    pub(crate) fn one_dof_scenario() -> Scenario {
        let (rigid, target) = appendix_one_dof_pair();
        Scenario {
            rigid,
            target,
            scheme: Scheme::ConstrainedDae,
            gains: ControllerGains::scalar(1, 10.0, 50.0),
            actuator: ActuatorSetup::ideal(),
            environment: None,
            disturbance: DisturbanceSpec::zero(1),
            target_controller: TargetController::OpenLoop {
                bias: dvector![0.05],
                sinusoid: None,
            },
            correction: CorrectionMode::NewtonRaphson(NewtonRaphsonConfig::default()),
            initial: InitialState::rest(1, 2),
            duration: 0.5,
            step: 1e-4,
            seed: 1,
        }
    }

    #[test]
    fn zero_input_scenario_stays_at_rest() {
        // No target torque, no gravity on the target, consistent rest start:
        // everything stays identically zero except the emulating robot's
        // gravity-compensation torque.
        let mut sc = one_dof_scenario();
        sc.target_controller = TargetController::OpenLoop {
            bias: dvector![0.0],
            sinusoid: None,
        };
        let trace = run(&sc).unwrap();
        assert!(SimTrace::max_norm(&trace.qd_r, 0) < 1e-12);
        assert!(SimTrace::max_norm(&trace.phi, 0) < 1e-12);
        assert!(SimTrace::max_norm(&trace.f_a, 0) == 0.0);
        assert!(SimTrace::max_norm(&trace.e_p, 0) < 1e-12);
        // Gravity compensation holds the arm: τ_r = w cos(q_r) = 0.5.
        assert!((trace.tau_r.last().unwrap()[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn free_space_emulation_tracks_target_motion() {
        let mut sc = one_dof_scenario();
        sc.duration = 1.0;
        let trace = run(&sc).unwrap();
        // The motor torque accelerates the arm; the emulating robot follows.
        assert!(trace.p_r.last().unwrap()[0] > 1e-3);
        assert!(SimTrace::max_norm(&trace.phi, 0) < 1e-8);
    }

    #[test]
    fn determinism_bitwise() {
        let mut sc = one_dof_scenario();
        sc.disturbance = DisturbanceSpec {
            axes: vec![DisturbanceSignal::BandLimitedNoise {
                amplitude: 0.05,
                cutoff: 40.0,
            }],
        };
        let a = run(&sc).unwrap();
        let b = run(&sc).unwrap();
        for k in 0..a.len() {
            assert_eq!(a.q_r[k].as_slice(), b.q_r[k].as_slice());
            assert_eq!(a.f_a[k].as_slice(), b.f_a[k].as_slice());
        }
    }

    #[test]
    fn sweep_axis_parsing() {
        assert!(SweepAxis::parse("q_ratio").is_ok());
        assert!(matches!(
            SweepAxis::parse("bogus"),
            Err(HilError::InvalidConfig { .. })
        ));
    }
}
