//! Scenario configuration: the JSON schema behind the CLI, its validation,
//! and the packaged case-study configurations.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::control::ControllerGains;
use crate::dynamics::{
    OneDofFlexibleParams, OneDofRigidParams, RigidModel, TargetModel, TwoLinkFlexibleParams,
    TwoLinkRigidParams,
};
use crate::environment::{DisturbanceSignal, DisturbanceSpec, Environment};
use crate::error::{HilError, Result};
use crate::ik::{ClikConfig, ClikUpdate, NewtonRaphsonConfig};
use crate::sim::{ActuatorSetup, CorrectionMode, InitialState, Scenario, Scheme};
use crate::target_ctrl::{TargetController, TorqueSinusoid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelId {
    /// 1-DOF rigid arm emulating a 1-DOF flexible-joint arm.
    #[serde(rename = "appendix-1dof")]
    Appendix1Dof,
    /// 2-DOF planar rigid arm emulating a 2-link flexible-joint target.
    #[serde(rename = "planar-2link")]
    Planar2Link,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelsConfig {
    pub id: ModelId,
    /// Parameter overrides by name; unknown names are rejected.
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct GainsConfig {
    #[serde(rename = "G_v")]
    pub g_v: f64,
    #[serde(rename = "G_p")]
    pub g_p: f64,
    #[serde(rename = "G_f", default)]
    pub g_f: f64,
    /// Configured bound on `λ_max(Ṁ_s)` for the force-feedback gain check;
    /// zero means the Cartesian inertia is treated as constant.
    #[serde(default)]
    pub m_s_rate_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActuatorModeConfig {
    Ideal,
    Lag,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ActuatorConfig {
    pub mode: ActuatorModeConfig,
    #[serde(default = "default_omega_a")]
    pub omega_a: f64,
}

fn default_omega_a() -> f64 {
    25.0
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EnvironmentConfig {
    pub enabled: bool,
    #[serde(default)]
    pub wall: Vec<f64>,
    #[serde(default = "default_k_e")]
    pub k_e: f64,
    #[serde(default = "default_b_e")]
    pub b_e: f64,
    #[serde(default)]
    pub active: Vec<bool>,
}

fn default_k_e() -> f64 {
    1e4
}

fn default_b_e() -> f64 {
    20.0
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DisturbanceAxisConfig {
    Zero,
    Constant { value: f64 },
    Sinusoid { amplitude: f64, omega: f64, #[serde(default)] phase: f64 },
    Noise { amplitude: f64, cutoff: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DisturbanceConfig {
    pub axes: Vec<DisturbanceAxisConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum TargetControllerConfig {
    OpenLoop {
        bias: Vec<f64>,
        #[serde(default)]
        sin_amplitude: Option<Vec<f64>>,
        #[serde(default)]
        sin_omega: f64,
        #[serde(default)]
        sin_phase: f64,
    },
    ResolvedRate {
        setpoint: Vec<f64>,
        rate_gain: f64,
        max_speed: f64,
        velocity_gain: f64,
        #[serde(default)]
        force_gain: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionModeConfig {
    Clik,
    Newton,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CorrectionConfig {
    pub mode: CorrectionModeConfig,
    #[serde(default = "default_clik_gain")]
    pub clik_gain: f64,
    #[serde(default = "default_clik_update")]
    pub clik_update: ClikUpdateConfig,
    #[serde(default = "default_nr_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_nr_iterations")]
    pub max_iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClikUpdateConfig {
    Transpose,
    Pseudoinverse,
}

fn default_clik_gain() -> f64 {
    100.0
}

fn default_clik_update() -> ClikUpdateConfig {
    ClikUpdateConfig::Transpose
}

fn default_nr_tolerance() -> f64 {
    1e-10
}

fn default_nr_iterations() -> usize {
    25
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InitialConfig {
    pub q_r: Vec<f64>,
    pub qd_r: Vec<f64>,
    #[serde(default)]
    pub motor_offset: Vec<f64>,
    #[serde(default)]
    pub xi: Option<Vec<f64>>,
    #[serde(default)]
    pub pose_error_offset: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchemeConfig {
    #[serde(rename = "A")]
    A,
    #[serde(rename = "B")]
    B,
    #[serde(rename = "oracle")]
    Oracle,
}

/// The full scenario configuration; exactly what the JSON config files hold.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScenarioConfig {
    pub models: ModelsConfig,
    pub scheme: SchemeConfig,
    pub gains: GainsConfig,
    pub actuator: ActuatorConfig,
    pub environment: EnvironmentConfig,
    pub disturbance: DisturbanceConfig,
    pub target_controller: TargetControllerConfig,
    pub correction: CorrectionConfig,
    pub initial: InitialConfig,
    pub duration: f64,
    pub step: f64,
    pub seed: u64,
    pub output: String,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| HilError::invalid_config("<config>", format!("JSON parse error: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    /// SHA-256 of the canonical serialized config, for reproducibility
    /// headers.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_string(self).expect("config serialization cannot fail");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }

    /// Validation warnings that do not block a run.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.gains.g_v * self.gains.g_v < 2.0 * self.gains.g_p {
            out.push(format!(
                "gains: G_v^2 = {:.4} < 2 G_p = {:.4}; the admittance peaks above 1 and the \
                 disturbance-sensitivity bound |Z|_inf = 1 does not hold",
                self.gains.g_v * self.gains.g_v,
                2.0 * self.gains.g_p
            ));
        }
        out
    }

    fn build_models(&self) -> Result<(RigidModel, TargetModel)> {
        let check_positive = |key: &str, v: f64| -> Result<f64> {
            if v > 0.0 {
                Ok(v)
            } else {
                Err(HilError::invalid_config(
                    format!("models.params.{key}"),
                    "must be positive",
                ))
            }
        };
        match self.models.id {
            ModelId::Appendix1Dof => {
                let mut rigid = OneDofRigidParams::case_study();
                let mut flex = OneDofFlexibleParams::appendix_e();
                for (key, value) in &self.models.params {
                    let v = *value;
                    match key.as_str() {
                        "m_r" => rigid.inertia = check_positive(key, v)?,
                        "c_r" => rigid.viscous = v,
                        "w" => rigid.gravity_torque = v,
                        "l" => {
                            rigid.arm_length = check_positive(key, v)?;
                            flex.arm_length = rigid.arm_length;
                        }
                        "m_s1" => flex.link_inertia = check_positive(key, v)?,
                        "m_s2" => flex.motor_inertia = check_positive(key, v)?,
                        "k" => flex.stiffness = check_positive(key, v)?,
                        "zeta" => flex.joint_damping = v,
                        "c_s" => flex.motor_viscous = v,
                        other => {
                            return Err(HilError::invalid_config(
                                format!("models.params.{other}"),
                                "unknown parameter for appendix-1dof",
                            ))
                        }
                    }
                }
                Ok((
                    RigidModel::one_dof(rigid),
                    TargetModel::one_dof_flexible(flex),
                ))
            }
            ModelId::Planar2Link => {
                let mut rigid = TwoLinkRigidParams::default();
                let mut flex = TwoLinkFlexibleParams::default();
                for (key, value) in &self.models.params {
                    let v = *value;
                    match key.as_str() {
                        "l1" => {
                            rigid.kinematics.l1 = check_positive(key, v)?;
                            flex.kinematics.l1 = rigid.kinematics.l1;
                        }
                        "l2" => {
                            rigid.kinematics.l2 = check_positive(key, v)?;
                            flex.kinematics.l2 = rigid.kinematics.l2;
                        }
                        "m1" => rigid.kinematics.m1 = check_positive(key, v)?,
                        "m2" => rigid.kinematics.m2 = check_positive(key, v)?,
                        "c1" => rigid.viscous[0] = v,
                        "c2" => rigid.viscous[1] = v,
                        "g" => rigid.gravity = v,
                        "tm1" => flex.kinematics.m1 = check_positive(key, v)?,
                        "tm2" => flex.kinematics.m2 = check_positive(key, v)?,
                        "b1" => flex.motor_inertia[0] = check_positive(key, v)?,
                        "b2" => flex.motor_inertia[1] = check_positive(key, v)?,
                        "k1" => flex.stiffness[0] = check_positive(key, v)?,
                        "k2" => flex.stiffness[1] = check_positive(key, v)?,
                        "zeta1" => flex.joint_damping[0] = v,
                        "zeta2" => flex.joint_damping[1] = v,
                        "c_s" => flex.motor_viscous = v,
                        other => {
                            return Err(HilError::invalid_config(
                                format!("models.params.{other}"),
                                "unknown parameter for planar-2link",
                            ))
                        }
                    }
                }
                Ok((
                    RigidModel::two_link(rigid),
                    TargetModel::two_link_flexible(flex),
                ))
            }
        }
    }

    /// Validate and build the runnable scenario.
    pub fn build(&self) -> Result<Scenario> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(HilError::invalid_config("step", "must be positive and finite"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(HilError::invalid_config("duration", "must be positive and finite"));
        }
        if !(self.gains.g_p > 0.0) {
            return Err(HilError::invalid_config("gains.G_p", "must be positive"));
        }
        if !(self.gains.g_v > 0.0) {
            return Err(HilError::invalid_config("gains.G_v", "must be positive"));
        }
        if self.gains.g_f < 0.0 {
            return Err(HilError::invalid_config("gains.G_f", "must be non-negative"));
        }
        if self.actuator.mode == ActuatorModeConfig::Lag && !(self.actuator.omega_a > 0.0) {
            return Err(HilError::invalid_config("actuator.omega_a", "must be positive"));
        }

        let (rigid, target) = self.build_models()?;
        let n = rigid.joints();
        let m = target.coords();

        let gains = ControllerGains::scalar(n, self.gains.g_v, self.gains.g_p)
            .with_force_gain(self.gains.g_f);
        gains.validate(self.gains.m_s_rate_bound)?;

        let environment = if self.environment.enabled {
            if self.environment.wall.len() != n {
                return Err(HilError::invalid_config(
                    "environment.wall",
                    format!("must have {n} entries"),
                ));
            }
            if self.environment.active.len() != n {
                return Err(HilError::invalid_config(
                    "environment.active",
                    format!("must have {n} entries"),
                ));
            }
            let env = Environment {
                wall: DVector::from_vec(self.environment.wall.clone()),
                stiffness: self.environment.k_e,
                damping: self.environment.b_e,
                active: self.environment.active.clone(),
            };
            env.validate()?;
            Some(env)
        } else {
            None
        };

        if self.disturbance.axes.len() != n {
            return Err(HilError::invalid_config(
                "disturbance.axes",
                format!("must have {n} entries"),
            ));
        }
        let disturbance = DisturbanceSpec {
            axes: self
                .disturbance
                .axes
                .iter()
                .map(|a| match a {
                    DisturbanceAxisConfig::Zero => DisturbanceSignal::Zero,
                    DisturbanceAxisConfig::Constant { value } => {
                        DisturbanceSignal::Constant { value: *value }
                    }
                    DisturbanceAxisConfig::Sinusoid {
                        amplitude,
                        omega,
                        phase,
                    } => DisturbanceSignal::Sinusoid {
                        amplitude: *amplitude,
                        omega: *omega,
                        phase: *phase,
                    },
                    DisturbanceAxisConfig::Noise { amplitude, cutoff } => {
                        DisturbanceSignal::BandLimitedNoise {
                            amplitude: *amplitude,
                            cutoff: *cutoff,
                        }
                    }
                })
                .collect(),
        };

        let target_controller = match &self.target_controller {
            TargetControllerConfig::OpenLoop {
                bias,
                sin_amplitude,
                sin_omega,
                sin_phase,
            } => {
                if bias.len() != n {
                    return Err(HilError::invalid_config(
                        "target_controller.bias",
                        format!("must have {n} entries"),
                    ));
                }
                TargetController::OpenLoop {
                    bias: DVector::from_vec(bias.clone()),
                    sinusoid: sin_amplitude.as_ref().map(|amp| TorqueSinusoid {
                        amplitude: DVector::from_vec(amp.clone()),
                        omega: *sin_omega,
                        phase: *sin_phase,
                    }),
                }
            }
            TargetControllerConfig::ResolvedRate {
                setpoint,
                rate_gain,
                max_speed,
                velocity_gain,
                force_gain,
            } => {
                if setpoint.len() != n {
                    return Err(HilError::invalid_config(
                        "target_controller.setpoint",
                        format!("must have {n} entries"),
                    ));
                }
                if !(*max_speed > 0.0) {
                    return Err(HilError::invalid_config(
                        "target_controller.max_speed",
                        "must be positive",
                    ));
                }
                TargetController::ResolvedRate {
                    setpoint: DVector::from_vec(setpoint.clone()),
                    rate_gain: *rate_gain,
                    max_speed: *max_speed,
                    velocity_gain: *velocity_gain,
                    force_gain: *force_gain,
                }
            }
        };

        let correction = match self.correction.mode {
            CorrectionModeConfig::Clik => {
                if !(self.correction.clik_gain > 0.0) {
                    return Err(HilError::invalid_config(
                        "correction.clik_gain",
                        "must be positive",
                    ));
                }
                let mut cfg = ClikConfig::scalar(n, self.correction.clik_gain);
                cfg.update = match self.correction.clik_update {
                    ClikUpdateConfig::Transpose => ClikUpdate::JacobianTranspose,
                    ClikUpdateConfig::Pseudoinverse => ClikUpdate::Pseudoinverse,
                };
                CorrectionMode::Clik(cfg)
            }
            CorrectionModeConfig::Newton => {
                let cfg = NewtonRaphsonConfig {
                    tolerance: self.correction.tolerance,
                    max_iterations: self.correction.max_iterations,
                };
                cfg.validate()?;
                CorrectionMode::NewtonRaphson(cfg)
            }
        };

        if self.initial.q_r.len() != n || self.initial.qd_r.len() != n {
            return Err(HilError::invalid_config(
                "initial.q_r",
                format!("q_r and qd_r must have {n} entries"),
            ));
        }
        if !self.initial.motor_offset.is_empty() && self.initial.motor_offset.len() != m - n {
            return Err(HilError::invalid_config(
                "initial.motor_offset",
                format!("must have {} entries", m - n),
            ));
        }
        let initial = InitialState {
            q_r: DVector::from_vec(self.initial.q_r.clone()),
            qd_r: DVector::from_vec(self.initial.qd_r.clone()),
            motor_offset: if self.initial.motor_offset.is_empty() {
                DVector::zeros(m - n)
            } else {
                DVector::from_vec(self.initial.motor_offset.clone())
            },
            xi: self.initial.xi.as_ref().map(|v| DVector::from_vec(v.clone())),
            pose_error_offset: self
                .initial
                .pose_error_offset
                .as_ref()
                .map(|v| DVector::from_vec(v.clone())),
        };

        let scenario = Scenario {
            rigid,
            target,
            scheme: match self.scheme {
                SchemeConfig::A => Scheme::ConstrainedDae,
                SchemeConfig::B => Scheme::UnconstrainedOde,
                SchemeConfig::Oracle => Scheme::DirectOracle,
            },
            gains,
            actuator: match self.actuator.mode {
                ActuatorModeConfig::Ideal => ActuatorSetup::ideal(),
                ActuatorModeConfig::Lag => ActuatorSetup::lag(self.actuator.omega_a),
            },
            environment,
            disturbance,
            target_controller,
            correction,
            initial,
            duration: self.duration,
            step: self.step,
            seed: self.seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Eigenvalues of the inertia ratio at the initial configuration, used as
    /// the default analysis set.
    pub fn initial_q_eigenvalues(&self) -> Result<Vec<f64>> {
        let scenario = self.build()?;
        let q_r = &scenario.initial.q_r;
        let m_r = crate::constraint::cartesian_inertia(
            &scenario.rigid.mass_matrix(q_r),
            &scenario.rigid.jacobian(q_r),
        )?;
        let split = scenario.target.flexible_split().unwrap_or(0);
        let mut q_s = DVector::zeros(scenario.target.coords());
        for i in 0..scenario.rigid.joints().min(split.max(1)) {
            q_s[i] = q_r[i];
        }
        let m_s = crate::constraint::cartesian_inertia(
            &scenario.target.mass_matrix(&q_s),
            &scenario.target.jacobian(&q_s),
        )?;
        crate::constraint::inertia_ratio_eigenvalues(&m_s, &m_r)
    }

    /// Inertia-ratio matrix at the initial configuration.
    pub fn initial_q_ratio(&self) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let scenario = self.build()?;
        let q_r = &scenario.initial.q_r;
        let m_r = crate::constraint::cartesian_inertia(
            &scenario.rigid.mass_matrix(q_r),
            &scenario.rigid.jacobian(q_r),
        )?;
        let split = scenario.target.flexible_split().unwrap_or(0);
        let mut q_s = DVector::zeros(scenario.target.coords());
        for i in 0..scenario.rigid.joints().min(split.max(1)) {
            q_s[i] = q_r[i];
        }
        let m_s = crate::constraint::cartesian_inertia(
            &scenario.target.mass_matrix(&q_s),
            &scenario.target.jacobian(&q_s),
        )?;
        let q = crate::constraint::inertia_ratio(&m_s, &m_r)?;
        Ok((q, m_r))
    }
}

/// The packaged case-study configurations (free-space tracking, contact
/// press, disturbance study, stability sweep), all built on the 1-DOF
/// flexible-joint parameter set.
pub fn casestudy_configs() -> Vec<(&'static str, ScenarioConfig)> {
    let base = ScenarioConfig {
        models: ModelsConfig {
            id: ModelId::Appendix1Dof,
            params: BTreeMap::new(),
        },
        scheme: SchemeConfig::A,
        gains: GainsConfig {
            g_v: 10.0,
            g_p: 50.0,
            g_f: 0.0,
            m_s_rate_bound: 0.0,
        },
        actuator: ActuatorConfig {
            mode: ActuatorModeConfig::Ideal,
            omega_a: 25.0,
        },
        environment: EnvironmentConfig {
            enabled: false,
            wall: vec![0.03],
            k_e: 1e4,
            b_e: 20.0,
            active: vec![true],
        },
        disturbance: DisturbanceConfig {
            axes: vec![DisturbanceAxisConfig::Zero],
        },
        target_controller: TargetControllerConfig::OpenLoop {
            bias: vec![0.05],
            sin_amplitude: Some(vec![0.15]),
            sin_omega: 3.0,
            sin_phase: 0.0,
        },
        correction: CorrectionConfig {
            mode: CorrectionModeConfig::Newton,
            clik_gain: 100.0,
            clik_update: ClikUpdateConfig::Transpose,
            tolerance: 1e-10,
            max_iterations: 25,
        },
        initial: InitialConfig {
            q_r: vec![0.0],
            qd_r: vec![0.0],
            motor_offset: vec![0.0],
            xi: None,
            pose_error_offset: None,
        },
        duration: 5.0,
        step: 1e-4,
        seed: 42,
        output: "casestudy_free_space.csv".to_string(),
    };

    let free_space = base.clone();

    // Contact press: approach a wall 0.1 rad ahead and settle at 1 N.
    let mut contact = base.clone();
    contact.environment.enabled = true;
    contact.environment.wall = vec![0.03];
    contact.target_controller = TargetControllerConfig::OpenLoop {
        bias: vec![0.3],
        sin_amplitude: None,
        sin_omega: 0.0,
        sin_phase: 0.0,
    };
    contact.output = "casestudy_1dof.csv".to_string();

    // Disturbance study: pressed equilibrium start, sinusoidal force-channel
    // disturbance at 3 ω_p.
    let mut disturbance = contact.clone();
    disturbance.environment.wall = vec![-1e-4];
    disturbance.initial.motor_offset = vec![0.1];
    disturbance.disturbance.axes = vec![DisturbanceAxisConfig::Sinusoid {
        amplitude: 0.05,
        omega: 30.0,
        phase: 0.0,
    }];
    disturbance.output = "casestudy_disturbance.csv".to_string();

    // Stability sweep base: pressed equilibrium with an initial penetration
    // kick, lag actuator at ω_a = 25; sweep the inertia ratio with
    // `--axis q_ratio`.
    let mut sweep = contact.clone();
    sweep.actuator.mode = ActuatorModeConfig::Lag;
    sweep.actuator.omega_a = 25.0;
    sweep.environment.wall = vec![-1e-4];
    sweep.initial.motor_offset = vec![0.1];
    sweep.initial.q_r = vec![0.01];
    sweep.output = "casestudy_sweep.csv".to_string();

    vec![
        ("casestudy_free_space.json", free_space),
        ("casestudy_1dof.json", contact),
        ("casestudy_disturbance.json", disturbance),
        ("casestudy_sweep.json", sweep),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn casestudy_configs_validate_cleanly() {
        for (name, cfg) in casestudy_configs() {
            cfg.build().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(cfg.warnings().is_empty(), "{name} warned unexpectedly");
        }
    }

    #[test]
    fn json_round_trip_is_identity() {
        for (_, cfg) in casestudy_configs() {
            let text = cfg.to_json();
            let back = ScenarioConfig::from_json(&text).unwrap();
            assert_eq!(cfg, back);
            assert_eq!(cfg.content_hash(), back.content_hash());
        }
    }

    #[test]
    fn invalid_gain_names_the_field() {
        let mut cfg = casestudy_configs()[0].1.clone();
        cfg.gains.g_p = -3.0;
        match cfg.build().unwrap_err() {
            HilError::InvalidConfig { field, .. } => assert_eq!(field, "gains.G_p"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn unknown_model_param_names_the_field() {
        let mut cfg = casestudy_configs()[0].1.clone();
        cfg.models.params.insert("bogus".into(), 1.0);
        match cfg.build().unwrap_err() {
            HilError::InvalidConfig { field, .. } => assert_eq!(field, "models.params.bogus"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn force_gain_bound_is_enforced() {
        let mut cfg = casestudy_configs()[0].1.clone();
        cfg.gains.g_f = 5.0;
        cfg.gains.m_s_rate_bound = 8.0; // bound = 2·10/8 = 2.5
        match cfg.build().unwrap_err() {
            HilError::InvalidConfig { field, .. } => assert_eq!(field, "gains.G_f"),
            other => panic!("unexpected error {other:?}"),
        }
        // Constant 𝓜_s: any non-negative gain passes.
        cfg.gains.m_s_rate_bound = 0.0;
        cfg.build().unwrap();
    }

    #[test]
    fn underdamped_gains_warn() {
        let mut cfg = casestudy_configs()[0].1.clone();
        cfg.gains.g_v = 5.0;
        assert_eq!(cfg.warnings().len(), 1);
    }

    #[test]
    fn one_dof_initial_ratio_is_one() {
        let cfg = casestudy_configs()[0].1.clone();
        let eigs = cfg.initial_q_eigenvalues().unwrap();
        assert_eq!(eigs.len(), 1);
        assert!((eigs[0] - 1.0).abs() < 1e-12);
    }
}
