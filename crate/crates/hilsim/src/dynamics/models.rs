//! Built-in manipulator models.
//!
//! Three model pairs are provided:
//! * a 1-DOF rigid arm and a 1-DOF flexible-joint arm (the contact case
//!   study's parameter set),
//! * a 2-DOF planar rigid arm and a 2-link flexible-joint target (m = 4,
//!   n = 2), which gives an instance where the inertia ratio is a genuine
//!   matrix.
//!
//! The planar two-link chain uses point masses at the link tips, which keeps
//! every equation-of-motion term in closed form.

use nalgebra::{DMatrix, DVector};

use super::{RigidModel, TargetModel};

/// 1-DOF rigid arm: `m_r q̈ + c_r q̇ + w cos(q) = τ + l f`.
#[derive(Debug, Clone, Copy)]
pub struct OneDofRigidParams {
    /// Collective arm inertia `m_r` (kg·m²).
    pub inertia: f64,
    /// Viscous joint friction `c_r` (N·m·s/rad).
    pub viscous: f64,
    /// Maximum gravity torque `w` (N·m).
    pub gravity_torque: f64,
    /// Arm length `l` (m); the task coordinate is the tip arc `p = l q`.
    pub arm_length: f64,
}

impl OneDofRigidParams {
    /// Case-study parameters: m_r = 0.05 kg·m², c_r = 0.022 N·m·s/rad,
    /// w = 0.5 N·m, l = 0.3 m.
    pub fn case_study() -> Self {
        OneDofRigidParams {
            inertia: 0.05,
            viscous: 0.022,
            gravity_torque: 0.5,
            arm_length: 0.3,
        }
    }
}

/// 1-DOF flexible-joint arm: link inertia driven through a spring-damper by a
/// motor inertia. Gravity-free (a space robot).
#[derive(Debug, Clone, Copy)]
pub struct OneDofFlexibleParams {
    /// Link inertia `m_s1` (kg·m²).
    pub link_inertia: f64,
    /// Drive (motor) inertia `m_s2` (kg·m²).
    pub motor_inertia: f64,
    /// Joint stiffness `k` (N·m/rad).
    pub stiffness: f64,
    /// Joint damping `ζ` (N·m·s/rad).
    pub joint_damping: f64,
    /// Viscous friction at the drive `c_s` (N·m·s/rad).
    pub motor_viscous: f64,
    /// Arm length `l` (m).
    pub arm_length: f64,
}

impl OneDofFlexibleParams {
    /// Case-study parameters: m_s1 = 0.05, m_s2 = 0.1 kg·m², k = 3.0 N·m/rad,
    /// ζ = 0.1 N·m·s/rad, l = 0.3 m. Drive friction is not listed with the
    /// published set and defaults to zero.
    pub fn appendix_e() -> Self {
        OneDofFlexibleParams {
            link_inertia: 0.05,
            motor_inertia: 0.1,
            stiffness: 3.0,
            joint_damping: 0.1,
            motor_viscous: 0.0,
            arm_length: 0.3,
        }
    }
}

/// The 1-DOF emulation pair with the case-study parameters. The two arms have
/// identical tip kinematics (`J_s1 = J_r = l`), so constraining their poses
/// identifies the link angle with the rigid joint angle.
pub fn appendix_one_dof_pair() -> (RigidModel, TargetModel) {
    (
        RigidModel::one_dof(OneDofRigidParams::case_study()),
        TargetModel::one_dof_flexible(OneDofFlexibleParams::appendix_e()),
    )
}

/// Closed-form kinematics and link-side dynamics of a planar two-link chain
/// with point masses `m1`, `m2` at the link tips.
#[derive(Debug, Clone, Copy)]
pub struct PlanarTwoLink {
    pub l1: f64,
    pub l2: f64,
    pub m1: f64,
    pub m2: f64,
}

impl PlanarTwoLink {
    pub fn pose(&self, q: &DVector<f64>) -> DVector<f64> {
        let (c1, s1) = (q[0].cos(), q[0].sin());
        let (c12, s12) = ((q[0] + q[1]).cos(), (q[0] + q[1]).sin());
        DVector::from_vec(vec![
            self.l1 * c1 + self.l2 * c12,
            self.l1 * s1 + self.l2 * s12,
        ])
    }

    pub fn jacobian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let (c1, s1) = (q[0].cos(), q[0].sin());
        let (c12, s12) = ((q[0] + q[1]).cos(), (q[0] + q[1]).sin());
        DMatrix::from_row_slice(
            2,
            2,
            &[
                -self.l1 * s1 - self.l2 * s12,
                -self.l2 * s12,
                self.l1 * c1 + self.l2 * c12,
                self.l2 * c12,
            ],
        )
    }

    pub fn jacobian_dot(&self, q: &DVector<f64>, qd: &DVector<f64>) -> DMatrix<f64> {
        let (c1, s1) = (q[0].cos(), q[0].sin());
        let (c12, s12) = ((q[0] + q[1]).cos(), (q[0] + q[1]).sin());
        let w1 = qd[0];
        let w12 = qd[0] + qd[1];
        DMatrix::from_row_slice(
            2,
            2,
            &[
                -self.l1 * c1 * w1 - self.l2 * c12 * w12,
                -self.l2 * c12 * w12,
                -self.l1 * s1 * w1 - self.l2 * s12 * w12,
                -self.l2 * s12 * w12,
            ],
        )
    }

    pub fn mass_matrix(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let c2 = q[1].cos();
        let a = self.m1 * self.l1 * self.l1
            + self.m2 * (self.l1 * self.l1 + self.l2 * self.l2 + 2.0 * self.l1 * self.l2 * c2);
        let b = self.m2 * (self.l2 * self.l2 + self.l1 * self.l2 * c2);
        let d = self.m2 * self.l2 * self.l2;
        DMatrix::from_row_slice(2, 2, &[a, b, b, d])
    }

    /// Coriolis/centrifugal vector `C(q, q̇) q̇`.
    pub fn coriolis(&self, q: &DVector<f64>, qd: &DVector<f64>) -> DVector<f64> {
        let s2 = q[1].sin();
        let k = self.m2 * self.l1 * self.l2 * s2;
        DVector::from_vec(vec![
            -k * (2.0 * qd[0] * qd[1] + qd[1] * qd[1]),
            k * qd[0] * qd[0],
        ])
    }

    /// Gravity vector for gravity `g` along -y.
    pub fn gravity(&self, q: &DVector<f64>, g: f64) -> DVector<f64> {
        let c1 = q[0].cos();
        let c12 = (q[0] + q[1]).cos();
        DVector::from_vec(vec![
            (self.m1 + self.m2) * g * self.l1 * c1 + self.m2 * g * self.l2 * c12,
            self.m2 * g * self.l2 * c12,
        ])
    }
}

/// 2-DOF planar rigid arm under gravity with viscous joint friction.
#[derive(Debug, Clone, Copy)]
pub struct TwoLinkRigidParams {
    pub kinematics: PlanarTwoLink,
    pub viscous: [f64; 2],
    pub gravity: f64,
}

impl TwoLinkRigidParams {
    pub(super) fn mass_matrix(&self, q: &DVector<f64>) -> DMatrix<f64> {
        self.kinematics.mass_matrix(q)
    }

    pub(super) fn bias(&self, q: &DVector<f64>, qd: &DVector<f64>) -> DVector<f64> {
        self.kinematics.coriolis(q, qd)
            + self.kinematics.gravity(q, self.gravity)
            + DVector::from_vec(vec![self.viscous[0] * qd[0], self.viscous[1] * qd[1]])
    }
}

impl Default for TwoLinkRigidParams {
    fn default() -> Self {
        TwoLinkRigidParams {
            kinematics: PlanarTwoLink {
                l1: 0.4,
                l2: 0.3,
                m1: 0.9,
                m2: 0.6,
            },
            viscous: [0.05, 0.03],
            gravity: 9.81,
        }
    }
}

/// 2-link flexible-joint target: a gravity-free two-link chain whose joints
/// are driven through spring-dampers by motor inertias. Coordinates are
/// `q_s = (θ1, θ2, φ1, φ2)` with θ the link and φ the motor angles.
#[derive(Debug, Clone, Copy)]
pub struct TwoLinkFlexibleParams {
    pub kinematics: PlanarTwoLink,
    /// Motor inertias (kg·m²).
    pub motor_inertia: [f64; 2],
    /// Joint stiffnesses (N·m/rad).
    pub stiffness: [f64; 2],
    /// Joint dampings (N·m·s/rad).
    pub joint_damping: [f64; 2],
    /// Viscous friction at the drives (N·m·s/rad).
    pub motor_viscous: f64,
}

impl Default for TwoLinkFlexibleParams {
    fn default() -> Self {
        TwoLinkFlexibleParams {
            kinematics: PlanarTwoLink {
                l1: 0.4,
                l2: 0.3,
                m1: 0.8,
                m2: 0.5,
            },
            motor_inertia: [0.06, 0.04],
            stiffness: [60.0, 40.0],
            joint_damping: [0.4, 0.3],
            motor_viscous: 0.0,
        }
    }
}

impl TwoLinkFlexibleParams {
    pub(super) fn mass_matrix(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let links = self.kinematics.mass_matrix(&q.rows(0, 2).into_owned());
        let mut m = DMatrix::zeros(4, 4);
        m.view_mut((0, 0), (2, 2)).copy_from(&links);
        m[(2, 2)] = self.motor_inertia[0];
        m[(3, 3)] = self.motor_inertia[1];
        m
    }

    pub(super) fn bias(&self, q: &DVector<f64>, qd: &DVector<f64>) -> DVector<f64> {
        let theta = q.rows(0, 2).into_owned();
        let theta_dot = qd.rows(0, 2).into_owned();
        let cor = self.kinematics.coriolis(&theta, &theta_dot);
        let mut h = DVector::zeros(4);
        for i in 0..2 {
            let spring = self.stiffness[i] * (q[2 + i] - q[i])
                + self.joint_damping[i] * (qd[2 + i] - qd[i]);
            h[i] = cor[i] - spring;
            h[2 + i] = spring + self.motor_viscous * qd[2 + i];
        }
        h
    }
}

/// The 2-link emulation pair: a rigid arm and a flexible-joint target with the
/// same link geometry (so the constrained poses are kinematically compatible)
/// but different inertia distributions.
pub fn planar_two_link_pair() -> (RigidModel, TargetModel) {
    (
        RigidModel::two_link(TwoLinkRigidParams::default()),
        TargetModel::two_link_flexible(TwoLinkFlexibleParams::default()),
    )
}
