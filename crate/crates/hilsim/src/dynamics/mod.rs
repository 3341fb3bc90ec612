//! Manipulator models and equation-of-motion terms.
//!
//! Every model is stored in one canonical form,
//!
//! ```text
//!   M(q) q̈ = -h(q, q̇) + B τ + Jᵀ f_a,
//! ```
//!
//! where `h` collects Coriolis/centrifugal, viscous friction, gravity (for the
//! terrestrial emulating robot) and joint stiffness (for the flexible target).
//! Models written in the literature with the bias on the right-hand side are
//! converted at construction; keeping one convention eliminates a classic
//! family of sign bugs.
//!
//! The artifact's scope is planar: the end-effector pose `p` is a vector of
//! positions plus at most one orientation angle, so the orientation-rate
//! transform is the identity and the generalized constraint force equals the
//! contact force (see [`PoseTransform`]).

mod models;

pub use models::{
    planar_two_link_pair, OneDofFlexibleParams, OneDofRigidParams, TwoLinkFlexibleParams,
    TwoLinkRigidParams,
};
pub use models::appendix_one_dof_pair;

use nalgebra::{DMatrix, DVector};

use crate::error::{HilError, Result};

/// All equation-of-motion terms of a model, evaluated at one state.
#[derive(Debug, Clone)]
pub struct DynTerms {
    /// Inertia matrix `M(q)`, symmetric positive-definite.
    pub mass: DMatrix<f64>,
    /// Bias vector `h(q, q̇)` in the canonical (left-hand-side) convention.
    pub bias: DVector<f64>,
    /// Analytical Jacobian `J(q)` of the end-effector pose.
    pub jac: DMatrix<f64>,
    /// Time derivative `J̇(q, q̇)`.
    pub jac_dot: DMatrix<f64>,
    /// End-effector pose `p(q)`.
    pub pose: DVector<f64>,
}

/// Rigid emulating-robot model: `n` joints, square invertible Jacobian.
#[derive(Debug, Clone)]
pub struct RigidModel {
    kind: RigidKind,
}

#[derive(Debug, Clone)]
enum RigidKind {
    OneDof(OneDofRigidParams),
    TwoLink(TwoLinkRigidParams),
}

impl RigidModel {
    pub fn one_dof(params: OneDofRigidParams) -> Self {
        RigidModel {
            kind: RigidKind::OneDof(params),
        }
    }

    pub fn two_link(params: TwoLinkRigidParams) -> Self {
        RigidModel {
            kind: RigidKind::TwoLink(params),
        }
    }

    /// Joint count `n` (equals the task-space dimension).
    pub fn joints(&self) -> usize {
        match &self.kind {
            RigidKind::OneDof(_) => 1,
            RigidKind::TwoLink(_) => 2,
        }
    }

    /// Scale the inertia parameters by `factor`, leaving kinematics untouched.
    /// This changes the Cartesian inertia ratio of an emulation pair, which is
    /// the knob the stability studies sweep.
    pub fn scale_mass(&mut self, factor: f64) {
        match &mut self.kind {
            RigidKind::OneDof(p) => p.inertia *= factor,
            RigidKind::TwoLink(p) => {
                p.kinematics.m1 *= factor;
                p.kinematics.m2 *= factor;
            }
        }
    }

    pub fn mass_matrix(&self, q: &DVector<f64>) -> DMatrix<f64> {
        match &self.kind {
            RigidKind::OneDof(p) => DMatrix::from_element(1, 1, p.inertia),
            RigidKind::TwoLink(p) => p.mass_matrix(q),
        }
    }

    pub fn bias(&self, q: &DVector<f64>, qd: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            RigidKind::OneDof(p) => {
                DVector::from_element(1, p.viscous * qd[0] + p.gravity_torque * q[0].cos())
            }
            RigidKind::TwoLink(p) => p.bias(q, qd),
        }
    }

    pub fn pose(&self, q: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            RigidKind::OneDof(p) => DVector::from_element(1, p.arm_length * q[0]),
            RigidKind::TwoLink(p) => p.kinematics.pose(q),
        }
    }

    pub fn jacobian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        match &self.kind {
            RigidKind::OneDof(p) => DMatrix::from_element(1, 1, p.arm_length),
            RigidKind::TwoLink(p) => p.kinematics.jacobian(q),
        }
    }

    pub fn jacobian_dot(&self, q: &DVector<f64>, qd: &DVector<f64>) -> DMatrix<f64> {
        match &self.kind {
            RigidKind::OneDof(_) => DMatrix::zeros(1, 1),
            RigidKind::TwoLink(p) => p.kinematics.jacobian_dot(q, qd),
        }
    }
}

/// Target-robot model with `m >= n` generalized coordinates.
///
/// For flexible-joint manipulators the coordinates split as
/// `q_s = (q_s1, q_s2)` into link and motor angles; only the link angles move
/// the end-effector, so the Jacobian has the structure `J_s = [J_s1  0]` and
/// the motor block is an explicit, constant null-space of the constraint.
#[derive(Debug, Clone)]
pub struct TargetModel {
    kind: TargetKind,
}

#[derive(Debug, Clone)]
enum TargetKind {
    OneDofFlexible(OneDofFlexibleParams),
    TwoLinkFlexible(TwoLinkFlexibleParams),
}

impl TargetModel {
    pub fn one_dof_flexible(params: OneDofFlexibleParams) -> Self {
        TargetModel {
            kind: TargetKind::OneDofFlexible(params),
        }
    }

    pub fn two_link_flexible(params: TwoLinkFlexibleParams) -> Self {
        TargetModel {
            kind: TargetKind::TwoLinkFlexible(params),
        }
    }

    /// Generalized-coordinate count `m`.
    pub fn coords(&self) -> usize {
        match &self.kind {
            TargetKind::OneDofFlexible(_) => 2,
            TargetKind::TwoLinkFlexible(_) => 4,
        }
    }

    /// Task-space dimension `n`.
    pub fn task_dim(&self) -> usize {
        match &self.kind {
            TargetKind::OneDofFlexible(_) => 1,
            TargetKind::TwoLinkFlexible(_) => 2,
        }
    }

    /// For flexible-joint models, the number of link coordinates (the leading
    /// block of `q_s`); the remaining coordinates are motor angles.
    pub fn flexible_split(&self) -> Option<usize> {
        match &self.kind {
            TargetKind::OneDofFlexible(_) => Some(1),
            TargetKind::TwoLinkFlexible(_) => Some(2),
        }
    }

    /// Actuation map `B` (m×n selection matrix, one unit entry per column).
    /// Flexible-joint robots are actuated on the motor side.
    pub fn actuation(&self) -> DMatrix<f64> {
        let (m, n) = (self.coords(), self.task_dim());
        let mut b = DMatrix::zeros(m, n);
        let split = self.flexible_split().unwrap_or(0);
        for j in 0..n {
            b[(split + j, j)] = 1.0;
        }
        b
    }

    pub fn mass_matrix(&self, q: &DVector<f64>) -> DMatrix<f64> {
        match &self.kind {
            TargetKind::OneDofFlexible(p) => {
                DMatrix::from_diagonal(&DVector::from_vec(vec![p.link_inertia, p.motor_inertia]))
            }
            TargetKind::TwoLinkFlexible(p) => p.mass_matrix(q),
        }
    }

    pub fn bias(&self, q: &DVector<f64>, qd: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            TargetKind::OneDofFlexible(p) => {
                // Spring torque on the link side appears with opposite sign on
                // the motor side; c_s is viscous friction at the drive.
                let spring = p.stiffness * (q[1] - q[0]) + p.joint_damping * (qd[1] - qd[0]);
                DVector::from_vec(vec![-spring, spring + p.motor_viscous * qd[1]])
            }
            TargetKind::TwoLinkFlexible(p) => p.bias(q, qd),
        }
    }

    pub fn pose(&self, q: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            TargetKind::OneDofFlexible(p) => DVector::from_element(1, p.arm_length * q[0]),
            TargetKind::TwoLinkFlexible(p) => p.kinematics.pose(&q.rows(0, 2).into_owned()),
        }
    }

    pub fn jacobian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let (m, n) = (self.coords(), self.task_dim());
        let mut j = DMatrix::zeros(n, m);
        match &self.kind {
            TargetKind::OneDofFlexible(p) => j[(0, 0)] = p.arm_length,
            TargetKind::TwoLinkFlexible(p) => {
                let jl = p.kinematics.jacobian(&q.rows(0, 2).into_owned());
                j.view_mut((0, 0), (2, 2)).copy_from(&jl);
            }
        }
        j
    }

    pub fn jacobian_dot(&self, q: &DVector<f64>, qd: &DVector<f64>) -> DMatrix<f64> {
        let (m, n) = (self.coords(), self.task_dim());
        let mut jd = DMatrix::zeros(n, m);
        match &self.kind {
            TargetKind::OneDofFlexible(_) => {}
            TargetKind::TwoLinkFlexible(p) => {
                let jl = p.kinematics.jacobian_dot(
                    &q.rows(0, 2).into_owned(),
                    &qd.rows(0, 2).into_owned(),
                );
                jd.view_mut((0, 0), (2, 2)).copy_from(&jl);
            }
        }
        jd
    }

    /// Total mechanical energy for conservative configurations (used by the
    /// energy-drift checks; friction and external forces excluded).
    pub fn energy(&self, q: &DVector<f64>, qd: &DVector<f64>) -> f64 {
        let kinetic = 0.5 * (qd.transpose() * self.mass_matrix(q) * qd)[(0, 0)];
        let potential = match &self.kind {
            TargetKind::OneDofFlexible(p) => 0.5 * p.stiffness * (q[1] - q[0]).powi(2),
            TargetKind::TwoLinkFlexible(p) => {
                0.5 * p.stiffness[0] * (q[2] - q[0]).powi(2)
                    + 0.5 * p.stiffness[1] * (q[3] - q[1]).powi(2)
            }
        };
        kinetic + potential
    }
}

fn check_state(context: &'static str, dim: usize, q: &DVector<f64>, qd: &DVector<f64>) -> Result<()> {
    if q.len() != dim {
        return Err(HilError::DimensionMismatch {
            context,
            expected: dim,
            actual: q.len(),
        });
    }
    if qd.len() != dim {
        return Err(HilError::DimensionMismatch {
            context,
            expected: dim,
            actual: qd.len(),
        });
    }
    if !(q.iter().all(|x| x.is_finite()) && qd.iter().all(|x| x.is_finite())) {
        return Err(HilError::NonFinite(context.to_string()));
    }
    Ok(())
}

/// Evaluate all equation-of-motion terms of the rigid model at `(q, q̇)`.
pub fn eval_rigid(model: &RigidModel, q: &DVector<f64>, qd: &DVector<f64>) -> Result<DynTerms> {
    check_state("eval_rigid", model.joints(), q, qd)?;
    let mass = model.mass_matrix(q);
    if mass.clone().cholesky().is_none() {
        return Err(HilError::SingularMatrix { what: "rigid mass matrix" });
    }
    Ok(DynTerms {
        mass,
        bias: model.bias(q, qd),
        jac: model.jacobian(q),
        jac_dot: model.jacobian_dot(q, qd),
        pose: model.pose(q),
    })
}

/// Evaluate all equation-of-motion terms of the target model at `(q_s, q̇_s)`.
pub fn eval_target(model: &TargetModel, q: &DVector<f64>, qd: &DVector<f64>) -> Result<DynTerms> {
    check_state("eval_target", model.coords(), q, qd)?;
    let mass = model.mass_matrix(q);
    if mass.clone().cholesky().is_none() {
        return Err(HilError::SingularMatrix { what: "target mass matrix" });
    }
    Ok(DynTerms {
        mass,
        bias: model.bias(q, qd),
        jac: model.jacobian(q),
        jac_dot: model.jacobian_dot(q, qd),
        pose: model.pose(q),
    })
}

/// Unconstrained target acceleration `q̈_s = M_s⁻¹ (B τ_s - h_s + J_sᵀ f_a)`.
///
/// This is the simulator core of the unconstrained (ODE) emulation scheme,
/// with `f_a` the measured constraint force expressed in the base frame.
pub fn forward_accel(
    model: &TargetModel,
    q: &DVector<f64>,
    qd: &DVector<f64>,
    tau_s: &DVector<f64>,
    f_a: &DVector<f64>,
) -> Result<DVector<f64>> {
    let terms = eval_target(model, q, qd)?;
    if tau_s.len() != model.task_dim() {
        return Err(HilError::DimensionMismatch {
            context: "forward_accel torque",
            expected: model.task_dim(),
            actual: tau_s.len(),
        });
    }
    if f_a.len() != model.task_dim() {
        return Err(HilError::DimensionMismatch {
            context: "forward_accel force",
            expected: model.task_dim(),
            actual: f_a.len(),
        });
    }
    let rhs = model.actuation() * tau_s - &terms.bias + terms.jac.transpose() * f_a;
    let chol = terms
        .mass
        .clone()
        .cholesky()
        .ok_or(HilError::SingularMatrix { what: "target mass matrix" })?;
    Ok(chol.solve(&rhs))
}

/// Map from contact force to generalized constraint force, `f_a = Λ(φ) f`.
///
/// `Λ` is block-diagonal with identity over the position coordinates; in the
/// planar scope of this crate the orientation block is also the identity, so
/// the map is exact pass-through. The type exists so the injection point is
/// explicit where contact forces enter the dynamics.
#[derive(Debug, Clone, Copy, Default)]
pub struct PoseTransform;

impl PoseTransform {
    /// `f_a = Λ f`; planar scope: `Λ = I`.
    pub fn generalized_force(&self, f: &DVector<f64>) -> DVector<f64> {
        f.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::rk4_step;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    #[test]
    fn one_dof_rigid_terms_at_zero() {
        // m = 0.05 kg·m², gravity torque w·cos(0) = 0.5 N·m, J = l = 0.3 m.
        let (rigid, _) = appendix_one_dof_pair();
        let t = eval_rigid(&rigid, &dvector![0.0], &dvector![0.0]).unwrap();
        assert_eq!(t.mass[(0, 0)], 0.05);
        assert_eq!(t.bias[0], 0.5);
        assert_eq!(t.jac[(0, 0)], 0.3);
        assert_eq!(t.jac_dot[(0, 0)], 0.0);
    }

    #[test]
    fn one_dof_rigid_gravity_vanishes_upright() {
        let (rigid, _) = appendix_one_dof_pair();
        let t = eval_rigid(
            &rigid,
            &dvector![std::f64::consts::FRAC_PI_2],
            &dvector![0.0],
        )
        .unwrap();
        assert_relative_eq!(t.bias[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn one_dof_flexible_spring_bias() {
        // q_s2 - q_s1 = 0.1 rad loads the joint spring with k·0.1 = 0.3 N·m.
        let (_, target) = appendix_one_dof_pair();
        let t = eval_target(&target, &dvector![0.0, 0.1], &dvector![0.0, 0.0]).unwrap();
        assert_relative_eq!(t.bias[0].abs(), 0.3, epsilon = 1e-12);
        assert_relative_eq!(t.bias[0], -0.3, epsilon = 1e-12);
        assert_relative_eq!(t.bias[1], 0.3, epsilon = 1e-12);
    }

    #[test]
    fn forward_accel_unforced_equilibrium() {
        let (_, target) = appendix_one_dof_pair();
        let qdd = forward_accel(
            &target,
            &dvector![0.2, 0.2],
            &dvector![0.0, 0.0],
            &dvector![0.0],
            &dvector![0.0],
        )
        .unwrap();
        assert_eq!(qdd, dvector![0.0, 0.0]);
    }

    #[test]
    fn forward_accel_spring_release() {
        // Hand substitution: q̈_s1 = k·0.1/m_s1 = 6.0, q̈_s2 = -k·0.1/m_s2 = -3.0.
        let (_, target) = appendix_one_dof_pair();
        let qdd = forward_accel(
            &target,
            &dvector![0.0, 0.1],
            &dvector![0.0, 0.0],
            &dvector![0.0],
            &dvector![0.0],
        )
        .unwrap();
        assert_relative_eq!(qdd[0], 6.0, epsilon = 1e-12);
        assert_relative_eq!(qdd[1], -3.0, epsilon = 1e-12);
    }

    #[test]
    fn forward_accel_is_affine_in_tip_force() {
        // A tip force enters as J_sᵀ f_a = (l·f, 0): the link acceleration
        // shifts by l·f/m_s1, checked as a two-point difference.
        let (_, target) = appendix_one_dof_pair();
        let q = dvector![0.3, 0.25];
        let qd = dvector![0.1, -0.2];
        let tau = dvector![0.05];
        let f = 0.8;
        let a0 = forward_accel(&target, &q, &qd, &tau, &dvector![0.0]).unwrap();
        let a1 = forward_accel(&target, &q, &qd, &tau, &dvector![f]).unwrap();
        let shift = a1 - a0;
        assert_relative_eq!(shift[0], 0.3 * f / 0.05, epsilon = 1e-10);
        assert_relative_eq!(shift[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn dimension_and_finiteness_guards() {
        let (rigid, target) = appendix_one_dof_pair();
        assert!(matches!(
            eval_rigid(&rigid, &dvector![0.0, 0.0], &dvector![0.0]),
            Err(HilError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            eval_target(&target, &dvector![f64::NAN, 0.0], &dvector![0.0, 0.0]),
            Err(HilError::NonFinite(_))
        ));
    }

    #[test]
    fn two_link_mass_matrix_is_symmetric_and_pd() {
        let (rigid, target) = planar_two_link_pair();
        for qv in [
            dvector![0.3, 0.8],
            dvector![-0.5, 1.2],
            dvector![1.0, -0.9],
        ] {
            let m = rigid.mass_matrix(&qv);
            assert_eq!(m[(0, 1)], m[(1, 0)]);
            assert!(m.clone().cholesky().is_some());

            let qs = dvector![qv[0], qv[1], 0.1, -0.2];
            let ms = target.mass_matrix(&qs);
            assert_eq!(ms, ms.transpose());
            assert!(ms.cholesky().is_some());
        }
    }

    #[test]
    fn two_link_pose_rate_matches_jacobian() {
        // d(p)/dt = J q̇ along a trajectory, checked by central differences.
        let (rigid, _) = planar_two_link_pair();
        let q = dvector![0.4, 0.7];
        let qd = dvector![0.3, -0.5];
        let eps = 1e-6;
        let p_plus = rigid.pose(&(&q + &qd * eps));
        let p_minus = rigid.pose(&(&q - &qd * eps));
        let numeric = (p_plus - p_minus) / (2.0 * eps);
        let analytic = rigid.jacobian(&q) * &qd;
        assert_relative_eq!(numeric, analytic, epsilon = 1e-8);
    }

    #[test]
    fn jacobian_dot_matches_finite_difference() {
        let (rigid, target) = planar_two_link_pair();
        let q = dvector![0.2, 0.9];
        let qd = dvector![-0.6, 0.4];
        let eps = 1e-6;
        let fd = (rigid.jacobian(&(&q + &qd * eps)) - rigid.jacobian(&(&q - &qd * eps)))
            / (2.0 * eps);
        assert_relative_eq!(rigid.jacobian_dot(&q, &qd), fd, epsilon = 1e-8);

        let qs = dvector![0.2, 0.9, 0.0, 0.0];
        let qsd = dvector![-0.6, 0.4, 0.1, 0.3];
        let fd_s = (target.jacobian(&(&qs + &qsd * eps)) - target.jacobian(&(&qs - &qsd * eps)))
            / (2.0 * eps);
        assert_relative_eq!(target.jacobian_dot(&qs, &qsd), fd_s, epsilon = 1e-8);
    }

    #[test]
    fn actuation_map_is_a_selection_matrix() {
        let (_, t1) = appendix_one_dof_pair();
        let (_, t2) = planar_two_link_pair();
        for target in [t1, t2] {
            let b = target.actuation();
            let btb = b.transpose() * &b;
            assert_eq!(btb, DMatrix::identity(target.task_dim(), target.task_dim()));
            for col in 0..target.task_dim() {
                let ones = b.column(col).iter().filter(|x| **x != 0.0).count();
                assert_eq!(ones, 1);
            }
        }
    }

    #[test]
    fn flexible_jacobian_has_zero_motor_columns() {
        let (_, target) = planar_two_link_pair();
        let j = target.jacobian(&dvector![0.3, 0.5, 0.0, 0.0]);
        assert_eq!(j.view((0, 2), (2, 2)), DMatrix::zeros(2, 2));
    }

    #[test]
    fn energy_is_conserved_without_friction() {
        // Unforced, friction-free flexible-joint arm: relative energy drift
        // over 10 s at h = 1e-4 stays below 1e-6.
        let mut params = OneDofFlexibleParams::appendix_e();
        params.joint_damping = 0.0;
        params.motor_viscous = 0.0;
        let target = TargetModel::one_dof_flexible(params);

        let h = 1e-4;
        let mut y = dvector![0.0, 0.2, 0.0, 0.0]; // (q_s1, q_s2, q̇_s1, q̇_s2)
        let e0 = target.energy(&y.rows(0, 2).into_owned(), &y.rows(2, 2).into_owned());
        let mut f = |_t: f64, y: &DVector<f64>| {
            let q = y.rows(0, 2).into_owned();
            let qd = y.rows(2, 2).into_owned();
            let qdd = forward_accel(&target, &q, &qd, &dvector![0.0], &dvector![0.0])?;
            Ok(dvector![qd[0], qd[1], qdd[0], qdd[1]])
        };
        let steps = (10.0 / h) as usize;
        let mut t = 0.0;
        for _ in 0..steps {
            y = rk4_step(&mut f, t, &y, h).unwrap();
            t += h;
        }
        let e1 = target.energy(&y.rows(0, 2).into_owned(), &y.rows(2, 2).into_owned());
        assert!(
            ((e1 - e0) / e0).abs() < 1e-6,
            "relative energy drift {:.3e}",
            ((e1 - e0) / e0).abs()
        );
    }

    #[test]
    fn two_link_flexible_energy_is_conserved() {
        let mut params = TwoLinkFlexibleParams::default();
        params.joint_damping = [0.0, 0.0];
        params.motor_viscous = 0.0;
        let target = TargetModel::two_link_flexible(params);

        let h = 1e-4;
        let mut y = DVector::from_vec(vec![0.3, 0.7, 0.45, 0.6, 0.0, 0.0, 0.0, 0.0]);
        let e0 = target.energy(&y.rows(0, 4).into_owned(), &y.rows(4, 4).into_owned());
        let mut f = |_t: f64, y: &DVector<f64>| {
            let q = y.rows(0, 4).into_owned();
            let qd = y.rows(4, 4).into_owned();
            let qdd = forward_accel(&target, &q, &qd, &dvector![0.0, 0.0], &dvector![0.0, 0.0])?;
            let mut out = DVector::zeros(8);
            out.rows_mut(0, 4).copy_from(&qd);
            out.rows_mut(4, 4).copy_from(&qdd);
            Ok(out)
        };
        let steps = (10.0 / h) as usize;
        let mut t = 0.0;
        for _ in 0..steps {
            y = rk4_step(&mut f, t, &y, h).unwrap();
            t += h;
        }
        let e1 = target.energy(&y.rows(0, 4).into_owned(), &y.rows(4, 4).into_owned());
        assert!(
            ((e1 - e0) / e0).abs() < 1e-6,
            "relative energy drift {:.3e}",
            ((e1 - e0) / e0).abs()
        );
    }
}
