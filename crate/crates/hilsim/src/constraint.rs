//! The DAE view of the target robot.
//!
//! Constraining the simulated target's end-effector pose to the emulating
//! robot's measured pose trajectory is a rheonomic constraint
//! `Φ(q_s, q_r(t)) = p_r(q_r(t)) - p_s(q_s) = 0`. This module provides the
//! pieces the constrained simulator needs: the Lagrange multiplier (the
//! constraint force the simulated robot feels), the Cartesian inertias and
//! their ratio, an orthonormal null-space basis of the constraint Jacobian,
//! and the reduced dynamics of the independent (self-motion) coordinates.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{RigidModel, TargetModel};
use crate::error::{HilError, Result};

/// Relative singular-value threshold below which a Jacobian row space is
/// treated as rank-deficient.
const RANK_TOL: f64 = 1e-10;

/// The rheonomic coupling `Φ(q_s, q_r) = p_r(q_r) - p_s(q_s)` between an
/// emulation pair.
#[derive(Debug, Clone, Copy)]
pub struct RheonomicConstraint<'a> {
    pub rigid: &'a RigidModel,
    pub target: &'a TargetModel,
}

impl<'a> RheonomicConstraint<'a> {
    pub fn new(rigid: &'a RigidModel, target: &'a TargetModel) -> Self {
        RheonomicConstraint { rigid, target }
    }

    /// Constraint residual `Φ = p_r - p_s`.
    pub fn residual(&self, q_s: &DVector<f64>, q_r: &DVector<f64>) -> DVector<f64> {
        self.rigid.pose(q_r) - self.target.pose(q_s)
    }

    /// Constraint Jacobian with respect to `q_s`, which is `-J_s` by
    /// construction.
    pub fn jacobian_qs(&self, q_s: &DVector<f64>) -> DMatrix<f64> {
        -self.target.jacobian(q_s)
    }

    /// Drive term `c = p̈_r - J̇_s q̇_s` of the twice-differentiated
    /// constraint.
    pub fn drive_term(
        &self,
        q_s: &DVector<f64>,
        qd_s: &DVector<f64>,
        pddot_r: &DVector<f64>,
    ) -> DVector<f64> {
        pddot_r - self.target.jacobian_dot(q_s, qd_s) * qd_s
    }
}

fn spd_solve(m: &DMatrix<f64>, rhs: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or(HilError::SingularMatrix { what })?;
    Ok(chol.solve(rhs))
}

/// Lagrange multiplier of the rheonomically constrained target robot,
///
/// ```text
///   λ = (J_s M_s⁻¹ J_sᵀ)⁻¹ (c + J_s M_s⁻¹ (h_s - B τ_s)),   c = p̈_r - J̇_s q̇_s.
/// ```
///
/// `λ` equals the constraint force the simulated robot would feel; the
/// emulation controller drives the physical contact force toward it. Note the
/// pose acceleration `p̈_r` is required; in this simulator it is computed
/// analytically from the emulating robot's closed-loop acceleration.
pub fn lagrange_multiplier(
    target: &TargetModel,
    q_s: &DVector<f64>,
    qd_s: &DVector<f64>,
    tau_s: &DVector<f64>,
    pddot_r: &DVector<f64>,
) -> Result<DVector<f64>> {
    let mass = target.mass_matrix(q_s);
    let bias = target.bias(q_s, qd_s);
    let jac = target.jacobian(q_s);
    let jac_dot = target.jacobian_dot(q_s, qd_s);

    let minv_jt = spd_solve(&mass, &jac.transpose(), "target mass matrix")?;
    let a = &jac * &minv_jt; // J_s M_s⁻¹ J_sᵀ, SPD when J_s has full row rank
    let c = pddot_r - jac_dot * qd_s;
    let rhs = c + minv_jt.transpose() * (bias - target.actuation() * tau_s);
    let chol = a.cholesky().ok_or(HilError::SingularConfiguration(
        "J_s M_s^-1 J_s^T is rank-deficient".to_string(),
    ))?;
    Ok(chol.solve(&rhs))
}

/// Cartesian (task-space) inertia `𝓜 = (J M⁻¹ Jᵀ)⁻¹`; its inverse is the
/// mechanical impedance seen at the end-effector.
pub fn cartesian_inertia(mass: &DMatrix<f64>, jac: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let minv_jt = spd_solve(mass, &jac.transpose(), "mass matrix")?;
    let a = jac * minv_jt;
    let inv = a
        .cholesky()
        .ok_or(HilError::SingularConfiguration(
            "Jacobian is rank-deficient".to_string(),
        ))?
        .inverse();
    // Symmetrize to remove rounding skew; 𝓜 is SPD by construction.
    Ok((&inv + inv.transpose()) * 0.5)
}

/// Inertia ratio `𝓠 = 𝓜_s 𝓜_r⁻¹` of an emulation pair.
pub fn inertia_ratio(m_s: &DMatrix<f64>, m_r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = m_r
        .clone()
        .cholesky()
        .ok_or(HilError::SingularMatrix {
            what: "emulating Cartesian inertia",
        })?
        .inverse();
    Ok(m_s * inv)
}

/// Eigenvalues of the inertia ratio, sorted ascending. They are real and
/// positive (product of two symmetric positive-definite matrices), computed
/// through the equivalent symmetric problem `L⁻¹ 𝓜_s L⁻ᵀ` with `𝓜_r = L Lᵀ`.
pub fn inertia_ratio_eigenvalues(m_s: &DMatrix<f64>, m_r: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = m_r.clone().cholesky().ok_or(HilError::SingularMatrix {
        what: "emulating Cartesian inertia",
    })?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(m_s)
        .ok_or(HilError::SingularMatrix { what: "Cholesky factor" })?;
    let s = l
        .solve_lower_triangular(&x.transpose())
        .ok_or(HilError::SingularMatrix { what: "Cholesky factor" })?;
    let sym = (&s + s.transpose()) * 0.5;
    let mut eig: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(eig)
}

/// Moore-Penrose pseudoinverse `Jᵀ (J Jᵀ)⁻¹` of a full-row-rank wide matrix.
pub fn pseudoinverse(jac: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let jjt = jac * jac.transpose();
    let chol = jjt.cholesky().ok_or(HilError::SingularConfiguration(
        "Jacobian is rank-deficient".to_string(),
    ))?;
    Ok(chol.solve(&jac.clone()).transpose())
}

/// Orthonormal basis `P` (m×(m-n)) of the null space of `J_s`, so that
/// `J_s P = 0` and `Pᵀ P = I`. Columns are sign- and order-canonicalized so
/// repeated calls are identical.
///
/// The basis is extracted from the orthogonal projector `I - J_s⁺ J_s`, whose
/// unit-eigenvalue eigenvectors span the null space. `m = n` yields an empty
/// basis (the independent coordinate has dimension zero).
pub fn nullspace_basis(jac: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, m) = jac.shape();
    if n > m {
        return Err(HilError::DimensionMismatch {
            context: "nullspace_basis: constraint Jacobian must be wide",
            expected: n,
            actual: m,
        });
    }
    let svd = jac.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > RANK_TOL * smax.max(1.0)) {
        return Err(HilError::SingularConfiguration(format!(
            "constraint Jacobian is rank-deficient (sigma_min = {smin:.3e})"
        )));
    }
    if m == n {
        return Ok(DMatrix::zeros(m, 0));
    }

    let pinv = pseudoinverse(jac)?;
    let projector = DMatrix::identity(m, m) - pinv * jac;
    let projector = (&projector + projector.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(projector);

    let mut cols: Vec<DVector<f64>> = Vec::new();
    for (i, val) in eig.eigenvalues.iter().enumerate() {
        if *val > 0.5 {
            cols.push(eig.eigenvectors.column(i).into_owned());
        }
    }
    if cols.len() != m - n {
        return Err(HilError::SingularConfiguration(format!(
            "null space dimension {} does not match m - n = {}",
            cols.len(),
            m - n
        )));
    }
    // Canonical orientation: largest-magnitude entry positive; order by the
    // index of that entry.
    for col in &mut cols {
        let pivot = col.iamax();
        if col[pivot] < 0.0 {
            *col = -&*col;
        }
    }
    cols.sort_by_key(|c| c.iamax());
    let mut p = DMatrix::zeros(m, m - n);
    for (i, col) in cols.iter().enumerate() {
        p.set_column(i, col);
    }
    Ok(p)
}

/// Structural null-space basis `[0; I]` for flexible-joint targets
/// (`J_s = [J_s1  0]`), constant over the workspace. Falls back to
/// [`nullspace_basis`] for models without the flexible split.
pub fn structural_nullspace(target: &TargetModel, q_s: &DVector<f64>) -> Result<DMatrix<f64>> {
    let (m, n) = (target.coords(), target.task_dim());
    match target.flexible_split() {
        Some(split) => {
            let mut p = DMatrix::zeros(m, m - n);
            for i in 0..(m - n) {
                p[(split + i, i)] = 1.0;
            }
            Ok(p)
        }
        None => nullspace_basis(&target.jacobian(q_s)),
    }
}

/// General solution of the velocity-level constraint,
/// `q̇_s = J_s⁺ ṗ_r + P ξ`: the particular solution tracks the emulating
/// robot's pose rate, the homogeneous part is the self-motion `P ξ`.
pub fn general_velocity(
    jac_s: &DMatrix<f64>,
    pdot_r: &DVector<f64>,
    basis: &DMatrix<f64>,
    xi: &DVector<f64>,
) -> Result<DVector<f64>> {
    let pinv = pseudoinverse(jac_s)?;
    Ok(pinv * pdot_r + basis * xi)
}

/// Acceleration of the independent coordinates: solves
/// `N ξ̇ = Pᵀ (B τ_s - h_s) - Pᵀ M_s J_s⁺ c` with `N = Pᵀ M_s P`.
///
/// For the flexible-joint structure this reduces to
/// `q̈_s2 = M_s2⁻¹ (-h_s2 + τ_s - M_s12ᵀ J_s1⁻¹ c)`, the motor-side
/// acceleration used by the constrained simulator.
pub fn independent_accel(
    target: &TargetModel,
    basis: &DMatrix<f64>,
    q_s: &DVector<f64>,
    qd_s: &DVector<f64>,
    tau_s: &DVector<f64>,
    pddot_r: &DVector<f64>,
) -> Result<DVector<f64>> {
    if basis.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    let mass = target.mass_matrix(q_s);
    let bias = target.bias(q_s, qd_s);
    let jac = target.jacobian(q_s);
    let jac_dot = target.jacobian_dot(q_s, qd_s);

    let reduced = basis.transpose() * &mass * basis; // N = Pᵀ M_s P
    let c = pddot_r - jac_dot * qd_s;
    let pinv = pseudoinverse(&jac)?;
    let rhs = basis.transpose() * (target.actuation() * tau_s - bias - mass * pinv * c);
    let chol = reduced
        .cholesky()
        .ok_or(HilError::SingularMatrix { what: "reduced inertia N" })?;
    Ok(chol.solve(&rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{appendix_one_dof_pair, planar_two_link_pair};
    use approx::assert_relative_eq;
    use nalgebra::dvector;
    use proptest::prelude::*;

    #[test]
    fn multiplier_of_loaded_spring_at_rest() {
        // All rates zero, p̈_r = 0, τ_s = 0, pre-loaded spring of 0.1 rad:
        // the spring torque reacts at the tip as λ = -k·0.1/l = -1 N.
        let (_, target) = appendix_one_dof_pair();
        let lambda = lagrange_multiplier(
            &target,
            &dvector![0.0, 0.1],
            &dvector![0.0, 0.0],
            &dvector![0.0],
            &dvector![0.0],
        )
        .unwrap();
        assert_relative_eq!(lambda[0], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn multiplier_vanishes_when_unloaded() {
        let (_, target) = appendix_one_dof_pair();
        let lambda = lagrange_multiplier(
            &target,
            &dvector![0.4, 0.4],
            &dvector![0.0, 0.0],
            &dvector![0.0],
            &dvector![0.0],
        )
        .unwrap();
        assert_relative_eq!(lambda[0], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn multiplier_is_affine_in_target_torque() {
        // Doubling τ_s changes λ along slope -(J M⁻¹ Jᵀ)⁻¹ J M⁻¹ B.
        let (_, target) = appendix_one_dof_pair();
        let q = dvector![0.2, 0.3];
        let qd = dvector![0.1, -0.1];
        let pddot = dvector![0.05];
        let at =
            |tau: f64| lagrange_multiplier(&target, &q, &qd, &dvector![tau], &pddot).unwrap()[0];
        let l0 = at(0.0);
        let l1 = at(1.0);
        let l2 = at(2.0);
        assert_relative_eq!(l2 - l1, l1 - l0, epsilon = 1e-12);

        let mass = target.mass_matrix(&q);
        let jac = target.jacobian(&q);
        let minv_b = mass.clone().cholesky().unwrap().solve(&target.actuation());
        let a = cartesian_inertia(&mass, &jac).unwrap();
        let slope = -(a * jac * minv_b)[(0, 0)];
        assert_relative_eq!(l1 - l0, slope, epsilon = 1e-12);
    }

    #[test]
    fn one_dof_cartesian_inertias_match_by_hand() {
        // 𝓜_r = m_r/l² = 0.05/0.09, link-side 𝓜_s identical, so 𝓠 = 1.
        let (rigid, target) = appendix_one_dof_pair();
        let q_r = dvector![0.0];
        let q_s = dvector![0.0, 0.0];
        let m_r = cartesian_inertia(&rigid.mass_matrix(&q_r), &rigid.jacobian(&q_r)).unwrap();
        let m_s = cartesian_inertia(&target.mass_matrix(&q_s), &target.jacobian(&q_s)).unwrap();
        assert_relative_eq!(m_r[(0, 0)], 0.05 / 0.09, epsilon = 1e-12);
        assert_relative_eq!(m_s[(0, 0)], 0.05 / 0.09, epsilon = 1e-12);
        let q = inertia_ratio(&m_s, &m_r).unwrap();
        assert_relative_eq!(q[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn inertia_ratio_scales_linearly() {
        let (rigid, target) = planar_two_link_pair();
        let q_r = dvector![0.3, 0.8];
        let q_s = dvector![0.3, 0.8, 0.3, 0.8];
        let m_r = cartesian_inertia(&rigid.mass_matrix(&q_r), &rigid.jacobian(&q_r)).unwrap();
        let m_s = cartesian_inertia(&target.mass_matrix(&q_s), &target.jacobian(&q_s)).unwrap();
        let e1 = inertia_ratio_eigenvalues(&m_s, &m_r).unwrap();
        let e2 = inertia_ratio_eigenvalues(&(&m_s * 3.0), &m_r).unwrap();
        for (a, b) in e1.iter().zip(&e2) {
            assert_relative_eq!(3.0 * a, *b, epsilon = 1e-10);
        }
        assert!(e1.windows(2).all(|w| w[0] <= w[1]));
        assert!(e1.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn nullspace_of_flexible_jacobian_is_motor_block() {
        let jac = DMatrix::from_row_slice(1, 2, &[0.3, 0.0]);
        let p = nullspace_basis(&jac).unwrap();
        assert_eq!(p.shape(), (2, 1));
        assert_relative_eq!(p[(0, 0)], 0.0, epsilon = 1e-14);
        assert_relative_eq!(p[(1, 0)].abs(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn nullspace_of_row_vector() {
        let s = 1.0 / 2.0_f64.sqrt();
        let jac = DMatrix::from_row_slice(1, 2, &[s, s]);
        let p = nullspace_basis(&jac).unwrap();
        assert_relative_eq!((jac * &p)[(0, 0)], 0.0, epsilon = 1e-13);
        assert_relative_eq!(p.column(0).norm(), 1.0, epsilon = 1e-13);
        assert_relative_eq!(p[(0, 0)].abs(), s, epsilon = 1e-12);
    }

    #[test]
    fn square_jacobian_has_empty_nullspace() {
        let jac = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, -0.3, 0.9]);
        let p = nullspace_basis(&jac).unwrap();
        assert_eq!(p.shape(), (2, 0));
    }

    #[test]
    fn rank_deficient_jacobian_is_rejected() {
        let jac = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 1.0, 0.0, 2.0, 0.0, 2.0, 0.0]);
        assert!(matches!(
            nullspace_basis(&jac),
            Err(HilError::SingularConfiguration(_))
        ));
    }

    #[test]
    fn general_velocity_satisfies_the_constraint() {
        let (_, target) = planar_two_link_pair();
        let q_s = dvector![0.4, 0.9, 0.35, 0.95];
        let jac = target.jacobian(&q_s);
        let basis = structural_nullspace(&target, &q_s).unwrap();
        let pdot = dvector![0.07, -0.02];
        let xi = dvector![0.3, -0.4];
        let qd = general_velocity(&jac, &pdot, &basis, &xi).unwrap();
        assert_relative_eq!(&jac * &qd, pdot, epsilon = 1e-12);
        // Null-space content is exactly the injected self-motion.
        assert_relative_eq!(basis.transpose() * &qd, xi, epsilon = 1e-12);
    }

    #[test]
    fn general_velocity_zero_inputs() {
        let (_, target) = appendix_one_dof_pair();
        let q_s = dvector![0.1, 0.2];
        let jac = target.jacobian(&q_s);
        let basis = structural_nullspace(&target, &q_s).unwrap();
        let qd = general_velocity(&jac, &dvector![0.0], &basis, &dvector![0.0]).unwrap();
        assert_eq!(qd, dvector![0.0, 0.0]);
    }

    #[test]
    fn one_dof_velocity_identification() {
        // J_s1 = J_r = l, so the particular solution gives q̇_s1 = q̇_r.
        let (rigid, target) = appendix_one_dof_pair();
        let q_r = dvector![0.5];
        let qd_r = dvector![0.7];
        let pdot = rigid.jacobian(&q_r) * &qd_r;
        let q_s = dvector![0.5, 0.4];
        let basis = structural_nullspace(&target, &q_s).unwrap();
        let qd_s =
            general_velocity(&target.jacobian(&q_s), &pdot, &basis, &dvector![0.0]).unwrap();
        assert_relative_eq!(qd_s[0], qd_r[0], epsilon = 1e-13);
    }

    #[test]
    fn independent_accel_reduces_to_motor_equation() {
        // Appendix-style reduction (M_s12 = 0):
        // q̈_s2 = m_s2⁻¹ (-k(q_s2-q_s1) - ζ(q̇_s2-q̇_s1) - c_s q̇_s2 + τ_s).
        let mut params = crate::dynamics::OneDofFlexibleParams::appendix_e();
        params.motor_viscous = 0.02;
        let target = crate::dynamics::TargetModel::one_dof_flexible(params);
        let q = dvector![0.3, 0.45];
        let qd = dvector![0.2, -0.1];
        let tau = dvector![0.12];
        let pddot = dvector![0.4];
        let basis = structural_nullspace(&target, &q).unwrap();
        let xidot = independent_accel(&target, &basis, &q, &qd, &tau, &pddot).unwrap();
        let expected = (-params.stiffness * (q[1] - q[0])
            - params.joint_damping * (qd[1] - qd[0])
            - params.motor_viscous * qd[1]
            + tau[0])
            / params.motor_inertia;
        assert_relative_eq!(xidot[0], expected, epsilon = 1e-12);
    }

    #[test]
    fn independent_accel_at_equilibrium_is_zero() {
        let (_, target) = appendix_one_dof_pair();
        let basis = structural_nullspace(&target, &dvector![0.0, 0.0]).unwrap();
        let xidot = independent_accel(
            &target,
            &basis,
            &dvector![0.0, 0.0],
            &dvector![0.0, 0.0],
            &dvector![0.0],
            &dvector![0.0],
        )
        .unwrap();
        assert_eq!(xidot, dvector![0.0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn random_wide_jacobians_have_orthonormal_annihilating_bases(
            entries in proptest::collection::vec(-2.0..2.0f64, 8)
        ) {
            let jac = DMatrix::from_row_slice(2, 4, &entries);
            let svd = jac.clone().svd(false, false);
            prop_assume!(svd.singular_values.min() > 1e-3);
            let p = nullspace_basis(&jac).unwrap();
            prop_assert!(p.shape() == (4, 2));
            prop_assert!((&jac * &p).norm() < 1e-12);
            let ptp = p.transpose() * &p;
            prop_assert!((ptp - DMatrix::identity(2, 2)).norm() < 1e-12);
        }

        #[test]
        fn velocity_constraint_residual_is_tiny(
            q in proptest::collection::vec(-1.2..1.2f64, 4),
            pdot in proptest::collection::vec(-0.5..0.5f64, 2),
            xi in proptest::collection::vec(-0.5..0.5f64, 2),
        ) {
            let (_, target) = planar_two_link_pair();
            let q_s = DVector::from_vec(q);
            // Stay away from the straight-arm singularity.
            prop_assume!(q_s[1].sin().abs() > 0.15);
            let jac = target.jacobian(&q_s);
            let basis = structural_nullspace(&target, &q_s).unwrap();
            let qd = general_velocity(
                &jac,
                &DVector::from_vec(pdot.clone()),
                &basis,
                &DVector::from_vec(xi),
            ).unwrap();
            let residual = &jac * qd - DVector::from_vec(pdot);
            prop_assert!(residual.norm() < 1e-12);
        }
    }
}
