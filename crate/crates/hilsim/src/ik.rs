//! Recovering the target robot's generalized coordinates from the emulating
//! robot's measured pose.
//!
//! Two routes are provided. Newton-Raphson projection solves the constraint
//! `Φ(q_s, q_r) = 0` exactly after each integration step; the closed-loop
//! inverse kinematics (CLIK) scheme instead runs a feedback flow
//! `q̇_s = P ξ + J_sᵀ K Φ` at the simulation rate and keeps the constraint
//! error ultimately bounded inside a ball whose radius is computable at design
//! time ([`clik_bound`]).

use nalgebra::{DMatrix, DVector};

use crate::constraint::pseudoinverse;
use crate::dynamics::TargetModel;
use crate::error::{HilError, Result};

#[derive(Debug, Clone, Copy)]
pub struct NewtonRaphsonConfig {
    /// Convergence tolerance on `‖Φ‖`.
    pub tolerance: f64,
    /// Iteration cap; exceeding it reports non-convergence with the last
    /// residual instead of guessing.
    pub max_iterations: usize,
}

impl Default for NewtonRaphsonConfig {
    fn default() -> Self {
        NewtonRaphsonConfig {
            tolerance: 1e-10,
            max_iterations: 25,
        }
    }
}

impl NewtonRaphsonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(HilError::invalid_config(
                "correction.tolerance",
                "must be positive",
            ));
        }
        if self.max_iterations == 0 {
            return Err(HilError::invalid_config(
                "correction.max_iterations",
                "must be at least 1",
            ));
        }
        Ok(())
    }
}

/// Iterate `q_sᵏ⁺¹ = q_sᵏ + J_s⁺ Φ(q_sᵏ, q_r)` until `‖Φ‖ ≤ ε`.
///
/// The pseudoinverse update moves only the range-space component, so the
/// null-space content of `q_s` (the self-motion state) is untouched. Returns
/// the corrected coordinates and the iteration count; an already-consistent
/// input returns unchanged with zero iterations.
pub fn newton_raphson_correct(
    target: &TargetModel,
    p_r: &DVector<f64>,
    q_s0: &DVector<f64>,
    config: &NewtonRaphsonConfig,
) -> Result<(DVector<f64>, usize)> {
    let mut q = q_s0.clone();
    let mut residual = p_r - target.pose(&q);
    if residual.norm() <= config.tolerance {
        return Ok((q, 0));
    }
    for iter in 1..=config.max_iterations {
        let jac = target.jacobian(&q);
        let pinv = pseudoinverse(&jac)?;
        q += pinv * &residual;
        residual = p_r - target.pose(&q);
        if residual.norm() <= config.tolerance {
            return Ok((q, iter));
        }
    }
    Err(HilError::NonConvergence {
        iterations: config.max_iterations,
        residual: residual.norm(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClikUpdate {
    /// `q̇_s = P ξ + J_sᵀ K Φ` — the form covered by the boundedness
    /// certificate.
    JacobianTranspose,
    /// `q̇_s = P ξ + J_s⁺ K Φ`; same interface, no certificate claimed.
    Pseudoinverse,
}

#[derive(Debug, Clone)]
pub struct ClikConfig {
    /// Positive-definite gain matrix `K` (n×n).
    pub gain: DMatrix<f64>,
    pub update: ClikUpdate,
}

impl ClikConfig {
    /// Diagonal gain `K = k I`.
    pub fn scalar(n: usize, k: f64) -> Self {
        ClikConfig {
            gain: DMatrix::identity(n, n) * k,
            update: ClikUpdate::JacobianTranspose,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.gain.clone().cholesky().is_none() {
            return Err(HilError::invalid_config(
                "correction.clik_gain",
                "gain matrix must be symmetric positive-definite",
            ));
        }
        Ok(())
    }
}

/// One evaluation of the CLIK flow: the estimate rate `q̇̂_s` given the
/// current estimate, the self-motion input `P ξ`, and the measured pose.
pub fn clik_step(
    target: &TargetModel,
    q_s: &DVector<f64>,
    basis: &DMatrix<f64>,
    xi: &DVector<f64>,
    p_r: &DVector<f64>,
    config: &ClikConfig,
) -> Result<DVector<f64>> {
    let phi = p_r - target.pose(q_s);
    let jac = target.jacobian(q_s);
    let correction = match config.update {
        ClikUpdate::JacobianTranspose => jac.transpose() * &config.gain * phi,
        ClikUpdate::Pseudoinverse => pseudoinverse(&jac)? * &config.gain * phi,
    };
    Ok(basis * xi + correction)
}

/// Ultimate-boundedness certificate of the Jacobian-transpose CLIK flow.
#[derive(Debug, Clone, Copy)]
pub struct ClikBound {
    /// Radius `ρ = γ^{3/2}(K) ‖ṗ_r‖_max / (λ_m(K) λ_m(J_s J_sᵀ))` of the
    /// attractive ball around `Φ = 0`.
    pub radius: f64,
    /// Threshold `μ` above which the Lyapunov function is strictly
    /// decreasing.
    pub attraction_threshold: f64,
    /// Condition number `γ(K)`.
    pub condition_number: f64,
    /// `λ_m(K)`.
    pub min_gain_eigenvalue: f64,
    /// Worst-case (minimum over the sampled workspace) `λ_m(J_s J_sᵀ)`.
    pub min_jjt_eigenvalue: f64,
}

/// Evaluate the certificate over a sampled operating region.
///
/// `pdot_max` is the configured operational speed limit of the emulating
/// robot's pose, a design-time quantity. Each sample contributes its
/// `λ_m(J_s J_sᵀ)`; a singular sample is rejected and reported by index.
pub fn clik_bound(
    config: &ClikConfig,
    jacobian_samples: &[DMatrix<f64>],
    pdot_max: f64,
) -> Result<ClikBound> {
    if jacobian_samples.is_empty() {
        return Err(HilError::invalid_config(
            "clik_bound.samples",
            "at least one workspace sample is required",
        ));
    }
    let gain_sym = (&config.gain + config.gain.transpose()) * 0.5;
    let mut gain_eigs: Vec<f64> = gain_sym.symmetric_eigenvalues().iter().copied().collect();
    gain_eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lam_min_k = gain_eigs[0];
    let lam_max_k = *gain_eigs.last().unwrap();
    if lam_min_k <= 0.0 {
        return Err(HilError::invalid_config(
            "correction.clik_gain",
            "gain matrix must be positive-definite",
        ));
    }

    let mut min_jjt = f64::INFINITY;
    for (idx, jac) in jacobian_samples.iter().enumerate() {
        let jjt = jac * jac.transpose();
        let eig = jjt.symmetric_eigenvalues();
        let lam = eig.min();
        if !(lam > 1e-12) {
            return Err(HilError::SingularConfiguration(format!(
                "workspace sample {idx} has singular J_s (lambda_min(J J^T) = {lam:.3e})"
            )));
        }
        min_jjt = min_jjt.min(lam);
    }

    let gamma = lam_max_k / lam_min_k;
    Ok(ClikBound {
        radius: gamma.powf(1.5) * pdot_max / (lam_min_k * min_jjt),
        attraction_threshold: lam_max_k * pdot_max / (lam_min_k * lam_min_k * min_jjt),
        condition_number: gamma,
        min_gain_eigenvalue: lam_min_k,
        min_jjt_eigenvalue: min_jjt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{appendix_one_dof_pair, planar_two_link_pair};
    use crate::constraint::structural_nullspace;
    use crate::integrate::rk4_step;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    #[test]
    fn newton_is_exact_on_linear_kinematics() {
        // p = l q: one Newton step lands on the solution.
        let (_, target) = appendix_one_dof_pair();
        let p_ref = dvector![0.3 * 0.42];
        let (q, iters) = newton_raphson_correct(
            &target,
            &p_ref,
            &dvector![0.1, 0.0],
            &NewtonRaphsonConfig::default(),
        )
        .unwrap();
        assert_eq!(iters, 1);
        assert_relative_eq!(q[0], 0.42, epsilon = 1e-12);
    }

    #[test]
    fn consistent_input_returns_unchanged() {
        let (_, target) = appendix_one_dof_pair();
        let q0 = dvector![0.3, 0.7];
        let p_ref = target.pose(&q0);
        let (q, iters) =
            newton_raphson_correct(&target, &p_ref, &q0, &NewtonRaphsonConfig::default()).unwrap();
        assert_eq!(iters, 0);
        assert_eq!(q, q0);
    }

    #[test]
    fn two_link_millimetre_correction_converges_fast() {
        let (_, target) = planar_two_link_pair();
        let q_true = dvector![0.5, 0.9, 0.5, 0.9];
        let p_ref = target.pose(&q_true);
        // Perturb the links so the tip is ~1 mm off.
        let q0 = dvector![0.5 + 2e-3, 0.9 - 2e-3, 0.5, 0.9];
        let cfg = NewtonRaphsonConfig::default();
        let (q, iters) = newton_raphson_correct(&target, &p_ref, &q0, &cfg).unwrap();
        assert!(iters <= 5, "took {iters} iterations");
        assert!((p_ref - target.pose(&q)).norm() < 1e-10);
        // Motor coordinates (null space) untouched.
        assert_eq!(q[2], 0.5);
        assert_eq!(q[3], 0.9);
    }

    #[test]
    fn newton_converges_quadratically() {
        // Residual ratios r_{k+1}/r_k² stay bounded on the smooth 2-link
        // instance.
        let (_, target) = planar_two_link_pair();
        let q_true = dvector![0.6, 1.0, 0.6, 1.0];
        let p_ref = target.pose(&q_true);
        let mut q = dvector![0.75, 0.8, 0.6, 1.0];
        let mut residuals = vec![(p_ref.clone() - target.pose(&q)).norm()];
        for _ in 0..6 {
            let jac = target.jacobian(&q);
            let pinv = pseudoinverse(&jac).unwrap();
            let phi = &p_ref - target.pose(&q);
            q += pinv * phi;
            let r = (&p_ref - target.pose(&q)).norm();
            residuals.push(r);
            if r < 1e-14 {
                break;
            }
        }
        for w in residuals.windows(2) {
            if w[0] > 1e-8 {
                assert!(
                    w[1] <= 30.0 * w[0] * w[0],
                    "not quadratic: {} -> {}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn non_convergence_carries_residual() {
        let (_, target) = planar_two_link_pair();
        // Unreachable pose (outside the workspace).
        let p_ref = dvector![5.0, 5.0];
        let err = newton_raphson_correct(
            &target,
            &p_ref,
            &dvector![0.3, 0.8, 0.3, 0.8],
            &NewtonRaphsonConfig {
                tolerance: 1e-10,
                max_iterations: 8,
            },
        )
        .unwrap_err();
        match err {
            HilError::NonConvergence { residual, .. } => assert!(residual > 0.0),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn clik_equilibrium_is_stationary() {
        let (_, target) = appendix_one_dof_pair();
        let q_s = dvector![0.2, 0.2];
        let basis = structural_nullspace(&target, &q_s).unwrap();
        let cfg = ClikConfig::scalar(1, 100.0);
        let rate = clik_step(
            &target,
            &q_s,
            &basis,
            &dvector![0.0],
            &target.pose(&q_s),
            &cfg,
        )
        .unwrap();
        assert_eq!(rate, dvector![0.0, 0.0]);
    }

    /// Integrate the CLIK flow against a constant-speed pose ramp and report
    /// the steady constraint error.
    fn clik_ramp_steady_error(k: f64, pdot: f64, t_end: f64) -> f64 {
        let (_, target) = appendix_one_dof_pair();
        let cfg = ClikConfig::scalar(1, k);
        let basis = structural_nullspace(&target, &dvector![0.0, 0.0]).unwrap();
        let h = 1e-4;
        let mut y = dvector![0.0, 0.0];
        let mut t = 0.0;
        let mut f = |t: f64, y: &DVector<f64>| {
            let p_r = dvector![pdot * t];
            clik_step(&target, y, &basis, &dvector![0.0], &p_r, &cfg)
        };
        let steps = (t_end / h) as usize;
        let mut sup_phi: f64 = 0.0;
        for i in 0..steps {
            y = rk4_step(&mut f, t, &y, h).unwrap();
            t += h;
            if i > steps / 2 {
                let phi = (pdot * t - target.pose(&y)[0]).abs();
                sup_phi = sup_phi.max(phi);
            }
        }
        sup_phi
    }

    #[test]
    fn clik_steady_error_halves_when_gain_doubles() {
        let e1 = clik_ramp_steady_error(100.0, 0.03, 2.0);
        let e2 = clik_ramp_steady_error(200.0, 0.03, 2.0);
        assert!((e2 / e1 - 0.5).abs() < 0.05, "ratio {}", e2 / e1);
    }

    #[test]
    fn clik_bound_scalar_gain_formula() {
        // K = kI: γ = 1, ρ = ‖ṗ‖/(k λ_m(JJᵀ)); the 1-DOF instance gives
        // ρ = 0.03/(100·0.09) ≈ 3.33e-3.
        let (_, target) = appendix_one_dof_pair();
        let cfg = ClikConfig::scalar(1, 100.0);
        let samples = vec![target.jacobian(&dvector![0.0, 0.0])];
        let bound = clik_bound(&cfg, &samples, 0.03).unwrap();
        assert_relative_eq!(bound.condition_number, 1.0, epsilon = 1e-12);
        assert_relative_eq!(bound.radius, 0.03 / (100.0 * 0.09), epsilon = 1e-12);
    }

    #[test]
    fn clik_bound_zero_speed_gives_zero_radius() {
        let (_, target) = appendix_one_dof_pair();
        let cfg = ClikConfig::scalar(1, 50.0);
        let samples = vec![target.jacobian(&dvector![0.0, 0.0])];
        let bound = clik_bound(&cfg, &samples, 0.0).unwrap();
        assert_eq!(bound.radius, 0.0);
    }

    #[test]
    fn clik_bound_rejects_singular_samples() {
        let (_, target) = planar_two_link_pair();
        let good = target.jacobian(&dvector![0.3, 0.9, 0.3, 0.9]);
        let singular = target.jacobian(&dvector![0.3, 0.0, 0.3, 0.0]);
        let cfg = ClikConfig::scalar(2, 100.0);
        let err = clik_bound(&cfg, &[good, singular], 0.03).unwrap_err();
        match err {
            HilError::SingularConfiguration(msg) => assert!(msg.contains("sample 1")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn clik_flow_simulated_error_stays_under_radius() {
        // 0.1 rad/s ramp on the 1-DOF arm: ṗ = 0.03 m/s; the measured sup of
        // ‖Φ‖ past the transient must respect the certificate.
        let k = 100.0;
        let pdot = 0.03;
        let (_, target) = appendix_one_dof_pair();
        let cfg = ClikConfig::scalar(1, k);
        let bound = clik_bound(&cfg, &[target.jacobian(&dvector![0.0, 0.0])], pdot).unwrap();
        let sup = clik_ramp_steady_error(k, pdot, 2.0);
        assert!(
            sup <= bound.radius * (1.0 + 1e-6),
            "sup phi {} exceeds radius {}",
            sup,
            bound.radius
        );
    }

    #[test]
    fn clik_lyapunov_descent_outside_threshold() {
        // V = ½ ΦᵀKΦ is non-increasing between samples while ‖Φ‖ ≥ μ, with μ
        // built from the worst-case Jacobian over the actual trajectory.
        let (_, target) = planar_two_link_pair();
        let cfg = ClikConfig::scalar(2, 80.0);
        let basis = structural_nullspace(&target, &dvector![0.0, 0.0, 0.0, 0.0]).unwrap();
        let pdot_max = 0.02;

        let h = 1e-4;
        let mut y = dvector![1.2, 0.8, 1.2, 0.8]; // start well off the ramp
        let mut t = 0.0;
        let mut f = |t: f64, y: &DVector<f64>| {
            let p_r = dvector![0.25 + pdot_max * t, 0.45];
            clik_step(&target, y, &basis, &dvector![0.0, 0.0], &p_r, &cfg)
        };
        let mut lyapunov = Vec::new();
        let mut phi_norms = Vec::new();
        let mut jac_samples = Vec::new();
        for k in 0..20_000 {
            let p_r = dvector![0.25 + pdot_max * t, 0.45];
            let phi = &p_r - target.pose(&y);
            lyapunov.push(0.5 * (phi.transpose() * &cfg.gain * &phi)[(0, 0)]);
            phi_norms.push(phi.norm());
            if k % 50 == 0 {
                jac_samples.push(target.jacobian(&y));
            }
            y = rk4_step(&mut f, t, &y, h).unwrap();
            t += h;
        }
        let bound = clik_bound(&cfg, &jac_samples, pdot_max).unwrap();
        let mut active = 0;
        for k in 1..lyapunov.len() {
            if phi_norms[k - 1] >= bound.attraction_threshold {
                active += 1;
                assert!(
                    lyapunov[k] <= lyapunov[k - 1] + 1e-12,
                    "Lyapunov function increased outside the attraction threshold at step {k}"
                );
            }
        }
        assert!(active > 100, "descent condition was barely exercised");
    }
}
