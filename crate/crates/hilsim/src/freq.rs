//! Frequency-domain stability and fidelity toolkit.
//!
//! During a contact phase the configuration barely moves, so the inertia and
//! Jacobian matrices are treated as constant and the emulation loop reduces
//! to rational transfer functions per eigenvalue of the inertia ratio `𝓠`:
//!
//! * admittance `Z(s) = s²/(s² + G_v s + G_p)` of the motion controller,
//! * loop gain `L'(s) = ω_a (s² + G_v s + G_p)/s³` from the first-order
//!   actuator lag `H(s) = 1/(1 + s/ω_a)`,
//! * transmissivity `T(s) = L'/(λ_q + L')` from the Lagrange multiplier to
//!   the realized contact force,
//! * the closed-form contact stability bound `λ_max(𝓠) < 2 ω_a / ω_p`,
//!   cross-checked by Routh first-column signs and numerically computed roots
//!   of the characteristic cubic `(λ_q/ω_a) s³ + s² + G_v s + G_p`.

use nalgebra::{Complex, DMatrix};

use crate::error::{HilError, Result};

/// Real-coefficient polynomial in `s`, ascending powers, trailing zeros
/// trimmed.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Polynomial { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    /// Horner evaluation at a complex point.
    pub fn eval(&self, s: Complex<f64>) -> Complex<f64> {
        let mut acc = Complex::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * s + Complex::new(*c, 0.0);
        }
        acc
    }

    /// Roots: origin roots are stripped analytically, degrees one and two are
    /// closed-form, higher degrees go through the companion matrix. The
    /// deflation keeps the companion away from the nilpotent corner cases
    /// that stall the iterative eigensolver.
    pub fn roots(&self) -> Vec<Complex<f64>> {
        let mut coeffs = self.coeffs.clone();
        let mut roots: Vec<Complex<f64>> = Vec::new();
        while coeffs.len() > 1 && coeffs[0] == 0.0 {
            coeffs.remove(0);
            roots.push(Complex::new(0.0, 0.0));
        }
        let deg = coeffs.len() - 1;
        match deg {
            0 => {}
            1 => roots.push(Complex::new(-coeffs[0] / coeffs[1], 0.0)),
            2 => {
                let (c, b, a) = (coeffs[0], coeffs[1], coeffs[2]);
                let disc = b * b - 4.0 * a * c;
                if disc >= 0.0 {
                    let q = -0.5 * (b + b.signum() * disc.sqrt());
                    let r1 = if q != 0.0 { c / q } else { 0.0 };
                    let r2 = if a != 0.0 && q != 0.0 { q / a } else { -b / a };
                    roots.push(Complex::new(r1, 0.0));
                    roots.push(Complex::new(r2, 0.0));
                } else {
                    let re = -b / (2.0 * a);
                    let im = (-disc).sqrt() / (2.0 * a);
                    roots.push(Complex::new(re, im));
                    roots.push(Complex::new(re, -im));
                }
            }
            _ => {
                let lead = *coeffs.last().unwrap();
                let mut companion = DMatrix::zeros(deg, deg);
                for i in 0..deg {
                    companion[(i, deg - 1)] = -coeffs[i] / lead;
                    if i > 0 {
                        companion[(i, i - 1)] = 1.0;
                    }
                }
                roots.extend(companion.complex_eigenvalues().iter().copied());
            }
        }
        roots
    }

    /// Rebuild a real polynomial `lead · Π (s - rᵢ)` from a root list whose
    /// complex members come in conjugate pairs.
    fn from_roots(lead: f64, roots: &[Complex<f64>]) -> Self {
        let mut coeffs = vec![Complex::new(1.0, 0.0)];
        for r in roots {
            let mut next = vec![Complex::new(0.0, 0.0); coeffs.len() + 1];
            for (i, c) in coeffs.iter().enumerate() {
                next[i + 1] += *c;
                next[i] -= *c * *r;
            }
            coeffs = next;
        }
        Polynomial::new(coeffs.iter().map(|c| c.re * lead).collect())
    }
}

/// Ratio of real-coefficient polynomials in `s`.
#[derive(Debug, Clone)]
pub struct RationalTransfer {
    pub num: Polynomial,
    pub den: Polynomial,
}

impl RationalTransfer {
    /// Build the transfer function, cancelling common num/den roots within a
    /// relative tolerance.
    pub fn new(num: Polynomial, den: Polynomial) -> Self {
        RationalTransfer { num, den }.reduced()
    }

    fn reduced(self) -> Self {
        const TOL: f64 = 1e-9;
        let num_roots = self.num.roots();
        let mut den_roots = self.den.roots();
        let mut kept_num: Vec<Complex<f64>> = Vec::new();
        'outer: for nr in num_roots {
            let scale = 1.0_f64.max(nr.norm());
            for (i, dr) in den_roots.iter().enumerate() {
                if (nr - dr).norm() <= TOL * scale {
                    den_roots.remove(i);
                    continue 'outer;
                }
            }
            kept_num.push(nr);
        }
        if kept_num.len() == self.num.degree() {
            return self; // nothing cancelled
        }
        RationalTransfer {
            num: Polynomial::from_roots(self.num.leading(), &kept_num),
            den: Polynomial::from_roots(self.den.leading(), &den_roots),
        }
    }

    pub fn eval(&self, s: Complex<f64>) -> Complex<f64> {
        self.num.eval(s) / self.den.eval(s)
    }

    pub fn magnitude(&self, omega: f64) -> f64 {
        self.eval(Complex::new(0.0, omega)).norm()
    }

    /// Gain as `|s| → ∞`: zero when strictly proper, the leading-coefficient
    /// ratio when biproper.
    pub fn gain_at_infinity(&self) -> f64 {
        if self.num.degree() < self.den.degree() {
            0.0
        } else {
            (self.num.leading() / self.den.leading()).abs()
        }
    }

    /// `sup_ω |G(jω)|` over `[lo, hi]` by a log-spaced scan refined with
    /// golden-section search, including the high-frequency limit.
    pub fn h_infinity_norm(&self, lo: f64, hi: f64) -> f64 {
        let grid = log_grid(lo, hi, 2000);
        let mut best_i = 0;
        let mut best = f64::NEG_INFINITY;
        for (i, w) in grid.iter().enumerate() {
            let mag = self.magnitude(*w);
            if mag > best {
                best = mag;
                best_i = i;
            }
        }
        let a = grid[best_i.saturating_sub(1)];
        let b = grid[(best_i + 1).min(grid.len() - 1)];
        let refined = golden_max(|w| self.magnitude(w), a.ln(), b.ln());
        refined.max(best).max(self.gain_at_infinity())
    }
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (l0, l1) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c.exp());
    let mut fd = f(d.exp());
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c.exp());
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d.exp());
        }
    }
    fc.max(fd)
}

/// Admittance of the motion controller, `Z(s) = s² / (s² + G_v s + G_p)`.
/// Rejects non-Hurwitz denominators (requires `G_v, G_p > 0`).
pub fn admittance(g_v: f64, g_p: f64) -> Result<RationalTransfer> {
    if !(g_v > 0.0 && g_p > 0.0) {
        return Err(HilError::invalid_config(
            "gains",
            "admittance denominator must be Hurwitz (G_v > 0, G_p > 0)",
        ));
    }
    Ok(RationalTransfer::new(
        Polynomial::new(vec![0.0, 0.0, 1.0]),
        Polynomial::new(vec![g_p, g_v, 1.0]),
    ))
}

/// Loop-gain numerator `L'(s) = ω_a (s² + G_v s + G_p) / s³`; the full loop
/// gain per eigenvalue is `L'(s)/λ_q`. Equals `H/(Z - Z H)` for the
/// first-order actuator `H(s) = 1/(1 + s/ω_a)`.
pub fn loop_gain_component(omega_a: f64, g_v: f64, g_p: f64) -> Result<RationalTransfer> {
    if !(omega_a > 0.0) {
        return Err(HilError::invalid_config("actuator.omega_a", "must be positive"));
    }
    if !(g_v > 0.0 && g_p > 0.0) {
        return Err(HilError::invalid_config("gains", "G_v and G_p must be positive"));
    }
    Ok(RationalTransfer::new(
        Polynomial::new(vec![g_p * omega_a, g_v * omega_a, omega_a]),
        Polynomial::new(vec![0.0, 0.0, 0.0, 1.0]),
    ))
}

/// Loop gain for one eigenvalue of the inertia ratio, `L = L'(s)/λ_q`.
pub fn loop_gain(omega_a: f64, g_v: f64, g_p: f64, lambda_q: f64) -> Result<RationalTransfer> {
    if !(lambda_q > 0.0) {
        return Err(HilError::invalid_config(
            "inertia ratio",
            "inertia ratio is not positive-definite",
        ));
    }
    let lp = loop_gain_component(omega_a, g_v, g_p)?;
    Ok(RationalTransfer::new(
        lp.num,
        Polynomial::new(lp.den.coeffs.iter().map(|c| c * lambda_q).collect()),
    ))
}

/// Transmissivity from the Lagrange multiplier to the realized contact force
/// for one eigenvalue of `𝓠`:
/// `T(s) = L'/(λ_q + L') = ω_a(s² + G_v s + G_p) / (λ_q s³ + ω_a s² + ω_a G_v s + ω_a G_p)`.
pub fn transmissivity(lambda_q: f64, omega_a: f64, g_v: f64, g_p: f64) -> Result<RationalTransfer> {
    if !(lambda_q > 0.0) {
        return Err(HilError::invalid_config(
            "inertia ratio",
            "inertia ratio is not positive-definite",
        ));
    }
    if !(omega_a > 0.0) {
        return Err(HilError::invalid_config("actuator.omega_a", "must be positive"));
    }
    Ok(RationalTransfer::new(
        Polynomial::new(vec![g_p * omega_a, g_v * omega_a, omega_a]),
        Polynomial::new(vec![g_p * omega_a, g_v * omega_a, omega_a, lambda_q]),
    ))
}

/// 400 log-spaced points over `[1e-2, 1e4]` rad/s.
pub fn default_bode_grid() -> Vec<f64> {
    log_grid(1e-2, 1e4, 400)
}

/// `|G(jω)|` over a frequency grid.
pub fn bode_magnitude(tf: &RationalTransfer, grid: &[f64]) -> Vec<(f64, f64)> {
    grid.iter().map(|w| (*w, tf.magnitude(*w))).collect()
}

/// Peak magnitude over `[lo, hi]` with golden-section refinement; returns
/// `(ω_peak, |G|_peak)`.
pub fn peak_magnitude(tf: &RationalTransfer, lo: f64, hi: f64) -> (f64, f64) {
    let grid = log_grid(lo, hi, 2000);
    let mut best = (grid[0], f64::NEG_INFINITY);
    for w in &grid {
        let m = tf.magnitude(*w);
        if m > best.1 {
            best = (*w, m);
        }
    }
    // Refine around the best grid point.
    let idx = grid.iter().position(|w| *w == best.0).unwrap();
    let a = grid[idx.saturating_sub(1)].ln();
    let b = grid[(idx + 1).min(grid.len() - 1)].ln();
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let (mut lo_l, mut hi_l) = (a, b);
    for _ in 0..80 {
        let c = hi_l - INV_PHI * (hi_l - lo_l);
        let d = lo_l + INV_PHI * (hi_l - lo_l);
        if tf.magnitude(c.exp()) > tf.magnitude(d.exp()) {
            hi_l = d;
        } else {
            lo_l = c;
        }
    }
    let w = (0.5 * (lo_l + hi_l)).exp();
    let m = tf.magnitude(w);
    if m > best.1 {
        (w, m)
    } else {
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityClass {
    Stable,
    Marginal,
    Unstable,
}

impl std::fmt::Display for StabilityClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StabilityClass::Stable => write!(f, "stable"),
            StabilityClass::Marginal => write!(f, "marginal"),
            StabilityClass::Unstable => write!(f, "unstable"),
        }
    }
}

/// Verdict for one eigenvalue of the inertia ratio.
#[derive(Debug, Clone)]
pub struct EigenVerdict {
    pub lambda_q: f64,
    /// Closed-form verdict from the bound `λ_q < 2 ω_a / ω_p`.
    pub class: StabilityClass,
    /// Relative margin `(λ_q - bound)/bound`; negative is stable.
    pub margin: f64,
    /// Routh first column `[λ_q/ω_a, 1, G_v - λ_q G_p/ω_a, G_p]`.
    pub routh_first_column: [f64; 4],
    /// Numerically computed roots of the characteristic cubic.
    pub roots: Vec<Complex<f64>>,
    /// Verdict from the root locations (same marginal band).
    pub root_class: StabilityClass,
}

/// Contact-stability verdict of an emulation configuration.
#[derive(Debug, Clone)]
pub struct StabilityVerdict {
    /// The binding bound `2 ω_a / ω_p = ω_a G_v / G_p`.
    pub bound: f64,
    pub per_eigenvalue: Vec<EigenVerdict>,
}

impl StabilityVerdict {
    pub fn all_stable(&self) -> bool {
        self.per_eigenvalue
            .iter()
            .all(|v| v.class == StabilityClass::Stable)
    }
}

/// Relative width of the declared marginal band around the bound.
pub const MARGIN_BAND: f64 = 1e-6;

/// Closed-form contact-stability gate `λ_max(𝓠) < 2 ω_a / ω_p`, cross-checked
/// per eigenvalue against the Routh schedule and the numeric roots of
/// `(λ_q/ω_a) s³ + s² + G_v s + G_p`.
///
/// Non-positive eigenvalues yield an unstable verdict (the inertia ratio must
/// be positive-definite); every input produces a verdict.
pub fn stability_gate(
    q_eigenvalues: &[f64],
    omega_a: f64,
    g_v: f64,
    g_p: f64,
) -> StabilityVerdict {
    let bound = omega_a * g_v / g_p; // = 2 ω_a / ω_p with ω_p = 2 G_p / G_v
    let per_eigenvalue = q_eigenvalues
        .iter()
        .map(|&lambda_q| {
            if lambda_q <= 0.0 {
                return EigenVerdict {
                    lambda_q,
                    class: StabilityClass::Unstable,
                    margin: f64::INFINITY,
                    routh_first_column: [lambda_q / omega_a, 1.0, f64::NAN, g_p],
                    roots: Vec::new(),
                    root_class: StabilityClass::Unstable,
                };
            }
            let margin = (lambda_q - bound) / bound;
            let class = if margin.abs() < MARGIN_BAND {
                StabilityClass::Marginal
            } else if margin < 0.0 {
                StabilityClass::Stable
            } else {
                StabilityClass::Unstable
            };
            let routh_first_column = [
                lambda_q / omega_a,
                1.0,
                g_v - lambda_q * g_p / omega_a,
                g_p,
            ];
            let cubic = Polynomial::new(vec![g_p, g_v, 1.0, lambda_q / omega_a]);
            let roots = cubic.roots();
            let max_re = roots.iter().map(|r| r.re).fold(f64::NEG_INFINITY, f64::max);
            let scale = roots
                .iter()
                .map(|r| r.norm())
                .fold(0.0_f64, f64::max)
                .max(1e-12);
            let root_class = if (max_re / scale).abs() < MARGIN_BAND {
                StabilityClass::Marginal
            } else if max_re < 0.0 {
                StabilityClass::Stable
            } else {
                StabilityClass::Unstable
            };
            EigenVerdict {
                lambda_q,
                class,
                margin,
                routh_first_column,
                roots,
                root_class,
            }
        })
        .collect();
    StabilityVerdict {
        bound,
        per_eigenvalue,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensitivityScheme {
    /// Constrained emulation: disturbance maps to force error.
    ConstrainedDae,
    /// Unconstrained emulation: disturbance maps to constraint error.
    UnconstrainedOde,
}

/// Frequency-wise disturbance-sensitivity bounds.
#[derive(Debug, Clone)]
pub struct SensitivityReport {
    pub scheme: SensitivityScheme,
    /// σ̄(𝓠), the force-error amplification of the constrained scheme.
    pub sigma_q: f64,
    /// σ̄(𝓜_r⁻¹), the pose-error amplification of the unconstrained scheme.
    pub sigma_mr_inv: f64,
    /// `(ω, gain)` samples: |Z(jω)| σ̄(𝓠) for the constrained scheme,
    /// σ̄(𝓜_r⁻¹)/|s² + G_v s + G_p| for the unconstrained one.
    pub curve: Vec<(f64, f64)>,
    /// DC gain (final value for a unit constant disturbance).
    pub dc_gain: f64,
}

fn max_singular_value(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.max()
}

/// Disturbance-to-error sensitivity for one scheme.
///
/// Constrained scheme: `e_f = -Z(s) 𝓠 d`, so `|e_f/d| ≤ |Z(jω)| σ̄(𝓠)` with
/// equality in the worst direction; a constant disturbance leaves no steady
/// force error (`Z(0) = 0`). Unconstrained scheme: the forced constraint
/// error obeys `Φ̈ + G_v Φ̇ + G_p Φ = 𝓜_r⁻¹ d`, so
/// `|Φ/d| = σ̄(𝓜_r⁻¹)/|s² + G_v s + G_p|`, with DC value `σ̄(𝓜_r⁻¹)/G_p`.
pub fn disturbance_sensitivity(
    q_ratio: &DMatrix<f64>,
    m_r: &DMatrix<f64>,
    g_v: f64,
    g_p: f64,
    scheme: SensitivityScheme,
) -> Result<SensitivityReport> {
    let sigma_q = max_singular_value(q_ratio);
    let mr_inv = m_r
        .clone()
        .cholesky()
        .ok_or(HilError::SingularMatrix {
            what: "emulating Cartesian inertia",
        })?
        .inverse();
    let sigma_mr_inv = max_singular_value(&mr_inv);

    let z = admittance(g_v, g_p)?;
    let grid = default_bode_grid();
    let curve: Vec<(f64, f64)> = match scheme {
        SensitivityScheme::ConstrainedDae => grid
            .iter()
            .map(|w| (*w, z.magnitude(*w) * sigma_q))
            .collect(),
        SensitivityScheme::UnconstrainedOde => grid
            .iter()
            .map(|w| {
                let den = z.den.eval(Complex::new(0.0, *w)).norm();
                (*w, sigma_mr_inv / den)
            })
            .collect(),
    };
    let dc_gain = match scheme {
        SensitivityScheme::ConstrainedDae => 0.0,
        SensitivityScheme::UnconstrainedOde => sigma_mr_inv / g_p,
    };
    Ok(SensitivityReport {
        scheme,
        sigma_q,
        sigma_mr_inv,
        curve,
        dc_gain,
    })
}
