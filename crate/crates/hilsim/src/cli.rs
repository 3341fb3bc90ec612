//! Command implementations behind the `hilsim` binary: scenario loading, run
//! orchestration, CSV export, analysis reports, and the packaged case study.
//!
//! Exit-code contract (enforced by the binary): 0 success, 2 configuration
//! error, 3 runtime failure.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{HilError, Result};
use crate::freq::{
    disturbance_sensitivity, peak_magnitude, stability_gate, transmissivity, SensitivityScheme,
    StabilityClass,
};
use crate::scenario::{casestudy_configs, ScenarioConfig, SchemeConfig};
use crate::sim::{self, SweepAxis, SweepRow, SweepVerdict};
use crate::trace::SimTrace;

/// Environment variable that redirects relative output paths.
pub const OUT_DIR_ENV: &str = "HILSIM_OUT_DIR";

fn version_comment() -> String {
    format!("hilsim v{}", env!("CARGO_PKG_VERSION"))
}

fn resolve_output(config_output: &str, override_path: Option<&Path>) -> PathBuf {
    let path = override_path
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| PathBuf::from(config_output));
    if path.is_relative() {
        if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
            if !dir.is_empty() {
                return PathBuf::from(dir).join(path);
            }
        }
    }
    path
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| {
        HilError::invalid_config(
            "<config>",
            format!("cannot read {}: {e}", path.display()),
        )
    })?;
    ScenarioConfig::from_json(&text)
}

/// Result summary of a `simulate` run.
#[derive(Debug, Clone)]
pub struct SimulateSummary {
    pub scheme: SchemeConfig,
    pub steps: usize,
    pub final_phi: f64,
    pub peak_force: f64,
    pub peak_force_error: f64,
    /// `max_{t ≥ 5/ω_p} ‖f_a - λ‖ / max ‖λ‖`; `None` for oracle runs or
    /// zero-force runs.
    pub force_tracking_ratio: Option<f64>,
    pub verdict: SweepVerdict,
    pub output: PathBuf,
}

impl fmt::Display for SimulateSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "steps:            {}", self.steps)?;
        writeln!(f, "final |phi|:      {:.6e}", self.final_phi)?;
        writeln!(f, "peak |f_a|:       {:.6e}", self.peak_force)?;
        writeln!(f, "peak |e_f|:       {:.6e}", self.peak_force_error)?;
        match self.force_tracking_ratio {
            Some(r) => writeln!(f, "|f_a-lambda|/max|lambda| (post-transient): {r:.3e}")?,
            None => writeln!(f, "|f_a-lambda|/max|lambda| (post-transient): n/a")?,
        }
        write!(f, "verdict:          {}", self.verdict)?;
        writeln!(f, "\ntrace written to: {}", self.output.display())
    }
}

/// Run the configured scheme, write the trace CSV, and summarize.
pub fn cmd_simulate(
    config_path: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
) -> Result<SimulateSummary> {
    let mut config = load_config(config_path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    for warning in config.warnings() {
        eprintln!("warning: {warning}");
    }
    let scenario = config.build()?;
    let trace = sim::run(&scenario)?;

    let output = resolve_output(&config.output, out);
    if let Some(parent) = output.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut file = fs::File::create(&output)?;
    trace.write_csv(
        &mut file,
        &[
            version_comment(),
            format!("config-sha256: {}", config.content_hash()),
        ],
    )?;

    // Static force reference from the direct oracle (contact scenarios only).
    let static_force = if scenario.environment.is_some()
        && config.scheme != SchemeConfig::Oracle
    {
        let mut oracle = scenario.clone();
        oracle.scheme = sim::Scheme::DirectOracle;
        let oracle_trace = sim::run_direct_oracle(&oracle)?;
        let from = oracle_trace.len() / 2;
        let mut forces: Vec<f64> =
            oracle_trace.f_a[from..].iter().map(|v| v.norm()).collect();
        forces.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if forces.is_empty() {
            0.0
        } else {
            forces[forces.len() / 2]
        }
    } else {
        0.0
    };

    let peak_force = SimTrace::max_norm(&trace.f_a, 0);
    let verdict = if static_force > 1e-9 && peak_force > 100.0 * static_force {
        SweepVerdict::Diverging
    } else {
        SweepVerdict::Bounded
    };

    let force_tracking_ratio = if config.scheme == SchemeConfig::Oracle {
        None
    } else {
        let transient = trace.index_at(5.0 / scenario.gains.bandwidth());
        let max_lambda = SimTrace::max_norm(&trace.lambda, 0);
        if max_lambda > 1e-12 {
            Some(SimTrace::max_norm(&trace.e_f, transient) / max_lambda)
        } else {
            None
        }
    };

    Ok(SimulateSummary {
        scheme: config.scheme,
        steps: trace.len(),
        final_phi: trace.phi.last().map(|v| v.norm()).unwrap_or(0.0),
        peak_force,
        peak_force_error: SimTrace::max_norm(&trace.e_f, 0),
        force_tracking_ratio,
        verdict,
        output,
    })
}

/// Frequency-domain report: transmissivity magnitude per inertia-ratio
/// eigenvalue, stability verdicts, and disturbance-sensitivity curves.
pub fn cmd_analyze(
    config_path: &Path,
    out: Option<&Path>,
    values: Option<&[f64]>,
) -> Result<PathBuf> {
    let config = load_config(config_path)?;
    config.build()?; // full validation before any analysis output
    let lambda_qs: Vec<f64> = match values {
        Some(v) if !v.is_empty() => v.to_vec(),
        _ => config.initial_q_eigenvalues()?,
    };

    let (g_v, g_p) = (config.gains.g_v, config.gains.g_p);
    let omega_a = config.actuator.omega_a;
    let verdict = stability_gate(&lambda_qs, omega_a, g_v, g_p);

    let (q_ratio, m_r) = config.initial_q_ratio()?;
    let sens_a = disturbance_sensitivity(&q_ratio, &m_r, g_v, g_p, SensitivityScheme::ConstrainedDae)?;
    let sens_b =
        disturbance_sensitivity(&q_ratio, &m_r, g_v, g_p, SensitivityScheme::UnconstrainedOde)?;

    let mut comments = vec![
        version_comment(),
        format!("config-sha256: {}", config.content_hash()),
        format!(
            "omega_a = {omega_a}, omega_p = {}, stability bound 2*omega_a/omega_p = {}",
            2.0 * g_p / g_v,
            verdict.bound
        ),
        format!(
            "sigma_max(Q) = {:.6}, sigma_max(Mr^-1) = {:.6}",
            sens_a.sigma_q, sens_a.sigma_mr_inv
        ),
    ];

    let grid = crate::freq::default_bode_grid();
    let mut curves: Vec<(String, Vec<f64>)> = Vec::new();
    for ev in &verdict.per_eigenvalue {
        let flagged = if ev.class == StabilityClass::Stable {
            ""
        } else {
            "_flagged"
        };
        let name = format!("T_lq_{}{}", ev.lambda_q, flagged);
        comments.push(format!(
            "lambda_q = {}: {} (margin {:+.3e} relative to the bound)",
            ev.lambda_q, ev.class, ev.margin
        ));
        if ev.lambda_q > 0.0 {
            let tf = transmissivity(ev.lambda_q, omega_a, g_v, g_p)?;
            let (w_peak, peak) = peak_magnitude(&tf, 1e-2, 1e4);
            comments.push(format!(
                "lambda_q = {}: peak |T| = {:.6} at omega = {:.4} rad/s",
                ev.lambda_q, peak, w_peak
            ));
            curves.push((name, grid.iter().map(|w| tf.magnitude(*w)).collect()));
        } else {
            curves.push((name, vec![f64::NAN; grid.len()]));
        }
    }

    let output = resolve_output(&config.output, out);
    let output = if out.is_none() {
        // Default: derive the analysis file from the configured output name.
        output.with_extension("analysis.csv")
    } else {
        output
    };
    if let Some(parent) = output.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut text = String::new();
    for c in &comments {
        text.push_str(&format!("# {c}\n"));
    }
    let mut header = vec!["omega".to_string()];
    header.extend(curves.iter().map(|(name, _)| name.clone()));
    header.push("ef_over_d".to_string());
    header.push("phi_over_d".to_string());
    text.push_str(&header.join(","));
    text.push('\n');
    for (i, w) in grid.iter().enumerate() {
        let mut row = vec![format!("{w:.11e}")];
        for (_, samples) in &curves {
            row.push(format!("{:.11e}", samples[i]));
        }
        row.push(format!("{:.11e}", sens_a.curve[i].1));
        row.push(format!("{:.11e}", sens_b.curve[i].1));
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(&output, text)?;
    Ok(output)
}

/// Parameter sweep; returns the rows and writes the summary CSV.
pub fn cmd_sweep(
    config_path: &Path,
    axis: &str,
    values: &[f64],
    jobs: usize,
    out: Option<&Path>,
) -> Result<(Vec<SweepRow>, PathBuf)> {
    let config = load_config(config_path)?;
    let axis = SweepAxis::parse(axis)?;
    if values.is_empty() {
        return Err(HilError::invalid_config(
            "sweep.values",
            "at least one value is required",
        ));
    }
    let scenario = config.build()?;
    let rows = sim::sweep(&scenario, axis, values, jobs)?;

    let output = resolve_output(&config.output, out);
    let output = if out.is_none() {
        output.with_extension("sweep.csv")
    } else {
        output
    };
    if let Some(parent) = output.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut text = String::new();
    text.push_str(&format!("# {}\n", version_comment()));
    text.push_str(&format!("# config-sha256: {}\n", config.content_hash()));
    text.push_str(&format!("# axis: {}\n", axis.name()));
    text.push_str("value,verdict,steady_phi,steady_ef,peak_t_proxy,static_force\n");
    for row in &rows {
        text.push_str(&format!(
            "{:.11e},{},{:.11e},{:.11e},{:.11e},{:.11e}\n",
            row.value, row.verdict, row.steady_phi, row.steady_ef, row.peak_t_proxy,
            row.static_force
        ));
    }
    fs::write(&output, text)?;
    Ok((rows, output))
}

/// Render a sweep table for the console.
pub fn format_sweep_table(axis: &str, rows: &[SweepRow]) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "{:>12}  {:>10}  {:>12}  {:>12}  {:>12}\n",
        axis, "verdict", "steady|phi|", "steady|e_f|", "peak|T|proxy"
    ));
    for row in rows {
        s.push_str(&format!(
            "{:>12.4}  {:>10}  {:>12.4e}  {:>12.4e}  {:>12.4}\n",
            row.value, row.verdict.to_string(), row.steady_phi, row.steady_ef, row.peak_t_proxy
        ));
    }
    s
}

/// Write the packaged case-study configuration files.
pub fn cmd_casestudy(out_dir: Option<&Path>) -> Result<Vec<PathBuf>> {
    let dir = out_dir
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| resolve_output(".", None));
    fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    for (name, config) in casestudy_configs() {
        let path = dir.join(name);
        fs::write(&path, config.to_json())?;
        written.push(path);
    }
    Ok(written)
}
