//! Time-stamped record of all state, force, and error channels, with CSV
//! export.

use std::io::{self, Write};

use nalgebra::DVector;

/// One run's channel record on a constant time base.
///
/// Channel dimensions: joint channels are `n` (emulating) or `m` (target)
/// wide, task channels `n`, the self-motion channel `m - n`. The emulation
/// channels (`q_r`, `λ`, `e_p`, ... ) are absent in direct-oracle traces and
/// exported as empty CSV cells.
#[derive(Debug, Clone)]
pub struct SimTrace {
    pub step: f64,
    pub n: usize,
    pub m: usize,
    pub xi_dim: usize,
    /// False for direct-oracle runs.
    pub emulation_channels: bool,

    pub time: Vec<f64>,
    pub q_r: Vec<DVector<f64>>,
    pub qd_r: Vec<DVector<f64>>,
    pub q_s: Vec<DVector<f64>>,
    pub qd_s: Vec<DVector<f64>>,
    pub xi: Vec<DVector<f64>>,
    pub p_r: Vec<DVector<f64>>,
    pub p_s: Vec<DVector<f64>>,
    pub phi: Vec<DVector<f64>>,
    pub f: Vec<DVector<f64>>,
    pub f_a: Vec<DVector<f64>>,
    pub lambda: Vec<DVector<f64>>,
    pub e_p: Vec<DVector<f64>>,
    pub e_f: Vec<DVector<f64>>,
    pub tau_s: Vec<DVector<f64>>,
    pub tau_r_cmd: Vec<DVector<f64>>,
    pub tau_r: Vec<DVector<f64>>,
}

impl SimTrace {
    pub fn new(step: f64, n: usize, m: usize, emulation_channels: bool) -> Self {
        SimTrace {
            step,
            n,
            m,
            xi_dim: m - n,
            emulation_channels,
            time: Vec::new(),
            q_r: Vec::new(),
            qd_r: Vec::new(),
            q_s: Vec::new(),
            qd_s: Vec::new(),
            xi: Vec::new(),
            p_r: Vec::new(),
            p_s: Vec::new(),
            phi: Vec::new(),
            f: Vec::new(),
            f_a: Vec::new(),
            lambda: Vec::new(),
            e_p: Vec::new(),
            e_f: Vec::new(),
            tau_s: Vec::new(),
            tau_r_cmd: Vec::new(),
            tau_r: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    /// The fixed column list: `t` then each channel expanded per dimension
    /// with a 1-based suffix.
    pub fn header_columns(n: usize, m: usize) -> Vec<String> {
        let xi = m - n;
        let mut cols = vec!["t".to_string()];
        let mut push = |name: &str, dim: usize| {
            let mut v: Vec<String> = (1..=dim).map(|i| format!("{name}{i}")).collect();
            cols.append(&mut v);
        };
        push("q_r", n);
        push("qd_r", n);
        push("q_s", m);
        push("qd_s", m);
        push("xi", xi);
        push("p_r", n);
        push("p_s", n);
        push("phi", n);
        push("f", n);
        push("f_a", n);
        push("lambda", n);
        push("e_p", n);
        push("e_f", n);
        push("tau_s", n);
        push("tau_r_cmd", n);
        push("tau_r", n);
        cols
    }

    /// Write the trace as CSV: `#`-prefixed header comments, the fixed header
    /// row, then one row per step with 12-significant-digit numbers.
    /// Oracle traces leave the emulation columns empty.
    pub fn write_csv<W: Write>(&self, out: &mut W, comments: &[String]) -> io::Result<()> {
        let mut w = io::BufWriter::new(out);
        for line in comments {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "{}", Self::header_columns(self.n, self.m).join(","))?;

        let mut row: Vec<String> = Vec::with_capacity(2 + 10 * self.n + 2 * self.m);
        for k in 0..self.len() {
            row.clear();
            row.push(fmt(self.time[k]));
            let emu = self.emulation_channels;
            push_vec(&mut row, &self.q_r, k, self.n, emu);
            push_vec(&mut row, &self.qd_r, k, self.n, emu);
            push_vec(&mut row, &self.q_s, k, self.m, true);
            push_vec(&mut row, &self.qd_s, k, self.m, true);
            push_vec(&mut row, &self.xi, k, self.xi_dim, true);
            push_vec(&mut row, &self.p_r, k, self.n, emu);
            push_vec(&mut row, &self.p_s, k, self.n, true);
            push_vec(&mut row, &self.phi, k, self.n, emu);
            push_vec(&mut row, &self.f, k, self.n, true);
            push_vec(&mut row, &self.f_a, k, self.n, true);
            push_vec(&mut row, &self.lambda, k, self.n, emu);
            push_vec(&mut row, &self.e_p, k, self.n, emu);
            push_vec(&mut row, &self.e_f, k, self.n, emu);
            push_vec(&mut row, &self.tau_s, k, self.n, true);
            push_vec(&mut row, &self.tau_r_cmd, k, self.n, emu);
            push_vec(&mut row, &self.tau_r, k, self.n, emu);
            writeln!(w, "{}", row.join(","))?;
        }
        w.flush()
    }

    /// Maximum `‖·‖` of a channel over an index window.
    pub fn max_norm(channel: &[DVector<f64>], from: usize) -> f64 {
        channel[from..]
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    /// RMS of the norm of the difference of two equally sampled channels.
    pub fn rms_diff(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
        assert_eq!(a.len(), b.len());
        let sum: f64 = a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm_squared())
            .sum();
        (sum / a.len() as f64).sqrt()
    }

    /// Index of the first sample at or after time `t`.
    pub fn index_at(&self, t: f64) -> usize {
        ((t / self.step).ceil() as usize).min(self.len().saturating_sub(1))
    }
}

fn fmt(x: f64) -> String {
    // 12 significant digits.
    format!("{x:.11e}")
}

fn push_vec(row: &mut Vec<String>, channel: &[DVector<f64>], k: usize, dim: usize, present: bool) {
    if present && !channel.is_empty() {
        let v = &channel[k];
        for i in 0..dim {
            row.push(fmt(v[i]));
        }
    } else {
        for _ in 0..dim {
            row.push(String::new());
        }
    }
}
