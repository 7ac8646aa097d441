//! Interior-point cost orders per inner iteration, instantiated for a config.

use crate::model::{Mode, SystemConfig};
use crate::optimizer::{RunTrace, Variant};
use serde::Serialize;
use std::fmt;

#[derive(Debug, Clone, Serialize)]
pub struct ComplexityRow {
    /// Step within an outer iteration: 3 (node), 6 (waveforms) or 8 (time split).
    pub step: u8,
    pub label: String,
    pub formula: String,
    pub base: u64,
    pub exponent: f64,
    /// Measured mean wall time per subproblem solve, when a trace is given.
    pub measured_ms: Option<f64>,
}

impl ComplexityRow {
    pub fn order(&self) -> f64 {
        (self.base as f64).powf(self.exponent)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComplexityReport {
    pub mode: Mode,
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub rows: Vec<ComplexityRow>,
}

/// Cone-dimension base of the node step for a variant. `None` for
/// baseline 2, which has no node subproblem.
pub fn node_step_base(
    mode: Mode,
    variant: Variant,
    k: usize,
    n: usize,
    m: usize,
) -> Option<(u64, &'static str)> {
    let (k, n, m) = (k as u64, n as u64, m as u64);
    match (mode, variant) {
        (_, Variant::Baseline2) => None,
        (Mode::Relay, Variant::TStatic) => {
            Some((n * m * m * (1 + n) * (1 + 2 * k), "N M^2 (1+N)(1+2K)"))
        }
        (Mode::Relay, Variant::TFStatic) => Some((2 * m * m * (1 + 2 * k), "2 M^2 (1+2K)")),
        (Mode::Relay, _) => Some((2 * n * m * m * (1 + 2 * n) * (1 + k), "2 N M^2 (1+2N)(1+K)")),
        (Mode::ActiveIrs, Variant::TStatic) => Some((2 * m * (n + 2 * k + 1), "2 M (N+2K+1)")),
        (Mode::ActiveIrs, Variant::TFStatic) => None,
        (Mode::ActiveIrs, _) => Some((6 * m * (n + k + 1), "6 M (N+K+1)")),
    }
}

pub fn waveform_step_base(k: usize, n: usize) -> u64 {
    let (k, n) = (k as u64, n as u64);
    k * n * (1 + 2 * n) * (5 + 2 * k)
}

fn mean_ms(trace: &RunTrace, node: bool) -> Option<f64> {
    let (ms, count) = trace.outer.iter().fold((0.0, 0usize), |(ms, c), o| {
        let st = if node { &o.matrices } else { &o.waveforms };
        (ms + st.wall_ms, c + st.subproblems)
    });
    (count > 0).then(|| ms / count as f64)
}

/// Orders for every variant available in the mode. `measured` pairs a
/// variant with a trace whose step timings fill `measured_ms`.
pub fn complexity_report(
    cfg: &SystemConfig,
    measured: &[(Variant, &RunTrace)],
) -> ComplexityReport {
    let (k, n, m) = (cfg.k, cfg.n, cfg.m);
    let timing = |v: Variant, node: bool| {
        measured
            .iter()
            .find(|(w, _)| *w == v)
            .and_then(|(_, t)| mean_ms(t, node))
    };
    let mut rows = Vec::new();
    for v in Variant::ALL {
        if let Some((base, formula)) = node_step_base(cfg.mode, v, k, n, m) {
            rows.push(ComplexityRow {
                step: 3,
                label: v.name().to_string(),
                formula: formula.to_string(),
                base,
                exponent: 3.5,
                measured_ms: timing(v, true),
            });
        }
    }
    rows.push(ComplexityRow {
        step: 6,
        label: "all".into(),
        formula: "K N (1+2N)(5+2K)".into(),
        base: waveform_step_base(k, n),
        exponent: 3.5,
        measured_ms: timing(Variant::Full, false),
    });
    rows.push(ComplexityRow {
        step: 8,
        label: "all".into(),
        formula: "N".into(),
        base: n as u64,
        exponent: 3.0,
        measured_ms: None,
    });
    ComplexityReport {
        mode: cfg.mode,
        k,
        n,
        m,
        rows,
    }
}

impl fmt::Display for ComplexityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "mode {:?}, K={}, N={}, M={}",
            self.mode, self.k, self.n, self.m
        )?;
        writeln!(
            f,
            "{:<5} {:<11} {:<24} {:>12} {:>12} {:>12}",
            "step", "variant", "base", "value", "order", "ms/solve"
        )?;
        for r in &self.rows {
            let ms = r
                .measured_ms
                .map(|v| format!("{v:.2}"))
                .unwrap_or_else(|| "-".into());
            writeln!(
                f,
                "{:<5} {:<11} {:<24} {:>12} {:>12.3e} {:>12}",
                r.step,
                r.label,
                format!("({})^{}", r.formula, r.exponent),
                r.base,
                r.order(),
                ms
            )?;
        }
        Ok(())
    }
}
