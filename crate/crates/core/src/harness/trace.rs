use std::fmt::Write as _;

/// CSV header of a run trace.
pub const TRACE_HEADER: &str = "k,rounds,grad_norm,fval,cons_x,cons_y";

/// One recorded iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    /// Gossip rounds performed so far (`k * R`).
    pub rounds: usize,
    /// `|grad f(xbar^(k))|_2`, exact gradient.
    pub grad_norm: f64,
    /// `f(xbar^(k))`.
    pub fval: f64,
    /// `|w^(k) - 1 xbar^T|_F`.
    pub cons_x: f64,
    /// `|y^(k) - v^(k) ybar^T|_F`.
    pub cons_y: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceMeta {
    pub algorithm: String,
    pub label: String,
    pub n: usize,
    pub beta_pi: Option<f64>,
    pub kappa_pi: Option<f64>,
    pub gamma: f64,
    pub rounds_per_iter: usize,
    pub seed: u64,
    pub k_max: usize,
}

impl TraceMeta {
    /// `key=value` lines, one per field.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "na".to_string(), |x| format!("{x:?}"));
        let mut out = String::new();
        let _ = writeln!(out, "algorithm={}", self.algorithm);
        let _ = writeln!(out, "label={}", self.label);
        let _ = writeln!(out, "n={}", self.n);
        let _ = writeln!(out, "beta_pi={}", opt(self.beta_pi));
        let _ = writeln!(out, "kappa_pi={}", opt(self.kappa_pi));
        let _ = writeln!(out, "gamma={:?}", self.gamma);
        let _ = writeln!(out, "R={}", self.rounds_per_iter);
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "K={}", self.k_max);
        out
    }
}

/// Per-iteration record of one optimizer run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    pub meta: TraceMeta,
    pub rows: Vec<TraceRow>,
    /// Iteration at which the divergence guard fired, if it did.
    pub diverged_at: Option<usize>,
}

impl RunTrace {
    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    /// Total rounds `T = (K + 1) R` in the accounting used for the
    /// multi-round complexity bounds.
    pub fn total_rounds_budget(&self) -> usize {
        (self.meta.k_max + 1) * self.meta.rounds_per_iter.max(1)
    }

    /// First recorded row whose gradient norm is at most `threshold`.
    pub fn first_below(&self, threshold: f64) -> Option<&TraceRow> {
        self.rows.iter().find(|r| r.grad_norm <= threshold)
    }

    /// CSV body with the mandatory header row, `.` decimals and LF endings.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:?},{:?},{:?},{:?}",
                r.k, r.rounds, r.grad_norm, r.fval, r.cons_x, r.cons_y
            );
        }
        out
    }

    /// `key=value` metadata lines.
    pub fn meta_text(&self) -> String {
        let mut out = self.meta.to_text();
        let _ = writeln!(out, "T={}", self.total_rounds_budget());
        let _ = writeln!(
            out,
            "diverged={}",
            self.diverged_at.map_or_else(|| "no".to_string(), |k| k.to_string())
        );
        out
    }

    /// Parses a CSV body written by [`RunTrace::to_csv`].
    pub fn rows_from_csv(text: &str) -> crate::Result<Vec<TraceRow>> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h == TRACE_HEADER => {}
            other => {
                return Err(crate::Error::Parse {
                    line: 1,
                    msg: format!("expected header `{TRACE_HEADER}`, got {other:?}"),
                })
            }
        }
        lines
            .enumerate()
            .map(|(i, line)| {
                let bad = |msg: String| crate::Error::Parse { line: i + 2, msg };
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 6 {
                    return Err(bad(format!("expected 6 fields, got {}", f.len())));
                }
                let u = |s: &str| s.parse::<usize>().map_err(|e| bad(e.to_string()));
                let x = |s: &str| s.parse::<f64>().map_err(|e| bad(e.to_string()));
                Ok(TraceRow {
                    k: u(f[0])?,
                    rounds: u(f[1])?,
                    grad_norm: x(f[2])?,
                    fval: x(f[3])?,
                    cons_x: x(f[4])?,
                    cons_y: x(f[5])?,
                })
            })
            .collect()
    }
}
