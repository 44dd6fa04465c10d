//! Margin reports and the deterministic parallel sweep that produces them.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::sampling::sample_rng;

/// Outcome of one sampled inequality check. `pass ⇔ min_margin ≥ −tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginReport {
    pub check: String,
    pub samples: usize,
    pub min_margin: f64,
    /// Coordinates of the worst sample; for Bellman checks `(Re u, Im u, Re v, Im v)`.
    pub argmin: Vec<f64>,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl MarginReport {
    pub fn new(check: impl Into<String>, samples: usize, min_margin: f64, argmin: Vec<f64>, tolerance: f64) -> Self {
        Self {
            check: check.into(),
            samples,
            min_margin,
            argmin,
            tolerance,
            pass: min_margin >= -tolerance,
            note: None,
        }
    }

    /// A check that could not run; always a failure.
    pub fn failed(check: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            check: check.into(),
            samples: 0,
            min_margin: f64::NAN,
            argmin: Vec::new(),
            tolerance: 0.0,
            pass: false,
            note: Some(reason.into()),
        }
    }

    /// Boolean check with no natural margin.
    pub fn verdict(check: impl Into<String>, pass: bool, note: impl Into<String>) -> Self {
        Self {
            check: check.into(),
            samples: 1,
            min_margin: if pass { 0.0 } else { -1.0 },
            argmin: Vec::new(),
            tolerance: 0.0,
            pass,
            note: Some(note.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub const CSV_HEADER: &'static str = "check,samples,min_margin,argmin_u,argmin_v,tolerance,pass";

    pub fn csv_row(&self) -> String {
        let (u, v) = if self.argmin.len() == 4 {
            (
                format!("{:e}{:+e}i", self.argmin[0], self.argmin[1]),
                format!("{:e}{:+e}i", self.argmin[2], self.argmin[3]),
            )
        } else {
            (
                self.argmin.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(";"),
                String::new(),
            )
        };
        format!(
            "{},{},{:e},{},{},{:e},{}",
            self.check, self.samples, self.min_margin, u, v, self.tolerance, self.pass
        )
    }
}

/// Writes reports as CSV, one row per report.
pub fn to_csv(reports: &[MarginReport]) -> String {
    let mut out = String::from(MarginReport::CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Sorts by check name so emission order never depends on scheduling.
pub fn sort_reports(reports: &mut [MarginReport]) {
    reports.sort_by(|a, b| a.check.cmp(&b.check));
}

/// One evaluated sample of a sweep.
#[derive(Debug, Clone, Copy)]
pub enum Sample {
    /// Counted towards the main minimum.
    Regular { margin: f64, at: [f64; 4] },
    /// Inside the exclusion layer around a singular set; tracked separately.
    Near { margin: f64, at: [f64; 4] },
    /// Not applicable (e.g. on a coordinate plane).
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extreme {
    pub count: usize,
    pub min: f64,
    pub at: [f64; 4],
}

impl Extreme {
    fn empty() -> Self {
        Self { count: 0, min: f64::INFINITY, at: [f64::NAN; 4] }
    }

    fn push(&mut self, margin: f64, at: [f64; 4]) {
        self.count += 1;
        // NaN poisons the minimum so it is never hidden
        if margin < self.min || margin.is_nan() && !self.min.is_nan() {
            self.min = margin;
            self.at = at;
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Sweep {
    pub regular: Extreme,
    pub near: Extreme,
}

/// Evaluates `f(index, rng)` for every index in parallel with a per-index
/// random stream and reduces sequentially in index order.
pub fn sweep<F>(samples: usize, seed: u64, f: F) -> Sweep
where
    F: Fn(u64, &mut ChaCha8Rng) -> Sample + Sync,
{
    let results: Vec<Sample> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_rng(seed, i);
            f(i, &mut rng)
        })
        .collect();
    let mut out = Sweep { regular: Extreme::empty(), near: Extreme::empty() };
    for s in results {
        match s {
            Sample::Regular { margin, at } => out.regular.push(margin, at),
            Sample::Near { margin, at } => out.near.push(margin, at),
            Sample::Skip => {}
        }
    }
    out
}

impl Sweep {
    /// Report for the main minimum. Empty sweeps report a zero margin.
    pub fn report(&self, check: impl Into<String>, tolerance: f64) -> MarginReport {
        let e = &self.regular;
        let min = if e.count == 0 { 0.0 } else { e.min };
        MarginReport::new(check, e.count, min, e.at.to_vec(), tolerance)
    }

    /// Report for the samples that fell inside the exclusion layer.
    pub fn near_report(&self, check: impl Into<String>, tolerance: f64) -> MarginReport {
        let e = &self.near;
        let min = if e.count == 0 { 0.0 } else { e.min };
        MarginReport::new(check, e.count, min, e.at.to_vec(), tolerance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn pass_rule() {
        assert!(MarginReport::new("a", 1, -1e-10, vec![], 1e-9).pass);
        assert!(!MarginReport::new("a", 1, -1e-8, vec![], 1e-9).pass);
        assert!(!MarginReport::new("a", 1, f64::NAN, vec![], 1e-9).pass);
    }

    #[test]
    fn sweep_is_deterministic() {
        let f = |i: u64, rng: &mut ChaCha8Rng| {
            let x: f64 = rng.random();
            if i % 7 == 0 {
                Sample::Near { margin: x, at: [x, 0.0, 0.0, 0.0] }
            } else {
                Sample::Regular { margin: x, at: [x, 0.0, 0.0, 0.0] }
            }
        };
        let a = sweep(10_000, 3, f);
        let b = sweep(10_000, 3, f);
        assert_eq!(a.regular, b.regular);
        assert_eq!(a.near.count, 10_000 / 7 + 1);
        assert_eq!(a.regular.at[0], a.regular.min);
    }

    #[test]
    fn csv_layout() {
        let r = MarginReport::new("bound", 3, 0.5, vec![1.0, 0.0, 2.0, -1.0], 0.0);
        let row = r.csv_row();
        assert_eq!(row.split(',').count(), MarginReport::CSV_HEADER.split(',').count());
        assert!(row.starts_with("bound,3,5e-1,1e0+0e0i,2e0-1e0i"));
    }
}
