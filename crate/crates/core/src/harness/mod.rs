//! Suite orchestration: run configuration, the acceptance matrix, tolerance
//! overrides and report emission.

pub mod criteria;
pub mod oracles;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ellipticity::{MatrixSpec, NamedMatrix};
use crate::error::{Error, Result};
use crate::report::{sort_reports, to_csv, MarginReport};
use crate::young::FamilySpec;

/// Environment variable that overrides every output directory.
pub const OUT_DIR_ENV: &str = "ORLICZ_OUT_DIR";

/// Seed of the reference random matrix pair; independent of the run seed so
/// the reference configuration is fixed.
pub const REFERENCE_MATRIX_SEED: u64 = 20_240_601;

/// The reference families.
pub fn reference_families() -> Vec<FamilySpec> {
    vec![
        FamilySpec::PowerLaw { p: 4.0 },
        FamilySpec::ZygmundLog { r: 3.0 },
        FamilySpec::PowerSum { p: 4.0, r: 3.0, eps: 1.0 },
        FamilySpec::PowerSum { p: 4.0, r: 3.0, eps: 0.01 },
        FamilySpec::DualPowerSum { q: 1.5, r: 1.8 },
    ]
}

/// Reference matrix pairs in dimension `d`: (I, I), (e^{0.2i}I, e^{−0.2i}I)
/// and one random complex elliptic pair.
pub fn reference_pairs(d: usize) -> Vec<(&'static str, MatrixSpec, MatrixSpec)> {
    let random = |stream| MatrixSpec::Named(NamedMatrix::Random { seed: REFERENCE_MATRIX_SEED, stream, d, p: 4.0 });
    vec![
        ("identity", MatrixSpec::identity(d), MatrixSpec::identity(d)),
        ("rotation", MatrixSpec::rotation(0.2, d), MatrixSpec::rotation(-0.2, d)),
        ("random", random(0), random(1)),
    ]
}

/// Family as it appears inside check names: `power-sum:4,3,1` → `power-sum_4_3_1`.
pub fn family_label(spec: &FamilySpec) -> String {
    spec.to_string().replace([':', ','], "_")
}

/// Agreement expected between scanned extremes: power laws are exact,
/// other families approach some extremes only asymptotically and the
/// finite scan window truncates them.
pub fn scan_tolerance(spec: &FamilySpec) -> f64 {
    match spec {
        FamilySpec::PowerLaw { .. } => 1e-6,
        _ => 1e-3,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    C7,
    C8,
    C9,
    Invariants,
}

impl Criterion {
    pub const ALL: [Criterion; 10] = [
        Criterion::C1,
        Criterion::C2,
        Criterion::C3,
        Criterion::C4,
        Criterion::C5,
        Criterion::C6,
        Criterion::C7,
        Criterion::C8,
        Criterion::C9,
        Criterion::Invariants,
    ];

    pub fn title(self) -> &'static str {
        match self {
            Criterion::C1 => "characteristic quantities",
            Criterion::C2 => "constant reproduction",
            Criterion::C3 => "conjugation oracle",
            Criterion::C4 => "bellman specialization",
            Criterion::C5 => "hessian agreement",
            Criterion::C6 => "bellman bounds",
            Criterion::C7 => "semigroup oracle",
            Criterion::C8 => "end-to-end embedding",
            Criterion::C9 => "negative controls",
            Criterion::Invariants => "module invariants",
        }
    }

    pub fn run(self, cfg: &RunConfig) -> Vec<MarginReport> {
        match self {
            Criterion::C1 => criteria::c1_quantities(cfg),
            Criterion::C2 => criteria::c2_constants(cfg),
            Criterion::C3 => criteria::c3_conjugation(cfg),
            Criterion::C4 => criteria::c4_bellman(cfg),
            Criterion::C5 => criteria::c5_hessian(cfg),
            Criterion::C6 => criteria::c6_bounds(cfg),
            Criterion::C7 => criteria::c7_semigroup(cfg),
            Criterion::C8 => criteria::c8_embedding(cfg),
            Criterion::C9 => criteria::c9_negative(cfg),
            Criterion::Invariants => criteria::invariants(cfg),
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::Invariants => write!(f, "invariants"),
            c => write!(f, "c{}", *c as usize + 1),
        }
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Criterion::ALL
            .into_iter()
            .find(|c| c.to_string() == key || key.parse::<usize>().is_ok_and(|n| n == *c as usize + 1 && n <= 9))
            .ok_or_else(|| Error::Config(format!("unknown criterion '{s}' (expected 1..9, c1..c9 or invariants)")))
    }
}

/// Global run settings. Every field has a default, so `{}` is a valid config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Budget for pointwise sampled checks.
    pub samples: usize,
    /// Budget for mollified checks.
    pub mollified_samples: usize,
    pub out: Option<PathBuf>,
    /// Tolerance overrides keyed by check-name prefix; the longest matching
    /// prefix wins.
    pub tolerances: BTreeMap<String, f64>,
    pub families: Vec<FamilySpec>,
    /// Empty means all criteria.
    pub criteria: Vec<Criterion>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            samples: 100_000,
            mollified_samples: 100,
            out: None,
            tolerances: BTreeMap::new(),
            families: reference_families(),
            criteria: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn selected(&self) -> Vec<Criterion> {
        if self.criteria.is_empty() {
            Criterion::ALL.to_vec()
        } else {
            let mut c = self.criteria.clone();
            c.sort();
            c.dedup();
            c
        }
    }

    /// The environment override, then `out`, then `default`.
    pub fn out_dir(&self, default: &Path) -> PathBuf {
        out_dir(self.out.as_deref(), default)
    }
}

/// Resolves an output directory: environment override, then `explicit`,
/// then `default`.
pub fn out_dir(explicit: Option<&Path>, default: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => explicit.map(Path::to_path_buf).unwrap_or_else(|| default.to_path_buf()),
    }
}

/// Re-evaluates pass/fail under the override whose key is the longest
/// prefix of the check name.
pub fn apply_overrides(reports: &mut [MarginReport], overrides: &BTreeMap<String, f64>) {
    for r in reports {
        if let Some(tol) = overrides
            .iter()
            .filter(|(k, _)| r.check.starts_with(k.as_str()))
            .max_by_key(|(k, _)| k.len())
            .map(|(_, v)| *v)
        {
            r.tolerance = tol;
            r.pass = r.min_margin >= -tol;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionSummary {
    pub criterion: Criterion,
    pub title: &'static str,
    pub checks: usize,
    pub failed: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub samples: usize,
    pub mollified_samples: usize,
    pub total: usize,
    pub failed: usize,
    pub pass: bool,
    pub criteria: Vec<CriterionSummary>,
    pub failures: Vec<String>,
    pub reports: Vec<MarginReport>,
}

impl SuiteReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_csv(&self) -> String {
        to_csv(&self.reports)
    }
}

/// Runs the selected criteria in parallel. Failures are collected, never
/// short-circuited; reports are sorted by check name.
pub fn run_suite(cfg: &RunConfig) -> SuiteReport {
    let per: Vec<(Criterion, Vec<MarginReport>)> = cfg
        .selected()
        .into_par_iter()
        .map(|c| {
            let mut r = c.run(cfg);
            apply_overrides(&mut r, &cfg.tolerances);
            (c, r)
        })
        .collect();
    let criteria = per
        .iter()
        .map(|(c, r)| {
            let failed = r.iter().filter(|x| !x.pass).count();
            CriterionSummary { criterion: *c, title: c.title(), checks: r.len(), failed, pass: failed == 0 }
        })
        .collect();
    let mut reports: Vec<MarginReport> = per.into_iter().flat_map(|(_, r)| r).collect();
    sort_reports(&mut reports);
    let failures: Vec<String> = reports.iter().filter(|r| !r.pass).map(|r| r.check.clone()).collect();
    SuiteReport {
        seed: cfg.seed,
        samples: cfg.samples,
        mollified_samples: cfg.mollified_samples,
        total: reports.len(),
        failed: failures.len(),
        pass: failures.is_empty(),
        criteria,
        failures,
        reports,
    }
}

/// Writes `<stem>.json` and `<stem>.csv` into `dir`, creating it if needed.
pub fn write_pair(dir: &Path, stem: &str, json: &str, csv: &str) -> Result<(PathBuf, PathBuf)> {
    let io = |e: std::io::Error| Error::Config(format!("{}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let (j, c) = (dir.join(format!("{stem}.json")), dir.join(format!("{stem}.csv")));
    std::fs::write(&j, json).map_err(io)?;
    std::fs::write(&c, csv).map_err(io)?;
    Ok((j, c))
}

/// JSON and CSV for a bare list of margin reports, sorted.
pub fn reports_json_csv(mut reports: Vec<MarginReport>) -> (String, String, bool) {
    sort_reports(&mut reports);
    let pass = reports.iter().all(|r| r.pass);
    let json = serde_json::to_string_pretty(&reports).expect("report serializes") + "\n";
    (json, to_csv(&reports), pass)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criterion_parsing() {
        assert_eq!("3".parse::<Criterion>().unwrap(), Criterion::C3);
        assert_eq!("C9".parse::<Criterion>().unwrap(), Criterion::C9);
        assert_eq!("invariants".parse::<Criterion>().unwrap(), Criterion::Invariants);
        assert!("10".parse::<Criterion>().is_err());
        assert_eq!(Criterion::C7.to_string(), "c7");
    }

    #[test]
    fn config_defaults_and_rejection() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.families.len(), 5);
        let c = RunConfig::from_json(r#"{"seed": 7, "criteria": ["c1", "c2"], "families": [{"family": "power_law", "p": 3}]}"#)
            .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.selected(), vec![Criterion::C1, Criterion::C2]);
        assert!(RunConfig::from_json(r#"{"sed": 7}"#).is_err());
    }

    #[test]
    fn labels() {
        assert_eq!(family_label(&FamilySpec::PowerSum { p: 4.0, r: 3.0, eps: 0.01 }), "power-sum_4_3_0.01");
        assert_eq!(reference_pairs(1).len(), 3);
    }

    #[test]
    fn overrides_use_longest_prefix() {
        let mut r = vec![MarginReport::new("c6.x.size_bound", 1, -1e-8, vec![], 1e-9)];
        assert!(!r[0].pass);
        let mut o = BTreeMap::new();
        o.insert("c6".to_string(), 1e-12);
        o.insert("c6.x".to_string(), 1e-7);
        apply_overrides(&mut r, &o);
        assert!(r[0].pass && r[0].tolerance == 1e-7);
    }

    #[test]
    fn quick_suite_is_deterministic() {
        let cfg = RunConfig { criteria: vec![Criterion::C1, Criterion::C9], samples: 500, ..RunConfig::default() };
        let a = run_suite(&cfg);
        let b = run_suite(&cfg);
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(a.reports.windows(2).all(|w| w[0].check <= w[1].check));
    }

    #[test]
    fn bad_family_surfaces_as_named_failure() {
        let cfg = RunConfig {
            criteria: vec![Criterion::C2],
            families: vec![FamilySpec::PowerLaw { p: 1.5 }],
            ..RunConfig::default()
        };
        let s = run_suite(&cfg);
        assert!(!s.pass);
        assert!(s.failures.iter().any(|f| f.contains("power_1.5")));
    }
}
