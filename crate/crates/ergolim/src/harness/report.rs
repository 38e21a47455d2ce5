//! Experiment reports: a versioned JSON document that echoes the
//! configuration, carries the per-kind numeric results, and attaches a
//! verdict list in which every pass/fail is accompanied by the number
//! it was derived from. Summary tables are additionally emitted as
//! CSV.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::estimators::{ConditionReport, VarianceEstimate};
use crate::measures::MixingFit;

pub const SCHEMA_VERSION: u32 = 1;

/// One acceptance-style check with its numeric evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    /// The observed quantity the verdict was decided on.
    pub observed: f64,
    /// Human-readable criterion, e.g. "p > 0.01".
    pub criterion: String,
}

impl Verdict {
    pub fn new(name: &str, pass: bool, observed: f64, criterion: impl Into<String>) -> Self {
        Verdict {
            name: name.into(),
            pass,
            observed,
            criterion: criterion.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaFailure {
    pub replica: u64,
    pub error: String,
}

/// Wall-clock and work accounting. `wall_ms` is excluded from
/// byte-identity comparisons; `steps` is deterministic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_ms: u64,
    pub steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltResults {
    pub k: u64,
    /// The spatially coupled step τ^{α₂/α₁} (informational; the model
    /// table's explicit resolution takes precedence).
    pub h_coupled: f64,
    pub mu_f: f64,
    pub mu_f_source: String,
    pub v2_null: f64,
    pub v2_source: String,
    pub sample_variance: f64,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    pub condition: ConditionReport,
    pub variance_estimates: Vec<VarianceEstimate>,
    pub statistics: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlnResults {
    /// (k, mean over replicas of S_k/k).
    pub means: Vec<(u64, f64)>,
    /// (t_k, MSE against the reference) when a reference exists.
    pub mse: Vec<(f64, f64)>,
    pub reference: f64,
    pub reference_source: String,
    pub rate_slope: Option<f64>,
    pub rate_r_squared: Option<f64>,
    /// |second-half mean − first-half mean| / |overall mean|.
    pub stability_drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantLevel {
    pub tau: f64,
    pub w2_vs_exact: Option<f64>,
    pub second_moment: f64,
    pub analytic_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantResults {
    pub levels: Vec<InvariantLevel>,
    pub w2_slope: Option<f64>,
    pub analytic_slope: Option<f64>,
    pub monotone: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingResults {
    pub fit: MixingFit,
    pub excluded_pairs: Vec<usize>,
    /// Thinned decay table (t, normalized RMS distance) for the CSV.
    pub table: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderResults {
    pub per_tau: Vec<(f64, f64)>,
    pub slope: Option<f64>,
    pub r_squared: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionsResults {
    pub moment: Option<crate::assumptions::MomentReport>,
    pub contraction_fit: Option<MixingFit>,
    pub contraction_pass: Option<bool>,
    pub order: Option<OrderResults>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentResults {
    Clt(CltResults),
    Lln(LlnResults),
    Invariant(InvariantResults),
    Mixing(MixingResults),
    Order(OrderResults),
    Assumptions(AssumptionsResults),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    /// Full configuration echo (section → key → printed value).
    pub config: BTreeMap<String, BTreeMap<String, String>>,
    pub seed: u64,
    pub replicas: u64,
    pub results: ExperimentResults,
    pub verdicts: Vec<Verdict>,
    pub failures: Vec<ReplicaFailure>,
    pub pass: bool,
    pub timing: Timing,
}

impl Report {
    /// All verdicts pass and at most 1% of replicas failed.
    pub fn compute_pass(verdicts: &[Verdict], failures: usize, replicas: u64) -> bool {
        verdicts.iter().all(|v| v.pass) && (failures as f64) <= 0.01 * replicas.max(1) as f64
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Report, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// JSON with the wall-clock field zeroed: byte-identical across
    /// runs of the same configuration at any parallelism.
    pub fn canonical_json(&self) -> String {
        let mut clone = self.clone();
        clone.timing.wall_ms = 0;
        clone.to_json()
    }

    pub fn write_json(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    /// Kind-appropriate summary CSV: one row per replica statistic,
    /// grid point, τ level, or table entry.
    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        let mut w = std::fs::File::create(path)?;
        match &self.results {
            ExperimentResults::Clt(r) => {
                writeln!(w, "replica,statistic")?;
                for (i, s) in r.statistics.iter().enumerate() {
                    writeln!(w, "{i},{s}")?;
                }
            }
            ExperimentResults::Lln(r) => {
                writeln!(w, "k,mean,mse")?;
                for (i, (k, m)) in r.means.iter().enumerate() {
                    let mse = r.mse.get(i).map(|&(_, e)| e).unwrap_or(f64::NAN);
                    writeln!(w, "{k},{m},{mse}")?;
                }
            }
            ExperimentResults::Invariant(r) => {
                writeln!(w, "tau,w2,second_moment,analytic_gap")?;
                for level in &r.levels {
                    writeln!(
                        w,
                        "{},{},{},{}",
                        level.tau,
                        level.w2_vs_exact.unwrap_or(f64::NAN),
                        level.second_moment,
                        level.analytic_gap.unwrap_or(f64::NAN)
                    )?;
                }
            }
            ExperimentResults::Mixing(r) => {
                writeln!(w, "t,distance")?;
                for (t, d) in &r.table {
                    writeln!(w, "{t},{d}")?;
                }
            }
            ExperimentResults::Order(r) => {
                writeln!(w, "tau,error")?;
                for (t, e) in &r.per_tau {
                    writeln!(w, "{t},{e}")?;
                }
            }
            ExperimentResults::Assumptions(r) => {
                writeln!(w, "check,pass")?;
                if let Some(m) = &r.moment {
                    writeln!(w, "moment,{}", m.pass)?;
                }
                if let Some(p) = r.contraction_pass {
                    writeln!(w, "contraction,{p}")?;
                }
                if let Some(o) = &r.order {
                    writeln!(w, "order,{}", o.slope.is_some())?;
                }
            }
        }
        Ok(())
    }
}
