//! Machine-readable design report (`topoforge-report/1`).

use serde::{Deserialize, Serialize};

use crate::simplify::ComponentGraph;

pub const REPORT_VERSION: &str = "topoforge-report/1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentCounts {
    pub resistors: usize,
    pub inductors: usize,
    pub capacitors: usize,
}

impl ComponentCounts {
    pub fn of(graph: &ComponentGraph) -> ComponentCounts {
        let (resistors, inductors, capacitors) = graph.component_counts();
        ComponentCounts {
            resistors,
            inductors,
            capacitors,
        }
    }

    pub fn total(&self) -> usize {
        self.resistors + self.inductors + self.capacitors
    }
}

/// One independent run inside a design invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_cost: Option<f64>,
    /// Paths relative to the report file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub netlist: Option<String>,
    pub wall_seconds: f64,
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BestDesign {
    pub requirements_cost: f64,
    pub component_counts: ComponentCounts,
    pub netlist: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignReport {
    pub version: String,
    pub algorithm: String,
    /// Echo of the fully resolved run configuration.
    pub config: serde_json::Value,
    pub runs: Vec<RunRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_run: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best: Option<BestDesign>,
    pub total_wall_seconds: f64,
}

impl DesignReport {
    pub fn new(algorithm: &str, config: serde_json::Value) -> DesignReport {
        DesignReport {
            version: REPORT_VERSION.to_string(),
            algorithm: algorithm.to_string(),
            config,
            runs: Vec::new(),
            best_run: None,
            best: None,
            total_wall_seconds: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.version != REPORT_VERSION {
            return Err(format!(
                "unsupported report version {:?}, expected {REPORT_VERSION:?}",
                self.version
            ));
        }
        if let Some(best) = self.best_run {
            if best >= self.runs.len() {
                return Err(format!("best_run {best} out of range"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_round_trip_and_validation() {
        let mut report = DesignReport::new("relax", serde_json::json!({"runs": 2}));
        report.runs.push(RunRecord {
            run: 0,
            seed: 42,
            final_cost: Some(1e-7),
            trace_csv: Some("run0.trace.csv".into()),
            netlist: Some("run0.netlist.json".into()),
            wall_seconds: 1.5,
            failed: false,
            error: None,
        });
        report.best_run = Some(0);
        report.validate().unwrap();
        let json = serde_json::to_string_pretty(&report).unwrap();
        let back: DesignReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);

        let mut bad = report.clone();
        bad.best_run = Some(9);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let report = DesignReport::new("search", serde_json::json!({}));
        let mut value = serde_json::to_value(&report).unwrap();
        value["unexpected"] = serde_json::json!(true);
        assert!(serde_json::from_value::<DesignReport>(value).is_err());
    }
}
