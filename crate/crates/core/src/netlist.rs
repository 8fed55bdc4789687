//! File interchange: netlist JSON (`topoforge-netlist/1`) and waveform CSV
//! (`t,v` header, one row per sample).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{
    Boundary, DesignModel, EdgeState, GridDims, MetaTopology, ModelError, NodeId, SourceSpec,
    TopoEdge,
};
use crate::sim::Waveform;

pub const NETLIST_VERSION: &str = "topoforge-netlist/1";

#[derive(Debug, thiserror::Error)]
pub enum NetlistError {
    #[error("unsupported netlist version {found:?}, expected {NETLIST_VERSION:?}")]
    Version { found: String },
    #[error("malformed waveform csv: {0}")]
    WaveformFormat(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Sim(#[from] crate::sim::SimError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetlistEdge {
    pub id: usize,
    pub a: NodeId,
    pub b: NodeId,
    pub state: EdgeState,
}

/// On-disk form of a design model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetlistFile {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridDims>,
    pub nodes: Vec<NodeId>,
    pub edges: Vec<NetlistEdge>,
    pub boundary: Boundary,
    pub source: SourceSpec,
    pub load_resistance: f64,
    pub epsilon: f64,
}

impl NetlistFile {
    pub fn from_model(model: &DesignModel) -> NetlistFile {
        NetlistFile {
            version: NETLIST_VERSION.to_string(),
            grid: model.topology.grid,
            nodes: model.topology.nodes.clone(),
            edges: model
                .topology
                .edges
                .iter()
                .map(|e| NetlistEdge {
                    id: e.id,
                    a: e.a,
                    b: e.b,
                    state: model.edge_states[&e.id],
                })
                .collect(),
            boundary: model.topology.boundary,
            source: model.source.clone(),
            load_resistance: model.load_resistance,
            epsilon: model.epsilon,
        }
    }

    pub fn into_model(self) -> Result<DesignModel, NetlistError> {
        if self.version != NETLIST_VERSION {
            return Err(NetlistError::Version {
                found: self.version,
            });
        }
        let topology = MetaTopology {
            grid: self.grid,
            nodes: self.nodes,
            edges: self
                .edges
                .iter()
                .map(|e| TopoEdge {
                    id: e.id,
                    a: e.a,
                    b: e.b,
                })
                .collect(),
            boundary: self.boundary,
        };
        let edge_states = self.edges.iter().map(|e| (e.id, e.state)).collect();
        Ok(DesignModel::new(
            topology,
            edge_states,
            self.source,
            self.load_resistance,
            self.epsilon,
        )?)
    }
}

pub fn write_netlist(model: &DesignModel, path: &Path) -> Result<(), NetlistError> {
    let file = NetlistFile::from_model(model);
    fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn read_netlist(path: &Path) -> Result<DesignModel, NetlistError> {
    let text = fs::read_to_string(path)?;
    let file: NetlistFile = serde_json::from_str(&text)?;
    file.into_model()
}

/// Waveform CSV: header `t,v`, decimal point, shortest round-trip floats.
pub fn waveform_to_csv(wave: &Waveform) -> String {
    let mut out = String::from("t,v\n");
    for (k, v) in wave.samples.iter().enumerate() {
        let t = wave.t0 + k as f64 * wave.dt;
        out.push_str(&format!("{t},{v}\n"));
    }
    out
}

pub fn write_waveform_csv(wave: &Waveform, path: &Path) -> Result<(), NetlistError> {
    fs::write(path, waveform_to_csv(wave))?;
    Ok(())
}

/// Parse a waveform CSV, inferring `t0` and `dt` from the time column and
/// rejecting non-uniform spacing.
pub fn waveform_from_csv(text: &str) -> Result<Waveform, NetlistError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| NetlistError::WaveformFormat("empty file".into()))?;
    if header.trim() != "t,v" {
        return Err(NetlistError::WaveformFormat(format!(
            "expected header 't,v', found {header:?}"
        )));
    }
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (t, v) = line
            .split_once(',')
            .ok_or_else(|| NetlistError::WaveformFormat(format!("line {}: no comma", lineno + 2)))?;
        let parse = |s: &str| -> Result<f64, NetlistError> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| NetlistError::WaveformFormat(format!("line {}: {e}", lineno + 2)))
        };
        times.push(parse(t)?);
        samples.push(parse(v)?);
    }
    if samples.len() < 2 {
        return Err(NetlistError::WaveformFormat(
            "need at least 2 samples".into(),
        ));
    }
    let t0 = times[0];
    let dt = (times[times.len() - 1] - t0) / (times.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(NetlistError::WaveformFormat(format!("non-positive dt {dt}")));
    }
    for (k, t) in times.iter().enumerate() {
        let expected = t0 + k as f64 * dt;
        if (t - expected).abs() > 1e-6 * dt {
            return Err(NetlistError::WaveformFormat(format!(
                "non-uniform spacing at row {k}: t = {t}, expected {expected}"
            )));
        }
    }
    Ok(Waveform::new(t0, dt, samples)?)
}

pub fn read_waveform_csv(path: &Path) -> Result<Waveform, NetlistError> {
    waveform_from_csv(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_grid, ParamBounds, DEFAULT_EPSILON};
    use proptest::prelude::*;

    fn sample_model(seed: u64) -> DesignModel {
        DesignModel::sample_random(
            generate_grid(2, 3).unwrap(),
            SourceSpec::Step { amplitude: 1.0 },
            50.0,
            DEFAULT_EPSILON,
            seed,
            &ParamBounds::default(),
        )
    }

    #[test]
    fn netlist_json_round_trip() {
        let model = sample_model(4);
        let json = serde_json::to_string(&NetlistFile::from_model(&model)).unwrap();
        let back: NetlistFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_model().unwrap(), model);
    }

    #[test]
    fn relaxed_states_round_trip() {
        let model = DesignModel::relaxed_init(
            generate_grid(1, 2).unwrap(),
            SourceSpec::Step { amplitude: 1.0 },
            50.0,
            DEFAULT_EPSILON,
            1,
            &ParamBounds::default(),
        );
        let json = serde_json::to_string(&NetlistFile::from_model(&model)).unwrap();
        let back: NetlistFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_model().unwrap(), model);
    }

    #[test]
    fn version_is_enforced() {
        let mut file = NetlistFile::from_model(&sample_model(0));
        file.version = "topoforge-netlist/99".into();
        assert!(matches!(
            file.into_model(),
            Err(NetlistError::Version { .. })
        ));
    }

    #[test]
    fn unknown_keys_rejected() {
        let model = sample_model(0);
        let mut value = serde_json::to_value(NetlistFile::from_model(&model)).unwrap();
        value["surprise"] = serde_json::json!(1);
        assert!(serde_json::from_value::<NetlistFile>(value).is_err());
    }

    #[test]
    fn waveform_csv_round_trip() {
        let wave = Waveform::new(1e-5, 1e-5, vec![0.0, 0.25, 0.5, 0.625]).unwrap();
        let csv = waveform_to_csv(&wave);
        assert!(csv.starts_with("t,v\n"));
        let back = waveform_from_csv(&csv).unwrap();
        assert_eq!(back, wave);
    }

    #[test]
    fn waveform_csv_rejects_bad_input() {
        assert!(waveform_from_csv("x,y\n0,0\n1,1\n").is_err());
        assert!(waveform_from_csv("t,v\n0,0\n").is_err());
        assert!(waveform_from_csv("t,v\n0,0\n1,1\n5,2\n").is_err());
    }

    proptest! {
        #[test]
        fn waveform_round_trip_any_samples(
            t0 in 0.0f64..1.0,
            dt in 1e-6f64..1e-2,
            samples in proptest::collection::vec(-10.0f64..10.0, 2..50)
        ) {
            let wave = Waveform::new(t0, dt, samples).unwrap();
            let back = waveform_from_csv(&waveform_to_csv(&wave)).unwrap();
            prop_assert_eq!(back.samples, wave.samples);
            prop_assert!((back.t0 - wave.t0).abs() <= 1e-12 * wave.t0.abs().max(1.0));
        }
    }
}
