//! File formats.
//!
//! * Snapshots: JSON lines, one record per chart and time,
//!   `{t, flow, chart_id, valence, shape, n, tube, config_hash, data}`; `data` is
//!   row-major with the component index slowest. Floats are written in shortest
//!   round-trip form, so reading a file back reproduces the states bit for bit.
//! * Translation descriptor (JSON):
//!   `{center_chart, center_point, epsilon0, r, lambda, mu, t0, time_radius}`.
//! * CSV: a `# config_hash: ...` comment line, a header, shortest round-trip floats.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use geoflow_core::grid::Grid;
use geoflow_core::timestepping::{Trajectory, TrajectoryMeta};
use serde::{Deserialize, Serialize};

use crate::LabError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub t: f64,
    pub flow: String,
    pub chart_id: usize,
    pub valence: [usize; 2],
    /// `[components, n]` on the circle, `[components, n, n]` on the torus.
    pub shape: Vec<usize>,
    pub n: usize,
    /// Tubular radius of graph flows (absent for metrics).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tube: Option<f64>,
    pub config_hash: String,
    pub data: Vec<f64>,
}

impl SnapshotRecord {
    pub fn dim(&self) -> usize {
        self.shape.len() - 1
    }

    pub fn components(&self) -> usize {
        self.shape[0]
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> LabError {
    LabError::Io(format!("{}: {e}", path.display()))
}

/// Writes every stored state of `traj`.
pub fn write_trajectory(path: &Path, traj: &Trajectory, tube: Option<f64>, config_hash: &str) -> Result<(), LabError> {
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    let meta = &traj.meta;
    let n = meta.grid.n();
    let mut shape = vec![meta.components, n];
    if meta.grid.dim() == 2 {
        shape.push(n);
    }
    for (t, s) in traj.times().iter().zip(traj.states()) {
        let rec = SnapshotRecord {
            t: *t,
            flow: meta.flow.clone(),
            chart_id: 0,
            valence: meta.valence,
            shape: shape.clone(),
            n,
            tube,
            config_hash: config_hash.into(),
            data: s.clone(),
        };
        serde_json::to_writer(&mut w, &rec).map_err(|e| io_err(path, e))?;
        w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_snapshots(path: &Path) -> Result<Vec<SnapshotRecord>, LabError> {
    let f = File::open(path).map_err(|e| LabError::Usage(format!("cannot open {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SnapshotRecord = serde_json::from_str(&line)
            .map_err(|e| LabError::Usage(format!("{}:{}: invalid snapshot record: {e}", path.display(), i + 1)))?;
        let expected: usize = rec.shape.iter().product();
        if rec.data.len() != expected || !(2..=3).contains(&rec.shape.len()) || rec.shape[1..].iter().any(|&s| s != rec.n)
        {
            return Err(LabError::Usage(format!(
                "{}:{}: data length {} does not match shape {:?}",
                path.display(),
                i + 1,
                rec.data.len(),
                rec.shape
            )));
        }
        if rec.chart_id != 0 {
            return Err(LabError::Usage(format!(
                "{}:{}: only the global chart (id 0) is supported",
                path.display(),
                i + 1
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

/// Rebuilds a trajectory from snapshot records (all with the same flow and grid).
pub fn trajectory_from_records(records: &[SnapshotRecord]) -> Result<Trajectory, LabError> {
    let first = records
        .first()
        .ok_or_else(|| LabError::Usage("trajectory file holds no snapshots".into()))?;
    let grid = Grid::new(first.dim(), first.n).map_err(|e| LabError::Usage(e.to_string()))?;
    let mut traj = Trajectory::new(TrajectoryMeta {
        flow: first.flow.clone(),
        grid,
        components: first.components(),
        valence: first.valence,
    });
    for r in records {
        if r.flow != first.flow || r.shape != first.shape {
            return Err(LabError::Usage("snapshots mix flows or shapes".into()));
        }
        traj.push(r.t, r.data.clone()).map_err(|e| LabError::Usage(format!("snapshot at t = {}: {e}", r.t)))?;
    }
    Ok(traj)
}

/// Translation descriptor consumed by `probe`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranslationDescriptor {
    pub center_chart: usize,
    pub center_point: Vec<f64>,
    #[serde(default = "default_epsilon0")]
    pub epsilon0: f64,
    /// Spatial parameter radius; defaults to `1 / (4 sup|chi'|)`.
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub lambda: f64,
    pub mu: Vec<f64>,
    /// Probe time; defaults to the middle of a stored interval near the middle of the run.
    #[serde(default)]
    pub t0: Option<f64>,
    /// Plateau radius of the temporal cutoff; defaults to a fifth of the run.
    #[serde(default)]
    pub time_radius: Option<f64>,
}

fn default_epsilon0() -> f64 {
    geoflow_core::diffeo::DEFAULT_EPSILON0
}

pub fn read_descriptor(path: &Path) -> Result<TranslationDescriptor, LabError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| LabError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| LabError::Usage(format!("invalid translation descriptor {}: {e}", path.display())))
}

/// Shortest round-trip decimal (`NaN` and infinities spelled out).
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        let s = format!("{x:?}");
        s.strip_suffix(".0").map(str::to_owned).unwrap_or(s)
    } else {
        format!("{x}")
    }
}

/// Writes a CSV with a hash comment line and a header.
pub fn write_csv(path: &Path, config_hash: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<(), LabError> {
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    let mut text = format!("# config_hash: {config_hash}\n{}\n", header.join(","));
    for r in rows {
        let cells: Vec<String> = r.iter().map(|&x| fmt_f64(x)).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    w.write_all(text.as_bytes()).map_err(|e| io_err(path, e))?;
    w.flush().map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshots_round_trip_bit_for_bit() {
        let grid = Grid::new(2, 16).unwrap();
        let mut traj = Trajectory::new(TrajectoryMeta {
            flow: "ricci-deturck".into(),
            grid,
            components: 3,
            valence: [0, 2],
        });
        for k in 0..3 {
            let t = k as f64 * 0.1 / 3.0;
            let s: Vec<f64> = (0..3 * grid.len()).map(|i| (i as f64 * 0.37 + t).sin() / 3.0).collect();
            traj.push(t, s).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.jsonl");
        write_trajectory(&p, &traj, None, "abc").unwrap();
        let recs = read_snapshots(&p).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].shape, vec![3, 16, 16]);
        assert_eq!(recs[0].config_hash, "abc");
        let back = trajectory_from_records(&recs).unwrap();
        assert_eq!(back, traj);
    }

    #[test]
    fn bad_records_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.jsonl");
        std::fs::write(
            &p,
            r#"{"t":0,"flow":"sdf","chart_id":0,"valence":[0,0],"shape":[1,16],"n":16,"config_hash":"x","data":[1,2]}"#,
        )
        .unwrap();
        assert!(read_snapshots(&p).is_err());
        assert!(read_snapshots(&dir.path().join("none.jsonl")).is_err());
    }

    #[test]
    fn floats_use_shortest_round_trip_form() {
        assert_eq!(fmt_f64(0.1), "0.1");
        assert_eq!(fmt_f64(2.0), "2");
        assert_eq!(fmt_f64(1e-12), "1e-12");
        for x in [std::f64::consts::PI, -1.0 / 3.0, 6.02e23] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn descriptor_defaults() {
        let d: TranslationDescriptor =
            serde_json::from_str(r#"{"center_chart":0,"center_point":[1.0],"mu":[0.001]}"#).unwrap();
        assert_eq!(d.epsilon0, geoflow_core::diffeo::DEFAULT_EPSILON0);
        assert_eq!(d.lambda, 0.0);
        assert!(d.r.is_none() && d.t0.is_none());
    }
}
