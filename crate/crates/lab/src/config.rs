//! Run configuration: a single JSON file, overridden key by key by CLI flags.
//!
//! Precedence, lowest first: built-in defaults, the `--config` file, flags.

use std::fmt;
use std::path::{Path, PathBuf};

use geoflow_core::grid::Grid;
use geoflow_core::hypersurface::{FlowKind, TUBULAR_RADIUS};
use geoflow_core::ricci::{conformal_metric, non_conformal_metric};
use geoflow_core::timestepping::{Scheme, SolverConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::formats::read_snapshots;
use crate::LabError;

/// Flows the CLI can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flow {
    #[serde(rename = "sdf")]
    Sdf,
    #[serde(rename = "mcf")]
    Mcf,
    #[serde(rename = "amcf")]
    Amcf,
    #[serde(rename = "ricci-deturck")]
    RicciDeTurck,
}

impl Flow {
    pub fn parse(s: &str) -> Result<Self, LabError> {
        match s {
            "sdf" => Ok(Flow::Sdf),
            "mcf" => Ok(Flow::Mcf),
            "amcf" => Ok(Flow::Amcf),
            "ricci-deturck" => Ok(Flow::RicciDeTurck),
            other => Err(LabError::Usage(format!(
                "unknown flow '{other}' (expected sdf, mcf, amcf or ricci-deturck)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Flow::Sdf => "sdf",
            Flow::Mcf => "mcf",
            Flow::Amcf => "amcf",
            Flow::RicciDeTurck => "ricci-deturck",
        }
    }

    pub fn hypersurface_kind(self) -> Option<FlowKind> {
        FlowKind::from_name(self.name())
    }

    pub fn dim(self) -> usize {
        if self == Flow::RicciDeTurck {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for Flow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Solver keys, mirroring [`SolverConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverKeys {
    pub scheme: String,
    pub dt: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub atol: f64,
    pub rtol: f64,
    pub max_steps: usize,
    pub save_every: usize,
}

impl Default for SolverKeys {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            scheme: scheme_name(d.scheme).into(),
            dt: d.dt,
            dt_min: d.dt_min,
            dt_max: d.dt_max,
            atol: d.atol,
            rtol: d.rtol,
            max_steps: d.max_steps,
            save_every: d.save_every,
        }
    }
}

pub fn scheme_name(s: Scheme) -> &'static str {
    match s {
        Scheme::Rk4 => "rk4",
        Scheme::Imex => "imex",
    }
}

impl SolverKeys {
    pub fn to_solver(&self) -> Result<SolverConfig, LabError> {
        let scheme = match self.scheme.as_str() {
            "imex" => Scheme::Imex,
            "rk4" => Scheme::Rk4,
            other => return Err(LabError::Usage(format!("unknown scheme '{other}' (expected imex or rk4)"))),
        };
        let cfg = SolverConfig {
            scheme,
            dt: self.dt,
            dt_min: self.dt_min,
            dt_max: self.dt_max,
            safety: SolverConfig::default().safety,
            atol: self.atol,
            rtol: self.rtol,
            max_steps: self.max_steps,
            save_every: self.save_every,
        };
        cfg.validate().map_err(|e| LabError::Usage(format!("solver configuration: {e}")))?;
        Ok(cfg)
    }
}

/// The full run description. Unknown keys are rejected by [`RunConfig::from_json`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub flow: Flow,
    /// Nodes per axis of the periodic grid.
    pub n: usize,
    /// Charts of the atlas the run lives on; solvers use the global chart.
    pub charts: usize,
    /// `flat`, `conformal:amp`, `cos2:amp`, `const:c`, `shear:amp` or a snapshot file.
    pub initial: String,
    pub t_end: f64,
    /// Tubular radius for graph flows.
    pub tube: f64,
    #[serde(flatten)]
    pub solver: SolverKeys,
    /// Write the DeTurck/Ricci residual series (Ricci-DeTurck only).
    pub residuals: bool,
    /// RK4 substeps per stored interval for the correspondence particles.
    pub particle_substeps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            flow: Flow::Sdf,
            n: 128,
            charts: 1,
            initial: "cos2:0.1".into(),
            t_end: 0.1,
            tube: TUBULAR_RADIUS,
            solver: SolverKeys::default(),
            residuals: true,
            particle_substeps: 2,
        }
    }
}

/// Flag overrides; `None` keeps the config value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub flow: Option<String>,
    pub n: Option<usize>,
    pub initial: Option<String>,
    pub t_end: Option<f64>,
    pub scheme: Option<String>,
    pub dt: Option<f64>,
    pub save_every: Option<usize>,
}

/// Every key a config file may hold. `serde(flatten)` cannot be combined with
/// `deny_unknown_fields`, so the check is done by hand.
pub const CONFIG_KEYS: [&str; 16] = [
    "flow", "n", "charts", "initial", "t_end", "tube", "scheme", "dt", "dt_min", "dt_max", "atol", "rtol",
    "max_steps", "save_every", "residuals", "particle_substeps",
];

impl RunConfig {
    /// Parses a JSON config object; missing keys take their defaults.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let obj = v.as_object().ok_or("config must be a JSON object")?;
        if let Some(k) = obj.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
            return Err(format!("unknown key `{k}`"));
        }
        serde_json::from_value(v).map_err(|e| e.to_string())
    }

    /// Defaults, then the file (if any), then the overrides.
    pub fn load(path: Option<&Path>, ov: &Overrides) -> Result<Self, LabError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| LabError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                Self::from_json(&text).map_err(|e| LabError::Usage(format!("invalid config {}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(f) = &ov.flow {
            cfg.flow = Flow::parse(f)?;
        }
        if let Some(n) = ov.n {
            cfg.n = n;
        }
        if let Some(i) = &ov.initial {
            cfg.initial = i.clone();
        }
        if let Some(t) = ov.t_end {
            cfg.t_end = t;
        }
        if let Some(s) = &ov.scheme {
            cfg.solver.scheme = s.clone();
        }
        if let Some(dt) = ov.dt {
            cfg.solver.dt = dt;
        }
        if let Some(k) = ov.save_every {
            cfg.solver.save_every = k;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), LabError> {
        Grid::new(self.flow.dim(), self.n).map_err(|e| LabError::Usage(e.to_string()))?;
        if self.charts != 1 {
            return Err(LabError::Usage(
                "solvers run on the global periodic chart: charts must be 1".into(),
            ));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(LabError::Usage("t_end must be positive".into()));
        }
        if !(self.tube > 0.0 && self.tube < 1.0) {
            return Err(LabError::Usage("tube must lie in (0, 1)".into()));
        }
        if self.particle_substeps == 0 {
            return Err(LabError::Usage("particle_substeps must be positive".into()));
        }
        self.solver.to_solver()?;
        // presets are checked when they are built
        self.initial_state()?;
        Ok(())
    }

    pub fn grid(&self) -> Grid {
        Grid::unchecked(self.flow.dim(), self.n)
    }

    /// Canonical JSON used for hashing and embedding.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        sha256_hex(self.canonical_json().as_bytes())
    }

    /// Initial state for the configured flow.
    pub fn initial_state(&self) -> Result<Vec<f64>, LabError> {
        let grid = self.grid();
        let preset = Preset::parse(&self.initial)?;
        let bad = |msg: String| Err(LabError::Usage(msg));
        match (self.flow, preset) {
            (Flow::RicciDeTurck, Preset::Flat) => Ok(conformal_metric(&vec![0.0; grid.len()])),
            (Flow::RicciDeTurck, Preset::Conformal(a)) => {
                Ok(conformal_metric(&grid.sample(|p| a * p[0].sin() * p[1].sin())))
            }
            (Flow::RicciDeTurck, Preset::Shear(a)) => {
                if !(a.abs() < 1.0) {
                    return bad(format!("shear amplitude {a} must satisfy |amp| < 1"));
                }
                Ok(non_conformal_metric(grid, a))
            }
            (Flow::RicciDeTurck, Preset::Const(c)) => {
                if !(c > 0.0) {
                    return bad(format!("constant metric factor {c} must be positive"));
                }
                Ok(conformal_metric(&vec![0.5 * c.ln(); grid.len()]))
            }
            (_, Preset::Flat) => Ok(vec![0.0; grid.len()]),
            (_, Preset::Cos2(a)) => {
                if !(a.abs() < self.tube) {
                    return bad(format!("amplitude {a} must satisfy |amp| < tube = {}", self.tube));
                }
                Ok(grid.sample(|p| a * (2.0 * p[0]).cos()))
            }
            (_, Preset::Const(c)) => {
                if !(c.abs() < self.tube) {
                    return bad(format!("constant {c} must satisfy |c| < tube = {}", self.tube));
                }
                Ok(vec![c; grid.len()])
            }
            (_, Preset::Snapshot(path)) => {
                let snaps = read_snapshots(&path)?;
                let last = snaps
                    .last()
                    .ok_or_else(|| LabError::Usage(format!("snapshot file {} is empty", path.display())))?;
                if last.flow != self.flow.name() || last.n != self.n {
                    return bad(format!(
                        "snapshot {} holds flow {} at n = {}, expected {} at n = {}",
                        path.display(),
                        last.flow,
                        last.n,
                        self.flow,
                        self.n
                    ));
                }
                Ok(last.data.clone())
            }
            (flow, p) => bad(format!("preset {p:?} does not apply to flow {flow}")),
        }
    }
}

/// Initial-data presets.
#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    Flat,
    Conformal(f64),
    Cos2(f64),
    Const(f64),
    Shear(f64),
    Snapshot(PathBuf),
}

impl Preset {
    pub fn parse(s: &str) -> Result<Self, LabError> {
        if s == "flat" {
            return Ok(Preset::Flat);
        }
        if let Some((name, value)) = s.split_once(':') {
            let make: Option<fn(f64) -> Preset> = match name {
                "conformal" => Some(Preset::Conformal),
                "cos2" => Some(Preset::Cos2),
                "const" => Some(Preset::Const),
                "shear" => Some(Preset::Shear),
                _ => None,
            };
            if let Some(make) = make {
                let v: f64 = value
                    .parse()
                    .map_err(|_| LabError::Usage(format!("preset '{s}': '{value}' is not a number")))?;
                if !v.is_finite() {
                    return Err(LabError::Usage(format!("preset '{s}' is not finite")));
                }
                return Ok(make(v));
            }
        }
        let path = PathBuf::from(s);
        if path.is_file() {
            Ok(Preset::Snapshot(path))
        } else {
            Err(LabError::Usage(format!(
                "initial data '{s}' is neither a preset (flat, conformal:a, cos2:a, const:c, shear:a) nor a snapshot file"
            )))
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_hash_is_stable() {
        let c = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&c.canonical_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(c.hash(), back.hash());
        assert_eq!(c.hash().len(), 64);
        let mut d = c.clone();
        d.solver.dt = 2e-4;
        assert_ne!(c.hash(), d.hash());
    }

    #[test]
    fn solver_keys_parse_from_the_documented_example() {
        let text = r#"{"flow":"mcf","n":64,"initial":"flat","scheme":"imex","dt":1e-4,"dt_min":1e-9,"dt_max":1e-2,"atol":1e-9,"rtol":1e-7,"max_steps":200000}"#;
        let c = RunConfig::from_json(text).unwrap();
        assert_eq!(c.flow, Flow::Mcf);
        assert_eq!(c.solver.max_steps, 200000);
        assert!(c.validate().is_ok());
        assert!(RunConfig::from_json(r#"{"bogus":1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"dt":"fast"}"#).is_err());
    }

    #[test]
    fn presets() {
        assert_eq!(Preset::parse("flat").unwrap(), Preset::Flat);
        assert_eq!(Preset::parse("cos2:0.1").unwrap(), Preset::Cos2(0.1));
        assert!(Preset::parse("cos2:x").is_err());
        assert!(Preset::parse("nowhere.jsonl").is_err());
        let mut c = RunConfig {
            initial: "cos2:0.95".into(),
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
        c.initial = "conformal:0.1".into();
        assert!(c.validate().is_err());
        c.flow = Flow::RicciDeTurck;
        c.n = 16;
        assert!(c.validate().is_ok());
        assert_eq!(c.initial_state().unwrap().len(), 3 * 256);
    }

    #[test]
    fn overrides_take_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"flow":"sdf","n":64,"dt":1e-3}"#).unwrap();
        let ov = Overrides {
            dt: Some(5e-4),
            ..Default::default()
        };
        let c = RunConfig::load(Some(&p), &ov).unwrap();
        assert_eq!(c.n, 64);
        assert_eq!(c.solver.dt, 5e-4);
        assert!(RunConfig::load(Some(&dir.path().join("missing.json")), &ov).is_err());
    }
}
