//! Scenario files: a TOML description of geometry, waveform, targets and
//! processing parameters. Field names carry their units as suffixes.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decomp::{DecomposeConfig, MaskMode, MaskShape};
use crate::dsp::{StftConfig, WindowKind};
use crate::error::{Error, Result};
use crate::estimate::{DEFAULT_FLOOR_DB, DEFAULT_SMOOTH_FRAMES};
use crate::scene::{
    ArrayGeometry, TargetTrajectory, TrajectorySample, DEFAULT_SMALL_ANGLE_THRESHOLD_RAD,
    DEFAULT_TRUTH_SMOOTHING,
};
use crate::synth::{AntennaPattern, VibrationTone, WaveformConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub carrier_hz: f64,
    pub baseline_wavelengths: f64,
}

impl Default for GeometrySpec {
    fn default() -> Self {
        Self {
            carrier_hz: 40e9,
            baseline_wavelengths: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveformSpec {
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    #[serde(default)]
    pub start_s: f64,
    /// Omit for a noise-free capture.
    #[serde(default)]
    pub snr_db: Option<f64>,
    /// Real DC offset added to both channels.
    #[serde(default)]
    pub dc_offset: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub vibration: Vec<VibrationTone>,
}

impl Default for WaveformSpec {
    fn default() -> Self {
        Self {
            sample_rate_hz: 1920.0,
            duration_s: 10.0,
            start_s: 0.0,
            snr_db: Some(20.0),
            dc_offset: 0.01,
            seed: 0,
            vibration: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AntennaSpec {
    Isotropic,
    GaussianBeam {
        beamwidth_deg: f64,
        #[serde(default)]
        boresight_deg: f64,
    },
}

impl Default for AntennaSpec {
    fn default() -> Self {
        AntennaSpec::GaussianBeam {
            beamwidth_deg: 30.0,
            boresight_deg: 0.0,
        }
    }
}

impl AntennaSpec {
    pub fn pattern(&self) -> AntennaPattern {
        match *self {
            AntennaSpec::Isotropic => AntennaPattern::Isotropic,
            AntennaSpec::GaussianBeam {
                beamwidth_deg,
                boresight_deg,
            } => AntennaPattern::GaussianBeam {
                beamwidth_rad: beamwidth_deg.to_radians(),
                boresight_rad: boresight_deg.to_radians(),
            },
        }
    }
}

/// Parametric path of one target. Bearings are clockwise from broadside
/// (+y) and measured about the array midpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathSpec {
    /// Constant velocity from `start_m` at the capture start.
    Line {
        start_m: [f64; 2],
        velocity_mps: [f64; 2],
    },
    /// Constant angular rate on a circle around `center_m`.
    Circle {
        center_m: [f64; 2],
        radius_m: f64,
        start_bearing_deg: f64,
        omega_radps: f64,
    },
    /// Constant range rate and bearing rate about the array midpoint.
    Spiral {
        range_m: f64,
        bearing_deg: f64,
        range_rate_mps: f64,
        omega_radps: f64,
    },
    /// `t,x,y` CSV; relative paths resolve against the scenario file.
    Waypoints { file: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub id: u32,
    #[serde(default = "one")]
    pub amplitude: f64,
    pub path: PathSpec,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EstimationMode {
    /// Masks centered on ground-truth Doppler.
    #[default]
    Known,
    Detected,
}

impl std::str::FromStr for EstimationMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "known" => Ok(EstimationMode::Known),
            "detected" => Ok(EstimationMode::Detected),
            _ => Err(Error::validation(format!(
                "unknown mode '{s}' (expected known or detected)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProcessingSpec {
    pub mode: EstimationMode,
    pub mask_mode: MaskMode,
    pub window_len: usize,
    pub fft_len: usize,
    pub overlap: usize,
    pub window: WindowKind,
    pub zero_pad: usize,
    pub mask_width_hz: f64,
    pub mask_shape: MaskShape,
    pub floor_db: f64,
    pub smooth_frames: usize,
    pub highpass_order: usize,
    pub highpass_cutoff_hz: f64,
    pub highpass_zero_phase: bool,
    pub gate_hz: f64,
    pub track_gate_hz: f64,
    pub detect_threshold_db: f64,
    pub truth_smoothing: usize,
    pub small_angle_threshold_rad: f64,
    /// Invert with the truth bearing instead of the small-angle form.
    pub full_angle: bool,
}

impl Default for ProcessingSpec {
    fn default() -> Self {
        let stft = StftConfig::default();
        let dec = DecomposeConfig::default();
        Self {
            mode: EstimationMode::Known,
            mask_mode: MaskMode::Shared,
            window_len: stft.window_len,
            fft_len: stft.fft_len,
            overlap: stft.overlap,
            window: stft.window_kind,
            zero_pad: dec.zero_pad,
            mask_width_hz: dec.mask_width_hz,
            mask_shape: MaskShape::Rect,
            floor_db: DEFAULT_FLOOR_DB,
            smooth_frames: DEFAULT_SMOOTH_FRAMES,
            highpass_order: 3,
            highpass_cutoff_hz: 1.0,
            highpass_zero_phase: false,
            gate_hz: dec.gate_hz,
            track_gate_hz: dec.track_gate_hz,
            detect_threshold_db: dec.detect_threshold_db,
            truth_smoothing: DEFAULT_TRUTH_SMOOTHING,
            small_angle_threshold_rad: DEFAULT_SMALL_ANGLE_THRESHOLD_RAD,
            full_angle: false,
        }
    }
}

impl ProcessingSpec {
    pub fn stft(&self) -> StftConfig {
        StftConfig {
            window_len: self.window_len,
            fft_len: self.fft_len,
            overlap: self.overlap,
            window_kind: self.window,
        }
    }

    pub fn decompose_config(&self) -> DecomposeConfig {
        DecomposeConfig {
            stft: self.stft(),
            zero_pad: self.zero_pad,
            mask_width_hz: self.mask_width_hz,
            mask_mode: self.mask_mode,
            mask_shape: self.mask_shape,
            gate_hz: self.gate_hz,
            track_gate_hz: self.track_gate_hz,
            detect_threshold_db: self.detect_threshold_db,
            ..DecomposeConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.stft().validate()?;
        if self.zero_pad == 0 {
            return Err(Error::validation("zero_pad must be at least 1"));
        }
        if !(self.mask_width_hz > 0.0) {
            return Err(Error::validation("mask_width_hz must be positive"));
        }
        if self.smooth_frames == 0 {
            return Err(Error::validation("smooth_frames must be at least 1"));
        }
        if !self.floor_db.is_finite() || self.floor_db > 0.0 {
            return Err(Error::validation("floor_db must be a finite value <= 0"));
        }
        if self.truth_smoothing == 0 {
            return Err(Error::validation("truth_smoothing must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub waveform: WaveformSpec,
    #[serde(default)]
    pub antenna: AntennaSpec,
    /// Sampling rate of generated trajectories.
    #[serde(default = "default_trajectory_rate")]
    pub trajectory_rate_hz: f64,
    #[serde(default, rename = "target")]
    pub targets: Vec<TargetSpec>,
    #[serde(default)]
    pub processing: ProcessingSpec,
    /// Directory relative paths resolve against; not serialized.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_trajectory_rate() -> f64 {
    120.0
}

impl Scenario {
    pub fn from_toml_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut s: Scenario = toml::from_str(text)?;
        s.base_dir = base_dir.into();
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml_str(&text, base)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::validation(format!("cannot serialize scenario: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::validation(format!(
                "unsupported schema_version {} (this build reads {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.geometry()?;
        self.waveform().validate()?;
        self.antenna.pattern().validate()?;
        if !(self.trajectory_rate_hz > 0.0) {
            return Err(Error::validation("trajectory_rate_hz must be positive"));
        }
        let mut ids: Vec<u32> = self.targets.iter().map(|t| t.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::validation("target ids must be unique"));
        }
        for t in &self.targets {
            if !(t.amplitude >= 0.0) {
                return Err(Error::validation(format!("target {} amplitude must be >= 0", t.id)));
            }
            if let PathSpec::Waypoints { file } = &t.path {
                let p = self.resolve(file);
                if !p.exists() {
                    return Err(Error::validation(format!(
                        "trajectory file {} does not exist",
                        p.display()
                    )));
                }
            }
        }
        self.processing.validate()
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::standard(self.geometry.carrier_hz, self.geometry.baseline_wavelengths)
    }

    pub fn waveform(&self) -> WaveformConfig {
        let w = &self.waveform;
        WaveformConfig {
            sample_rate_hz: w.sample_rate_hz,
            duration_s: w.duration_s,
            start_s: w.start_s,
            snr_db: w.snr_db,
            dc_offset: [Complex64::new(w.dc_offset, 0.0); 2],
            rng_seed: w.seed,
            vibration: w.vibration.clone(),
        }
    }

    /// Time span trajectories must cover.
    pub fn span(&self) -> (f64, f64) {
        let w = &self.waveform;
        (w.start_s, w.start_s + w.duration_s)
    }

    /// Sample every target's path over the capture span.
    pub fn trajectories(&self) -> Result<Vec<TargetTrajectory>> {
        let geom = self.geometry()?;
        self.targets
            .iter()
            .map(|t| self.trajectory(t, &geom))
            .collect()
    }

    fn trajectory(&self, t: &TargetSpec, geom: &ArrayGeometry) -> Result<TargetTrajectory> {
        let (t0, t1) = self.span();
        let rate = self.trajectory_rate_hz;
        let c = geom.phase_center();
        match &t.path {
            PathSpec::Line {
                start_m,
                velocity_mps,
            } => TargetTrajectory::from_fn(t.id, t.amplitude, t0, t1, rate, |tt| {
                let dt = tt - t0;
                [start_m[0] + velocity_mps[0] * dt, start_m[1] + velocity_mps[1] * dt]
            }),
            PathSpec::Circle {
                center_m,
                radius_m,
                start_bearing_deg,
                omega_radps,
            } => {
                if !(*radius_m > 0.0) {
                    return Err(Error::validation(format!("target {}: radius_m must be positive", t.id)));
                }
                let a0 = start_bearing_deg.to_radians();
                TargetTrajectory::from_fn(t.id, t.amplitude, t0, t1, rate, |tt| {
                    let a = a0 + omega_radps * (tt - t0);
                    [center_m[0] + radius_m * a.sin(), center_m[1] + radius_m * a.cos()]
                })
            }
            PathSpec::Spiral {
                range_m,
                bearing_deg,
                range_rate_mps,
                omega_radps,
            } => {
                let r_end = range_m + range_rate_mps * (t1 - t0);
                if !(*range_m > 0.0) || !(r_end > 0.0) {
                    return Err(Error::validation(format!(
                        "target {}: spiral range must stay positive (ends at {r_end} m)",
                        t.id
                    )));
                }
                let a0 = bearing_deg.to_radians();
                TargetTrajectory::from_fn(t.id, t.amplitude, t0, t1, rate, |tt| {
                    let dt = tt - t0;
                    let r = range_m + range_rate_mps * dt;
                    let a = a0 + omega_radps * dt;
                    [c[0] + r * a.sin(), c[1] + r * a.cos()]
                })
            }
            PathSpec::Waypoints { file } => {
                let path = self.resolve(file);
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                let samples = parse_waypoints(&text)?;
                TargetTrajectory::new(t.id, samples, t.amplitude)
            }
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).unwrap_or_default();
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Deserialize)]
struct WaypointRow {
    t: f64,
    x: f64,
    y: f64,
}

/// `t,x,y` rows with a header; `#` lines are comments.
pub fn parse_waypoints(text: &str) -> Result<Vec<TrajectorySample>> {
    let mut rd = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rd.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "x", "y"] {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header t,x,y, found {}", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in rd.deserialize::<WaypointRow>() {
        let row = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        out.push(TrajectorySample {
            t: row.t,
            x: row.x,
            y: row.y,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::kinematics_at;

    const MINIMAL: &str = r#"
schema_version = 1
name = "t"

[[target]]
id = 0
path = { kind = "spiral", range_m = 6.0, bearing_deg = 0.0, range_rate_mps = -0.2, omega_radps = 0.05 }
"#;

    #[test]
    fn minimal_scenario_defaults() {
        let s = Scenario::from_toml_str(MINIMAL, ".").unwrap();
        assert_eq!(s.waveform.sample_rate_hz, 1920.0);
        assert_eq!(s.processing.window_len, 1024);
        assert_eq!(s.processing.smooth_frames, 60);
        assert_eq!(s.targets.len(), 1);
        let tr = s.trajectories().unwrap();
        let k = kinematics_at(&tr[0], &s.geometry().unwrap(), 5.0).unwrap();
        assert!((k.omega_center() - 0.05).abs() < 1e-3);
        assert!((0.5 * (k.v_radial_mps[0] + k.v_radial_mps[1]) + 0.2).abs() < 1e-3);
    }

    #[test]
    fn round_trip_through_toml() {
        let s = Scenario::from_toml_str(MINIMAL, ".").unwrap();
        let text = s.to_toml_string().unwrap();
        let back = Scenario::from_toml_str(&text, ".").unwrap();
        assert_eq!(s, back);
        assert_eq!(s.hash(), back.hash());
    }

    #[test]
    fn hash_changes_with_seed() {
        let a = Scenario::from_toml_str(MINIMAL, ".").unwrap();
        let mut b = a.clone();
        b.waveform.seed = 9;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn rejects_bad_input() {
        let bad_version = MINIMAL.replace("schema_version = 1", "schema_version = 7");
        assert!(Scenario::from_toml_str(&bad_version, ".").is_err());
        let unknown = format!("{MINIMAL}\nbogus_field = 3\n");
        assert!(Scenario::from_toml_str(&unknown, ".").is_err());
        let zero = format!("{MINIMAL}\n[waveform]\nsample_rate_hz = 1920.0\nduration_s = 0.0\n");
        assert!(matches!(Scenario::from_toml_str(&zero, "."), Err(Error::Validation(_))));
        let missing = MINIMAL.replace(
            r#"path = { kind = "spiral", range_m = 6.0, bearing_deg = 0.0, range_rate_mps = -0.2, omega_radps = 0.05 }"#,
            r#"path = { kind = "waypoints", file = "nope.csv" }"#,
        );
        let err = Scenario::from_toml_str(&missing, "/tmp/nowhere").unwrap_err();
        assert!(err.to_string().contains("nope.csv"));
        let dup = format!("{MINIMAL}\n[[target]]\nid = 0\npath = {{ kind = \"line\", start_m = [0.0, 5.0], velocity_mps = [0.1, 0.0] }}\n");
        assert!(Scenario::from_toml_str(&dup, ".").is_err());
    }

    #[test]
    fn collapsing_spiral_rejected() {
        let s = MINIMAL.replace("range_rate_mps = -0.2", "range_rate_mps = -1.0");
        let s = Scenario::from_toml_str(&s, ".").unwrap();
        assert!(s.trajectories().is_err());
    }

    #[test]
    fn waypoints_load() {
        let dir = tempfile::tempdir().unwrap();
        let csv = "# path\nt,x,y\n0,0,5\n5,1,5\n10,2,5\n";
        std::fs::write(dir.path().join("wp.csv"), csv).unwrap();
        let text = MINIMAL.replace(
            r#"path = { kind = "spiral", range_m = 6.0, bearing_deg = 0.0, range_rate_mps = -0.2, omega_radps = 0.05 }"#,
            r#"path = { kind = "waypoints", file = "wp.csv" }"#,
        );
        let s = Scenario::from_toml_str(&text, dir.path()).unwrap();
        let tr = s.trajectories().unwrap();
        assert_eq!(tr[0].samples().len(), 3);
        assert!(parse_waypoints("a,b\n1,2\n").is_err());
    }

    #[test]
    fn circle_and_line_paths() {
        let text = r#"
schema_version = 1
[[target]]
id = 1
path = { kind = "circle", center_m = [0.0, 0.0], radius_m = 5.0, start_bearing_deg = -10.0, omega_radps = 0.03 }
[[target]]
id = 2
path = { kind = "line", start_m = [-1.0, 5.0], velocity_mps = [0.2, 0.0] }
"#;
        let s = Scenario::from_toml_str(text, ".").unwrap();
        let tr = s.trajectories().unwrap();
        let g = s.geometry().unwrap();
        let k = kinematics_at(&tr[0], &g, 3.0).unwrap();
        assert!((k.omega_center() - 0.03).abs() < 1e-4);
        let p = tr[1].position_at(10.0).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-9 && (p[1] - 5.0).abs() < 1e-12);
    }
}
