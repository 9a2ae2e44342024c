//! Target and antenna kinematics.
//!
//! Coordinates are a 2-D plan view in meters. Broadside is the +y axis and
//! bearings are measured from broadside, positive clockwise when viewed from
//! above (toward +x). With the standard layout (transmitter at the origin,
//! RX1 at `+D/2` and RX2 at `-D/2` on the x axis) a target moving clockwise
//! produces a positive interferometric frequency.
//!
//! Radial velocity is the rate of change of half the round-trip path
//! TX → target → RX_i, so a receding target has a positive radial velocity.
//! At baseband an approaching target shows up at a positive Doppler
//! frequency, `f_D = -2 v_r / λ`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default bearing magnitude below which the broadside (small-angle) form
/// of the interferometric shift is used.
pub const DEFAULT_SMALL_ANGLE_THRESHOLD_RAD: f64 = 0.2;

/// Default moving-average width applied to ground-truth positions before
/// differentiating.
pub const DEFAULT_TRUTH_SMOOTHING: usize = 5;

pub type Point2 = [f64; 2];

fn distance(a: Point2, b: Point2) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    } else if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

/// Single-transmitter, two-receiver interferometer layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub baseline_m: f64,
    pub wavelength_m: f64,
    pub carrier_hz: f64,
    pub tx_position: Point2,
    pub rx1_position: Point2,
    pub rx2_position: Point2,
}

impl ArrayGeometry {
    pub fn new(
        carrier_hz: f64,
        tx_position: Point2,
        rx1_position: Point2,
        rx2_position: Point2,
    ) -> Result<Self> {
        let geom = Self {
            baseline_m: distance(rx1_position, rx2_position),
            wavelength_m: SPEED_OF_LIGHT / carrier_hz,
            carrier_hz,
            tx_position,
            rx1_position,
            rx2_position,
        };
        geom.validate()?;
        Ok(geom)
    }

    /// Transmitter at the origin, receivers on the x axis separated by
    /// `baseline_wavelengths` carrier wavelengths, RX1 on the +x side.
    pub fn standard(carrier_hz: f64, baseline_wavelengths: f64) -> Result<Self> {
        if !(carrier_hz > 0.0) || !(baseline_wavelengths > 0.0) {
            return Err(Error::validation(
                "carrier frequency and baseline must be positive",
            ));
        }
        let half = 0.5 * baseline_wavelengths * SPEED_OF_LIGHT / carrier_hz;
        Self::new(carrier_hz, [0.0, 0.0], [half, 0.0], [-half, 0.0])
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.baseline_m, self.wavelength_m, self.carrier_hz]
            .iter()
            .chain(self.tx_position.iter())
            .chain(self.rx1_position.iter())
            .chain(self.rx2_position.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::validation("array geometry has non-finite values"));
        }
        if !(self.baseline_m > 0.0 && self.wavelength_m > 0.0 && self.carrier_hz > 0.0) {
            return Err(Error::validation(
                "baseline, wavelength and carrier must all be positive",
            ));
        }
        let implied = SPEED_OF_LIGHT / self.carrier_hz;
        if ((implied - self.wavelength_m) / self.wavelength_m).abs() >= 1e-6 {
            return Err(Error::validation(format!(
                "wavelength {} m inconsistent with carrier {} Hz",
                self.wavelength_m, self.carrier_hz
            )));
        }
        let d = distance(self.rx1_position, self.rx2_position);
        if (d - self.baseline_m).abs() > 1e-9 {
            return Err(Error::validation(format!(
                "receiver separation {d} m does not match baseline {} m",
                self.baseline_m
            )));
        }
        Ok(())
    }

    /// Receiver position, `antenna` is 0 for RX1 and 1 for RX2.
    pub fn rx(&self, antenna: usize) -> Point2 {
        if antenna == 0 {
            self.rx1_position
        } else {
            self.rx2_position
        }
    }

    pub fn phase_center(&self) -> Point2 {
        [
            0.5 * (self.rx1_position[0] + self.rx2_position[0]),
            0.5 * (self.rx1_position[1] + self.rx2_position[1]),
        ]
    }

    /// Baseline expressed in wavelengths (`D / λ`).
    pub fn baseline_wavelengths(&self) -> f64 {
        self.baseline_m / self.wavelength_m
    }

    /// Mirror image across the broadside axis (x → -x).
    pub fn mirrored(&self) -> Self {
        let m = |p: Point2| [-p[0], p[1]];
        Self {
            tx_position: m(self.tx_position),
            rx1_position: m(self.rx1_position),
            rx2_position: m(self.rx2_position),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// Time-ordered positions of one point scatterer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetTrajectory {
    pub target_id: u32,
    samples: Vec<TrajectorySample>,
    pub amplitude: f64,
}

impl TargetTrajectory {
    pub fn new(target_id: u32, samples: Vec<TrajectorySample>, amplitude: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::validation(format!(
                "target {target_id}: trajectory needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(Error::validation(format!(
                "target {target_id}: amplitude must be positive"
            )));
        }
        for s in &samples {
            if !(s.t.is_finite() && s.x.is_finite() && s.y.is_finite()) {
                return Err(Error::validation(format!(
                    "target {target_id}: non-finite sample at t = {}",
                    s.t
                )));
            }
        }
        if let Some(w) = samples.windows(2).find(|w| w[1].t <= w[0].t) {
            return Err(Error::validation(format!(
                "target {target_id}: timestamps not strictly increasing at t = {}",
                w[1].t
            )));
        }
        Ok(Self {
            target_id,
            samples,
            amplitude,
        })
    }

    /// Sample a parametric path `f(t) -> [x, y]` uniformly over `[t0, t1]`.
    pub fn from_fn(
        target_id: u32,
        amplitude: f64,
        t0: f64,
        t1: f64,
        rate_hz: f64,
        f: impl Fn(f64) -> Point2,
    ) -> Result<Self> {
        if !(t1 > t0) || !(rate_hz > 0.0) {
            return Err(Error::validation("trajectory span and rate must be positive"));
        }
        let n = ((t1 - t0) * rate_hz).round() as usize + 1;
        let n = n.max(2);
        let dt = (t1 - t0) / (n - 1) as f64;
        let samples = (0..n)
            .map(|i| {
                let t = t0 + i as f64 * dt;
                let [x, y] = f(t);
                TrajectorySample { t, x, y }
            })
            .collect();
        Self::new(target_id, samples, amplitude)
    }

    pub fn samples(&self) -> &[TrajectorySample] {
        &self.samples
    }

    pub fn span(&self) -> (f64, f64) {
        (self.samples[0].t, self.samples[self.samples.len() - 1].t)
    }

    /// Mean sample spacing in seconds.
    pub fn native_step(&self) -> f64 {
        let (a, b) = self.span();
        (b - a) / (self.samples.len() - 1) as f64
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let (a, b) = self.span();
        let eps = 1e-9 * (1.0 + a.abs().max(b.abs()));
        if !t.is_finite() || t < a - eps || t > b + eps {
            return Err(Error::Range(format!(
                "t = {t} s outside trajectory span [{a}, {b}] of target {}",
                self.target_id
            )));
        }
        Ok(())
    }

    fn tangent(&self, i: usize) -> Point2 {
        let s = &self.samples;
        let (lo, hi) = if i == 0 {
            (0, 1)
        } else if i == s.len() - 1 {
            (i - 1, i)
        } else {
            (i - 1, i + 1)
        };
        let dt = s[hi].t - s[lo].t;
        [(s[hi].x - s[lo].x) / dt, (s[hi].y - s[lo].y) / dt]
    }

    /// Position at `t` by cubic Hermite interpolation with finite-difference
    /// tangents (C1-continuous, exact for linear motion).
    pub fn position_at(&self, t: f64) -> Result<Point2> {
        self.check_time(t)?;
        let s = &self.samples;
        let (a, b) = self.span();
        let t = t.clamp(a, b);
        let j = match s.binary_search_by(|p| p.t.total_cmp(&t)) {
            Ok(j) => return Ok([s[j].x, s[j].y]),
            Err(j) => j.clamp(1, s.len() - 1),
        };
        let (p0, p1) = (&s[j - 1], &s[j]);
        let h = p1.t - p0.t;
        let u = (t - p0.t) / h;
        let (m0, m1) = if s.len() == 2 {
            let m = [(p1.x - p0.x) / h, (p1.y - p0.y) / h];
            (m, m)
        } else {
            (self.tangent(j - 1), self.tangent(j))
        };
        let u2 = u * u;
        let u3 = u2 * u;
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        Ok([
            h00 * p0.x + h10 * h * m0[0] + h01 * p1.x + h11 * h * m1[0],
            h00 * p0.y + h10 * h * m0[1] + h01 * p1.y + h11 * h * m1[1],
        ])
    }

    /// Centered moving average of positions over `width` samples (even widths
    /// round down to the next odd width). Near the ends the window shrinks
    /// symmetrically so the filter stays zero-phase.
    pub fn smoothed(&self, width: usize) -> Self {
        let half = width.saturating_sub(1) / 2;
        if half == 0 {
            return self.clone();
        }
        let n = self.samples.len();
        let samples = (0..n)
            .map(|i| {
                let reach = half.min(i).min(n - 1 - i);
                let window = &self.samples[i - reach..=i + reach];
                let cnt = window.len() as f64;
                let (sx, sy) = window
                    .iter()
                    .fold((0.0, 0.0), |(ax, ay), p| (ax + p.x, ay + p.y));
                TrajectorySample {
                    t: self.samples[i].t,
                    x: sx / cnt,
                    y: sy / cnt,
                }
            })
            .collect();
        Self {
            samples,
            ..self.clone()
        }
    }

    /// Same path traversed backwards: sample at `t` moves to `t0 + t1 - t`.
    pub fn time_reversed(&self) -> Self {
        let (a, b) = self.span();
        let samples = self
            .samples
            .iter()
            .rev()
            .map(|p| TrajectorySample {
                t: a + b - p.t,
                ..*p
            })
            .collect();
        Self {
            samples,
            ..self.clone()
        }
    }

    pub fn mirrored(&self) -> Self {
        let samples = self
            .samples
            .iter()
            .map(|p| TrajectorySample { x: -p.x, ..*p })
            .collect();
        Self {
            samples,
            ..self.clone()
        }
    }
}

/// Per-antenna geometry of one target at one instant. Index 0 is RX1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicState {
    pub range_tx_m: f64,
    pub range_m: [f64; 2],
    pub theta_rad: [f64; 2],
    pub v_radial_mps: [f64; 2],
    pub omega_radps: [f64; 2],
    pub tau_s: [f64; 2],
}

impl KinematicState {
    /// Baseband Doppler seen at `antenna` (approaching ⇒ positive).
    pub fn doppler_hz(&self, antenna: usize, geom: &ArrayGeometry) -> f64 {
        -2.0 * self.v_radial_mps[antenna] / geom.wavelength_m
    }

    /// Bearing rate about the array midpoint, approximated by the mean of
    /// the two receivers' rates. This is the rate the interferometer senses.
    pub fn omega_center(&self) -> f64 {
        0.5 * (self.omega_radps[0] + self.omega_radps[1])
    }
}

#[derive(Debug, Clone, Copy)]
struct Instant {
    range_tx: f64,
    range: [f64; 2],
    theta: [f64; 2],
}

fn instant(p: Point2, geom: &ArrayGeometry) -> Instant {
    let range_tx = distance(p, geom.tx_position);
    let mut range = [0.0; 2];
    let mut theta = [0.0; 2];
    for i in 0..2 {
        let rx = geom.rx(i);
        range[i] = distance(p, rx);
        theta[i] = (p[0] - rx[0]).atan2(p[1] - rx[1]);
    }
    Instant {
        range_tx,
        range,
        theta,
    }
}

/// Kinematics with derivatives taken over the trajectory's native spacing.
pub fn kinematics_at(
    traj: &TargetTrajectory,
    geom: &ArrayGeometry,
    t: f64,
) -> Result<KinematicState> {
    kinematics_at_with_step(traj, geom, t, traj.native_step())
}

/// Kinematics with central differences over `±step_s`, made one-sided where
/// the stencil would leave the trajectory span.
pub fn kinematics_at_with_step(
    traj: &TargetTrajectory,
    geom: &ArrayGeometry,
    t: f64,
    step_s: f64,
) -> Result<KinematicState> {
    if !(step_s > 0.0) {
        return Err(Error::validation("differentiation step must be positive"));
    }
    traj.check_time(t)?;
    let (a, b) = traj.span();
    let t = t.clamp(a, b);
    let lo = (t - step_s).max(a);
    let hi = (t + step_s).min(b);
    let dt = hi - lo;
    if !(dt > 0.0) {
        return Err(Error::validation("degenerate differentiation interval"));
    }
    let now = instant(traj.position_at(t)?, geom);
    let before = instant(traj.position_at(lo)?, geom);
    let after = instant(traj.position_at(hi)?, geom);

    let mut v_radial = [0.0; 2];
    let mut omega = [0.0; 2];
    let mut tau = [0.0; 2];
    for i in 0..2 {
        let half_path = |s: &Instant| 0.5 * (s.range_tx + s.range[i]);
        v_radial[i] = (half_path(&after) - half_path(&before)) / dt;
        omega[i] = wrap_angle(after.theta[i] - before.theta[i]) / dt;
        tau[i] = (now.range_tx + now.range[i]) / SPEED_OF_LIGHT;
    }
    let state = KinematicState {
        range_tx_m: now.range_tx,
        range_m: now.range,
        theta_rad: now.theta,
        v_radial_mps: v_radial,
        omega_radps: omega,
        tau_s: tau,
    };
    let finite = v_radial
        .iter()
        .chain(omega.iter())
        .chain(tau.iter())
        .all(|v| v.is_finite());
    if !finite {
        return Err(Error::Numeric(format!(
            "non-finite kinematics for target {} at t = {t}",
            traj.target_id
        )));
    }
    Ok(state)
}

/// Predicted Doppler (RX1) and interferometric frequency shifts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpectedShifts {
    pub doppler_hz: f64,
    pub interferometric_hz: f64,
}

pub fn expected_shifts(
    traj: &TargetTrajectory,
    geom: &ArrayGeometry,
    t: f64,
) -> Result<ExpectedShifts> {
    expected_shifts_with(traj, geom, t, DEFAULT_SMALL_ANGLE_THRESHOLD_RAD)
}

/// As [`expected_shifts`], with the bearing above which the `cos θ` factor
/// of the fringe-rate formula is retained.
pub fn expected_shifts_with(
    traj: &TargetTrajectory,
    geom: &ArrayGeometry,
    t: f64,
    small_angle_threshold_rad: f64,
) -> Result<ExpectedShifts> {
    let k = kinematics_at(traj, geom, t)?;
    Ok(shifts_from_state(&k, geom, small_angle_threshold_rad))
}

pub fn shifts_from_state(
    k: &KinematicState,
    geom: &ArrayGeometry,
    small_angle_threshold_rad: f64,
) -> ExpectedShifts {
    let theta = k.theta_rad[0];
    let cos = if theta.abs() < small_angle_threshold_rad {
        1.0
    } else {
        theta.cos()
    };
    ExpectedShifts {
        doppler_hz: k.doppler_hz(0, geom),
        interferometric_hz: k.omega_center() * geom.baseline_wavelengths() * cos,
    }
}

#[derive(Debug, Deserialize)]
struct TruthRow {
    t: f64,
    target_id: u32,
    x: f64,
    y: f64,
}

/// Read a ground-truth CSV (`t,target_id,x,y`, `#` comments) from a file.
pub fn load_ground_truth(path: impl AsRef<Path>) -> Result<Vec<TargetTrajectory>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_ground_truth(file)
}

pub fn parse_ground_truth(reader: impl Read) -> Result<Vec<TargetTrajectory>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["t", "target_id", "x", "y"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `t,target_id,x,y`, got `{}`", headers.as_slice()),
        });
    }
    let mut rows: BTreeMap<u32, Vec<TrajectorySample>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let row: TruthRow = rec.deserialize(Some(&headers)).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let samples = rows.entry(row.target_id).or_default();
        if let Some(prev) = samples.last() {
            if row.t <= prev.t {
                return Err(Error::validation(format!(
                    "line {line}: time {} for target {} is not after {}",
                    row.t, row.target_id, prev.t
                )));
            }
        }
        samples.push(TrajectorySample {
            t: row.t,
            x: row.x,
            y: row.y,
        });
    }
    if rows.is_empty() {
        return Err(Error::validation("ground-truth file contains no rows"));
    }
    rows.into_iter()
        .map(|(id, samples)| TargetTrajectory::new(id, samples, 1.0))
        .collect()
}

/// Write trajectories in the ground-truth CSV format, rows ordered by time
/// then target id.
pub fn write_ground_truth(
    mut writer: impl std::io::Write,
    trajectories: &[TargetTrajectory],
) -> std::io::Result<()> {
    let mut rows: Vec<(f64, u32, f64, f64)> = trajectories
        .iter()
        .flat_map(|tr| {
            tr.samples()
                .iter()
                .map(move |s| (s.t, tr.target_id, s.x, s.y))
        })
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    writeln!(writer, "t,target_id,x,y")?;
    for (t, id, x, y) in rows {
        writeln!(writer, "{t},{id},{x},{y}")?;
    }
    Ok(())
}
