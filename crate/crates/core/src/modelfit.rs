//! Model-based baseline: fit per-target `(v_r, omega)` to an observed
//! interferometric magnitude spectrum.
//!
//! Model spectra are unit-amplitude lines at the full-response frequencies,
//! rendered as Hann main lobes and summed coherently, then compared by
//! magnitude. The loss is the L2 residual after the best non-negative
//! scale, `||o||² - <o, m>² / ||m||²`, so absolute amplitude is not fitted.
//!
//! Line frequencies depend only on differences of radial velocity, so the
//! mean radial velocity is pinned to `FitConfig::v_anchor_mps`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::TimeFrequencyMap;
use crate::error::{Error, Result};
use crate::model::{hann_lobe, line_frequency, FreqGrid, PointState, SpectralLine};
use crate::scene::ArrayGeometry;

pub const MAX_TARGETS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn len(&self) -> usize {
        ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, i: usize) -> f64 {
        self.min + i as f64 * self.step
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.step > 0.0) || !self.min.is_finite() || !self.max.is_finite() || self.max < self.min {
            return Err(Error::validation(format!(
                "{name} grid needs finite min <= max and step > 0"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub omega: GridSpec,
    /// Radial-velocity grid. Its extent bounds the velocity spread.
    pub v_radial: GridSpec,
    pub v_anchor_mps: f64,
    /// Refinement stops once both steps fall below this.
    pub refine_tol: f64,
    pub max_sweeps: usize,
    /// Lobe half-support in resolution cells.
    pub support_cells: f64,
    /// Upper bound on grid evaluations.
    pub max_grid_evaluations: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            omega: GridSpec {
                min: -0.2,
                max: 0.2,
                step: 0.01,
            },
            v_radial: GridSpec {
                min: -1.0,
                max: 1.0,
                step: 0.005,
            },
            v_anchor_mps: 0.0,
            refine_tol: 1e-4,
            max_sweeps: 10_000,
            support_cells: 2.0,
            max_grid_evaluations: 20_000_000,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.omega.validate("omega")?;
        self.v_radial.validate("v_radial")?;
        if !(self.refine_tol > 0.0) || !(self.support_cells > 0.0) {
            return Err(Error::validation("refine_tol and support_cells must be positive"));
        }
        Ok(())
    }
}

/// Magnitude spectrum on a DC-centered grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedSpectrum {
    pub mags: Vec<f64>,
    pub grid: FreqGrid,
    /// Analysis resolution `fs / window_len`.
    pub resolution_hz: f64,
}

impl ObservedSpectrum {
    pub fn from_frame(map: &TimeFrequencyMap, frame: usize) -> Result<Self> {
        if frame >= map.n_frames() {
            return Err(Error::Range(format!(
                "frame {frame} outside map of {} frames",
                map.n_frames()
            )));
        }
        Ok(Self {
            mags: map.frame(frame).iter().map(|z| z.norm()).collect(),
            grid: FreqGrid {
                n_bins: map.fft_len,
                bin_width_hz: map.bin_width_hz(),
            },
            resolution_hz: map.resolution_hz(),
        })
    }

    /// Magnitude of the coherent lobe rendering of `lines`.
    pub fn from_lines(lines: &[SpectralLine], grid: FreqGrid, resolution_hz: f64, support_cells: f64) -> Self {
        let c = crate::model::rasterize_lobes(lines, &grid, resolution_hz, support_cells);
        Self {
            mags: c.iter().map(|z| z.norm()).collect(),
            grid,
            resolution_hz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub v_radial_mps: f64,
    pub omega_radps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Sorted by radial velocity.
    pub params: Vec<FitParams>,
    pub loss: f64,
    /// Loss divided by the observed spectrum energy.
    pub relative_loss: f64,
    pub grid_loss: f64,
    pub grid_evaluations: usize,
    /// Loss after the grid stage and after every refinement sweep.
    pub loss_history: Vec<f64>,
    pub config: FitConfig,
}

struct Evaluator<'a> {
    obs: &'a ObservedSpectrum,
    obs_energy: f64,
    geom: &'a ArrayGeometry,
    span_bins: f64,
}

impl<'a> Evaluator<'a> {
    fn new(obs: &'a ObservedSpectrum, geom: &'a ArrayGeometry, support_cells: f64) -> Self {
        Self {
            obs,
            obs_energy: obs.mags.iter().map(|m| m * m).sum(),
            geom,
            span_bins: support_cells * obs.resolution_hz / obs.grid.bin_width_hz,
        }
    }

    fn loss(&self, v: &[f64], w: &[f64]) -> f64 {
        let n = v.len();
        let pts: Vec<PointState> = (0..n)
            .map(|i| PointState::new(v[i], w[i], [0.0; 2], 1.0))
            .collect();
        let mut lines: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
        for a in &pts {
            for b in &pts {
                let f = line_frequency(a, b, self.geom);
                let c = self.obs.grid.fractional_bin(f);
                let lo = (c - self.span_bins).ceil().max(0.0);
                let hi = (c + self.span_bins).floor().min(self.obs.grid.n_bins as f64 - 1.0);
                if hi >= lo {
                    lines.push((f, lo as usize, hi as usize));
                }
            }
        }
        lines.sort_by_key(|a| a.1);
        let (mut dot, mut mm) = (0.0, 0.0);
        let mut b = 0usize;
        let mut i = 0;
        while i < lines.len() {
            // Merge overlapping supports so every bin is visited once.
            let mut end = lines[i].2;
            let mut j = i + 1;
            while j < lines.len() && lines[j].1 <= end {
                end = end.max(lines[j].2);
                j += 1;
            }
            let start = lines[i].1.max(b);
            for bin in start..=end {
                let f = self.obs.grid.freq(bin);
                let m: f64 = lines[i..j]
                    .iter()
                    .filter(|l| bin >= l.1 && bin <= l.2)
                    .map(|l| hann_lobe((f - l.0) / self.obs.resolution_hz))
                    .sum::<f64>()
                    .abs();
                dot += m * self.obs.mags[bin];
                mm += m * m;
            }
            b = end + 1;
            i = j;
        }
        if mm > 0.0 {
            (self.obs_energy - dot * dot / mm).max(0.0)
        } else {
            self.obs_energy
        }
    }
}

fn anchored(v: &[f64], anchor: f64) -> Vec<f64> {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - mean + anchor).collect()
}

/// Canonical velocity index tuples: first index 0, non-decreasing.
fn v_tuples(n: usize, nv: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0usize]];
    for _ in 1..n {
        out = out
            .into_iter()
            .flat_map(|t| {
                let last = *t.last().unwrap_or(&0);
                (last..nv).map(move |k| {
                    let mut u = t.clone();
                    u.push(k);
                    u
                })
            })
            .collect();
    }
    out
}

fn w_tuples(n: usize, nw: usize, vt: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for i in 0..n {
        out = out
            .into_iter()
            .flat_map(|t: Vec<usize>| {
                // Equal velocities: order by omega to skip label swaps.
                let lo = if i > 0 && vt[i] == vt[i - 1] { t[i - 1] } else { 0 };
                (lo..nw).map(move |k| {
                    let mut u = t.clone();
                    u.push(k);
                    u
                })
            })
            .collect();
    }
    out
}

/// Loss of a parameter set against `obs` under the fit's model.
pub fn fit_loss(obs: &ObservedSpectrum, geom: &ArrayGeometry, params: &[FitParams], support_cells: f64) -> f64 {
    let ev = Evaluator::new(obs, geom, support_cells);
    let v: Vec<f64> = params.iter().map(|p| p.v_radial_mps).collect();
    let w: Vec<f64> = params.iter().map(|p| p.omega_radps).collect();
    ev.loss(&v, &w)
}

/// Grid search followed by coordinate descent with step halving.
pub fn fit(obs: &ObservedSpectrum, n_targets: usize, geom: &ArrayGeometry, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    geom.validate()?;
    if n_targets == 0 || n_targets > MAX_TARGETS {
        return Err(Error::validation(format!(
            "model fit supports 1..={MAX_TARGETS} targets, got {n_targets}"
        )));
    }
    if obs.mags.is_empty() || obs.mags.len() != obs.grid.n_bins {
        return Err(Error::validation("observed spectrum is empty or mismatched with its grid"));
    }
    let ev = Evaluator::new(obs, geom, cfg.support_cells);
    if !(ev.obs_energy > 0.0) {
        return Err(Error::validation("observed spectrum has no energy"));
    }

    let nv = cfg.v_radial.len();
    let nw = cfg.omega.len();
    let vts = v_tuples(n_targets, nv);
    let estimate: usize = vts.len().saturating_mul(nw.saturating_pow(n_targets as u32));
    if estimate > cfg.max_grid_evaluations {
        return Err(Error::validation(format!(
            "grid needs about {estimate} evaluations, above the limit of {}",
            cfg.max_grid_evaluations
        )));
    }

    let best = vts
        .par_iter()
        .map(|vt| {
            let v: Vec<f64> = vt.iter().map(|&i| cfg.v_radial.value(i)).collect();
            let v = anchored(&v, cfg.v_anchor_mps);
            let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
            let mut count = 0usize;
            for wt in w_tuples(n_targets, nw, vt) {
                let w: Vec<f64> = wt.iter().map(|&i| cfg.omega.value(i)).collect();
                let l = ev.loss(&v, &w);
                count += 1;
                if best.as_ref().is_none_or(|b| l < b.0) {
                    best = Some((l, vt.clone(), wt));
                }
            }
            (best, count)
        })
        .reduce(
            || (None, 0),
            |a, b| {
                let pick = match (a.0, b.0) {
                    (None, x) | (x, None) => x,
                    (Some(x), Some(y)) => {
                        // Lowest loss, then lexicographic index tuple.
                        let ord = x.0.total_cmp(&y.0).then_with(|| (&x.1, &x.2).cmp(&(&y.1, &y.2)));
                        Some(if ord.is_le() { x } else { y })
                    }
                };
                (pick, a.1 + b.1)
            },
        );
    let (Some((grid_loss, vt, wt)), evaluations) = best else {
        return Err(Error::Numeric("grid search produced no candidate".into()));
    };

    let mut v: Vec<f64> = anchored(
        &vt.iter().map(|&i| cfg.v_radial.value(i)).collect::<Vec<_>>(),
        cfg.v_anchor_mps,
    );
    let mut w: Vec<f64> = wt.iter().map(|&i| cfg.omega.value(i)).collect();
    let mut loss = grid_loss;
    let mut history = vec![loss];
    let mut step_v = cfg.v_radial.step;
    let mut step_w = cfg.omega.step;
    let mut sweeps = 0;
    while (step_v >= cfg.refine_tol || step_w >= cfg.refine_tol) && sweeps < cfg.max_sweeps {
        sweeps += 1;
        let mut improved = false;
        // With one target the velocity is fixed by the anchor.
        let v_coords = if n_targets > 1 { n_targets } else { 0 };
        for c in 0..v_coords + n_targets {
            for sign in [1.0, -1.0] {
                let (mut tv, mut tw) = (v.clone(), w.clone());
                if c < v_coords {
                    tv[c] += sign * step_v;
                    tv = anchored(&tv, cfg.v_anchor_mps);
                } else {
                    tw[c - v_coords] += sign * step_w;
                }
                let l = ev.loss(&tv, &tw);
                if l < loss {
                    loss = l;
                    v = tv;
                    w = tw;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step_v *= 0.5;
            step_w *= 0.5;
        }
        history.push(loss);
    }

    let mut params: Vec<FitParams> = v
        .iter()
        .zip(&w)
        .map(|(&v, &w)| FitParams {
            v_radial_mps: v,
            omega_radps: w,
        })
        .collect();
    params.sort_by(|a, b| {
        a.v_radial_mps
            .total_cmp(&b.v_radial_mps)
            .then(a.omega_radps.total_cmp(&b.omega_radps))
    });
    Ok(FitResult {
        params,
        loss,
        relative_loss: loss / ev.obs_energy,
        grid_loss,
        grid_evaluations: evaluations,
        loss_history: history,
        config: *cfg,
    })
}

/// Unit-amplitude full-response lines for a parameter set, as used by the fit.
pub fn model_lines(params: &[FitParams], geom: &ArrayGeometry) -> Vec<SpectralLine> {
    let pts: Vec<PointState> = params
        .iter()
        .map(|p| PointState::new(p.v_radial_mps, p.omega_radps, [0.0; 2], 1.0))
        .collect();
    let mut out = Vec::new();
    for (n, a) in pts.iter().enumerate() {
        for (k, b) in pts.iter().enumerate() {
            out.push(SpectralLine {
                freq_hz: line_frequency(a, b, geom),
                amplitude: Complex64::new(1.0, 0.0),
                kind: if n == k {
                    crate::model::LineKind::SelfTerm
                } else {
                    crate::model::LineKind::CrossTerm
                },
                n,
                k,
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> ArrayGeometry {
        ArrayGeometry::standard(40e9, 20.0).unwrap()
    }

    fn grid() -> FreqGrid {
        FreqGrid {
            n_bins: 8192,
            bin_width_hz: 1920.0 / 8192.0,
        }
    }

    const RES: f64 = 1920.0 / 1024.0;

    fn observed(params: &[FitParams]) -> ObservedSpectrum {
        ObservedSpectrum::from_lines(&model_lines(params, &geom()), grid(), RES, 2.0)
    }

    fn p(v: f64, w: f64) -> FitParams {
        FitParams {
            v_radial_mps: v,
            omega_radps: w,
        }
    }

    #[test]
    fn single_target_self_fit() {
        let truth = [p(0.0, 0.043)];
        let r = fit(&observed(&truth), 1, &geom(), &FitConfig::default()).unwrap();
        assert!((r.params[0].omega_radps - 0.043).abs() < 1e-4, "{r:?}");
        assert_eq!(r.params[0].v_radial_mps, 0.0);
    }

    #[test]
    fn two_target_recovery() {
        let truth = [p(-0.5, -0.053), p(0.5, 0.072)];
        let r = fit(&observed(&truth), 2, &geom(), &FitConfig::default()).unwrap();
        for (got, want) in r.params.iter().zip(&truth) {
            assert!((got.v_radial_mps - want.v_radial_mps).abs() < 0.01, "{r:?}");
            assert!((got.omega_radps - want.omega_radps).abs() < 0.005, "{r:?}");
        }
        assert!(r.loss_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn label_swap_has_identical_loss() {
        let obs = observed(&[p(-0.5, -0.053), p(0.5, 0.072)]);
        let a = fit_loss(&obs, &geom(), &[p(-0.3, 0.01), p(0.2, -0.02)], 2.0);
        let b = fit_loss(&obs, &geom(), &[p(0.2, -0.02), p(-0.3, 0.01)], 2.0);
        assert_eq!(a, b);
    }

    #[test]
    fn truth_on_grid_is_global_minimum() {
        let cfg = FitConfig {
            omega: GridSpec {
                min: -0.1,
                max: 0.1,
                step: 0.02,
            },
            v_radial: GridSpec {
                min: -0.5,
                max: 0.5,
                step: 0.1,
            },
            ..FitConfig::default()
        };
        let truth = [p(-0.3, -0.04), p(0.3, 0.06)];
        let obs = observed(&truth);
        let at_truth = fit_loss(&obs, &geom(), &truth, 2.0);
        for i in 0..cfg.v_radial.len() {
            for j in 0..cfg.v_radial.len() {
                for a in 0..cfg.omega.len() {
                    for b in 0..cfg.omega.len() {
                        let c = [
                            p(cfg.v_radial.value(i), cfg.omega.value(a)),
                            p(cfg.v_radial.value(j), cfg.omega.value(b)),
                        ];
                        assert!(at_truth <= fit_loss(&obs, &geom(), &c, 2.0));
                    }
                }
            }
        }
    }

    #[test]
    fn loss_is_scale_free() {
        let truth = [p(0.0, 0.02)];
        let mut obs = observed(&truth);
        let l1 = fit_loss(&obs, &geom(), &[p(0.0, 0.03)], 2.0);
        obs.mags.iter_mut().for_each(|m| *m *= 4.0);
        let l2 = fit_loss(&obs, &geom(), &[p(0.0, 0.03)], 2.0);
        assert!((l2 / 16.0 - l1).abs() < 1e-9 * l1.max(1e-12));
    }

    #[test]
    fn guards() {
        let obs = observed(&[p(0.0, 0.0)]);
        assert!(fit(&obs, 4, &geom(), &FitConfig::default()).is_err());
        assert!(fit(&obs, 0, &geom(), &FitConfig::default()).is_err());
        let empty = ObservedSpectrum {
            mags: vec![],
            grid: FreqGrid {
                n_bins: 0,
                bin_width_hz: 1.0,
            },
            resolution_hz: 1.0,
        };
        assert!(fit(&empty, 1, &geom(), &FitConfig::default()).is_err());
        let mut bad = FitConfig::default();
        bad.omega.step = 0.0;
        assert!(fit(&obs, 1, &geom(), &bad).is_err());
    }

    #[test]
    fn canonical_enumeration_counts() {
        assert_eq!(v_tuples(2, 5).len(), 5);
        assert_eq!(v_tuples(3, 4).len(), 10);
        // Equal velocity slot halves the omega pairs (with diagonal).
        assert_eq!(w_tuples(2, 4, &[0, 0]).len(), 10);
        assert_eq!(w_tuples(2, 4, &[0, 1]).len(), 16);
    }
}
