//! Butterworth high-pass filtering as cascaded second-order sections.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// One biquad, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Section {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Section {
    /// Frequency response at normalized angular frequency `w` (rad/sample).
    pub fn response(&self, w: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        (self.b[0] + self.b[1] * z1 + self.b[2] * z2) / (1.0 + self.a[0] * z1 + self.a[1] * z2)
    }
}

/// Digital Butterworth high-pass from the analog prototype via the bilinear
/// transform with cutoff prewarping.
#[derive(Debug, Clone, PartialEq)]
pub struct ButterworthHighpass {
    pub order: usize,
    pub cutoff_hz: f64,
    pub sample_rate_hz: f64,
    sections: Vec<Section>,
}

impl ButterworthHighpass {
    pub fn design(order: usize, cutoff_hz: f64, sample_rate_hz: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::validation("filter order must be at least 1"));
        }
        if !(cutoff_hz > 0.0) || cutoff_hz >= sample_rate_hz / 2.0 {
            return Err(Error::validation(format!(
                "cutoff {cutoff_hz} Hz must lie in (0, {}) Hz",
                sample_rate_hz / 2.0
            )));
        }
        let wc = (PI * cutoff_hz / sample_rate_hz).tan();
        let mut sections = Vec::with_capacity(order.div_ceil(2));
        for k in 0..order / 2 {
            // Conjugate pole pair of the normalized low-pass prototype.
            let angle = PI * (2 * k + order + 1) as f64 / (2 * order) as f64;
            let damp = -2.0 * angle.cos();
            let a0 = 1.0 + damp * wc + wc * wc;
            sections.push(Section {
                b: [1.0 / a0, -2.0 / a0, 1.0 / a0],
                a: [(2.0 * wc * wc - 2.0) / a0, (1.0 - damp * wc + wc * wc) / a0],
            });
        }
        if order % 2 == 1 {
            let a0 = 1.0 + wc;
            sections.push(Section {
                b: [1.0 / a0, -1.0 / a0, 0.0],
                a: [(wc - 1.0) / a0, 0.0],
            });
        }
        Ok(Self {
            order,
            cutoff_hz,
            sample_rate_hz,
            sections,
        })
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    pub fn response_at(&self, freq_hz: f64) -> Complex64 {
        let w = 2.0 * PI * freq_hz / self.sample_rate_hz;
        self.sections.iter().map(|s| s.response(w)).product()
    }

    /// Causal filtering from zero initial state (transposed direct form II).
    /// The coefficients are real, so real and imaginary parts are filtered
    /// independently.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = x.to_vec();
        for s in &self.sections {
            let mut z1 = Complex64::new(0.0, 0.0);
            let mut z2 = Complex64::new(0.0, 0.0);
            for v in y.iter_mut() {
                let input = *v;
                let out = s.b[0] * input + z1;
                z1 = s.b[1] * input - s.a[0] * out + z2;
                z2 = s.b[2] * input - s.a[1] * out;
                *v = out;
            }
        }
        y
    }

    /// Forward-backward (zero-phase) filtering; squared magnitude response.
    pub fn apply_zero_phase(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = self.apply(x);
        y.reverse();
        let mut y = self.apply(&y);
        y.reverse();
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, fs: f64, n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * freq * k as f64 / fs))
            .collect()
    }

    fn db(x: f64) -> f64 {
        20.0 * x.log10()
    }

    #[test]
    fn analytic_response_matches_butterworth_magnitude() {
        let f = ButterworthHighpass::design(3, 1.0, 1920.0).unwrap();
        assert_eq!(f.sections().len(), 2);
        // Prewarped bilinear Butterworth: |H| = 1/sqrt(1 + (tan(pi fc/fs)/tan(pi f/fs))^(2N)).
        for &freq in &[0.3, 1.0, 2.0, 10.0, 100.0, 500.0] {
            let ratio = (PI * 1.0 / 1920.0).tan() / (PI * freq / 1920.0).tan();
            let expect = 1.0 / (1.0 + ratio.powi(6)).sqrt();
            let got = f.response_at(freq).norm();
            assert!((got - expect).abs() < 1e-9, "{freq}: {got} vs {expect}");
        }
    }

    #[test]
    fn dc_is_removed() {
        let f = ButterworthHighpass::design(3, 1.0, 1920.0).unwrap();
        let x = vec![Complex64::new(0.3, -0.4); 1920 * 20];
        let y = f.apply(&x);
        let tail = y[y.len() - 1920..].iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(tail < 1e-3 * 0.5, "{tail}");
    }

    #[test]
    fn passband_tone_unchanged() {
        let f = ButterworthHighpass::design(3, 1.0, 1920.0).unwrap();
        let y = f.apply(&tone(100.0, 1920.0, 1920 * 10));
        let amp = y[y.len() - 1920..].iter().map(|z| z.norm()).sum::<f64>() / 1920.0;
        assert!(db(amp).abs() < 0.1, "{}", db(amp));
    }

    #[test]
    fn cutoff_tone_is_three_db_down() {
        let f = ButterworthHighpass::design(3, 1.0, 1920.0).unwrap();
        let y = f.apply(&tone(1.0, 1920.0, 1920 * 30));
        let amp = y[y.len() - 1920..].iter().map(|z| z.norm()).sum::<f64>() / 1920.0;
        assert!((db(amp) + 3.0).abs() < 0.2, "{}", db(amp));
    }

    #[test]
    fn zero_phase_squares_magnitude() {
        let f = ButterworthHighpass::design(3, 1.0, 1920.0).unwrap();
        let x = tone(2.0, 1920.0, 1920 * 40);
        let y = f.apply_zero_phase(&x);
        let mid = y.len() / 2;
        let expect = f.response_at(2.0).norm_sqr();
        assert!((y[mid].norm() - expect).abs() < 1e-3);
        // No phase shift in the steady state.
        assert!((y[mid] / x[mid]).arg().abs() < 1e-3);
    }

    #[test]
    fn impulse_response_decays() {
        let f = ButterworthHighpass::design(3, 1.0, 1920.0).unwrap();
        let mut x = vec![Complex64::new(0.0, 0.0); 1920 * 12];
        x[0] = Complex64::new(1.0, 0.0);
        let y = f.apply(&x);
        let peak = y.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let after = (10.0 / 1.0 * 1920.0) as usize;
        let late = y[after..].iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(late < 1e-6 * peak, "{late} vs {peak}");
    }

    #[test]
    fn invalid_designs() {
        assert!(ButterworthHighpass::design(0, 1.0, 1920.0).is_err());
        assert!(ButterworthHighpass::design(3, 960.0, 1920.0).is_err());
        assert!(ButterworthHighpass::design(3, 0.0, 1920.0).is_err());
    }
}
