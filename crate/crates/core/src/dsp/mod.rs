//! Signal-processing primitives: DC-blocking high-pass, STFT and the
//! conjugate-multiplication interferometric response.

mod filter;
mod stft;

pub use filter::{ButterworthHighpass, Section};
pub use stft::{
    fftshift, ifftshift, interpolated_peak, local_peaks, stft, StftConfig, TimeFrequencyMap,
    WindowKind,
};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::synth::IqCapture;

/// Default interferometric zero-padding factor.
pub const DEFAULT_ZERO_PAD: usize = 8;

/// High-pass both channels of a capture. `zero_phase` selects forward-backward
/// filtering instead of the default single causal pass.
pub fn highpass(
    capture: &IqCapture,
    order: usize,
    cutoff_hz: f64,
    zero_phase: bool,
) -> Result<IqCapture> {
    let filt = ButterworthHighpass::design(order, cutoff_hz, capture.sample_rate_hz)?;
    let run = |x: &[Complex64]| {
        if zero_phase {
            filt.apply_zero_phase(x)
        } else {
            filt.apply(x)
        }
    };
    let (ch1, ch2) = rayon::join(|| run(&capture.ch1), || run(&capture.ch2));
    IqCapture::new(ch1, ch2, capture.sample_rate_hz, capture.t0_s)
}

/// `r[k] = ch1[k] · conj(ch2[k])`.
pub fn interferometric_response(capture: &IqCapture) -> Result<Vec<Complex64>> {
    if capture.ch1.len() != capture.ch2.len() {
        return Err(Error::validation("channel length mismatch"));
    }
    Ok(capture
        .ch1
        .iter()
        .zip(&capture.ch2)
        .map(|(a, b)| a * b.conj())
        .collect())
}

/// STFT of the interferometric response with `zero_pad`× transform padding.
pub fn interferometric_stft(
    capture: &IqCapture,
    cfg: &StftConfig,
    zero_pad: usize,
) -> Result<TimeFrequencyMap> {
    let r = interferometric_response(capture)?;
    stft(
        &r,
        capture.sample_rate_hz,
        capture.t0_s,
        &cfg.zero_padded(zero_pad),
        "interferometric",
    )
}

/// Per-antenna Doppler STFTs.
pub fn antenna_stfts(
    capture: &IqCapture,
    cfg: &StftConfig,
) -> Result<(TimeFrequencyMap, TimeFrequencyMap)> {
    let (a, b) = rayon::join(
        || stft(&capture.ch1, capture.sample_rate_hz, capture.t0_s, cfg, "antenna1"),
        || stft(&capture.ch2, capture.sample_rate_hz, capture.t0_s, cfg, "antenna2"),
    );
    Ok((a?, b?))
}
