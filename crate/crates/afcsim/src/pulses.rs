//! Complex time-domain pulse envelopes.
//!
//! Amplitudes are in Rabi-frequency units (Hz) for control pulses and
//! arbitrary field units for the weak input. The Rabi convention throughout
//! the crate: a resonant square pulse of amplitude `Ω` and duration `T`
//! inverts a two-level atom when `Ω·T = 1/2`. Pulse area is `2π·∫|Ω|dt`, so a
//! π pulse has area π under this convention.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::DEFAULT_PREP_WINDOW_HZ;

/// Hyperfine splitting between |g⟩ and |s⟩. Control pulses on the s–e
/// transition run at a carrier displaced by this amount; the dynamics modules
/// absorb it into the rotating frame, so it appears only in carrier
/// bookkeeping.
pub const GROUND_SPLITTING_HZ: f64 = 10.2e6;

/// Which transition a pulse drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transition {
    /// |g⟩ ↔ |e⟩, the input/echo transition.
    GE,
    /// |s⟩ ↔ |e⟩, the control transition.
    SE,
}

/// Propagation direction along the crystal axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

/// Interpretation of the sech pulse `duration` argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationConvention {
    /// Duration is the FWHM of the amplitude envelope (default).
    AmplitudeFwhm,
    /// Duration is the sech time constant τ directly.
    TimeConstant,
}

/// FWHM of sech(t/τ) in units of τ: 2·arcsech(1/2).
const SECH_FWHM_PER_TAU: f64 = 2.633_915_793_849_633_4;

/// Complex envelope sampled on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseEnvelope {
    samples: Vec<C64>,
    t_start_s: f64,
    dt_s: f64,
    carrier_detuning_hz: f64,
    transition: Transition,
    direction: Direction,
}

impl PulseEnvelope {
    pub fn from_samples(
        samples: Vec<C64>,
        t_start_s: f64,
        dt_s: f64,
        carrier_detuning_hz: f64,
        transition: Transition,
        direction: Direction,
    ) -> Result<Self> {
        if !(dt_s > 0.0) {
            return Err(Error::invalid("pulse.dt_s", "must be > 0"));
        }
        if samples.len() < 2 {
            return Err(Error::invalid("pulse.samples", "need >= 2 samples"));
        }
        let peak = samples.iter().map(|s| s.norm()).fold(0.0, f64::max);
        if !peak.is_finite() {
            return Err(Error::invalid("pulse.samples", "non-finite amplitude"));
        }
        if peak > 0.0 {
            let first = samples.first().unwrap().norm();
            let last = samples.last().unwrap().norm();
            if first > 1e-4 * peak || last > 1e-4 * peak {
                return Err(Error::invalid(
                    "pulse.samples",
                    "envelope must decay below 1e-4 of peak at grid ends",
                ));
            }
        }
        Ok(PulseEnvelope {
            samples,
            t_start_s,
            dt_s,
            carrier_detuning_hz,
            transition,
            direction,
        })
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn t_start_s(&self) -> f64 {
        self.t_start_s
    }

    pub fn t_end_s(&self) -> f64 {
        self.t_start_s + self.dt_s * (self.samples.len() - 1) as f64
    }

    pub fn dt_s(&self) -> f64 {
        self.dt_s
    }

    /// Detuning of the carrier from its transition's line center.
    pub fn carrier_detuning_hz(&self) -> f64 {
        self.carrier_detuning_hz
    }

    /// Carrier offset from the g–e line center; s–e pulses include the
    /// ground-splitting displacement.
    pub fn absolute_carrier_offset_hz(&self) -> f64 {
        match self.transition {
            Transition::GE => self.carrier_detuning_hz,
            Transition::SE => self.carrier_detuning_hz - GROUND_SPLITTING_HZ,
        }
    }

    pub fn transition(&self) -> Transition {
        self.transition
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn peak_amplitude(&self) -> f64 {
        self.samples.iter().map(|s| s.norm()).fold(0.0, f64::max)
    }

    /// Linear interpolation of the envelope; zero outside the grid.
    pub fn amplitude_at(&self, t_s: f64) -> C64 {
        let x = (t_s - self.t_start_s) / self.dt_s;
        if x < 0.0 || x > (self.samples.len() - 1) as f64 {
            return C64::new(0.0, 0.0);
        }
        let i = (x.floor() as usize).min(self.samples.len() - 2);
        let frac = x - i as f64;
        self.samples[i] * (1.0 - frac) + self.samples[i + 1] * frac
    }

    /// Pulse area `2π·∫|Ω(t)|dt` in radians (trapezoid rule).
    pub fn area_rad(&self) -> f64 {
        let n = self.samples.len();
        let interior: f64 = self.samples[1..n - 1].iter().map(|s| s.norm()).sum();
        let edges = 0.5 * (self.samples[0].norm() + self.samples[n - 1].norm());
        2.0 * std::f64::consts::PI * (interior + edges) * self.dt_s
    }

    /// Energy integral `∫|Ω(t)|²dt` (arbitrary units; used for efficiency
    /// ratios of the weak field).
    pub fn energy(&self) -> f64 {
        let n = self.samples.len();
        let interior: f64 = self.samples[1..n - 1].iter().map(|s| s.norm_sqr()).sum();
        let edges = 0.5 * (self.samples[0].norm_sqr() + self.samples[n - 1].norm_sqr());
        (interior + edges) * self.dt_s
    }

    /// CSV export: `t_s,re,im`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t_s,re,im")?;
        for (i, s) in self.samples.iter().enumerate() {
            let t = self.t_start_s + i as f64 * self.dt_s;
            writeln!(w, "{t:.9e},{:.12e},{:.12e}", s.re, s.im)?;
        }
        Ok(())
    }
}

/// Real Gaussian envelope sampled at `dt_s`. `fwhm_s` is the intensity FWHM
/// (the duration a photodiode reports), so the transform-limited spectral
/// intensity FWHM is `2·ln2/(π·fwhm)`.
pub fn gaussian_pulse(
    fwhm_s: f64,
    peak_amplitude: f64,
    t_center_s: f64,
    dt_s: f64,
    transition: Transition,
    direction: Direction,
) -> Result<PulseEnvelope> {
    if !(fwhm_s > 0.0) {
        return Err(Error::invalid("pulse.fwhm_s", "must be > 0"));
    }
    // exp(-2 ln2 (2.8)^2) ≈ 2e-5, safely under the 1e-4 tail bound
    let half_span = 2.8 * fwhm_s;
    let n_half = (half_span / dt_s).ceil() as i64;
    let samples: Vec<C64> = (-n_half..=n_half)
        .map(|i| {
            let u = i as f64 * dt_s / fwhm_s;
            C64::new(
                peak_amplitude * (-2.0 * std::f64::consts::LN_2 * u * u).exp(),
                0.0,
            )
        })
        .collect();
    PulseEnvelope::from_samples(
        samples,
        t_center_s - n_half as f64 * dt_s,
        dt_s,
        0.0,
        transition,
        direction,
    )
}

/// Spectral intensity FWHM of a transform-limited Gaussian with the given
/// temporal intensity FWHM: `2·ln2/(π·fwhm)`.
pub fn gaussian_spectral_fwhm_hz(fwhm_s: f64) -> f64 {
    2.0 * std::f64::consts::LN_2 / (std::f64::consts::PI * fwhm_s)
}

fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (0.5 * (1.0 + (-2.0 * a).exp())).ln()
}

/// Complex hyperbolic secant pulse: amplitude `Ω₀·sech((t−t_c)/τ)` with the
/// instantaneous frequency sweeping `±chirp_width/2·tanh((t−t_c)/τ)`.
///
/// `duration_s` is the amplitude FWHM by default; see
/// [`sech_pulse_with_convention`] for the τ convention.
pub fn sech_pulse(
    duration_s: f64,
    peak_rabi_hz: f64,
    chirp_width_hz: f64,
    t_center_s: f64,
    dt_s: f64,
    transition: Transition,
    direction: Direction,
) -> Result<PulseEnvelope> {
    sech_pulse_with_convention(
        duration_s,
        peak_rabi_hz,
        chirp_width_hz,
        t_center_s,
        dt_s,
        transition,
        direction,
        DurationConvention::AmplitudeFwhm,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn sech_pulse_with_convention(
    duration_s: f64,
    peak_rabi_hz: f64,
    chirp_width_hz: f64,
    t_center_s: f64,
    dt_s: f64,
    transition: Transition,
    direction: Direction,
    convention: DurationConvention,
) -> Result<PulseEnvelope> {
    if !(duration_s > 0.0) || !(peak_rabi_hz > 0.0) {
        return Err(Error::invalid("pulse", "duration and Rabi must be > 0"));
    }
    if chirp_width_hz < 0.0 {
        return Err(Error::invalid("pulse.chirp_width_hz", "must be >= 0"));
    }
    if chirp_width_hz > DEFAULT_PREP_WINDOW_HZ {
        return Err(Error::invalid(
            "pulse.chirp_width_hz",
            format!(
                "{chirp_width_hz} Hz sweep exceeds the {DEFAULT_PREP_WINDOW_HZ} Hz preparation window"
            ),
        ));
    }
    let tau = match convention {
        DurationConvention::AmplitudeFwhm => duration_s / SECH_FWHM_PER_TAU,
        DurationConvention::TimeConstant => duration_s,
    };
    // sech(10.5) ≈ 5.5e-5 keeps the tails under the 1e-4 bound
    let half_span = 10.5 * tau;
    let n_half = (half_span / dt_s).ceil() as i64;
    let samples: Vec<C64> = (-n_half..=n_half)
        .map(|i| {
            let x = i as f64 * dt_s / tau;
            let amp = peak_rabi_hz / x.cosh();
            // phase with d(arg)/dt = 2π·(chirp/2)·tanh(x)
            let phase = 2.0 * std::f64::consts::PI * (chirp_width_hz / 2.0) * tau * ln_cosh(x);
            C64::from_polar(amp, phase)
        })
        .collect();
    PulseEnvelope::from_samples(
        samples,
        t_center_s - n_half as f64 * dt_s,
        dt_s,
        0.0,
        transition,
        direction,
    )
}

/// Sech time constant τ implied by a duration under the given convention.
pub fn sech_tau_s(duration_s: f64, convention: DurationConvention) -> f64 {
    match convention {
        DurationConvention::AmplitudeFwhm => duration_s / SECH_FWHM_PER_TAU,
        DurationConvention::TimeConstant => duration_s,
    }
}

/// Flat-top pulse with single zero-padding samples at the ends. Mostly a test
/// fixture: a resonant square pulse of area π is the textbook transfer pulse.
pub fn square_pulse(
    duration_s: f64,
    amplitude: f64,
    t_center_s: f64,
    dt_s: f64,
    transition: Transition,
    direction: Direction,
) -> Result<PulseEnvelope> {
    if !(duration_s > 0.0) {
        return Err(Error::invalid("pulse.duration_s", "must be > 0"));
    }
    let n = ((duration_s / dt_s).round() as usize).max(1);
    let mut samples = vec![C64::new(0.0, 0.0)];
    samples.extend(std::iter::repeat(C64::new(amplitude, 0.0)).take(n + 1));
    samples.push(C64::new(0.0, 0.0));
    PulseEnvelope::from_samples(
        samples,
        t_center_s - (n as f64 / 2.0 + 1.0) * dt_s,
        dt_s,
        0.0,
        transition,
        direction,
    )
}

/// Instantaneous frequency `(1/2π)·d(arg)/dt` at time `t_s`, by centered
/// finite difference of the sample phases.
pub fn instantaneous_frequency(pulse: &PulseEnvelope, t_s: f64) -> Result<f64> {
    let n = pulse.samples.len();
    let x = (t_s - pulse.t_start_s) / pulse.dt_s;
    if x < 1.0 || x > (n - 2) as f64 {
        return Err(Error::OutsideGrid {
            t_s,
            start_s: pulse.t_start_s + pulse.dt_s,
            end_s: pulse.t_end_s() - pulse.dt_s,
        });
    }
    let i = (x.round() as usize).clamp(1, n - 2);
    let fwd = pulse.samples[i + 1];
    let bwd = pulse.samples[i - 1];
    if fwd.norm() == 0.0 || bwd.norm() == 0.0 {
        return Ok(0.0);
    }
    // phase difference wrapped to (-π, π]; grids resolve the sweep so no
    // multi-turn unwrap is needed between adjacent samples
    let dphi = (fwd * bwd.conj()).arg();
    Ok(dphi / (4.0 * std::f64::consts::PI * pulse.dt_s))
}

/// Pulse area `2π·∫|Ω|dt` in radians.
pub fn pulse_area(pulse: &PulseEnvelope) -> f64 {
    pulse.area_rad()
}
