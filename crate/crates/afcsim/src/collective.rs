//! Discrete-atom phasor model of the collective emission.
//!
//! A fast oracle for echo timing, spin freeze/resume and dephasing, valid in
//! the weak-absorption limit: each sampled atom contributes an intensity
//! weight `w_j = |c_j|²` and a phasor `e^{−i2πδ_j t}` to the phase-matched
//! forward emission. Absolute efficiencies live in the medium module; this one
//! only knows about relative phases.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pulses::PulseEnvelope;
use crate::spectral::AbsorptionProfile;

const TAU: f64 = std::f64::consts::TAU;

/// One sampled atom of the ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledAtom {
    /// Optical detuning δ_j.
    pub delta_hz: f64,
    /// Spin detuning ε_j.
    pub epsilon_hz: f64,
    /// Position along the crystal as a fraction of its length.
    pub z: f64,
    /// Excitation amplitude c_j.
    pub amplitude: C64,
    /// Phase accumulated while the excitation was parked in the spin state.
    pub stored_phase_rad: f64,
}

/// A seeded draw of atoms from the comb density.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomSample {
    atoms: Vec<SampledAtom>,
    /// Tooth spacing of the generating profile, if it had comb structure;
    /// used to reject freeze times after the echo has already left.
    rephasing_period_s: Option<f64>,
}

impl AtomSample {
    pub fn from_atoms(atoms: Vec<SampledAtom>, rephasing_period_s: Option<f64>) -> Self {
        AtomSample {
            atoms,
            rephasing_period_s,
        }
    }

    pub fn atoms(&self) -> &[SampledAtom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn rephasing_period_s(&self) -> Option<f64> {
        self.rephasing_period_s
    }

    /// CSV dump for debugging: `delta_hz,epsilon_hz,z,weight,stored_phase_rad`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "delta_hz,epsilon_hz,z,weight,stored_phase_rad")?;
        for a in &self.atoms {
            writeln!(
                w,
                "{:.6},{:.6},{:.9},{:.12e},{:.9}",
                a.delta_hz,
                a.epsilon_hz,
                a.z,
                a.amplitude.norm_sqr(),
                a.stored_phase_rad
            )?;
        }
        Ok(())
    }
}

/// Spectral amplitude of an envelope at a detuning, relative to the envelope
/// center time.
fn spectral_amplitude(pulse: &PulseEnvelope, delta_hz: f64) -> C64 {
    let t_c = 0.5 * (pulse.t_start_s() + pulse.t_end_s());
    let dt = pulse.dt_s();
    let mut acc = C64::new(0.0, 0.0);
    for (i, s) in pulse.samples().iter().enumerate() {
        let t = pulse.t_start_s() + i as f64 * dt - t_c;
        acc += s * C64::from_polar(1.0, -TAU * delta_hz * t);
    }
    acc * dt
}

/// Draw `n` atoms: δ_j with density ∝ d(δ), ε_j Gaussian with the given FWHM,
/// z_j uniform, c_j ∝ the input's spectral amplitude at δ_j (flat when `input`
/// is `None`). Deterministic under a fixed seed.
pub fn sample_atoms(
    profile: &AbsorptionProfile,
    input: Option<&PulseEnvelope>,
    spin_fwhm_hz: f64,
    n: usize,
    seed: u64,
) -> Result<AtomSample> {
    if n < 1 {
        return Err(Error::invalid("n", "need at least one atom"));
    }
    if spin_fwhm_hz < 0.0 {
        return Err(Error::invalid("spin_fwhm_hz", "must be >= 0"));
    }
    let d = profile.optical_depth();
    let x = profile.detunings_hz();
    let h = profile.grid_step_hz();
    // cumulative cell masses of the piecewise-linear density
    let mut cum = Vec::with_capacity(d.len());
    let mut total = 0.0;
    for i in 0..d.len() - 1 {
        total += 0.5 * (d[i] + d[i + 1]) * h;
        cum.push(total);
    }
    if total <= 0.0 {
        return Err(Error::invalid("profile", "all-zero absorption profile"));
    }

    // pre-tabulate the input spectrum on the profile grid
    let spectrum: Option<Vec<C64>> = input.map(|p| {
        x.par_iter()
            .map(|&delta| spectral_amplitude(p, delta))
            .collect()
    });

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let spin = if spin_fwhm_hz > 0.0 {
        let sigma = spin_fwhm_hz / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
        Some(Normal::new(0.0, sigma).expect("valid sigma"))
    } else {
        None
    };

    let mut atoms = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.gen::<f64>() * total;
        let cell = cum.partition_point(|&c| c < u).min(d.len() - 2);
        let prev = if cell == 0 { 0.0 } else { cum[cell - 1] };
        let mass = cum[cell] - prev;
        let v = ((u - prev) / mass).clamp(0.0, 1.0);
        let (da, db) = (d[cell], d[cell + 1]);
        // invert the linear-density CDF within the cell
        let off = if (db - da).abs() < 1e-12 * da.abs().max(db.abs()).max(1e-300) {
            v * h
        } else {
            let disc = (da * da + 2.0 * (db - da) * v * mass / h).max(0.0);
            (disc.sqrt() - da) * h / (db - da)
        };
        let delta = x[cell] + off.clamp(0.0, h);

        let epsilon = spin.map_or(0.0, |dist| dist.sample(&mut rng));
        let z: f64 = rng.gen();
        let amplitude = match &spectrum {
            None => C64::new(1.0, 0.0),
            Some(table) => {
                let pos = ((delta - x[0]) / h).max(0.0);
                let i = (pos.floor() as usize).min(table.len() - 2);
                let frac = pos - i as f64;
                table[i] * (1.0 - frac) + table[i + 1] * frac
            }
        };
        atoms.push(SampledAtom {
            delta_hz: delta,
            epsilon_hz: epsilon,
            z,
            amplitude,
            stored_phase_rad: 0.0,
        });
    }

    // comb spacing hint for the freeze-time check
    let maxima = profile.local_maxima_hz();
    let rephasing_period_s = if maxima.len() >= 2 {
        let spacing =
            (maxima.last().unwrap() - maxima.first().unwrap()) / (maxima.len() - 1) as f64;
        Some(1.0 / spacing)
    } else {
        None
    };

    Ok(AtomSample {
        atoms,
        rephasing_period_s,
    })
}

/// Normalized phase-matched emission intensity
/// `|Σ_j w_j e^{i(φ_j − 2πδ_j t)}|² / (Σ_j w_j)²` with `w_j = |c_j|²`.
///
/// The forward-direction `e^{−ikz_j}` factors cancel and never enter.
pub fn collective_intensity(sample: &AtomSample, t_s: f64) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    let mut norm = 0.0;
    for a in &sample.atoms {
        let w = a.amplitude.norm_sqr();
        acc += w * C64::from_polar(1.0, a.stored_phase_rad - TAU * a.delta_hz * t_s);
        norm += w;
    }
    acc.norm_sqr() / (norm * norm)
}

/// Intensity on a uniform time grid; per-atom incremental rotators keep the
/// cost at one complex multiply per (atom, time) pair. Atoms are reduced in
/// fixed-size chunks with an ordered final sum, so results are bit-stable
/// across thread counts.
pub fn intensity_trace(sample: &AtomSample, t0_s: f64, dt_s: f64, n: usize) -> Vec<f64> {
    let chunk: usize = 2048;
    let partial: Vec<(Vec<C64>, f64)> = sample
        .atoms
        .par_chunks(chunk)
        .map(|atoms| {
            let mut acc = vec![C64::new(0.0, 0.0); n];
            let mut norm = 0.0;
            for a in atoms {
                let w = a.amplitude.norm_sqr();
                norm += w;
                let mut p = C64::from_polar(w, a.stored_phase_rad - TAU * a.delta_hz * t0_s);
                let rot = C64::from_polar(1.0, -TAU * a.delta_hz * dt_s);
                for slot in acc.iter_mut() {
                    *slot += p;
                    p *= rot;
                }
            }
            (acc, norm)
        })
        .collect();
    let mut acc = vec![C64::new(0.0, 0.0); n];
    let mut norm = 0.0;
    for (a, w) in partial {
        for (slot, v) in acc.iter_mut().zip(a) {
            *slot += v;
        }
        norm += w;
    }
    acc.into_iter()
        .map(|v| v.norm_sqr() / (norm * norm))
        .collect()
}

/// Detection floor below which a window is declared echo-free.
pub const ECHO_FLOOR: f64 = 1e-4;

/// Time of the intensity maximum inside `window`, refined by a parabolic fit
/// around the best grid point.
pub fn echo_time(sample: &AtomSample, window: (f64, f64)) -> Result<f64> {
    echo_time_with_step(sample, window, (window.1 - window.0) / 1024.0)
}

pub fn echo_time_with_step(sample: &AtomSample, window: (f64, f64), step_s: f64) -> Result<f64> {
    let (t0, t1) = window;
    if !(t1 > t0) || !(step_s > 0.0) {
        return Err(Error::invalid("window", "need t1 > t0 and step > 0"));
    }
    let n = ((t1 - t0) / step_s).ceil() as usize + 1;
    let trace = intensity_trace(sample, t0, step_s, n);
    let (k, &peak) = trace
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    if peak < ECHO_FLOOR {
        return Err(Error::NoEcho {
            floor: ECHO_FLOOR,
            start_s: t0,
            end_s: t1,
        });
    }
    let t_peak = t0 + k as f64 * step_s;
    if k == 0 || k == n - 1 {
        return Ok(t_peak);
    }
    // parabolic refinement on the three points around the maximum
    let (ym, y0, yp) = (trace[k - 1], trace[k], trace[k + 1]);
    let denom = ym - 2.0 * y0 + yp;
    if denom.abs() < 1e-300 {
        return Ok(t_peak);
    }
    let shift = 0.5 * (ym - yp) / denom;
    Ok(t_peak + shift.clamp(-1.0, 1.0) * step_s)
}

/// Freeze the optical phases at `t_prime` for a hold of `t_s`: each atom keeps
/// `e^{−i2πδ_j t'}`, accumulates the spin phase `e^{−i2πε_j t_s}`, and resumes
/// optical evolution afterward. Subsequent [`collective_intensity`] peaks at
/// `t' + t_s + t''` with `t' + t'' = 1/Δ`, independent of `t'`.
pub fn spin_freeze_resume(sample: &AtomSample, t_prime_s: f64, t_s_s: f64) -> Result<AtomSample> {
    if t_prime_s < 0.0 || t_s_s < 0.0 {
        return Err(Error::invalid("freeze", "times must be >= 0"));
    }
    if let Some(period) = sample.rephasing_period_s {
        if t_prime_s >= period {
            return Err(Error::invalid(
                "t_prime_s",
                format!("{t_prime_s} s is past the rephasing time 1/Δ = {period} s"),
            ));
        }
    }
    let atoms = sample
        .atoms
        .iter()
        .map(|a| {
            let mut out = *a;
            // optical clock pauses for t_s while the spin phase accrues
            out.stored_phase_rad += TAU * (a.delta_hz - a.epsilon_hz) * t_s_s;
            out
        })
        .collect();
    Ok(AtomSample {
        atoms,
        rephasing_period_s: sample.rephasing_period_s,
    })
}

/// Intensity reduction `|⟨e^{−i2πε t}⟩|²` for a Gaussian spin line with the
/// given FWHM: `exp(−π²·fwhm²·t²/(2·ln2))`.
pub fn dephasing_factor(spin_fwhm_hz: f64, t_s_s: f64) -> f64 {
    let x = spin_fwhm_hz * t_s_s;
    (-std::f64::consts::PI.powi(2) / (2.0 * std::f64::consts::LN_2) * x * x).exp()
}

/// Trace CSV export: `t_s,intensity`.
pub fn write_trace_csv<W: std::io::Write>(
    mut w: W,
    t0_s: f64,
    dt_s: f64,
    trace: &[f64],
) -> Result<()> {
    writeln!(w, "t_s,intensity")?;
    for (i, v) in trace.iter().enumerate() {
        writeln!(w, "{:.9e},{:.12e}", t0_s + i as f64 * dt_s, v)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::{gaussian_pulse, Direction, Transition};
    use crate::spectral::{build_comb, CombSpec, PeakShape};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn comb(delta_hz: f64, n_peaks: u32) -> CombSpec {
        CombSpec {
            delta_hz,
            gamma_hz: 100e3,
            d_peak: 2.0,
            d_background: 0.0,
            n_peaks,
            peak_shape: PeakShape::Gaussian,
            center_offset_hz: 0.0,
        }
    }

    fn input_450ns() -> PulseEnvelope {
        gaussian_pulse(450e-9, 1.0, 0.0, 4e-9, Transition::GE, Direction::Forward).unwrap()
    }

    #[test]
    fn sampling_is_deterministic_and_respects_spin_width() {
        let profile = build_comb(&comb(250e3, 9)).unwrap();
        let a = sample_atoms(&profile, None, 26e3, 2000, 7).unwrap();
        let b = sample_atoms(&profile, None, 26e3, 2000, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_atoms(&profile, None, 0.0, 2000, 7).unwrap();
        assert!(c.atoms().iter().all(|at| at.epsilon_hz == 0.0));
    }

    #[test]
    fn histogram_matches_comb_density() {
        let profile = build_comb(&comb(250e3, 9)).unwrap();
        let n = 100_000;
        let sample = sample_atoms(&profile, None, 0.0, n, 42).unwrap();
        // chi-square over coarse bins against the piecewise-linear density
        let d = profile.optical_depth();
        let x = profile.detunings_hz();
        let h = profile.grid_step_hz();
        let cells_per_bin = 8;
        let n_cells = d.len() - 1;
        let n_bins = n_cells / cells_per_bin;
        let mut expected = vec![0.0f64; n_bins];
        for i in 0..n_bins * cells_per_bin {
            expected[i / cells_per_bin] += 0.5 * (d[i] + d[i + 1]) * h;
        }
        let total: f64 = expected.iter().sum();
        let mut observed = vec![0.0f64; n_bins];
        let bin_width = cells_per_bin as f64 * h;
        for a in sample.atoms() {
            let k = (((a.delta_hz - x[0]) / bin_width).floor() as usize).min(n_bins - 1);
            observed[k] += 1.0;
        }
        let mut chi2 = 0.0;
        let mut df = 0usize;
        for (o, e) in observed.iter().zip(&expected) {
            let e_n = e / total * n as f64;
            if e_n > 5.0 {
                chi2 += (o - e_n).powi(2) / e_n;
                df += 1;
            }
        }
        let bound = df as f64 + 3.0 * (2.0 * df as f64).sqrt();
        assert!(chi2 < bound, "chi2 = {chi2}, bound = {bound} (df = {df})");
    }

    #[test]
    fn intensity_starts_at_unity() {
        let profile = build_comb(&comb(250e3, 9)).unwrap();
        let sample = sample_atoms(&profile, Some(&input_450ns()), 0.0, 5000, 1).unwrap();
        assert_relative_eq!(collective_intensity(&sample, 0.0), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn comb_revives_at_inverse_delta() {
        for (delta, expect_us) in [(250e3, 4.0), (1e6, 1.0), (200e3, 5.0)] {
            let n_peaks = if delta >= 1e6 { 2 } else { 9 };
            let profile = build_comb(&comb(delta, n_peaks)).unwrap();
            let sample = sample_atoms(&profile, None, 0.0, 100_000, 11).unwrap();
            let expect = expect_us * 1e-6;
            let t = echo_time(&sample, (0.6 * expect, 1.4 * expect)).unwrap();
            // finite finesse pulls the revival slightly early (intra-tooth
            // dephasing envelope); 1% covers it at F = 2.5
            assert_relative_eq!(t, expect, max_relative = 0.01);
        }
    }

    #[test]
    fn flat_gaussian_line_shows_free_induction_decay_only() {
        // single broad line: FID with no revival
        let spec = CombSpec {
            delta_hz: 2e6,
            gamma_hz: 500e3,
            d_peak: 1.0,
            d_background: 0.0,
            n_peaks: 1,
            peak_shape: PeakShape::Gaussian,
            center_offset_hz: 0.0,
        };
        let profile = build_comb(&spec).unwrap();
        let sample = sample_atoms(&profile, None, 0.0, 100_000, 3).unwrap();
        // analytic: |char fn|² of the Gaussian line
        let sigma = 500e3 / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
        for t in [0.2e-6, 0.5e-6, 1.0e-6] {
            let expect = (-(TAU * sigma * t).powi(2)).exp();
            assert_abs_diff_eq!(collective_intensity(&sample, t), expect, epsilon = 0.01);
        }
        // no revival above 1e-2 past 3× the inverse linewidth
        let t_start = 3.0 / 500e3;
        let trace = intensity_trace(&sample, t_start, 0.05e-6, 200);
        assert!(trace.iter().all(|&v| v < 1e-2));
    }

    #[test]
    fn freeze_resume_preserves_total_excited_time() {
        let profile = build_comb(&comb(250e3, 9)).unwrap();
        let sample = sample_atoms(&profile, Some(&input_450ns()), 0.0, 100_000, 5).unwrap();
        let t_s = 7.6e-6;
        for t_prime in [1.17e-6, 1.63e-6, 2.23e-6] {
            let frozen = spin_freeze_resume(&sample, t_prime, t_s).unwrap();
            let t_out = echo_time(&frozen, (t_s + 2.0e-6, t_s + 6.0e-6)).unwrap();
            let t_dprime = t_out - (t_prime + t_s);
            assert_abs_diff_eq!(t_prime + t_dprime, 4.0e-6, epsilon = 0.005 * 4.0e-6);
        }
    }

    #[test]
    fn freeze_identity_and_late_control_rejected() {
        let profile = build_comb(&comb(250e3, 9)).unwrap();
        let sample = sample_atoms(&profile, None, 0.0, 1000, 9).unwrap();
        let same = spin_freeze_resume(&sample, 1.0e-6, 0.0).unwrap();
        assert_eq!(sample, same);
        assert!(spin_freeze_resume(&sample, 4.1e-6, 1e-6).is_err());
    }

    #[test]
    fn spin_broadening_damps_echo_like_characteristic_function() {
        let profile = build_comb(&comb(250e3, 9)).unwrap();
        let sample = sample_atoms(&profile, None, 26e3, 200_000, 13).unwrap();
        let reference = sample_atoms(&profile, None, 0.0, 200_000, 13).unwrap();
        for t_s in [5.6e-6, 10.6e-6] {
            let frozen = spin_freeze_resume(&sample, 1.6e-6, t_s).unwrap();
            let frozen_ref = spin_freeze_resume(&reference, 1.6e-6, t_s).unwrap();
            let window = (t_s + 3.0e-6, t_s + 5.0e-6);
            let t_echo = echo_time(&frozen_ref, window).unwrap();
            let ratio = collective_intensity(&frozen, t_echo)
                / collective_intensity(&frozen_ref, t_echo);
            assert_abs_diff_eq!(ratio, dephasing_factor(26e3, t_s), epsilon = 0.02);
        }
    }

    #[test]
    fn dephasing_factor_matches_monte_carlo_oracle() {
        // 1e6-draw characteristic-function oracle
        let fwhm = 26e3;
        let sigma = fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let normal = Normal::new(0.0, sigma).unwrap();
        let draws: Vec<f64> = (0..1_000_000).map(|_| normal.sample(&mut rng)).collect();
        // frozen closed-form values for the fig. 4 storage times
        let frozen = [
            (5.6e-6, 0.85989),
            (7.6e-6, 0.75731),
            (10.6e-6, 0.58225),
            (15.6e-6, 0.30989),
        ];
        for (t_s, value) in frozen {
            let mut acc = C64::new(0.0, 0.0);
            for &eps in &draws {
                acc += C64::from_polar(1.0, -TAU * eps * t_s);
            }
            let mc = (acc / draws.len() as f64).norm_sqr();
            let analytic = dephasing_factor(fwhm, t_s);
            assert_abs_diff_eq!(analytic, mc, epsilon = 1e-3);
            assert_abs_diff_eq!(analytic, value, epsilon = 1e-4);
        }
        assert_relative_eq!(dephasing_factor(26e3, 0.0), 1.0);
        assert_relative_eq!(dephasing_factor(0.0, 1.0), 1.0);
    }

    #[test]
    fn ideal_square_comb_revives_periodically() {
        let spec = CombSpec {
            delta_hz: 250e3,
            gamma_hz: 250e3 / 50.0,
            d_peak: 1.0,
            d_background: 0.0,
            n_peaks: 9,
            peak_shape: PeakShape::Square,
            center_offset_hz: 0.0,
        };
        let profile = build_comb(&spec).unwrap();
        let sample = sample_atoms(&profile, None, 0.0, 50_000, 21).unwrap();
        let mut last = 1.0;
        for k in 1..=3 {
            let center = k as f64 * 4.0e-6;
            let t = echo_time(&sample, (center - 1.0e-6, center + 1.0e-6)).unwrap();
            assert_abs_diff_eq!(t, center, epsilon = 2.0 * 2e-6 / 1024.0);
            let peak = collective_intensity(&sample, t);
            assert!(peak > 0.8, "revival {k} too weak: {peak}");
            assert!(peak <= last + 1e-6);
            last = peak;
        }
    }

    #[test]
    fn permutation_and_z_shift_leave_intensity_invariant() {
        let profile = build_comb(&comb(250e3, 5)).unwrap();
        let sample = sample_atoms(&profile, None, 0.0, 4000, 17).unwrap();
        let mut reversed_atoms: Vec<SampledAtom> = sample.atoms().to_vec();
        reversed_atoms.reverse();
        for a in reversed_atoms.iter_mut() {
            a.z = (a.z + 0.37) % 1.0;
        }
        let reversed = AtomSample::from_atoms(reversed_atoms, sample.rephasing_period_s());
        for t in [0.0, 1.7e-6, 4.0e-6] {
            assert_relative_eq!(
                collective_intensity(&sample, t),
                collective_intensity(&reversed, t),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn echo_intensity_standard_error_scales_as_inverse_sqrt_n() {
        let profile = build_comb(&comb(250e3, 9)).unwrap();
        let spread = |n: usize| -> f64 {
            let vals: Vec<f64> = (0..8)
                .map(|seed| {
                    let s = sample_atoms(&profile, None, 0.0, n, 1000 + seed).unwrap();
                    collective_intensity(&s, 2.0e-6)
                })
                .collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64)
                .sqrt()
        };
        let s_small = spread(1000);
        let s_big = spread(16_000);
        let ratio = s_small / s_big;
        assert!(ratio > 1.6 && ratio < 10.0, "scaling ratio {ratio}");
    }

    #[test]
    fn all_zero_profile_rejected() {
        let profile =
            AbsorptionProfile::from_samples(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 0.0, 0.0, 0.0])
                .unwrap();
        assert!(sample_atoms(&profile, None, 0.0, 10, 0).is_err());
    }
}
