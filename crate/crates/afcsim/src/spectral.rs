//! Comb-shaped absorption profiles and derived comb quantities.
//!
//! A [`CombSpec`] describes the spectral tailoring of the inhomogeneous line:
//! `n_peaks` teeth of width `gamma_hz` (FWHM) spaced `delta_hz`, sitting on a
//! residual background depth. [`build_comb`] synthesizes the sampled
//! [`AbsorptionProfile`] consumed by the medium and collective modules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of the emptied preparation window the comb must fit inside.
pub const DEFAULT_PREP_WINDOW_HZ: f64 = 18.0e6;

/// Line shape of a single comb tooth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakShape {
    Gaussian,
    Lorentzian,
    Square,
}

impl Default for PeakShape {
    fn default() -> Self {
        PeakShape::Gaussian
    }
}

impl PeakShape {
    /// Tooth profile normalized to unit peak value, `x` relative to the tooth
    /// center, `gamma` the FWHM.
    pub fn value(self, x_hz: f64, gamma_hz: f64) -> f64 {
        match self {
            PeakShape::Gaussian => {
                let u = x_hz / gamma_hz;
                (-4.0 * std::f64::consts::LN_2 * u * u).exp()
            }
            PeakShape::Lorentzian => {
                let u = 2.0 * x_hz / gamma_hz;
                1.0 / (1.0 + u * u)
            }
            PeakShape::Square => {
                if x_hz.abs() <= gamma_hz / 2.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Area of a unit-peak tooth divided by `gamma` (dimensionless).
    ///
    /// This is also the correction factor between the coarse `d/F` of
    /// [`CombSpec::effective_depth`] and the exact period-averaged depth: the
    /// average of `d(δ)` over one comb period is `d_peak/F · area_factor`.
    /// Square teeth have factor 1, so `d/F` is exact for them.
    pub fn area_factor(self) -> f64 {
        match self {
            // ∫exp(-4 ln2 x²/γ²)dx = γ/2·sqrt(π/ln2)
            PeakShape::Gaussian => 0.5 * (std::f64::consts::PI / std::f64::consts::LN_2).sqrt(),
            // ∫dx/(1+4x²/γ²) = γ·π/2
            PeakShape::Lorentzian => std::f64::consts::FRAC_PI_2,
            PeakShape::Square => 1.0,
        }
    }
}

/// Spectral specification of an atomic frequency comb.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombSpec {
    /// Tooth spacing Δ.
    pub delta_hz: f64,
    /// Tooth FWHM γ.
    pub gamma_hz: f64,
    /// Peak optical depth of a tooth (natural-log intensity depth).
    pub d_peak: f64,
    /// Residual optical depth between teeth.
    #[serde(default)]
    pub d_background: f64,
    /// Number of teeth.
    pub n_peaks: u32,
    #[serde(default)]
    pub peak_shape: PeakShape,
    /// Detuning of the comb center from the input-pulse carrier.
    #[serde(default)]
    pub center_offset_hz: f64,
}

impl CombSpec {
    /// Comb spanned by the teeth: `n_peaks · delta`.
    pub fn bandwidth_hz(&self) -> f64 {
        self.n_peaks as f64 * self.delta_hz
    }

    /// Finesse F = Δ/γ.
    pub fn finesse(&self) -> f64 {
        self.delta_hz / self.gamma_hz
    }

    /// Coarse-grained absorption `d_peak/F` seen by a pulse whose bandwidth
    /// covers many teeth. Exact for square teeth; for other shapes multiply by
    /// [`PeakShape::area_factor`] to get the exact period average.
    pub fn effective_depth(&self) -> f64 {
        self.d_peak / self.finesse()
    }

    /// Tooth center detunings, lowest first.
    pub fn tooth_centers_hz(&self) -> Vec<f64> {
        let half = (self.n_peaks as f64 - 1.0) / 2.0;
        (0..self.n_peaks)
            .map(|j| self.center_offset_hz + (j as f64 - half) * self.delta_hz)
            .collect()
    }

    /// Number of temporal modes storable, `floor(constant · n_peaks)`.
    ///
    /// The mode bandwidth must fit inside the comb; the proportionality
    /// constant defaults to 1 (see [`CombSpec::multimode_capacity`]).
    pub fn multimode_capacity_with(&self, mode_bandwidth_hz: f64, constant: f64) -> Result<u32> {
        if mode_bandwidth_hz > self.bandwidth_hz() {
            return Err(Error::invalid(
                "mode_bandwidth_hz",
                format!(
                    "{mode_bandwidth_hz} Hz exceeds comb bandwidth {} Hz",
                    self.bandwidth_hz()
                ),
            ));
        }
        Ok((constant * self.n_peaks as f64).floor() as u32)
    }

    /// [`CombSpec::multimode_capacity_with`] at the default constant 1.
    pub fn multimode_capacity(&self, mode_bandwidth_hz: f64) -> Result<u32> {
        self.multimode_capacity_with(mode_bandwidth_hz, 1.0)
    }

    /// Check all spec invariants against the default preparation window.
    pub fn validate(&self) -> Result<()> {
        self.validate_in_window(DEFAULT_PREP_WINDOW_HZ)
    }

    /// Check all spec invariants against a given preparation-window width.
    pub fn validate_in_window(&self, prep_window_hz: f64) -> Result<()> {
        if !(self.delta_hz > 0.0) {
            return Err(Error::invalid("comb.delta_hz", "must be > 0"));
        }
        if !(self.gamma_hz > 0.0) {
            return Err(Error::invalid("comb.gamma_hz", "must be > 0"));
        }
        if !(self.d_peak >= 0.0) {
            return Err(Error::invalid("comb.d_peak", "must be >= 0"));
        }
        if !(self.d_background >= 0.0) {
            return Err(Error::invalid("comb.d_background", "must be >= 0"));
        }
        if self.n_peaks < 1 {
            return Err(Error::invalid("comb.n_peaks", "must be >= 1"));
        }
        if self.finesse() < 1.0 {
            return Err(Error::invalid(
                "comb.finesse",
                format!("F = Δ/γ = {:.3} < 1 (overlapping teeth)", self.finesse()),
            ));
        }
        if self.bandwidth_hz() > prep_window_hz {
            return Err(Error::invalid(
                "comb.bandwidth",
                format!(
                    "n_peaks·Δ = {} Hz exceeds preparation window {} Hz",
                    self.bandwidth_hz(),
                    prep_window_hz
                ),
            ));
        }
        Ok(())
    }
}

/// Optical depth sampled on a uniform detuning grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AbsorptionProfile {
    detunings_hz: Vec<f64>,
    optical_depth: Vec<f64>,
    grid_step_hz: f64,
}

impl AbsorptionProfile {
    /// Build from raw samples; enforces finiteness, nonnegativity and a
    /// uniform grid.
    pub fn from_samples(detunings_hz: Vec<f64>, optical_depth: Vec<f64>) -> Result<Self> {
        if detunings_hz.len() < 2 || detunings_hz.len() != optical_depth.len() {
            return Err(Error::invalid(
                "profile",
                "need >= 2 samples with matching grids",
            ));
        }
        let step = detunings_hz[1] - detunings_hz[0];
        if !(step > 0.0) {
            return Err(Error::invalid("profile.grid", "grid must be increasing"));
        }
        for pair in detunings_hz.windows(2) {
            if ((pair[1] - pair[0]) - step).abs() > 1e-6 * step {
                return Err(Error::invalid("profile.grid", "grid must be uniform"));
            }
        }
        for (i, d) in optical_depth.iter().enumerate() {
            if !d.is_finite() || *d < 0.0 {
                return Err(Error::invalid(
                    "profile.optical_depth",
                    format!("sample {i} is {d}, must be finite and >= 0"),
                ));
            }
        }
        Ok(AbsorptionProfile {
            detunings_hz,
            optical_depth,
            grid_step_hz: step,
        })
    }

    pub fn detunings_hz(&self) -> &[f64] {
        &self.detunings_hz
    }

    pub fn optical_depth(&self) -> &[f64] {
        &self.optical_depth
    }

    pub fn grid_step_hz(&self) -> f64 {
        self.grid_step_hz
    }

    pub fn len(&self) -> usize {
        self.detunings_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detunings_hz.is_empty()
    }

    /// Linear interpolation of d(δ); zero outside the sampled window.
    pub fn depth_at(&self, delta_hz: f64) -> f64 {
        let first = self.detunings_hz[0];
        let x = (delta_hz - first) / self.grid_step_hz;
        if x < 0.0 || x > (self.len() - 1) as f64 {
            return 0.0;
        }
        let i = (x.floor() as usize).min(self.len() - 2);
        let frac = x - i as f64;
        self.optical_depth[i] * (1.0 - frac) + self.optical_depth[i + 1] * frac
    }

    /// Trapezoid integral of d(δ) over the sampled window, in Hz.
    pub fn integral(&self) -> f64 {
        let n = self.len();
        let interior: f64 = self.optical_depth[1..n - 1].iter().sum();
        (interior + 0.5 * (self.optical_depth[0] + self.optical_depth[n - 1])) * self.grid_step_hz
    }

    /// Detunings of the local maxima, plateaus counted once.
    pub fn local_maxima_hz(&self) -> Vec<f64> {
        let d = &self.optical_depth;
        let n = d.len();
        let mut maxima = Vec::new();
        let mut i = 1;
        while i + 1 < n {
            if d[i] > d[i - 1] {
                // run of equal values starting at i
                let mut j = i;
                while j + 1 < n && d[j + 1] == d[i] {
                    j += 1;
                }
                if j + 1 < n && d[j + 1] < d[i] {
                    let mid = (i + j) / 2;
                    maxima.push(self.detunings_hz[mid]);
                }
                i = j + 1;
            } else {
                i += 1;
            }
        }
        maxima
    }

    /// Two-column CSV export: `detuning_hz,optical_depth`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "detuning_hz,optical_depth")?;
        for (x, d) in self.detunings_hz.iter().zip(&self.optical_depth) {
            writeln!(w, "{x:.6},{d:.12e}")?;
        }
        Ok(())
    }
}

/// Synthesize the comb absorption profile at the default resolution
/// (`gamma/16`, comfortably inside the `gamma/8` resolution bound).
pub fn build_comb(spec: &CombSpec) -> Result<AbsorptionProfile> {
    build_comb_with_step(spec, spec.gamma_hz / 16.0)
}

/// Synthesize the comb absorption profile with an explicit grid step.
///
/// The grid spans the comb bandwidth `n_peaks·Δ`, centered on
/// `center_offset_hz`. Teeth are additive: overlapping tails add, as the
/// underlying atom numbers do.
pub fn build_comb_with_step(spec: &CombSpec, grid_step_hz: f64) -> Result<AbsorptionProfile> {
    spec.validate()?;
    if !(grid_step_hz > 0.0) || grid_step_hz > spec.gamma_hz / 8.0 {
        return Err(Error::invalid(
            "grid_step_hz",
            format!(
                "{grid_step_hz} Hz must be in (0, gamma/8 = {} Hz]",
                spec.gamma_hz / 8.0
            ),
        ));
    }
    let half_bw = spec.bandwidth_hz() / 2.0;
    let n_cells = (spec.bandwidth_hz() / grid_step_hz).ceil() as usize;
    let step = spec.bandwidth_hz() / n_cells as f64;
    let centers = spec.tooth_centers_hz();
    let detunings: Vec<f64> = (0..=n_cells)
        .map(|i| spec.center_offset_hz - half_bw + i as f64 * step)
        .collect();
    // Square teeth are sampled area-preserving (fraction of the grid cell
    // covered by the tooth) so the profile integral matches the analytic tooth
    // area regardless of grid alignment; smooth shapes sample pointwise.
    let tooth_value = |x: f64| -> f64 {
        match spec.peak_shape {
            PeakShape::Square => {
                let half = spec.gamma_hz / 2.0;
                let lo = (x - step / 2.0).max(-half);
                let hi = (x + step / 2.0).min(half);
                let frac = ((hi - lo).max(0.0) / step).clamp(0.0, 1.0);
                // snap to exact plateau/zero so roundoff cannot create
                // spurious local maxima
                if frac > 1.0 - 1e-9 {
                    1.0
                } else if frac < 1e-9 {
                    0.0
                } else {
                    frac
                }
            }
            shape => shape.value(x, spec.gamma_hz),
        }
    };
    let depth: Vec<f64> = detunings
        .iter()
        .map(|&x| {
            let teeth: f64 = centers.iter().map(|&c| spec.d_peak * tooth_value(x - c)).sum();
            spec.d_background + teeth
        })
        .collect();
    AbsorptionProfile::from_samples(detunings, depth)
}
