//! Scenario configuration. Every physical quantity carries its unit in the key name.

use serde::{Deserialize, Serialize};
use solnft::modem::ConstellationSpec;
use solnft::ssfm::Splitting;
use solnft::stats::{Equalizer, SerConvention};
use solnft::units::{Amplification, LinkConfig};
use solnft::Complex64;

use crate::error::HarnessError;

const PS: f64 = 1e-12;
const KM: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    FirstOrderIndependent,
    FirstOrderDifferential,
    SecondOrderQpsk,
    RamanMotivation,
    Custom,
}

/// How symbols are written onto the spectral coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    /// Phase and magnitude of `b1` and `b2` chosen separately.
    Independent,
    /// `(Δt, θ, φc, φd)` precoding.
    Differential,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmplifierKind {
    Edfa,
    Raman,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    pub gamma_per_w_km: f64,
    pub beta2_ps2_per_km: f64,
    pub alpha_per_km: f64,
    pub span_length_km: f64,
    pub n_spans: usize,
    pub noise_figure_db: f64,
    pub carrier_frequency_thz: f64,
    pub amplification: AmplifierKind,
    /// Spontaneous emission factor of the distributed gain.
    pub nsp: f64,
    /// `false` removes all amplifier noise.
    #[serde(default = "yes")]
    pub noise: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstellationSection {
    pub phases_rad: Vec<f64>,
    /// One list of `ln|b|` levels per eigenvalue, or one list for all.
    pub magnitudes_log: Vec<Vec<f64>>,
    pub delta_t_points: Vec<f64>,
    pub theta_points_rad: Vec<f64>,
    #[serde(default)]
    pub rotation_offset_per_eigenvalue_rad: f64,
}

impl ConstellationSection {
    pub fn spec(&self) -> ConstellationSpec {
        ConstellationSpec {
            phases: self.phases_rad.clone(),
            magnitudes_log: self.magnitudes_log.clone(),
            delta_t_points: self.delta_t_points.clone(),
            theta_points: self.theta_points_rad.clone(),
            rotation_offset_per_eigenvalue: self.rotation_offset_per_eigenvalue_rad,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverSection {
    /// Multiplies the worst-case 99.99 % bandwidth; `inf` disables the filter.
    pub lowpass_cutoff_factor: f64,
    /// Kept window, in pulse durations, around the frame center.
    pub truncation_factor: f64,
    /// Band-limited interpolation factor applied before the NFT.
    pub upsample_factor: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub step_size_m: f64,
    pub splitting: Splitting,
    /// Samples per `1/(2σ_max)` on the transmission grid.
    pub samples_per_scale: usize,
    /// Frame width in pulse durations.
    pub frame_factor: f64,
    pub window_flat_fraction: f64,
    /// Eigenvalue snapshots per span for the trace of distributed links.
    pub trace_points_per_span: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub modulation: Modulation,
    pub t0_ps: f64,
    /// Normalized eigenvalues as `[re, im]`.
    pub eigenvalues: Vec<[f64; 2]>,
    pub n_pulses: usize,
    pub master_seed: u64,
    /// Span ends where the signal is received; 0 is the transmitter.
    pub checkpoint_spans: Vec<usize>,
    pub equalizers: Vec<Equalizer>,
    #[serde(default)]
    pub ser_convention: SerConvention,
    pub output_dir: String,
    pub link: LinkSection,
    pub constellation: ConstellationSection,
    pub receiver: ReceiverSection,
    pub simulation: SimulationSection,
}

fn bad(field: &str, reason: impl Into<String>) -> HarnessError {
    HarnessError::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| bad("toml", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn nominal_eigenvalues(&self) -> Vec<Complex64> {
        self.eigenvalues.iter().map(|l| Complex64::new(l[0], l[1])).collect()
    }

    pub fn uses(&self, eq: Equalizer) -> bool {
        self.equalizers.contains(&eq)
    }

    pub fn link_config(&self) -> Result<LinkConfig, HarnessError> {
        let l = &self.link;
        let amplification = match l.amplification {
            AmplifierKind::Edfa => Amplification::LumpedEdfa,
            AmplifierKind::Raman => Amplification::IdealRaman,
        };
        let (nf, nsp) = if l.noise {
            (l.noise_figure_db, l.nsp)
        } else {
            (f64::NEG_INFINITY, 0.0)
        };
        Ok(LinkConfig::new(
            l.gamma_per_w_km / KM,
            l.beta2_ps2_per_km * PS * PS / KM,
            l.alpha_per_km / KM,
            l.span_length_km * KM,
            l.n_spans,
            nf,
            l.carrier_frequency_thz * 1e12,
            amplification,
            nsp,
            self.t0_ps * PS,
        )?)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.n_pulses < 1 {
            return Err(bad("n_pulses", "must be at least 1"));
        }
        if !(self.t0_ps > 0.0) {
            return Err(bad("t0_ps", "must be positive"));
        }
        if self.eigenvalues.is_empty() || self.eigenvalues.iter().any(|l| !(l[1] > 0.0) || !l[0].is_finite()) {
            return Err(bad("eigenvalues", "need at least one, all in the upper half-plane"));
        }
        if self.checkpoint_spans.is_empty()
            || self.checkpoint_spans.windows(2).any(|w| w[1] <= w[0])
            || self.checkpoint_spans.iter().any(|&s| s > self.link.n_spans)
        {
            return Err(bad(
                "checkpoint_spans",
                "must be strictly increasing span indices within the link",
            ));
        }
        if !self.uses(Equalizer::Mbr) {
            return Err(bad("equalizers", "mbr is always computed and must be listed"));
        }
        let r = &self.receiver;
        if !(r.lowpass_cutoff_factor > 0.0) {
            return Err(bad("receiver.lowpass_cutoff_factor", "must be positive"));
        }
        if !(r.truncation_factor >= 1.0) || !r.truncation_factor.is_finite() {
            return Err(bad("receiver.truncation_factor", "must be at least 1"));
        }
        if r.upsample_factor < 1 {
            return Err(bad("receiver.upsample_factor", "must be at least 1"));
        }
        let s = &self.simulation;
        if !(s.step_size_m > 0.0) {
            return Err(bad("simulation.step_size_m", "must be positive"));
        }
        if s.samples_per_scale < 2 {
            return Err(bad("simulation.samples_per_scale", "must be at least 2"));
        }
        if !(s.frame_factor >= r.truncation_factor) {
            return Err(bad("simulation.frame_factor", "must cover the truncation window"));
        }
        if !(s.window_flat_fraction > 0.0 && s.window_flat_fraction <= 1.0) {
            return Err(bad("simulation.window_flat_fraction", "must be in (0, 1]"));
        }
        if s.trace_points_per_span < 1 {
            return Err(bad("simulation.trace_points_per_span", "must be at least 1"));
        }
        let spec = self.constellation.spec();
        spec.validate()?;
        if spec.magnitudes_log.len() > 1 && spec.magnitudes_log.len() != self.eigenvalues.len() {
            return Err(bad("constellation.magnitudes_log", "one list, or one per eigenvalue"));
        }
        self.link_config()?;
        Ok(())
    }
}
