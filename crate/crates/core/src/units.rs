//! Physical ↔ normalized unit conversion and fiber link parameters.
//!
//! Normalized time `t = τ/T0`, distance `z = ℓ/L0` and field `q = Q/√P0`, with
//! `P0·T0² = |β2| / ((8/9)·γ_eff)` and `L0 = 2·T0²/|β2|`. All link quantities
//! here are SI (`f64`); the propagation and spectral code only sees normalized
//! values.

use num_complex::Complex;

use crate::envelope::DualPolEnvelope;
use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Manakov averaging factor for the Kerr coefficient.
pub const MANAKOV_FACTOR: f64 = 8.0 / 9.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizationScales {
    /// Time scale, s.
    pub t0: f64,
    /// Power scale, W.
    pub p0: f64,
    /// Distance scale, m.
    pub l0: f64,
    /// Nonlinearity used for the power scale, 1/(W·m).
    pub gamma_eff: f64,
}

impl NormalizationScales {
    pub fn to_physical_length(&self, z: f64) -> f64 {
        z * self.l0
    }

    pub fn to_normalized_length(&self, meters: f64) -> f64 {
        meters / self.l0
    }

    /// Converts a one-sided angular bandwidth in normalized units to Hz.
    pub fn to_physical_frequency(&self, omega: f64) -> f64 {
        omega / (2.0 * std::f64::consts::PI * self.t0)
    }

    /// Energy of one normalized unit (`P0·T0`), J.
    pub fn energy_unit(&self) -> f64 {
        self.p0 * self.t0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Amplification {
    /// Lumped EDFAs at every span end; power normalized with the path-averaged γ_eff.
    LumpedEdfa,
    /// Ideal distributed Raman gain: lossless fiber with distributed ASE.
    IdealRaman,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkConfig {
    /// Kerr coefficient, 1/(W·m).
    pub gamma: f64,
    /// Group-velocity dispersion, s²/m (negative, anomalous).
    pub beta2: f64,
    /// Power attenuation, 1/m.
    pub alpha: f64,
    /// Amplifier spacing, m.
    pub span_length: f64,
    pub n_spans: usize,
    /// EDFA noise figure, dB. `-inf` disables amplifier noise.
    pub noise_figure_db: f64,
    /// Carrier frequency, Hz.
    pub carrier_freq: f64,
    pub amplification: Amplification,
    /// Spontaneous emission factor of the distributed Raman gain.
    pub nsp: f64,
    pub scales: NormalizationScales,
}

impl LinkConfig {
    /// Builds a link and fills its normalization scales for time scale `t0` (s).
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        gamma: f64,
        beta2: f64,
        alpha: f64,
        span_length: f64,
        n_spans: usize,
        noise_figure_db: f64,
        carrier_freq: f64,
        amplification: Amplification,
        nsp: f64,
        t0: f64,
    ) -> Result<Self> {
        let mut link = Self {
            gamma,
            beta2,
            alpha,
            span_length,
            n_spans,
            noise_figure_db,
            carrier_freq,
            amplification,
            nsp,
            scales: NormalizationScales {
                t0: 1.0,
                p0: 1.0,
                l0: 1.0,
                gamma_eff: gamma,
            },
        };
        link.validate()?;
        link.scales = make_scales(t0, &link)?;
        Ok(link)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta2 < 0.0) {
            return Err(invalid("beta2", "must be negative (anomalous dispersion)"));
        }
        if !(self.gamma > 0.0) {
            return Err(invalid("gamma", "must be positive"));
        }
        if !(self.alpha >= 0.0) {
            return Err(invalid("alpha", "must be non-negative"));
        }
        if !(self.span_length > 0.0) {
            return Err(invalid("span_length", "must be positive"));
        }
        if self.n_spans < 1 {
            return Err(invalid("n_spans", "must be at least 1"));
        }
        if !(self.carrier_freq > 0.0) {
            return Err(invalid("carrier_freq", "must be positive"));
        }
        if !(self.nsp >= 0.0) {
            return Err(invalid("nsp", "must be non-negative"));
        }
        Ok(())
    }

    /// Total link length, m.
    pub fn length(&self) -> f64 {
        self.span_length * self.n_spans as f64
    }

    pub fn span_norm(&self) -> f64 {
        self.scales.to_normalized_length(self.span_length)
    }

    pub fn length_norm(&self) -> f64 {
        self.scales.to_normalized_length(self.length())
    }

    /// Power attenuation per normalized unit length.
    pub fn alpha_norm(&self) -> f64 {
        self.alpha * self.scales.l0
    }

    /// Span gain `G = exp(α·ℓ_span)` that exactly restores the span loss.
    pub fn span_gain(&self) -> f64 {
        (self.alpha * self.span_length).exp()
    }

    /// Ratio of the actual Kerr coefficient to the one used for normalization.
    pub fn nonlinear_gain(&self) -> f64 {
        self.gamma / self.scales.gamma_eff
    }

    /// EDFA spontaneous emission factor from the noise figure, `n_sp = F·G / (2(G−1))`.
    pub fn edfa_nsp(&self) -> f64 {
        let g = self.span_gain();
        let f = 10f64.powf(self.noise_figure_db / 10.0);
        if f == 0.0 {
            return 0.0;
        }
        f * g / (2.0 * (g - 1.0))
    }

    /// Per-polarization ASE power spectral density of one EDFA, W/Hz.
    pub fn edfa_ase_psd(&self) -> f64 {
        let g = self.span_gain();
        self.edfa_nsp() * (g - 1.0) * PLANCK * self.carrier_freq
    }

    /// Distributed Raman noise PSD per unit length, W/(Hz·m).
    pub fn raman_psd_per_meter(&self) -> f64 {
        self.nsp * self.alpha * PLANCK * self.carrier_freq
    }
}

/// Normalization scales for time scale `t0` (s) on `link`.
///
/// Lumped-EDFA links use the path-averaged `γ_eff = γ(1−e^{−αℓ})/(αℓ)`
/// (the `αℓ → 0` limit is `γ`); ideal Raman links use `γ`.
pub fn make_scales(t0: f64, link: &LinkConfig) -> Result<NormalizationScales> {
    if !(t0 > 0.0) || !t0.is_finite() {
        return Err(invalid("t0", format!("{t0} must be positive")));
    }
    if !(link.beta2 < 0.0) {
        return Err(invalid("beta2", "must be negative"));
    }
    if !(link.gamma > 0.0) {
        return Err(invalid("gamma", "must be positive"));
    }
    let gamma_eff = match link.amplification {
        Amplification::LumpedEdfa => {
            let x = link.alpha * link.span_length;
            if x == 0.0 {
                link.gamma
            } else {
                link.gamma * (-(-x).exp_m1()) / x
            }
        }
        Amplification::IdealRaman => link.gamma,
    };
    let b2 = link.beta2.abs();
    Ok(NormalizationScales {
        t0,
        p0: b2 / (MANAKOV_FACTOR * gamma_eff * t0 * t0),
        l0: 2.0 * t0 * t0 / b2,
        gamma_eff,
    })
}

/// Physical dual-polarization field `Q_k(τ)` in √W on a grid in seconds.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalEnvelope<T> {
    pub a1: Vec<Complex<T>>,
    pub a2: Vec<Complex<T>>,
    /// Sample spacing, s.
    pub dtau: f64,
    /// Time of the first sample, s.
    pub tau0: f64,
}

/// `Q_k(τ) = √P0 · q_k(τ/T0)`.
pub fn to_physical<T: Real>(env: &DualPolEnvelope<T>, scales: &NormalizationScales) -> PhysicalEnvelope<T> {
    let s = T::lit(scales.p0.sqrt());
    PhysicalEnvelope {
        a1: env.q1().iter().map(|z| *z * s).collect(),
        a2: env.q2().iter().map(|z| *z * s).collect(),
        dtau: env.dt().as_f64() * scales.t0,
        tau0: env.t0().as_f64() * scales.t0,
    }
}

/// Inverse of [`to_physical`].
pub fn to_normalized<T: Real>(phys: &PhysicalEnvelope<T>, scales: &NormalizationScales) -> Result<DualPolEnvelope<T>> {
    let s = T::lit(1.0 / scales.p0.sqrt());
    DualPolEnvelope::new(
        phys.a1.iter().map(|z| *z * s).collect(),
        phys.a2.iter().map(|z| *z * s).collect(),
        T::lit(phys.dtau / scales.t0),
        T::lit(phys.tau0 / scales.t0),
    )
}
