//! Split-step Fourier propagation over an amplified fiber link.
//!
//! Normalized lossy Manakov equation:
//!
//! ```text
//! q_z = −j q_tt − 2j·g·‖q‖²·q − (α/2)·q
//! ```
//!
//! with `g = γ/γ_eff` and `α` the power attenuation per normalized length. The
//! linear part is applied in the Fourier domain (`exp(jω²dz − α dz/2)` with the
//! synthesis convention `q(t) = Σ Q(ω) e^{jωt}`); the Kerr rotation
//! `exp(−2j·g·‖q‖²·dz_eff)` acts at the step midpoint, where
//! `dz_eff = (2/α)·sinh(α dz/2)` integrates the power decay over the step.
//! Consecutive half linear steps are merged, so one symmetric step costs one
//! forward and one inverse FFT per polarization.
//!
//! [`Splitting::Fourth`] composes three symmetric steps with the triple-jump
//! weights, cancelling the `dz²` error that otherwise accumulates as a phase
//! drift of the propagated solitons.

use std::sync::Arc;

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::envelope::DualPolEnvelope;
use crate::error::{invalid, Error, Result};
use crate::scalar::{cis, Real};
use crate::spectrum::pair_nearest;
use crate::units::{Amplification, LinkConfig};

type C<T> = Complex<T>;

/// Loss and Kerr scaling of the propagation medium in normalized units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Medium<T> {
    /// Power attenuation per normalized length.
    pub alpha: T,
    /// Kerr coefficient relative to the normalization (`γ/γ_eff`).
    pub nonlinear_gain: T,
}

impl<T: Real> Medium<T> {
    /// Lossless fiber matching the normalization exactly.
    pub fn ideal() -> Self {
        Self {
            alpha: T::zero(),
            nonlinear_gain: T::one(),
        }
    }

    /// Span fiber of `link`: lossy for lumped amplification, ideal for Raman.
    pub fn of_link(link: &LinkConfig) -> Self {
        match link.amplification {
            Amplification::LumpedEdfa => Self {
                alpha: T::lit(link.alpha_norm()),
                nonlinear_gain: T::lit(link.nonlinear_gain()),
            },
            Amplification::IdealRaman => Self::ideal(),
        }
    }

    /// Length over which the midpoint power accumulates the step's Kerr phase.
    fn effective_length(&self, dz: T) -> T {
        let x = self.alpha * dz * T::lit(0.5);
        if x.abs() < T::lit(1e-4) {
            dz * (T::one() + x * x / T::lit(6.0))
        } else {
            T::lit(2.0) * x.sinh() / self.alpha
        }
    }
}

/// Order of the operator splitting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Splitting {
    /// Symmetric (Strang) splitting.
    Second,
    /// Triple-jump composition of three symmetric steps.
    #[default]
    Fourth,
}

impl Splitting {
    /// Weights of the symmetric sub-steps that make up one step.
    fn weights<T: Real>(self) -> Vec<T> {
        match self {
            Splitting::Second => vec![T::one()],
            Splitting::Fourth => {
                let c = 2f64.powf(1.0 / 3.0);
                let w1 = 1.0 / (2.0 - c);
                let w0 = -c / (2.0 - c);
                vec![T::lit(w1), T::lit(w0), T::lit(w1)]
            }
        }
    }
}

/// Split-step propagator bound to one grid size.
pub struct SplitStep<T: Real> {
    splitting: Splitting,
    n: usize,
    dt: T,
    omega2: Vec<T>,
    fft: Arc<dyn Fft<T>>,
    ifft: Arc<dyn Fft<T>>,
    scratch: Vec<C<T>>,
    // linear factors keyed by (dz, alpha); includes the 1/n of the inverse FFT
    factors: Vec<(T, T, Vec<C<T>>)>,
}

impl<T: Real> SplitStep<T> {
    pub fn new(n: usize, dt: T) -> Result<Self> {
        if n < 2 {
            return Err(invalid("n", "need at least two samples"));
        }
        if !(dt > T::zero()) {
            return Err(invalid("dt", "must be positive"));
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let ifft = planner.plan_fft_inverse(n);
        let scratch_len = fft.get_inplace_scratch_len().max(ifft.get_inplace_scratch_len());
        let dw = T::TAU() / (T::lit(n as f64) * dt);
        let omega2 = (0..n)
            .map(|k| {
                let signed = if k < n.div_ceil(2) {
                    k as f64
                } else {
                    k as f64 - n as f64
                };
                let w = T::lit(signed) * dw;
                w * w
            })
            .collect();
        Ok(Self {
            splitting: Splitting::default(),
            n,
            dt,
            omega2,
            fft,
            ifft,
            scratch: vec![C::new(T::zero(), T::zero()); scratch_len],
            factors: Vec::new(),
        })
    }

    pub fn for_envelope(env: &DualPolEnvelope<T>) -> Result<Self> {
        Self::new(env.len(), env.dt())
    }

    pub fn with_splitting(mut self, splitting: Splitting) -> Self {
        self.splitting = splitting;
        self
    }

    pub fn splitting(&self) -> Splitting {
        self.splitting
    }

    fn check(&self, env: &DualPolEnvelope<T>) -> Result<()> {
        if env.len() != self.n || env.dt() != self.dt {
            return Err(Error::InvalidEnvelope(format!(
                "propagator built for {} samples at dt = {}, got {} at dt = {}",
                self.n,
                self.dt,
                env.len(),
                env.dt()
            )));
        }
        Ok(())
    }

    fn factor_index(&mut self, dz: T, alpha: T) -> usize {
        if let Some(i) = self.factors.iter().position(|(d, a, _)| *d == dz && *a == alpha) {
            return i;
        }
        let scale = T::one() / T::lit(self.n as f64);
        let decay = (-alpha * dz * T::lit(0.5)).exp() * scale;
        let f = self.omega2.iter().map(|&w2| cis(w2 * dz) * decay).collect();
        if self.factors.len() > 16 {
            self.factors.clear();
        }
        self.factors.push((dz, alpha, f));
        self.factors.len() - 1
    }

    fn linear(&mut self, spec: &mut [C<T>], dz: T, alpha: T) {
        let i = self.factor_index(dz, alpha);
        for (z, f) in spec.iter_mut().zip(&self.factors[i].2) {
            *z *= *f;
        }
    }

    fn forward(&mut self, buf: &mut [C<T>]) {
        self.fft.process_with_scratch(buf, &mut self.scratch);
    }

    /// Inverse transform; the `1/n` normalization lives in the linear factors.
    fn inverse(&mut self, buf: &mut [C<T>]) {
        self.ifft.process_with_scratch(buf, &mut self.scratch);
    }

    /// One step; for second-order splitting this is `D(dz/2)·N(dz)·D(dz/2)`.
    pub fn ssfm_step(&mut self, env: &mut DualPolEnvelope<T>, dz: T, medium: &Medium<T>) -> Result<()> {
        self.propagate_with(env, dz, dz, medium, |_, _, _| Ok(()))
    }

    /// Propagates over `length` in steps of `step` (the last one shortened).
    pub fn propagate(&mut self, env: &mut DualPolEnvelope<T>, length: T, step: T, medium: &Medium<T>) -> Result<()> {
        self.propagate_with(env, length, step, medium, |_, _, _| Ok(()))
    }

    /// As [`SplitStep::propagate`], calling `hook(q1, q2, dz)` in the time domain
    /// once per step, right after its last nonlinear rotation.
    pub fn propagate_with<F>(
        &mut self,
        env: &mut DualPolEnvelope<T>,
        length: T,
        step: T,
        medium: &Medium<T>,
        mut hook: F,
    ) -> Result<()>
    where
        F: FnMut(&mut [C<T>], &mut [C<T>], T) -> Result<()>,
    {
        self.check(env)?;
        if !(step > T::zero()) || !(length >= T::zero()) {
            return Err(invalid(
                "step",
                format!("step {step} and length {length} must be positive"),
            ));
        }
        let weights = self.splitting.weights::<T>();
        // (sub-step length, full step length when the step ends here)
        let steps: Vec<(T, Option<T>)> = step_sequence(length, step)
            .into_iter()
            .flat_map(|h| {
                let last = weights.len() - 1;
                weights
                    .iter()
                    .enumerate()
                    .map(move |(i, &w)| (w * h, (i == last).then_some(h)))
            })
            .collect();
        if steps.is_empty() {
            return Ok(());
        }
        let alpha = medium.alpha;
        let (q1, q2) = env.polarizations_mut();
        let half = T::lit(0.5);

        self.forward(q1);
        self.forward(q2);
        self.linear(q1, steps[0].0 * half, alpha);
        self.linear(q2, steps[0].0 * half, alpha);
        for (i, &(h, full)) in steps.iter().enumerate() {
            self.inverse(q1);
            self.inverse(q2);
            let rot = -T::lit(2.0) * medium.nonlinear_gain * medium.effective_length(h);
            for (a, b) in q1.iter_mut().zip(q2.iter_mut()) {
                let p = a.norm_sqr() + b.norm_sqr();
                let r = cis(rot * p);
                *a *= r;
                *b *= r;
            }
            if let Some(full) = full {
                hook(q1, q2, full)?;
            }
            self.forward(q1);
            self.forward(q2);
            let next = match steps.get(i + 1) {
                Some(&(n, _)) => (h + n) * half,
                None => h * half,
            };
            self.linear(q1, next, alpha);
            self.linear(q2, next, alpha);
        }
        self.inverse(q1);
        self.inverse(q2);
        if !env.is_finite() {
            return Err(Error::NonFinite("split-step propagation".into()));
        }
        Ok(())
    }
}

/// Step lengths covering `length`: full steps of `step`, the last one shortened.
pub fn step_sequence<T: Real>(length: T, step: T) -> Vec<T> {
    if length <= T::zero() {
        return Vec::new();
    }
    let ratio = length / step;
    let mut count = ratio.ceil().to_usize().unwrap_or(1).max(1);
    // a remainder below rounding noise is dropped rather than taken as a tiny step
    if count > 1 && ratio - T::lit((count - 1) as f64) < T::lit(1e-9) {
        count -= 1;
    }
    let mut out = vec![step; count - 1];
    out.push(length - step * T::lit((count - 1) as f64));
    out
}

fn add_awgn<T: Real, R: Rng + ?Sized>(buf: &mut [C<T>], variance: f64, rng: &mut R) {
    let s = (variance / 2.0).sqrt();
    for z in buf.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *z += C::new(T::lit(re * s), T::lit(im * s));
    }
}

/// Per-sample complex noise variance of white noise with normalized PSD `psd` on spacing `dt`.
fn sample_variance<T: Real>(psd: f64, dt: T) -> f64 {
    psd / dt.as_f64()
}

/// Normalized per-polarization ASE PSD of one EDFA (`N_ASE / (P0·T0)`).
pub fn edfa_noise_psd(link: &LinkConfig) -> f64 {
    link.edfa_ase_psd() / link.scales.energy_unit()
}

/// Normalized distributed noise PSD per normalized length (`N0·L0 / (P0·T0)`).
pub fn raman_noise_psd(link: &LinkConfig) -> f64 {
    link.raman_psd_per_meter() * link.scales.l0 / link.scales.energy_unit()
}

/// Adds the ASE of one span-end amplifier to both polarizations.
pub fn inject_edfa_noise<T: Real, R: Rng + ?Sized>(
    env: &mut DualPolEnvelope<T>,
    link: &LinkConfig,
    rng: &mut R,
) -> Result<()> {
    if link.noise_figure_db == f64::NEG_INFINITY {
        return Ok(());
    }
    let g = link.span_gain();
    if !(g > 1.0) {
        return Err(invalid("span_gain", format!("G = {g} must exceed 1 for ASE noise")));
    }
    let var = sample_variance(edfa_noise_psd(link), env.dt());
    if var == 0.0 {
        return Ok(());
    }
    let (q1, q2) = env.polarizations_mut();
    add_awgn(q1, var, rng);
    add_awgn(q2, var, rng);
    Ok(())
}

fn raman_variance<T: Real>(link: &LinkConfig, dz: T, dt: T) -> f64 {
    sample_variance(raman_noise_psd(link) * dz.as_f64(), dt)
}

/// Adds the distributed-amplifier noise accumulated over a segment `dz`.
pub fn inject_raman_noise<T: Real, R: Rng + ?Sized>(
    env: &mut DualPolEnvelope<T>,
    link: &LinkConfig,
    dz: T,
    rng: &mut R,
) -> Result<()> {
    if !(dz > T::zero()) {
        return Err(invalid("dz", "must be positive"));
    }
    let var = raman_variance(link, dz, env.dt());
    if var == 0.0 {
        return Ok(());
    }
    let (q1, q2) = env.polarizations_mut();
    add_awgn(q1, var, rng);
    add_awgn(q2, var, rng);
    Ok(())
}

/// Tukey frame window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowSpec<T> {
    pub frame_width: T,
    /// Share of the frame held at unity, in `(0, 1]`.
    pub flat_fraction: T,
    pub center: T,
}

impl<T: Real> WindowSpec<T> {
    pub fn new(frame_width: T, flat_fraction: T, center: T) -> Result<Self> {
        if !(frame_width > T::zero()) {
            return Err(invalid("frame_width", "must be positive"));
        }
        if !(flat_fraction > T::zero() && flat_fraction <= T::one()) {
            return Err(invalid("flat_fraction", format!("{flat_fraction} not in (0, 1]")));
        }
        Ok(Self {
            frame_width,
            flat_fraction,
            center,
        })
    }

    pub fn value(&self, t: T) -> T {
        let x = (t - self.center).abs();
        let half = self.frame_width * T::lit(0.5);
        let flat = half * self.flat_fraction;
        if x <= flat {
            T::one()
        } else if x >= half {
            T::zero()
        } else {
            T::lit(0.5) * (T::one() + (T::PI() * (x - flat) / (half - flat)).cos())
        }
    }

    /// `∫ w(t)² dt` over the frame.
    pub fn energy_factor(&self) -> T {
        self.frame_width * (self.flat_fraction + (T::one() - self.flat_fraction) * T::lit(3.0 / 8.0))
    }
}

/// Multiplies both polarizations by the frame window.
pub fn apply_window<T: Real>(env: &mut DualPolEnvelope<T>, spec: &WindowSpec<T>) {
    let w: Vec<T> = (0..env.len()).map(|n| spec.value(env.time(n))).collect();
    let (q1, q2) = env.polarizations_mut();
    for ((a, b), &w) in q1.iter_mut().zip(q2.iter_mut()).zip(&w) {
        *a *= w;
        *b *= w;
    }
}

/// Eigenvalues and accumulated `∫λ²dz` at one point of the link.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceSample<T> {
    pub z: T,
    pub eigenvalues: Vec<C<T>>,
    pub integrals: Vec<C<T>>,
}

/// Running `I_k = ∫₀^z λk(z')² dz'` built from eigenvalue snapshots.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenvalueTrace<T> {
    samples: Vec<TraceSample<T>>,
}

impl<T: Real> EigenvalueTrace<T> {
    /// Starts a trace with the eigenvalues at `z = 0`.
    pub fn new(initial: Vec<C<T>>) -> Self {
        let zero = vec![C::new(T::zero(), T::zero()); initial.len()];
        Self {
            samples: vec![TraceSample {
                z: T::zero(),
                eigenvalues: initial,
                integrals: zero,
            }],
        }
    }

    pub fn samples(&self) -> &[TraceSample<T>] {
        &self.samples
    }

    pub fn last(&self) -> &TraceSample<T> {
        self.samples.last().expect("trace starts with one sample")
    }

    /// Adds the trapezoid `(λ_prev² + λ_now²)/2·dz` for each eigenvalue, with
    /// `observed` matched to the previous snapshot by nearest neighbour.
    pub fn update(&mut self, observed: &[C<T>], dz: T) -> Result<()> {
        let prev = self.last().clone();
        let picks = pair_nearest(&prev.eigenvalues, observed)?;
        let half = T::lit(0.5);
        let eigenvalues: Vec<C<T>> = picks.iter().map(|&i| observed[i]).collect();
        let integrals = prev
            .integrals
            .iter()
            .zip(prev.eigenvalues.iter().zip(&eigenvalues))
            .map(|(acc, (a, b))| *acc + (*a * *a + *b * *b) * half * dz)
            .collect();
        self.samples.push(TraceSample {
            z: prev.z + dz,
            eigenvalues,
            integrals,
        });
        Ok(())
    }
}

/// Transmission schedule for [`propagate_link`].
#[derive(Clone, Debug, PartialEq)]
pub struct PropagationPlan<T> {
    /// Split-step length, normalized.
    pub step_size: T,
    pub splitting: Splitting,
    /// Normalized positions where the envelope is tapped; each must coincide
    /// with `0` or a span end.
    pub checkpoints: Vec<T>,
    pub window: Option<WindowSpec<T>>,
    pub record_eigenvalue_trace: bool,
    /// Eigenvalue snapshots per span for distributed amplification (≥ 1).
    pub trace_points_per_span: usize,
}

impl<T: Real> PropagationPlan<T> {
    /// Span-end indices (0 = input) matching the checkpoints.
    fn checkpoint_spans(&self, link: &LinkConfig) -> Result<Vec<usize>> {
        if !(self.step_size > T::zero()) {
            return Err(invalid("step_size", "must be positive"));
        }
        if self.trace_points_per_span == 0 {
            return Err(invalid("trace_points_per_span", "must be at least 1"));
        }
        let span = link.span_norm();
        let total = link.length_norm();
        let mut out: Vec<usize> = Vec::with_capacity(self.checkpoints.len());
        for &c in &self.checkpoints {
            let c = c.as_f64();
            if c < 0.0 || c > total * (1.0 + 1e-9) {
                return Err(invalid("checkpoints", format!("{c} outside [0, {total}]")));
            }
            let idx = (c / span).round();
            if (idx * span - c).abs() > 1e-6 * span {
                return Err(invalid("checkpoints", format!("{c} is not at a span end")));
            }
            let idx = idx as usize;
            if out.last().is_some_and(|&p| p >= idx) {
                return Err(invalid("checkpoints", "must be strictly increasing"));
            }
            out.push(idx);
        }
        Ok(out)
    }
}

/// Envelope copy taken at a checkpoint.
#[derive(Clone, Debug)]
pub struct Tap<T> {
    pub z: T,
    pub span: usize,
    pub envelope: DualPolEnvelope<T>,
    /// Trace snapshot at the same position when tracing is enabled.
    pub trace: Option<TraceSample<T>>,
}

/// Taps and the full eigenvalue trace of one transmission.
#[derive(Clone, Debug)]
pub struct LinkOutput<T> {
    pub taps: Vec<Tap<T>>,
    pub trace: Option<EigenvalueTrace<T>>,
}

/// Eigenvalue probe used for tracing: envelope → current eigenvalues.
pub type EigenvalueProbe<'a, T> = dyn FnMut(&DualPolEnvelope<T>) -> Result<Vec<C<T>>> + 'a;

/// Transmits `env` over `link` and returns the checkpoint taps.
///
/// Lumped amplification: per span, lossy propagation, gain `G`, ASE, window.
/// Distributed amplification: ideal propagation with noise added after every
/// step, window at every span end. With tracing enabled `probe` is called on
/// the input, after every amplifier (or `trace_points_per_span` times per span)
/// and its eigenvalues are integrated into the trace.
pub fn propagate_link<T: Real, R: Rng + ?Sized>(
    env: &DualPolEnvelope<T>,
    link: &LinkConfig,
    plan: &PropagationPlan<T>,
    rng: &mut R,
    mut probe: Option<&mut EigenvalueProbe<'_, T>>,
) -> Result<LinkOutput<T>> {
    link.validate()?;
    let spans = plan.checkpoint_spans(link)?;
    if plan.record_eigenvalue_trace && probe.is_none() {
        return Err(Error::MissingTrace);
    }
    let mut state = env.clone();
    let mut prop = SplitStep::for_envelope(&state)?.with_splitting(plan.splitting);
    let medium = Medium::of_link(link);
    let span = T::lit(link.span_norm());
    let mut trace = match (plan.record_eigenvalue_trace, probe.as_mut()) {
        (true, Some(p)) => Some(EigenvalueTrace::new(p(&state)?)),
        _ => None,
    };
    let mut taps = Vec::with_capacity(spans.len());
    let mut next = spans.iter().peekable();
    let emit = |s: usize, state: &DualPolEnvelope<T>, trace: &Option<EigenvalueTrace<T>>, taps: &mut Vec<Tap<T>>| {
        taps.push(Tap {
            z: span * T::lit(s as f64),
            span: s,
            envelope: state.clone(),
            trace: trace.as_ref().map(|t| t.last().clone()),
        });
    };
    if next.peek() == Some(&&0) {
        emit(0, &state, &trace, &mut taps);
        next.next();
    }
    let last_span = spans.last().copied().unwrap_or(0);

    for s in 1..=last_span {
        match link.amplification {
            Amplification::LumpedEdfa => {
                prop.propagate(&mut state, span, plan.step_size, &medium)?;
                state.scale(T::lit(link.span_gain().sqrt()));
                inject_edfa_noise(&mut state, link, rng)?;
                if let Some(w) = &plan.window {
                    apply_window(&mut state, w);
                }
                if let (Some(t), Some(p)) = (trace.as_mut(), probe.as_mut()) {
                    t.update(&p(&state)?, span)?;
                }
            }
            Amplification::IdealRaman => {
                let points = if trace.is_some() { plan.trace_points_per_span } else { 1 };
                let piece = span / T::lit(points as f64);
                for i in 0..points {
                    let noise_link = link;
                    let dt = state.dt();
                    prop.propagate_with(&mut state, piece, plan.step_size, &medium, |q1, q2, dz| {
                        let var = raman_variance(noise_link, dz, dt);
                        if var > 0.0 {
                            add_awgn(q1, var, rng);
                            add_awgn(q2, var, rng);
                        }
                        Ok(())
                    })?;
                    if i + 1 == points {
                        if let Some(w) = &plan.window {
                            apply_window(&mut state, w);
                        }
                    }
                    if let (Some(t), Some(p)) = (trace.as_mut(), probe.as_mut()) {
                        t.update(&p(&state)?, piece)?;
                    }
                }
            }
        }
        if !state.is_finite() {
            return Err(Error::NonFinite(format!("envelope after span {s}")));
        }
        if next.peek() == Some(&&s) {
            emit(s, &state, &trace, &mut taps);
            next.next();
        }
    }
    Ok(LinkOutput { taps, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::{signal_energy, TimeGrid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> C<f64> {
        C::new(re, im)
    }

    fn soliton(grid: &TimeGrid<f64>) -> DualPolEnvelope<f64> {
        DualPolEnvelope::from_fn(grid, |t| {
            let v = c(FRAC_1_SQRT_2 / t.cosh(), 0.0);
            (v, v)
        })
    }

    fn link(amp: Amplification, nf: f64, alpha_per_km: f64) -> LinkConfig {
        LinkConfig::new(
            1.25e-3,
            -21.67e-27,
            alpha_per_km / 1e3,
            41.5e3,
            72,
            nf,
            193.55e12,
            amp,
            1.1,
            20e-12,
        )
        .unwrap()
    }

    #[test]
    fn step_sequence_shortens_the_last_step() {
        let s = step_sequence(1.0, 0.3);
        assert_eq!(s.len(), 4);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((s[3] - 0.1).abs() < 1e-12);
        assert_eq!(step_sequence(0.9, 0.3).len(), 3);
        assert!(step_sequence(0.0, 0.3).is_empty());
    }

    #[test]
    fn zero_input_stays_zero() {
        let g = TimeGrid::centered(128, 0.1, 0.0).unwrap();
        let mut env = DualPolEnvelope::<f64>::zeros(&g);
        let mut p = SplitStep::for_envelope(&env).unwrap();
        p.propagate(&mut env, 1.0, 0.01, &Medium::ideal()).unwrap();
        assert_eq!(env.peak_amplitude(), 0.0);
    }

    #[test]
    fn fundamental_soliton_only_rotates() {
        let g = TimeGrid::covering(60.0, 0.05, 0.0).unwrap();
        let input = soliton(&g);
        let mut env = input.clone();
        let mut p = SplitStep::for_envelope(&env).unwrap();
        p.propagate(&mut env, PI, 0.005, &Medium::ideal()).unwrap();
        // sech solution of q_z + j q_tt + 2j‖q‖²q = 0 turns as e^{−jz}
        let rot = C::from_polar(1.0, -PI);
        let mut err: f64 = 0.0;
        for n in 0..g.n_samples {
            err = err.max((env.q1()[n] - input.q1()[n] * rot).norm());
        }
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn linear_regime_matches_gaussian_dispersion() {
        let g = TimeGrid::covering(200.0, 0.1, 0.0).unwrap();
        let eps = 1e-7;
        let mut env = DualPolEnvelope::from_fn(&g, |t: f64| (c(eps * (-t * t / 2.0).exp(), 0.0), c(0.0, 0.0)));
        let z = 1.3;
        SplitStep::for_envelope(&env)
            .unwrap()
            .propagate(&mut env, z, 0.1, &Medium::ideal())
            .unwrap();
        let w = c(1.0, -2.0 * z);
        let mut err: f64 = 0.0;
        for n in 0..g.n_samples {
            let t = g.time(n);
            let exact = (-(c(t * t, 0.0)) / (w * 2.0)).exp() / w.sqrt() * eps;
            err = err.max((env.q1()[n] - exact).norm());
        }
        assert!(err <= 1e-10 * eps, "{err}");
    }

    #[test]
    fn lossless_propagation_conserves_energy() {
        let g = TimeGrid::covering(60.0, 0.05, 0.0).unwrap();
        let mut env = soliton(&g);
        let e0 = signal_energy(&env);
        let mut p = SplitStep::for_envelope(&env).unwrap();
        for _ in 0..20 {
            p.propagate(&mut env, 1.0, 0.05, &Medium::ideal()).unwrap();
        }
        assert!((signal_energy(&env) / e0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loss_is_restored_by_span_gain() {
        let l = link(Amplification::LumpedEdfa, f64::NEG_INFINITY, 0.0459);
        let g = TimeGrid::covering(60.0, 0.05, 0.0).unwrap();
        let mut env = soliton(&g);
        let e0 = signal_energy(&env);
        let mut p = SplitStep::for_envelope(&env).unwrap();
        p.propagate(&mut env, l.span_norm(), 0.01, &Medium::of_link(&l))
            .unwrap();
        assert!((signal_energy(&env) * l.span_gain() / e0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn edfa_noise_has_configured_variance() {
        let l = link(Amplification::LumpedEdfa, 10.0, 0.0459);
        let g = TimeGrid::centered(500_000, 0.05, 0.0).unwrap();
        let mut env = DualPolEnvelope::<f64>::zeros(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        inject_edfa_noise(&mut env, &l, &mut rng).unwrap();
        let expected = edfa_noise_psd(&l) / 0.05;
        let got: f64 = (0..g.n_samples).map(|n| env.power(n)).sum::<f64>() / (2.0 * g.n_samples as f64);
        assert!((got / expected - 1.0).abs() < 0.01, "{got} vs {expected}");

        // same seed, same draws
        let mut again = DualPolEnvelope::<f64>::zeros(&g);
        inject_edfa_noise(&mut again, &l, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(env, again);
    }

    #[test]
    fn edfa_noise_edge_cases() {
        let g = TimeGrid::centered(64, 0.05, 0.0).unwrap();
        let mut env = DualPolEnvelope::<f64>::zeros(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        inject_edfa_noise(
            &mut env,
            &link(Amplification::LumpedEdfa, f64::NEG_INFINITY, 0.0459),
            &mut rng,
        )
        .unwrap();
        assert_eq!(env.peak_amplitude(), 0.0);
        assert!(inject_edfa_noise(&mut env, &link(Amplification::LumpedEdfa, 10.0, 0.0), &mut rng).is_err());
    }

    #[test]
    fn raman_noise_edge_cases() {
        let mut l = link(Amplification::IdealRaman, 10.0, 0.0459);
        l.nsp = 0.0;
        let g = TimeGrid::centered(64, 0.05, 0.0).unwrap();
        let mut env = DualPolEnvelope::<f64>::zeros(&g);
        inject_raman_noise(&mut env, &l, 0.1, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(env.peak_amplitude(), 0.0);
    }

    #[test]
    fn window_shape() {
        let w = WindowSpec::<f64>::new(10.0, 0.8, 1.0).unwrap();
        assert_eq!(w.value(1.0), 1.0);
        assert_eq!(w.value(5.0), 1.0);
        assert_eq!(w.value(6.0), 0.0);
        assert_eq!(w.value(-4.5), 0.0);
        assert!((w.value(5.5) - 0.5).abs() < 1e-12);
        assert!(WindowSpec::new(10.0, 0.0, 0.0).is_err());

        // constant signal: energy ratio equals the closed-form window integral
        let g = TimeGrid::covering(20.0, 1e-3, 1.0).unwrap();
        let mut env = DualPolEnvelope::from_fn(&g, |_| (c(1.0, 0.0), c(0.0, 0.0)));
        apply_window(&mut env, &w);
        assert!((signal_energy(&env) - w.energy_factor()).abs() < 1e-5);
        assert_eq!(env.q1()[0], c(0.0, 0.0));
    }

    #[test]
    fn trace_integrates_squared_eigenvalues() {
        let mut t = EigenvalueTrace::new(vec![c(0.0, 0.5)]);
        for _ in 0..10 {
            t.update(&[c(0.0, 0.5)], 0.3).unwrap();
        }
        assert!((t.last().integrals[0] - c(-0.25 * 3.0, 0.0)).norm() < 1e-12);

        let mut t = EigenvalueTrace::new(vec![c(0.0, 0.5), c(0.0, 0.4)]);
        t.update(&[c(0.0, 0.4), c(0.0, 0.5)], 1.0).unwrap();
        t.update(&[c(0.0, 0.4), c(0.0, 0.5)], 1.0).unwrap();
        assert!((t.last().integrals[0] - c(-0.5, 0.0)).norm() < 1e-12);
        assert!((t.last().integrals[1] - c(-0.32, 0.0)).norm() < 1e-12);

        // two halves at different levels: −0.25 then −0.16 → mean −0.205
        let mut t = EigenvalueTrace::new(vec![c(0.0, 0.5)]);
        t.update(&[c(0.0, 0.5)], 0.5).unwrap();
        t.update(&[c(0.0, 0.4)], 0.0).unwrap();
        t.update(&[c(0.0, 0.4)], 0.5).unwrap();
        assert!((t.last().integrals[0].re + 0.205).abs() < 1e-12);

        assert!(t.update(&[], 0.1).is_err());
    }

    #[test]
    fn zero_spans_returns_input() {
        let l = link(Amplification::LumpedEdfa, 10.0, 0.0459);
        let g = TimeGrid::covering(60.0, 0.05, 0.0).unwrap();
        let env = soliton(&g);
        let plan = PropagationPlan {
            step_size: 0.01,
            splitting: Splitting::Fourth,
            checkpoints: vec![0.0],
            window: None,
            record_eigenvalue_trace: false,
            trace_points_per_span: 1,
        };
        let out = propagate_link(&env, &l, &plan, &mut ChaCha8Rng::seed_from_u64(0), None).unwrap();
        assert_eq!(out.taps.len(), 1);
        assert_eq!(out.taps[0].envelope, env);
        let bad = PropagationPlan {
            checkpoints: vec![0.3],
            ..plan
        };
        assert!(propagate_link(&env, &l, &bad, &mut ChaCha8Rng::seed_from_u64(0), None).is_err());
    }

    #[test]
    fn edfa_without_loss_or_noise_equals_ideal_channel() {
        let mut edfa = link(Amplification::LumpedEdfa, f64::NEG_INFINITY, 0.0);
        edfa.n_spans = 4;
        let mut raman = link(Amplification::IdealRaman, 10.0, 0.0);
        raman.nsp = 0.0;
        raman.n_spans = 4;
        let g = TimeGrid::covering(60.0, 0.05, 0.0).unwrap();
        let env = soliton(&g);
        let plan = PropagationPlan {
            step_size: 0.02,
            splitting: Splitting::Fourth,
            checkpoints: vec![4.0 * edfa.span_norm()],
            window: None,
            record_eigenvalue_trace: false,
            trace_points_per_span: 1,
        };
        let a = propagate_link(&env, &edfa, &plan, &mut ChaCha8Rng::seed_from_u64(0), None).unwrap();
        let b = propagate_link(&env, &raman, &plan, &mut ChaCha8Rng::seed_from_u64(0), None).unwrap();
        assert!(a.taps[0].envelope.max_abs_diff(&b.taps[0].envelope) <= 1e-10);
    }

    #[test]
    fn single_precision_propagation_tracks_double() {
        let g = TimeGrid::covering(60.0, 0.05, 0.0).unwrap();
        let mut a = soliton(&g);
        let mut b = a.cast::<f32>();
        SplitStep::for_envelope(&a)
            .unwrap()
            .propagate(&mut a, 2.0, 0.01, &Medium::ideal())
            .unwrap();
        SplitStep::for_envelope(&b)
            .unwrap()
            .propagate(&mut b, 2.0f32, 0.01, &Medium::ideal())
            .unwrap();
        assert!(a.max_abs_diff(&b.cast::<f64>()) < 1e-3);
    }
}
