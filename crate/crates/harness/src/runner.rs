//! Ensemble runner: symbols → synthesis → link → receiver → NFT → estimates.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use solnft::darboux::{auto_grid, darboux_synthesize};
use solnft::envelope::{pulse_duration, TimeGrid};
use solnft::modem::{
    decide_differential, decide_independent, decompose, encode_independent, gae_equalize, mbr_equalize,
    pair_to_nominal, precode_differential, ConstellationSpec, DifferentialSymbol, IndependentSymbol, PrecodedSymbols,
};
use solnft::nft::{discrete_spectrum_with, find_eigenvalues_with, NftConfig};
use solnft::scalar::arg_positive;
use solnft::spectrum::pair_nearest;
use solnft::ssfm::{propagate_link, PropagationPlan, WindowSpec};
use solnft::stats::{
    summarize, CheckpointSummary, EnsembleRow, EnsembleTable, Equalizer, Quantity, QuantityValues, RejectReason,
    Rejection, Spacings,
};
use solnft::units::LinkConfig;
use solnft::{Complex64, Spectrum};

use crate::config::{Modulation, ScenarioConfig};
use crate::error::HarnessError;
use crate::receiver::{one_sided_bandwidth, FrontEnd};

/// Energy fraction defining both pulse duration and bandwidth.
pub const ENERGY_FRACTION: f64 = 0.9999;
/// Most constellation combinations inspected when sizing the frame.
const MAX_SURVEYED: usize = 4096;
/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "SOLNFT_WORKERS";

/// Symbol indices of one pulse, one entry per eigenvalue.
#[derive(Clone, Debug, PartialEq)]
pub enum PulseSymbols {
    Independent(Vec<IndependentSymbol>),
    Differential(Vec<DifferentialSymbol>),
}

/// Number of points of each modulated dimension of eigenvalue `k`.
fn radices(cfg: &ScenarioConfig, spec: &ConstellationSpec, k: usize) -> [usize; 4] {
    match cfg.modulation {
        Modulation::Independent => {
            let (p, m) = (spec.phases.len(), spec.magnitudes_for(k).len());
            [p, p, m, m]
        }
        Modulation::Differential => [
            spec.delta_t_points.len(),
            spec.theta_points.len(),
            spec.phases.len(),
            spec.phases.len(),
        ],
    }
}

fn symbols_from_digits(cfg: &ScenarioConfig, digits: &[[usize; 4]]) -> PulseSymbols {
    match cfg.modulation {
        Modulation::Independent => PulseSymbols::Independent(
            digits
                .iter()
                .map(|d| IndependentSymbol {
                    phase: [d[0], d[1]],
                    magnitude: [d[2], d[3]],
                })
                .collect(),
        ),
        Modulation::Differential => PulseSymbols::Differential(
            digits
                .iter()
                .map(|d| DifferentialSymbol {
                    delta_t: d[0],
                    theta: d[1],
                    phi_c: d[2],
                    phi_d: d[3],
                })
                .collect(),
        ),
    }
}

/// Uniformly drawn symbols for every eigenvalue.
pub fn draw_symbols<R: Rng + ?Sized>(cfg: &ScenarioConfig, spec: &ConstellationSpec, rng: &mut R) -> PulseSymbols {
    let digits: Vec<[usize; 4]> = (0..cfg.eigenvalues.len())
        .map(|k| radices(cfg, spec, k).map(|r| rng.gen_range(0..r)))
        .collect();
    symbols_from_digits(cfg, &digits)
}

/// Spectrum carrying `symbols` on the nominal eigenvalues.
pub fn encode(cfg: &ScenarioConfig, spec: &ConstellationSpec, symbols: &PulseSymbols) -> solnft::Result<Spectrum> {
    let nominal = cfg.nominal_eigenvalues();
    match symbols {
        PulseSymbols::Independent(s) => encode_independent(s, &nominal, spec),
        PulseSymbols::Differential(s) => {
            let pre = s
                .iter()
                .enumerate()
                .map(|(k, d)| d.to_precoded(spec, k))
                .collect::<solnft::Result<Vec<PrecodedSymbols<f64>>>>()?;
            precode_differential(&pre, &nominal)
        }
    }
}

/// Every constellation combination, or an evenly strided subset when there are
/// more than a few thousand.
fn survey(cfg: &ScenarioConfig, spec: &ConstellationSpec) -> Vec<PulseSymbols> {
    let rad: Vec<usize> = (0..cfg.eigenvalues.len()).flat_map(|k| radices(cfg, spec, k)).collect();
    let total = rad.iter().product::<usize>();
    let stride = total.div_ceil(MAX_SURVEYED).max(1);
    (0..total)
        .step_by(stride)
        .map(|mut idx| {
            let flat: Vec<usize> = rad
                .iter()
                .map(|r| {
                    let d = idx % r;
                    idx /= r;
                    d
                })
                .collect();
            let digits: Vec<[usize; 4]> = flat.chunks(4).map(|c| [c[0], c[1], c[2], c[3]]).collect();
            symbols_from_digits(cfg, &digits)
        })
        .collect()
}

/// Time and frequency geometry derived from the constellation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Layout {
    /// Longest 99.99 % energy duration over the constellation, normalized.
    pub pulse_duration: f64,
    /// Mean energy centroid over the constellation.
    pub center: f64,
    /// Largest one-sided 99.99 % angular bandwidth, normalized.
    pub bandwidth: f64,
    /// Receiver lowpass cutoff (angular, normalized); infinite when disabled.
    pub cutoff: f64,
    /// Receiver lowpass cutoff, Hz.
    pub cutoff_hz: f64,
    pub dt: f64,
    pub n_samples: usize,
    pub frame_width: f64,
    pub truncation: (f64, f64),
    pub l0_m: f64,
    pub p0_w: f64,
    pub link_length_norm: f64,
    pub step_size_norm: f64,
}

/// Smallest `n ≥ min` whose only prime factors are 2, 3 and 5.
fn fft_friendly(min: usize) -> usize {
    (min.max(16)..)
        .find(|&n| {
            let mut m = n;
            for p in [2, 3, 5] {
                while m % p == 0 {
                    m /= p;
                }
            }
            m == 1
        })
        .expect("smooth numbers are unbounded")
}

/// Worst-case pulse duration and bandwidth of the constellation.
pub fn compute_layout(cfg: &ScenarioConfig) -> Result<Layout, HarnessError> {
    let spec = cfg.constellation.spec();
    let link = cfg.link_config()?;
    let (mut duration, mut bandwidth, mut center_sum, mut count) = (0.0f64, 0.0f64, 0.0, 0usize);
    let surveyed: Vec<(f64, f64, f64)> = survey(cfg, &spec)
        .par_iter()
        .map(|s| -> solnft::Result<(f64, f64, f64)> {
            let sp = encode(cfg, &spec, s)?;
            let grid = auto_grid(&sp, 16)?;
            let env = darboux_synthesize(&sp, &grid)?.envelope;
            Ok((
                pulse_duration(&env, ENERGY_FRACTION)?,
                one_sided_bandwidth(&env, ENERGY_FRACTION),
                env.centroid()?,
            ))
        })
        .collect::<solnft::Result<_>>()?;
    for (d, b, c) in surveyed {
        duration = duration.max(d);
        bandwidth = bandwidth.max(b);
        center_sum += c;
        count += 1;
    }
    let center = center_sum / count as f64;
    let sigma_max = cfg.eigenvalues.iter().map(|l| l[1]).fold(0.0, f64::max);
    let dt = 1.0 / (2.0 * sigma_max * cfg.simulation.samples_per_scale as f64);
    let frame_width = cfg.simulation.frame_factor * duration;
    let n_samples = fft_friendly((frame_width / dt).ceil() as usize);
    let cutoff = bandwidth * cfg.receiver.lowpass_cutoff_factor;
    let half = 0.5 * cfg.receiver.truncation_factor * duration;
    Ok(Layout {
        pulse_duration: duration,
        center,
        bandwidth,
        cutoff,
        cutoff_hz: cutoff / (std::f64::consts::TAU * link.scales.t0),
        dt,
        n_samples,
        frame_width,
        truncation: (center - half, center + half),
        l0_m: link.scales.l0,
        p0_w: link.scales.p0,
        link_length_norm: link.length_norm(),
        step_size_norm: link.scales.to_normalized_length(cfg.simulation.step_size_m),
    })
}

/// Receiver lowpass cutoff in Hz for the scenario.
pub fn compute_lowpass_cutoff(cfg: &ScenarioConfig) -> Result<f64, HarnessError> {
    Ok(compute_layout(cfg)?.cutoff_hz)
}

/// Every quantity of one eigenvalue read off a coefficient pair.
pub fn quantities(b1: Complex64, b2: Complex64, sigma: f64) -> solnft::Result<QuantityValues> {
    let p = decompose(b1, b2, sigma)?;
    let mut v = [0.0; 8];
    v[Quantity::Phi1.index()] = arg_positive(b1);
    v[Quantity::Phi2.index()] = arg_positive(b2);
    v[Quantity::LnMag1.index()] = b1.norm().ln();
    v[Quantity::LnMag2.index()] = b2.norm().ln();
    v[Quantity::PhiC.index()] = p.phi_c;
    v[Quantity::PhiD.index()] = p.phi_d;
    v[Quantity::Theta.index()] = p.theta;
    v[Quantity::DeltaT.index()] = p.delta_t;
    Ok(v)
}

/// Spacing used to normalize each variance: adjacent phase points, adjacent
/// `θ` points, 1 for `Δt` and `ln|b|`.
pub fn spacings(spec: &ConstellationSpec) -> Spacings {
    let min_gap = |v: &[f64]| v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let mut s = Spacings::new();
    if spec.phases.len() > 1 {
        let d = min_gap(&spec.phases).min(std::f64::consts::TAU - (spec.phases.last().unwrap() - spec.phases[0]));
        for q in [Quantity::Phi1, Quantity::Phi2, Quantity::PhiC, Quantity::PhiD] {
            s.insert(q, d);
        }
    }
    if spec.theta_points.len() > 1 {
        s.insert(Quantity::Theta, min_gap(&spec.theta_points));
    }
    for q in [Quantity::DeltaT, Quantity::LnMag1, Quantity::LnMag2] {
        s.insert(q, 1.0);
    }
    s
}

struct Context<'a> {
    cfg: &'a ScenarioConfig,
    spec: ConstellationSpec,
    link: LinkConfig,
    layout: Layout,
    grid: TimeGrid<f64>,
    plan: PropagationPlan<f64>,
    nominal: Vec<Complex64>,
    nft: NftConfig<f64>,
}

/// Rows and rejections of one pulse.
#[derive(Clone, Debug, Default)]
pub struct PulseOutcome {
    pub rows: Vec<EnsembleRow>,
    pub rejections: Vec<Rejection>,
}

fn count_errors(pairs: &[(usize, usize, usize)]) -> (u32, u32) {
    // (sent, decided, number of points)
    let active = pairs.iter().filter(|p| p.2 > 1);
    let (mut errors, mut symbols) = (0, 0);
    for &(s, d, _) in active {
        symbols += 1;
        errors += u32::from(s != d);
    }
    (errors, symbols)
}

impl Context<'_> {
    fn decisions(&self, symbols: &PulseSymbols, k: usize, est: &QuantityValues) -> (u32, u32) {
        let r = radices(self.cfg, &self.spec, k);
        match symbols {
            PulseSymbols::Independent(s) => {
                let d = decide_independent(
                    [est[Quantity::LnMag1.index()], est[Quantity::LnMag2.index()]],
                    [est[Quantity::Phi1.index()], est[Quantity::Phi2.index()]],
                    &self.spec,
                    k,
                );
                let s = s[k];
                count_errors(&[
                    (s.phase[0], d.phase[0], r[0]),
                    (s.phase[1], d.phase[1], r[1]),
                    (s.magnitude[0], d.magnitude[0], r[2]),
                    (s.magnitude[1], d.magnitude[1], r[3]),
                ])
            }
            PulseSymbols::Differential(s) => {
                let p = PrecodedSymbols {
                    delta_t: est[Quantity::DeltaT.index()],
                    theta: est[Quantity::Theta.index()],
                    phi_c: est[Quantity::PhiC.index()],
                    phi_d: est[Quantity::PhiD.index()],
                };
                let d = decide_differential(&p, &self.spec, k);
                let s = s[k];
                count_errors(&[
                    (s.delta_t, d.delta_t, r[0]),
                    (s.theta, d.theta, r[1]),
                    (s.phi_c, d.phi_c, r[2]),
                    (s.phi_d, d.phi_d, r[3]),
                ])
            }
        }
    }

    fn front_end(&self) -> FrontEnd {
        FrontEnd::new(
            self.layout.n_samples,
            self.layout.dt,
            self.layout.cutoff,
            self.cfg.receiver.upsample_factor,
            self.layout.truncation,
        )
    }

    fn run_pulse(&self, pulse: u64) -> PulseOutcome {
        let mut out = PulseOutcome::default();
        let fail = |out: &mut PulseOutcome, checkpoint, reason, e: &dyn std::fmt::Display| {
            out.rejections.push(Rejection {
                pulse,
                checkpoint,
                reason,
                message: e.to_string(),
            })
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.master_seed);
        rng.set_stream(pulse);
        let symbols = draw_symbols(self.cfg, &self.spec, &mut rng);
        let tx = match encode(self.cfg, &self.spec, &symbols).and_then(|sp| {
            let syn = darboux_synthesize(&sp, &self.grid)?;
            if !syn.decayed() {
                return Err(solnft::Error::InvalidEnvelope(format!(
                    "pulse does not decay inside the frame (edge ratio {:e})",
                    syn.edge_ratio
                )));
            }
            Ok((sp, syn.envelope))
        }) {
            Ok(v) => v,
            Err(e) => {
                fail(&mut out, None, RejectReason::Synthesis, &e);
                return out;
            }
        };
        let (tx_spectrum, tx_env) = tx;

        let fe = self.front_end();
        let mut guesses = self.nominal.clone();
        let nft = &self.nft;
        let mut probe = |env: &solnft::Envelope| -> solnft::Result<Vec<Complex64>> {
            let rx = fe.receive(env)?;
            let roots = find_eigenvalues_with(&rx, &guesses, nft)?;
            let picks = pair_nearest(&guesses, &roots)?;
            guesses = picks.into_iter().map(|i| roots[i]).collect();
            Ok(guesses.clone())
        };
        let probe_ref: Option<&mut solnft::ssfm::EigenvalueProbe<'_, f64>> = if self.plan.record_eigenvalue_trace {
            Some(&mut probe)
        } else {
            None
        };
        let link_out = match propagate_link(&tx_env, &self.link, &self.plan, &mut rng, probe_ref) {
            Ok(o) => o,
            Err(e) => {
                fail(&mut out, None, RejectReason::Propagation, &e);
                return out;
            }
        };

        for (cp, tap) in self.cfg.checkpoint_spans.iter().zip(&link_out.taps) {
            let cp = *cp;
            let rx_spectrum = match fe
                .receive(&tap.envelope)
                .and_then(|rx| discrete_spectrum_with(&rx, &self.nominal, nft))
            {
                Ok(s) => s,
                Err(e) => {
                    fail(&mut out, Some(cp), RejectReason::Nft, &e);
                    continue;
                }
            };
            let paired = match pair_to_nominal(&rx_spectrum, &self.nominal) {
                Ok(p) => p,
                Err(e) => {
                    fail(&mut out, Some(cp), RejectReason::Pairing, &e);
                    continue;
                }
            };
            let mbr = match mbr_equalize(&paired, &self.nominal, tap.z) {
                Ok(m) => m,
                Err(e) => {
                    fail(&mut out, Some(cp), RejectReason::Estimation, &e);
                    continue;
                }
            };
            let gae = match &tap.trace {
                Some(t) => match gae_equalize(&paired, &t.integrals) {
                    Ok(g) => Some(g),
                    Err(e) => {
                        fail(&mut out, Some(cp), RejectReason::Estimation, &e);
                        continue;
                    }
                },
                None => None,
            };
            let mut rows = Vec::with_capacity(self.nominal.len());
            for (k, txe) in tx_spectrum.entries().iter().enumerate() {
                let sigma_rx = paired[k].lambda.im;
                let est = quantities(mbr[k].b1, mbr[k].b2, sigma_rx);
                let gae_est = gae.as_ref().map(|g| quantities(g[k].b1, g[k].b2, sigma_rx)).transpose();
                let (sent, est, gae_est) = match (quantities(txe.b1, txe.b2, txe.lambda.im), est, gae_est) {
                    (Ok(a), Ok(b), Ok(c)) => (a, b, c),
                    (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => {
                        fail(&mut out, Some(cp), RejectReason::Estimation, &e);
                        rows.clear();
                        break;
                    }
                };
                let (symbol_errors, n_symbols) = self.decisions(&symbols, k, &est);
                rows.push(EnsembleRow {
                    pulse,
                    checkpoint: cp,
                    z: tap.z,
                    eigenvalue: k,
                    lambda_tx: txe.lambda,
                    lambda_rx: paired[k].lambda,
                    sent,
                    mbr: est,
                    gae: gae_est,
                    trace_integral: tap.trace.as_ref().map(|t| t.integrals[k]),
                    symbol_errors,
                    symbols: n_symbols,
                });
            }
            out.rows.extend(rows);
        }
        out
    }
}

/// Worker pool sized by [`WORKERS_ENV`] when set, else by the machine.
pub fn worker_pool() -> Result<rayon::ThreadPool, HarnessError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| HarnessError::Config {
            field: WORKERS_ENV.into(),
            reason: format!("`{v}` is not a worker count"),
        })?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| HarnessError::Config {
        field: WORKERS_ENV.into(),
        reason: e.to_string(),
    })
}

/// Ensemble table, statistics and geometry of one run.
#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub table: EnsembleTable,
    pub layout: Layout,
    pub summary: Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RejectionRecord {
    pub pulse: u64,
    pub checkpoint: Option<usize>,
    pub reason: RejectReason,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub n_pulses: usize,
    pub failed_pulses: usize,
    pub accepted_rows: usize,
    pub rejection_counts: BTreeMap<&'static str, usize>,
    pub rejections: Vec<RejectionRecord>,
    pub spacings: Spacings,
    pub checkpoint_distances_km: Vec<f64>,
    pub checkpoints: Vec<CheckpointSummary>,
}

impl Summary {
    /// Checkpoint summary at a span index.
    pub fn at_span(&self, span: usize) -> Option<&CheckpointSummary> {
        self.checkpoints.iter().find(|c| c.checkpoint == span)
    }
}

/// Runs every pulse of the scenario and reduces the ensemble.
pub fn run_experiment(cfg: &ScenarioConfig) -> Result<ExperimentResult, HarnessError> {
    cfg.validate()?;
    let layout = compute_layout(cfg)?;
    let link = cfg.link_config()?;
    let span = link.span_norm();
    let spec = cfg.constellation.spec();
    let grid = TimeGrid::centered(layout.n_samples, layout.dt, layout.center)?;
    let plan = PropagationPlan {
        step_size: layout.step_size_norm,
        splitting: cfg.simulation.splitting,
        checkpoints: cfg.checkpoint_spans.iter().map(|&s| s as f64 * span).collect(),
        window: Some(WindowSpec::new(
            layout.frame_width,
            cfg.simulation.window_flat_fraction,
            layout.center,
        )?),
        record_eigenvalue_trace: cfg.uses(Equalizer::Gae),
        trace_points_per_span: cfg.simulation.trace_points_per_span,
    };
    let ctx = Context {
        cfg,
        spec,
        link,
        layout: layout.clone(),
        grid,
        plan,
        nominal: cfg.nominal_eigenvalues(),
        nft: NftConfig {
            boundary_tolerance: None,
            ..NftConfig::default()
        },
    };

    let pool = worker_pool()?;
    let outcomes: Vec<PulseOutcome> = pool.install(|| {
        (0..cfg.n_pulses as u64)
            .into_par_iter()
            .map(|p| ctx.run_pulse(p))
            .collect()
    });

    let failed_pulses = outcomes.iter().filter(|o| !o.rejections.is_empty()).count();
    if failed_pulses * 100 > cfg.n_pulses {
        return Err(HarnessError::TooManyFailures {
            failed: failed_pulses,
            total: cfg.n_pulses,
        });
    }
    let mut table = EnsembleTable::new();
    for o in outcomes {
        for r in o.rows {
            table.push(r);
        }
        for r in o.rejections {
            table.reject(r);
        }
    }
    table.sort();

    let spacings = spacings(&ctx.spec);
    let checkpoints = summarize(&table, &spacings, cfg.ser_convention);
    let summary = Summary {
        n_pulses: cfg.n_pulses,
        failed_pulses,
        accepted_rows: table.rows().len(),
        rejection_counts: table.rejection_counts(),
        rejections: table
            .rejected()
            .iter()
            .map(|r| RejectionRecord {
                pulse: r.pulse,
                checkpoint: r.checkpoint,
                reason: r.reason,
                message: r.message.clone(),
            })
            .collect(),
        spacings,
        checkpoint_distances_km: cfg
            .checkpoint_spans
            .iter()
            .map(|&s| s as f64 * cfg.link.span_length_km)
            .collect(),
        checkpoints,
    };
    Ok(ExperimentResult { table, layout, summary })
}
