//! Ensemble statistics: error variances, correlations, histograms with Gaussian
//! fits, backrotation phase mismatch and the Q-function symbol error rate.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::scalar::wrap_phase;

/// Minimum number of samples behind any variance or correlation.
pub const MIN_SAMPLES: usize = 30;

/// Modulated or derived quantity of one eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Phi1,
    Phi2,
    LnMag1,
    LnMag2,
    PhiC,
    PhiD,
    Theta,
    DeltaT,
}

impl Quantity {
    pub const ALL: [Quantity; 8] = [
        Quantity::Phi1,
        Quantity::Phi2,
        Quantity::LnMag1,
        Quantity::LnMag2,
        Quantity::PhiC,
        Quantity::PhiD,
        Quantity::Theta,
        Quantity::DeltaT,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Quantity::Phi1 => "phi1",
            Quantity::Phi2 => "phi2",
            Quantity::LnMag1 => "ln_mag1",
            Quantity::LnMag2 => "ln_mag2",
            Quantity::PhiC => "phi_c",
            Quantity::PhiD => "phi_d",
            Quantity::Theta => "theta",
            Quantity::DeltaT => "delta_t",
        }
    }

    /// Errors of phase quantities are wrapped into `(-π, π]`.
    pub fn is_phase(self) -> bool {
        matches!(self, Quantity::Phi1 | Quantity::Phi2 | Quantity::PhiC | Quantity::PhiD)
    }
}

/// Values of all quantities of one eigenvalue, indexed by [`Quantity::index`].
pub type QuantityValues = [f64; 8];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Equalizer {
    Mbr,
    Gae,
}

/// One accepted (pulse, checkpoint, eigenvalue) observation.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleRow {
    pub pulse: u64,
    pub checkpoint: usize,
    /// Normalized distance of the checkpoint.
    pub z: f64,
    pub eigenvalue: usize,
    pub lambda_tx: Complex<f64>,
    pub lambda_rx: Complex<f64>,
    pub sent: QuantityValues,
    pub mbr: QuantityValues,
    pub gae: Option<QuantityValues>,
    /// `∫λ²dz` recorded up to this checkpoint.
    pub trace_integral: Option<Complex<f64>>,
    /// Decided symbols that differ from the sent ones (MBR path).
    pub symbol_errors: u32,
    /// Decided symbols in this row.
    pub symbols: u32,
}

impl EnsembleRow {
    pub fn estimate(&self, eq: Equalizer) -> Option<&QuantityValues> {
        match eq {
            Equalizer::Mbr => Some(&self.mbr),
            Equalizer::Gae => self.gae.as_ref(),
        }
    }

    /// `estimate − sent`, wrapped for phases.
    pub fn error(&self, q: Quantity, eq: Equalizer) -> Option<f64> {
        let est = self.estimate(eq)?[q.index()];
        let d = est - self.sent[q.index()];
        Some(if q.is_phase() { wrap_phase(d) } else { d })
    }

    fn is_finite(&self) -> bool {
        let ok = |v: &QuantityValues| v.iter().all(|x| x.is_finite());
        ok(&self.sent) && ok(&self.mbr) && self.gae.as_ref().is_none_or(ok)
    }
}

/// Reason a pulse or observation did not produce a row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Synthesis,
    Propagation,
    Nft,
    Pairing,
    NonFinite,
    Estimation,
}

impl RejectReason {
    pub fn code(self) -> &'static str {
        match self {
            RejectReason::Synthesis => "synthesis",
            RejectReason::Propagation => "propagation",
            RejectReason::Nft => "nft",
            RejectReason::Pairing => "pairing",
            RejectReason::NonFinite => "non_finite",
            RejectReason::Estimation => "estimation",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Rejection {
    pub pulse: u64,
    /// `None` when the whole pulse failed before reaching any checkpoint.
    pub checkpoint: Option<usize>,
    pub reason: RejectReason,
    pub message: String,
}

/// Accepted rows plus rejected observations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnsembleTable {
    rows: Vec<EnsembleRow>,
    rejected: Vec<Rejection>,
}

impl EnsembleTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a row; rows with non-finite values are diverted to the rejected list.
    pub fn push(&mut self, row: EnsembleRow) {
        if row.is_finite() {
            self.rows.push(row);
        } else {
            self.rejected.push(Rejection {
                pulse: row.pulse,
                checkpoint: Some(row.checkpoint),
                reason: RejectReason::NonFinite,
                message: format!("eigenvalue {} has non-finite estimates", row.eigenvalue),
            });
        }
    }

    pub fn reject(&mut self, r: Rejection) {
        self.rejected.push(r);
    }

    /// Appends another table, keeping rows in insertion order.
    pub fn extend(&mut self, other: EnsembleTable) {
        self.rows.extend(other.rows);
        self.rejected.extend(other.rejected);
    }

    /// Sorts by (pulse, checkpoint, eigenvalue) so reductions have a fixed order.
    pub fn sort(&mut self) {
        self.rows.sort_by_key(|r| (r.pulse, r.checkpoint, r.eigenvalue));
        self.rejected.sort_by_key(|r| (r.pulse, r.checkpoint, r.reason));
    }

    pub fn rows(&self) -> &[EnsembleRow] {
        &self.rows
    }

    pub fn rejected(&self) -> &[Rejection] {
        &self.rejected
    }

    pub fn rejection_counts(&self) -> BTreeMap<&'static str, usize> {
        let mut m = BTreeMap::new();
        for r in &self.rejected {
            *m.entry(r.reason.code()).or_insert(0) += 1;
        }
        m
    }

    /// Sorted distinct checkpoint indices with their distance.
    pub fn checkpoints(&self) -> Vec<(usize, f64)> {
        let mut m = BTreeMap::new();
        for r in &self.rows {
            m.entry(r.checkpoint).or_insert(r.z);
        }
        m.into_iter().collect()
    }

    pub fn eigenvalue_count(&self) -> usize {
        self.rows.iter().map(|r| r.eigenvalue + 1).max().unwrap_or(0)
    }

    fn select(&self, checkpoint: usize, eigenvalue: usize) -> impl Iterator<Item = &EnsembleRow> {
        self.rows
            .iter()
            .filter(move |r| r.checkpoint == checkpoint && r.eigenvalue == eigenvalue)
    }

    /// Errors of one quantity at one checkpoint and eigenvalue, in row order.
    pub fn errors(&self, q: Quantity, eq: Equalizer, checkpoint: usize, eigenvalue: usize) -> Vec<f64> {
        self.select(checkpoint, eigenvalue)
            .filter_map(|r| r.error(q, eq))
            .collect()
    }

    /// Estimates of one quantity, in row order.
    pub fn estimates(&self, q: Quantity, eq: Equalizer, checkpoint: usize, eigenvalue: usize) -> Vec<f64> {
        self.select(checkpoint, eigenvalue)
            .filter_map(|r| r.estimate(eq).map(|v| v[q.index()]))
            .collect()
    }

    /// Sent values of one quantity, in row order.
    pub fn sent(&self, q: Quantity, checkpoint: usize, eigenvalue: usize) -> Vec<f64> {
        self.select(checkpoint, eigenvalue).map(|r| r.sent[q.index()]).collect()
    }
}

/// Sample variance (`n − 1` denominator) divided by `spacing²` when given.
pub fn error_variance(errors: &[f64], spacing: Option<f64>) -> Result<f64> {
    if errors.len() < MIN_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_SAMPLES,
            have: errors.len(),
        });
    }
    let v = sample_variance(errors);
    Ok(match spacing {
        Some(d) => v / (d * d),
        None => v,
    })
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// Pearson coefficient of two paired error sequences; `None` if either has zero
/// variance or fewer than [`MIN_SAMPLES`] pairs are present.
pub fn correlation_coefficient(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < MIN_SAMPLES {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Standard normal tail probability.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// How a normalized variance is turned into a symbol error rate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SerConvention {
    /// `Q(1/√v)`.
    #[default]
    SingleTail,
    /// `2·Q(1/(2√v))`: half-spacing distance to both neighbors.
    TwoNeighbor,
}

/// Symbol error rate estimate from a variance normalized by the squared spacing.
pub fn ser_from_variance(normalized_variance: f64, convention: SerConvention) -> f64 {
    if !(normalized_variance > 0.0) {
        return 0.0;
    }
    let s = normalized_variance.sqrt();
    match convention {
        SerConvention::SingleTail => q_function(1.0 / s),
        SerConvention::TwoNeighbor => 2.0 * q_function(0.5 / s),
    }
}

/// Squared wrapped phase of `e^{4j∫λ²dz} / e^{4j(λ(0)² + λ(L)²)L/2}`.
pub fn mismatch_sq(integral: Complex<f64>, lambda0: Complex<f64>, lambda_l: Complex<f64>, length: f64) -> f64 {
    let mean_rot = (lambda0 * lambda0 + lambda_l * lambda_l) * (0.5 * length);
    let phase = wrap_phase(4.0 * (integral - mean_rot).re);
    phase * phase
}

/// Ensemble mean of [`mismatch_sq`] over `(∫λ²dz, λ(0), λ(L))` triples.
pub fn backrotation_mismatch(samples: &[(Complex<f64>, Complex<f64>, Complex<f64>)], length: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::MissingTrace);
    }
    Ok(samples
        .iter()
        .map(|&(i, a, b)| mismatch_sq(i, a, b, length))
        .sum::<f64>()
        / samples.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterFit {
    pub center: f64,
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    /// Weighted normal density `count/n · N(mean, variance)` on the bin centers.
    pub overlay: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramFit {
    pub bin_edges: Vec<f64>,
    /// Normalized so that `Σ density·width = 1`.
    pub density: Vec<f64>,
    pub clusters: Vec<ClusterFit>,
    /// Sorted samples with their empirical CDF value.
    pub ecdf: Vec<(f64, f64)>,
    /// Centers whose cluster received fewer than two samples.
    pub empty_clusters: Vec<f64>,
}

impl HistogramFit {
    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean) * (x - mean) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

/// Histogram of `samples` with one Gaussian fitted per cluster; each sample
/// belongs to the cluster of the nearest entry of `centers`.
pub fn histogram_gaussian_fit(samples: &[f64], centers: &[f64], n_bins: usize) -> Result<HistogramFit> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            have: samples.len(),
        });
    }
    if n_bins == 0 || centers.is_empty() {
        return Err(crate::error::invalid(
            "histogram",
            "needs at least one bin and one center",
        ));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("histogram samples".into()));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
    let width = (hi - lo) / n_bins as f64;
    let bin_edges: Vec<f64> = (0..=n_bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0usize; n_bins];
    for &x in samples {
        let i = (((x - lo) / width) as usize).min(n_bins - 1);
        counts[i] += 1;
    }
    let n = samples.len() as f64;
    let density = counts.iter().map(|&c| c as f64 / (n * width)).collect();

    let mut groups: Vec<Vec<f64>> = vec![Vec::new(); centers.len()];
    for &x in samples {
        groups[crate::modem::nearest(centers, x)].push(x);
    }
    let bin_centers: Vec<f64> = bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    let mut clusters = Vec::new();
    let mut empty_clusters = Vec::new();
    for (c, g) in centers.iter().zip(&groups) {
        if g.len() < 2 {
            empty_clusters.push(*c);
            continue;
        }
        let (m, v) = (mean(g), sample_variance(g));
        let w = g.len() as f64 / n;
        let overlay = if v > 0.0 {
            bin_centers.iter().map(|&x| w * normal_pdf(x, m, v)).collect()
        } else {
            vec![0.0; bin_centers.len()]
        };
        clusters.push(ClusterFit {
            center: *c,
            count: g.len(),
            mean: m,
            variance: v,
            overlay,
        });
    }

    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let ecdf = sorted
        .into_iter()
        .enumerate()
        .map(|(i, x)| (x, (i + 1) as f64 / n))
        .collect();
    Ok(HistogramFit {
        bin_edges,
        density,
        clusters,
        ecdf,
        empty_clusters,
    })
}

/// Statistics of one quantity at one checkpoint and eigenvalue.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantityStats {
    pub quantity: Quantity,
    pub equalizer: Equalizer,
    pub samples: usize,
    pub variance: f64,
    pub normalized_variance: f64,
    pub ser: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationStat {
    pub x: Quantity,
    pub y: Quantity,
    pub equalizer: Equalizer,
    pub rho: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenvalueSummary {
    pub eigenvalue: usize,
    pub quantities: Vec<QuantityStats>,
    /// Both polarizations' phase errors pooled into one variance.
    pub pooled_phase_variance: BTreeMap<Equalizer, f64>,
    pub correlations: Vec<CorrelationStat>,
    pub backrotation_mismatch: Option<f64>,
    pub symbol_errors: u64,
    pub symbols: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSummary {
    pub checkpoint: usize,
    pub z: f64,
    pub eigenvalues: Vec<EigenvalueSummary>,
}

/// Constellation spacing used to normalize each quantity's variance.
pub type Spacings = BTreeMap<Quantity, f64>;

/// Pairs whose error correlation is reported.
pub const CORRELATION_PAIRS: [(Quantity, Quantity); 4] = [
    (Quantity::Phi1, Quantity::Phi2),
    (Quantity::PhiC, Quantity::PhiD),
    (Quantity::LnMag1, Quantity::LnMag2),
    (Quantity::DeltaT, Quantity::Theta),
];

/// All per-checkpoint statistics of a sorted table. Cells with too few samples
/// are left out.
pub fn summarize(table: &EnsembleTable, spacings: &Spacings, convention: SerConvention) -> Vec<CheckpointSummary> {
    let mut out = Vec::new();
    for (cp, z) in table.checkpoints() {
        let mut eigs = Vec::new();
        for k in 0..table.eigenvalue_count() {
            let rows: Vec<&EnsembleRow> = table.select(cp, k).collect();
            let mut quantities = Vec::new();
            let mut pooled = BTreeMap::new();
            let mut correlations = Vec::new();
            for eq in [Equalizer::Mbr, Equalizer::Gae] {
                let errs = |q| table.errors(q, eq, cp, k);
                for q in Quantity::ALL {
                    let e = errs(q);
                    let Ok(v) = error_variance(&e, None) else { continue };
                    let d = spacings.get(&q).copied();
                    let nv = d.map_or(v, |d| v / (d * d));
                    quantities.push(QuantityStats {
                        quantity: q,
                        equalizer: eq,
                        samples: e.len(),
                        variance: v,
                        normalized_variance: nv,
                        ser: ser_from_variance(nv, convention),
                    });
                }
                let mut both = errs(Quantity::Phi1);
                both.extend(errs(Quantity::Phi2));
                if let Ok(v) = error_variance(&both, None) {
                    pooled.insert(eq, v);
                }
                for (x, y) in CORRELATION_PAIRS {
                    let (ex, ey) = (errs(x), errs(y));
                    if ex.len() >= MIN_SAMPLES {
                        correlations.push(CorrelationStat {
                            x,
                            y,
                            equalizer: eq,
                            rho: correlation_coefficient(&ex, &ey),
                        });
                    }
                }
            }
            let traced: Vec<_> = rows
                .iter()
                .filter_map(|r| r.trace_integral.map(|i| (i, r.lambda_tx, r.lambda_rx)))
                .collect();
            let backrotation_mismatch = if traced.is_empty() {
                None
            } else {
                backrotation_mismatch(&traced, z).ok()
            };
            eigs.push(EigenvalueSummary {
                eigenvalue: k,
                quantities,
                pooled_phase_variance: pooled,
                correlations,
                backrotation_mismatch,
                symbol_errors: rows.iter().map(|r| r.symbol_errors as u64).sum(),
                symbols: rows.iter().map(|r| r.symbols as u64).sum(),
            });
        }
        out.push(CheckpointSummary {
            checkpoint: cp,
            z,
            eigenvalues: eigs,
        });
    }
    out
}

/// Looks up one variance in a summary.
pub fn lookup_variance(s: &CheckpointSummary, eigenvalue: usize, q: Quantity, eq: Equalizer) -> Option<f64> {
    s.eigenvalues
        .get(eigenvalue)?
        .quantities
        .iter()
        .find(|x| x.quantity == q && x.equalizer == eq)
        .map(|x| x.variance)
}

/// Looks up one correlation coefficient in a summary.
pub fn lookup_correlation(
    s: &CheckpointSummary,
    eigenvalue: usize,
    x: Quantity,
    y: Quantity,
    eq: Equalizer,
) -> Option<f64> {
    s.eigenvalues
        .get(eigenvalue)?
        .correlations
        .iter()
        .find(|c| c.x == x && c.y == y && c.equalizer == eq)
        .and_then(|c| c.rho)
}
