use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default minimum distance between two eigenvalues of one spectrum.
pub const DEFAULT_MIN_SEPARATION: f64 = 1e-6;

/// One eigenvalue with its pair of spectral coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralEntry<T> {
    pub lambda: Complex<T>,
    pub b1: Complex<T>,
    pub b2: Complex<T>,
}

impl<T: Real> SpectralEntry<T> {
    pub fn new(lambda: Complex<T>, b1: Complex<T>, b2: Complex<T>) -> Self {
        Self { lambda, b1, b2 }
    }

    #[inline]
    pub fn sigma(&self) -> T {
        self.lambda.im
    }

    #[inline]
    pub fn omega(&self) -> T {
        self.lambda.re
    }
}

/// Discrete nonlinear spectrum `{λk, b1(λk), b2(λk)}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSpectrum<T> {
    entries: Vec<SpectralEntry<T>>,
}

impl<T: Real> DiscreteSpectrum<T> {
    pub fn new(entries: Vec<SpectralEntry<T>>) -> Result<Self> {
        Self::with_min_separation(entries, T::lit(DEFAULT_MIN_SEPARATION))
    }

    pub fn with_min_separation(entries: Vec<SpectralEntry<T>>, min_sep: T) -> Result<Self> {
        for (k, e) in entries.iter().enumerate() {
            if !(e.lambda.im > T::zero()) {
                return Err(Error::InvalidSpectrum(format!(
                    "eigenvalue {k} = {} is not in the open upper half-plane",
                    e.lambda
                )));
            }
            let finite = [e.lambda, e.b1, e.b2]
                .iter()
                .all(|z| z.re.is_finite() && z.im.is_finite());
            if !finite {
                return Err(Error::InvalidSpectrum(format!("entry {k} is not finite")));
            }
            for (m, o) in entries.iter().enumerate().skip(k + 1) {
                if (e.lambda - o.lambda).norm() < min_sep {
                    return Err(Error::InvalidSpectrum(format!(
                        "eigenvalues {k} and {m} closer than {min_sep}"
                    )));
                }
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[SpectralEntry<T>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn eigenvalues(&self) -> Vec<Complex<T>> {
        self.entries.iter().map(|e| e.lambda).collect()
    }

    pub fn max_sigma(&self) -> T {
        self.entries.iter().map(|e| e.sigma()).fold(T::zero(), T::max)
    }

    pub fn min_sigma(&self) -> T {
        self.entries.iter().map(|e| e.sigma()).fold(T::infinity(), T::min)
    }
}

/// Pairs each reference eigenvalue with its nearest candidate.
///
/// Returns, for every reference, the index of the matched candidate. Fails
/// when a reference has no candidate or two references claim the same one.
pub fn pair_nearest<T: Real>(reference: &[Complex<T>], candidates: &[Complex<T>]) -> Result<Vec<usize>> {
    let mut picks = Vec::with_capacity(reference.len());
    for (k, r) in reference.iter().enumerate() {
        let best = candidates
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (*a.1 - *r)
                    .norm()
                    .partial_cmp(&(*b.1 - *r).norm())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(|(i, _)| i)
            .ok_or_else(|| Error::Pairing(format!("no candidate eigenvalue for reference {k} ({r})")))?;
        if let Some(prev) = picks.iter().position(|&p| p == best) {
            return Err(Error::Pairing(format!(
                "references {prev} and {k} are both nearest to candidate {}",
                candidates[best]
            )));
        }
        picks.push(best);
    }
    Ok(picks)
}
