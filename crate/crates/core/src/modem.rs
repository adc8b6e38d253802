//! Symbol mapping onto spectral coefficients, equalization and detection.
//!
//! Differential precoding writes the coefficients of eigenvalue `k` as
//!
//! ```text
//! b1 = e^{2σΔt}·|cos θ|·e^{jφc}
//! b2 = e^{2σΔt}·|sin θ|·e^{j(φc+φd)}
//! ```
//!
//! so the ratio `b2/b1 = tan θ·e^{jφd}` is untouched by any rotation or scaling
//! common to both polarizations.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::{arg_positive, cis, wrap_phase, Real};
use crate::spectrum::{pair_nearest, DiscreteSpectrum, SpectralEntry};

type C<T> = Complex<T>;

/// Constellation points of every modulated quantity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstellationSpec {
    /// PSK phases (rad) shared by `φ1`, `φ2`, `φc` and `φd`.
    pub phases: Vec<f64>,
    /// `ln|b_i|` levels for independent modulation; one list per eigenvalue, or a
    /// single list used for all of them.
    pub magnitudes_log: Vec<Vec<f64>>,
    pub delta_t_points: Vec<f64>,
    pub theta_points: Vec<f64>,
    /// Extra rotation of the phase set for eigenvalue `k`: `k·offset`.
    pub rotation_offset_per_eigenvalue: f64,
}

fn strictly_increasing(name: &'static str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(invalid(name, "needs at least one point"));
    }
    if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid(name, "points must be finite and strictly increasing"));
    }
    Ok(())
}

impl ConstellationSpec {
    /// `m`-PSK starting at phase 0.
    pub fn psk(m: usize) -> Vec<f64> {
        (0..m).map(|i| std::f64::consts::TAU * i as f64 / m as f64).collect()
    }

    pub fn validate(&self) -> Result<()> {
        strictly_increasing("phases", &self.phases)?;
        if self.phases.last().unwrap() - self.phases[0] >= std::f64::consts::TAU {
            return Err(invalid("phases", "must span less than one turn"));
        }
        if self.magnitudes_log.is_empty() {
            return Err(invalid("magnitudes_log", "needs at least one list"));
        }
        for m in &self.magnitudes_log {
            strictly_increasing("magnitudes_log", m)?;
        }
        strictly_increasing("delta_t_points", &self.delta_t_points)?;
        strictly_increasing("theta_points", &self.theta_points)?;
        let half_pi = std::f64::consts::FRAC_PI_2;
        if self.theta_points.iter().any(|&t| !(t > 0.0 && t < half_pi)) {
            return Err(invalid("theta_points", "must lie strictly inside (0, π/2)"));
        }
        Ok(())
    }

    /// Phase set of eigenvalue `k`.
    pub fn phases_for(&self, k: usize) -> Vec<f64> {
        let off = self.rotation_offset_per_eigenvalue * k as f64;
        self.phases.iter().map(|p| p + off).collect()
    }

    /// `ln|b|` levels of eigenvalue `k`.
    pub fn magnitudes_for(&self, k: usize) -> &[f64] {
        if self.magnitudes_log.len() == 1 {
            &self.magnitudes_log[0]
        } else {
            &self.magnitudes_log[k.min(self.magnitudes_log.len() - 1)]
        }
    }
}

/// Point indices of one eigenvalue under independent modulation (`[pol 1, pol 2]`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndependentSymbol {
    pub phase: [usize; 2],
    pub magnitude: [usize; 2],
}

/// Point indices of one eigenvalue under differential precoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifferentialSymbol {
    pub delta_t: usize,
    pub theta: usize,
    pub phi_c: usize,
    pub phi_d: usize,
}

/// Precoded quantities of one eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrecodedSymbols<T> {
    pub delta_t: T,
    /// In `(0, π/2)`.
    pub theta: T,
    /// In `[0, 2π)`.
    pub phi_c: T,
    /// In `[0, 2π)`.
    pub phi_d: T,
}

fn point(name: &'static str, list: &[f64], idx: usize) -> Result<f64> {
    list.get(idx)
        .copied()
        .ok_or_else(|| Error::IndexOutOfRange(format!("{name} index {idx} ≥ {}", list.len())))
}

impl DifferentialSymbol {
    /// Constellation values for eigenvalue `k`. The eigenvalue rotation offset
    /// applies to the common phase; `φd` uses the base phase set.
    pub fn to_precoded<T: Real>(&self, spec: &ConstellationSpec, k: usize) -> Result<PrecodedSymbols<T>> {
        Ok(PrecodedSymbols {
            delta_t: T::lit(point("delta_t", &spec.delta_t_points, self.delta_t)?),
            theta: T::lit(point("theta", &spec.theta_points, self.theta)?),
            phi_c: T::lit(point("phi_c", &spec.phases_for(k), self.phi_c)?),
            phi_d: T::lit(point("phi_d", &spec.phases, self.phi_d)?),
        })
    }
}

fn spectrum_from<T: Real>(eigenvalues: &[C<T>], coeffs: Vec<(C<T>, C<T>)>) -> Result<DiscreteSpectrum<T>> {
    DiscreteSpectrum::new(
        eigenvalues
            .iter()
            .zip(coeffs)
            .map(|(&l, (b1, b2))| SpectralEntry::new(l, b1, b2))
            .collect(),
    )
}

fn check_count(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(invalid("symbols", format!("{got} symbols for {expected} eigenvalues")));
    }
    Ok(())
}

/// `b_i(λk) = e^{ln|b|}·e^{jφ}` from the selected points of each polarization.
pub fn encode_independent<T: Real>(
    symbols: &[IndependentSymbol],
    eigenvalues: &[C<T>],
    spec: &ConstellationSpec,
) -> Result<DiscreteSpectrum<T>> {
    check_count(eigenvalues.len(), symbols.len())?;
    let coeffs = symbols
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let phases = spec.phases_for(k);
            let mags = spec.magnitudes_for(k);
            let b = |i: usize| -> Result<C<T>> {
                let m = point("magnitude", mags, s.magnitude[i])?.exp();
                let p = point("phase", &phases, s.phase[i])?;
                Ok(C::from_polar(T::lit(m), T::lit(p)))
            };
            Ok((b(0)?, b(1)?))
        })
        .collect::<Result<Vec<_>>>()?;
    spectrum_from(eigenvalues, coeffs)
}

/// Coefficients of one eigenvalue from its precoded quantities.
pub fn precode_entry<T: Real>(s: &PrecodedSymbols<T>, sigma: T) -> (C<T>, C<T>) {
    let m = (T::lit(2.0) * sigma * s.delta_t).exp();
    let b1 = cis(s.phi_c) * (m * s.theta.cos().abs());
    let b2 = cis(s.phi_c + s.phi_d) * (m * s.theta.sin().abs());
    (b1, b2)
}

/// Spectrum carrying the precoded symbols on the given eigenvalues.
pub fn precode_differential<T: Real>(
    symbols: &[PrecodedSymbols<T>],
    eigenvalues: &[C<T>],
) -> Result<DiscreteSpectrum<T>> {
    check_count(eigenvalues.len(), symbols.len())?;
    let half_pi = T::FRAC_PI_2();
    for s in symbols {
        if !(s.theta > T::zero() && s.theta < half_pi) {
            return Err(invalid("theta", format!("{} not inside (0, π/2)", s.theta)));
        }
    }
    let coeffs = symbols
        .iter()
        .zip(eigenvalues)
        .map(|(s, l)| precode_entry(s, l.im))
        .collect();
    spectrum_from(eigenvalues, coeffs)
}

/// Received entries reordered to match `nominal` by nearest eigenvalue.
pub fn pair_to_nominal<T: Real>(rx: &DiscreteSpectrum<T>, nominal: &[C<T>]) -> Result<Vec<SpectralEntry<T>>> {
    let picks = pair_nearest(nominal, &rx.eigenvalues())?;
    Ok(picks.into_iter().map(|i| rx.entries()[i]).collect())
}

fn rotate<T: Real>(e: &SpectralEntry<T>, phase_arg: C<T>) -> SpectralEntry<T> {
    // exp(4j·x) for complex x
    let f = (C::new(T::zero(), T::lit(4.0)) * phase_arg).exp();
    SpectralEntry::new(e.lambda, e.b1 * f, e.b2 * f)
}

/// Mean backrotation `b̂ = b(L)·exp(4j·(λ(0)² + λ(L)²)/2·L)` on entries paired to `nominal`.
pub fn mbr_equalize<T: Real>(
    paired: &[SpectralEntry<T>],
    nominal: &[C<T>],
    length: T,
) -> Result<Vec<SpectralEntry<T>>> {
    check_count(nominal.len(), paired.len())?;
    let half = T::lit(0.5);
    Ok(paired
        .iter()
        .zip(nominal)
        .map(|(e, l0)| rotate(e, (*l0 * *l0 + e.lambda * e.lambda) * half * length))
        .collect())
}

/// Genie-aided backrotation `b̂ = b(L)·exp(4j·∫λ²dz)` with the recorded integrals.
pub fn gae_equalize<T: Real>(paired: &[SpectralEntry<T>], integrals: &[C<T>]) -> Result<Vec<SpectralEntry<T>>> {
    if integrals.len() != paired.len() {
        return Err(Error::MissingTrace);
    }
    Ok(paired.iter().zip(integrals).map(|(e, i)| rotate(e, *i)).collect())
}

/// `(θ̂, φ̂d)` from `b2/b1`: `θ̂ = atan|b2/b1|`, `φ̂d = arg(b2/b1)` in `[0, 2π)`.
pub fn estimate_differential<T: Real>(b1: C<T>, b2: C<T>) -> Result<(T, T)> {
    if !(b1.norm() > T::zero()) {
        return Err(Error::DegeneratePolarization(0));
    }
    let ratio = b2 / b1;
    if !(ratio.re.is_finite() && ratio.im.is_finite()) {
        return Err(Error::NonFinite("differential ratio".into()));
    }
    Ok((ratio.norm().atan(), arg_positive(ratio)))
}

/// `(Δt̂, φ̂c)`: `Δt̂ = ln(|b1|² + |b2|²)/(4σ)`, `φ̂c = arg b1` in `[0, 2π)`.
pub fn estimate_common<T: Real>(b1: C<T>, b2: C<T>, sigma: T) -> Result<(T, T)> {
    let energy = b1.norm_sqr() + b2.norm_sqr();
    if !(energy > T::zero()) || !energy.is_finite() {
        return Err(Error::ZeroEnergy);
    }
    Ok((energy.ln() / (T::lit(4.0) * sigma), arg_positive(b1)))
}

/// Precoded quantities recovered from a pair of coefficients.
pub fn decompose<T: Real>(b1: C<T>, b2: C<T>, sigma: T) -> Result<PrecodedSymbols<T>> {
    let (theta, phi_d) = estimate_differential(b1, b2)?;
    let (delta_t, phi_c) = estimate_common(b1, b2, sigma)?;
    Ok(PrecodedSymbols {
        delta_t,
        theta,
        phi_c,
        phi_d,
    })
}

/// Index of the nearest point; ties go to the lower index.
pub fn nearest(points: &[f64], x: f64) -> usize {
    let mut best = 0;
    let mut dist = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = (x - p).abs();
        if d < dist {
            dist = d;
            best = i;
        }
    }
    best
}

/// Nearest phase point with distance taken modulo 2π; ties go to the lower index.
pub fn nearest_phase(points: &[f64], phi: f64) -> usize {
    let mut best = 0;
    let mut dist = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = wrap_phase(phi - p).abs();
        if d < dist {
            dist = d;
            best = i;
        }
    }
    best
}

/// Independent-mode decision on `(ln|b̂i|, φ̂i)` of eigenvalue `k`.
pub fn decide_independent(ln_mag: [f64; 2], phase: [f64; 2], spec: &ConstellationSpec, k: usize) -> IndependentSymbol {
    let phases = spec.phases_for(k);
    let mags = spec.magnitudes_for(k);
    IndependentSymbol {
        phase: [nearest_phase(&phases, phase[0]), nearest_phase(&phases, phase[1])],
        magnitude: [nearest(mags, ln_mag[0]), nearest(mags, ln_mag[1])],
    }
}

/// Differential-mode decision, each quantity on its own.
pub fn decide_differential(est: &PrecodedSymbols<f64>, spec: &ConstellationSpec, k: usize) -> DifferentialSymbol {
    DifferentialSymbol {
        delta_t: nearest(&spec.delta_t_points, est.delta_t),
        theta: nearest(&spec.theta_points, est.theta),
        phi_c: nearest_phase(&spec.phases_for(k), est.phi_c),
        phi_d: nearest_phase(&spec.phases, est.phi_d),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{E, FRAC_1_SQRT_2, FRAC_PI_4, FRAC_PI_8, PI};

    fn c(re: f64, im: f64) -> C<f64> {
        C::new(re, im)
    }

    fn first_order_spec() -> ConstellationSpec {
        let l = -std::f64::consts::LN_2 / 2.0;
        ConstellationSpec {
            phases: ConstellationSpec::psk(8),
            magnitudes_log: vec![vec![l - 1.0, l, l + 1.0]],
            delta_t_points: vec![-1.0, 0.0, 1.0],
            theta_points: vec![FRAC_PI_8, FRAC_PI_4, 3.0 * FRAC_PI_8],
            rotation_offset_per_eigenvalue: 0.0,
        }
    }

    #[test]
    fn independent_encoding() {
        let spec = first_order_spec();
        spec.validate().unwrap();
        let s = IndependentSymbol {
            phase: [0, 0],
            magnitude: [1, 1],
        };
        let sp = encode_independent(&[s], &[c(0.0, 0.5)], &spec).unwrap();
        assert!((sp.entries()[0].b1 - FRAC_1_SQRT_2).norm() < 1e-15);
        assert!((sp.entries()[0].b2 - FRAC_1_SQRT_2).norm() < 1e-15);

        // |b| = e/√2 on both polarizations is a shift of +1 at σ = 0.5
        let s = IndependentSymbol {
            phase: [0, 0],
            magnitude: [2, 2],
        };
        let e = encode_independent(&[s], &[c(0.0, 0.5)], &spec).unwrap().entries()[0];
        assert!((estimate_common(e.b1, e.b2, 0.5).unwrap().0 - 1.0).abs() < 1e-12);

        let bad = IndependentSymbol {
            phase: [8, 0],
            magnitude: [0, 0],
        };
        assert!(matches!(
            encode_independent(&[bad], &[c(0.0, 0.5)], &spec),
            Err(Error::IndexOutOfRange(_))
        ));
    }

    #[test]
    fn qpsk_offset_on_second_eigenvalue() {
        let spec = ConstellationSpec {
            phases: ConstellationSpec::psk(4),
            magnitudes_log: vec![vec![0.14f64.ln()], vec![5f64.ln()]],
            delta_t_points: vec![0.0],
            theta_points: vec![FRAC_PI_4],
            rotation_offset_per_eigenvalue: FRAC_PI_4,
        };
        spec.validate().unwrap();
        let s = IndependentSymbol {
            phase: [0, 0],
            magnitude: [0, 0],
        };
        let sp = encode_independent(&[s, s], &[c(0.0, 0.3), c(0.0, 0.6)], &spec).unwrap();
        assert!((sp.entries()[1].b1.arg() - FRAC_PI_4).abs() < 1e-15);
        assert!((sp.entries()[1].b1.norm() - 5.0).abs() < 1e-14);
        assert!((sp.entries()[0].b2.norm() - 0.14).abs() < 1e-15);
    }

    #[test]
    fn precoding_examples() {
        let l = [c(0.0, 0.5)];
        let p = |dt, th, pc, pd| PrecodedSymbols {
            delta_t: dt,
            theta: th,
            phi_c: pc,
            phi_d: pd,
        };
        let e = precode_differential(&[p(0.0, FRAC_PI_4, 0.0, 0.0)], &l)
            .unwrap()
            .entries()[0];
        assert!((e.b1 - FRAC_1_SQRT_2).norm() < 1e-15 && (e.b2 - FRAC_1_SQRT_2).norm() < 1e-15);
        let e = precode_differential(&[p(0.0, FRAC_PI_4, 0.0, PI)], &l)
            .unwrap()
            .entries()[0];
        assert!((e.b2 + FRAC_1_SQRT_2).norm() < 1e-15);
        let e = precode_differential(&[p(1.0, FRAC_PI_8, FRAC_PI_4, 0.0)], &l)
            .unwrap()
            .entries()[0];
        let rot = C::from_polar(1.0, FRAC_PI_4);
        assert!((e.b1 - rot * E * FRAC_PI_8.cos()).norm() < 1e-14);
        assert!((e.b2 - rot * E * FRAC_PI_8.sin()).norm() < 1e-14);
        let (dt, pc) = estimate_common(e.b1, e.b2, 0.5).unwrap();
        assert!((dt - 1.0).abs() < 1e-14 && (pc - FRAC_PI_4).abs() < 1e-14);
        assert!(precode_differential(&[p(0.0, 0.0, 0.0, 0.0)], &l).is_err());
    }

    #[test]
    fn differential_estimates() {
        let (t, d) = estimate_differential(c(0.3, 0.1), c(0.3, 0.1)).unwrap();
        assert!((t - FRAC_PI_4).abs() < 1e-15 && d.abs() < 1e-15);
        let (t, d) = estimate_differential(c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)).unwrap();
        assert!((t - FRAC_PI_4).abs() < 1e-15 && (d - PI).abs() < 1e-15);
        assert!(estimate_differential(c(0.0, 0.0), c(1.0, 0.0)).is_err());
        assert!(estimate_common(c(0.0, 0.0), c(0.0, 0.0), 0.5).is_err());
    }

    #[test]
    fn backrotation_undoes_ideal_evolution() {
        let l0 = c(0.0, 0.5);
        let len = 80.9;
        let b0 = (c(0.3, -0.2), c(-0.1, 0.6));
        let f = (c(0.0, -4.0) * l0 * l0 * len).exp();
        let rx = [SpectralEntry::new(l0, b0.0 * f, b0.1 * f)];
        let mbr = mbr_equalize(&rx, &[l0], len).unwrap();
        assert!((mbr[0].b1 - b0.0).norm() < 1e-12 && (mbr[0].b2 - b0.1).norm() < 1e-12);
        let gae = gae_equalize(&rx, &[l0 * l0 * len]).unwrap();
        assert!((gae[0].b1 - mbr[0].b1).norm() < 1e-12);
        assert!(gae_equalize(&rx, &[]).is_err());
    }

    #[test]
    fn backrotation_phase_matches_printed_formula() {
        let (l0, ll, len) = (c(0.0, 0.5), c(0.0, 0.501), 80.9);
        let rx = [SpectralEntry::new(ll, c(1.0, 0.0), c(1.0, 0.0))];
        let out = mbr_equalize(&rx, &[l0], len).unwrap();
        // 4·((−0.25) + (−0.251001))/2·80.9
        let phase: f64 = 4.0 * (-0.25 - 0.251001) / 2.0 * 80.9;
        assert!((phase + 81.06).abs() < 0.01);
        assert!((out[0].b1 - C::from_polar(1.0, phase)).norm() < 1e-10);
    }

    #[test]
    fn pairing_reorders_received_entries() {
        let rx = DiscreteSpectrum::new(vec![
            SpectralEntry::new(c(0.0, 0.61), c(1.0, 0.0), c(1.0, 0.0)),
            SpectralEntry::new(c(0.0, 0.29), c(2.0, 0.0), c(2.0, 0.0)),
        ])
        .unwrap();
        let p = pair_to_nominal(&rx, &[c(0.0, 0.3), c(0.0, 0.6)]).unwrap();
        assert_eq!(p[0].b1, c(2.0, 0.0));
        assert!(pair_to_nominal(&rx, &[c(0.0, 0.3), c(0.0, 0.31)]).is_err());
    }

    #[test]
    fn decisions() {
        let spec = first_order_spec();
        let mags = spec.magnitudes_for(0);
        assert!((mags[0] + 1.347).abs() < 1e-3 && (mags[2] - 0.653).abs() < 1e-3);
        let mid = 0.5 * (mags[0] + mags[1]);
        assert_eq!(nearest(mags, mid - 1e-9), 0);
        assert_eq!(nearest(mags, mid), 0);
        assert_eq!(nearest(mags, mid + 1e-9), 1);
        assert_eq!(nearest_phase(&spec.phases, FRAC_PI_8 + 1e-9), 1);
        assert_eq!(nearest_phase(&spec.phases, FRAC_PI_8 - 1e-9), 0);
        assert_eq!(nearest_phase(&spec.phases, 2.0 * PI - 0.1), 0);
        assert_eq!(nearest_phase(&spec.phases, -FRAC_PI_4), 7);
    }

    fn precoded() -> impl Strategy<Value = PrecodedSymbols<f64>> {
        (
            -2.0f64..2.0,
            0.01f64..1.56,
            0.0f64..std::f64::consts::TAU,
            0.0f64..std::f64::consts::TAU,
        )
            .prop_map(|(delta_t, theta, phi_c, phi_d)| PrecodedSymbols {
                delta_t,
                theta,
                phi_c,
                phi_d,
            })
    }

    proptest! {
        #[test]
        fn precode_then_estimate_is_identity(s in precoded(), sigma in 0.2f64..0.8) {
            let (b1, b2) = precode_entry(&s, sigma);
            let r = decompose(b1, b2, sigma).unwrap();
            prop_assert!((r.theta - s.theta).abs() <= 1e-12);
            prop_assert!(wrap_phase(r.phi_d - s.phi_d).abs() <= 1e-12);
            prop_assert!(wrap_phase(r.phi_c - s.phi_c).abs() <= 1e-12);
            prop_assert!((r.delta_t - s.delta_t).abs() <= 1e-12);
        }

        #[test]
        fn differential_part_ignores_common_scaling(
            s in precoded(), mag in 0.01f64..100.0, phase in -10.0f64..10.0
        ) {
            let (b1, b2) = precode_entry(&s, 0.5);
            let f = C::from_polar(mag, phase);
            let a = estimate_differential(b1, b2).unwrap();
            let b = estimate_differential(b1 * f, b2 * f).unwrap();
            prop_assert!((a.0 - b.0).abs() <= 1e-12);
            prop_assert!(wrap_phase(a.1 - b.1).abs() <= 1e-12);
        }

        #[test]
        fn decisions_are_idempotent(dt in -3.0f64..3.0, th in 0.0f64..1.57, pc in -7.0f64..7.0, pd in -7.0f64..7.0) {
            let spec = first_order_spec();
            let est = PrecodedSymbols { delta_t: dt, theta: th, phi_c: pc, phi_d: pd };
            let d = decide_differential(&est, &spec, 0);
            let back: PrecodedSymbols<f64> = d.to_precoded(&spec, 0).unwrap();
            prop_assert_eq!(decide_differential(&back, &spec, 0), d);
        }
    }
}
