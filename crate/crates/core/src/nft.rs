//! Forward nonlinear Fourier transform for the Manakov equation.
//!
//! The 3×3 Zakharov–Shabat system `v_t = Λ(λ, t) v` with
//!
//! ```text
//!     ⎡ −jλ   q1   q2 ⎤
//! Λ = ⎢ −q1*  jλ   0  ⎥
//!     ⎣ −q2*  0    jλ ⎦
//! ```
//!
//! Reported coefficients are `b = −b_ZS`, where `b_ZS` are the Jost limits of the
//! system above. This is the sign for which [`crate::darboux`] is the exact
//! inverse (a dressed soliton with real positive `b` is a real positive `sech`).
//! It equals running the system on `−q`; `a(λ)` and its roots are unaffected.
//!
//! is integrated with the exact exponential of `Λ` frozen on each sample cell
//! `[t_n − h/2, t_n + h/2]`. `Λ²` has eigenvalue `k² = −λ² − P²` on the plane
//! spanned by `e1` and `(0, q*)` and acts as `jλ` on the remaining direction,
//! which gives the cell propagator in closed form together with its λ-derivative.
//!
//! The Jost solution from the left boundary is carried as `φ(t)·e^{jλt}` so that
//! `a(λ)` is read off directly; the two solutions decaying at `+∞` are carried
//! back to the cell boundary nearest the energy centroid, where the forward
//! solution is decomposed onto them to obtain `b1`, `b2`.
//!
//! The midpoint-frozen propagator is second-order in the sample spacing; with
//! [`NftConfig::richardson`] every quantity is also computed on the grid
//! decimated by two and the two results are extrapolated.

use num_complex::Complex;

use crate::envelope::DualPolEnvelope;
use crate::error::{Error, Result};
use crate::scalar::{j, Real};
use crate::spectrum::{DiscreteSpectrum, SpectralEntry};

type C<T> = Complex<T>;
type Vec3<T> = [C<T>; 3];
type Mat3<T> = [[C<T>; 3]; 3];

/// Solver settings for the forward transform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NftConfig<T> {
    /// Largest allowed `|q(edge)| / max|q|`; `None` skips the check.
    pub boundary_tolerance: Option<T>,
    /// Newton stops once `|a(λ)|` falls below this.
    pub residual_tolerance: T,
    /// Newton stops once the update `|Δλ|` falls below this.
    pub step_tolerance: T,
    pub max_iterations: usize,
    /// Roots closer than this are merged.
    pub dedup_distance: T,
    /// Extrapolate from the full and the 2×-decimated grid.
    pub richardson: bool,
}

impl<T: Real> Default for NftConfig<T> {
    fn default() -> Self {
        Self {
            boundary_tolerance: Some(T::lit(1e-8)),
            residual_tolerance: T::lit(1e-10),
            step_tolerance: T::lit(1e-12),
            max_iterations: 50,
            dedup_distance: T::lit(1e-6),
            richardson: true,
        }
    }
}

/// Scattering data at one spectral parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScatterResult<T> {
    pub lambda: C<T>,
    pub a: C<T>,
    /// `∂a/∂λ`.
    pub a_prime: C<T>,
    pub b1: C<T>,
    pub b2: C<T>,
}

#[inline]
fn zero<T: Real>() -> C<T> {
    C::new(T::zero(), T::zero())
}

#[inline]
fn mat_vec<T: Real>(m: &Mat3<T>, v: &Vec3<T>) -> Vec3<T> {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// Exact `exp(Λh)` for constant `q`, and its derivative in `λ` when requested.
fn cell_propagator<T: Real>(q1: C<T>, q2: C<T>, lambda: C<T>, h: T, derivative: bool) -> (Mat3<T>, Mat3<T>) {
    let jj = j::<T>();
    let one = C::new(T::one(), T::zero());
    let hc = C::new(h, T::zero());
    let e = (jj * lambda * h).exp();
    let de = jj * hc * e;
    let p2 = q1.norm_sqr() + q2.norm_sqr();
    let mut m = [[zero(); 3]; 3];
    let mut d = [[zero(); 3]; 3];

    if p2 == T::zero() {
        let em = (-jj * lambda * h).exp();
        m[0][0] = em;
        m[1][1] = e;
        m[2][2] = e;
        if derivative {
            d[0][0] = -jj * hc * em;
            d[1][1] = de;
            d[2][2] = de;
        }
        return (m, d);
    }

    let k2 = -lambda * lambda - p2;
    let x2 = k2 * h * h;
    let (c, s, r) = if x2.norm() < T::lit(1e-6) {
        let x4 = x2 * x2;
        let x6 = x4 * x2;
        let c = one + x2 / T::lit(2.0) + x4 / T::lit(24.0) + x6 / T::lit(720.0);
        let s = (one + x2 / T::lit(6.0) + x4 / T::lit(120.0) + x6 / T::lit(5040.0)) * h;
        let r = (one / T::lit(3.0) + x2 / T::lit(30.0) + x4 / T::lit(840.0)) * (h * h * h);
        (c, s, r)
    } else {
        let k = k2.sqrt();
        let x = k * h;
        let c = x.cosh();
        let s = x.sinh() / k;
        let r = (c * h - s) / k2;
        (c, s, r)
    };

    let q = [q1, q2];
    m[0][0] = c - jj * lambda * s;
    for i in 0..2 {
        m[0][i + 1] = s * q[i];
        m[i + 1][0] = -s * q[i].conj();
    }
    let coupling = c + jj * lambda * s - e;
    for i in 0..2 {
        for l in 0..2 {
            let proj = q[i].conj() * q[l] / p2;
            m[i + 1][l + 1] = coupling * proj + if i == l { e } else { zero() };
        }
    }

    if derivative {
        let dc = -lambda * hc * s;
        let ds = -lambda * r;
        d[0][0] = dc - jj * s - jj * lambda * ds;
        for i in 0..2 {
            d[0][i + 1] = ds * q[i];
            d[i + 1][0] = -ds * q[i].conj();
        }
        let dcoupling = dc + jj * s + jj * lambda * ds - de;
        for i in 0..2 {
            for l in 0..2 {
                let proj = q[i].conj() * q[l] / p2;
                d[i + 1][l + 1] = dcoupling * proj + if i == l { de } else { zero() };
            }
        }
    }
    (m, d)
}

/// Least-squares `(c1, c2)` minimizing `‖c1·u + c2·w − y‖`; `None` when `u`, `w` are dependent.
fn least_squares2<T: Real>(u: &Vec3<T>, w: &Vec3<T>, y: &Vec3<T>) -> Option<[C<T>; 2]> {
    let dot = |p: &Vec3<T>, q: &Vec3<T>| p[0].conj() * q[0] + p[1].conj() * q[1] + p[2].conj() * q[2];
    let (g11, g12, g22) = (dot(u, u), dot(u, w), dot(w, w));
    let (r1, r2) = (dot(u, y), dot(w, y));
    let det = g11 * g22 - g12 * g12.conj();
    if !(det.norm() > T::epsilon() * (g11.norm() * g22.norm())) {
        return None;
    }
    Some([(g22 * r1 - g12 * r2) / det, (g11 * r2 - g12.conj() * r1) / det])
}

fn check_finite<T: Real>(env: &DualPolEnvelope<T>) -> Result<()> {
    if env.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite("input envelope".into()))
    }
}

fn check_boundary<T: Real>(env: &DualPolEnvelope<T>, tolerance: Option<T>) -> Result<()> {
    let Some(tol) = tolerance else {
        return Ok(());
    };
    let peak = env.peak_amplitude();
    if peak == T::zero() {
        return Ok(());
    }
    let edge = env.power(0).max(env.power(env.len() - 1)).sqrt();
    let ratio = edge / peak;
    if ratio > tol {
        return Err(Error::BoundaryNotDecayed {
            ratio: ratio.as_f64(),
            tolerance: tol.as_f64(),
        });
    }
    Ok(())
}

/// Forward sweep only: `a(λ)` and `a′(λ)` on the envelope's own grid.
fn forward_a<T: Real>(env: &DualPolEnvelope<T>, lambda: C<T>) -> (C<T>, C<T>) {
    let h = env.dt();
    let shift = (j::<T>() * lambda * h).exp();
    let jh = j::<T>() * h;
    let mut v: Vec3<T> = [C::new(T::one(), T::zero()), zero(), zero()];
    let mut dv: Vec3<T> = [zero(); 3];
    let (q1, q2) = (env.q1(), env.q2());
    for n in 0..env.len() {
        let (m, d) = cell_propagator(q1[n], q2[n], lambda, h, true);
        let nv = mat_vec(&m, &v);
        let a = mat_vec(&d, &v);
        let b = mat_vec(&m, &dv);
        for i in 0..3 {
            dv[i] = (a[i] + b[i] + jh * nv[i]) * shift;
            v[i] = nv[i] * shift;
        }
    }
    (v[0], dv[0])
}

/// Full scattering data on the envelope's own grid.
fn scatter_single<T: Real>(env: &DualPolEnvelope<T>, lambda: C<T>) -> Result<ScatterResult<T>> {
    let n = env.len();
    let h = env.dt();
    let jj = j::<T>();
    let (q1, q2) = (env.q1(), env.q2());

    // matching boundary between samples m−1 and m, nearest the energy centroid
    let m = match env.centroid() {
        Ok(tc) => ((tc - env.t0()) / h + T::lit(0.5))
            .round()
            .to_usize()
            .unwrap_or(1)
            .clamp(1, n - 1),
        Err(_) => n / 2,
    };
    let tm = env.time(m) - h * T::lit(0.5);

    let shift = (jj * lambda * h).exp();
    let jh = jj * h;
    let mut v: Vec3<T> = [C::new(T::one(), T::zero()), zero(), zero()];
    let mut dv: Vec3<T> = [zero(); 3];
    let mut at_match = v;
    for idx in 0..n {
        if idx == m {
            at_match = v;
        }
        let (mm, d) = cell_propagator(q1[idx], q2[idx], lambda, h, true);
        let nv = mat_vec(&mm, &v);
        let a = mat_vec(&d, &v);
        let b = mat_vec(&mm, &dv);
        for i in 0..3 {
            dv[i] = (a[i] + b[i] + jh * nv[i]) * shift;
            v[i] = nv[i] * shift;
        }
    }
    let (a, a_prime) = (v[0], dv[0]);

    let (b1, b2) = if lambda.im > T::zero() {
        // solutions decaying at +∞, normalized χ2,3 → e2,3·e^{jλt} and carried as χ·e^{−jλt};
        // at an eigenvalue φ = b1·χ2 + b2·χ3 (least squares on the three components)
        let one = C::new(T::one(), T::zero());
        let mut x2: Vec3<T> = [zero(), one, zero()];
        let mut x3: Vec3<T> = [zero(), zero(), one];
        for idx in (m..n).rev() {
            let (mm, _) = cell_propagator(q1[idx], q2[idx], lambda, -h, false);
            let n2 = mat_vec(&mm, &x2);
            let n3 = mat_vec(&mm, &x3);
            for i in 0..3 {
                x2[i] = n2[i] * shift;
                x3[i] = n3[i] * shift;
            }
        }
        let coeffs = least_squares2(&x2, &x3, &at_match)
            .ok_or_else(|| Error::NonFinite(format!("Jost decomposition at λ = {lambda}")))?;
        let phase = (-(jj * lambda * tm) * T::lit(2.0)).exp();
        (coeffs[0] * phase, coeffs[1] * phase)
    } else {
        let te = env.time(n - 1) + h * T::lit(0.5);
        let phase = (-(jj * lambda * te) * T::lit(2.0)).exp();
        (v[1] * phase, v[2] * phase)
    };
    let out = ScatterResult {
        lambda,
        a,
        a_prime,
        b1: -b1,
        b2: -b2,
    };
    let finite = [out.a, out.a_prime, out.b1, out.b2]
        .iter()
        .all(|z| z.re.is_finite() && z.im.is_finite());
    if !finite {
        return Err(Error::NonFinite(format!("scattering data at λ = {lambda}")));
    }
    Ok(out)
}

fn extrapolate<T: Real>(fine: C<T>, coarse: C<T>) -> C<T> {
    (fine * T::lit(4.0) - coarse) / T::lit(3.0)
}

fn richardson_ready<T: Real>(env: &DualPolEnvelope<T>, cfg: &NftConfig<T>) -> bool {
    cfg.richardson && env.len() >= 32
}

/// Scattering data with the default configuration.
pub fn scatter<T: Real>(env: &DualPolEnvelope<T>, lambda: C<T>) -> Result<ScatterResult<T>> {
    scatter_with(env, lambda, &NftConfig::default())
}

/// Computes `a`, `a′`, `b1`, `b2` at `lambda`.
///
/// `b` is the coefficient of the forward Jost solution on the solutions decaying
/// at `+∞`; it is the spectral coefficient at eigenvalues and on the real axis.
pub fn scatter_with<T: Real>(env: &DualPolEnvelope<T>, lambda: C<T>, cfg: &NftConfig<T>) -> Result<ScatterResult<T>> {
    check_finite(env)?;
    check_boundary(env, cfg.boundary_tolerance)?;
    let fine = scatter_single(env, lambda)?;
    if !richardson_ready(env, cfg) {
        return Ok(fine);
    }
    let coarse = scatter_single(&env.decimate(2)?, lambda)?;
    Ok(ScatterResult {
        lambda,
        a: extrapolate(fine.a, coarse.a),
        a_prime: extrapolate(fine.a_prime, coarse.a_prime),
        b1: extrapolate(fine.b1, coarse.b1),
        b2: extrapolate(fine.b2, coarse.b2),
    })
}

fn a_and_derivative<T: Real>(
    fine: &DualPolEnvelope<T>,
    coarse: Option<&DualPolEnvelope<T>>,
    lambda: C<T>,
) -> (C<T>, C<T>) {
    let (a, da) = forward_a(fine, lambda);
    match coarse {
        Some(c) => {
            let (a2, da2) = forward_a(c, lambda);
            (extrapolate(a, a2), extrapolate(da, da2))
        }
        None => (a, da),
    }
}

/// Newton search from one guess. `Ok(None)` when the guess is unusable
/// (vanishing or non-finite `a′`).
fn newton<T: Real>(
    fine: &DualPolEnvelope<T>,
    coarse: Option<&DualPolEnvelope<T>>,
    guess: C<T>,
    cfg: &NftConfig<T>,
) -> Result<Option<C<T>>> {
    let mut lambda = guess;
    for _ in 0..cfg.max_iterations {
        let (a, da) = a_and_derivative(fine, coarse, lambda);
        if a.norm() < cfg.residual_tolerance {
            return Ok(Some(lambda));
        }
        let finite = da.re.is_finite() && da.im.is_finite() && a.re.is_finite() && a.im.is_finite();
        if !finite || da.norm() == T::zero() {
            return Ok(None);
        }
        let step = a / da;
        lambda -= step;
        if !(lambda.im > T::zero()) {
            return Err(Error::LowerHalfPlane {
                guess: guess.to_string(),
                reached: lambda.to_string(),
            });
        }
        if step.norm() < cfg.step_tolerance {
            return Ok(Some(lambda));
        }
    }
    Err(Error::NoConvergence {
        guess: guess.to_string(),
        iterations: cfg.max_iterations,
    })
}

/// Eigenvalues with the default configuration.
pub fn find_eigenvalues<T: Real>(env: &DualPolEnvelope<T>, guesses: &[C<T>]) -> Result<Vec<C<T>>> {
    find_eigenvalues_with(env, guesses, &NftConfig::default())
}

/// Roots of `a(λ)` reached by Newton iteration from each guess, deduplicated and
/// sorted by imaginary part.
pub fn find_eigenvalues_with<T: Real>(
    env: &DualPolEnvelope<T>,
    guesses: &[C<T>],
    cfg: &NftConfig<T>,
) -> Result<Vec<C<T>>> {
    check_finite(env)?;
    check_boundary(env, cfg.boundary_tolerance)?;
    if let Some(g) = guesses.iter().find(|g| !(g.im > T::zero())) {
        return Err(Error::InvalidSpectrum(format!(
            "initial guess {g} not in the upper half-plane"
        )));
    }
    if env.peak_amplitude() == T::zero() {
        return Ok(Vec::new());
    }
    let coarse = if richardson_ready(env, cfg) {
        Some(env.decimate(2)?)
    } else {
        None
    };
    let mut roots = Vec::new();
    for &g in guesses {
        if let Some(r) = newton(env, coarse.as_ref(), g, cfg)? {
            roots.push(r);
        }
    }
    roots.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal));
    let mut unique: Vec<C<T>> = Vec::with_capacity(roots.len());
    for r in roots {
        if unique.iter().all(|u| (*u - r).norm() >= cfg.dedup_distance) {
            unique.push(r);
        }
    }
    Ok(unique)
}

/// Discrete spectrum with the default configuration.
pub fn discrete_spectrum<T: Real>(env: &DualPolEnvelope<T>, nominal: &[C<T>]) -> Result<DiscreteSpectrum<T>> {
    discrete_spectrum_with(env, nominal, &NftConfig::default())
}

/// Eigenvalues found from `nominal` guesses together with `b1`, `b2` at each.
pub fn discrete_spectrum_with<T: Real>(
    env: &DualPolEnvelope<T>,
    nominal: &[C<T>],
    cfg: &NftConfig<T>,
) -> Result<DiscreteSpectrum<T>> {
    let roots = find_eigenvalues_with(env, nominal, cfg)?;
    let entries = roots
        .into_iter()
        .map(|l| scatter_with(env, l, cfg).map(|s| SpectralEntry::new(l, s.b1, s.b2)))
        .collect::<Result<Vec<_>>>()?;
    DiscreteSpectrum::with_min_separation(entries, cfg.dedup_distance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::darboux::darboux_synthesize;
    use crate::envelope::TimeGrid;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> C<f64> {
        C::new(re, im)
    }

    fn sech_env(amp1: f64, amp2: f64, width: f64, dt: f64) -> DualPolEnvelope<f64> {
        let g = TimeGrid::covering(width, dt, 0.0).unwrap();
        DualPolEnvelope::from_fn(&g, |t| (c(amp1 / t.cosh(), 0.0), c(amp2 / t.cosh(), 0.0)))
    }

    /// Oracle propagator: Taylor series of exp(Λh) summed to convergence.
    fn taylor_exp(q1: C<f64>, q2: C<f64>, lambda: C<f64>, h: f64) -> Mat3<f64> {
        let jj = c(0.0, 1.0);
        let l = [
            [-jj * lambda, q1, q2],
            [-q1.conj(), jj * lambda, c(0.0, 0.0)],
            [-q2.conj(), c(0.0, 0.0), jj * lambda],
        ];
        let mut out = [[c(0.0, 0.0); 3]; 3];
        let mut term = [[c(0.0, 0.0); 3]; 3];
        for i in 0..3 {
            out[i][i] = c(1.0, 0.0);
            term[i][i] = c(1.0, 0.0);
        }
        for k in 1..60 {
            let mut next = [[c(0.0, 0.0); 3]; 3];
            for r in 0..3 {
                for col in 0..3 {
                    next[r][col] = (0..3).map(|i| term[r][i] * l[i][col]).sum::<C<f64>>() * (h / k as f64);
                }
            }
            term = next;
            for r in 0..3 {
                for col in 0..3 {
                    out[r][col] += term[r][col];
                }
            }
        }
        out
    }

    #[test]
    fn closed_form_propagator_matches_taylor_series() {
        let cases = [
            (c(0.3, -0.8), c(1.2, 0.1), c(0.2, 0.7), 0.05),
            (c(0.3, -0.8), c(1.2, 0.1), c(0.2, 0.7), -0.4),
            (c(1e-5, 0.0), c(0.0, 2e-5), c(-0.1, 0.3), 1e-3),
            (c(0.0, 0.0), c(0.0, 0.0), c(0.5, 0.5), 0.2),
            (c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.5), 0.1),
        ];
        for (q1, q2, lambda, h) in cases {
            let (m, d) = cell_propagator(q1, q2, lambda, h, true);
            let oracle = taylor_exp(q1, q2, lambda, h);
            let eps = 1e-6;
            let plus = taylor_exp(q1, q2, lambda + eps, h);
            let minus = taylor_exp(q1, q2, lambda - eps, h);
            for r in 0..3 {
                for col in 0..3 {
                    assert!((m[r][col] - oracle[r][col]).norm() < 1e-13, "{r}{col}");
                    let fd = (plus[r][col] - minus[r][col]) / (2.0 * eps);
                    assert!((d[r][col] - fd).norm() < 1e-8, "d{r}{col}");
                }
            }
        }
    }

    #[test]
    fn zero_signal_is_transparent() {
        let g = TimeGrid::centered(64, 0.1, 0.0).unwrap();
        let env = DualPolEnvelope::<f64>::zeros(&g);
        for lambda in [c(0.3, 0.0), c(0.0, 0.5), c(-1.0, 0.2)] {
            let s = scatter(&env, lambda).unwrap();
            assert!((s.a - 1.0).norm() < 1e-14);
            assert!(s.b1.norm() < 1e-14 && s.b2.norm() < 1e-14);
        }
        assert!(find_eigenvalues(&env, &[c(0.0, 0.5)]).unwrap().is_empty());
    }

    #[test]
    fn fundamental_soliton_eigenvalue() {
        let env = sech_env(FRAC_1_SQRT_2, FRAC_1_SQRT_2, 60.0, 0.02);
        assert!(scatter(&env, c(0.0, 0.5)).unwrap().a.norm() <= 1e-6);
        let roots = find_eigenvalues(&env, &[c(0.05, 0.4)]).unwrap();
        assert_eq!(roots.len(), 1);
        assert!((roots[0] - c(0.0, 0.5)).norm() <= 1e-8, "{}", roots[0]);
    }

    #[test]
    fn second_order_single_polarization_soliton() {
        let env = sech_env(2.0, 0.0, 60.0, 0.01);
        for l in [c(0.0, 0.5), c(0.0, 1.5)] {
            assert!(scatter(&env, l).unwrap().a.norm() <= 1e-6);
        }
        let roots = find_eigenvalues(&env, &[c(0.0, 1.4), c(0.0, 0.6), c(0.0, 0.55)]).unwrap();
        assert_eq!(roots.len(), 2);
        assert!((roots[0] - c(0.0, 0.5)).norm() < 1e-8);
        assert!((roots[1] - c(0.0, 1.5)).norm() < 1e-8);
    }

    #[test]
    fn imaginary_axis_scan_brackets_the_root() {
        // oracle: sign change of Re a(jσ) along the imaginary axis (a is real there for a real sech)
        let env = sech_env(1.0, 0.0, 60.0, 0.02);
        let cfg = NftConfig {
            richardson: false,
            ..NftConfig::default()
        };
        let val = |s: f64| scatter_with(&env, c(0.0, s), &cfg).unwrap().a.re;
        let (mut lo, mut hi) = (0.3, 0.7);
        assert!(val(lo) * val(hi) < 0.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if val(lo) * val(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let roots = find_eigenvalues(&env, &[c(0.0, 0.45)]).unwrap();
        assert!((roots[0].im - 0.5 * (lo + hi)).abs() < 1e-5);
        assert!((roots[0] - c(0.0, 0.5)).norm() < 1e-8);
    }

    #[test]
    fn scattering_is_unitary_on_the_real_axis() {
        let g = TimeGrid::covering(60.0, 0.01, 0.0).unwrap();
        let env = DualPolEnvelope::from_fn(&g, |t: f64| {
            let s = 1.0 / (1.3 * t).cosh();
            (c(0.4 * s, 0.2 * s), c(0.5 * s * (0.3 * t).cos(), 0.0))
        });
        for w in [-1.5, -0.3, 0.0, 0.7, 2.0] {
            let s = scatter(&env, c(w, 0.0)).unwrap();
            let u = s.a.norm_sqr() + s.b1.norm_sqr() + s.b2.norm_sqr();
            assert!((u - 1.0).abs() < 1e-8, "{w}: {u}");
        }
    }

    #[test]
    fn round_trip_first_order() {
        let spec = DiscreteSpectrum::new(vec![SpectralEntry::new(
            c(0.0, 0.5),
            c(FRAC_1_SQRT_2, 0.0),
            c(FRAC_1_SQRT_2, 0.0),
        )])
        .unwrap();
        let g = TimeGrid::covering(80.0, 0.02, 0.0).unwrap();
        let env = darboux_synthesize(&spec, &g).unwrap().envelope;
        let got = discrete_spectrum(&env, &[c(0.0, 0.5)]).unwrap();
        let e = got.entries()[0];
        assert!((e.lambda - c(0.0, 0.5)).norm() < 1e-8);
        assert!((e.b1 - FRAC_1_SQRT_2).norm() < 1e-6, "{}", e.b1);
        assert!((e.b2 - FRAC_1_SQRT_2).norm() < 1e-6, "{}", e.b2);
    }

    #[test]
    fn shift_scales_coefficient_magnitude() {
        let sigma = 0.5;
        let delay = 1.7;
        let g = TimeGrid::covering(80.0, 0.02, 0.0).unwrap();
        let make = |d: f64| {
            DualPolEnvelope::from_fn(&g, |t| {
                let v = FRAC_1_SQRT_2 / (t - d).cosh();
                (c(v, 0.0), c(v, 0.0))
            })
        };
        let b0 = scatter(&make(0.0), c(0.0, sigma)).unwrap();
        let b1 = scatter(&make(delay), c(0.0, sigma)).unwrap();
        let ratio = b1.b1.norm() / b0.b1.norm();
        assert!((ratio - (2.0 * sigma * delay).exp()).abs() < 1e-6 * ratio);
    }

    #[test]
    fn round_trip_second_order_extreme_magnitudes() {
        let spec = DiscreteSpectrum::new(vec![
            SpectralEntry::new(c(0.0, 0.3), c(0.14, 0.0), c(0.0, 0.14)),
            SpectralEntry::new(c(0.0, 0.6), Complex::from_polar(5.0, 0.785), c(-5.0, 0.0)),
        ])
        .unwrap();
        let g = TimeGrid::covering(120.0, 1.0 / (2.0 * 0.6 * 32.0), 0.0).unwrap();
        let env = darboux_synthesize(&spec, &g).unwrap().envelope;
        let got = discrete_spectrum(&env, &[c(0.0, 0.3), c(0.0, 0.6)]).unwrap();
        assert_eq!(got.len(), 2);
        for (want, have) in spec.entries().iter().zip(got.entries()) {
            assert!((want.lambda - have.lambda).norm() < 1e-7, "{}", have.lambda);
            assert!(
                (want.b1 - have.b1).norm() < 1e-4 * want.b1.norm(),
                "{} vs {}",
                have.b1,
                want.b1
            );
            assert!((want.b2 - have.b2).norm() < 1e-4 * want.b2.norm());
        }
    }

    #[test]
    fn boundary_and_guess_validation() {
        let env = sech_env(1.0, 0.0, 10.0, 0.05);
        assert!(matches!(
            scatter(&env, c(0.0, 0.5)),
            Err(Error::BoundaryNotDecayed { .. })
        ));
        let relaxed = NftConfig {
            boundary_tolerance: None,
            ..NftConfig::default()
        };
        assert!(scatter_with(&env, c(0.0, 0.5), &relaxed).is_ok());
        let ok = sech_env(1.0, 0.0, 60.0, 0.05);
        assert!(find_eigenvalues(&ok, &[c(0.0, -0.5)]).is_err());
    }

    #[test]
    fn single_precision_finds_the_eigenvalue() {
        let env = sech_env(FRAC_1_SQRT_2, FRAC_1_SQRT_2, 60.0, 0.02).cast::<f32>();
        let cfg = NftConfig {
            residual_tolerance: 1e-5f32,
            step_tolerance: 1e-6,
            ..NftConfig::default()
        };
        let roots = find_eigenvalues_with(&env, &[C::new(0.0f32, 0.45)], &cfg).unwrap();
        assert!((roots[0] - C::new(0.0f32, 0.5)).norm() < 1e-3);
    }
}
