//! Sampled dual-polarization envelopes, time grids and basic signal measurements.

use num_complex::Complex;

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Uniform time grid, `t_n = t0 + n·dt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid<T> {
    pub n_samples: usize,
    pub dt: T,
    pub t0: T,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(n_samples: usize, dt: T, t0: T) -> Result<Self> {
        if n_samples < 16 {
            return Err(invalid("n_samples", format!("{n_samples} < 16")));
        }
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(invalid("dt", format!("{dt} must be positive")));
        }
        if !t0.is_finite() {
            return Err(invalid("t0", "must be finite"));
        }
        Ok(Self { n_samples, dt, t0 })
    }

    /// Grid of `n_samples` points symmetric about `center`.
    pub fn centered(n_samples: usize, dt: T, center: T) -> Result<Self> {
        let half = T::lit((n_samples as f64 - 1.0) / 2.0);
        Self::new(n_samples, dt, center - half * dt)
    }

    /// Smallest symmetric grid about `center` covering `width` with step `dt` (even sample count).
    pub fn covering(width: T, dt: T, center: T) -> Result<Self> {
        let mut n = (width / dt).ceil().to_usize().unwrap_or(0) + 1;
        n += n % 2;
        Self::centered(n.max(16), dt, center)
    }

    #[inline]
    pub fn time(&self, n: usize) -> T {
        self.t0 + T::lit(n as f64) * self.dt
    }

    pub fn span(&self) -> T {
        T::lit(self.n_samples as f64 - 1.0) * self.dt
    }
}

/// Normalized dual-polarization signal `q = (q1, q2)` on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DualPolEnvelope<T> {
    q1: Vec<Complex<T>>,
    q2: Vec<Complex<T>>,
    dt: T,
    t0: T,
}

impl<T: Real> DualPolEnvelope<T> {
    pub fn new(q1: Vec<Complex<T>>, q2: Vec<Complex<T>>, dt: T, t0: T) -> Result<Self> {
        if q1.len() != q2.len() {
            return Err(Error::InvalidEnvelope(format!(
                "polarization lengths differ ({} vs {})",
                q1.len(),
                q2.len()
            )));
        }
        if q1.len() < 2 {
            return Err(Error::InvalidEnvelope("fewer than two samples".into()));
        }
        if !(dt > T::zero()) || !dt.is_finite() {
            return Err(Error::InvalidEnvelope(format!("dt = {dt} must be positive")));
        }
        if !t0.is_finite() {
            return Err(Error::InvalidEnvelope("t0 must be finite".into()));
        }
        Ok(Self { q1, q2, dt, t0 })
    }

    pub fn zeros(grid: &TimeGrid<T>) -> Self {
        let z = vec![Complex::new(T::zero(), T::zero()); grid.n_samples];
        Self {
            q1: z.clone(),
            q2: z,
            dt: grid.dt,
            t0: grid.t0,
        }
    }

    /// Samples `f(t) -> (q1, q2)` on the grid.
    pub fn from_fn(grid: &TimeGrid<T>, f: impl Fn(T) -> (Complex<T>, Complex<T>)) -> Self {
        let (q1, q2) = (0..grid.n_samples).map(|n| f(grid.time(n))).unzip();
        Self {
            q1,
            q2,
            dt: grid.dt,
            t0: grid.t0,
        }
    }

    pub fn grid(&self) -> TimeGrid<T> {
        TimeGrid {
            n_samples: self.len(),
            dt: self.dt,
            t0: self.t0,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.q1.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.q1.is_empty()
    }

    #[inline]
    pub fn dt(&self) -> T {
        self.dt
    }

    #[inline]
    pub fn t0(&self) -> T {
        self.t0
    }

    #[inline]
    pub fn time(&self, n: usize) -> T {
        self.t0 + T::lit(n as f64) * self.dt
    }

    pub fn q1(&self) -> &[Complex<T>] {
        &self.q1
    }

    pub fn q2(&self) -> &[Complex<T>] {
        &self.q2
    }

    pub fn polarizations_mut(&mut self) -> (&mut [Complex<T>], &mut [Complex<T>]) {
        (&mut self.q1, &mut self.q2)
    }

    pub fn into_parts(self) -> (Vec<Complex<T>>, Vec<Complex<T>>, T, T) {
        (self.q1, self.q2, self.dt, self.t0)
    }

    /// Instantaneous power `|q1|² + |q2|²` at sample `n`.
    #[inline]
    pub fn power(&self, n: usize) -> T {
        self.q1[n].norm_sqr() + self.q2[n].norm_sqr()
    }

    pub fn peak_amplitude(&self) -> T {
        (0..self.len()).map(|n| self.power(n)).fold(T::zero(), T::max).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.q1
            .iter()
            .chain(self.q2.iter())
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Trapezoidal energy `∫ (|q1|² + |q2|²) dt`.
    pub fn energy(&self) -> T {
        signal_energy(self)
    }

    /// Energy-weighted mean time.
    pub fn centroid(&self) -> Result<T> {
        let mut e = T::zero();
        let mut te = T::zero();
        for n in 0..self.len() {
            let p = self.power(n);
            e += p;
            te += p * self.time(n);
        }
        if !(e > T::zero()) {
            return Err(Error::ZeroEnergy);
        }
        Ok(te / e)
    }

    pub fn scale(&mut self, factor: T) {
        for z in self.q1.iter_mut().chain(self.q2.iter_mut()) {
            *z *= factor;
        }
    }

    /// Sub-envelope of samples whose times fall within `[start, end]`.
    pub fn window(&self, start: T, end: T) -> Result<Self> {
        let first = ((start - self.t0) / self.dt).ceil().max(T::zero());
        let last = ((end - self.t0) / self.dt).floor().min(T::lit(self.len() as f64 - 1.0));
        let (first, last) = (first.to_usize().unwrap_or(0), last.to_usize().unwrap_or(0));
        if last < first + 1 {
            return Err(Error::InvalidEnvelope(format!(
                "window [{start}, {end}] holds fewer than two samples"
            )));
        }
        Self::new(
            self.q1[first..=last].to_vec(),
            self.q2[first..=last].to_vec(),
            self.dt,
            self.time(first),
        )
    }

    /// Every `factor`-th sample starting from the first.
    pub fn decimate(&self, factor: usize) -> Result<Self> {
        let pick = |v: &[Complex<T>]| v.iter().step_by(factor).copied().collect::<Vec<_>>();
        Self::new(pick(&self.q1), pick(&self.q2), self.dt * T::lit(factor as f64), self.t0)
    }

    pub fn cast<U: Real>(&self) -> DualPolEnvelope<U> {
        let c = |v: &[Complex<T>]| {
            v.iter()
                .map(|z| Complex::new(U::lit(z.re.as_f64()), U::lit(z.im.as_f64())))
                .collect()
        };
        DualPolEnvelope {
            q1: c(&self.q1),
            q2: c(&self.q2),
            dt: U::lit(self.dt.as_f64()),
            t0: U::lit(self.t0.as_f64()),
        }
    }

    /// Largest pointwise distance to `other` over both polarizations.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.q1
            .iter()
            .zip(&other.q1)
            .chain(self.q2.iter().zip(&other.q2))
            .map(|(a, b)| (*a - *b).norm())
            .fold(T::zero(), T::max)
    }
}

/// Trapezoidal `∫ (|q1|² + |q2|²) dt` on the envelope grid.
pub fn signal_energy<T: Real>(env: &DualPolEnvelope<T>) -> T {
    let n = env.len();
    let mut sum = T::zero();
    for i in 0..n {
        let w = if i == 0 || i == n - 1 { T::lit(0.5) } else { T::one() };
        sum += w * env.power(i);
    }
    sum * env.dt
}

/// Width of the narrowest interval centred on the energy centroid holding at
/// least `fraction` of the total energy.
///
/// Cumulative energy is the trapezoidal integral, linearly interpolated between
/// samples; the half-width is located by bisection.
pub fn pulse_duration<T: Real>(env: &DualPolEnvelope<T>, fraction: T) -> Result<T> {
    if !(fraction > T::zero() && fraction < T::one()) {
        return Err(invalid("fraction", format!("{fraction} not in (0, 1)")));
    }
    let total = signal_energy(env);
    if !(total > T::zero()) {
        return Err(Error::ZeroEnergy);
    }
    let n = env.len();
    let mut cumulative = Vec::with_capacity(n);
    cumulative.push(T::zero());
    for i in 1..n {
        let prev = cumulative[i - 1];
        cumulative.push(prev + T::lit(0.5) * (env.power(i - 1) + env.power(i)) * env.dt);
    }
    let energy_before = |t: T| -> T {
        let x = (t - env.t0) / env.dt;
        if x <= T::zero() {
            return T::zero();
        }
        let last = T::lit(n as f64 - 1.0);
        if x >= last {
            return total;
        }
        let i = x.floor().to_usize().unwrap_or(0).min(n - 2);
        let frac = x - T::lit(i as f64);
        // exact integral of the linear interpolant of power on [t_i, t]
        let p0 = env.power(i);
        let p1 = env.power(i + 1);
        cumulative[i] + env.dt * (p0 * frac + T::lit(0.5) * (p1 - p0) * frac * frac)
    };
    let center = env.centroid()?;
    let target = fraction * total;
    let inside = |w: T| energy_before(center + w) - energy_before(center - w);
    let mut lo = T::zero();
    let mut hi = T::lit(n as f64) * env.dt;
    if inside(hi) < target {
        return Ok(T::lit(2.0) * hi);
    }
    for _ in 0..200 {
        let mid = T::lit(0.5) * (lo + hi);
        if inside(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= T::epsilon() * hi.max(T::one()) {
            break;
        }
    }
    Ok(T::lit(2.0) * hi)
}
