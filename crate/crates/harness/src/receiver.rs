//! Receiver front end: ideal lowpass, band-limited upsampling and truncation.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use solnft::envelope::DualPolEnvelope;
use solnft::{Complex64, Envelope};

/// Signed angular frequency of FFT bin `k` out of `n` at spacing `dt`.
fn bin_omega(k: usize, n: usize, dt: f64) -> f64 {
    let signed = if k < n.div_ceil(2) {
        k as f64
    } else {
        k as f64 - n as f64
    };
    std::f64::consts::TAU * signed / (n as f64 * dt)
}

/// Smallest angular frequency `W` such that `|ω| ≤ W` holds `fraction` of the
/// signal's spectral energy. The signal is zero-padded four times for a finer
/// frequency grid.
pub fn one_sided_bandwidth(env: &Envelope, fraction: f64) -> f64 {
    let n = env.len() * 4;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut power = vec![0.0; n];
    for q in [env.q1(), env.q2()] {
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        buf[..q.len()].copy_from_slice(q);
        fft.process(&mut buf);
        for (p, z) in power.iter_mut().zip(&buf) {
            *p += z.norm_sqr();
        }
    }
    let total: f64 = power.iter().sum();
    let mut bins: Vec<(f64, f64)> = (0..n).map(|k| (bin_omega(k, n, env.dt()).abs(), power[k])).collect();
    bins.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut acc = 0.0;
    for (w, p) in bins {
        acc += p;
        if acc >= fraction * total {
            return w;
        }
    }
    f64::INFINITY
}

/// Lowpass, upsampling and truncation applied to every received frame.
pub struct FrontEnd {
    n: usize,
    dt: f64,
    cutoff: f64,
    upsample: usize,
    window: (f64, f64),
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl FrontEnd {
    /// `cutoff` is an angular frequency (`inf` keeps every bin); `window` is the
    /// kept time interval.
    pub fn new(n: usize, dt: f64, cutoff: f64, upsample: usize, window: (f64, f64)) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            dt,
            cutoff,
            upsample: upsample.max(1),
            window,
            fft: planner.plan_fft_forward(n),
            ifft: planner.plan_fft_inverse(n * upsample.max(1)),
        }
    }

    /// Zeroes every bin above the cutoff and interpolates by the upsampling
    /// factor. With factor 1 and no cutoff this is the identity.
    pub fn filter(&self, env: &Envelope) -> solnft::Result<Envelope> {
        assert_eq!(env.len(), self.n, "front end built for another grid");
        let (n, u) = (self.n, self.upsample);
        let m = n * u;
        let even_nyquist = n % 2 == 0 && u > 1;
        let mut out = Vec::with_capacity(2);
        for q in [env.q1(), env.q2()] {
            let mut spec = q.to_vec();
            self.fft.process(&mut spec);
            let mut big = vec![Complex64::new(0.0, 0.0); m];
            for (k, z) in spec.iter().enumerate() {
                if bin_omega(k, n, self.dt).abs() > self.cutoff || (even_nyquist && k == n / 2) {
                    continue;
                }
                let dst = if k < n.div_ceil(2) || (k == n / 2 && !even_nyquist) {
                    k
                } else {
                    m - (n - k)
                };
                big[dst] = *z;
            }
            self.ifft.process(&mut big);
            let scale = 1.0 / n as f64;
            out.push(big.into_iter().map(|z| z * scale).collect::<Vec<_>>());
        }
        let q2 = out.pop().unwrap();
        let q1 = out.pop().unwrap();
        DualPolEnvelope::new(q1, q2, self.dt / u as f64, env.t0())
    }

    /// Filtered and truncated frame, ready for the NFT.
    pub fn receive(&self, env: &Envelope) -> solnft::Result<Envelope> {
        self.filter(env)?.window(self.window.0, self.window.1)
    }
}
