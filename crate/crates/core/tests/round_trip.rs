use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use solnft::darboux::{auto_grid, darboux_synthesize};
use solnft::nft::discrete_spectrum;
use solnft::{Entry, Spectrum};

#[test]
fn random_spectra_survive_synthesis_and_analysis() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_l, mut worst_b) = (0.0f64, 0.0f64);
    for _ in 0..40 {
        let n = rng.gen_range(1..=2);
        let mut entries: Vec<Entry> = Vec::new();
        while entries.len() < n {
            let l = Complex::new(rng.gen_range(-0.2..0.2), rng.gen_range(0.2..0.8));
            if entries.iter().any(|e| (e.lambda - l).norm() < 0.1) {
                continue;
            }
            let mut coef =
                || Complex::from_polar(rng.gen_range(0.1f64..5.0), rng.gen_range(0.0..std::f64::consts::TAU));
            entries.push(Entry::new(l, coef(), coef()));
        }
        let spec = Spectrum::new(entries).unwrap();
        let grid = auto_grid(&spec, 32).unwrap();
        let syn = darboux_synthesize(&spec, &grid).unwrap();
        assert!(syn.decayed());
        let got = discrete_spectrum(&syn.envelope, &spec.eigenvalues()).unwrap();
        assert_eq!(got.len(), n);
        let mut want: Vec<_> = spec.entries().to_vec();
        want.sort_by(|a, b| a.lambda.im.partial_cmp(&b.lambda.im).unwrap());
        for (w, g) in want.iter().zip(got.entries()) {
            worst_l = worst_l.max((w.lambda - g.lambda).norm());
            worst_b = worst_b
                .max((w.b1 - g.b1).norm() / w.b1.norm())
                .max((w.b2 - g.b2).norm() / w.b2.norm());
        }
    }
    println!("worst eigenvalue error {worst_l:.3e}, worst coefficient error {worst_b:.3e}");
    assert!(worst_l <= 1e-7);
    assert!(worst_b <= 1e-4);
}
