use proptest::prelude::*;
use qag_core::codec::{decode_angle, decode_counts, draw_latent, EncodingConfig, Generator, LatentDraw};
use qag_core::sim::{Circuit, NoiseModel};
use qag_core::util::{mean, rng_from_seed, sample_std};
use std::f64::consts::PI;

#[test]
fn single_rotation_decodes_to_complementary_angle() {
    let mut cfg = EncodingConfig::new(vec![0.0]).with_shots(100_000);
    cfg.hadamard = false;
    let circuit = Circuit::new(1);
    let gen = Generator::new(&circuit, &[], &cfg).unwrap();
    for (k, omega) in [0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0, PI].into_iter().enumerate() {
        let draw = LatentDraw { omega: vec![omega], global_factor: 1.0 };
        let mut rng = rng_from_seed(k as u64);
        let e = gen.image_for(&draw, &NoiseModel::noiseless(1), &mut rng).unwrap()[0];
        // invert the energy map back to an angle
        let theta = e * PI / 0.6 - PI / 2.0;
        let expected = PI / 2.0 - omega;
        assert!((theta - expected).abs() < 0.02, "omega {omega}: {theta} vs {expected}");
    }
}

#[test]
fn energy_endpoints_are_exact() {
    let cfg = EncodingConfig::new(vec![0.0]);
    assert_eq!(decode_counts(&[512], 512, &cfg).unwrap()[0], 0.6);
    assert_eq!(decode_counts(&[0], 512, &cfg).unwrap()[0], 0.0);
}

#[test]
fn latent_spread_matches_moment_oracle() {
    // std(U[-1,1] * U[-a,a]) = (1/sqrt 3)(a/sqrt 3) = a/3
    let cfg = EncodingConfig::new(vec![0.05, 0.2]);
    let mut rng = rng_from_seed(17);
    let n = 1_000_000;
    let mut w0 = Vec::with_capacity(n);
    let mut w1 = Vec::with_capacity(n);
    for _ in 0..n {
        let d = draw_latent(&cfg, &mut rng);
        w0.push(d.omega[0]);
        w1.push(d.omega[1]);
    }
    for (w, s) in [(w0, 0.05), (w1, 0.2)] {
        let expected = s * 0.25 / 3.0;
        let got = sample_std(&w);
        // relative SE of a std estimate of this product law is ~1.3/sqrt(2n)
        assert!((got / expected - 1.0).abs() < 4e-3, "{got} vs {expected}");
        assert!(mean(&w).abs() < 4.0 * expected / (n as f64).sqrt());
    }
}

#[test]
fn roundtrip_converges_with_shots() {
    let cfg = EncodingConfig::new(vec![0.0]).with_shots(100_000);
    let gen = Generator::new(&Circuit::new(1), &[], &cfg).unwrap();
    // plus state: p0 = 1/2, decoded energy 0.3; 3 sigma band in angle = 3/sqrt(shots)
    let mut rng = rng_from_seed(2);
    let e = gen.image_for(&LatentDraw::zero(1), &NoiseModel::noiseless(1), &mut rng).unwrap()[0];
    let theta = e * PI / 0.6 - PI / 2.0;
    assert!(theta.abs() < 3.0 / (100_000f64).sqrt());
}

proptest! {
    #[test]
    fn decode_is_monotone_and_in_range(shots in 1u64..5000, a in 0u64..5000, b in 0u64..5000) {
        let (a, b) = (a.min(shots), b.min(shots));
        let cfg = EncodingConfig::new(vec![0.0]);
        let ea = decode_counts(&[a], shots, &cfg).unwrap()[0];
        let eb = decode_counts(&[b], shots, &cfg).unwrap()[0];
        prop_assert!((0.0..=0.6).contains(&ea));
        if a < b { prop_assert!(ea < eb); }
        prop_assert!(decode_angle(a, shots).unwrap().abs() <= PI / 2.0);
    }
}
