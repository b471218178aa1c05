use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use semplan::neural::*;

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(64) })]

    #[test]
    fn forward_and_backward_stay_finite(
        seed in any::<u64>(),
        widths in prop::collection::vec(1usize..=64, 1..=3),
        input in 1usize..=8,
        scale in 0.0f64..=1e3,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Mlp::init(input, &widths, Activation::Identity, &mut rng);
        let xs: Vec<f64> = (0..3 * input).map(|i| scale * ((i as f64 * 0.37).sin())).collect();
        let x = Matrix::from_vec(3, input, xs).unwrap();
        let mut cache = MlpCache::default();
        let y = m.forward_cached(&x, &mut cache).unwrap();
        prop_assert!(y.is_finite());
        let mut grads = m.zeros_like();
        let dx = m.backward(&cache, y.clone(), &mut grads).unwrap();
        prop_assert!(dx.is_finite());
        prop_assert!(grads.is_finite());
        prop_assert_eq!(m.forward(&x).unwrap(), y);
    }

    #[test]
    fn adam_is_deterministic_and_leaves_state_on_bad_gradients(seed in any::<u64>(), n in 1usize..32) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut p1 = vec![0.5; n];
        let mut p2 = vec![0.5; n];
        let mut s1 = AdamState::new(n, 0.01);
        let mut s2 = AdamState::new(n, 0.01);
        adam_step(&mut [&mut p1[..]], &[&g[..]], &mut s1).unwrap();
        adam_step(&mut [&mut p2[..]], &[&g[..]], &mut s2).unwrap();
        prop_assert_eq!(&p1, &p2);
        // The first bias-corrected step moves every weight by about lr against its gradient sign.
        for (p, gi) in p1.iter().zip(&g) {
            if gi.abs() > 1e-6 {
                prop_assert!(((0.5 - p) - 0.01 * gi.signum()).abs() < 1e-4);
            }
        }
        let mut bad = g.clone();
        bad[0] = f64::NAN;
        let before = (p1.clone(), s1.clone());
        prop_assert!(adam_step(&mut [&mut p1[..]], &[&bad[..]], &mut s1).is_err());
        prop_assert_eq!((p1, s1), before);
    }
}
