use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use semplan::worldsim::*;

/// A start state, half the time with blocks scattered into the tray and bin.
fn world(seed: u64, red: usize, green: usize) -> WorldState {
    let g = Geometry::default();
    let s = sample_initial_state(&g, &[red, green], seed).unwrap();
    if seed % 2 == 0 {
        s
    } else {
        scatter_into_fixtures(&s, &g, 0.5, &mut ChaCha8Rng::seed_from_u64(seed))
    }
}

fn skill() -> impl Strategy<Value = SkillId> {
    prop::sample::select(SkillId::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(96) })]

    #[test]
    fn sampled_params_hold_and_effects_are_well_formed(
        seed in 0u64..10_000, red in 0usize..=3, green in 0usize..=3, k in skill()
    ) {
        let g = Geometry::default();
        let s = world(seed, red, green);
        let params = sample_params(k, &s, &g, &mut ChaCha8Rng::seed_from_u64(seed ^ 0xabc), 6);
        for p in params {
            prop_assert!(precondition(k, &s, &p, &g).unwrap());
            let (next, cost) = apply(&s, &p, &g).unwrap();
            prop_assert_eq!(apply(&s, &p, &g).unwrap(), (next.clone(), cost));
            prop_assert!(cost > 0.0 && cost.is_finite());
            prop_assert_eq!(next.len(), s.len());
            for (a, b) in s.blocks.iter().zip(&next.blocks) {
                prop_assert_eq!(a.color, b.color);
                prop_assert_eq!(a.index, b.index);
                prop_assert_ne!(region_of(&b.position, &g), Region::OffWorld);
            }
            if let SkillParams::PickPlace { block_index, .. } = p {
                for (a, b) in s.blocks.iter().zip(&next.blocks) {
                    if a.index != block_index {
                        prop_assert_eq!(a.position, b.position);
                    }
                }
                let moved = next.blocks[block_index as usize].position;
                prop_assert_ne!(region_of(&moved, &g), Region::BinFar);
            }
        }
    }

    #[test]
    fn failed_preconditions_are_errors_not_effects(seed in 0u64..10_000, k in skill(), x in 0.0f64..1.5, y in -0.6f64..0.3) {
        let g = Geometry::default();
        let s = world(seed, 3, 3);
        let p = match k {
            SkillId::PickPlace => SkillParams::PickPlace { block_index: (seed % 6) as u32, place: [x, y, 0.02] },
            SkillId::TraySlide => SkillParams::TraySlide { bin_x: x },
            SkillId::TraySweep => SkillParams::TraySweep { start_x: x },
            SkillId::BinTilt => SkillParams::BinTilt { angle_deg: 30.0 * x },
        };
        let ok = precondition(k, &s, &p, &g).unwrap();
        prop_assert_eq!(apply(&s, &p, &g).is_ok(), ok);
        prop_assert_eq!(violation(&s, &p, &g).is_none(), ok);
    }

    #[test]
    fn state_json_round_trip(seed in 0u64..10_000, red in 0usize..=3, green in 0usize..=3) {
        let s = world(seed, red, green);
        let text = serde_json::to_string(&s).unwrap();
        prop_assert_eq!(serde_json::from_str::<WorldState>(&text).unwrap(), s);
    }
}
