use lmac_core::adapt::{ap_adapt, txop_packets, AlzcState, MAX_DOUBLINGS};
use lmac_core::markov::{build_chain, enumerate_states, transition_prob_formula, transition_row_exact, CollisionState};
use lmac_core::metrics::{jain_index, AlignedConvergence, SlotTally};
use lmac_core::phy::PhyParams;
use lmac_core::throughput::throughput_model;
use lmac_core::{Exact, Horizon, ProtocolKind, SimConfig, Simulator};
use num_traits::One;
use proptest::prelude::*;

fn scheduled() -> impl Strategy<Value = ProtocolKind> {
    prop::sample::select(vec![ProtocolKind::Lbeb, ProtocolKind::Zc, ProtocolKind::Lzc, ProtocolKind::Lmac])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chain_rows_are_distributions(c in 2usize..10, n_off in 0usize..8, g in 0.05f64..0.95) {
        let n = (2 + n_off).min(c);
        let chain = build_chain::<f64>(c, n, g).unwrap();
        for (i, s) in chain.row_sums().iter().enumerate() {
            prop_assert!((s - 1.0).abs() < 1e-12, "row {i} sums to {s}");
        }
        prop_assert!(chain.matrix().iter().flatten().all(|&p| p >= 0.0));
    }

    #[test]
    fn exact_rows_sum_to_one(c in 2usize..8, n_off in 0usize..5, num in 1u64..10) {
        let n = (2 + n_off).min(c);
        let g = Exact::new(num.into(), 10u64.into());
        for from in enumerate_states(n).iter().filter(|s| s.idle_slots(n, c).is_some()) {
            let total: Exact = transition_row_exact(from, c, n, &g).unwrap().into_values().sum();
            prop_assert!(total.is_one(), "{from} gives {total}");
        }
    }

    #[test]
    fn formula_agrees_with_exact_rows(c in 3usize..11, n_off in 0usize..6, g in 0.05f64..0.95) {
        let n = (2 + n_off).min(c);
        let states: Vec<CollisionState> =
            enumerate_states(n).into_iter().filter(|s| s.idle_slots(n, c).is_some()).collect();
        for from in &states {
            let row = transition_row_exact(from, c, n, &g).unwrap();
            for to in states.iter().filter(|t| t.colliding_stations() == from.colliding_stations()) {
                let f = transition_prob_formula(from, to, c, n, &g).unwrap();
                let e = row.get(&Some(to.clone())).copied().unwrap_or(0.0);
                prop_assert!((f - e).abs() < 1e-12, "{from} -> {to}: {f} vs {e}");
            }
        }
    }

    #[test]
    fn collision_free_schedules_absorb(kind in scheduled(), c in 2usize..9, n_off in 0usize..8, seed in any::<u64>()) {
        let n = (1 + n_off).min(c);
        let cfg = SimConfig { seed, ..SimConfig::new(kind, n, c) };
        let mut sim = Simulator::new(cfg).unwrap();
        let mut det = AlignedConvergence::new(n, c, 0);
        let cap = Horizon::Slots(10_000_000);
        prop_assert!(sim.run_until(cap, &mut det, |_, d| d.result().is_some()).unwrap());
        let mut after = SlotTally::default();
        let end = sim.slot_index() + 50 * c as u64;
        sim.run_for(Horizon::Slots(end), &mut after).unwrap();
        prop_assert_eq!(after.collision, 0);
        prop_assert_eq!(after.success, 50 * n as u64);
    }

    #[test]
    fn ap_rule_moves_towards_one_spare_slot(len in 1usize..200, idle in 0usize..200) {
        let idle = idle.min(len);
        let next = ap_adapt(len, idle);
        match idle {
            0 => prop_assert_eq!(next, len + 1),
            1 => prop_assert_eq!(next, len),
            _ => prop_assert_eq!(next, (len - 1).max(1)),
        }
    }

    #[test]
    fn alzc_lengths_stay_base_times_power_of_two(base in 1usize..40, idles in prop::collection::vec(0usize..2000, 1..60)) {
        let mut st = AlzcState::new(base);
        for idle in idles {
            let len = st.adapt(idle % (st.len() + 1));
            let ratio = len / base;
            prop_assert_eq!(len % base, 0);
            prop_assert!(ratio.is_power_of_two() && ratio <= 1 << MAX_DOUBLINGS);
            prop_assert_eq!(txop_packets(len, base).unwrap() as usize, ratio);
        }
    }

    #[test]
    fn jain_index_is_bounded(seq in prop::collection::vec(1u32..=12, 12..400), m in 1usize..4) {
        if let Some(f) = jain_index(&seq, 12, m) {
            prop_assert!((1.0 / 12.0 - 1e-12..=1.0 + 1e-12).contains(&f));
        }
    }

    #[test]
    fn model_throughput_is_a_fraction(n in 1usize..40, c in 1usize..40) {
        let t = throughput_model::<f64>(n, c, &PhyParams::table()).unwrap();
        prop_assert!((0.0..1.0).contains(&t));
        // a single slot shared by several stations never carries a packet
        prop_assert_eq!(t > 0.0, c > 1 || n == 1);
    }
}

#[test]
fn round_robin_is_perfectly_fair() {
    let seq: Vec<u32> = (0..160).map(|i| i % 16 + 1).collect();
    assert_eq!(jain_index(&seq, 16, 1), Some(1.0));
    let monopoly = vec![3u32; 64];
    assert!((jain_index(&monopoly, 16, 2).unwrap() - 1.0 / 16.0).abs() < 1e-12);
}
