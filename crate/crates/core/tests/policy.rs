mod common;

use std::sync::LazyLock;

use common::{exhaustive_preservation, floyd_warshall_flows, random_access_state, random_walk};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::seq::IndexedRandom;
use tracecheck::policy::universe::{random_args, secure_states, Bounds};
use tracecheck::policy::{apply_event, derive_flows, enabled, events::CATALOG, PolicyState};

static STATES: LazyLock<Vec<PolicyState>> = LazyLock::new(|| secure_states(&Bounds::default()));

/// One subject and no categories; the acceptance run covers the full
/// bounded universe.
#[test]
fn enabled_events_preserve_invariants_in_a_small_universe() {
    let p = exhaustive_preservation(&Bounds {
        max_subjects: 1,
        int_levels: 2,
        sec_levels: 2,
        categories: 0,
    });
    assert!(p.violations.is_empty(), "{:#?}", p.violations);
    assert!(p.enabled > 0);
}

#[test]
fn random_walks_preserve_invariants() {
    for seed in 0..3 {
        let p = random_walk(seed, 2000);
        assert!(p.violations.is_empty(), "seed {seed}: {:#?}", p.violations);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn flows_match_floyd_warshall(seed in any::<u64>()) {
        let st = random_access_state(&mut ChaCha8Rng::seed_from_u64(seed), 10);
        prop_assert_eq!(derive_flows(&st), floyd_warshall_flows(&st));
    }

    #[test]
    fn disabled_events_leave_state_alone(seed in any::<u64>(), which in 0..19usize) {
        let b = Bounds::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let st = STATES.choose(&mut rng).unwrap();
        let d = &CATALOG[which];
        let args = random_args(&mut rng, d, st, &b);
        let on = enabled(st, d.name, &args).unwrap();
        match apply_event(st, d.name, &args) {
            Ok(next) => {
                prop_assert!(on);
                prop_assert_eq!(apply_event(st, d.name, &args).unwrap(), next);
            }
            Err(_) => prop_assert!(!on),
        }
    }
}
