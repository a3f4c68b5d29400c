use facetmag_core::rules::dsl::parse_rules_with_id;
use facetmag_core::testkit::{self, as_oracle, oracle_issues, Limits};
#[cfg(feature = "parallel")]
use facetmag_core::{evaluate_parallel, evaluate_sequential};
use facetmag_core::{
    evaluate, join, merge_all, merge_results, partition, spot,
    spot_bar, verify_composition, EvalResult, RuleSet, Side,
};
use proptest::prelude::*;

fn instance(seed: u64) -> testkit::Instance {
    testkit::random_instance(&mut testkit::rng(seed), Limits::default())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn join_evaluation_equals_merge(seed in any::<u64>()) {
        let t = instance(seed);
        let joined = join(&t.d1, &t.d2).unwrap();
        let whole = evaluate(&joined, &t.use_case, &t.rules).unwrap();
        let a = evaluate(&t.d1, &t.use_case, &t.rules).unwrap();
        let b = evaluate(&t.d2, &t.use_case, &t.rules).unwrap();
        let merged = merge_results(&a, &b).unwrap();
        prop_assert_eq!(&whole, &merged);
        prop_assert_eq!(as_oracle(&whole.issues), oracle_issues(&[&t.d1, &t.d2], &t.use_case, &t.rules));
        let report = verify_composition(&t.d1, &t.d2, &t.use_case, &t.rules).unwrap();
        prop_assert!(report.equal);
        let shared = t.d1.shared_ids(&t.d2).len() as u64;
        prop_assert_eq!(
            report.separate_invocations - report.joined_invocations,
            2 * shared * t.use_case.len() as u64
        );
    }

    #[test]
    fn evaluation_is_monotone_in_dimension(seed in any::<u64>()) {
        let t = instance(seed);
        let joined = join(&t.d1, &t.d2).unwrap();
        let whole = evaluate(&joined, &t.use_case, &t.rules).unwrap();
        let part = evaluate(&t.d1, &t.use_case, &t.rules).unwrap();
        prop_assert!(part.issues.is_subset(&whole.issues));
    }

    #[test]
    fn partitions_merge_to_whole(seed in any::<u64>(), k in 1usize..4) {
        let t = instance(seed);
        let mut rng = testkit::rng(seed ^ 0x5eed);
        let assignment = testkit::random_assignment(&mut rng, &t.d1, k);
        let parts = partition(&t.d1, &assignment).unwrap();
        let results: Vec<EvalResult> = parts
            .iter()
            .map(|p| evaluate(p, &t.use_case, &t.rules).unwrap())
            .collect();
        let merged = merge_all(&results).unwrap().unwrap();
        let whole = evaluate(&t.d1, &t.use_case, &t.rules).unwrap();
        prop_assert!(merged.issues.same_issues(&whole.issues));
        prop_assert_eq!(as_oracle(&merged.issues), as_oracle(&whole.issues));
        prop_assert_eq!(merged.coverage, whole.coverage);
    }

    #[test]
    fn spot_bar_is_union_of_extremes(seed in any::<u64>()) {
        let t = instance(seed);
        for facet in t.d1.facets() {
            for state in t.use_case.states() {
                let bar = spot_bar(facet, state, &t.rules);
                let lo = spot(&facet.extreme_value(Side::Min), state, &t.rules).unwrap();
                let hi = spot(&facet.extreme_value(Side::Max), state, &t.rules).unwrap();
                prop_assert_eq!(&bar, &lo.union(hi));
            }
        }
    }

    #[test]
    fn adding_rules_only_adds_issues(seed in any::<u64>(), cut in 0usize..30) {
        let t = instance(seed);
        let fewer = RuleSet::new("gen", t.rules.rules().iter().take(cut).cloned().collect()).unwrap();
        let joined = join(&t.d1, &t.d2).unwrap();
        let small = evaluate(&joined, &t.use_case, &fewer).unwrap();
        let large = evaluate(&joined, &t.use_case, &t.rules).unwrap();
        prop_assert!(small.issues.is_subset(&large.issues));
    }

    #[test]
    fn rules_print_and_reparse(seed in any::<u64>()) {
        let t = instance(seed);
        let text = t.rules.to_string();
        let back = parse_rules_with_id("gen", &text).unwrap();
        prop_assert_eq!(&back, &t.rules);
        prop_assert_eq!(back.to_string(), text);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn sequential_and_parallel_agree(seed in any::<u64>()) {
        let t = instance(seed);
        let seq = evaluate_sequential(&t.d1, &t.use_case, &t.rules).unwrap();
        let par = evaluate_parallel(&t.d1, &t.use_case, &t.rules).unwrap();
        prop_assert_eq!(seq.spot_invocations, par.spot_invocations);
        prop_assert_eq!(seq, par);
    }

    #[test]
    fn result_documents_round_trip(seed in any::<u64>()) {
        let t = instance(seed);
        let r = evaluate(&t.d2, &t.use_case, &t.rules).unwrap();
        let text = facetmag_core::store::to_canonical_json(&r);
        let back: EvalResult = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(facetmag_core::store::to_canonical_json(&back), text);
        prop_assert_eq!(back, r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn session_log_replays_to_live_state(seed in any::<u64>()) {
        use facetmag_core::store::{append_session_event, replay_session};
        use facetmag_core::{fixtures, Session};

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.session.jsonl");
        let dims = [fixtures::gender(), fixtures::ses()];
        let u = fixtures::checkout();
        let mut live = Session::create("s", &dims, &u, Default::default()).unwrap();
        append_session_event(&path, &live.events()[0]).unwrap();
        let mut rng = testkit::rng(seed);
        let joined = join(&dims[0], &dims[1]).unwrap();
        let mut recorded = 0;
        for (i, j) in testkit::random_judgments(&mut rng, &joined, &u, 100).into_iter().enumerate() {
            // every seventh submission is stale and must leave no trace
            let expected = if i % 7 == 3 { live.version() - 1 } else { live.version() };
            if live.record_judgment(j, expected).is_ok() {
                append_session_event(&path, live.events().last().unwrap()).unwrap();
                recorded += 1;
            }
        }
        let v = live.version();
        live.close(v, "ana", "2026-03-01T12:00:00Z").unwrap();
        append_session_event(&path, live.events().last().unwrap()).unwrap();

        let back = replay_session(&path).unwrap();
        prop_assert_eq!(back.version(), 1 + recorded + 1);
        prop_assert_eq!(facetmag_core::session_result(&back), facetmag_core::session_result(&live));
        prop_assert_eq!(back, live);
    }
}
