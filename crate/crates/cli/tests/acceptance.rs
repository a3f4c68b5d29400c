//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use facetmag_core::artifacts::generate_survey;
use facetmag_core::session::judgments_from_spotter;
use facetmag_core::store;
use facetmag_core::testkit::{self, as_oracle, oracle_issues, Limits};
use facetmag_core::{
    evaluate, fixtures, join, join_all, merge_all, merge_sessions, partition, sampling_baseline, spot, spot_bar,
    verify_composition, EvalResult, SamplingWeights, Session, Side,
};

/// Seeds the sampling comparison is run with.
const BASELINE_SEEDS: [u64; 8] = [1, 2, 3, 5, 8, 13, 21, 34];

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn composition_property() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    for seed in 0..500u64 {
        let t = testkit::random_instance(&mut testkit::rng(seed), Limits::default());
        let report = verify_composition(&t.d1, &t.d2, &t.use_case, &t.rules).unwrap();
        let joined = evaluate(&join(&t.d1, &t.d2).unwrap(), &t.use_case, &t.rules).unwrap();
        let oracle_ok = as_oracle(&joined.issues) == oracle_issues(&[&t.d1, &t.d2], &t.use_case, &t.rules);
        if !report.equal || !oracle_ok {
            failures.push(seed);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures.is_empty() && secs < 10.0,
        format!("500 instances, {} unequal {:?}, {secs:.2} s", failures.len(), failures),
    )
}

fn partition_equivalence() -> Outcome {
    let d = join(&fixtures::gender(), &fixtures::ses()).unwrap();
    let u = fixtures::checkout();
    let rules = fixtures::base_rules();
    let whole = evaluate(&d, &u, &rules).unwrap();
    let mut rng = testkit::rng(2024);
    let (mut checked, mut failed) = (0, 0);
    for k in [2, 3] {
        for _ in 0..50 {
            let assignment = testkit::random_assignment(&mut rng, &d, k);
            let parts = partition(&d, &assignment).unwrap();
            assert_eq!(parts.len(), k);
            let results: Vec<EvalResult> = parts.iter().map(|p| evaluate(p, &u, &rules).unwrap()).collect();
            let merged = merge_all(&results).unwrap().unwrap();
            checked += 1;
            if !merged.issues.same_issues(&whole.issues) {
                failed += 1;
            }
        }
    }
    outcome(failed == 0, format!("{checked} partitions (50 two-way, 50 three-way), {failed} differ"))
}

fn spot_bar_decomposition() -> Outcome {
    let d = join_all(&[fixtures::gender(), fixtures::ses(), fixtures::age()]).unwrap();
    let u = fixtures::checkout();
    let rules = fixtures::base_rules();
    let (mut checked, mut failed) = (0, 0);
    for facet in d.facets() {
        for state in u.states() {
            let lo = spot(&facet.extreme_value(Side::Min), state, &rules).unwrap();
            let hi = spot(&facet.extreme_value(Side::Max), state, &rules).unwrap();
            checked += 1;
            if spot_bar(facet, state, &rules) != lo.union(hi) {
                failed += 1;
            }
        }
    }
    outcome(failed == 0, format!("{checked} facet-state pairs, {failed} differ"))
}

fn dedup_cost() -> Outcome {
    let (g, s) = (fixtures::gender(), fixtures::ses());
    let u = fixtures::checkout();
    let rules = fixtures::base_rules();
    let d = join(&g, &s).unwrap();
    let shared: Vec<String> = g.shared_ids(&s).iter().map(|f| f.to_string()).collect();
    let joined = evaluate(&d, &u, &rules).unwrap();
    let separate = evaluate(&g, &u, &rules).unwrap().spot_invocations + evaluate(&s, &u, &rules).unwrap().spot_invocations;
    let expected = 2 * 8 * u.len() as u64;
    outcome(
        d.len() == 8
            && joined.spot_invocations == expected
            && shared == ["attitude-toward-risk", "computer-self-efficacy"]
            && separate == expected + 2 * 2 * u.len() as u64,
        format!(
            "joined facets {}, spot calls {} (expected {expected}), separate runs {separate}, shared {shared:?}",
            d.len(),
            joined.spot_invocations
        ),
    )
}

fn coverage_vs_sampling() -> Outcome {
    let dims = [fixtures::gender(), fixtures::ses()];
    let u = fixtures::checkout();
    let rules = fixtures::base_rules();
    let typed = evaluate(&join_all(&dims).unwrap(), &u, &rules).unwrap();
    let budget = 2 * 8 * u.len() as u64;
    let density_ok = typed.coverage.density() == 1.0;
    let (mut bound_ok, mut subset_ok, mut proper) = (true, true, 0);
    let mut lines = Vec::new();
    for seed in BASELINE_SEEDS {
        let r = sampling_baseline(&dims, &u, &rules, budget, seed, &SamplingWeights::Uniform).unwrap();
        bound_ok &= r.cell_density <= budget as f64 / 256.0;
        subset_ok &= r.issues_found.is_subset(&typed.issues);
        if r.issues_found.len() < typed.issues.len() {
            proper += 1;
        }
        lines.push(format!("seed {seed}: {:.3}, {}/{}", r.cell_density, r.issues_found.len(), typed.issues.len()));
    }
    outcome(
        density_ok && bound_ok && subset_ok && proper == BASELINE_SEEDS.len(),
        format!(
            "type density {:.1}; cellDensity <= 0.25: {bound_ok}; subset: {subset_ok}; proper subset on {proper}/{} seeds [{}]",
            typed.coverage.density(),
            BASELINE_SEEDS.len(),
            lines.join("; ")
        ),
    )
}

fn survey_proportionality() -> Outcome {
    let dims = [fixtures::gender(), fixtures::ses()];
    let one = generate_survey(&dims, 1).unwrap().questions.len();
    let three = generate_survey(&dims, 3).unwrap().questions.len();
    outcome(one == 8 && three == 24, format!("q=1: {one} questions, q=3: {three}"))
}

fn facetmag(dir: &Path, args: &[&str]) {
    let status = Command::new(env!("CARGO_BIN_EXE_facetmag"))
        .current_dir(dir)
        .args(args)
        .status()
        .expect("run facetmag");
    assert!(status.success(), "facetmag {args:?} failed: {status}");
}

fn cli_equivalence() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    store::save_dimension(&fixtures::gender(), &root.join("gender.dim.json")).unwrap();
    store::save_dimension(&fixtures::ses(), &root.join("ses.dim.json")).unwrap();
    store::save_use_case(&fixtures::checkout(), &root.join("checkout.usecase.json")).unwrap();
    std::fs::write(root.join("base.rules"), fixtures::BASE_RULES).unwrap();
    let uc = "checkout.usecase.json";
    facetmag(root, &["eval", "gender.dim.json", uc, "base.rules", "-o", "gender.result.json"]);
    facetmag(root, &["eval", "ses.dim.json", uc, "base.rules", "-o", "ses.result.json"]);
    facetmag(root, &["merge", "gender.result.json", "ses.result.json", "-o", "merged.result.json"]);
    facetmag(root, &["join", "gender.dim.json", "ses.dim.json", "-o", "joined.dim.json"]);
    facetmag(root, &["eval", "joined.dim.json", uc, "base.rules", "-o", "joined.result.json"]);
    let merged = std::fs::read(root.join("merged.result.json")).unwrap();
    let joined = std::fs::read(root.join("joined.result.json")).unwrap();
    outcome(
        merged == joined,
        format!("merged {} bytes, joined {} bytes", merged.len(), joined.len()),
    )
}

fn session_replay_oracle() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let u = fixtures::checkout();
    let rules = fixtures::base_rules();
    let mut replayed = Vec::new();
    let mut judgments = 0;
    for d in [fixtures::gender(), fixtures::ses()] {
        let path = dir.path().join(format!("{}.session.jsonl", d.id()));
        let mut live = Session::create(d.id(), std::slice::from_ref(&d), &u, BTreeMap::new()).unwrap();
        store::append_session_event(&path, &live.events()[0]).unwrap();
        for j in judgments_from_spotter(&live, &rules, "facilitator", "2026-05-01T09:00:00Z") {
            let v = live.version();
            live.record_judgment(j, v).unwrap();
            store::append_session_event(&path, live.events().last().unwrap()).unwrap();
            judgments += 1;
        }
        let back = store::replay_session(&path).unwrap();
        assert_eq!(back, live);
        replayed.push(back);
    }
    let refs: Vec<&Session> = replayed.iter().collect();
    let merged = merge_sessions(&refs).unwrap();
    let engine = evaluate(&join(&fixtures::gender(), &fixtures::ses()).unwrap(), &u, &rules).unwrap();
    outcome(
        merged.issues.same_issues(&engine.issues) && merged.coverage.density() == 1.0,
        format!(
            "{judgments} judgments over 2 sessions, {} merged issues vs {} engine issues",
            merged.issues.len(),
            engine.issues.len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("composition property suite", composition_property),
        ("partition equivalence", partition_equivalence),
        ("spotBar decomposition", spot_bar_decomposition),
        ("dedup and cost accounting", dedup_cost),
        ("coverage vs sampling", coverage_vs_sampling),
        ("survey proportionality", survey_proportionality),
        ("CLI/engine equivalence", cli_equivalence),
        ("session replay oracle", session_replay_oracle),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        println!("[{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
