use super::*;
use crate::linalg::{c, CMat};
use proptest::prelude::*;

const GOLDEN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus");

fn golden(name: &str) -> Scenario {
    let text = std::fs::read_to_string(format!("{GOLDEN}/{name}.json")).unwrap();
    parse_scenario(&text).unwrap()
}

fn run(s: &Scenario, checks: &[CheckId]) -> SuiteReport {
    run_suite(s, Some(checks), &RunOptions::for_scenario(s))
}

fn measured(r: &SuiteReport, id: CheckId, key: &str) -> f64 {
    r.get(id).unwrap().measured[key]
}

#[test]
fn golden_files_parse_and_round_trip() {
    let mut names: Vec<String> = std::fs::read_dir(GOLDEN)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .map(|p| p.file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert!(names.len() >= 13);
    for n in &names {
        let s = golden(n);
        assert_eq!(&s.name, n);
        let again = parse_scenario(&s.to_json()).unwrap();
        assert_eq!(again, s);
        assert_eq!(again.to_json(), s.to_json());
    }
}

#[test]
fn fractions_parse_to_the_nearest_double() {
    let s = golden("lambda_1_3");
    match s.expectation {
        ExpectationSpec::WeightedCorner { lambda, .. } => assert_eq!(lambda, 1.0 / 3.0),
        _ => panic!("wrong kind"),
    }
}

#[test]
fn unknown_check_is_rejected() {
    let text = std::fs::read_to_string(format!("{GOLDEN}/ex1.json"))
        .unwrap()
        .replace("\"sandwich\"", "\"sandwhich\"");
    let err = parse_scenario(&text).unwrap_err().to_string();
    assert!(err.contains("sandwhich"), "{err}");
}

#[test]
fn unitality_violation_names_the_block() {
    let text = r#"{
      "schema_version": "1", "name": "bad", "seed": "0",
      "expectation": {"kind": "trace",
        "embedding": {"sub_blocks": ["1"], "amb_blocks": ["2", "3"], "inclusion": [["2"], ["2"]]},
        "weights": ["1", "1"]},
      "checks": []
    }"#;
    let err = parse_scenario(text).unwrap_err().to_string();
    assert!(err.contains("A-block 1"), "{err}");
}

#[test]
fn schema_errors_carry_positions_and_fields() {
    let err = parse_scenario("{\n  \"schema_version\": \"1\",\n  \"name\": 3\n}").unwrap_err().to_string();
    assert!(err.contains("line 3"), "{err}");
    let text = std::fs::read_to_string(format!("{GOLDEN}/lambda_1_2.json"))
        .unwrap()
        .replace("\"1/2\"", "\"half\"");
    let err = parse_scenario(&text).unwrap_err().to_string();
    assert!(err.contains("expectation.lambda"), "{err}");
    let text = std::fs::read_to_string(format!("{GOLDEN}/ex1.json"))
        .unwrap()
        .replace("\"seed\"", "\"sede\"");
    assert!(parse_scenario(&text).is_err());
}

#[test]
fn check_list_parsing() {
    assert_eq!(
        parse_check_list("sandwich, gap_law").unwrap(),
        vec![CheckId::Sandwich, CheckId::GapLaw]
    );
    assert!(parse_check_list("sandwich,nope").is_err());
    for id in CheckId::ALL {
        assert_eq!(id.as_str().parse::<CheckId>().unwrap(), id);
    }
}

#[test]
fn random_scenarios_are_deterministic() {
    let a = random_scenario(1, 3, 4);
    let b = random_scenario(1, 3, 4);
    assert_eq!(a, b);
    assert_eq!(a.to_json(), b.to_json());
    assert_ne!(random_scenario(2, 3, 4), a);
    assert_eq!(parse_scenario(&a.to_json()).unwrap(), a);
}

#[test]
fn unit_block_bound_gives_commutative_scenarios() {
    for seed in 0..20 {
        let s = random_scenario(seed, 4, 1);
        let e = s.build(&s.tolerances.resolve()).unwrap();
        assert!(e.shape().is_commutative());
        assert!(e.sub_shape().is_commutative());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn random_scenarios_respect_bounds_and_validate(seed in 0u64..10_000, kb in 1usize..4, md in 1usize..5) {
        let s = random_scenario(seed, kb, md);
        let e = s.build(&s.tolerances.resolve()).unwrap();
        prop_assert!(e.shape().num_blocks() <= kb);
        prop_assert!(e.shape().blocks().iter().all(|&n| n <= md));
        prop_assert!(e.sub_shape().num_blocks() <= kb);
    }
}

#[test]
fn ex1_suite_values() {
    let s = golden("ex1");
    let r = run(&s, &CheckId::ALL);
    for c in &r.checks {
        assert_ne!(c.status, Status::Fail, "{} failed: {:?}", c.id(), c);
    }
    assert_eq!(r.status, Status::Pass);
    assert!((measured(&r, CheckId::Sandwich, "K") - 2.0).abs() < 1e-9);
    assert!((measured(&r, CheckId::Sandwich, "L") - 4.0).abs() < 1e-9);
    assert!((measured(&r, CheckId::LEqualsIndexNorm, "index_norm") - 4.0).abs() < 1e-9);
    // the matrix bound and the relative-commutant bound hold with equality
    assert_eq!(r.get(CheckId::DimBound).unwrap().margin, Some(0.0));
    assert_eq!(r.get(CheckId::RelativeCommutantBound).unwrap().margin, Some(0.0));
    assert_eq!(r.get(CheckId::CommutativeDimBound).unwrap().status, Status::Skipped);
    assert_eq!(r.get(CheckId::PointwiseIndex).unwrap().status, Status::Skipped);
    assert_eq!(measured(&r, CheckId::PureStateExtensions, "extensions"), 2.0);
}

#[test]
fn counterexample_point_is_flagged_as_expected_violation() {
    let s = golden("lambda_eps_1_4");
    let r = run(&s, &[CheckId::Sandwich, CheckId::LLeFloorKSq]);
    let sandwich = r.get(CheckId::Sandwich).unwrap();
    assert_eq!(sandwich.status, Status::Pass);
    assert!((sandwich.measured["L"] - 4.05).abs() < 1e-9);
    assert!((sandwich.measured["K_floor_K"] - 4.5).abs() < 1e-9);
    let flagged = r.get(CheckId::LLeFloorKSq).unwrap();
    assert!(flagged.expected_violation);
    assert_eq!(flagged.status, Status::Pass);
    assert!(flagged.margin.unwrap() > 0.0);

    let mut honest = s.clone();
    honest.expected_violations.clear();
    let r = run(&honest, &[CheckId::LLeFloorKSq]);
    assert_eq!(r.status, Status::Fail);
}

#[test]
fn expected_violation_that_holds_fails() {
    let mut s = golden("ex1");
    s.expected_violations = vec![CheckId::Sandwich];
    let r = run(&s, &[CheckId::Sandwich]);
    assert_eq!(r.status, Status::Fail);
}

#[test]
fn nonfaithful_state_has_infinite_index() {
    let s = golden("nonfaithful_state");
    let r = run(&s, &CheckId::default_set());
    assert_eq!(r.status, Status::InfiniteIndex);
    assert_eq!(r.get(CheckId::Validate).unwrap().status, Status::InfiniteIndex);
    assert_eq!(r.get(CheckId::Sandwich).unwrap().status, Status::InfiniteIndex);
    for id in [CheckId::QuasiBasis, CheckId::Tower, CheckId::Stinespring, CheckId::IndexBound] {
        assert_eq!(r.get(id).unwrap().status, Status::Skipped, "{id}");
    }
}

#[test]
fn construction_failure_is_report_data() {
    let s = Scenario {
        name: "singular".into(),
        seed: 0,
        expectation: ExpectationSpec::TensorState {
            h_dim: 1,
            density: CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)])),
        },
        tolerances: ToleranceOverrides::default(),
        restarts: None,
        tower_levels: None,
        checks: vec![],
        expected_violations: vec![],
    };
    let r = run_suite(&s, None, &RunOptions::for_scenario(&s));
    assert_eq!(r.status, Status::Fail);
    assert!(r.error.as_deref().unwrap().contains("singular"));
}

#[test]
fn pure_state_extension_examples() {
    let tol = 1e-9;
    let ex1 = golden("ex1").build(&Default::default()).unwrap();
    let p = &minimal_projections(ex1.embedding())[0];
    assert_eq!(pure_state_extensions(&ex1, p, tol).unwrap(), 2);

    let shape = crate::AlgebraShape::new(vec![2, 1]).unwrap();
    let id = crate::condexp::trace_ce(&crate::Embedding::identity(&shape), &[1.0, 1.0], &Default::default()).unwrap();
    for p in minimal_projections(id.embedding()) {
        assert_eq!(pure_state_extensions(&id, &p, tol).unwrap(), 1);
    }

    let t = golden("tensor_h1_k3").build(&Default::default()).unwrap();
    let p = &minimal_projections(t.embedding())[0];
    assert_eq!(pure_state_extensions(&t, p, tol).unwrap(), 3);
    // not minimal in B
    let shape = t.shape().clone();
    let half = crate::Element::matrix_unit(&shape, 0, 0, 0);
    assert!(pure_state_extensions(&t, &half, tol).is_err());
}

#[test]
fn reports_are_deterministic() {
    let s = golden("lambda_1_3");
    let checks = [CheckId::KCertificate, CheckId::Sandwich, CheckId::Kadison];
    assert_eq!(run(&s, &checks).to_json(), run(&s, &checks).to_json());
}

#[test]
fn batch_orders_by_name() {
    let ss = vec![golden("lambda_1_3"), golden("ex1"), golden("circle_n3")];
    let b = run_batch(&ss, Some(&[CheckId::Sandwich]), RunOptions::for_scenario);
    let names: Vec<&str> = b.reports.iter().map(|r| r.scenario.as_str()).collect();
    assert_eq!(names, ["circle_n3", "ex1", "lambda_1_3"]);
    assert_eq!(b.status, Status::Pass);
}

#[test]
fn aggregate_rules() {
    use Status::*;
    assert_eq!(aggregate([Pass, Skipped]), Pass);
    assert_eq!(aggregate([Pass, InfiniteIndex, Skipped]), InfiniteIndex);
    assert_eq!(aggregate([InfiniteIndex, Fail]), Fail);
}
