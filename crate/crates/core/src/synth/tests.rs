use std::collections::BTreeSet;

use super::*;
use crate::aggregate::replicate_all;
use crate::crosscheck::{cross_check, CrossCheckConfig};
use crate::ingest::{open_corpus, open_platform_export, QuarantineRecord};
use crate::verify::{verify_window, VerifyConfig};

fn injected(seed: u64, volume: u64) -> ScenarioConfig {
    let mut c = ScenarioConfig::baseline(seed, volume);
    c.injections = InjectionSpec {
        drop_sor_rate: 0.05,
        phantom_sor_rate: 0.02,
        flip_automation_rate: 0.03,
        shift_category_rate: 0.02,
        late_filing_rate: 0.01,
        claim_perturbations: vec![
            ClaimPerturbation { claim_id: "category-spam".into(), change: Perturbation::Factor(1.5) },
            ClaimPerturbation { claim_id: SHARE_FULLY_CLAIM.into(), change: Perturbation::Delta(-0.2) },
        ],
        strip_puid: false,
    };
    c
}

fn kinds_of(findings: &[crate::verify::VerificationFinding]) -> BTreeSet<ExpectedVerificationFinding> {
    findings
        .iter()
        .filter(|f| f.kind != VerificationKind::Consistent)
        .map(|f| ExpectedVerificationFinding { kind: f.kind, content_id: f.content_id.clone(), sor_uuid: f.sor_uuid.clone() })
        .collect()
}

#[test]
fn same_seed_same_scenario() {
    let a = generate(&injected(7, 500)).unwrap();
    let b = generate(&injected(7, 500)).unwrap();
    assert_eq!(a, b);
    let c = generate(&injected(8, 500)).unwrap();
    assert_ne!(a.sors, c.sors);
}

#[test]
fn written_artifacts_ingest_cleanly_and_identically() {
    let s = generate(&injected(3, 800)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = s.write(dir.path()).unwrap();
    let tax = CategoryTaxonomy::load(&files.taxonomy).unwrap();

    let mut q: Vec<QuarantineRecord> = Vec::new();
    let sors: Vec<SorRecord> = open_corpus(&files.dump_dir, &tax, &mut q).unwrap().map(Result::unwrap).collect();
    let events: Vec<ModerationEvent> =
        open_platform_export(&files.export, &tax, &mut q).unwrap().map(Result::unwrap).collect();
    assert!(q.is_empty(), "{q:?}");
    assert_eq!(sors, s.sors);
    assert_eq!(events, s.events);
    assert_eq!(crate::claims::load_claims(&files.claims).unwrap(), s.claims);
    let truth: GroundTruth = serde_json::from_str(&fs::read_to_string(&files.ground_truth).unwrap()).unwrap();
    assert_eq!(truth, s.ground_truth);
}

#[test]
fn injection_counts_are_exact() {
    let s = generate(&injected(11, 2000)).unwrap();
    let moderated = s.events.iter().filter(|e| e.is_moderated()).count();
    let count = |k| s.ground_truth.verification.iter().filter(|f| f.kind == k).count();
    let expect = |rate: f64| (rate * moderated as f64).round() as usize;
    assert_eq!(count(VerificationKind::OmittedSor), expect(0.05));
    assert_eq!(count(VerificationKind::PhantomSor), expect(0.02));
    assert_eq!(count(VerificationKind::FieldMismatch), expect(0.03) + expect(0.02));
    assert_eq!(count(VerificationKind::LateSubmission), expect(0.01));
    assert_eq!(s.sors.len(), moderated - expect(0.05) + expect(0.02));
    assert_eq!(s.ground_truth.crosscheck.len(), 2);
}

#[test]
fn clean_scenario_has_no_faults() {
    let s = generate(&ScenarioConfig::baseline(5, 1500)).unwrap();
    assert_eq!(s.ground_truth, GroundTruth::default());

    let rep = replicate_all(&s.claims, s.sors.iter().cloned(), &s.taxonomy).unwrap();
    let findings = cross_check(&s.claims, &rep, &CrossCheckConfig::default()).unwrap();
    assert!(findings.iter().all(|f| f.kind == FindingKind::Match), "{findings:?}");
    assert_eq!(findings.len(), s.claims.claims.len());

    let classifier = KeywordClassifier::markers(&s.taxonomy);
    let out = verify_window(s.events.clone(), s.sors.clone(), &classifier, &s.config.window, &VerifyConfig::default()).unwrap();
    assert!(out.findings.iter().all(|f| f.kind == VerificationKind::Consistent));
    assert_eq!(out.findings.len(), s.sors.len());
}

#[test]
fn auditors_recover_the_ground_truth() {
    let s = generate(&injected(21, 1500)).unwrap();
    let rep = replicate_all(&s.claims, s.sors.iter().cloned(), &s.taxonomy).unwrap();
    let got: BTreeSet<ExpectedClaimFinding> = cross_check(&s.claims, &rep, &CrossCheckConfig::default())
        .unwrap()
        .into_iter()
        .filter(|f| f.kind != FindingKind::Match)
        .map(|f| ExpectedClaimFinding { claim_id: f.claim_id.expect("claim finding"), kind: f.kind })
        .collect();
    assert_eq!(got, s.ground_truth.crosscheck.iter().cloned().collect());

    let classifier = KeywordClassifier::markers(&s.taxonomy);
    let out = verify_window(s.events.clone(), s.sors.clone(), &classifier, &s.config.window, &VerifyConfig::default()).unwrap();
    assert_eq!(kinds_of(&out.findings), s.ground_truth.verification.iter().cloned().collect());
}

#[test]
fn perturbing_a_zero_count_is_missing_in_db() {
    let mut c = ScenarioConfig::baseline(2, 300);
    c.category_mix.insert("child_safety".into(), 0.0);
    c.injections.claim_perturbations =
        vec![ClaimPerturbation { claim_id: "category-child_safety".into(), change: Perturbation::Delta(40.0) }];
    let s = generate(&c).unwrap();
    assert_eq!(
        s.ground_truth.crosscheck,
        [ExpectedClaimFinding { claim_id: "category-child_safety".into(), kind: FindingKind::MissingInDb }]
    );
}

#[test]
fn invalid_configs_are_rejected() {
    let mut c = ScenarioConfig::baseline(1, 100);
    c.injections.drop_sor_rate = 1.5;
    assert!(matches!(generate(&c), Err(SynthError::Config(_))));

    let mut c = ScenarioConfig::baseline(1, 100);
    c.injections.drop_sor_rate = 0.6;
    c.injections.flip_automation_rate = 0.6;
    assert!(matches!(generate(&c), Err(SynthError::Config(_))));

    let mut c = ScenarioConfig::baseline(1, 100);
    c.injections.claim_perturbations = vec![ClaimPerturbation { claim_id: "nope".into(), change: Perturbation::Delta(1.0) }];
    assert!(matches!(generate(&c), Err(SynthError::Config(_))));

    let mut c = ScenarioConfig::baseline(1, 1000);
    c.injections.claim_perturbations = vec![ClaimPerturbation { claim_id: TOTAL_CLAIM.into(), change: Perturbation::Factor(1.0) }];
    assert!(matches!(generate(&c), Err(SynthError::Config(_))));

    let mut c = ScenarioConfig::baseline(1, 100);
    c.category_mix.insert("not_a_code".into(), 1.0);
    assert!(matches!(generate(&c), Err(SynthError::Config(_))));
}

#[test]
fn scenario_config_json_round_trip() {
    let c = injected(4, 10);
    let text = serde_json::to_string(&c).unwrap();
    assert_eq!(ScenarioConfig::from_json(&text).unwrap(), c);
    assert!(text.contains("\"factor\":1.5"));
}

#[test]
fn bulk_claims_hold_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = BulkConfig::new(9, 5000);
    cfg.rows_per_file = 1200;
    let bulk = write_bulk_corpus(dir.path(), &cfg).unwrap();
    assert_eq!(bulk.files.len(), 5);
    assert_eq!(bulk.claims.claims.len(), 20);
    let tax = CategoryTaxonomy::reference();
    let mut q: Vec<QuarantineRecord> = Vec::new();
    let sors: Vec<SorRecord> = open_corpus(dir.path(), &tax, &mut q).unwrap().map(Result::unwrap).collect();
    assert!(q.is_empty());
    assert_eq!(sors.len(), 5000);
    let rep = replicate_all(&bulk.claims, sors, &tax).unwrap();
    let findings = cross_check(&bulk.claims, &rep, &CrossCheckConfig::default()).unwrap();
    assert!(findings.iter().all(|f| f.kind == FindingKind::Match), "{findings:?}");
}
