//! Seeded generator of coupled platform export, SoR dump and report
//! claims, with injected inconsistencies and their ground truth.
//!
//! Without injections the dump is the faithful filing of the export and
//! every claim is an exact aggregate of the dump. Each injection perturbs
//! exactly one artifact and adds exactly one ground-truth entry. Injection
//! counts are `round_half_up(rate × moderated events)`, never sampled.

mod bulk;

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, Utc};
use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aggregate::{Period, PeriodField, Predicate};
use crate::claims::{parse_reported_value, Claim, ClaimSet, ExactValue, Metric};
use crate::crosscheck::{tolerance_bound_exact, FindingKind, ToleranceSpec};
use crate::sor_model::{
    AutomatedDecision, CategoryCode, CategoryTaxonomy, ContentType, SorRecord, SourceType, SOR_COLUMNS,
};
use crate::timefmt;
use crate::verify::{
    marker_token, reconstruct_event, KeywordClassifier, ModerationEvent, ReconstructedSor, VerificationKind,
    VisibilityStatus, DEFAULT_DEADLINE_DAYS, EXPORT_COLUMNS,
};

pub use bulk::{write_bulk_corpus, BulkConfig, BulkCorpus};

/// Claim id of the fully-automated share claim.
pub const SHARE_FULLY_CLAIM: &str = "share-fully-automated";
/// Claim id of the all-records count claim.
pub const TOTAL_CLAIM: &str = "total";

/// Claim id of the per-category count claim for `code`.
pub fn category_claim_id(code: &CategoryCode) -> String {
    format!("category-{code}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    /// Added to the true value; share deltas are fractions.
    Delta(f64),
    Factor(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimPerturbation {
    pub claim_id: String,
    #[serde(flatten)]
    pub change: Perturbation,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InjectionSpec {
    pub drop_sor_rate: f64,
    pub phantom_sor_rate: f64,
    pub flip_automation_rate: f64,
    pub shift_category_rate: f64,
    pub late_filing_rate: f64,
    pub claim_perturbations: Vec<ClaimPerturbation>,
    /// File every SoR without its puid.
    pub strip_puid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub platform: String,
    pub window: Period,
    /// Number of export events.
    pub volume: u64,
    pub category_mix: BTreeMap<String, f64>,
    pub automation_mix: BTreeMap<AutomatedDecision, f64>,
    #[serde(default = "default_visibility_mix")]
    pub visibility_mix: BTreeMap<VisibilityStatus, f64>,
    #[serde(default = "default_content_type_mix")]
    pub content_type_mix: BTreeMap<ContentType, f64>,
    #[serde(default)]
    pub injections: InjectionSpec,
}

fn default_visibility_mix() -> BTreeMap<VisibilityStatus, f64> {
    [(VisibilityStatus::Removed, 0.7), (VisibilityStatus::Disabled, 0.2), (VisibilityStatus::Demoted, 0.1)].into()
}

fn default_content_type_mix() -> BTreeMap<ContentType, f64> {
    [(ContentType::Text, 0.6), (ContentType::Image, 0.25), (ContentType::Video, 0.15)].into()
}

impl ScenarioConfig {
    /// A clean scenario over the reference taxonomy: every category equally
    /// likely, a quarter of the year 2024 as window.
    pub fn baseline(seed: u64, volume: u64) -> Self {
        let taxonomy = CategoryTaxonomy::reference();
        ScenarioConfig {
            seed,
            platform: "SynthPlatform".into(),
            window: Period::new(
                timefmt::parse_date("2024-01-01").expect("literal"),
                timefmt::parse_date("2024-04-01").expect("literal"),
                PeriodField::ApplicationDate,
            )
            .expect("literal"),
            volume,
            category_mix: taxonomy.codes().iter().map(|c| (c.to_string(), 1.0)).collect(),
            automation_mix: [
                (AutomatedDecision::Fully, 0.6),
                (AutomatedDecision::Partially, 0.1),
                (AutomatedDecision::NotAutomated, 0.3),
            ]
            .into(),
            visibility_mix: default_visibility_mix(),
            content_type_mix: default_content_type_mix(),
            injections: InjectionSpec::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        serde_json::from_str(text).map_err(|e| SynthError::Config(e.to_string()))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SynthError + '_ {
    move |source| SynthError::Io { path: path.display().to_string(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> SynthError + '_ {
    move |e| SynthError::Io { path: path.display().to_string(), source: io::Error::other(e) }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExpectedClaimFinding {
    pub claim_id: String,
    pub kind: FindingKind,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ExpectedVerificationFinding {
    pub kind: VerificationKind,
    pub content_id: Option<String>,
    pub sor_uuid: Option<String>,
}

/// Every injected fault, as the finding an auditor should report.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub crosscheck: Vec<ExpectedClaimFinding>,
    pub verification: Vec<ExpectedVerificationFinding>,
}

/// A generated scenario held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub taxonomy: CategoryTaxonomy,
    pub events: Vec<ModerationEvent>,
    /// The dump as filed, injections applied, ordered by uuid.
    pub sors: Vec<SorRecord>,
    pub claims: ClaimSet,
    pub ground_truth: GroundTruth,
}

/// Paths of a scenario written by [`Scenario::write`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScenarioFiles {
    pub export: PathBuf,
    pub dump_dir: PathBuf,
    pub claims: PathBuf,
    pub ground_truth: PathBuf,
    pub taxonomy: PathBuf,
}

pub const DUMP_ROWS_PER_FILE: usize = 50_000;

fn round_half_up(rate: f64, n: usize) -> usize {
    let exact = ExactValue::from_decimal_f64(rate).expect("validated rate").mul(&ExactValue::from_integer(n as u64));
    exact.round_half_up().try_into().expect("count fits usize")
}

fn weighted<T: Clone>(name: &str, mix: &[(T, f64)]) -> Result<(Vec<T>, WeightedIndex<f64>), SynthError> {
    if mix.iter().any(|(_, w)| !w.is_finite() || *w < 0.0) {
        return Err(SynthError::Config(format!("{name} weights must be non-negative numbers")));
    }
    let index = WeightedIndex::new(mix.iter().map(|(_, w)| *w))
        .map_err(|_| SynthError::Config(format!("{name} weights must sum to more than zero")))?;
    Ok((mix.iter().map(|(t, _)| t.clone()).collect(), index))
}

fn uuid(rng: &mut ChaCha8Rng) -> String {
    let x: u128 = rng.gen();
    let h = format!("{x:032x}");
    format!("{}-{}-4{}-{}-{}", &h[..8], &h[8..12], &h[13..16], &h[16..20], &h[20..32])
}

fn random_instant(rng: &mut ChaCha8Rng, window: &Period) -> DateTime<Utc> {
    let span = (window.end() - window.start()).num_seconds();
    timefmt::start_of(window.start()) + Duration::seconds(rng.gen_range(0..span))
}

const SOURCE_TYPES: [SourceType; 3] = [SourceType::VoluntaryInitiative, SourceType::Article16Notice, SourceType::TrustedFlagger];

fn share_text(matched: u64, total: u64) -> String {
    // percent with two decimals, rounded half-up: round(10000·m/t) hundredths
    let hundredths = (20_000 * u128::from(matched) + u128::from(total)) / (2 * u128::from(total));
    format!("{}.{:02}%", hundredths / 100, hundredths % 100)
}

/// Builds the scenario described by `config`.
pub fn generate(config: &ScenarioConfig) -> Result<Scenario, SynthError> {
    let taxonomy = CategoryTaxonomy::reference();
    let inj = &config.injections;
    let rates = [
        ("drop_sor_rate", inj.drop_sor_rate),
        ("phantom_sor_rate", inj.phantom_sor_rate),
        ("flip_automation_rate", inj.flip_automation_rate),
        ("shift_category_rate", inj.shift_category_rate),
        ("late_filing_rate", inj.late_filing_rate),
    ];
    for (name, r) in rates {
        if !(0.0..=1.0).contains(&r) {
            return Err(SynthError::Config(format!("{name} must lie in [0, 1], got {r}")));
        }
    }
    if config.platform.is_empty() {
        return Err(SynthError::Config("platform must not be empty".into()));
    }
    let mut category_mix = Vec::new();
    for (label, w) in &config.category_mix {
        let code = taxonomy
            .code(label)
            .ok_or_else(|| SynthError::Config(format!("category `{label}` is not a taxonomy code")))?;
        category_mix.push((code.clone(), *w));
    }
    let (categories, category_dist) = weighted("category_mix", &category_mix)?;
    let (automations, automation_dist) =
        weighted("automation_mix", &config.automation_mix.iter().map(|(k, v)| (*k, *v)).collect::<Vec<_>>())?;
    let (visibilities, visibility_dist) =
        weighted("visibility_mix", &config.visibility_mix.iter().map(|(k, v)| (*k, *v)).collect::<Vec<_>>())?;
    let (content_types, content_type_dist) =
        weighted("content_type_mix", &config.content_type_mix.iter().map(|(k, v)| (*k, *v)).collect::<Vec<_>>())?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut events = Vec::with_capacity(config.volume as usize);
    for i in 0..config.volume {
        let category = categories[category_dist.sample(&mut rng)].clone();
        let automated_decision = automations[automation_dist.sample(&mut rng)];
        let moderated_at = random_instant(&mut rng, &config.window);
        let age = Duration::days(rng.gen_range(0..30));
        let payload = if rng.gen_bool(0.05) {
            None
        } else if category.as_str() == CategoryCode::OTHER {
            Some(format!("post {i} nothing to see"))
        } else {
            Some(format!("post {i} {} lorem ipsum", marker_token(&category)))
        };
        events.push(ModerationEvent {
            content_id: format!("c{i:07}"),
            puid: Some(format!("puid-{:016x}-{i:07}", config.seed)),
            content_type: content_types[content_type_dist.sample(&mut rng)],
            content_created: moderated_at.date_naive() - age,
            moderated_at,
            visibility_status: visibilities[visibility_dist.sample(&mut rng)],
            platform_categories: vec![category],
            automated_detection: automated_decision != AutomatedDecision::NotAutomated || rng.gen_bool(0.3),
            automated_decision,
            annotations: Vec::new(),
            payload,
        });
    }

    let classifier = KeywordClassifier::markers(&taxonomy);
    let reconstructed: Vec<ReconstructedSor> =
        events.iter().filter_map(|e| reconstruct_event(e, &classifier)).collect();
    let mut sors: Vec<SorRecord> = reconstructed
        .iter()
        .map(|r| {
            let lag = Duration::seconds(rng.gen_range(0..3 * 86_400));
            let source = *SOURCE_TYPES.choose(&mut rng).expect("non-empty");
            r.to_filed(uuid(&mut rng), config.platform.clone(), r.moderated_at + lag, source)
        })
        .collect();

    let moderated = sors.len();
    let counts = [
        round_half_up(inj.drop_sor_rate, moderated),
        round_half_up(inj.flip_automation_rate, moderated),
        round_half_up(inj.shift_category_rate, moderated),
        round_half_up(inj.late_filing_rate, moderated),
    ];
    if counts.iter().sum::<usize>() > moderated {
        return Err(SynthError::Config(format!(
            "drop, flip, shift and late injections need {} distinct SoRs but only {moderated} exist",
            counts.iter().sum::<usize>()
        )));
    }
    let mut order: Vec<usize> = (0..moderated).collect();
    order.shuffle(&mut rng);
    let mut targets = order.into_iter();
    let mut take = |n: usize| targets.by_ref().take(n).collect::<Vec<_>>();
    let (drop, flip, shift, late) = (take(counts[0]), take(counts[1]), take(counts[2]), take(counts[3]));

    let mut truth = GroundTruth::default();
    let pair_truth = |kind, i: usize, sors: &[SorRecord]| ExpectedVerificationFinding {
        kind,
        content_id: Some(reconstructed[i].content_id.clone()),
        sor_uuid: Some(sors[i].uuid.clone()),
    };
    for &i in &flip {
        sors[i].automated_decision = match sors[i].automated_decision {
            AutomatedDecision::NotAutomated => AutomatedDecision::Fully,
            _ => AutomatedDecision::NotAutomated,
        };
        truth.verification.push(pair_truth(VerificationKind::FieldMismatch, i, &sors));
    }
    let codes = taxonomy.codes();
    for &i in &shift {
        let at = codes.iter().position(|c| *c == sors[i].category).expect("taxonomy code");
        sors[i].category = codes[(at + 1) % codes.len()].clone();
        truth.verification.push(pair_truth(VerificationKind::FieldMismatch, i, &sors));
    }
    for &i in &late {
        let extra = Duration::seconds(rng.gen_range(0..86_400));
        sors[i].created_at = reconstructed[i].moderated_at + Duration::days(DEFAULT_DEADLINE_DAYS + 1) + extra;
        truth.verification.push(pair_truth(VerificationKind::LateSubmission, i, &sors));
    }
    for &i in &drop {
        truth.verification.push(ExpectedVerificationFinding {
            kind: VerificationKind::OmittedSor,
            content_id: Some(reconstructed[i].content_id.clone()),
            sor_uuid: None,
        });
    }
    let dropped: std::collections::HashSet<usize> = drop.into_iter().collect();
    let mut sors: Vec<SorRecord> =
        sors.into_iter().enumerate().filter(|(i, _)| !dropped.contains(i)).map(|(_, s)| s).collect();

    for p in 0..round_half_up(inj.phantom_sor_rate, moderated) {
        let application = random_instant(&mut rng, &config.window);
        let ghost = ReconstructedSor {
            content_id: String::new(),
            puid: Some(format!("phantom-{:016x}-{p:07}", config.seed)),
            decision_type: crate::sor_model::DecisionType::VisibilityRemoval,
            decision_ground: crate::sor_model::DecisionGround::IncompatibleWithTerms,
            category: categories[category_dist.sample(&mut rng)].clone(),
            content_type: content_types[content_type_dist.sample(&mut rng)],
            automated_detection: true,
            automated_decision: automations[automation_dist.sample(&mut rng)],
            content_date: application.date_naive(),
            application_date: application.date_naive(),
            moderated_at: application,
            classification: crate::verify::Classification::Unclassifiable("phantom".into()),
            category_source: crate::verify::CategorySource::Default,
        };
        let sor = ghost.to_filed(uuid(&mut rng), config.platform.clone(), application + Duration::hours(1), SourceType::VoluntaryInitiative);
        truth.verification.push(ExpectedVerificationFinding {
            kind: VerificationKind::PhantomSor,
            content_id: None,
            sor_uuid: Some(sor.uuid.clone()),
        });
        sors.push(sor);
    }
    if inj.strip_puid {
        for s in &mut sors {
            s.puid = None;
        }
    }
    sors.sort_by(|a, b| a.uuid.cmp(&b.uuid));

    let mut claims = report_claims(config, &taxonomy, &sors);
    for p in &inj.claim_perturbations {
        let claim = claims
            .claims
            .iter_mut()
            .find(|c| c.claim_id == p.claim_id)
            .ok_or_else(|| SynthError::Config(format!("perturbed claim `{}` does not exist", p.claim_id)))?;
        let kind = perturb(claim, &p.change)?;
        truth.crosscheck.push(ExpectedClaimFinding { claim_id: claim.claim_id.clone(), kind });
    }

    truth.crosscheck.sort();
    truth.verification.sort();
    Ok(Scenario { config: config.clone(), taxonomy, events, sors, claims, ground_truth: truth })
}

fn claim(config: &ScenarioConfig, id: String, metric: Metric, predicate: Predicate, denominator: Option<Predicate>, text: String, row: usize) -> Claim {
    Claim {
        claim_id: id,
        platform_name: config.platform.clone(),
        metric,
        predicate,
        denominator_predicate: denominator,
        period: config.window,
        reported: parse_reported_value(&text, metric).expect("generated numbers parse"),
        source_locator: format!("synthetic-report.html#table[0]/row[{row}]"),
    }
}

/// Exact aggregates of `sors` in the report's own words: plain integer
/// counts and two-decimal percentages.
fn report_claims(config: &ScenarioConfig, taxonomy: &CategoryTaxonomy, sors: &[SorRecord]) -> ClaimSet {
    let in_scope: Vec<&SorRecord> = sors
        .iter()
        .filter(|s| s.platform_name == config.platform && config.window.contains_date(s.application_date))
        .collect();
    let total = in_scope.len() as u64;
    let mut claims = vec![claim(config, TOTAL_CLAIM.into(), Metric::Count, Predicate::always(), None, total.to_string(), 1)];
    for (i, code) in taxonomy.codes().iter().enumerate() {
        let n = in_scope.iter().filter(|s| s.category == *code).count();
        let predicate = Predicate::new(vec![crate::aggregate::Condition::Category(vec![code.to_string()])]).expect("one conjunct");
        claims.push(claim(config, category_claim_id(code), Metric::Count, predicate, None, n.to_string(), i + 2));
    }
    if total > 0 {
        let fully = in_scope.iter().filter(|s| s.automated_decision == AutomatedDecision::Fully).count() as u64;
        let predicate = Predicate::new(vec![crate::aggregate::Condition::AutomatedDecision(vec![AutomatedDecision::Fully])])
            .expect("one conjunct");
        let row = claims.len() + 1;
        claims.push(claim(config, SHARE_FULLY_CLAIM.into(), Metric::Share, predicate, Some(Predicate::always()), share_text(fully, total), row));
    }
    ClaimSet { platform: config.platform.clone(), exhaustive: true, claims }
}

/// Applies `change` to `claim` and returns the finding kind a cross-check
/// must produce for it.
fn perturb(claim: &mut Claim, change: &Perturbation) -> Result<FindingKind, SynthError> {
    let bad = |msg: String| SynthError::Config(format!("perturbation of `{}`: {msg}", claim.claim_id));
    let original = claim.reported.value.clone();
    let amount = match change {
        Perturbation::Delta(d) | Perturbation::Factor(d) => *d,
    };
    if !amount.is_finite() {
        return Err(bad("amount must be finite".into()));
    }
    let magnitude = ExactValue::from_decimal_f64(amount.abs()).expect("finite");
    let new_value = match change {
        Perturbation::Factor(f) => {
            if original.is_zero() {
                return Err(bad("a factor cannot move a zero value".into()));
            }
            if *f < 0.0 {
                return Err(bad("factor must not be negative".into()));
            }
            original.mul(&magnitude)
        }
        Perturbation::Delta(d) if *d >= 0.0 => original.add(&magnitude),
        Perturbation::Delta(_) => {
            if magnitude > original {
                return Err(bad("delta would make the value negative".into()));
            }
            original.abs_diff(&magnitude)
        }
    };
    let text = match claim.metric {
        Metric::Count => new_value.round_half_up().to_string(),
        Metric::Share => {
            if new_value > ExactValue::from_integer(1) {
                return Err(bad("share would exceed 1".into()));
            }
            let hundredths = new_value.mul(&ExactValue::from_integer(10_000)).round_half_up();
            let h: u128 = hundredths.try_into().map_err(|_| bad("share out of range".into()))?;
            format!("{}.{:02}%", h / 100, h % 100)
        }
    };
    let reported = parse_reported_value(&text, claim.metric).map_err(|e| bad(e.to_string()))?;
    let bound = tolerance_bound_exact(&reported.value, reported.precision, &ToleranceSpec::default());
    if reported.value.abs_diff(&original) <= bound {
        return Err(bad(format!("`{text}` stays within the tolerance of the true value {original}")));
    }
    let kind = if claim.metric == Metric::Count && original.is_zero() {
        FindingKind::MissingInDb
    } else {
        FindingKind::Mismatch
    };
    claim.reported = reported;
    Ok(kind)
}

/// Writes SoRs as dump part files of at most `rows_per_file` rows.
pub fn write_dump(dir: &Path, sors: &[SorRecord], rows_per_file: usize) -> Result<Vec<PathBuf>, SynthError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut paths = Vec::new();
    let chunks: Vec<&[SorRecord]> = if sors.is_empty() { vec![&[]] } else { sors.chunks(rows_per_file.max(1)).collect() };
    for (n, chunk) in chunks.into_iter().enumerate() {
        let path = dir.join(format!("part-{n:04}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
        w.write_record(SOR_COLUMNS).map_err(csv_err(&path))?;
        for s in chunk {
            w.write_record(s.to_row()).map_err(csv_err(&path))?;
        }
        w.flush().map_err(io_err(&path))?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn write_export(path: &Path, events: &[ModerationEvent]) -> Result<(), SynthError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(EXPORT_COLUMNS).map_err(csv_err(path))?;
    for e in events {
        w.write_record(e.to_row()).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), SynthError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

impl Scenario {
    /// Writes `export.csv`, `dump/`, `claims.json`, `ground_truth.json`
    /// and `taxonomy.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<ScenarioFiles, SynthError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let files = ScenarioFiles {
            export: dir.join("export.csv"),
            dump_dir: dir.join("dump"),
            claims: dir.join("claims.json"),
            ground_truth: dir.join("ground_truth.json"),
            taxonomy: dir.join("taxonomy.json"),
        };
        write_export(&files.export, &self.events)?;
        if files.dump_dir.exists() {
            for old in fs::read_dir(&files.dump_dir).map_err(io_err(&files.dump_dir))? {
                let old = old.map_err(io_err(&files.dump_dir))?.path();
                if old.extension().is_some_and(|e| e == "csv") {
                    fs::remove_file(&old).map_err(io_err(&old))?;
                }
            }
        }
        write_dump(&files.dump_dir, &self.sors, DUMP_ROWS_PER_FILE)?;
        fs::write(&files.claims, self.claims.to_json_string()).map_err(io_err(&files.claims))?;
        write_json(&files.ground_truth, &self.ground_truth)?;
        write_json(&files.taxonomy, &self.taxonomy.to_file())?;
        Ok(files)
    }
}

#[cfg(test)]
mod tests;
