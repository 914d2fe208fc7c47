//! Large SoR corpora written row by row, for throughput and memory runs.

use std::path::{Path, PathBuf};

use chrono::Duration;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{category_claim_id, claim, csv_err, io_err, share_text, ScenarioConfig, SynthError, SHARE_FULLY_CLAIM, TOTAL_CLAIM};
use crate::aggregate::{Condition, Predicate};
use crate::claims::{ClaimSet, Metric};
use crate::sor_model::{
    AutomatedDecision, CategoryTaxonomy, ContentType, DecisionGround, DecisionType, SorRecord, SourceType, SOR_COLUMNS,
};
use crate::timefmt;

#[derive(Debug, Clone, PartialEq)]
pub struct BulkConfig {
    pub seed: u64,
    pub rows: u64,
    pub rows_per_file: u64,
    /// Platform, window and category set; mixes are ignored.
    pub scenario: ScenarioConfig,
}

impl BulkConfig {
    pub fn new(seed: u64, rows: u64) -> Self {
        BulkConfig { seed, rows, rows_per_file: 100_000, scenario: ScenarioConfig::baseline(seed, 0) }
    }
}

/// A written corpus and twenty claims that hold exactly on it.
#[derive(Debug, Clone, PartialEq)]
pub struct BulkCorpus {
    pub files: Vec<PathBuf>,
    pub rows: u64,
    pub claims: ClaimSet,
}

fn decision_claim_id(d: DecisionType) -> String {
    format!("decision-{}", d.to_string().to_ascii_lowercase())
}

/// Writes `config.rows` valid SoRs under `dir` as `part-NNNN.csv` files.
/// A few rows fall outside the window so the period filter has work.
pub fn write_bulk_corpus(dir: &Path, config: &BulkConfig) -> Result<BulkCorpus, SynthError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let taxonomy = CategoryTaxonomy::reference();
    let codes = taxonomy.codes();
    let scenario = &config.scenario;
    let window = scenario.window;
    let span_days = (window.end() - window.start()).num_days();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut total = 0u64;
    let mut per_category = vec![0u64; codes.len()];
    let mut per_decision = vec![0u64; DecisionType::ALL.len()];
    let mut fully = 0u64;

    let mut files: Vec<PathBuf> = Vec::new();
    let mut writer: Option<csv::Writer<std::fs::File>> = None;
    let per_file = config.rows_per_file.max(1);
    for i in 0..config.rows {
        if i % per_file == 0 {
            if let Some(mut w) = writer.take() {
                w.flush().map_err(io_err(files.last().expect("open file").as_path()))?;
            }
            let path = dir.join(format!("part-{:04}.csv", files.len()));
            let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
            w.write_record(SOR_COLUMNS).map_err(csv_err(&path))?;
            files.push(path);
            writer = Some(w);
        }
        let c = rng.gen_range(0..codes.len());
        let d = rng.gen_range(0..DecisionType::ALL.len());
        let decision_type = DecisionType::ALL[d];
        let automated_decision = AutomatedDecision::ALL[rng.gen_range(0..AutomatedDecision::ALL.len())];
        let day = rng.gen_range(-2..span_days + 2);
        let application_date = window.start() + Duration::days(day);
        let in_window = window.contains_date(application_date);
        let record = SorRecord {
            uuid: format!("{:08x}-0000-4000-8000-{i:012x}", config.seed as u32),
            platform_name: scenario.platform.clone(),
            decision_type,
            decision_type_other: (decision_type == DecisionType::Other).then(|| "unspecified".into()),
            decision_ground: DecisionGround::IncompatibleWithTerms,
            decision_ground_reference_url: None,
            illegal_content_explanation: None,
            category: codes[c].clone(),
            content_type: [ContentType::Text, ContentType::Image, ContentType::Video][rng.gen_range(0..3)],
            content_type_other: None,
            automated_detection: rng.gen_bool(0.7),
            automated_decision,
            source_type: SourceType::VoluntaryInitiative,
            content_date: application_date - Duration::days(rng.gen_range(0..10)),
            application_date,
            created_at: timefmt::start_of(application_date) + Duration::seconds(rng.gen_range(0..86_400)),
            puid: Some(format!("bulk-{i}")),
        };
        if in_window {
            total += 1;
            per_category[c] += 1;
            per_decision[d] += 1;
            fully += u64::from(automated_decision == AutomatedDecision::Fully);
        }
        let path = files.last().expect("open file");
        writer.as_mut().expect("open writer").write_record(record.to_row()).map_err(csv_err(path.as_path()))?;
    }
    if let Some(mut w) = writer.take() {
        w.flush().map_err(io_err(files.last().expect("open file").as_path()))?;
    }

    let mut claims = vec![claim(scenario, TOTAL_CLAIM.into(), Metric::Count, Predicate::always(), None, total.to_string(), 1)];
    for (code, n) in codes.iter().zip(&per_category) {
        let p = Predicate::new(vec![Condition::Category(vec![code.to_string()])]).expect("one conjunct");
        let row = claims.len() + 1;
        claims.push(claim(scenario, category_claim_id(code), Metric::Count, p, None, n.to_string(), row));
    }
    for (d, n) in DecisionType::ALL.iter().zip(&per_decision) {
        let p = Predicate::new(vec![Condition::DecisionType(vec![*d])]).expect("one conjunct");
        let row = claims.len() + 1;
        claims.push(claim(scenario, decision_claim_id(*d), Metric::Count, p, None, n.to_string(), row));
    }
    if total > 0 {
        let p = Predicate::new(vec![Condition::AutomatedDecision(vec![AutomatedDecision::Fully])]).expect("one conjunct");
        let row = claims.len() + 1;
        claims.push(claim(scenario, SHARE_FULLY_CLAIM.into(), Metric::Share, p, Some(Predicate::always()), share_text(fully, total), row));
    }
    Ok(BulkCorpus {
        files,
        rows: config.rows,
        claims: ClaimSet { platform: scenario.platform.clone(), exhaustive: false, claims },
    })
}
