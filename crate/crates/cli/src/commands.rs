use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sor_audit::aggregate::{Period, PeriodField, ReplicationPlan};
use sor_audit::claims::{extract_html_claims, load_claims, ClaimSet, ExtractError, ExtractionMapping};
use sor_audit::crosscheck::{cross_check, emit_report, Finding};
use sor_audit::ingest::{
    list_corpus_files, open_corpus, open_platform_export, par_fold_corpus, CorpusManifest, CorpusReader,
    IngestError, JsonLinesQuarantine, QuarantineSink,
};
use sor_audit::report::{render, ReportFormat, Severity};
use sor_audit::sor_model::{CategoryTaxonomy, ProfileAccumulator, SorRecord};
use sor_audit::synth::{generate, write_bulk_corpus, BulkConfig, ScenarioConfig, SynthError};
use sor_audit::timefmt;
use sor_audit::verify::{
    emit_verification_report, verify_window, KeywordClassifier, LinkMethod, VerificationFinding, NON_DERIVABLE_FIELDS,
};

use crate::args::Command;
use crate::config::{report_extension, Settings};
use crate::run::{Run, FINDINGS_FILE, MANIFEST_FILE, QUARANTINE_FILE};
use crate::{CliError, Outcome};

const DEFAULT_RUNS_DIR: &str = "runs";

type Quarantine = JsonLinesQuarantine<BufWriter<File>>;

fn ingest_err(e: IngestError) -> CliError {
    CliError::Input(e.to_string())
}

fn outcome(severities: impl IntoIterator<Item = Severity>, threshold: Severity) -> Outcome {
    if severities.into_iter().any(|s| s >= threshold) {
        Outcome::Findings
    } else {
        Outcome::Clean
    }
}

pub fn run(command: Command) -> Result<Outcome, CliError> {
    let settings = Settings::resolve(command.common())?;
    let out = command.common().out.clone();
    let name = command.name();
    match command {
        Command::Validate { corpus, export, .. } => validate(&settings, out, corpus, export),
        Command::Profile { corpus, .. } => profile(&settings, out, &corpus),
        Command::Replicate { corpus, claims, .. } => replicate(&settings, out, &corpus, &claims, false),
        Command::Crosscheck { corpus, claims, .. } => replicate(&settings, out, &corpus, &claims, true),
        Command::Verify { export, corpus, window, .. } => verify(&settings, out, &export, &corpus, window.as_deref()),
        Command::Synth { scenario, seed, volume, bulk_rows, .. } => {
            synth(out, scenario.as_deref(), seed, volume, bulk_rows)
        }
        Command::Report { findings, .. } => report(&settings, out, &findings),
        Command::Extract { html, mapping, .. } => extract(&settings, out, &html, &mapping),
    }
    .map_err(|e| match e {
        CliError::Usage(m) => CliError::Usage(format!("{name}: {m}")),
        CliError::Input(m) => CliError::Input(format!("{name}: {m}")),
    })
}

fn start_run(settings: &Settings, out: Option<PathBuf>, command: &str) -> Result<Run, CliError> {
    let parent = out.unwrap_or_else(|| PathBuf::from(DEFAULT_RUNS_DIR));
    let config = serde_json::to_value(settings).expect("serializable");
    let mut run = Run::create(&parent, command, config)?;
    if let Some(t) = settings.taxonomy_path() {
        run.input(t)?;
    }
    Ok(run)
}

fn open_quarantine(run: &Run) -> Result<Quarantine, CliError> {
    let path = run.path(QUARANTINE_FILE);
    let file = File::create(&path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(JsonLinesQuarantine::new(BufWriter::new(file)))
}

fn close_quarantine(run: &mut Run, q: Quarantine) -> Result<(), CliError> {
    let path = run.path(QUARANTINE_FILE);
    q.into_inner().flush().map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    run.register(path);
    Ok(())
}

/// Folds every valid record of a corpus, sequentially or on a pool of
/// `settings.parallel` threads; both give the same value, manifest and
/// quarantine log.
fn fold_corpus<A, I, F, M>(
    settings: &Settings,
    run: &mut Run,
    corpus: &Path,
    taxonomy: &CategoryTaxonomy,
    quarantine: &mut Quarantine,
    init: I,
    fold: F,
    merge: M,
) -> Result<(A, CorpusManifest), CliError>
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(&mut A, &SorRecord) + Sync + Send,
    M: Fn(&mut A, A) + Send,
{
    for file in list_corpus_files(corpus).map_err(ingest_err)? {
        run.input(&file)?;
    }
    if settings.parallel <= 1 {
        let mut stream: CorpusReader<'_, &mut Quarantine> = open_corpus(corpus, taxonomy, quarantine).map_err(ingest_err)?;
        let mut acc = init();
        for rec in stream.by_ref() {
            fold(&mut acc, &rec.map_err(ingest_err)?);
        }
        return Ok((acc, stream.finish().0));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.parallel)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} threads: {e}", settings.parallel)))?;
    let out = pool.install(|| par_fold_corpus(corpus, taxonomy, init, fold, merge)).map_err(ingest_err)?;
    for q in out.quarantine {
        quarantine.push(q).map_err(|e| CliError::Input(format!("{QUARANTINE_FILE}: {e}")))?;
    }
    Ok((out.value, out.manifest))
}

fn finish(run: Run) -> Result<(), CliError> {
    let dir = run.finish()?;
    println!("run: {}", dir.display());
    Ok(())
}

fn validate(
    settings: &Settings,
    out: Option<PathBuf>,
    corpus: Option<PathBuf>,
    export: Option<PathBuf>,
) -> Result<Outcome, CliError> {
    if corpus.is_none() && export.is_none() {
        return Err(CliError::Usage("give --corpus, --export or both".into()));
    }
    let taxonomy = settings.load_taxonomy()?;
    let mut run = start_run(settings, out, "validate")?;
    let mut quarantine = open_quarantine(&run)?;
    if let Some(dir) = &corpus {
        let ((), manifest) = fold_corpus(settings, &mut run, dir, &taxonomy, &mut quarantine, || (), |_, _| (), |_, _| ())?;
        println!("corpus: {} record(s), {} quarantined", manifest.record_count, manifest.quarantine_count);
        run.record.manifests.insert("corpus".into(), manifest);
    }
    if let Some(path) = &export {
        run.input(path)?;
        let mut stream = open_platform_export(path, &taxonomy, &mut quarantine).map_err(ingest_err)?;
        for ev in stream.by_ref() {
            ev.map_err(ingest_err)?;
        }
        let manifest = stream.finish().0;
        println!("export: {} event(s), {} quarantined", manifest.record_count, manifest.quarantine_count);
        run.record.manifests.insert("export".into(), manifest);
    }
    close_quarantine(&mut run, quarantine)?;
    let manifests = run.record.manifests.clone();
    run.write_json(MANIFEST_FILE, &manifests)?;
    let quarantined: u64 = manifests.values().map(|m| m.quarantine_count).sum();
    let warnings = std::iter::repeat(Severity::Warn).take(quarantined as usize);
    run.count(warnings.clone());
    let result = outcome(warnings, settings.severity_threshold);
    finish(run)?;
    Ok(result)
}

fn profile(settings: &Settings, out: Option<PathBuf>, corpus: &Path) -> Result<Outcome, CliError> {
    let taxonomy = settings.load_taxonomy()?;
    let mut run = start_run(settings, out, "profile")?;
    let mut quarantine = open_quarantine(&run)?;
    let (acc, manifest) = fold_corpus(
        settings,
        &mut run,
        corpus,
        &taxonomy,
        &mut quarantine,
        ProfileAccumulator::default,
        |acc, rec| acc.observe(rec),
        |into, other| into.merge(&other),
    )?;
    close_quarantine(&mut run, quarantine)?;
    let report = acc.report();
    run.write_json("profile.json", &report)?;
    run.write_json(MANIFEST_FILE, &manifest)?;
    run.record.manifests.insert("corpus".into(), manifest);
    println!("{} record(s)", report.records);
    for a in &report.attributes {
        let rate = a.fill_rate.map_or("n/a".to_string(), |r| format!("{:.2}%", r * 100.0));
        let name = serde_json::to_value(a.attribute).expect("serializable");
        println!("{}: {}/{} ({rate})", name.as_str().unwrap_or_default(), a.filled, a.applicable);
    }
    finish(run)?;
    Ok(Outcome::Clean)
}

fn read_claims(run: &mut Run, path: &Path) -> Result<ClaimSet, CliError> {
    run.input(path)?;
    load_claims(path).map_err(|e| CliError::Input(e.to_string()))
}

fn write_findings<T: sor_audit::report::ReportRow>(
    run: &mut Run,
    settings: &Settings,
    findings: &[T],
    emit: impl Fn(&[T], ReportFormat) -> String,
) -> Result<Outcome, CliError> {
    run.write(FINDINGS_FILE, emit(findings, ReportFormat::Json).as_bytes())?;
    if settings.report_format != ReportFormat::Json {
        let name = format!("findings.{}", report_extension(settings.report_format));
        run.write(&name, emit(findings, settings.report_format).as_bytes())?;
    }
    run.count(findings.iter().map(|f| f.severity()));
    let counts = &run.record.finding_counts;
    println!(
        "{} finding(s): {} critical, {} warn, {} info",
        findings.len(),
        counts[&Severity::Critical],
        counts[&Severity::Warn],
        counts[&Severity::Info]
    );
    Ok(outcome(findings.iter().map(|f| f.severity()), settings.severity_threshold))
}

fn replicate(
    settings: &Settings,
    out: Option<PathBuf>,
    corpus: &Path,
    claims_path: &Path,
    check: bool,
) -> Result<Outcome, CliError> {
    let taxonomy = settings.load_taxonomy()?;
    let mut run = start_run(settings, out, if check { "crosscheck" } else { "replicate" })?;
    let claims = read_claims(&mut run, claims_path)?;
    let plan = ReplicationPlan::new(claims.claims.iter(), &taxonomy).map_err(|e| CliError::Input(e.to_string()))?;
    let mut quarantine = open_quarantine(&run)?;
    let (counters, manifest) = if plan.is_empty() {
        // nothing to replicate; the corpus is not read
        (plan.counters(), CorpusManifest::default())
    } else {
        fold_corpus(
            settings,
            &mut run,
            corpus,
            &taxonomy,
            &mut quarantine,
            || plan.counters(),
            |c, rec| plan.observe(c, rec),
            |into, other| plan.merge(into, other),
        )?
    };
    close_quarantine(&mut run, quarantine)?;
    let replication = plan.finish(counters);
    run.write_json("aggregates.json", &replication)?;
    run.write_json(MANIFEST_FILE, &manifest)?;
    run.record.manifests.insert("corpus".into(), manifest);
    let result = if check {
        let findings = cross_check(&claims, &replication, &settings.crosscheck).map_err(|e| CliError::Usage(e.to_string()))?;
        write_findings(&mut run, settings, &findings, emit_report)?
    } else {
        println!("{} claim(s) replicated", replication.results.len());
        Outcome::Clean
    };
    finish(run)?;
    Ok(result)
}

fn parse_window(text: &str) -> Result<Period, CliError> {
    let bad = |m: String| CliError::Usage(format!("--window `{text}`: {m}"));
    let (start, end) = text.split_once("..").ok_or_else(|| bad("expected START..END".into()))?;
    let start = timefmt::parse_date(start.trim()).ok_or_else(|| bad(format!("`{start}` is not a YYYY-MM-DD date")))?;
    let end = timefmt::parse_date(end.trim()).ok_or_else(|| bad(format!("`{end}` is not a YYYY-MM-DD date")))?;
    Period::new(start, end, PeriodField::ApplicationDate).map_err(|e| bad(e.to_string()))
}

fn verify(
    settings: &Settings,
    out: Option<PathBuf>,
    export: &Path,
    corpus: &Path,
    window: Option<&str>,
) -> Result<Outcome, CliError> {
    let window = window.map(parse_window).transpose()?;
    let taxonomy = settings.load_taxonomy()?;
    let mut run = start_run(settings, out, "verify")?;
    let mut quarantine = open_quarantine(&run)?;

    run.input(export)?;
    let mut stream = open_platform_export(export, &taxonomy, &mut quarantine).map_err(ingest_err)?;
    let events = stream.by_ref().collect::<Result<Vec<_>, _>>().map_err(ingest_err)?;
    let export_manifest = stream.finish().0;

    let (filed, corpus_manifest) = fold_corpus(
        settings,
        &mut run,
        corpus,
        &taxonomy,
        &mut quarantine,
        Vec::new,
        |v: &mut Vec<SorRecord>, rec| v.push(rec.clone()),
        |into, other| into.extend(other),
    )?;
    close_quarantine(&mut run, quarantine)?;

    let window = match window {
        Some(w) => w,
        None => {
            let range = export_manifest
                .date_range
                .ok_or_else(|| CliError::Usage("the export has no events; give --window".into()))?;
            Period::new(range.min, range.max + chrono::Duration::days(1), PeriodField::ApplicationDate)
                .expect("non-empty range")
        }
    };
    let classifier = KeywordClassifier::markers(&taxonomy);
    let outcome = verify_window(events, filed, &classifier, &window, &settings.verify)
        .map_err(|e| CliError::Input(e.to_string()))?;

    let linkage = &outcome.linkage;
    let by_puid = linkage.pairs.iter().filter(|p| p.method == LinkMethod::Puid).count();
    run.record.notes.push(format!(
        "window {}..{}: {} pair(s) linked ({by_puid} by puid, {} scored), {} reconstructed and {} filed SoR(s) unmatched",
        timefmt::format_date(window.start()),
        timefmt::format_date(window.end()),
        linkage.pairs.len(),
        linkage.pairs.len() - by_puid,
        linkage.unmatched_reconstructed.len(),
        linkage.unmatched_filed.len()
    ));
    run.record.notes.push(format!("not compared (not derivable from the export): {}", NON_DERIVABLE_FIELDS.join(", ")));
    let manifests = [("corpus".to_string(), corpus_manifest), ("export".to_string(), export_manifest)];
    run.record.manifests.extend(manifests.iter().cloned());
    run.write_json(MANIFEST_FILE, &run.record.manifests.clone())?;
    let result = write_findings(&mut run, settings, &outcome.findings, emit_verification_report)?;
    finish(run)?;
    Ok(result)
}

fn synth_err(e: SynthError) -> CliError {
    match e {
        SynthError::Config(m) => CliError::Usage(m),
        SynthError::Io { .. } => CliError::Input(e.to_string()),
    }
}

fn load_scenario(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml")) {
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {}", path.display(), e.message())))
    } else {
        ScenarioConfig::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

fn synth(
    out: Option<PathBuf>,
    scenario: Option<&Path>,
    seed: Option<u64>,
    volume: u64,
    bulk_rows: Option<u64>,
) -> Result<Outcome, CliError> {
    let out = out.ok_or_else(|| CliError::Usage("--out DIR is required".into()))?;
    if let Some(rows) = bulk_rows {
        let corpus = write_bulk_corpus(&out.join("dump"), &BulkConfig::new(seed.unwrap_or(0), rows)).map_err(synth_err)?;
        let claims = out.join("claims.json");
        fs::write(&claims, corpus.claims.to_json_string()).map_err(|e| CliError::Input(format!("{}: {e}", claims.display())))?;
        println!("{} SoR(s) in {} file(s) under {}", corpus.rows, corpus.files.len(), out.join("dump").display());
        println!("claims: {}", claims.display());
        return Ok(Outcome::Clean);
    }
    let mut config = match scenario {
        Some(path) => load_scenario(path)?,
        None => ScenarioConfig::baseline(seed.unwrap_or(0), volume),
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let generated = generate(&config).map_err(synth_err)?;
    let files = generated.write(&out).map_err(synth_err)?;
    println!("export: {}", files.export.display());
    println!("dump: {}", files.dump_dir.display());
    println!("claims: {}", files.claims.display());
    println!("ground truth: {}", files.ground_truth.display());
    println!("taxonomy: {}", files.taxonomy.display());
    Ok(Outcome::Clean)
}

fn emit(out: Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(&path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
        None => {
            std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::Input(format!("stdout: {e}")))
        }
    }
}

fn report(settings: &Settings, out: Option<PathBuf>, path: &Path) -> Result<Outcome, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let (rendered, severities): (String, Vec<Severity>) = if let Ok(f) = serde_json::from_str::<Vec<Finding>>(&text) {
        (render(&f, settings.report_format), f.iter().map(|f| f.severity).collect())
    } else {
        let f: Vec<VerificationFinding> = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: not a findings file: {e}", path.display())))?;
        (render(&f, settings.report_format), f.iter().map(|f| f.severity).collect())
    };
    emit(out, &rendered)?;
    Ok(outcome(severities, settings.severity_threshold))
}

fn extract(settings: &Settings, out: Option<PathBuf>, html: &Path, mapping: &Path) -> Result<Outcome, CliError> {
    let taxonomy = settings.load_taxonomy()?;
    let mapping_text =
        fs::read_to_string(mapping).map_err(|e| CliError::Usage(format!("{}: {e}", mapping.display())))?;
    let mapping: ExtractionMapping = serde_json::from_str(&mapping_text)
        .map_err(|e| CliError::Usage(format!("{}: invalid mapping: {e}", mapping.display())))?;
    let document = fs::read_to_string(html).map_err(|e| CliError::Input(format!("{}: {e}", html.display())))?;
    let claims = extract_html_claims(&document, &mapping, &taxonomy).map_err(|e| match e {
        ExtractError::Mapping(_) => CliError::Usage(e.to_string()),
        _ => CliError::Input(e.to_string()),
    })?;
    emit(out, &claims.to_json_string())?;
    Ok(Outcome::Clean)
}
