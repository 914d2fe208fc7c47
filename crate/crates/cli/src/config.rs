use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sor_audit::crosscheck::{CrossCheckConfig, ToleranceSpec};
use sor_audit::report::{ReportFormat, Severity};
use sor_audit::sor_model::CategoryTaxonomy;
use sor_audit::verify::{LinkageConfig, VerifyConfig};

use crate::args::Common;
use crate::CliError;

/// The config file; every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    taxonomy: Option<PathBuf>,
    severity_threshold: Option<String>,
    format: Option<String>,
    parallel: Option<usize>,
    tolerance: Option<ToleranceSpec>,
    critical_relative: Option<f64>,
    linkage: Option<LinkageConfig>,
    deadline_days: Option<i64>,
}

/// Effective settings after applying flags over the file over defaults.
#[derive(Debug, Clone, Serialize)]
pub struct Settings {
    pub taxonomy: Option<PathBuf>,
    pub severity_threshold: Severity,
    pub format: String,
    pub parallel: usize,
    pub crosscheck: CrossCheckConfig,
    pub verify: VerifyConfig,
    #[serde(skip)]
    pub report_format: ReportFormat,
}

fn parse_severity(text: &str) -> Result<Severity, CliError> {
    text.parse().map_err(|_| CliError::Usage(format!("unknown severity `{text}` (expected info, warn or critical)")))
}

fn parse_format(text: &str) -> Result<ReportFormat, CliError> {
    text.parse().map_err(|_| CliError::Usage(format!("unknown format `{text}` (expected json, csv or markdown)")))
}

impl Settings {
    pub fn resolve(common: &Common) -> Result<Settings, CliError> {
        let file = match &common.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
                let mut file: ConfigFile = toml::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("invalid config {}: {}", path.display(), e.message())))?;
                // relative paths in the file are relative to the file
                if let (Some(t), Some(dir)) = (&file.taxonomy, path.parent()) {
                    if t.is_relative() {
                        file.taxonomy = Some(dir.join(t));
                    }
                }
                file
            }
            None => ConfigFile::default(),
        };

        let severity_text = common.severity_threshold.clone().or(file.severity_threshold).unwrap_or_else(|| "warn".into());
        let format = common.format.clone().or(file.format).unwrap_or_else(|| "json".into());
        let report_format = parse_format(&format)?;
        let parallel = common.parallel.or(file.parallel).unwrap_or(1);
        if parallel == 0 {
            return Err(CliError::Usage("--parallel must be at least 1".into()));
        }
        let mut crosscheck = CrossCheckConfig::default();
        if let Some(t) = file.tolerance {
            crosscheck.tolerance = t;
        }
        if let Some(c) = file.critical_relative {
            crosscheck.critical_relative = c;
        }
        crosscheck.tolerance.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if !(crosscheck.critical_relative.is_finite() && crosscheck.critical_relative >= 0.0) {
            return Err(CliError::Usage("critical_relative must be a non-negative number".into()));
        }
        let mut verify = VerifyConfig::default();
        if let Some(l) = file.linkage {
            verify.linkage = l;
        }
        if let Some(d) = file.deadline_days {
            verify.deadline_days = d;
        }
        verify.linkage.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if verify.deadline_days < 0 {
            return Err(CliError::Usage("deadline_days must not be negative".into()));
        }
        Ok(Settings {
            taxonomy: common.taxonomy.clone().or(file.taxonomy),
            severity_threshold: parse_severity(&severity_text)?,
            format: report_format_name(report_format).into(),
            parallel,
            crosscheck,
            verify,
            report_format,
        })
    }

    pub fn load_taxonomy(&self) -> Result<CategoryTaxonomy, CliError> {
        match &self.taxonomy {
            Some(path) => CategoryTaxonomy::load(path).map_err(|e| CliError::Input(e.to_string())),
            None => Ok(CategoryTaxonomy::reference()),
        }
    }

    pub fn taxonomy_path(&self) -> Option<&Path> {
        self.taxonomy.as_deref()
    }
}

pub fn report_format_name(format: ReportFormat) -> &'static str {
    match format {
        ReportFormat::Json => "json",
        ReportFormat::Csv => "csv",
        ReportFormat::Markdown => "markdown",
    }
}

pub fn report_extension(format: ReportFormat) -> &'static str {
    match format {
        ReportFormat::Json => "json",
        ReportFormat::Csv => "csv",
        ReportFormat::Markdown => "md",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn common(config: Option<PathBuf>) -> Common {
        Common { config, ..Common::default() }
    }

    #[test]
    fn defaults_without_file() {
        let s = Settings::resolve(&common(None)).unwrap();
        assert_eq!(s.severity_threshold, Severity::Warn);
        assert_eq!(s.parallel, 1);
        assert_eq!(s.verify.deadline_days, 7);
        assert_eq!(s.crosscheck.tolerance, ToleranceSpec::default());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("audit.toml");
        std::fs::write(
            &path,
            "taxonomy = \"tax.json\"\nseverity_threshold = \"critical\"\ndeadline_days = 3\n\n[tolerance]\nrelative = 0.01\n\n[linkage]\nthreshold = 0.8\n",
        )
        .unwrap();
        let s = Settings::resolve(&common(Some(path.clone()))).unwrap();
        assert_eq!(s.severity_threshold, Severity::Critical);
        assert_eq!(s.verify.deadline_days, 3);
        assert_eq!(s.verify.linkage.threshold, 0.8);
        assert_eq!(s.verify.linkage.category_weight, 0.5);
        assert_eq!(s.crosscheck.tolerance.relative, 0.01);
        assert_eq!(s.taxonomy.as_deref(), Some(dir.path().join("tax.json").as_path()));

        let mut c = common(Some(path));
        c.severity_threshold = Some("info".into());
        c.taxonomy = Some("other.json".into());
        let s = Settings::resolve(&c).unwrap();
        assert_eq!(s.severity_threshold, Severity::Info);
        assert_eq!(s.taxonomy.as_deref(), Some(Path::new("other.json")));
    }

    #[test]
    fn bad_values_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("audit.toml");
        std::fs::write(&path, "colour = \"blue\"\n").unwrap();
        assert!(matches!(Settings::resolve(&common(Some(path.clone()))), Err(CliError::Usage(_))));
        std::fs::write(&path, "[tolerance]\nrelative = -1.0\n").unwrap();
        assert!(matches!(Settings::resolve(&common(Some(path))), Err(CliError::Usage(_))));
        let mut c = common(None);
        c.format = Some("pdf".into());
        assert!(matches!(Settings::resolve(&c), Err(CliError::Usage(_))));
    }
}
