use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// A violation-category code, e.g. `hate_speech`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategoryCode(String);

impl CategoryCode {
    /// Fallback code used when nothing more specific is known.
    pub const OTHER: &'static str = "other";

    pub fn new(code: impl Into<String>) -> Self {
        CategoryCode(code.into())
    }

    pub fn other() -> Self {
        CategoryCode(Self::OTHER.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CategoryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for CategoryCode {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TaxonomyError {
    #[error("taxonomy declares no category codes")]
    Empty,
    #[error("category code `{0}` is declared twice")]
    DuplicateCode(String),
    #[error("category code `{0}` is not a valid code (use lowercase ASCII, digits and `_`)")]
    BadCode(String),
    #[error("alias `{alias}` targets undeclared code `{target}`")]
    DanglingAlias { alias: String, target: String },
    #[error("label for undeclared code `{0}`")]
    DanglingLabel(String),
    #[error("`{label}` resolves to both `{first}` and `{second}`")]
    AmbiguousAlias { label: String, first: String, second: String },
    #[error("unknown category label `{0}`")]
    Unknown(String),
    #[error("cannot read taxonomy {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed taxonomy {path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

/// On-disk shape of a taxonomy file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaxonomyFile {
    pub codes: Vec<String>,
    #[serde(default)]
    pub labels: BTreeMap<String, String>,
    #[serde(default)]
    pub aliases: BTreeMap<String, String>,
}

/// The configurable set of violation categories, with the alias table
/// used to map report vocabulary onto database vocabulary.
///
/// The code `other` is always a member; it is appended when the source
/// does not declare it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryTaxonomy {
    codes: Vec<CategoryCode>,
    labels: BTreeMap<CategoryCode, String>,
    aliases: BTreeMap<String, CategoryCode>,
    // normalized label -> code, covering codes, labels and aliases
    lookup: BTreeMap<String, CategoryCode>,
}

fn normalize(label: &str) -> String {
    label.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn valid_code(code: &str) -> bool {
    !code.is_empty()
        && code.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

impl CategoryTaxonomy {
    pub fn from_file(file: TaxonomyFile) -> Result<Self, TaxonomyError> {
        if file.codes.is_empty() {
            return Err(TaxonomyError::Empty);
        }
        let mut seen = BTreeSet::new();
        let mut codes = Vec::with_capacity(file.codes.len() + 1);
        for code in &file.codes {
            if !valid_code(code) {
                return Err(TaxonomyError::BadCode(code.clone()));
            }
            if !seen.insert(code.as_str()) {
                return Err(TaxonomyError::DuplicateCode(code.clone()));
            }
            codes.push(CategoryCode::new(code.as_str()));
        }
        if !seen.contains(CategoryCode::OTHER) {
            codes.push(CategoryCode::other());
        }

        let mut lookup: BTreeMap<String, CategoryCode> = BTreeMap::new();
        let mut bind = |label: &str, code: &CategoryCode| -> Result<(), TaxonomyError> {
            let key = normalize(label);
            match lookup.get(&key) {
                Some(existing) if existing != code => Err(TaxonomyError::AmbiguousAlias {
                    label: label.to_string(),
                    first: existing.to_string(),
                    second: code.to_string(),
                }),
                Some(_) => Ok(()),
                None => {
                    lookup.insert(key, code.clone());
                    Ok(())
                }
            }
        };
        for code in &codes {
            bind(code.as_str(), code)?;
        }

        let mut labels = BTreeMap::new();
        for (code, label) in &file.labels {
            if !seen.contains(code.as_str()) && code != CategoryCode::OTHER {
                return Err(TaxonomyError::DanglingLabel(code.clone()));
            }
            let code = CategoryCode::new(code.as_str());
            bind(label, &code)?;
            labels.insert(code, label.clone());
        }

        let mut aliases = BTreeMap::new();
        for (alias, target) in &file.aliases {
            let Some(code) = codes.iter().find(|c| c.as_str() == target) else {
                return Err(TaxonomyError::DanglingAlias {
                    alias: alias.clone(),
                    target: target.clone(),
                });
            };
            bind(alias, code)?;
            aliases.insert(alias.clone(), code.clone());
        }

        Ok(CategoryTaxonomy { codes, labels, aliases, lookup })
    }

    pub fn load(path: &Path) -> Result<Self, TaxonomyError> {
        let display = path.display().to_string();
        let text = std::fs::read_to_string(path)
            .map_err(|source| TaxonomyError::Io { path: display.clone(), source })?;
        let file: TaxonomyFile = serde_json::from_str(&text)
            .map_err(|source| TaxonomyError::Json { path: display, source })?;
        Self::from_file(file)
    }

    /// Built-in reference taxonomy used when no taxonomy file is configured.
    pub fn reference() -> Self {
        let entries: &[(&str, &str, &[&str])] = &[
            ("hate_speech", "Hate speech", &["hateful conduct", "illegal or harmful speech"]),
            ("misinformation", "Misinformation", &["misinfo", "disinformation", "negative effects on civic discourse"]),
            ("nudity", "Nudity", &["adult nudity", "pornography or sexualized content"]),
            ("violence", "Violence", &["violent content", "violent extremism"]),
            ("scam", "Scams and fraud", &["fraud", "scams"]),
            ("spam", "Spam", &["platform manipulation"]),
            ("illegal_goods", "Illegal goods", &["unsafe and illegal products"]),
            ("ip_infringement", "Intellectual property infringement", &["copyright", "intellectual property"]),
            ("child_safety", "Protection of minors", &["child safety"]),
            ("other", "Other", &["scope of platform service"]),
        ];
        let mut file = TaxonomyFile::default();
        for (code, label, aliases) in entries {
            file.codes.push(code.to_string());
            file.labels.insert(code.to_string(), label.to_string());
            for alias in *aliases {
                file.aliases.insert(alias.to_string(), code.to_string());
            }
        }
        Self::from_file(file).expect("reference taxonomy is well-formed")
    }

    pub fn codes(&self) -> &[CategoryCode] {
        &self.codes
    }

    pub fn label(&self, code: &CategoryCode) -> Option<&str> {
        self.labels.get(code).map(String::as_str)
    }

    pub fn aliases(&self) -> &BTreeMap<String, CategoryCode> {
        &self.aliases
    }

    pub fn contains(&self, code: &str) -> bool {
        self.codes.iter().any(|c| c.as_str() == code)
    }

    /// Exact code lookup, as used for database rows.
    pub fn code(&self, code: &str) -> Option<&CategoryCode> {
        self.codes.iter().find(|c| c.as_str() == code)
    }

    /// Resolves a code, label or alias. Matching ignores case and
    /// collapses runs of whitespace.
    pub fn resolve(&self, label: &str) -> Result<&CategoryCode, TaxonomyError> {
        if let Some(code) = self.code(label) {
            return Ok(code);
        }
        self.lookup
            .get(&normalize(label))
            .ok_or_else(|| TaxonomyError::Unknown(label.to_string()))
    }

    pub fn to_file(&self) -> TaxonomyFile {
        TaxonomyFile {
            codes: self.codes.iter().map(|c| c.to_string()).collect(),
            labels: self.labels.iter().map(|(c, l)| (c.to_string(), l.clone())).collect(),
            aliases: self.aliases.iter().map(|(a, c)| (a.clone(), c.to_string())).collect(),
        }
    }
}
