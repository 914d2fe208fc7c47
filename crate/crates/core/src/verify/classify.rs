use serde::{Deserialize, Serialize};

use super::ModerationEvent;
use crate::sor_model::{CategoryCode, CategoryTaxonomy, ContentType};

/// A category assignment with the classifier's confidence in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierVerdict {
    pub category: CategoryCode,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Classification {
    Verdict(ClassifierVerdict),
    /// The classifier could not look at this event, e.g. no payload.
    Unclassifiable(String),
}

/// Independent category signal for moderated content.
pub trait ContentClassifier: Sync {
    fn classify(&self, event: &ModerationEvent) -> Classification;
}

pub fn classify(event: &ModerationEvent, classifier: &dyn ContentClassifier) -> Classification {
    classifier.classify(event)
}

/// Reserved payload token that marks content of category `code`.
pub fn marker_token(code: &CategoryCode) -> String {
    format!("xcat_{code}")
}

/// Rule-based classifier: the first rule with a keyword among the
/// payload's tokens decides the category with confidence 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordClassifier {
    pub rules: Vec<KeywordRule>,
    /// Content types the rules apply to; `None` means all.
    #[serde(default)]
    pub content_types: Option<Vec<ContentType>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordRule {
    pub category: CategoryCode,
    /// Lowercase tokens.
    pub keywords: Vec<String>,
}

fn tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !(c.is_alphanumeric() || c == '_')).filter(|t| !t.is_empty()).map(str::to_lowercase)
}

impl KeywordClassifier {
    /// One marker-token rule per taxonomy code, in taxonomy order. `other`
    /// gets no rule since it is the fallback anyway.
    pub fn markers(taxonomy: &CategoryTaxonomy) -> Self {
        let rules = taxonomy
            .codes()
            .iter()
            .filter(|c| c.as_str() != CategoryCode::OTHER)
            .map(|c| KeywordRule { category: c.clone(), keywords: vec![marker_token(c)] })
            .collect();
        KeywordClassifier { rules, content_types: None }
    }
}

impl ContentClassifier for KeywordClassifier {
    fn classify(&self, event: &ModerationEvent) -> Classification {
        if self.content_types.as_ref().is_some_and(|ts| !ts.contains(&event.content_type)) {
            return Classification::Unclassifiable(format!("no rules for content type {}", event.content_type));
        }
        let payload = match event.payload.as_deref() {
            Some(p) if !p.trim().is_empty() => p,
            _ => return Classification::Unclassifiable("payload missing".into()),
        };
        let seen: Vec<String> = tokens(payload).collect();
        let hit = self.rules.iter().find(|r| r.keywords.iter().any(|k| seen.iter().any(|t| t == k)));
        Classification::Verdict(match hit {
            Some(rule) => ClassifierVerdict { category: rule.category.clone(), confidence: 1.0 },
            None => ClassifierVerdict { category: CategoryCode::other(), confidence: 0.0 },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::event::tests::event_row;
    use crate::verify::validate_event;

    fn event(payload: &str) -> ModerationEvent {
        validate_event(&event_row(&[("payload", payload)]), &CategoryTaxonomy::reference()).unwrap()
    }

    fn reference() -> KeywordClassifier {
        KeywordClassifier::markers(&CategoryTaxonomy::reference())
    }

    #[test]
    fn marker_hit() {
        let got = classify(&event("look at this xcat_hate_speech, friends"), &reference());
        assert_eq!(
            got,
            Classification::Verdict(ClassifierVerdict { category: CategoryCode::new("hate_speech"), confidence: 1.0 })
        );
    }

    #[test]
    fn marker_must_be_a_whole_token() {
        let got = classify(&event("xcat_hate_speechless"), &reference());
        assert_eq!(got, Classification::Verdict(ClassifierVerdict { category: CategoryCode::other(), confidence: 0.0 }));
    }

    #[test]
    fn no_payload_is_unclassifiable() {
        assert!(matches!(classify(&event(""), &reference()), Classification::Unclassifiable(_)));
    }

    #[test]
    fn unsupported_content_type() {
        let mut c = reference();
        c.content_types = Some(vec![ContentType::Video]);
        assert!(matches!(classify(&event("xcat_spam"), &c), Classification::Unclassifiable(_)));
    }
}
