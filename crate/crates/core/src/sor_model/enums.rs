
/// Error returned when a string is not a member of one of the closed
/// vocabularies below.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("`{value}` is not a valid {kind}")]
pub struct UnknownVariant {
    pub kind: &'static str,
    pub value: String,
}

/// Declares a closed vocabulary serialized as SCREAMING_SNAKE_CASE literals.
macro_rules! vocabulary {
    (
        $(#[$meta:meta])*
        $name:ident: $kind:literal {
            $($(#[$vmeta:meta])* $variant:ident => $lit:literal,)+
        }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($(#[$vmeta])* $variant,)+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant,)+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $lit,)+
                }
            }

            /// Position in declaration order; used for bitmask predicates.
            pub fn ordinal(self) -> u32 {
                self as u32
            }
        }

        impl ::std::fmt::Display for $name {
            fn fmt(&self, f: &mut ::std::fmt::Formatter<'_>) -> ::std::fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl ::std::str::FromStr for $name {
            type Err = $crate::sor_model::UnknownVariant;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($lit => Ok($name::$variant),)+
                    _ => Err($crate::sor_model::UnknownVariant { kind: $kind, value: s.to_string() }),
                }
            }
        }

        impl ::serde::Serialize for $name {
            fn serialize<S: ::serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
                serializer.serialize_str(self.as_str())
            }
        }

        impl<'de> ::serde::Deserialize<'de> for $name {
            fn deserialize<D: ::serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
                let s = <String as ::serde::Deserialize>::deserialize(deserializer)?;
                s.parse().map_err(::serde::de::Error::custom)
            }
        }
    };
}

pub(crate) use vocabulary;

vocabulary! {
    /// The kind of restriction a statement of reasons reports.
    DecisionType: "decision_type" {
        VisibilityRemoval => "VISIBILITY_REMOVAL",
        VisibilityDisable => "VISIBILITY_DISABLE",
        VisibilityDemotion => "VISIBILITY_DEMOTION",
        Monetary => "MONETARY",
        ServiceProvision => "SERVICE_PROVISION",
        AccountSuspension => "ACCOUNT_SUSPENSION",
        AccountTermination => "ACCOUNT_TERMINATION",
        Other => "OTHER",
    }
}

vocabulary! {
    DecisionGround: "decision_ground" {
        IllegalContent => "ILLEGAL_CONTENT",
        IncompatibleWithTerms => "INCOMPATIBLE_WITH_TERMS",
    }
}

vocabulary! {
    ContentType: "content_type" {
        Text => "TEXT",
        Image => "IMAGE",
        Video => "VIDEO",
        Audio => "AUDIO",
        SyntheticMedia => "SYNTHETIC_MEDIA",
        App => "APP",
        Product => "PRODUCT",
        Other => "OTHER",
    }
}

vocabulary! {
    AutomatedDecision: "automated_decision" {
        Fully => "FULLY",
        Partially => "PARTIALLY",
        NotAutomated => "NOT_AUTOMATED",
    }
}

vocabulary! {
    SourceType: "source_type" {
        Article16Notice => "ARTICLE_16_NOTICE",
        TrustedFlagger => "TRUSTED_FLAGGER",
        VoluntaryInitiative => "VOLUNTARY_INITIATIVE",
        Other => "OTHER",
    }
}

/// Parses the `"true"`/`"false"` literals used in the CSV formats.
pub fn parse_bool(s: &str) -> Result<bool, UnknownVariant> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(UnknownVariant { kind: "boolean", value: s.to_string() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_round_trip() {
        for dt in DecisionType::ALL {
            assert_eq!(dt.as_str().parse::<DecisionType>().unwrap(), *dt);
        }
        for ct in ContentType::ALL {
            assert_eq!(ct.as_str().parse::<ContentType>().unwrap(), *ct);
        }
        assert_eq!(DecisionType::ALL.len(), 8);
        assert_eq!(AutomatedDecision::NotAutomated.ordinal(), 2);
    }

    #[test]
    fn literals_are_case_sensitive() {
        let err = "fully".parse::<AutomatedDecision>().unwrap_err();
        assert_eq!(err.kind, "automated_decision");
        assert!(parse_bool("True").is_err());
        assert!(parse_bool("false").is_ok());
    }

    #[test]
    fn serde_uses_literals() {
        let json = serde_json::to_string(&SourceType::Article16Notice).unwrap();
        assert_eq!(json, "\"ARTICLE_16_NOTICE\"");
        let back: SourceType = serde_json::from_str(&json).unwrap();
        assert_eq!(back, SourceType::Article16Notice);
    }
}
