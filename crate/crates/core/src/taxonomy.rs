//! The fixed catalog of linguistic features and the registry of studied
//! languages.
//!
//! Feature ranges that cover several constructs (loops, operations, data
//! structures, OOP, functional helpers) are expanded so that every construct
//! owns one id. This keeps corpus accounting per `(language, feature)` cell.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const FEATURE_COUNT: u8 = 21;

/// Feature identifier `F1..=F21`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureId(u8);

impl FeatureId {
    pub fn new(n: u8) -> Result<Self> {
        if (1..=FEATURE_COUNT).contains(&n) {
            Ok(FeatureId(n))
        } else {
            Err(Error::UnknownFeatureId(format!("F{n}")))
        }
    }

    pub fn number(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = FeatureId> {
        (1..=FEATURE_COUNT).map(FeatureId)
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F{}", self.0)
    }
}

impl FromStr for FeatureId {
    type Err = Error;

    /// Accepts `F7`, `f7` or a bare `7`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let digits = t.strip_prefix(['F', 'f']).unwrap_or(t);
        digits
            .parse::<u8>()
            .ok()
            .and_then(|n| FeatureId::new(n).ok())
            .ok_or_else(|| Error::UnknownFeatureId(s.to_string()))
    }
}

impl Serialize for FeatureId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureGroup {
    Typing,
    ControlFlow,
    Io,
    Operations,
    Libraries,
    Functions,
    Exceptions,
    DataStructures,
    Oop,
    Functional,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LinguisticFeature {
    pub id: FeatureId,
    pub name: &'static str,
    pub description: &'static str,
    pub group: FeatureGroup,
}

const LOOP_DESC: &str = "How does a language implement loop constructs in program control flow?";
const OPS_DESC: &str =
    "Basic features governing operations, covering syntax, hierarchy, and conditional evaluation.";
const DS_DESC: &str = "What are the built-in data abstraction mechanisms provided by the language, \
such as arrays, lists, sets, and maps, and how are they typically used?";
const OOP_DESC: &str = "How does the language support object-oriented constructs such as class \
definitions, object instantiation, encapsulation, inheritance, and polymorphism?";
const FP_DESC: &str = "A declarative paradigm emphasizing pure functions and immutable data, with \
Map and Filter exemplifying key features.";

const FEATURE_TABLE: [(&str, &str, FeatureGroup); 21] = [
    (
        "Variable Definition",
        "How does a language define variables of various types, particularly in distinguishing \
static and dynamic typing?",
        FeatureGroup::Typing,
    ),
    (
        "Conditional Branching",
        "How does a language realize conditions and branches in program control flow?",
        FeatureGroup::ControlFlow,
    ),
    ("Loop: For", LOOP_DESC, FeatureGroup::ControlFlow),
    ("Loop: While", LOOP_DESC, FeatureGroup::ControlFlow),
    (
        "System I/O",
        "How does a language handle standard input and output operations, such as reading user \
input and printing text to the screen?",
        FeatureGroup::Io,
    ),
    ("Operations: Arithmetic", OPS_DESC, FeatureGroup::Operations),
    ("Operations: Logical", OPS_DESC, FeatureGroup::Operations),
    ("Operations: Comparison", OPS_DESC, FeatureGroup::Operations),
    (
        "Library Integration",
        "How does a language import and utilize standard and third-party libraries?",
        FeatureGroup::Libraries,
    ),
    (
        "Parameter Passing",
        "What are the mechanisms for passing arguments in function calls, including distinctions \
between pass-by-value, pass-by-reference, and other strategies?",
        FeatureGroup::Functions,
    ),
    (
        "Function Returns",
        "How does a language define and manage return values from functions, including support \
for multiple return values or return type declarations?",
        FeatureGroup::Functions,
    ),
    (
        "Exception Handling",
        "How does the language manage runtime errors, including syntax and semantics of \
exception-throwing and catching constructs?",
        FeatureGroup::Exceptions,
    ),
    ("Data Structures: Array", DS_DESC, FeatureGroup::DataStructures),
    ("Data Structures: List", DS_DESC, FeatureGroup::DataStructures),
    ("Data Structures: Set", DS_DESC, FeatureGroup::DataStructures),
    ("Data Structures: Map", DS_DESC, FeatureGroup::DataStructures),
    ("OOP: Class Definition", OOP_DESC, FeatureGroup::Oop),
    ("OOP: Object Creation", OOP_DESC, FeatureGroup::Oop),
    ("OOP: Inheritance", OOP_DESC, FeatureGroup::Oop),
    ("Functional Programming: Map", FP_DESC, FeatureGroup::Functional),
    ("Functional Programming: Filter", FP_DESC, FeatureGroup::Functional),
];

/// All 21 features in id order.
pub fn features() -> Vec<LinguisticFeature> {
    FEATURE_TABLE
        .iter()
        .zip(FeatureId::all())
        .map(|(&(name, description, group), id)| LinguisticFeature {
            id,
            name,
            description,
            group,
        })
        .collect()
}

pub fn feature(id: FeatureId) -> LinguisticFeature {
    let (name, description, group) = FEATURE_TABLE[usize::from(id.0) - 1];
    LinguisticFeature {
        id,
        name,
        description,
        group,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResourceTier {
    High,
    Low,
    Reference,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Language {
    pub name: String,
    pub resource_tier: ResourceTier,
    pub is_reference: bool,
}

/// The studied programming languages, in canonical order.
pub const STUDIED_LANGUAGES: [&str; 19] = [
    "C++",
    "Java",
    "JavaScript",
    "Kotlin",
    "Python",
    "Rust",
    "Haskell",
    "C",
    "Go",
    "Swift",
    "AppleScript",
    "Fortran",
    "Dart",
    "Ruby",
    "Raku",
    "PHP",
    "Visual Basic",
    "Pascal",
    "Scala",
];

pub const REFERENCE_LANGUAGE: &str = "English";

/// Languages the default registry marks as high-resource.
const DEFAULT_HIGH_TIER: [&str; 2] = ["Java", "Python"];

/// Maps a user-supplied name onto its canonical spelling when it matches a
/// known language case-insensitively; otherwise returns it trimmed.
pub fn canonical_name(name: &str) -> String {
    let t = name.trim();
    STUDIED_LANGUAGES
        .iter()
        .chain(std::iter::once(&REFERENCE_LANGUAGE))
        .find(|k| k.eq_ignore_ascii_case(t))
        .map(|k| k.to_string())
        .unwrap_or_else(|| t.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageRegistry {
    languages: Vec<Language>,
    features: Vec<LinguisticFeature>,
}

impl LanguageRegistry {
    /// Validates uniqueness (case-insensitive) and the single-reference rule.
    pub fn new(languages: Vec<Language>, features: Vec<LinguisticFeature>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for lang in &languages {
            if !seen.insert(lang.name.to_lowercase()) {
                return Err(Error::DuplicateLanguage(lang.name.clone()));
            }
        }
        let refs: Vec<String> = languages
            .iter()
            .filter(|l| l.is_reference)
            .map(|l| l.name.clone())
            .collect();
        if refs.len() > 1 {
            return Err(Error::MultipleReferenceLanguages(refs));
        }
        if features.is_empty() {
            return Err(Error::InvalidConfig("registry has no features".into()));
        }
        Ok(LanguageRegistry {
            languages,
            features,
        })
    }

    pub fn languages(&self) -> &[Language] {
        &self.languages
    }

    pub fn features(&self) -> &[LinguisticFeature] {
        &self.features
    }

    pub fn feature_ids(&self) -> impl Iterator<Item = FeatureId> + '_ {
        self.features.iter().map(|f| f.id)
    }

    pub fn has_feature(&self, id: FeatureId) -> bool {
        self.features.iter().any(|f| f.id == id)
    }

    /// Case-insensitive lookup.
    pub fn get(&self, name: &str) -> Option<&Language> {
        let t = name.trim();
        self.languages
            .iter()
            .find(|l| l.name.eq_ignore_ascii_case(t))
    }

    /// Registry position of `name`, used for deterministic tie-breaks.
    pub fn position(&self, name: &str) -> Option<usize> {
        let t = name.trim();
        self.languages
            .iter()
            .position(|l| l.name.eq_ignore_ascii_case(t))
    }

    pub fn reference(&self) -> Option<&Language> {
        self.languages.iter().find(|l| l.is_reference)
    }

    pub fn is_reference(&self, name: &str) -> bool {
        self.get(name).is_some_and(|l| l.is_reference)
    }

    pub fn programming_languages(&self) -> impl Iterator<Item = &Language> {
        self.languages.iter().filter(|l| !l.is_reference)
    }

    /// SHA-256 over a canonical rendering of languages and feature ids.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for l in &self.languages {
            h.update(format!("lang\t{}\t{:?}\t{}\n", l.name, l.resource_tier, l.is_reference));
        }
        for f in &self.features {
            h.update(format!("feature\t{}\n", f.id));
        }
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    use std::fmt::Write;
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// The 19 studied languages plus English as reference, with all 21 features.
pub fn default_registry() -> LanguageRegistry {
    let mut languages: Vec<Language> = STUDIED_LANGUAGES
        .iter()
        .map(|&name| Language {
            name: name.to_string(),
            resource_tier: if DEFAULT_HIGH_TIER.contains(&name) {
                ResourceTier::High
            } else {
                ResourceTier::Low
            },
            is_reference: false,
        })
        .collect();
    languages.push(Language {
        name: REFERENCE_LANGUAGE.to_string(),
        resource_tier: ResourceTier::Reference,
        is_reference: true,
    });
    LanguageRegistry::new(languages, features()).expect("default registry is valid")
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryDoc {
    #[serde(default)]
    features: Option<Vec<String>>,
    #[serde(default, rename = "language")]
    languages: Vec<LanguageDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LanguageDoc {
    name: String,
    tier: ResourceTier,
    #[serde(default)]
    reference: Option<bool>,
}

/// Parses a TOML registry document.
///
/// ```toml
/// features = ["F1", "F2"]      # optional, defaults to all 21
///
/// [[language]]
/// name = "Go"
/// tier = "high"                # high | low | reference
///
/// [[language]]
/// name = "English"
/// tier = "reference"
/// ```
pub fn load_registry(config: &str) -> Result<LanguageRegistry> {
    let doc: RegistryDoc =
        toml::from_str(config).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
    let feats = match doc.features {
        None => features(),
        Some(ids) => {
            let mut out = Vec::with_capacity(ids.len());
            for raw in ids {
                let id: FeatureId = raw.parse()?;
                if out.iter().any(|f: &LinguisticFeature| f.id == id) {
                    return Err(Error::InvalidConfig(format!("feature {id} listed twice")));
                }
                out.push(feature(id));
            }
            out.sort_by_key(|f| f.id);
            out
        }
    };
    let mut languages = Vec::with_capacity(doc.languages.len());
    for l in doc.languages {
        let name = canonical_name(&l.name);
        if name.is_empty() {
            return Err(Error::InvalidConfig("empty language name".into()));
        }
        let is_reference = match (l.tier, l.reference) {
            (ResourceTier::Reference, Some(false)) | (ResourceTier::High | ResourceTier::Low, Some(true)) => {
                return Err(Error::InvalidConfig(format!(
                    "`{name}`: reference flag contradicts tier"
                )))
            }
            (tier, _) => tier == ResourceTier::Reference,
        };
        languages.push(Language {
            name,
            resource_tier: l.tier,
            is_reference,
        });
    }
    LanguageRegistry::new(languages, feats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_registry_shape() {
        let reg = default_registry();
        assert_eq!(reg.languages().len(), 20);
        assert_eq!(reg.features().len(), 21);
        assert_eq!(reg.features()[0].id.to_string(), "F1");
        assert_eq!(reg.features()[0].name, "Variable Definition");
        let refs: Vec<_> = reg.languages().iter().filter(|l| l.is_reference).collect();
        assert_eq!(refs.len(), 1);
        assert_eq!(refs[0].name, "English");
        assert_eq!(reg.programming_languages().count(), 19);
    }

    #[test]
    fn default_registry_is_deterministic() {
        assert_eq!(default_registry(), default_registry());
        assert_eq!(default_registry().digest(), default_registry().digest());
    }

    #[test]
    fn feature_ids_are_contiguous_and_grouped() {
        let fs = features();
        for (i, f) in fs.iter().enumerate() {
            assert_eq!(usize::from(f.id.number()), i + 1);
        }
        assert_eq!(feature(FeatureId::new(4).unwrap()).name, "Loop: While");
        assert_eq!(feature(FeatureId::new(21).unwrap()).group, FeatureGroup::Functional);
    }

    #[test]
    fn feature_id_parsing() {
        assert_eq!("F12".parse::<FeatureId>().unwrap().number(), 12);
        assert_eq!("f3".parse::<FeatureId>().unwrap().number(), 3);
        assert_eq!("7".parse::<FeatureId>().unwrap().number(), 7);
        assert!("F0".parse::<FeatureId>().is_err());
        assert!("F22".parse::<FeatureId>().is_err());
        assert!("loop".parse::<FeatureId>().is_err());
    }

    #[test]
    fn load_three_entry_registry() {
        let reg = load_registry(
            r#"
            [[language]]
            name = "Go"
            tier = "high"
            [[language]]
            name = "kotlin"
            tier = "low"
            [[language]]
            name = "English"
            tier = "reference"
            "#,
        )
        .unwrap();
        assert_eq!(reg.languages().len(), 3);
        assert_eq!(reg.languages()[1].name, "Kotlin");
        assert_eq!(reg.reference().unwrap().name, "English");
        assert_eq!(reg.features().len(), 21);
    }

    #[test]
    fn duplicate_language_rejected() {
        let err = load_registry(
            r#"
            [[language]]
            name = "Go"
            tier = "high"
            [[language]]
            name = "GO"
            tier = "low"
            "#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateLanguage(_)));
    }

    #[test]
    fn multiple_references_rejected() {
        let err = load_registry(
            r#"
            [[language]]
            name = "English"
            tier = "reference"
            [[language]]
            name = "French"
            tier = "reference"
            "#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::MultipleReferenceLanguages(ref v) if v.len() == 2));
    }

    #[test]
    fn unknown_feature_rejected() {
        let err = load_registry(
            r#"
            features = ["F1", "F30"]
            [[language]]
            name = "Go"
            tier = "high"
            "#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::UnknownFeatureId(_)));
    }

    #[test]
    fn feature_subset_is_sorted() {
        let reg = load_registry(
            r#"
            features = ["F3", "F1"]
            [[language]]
            name = "Go"
            tier = "high"
            "#,
        )
        .unwrap();
        let ids: Vec<_> = reg.feature_ids().map(|f| f.number()).collect();
        assert_eq!(ids, vec![1, 3]);
    }

    #[test]
    fn contradictory_reference_flag() {
        let err = load_registry(
            r#"
            [[language]]
            name = "Go"
            tier = "high"
            reference = true
            "#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }
}
