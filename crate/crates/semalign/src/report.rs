//! Structured-finding data model and the canonical clause/description rendering.
//!
//! A [`Finding`] is one structured abnormality (modality, orientation,
//! anatomic site, appearance). Findings render deterministically into
//! clauses, and a list of findings renders into a [`Description`], the text
//! unit that gets paired with an image.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Text used for a subject with no abnormal findings.
pub const NORMAL_DESCRIPTION: &str = "The shape and size of the skull are normal. \
No abnormal signal is observed in the brain parenchyma. The morphology of the \
ventricles and sulci seen are without abnormal dilation or narrowing, and there \
is no midline shift.";

/// Reserved site token for the normal sentinel clause.
pub const SENTINEL_SITE: &str = "global";
/// Reserved appearance token for the normal sentinel clause.
pub const SENTINEL_APPEARANCE: &str = "normal";

/// MRI acquisition type.
#[allow(clippy::upper_case_acronyms)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modality {
    T1WI,
    T2WI,
    DWI,
    ADC,
    T2FLAIR,
}

impl Modality {
    pub const ALL: [Modality; 5] = [
        Modality::T1WI,
        Modality::T2WI,
        Modality::DWI,
        Modality::ADC,
        Modality::T2FLAIR,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Modality::T1WI => "T1WI",
            Modality::T2WI => "T2WI",
            Modality::DWI => "DWI",
            Modality::ADC => "ADC",
            Modality::T2FLAIR => "T2FLAIR",
        }
    }

    pub fn parse(s: &str) -> Option<Modality> {
        Modality::ALL.iter().copied().find(|m| m.as_str() == s)
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Side on which an abnormality was observed. `None` means the report text
/// carries no orientation slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Left,
    Right,
    Bilateral,
    None,
}

impl Orientation {
    pub const ALL: [Orientation; 4] = [
        Orientation::Left,
        Orientation::Right,
        Orientation::Bilateral,
        Orientation::None,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Orientation::Left => "left",
            Orientation::Right => "right",
            Orientation::Bilateral => "bilateral",
            Orientation::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Orientation> {
        Orientation::ALL.iter().copied().find(|o| o.as_str() == s)
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("unknown modality: {0:?}")]
    UnknownModality(String),
    #[error("unknown orientation: {0:?}")]
    UnknownOrientation(String),
    #[error("anatomic site not in vocabulary: {0:?}")]
    OutOfVocabularySite(String),
    #[error("appearance not in vocabulary: {0:?}")]
    OutOfVocabularyAppearance(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VocabularyError {
    #[error("vocabulary {0} list is empty")]
    Empty(&'static str),
    #[error("duplicate vocabulary token: {0:?}")]
    DuplicateToken(String),
    #[error("missing reserved sentinel token: {0:?}")]
    MissingSentinel(&'static str),
    #[error("invalid vocabulary token {token:?}: {reason}")]
    InvalidToken { token: String, reason: String },
}

/// One structured abnormality, the unit extracted from a report.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Finding {
    pub modality: Modality,
    pub orientation: Orientation,
    pub anatomic_site: String,
    pub appearance: String,
}

/// Raw, not-yet-validated finding record (e.g. parsed from JSON produced by
/// an external tool).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawFinding {
    pub modality: String,
    pub orientation: String,
    pub anatomic_site: String,
    pub appearance: String,
}

/// Ordered token lists for anatomic sites and appearances. The sentinel pair
/// (`global`, `normal`) is always present so normal descriptions validate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawVocabulary")]
pub struct Vocabulary {
    sites: Vec<String>,
    appearances: Vec<String>,
}

/// Unvalidated vocabulary file shape.
#[derive(Deserialize)]
struct RawVocabulary {
    sites: Vec<String>,
    appearances: Vec<String>,
}

impl TryFrom<RawVocabulary> for Vocabulary {
    type Error = VocabularyError;

    fn try_from(raw: RawVocabulary) -> Result<Vocabulary, VocabularyError> {
        Vocabulary::new(raw.sites, raw.appearances)
    }
}

/// Substrings that would collide with the report grammar's sentence markers.
const FORBIDDEN_TOKEN_SUBSTRINGS: [&str; 6] =
    [" on ", " shows ", " and ", " at ", ",", "."];

fn check_token(token: &str) -> Result<(), VocabularyError> {
    let invalid = |reason: &str| VocabularyError::InvalidToken {
        token: token.to_string(),
        reason: reason.to_string(),
    };
    if token.trim().is_empty() {
        return Err(invalid("empty"));
    }
    if token != token.trim() {
        return Err(invalid("leading or trailing whitespace"));
    }
    for sub in FORBIDDEN_TOKEN_SUBSTRINGS {
        if token.contains(sub) {
            return Err(invalid(&format!("contains reserved substring {sub:?}")));
        }
    }
    if let Some(first) = token.split_whitespace().next() {
        if Orientation::parse(first).is_some() {
            return Err(invalid("starts with a reserved orientation word"));
        }
    }
    Ok(())
}

impl Vocabulary {
    /// Builds a vocabulary from explicit token lists, appending the sentinel
    /// pair when absent.
    pub fn new(
        sites: Vec<String>,
        appearances: Vec<String>,
    ) -> Result<Vocabulary, VocabularyError> {
        if sites.is_empty() {
            return Err(VocabularyError::Empty("sites"));
        }
        if appearances.is_empty() {
            return Err(VocabularyError::Empty("appearances"));
        }
        let mut sites = sites;
        let mut appearances = appearances;
        if !sites.iter().any(|s| s == SENTINEL_SITE) {
            sites.push(SENTINEL_SITE.to_string());
        }
        if !appearances.iter().any(|a| a == SENTINEL_APPEARANCE) {
            appearances.push(SENTINEL_APPEARANCE.to_string());
        }
        for list in [&sites, &appearances] {
            for (i, token) in list.iter().enumerate() {
                check_token(token)?;
                if list[..i].contains(token) {
                    return Err(VocabularyError::DuplicateToken(token.clone()));
                }
            }
        }
        Ok(Vocabulary { sites, appearances })
    }

    pub fn sites(&self) -> &[String] {
        &self.sites
    }

    pub fn appearances(&self) -> &[String] {
        &self.appearances
    }

    /// Site tokens usable for abnormal findings (sentinel excluded).
    pub fn finding_sites(&self) -> impl Iterator<Item = &String> {
        self.sites.iter().filter(|s| *s != SENTINEL_SITE)
    }

    /// Appearance tokens usable for abnormal findings (sentinel excluded).
    pub fn finding_appearances(&self) -> impl Iterator<Item = &String> {
        self.appearances.iter().filter(|a| *a != SENTINEL_APPEARANCE)
    }

    pub fn contains_site(&self, site: &str) -> bool {
        self.sites.iter().any(|s| s == site)
    }

    pub fn contains_appearance(&self, appearance: &str) -> bool {
        self.appearances.iter().any(|a| a == appearance)
    }
}

/// Validates a raw record field by field against the vocabulary.
pub fn validate_finding(
    candidate: &RawFinding,
    vocab: &Vocabulary,
) -> Result<Finding, ReportError> {
    let modality = Modality::parse(&candidate.modality)
        .ok_or_else(|| ReportError::UnknownModality(candidate.modality.clone()))?;
    let orientation = Orientation::parse(&candidate.orientation)
        .ok_or_else(|| ReportError::UnknownOrientation(candidate.orientation.clone()))?;
    if !vocab.contains_site(&candidate.anatomic_site) {
        return Err(ReportError::OutOfVocabularySite(
            candidate.anatomic_site.clone(),
        ));
    }
    if !vocab.contains_appearance(&candidate.appearance) {
        return Err(ReportError::OutOfVocabularyAppearance(
            candidate.appearance.clone(),
        ));
    }
    Ok(Finding {
        modality,
        orientation,
        anatomic_site: candidate.anatomic_site.clone(),
        appearance: candidate.appearance.clone(),
    })
}

/// One rendered clause plus its structured metadata. `finding` is `None` for
/// the normal sentinel clause.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clause {
    pub text: String,
    pub finding: Option<Finding>,
}

impl Clause {
    pub fn is_sentinel(&self) -> bool {
        self.finding.is_none()
    }
}

/// A rendered text paired with per-clause structured metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub text: String,
    pub clauses: Vec<Clause>,
}

impl Description {
    /// Findings carried by the clause metadata (empty for a normal description).
    pub fn findings(&self) -> Vec<Finding> {
        self.clauses
            .iter()
            .filter_map(|c| c.finding.clone())
            .collect()
    }
}

/// Renders one finding with the fixed clause template. An orientation of
/// `none` omits the orientation slot and its trailing space.
pub fn render_clause(f: &Finding) -> String {
    match f.orientation {
        Orientation::None => format!(
            "In modal {}, at {}, the appearance is {}.",
            f.modality, f.anatomic_site, f.appearance
        ),
        o => format!(
            "In modal {}, at {} {}, the appearance is {}.",
            f.modality, o, f.anatomic_site, f.appearance
        ),
    }
}

/// Renders a finding list into a description: one clause per finding in input
/// order, or the single sentinel clause when the list is empty. Clause texts
/// are joined by a single space.
pub fn render_description(findings: &[Finding]) -> Description {
    if findings.is_empty() {
        return Description {
            text: NORMAL_DESCRIPTION.to_string(),
            clauses: vec![Clause {
                text: NORMAL_DESCRIPTION.to_string(),
                finding: None,
            }],
        };
    }
    let clauses: Vec<Clause> = findings
        .iter()
        .map(|f| Clause {
            text: render_clause(f),
            finding: Some(f.clone()),
        })
        .collect();
    let text = clauses
        .iter()
        .map(|c| c.text.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    Description { text, clauses }
}
