//! Deterministic pseudo-report generation and parsing, plus the extraction
//! metrics. The generator emits styled free-text paragraphs over a closed
//! template family; the parser inverts exactly that language, so the round
//! trip is testable end to end.

use crate::report::{Finding, Modality, Orientation, Vocabulary};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("unparseable report: {0}")]
    ParseFailure(String),
    #[error("predictions ({predictions}) and gold ({gold}) lengths differ")]
    LengthMismatch { predictions: usize, gold: usize },
}

/// Paragraphs a normal report may use. The first entry is the canonical
/// normal description.
pub const NORMAL_PHRASINGS: [&str; 3] = [
    crate::report::NORMAL_DESCRIPTION,
    "No abnormal signal is observed in the brain parenchyma. The ventricles and \
sulci appear normal, and no midline shift is seen.",
    "Brain parenchyma shows no abnormal signal intensity. The ventricular system \
is unremarkable and there is no midline shift.",
];

/// Joining phrases the parser recognizes in front of a sentence.
pub const CONNECTIVE_INVENTORY: [&str; 5] =
    ["Additionally", "Furthermore", "Also", "Meanwhile", "In addition"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClauseOrder {
    AsGiven,
    Shuffled,
}

/// Styling knobs for pseudo-report generation. `connective_set` must be a
/// nonempty subset of [`CONNECTIVE_INVENTORY`] so the parser stays total over
/// the generated language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleConfig {
    pub clause_order: ClauseOrder,
    pub connective_set: Vec<String>,
    pub merge_same_site: bool,
    pub seed: u64,
}

impl Default for StyleConfig {
    fn default() -> Self {
        StyleConfig {
            clause_order: ClauseOrder::AsGiven,
            connective_set: CONNECTIVE_INVENTORY.iter().map(|c| c.to_string()).collect(),
            merge_same_site: false,
            seed: 0,
        }
    }
}

impl StyleConfig {
    fn assert_valid(&self) {
        assert!(!self.connective_set.is_empty(), "connective set is empty");
        for c in &self.connective_set {
            assert!(
                CONNECTIVE_INVENTORY.contains(&c.as_str()),
                "connective {c:?} not in the recognized inventory"
            );
        }
    }
}

fn location(orientation: Orientation, site: &str) -> String {
    match orientation {
        Orientation::None => site.to_string(),
        o => format!("{o} {site}"),
    }
}

fn render_single(f: &Finding, template: usize) -> String {
    let loc = location(f.orientation, &f.anatomic_site);
    match template {
        0 => format!("On {}, {} shows {}.", f.modality, loc, f.appearance),
        1 => format!(
            "In modal {}, at {}, the appearance is {}.",
            f.modality, loc, f.appearance
        ),
        _ => format!(
            "At {} on {}, the appearance is {}.",
            loc, f.modality, f.appearance
        ),
    }
}

fn render_merged(group: &[Finding]) -> String {
    let loc = location(group[0].orientation, &group[0].anatomic_site);
    let items: Vec<String> = group
        .iter()
        .map(|f| format!("{} shows {}", f.modality, f.appearance))
        .collect();
    format!("At {}, {}.", loc, items.join(" and "))
}

fn decapitalize(sentence: &str) -> String {
    let mut chars = sentence.chars();
    match chars.next() {
        Some(c) => c.to_lowercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

fn capitalize(sentence: &str) -> String {
    let mut chars = sentence.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// Generates a styled free-text paragraph mentioning each finding exactly
/// once. Empty findings produce a normal paragraph. Deterministic given
/// `(findings, style)`.
pub fn generate_pseudo_report(findings: &[Finding], style: &StyleConfig) -> String {
    style.assert_valid();
    let mut rng = ChaCha8Rng::seed_from_u64(style.seed);
    if findings.is_empty() {
        return NORMAL_PHRASINGS[rng.gen_range(0..NORMAL_PHRASINGS.len())].to_string();
    }

    // Sentence units: merged groups share an (orientation, site) pair.
    let mut units: Vec<Vec<Finding>> = Vec::new();
    if style.merge_same_site {
        let mut keys: Vec<(Orientation, String)> = Vec::new();
        for f in findings {
            let key = (f.orientation, f.anatomic_site.clone());
            match keys.iter().position(|k| *k == key) {
                Some(i) => units[i].push(f.clone()),
                None => {
                    keys.push(key);
                    units.push(vec![f.clone()]);
                }
            }
        }
    } else {
        units = findings.iter().map(|f| vec![f.clone()]).collect();
    }
    if style.clause_order == ClauseOrder::Shuffled {
        units.shuffle(&mut rng);
    }

    let mut sentences = Vec::with_capacity(units.len());
    for (k, unit) in units.iter().enumerate() {
        let core = if unit.len() == 1 {
            render_single(&unit[0], rng.gen_range(0..3))
        } else {
            render_merged(unit)
        };
        if k > 0 && rng.gen_bool(0.5) {
            let conn = &style.connective_set[rng.gen_range(0..style.connective_set.len())];
            sentences.push(format!("{conn}, {}", decapitalize(&core)));
        } else {
            sentences.push(core);
        }
    }
    sentences.join(" ")
}

fn fail(text: &str, why: &str) -> CodecError {
    CodecError::ParseFailure(format!("{why}: {text:?}"))
}

fn parse_location<'a>(
    part: &'a str,
    vocab: &Vocabulary,
    sentence: &str,
) -> Result<(Orientation, &'a str), CodecError> {
    if let Some(first) = part.split_whitespace().next() {
        if let Some(o) = Orientation::parse(first) {
            let site = part[first.len()..].trim_start();
            return if vocab.contains_site(site) {
                Ok((o, site))
            } else {
                Err(fail(sentence, "unknown anatomic site"))
            };
        }
    }
    if vocab.contains_site(part) {
        Ok((Orientation::None, part))
    } else {
        Err(fail(sentence, "unknown anatomic site"))
    }
}

fn parse_modality(token: &str, sentence: &str) -> Result<Modality, CodecError> {
    Modality::parse(token).ok_or_else(|| fail(sentence, "unknown modality"))
}

fn check_appearance<'a>(
    token: &'a str,
    vocab: &Vocabulary,
    sentence: &str,
) -> Result<&'a str, CodecError> {
    if vocab.contains_appearance(token) {
        Ok(token)
    } else {
        Err(fail(sentence, "unknown appearance"))
    }
}

/// Parses one period-free sentence body into its findings.
fn parse_sentence(sentence: &str, vocab: &Vocabulary) -> Result<Vec<Finding>, CodecError> {
    // Strip a recognized leading connective and restore the capital.
    let mut body = sentence.to_string();
    for conn in CONNECTIVE_INVENTORY {
        if let Some(rest) = body.strip_prefix(&format!("{conn}, ")) {
            body = capitalize(rest);
            break;
        }
    }

    if let Some(rest) = body.strip_prefix("In modal ") {
        let (modality, rest) = rest
            .split_once(", at ")
            .ok_or_else(|| fail(sentence, "malformed clause"))?;
        let (loc, appearance) = rest
            .split_once(", the appearance is ")
            .ok_or_else(|| fail(sentence, "malformed clause"))?;
        let modality = parse_modality(modality, sentence)?;
        let (orientation, site) = parse_location(loc, vocab, sentence)?;
        let appearance = check_appearance(appearance, vocab, sentence)?;
        return Ok(vec![Finding {
            modality,
            orientation,
            anatomic_site: site.to_string(),
            appearance: appearance.to_string(),
        }]);
    }

    if let Some(rest) = body.strip_prefix("On ") {
        let (modality, rest) = rest
            .split_once(", ")
            .ok_or_else(|| fail(sentence, "malformed sentence"))?;
        let (loc, appearance) = rest
            .split_once(" shows ")
            .ok_or_else(|| fail(sentence, "malformed sentence"))?;
        let modality = parse_modality(modality, sentence)?;
        let (orientation, site) = parse_location(loc, vocab, sentence)?;
        let appearance = check_appearance(appearance, vocab, sentence)?;
        return Ok(vec![Finding {
            modality,
            orientation,
            anatomic_site: site.to_string(),
            appearance: appearance.to_string(),
        }]);
    }

    if let Some(rest) = body.strip_prefix("At ") {
        if let Some((loc_part, appearance)) = rest.split_once(", the appearance is ") {
            // "At {loc} on {modality}, the appearance is {appearance}"
            let (loc, modality) = loc_part
                .rsplit_once(" on ")
                .ok_or_else(|| fail(sentence, "malformed sentence"))?;
            let modality = parse_modality(modality, sentence)?;
            let (orientation, site) = parse_location(loc, vocab, sentence)?;
            let appearance = check_appearance(appearance, vocab, sentence)?;
            return Ok(vec![Finding {
                modality,
                orientation,
                anatomic_site: site.to_string(),
                appearance: appearance.to_string(),
            }]);
        }
        // Merged: "At {loc}, {m} shows {a}( and {m} shows {a})*"
        let (loc, items) = rest
            .split_once(", ")
            .ok_or_else(|| fail(sentence, "malformed sentence"))?;
        let (orientation, site) = parse_location(loc, vocab, sentence)?;
        let mut findings = Vec::new();
        for item in items.split(" and ") {
            let (modality, appearance) = item
                .split_once(" shows ")
                .ok_or_else(|| fail(sentence, "malformed merged item"))?;
            let modality = parse_modality(modality, sentence)?;
            let appearance = check_appearance(appearance, vocab, sentence)?;
            findings.push(Finding {
                modality,
                orientation,
                anatomic_site: site.to_string(),
                appearance: appearance.to_string(),
            });
        }
        return Ok(findings);
    }

    Err(fail(sentence, "unrecognized sentence form"))
}

/// Parses a pseudo report back into its finding multiset (document order).
/// Normal paragraphs parse as the empty list.
pub fn parse_report(text: &str, vocab: &Vocabulary) -> Result<Vec<Finding>, CodecError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(fail(text, "empty report"));
    }
    if NORMAL_PHRASINGS.contains(&trimmed) {
        return Ok(Vec::new());
    }
    let mut findings = Vec::new();
    for raw in trimmed.split(". ") {
        let body = raw.strip_suffix('.').unwrap_or(raw);
        if body.is_empty() {
            continue;
        }
        findings.extend(parse_sentence(body, vocab)?);
    }
    Ok(findings)
}

/// Report-level and item-level extraction quality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub parse_success_rate: f64,
    pub accuracy: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_count: u64,
}

fn finding_counts(findings: &[Finding]) -> HashMap<&Finding, u64> {
    let mut counts = HashMap::new();
    for f in findings {
        *counts.entry(f).or_insert(0) += 1;
    }
    counts
}

/// Scores predictions against gold item multisets. A failed parse (`None`)
/// contributes all of its gold items as misses. Item accuracy is
/// `TP / (TP + FP + FN)` aggregated over all reports, 0 when the denominator
/// vanishes.
pub fn eval_extraction(
    predictions: &[Option<Vec<Finding>>],
    gold: &[Vec<Finding>],
) -> Result<ExtractionReport, CodecError> {
    if predictions.len() != gold.len() {
        return Err(CodecError::LengthMismatch {
            predictions: predictions.len(),
            gold: gold.len(),
        });
    }
    let mut parsed = 0u64;
    let (mut tp, mut fp, mut fn_count) = (0u64, 0u64, 0u64);
    for (pred, gold_items) in predictions.iter().zip(gold) {
        match pred {
            None => fn_count += gold_items.len() as u64,
            Some(items) => {
                parsed += 1;
                let pred_counts = finding_counts(items);
                let gold_counts = finding_counts(gold_items);
                let mut matched = 0u64;
                for (f, &c) in &pred_counts {
                    matched += c.min(*gold_counts.get(f).unwrap_or(&0));
                }
                tp += matched;
                fp += items.len() as u64 - matched;
                fn_count += gold_items.len() as u64 - matched;
            }
        }
    }
    let total = predictions.len() as u64;
    let parse_success_rate = if total == 0 {
        0.0
    } else {
        parsed as f64 / total as f64
    };
    let denom = tp + fp + fn_count;
    let accuracy = if denom == 0 {
        0.0
    } else {
        tp as f64 / denom as f64
    };
    Ok(ExtractionReport {
        parse_success_rate,
        accuracy,
        tp,
        fp,
        fn_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::synthetic_vocabulary;
    use proptest::prelude::*;
    use std::collections::HashMap as Map;

    fn vocab() -> Vocabulary {
        synthetic_vocabulary(8, 6).unwrap()
    }

    fn finding(m: Modality, o: Orientation, s: &str, a: &str) -> Finding {
        Finding {
            modality: m,
            orientation: o,
            anatomic_site: s.into(),
            appearance: a.into(),
        }
    }

    fn multiset(fs: &[Finding]) -> Map<Finding, usize> {
        let mut m = Map::new();
        for f in fs {
            *m.entry(f.clone()).or_insert(0) += 1;
        }
        m
    }

    #[test]
    fn single_finding_round_trips_and_mentions_all_fields() {
        let v = vocab();
        let f = finding(
            Modality::T2WI,
            Orientation::Bilateral,
            "basal ganglia",
            "long t2 signal",
        );
        let text = generate_pseudo_report(std::slice::from_ref(&f), &StyleConfig::default());
        assert!(text.contains("T2WI"));
        assert!(text.contains("bilateral"));
        assert!(text.contains("basal ganglia"));
        assert!(text.contains("long t2 signal"));
        assert_eq!(parse_report(&text, &v).unwrap(), vec![f]);
    }

    #[test]
    fn empty_findings_produce_a_normal_paragraph() {
        let v = vocab();
        let text = generate_pseudo_report(&[], &StyleConfig::default());
        assert!(NORMAL_PHRASINGS.contains(&text.as_str()));
        for site in v.finding_sites() {
            assert!(!text.contains(site.as_str()), "normal text mentions {site}");
        }
        assert_eq!(parse_report(&text, &v).unwrap(), vec![]);
    }

    #[test]
    fn merged_same_site_mentions_site_once_and_round_trips() {
        let v = vocab();
        let f1 = finding(Modality::T1WI, Orientation::Left, "pons", "long t1 signal");
        let f2 = finding(Modality::T2WI, Orientation::Left, "pons", "long t2 signal");
        let style = StyleConfig {
            merge_same_site: true,
            ..StyleConfig::default()
        };
        let text = generate_pseudo_report(&[f1.clone(), f2.clone()], &style);
        assert_eq!(text.matches("pons").count(), 1, "text: {text}");
        assert!(text.contains("long t1 signal") && text.contains("long t2 signal"));
        let parsed = parse_report(&text, &v).unwrap();
        assert_eq!(multiset(&parsed), multiset(&[f1, f2]));
    }

    #[test]
    fn duplicate_findings_survive_the_round_trip() {
        let v = vocab();
        let f = finding(Modality::DWI, Orientation::None, "cerebellum", "patchy high signal");
        for merge in [false, true] {
            let style = StyleConfig {
                merge_same_site: merge,
                seed: 3,
                ..StyleConfig::default()
            };
            let fs = vec![f.clone(), f.clone()];
            let text = generate_pseudo_report(&fs, &style);
            let parsed = parse_report(&text, &v).unwrap();
            assert_eq!(multiset(&parsed), multiset(&fs), "merge={merge}, text: {text}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let f = finding(Modality::ADC, Orientation::Right, "thalamus", "short t1 signal");
        let style = StyleConfig {
            clause_order: ClauseOrder::Shuffled,
            seed: 77,
            ..StyleConfig::default()
        };
        let fs = vec![f.clone(), f];
        assert_eq!(
            generate_pseudo_report(&fs, &style),
            generate_pseudo_report(&fs, &style)
        );
    }

    #[test]
    fn gibberish_fails_to_parse() {
        assert!(matches!(
            parse_report("gibberish tokens here", &vocab()),
            Err(CodecError::ParseFailure(_))
        ));
        assert!(matches!(
            parse_report("On T1WI, xenon crystals shows sparkle.", &vocab()),
            Err(CodecError::ParseFailure(_))
        ));
        assert!(matches!(
            parse_report("   ", &vocab()),
            Err(CodecError::ParseFailure(_))
        ));
    }

    #[test]
    fn extraction_metrics_match_constructed_counts() {
        // 200 reports, 199 parsed; TP = 350, FP = 10, FN = 10 in total:
        // 175 perfect two-item reports, one parsed report with 10 spurious
        // items, one failed report with 10 gold items, 23 empty-vs-empty.
        let f = finding(Modality::T1WI, Orientation::Left, "pons", "long t1 signal");
        let g = finding(Modality::T2WI, Orientation::Right, "thalamus", "long t2 signal");
        let mut predictions: Vec<Option<Vec<Finding>>> = Vec::new();
        let mut gold: Vec<Vec<Finding>> = Vec::new();
        for _ in 0..175 {
            predictions.push(Some(vec![f.clone(), g.clone()]));
            gold.push(vec![f.clone(), g.clone()]);
        }
        predictions.push(Some(vec![f.clone(); 10]));
        gold.push(vec![]);
        predictions.push(None);
        gold.push(vec![g.clone(); 10]);
        for _ in 0..23 {
            predictions.push(Some(vec![]));
            gold.push(vec![]);
        }
        let report = eval_extraction(&predictions, &gold).unwrap();
        assert_eq!(report.tp, 350);
        assert_eq!(report.fp, 10);
        assert_eq!(report.fn_count, 10);
        assert_eq!(report.parse_success_rate, 0.995);
        assert!((report.accuracy - 350.0 / 370.0).abs() < 1e-12);
        assert!((report.accuracy - 0.9459).abs() < 1e-4);
    }

    #[test]
    fn perfect_predictions_score_one() {
        let f = finding(Modality::DWI, Orientation::None, "pons", "high signal");
        let predictions = vec![Some(vec![f.clone()]), Some(vec![])];
        let gold = vec![vec![f], vec![]];
        let report = eval_extraction(&predictions, &gold).unwrap();
        assert_eq!(report.parse_success_rate, 1.0);
        assert_eq!(report.accuracy, 1.0);
    }

    #[test]
    fn all_failures_score_zero() {
        let f = finding(Modality::DWI, Orientation::None, "pons", "high signal");
        let predictions: Vec<Option<Vec<Finding>>> = vec![None, None];
        let gold = vec![vec![f.clone()], vec![f]];
        let report = eval_extraction(&predictions, &gold).unwrap();
        assert_eq!(report.parse_success_rate, 0.0);
        assert_eq!(report.accuracy, 0.0);
    }

    #[test]
    fn empty_against_empty_is_not_perfect_accuracy() {
        // No gold items anywhere: the denominator vanishes, accuracy is 0.
        let predictions = vec![Some(vec![])];
        let gold = vec![vec![]];
        let report = eval_extraction(&predictions, &gold).unwrap();
        assert_eq!(report.accuracy, 0.0);
        assert_eq!(report.parse_success_rate, 1.0);
    }

    #[test]
    fn item_order_within_reports_does_not_matter() {
        let f = finding(Modality::T1WI, Orientation::Left, "pons", "long t1 signal");
        let g = finding(Modality::T2WI, Orientation::Right, "thalamus", "long t2 signal");
        let gold = vec![vec![f.clone(), g.clone()]];
        let a = eval_extraction(&[Some(vec![f.clone(), g.clone()])], &gold).unwrap();
        let b = eval_extraction(&[Some(vec![g, f])], &gold).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert_eq!(
            eval_extraction(&[None], &[]).unwrap_err(),
            CodecError::LengthMismatch {
                predictions: 1,
                gold: 0
            }
        );
    }

    fn arb_style() -> impl Strategy<Value = StyleConfig> {
        (
            prop::bool::ANY,
            prop::bool::ANY,
            1usize..=CONNECTIVE_INVENTORY.len(),
            any::<u64>(),
        )
            .prop_map(|(shuffled, merge, n_conn, seed)| StyleConfig {
                clause_order: if shuffled {
                    ClauseOrder::Shuffled
                } else {
                    ClauseOrder::AsGiven
                },
                connective_set: CONNECTIVE_INVENTORY[..n_conn]
                    .iter()
                    .map(|c| c.to_string())
                    .collect(),
                merge_same_site: merge,
                seed,
            })
    }

    fn arb_findings() -> impl Strategy<Value = Vec<Finding>> {
        let v = vocab();
        let sites: Vec<String> = v.finding_sites().cloned().collect();
        let apps: Vec<String> = v.finding_appearances().cloned().collect();
        prop::collection::vec(
            (0usize..5, 0usize..4, 0usize..sites.len(), 0usize..apps.len()).prop_map(
                move |(m, o, s, a)| Finding {
                    modality: Modality::ALL[m],
                    orientation: Orientation::ALL[o],
                    anatomic_site: sites[s].clone(),
                    appearance: apps[a].clone(),
                },
            ),
            0..6,
        )
    }

    proptest! {
        #[test]
        fn round_trip_is_multiset_identity(
            findings in arb_findings(),
            style in arb_style(),
        ) {
            let v = vocab();
            let text = generate_pseudo_report(&findings, &style);
            let parsed = parse_report(&text, &v).unwrap();
            prop_assert_eq!(multiset(&parsed), multiset(&findings));
        }

        #[test]
        fn unmerged_unshuffled_round_trip_preserves_order(
            findings in arb_findings(),
            seed in any::<u64>(),
        ) {
            let v = vocab();
            let style = StyleConfig { seed, ..StyleConfig::default() };
            let text = generate_pseudo_report(&findings, &style);
            let parsed = parse_report(&text, &v).unwrap();
            prop_assert_eq!(parsed, findings);
        }
    }
}
