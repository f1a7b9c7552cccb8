//! Attachment scores, relative error rate, MATTR, and z-scores.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::treebank::DepSentence;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "LAS")]
    Las,
    #[serde(rename = "UAS")]
    Uas,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Las, Metric::Uas];

    pub fn parse(s: &str) -> Result<Metric> {
        match s {
            "LAS" | "las" => Ok(Metric::Las),
            "UAS" | "uas" => Ok(Metric::Uas),
            other => invalid(format!("unknown metric {other:?} (expected LAS or UAS)")),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Las => "LAS",
            Metric::Uas => "UAS",
        })
    }
}

/// Whether punctuation tokens count towards attachment scores.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PunctPolicy {
    #[default]
    Include,
    Exclude,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalScore {
    pub uas: f64,
    pub las: f64,
    pub token_count: usize,
}

impl EvalScore {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Las => self.las,
            Metric::Uas => self.uas,
        }
    }
}

/// A predicted parse: heads (`heads[d-1]` heads token d) and relation labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub heads: Vec<usize>,
    pub deprels: Vec<String>,
}

/// Micro-averaged UAS/LAS over all scored tokens.
pub fn evaluate(
    gold: &[DepSentence],
    predicted: &[Prediction],
    punct: PunctPolicy,
) -> Result<EvalScore> {
    if gold.len() != predicted.len() {
        return invalid(format!(
            "{} gold sentences but {} predictions",
            gold.len(),
            predicted.len()
        ));
    }
    let mut total = 0usize;
    let mut heads_ok = 0usize;
    let mut both_ok = 0usize;
    for (i, (g, p)) in gold.iter().zip(predicted).enumerate() {
        if p.heads.len() != g.len() || p.deprels.len() != g.len() {
            return invalid(format!(
                "sentence {i}: {} gold tokens but {} heads / {} labels predicted",
                g.len(),
                p.heads.len(),
                p.deprels.len()
            ));
        }
        for (t, (h, rel)) in g.tokens.iter().zip(p.heads.iter().zip(&p.deprels)) {
            if punct == PunctPolicy::Exclude && t.is_punct() {
                continue;
            }
            total += 1;
            if *h == t.head {
                heads_ok += 1;
                if *rel == t.deprel {
                    both_ok += 1;
                }
            }
        }
    }
    let pct = |k: usize| {
        if total == 0 {
            0.0
        } else {
            100.0 * k as f64 / total as f64
        }
    };
    Ok(EvalScore {
        uas: pct(heads_ok),
        las: pct(both_ok),
        token_count: total,
    })
}

/// Share of the baseline's remaining error that the comparison model adds:
/// `(baseline - comparison) / (100 - baseline)`. Positive means the
/// comparison model makes more errors.
pub fn relative_error_rate(baseline: f64, comparison: f64) -> Result<f64> {
    if !(baseline.is_finite() && comparison.is_finite()) {
        return invalid("relative error rate needs finite scores");
    }
    if baseline >= 100.0 {
        return invalid(format!(
            "baseline score {baseline} leaves no remaining error"
        ));
    }
    Ok((baseline - comparison) / (100.0 - baseline))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MattrScore {
    pub language: String,
    pub token_count: usize,
    pub window: usize,
    pub value: f64,
}

/// Mean type/token ratio over all stride-1 windows of length `window`. Texts
/// shorter than the window are scored as a single window over the whole text.
pub fn mattr<S: AsRef<str>>(tokens: &[S], window: usize) -> Result<f64> {
    if window < 1 {
        return invalid("MATTR window must be at least 1");
    }
    if tokens.is_empty() {
        return invalid("MATTR needs at least one token");
    }
    let n = tokens.len();
    let w = window.min(n);
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &tokens[..w] {
        *counts.entry(t.as_ref()).or_default() += 1;
    }
    let mut type_sum = counts.len() as u64;
    for i in w..n {
        let out = tokens[i - w].as_ref();
        let c = counts.get_mut(out).expect("outgoing token was counted");
        *c -= 1;
        if *c == 0 {
            counts.remove(out);
        }
        *counts.entry(tokens[i].as_ref()).or_default() += 1;
        type_sum += counts.len() as u64;
    }
    let windows = (n - w + 1) as f64;
    Ok(type_sum as f64 / (windows * w as f64))
}

/// MATTR over the gold word forms of a treebank split.
pub fn treebank_mattr(language: &str, sentences: &[DepSentence], window: usize) -> Result<MattrScore> {
    let forms: Vec<&str> = sentences.iter().flat_map(|s| s.forms()).collect();
    Ok(MattrScore {
        language: language.to_string(),
        token_count: forms.len(),
        window,
        value: mattr(&forms, window)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardizedScore {
    pub raw: f64,
    pub z: f64,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample (n - 1) standard deviation; 0 for fewer than two values.
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m).powi(2)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Standardize with the sample standard deviation.
pub fn zscore(values: &[f64]) -> Result<Vec<StandardizedScore>> {
    if values.len() < 2 {
        return invalid("z-scores need at least two values");
    }
    let m = mean(values);
    let s = sample_sd(values);
    if s == 0.0 || !s.is_finite() {
        return invalid("z-scores undefined for zero variance");
    }
    Ok(values
        .iter()
        .map(|&raw| StandardizedScore {
            raw,
            z: (raw - m) / s,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::DepToken;

    fn gold(heads: &[usize], rels: &[&str]) -> DepSentence {
        DepSentence {
            tokens: heads
                .iter()
                .zip(rels)
                .enumerate()
                .map(|(i, (&h, r))| DepToken::new(i + 1, "w", if *r == "punct" { "PUNCT" } else { "X" }, h, r))
                .collect(),
            sent_id: None,
            language: "tst".into(),
        }
    }

    fn pred(heads: &[usize], rels: &[&str]) -> Prediction {
        Prediction {
            heads: heads.to_vec(),
            deprels: rels.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn perfect_and_label_only_errors() {
        let g = gold(&[0, 1, 1], &["root", "obj", "punct"]);
        let s = evaluate(&[g.clone()], &[pred(&[0, 1, 1], &["root", "obj", "punct"])], PunctPolicy::Include).unwrap();
        assert_eq!((s.uas, s.las), (100.0, 100.0));
        let s = evaluate(&[g], &[pred(&[0, 1, 1], &["a", "b", "c"])], PunctPolicy::Include).unwrap();
        assert_eq!((s.uas, s.las), (100.0, 0.0));
    }

    #[test]
    fn hand_counted_ten_tokens() {
        let heads = [0, 1, 1, 1, 1, 1, 1, 1, 1, 1];
        let rels = ["r"; 10];
        let g = gold(&heads, &rels);
        // tokens 9 and 10 get wrong heads, token 8 a wrong label
        let mut ph = heads.to_vec();
        ph[8] = 2;
        ph[9] = 3;
        let mut pr = rels.to_vec();
        pr[7] = "x";
        let s = evaluate(&[g], &[pred(&ph, &pr)], PunctPolicy::Include).unwrap();
        assert!((s.uas - 80.0).abs() < 1e-12);
        assert!((s.las - 70.0).abs() < 1e-12);
        assert_eq!(s.token_count, 10);
    }

    #[test]
    fn punct_filter_and_misalignment() {
        let g = gold(&[0, 1], &["root", "punct"]);
        let p = pred(&[0, 0], &["root", "punct"]);
        let inc = evaluate(&[g.clone()], &[p.clone()], PunctPolicy::Include).unwrap();
        let exc = evaluate(&[g.clone()], &[p], PunctPolicy::Exclude).unwrap();
        assert_eq!(inc.uas, 50.0);
        assert_eq!(exc.uas, 100.0);
        assert_eq!(exc.token_count, 1);
        assert!(evaluate(&[g.clone()], &[], PunctPolicy::Include).is_err());
        assert!(evaluate(&[g], &[pred(&[0], &["root"])], PunctPolicy::Include).is_err());
    }

    #[test]
    fn rer_values() {
        assert!((relative_error_rate(93.51, 95.81).unwrap() + 0.354).abs() < 0.0005);
        assert!((relative_error_rate(70.38, 61.08).unwrap() - 0.314).abs() < 0.0005);
        assert_eq!(relative_error_rate(80.0, 80.0).unwrap(), 0.0);
        assert!(relative_error_rate(100.0, 90.0).is_err());
    }

    #[test]
    fn mattr_hand_values() {
        assert_eq!(mattr(&["a", "b", "c", "d"], 2).unwrap(), 1.0);
        assert_eq!(mattr(&["a", "a", "a", "a"], 2).unwrap(), 0.5);
        let v = mattr(&["a", "b", "a", "b", "a", "b"], 3).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
        // shorter than the window: one window over the text
        assert_eq!(mattr(&["a", "a", "b"], 500).unwrap(), 2.0 / 3.0);
        assert!(mattr(&["a"], 0).is_err());
        assert!(mattr::<&str>(&[], 3).is_err());
    }

    #[test]
    fn zscore_two_point_and_errors() {
        let z = zscore(&[-1.0, 1.0]).unwrap();
        assert!((z[0].z + std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((z[1].z - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(zscore(&[2.0, 2.0, 2.0]).is_err());
        assert!(zscore(&[2.0]).is_err());
    }
}
