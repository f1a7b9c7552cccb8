use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::metrics::{mean, sample_sd, Metric};

pub const SCORES_FILE: &str = "scores.csv";
pub const AGGREGATES_FILE: &str = "aggregates.csv";
pub const LANGUAGES_FILE: &str = "languages.csv";
pub const FAILURES_FILE: &str = "failures.csv";

/// One per-seed score of an internal run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedScore {
    pub language: String,
    pub model: String,
    pub metric: Metric,
    pub seed: u64,
    pub value: f64,
}

/// Aggregate row: `language,model,metric,mean,sd`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub language: String,
    pub model: String,
    pub metric: Metric,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LanguageInfo {
    pub language: String,
    pub train_sentences: f64,
    pub mattr: Option<f64>,
    pub train_tokens: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub language: String,
    pub seed: u64,
    pub kind: String,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreSource {
    Internal,
    External,
}

/// A (language, model, metric) cell with its per-seed values when known.
#[derive(Clone, Debug, PartialEq)]
pub struct Aggregate {
    pub language: String,
    pub model: String,
    pub metric: Metric,
    pub mean: f64,
    pub sd: f64,
    pub values: Vec<f64>,
    pub source: ScoreSource,
}

type Key = (String, String, Metric);

/// Everything an experiment produced: internal per-seed scores, ingested
/// aggregates, language metadata, and failed runs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultsStore {
    pub seed_scores: Vec<SeedScore>,
    pub external: Vec<ScoreSummary>,
    pub languages: BTreeMap<String, LanguageInfo>,
    pub failures: Vec<RunFailure>,
}

fn key_of(language: &str, model: &str, metric: Metric) -> Key {
    (language.to_string(), model.to_string(), metric)
}

impl ResultsStore {
    pub fn add_run(&mut self, language: &str, model: &str, seed: u64, uas: f64, las: f64) {
        for (metric, value) in [(Metric::Las, las), (Metric::Uas, uas)] {
            self.seed_scores.push(SeedScore {
                language: language.to_string(),
                model: model.to_string(),
                metric,
                seed,
                value,
            });
        }
    }

    fn internal_keys(&self) -> BTreeSet<Key> {
        self.seed_scores
            .iter()
            .map(|s| key_of(&s.language, &s.model, s.metric))
            .collect()
    }

    /// Merges ingested rows; a key already present (internal or external) is
    /// an error.
    pub fn add_external(&mut self, rows: Vec<ScoreSummary>) -> Result<()> {
        let mut taken = self.internal_keys();
        taken.extend(self.external.iter().map(|r| key_of(&r.language, &r.model, r.metric)));
        for row in &rows {
            if !taken.insert(key_of(&row.language, &row.model, row.metric)) {
                return invalid(format!(
                    "scores for ({}, {}, {}) already present",
                    row.language, row.model, row.metric
                ));
            }
        }
        self.external.extend(rows);
        Ok(())
    }

    pub fn set_language(&mut self, info: LanguageInfo) {
        self.languages.insert(info.language.clone(), info);
    }

    /// All cells sorted by (language, model, metric). Internal cells carry
    /// their seeds' mean and sample sd.
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut cells: BTreeMap<Key, Aggregate> = BTreeMap::new();
        let mut sorted = self.seed_scores.clone();
        sorted.sort_by(|a, b| {
            key_of(&a.language, &a.model, a.metric)
                .cmp(&key_of(&b.language, &b.model, b.metric))
                .then(a.seed.cmp(&b.seed))
        });
        for s in &sorted {
            cells
                .entry(key_of(&s.language, &s.model, s.metric))
                .or_insert_with(|| Aggregate {
                    language: s.language.clone(),
                    model: s.model.clone(),
                    metric: s.metric,
                    mean: 0.0,
                    sd: 0.0,
                    values: Vec::new(),
                    source: ScoreSource::Internal,
                })
                .values
                .push(s.value);
        }
        for cell in cells.values_mut() {
            cell.mean = mean(&cell.values);
            cell.sd = sample_sd(&cell.values);
        }
        for r in &self.external {
            cells.entry(key_of(&r.language, &r.model, r.metric)).or_insert_with(|| Aggregate {
                language: r.language.clone(),
                model: r.model.clone(),
                metric: r.metric,
                mean: r.mean,
                sd: r.sd,
                values: Vec::new(),
                source: ScoreSource::External,
            });
        }
        cells.into_values().collect()
    }

    pub fn get(&self, language: &str, model: &str, metric: Metric) -> Option<Aggregate> {
        self.aggregates()
            .into_iter()
            .find(|a| a.language == language && a.model == model && a.metric == metric)
    }

    pub fn models(&self) -> BTreeSet<String> {
        self.aggregates().into_iter().map(|a| a.model).collect()
    }

    pub fn scored_languages(&self) -> BTreeSet<String> {
        self.aggregates().into_iter().map(|a| a.language).collect()
    }

    pub fn scores_csv(&self) -> Result<String> {
        let mut rows = self.seed_scores.clone();
        rows.sort_by(|a, b| {
            key_of(&a.language, &a.model, a.metric)
                .cmp(&key_of(&b.language, &b.model, b.metric))
                .then(a.seed.cmp(&b.seed))
        });
        to_csv(&rows)
    }

    pub fn aggregates_csv(&self) -> Result<String> {
        let rows: Vec<ScoreSummary> = self
            .aggregates()
            .into_iter()
            .map(|a| ScoreSummary {
                language: a.language,
                model: a.model,
                metric: a.metric,
                mean: a.mean,
                sd: a.sd,
            })
            .collect();
        to_csv(&rows)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(SCORES_FILE), self.scores_csv()?)?;
        fs::write(dir.join(AGGREGATES_FILE), self.aggregates_csv()?)?;
        let languages: Vec<_> = self.languages.values().cloned().collect();
        fs::write(dir.join(LANGUAGES_FILE), to_csv(&languages)?)?;
        fs::write(dir.join(FAILURES_FILE), to_csv(&self.failures)?)?;
        Ok(())
    }

    /// Reads a saved store. Aggregate rows backed by per-seed scores must
    /// agree with them; the remaining rows are external.
    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| -> Result<Option<String>> {
            let path = dir.join(name);
            if path.exists() {
                Ok(Some(fs::read_to_string(path)?))
            } else {
                Ok(None)
            }
        };
        let mut store = ResultsStore::default();
        if let Some(text) = read(SCORES_FILE)? {
            store.seed_scores = from_csv(&text)?;
        }
        let internal: BTreeMap<Key, Aggregate> = store
            .aggregates()
            .into_iter()
            .map(|a| (key_of(&a.language, &a.model, a.metric), a))
            .collect();
        if let Some(text) = read(AGGREGATES_FILE)? {
            for row in from_csv::<ScoreSummary>(&text)? {
                match internal.get(&key_of(&row.language, &row.model, row.metric)) {
                    Some(a) => {
                        if (a.mean - row.mean).abs() > 1e-9 || (a.sd - row.sd).abs() > 1e-9 {
                            return invalid(format!(
                                "aggregate ({}, {}, {}) disagrees with its per-seed scores",
                                row.language, row.model, row.metric
                            ));
                        }
                    }
                    None => store.external.push(row),
                }
            }
        }
        if let Some(text) = read(LANGUAGES_FILE)? {
            for info in from_csv::<LanguageInfo>(&text)? {
                store.set_language(info);
            }
        }
        if let Some(text) = read(FAILURES_FILE)? {
            store.failures = from_csv(&text)?;
        }
        Ok(store)
    }
}

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn from_csv<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Parses and validates a `language,model,metric,mean,sd` file. Errors name
/// the offending line.
pub fn ingest_external_scores(text: &str) -> Result<Vec<ScoreSummary>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != ["language", "model", "metric", "mean", "sd"] {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header language,model,metric,mean,sd, got {}", header.join(",")),
        });
    }
    let mut seen = BTreeSet::new();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record?;
        let fail = |message: String| Error::Parse { line, message };
        if record.len() != 5 {
            return Err(fail(format!("expected 5 fields, got {}", record.len())));
        }
        let number = |idx: usize, name: &str| {
            record[idx]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| fail(format!("{name} is not a number: {:?}", &record[idx])))
        };
        let metric = Metric::parse(&record[2]).map_err(|e| fail(e.to_string()))?;
        let (mean, sd) = (number(3, "mean")?, number(4, "sd")?);
        if !(0.0..=100.0).contains(&mean) {
            return Err(fail(format!("mean {mean} outside [0, 100]")));
        }
        if sd < 0.0 {
            return Err(fail(format!("negative sd {sd}")));
        }
        if record[0].is_empty() || record[1].is_empty() {
            return Err(fail("empty language or model".into()));
        }
        if !seen.insert(key_of(&record[0], &record[1], metric)) {
            return Err(fail(format!(
                "duplicate key ({}, {}, {metric})",
                &record[0], &record[1]
            )));
        }
        rows.push(ScoreSummary {
            language: record[0].to_string(),
            model: record[1].to_string(),
            metric,
            mean,
            sd,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "language,model,metric,mean,sd\n";

    #[test]
    fn ingest_accepts_published_row() {
        let rows = ingest_external_scores(&format!("{HEADER}fra,AfroXLMR-large,LAS,95.81,0.05\n")).unwrap();
        assert_eq!(rows[0].mean, 95.81);
        assert_eq!(rows[0].metric, Metric::Las);
    }

    #[test]
    fn ingest_rejects_bad_rows() {
        let range = ingest_external_scores(&format!("{HEADER}fra,m,LAS,105,0.1\n")).unwrap_err();
        assert!(matches!(range, Error::Parse { line: 2, .. }), "{range}");
        let dup = ingest_external_scores(&format!("{HEADER}fra,m,LAS,90,0.1\nfra,m,LAS,91,0.1\n"))
            .unwrap_err();
        assert!(matches!(dup, Error::Parse { line: 3, .. }), "{dup}");
        assert!(ingest_external_scores(&format!("{HEADER}fra,m,LAS,90,-1\n")).is_err());
        assert!(ingest_external_scores(&format!("{HEADER}fra,m,XAS,90,1\n")).is_err());
        assert!(ingest_external_scores("a,b\n").is_err());
    }

    #[test]
    fn aggregates_use_sample_sd_and_round_trip() {
        let mut store = ResultsStore::default();
        for (seed, v) in [(1, 80.0), (2, 82.0), (3, 84.0)] {
            store.add_run("aaa", "m", seed, v + 1.0, v);
        }
        store
            .add_external(vec![ScoreSummary {
                language: "aaa".into(),
                model: "ext".into(),
                metric: Metric::Las,
                mean: 70.0,
                sd: 1.0,
            }])
            .unwrap();
        let las = store.get("aaa", "m", Metric::Las).unwrap();
        assert_eq!(las.mean, 82.0);
        assert!((las.sd - 2.0).abs() < 1e-12);
        assert_eq!(las.values.len(), 3);

        let dup = ScoreSummary {
            language: "aaa".into(),
            model: "m".into(),
            metric: Metric::Uas,
            mean: 1.0,
            sd: 0.0,
        };
        assert!(store.add_external(vec![dup]).is_err());

        store.set_language(LanguageInfo {
            language: "aaa".into(),
            train_sentences: 100.0,
            mattr: Some(0.5),
            train_tokens: None,
        });
        let dir = tempfile::tempdir().unwrap();
        store.save(dir.path()).unwrap();
        let back = ResultsStore::load(dir.path()).unwrap();
        assert_eq!(back.aggregates(), store.aggregates());
        assert_eq!(back.languages, store.languages);
        assert_eq!(back.scores_csv().unwrap(), store.scores_csv().unwrap());
        assert!(store.scores_csv().unwrap().starts_with("language,model,metric,seed,value\n"));
        assert!(store.aggregates_csv().unwrap().starts_with("language,model,metric,mean,sd\n"));
    }
}
