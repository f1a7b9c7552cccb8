use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::store::ResultsStore;
use crate::error::{invalid, Error, Result};
use crate::metrics::{relative_error_rate, zscore, Metric};
use crate::scaling::{
    crossover, fit_mixed_model, likelihood_ratio_test, partial_regression, spearman, CrossoverEstimate,
    FitMethod, LrtResult, MixedModelFit, Predictor, ScalingObservation,
};

/// Which report sections to emit. All off means only the score table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisOptions {
    #[serde(default = "default_baseline")]
    pub baseline: String,
    #[serde(default)]
    pub rer: bool,
    #[serde(default)]
    pub mattr: bool,
    #[serde(default)]
    pub scaling: bool,
    #[serde(default)]
    pub lrt: bool,
    #[serde(default)]
    pub spearman: bool,
    #[serde(default)]
    pub plots: bool,
    /// Models compared against the baseline; empty means every other model.
    #[serde(default)]
    pub comparison_models: Vec<String>,
    /// Models entering scaling fits, LRTs and correlations; empty means the
    /// comparison models.
    #[serde(default)]
    pub scaling_models: Vec<String>,
    #[serde(default = "default_method")]
    pub fit_method: FitMethod,
}

fn default_baseline() -> String {
    "biaffine-lstm".into()
}

fn default_method() -> FitMethod {
    FitMethod::Ml
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            baseline: default_baseline(),
            rer: false,
            mattr: false,
            scaling: false,
            lrt: false,
            spearman: false,
            plots: false,
            comparison_models: Vec::new(),
            scaling_models: Vec::new(),
            fit_method: FitMethod::Ml,
        }
    }
}

impl AnalysisOptions {
    /// Every section on.
    pub fn full() -> Self {
        AnalysisOptions {
            rer: true,
            mattr: true,
            scaling: true,
            lrt: true,
            spearman: true,
            plots: true,
            ..Default::default()
        }
    }

    fn needs_baseline(&self) -> bool {
        self.rer || self.scaling || self.lrt || self.spearman || self.plots
    }
}

/// Named text files (tab-separated tables with a header row).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReportBundle {
    pub files: BTreeMap<String, String>,
}

impl ReportBundle {
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for (name, body) in &self.files {
            fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RerEntry {
    pub language: String,
    pub model: String,
    pub metric: Metric,
    pub rer: f64,
}

/// Languages ordered by training size (largest first), then code.
pub fn language_order(store: &ResultsStore) -> Vec<String> {
    let mut langs: Vec<String> = store.scored_languages().into_iter().collect();
    let size = |l: &String| store.languages.get(l).map(|i| i.train_sentences);
    langs.sort_by(|a, b| match (size(a), size(b)) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(a.cmp(b)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.cmp(b),
    });
    langs
}

fn comparison_models(store: &ResultsStore, options: &AnalysisOptions) -> Vec<String> {
    if options.comparison_models.is_empty() {
        store.models().into_iter().filter(|m| *m != options.baseline).collect()
    } else {
        options.comparison_models.clone()
    }
}

fn scaling_models(store: &ResultsStore, options: &AnalysisOptions) -> Vec<String> {
    if options.scaling_models.is_empty() {
        comparison_models(store, options)
    } else {
        options.scaling_models.clone()
    }
}

/// Fails with the list of languages that lack baseline scores.
pub fn check_baseline(store: &ResultsStore, baseline: &str) -> Result<()> {
    let missing: Vec<String> = language_order(store)
        .into_iter()
        .filter(|l| Metric::ALL.iter().any(|&m| store.get(l, baseline, m).is_none()))
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        invalid(format!(
            "baseline {baseline:?} has no scores for: {}",
            missing.join(", ")
        ))
    }
}

/// RER of every comparison model against the baseline means, in language
/// order. Cells without comparison scores are skipped.
pub fn rer_table(store: &ResultsStore, options: &AnalysisOptions, metric: Metric) -> Result<Vec<RerEntry>> {
    check_baseline(store, &options.baseline)?;
    let mut out = Vec::new();
    for language in language_order(store) {
        let base = store.get(&language, &options.baseline, metric).expect("checked");
        for model in comparison_models(store, options) {
            if let Some(cmp) = store.get(&language, &model, metric) {
                out.push(RerEntry {
                    language: language.clone(),
                    model,
                    metric,
                    rer: relative_error_rate(base.mean, cmp.mean)?,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MattrRow {
    pub language: String,
    pub tokens: Option<usize>,
    pub mattr: f64,
    pub z: f64,
}

/// MATTR of every language with a value, standardized across languages.
pub fn mattr_table(store: &ResultsStore) -> Result<Vec<MattrRow>> {
    let mut rows: Vec<(String, Option<usize>, f64)> = store
        .languages
        .values()
        .filter_map(|i| i.mattr.map(|m| (i.language.clone(), i.train_tokens, m)))
        .collect();
    rows.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    let values: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let z = zscore(&values)?;
    Ok(rows
        .into_iter()
        .zip(z)
        .map(|((language, tokens, mattr), s)| MattrRow {
            language,
            tokens,
            mattr,
            z: s.z,
        })
        .collect())
}

/// Observations for the scaling fits: one per seed where the comparison
/// model has per-seed scores (RER against the baseline mean), else one per
/// language from the means.
pub fn scaling_observations(
    store: &ResultsStore,
    baseline: &str,
    model: &str,
    metric: Metric,
) -> Result<Vec<ScalingObservation>> {
    check_baseline(store, baseline)?;
    let z: BTreeMap<String, f64> = match mattr_table(store) {
        Ok(rows) => rows.into_iter().map(|r| (r.language, r.z)).collect(),
        Err(_) => BTreeMap::new(),
    };
    let seeds: BTreeMap<&str, Vec<(u64, f64)>> =
        store
            .seed_scores
            .iter()
            .filter(|s| s.model == model && s.metric == metric)
            .fold(BTreeMap::new(), |mut acc, s| {
                acc.entry(s.language.as_str()).or_default().push((s.seed, s.value));
                acc
            });
    let mut obs = Vec::new();
    for language in language_order(store) {
        let Some(cmp) = store.get(&language, model, metric) else {
            continue;
        };
        let info = store.languages.get(&language).ok_or_else(|| {
            Error::InvalidInput(format!("no training size recorded for {language}"))
        })?;
        let base = store.get(&language, baseline, metric).expect("checked").mean;
        let row = |rer: f64, seed: Option<u64>| ScalingObservation {
            language: language.clone(),
            log_train: info.train_sentences.log10(),
            mattr_z: z.get(&language).copied().unwrap_or(f64::NAN),
            rer,
            metric,
            model: model.to_string(),
            seed,
        };
        match seeds.get(language.as_str()) {
            Some(values) => {
                let mut values = values.clone();
                values.sort_by_key(|v| v.0);
                for (seed, v) in values {
                    obs.push(row(relative_error_rate(base, v)?, Some(seed)));
                }
            }
            None => obs.push(row(relative_error_rate(base, cmp.mean)?, None)),
        }
    }
    if obs.is_empty() {
        return invalid(format!("no {metric} scores for model {model:?}"));
    }
    Ok(obs)
}

fn has_mattr(obs: &[ScalingObservation]) -> bool {
    obs.iter().all(|o| o.mattr_z.is_finite())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingSummary {
    pub model: String,
    pub metric: Metric,
    pub fit: MixedModelFit,
    pub crossover: Option<CrossoverEstimate>,
}

pub fn scaling_fit(
    store: &ResultsStore,
    options: &AnalysisOptions,
    model: &str,
    metric: Metric,
) -> Result<ScalingSummary> {
    let obs = scaling_observations(store, &options.baseline, model, metric)?;
    let fit = fit_mixed_model(&obs, &[Predictor::LogTrain], options.fit_method)?;
    Ok(ScalingSummary {
        model: model.to_string(),
        metric,
        crossover: crossover(&fit).ok(),
        fit,
    })
}

/// Does adding the MATTR covariate improve an ML fit on log training size?
pub fn mattr_lrt(store: &ResultsStore, baseline: &str, model: &str, metric: Metric) -> Result<LrtResult> {
    let obs = scaling_observations(store, baseline, model, metric)?;
    if !has_mattr(&obs) {
        return invalid("MATTR is missing for some languages");
    }
    let null = fit_mixed_model(&obs, &[Predictor::LogTrain], FitMethod::Ml)?;
    let alt = fit_mixed_model(&obs, &[Predictor::LogTrain, Predictor::MattrZ], FitMethod::Ml)?;
    likelihood_ratio_test(&null, &alt)
}

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

fn scores_section(store: &ResultsStore) -> String {
    let mut out = String::from("language\tmodel\tmetric\tmean\tsd\tn_seeds\tsource\n");
    for a in store.aggregates() {
        let source = match a.source {
            super::store::ScoreSource::Internal => "internal",
            super::store::ScoreSource::External => "external",
        };
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{:.4}\t{:.4}\t{}\t{source}",
            a.language,
            a.model,
            a.metric,
            a.mean,
            a.sd,
            a.values.len()
        );
    }
    out
}

fn rer_section(entries: &[RerEntry], models: &[String]) -> String {
    let mut out = format!("language\t{}\n", models.join("\t"));
    let mut by_lang: Vec<(String, BTreeMap<String, f64>)> = Vec::new();
    for e in entries {
        if by_lang.last().map(|l| &l.0) != Some(&e.language) {
            by_lang.push((e.language.clone(), BTreeMap::new()));
        }
        by_lang.last_mut().expect("pushed").1.insert(e.model.clone(), e.rer);
    }
    for (lang, cells) in by_lang {
        let row: Vec<String> = models
            .iter()
            .map(|m| cells.get(m).map_or("NA".to_string(), |v| f6(*v)))
            .collect();
        let _ = writeln!(out, "{lang}\t{}", row.join("\t"));
    }
    out
}

/// Builds the report; a pure function of the store and the options.
pub fn emit_report(store: &ResultsStore, options: &AnalysisOptions) -> Result<ReportBundle> {
    let mut files = BTreeMap::new();
    files.insert("scores.tsv".to_string(), scores_section(store));
    if options.needs_baseline() {
        check_baseline(store, &options.baseline)?;
    }
    let comparison = comparison_models(store, options);
    let scaling = scaling_models(store, options);

    if options.rer {
        for metric in Metric::ALL {
            let entries = rer_table(store, options, metric)?;
            files.insert(
                format!("rer_{}.tsv", metric.to_string().to_lowercase()),
                rer_section(&entries, &comparison),
            );
        }
    }

    if options.mattr {
        let mut out = String::from("language\ttokens\tmattr\tz\n");
        for r in mattr_table(store)? {
            let tokens = r.tokens.map_or("NA".to_string(), |t| t.to_string());
            let _ = writeln!(out, "{}\t{tokens}\t{}\t{:.3}", r.language, f6(r.mattr), r.z);
        }
        files.insert("mattr.tsv".into(), out);
    }

    if options.scaling {
        let mut out = String::from(
            "model\tmetric\tmethod\tn_obs\tn_groups\tintercept\tslope\tslope_se\tslope_p\t\
             intercept_var\tresidual_var\tloglik\tcrossover_log10\tcrossover_sentences\twarnings\n",
        );
        for model in &scaling {
            for metric in Metric::ALL {
                let s = scaling_fit(store, options, model, metric)?;
                let f = &s.fit;
                let slope_idx = f
                    .names
                    .iter()
                    .position(|n| n == Predictor::LogTrain.name())
                    .expect("log_train in fit");
                let (cx, cs) = match &s.crossover {
                    Some(c) => (format!("{:.3}", c.log10_sentences), c.sentences.to_string()),
                    None => ("NA".into(), "NA".into()),
                };
                let _ = writeln!(
                    out,
                    "{model}\t{metric}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{cx}\t{cs}\t{}",
                    f.fitted_by,
                    f.n_obs,
                    f.n_groups,
                    f6(f.fixed_effects[0]),
                    f6(f.fixed_effects[slope_idx]),
                    f6(f.std_errors[slope_idx]),
                    f6(f.p_values[slope_idx]),
                    f6(f.random_intercept_variance),
                    f6(f.residual_variance),
                    f6(f.log_likelihood),
                    if f.warnings.is_empty() { "-".to_string() } else { f.warnings.join("; ") },
                );
            }
        }
        files.insert("scaling.tsv".into(), out);
    }

    if options.lrt {
        let mut out = String::from("model\tmetric\tchi2\tdf\tp_value\n");
        for model in &scaling {
            for metric in Metric::ALL {
                let lrt = mattr_lrt(store, &options.baseline, model, metric)?;
                let _ = writeln!(out, "{model}\t{metric}\t{:.3}\t{}\t{:.3}", lrt.chi2, lrt.df, lrt.p_value);
            }
        }
        files.insert("lrt.tsv".into(), out);
    }

    if options.spearman {
        let mut out = String::from("model\tmetric\trho\tp_value\tn\n");
        for model in &scaling {
            for metric in Metric::ALL {
                let (x, y): (Vec<f64>, Vec<f64>) = rer_table(store, options, metric)?
                    .into_iter()
                    .filter(|e| &e.model == model)
                    .map(|e| (store.languages.get(&e.language).map_or(f64::NAN, |i| i.train_sentences), e.rer))
                    .unzip();
                if x.iter().any(|v| v.is_nan()) {
                    return invalid("training sizes missing for the correlation");
                }
                let c = spearman(&x, &y)?;
                let _ = writeln!(out, "{model}\t{metric}\t{:.3}\t{:.3}\t{}", c.rho, c.p_value, c.n);
            }
        }
        files.insert("spearman.tsv".into(), out);
    }

    if options.plots {
        let mut points = String::from("model\tmetric\tlanguage\tseed\tlog_train\trer\n");
        let mut curves = String::from("model\tmetric\tlog_train\tfitted_rer\n");
        let mut partial = String::from("model\tmetric\tlanguage\tmattr_resid\trer_resid\n");
        for model in &scaling {
            for metric in Metric::ALL {
                let obs = scaling_observations(store, &options.baseline, model, metric)?;
                for o in &obs {
                    let seed = o.seed.map_or("NA".to_string(), |s| s.to_string());
                    let _ = writeln!(
                        points,
                        "{model}\t{metric}\t{}\t{seed}\t{}\t{}",
                        o.language,
                        f6(o.log_train),
                        f6(o.rer)
                    );
                }
                let fit = fit_mixed_model(&obs, &[Predictor::LogTrain], options.fit_method)?;
                let lo = obs.iter().map(|o| o.log_train).fold(f64::INFINITY, f64::min);
                let hi = obs.iter().map(|o| o.log_train).fold(f64::NEG_INFINITY, f64::max);
                for k in 0..=50 {
                    let x = lo + (hi - lo) * k as f64 / 50.0;
                    let y = fit.predict(&[(Predictor::LogTrain.name(), x)]);
                    let _ = writeln!(curves, "{model}\t{metric}\t{}\t{}", f6(x), f6(y));
                }
                if has_mattr(&obs) {
                    let pr = partial_regression(&obs, Predictor::MattrZ, &[Predictor::LogTrain])?;
                    for (o, (xr, yr)) in obs.iter().zip(pr.points) {
                        let _ = writeln!(partial, "{model}\t{metric}\t{}\t{}\t{}", o.language, f6(xr), f6(yr));
                    }
                }
            }
        }
        files.insert("plot_rer_points.tsv".into(), points);
        files.insert("plot_rer_curves.tsv".into(), curves);
        files.insert("plot_partial_mattr.tsv".into(), partial);
    }

    Ok(ReportBundle { files })
}
