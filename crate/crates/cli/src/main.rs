use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use deplab::harness::{
    collect_language_info, emit_report, ingest_external_scores, mattr_table, rer_table, run_experiment,
    scaling_fit, search_language, prepare_language, AnalysisOptions, ExperimentConfig, LanguageInfo,
    ResultsStore,
};
use deplab::lexicon::load_embeddings;
use deplab::metrics::{evaluate, Metric, PunctPolicy};
use deplab::parser::{parse, Checkpoint};
use deplab::scaling::FitMethod;
use deplab::treebank::parse_conllu;
use deplab::{Error, Result};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "deplab", version, about = "Dependency-parsing experiments and scaling analysis")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GlobalArgs {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output / results-store directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    punct: Option<Punct>,
    #[arg(long = "single-root", global = true, value_enum)]
    single_root: Option<OnOff>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Punct {
    Include,
    Exclude,
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Ml,
    Reml,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured language x seed and write results.
    Train,
    /// Grid search per language; writes grid.json.
    GridSearch,
    /// Score a saved checkpoint on a CoNLL-U file.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        treebank: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
    },
    /// Validate score files and merge them into the results store.
    IngestScores {
        #[arg(long)]
        input: Vec<PathBuf>,
    },
    /// Relative error rates against the baseline.
    Rer {
        #[arg(long)]
        baseline: Option<String>,
    },
    /// MATTR and z-scores per language.
    Mattr {
        /// CSV with columns language,mattr instead of computing from treebanks.
        #[arg(long)]
        values: Option<PathBuf>,
    },
    /// Random-intercept fit of RER on log training size.
    ScalingFit {
        #[arg(long)]
        model: String,
        #[arg(long, default_value = "LAS")]
        metric: String,
        #[arg(long, value_enum, default_value = "ml")]
        method: Method,
        #[arg(long)]
        baseline: Option<String>,
    },
    /// Emit report tables and plot data from the results store.
    Report {
        /// Emit every section regardless of the config.
        #[arg(long)]
        all: bool,
    },
}

fn load_config(global: &GlobalArgs) -> Result<Option<ExperimentConfig>> {
    let Some(path) = &global.config else {
        return Ok(None);
    };
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = global.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(out) = &global.out {
        cfg.out_dir = out.clone();
    }
    if let Some(p) = global.punct {
        cfg.punct = match p {
            Punct::Include => PunctPolicy::Include,
            Punct::Exclude => PunctPolicy::Exclude,
        };
    }
    if let Some(s) = global.single_root {
        cfg.single_root = matches!(s, OnOff::On);
    }
    Ok(Some(cfg))
}

fn require_config(global: &GlobalArgs) -> Result<ExperimentConfig> {
    load_config(global)?.ok_or_else(|| Error::Config("--config is required".into()))
}

fn store_dir(global: &GlobalArgs, cfg: Option<&ExperimentConfig>) -> Result<PathBuf> {
    global
        .out
        .clone()
        .or_else(|| cfg.map(|c| c.out_dir.clone()))
        .ok_or_else(|| Error::Config("give --out or --config".into()))
}

fn analysis(cfg: Option<&ExperimentConfig>) -> AnalysisOptions {
    cfg.map(|c| c.analysis.clone()).unwrap_or_default()
}

fn run(cli: Cli) -> Result<Value> {
    let g = &cli.global;
    match cli.command {
        Command::Train => {
            let cfg = require_config(g)?;
            let outcome = run_experiment(&cfg)?;
            Ok(json!({
                "runs": outcome.manifests.len(),
                "failures": outcome.store.failures.len(),
                "out_dir": cfg.out_dir,
            }))
        }
        Command::GridSearch => {
            let cfg = require_config(g)?;
            let mut results = serde_json::Map::new();
            for lang in &cfg.languages {
                let prepared = prepare_language(&cfg, lang, &cfg.hyperparams)?;
                if let Some(outcome) = search_language(&cfg, &prepared)? {
                    results.insert(lang.code.clone(), serde_json::to_value(outcome).expect("serializable"));
                }
            }
            if results.is_empty() {
                return Err(Error::Config("config has no [grid] section".into()));
            }
            fs::create_dir_all(&cfg.out_dir)?;
            let value = Value::Object(results);
            fs::write(cfg.out_dir.join("grid.json"), serde_json::to_string_pretty(&value).expect("json") + "\n")?;
            Ok(value)
        }
        Command::Evaluate {
            checkpoint,
            treebank,
            embeddings,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let table = match embeddings {
                Some(path) => Some(load_embeddings(&fs::read_to_string(path)?, ck.params.static_unk.ncols())?),
                None => None,
            };
            ck.check_embeddings(table.as_ref())?;
            let gold = parse_conllu(&fs::read_to_string(&treebank)?, "")?;
            let single_root = !matches!(g.single_root, Some(OnOff::Off));
            let predicted = gold
                .iter()
                .map(|s| parse(s, &ck.params, &ck.vocab, table.as_ref(), single_root))
                .collect::<Result<Vec<_>>>()?;
            let punct = match g.punct {
                Some(Punct::Exclude) => PunctPolicy::Exclude,
                _ => PunctPolicy::Include,
            };
            let score = evaluate(&gold, &predicted, punct)?;
            Ok(json!({"uas": score.uas, "las": score.las, "tokens": score.token_count}))
        }
        Command::IngestScores { input } => {
            let cfg = load_config(g)?;
            let dir = store_dir(g, cfg.as_ref())?;
            let mut store = ResultsStore::load(&dir)?;
            let mut files = input;
            if let Some(cfg) = &cfg {
                files.extend(cfg.external_scores.iter().cloned());
                for info in collect_language_info(cfg)? {
                    store.set_language(info);
                }
            }
            if files.is_empty() {
                return Err(Error::Config("no score files given".into()));
            }
            let mut rows = 0;
            for path in &files {
                let parsed = ingest_external_scores(&fs::read_to_string(path)?)
                    .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
                rows += parsed.len();
                store.add_external(parsed)?;
            }
            store.save(&dir)?;
            Ok(json!({"rows": rows, "store": dir}))
        }
        Command::Rer { baseline } => {
            let cfg = load_config(g)?;
            let store = ResultsStore::load(&store_dir(g, cfg.as_ref())?)?;
            let mut options = analysis(cfg.as_ref());
            if let Some(b) = baseline {
                options.baseline = b;
            }
            println!("metric\tlanguage\tmodel\trer");
            for metric in Metric::ALL {
                for e in rer_table(&store, &options, metric)? {
                    println!("{metric}\t{}\t{}\t{:.6}", e.language, e.model, e.rer);
                }
            }
            Ok(Value::Null)
        }
        Command::Mattr { values } => {
            let mut store = ResultsStore::default();
            match (values, load_config(g)?) {
                (Some(path), _) => {
                    for (language, mattr) in read_mattr_values(&path)? {
                        store.set_language(LanguageInfo {
                            language,
                            train_sentences: 1.0,
                            mattr: Some(mattr),
                            train_tokens: None,
                        });
                    }
                }
                (None, Some(cfg)) => {
                    for info in collect_language_info(&cfg)? {
                        store.set_language(info);
                    }
                }
                (None, None) => return Err(Error::Config("give --values or --config".into())),
            }
            println!("language\ttokens\tmattr\tz");
            for r in mattr_table(&store)? {
                let tokens = r.tokens.map_or("NA".to_string(), |t| t.to_string());
                println!("{}\t{tokens}\t{:.6}\t{:.3}", r.language, r.mattr, r.z);
            }
            Ok(Value::Null)
        }
        Command::ScalingFit {
            model,
            metric,
            method,
            baseline,
        } => {
            let cfg = load_config(g)?;
            let store = ResultsStore::load(&store_dir(g, cfg.as_ref())?)?;
            let mut options = analysis(cfg.as_ref());
            if let Some(b) = baseline {
                options.baseline = b;
            }
            options.fit_method = match method {
                Method::Ml => FitMethod::Ml,
                Method::Reml => FitMethod::Reml,
            };
            let s = scaling_fit(&store, &options, &model, Metric::parse(&metric)?)?;
            let f = &s.fit;
            println!("model = {}", s.model);
            println!("metric = {}", s.metric);
            println!("method = {}", f.fitted_by);
            println!("n_obs = {}", f.n_obs);
            println!("n_groups = {}", f.n_groups);
            for (i, name) in f.names.iter().enumerate() {
                println!("beta.{name} = {:.6}", f.fixed_effects[i]);
                println!("se.{name} = {:.6}", f.std_errors[i]);
                println!("p.{name} = {:.6}", f.p_values[i]);
            }
            println!("random_intercept_variance = {:.6}", f.random_intercept_variance);
            println!("residual_variance = {:.6}", f.residual_variance);
            println!("log_likelihood = {:.6}", f.log_likelihood);
            match &s.crossover {
                Some(c) => {
                    println!("crossover_log10 = {:.3}", c.log10_sentences);
                    println!("crossover_sentences = {}", c.sentences);
                }
                None => println!("crossover = none"),
            }
            for w in &f.warnings {
                println!("warning = {w}");
            }
            Ok(Value::Null)
        }
        Command::Report { all } => {
            let cfg = load_config(g)?;
            let dir = store_dir(g, cfg.as_ref())?;
            let store = ResultsStore::load(&dir)?;
            let options = if all {
                AnalysisOptions {
                    baseline: analysis(cfg.as_ref()).baseline,
                    ..AnalysisOptions::full()
                }
            } else {
                analysis(cfg.as_ref())
            };
            let bundle = emit_report(&store, &options)?;
            let report_dir = dir.join("report");
            bundle.write(&report_dir)?;
            Ok(json!({"report": report_dir, "files": bundle.files.keys().collect::<Vec<_>>()}))
        }
    }
}

/// Reads a `language,mattr` file with a header row.
fn read_mattr_values(path: &Path) -> Result<Vec<(String, f64)>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, row) in text.lines().enumerate().skip(1) {
        if row.trim().is_empty() {
            continue;
        }
        let mut parts = row.split(',').map(str::trim);
        match (parts.next(), parts.next().and_then(|v| v.parse::<f64>().ok()), parts.next()) {
            (Some(lang), Some(v), None) if !lang.is_empty() => out.push((lang.to_string(), v)),
            _ => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: "expected language,mattr".into(),
                })
            }
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let line = json!({"error": {"kind": "usage", "message": e.to_string().trim()}});
            eprintln!("{line}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(Value::Null) => ExitCode::SUCCESS,
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let line = json!({"error": {"kind": e.kind(), "message": e.to_string()}});
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
