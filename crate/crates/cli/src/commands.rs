use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use newsgraph::eval::{
    ablate_encoder, ablate_temporal, evaluate, export_embeddings, mean_interval, score_news,
    sweep_training_ratio, train_and_evaluate, write_encoder_table, write_metrics_csv, write_sweep_csv,
    MetricsReport, MetricsRow, RunResult, DEFAULT_RATIOS,
};
use newsgraph::featurize::{bind, load_features};
use newsgraph::hetgraph::{load_graph, NodeType};
use newsgraph::kv::load_kv;
use newsgraph::model::{load_checkpoint, save_checkpoint, GraphContext, Model, ModelConfig};
use newsgraph::seed;
use newsgraph::synthgen::{describe, generate, SynthConfig};
use newsgraph::train::{eval_seed, split_dataset, write_history, EpochRecord, Split, TrainConfig};
use newsgraph::{Error, Result};

use crate::manifest::RunManifest;
use crate::{
    AblateEncoderArgs, AblateTemporalArgs, CheckpointArgs, Command, DataArgs, RunArgs, SweepArgs,
    SynthArgs, TrainArgs, DEFAULT_SEED,
};

/// Effective model and training configuration of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Settings {
    /// Defaults, then the config file, then flags.
    pub fn load(run: &RunArgs) -> Result<Self> {
        let mut s = Settings {
            model: ModelConfig::default(),
            train: TrainConfig {
                seed: DEFAULT_SEED,
                ..TrainConfig::default()
            },
        };
        if let Some(path) = &run.config {
            for (k, v) in load_kv(path)? {
                if !s.model.set(&k, &v)? && !s.train.set(&k, &v)? {
                    return Err(Error::Config(format!("unknown key `{k}` in {}", path.display())));
                }
            }
        }
        if let Some(seed) = run.seed {
            s.train.seed = seed;
        }
        if let Some(f) = run.train_frac {
            s.train.train_frac = f;
        }
        s.model.validate()?;
        s.train.validate()?;
        Ok(s)
    }

    pub fn pairs(&self) -> BTreeMap<String, String> {
        self.model.to_pairs().into_iter().chain(self.train.to_pairs()).collect()
    }
}

/// Reads the graph and the feature tables present in `features_dir`.
pub fn load_context(graph: &Path, features_dir: &Path) -> Result<(GraphContext, Vec<(String, PathBuf)>)> {
    let g = load_graph(graph)?;
    let mut inputs = vec![("graph".to_string(), graph.to_path_buf())];
    let mut tables = Vec::new();
    for t in NodeType::ALL {
        let path = features_dir.join(format!("{t}.csv"));
        if path.exists() {
            tables.push(load_features(&path, t)?);
            inputs.push((format!("features.{t}"), path));
        }
    }
    let bundle = bind(&g, tables)?;
    Ok((GraphContext::new(g, bundle)?, inputs))
}

/// Parses `10,30,0.5`-style lists; values above 1 are percentages.
pub fn parse_ratios(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let v: f64 = s
                .parse()
                .map_err(|_| Error::Config(format!("invalid ratio `{s}`")))?;
            let v = if v > 1.0 { v / 100.0 } else { v };
            if v > 0.0 && v < 1.0 {
                Ok(v)
            } else {
                Err(Error::Config(format!("ratio `{s}` outside (0, 1)")))
            }
        })
        .collect::<Result<Vec<f64>>>()
        .and_then(|r| {
            if r.is_empty() {
                Err(Error::Config("empty ratio list".into()))
            } else {
                Ok(r)
            }
        })
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

/// Writes a text artifact produced into memory and records it in the manifest.
fn write_artifact(
    manifest: &mut RunManifest,
    path: PathBuf,
    fill: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
) -> Result<()> {
    let mut buf = Vec::new();
    let io = |e| Error::Io {
        path: path.clone(),
        source: e,
    };
    fill(&mut buf).map_err(io)?;
    std::fs::write(&path, buf).map_err(io)?;
    manifest.add_output(&path);
    Ok(())
}

fn record_inputs(manifest: &mut RunManifest, inputs: &[(String, PathBuf)]) -> Result<()> {
    for (name, path) in inputs {
        manifest.add_input(name, path)?;
    }
    Ok(())
}

fn record_seeds(manifest: &mut RunManifest, root: u64) {
    manifest.seeds.insert("root".into(), root);
    manifest.seeds.insert("init".into(), seed::derive(root, "init"));
    manifest.seeds.insert("split".into(), seed::derive(root, "split"));
    manifest.seeds.insert("eval_sample".into(), eval_seed(root));
}

fn labeled_split(ctx: &GraphContext, train: &TrainConfig) -> Result<Split> {
    split_dataset(&ctx.graph().labeled_news(), train.train_frac, train.seed)
}

fn split_csv(split: &Split, w: &mut Vec<u8>) -> std::io::Result<()> {
    use std::io::Write;
    writeln!(w, "id,part")?;
    for (part, ids) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
        for id in ids {
            writeln!(w, "{id},{part}")?;
        }
    }
    Ok(())
}

fn history_csv(history: &[EpochRecord]) -> impl FnOnce(&mut Vec<u8>) -> std::io::Result<()> + '_ {
    move |w| write_history(history, w)
}

fn metrics_row(run_id: String, manifest: &RunManifest, report: &MetricsReport) -> MetricsRow {
    MetricsRow {
        run_id,
        config_hash: manifest.config_hash.clone(),
        report: report.clone(),
    }
}

fn report_line(label: &str, m: &MetricsReport) {
    let auc = m.auc.map_or("undefined".to_string(), |a| format!("{a:.4}"));
    eprintln!(
        "{label}: precision {:.4} recall {:.4} f1 {:.4} accuracy {:.4} auc {auc}",
        m.precision, m.recall, m.f1, m.accuracy
    );
}

fn warn_excluded(excluded: &[String]) {
    if !excluded.is_empty() {
        eprintln!("note: {} isolated news excluded", excluded.len());
    }
}

pub(crate) fn execute(command: Command, argv: &[String]) -> Result<()> {
    match command {
        Command::Synth(a) => synth(&a, argv),
        Command::Train(a) => train(&a, argv),
        Command::Eval(a) => eval(&a, argv),
        Command::AblateTemporal(a) => ablate_temporal_cmd(&a, argv),
        Command::AblateEncoder(a) => ablate_encoder_cmd(&a, argv),
        Command::SweepRatio(a) => sweep(&a, argv),
        Command::ExportEmb(a) => export(&a, argv),
    }
}

fn synth(a: &SynthArgs, argv: &[String]) -> Result<()> {
    let mut config = match &a.config {
        Some(path) => {
            let mut c = SynthConfig {
                seed: DEFAULT_SEED,
                ..SynthConfig::default()
            };
            for (k, v) in load_kv(path)? {
                if !c.set(&k, &v)? {
                    return Err(Error::Config(format!("unknown generator key `{k}` in {}", path.display())));
                }
            }
            c
        }
        None => SynthConfig::default(),
    };
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    config.validate()?;
    let mut manifest = RunManifest::new("synth", argv, config.to_pairs().into_iter().collect());
    if let Some(path) = &a.config {
        manifest.add_input("config", path)?;
    }
    manifest.seeds.insert("root".into(), config.seed);

    let data = generate(&config)?;
    create_dir(&a.out)?;
    data.save(&a.out)?;
    manifest.add_output(&a.out.join("graph.jsonl"));
    for t in data.features.tables() {
        manifest.add_output(&a.out.join(format!("{}.csv", t.node_type)));
    }
    let summary = describe(&config).to_kv();
    write_artifact(&mut manifest, a.out.join("summary.cfg"), |w| {
        w.extend_from_slice(summary.as_bytes());
        Ok(())
    })?;
    eprintln!(
        "generated {} nodes and {} edges in {}",
        data.graph.node_count(),
        data.graph.edge_count(),
        a.out.display()
    );
    manifest.finish(&a.out)?;
    Ok(())
}

fn prepare(
    command: &str,
    argv: &[String],
    data: &DataArgs,
    run: &RunArgs,
    settings: &Settings,
) -> Result<(GraphContext, RunManifest)> {
    let (ctx, inputs) = load_context(&data.graph, &data.features_dir)?;
    let mut manifest = RunManifest::new(command, argv, settings.pairs());
    record_inputs(&mut manifest, &inputs)?;
    if let Some(path) = &run.config {
        manifest.add_input("config", path)?;
    }
    record_seeds(&mut manifest, settings.train.seed);
    create_dir(&run.out)?;
    Ok((ctx, manifest))
}

fn train(a: &TrainArgs, argv: &[String]) -> Result<()> {
    let mut settings = Settings::load(&a.run)?;
    if let Some(e) = a.encoder {
        settings.model.encoder = e;
    }
    if let Some(t) = a.temporal {
        settings.model.temporal = t;
    }
    let (ctx, mut manifest) = prepare("train", argv, &a.data, &a.run, &settings)?;
    let out = &a.run.out;
    let split = labeled_split(&ctx, &settings.train)?;
    let result = train_and_evaluate(&ctx, &split, &settings.model, &settings.train)?;
    warn_excluded(&result.excluded);

    let model = Model {
        config: settings.model.clone(),
        params: result.params.clone(),
    };
    let ckpt = out.join("checkpoint.txt");
    save_checkpoint(&model, &ckpt)?;
    manifest.add_output(&ckpt);
    write_artifact(&mut manifest, out.join("history.csv"), history_csv(&result.history))?;
    write_artifact(&mut manifest, out.join("split.csv"), |w| split_csv(&split, w))?;
    let rows = vec![metrics_row("test".into(), &manifest, &result.report)];
    write_artifact(&mut manifest, out.join("metrics.csv"), |w| write_metrics_csv(&rows, w))?;
    report_line(&format!("test (best epoch {})", result.best_epoch), &result.report);
    manifest.finish(out)?;
    Ok(())
}

fn checkpoint_run(
    command: &str,
    a: &CheckpointArgs,
    argv: &[String],
) -> Result<(GraphContext, Model, TrainConfig, RunManifest)> {
    let model = load_checkpoint(&a.checkpoint)?;
    let train = TrainConfig {
        seed: a.seed.unwrap_or(DEFAULT_SEED),
        train_frac: a.train_frac.unwrap_or(TrainConfig::default().train_frac),
        ..TrainConfig::default()
    };
    train.validate()?;
    let (ctx, inputs) = load_context(&a.data.graph, &a.data.features_dir)?;
    let mut pairs: BTreeMap<String, String> = model.config.to_pairs().into_iter().collect();
    pairs.insert("seed".into(), train.seed.to_string());
    pairs.insert("train_frac".into(), train.train_frac.to_string());
    let mut manifest = RunManifest::new(command, argv, pairs);
    record_inputs(&mut manifest, &inputs)?;
    manifest.add_input("checkpoint", &a.checkpoint)?;
    record_seeds(&mut manifest, train.seed);
    create_dir(&a.out)?;
    Ok((ctx, model, train, manifest))
}

fn eval(a: &CheckpointArgs, argv: &[String]) -> Result<()> {
    let (ctx, model, train, mut manifest) = checkpoint_run("eval", a, argv)?;
    let split = labeled_split(&ctx, &train)?;
    let (report, scored) = evaluate(&ctx, &split.test, &model.params, &model.config, train.seed)?;
    warn_excluded(&scored.isolated);
    let rows = vec![metrics_row("test".into(), &manifest, &report)];
    write_artifact(&mut manifest, a.out.join("metrics.csv"), |w| write_metrics_csv(&rows, w))?;
    report_line("test", &report);
    manifest.finish(&a.out)?;
    Ok(())
}

fn export(a: &CheckpointArgs, argv: &[String]) -> Result<()> {
    let (ctx, model, train, mut manifest) = checkpoint_run("export-emb", a, argv)?;
    let ids: Vec<String> = ctx.graph().nodes_of_type(NodeType::News).map(String::from).collect();
    let scored = score_news(&ctx, &ids, &model.params, &model.config, train.seed)?;
    warn_excluded(&scored.isolated);
    let path = a.out.join("embeddings.csv");
    export_embeddings(&scored.embedding_map(), &scored.label_map(), &path)?;
    manifest.add_output(&path);
    eprintln!("exported {} embeddings to {}", scored.ids.len(), path.display());
    manifest.finish(&a.out)?;
    Ok(())
}

/// Per-variant mean and half-width of every metric over the runs.
fn summary_csv(variants: &[(String, Vec<MetricsReport>)], w: &mut Vec<u8>) -> std::io::Result<()> {
    use std::io::Write;
    writeln!(w, "variant,metric,mean,half_width,n")?;
    for (name, reports) in variants {
        let metrics: [(&str, Vec<f64>); 5] = [
            ("precision", reports.iter().map(|m| m.precision).collect()),
            ("recall", reports.iter().map(|m| m.recall).collect()),
            ("f1", reports.iter().map(|m| m.f1).collect()),
            ("accuracy", reports.iter().map(|m| m.accuracy).collect()),
            ("auc", reports.iter().filter_map(|m| m.auc).collect()),
        ];
        for (metric, values) in metrics {
            if let Ok(i) = mean_interval(&values) {
                writeln!(w, "{name},{metric},{:.16e},{:.16e},{}", i.mean, i.half_width, i.n)?;
            }
        }
    }
    Ok(())
}

fn run_seeds(root: u64, runs: u64) -> Result<Vec<u64>> {
    if runs == 0 {
        return Err(Error::Config("--runs must be at least 1".into()));
    }
    Ok((0..runs).map(|i| root.wrapping_add(i)).collect())
}

fn write_run(manifest: &mut RunManifest, out: &Path, name: &str, run: &RunResult) -> Result<()> {
    warn_excluded(&run.excluded);
    report_line(name, &run.report);
    write_artifact(manifest, out.join(format!("history-{name}.csv")), history_csv(&run.history))
}

fn ablate_temporal_cmd(a: &AblateTemporalArgs, argv: &[String]) -> Result<()> {
    let mut settings = Settings::load(&a.run)?;
    if let Some(e) = a.encoder {
        settings.model.encoder = e;
    }
    let (ctx, mut manifest) = prepare("ablate-temporal", argv, &a.data, &a.run, &settings)?;
    let out = &a.run.out;
    let mut rows = Vec::new();
    let mut variants = vec![("gru".to_string(), Vec::new()), ("attention".to_string(), Vec::new())];
    for s in run_seeds(settings.train.seed, a.runs)? {
        let train = TrainConfig { seed: s, ..settings.train.clone() };
        let split = labeled_split(&ctx, &train)?;
        let result = ablate_temporal(&ctx, &split, &settings.model, &train)?;
        for (slot, (mode, run)) in [("gru", &result.gru), ("attention", &result.attention)].into_iter().enumerate() {
            let name = format!("{mode}-s{s}");
            write_run(&mut manifest, out, &name, run)?;
            rows.push(metrics_row(name, &manifest, &run.report));
            variants[slot].1.push(run.report.clone());
        }
    }
    write_artifact(&mut manifest, out.join("metrics.csv"), |w| write_metrics_csv(&rows, w))?;
    write_artifact(&mut manifest, out.join("summary.csv"), |w| summary_csv(&variants, w))?;
    manifest.finish(out)?;
    Ok(())
}

fn ablate_encoder_cmd(a: &AblateEncoderArgs, argv: &[String]) -> Result<()> {
    let mut settings = Settings::load(&a.run)?;
    if let Some(t) = a.temporal {
        settings.model.temporal = t;
    }
    let (ctx, mut manifest) = prepare("ablate-encoder", argv, &a.data, &a.run, &settings)?;
    let out = &a.run.out;
    let mut rows = Vec::new();
    let mut variants: Vec<(String, Vec<MetricsReport>)> = Vec::new();
    let mut table = Vec::new();
    for s in run_seeds(settings.train.seed, a.runs)? {
        let train = TrainConfig { seed: s, ..settings.train.clone() };
        let split = labeled_split(&ctx, &train)?;
        for (i, (encoder, run)) in ablate_encoder(&ctx, &split, &settings.model, &train)?.into_iter().enumerate() {
            let name = format!("{encoder}-s{s}");
            write_run(&mut manifest, out, &name, &run)?;
            rows.push(metrics_row(name, &manifest, &run.report));
            if variants.len() <= i {
                variants.push((encoder.to_string(), Vec::new()));
                table.push((encoder, run.report.clone()));
            }
            variants[i].1.push(run.report);
        }
    }
    write_artifact(&mut manifest, out.join("metrics.csv"), |w| write_metrics_csv(&rows, w))?;
    write_artifact(&mut manifest, out.join("encoders.csv"), |w| write_encoder_table(&table, w))?;
    write_artifact(&mut manifest, out.join("summary.csv"), |w| summary_csv(&variants, w))?;
    manifest.finish(out)?;
    Ok(())
}

fn sweep(a: &SweepArgs, argv: &[String]) -> Result<()> {
    let mut settings = Settings::load(&a.run)?;
    if let Some(e) = a.encoder {
        settings.model.encoder = e;
    }
    if let Some(t) = a.temporal {
        settings.model.temporal = t;
    }
    let ratios = match &a.ratios {
        Some(text) => parse_ratios(text)?,
        None => DEFAULT_RATIOS.to_vec(),
    };
    let (ctx, mut manifest) = prepare("sweep-ratio", argv, &a.data, &a.run, &settings)?;
    manifest
        .config
        .insert("ratios".into(), ratios.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
    let out = &a.run.out;
    let results = sweep_training_ratio(&ctx, &ratios, &settings.model, &settings.train)?;
    let mut rows = Vec::new();
    for r in &results {
        let name = format!("ratio-{}", r.ratio);
        write_run(&mut manifest, out, &name, &r.run)?;
        rows.push(metrics_row(name, &manifest, &r.run.report));
    }
    let table: Vec<(f64, Option<f64>)> = results.iter().map(|r| (r.ratio, r.run.report.auc)).collect();
    write_artifact(&mut manifest, out.join("sweep.csv"), |w| write_sweep_csv(&table, w))?;
    write_artifact(&mut manifest, out.join("metrics.csv"), |w| write_metrics_csv(&rows, w))?;
    manifest.finish(out)?;
    Ok(())
}
