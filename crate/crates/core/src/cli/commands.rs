use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::{
    bin_by_implicitness, load_verdicts, pragmatic_diversity, score_corpus, verdict_accuracy_by_bin,
    verdict_map, AnalysisReport, DiversityReport, DEFAULT_DIVERSITY_SAMPLES,
};
use crate::backend::{EmbeddingBackend, EmbeddingTable};
use crate::data::{dataset_stats, generate_negatives, load_instances, load_pairs};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate_instances, load_choice_questions, load_ranking_questions, run_choice_task,
    run_ranking_task,
};
use crate::io::{write_jsonl, write_jsonl_to};
use crate::model::{FeatureSet, ModelConfig, ProjectionHead};
use crate::training::{split_dataset, train_with_observer, Checkpoint, TrainConfig, TrainMeta};

use super::config::{BackendSpec, FileConfig};
use super::{
    AnalyzeArgs, Cli, Command, EvalArgs, MakeInstancesArgs, PairdistArgs, ScoreArgs, StatsArgs,
    TaskArgs, TrainArgs,
};

struct Ctx {
    file: FileConfig,
    seed: u64,
    backend: BackendSpec,
    quiet: bool,
}

impl Ctx {
    fn new(cli: &Cli) -> Result<Self> {
        let file = match &cli.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let seed = cli.seed.or(file.seed).unwrap_or(0);
        let backend = cli
            .backend
            .as_deref()
            .or(file.backend.as_deref())
            .unwrap_or("toy")
            .parse()?;
        Ok(Self {
            file,
            seed,
            backend,
            quiet: cli.quiet,
        })
    }

    fn log(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn load_head(&self, path: &Path) -> Result<(ProjectionHead, Box<dyn EmbeddingBackend>)> {
        let (_, head) = Checkpoint::load(path)?;
        let backend = self.backend.build(head.config().d)?;
        Ok((head, backend))
    }
}

pub(super) fn dispatch(cli: &Cli) -> Result<()> {
    let ctx = Ctx::new(cli)?;
    match &cli.command {
        Command::MakeInstances(a) => make_instances(&ctx, a),
        Command::Train(a) => train(&ctx, a),
        Command::Score(a) => score(&ctx, a),
        Command::Pairdist(a) => pairdist(&ctx, a),
        Command::Eval(a) => eval(&ctx, a),
        Command::Rank(a) => rank(&ctx, a),
        Command::Choice(a) => choice(&ctx, a),
        Command::Analyze(a) => analyze(&ctx, a),
        Command::Stats(a) => stats(a),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => write_file(p, bytes),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn read_input(path: Option<&Path>) -> Result<String> {
    match path {
        Some(p) if p != Path::new("-") => fs::read_to_string(p).map_err(|e| Error::io(p, e)),
        _ => {
            let mut s = String::new();
            io::stdin().lock().read_to_string(&mut s)?;
            Ok(s)
        }
    }
}

/// Non-blank lines, with a trailing `\r` removed.
fn text_lines(body: &str) -> Vec<String> {
    body.lines()
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .filter(|l| !l.trim().is_empty())
        .map(String::from)
        .collect()
}

/// Escapes backslash, tab, newline and carriage return for a TSV field.
pub(crate) fn tsv_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub(crate) fn tsv_unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

fn make_instances(ctx: &Ctx, a: &MakeInstancesArgs) -> Result<()> {
    let pairs = load_pairs(&a.pairs)?;
    let sampling = generate_negatives(&pairs, ctx.seed);
    write_jsonl(&a.out, &sampling.instances)?;
    for s in &sampling.skipped {
        ctx.log(format!(
            "skipped pair {} (source {:?}): {:?}",
            s.index + 1,
            s.source,
            s.reason
        ));
    }
    if let Some(p) = &a.skipped {
        write_jsonl(p, &sampling.skipped)?;
    }
    ctx.log(format!(
        "wrote {} instances, skipped {}",
        sampling.instances.len(),
        sampling.skipped.len()
    ));
    Ok(())
}

fn resolve_configs(ctx: &Ctx, a: &TrainArgs) -> Result<(ModelConfig, TrainConfig)> {
    let mut m = ctx.file.model_config();
    m.d = a.d.unwrap_or(m.d);
    m.l = a.l.unwrap_or(m.l);
    m.imp_metric = a.imp_metric.unwrap_or(m.imp_metric);
    m.prag_metric = a.prag_metric.unwrap_or(m.prag_metric);
    m.transform = a.transform.unwrap_or(m.transform);
    let mut t = ctx.file.train_config();
    t.gamma1 = a.gamma1.unwrap_or(t.gamma1);
    t.gamma2 = a.gamma2.unwrap_or(t.gamma2);
    t.alpha = a.alpha.unwrap_or(t.alpha);
    t.lr = a.lr.unwrap_or(t.lr);
    t.batch_size = a.batch_size.unwrap_or(t.batch_size);
    t.epochs = a.epochs.unwrap_or(t.epochs);
    t.split = a.split.unwrap_or(t.split);
    t.seed = ctx.seed;
    m.validate()?;
    t.validate()?;
    Ok((m, t))
}

fn train(ctx: &Ctx, a: &TrainArgs) -> Result<()> {
    let (model_cfg, train_cfg) = resolve_configs(ctx, a)?;
    let instances = load_instances(&a.instances)?;
    let backend = ctx.backend.build(model_cfg.d)?;
    ctx.log(format!(
        "training on {} instances with {}",
        instances.len(),
        backend.id()
    ));
    let trained = train_with_observer(&instances, backend.as_ref(), &model_cfg, &train_cfg, |r| {
        ctx.log(format!(
            "epoch {}: loss={:.6} val_imp_acc={:.4} val_prag_acc={:.4}",
            r.epoch + 1,
            r.mean_loss,
            r.val_imp_acc,
            r.val_prag_acc
        ))
    })?;
    let checkpoint = Checkpoint::new(
        &trained.head,
        TrainMeta::from_history(&trained.history, train_cfg.seed),
    );
    checkpoint.save(&a.out)?;
    let history_path = a.history.clone().unwrap_or_else(|| {
        a.out
            .parent()
            .map_or_else(|| PathBuf::from("history.json"), |p| p.join("history.json"))
    });
    write_file(&history_path, &json_bytes(&trained.history)?)?;
    if let Some(dir) = &a.split_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let split = split_dataset(&instances, &train_cfg)?;
        write_jsonl(dir.join("train.jsonl"), &split.train)?;
        write_jsonl(dir.join("val.jsonl"), &split.val)?;
        write_jsonl(dir.join("test.jsonl"), &split.test)?;
    }
    if let Some(t) = &trained.history.test {
        ctx.log(format!(
            "test: imp_acc={:.4} prag_acc={:.4}",
            t.implicitness, t.pragmatics
        ));
    }
    ctx.log(format!("wrote {}", a.out.display()));
    Ok(())
}

#[derive(Serialize)]
struct FeatureRecord<'a> {
    text: &'a str,
    features: FeatureSet,
}

fn score(ctx: &Ctx, a: &ScoreArgs) -> Result<()> {
    let (head, backend) = ctx.load_head(&a.checkpoint)?;
    let texts = text_lines(&read_input(a.input.as_deref())?);
    let mut out = String::new();
    if !texts.is_empty() {
        let corpus = score_corpus(
            &texts,
            &head,
            backend.as_ref(),
            &a.checkpoint.display().to_string(),
        )?;
        for item in &corpus.items {
            out.push_str(&format!("{}\t{}\n", tsv_escape(&item.text), item.score));
        }
    }
    emit(a.out.as_deref(), out.as_bytes())?;
    if let Some(p) = &a.features {
        let table = EmbeddingTable::build(backend.as_ref(), texts.iter().map(String::as_str))?;
        let records = texts
            .iter()
            .map(|t| {
                Ok(FeatureRecord {
                    text: t,
                    features: head.project(table.get(t)?)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut buf = Vec::new();
        write_jsonl_to(&mut buf, &records)?;
        write_file(p, &buf)?;
    }
    Ok(())
}

fn pairdist(ctx: &Ctx, a: &PairdistArgs) -> Result<()> {
    let (head, backend) = ctx.load_head(&a.checkpoint)?;
    let body = read_input(a.input.as_deref())?;
    let source = a.input.clone().unwrap_or_else(|| PathBuf::from("-"));
    let mut pairs = Vec::new();
    for (n, line) in body.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::Format {
                path: source.clone(),
                line: n + 1,
                msg: format!("expected 2 tab-separated fields, got {}", fields.len()),
            });
        }
        pairs.push((tsv_unescape(fields[0]), tsv_unescape(fields[1])));
    }
    let table = EmbeddingTable::build(
        backend.as_ref(),
        pairs.iter().flat_map(|(x, y)| [x.as_str(), y.as_str()]),
    )?;
    let mut out = String::new();
    for (x, y) in &pairs {
        let dp = head.pragmatic_distance(table.get(x)?, table.get(y)?)?;
        out.push_str(&format!("{}\t{}\t{dp}\n", tsv_escape(x), tsv_escape(y)));
    }
    emit(a.out.as_deref(), out.as_bytes())
}

fn eval(ctx: &Ctx, a: &EvalArgs) -> Result<()> {
    let (head, backend) = ctx.load_head(&a.checkpoint)?;
    let instances = load_instances(&a.instances)?;
    let report = evaluate_instances(&instances, &head, backend.as_ref())?;
    emit(a.out.as_deref(), &json_bytes(&report)?)
}

fn rank(ctx: &Ctx, a: &TaskArgs) -> Result<()> {
    let (head, backend) = ctx.load_head(&a.checkpoint)?;
    let questions = load_ranking_questions(&a.questions)?;
    let report = run_ranking_task(&questions, &head, backend.as_ref())?;
    if let Some(p) = &a.csv {
        let mut buf = Vec::new();
        report.write_csv(&mut buf)?;
        write_file(p, &buf)?;
    }
    ctx.log(format!(
        "mean tau={:.4} mean rho={:.4}",
        report.mean_tau, report.mean_rho
    ));
    emit(a.out.as_deref(), &json_bytes(&report)?)
}

fn choice(ctx: &Ctx, a: &TaskArgs) -> Result<()> {
    let (head, backend) = ctx.load_head(&a.checkpoint)?;
    let questions = load_choice_questions(&a.questions)?;
    let report = run_choice_task(&questions, &head, backend.as_ref())?;
    if let Some(p) = &a.csv {
        let mut buf = Vec::new();
        report.write_csv(&mut buf)?;
        write_file(p, &buf)?;
    }
    ctx.log(format!("accuracy={:.4}", report.accuracy));
    emit(a.out.as_deref(), &json_bytes(&report)?)
}

fn analyze(ctx: &Ctx, a: &AnalyzeArgs) -> Result<()> {
    let (head, backend) = ctx.load_head(&a.checkpoint)?;
    let body = fs::read_to_string(&a.texts).map_err(|e| Error::io(&a.texts, e))?;
    let texts = text_lines(&body);
    if texts.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} contains no texts",
            a.texts.display()
        )));
    }
    let mut corpus = score_corpus(
        &texts,
        &head,
        backend.as_ref(),
        &a.checkpoint.display().to_string(),
    )?;
    if a.dedup {
        corpus = corpus.dedup();
    }
    let bins = match &a.verdicts {
        Some(p) => verdict_accuracy_by_bin(&corpus, &verdict_map(&load_verdicts(p)?)?)?,
        None => bin_by_implicitness(&corpus.scores())?,
    };
    let kept: Vec<String> = corpus.items.iter().map(|i| i.text.clone()).collect();
    let n_samples = a
        .n_samples
        .or(ctx.file.n_samples)
        .unwrap_or(DEFAULT_DIVERSITY_SAMPLES);
    let diversity = if kept.len() >= 2 {
        pragmatic_diversity(&kept, &head, backend.as_ref(), n_samples, ctx.seed)?
    } else {
        ctx.log("fewer than 2 texts; pragmatic diversity skipped");
        Vec::new()
    };
    let report = AnalysisReport {
        checkpoint_id: corpus.checkpoint_id.clone(),
        backend_id: corpus.backend_id.clone(),
        deduplicated: a.dedup,
        summary: corpus.summary(),
        bins,
        diversity: DiversityReport::new(diversity, ctx.seed),
        items: corpus.items,
    };
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    write_file(&a.out_dir.join("report.json"), &json_bytes(&report)?)?;
    let mut csv = Vec::new();
    report.bins.write_csv(&mut csv)?;
    write_file(&a.out_dir.join("report.csv"), &csv)?;
    ctx.log(format!(
        "{} texts: mean={:.4} std={:.4}; diversity over {} pairs: mean={:.4}",
        report.summary.count,
        report.summary.mean,
        report.summary.std,
        report.diversity.n_pairs,
        report.diversity.mean
    ));
    Ok(())
}

fn stats(a: &StatsArgs) -> Result<()> {
    let instances = load_instances(&a.instances)?;
    emit(a.out.as_deref(), &json_bytes(&dataset_stats(&instances))?)
}
