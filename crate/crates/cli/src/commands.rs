use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;

use psl_core::context_engine::{
    answer, build_context, parrot_responder, CorpusIndex, Query, RetrievalConfig, RetrievalMode,
};
use psl_core::corpus_dedup::deduplicate;
use psl_core::evalkit::{
    ablate, corpus_stats, evaluate, import_dataset, k_sweep, read_eval_items, read_ratings_csv, summarize_ratings,
    DatasetSpec, EvalItem, EvalOptions, EvalRun,
};
use psl_core::go_graph::{group_proteins, parse_obo, GoDag, GroupRecord};
use psl_core::jsonl::{read_jsonl, write_jsonl, OutputHeader};
use psl_core::llm_gateway::{Gateway, HttpBackend, MockBackend};
use psl_core::par::Exec;
use psl_core::protein::{import_uniprot_tsv, read_proteins_file, ProteinRecord};
use psl_core::qa_forge::{generate_corpus, synthetic_responder, Checkpoint, PromptTemplates, QaInstance, QaType};

use crate::config::AppConfig;
use crate::error::CliError;
use crate::{Backend, Cli, Command, EvalCommon, RetrievalArgs};

struct Ctx {
    cfg: AppConfig,
    exec: Exec,
    backend: Backend,
    verbose: bool,
}

impl Ctx {
    fn header(&self, command: &str) -> OutputHeader {
        OutputHeader {
            tool: "psl".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: self.cfg.hash(command),
            seed: self.cfg.seed,
        }
    }

    fn gateway(&self) -> Result<Gateway, CliError> {
        match self.backend {
            Backend::Mock => Ok(Gateway::mock(
                MockBackend::new()
                    .with_echo(self.cfg.seed)
                    .with_responder(synthetic_responder())
                    .with_responder(parrot_responder()),
            )),
            Backend::Openai => {
                let gc = self.cfg.gateway.config(self.verbose);
                let backend = HttpBackend::from_config(&gc);
                Ok(Gateway::new(Box::new(backend), gc)?)
            }
        }
    }
}

fn exec_for(sequential: bool) -> Exec {
    if sequential {
        Exec::Sequential
    } else {
        Exec::default()
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => AppConfig::load(p)?,
        None => AppConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let mut ctx = Ctx { cfg, exec: exec_for(cli.sequential), backend: cli.backend, verbose: cli.verbose > 0 };
    ctx.cfg.retrieval.exec = ctx.exec;
    match cli.command {
        Command::Import(a) => import(&ctx, a),
        Command::PruneDag(a) => prune_dag(&mut ctx, a),
        Command::Dedup(a) => dedup(&mut ctx, a),
        Command::GenQa(a) => gen_qa(&mut ctx, a),
        Command::BuildIndex(a) => build_index(&mut ctx, a),
        Command::Query(a) => query(&mut ctx, a),
        Command::Eval(a) => eval(&mut ctx, a),
        Command::SweepK(a) => sweep_k(&mut ctx, a),
        Command::Ablate(a) => ablate_cmd(&mut ctx, a),
        Command::Stats(a) => stats(&mut ctx, a),
    }
}

// ---------------------------------------------------------------------------
// file helpers

fn require(flag: Option<PathBuf>, configured: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    let p = flag
        .or_else(|| configured.clone())
        .ok_or_else(|| CliError::Usage(format!("missing --{what} (or paths.{} in the config)", what.replace('-', "_"))))?;
    if !p.exists() {
        return Err(CliError::Usage(format!("--{what}: {} does not exist", p.display())));
    }
    Ok(p)
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::Usage(format!("cannot open {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", path.display())))
}

fn write_records<T: Serialize>(path: &Path, header: &OutputHeader, items: &[T]) -> Result<(), CliError> {
    write_jsonl(create(path)?, Some(header), items)?;
    Ok(())
}

fn write_tsv(path: &Path, header: &OutputHeader, body: &str) -> Result<(), CliError> {
    let mut w = create(path)?;
    writeln!(w, "{}", header.as_comment())?;
    w.write_all(body.as_bytes())?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonDoc<'a, T: Serialize> {
    psl_header: &'a OutputHeader,
    #[serde(flatten)]
    body: &'a T,
}

fn write_json<T: Serialize>(path: &Path, header: &OutputHeader, body: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &JsonDoc { psl_header: header, body }).map_err(CliError::data)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn check_distinct(out: &Path, inputs: &[&Path]) -> Result<(), CliError> {
    let canon = |p: &Path| std::fs::canonicalize(p).ok();
    let o = canon(out);
    if o.is_some() && inputs.iter().any(|i| canon(i) == o) {
        return Err(CliError::Usage(format!("refusing to overwrite input {}", out.display())));
    }
    Ok(())
}

fn load_dag(path: &Path) -> Result<GoDag, CliError> {
    parse_obo(open(path)?).map_err(CliError::from)
}

fn load_corpus(path: &Path) -> Result<Vec<QaInstance>, CliError> {
    let corpus: Vec<QaInstance> = read_jsonl(open(path)?)?;
    for inst in &corpus {
        inst.validate().map_err(|e| CliError::Data(format!("{}: {}", inst.id, e.message)))?;
    }
    Ok(corpus)
}

// ---------------------------------------------------------------------------
// pipeline commands

fn import(ctx: &Ctx, a: crate::ImportArgs) -> Result<(), CliError> {
    let input = require(Some(a.input), &None, "input")?;
    check_distinct(&a.out, &[&input])?;
    match a.mapping {
        None => {
            let proteins = import_uniprot_tsv(open(&input)?)?;
            info!("imported {} proteins", proteins.len());
            write_records(&a.out, &ctx.header("import"), &proteins)
        }
        Some(m) => {
            let spec = if Path::new(&m).is_file() {
                DatasetSpec::from_json(&std::fs::read_to_string(&m)?)?
            } else {
                DatasetSpec::builtin(&m).map_err(|e| {
                    CliError::Usage(format!("{e}; built-in mappings: {}", DatasetSpec::builtin_names().join(", ")))
                })?
            };
            let items = import_dataset(&spec, open(&input)?)?;
            info!("imported {} {} items", items.len(), spec.name);
            write_records(&a.out, &ctx.header("import"), &items)
        }
    }
}

fn prune_dag(ctx: &mut Ctx, a: crate::PruneArgs) -> Result<(), CliError> {
    let obo = require(a.obo, &ctx.cfg.paths.obo, "obo")?;
    let proteins_path = require(a.proteins, &ctx.cfg.paths.proteins, "proteins")?;
    check_distinct(&a.out, &[&obo, &proteins_path])?;
    let p = &mut ctx.cfg.pruning;
    for (slot, v) in [(&mut p.lambda, a.lambda), (&mut p.beta, a.beta), (&mut p.tau0, a.tau0), (&mut p.alpha, a.alpha)] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    if a.total_count.is_some() {
        p.total_count = a.total_count;
    }

    let mut dag = load_dag(&obo)?;
    let proteins = read_proteins_file(&proteins_path)?;
    let report = dag.annotate_counts_with(&proteins, ctx.exec);
    for (acc, term) in report.unresolved.iter().take(10) {
        warn!("{acc}: unknown GO term {term}");
    }
    if report.unresolved.len() > 10 {
        warn!("{} unresolved annotations in total", report.unresolved.len());
    }
    let params = ctx.cfg.pruning.params(report.annotated_proteins);
    params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let pruning = dag.prune_with(&params, ctx.exec)?;
    let grouping = group_proteins(&pruning.term_ids(), &dag, &proteins);
    let records = grouping.records(&dag, &pruning);
    info!(
        "retained {} grouping nodes over {} annotated proteins ({} ungrouped)",
        records.len(),
        report.annotated_proteins,
        grouping.ungrouped.len()
    );
    write_records(&a.out, &ctx.header("prune-dag"), &records)
}

fn dedup(ctx: &mut Ctx, a: crate::DedupArgs) -> Result<(), CliError> {
    let obo = require(a.obo, &ctx.cfg.paths.obo, "obo")?;
    let proteins_path = require(a.proteins, &ctx.cfg.paths.proteins, "proteins")?;
    let groups_path = require(a.groups, &ctx.cfg.paths.groups, "groups")?;
    check_distinct(&a.out, &[&obo, &proteins_path, &groups_path])?;
    if let Some(t) = a.identity {
        ctx.cfg.dedup.identity = t;
    }
    if a.per_group_target.is_some() {
        ctx.cfg.dedup.per_group_target = a.per_group_target;
    }
    if a.no_prefilter {
        ctx.cfg.dedup.prefilter = false;
    }

    let dag = load_dag(&obo)?;
    let proteins = read_proteins_file(&proteins_path)?;
    let records: Vec<GroupRecord> = read_jsonl(open(&groups_path)?)?;
    let groups: BTreeMap<String, Vec<String>> = records.into_iter().map(|r| (r.term_id, r.protein_ids)).collect();
    let outcome = deduplicate(&dag, &groups, &proteins, &ctx.cfg.dedup.config(ctx.exec))?;
    info!(
        "{} proteins in {} groups -> {} cluster representatives -> {} kept",
        proteins.len(),
        groups.len(),
        outcome.representatives,
        outcome.proteins.len()
    );
    let header = ctx.header("dedup");
    write_records(&a.out, &header, &outcome.proteins)?;
    if let Some(p) = a.provenance {
        write_records(&p, &header, &outcome.provenance)?;
    }
    Ok(())
}

fn gen_qa(ctx: &mut Ctx, a: crate::GenQaArgs) -> Result<(), CliError> {
    let proteins_path = require(a.proteins, &ctx.cfg.paths.proteins, "proteins")?;
    check_distinct(&a.out, &[&proteins_path])?;
    if let Some(t) = &a.types {
        ctx.cfg.generation.types = QaType::parse_list(t).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    if let Some(r) = a.retries {
        ctx.cfg.generation.retries = r;
    }
    let templates = match a.templates.or_else(|| ctx.cfg.paths.templates.clone()) {
        Some(dir) => PromptTemplates::load_dir(&dir).map_err(|e| CliError::Usage(e.to_string()))?,
        None => PromptTemplates::builtin(),
    };
    let gcfg = ctx.cfg.generation.config(ctx.exec)?;
    let proteins = read_proteins_file(&proteins_path)?;

    let ckpt_path = a.checkpoint.unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".ckpt");
        PathBuf::from(p)
    });
    if a.resume {
        if !ckpt_path.exists() {
            return Err(CliError::Usage(format!("--resume: no checkpoint at {}", ckpt_path.display())));
        }
    } else if ckpt_path.exists() {
        std::fs::remove_file(&ckpt_path)?;
    }
    let mut ckpt = Checkpoint::open(&ckpt_path)?;
    let gateway = ctx.gateway()?;
    let outcome = generate_corpus(&proteins, &templates, &gateway, &gcfg, Some(&mut ckpt))?;

    let header = ctx.header("gen-qa");
    write_records(&a.out, &header, &outcome.instances)?;
    if let Some(p) = &a.rejects {
        write_records(p, &header, &outcome.rejects)?;
    }
    let r = &outcome.report;
    for (t, n) in &r.instances_per_type {
        info!("{t}: {n} instances, {} rejected", r.rejects_per_type.get(t).copied().unwrap_or(0));
    }
    let usage = gateway.usage();
    info!(
        "{} completions, {} retries, {} parse retries, {} resumed tasks",
        usage.completions, usage.retries, r.parse_retries, r.resumed_tasks
    );
    match outcome.gateway_error {
        Some(e) => Err(CliError::Gateway(format!(
            "{e}; {} tasks pending, rerun with --resume",
            outcome.pending.len()
        ))),
        None => Ok(()),
    }
}

fn build_index(ctx: &mut Ctx, a: crate::BuildIndexArgs) -> Result<(), CliError> {
    let corpus_path = require(a.corpus, &ctx.cfg.paths.corpus, "corpus")?;
    check_distinct(&a.out, &[&corpus_path])?;
    if let Some(k) = a.kmer {
        ctx.cfg.retrieval.seq_kmer_k = k;
    }
    let corpus = load_corpus(&corpus_path)?;
    let index = CorpusIndex::build(&corpus, ctx.cfg.retrieval.seq_kmer_k)?;
    info!("indexed {} instances over {} proteins", index.instances().len(), index.protein_count());
    write_records(&a.out, &ctx.header("build-index"), std::slice::from_ref(&index))
}

/// Loads `--index`, or indexes `--corpus` in memory.
fn load_index(ctx: &Ctx, r: &RetrievalArgs) -> Result<CorpusIndex, CliError> {
    if r.index.is_some() || (r.corpus.is_none() && ctx.cfg.paths.index.is_some()) {
        let path = require(r.index.clone(), &ctx.cfg.paths.index, "index")?;
        let mut text = String::new();
        for line in open(&path)?.lines() {
            let line = line?;
            if !line.starts_with("{\"psl_header\"") && !line.trim().is_empty() {
                text = line;
                break;
            }
        }
        return Ok(CorpusIndex::from_json(&text)?);
    }
    let path = require(r.corpus.clone(), &ctx.cfg.paths.corpus, "corpus")?;
    Ok(CorpusIndex::build(&load_corpus(&path)?, ctx.cfg.retrieval.seq_kmer_k)?)
}

fn apply_retrieval(cfg: &mut RetrievalConfig, r: &RetrievalArgs) {
    if let Some(m) = r.mode {
        cfg.mode = m;
    }
    if let Some(b) = r.token_budget {
        cfg.token_budget = b;
    }
}

fn read_sequence(seq: Option<String>, file: Option<PathBuf>) -> Result<String, CliError> {
    let raw = match (seq, file) {
        (Some(s), _) => s,
        (None, Some(f)) => std::fs::read_to_string(&f)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", f.display())))?
            .lines()
            .filter(|l| !l.starts_with('>'))
            .collect::<String>(),
        (None, None) => return Err(CliError::Usage("one of --seq or --seq-file is required".into())),
    };
    let seq: String = raw.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_uppercase();
    if seq.is_empty() || !seq.chars().all(psl_core::protein::is_residue) {
        return Err(CliError::Data("query sequence is empty or has non-residue characters".into()));
    }
    Ok(seq)
}

/// Writes to stdout; a closed pipe (`psl query ... | head`) is not an error.
fn print_out(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}").and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn query(ctx: &mut Ctx, a: crate::QueryArgs) -> Result<(), CliError> {
    apply_retrieval(&mut ctx.cfg.retrieval, &a.retrieval);
    if let Some(k) = a.k {
        ctx.cfg.retrieval.k = k;
    }
    let q = Query { accession: a.accession, sequence: read_sequence(a.seq, a.seq_file)?, question: a.question };
    let index = load_index(ctx, &a.retrieval)?;
    let header = ctx.header("query");
    if a.dry_run {
        let bundle = build_context(&q, &index, &ctx.cfg.retrieval)?;
        info!("{} exemplars, ~{} prompt tokens; no model call", bundle.exemplars.len(), bundle.prompt_tokens);
        print_out(&bundle.prompt)?;
        if let Some(p) = &a.out {
            write_json(p, &header, &bundle)?;
        }
        return Ok(());
    }
    let gateway = ctx.gateway()?;
    let out = answer(&q, &index, &ctx.cfg.retrieval, &gateway)?;
    print_out(&out.text)?;
    if let Some(p) = &a.out {
        write_json(p, &header, &out)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluation

struct EvalInputs {
    items: Vec<EvalItem>,
    index: CorpusIndex,
    gateway: Gateway,
    opts: EvalOptions,
}

fn eval_inputs(ctx: &mut Ctx, c: &EvalCommon, k: Option<usize>) -> Result<EvalInputs, CliError> {
    apply_retrieval(&mut ctx.cfg.retrieval, &c.retrieval);
    let items_path = require(c.items.clone(), &ctx.cfg.paths.items, "items")?;
    let mut inputs: Vec<&Path> = vec![&items_path];
    if let Some(p) = &c.retrieval.index {
        inputs.push(p);
    }
    if let Some(p) = &c.retrieval.corpus {
        inputs.push(p);
    }
    check_distinct(&c.out, &inputs)?;
    let items = read_eval_items(open(&items_path)?)?;
    let index = load_index(ctx, &c.retrieval)?;
    let gateway = ctx.gateway()?;
    Ok(EvalInputs {
        items,
        index,
        gateway,
        opts: EvalOptions { k, model: c.model.clone(), dataset: c.dataset.clone() },
    })
}

fn write_eval(ctx: &Ctx, command: &str, c: &EvalCommon, run: &EvalRun, gateway: &Gateway) -> Result<(), CliError> {
    let header = ctx.header(command);
    write_tsv(&c.out, &header, &run.report.to_tsv())?;
    if let Some(p) = &c.json {
        write_json(p, &header, &run.report)?;
    }
    if let Some(p) = &c.per_item {
        write_records(p, &header, &run.items)?;
    }
    for r in &run.report.rows {
        info!("{} {:?} {} k={}: ROUGE-L F1 {:.4} over {} items", r.dataset, r.task, r.mode, r.k, r.rouge_l_f1, r.n_items);
    }
    let u = gateway.usage();
    info!("{} completions, {} prompt tokens, {} completion tokens", u.completions, u.prompt_tokens, u.completion_tokens);
    Ok(())
}

fn eval(ctx: &mut Ctx, a: crate::EvalArgs) -> Result<(), CliError> {
    let ratings_path = match a.ratings.or_else(|| ctx.cfg.paths.ratings.clone()) {
        Some(p) => Some(require(Some(p), &None, "ratings")?),
        None => None,
    };
    let inp = eval_inputs(ctx, &a.common, a.k)?;
    let mut run = evaluate(&inp.items, &inp.index, &ctx.cfg.retrieval, &inp.gateway, &inp.opts)?;
    if let Some(p) = ratings_path {
        let ratings = read_ratings_csv(open(&p)?)?;
        run.report.human = Some(summarize_ratings(&ratings, &a.with_condition, &a.without_condition)?);
    }
    write_eval(ctx, "eval", &a.common, &run, &inp.gateway)
}

fn parse_ks(s: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Usage(format!("--ks {s:?}: expected a list like 1,2,4 or a range like 1..12"));
    let ks: Vec<usize> = if let Some((lo, hi)) = s.split_once("..") {
        let lo: usize = lo.trim().parse().map_err(|_| bad())?;
        let hi: usize = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        (lo..=hi).collect()
    } else {
        s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if ks.is_empty() || ks.contains(&0) {
        return Err(bad());
    }
    Ok(ks)
}

fn sweep_k(ctx: &mut Ctx, a: crate::SweepArgs) -> Result<(), CliError> {
    let ks = parse_ks(&a.ks)?;
    let inp = eval_inputs(ctx, &a.common, None)?;
    let run = k_sweep(&inp.items, &ks, &inp.index, &ctx.cfg.retrieval, &inp.gateway, &inp.opts)?;
    write_eval(ctx, "sweep-k", &a.common, &run, &inp.gateway)
}

fn ablate_cmd(ctx: &mut Ctx, a: crate::AblateArgs) -> Result<(), CliError> {
    let modes: Vec<RetrievalMode> = a
        .modes
        .split(',')
        .map(|m| m.parse().map_err(|e: psl_core::context_engine::ContextError| CliError::Usage(e.to_string())))
        .collect::<Result<_, _>>()?;
    let inp = eval_inputs(ctx, &a.common, a.k)?;
    let run = ablate(&inp.items, &modes, &inp.index, &ctx.cfg.retrieval, &inp.gateway, &inp.opts)?;
    write_eval(ctx, "ablate", &a.common, &run, &inp.gateway)
}

fn stats(ctx: &mut Ctx, a: crate::StatsArgs) -> Result<(), CliError> {
    let corpus_path = require(a.corpus, &ctx.cfg.paths.corpus, "corpus")?;
    check_distinct(&a.out, &[&corpus_path])?;
    let corpus = load_corpus(&corpus_path)?;
    if corpus.is_empty() {
        return Err(CliError::Data("corpus is empty".into()));
    }
    let proteins: Vec<ProteinRecord> = match a.proteins.or_else(|| ctx.cfg.paths.proteins.clone()) {
        Some(p) => read_proteins_file(&require(Some(p), &None, "proteins")?)?,
        None => Vec::new(),
    };
    let s = corpus_stats(&corpus, &proteins);
    info!(
        "{} instances over {} proteins; sequence share {:.3}",
        s.instances, s.proteins, s.sequence_share
    );
    let header = ctx.header("stats");
    write_tsv(&a.out, &header, &s.to_tsv())?;
    if let Some(p) = &a.json {
        write_json(p, &header, &s)?;
    }
    Ok(())
}
