use std::fs;
use std::io::{BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::sync::Arc;

use anyhow::{Context, Result};
use gecdi::adapter::{serve, serve_tcp, RemoteConfig, RemoteScorer};
use gecdi::channel::{self, ChannelModel};
use gecdi::corpus::{build_vocab, read_lines, read_parallel, split, tokenize, ParallelPair, SplitSpec, TextPair};
use gecdi::critic::{Critic, LmCritic};
use gecdi::decoder::{decode_corpus, trace_tsv, CriticConfig, CriticSlot, DecodeConfig, TRACE_HEADER};
use gecdi::error::Error;
use gecdi::eval::{read_references, score_lines, Counts};
use gecdi::exec::Exec;
use gecdi::experiment::{sweep, DevSet};
use gecdi::ged::data::{generate_ged_data, read_jsonl, write_jsonl, GenConfig};
use gecdi::ged::{GedCritic, GedModel};
use gecdi::lm::{self, NgramModel};
use gecdi::model_file::peek_kind;
use gecdi::scorer::DynScorer;
use gecdi::vocab::Vocabulary;

use crate::config::{Overrides, RunConfig};
use crate::{CriticArgs, CriticChoice, Cli, Command};

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let ov = Overrides::new(cli.config.is_some());
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    match cli.command {
        Command::TrainGec(a) => {
            ov.set(&mut cfg.channel.add_k, a.add_k, "add-k");
            ov.set(&mut cfg.channel.mix, a.mix, "mix");
            ov.set(&mut cfg.channel.skip_window, a.skip_window, "skip-window");
            ov.set(&mut cfg.min_count, a.min_count, "min-count");
            train_gec(&cfg, &a.train, &a.out)
        }
        Command::TrainLm(a) => {
            ov.set(&mut cfg.ngram.order, a.order, "order");
            ov.set(&mut cfg.ngram.add_k, a.add_k, "add-k");
            train_lm(&cfg, &a.corpus, &a.out, a.vocab_out.as_deref())
        }
        Command::GenGedData(a) => {
            ov.set_path(&mut cfg.gec_model, a.gec, "gec");
            ov.set_path(&mut cfg.output_dir, a.out_dir, "out-dir");
            ov.set(&mut cfg.ged_data.k, a.k, "k");
            ov.set(&mut cfg.ged_data.beam_width, a.beam, "beam");
            gen_ged_data(&cfg, &a.pairs, a.seed, exec)
        }
        Command::TrainGed(a) => {
            ov.set(&mut cfg.seeds, a.seeds, "seeds");
            ov.set(&mut cfg.ged_train.epochs, a.epochs, "epochs");
            ov.set(&mut cfg.ged_train.learning_rate, a.lr, "lr");
            ov.set(&mut cfg.ged_train.l2, a.l2, "l2");
            cfg.validate()?;
            train_ged(&cfg, &a.data, &a.references, &a.out, a.metrics.as_deref(), exec)
        }
        Command::Decode(a) => {
            apply_critic_args(&mut cfg, &ov, &a.common, a.critic);
            cfg.decode.trace = a.trace.is_some();
            decode(&cfg, &a, exec)
        }
        Command::Evaluate(a) => evaluate(&a.sources, &a.hyps, a.refs.as_deref(), a.targets.as_deref()),
        Command::Sweep(a) => {
            apply_critic_args(&mut cfg, &ov, &a.common, a.critic);
            ov.set(&mut cfg.sweep.alphas, a.alphas.clone(), "alphas");
            ov.set(&mut cfg.sweep.betas, a.betas.clone(), "betas");
            run_sweep(&cfg, &a, exec)
        }
        Command::ServeScorer(a) => serve_scorer(&a.model, a.tcp.as_deref(), a.announce),
    }
}

fn apply_critic_args(cfg: &mut RunConfig, ov: &Overrides, a: &CriticArgs, choice: CriticChoice) {
    ov.set_path(&mut cfg.gec_model, a.gec.clone(), "gec");
    ov.set_path(&mut cfg.lm_model, a.lm.clone(), "lm");
    ov.set_path(&mut cfg.ged_model, a.ged.clone(), "ged");
    ov.set(&mut cfg.lm.alpha, a.lm_alpha, "lm-alpha");
    ov.set(&mut cfg.lm.beta, a.lm_beta, "lm-beta");
    ov.set(&mut cfg.ged.alpha, a.ged_alpha, "ged-alpha");
    ov.set(&mut cfg.ged.beta, a.ged_beta, "ged-beta");
    ov.set(&mut cfg.lm.shortlist_n, a.shortlist, "shortlist");
    ov.set(&mut cfg.ged.shortlist_n, a.shortlist, "shortlist");
    ov.set(&mut cfg.decode.beam_width, a.beam, "beam");
    ov.set(&mut cfg.decode.max_len_ratio, a.max_len_ratio, "max-len-ratio");
    ov.set(&mut cfg.decode.length_cap, a.no_length_cap.then_some(false), "no-length-cap");
    ov.set(
        &mut cfg.decode.length_normalization,
        a.length_normalization.then_some(true),
        "length-normalization",
    );
    ov.set(&mut cfg.decode.raw_entropy, a.raw_entropy.then_some(true), "raw-entropy");
    ov.set(&mut cfg.remote.exact, a.exact_dist.then_some(true), "exact-dist");
    cfg.lm.enabled = choice.lm();
    cfg.ged.enabled = choice.ged();
}

fn missing(what: &str, flag: &str, key: &str) -> Error {
    Error::InvalidConfig(format!("no {what}: pass --{flag} or set {key:?} in the config"))
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    create_parent(path)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn encode_pairs(vocab: &Vocabulary, pairs: &[TextPair]) -> Result<Vec<ParallelPair>> {
    Ok(pairs
        .iter()
        .map(|p| ParallelPair::encode(vocab, &p.source, &p.target))
        .collect::<Result<_, _>>()?)
}

fn train_gec(cfg: &RunConfig, train: &Path, out: &Path) -> Result<()> {
    let pairs = read_parallel(train)?;
    let toks: Vec<Vec<String>> = pairs
        .iter()
        .flat_map(|p| [tokenize(&p.source), tokenize(&p.target)])
        .collect();
    let vocab = build_vocab(&toks, cfg.min_count)?;
    let encoded = encode_pairs(&vocab, &pairs)?;
    let model = ChannelModel::train(vocab, &encoded, cfg.channel)?;
    create_parent(out)?;
    model.save(out)?;
    log::info!("trained {} on {} pairs -> {}", channel::MODEL_KIND, pairs.len(), out.display());
    Ok(())
}

fn train_lm(cfg: &RunConfig, corpus: &Path, out: &Path, vocab_out: Option<&Path>) -> Result<()> {
    let lines = read_lines(corpus)?;
    let model = NgramModel::train_on_text(&lines, cfg.ngram.order, cfg.ngram.add_k)?;
    create_parent(out)?;
    model.save(out)?;
    if let Some(v) = vocab_out {
        create_parent(v)?;
        gecdi::scorer::IncrementalScorer::vocabulary(&model).save(v)?;
    }
    log::info!(
        "trained {}-gram {} on {} sentences -> {}",
        cfg.ngram.order,
        lm::MODEL_KIND,
        lines.len(),
        out.display()
    );
    Ok(())
}

fn load_gec(cfg: &RunConfig) -> Result<ChannelModel> {
    let path = cfg.gec_model.as_ref().ok_or_else(|| missing("base model", "gec", "gec_model"))?;
    ChannelModel::load(path).with_context(|| format!("loading {}", path.display()))
}

fn gen_ged_data(cfg: &RunConfig, pairs: &Path, seed: u64, exec: Exec) -> Result<()> {
    let base = load_gec(cfg)?;
    let text = read_parallel(pairs)?;
    let encoded = encode_pairs(gecdi::scorer::IncrementalScorer::vocabulary(&base), &text)?;
    let gen = GenConfig {
        k: cfg.ged_data.k,
        beam_width: cfg.ged_data.beam_width,
        split: SplitSpec::new(cfg.ged_data.train_fraction, seed)?,
    };
    let all = generate_ged_data(&base, &encoded, &gen, exec)?;
    let (train, dev) = split(&all, gen.split)?;
    let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for (name, set) in [("all.jsonl", &all), ("train.jsonl", &train), ("dev.jsonl", &dev)] {
        write_jsonl(dir.join(name), set)?;
    }
    log::info!(
        "{} examples from {} pairs ({} train, {} dev) in {}",
        all.len(),
        encoded.len(),
        train.len(),
        dev.len(),
        dir.display()
    );
    Ok(())
}

struct SeedRow {
    seed: u64,
    accuracy: f64,
    precision: f64,
    recall: f64,
    f05: f64,
}

fn train_ged(
    cfg: &RunConfig,
    data: &Path,
    references: &Path,
    out: &Path,
    metrics: Option<&Path>,
    exec: Exec,
) -> Result<()> {
    let examples = read_jsonl(data)?;
    let refs: Vec<Vec<String>> = read_parallel(references)?
        .iter()
        .map(|p| tokenize(&p.target))
        .collect();
    let runs = exec.try_map(&cfg.seeds, |&seed| -> Result<(GedModel, SeedRow)> {
        let (train, dev) = split(&examples, SplitSpec::new(cfg.ged_data.train_fraction, seed)?)?;
        let model = GedModel::train(&train, &refs, &cfg.ged_train)?;
        let mut counts = Counts::default();
        for ex in &dev {
            match (model.predict_label(ex).is_error(), ex.label.is_error()) {
                (true, true) => counts.tp += 1,
                (true, false) => counts.fp += 1,
                (false, true) => counts.fn_ += 1,
                (false, false) => {}
            }
        }
        let row = SeedRow {
            seed,
            accuracy: model.accuracy(&dev),
            precision: counts.precision(),
            recall: counts.recall(),
            f05: counts.f05(),
        };
        Ok((model, row))
    })?;
    let mut tsv = String::from("seed\taccuracy\tP\tR\tF0.5\n");
    for (_, r) in &runs {
        tsv.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            r.seed, r.accuracy, r.precision, r.recall, r.f05
        ));
    }
    let n = runs.len() as f64;
    let mean = |f: fn(&SeedRow) -> f64| runs.iter().map(|(_, r)| f(r)).sum::<f64>() / n;
    tsv.push_str(&format!(
        "mean\t{}\t{}\t{}\t{}\n",
        mean(|r| r.accuracy),
        mean(|r| r.precision),
        mean(|r| r.recall),
        mean(|r| r.f05)
    ));
    print!("{tsv}");
    if let Some(m) = metrics {
        write_text(m, &tsv)?;
    }
    create_parent(out)?;
    runs[0].0.save(out)?;
    log::info!("saved the seed {} detector to {}", runs[0].1.seed, out.display());
    Ok(())
}

fn lm_scorer(cfg: &RunConfig, a: &CriticArgs) -> Result<Arc<dyn DynScorer>> {
    let remote_cfg = || -> Result<(Vocabulary, RemoteConfig)> {
        let path = a
            .lm_vocab
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig("a remote language model needs --lm-vocab".into()))?;
        Ok((Vocabulary::load(path)?, cfg.remote.clone()))
    };
    if let Some(cmd) = &a.lm_cmd {
        let mut parts = cmd.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| Error::InvalidConfig("--lm-cmd is empty".into()))?;
        let mut process = Process::new(program);
        process.args(parts);
        let (vocab, rc) = remote_cfg()?;
        return Ok(Arc::new(RemoteScorer::spawn(process, vocab, rc)?));
    }
    if let Some(addr) = &a.lm_tcp {
        let (vocab, rc) = remote_cfg()?;
        return Ok(Arc::new(RemoteScorer::connect(addr.as_str(), vocab, rc)?));
    }
    let path = cfg.lm_model.as_ref().ok_or_else(|| missing("language model", "lm", "lm_model"))?;
    Ok(Arc::new(
        NgramModel::load(path).with_context(|| format!("loading {}", path.display()))?,
    ))
}

struct Critics {
    lm: Option<(LmCritic, CriticConfig)>,
    ged: Option<(GedCritic, CriticConfig)>,
}

impl Critics {
    fn build(cfg: &RunConfig, a: &CriticArgs, base_vocab: &Vocabulary) -> Result<Self> {
        let lm = if cfg.lm.enabled {
            Some((LmCritic::new(lm_scorer(cfg, a)?, base_vocab), cfg.lm))
        } else {
            None
        };
        let ged = if cfg.ged.enabled {
            let path = cfg.ged_model.as_ref().ok_or_else(|| missing("detector", "ged", "ged_model"))?;
            let model = GedModel::load(path).with_context(|| format!("loading {}", path.display()))?;
            Some((GedCritic::new(Arc::new(model), base_vocab), cfg.ged))
        } else {
            None
        };
        Ok(Self { lm, ged })
    }

    fn pairs(&self) -> Vec<(&dyn Critic, CriticConfig)> {
        let mut out: Vec<(&dyn Critic, CriticConfig)> = Vec::new();
        if let Some((c, k)) = &self.lm {
            out.push((c, *k));
        }
        if let Some((c, k)) = &self.ged {
            out.push((c, *k));
        }
        out
    }

    fn slots(&self) -> Vec<CriticSlot<'_>> {
        self.pairs().into_iter().map(|(c, k)| CriticSlot::new(c, k)).collect()
    }
}

fn decode(cfg: &RunConfig, a: &crate::DecodeArgs, exec: Exec) -> Result<()> {
    let base = load_gec(cfg)?;
    let vocab = gecdi::scorer::IncrementalScorer::vocabulary(&base).clone();
    let critics = Critics::build(cfg, &a.common, &vocab)?;
    let lines = read_lines(&a.input)?;
    let sources = lines
        .iter()
        .map(|l| vocab.encode(l))
        .collect::<Result<Vec<_>, _>>()?;
    let dcfg = DecodeConfig {
        exec: Exec::Sequential,
        ..cfg.decode
    };
    let outputs = decode_corpus(&base, &critics.slots(), &sources, &dcfg, exec)?;
    let capped = outputs.iter().filter(|d| d.capped).count();
    if capped > 0 {
        log::warn!("{capped} outputs were closed at the length cap");
    }
    let mut text = String::new();
    for d in &outputs {
        text.push_str(&vocab.decode(&d.tokens));
        text.push('\n');
    }
    match &a.output {
        Some(p) => write_text(p, &text)?,
        None => {
            let stdout = std::io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            w.write_all(text.as_bytes()).context("writing stdout")?;
            w.flush().context("writing stdout")?;
        }
    }
    if let Some(p) = &a.trace {
        let mut tsv = format!("sentence\t{TRACE_HEADER}\n");
        for (i, d) in outputs.iter().enumerate() {
            let block = trace_tsv(d.score_breakdown()?, &vocab);
            for line in block.lines().skip(1) {
                tsv.push_str(&format!("{i}\t{line}\n"));
            }
        }
        write_text(p, &tsv)?;
    }
    log::info!("decoded {} sentences", outputs.len());
    Ok(())
}

fn evaluate(sources: &Path, hyps: &Path, refs: Option<&Path>, targets: Option<&Path>) -> Result<()> {
    let srcs = read_lines(sources)?;
    // an empty hypothesis is a legitimate output, so blank lines are kept
    let hyps: Vec<String> = fs::read_to_string(hyps)
        .map_err(|e| Error::io(hyps, e))?
        .lines()
        .map(str::to_string)
        .collect();
    let references = match (refs, targets) {
        (Some(r), _) => read_references(r, srcs.len())?,
        (None, Some(t)) => read_lines(t)?.into_iter().map(|l| vec![l]).collect(),
        (None, None) => return Err(Error::InvalidConfig("pass --refs or --targets".into()).into()),
    };
    let score = score_lines(&srcs, &hyps, &references)?;
    println!("P\tR\tF0.5\tTP\tFP\tFN");
    println!("{score}");
    Ok(())
}

fn run_sweep(cfg: &RunConfig, a: &crate::SweepArgs, exec: Exec) -> Result<()> {
    if a.critic == CriticChoice::None {
        return Err(Error::InvalidConfig("sweep needs --critic lm, ged or both".into()).into());
    }
    let base = load_gec(cfg)?;
    let vocab = gecdi::scorer::IncrementalScorer::vocabulary(&base).clone();
    let critics = Critics::build(cfg, &a.common, &vocab)?;
    let pairs = read_parallel(&a.dev)?;
    let sources: Vec<String> = pairs.iter().map(|p| p.source.clone()).collect();
    let refs = pairs.iter().map(|p| vec![tokenize(&p.target)]).collect();
    let dev = DevSet::new(&vocab, &sources, refs)?;
    let table = sweep(&base, &critics.pairs(), &dev, &cfg.sweep, &cfg.decode, exec)?;
    let tsv = table.to_tsv();
    match &a.out {
        Some(p) => write_text(p, &tsv)?,
        None => print!("{tsv}"),
    }
    if let Some(best) = table.best_cell() {
        let (alpha, beta) = best.cell.unwrap_or_default();
        log::info!(
            "best cell alpha={alpha} beta={beta}: F0.5 {:.4} (vanilla {:.4})",
            best.score.f05,
            table.vanilla().score.f05
        );
    }
    Ok(())
}

fn serve_scorer(model: &Path, tcp: Option<&str>, announce: bool) -> Result<()> {
    let kind = peek_kind(model).with_context(|| format!("reading {}", model.display()))?;
    let scorer: Arc<dyn DynScorer> = match kind.as_str() {
        lm::MODEL_KIND => Arc::new(NgramModel::load(model)?),
        channel::MODEL_KIND => Arc::new(ChannelModel::load(model)?),
        other => {
            return Err(Error::InvalidConfig(format!(
                "a {other:?} model is not an incremental scorer"
            ))
            .into())
        }
    };
    match tcp {
        Some(addr) => {
            let listener = TcpListener::bind(addr).map_err(|e| Error::Transport(format!("bind {addr}: {e}")))?;
            let local = listener.local_addr().context("local address")?;
            log::info!("serving {kind} on {local}");
            if announce {
                println!("{local}");
                std::io::stdout().flush().context("writing stdout")?;
            }
            serve_tcp(scorer, listener)?;
        }
        None => {
            let stdin = std::io::stdin();
            serve(scorer.as_ref(), stdin.lock(), std::io::stdout().lock())?;
        }
    }
    Ok(())
}
