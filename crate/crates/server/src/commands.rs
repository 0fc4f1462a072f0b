use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use keychord::chordlang::{Key, Mode, Progression};
use keychord::corpus::{build_vocab, load_corpus, normalize_to_c, CorpusRecord, DatasetSplit, NormalizeOptions, Source, TokenVocab};
use keychord::evalkit::{run_coherence_experiment, self_bleu_report, Condition, ExperimentReport, BLEU_EPSILON};
use keychord::llmgate::{ChatProvider, HttpProvider, KeywordSet, LlmProviderConfig, MockProvider};
use keychord::sampler::{generate_suggestions, log_ratios, write_audit, CalibrationArtifact, SamplerConfig, Scorer};
use keychord::seqmodel::{self, ModelConfig, ModelRole};
use keychord_server::config::{Assets, ModelPaths};
use keychord_server::tables::{coherence_report, diversity_report, CoherenceInputs};
use keychord_server::{router, AppState, ServerConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{
    CalibrateArgs, GenerateArgs, JsdArgs, Preset, ProviderArgs, Role, SelfBleuArgs, ServeArgs, TablesArgs, TrainArgs,
    VocabArgs,
};

fn load_records(paths: &[PathBuf], source: Source) -> Result<Vec<CorpusRecord>> {
    let mut out = Vec::new();
    for p in paths {
        let loaded = load_corpus(p, source).with_context(|| format!("loading {}", p.display()))?;
        if !loaded.skipped.is_empty() {
            log::warn!("{}: skipped {} malformed lines", p.display(), loaded.skipped.len());
        }
        out.extend(loaded.records);
    }
    Ok(out)
}

fn rng_from(seed: Option<u64>) -> ChaCha8Rng {
    match seed {
        Some(s) => ChaCha8Rng::seed_from_u64(s),
        None => ChaCha8Rng::from_rng(&mut rand::rng()),
    }
}

fn provider(args: &ProviderArgs) -> Result<Arc<dyn ChatProvider>> {
    match (&args.mock, &args.llm_config) {
        (Some(dir), _) => Ok(Arc::new(MockProvider::new(dir))),
        (None, Some(path)) => {
            let cfg = LlmProviderConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
            Ok(Arc::new(HttpProvider::new(cfg)?))
        }
        (None, None) => bail!("pass --mock <fixtures dir> or --llm-config <file>"),
    }
}

fn write_report(report: &ExperimentReport, out: Option<&Path>, stem: &str) -> Result<()> {
    print!("{}", report.to_markdown());
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        report.write(dir, stem)?;
    }
    Ok(())
}

pub fn vocab(a: VocabArgs) -> Result<()> {
    // source tag does not matter for token counts
    let records = load_records(&a.corpora, Source::HumanCorpus)?;
    let normalized = normalize_to_c(&records, NormalizeOptions { bars: None, dedup: false });
    let vocab = build_vocab(&normalized.raw, a.min_freq);
    vocab.save(&a.out)?;
    println!("{} chord tokens, version {}", vocab.tokens().len(), vocab.version());
    Ok(())
}

pub fn train(a: TrainArgs) -> Result<()> {
    let (role, source) = match a.role {
        Role::Prior => (ModelRole::Prior, Source::HumanCorpus),
        Role::Proposal => (ModelRole::Proposal, Source::LlmGenerated),
    };
    let mut config = match (&a.config, a.preset, role) {
        (Some(path), _, _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        (None, Preset::Desk, _) => ModelConfig::desk(),
        (None, Preset::Reference, ModelRole::Prior) => ModelConfig::prior_reference(),
        (None, Preset::Reference, ModelRole::Proposal) => ModelConfig::proposal_reference(),
    };
    if let Some(e) = a.epochs {
        config.max_epochs = e;
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    let vocab = TokenVocab::load(&a.vocab)?;
    let records = load_records(&a.corpora, source)?;
    let bars = if a.all_lengths { None } else { Some(4) };
    let normalized = normalize_to_c(&records, NormalizeOptions { bars, dedup: false });
    let split = DatasetSplit::from_records(&normalized.training, &vocab, config.validation_ratio, config.seed);
    log::info!("training on {} sequences, validating on {}", split.train.len(), split.validation.len());
    let (model, report) = seqmodel::train(&split, &config, &vocab, role)?;
    seqmodel::save(&model, &a.out)?;
    println!(
        "epochs {} (best {}), train nll {:.4}, validation nll {:.4}, {:.1}s",
        report.epochs_run, report.best_epoch, report.train_nll, report.validation_nll, report.wall_time_s
    );
    Ok(())
}

pub fn calibrate(a: CalibrateArgs) -> Result<()> {
    let vocab_path = match a.vocab {
        Some(p) => p,
        None => a.p.parent().unwrap_or(Path::new(".")).join("vocab.json"),
    };
    let vocab = TokenVocab::load(&vocab_path)?;
    let p = seqmodel::load(&a.p, &vocab)?;
    let q = seqmodel::load(&a.q, &vocab)?;
    let scorer = Scorer::new(&vocab, &p, &q)?;
    let mut cfg = SamplerConfig::default();
    if let Some(t) = a.tau {
        cfg.tau = t;
    }
    let candidates: Vec<Progression> = load_records(std::slice::from_ref(&a.candidates), Source::LlmGenerated)?
        .iter()
        .map(CorpusRecord::progression)
        .collect::<Result<_, _>>()?;
    let ratios = log_ratios(&candidates, &scorer, &cfg)?;
    let artifact = CalibrationArtifact::from_log_ratios(&ratios, a.percentile, &cfg, vocab.version())?;
    println!("M = {:.4} (percentile {}, {} candidates)", artifact.m, artifact.percentile, artifact.count);
    if let Some(out) = a.out {
        artifact.save(&out)?;
    }
    Ok(())
}

pub fn generate(a: GenerateArgs) -> Result<()> {
    let key: Key = a.key.parse()?;
    let mode: Mode = a.mode.parse()?;
    if a.bars == 0 {
        bail!("bars must be positive");
    }
    let words: Vec<&str> = a.keywords.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    let keywords = KeywordSet::from_user(&words);
    if keywords.is_empty() {
        bail!("at least one keyword is required");
    }
    let assets = Assets::load(&ModelPaths::in_dir(&a.models))?;
    let mut cfg = match &a.sampler {
        Some(p) => SamplerConfig::load(p)?,
        None => SamplerConfig::default(),
    };
    if let Some(path) = &a.calibration {
        let artifact = CalibrationArtifact::load(path)?;
        if artifact.vocab_version != assets.vocab.version() {
            bail!("calibration {} does not match the loaded vocabulary", path.display());
        }
        cfg = cfg.with_calibration(&artifact);
    }
    let llm = provider(&a.provider)?;
    let scorer = Scorer::new(&assets.vocab, &assets.prior, &assets.proposal)?;
    let mut rng = rng_from(a.seed);
    let set = generate_suggestions(&keywords, key, mode, a.bars, llm.as_ref(), &scorer, &cfg, &mut rng)?;
    if let Some(path) = &a.audit {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .with_context(|| format!("opening {}", path.display()))?;
        write_audit(file, &set.audit)?;
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&set)?);
    } else {
        for s in &set.suggestions {
            println!("{}", s.progression.symbols().join(" "));
        }
    }
    Ok(())
}

fn list_jsonl(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "jsonl") {
            let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            out.push((stem, path));
        }
    }
    out.sort();
    if out.is_empty() {
        bail!("no .jsonl files in {}", dir.display());
    }
    Ok(out)
}

pub fn self_bleu(a: SelfBleuArgs) -> Result<()> {
    let report = match &a.input {
        Some(dir) => {
            let mut conditions = Vec::new();
            for (label, path) in list_jsonl(dir)? {
                let text = fs::read_to_string(&path)?;
                let sets = text
                    .lines()
                    .filter(|l| !l.trim().is_empty())
                    .map(|l| {
                        let lines: Vec<String> = serde_json::from_str(l)?;
                        Ok(lines.iter().map(|p| p.split_whitespace().map(String::from).collect()).collect())
                    })
                    .collect::<Result<Vec<Vec<Vec<String>>>>>()
                    .with_context(|| format!("parsing {}", path.display()))?;
                conditions.push((label, sets));
            }
            self_bleu_report(&conditions, a.max_n, BLEU_EPSILON)?
        }
        None => diversity_report(provider(&a.provider)?.as_ref(), a.pairs, a.seed)?,
    };
    write_report(&report, a.out.as_deref(), "diversity")
}

pub fn jsd(a: JsdArgs) -> Result<()> {
    let in_c = |path: &Path| -> Result<Vec<Vec<String>>> {
        let records = load_records(&[path.to_path_buf()], Source::HumanCorpus)?;
        Ok(normalize_to_c(&records, NormalizeOptions { bars: None, dedup: false })
            .raw
            .into_iter()
            .map(|r| r.chords)
            .collect())
    };
    let corpus = in_c(&a.corpus)?;
    let conditions = list_jsonl(&a.input)?
        .into_iter()
        .map(|(label, path)| Ok(Condition::new(label, in_c(&path)?)))
        .collect::<Result<Vec<_>>>()?;
    let report = run_coherence_experiment(&corpus, &conditions, a.min_size)?;
    write_report(&report, a.out.as_deref(), "coherence")
}

pub fn tables(a: TablesArgs) -> Result<()> {
    let mut inputs = CoherenceInputs::shipped(&a.data, &a.models);
    inputs.size = a.size;
    inputs.seed = a.seed;
    if let Some(path) = &a.calibration {
        inputs.sampler = inputs.sampler.with_calibration(&CalibrationArtifact::load(path)?);
    }
    let coherence = coherence_report(&inputs)?;
    println!("## Coherence (JSD against the human corpus)\n");
    write_report(&coherence, a.out.as_deref(), "coherence")?;

    let llm: Option<Arc<dyn ChatProvider>> = match (&a.llm_config, a.fixtures) {
        (Some(path), _) => Some(provider(&ProviderArgs { mock: None, llm_config: Some(path.clone()) })?),
        (None, true) => Some(Arc::new(MockProvider::new(&a.fixture_dir))),
        (None, false) => None,
    };
    match llm {
        Some(llm) => {
            let diversity = diversity_report(llm.as_ref(), a.pairs, a.seed)?;
            println!("\n## Diversity (Self-BLEU, lower is more diverse)\n");
            write_report(&diversity, a.out.as_deref(), "diversity")?;
        }
        None => log::info!("no LLM source given; skipping the diversity table"),
    }
    Ok(())
}

pub fn serve(a: ServeArgs) -> Result<()> {
    let mut cfg = ServerConfig::load(&a.config)?;
    if let Some(bind) = a.bind {
        cfg.bind = bind;
    }
    let state = Arc::new(AppState::from_config(&cfg)?);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&cfg.bind)
            .await
            .with_context(|| format!("binding {}", cfg.bind))?;
        log::warn!("listening on {}", listener.local_addr()?);
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
