//! Builds the coherence and diversity comparisons from files on disk.

use std::path::{Path, PathBuf};

use anyhow::{ensure, Context};
use keychord::chordlang::Progression;
use keychord::corpus::{load_corpus, normalize_to_c, CorpusRecord, NormalizeOptions, Source};
use keychord::evalkit::{
    rejection_condition, run_coherence_experiment, run_diversity_experiment, sample_prior, uniform_progressions,
    Condition, DiversityConfig, ExperimentReport,
};
use keychord::llmgate::ChatProvider;
use keychord::sampler::{SamplerConfig, Scorer};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{Assets, ModelPaths};

pub const PRIOR_CONDITION: &str = "prior_samples";
pub const LLM_CONDITION: &str = "llm_samples";
pub const REJECTION_CONDITION: &str = "rejection_sampled";
pub const UNIFORM_CONDITION: &str = "uniform_random";

#[derive(Debug, Clone)]
pub struct CoherenceInputs {
    pub human: PathBuf,
    pub llm: PathBuf,
    pub models: ModelPaths,
    pub sampler: SamplerConfig,
    pub size: usize,
    pub bars: usize,
    pub seed: u64,
}

impl CoherenceInputs {
    /// `human.jsonl` and `llm.jsonl` in `data`, models in `models`.
    pub fn shipped(data: &Path, models: &Path) -> CoherenceInputs {
        CoherenceInputs {
            human: data.join("human.jsonl"),
            llm: data.join("llm.jsonl"),
            models: ModelPaths::in_dir(models),
            sampler: SamplerConfig::default(),
            size: keychord::evalkit::MIN_CONDITION_SIZE,
            bars: 4,
            seed: 0,
        }
    }
}

fn in_c(path: &Path, source: Source, bars: usize) -> anyhow::Result<Vec<CorpusRecord>> {
    let loaded = load_corpus(path, source).with_context(|| format!("loading {}", path.display()))?;
    let opts = NormalizeOptions { bars: Some(bars), dedup: false };
    Ok(normalize_to_c(&loaded.records, opts).training)
}

/// Four conditions of `size` progressions each against the human corpus.
///
/// The rejection condition runs the deployed selection over pools of `N`
/// LLM progressions. The LLM corpus is reshuffled and reused until enough
/// pools exist, since each pool yields only `target_count` suggestions.
pub fn coherence_report(inputs: &CoherenceInputs) -> anyhow::Result<ExperimentReport> {
    let corpus: Vec<Vec<String>> = in_c(&inputs.human, Source::HumanCorpus, inputs.bars)?
        .into_iter()
        .map(|r| r.chords)
        .collect();
    let llm = in_c(&inputs.llm, Source::LlmGenerated, inputs.bars)?;
    ensure!(llm.len() >= inputs.size, "LLM corpus has {} progressions, need {}", llm.len(), inputs.size);
    let assets = Assets::load(&inputs.models)?;
    let scorer = Scorer::new(&assets.vocab, &assets.prior, &assets.proposal)?;
    let mut rng = ChaCha8Rng::seed_from_u64(inputs.seed);

    let prior = sample_prior(&assets.prior, &assets.vocab, inputs.size, inputs.bars, &mut rng)?;
    let uniform = uniform_progressions(&assets.vocab, inputs.size, inputs.bars, &mut rng);

    let mut llm_prog: Vec<Progression> = llm.iter().map(CorpusRecord::progression).collect::<Result<_, _>>()?;
    llm_prog.shuffle(&mut rng);
    let llm_samples = llm_prog.iter().take(inputs.size).map(Progression::symbols).collect();

    let cfg = &inputs.sampler;
    let pools = inputs.size.div_ceil(cfg.target_count.max(1));
    let mut pool = Vec::with_capacity(pools * cfg.n);
    while pool.len() < pools * cfg.n {
        llm_prog.shuffle(&mut rng);
        pool.extend(llm_prog.iter().take(pools * cfg.n - pool.len()).cloned());
    }
    let mut rejected = rejection_condition(&pool, &scorer, cfg, &mut rng)?;
    rejected.truncate(inputs.size);

    let conditions = [
        Condition::new(PRIOR_CONDITION, prior),
        Condition::new(LLM_CONDITION, llm_samples),
        Condition::new(REJECTION_CONDITION, rejected),
        Condition::new(UNIFORM_CONDITION, uniform),
    ];
    let mut report = run_coherence_experiment(&corpus, &conditions, inputs.size)?;
    report.seeds = vec![inputs.seed];
    Ok(report)
}

pub fn diversity_report(provider: &dyn ChatProvider, pairs: usize, seed: u64) -> anyhow::Result<ExperimentReport> {
    let cfg = DiversityConfig { pairs, seed, ..Default::default() };
    Ok(run_diversity_experiment(provider, &cfg)?)
}
