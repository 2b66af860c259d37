//! Seeded synthetic small/large committees driven by a latent per-example
//! difficulty.
//!
//! Each example gets a difficulty `d ∈ [0, 1]`. A small-model run is
//! correct with probability `1 - (1 - 1/K)·d` and its softmax flattens
//! toward uniform as `d` grows. The large model shares that law except on
//! the hardest examples, where `large_advantage` closes the gap to
//! certainty, and on the easiest, where `certain_regression` knocks out a
//! share of its correct answers. Committee members are independent
//! retrainings: each perturbs `d` slightly and draws its own correctness,
//! reusing a per-example draw with probability `shared_draw`.
//!
//! Every random number is a hash of `(seed, stream, example, member)`, so
//! output does not depend on generation order or platform.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::model::{validate_alignment, ClassDistribution, ModelOutput, ModelRun, PredictionRecord, RunSet, SizeTag};
use crate::{Error, Result};

/// Runner-up mass kept by a fully certain model.
const RESIDUAL_MASS: f64 = 1e-4;

/// Latent difficulty law: `d = u^exponent` with `u` uniform, so larger
/// exponents skew toward easy examples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifficultyMix {
    pub exponent: f64,
}

impl DifficultyMix {
    /// Difficulty value at quantile `q`.
    pub fn quantile(&self, q: f64) -> f64 {
        libm::pow(q, self.exponent)
    }
}

impl Default for DifficultyMix {
    fn default() -> Self {
        Self { exponent: 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_examples: usize,
    pub n_classes: usize,
    /// Runs per model size (the first small run is the reference).
    pub committee_size: usize,
    pub seed: u64,
    pub difficulty_mix: DifficultyMix,
    /// Share of the small model's error the large model removes on
    /// examples above `advantage_quantile` of difficulty.
    pub large_advantage: f64,
    pub advantage_quantile: f64,
    /// Share of correct answers the large model loses on examples below
    /// `regression_quantile` of difficulty.
    pub certain_regression: f64,
    pub regression_quantile: f64,
    /// Half-width of each member's uniform perturbation of difficulty.
    pub member_noise: f64,
    /// Probability a member reuses the example's shared correctness draw.
    pub shared_draw: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_examples: 5_000,
            n_classes: 2,
            committee_size: 1,
            seed: 0,
            difficulty_mix: DifficultyMix::default(),
            large_advantage: 0.0,
            advantage_quantile: 0.9,
            certain_regression: 0.0,
            regression_quantile: 0.5,
            member_noise: 0.05,
            shared_draw: 0.5,
        }
    }
}

impl SynthConfig {
    /// Large model fixes the hardest decile and regresses on the easiest half.
    pub fn hump(seed: u64) -> Self {
        Self {
            seed,
            large_advantage: 1.0,
            certain_regression: 0.2,
            ..Self::default()
        }
    }

    /// Large model statistically identical to the small one.
    pub fn null(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {v}")))
            }
        };
        if self.n_examples == 0 {
            return Err(Error::InvalidParameter("n_examples must be positive".into()));
        }
        if self.n_classes < 2 {
            return Err(Error::TooFewClasses(self.n_classes));
        }
        if self.committee_size == 0 {
            return Err(Error::InvalidParameter("committee_size must be positive".into()));
        }
        if !(self.difficulty_mix.exponent > 0.0 && self.difficulty_mix.exponent.is_finite()) {
            return Err(Error::InvalidParameter("difficulty exponent must be positive".into()));
        }
        unit("large_advantage", self.large_advantage)?;
        unit("advantage_quantile", self.advantage_quantile)?;
        unit("certain_regression", self.certain_regression)?;
        unit("regression_quantile", self.regression_quantile)?;
        unit("member_noise", self.member_noise)?;
        unit("shared_draw", self.shared_draw)
    }
}

/// Latent facts about one generated example.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthExample {
    pub example_id: String,
    pub gold: String,
    pub difficulty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub small: RunSet,
    pub large: RunSet,
    pub examples: Vec<SynthExample>,
}

#[derive(Clone, Copy)]
#[repr(u64)]
enum Stream {
    Difficulty = 1,
    Gold,
    SharedCorrect,
    Noise,
    OwnCorrect,
    UseShared,
    WrongClass,
    RunnerUp,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Tier {
    Small = 0,
    Large = 1,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based uniform in `[0, 1)` keyed by `(seed, stream, example, member)`.
fn uniform(seed: u64, stream: Stream, example: u64, member: u64) -> f64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ stream as u64);
    h = splitmix64(h ^ example);
    h = splitmix64(h ^ member);
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn class_label(c: usize) -> String {
    format!("c{c}")
}

/// Example ids sort in generation order.
pub fn example_id(i: usize) -> String {
    format!("ex{i:07}")
}

struct MemberKey {
    tier: Tier,
    member: u64,
}

impl MemberKey {
    fn id(&self) -> u64 {
        ((self.tier as u64) << 32) | self.member
    }
}

fn generate_record(
    cfg: &SynthConfig,
    i: usize,
    gold: usize,
    difficulty: f64,
    key: &MemberKey,
) -> Result<PredictionRecord> {
    let k = cfg.n_classes;
    let kf = k as f64;
    let ex = i as u64;
    let who = key.id();
    let draw = |s| uniform(cfg.seed, s, ex, who);

    let mut p_correct = 1.0 - (1.0 - 1.0 / kf) * difficulty;
    if key.tier == Tier::Large {
        if difficulty >= cfg.difficulty_mix.quantile(cfg.advantage_quantile) {
            p_correct += cfg.large_advantage * (1.0 - p_correct);
        }
        if difficulty <= cfg.difficulty_mix.quantile(cfg.regression_quantile) {
            p_correct *= 1.0 - cfg.certain_regression;
        }
    }
    let v = if draw(Stream::UseShared) < cfg.shared_draw {
        uniform(cfg.seed, Stream::SharedCorrect, ex, 0)
    } else {
        draw(Stream::OwnCorrect)
    };
    let other = |s| (gold + 1 + (draw(s) * (kf - 1.0)) as usize % (k - 1)) % k;
    let (predicted, runner_up) = if v < p_correct {
        (gold, other(Stream::RunnerUp))
    } else {
        (other(Stream::WrongClass), gold)
    };

    let local = (difficulty + cfg.member_noise * (2.0 * draw(Stream::Noise) - 1.0)).clamp(0.0, 1.0);
    let floor = local / kf;
    let mut probs = vec![floor; k];
    probs[predicted] += (1.0 - local) * (1.0 - RESIDUAL_MASS);
    probs[runner_up] += (1.0 - local) * RESIDUAL_MASS;

    Ok(PredictionRecord::new(
        example_id(i),
        class_label(predicted),
        Some(class_label(gold)),
        ModelOutput::Class(ClassDistribution::with_labels(probs, (0..k).map(class_label).collect())?),
    ))
}

/// Generates small and large committees over the same examples.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let examples: Vec<(usize, f64)> = (0..cfg.n_examples)
        .map(|i| {
            let ex = i as u64;
            let d = cfg
                .difficulty_mix
                .quantile(uniform(cfg.seed, Stream::Difficulty, ex, 0));
            let gold = (uniform(cfg.seed, Stream::Gold, ex, 0) * cfg.n_classes as f64) as usize;
            (gold.min(cfg.n_classes - 1), d)
        })
        .collect();

    let build = |tier: Tier| -> Result<RunSet> {
        let (name, tag) = match tier {
            Tier::Small => ("small", SizeTag::Small),
            Tier::Large => ("large", SizeTag::Xl3b),
        };
        let mut runs = Vec::with_capacity(cfg.committee_size);
        for m in 0..cfg.committee_size {
            let key = MemberKey { tier, member: m as u64 };
            let records = examples
                .iter()
                .enumerate()
                .map(|(i, &(gold, d))| generate_record(cfg, i, gold, d, &key))
                .collect::<Result<Vec<_>>>()?;
            runs.push(ModelRun::new(format!("{name}-{m}"), tag, m as u32, records)?);
        }
        validate_alignment(runs)
    };

    Ok(SynthOutput {
        small: build(Tier::Small)?,
        large: build(Tier::Large)?,
        examples: examples
            .iter()
            .enumerate()
            .map(|(i, &(gold, difficulty))| SynthExample {
                example_id: example_id(i),
                gold: class_label(gold),
                difficulty,
            })
            .collect(),
    })
}
