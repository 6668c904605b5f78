//! Synthetic corpora shaped like the real one.
//!
//! Each essay has a latent quality. Its text is sampled from three tiered
//! word pools (plus common filler words), with the high tier more likely as
//! quality rises, and its length grows with quality. The gold score is the
//! rounded, clipped quality, so a bag-of-n-grams model can learn it but not
//! perfectly.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use super::{
    Demographics, EssayRecord, Gender, GradeLevel, Race, ScoreLabel, ScoredDataset, SplitTag,
    SubgroupKey, TriState,
};
use crate::{seed, Error, Result};

/// Population shares used when drawing demographics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Proportions {
    /// Weights for WC, HL, BA, AP, TW, NT, Unknown.
    pub race: [f64; 7],
    pub female: f64,
    pub gender_unknown: f64,
    pub ell: f64,
    pub disability: f64,
    pub econ: f64,
    /// Chance each yes/no flag is recorded as Unknown.
    pub flag_unknown: f64,
    /// Weights for grades 6, 8, 9, 10, 11, 12, Unknown.
    pub grade: [f64; 7],
}

impl Default for Proportions {
    fn default() -> Self {
        // training-split populations of the source corpus
        Proportions {
            race: [7012.0, 3869.0, 2975.0, 1072.0, 598.0, 68.0, 0.0],
            female: 0.5,
            gender_unknown: 0.0,
            ell: 1330.0 / 15594.0,
            disability: 1516.0 / 15594.0,
            econ: 5391.0 / 15594.0,
            flag_unknown: 0.02,
            grade: [688.0, 5614.0, 1831.0, 4654.0, 1863.0, 243.0, 701.0],
        }
    }
}

/// Additive shift to the latent quality of every member of `group`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupOffset {
    pub group: SubgroupKey,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureConfig {
    pub train_size: usize,
    pub test_size: usize,
    /// Target share of score points 1..=6 before subgroup offsets.
    pub score_marginals: [f64; 6],
    pub proportions: Proportions,
    pub offsets: Vec<GroupOffset>,
    /// Expected word count of a score-1 essay.
    pub base_words: f64,
    /// Extra expected words per score point.
    pub words_per_point: f64,
    /// Share of tokens drawn from the quality-neutral filler pool.
    pub filler_rate: f64,
    /// Share of content tokens drawn uniformly across tiers.
    pub tier_noise: f64,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        FixtureConfig {
            train_size: 2000,
            test_size: 1000,
            score_marginals: [0.041, 0.213, 0.317, 0.264, 0.131, 0.034],
            proportions: Proportions::default(),
            offsets: vec![
                GroupOffset {
                    group: SubgroupKey::Ell(TriState::Yes),
                    offset: -0.5,
                },
                GroupOffset {
                    group: SubgroupKey::Disability(TriState::Yes),
                    offset: -0.5,
                },
                GroupOffset {
                    group: SubgroupKey::Economic(TriState::Yes),
                    offset: -0.3,
                },
            ],
            base_words: 110.0,
            words_per_point: 15.0,
            filler_rate: 0.45,
            tier_noise: 0.5,
        }
    }
}

impl FixtureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.train_size == 0 || self.test_size == 0 {
            return Err(Error::Config("fixture train_size and test_size must be positive".into()));
        }
        let weights_ok = |w: &[f64]| w.iter().all(|v| v.is_finite() && *v >= 0.0) && w.iter().sum::<f64>() > 0.0;
        if !weights_ok(&self.score_marginals) || !weights_ok(&self.proportions.race) || !weights_ok(&self.proportions.grade) {
            return Err(Error::Config("fixture weights must be nonnegative with a positive sum".into()));
        }
        let p = &self.proportions;
        for (name, v) in [
            ("female", p.female),
            ("gender_unknown", p.gender_unknown),
            ("ell", p.ell),
            ("disability", p.disability),
            ("econ", p.econ),
            ("flag_unknown", p.flag_unknown),
            ("filler_rate", self.filler_rate),
            ("tier_noise", self.tier_noise),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("fixture `{name}` must lie in [0, 1]")));
            }
        }
        if !(self.base_words > 0.0) || self.words_per_point < 0.0 {
            return Err(Error::Config("fixture length parameters must be positive".into()));
        }
        Ok(())
    }
}

const PROMPTS: [&str; 15] = [
    "Phones and driving",
    "Car-free cities",
    "Summer projects",
    "A Cowboy Who Rode the Waves",
    "Mandatory extracurricular activities",
    "Exploring Venus",
    "Facial action coding system",
    "The Face on Mars",
    "Community service",
    "Grades for extracurricular activities",
    "Driverless cars",
    "Does the electoral college work?",
    "Cell phones at school",
    "Distance learning",
    "Seeking multiple opinions",
];

const FILLER: [&str; 40] = [
    "the", "of", "and", "to", "a", "in", "that", "is", "it", "for", "on", "as", "with", "this",
    "be", "are", "they", "because", "so", "but", "not", "have", "we", "can", "people", "would",
    "if", "their", "there", "more", "also", "think", "should", "do", "about", "some", "will",
    "when", "what", "like",
];

const POOL_SIZE: usize = 150;

/// Three word pools (low, mid, high). Each tier has its own consonant set
/// so character n-grams carry tier information too.
struct Pools {
    tiers: [Vec<String>; 3],
}

impl Pools {
    fn build() -> Pools {
        const ONSETS: [&[&str]; 3] = [
            &["b", "d", "g", "k", "p", "bl", "gr"],
            &["l", "m", "n", "r", "w", "fl", "pr"],
            &["s", "t", "v", "z", "th", "st", "tr"],
        ];
        const VOWELS: [&str; 6] = ["a", "e", "i", "o", "u", "ea"];
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_f1c7);
        let tiers = std::array::from_fn(|tier| {
            let mut words: Vec<String> = Vec::with_capacity(POOL_SIZE);
            while words.len() < POOL_SIZE {
                let syllables = rng.gen_range(2..=4);
                let mut w = String::new();
                for _ in 0..syllables {
                    w.push_str(ONSETS[tier][rng.gen_range(0..ONSETS[tier].len())]);
                    w.push_str(VOWELS[rng.gen_range(0..VOWELS.len())]);
                }
                if !words.contains(&w) {
                    words.push(w);
                }
            }
            words
        });
        Pools { tiers }
    }
}

struct Sampler<'a> {
    cfg: &'a FixtureConfig,
    pools: Pools,
    score: WeightedIndex<f64>,
    race: WeightedIndex<f64>,
    grade: WeightedIndex<f64>,
}

impl<'a> Sampler<'a> {
    fn new(cfg: &'a FixtureConfig) -> Result<Self> {
        let w = |v: &[f64]| WeightedIndex::new(v.iter().copied()).map_err(|e| Error::Config(e.to_string()));
        Ok(Sampler {
            cfg,
            pools: Pools::build(),
            score: w(&cfg.score_marginals)?,
            race: w(&cfg.proportions.race)?,
            grade: w(&cfg.proportions.grade)?,
        })
    }

    fn flag(&self, rng: &mut ChaCha8Rng, p_yes: f64) -> TriState {
        if rng.gen_bool(self.cfg.proportions.flag_unknown) {
            TriState::Unknown
        } else if rng.gen_bool(p_yes) {
            TriState::Yes
        } else {
            TriState::No
        }
    }

    fn demographics(&self, rng: &mut ChaCha8Rng) -> Demographics {
        let p = &self.cfg.proportions;
        let race = Race::ALL[self.race.sample(rng)];
        let gender = if rng.gen_bool(p.gender_unknown) {
            Gender::Unknown
        } else if rng.gen_bool(p.female) {
            Gender::Female
        } else {
            Gender::Male
        };
        Demographics {
            race,
            gender,
            ell: self.flag(rng, p.ell),
            disability: self.flag(rng, p.disability),
            econ_disadvantage: self.flag(rng, p.econ),
        }
    }

    fn text(&self, rng: &mut ChaCha8Rng, quality: f64) -> String {
        let cfg = self.cfg;
        let mean_words = cfg.base_words + cfg.words_per_point * (quality - 1.0);
        let len_dist = Normal::new(mean_words, 0.2 * cfg.base_words).expect("finite length parameters");
        let n_words = (len_dist.sample(rng).round() as i64).max(20) as usize;

        let t = ((quality - 0.5) / 6.0).clamp(0.0, 1.0);
        let shaped = [(1.0 - t) * (1.0 - t), 2.0 * t * (1.0 - t), t * t];
        let tier_w: Vec<f64> = shaped
            .iter()
            .map(|w| (1.0 - cfg.tier_noise) * w + cfg.tier_noise / 3.0)
            .collect();
        let tier_dist = WeightedIndex::new(&tier_w).expect("positive tier weights");

        let mut words: Vec<&str> = Vec::with_capacity(n_words);
        for _ in 0..n_words {
            if rng.gen_bool(cfg.filler_rate) {
                words.push(FILLER[rng.gen_range(0..FILLER.len())]);
            } else {
                let pool = &self.pools.tiers[tier_dist.sample(rng)];
                words.push(&pool[rng.gen_range(0..pool.len())]);
            }
        }
        words.join(" ")
    }

    fn essay(&self, rng: &mut ChaCha8Rng, id: String) -> EssayRecord {
        let base = self.score.sample(rng) as f64 + 1.0;
        let latent = base + rng.gen_range(-0.5..0.5);
        let demographics = self.demographics(rng);
        let offset: f64 = self
            .cfg
            .offsets
            .iter()
            .filter(|o| o.group.matches(&demographics))
            .map(|o| o.offset)
            .sum();
        let quality = latent + offset;
        let gold = ScoreLabel::clip_round(quality);
        let text = self.text(rng, quality);
        let grade = GradeLevel::ALL[self.grade.sample(rng)];
        let prompt = PROMPTS[rng.gen_range(0..PROMPTS.len())];
        EssayRecord::new(id, text, grade, prompt, gold, demographics)
    }
}

/// Generate a (train, test) fixture. Deterministic given `seed`.
pub fn generate_fixture(cfg: &FixtureConfig, seed: u64) -> Result<(ScoredDataset, ScoredDataset)> {
    cfg.validate()?;
    let sampler = Sampler::new(cfg)?;
    let make = |tag: &str, n: usize, split: SplitTag| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(seed, &[b"fixture", tag.as_bytes()]));
        let essays = (0..n)
            .map(|i| sampler.essay(&mut rng, format!("{tag}-{:06}", i + 1)))
            .collect();
        ScoredDataset::from_gold(essays, split)
    };
    Ok((
        make("train", cfg.train_size, SplitTag::Train)?,
        make("test", cfg.test_size, SplitTag::Test)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::write_csv;

    fn small() -> FixtureConfig {
        FixtureConfig {
            train_size: 200,
            test_size: 100,
            ..FixtureConfig::default()
        }
    }

    #[test]
    fn sizes_and_byte_determinism() {
        let cfg = small();
        let (a_train, a_test) = generate_fixture(&cfg, 7).unwrap();
        let (b_train, b_test) = generate_fixture(&cfg, 7).unwrap();
        assert_eq!((a_train.len(), a_test.len()), (200, 100));
        let bytes = |d: &ScoredDataset| {
            let mut v = Vec::new();
            write_csv(d, &mut v).unwrap();
            v
        };
        assert_eq!(bytes(&a_train), bytes(&b_train));
        assert_eq!(bytes(&a_test), bytes(&b_test));
        let (c_train, _) = generate_fixture(&cfg, 8).unwrap();
        assert_ne!(bytes(&a_train), bytes(&c_train));
    }

    #[test]
    fn zero_size_is_config_error() {
        let cfg = FixtureConfig {
            train_size: 0,
            ..small()
        };
        assert!(matches!(generate_fixture(&cfg, 1), Err(Error::Config(_))));
    }

    #[test]
    fn word_count_matches_text() {
        let (train, _) = generate_fixture(&small(), 2).unwrap();
        for r in train.iter() {
            assert_eq!(r.essay.word_count, r.essay.text.split_whitespace().count());
            assert!(r.essay.word_count >= 20);
        }
    }

    #[test]
    fn negative_offset_lowers_subgroup_mean() {
        let cfg = FixtureConfig {
            train_size: 3000,
            test_size: 10,
            offsets: vec![GroupOffset {
                group: SubgroupKey::Ell(TriState::Yes),
                offset: -0.5,
            }],
            proportions: Proportions {
                ell: 0.3,
                ..Proportions::default()
            },
            ..FixtureConfig::default()
        };
        let (train, _) = generate_fixture(&cfg, 7).unwrap();
        let mean = |flag: TriState| {
            let v: Vec<f64> = train
                .iter()
                .filter(|r| r.essay.demographics.ell == flag)
                .map(|r| r.label.get() as f64)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let (yes, no) = (mean(TriState::Yes), mean(TriState::No));
        assert!(yes < no - 0.3, "ELL mean {yes} vs non-ELL {no}");
    }

    #[test]
    fn longer_texts_for_higher_scores() {
        let (train, _) = generate_fixture(&FixtureConfig::default(), 5).unwrap();
        let mean_len = |s: u8| {
            let v: Vec<f64> = train
                .iter()
                .filter(|r| r.label.get() == s)
                .map(|r| r.essay.word_count as f64)
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!(mean_len(2) < mean_len(4));
        assert!(mean_len(4) < mean_len(5));
    }
}
