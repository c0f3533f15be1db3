//! Synthetic corpus generation with planted region-dependent senses.
//!
//! A [`SynthSpec`] plants words whose context distribution depends on a
//! latent sense, with per-region sense mixtures, alongside stable words
//! whose contexts are region-independent. The generated corpus plus its
//! ground-truth lexicon (planted = 1, stable = 0) is the oracle for the
//! end-to-end detection tests.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, Document};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    /// Upper bound on distinct words the generator may reference.
    pub vocab_size: usize,
    #[serde(default = "default_resolution")]
    pub resolution: String,
    pub doc_len: LenRange,
    pub regions: Vec<SynthRegion>,
    #[serde(default)]
    pub planted: Vec<PlantedWord>,
    #[serde(default)]
    pub stable: Vec<StableWord>,
}

fn default_resolution() -> String {
    "country".to_string()
}

/// Document length in tokens, sampled uniformly from [min, max].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LenRange {
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthRegion {
    pub id: String,
    pub docs: u64,
    /// Optional [lon_min, lat_min, lon_max, lat_max] box; when present,
    /// documents get uniform coordinates inside it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[f64; 4]>,
}

/// A word whose context distribution is sense-dependent, with the sense
/// mixture varying by region.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedWord {
    pub word: String,
    pub senses: Vec<SenseSpec>,
    /// region id -> mixture over senses (must cover every region).
    pub mixtures: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SenseSpec {
    /// Context word -> probability.
    pub context: BTreeMap<String, f64>,
    /// POS tag the target carries under this sense.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<String>,
}

/// A word with one region-independent context distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StableWord {
    pub word: String,
    pub context: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<String>,
}

const WEIGHT_TOL: f64 = 1e-6;

fn check_distribution(path: &str, dist: &BTreeMap<String, f64>) -> Result<()> {
    if dist.is_empty() {
        return Err(Error::spec(path, "empty distribution"));
    }
    let mut sum = 0.0;
    for (word, &w) in dist {
        if !w.is_finite() || w <= 0.0 {
            return Err(Error::spec(
                format!("{path}.{word}"),
                format!("weight {w} must be a positive finite number"),
            ));
        }
        sum += w;
    }
    if (sum - 1.0).abs() > WEIGHT_TOL {
        return Err(Error::spec(path, format!("weights sum to {sum}, expected 1")));
    }
    for word in dist.keys() {
        check_word(path, word)?;
    }
    Ok(())
}

/// Spec words must survive the corpus tokenizer unchanged, or the written
/// corpus would not re-tokenize to the generated token stream.
fn check_word(path: &str, word: &str) -> Result<()> {
    if tokenize(word) != [word] {
        return Err(Error::spec(
            path,
            format!("word {word:?} is not tokenizer-stable"),
        ));
    }
    Ok(())
}

impl SynthSpec {
    pub fn load<P: AsRef<Path>>(path: P) -> Result<SynthSpec> {
        let spec: SynthSpec = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.regions.is_empty() {
            return Err(Error::spec("regions", "at least one region required"));
        }
        let mut region_ids = BTreeSet::new();
        for (i, r) in self.regions.iter().enumerate() {
            if !region_ids.insert(r.id.as_str()) {
                return Err(Error::spec(format!("regions[{i}].id"), "duplicate region id"));
            }
            if let Some([lon_min, lat_min, lon_max, lat_max]) = r.bbox {
                if lon_min > lon_max || lat_min > lat_max {
                    return Err(Error::spec(format!("regions[{i}].bbox"), "degenerate box"));
                }
            }
        }
        if self.doc_len.min < 2 || self.doc_len.max < self.doc_len.min {
            return Err(Error::spec(
                "doc_len",
                "need min >= 2 (one target plus context) and max >= min",
            ));
        }
        if self.planted.is_empty() && self.stable.is_empty() {
            return Err(Error::spec("planted", "spec defines no target words"));
        }

        let mut words = BTreeSet::new();
        let mut targets = BTreeSet::new();
        for (i, p) in self.planted.iter().enumerate() {
            check_word(&format!("planted[{i}].word"), &p.word)?;
            if !targets.insert(p.word.as_str()) {
                return Err(Error::spec(format!("planted[{i}].word"), "duplicate target word"));
            }
            words.insert(p.word.clone());
            if p.senses.is_empty() {
                return Err(Error::spec(format!("planted[{i}].senses"), "no senses"));
            }
            for (k, s) in p.senses.iter().enumerate() {
                check_distribution(&format!("planted[{i}].senses[{k}].context"), &s.context)?;
                words.extend(s.context.keys().cloned());
            }
            for r in &self.regions {
                let mix = p.mixtures.get(&r.id).ok_or_else(|| {
                    Error::spec(
                        format!("planted[{i}].mixtures.{}", r.id),
                        "missing mixture for region",
                    )
                })?;
                if mix.len() != p.senses.len() {
                    return Err(Error::spec(
                        format!("planted[{i}].mixtures.{}", r.id),
                        format!("{} entries for {} senses", mix.len(), p.senses.len()),
                    ));
                }
                let sum: f64 = mix.iter().sum();
                if mix.iter().any(|&m| !m.is_finite() || m < 0.0) || (sum - 1.0).abs() > WEIGHT_TOL
                {
                    return Err(Error::spec(
                        format!("planted[{i}].mixtures.{}", r.id),
                        "not a probability vector",
                    ));
                }
            }
        }
        for (j, s) in self.stable.iter().enumerate() {
            check_word(&format!("stable[{j}].word"), &s.word)?;
            if !targets.insert(s.word.as_str()) {
                return Err(Error::spec(
                    format!("stable[{j}].word"),
                    "word already used as a target",
                ));
            }
            words.insert(s.word.clone());
            check_distribution(&format!("stable[{j}].context"), &s.context)?;
            words.extend(s.context.keys().cloned());
        }
        if words.len() > self.vocab_size {
            return Err(Error::spec(
                "vocab_size",
                format!("spec references {} distinct words, declared {}", words.len(), self.vocab_size),
            ));
        }
        Ok(())
    }

    /// Ground-truth lexicon: planted words labeled 1, stable words 0.
    pub fn labels(&self) -> Vec<(String, u8)> {
        self.planted
            .iter()
            .map(|p| (p.word.clone(), 1))
            .chain(self.stable.iter().map(|s| (s.word.clone(), 0)))
            .collect()
    }
}

/// Cumulative-weight categorical sampler with key-sorted support.
struct Sampler {
    words: Vec<String>,
    cdf: Vec<f64>,
}

impl Sampler {
    fn new(dist: &BTreeMap<String, f64>) -> Sampler {
        let total: f64 = dist.values().sum();
        let mut cdf = Vec::with_capacity(dist.len());
        let mut acc = 0.0;
        let mut words = Vec::with_capacity(dist.len());
        for (w, &p) in dist {
            acc += p / total;
            words.push(w.clone());
            cdf.push(acc);
        }
        *cdf.last_mut().unwrap() = 1.0;
        Sampler { words, cdf }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> &str {
        let u: f64 = rng.gen();
        let i = self.cdf.partition_point(|&c| c <= u).min(self.words.len() - 1);
        &self.words[i]
    }
}

enum Target {
    Planted {
        word: String,
        /// One sampler per sense, plus per-region mixture cdf.
        senses: Vec<Sampler>,
        pos: Vec<Option<String>>,
        mixture_cdf: BTreeMap<String, Vec<f64>>,
    },
    Stable {
        word: String,
        context: Sampler,
        pos: Option<String>,
    },
}

/// Generate the corpus described by `spec`.
///
/// Documents are produced region by region in spec order; within a region,
/// target words cycle through planted-then-stable order, so every target
/// gets the same occurrence count in every region (up to remainder) and
/// raw frequency carries no regional signal. The target sits at the middle
/// position of each document; the remaining positions are i.i.d. draws
/// from the sense's (or stable word's) context distribution.
pub fn generate(spec: &SynthSpec) -> Result<(Vec<Document>, Vec<(String, u8)>)> {
    spec.validate()?;
    let tagged = spec.planted.iter().any(|p| p.senses.iter().any(|s| s.pos.is_some()))
        || spec.stable.iter().any(|s| s.pos.is_some());

    let mut targets: Vec<Target> = Vec::new();
    for p in &spec.planted {
        let mixture_cdf = p
            .mixtures
            .iter()
            .map(|(r, mix)| {
                let mut acc = 0.0;
                let cdf: Vec<f64> = mix
                    .iter()
                    .map(|&m| {
                        acc += m;
                        acc
                    })
                    .collect();
                (r.clone(), cdf)
            })
            .collect();
        targets.push(Target::Planted {
            word: p.word.clone(),
            senses: p.senses.iter().map(|s| Sampler::new(&s.context)).collect(),
            pos: p.senses.iter().map(|s| s.pos.clone()).collect(),
            mixture_cdf,
        });
    }
    for s in &spec.stable {
        targets.push(Target::Stable {
            word: s.word.clone(),
            context: Sampler::new(&s.context),
            pos: s.pos.clone(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut docs = Vec::new();
    let mut doc_no = 0u64;
    for region in &spec.regions {
        for j in 0..region.docs {
            let len = if spec.doc_len.min == spec.doc_len.max {
                spec.doc_len.min
            } else {
                rng.gen_range(spec.doc_len.min..=spec.doc_len.max)
            };
            let (lat, lon) = match region.bbox {
                Some([lon_min, lat_min, lon_max, lat_max]) => {
                    let lon = rng.gen_range(lon_min..=lon_max);
                    let lat = rng.gen_range(lat_min..=lat_max);
                    (Some(lat), Some(lon))
                }
                None => (None, None),
            };
            let target = &targets[(j % targets.len() as u64) as usize];
            let target_idx = len / 2;

            let (word, sampler, tag) = match target {
                Target::Planted { word, senses, pos, mixture_cdf } => {
                    let cdf = &mixture_cdf[&region.id];
                    let u: f64 = rng.gen();
                    let k = cdf.partition_point(|&c| c <= u).min(senses.len() - 1);
                    (word.as_str(), &senses[k], pos[k].as_deref())
                }
                Target::Stable { word, context, pos } => {
                    (word.as_str(), context, pos.as_deref())
                }
            };

            let mut tokens = Vec::with_capacity(len);
            for pos_i in 0..len {
                if pos_i == target_idx {
                    tokens.push(word.to_string());
                } else {
                    tokens.push(sampler.sample(&mut rng).to_string());
                }
            }
            let pos_tags = tagged.then(|| {
                (0..len)
                    .map(|i| {
                        if i == target_idx {
                            tag.unwrap_or("X").to_string()
                        } else {
                            "X".to_string()
                        }
                    })
                    .collect()
            });

            docs.push(Document {
                id: format!("synth-{doc_no:06}"),
                text: tokens.join(" "),
                lat,
                lon,
                timestamp: None,
                region_labels: BTreeMap::from([(spec.resolution.clone(), region.id.clone())]),
                pos_tags,
                tokens,
            });
            doc_no += 1;
        }
    }
    Ok((docs, spec.labels()))
}

pub fn write_labels<W: Write>(w: &mut W, labels: &[(String, u8)]) -> Result<()> {
    for (word, label) in labels {
        writeln!(w, "{word}\t{label}")?;
    }
    Ok(())
}

/// The detection benchmark: 2 regions x 2,000 documents, 20 two-sense
/// planted words with mirrored 0.9/0.1 mixtures, 20 stable words, 160
/// context words (4 per sense pool; each stable word draws uniformly from
/// the union of its paired planted word's pools), 200 words total. Fixed
/// document length and target cycling make every target's frequency
/// identical across regions, so count-based scores carry no signal.
pub fn benchmark_spec() -> SynthSpec {
    let pool = |base: usize, n: usize, p: f64| -> BTreeMap<String, f64> {
        (0..n).map(|j| (format!("c{:03}", base + j), p)).collect()
    };
    let mut planted = Vec::new();
    let mut stable = Vec::new();
    for i in 0..20 {
        let a = pool(8 * i, 4, 0.25);
        let b = pool(8 * i + 4, 4, 0.25);
        planted.push(PlantedWord {
            word: format!("p{i:02}"),
            senses: vec![
                SenseSpec { context: a, pos: None },
                SenseSpec { context: b, pos: None },
            ],
            mixtures: BTreeMap::from([
                ("US".to_string(), vec![0.9, 0.1]),
                ("UK".to_string(), vec![0.1, 0.9]),
            ]),
        });
        stable.push(StableWord {
            word: format!("s{i:02}"),
            context: pool(8 * i, 8, 0.125),
            pos: None,
        });
    }
    SynthSpec {
        seed: 2019,
        vocab_size: 200,
        resolution: "country".to_string(),
        doc_len: LenRange { min: 12, max: 12 },
        regions: vec![
            SynthRegion { id: "US".to_string(), docs: 2000, bbox: None },
            SynthRegion { id: "UK".to_string(), docs: 2000, bbox: None },
        ],
        planted,
        stable,
    }
}

/// A scaled-down variant of [`benchmark_spec`] for fast unit tests: 6
/// planted and 6 stable words, 240 documents per region, length 8.
pub fn small_fixture() -> SynthSpec {
    let pool = |base: usize, n: usize, p: f64| -> BTreeMap<String, f64> {
        (0..n).map(|j| (format!("c{:03}", base + j), p)).collect()
    };
    let mut planted = Vec::new();
    let mut stable = Vec::new();
    for i in 0..6 {
        planted.push(PlantedWord {
            word: format!("p{i:02}"),
            senses: vec![
                SenseSpec { context: pool(8 * i, 4, 0.25), pos: None },
                SenseSpec { context: pool(8 * i + 4, 4, 0.25), pos: None },
            ],
            mixtures: BTreeMap::from([
                ("US".to_string(), vec![0.9, 0.1]),
                ("UK".to_string(), vec![0.1, 0.9]),
            ]),
        });
        stable.push(StableWord {
            word: format!("s{i:02}"),
            context: pool(8 * i, 8, 0.125),
            pos: None,
        });
    }
    SynthSpec {
        seed: 77,
        vocab_size: 60,
        resolution: "country".to_string(),
        doc_len: LenRange { min: 8, max: 8 },
        regions: vec![
            SynthRegion { id: "US".to_string(), docs: 240, bbox: None },
            SynthRegion { id: "UK".to_string(), docs: 240, bbox: None },
        ],
        planted,
        stable,
    }
}
