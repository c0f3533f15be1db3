//! Region-conditioned skip-gram embeddings.
//!
//! Every word carries a global vector plus one differential vector per
//! region; the embedding of word w in region r is their sum. Training
//! minimizes the negative-sampling skip-gram loss by SGD: each (center,
//! context) pair in a region-r document updates the center's global and
//! region-r rows (both receive the full gradient, since the loss sees
//! only their sum) and the context/negative output rows.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::binio;
use crate::corpus::{assign_region, Document, RegionMap, Vocabulary, UNKNOWN_REGION};
use crate::hogwild::{dot_shared, log_sigmoid, sigmoid, SharedMatrix};
use crate::{Error, Metric, Result};

pub const MAGIC: [u8; 4] = *b"GDST";
const VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct GeodistTrainConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub lr_initial: f32,
    pub lr_floor: f32,
    pub epochs: usize,
    pub seed: u64,
    pub workers: usize,
    /// Record mean pair loss over the first and last tenth of training.
    pub track_loss: bool,
    /// Epochs per bootstrap re-estimation (frozen mode). Several passes
    /// bring each re-estimate close to its optimum, so that resample
    /// duplicates reweight the objective instead of starving the fit;
    /// one-pass re-estimates are systematically smaller than the
    /// full-data score and the interval misses it.
    pub bootstrap_epochs: usize,
}

impl Default for GeodistTrainConfig {
    fn default() -> Self {
        GeodistTrainConfig {
            dim: 100,
            window: 10,
            negatives: 5,
            lr_initial: 0.025,
            lr_floor: 1e-4,
            epochs: 1,
            seed: 1,
            workers: 1,
            track_loss: false,
            bootstrap_epochs: 6,
        }
    }
}

pub struct GeodistModel {
    pub d: usize,
    pub regions: Vec<String>,
    /// V x d global input vectors.
    pub delta_main: SharedMatrix,
    /// Per-region V x d differential input vectors, in `regions` order.
    pub delta_region: Vec<SharedMatrix>,
    /// V x d output vectors, shared across regions.
    pub context_out: SharedMatrix,
}

impl GeodistModel {
    /// Global vectors start at small uniform noise; differentials and
    /// output vectors start at zero, so all regions begin identical and
    /// divergence is learned rather than injected at initialization.
    pub fn init(vocab_size: usize, d: usize, regions: Vec<String>, seed: u64) -> GeodistModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 0.5 / d as f32;
        let main: Vec<f32> = (0..vocab_size * d)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        GeodistModel {
            d,
            delta_main: SharedMatrix::from_vec(main, vocab_size, d),
            delta_region: regions
                .iter()
                .map(|_| SharedMatrix::zeros(vocab_size, d))
                .collect(),
            context_out: SharedMatrix::zeros(vocab_size, d),
            regions,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.delta_main.rows()
    }

    pub fn region_index(&self, region: &str) -> Result<usize> {
        self.regions
            .iter()
            .position(|r| r == region)
            .ok_or_else(|| Error::UnknownRegion(region.to_string()))
    }

    pub fn region_embedding(&self, word: u32, region: &str) -> Result<Vec<f32>> {
        let r = self.region_index(region)?;
        let main = self.delta_main.row(word as usize);
        let diff = self.delta_region[r].row(word as usize);
        Ok(main.iter().zip(diff).map(|(a, b)| a.get() + b.get()).collect())
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        binio::write_magic(w, &MAGIC)?;
        binio::write_u32(w, VERSION)?;
        binio::write_u32(w, self.vocab_size() as u32)?;
        binio::write_u32(w, self.d as u32)?;
        binio::write_u32(w, self.regions.len() as u32)?;
        for r in &self.regions {
            binio::write_string(w, r)?;
        }
        binio::write_f32_slice(w, &self.delta_main.to_vec())?;
        for m in &self.delta_region {
            binio::write_f32_slice(w, &m.to_vec())?;
        }
        binio::write_f32_slice(w, &self.context_out.to_vec())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<GeodistModel> {
        GeodistModel::read(&mut BufReader::new(File::open(path)?))
    }

    pub fn read<R: Read>(r: &mut R) -> Result<GeodistModel> {
        binio::expect_magic(r, &MAGIC)?;
        let version = binio::read_u32(r)?;
        if version != VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        let v = binio::read_u32(r)? as usize;
        let d = binio::read_u32(r)? as usize;
        if d == 0 {
            return Err(Error::ModelFormat("zero dimension".to_string()));
        }
        let n_regions = binio::read_u32(r)? as usize;
        let mut regions = Vec::with_capacity(n_regions);
        for _ in 0..n_regions {
            regions.push(binio::read_string(r)?);
        }
        let delta_main = SharedMatrix::from_vec(binio::read_f32_vec(r, v * d)?, v, d);
        let mut delta_region = Vec::with_capacity(n_regions);
        for _ in 0..n_regions {
            delta_region.push(SharedMatrix::from_vec(binio::read_f32_vec(r, v * d)?, v, d));
        }
        let context_out = SharedMatrix::from_vec(binio::read_f32_vec(r, v * d)?, v, d);
        Ok(GeodistModel { d, regions, delta_main, delta_region, context_out })
    }
}

/// Distance between the word's embeddings in two regions.
pub fn geodist_score(
    model: &GeodistModel,
    word: u32,
    r1: &str,
    r2: &str,
    metric: Metric,
) -> Result<f64> {
    let a = model.region_embedding(word, r1)?;
    let b = model.region_embedding(word, r2)?;
    Ok(metric.distance(&a, &b))
}

#[derive(Debug, Clone, Default)]
pub struct TrainSummary {
    pub pairs: u64,
    pub skipped_docs: u64,
    /// Mean pair loss over the first tenth of processed centers
    /// (when `track_loss` is set).
    pub loss_head: f64,
    /// Mean pair loss over the last tenth.
    pub loss_tail: f64,
}

#[derive(Clone)]
pub(crate) struct Encoded {
    pub ids: Vec<u32>,
    pub region: u32,
}

/// Resolve every document to a region and encode tokens as vocabulary ids.
/// The region list is the sorted union of region-map ids and observed
/// labels; documents falling into the "unknown" bucket are dropped and
/// counted.
pub(crate) fn encode_corpus(
    docs: &[Document],
    vocab: &Vocabulary,
    resolution: &str,
    map: Option<&RegionMap>,
) -> Result<(Vec<Encoded>, Vec<String>, u64)> {
    let mut labels = Vec::with_capacity(docs.len());
    let mut region_set: BTreeSet<String> = BTreeSet::new();
    if let Some(m) = map {
        region_set.extend(m.region_ids());
    }
    for doc in docs {
        let label = assign_region(doc, resolution, map)?;
        if label != UNKNOWN_REGION {
            region_set.insert(label.clone());
        }
        labels.push(label);
    }
    let regions: Vec<String> = region_set.into_iter().collect();
    let index: std::collections::HashMap<&str, u32> = regions
        .iter()
        .enumerate()
        .map(|(i, r)| (r.as_str(), i as u32))
        .collect();

    let mut encoded = Vec::with_capacity(docs.len());
    let mut skipped = 0u64;
    for (doc, label) in docs.iter().zip(&labels) {
        match index.get(label.as_str()) {
            Some(&region) => encoded.push(Encoded { ids: vocab.encode(doc), region }),
            None => skipped += 1,
        }
    }
    Ok((encoded, regions, skipped))
}

/// Cumulative unigram^(3/4) noise distribution.
pub(crate) fn noise_table(frequencies: &[u64]) -> Vec<f64> {
    let weights: Vec<f64> = frequencies.iter().map(|&f| (f as f64).powf(0.75)).collect();
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w / total;
            acc
        })
        .collect();
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    cdf
}

fn sample_noise(cdf: &[f64], rng: &mut ChaCha8Rng) -> u32 {
    let u: f64 = rng.gen();
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1) as u32
}

/// One SGD update for a (center, targets) bundle in `region`, where each
/// target is (word id, is-positive). Returns the loss at the pre-update
/// parameters. With `freeze` set, only the region differential is
/// updated (global and output vectors are read-only), which is how
/// bootstrap re-estimation works.
pub fn sgd_step(
    model: &GeodistModel,
    region: usize,
    center: u32,
    targets: &[(u32, bool)],
    lr: f32,
    freeze: bool,
) -> f64 {
    let mut scratch = vec![0.0f32; 2 * model.d];
    sgd_step_with(model, region, center, targets, lr, freeze, true, &mut scratch)
}

fn sgd_step_with(
    model: &GeodistModel,
    region: usize,
    center: u32,
    targets: &[(u32, bool)],
    lr: f32,
    freeze: bool,
    want_loss: bool,
    scratch: &mut [f32],
) -> f64 {
    let d = model.d;
    let (x, xgrad) = scratch.split_at_mut(d);
    let main = model.delta_main.row(center as usize);
    let diff = model.delta_region[region].row(center as usize);
    for k in 0..d {
        x[k] = main[k].get() + diff[k].get();
        xgrad[k] = 0.0;
    }

    let mut loss = 0.0f64;
    for &(target, positive) in targets {
        let out = model.context_out.row(target as usize);
        let dot = dot_shared(out, x);
        if want_loss {
            let sign = if positive { 1.0 } else { -1.0 };
            loss -= log_sigmoid(sign * dot as f64);
        }
        let label = if positive { 1.0f32 } else { 0.0 };
        let g = (sigmoid(dot) - label) * lr;
        for k in 0..d {
            let o = out[k].get();
            xgrad[k] += g * o;
            if !freeze {
                out[k].set(o - g * x[k]);
            }
        }
    }
    for k in 0..d {
        if !freeze {
            main[k].set(main[k].get() - xgrad[k]);
        }
        diff[k].set(diff[k].get() - xgrad[k]);
    }
    loss
}

/// The negative-sampling objective for one (center, targets) bundle at the
/// current parameters, evaluated in f64. Companion to [`sgd_step`] for
/// finite-difference checks.
pub fn pair_loss(model: &GeodistModel, region: usize, center: u32, targets: &[(u32, bool)]) -> f64 {
    let d = model.d;
    let main = model.delta_main.row(center as usize);
    let diff = model.delta_region[region].row(center as usize);
    let x: Vec<f64> = (0..d)
        .map(|k| main[k].get() as f64 + diff[k].get() as f64)
        .collect();
    let mut loss = 0.0;
    for &(target, positive) in targets {
        let out = model.context_out.row(target as usize);
        let dot: f64 = out.iter().zip(&x).map(|(o, xv)| o.get() as f64 * xv).sum();
        let sign = if positive { 1.0 } else { -1.0 };
        loss -= log_sigmoid(sign * dot);
    }
    loss
}

fn run_training(
    model: &GeodistModel,
    docs: &[&Encoded],
    noise_cdf: &[f64],
    config: &GeodistTrainConfig,
    freeze: bool,
) -> (u64, f64, f64) {
    let total_centers: u64 = docs.iter().map(|d| d.ids.len() as u64).sum();
    let schedule_total = (total_centers * config.epochs as u64).max(1);
    let counter = AtomicU64::new(0);
    let workers = config.workers.max(1);

    let merged = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let counter = &counter;
                scope.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(
                        config.seed.wrapping_add((w as u64).wrapping_mul(0x9E3779B97F4A7C15)),
                    );
                    let mut scratch = vec![0.0f32; 2 * model.d];
                    let mut targets: Vec<(u32, bool)> = Vec::with_capacity(config.negatives + 1);
                    let mut pairs = 0u64;
                    let mut head = (0.0f64, 0u64);
                    let mut tail = (0.0f64, 0u64);
                    for _ in 0..config.epochs {
                        for doc in docs.iter().skip(w).step_by(workers) {
                            let n = doc.ids.len();
                            for (ci, &center) in doc.ids.iter().enumerate() {
                                let done = counter.fetch_add(1, Ordering::Relaxed);
                                if done > 0 && done % 1_000_000 == 0 {
                                    log::info!("geodist: {done} of {schedule_total} centers");
                                }
                                let progress = done as f64 / schedule_total as f64;
                                let lr = (config.lr_initial as f64 * (1.0 - progress))
                                    .max(config.lr_floor as f64)
                                    as f32;
                                let b = rng.gen_range(1..=config.window);
                                let lo = ci.saturating_sub(b);
                                let hi = (ci + b).min(n - 1);
                                for cj in lo..=hi {
                                    if cj == ci {
                                        continue;
                                    }
                                    let context = doc.ids[cj];
                                    targets.clear();
                                    targets.push((context, true));
                                    for _ in 0..config.negatives {
                                        let neg = sample_noise(noise_cdf, &mut rng);
                                        if neg != context {
                                            targets.push((neg, false));
                                        }
                                    }
                                    let loss = sgd_step_with(
                                        model,
                                        doc.region as usize,
                                        center,
                                        &targets,
                                        lr,
                                        freeze,
                                        config.track_loss,
                                        &mut scratch,
                                    );
                                    pairs += 1;
                                    if config.track_loss {
                                        match done * 10 / schedule_total {
                                            0 => {
                                                head.0 += loss;
                                                head.1 += 1;
                                            }
                                            9 => {
                                                tail.0 += loss;
                                                tail.1 += 1;
                                            }
                                            _ => {}
                                        }
                                    }
                                }
                            }
                        }
                    }
                    (pairs, head, tail)
                })
            })
            .collect();
        let mut pairs = 0u64;
        let mut head = (0.0f64, 0u64);
        let mut tail = (0.0f64, 0u64);
        for h in handles {
            let (p, hd, tl) = h.join().expect("training worker panicked");
            pairs += p;
            head.0 += hd.0;
            head.1 += hd.1;
            tail.0 += tl.0;
            tail.1 += tl.1;
        }
        (pairs, head, tail)
    });

    let (pairs, head, tail) = merged;
    let mean = |(s, c): (f64, u64)| if c == 0 { 0.0 } else { s / c as f64 };
    (pairs, mean(head), mean(tail))
}

/// Train a model on a tokenized, vocabulary-filtered corpus. Documents in
/// the "unknown" region are skipped and counted in the summary.
pub fn train(
    docs: &[Document],
    vocab: &Vocabulary,
    resolution: &str,
    map: Option<&RegionMap>,
    config: &GeodistTrainConfig,
) -> Result<(GeodistModel, TrainSummary)> {
    let (encoded, regions, skipped) = encode_corpus(docs, vocab, resolution, map)?;
    if skipped > 0 {
        log::warn!("geodist: skipped {skipped} documents in the unknown region");
    }
    let model = GeodistModel::init(vocab.len(), config.dim, regions, config.seed);
    let noise = noise_table(vocab.frequencies());
    let refs: Vec<&Encoded> = encoded.iter().collect();
    let (pairs, loss_head, loss_tail) = run_training(&model, &refs, &noise, config, false);
    Ok((model, TrainSummary { pairs, skipped_docs: skipped, loss_head, loss_tail }))
}

#[derive(Debug, Clone)]
pub struct BootstrapReport {
    /// Score of the same estimator applied to the un-resampled corpus.
    pub point: f64,
    pub mean: f64,
    pub std: f64,
    /// 2.5% empirical quantile of the resample scores.
    pub lo: f64,
    /// 97.5% empirical quantile.
    pub hi: f64,
    pub scores: Vec<f64>,
}

/// Nearest-rank empirical quantile of an ascending-sorted slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let idx = (q * (sorted.len() as f64 - 1.0)).round() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

/// Estimate the sampling variability of a word's cross-region score by
/// document-level bootstrap, stratified by region: each resample redraws
/// every region's documents with replacement within that region, so the
/// per-region sample sizes are held fixed and the variability measured is
/// that of the documents' content.
///
/// By default the global and output vectors are frozen at their
/// full-corpus values and only the region differentials are re-estimated
/// per resample; `full_retrain` retrains everything from scratch instead
/// (much slower). Every estimation uses the same RNG stream, so a corpus
/// whose documents are identical within each region yields exactly zero
/// spread.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_confidence(
    docs: &[Document],
    vocab: &Vocabulary,
    resolution: &str,
    map: Option<&RegionMap>,
    word: u32,
    r1: &str,
    r2: &str,
    resamples: usize,
    config: &GeodistTrainConfig,
    full_retrain: bool,
    metric: Metric,
) -> Result<BootstrapReport> {
    if resamples < 2 {
        return Err(Error::BootstrapResamples(resamples));
    }
    let (encoded, regions, _) = encode_corpus(docs, vocab, resolution, map)?;
    if encoded.is_empty() {
        return Err(Error::invalid("bootstrap on an empty corpus"));
    }
    let noise = noise_table(vocab.frequencies());
    let v = vocab.len();

    let base = if full_retrain {
        None
    } else {
        let model = GeodistModel::init(v, config.dim, regions.clone(), config.seed);
        let refs: Vec<&Encoded> = encoded.iter().collect();
        run_training(&model, &refs, &noise, config, false);
        Some(model)
    };

    // Frozen re-estimations run their own epoch budget and draw windows
    // and negatives from a stream decorrelated from the base training's
    // (replaying the base stream over the same data would re-align the
    // differentials with the frozen vectors' fitted noise). The literal
    // full-retrain procedure keeps the caller's configuration unchanged.
    let est_config = if full_retrain {
        config.clone()
    } else {
        GeodistTrainConfig {
            seed: config.seed.wrapping_add(0x7265_7361_6d70),
            epochs: config.bootstrap_epochs,
            ..config.clone()
        }
    };
    let estimate = |sample: &[&Encoded]| -> Result<f64> {
        let model = match &base {
            Some(base) => {
                let model = GeodistModel {
                    d: base.d,
                    regions: base.regions.clone(),
                    delta_main: SharedMatrix::from_vec(base.delta_main.to_vec(), v, base.d),
                    delta_region: base
                        .regions
                        .iter()
                        .map(|_| SharedMatrix::zeros(v, base.d))
                        .collect(),
                    context_out: SharedMatrix::from_vec(base.context_out.to_vec(), v, base.d),
                };
                run_training(&model, sample, &noise, &est_config, true);
                model
            }
            None => {
                let model = GeodistModel::init(v, est_config.dim, regions.clone(), est_config.seed);
                run_training(&model, sample, &noise, &est_config, false);
                model
            }
        };
        geodist_score(&model, word, r1, r2, metric)
    };

    let refs: Vec<&Encoded> = encoded.iter().collect();
    let point = estimate(&refs)?;

    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); regions.len()];
    for (i, e) in encoded.iter().enumerate() {
        pools[e.region as usize].push(i);
    }
    let mut idx_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x626f_6f74);
    let mut scores = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut sample: Vec<&Encoded> = Vec::with_capacity(encoded.len());
        for pool in pools.iter().filter(|p| !p.is_empty()) {
            for _ in 0..pool.len() {
                sample.push(&encoded[pool[idx_rng.gen_range(0..pool.len())]]);
            }
        }
        scores.push(estimate(&sample)?);
    }

    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let mut sorted = scores.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(BootstrapReport {
        point,
        mean,
        std: var.sqrt(),
        lo: quantile(&sorted, 0.025),
        hi: quantile(&sorted, 0.975),
        scores,
    })
}
