//! Multi-sense word embeddings with a Dirichlet-process sense prior.
//!
//! Each word owns up to K prototype vectors. A truncated stick-breaking
//! prior over prototypes (concentration `alpha`) is maintained through
//! accumulated pseudo-counts: training disambiguates every center
//! occurrence against the current prior and context likelihoods (E-step),
//! applies a posterior-weighted gradient step through a Huffman-tree
//! softmax (M-step), and adds the posterior to the pseudo-counts. Region
//! labels are never read, so a single trained model can be composed into
//! region-specific embeddings at any resolution afterwards.
//!
//! Context probabilities are exact tree softmaxes: p(c | w, s) is a
//! product of sigmoids along c's code path, so the sense posterior is a
//! proper Bayes update rather than a sampled approximation.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::binio;
use crate::corpus::{Document, Vocabulary};
use crate::hogwild::{log_sigmoid, sigmoid, AtomicF32, SharedMatrix};
use crate::huffman::{build_huffman, HuffmanTree};
use crate::metric::cosine_similarity;
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"ADGM";
const VERSION: u32 = 1;

/// Senses below this posterior mass are skipped in the M-step; their
/// update would vanish against float precision anyway. Pseudo-counts
/// still receive the full posterior.
const POSTERIOR_GATE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct AdaGramTrainConfig {
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    /// Truncation level K of the stick-breaking prior.
    pub max_senses: usize,
    /// Dirichlet-process concentration. Larger values spread prior mass
    /// over more senses.
    pub alpha: f64,
    /// Senses whose expected stick weight falls below this are inactive.
    pub sense_threshold: f64,
    pub lr_initial: f32,
    pub lr_floor: f32,
    pub seed: u64,
    pub workers: usize,
    /// Record mean posterior-weighted loss over the first and last tenth
    /// of training.
    pub track_loss: bool,
}

impl Default for AdaGramTrainConfig {
    fn default() -> Self {
        AdaGramTrainConfig {
            dim: 100,
            window: 10,
            epochs: 1,
            max_senses: 30,
            alpha: 0.1,
            sense_threshold: 1e-17,
            lr_initial: 0.025,
            lr_floor: 1e-4,
            seed: 1,
            workers: 1,
            track_loss: false,
        }
    }
}

pub struct AdaGramModel {
    pub d: usize,
    pub max_senses: usize,
    pub alpha: f64,
    pub sense_threshold: f64,
    pub tree: HuffmanTree,
    /// (V*K) x d sense input vectors; row w*K + s.
    pub sense_in: SharedMatrix,
    /// (V-1) x d inner-node output vectors.
    pub node_out: SharedMatrix,
    /// V x K stick-breaking pseudo-counts.
    pub sense_stats: SharedMatrix,
    /// V*K active flags; kept in sync with the pseudo-counts by
    /// [`AdaGramModel::refresh_active`] and by training.
    active: Vec<bool>,
}

impl AdaGramModel {
    /// Fresh model over a vocabulary given by its leaf frequencies. Sense
    /// vectors start at small uniform noise so senses can diverge; node
    /// vectors and pseudo-counts start at zero.
    pub fn init(frequencies: &[u64], config: &AdaGramTrainConfig) -> Result<AdaGramModel> {
        if config.dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if config.max_senses == 0 {
            return Err(Error::invalid("max_senses must be at least 1"));
        }
        if !(config.alpha > 0.0) {
            return Err(Error::invalid("alpha must be positive"));
        }
        let tree = build_huffman(frequencies)?;
        let v = frequencies.len();
        let (k, d) = (config.max_senses, config.dim);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let bound = 0.5 / d as f32;
        let sense_in: Vec<f32> = (0..v * k * d).map(|_| rng.gen_range(-bound..bound)).collect();
        let mut model = AdaGramModel {
            d,
            max_senses: k,
            alpha: config.alpha,
            sense_threshold: config.sense_threshold,
            tree,
            sense_in: SharedMatrix::from_vec(sense_in, v * k, d),
            node_out: SharedMatrix::zeros(v - 1, d),
            sense_stats: SharedMatrix::zeros(v, k),
            active: vec![false; v * k],
        };
        model.refresh_active();
        Ok(model)
    }

    /// Assemble a model from explicit parts (toy models, file loading).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        tree: HuffmanTree,
        d: usize,
        max_senses: usize,
        alpha: f64,
        sense_threshold: f64,
        sense_in: Vec<f32>,
        node_out: Vec<f32>,
        sense_stats: Vec<f32>,
    ) -> Result<AdaGramModel> {
        let v = tree.vocab_size();
        if max_senses == 0 || !(alpha > 0.0) {
            return Err(Error::invalid("max_senses must be >= 1 and alpha positive"));
        }
        if sense_in.len() != v * max_senses * d
            || node_out.len() != (v - 1) * d
            || sense_stats.len() != v * max_senses
        {
            return Err(Error::invalid("component shapes do not agree"));
        }
        let mut model = AdaGramModel {
            d,
            max_senses,
            alpha,
            sense_threshold,
            tree,
            sense_in: SharedMatrix::from_vec(sense_in, v * max_senses, d),
            node_out: SharedMatrix::from_vec(node_out, v - 1, d),
            sense_stats: SharedMatrix::from_vec(sense_stats, v, max_senses),
            active: vec![false; v * max_senses],
        };
        model.refresh_active();
        Ok(model)
    }

    pub fn vocab_size(&self) -> usize {
        self.tree.vocab_size()
    }

    pub fn is_active(&self, word: u32, sense: usize) -> bool {
        sense < self.max_senses && self.active[word as usize * self.max_senses + sense]
    }

    pub fn active_senses(&self, word: u32) -> Vec<usize> {
        let base = word as usize * self.max_senses;
        (0..self.max_senses).filter(|&s| self.active[base + s]).collect()
    }

    fn sense_row(&self, word: u32, sense: usize) -> &[AtomicF32] {
        self.sense_in.row(word as usize * self.max_senses + sense)
    }

    pub fn sense_vector(&self, word: u32, sense: usize) -> Vec<f32> {
        self.sense_row(word, sense).iter().map(|a| a.get()).collect()
    }

    fn stats_vec(&self, word: u32) -> Vec<f64> {
        self.sense_stats.row(word as usize).iter().map(|a| a.get() as f64).collect()
    }

    /// Recompute the active mask from the pseudo-counts: a sense is active
    /// while its expected stick weight stays at or above the threshold. At
    /// least one sense (the heaviest stick) always survives.
    pub fn refresh_active(&mut self) {
        let k = self.max_senses;
        for word in 0..self.vocab_size() {
            let pi = stick_expectations(&self.stats_vec(word as u32), self.alpha);
            let mask = &mut self.active[word * k..(word + 1) * k];
            let mut any = false;
            for (m, &p) in mask.iter_mut().zip(&pi) {
                *m = p >= self.sense_threshold;
                any |= *m;
            }
            if !any {
                let best = pi
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).expect("stick weights are finite"))
                    .map(|(s, _)| s)
                    .unwrap_or(0);
                mask[best] = true;
            }
        }
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
        binio::write_u32(w, self.max_senses as u32)?;
        binio::write_f64(w, self.alpha)?;
        binio::write_f64(w, self.sense_threshold)?;
        binio::write_bitmap(w, &self.active)?;
        binio::write_f32_slice(w, &self.sense_stats.to_vec())?;
        binio::write_f32_slice(w, &self.sense_in.to_vec())?;
        for word in 0..self.vocab_size() {
            let path = &self.tree.paths[word];
            binio::write_u32(w, path.len() as u32)?;
            for &node in path {
                binio::write_u32(w, node)?;
            }
            binio::write_bitmap(w, &self.tree.codes[word])?;
        }
        binio::write_f32_slice(w, &self.node_out.to_vec())?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<AdaGramModel> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read(&mut r)
    }

    pub fn read<R: Read>(r: &mut R) -> Result<AdaGramModel> {
        binio::expect_magic(r, &MAGIC)?;
        let version = binio::read_u32(r)?;
        if version != VERSION {
            return Err(Error::ModelFormat(format!("unsupported ADGM version {version}")));
        }
        let v = binio::read_u32(r)? as usize;
        let d = binio::read_u32(r)? as usize;
        let k = binio::read_u32(r)? as usize;
        if v < 2 || d == 0 || k == 0 {
            return Err(Error::ModelFormat(format!("degenerate shape V={v} d={d} K={k}")));
        }
        let alpha = binio::read_f64(r)?;
        let sense_threshold = binio::read_f64(r)?;
        if !(alpha > 0.0) {
            return Err(Error::ModelFormat(format!("non-positive alpha {alpha}")));
        }
        let active = binio::read_bitmap(r, v * k)?;
        let sense_stats = binio::read_f32_vec(r, v * k)?;
        let sense_in = binio::read_f32_vec(r, v * k * d)?;
        let mut paths = Vec::with_capacity(v);
        let mut codes = Vec::with_capacity(v);
        for word in 0..v {
            let len = binio::read_u32(r)? as usize;
            if len == 0 || len >= v {
                return Err(Error::ModelFormat(format!("word {word} has code length {len}")));
            }
            let mut path = Vec::with_capacity(len);
            for _ in 0..len {
                let node = binio::read_u32(r)?;
                if node as usize >= v - 1 {
                    return Err(Error::ModelFormat(format!("tree node {node} out of range")));
                }
                path.push(node);
            }
            paths.push(path);
            codes.push(binio::read_bitmap(r, len)?);
        }
        let node_out = binio::read_f32_vec(r, (v - 1) * d)?;
        Ok(AdaGramModel {
            d,
            max_senses: k,
            alpha,
            sense_threshold,
            tree: HuffmanTree { codes, paths },
            sense_in: SharedMatrix::from_vec(sense_in, v * k, d),
            node_out: SharedMatrix::from_vec(node_out, v - 1, d),
            sense_stats: SharedMatrix::from_vec(sense_stats, v, k),
            active,
        })
    }
}

/// Expected stick proportions under a Beta(1, alpha) stick-breaking prior
/// with accumulated pseudo-counts: E[beta_k] = (1 + n_k) / (1 + n_k +
/// alpha + tail_k) where tail_k is the count mass after sense k, and
/// pi_k = E[beta_k] * prod_{r<k} (1 - E[beta_r]). Sums to at most 1; the
/// remainder is unbroken-stick mass reserved for senses past the
/// truncation. Every entry is strictly positive.
pub fn stick_expectations(counts: &[f64], alpha: f64) -> Vec<f64> {
    let mut out = vec![0.0; counts.len()];
    stick_into(counts, alpha, &mut out);
    out
}

fn stick_into(counts: &[f64], alpha: f64, out: &mut [f64]) {
    let mut tail: f64 = counts.iter().sum();
    let mut rest = 1.0;
    for (k, &n) in counts.iter().enumerate() {
        tail -= n;
        let beta = (1.0 + n) / (1.0 + n + alpha + tail);
        out[k] = rest * beta;
        rest *= 1.0 - beta;
    }
}

/// Renormalize raw stick weights over the senses passing `threshold`,
/// writing a proper distribution into `out`. If the threshold silences
/// every sense, the heaviest stick survives alone.
fn masked_prior_into(pi: &[f64], threshold: f64, out: &mut [f64]) {
    let mut total = 0.0;
    for (o, &p) in out.iter_mut().zip(pi) {
        *o = if p >= threshold { p } else { 0.0 };
        total += *o;
    }
    if total > 0.0 {
        for o in out.iter_mut() {
            *o /= total;
        }
    } else {
        let best = pi
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("stick weights are finite"))
            .map(|(s, _)| s)
            .unwrap_or(0);
        out.fill(0.0);
        out[best] = 1.0;
    }
}

/// Stick-breaking prior over the word's active senses, renormalized to
/// sum to exactly 1. Inactive senses get probability 0.
pub fn sense_prior(model: &AdaGramModel, word: u32) -> Vec<f64> {
    let k = model.max_senses;
    let pi = stick_expectations(&model.stats_vec(word), model.alpha);
    let base = word as usize * k;
    let mut out = vec![0.0; k];
    let mut total = 0.0;
    for s in 0..k {
        if model.active[base + s] {
            out[s] = pi[s];
            total += pi[s];
        }
    }
    debug_assert!(total > 0.0, "active mask never empties");
    for o in &mut out {
        *o /= total;
    }
    out
}

/// Log tree-softmax probability of `target` under the given sense row,
/// with f64 dot products. Factors are sigmoid(dot) on a false-bit branch
/// and sigmoid(-dot) on a true-bit branch.
fn log_path_likelihood(model: &AdaGramModel, v: &[AtomicF32], target: u32) -> f64 {
    let path = &model.tree.paths[target as usize];
    let code = &model.tree.codes[target as usize];
    let mut lp = 0.0;
    for (i, &node) in path.iter().enumerate() {
        let o = model.node_out.row(node as usize);
        let mut dot = 0.0f64;
        for (a, b) in v.iter().zip(o) {
            dot += a.get() as f64 * b.get() as f64;
        }
        let sign = if code[i] { -1.0 } else { 1.0 };
        lp += log_sigmoid(sign * dot);
    }
    lp
}

/// Probability of observing `context_word` near `word` under one sense:
/// the product of branch sigmoids along the context word's code path.
/// Sums to 1 over the vocabulary for any parameter values.
pub fn context_likelihood(
    model: &AdaGramModel,
    word: u32,
    sense: usize,
    context_word: u32,
) -> Result<f64> {
    if !model.is_active(word, sense) {
        return Err(Error::InactiveSense { word: word.to_string(), sense });
    }
    Ok(log_path_likelihood(model, model.sense_row(word, sense), context_word).exp())
}

/// Posterior over the word's active senses given a context window:
/// posterior(s) proportional to prior(s) * prod_c p(c | word, s), computed
/// in log space. An empty context returns the prior itself. Sums to 1;
/// inactive senses get exactly 0.
pub fn disambiguate(model: &AdaGramModel, word: u32, context: &[u32]) -> Vec<f64> {
    let prior = sense_prior(model, word);
    if context.is_empty() {
        return prior;
    }
    let mut logp = vec![f64::NEG_INFINITY; model.max_senses];
    for (s, &p) in prior.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        let v = model.sense_row(word, s);
        let mut lp = p.ln();
        for &c in context {
            lp += log_path_likelihood(model, v, c);
        }
        logp[s] = lp;
    }
    softmax_in_place(&mut logp);
    logp
}

/// Exponentiate-and-normalize in place; -inf entries become exact zeros.
fn softmax_in_place(logp: &mut [f64]) {
    let m = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in logp.iter_mut() {
        *x = if x.is_finite() { (*x - m).exp() } else { 0.0 };
        total += *x;
    }
    for x in logp.iter_mut() {
        *x /= total;
    }
}

/// Posterior-weighted tree-softmax loss of one center occurrence at the
/// current parameters, with the sense weights `z` held constant:
/// L = -sum_s z_s * sum_c log p(c | word, s). Evaluated in f64; companion
/// to [`occurrence_gradient`] and [`update_occurrence`] for gradient
/// checks.
pub fn occurrence_loss(model: &AdaGramModel, word: u32, context: &[u32], z: &[f64]) -> f64 {
    let mut loss = 0.0;
    for (s, &w) in z.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        let v = model.sense_row(word, s);
        let mut lp = 0.0;
        for &c in context {
            lp += log_path_likelihood(model, v, c);
        }
        loss -= w * lp;
    }
    loss
}

/// Analytic gradient of [`occurrence_loss`] with respect to the word's
/// sense vectors (one entry per sense) and every touched inner-node
/// vector, evaluated in f64 without modifying the model.
pub fn occurrence_gradient(
    model: &AdaGramModel,
    word: u32,
    context: &[u32],
    z: &[f64],
) -> (Vec<Vec<f64>>, BTreeMap<u32, Vec<f64>>) {
    let d = model.d;
    let mut sense_grads = vec![vec![0.0f64; d]; z.len()];
    let mut node_grads: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    for (s, &w) in z.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        let v: Vec<f64> = model.sense_row(word, s).iter().map(|a| a.get() as f64).collect();
        for &c in context {
            let path = &model.tree.paths[c as usize];
            let code = &model.tree.codes[c as usize];
            for (i, &node) in path.iter().enumerate() {
                let o = model.node_out.row(node as usize);
                let dot: f64 = v.iter().zip(o).map(|(a, b)| a * b.get() as f64).sum();
                let sign = if code[i] { -1.0 } else { 1.0 };
                // d(-log sigmoid(sign * dot))/d(dot) = sign * (sigmoid(sign * dot) - 1)
                let sig = 1.0 / (1.0 + (-(sign * dot)).exp());
                let g = w * sign * (sig - 1.0);
                let ng = node_grads.entry(node).or_insert_with(|| vec![0.0; d]);
                for j in 0..d {
                    sense_grads[s][j] += g * o[j].get() as f64;
                    ng[j] += g * v[j];
                }
            }
        }
    }
    (sense_grads, node_grads)
}

/// One posterior-weighted gradient step on the sense vectors of `word`
/// and the node vectors along the context words' paths, at learning rate
/// `lr`. Node updates happen in place as each (context, node) factor is
/// visited; each sense's own update is accumulated against its pre-step
/// snapshot, standard asynchronous skip-gram semantics.
pub fn update_occurrence(model: &AdaGramModel, word: u32, context: &[u32], z: &[f64], lr: f32) {
    let mut x = vec![0.0f32; model.d];
    let mut xgrad = vec![0.0f32; model.d];
    update_occurrence_with(model, word, context, z, lr, &mut x, &mut xgrad);
}

fn update_occurrence_with(
    model: &AdaGramModel,
    word: u32,
    context: &[u32],
    z: &[f64],
    lr: f32,
    x: &mut [f32],
    xgrad: &mut [f32],
) {
    let d = model.d;
    for (s, &zs) in z.iter().enumerate() {
        if zs < POSTERIOR_GATE {
            continue;
        }
        let v = model.sense_row(word, s);
        for j in 0..d {
            x[j] = v[j].get();
            xgrad[j] = 0.0;
        }
        let scale = zs as f32 * lr;
        for &c in context {
            let path = &model.tree.paths[c as usize];
            let code = &model.tree.codes[c as usize];
            for (i, &node) in path.iter().enumerate() {
                let o = model.node_out.row(node as usize);
                let mut dot = 0.0f32;
                for j in 0..d {
                    dot += x[j] * o[j].get();
                }
                let sign: f32 = if code[i] { -1.0 } else { 1.0 };
                let g = (sigmoid(sign * dot) - 1.0) * sign * scale;
                for j in 0..d {
                    let ov = o[j].get();
                    xgrad[j] += g * ov;
                    o[j].set(ov - g * x[j]);
                }
            }
        }
        for j in 0..d {
            v[j].set(v[j].get() - xgrad[j]);
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    /// Center occurrences that had at least one context word and were
    /// disambiguated and applied.
    pub centers: u64,
    /// Mean posterior-weighted loss over the first tenth of the schedule
    /// (zero unless `track_loss`).
    pub loss_head: f64,
    /// Mean over the last tenth.
    pub loss_tail: f64,
}

/// Train multi-sense embeddings on a tokenized, vocabulary-filtered
/// corpus. Only token sequences are read; region labels, coordinates and
/// tags never influence the result. Online EM per center occurrence:
/// the posterior over active senses (live stick prior times context
/// likelihoods) weights a gradient step and is added to the pseudo-counts.
pub fn train_adagram(
    docs: &[Document],
    vocab: &Vocabulary,
    config: &AdaGramTrainConfig,
) -> Result<(AdaGramModel, TrainSummary)> {
    let mut model = AdaGramModel::init(vocab.frequencies(), config)?;
    let encoded: Vec<Vec<u32>> =
        docs.iter().map(|doc| vocab.encode(doc)).filter(|ids| ids.len() >= 2).collect();
    let summary = run_training(&model, &encoded, config);
    model.refresh_active();
    Ok((model, summary))
}

fn run_training(model: &AdaGramModel, docs: &[Vec<u32>], config: &AdaGramTrainConfig) -> TrainSummary {
    let total_centers: u64 = docs.iter().map(|d| d.len() as u64).sum();
    let schedule_total = (total_centers * config.epochs as u64).max(1);
    let counter = AtomicU64::new(0);
    let workers = config.workers.max(1);
    let k = model.max_senses;

    let merged = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let counter = &counter;
                scope.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(
                        config.seed.wrapping_add((w as u64).wrapping_mul(0x9E3779B97F4A7C15)),
                    );
                    let mut context: Vec<u32> = Vec::with_capacity(2 * config.window);
                    let mut counts = vec![0.0f64; k];
                    let mut pi = vec![0.0f64; k];
                    let mut prior = vec![0.0f64; k];
                    let mut logp = vec![0.0f64; k];
                    let mut x = vec![0.0f32; model.d];
                    let mut xgrad = vec![0.0f32; model.d];
                    let mut centers = 0u64;
                    let mut head = (0.0f64, 0u64);
                    let mut tail = (0.0f64, 0u64);
                    for _ in 0..config.epochs {
                        for doc in docs.iter().skip(w).step_by(workers) {
                            let n = doc.len();
                            for (ci, &center) in doc.iter().enumerate() {
                                let done = counter.fetch_add(1, Ordering::Relaxed);
                                if done > 0 && done % 1_000_000 == 0 {
                                    log::info!("adagram: {done} of {schedule_total} centers");
                                }
                                let progress = done as f64 / schedule_total as f64;
                                let lr = (config.lr_initial as f64 * (1.0 - progress))
                                    .max(config.lr_floor as f64)
                                    as f32;
                                let b = rng.gen_range(1..=config.window);
                                let lo = ci.saturating_sub(b);
                                let hi = (ci + b).min(n - 1);
                                context.clear();
                                for cj in lo..=hi {
                                    if cj != ci {
                                        context.push(doc[cj]);
                                    }
                                }
                                if context.is_empty() {
                                    continue;
                                }

                                // E-step against the live pseudo-counts.
                                let stats = model.sense_stats.row(center as usize);
                                for s in 0..k {
                                    counts[s] = stats[s].get() as f64;
                                }
                                stick_into(&counts, model.alpha, &mut pi);
                                masked_prior_into(&pi, model.sense_threshold, &mut prior);
                                for s in 0..k {
                                    if prior[s] <= 0.0 {
                                        logp[s] = f64::NEG_INFINITY;
                                        continue;
                                    }
                                    let v = model.sense_row(center, s);
                                    let mut lp = prior[s].ln();
                                    for &c in &context {
                                        lp += log_path_likelihood(model, v, c);
                                    }
                                    logp[s] = lp;
                                }
                                softmax_in_place(&mut logp);

                                if config.track_loss {
                                    let bucket = done * 10 / schedule_total;
                                    if bucket == 0 || bucket == 9 {
                                        let loss = occurrence_loss(model, center, &context, &logp);
                                        if bucket == 0 {
                                            head.0 += loss;
                                            head.1 += 1;
                                        } else {
                                            tail.0 += loss;
                                            tail.1 += 1;
                                        }
                                    }
                                }

                                // M-step plus count accumulation.
                                update_occurrence_with(
                                    model, center, &context, &logp, lr, &mut x, &mut xgrad,
                                );
                                for s in 0..k {
                                    if logp[s] > 0.0 {
                                        stats[s].add(logp[s] as f32);
                                    }
                                }
                                centers += 1;
                            }
                        }
                    }
                    (centers, head, tail)
                })
            })
            .collect();
        let mut centers = 0u64;
        let mut head = (0.0f64, 0u64);
        let mut tail = (0.0f64, 0u64);
        for h in handles {
            let (c, hd, tl) = h.join().expect("training worker panicked");
            centers += c;
            head.0 += hd.0;
            head.1 += hd.1;
            tail.0 += tl.0;
            tail.1 += tl.1;
        }
        (centers, head, tail)
    });

    let (centers, head, tail) = merged;
    let mean = |(s, c): (f64, u64)| if c == 0 { 0.0 } else { s / c as f64 };
    TrainSummary { centers, loss_head: mean(head), loss_tail: mean(tail) }
}

/// Top-k active sense vectors of other words by cosine similarity to the
/// query sense, descending; similarity ties break toward the lower
/// (word id, sense id).
pub fn nearest_neighbors(
    model: &AdaGramModel,
    word: u32,
    sense: usize,
    k: usize,
) -> Result<Vec<(u32, usize, f64)>> {
    if !model.is_active(word, sense) {
        return Err(Error::InactiveSense { word: word.to_string(), sense });
    }
    let query = model.sense_vector(word, sense);
    let mut hits: Vec<(u32, usize, f64)> = Vec::new();
    for other in 0..model.vocab_size() as u32 {
        if other == word {
            continue;
        }
        for s in model.active_senses(other) {
            let sim = cosine_similarity(&query, &model.sense_vector(other, s));
            hits.push((other, s, sim));
        }
    }
    hits.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });
    hits.truncate(k);
    Ok(hits)
}
