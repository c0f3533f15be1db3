//! Count-based change scores: relative-frequency shift and POS-distribution
//! divergence between two regions.

use std::collections::{BTreeMap, HashMap};

use crate::corpus::{assign_region, Document, RegionMap};
use crate::{Error, Result};

/// Per-region token counts for one resolution: occurrences of each word,
/// each (word, POS) pair, and the region's token total.
#[derive(Debug, Clone, Default)]
pub struct UsageTable {
    word_counts: HashMap<String, HashMap<String, u64>>,
    pos_counts: HashMap<String, HashMap<(String, String), u64>>,
    region_tokens: HashMap<String, u64>,
    tagged: bool,
}

impl UsageTable {
    pub fn build(
        documents: &[Document],
        resolution: &str,
        map: Option<&RegionMap>,
    ) -> Result<UsageTable> {
        let mut table = UsageTable::default();
        table.tagged = true;
        for doc in documents {
            let region = assign_region(doc, resolution, map)?;
            let region_total = table.region_tokens.entry(region.clone()).or_insert(0);
            *region_total += doc.tokens.len() as u64;
            let words = table.word_counts.entry(region.clone()).or_default();
            for tok in &doc.tokens {
                *words.entry(tok.clone()).or_insert(0) += 1;
            }
            match &doc.pos_tags {
                Some(tags) => {
                    let pairs = table.pos_counts.entry(region).or_default();
                    for (tok, tag) in doc.tokens.iter().zip(tags) {
                        *pairs.entry((tok.clone(), tag.clone())).or_insert(0) += 1;
                    }
                }
                None => table.tagged = false,
            }
        }
        Ok(table)
    }

    pub fn word_count(&self, region: &str, word: &str) -> u64 {
        self.word_counts
            .get(region)
            .and_then(|m| m.get(word))
            .copied()
            .unwrap_or(0)
    }

    pub fn region_total(&self, region: &str) -> u64 {
        self.region_tokens.get(region).copied().unwrap_or(0)
    }

    /// Sorted distinct words observed in any of the given regions.
    pub fn words(&self, regions: &[&str]) -> Vec<String> {
        let mut words: Vec<String> = regions
            .iter()
            .filter_map(|r| self.word_counts.get(*r))
            .flat_map(|m| m.keys().cloned())
            .collect();
        words.sort_unstable();
        words.dedup();
        words
    }

    /// Every document carried POS tags.
    pub fn is_tagged(&self) -> bool {
        self.tagged
    }

    /// POS tag distribution of `word` in `region`, as (tag, count) sorted
    /// by tag.
    fn tag_counts(&self, region: &str, word: &str) -> BTreeMap<&str, u64> {
        let mut out = BTreeMap::new();
        if let Some(pairs) = self.pos_counts.get(region) {
            for ((w, tag), &c) in pairs {
                if w == word {
                    out.insert(tag.as_str(), c);
                }
            }
        }
        out
    }
}

/// Absolute log-ratio of add-one-smoothed relative frequencies:
///
/// |ln((c1+1)/N1) - ln((c2+1)/N2)|
///
/// where c_i is the word's count in region i and N_i the region's token
/// total. Smoothing keeps the score finite for words absent from one
/// region; a word absent from both scores |ln(N2/N1)|.
pub fn frequency_score(table: &UsageTable, word: &str, region1: &str, region2: &str) -> Result<f64> {
    let n1 = table.region_total(region1);
    let n2 = table.region_total(region2);
    if n1 == 0 || n2 == 0 {
        return Err(Error::UnknownRegion(if n1 == 0 {
            region1.to_string()
        } else {
            region2.to_string()
        }));
    }
    let c1 = table.word_count(region1, word);
    let c2 = table.word_count(region2, word);
    let r1 = (c1 + 1) as f64 / n1 as f64;
    let r2 = (c2 + 1) as f64 / n2 as f64;
    Ok((r1.ln() - r2.ln()).abs())
}

/// Jensen-Shannon divergence (base 2) between the word's POS tag
/// distributions in the two regions. Ranges over [0, 1]; 0 for identical
/// distributions, 1 for disjoint tag support.
pub fn syntactic_score(table: &UsageTable, word: &str, region1: &str, region2: &str) -> Result<f64> {
    if !table.is_tagged() {
        return Err(Error::MissingPosTags);
    }
    if table.region_total(region1) == 0 {
        return Err(Error::UnknownRegion(region1.to_string()));
    }
    if table.region_total(region2) == 0 {
        return Err(Error::UnknownRegion(region2.to_string()));
    }
    let c1 = table.tag_counts(region1, word);
    let c2 = table.tag_counts(region2, word);
    if c1.is_empty() || c2.is_empty() {
        return Err(Error::WordNotInVocab(word.to_string()));
    }
    let t1: u64 = c1.values().sum();
    let t2: u64 = c2.values().sum();

    let mut tags: Vec<&str> = c1.keys().chain(c2.keys()).copied().collect();
    tags.sort_unstable();
    tags.dedup();

    let mut jsd = 0.0f64;
    for tag in tags {
        let p = c1.get(tag).map_or(0.0, |&c| c as f64 / t1 as f64);
        let q = c2.get(tag).map_or(0.0, |&c| c as f64 / t2 as f64);
        let m = 0.5 * (p + q);
        if p > 0.0 {
            jsd += 0.5 * p * (p / m).log2();
        }
        if q > 0.0 {
            jsd += 0.5 * q * (q / m).log2();
        }
    }
    // Guard against tiny negative drift from floating-point rounding.
    Ok(jsd.clamp(0.0, 1.0))
}
