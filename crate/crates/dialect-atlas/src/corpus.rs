//! Corpus ingestion: geo-tagged documents, tokenization, vocabulary
//! construction, and region resolution.
//!
//! The corpus file format is UTF-8 newline-delimited JSON, one document per
//! line, with keys `id`, `text`, `lat`, `lon`, `created_at`, `region`
//! (object mapping resolution name to region id), and optionally `pos`
//! (POS tags aligned with the tokenized text). Unknown keys are ignored.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const UNKNOWN_REGION: &str = "unknown";

/// One geo-tagged text record.
///
/// `tokens` is filled by tokenization when the document is loaded (it is
/// not part of the file format). After [`build_vocabulary`] runs, tokens
/// below the frequency threshold are removed from `tokens` and their POS
/// tags from `pos_tags`, keeping the two aligned.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lon: Option<f64>,
    #[serde(default, rename = "created_at", skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    #[serde(default, rename = "region", skip_serializing_if = "BTreeMap::is_empty")]
    pub region_labels: BTreeMap<String, String>,
    #[serde(default, rename = "pos", skip_serializing_if = "Option::is_none")]
    pub pos_tags: Option<Vec<String>>,
    #[serde(skip)]
    pub tokens: Vec<String>,
}

impl Document {
    /// Tokenize `text` and check the per-document invariants. Returns a
    /// message describing the first violation, if any.
    fn finish(&mut self) -> std::result::Result<(), String> {
        self.tokens = tokenize(&self.text);
        if let Some(lat) = self.lat {
            if !(-90.0..=90.0).contains(&lat) {
                return Err(format!("lat {lat} out of range [-90, 90]"));
            }
        }
        if let Some(lon) = self.lon {
            if !(-180.0..=180.0).contains(&lon) {
                return Err(format!("lon {lon} out of range [-180, 180]"));
            }
        }
        if !self.has_coords() && self.region_labels.is_empty() {
            return Err("document has neither coordinates nor region labels".into());
        }
        if let Some(pos) = &self.pos_tags {
            if pos.len() != self.tokens.len() {
                return Err(format!(
                    "pos has {} tags but text tokenizes to {} tokens",
                    pos.len(),
                    self.tokens.len()
                ));
            }
        }
        Ok(())
    }

    pub fn has_coords(&self) -> bool {
        self.lat.is_some() && self.lon.is_some()
    }
}

/// Lowercase, URL/emoji/mention-free word tokens.
///
/// Rules, applied per whitespace-separated piece:
/// 1. pieces starting with `@` (mentions) are dropped;
/// 2. leading `#` markers are stripped, the word kept;
/// 3. emoji and pictographic symbols are removed;
/// 4. leading and trailing non-alphanumeric characters are trimmed;
/// 5. pieces that are empty, URL-shaped, or contain no alphabetic
///    character are dropped.
///
/// The output is stable under retokenization: feeding a cleaned token
/// sequence back through produces the same sequence.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|piece| {
            let piece = piece.to_lowercase();
            if piece.starts_with('@') {
                return None;
            }
            let piece = piece.trim_start_matches('#');
            let cleaned: String = piece.chars().filter(|&c| !is_emoji(c)).collect();
            let token = cleaned.trim_matches(|c: char| !c.is_alphanumeric());
            if token.is_empty() || is_url_like(token) || !token.chars().any(|c| c.is_alphabetic())
            {
                None
            } else {
                Some(token.to_string())
            }
        })
        .collect()
}

fn is_url_like(token: &str) -> bool {
    token.starts_with("http://")
        || token.starts_with("https://")
        || token.starts_with("www.")
        || token.contains("://")
}

fn is_emoji(c: char) -> bool {
    matches!(u32::from(c),
        0x1F000..=0x1FAFF   // emoticons, pictographs, flags, supplemental symbols
        | 0x2600..=0x27BF   // misc symbols and dingbats
        | 0x2190..=0x21FF   // arrows
        | 0x2B00..=0x2BFF   // misc symbols and arrows
        | 0xFE00..=0xFE0F   // variation selectors
        | 0x200D            // zero-width joiner
        | 0x20E3            // combining keycap
    )
}

/// Frequency-filtered token inventory with a stable token <-> id bijection.
///
/// Ids are assigned by descending corpus frequency, ties broken by token
/// string, so vocabulary construction is deterministic.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    token_to_id: HashMap<String, u32>,
    id_to_token: Vec<String>,
    frequency: Vec<u64>,
    pub min_freq: u64,
    /// Token count of the raw stream, before frequency filtering.
    pub total_tokens: u64,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.token_to_id.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.id_to_token[id as usize]
    }

    pub fn frequency(&self, id: u32) -> u64 {
        self.frequency[id as usize]
    }

    pub fn frequencies(&self) -> &[u64] {
        &self.frequency
    }

    /// Look an id up by token string, erroring for out-of-vocabulary input.
    pub fn require(&self, token: &str) -> Result<u32> {
        self.id(token)
            .ok_or_else(|| Error::WordNotInVocab(token.to_string()))
    }

    /// Encode a document's tokens as ids. All tokens are in-vocabulary once
    /// `build_vocabulary` has dropped OOV tokens.
    pub fn encode(&self, doc: &Document) -> Vec<u32> {
        doc.tokens.iter().filter_map(|t| self.id(t)).collect()
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "# min_freq={} total_tokens={}", self.min_freq, self.total_tokens)?;
        for (id, token) in self.id_to_token.iter().enumerate() {
            writeln!(w, "{}\t{}", token, self.frequency[id])?;
        }
        Ok(())
    }
}

/// Count token frequencies across `documents`, retain tokens occurring at
/// least `min_freq` times, and drop the rest from every document's token
/// (and aligned POS) sequence.
pub fn build_vocabulary(documents: &mut [Document], min_freq: u64) -> Result<Vocabulary> {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    let mut total_tokens = 0u64;
    for doc in documents.iter() {
        for tok in &doc.tokens {
            *counts.entry(tok).or_insert(0) += 1;
            total_tokens += 1;
        }
    }

    let mut retained: Vec<(String, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_freq)
        .map(|(t, c)| (t.to_string(), c))
        .collect();
    if retained.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    retained.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let mut token_to_id = HashMap::with_capacity(retained.len());
    let mut id_to_token = Vec::with_capacity(retained.len());
    let mut frequency = Vec::with_capacity(retained.len());
    for (id, (token, count)) in retained.into_iter().enumerate() {
        token_to_id.insert(token.clone(), id as u32);
        id_to_token.push(token);
        frequency.push(count);
    }

    for doc in documents.iter_mut() {
        let keep: Vec<bool> = doc.tokens.iter().map(|t| token_to_id.contains_key(t)).collect();
        if keep.iter().all(|&k| k) {
            continue;
        }
        let mut i = 0;
        doc.tokens.retain(|_| {
            i += 1;
            keep[i - 1]
        });
        if let Some(pos) = &mut doc.pos_tags {
            let mut j = 0;
            pos.retain(|_| {
                j += 1;
                keep[j - 1]
            });
        }
    }

    Ok(Vocabulary {
        token_to_id,
        id_to_token,
        frequency,
        min_freq,
        total_tokens,
    })
}

/// Geographic partition at one resolution. Regions are bounding boxes or
/// polygons in lon/lat; they need not tile the globe. Points matching no
/// region fall into [`UNKNOWN_REGION`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionMap {
    pub resolution: String,
    pub regions: Vec<RegionDef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionDef {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygon: Option<Vec<[f64; 2]>>,
}

impl RegionDef {
    fn contains(&self, lon: f64, lat: f64) -> bool {
        if let Some([lon_min, lat_min, lon_max, lat_max]) = self.bbox {
            return lon >= lon_min && lon <= lon_max && lat >= lat_min && lat <= lat_max;
        }
        if let Some(poly) = &self.polygon {
            return point_in_polygon(lon, lat, poly);
        }
        false
    }
}

impl RegionMap {
    pub fn load<P: AsRef<Path>>(path: P) -> Result<RegionMap> {
        let map: RegionMap = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.regions {
            if !seen.insert(&r.id) {
                return Err(Error::invalid(format!(
                    "region map: duplicate region id {:?} in resolution {:?}",
                    r.id, self.resolution
                )));
            }
            if r.bbox.is_none() && r.polygon.is_none() {
                return Err(Error::invalid(format!(
                    "region map: region {:?} has neither bbox nor polygon",
                    r.id
                )));
            }
        }
        Ok(())
    }

    pub fn region_ids(&self) -> Vec<String> {
        self.regions.iter().map(|r| r.id.clone()).collect()
    }

    pub fn has_geometry(&self) -> bool {
        self.regions
            .iter()
            .any(|r| r.bbox.is_some() || r.polygon.is_some())
    }

    /// First region whose geometry contains the point, in map order.
    pub fn locate(&self, lon: f64, lat: f64) -> Option<&str> {
        self.regions
            .iter()
            .find(|r| r.contains(lon, lat))
            .map(|r| r.id.as_str())
    }
}

/// Even-odd ray casting.
fn point_in_polygon(lon: f64, lat: f64, poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let [xi, yi] = poly[i];
        let [xj, yj] = poly[j];
        if (yi > lat) != (yj > lat) && lon < (xj - xi) * (lat - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

/// Resolve a document to a region id at the given resolution.
///
/// An explicit label for the resolution always wins and coordinates are
/// never consulted. Otherwise the first region containing the point is
/// used, falling back to [`UNKNOWN_REGION`]. It is an error for the
/// resolution to be absent from both the labels and the map.
pub fn assign_region(doc: &Document, resolution: &str, map: Option<&RegionMap>) -> Result<String> {
    if let Some(label) = doc.region_labels.get(resolution) {
        return Ok(label.clone());
    }
    let map = match map {
        Some(m) if m.resolution == resolution => m,
        _ => return Err(Error::UnknownResolution(resolution.to_string())),
    };
    if let (Some(lat), Some(lon)) = (doc.lat, doc.lon) {
        if let Some(id) = map.locate(lon, lat) {
            return Ok(id.to_string());
        }
    }
    Ok(UNKNOWN_REGION.to_string())
}

/// Per-region document/token/term counts plus totals.
///
/// Document and token totals are the sum over regions (including
/// "unknown"); the total term count is the number of distinct tokens in
/// the whole corpus, which is less than the per-region sum whenever
/// regions share vocabulary.
#[derive(Debug, Clone, Serialize)]
pub struct CorpusStats {
    pub resolution: String,
    pub per_region: BTreeMap<String, RegionStats>,
    pub total: RegionStats,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RegionStats {
    pub documents: u64,
    pub tokens: u64,
    pub terms: u64,
}

/// Count documents, tokens, and distinct terms per region on the tokenized
/// (unfiltered) stream.
pub fn corpus_stats(
    documents: &[Document],
    resolution: &str,
    map: Option<&RegionMap>,
) -> Result<CorpusStats> {
    let mut per_region: BTreeMap<String, RegionStats> = BTreeMap::new();
    let mut terms_by_region: HashMap<String, HashSet<&str>> = HashMap::new();
    let mut all_terms: HashSet<&str> = HashSet::new();
    let mut total = RegionStats::default();

    for doc in documents {
        let region = assign_region(doc, resolution, map)?;
        let entry = per_region.entry(region.clone()).or_default();
        entry.documents += 1;
        entry.tokens += doc.tokens.len() as u64;
        total.documents += 1;
        total.tokens += doc.tokens.len() as u64;
        let term_set = terms_by_region.entry(region).or_default();
        for tok in &doc.tokens {
            term_set.insert(tok);
            all_terms.insert(tok);
        }
    }

    for (region, stats) in per_region.iter_mut() {
        stats.terms = terms_by_region.get(region).map_or(0, |s| s.len() as u64);
    }
    total.terms = all_terms.len() as u64;

    Ok(CorpusStats {
        resolution: resolution.to_string(),
        per_region,
        total,
    })
}

/// Parse, tokenize, and validate newline-delimited JSON documents.
pub fn read_documents<R: Read>(reader: R) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut doc: Document = serde_json::from_str(&line).map_err(|e| Error::Corpus {
            line: i + 1,
            msg: e.to_string(),
        })?;
        doc.finish().map_err(|msg| Error::Corpus {
            line: i + 1,
            msg: format!("document {:?}: {msg}", doc.id),
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn load_corpus<P: AsRef<Path>>(path: P) -> Result<Vec<Document>> {
    read_documents(File::open(path)?)
}

/// Write documents in the newline-delimited JSON corpus format.
pub fn write_corpus<W: Write>(w: &mut W, documents: &[Document]) -> Result<()> {
    for doc in documents {
        serde_json::to_writer(&mut *w, doc)?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn save_corpus<P: AsRef<Path>>(path: P, documents: &[Document]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_corpus(&mut w, documents)
}
