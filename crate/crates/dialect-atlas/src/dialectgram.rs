//! Post-hoc regional composition of multi-sense embeddings.
//!
//! A trained multi-sense model is region-blind; regional meaning lives in
//! how often each sense is used where. This module builds an inverted
//! occurrence index at a chosen resolution, disambiguates every occurrence
//! of a word inside a region, and composes the region-specific embedding
//! as the usage-weighted average of the word's sense vectors. Changing
//! resolution changes only the index; the model is never retrained or
//! modified.

use std::collections::BTreeMap;
use std::io::Write;

use crate::adagram::{disambiguate, sense_prior, AdaGramModel};
use crate::corpus::{assign_region, Document, RegionMap, Vocabulary, UNKNOWN_REGION};
use crate::metric::Metric;
use crate::{Error, Result};

/// Inverted occurrence index: region id to word id to (document, token
/// position) pairs, over a private encoded copy of the corpus so that
/// composition can read occurrence contexts later. Documents that cannot
/// be resolved at the requested resolution land in the "unknown" bucket.
pub struct RegionIndex {
    pub resolution: String,
    docs: Vec<Vec<u32>>,
    occ: BTreeMap<String, BTreeMap<u32, Vec<(u32, u32)>>>,
}

impl RegionIndex {
    pub fn regions(&self) -> Vec<&str> {
        self.occ.keys().map(|r| r.as_str()).collect()
    }

    pub fn occurrences(&self, word: u32, region: &str) -> &[(u32, u32)] {
        self.occ
            .get(region)
            .and_then(|words| words.get(&word))
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    /// Documents indexed under a region (a document counts once however
    /// many words it contains).
    pub fn region_docs(&self, region: &str) -> usize {
        let mut docs: Vec<u32> = self
            .occ
            .get(region)
            .map(|words| words.values().flatten().map(|&(d, _)| d).collect())
            .unwrap_or_default();
        docs.sort_unstable();
        docs.dedup();
        docs.len()
    }
}

/// Index a tokenized corpus by region at one resolution. Explicit labels
/// win over coordinates (see [`assign_region`]); documents carrying
/// neither information for this resolution are kept under "unknown".
pub fn build_region_index(
    docs: &[Document],
    vocab: &Vocabulary,
    resolution: &str,
    map: Option<&RegionMap>,
) -> RegionIndex {
    let mut occ: BTreeMap<String, BTreeMap<u32, Vec<(u32, u32)>>> = BTreeMap::new();
    let mut encoded = Vec::with_capacity(docs.len());
    for (di, doc) in docs.iter().enumerate() {
        let ids = vocab.encode(doc);
        let region = assign_region(doc, resolution, map)
            .unwrap_or_else(|_| UNKNOWN_REGION.to_string());
        let words = occ.entry(region).or_default();
        for (pos, &id) in ids.iter().enumerate() {
            words.entry(id).or_default().push((di as u32, pos as u32));
        }
        encoded.push(ids);
    }
    RegionIndex { resolution: resolution.to_string(), docs: encoded, occ }
}

/// How a word's senses are used inside one region.
#[derive(Debug, Clone, PartialEq)]
pub struct SenseUsage {
    pub word: u32,
    pub region: String,
    /// Per-sense occurrence mass. Hard assignment adds 1 to the argmax
    /// sense per occurrence (ties to the lowest sense id); soft assignment
    /// adds the full posterior. Sums to `n` either way.
    pub counts: Vec<f64>,
    /// The word's sense prior at composition time.
    pub priors: Vec<f64>,
    /// Occurrences of the word in the region.
    pub n: u64,
}

/// Compose the region-specific embedding of `word`: disambiguate every
/// occurrence in the region against its full document context, then
/// average the sense vectors weighted by usage share. A region with no
/// occurrences (or absent from the index entirely) falls back to
/// prior weights and reports n = 0.
pub fn compose_region_embedding(
    model: &AdaGramModel,
    index: &RegionIndex,
    word: u32,
    region: &str,
    soft: bool,
) -> Result<(Vec<f32>, SenseUsage)> {
    if word as usize >= model.vocab_size() {
        return Err(Error::WordNotInVocab(format!("id {word}")));
    }
    let k = model.max_senses;
    let occs = index.occurrences(word, region);
    let mut counts = vec![0.0f64; k];
    let mut context: Vec<u32> = Vec::new();
    for &(di, pos) in occs {
        let doc = &index.docs[di as usize];
        context.clear();
        for (j, &t) in doc.iter().enumerate() {
            if j != pos as usize {
                context.push(t);
            }
        }
        let z = disambiguate(model, word, &context);
        if soft {
            for s in 0..k {
                counts[s] += z[s];
            }
        } else {
            let mut best = 0;
            let mut best_z = f64::NEG_INFINITY;
            for (s, &zs) in z.iter().enumerate() {
                if zs > best_z {
                    best_z = zs;
                    best = s;
                }
            }
            counts[best] += 1.0;
        }
    }
    let n = occs.len() as u64;
    let priors = sense_prior(model, word);
    let weights: Vec<f64> =
        if n > 0 { counts.iter().map(|c| c / n as f64).collect() } else { priors.clone() };
    let mut acc = vec![0.0f64; model.d];
    for (s, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let v = model.sense_vector(word, s);
        for (a, &vj) in acc.iter_mut().zip(&v) {
            *a += w * vj as f64;
        }
    }
    let embedding: Vec<f32> = acc.into_iter().map(|x| x as f32).collect();
    let usage = SenseUsage { word, region: region.to_string(), counts, priors, n };
    Ok((embedding, usage))
}

/// Hard-assignment usage shares of each sense in a region, or None when
/// fewer than `min_docs` occurrences support them (the choropleth's
/// "insufficient data" grey). A region with zero occurrences is always
/// insufficient.
pub fn sense_proportions(
    model: &AdaGramModel,
    index: &RegionIndex,
    word: u32,
    region: &str,
    min_docs: u64,
) -> Result<Option<Vec<f64>>> {
    let (_, usage) = compose_region_embedding(model, index, word, region, false)?;
    if usage.n == 0 || usage.n < min_docs {
        return Ok(None);
    }
    Ok(Some(usage.counts.iter().map(|c| c / usage.n as f64).collect()))
}

/// Distance between a word's composed embeddings in two regions.
pub fn dialectgram_score(
    model: &AdaGramModel,
    index: &RegionIndex,
    word: u32,
    r1: &str,
    r2: &str,
    metric: Metric,
) -> Result<f64> {
    let (e1, _) = compose_region_embedding(model, index, word, r1, false)?;
    let (e2, _) = compose_region_embedding(model, index, word, r2, false)?;
    Ok(metric.distance(&e1, &e2))
}

/// One choropleth record: a region's usage share of one sense.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoroplethRow {
    pub region_id: String,
    pub sense: usize,
    /// None renders as an empty CSV field / JSON null (insufficient data).
    pub proportion: Option<f64>,
    pub n_docs: u64,
}

/// Usage share of `sense` in every region of the map, in map order.
/// Regions under `min_docs` occurrences (including empty ones) carry an
/// absent proportion.
pub fn choropleth_rows(
    model: &AdaGramModel,
    index: &RegionIndex,
    map: &RegionMap,
    word: u32,
    sense: usize,
    min_docs: u64,
) -> Result<Vec<ChoroplethRow>> {
    if !model.is_active(word, sense) {
        return Err(Error::InactiveSense { word: word.to_string(), sense });
    }
    let mut rows = Vec::with_capacity(map.regions.len());
    for region in map.region_ids() {
        let (_, usage) = compose_region_embedding(model, index, word, &region, false)?;
        let proportion = if usage.n == 0 || usage.n < min_docs {
            None
        } else {
            Some(usage.counts[sense] / usage.n as f64)
        };
        rows.push(ChoroplethRow { region_id: region, sense, proportion, n_docs: usage.n });
    }
    Ok(rows)
}

pub fn write_choropleth_csv<W: Write>(w: W, rows: &[ChoroplethRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["region_id", "sense", "proportion", "n_docs"])
        .map_err(|e| Error::invalid(format!("csv: {e}")))?;
    for row in rows {
        let prop = row.proportion.map(|p| p.to_string()).unwrap_or_default();
        out.write_record([
            row.region_id.as_str(),
            &row.sense.to_string(),
            &prop,
            &row.n_docs.to_string(),
        ])
        .map_err(|e| Error::invalid(format!("csv: {e}")))?;
    }
    out.flush()?;
    Ok(())
}

/// GeoJSON FeatureCollection mirroring the CSV rows as feature properties;
/// bbox regions become rectangle polygons. Regions without geometry are
/// skipped.
pub fn write_choropleth_geojson<W: Write>(
    mut w: W,
    map: &RegionMap,
    rows: &[ChoroplethRow],
) -> Result<()> {
    let mut features = Vec::new();
    for row in rows {
        let def = match map.regions.iter().find(|r| r.id == row.region_id) {
            Some(d) => d,
            None => continue,
        };
        let ring: Vec<[f64; 2]> = if let Some([lon_min, lat_min, lon_max, lat_max]) = def.bbox {
            vec![
                [lon_min, lat_min],
                [lon_max, lat_min],
                [lon_max, lat_max],
                [lon_min, lat_max],
                [lon_min, lat_min],
            ]
        } else if let Some(poly) = &def.polygon {
            let mut ring = poly.clone();
            if ring.first() != ring.last() {
                if let Some(&first) = ring.first() {
                    ring.push(first);
                }
            }
            ring
        } else {
            continue;
        };
        features.push(serde_json::json!({
            "type": "Feature",
            "geometry": { "type": "Polygon", "coordinates": [ring] },
            "properties": {
                "region_id": row.region_id,
                "sense": row.sense,
                "proportion": row.proportion,
                "n_docs": row.n_docs,
            },
        }));
    }
    let collection = serde_json::json!({ "type": "FeatureCollection", "features": features });
    serde_json::to_writer_pretty(&mut w, &collection)?;
    writeln!(w)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabulary, tokenize, RegionDef};
    use crate::huffman::build_huffman;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::collections::BTreeMap as Map;

    fn doc(id: &str, text: &str, labels: &[(&str, &str)]) -> Document {
        Document {
            id: id.to_string(),
            text: text.to_string(),
            lat: None,
            lon: None,
            timestamp: None,
            region_labels: labels
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
            pos_tags: None,
            tokens: tokenize(text),
        }
    }

    /// Corpus of "w cXXX" two-token documents plus a 2-sense model rigged
    /// so that context c000 decisively selects sense 0 of "w" and c001
    /// sense 1: each inner node vector carries +-1 in a per-sense lane
    /// matching its branch direction on that context word's path, and the
    /// sense vectors are large multiples of the lane axes.
    fn forced_setup(
        region_docs: &[(&str, &[&str])],
    ) -> (Vec<Document>, Vocabulary, AdaGramModel) {
        let mut docs = Vec::new();
        let mut no = 0;
        for (region, texts) in region_docs {
            for text in *texts {
                docs.push(doc(&format!("d{no}"), text, &[("country", region)]));
                no += 1;
            }
        }
        // keeps both context words in the vocabulary whatever the mix;
        // carries no occurrence of "w" so per-region counts are untouched
        docs.push(doc("pad", "c000 c001", &[("country", "PAD")]));
        let mut docs_mut = docs.clone();
        let vocab = build_vocabulary(&mut docs_mut, 1).unwrap();
        let tree = build_huffman(vocab.frequencies()).unwrap();
        let v = vocab.len();
        let d = 2;
        let k = 2;
        let w = vocab.id("w").unwrap();
        let c0 = vocab.id("c000").unwrap();
        let c1 = vocab.id("c001").unwrap();

        let mut node_out = vec![0.0f32; (v - 1) * d];
        for (lane, word) in [(0usize, c0), (1usize, c1)] {
            let path = &tree.paths[word as usize];
            let code = &tree.codes[word as usize];
            for (i, &node) in path.iter().enumerate() {
                let sign = if code[i] { -1.0f32 } else { 1.0 };
                node_out[node as usize * d + lane] = sign;
            }
        }
        let mut sense_in = vec![0.0f32; v * k * d];
        sense_in[w as usize * k * d] = 8.0; // sense 0 along lane 0
        sense_in[w as usize * k * d + d + 1] = 8.0; // sense 1 along lane 1
        let mut stats = vec![0.0f32; v * k];
        stats[w as usize * k] = 1.0;
        stats[w as usize * k + 1] = 1.0;
        let model =
            AdaGramModel::from_parts(tree, d, k, 0.1, 1e-17, sense_in, node_out, stats).unwrap();
        (docs_mut, vocab, model)
    }

    #[test]
    fn index_lists_every_occurrence_position() {
        let docs = vec![doc("a", "w alpha w beta", &[("country", "X")])];
        let mut docs = docs;
        let vocab = build_vocabulary(&mut docs, 1).unwrap();
        let index = build_region_index(&docs, &vocab, "country", None);
        let w = vocab.id("w").unwrap();
        assert_eq!(index.occurrences(w, "X"), &[(0, 0), (0, 2)]);
        assert_eq!(index.regions(), vec!["X"]);
        assert_eq!(index.region_docs("X"), 1);
    }

    #[test]
    fn empty_corpus_yields_an_empty_index() {
        let mut docs = vec![doc("a", "w alpha", &[("country", "X")])];
        let vocab = build_vocabulary(&mut docs, 1).unwrap();
        let index = build_region_index(&[], &vocab, "country", None);
        assert!(index.regions().is_empty());
        assert_eq!(index.occurrences(0, "X"), &[]);
    }

    #[test]
    fn docs_without_the_resolution_fall_into_the_unknown_bucket() {
        let mut docs = vec![
            doc("a", "w alpha", &[("country", "X")]),
            doc("b", "w alpha", &[("city", "NYC")]),
        ];
        let vocab = build_vocabulary(&mut docs, 1).unwrap();
        let index = build_region_index(&docs, &vocab, "city", None);
        assert_eq!(index.regions(), vec!["NYC", UNKNOWN_REGION]);
        let w = vocab.id("w").unwrap();
        assert_eq!(index.occurrences(w, UNKNOWN_REGION).len(), 1);
    }

    #[test]
    fn coordinates_resolve_through_the_region_map() {
        let mut d = doc("a", "w alpha", &[]);
        d.region_labels.clear();
        d.lat = Some(40.0);
        d.lon = Some(-74.0);
        let mut docs = vec![d];
        let vocab = build_vocabulary(&mut docs, 1).unwrap();
        let map = RegionMap {
            resolution: "country".to_string(),
            regions: vec![RegionDef {
                id: "US".to_string(),
                bbox: Some([-130.0, 20.0, -60.0, 50.0]),
                polygon: None,
            }],
        };
        let index = build_region_index(&docs, &vocab, "country", Some(&map));
        let w = vocab.id("w").unwrap();
        assert_eq!(index.occurrences(w, "US").len(), 1);
    }

    #[test]
    fn pure_usage_composes_to_the_exact_sense_vector() {
        let (docs, vocab, model) =
            forced_setup(&[("X", &["w c000", "w c000", "w c000"] as &[&str])]);
        let index = build_region_index(&docs, &vocab, "country", None);
        let w = vocab.id("w").unwrap();
        let (e, usage) = compose_region_embedding(&model, &index, w, "X", false).unwrap();
        assert_eq!(usage.counts, vec![3.0, 0.0]);
        assert_eq!(usage.n, 3);
        assert_eq!(e, model.sense_vector(w, 0));
    }

    #[test]
    fn mixed_usage_composes_to_the_count_weighted_average() {
        let (docs, vocab, model) = forced_setup(&[(
            "X",
            &["w c000", "w c000", "w c000", "w c001"] as &[&str],
        )]);
        let index = build_region_index(&docs, &vocab, "country", None);
        let w = vocab.id("w").unwrap();
        let (e, usage) = compose_region_embedding(&model, &index, w, "X", false).unwrap();
        assert_eq!(usage.counts, vec![3.0, 1.0]);
        let v0 = model.sense_vector(w, 0);
        let v1 = model.sense_vector(w, 1);
        for j in 0..model.d {
            let expected = 0.75 * v0[j] as f64 + 0.25 * v1[j] as f64;
            assert_relative_eq!(e[j] as f64, expected, max_relative = 1e-6);
        }

        // soft assignment lands close to the hard counts here (the rigged
        // posteriors are near 0/1) and still sums to n
        let (_, soft) = compose_region_embedding(&model, &index, w, "X", true).unwrap();
        assert_abs_diff_eq!(soft.counts.iter().sum::<f64>(), usage.n as f64, epsilon = 1e-9);
        assert_abs_diff_eq!(soft.counts[0], 3.0, epsilon = 1e-2);
    }

    #[test]
    fn zero_occurrences_fall_back_to_prior_weights() {
        let (docs, vocab, model) = forced_setup(&[("X", &["w c000"] as &[&str])]);
        let index = build_region_index(&docs, &vocab, "country", None);
        let w = vocab.id("w").unwrap();
        let (e, usage) = compose_region_embedding(&model, &index, w, "nowhere", false).unwrap();
        assert_eq!(usage.n, 0);
        assert!(usage.counts.iter().all(|&c| c == 0.0));
        let prior = sense_prior(&model, w);
        assert_eq!(usage.priors, prior);
        let v0 = model.sense_vector(w, 0);
        let v1 = model.sense_vector(w, 1);
        for j in 0..model.d {
            let expected = prior[0] * v0[j] as f64 + prior[1] * v1[j] as f64;
            assert_relative_eq!(e[j] as f64, expected, max_relative = 1e-6);
        }
    }

    #[test]
    fn out_of_vocabulary_word_is_an_error() {
        let (docs, vocab, model) = forced_setup(&[("X", &["w c000"] as &[&str])]);
        let index = build_region_index(&docs, &vocab, "country", None);
        assert!(matches!(
            compose_region_embedding(&model, &index, 999, "X", false),
            Err(Error::WordNotInVocab(_))
        ));
    }

    #[test]
    fn merged_region_counts_add_exactly() {
        let subs: &[(&str, &[&str])] = &[
            ("r1", &["w c000", "w c000"]),
            ("r2", &["w c001"]),
            ("r3", &["w c000", "w c001"]),
            ("r4", &["w c001", "w c001"]),
        ];
        let (docs, vocab, model) = forced_setup(subs);
        let index = build_region_index(&docs, &vocab, "country", None);
        let w = vocab.id("w").unwrap();
        let usage_of = |idx: &RegionIndex, region: &str| {
            compose_region_embedding(&model, idx, w, region, false).unwrap().1
        };
        let fine: Map<&str, SenseUsage> =
            ["r1", "r2", "r3", "r4"].iter().map(|r| (*r, usage_of(&index, r))).collect();

        let mut merged_docs = docs.clone();
        for d in &mut merged_docs {
            let sub = d.region_labels["country"].clone();
            let parent = if sub == "r1" || sub == "r2" { "P" } else { "Q" };
            d.region_labels.insert("country".to_string(), parent.to_string());
        }
        let merged_index = build_region_index(&merged_docs, &vocab, "country", None);
        let p = usage_of(&merged_index, "P");
        let q = usage_of(&merged_index, "Q");
        for s in 0..model.max_senses {
            assert_eq!(p.counts[s], fine["r1"].counts[s] + fine["r2"].counts[s]);
            assert_eq!(q.counts[s], fine["r3"].counts[s] + fine["r4"].counts[s]);
        }
        assert_eq!(p.n, fine["r1"].n + fine["r2"].n);
        assert_eq!(q.n, fine["r3"].n + fine["r4"].n);
    }

    #[test]
    fn reindexing_at_another_resolution_leaves_the_model_untouched() {
        let mut docs = vec![
            doc("a", "w c000 w c001", &[("country", "X"), ("city", "X1")]),
            doc("b", "w c000", &[("country", "X"), ("city", "X2")]),
        ];
        let vocab = build_vocabulary(&mut docs, 1).unwrap();
        let (docs2, _, model) = forced_setup(&[("X", &["w c000"] as &[&str])]);
        let _ = docs2;
        let bytes = |m: &AdaGramModel| {
            let mut b = Vec::new();
            m.write(&mut b).unwrap();
            b
        };
        let before = bytes(&model);
        let w = 0;
        for resolution in ["country", "city"] {
            let index = build_region_index(&docs, &vocab, resolution, None);
            for region in index.regions() {
                let _ = compose_region_embedding(&model, &index, w, region, false).unwrap();
            }
        }
        assert_eq!(before, bytes(&model));
    }

    #[test]
    fn composition_stays_inside_the_sense_hull() {
        let mixes: &[(&str, &[&str])] = &[
            ("A", &["w c000", "w c000", "w c001"]),
            ("B", &["w c001", "w c001", "w c000"]),
            ("C", &["w c000"]),
            ("D", &["w c001", "w c001"]),
        ];
        let (docs, vocab, model) = forced_setup(mixes);
        let index = build_region_index(&docs, &vocab, "country", None);
        let w = vocab.id("w").unwrap();
        let active = model.active_senses(w);
        let mut max_gap = 0.0f64;
        for &i in &active {
            for &j in &active {
                let gap = Metric::Manhattan
                    .distance(&model.sense_vector(w, i), &model.sense_vector(w, j));
                max_gap = max_gap.max(gap);
            }
        }
        for r1 in ["A", "B", "C", "D"] {
            for r2 in ["A", "B", "C", "D"] {
                let score =
                    dialectgram_score(&model, &index, w, r1, r2, Metric::Manhattan).unwrap();
                assert!(
                    score <= max_gap + 1e-6,
                    "{r1}-{r2}: {score} exceeds hull diameter {max_gap}"
                );
            }
        }
    }

    #[test]
    fn identical_usage_scores_zero_and_pure_senses_score_the_gap() {
        let mixes: &[(&str, &[&str])] = &[
            ("A", &["w c000", "w c000"]),
            ("B", &["w c000", "w c000"]),
            ("C", &["w c001", "w c001"]),
        ];
        let (docs, vocab, model) = forced_setup(mixes);
        let index = build_region_index(&docs, &vocab, "country", None);
        let w = vocab.id("w").unwrap();
        assert_eq!(
            dialectgram_score(&model, &index, w, "A", "B", Metric::Manhattan).unwrap(),
            0.0
        );
        let expected = Metric::Manhattan
            .distance(&model.sense_vector(w, 0), &model.sense_vector(w, 1));
        assert_relative_eq!(
            dialectgram_score(&model, &index, w, "A", "C", Metric::Manhattan).unwrap(),
            expected,
            max_relative = 1e-6
        );
    }

    #[test]
    fn proportions_match_counts_and_gate_on_min_docs() {
        let (docs, vocab, model) = forced_setup(&[(
            "X",
            &["w c000", "w c000", "w c000", "w c001"] as &[&str],
        )]);
        let index = build_region_index(&docs, &vocab, "country", None);
        let w = vocab.id("w").unwrap();
        let props = sense_proportions(&model, &index, w, "X", 2).unwrap().unwrap();
        assert_eq!(props, vec![0.75, 0.25]);
        assert_abs_diff_eq!(props.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        assert!(sense_proportions(&model, &index, w, "X", 15).unwrap().is_none());
        assert!(sense_proportions(&model, &index, w, "nowhere", 0).unwrap().is_none());
    }

    #[test]
    fn choropleth_covers_every_map_region_and_serializes() {
        let (docs, vocab, model) = forced_setup(&[
            ("X", &["w c000", "w c000", "w c001"] as &[&str]),
            ("Y", &["w c001"] as &[&str]),
        ]);
        let index = build_region_index(&docs, &vocab, "country", None);
        let w = vocab.id("w").unwrap();
        let map = RegionMap {
            resolution: "country".to_string(),
            regions: vec![
                RegionDef { id: "X".into(), bbox: Some([0.0, 0.0, 1.0, 1.0]), polygon: None },
                RegionDef { id: "Y".into(), bbox: Some([1.0, 0.0, 2.0, 1.0]), polygon: None },
                RegionDef { id: "Z".into(), bbox: Some([2.0, 0.0, 3.0, 1.0]), polygon: None },
            ],
        };
        let rows = choropleth_rows(&model, &index, &map, w, 0, 1).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].region_id, "X");
        assert_relative_eq!(rows[0].proportion.unwrap(), 2.0 / 3.0, max_relative = 1e-12);
        assert_eq!(rows[0].n_docs, 3);
        assert_eq!(rows[1].proportion, Some(0.0));
        assert_eq!(rows[2], ChoroplethRow {
            region_id: "Z".into(),
            sense: 0,
            proportion: None,
            n_docs: 0,
        });

        let mut csv_bytes = Vec::new();
        write_choropleth_csv(&mut csv_bytes, &rows).unwrap();
        let text = String::from_utf8(csv_bytes).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("region_id,sense,proportion,n_docs"));
        assert!(lines.next().unwrap().starts_with("X,0,0.666666"));
        assert_eq!(lines.next(), Some("Y,0,0,1"));
        assert_eq!(lines.next(), Some("Z,0,,0"));

        let mut geo_bytes = Vec::new();
        write_choropleth_geojson(&mut geo_bytes, &map, &rows).unwrap();
        let parsed: serde_json::Value = serde_json::from_slice(&geo_bytes).unwrap();
        assert_eq!(parsed["type"], "FeatureCollection");
        let features = parsed["features"].as_array().unwrap();
        assert_eq!(features.len(), 3);
        assert_eq!(features[0]["properties"]["region_id"], "X");
        assert!(features[2]["properties"]["proportion"].is_null());
        assert_eq!(features[0]["geometry"]["type"], "Polygon");
    }

    #[test]
    fn choropleth_for_an_inactive_sense_is_an_error() {
        let (docs, vocab, model) = forced_setup(&[("X", &["w c000"] as &[&str])]);
        let index = build_region_index(&docs, &vocab, "country", None);
        let map = RegionMap {
            resolution: "country".to_string(),
            regions: vec![RegionDef {
                id: "X".into(),
                bbox: Some([0.0, 0.0, 1.0, 1.0]),
                polygon: None,
            }],
        };
        let w = vocab.id("w").unwrap();
        assert!(matches!(
            choropleth_rows(&model, &index, &map, w, 99, 1),
            Err(Error::InactiveSense { .. })
        ));
    }
}
