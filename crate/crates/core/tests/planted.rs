use std::collections::BTreeMap;

use kgl_core::corpus::{aggregate_counts, PhraseSet, RegionCounts};
use kgl_core::lexicon::build_lexicon;
use kgl_core::scoring::{aggregate_to_state, region_scores, weighted_frequency_matrix};
use kgl_core::stats::{correlation, validate_scores};
use kgl_core::synth::{generate, SynthDataset, SynthSpec};
use kgl_core::{EmbeddingTable, Lexicon, LexiconConfig, RegionId, ScoreTable, SeedSet};

fn setup(spec: &SynthSpec) -> (SynthDataset, EmbeddingTable, RegionCounts) {
    let data = generate(spec).unwrap();
    let table = EmbeddingTable::from_rows(data.embeddings.iter().map(|(w, v)| (w.as_str(), v.clone()))).unwrap();
    let counts = aggregate_counts(&data.documents, &PhraseSet::default());
    (data, table, counts)
}

fn build(data: &SynthDataset, table: &EmbeddingTable, counts: &RegionCounts, c: usize, cfg: &LexiconConfig) -> Lexicon {
    let (name, words) = &data.seeds[c];
    let seeds = SeedSet::new(name, words).unwrap();
    build_lexicon(cfg, table, &seeds, counts).unwrap().0
}

fn scores(lex: &Lexicon, counts: &RegionCounts) -> ScoreTable {
    let m = weighted_frequency_matrix(lex, counts, LexiconConfig::default().normalization);
    region_scores(&m, lex.construct())
}

fn truth_r(data: &SynthDataset, construct: &str, table: &ScoreTable) -> f64 {
    let truth = &data.truth[construct];
    let map = table.score_map(construct);
    let (x, y): (Vec<f64>, Vec<f64>) = map.iter().map(|(r, s)| (*s, truth[r])).unzip();
    correlation(&x, &y).unwrap()
}

#[test]
fn planted_scores_track_truth() {
    let (data, table, counts) = setup(&SynthSpec::default());
    for (c, name) in data.constructs.iter().enumerate() {
        let lex = build(&data, &table, &counts, c, &LexiconConfig::default());
        for w in &data.planted[c].1 {
            assert!(lex.contains(w), "{w} missing from {name}");
        }
        let r = truth_r(&data, name, &scores(&lex, &counts));
        assert!(r >= 0.8, "{name}: r = {r}");
    }
}

#[test]
fn confounders_purged_at_zero_theta() {
    let (data, table, counts) = setup(&SynthSpec::default());
    let cfg = LexiconConfig { theta: 0.0, ..LexiconConfig::default() };
    for c in 0..data.constructs.len() {
        let lex = build(&data, &table, &counts, c, &cfg);
        for w in &data.confounders[c].1 {
            assert!(!lex.contains(w), "{w} survived");
        }
    }
}

#[test]
fn full_lexicon_beats_seeds_only() {
    let (data, table, counts) = setup(&SynthSpec::default());
    let mapping: BTreeMap<RegionId, RegionId> = data.mapping.iter().cloned().collect();
    let full_cfg = LexiconConfig::default();
    let seed_cfg = full_cfg.seeds_only();
    for (c, name) in data.constructs.iter().enumerate() {
        let primary = data.indicator_names(name);
        let validity = |cfg: &LexiconConfig| {
            let lex = build(&data, &table, &counts, c, cfg);
            let states = aggregate_to_state(&scores(&lex, &counts), &mapping).unwrap();
            validate_scores(&states, &data.indicators, &primary).unwrap()[0].average_validity.unwrap()
        };
        let (full, seeds) = (validity(&full_cfg), validity(&seed_cfg));
        eprintln!("{name}: full {full:.4} seeds {seeds:.4}");
        assert!(full > seeds);
    }
}

#[test]
fn zero_signal_is_uncorrelated() {
    let mut hits = 0;
    for seed in 0..20 {
        let spec = SynthSpec { signal_strength: 0.0, n_regions: 60, docs_per_region: 100, seed, ..SynthSpec::default() };
        let (data, table, counts) = setup(&spec);
        let cfg = LexiconConfig { theta: 0.0, ..LexiconConfig::default() };
        let lex = build(&data, &table, &counts, 0, &cfg);
        let r = truth_r(&data, &data.constructs[0], &scores(&lex, &counts));
        if r.abs() < 0.3 {
            hits += 1;
        }
    }
    assert!(hits >= 19, "{hits}/20 seeds uncorrelated");
}
