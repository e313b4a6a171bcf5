//! Acceptance harness. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any gating criterion fails.
//!
//! Reference values come from the brute-force oracles at the bottom of this
//! file, from `statrs`, or from the planted ground truth of the generator.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use kgl::commands::{ablate, build, interpolate, score, synth, validate};
use kgl::config::RunConfig;
use kgl_core::corpus::{aggregate_counts, PhraseSet};
use kgl_core::gp::{fit_gp, holdout_rmse, GpConfig, GpModel, Hyperparameters};
use kgl_core::lexicon::purify_matrix;
use kgl_core::stats::{best_subset, cronbach_alpha, pearson, IndicatorTable};
use kgl_core::synth::{bulk_documents, generate_field};
use kgl_core::{EmbeddingTable, Lexicon, LexiconEntry, Normalization, Origin, RegionFrequencyMatrix, RegionId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

const MIN_TRUTH_R: f64 = 0.8;
const PLANTED_SECONDS: f64 = 60.0;
const ORACLE_TOL: f64 = 1e-9;
const ORACLE_FIXTURES: usize = 1000;
const MAX_SUBSET_COLUMNS: usize = 8;
const FIXTURE_P_TOL: f64 = 1e-3;
const NEIGHBOR_TABLES: usize = 200;
const MAX_TABLE_WORDS: usize = 10_000;
const GP_SINGLE_TOL: f64 = 1e-6;
const GP_CLOSED_FORM_TOL: f64 = 1e-8;
const GP_VARIANCE_SLACK: f64 = 1e-6;
const PURIFY_MATRICES: usize = 100;
const THROUGHPUT_DOCS: usize = 1_000_000;
const THROUGHPUT_TOKENS: usize = 15;
const THROUGHPUT_SECONDS: f64 = 30.0;
const REAL_COLLECTIVISM: f64 = 0.405;
const REAL_INDIVIDUALISM: f64 = -0.531;
const REAL_TOL: f64 = 0.15;

type Check = fn() -> Result<String, String>;

fn main() {
    let gating: [(&str, Check); 8] = [
        ("planted signal end to end", planted_signal),
        ("full lexicon beats seeds only", baseline_ordering),
        ("statistical oracles", statistical_oracles),
        ("neighbor search oracle", neighbor_oracle),
        ("gaussian process checks", gp_checks),
        ("purification fixed point", purify_fixed_point),
        ("deterministic output tree", determinism),
        ("ingestion throughput and shard merge", throughput),
    ];
    let mut failed = 0;
    for (i, (name, check)) in gating.iter().enumerate() {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{}] {name}: {detail} ({secs:.1}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{}] {name}: {detail} ({secs:.1}s)", i + 1);
            }
        }
    }
    match real_data() {
        Ok(detail) => println!("INFO [9] real-data harness: {detail}"),
        Err(detail) => println!("INFO [9] real-data harness: not gating; {detail}"),
    }
    println!("{} of {} gating criteria passed", gating.len() - failed, gating.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Generates the default planted dataset into `dir` and loads its pipeline config.
fn synth_into(dir: &Path, field_counties: usize, overrides: &[&str]) -> Result<(synth::SynthOutput, RunConfig), String> {
    let mut gen = RunConfig::default();
    gen.paths.output = dir.to_path_buf();
    gen.synth.field_counties = field_counties;
    let out = synth::run(&gen).map_err(err)?;
    let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    let cfg = RunConfig::load(Some(&dir.join(synth::CONFIG_FILE)), &overrides).map_err(err)?;
    Ok((out, cfg))
}

// ---- 1 ----

fn planted_signal() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(err)?;
    let started = Instant::now();
    let (data, cfg) = synth_into(dir.path(), 0, &["lexicon.theta=0"])?;
    let built = build::run(&cfg, None).map_err(err)?;
    let scored = score::run(&cfg, None).map_err(err)?;
    let secs = started.elapsed().as_secs_f64();
    let data = data.dataset;
    let mut notes = Vec::new();
    let mut ok = secs < PLANTED_SECONDS;
    for c in &data.constructs {
        let s = scored.regions.score_map(c);
        let t = &data.truth[c];
        let (x, y): (Vec<f64>, Vec<f64>) = s.iter().map(|(r, v)| (*v, t[r])).unzip();
        let r = oracle_r(&x, &y).ok_or("undefined truth correlation")?;
        ok &= r >= MIN_TRUTH_R && x.len() == t.len();
        notes.push(format!("{c} r={r:.3}"));
    }
    let (mut kept, mut total, mut purified) = (0, 0, 0);
    for ((c, words), lex) in data.confounders.iter().zip(&built.lexica) {
        assert_eq!(c, lex.construct());
        let report = built.reports.iter().find(|r| &r.construct == c).expect("report");
        for w in words {
            total += 1;
            kept += usize::from(lex.contains(w));
            purified += usize::from(report.removals.iter().any(|m| &m.word == w && matches!(m.reason, kgl_core::lexicon::RemovalReason::LowCorrelation { .. })));
        }
    }
    ok &= kept == 0 && total > 0;
    notes.push(format!("confounders removed {}/{total} ({purified} by purification)", total - kept));
    notes.push(format!("build+score {secs:.2}s < {PLANTED_SECONDS}s"));
    let msg = notes.join(", ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// ---- 2 ----

fn baseline_ordering() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(err)?;
    let (_, cfg) = synth_into(dir.path(), 0, &["bootstrap.n_boot=2000"])?;
    build::run(&cfg, None).map_err(err)?;
    score::run(&cfg, None).map_err(err)?;
    let out = validate::run(&cfg).map_err(err)?;
    let (full, seeds) = (&out.methods[validate::MAIN_METHOD], &out.methods[validate::SEEDS_ONLY]);
    let mut ok = !full.is_empty();
    let mut notes = Vec::new();
    for row in full {
        let f = row.average_validity.ok_or("undefined validity")?;
        let s = seeds
            .iter()
            .find(|r| r.construct == row.construct)
            .and_then(|r| r.average_validity)
            .ok_or("seeds-only validity missing")?;
        ok &= f > s;
        notes.push(format!("{} {f:.4} vs {s:.4}", row.construct));
    }
    let msg = notes.join(", ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// ---- 3 ----

fn statistical_oracles() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut e_r, mut e_p, mut e_alpha, mut e_subset) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut mismatches = Vec::new();
    for f in 0..ORACLE_FIXTURES {
        // correlation
        let n = rng.random_range(3..60);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let slope = rng.random_range(-2.0..2.0);
        let y: Vec<f64> = x.iter().map(|v| slope * v + rng.random_range(-10.0..10.0)).collect();
        let got = pearson(&x, &y).map_err(err)?;
        let want_r = oracle_r(&x, &y).ok_or("degenerate fixture")?;
        e_r = e_r.max((got.r - want_r).abs());
        e_p = e_p.max((got.p - oracle_p(want_r, n)).abs());

        // internal consistency
        let k = rng.random_range(2..7);
        let m = rng.random_range(3..40);
        let base: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..5.0)).collect();
        let items: Vec<Vec<f64>> = (0..k)
            .map(|_| base.iter().map(|b| b + rng.random_range(-3.0..3.0)).collect())
            .collect();
        let got = cronbach_alpha(&items).map_err(err)?;
        let want = oracle_alpha(&items).ok_or("degenerate alpha fixture")?;
        e_alpha = e_alpha.max((got - want).abs());

        // subset search with missing cells
        let cols = rng.random_range(2..=MAX_SUBSET_COLUMNS);
        let units = rng.random_range(4..30);
        let min_size = rng.random_range(2..=3).min(cols);
        let table = random_indicators(&mut rng, cols, units);
        let got = best_subset(&table, min_size).map_err(err)?;
        let want = oracle_best_subset(&table, min_size);
        let got_by_set: BTreeMap<Vec<String>, Option<f64>> = got
            .candidates
            .iter()
            .map(|c| {
                let mut k = c.columns.clone();
                k.sort();
                (k, c.alpha)
            })
            .collect();
        if got_by_set.len() != want.all.len() {
            mismatches.push(format!("fixture {f}: {} subsets vs {}", got_by_set.len(), want.all.len()));
        }
        for (set, a) in &want.all {
            match (got_by_set.get(set).copied().flatten(), a) {
                (Some(g), Some(w)) => e_subset = e_subset.max((g - w).abs()),
                (None, None) => {}
                (g, w) => mismatches.push(format!("fixture {f} {set:?}: {g:?} vs {w:?}")),
            }
        }
        let got_best = got.best.map(|(mut c, a)| {
            c.sort();
            (c, a)
        });
        match (&got_best, &want.best) {
            (Some((gc, ga)), Some((wc, wa))) if gc == wc => e_subset = e_subset.max((ga - wa).abs()),
            (None, None) => {}
            (g, w) => mismatches.push(format!("fixture {f} best: {g:?} vs {w:?}")),
        }
    }
    // worked example
    let fixture = pearson(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0]).map_err(err)?;
    let p_ref = oracle_p(0.8, 5);
    let fixture_ok = (fixture.r - 0.8).abs() <= 1e-12 && (fixture.p - p_ref).abs() <= FIXTURE_P_TOL;
    let msg = format!(
        "{ORACLE_FIXTURES} fixtures, max |dr|={e_r:.1e} |dp|={e_p:.1e} |dalpha|={e_alpha:.1e} |dsubset|={e_subset:.1e}; \
         example r={:.12} p={:.4} (t ref {p_ref:.4})",
        fixture.r, fixture.p
    );
    if mismatches.is_empty() && fixture_ok && e_r.max(e_p).max(e_alpha).max(e_subset) <= ORACLE_TOL {
        Ok(msg)
    } else {
        Err(format!("{msg}; mismatches: {}", mismatches.iter().take(5).cloned().collect::<Vec<_>>().join("; ")))
    }
}

fn random_indicators(rng: &mut ChaCha8Rng, cols: usize, units: usize) -> IndicatorTable {
    let latent: Vec<f64> = (0..units).map(|_| rng.random_range(0.0..1.0)).collect();
    let names: Vec<String> = (0..cols).map(|j| format!("v{}", (j * 7 + 3) % 11)).collect();
    let columns = (0..cols)
        .map(|_| {
            let load = rng.random_range(-1.0..2.0);
            latent
                .iter()
                .map(|l| (rng.random_range(0.0..1.0) > 0.1).then(|| load * l + rng.random_range(-0.5..0.5)))
                .collect()
        })
        .collect();
    IndicatorTable {
        units: (0..units).map(|u| RegionId::parse(&format!("{:05}", 1001 + 2 * u)).unwrap()).collect(),
        names,
        columns,
    }
}

// ---- 4 ----

fn neighbor_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut hits, mut ties, mut words) = (0usize, 0usize, 0usize);
    for t in 0..NEIGHBOR_TABLES {
        let n = if t == 0 { MAX_TABLE_WORDS } else { rng.random_range(1..=MAX_TABLE_WORDS) };
        let dim = rng.random_range(2..9);
        let mut ids: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            ids.swap(i, rng.random_range(0..=i));
        }
        let rows: Vec<(String, Vec<f64>)> = ids
            .iter()
            .map(|id| (format!("w{id}"), (0..dim).map(|_| rng.random_range(-3i32..=3) as f64).collect()))
            .collect();
        words += n;
        let table = EmbeddingTable::from_rows(rows.iter().map(|(w, v)| (w.as_str(), v.clone()))).map_err(err)?;
        let mut query: Vec<f64> = (0..dim).map(|_| rng.random_range(-3i32..=3) as f64).collect();
        query[0] = if query[0] == 0.0 { 1.0 } else { query[0] };
        let threshold = match rng.random_range(0..4) {
            0 => rng.random_range(-1.0..1.0),
            // a threshold equal to an attained similarity exercises the inclusive bound
            1 => oracle_cos(&query, &rows[rng.random_range(0..n)].1).unwrap_or(0.5),
            2 => 0.0,
            _ => 0.9,
        };
        let exclude: BTreeSet<String> = rows.iter().filter(|_| rng.random_range(0..20) == 0).map(|(w, _)| w.clone()).collect();
        let got: Vec<(String, f64)> = table
            .neighbors_at_least(&query, threshold, &exclude)
            .map_err(err)?
            .into_iter()
            .map(|(w, s)| (w, s.value()))
            .collect();
        let want = oracle_neighbors(&rows, &query, threshold, &exclude);
        if got != want {
            let first = got.iter().zip(&want).position(|(a, b)| a != b);
            return Err(format!("table {t} ({n} words): {} vs {} hits, first difference at {first:?}", got.len(), want.len()));
        }
        hits += want.len();
        ties += want.windows(2).filter(|w| w[0].1 == w[1].1).count();
    }
    Ok(format!("{NEIGHBOR_TABLES} tables, {words} words, {hits} neighbors, {ties} tied adjacent pairs, all identical"))
}

// ---- 5 ----

fn gp_checks() -> Result<String, String> {
    let mut notes = Vec::new();
    let mut ok = true;
    let hp = |ell: Vec<f64>, s2: f64, n2: f64| Hyperparameters {
        length_scales: ell,
        signal_variance: s2,
        noise_variance: n2,
    };

    // one observation, negligible noise
    let m = GpModel::with_hyperparameters(&[vec![0.4, -1.2, 3.0]], &[2.5], hp(vec![1.0; 3], 1.0, 1e-10), 1e-10).map_err(err)?;
    let d1 = (m.predict(&[vec![0.4, -1.2, 3.0]]).map_err(err)?.mean[0] - 2.5).abs();
    ok &= d1 <= GP_SINGLE_TOL;
    notes.push(format!("single point |d|={d1:.1e}"));

    // two observations against the hand-inverted 2x2 system
    let (x, y) = ([vec![-0.5], vec![1.5]], [0.3, -1.1]);
    let (ell, s2, n2) = (0.8, 1.7, 0.02);
    let m = GpModel::with_hyperparameters(&x, &y, hp(vec![ell], s2, n2), 1e-9).map_err(err)?;
    let q = 0.9;
    let (mean_ref, var_ref) = oracle_two_point(&[-0.5, 1.5], &y, q, ell, s2, n2);
    let p = m.predict(&[vec![q]]).map_err(err)?;
    let d2 = (p.mean[0] - mean_ref).abs().max((p.variance[0] - var_ref).abs());
    ok &= d2 <= GP_CLOSED_FORM_TOL;
    notes.push(format!("two point |d|={d2:.1e}"));

    // sine fixture: ascent never decreases the likelihood
    let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 * 0.7]).collect();
    let ys: Vec<f64> = xs.iter().map(|v| v[0].sin()).collect();
    let fit = fit_gp(&xs, &ys, &GpConfig::default()).map_err(err)?;
    let trace = fit.likelihood_trace();
    let drops = trace.windows(2).filter(|w| w[1] < w[0]).count();
    ok &= drops == 0 && trace.len() > 1 && trace.last() > trace.first();
    notes.push(format!(
        "likelihood {:.3} -> {:.3} over {} steps, {drops} decreases",
        trace.first().copied().unwrap_or(f64::NAN),
        trace.last().copied().unwrap_or(f64::NAN),
        trace.len() - 1
    ));

    // variance at the training inputs
    let noise = fit.hyperparameters().noise_variance;
    let vmax = fit.predict(&xs).map_err(err)?.variance.into_iter().fold(0.0, f64::max);
    ok &= vmax <= noise + GP_VARIANCE_SLACK;
    notes.push(format!("max train variance {vmax:.2e} <= noise {noise:.2e}+1e-6"));

    // held-out counties of the synthetic field
    let field = generate_field(150, 11);
    let x: Vec<Vec<f64>> = field.rows.iter().map(|r| r.values()).collect();
    let h = holdout_rmse(&x, &field.values, 0.2, &GpConfig::default()).map_err(err)?;
    ok &= h.rmse_gp < h.rmse_constant;
    notes.push(format!("holdout rmse {:.4} vs constant {:.4}", h.rmse_gp, h.rmse_constant));
    let msg = notes.join(", ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// ---- 6 ----

fn purify_fixed_point() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut floors, mut removed, mut survivors) = (0, 0, 0);
    for t in 0..PURIFY_MATRICES {
        let regions = rng.random_range(5..60);
        let n_words = rng.random_range(3..16);
        let theta = rng.random_range(0.0..0.6);
        let latent: Vec<f64> = (0..regions).map(|_| rng.random_range(0.0..1.0)).collect();
        let loads: Vec<f64> = (0..n_words).map(|_| if rng.random_range(0..3) == 0 { 0.0 } else { rng.random_range(0.2..1.0) }).collect();
        let words: Vec<String> = (0..n_words).map(|j| format!("w{j:02}")).collect();
        let lex = Lexicon::from_entries(
            "c",
            words.iter().map(|w| LexiconEntry {
                word: w.clone(),
                weight: rng.random_range(0.1..1.0),
                origin: Origin::Synonym,
                source: "s".into(),
            }),
        );
        let mut columns: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (w, load) in words.iter().zip(&loads) {
            columns.insert(w.clone(), latent.iter().map(|l| load * l + rng.random_range(0.0..0.5)).collect());
        }
        let ids: Vec<RegionId> = (0..regions).map(|i| RegionId::parse(&format!("{:05}", 1001 + i)).unwrap()).collect();
        let matrix = |keep: &[String]| {
            let mut v = Vec::with_capacity(regions * keep.len());
            for i in 0..regions {
                v.extend(keep.iter().map(|w| columns[w][i]));
            }
            RegionFrequencyMatrix::from_dense(ids.clone(), keep.to_vec(), v, Normalization::Raw)
        };
        let (once, report) = purify_matrix(&lex, &matrix(&words), theta).map_err(err)?;
        let kept: Vec<String> = once.words().map(str::to_string).collect();
        let (twice, again) = purify_matrix(&once, &matrix(&kept), theta).map_err(err)?;
        if twice != once || !again.removals.is_empty() {
            return Err(format!("matrix {t}: second pass removed {:?}", again.removals));
        }
        removed += report.removals.len();
        survivors += kept.len();
        if report.stopped_at_floor {
            floors += 1;
            continue;
        }
        for w in &kept {
            let rest: Vec<f64> = (0..regions).map(|i| kept.iter().filter(|o| *o != w).map(|o| columns[o][i]).sum()).collect();
            match oracle_r(&columns[w], &rest) {
                Some(r) if r >= theta => {}
                r => return Err(format!("matrix {t}: survivor {w} statistic {r:?} < {theta:.3}")),
            }
        }
    }
    Ok(format!(
        "{PURIFY_MATRICES} matrices idempotent, {removed} removed, {survivors} survivors all >= theta \
         ({floors} stopped at the two-word floor, checked for idempotence only)"
    ))
}

// ---- 7 ----

fn full_pipeline(dir: &Path) -> Result<(), String> {
    let (_, cfg) = synth_into(dir, 60, &["bootstrap.n_boot=2000"])?;
    build::run(&cfg, None).map_err(err)?;
    score::run(&cfg, None).map_err(err)?;
    validate::run(&cfg).map_err(err)?;
    ablate::run(&cfg).map_err(err)?;
    interpolate::run(&cfg).map_err(err)?;
    let field = RunConfig::load(Some(&dir.join("field").join(synth::CONFIG_FILE)), &[]).map_err(err)?;
    interpolate::run(&field).map_err(err)?;
    Ok(())
}

fn snapshot(root: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).map_err(err)? {
            let p = e.map_err(err)?.path();
            if p.is_dir() {
                stack.push(p);
                continue;
            }
            let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
            let mut bytes = std::fs::read(&p).map_err(err)?;
            if rel.rsplit('/').next().is_some_and(|n| n.starts_with("manifest_")) {
                let mut v: serde_json::Value = serde_json::from_slice(&bytes).map_err(err)?;
                v["wall_time_seconds"] = serde_json::json!(0);
                bytes = serde_json::to_vec(&v).map_err(err)?;
            }
            out.insert(rel, bytes);
        }
    }
    Ok(out)
}

fn determinism() -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(err)?;
    let dir = tmp.path().join("tree");
    full_pipeline(&dir)?;
    let first = snapshot(&dir)?;
    std::fs::remove_dir_all(&dir).map_err(err)?;
    full_pipeline(&dir)?;
    let second = snapshot(&dir)?;
    for needed in ["run/bootstrap.csv", "field/run/interpolated.csv", "field/run/manifest_interpolate.json"] {
        if !first.contains_key(needed) {
            return Err(format!("{needed} missing from the output tree"));
        }
    }
    let differing: Vec<&String> = first.keys().chain(second.keys()).filter(|k| first.get(*k) != second.get(*k)).collect();
    if differing.is_empty() {
        Ok(format!("{} files byte-identical across two runs (manifest wall time masked)", first.len()))
    } else {
        Err(format!("differing files: {differing:?}"))
    }
}

// ---- 8 ----

fn throughput() -> Result<String, String> {
    let docs = bulk_documents(THROUGHPUT_DOCS, THROUGHPUT_TOKENS, 3000, 8);
    let mut text = String::with_capacity(THROUGHPUT_DOCS * 100);
    for d in &docs {
        text.push_str(d.region.as_str());
        text.push('\t');
        text.push_str(&d.text);
        text.push('\n');
    }
    let phrases = PhraseSet::new(["w1 w2", "w10 w20", "w7 w7"]).map_err(err)?;
    let started = Instant::now();
    let sharded = kgl::io::corpus::ingest_text(&text, &phrases, kgl::io::corpus::default_shards().max(4));
    let secs = started.elapsed().as_secs_f64();
    let single = kgl::io::corpus::ingest_text(&text, &phrases, 1);
    let reference = aggregate_counts(&docs, &phrases);
    let tokens: f64 = sharded.counts.regions().map(|(_, t)| t.total).sum();
    let msg = format!(
        "{} docs, {tokens} tokens in {secs:.2}s ({:.0} docs/s) on {} threads",
        sharded.documents,
        sharded.documents as f64 / secs,
        rayon::current_num_threads()
    );
    if sharded.documents != THROUGHPUT_DOCS as u64 || !sharded.rejected.is_empty() {
        return Err(format!("{msg}; {} rejected lines", sharded.rejected.len()));
    }
    if sharded.counts != single.counts || sharded.counts != reference {
        return Err(format!("{msg}; sharded counts differ from the single pass"));
    }
    if secs < THROUGHPUT_SECONDS {
        Ok(format!("{msg}; sharded == single pass == in-memory reference"))
    } else {
        Err(format!("{msg}; limit {THROUGHPUT_SECONDS}s"))
    }
}

// ---- 9 ----

/// Runs when `KGL_REAL_DATA` names a config for the published lexical bank,
/// indicators and embeddings. Never gates.
fn real_data() -> Result<String, String> {
    let path = std::env::var("KGL_REAL_DATA").map_err(|_| "set KGL_REAL_DATA to a real-data config to run".to_string())?;
    let cfg = RunConfig::load(Some(Path::new(&path)), &[]).map_err(err)?;
    build::run(&cfg, None).map_err(err)?;
    score::run(&cfg, None).map_err(err)?;
    let out = validate::run(&cfg).map_err(err)?;
    let rows = &out.methods[validate::MAIN_METHOD];
    let get = |c: &str| rows.iter().find(|r| r.construct == c).and_then(|r| r.average_validity);
    let mut notes = Vec::new();
    for (c, want) in [(&cfg.score.collectivism, REAL_COLLECTIVISM), (&cfg.score.individualism, REAL_INDIVIDUALISM)] {
        let note = match get(c) {
            Some(v) => format!("{c} {v:.3} (expected {want} +/- {REAL_TOL}: {})", if (v - want).abs() <= REAL_TOL { "within" } else { "outside" }),
            None => format!("{c} undefined"),
        };
        notes.push(note);
    }
    Ok(notes.join(", "))
}

// ---- oracles ----

/// Textbook single-pass sums form of the product-moment correlation.
fn oracle_r(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let (sxx, syy) = (x.iter().map(|a| a * a).sum::<f64>(), y.iter().map(|b| b * b).sum::<f64>());
    let den = ((n * sxx - sx * sx) * (n * syy - sy * sy)).sqrt();
    (den > 1e-12 * n * n).then(|| (n * sxy - sx * sy) / den)
}

fn oracle_p(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    2.0 * (1.0 - StudentsT::new(0.0, 1.0, df).unwrap().cdf(t.abs()))
}

/// Alpha from the item covariance matrix: k/(k-1) * (1 - trace / sum).
fn oracle_alpha(items: &[Vec<f64>]) -> Option<f64> {
    let k = items.len();
    let n = items[0].len();
    if k < 2 || n < 3 {
        return None;
    }
    let means: Vec<f64> = items.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let cov = |a: usize, b: usize| (0..n).map(|i| (items[a][i] - means[a]) * (items[b][i] - means[b])).sum::<f64>() / (n - 1) as f64;
    let (mut trace, mut total) = (0.0, 0.0);
    for a in 0..k {
        for b in 0..k {
            let c = cov(a, b);
            total += c;
            if a == b {
                trace += c;
            }
        }
    }
    (total > 1e-12).then(|| k as f64 / (k as f64 - 1.0) * (1.0 - trace / total))
}

struct OracleSubsets {
    all: BTreeMap<Vec<String>, Option<f64>>,
    best: Option<(Vec<String>, f64)>,
}

/// Enumerates subsets recursively, listwise deletion per subset, ties to the
/// smaller then lexicographically first sorted name list.
fn oracle_best_subset(table: &IndicatorTable, min_size: usize) -> OracleSubsets {
    fn walk(i: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == m {
            out.push(cur.clone());
            return;
        }
        walk(i + 1, m, cur, out);
        cur.push(i);
        walk(i + 1, m, cur, out);
        cur.pop();
    }
    let mut subsets = Vec::new();
    walk(0, table.names.len(), &mut Vec::new(), &mut subsets);
    let mut all = BTreeMap::new();
    let mut best: Option<(Vec<String>, f64)> = None;
    for s in subsets.into_iter().filter(|s| s.len() >= min_size.max(2)) {
        let complete: Vec<usize> = (0..table.units.len()).filter(|&u| s.iter().all(|&c| table.columns[c][u].is_some())).collect();
        let items: Vec<Vec<f64>> = s.iter().map(|&c| complete.iter().map(|&u| table.columns[c][u].unwrap()).collect()).collect();
        let alpha = if complete.is_empty() { None } else { oracle_alpha(&items) };
        let mut names: Vec<String> = s.iter().map(|&c| table.names[c].clone()).collect();
        names.sort();
        if let Some(a) = alpha {
            let better = match &best {
                None => true,
                Some((bn, ba)) => a > *ba || (a == *ba && (names.len(), &names) < (bn.len(), bn)),
            };
            if better {
                best = Some((names.clone(), a));
            }
        }
        all.insert(names, alpha);
    }
    OracleSubsets { all, best }
}

fn oracle_cos(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
    let (na, nb) = (dot(a, a).sqrt(), dot(b, b).sqrt());
    (na > 0.0 && nb > 0.0).then(|| dot(a, b) / (na * nb))
}

/// Full scan, filter, then sort by similarity descending and token ascending.
fn oracle_neighbors(rows: &[(String, Vec<f64>)], q: &[f64], threshold: f64, exclude: &BTreeSet<String>) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = rows
        .iter()
        .filter(|(w, _)| !exclude.contains(w))
        .filter_map(|(w, v)| oracle_cos(q, v).filter(|s| *s >= threshold).map(|s| (w.clone(), s)))
        .collect();
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite").then_with(|| a.0.cmp(&b.0)));
    out
}

/// Posterior of a squared-exponential GP on two raw inputs, standardized the
/// same way as the model (population sd), via the explicit 2x2 inverse.
fn oracle_two_point(x: &[f64; 2], y: &[f64; 2], q: f64, ell: f64, s2: f64, n2: f64) -> (f64, f64) {
    let mx = (x[0] + x[1]) / 2.0;
    let sd = ((x[0] - mx).abs() + (x[1] - mx).abs()) / 2.0;
    let z = |v: f64| (v - mx) / sd;
    let k = |a: f64, b: f64| s2 * (-0.5 * ((a - b) / ell).powi(2)).exp();
    let (a, c) = (s2 + n2, k(z(x[0]), z(x[1])));
    let det = a * a - c * c;
    let inv = [[a / det, -c / det], [-c / det, a / det]];
    let my = (y[0] + y[1]) / 2.0;
    let yc = [y[0] - my, y[1] - my];
    let ks = [k(z(q), z(x[0])), k(z(q), z(x[1]))];
    let w = [inv[0][0] * ks[0] + inv[0][1] * ks[1], inv[1][0] * ks[0] + inv[1][1] * ks[1]];
    (my + w[0] * yc[0] + w[1] * yc[1], s2 - (ks[0] * w[0] + ks[1] * w[1]))
}
