use kgl_core::gp::{holdout_rmse, interpolate_missing, Holdout, Interpolation};
use kgl_core::ScoreTable;

use super::score::REGION_SCORES;
use crate::config::RunConfig;
use crate::error::{KglError, Result};
use crate::io;
use crate::manifest::{Manifest, Recorder};

pub struct InterpolateOutput {
    pub target: String,
    pub interpolation: Interpolation,
    pub holdout: Option<Holdout>,
    pub manifest: Manifest,
}

fn load_scores(cfg: &RunConfig, rec: &mut Recorder) -> Result<ScoreTable> {
    match &cfg.paths.scores {
        Some(p) => {
            let full = cfg.require("scores", &cfg.paths.scores)?;
            rec.input(cfg, p)?;
            io::tables::read_scores(&full)
        }
        None => {
            let path = cfg.output(REGION_SCORES);
            if !path.exists() {
                return Err(KglError::input(&path, "region scores not found; run score first or set paths.scores"));
            }
            rec.detail("scores_sha256", crate::manifest::sha256_file(&path)?);
            io::tables::read_scores(&path)
        }
    }
}

/// `gp.target`, else `diff`, else the only construct present.
fn pick_target(cfg: &RunConfig, scores: &ScoreTable) -> Result<String> {
    let names = scores.constructs();
    if let Some(t) = &cfg.gp.target {
        return if names.contains(t) {
            Ok(t.clone())
        } else {
            Err(KglError::config(format!("gp.target {t:?} not among score constructs {names:?}")))
        };
    }
    if names.iter().any(|n| n == "diff") {
        return Ok("diff".into());
    }
    match names.as_slice() {
        [one] => Ok(one.clone()),
        _ => Err(KglError::config(format!("set gp.target; scores hold {names:?}"))),
    }
}

/// Fits the GP on observed counties and fills in the rest of the feature table.
pub fn run(cfg: &RunConfig) -> Result<InterpolateOutput> {
    let mut rec = Recorder::new("interpolate");
    let scores = load_scores(cfg, &mut rec)?;
    let target = pick_target(cfg, &scores)?;
    let feat_path = cfg.require("features", &cfg.paths.features)?;
    rec.input(cfg, cfg.paths.features.as_ref().expect("required"))?;
    let features = io::tables::read_features(&feat_path)?;
    let gp = cfg.gp_config();
    let observed = scores.construct(&target);
    let interpolation = interpolate_missing(&observed, &features, &gp).map_err(KglError::numeric)?;

    io::tables::write_interpolation(&cfg.output("interpolated.csv"), &interpolation.rows)?;
    io::tables::write_gaps(&cfg.output("gaps.csv"), &interpolation.gaps)?;
    rec.output("interpolated.csv");
    rec.output("gaps.csv");
    if !interpolation.gaps.is_empty() {
        log::warn!("{} counties listed in gaps.csv", interpolation.gaps.len());
    }
    if interpolation.clamped_variances > 0 {
        log::warn!("{} posterior variances clamped at zero", interpolation.clamped_variances);
    }

    let holdout = match cfg.gp.holdout_fraction {
        Some(f) => {
            let by_region: std::collections::BTreeMap<_, _> = features.iter().map(|r| (&r.region, r)).collect();
            let (mut x, mut y) = (Vec::new(), Vec::new());
            for row in &observed.rows {
                if let Some(fr) = by_region.get(&row.region).filter(|fr| fr.is_complete()) {
                    x.push(fr.values());
                    y.push(row.score);
                }
            }
            let h = holdout_rmse(&x, &y, f, &gp).map_err(KglError::numeric)?;
            let header: Vec<String> = ["n_train", "n_test", "rmse_gp", "rmse_constant"].iter().map(|s| s.to_string()).collect();
            let row = vec![h.n_train.to_string(), h.n_test.to_string(), io::fmt_f64(h.rmse_gp), io::fmt_f64(h.rmse_constant)];
            io::tables::write_rows(&cfg.output("holdout.csv"), &header, &[row])?;
            rec.output("holdout.csv");
            Some(h)
        }
        None => None,
    };

    rec.detail("target", &target);
    rec.detail("gaps", interpolation.gaps.len());
    rec.detail("clamped_variances", interpolation.clamped_variances);
    if let Some(m) = &interpolation.model {
        let h = m.hyperparameters();
        let names: Vec<&str> = io::tables::feature_header()[1..].to_vec();
        rec.detail(
            "gp",
            serde_json::json!({
                "length_scales": h.length_scales,
                "signal_variance": h.signal_variance,
                "noise_variance": h.noise_variance,
                "kept_features": m.kept_features().iter().map(|&i| names[i]).collect::<Vec<_>>(),
                "dropped_features": m.dropped_features().iter().map(|&i| names[i]).collect::<Vec<_>>(),
                "log_marginal_likelihood": m.log_marginal_likelihood(),
                "likelihood_trace": m.likelihood_trace(),
                "extra_jitter": m.extra_jitter(),
                "n_training": m.n_training(),
                "config": {"lr": gp.lr, "iters": gp.iters, "jitter": gp.jitter, "seed": gp.seed, "max_fit_points": gp.max_fit_points},
            }),
        );
    }
    if let Some(h) = &holdout {
        rec.detail("holdout", serde_json::json!({"n_train": h.n_train, "n_test": h.n_test, "rmse_gp": h.rmse_gp, "rmse_constant": h.rmse_constant}));
    }
    let manifest = rec.finish(cfg)?;
    Ok(InterpolateOutput {
        target,
        interpolation,
        holdout,
        manifest,
    })
}
