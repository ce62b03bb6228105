//! Flat `key=value` run configuration: defaults, file values, then flag
//! overrides, validated as a whole.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use topg_core::ranking::SizeMode;
use topg_core::tracking::TrackerConfig;

/// Every tunable key, in the order `describe` prints them.
pub const KEYS: &[&str] = &[
    "bins",
    "gamma_margin",
    "search_factor",
    "scales",
    "aspect_perturbations",
    "step_iou",
    "nms_iou",
    "per_source_budget",
    "dedup_iou",
    "refine_rounds",
    "mag_threshold",
    "curve_threshold",
    "affinity_gamma",
    "distance_cutoff",
    "size_mode",
    "top_k",
    "phi",
    "omega",
    "n_tilde",
    "kappa",
    "lambda",
    "seed",
    "height_var_uses_h",
    "augment_scale",
    "init_epochs",
    "learning_rate",
    "update_epochs",
    "negative_ratio",
    "min_score",
    "score_tolerance",
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub tracker: TrackerConfig,
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| anyhow!("invalid value {value:?} for {key}: {e}"))
}

fn list(key: &str, value: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn boolean(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Ok(true),
        "0" | "false" | "no" => Ok(false),
        other => bail!("invalid value {other:?} for {key}: expected true or false"),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.tracker;
        let p = &mut t.pipeline;
        match key {
            "bins" => p.bins = num(key, value)?,
            "gamma_margin" => p.gamma_margin = num(key, value)?,
            "search_factor" => p.search_factor = num(key, value)?,
            "scales" => p.gen.scales = list(key, value)?,
            "aspect_perturbations" => p.gen.aspect_perturbations = list(key, value)?,
            "step_iou" => p.gen.step_iou = num(key, value)?,
            "nms_iou" => p.gen.nms_iou = num(key, value)?,
            "per_source_budget" => p.gen.per_source_budget = num(key, value)?,
            "dedup_iou" => p.gen.dedup_iou = num(key, value)?,
            "refine_rounds" => p.gen.refine_rounds = num(key, value)?,
            "mag_threshold" => p.gen.edges.mag_threshold = num(key, value)?,
            "curve_threshold" => p.gen.edges.curve_threshold = num(key, value)?,
            "affinity_gamma" => p.gen.edges.affinity_gamma = num(key, value)?,
            "distance_cutoff" => p.gen.edges.distance_cutoff = num(key, value)?,
            "size_mode" => {
                p.affinity.size_mode = value.trim().parse::<SizeMode>().map_err(|e| anyhow!(e))?
            }
            "top_k" => t.top_k = num(key, value)?,
            "phi" => t.phi = num(key, value)?,
            "omega" => t.omega = num(key, value)?,
            "n_tilde" => t.n_tilde = num(key, value)?,
            "kappa" => t.kappa = num(key, value)?,
            "lambda" => t.lambda = num(key, value)?,
            "seed" => t.seed = num(key, value)?,
            "height_var_uses_h" => t.height_var_uses_h = boolean(key, value)?,
            "augment_scale" => t.augment_scale = num(key, value)?,
            "init_epochs" => t.init_epochs = num(key, value)?,
            "learning_rate" => t.learning_rate = num(key, value)?,
            "update_epochs" => t.update_epochs = num(key, value)?,
            "negative_ratio" => t.negative_ratio = num(key, value)?,
            "min_score" => t.min_score = num(key, value)?,
            "score_tolerance" => t.score_tolerance = num(key, value)?,
            other => bail!("unknown configuration key {other:?}"),
        }
        Ok(())
    }

    /// Apply `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{origin}:{}: expected key=value", i + 1))?;
            self.set(key.trim(), value)
                .with_context(|| format!("{origin}:{}", i + 1))?;
        }
        Ok(())
    }

    /// Defaults, then `file`, then `overrides` in order; the result is
    /// validated.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut config = RunConfig::default();
        if let Some(path) = file {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))?;
            config.apply_text(&text, &path.display().to_string())?;
        }
        for (k, v) in overrides {
            config.set(k, v).with_context(|| format!("--{}", k.replace('_', "-")))?;
        }
        config.tracker.validate()?;
        Ok(config)
    }

    /// Current values as config-file text.
    pub fn describe(&self) -> String {
        let t = &self.tracker;
        let p = &t.pipeline;
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let values: Vec<String> = vec![
            p.bins.to_string(),
            p.gamma_margin.to_string(),
            p.search_factor.to_string(),
            join(&p.gen.scales),
            join(&p.gen.aspect_perturbations),
            p.gen.step_iou.to_string(),
            p.gen.nms_iou.to_string(),
            p.gen.per_source_budget.to_string(),
            p.gen.dedup_iou.to_string(),
            p.gen.refine_rounds.to_string(),
            p.gen.edges.mag_threshold.to_string(),
            p.gen.edges.curve_threshold.to_string(),
            p.gen.edges.affinity_gamma.to_string(),
            p.gen.edges.distance_cutoff.to_string(),
            p.affinity.size_mode.to_string(),
            t.top_k.to_string(),
            t.phi.to_string(),
            t.omega.to_string(),
            t.n_tilde.to_string(),
            t.kappa.to_string(),
            t.lambda.to_string(),
            t.seed.to_string(),
            t.height_var_uses_h.to_string(),
            t.augment_scale.to_string(),
            t.init_epochs.to_string(),
            t.learning_rate.to_string(),
            t.update_epochs.to_string(),
            t.negative_ratio.to_string(),
            t.min_score.to_string(),
            t.score_tolerance.to_string(),
        ];
        KEYS.iter()
            .zip(values)
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_keeps_defaults() {
        let mut c = RunConfig::default();
        c.apply_text("# nothing here\n\n", "test").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.tracker.pipeline.bins, 32);
        assert_eq!(c.tracker.kappa, 30);
        assert_eq!(c.tracker.top_k, 500);
    }

    #[test]
    fn describe_round_trips() {
        let mut c = RunConfig::default();
        c.set("scales", "0.5,1,2").unwrap();
        c.set("size_mode", "literal").unwrap();
        let mut d = RunConfig::default();
        d.apply_text(&c.describe(), "describe").unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn unknown_key_rejected() {
        let mut c = RunConfig::default();
        let err = c.apply_text("kapa=3\n", "f").unwrap_err();
        assert!(format!("{err:#}").contains("unknown configuration key"));
    }
}
