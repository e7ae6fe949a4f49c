//! Flat key=value config files: one `key = value` pair per line, `#`
//! comments, blank lines allowed. Each consumer interprets its own keys
//! and rejects unknown ones so typos surface as errors.

use std::str::FromStr;

use thiserror::Error;

use crate::synth::SynthConfig;
use crate::trainer::{AblationMode, TrainConfig};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{content}`")]
    Parse { line: usize, content: String },
    #[error("unknown config key `{key}`")]
    UnknownKey { key: String },
    #[error("key `{key}`: {message}")]
    InvalidValue { key: String, message: String },
}

/// Parses the raw key=value pairs in file order.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Parse {
                line: idx + 1,
                content: raw.trim().to_string(),
            });
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Parse {
                line: idx + 1,
                content: raw.trim().to_string(),
            });
        }
        entries.push((key.to_string(), value.to_string()));
    }
    Ok(entries)
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::InvalidValue {
        key: key.to_string(),
        message: e.to_string(),
    })
}

/// Applies key=value entries onto a training config.
pub fn apply_train_config(
    cfg: &mut TrainConfig,
    entries: &[(String, String)],
) -> Result<(), ConfigError> {
    for (key, value) in entries {
        match key.as_str() {
            "total_iterations" => cfg.total_iterations = parse_value(key, value)?,
            "batch_size" => cfg.batch_size = parse_value(key, value)?,
            "learning_rate_initial" => cfg.learning_rate_initial = parse_value(key, value)?,
            "learning_rate_final" => cfg.learning_rate_final = parse_value(key, value)?,
            "lr_switch_fraction" => cfg.lr_switch_fraction = parse_value(key, value)?,
            "alpha_initial" => cfg.alpha_initial = parse_value(key, value)?,
            "alpha_final" => cfg.alpha_final = parse_value(key, value)?,
            "alpha_switch_fraction" => cfg.alpha_switch_fraction = parse_value(key, value)?,
            "iou_threshold" => cfg.iou_threshold = parse_value(key, value)?,
            "beta" => cfg.beta = parse_value(key, value)?,
            "include_core_in_davg" => cfg.include_core_in_davg = parse_value(key, value)?,
            "refine_heads" => cfg.refine_heads = parse_value(key, value)?,
            "seed" => cfg.seed = parse_value(key, value)?,
            "ablation" => {
                cfg.ablation = value.parse::<AblationMode>().map_err(|e| {
                    ConfigError::InvalidValue {
                        key: key.clone(),
                        message: e,
                    }
                })?
            }
            "feature_noise" => cfg.feature_noise = parse_value(key, value)?,
            "log_every" => cfg.log_every = parse_value(key, value)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: key.clone(),
                })
            }
        }
    }
    Ok(())
}

/// Applies key=value entries onto a generator config.
pub fn apply_synth_config(
    cfg: &mut SynthConfig,
    entries: &[(String, String)],
) -> Result<(), ConfigError> {
    for (key, value) in entries {
        match key.as_str() {
            "seed" => cfg.seed = parse_value(key, value)?,
            "num_images" => cfg.num_images = parse_value(key, value)?,
            "canvas_width" => cfg.canvas_width = parse_value(key, value)?,
            "canvas_height" => cfg.canvas_height = parse_value(key, value)?,
            "num_classes" => cfg.num_classes = parse_value(key, value)?,
            "max_active_classes" => cfg.max_active_classes = parse_value(key, value)?,
            "instance_count_weights" => {
                let weights: Result<Vec<f64>, _> =
                    value.split(',').map(|w| w.trim().parse()).collect();
                cfg.instance_count_weights =
                    weights.map_err(|e| ConfigError::InvalidValue {
                        key: key.clone(),
                        message: e.to_string(),
                    })?;
            }
            "feature_dim" => cfg.feature_dim = parse_value(key, value)?,
            "prototype_separation" => cfg.prototype_separation = parse_value(key, value)?,
            "feature_noise" => cfg.feature_noise = parse_value(key, value)?,
            "part_confound_strength" => cfg.part_confound_strength = parse_value(key, value)?,
            "coverage_signal_floor" => cfg.coverage_signal_floor = parse_value(key, value)?,
            "instance_appearance_spread" => {
                cfg.instance_appearance_spread = parse_value(key, value)?
            }
            "proposals_per_object" => cfg.proposals_per_object = parse_value(key, value)?,
            "background_proposals" => cfg.background_proposals = parse_value(key, value)?,
            "object_side_min" => cfg.object_side_range.0 = parse_value(key, value)?,
            "object_side_max" => cfg.object_side_range.1 = parse_value(key, value)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    key: key.clone(),
                })
            }
        }
    }
    Ok(())
}
