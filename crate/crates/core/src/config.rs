//! Plain `key = value` configuration. Keys are the field names of the
//! sensor, jitter-buffer, display and loopback-fault settings. Linkage
//! geometry keys apply to all three linkages, or to one with a `linkageN.`
//! prefix (N = 1..3).
//!
//! ```text
//! # desk rig
//! sample_rate_hz = 100
//! target_latency_ms = 60
//! distal_length_mm = 42
//! linkage3.base_separation_mm = 28
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::display::{Branch, LinkageGeometry};
use crate::pipeline::{PipelineConfig, PipelineError};

pub const CONFIG_ENV: &str = "MUSINGER_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("invalid configuration: {0}")]
    Invalid(#[from] PipelineError),
}

/// `--config` wins over the environment.
pub fn resolve_config_path(flag: Option<&Path>) -> Option<PathBuf> {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
}

pub fn load_config(path: Option<&Path>) -> Result<PipelineConfig, ConfigError> {
    match resolve_config_path(path) {
        None => Ok(PipelineConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(&p).map_err(|source| ConfigError::Io { path: p.clone(), source })?;
            parse_config(&text)
        }
    }
}

fn value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T, ConfigError> {
    raw.parse().map_err(|_| ConfigError::Syntax { line, reason: format!("bad value {raw:?} for {key}") })
}

fn set_linkage(g: &mut LinkageGeometry, line: usize, key: &str, raw: &str) -> Result<bool, ConfigError> {
    match key {
        "base_separation_mm" => g.base_separation_mm = value(line, key, raw)?,
        "proximal_length_mm" => g.proximal_length_mm = value(line, key, raw)?,
        "distal_length_mm" => g.distal_length_mm = value(line, key, raw)?,
        "angle_min_rad" => g.angle_min_rad = value(line, key, raw)?,
        "angle_max_rad" => g.angle_max_rad = value(line, key, raw)?,
        "branch" => {
            g.branch = match raw {
                "ElbowOut" => Branch::ElbowOut,
                "ElbowIn" => Branch::ElbowIn,
                _ => return Err(ConfigError::Syntax { line, reason: format!("branch must be ElbowOut or ElbowIn, got {raw:?}") }),
            }
        }
        _ => return Ok(false),
    }
    Ok(true)
}

pub fn parse_config(text: &str) -> Result<PipelineConfig, ConfigError> {
    let mut cfg = PipelineConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split_once('#').map_or(raw, |(b, _)| b).trim();
        if body.is_empty() {
            continue;
        }
        let (key, val) = body
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| ConfigError::Syntax { line, reason: format!("expected key = value, got {body:?}") })?;

        if let Some((prefix, field)) = key.split_once('.') {
            let idx = prefix
                .strip_prefix("linkage")
                .and_then(|n| n.parse::<usize>().ok())
                .filter(|n| (1..=3).contains(n))
                .ok_or_else(|| ConfigError::Syntax { line, reason: format!("unknown section {prefix:?}") })?;
            if !set_linkage(&mut cfg.display.linkages[idx - 1], line, field, val)? {
                return Err(ConfigError::Syntax { line, reason: format!("unknown linkage key {field:?}") });
            }
            continue;
        }
        let mut all = cfg.display.linkages;
        let mut matched = false;
        for g in &mut all {
            matched = set_linkage(g, line, key, val)?;
        }
        if matched {
            cfg.display.linkages = all;
            continue;
        }
        match key {
            "sample_rate_hz" => cfg.sensor.sample_rate_hz = value(line, key, val)?,
            "adc_bits" => cfg.sensor.adc_bits = value(line, key, val)?,
            "activation_threshold_n" => {
                let t = value(line, key, val)?;
                cfg.sensor.activation_threshold_n = t;
                cfg.display.activation_threshold_n = t;
            }
            "target_latency_ms" => cfg.jitter.target_latency_ms = value(line, key, val)?,
            "gap_timeout_ms" => cfg.jitter.gap_timeout_ms = value(line, key, val)?,
            "capacity_frames" => cfg.jitter.capacity_frames = value(line, key, val)?,
            "skin_plane_y_mm" => cfg.display.skin_plane_y_mm = value(line, key, val)?,
            "depth_max_mm" => cfg.display.depth_max_mm = value(line, key, val)?,
            "servo_max_speed_rad_s" => cfg.display.servo_max_speed_rad_s = value(line, key, val)?,
            "tick_rate_hz" => cfg.display.tick_rate_hz = value(line, key, val)?,
            "home_clearance_mm" => cfg.display.home_clearance_mm = value(line, key, val)?,
            "loss" => cfg.faults.loss = value(line, key, val)?,
            "duplicate" => cfg.faults.duplicate = value(line, key, val)?,
            "jitter_ms" => cfg.faults.jitter_ms = value(line, key, val)?,
            "base_delay_ms" => cfg.faults.base_delay_ms = value(line, key, val)?,
            "tail_ms" => cfg.tail_ms = value(line, key, val)?,
            _ => return Err(ConfigError::Syntax { line, reason: format!("unknown key {key:?}") }),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}
