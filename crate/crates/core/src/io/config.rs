//! `key = value` configuration files for training runs.
//!
//! ```text
//! # default 4x network
//! scale = 4
//! angular_u = 8
//! angular_v = 8
//! feat_ch = 32
//! kernels = gamma
//! depth = 18
//! dense = true
//! raw = true
//! seed = 1
//! lr = 1e-4
//! batch = 2
//! patch = 32
//! steps = 1000
//! ```

use std::path::Path;

use crate::dknet::DKNetConfig;
use crate::error::{Error, Result};
use crate::losses::{LossMode, DEFAULT_LAMBDA};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub net: DKNetConfig,
    pub seed: u64,
    pub lr: f64,
    pub batch: usize,
    /// LR patch edge in pixels.
    pub patch: usize,
    pub steps: usize,
    pub loss: LossMode,
    pub lambda: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            net: DKNetConfig::default(),
            seed: 1,
            lr: 1e-4,
            batch: 2,
            patch: 32,
            steps: 1000,
            loss: LossMode::Mse,
            lambda: DEFAULT_LAMBDA,
        }
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "on" | "yes" | "1" => Some(true),
        "false" | "off" | "no" | "0" => Some(false),
        _ => None,
    }
}

fn parse_num<N: std::str::FromStr>(key: &str, v: &str, line: usize) -> Result<N> {
    v.parse().map_err(|_| Error::Parse { line, msg: format!("invalid value {v:?} for {key}") })
}

/// Applies one network key; returns `false` if the key is not a network key.
fn apply_net_key(c: &mut DKNetConfig, key: &str, v: &str, line: usize) -> Result<bool> {
    match key {
        "scale" => c.scale = parse_num(key, v, line)?,
        "angular_u" => c.angular.0 = parse_num(key, v, line)?,
        "angular_v" => c.angular.1 = parse_num(key, v, line)?,
        "channels" => c.channels = parse_num(key, v, line)?,
        "feat_ch" => c.feat_ch = parse_num(key, v, line)?,
        "depth" => c.depth = parse_num(key, v, line)?,
        "kernels" => c.kind = v.parse().map_err(|e: Error| Error::Parse { line, msg: e.to_string() })?,
        "dense" | "raw" => {
            let b = parse_bool(v).ok_or_else(|| Error::Parse { line, msg: format!("invalid boolean {v:?} for {key}") })?;
            if key == "dense" {
                c.dense = b;
            } else {
                c.raw = b;
            }
        }
        _ => return Ok(false),
    }
    Ok(true)
}

pub(crate) fn net_config_pairs(c: &DKNetConfig) -> Vec<(String, String)> {
    vec![
        ("scale".into(), c.scale.to_string()),
        ("angular_u".into(), c.angular.0.to_string()),
        ("angular_v".into(), c.angular.1.to_string()),
        ("channels".into(), c.channels.to_string()),
        ("feat_ch".into(), c.feat_ch.to_string()),
        ("kernels".into(), c.kind.to_string()),
        ("depth".into(), c.depth.to_string()),
        ("dense".into(), c.dense.to_string()),
        ("raw".into(), c.raw.to_string()),
    ]
}

pub(crate) fn net_config_from_pairs(pairs: &[(String, String)]) -> Result<DKNetConfig> {
    let mut c = DKNetConfig::default();
    for (i, (k, v)) in pairs.iter().enumerate() {
        if !apply_net_key(&mut c, k, v, i + 1)? {
            return Err(Error::Format(format!("unknown network metadata key {k:?}")));
        }
    }
    c.validate()?;
    Ok(c)
}

impl TrainConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::Parse { line, msg: format!("expected key = value, got {content:?}") })?;
            let (key, value) = (key.trim(), value.trim());
            if apply_net_key(&mut cfg.net, key, value, line)? {
                continue;
            }
            match key {
                "seed" => cfg.seed = parse_num(key, value, line)?,
                "lr" => cfg.lr = parse_num(key, value, line)?,
                "batch" => cfg.batch = parse_num(key, value, line)?,
                "patch" => cfg.patch = parse_num(key, value, line)?,
                "steps" => cfg.steps = parse_num(key, value, line)?,
                "loss" => cfg.loss = value.parse().map_err(|e: Error| Error::Parse { line, msg: e.to_string() })?,
                "lambda" => cfg.lambda = parse_num(key, value, line)?,
                other => return Err(Error::Parse { line, msg: format!("unknown key {other:?}") }),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        if self.batch == 0 || self.patch == 0 {
            return Err(Error::InvalidConfig("batch and patch must be positive".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning rate must be nonnegative, got {}", self.lr)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in net_config_pairs(&self.net) {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s.push_str(&format!(
            "seed = {}\nlr = {}\nbatch = {}\npatch = {}\nsteps = {}\nloss = {}\nlambda = {}\n",
            self.seed, self.lr, self.batch, self.patch, self.steps, self.loss, self.lambda
        ));
        s
    }
}
