//! `key = value` configuration files.
//!
//! One assignment per line; `#` starts a comment; blank lines are ignored.
//! Unknown or repeated keys are errors. Lists are comma-separated.
//!
//! Run configuration keys and defaults:
//!
//! ```text
//! patch_size = 45              # odd in-plane patch edge
//! batch_size = 64
//! epochs = 10
//! validation_fraction = 0.2
//! blur_sigma_mm = 1.0          # Gaussian σ for membership targets
//! patches = 450000             # lesion-centred patch pool per orientation
//! seed = 0
//! lr = 0.001
//! beta1 = 0.9
//! beta2 = 0.999
//! eps = 1e-8
//! threshold = 0.5              # membership foreground threshold (inclusive)
//! percentile = 90              # component-volume percentile for filtering
//! module1 = 64,96,128,16,32,32,32   # c_1x1, c_3x3_reduce, c_3x3,
//! module2 = 32,32,64,8,16,16,32     # c_5x5_reduce, c_5x5, c_pool_proj,
//! module3 = 16,16,32,4,8,8,32       # c_avg
//! ```
//!
//! Phantom specification keys: `dims`, `spacing`, `n_lesions`,
//! `radius_min`, `radius_max`, `tissue`, `lesion_offset`, `noise_sigma`,
//! `seed` (see [`PhantomSpec`]).

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::net::InceptionConfig;
use crate::phantom::PhantomSpec;
use crate::pipeline::{SegmentConfig, TrainConfig};

/// Splits a config text into `(key, value)` pairs in file order.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(Error::Config(format!("line {}: empty key or value", n + 1)));
        }
        if out.iter().any(|(seen, _)| seen == k) {
            return Err(Error::Config(format!("line {}: duplicate key `{k}`", n + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

fn scalar<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn list<T: FromStr, const N: usize>(key: &str, v: &str) -> Result<[T; N]> {
    let items = v.split(',').map(|s| scalar::<T>(key, s.trim())).collect::<Result<Vec<_>>>()?;
    let len = items.len();
    items
        .try_into()
        .map_err(|_| Error::Config(format!("`{key}`: expected {N} values, got {len}")))
}

fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Everything a training or inference run needs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub segment: SegmentConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let t = &mut cfg.train;
        for (k, v) in parse_key_values(text)? {
            match k.as_str() {
                "patch_size" => t.patch_size = scalar(&k, &v)?,
                "batch_size" => t.batch_size = scalar(&k, &v)?,
                "epochs" => t.epochs = scalar(&k, &v)?,
                "validation_fraction" => t.validation_fraction = scalar(&k, &v)?,
                "blur_sigma_mm" => t.blur_sigma_mm = scalar(&k, &v)?,
                "patches" => t.patches = scalar(&k, &v)?,
                "seed" => t.seed = scalar(&k, &v)?,
                "lr" => t.adam.lr = scalar(&k, &v)?,
                "beta1" => t.adam.beta1 = scalar(&k, &v)?,
                "beta2" => t.adam.beta2 = scalar(&k, &v)?,
                "eps" => t.adam.eps = scalar(&k, &v)?,
                "module1" => t.stack[0] = InceptionConfig::from_array(list(&k, &v)?),
                "module2" => t.stack[1] = InceptionConfig::from_array(list(&k, &v)?),
                "module3" => t.stack[2] = InceptionConfig::from_array(list(&k, &v)?),
                "threshold" => cfg.segment.threshold = scalar(&k, &v)?,
                "percentile" => cfg.segment.percentile = scalar(&k, &v)?,
                other => return Err(Error::Config(format!("unknown key `{other}`"))),
            }
        }
        cfg.train.validate()?;
        cfg.segment.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let t = &self.train;
        let mut s = String::new();
        let _ = writeln!(s, "patch_size = {}", t.patch_size);
        let _ = writeln!(s, "batch_size = {}", t.batch_size);
        let _ = writeln!(s, "epochs = {}", t.epochs);
        let _ = writeln!(s, "validation_fraction = {:?}", t.validation_fraction);
        let _ = writeln!(s, "blur_sigma_mm = {:?}", t.blur_sigma_mm);
        let _ = writeln!(s, "patches = {}", t.patches);
        let _ = writeln!(s, "seed = {}", t.seed);
        let _ = writeln!(s, "lr = {:?}", t.adam.lr);
        let _ = writeln!(s, "beta1 = {:?}", t.adam.beta1);
        let _ = writeln!(s, "beta2 = {:?}", t.adam.beta2);
        let _ = writeln!(s, "eps = {:?}", t.adam.eps);
        for (i, m) in t.stack.iter().enumerate() {
            let _ = writeln!(s, "module{} = {}", i + 1, join(&m.as_array()));
        }
        let _ = writeln!(s, "threshold = {:?}", self.segment.threshold);
        let _ = writeln!(s, "percentile = {}", self.segment.percentile);
        s
    }
}

impl PhantomSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = PhantomSpec::default();
        for (k, v) in parse_key_values(text)? {
            match k.as_str() {
                "dims" => spec.dims = list(&k, &v)?,
                "spacing" => spec.spacing = list(&k, &v)?,
                "n_lesions" => spec.n_lesions = scalar(&k, &v)?,
                "radius_min" => spec.radius_min = scalar(&k, &v)?,
                "radius_max" => spec.radius_max = scalar(&k, &v)?,
                "tissue" => spec.tissue = list(&k, &v)?,
                "lesion_offset" => spec.lesion_offset = list(&k, &v)?,
                "noise_sigma" => spec.noise_sigma = scalar(&k, &v)?,
                "seed" => spec.seed = scalar(&k, &v)?,
                other => return Err(Error::Config(format!("unknown key `{other}`"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dims = {}", join(&self.dims));
        let _ = writeln!(s, "spacing = {}", join(&self.spacing.map(|v| format!("{v:?}"))));
        let _ = writeln!(s, "n_lesions = {}", self.n_lesions);
        let _ = writeln!(s, "radius_min = {:?}", self.radius_min);
        let _ = writeln!(s, "radius_max = {:?}", self.radius_max);
        let _ = writeln!(s, "tissue = {}", join(&self.tissue.map(|v| format!("{v:?}"))));
        let _ = writeln!(s, "lesion_offset = {}", join(&self.lesion_offset.map(|v| format!("{v:?}"))));
        let _ = writeln!(s, "noise_sigma = {:?}", self.noise_sigma);
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}
