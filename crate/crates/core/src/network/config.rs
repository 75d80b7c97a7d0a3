use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::attention::{EcaSettings, KernelRounding};
use crate::blocks::{MsapMode, ScaleFeed};
use crate::error::{Error, Result};

/// Denoising placement.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Denoise {
    NoDenoise,
    /// Shrinkage inside every MSAP block, plain transitions between groups.
    Drsn,
    /// Shrinkage (DM) blocks only between groups and after the last group.
    #[default]
    DrsnM,
}

impl FromStr for Denoise {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "no-denoise" | "none" => Ok(Self::NoDenoise),
            "drsn" => Ok(Self::Drsn),
            "drsn-m" | "dm" => Ok(Self::DrsnM),
            other => Err(format!("unknown denoise variant `{other}` (expected no-denoise, drsn or drsn-m)")),
        }
    }
}

impl fmt::Display for Denoise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::NoDenoise => "no-denoise",
            Self::Drsn => "drsn",
            Self::DrsnM => "drsn-m",
        })
    }
}

/// Architecture variant, written `"<msap>,<denoise>"`, e.g. `"purified,drsn-m"`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Variant {
    pub msap: MsapMode,
    pub denoise: Denoise,
}

impl Variant {
    pub const fn new(msap: MsapMode, denoise: Denoise) -> Self {
        Self { msap, denoise }
    }

    /// The five ablation rows, from the plain multi-scale network to MSAP-DM.
    pub const ABLATION: [(&'static str, Variant); 5] = [
        ("Base", Variant::new(MsapMode::Base, Denoise::NoDenoise)),
        ("Scale Connections", Variant::new(MsapMode::Connected, Denoise::NoDenoise)),
        ("Attention Purification", Variant::new(MsapMode::Purified, Denoise::NoDenoise)),
        ("DRSN", Variant::new(MsapMode::Purified, Denoise::Drsn)),
        ("DRSN-M", Variant::new(MsapMode::Purified, Denoise::DrsnM)),
    ];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = match self.msap {
            MsapMode::Base => "base",
            MsapMode::Connected => "connected",
            MsapMode::Purified => "purified",
        };
        write!(f, "{m},{}", self.denoise)
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (m, d) = s
            .split_once(',')
            .ok_or_else(|| format!("variant `{s}` must look like `<base|connected|purified>,<no-denoise|drsn|drsn-m>`"))?;
        Ok(Self {
            msap: m.trim().parse()?,
            denoise: d.trim().parse()?,
        })
    }
}

impl TryFrom<String> for Variant {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Variant> for String {
    fn from(v: Variant) -> Self {
        v.to_string()
    }
}

/// Architecture hyperparameters. Serialised as JSON with these snake_case
/// field names; omitted fields take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub in_channels: usize,
    pub num_classes: usize,
    pub window_len: usize,
    pub scales: usize,
    pub width: usize,
    pub groups: usize,
    pub blocks_per_group: usize,
    pub variant: Variant,
    pub eca_gamma: u32,
    pub eca_b: i32,
    pub eca_rounding: KernelRounding,
    pub scale_feed: ScaleFeed,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            in_channels: 3,
            num_classes: 6,
            window_len: 90,
            scales: 4,
            width: 8,
            groups: 3,
            blocks_per_group: 1,
            variant: Variant::default(),
            eca_gamma: 2,
            eca_b: 1,
            eca_rounding: KernelRounding::FloorOdd,
            scale_feed: ScaleFeed::Output,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let at_least = |field: &'static str, v: usize, min: usize| {
            if v < min {
                Err(Error::config(field, format!("must be at least {min}, got {v}")))
            } else {
                Ok(())
            }
        };
        at_least("in_channels", self.in_channels, 1)?;
        at_least("num_classes", self.num_classes, 2)?;
        at_least("window_len", self.window_len, 1)?;
        at_least("scales", self.scales, 2)?;
        at_least("width", self.width, 1)?;
        at_least("groups", self.groups, 1)?;
        at_least("blocks_per_group", self.blocks_per_group, 1)?;
        if self.eca_gamma == 0 {
            return Err(Error::config("eca_gamma", "must be at least 1"));
        }
        Ok(())
    }

    /// Channel count of group `g`: `scales · width · 2^g`.
    pub fn group_channels(&self, g: usize) -> usize {
        self.scales * self.group_width(g)
    }

    /// Channels per scale subset in group `g`.
    pub fn group_width(&self, g: usize) -> usize {
        self.width << g
    }

    pub fn eca(&self) -> EcaSettings {
        EcaSettings {
            gamma: self.eca_gamma,
            b: self.eca_b,
            rounding: self.eca_rounding,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_round_trips_through_text() {
        for (_, v) in Variant::ABLATION {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        assert!("purified".parse::<Variant>().is_err());
        assert!("purified,sometimes".parse::<Variant>().is_err());
    }

    #[test]
    fn config_json_uses_snake_case_and_defaults() {
        let cfg: ModelConfig = serde_json::from_str(r#"{"scales": 8, "variant": "base,no-denoise"}"#).unwrap();
        assert_eq!(cfg.scales, 8);
        assert_eq!(cfg.width, 8);
        assert_eq!(cfg.variant, Variant::new(MsapMode::Base, Denoise::NoDenoise));
        let json = serde_json::to_value(&cfg).unwrap();
        assert_eq!(json["eca_rounding"], "floor-odd");
        assert_eq!(json["blocks_per_group"], 1);
        assert!(serde_json::from_str::<ModelConfig>(r#"{"scale": 8}"#).is_err());
    }

    #[test]
    fn validation_names_field() {
        let cfg = ModelConfig {
            scales: 1,
            ..Default::default()
        };
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("scales"), "{err}");
    }

    #[test]
    fn group_channels_double() {
        let cfg = ModelConfig::default();
        assert_eq!(
            (0..3).map(|g| cfg.group_channels(g)).collect::<Vec<_>>(),
            vec![32, 64, 128]
        );
    }
}
