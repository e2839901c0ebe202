use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nnblocks::BlockConfig;

/// Temperature of the RGISP mixing softmax.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaPolicy {
    /// `λ = √N` with `N` the number of spatial positions.
    FixedSqrtN,
    /// `λ = √N · s` with a learned scalar `s` starting at 1.
    Learnable,
}

/// Structural variants of the network used by the ablation harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// The complete network (also named B6, S7 and R4).
    Full,
    /// No RAW input and no RAW branch.
    B1,
    /// No sRGB input and no sRGB branch.
    B2,
    /// The RAW branch is fed with pixel-unshuffled sRGB instead of RAW.
    B3,
    /// RGISP replaced by concatenation and two convolutions.
    B4,
    /// Reconstruction replaced by two convolutions.
    B5,
    /// Identity skips in both branches.
    S1,
    /// Identity skips in the RAW branch.
    S2,
    /// Identity skips in the sRGB branch.
    S3,
    /// GFM skips in both branches.
    S4,
    /// FSM skips in both branches.
    S5,
    /// Plain two-convolution residual blocks instead of DCABs.
    S6,
    /// Channel self-attention over the concatenated features.
    R1,
    /// Channel self-attention over RAW features, then concatenation.
    R2,
    /// Convolutional RAW-to-RGB mapping, then concatenation.
    R3,
}

impl Variant {
    pub const ALL: [Variant; 15] = [
        Variant::Full,
        Variant::B1,
        Variant::B2,
        Variant::B3,
        Variant::B4,
        Variant::B5,
        Variant::S1,
        Variant::S2,
        Variant::S3,
        Variant::S4,
        Variant::S5,
        Variant::S6,
        Variant::R1,
        Variant::R2,
        Variant::R3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::B1 => "B1",
            Variant::B2 => "B2",
            Variant::B3 => "B3",
            Variant::B4 => "B4",
            Variant::B5 => "B5",
            Variant::S1 => "S1",
            Variant::S2 => "S2",
            Variant::S3 => "S3",
            Variant::S4 => "S4",
            Variant::S5 => "S5",
            Variant::S6 => "S6",
            Variant::R1 => "R1",
            Variant::R2 => "R2",
            Variant::R3 => "R3",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Variant::Full => "complete network",
            Variant::B1 => "w/o RAW input and RAW branch",
            Variant::B2 => "w/o sRGB input and sRGB branch",
            Variant::B3 => "w/o RAW input",
            Variant::B4 => "w/o RGISP",
            Variant::B5 => "w/o reconstruction",
            Variant::S1 => "w/o GFM and FSM",
            Variant::S2 => "w/o GFM",
            Variant::S3 => "w/o FSM",
            Variant::S4 => "all GFM",
            Variant::S5 => "all FSM",
            Variant::S6 => "w/o DCAB",
            Variant::R1 => "self-attention on [raw, rgb]",
            Variant::R2 => "[self-attention on raw, rgb]",
            Variant::R3 => "convolutional RAW-to-RGB mapping",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.to_ascii_uppercase();
        if matches!(up.as_str(), "FULL" | "B6" | "S7" | "R4") {
            return Ok(Variant::Full);
        }
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == up)
            .ok_or_else(|| {
                let valid: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).chain(["B6", "S7", "R4"]).collect();
                Error::Config(format!("unknown variant {s:?}; valid names: {}", valid.join(", ")))
            })
    }
}

/// Every numeric choice of the network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub base_channels: usize,
    /// Encoder levels including the bottleneck; fixed at 3 (two down-samplings).
    pub scales: usize,
    /// Channel multiplier per down-sampling.
    pub channel_growth: usize,
    pub dcabs_per_scale: usize,
    pub bottleneck_dcabs: usize,
    pub rstb_count: usize,
    pub dct_block: usize,
    pub alpha: f64,
    pub lambda_policy: LambdaPolicy,
    pub use_rstb: bool,
    pub blocks: BlockConfig,
    pub variant: Variant,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::toy()
    }
}

impl ModelConfig {
    /// Desk-scale configuration (under 200k parameters).
    pub fn toy() -> Self {
        Self {
            base_channels: 8,
            scales: 3,
            channel_growth: 2,
            dcabs_per_scale: 1,
            bottleneck_dcabs: 1,
            rstb_count: 1,
            dct_block: 8,
            alpha: 0.5,
            lambda_policy: LambdaPolicy::FixedSqrtN,
            use_rstb: true,
            blocks: BlockConfig::default(),
            variant: Variant::Full,
        }
    }

    /// A larger configuration in the neighbourhood of 2.5M parameters.
    pub fn large() -> Self {
        Self {
            base_channels: 24,
            dcabs_per_scale: 2,
            bottleneck_dcabs: 2,
            rstb_count: 4,
            blocks: BlockConfig { rstb_heads: 4, ..BlockConfig::default() },
            ..Self::toy()
        }
    }

    pub fn with_variant(&self, variant: Variant) -> Self {
        Self { variant, ..self.clone() }
    }

    /// Channel width at encoder level `level` (0 = full feature resolution).
    pub fn width(&self, level: usize) -> usize {
        self.base_channels * self.channel_growth.pow(level as u32)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.scales != 3 {
            return bad(format!("scales must be 3 (two down-samplings), got {}", self.scales));
        }
        if self.base_channels == 0 || self.channel_growth == 0 {
            return bad("base_channels and channel_growth must be positive".into());
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be a non-negative number, got {}", self.alpha));
        }
        if self.dct_block == 0 {
            return bad("dct_block must be positive".into());
        }
        if self.use_rstb && self.rstb_count == 0 {
            return bad("use_rstb needs rstb_count >= 1".into());
        }
        for level in 0..self.scales {
            self.blocks.with_channels(self.width(level)).validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_parse() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert_eq!("b6".parse::<Variant>().unwrap(), Variant::Full);
        assert_eq!("S7".parse::<Variant>().unwrap(), Variant::Full);
        assert!("B9".parse::<Variant>().is_err());
    }

    #[test]
    fn config_json_rejects_unknown_fields() {
        let s = serde_json::to_string(&ModelConfig::toy()).unwrap();
        assert_eq!(serde_json::from_str::<ModelConfig>(&s).unwrap(), ModelConfig::toy());
        assert!(serde_json::from_str::<ModelConfig>(r#"{"base_chanels": 8}"#).is_err());
        let partial: ModelConfig = serde_json::from_str(r#"{"alpha": 1.0, "variant": "B4"}"#).unwrap();
        assert_eq!(partial.variant, Variant::B4);
        assert!(ModelConfig { scales: 4, ..ModelConfig::toy() }.validate().is_err());
        assert!(ModelConfig { alpha: -1.0, ..ModelConfig::toy() }.validate().is_err());
    }
}
