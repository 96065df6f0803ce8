use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Shape of the visual encoder plus the similarity temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub image_size: usize,
    pub channels: usize,
    pub patch_size: usize,
    pub model_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    pub mlp_ratio: usize,
    pub embed_dim: usize,
    pub lora_rank: usize,
    pub temperature: f64,
}

impl EncoderConfig {
    /// 32×32 grayscale, patch 4, d=64, two layers of four heads, r=16.
    pub fn toy() -> Self {
        Self {
            image_size: 32,
            channels: 1,
            patch_size: 4,
            model_dim: 64,
            num_layers: 2,
            num_heads: 4,
            mlp_ratio: 2,
            embed_dim: 32,
            lora_rank: 16,
            temperature: 0.07,
        }
    }

    /// ViT-B/16 at 224 px with a 512-d projection.
    pub fn vit_b16() -> Self {
        Self {
            image_size: 224,
            channels: 3,
            patch_size: 16,
            model_dim: 768,
            num_layers: 12,
            num_heads: 12,
            mlp_ratio: 4,
            embed_dim: 512,
            lora_rank: 16,
            temperature: 0.07,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |m: &str| Err(ModelError::InvalidConfig(m.to_string()));
        if self.image_size == 0 || self.patch_size == 0 || !self.image_size.is_multiple_of(self.patch_size) {
            return fail("image_size must be a positive multiple of patch_size");
        }
        if !matches!(self.channels, 1 | 3) {
            return fail("channels must be 1 or 3");
        }
        if self.model_dim == 0 || self.num_heads == 0 || !self.model_dim.is_multiple_of(self.num_heads) {
            return fail("model_dim must be a positive multiple of num_heads");
        }
        if self.num_layers == 0 || self.mlp_ratio == 0 || self.embed_dim == 0 {
            return fail("num_layers, mlp_ratio and embed_dim must be positive");
        }
        if self.lora_rank > self.model_dim {
            return fail("lora_rank must not exceed model_dim");
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return fail("temperature must be positive");
        }
        Ok(())
    }

    pub fn grid(&self) -> usize {
        self.image_size / self.patch_size
    }

    pub fn num_patches(&self) -> usize {
        self.grid() * self.grid()
    }

    /// Patches plus the class token.
    pub fn num_tokens(&self) -> usize {
        self.num_patches() + 1
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_size * self.patch_size * self.channels
    }

    pub fn head_dim(&self) -> usize {
        self.model_dim / self.num_heads
    }

    pub fn mlp_dim(&self) -> usize {
        self.model_dim * self.mlp_ratio
    }
}

/// Optimisation settings for few-shot adapter tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Share of the training split used, in percent.
    pub percent: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            epochs: 20,
            batch_size: 32,
            percent: 10.0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.percent > 0.0 && self.percent <= 100.0) {
            return Err(ModelError::InvalidPercent(self.percent));
        }
        if self.batch_size == 0 {
            return Err(ModelError::InvalidConfig("batch_size must be positive".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::InvalidConfig(
                "learning_rate must be finite and non-negative".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return Err(ModelError::InvalidConfig(
                "Adam moments must lie in [0, 1) with epsilon > 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamCount {
    pub trainable: u64,
    pub total: u64,
    pub percent: f64,
}

/// Adapter entries (`6·d·r·L`) against the full parameter census, adapters included.
pub fn count_lora_params(cfg: &EncoderConfig) -> ParamCount {
    let d = cfg.model_dim as u64;
    let m = cfg.mlp_dim() as u64;
    let layers = cfg.num_layers as u64;
    let trainable = 6 * d * cfg.lora_rank as u64 * layers;

    let patch = cfg.patch_dim() as u64 * d + d;
    let tokens = d + cfg.num_tokens() as u64 * d;
    let per_layer = 4 * d + 4 * (d * d + d) + (d * m + m) + (m * d + d);
    let head = 2 * d + d * cfg.embed_dim as u64;
    let total = patch + tokens + layers * per_layer + head + trainable;
    ParamCount {
        trainable,
        total,
        percent: 100.0 * trainable as f64 / total as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vit_b16_census() {
        let c = count_lora_params(&EncoderConfig::vit_b16());
        assert_eq!(c.trainable, 884_736);
        assert_eq!(c.total, 86_191_872 + 884_736);
        assert!((c.percent - 1.016).abs() < 1e-3);
    }

    #[test]
    fn small_counts() {
        let mut cfg = EncoderConfig::toy();
        cfg.lora_rank = 4;
        assert_eq!(count_lora_params(&cfg).trainable, 3_072);
        cfg.lora_rank = 0;
        let c = count_lora_params(&cfg);
        assert_eq!((c.trainable, c.percent), (0, 0.0));
    }

    #[test]
    fn validation() {
        assert!(EncoderConfig::toy().validate().is_ok());
        let mut cfg = EncoderConfig::toy();
        cfg.patch_size = 5;
        assert!(cfg.validate().is_err());
        let mut cfg = EncoderConfig::toy();
        cfg.num_heads = 3;
        assert!(cfg.validate().is_err());
        let mut cfg = EncoderConfig::toy();
        cfg.temperature = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = EncoderConfig::toy();
        cfg.lora_rank = 65;
        assert!(cfg.validate().is_err());
        assert!(TrainConfig {
            percent: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            percent: 100.0,
            ..Default::default()
        }
        .validate()
        .is_ok());
    }
}
