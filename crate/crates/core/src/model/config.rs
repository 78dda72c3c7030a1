use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which encoder tokens are handed on as features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSelect {
    /// Patch tokens only; the class token, if any, is dropped.
    Patch,
    /// Class token first, then patch tokens.
    ClassAndPatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    /// Side of the square input image in pixels.
    pub input_resolution: usize,
    pub patch_size: usize,
    pub channels: usize,
    pub embed_dim: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    /// Hidden width of the transformer MLP as a multiple of `embed_dim`.
    pub mlp_ratio: usize,
    pub class_token: bool,
    /// Side of the stored position-embedding grid; it is resampled to the
    /// patch grid when the two differ.
    pub pos_grid: usize,
    pub features: FeatureSelect,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self::toy()
    }
}

impl EncoderConfig {
    /// Small configuration that exercises every code path.
    pub fn toy() -> Self {
        Self {
            input_resolution: 16,
            patch_size: 4,
            channels: 3,
            embed_dim: 8,
            num_layers: 2,
            num_heads: 2,
            mlp_ratio: 4,
            class_token: true,
            pos_grid: 4,
            features: FeatureSelect::Patch,
        }
    }

    /// ViT-L/14 geometry at 448 px with a 24x24 stored position grid.
    pub fn paper_scale(num_layers: usize) -> Self {
        Self {
            input_resolution: 448,
            patch_size: 14,
            channels: 3,
            embed_dim: 1024,
            num_layers,
            num_heads: 16,
            mlp_ratio: 4,
            class_token: true,
            pos_grid: 24,
            features: FeatureSelect::Patch,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("input_resolution", self.input_resolution),
            ("patch_size", self.patch_size),
            ("channels", self.channels),
            ("embed_dim", self.embed_dim),
            ("num_heads", self.num_heads),
            ("mlp_ratio", self.mlp_ratio),
            ("pos_grid", self.pos_grid),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::invalid(format!("{name} must be positive")));
        }
        if !self.input_resolution.is_multiple_of(self.patch_size) {
            return Err(Error::invalid(format!(
                "resolution {} is not divisible by patch size {}",
                self.input_resolution, self.patch_size
            )));
        }
        if !self.embed_dim.is_multiple_of(self.num_heads) {
            return Err(Error::invalid(format!(
                "embed_dim {} is not divisible by {} heads",
                self.embed_dim, self.num_heads
            )));
        }
        if self.features == FeatureSelect::ClassAndPatch && !self.class_token {
            return Err(Error::invalid("class-token features requested without a class token"));
        }
        Ok(())
    }

    /// Patches per side.
    pub fn grid(&self) -> usize {
        self.input_resolution / self.patch_size
    }

    pub fn patch_tokens(&self) -> usize {
        self.grid() * self.grid()
    }

    /// Sequence length inside the transformer.
    pub fn sequence_len(&self) -> usize {
        self.patch_tokens() + usize::from(self.class_token)
    }

    /// Rows of the feature matrix returned by the encoder.
    pub fn feature_tokens(&self) -> usize {
        match self.features {
            FeatureSelect::Patch => self.patch_tokens(),
            FeatureSelect::ClassAndPatch => self.patch_tokens() + 1,
        }
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_size * self.patch_size * self.channels
    }
}
