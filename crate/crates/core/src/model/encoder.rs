//! Vision transformer encoder and the shared-weight (Siamese) feature
//! extractor for bi-temporal pairs.

use ndarray::{concatenate, s, Array1, Array2, Array3, Axis};
use rand::Rng;

use super::config::{EncoderConfig, FeatureSelect};
use super::ops::{affine, gelu, layer_norm, random_matrix, random_vector, softmax_rows};
use super::pos_embed::PositionEmbedding;
use super::weights_file::TensorStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub ln1_gamma: Array1<f64>,
    pub ln1_beta: Array1<f64>,
    /// `D x 3D`, columns ordered query, key, value.
    pub qkv: Array2<f64>,
    pub qkv_bias: Array1<f64>,
    pub proj: Array2<f64>,
    pub proj_bias: Array1<f64>,
    pub ln2_gamma: Array1<f64>,
    pub ln2_beta: Array1<f64>,
    pub fc1: Array2<f64>,
    pub fc1_bias: Array1<f64>,
    pub fc2: Array2<f64>,
    pub fc2_bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderWeights {
    /// `patch_dim x D`; patch pixels are flattened row, column, channel.
    pub patch_proj: Array2<f64>,
    pub patch_bias: Array1<f64>,
    pub class_embedding: Option<Array1<f64>>,
    pub pos_embed: PositionEmbedding,
    pub pre_ln_gamma: Array1<f64>,
    pub pre_ln_beta: Array1<f64>,
    pub layers: Vec<LayerWeights>,
}

impl EncoderWeights {
    /// Random weights (normal, std 0.02; unit layer-norm gains).
    pub fn random(config: &EncoderConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let d = config.embed_dim;
        let hidden = d * config.mlp_ratio;
        let std = 0.02;
        let layers = (0..config.num_layers)
            .map(|_| LayerWeights {
                ln1_gamma: Array1::ones(d),
                ln1_beta: Array1::zeros(d),
                qkv: random_matrix(d, 3 * d, std, rng),
                qkv_bias: random_vector(3 * d, std, rng),
                proj: random_matrix(d, d, std, rng),
                proj_bias: random_vector(d, std, rng),
                ln2_gamma: Array1::ones(d),
                ln2_beta: Array1::zeros(d),
                fc1: random_matrix(d, hidden, std, rng),
                fc1_bias: random_vector(hidden, std, rng),
                fc2: random_matrix(hidden, d, std, rng),
                fc2_bias: random_vector(d, std, rng),
            })
            .collect();
        let normal_grid = random_matrix(config.pos_grid * config.pos_grid, d, std, rng);
        Ok(Self {
            patch_proj: random_matrix(config.patch_dim(), d, std, rng),
            patch_bias: random_vector(d, std, rng),
            class_embedding: config.class_token.then(|| random_vector(d, std, rng)),
            pos_embed: PositionEmbedding {
                class: config.class_token.then(|| random_vector(d, std, rng)),
                grid: normal_grid
                    .into_shape_with_order((config.pos_grid, config.pos_grid, d))
                    .expect("element count matches"),
            },
            pre_ln_gamma: Array1::ones(d),
            pre_ln_beta: Array1::zeros(d),
            layers,
        })
    }

    /// Checks every tensor against `config`.
    pub fn check(&self, config: &EncoderConfig) -> Result<()> {
        config.validate()?;
        let d = config.embed_dim;
        let hidden = d * config.mlp_ratio;
        let mut problems = Vec::new();
        let expect = |problems: &mut Vec<String>, name: &str, got: &[usize], want: &[usize]| {
            if got != want {
                problems.push(format!("{name}: expected {want:?}, got {got:?}"));
            }
        };
        expect(
            &mut problems,
            "patch_proj",
            self.patch_proj.shape(),
            &[config.patch_dim(), d],
        );
        expect(&mut problems, "patch_bias", self.patch_bias.shape(), &[d]);
        expect(
            &mut problems,
            "pos_embed.grid",
            self.pos_embed.grid.shape(),
            &[config.pos_grid, config.pos_grid, d],
        );
        expect(&mut problems, "pre_ln_gamma", self.pre_ln_gamma.shape(), &[d]);
        expect(&mut problems, "pre_ln_beta", self.pre_ln_beta.shape(), &[d]);
        match (&self.class_embedding, &self.pos_embed.class, config.class_token) {
            (Some(c), Some(p), true) => {
                expect(&mut problems, "class_embedding", c.shape(), &[d]);
                expect(&mut problems, "pos_embed.class", p.shape(), &[d]);
            }
            (None, None, false) => {}
            _ => problems.push("class token weights disagree with config".into()),
        }
        if self.layers.len() != config.num_layers {
            problems.push(format!(
                "expected {} layers, got {}",
                config.num_layers,
                self.layers.len()
            ));
        }
        for (i, l) in self.layers.iter().enumerate() {
            let mut e =
                |n: &str, got: &[usize], want: &[usize]| expect(&mut problems, &format!("layers.{i}.{n}"), got, want);
            e("ln1_gamma", l.ln1_gamma.shape(), &[d]);
            e("ln1_beta", l.ln1_beta.shape(), &[d]);
            e("qkv", l.qkv.shape(), &[d, 3 * d]);
            e("qkv_bias", l.qkv_bias.shape(), &[3 * d]);
            e("proj", l.proj.shape(), &[d, d]);
            e("proj_bias", l.proj_bias.shape(), &[d]);
            e("ln2_gamma", l.ln2_gamma.shape(), &[d]);
            e("ln2_beta", l.ln2_beta.shape(), &[d]);
            e("fc1", l.fc1.shape(), &[d, hidden]);
            e("fc1_bias", l.fc1_bias.shape(), &[hidden]);
            e("fc2", l.fc2.shape(), &[hidden, d]);
            e("fc2_bias", l.fc2_bias.shape(), &[d]);
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::shape(problems.join("; ")))
        }
    }

    pub fn to_store(&self, store: &mut TensorStore, prefix: &str) {
        store.insert2(format!("{prefix}patch_proj.weight"), &self.patch_proj);
        store.insert1(format!("{prefix}patch_proj.bias"), &self.patch_bias);
        if let Some(c) = &self.class_embedding {
            store.insert1(format!("{prefix}class_embedding"), c);
        }
        if let Some(c) = &self.pos_embed.class {
            store.insert1(format!("{prefix}pos_embed.class"), c);
        }
        store.insert3(format!("{prefix}pos_embed.grid"), &self.pos_embed.grid);
        store.insert1(format!("{prefix}pre_ln.gamma"), &self.pre_ln_gamma);
        store.insert1(format!("{prefix}pre_ln.beta"), &self.pre_ln_beta);
        for (i, l) in self.layers.iter().enumerate() {
            let p = format!("{prefix}layers.{i}.");
            store.insert1(format!("{p}ln1.gamma"), &l.ln1_gamma);
            store.insert1(format!("{p}ln1.beta"), &l.ln1_beta);
            store.insert2(format!("{p}attn.qkv.weight"), &l.qkv);
            store.insert1(format!("{p}attn.qkv.bias"), &l.qkv_bias);
            store.insert2(format!("{p}attn.proj.weight"), &l.proj);
            store.insert1(format!("{p}attn.proj.bias"), &l.proj_bias);
            store.insert1(format!("{p}ln2.gamma"), &l.ln2_gamma);
            store.insert1(format!("{p}ln2.beta"), &l.ln2_beta);
            store.insert2(format!("{p}mlp.fc1.weight"), &l.fc1);
            store.insert1(format!("{p}mlp.fc1.bias"), &l.fc1_bias);
            store.insert2(format!("{p}mlp.fc2.weight"), &l.fc2);
            store.insert1(format!("{p}mlp.fc2.bias"), &l.fc2_bias);
        }
    }

    pub fn from_store(store: &TensorStore, prefix: &str, config: &EncoderConfig) -> Result<Self> {
        let optional = |name: String| -> Result<Option<Array1<f64>>> {
            if store.contains(&name) {
                store.get1(&name).map(Some)
            } else {
                Ok(None)
            }
        };
        let layers = (0..config.num_layers)
            .map(|i| {
                let p = format!("{prefix}layers.{i}.");
                Ok(LayerWeights {
                    ln1_gamma: store.get1(&format!("{p}ln1.gamma"))?,
                    ln1_beta: store.get1(&format!("{p}ln1.beta"))?,
                    qkv: store.get2(&format!("{p}attn.qkv.weight"))?,
                    qkv_bias: store.get1(&format!("{p}attn.qkv.bias"))?,
                    proj: store.get2(&format!("{p}attn.proj.weight"))?,
                    proj_bias: store.get1(&format!("{p}attn.proj.bias"))?,
                    ln2_gamma: store.get1(&format!("{p}ln2.gamma"))?,
                    ln2_beta: store.get1(&format!("{p}ln2.beta"))?,
                    fc1: store.get2(&format!("{p}mlp.fc1.weight"))?,
                    fc1_bias: store.get1(&format!("{p}mlp.fc1.bias"))?,
                    fc2: store.get2(&format!("{p}mlp.fc2.weight"))?,
                    fc2_bias: store.get1(&format!("{p}mlp.fc2.bias"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let weights = Self {
            patch_proj: store.get2(&format!("{prefix}patch_proj.weight"))?,
            patch_bias: store.get1(&format!("{prefix}patch_proj.bias"))?,
            class_embedding: optional(format!("{prefix}class_embedding"))?,
            pos_embed: PositionEmbedding {
                class: optional(format!("{prefix}pos_embed.class"))?,
                grid: store.get3(&format!("{prefix}pos_embed.grid"))?,
            },
            pre_ln_gamma: store.get1(&format!("{prefix}pre_ln.gamma"))?,
            pre_ln_beta: store.get1(&format!("{prefix}pre_ln.beta"))?,
            layers,
        };
        weights.check(config)?;
        Ok(weights)
    }
}

/// Flattens non-overlapping patches in row-major patch order.
fn patchify(image: &Array3<f64>, patch: usize) -> Array2<f64> {
    let (h, w, c) = image.dim();
    let (gh, gw) = (h / patch, w / patch);
    let mut out = Array2::zeros((gh * gw, patch * patch * c));
    for py in 0..gh {
        for px in 0..gw {
            let block = image.slice(s![py * patch..(py + 1) * patch, px * patch..(px + 1) * patch, ..]);
            let mut row = out.row_mut(py * gw + px);
            for (dst, src) in row.iter_mut().zip(block.iter()) {
                *dst = *src;
            }
        }
    }
    out
}

fn attention(x: &Array2<f64>, layer: &LayerWeights, heads: usize) -> Array2<f64> {
    let (tokens, d) = x.dim();
    let head_dim = d / heads;
    let qkv = affine(x, &layer.qkv, &layer.qkv_bias);
    let scale = 1.0 / (head_dim as f64).sqrt();
    let mut merged = Array2::zeros((tokens, d));
    for h in 0..heads {
        let cols = h * head_dim..(h + 1) * head_dim;
        let q = qkv.slice(s![.., cols.clone()]);
        let k = qkv.slice(s![.., d + cols.start..d + cols.end]);
        let v = qkv.slice(s![.., 2 * d + cols.start..2 * d + cols.end]);
        let mut scores = q.dot(&k.t()) * scale;
        softmax_rows(&mut scores);
        merged.slice_mut(s![.., cols]).assign(&scores.dot(&v));
    }
    affine(&merged, &layer.proj, &layer.proj_bias)
}

fn transformer_layer(x: &mut Array2<f64>, layer: &LayerWeights, heads: usize) {
    let normed = layer_norm(x, &layer.ln1_gamma, &layer.ln1_beta);
    *x += &attention(&normed, layer, heads);
    let normed = layer_norm(x, &layer.ln2_gamma, &layer.ln2_beta);
    let hidden = affine(&normed, &layer.fc1, &layer.fc1_bias).mapv_into(gelu);
    *x += &affine(&hidden, &layer.fc2, &layer.fc2_bias);
}

/// Encodes one `H x W x C` image into `T x D` token features: patch
/// embedding, (interpolated) position embedding, pre-norm transformer
/// layers, then token selection.
pub fn encode(image: &Array3<f64>, config: &EncoderConfig, weights: &EncoderWeights) -> Result<Array2<f64>> {
    weights.check(config)?;
    let expected = (config.input_resolution, config.input_resolution, config.channels);
    if image.dim() != expected {
        return Err(Error::shape(format!(
            "image shape {:?} does not match encoder input {expected:?}",
            image.dim()
        )));
    }
    let d = config.embed_dim;
    let mut patches = affine(
        &patchify(image, config.patch_size),
        &weights.patch_proj,
        &weights.patch_bias,
    );

    let pos = weights.pos_embed.interpolate(config.grid())?;
    let pos_grid = pos
        .grid
        .into_shape_with_order((config.patch_tokens(), d))
        .expect("element count matches");
    patches += &pos_grid;

    let mut x = match (&weights.class_embedding, &pos.class) {
        (Some(cls), Some(cls_pos)) => {
            let row = (cls + cls_pos).insert_axis(Axis(0));
            concatenate(Axis(0), &[row.view(), patches.view()]).expect("widths match")
        }
        _ => patches,
    };
    x = layer_norm(&x, &weights.pre_ln_gamma, &weights.pre_ln_beta);
    for layer in &weights.layers {
        transformer_layer(&mut x, layer, config.num_heads);
    }

    Ok(match (config.features, config.class_token) {
        (FeatureSelect::Patch, true) => x.slice(s![1.., ..]).to_owned(),
        _ => x,
    })
}

/// Encodes both images with the same weights and concatenates the
/// features along the embedding axis: columns `[0, D)` hold the pre-change
/// features, `[D, 2D)` the post-change ones.
pub fn siamese_concat(
    pre: &Array3<f64>,
    post: &Array3<f64>,
    config: &EncoderConfig,
    weights: &EncoderWeights,
) -> Result<Array2<f64>> {
    if pre.dim() != post.dim() {
        return Err(Error::shape(format!(
            "pre image {:?} and post image {:?} differ in shape",
            pre.dim(),
            post.dim()
        )));
    }
    let a = encode(pre, config, weights)?;
    let b = encode(post, config, weights)?;
    Ok(concatenate(Axis(1), &[a.view(), b.view()]).expect("token counts match"))
}
