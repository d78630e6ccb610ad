//! Model-backend contract: vision encoder, token embedder, transformer
//! trunk (without LM head), LM head, tokenizer, and greedy caption
//! generation — plus the shared domain types they exchange.
//!
//! The [`VlmBackend`] trait is the boundary every other module talks to; a
//! deterministic toy implementation lives in [`ToyBackend`]. A wrapper
//! around a real pretrained model can implement the same trait without
//! touching the rest of the crate.

mod grad;
mod toy;

pub use grad::{LoraGrads, TrunkCache};
pub use toy::ToyBackend;

use std::collections::HashMap;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, fnv1a};

/// Reserved token ids. Every vocabulary starts with these four.
pub const PAD_ID: u32 = 0;
pub const BOS_ID: u32 = 1;
pub const EOS_ID: u32 = 2;
pub const UNK_ID: u32 = 3;
pub const RESERVED_TOKENS: usize = 4;

/// Largest accepted image edge, in pixels.
pub const MAX_IMAGE_EDGE: usize = 8192;

/// Dimensions and seed of a backend instance. Two backends built from an
/// identical config (seed included) have bitwise-identical weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    /// Number of patch rows the vision encoder emits.
    pub vision_patch_count: usize,
    /// Width of vision features.
    pub vision_dim: usize,
    /// Width of token embeddings.
    pub text_dim: usize,
    /// Trunk width; also the width of trunk hidden states.
    pub hidden_dim: usize,
    /// Vocabulary size including the four reserved tokens.
    pub vocab_size: usize,
    /// Number of trunk layers.
    pub trunk_layers: usize,
    /// Context window: vision patches + prompt + generated tokens.
    pub max_seq_len: usize,
    pub seed: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            vision_patch_count: 6,
            vision_dim: 12,
            text_dim: 10,
            hidden_dim: 16,
            vocab_size: 64,
            trunk_layers: 2,
            max_seq_len: 64,
            seed: 0,
        }
    }
}

impl BackendConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vision_patch_count", self.vision_patch_count),
            ("vision_dim", self.vision_dim),
            ("text_dim", self.text_dim),
            ("hidden_dim", self.hidden_dim),
            ("trunk_layers", self.trunk_layers),
            ("max_seq_len", self.max_seq_len),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if self.vocab_size < RESERVED_TOKENS {
            return Err(Error::Config(format!(
                "vocab_size must be >= {RESERVED_TOKENS} (reserved pad/bos/eos/unk)"
            )));
        }
        Ok(())
    }

    /// Stable fingerprint of the configuration.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", fnv1a(json.as_bytes()))
    }
}

/// A sequence of token ids.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
}

impl TokenSequence {
    pub fn new(ids: Vec<u32>) -> Self {
        Self { ids }
    }

    pub fn empty() -> Self {
        Self { ids: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// A T×d matrix of finite reals; rows are per-token or per-patch vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Array2<f64>,
}

impl FeatureMatrix {
    /// Wrap a matrix, rejecting NaN/Inf entries.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if !math::all_finite(data.iter().copied()) {
            return Err(Error::InvalidInput(
                "feature matrix contains non-finite entries".into(),
            ));
        }
        Ok(Self { data })
    }

    /// An empty (0×cols) matrix.
    pub fn empty(cols: usize) -> Self {
        Self {
            data: Array2::zeros((0, cols)),
        }
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<f64> {
        self.data
    }
}

/// Pixel data with shape (channels, height, width), values finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pixels: Array3<f64>,
}

impl Image {
    pub fn from_gray(gray: Array2<f64>) -> Self {
        let (h, w) = gray.dim();
        let mut pixels = Array3::zeros((1, h, w));
        pixels.index_axis_mut(ndarray::Axis(0), 0).assign(&gray);
        Self { pixels }
    }

    pub fn from_channels(pixels: Array3<f64>) -> Self {
        Self { pixels }
    }

    pub fn channels(&self) -> usize {
        self.pixels.dim().0
    }

    pub fn height(&self) -> usize {
        self.pixels.dim().1
    }

    pub fn width(&self) -> usize {
        self.pixels.dim().2
    }

    pub fn pixels(&self) -> &Array3<f64> {
        &self.pixels
    }

    fn validate(&self) -> Result<()> {
        let (c, h, w) = self.pixels.dim();
        if c == 0 || h == 0 || w == 0 {
            return Err(Error::Shape(format!("empty image ({c}×{h}×{w})")));
        }
        if h > MAX_IMAGE_EDGE || w > MAX_IMAGE_EDGE {
            return Err(Error::Shape(format!(
                "image {h}×{w} exceeds maximum edge {MAX_IMAGE_EDGE}"
            )));
        }
        if !math::all_finite(self.pixels.iter().copied()) {
            return Err(Error::InvalidInput("image contains non-finite pixels".into()));
        }
        Ok(())
    }
}

/// Parameters behind a procedurally rendered image. Exposed so synthetic
/// caption text can describe the same structure the pixels show.
#[derive(Debug, Clone, Copy)]
pub struct SyntheticImageParams {
    pub pattern: u8,    // 0 stripes, 1 checker, 2 radial
    pub angle: f64,     // radians in [0, π)
    pub frequency: f64, // cycles per pixel
    pub brightness: f64,
    pub contrast: f64,
}

impl SyntheticImageParams {
    pub fn from_seed(seed: u64) -> Self {
        use rand::Rng;
        let mut rng = math::seeded_rng(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        Self {
            pattern: rng.random_range(0..3u8),
            angle: rng.random_range(0.0..std::f64::consts::PI),
            frequency: rng.random_range(0.05..0.45),
            brightness: rng.random_range(0.25..0.75),
            contrast: rng.random_range(0.1..0.25),
        }
    }
}

/// Deterministic procedural image for a seed: a periodic pattern with
/// seed-derived orientation, frequency, and tone.
pub fn render_synthetic_image(seed: u64, height: usize, width: usize) -> Image {
    let p = SyntheticImageParams::from_seed(seed);
    let (sin_a, cos_a) = p.angle.sin_cos();
    let tau = std::f64::consts::TAU;
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let mut gray = Array2::zeros((height, width));
    for y in 0..height {
        for x in 0..width {
            let (fx, fy) = (x as f64, y as f64);
            let u = fx * cos_a + fy * sin_a;
            let v = -fx * sin_a + fy * cos_a;
            let signal = match p.pattern {
                0 => (tau * p.frequency * u).sin(),
                1 => (tau * p.frequency * u).sin() * (tau * p.frequency * v).sin(),
                _ => {
                    let r = ((fx - cx).powi(2) + (fy - cy).powi(2)).sqrt();
                    (tau * p.frequency * r).sin()
                }
            };
            gray[[y, x]] = (p.brightness + p.contrast * signal).clamp(0.0, 1.0);
        }
    }
    Image::from_gray(gray)
}

/// Word-level vocabulary: four reserved ids followed by ranked words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    id_to_word: Vec<String>,
    word_to_id: HashMap<String, u32>,
}

impl Vocabulary {
    /// Build from words already ranked (index 0 becomes id 4).
    pub fn new(words: Vec<String>) -> Self {
        let mut id_to_word = vec![
            "<pad>".to_string(),
            "<bos>".to_string(),
            "<eos>".to_string(),
            "<unk>".to_string(),
        ];
        let mut word_to_id = HashMap::new();
        for w in words {
            if word_to_id.contains_key(&w) {
                continue;
            }
            word_to_id.insert(w.clone(), id_to_word.len() as u32);
            id_to_word.push(w);
        }
        Self {
            id_to_word,
            word_to_id,
        }
    }

    /// Specials only.
    pub fn minimal() -> Self {
        Self::new(Vec::new())
    }

    /// `n` generated placeholder words (`w0`..`w{n-1}`); handy in tests.
    pub fn numbered(n: usize) -> Self {
        Self::new((0..n).map(|i| format!("w{i}")).collect())
    }

    pub fn size(&self) -> usize {
        self.id_to_word.len()
    }

    pub fn id_of(&self, word: &str) -> Option<u32> {
        self.word_to_id.get(word).copied()
    }

    pub fn word_of(&self, id: u32) -> Option<&str> {
        self.id_to_word.get(id as usize).map(String::as_str)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.id_to_word.iter().skip(RESERVED_TOKENS).map(String::as_str)
    }

    /// Lowercase, whitespace-split, unknown words map to `<unk>`.
    pub fn tokenize(&self, text: &str) -> TokenSequence {
        let ids = text
            .split_whitespace()
            .map(|w| self.id_of(&w.to_lowercase()).unwrap_or(UNK_ID))
            .collect();
        TokenSequence::new(ids)
    }

    /// Inverse of [`tokenize`](Self::tokenize) up to whitespace
    /// normalization; pad/bos/eos are dropped.
    pub fn detokenize(&self, tokens: &TokenSequence) -> String {
        let mut words = Vec::new();
        for &id in &tokens.ids {
            match id {
                PAD_ID | BOS_ID | EOS_ID => {}
                _ => words.push(self.word_of(id).unwrap_or("<unk>")),
            }
        }
        words.join(" ")
    }
}

/// Result of greedy caption generation.
#[derive(Debug, Clone)]
pub struct Generation {
    pub caption: TokenSequence,
    /// Trunk hidden states at the generated positions: one row per caption
    /// token, width `hidden_dim`.
    pub caption_hidden: FeatureMatrix,
    /// Vision patches + prompt tokens preceding the caption.
    pub prefix_len: usize,
}

/// The model-backend contract. Implementations must be deterministic:
/// every method is a pure function of (config, inputs).
pub trait VlmBackend {
    fn config(&self) -> &BackendConfig;

    /// Image → `vision_patch_count` rows of width `vision_dim`.
    fn vision_encode(&self, image: &Image) -> Result<FeatureMatrix>;

    /// Token ids → one embedding row per token, width `text_dim`.
    fn embed_text(&self, tokens: &TokenSequence) -> Result<FeatureMatrix>;

    /// Vision features → trunk width.
    fn project_vision(&self, features: &FeatureMatrix) -> Result<FeatureMatrix>;

    /// Text embeddings → trunk width.
    fn project_text(&self, features: &FeatureMatrix) -> Result<FeatureMatrix>;

    /// Causal trunk: same row count in and out, `hidden_dim` columns.
    fn trunk_forward(&self, inputs: &FeatureMatrix) -> Result<FeatureMatrix>;

    /// Greedy decoding over `[vision ∘ prompt]`; stops at EOS or budget.
    fn generate_caption(
        &self,
        image: &Image,
        prompt: &TokenSequence,
        max_new_tokens: usize,
    ) -> Result<Generation>;

    fn tokenize(&self, text: &str) -> TokenSequence;

    fn detokenize(&self, tokens: &TokenSequence) -> String;
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn config_rejects_tiny_vocab_and_zero_dims() {
        let mut cfg = BackendConfig::default();
        cfg.vocab_size = 3;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = BackendConfig::default();
        cfg.hidden_dim = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_fingerprint_tracks_seed() {
        let a = BackendConfig::default();
        let mut b = a.clone();
        b.seed = 1;
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), BackendConfig::default().fingerprint());
    }

    #[test]
    fn feature_matrix_rejects_nan() {
        let m = array![[1.0, f64::NAN]];
        assert!(FeatureMatrix::new(m).is_err());
        assert_eq!(FeatureMatrix::empty(4).rows(), 0);
    }

    #[test]
    fn tokenize_normalizes_case_and_whitespace() {
        let vocab = Vocabulary::new(vec!["the".into(), "cat".into()]);
        let a = vocab.tokenize("The cat");
        let b = vocab.tokenize("the  cat");
        assert_eq!(a, b);
        assert_eq!(a.ids.len(), 2);
    }

    #[test]
    fn tokenize_empty_is_empty() {
        let vocab = Vocabulary::minimal();
        assert!(vocab.tokenize("").is_empty());
    }

    #[test]
    fn unknown_words_map_to_unk() {
        let vocab = Vocabulary::new(vec!["cat".into()]);
        let toks = vocab.tokenize("dog cat");
        assert_eq!(toks.ids[0], UNK_ID);
        assert_ne!(toks.ids[1], UNK_ID);
    }

    #[test]
    fn detokenize_round_trip_normalizes_whitespace() {
        let vocab = Vocabulary::new(vec!["a".into(), "striped".into(), "cat".into()]);
        let text = "A  striped\tcat";
        assert_eq!(vocab.detokenize(&vocab.tokenize(text)), "a striped cat");
    }

    #[test]
    fn synthetic_images_are_seed_deterministic_and_distinct() {
        let a = render_synthetic_image(7, 16, 16);
        let b = render_synthetic_image(7, 16, 16);
        let c = render_synthetic_image(8, 16, 16);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.pixels().iter().all(|p| (0.0..=1.0).contains(p)));
    }
}
