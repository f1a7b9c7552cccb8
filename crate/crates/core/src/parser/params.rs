use ndarray::{Array2, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Training and architecture settings for one parser run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub decay_rate: f64,
    pub decay_steps: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub word_dim: usize,
    pub char_dim: usize,
    pub char_filters: usize,
    /// Convolution width over characters (odd).
    pub char_window: usize,
    pub pos_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub arc_dim: usize,
    pub label_dim: usize,
    pub input_dropout: f64,
    pub hidden_dropout: f64,
    /// Rescale the gradient when its global norm exceeds this value.
    pub clip_norm: Option<f64>,
    pub min_frequency: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            learning_rate: 0.5,
            decay_rate: 0.75,
            decay_steps: 5000,
            max_epochs: 200,
            patience: 20,
            batch_size: 16,
            word_dim: 32,
            char_dim: 16,
            char_filters: 16,
            char_window: 3,
            pos_dim: 8,
            hidden: 64,
            layers: 1,
            arc_dim: 64,
            label_dim: 32,
            input_dropout: 0.0,
            hidden_dropout: 0.0,
            clip_norm: Some(5.0),
            min_frequency: 2,
            seed: 1,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return invalid(format!("learning_rate must be >= 0, got {}", self.learning_rate));
        }
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) {
            return invalid(format!("decay_rate must lie in (0, 1], got {}", self.decay_rate));
        }
        if self.decay_steps == 0 || self.batch_size == 0 {
            return invalid("decay_steps and batch_size must be positive");
        }
        if self.patience > self.max_epochs {
            return invalid(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            ));
        }
        let dims = [
            self.word_dim,
            self.char_dim,
            self.char_filters,
            self.char_window,
            self.pos_dim,
            self.hidden,
            self.layers,
            self.arc_dim,
            self.label_dim,
        ];
        if dims.iter().any(|&d| d == 0) {
            return invalid("all dimensions must be positive");
        }
        if self.char_window % 2 == 0 {
            return invalid("char_window must be odd");
        }
        for p in [self.input_dropout, self.hidden_dropout] {
            if !(0.0..1.0).contains(&p) {
                return invalid(format!("dropout must lie in [0, 1), got {p}"));
            }
        }
        Ok(())
    }

    /// Step size after `step` updates: `lr * decay_rate^(step / decay_steps)`.
    pub fn step_size(&self, step: usize) -> f64 {
        self.learning_rate * self.decay_rate.powf(step as f64 / self.decay_steps as f64)
    }
}

/// Sizes that come from the data rather than the hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inventory {
    pub words: usize,
    pub chars: usize,
    pub tags: usize,
    pub labels: usize,
    /// Dimension of the static vectors, 0 when none are used.
    pub static_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmDirection {
    /// Input to gates, `in x 4H`, gate blocks ordered input, forget, output, cell.
    pub w_input: Array2<f64>,
    /// Recurrent weights, `H x 4H`.
    pub w_hidden: Array2<f64>,
    pub bias: Array2<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmLayer {
    pub forward: LstmDirection,
    pub backward: LstmDirection,
}

/// All trainable tensors. Gradients use the same type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParserParams {
    pub word_emb: Array2<f64>,
    /// Trainable fallback for tokens without a pre-trained vector (`1 x static_dim`).
    pub static_unk: Array2<f64>,
    pub char_emb: Array2<f64>,
    /// `(window * char_dim) x filters`
    pub char_conv: Array2<f64>,
    pub char_conv_bias: Array2<f64>,
    pub pos_emb: Array2<f64>,
    pub lstm: Vec<LstmLayer>,
    /// Context vector of the artificial root (`1 x 2H`).
    pub root: Array2<f64>,
    pub arc_head_w: Array2<f64>,
    pub arc_head_b: Array2<f64>,
    pub arc_dep_w: Array2<f64>,
    pub arc_dep_b: Array2<f64>,
    /// Bilinear arc term, `arc_dim x arc_dim`.
    pub arc_u: Array2<f64>,
    /// Head-only arc term (`1 x arc_dim`).
    pub arc_head_bias: Array2<f64>,
    pub arc_bias: Array2<f64>,
    pub label_head_w: Array2<f64>,
    pub label_head_b: Array2<f64>,
    pub label_dep_w: Array2<f64>,
    pub label_dep_b: Array2<f64>,
    /// One `label_dim x label_dim` block per relation, stacked row-wise.
    pub label_u: Array2<f64>,
    /// `labels x label_dim`
    pub label_head_lin: Array2<f64>,
    pub label_dep_lin: Array2<f64>,
    pub label_bias: Array2<f64>,
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-limit..limit))
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-scale..scale))
}

impl ParserParams {
    pub fn input_dim(hp: &Hyperparams, inv: &Inventory) -> usize {
        inv.static_dim + hp.word_dim + hp.char_filters + hp.pos_dim
    }

    /// Seeded initialization.
    pub fn init(hp: &Hyperparams, inv: &Inventory, rng: &mut ChaCha8Rng) -> Self {
        let h = hp.hidden;
        let lstm = (0..hp.layers)
            .map(|layer| {
                let input = if layer == 0 {
                    Self::input_dim(hp, inv)
                } else {
                    2 * h
                };
                let mut direction = || {
                    let mut bias = Array2::zeros((1, 4 * h));
                    // forget gate starts open
                    bias.slice_mut(ndarray::s![.., h..2 * h]).fill(1.0);
                    LstmDirection {
                        w_input: glorot(rng, input, 4 * h),
                        w_hidden: glorot(rng, h, 4 * h),
                        bias,
                    }
                };
                LstmLayer {
                    forward: direction(),
                    backward: direction(),
                }
            })
            .collect();
        let (da, dl, r) = (hp.arc_dim, hp.label_dim, inv.labels);
        ParserParams {
            word_emb: uniform(rng, inv.words, hp.word_dim, 0.1),
            static_unk: Array2::zeros((1, inv.static_dim)),
            char_emb: uniform(rng, inv.chars, hp.char_dim, 0.1),
            char_conv: glorot(rng, hp.char_window * hp.char_dim, hp.char_filters),
            char_conv_bias: Array2::zeros((1, hp.char_filters)),
            pos_emb: uniform(rng, inv.tags, hp.pos_dim, 0.5),
            lstm,
            root: uniform(rng, 1, 2 * h, 0.1),
            arc_head_w: glorot(rng, 2 * h, da),
            arc_head_b: Array2::zeros((1, da)),
            arc_dep_w: glorot(rng, 2 * h, da),
            arc_dep_b: Array2::zeros((1, da)),
            arc_u: glorot(rng, da, da),
            arc_head_bias: Array2::zeros((1, da)),
            arc_bias: Array2::zeros((1, 1)),
            label_head_w: glorot(rng, 2 * h, dl),
            label_head_b: Array2::zeros((1, dl)),
            label_dep_w: glorot(rng, 2 * h, dl),
            label_dep_b: Array2::zeros((1, dl)),
            label_u: glorot(rng, r * dl, dl),
            label_head_lin: Array2::zeros((r, dl)),
            label_dep_lin: Array2::zeros((r, dl)),
            label_bias: Array2::zeros((1, r)),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    pub fn hidden(&self) -> usize {
        self.root.ncols() / 2
    }

    /// Every tensor with a stable name, in a fixed order.
    pub fn named(&self) -> Vec<(String, &Array2<f64>)> {
        let mut out: Vec<(String, &Array2<f64>)> = vec![
            ("word_emb".into(), &self.word_emb),
            ("static_unk".into(), &self.static_unk),
            ("char_emb".into(), &self.char_emb),
            ("char_conv".into(), &self.char_conv),
            ("char_conv_bias".into(), &self.char_conv_bias),
            ("pos_emb".into(), &self.pos_emb),
        ];
        for (i, layer) in self.lstm.iter().enumerate() {
            for (dir, d) in [("fwd", &layer.forward), ("bwd", &layer.backward)] {
                out.push((format!("lstm{i}_{dir}_w_input"), &d.w_input));
                out.push((format!("lstm{i}_{dir}_w_hidden"), &d.w_hidden));
                out.push((format!("lstm{i}_{dir}_bias"), &d.bias));
            }
        }
        out.extend([
            ("root".into(), &self.root),
            ("arc_head_w".into(), &self.arc_head_w),
            ("arc_head_b".into(), &self.arc_head_b),
            ("arc_dep_w".into(), &self.arc_dep_w),
            ("arc_dep_b".into(), &self.arc_dep_b),
            ("arc_u".into(), &self.arc_u),
            ("arc_head_bias".into(), &self.arc_head_bias),
            ("arc_bias".into(), &self.arc_bias),
            ("label_head_w".into(), &self.label_head_w),
            ("label_head_b".into(), &self.label_head_b),
            ("label_dep_w".into(), &self.label_dep_w),
            ("label_dep_b".into(), &self.label_dep_b),
            ("label_u".into(), &self.label_u),
            ("label_head_lin".into(), &self.label_head_lin),
            ("label_dep_lin".into(), &self.label_dep_lin),
            ("label_bias".into(), &self.label_bias),
        ]);
        out
    }

    /// Mutable counterpart of [`ParserParams::named`], same order.
    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out: Vec<&mut Array2<f64>> = vec![
            &mut self.word_emb,
            &mut self.static_unk,
            &mut self.char_emb,
            &mut self.char_conv,
            &mut self.char_conv_bias,
            &mut self.pos_emb,
        ];
        for layer in self.lstm.iter_mut() {
            for d in [&mut layer.forward, &mut layer.backward] {
                out.push(&mut d.w_input);
                out.push(&mut d.w_hidden);
                out.push(&mut d.bias);
            }
        }
        out.extend([
            &mut self.root,
            &mut self.arc_head_w,
            &mut self.arc_head_b,
            &mut self.arc_dep_w,
            &mut self.arc_dep_b,
            &mut self.arc_u,
            &mut self.arc_head_bias,
            &mut self.arc_bias,
            &mut self.label_head_w,
            &mut self.label_head_b,
            &mut self.label_dep_w,
            &mut self.label_dep_b,
            &mut self.label_u,
            &mut self.label_head_lin,
            &mut self.label_dep_lin,
            &mut self.label_bias,
        ]);
        out
    }

    pub fn names(&self) -> Vec<String> {
        self.named().into_iter().map(|(n, _)| n).collect()
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ParserParams, scale: f64) {
        for (t, (_, o)) in self.tensors_mut().into_iter().zip(other.named()) {
            Zip::from(t).and(o).for_each(|a, &b| *a += scale * b);
        }
    }

    pub fn norm(&self) -> f64 {
        self.named()
            .iter()
            .map(|(_, t)| t.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.named().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.mapv_inplace(|v| v * factor);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn inv() -> Inventory {
        Inventory {
            words: 5,
            chars: 6,
            tags: 4,
            labels: 3,
            static_dim: 2,
        }
    }

    #[test]
    fn shapes_are_consistent() {
        let hp = Hyperparams {
            layers: 2,
            ..Default::default()
        };
        let p = ParserParams::init(&hp, &inv(), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(p.lstm[0].forward.w_input.nrows(), ParserParams::input_dim(&hp, &inv()));
        assert_eq!(p.lstm[1].forward.w_input.nrows(), 2 * hp.hidden);
        assert_eq!(p.arc_head_w.ncols(), p.arc_u.nrows());
        assert_eq!(p.arc_dep_w.ncols(), p.arc_u.ncols());
        assert_eq!(p.label_u.nrows(), 3 * hp.label_dim);
        assert_eq!(p.hidden(), hp.hidden);
        assert!(p.all_finite());
    }

    #[test]
    fn seeded_init_is_deterministic() {
        let hp = Hyperparams::default();
        let a = ParserParams::init(&hp, &inv(), &mut ChaCha8Rng::seed_from_u64(4));
        let b = ParserParams::init(&hp, &inv(), &mut ChaCha8Rng::seed_from_u64(4));
        let c = ParserParams::init(&hp, &inv(), &mut ChaCha8Rng::seed_from_u64(5));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn validation() {
        assert!(Hyperparams::default().validate().is_ok());
        let bad = [
            Hyperparams { patience: 300, ..Default::default() },
            Hyperparams { decay_rate: 0.0, ..Default::default() },
            Hyperparams { hidden: 0, ..Default::default() },
            Hyperparams { char_window: 2, ..Default::default() },
            Hyperparams { input_dropout: 1.0, ..Default::default() },
        ];
        for hp in bad {
            assert!(hp.validate().is_err(), "{hp:?}");
        }
    }

    #[test]
    fn decay_schedule() {
        let hp = Hyperparams {
            learning_rate: 2.0,
            decay_rate: 0.5,
            decay_steps: 10,
            ..Default::default()
        };
        assert_eq!(hp.step_size(0), 2.0);
        assert!((hp.step_size(10) - 1.0).abs() < 1e-12);
        assert!((hp.step_size(5) - 2.0 * 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn add_scaled_and_norm() {
        let hp = Hyperparams { hidden: 4, arc_dim: 3, label_dim: 2, ..Default::default() };
        let p = ParserParams::init(&hp, &inv(), &mut ChaCha8Rng::seed_from_u64(1));
        let mut q = p.clone();
        q.add_scaled(&p, -1.0);
        assert_eq!(q.norm(), 0.0);
        assert_eq!(p.names().len(), 6 + 6 + 16);
    }
}
