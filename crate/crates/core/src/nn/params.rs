use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;

pub(crate) const INIT_STD: f64 = 0.02;

/// One encoder block. Projection matrices are stored input-major (`x · W`).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub wq: Array2<f64>,
    pub bq: Array1<f64>,
    pub wk: Array2<f64>,
    pub bk: Array1<f64>,
    pub wv: Array2<f64>,
    pub bv: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
    pub ln1_gamma: Array1<f64>,
    pub ln1_beta: Array1<f64>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub ln2_gamma: Array1<f64>,
    pub ln2_beta: Array1<f64>,
}

/// All trainable arrays. Gradients and optimizer moments reuse this type.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub token_emb: Array2<f64>,
    pub position_emb: Array2<f64>,
    pub segment_emb: Array2<f64>,
    pub layers: Vec<LayerParams>,
    /// `H × V` projection for masked-token prediction.
    pub mlm_w: Array2<f64>,
    pub mlm_b: Array1<f64>,
    /// `K × H` classifier weight.
    pub cls_w: Array2<f64>,
    pub cls_b: Array1<f64>,
}

/// A named, shaped view of one parameter array.
pub struct TensorRef<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: &'a [f64],
}

fn normal_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let dist = Normal::new(0.0, INIT_STD).expect("valid std");
    Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
}

impl LayerParams {
    fn init(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let h = cfg.hidden_dim;
        let f = cfg.ff_dim;
        Self {
            wq: normal_matrix(h, h, rng),
            bq: Array1::zeros(h),
            wk: normal_matrix(h, h, rng),
            bk: Array1::zeros(h),
            wv: normal_matrix(h, h, rng),
            bv: Array1::zeros(h),
            wo: normal_matrix(h, h, rng),
            bo: Array1::zeros(h),
            ln1_gamma: Array1::ones(h),
            ln1_beta: Array1::zeros(h),
            w1: normal_matrix(h, f, rng),
            b1: Array1::zeros(f),
            w2: normal_matrix(f, h, rng),
            b2: Array1::zeros(h),
            ln2_gamma: Array1::ones(h),
            ln2_beta: Array1::zeros(h),
        }
    }

    fn zeros_like(&self) -> Self {
        let z2 = |a: &Array2<f64>| Array2::zeros(a.raw_dim());
        let z1 = |a: &Array1<f64>| Array1::zeros(a.len());
        Self {
            wq: z2(&self.wq),
            bq: z1(&self.bq),
            wk: z2(&self.wk),
            bk: z1(&self.bk),
            wv: z2(&self.wv),
            bv: z1(&self.bv),
            wo: z2(&self.wo),
            bo: z1(&self.bo),
            ln1_gamma: z1(&self.ln1_gamma),
            ln1_beta: z1(&self.ln1_beta),
            w1: z2(&self.w1),
            b1: z1(&self.b1),
            w2: z2(&self.w2),
            b2: z1(&self.b2),
            ln2_gamma: z1(&self.ln2_gamma),
            ln2_beta: z1(&self.ln2_beta),
        }
    }
}

macro_rules! layer_fields {
    ($m:ident) => {
        $m!(wq, bq, wk, bk, wv, bv, wo, bo, ln1_gamma, ln1_beta, w1, b1, w2, b2, ln2_gamma, ln2_beta)
    };
}

impl ModelParams {
    /// Weights ~ N(0, 0.02²), biases 0, layer-norm scales 1.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = cfg.hidden_dim;
        let token_emb = normal_matrix(cfg.vocab_size, h, &mut rng);
        let position_emb = normal_matrix(cfg.max_len, h, &mut rng);
        let segment_emb = normal_matrix(2, h, &mut rng);
        let layers = (0..cfg.num_layers)
            .map(|_| LayerParams::init(cfg, &mut rng))
            .collect();
        let mlm_w = normal_matrix(h, cfg.vocab_size, &mut rng);
        let cls_w = normal_matrix(cfg.num_labels, h, &mut rng);
        Self {
            token_emb,
            position_emb,
            segment_emb,
            layers,
            mlm_w,
            mlm_b: Array1::zeros(cfg.vocab_size),
            cls_w,
            cls_b: Array1::zeros(cfg.num_labels),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            token_emb: Array2::zeros(self.token_emb.raw_dim()),
            position_emb: Array2::zeros(self.position_emb.raw_dim()),
            segment_emb: Array2::zeros(self.segment_emb.raw_dim()),
            layers: self.layers.iter().map(LayerParams::zeros_like).collect(),
            mlm_w: Array2::zeros(self.mlm_w.raw_dim()),
            mlm_b: Array1::zeros(self.mlm_b.len()),
            cls_w: Array2::zeros(self.cls_w.raw_dim()),
            cls_b: Array1::zeros(self.cls_b.len()),
        }
    }

    /// Replaces the classifier with a freshly initialised `num_labels`-way head.
    pub fn reset_classifier(&mut self, num_labels: usize, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.cls_w = normal_matrix(num_labels, self.hidden_dim(), &mut rng);
        self.cls_b = Array1::zeros(num_labels);
    }

    pub fn hidden_dim(&self) -> usize {
        self.token_emb.ncols()
    }

    pub fn num_labels(&self) -> usize {
        self.cls_b.len()
    }

    /// Parameters in manifest order.
    pub fn tensors(&self) -> Vec<TensorRef<'_>> {
        fn t2<'a>(name: String, a: &'a Array2<f64>) -> TensorRef<'a> {
            TensorRef {
                name,
                shape: a.shape().to_vec(),
                data: a.as_slice().expect("standard layout"),
            }
        }
        fn t1<'a>(name: String, a: &'a Array1<f64>) -> TensorRef<'a> {
            TensorRef {
                name,
                shape: vec![a.len()],
                data: a.as_slice().expect("standard layout"),
            }
        }
        trait Named {
            fn named(&self, name: String) -> TensorRef<'_>;
        }
        impl Named for Array2<f64> {
            fn named(&self, name: String) -> TensorRef<'_> {
                t2(name, self)
            }
        }
        impl Named for Array1<f64> {
            fn named(&self, name: String) -> TensorRef<'_> {
                t1(name, self)
            }
        }

        let mut out = vec![
            t2("token_emb".into(), &self.token_emb),
            t2("position_emb".into(), &self.position_emb),
            t2("segment_emb".into(), &self.segment_emb),
        ];
        for (i, l) in self.layers.iter().enumerate() {
            macro_rules! push {
                ($($f:ident),*) => {
                    $( out.push(l.$f.named(format!("layer{i}.{}", stringify!($f)))); )*
                };
            }
            layer_fields!(push);
        }
        out.push(t2("mlm_w".into(), &self.mlm_w));
        out.push(t1("mlm_b".into(), &self.mlm_b));
        out.push(t2("cls_w".into(), &self.cls_w));
        out.push(t1("cls_b".into(), &self.cls_b));
        out
    }

    /// Mutable slices in the same order as [`Self::tensors`].
    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![
            self.token_emb.as_slice_mut().expect("standard layout"),
            self.position_emb.as_slice_mut().expect("standard layout"),
            self.segment_emb.as_slice_mut().expect("standard layout"),
        ];
        for l in self.layers.iter_mut() {
            macro_rules! push {
                ($($f:ident),*) => {
                    $( out.push(l.$f.as_slice_mut().expect("standard layout")); )*
                };
            }
            layer_fields!(push);
        }
        out.push(self.mlm_w.as_slice_mut().expect("standard layout"));
        out.push(self.mlm_b.as_slice_mut().expect("standard layout"));
        out.push(self.cls_w.as_slice_mut().expect("standard layout"));
        out.push(self.cls_b.as_slice_mut().expect("standard layout"));
        out
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.data.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    /// Rounds every entry to the nearest 32-bit float (the checkpoint precision).
    pub fn quantize_f32(&mut self) {
        for s in self.slices_mut() {
            for v in s.iter_mut() {
                *v = *v as f32 as f64;
            }
        }
    }

    /// Shapes consistent with `cfg`.
    pub fn matches(&self, cfg: &ModelConfig) -> bool {
        let h = cfg.hidden_dim;
        self.token_emb.dim() == (cfg.vocab_size, h)
            && self.position_emb.dim() == (cfg.max_len, h)
            && self.segment_emb.dim() == (2, h)
            && self.layers.len() == cfg.num_layers
            && self.layers.iter().all(|l| l.w1.dim() == (h, cfg.ff_dim) && l.wq.dim() == (h, h))
            && self.mlm_w.dim() == (h, cfg.vocab_size)
            && self.cls_w.dim() == (cfg.num_labels, h)
    }
}
