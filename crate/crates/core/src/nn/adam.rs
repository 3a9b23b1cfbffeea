use super::params::ModelParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: ModelParams,
    pub v: ModelParams,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update. Non-finite gradients are rejected before
/// any parameter is modified.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    cfg: &AdamConfig,
) -> Result<()> {
    for t in grads.tensors() {
        if let Some(v) = t.data.iter().find(|v| !v.is_finite()) {
            return Err(Error::numeric(format!("non-finite gradient {v} in {}", t.name)));
        }
    }
    state.t += 1;
    let bc1 = 1.0 - cfg.beta1.powi(state.t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(state.t as i32);
    let g_all = grads.tensors();
    let m_all = state.m.slices_mut();
    let v_all = state.v.slices_mut();
    for (((p, g), m), v) in params.slices_mut().into_iter().zip(g_all).zip(m_all).zip(v_all) {
        for i in 0..p.len() {
            let gi = g.data[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            let mhat = m[i] / bc1;
            let vhat = v[i] / bc2;
            p[i] -= cfg.lr * mhat / (vhat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelConfig;

    fn small() -> ModelParams {
        let cfg = ModelConfig {
            num_layers: 1,
            num_heads: 1,
            hidden_dim: 4,
            ff_dim: 4,
            max_len: 8,
            vocab_size: 8,
            num_labels: 2,
            dropout_rate: 0.0,
        };
        ModelParams::init(&cfg, 0)
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = small();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.cls_b[0] = 0.37;
        g.cls_b[1] = -5.0;
        let mut st = AdamState::new(&p);
        let cfg = AdamConfig::with_lr(0.01);
        adam_step(&mut p, &g, &mut st, &cfg).unwrap();
        assert!((p.cls_b[0] - (before.cls_b[0] - 0.01)).abs() < 1e-9);
        assert!((p.cls_b[1] - (before.cls_b[1] + 0.01)).abs() < 1e-9);
        assert_eq!(p.token_emb, before.token_emb);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn constant_gradient_steps_stay_near_lr() {
        let mut p = small();
        let mut g = p.zeros_like();
        g.mlm_b.fill(2.0);
        let mut st = AdamState::new(&p);
        let cfg = AdamConfig::with_lr(1e-3);
        let start = p.mlm_b[0];
        for _ in 0..50 {
            adam_step(&mut p, &g, &mut st, &cfg).unwrap();
        }
        assert!((start - p.mlm_b[0] - 50.0 * 1e-3).abs() < 1e-6);
    }

    #[test]
    fn rejects_non_finite_without_update() {
        let mut p = small();
        let before = p.clone();
        let mut g = p.zeros_like();
        g.cls_b[0] = 1.0;
        g.layers[0].w1[[0, 0]] = f64::NAN;
        let mut st = AdamState::new(&p);
        let err = adam_step(&mut p, &g, &mut st, &AdamConfig::default()).unwrap_err();
        assert!(err.to_string().contains("layer0.w1"));
        assert_eq!(err.exit_code(), 3);
        assert_eq!(p, before);
        assert_eq!(st.t, 0);
    }
}
