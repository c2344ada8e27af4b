//! Adam without weight decay.

use crate::encoder::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self::with_lr(1e-3)
    }
}

/// Moment estimates over a flat list of tensors.
#[derive(Debug, Clone)]
pub struct Adam {
    cfg: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(cfg: AdamConfig, shapes: &[usize]) -> Self {
        Self {
            cfg,
            step: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_params(cfg: AdamConfig, params: &ModelParams) -> Self {
        let shapes: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
        Self::new(cfg, &shapes)
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update of `params` against `grads`, tensor by tensor.
    pub fn update(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        assert_eq!(params.len(), self.m.len(), "tensor count changed");
        assert_eq!(grads.len(), self.m.len(), "gradient tensor count mismatch");
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (ti, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            assert_eq!(p.len(), g.len(), "tensor {ti} shape mismatch");
            let (m, v) = (&mut self.m[ti], &mut self.v[ti]);
            for k in 0..p.len() {
                m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
                v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                p[k] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }

    pub fn step_model(&mut self, params: &mut ModelParams, grads: &ModelParams) {
        let g = grads.tensors();
        self.update(&mut params.tensors_mut(), &g);
    }
}
