use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, ParamStore};

/// Adam moments and step counter for every parameter of one store.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<DenseMatrix>,
    second: Vec<DenseMatrix>,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        Self::with_betas(store, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(store: &ParamStore, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros = || store.iter().map(|p| DenseMatrix::zeros(p.value.rows(), p.value.cols())).collect::<Vec<_>>();
        Self { beta1, beta2, eps, step: 0, first: zeros(), second: zeros() }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Extend the moment buffers for parameters added after construction.
    pub fn sync(&mut self, store: &ParamStore) {
        for p in store.iter().skip(self.first.len()) {
            self.first.push(DenseMatrix::zeros(p.value.rows(), p.value.cols()));
            self.second.push(DenseMatrix::zeros(p.value.rows(), p.value.cols()));
        }
    }

    /// One Adam update with decoupled weight decay
    /// (`value ← value − lr·wd·value`, then the moment step).
    pub fn step(&mut self, store: &mut ParamStore, lr: f64, weight_decay: f64) -> Result<()> {
        self.sync(store);
        if let Some(bad) = store.iter().find(|p| !p.grad.is_finite()) {
            return Err(Error::Numeric(format!("non-finite gradient for parameter {}", bad.name)));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);

        for ((p, m), v) in store.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let decay = if p.decay { lr * weight_decay } else { 0.0 };
            let values = p.value.as_mut_slice();
            let grads = p.grad.as_slice();
            for (((x, &g), mi), vi) in values.iter_mut().zip(grads).zip(m.as_mut_slice()).zip(v.as_mut_slice()) {
                *x -= decay * *x;
                *mi = b1 * *mi + (1.0 - b1) * g;
                *vi = b2 * *vi + (1.0 - b2) * g * g;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *x -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
