use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

/// First-order optimizer over a flat list of parameter matrices.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Optimizer {
            kind,
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step(&mut self, params: Vec<&mut Array2<f64>>, grads: &[Array2<f64>]) {
        assert_eq!(params.len(), grads.len(), "one gradient per parameter");
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.into_iter().zip(grads) {
                    p.scaled_add(-self.lr, g);
                }
            }
            OptimizerKind::Adam => {
                if self.m.is_empty() {
                    self.m = grads.iter().map(|g| Array2::zeros(g.raw_dim())).collect();
                    self.v = self.m.clone();
                }
                self.step += 1;
                let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
                let c1 = 1.0 - b1.powi(self.step);
                let c2 = 1.0 - b2.powi(self.step);
                let lr = self.lr;
                for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
                    Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                        *m = b1 * *m + (1.0 - b1) * g;
                        *v = b2 * *v + (1.0 - b2) * g * g;
                        let mh = *m / c1;
                        let vh = *v / c2;
                        *p -= lr * mh / (vh.sqrt() + eps);
                    });
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn sgd_step() {
        let mut p = array![[1.0, 2.0]];
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.5, 0.9, 0.999, 1e-8);
        opt.step(vec![&mut p], &[array![[2.0, -2.0]]]);
        assert_eq!(p, array![[0.0, 3.0]]);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        // bias-corrected first step is lr * g / (|g| + eps)
        let mut p = array![[1.0, 1.0]];
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.1, 0.9, 0.999, 1e-8);
        opt.step(vec![&mut p], &[array![[3.0, -0.5]]]);
        assert!((p[[0, 0]] - 0.9).abs() < 1e-7);
        assert!((p[[0, 1]] - 1.1).abs() < 1e-7);
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut p = array![[5.0, -3.0]];
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.1, 0.9, 0.999, 1e-8);
        for _ in 0..2000 {
            let g = p.mapv(|x| 2.0 * x);
            opt.step(vec![&mut p], &[g]);
        }
        assert!(p.iter().all(|x| x.abs() < 1e-3), "{p:?}");
    }
}
