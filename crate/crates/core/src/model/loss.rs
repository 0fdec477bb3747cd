//! Pairwise ranking losses over matched positive/negative score lists.

use serde::{Deserialize, Serialize};

/// Guard inside the logarithm of the ranking loss.
pub const LOSS_EPS: f64 = 1.0e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LossMode {
    /// Mean over matched pairs of `-ln(sigmoid(f_pos - f_neg) + eps)`.
    #[default]
    PerPair,
    /// One sigmoid over the sum of all positive-minus-negative differences.
    LiteralSum,
    /// Mean hinge `max(0, margin - f_pos + f_neg)`.
    Margin { margin: f64 },
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-ln(sigmoid(f_pos - f_neg) + eps)`.
pub fn pair_loss(f_pos: f64, f_neg: f64) -> f64 {
    -(sigmoid(f_pos - f_neg) + LOSS_EPS).ln()
}

/// d/dx of `-ln(sigmoid(x) + eps)`.
fn log_sigmoid_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    -(s * sigmoid(-x)) / (s + LOSS_EPS)
}

/// Loss plus its derivatives with respect to each positive and each negative score.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub loss: f64,
    pub d_pos: Vec<f64>,
    pub d_neg: Vec<f64>,
}

pub fn batch_loss(mode: LossMode, pos: &[f64], neg: &[f64]) -> LossValue {
    match mode {
        LossMode::PerPair | LossMode::Margin { .. } => {
            assert_eq!(pos.len(), neg.len(), "positives and negatives must be matched 1:1");
            let n = pos.len().max(1) as f64;
            let mut loss = 0.0;
            let mut d_pos = Vec::with_capacity(pos.len());
            let mut d_neg = Vec::with_capacity(neg.len());
            for (&p, &q) in pos.iter().zip(neg) {
                let (l, g) = match mode {
                    LossMode::Margin { margin } => {
                        let h = margin - p + q;
                        if h > 0.0 {
                            (h, -1.0)
                        } else {
                            (0.0, 0.0)
                        }
                    }
                    _ => (pair_loss(p, q), log_sigmoid_grad(p - q)),
                };
                loss += l;
                d_pos.push(g / n);
                d_neg.push(-g / n);
            }
            LossValue {
                loss: loss / n,
                d_pos,
                d_neg,
            }
        }
        LossMode::LiteralSum => {
            let (np, nn) = (pos.len() as f64, neg.len() as f64);
            let s = nn * pos.iter().sum::<f64>() - np * neg.iter().sum::<f64>();
            let g = log_sigmoid_grad(s);
            LossValue {
                loss: -(sigmoid(s) + LOSS_EPS).ln(),
                d_pos: vec![g * nn; pos.len()],
                d_neg: vec![-g * np; neg.len()],
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_difference() {
        assert!((pair_loss(1.3, 1.3) - 0.693_147_180_359_945_3).abs() < 1e-12);
    }

    #[test]
    fn large_margin_goes_to_zero() {
        // the eps guard makes the loss a hair below zero here
        let l = pair_loss(1e6, 0.0);
        assert!(l.abs() < 1e-9);
    }

    #[test]
    fn eps_dominates_far_negative() {
        // sigmoid(-50) = 1.9287498479639178e-22 (evaluated with mpmath at 30 digits);
        // -ln(1.9287498479639178e-22 + 1e-10) = 23.025850929938528
        assert!((pair_loss(0.0, 50.0) - 23.025_850_929_938_528).abs() < 1e-12);
    }

    #[test]
    fn bounds() {
        for d in [-1e3, -50.0, -1.0, 0.0, 2.0, 40.0, 1e3] {
            let l = pair_loss(d, 0.0);
            assert!(
                l > -(1.0 + LOSS_EPS).ln() - 1e-18 && l <= -(LOSS_EPS.ln()) + 1e-12,
                "{d}: {l}"
            );
        }
    }

    #[test]
    fn batch_derivatives_match_finite_differences() {
        let pos = [0.3, -1.2, 2.0];
        let neg = [0.1, 0.5, -0.7];
        for mode in [
            LossMode::PerPair,
            LossMode::LiteralSum,
            LossMode::Margin { margin: 1.0 },
        ] {
            let v = batch_loss(mode, &pos, &neg);
            let h = 1e-6;
            for k in 0..3 {
                let mut p = pos;
                p[k] += h;
                let up = batch_loss(mode, &p, &neg).loss;
                p[k] -= 2.0 * h;
                let down = batch_loss(mode, &p, &neg).loss;
                assert!(((up - down) / (2.0 * h) - v.d_pos[k]).abs() < 1e-6, "{mode:?} pos {k}");
                let mut q = neg;
                q[k] += h;
                let up = batch_loss(mode, &pos, &q).loss;
                q[k] -= 2.0 * h;
                let down = batch_loss(mode, &pos, &q).loss;
                assert!(((up - down) / (2.0 * h) - v.d_neg[k]).abs() < 1e-6, "{mode:?} neg {k}");
            }
        }
    }

    #[test]
    fn per_pair_mean_of_pair_losses() {
        let v = batch_loss(LossMode::PerPair, &[1.0, 0.0], &[0.0, 1.0]);
        assert!((v.loss - 0.5 * (pair_loss(1.0, 0.0) + pair_loss(0.0, 1.0))).abs() < 1e-15);
    }
}
