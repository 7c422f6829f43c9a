use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticState {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
}

#[inline]
pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

struct Problem<'a> {
    x: &'a Matrix,
    y: &'a [u8],
    l2: f64,
}

impl Problem<'_> {
    /// Mean log-loss plus `l2 / (2n) * |w|^2` (intercept unpenalized).
    fn objective(&self, w: &[f64], b: f64) -> f64 {
        let n = self.y.len() as f64;
        let mut loss = 0.0;
        for i in 0..self.x.rows() {
            let z = dot(self.x.row(i), w) + b;
            loss += softplus(z) - f64::from(self.y[i]) * z;
        }
        loss / n + self.l2 / (2.0 * n) * w.iter().map(|v| v * v).sum::<f64>()
    }

    fn gradient(&self, w: &[f64], b: f64, gw: &mut [f64]) -> f64 {
        let n = self.y.len() as f64;
        gw.iter_mut().for_each(|g| *g = 0.0);
        let mut gb = 0.0;
        for i in 0..self.x.rows() {
            let row = self.x.row(i);
            let r = sigmoid(dot(row, w) + b) - f64::from(self.y[i]);
            for (g, v) in gw.iter_mut().zip(row) {
                *g += r * v;
            }
            gb += r;
        }
        for (g, wv) in gw.iter_mut().zip(w) {
            *g = *g / n + self.l2 / n * wv;
        }
        gb / n
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// L2-regularized logistic regression by full-batch gradient descent with
/// Armijo backtracking, starting from all-zero parameters. Stops when the
/// largest gradient component drops below `tol` or after `max_iter` steps.
pub(crate) fn fit_logistic(x: &Matrix, y: &[u8], l2: f64, max_iter: usize, tol: f64) -> LogisticState {
    let f = x.cols();
    let p = Problem { x, y, l2 };
    let mut w = vec![0.0; f];
    let mut b = 0.0;
    let mut gw = vec![0.0; f];
    let mut trial = vec![0.0; f];
    let mut step = 1.0;
    let mut obj = p.objective(&w, b);
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        let gb = p.gradient(&w, b, &mut gw);
        let gmax = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if gmax < tol {
            iterations = it;
            break;
        }
        let gnorm2 = gb * gb + gw.iter().map(|g| g * g).sum::<f64>();
        step *= 2.0;
        loop {
            for ((t, wv), g) in trial.iter_mut().zip(&w).zip(&gw) {
                *t = wv - step * g;
            }
            let tb = b - step * gb;
            let cand = p.objective(&trial, tb);
            if cand <= obj - 0.5 * step * gnorm2 || step < 1e-12 {
                w.copy_from_slice(&trial);
                b = tb;
                obj = cand;
                break;
            }
            step *= 0.5;
        }
    }
    LogisticState {
        weights: w,
        intercept: b,
        iterations,
    }
}

impl LogisticState {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        sigmoid(dot(row, &self.weights) + self.intercept)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_points_are_ordered() {
        let x = Matrix::from_rows(&[[-2.0, 0.0], [-1.0, 1.0], [1.0, -1.0], [2.0, 0.0]]).unwrap();
        let y = [0u8, 0, 1, 1];
        let s = fit_logistic(&x, &y, 1.0, 1000, 1e-6);
        let p: Vec<f64> = (0..4).map(|i| s.predict_row(x.row(i))).collect();
        assert!(p[0] < p[2] && p[0] < p[3] && p[1] < p[2] && p[1] < p[3]);
        assert!(s.weights[0] > 0.0);
    }

    #[test]
    fn converges_to_stationary_point() {
        let rows: Vec<[f64; 2]> = (0..40)
            .map(|i| [(i as f64 / 7.0).sin(), (i as f64 / 3.0).cos()])
            .collect();
        let y: Vec<u8> = (0..40)
            .map(|i| u8::from((i as f64 / 7.0).sin() + 0.3 * (i % 3) as f64 > 0.2))
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let s = fit_logistic(&x, &y, 1.0, 5000, 1e-8);
        let p = Problem { x: &x, y: &y, l2: 1.0 };
        let mut g = vec![0.0; 2];
        let gb = p.gradient(&s.weights, s.intercept, &mut g);
        assert!(gb.abs() < 1e-7 && g.iter().all(|v| v.abs() < 1e-7));
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }
}
