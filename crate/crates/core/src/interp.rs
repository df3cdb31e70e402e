//! Monotone piecewise cubic Hermite interpolation (Fritsch-Carlson).

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return param("pchip needs at least two points and matching lengths");
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return param("pchip abscissae must be strictly increasing");
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return param("pchip data must be finite");
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let del: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = del[0];
            d[1] = del[0];
        } else {
            for i in 1..n - 1 {
                if del[i - 1] * del[i] > 0.0 {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    d[i] = (w1 + w2) / (w1 / del[i - 1] + w2 / del[i]);
                }
            }
            d[0] = end_slope(h[0], h[1], del[0], del[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
        }
        Ok(Pchip { x, y, d })
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = self.x_range();
        t >= lo && t <= hi
    }

    /// Evaluates the interpolant; outside the data range the end tangent is
    /// continued linearly.
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        if t <= self.x[0] {
            return self.y[0] + self.d[0] * (t - self.x[0]);
        }
        if t >= self.x[n - 1] {
            return self.y[n - 1] + self.d[n - 1] * (t - self.x[n - 1]);
        }
        let i = match self.x.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => return self.y[i],
            Err(i) => i - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[i] + h * h10 * self.d[i] + h01 * self.y[i + 1] + h * h11 * self.d[i + 1]
    }
}

fn node_slope(x: &[f64], y: &[f64], i: usize) -> f64 {
    let n = x.len();
    let del = |k: usize| (y[k + 1] - y[k]) / (x[k + 1] - x[k]);
    let h = |k: usize| x[k + 1] - x[k];
    if n == 2 {
        return del(0);
    }
    if i == 0 {
        return end_slope(h(0), h(1), del(0), del(1));
    }
    if i == n - 1 {
        return end_slope(h(n - 2), h(n - 3), del(n - 2), del(n - 3));
    }
    let (d0, d1) = (del(i - 1), del(i));
    if d0 * d1 > 0.0 {
        let w1 = 2.0 * h(i) + h(i - 1);
        let w2 = h(i) + 2.0 * h(i - 1);
        (w1 + w2) / (w1 / d0 + w2 / d1)
    } else {
        0.0
    }
}

/// Evaluates the monotone cubic interpolant of `(x, y)` at `t` without
/// building the full slope table. Returns `None` outside `[x0, xn]`.
pub fn pchip_at(x: &[f64], y: &[f64], t: f64) -> Option<f64> {
    let n = x.len();
    if n < 2 || !(t >= x[0] && t <= x[n - 1]) {
        return None;
    }
    let i = match x.binary_search_by(|v| v.total_cmp(&t)) {
        Ok(i) => return Some(y[i]),
        Err(i) => i - 1,
    };
    let h = x[i + 1] - x[i];
    let s = (t - x[i]) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let (d0, d1) = (node_slope(x, y, i), node_slope(x, y, i + 1));
    Some(
        (2.0 * s3 - 3.0 * s2 + 1.0) * y[i]
            + h * (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * y[i + 1]
            + h * (s3 - s2) * d1,
    )
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}
