//! Initial data descriptors.

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::interp::pchip_at;
use crate::quad::{integrate_smooth, QuadOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Datum {
    /// `log(x + 1)`
    Log1p,
    /// `log(x^2 + 2)`
    Logx2p2,
    /// `offset + amplitude cos(pi (x - a) / (b - a))` on the grid span `(a, b)`.
    Cospi {
        #[serde(default)]
        offset: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `height (1 - ((x - center)/width)^2)_+^2`
    Bump {
        center: f64,
        width: f64,
        height: f64,
    },
    /// Source-type self-similar profile at time `t0`, one space dimension.
    Barenblatt {
        t0: f64,
        m: f64,
        #[serde(default = "one")]
        c: f64,
    },
    Constant {
        value: f64,
    },
    /// Monotone-cubic interpolated table, constant beyond its ends.
    Custom {
        x: Vec<f64>,
        u: Vec<f64>,
    },
    /// Cell values given directly.
    Cells {
        values: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    #[default]
    Center,
    CellAverage,
}

/// Self-similar solution of `u_t = (u^m)_xx` with unit mass scale `c`.
pub fn barenblatt(x: f64, t: f64, m: f64, c: f64) -> f64 {
    let alpha = 1.0 / (m + 1.0);
    let k = (m - 1.0) / (2.0 * m * (m + 1.0));
    let inner = c - k * x * x * t.powf(-2.0 * alpha);
    if inner <= 0.0 {
        0.0
    } else {
        t.powf(-alpha) * inner.powf(1.0 / (m - 1.0))
    }
}

impl Datum {
    pub fn validate(&self) -> Result<()> {
        match self {
            Datum::Bump { width, .. } if !(*width > 0.0) => param("bump width must be positive"),
            Datum::Barenblatt { t0, m, c } if !(*t0 > 0.0 && *m > 1.0 && *c > 0.0) => {
                param("barenblatt needs t0 > 0, m > 1, c > 0")
            }
            Datum::Custom { x, u } => {
                if x.len() < 2 || x.len() != u.len() || x.windows(2).any(|w| !(w[1] > w[0])) {
                    param("custom datum needs increasing abscissae and matching values")
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Pointwise value; `span` is the (possibly truncated) grid interval.
    pub fn value(&self, x: f64, span: (f64, f64)) -> f64 {
        match self {
            Datum::Log1p => x.ln_1p(),
            Datum::Logx2p2 => (x * x + 2.0).ln(),
            Datum::Cospi { offset, amplitude } => {
                let s = (x - span.0) / (span.1 - span.0);
                offset + amplitude * (std::f64::consts::PI * s).cos()
            }
            Datum::Bump {
                center,
                width,
                height,
            } => {
                let s = (x - center) / width;
                let v = 1.0 - s * s;
                if v > 0.0 {
                    height * v * v
                } else {
                    0.0
                }
            }
            Datum::Barenblatt { t0, m, c } => barenblatt(x, *t0, *m, *c),
            Datum::Constant { value } => *value,
            Datum::Custom { x: xs, u } => {
                let n = xs.len();
                if x <= xs[0] {
                    u[0]
                } else if x >= xs[n - 1] {
                    u[n - 1]
                } else {
                    pchip_at(xs, u, x).unwrap_or(u[0])
                }
            }
            Datum::Cells { .. } => f64::NAN,
        }
    }

    /// Cell values on the given faces.
    pub fn sample(&self, faces: &[f64], centers: &[f64], sampling: Sampling) -> Result<Vec<f64>> {
        self.validate()?;
        let span = (faces[0], *faces.last().unwrap());
        if let Datum::Cells { values } = self {
            if values.len() != centers.len() {
                return param(format!(
                    "cell datum has {} values for {} cells",
                    values.len(),
                    centers.len()
                ));
            }
            return Ok(values.clone());
        }
        match sampling {
            Sampling::Center => Ok(centers.iter().map(|&x| self.value(x, span)).collect()),
            Sampling::CellAverage => faces
                .windows(2)
                .map(|w| {
                    let r = integrate_smooth(
                        |x| self.value(x, span),
                        w[0],
                        w[1],
                        &QuadOptions::with_tol(1e-10),
                    )?;
                    Ok(r.value / (w[1] - w[0]))
                })
                .collect(),
        }
    }
}
