//! Warping profiles `psi(r)` of rotationally symmetric models.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::interp::{pchip_at, Pchip};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// `psi(r) = r`
    Linear,
    /// `psi(r) = exp(rate r)`
    Exp { rate: f64 },
    /// `psi(r) = sinh r`
    Sinh,
    /// `psi(r) = r` on `(0, 1]`, `exp(a r)` on `[2, inf)`, joined by the cubic
    /// Hermite polynomial matching values and slopes at 1 and 2.
    Bridged { a: f64 },
    /// Tabulated values, monotone-cubic interpolated; defined on the table range only.
    Table { r: Vec<f64>, psi: Vec<f64> },
}

impl Profile {
    pub fn validate(&self) -> Result<()> {
        match self {
            Profile::Linear | Profile::Sinh => Ok(()),
            Profile::Exp { rate } => {
                if rate.is_finite() {
                    Ok(())
                } else {
                    param("profile rate must be finite")
                }
            }
            Profile::Bridged { a } => {
                if !a.is_finite() || *a == 0.0 {
                    return param("bridged profile needs a finite nonzero rate");
                }
                for k in 0..=100 {
                    let r = 1.0 + k as f64 / 100.0;
                    if !(bridge(*a, r) > 0.0) {
                        return param(format!(
                            "bridged profile with a = {a} is not positive on [1, 2]"
                        ));
                    }
                }
                Ok(())
            }
            Profile::Table { r, psi } => {
                if psi.iter().any(|v| !(*v > 0.0)) {
                    return param("tabulated profile must be positive");
                }
                if r.first().is_none_or(|r0| *r0 < 0.0) {
                    return param("tabulated profile must start at r >= 0");
                }
                Pchip::new(r.clone(), psi.clone()).map(|_| ())
            }
        }
    }

    /// Largest radius at which the profile is defined.
    pub fn r_max(&self) -> f64 {
        match self {
            Profile::Table { r, .. } => *r.last().unwrap_or(&0.0),
            _ => f64::INFINITY,
        }
    }

    /// `ln psi(r)` for `r > 0`.
    pub fn ln_psi(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) || r > self.r_max() {
            return Err(Error::Domain {
                x: r,
                left: 0.0,
                right: self.r_max(),
            });
        }
        Ok(match self {
            Profile::Linear => r.ln(),
            Profile::Exp { rate } => rate * r,
            Profile::Sinh => ln_sinh(r),
            Profile::Bridged { a } => {
                if r <= 1.0 {
                    r.ln()
                } else if r >= 2.0 {
                    a * r
                } else {
                    bridge(*a, r).ln()
                }
            }
            Profile::Table { r: rs, psi } => {
                let Some(v) = pchip_at(rs, psi, r) else {
                    return Err(Error::Domain {
                        x: r,
                        left: rs[0],
                        right: self.r_max(),
                    });
                };
                if v > 0.0 {
                    v.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        })
    }

    pub fn psi(&self, r: f64) -> Result<f64> {
        self.ln_psi(r).map(f64::exp)
    }
}

fn ln_sinh(r: f64) -> f64 {
    if r < 1.0 {
        r.sinh().ln()
    } else {
        r - std::f64::consts::LN_2 + (-(-2.0 * r).exp()).ln_1p()
    }
}

fn bridge(a: f64, r: f64) -> f64 {
    let (y0, d0) = (1.0, 1.0);
    let e = (2.0 * a).exp();
    let (y1, d1) = (e, a * e);
    let s = r - 1.0;
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * d1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bridged_is_continuous() {
        let p = Profile::Bridged { a: 1.0 };
        p.validate().unwrap();
        for (lo, hi) in [(1.0 - 1e-9, 1.0 + 1e-9), (2.0 - 1e-9, 2.0 + 1e-9)] {
            assert!((p.psi(lo).unwrap() - p.psi(hi).unwrap()).abs() < 1e-7);
        }
        assert!((p.psi(3.0).unwrap() - 3f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn sinh_log_stable() {
        let p = Profile::Sinh;
        assert!((p.ln_psi(0.5).unwrap() - 0.5f64.sinh().ln()).abs() < 1e-14);
        assert!((p.ln_psi(800.0).unwrap() - (800.0 - std::f64::consts::LN_2)).abs() < 1e-12);
    }

    #[test]
    fn table_interpolates() {
        let p = Profile::Table {
            r: vec![0.0, 1.0, 2.0, 3.0],
            psi: vec![0.5, 1.0, 2.0, 3.0],
        };
        p.validate().unwrap();
        assert!((p.psi(2.0).unwrap() - 2.0).abs() < 1e-14);
        assert!(p.psi(3.5).is_err());
    }
}
