//! Regularized nonlinearity `Phi_eps(u) = \int_0^u m (s^2 + eps^2)^((m-1)/2) ds`.

const GL16_X: [f64; 8] = [
    0.095_012_509_837_637_44,
    0.281_603_550_779_258_9,
    0.458_016_777_657_227_4,
    0.617_876_244_402_643_7,
    0.755_404_408_355_003,
    0.865_631_202_387_831_8,
    0.944_575_023_073_232_6,
    0.989_400_934_991_649_9,
];
const GL16_W: [f64; 8] = [
    0.189_450_610_455_068_5,
    0.182_603_415_044_923_6,
    0.169_156_519_395_002_5,
    0.149_595_988_816_576_7,
    0.124_628_971_255_533_9,
    0.095_158_511_682_492_78,
    0.062_253_523_938_647_89,
    0.027_152_459_411_754_1,
];

/// Number of binomial terms in the large-argument expansion.
const SERIES_TERMS: usize = 14;

/// `Phi_eps` and its derivative for fixed `m` and `eps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phi {
    pub m: f64,
    pub eps: f64,
    /// `Phi_1` at 1, 2 and 4 (values for `eps = 1`).
    anchors: [f64; 3],
}

fn gl16<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for k in 0..8 {
        let dx = h * GL16_X[k];
        s += GL16_W[k] * (f(c - dx) + f(c + dx));
    }
    s * h
}

impl Phi {
    pub fn new(m: f64, eps: f64) -> Self {
        let d1 = |s: f64| m * (s * s + 1.0).powf(0.5 * (m - 1.0));
        let a1 = gl16(d1, 0.0, 1.0);
        let a2 = a1 + gl16(d1, 1.0, 2.0);
        let a4 = a2 + gl16(d1, 2.0, 4.0);
        Phi {
            m,
            eps,
            anchors: [a1, a2, a4],
        }
    }

    pub fn deriv(&self, u: f64) -> f64 {
        if self.eps == 0.0 {
            self.m * u.abs().powf(self.m - 1.0)
        } else {
            self.m * (u * u + self.eps * self.eps).powf(0.5 * (self.m - 1.0))
        }
    }

    pub fn value(&self, u: f64) -> f64 {
        if self.eps == 0.0 {
            return u.signum() * u.abs().powf(self.m);
        }
        if u == 0.0 {
            return 0.0;
        }
        let y = u.abs() / self.eps;
        u.signum() * self.eps.powf(self.m) * self.unit(y)
    }

    /// `Phi_1(y)` for `y >= 0`.
    fn unit(&self, y: f64) -> f64 {
        let m = self.m;
        let d1 = |s: f64| m * (s * s + 1.0).powf(0.5 * (m - 1.0));
        if y <= 1.0 {
            return gl16(d1, 0.0, y);
        }
        if y <= 2.0 {
            return self.anchors[0] + gl16(d1, 1.0, y);
        }
        if y <= 4.0 {
            return self.anchors[1] + gl16(d1, 2.0, y);
        }
        // m s^(m-1) (1 + s^-2)^k, k = (m-1)/2, expanded in s^-2
        let k = 0.5 * (m - 1.0);
        let mut coef = 1.0;
        let mut sum = 0.0;
        for j in 0..SERIES_TERMS {
            if j > 0 {
                coef *= (k - (j as f64 - 1.0)) / j as f64;
            }
            let p = m - 2.0 * j as f64;
            let term = if p.abs() < 1e-12 {
                y.ln() - 4f64.ln()
            } else {
                (y.powf(p) - 4f64.powf(p)) / p
            };
            sum += coef * term;
            if coef == 0.0 {
                break;
            }
        }
        self.anchors[2] + m * sum
    }
}

/// `Phi_eps(u)` for exponent `m`.
pub fn phi_eps(u: f64, m: f64, eps: f64) -> f64 {
    Phi::new(m, eps).value(u)
}

/// `Phi_eps'(u) = m (u^2 + eps^2)^((m-1)/2)`.
pub fn phi_eps_prime(u: f64, m: f64, eps: f64) -> f64 {
    m * (u * u + eps * eps).powf(0.5 * (m - 1.0))
}
