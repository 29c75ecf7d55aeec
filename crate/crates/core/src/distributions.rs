//! Samplers and log-densities used by the simulator and the sampler.
//!
//! Truncated laws are drawn by inversion. The inverse CDFs are written in
//! `expm1`/`ln_1p` form so they stay accurate when the truncation window
//! is narrow relative to the scale of the distribution.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Open01};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::pow_shape;

/// Below this `rate * width` the truncated exponential is replaced by its
/// uniform limit.
pub const UNIFORM_LIMIT: f64 = 1e-10;

#[inline]
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Open01.sample(rng)
}

/// Exponential with rate `rate` restricted to `(lower, upper)`.
/// `rate = 0` is the uniform distribution on the window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncExp {
    rate: f64,
    lower: f64,
    upper: f64,
    // 1 - exp(-rate * width); unused in the uniform regime.
    mass: f64,
    ln_norm: f64,
    uniform: bool,
}

impl TruncExp {
    pub fn new(rate: f64, lower: f64, upper: f64) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "truncated exponential rate must be finite and >= 0, got {rate}"
            )));
        }
        if !(lower < upper) || !lower.is_finite() {
            return Err(Error::InvalidParams(format!(
                "truncated exponential needs lower < upper, got ({lower}, {upper})"
            )));
        }
        Ok(Self::new_unchecked(rate, lower, upper))
    }

    pub(crate) fn new_unchecked(rate: f64, lower: f64, upper: f64) -> Self {
        let width = upper - lower;
        let uniform = rate * width < UNIFORM_LIMIT;
        if uniform {
            Self {
                rate,
                lower,
                upper,
                mass: 1.0,
                ln_norm: -width.ln(),
                uniform,
            }
        } else {
            let mass = -(-rate * width).exp_m1();
            Self {
                rate,
                lower,
                upper,
                mass,
                ln_norm: rate.ln() - mass.ln(),
                uniform,
            }
        }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let u = open01(rng);
            let x = if self.uniform {
                self.lower + u * (self.upper - self.lower)
            } else {
                self.lower - (-u * self.mass).ln_1p() / self.rate
            };
            // Rounding can land on a bound for extreme u; those draws are
            // measure-zero events and are redrawn.
            if x > self.lower && x < self.upper {
                return x;
            }
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(x > self.lower && x < self.upper) {
            return f64::NEG_INFINITY;
        }
        if self.uniform {
            self.ln_norm
        } else {
            self.ln_norm - self.rate * (x - self.lower)
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lower {
            0.0
        } else if x >= self.upper {
            1.0
        } else if self.uniform {
            (x - self.lower) / (self.upper - self.lower)
        } else {
            -(-self.rate * (x - self.lower)).exp_m1() / self.mass
        }
    }
}

pub fn sample_trunc_exp<R: Rng + ?Sized>(p: &TruncExp, rng: &mut R) -> f64 {
    p.sample(rng)
}

pub fn trunc_exp_logpdf(x: f64, p: &TruncExp) -> f64 {
    p.ln_pdf(x)
}

/// Weibull with CDF `1 - exp(-λ x^a)` restricted to `(lower, upper)`;
/// `upper` may be `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncWeibull {
    scale: f64,
    shape: f64,
    lower: f64,
    upper: f64,
    lower_pow: f64,
    // P(lower < X < upper) / P(X > lower)
    mass: f64,
}

impl TruncWeibull {
    pub fn new(scale: f64, shape: f64, lower: f64, upper: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite() && shape > 0.0 && shape.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "Weibull scale and shape must be positive, got ({scale}, {shape})"
            )));
        }
        if !(lower >= 0.0 && lower < upper && lower.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "truncated Weibull needs 0 <= lower < upper, got ({lower}, {upper})"
            )));
        }
        let lower_pow = pow_shape(lower, shape);
        let mass = if upper.is_finite() {
            -(-scale * (pow_shape(upper, shape) - lower_pow)).exp_m1()
        } else {
            1.0
        };
        Ok(Self {
            scale,
            shape,
            lower,
            upper,
            lower_pow,
            mass,
        })
    }

    /// Inverse CDF `X = (-log(A - B U) / λ)^{1/a}` with
    /// `A = exp(-λ l^a)`, `B = A - exp(-λ u^a)`, rearranged as
    /// `(l^a - log(1 - U B / A) / λ)^{1/a}`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let u = open01(rng);
            let excess = -(-u * self.mass).ln_1p() / self.scale;
            let x = (self.lower_pow + excess).powf(1.0 / self.shape);
            if x > self.lower && x < self.upper {
                return x;
            }
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(x > self.lower && x < self.upper) {
            return f64::NEG_INFINITY;
        }
        weibull_logpdf(x, self.scale, self.shape) + self.scale * self.lower_pow - self.mass.ln()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lower {
            0.0
        } else if x >= self.upper {
            1.0
        } else {
            -(-self.scale * (pow_shape(x, self.shape) - self.lower_pow)).exp_m1() / self.mass
        }
    }
}

pub fn sample_trunc_weibull<R: Rng + ?Sized>(p: &TruncWeibull, rng: &mut R) -> f64 {
    p.sample(rng)
}

/// `log f(x) = log(λ a) + (a - 1) log x - λ x^a`; `-∞` for `x < 0`.
pub fn weibull_logpdf(x: f64, lambda: f64, shape: f64) -> f64 {
    if x.is_nan() || x < 0.0 {
        return f64::NEG_INFINITY;
    }
    if x == 0.0 {
        return if shape == 1.0 {
            lambda.ln()
        } else if shape < 1.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
    }
    if x.is_infinite() {
        return f64::NEG_INFINITY;
    }
    (lambda * shape).ln() + (shape - 1.0) * x.ln() - lambda * pow_shape(x, shape)
}

/// `log S(x) = -λ x^a`; `-∞` for negative `x`.
pub fn weibull_logsurvival(x: f64, lambda: f64, shape: f64) -> f64 {
    if x.is_nan() || x < 0.0 {
        return f64::NEG_INFINITY;
    }
    -lambda * pow_shape(x, shape)
}

pub fn weibull_cdf(x: f64, lambda: f64, shape: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -(-lambda * pow_shape(x, shape)).exp_m1()
    }
}

/// Gamma draw in shape-rate form.
///
/// Tiny shapes put real probability mass below the smallest positive
/// `f64`; such draws are returned as `f64::MIN_POSITIVE` so the result is
/// always a usable positive rate.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    let g = Gamma::new(shape, 1.0 / rate).expect("gamma shape and rate must be positive");
    g.sample(rng).max(f64::MIN_POSITIVE)
}

/// Log-density of `Ga(shape, rate)` at `x`.
pub fn gamma_ln_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if !(x > 0.0) || x.is_infinite() {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Infectious-period law seen from an infection time: the removal time is
/// `infection + D` with `D ~ Weibull(λ, a)` when that falls in the window
/// and `+∞` (censored) otherwise. Equivalently, `+∞` with probability
/// `1 - F(T - z)` and otherwise `z + D` with `D` truncated to
/// `(0, T - z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemovalLaw {
    pub lambda: f64,
    pub shape: f64,
    pub horizon: f64,
    ln_lambda_shape: f64,
}

impl RemovalLaw {
    pub fn new(lambda: f64, shape: f64, horizon: f64) -> Self {
        Self {
            lambda,
            shape,
            horizon,
            ln_lambda_shape: (lambda * shape).ln(),
        }
    }

    /// Probability of removal within the window for an individual
    /// infected at `infection`.
    pub fn removal_probability(&self, infection: f64) -> f64 {
        weibull_cdf(self.horizon - infection, self.lambda, self.shape)
    }

    #[inline]
    fn root_shape(&self, x: f64) -> f64 {
        if self.shape == 2.0 {
            x.sqrt()
        } else if self.shape == 1.0 {
            x
        } else {
            x.powf(1.0 / self.shape)
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, infection: f64, rng: &mut R) -> f64 {
        loop {
            let u = open01(rng);
            let d = self.root_shape(-u.ln() / self.lambda);
            let removal = infection + d;
            if removal > self.horizon {
                return f64::INFINITY;
            }
            if removal > infection {
                return removal;
            }
        }
    }

    /// Log-density of the mixed law: `log f(r - z)` for a removal inside
    /// the window, `log F̄(T - z)` for a censored one.
    pub fn ln_density(&self, infection: f64, removal: f64) -> f64 {
        if removal <= self.horizon {
            let d = removal - infection;
            if d > 0.0 {
                self.ln_lambda_shape + (self.shape - 1.0) * d.ln() - self.lambda * pow_shape(d, self.shape)
            } else {
                weibull_logpdf(d, self.lambda, self.shape)
            }
        } else {
            weibull_logsurvival(self.horizon - infection, self.lambda, self.shape)
        }
    }
}
