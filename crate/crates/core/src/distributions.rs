//! Generalized-Gaussian (GG) kernels.
//!
//! The γ-GG law on the natural scale has density proportional to
//! `exp(-|x|^γ / γ)`: γ = 2 is the standard normal, γ = 1 the Laplace law
//! with unit rate. A positive `scale` multiplies the natural variate, so the
//! unit-variance double exponential is `GGKernel::new(1.0, 1/√2)`.
//!
//! Only the right tail matters for one-sided P-values, but the kernels are
//! symmetric and every routine here is defined on the whole real line.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};

use crate::error::{Error, Result};

const QUANTILE_MAX_ITER: usize = 200;

/// A symmetric generalized-Gaussian null distribution with shape `gamma >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GGKernel {
    gamma: f64,
    scale: f64,
}

impl GGKernel {
    pub fn new(gamma: f64, scale: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 1.0) {
            return Err(Error::domain("gamma", format!("need gamma >= 1, got {gamma}")));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::domain("scale", format!("need scale > 0, got {scale}")));
        }
        Ok(Self { gamma, scale })
    }

    /// Natural-scale kernel (`scale = 1`).
    pub fn natural(gamma: f64) -> Result<Self> {
        Self::new(gamma, 1.0)
    }

    /// The standard normal law.
    pub fn normal() -> Self {
        Self {
            gamma: 2.0,
            scale: 1.0,
        }
    }

    /// The double-exponential (Laplace) law with variance 1.
    pub fn laplace_unit_variance() -> Self {
        Self {
            gamma: 1.0,
            scale: std::f64::consts::FRAC_1_SQRT_2,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Same shape, scale multiplied by `factor`.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.gamma, self.scale * factor)
    }

    /// `P(X >= x)`.
    pub fn survival(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::domain("x", format!("survival needs a finite argument, got {x}")));
        }
        Ok(self.survival_unchecked(x))
    }

    #[inline]
    pub(crate) fn survival_unchecked(&self, x: f64) -> f64 {
        let z = x / self.scale;
        if z >= 0.0 {
            self.upper_tail(z)
        } else {
            1.0 - self.upper_tail(-z)
        }
    }

    /// `P(Z >= z)` for the natural-scale variate and `z >= 0`.
    #[inline]
    fn upper_tail(&self, z: f64) -> f64 {
        if z == 0.0 {
            return 0.5;
        }
        if self.gamma == 2.0 {
            0.5 * libm::erfc(z * std::f64::consts::FRAC_1_SQRT_2)
        } else if self.gamma == 1.0 {
            0.5 * (-z).exp()
        } else {
            // |Z|^γ/γ ~ Gamma(1/γ, 1)
            let shape = 1.0 / self.gamma;
            0.5 * statrs::function::gamma::gamma_ur(shape, z.powf(self.gamma) * shape)
        }
    }

    /// Inverse survival: the `x` with `survival(x) = p`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain("p", format!("quantile needs p in (0,1), got {p}")));
        }
        if p == 0.5 {
            return Ok(0.0);
        }
        // 1 - p is exact for p >= 1/2.
        let (target, sign) = if p < 0.5 { (p, 1.0) } else { (1.0 - p, -1.0) };
        Ok(sign * self.scale * self.invert_upper_tail(target))
    }

    fn invert_upper_tail(&self, target: f64) -> f64 {
        if self.gamma == 1.0 {
            return -(2.0 * target).ln();
        }
        // Exact for γ = 1, within a log factor otherwise.
        let guess = (self.gamma * -(2.0 * target).ln()).powf(1.0 / self.gamma);
        let mut lo = 0.0;
        let mut hi = guess.max(1.0);
        while self.upper_tail(hi) > target {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..QUANTILE_MAX_ITER {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.upper_tail(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // pick the endpoint whose tail is closest to the target
        if (self.upper_tail(lo) - target).abs() <= (self.upper_tail(hi) - target).abs() {
            lo
        } else {
            hi
        }
    }

    /// One draw from the kernel.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sampler().sample(rng)
    }

    /// A reusable sampler; avoids rebuilding the gamma law per draw.
    pub fn sampler(&self) -> GGSampler {
        let magnitude = if self.gamma == 2.0 {
            Magnitude::Normal
        } else if self.gamma == 1.0 {
            Magnitude::Exponential
        } else {
            Magnitude::Gamma {
                law: Gamma::new(1.0 / self.gamma, 1.0).expect("shape 1/gamma is positive"),
                gamma: self.gamma,
            }
        };
        GGSampler {
            magnitude,
            scale: self.scale,
        }
    }

    /// The one-sided P-value `survival(x)` of an observed statistic.
    pub fn pvalue(&self, x: f64) -> Result<f64> {
        self.survival(x)
    }
}

#[derive(Debug, Clone, Copy)]
enum Magnitude {
    Normal,
    Exponential,
    Gamma { law: Gamma<f64>, gamma: f64 },
}

/// Draws from a [`GGKernel`].
///
/// The magnitude `|X|` is generated through `|X|^γ/γ ~ Gamma(1/γ, 1)` with an
/// independent uniform sign. γ = 2 and γ = 1 use the equivalent normal and
/// exponential generators directly.
#[derive(Debug, Clone, Copy)]
pub struct GGSampler {
    magnitude: Magnitude,
    scale: f64,
}

impl Distribution<f64> for GGSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z = match self.magnitude {
            Magnitude::Normal => StandardNormal.sample(rng),
            Magnitude::Exponential => {
                let e: f64 = Exp1.sample(rng);
                if rng.random::<bool>() {
                    e
                } else {
                    -e
                }
            }
            Magnitude::Gamma { law, gamma } => {
                let m = (gamma * law.sample(rng)).powf(1.0 / gamma);
                if rng.random::<bool>() {
                    m
                } else {
                    -m
                }
            }
        };
        self.scale * z
    }
}

/// CDF of the alternative P-value, `F(t) = Φ(μ − Φ̄⁻¹(t))`, for a location
/// shift `mu` of the kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AltPValueCdf {
    kernel: GGKernel,
    mu: f64,
}

impl AltPValueCdf {
    pub fn new(kernel: GGKernel, mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::domain("mu", format!("need a positive finite shift, got {mu}")));
        }
        Ok(Self { kernel, mu })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// `F(t)`: probability that a signal P-value is at most `t`.
    pub fn cdf(&self, t: f64) -> Result<f64> {
        check_unit(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        if t == 1.0 {
            return Ok(1.0);
        }
        let xi = self.kernel.quantile(t)?;
        // Φ(y) = Φ̄(-y) by symmetry
        Ok(self.kernel.survival_unchecked(xi - self.mu))
    }

    /// The point `t* = Φ̄(μ)` where `F(t*) = 1/2`.
    pub fn median_point(&self) -> f64 {
        self.kernel.survival_unchecked(self.mu)
    }

    /// Mixture CDF `G(t) = (1 − ε) t + ε F(t)` of a P-value drawn from the
    /// sparse mixture with signal fraction `eps`.
    pub fn mixture_cdf(&self, eps: f64, t: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::domain("eps", format!("need eps in [0,1], got {eps}")));
        }
        Ok((1.0 - eps) * t + eps * self.cdf(t)?)
    }
}

fn check_unit(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::domain("t", format!("need t in [0,1], got {t}")))
    }
}
