//! One-dimensional interval probabilities for the supported smoothing kernels.
//!
//! Every kernel is a location-scale family with location 0 and scale 1 at the
//! standardized level. For an observation coordinate `x`, an interval
//! `(lo, hi]` and a scale `sigma`, the interval probability is
//! `F((hi - x) / sigma) - F((lo - x) / sigma)` where `F` is the standardized
//! CDF. The product of these factors over coordinates is the smoothing measure
//! of a rectangular region.

use std::fmt;
use std::str::FromStr;

use statrs::function::beta::beta_reg;
use libm::erfc;
use statrs::function::gamma::{gamma_lr, gamma_ur};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Gaussian,
    /// Log-normal with log-scale standard deviation `s`, supported on `v > x`.
    LogNormal,
    /// Student t with `nu` degrees of freedom.
    StudentT,
    /// Gamma with shape `alpha` and unit scale, supported on `v > x`.
    Gamma,
}

impl KernelFamily {
    pub fn needs_shape(self) -> bool {
        !matches!(self, KernelFamily::Gaussian)
    }

    /// Short name used on the command line and in model files.
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Gaussian => "norm",
            KernelFamily::LogNormal => "lnorm",
            KernelFamily::StudentT => "t",
            KernelFamily::Gamma => "gamma",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "norm" | "gaussian" | "normal" => Ok(KernelFamily::Gaussian),
            "lnorm" | "lognormal" => Ok(KernelFamily::LogNormal),
            "t" | "student_t" | "student-t" => Ok(KernelFamily::StudentT),
            "gamma" => Ok(KernelFamily::Gamma),
            other => Err(Error::Parameter(format!("unknown kernel family '{other}'"))),
        }
    }
}

/// A validated kernel: the family plus its shape parameter when the family
/// has one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    shape: Option<f64>,
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::gaussian()
    }
}

impl KernelSpec {
    pub fn new(family: KernelFamily, shape: Option<f64>) -> Result<Self> {
        match (family.needs_shape(), shape) {
            (false, None) => Ok(KernelSpec { family, shape: None }),
            (false, Some(_)) => Err(Error::Parameter(format!(
                "kernel '{family}' takes no shape parameter"
            ))),
            (true, None) => Err(Error::Parameter(format!(
                "kernel '{family}' requires a shape parameter"
            ))),
            (true, Some(s)) if s.is_finite() && s > 0.0 => Ok(KernelSpec {
                family,
                shape: Some(s),
            }),
            (true, Some(s)) => Err(Error::Parameter(format!(
                "kernel '{family}' shape parameter must be positive and finite, got {s}"
            ))),
        }
    }

    pub fn gaussian() -> Self {
        KernelSpec {
            family: KernelFamily::Gaussian,
            shape: None,
        }
    }

    pub fn lognormal(sdlog: f64) -> Result<Self> {
        KernelSpec::new(KernelFamily::LogNormal, Some(sdlog))
    }

    pub fn student_t(df: f64) -> Result<Self> {
        KernelSpec::new(KernelFamily::StudentT, Some(df))
    }

    pub fn gamma(shape: f64) -> Result<Self> {
        KernelSpec::new(KernelFamily::Gamma, Some(shape))
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn shape(&self) -> Option<f64> {
        self.shape
    }

    /// Probability that the kernel centred at `x` with scale `sigma` falls in
    /// `(lo, hi]`. Either bound may be infinite.
    pub fn interval_prob(&self, x: f64, lo: f64, hi: f64, sigma: f64) -> Result<f64> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Parameter(format!(
                "kernel scale must be positive and finite, got {sigma}"
            )));
        }
        if !x.is_finite() {
            return Err(Error::Parameter(format!(
                "kernel centre must be finite, got {x}"
            )));
        }
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::Parameter(format!(
                "interval bounds must satisfy lo <= hi, got ({lo}, {hi})"
            )));
        }
        Ok(self.prob(x, lo, hi, sigma))
    }

    /// Unchecked variant of [`KernelSpec::interval_prob`] for inner loops
    /// whose inputs were validated upstream.
    #[inline]
    pub(crate) fn prob(&self, x: f64, lo: f64, hi: f64, sigma: f64) -> f64 {
        let a = (lo - x) / sigma;
        let b = (hi - x) / sigma;
        let p = match self.family {
            KernelFamily::Gaussian => normal_mass(a, b),
            KernelFamily::StudentT => student_t_mass(self.shape.unwrap_or(1.0), a, b),
            KernelFamily::LogNormal => lognormal_mass(self.shape.unwrap_or(1.0), a, b),
            KernelFamily::Gamma => gamma_mass(self.shape.unwrap_or(1.0), a, b),
        };
        p.clamp(0.0, 1.0)
    }

    /// Standardized CDF of the family.
    pub fn cdf(&self, t: f64) -> f64 {
        self.prob(0.0, f64::NEG_INFINITY, t, 1.0)
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.shape {
            Some(s) => write!(f, "{}({})", self.family, s),
            None => write!(f, "{}", self.family),
        }
    }
}

/// Upper-tail probability of the standard normal.
fn normal_sf(t: f64) -> f64 {
    if t == f64::INFINITY {
        0.0
    } else if t == f64::NEG_INFINITY {
        1.0
    } else {
        0.5 * erfc(t / std::f64::consts::SQRT_2)
    }
}

fn normal_mass(a: f64, b: f64) -> f64 {
    // Work in whichever tail keeps both terms small.
    if a >= 0.0 {
        normal_sf(a) - normal_sf(b)
    } else if b <= 0.0 {
        normal_sf(-b) - normal_sf(-a)
    } else {
        1.0 - normal_sf(-a) - normal_sf(b)
    }
}

/// Upper-tail probability of Student t with `nu` degrees of freedom, `t >= 0`.
fn student_t_sf_pos(nu: f64, t: f64) -> f64 {
    if t == f64::INFINITY {
        return 0.0;
    }
    let t2 = t * t;
    if t2 < nu {
        // I_{t^2/(nu+t^2)}(1/2, nu/2) is the central mass; avoids cancellation near 0.
        0.5 - 0.5 * beta_reg(0.5, 0.5 * nu, t2 / (nu + t2))
    } else {
        0.5 * beta_reg(0.5 * nu, 0.5, nu / (nu + t2))
    }
}

fn student_t_mass(nu: f64, a: f64, b: f64) -> f64 {
    let sf = |t: f64| {
        if t >= 0.0 {
            student_t_sf_pos(nu, t)
        } else {
            1.0 - student_t_sf_pos(nu, -t)
        }
    };
    if a >= 0.0 {
        sf(a) - sf(b)
    } else if b <= 0.0 {
        student_t_sf_pos(nu, -b) - student_t_sf_pos(nu, -a)
    } else {
        1.0 - student_t_sf_pos(nu, -a) - student_t_sf_pos(nu, b)
    }
}

fn lognormal_mass(sdlog: f64, a: f64, b: f64) -> f64 {
    // Support is t > 0; everything at or below zero has no mass.
    let to_normal = |t: f64| {
        if t <= 0.0 {
            f64::NEG_INFINITY
        } else {
            t.ln() / sdlog
        }
    };
    normal_mass(to_normal(a), to_normal(b))
}

fn gamma_mass(shape: f64, a: f64, b: f64) -> f64 {
    let lower = |t: f64| {
        if t <= 0.0 {
            0.0
        } else if t == f64::INFINITY {
            1.0
        } else {
            gamma_lr(shape, t)
        }
    };
    let upper = |t: f64| {
        if t <= 0.0 {
            1.0
        } else if t == f64::INFINITY {
            0.0
        } else {
            gamma_ur(shape, t)
        }
    };
    let a = a.max(0.0);
    if a > shape {
        // Both bounds in the right tail.
        upper(a) - upper(b)
    } else {
        lower(b) - lower(a)
    }
}
