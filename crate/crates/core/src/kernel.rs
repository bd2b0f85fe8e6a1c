//! Scalar radial kernels and the radial derivative quantities used to build
//! the matrix-valued div-free and curl-free kernels.
//!
//! For a radial function `phi(r)` with `r = |x - y|` the Hessian with respect
//! to `x` decomposes as
//!
//! ```text
//! grad grad^T phi = F(r) I + S(r) (x - y)(x - y)^T
//! F(r) = phi'(r) / r
//! S(r) = (phi''(r) - phi'(r) / r) / r^2
//! ```
//!
//! Both families shipped here have `F` and `S` that are polynomials (times an
//! exponential or a power of `1 + (eps r)^2`) in `r`, so the closed forms are
//! regular at `r = 0` and no limit switching is needed.

use crate::error::{Error, Result};

/// Kernel family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    /// Inverse multiquadric `1 / sqrt(1 + (eps r)^2)`.
    Imq,
    /// Matérn-type kernel `e^{-t} (1 + t + 3/7 t^2 + 2/21 t^3 + 1/105 t^4)`, `t = eps r`.
    Matern4,
}

impl std::fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelFamily::Imq => write!(f, "imq"),
            KernelFamily::Matern4 => write!(f, "matern4"),
        }
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "imq" => Ok(KernelFamily::Imq),
            "matern4" | "matern" => Ok(KernelFamily::Matern4),
            other => Err(Error::Config(format!("unknown kernel family `{other}`"))),
        }
    }
}

/// A radial kernel with a fixed shape parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialKernel {
    family: KernelFamily,
    eps: f64,
}

impl RadialKernel {
    pub fn new(family: KernelFamily, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Config(format!(
                "shape parameter must be positive and finite, got {eps}"
            )));
        }
        Ok(RadialKernel { family, eps })
    }

    pub fn imq(eps: f64) -> Result<Self> {
        Self::new(KernelFamily::Imq, eps)
    }

    pub fn matern4(eps: f64) -> Result<Self> {
        Self::new(KernelFamily::Matern4, eps)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Kernel value `phi(r)`.
    pub fn phi(&self, r: f64) -> Result<f64> {
        check_radius(r)?;
        Ok(self.phi_unchecked(r))
    }

    /// `phi'(r) / r`, continuous on `[0, inf)`.
    pub fn phi_d1_over_r(&self, r: f64) -> Result<f64> {
        check_radius(r)?;
        Ok(self.hessian_coeffs_unchecked(r).0)
    }

    /// Coefficients `(F, S)` of `grad grad^T phi = F I + S (x - y)(x - y)^T`.
    pub fn hessian_coeffs(&self, r: f64) -> Result<(f64, f64)> {
        check_radius(r)?;
        Ok(self.hessian_coeffs_unchecked(r))
    }

    /// Laplacian of `phi(|x|)` in `d` dimensions.
    pub fn laplacian(&self, r: f64, d: usize) -> Result<f64> {
        check_radius(r)?;
        if !(d == 2 || d == 3) {
            return Err(Error::Domain(format!("dimension must be 2 or 3, got {d}")));
        }
        let (f, s) = self.hessian_coeffs_unchecked(r);
        // phi'' = F + r^2 S, so phi'' + (d - 1) F = d F + r^2 S
        Ok(d as f64 * f + r * r * s)
    }

    #[inline]
    pub(crate) fn phi_unchecked(&self, r: f64) -> f64 {
        let t = self.eps * r;
        match self.family {
            KernelFamily::Imq => 1.0 / (1.0 + t * t).sqrt(),
            KernelFamily::Matern4 => {
                let p = 1.0 + t * (1.0 + t * (3.0 / 7.0 + t * (2.0 / 21.0 + t / 105.0)));
                (-t).exp() * p
            }
        }
    }

    #[inline]
    pub(crate) fn hessian_coeffs_unchecked(&self, r: f64) -> (f64, f64) {
        let e2 = self.eps * self.eps;
        let t = self.eps * r;
        match self.family {
            KernelFamily::Imq => {
                // s = 1 + t^2; phi' / r = -eps^2 s^{-3/2}; S = 3 eps^4 s^{-5/2}
                let s = 1.0 + t * t;
                let inv = 1.0 / s;
                let inv_sqrt = inv.sqrt();
                let f = -e2 * inv * inv_sqrt;
                let sc = 3.0 * e2 * e2 * inv * inv * inv_sqrt;
                (f, sc)
            }
            KernelFamily::Matern4 => {
                // phi' / r = -eps^2 e^{-t} (15 + 15t + 6t^2 + t^3) / 105
                // S        =  eps^4 e^{-t} (3 + 3t + t^2) / 105
                let ex = (-t).exp() / 105.0;
                let f = -e2 * ex * (15.0 + t * (15.0 + t * (6.0 + t)));
                let sc = e2 * e2 * ex * (3.0 + t * (3.0 + t));
                (f, sc)
            }
        }
    }
}

#[inline]
fn check_radius(r: f64) -> Result<()> {
    if r >= 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("radius must be non-negative, got {r}")))
    }
}
