//! Gamma and two-parameter Mittag-Leffler functions on the real line.

use crate::error::{Error, Result};

/// Largest |z| accepted by [`mittag_leffler`]. Past this the alternating
/// series cancels catastrophically for small `alpha`.
pub const ML_MAX_ABS_Z: f64 = 50.0;

fn is_pole(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

/// Gamma function. Uses statrs' Lanczos approximation with reflection.
pub fn gamma(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma argument {x} is not finite")));
    }
    if is_pole(x) {
        return Err(Error::Pole(x));
    }
    if x == x.floor() && x <= 171.0 {
        // exact factorials where they are representable
        return Ok((2..x as u32).fold(1.0, |acc, k| acc * k as f64));
    }
    Ok(statrs::function::gamma::gamma(x))
}

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidParameter(format!("ln_gamma needs x > 0, got {x}")));
    }
    if x == x.floor() && x <= 171.0 {
        return Ok(gamma(x)?.ln());
    }
    Ok(statrs::function::gamma::ln_gamma(x))
}

/// Parameters of E_{α,β} and the truncation rule of its series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MLParams {
    pub alpha: f64,
    pub beta: f64,
    pub tol: f64,
    pub max_terms: usize,
}

impl MLParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        Self::with_truncation(alpha, beta, 1e-16, 2000)
    }

    pub fn with_truncation(alpha: f64, beta: f64, tol: f64, max_terms: usize) -> Result<Self> {
        let p = MLParams { alpha, beta, tol, max_terms };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be > 0, got {}", self.beta)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.max_terms < 10 {
            return Err(Error::InvalidParameter(format!(
                "max_terms must be at least 10, got {}",
                self.max_terms
            )));
        }
        Ok(())
    }
}

/// E_{α,β}(z) = Σ z^k / Γ(αk + β), summed with Neumaier compensation.
///
/// Terms are formed in log space so large k never overflows Γ. Summation
/// stops once the next term is below `tol·(1 + |sum|)`.
pub fn mittag_leffler(p: &MLParams, z: f64) -> Result<f64> {
    p.validate()?;
    if !z.is_finite() || z.abs() > ML_MAX_ABS_Z {
        return Err(Error::Precondition(format!(
            "mittag_leffler argument {z} outside |z| <= {ML_MAX_ABS_Z}"
        )));
    }
    if z == 0.0 {
        return Ok(1.0 / gamma(p.beta)?);
    }
    let ln_abs_z = z.abs().ln();
    let negative = z < 0.0;
    let term = |k: usize| -> Result<f64> {
        let mag = (k as f64 * ln_abs_z - ln_gamma(p.alpha * k as f64 + p.beta)?).exp();
        Ok(if negative && k % 2 == 1 { -mag } else { mag })
    };

    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut next = term(0)?;
    // past the largest term, magnitudes decrease monotonically
    let peak = ((z.abs().powf(1.0 / p.alpha) - p.beta) / p.alpha).max(0.0);
    for k in 0..p.max_terms {
        let t = next;
        let s = sum + t;
        comp += if sum.abs() >= t.abs() { (sum - s) + t } else { (t - s) + sum };
        sum = s;
        next = term(k + 1)?;
        if !sum.is_finite() {
            return Err(Error::NumericalOverflow(format!("Mittag-Leffler partial sum at z = {z}")));
        }
        if (k + 1) as f64 > peak && next.abs() < p.tol * (1.0 + (sum + comp).abs()) {
            return Ok(sum + comp);
        }
    }
    Err(Error::TruncationFailure {
        terms: p.max_terms,
        last_term: next.abs(),
    })
}
