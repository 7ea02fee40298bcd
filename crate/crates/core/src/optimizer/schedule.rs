//! Theoretical step size and gossip-round schedules.

use crate::error::{Error, Result};

/// Problem and network constants entering the step-size formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizeParams {
    /// Smoothness constant.
    pub l: f64,
    /// Initial gap `f(xbar^(0)) - inf f`.
    pub delta: f64,
    /// Gradient-noise variance bound.
    pub sigma2: f64,
    pub n: usize,
    /// Iteration budget.
    pub k: usize,
    pub beta_pi: f64,
    pub kappa_pi: f64,
    /// `|y^(0)|_F^2`.
    pub y0_norm2: f64,
}

impl StepSizeParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidParameter(format!("{what} = {v}")));
        if !(self.l > 0.0 && self.l.is_finite()) {
            return bad("L", self.l);
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad("Delta", self.delta);
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return bad("sigma2", self.sigma2);
        }
        if !(0.0..1.0).contains(&self.beta_pi) {
            return bad("beta_pi", self.beta_pi);
        }
        if !(self.kappa_pi >= 1.0 && self.kappa_pi.is_finite()) {
            return bad("kappa_pi", self.kappa_pi);
        }
        if !(self.y0_norm2 >= 0.0 && self.y0_norm2.is_finite()) {
            return bad("y0_norm2", self.y0_norm2);
        }
        if self.n == 0 {
            return bad("n", 0.0);
        }
        Ok(())
    }

    /// The six reciprocals `1 / gamma_i`. A term whose bound is infinite
    /// (zero noise, `beta_pi = 0`, zero initial tracker) is exactly 0.
    pub fn inverse_terms(&self) -> Result<[f64; 6]> {
        self.validate()?;
        let (l, d, s2) = (self.l, self.delta, self.sigma2);
        let n = self.n as f64;
        let k1 = self.k as f64 + 1.0;
        let (b, kap) = (self.beta_pi, self.kappa_pi);
        let gap = 1.0 - b;
        Ok([
            (k1 * l * s2 / (2.0 * n * d)).sqrt(),
            (2.0 * k1 * l * l * kap.powi(6) * b.powi(4) / (d * gap.powi(3))).cbrt(),
            (1200.0 * k1 * l.powi(4) * kap.powi(8) * b.powi(4) * s2 / (n * n * d * gap.powi(4)))
                .powf(0.2),
            (4.0 * l * l * kap.powi(4) * b * b * self.y0_norm2 / (gap * gap * d)).cbrt(),
            40.0 * l * kap.powi(7) * b / (gap * gap),
            2.0 * l,
        ])
    }

    /// The six individual bounds `gamma_i`; dropped terms are `inf`.
    pub fn terms(&self) -> Result<[f64; 6]> {
        Ok(self.inverse_terms()?.map(|t| 1.0 / t))
    }

    /// The same constants seen through `R` gossip rounds per iteration:
    /// `beta_pi -> beta_pi^R` and `sigma2 -> sigma2 / R`.
    pub fn multi_round(&self, rounds: usize) -> Result<Self> {
        if rounds == 0 {
            return Err(Error::InvalidParameter("R must be at least 1".into()));
        }
        Ok(Self {
            beta_pi: self.beta_pi.powi(rounds as i32),
            sigma2: self.sigma2 / rounds as f64,
            ..*self
        })
    }
}

/// Harmonic combination `1 / sum_i gamma_i^{-1}` of the six bounds.
pub fn theoretical_gamma(p: &StepSizeParams) -> Result<f64> {
    Ok(1.0 / p.inverse_terms()?.iter().sum::<f64>())
}

/// Step size for the multi-round variant with `rounds` gossip rounds.
pub fn mg_theoretical_gamma(p: &StepSizeParams, rounds: usize) -> Result<f64> {
    theoretical_gamma(&p.multi_round(rounds)?)
}

/// Real-valued round count before the ceiling; `n` may be fractional.
pub fn mg_r_value(kappa_pi: f64, n: f64, beta_pi: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&beta_pi) {
        return Err(Error::InvalidParameter(format!("beta_pi = {beta_pi}")));
    }
    if !(kappa_pi >= 1.0 && kappa_pi.is_finite()) {
        return Err(Error::InvalidParameter(format!("kappa_pi = {kappa_pi}")));
    }
    if !(n >= 1.0 && n.is_finite()) {
        return Err(Error::InvalidParameter(format!("n = {n}")));
    }
    let a = 1.0 + (7.0 * kappa_pi.ln()).sqrt();
    let b = 1.0 + (2.0 * n.ln()).sqrt();
    Ok((a * a + b * b) / (1.0 - beta_pi))
}

/// Gossip rounds per iteration for the multi-round variant.
pub fn mg_r_schedule(kappa_pi: f64, n: usize, beta_pi: f64) -> Result<usize> {
    Ok(mg_r_value(kappa_pi, n as f64, beta_pi)?.ceil() as usize)
}

/// Transient times `(vanilla, multi-round, lower bound)`:
/// `n^3 kappa^14 / (1-beta)^6` and twice `n (1 + ln kappa)^2 / (1-beta)^2`.
pub fn transient_times(beta_pi: f64, kappa_pi: f64, n: usize) -> Result<(f64, f64, f64)> {
    if !(0.0..1.0).contains(&beta_pi) {
        return Err(Error::InvalidParameter(format!("beta_pi = {beta_pi}")));
    }
    if !(kappa_pi >= 1.0) {
        return Err(Error::InvalidParameter(format!("kappa_pi = {kappa_pi}")));
    }
    let n = n as f64;
    let gap = 1.0 - beta_pi;
    let pd = n.powi(3) * kappa_pi.powi(14) / gap.powi(6);
    let mg = n * (1.0 + kappa_pi.ln()).powi(2) / (gap * gap);
    Ok((pd, mg, mg))
}
