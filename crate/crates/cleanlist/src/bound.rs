//! Worst-case error-rate bound for a clean list.
//!
//! The three failure channels are: another same-length dictionary word at
//! modified Hamming distance >= 2, a different-length dictionary word at
//! modified edit distance >= 1, and a non-dictionary truth word. With
//! misread rate `epsilon`, domination pass rate `delta`, neighborhood counts
//! growing geometrically at rates r, and r * 2 * epsilon / delta < 1/2, each
//! channel's series is majorized by twice its first term, giving
//!
//! ```text
//! total <= (8 * D2 * eps^2 + 8 * E1 * eps^2 + 4 * p1 * eps) / delta^2
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    /// Worst-case rate at which a glyph outscores its own class against some
    /// non-confusable class.
    pub epsilon: f64,
    /// Worst-case rate at which a correctly read glyph passes domination.
    pub delta: f64,
    /// Same-length dictionary words at modified Hamming distance exactly 2.
    pub d2: u64,
    /// Different-length dictionary words at modified edit distance exactly 1.
    pub e1: u64,
    /// Relative likelihood mass of non-dictionary words at distance 1.
    pub p1: f64,
    pub r_d: f64,
    pub r_e: f64,
    pub r_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundBreakdown {
    pub hamming_term: f64,
    pub edit_term: f64,
    pub nondict_term: f64,
    pub total: f64,
    pub regime_ok: bool,
    pub violations: Vec<String>,
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Usage(msg));
        if !self.epsilon.is_finite() || !(0.0..1.0).contains(&self.epsilon) {
            return bad(format!("epsilon must be in [0, 1), got {}", self.epsilon));
        }
        if !self.delta.is_finite() || !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad(format!("delta must be in (0, 1], got {}", self.delta));
        }
        if !self.p1.is_finite() || self.p1 < 0.0 {
            return bad(format!("p1 must be non-negative, got {}", self.p1));
        }
        for (name, r) in [("r_d", self.r_d), ("r_e", self.r_e), ("r_n", self.r_n)] {
            if !r.is_finite() || r <= 0.0 {
                return bad(format!("{name} must be positive and finite, got {r}"));
            }
        }
        Ok(())
    }
}

/// Evaluates the per-channel bound terms and the regime conditions under
/// which the majorization is valid.
pub fn evaluate_bound(params: &BoundParams) -> Result<BoundBreakdown> {
    params.validate()?;
    let eps = params.epsilon;
    let delta_sq = params.delta * params.delta;
    let hamming_term = 8.0 * params.d2 as f64 * eps * eps / delta_sq;
    let edit_term = 8.0 * params.e1 as f64 * eps * eps / delta_sq;
    let nondict_term = 4.0 * params.p1 * eps / delta_sq;
    let violations = regime_check(params);
    Ok(BoundBreakdown {
        hamming_term,
        edit_term,
        nondict_term,
        total: hamming_term + edit_term + nondict_term,
        regime_ok: violations.is_empty(),
        violations,
    })
}

/// The aggregate form used for headline numbers: coefficients
/// `dict_coeff = 8 * (D2 + E1)` and `nondict_coeff = 4 * p1` are taken as
/// given instead of being derived from integer counts.
pub fn evaluate_aggregate_bound(
    epsilon: f64,
    dict_coeff: f64,
    nondict_coeff: f64,
    delta_sq: f64,
) -> f64 {
    (dict_coeff * epsilon * epsilon + nondict_coeff * epsilon) / delta_sq
}

/// Names every violated regime condition; an empty list means the bound's
/// derivation applies.
pub fn regime_check(params: &BoundParams) -> Vec<String> {
    let mut violations = Vec::new();
    let q = 2.0 * params.epsilon / params.delta;
    for (name, r) in [
        ("r_D", params.r_d),
        ("r_E", params.r_e),
        ("r_N", params.r_n),
    ] {
        if r * q >= 0.5 {
            violations.push(format!("{name}*2*eps/delta >= 1/2"));
        }
    }
    if params.epsilon >= 1e-3 {
        violations.push("eps >= 1e-3".to_string());
    }
    if 8.0 * (params.d2 + params.e1) as f64 >= 1e2 {
        violations.push("8*(D2+E1) >= 1e2".to_string());
    }
    if 4.0 * params.p1 >= 1e-1 {
        violations.push("4*p1 >= 1e-1".to_string());
    }
    if params.delta * params.delta <= 1e-1 {
        violations.push("delta^2 <= 1e-1".to_string());
    }
    violations
}
