//! KL and Jensen-Shannon divergences, in nats.

use crate::error::{GenexError, Result};

/// Floor applied to `q_i` when `p_i > 0` and `q_i == 0`.
pub const KL_FLOOR: f64 = 1e-12;
const SUM_TOL: f64 = 1e-6;

fn check_distribution(p: &[f64], name: &str) -> Result<()> {
    if p.is_empty() {
        return Err(GenexError::invalid(format!("{name} is empty")));
    }
    if p.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(GenexError::invalid(format!("{name} has a negative or non-finite entry")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > SUM_TOL {
        return Err(GenexError::invalid(format!("{name} sums to {s}, not 1")));
    }
    Ok(())
}

fn check_pair(p: &[f64], q: &[f64]) -> Result<()> {
    if p.len() != q.len() {
        return Err(GenexError::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    check_distribution(p, "p")?;
    check_distribution(q, "q")
}

/// `sum p_i ln(p_i / q_i)` without input validation.
pub fn kl_unchecked(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            total += pi * (pi / qi.max(KL_FLOOR)).ln();
        }
    }
    total.max(0.0)
}

/// Jensen-Shannon divergence through the midpoint `m = (p + q) / 2`, without
/// input validation. Exactly symmetric in its arguments.
pub fn js_unchecked(p: &[f64], q: &[f64]) -> f64 {
    let mut a = 0.0;
    let mut b = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        let mi = 0.5 * (pi + qi);
        if pi > 0.0 {
            a += pi * (pi / mi).ln();
        }
        if qi > 0.0 {
            b += qi * (qi / mi).ln();
        }
    }
    (0.5 * a + 0.5 * b).clamp(0.0, std::f64::consts::LN_2)
}

pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    Ok(kl_unchecked(p, q))
}

/// In `[0, ln 2]`; divide by `ln 2` for bits.
pub fn js_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    check_pair(p, q)?;
    Ok(js_unchecked(p, q))
}
