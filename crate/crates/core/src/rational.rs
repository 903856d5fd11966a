//! Continued-fraction convergents and small-denominator recovery.

use num_integer::Integer;

/// Convergents `p/q` of the regular continued fraction of `x`, at most `max_terms` of them.
///
/// Expansion stops early when the remainder vanishes or the denominators
/// leave the exactly-representable integer range.
pub fn convergents(x: f64, max_terms: usize) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    if !x.is_finite() {
        return out;
    }
    let (mut p_prev, mut p) = (1i64, x.floor() as i64);
    let (mut q_prev, mut q) = (0i64, 1i64);
    out.push((p, q));
    let mut rem = x - x.floor();
    while out.len() < max_terms && rem > 1e-15 {
        let inv = 1.0 / rem;
        let a = inv.floor();
        rem = inv - a;
        let a = a as i64;
        let (Some(pn), Some(qn)) = (
            a.checked_mul(p).and_then(|v| v.checked_add(p_prev)),
            a.checked_mul(q).and_then(|v| v.checked_add(q_prev)),
        ) else {
            break;
        };
        if qn > (1i64 << 52) {
            break;
        }
        p_prev = p;
        q_prev = q;
        p = pn;
        q = qn;
        out.push((p, q));
    }
    out
}

/// The first convergent of `x` with denominator at most `max_den` lying within `tol` of `x`.
pub fn small_rational(x: f64, max_den: i64, tol: f64) -> Option<(i64, i64)> {
    convergents(x, 64)
        .into_iter()
        .take_while(|&(_, q)| q <= max_den)
        .find(|&(p, q)| (p as f64 / q as f64 - x).abs() <= tol)
}

/// Least common multiple of the denominators of `xs`, if all are small rationals.
///
/// Returns the first value that has no representation with denominator up to
/// `max_den` as the error.
pub fn common_denominator(xs: &[f64], max_den: i64, tol: f64) -> Result<i64, f64> {
    let mut l = 1i64;
    for &x in xs {
        let (_, q) = small_rational(x, max_den, tol).ok_or(x)?;
        l = l.lcm(&q);
    }
    Ok(l)
}
