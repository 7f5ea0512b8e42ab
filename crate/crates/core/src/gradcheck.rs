//! Finite-difference gradient oracles.
//!
//! These helpers evaluate a loss closure directly — they never touch the tape
//! machinery — so they stay independent of the code path they are used to
//! check. `central_diff` is the workhorse: perturb one coordinate at a time
//! and take the symmetric quotient.

/// Central finite difference of `f` at `at`, one coordinate at a time.
///
/// `f` receives the full perturbed vector and must be a pure function of it.
pub fn central_diff(mut f: impl FnMut(&[f64]) -> f64, at: &[f64], step: f64) -> Vec<f64> {
    let mut xs = at.to_vec();
    let mut out = Vec::with_capacity(xs.len());
    for i in 0..xs.len() {
        let orig = xs[i];
        xs[i] = orig + step;
        let up = f(&xs);
        xs[i] = orig - step;
        let down = f(&xs);
        xs[i] = orig;
        out.push((up - down) / (2.0 * step));
    }
    out
}

/// Relative error with a small denominator floor.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / f64::max(a.abs() + b.abs(), 1e-8)
}

/// Worst relative error between an analytic gradient and a numeric one.
///
/// Entries whose absolute difference is below `abs_floor` count as exact:
/// a parameter with true gradient zero sits at the noise floor of the
/// difference quotient, where a relative measure is meaningless.
/// Returns `(index, error)` of the worst entry, or `(0, 0.0)` when empty.
pub fn worst_rel_err(analytic: &[f64], numeric: &[f64], abs_floor: f64) -> (usize, f64) {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    let mut worst = (0usize, 0.0f64);
    for (i, (&a, &n)) in analytic.iter().zip(numeric).enumerate() {
        if (a - n).abs() <= abs_floor {
            continue;
        }
        let e = rel_err(a, n);
        if e > worst.1 {
            worst = (i, e);
        }
    }
    worst
}
