//! Consistency between the measures of complementary operators.
//!
//! From `sigma* = sigma2 m(h) = sigma1 w(z)` one gets
//! `t G(t) = delta - s F(s)` with `t = 1 - s`, which in terms of the
//! measures reads
//!
//! ```text
//! int lambda dalpha(lambda) / (t - lambda)
//!     = (delta - mu0 - alpha0) + int lambda dmu(lambda) / (t - (1 - lambda))
//! ```
//!
//! so `lambda dalpha` equals the reflection of `lambda dmu` through
//! `lambda -> 1 - lambda`. The atoms at zero, which the factor `lambda`
//! hides, are fixed by the endpoint values: `alpha({0}) = m(0)` and
//! `mu({0}) = w(0)`. The same statements hold for `eta` and `kappa`.

use crate::error::{Error, Result};
use crate::lattice::C64;
use crate::measure::SpectralMeasure;

/// Atoms within this distance of zero count as the atom at zero. Exact zeros
/// come out of the eigensolver near 1e-16, while genuine eigenvalues of the
/// `Upsilon` operators already reach 1e-9 at `L = 16`.
pub const ZERO_ATOM_TOL: f64 = 1e-12;

/// Largest discrepancy in the relation above over `t = 1 - s`,
/// `s = +-iy`, `y` log-spaced in `[0.1, 10]`, together with the two atom
/// conditions.
///
/// `mu` is the phase-one measure (`X1 Gamma X1` or `X1 Upsilon X1`) and
/// `alpha` the phase-two measure of the same projection. `m0` and `w0` are the
/// endpoint values `delta - F(1)` and `delta - G(1)`.
pub fn measure_relation_residual(
    mu: &SpectralMeasure<f64>,
    alpha: &SpectralMeasure<f64>,
    m0: f64,
    w0: f64,
) -> Result<f64> {
    let (a, b) = (&mu.info, &alpha.info);
    if a.d != b.d || a.side != b.side || a.seed != b.seed || a.j != b.j || a.k != b.k {
        return Err(Error::Config(format!(
            "measures come from different realizations or components: {a:?} vs {b:?}"
        )));
    }
    let delta = if a.j == a.k { 1.0 } else { 0.0 };
    let lhs_measure = alpha.first_moment_measure();
    let rhs_measure = mu.reflected_first_moment();
    let constant = delta - mu.mass() - alpha.mass();
    let mut worst: f64 = constant.abs();
    let points = 41;
    for p in 0..points {
        let y = 10f64.powf(-1.0 + 2.0 * p as f64 / (points - 1) as f64);
        for sign in [1.0, -1.0] {
            let t = C64::new(1.0, -sign * y);
            let lhs = lhs_measure.stieltjes(t)?;
            let rhs = rhs_measure.stieltjes(t)? + constant;
            worst = worst.max((lhs - rhs).norm());
        }
    }
    worst = worst.max((alpha.weight_near(0.0, ZERO_ATOM_TOL) - m0).abs());
    worst = worst.max((mu.weight_near(0.0, ZERO_ATOM_TOL) - w0).abs());
    Ok(worst)
}
