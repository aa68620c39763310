//! Effective conductivity and resistivity tensors from spectral measures.
//!
//! With `h = sigma1/sigma2`, `z = 1/h`, `s = 1/(1-h)` and `t = 1-s`:
//!
//! ```text
//! sigma* / sigma2 = m(h)       = I - F(s),   F from mu    (X1 Gamma X1)
//! sigma* / sigma1 = w(z)       = I - G(t),   G from alpha (X2 Gamma X2)
//! sigma1 rho*     = m~(h)      = I - E(s),   E from eta   (X2 Upsilon X2)
//! sigma2 rho*     = w~(z)      = I - H(t),   H from kappa (X1 Upsilon X1)
//! ```
//!
//! Each tensor is therefore available through two independent measures.

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::measure::SpectralMeasure;
use crate::microgeometry::{Medium, Phase};
use crate::scalar::{Complex, Real};
use crate::spectral::{spectral_measures, OperatorKind, Projection, SymmetricOperator};
use serde::{Deserialize, Serialize};

/// Relative agreement required between the two routes to a tensor, and
/// between `rho* sigma*` and the identity.
pub const ROUTE_TOL: f64 = 1e-8;

/// Component conductivities and the contrast variables derived from them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContrastSet<T> {
    pub sigma1: Complex<T>,
    pub sigma2: Complex<T>,
    pub h: Complex<T>,
    pub z: Complex<T>,
}

impl<T: Real> ContrastSet<T> {
    /// Rejects contrasts with `h` on the closed negative real axis, where the
    /// representations lose analyticity (and the medium its coercivity).
    pub fn new(sigma1: Complex<T>, sigma2: Complex<T>) -> Result<Self> {
        let finite = |c: Complex<T>| c.re.is_finite() && c.im.is_finite();
        if !finite(sigma1) || !finite(sigma2) {
            return Err(Error::Config("conductivities must be finite".into()));
        }
        if sigma2.norm() == T::zero() || sigma1.norm() == T::zero() {
            return Err(Error::Domain(format!("h = sigma1/sigma2 with sigma1 = {sigma1}, sigma2 = {sigma2}")));
        }
        let h = sigma1 / sigma2;
        let tiny = T::lit(1e-14) * h.norm();
        if h.im.abs() <= tiny && h.re <= T::zero() {
            return Err(Error::Domain(format!("h = {h} lies on (-inf, 0]")));
        }
        Ok(Self { sigma1, sigma2, h, z: h.inv() })
    }

    pub fn real(sigma1: T, sigma2: T) -> Result<Self> {
        Self::new(Complex::new(sigma1, T::zero()), Complex::new(sigma2, T::zero()))
    }

    /// `h = 1` to working precision: a homogeneous medium, where `s` is
    /// undefined.
    pub fn is_homogeneous(&self) -> bool {
        (self.h - T::one()).norm() <= T::lit(1e-14)
    }

    /// `s = 1/(1-h)`, or `None` when homogeneous.
    pub fn s(&self) -> Option<Complex<T>> {
        if self.is_homogeneous() {
            None
        } else {
            Some((Complex::new(T::one(), T::zero()) - self.h).inv())
        }
    }

    /// `t = 1/(1-z) = 1-s`, or `None` when homogeneous.
    pub fn t(&self) -> Option<Complex<T>> {
        self.s().map(|s| Complex::new(T::one(), T::zero()) - s)
    }

    pub fn scaled(&self, c: Complex<T>) -> Result<Self> {
        Self::new(self.sigma1 * c, self.sigma2 * c)
    }

    pub fn conj(&self) -> Result<Self> {
        Self::new(self.sigma1.conj(), self.sigma2.conj())
    }
}

/// The four measure families of one realization, each indexed `[j][k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct MeasureSet<T> {
    pub d: usize,
    pub mu: Vec<Vec<SpectralMeasure<T>>>,
    pub alpha: Vec<Vec<SpectralMeasure<T>>>,
    pub eta: Vec<Vec<SpectralMeasure<T>>>,
    pub kappa: Vec<Vec<SpectralMeasure<T>>>,
}

/// The measure families, named by the tensor route they feed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Mu,
    Alpha,
    Eta,
    Kappa,
}

impl Route {
    pub const ALL: [Route; 4] = [Route::Mu, Route::Alpha, Route::Eta, Route::Kappa];

    pub fn label(&self) -> &'static str {
        match self {
            Route::Mu => "mu",
            Route::Alpha => "alpha",
            Route::Eta => "eta",
            Route::Kappa => "kappa",
        }
    }

    pub fn phase_and_projection(&self) -> (Phase, Projection) {
        match self {
            Route::Mu => (Phase::One, Projection::Gamma),
            Route::Alpha => (Phase::Two, Projection::Gamma),
            Route::Eta => (Phase::Two, Projection::Upsilon),
            Route::Kappa => (Phase::One, Projection::Upsilon),
        }
    }
}

impl MeasureSet<f64> {
    /// Assembles and decomposes the four operators of `medium`.
    pub fn compute(medium: &Medium, lat: &Lattice, dense_cap: usize) -> Result<Self> {
        Self::compute_routes(medium, lat, dense_cap, &Route::ALL)
    }

    /// Only the requested families; the others are left empty.
    pub fn compute_routes(medium: &Medium, lat: &Lattice, dense_cap: usize, routes: &[Route]) -> Result<Self> {
        let mut set = Self { d: lat.dim(), mu: vec![], alpha: vec![], eta: vec![], kappa: vec![] };
        for route in routes {
            let (phase, projection) = route.phase_and_projection();
            let kind = OperatorKind::for_medium(medium, phase, projection);
            let op = SymmetricOperator::assemble(kind, medium, lat, dense_cap)?;
            *set.family_mut(*route) = spectral_measures(&op)?;
        }
        Ok(set)
    }
}

impl<T: Real> MeasureSet<T> {
    pub fn family(&self, route: Route) -> &Vec<Vec<SpectralMeasure<T>>> {
        match route {
            Route::Mu => &self.mu,
            Route::Alpha => &self.alpha,
            Route::Eta => &self.eta,
            Route::Kappa => &self.kappa,
        }
    }

    fn family_mut(&mut self, route: Route) -> &mut Vec<Vec<SpectralMeasure<T>>> {
        match route {
            Route::Mu => &mut self.mu,
            Route::Alpha => &mut self.alpha,
            Route::Eta => &mut self.eta,
            Route::Kappa => &mut self.kappa,
        }
    }
}

fn delta<T: Real>(j: usize, k: usize) -> Complex<T> {
    if j == k {
        Complex::new(T::one(), T::zero())
    } else {
        Complex::new(T::zero(), T::zero())
    }
}

/// `delta_jk - (transform of family at x)` for every entry, row-major.
fn resolvent_matrix<T: Real>(family: &[Vec<SpectralMeasure<T>>], x: Complex<T>) -> Result<Vec<Complex<T>>> {
    let d = family.len();
    let mut out = Vec::with_capacity(d * d);
    for (j, row) in family.iter().enumerate() {
        for (k, m) in row.iter().enumerate() {
            out.push(delta::<T>(j, k) - m.stieltjes(x)?);
        }
    }
    Ok(out)
}

/// `sigma*` and `rho*` through all four routes, row-major `d x d`.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveTensor<T> {
    pub d: usize,
    pub sigma_mu: Vec<Complex<T>>,
    pub sigma_alpha: Vec<Complex<T>>,
    pub rho_eta: Vec<Complex<T>>,
    pub rho_kappa: Vec<Complex<T>>,
}

impl<T: Real> EffectiveTensor<T> {
    /// Primary `sigma*` (the mu route).
    pub fn sigma_star(&self) -> &[Complex<T>] {
        &self.sigma_mu
    }

    /// Primary `rho*` (the eta route).
    pub fn rho_star(&self) -> &[Complex<T>] {
        &self.rho_eta
    }

    pub fn route(&self, route: Route) -> &[Complex<T>] {
        match route {
            Route::Mu => &self.sigma_mu,
            Route::Alpha => &self.sigma_alpha,
            Route::Eta => &self.rho_eta,
            Route::Kappa => &self.rho_kappa,
        }
    }

    /// Largest entrywise route disagreement relative to the largest entry,
    /// for `sigma*` and `rho*`.
    pub fn route_discrepancy(&self) -> (T, T) {
        (relative_gap(&self.sigma_mu, &self.sigma_alpha), relative_gap(&self.rho_eta, &self.rho_kappa))
    }

    /// `max |rho* sigma* - I|` over entries.
    pub fn reciprocity_residual(&self) -> T {
        let d = self.d;
        let mut worst = T::zero();
        for i in 0..d {
            for j in 0..d {
                let mut acc = Complex::new(T::zero(), T::zero());
                for k in 0..d {
                    acc = acc + self.rho_eta[i * d + k] * self.sigma_mu[k * d + j];
                }
                worst = worst.max((acc - delta::<T>(i, j)).norm());
            }
        }
        worst
    }
}

fn relative_gap<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> T {
    let scale = a.iter().chain(b).fold(T::zero(), |m, z| m.max(z.norm()));
    let gap = a.iter().zip(b).fold(T::zero(), |m, (x, y)| m.max((*x - *y).norm()));
    if scale == T::zero() {
        gap
    } else {
        gap / scale
    }
}

/// All four routes without consistency checks. Empty families yield empty
/// route vectors.
pub fn evaluate_routes<T: Real>(measures: &MeasureSet<T>, cs: &ContrastSet<T>) -> Result<EffectiveTensor<T>> {
    let d = measures.d;
    let (s1, s2) = (cs.sigma1, cs.sigma2);
    let Some(s) = cs.s() else {
        let ident: Vec<Complex<T>> = (0..d * d).map(|e| delta::<T>(e / d, e % d)).collect();
        return Ok(EffectiveTensor {
            d,
            sigma_mu: ident.iter().map(|v| *v * s2).collect(),
            sigma_alpha: ident.iter().map(|v| *v * s2).collect(),
            rho_eta: ident.iter().map(|v| *v / s2).collect(),
            rho_kappa: ident.iter().map(|v| *v / s2).collect(),
        });
    };
    let t = Complex::new(T::one(), T::zero()) - s;
    let scale = |v: Vec<Complex<T>>, f: &dyn Fn(Complex<T>) -> Complex<T>| v.into_iter().map(f).collect::<Vec<_>>();
    let sigma_mu = scale(resolvent_matrix(&measures.mu, s)?, &|m| s2 * m);
    let sigma_alpha = scale(resolvent_matrix(&measures.alpha, t)?, &|w| s1 * w);
    let rho_eta = scale(resolvent_matrix(&measures.eta, s)?, &|m| m / s1);
    let rho_kappa = scale(resolvent_matrix(&measures.kappa, t)?, &|w| w / s2);
    Ok(EffectiveTensor { d, sigma_mu, sigma_alpha, rho_eta, rho_kappa })
}

/// All four routes, failing with a consistency error if the two routes to
/// either tensor disagree beyond [`ROUTE_TOL`].
pub fn effective_tensor<T: Real>(measures: &MeasureSet<T>, cs: &ContrastSet<T>) -> Result<EffectiveTensor<T>> {
    let et = evaluate_routes(measures, cs)?;
    let (gs, gr) = et.route_discrepancy();
    let tol = T::lit(ROUTE_TOL);
    if !(gs <= tol && gr <= tol) {
        let seed = measures.mu.first().and_then(|r| r.first()).and_then(|m| m.info.seed);
        return Err(Error::Consistency(format!(
            "route disagreement on realization with seed {seed:?}: sigma* {gs}, rho* {gr} (tolerance {ROUTE_TOL:e})"
        )));
    }
    Ok(et)
}

/// `m(0) = delta_jk - F_jk(1)`, the value of `m` at `h = 0`.
pub fn m_at_zero<T: Real>(mu: &SpectralMeasure<T>) -> T {
    (delta::<T>(mu.info.j, mu.info.k) - mu.stieltjes_unchecked(Complex::new(T::one(), T::zero()))).re
}

/// `w(0) = delta_jk - G_jk(1)`, the value of `w` at `z = 0`.
pub fn w_at_zero<T: Real>(alpha: &SpectralMeasure<T>) -> T {
    m_at_zero(alpha)
}

/// `m_kk(h) = 1 - F_kk(s(h))` for a diagonal measure; `1` at `h = 1`.
pub fn m_of_h<T: Real>(mu_kk: &SpectralMeasure<T>, h: Complex<T>) -> Result<Complex<T>> {
    let one = Complex::new(T::one(), T::zero());
    if (h - one).norm() <= T::lit(1e-14) {
        return Ok(one);
    }
    Ok(one - mu_kk.stieltjes((one - h).inv())?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HerglotzViolation {
    pub h: (f64, f64),
    pub k: usize,
    pub im_m: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HerglotzReport {
    pub samples: usize,
    /// Smallest `Im m_kk(h)` seen.
    pub min_im: f64,
    pub violations: Vec<HerglotzViolation>,
}

/// Evaluates `m_kk(h)` for every diagonal measure over `grid` (points with
/// `Im h > 0`) and lists negative imaginary parts. A measure of zero mass
/// gives the constant `m = 1`, which sits on the boundary and is not a
/// violation.
pub fn herglotz_scan<T: Real>(mu: &[Vec<SpectralMeasure<T>>], grid: &[Complex<T>]) -> Result<HerglotzReport> {
    let mut report = HerglotzReport { samples: 0, min_im: f64::INFINITY, violations: vec![] };
    for &h in grid {
        if !(h.im > T::zero()) {
            return Err(Error::Config(format!("Herglotz grid point {h} is not in the upper half plane")));
        }
        for (k, row) in mu.iter().enumerate() {
            let m = m_of_h(&row[k], h)?;
            let im = m.im.to_f64_lossy();
            report.samples += 1;
            report.min_im = report.min_im.min(im);
            if im < -1e-12 * m.norm().to_f64_lossy().max(1.0) {
                report.violations.push(HerglotzViolation {
                    h: (h.re.to_f64_lossy(), h.im.to_f64_lossy()),
                    k,
                    im_m: im,
                });
            }
        }
    }
    Ok(report)
}

/// A `n x n` grid of `h = x + iy` with `x` in `[-xmax, xmax]` and `y`
/// log-spaced in `[ymin, ymax]`.
pub fn upper_half_plane_grid(n: usize, xmax: f64, ymin: f64, ymax: f64) -> Vec<Complex<f64>> {
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        let x = -xmax + 2.0 * xmax * a as f64 / (n.max(2) - 1) as f64;
        for b in 0..n {
            let y = ymin * (ymax / ymin).powf(b as f64 / (n.max(2) - 1) as f64);
            out.push(Complex::new(x, y));
        }
    }
    out
}
