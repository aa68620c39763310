//! Forward bounds on a diagonal entry of `sigma*`.
//!
//! Values of `F(s) = int dmu/(s - lambda)` over all admissible measures fill a
//! lens bounded by two circular arcs, and so do their images in the
//! `sigma*`-plane, because every map involved is a Mobius transformation.
//!
//! First order (mass `mu0` known, `eta0 = 1 - mu0`): the arcs
//! `sigma2 (1 - mu0/(s - lambda))`, `lambda` in `[0, eta0]`, and
//! `sigma1 / (1 - eta0/(s - lambda))`, `lambda` in `[0, mu0]`. They meet at the
//! arithmetic and harmonic means, which are the Wiener bounds for real
//! contrast.
//!
//! Second order (`mu1` known as well): the extreme measures have two atoms
//! with one of them at an endpoint of `[0, 1]`. With `m = mu1/mu0` the two arcs
//! are `b1 = 0, b2` in `[m, 1]` and `b2 = 1, b1` in `[0, m]`. The same is done
//! for `eta` with `eta1 = mu0 eta0 - mu1` (the isotropic closure), mapped
//! through `sigma1 / (1 - E)`, and the region is the intersection.

use crate::effective::ContrastSet;
use crate::error::{Error, Result};
use crate::scalar::{Complex, Real};
use serde::{Deserialize, Serialize};

/// Samples per arc before refinement.
pub const ARC_SAMPLES: usize = 2048;

/// A sampled boundary arc, endpoints included.
#[derive(Clone, Debug, PartialEq)]
pub struct Arc<T> {
    pub points: Vec<Complex<T>>,
}

impl<T: Real> Arc<T> {
    fn sample(f: &dyn Fn(T) -> Complex<T>, lo: T, hi: T, n: usize) -> Self {
        let params: Vec<T> = (0..n)
            .map(|i| lo + (hi - lo) * T::from_usize(i).expect("index") / T::from_usize(n - 1).expect("count"))
            .collect();
        let mut points: Vec<Complex<T>> = params.iter().map(|&p| f(p)).collect();
        // One refinement pass where the image is stretched.
        let mut gaps: Vec<T> = points.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
        let mut sorted = gaps.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        let median = sorted[sorted.len() / 2];
        if median > T::zero() {
            let mut refined = Vec::with_capacity(points.len() * 2);
            for i in 0..points.len() - 1 {
                refined.push(points[i]);
                if gaps[i] > median * T::lit(4.0) {
                    let extra = 8;
                    for e in 1..extra {
                        let frac = T::from_usize(e).expect("e") / T::from_usize(extra).expect("extra");
                        refined.push(f(params[i] + (params[i + 1] - params[i]) * frac));
                    }
                }
            }
            refined.push(*points.last().expect("nonempty"));
            points = refined;
            gaps.clear();
        }
        Self { points }
    }

    pub fn start(&self) -> Complex<T> {
        self.points[0]
    }

    pub fn end(&self) -> Complex<T> {
        *self.points.last().expect("nonempty arc")
    }

    pub fn midpoint(&self) -> Complex<T> {
        self.points[self.points.len() / 2]
    }
}

/// One side of the region: inside or outside a circle, or one side of a line.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Side<T> {
    Circle { center: Complex<T>, radius: T, inside: bool },
    Line { origin: Complex<T>, normal: Complex<T> },
}

impl<T: Real> Side<T> {
    /// Positive on the chosen side.
    fn signed(&self, p: Complex<T>) -> T {
        match *self {
            Side::Circle { center, radius, inside } => {
                let r = radius - (p - center).norm();
                if inside {
                    r
                } else {
                    -r
                }
            }
            Side::Line { origin, normal } => {
                let v = p - origin;
                v.re * normal.re + v.im * normal.im
            }
        }
    }

    /// Circle (or line) through the endpoints and midpoint of `arc`, oriented
    /// so that `interior` is on the positive side.
    fn fit(arc: &Arc<T>, interior: Complex<T>) -> Self {
        let (a, b, c) = (arc.start(), arc.midpoint(), arc.end());
        let scale = (a - b).norm().max((b - c).norm()).max((a - c).norm());
        let det = T::lit(2.0) * ((b.re - a.re) * (c.im - a.im) - (b.im - a.im) * (c.re - a.re));
        let side = if det.abs() <= T::lit(1e-12) * scale * scale {
            let dir = c - a;
            let normal = Complex::new(-dir.im, dir.re) / dir.norm().max(T::min_positive_value());
            Side::Line { origin: a, normal }
        } else {
            let (b2, c2) = (b - a, c - a);
            let (bb, cc) = (b2.norm_sqr(), c2.norm_sqr());
            let ux = (c2.im * bb - b2.im * cc) / det;
            let uy = (b2.re * cc - c2.re * bb) / det;
            let center = a + Complex::new(ux, uy);
            Side::Circle { center, radius: (a - center).norm(), inside: true }
        };
        if side.signed(interior) < T::zero() {
            match side {
                Side::Circle { center, radius, .. } => Side::Circle { center, radius, inside: false },
                Side::Line { origin, normal } => Side::Line { origin, normal: -normal },
            }
        } else {
            side
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Shape<T> {
    Point(Complex<T>),
    Segment(T, T),
    Sides(Vec<Side<T>>),
}

/// A region bounded by two arcs that meet at their endpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct Lens<T> {
    pub arcs: Vec<Arc<T>>,
    shape: Shape<T>,
}

impl<T: Real> Lens<T> {
    fn new(arcs: Vec<Arc<T>>) -> Self {
        let all: Vec<Complex<T>> = arcs.iter().flat_map(|a| a.points.iter().copied()).collect();
        let scale = all.iter().fold(T::zero(), |m, p| m.max(p.norm())).max(T::min_positive_value());
        let spread = all.iter().fold(T::zero(), |m, p| m.max((*p - all[0]).norm()));
        let max_im = all.iter().fold(T::zero(), |m, p| m.max(p.im.abs()));
        let eps = T::lit(1e-12) * scale;
        let shape = if spread <= eps {
            Shape::Point(all[0])
        } else if max_im <= eps {
            let lo = all.iter().fold(T::infinity(), |m, p| m.min(p.re));
            let hi = all.iter().fold(T::neg_infinity(), |m, p| m.max(p.re));
            Shape::Segment(lo, hi)
        } else {
            let interior = arcs.iter().fold(Complex::new(T::zero(), T::zero()), |acc, a| acc + a.midpoint())
                / T::from_usize(arcs.len()).expect("arc count");
            Shape::Sides(arcs.iter().map(|a| Side::fit(a, interior)).collect())
        };
        Self { arcs, shape }
    }

    /// Signed margin: positive inside, negative outside.
    fn margin(&self, p: Complex<T>) -> T {
        match &self.shape {
            Shape::Point(c) => -(p - *c).norm(),
            Shape::Segment(lo, hi) => {
                let dx = if p.re < *lo {
                    *lo - p.re
                } else if p.re > *hi {
                    p.re - *hi
                } else {
                    T::zero()
                };
                let dist = (dx * dx + p.im * p.im).sqrt();
                if dist > T::zero() {
                    -dist
                } else {
                    (p.re - *lo).min(*hi - p.re)
                }
            }
            Shape::Sides(sides) => sides.iter().fold(T::infinity(), |m, s| m.min(s.signed(p))),
        }
    }

    fn interval(&self) -> Option<(T, T)> {
        match &self.shape {
            Shape::Point(c) if c.im == T::zero() || c.im.abs() <= T::lit(1e-12) * c.norm() => Some((c.re, c.re)),
            Shape::Segment(lo, hi) => Some((*lo, *hi)),
            _ => None,
        }
    }
}

/// A bounding region in the `sigma*`-plane.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundsRegion<T> {
    /// Number of moments beyond the mass: 0 for first order, 1 for second.
    pub order: u8,
    pub mu0: T,
    pub mu1: Option<T>,
    pub contrast: ContrastSet<T>,
    /// The region is the intersection of these lenses.
    pub lenses: Vec<Lens<T>>,
}

fn check_mass<T: Real>(mu0: T) -> Result<()> {
    if !(mu0 >= T::zero() && mu0 <= T::one()) {
        return Err(Error::InfeasibleMoments(format!("mass {mu0} outside [0, 1]")));
    }
    Ok(())
}

fn c<T: Real>(v: T) -> Complex<T> {
    Complex::new(v, T::zero())
}

/// The region for known mass `mu0`.
pub fn first_order_region<T: Real>(mu0: T, cs: &ContrastSet<T>) -> Result<BoundsRegion<T>> {
    check_mass(mu0)?;
    let eta0 = T::one() - mu0;
    let (s1, s2) = (cs.sigma1, cs.sigma2);
    let arcs = match cs.s() {
        None => vec![Arc { points: vec![s2] }, Arc { points: vec![s2] }],
        Some(s) => {
            let a = move |l: T| s2 * (c(T::one()) - c(mu0) / (s - l));
            let b = move |l: T| s1 / (c(T::one()) - c(eta0) / (s - l));
            vec![Arc::sample(&a, T::zero(), eta0, ARC_SAMPLES), Arc::sample(&b, T::zero(), mu0, ARC_SAMPLES)]
        }
    };
    Ok(BoundsRegion { order: 0, mu0, mu1: None, contrast: *cs, lenses: vec![Lens::new(arcs)] })
}

/// Two arcs of `F` values over two-atom measures with mass `m0` and first
/// moment `m1`, each mapped through `map`.
fn moment_lens<T: Real>(m0: T, m1: T, s: Complex<T>, map: &dyn Fn(Complex<T>) -> Complex<T>) -> Lens<T> {
    if m0 == T::zero() {
        let p = map(c(T::zero()));
        return Lens::new(vec![Arc { points: vec![p] }, Arc { points: vec![p] }]);
    }
    let m = (m1 / m0).max(T::zero()).min(T::one());
    let f = move |b1: T, b2: T| -> Complex<T> {
        if b2 - b1 <= T::zero() {
            return c(m0) / (s - m);
        }
        let a1 = m0 * (b2 - m) / (b2 - b1);
        let a2 = m0 * (m - b1) / (b2 - b1);
        c(a1) / (s - b1) + c(a2) / (s - b2)
    };
    let upper = move |b2: T| map(f(T::zero(), b2));
    let lower = move |b1: T| map(f(b1, T::one()));
    Lens::new(vec![
        Arc::sample(&upper, m, T::one(), ARC_SAMPLES),
        Arc::sample(&lower, m, T::zero(), ARC_SAMPLES),
    ])
}

/// The region for known mass `mu0` and first moment `mu1`.
pub fn second_order_region<T: Real>(mu0: T, mu1: T, cs: &ContrastSet<T>) -> Result<BoundsRegion<T>> {
    check_mass(mu0)?;
    let eta0 = T::one() - mu0;
    let eta1 = mu0 * eta0 - mu1;
    let tol = T::lit(1e-14);
    if !(mu1 >= -tol && mu1 <= mu0 + tol) {
        return Err(Error::InfeasibleMoments(format!("first moment {mu1} outside [0, mu0 = {mu0}]")));
    }
    if !(eta1 >= -tol) {
        return Err(Error::InfeasibleMoments(format!(
            "first moment {mu1} exceeds mu0 (1 - mu0) = {}; no complementary measure exists",
            mu0 * eta0
        )));
    }
    let (mu1, eta1) = (mu1.max(T::zero()), eta1.max(T::zero()));
    let (s1, s2) = (cs.sigma1, cs.sigma2);
    let lenses = match cs.s() {
        None => vec![Lens::new(vec![Arc { points: vec![s2] }, Arc { points: vec![s2] }])],
        Some(s) => {
            let via_mu = move |f: Complex<T>| s2 * (c(T::one()) - f);
            let via_eta = move |e: Complex<T>| s1 / (c(T::one()) - e);
            vec![moment_lens(mu0, mu1, s, &via_mu), moment_lens(eta0, eta1, s, &via_eta)]
        }
    };
    Ok(BoundsRegion { order: 1, mu0, mu1: Some(mu1), contrast: *cs, lenses })
}

impl<T: Real> BoundsRegion<T> {
    /// Signed margin (positive inside) and membership with boundary
    /// tolerance `tol`.
    pub fn contains(&self, value: Complex<T>, tol: T) -> (bool, T) {
        let margin = self.lenses.iter().fold(T::infinity(), |m, l| m.min(l.margin(value)));
        (margin >= -tol, margin)
    }

    /// Arc endpoints.
    pub fn vertices(&self) -> Vec<Complex<T>> {
        let mut out = Vec::new();
        for lens in &self.lenses {
            for arc in &lens.arcs {
                for p in [arc.start(), arc.end()] {
                    if !out.iter().any(|q: &Complex<T>| (*q - p).norm() <= T::lit(1e-12) * (T::one() + p.norm())) {
                        out.push(p);
                    }
                }
            }
        }
        out
    }

    pub fn arcs(&self) -> Vec<&Arc<T>> {
        self.lenses.iter().flat_map(|l| l.arcs.iter()).collect()
    }

    /// Real interval when the contrast is real (or the region is a point).
    pub fn interval(&self) -> Option<(T, T)> {
        let mut lo = T::neg_infinity();
        let mut hi = T::infinity();
        for lens in &self.lenses {
            let (a, b) = lens.interval()?;
            lo = lo.max(a);
            hi = hi.min(b);
        }
        Some((lo, hi))
    }

    /// Arc points lying on the boundary of the region (inside every lens up
    /// to `tol`), thinned to at most `n`.
    pub fn boundary_points(&self, n: usize, tol: T) -> Vec<Complex<T>> {
        let pts: Vec<Complex<T>> = self
            .arcs()
            .iter()
            .flat_map(|a| a.points.iter().copied())
            .filter(|p| self.contains(*p, tol).0)
            .collect();
        if pts.len() <= n {
            return pts;
        }
        let step = pts.len() as f64 / n as f64;
        (0..n).map(|i| pts[(i as f64 * step) as usize]).collect()
    }
}

/// Closed-form Wiener interval `[harmonic mean, arithmetic mean]` for real
/// positive conductivities.
pub fn wiener_interval<T: Real>(mu0: T, sigma1: T, sigma2: T) -> (T, T) {
    let eta0 = T::one() - mu0;
    (T::one() / (mu0 / sigma1 + eta0 / sigma2), mu0 * sigma1 + eta0 * sigma2)
}

/// Isotropic first moment of `mu_kk`, `(d - 1)/d^3`.
pub fn isotropic_first_moment(d: usize) -> f64 {
    (d as f64 - 1.0) / (d as f64).powi(3)
}

/// JSON export of a region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionExport {
    pub order: u8,
    pub mu0: f64,
    pub mu1: Option<f64>,
    pub sigma1: [f64; 2],
    pub sigma2: [f64; 2],
    pub arcs: Vec<Vec<[f64; 2]>>,
    pub vertices: Vec<[f64; 2]>,
    pub interval: Option<[f64; 2]>,
}

impl<T: Real> BoundsRegion<T> {
    pub fn export(&self) -> RegionExport {
        let pair = |z: Complex<T>| [z.re.to_f64_lossy(), z.im.to_f64_lossy()];
        RegionExport {
            order: self.order,
            mu0: self.mu0.to_f64_lossy(),
            mu1: self.mu1.map(|v| v.to_f64_lossy()),
            sigma1: pair(self.contrast.sigma1),
            sigma2: pair(self.contrast.sigma2),
            arcs: self.arcs().iter().map(|a| a.points.iter().map(|p| pair(*p)).collect()).collect(),
            vertices: self.vertices().into_iter().map(pair).collect(),
            interval: self.interval().map(|(a, b)| [a.to_f64_lossy(), b.to_f64_lossy()]),
        }
    }
}
