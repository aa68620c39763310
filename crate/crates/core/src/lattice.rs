//! Periodic lattice and the discrete vector-calculus operators on it.
//!
//! Derivatives are forward differences with periodic wrap,
//! `(D_i f)(x) = f(x + e_i) - f(x)`. All inner products are spatial averages
//! `<u, v> = (1/N) sum_x u(x) . conj(v(x))`, which stand in for the ensemble
//! average of a stationary random medium. Under this weight the adjoint of a
//! real lattice operator is its plain transpose, so `grad^T` is the exact
//! adjoint of `grad` and the projections built from them are exactly
//! symmetric.
//!
//! Sites and Fourier modes share the same linear index: coordinate 0 varies
//! fastest, `index = x0 + L*x1 + L^2*x2`.

use crate::error::{Error, Result};
use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::fmt;
use std::sync::Arc;

pub type C64 = Complex<f64>;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Fourier symbols of the forward difference operators.
#[derive(Clone, Debug)]
pub struct FourierSymbols {
    dim: usize,
    /// `g[mode * dim + i] = exp(2 pi i k_i / L) - 1`
    g: Vec<C64>,
    /// `lap[mode] = |g(k)|^2 = sum_i 4 sin^2(pi k_i / L)`
    lap: Vec<f64>,
}

impl FourierSymbols {
    pub fn g(&self, mode: usize) -> &[C64] {
        &self.g[mode * self.dim..(mode + 1) * self.dim]
    }

    pub fn lap(&self, mode: usize) -> f64 {
        self.lap[mode]
    }

    pub fn laplacian_symbols(&self) -> &[f64] {
        &self.lap
    }
}

/// A `d`-dimensional periodic lattice with `L` sites per side and unit spacing.
#[derive(Clone)]
pub struct Lattice {
    dim: usize,
    side: usize,
    sites: usize,
    symbols: FourierSymbols,
    plus: Vec<Vec<usize>>,
    minus: Vec<Vec<usize>>,
    fft_forward: Arc<dyn Fft<f64>>,
    fft_inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Lattice")
            .field("dim", &self.dim)
            .field("side", &self.side)
            .field("sites", &self.sites)
            .finish()
    }
}

impl PartialEq for Lattice {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.side == other.side
    }
}

impl Lattice {
    /// Builds the lattice and precomputes its Fourier symbols and FFT plans.
    pub fn new(dim: usize, side: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Config(format!("dimension must be 2 or 3, got {dim}")));
        }
        if side < 2 {
            return Err(Error::Config(format!("side length must be at least 2, got {side}")));
        }
        let sites = side.pow(dim as u32);
        let mut g = Vec::with_capacity(sites * dim);
        let mut lap = Vec::with_capacity(sites);
        for mode in 0..sites {
            let k = coords_of(mode, dim, side);
            let mut l = 0.0;
            for &ki in k.iter().take(dim) {
                let phase = 2.0 * std::f64::consts::PI * ki as f64 / side as f64;
                g.push(C64::new(phase.cos() - 1.0, phase.sin()));
                let s = (std::f64::consts::PI * ki as f64 / side as f64).sin();
                l += 4.0 * s * s;
            }
            lap.push(l);
        }
        let mut plus = vec![vec![0; sites]; dim];
        let mut minus = vec![vec![0; sites]; dim];
        for site in 0..sites {
            let x = coords_of(site, dim, side);
            for axis in 0..dim {
                let mut y = x;
                y[axis] = (x[axis] + 1) % side;
                plus[axis][site] = index_of(&y, dim, side);
                y[axis] = (x[axis] + side - 1) % side;
                minus[axis][site] = index_of(&y, dim, side);
            }
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            dim,
            side,
            sites,
            symbols: FourierSymbols { dim, g, lap },
            plus,
            minus,
            fft_forward: planner.plan_fft_forward(side),
            fft_inverse: planner.plan_fft_inverse(side),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn symbols(&self) -> &FourierSymbols {
        &self.symbols
    }

    pub fn coords(&self, site: usize) -> [usize; 3] {
        coords_of(site, self.dim, self.side)
    }

    pub fn index(&self, coords: &[usize; 3]) -> usize {
        index_of(coords, self.dim, self.side)
    }

    /// Neighbor `x + e_axis` with periodic wrap.
    pub fn forward(&self, site: usize, axis: usize) -> usize {
        self.plus[axis][site]
    }

    /// Neighbor `x - e_axis` with periodic wrap.
    pub fn backward(&self, site: usize, axis: usize) -> usize {
        self.minus[axis][site]
    }

    /// Linear index of the periodic offset `x - y`.
    pub fn offset_index(&self, x: usize, y: usize) -> usize {
        let a = self.coords(x);
        let b = self.coords(y);
        let mut r = [0usize; 3];
        for i in 0..self.dim {
            r[i] = (a[i] + self.side - b[i]) % self.side;
        }
        self.index(&r)
    }

    /// In-place `d`-dimensional DFT. The inverse transform carries the `1/N`.
    pub fn fft(&self, data: &mut [C64], inverse: bool) {
        debug_assert_eq!(data.len(), self.sites);
        let plan = if inverse { &self.fft_inverse } else { &self.fft_forward };
        let l = self.side;
        let mut line = vec![ZERO; l];
        let mut scratch = vec![ZERO; plan.get_inplace_scratch_len()];
        for axis in 0..self.dim {
            let stride = l.pow(axis as u32);
            for start in 0..self.sites {
                if (start / stride) % l != 0 {
                    continue;
                }
                for (t, v) in line.iter_mut().enumerate() {
                    *v = data[start + t * stride];
                }
                plan.process_with_scratch(&mut line, &mut scratch);
                for (t, v) in line.iter().enumerate() {
                    data[start + t * stride] = *v;
                }
            }
        }
        if inverse {
            let scale = 1.0 / self.sites as f64;
            for v in data.iter_mut() {
                *v *= scale;
            }
        }
    }

    fn check_scalar(&self, f: &ScalarField) -> Result<()> {
        if f.values.len() != self.sites {
            return Err(Error::SizeMismatch { expected: self.sites, actual: f.values.len() });
        }
        Ok(())
    }

    fn check_vector(&self, v: &VectorField) -> Result<()> {
        if v.dim != self.dim {
            return Err(Error::Dimension(format!(
                "vector field has {} components, lattice is {}-dimensional",
                v.dim, self.dim
            )));
        }
        if v.values.len() != self.sites * self.dim {
            return Err(Error::SizeMismatch {
                expected: self.sites * self.dim,
                actual: v.values.len(),
            });
        }
        Ok(())
    }

    /// Forward difference `D_i f` along one axis.
    fn diff(&self, f: &[C64], axis: usize) -> Vec<C64> {
        (0..self.sites).map(|x| f[self.plus[axis][x]] - f[x]).collect()
    }

    /// Transpose of the forward difference, `(D_i^T f)(x) = f(x - e_i) - f(x)`.
    fn diff_t(&self, f: &[C64], axis: usize) -> Vec<C64> {
        (0..self.sites).map(|x| f[self.minus[axis][x]] - f[x]).collect()
    }

    /// Discrete gradient: component `i` at `x` is `f(x + e_i) - f(x)`.
    pub fn gradient(&self, f: &ScalarField) -> Result<VectorField> {
        self.check_scalar(f)?;
        let mut out = VectorField::zeros(self.dim, self.sites);
        for axis in 0..self.dim {
            let d = self.diff(&f.values, axis);
            out.set_component(axis, &d);
        }
        Ok(out)
    }

    /// Adjoint of [`gradient`](Self::gradient) under the lattice-average
    /// inner product (a negative backward-difference divergence).
    pub fn divergence_adjoint(&self, v: &VectorField) -> Result<ScalarField> {
        self.check_vector(v)?;
        let mut out = vec![ZERO; self.sites];
        for axis in 0..self.dim {
            let c = v.component(axis);
            for (o, d) in out.iter_mut().zip(self.diff_t(&c, axis)) {
                *o += d;
            }
        }
        Ok(ScalarField { values: out })
    }

    /// Generalized curl.
    ///
    /// 3D: vector to vector through the skew matrix of the differences.
    /// 2D: a vector field maps to the scalar `-D_2 v_1 + D_1 v_2`; a scalar
    /// maps to the vector `(-D_2^T f, D_1^T f)`, the adjoint direction.
    pub fn curl(&self, input: &Field) -> Result<Field> {
        match (self.dim, input) {
            (3, Field::Vector(v)) => {
                self.check_vector(v)?;
                let (v1, v2, v3) = (v.component(0), v.component(1), v.component(2));
                let c1 = sub(&self.diff(&v3, 1), &self.diff(&v2, 2));
                let c2 = sub(&self.diff(&v1, 2), &self.diff(&v3, 0));
                let c3 = sub(&self.diff(&v2, 0), &self.diff(&v1, 1));
                Ok(Field::Vector(VectorField::from_components(&[c1, c2, c3])))
            }
            (3, Field::Scalar(_)) => {
                Err(Error::Dimension("3D curl needs a vector field".into()))
            }
            (2, Field::Vector(v)) => {
                self.check_vector(v)?;
                let s = sub(&self.diff(&v.component(1), 0), &self.diff(&v.component(0), 1));
                Ok(Field::Scalar(ScalarField { values: s }))
            }
            (2, Field::Scalar(f)) => {
                self.check_scalar(f)?;
                let c1: Vec<C64> = self.diff_t(&f.values, 1).into_iter().map(|z| -z).collect();
                let c2 = self.diff_t(&f.values, 0);
                Ok(Field::Vector(VectorField::from_components(&[c1, c2])))
            }
            _ => unreachable!("lattice dimension is 2 or 3"),
        }
    }

    /// Transpose of [`curl`](Self::curl). Its range is the divergence-free,
    /// mean-zero subspace.
    pub fn curl_adjoint(&self, input: &Field) -> Result<Field> {
        match (self.dim, input) {
            (3, Field::Vector(w)) => {
                self.check_vector(w)?;
                let (w1, w2, w3) = (w.component(0), w.component(1), w.component(2));
                let c1 = sub(&self.diff_t(&w2, 2), &self.diff_t(&w3, 1));
                let c2 = sub(&self.diff_t(&w3, 0), &self.diff_t(&w1, 2));
                let c3 = sub(&self.diff_t(&w1, 1), &self.diff_t(&w2, 0));
                Ok(Field::Vector(VectorField::from_components(&[c1, c2, c3])))
            }
            (3, Field::Scalar(_)) => {
                Err(Error::Dimension("3D curl adjoint needs a vector field".into()))
            }
            // In 2D the two directions are each other's transpose.
            (2, _) => self.curl(input),
            _ => unreachable!("lattice dimension is 2 or 3"),
        }
    }

    /// Pseudo-inverse of `grad^T grad`: Fourier multiplier `1/lap(k)` with the
    /// zero mode sent to zero.
    pub fn inv_laplacian(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check_scalar(f)?;
        let mut data = f.values.clone();
        self.fft(&mut data, false);
        for (mode, v) in data.iter_mut().enumerate() {
            let l = self.symbols.lap[mode];
            *v = if mode == 0 { ZERO } else { *v / l };
        }
        self.fft(&mut data, true);
        Ok(ScalarField { values: data })
    }

    /// `grad^T grad f` (the positive lattice Laplacian).
    pub fn laplacian(&self, f: &ScalarField) -> Result<ScalarField> {
        self.divergence_adjoint(&self.gradient(f)?)
    }

    fn transform_components(&self, v: &VectorField) -> Vec<Vec<C64>> {
        (0..self.dim)
            .map(|i| {
                let mut c = v.component(i);
                self.fft(&mut c, false);
                c
            })
            .collect()
    }

    fn inverse_components(&self, mut comps: Vec<Vec<C64>>) -> VectorField {
        for c in comps.iter_mut() {
            self.fft(c, true);
        }
        VectorField::from_components(&comps)
    }

    /// Orthogonal projection onto the range of the gradient,
    /// `grad (grad^T grad)^+ grad^T`, applied mode by mode.
    pub fn gamma_apply(&self, v: &VectorField) -> Result<VectorField> {
        self.check_vector(v)?;
        let mut hat = self.transform_components(v);
        let d = self.dim;
        for mode in 0..self.sites {
            if mode == 0 {
                for c in hat.iter_mut() {
                    c[0] = ZERO;
                }
                continue;
            }
            let g = self.symbols.g(mode);
            let lap = self.symbols.lap[mode];
            let mut proj = ZERO;
            for j in 0..d {
                proj += g[j].conj() * hat[j][mode];
            }
            proj /= lap;
            for i in 0..d {
                hat[i][mode] = g[i] * proj;
            }
        }
        Ok(self.inverse_components(hat))
    }

    /// Orthogonal projection onto the divergence-free, mean-zero subspace,
    /// computed as `v - <v> - Gamma v`.
    pub fn upsilon_apply(&self, v: &VectorField) -> Result<VectorField> {
        let g = self.gamma_apply(v)?;
        let mut out = v.clone();
        for i in 0..self.dim {
            let m = v.mean(i);
            for x in 0..self.sites {
                out.values[x * self.dim + i] -= m + g.values[x * self.dim + i];
            }
        }
        Ok(out)
    }

    /// Curl-based construction of the same projection,
    /// `curl^T (curl curl^T)^+ curl`, evaluated per Fourier mode as the
    /// orthogonal projector onto the span of the conjugated curl-symbol rows.
    pub fn upsilon_via_curl(&self, v: &VectorField) -> Result<VectorField> {
        self.check_vector(v)?;
        let mut hat = self.transform_components(v);
        let d = self.dim;
        for mode in 0..self.sites {
            let g = self.symbols.g(mode);
            let rows: Vec<Vec<C64>> = if d == 2 {
                vec![vec![-g[1], g[0]]]
            } else {
                vec![
                    vec![ZERO, -g[2], g[1]],
                    vec![g[2], ZERO, -g[0]],
                    vec![-g[1], g[0], ZERO],
                ]
            };
            let scale = self.symbols.lap[mode].sqrt();
            let mut basis: Vec<Vec<C64>> = Vec::new();
            for r in rows {
                let mut q: Vec<C64> = r.iter().map(|z| z.conj()).collect();
                for _ in 0..2 {
                    for b in &basis {
                        let c: C64 = b.iter().zip(&q).map(|(bi, qi)| bi.conj() * qi).sum();
                        for (qi, bi) in q.iter_mut().zip(b) {
                            *qi -= c * bi;
                        }
                    }
                }
                let n = q.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if n > 1e-8 * scale.max(1e-300) && n > 0.0 {
                    basis.push(q.into_iter().map(|z| z / n).collect());
                }
            }
            let vin: Vec<C64> = (0..d).map(|i| hat[i][mode]).collect();
            let mut vout = vec![ZERO; d];
            for b in &basis {
                let c: C64 = b.iter().zip(&vin).map(|(bi, vi)| bi.conj() * vi).sum();
                for (o, bi) in vout.iter_mut().zip(b) {
                    *o += c * bi;
                }
            }
            for i in 0..d {
                hat[i][mode] = vout[i];
            }
        }
        Ok(self.inverse_components(hat))
    }

    /// Real-space convolution kernel of Gamma, laid out as
    /// `kernel[offset * d * d + i * d + j]`, so that
    /// `(Gamma v)_i(x) = sum_y sum_j K_ij(x - y) v_j(y)`.
    pub fn gamma_kernel(&self) -> Vec<f64> {
        let d = self.dim;
        let mut kernel = vec![0.0; self.sites * d * d];
        let mut buf = vec![ZERO; self.sites];
        for i in 0..d {
            for j in i..d {
                for (mode, b) in buf.iter_mut().enumerate() {
                    *b = if mode == 0 {
                        ZERO
                    } else {
                        let g = self.symbols.g(mode);
                        g[i] * g[j].conj() / self.symbols.lap[mode]
                    };
                }
                self.fft(&mut buf, true);
                for r in 0..self.sites {
                    kernel[r * d * d + i * d + j] = buf[r].re;
                }
            }
        }
        // K_ji(r) = K_ij(-r)
        for r in 0..self.sites {
            let neg = self.offset_index(0, r);
            for i in 0..d {
                for j in 0..i {
                    kernel[r * d * d + i * d + j] = kernel[neg * d * d + j * d + i];
                }
            }
        }
        kernel
    }

    /// Real-space kernel of Upsilon, `delta_ij (delta_{r,0} - 1/N) - K^Gamma_ij(r)`.
    pub fn upsilon_kernel(&self) -> Vec<f64> {
        let d = self.dim;
        let inv_n = 1.0 / self.sites as f64;
        let mut kernel = self.gamma_kernel();
        for r in 0..self.sites {
            for i in 0..d {
                for j in 0..d {
                    let k = &mut kernel[r * d * d + i * d + j];
                    let id = if i == j { (if r == 0 { 1.0 } else { 0.0 }) - inv_n } else { 0.0 };
                    *k = id - *k;
                }
            }
        }
        kernel
    }
}

pub(crate) fn coords_of(mut idx: usize, dim: usize, side: usize) -> [usize; 3] {
    let mut c = [0usize; 3];
    for ci in c.iter_mut().take(dim) {
        *ci = idx % side;
        idx /= side;
    }
    c
}

pub(crate) fn index_of(c: &[usize; 3], dim: usize, side: usize) -> usize {
    let mut idx = 0;
    for i in (0..dim).rev() {
        idx = idx * side + c[i];
    }
    idx
}

fn sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// A complex scalar per lattice site.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub values: Vec<C64>,
}

impl ScalarField {
    pub fn zeros(sites: usize) -> Self {
        Self { values: vec![ZERO; sites] }
    }

    pub fn from_real(values: &[f64]) -> Self {
        Self { values: values.iter().map(|&v| C64::new(v, 0.0)).collect() }
    }

    pub fn mean(&self) -> C64 {
        self.values.iter().sum::<C64>() / self.values.len() as f64
    }

    /// Lattice-average inner product `(1/N) sum f conj(g)`.
    pub fn inner(&self, other: &Self) -> C64 {
        let s: C64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum();
        s / self.values.len() as f64
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// A complex `d`-vector per lattice site, stored site-major.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub dim: usize,
    pub values: Vec<C64>,
}

impl VectorField {
    pub fn zeros(dim: usize, sites: usize) -> Self {
        Self { dim, values: vec![ZERO; dim * sites] }
    }

    /// The constant field equal to `c` at every site.
    pub fn constant(c: &[C64], sites: usize) -> Self {
        let mut values = Vec::with_capacity(c.len() * sites);
        for _ in 0..sites {
            values.extend_from_slice(c);
        }
        Self { dim: c.len(), values }
    }

    pub fn from_components(comps: &[Vec<C64>]) -> Self {
        let dim = comps.len();
        let sites = comps[0].len();
        let mut values = vec![ZERO; dim * sites];
        for (i, c) in comps.iter().enumerate() {
            for (x, v) in c.iter().enumerate() {
                values[x * dim + i] = *v;
            }
        }
        Self { dim, values }
    }

    pub fn from_real(dim: usize, values: &[f64]) -> Self {
        Self { dim, values: values.iter().map(|&v| C64::new(v, 0.0)).collect() }
    }

    pub fn sites(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn at(&self, site: usize) -> &[C64] {
        &self.values[site * self.dim..(site + 1) * self.dim]
    }

    pub fn component(&self, i: usize) -> Vec<C64> {
        self.values.iter().skip(i).step_by(self.dim).copied().collect()
    }

    pub fn set_component(&mut self, i: usize, c: &[C64]) {
        for (x, v) in c.iter().enumerate() {
            self.values[x * self.dim + i] = *v;
        }
    }

    pub fn mean(&self, i: usize) -> C64 {
        self.values.iter().skip(i).step_by(self.dim).sum::<C64>() / self.sites() as f64
    }

    /// Every component has site average zero within `tol`.
    pub fn is_mean_zero(&self, tol: f64) -> bool {
        (0..self.dim).all(|i| self.mean(i).norm() <= tol)
    }

    pub fn inner(&self, other: &Self) -> C64 {
        let s: C64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum();
        s / self.sites() as f64
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).re.max(0.0).sqrt()
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { dim: self.dim, values: sub(&self.values, &other.values) }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            dim: self.dim,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        }
    }

    /// Removes the site average of each component.
    pub fn centered(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.dim {
            let m = self.mean(i);
            for x in 0..self.sites() {
                out.values[x * self.dim + i] -= m;
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Either kind of lattice field, for operators whose input type depends on
/// the dimension.
#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Scalar(ScalarField),
    Vector(VectorField),
}

impl Field {
    pub fn into_vector(self) -> Option<VectorField> {
        match self {
            Field::Vector(v) => Some(v),
            Field::Scalar(_) => None,
        }
    }

    pub fn into_scalar(self) -> Option<ScalarField> {
        match self {
            Field::Scalar(f) => Some(f),
            Field::Vector(_) => None,
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            Field::Scalar(f) => f.norm(),
            Field::Vector(v) => v.norm(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_scalar(n: usize, rng: &mut ChaCha8Rng) -> ScalarField {
        ScalarField {
            values: (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect(),
        }
    }

    fn random_vector(d: usize, n: usize, rng: &mut ChaCha8Rng) -> VectorField {
        VectorField {
            dim: d,
            values: (0..n * d)
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        }
    }

    #[test]
    fn laplacian_symbols_small_lattices() {
        let lat = Lattice::new(2, 2).unwrap();
        let mut lap: Vec<f64> = lat.symbols().laplacian_symbols().to_vec();
        lap.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected = [0.0, 4.0, 4.0, 8.0];
        for (a, b) in lap.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{lap:?}");
        }
        let lat3 = Lattice::new(3, 2).unwrap();
        assert_eq!(lat3.symbols().lap(0), 0.0);
        let lat4 = Lattice::new(2, 4).unwrap();
        assert!((lat4.symbols().lap(lat4.index(&[1, 0, 0])) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn symbols_consistent() {
        for (d, l) in [(2, 5), (3, 4)] {
            let lat = Lattice::new(d, l).unwrap();
            for mode in 0..lat.sites() {
                let g2: f64 = lat.symbols().g(mode).iter().map(|z| z.norm_sqr()).sum();
                assert!((g2 - lat.symbols().lap(mode)).abs() < 1e-12);
                if mode != 0 {
                    assert!(lat.symbols().lap(mode) > 0.0);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_configuration() {
        assert!(matches!(Lattice::new(1, 4), Err(Error::Config(_))));
        assert!(matches!(Lattice::new(4, 4), Err(Error::Config(_))));
        assert!(matches!(Lattice::new(2, 1), Err(Error::Config(_))));
    }

    #[test]
    fn gradient_of_indicator() {
        let lat = Lattice::new(2, 2).unwrap();
        let mut f = ScalarField::zeros(4);
        f.values[lat.index(&[0, 0, 0])] = C64::new(1.0, 0.0);
        let g = lat.gradient(&f).unwrap();
        assert_eq!(g.at(lat.index(&[0, 0, 0]))[0], C64::new(-1.0, 0.0));
        assert_eq!(g.at(lat.index(&[1, 0, 0]))[0], C64::new(1.0, 0.0));
        let c = ScalarField::from_real(&[3.0; 4]);
        assert!(lat.gradient(&c).unwrap().norm() == 0.0);
    }

    #[test]
    fn gradient_of_fourier_mode_is_symbol_multiple() {
        let lat = Lattice::new(2, 6).unwrap();
        let k = [2usize, 5, 0];
        let mode = lat.index(&k);
        let f = ScalarField {
            values: (0..lat.sites())
                .map(|x| {
                    let c = lat.coords(x);
                    let ph = 2.0 * std::f64::consts::PI * (k[0] * c[0] + k[1] * c[1]) as f64 / 6.0;
                    C64::new(ph.cos(), ph.sin())
                })
                .collect(),
        };
        let grad = lat.gradient(&f).unwrap();
        let g = lat.symbols().g(mode);
        for x in 0..lat.sites() {
            for i in 0..2 {
                assert!((grad.at(x)[i] - g[i] * f.values[x]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (d, l) in [(2, 2), (2, 4), (2, 5), (3, 2), (3, 3), (3, 4)] {
            let lat = Lattice::new(d, l).unwrap();
            for _ in 0..100 {
                let f = random_scalar(lat.sites(), &mut rng);
                let v = random_vector(d, lat.sites(), &mut rng);
                let lhs = lat.gradient(&f).unwrap().inner(&v);
                let rhs = f.inner(&lat.divergence_adjoint(&v).unwrap());
                assert!((lhs - rhs).norm() < 1e-12, "d={d} L={l}");
            }
        }
    }

    #[test]
    fn divergence_of_constant_and_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lat = Lattice::new(3, 3).unwrap();
        let c = VectorField::constant(&[C64::new(1.0, 2.0), C64::new(-1.0, 0.0), C64::new(0.5, 0.5)], 27);
        assert!(lat.divergence_adjoint(&c).unwrap().norm() < 1e-15);
        let f = random_scalar(27, &mut rng);
        let div = lat.divergence_adjoint(&lat.gradient(&f).unwrap()).unwrap();
        assert!(div.mean().norm() < 1e-14);
    }

    #[test]
    fn curl_of_gradient_vanishes() {
        let lat = Lattice::new(3, 4).unwrap();
        let f = ScalarField::from_real(&(0..64).map(|i| ((i * 37) % 11) as f64).collect::<Vec<_>>());
        let c = lat.curl(&Field::Vector(lat.gradient(&f).unwrap())).unwrap();
        assert_eq!(c.norm(), 0.0);
        let lat2 = Lattice::new(2, 5).unwrap();
        let f2 = ScalarField::from_real(&(0..25).map(|i| ((i * 13) % 7) as f64).collect::<Vec<_>>());
        let c2 = lat2.curl(&Field::Vector(lat2.gradient(&f2).unwrap())).unwrap();
        assert_eq!(c2.norm(), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_scalar(64, &mut rng);
        let c = lat.curl(&Field::Vector(lat.gradient(&g).unwrap())).unwrap();
        assert!(c.norm() < 1e-12);
    }

    #[test]
    fn curl_dimension_mismatch() {
        let lat = Lattice::new(3, 2).unwrap();
        let f = ScalarField::zeros(8);
        assert!(matches!(lat.curl(&Field::Scalar(f)), Err(Error::Dimension(_))));
    }

    #[test]
    fn curl_symbol_is_cross_product() {
        let lat = Lattice::new(3, 4).unwrap();
        let k = [1usize, 2, 3];
        let mode = lat.index(&k);
        let a = [C64::new(1.0, 0.5), C64::new(-0.3, 0.0), C64::new(0.2, 1.0)];
        let mut v = VectorField::zeros(3, 64);
        let mut wave = vec![ZERO; 64];
        for x in 0..64 {
            let c = lat.coords(x);
            let ph = 2.0 * std::f64::consts::PI * (k[0] * c[0] + k[1] * c[1] + k[2] * c[2]) as f64 / 4.0;
            wave[x] = C64::new(ph.cos(), ph.sin());
            for i in 0..3 {
                v.values[x * 3 + i] = a[i] * wave[x];
            }
        }
        let c = lat.curl(&Field::Vector(v)).unwrap().into_vector().unwrap();
        let g = lat.symbols().g(mode);
        let cross = [g[1] * a[2] - g[2] * a[1], g[2] * a[0] - g[0] * a[2], g[0] * a[1] - g[1] * a[0]];
        for x in 0..64 {
            for i in 0..3 {
                assert!((c.at(x)[i] - cross[i] * wave[x]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn inverse_laplacian() {
        let lat = Lattice::new(2, 8).unwrap();
        let c = ScalarField::from_real(&[2.5; 64]);
        assert!(lat.inv_laplacian(&c).unwrap().norm() < 1e-14);

        let k = [3usize, 1, 0];
        let mode = lat.index(&k);
        let f = ScalarField {
            values: (0..64)
                .map(|x| {
                    let c = lat.coords(x);
                    let ph = 2.0 * std::f64::consts::PI * (k[0] * c[0] + k[1] * c[1]) as f64 / 8.0;
                    C64::new(ph.cos(), ph.sin())
                })
                .collect(),
        };
        let u = lat.inv_laplacian(&f).unwrap();
        let l = lat.symbols().lap(mode);
        for x in 0..64 {
            assert!((u.values[x] - f.values[x] / l).norm() < 1e-12);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut f = random_scalar(64, &mut rng);
        let m = f.mean();
        for v in f.values.iter_mut() {
            *v -= m;
        }
        let back = lat.laplacian(&lat.inv_laplacian(&f).unwrap()).unwrap();
        for x in 0..64 {
            assert!((back.values[x] - f.values[x]).norm() < 1e-10);
        }
    }

    #[test]
    fn gamma_fixes_gradients_and_kills_constants_and_solenoidal_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (d, l) in [(2, 6), (3, 4)] {
            let lat = Lattice::new(d, l).unwrap();
            let n = lat.sites();
            let f = random_scalar(n, &mut rng);
            let gf = lat.gradient(&f).unwrap();
            assert!(lat.gamma_apply(&gf).unwrap().sub(&gf).norm() < 1e-12 * gf.norm());
            assert!(lat.upsilon_apply(&gf).unwrap().norm() < 1e-12 * gf.norm());

            let c = VectorField::constant(&vec![C64::new(1.0, -1.0); d], n);
            assert!(lat.gamma_apply(&c).unwrap().norm() < 1e-13);
            assert!(lat.upsilon_apply(&c).unwrap().norm() < 1e-13);
            assert!(lat.upsilon_via_curl(&c).unwrap().norm() < 1e-13);

            let w = if d == 2 {
                Field::Scalar(random_scalar(n, &mut rng))
            } else {
                Field::Vector(random_vector(d, n, &mut rng))
            };
            let sol = lat.curl_adjoint(&w).unwrap().into_vector().unwrap();
            assert!(lat.divergence_adjoint(&sol).unwrap().norm() < 1e-12 * sol.norm());
            assert!(lat.gamma_apply(&sol).unwrap().norm() < 1e-12 * sol.norm());
            assert!(lat.upsilon_via_curl(&sol).unwrap().sub(&sol).norm() < 1e-12 * sol.norm());
        }
    }

    #[test]
    fn upsilon_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (d, l) in [(2, 2), (2, 7), (3, 3), (3, 4)] {
            let lat = Lattice::new(d, l).unwrap();
            for _ in 0..5 {
                let v = random_vector(d, lat.sites(), &mut rng);
                let a = lat.upsilon_apply(&v).unwrap();
                let b = lat.upsilon_via_curl(&v).unwrap();
                assert!(a.sub(&b).norm() < 1e-12 * v.norm(), "d={d} L={l}");
            }
        }
    }

    #[test]
    fn kernels_match_fourier_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (d, l) in [(2, 5), (3, 3)] {
            let lat = Lattice::new(d, l).unwrap();
            let n = lat.sites();
            let v = random_vector(d, n, &mut rng);
            for (kernel, reference) in [
                (lat.gamma_kernel(), lat.gamma_apply(&v).unwrap()),
                (lat.upsilon_kernel(), lat.upsilon_apply(&v).unwrap()),
            ] {
                let mut out = VectorField::zeros(d, n);
                for x in 0..n {
                    for y in 0..n {
                        let r = lat.offset_index(x, y);
                        for i in 0..d {
                            for j in 0..d {
                                out.values[x * d + i] += kernel[r * d * d + i * d + j] * v.values[y * d + j];
                            }
                        }
                    }
                }
                assert!(out.sub(&reference).norm() < 1e-12 * v.norm());
            }
        }
    }
}
