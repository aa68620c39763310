//! The scalar operator `M = (grad^T grad)^+ grad^T X1 grad` on mean-zero
//! potentials.
//!
//! `M` is self-adjoint for `<f, g>_grad = <grad f . grad g>`, and a basis
//! orthonormal for that product is the real Fourier basis scaled by
//! `1/sqrt(lap)`: cosine/sine pairs carry a factor `sqrt(2)`, self-conjugate
//! modes (all `k_i` in `{0, L/2}`) have only the cosine. In that basis the
//! matrix of `M` is `G^T X1 G / N`, where the columns of `G` are the
//! gradients of the basis functions.
//!
//! The measure `nu_jj` of `M` with respect to the potential
//! `b = (grad^T grad)^+ grad^T (X1 e_j)` has moments
//! `nu^n = <M^(n-1) b, b>_grad` for `n >= 1` and mass `<(X1)_jj>`.

use super::eigen::{dense_eigen, Eigen, WEIGHT_FLOOR};
use super::operator::{OperatorKind, Representation, SymmetricOperator};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, ScalarField, VectorField, C64};
use crate::measure::{MeasureInfo, SpectralMeasure, CLUSTER_TOL};
use crate::microgeometry::{Medium, Phase};
use faer::Mat;

/// Eigenvalues of `M` below this are treated as its kernel.
const KERNEL_TOL: f64 = 1e-10;

pub struct SobolevOperator {
    pub op: SymmetricOperator,
    eig: Eigen,
}

fn mode_field(lat: &Lattice, mode: usize, sine: bool) -> Vec<f64> {
    let k = lat.coords(mode);
    let l = lat.side() as f64;
    (0..lat.sites())
        .map(|x| {
            let c = lat.coords(x);
            let dot: usize = (0..lat.dim()).map(|i| k[i] * c[i]).sum();
            let ph = 2.0 * std::f64::consts::PI * (dot % lat.side()) as f64 / l;
            if sine {
                ph.sin()
            } else {
                ph.cos()
            }
        })
        .collect()
}

/// Gradients of the `grad`-orthonormal real Fourier basis, one column per
/// basis function, `N - 1` columns.
fn gradient_basis(lat: &Lattice) -> Result<Mat<f64>> {
    let (n, d) = (lat.sites(), lat.dim());
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
    for mode in 1..n {
        let neg = lat.offset_index(0, mode);
        if neg < mode {
            continue;
        }
        let lap = lat.symbols().lap(mode);
        let variants: &[bool] = if neg == mode { &[false] } else { &[false, true] };
        let scale = if neg == mode { 1.0 / lap.sqrt() } else { (2.0 / lap).sqrt() };
        for &sine in variants {
            let f = ScalarField::from_real(&mode_field(lat, mode, sine));
            let g = lat.gradient(&f)?;
            cols.push(g.values.iter().map(|z| z.re * scale).collect());
        }
    }
    debug_assert_eq!(cols.len(), n - 1);
    Ok(Mat::from_fn(n * d, cols.len(), |r, c| cols[c][r]))
}

impl SobolevOperator {
    /// Builds `M` for the phase-one projection of `medium` and
    /// eigendecomposes it.
    pub fn new(medium: &Medium, lat: &Lattice) -> Result<Self> {
        if medium.sites() != lat.sites() {
            return Err(Error::SizeMismatch { expected: lat.sites(), actual: medium.sites() });
        }
        let (n, d) = (lat.sites(), lat.dim());
        let g = gradient_basis(lat)?;
        let mut xg = Mat::<f64>::zeros(n * d, g.ncols());
        for x in 0..n {
            let p = medium.projector(Phase::One, x);
            for c in 0..g.ncols() {
                for i in 0..d {
                    xg[(x * d + i, c)] = (0..d).map(|j| p[i * d + j] * g[(x * d + j, c)]).sum();
                }
            }
        }
        let mut matrix = g.transpose() * &xg;
        let inv_n = 1.0 / n as f64;
        for v in matrix.col_iter_mut() {
            for e in v.iter_mut() {
                *e *= inv_n;
            }
        }
        let op = SymmetricOperator {
            kind: OperatorKind::SobolevM,
            lattice: lat.clone(),
            medium: medium.clone(),
            repr: Representation::Sobolev { matrix, gradients: g },
        };
        let eig = dense_eigen(op.dense_matrix().expect("dense"))?;
        Ok(Self { op, eig })
    }

    pub fn eigen(&self) -> &Eigen {
        &self.eig
    }

    /// The measure `nu_jj`.
    pub fn nu_measure(&self, j: usize) -> Result<SpectralMeasure<f64>> {
        let lat = &self.op.lattice;
        let medium = &self.op.medium;
        let (n, d) = (lat.sites(), lat.dim());
        let mut x1ej = VectorField::zeros(d, n);
        let mut nu0 = 0.0;
        for x in 0..n {
            let p = medium.projector(Phase::One, x);
            for i in 0..d {
                x1ej.values[x * d + i] = C64::new(p[i * d + j], 0.0);
            }
            nu0 += p[j * d + j];
        }
        nu0 /= n as f64;
        if x1ej.values.iter().all(|z| z.norm() < 1e-14) {
            return Err(Error::Degenerate(format!(
                "X1 e_{} vanishes at every site; nu is undefined for this direction",
                j + 1
            )));
        }
        let b = lat.inv_laplacian(&lat.divergence_adjoint(&x1ej)?)?;
        let grad_b = lat.gradient(&b)?;
        let Representation::Sobolev { gradients, .. } = &self.op.repr else {
            unreachable!("constructed with a Sobolev representation")
        };
        // beta_p = <grad b . grad u_p>
        let coeff: Vec<f64> = (0..gradients.ncols())
            .map(|c| (0..n * d).map(|r| grad_b.values[r].re * gradients[(r, c)]).sum::<f64>() / n as f64)
            .collect();
        let u = &self.eig.vectors;
        let mut atoms = Vec::new();
        let mut placed = 0.0;
        for (i, &lambda) in self.eig.values.iter().enumerate() {
            if lambda <= KERNEL_TOL {
                continue;
            }
            let beta: f64 = (0..coeff.len()).map(|p| u[(p, i)] * coeff[p]).sum();
            let w = beta * beta / lambda;
            placed += w;
            atoms.push((lambda, w));
        }
        atoms.push((0.0, nu0 - placed));
        let info = MeasureInfo {
            kind: OperatorKind::SobolevM.label().to_string(),
            j,
            k: j,
            d,
            side: lat.side(),
            seed: medium.seed(),
        };
        Ok(SpectralMeasure::new(info, atoms).clustered(CLUSTER_TOL).pruned(WEIGHT_FLOOR))
    }
}
