//! Direct solution of the periodic cell problem, independent of the spectral
//! machinery.
//!
//! For each direction `e_i` the corrector solves
//! `grad^T sigma (e_i + grad psi_i) = 0` with `<psi_i> = 0`, using the same
//! forward-difference gradient as the lattice operators. Then
//! `sigma* e_i = <sigma (e_i + grad psi_i)>`.
//!
//! The system matrix `grad^T sigma grad` is complex symmetric (not
//! Hermitian). Small lattices use a dense LU with one potential pinned to
//! remove the constant null space; larger ones use conjugate orthogonal
//! conjugate gradients with a Jacobi preconditioner.

use crate::effective::ContrastSet;
use crate::error::{Error, Result};
use crate::lattice::{Lattice, ScalarField, VectorField, C64};
use crate::microgeometry::{Medium, Phase};
use faer::prelude::*;
use faer::{c64, Mat};

/// Lattices with at most this many sites are solved densely by default.
pub const DIRECT_CAP: usize = 1024;

/// Relative residual required of every cell solution.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Relative residual the iterative solver iterates to.
pub const KRYLOV_TOL: f64 = 1e-12;

/// Per-site complex conductivity matrices, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SigmaField {
    pub dim: usize,
    pub values: Vec<C64>,
}

impl SigmaField {
    /// `sigma1 X1 + sigma2 X2` at every site.
    pub fn from_medium(medium: &Medium, cs: &ContrastSet<f64>) -> Self {
        let d = medium.dim();
        let mut values = Vec::with_capacity(medium.sites() * d * d);
        for x in 0..medium.sites() {
            let p1 = medium.projector(Phase::One, x);
            let p2 = medium.projector(Phase::Two, x);
            for e in 0..d * d {
                values.push(cs.sigma1 * p1[e] + cs.sigma2 * p2[e]);
            }
        }
        Self { dim: d, values }
    }

    pub fn sites(&self) -> usize {
        self.values.len() / (self.dim * self.dim)
    }

    pub fn at(&self, site: usize) -> &[C64] {
        let dd = self.dim * self.dim;
        &self.values[site * dd..(site + 1) * dd]
    }

    /// `sigma(x) v(x)` at every site.
    pub fn apply(&self, v: &VectorField) -> VectorField {
        let d = self.dim;
        let mut out = VectorField::zeros(d, self.sites());
        for x in 0..self.sites() {
            let s = self.at(x);
            for i in 0..d {
                out.values[x * d + i] = (0..d).map(|j| s[i * d + j] * v.values[x * d + j]).sum();
            }
        }
        out
    }

    /// Rejects sites whose matrix is numerically singular.
    fn check_ellipticity(&self) -> Result<()> {
        let d = self.dim;
        for x in 0..self.sites() {
            let s = self.at(x);
            let scale = s.iter().fold(0.0f64, |m, z| m.max(z.norm()));
            let det = if d == 2 {
                s[0] * s[3] - s[1] * s[2]
            } else {
                s[0] * (s[4] * s[8] - s[5] * s[7]) - s[1] * (s[3] * s[8] - s[5] * s[6])
                    + s[2] * (s[3] * s[7] - s[4] * s[6])
            };
            if !(det.norm() > 1e-12 * scale.powi(d as i32)) {
                return Err(Error::Domain(format!("conductivity at site {x} is singular (|det| = {:e})", det.norm())));
            }
        }
        Ok(())
    }
}

/// Which linear solver to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverChoice {
    /// Dense LU when the lattice has at most [`DIRECT_CAP`] sites.
    Auto,
    Direct,
    Iterative,
}

/// Correctors, fields and currents for every direction.
#[derive(Clone, Debug)]
pub struct CellSolution {
    pub psi: Vec<ScalarField>,
    pub e_fields: Vec<VectorField>,
    pub j_fields: Vec<VectorField>,
    /// `|grad^T J| / |grad^T sigma e_i|` per direction.
    pub residuals: Vec<f64>,
}

/// Cell-problem effective tensor with its self-checks.
#[derive(Clone, Debug)]
pub struct OracleResult {
    /// Row-major `sigma*`.
    pub sigma_star: Vec<C64>,
    pub solution: CellSolution,
    /// `max_i |<J_i . E_i> - sigma*_ii|` (bilinear, no conjugation).
    pub energy_residual: f64,
    /// `max_i |<J_i . grad psi_i>|`.
    pub orthogonality_residual: f64,
}

fn operator(lat: &Lattice, sigma: &SigmaField, psi: &ScalarField) -> Result<ScalarField> {
    lat.divergence_adjoint(&sigma.apply(&lat.gradient(psi)?))
}

fn rhs(lat: &Lattice, sigma: &SigmaField, i: usize) -> Result<ScalarField> {
    let d = lat.dim();
    let mut e = vec![C64::new(0.0, 0.0); d];
    e[i] = C64::new(1.0, 0.0);
    let b = lat.divergence_adjoint(&sigma.apply(&VectorField::constant(&e, lat.sites())))?;
    Ok(ScalarField { values: b.values.iter().map(|z| -z).collect() })
}

fn dense_system(lat: &Lattice, sigma: &SigmaField) -> Result<Mat<c64>> {
    let n = lat.sites();
    let mut a = Mat::<c64>::zeros(n, n);
    let mut unit = ScalarField::zeros(n);
    for col in 0..n {
        unit.values[col] = C64::new(1.0, 0.0);
        let out = operator(lat, sigma, &unit)?;
        unit.values[col] = C64::new(0.0, 0.0);
        for (row, v) in out.values.iter().enumerate() {
            if v.norm() != 0.0 {
                a[(row, col)] = *v;
            }
        }
    }
    Ok(a)
}

/// Pins `psi(0) = 0`, solves the remaining `N - 1` equations, then removes
/// the mean.
fn solve_direct(a: &Mat<c64>, rhs: &[ScalarField]) -> Result<Vec<ScalarField>> {
    let n = a.nrows();
    let reduced = Mat::from_fn(n - 1, n - 1, |i, j| a[(i + 1, j + 1)]);
    let b = Mat::from_fn(n - 1, rhs.len(), |i, c| rhs[c].values[i + 1]);
    let lu = reduced.partial_piv_lu();
    let x = lu.solve(&b);
    let mut out = Vec::with_capacity(rhs.len());
    for c in 0..rhs.len() {
        let mut values = Vec::with_capacity(n);
        values.push(C64::new(0.0, 0.0));
        for i in 0..n - 1 {
            values.push(x[(i, c)]);
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Solver { message: "dense LU produced non-finite values".into(), condition: f64::INFINITY });
        }
        let f = ScalarField { values };
        let m = f.mean();
        out.push(ScalarField { values: f.values.iter().map(|z| z - m).collect() });
    }
    Ok(out)
}

fn bilinear(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned COCG on the mean-zero subspace.
fn solve_cocg(lat: &Lattice, sigma: &SigmaField, b: &ScalarField) -> Result<ScalarField> {
    let n = lat.sites();
    let d = lat.dim();
    // diag(grad^T sigma grad)_x = sum_i sigma_ii(x) + sigma_ii(x - e_i)
    let diag: Vec<C64> = (0..n)
        .map(|x| (0..d).map(|i| sigma.at(x)[i * d + i] + sigma.at(lat.backward(x, i))[i * d + i]).sum())
        .collect();
    let precond = |r: &[C64]| -> Vec<C64> { r.iter().zip(&diag).map(|(v, g)| v / g).collect() };
    let b_norm = b.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut x = vec![C64::new(0.0, 0.0); n];
    if b_norm == 0.0 {
        return Ok(ScalarField { values: x });
    }
    let mut r = b.values.clone();
    let mut z = precond(&r);
    let mut p = z.clone();
    let mut rho = bilinear(&r, &z);
    let max_iter = 20 * n + 100;
    for _ in 0..max_iter {
        let ap = operator(lat, sigma, &ScalarField { values: p.clone() })?.values;
        let pap = bilinear(&p, &ap);
        if pap.norm() < 1e-300 {
            return Err(Error::Solver { message: "COCG breakdown (p^T A p = 0)".into(), condition: f64::INFINITY });
        }
        let alpha = rho / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let r_norm = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if r_norm <= KRYLOV_TOL * b_norm {
            let f = ScalarField { values: x };
            let m = f.mean();
            return Ok(ScalarField { values: f.values.iter().map(|v| v - m).collect() });
        }
        z = precond(&r);
        let rho_next = bilinear(&r, &z);
        if rho.norm() < 1e-300 {
            return Err(Error::Solver { message: "COCG breakdown (r^T z = 0)".into(), condition: f64::INFINITY });
        }
        let beta = rho_next / rho;
        rho = rho_next;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::Solver {
        message: format!("COCG did not reach relative residual {KRYLOV_TOL:e} in {max_iter} iterations"),
        condition: f64::NAN,
    })
}

/// Corrector for one direction.
pub fn solve_cell(lat: &Lattice, sigma: &SigmaField, i: usize, choice: SolverChoice) -> Result<CellSolution> {
    solve_directions(lat, sigma, &[i], choice)
}

fn solve_directions(lat: &Lattice, sigma: &SigmaField, dirs: &[usize], choice: SolverChoice) -> Result<CellSolution> {
    if sigma.dim != lat.dim() || sigma.sites() != lat.sites() {
        return Err(Error::SizeMismatch { expected: lat.sites() * lat.dim() * lat.dim(), actual: sigma.values.len() });
    }
    if let Some(&bad) = dirs.iter().find(|&&i| i >= lat.dim()) {
        return Err(Error::Dimension(format!("direction {bad} in {}D", lat.dim())));
    }
    sigma.check_ellipticity()?;
    let rhss: Vec<ScalarField> = dirs.iter().map(|&i| rhs(lat, sigma, i)).collect::<Result<_>>()?;
    let direct = match choice {
        SolverChoice::Auto => lat.sites() <= DIRECT_CAP,
        SolverChoice::Direct => true,
        SolverChoice::Iterative => false,
    };
    let psi = if direct {
        solve_direct(&dense_system(lat, sigma)?, &rhss)?
    } else {
        rhss.iter().map(|b| solve_cocg(lat, sigma, b)).collect::<Result<Vec<_>>>()?
    };
    let d = lat.dim();
    let mut e_fields = Vec::new();
    let mut j_fields = Vec::new();
    let mut residuals = Vec::new();
    for ((&i, p), b) in dirs.iter().zip(&psi).zip(&rhss) {
        let mut e = lat.gradient(p)?;
        for x in 0..lat.sites() {
            e.values[x * d + i] += C64::new(1.0, 0.0);
        }
        let j = sigma.apply(&e);
        let div = lat.divergence_adjoint(&j)?;
        let scale = b.norm();
        let res = if scale == 0.0 { div.norm() } else { div.norm() / scale };
        if !(res < RESIDUAL_TOL) {
            return Err(Error::Solver {
                message: format!("cell residual {res:e} in direction {i} exceeds {RESIDUAL_TOL:e}"),
                condition: f64::NAN,
            });
        }
        residuals.push(res);
        e_fields.push(e);
        j_fields.push(j);
    }
    Ok(CellSolution { psi, e_fields, j_fields, residuals })
}

/// `sigma* = <sigma (I + grad psi)>` from the correctors of all directions.
pub fn effective_from_cell(lat: &Lattice, sigma: &SigmaField, choice: SolverChoice) -> Result<OracleResult> {
    let d = lat.dim();
    let dirs: Vec<usize> = (0..d).collect();
    let solution = solve_directions(lat, sigma, &dirs, choice)?;
    let mut sigma_star = vec![C64::new(0.0, 0.0); d * d];
    let mut energy_residual: f64 = 0.0;
    let mut orthogonality_residual: f64 = 0.0;
    let n = lat.sites() as f64;
    for i in 0..d {
        let j = &solution.j_fields[i];
        for k in 0..d {
            sigma_star[k * d + i] = j.mean(k);
        }
        let energy = bilinear(&j.values, &solution.e_fields[i].values) / n;
        energy_residual = energy_residual.max((energy - sigma_star[i * d + i]).norm());
        let ef = lat.gradient(&solution.psi[i])?;
        orthogonality_residual = orthogonality_residual.max((bilinear(&j.values, &ef.values) / n).norm());
    }
    Ok(OracleResult { sigma_star, solution, energy_residual, orthogonality_residual })
}
