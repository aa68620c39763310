use super::operator::{Representation, SymmetricOperator};
use crate::error::{Error, Result};
use crate::measure::{MeasureInfo, SpectralMeasure, CLUSTER_TOL};
use faer::{Mat, Side};

/// Eigenvalues this far outside `[0, 1]` are clamped; further out is an error.
pub const CLAMP_TOL: f64 = 1e-10;

/// Largest accepted `|A q - lambda q|` for a unit eigenvector.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Atoms lighter than this are dropped after extraction. The bulk of the
/// spectrum is orthogonal to the sources and carries round-off weight only.
pub const WEIGHT_FLOOR: f64 = 1e-20;

/// A dense symmetric eigendecomposition, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Mat<f64>,
    /// Eigenvalues moved onto `[0, 1]` from within [`CLAMP_TOL`].
    pub clamped: usize,
    /// Worst residual over the sampled eigenpairs.
    pub max_residual: f64,
}

/// Dense eigendecomposition of a stored operator, with the spectrum
/// certified to lie in `[0, 1]` up to [`CLAMP_TOL`] and a sample of residuals
/// checked against [`RESIDUAL_TOL`].
///
/// The Sobolev operator is certified on `[0, 1]` as well, since its spectrum
/// coincides with that of `X1 Gamma X1` apart from the zero eigenvalue.
pub fn eigendecompose(op: &SymmetricOperator) -> Result<Eigen> {
    let a = op.dense_matrix().ok_or_else(|| {
        Error::Config("matrix-free operators expose measures through Lanczos, not a full eigendecomposition".into())
    })?;
    dense_eigen(a)
}

pub fn dense_eigen(a: &Mat<f64>) -> Result<Eigen> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Eigen { values: vec![], vectors: Mat::zeros(0, 0), clamped: 0, max_residual: 0.0 });
    }
    let eig = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Convergence(format!("dense symmetric eigensolver failed: {e:?}")))?;
    let s = eig.S().column_vector();
    let raw: Vec<f64> = (0..n).map(|i| s[i]).collect();
    let vectors = eig.U().to_owned();

    let samples = 16.min(n);
    let mut max_residual: f64 = 0.0;
    for t in 0..samples {
        let i = if samples == 1 { 0 } else { t * (n - 1) / (samples - 1) };
        let q = vectors.col(i);
        let aq = a * q;
        let r: f64 = (0..n).map(|p| (aq[p] - raw[i] * q[p]).powi(2)).sum::<f64>().sqrt();
        max_residual = max_residual.max(r);
    }
    if !(max_residual < RESIDUAL_TOL) {
        return Err(Error::Convergence(format!("eigenpair residual {max_residual:e} exceeds {RESIDUAL_TOL:e}")));
    }

    let mut clamped = 0;
    let mut values = Vec::with_capacity(n);
    for &l in &raw {
        if !l.is_finite() || l < -CLAMP_TOL || l > 1.0 + CLAMP_TOL {
            return Err(Error::SpectrumExcursion { value: l, tolerance: CLAMP_TOL });
        }
        if l < 0.0 || l > 1.0 {
            clamped += 1;
        }
        values.push(l.clamp(0.0, 1.0));
    }
    Ok(Eigen { values, vectors, clamped, max_residual })
}

/// All `d x d` measures `mu_jk` of a projection-kind operator, indexed
/// `[j][k]`. Dense representations use the eigendecomposition; matrix-free
/// ones use Lanczos.
pub fn spectral_measures(op: &SymmetricOperator) -> Result<Vec<Vec<SpectralMeasure<f64>>>> {
    match &op.repr {
        Representation::MatrixFree { .. } => lanczos_measures(op, op.size()),
        _ => {
            let eig = eigendecompose(op)?;
            measures_from_eigen(op, &eig)
        }
    }
}

fn info(op: &SymmetricOperator, j: usize, k: usize) -> MeasureInfo {
    MeasureInfo {
        kind: op.kind.label().to_string(),
        j,
        k,
        d: op.lattice.dim(),
        side: op.lattice.side(),
        seed: op.medium.seed(),
    }
}

/// Weights `w_i = (q_i . src_j)(q_i . tgt_k) / N`.
pub fn measures_from_eigen(op: &SymmetricOperator, eig: &Eigen) -> Result<Vec<Vec<SpectralMeasure<f64>>>> {
    let d = op.lattice.dim();
    let n = op.lattice.sites() as f64;
    let (src, tgt) = op.sources_and_targets()?;
    let m = eig.values.len();
    let to_mat = |vs: &Vec<Vec<f64>>| Mat::from_fn(m, d, |i, j| vs[j][i]);
    let ps = eig.vectors.transpose() * to_mat(&src);
    let pt = eig.vectors.transpose() * to_mat(&tgt);
    let mut out = Vec::with_capacity(d);
    for j in 0..d {
        let mut row = Vec::with_capacity(d);
        for k in 0..d {
            let atoms: Vec<(f64, f64)> = (0..m).map(|i| (eig.values[i], ps[(i, j)] * pt[(i, k)] / n)).collect();
            let measure = SpectralMeasure::new(info(op, j, k), atoms).clustered(CLUSTER_TOL).pruned(WEIGHT_FLOOR);
            row.push(measure);
        }
        out.push(row);
    }
    Ok(out)
}

/// Gauss quadrature of `<f(A) b, b>` by Lanczos with full
/// reorthogonalization, run until the Krylov space is invariant. Returns the
/// Ritz values and the weights `(first component)^2 |b|^2`.
pub fn lanczos_quadrature(
    apply: &dyn Fn(&[f64]) -> Result<Vec<f64>>,
    b: &[f64],
    max_iter: usize,
) -> Result<Vec<(f64, f64)>> {
    let norm_b = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm_b == 0.0 {
        return Ok(vec![]);
    }
    let mut basis: Vec<Vec<f64>> = vec![b.iter().map(|v| v / norm_b).collect()];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    loop {
        let q = basis.last().expect("nonempty");
        let mut w = apply(q)?;
        let a: f64 = w.iter().zip(q).map(|(x, y)| x * y).sum();
        alpha.push(a);
        for _ in 0..2 {
            for p in &basis {
                let c: f64 = w.iter().zip(p).map(|(x, y)| x * y).sum();
                for (wi, pi) in w.iter_mut().zip(p) {
                    *wi -= c * pi;
                }
            }
        }
        let bnorm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if bnorm < 1e-10 || alpha.len() == b.len() {
            break;
        }
        if alpha.len() >= max_iter {
            return Err(Error::Convergence(format!(
                "Lanczos reached {max_iter} steps with residual coupling {bnorm:e}"
            )));
        }
        beta.push(bnorm);
        basis.push(w.into_iter().map(|v| v / bnorm).collect());
    }
    let k = alpha.len();
    let t = Mat::from_fn(k, k, |i, j| {
        if i == j {
            alpha[i]
        } else if i == j + 1 {
            beta[j]
        } else if j == i + 1 {
            beta[i]
        } else {
            0.0
        }
    });
    let eig = t
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Convergence(format!("tridiagonal eigensolver failed: {e:?}")))?;
    let s = eig.S().column_vector();
    let u = eig.U();
    Ok((0..k).map(|i| (s[i], u[(0, i)] * u[(0, i)] * norm_b * norm_b)).collect())
}

fn lanczos_measures(op: &SymmetricOperator, max_iter: usize) -> Result<Vec<Vec<SpectralMeasure<f64>>>> {
    let d = op.lattice.dim();
    let n = op.lattice.sites() as f64;
    let (src, _) = op.sources_and_targets()?;
    let apply = |c: &[f64]| op.apply_coordinates(c);
    let certify = |atoms: Vec<(f64, f64)>| -> Result<Vec<(f64, f64)>> {
        atoms
            .into_iter()
            .map(|(l, w)| {
                if l < -CLAMP_TOL || l > 1.0 + CLAMP_TOL {
                    Err(Error::SpectrumExcursion { value: l, tolerance: CLAMP_TOL })
                } else {
                    Ok((l.clamp(0.0, 1.0), w / n))
                }
            })
            .collect()
    };
    let mut out = vec![Vec::with_capacity(d); d];
    for j in 0..d {
        for k in 0..d {
            let atoms = if j == k {
                certify(lanczos_quadrature(&apply, &src[j], max_iter)?)?
            } else {
                // Polarization: <f(A) a, b> = (<f(A)(a+b), a+b> - <f(A)(a-b), a-b>) / 4
                let plus: Vec<f64> = src[j].iter().zip(&src[k]).map(|(a, b)| a + b).collect();
                let minus: Vec<f64> = src[j].iter().zip(&src[k]).map(|(a, b)| a - b).collect();
                let mut atoms: Vec<(f64, f64)> =
                    certify(lanczos_quadrature(&apply, &plus, max_iter)?)?.into_iter().map(|(l, w)| (l, w / 4.0)).collect();
                atoms.extend(
                    certify(lanczos_quadrature(&apply, &minus, max_iter)?)?.into_iter().map(|(l, w)| (l, -w / 4.0)),
                );
                atoms
            };
            out[j].push(SpectralMeasure::new(info(op, j, k), atoms).clustered(CLUSTER_TOL).pruned(WEIGHT_FLOOR));
        }
    }
    Ok(out)
}

/// `<(X K X)^n X e_j, e_k>` for `n = 0..=n_max`, by repeated FFT application
/// on the full field. Independent of the assembled matrix.
pub fn operator_moments(op: &SymmetricOperator, j: usize, k: usize, n_max: usize) -> Result<Vec<f64>> {
    let (phase, _, _) = op
        .kind
        .parts()
        .ok_or_else(|| Error::Config("operator powers are defined for projection kinds".into()))?;
    let d = op.lattice.dim();
    let sites = op.lattice.sites();
    let mut v = crate::lattice::VectorField::zeros(d, sites);
    for x in 0..sites {
        let p = op.medium.projector(phase, x);
        for i in 0..d {
            v.values[x * d + i] = crate::C64::new(p[i * d + j], 0.0);
        }
    }
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if n > 0 {
            v = op.apply_field(&v)?;
        }
        out.push(v.mean(k).re);
    }
    Ok(out)
}
