use crate::error::{Error, Result};
use crate::lattice::{Lattice, VectorField, C64};
use crate::microgeometry::{Medium, Phase};
use faer::Mat;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Default largest dense eigenproblem.
pub const DENSE_CAP: usize = 16384;

/// The self-adjoint operators whose spectral measures carry the geometry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    X1GammaX1,
    X2GammaX2,
    X1UpsilonX1,
    X2UpsilonX2,
    Chi1GammaChi1,
    Chi2GammaChi2,
    Chi1UpsilonChi1,
    Chi2UpsilonChi2,
    SobolevM,
}

/// Which projection sits between the phase projections.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    Gamma,
    Upsilon,
}

impl OperatorKind {
    pub const ALL_PROJECTION_KINDS: [OperatorKind; 8] = [
        OperatorKind::X1GammaX1,
        OperatorKind::X2GammaX2,
        OperatorKind::X1UpsilonX1,
        OperatorKind::X2UpsilonX2,
        OperatorKind::Chi1GammaChi1,
        OperatorKind::Chi2GammaChi2,
        OperatorKind::Chi1UpsilonChi1,
        OperatorKind::Chi2UpsilonChi2,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            OperatorKind::X1GammaX1 => "x1_gamma_x1",
            OperatorKind::X2GammaX2 => "x2_gamma_x2",
            OperatorKind::X1UpsilonX1 => "x1_upsilon_x1",
            OperatorKind::X2UpsilonX2 => "x2_upsilon_x2",
            OperatorKind::Chi1GammaChi1 => "chi1_gamma_chi1",
            OperatorKind::Chi2GammaChi2 => "chi2_gamma_chi2",
            OperatorKind::Chi1UpsilonChi1 => "chi1_upsilon_chi1",
            OperatorKind::Chi2UpsilonChi2 => "chi2_upsilon_chi2",
            OperatorKind::SobolevM => "sobolev_m",
        }
    }

    /// `(phase, projection, indicator)`; `None` for the Sobolev operator.
    pub fn parts(&self) -> Option<(Phase, Projection, bool)> {
        use OperatorKind::*;
        use Projection::*;
        Some(match self {
            X1GammaX1 => (Phase::One, Gamma, false),
            X2GammaX2 => (Phase::Two, Gamma, false),
            X1UpsilonX1 => (Phase::One, Upsilon, false),
            X2UpsilonX2 => (Phase::Two, Upsilon, false),
            Chi1GammaChi1 => (Phase::One, Gamma, true),
            Chi2GammaChi2 => (Phase::Two, Gamma, true),
            Chi1UpsilonChi1 => (Phase::One, Upsilon, true),
            Chi2UpsilonChi2 => (Phase::Two, Upsilon, true),
            SobolevM => return None,
        })
    }

    /// The projection kind of `phase`/`projection` appropriate for `medium`.
    pub fn for_medium(medium: &Medium, phase: Phase, projection: Projection) -> Self {
        let chi = matches!(medium, Medium::TwoComponent(_));
        *Self::ALL_PROJECTION_KINDS
            .iter()
            .find(|k| k.parts() == Some((phase, projection, chi)))
            .expect("every combination has a kind")
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL_PROJECTION_KINDS
            .iter()
            .chain(std::iter::once(&OperatorKind::SobolevM))
            .find(|k| k.label() == s)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown operator kind '{s}'")))
    }
}

/// Orthonormal bases of the per-site ranges of a phase projection, flattened
/// into one list of columns. Column `c` is the vector `vectors[c]` supported
/// on site `site[c]`.
#[derive(Clone, Debug)]
pub struct RangeBasis {
    pub dim: usize,
    pub sites: usize,
    pub site: Vec<usize>,
    pub vectors: Vec<[f64; 3]>,
    /// First column of each site; `start[sites]` is the column count.
    pub start: Vec<usize>,
}

impl RangeBasis {
    pub fn new(medium: &Medium, phase: Phase) -> Self {
        let d = medium.dim();
        let n = medium.sites();
        let mut site = Vec::new();
        let mut vectors = Vec::new();
        let mut start = Vec::with_capacity(n + 1);
        for x in 0..n {
            start.push(site.len());
            for b in medium.range_basis(phase, x) {
                let mut v = [0.0; 3];
                v[..d].copy_from_slice(&b);
                site.push(x);
                vectors.push(v);
            }
        }
        start.push(site.len());
        Self { dim: d, sites: n, site, vectors, start }
    }

    pub fn len(&self) -> usize {
        self.site.len()
    }

    pub fn is_empty(&self) -> bool {
        self.site.is_empty()
    }

    /// `V c` as a lattice vector field.
    pub fn lift(&self, c: &[C64]) -> VectorField {
        let d = self.dim;
        let mut v = VectorField::zeros(d, self.sites);
        for (col, &x) in self.site.iter().enumerate() {
            for i in 0..d {
                v.values[x * d + i] += c[col] * self.vectors[col][i];
            }
        }
        v
    }

    /// `V^T v`.
    pub fn restrict(&self, v: &VectorField) -> Vec<C64> {
        let d = self.dim;
        self.site
            .iter()
            .enumerate()
            .map(|(col, &x)| (0..d).map(|i| v.values[x * d + i] * self.vectors[col][i]).sum())
            .collect()
    }

    /// Coordinates of the constant field `e_j` projected on the range, i.e.
    /// `V^T X e_j = V^T e_j`.
    pub fn unit_coordinates(&self, j: usize) -> Vec<f64> {
        self.vectors.iter().map(|v| v[j]).collect()
    }
}

/// How an operator is stored.
#[derive(Clone, Debug)]
pub enum Representation {
    /// `V^T K V` on the range of the phase projection. Exact for spectral
    /// measures: the operator vanishes on the complement, and the sources
    /// `X e_j` live in the range.
    Compressed { basis: RangeBasis, matrix: Mat<f64> },
    /// `X K X` on all `N d` unknowns, for small cross-checks.
    Full { matrix: Mat<f64> },
    /// Applied through FFTs only.
    MatrixFree { basis: RangeBasis },
    /// The matrix of `M` in a real Fourier basis orthonormal for
    /// `<grad f . grad g>`.
    Sobolev { matrix: Mat<f64>, gradients: Mat<f64> },
}

/// A self-adjoint operator on the lattice together with the realization that
/// defines it.
#[derive(Clone, Debug)]
pub struct SymmetricOperator {
    pub kind: OperatorKind,
    pub lattice: Lattice,
    pub medium: Medium,
    pub repr: Representation,
}

fn check_medium(kind: OperatorKind, medium: &Medium, lat: &Lattice) -> Result<(Phase, Projection)> {
    if medium.sites() != lat.sites() {
        return Err(Error::SizeMismatch { expected: lat.sites(), actual: medium.sites() });
    }
    if medium.dim() != lat.dim() {
        return Err(Error::Dimension(format!(
            "medium is {}-dimensional, lattice is {}-dimensional",
            medium.dim(),
            lat.dim()
        )));
    }
    let (phase, projection, chi) = kind
        .parts()
        .ok_or_else(|| Error::Config("use sobolev_m for the Sobolev operator".into()))?;
    let is_chi = matches!(medium, Medium::TwoComponent(_));
    if chi != is_chi {
        return Err(Error::Config(format!(
            "operator {kind} needs a {} field",
            if chi { "two-component indicator" } else { "polycrystal projection" }
        )));
    }
    Ok((phase, projection))
}

fn kernel(lat: &Lattice, projection: Projection) -> Vec<f64> {
    match projection {
        Projection::Gamma => lat.gamma_kernel(),
        Projection::Upsilon => lat.upsilon_kernel(),
    }
}

/// Periodic offset table: `offset(x, y)` for all pairs is recomputed from
/// coordinates on the fly.
struct Offsets {
    dim: usize,
    side: usize,
    coords: Vec<[usize; 3]>,
}

impl Offsets {
    fn new(lat: &Lattice) -> Self {
        Self { dim: lat.dim(), side: lat.side(), coords: (0..lat.sites()).map(|x| lat.coords(x)).collect() }
    }

    #[inline]
    fn get(&self, x: usize, y: usize) -> usize {
        let (a, b) = (&self.coords[x], &self.coords[y]);
        let mut r = 0;
        for i in (0..self.dim).rev() {
            r = r * self.side + (a[i] + self.side - b[i]) % self.side;
        }
        r
    }
}

impl SymmetricOperator {
    /// Compressed dense assembly when the range dimension is at most
    /// `dense_cap`, matrix-free otherwise.
    pub fn assemble(kind: OperatorKind, medium: &Medium, lat: &Lattice, dense_cap: usize) -> Result<Self> {
        let (phase, projection) = check_medium(kind, medium, lat)?;
        let basis = RangeBasis::new(medium, phase);
        let m = basis.len();
        if m > dense_cap {
            return Ok(Self {
                kind,
                lattice: lat.clone(),
                medium: medium.clone(),
                repr: Representation::MatrixFree { basis },
            });
        }
        let d = lat.dim();
        let dd = d * d;
        let k = kernel(lat, projection);
        let off = Offsets::new(lat);
        let mut matrix = Mat::<f64>::zeros(m, m);
        let mut t = [0.0f64; 3];
        for x in 0..lat.sites() {
            for a in basis.start[x]..basis.start[x + 1] {
                let va = &basis.vectors[a];
                for y in 0..lat.sites() {
                    let cols = basis.start[y]..basis.start[y + 1];
                    if cols.is_empty() {
                        continue;
                    }
                    let kr = &k[off.get(x, y) * dd..(off.get(x, y) + 1) * dd];
                    for j in 0..d {
                        t[j] = (0..d).map(|i| va[i] * kr[i * d + j]).sum();
                    }
                    for b in cols {
                        let vb = &basis.vectors[b];
                        matrix[(a, b)] = (0..d).map(|j| t[j] * vb[j]).sum();
                    }
                }
            }
        }
        Ok(Self { kind, lattice: lat.clone(), medium: medium.clone(), repr: Representation::Compressed { basis, matrix } })
    }

    /// `X K X` on the full `N d` space.
    pub fn assemble_full(kind: OperatorKind, medium: &Medium, lat: &Lattice) -> Result<Self> {
        let (phase, projection) = check_medium(kind, medium, lat)?;
        let (n, d) = (lat.sites(), lat.dim());
        let dd = d * d;
        let k = kernel(lat, projection);
        let off = Offsets::new(lat);
        let proj: Vec<Vec<f64>> = (0..n).map(|x| medium.projector(phase, x)).collect();
        let size = n * d;
        let mut matrix = Mat::<f64>::zeros(size, size);
        let mut xk = vec![0.0; dd];
        for x in 0..n {
            for y in 0..n {
                let kr = &k[off.get(x, y) * dd..(off.get(x, y) + 1) * dd];
                for i in 0..d {
                    for b in 0..d {
                        xk[i * d + b] = (0..d).map(|a| proj[x][i * d + a] * kr[a * d + b]).sum();
                    }
                }
                for i in 0..d {
                    for j in 0..d {
                        matrix[(x * d + i, y * d + j)] =
                            (0..d).map(|b| xk[i * d + b] * proj[y][b * d + j]).sum();
                    }
                }
            }
        }
        Ok(Self { kind, lattice: lat.clone(), medium: medium.clone(), repr: Representation::Full { matrix } })
    }

    pub fn size(&self) -> usize {
        match &self.repr {
            Representation::Compressed { basis, .. } | Representation::MatrixFree { basis } => basis.len(),
            Representation::Full { matrix } | Representation::Sobolev { matrix, .. } => matrix.nrows(),
        }
    }

    pub fn dense_matrix(&self) -> Option<&Mat<f64>> {
        match &self.repr {
            Representation::Compressed { matrix, .. }
            | Representation::Full { matrix }
            | Representation::Sobolev { matrix, .. } => Some(matrix),
            Representation::MatrixFree { .. } => None,
        }
    }

    /// `max |A - A^T| / max |A|` of the stored matrix.
    pub fn symmetry_residual(&self) -> Option<f64> {
        let a = self.dense_matrix()?;
        let n = a.nrows();
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                diff = diff.max((a[(i, j)] - a[(j, i)]).abs());
                scale = scale.max(a[(i, j)].abs());
            }
        }
        Some(if scale == 0.0 { 0.0 } else { diff / scale })
    }

    /// `X K X v` on the full space, through FFTs.
    pub fn apply_field(&self, v: &VectorField) -> Result<VectorField> {
        let (phase, projection, _) = self
            .kind
            .parts()
            .ok_or_else(|| Error::Config("field application is defined for projection kinds".into()))?;
        let xv = self.project(phase, v);
        let kv = match projection {
            Projection::Gamma => self.lattice.gamma_apply(&xv)?,
            Projection::Upsilon => self.lattice.upsilon_apply(&xv)?,
        };
        Ok(self.project(phase, &kv))
    }

    fn project(&self, phase: Phase, v: &VectorField) -> VectorField {
        let d = v.dim;
        let mut out = VectorField::zeros(d, v.sites());
        for x in 0..v.sites() {
            let p = self.medium.projector(phase, x);
            for i in 0..d {
                out.values[x * d + i] = (0..d).map(|j| v.values[x * d + j] * p[i * d + j]).sum();
            }
        }
        out
    }

    /// Operator applied to a coordinate vector of the stored representation.
    pub fn apply_coordinates(&self, c: &[f64]) -> Result<Vec<f64>> {
        match &self.repr {
            Representation::Compressed { basis, .. } | Representation::MatrixFree { basis } => {
                let v = basis.lift(&c.iter().map(|&r| C64::new(r, 0.0)).collect::<Vec<_>>());
                let out = self.apply_field(&v)?;
                Ok(basis.restrict(&out).into_iter().map(|z| z.re).collect())
            }
            Representation::Full { .. } => {
                let d = self.lattice.dim();
                let v = VectorField::from_real(d, c);
                Ok(self.apply_field(&v)?.values.iter().map(|z| z.re).collect())
            }
            Representation::Sobolev { matrix, .. } => {
                let x = Mat::from_fn(c.len(), 1, |i, _| c[i]);
                let y = matrix * &x;
                Ok((0..c.len()).map(|i| y[(i, 0)]).collect())
            }
        }
    }

    /// Coordinates of the measure sources `X e_j` and targets `e_k`, scaled
    /// so that a weight is `(q . src_j)(q . tgt_k) / N`.
    pub fn sources_and_targets(&self) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let d = self.lattice.dim();
        match &self.repr {
            Representation::Compressed { basis, .. } | Representation::MatrixFree { basis } => {
                let src: Vec<Vec<f64>> = (0..d).map(|j| basis.unit_coordinates(j)).collect();
                Ok((src.clone(), src))
            }
            Representation::Full { .. } => {
                let (phase, _, _) = self.kind.parts().expect("full operators are projection kinds");
                let n = self.lattice.sites();
                let mut src = vec![vec![0.0; n * d]; d];
                let mut tgt = vec![vec![0.0; n * d]; d];
                for x in 0..n {
                    let p = self.medium.projector(phase, x);
                    for j in 0..d {
                        for i in 0..d {
                            src[j][x * d + i] = p[i * d + j];
                        }
                        tgt[j][x * d + j] = 1.0;
                    }
                }
                Ok((src, tgt))
            }
            Representation::Sobolev { .. } => {
                Err(Error::Config("the Sobolev operator has its own measure extraction".into()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::microgeometry::*;

    fn polycrystal(d: usize, l: usize, per: usize, seed: u64) -> (Lattice, Medium) {
        let lat = Lattice::new(d, l).unwrap();
        let of = checkerboard_polycrystal(&lat, per, &AngleDistribution::Uniform, seed).unwrap();
        (lat.clone(), Medium::Polycrystal(projection_field(&of).unwrap()))
    }

    #[test]
    fn kind_labels_round_trip() {
        for k in OperatorKind::ALL_PROJECTION_KINDS.iter().chain([OperatorKind::SobolevM].iter()) {
            assert_eq!(k.label().parse::<OperatorKind>().unwrap(), *k);
        }
        assert!(matches!("x3_gamma_x3".parse::<OperatorKind>(), Err(Error::Config(_))));
    }

    #[test]
    fn kind_medium_mismatch() {
        let (lat, m) = polycrystal(2, 4, 2, 0);
        assert!(matches!(
            SymmetricOperator::assemble(OperatorKind::Chi1GammaChi1, &m, &lat, DENSE_CAP),
            Err(Error::Config(_))
        ));
        let other = Lattice::new(2, 8).unwrap();
        assert!(matches!(
            SymmetricOperator::assemble(OperatorKind::X1GammaX1, &m, &other, DENSE_CAP),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn single_crystal_annihilates_constant() {
        let lat = Lattice::new(2, 4).unwrap();
        let of = checkerboard_polycrystal(&lat, 1, &AngleDistribution::Fixed(vec![0.0]), 0).unwrap();
        let m = Medium::Polycrystal(projection_field(&of).unwrap());
        let op = SymmetricOperator::assemble(OperatorKind::X1GammaX1, &m, &lat, DENSE_CAP).unwrap();
        let e1 = VectorField::constant(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], 16);
        assert!(op.apply_field(&e1).unwrap().norm() < 1e-14);
        let c = vec![1.0; op.size()];
        assert!(op.apply_coordinates(&c).unwrap().iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn identity_indicator_fixes_gradients() {
        let lat = Lattice::new(2, 4).unwrap();
        let ind = two_component_field(&lat, 1.0, 0, IndicatorScheme::SiteIid).unwrap();
        let m = Medium::TwoComponent(ind);
        let op = SymmetricOperator::assemble(OperatorKind::Chi1GammaChi1, &m, &lat, DENSE_CAP).unwrap();
        let f = crate::ScalarField::from_real(&(0..16).map(|i| ((i * 7) % 5) as f64).collect::<Vec<_>>());
        let g = lat.gradient(&f).unwrap();
        assert!(op.apply_field(&g).unwrap().sub(&g).norm() < 1e-12 * g.norm());
    }

    #[test]
    fn assembled_matrices_are_symmetric_and_match_fft_application() {
        let (lat, m) = polycrystal(2, 8, 4, 11);
        for kind in [OperatorKind::X1GammaX1, OperatorKind::X2GammaX2, OperatorKind::X1UpsilonX1, OperatorKind::X2UpsilonX2] {
            for op in [
                SymmetricOperator::assemble(kind, &m, &lat, DENSE_CAP).unwrap(),
                SymmetricOperator::assemble_full(kind, &m, &lat).unwrap(),
            ] {
                assert!(op.symmetry_residual().unwrap() < 1e-12);
                let a = op.dense_matrix().unwrap();
                let c: Vec<f64> = (0..op.size()).map(|i| ((i * 31 % 17) as f64 - 8.0) / 8.0).collect();
                let x = Mat::from_fn(c.len(), 1, |i, _| c[i]);
                let y = a * &x;
                let z = op.apply_coordinates(&c).unwrap();
                for i in 0..c.len() {
                    assert!((y[(i, 0)] - z[i]).abs() < 1e-12, "{kind}");
                }
            }
        }
    }

    #[test]
    fn compressed_sizes() {
        let (lat, m) = polycrystal(3, 4, 2, 1);
        let a = SymmetricOperator::assemble(OperatorKind::X1GammaX1, &m, &lat, DENSE_CAP).unwrap();
        let b = SymmetricOperator::assemble(OperatorKind::X2UpsilonX2, &m, &lat, DENSE_CAP).unwrap();
        assert_eq!(a.size(), 64);
        assert_eq!(b.size(), 128);
        let c = SymmetricOperator::assemble(OperatorKind::X2UpsilonX2, &m, &lat, 100).unwrap();
        assert!(matches!(c.repr, Representation::MatrixFree { .. }));
    }
}
