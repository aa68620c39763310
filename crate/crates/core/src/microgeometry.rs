//! Random uniaxial polycrystals and two-component media on a periodic lattice.
//!
//! A uniaxial crystallite with orientation `R` has local conductivity
//! `sigma = sigma1 X1 + sigma2 X2`, with `X1 = R^T diag(1,0,..) R` and
//! `X2 = I - X1`. A two-component medium uses `X1 = chi1 I` instead.
//!
//! Realizations are reproducible: every generator takes a `u64` seed and uses
//! ChaCha20. Ensembles derive member seeds with [`realization_seed`].

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::scalar::Real;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

/// Seed of realization `index` in an ensemble starting at `base`.
pub fn realization_seed(base: u64, index: u64) -> u64 {
    base.wrapping_add(index)
}

/// Number of angles describing an orientation in `dim` dimensions.
pub fn angle_arity(dim: usize) -> usize {
    if dim == 2 {
        1
    } else {
        3
    }
}

/// Rotation matrix, row-major.
///
/// 2D takes `[theta]` and returns `[[cos, -sin], [sin, cos]]`. 3D takes
/// `[theta1, theta2, theta3]` and returns `R1 R2 R3`, where `Rj` rotates about
/// `e_j`.
pub fn rotation_matrix<T: Real>(angles: &[T]) -> Result<Vec<Vec<T>>> {
    let (o, z) = (T::one(), T::zero());
    match angles.len() {
        1 => {
            let (s, c) = angles[0].sin_cos();
            Ok(vec![vec![c, -s], vec![s, c]])
        }
        3 => {
            let (s1, c1) = angles[0].sin_cos();
            let (s2, c2) = angles[1].sin_cos();
            let (s3, c3) = angles[2].sin_cos();
            let r1 = [[o, z, z], [z, c1, -s1], [z, s1, c1]];
            let r2 = [[c2, z, s2], [z, o, z], [-s2, z, c2]];
            let r3 = [[c3, -s3, z], [s3, c3, z], [z, z, o]];
            let r12 = matmul3(&r1, &r2);
            let r = matmul3(&r12, &r3);
            Ok(r.iter().map(|row| row.to_vec()).collect())
        }
        n => Err(Error::Config(format!("expected 1 (2D) or 3 (3D) angles, got {n}"))),
    }
}

fn matmul3<T: Real>(a: &[[T; 3]; 3], b: &[[T; 3]; 3]) -> [[T; 3]; 3] {
    let mut c = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                c[i][j] = c[i][j] + a[i][k] * b[k][j];
            }
        }
    }
    c
}

/// Crystal axis `R^T e_1`, so that `X1 = n n^T`.
pub fn crystal_axis<T: Real>(angles: &[T]) -> Result<Vec<T>> {
    let r = rotation_matrix(angles)?;
    Ok(r[0].clone())
}

/// How crystallite orientations are drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleDistribution {
    /// Every angle i.i.d. uniform on `[0, 2 pi)`.
    Uniform,
    /// Rotation-invariant axis in 3D: `theta2 = asin(2u - 1)`, the other
    /// angles uniform. Identical to `Uniform` in 2D.
    Haar,
    /// The same orientation in every crystallite.
    Fixed(Vec<f64>),
}

/// Per-site orientation angles of a checkerboard polycrystal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientationField {
    pub dim: usize,
    pub side: usize,
    pub crystallites_per_side: usize,
    pub seed: u64,
    pub distribution: AngleDistribution,
    /// `angles[site * arity + a]`, radians in `[0, 2 pi)`.
    pub angles: Vec<f64>,
}

impl OrientationField {
    pub fn arity(&self) -> usize {
        angle_arity(self.dim)
    }

    pub fn at(&self, site: usize) -> &[f64] {
        let a = self.arity();
        &self.angles[site * a..(site + 1) * a]
    }
}

/// Equal axis-aligned crystallite blocks, each with one independent
/// orientation draw.
pub fn checkerboard_polycrystal(
    lat: &Lattice,
    crystals_per_side: usize,
    dist: &AngleDistribution,
    seed: u64,
) -> Result<OrientationField> {
    let (d, l) = (lat.dim(), lat.side());
    if crystals_per_side == 0 || l % crystals_per_side != 0 {
        return Err(Error::Config(format!(
            "{crystals_per_side} crystallites per side do not divide L = {l}"
        )));
    }
    let arity = angle_arity(d);
    if let AngleDistribution::Fixed(a) = dist {
        if a.len() != arity {
            return Err(Error::Config(format!(
                "fixed orientation needs {arity} angles in {d}D, got {}",
                a.len()
            )));
        }
    }
    let crystals = crystals_per_side.pow(d as u32);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut per_crystal = Vec::with_capacity(crystals * arity);
    for _ in 0..crystals {
        match dist {
            AngleDistribution::Uniform => {
                for _ in 0..arity {
                    per_crystal.push(rng.gen_range(0.0..two_pi));
                }
            }
            AngleDistribution::Haar => {
                if d == 2 {
                    per_crystal.push(rng.gen_range(0.0..two_pi));
                } else {
                    let t1 = rng.gen_range(0.0..two_pi);
                    let u: f64 = rng.gen_range(0.0..1.0);
                    let t2 = (2.0 * u - 1.0).asin().rem_euclid(two_pi);
                    let t3 = rng.gen_range(0.0..two_pi);
                    per_crystal.extend_from_slice(&[t1, t2, t3]);
                }
            }
            AngleDistribution::Fixed(a) => {
                per_crystal.extend(a.iter().map(|v| v.rem_euclid(two_pi)));
            }
        }
    }
    let block = l / crystals_per_side;
    let mut angles = Vec::with_capacity(lat.sites() * arity);
    for site in 0..lat.sites() {
        let x = lat.coords(site);
        let mut c = 0;
        for i in (0..d).rev() {
            c = c * crystals_per_side + x[i] / block;
        }
        angles.extend_from_slice(&per_crystal[c * arity..(c + 1) * arity]);
    }
    Ok(OrientationField {
        dim: d,
        side: l,
        crystallites_per_side: crystals_per_side,
        seed,
        distribution: dist.clone(),
        angles,
    })
}

/// Per-site real symmetric projection `X1`; `X2 = I - X1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionField {
    pub dim: usize,
    pub seed: Option<u64>,
    /// `x1[site * d * d + i * d + j]`
    pub x1: Vec<f64>,
}

/// Selects `X1`/`chi1` or `X2`/`chi2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    One,
    Two,
}

pub fn projection_field(of: &OrientationField) -> Result<ProjectionField> {
    let d = of.dim;
    let sites = of.angles.len() / of.arity();
    let mut x1 = Vec::with_capacity(sites * d * d);
    for site in 0..sites {
        let n = crystal_axis(of.at(site))?;
        for i in 0..d {
            for j in 0..d {
                x1.push(n[i] * n[j]);
            }
        }
    }
    Ok(ProjectionField { dim: d, seed: Some(of.seed), x1 })
}

impl ProjectionField {
    pub fn sites(&self) -> usize {
        self.x1.len() / (self.dim * self.dim)
    }

    pub fn x1_at(&self, site: usize) -> &[f64] {
        let dd = self.dim * self.dim;
        &self.x1[site * dd..(site + 1) * dd]
    }

    /// Largest violation of symmetry, idempotence, unit trace, and the
    /// complementarity of `X1` and `X2`, over all sites.
    pub fn identity_residual(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for site in 0..self.sites() {
            let x = self.x1_at(site);
            let mut trace = 0.0;
            for i in 0..d {
                trace += x[i * d + i];
                for j in 0..d {
                    worst = worst.max((x[i * d + j] - x[j * d + i]).abs());
                    let sq: f64 = (0..d).map(|k| x[i * d + k] * x[k * d + j]).sum();
                    worst = worst.max((sq - x[i * d + j]).abs());
                    // X1 X2 = X1 - X1^2
                    let x2 = if i == j { 1.0 } else { 0.0 } - x[i * d + j];
                    let cross: f64 = (0..d)
                        .map(|k| x[i * d + k] * (if k == j { 1.0 } else { 0.0 } - x[k * d + j]))
                        .sum();
                    worst = worst.max(cross.abs());
                    worst = worst.max((x[i * d + j] + x2 - if i == j { 1.0 } else { 0.0 }).abs());
                }
            }
            worst = worst.max((trace - 1.0).abs());
        }
        worst
    }
}

/// Two-component indicator `chi1`; `chi2 = 1 - chi1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorField {
    pub dim: usize,
    pub side: usize,
    pub p: f64,
    pub seed: u64,
    pub scheme: IndicatorScheme,
    pub chi1: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorScheme {
    /// Independent Bernoulli(p) per site.
    SiteIid,
    /// Independent Bernoulli(p) per block of an equal checkerboard.
    Block { blocks_per_side: usize },
}

impl IndicatorField {
    /// Empirical fraction of phase-one sites.
    pub fn fraction(&self) -> f64 {
        self.chi1.iter().map(|&c| c as f64).sum::<f64>() / self.chi1.len() as f64
    }
}

pub fn two_component_field(
    lat: &Lattice,
    p: f64,
    seed: u64,
    scheme: IndicatorScheme,
) -> Result<IndicatorField> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Config(format!("volume fraction must lie in [0,1], got {p}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (d, l) = (lat.dim(), lat.side());
    let chi1 = match scheme {
        IndicatorScheme::SiteIid => (0..lat.sites()).map(|_| rng.gen_bool(p) as u8).collect(),
        IndicatorScheme::Block { blocks_per_side } => {
            if blocks_per_side == 0 || l % blocks_per_side != 0 {
                return Err(Error::Config(format!(
                    "{blocks_per_side} blocks per side do not divide L = {l}"
                )));
            }
            let draws: Vec<u8> =
                (0..blocks_per_side.pow(d as u32)).map(|_| rng.gen_bool(p) as u8).collect();
            let block = l / blocks_per_side;
            (0..lat.sites())
                .map(|site| {
                    let x = lat.coords(site);
                    let mut c = 0;
                    for i in (0..d).rev() {
                        c = c * blocks_per_side + x[i] / block;
                    }
                    draws[c]
                })
                .collect()
        }
    };
    Ok(IndicatorField { dim: d, side: l, p, seed, scheme, chi1 })
}

/// A realization in the form the operators need: per-site projections onto
/// the two phases.
#[derive(Clone, Debug, PartialEq)]
pub enum Medium {
    Polycrystal(ProjectionField),
    TwoComponent(IndicatorField),
}

impl Medium {
    pub fn dim(&self) -> usize {
        match self {
            Medium::Polycrystal(p) => p.dim,
            Medium::TwoComponent(c) => c.dim,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Medium::Polycrystal(p) => p.seed,
            Medium::TwoComponent(c) => Some(c.seed),
        }
    }

    pub fn sites(&self) -> usize {
        match self {
            Medium::Polycrystal(p) => p.sites(),
            Medium::TwoComponent(c) => c.chi1.len(),
        }
    }

    /// Row-major `d x d` projection of `phase` at `site`.
    pub fn projector(&self, phase: Phase, site: usize) -> Vec<f64> {
        let d = self.dim();
        let x1: Vec<f64> = match self {
            Medium::Polycrystal(p) => p.x1_at(site).to_vec(),
            Medium::TwoComponent(c) => {
                let v = c.chi1[site] as f64;
                (0..d * d).map(|e| if e / d == e % d { v } else { 0.0 }).collect()
            }
        };
        match phase {
            Phase::One => x1,
            Phase::Two => (0..d * d)
                .map(|e| if e / d == e % d { 1.0 } else { 0.0 } - x1[e])
                .collect(),
        }
    }

    /// Orthonormal basis of the range of the projection at `site`, by
    /// pivoted Gram-Schmidt on its columns.
    pub fn range_basis(&self, phase: Phase, site: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        let p = self.projector(phase, site);
        let mut cols: Vec<Vec<f64>> = (0..d).map(|j| (0..d).map(|i| p[i * d + j]).collect()).collect();
        let mut basis: Vec<Vec<f64>> = Vec::new();
        loop {
            let (best, norm) = cols
                .iter()
                .enumerate()
                .map(|(j, c)| (j, c.iter().map(|v| v * v).sum::<f64>().sqrt()))
                .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if norm < 1e-8 || basis.len() == d {
                break;
            }
            let q: Vec<f64> = cols[best].iter().map(|v| v / norm).collect();
            for c in cols.iter_mut() {
                let dot: f64 = c.iter().zip(&q).map(|(a, b)| a * b).sum();
                for (ci, qi) in c.iter_mut().zip(&q) {
                    *ci -= dot * qi;
                }
            }
            basis.push(q);
        }
        basis
    }

    /// Spatial average of `(X_phase)_jk`.
    pub fn average(&self, phase: Phase, j: usize, k: usize) -> f64 {
        let d = self.dim();
        let n = self.sites();
        (0..n).map(|x| self.projector(phase, x)[j * d + k]).sum::<f64>() / n as f64
    }
}
