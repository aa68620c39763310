//! Finite atomic measures on `[0, 1]` and their Stieltjes transforms.

use crate::error::{Error, Result};
use crate::scalar::{Complex, Real};
use serde::{Deserialize, Serialize};

/// Evaluation points closer than this to `[0, 1]` are rejected.
pub const POLE_GUARD: f64 = 1e-9;

/// Atoms closer than this are merged by [`SpectralMeasure::clustered`].
pub const CLUSTER_TOL: f64 = 1e-10;

/// Where a measure came from.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasureInfo {
    /// Operator kind label, e.g. `x1_gamma_x1`.
    pub kind: String,
    /// Zero-based component pair.
    pub j: usize,
    pub k: usize,
    pub d: usize,
    #[serde(rename = "L")]
    pub side: usize,
    pub seed: Option<u64>,
}

/// `sum_i w_i delta(lambda - lambda_i)`. Diagonal measures are positive;
/// off-diagonal ones may carry signed weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct SpectralMeasure<T> {
    #[serde(flatten)]
    pub info: MeasureInfo,
    /// `(lambda_i, w_i)`, sorted by location.
    pub atoms: Vec<(T, T)>,
}

/// Distance from `s` to the segment `[0, 1]` of the real axis.
pub fn distance_to_unit_interval<T: Real>(s: Complex<T>) -> T {
    if s.re < T::zero() {
        s.norm()
    } else if s.re > T::one() {
        (s - T::one()).norm()
    } else {
        s.im.abs()
    }
}

impl<T: Real> SpectralMeasure<T> {
    pub fn new(info: MeasureInfo, mut atoms: Vec<(T, T)>) -> Self {
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        Self { info, atoms }
    }

    /// A single atom of weight `w` at `lambda`.
    pub fn point(lambda: T, w: T) -> Self {
        Self::new(MeasureInfo::default(), vec![(lambda, w)])
    }

    pub fn mass(&self) -> T {
        self.moment(0)
    }

    /// `sum_i w_i lambda_i^n`.
    pub fn moment(&self, n: u32) -> T {
        self.atoms.iter().fold(T::zero(), |acc, &(l, w)| acc + w * l.powi(n as i32))
    }

    /// `sum_i w_i / (s - lambda_i)`, rejecting points within
    /// [`POLE_GUARD`] of the spectral interval.
    pub fn stieltjes(&self, s: Complex<T>) -> Result<Complex<T>> {
        let dist = distance_to_unit_interval(s);
        if !(dist >= T::lit(POLE_GUARD)) {
            return Err(Error::PoleProximity {
                point: format!("{s}"),
                distance: dist.to_f64_lossy(),
            });
        }
        Ok(self.stieltjes_unchecked(s))
    }

    /// The same sum without the proximity guard. Used at the interval
    /// endpoints, where the transform is finite whenever no atom sits there.
    pub fn stieltjes_unchecked(&self, s: Complex<T>) -> Complex<T> {
        self.atoms
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |acc, &(l, w)| {
                acc + Complex::new(w, T::zero()) / (s - l)
            })
    }

    /// Total weight of atoms within `tol` of `lambda`.
    pub fn weight_near(&self, lambda: T, tol: T) -> T {
        self.atoms
            .iter()
            .filter(|(l, _)| (*l - lambda).abs() <= tol)
            .fold(T::zero(), |acc, &(_, w)| acc + w)
    }

    /// Merges atoms whose locations differ by at most `tol` (chained), keeping
    /// the location of the heaviest atom of each cluster. Zero-weight
    /// clusters are dropped.
    pub fn clustered(&self, tol: T) -> Self {
        let mut out: Vec<(T, T)> = Vec::new();
        let mut i = 0;
        while i < self.atoms.len() {
            let (mut loc, mut heaviest) = self.atoms[i];
            let mut total = heaviest;
            let mut last = loc;
            let mut j = i + 1;
            while j < self.atoms.len() && self.atoms[j].0 - last <= tol {
                let (l, w) = self.atoms[j];
                total = total + w;
                if w.abs() > heaviest.abs() {
                    heaviest = w;
                    loc = l;
                }
                last = l;
                j += 1;
            }
            if total != T::zero() {
                out.push((loc, total));
            }
            i = j;
        }
        Self { info: self.info.clone(), atoms: out }
    }

    /// Drops atoms with `|w| <= tol`.
    pub fn pruned(&self, tol: T) -> Self {
        Self {
            info: self.info.clone(),
            atoms: self.atoms.iter().copied().filter(|(_, w)| w.abs() > tol).collect(),
        }
    }

    /// Most negative weight, or zero.
    pub fn min_weight(&self) -> T {
        self.atoms.iter().fold(T::zero(), |acc, &(_, w)| acc.min(w))
    }

    /// Smoothed density `-Im F(x + i eps) / pi`.
    pub fn perron_density(&self, x: T, eps: T) -> T {
        -self.stieltjes_unchecked(Complex::new(x, eps)).im / T::PI()
    }

    /// Largest per-bin gap between the atom histogram and the smoothed
    /// density integrated over `bins` equal bins of `[0, 1]`.
    ///
    /// The integral of the Lorentzian over a bin is taken in closed form, so
    /// the gap shrinks with `eps` apart from atoms sitting on bin edges.
    pub fn perron_bin_discrepancy(&self, eps: T, bins: usize) -> T {
        let width = T::one() / T::from_usize(bins).expect("bin count");
        let mut worst = T::zero();
        for b in 0..bins {
            let lo = width * T::from_usize(b).expect("bin index");
            let hi = lo + width;
            let mut smooth = T::zero();
            let mut hist = T::zero();
            for &(l, w) in &self.atoms {
                smooth = smooth + w * (((hi - l) / eps).atan() - ((lo - l) / eps).atan()) / T::PI();
                let last = b + 1 == bins;
                if l >= lo && (l < hi || (last && l <= hi)) {
                    hist = hist + w;
                }
            }
            worst = worst.max((smooth - hist).abs());
        }
        worst
    }

    /// Image under `lambda -> 1 - lambda` with weights `lambda_i w_i`.
    pub fn reflected_first_moment(&self) -> Self {
        Self::new(
            self.info.clone(),
            self.atoms.iter().map(|&(l, w)| (T::one() - l, l * w)).collect(),
        )
    }

    /// Same locations, weights `lambda_i w_i`.
    pub fn first_moment_measure(&self) -> Self {
        Self::new(self.info.clone(), self.atoms.iter().map(|&(l, w)| (l, l * w)).collect())
    }

    pub fn to_json(&self) -> Result<String>
    where
        T: Serialize,
    {
        Ok(serde_json::to_string_pretty(&MeasureFile::from_measure(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        let file: MeasureFile<T> = serde_json::from_str(text)?;
        Ok(file.measure)
    }
}

/// On-disk layout: the measure plus its mass and first moments, which are
/// informational and ignored on read.
#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
struct MeasureFile<T> {
    #[serde(flatten)]
    measure: SpectralMeasure<T>,
    #[serde(default)]
    mass: Option<T>,
    #[serde(default)]
    moments: Vec<T>,
}

impl<T: Real> MeasureFile<T> {
    fn from_measure(m: &SpectralMeasure<T>) -> Self {
        Self {
            measure: m.clone(),
            mass: Some(m.mass()),
            moments: (0..=4).map(|n| m.moment(n)).collect(),
        }
    }
}
