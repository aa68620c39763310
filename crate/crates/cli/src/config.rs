//! Run configuration.
//!
//! Precedence, lowest first: built-in defaults, the `--config` JSON file,
//! command-line flags. The resolved configuration is embedded in every output
//! together with its SHA-256.

use polyspec::microgeometry::{realization_seed, AngleDistribution, IndicatorScheme};
use polyspec::{ContrastSet, Error, Result, C64};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MaterialKind {
    Polycrystal,
    TwoComponent,
}

/// Either an explicit list or `count` seeds derived from `base`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    List(Vec<u64>),
    Count { count: u64, base: u64 },
}

impl Seeds {
    pub fn expand(&self) -> Vec<u64> {
        match self {
            Seeds::List(v) => v.clone(),
            Seeds::Count { count, base } => (0..*count).map(|i| realization_seed(*base, i)).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContrastPoint {
    pub sigma1: [f64; 2],
    pub sigma2: [f64; 2],
}

impl ContrastPoint {
    pub fn contrast(&self) -> Result<ContrastSet<f64>> {
        ContrastSet::new(C64::new(self.sigma1[0], self.sigma1[1]), C64::new(self.sigma2[0], self.sigma2[1]))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Relative agreement required between the two routes to a tensor.
    pub route: f64,
    /// Boundary tolerance of region membership, relative to `|sigma1|`.
    pub bounds: f64,
    /// Largest compressed operator size decomposed densely.
    pub dense_cap: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { route: polyspec::effective::ROUTE_TOL, bounds: 1e-9, dense_cap: polyspec::spectral::DENSE_CAP }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub version: u32,
    pub d: usize,
    #[serde(rename = "L")]
    pub side: usize,
    /// Crystallites per side of a polycrystal.
    pub crystallites_per_side: usize,
    pub material_kind: MaterialKind,
    /// Phase-one volume fraction of two-component media.
    pub p: f64,
    pub angle_distribution: AngleDistribution,
    pub indicator_scheme: IndicatorScheme,
    pub seeds: Seeds,
    pub sigma1: [f64; 2],
    pub sigma2: [f64; 2],
    /// Extra contrasts evaluated by `effective` and `sweep`.
    pub contrast_grid: Option<Vec<ContrastPoint>>,
    /// Operator kinds written by `spectrum`; all four of the material by default.
    pub kinds: Option<Vec<String>>,
    /// `[mu0, mu1]` for `bounds`; isotropic values by default.
    pub moments: Option<[f64; 2]>,
    pub output_dir: PathBuf,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: SCHEMA_VERSION,
            d: 2,
            side: 16,
            crystallites_per_side: 4,
            material_kind: MaterialKind::Polycrystal,
            p: 0.5,
            angle_distribution: AngleDistribution::Uniform,
            indicator_scheme: IndicatorScheme::SiteIid,
            seeds: Seeds::Count { count: 1, base: 1 },
            sigma1: [51.074, 45.160],
            sigma2: [3.070, 0.0019],
            contrast_grid: None,
            kinds: None,
            moments: None,
            output_dir: PathBuf::from("polyspec-out"),
            tolerances: Tolerances::default(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.version != SCHEMA_VERSION {
            return bad(format!("unsupported config version {} (expected {SCHEMA_VERSION})", self.version));
        }
        if !(2..=3).contains(&self.d) {
            return bad(format!("d must be 2 or 3, got {}", self.d));
        }
        if self.side < 2 {
            return bad(format!("L must be at least 2, got {}", self.side));
        }
        let needs_blocks = self.material_kind == MaterialKind::Polycrystal;
        if needs_blocks && (self.crystallites_per_side == 0 || self.side % self.crystallites_per_side != 0) {
            return bad(format!("{} crystallites per side do not divide L = {}", self.crystallites_per_side, self.side));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return bad(format!("p must lie in [0, 1], got {}", self.p));
        }
        if self.seeds.expand().is_empty() {
            return bad("no seeds".into());
        }
        if let Some(kinds) = &self.kinds {
            for k in kinds {
                k.parse::<polyspec::spectral::OperatorKind>()?;
            }
        }
        let t = &self.tolerances;
        if !(t.route > 0.0 && t.bounds >= 0.0 && t.dense_cap > 0) {
            return bad("tolerances must be positive".into());
        }
        Ok(())
    }

    pub fn contrast(&self) -> Result<ContrastSet<f64>> {
        ContrastPoint { sigma1: self.sigma1, sigma2: self.sigma2 }.contrast()
    }

    /// The configured contrast followed by the grid, if any.
    pub fn contrasts(&self) -> Vec<ContrastPoint> {
        let mut out = vec![ContrastPoint { sigma1: self.sigma1, sigma2: self.sigma2 }];
        if let Some(grid) = &self.contrast_grid {
            out.extend(grid.iter().copied());
        }
        out
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical_json().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Parses `re,im` or `re`.
pub fn parse_complex(s: &str) -> std::result::Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let num = |p: &str| p.parse::<f64>().map_err(|e| format!("bad number '{p}': {e}"));
    match parts.as_slice() {
        [re] => Ok([num(re)?, 0.0]),
        [re, im] => Ok([num(re)?, num(im)?]),
        _ => Err(format!("expected 're' or 're,im', got '{s}'")),
    }
}
