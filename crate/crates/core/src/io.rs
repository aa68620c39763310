//! File formats.
//!
//! Microstructure files are one JSON header line followed by a CSV payload.
//! Polycrystals store `site,theta1[,theta2,theta3]`; two-component media store
//! `site,chi1`. Floats are written in shortest round-trip decimal form.

use crate::error::{Error, Result};
use crate::microgeometry::{AngleDistribution, IndicatorField, IndicatorScheme, OrientationField};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

pub const MICROSTRUCTURE_FORMAT: &str = "polyspec-microstructure";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MicrostructureHeader {
    Polycrystal {
        format: String,
        version: u32,
        d: usize,
        #[serde(rename = "L")]
        side: usize,
        crystallites: usize,
        seed: u64,
        scheme: AngleDistribution,
    },
    TwoComponent {
        format: String,
        version: u32,
        d: usize,
        #[serde(rename = "L")]
        side: usize,
        p: f64,
        seed: u64,
        scheme: IndicatorScheme,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Microstructure {
    Polycrystal(OrientationField),
    TwoComponent(IndicatorField),
}

impl Microstructure {
    pub fn header(&self) -> MicrostructureHeader {
        match self {
            Microstructure::Polycrystal(of) => MicrostructureHeader::Polycrystal {
                format: MICROSTRUCTURE_FORMAT.into(),
                version: FORMAT_VERSION,
                d: of.dim,
                side: of.side,
                crystallites: of.crystallites_per_side,
                seed: of.seed,
                scheme: of.distribution.clone(),
            },
            Microstructure::TwoComponent(f) => MicrostructureHeader::TwoComponent {
                format: MICROSTRUCTURE_FORMAT.into(),
                version: FORMAT_VERSION,
                d: f.dim,
                side: f.side,
                p: f.p,
                seed: f.seed,
                scheme: f.scheme,
            },
        }
    }

    pub fn to_text(&self) -> Result<String> {
        let mut out = serde_json::to_string(&self.header())?;
        out.push('\n');
        let mut w = csv::Writer::from_writer(Vec::new());
        match self {
            Microstructure::Polycrystal(of) => {
                let arity = of.arity();
                let mut head = vec!["site".to_string()];
                head.extend((1..=arity).map(|a| format!("theta{a}")));
                w.write_record(&head).map_err(csv_err)?;
                for site in 0..of.angles.len() / arity {
                    let mut rec = vec![site.to_string()];
                    rec.extend(of.at(site).iter().map(|v| v.to_string()));
                    w.write_record(&rec).map_err(csv_err)?;
                }
            }
            Microstructure::TwoComponent(f) => {
                w.write_record(["site", "chi1"]).map_err(csv_err)?;
                for (site, c) in f.chi1.iter().enumerate() {
                    w.write_record([site.to_string(), c.to_string()]).map_err(csv_err)?;
                }
            }
        }
        let payload = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        out.push_str(&String::from_utf8(payload).map_err(|e| Error::Format(e.to_string()))?);
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (head, body) = text.split_once('\n').ok_or_else(|| Error::Format("missing header line".into()))?;
        let header: MicrostructureHeader = serde_json::from_str(head)?;
        let mut rdr = csv::Reader::from_reader(body.as_bytes());
        let rows: Vec<csv::StringRecord> = rdr.records().collect::<std::result::Result<_, _>>().map_err(csv_err)?;
        let parse_f = |s: &str| s.parse::<f64>().map_err(|e| Error::Format(format!("bad number {s:?}: {e}")));
        match header {
            MicrostructureHeader::Polycrystal { format, version, d, side, crystallites, seed, scheme } => {
                check_format(&format, version)?;
                let sites = side.pow(d as u32);
                check_rows(rows.len(), sites)?;
                let mut angles = Vec::with_capacity(sites * crate::microgeometry::angle_arity(d));
                for (i, r) in rows.iter().enumerate() {
                    check_site(r, i)?;
                    for v in r.iter().skip(1) {
                        angles.push(parse_f(v)?);
                    }
                }
                Ok(Microstructure::Polycrystal(OrientationField {
                    dim: d,
                    side,
                    crystallites_per_side: crystallites,
                    seed,
                    distribution: scheme,
                    angles,
                }))
            }
            MicrostructureHeader::TwoComponent { format, version, d, side, p, seed, scheme } => {
                check_format(&format, version)?;
                let sites = side.pow(d as u32);
                check_rows(rows.len(), sites)?;
                let mut chi1 = Vec::with_capacity(sites);
                for (i, r) in rows.iter().enumerate() {
                    check_site(r, i)?;
                    let c: u8 = r.get(1).unwrap_or("").parse().map_err(|e| Error::Format(format!("bad indicator: {e}")))?;
                    if c > 1 {
                        return Err(Error::Format(format!("indicator must be 0 or 1, got {c}")));
                    }
                    chi1.push(c);
                }
                Ok(Microstructure::TwoComponent(IndicatorField { dim: d, side, p, seed, scheme, chi1 }))
            }
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

fn check_format(format: &str, version: u32) -> Result<()> {
    if format != MICROSTRUCTURE_FORMAT || version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported microstructure format {format} v{version}")));
    }
    Ok(())
}

fn check_rows(rows: usize, sites: usize) -> Result<()> {
    if rows != sites {
        return Err(Error::SizeMismatch { expected: sites, actual: rows });
    }
    Ok(())
}

fn check_site(r: &csv::StringRecord, i: usize) -> Result<()> {
    if r.get(0) != Some(i.to_string().as_str()) {
        return Err(Error::Format(format!("row {i} has site {:?}", r.get(0))));
    }
    Ok(())
}

/// One line of an effective-parameter sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub seed: u64,
    pub d: usize,
    #[serde(rename = "L")]
    pub side: usize,
    pub crystallites: usize,
    pub re_sigma1: f64,
    pub im_sigma1: f64,
    pub re_sigma2: f64,
    pub im_sigma2: f64,
    pub j: usize,
    pub k: usize,
    pub route: String,
    pub re_sigma_star: f64,
    pub im_sigma_star: f64,
    pub re_rho_star: f64,
    pub im_rho_star: f64,
}

/// Membership verdict of one realization's effective value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembershipRow {
    pub seed: u64,
    pub j: usize,
    pub k: usize,
    pub order: u8,
    pub re_value: f64,
    pub im_value: f64,
    pub inside: bool,
    pub margin: f64,
}

/// Serialize rows to CSV after a stable sort by `key`.
pub fn rows_to_csv<R: Serialize + Clone, K: Ord>(rows: &[R], key: impl Fn(&R) -> K) -> Result<String> {
    let mut sorted = rows.to_vec();
    sorted.sort_by_key(|r| key(r));
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &sorted {
        w.serialize(r).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

pub fn rows_from_csv<R: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<R>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(csv_err)
}

/// Write through a sibling temporary file and rename into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Lattice;
    use crate::microgeometry::{checkerboard_polycrystal, two_component_field};

    #[test]
    fn polycrystal_round_trip() {
        let lat = Lattice::new(3, 4).unwrap();
        let of = checkerboard_polycrystal(&lat, 2, &AngleDistribution::Haar, 17).unwrap();
        let m = Microstructure::Polycrystal(of);
        let text = m.to_text().unwrap();
        assert!(text.starts_with("{\"kind\":\"polycrystal\""));
        assert_eq!(Microstructure::from_text(&text).unwrap(), m);
    }

    #[test]
    fn indicator_round_trip() {
        let lat = Lattice::new(2, 6).unwrap();
        let f = two_component_field(&lat, 0.4, 3, IndicatorScheme::Block { blocks_per_side: 3 }).unwrap();
        let m = Microstructure::TwoComponent(f);
        let text = m.to_text().unwrap();
        assert_eq!(Microstructure::from_text(&text).unwrap(), m);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let lat = Lattice::new(2, 4).unwrap();
        let m = Microstructure::TwoComponent(two_component_field(&lat, 0.5, 1, IndicatorScheme::SiteIid).unwrap());
        let text = m.to_text().unwrap();
        let cut: String = text.lines().take(5).collect::<Vec<_>>().join("\n");
        assert!(matches!(Microstructure::from_text(&cut), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn sweep_rows_sorted_and_round_trip() {
        let row = |seed, j| SweepRow {
            seed,
            d: 2,
            side: 8,
            crystallites: 4,
            re_sigma1: 0.1 + 0.2,
            im_sigma1: 1.0 / 3.0,
            re_sigma2: 1.0,
            im_sigma2: 0.0,
            j,
            k: 0,
            route: "mu".into(),
            re_sigma_star: std::f64::consts::PI,
            im_sigma_star: -1e-300,
            re_rho_star: 2.0,
            im_rho_star: 0.0,
        };
        let rows = vec![row(2, 0), row(1, 1), row(1, 0)];
        let text = rows_to_csv(&rows, |r| (r.seed, r.j, r.k, r.route.clone())).unwrap();
        assert!(text.starts_with("seed,d,L,crystallites,re_sigma1"));
        let back: Vec<SweepRow> = rows_from_csv(&text).unwrap();
        assert_eq!(back, vec![row(1, 0), row(1, 1), row(2, 0)]);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = std::env::temp_dir().join(format!("polyspec-io-{}", std::process::id()));
        let path = dir.join("out.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
