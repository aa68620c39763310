use crate::config::{MaterialKind, RunConfig};
use polyspec::bounds::{first_order_region, isotropic_first_moment, second_order_region, wiener_interval};
use polyspec::effective::{evaluate_routes, herglotz_scan, m_at_zero, upper_half_plane_grid, w_at_zero};
use polyspec::io::{rows_to_csv, write_atomic, MembershipRow, Microstructure, SweepRow};
use polyspec::microgeometry::{checkerboard_polycrystal, projection_field, two_component_field};
use polyspec::oracle::{effective_from_cell, SigmaField, SolverChoice};
use polyspec::spectral::{
    eigendecompose, measure_relation_residual, measures_from_eigen, spectral_measures, OperatorKind, Representation,
    SobolevOperator, SymmetricOperator,
};
use polyspec::{ContrastSet, EffectiveTensor, Error, Lattice, MeasureSet, Medium, Phase, Result, Route, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use std::path::PathBuf;

pub const THREADS_ENV: &str = "POLYSPEC_THREADS";

struct Ctx<'a> {
    cfg: &'a RunConfig,
    hash: String,
    pool: rayon::ThreadPool,
}

impl<'a> Ctx<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self> {
        cfg.validate()?;
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Ok(v) = std::env::var(THREADS_ENV) {
            let n: usize = v
                .parse()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'")))?;
            builder = builder.num_threads(n);
        }
        let pool = builder.build().map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        Ok(Self { cfg, hash: cfg.hash(), pool })
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.cfg.output_dir.join(rel)
    }

    fn csv_header(&self) -> String {
        format!("# config_hash={} config={}\n", self.hash, self.cfg.canonical_json())
    }

    fn embed(&self, mut v: Value) -> Value {
        if let Value::Object(map) = &mut v {
            map.insert("config_hash".into(), Value::String(self.hash.clone()));
            map.insert("config".into(), serde_json::to_value(self.cfg).expect("config serializes"));
        }
        v
    }

    fn write_json(&self, rel: &str, v: Value) -> Result<PathBuf> {
        let path = self.path(rel);
        let mut text = serde_json::to_string_pretty(&self.embed(v))?;
        text.push('\n');
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }

    fn write_csv(&self, rel: &str, body: &str) -> Result<PathBuf> {
        let path = self.path(rel);
        write_atomic(&path, format!("{}{body}", self.csv_header()).as_bytes())?;
        Ok(path)
    }

    /// Runs `f` for every seed on the worker pool; results in seed-list order.
    fn per_seed<T: Send>(&self, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<(u64, T)>> {
        let seeds = self.cfg.seeds.expand();
        self.pool.install(|| seeds.par_iter().map(|&s| f(s).map(|t| (s, t))).collect())
    }

    fn realization(&self, seed: u64) -> Result<(Lattice, Medium, Microstructure)> {
        let c = self.cfg;
        let lat = Lattice::new(c.d, c.side)?;
        Ok(match c.material_kind {
            MaterialKind::Polycrystal => {
                let of = checkerboard_polycrystal(&lat, c.crystallites_per_side, &c.angle_distribution, seed)?;
                let medium = Medium::Polycrystal(projection_field(&of)?);
                (lat, medium, Microstructure::Polycrystal(of))
            }
            MaterialKind::TwoComponent => {
                let f = two_component_field(&lat, c.p, seed, c.indicator_scheme)?;
                (lat, Medium::TwoComponent(f.clone()), Microstructure::TwoComponent(f))
            }
        })
    }

    fn crystallites(&self) -> usize {
        match self.cfg.material_kind {
            MaterialKind::Polycrystal => self.cfg.crystallites_per_side,
            MaterialKind::TwoComponent => 0,
        }
    }

    fn checked_tensor(&self, ms: &MeasureSet<f64>, cs: &ContrastSet<f64>, seed: u64) -> Result<EffectiveTensor<f64>> {
        let et = evaluate_routes(ms, cs)?;
        let (gs, gr) = et.route_discrepancy();
        let tol = self.cfg.tolerances.route;
        if !(gs <= tol && gr <= tol) {
            return Err(Error::Consistency(format!(
                "seed {seed}: routes disagree (sigma* {gs:.3e}, rho* {gr:.3e}, tolerance {tol:e})"
            )));
        }
        Ok(et)
    }

    fn sweep_rows(&self, seed: u64, cs: &ContrastSet<f64>, et: &EffectiveTensor<f64>) -> Vec<SweepRow> {
        let d = self.cfg.d;
        let mut rows = vec![];
        for j in 0..d {
            for k in 0..d {
                let e = j * d + k;
                for (route, sigma, rho) in
                    [("mu_eta", et.sigma_mu[e], et.rho_eta[e]), ("alpha_kappa", et.sigma_alpha[e], et.rho_kappa[e])]
                {
                    rows.push(SweepRow {
                        seed,
                        d,
                        side: self.cfg.side,
                        crystallites: self.crystallites(),
                        re_sigma1: cs.sigma1.re,
                        im_sigma1: cs.sigma1.im,
                        re_sigma2: cs.sigma2.re,
                        im_sigma2: cs.sigma2.im,
                        j,
                        k,
                        route: route.into(),
                        re_sigma_star: sigma.re,
                        im_sigma_star: sigma.im,
                        re_rho_star: rho.re,
                        im_rho_star: rho.im,
                    });
                }
            }
        }
        rows
    }
}

fn default_kinds(medium: &Medium) -> Vec<OperatorKind> {
    Route::ALL
        .iter()
        .map(|r| {
            let (phase, projection) = r.phase_and_projection();
            OperatorKind::for_medium(medium, phase, projection)
        })
        .collect()
}

pub fn generate(cfg: &RunConfig) -> Result<()> {
    let ctx = Ctx::new(cfg)?;
    let written = ctx.per_seed(|seed| {
        let (_, _, micro) = ctx.realization(seed)?;
        let text = micro.to_text()?;
        let (head, body) = text.split_once('\n').expect("header line");
        let head = serde_json::to_string(&ctx.embed(serde_json::from_str(head)?))?;
        let path = ctx.path(&format!("microstructure/seed-{seed}.txt"));
        write_atomic(&path, format!("{head}\n{body}").as_bytes())?;
        Ok(path)
    })?;
    for (_, p) in written {
        println!("{}", p.display());
    }
    Ok(())
}

pub fn spectrum(cfg: &RunConfig) -> Result<()> {
    let ctx = Ctx::new(cfg)?;
    let d = cfg.d;
    let results = ctx.per_seed(|seed| {
        let (lat, medium, _) = ctx.realization(seed)?;
        let kinds = match &cfg.kinds {
            Some(list) => list.iter().map(|k| k.parse()).collect::<Result<Vec<OperatorKind>>>()?,
            None => default_kinds(&medium),
        };
        let mut masses = vec![];
        for kind in kinds {
            let measures: Vec<(usize, usize, polyspec::Measure64)> = if kind == OperatorKind::SobolevM {
                let sob = SobolevOperator::new(&medium, &lat)?;
                (0..d).map(|j| sob.nu_measure(j).map(|m| (j, j, m))).collect::<Result<_>>()?
            } else {
                let op = SymmetricOperator::assemble(kind, &medium, &lat, cfg.tolerances.dense_cap)?;
                let all = spectral_measures(&op)?;
                all.into_iter()
                    .enumerate()
                    .flat_map(|(j, row)| row.into_iter().enumerate().map(move |(k, m)| (j, k, m)))
                    .collect()
            };
            for (j, k, m) in measures {
                let v: Value = serde_json::from_str(&m.to_json()?)?;
                ctx.write_json(&format!("spectrum/seed-{seed}/{}_{j}{k}.json", kind.label()), v)?;
                if j == k {
                    masses.push((kind.label(), j, m.mass()));
                }
            }
        }
        Ok(masses)
    })?;
    let n = results.len() as f64;
    let mut summary: Vec<(&str, usize, f64)> = vec![];
    for (_, masses) in &results {
        for &(label, j, m) in masses {
            match summary.iter_mut().find(|(l, jj, _)| *l == label && *jj == j) {
                Some(entry) => entry.2 += m / n,
                None => summary.push((label, j, m / n)),
            }
        }
    }
    println!("mean diagonal masses over {} realization(s):", results.len());
    for (label, j, m) in summary {
        println!("  {label} ({j},{j}): {m:.6}");
    }
    println!("wrote {}", ctx.path("spectrum").display());
    Ok(())
}

pub fn effective(cfg: &RunConfig) -> Result<()> {
    let ctx = Ctx::new(cfg)?;
    let cs = cfg.contrast()?;
    let rows = ctx.per_seed(|seed| {
        let (lat, medium, _) = ctx.realization(seed)?;
        let ms = MeasureSet::compute(&medium, &lat, cfg.tolerances.dense_cap)?;
        let et = ctx.checked_tensor(&ms, &cs, seed)?;
        Ok(ctx.sweep_rows(seed, &cs, &et))
    })?;
    let rows: Vec<SweepRow> = rows.into_iter().flat_map(|(_, r)| r).collect();
    let path = ctx.write_csv("effective.csv", &rows_to_csv(&rows, |r| r.seed)?)?;
    println!("{}", path.display());
    Ok(())
}

pub fn sweep(cfg: &RunConfig) -> Result<()> {
    let ctx = Ctx::new(cfg)?;
    let contrasts = cfg.contrasts().iter().map(|p| p.contrast()).collect::<Result<Vec<_>>>()?;
    let per_seed = ctx.per_seed(|seed| {
        let (lat, medium, _) = ctx.realization(seed)?;
        let ms = MeasureSet::compute(&medium, &lat, cfg.tolerances.dense_cap)?;
        let mut rows = vec![];
        for cs in &contrasts {
            let et = ctx.checked_tensor(&ms, cs, seed)?;
            rows.extend(ctx.sweep_rows(seed, cs, &et));
        }
        ctx.write_csv(&format!("sweep/seed-{seed}.csv"), &rows_to_csv(&rows, |_| 0)?)?;
        Ok(rows)
    })?;
    let rows: Vec<SweepRow> = per_seed.into_iter().flat_map(|(_, r)| r).collect();
    let path = ctx.write_csv("sweep.csv", &rows_to_csv(&rows, |r| r.seed)?)?;
    println!("{}", path.display());
    Ok(())
}

/// Isotropic mass and first moment of `mu_kk`.
fn default_moments(cfg: &RunConfig) -> [f64; 2] {
    let d = cfg.d as f64;
    match cfg.material_kind {
        MaterialKind::Polycrystal => [1.0 / d, isotropic_first_moment(cfg.d)],
        MaterialKind::TwoComponent => [cfg.p, cfg.p * (1.0 - cfg.p) / d],
    }
}

pub fn bounds(cfg: &RunConfig) -> Result<()> {
    let ctx = Ctx::new(cfg)?;
    let cs = cfg.contrast()?;
    let [mu0, mu1] = cfg.moments.unwrap_or_else(|| default_moments(cfg));
    let first = first_order_region(mu0, &cs)?;
    let second = second_order_region(mu0, mu1, &cs)?;
    ctx.write_json("bounds/first_order.json", serde_json::to_value(first.export())?)?;
    ctx.write_json("bounds/second_order.json", serde_json::to_value(second.export())?)?;
    let tol = cfg.tolerances.bounds * cs.sigma1.norm().max(cs.sigma2.norm());
    let d = cfg.d;
    let rows = ctx.per_seed(|seed| {
        let (lat, medium, _) = ctx.realization(seed)?;
        let ms = MeasureSet::compute_routes(&medium, &lat, cfg.tolerances.dense_cap, &[Route::Mu])?;
        let et = evaluate_routes(&ms, &cs)?;
        let mut rows = vec![];
        for k in 0..d {
            let value = et.sigma_mu[k * d + k];
            for region in [&first, &second] {
                let (inside, margin) = region.contains(value, tol);
                rows.push(MembershipRow {
                    seed,
                    j: k,
                    k,
                    order: region.order,
                    re_value: value.re,
                    im_value: value.im,
                    inside,
                    margin,
                });
            }
        }
        Ok(rows)
    })?;
    let rows: Vec<MembershipRow> = rows.into_iter().flat_map(|(_, r)| r).collect();
    let inside = rows.iter().filter(|r| r.inside).count();
    ctx.write_csv("bounds/membership.csv", &rows_to_csv(&rows, |r| r.seed)?)?;
    println!("regions for mu0 = {mu0}, mu1 = {mu1}; {inside}/{} memberships inside", rows.len());
    println!("wrote {}", ctx.path("bounds").display());
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Serialize)]
struct Check {
    group: &'static str,
    status: Status,
    detail: String,
}

fn check(group: &'static str, pass: bool, detail: String) -> Check {
    Check { group, status: if pass { Status::Pass } else { Status::Fail }, detail }
}

fn failed(group: &'static str, e: Error) -> Check {
    Check { group, status: Status::Fail, detail: e.to_string() }
}

fn projection_checks(lat: &Lattice, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (d, n) = (lat.dim(), lat.sites());
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let mut field = || {
            let values = (0..d * n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            polyspec::VectorField { dim: d, values }.centered()
        };
        let (u, v) = (field(), field());
        let (gu, yu) = (lat.gamma_apply(&u)?, lat.upsilon_apply(&u)?);
        let gv = lat.gamma_apply(&v)?;
        let scale = u.norm() * v.norm();
        worst = worst
            .max(gu.add(&yu).sub(&u).norm() / u.norm())
            .max(lat.gamma_apply(&gu)?.sub(&gu).norm() / u.norm())
            .max(lat.upsilon_apply(&yu)?.sub(&yu).norm() / u.norm())
            .max((gu.inner(&v) - u.inner(&gv)).norm() / scale)
            .max(yu.inner(&gv).norm() / scale)
            .max(lat.upsilon_via_curl(&u)?.sub(&yu).norm() / u.norm());
    }
    Ok(check("projections", worst < 1e-12, format!("worst residual {worst:.2e} on 10 random fields")))
}

/// Measures of all four families, with the dense spectra certified.
fn certified_measures(lat: &Lattice, medium: &Medium, cap: usize) -> Result<(MeasureSet<f64>, String)> {
    let mut ms = MeasureSet { d: lat.dim(), mu: vec![], alpha: vec![], eta: vec![], kappa: vec![] };
    let mut notes = vec![];
    for route in Route::ALL {
        let (phase, projection) = route.phase_and_projection();
        let op = SymmetricOperator::assemble(OperatorKind::for_medium(medium, phase, projection), medium, lat, cap)?;
        let family = match op.repr {
            Representation::MatrixFree { .. } => {
                notes.push(format!("{}: Lanczos", op.kind.label()));
                spectral_measures(&op)?
            }
            _ => {
                let eig = eigendecompose(&op)?;
                notes.push(format!("{}: n={} clamped={}", op.kind.label(), op.size(), eig.clamped));
                measures_from_eigen(&op, &eig)?
            }
        };
        match route {
            Route::Mu => ms.mu = family,
            Route::Alpha => ms.alpha = family,
            Route::Eta => ms.eta = family,
            Route::Kappa => ms.kappa = family,
        }
    }
    Ok((ms, notes.join(", ")))
}

pub fn verify(cfg: &RunConfig) -> Result<()> {
    let ctx = Ctx::new(cfg)?;
    let cs = cfg.contrast()?;
    let seed = cfg.seeds.expand()[0];
    let (lat, medium, _) = ctx.realization(seed)?;
    let (d, n) = (lat.dim(), lat.sites());
    let mut checks = vec![projection_checks(&lat, seed).unwrap_or_else(|e| failed("projections", e))];

    let (ms, notes) = match certified_measures(&lat, &medium, cfg.tolerances.dense_cap) {
        Ok(v) => v,
        Err(e) => {
            checks.push(failed("spectrum", e));
            return finish_verify(&ctx, checks);
        }
    };
    checks.push(check("spectrum", true, format!("spectra within [0,1]: {notes}")));

    let mut mass_gap: f64 = 0.0;
    for j in 0..d {
        for k in 0..d {
            mass_gap = mass_gap
                .max((ms.mu[j][k].mass() - medium.average(Phase::One, j, k)).abs())
                .max((ms.alpha[j][k].mass() - medium.average(Phase::Two, j, k)).abs());
        }
    }
    checks.push(check("masses", mass_gap < 1e-10, format!("max |mass - phase average| {mass_gap:.2e}")));

    match evaluate_routes(&ms, &cs) {
        Ok(et) => {
            let (gs, gr) = et.route_discrepancy();
            let tol = cfg.tolerances.route;
            checks.push(check("routes", gs <= tol && gr <= tol, format!("sigma* {gs:.2e}, rho* {gr:.2e}")));
            let rec = et.reciprocity_residual();
            checks.push(check("reciprocity", rec <= 1e-8, format!("max |rho* sigma* - I| {rec:.2e}")));
            if n <= 4096 {
                let sigma = SigmaField::from_medium(&medium, &cs);
                checks.push(match effective_from_cell(&lat, &sigma, SolverChoice::Auto) {
                    Ok(o) => {
                        let scale = et.sigma_mu.iter().fold(0.0f64, |m, z| m.max(z.norm()));
                        let gap = et.sigma_mu.iter().zip(&o.sigma_star).fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
                        let rel = gap / scale;
                        check("oracle", rel <= 1e-8, format!("relative gap to cell problem {rel:.2e}"))
                    }
                    Err(e) => failed("oracle", e),
                });
            } else {
                checks.push(Check { group: "oracle", status: Status::Skip, detail: format!("N = {n} > 4096") });
            }
        }
        Err(e) => checks.push(failed("routes", e)),
    }

    if n <= 1024 {
        let sob = SobolevOperator::new(&medium, &lat);
        let mut gap: f64 = 0.0;
        let mut err = None;
        if let Ok(sob) = &sob {
            for j in 0..d {
                match sob.nu_measure(j) {
                    Ok(nu) => {
                        for p in 0..=10 {
                            gap = gap.max((nu.moment(p) - ms.mu[j][j].moment(p)).abs());
                        }
                    }
                    Err(Error::Degenerate(_)) => {}
                    Err(e) => err = Some(e),
                }
            }
        }
        checks.push(match (sob, err) {
            (Err(e), _) | (_, Some(e)) => failed("sobolev", e),
            _ => check("sobolev", gap <= 1e-8, format!("max moment gap n = 0..10: {gap:.2e}")),
        });
    } else {
        checks.push(Check { group: "sobolev", status: Status::Skip, detail: format!("N = {n} > 1024") });
    }

    let mut rel: f64 = 0.0;
    let mut rel_err = None;
    for (a, b) in [(&ms.mu, &ms.alpha), (&ms.kappa, &ms.eta)] {
        for j in 0..d {
            for k in 0..d {
                match measure_relation_residual(&a[j][k], &b[j][k], m_at_zero(&a[j][k]), w_at_zero(&b[j][k])) {
                    Ok(r) => rel = rel.max(r),
                    Err(e) => rel_err = Some(e),
                }
            }
        }
    }
    checks.push(match rel_err {
        Some(e) => failed("relation", e),
        None => check("relation", rel < 1e-7, format!("max residual {rel:.2e}")),
    });

    let grid = upper_half_plane_grid(20, 50.0, 1e-3, 50.0);
    checks.push(match herglotz_scan(&ms.mu, &grid) {
        Ok(r) => check(
            "herglotz",
            r.violations.is_empty(),
            format!("{} samples, {} violations, min Im m {:.2e}", r.samples, r.violations.len(), r.min_im),
        ),
        Err(e) => failed("herglotz", e),
    });

    checks.push(bounds_check(cfg, &cs).unwrap_or_else(|e| failed("bounds", e)));
    finish_verify(&ctx, checks)
}

fn bounds_check(cfg: &RunConfig, cs: &ContrastSet<f64>) -> Result<Check> {
    let [mu0, mu1] = cfg.moments.unwrap_or_else(|| default_moments(cfg));
    let first = first_order_region(mu0, cs)?;
    let second = second_order_region(mu0, mu1, cs)?;
    let tol = 1e-9 * cs.sigma1.norm().max(cs.sigma2.norm());
    let boundary = second.boundary_points(1000, tol);
    let nested = boundary.iter().all(|p| first.contains(*p, tol).0);
    let real = first_order_region(mu0, &ContrastSet::real(10.0, 1.0)?)?;
    let (lo, hi) = real.interval().expect("real contrast gives an interval");
    let (wlo, whi) = wiener_interval(mu0, 10.0, 1.0);
    let collapse = (lo - wlo).abs().max((hi - whi).abs());
    Ok(check(
        "bounds",
        nested && collapse <= 1e-10,
        format!("{} boundary points nested: {nested}; Wiener collapse error {collapse:.1e}", boundary.len()),
    ))
}

fn finish_verify(ctx: &Ctx, checks: Vec<Check>) -> Result<()> {
    for c in &checks {
        let tag = match c.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        };
        println!("{tag} {}: {}", c.group, c.detail);
    }
    ctx.write_json("verify.json", serde_json::json!({ "checks": checks }))?;
    let failures: Vec<&str> = checks.iter().filter(|c| c.status == Status::Fail).map(|c| c.group).collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Error::Consistency(format!("invariant groups failed: {}", failures.join(", "))))
    }
}
