use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::selfcheck;
use super::{AbelianCommand, Command, Region, RunConfig, EXIT_FAILURE, EXIT_OK};
use crate::abelian::{
    continue_point, hecke_eigenvalue_f, integer_harmonic_class, oper_eigenvalues_ab, period_matrix,
    verify_df, verify_hecke_relation, CurvePoint, HarmonicClass, HyperellipticCurve, OperEigenvalues, PeriodData,
};
use crate::error::{Error, Result};
use crate::finder::{enumerate_real_opers, FinderOptions, Rect};
use crate::io::{c64_pair, mat2_entries, parse_json, read_text, write_csv, write_json};
use crate::monodromy::{
    default_words, irreducibility_margin, monodromy, reality_residual, trace_coordinates, LoopBasis, MonodromyRep,
};
use crate::numeric::C64;
use crate::oper::{OperConfig, OperFamily};
use crate::oracle::oracle_tau;
use crate::section::{
    check_single_valued, eigenvalue_section, invariant_hermitian_form, scalar_alignment, section_with_pairing,
    sym_power_invariant_form, Continuation, HermitianForm, SectionOptions,
};
use crate::transport::{detour_line, PathSpec};

/// Default transport tolerance.
pub const DEFAULT_TOL: f64 = 1e-12;
const DEFAULT_GRID: usize = 32;
const PROBE_POINTS: usize = 10;

pub(super) enum Prepared {
    Oper(OperConfig),
    Curve(CurveFile),
    Selfcheck,
}

pub(super) struct Outcome {
    pub status: i32,
    pub files: Vec<String>,
}

impl Outcome {
    fn ok(files: &[&str]) -> Self {
        Outcome { status: EXIT_OK, files: files.iter().map(|s| s.to_string()).collect() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Real(f64),
    Complex([f64; 2]),
}

/// Contents of a curve file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveFile {
    /// Coefficients of `f`, constant term first.
    pub coefficients: Vec<Coefficient>,
    #[serde(default)]
    pub classes: Vec<Vec<i64>>,
    #[serde(default)]
    pub p0: Option<CurvePoint>,
    /// Waypoints of a polyline starting at `p0`.
    #[serde(default)]
    pub path: Vec<C64>,
    #[serde(default)]
    pub samples: Option<usize>,
}

impl CurveFile {
    pub fn curve(&self) -> Result<HyperellipticCurve> {
        HyperellipticCurve::new(
            self.coefficients
                .iter()
                .map(|c| match *c {
                    Coefficient::Real(x) => C64::new(x, 0.0),
                    Coefficient::Complex([re, im]) => C64::new(re, im),
                })
                .collect(),
        )
    }

    /// Structural checks that need no root finding.
    fn check(&self) -> std::result::Result<(), String> {
        let n = self.coefficients.len();
        if !(4..=7).contains(&n) {
            return Err(format!("need 4 to 7 coefficients (degree 3 to 6), got {n}"));
        }
        let genus = (n - 2) / 2;
        if let Some(m) = self.classes.iter().find(|m| m.len() != 2 * genus) {
            return Err(format!("class {m:?} needs {} entries for genus {genus}", 2 * genus));
        }
        if let Some(p) = &self.p0 {
            if p.sheet.abs() != 1 || !(p.x.re.is_finite() && p.x.im.is_finite()) {
                return Err(format!("p0 needs a finite x and sheet +1 or -1, got {p:?}"));
            }
        }
        if self.path.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err("path has a non-finite waypoint".into());
        }
        if self.samples == Some(0) {
            return Err("samples must be positive".into());
        }
        Ok(())
    }

    fn start(&self) -> Result<CurvePoint> {
        self.p0.ok_or_else(|| Error::InvalidConfig("curve file has no p0".into()))
    }

    fn polyline(&self) -> Result<PathSpec> {
        let p0 = self.start()?;
        if self.path.len() < 2 || self.path[0] != p0.x {
            return Err(Error::InvalidConfig(
                "path needs at least two waypoints and must start at p0".into(),
            ));
        }
        Ok(self.path[1..]
            .iter()
            .fold(PathSpec::builder(p0.x), |b, &z| b.line_to(z))
            .build())
    }
}

pub(super) fn prepare(config: &RunConfig) -> Result<Prepared> {
    match &config.command {
        Command::Monodromy { config: path }
        | Command::FindReal { config: path, .. }
        | Command::Phi { config: path, .. }
        | Command::SymCheck { config: path, .. } => {
            let text = read_text(path)?;
            let cfg: OperConfig = parse_json(&text, &path.display().to_string())?;
            Ok(Prepared::Oper(cfg))
        }
        Command::Abelian(sub) => {
            let path = match sub {
                AbelianCommand::Periods { curve }
                | AbelianCommand::Class { curve }
                | AbelianCommand::Hecke { curve }
                | AbelianCommand::Verify { curve } => curve,
            };
            let text = read_text(path)?;
            let file: CurveFile = parse_json(&text, &path.display().to_string())?;
            file.check().map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display())))?;
            Ok(Prepared::Curve(file))
        }
        Command::Selfcheck => Ok(Prepared::Selfcheck),
    }
}

pub(super) fn execute(config: &RunConfig, prepared: Prepared) -> Result<Outcome> {
    let tol = config.tol.unwrap_or(DEFAULT_TOL);
    let out = config.out.as_path();
    match (&config.command, prepared) {
        (Command::Monodromy { .. }, Prepared::Oper(cfg)) => run_monodromy(out, &sealed(&cfg, None)?, tol),
        (Command::FindReal { region, .. }, Prepared::Oper(cfg)) => run_find_real(out, &cfg, region, config.tol),
        (Command::Phi { mu, region, .. }, Prepared::Oper(cfg)) => {
            let cfg = sealed(&cfg, mu.as_deref())?;
            run_phi(out, &cfg, region, tol, config.seed)
        }
        (Command::SymCheck { mu, m, region, .. }, Prepared::Oper(cfg)) => {
            let cfg = sealed(&cfg, mu.as_deref())?;
            run_sym_check(out, &cfg, *m, region, tol)
        }
        (Command::Abelian(sub), Prepared::Curve(file)) => {
            let tol = config.tol.unwrap_or(1e-10);
            match sub {
                AbelianCommand::Periods { .. } => run_periods(out, &file, tol),
                AbelianCommand::Class { .. } => run_classes(out, &file, tol),
                AbelianCommand::Hecke { .. } => run_hecke(out, &file, tol),
                AbelianCommand::Verify { .. } => run_abelian_verify(out, &file, tol, config.seed),
            }
        }
        (Command::Selfcheck, Prepared::Selfcheck) => {
            let report = selfcheck::run_selfcheck(&selfcheck::SelfcheckOptions {
                tol: config.tol.unwrap_or(selfcheck::DEFAULT_TOL),
                seed: config.seed,
                scratch: out.join("determinism"),
            });
            print!("{}", report.table());
            write_json(&out.join("selfcheck.json"), &report)?;
            Ok(Outcome {
                status: if report.all_passed { EXIT_OK } else { EXIT_FAILURE },
                files: vec!["selfcheck.json".into()],
            })
        }
        _ => unreachable!("prepare matches the command"),
    }
}

/// Recomputes the constrained accessory parameters, optionally after setting
/// the free one to `mu`.
pub fn sealed(cfg: &OperConfig, mu: Option<&[f64]>) -> Result<OperConfig> {
    let family = OperFamily::new(cfg.clone())?;
    let free = match mu {
        Some(v) => C64::new(v[0], v[1]),
        None => family.base_mu(),
    };
    let out = family.config_at(free);
    if mu.is_none() && !cfg.is_sealed() {
        log::info!("solved constrained accessory parameters: {:?}", out.mu());
    }
    Ok(out)
}

#[derive(Serialize)]
struct GeneratorRecord {
    puncture: usize,
    location: [f64; 2],
    matrix: [[f64; 2]; 4],
    trace: [f64; 2],
    det_error: f64,
}

#[derive(Serialize)]
struct WordRecord {
    word: String,
    trace: [f64; 2],
}

#[derive(Serialize)]
struct FormRecord {
    h: Vec<Vec<[f64; 2]>>,
    det_sign: i8,
    sigma1: f64,
    sigma2: f64,
    residual: f64,
}

impl From<&HermitianForm> for FormRecord {
    fn from(f: &HermitianForm) -> Self {
        FormRecord {
            h: (0..f.h.nrows())
                .map(|i| (0..f.h.ncols()).map(|j| c64_pair(f.h[(i, j)])).collect())
                .collect(),
            det_sign: f.det_sign,
            sigma1: f.sigma1,
            sigma2: f.sigma2,
            residual: f.residual,
        }
    }
}

#[derive(Serialize)]
struct MonodromyReport {
    config: OperConfig,
    seal_residual: f64,
    basepoint: [f64; 2],
    loop_radius: f64,
    generators: Vec<GeneratorRecord>,
    product_defect: f64,
    sign_at_infinity: i8,
    infinity_generator: Option<[[f64; 2]; 4]>,
    words: Vec<WordRecord>,
    reality_residual: f64,
    irreducibility_margin: f64,
    invariant_form: Option<FormRecord>,
    invariant_form_error: Option<String>,
}

fn run_monodromy(out: &Path, cfg: &OperConfig, tol: f64) -> Result<Outcome> {
    let basis = LoopBasis::standard(cfg.punctures())?;
    let rep = monodromy(cfg, tol)?;
    let words = default_words(rep.len());
    let traces = trace_coordinates(&rep, &words)?;
    let (form, form_error) = match invariant_hermitian_form(&rep) {
        Ok(f) => (Some(FormRecord::from(&f)), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = MonodromyReport {
        config: cfg.clone(),
        seal_residual: cfg.seal_residual(),
        basepoint: c64_pair(rep.basepoint),
        loop_radius: basis.radius,
        generators: rep
            .generators
            .iter()
            .zip(&rep.punctures)
            .map(|(m, &j)| GeneratorRecord {
                puncture: j,
                location: c64_pair(cfg.punctures()[j]),
                matrix: mat2_entries(m),
                trace: c64_pair(m.trace()),
                det_error: (m.determinant() - C64::new(1.0, 0.0)).norm(),
            })
            .collect(),
        product_defect: rep.defect,
        sign_at_infinity: rep.sign_at_infinity,
        infinity_generator: rep.infinity_generator.as_ref().map(mat2_entries),
        words: words
            .iter()
            .zip(&traces)
            .map(|(w, t)| WordRecord { word: w.to_string(), trace: c64_pair(*t) })
            .collect(),
        reality_residual: reality_residual(&rep).iter().fold(0.0, |a, r| a.max(r.abs())),
        irreducibility_margin: irreducibility_margin(&rep),
        invariant_form: form,
        invariant_form_error: form_error,
    };
    write_json(&out.join("monodromy.json"), &report)?;
    Ok(Outcome::ok(&["monodromy.json"]))
}

fn rect_of(region: &Region, default: [f64; 4]) -> Result<Rect> {
    let r = region.rect.clone().unwrap_or_else(|| default.to_vec());
    Rect::new(r[0], r[1], r[2], r[3])
}

fn grid_of(region: &Region) -> (usize, usize) {
    match &region.grid {
        Some(g) => (g[0], g[1]),
        None => (DEFAULT_GRID, DEFAULT_GRID),
    }
}

#[derive(Serialize)]
struct HitsReport<'a> {
    family: &'a OperConfig,
    free_index: Option<usize>,
    rect: [f64; 4],
    grid: (usize, usize),
    rigid: bool,
    #[serde(serialize_with = "crate::io::ser_c64_vec")]
    candidates: Vec<C64>,
    hits: &'a [crate::finder::RealOperHit],
    failures: &'a [crate::finder::Failure],
    scan_log: &'static str,
}

fn run_find_real(out: &Path, cfg: &OperConfig, region: &Region, tol: Option<f64>) -> Result<Outcome> {
    let family = OperFamily::new(cfg.clone())?;
    let rect = rect_of(region, [-1.0, 1.0, -1.0, 1.0])?;
    let grid = grid_of(region);
    let mut opts = FinderOptions::default();
    if let Some(t) = tol {
        opts.tol = t;
        opts.scan_tol = opts.scan_tol.max(t);
    }
    let found = enumerate_real_opers(&family, &rect, grid, &opts)?;
    write_csv(
        &out.join("scan_log.csv"),
        &["mu_re", "mu_im", "residual"],
        found
            .scan
            .log
            .iter()
            .map(|r| vec![r.mu.re, r.mu.im, r.residual.unwrap_or(f64::NAN)]),
    )?;
    let report = HitsReport {
        family: family.base(),
        free_index: family.free_index(),
        rect: [rect.re_min, rect.re_max, rect.im_min, rect.im_max],
        grid,
        rigid: found.scan.rigid,
        candidates: found.scan.candidates.clone(),
        hits: &found.hits,
        failures: &found.failures,
        scan_log: "scan_log.csv",
    };
    write_json(&out.join("hits.json"), &report)?;
    Ok(Outcome::ok(&["hits.json", "scan_log.csv"]))
}

/// Bounding box of the punctures padded by one unit.
fn default_window(cfg: &OperConfig) -> [f64; 4] {
    let p = cfg.punctures();
    let fold = |f: fn(&C64) -> f64, init: f64, pick: fn(f64, f64) -> f64| p.iter().map(f).fold(init, pick);
    if p.is_empty() {
        return [-1.0, 1.0, -1.0, 1.0];
    }
    [
        fold(|z| z.re, f64::INFINITY, f64::min) - 1.0,
        fold(|z| z.re, f64::NEG_INFINITY, f64::max) + 1.0,
        fold(|z| z.im, f64::INFINITY, f64::min) - 1.0,
        fold(|z| z.im, f64::NEG_INFINITY, f64::max) + 1.0,
    ]
}

#[derive(Serialize)]
pub struct ProbeRecord {
    pub z: [f64; 2],
    /// Puncture whose loop precedes the second path.
    pub around: usize,
    pub phi_direct: f64,
    pub phi_around: f64,
    pub scale: f64,
    pub defect: f64,
}

/// Pseudorandom points at least `0.1 × spread` away from every puncture.
pub fn probe_points(cfg: &OperConfig, rng: &mut ChaCha8Rng, count: usize) -> Vec<C64> {
    let [a, b, c, d] = default_window(cfg);
    let guard = 0.1 * (b - a).max(d - c) / 3.0;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let z = C64::new(rng.gen_range(a..b), rng.gen_range(c..d));
        if cfg.punctures().iter().all(|p| (z - p).norm() > guard) {
            out.push(z);
        }
    }
    out
}

/// For each point: `Φ` along the continuation path versus along a basis
/// loop followed by that path.
pub fn single_valued_probes(
    cfg: &OperConfig,
    rep: &MonodromyRep,
    form: &HermitianForm,
    points: &[C64],
    opts: &SectionOptions,
) -> Result<Vec<ProbeRecord>> {
    let basis = LoopBasis::with_basepoint(cfg.punctures(), rep.basepoint)?;
    let cont = Continuation::new(cfg, rep.basepoint, opts)?;
    points
        .iter()
        .enumerate()
        .map(|(k, &z)| {
            let direct = cont.path_to(z)?;
            let slot = k % basis.loops.len().max(1);
            let around = basis.loops[slot].then(&direct)?;
            let d = check_single_valued(cfg, rep, form, z, &direct, &around, opts)?;
            Ok(ProbeRecord {
                z: c64_pair(z),
                around: basis.order[slot],
                phi_direct: d.phi_a,
                phi_around: d.phi_b,
                scale: d.scale,
                defect: d.defect,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct PhiReport {
    config: OperConfig,
    weight: (f64, f64),
    form: FormRecord,
    pairing: &'static str,
    samples: usize,
    #[serde(serialize_with = "crate::io::ser_c64_vec")]
    skipped: Vec<C64>,
    #[serde(serialize_with = "crate::io::ser_c64_vec")]
    near_zero: Vec<C64>,
    max_imag: f64,
    single_valued: Vec<ProbeRecord>,
    max_single_valued_defect: f64,
}

fn run_phi(out: &Path, cfg: &OperConfig, region: &Region, tol: f64, seed: u64) -> Result<Outcome> {
    let rep = monodromy(cfg, tol)?;
    let form = invariant_hermitian_form(&rep)?;
    let rect = rect_of(region, default_window(cfg))?;
    let (nx, ny) = grid_of(region);
    let grid = rect.cell_centers(nx, ny);
    let opts = SectionOptions { tol, ..SectionOptions::default() };
    let section = eigenvalue_section(cfg, &rep, &form, &grid, &opts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = probe_points(cfg, &mut rng, PROBE_POINTS);
    let probes = single_valued_probes(cfg, &rep, &form, &points, &opts)?;
    write_csv(
        &out.join("phi.csv"),
        &["z_re", "z_im", "phi"],
        section.samples.iter().map(|s| vec![s.z.re, s.z.im, s.phi]),
    )?;
    let report = PhiReport {
        config: cfg.clone(),
        weight: section.weight,
        form: FormRecord::from(&form),
        pairing: "phi = l adj(H) l^dagger, l = first row of the continued fundamental matrix",
        samples: section.samples.len(),
        skipped: section.skipped.clone(),
        near_zero: section.near_zero.clone(),
        max_imag: section.max_imag,
        max_single_valued_defect: probes.iter().fold(0.0, |a, p| a.max(p.defect)),
        single_valued: probes,
    };
    write_json(&out.join("phi.json"), &report)?;
    Ok(Outcome::ok(&["phi.csv", "phi.json"]))
}

#[derive(Serialize)]
struct SymReport {
    config: OperConfig,
    m: usize,
    form: FormRecord,
    sym_form: FormRecord,
    scale: f64,
    max_relative_deviation: f64,
    samples: usize,
}

/// `Φ_m` from the directly computed `Sym^m` pairing against `Φ_1^m`.
fn run_sym_check(out: &Path, cfg: &OperConfig, m: usize, region: &Region, tol: f64) -> Result<Outcome> {
    if m < 1 {
        return Err(Error::InvalidConfig("--m must be at least 1".into()));
    }
    let rep = monodromy(cfg, tol)?;
    let form = invariant_hermitian_form(&rep)?;
    let sym = sym_power_invariant_form(&rep, m)?;
    let rect = rect_of(region, default_window(cfg))?;
    let (nx, ny) = grid_of(region);
    let grid = rect.cell_centers(nx, ny);
    let opts = SectionOptions { tol, ..SectionOptions::default() };
    let phi1 = eigenvalue_section(cfg, &rep, &form, &grid, &opts)?;
    let phim = section_with_pairing(cfg, &rep, &sym.h, m, &grid, &opts)?;
    let powered: Vec<f64> = phi1.values().iter().map(|v| v.powi(m as i32)).collect();
    let (scale, deviation) = scalar_alignment(&phim.values(), &powered);
    write_csv(
        &out.join("sym_check.csv"),
        &["z_re", "z_im", "phi1", "phim"],
        phi1.samples.iter().zip(&phim.samples).map(|(a, b)| vec![a.z.re, a.z.im, a.phi, b.phi]),
    )?;
    let report = SymReport {
        config: cfg.clone(),
        m,
        form: FormRecord::from(&form),
        sym_form: FormRecord::from(&sym),
        scale,
        max_relative_deviation: deviation,
        samples: phim.samples.len(),
    };
    write_json(&out.join("sym_check.json"), &report)?;
    Ok(Outcome::ok(&["sym_check.csv", "sym_check.json"]))
}

#[derive(Serialize)]
struct CurveRecord {
    #[serde(serialize_with = "crate::io::ser_c64_vec")]
    coefficients: Vec<C64>,
    genus: usize,
    #[serde(serialize_with = "crate::io::ser_c64_vec")]
    branch_points: Vec<C64>,
}

impl From<&HyperellipticCurve> for CurveRecord {
    fn from(c: &HyperellipticCurve) -> Self {
        CurveRecord {
            coefficients: c.coefficients().to_vec(),
            genus: c.genus(),
            branch_points: c.branch_points().to_vec(),
        }
    }
}

const LATTICE_CONVENTION: &str = "omega_i = x^i dx / y (i < g); Jacobian points are vectors v modulo the columns of [A | B]; \
     a_i encircles branch points 2i-1, 2i and b_i encircles 2i..2g+1 (1-based, sorted by real then imaginary part)";

#[derive(Serialize)]
struct PeriodsReport<'a> {
    curve: CurveRecord,
    lattice_convention: &'static str,
    periods: &'a PeriodData,
}

fn run_periods(out: &Path, file: &CurveFile, tol: f64) -> Result<Outcome> {
    let curve = file.curve()?;
    let periods = period_matrix(&curve, tol)?;
    let report = PeriodsReport {
        curve: CurveRecord::from(&curve),
        lattice_convention: LATTICE_CONVENTION,
        periods: &periods,
    };
    write_json(&out.join("periods.json"), &report)?;
    Ok(Outcome::ok(&["periods.json"]))
}

#[derive(Serialize)]
struct ClassRecord {
    class: HarmonicClass,
    eigenvalues: OperEigenvalues,
    conjugation_defect: f64,
    /// `|exp ∮(a ω + b ω̄)|` over each basis cycle.
    cycle_moduli: Vec<f64>,
}

fn class_records(periods: &PeriodData, classes: &[Vec<i64>]) -> Result<Vec<ClassRecord>> {
    classes
        .iter()
        .map(|m| {
            let class = integer_harmonic_class(periods, m)?;
            let eigenvalues = oper_eigenvalues_ab(&class);
            Ok(ClassRecord {
                conjugation_defect: eigenvalues.conjugation_defect(),
                cycle_moduli: eigenvalues.cycle_exponents(periods).iter().map(|z| z.re.exp()).collect(),
                class,
                eigenvalues,
            })
        })
        .collect()
}

fn run_classes(out: &Path, file: &CurveFile, tol: f64) -> Result<Outcome> {
    let curve = file.curve()?;
    let periods = period_matrix(&curve, tol)?;
    #[derive(Serialize)]
    struct Report {
        curve: CurveRecord,
        lattice_convention: &'static str,
        classes: Vec<ClassRecord>,
    }
    let report = Report {
        curve: CurveRecord::from(&curve),
        lattice_convention: LATTICE_CONVENTION,
        classes: class_records(&periods, &file.classes)?,
    };
    write_json(&out.join("classes.json"), &report)?;
    Ok(Outcome::ok(&["classes.json"]))
}

/// Points evenly spaced by arc length along a polyline, endpoints included.
fn polyline_prefixes(file: &CurveFile, count: usize) -> Result<Vec<(f64, PathSpec)>> {
    let full = file.polyline()?;
    let total = full.length();
    let count = count.max(2);
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let target = total * k as f64 / (count - 1) as f64;
        let mut builder = PathSpec::builder(full.start());
        let mut walked = 0.0;
        for seg in full.segments() {
            let len = seg.length();
            if walked + len >= target {
                let s = if len > 0.0 { (target - walked) / len } else { 0.0 };
                builder = builder.line_to(if k == count - 1 { seg.end() } else { seg.point(s) });
                break;
            }
            builder = builder.line_to(seg.end());
            walked += len;
        }
        out.push((target, builder.build()));
    }
    Ok(out)
}

fn run_hecke(out: &Path, file: &CurveFile, tol: f64) -> Result<Outcome> {
    let curve = file.curve()?;
    let periods = period_matrix(&curve, tol)?;
    let p0 = file.start()?;
    let samples = polyline_prefixes(file, file.samples.unwrap_or(64))?;
    if file.classes.is_empty() {
        return Err(Error::InvalidConfig("curve file lists no classes".into()));
    }
    let mut rows = Vec::new();
    let mut worst_modulus: f64 = 0.0;
    for (index, m) in file.classes.iter().enumerate() {
        let class = integer_harmonic_class(&periods, m)?;
        for (s, path) in &samples {
            let p = if path.segments().is_empty() { p0 } else { continue_point(&curve, &p0, path)? };
            let f = if path.segments().is_empty() {
                C64::new(1.0, 0.0)
            } else {
                hecke_eigenvalue_f(&curve, &class, &p0, &p, path)?
            };
            worst_modulus = worst_modulus.max((f.norm() - 1.0).abs());
            rows.push(vec![index as f64, *s, p.x.re, p.x.im, f64::from(p.sheet), f.re, f.im]);
        }
    }
    write_csv(
        &out.join("hecke.csv"),
        &["class", "s", "x_re", "x_im", "sheet", "f_re", "f_im"],
        rows,
    )?;
    #[derive(Serialize)]
    struct Report<'a> {
        curve: CurveRecord,
        p0: CurvePoint,
        #[serde(serialize_with = "crate::io::ser_c64_vec")]
        path: &'a [C64],
        classes: &'a [Vec<i64>],
        samples: usize,
        max_modulus_error: f64,
    }
    write_json(
        &out.join("hecke.json"),
        &Report {
            curve: CurveRecord::from(&curve),
            p0,
            path: &file.path,
            classes: &file.classes,
            samples: samples.len(),
            max_modulus_error: worst_modulus,
        },
    )?;
    Ok(Outcome::ok(&["hecke.csv", "hecke.json"]))
}

/// `path` followed by a round trip around basis cycle `k`.
pub fn path_with_cycle(
    curve: &HyperellipticCurve,
    periods: &PeriodData,
    path: &PathSpec,
    k: usize,
) -> Result<PathSpec> {
    let cycle = &periods.cycles[k];
    let q = path.end();
    let c = cycle.path.start();
    let points = curve.branch_points();
    let mut sep = f64::INFINITY;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            sep = sep.min((a - b).norm());
        }
    }
    let radius = 0.45
        * curve
            .distance_to_branch_points(q)
            .min(curve.distance_to_branch_points(c))
            .min(0.5 * sep);
    let there = detour_line(q, c, points, radius)?;
    path.then(&there)?.then(&cycle.path)?.then(&there.reversed())
}

#[derive(Serialize)]
pub struct AbelianChecks {
    pub symmetry_defect: f64,
    pub min_im_eigenvalue: f64,
    pub quadrature_error: f64,
    pub oracle_difference: Option<f64>,
    pub class_residual: f64,
    pub hecke_relation_defect: f64,
    pub path_independence_defect: f64,
    pub multiplicativity_defect: f64,
    pub df_residual: f64,
    pub df_ratio: f64,
    pub conjugation_defect: f64,
    pub max_modulus_error: f64,
}

/// Seeded consistency checks on one curve. The curve file's `p0` and path
/// supply the base point and the first probe path.
pub fn abelian_checks(file: &CurveFile, tol: f64, seed: u64) -> Result<AbelianChecks> {
    let curve = file.curve()?;
    let periods = period_matrix(&curve, tol)?;
    let g = curve.genus();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p0 = file.start()?;
    let path = file.polyline()?;
    let p = continue_point(&curve, &p0, &path)?;
    let oracle_difference = if g == 2 {
        let tau = oracle_tau(&curve, 8192)?;
        Some((&tau - &periods.tau).iter().map(|z| z.norm()).fold(0.0, f64::max))
    } else {
        None
    };

    let mut class_residual: f64 = 0.0;
    let mut classes = Vec::new();
    for _ in 0..PROBE_POINTS {
        let m: Vec<i64> = (0..2 * g).map(|_| rng.gen_range(-3..=3)).collect();
        let class = integer_harmonic_class(&periods, &m)?;
        class_residual = class_residual.max(class.residual);
        classes.push(class);
    }
    let mut modulus: f64 = 0.0;
    let mut conjugation: f64 = 0.0;
    let mut hecke: f64 = 0.0;
    let mut independence: f64 = 0.0;
    let mut multiplicativity: f64 = 0.0;
    let scale = periods.periods().iter().map(|z| z.norm()).fold(0.0, f64::max);
    let [a, b, c, d] = {
        let e = curve.branch_points();
        let re = e.iter().map(|z| z.re);
        let im = e.iter().map(|z| z.im);
        [
            re.clone().fold(f64::INFINITY, f64::min) - 1.0,
            re.fold(f64::NEG_INFINITY, f64::max) + 1.0,
            im.clone().fold(f64::INFINITY, f64::min) - 1.0,
            im.fold(f64::NEG_INFINITY, f64::max) + 1.0,
        ]
    };
    for class in &classes {
        conjugation = conjugation.max(oper_eigenvalues_ab(class).conjugation_defect());
        // Random target reached by a straight continuation of the file's path.
        let target = loop {
            let z = C64::new(rng.gen_range(a..b), rng.gen_range(c..d));
            if curve.distance_to_branch_points(z) > 0.1 {
                let line = PathSpec::line(p.x, z);
                if curve.branch_points().iter().all(|e| line.distance_to(*e) > 0.05) {
                    break z;
                }
            }
        };
        let extended = path.then(&PathSpec::line(p.x, target))?;
        let q = continue_point(&curve, &p0, &extended)?;
        let v: Vec<C64> = (0..g)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale)
            .collect();
        hecke = hecke.max(verify_hecke_relation(&curve, &periods, class, &v, &p0, &q, &extended)?);

        let f_direct = hecke_eigenvalue_f(&curve, class, &p0, &q, &extended)?;
        modulus = modulus.max((f_direct.norm() - 1.0).abs());
        for k in 0..2 * g {
            let around = path_with_cycle(&curve, &periods, &path, k)?.then(&PathSpec::line(p.x, target))?;
            let q2 = continue_point(&curve, &p0, &around)?;
            let f = hecke_eigenvalue_f(&curve, class, &p0, &q2, &around)?;
            independence = independence.max((f - f_direct).norm());
            modulus = modulus.max((f.norm() - 1.0).abs());
        }
        let f_first = hecke_eigenvalue_f(&curve, class, &p0, &p, &path)?;
        let f_second = hecke_eigenvalue_f(&curve, class, &p, &q, &PathSpec::line(p.x, target))?;
        multiplicativity = multiplicativity.max((f_first * f_second - f_direct).norm());
    }
    let class = &classes[0];
    let df_fine = verify_df(&curve, class, &p0, &path, 1e-4)?;
    let df_coarse = verify_df(&curve, class, &p0, &path, 2e-4)?;
    Ok(AbelianChecks {
        symmetry_defect: periods.symmetry_defect,
        min_im_eigenvalue: periods.min_im_eigenvalue,
        quadrature_error: periods.quadrature_error,
        oracle_difference,
        class_residual,
        hecke_relation_defect: hecke,
        path_independence_defect: independence,
        multiplicativity_defect: multiplicativity,
        df_residual: df_fine,
        df_ratio: if df_fine > 0.0 { df_coarse / df_fine } else { f64::NAN },
        conjugation_defect: conjugation,
        max_modulus_error: modulus,
    })
}

fn run_abelian_verify(out: &Path, file: &CurveFile, tol: f64, seed: u64) -> Result<Outcome> {
    let curve = file.curve()?;
    let checks = abelian_checks(file, tol, seed)?;
    #[derive(Serialize)]
    struct Report {
        curve: CurveRecord,
        seed: u64,
        checks: AbelianChecks,
    }
    write_json(
        &out.join("abelian_verify.json"),
        &Report { curve: CurveRecord::from(&curve), seed, checks },
    )?;
    Ok(Outcome::ok(&["abelian_verify.json"]))
}
