//! Built-in acceptance suite. Every check records the measured value next
//! to its bound; a check that cannot be evaluated fails with the error text.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::commands::{abelian_checks, probe_points, sealed, single_valued_probes, CurveFile};
use super::{manifest_without_timing, run, AbelianCommand, Command, Region, RunConfig, EXIT_OK, MANIFEST};
use crate::abelian::{period_matrix, HyperellipticCurve};
use crate::error::{Error, Result};
use crate::finder::{enumerate_real_opers, isolation_factor, residual_vector, FinderOptions, Rect};
use crate::io::parse_json;
use crate::monodromy::{compute_monodromy, monodromy, LoopBasis, MonodromyRep};
use crate::numeric::{from_mat2, trace2, CMat, Mat2, C64};
use crate::oper::{OperConfig, OperFamily};
use crate::oracle::oracle_tau;
use crate::section::{
    eigenvalue_section, invariant_hermitian_form, scalar_alignment, section_with_pairing, stencil_section,
    sym_power_invariant_form, verify_oper_ode, HermitianForm, SectionOptions, NULL_TOLERANCE,
};
use crate::transport::{circle_loop, transport, LinearSystemSpec};

pub const RIGID_CONFIG: &str = include_str!("../../configs/rigid3.json");
pub const FOUR_CONFIG: &str = include_str!("../../configs/four_real.json");
pub const SQUARE_CURVE: &str = include_str!("../../configs/curve_square.json");
pub const GENUS2_CURVE: &str = include_str!("../../configs/curve_genus2.json");

/// Transport tolerance when none is given. Tighter than the command default:
/// generators of norm ~10³ lose three digits to the loop product.
pub const DEFAULT_TOL: f64 = 1e-14;

/// Rectangle of the free accessory parameter scanned for the four-puncture family.
pub const FOUR_RECT: [f64; 4] = [-0.6, 1.1, -1.0, 1.0];

#[derive(Debug, Clone)]
pub struct SelfcheckOptions {
    /// Transport tolerance used throughout.
    pub tol: f64,
    pub seed: u64,
    /// Directory for the reproducibility reruns.
    pub scratch: PathBuf,
}

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Below,
    Above,
    Equal,
    Between,
}

#[derive(Debug, Clone, Serialize)]
pub struct Measurement {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    /// Upper end for `Between`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    pub passed: bool,
}

fn below(name: &str, value: f64, bound: f64) -> Measurement {
    Measurement { name: name.into(), value, relation: Relation::Below, bound, upper: None, passed: value < bound }
}

fn above(name: &str, value: f64, bound: f64) -> Measurement {
    Measurement { name: name.into(), value, relation: Relation::Above, bound, upper: None, passed: value > bound }
}

fn equal(name: &str, value: f64, target: f64) -> Measurement {
    Measurement { name: name.into(), value, relation: Relation::Equal, bound: target, upper: None, passed: value == target }
}

fn between(name: &str, value: f64, lo: f64, hi: f64) -> Measurement {
    Measurement {
        name: name.into(),
        value,
        relation: Relation::Between,
        bound: lo,
        upper: Some(hi),
        passed: value >= lo && value <= hi,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub measurements: Vec<Measurement>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfcheckReport {
    pub tol: f64,
    pub seed: u64,
    pub criteria: Vec<CriterionReport>,
    pub all_passed: bool,
}

impl Measurement {
    fn describe(&self) -> String {
        match self.relation {
            Relation::Below => format!("{} = {:.3e} (< {:.0e})", self.name, self.value, self.bound),
            Relation::Above => format!("{} = {:.3e} (> {:.0e})", self.name, self.value, self.bound),
            Relation::Equal => format!("{} = {} (= {})", self.name, self.value, self.bound),
            Relation::Between => format!(
                "{} = {:.3} (in [{}, {}])",
                self.name,
                self.value,
                self.bound,
                self.upper.unwrap_or(f64::NAN)
            ),
        }
    }
}

impl SelfcheckReport {
    /// One line per criterion followed by its measurements.
    pub fn table(&self) -> String {
        let mut out = String::new();
        for c in &self.criteria {
            let mark = if c.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!("[{mark}] {:>2} {}\n", c.id, c.title));
            for m in &c.measurements {
                let flag = if m.passed { " " } else { "!" };
                out.push_str(&format!("       {flag} {}\n", m.describe()));
            }
            if let Some(e) = &c.error {
                out.push_str(&format!("       ! error: {e}\n"));
            }
        }
        let passed = self.criteria.iter().filter(|c| c.passed).count();
        out.push_str(&format!("{passed}/{} criteria passed\n", self.criteria.len()));
        out
    }
}

/// Shared intermediate results.
struct Context {
    opts: SelfcheckOptions,
    rigid: Option<(OperConfig, MonodromyRep)>,
    random_reps: Option<Vec<MonodromyRep>>,
    four_hits: Option<Vec<C64>>,
}

impl Context {
    fn rigid(&mut self) -> Result<(OperConfig, MonodromyRep)> {
        if self.rigid.is_none() {
            let cfg = sealed(&parse_json::<OperConfig>(RIGID_CONFIG, "rigid config")?, None)?;
            let rep = monodromy(&cfg, self.opts.tol)?;
            self.rigid = Some((cfg, rep));
        }
        Ok(self.rigid.clone().expect("just set"))
    }

    fn four_family(&self) -> Result<OperFamily> {
        OperFamily::new(parse_json::<OperConfig>(FOUR_CONFIG, "four-puncture config")?)
    }

    /// Twenty sealed configurations `{0, 1, λ, ∞}` with pseudorandom `λ` and
    /// free accessory parameter. Draws whose loop basis cannot be built are
    /// replaced; monodromy failures are reported.
    fn random_reps(&mut self) -> Result<Vec<MonodromyRep>> {
        if let Some(r) = &self.random_reps {
            return Ok(r.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed ^ 0x5eed_0004);
        let mut reps = Vec::new();
        let mut draws = 0;
        while reps.len() < 20 {
            draws += 1;
            if draws > 1000 {
                return Err(Error::InvalidConfig("could not draw admissible configurations".into()));
            }
            let lambda = C64::new(rng.gen_range(-2.0..3.0), rng.gen_range(-1.5..1.5));
            let mu = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let punctures = vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0), lambda];
            if lambda.norm() < 0.3 || (lambda - 1.0).norm() < 0.3 {
                continue;
            }
            let Ok(basis) = LoopBasis::standard(&punctures) else { continue };
            let cfg = OperConfig::parabolic(punctures, true, mu)?;
            reps.push(compute_monodromy(&cfg, &basis, self.opts.tol)?);
        }
        self.random_reps = Some(reps.clone());
        Ok(reps)
    }

    fn four_hits(&mut self) -> Result<Vec<C64>> {
        match &self.four_hits {
            Some(h) => Ok(h.clone()),
            None => Err(Error::InvalidConfig("four-puncture scan did not complete".into())),
        }
    }
}

fn parabolic_distance(m: &Mat2) -> f64 {
    let t = trace2(m);
    (t - 2.0).norm().min((t + 2.0).norm())
}

fn criterion_1(ctx: &mut Context) -> Result<Vec<Measurement>> {
    let tol = ctx.opts.tol;
    let zero = LinearSystemSpec::new(2, vec![C64::new(0.0, 0.0)], |_, m: &mut CMat| {
        m.fill(C64::new(0.0, 0.0));
        m[(0, 1)] = C64::new(1.0, 0.0);
    })?;
    let path = circle_loop(C64::new(0.0, 0.0), C64::new(1.5, 0.5), 0.5)?;
    let t = transport(&zero, &path, &CMat::identity(2, 2), tol)?;
    let identity_error = (t - CMat::identity(2, 2)).iter().map(|z| z.norm()).fold(0.0, f64::max);

    let euler = OperConfig::new(vec![C64::new(0.0, 0.0)], true, vec![0.25], Some(0.25), vec![C64::new(0.0, 0.0)])?;
    let system = euler.to_first_order_system()?;
    let m = transport(&system, &path, &CMat::identity(2, 2), tol)?;
    let trace_error = (m[(0, 0)] + m[(1, 1)] + 2.0).norm();
    Ok(vec![
        below("zero-field loop |T - I|", identity_error, 1e-12),
        below("Euler loop |tr + 2|", trace_error, 1e-10),
    ])
}

fn criterion_2(ctx: &mut Context) -> Result<Vec<Measurement>> {
    let (_, rigid) = ctx.rigid()?;
    let reps = ctx.random_reps()?;
    let det = reps.iter().map(MonodromyRep::max_det_error).fold(rigid.max_det_error(), f64::max);
    let defect = reps.iter().map(|r| r.defect).fold(rigid.defect, f64::max);
    Ok(vec![
        equal("pseudorandom configurations", reps.len() as f64, 20.0),
        below("max |det M_j - 1|", det, 1e-9),
        below("max loop-product defect", defect, 1e-7),
    ])
}

fn criterion_3(ctx: &mut Context) -> Result<Vec<Measurement>> {
    let (_, rigid) = ctx.rigid()?;
    let reps = ctx.random_reps()?;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for rep in std::iter::once(&rigid).chain(reps.iter()) {
        for m in rep.generators.iter().chain(rep.infinity_generator.iter()) {
            worst = worst.max(parabolic_distance(m));
            count += 1;
        }
    }
    Ok(vec![
        above("local monodromies checked", count as f64, 0.0),
        below("max distance of trace from +-2", worst, 1e-8),
    ])
}

fn criterion_4(ctx: &mut Context) -> Result<Vec<Measurement>> {
    let (cfg, _) = ctx.rigid()?;
    let family = OperFamily::new(cfg)?;
    let rect = Rect::new(-1.0, 1.0, -1.0, 1.0)?;
    let opts = FinderOptions { tol: ctx.opts.tol.min(1e-14), ..FinderOptions::default() };
    let found = enumerate_real_opers(&family, &rect, (8, 8), &opts)?;
    let hit = found.hits.first().ok_or(Error::NoConvergence { residual: f64::NAN })?;
    let (residual, rep) = residual_vector(&family, hit.mu, &opts)?;
    let reality = residual.iter().fold(0.0_f64, |a, r| a.max(r.abs()));
    let form = invariant_hermitian_form(&rep)?;
    Ok(vec![
        equal("hits", found.hits.len() as f64, 1.0),
        below("reality residual", reality, 1e-10),
        below("sigma_1 / max(1, sigma_max)", form.sigma1, NULL_TOLERANCE),
        above("sigma_2 - sigma_1", form.gap(), 1e-3),
        equal("det_sign", f64::from(form.det_sign), -1.0),
    ])
}

fn match_distance(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .map(|x| b.iter().map(|y| (x - y).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

fn criterion_5(ctx: &mut Context) -> Result<Vec<Measurement>> {
    let family = ctx.four_family()?;
    let [a, b, c, d] = FOUR_RECT;
    let rect = Rect::new(a, b, c, d)?;
    let opts = FinderOptions { tol: ctx.opts.tol.min(1e-14), ..FinderOptions::default() };
    let coarse = enumerate_real_opers(&family, &rect, (32, 32), &opts)?;
    let fine = enumerate_real_opers(&family, &rect, (64, 64), &opts)?;
    let hc: Vec<C64> = coarse.hits.iter().map(|h| h.mu).collect();
    let hf: Vec<C64> = fine.hits.iter().map(|h| h.mu).collect();
    let mut isolation = f64::INFINITY;
    for hit in &fine.hits {
        isolation = isolation.min(isolation_factor(&family, hit, 0.01, &opts)?);
    }
    ctx.four_hits = Some(hf.clone());
    Ok(vec![
        above("hits on 64x64", hf.len() as f64, 0.0),
        equal("hits on 32x32 minus hits on 64x64", hc.len() as f64 - hf.len() as f64, 0.0),
        below("max distance 32x32 -> 64x64", match_distance(&hc, &hf), 1e-6),
        below("max distance 64x64 -> 32x32", match_distance(&hf, &hc), 1e-6),
        above("min isolation factor at 0.01", isolation, 1e3),
    ])
}

fn perturbed(form: &HermitianForm, generators: &[CMat]) -> HermitianForm {
    let scale = form.h.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut h = form.h.clone();
    h[(0, 1)] += C64::new(0.3 * scale, 0.0);
    h[(1, 0)] += C64::new(0.3 * scale, 0.0);
    HermitianForm::from_matrix(h, generators)
}

fn criterion_6(ctx: &mut Context) -> Result<Vec<Measurement>> {
    let tol = ctx.opts.tol;
    let (rigid_cfg, rigid_rep) = ctx.rigid()?;
    let family = ctx.four_family()?;
    let mut configs = vec![rigid_cfg.clone()];
    configs.extend(ctx.four_hits()?.iter().map(|&mu| family.config_at(mu)));
    let sopts = SectionOptions { tol, ..SectionOptions::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.opts.seed);
    let mut worst: f64 = 0.0;
    for cfg in &configs {
        let rep = monodromy(cfg, tol)?;
        let form = invariant_hermitian_form(&rep)?;
        let points = probe_points(cfg, &mut rng, 10);
        for p in single_valued_probes(cfg, &rep, &form, &points, &sopts)? {
            worst = worst.max(p.defect);
        }
    }
    let form = invariant_hermitian_form(&rigid_rep)?;
    let gens: Vec<CMat> = rigid_rep.generators.iter().map(from_mat2).collect();
    let bad = perturbed(&form, &gens);
    let points = probe_points(&rigid_cfg, &mut rng, 10);
    let bad_defect = single_valued_probes(&rigid_cfg, &rigid_rep, &bad, &points, &sopts)?
        .iter()
        .fold(0.0_f64, |a, p| a.max(p.defect));
    Ok(vec![
        equal("opers checked", configs.len() as f64, configs.len() as f64),
        below("max path-pair defect", worst, 1e-8),
        above("defect with non-invariant H", bad_defect, 1e-2),
    ])
}

fn criterion_7(ctx: &mut Context) -> Result<Vec<Measurement>> {
    let tol = ctx.opts.tol;
    let (cfg, rep) = ctx.rigid()?;
    let form = invariant_hermitian_form(&rep)?;
    let sopts = SectionOptions { tol, ..SectionOptions::default() };
    let center = C64::new(0.5, 0.5);
    let residual = |h: f64| -> Result<f64> {
        let section = stencil_section(&cfg, &rep, &form, center, h, 5, &sopts)?;
        Ok(verify_oper_ode(&section, &cfg, h)?.max())
    };
    let fine = residual(1e-3)?;
    let coarse = residual(2e-3)?;
    Ok(vec![
        below("ODE residual at h = 1e-3", fine, 1e-5),
        between("residual ratio h = 2e-3 : 1e-3", coarse / fine, 3.0, 5.0),
    ])
}

fn criterion_8(ctx: &mut Context) -> Result<Vec<Measurement>> {
    let tol = ctx.opts.tol;
    let (cfg, rep) = ctx.rigid()?;
    let form = invariant_hermitian_form(&rep)?;
    let sym = sym_power_invariant_form(&rep, 2)?;
    let grid = Rect::new(-1.0, 2.0, -1.5, 1.5)?.cell_centers(12, 12);
    let sopts = SectionOptions { tol, ..SectionOptions::default() };
    let phi1 = eigenvalue_section(&cfg, &rep, &form, &grid, &sopts)?;
    let phi2 = section_with_pairing(&cfg, &rep, &sym.h, 2, &grid, &sopts)?;
    let squared: Vec<f64> = phi1.values().iter().map(|v| v * v).collect();
    let (_, deviation) = scalar_alignment(&phi2.values(), &squared);
    Ok(vec![
        above("samples", phi2.samples.len() as f64, 100.0),
        below("max relative deviation of Phi_2 from c Phi_1^2", deviation, 1e-8),
    ])
}

fn criterion_9(_ctx: &mut Context) -> Result<Vec<Measurement>> {
    let square = HyperellipticCurve::from_real(&[0.0, -1.0, 0.0, 1.0])?;
    let tau = period_matrix(&square, 1e-10)?.tau[(0, 0)];
    let mut out = vec![below("|tau(y^2 = x^3 - x) - i|", (tau - C64::new(0.0, 1.0)).norm(), 1e-8)];
    let curves: [(&str, &[f64]); 4] = [
        ("g=1 cubic", &[0.0, -1.0, 0.0, 1.0]),
        ("g=1 quartic", &[1.0, 0.5, -2.0, 0.0, 1.0]),
        ("g=2 quintic", &[0.0, -1.0, 0.0, 0.0, 0.0, 1.0]),
        ("g=2 sextic", &[0.5, -1.0, 0.0, 2.0, 0.0, 0.0, 1.0]),
    ];
    for (name, coeffs) in curves {
        let curve = HyperellipticCurve::from_real(coeffs)?;
        let periods = period_matrix(&curve, 1e-10)?;
        out.push(below(&format!("{name}: |tau - tau^T|"), periods.symmetry_defect, 1e-9));
        out.push(above(&format!("{name}: min eig Im tau"), periods.min_im_eigenvalue, 0.0));
        if curve.genus() == 2 {
            let oracle = oracle_tau(&curve, 8192)?;
            let diff = (&oracle - &periods.tau).iter().map(|z| z.norm()).fold(0.0, f64::max);
            out.push(below(&format!("{name}: |tau - oracle|"), diff, 1e-7));
        }
    }
    Ok(out)
}

fn criterion_10(ctx: &mut Context) -> Result<Vec<Measurement>> {
    let mut out = Vec::new();
    for (name, text) in [("g=1", SQUARE_CURVE), ("g=2", GENUS2_CURVE)] {
        let file: CurveFile = parse_json(text, name)?;
        let checks = abelian_checks(&file, 1e-10, ctx.opts.seed)?;
        out.push(below(&format!("{name}: path independence of F"), checks.path_independence_defect, 1e-8));
        out.push(below(&format!("{name}: Hecke relation defect"), checks.hecke_relation_defect, 1e-8));
        out.push(below(&format!("{name}: multiplicativity of F"), checks.multiplicativity_defect, 1e-10));
        out.push(below(&format!("{name}: dF residual at h = 1e-4"), checks.df_residual, 1e-6));
        out.push(equal(&format!("{name}: max |b + conj(a)|"), checks.conjugation_defect, 0.0));
        out.push(below(&format!("{name}: max ||F| - 1|"), checks.max_modulus_error, 1e-10));
    }
    Ok(out)
}

fn files_in(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let mut bytes = fs::read(entry.path())?;
        if name == MANIFEST {
            bytes = manifest_without_timing(&String::from_utf8_lossy(&bytes)).into_bytes();
        }
        out.insert(name, bytes);
    }
    Ok(out)
}

fn criterion_11(ctx: &mut Context) -> Result<Vec<Measurement>> {
    let scratch = &ctx.opts.scratch;
    let inputs = scratch.join("inputs");
    fs::create_dir_all(&inputs)?;
    let rigid = inputs.join("rigid3.json");
    let four = inputs.join("four_real.json");
    let curve = inputs.join("curve_square.json");
    fs::write(&rigid, RIGID_CONFIG)?;
    fs::write(&four, FOUR_CONFIG)?;
    fs::write(&curve, SQUARE_CURVE)?;
    let region = |rect: Option<Vec<f64>>, n: usize| Region { rect, grid: Some(vec![n, n]) };
    let commands = vec![
        ("monodromy", Command::Monodromy { config: rigid.clone() }),
        (
            "find-real",
            Command::FindReal { config: four.clone(), region: region(Some(vec![0.1, 0.4, -0.2, 0.6]), 8) },
        ),
        ("phi", Command::Phi { config: rigid.clone(), mu: None, region: region(None, 8) }),
        ("sym-check", Command::SymCheck { config: rigid.clone(), mu: None, m: 2, region: region(None, 6) }),
        ("abelian-periods", Command::Abelian(AbelianCommand::Periods { curve: curve.clone() })),
        ("abelian-class", Command::Abelian(AbelianCommand::Class { curve: curve.clone() })),
        ("abelian-hecke", Command::Abelian(AbelianCommand::Hecke { curve: curve.clone() })),
        ("abelian-verify", Command::Abelian(AbelianCommand::Verify { curve: curve.clone() })),
    ];
    let mut compared = 0usize;
    let mut mismatches = 0usize;
    let mut failed_runs = 0usize;
    for (name, command) in commands {
        // Both runs write to the same directory so the configs are identical;
        // the first result is moved aside before the second run.
        let out = scratch.join(name).join("run");
        let first = scratch.join(name).join("first");
        let mut listings = Vec::new();
        for dir in [&out, &first] {
            if dir.exists() {
                fs::remove_dir_all(dir)?;
            }
        }
        for rerun in 0..2 {
            let config = RunConfig {
                command: command.clone(),
                out: out.clone(),
                tol: None,
                workers: 1,
                seed: ctx.opts.seed,
            };
            if run(&config) != EXIT_OK {
                failed_runs += 1;
            }
            listings.push(files_in(&out)?);
            if rerun == 0 {
                fs::rename(&out, &first)?;
            }
        }
        let (a, b) = (&listings[0], &listings[1]);
        if a.keys().ne(b.keys()) {
            mismatches += 1;
        }
        for (file, bytes) in a {
            compared += 1;
            if b.get(file) != Some(bytes) {
                log::warn!("{name}: {file} differs between reruns");
                mismatches += 1;
            }
        }
    }
    Ok(vec![
        above("artifacts compared", compared as f64, 0.0),
        equal("failed runs", failed_runs as f64, 0.0),
        equal("differing artifacts", mismatches as f64, 0.0),
    ])
}

type Check = fn(&mut Context) -> Result<Vec<Measurement>>;

const CRITERIA: [(&str, Check); 11] = [
    ("transport exactness", criterion_1),
    ("group-theoretic invariants", criterion_2),
    ("parabolic local monodromy", criterion_3),
    ("rigid real oper", criterion_4),
    ("discreteness on {0, 1, 2, inf}", criterion_5),
    ("single-valuedness", criterion_6),
    ("oper differential equation", criterion_7),
    ("symmetric-power multiplicativity", criterion_8),
    ("abelian periods", criterion_9),
    ("abelian Hecke eigenvalues", criterion_10),
    ("determinism", criterion_11),
];

pub fn run_selfcheck(opts: &SelfcheckOptions) -> SelfcheckReport {
    let mut ctx = Context { opts: opts.clone(), rigid: None, random_reps: None, four_hits: None };
    let criteria: Vec<CriterionReport> = CRITERIA
        .iter()
        .enumerate()
        .map(|(k, (title, check))| {
            log::info!("criterion {}: {title}", k + 1);
            match check(&mut ctx) {
                Ok(measurements) => CriterionReport {
                    id: k + 1,
                    title,
                    passed: measurements.iter().all(|m| m.passed),
                    measurements,
                    error: None,
                },
                Err(e) => CriterionReport { id: k + 1, title, passed: false, measurements: Vec::new(), error: Some(e.to_string()) },
            }
        })
        .collect();
    SelfcheckReport {
        tol: opts.tol,
        seed: opts.seed,
        all_passed: criteria.iter().all(|c| c.passed),
        criteria,
    }
}
