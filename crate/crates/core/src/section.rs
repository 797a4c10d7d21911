//! Invariant Hermitian forms on solution space and the single-valued
//! sections `Φ(z, z̄)` they produce.
//!
//! With the solution basis fixed by `(y, y')(z₀) = I`, the values of the
//! basis solutions at `z` form the covector `ℓ_z` (first row of the transport
//! from `z₀` to `z`). Continuing first around loop `j` replaces `ℓ_z` by
//! `ℓ_z M_j`, so `Φ(z) = ℓ_z G ℓ_z†` is single-valued exactly when
//! `M_j G M_j† = G`. For a form with `M_j† H M_j = H` that pairing is
//! `G = adj(H)`, which is linear in `H`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::monodromy::MonodromyRep;
use crate::numeric::{from_mat2, smallest_right_singular, CMat, C64};
use crate::oper::OperConfig;
use crate::transport::{detour_line, transport, LinearSystemSpec, PathSpec};

/// Relative size (against the largest singular value) below which a
/// singular value of the invariance operator counts as zero.
pub const NULL_TOLERANCE: f64 = 1e-6;

/// Hermitian `H` with `X_j† H X_j = H`, normalized to `|det H| = 1`.
#[derive(Debug, Clone, Serialize)]
pub struct HermitianForm {
    #[serde(serialize_with = "crate::io::ser_cmat")]
    pub h: CMat,
    pub det_sign: i8,
    /// `max_j ‖X_j† H X_j − H‖`.
    pub residual: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl HermitianForm {
    pub fn gap(&self) -> f64 {
        self.sigma2 - self.sigma1
    }

    /// Wraps an arbitrary Hermitian matrix, recording how far it is from invariant.
    pub fn from_matrix(h: CMat, generators: &[CMat]) -> Self {
        let det = h.determinant();
        HermitianForm {
            det_sign: if det.re >= 0.0 { 1 } else { -1 },
            residual: invariance_residual(&h, generators),
            sigma1: f64::NAN,
            sigma2: f64::NAN,
            h,
        }
    }

    /// The pairing `G = adj(H)` on covectors (2×2 forms only).
    pub fn pairing(&self) -> CMat {
        assert_eq!(self.h.nrows(), 2, "pairing is defined for 2x2 forms");
        let h = &self.h;
        CMat::from_row_slice(2, 2, &[h[(1, 1)], -h[(0, 1)], -h[(1, 0)], h[(0, 0)]])
    }
}

pub fn invariance_residual(h: &CMat, generators: &[CMat]) -> f64 {
    generators
        .iter()
        .map(|x| (x.adjoint() * h * x - h).norm())
        .fold(0.0, f64::max)
}

/// Basis of `n×n` Hermitian matrices: real diagonal units, then for each
/// `i < j` the real and imaginary off-diagonal pairs.
fn hermitian_basis(n: usize) -> Vec<CMat> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let mut e = CMat::zeros(n, n);
        e[(i, i)] = C64::new(1.0, 0.0);
        out.push(e);
    }
    for i in 0..n {
        for j in i + 1..n {
            let mut e = CMat::zeros(n, n);
            e[(i, j)] = C64::new(1.0, 0.0);
            e[(j, i)] = C64::new(1.0, 0.0);
            out.push(e);
            let mut e = CMat::zeros(n, n);
            e[(i, j)] = C64::new(0.0, 1.0);
            e[(j, i)] = C64::new(0.0, -1.0);
            out.push(e);
        }
    }
    out
}

fn stacked_operator(generators: &[CMat]) -> Result<(usize, Vec<CMat>, nalgebra::DMatrix<f64>)> {
    let n = generators.first().map_or(0, |g| g.nrows());
    if n == 0 {
        return Err(Error::InvalidConfig("no generators".into()));
    }
    let basis = hermitian_basis(n);
    let rows_per = 2 * n * n;
    let mut a = nalgebra::DMatrix::<f64>::zeros(rows_per * generators.len(), basis.len());
    for (g, x) in generators.iter().enumerate() {
        if x.nrows() != n || x.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: x.nrows(),
            });
        }
        let xa = x.adjoint();
        for (p, e) in basis.iter().enumerate() {
            let d = &xa * e * x - e;
            for (k, v) in d.iter().enumerate() {
                a[(g * rows_per + 2 * k, p)] = v.re;
                a[(g * rows_per + 2 * k + 1, p)] = v.im;
            }
        }
    }
    Ok((n, basis, a))
}

/// Ascending singular values of the invariance operator `H ↦ (X_j† H X_j − H)_j`.
pub fn invariance_singular_values(generators: &[CMat]) -> Result<Vec<f64>> {
    let (_, _, a) = stacked_operator(generators)?;
    Ok(smallest_right_singular(&a).0)
}

/// Solves `X_j† H X_j = H` for Hermitian `H` by SVD of the stacked real
/// operator on the `n²`-dimensional space of Hermitian matrices.
pub fn invariant_form(generators: &[CMat]) -> Result<HermitianForm> {
    invariant_form_with(generators, |_, sigma2, scale| sigma2 > NULL_TOLERANCE * scale)
}

/// Ratio by which `σ₂` must clear the rounding floor `ε·σ_max` (and `σ₁`)
/// for symmetric powers, whose operators span many orders of magnitude.
const SYM_SEPARATION: f64 = 1e4;

fn invariant_form_with(generators: &[CMat], separated: impl Fn(f64, f64, f64) -> bool) -> Result<HermitianForm> {
    let (n, basis, a) = stacked_operator(generators)?;
    let (sigmas, v) = smallest_right_singular(&a);
    let scale = sigmas.last().copied().unwrap_or(1.0).max(1.0);
    let sigma1 = sigmas[0];
    let sigma2 = sigmas.get(1).copied().unwrap_or(f64::INFINITY);
    if !separated(sigma1, sigma2, scale) {
        return Err(Error::IrreducibilityRequired { sigma2 });
    }
    if sigma1 > NULL_TOLERANCE * scale {
        return Err(Error::NotRealOper { sigma1 });
    }

    // Sign convention: positive trace, or else a positive first significant coefficient.
    let vmax = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let trace: f64 = v.iter().take(n).sum();
    let flip = if trace.abs() > 1e-8 * vmax {
        trace < 0.0
    } else {
        v.iter().find(|x| x.abs() > 1e-8 * vmax).is_some_and(|x| *x < 0.0)
    };
    let sign = if flip { -1.0 } else { 1.0 };
    let mut h = CMat::zeros(n, n);
    for (p, e) in basis.iter().enumerate() {
        h += e * C64::new(sign * v[p], 0.0);
    }
    let det = h.determinant();
    let scale_det = det.norm().powf(1.0 / n as f64);
    h /= C64::new(scale_det, 0.0);
    // Restore exact Hermitian symmetry after scaling.
    let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
    Ok(HermitianForm {
        det_sign: if det.re >= 0.0 { 1 } else { -1 },
        residual: invariance_residual(&h, generators),
        sigma1,
        sigma2,
        h,
    })
}

/// Invariant form of the monodromy: `M_j† H M_j = H`.
pub fn invariant_hermitian_form(rep: &MonodromyRep) -> Result<HermitianForm> {
    let gens: Vec<CMat> = rep.generators.iter().map(from_mat2).collect();
    invariant_form(&gens)
}

/// Options shared by all section evaluations.
#[derive(Debug, Clone, Copy)]
pub struct SectionOptions {
    pub tol: f64,
    /// Grid points closer than this to a puncture are skipped; default 0.02 × min puncture distance.
    pub clearance: Option<f64>,
    /// Radius at which continuation paths detour around punctures; default 0.25 × min puncture distance.
    pub detour: Option<f64>,
}

impl Default for SectionOptions {
    fn default() -> Self {
        SectionOptions {
            tol: 1e-12,
            clearance: None,
            detour: None,
        }
    }
}

/// Analytic continuation of the solution basis from the basepoint.
#[derive(Debug, Clone)]
pub struct Continuation {
    system: LinearSystemSpec,
    basepoint: C64,
    punctures: Vec<C64>,
    detour: f64,
    clearance: f64,
    tol: f64,
}

impl Continuation {
    pub fn new(config: &OperConfig, basepoint: C64, opts: &SectionOptions) -> Result<Self> {
        let punctures = config.punctures().to_vec();
        let mut dmin = f64::INFINITY;
        for (i, p) in punctures.iter().enumerate() {
            for q in &punctures[i + 1..] {
                dmin = dmin.min((p - q).norm());
            }
        }
        if !dmin.is_finite() {
            dmin = 1.0;
        }
        let detour = opts.detour.unwrap_or(0.25 * dmin);
        let clearance = opts.clearance.unwrap_or(0.02 * dmin).min(detour);
        let system = config.to_first_order_system()?.with_clearance(clearance);
        Ok(Continuation {
            system,
            basepoint,
            punctures,
            detour,
            clearance,
            tol: opts.tol,
        })
    }

    pub fn basepoint(&self) -> C64 {
        self.basepoint
    }

    pub fn clearance(&self) -> f64 {
        self.clearance
    }

    /// Deterministic continuation path: straight from the basepoint with
    /// arc detours; a target inside a detour circle is reached by following
    /// that circle to the radial point and then going straight in.
    pub fn path_to(&self, z: C64) -> Result<PathSpec> {
        for (k, &q) in self.punctures.iter().enumerate() {
            let d = (z - q).norm();
            if d < self.clearance {
                return Err(Error::ClearanceViolation {
                    point: q,
                    distance: d,
                    clearance: self.clearance,
                });
            }
            if d < self.detour {
                let others: Vec<C64> = self
                    .punctures
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != k)
                    .map(|(_, &p)| p)
                    .collect();
                let entry = q + (self.basepoint - q) * (self.detour / (self.basepoint - q).norm());
                let radial = q + (z - q) * (self.detour / d);
                let approach = detour_line(self.basepoint, entry, &others, self.detour)?;
                let turn = ((radial - q) / (entry - q)).arg();
                let sweep = if turn == std::f64::consts::PI { -turn } else { turn };
                let tail = PathSpec::builder(entry)
                    .arc_to(q, sweep, radial)
                    .line_to(z)
                    .build();
                return approach.then(&tail);
            }
        }
        detour_line(self.basepoint, z, &self.punctures, self.detour)
    }

    /// Transport of `(y, y')` along `path` (which must start at the basepoint
    /// or wherever `initial` is valued).
    pub fn transport(&self, path: &PathSpec, initial: &CMat) -> Result<CMat> {
        transport(&self.system, path, initial, self.tol)
    }

    /// Values `(y₁(z), y₂(z))` of the basis solutions continued along `path`.
    pub fn covector_along(&self, path: &PathSpec) -> Result<[C64; 2]> {
        if path.start() != self.basepoint {
            return Err(Error::DisjointPaths {
                end: self.basepoint,
                start: path.start(),
            });
        }
        let t = self.transport(path, &CMat::identity(2, 2))?;
        Ok([t[(0, 0)], t[(0, 1)]])
    }

    pub fn covector(&self, z: C64) -> Result<[C64; 2]> {
        self.covector_along(&self.path_to(z)?)
    }
}

/// `ℓ G ℓ†` for a covector and Hermitian pairing.
fn quadratic(l: &[C64], g: &CMat) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for (a, la) in l.iter().enumerate() {
        for (b, lb) in l.iter().enumerate() {
            acc += la * g[(a, b)] * lb.conj();
        }
    }
    acc
}

/// Coefficients of `∏ (ℓ₁ u_i + ℓ₂ v_i)` in powers of `ℓ₂`.
fn linear_product(factors: impl Iterator<Item = (C64, C64)>) -> Vec<C64> {
    let mut poly = vec![C64::new(1.0, 0.0)];
    for (u, v) in factors {
        let mut next = vec![C64::new(0.0, 0.0); poly.len() + 1];
        for (k, c) in poly.iter().enumerate() {
            next[k] += c * u;
            next[k + 1] += c * v;
        }
        poly = next;
    }
    poly
}

/// Monomial covector `(ℓ₁^{m−k} ℓ₂^k)_k`.
pub fn monomials(l: [C64; 2], m: usize) -> Vec<C64> {
    (0..=m).map(|k| l[0].powu((m - k) as u32) * l[1].powu(k as u32)).collect()
}

/// Matrix `S` with `monomials(ℓM) = monomials(ℓ) S` (as row vectors).
pub fn sym_power_matrix(mat: &CMat, m: usize) -> CMat {
    let (a, b, c, d) = (mat[(0, 0)], mat[(1, 0)], mat[(0, 1)], mat[(1, 1)]);
    let mut s = CMat::zeros(m + 1, m + 1);
    for k in 0..=m {
        let col = linear_product(
            std::iter::repeat_n((a, b), m - k)
                .chain(std::iter::repeat_n((c, d), k)),
        );
        for (j, v) in col.into_iter().enumerate() {
            s[(j, k)] = v;
        }
    }
    s
}

/// Pairing `K` on monomial covectors with `monomials(ℓ) K monomials(ℓ)† = (ℓ G ℓ†)^m`.
pub fn induced_pairing(g: &CMat, m: usize) -> CMat {
    let mut k = CMat::zeros(1, 1);
    k[(0, 0)] = C64::new(1.0, 0.0);
    for _ in 0..m {
        let n = k.nrows();
        let mut next = CMat::zeros(n + 1, n + 1);
        for i in 0..n {
            for j in 0..n {
                for a in 0..2 {
                    for b in 0..2 {
                        next[(i + a, j + b)] += k[(i, j)] * g[(a, b)];
                    }
                }
            }
        }
        k = next;
    }
    k
}

/// Invariant pairing for the `m`-th symmetric power found directly, by SVD
/// of `S_j K S_j† = K`, without going through the 2×2 form.
pub fn sym_power_invariant_form(rep: &MonodromyRep, m: usize) -> Result<HermitianForm> {
    let gens: Vec<CMat> = rep
        .generators
        .iter()
        .map(|g| sym_power_matrix(&from_mat2(g), m).adjoint())
        .collect();
    invariant_form_with(&gens, |sigma1, sigma2, scale| {
        sigma2 > SYM_SEPARATION * sigma1.max(f64::EPSILON * scale)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    #[serde(serialize_with = "crate::io::ser_c64")]
    pub z: C64,
    pub phi: f64,
}

/// Samples of `Φ` in the affine chart with weight `(m/2, m/2)`.
#[derive(Debug, Clone, Serialize)]
pub struct EigenSection {
    pub weight: (f64, f64),
    pub samples: Vec<Sample>,
    /// Grid points not evaluated (too close to a puncture).
    #[serde(serialize_with = "crate::io::ser_c64_vec")]
    pub skipped: Vec<C64>,
    /// Largest `|Im ℓGℓ†|` encountered; rounding only.
    pub max_imag: f64,
    /// Samples with `|Φ| ≤ 1e−12 · max|Φ|`.
    #[serde(serialize_with = "crate::io::ser_c64_vec")]
    pub near_zero: Vec<C64>,
}

impl EigenSection {
    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.phi).collect()
    }

    fn from_results(m: usize, grid: &[C64], results: Vec<Result<C64>>) -> Result<Self> {
        let mut samples = Vec::new();
        let mut skipped = Vec::new();
        let mut max_imag = 0.0_f64;
        for (&z, r) in grid.iter().zip(results) {
            match r {
                Ok(v) => {
                    max_imag = max_imag.max(v.im.abs());
                    samples.push(Sample { z, phi: v.re });
                }
                Err(Error::ClearanceViolation { point, distance, .. }) => {
                    log::warn!("skipping grid point {z}: {distance:.3e} from puncture {point}");
                    skipped.push(z);
                }
                Err(e) => return Err(e),
            }
        }
        let peak = samples.iter().fold(0.0_f64, |a, s| a.max(s.phi.abs()));
        let near_zero = samples
            .iter()
            .filter(|s| s.phi.abs() <= 1e-12 * peak)
            .map(|s| s.z)
            .collect();
        let w = m as f64 / 2.0;
        Ok(EigenSection {
            weight: (w, w),
            samples,
            skipped,
            max_imag,
            near_zero,
        })
    }
}

/// Section `monomials(ℓ_z) K monomials(ℓ_z)†` for an explicit `(m+1)×(m+1)` pairing.
pub fn section_with_pairing(
    config: &OperConfig,
    rep: &MonodromyRep,
    pairing: &CMat,
    m: usize,
    grid: &[C64],
    opts: &SectionOptions,
) -> Result<EigenSection> {
    if pairing.nrows() != m + 1 || pairing.ncols() != m + 1 {
        return Err(Error::DimensionMismatch {
            expected: m + 1,
            found: pairing.nrows(),
        });
    }
    let cont = Continuation::new(config, rep.basepoint, opts)?;
    let results: Vec<Result<C64>> = grid
        .par_iter()
        .map(|&z| {
            let l = cont.covector(z)?;
            Ok(quadratic(&monomials(l, m), pairing))
        })
        .collect();
    EigenSection::from_results(m, grid, results)
}

/// `Φ(z) = ℓ_z adj(H) ℓ_z†` on the grid, weight `(1/2, 1/2)`.
pub fn eigenvalue_section(
    config: &OperConfig,
    rep: &MonodromyRep,
    form: &HermitianForm,
    grid: &[C64],
    opts: &SectionOptions,
) -> Result<EigenSection> {
    section_with_pairing(config, rep, &form.pairing(), 1, grid, opts)
}

/// `Φ_m` from the pairing induced on `Sym^m`, weight `(m/2, m/2)`.
pub fn sym_power_section(
    config: &OperConfig,
    rep: &MonodromyRep,
    form: &HermitianForm,
    m: usize,
    grid: &[C64],
    opts: &SectionOptions,
) -> Result<EigenSection> {
    section_with_pairing(config, rep, &induced_pairing(&form.pairing(), m), m, grid, opts)
}

/// Values of `Φ` at the common endpoint of two continuation paths.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PathPairDefect {
    pub phi_a: f64,
    pub phi_b: f64,
    /// `max(|Φ_a|, |Φ_b|, ‖ℓ_a‖²‖G‖, ‖ℓ_b‖²‖G‖)`: the size of the terms
    /// summed in `ℓ G ℓ†`, which is what rounding is proportional to.
    pub scale: f64,
    /// `|Φ_a − Φ_b| / scale`.
    pub defect: f64,
}

pub fn check_single_valued(
    config: &OperConfig,
    rep: &MonodromyRep,
    form: &HermitianForm,
    point: C64,
    path_a: &PathSpec,
    path_b: &PathSpec,
    opts: &SectionOptions,
) -> Result<PathPairDefect> {
    for p in [path_a, path_b] {
        if p.end() != point {
            return Err(Error::DisjointPaths {
                end: p.end(),
                start: point,
            });
        }
    }
    let cont = Continuation::new(config, rep.basepoint, opts)?;
    let g = form.pairing();
    let g_norm = g.norm();
    let la = cont.covector_along(path_a)?;
    let lb = cont.covector_along(path_b)?;
    let size = |l: &[C64; 2]| (l[0].norm_sqr() + l[1].norm_sqr()) * g_norm;
    let phi_a = quadratic(&la, &g).re;
    let phi_b = quadratic(&lb, &g).re;
    let scale = phi_a.abs().max(phi_b.abs()).max(size(&la)).max(size(&lb)).max(f64::MIN_POSITIVE);
    Ok(PathPairDefect { phi_a, phi_b, scale, defect: (phi_a - phi_b).abs() / scale })
}

/// Samples `Φ` on an `n×n` lattice `center + h(c − (n−1)/2) + ih(r − (n−1)/2)`
/// stored row by row. The basis is continued once to the centre and from
/// there along short straight segments, so errors from the long path are
/// common to every lattice point.
pub fn stencil_section(
    config: &OperConfig,
    rep: &MonodromyRep,
    form: &HermitianForm,
    center: C64,
    h: f64,
    n: usize,
    opts: &SectionOptions,
) -> Result<EigenSection> {
    let cont = Continuation::new(config, rep.basepoint, opts)?;
    let t0 = cont.transport(&cont.path_to(center)?, &CMat::identity(2, 2))?;
    let g = form.pairing();
    let grid = lattice(center, h, n);
    let results: Vec<Result<C64>> = grid
        .iter()
        .map(|&z| {
            let t = cont.transport(&PathSpec::line(center, z), &t0)?;
            let l = [t[(0, 0)], t[(0, 1)]];
            Ok(quadratic(&l, &g))
        })
        .collect();
    EigenSection::from_results(1, &grid, results)
}

/// Row-major `n×n` lattice with spacing `h` centred at `center`.
pub fn lattice(center: C64, h: f64, n: usize) -> Vec<C64> {
    let half = (n as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            out.push(center + C64::new(h * (c as f64 - half), h * (r as f64 - half)));
        }
    }
    out
}

/// Relative residuals of `∂_z²Φ + tΦ = 0` and its conjugate on a stencil.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OdeResidual {
    pub holomorphic: f64,
    pub antiholomorphic: f64,
}

impl OdeResidual {
    pub fn max(&self) -> f64 {
        self.holomorphic.max(self.antiholomorphic)
    }
}

/// Applies `∂_z² + t` and `∂_z̄² + t̄` to a lattice section by central
/// differences, `∂_z² = (∂_x² − 2i∂_x∂_y − ∂_y²)/4`, at every interior point.
/// Each residual is `|∂²Φ + tΦ| / (|tΦ| + |∂²Φ|)`; the maximum is returned.
pub fn verify_oper_ode(section: &EigenSection, config: &OperConfig, h: f64) -> Result<OdeResidual> {
    let count = section.samples.len();
    let n = (count as f64).sqrt().round() as usize;
    if n < 5 || n * n != count || !section.skipped.is_empty() {
        return Err(Error::StencilTooCoarse(format!(
            "need a complete n×n lattice with n ≥ 5, got {count} samples"
        )));
    }
    let z0 = section.samples[0].z;
    for r in 0..n {
        for c in 0..n {
            let expect = z0 + C64::new(h * c as f64, h * r as f64);
            if (section.samples[r * n + c].z - expect).norm() > 1e-9 * h {
                return Err(Error::StencilTooCoarse(format!(
                    "sample ({r},{c}) is not on the lattice of spacing {h}"
                )));
            }
        }
    }
    let f = |r: usize, c: usize| section.samples[r * n + c].phi;
    let mut hol = 0.0_f64;
    let mut anti = 0.0_f64;
    let rel = |num: C64, a: C64, b: C64| {
        let den = a.norm() + b.norm();
        if num.norm() == 0.0 {
            0.0
        } else {
            num.norm() / den
        }
    };
    for r in 1..n - 1 {
        for c in 1..n - 1 {
            let phi = f(r, c);
            let dxx = (f(r, c + 1) - 2.0 * phi + f(r, c - 1)) / (h * h);
            let dyy = (f(r + 1, c) - 2.0 * phi + f(r - 1, c)) / (h * h);
            let dxy = (f(r + 1, c + 1) - f(r - 1, c + 1) - f(r + 1, c - 1) + f(r - 1, c - 1)) / (4.0 * h * h);
            let t = config.evaluate_t(section.samples[r * n + c].z)?;
            let dzz = C64::new(dxx - dyy, -2.0 * dxy) / 4.0;
            let dbb = dzz.conj();
            let tp = t * phi;
            hol = hol.max(rel(dzz + tp, dzz, tp));
            anti = anti.max(rel(dbb + tp.conj(), dbb, tp));
        }
    }
    Ok(OdeResidual {
        holomorphic: hol,
        antiholomorphic: anti,
    })
}

/// Least-squares scalar `c` with `a ≈ c·b` and the resulting deviation
/// `max_i |a_i − c b_i| / max_i |a_i|`.
pub fn scalar_alignment(a: &[f64], b: &[f64]) -> (f64, f64) {
    let ab: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let bb: f64 = b.iter().map(|y| y * y).sum();
    let c = if bb > 0.0 { ab / bb } else { 0.0 };
    let peak = a.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let dev = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - c * y).abs())
        .fold(0.0_f64, f64::max);
    (c, if peak > 0.0 { dev / peak } else { dev })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Mat2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn su2(a: C64, b: C64) -> Mat2 {
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        let (a, b) = (a / n, b / n);
        Mat2::new(a, b, -b.conj(), a.conj())
    }

    #[test]
    fn unitary_generators_give_identity_form() {
        let rep = MonodromyRep::from_generators(vec![su2(c(0.3, 0.4), c(0.5, -0.2)), su2(c(-0.1, 0.7), c(0.2, 0.6))]);
        let f = invariant_hermitian_form(&rep).unwrap();
        assert_eq!(f.det_sign, 1);
        assert!((&f.h - CMat::identity(2, 2)).norm() < 1e-12, "{}", f.h);
        assert!(f.residual < 1e-13);
    }

    #[test]
    fn trivial_and_abelian_reps_are_rejected() {
        let rep = MonodromyRep::from_generators(vec![Mat2::identity(), Mat2::identity()]);
        assert!(matches!(invariant_hermitian_form(&rep), Err(Error::IrreducibilityRequired { .. })));
        let d = |x: f64| Mat2::new(c(x, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0 / x, 0.0));
        let rep = MonodromyRep::from_generators(vec![d(2.0), d(3.0)]);
        assert!(matches!(invariant_hermitian_form(&rep), Err(Error::IrreducibilityRequired { .. })));
    }

    #[test]
    fn non_real_rep_is_rejected() {
        let m1 = Mat2::new(c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
        let m2 = Mat2::new(c(1.0, 0.0), c(0.0, 0.0), c(0.3, 0.7), c(1.0, 0.0));
        let rep = MonodromyRep::from_generators(vec![m1, m2]);
        assert!(matches!(invariant_hermitian_form(&rep), Err(Error::NotRealOper { .. })));
    }

    #[test]
    fn real_split_rep_has_indefinite_form() {
        let m1 = Mat2::new(c(1.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0));
        let m2 = Mat2::new(c(1.0, 0.0), c(0.0, 0.0), c(-2.0, 0.0), c(1.0, 0.0));
        let rep = MonodromyRep::from_generators(vec![m1, m2]);
        let f = invariant_hermitian_form(&rep).unwrap();
        assert_eq!(f.det_sign, -1);
        assert!(f.residual < 1e-12);
        assert!((f.h.determinant().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sym_power_matrix_is_multiplicative() {
        let a = CMat::from_row_slice(2, 2, &[c(1.0, 0.5), c(2.0, 0.0), c(0.3, -1.0), c(0.7, 0.2)]);
        let b = CMat::from_row_slice(2, 2, &[c(0.2, 0.0), c(-1.0, 0.1), c(0.5, 0.5), c(1.1, 0.0)]);
        for m in 0..4 {
            let lhs = sym_power_matrix(&(&a * &b), m);
            let rhs = sym_power_matrix(&a, m) * sym_power_matrix(&b, m);
            assert!((lhs - rhs).norm() < 1e-12);
        }
        assert_eq!(sym_power_matrix(&a, 1), a);
    }

    #[test]
    fn induced_pairing_is_power_of_form() {
        let g = CMat::from_row_slice(2, 2, &[c(0.5, 0.0), c(1.0, -2.0), c(1.0, 2.0), c(-0.3, 0.0)]);
        let l = [c(0.4, -1.2), c(2.0, 0.3)];
        let base = quadratic(&l, &g);
        for m in 0..5 {
            let k = induced_pairing(&g, m);
            let v = quadratic(&monomials(l, m), &k);
            assert!((v - base.powu(m as u32)).norm() < 1e-12 * (1.0 + base.norm().powi(m as i32)));
        }
    }

    #[test]
    fn alignment_recovers_scale() {
        let b = [1.0, -2.0, 0.5];
        let a: Vec<f64> = b.iter().map(|x| 3.0 * x).collect();
        let (s, dev) = scalar_alignment(&a, &b);
        assert!((s - 3.0).abs() < 1e-15 && dev < 1e-15);
    }
}
