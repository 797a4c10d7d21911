//! Search for accessory parameters with real monodromy.
//!
//! A grid scan of `r(μ) = ‖Im tr(words)‖²` proposes candidates, Gauss–Newton
//! on the residual vector polishes them, and the invariant-form spectrum
//! certifies each converged point.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::monodromy::{default_words, irreducibility_margin, monodromy, reality_residual_with, MonodromyRep, Word};
use crate::numeric::{cmp_re_im, from_mat2, CMat, C64};
use crate::oper::OperFamily;
use crate::section::invariance_singular_values;

/// Axis-aligned rectangle `[re_min, re_max] × [im_min, im_max]` in the μ-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Rect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        if !(re_min <= re_max && im_min <= im_max) || ![re_min, re_max, im_min, im_max].iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "bad rectangle [{re_min}, {re_max}] x [{im_min}, {im_max}]"
            )));
        }
        Ok(Rect {
            re_min,
            re_max,
            im_min,
            im_max,
        })
    }

    pub fn area(&self) -> f64 {
        (self.re_max - self.re_min) * (self.im_max - self.im_min)
    }

    pub fn contains(&self, z: C64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    /// Cell centres, row by row (`Im` outer, `Re` inner).
    pub fn cell_centers(&self, nx: usize, ny: usize) -> Vec<C64> {
        let dx = (self.re_max - self.re_min) / nx as f64;
        let dy = (self.im_max - self.im_min) / ny as f64;
        let mut out = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                out.push(C64::new(
                    self.re_min + (i as f64 + 0.5) * dx,
                    self.im_min + (j as f64 + 0.5) * dy,
                ));
            }
        }
        out
    }
}

/// Smallest scan grid per axis; coarser grids alias the residual valleys.
pub const MIN_SCAN_GRID: usize = 8;

#[derive(Debug, Clone)]
pub struct FinderOptions {
    /// Transport tolerance while scanning.
    pub scan_tol: f64,
    /// Transport tolerance while polishing and certifying.
    pub tol: f64,
    pub dedup_radius: f64,
    pub max_iterations: usize,
    /// Gauss–Newton stops once the residual norm falls below this.
    pub target_residual: f64,
    /// A hit counts as converged below this residual ...
    pub converged_residual: f64,
    /// ... and with at least this gap in the invariant-form spectrum.
    pub min_gap: f64,
    /// Hits with irreducibility margin at or below this are flagged.
    pub min_margin: f64,
    /// Trace words; `None` means the default set.
    pub words: Option<Vec<Word>>,
}

impl Default for FinderOptions {
    fn default() -> Self {
        FinderOptions {
            scan_tol: 1e-10,
            tol: 1e-14,
            dedup_radius: 1e-6,
            max_iterations: 50,
            target_residual: 1e-10,
            converged_residual: 1e-9,
            min_gap: 1e-4,
            min_margin: 1e-3,
            words: None,
        }
    }
}

impl FinderOptions {
    fn words_for(&self, rep: &MonodromyRep) -> Vec<Word> {
        self.words.clone().unwrap_or_else(|| default_words(rep.len()))
    }
}

/// Reality residual vector of the family member at `mu`.
pub fn residual_vector(family: &OperFamily, mu: C64, opts: &FinderOptions) -> Result<(Vec<f64>, MonodromyRep)> {
    residual_vector_at_tol(family, mu, opts, opts.tol)
}

fn residual_vector_at_tol(
    family: &OperFamily,
    mu: C64,
    opts: &FinderOptions,
    tol: f64,
) -> Result<(Vec<f64>, MonodromyRep)> {
    let cfg = family.config_at(mu);
    let rep = monodromy(&cfg, tol)?;
    let r = reality_residual_with(&rep, &opts.words_for(&rep))?;
    Ok((r, rep))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One evaluation of the scan objective.
#[derive(Debug, Clone, Serialize)]
pub struct ScanRecord {
    #[serde(serialize_with = "crate::io::ser_c64")]
    pub mu: C64,
    /// `‖residual‖²`, or `None` if the monodromy computation failed.
    pub residual: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanResult {
    #[serde(serialize_with = "crate::io::ser_c64_vec")]
    pub candidates: Vec<C64>,
    pub rigid: bool,
    pub log: Vec<ScanRecord>,
}

/// Evaluates the objective on the cell centres of an `nx × ny` grid and
/// returns interior local minima (against all eight neighbours) that lie
/// below the median, sorted by `(Re μ, Im μ)`.
pub fn scan(family: &OperFamily, rect: &Rect, grid: (usize, usize), opts: &FinderOptions) -> Result<ScanResult> {
    if family.is_rigid() {
        return Ok(ScanResult {
            candidates: vec![family.base_mu()],
            rigid: true,
            log: vec![],
        });
    }
    let (nx, ny) = grid;
    if nx < MIN_SCAN_GRID || ny < MIN_SCAN_GRID {
        return Err(Error::InvalidConfig(format!(
            "scan grid must be at least {MIN_SCAN_GRID}x{MIN_SCAN_GRID}, got {nx}x{ny}"
        )));
    }
    if rect.area() == 0.0 {
        return Ok(ScanResult {
            candidates: vec![],
            rigid: false,
            log: vec![],
        });
    }
    let points = rect.cell_centers(nx, ny);
    let log: Vec<ScanRecord> = points
        .par_iter()
        .map(|&mu| match residual_vector_at_tol(family, mu, opts, opts.scan_tol) {
            Ok((r, _)) => ScanRecord {
                mu,
                residual: Some(r.iter().map(|x| x * x).sum()),
                error: None,
            },
            Err(e) => {
                log::warn!("scan cell at mu = {mu} skipped: {e}");
                ScanRecord {
                    mu,
                    residual: None,
                    error: Some(e.to_string()),
                }
            }
        })
        .collect();

    let values: Vec<f64> = log.iter().map(|r| r.residual.unwrap_or(f64::INFINITY)).collect();
    let mut finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    finite.sort_by(f64::total_cmp);
    let median = if finite.is_empty() { 0.0 } else { finite[finite.len() / 2] };

    let mut candidates = Vec::new();
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let v = values[j * nx + i];
            if !(v < median) {
                continue;
            }
            // Ties go to the earlier cell so a flat pair still yields one candidate.
            let here = j * nx + i;
            let is_min = (-1i64..=1).all(|dj| {
                (-1i64..=1).all(|di| {
                    let k = (j as i64 + dj) as usize * nx + (i as i64 + di) as usize;
                    k == here || v < values[k] || (v == values[k] && here < k)
                })
            });
            if is_min {
                candidates.push(points[j * nx + i]);
            }
        }
    }
    candidates.sort_by(cmp_re_im);
    Ok(ScanResult {
        candidates,
        rigid: false,
        log,
    })
}

/// A polished accessory parameter.
#[derive(Debug, Clone, Serialize)]
pub struct RealOperHit {
    #[serde(serialize_with = "crate::io::ser_c64")]
    pub mu: C64,
    #[serde(serialize_with = "crate::io::ser_c64")]
    pub start: C64,
    pub residual_norm: f64,
    /// `σ₂ − σ₁` of the invariant-form operator.
    pub svd_gap: f64,
    pub sigma1: f64,
    /// Condition number of the residual Jacobian; `None` without a free parameter.
    pub jacobian_condition: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub irreducibility_margin: f64,
    /// Set when the irreducibility margin is too small to trust the hit.
    pub flagged: bool,
}

/// Central-difference Jacobian of the residual in `(Re μ, Im μ)`.
fn jacobian(family: &OperFamily, mu: C64, opts: &FinderOptions) -> Result<nalgebra::DMatrix<f64>> {
    let h = 1e-6 * (1.0 + mu.norm());
    let mut cols = Vec::with_capacity(2);
    for dir in [C64::new(h, 0.0), C64::new(0.0, h)] {
        let (rp, _) = residual_vector(family, mu + dir, opts)?;
        let (rm, _) = residual_vector(family, mu - dir, opts)?;
        cols.push(rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<_>>());
    }
    let m = cols[0].len();
    Ok(nalgebra::DMatrix::from_fn(m, 2, |i, j| cols[j][i]))
}

fn certify(rep: &MonodromyRep) -> Result<(f64, f64)> {
    let gens: Vec<CMat> = rep.generators.iter().map(from_mat2).collect();
    let s = invariance_singular_values(&gens)?;
    Ok((s[0], s.get(1).copied().unwrap_or(f64::INFINITY) - s[0]))
}

/// Damped Gauss–Newton from `mu0`. Runs out of iterations gracefully: the
/// best iterate is returned with `converged = false`.
pub fn polish(family: &OperFamily, mu0: C64, opts: &FinderOptions) -> Result<RealOperHit> {
    if !(mu0.re.is_finite() && mu0.im.is_finite()) {
        return Err(Error::InvalidConfig(format!("non-finite starting point {mu0}")));
    }
    let mut mu = if family.is_rigid() { family.base_mu() } else { mu0 };
    let (mut r, mut rep) = residual_vector(family, mu, opts)?;
    let mut rn = norm(&r);
    let mut iterations = 0;
    let mut condition = None;

    if !family.is_rigid() {
        while rn >= opts.target_residual && iterations < opts.max_iterations {
            iterations += 1;
            let j = jacobian(family, mu, opts)?;
            let svd = j.clone().svd(true, true);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            if !(smin > 1e-14 * smax) {
                return Err(Error::SingularJacobian(mu));
            }
            let rhs = nalgebra::DVector::from_iterator(r.len(), r.iter().map(|x| -x));
            let step = svd.solve(&rhs, 0.0).map_err(|_| Error::SingularJacobian(mu))?;
            let delta = C64::new(step[0], step[1]);
            let mut lambda = 1.0;
            let mut improved = false;
            for _ in 0..30 {
                let trial = mu + delta * lambda;
                if let Ok((rt, rept)) = residual_vector(family, trial, opts) {
                    let tn = norm(&rt);
                    if tn < rn {
                        mu = trial;
                        r = rt;
                        rn = tn;
                        rep = rept;
                        improved = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !improved {
                break;
            }
        }
        let j = jacobian(family, mu, opts)?;
        let s = j.singular_values();
        condition = Some(s.max() / s.min());
    }

    let (sigma1, svd_gap) = certify(&rep)?;
    let margin = irreducibility_margin(&rep);
    Ok(RealOperHit {
        mu,
        start: mu0,
        residual_norm: rn,
        svd_gap,
        sigma1,
        jacobian_condition: condition,
        converged: rn < opts.converged_residual && svd_gap > opts.min_gap,
        iterations,
        irreducibility_margin: margin,
        flagged: margin <= opts.min_margin,
    })
}

/// A candidate that did not polish into a hit.
#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    #[serde(serialize_with = "crate::io::ser_c64")]
    pub start: C64,
    pub error: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Enumeration {
    pub hits: Vec<RealOperHit>,
    pub failures: Vec<Failure>,
    #[serde(skip)]
    pub scan: ScanResult,
}

fn polish_all(
    family: &OperFamily,
    rect: &Rect,
    rigid: bool,
    starts: &[C64],
    opts: &FinderOptions,
    hits: &mut Vec<RealOperHit>,
    failures: &mut Vec<Failure>,
) {
    let polished: Vec<(C64, Result<RealOperHit>)> =
        starts.par_iter().map(|&mu0| (mu0, polish(family, mu0, opts))).collect();
    for (start, outcome) in polished {
        match outcome {
            Ok(hit) if !hit.converged => failures.push(Failure {
                start,
                error: Error::NoConvergence {
                    residual: hit.residual_norm,
                }
                .to_string(),
            }),
            Ok(hit) if !rigid && !rect.contains(hit.mu) => failures.push(Failure {
                start,
                error: format!("converged outside the rectangle at {}", hit.mu),
            }),
            Ok(hit) => hits.push(hit),
            Err(e) => failures.push(Failure {
                start,
                error: e.to_string(),
            }),
        }
    }
}

/// Scan, polish every candidate, keep converged hits inside the rectangle,
/// and merge hits closer than the dedup radius. For conjugation-symmetric
/// families the mirror image of every hit is polished as well.
pub fn enumerate_real_opers(
    family: &OperFamily,
    rect: &Rect,
    grid: (usize, usize),
    opts: &FinderOptions,
) -> Result<Enumeration> {
    let scan = scan(family, rect, grid, opts)?;
    let mut hits: Vec<RealOperHit> = Vec::new();
    let mut failures = Vec::new();
    polish_all(family, rect, scan.rigid, &scan.candidates, opts, &mut hits, &mut failures);
    // The residual landscape is not symmetric even when the hit set is
    // (the loop basis is not), so a shallow valley can hide the mirror hit.
    if family.is_conjugation_symmetric() && !scan.rigid {
        let mirrors: Vec<C64> = hits
            .iter()
            .map(|h| h.mu.conj())
            .filter(|m| rect.contains(*m) && hits.iter().all(|h| (h.mu - m).norm() >= opts.dedup_radius))
            .collect();
        polish_all(family, rect, scan.rigid, &mirrors, opts, &mut hits, &mut failures);
    }
    hits.sort_by(|a, b| cmp_re_im(&a.mu, &b.mu));
    let mut merged: Vec<RealOperHit> = Vec::new();
    for hit in hits {
        match merged.iter_mut().find(|m| (m.mu - hit.mu).norm() < opts.dedup_radius) {
            Some(m) => {
                if hit.residual_norm < m.residual_norm {
                    *m = hit;
                }
            }
            None => merged.push(hit),
        }
    }
    merged.sort_by(|a, b| cmp_re_im(&a.mu, &b.mu));
    Ok(Enumeration {
        hits: merged,
        failures,
        scan,
    })
}

/// Ratio `‖r(μ* + d·e^{iθ})‖ / ‖r(μ*)‖` minimized over eight directions.
pub fn isolation_factor(family: &OperFamily, hit: &RealOperHit, distance: f64, opts: &FinderOptions) -> Result<f64> {
    let base = hit.residual_norm.max(f64::MIN_POSITIVE);
    let mut worst = f64::INFINITY;
    for k in 0..8 {
        let dir = C64::from_polar(distance, std::f64::consts::TAU * k as f64 / 8.0);
        let (r, _) = residual_vector(family, hit.mu + dir, opts)?;
        worst = worst.min(norm(&r) / base);
    }
    Ok(worst)
}
