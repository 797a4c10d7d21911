//! Monodromy of `y'' + t y = 0` around the finite punctures, trace
//! coordinates, and the residuals that detect real monodromy.
//!
//! Conventions: `M_j` is the transport of initial data `(y, y')(z₀)` once
//! around loop `j`, and traversing loop `a` then loop `b` transports by
//! `M_b M_a`. Loops are ordered counterclockwise as seen from the basepoint,
//! so `M_{n−1} ⋯ M_0` is the transport around one large loop enclosing every
//! finite puncture.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{det2, frobenius2, sl2_inverse, to_mat2, trace2, CMat, Mat2, C64};
use crate::oper::OperConfig;
use crate::transport::{circle_loop, circle_loop_avoiding, transport, winding_number, PathSpec};

/// Generators beyond this product defect indicate a bad loop basis or tolerance.
pub const DEFECT_THRESHOLD: f64 = 1e-5;

/// Basepoint and one certified loop per finite puncture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoopBasis {
    pub basepoint: C64,
    pub radius: f64,
    pub clearance: f64,
    /// `loops[k]` winds once around `punctures[order[k]]`.
    pub order: Vec<usize>,
    pub loops: Vec<PathSpec>,
}

fn mean_and_spread(points: &[C64]) -> (C64, f64) {
    if points.is_empty() {
        return (C64::new(0.0, 0.0), 1.0);
    }
    let mean = points.iter().sum::<C64>() / points.len() as f64;
    let spread = points.iter().map(|p| (p - mean).norm()).fold(0.0, f64::max);
    (mean, if spread > 0.0 { spread } else { 1.0 })
}

fn min_pairwise(points: &[C64]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            let d = (p - q).norm();
            best = Some(best.map_or(d, |b: f64| b.min(d)));
        }
    }
    best
}

impl LoopBasis {
    /// Default basis: basepoint below the punctures at `mean − 2i·spread`.
    pub fn standard(punctures: &[C64]) -> Result<Self> {
        let (mean, spread) = mean_and_spread(punctures);
        LoopBasis::with_basepoint(punctures, mean - C64::new(0.0, 2.0 * spread))
    }

    /// Circle loops of radius `0.4 × (min puncture distance)` ordered by the
    /// argument of `z_j − basepoint`, ties broken by `|z_j|`. Legs that would
    /// pass another puncture detour around it at the same radius.
    pub fn with_basepoint(punctures: &[C64], basepoint: C64) -> Result<Self> {
        let (_, spread) = mean_and_spread(punctures);
        let radius = 0.4 * min_pairwise(punctures).unwrap_or(spread);
        let mut order: Vec<usize> = (0..punctures.len()).collect();
        order.sort_by(|&a, &b| {
            let aa = (punctures[a] - basepoint).arg();
            let ab = (punctures[b] - basepoint).arg();
            aa.total_cmp(&ab)
                .then(punctures[a].norm().total_cmp(&punctures[b].norm()))
        });
        let clearance = punctures
            .iter()
            .enumerate()
            .map(|(j, p)| {
                let nearest = punctures
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != j)
                    .map(|(_, q)| (p - q).norm())
                    .fold(f64::INFINITY, f64::min);
                if nearest.is_finite() {
                    0.5 * (nearest - radius)
                } else {
                    0.5 * radius
                }
            })
            .fold(f64::INFINITY, f64::min)
            .min(radius);
        let loops = order
            .iter()
            .map(|&j| {
                let others: Vec<C64> = punctures
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != j)
                    .map(|(_, &q)| q)
                    .collect();
                circle_loop_avoiding(punctures[j], basepoint, radius, &others, radius)
            })
            .collect::<Result<Vec<_>>>()?;
        let basis = LoopBasis {
            basepoint,
            radius,
            clearance: if clearance.is_finite() { clearance } else { radius },
            order,
            loops,
        };
        basis.certify(punctures)?;
        Ok(basis)
    }

    /// Checks winding `+1` around the own puncture, `0` around the others,
    /// and clearance from every puncture.
    pub fn certify(&self, punctures: &[C64]) -> Result<()> {
        if self.loops.len() != punctures.len() || self.order.len() != punctures.len() {
            return Err(Error::DimensionMismatch {
                expected: punctures.len(),
                found: self.loops.len(),
            });
        }
        for (k, path) in self.loops.iter().enumerate() {
            if path.start() != self.basepoint || !path.is_closed() {
                return Err(Error::PathNotClosed {
                    start: path.start(),
                    end: path.end(),
                });
            }
            path.check_clearance(punctures, self.clearance)?;
            for (j, &p) in punctures.iter().enumerate() {
                let w = winding_number(path, p)?;
                let expected = i64::from(j == self.order[k]);
                if w != expected {
                    return Err(Error::InvalidConfig(format!(
                        "loop {k} winds {w} times around puncture {j}, expected {expected}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Counterclockwise circle centred at the puncture mean through which the
    /// product of all generators can be checked independently.
    fn enclosing_loop(&self, punctures: &[C64]) -> Result<(PathSpec, f64)> {
        let (mean, spread) = mean_and_spread(punctures);
        let reach = punctures.iter().map(|p| (p - mean).norm()).fold(0.0, f64::max);
        let mut radius = 1.5 * spread;
        let d = (self.basepoint - mean).norm();
        if radius >= d {
            radius = 0.5 * (reach + d);
        }
        let clearance = 0.5 * (radius - reach);
        Ok((circle_loop(mean, self.basepoint, radius)?, clearance))
    }
}

/// Monodromy generators in loop-basis order.
#[derive(Debug, Clone)]
pub struct MonodromyRep {
    pub basepoint: C64,
    pub generators: Vec<Mat2>,
    /// Puncture index (into the config) of each generator.
    pub punctures: Vec<usize>,
    /// For a regular point at infinity `min_s ‖M_{n−1}⋯M_0 − sI‖`; otherwise
    /// the distance between that product and the transport around an
    /// enclosing circle.
    pub defect: f64,
    /// `s` above, or the sign of `Re tr` of the product when infinity is a puncture.
    pub sign_at_infinity: i8,
    /// `(M_{n−1}⋯M_0)⁻¹`, present when infinity is a puncture.
    pub infinity_generator: Option<Mat2>,
}

impl MonodromyRep {
    /// Wraps given generators (used for synthetic representations).
    pub fn from_generators(generators: Vec<Mat2>) -> Self {
        let product = ordered_product(&generators);
        let (defect, sign) = scalar_defect(&product);
        MonodromyRep {
            basepoint: C64::new(0.0, 0.0),
            punctures: (0..generators.len()).collect(),
            generators,
            defect,
            sign_at_infinity: sign,
            infinity_generator: None,
        }
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    /// `M_{n−1} ⋯ M_0`.
    pub fn product(&self) -> Mat2 {
        ordered_product(&self.generators)
    }

    pub fn max_det_error(&self) -> f64 {
        self.generators
            .iter()
            .map(|m| (det2(m) - C64::new(1.0, 0.0)).norm())
            .fold(0.0, f64::max)
    }

    pub fn traces(&self) -> Vec<C64> {
        self.generators.iter().map(trace2).collect()
    }
}

fn ordered_product(gens: &[Mat2]) -> Mat2 {
    gens.iter().fold(Mat2::identity(), |acc, m| m * acc)
}

fn scalar_defect(p: &Mat2) -> (f64, i8) {
    let plus = frobenius2(&(p - Mat2::identity()));
    let minus = frobenius2(&(p + Mat2::identity()));
    if plus <= minus {
        (plus, 1)
    } else {
        (minus, -1)
    }
}

/// Transports `(y, y')` around each basis loop.
pub fn compute_monodromy(config: &OperConfig, basis: &LoopBasis, tol: f64) -> Result<MonodromyRep> {
    let punctures = config.punctures();
    basis.certify(punctures)?;
    let system = config.to_first_order_system()?.with_clearance(basis.clearance);
    let identity = CMat::identity(2, 2);
    let generators = basis
        .loops
        .iter()
        .map(|path| transport(&system, path, &identity, tol).map(|t| to_mat2(&t)))
        .collect::<Result<Vec<_>>>()?;
    let product = ordered_product(&generators);

    let (defect, sign, infinity_generator) = if config.infinity_is_puncture() && !punctures.is_empty() {
        let (big, clearance) = basis.enclosing_loop(punctures)?;
        let check_system = system.clone().with_clearance(clearance);
        let around = to_mat2(&transport(&check_system, &big, &identity, tol)?);
        let sign = if trace2(&product).re >= 0.0 { 1 } else { -1 };
        (frobenius2(&(product - around)), sign, Some(sl2_inverse(&product)))
    } else {
        let (d, s) = scalar_defect(&product);
        (d, s, None)
    };
    if defect > DEFECT_THRESHOLD {
        return Err(Error::ProductDefectExceeded {
            defect,
            threshold: DEFECT_THRESHOLD,
        });
    }
    Ok(MonodromyRep {
        basepoint: basis.basepoint,
        generators,
        punctures: basis.order.clone(),
        defect,
        sign_at_infinity: sign,
        infinity_generator,
    })
}

/// Monodromy with the standard loop basis.
pub fn monodromy(config: &OperConfig, tol: f64) -> Result<MonodromyRep> {
    let basis = LoopBasis::standard(config.punctures())?;
    compute_monodromy(config, &basis, tol)
}

/// A generator or its inverse, 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Letter {
    Gen(usize),
    Inv(usize),
}

/// Word `(a, b, c)` evaluates to `M_a M_b M_c`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn gens(indices: &[usize]) -> Self {
        Word(indices.iter().map(|&j| Letter::Gen(j)).collect())
    }

    pub fn evaluate(&self, rep: &MonodromyRep) -> Result<Mat2> {
        let count = rep.len();
        let mut acc = Mat2::identity();
        for letter in &self.0 {
            let m = match *letter {
                Letter::Gen(j) | Letter::Inv(j) if j >= count => {
                    return Err(Error::BadWord { index: j, count })
                }
                Letter::Gen(j) => rep.generators[j],
                Letter::Inv(j) => sl2_inverse(&rep.generators[j]),
            };
            acc *= m;
        }
        Ok(acc)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|l| match l {
                Letter::Gen(j) => j.to_string(),
                Letter::Inv(j) => format!("{j}'"),
            })
            .collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Parses `"0,1,2'"`: comma-separated generator indices, `'` marks an inverse.
impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Word::default());
        }
        s.split(',')
            .map(|tok| {
                let tok = tok.trim();
                let (num, inv) = match tok.strip_suffix('\'') {
                    Some(n) => (n, true),
                    None => (tok, false),
                };
                let j: usize = num
                    .parse()
                    .map_err(|_| Error::ConfigParse(format!("bad word letter {tok:?}")))?;
                Ok(if inv { Letter::Inv(j) } else { Letter::Gen(j) })
            })
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }
}

/// Singles, ordered pairs `j < k`, and `(0,1,2)` when there are at least three generators.
pub fn default_words(count: usize) -> Vec<Word> {
    let mut words: Vec<Word> = (0..count).map(|j| Word::gens(&[j])).collect();
    for j in 0..count {
        for k in j + 1..count {
            words.push(Word::gens(&[j, k]));
        }
    }
    if count >= 3 {
        words.push(Word::gens(&[0, 1, 2]));
    }
    words
}

pub fn trace_coordinates(rep: &MonodromyRep, words: &[Word]) -> Result<Vec<C64>> {
    words.iter().map(|w| w.evaluate(rep).map(|m| trace2(&m))).collect()
}

/// Imaginary parts of the traces over the default word set.
pub fn reality_residual(rep: &MonodromyRep) -> Vec<f64> {
    reality_residual_with(rep, &default_words(rep.len())).expect("default words are valid")
}

pub fn reality_residual_with(rep: &MonodromyRep, words: &[Word]) -> Result<Vec<f64>> {
    Ok(trace_coordinates(rep, words)?.into_iter().map(|t| t.im).collect())
}

/// `max_{j<k} |tr(M_j M_k M_j⁻¹ M_k⁻¹) − 2|`; zero for reducible representations.
pub fn irreducibility_margin(rep: &MonodromyRep) -> f64 {
    let g = &rep.generators;
    let mut best = 0.0_f64;
    for j in 0..g.len() {
        for k in j + 1..g.len() {
            let comm = g[j] * g[k] * sl2_inverse(&g[j]) * sl2_inverse(&g[k]);
            best = best.max((trace2(&comm) - C64::new(2.0, 0.0)).norm());
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn real(a: f64, b: f64, cc: f64, d: f64) -> Mat2 {
        Mat2::new(c(a, 0.0), c(b, 0.0), c(cc, 0.0), c(d, 0.0))
    }

    #[test]
    fn basis_orders_by_argument() {
        let p = [c(2.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        let basis = LoopBasis::standard(&p).unwrap();
        // basepoint 1 − 2i: rightmost puncture has the smallest argument
        assert_eq!(basis.order, vec![0, 2, 1]);
        assert!((basis.radius - 0.4).abs() < 1e-15);
        assert!((basis.clearance - 0.3).abs() < 1e-15);
    }

    #[test]
    fn zero_oper_has_trivial_monodromy() {
        let cfg = OperConfig::new(vec![], false, vec![], None, vec![]).unwrap();
        let rep = monodromy(&cfg, 1e-12).unwrap();
        assert!(rep.is_empty());
        assert_eq!(rep.defect, 0.0);
        let cfg = OperConfig::new(
            vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)],
            false,
            vec![0.0; 3],
            None,
            vec![c(0.0, 0.0); 3],
        )
        .unwrap();
        let rep = monodromy(&cfg, 1e-12).unwrap();
        for m in &rep.generators {
            assert!(frobenius2(&(m - Mat2::identity())) < 1e-12);
        }
    }

    #[test]
    fn rigid_parabolic_traces() {
        let cfg = OperConfig::parabolic(vec![c(0.0, 0.0), c(1.0, 0.0)], true, c(0.0, 0.0)).unwrap();
        let rep = monodromy(&cfg, 1e-12).unwrap();
        for t in rep.traces() {
            assert!((t - c(-2.0, 0.0)).norm() < 1e-8, "{t}");
        }
        assert!(rep.max_det_error() < 1e-9);
        assert!(rep.defect < 1e-7);
        let m_inf = rep.infinity_generator.unwrap();
        assert!((trace2(&m_inf).norm() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn words_and_traces() {
        let a = real(2.0, 1.0, 1.0, 1.0);
        let b = real(1.0, 0.0, 3.0, 1.0);
        let rep = MonodromyRep::from_generators(vec![a, b]);
        let w: Vec<Word> = ["", "0,1", "1,0", "0'", "2"].iter().map(|s| s.parse().unwrap()).collect();
        let t = trace_coordinates(&rep, &w[..4]).unwrap();
        assert_eq!(t[0], c(2.0, 0.0));
        assert!((t[1] - t[2]).norm() < 1e-12);
        assert_eq!(t[3], trace2(&a));
        assert!(matches!(
            trace_coordinates(&rep, &w[4..]),
            Err(Error::BadWord { index: 2, count: 2 })
        ));
        assert_eq!(w[3].to_string(), "0'");
    }

    #[test]
    fn real_and_unitary_reps_have_zero_residual() {
        let rep = MonodromyRep::from_generators(vec![
            real(2.0, 1.0, 1.0, 1.0),
            real(1.0, 0.0, 3.0, 1.0),
            real(0.0, -1.0, 1.0, 0.0),
        ]);
        assert!(reality_residual(&rep).iter().all(|&r| r == 0.0));
        let su2 = |a: C64, b: C64| Mat2::new(a, b, -b.conj(), a.conj());
        let (s, co) = (0.6_f64, 0.8_f64);
        let rep = MonodromyRep::from_generators(vec![
            su2(c(co, 0.0), c(s, 0.0)),
            su2(c(0.0, co), c(0.0, s)),
            su2(c(s, co), c(0.0, 0.0)),
        ]);
        assert!(reality_residual(&rep).iter().all(|&r| r.abs() < 1e-15));
    }

    #[test]
    fn irreducibility_examples() {
        let id = MonodromyRep::from_generators(vec![Mat2::identity(), Mat2::identity()]);
        assert_eq!(irreducibility_margin(&id), 0.0);
        let diag = MonodromyRep::from_generators(vec![real(2.0, 0.0, 0.0, 0.5), real(3.0, 0.0, 0.0, 1.0 / 3.0)]);
        assert!(irreducibility_margin(&diag) < 1e-15);
        let uni = MonodromyRep::from_generators(vec![real(1.0, 1.0, 0.0, 1.0), real(1.0, 0.0, 1.0, 1.0)]);
        assert!((irreducibility_margin(&uni) - 1.0).abs() < 1e-15);
    }
}
