//! Dormand–Prince 8(5,3) stepping for complex linear systems on `s ∈ [0, 1]`.
//!
//! Coefficients are Hairer's DOP853 tableau. Only the step function and the
//! step-size controller live here; the caller supplies the right-hand side.

use crate::error::{Error, Result};
use crate::numeric::C64;

const C: [f64; 12] = [
    0.0,
    5.260015195876773E-2,
    7.89002279381516E-2,
    1.183503419072274E-1,
    2.816496580927726E-1,
    3.333333333333333E-1,
    0.25,
    3.076923076923077E-1,
    6.512820512820513E-1,
    0.6,
    8.571428571428571E-1,
    1.0,
];

const A: [[f64; 11]; 12] = [
    [0.0; 11],
    [5.260015195876773E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.97250569845379E-2, 5.91751709536137E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.958758547680685E-2, 0.0, 8.876275643042054E-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [
        2.413651341592667E-1,
        0.0,
        -8.845494793282861E-1,
        9.24834003261792E-1,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        3.7037037037037035E-2,
        0.0,
        0.0,
        1.7082860872947386E-1,
        1.2546768756682242E-1,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        3.7109375E-2,
        0.0,
        0.0,
        1.7025221101954405E-1,
        6.021653898045596E-2,
        -1.7578125E-2,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        3.709200011850479E-2,
        0.0,
        0.0,
        1.7038392571223998E-1,
        1.0726203044637328E-1,
        -1.5319437748624402E-2,
        8.273789163814023E-3,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        6.241109587160757E-1,
        0.0,
        0.0,
        -3.3608926294469414,
        -8.68219346841726E-1,
        2.759209969944671E1,
        2.0154067550477894E1,
        -4.348988418106996E1,
        0.0,
        0.0,
        0.0,
    ],
    [
        4.7766253643826434E-1,
        0.0,
        0.0,
        -2.4881146199716677,
        -5.90290826836843E-1,
        2.1230051448181193E1,
        1.5279233632882423E1,
        -3.328821096898486E1,
        -2.0331201708508627E-2,
        0.0,
        0.0,
    ],
    [
        -9.371424300859873E-1,
        0.0,
        0.0,
        5.186372428844064,
        1.0914373489967295,
        -8.149787010746927,
        -1.852006565999696E1,
        2.2739487099350505E1,
        2.4936055526796523,
        -3.0467644718982196,
        0.0,
    ],
    [
        2.273310147516538,
        0.0,
        0.0,
        -1.053449546673725E1,
        -2.0008720582248625,
        -1.79589318631188E1,
        2.794888452941996E1,
        -2.8589982771350235,
        -8.87285693353063,
        1.2360567175794303E1,
        6.433927460157636E-1,
    ],
];

const B: [f64; 12] = [
    5.4293734116568765E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    4.450312892752409,
    1.8915178993145003,
    -5.801203960010585,
    3.111643669578199E-1,
    -1.521609496625161E-1,
    2.0136540080403034E-1,
    4.471061572777259E-2,
];

const ER: [f64; 12] = [
    1.312004499419488E-2,
    0.0,
    0.0,
    0.0,
    0.0,
    -1.2251564463762044,
    -4.957589496572502E-1,
    1.6643771824549864,
    -3.5032884874997366E-1,
    3.341791187130175E-1,
    8.192320648511571E-2,
    -2.2355307863886294E-2,
];

/// Weights of the embedded third-order estimate on stages 1, 9 and 12.
const BHH: [f64; 3] = [
    2.440944881889764E-1,
    7.338466882816118E-1,
    2.2058823529411766E-2,
];

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub tol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl StepControl {
    pub fn new(tol: f64) -> Self {
        StepControl {
            tol,
            h_init: 0.05,
            h_min: 1e-12,
            max_steps: 200_000,
        }
    }
}

/// Integrates `dy/ds = f(s, y)` from `s = 0` to `s = 1` in place.
///
/// `f(s, y, out)` writes the derivative into `out`. Returns the last
/// accepted step size so consecutive segments can warm-start.
pub fn integrate_unit<F>(
    f: &mut F,
    y: &mut [C64],
    ctrl: &StepControl,
    segment: usize,
) -> Result<f64>
where
    F: FnMut(f64, &[C64], &mut [C64]) -> Result<()>,
{
    let n = y.len();
    let mut k: Vec<Vec<C64>> = vec![vec![C64::new(0.0, 0.0); n]; 12];
    let mut stage = vec![C64::new(0.0, 0.0); n];
    let mut y_new = vec![C64::new(0.0, 0.0); n];

    let mut s = 0.0_f64;
    let mut h = ctrl.h_init.min(1.0);
    let mut steps = 0usize;
    let mut last_rejected = false;
    f(s, y, &mut k[0])?;

    while s < 1.0 {
        if steps >= ctrl.max_steps {
            return Err(Error::StepLimit {
                segment,
                max_steps: ctrl.max_steps,
            });
        }
        steps += 1;
        let last = s + h >= 1.0;
        if last {
            h = 1.0 - s;
        }

        for i in 1..12 {
            for (idx, st) in stage.iter_mut().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (j, kj) in k.iter().enumerate().take(i) {
                    let a = A[i][j];
                    if a != 0.0 {
                        acc += kj[idx] * a;
                    }
                }
                *st = y[idx] + acc * h;
            }
            f(s + C[i] * h, &stage, &mut k[i])?;
        }

        let mut err5 = 0.0;
        let mut err3 = 0.0;
        for idx in 0..n {
            let mut incr = C64::new(0.0, 0.0);
            let mut e5 = C64::new(0.0, 0.0);
            for j in 0..12 {
                if B[j] != 0.0 {
                    incr += k[j][idx] * B[j];
                }
                if ER[j] != 0.0 {
                    e5 += k[j][idx] * ER[j];
                }
            }
            y_new[idx] = y[idx] + incr * h;
            let e3 = incr - k[0][idx] * BHH[0] - k[8][idx] * BHH[1] - k[11][idx] * BHH[2];
            let sk = ctrl.tol * (1.0 + y[idx].norm().max(y_new[idx].norm()));
            err5 += (e5 / sk).norm_sqr();
            err3 += (e3 / sk).norm_sqr();
        }
        let mut deno = err5 + 0.01 * err3;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let err = h.abs() * err5 * (1.0 / (deno * n as f64)).sqrt();

        let fac = (err.powf(1.0 / 8.0) / 0.9).clamp(1.0 / 6.0, 1.0 / 0.333);
        let mut h_new = h / fac;

        if err <= 1.0 {
            s = if last { 1.0 } else { s + h };
            y.copy_from_slice(&y_new);
            if s < 1.0 {
                f(s, y, &mut k[0])?;
            }
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
            h = h_new;
        } else {
            last_rejected = true;
            h = h_new.min(h * 0.9);
            if h < ctrl.h_min {
                return Err(Error::StepUnderflow {
                    segment,
                    s,
                    min_step: ctrl.h_min,
                });
            }
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tableau_rows_sum_to_nodes() {
        for i in 0..12 {
            let row: f64 = A[i].iter().sum();
            assert!((row - C[i]).abs() < 1e-13, "row {i}: {row} vs {}", C[i]);
        }
        let b: f64 = B.iter().sum();
        assert!((b - 1.0).abs() < 1e-13);
    }

    #[test]
    fn exponential_is_reproduced() {
        // y' = lambda y on [0,1] with complex lambda
        let lambda = C64::new(-0.7, 3.0);
        let mut y = vec![C64::new(1.0, 0.0)];
        let mut f = |_s: f64, y: &[C64], out: &mut [C64]| {
            out[0] = lambda * y[0];
            Ok(())
        };
        integrate_unit(&mut f, &mut y, &StepControl::new(1e-12), 0).unwrap();
        assert!((y[0] - lambda.exp()).norm() < 1e-11);
    }

    #[test]
    fn high_order_on_polynomial_forcing() {
        // y' = 8 s^7 has y(1) = 1; an order-8 method integrates it exactly per step.
        let mut y = vec![C64::new(0.0, 0.0)];
        let mut f = |s: f64, _y: &[C64], out: &mut [C64]| {
            out[0] = C64::new(8.0 * s.powi(7), 0.0);
            Ok(())
        };
        integrate_unit(&mut f, &mut y, &StepControl::new(1e-6), 0).unwrap();
        assert!((y[0].re - 1.0).abs() < 1e-13);
    }
}
