//! Small numerical helpers shared by the transport, monodromy and section code.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type Mat2 = Matrix2<C64>;
pub type CMat = DMatrix<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

/// Neumaier-compensated complex accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    re: (f64, f64),
    im: (f64, f64),
}

fn neumaier(acc: &mut (f64, f64), x: f64) {
    let t = acc.0 + x;
    if acc.0.abs() >= x.abs() {
        acc.1 += (acc.0 - t) + x;
    } else {
        acc.1 += (x - t) + acc.0;
    }
    acc.0 = t;
}

impl CompensatedSum {
    pub fn add(&mut self, z: C64) {
        neumaier(&mut self.re, z.re);
        neumaier(&mut self.im, z.im);
    }

    pub fn value(&self) -> C64 {
        C64::new(self.re.0 + self.re.1, self.im.0 + self.im.1)
    }
}

pub fn compensated_sum<I: IntoIterator<Item = C64>>(terms: I) -> C64 {
    let mut acc = CompensatedSum::default();
    for z in terms {
        acc.add(z);
    }
    acc.value()
}

pub fn trace(m: &CMat) -> C64 {
    compensated_sum((0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]))
}

pub fn trace2(m: &Mat2) -> C64 {
    compensated_sum([m[(0, 0)], m[(1, 1)]])
}

pub fn det2(m: &Mat2) -> C64 {
    compensated_sum([m[(0, 0)] * m[(1, 1)], -(m[(0, 1)] * m[(1, 0)])])
}

/// Inverse of an SL2 matrix via the adjugate; exact when det = 1.
pub fn sl2_inverse(m: &Mat2) -> Mat2 {
    Mat2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)])
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn frobenius2(m: &Mat2) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn to_mat2(m: &CMat) -> Mat2 {
    Mat2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

pub fn from_mat2(m: &Mat2) -> CMat {
    CMat::from_fn(2, 2, |i, j| m[(i, j)])
}

/// Singular values in ascending order together with the right singular
/// vector of the smallest one.
pub fn smallest_right_singular(a: &DMatrix<f64>) -> (Vec<f64>, nalgebra::DVector<f64>) {
    // nalgebra returns min(rows, cols) singular values; pad wide systems so
    // the nullspace direction is always among them.
    let n = a.ncols();
    let padded;
    let a = if a.nrows() < n {
        padded = {
            let mut p = DMatrix::<f64>::zeros(n, n);
            p.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
            p
        };
        &padded
    } else {
        a
    };
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let sigmas = order.iter().map(|&i| svd.singular_values[i]).collect();
    let v = v_t.row(order[0]).transpose();
    (sigmas, v)
}

/// Principal square root with the branch chosen closest to `prev`.
pub fn sqrt_near(w: C64, prev: C64) -> C64 {
    let r = w.sqrt();
    if (r - prev).norm_sqr() <= (r + prev).norm_sqr() {
        r
    } else {
        -r
    }
}

/// Equal-ordering comparator for complex numbers: by real part, then imaginary.
pub fn cmp_re_im(a: &C64, b: &C64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancelled_bits() {
        let terms = [C64::new(1e16, 0.0), C64::new(1.0, 0.0), C64::new(-1e16, 0.0)];
        assert_eq!(compensated_sum(terms).re, 1.0);
    }

    #[test]
    fn sl2_inverse_is_inverse() {
        let m = Mat2::new(
            C64::new(2.0, 1.0),
            C64::new(0.5, 0.0),
            C64::new(1.0, -1.0),
            C64::new(0.0, 0.0),
        );
        // rescale to det 1
        let d = det2(&m).sqrt();
        let m = m / d;
        let p = m * sl2_inverse(&m);
        assert!((p - Mat2::identity()).norm() < 1e-14);
    }

    #[test]
    fn smallest_singular_vector_of_rank_deficient() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, -1.0, -1.0]);
        let (s, v) = smallest_right_singular(&a);
        assert!(s[0] < 1e-14);
        assert!((v[0] + v[1]).abs() < 1e-12);
    }
}
