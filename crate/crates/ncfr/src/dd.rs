//! Complex double-double arithmetic for residual evaluation.
//!
//! Only the handful of operations needed to form Riccati residuals with
//! about 32 significant digits; storage and solves stay in `f64`.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use twofloat::TwoFloat;

use crate::linalg::{CMat, CVec};

/// Reciprocal with one Newton correction; the crate's own division keeps
/// only double accuracy for some operands.
pub fn recip(s: TwoFloat) -> TwoFloat {
    let q0 = TwoFloat::from(1.0 / f64::from(s));
    let e = TwoFloat::from(1.0) - s * q0;
    q0 + q0 * e
}

#[derive(Clone, Copy, Debug)]
pub struct Cdd {
    pub re: TwoFloat,
    pub im: TwoFloat,
}

impl Cdd {
    pub fn zero() -> Self {
        Cdd { re: TwoFloat::from(0.0), im: TwoFloat::from(0.0) }
    }

    pub fn from_c(z: Complex64) -> Self {
        Cdd { re: TwoFloat::from(z.re), im: TwoFloat::from(z.im) }
    }

    pub fn to_c(self) -> Complex64 {
        Complex64::new(f64::from(self.re), f64::from(self.im))
    }

    pub fn conj(self) -> Self {
        Cdd { re: self.re, im: -self.im }
    }

    pub fn norm_sqr(self) -> TwoFloat {
        self.re * self.re + self.im * self.im
    }

    pub fn scale(self, s: TwoFloat) -> Self {
        Cdd { re: self.re * s, im: self.im * s }
    }
}

impl Add for Cdd {
    type Output = Cdd;
    fn add(self, o: Cdd) -> Cdd {
        Cdd { re: self.re + o.re, im: self.im + o.im }
    }
}

impl Sub for Cdd {
    type Output = Cdd;
    fn sub(self, o: Cdd) -> Cdd {
        Cdd { re: self.re - o.re, im: self.im - o.im }
    }
}

impl Neg for Cdd {
    type Output = Cdd;
    fn neg(self) -> Cdd {
        Cdd { re: -self.re, im: -self.im }
    }
}

impl Mul for Cdd {
    type Output = Cdd;
    fn mul(self, o: Cdd) -> Cdd {
        Cdd { re: self.re * o.re - self.im * o.im, im: self.re * o.im + self.im * o.re }
    }
}

/// Dense row-major double-double matrix.
#[derive(Clone, Debug)]
pub struct DdMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Cdd>,
}

impl DdMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DdMat { rows, cols, data: vec![Cdd::zero(); rows * cols] }
    }

    pub fn from_mat(m: &CMat) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out.data[i * m.ncols() + j] = Cdd::from_c(m[(i, j)]);
            }
        }
        out
    }

    pub fn from_col(v: &CVec) -> Self {
        let mut out = Self::zeros(v.len(), 1);
        for (i, z) in v.iter().enumerate() {
            out.data[i] = Cdd::from_c(*z);
        }
        out
    }

    pub fn get(&self, i: usize, j: usize) -> Cdd {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, z: Cdd) {
        self.data[i * self.cols + j] = z;
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    pub fn matmul(&self, o: &Self) -> Self {
        assert_eq!(self.cols, o.rows);
        let mut out = Self::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for j in 0..o.cols {
                let mut acc = Cdd::zero();
                for k in 0..self.cols {
                    acc = acc + self.get(i, k) * o.get(k, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn add(&self, o: &Self) -> Self {
        let data = self.data.iter().zip(&o.data).map(|(a, b)| *a + *b).collect();
        DdMat { data, ..*self }
    }

    pub fn sub(&self, o: &Self) -> Self {
        let data = self.data.iter().zip(&o.data).map(|(a, b)| *a - *b).collect();
        DdMat { data, ..*self }
    }

    pub fn scale(&self, s: TwoFloat) -> Self {
        let data = self.data.iter().map(|a| a.scale(s)).collect();
        DdMat { data, ..*self }
    }

    pub fn to_mat(&self) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| self.get(i, j).to_c())
    }

    pub fn to_col(&self) -> CVec {
        CVec::from_fn(self.rows, |i, _| self.get(i, 0).to_c())
    }
}
