//! Dense complex helpers: products, Householder QR, random matrices and a
//! row-major store for tall n x k factors.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::givens::Givens;

pub type CMat = DMatrix<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

pub fn frob(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Complex product through four real GEMMs.
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "matmul shape mismatch");
    let (ar, ai) = (a.map(|z| z.re), a.map(|z| z.im));
    let (br, bi) = (b.map(|z| z.re), b.map(|z| z.im));
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    CMat::from_fn(a.nrows(), b.ncols(), |i, j| C64::new(re[(i, j)], im[(i, j)]))
}

/// Standard complex Gaussian entries, `(x + iy)/sqrt(2)`.
pub fn complex_gaussian<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * h, im * h)
    })
}

/// Haar-distributed unitary matrix.
pub fn haar_unitary<R: Rng>(m: usize, rng: &mut R) -> CMat {
    let z = complex_gaussian(m, m, rng);
    qr(&z).0
}

fn unit_phase(z: C64) -> C64 {
    let a = z.norm();
    if a == 0.0 {
        ONE
    } else {
        z / a
    }
}

/// Full Householder QR `A = Q R` with `Q` square unitary and the diagonal of
/// `R` real non-negative. Columns that are already reduced are left alone.
pub fn qr(a: &CMat) -> (CMat, CMat) {
    let (m, n) = a.shape();
    let mut r = a.clone();
    let mut qh = CMat::identity(m, m);
    let mut v = vec![ZERO; m];
    for j in 0..m.min(n) {
        let tail: f64 = (j + 1..m).map(|i| r[(i, j)].norm_sqr()).sum();
        let x0 = r[(j, j)];
        if tail == 0.0 {
            if x0.im != 0.0 || x0.re < 0.0 {
                let ph = unit_phase(x0).conj();
                for c in j..n {
                    r[(j, c)] *= ph;
                }
                for c in 0..m {
                    qh[(j, c)] *= ph;
                }
                r[(j, j)] = C64::new(x0.norm(), 0.0);
            }
            continue;
        }
        let alpha = (x0.norm_sqr() + tail).sqrt();
        let ph = unit_phase(x0);
        v[j] = x0 + ph * alpha;
        for i in j + 1..m {
            v[i] = r[(i, j)];
        }
        let vnorm2 = v[j].norm_sqr() + tail;
        let reflect = |mat: &mut CMat, cols: std::ops::Range<usize>| {
            for c in cols {
                let mut dot = ZERO;
                for i in j..m {
                    dot += v[i].conj() * mat[(i, c)];
                }
                let f = dot * (2.0 / vnorm2);
                for i in j..m {
                    mat[(i, c)] -= v[i] * f;
                }
            }
        };
        reflect(&mut r, j..n);
        reflect(&mut qh, 0..m);
        // H x = -ph * alpha e_j; flip the phase so the diagonal is alpha.
        let fix = -ph.conj();
        for c in j..n {
            r[(j, c)] *= fix;
        }
        for c in 0..m {
            qh[(j, c)] *= fix;
        }
        r[(j, j)] = C64::new(alpha, 0.0);
        for i in j + 1..m {
            r[(i, j)] = ZERO;
        }
    }
    (qh.adjoint(), r)
}

/// Unitary `W` with `W X` upper triangular (normalized diagonal).
pub fn upper_left(x: &CMat) -> CMat {
    qr(x).0.adjoint()
}

/// Unitary `W` with `X W^H` lower triangular.
pub fn lower_right(x: &CMat) -> CMat {
    upper_left(&x.adjoint())
}

/// Tall n x k factor stored row-major so that plane rotations touch
/// contiguous memory.
#[derive(Clone, Debug, PartialEq)]
pub struct Rows {
    pub n: usize,
    pub k: usize,
    pub data: Vec<C64>,
}

impl Rows {
    pub fn zeros(n: usize, k: usize) -> Self {
        Rows {
            n,
            k,
            data: vec![ZERO; n * k],
        }
    }

    pub fn from_cmat(m: &CMat) -> Self {
        let (n, k) = m.shape();
        let mut data = Vec::with_capacity(n * k);
        for i in 0..n {
            for j in 0..k {
                data.push(m[(i, j)]);
            }
        }
        Rows { n, k, data }
    }

    pub fn to_cmat(&self) -> CMat {
        CMat::from_fn(self.n, self.k, |i, j| self.data[i * self.k + j])
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [C64] {
        &mut self.data[i * self.k..(i + 1) * self.k]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.k + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.k + j] = v;
    }

    /// Left rotation of rows `plane`, `plane + 1`.
    #[inline]
    pub fn rotate(&mut self, g: &Givens) {
        let k = self.k;
        let (top, bottom) = self.data.split_at_mut((g.plane + 1) * k);
        g.rotate_slices(&mut top[g.plane * k..], &mut bottom[..k]);
    }

    /// `sum_t self[i,t] * conj(other[j,t])`.
    #[inline]
    pub fn dot_h(&self, i: usize, other: &Rows, j: usize) -> C64 {
        dot_h(self.row(i), other.row(j))
    }

    pub fn is_row_zero(&self, i: usize) -> bool {
        self.row(i).iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }
}

#[inline]
pub fn dot_h(a: &[C64], b: &[C64]) -> C64 {
    let mut s = ZERO;
    for (x, y) in a.iter().zip(b) {
        s += x * y.conj();
    }
    s
}
