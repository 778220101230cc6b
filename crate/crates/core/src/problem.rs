//! Diagonal-plus-low-rank input problems.

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::{complex_gaussian, matmul, CMat};
use crate::error::{HessError, Result};
use crate::givens::Tolerance;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Real,
    Unitary,
}

impl Kind {
    pub fn name(&self) -> &'static str {
        match self {
            Kind::Real => "real",
            Kind::Unitary => "unitary",
        }
    }
}

impl std::str::FromStr for Kind {
    type Err = HessError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(Kind::Real),
            "unitary" => Ok(Kind::Unitary),
            other => Err(HessError::Parse(format!("unknown kind {other:?}"))),
        }
    }
}

/// `A = diag(d) + U V^H` with `d` real or unimodular.
#[derive(Clone, Debug, PartialEq)]
pub struct DPR1Problem {
    pub kind: Kind,
    pub d: Vec<C64>,
    pub u: CMat,
    pub v: CMat,
}

impl DPR1Problem {
    pub fn new(kind: Kind, d: Vec<C64>, u: CMat, v: CMat) -> Result<Self> {
        let n = d.len();
        if u.nrows() != n || v.nrows() != n || u.ncols() != v.ncols() {
            return Err(HessError::Shape(format!(
                "d has {n} entries, U is {}x{}, V is {}x{}",
                u.nrows(),
                u.ncols(),
                v.nrows(),
                v.ncols()
            )));
        }
        let p = DPR1Problem { kind, d, u, v };
        p.check_kind(&Tolerance::default())?;
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn k(&self) -> usize {
        self.u.ncols()
    }

    /// Validate the diagonal against the kind tag.
    pub fn check_kind(&self, tol: &Tolerance) -> Result<()> {
        for (i, z) in self.d.iter().enumerate() {
            match self.kind {
                Kind::Real if z.im != 0.0 => {
                    return Err(HessError::Kind(format!(
                        "d[{i}] = {z} is not real; use the unitary path"
                    )))
                }
                Kind::Unitary if (z.norm() - 1.0).abs() > tol.c_z * tol.u => {
                    return Err(HessError::Kind(format!("d[{i}] = {z} is not unimodular")))
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Random instance: real `d` uniform in [-1, 1], unitary `d = exp(i theta)`,
    /// `U`, `V` standard complex Gaussian.
    pub fn random(kind: Kind, n: usize, k: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = (0..n)
            .map(|_| match kind {
                Kind::Real => C64::new(rng.gen_range(-1.0..=1.0), 0.0),
                Kind::Unitary => {
                    C64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU))
                }
            })
            .collect();
        let u = complex_gaussian(n, k, &mut rng);
        let v = complex_gaussian(n, k, &mut rng);
        DPR1Problem { kind, d, u, v }
    }

    pub fn dense(&self) -> CMat {
        let mut a = matmul(&self.u, &self.v.adjoint());
        for (i, z) in self.d.iter().enumerate() {
            a[(i, i)] += z;
        }
        a
    }

    /// Cheap upper bound for `||A||_F`.
    pub fn norm_bound(&self) -> f64 {
        let dn: f64 = self.d.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        dn + self.u.norm() * self.v.norm()
    }

    /// Append `extra` diagonal entries equal to 1 and zero rows to `U`, `V`.
    pub fn padded(&self, extra: usize) -> Self {
        let n = self.n();
        let k = self.k();
        let mut d = self.d.clone();
        d.extend(std::iter::repeat(C64::new(1.0, 0.0)).take(extra));
        let grow = |m: &CMat| {
            let mut out = CMat::zeros(n + extra, k);
            out.view_mut((0, 0), (n, k)).copy_from(m);
            out
        };
        DPR1Problem {
            kind: self.kind,
            d,
            u: grow(&self.u),
            v: grow(&self.v),
        }
    }
}
