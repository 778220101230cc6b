//! Unitary-plus-low-rank problems from monic matrix polynomials.
//!
//! The block companion matrix of `P(x) = sum A_i x^i` splits as
//! `C = Z (x) I_m + U W^H` with `Z` the cyclic down-shift, `U = e_1 (x) I_m`
//! and `W^H = [-A_{n-1}, ..., -A_1, -A_0 - I]`. Diagonalizing `Z = F Omega F^H`
//! with the unitary DFT turns `C` into a unitary diagonal plus rank `m`.

use num_complex::Complex64 as C64;

use crate::dense::{matmul, CMat, ONE, ZERO};
use crate::error::{HessError, Result};
use crate::givens::Tolerance;
use crate::problem::{DPR1Problem, Kind};

/// `P(x) = sum_i A_i x^i` with `m x m` complex coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixPolynomial {
    pub m: usize,
    /// `A_0, ..., A_degree`.
    pub coefficients: Vec<CMat>,
    pub monic: bool,
}

impl MatrixPolynomial {
    pub fn new(coefficients: Vec<CMat>) -> Result<Self> {
        if coefficients.len() < 2 {
            return Err(HessError::Shape("a matrix polynomial needs degree >= 1".into()));
        }
        let m = coefficients[0].nrows();
        if m == 0 || coefficients.iter().any(|a| a.shape() != (m, m)) {
            return Err(HessError::Shape(format!(
                "coefficients must all be {m}x{m} with m >= 1"
            )));
        }
        let tol = Tolerance::default();
        let lead = &coefficients[coefficients.len() - 1];
        let monic = (lead - CMat::identity(m, m)).iter().all(|z| z.norm() <= tol.c_z * tol.u);
        Ok(MatrixPolynomial {
            m,
            coefficients,
            monic,
        })
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Order `m * degree` of the companion matrix.
    pub fn order(&self) -> usize {
        self.m * self.degree()
    }

    fn require_monic(&self) -> Result<()> {
        if self.monic {
            Ok(())
        } else {
            Err(HessError::Kind(
                "leading coefficient is not the identity; pencils are not supported".into(),
            ))
        }
    }
}

/// Block companion matrix: top block row `-A_{n-1}, ..., -A_0`, identity
/// blocks on the block subdiagonal.
pub fn companion_dense(p: &MatrixPolynomial) -> Result<CMat> {
    p.require_monic()?;
    let (m, np) = (p.m, p.degree());
    let mut c = CMat::zeros(m * np, m * np);
    for b in 0..np {
        let a = &p.coefficients[np - 1 - b];
        c.view_mut((0, b * m), (m, m)).copy_from(&(-a));
    }
    for i in m..m * np {
        c[(i, i - m)] = ONE;
    }
    Ok(c)
}

/// Unitary DFT matrix `F[j, q] = exp(-2 pi i j q / n) / sqrt(n)`, so that the
/// cyclic down-shift is `F diag(omega^q) F^H` with `omega = exp(2 pi i / n)`.
pub fn dft_matrix(n: usize) -> CMat {
    let scale = 1.0 / (n as f64).sqrt();
    CMat::from_fn(n, n, |j, q| {
        let t = (j * q) % n;
        C64::from_polar(scale, -std::f64::consts::TAU * t as f64 / n as f64)
    })
}

/// Roots of unity `omega^q`, `q = 0..n`.
pub fn roots_of_unity(n: usize) -> Vec<C64> {
    (0..n)
        .map(|q| C64::from_polar(1.0, std::f64::consts::TAU * q as f64 / n as f64))
        .collect()
}

/// `diag(d) + U' V'^H = (F (x) I)^H C (F (x) I)`.
pub fn companion_to_dpr1(p: &MatrixPolynomial) -> Result<DPR1Problem> {
    p.require_monic()?;
    let (m, np) = (p.m, p.degree());
    let f = dft_matrix(np);
    let d: Vec<C64> = roots_of_unity(np)
        .into_iter()
        .flat_map(|w| std::iter::repeat(w).take(m))
        .collect();
    // U' = (F^H (x) I)(e_1 (x) I): block q is conj(F[0, q]) I.
    let mut u = CMat::zeros(m * np, m);
    for q in 0..np {
        let w = f[(0, q)].conj();
        for i in 0..m {
            u[(q * m + i, i)] = w;
        }
    }
    // W block b is (-A_{n-1-b})^H, with -A_0 - I in the last block.
    let mut w = CMat::zeros(m * np, m);
    for b in 0..np {
        let mut blk = -&p.coefficients[np - 1 - b];
        if b == np - 1 {
            for i in 0..m {
                blk[(i, i)] -= ONE;
            }
        }
        w.view_mut((b * m, 0), (m, m)).copy_from(&blk.adjoint());
    }
    // V' = (F^H (x) I) W, applied blockwise.
    let mut v = CMat::from_element(m * np, m, ZERO);
    for q in 0..np {
        let mut acc = CMat::zeros(m, m);
        for b in 0..np {
            let fc = f[(b, q)].conj();
            if fc != ZERO {
                acc += w.view((b * m, 0), (m, m)) * fc;
            }
        }
        v.view_mut((q * m, 0), (m, m)).copy_from(&acc);
    }
    DPR1Problem::new(Kind::Unitary, d, u, v)
}

/// `(F (x) I_m)` as a dense matrix.
pub fn block_dft(np: usize, m: usize) -> CMat {
    let f = dft_matrix(np);
    let mut out = CMat::zeros(np * m, np * m);
    for j in 0..np {
        for q in 0..np {
            for i in 0..m {
                out[(j * m + i, q * m + i)] = f[(j, q)];
            }
        }
    }
    out
}

/// `|| (F (x) I)^H C (F (x) I) - A ||_F` for the problem built from `p`.
pub fn similarity_defect(p: &MatrixPolynomial, problem: &DPR1Problem) -> Result<f64> {
    let c = companion_dense(p)?;
    let fi = block_dft(p.degree(), p.m);
    let lhs = matmul(&matmul(&fi.adjoint(), &c), &fi);
    Ok((lhs - problem.dense()).norm())
}
