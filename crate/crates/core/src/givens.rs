//! Scalar conventions, tolerances and plane rotations.
//!
//! A rotation `G` acting on the plane `p` mixes rows (or columns) `p` and
//! `p + 1` through the 2x2 unitary
//!
//! ```text
//! R = [ c  -conj(s) ]
//!     [ s   c       ]
//! ```
//!
//! with `c` real and non-negative. Left application replaces rows by `R * rows`,
//! right application replaces columns by `cols * R^H`.

use std::ops::Range;

use crate::dense::CMat;
use crate::error::{HessError, Result};
use num_complex::Complex64 as C64;

/// Tolerance policy shared by all modules.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    /// Unit roundoff of the working precision.
    pub u: f64,
    /// Factor for structural-zero enforcement.
    pub c_z: f64,
    /// Factor for structure and accuracy checks.
    pub c_s: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            u: f64::EPSILON,
            c_z: 10.0,
            c_s: 100.0,
        }
    }
}

impl Tolerance {
    pub fn new(u: f64, c_z: f64, c_s: f64) -> Result<Self> {
        if !(u > 0.0) || !(c_z >= 1.0) || !(c_s >= c_z) {
            return Err(HessError::Kind(format!(
                "invalid tolerance u={u:e}, c_z={c_z}, c_s={c_s}"
            )));
        }
        Ok(Tolerance { u, c_z, c_s })
    }

    /// Threshold below which a structural zero may be enforced.
    pub fn zero_threshold(&self, n: usize, sigma: f64) -> f64 {
        self.c_z * n.max(1) as f64 * self.u * sigma
    }

    /// Threshold for structure and accuracy checks.
    pub fn structure_threshold(&self, n: usize, scale: f64) -> f64 {
        self.c_s * n.max(1) as f64 * self.u * scale
    }
}

/// Plane rotation with real cosine `c >= 0` and complex sine `s`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Givens {
    pub c: f64,
    pub s: C64,
    /// Acts on rows/columns `plane` and `plane + 1` (0-based).
    pub plane: usize,
}

impl Givens {
    pub fn identity(plane: usize) -> Self {
        Givens {
            c: 1.0,
            s: C64::new(0.0, 0.0),
            plane,
        }
    }

    pub fn at(self, plane: usize) -> Self {
        Givens { plane, ..self }
    }

    pub fn is_identity(&self) -> bool {
        self.c == 1.0 && self.s.re == 0.0 && self.s.im == 0.0
    }

    /// The inverse rotation.
    pub fn adjoint(&self) -> Self {
        Givens {
            c: self.c,
            s: -self.s,
            plane: self.plane,
        }
    }

    /// `R * [x; y]`.
    #[inline]
    pub fn rotate(&self, x: C64, y: C64) -> (C64, C64) {
        (
            x * self.c - self.s.conj() * y,
            self.s * x + y * self.c,
        )
    }

    /// `[x, y] * R^H`.
    #[inline]
    pub fn rotate_right(&self, x: C64, y: C64) -> (C64, C64) {
        (
            x * self.c - self.s * y,
            self.s.conj() * x + y * self.c,
        )
    }

    /// The 2x2 matrix `R`.
    pub fn matrix(&self) -> [[C64; 2]; 2] {
        let c = C64::new(self.c, 0.0);
        [[c, -self.s.conj()], [self.s, c]]
    }

    /// Rotate two equally long slices as rows: `[a; b] <- R [a; b]`.
    #[inline]
    pub fn rotate_slices(&self, a: &mut [C64], b: &mut [C64]) {
        for (x, y) in a.iter_mut().zip(b.iter_mut()) {
            let (nx, ny) = self.rotate(*x, *y);
            *x = nx;
            *y = ny;
        }
    }
}

/// Rotation `G` with `R [a; b] = [r; 0]`, `c >= 0`, computed with scaling.
///
/// `b == 0` yields the identity with `r = a`.
pub fn givens_compute(a: C64, b: C64) -> (Givens, C64) {
    if b.re == 0.0 && b.im == 0.0 {
        return (Givens::identity(0), a);
    }
    if a.re == 0.0 && a.im == 0.0 {
        return (
            Givens {
                c: 0.0,
                s: C64::new(-1.0, 0.0),
                plane: 0,
            },
            b,
        );
    }
    let scale = a.re.abs().max(a.im.abs()).max(b.re.abs()).max(b.im.abs());
    let (aa, bb) = (a / scale, b / scale);
    let abs_a = aa.norm_sqr().sqrt();
    let rho = (aa.norm_sqr() + bb.norm_sqr()).sqrt();
    let phase = aa / abs_a;
    let c = abs_a / rho;
    let s = -(bb * phase.conj()) / rho;
    (Givens { c, s, plane: 0 }, phase * (rho * scale))
}

/// Rotation for right application that zeroes `y` in the row `[x, y] * R^H`.
///
/// Returns the rotation and the new value replacing `x`.
pub fn givens_compute_right(x: C64, y: C64) -> (Givens, C64) {
    let (g, r) = givens_compute(x.conj(), y.conj());
    (g, r.conj())
}

fn check_plane(g: &Givens, dim: usize) -> Result<()> {
    if g.plane + 1 >= dim {
        return Err(HessError::Index(format!(
            "rotation plane {} outside dimension {dim}",
            g.plane
        )));
    }
    Ok(())
}

/// `M[p..=p+1, cols] <- R * M[p..=p+1, cols]`.
pub fn givens_apply_left(g: &Givens, m: &mut CMat, cols: Range<usize>) -> Result<()> {
    check_plane(g, m.nrows())?;
    if cols.end > m.ncols() {
        return Err(HessError::Index(format!(
            "column window {cols:?} outside {} columns",
            m.ncols()
        )));
    }
    let p = g.plane;
    for j in cols {
        let (x, y) = g.rotate(m[(p, j)], m[(p + 1, j)]);
        m[(p, j)] = x;
        m[(p + 1, j)] = y;
    }
    Ok(())
}

/// `M[rows, p..=p+1] <- M[rows, p..=p+1] * R^H`.
pub fn givens_apply_right(g: &Givens, m: &mut CMat, rows: Range<usize>) -> Result<()> {
    check_plane(g, m.ncols())?;
    if rows.end > m.nrows() {
        return Err(HessError::Index(format!(
            "row window {rows:?} outside {} rows",
            m.nrows()
        )));
    }
    let p = g.plane;
    for i in rows {
        let (x, y) = g.rotate_right(m[(i, p)], m[(i, p + 1)]);
        m[(i, p)] = x;
        m[(i, p + 1)] = y;
    }
    Ok(())
}
