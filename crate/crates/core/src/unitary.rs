//! Hessenberg reduction for `A = D + U V^H` with unimodular diagonal `D`.
//!
//! The diagonal is first brought to block CMV form. Each step then cleans one
//! column of `A` with rotations from the left and chases the resulting bulges
//! out of the trailing block CMV window, so that the window is again block CMV,
//! shifted down and right by one entry.
//!
//! Rows that leave the window are never touched from the left again. They are
//! stored as the short vector they hold at that moment together with the
//! later right rotations that reach their support (a Givens-vector
//! representation).

use num_complex::Complex64 as C64;

use crate::band::BandMatrix;
use crate::cmv::{cmv_allowed, cmv_expand, diagonal_to_cmv, CMVFactored};
use crate::dense::{CMat, Rows, ZERO};
use crate::error::{HessError, Result};
use crate::givens::{givens_compute, givens_compute_right, Givens, Tolerance};
use crate::journal::{Journal, RotationLog};
use crate::problem::{DPR1Problem, Kind};

/// Frozen row: entries `start..start + values.len()` of the unitary part at
/// freeze time, to be followed by rotations `first_rotation..` of the log.
#[derive(Clone, Debug, PartialEq)]
pub struct WVector {
    pub start: usize,
    pub values: Vec<C64>,
    pub first_rotation: usize,
}

/// Condensed upper Hessenberg `H = M + (PU)(PV)^H` with `M` unitary.
///
/// Row `j` of `M` is `w_j` followed by the right rotations recorded after
/// row `j` was frozen.
#[derive(Clone, Debug, PartialEq)]
pub struct GivensVectorHessenberg {
    pub n: usize,
    pub k: usize,
    pub w_vectors: Vec<WVector>,
    /// Right rotations in application order, `R^H` acting on columns.
    pub rotation_sequences: Vec<Givens>,
    /// `step_starts[s]` is the first entry of `rotation_sequences` recorded
    /// during step `s`.
    pub step_starts: Vec<usize>,
    pub pu: Rows,
    pub pv: Rows,
}

impl GivensVectorHessenberg {
    /// Row `j` of the unitary part restricted to columns `j - 1..`.
    fn unitary_row(&self, j: usize) -> Vec<C64> {
        let mut row = vec![ZERO; self.n];
        let w = &self.w_vectors[j];
        row[w.start..w.start + w.values.len()].copy_from_slice(&w.values);
        for g in &self.rotation_sequences[w.first_rotation..] {
            let (x, y) = g.rotate_right(row[g.plane], row[g.plane + 1]);
            row[g.plane] = x;
            row[g.plane + 1] = y;
        }
        row
    }

    /// Number of stored scalars (complex entries count once, a rotation
    /// counts as two).
    pub fn storage_entries(&self) -> usize {
        let w: usize = self.w_vectors.iter().map(|w| w.values.len()).sum();
        w + 2 * self.rotation_sequences.len() + self.pu.data.len() + self.pv.data.len()
    }
}

/// Row `j` of `H`, with exact zeros left of the subdiagonal.
pub fn gv_reconstruct_row(gv: &GivensVectorHessenberg, j: usize) -> Result<Vec<C64>> {
    if j >= gv.n {
        return Err(HessError::Index(format!("row {j} outside order {}", gv.n)));
    }
    let mut row = gv.unitary_row(j);
    let first = j.saturating_sub(1);
    for (c, h) in row.iter_mut().enumerate() {
        if c < first {
            *h = ZERO;
        } else {
            *h += gv.pu.dot_h(j, &gv.pv, c);
        }
    }
    Ok(row)
}

pub fn gv_to_dense(gv: &GivensVectorHessenberg) -> CMat {
    let n = gv.n;
    let mut h = CMat::zeros(n, n);
    for j in 0..n {
        let row = gv_reconstruct_row(gv, j).expect("row in range");
        for (c, v) in row.into_iter().enumerate() {
            h[(j, c)] = v;
        }
    }
    h
}

/// Working state of the chase.
///
/// `window` holds the unitary part `M` in rows `shift..`; its entries left of
/// column `shift` are stale and never read. Rows above `shift` are frozen.
#[derive(Clone, Debug)]
pub struct ChasingState {
    n: usize,
    k: usize,
    shift: usize,
    window: BandMatrix,
    u: Rows,
    v: Rows,
    standby: Vec<Givens>,
    journal: RotationLog,
    frozen: Vec<WVector>,
    right_log: Vec<Givens>,
    step_starts: Vec<usize>,
    /// Last column where a frozen row may be nonzero.
    frontier: Option<usize>,
    /// Largest entry set to zero by structure enforcement so far.
    max_enforced: f64,
    max_dropped: f64,
    /// Largest entry enforced during the current step.
    step_enforced: f64,
    /// Set once the trailing window is reduced densely.
    dense_tail: bool,
    tail_order: usize,
    tol: Tolerance,
}

impl ChasingState {
    /// State for `cmv + U V^H` with `U = [u1; 0]`. `journal` is the similarity
    /// that produced this pair.
    pub fn new(cmv: &CMVFactored, u1: &CMat, v: Rows, journal: Journal, tol: Tolerance) -> Result<Self> {
        let k = cmv.k;
        let n = cmv.n();
        if u1.shape() != (k, k) || v.n != n || v.k != k {
            return Err(HessError::Shape(format!(
                "expected U1 {k}x{k} and V {n}x{k}, got U1 {}x{} and V {}x{}",
                u1.nrows(),
                u1.ncols(),
                v.n,
                v.k
            )));
        }
        let window = cmv_expand(cmv)?.widen(3 * k + 1, 3 * k + 2)?;
        let mut u = Rows::zeros(n, k);
        for i in 0..k {
            for t in 0..k {
                u.set(i, t, u1[(i, t)]);
            }
        }
        Ok(ChasingState {
            n,
            k,
            shift: 0,
            window,
            u,
            v,
            standby: Vec::new(),
            journal,
            frozen: Vec::new(),
            right_log: Vec::new(),
            step_starts: Vec::new(),
            frontier: None,
            max_enforced: 0.0,
            max_dropped: 0.0,
            step_enforced: 0.0,
            dense_tail: false,
            tail_order: default_tail_order(k),
            tol,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of completed steps.
    pub fn shift(&self) -> usize {
        self.shift
    }

    pub fn journal(&self) -> &Journal {
        &self.journal
    }

    /// Rotations currently deferred on the right.
    pub fn standby(&self) -> &[Givens] {
        &self.standby
    }

    pub fn max_dropped(&self) -> f64 {
        self.max_dropped
    }

    pub fn max_enforced(&self) -> f64 {
        self.max_enforced
    }

    pub fn v_active(&self) -> &Rows {
        &self.v
    }

    pub fn u_active(&self) -> &Rows {
        &self.u
    }

    fn m(&self, i: usize, c: usize) -> C64 {
        self.window.get(i, c)
    }

    /// Entry of the full matrix `M + U V^H` for `i >= shift`.
    fn a(&self, i: usize, c: usize) -> C64 {
        self.m(i, c) + self.u.dot_h(i, &self.v, c)
    }

    /// Store a window entry; fill outside the band must be negligible and is
    /// dropped.
    #[inline]
    fn put(&mut self, i: usize, c: usize, v: C64) -> Result<()> {
        if self.window.in_band(i, c) {
            return self.window.set(i, c, v);
        }
        let mag = v.norm();
        self.max_dropped = self.max_dropped.max(mag);
        if mag > self.tol.structure_threshold(self.n, 1.0) {
            return Err(HessError::Integrity {
                step: self.shift,
                i,
                j: c,
                mag,
            });
        }
        Ok(())
    }

    fn left(&mut self, g: Givens) -> Result<()> {
        if g.is_identity() {
            return Ok(());
        }
        let p = g.plane;
        let lo = self.shift.max(p.saturating_sub(self.window.lower_bw()));
        let hi = self.n.min(p + 2 + self.window.upper_bw());
        for c in lo..hi {
            let (x, y) = g.rotate(self.m(p, c), self.m(p + 1, c));
            self.put(p, c, x)?;
            self.put(p + 1, c, y)?;
        }
        self.u.rotate(&g);
        self.v.rotate(&g);
        self.journal.push_rotation(g);
        Ok(())
    }

    fn right(&mut self, g: Givens) -> Result<()> {
        if g.is_identity() {
            return Ok(());
        }
        let p = g.plane;
        let lo = self.shift.max(p.saturating_sub(self.window.upper_bw()));
        let hi = self.n.min(p + 2 + self.window.lower_bw());
        for i in lo..hi {
            let (x, y) = g.rotate_right(self.m(i, p), self.m(i, p + 1));
            self.put(i, p, x)?;
            self.put(i, p + 1, y)?;
        }
        if let Some(f) = self.frontier {
            if p <= f {
                self.right_log.push(g);
                if p == f {
                    self.frontier = Some(f + 1);
                }
            }
        }
        Ok(())
    }

    /// Left rotation at plane `r` zeroing `(r + 1, c)`. The same rotation also
    /// annihilates part of row `r` right of the band; those entries join the
    /// fit so that rounding already present in the rows is not amplified.
    fn rollup_rotation(&self, r: usize, c: usize, block_start: bool) -> Givens {
        let k = self.k;
        let cols = if block_start { r + k..r + 2 * k + 1 } else { r + 2 * k..r + 2 * k + 1 };
        let implied: Vec<(C64, C64)> = cols
            .filter(|&j| j < self.n)
            .map(|j| (self.m(r, j), self.m(r + 1, j)))
            .collect();
        least_squares_rotation((self.m(r, c), self.m(r + 1, c)), &implied).at(r)
    }

    fn similarity(&mut self, g: Givens) -> Result<()> {
        self.left(g)?;
        self.right(g)
    }

    /// Left rotations making column `shift` of `A` upper Hessenberg, bottom
    /// to top. Their right halves are returned, not applied.
    pub fn cleaning_rotations(&mut self) -> Result<Vec<Givens>> {
        let o = self.shift;
        let m = self.n - o;
        let top = self.k.min(m - 1);
        let mut x: Vec<C64> = (0..=top).map(|r| self.a(o + r, o)).collect();
        let mut out = Vec::new();
        for r in (1..top).rev() {
            let (g, rv) = givens_compute(x[r], x[r + 1]);
            x[r] = rv;
            x[r + 1] = ZERO;
            let g = g.at(o + r);
            self.left(g)?;
            if !g.is_identity() {
                out.push(g);
            }
        }
        Ok(out)
    }

    /// One step: clean column `shift` and restore the block CMV structure of
    /// the trailing window.
    pub fn chase_step(&mut self) -> Result<()> {
        let (o, k, n) = (self.shift, self.k, self.n);
        if o + 2 >= n {
            return Err(HessError::Index(format!("no chase step {o} for order {n}")));
        }
        let m = n - o;
        self.step_starts.push(self.right_log.len());
        if self.dense_tail || m <= self.tail_order() {
            return self.dense_step();
        }
        let clean = self.cleaning_rotations()?;

        // Bulges in the upper triangles, from the right.
        let mut low_plane = usize::MAX;
        let mut p = 0;
        while 1 + 2 * p * k < m {
            let i = 1 + 2 * p * k;
            let hi = (3 * k - 1 + 2 * p * k).min(m - 1);
            for c in ((2 * k + 2 + 2 * p * k)..=hi).rev() {
                let g = givens_compute_right(self.m(o + i, o + c - 1), self.m(o + i, o + c)).0;
                low_plane = low_plane.min(o + c - 1);
                self.similarity(g.at(o + c - 1))?;
            }
            p += 1;
        }

        // Roll-up of the odd lower block columns; right halves on standby.
        let mut p = 1;
        while 2 * p * k < m - 1 {
            let c = (2 * p - 1) * k;
            let hi = (m - 1).min((2 * p + 1) * k);
            for r in ((2 * p * k)..hi).rev() {
                let g = self.rollup_rotation(o + r, o + c, (r - 2 * p * k) == 0);
                self.left(g)?;
                if !g.is_identity() {
                    low_plane = low_plane.min(o + r);
                    self.standby.push(g);
                }
            }
            p += 1;
        }
        if let Some(top) = clean.iter().map(|g| g.plane).max() {
            assert!(
                top + 1 < low_plane,
                "deferred rotations overlap the chase at step {o}"
            );
        }
        for g in std::mem::take(&mut self.standby) {
            self.right(g)?;
        }
        for g in clean {
            self.right(g)?;
        }

        // Fill below the subdiagonal blocks, bottom to top in each column.
        let mut p = 0;
        loop {
            let c = if p == 0 { 1 } else { (2 * p - 1) * k + 1 };
            if c >= m {
                break;
            }
            let hi = (2 * (p + 1) * k).min(m - 1);
            for i in ((2 * p + 1) * k + 2..=hi).rev() {
                let g = givens_compute(self.m(o + i - 1, o + c), self.m(o + i, o + c)).0;
                self.similarity(g.at(o + i - 1))?;
            }
            p += 1;
        }

        // Remaining fill right of the upper triangles.
        let mut p = 0;
        while 1 + 2 * p * k < m {
            for a in 1..k {
                let i = a + 2 * p * k;
                let c = i + 2 * k + 1;
                if c >= m {
                    continue;
                }
                let g = givens_compute_right(self.m(o + i, o + c - 1), self.m(o + i, o + c)).0;
                self.similarity(g.at(o + c - 1))?;
            }
            p += 1;
        }

        self.step_enforced = 0.0;
        self.enforce_structure()?;
        let periodic = self.k <= REPAIR_PERIODIC_MAX_K && o % REPAIR_PERIOD == 0;
        if periodic || self.step_enforced > self.tol.u * n as f64 {
            self.repair_bottom()?;
        }
        self.freeze_row(o);
        self.shift += 1;
        Ok(())
    }

    /// Order below which the trailing window is reduced densely.
    pub fn tail_order(&self) -> usize {
        self.tail_order
    }

    /// Trailing order at which the chase hands over to the dense sweep.
    /// Values below `2k + 2` are raised to it.
    pub fn set_tail_order(&mut self, order: usize) {
        self.tail_order = order.max(2 * self.k + 2);
    }

    /// Whether the trailing window is being reduced densely.
    pub fn in_dense_tail(&self) -> bool {
        self.dense_tail
    }

    /// Reduce column `shift` of the trailing window with a dense sweep of
    /// similarity rotations. The first call absorbs the trailing rows of
    /// `U V^H` into the window.
    fn dense_step(&mut self) -> Result<()> {
        let (o, n) = (self.shift, self.n);
        if !self.dense_tail {
            let m = n - o;
            self.window = self.window.widen(m.max(self.window.lower_bw()), m.max(self.window.upper_bw()))?;
            for i in o..n {
                let first = if i == o { o.saturating_sub(1) } else { o };
                for c in first..n {
                    let v = self.m(i, c) + self.u.dot_h(i, &self.v, c);
                    self.window.set(i, c, v)?;
                }
                for t in 0..self.k {
                    self.u.set(i, t, ZERO);
                }
            }
            self.dense_tail = true;
        }
        for i in (o + 2..n).rev() {
            let g = givens_compute(self.m(i - 1, o), self.m(i, o)).0;
            self.similarity(g.at(i - 1))?;
            self.window.set(i, o, ZERO)?;
        }
        self.freeze_row(o);
        self.shift += 1;
        Ok(())
    }

    /// Restore orthonormality of the last rows and columns of the window,
    /// which are complete rows and columns of the unitary part, and
    /// re-impose the pattern on them.
    fn repair_bottom(&mut self) -> Result<()> {
        let (o, k, n) = (self.shift, self.k, self.n);
        let reach = self.window.lower_bw().max(self.window.upper_bw());
        let q = REPAIR_ROWS_PER_K * k;
        let top = self.frontier.map_or(o, |f| f.max(o)) + 1;
        if n < q + reach + top {
            return Ok(());
        }
        let lo = n - q;
        let c0 = lo - reach;
        let w = n - c0;
        let half = C64::new(0.5, 0.0);
        let r = CMat::from_fn(q, w, |i, c| self.m(lo + i, c0 + c));
        let e = &r * r.adjoint() - CMat::identity(q, q);
        let r = &r - (&e * &r) * half;
        self.store_pattern(lo, c0, &r)?;
        let cm = CMat::from_fn(w, q, |i, c| self.m(c0 + i, lo + c));
        let e = cm.adjoint() * &cm - CMat::identity(q, q);
        let cm = &cm - (&cm * &e) * half;
        self.store_pattern(c0, lo, &cm)?;
        Ok(())
    }

    /// Write `block` at `(r0, c0)`, keeping only entries of the trailing
    /// pattern.
    fn store_pattern(&mut self, r0: usize, c0: usize, block: &CMat) -> Result<()> {
        let o = self.shift;
        for i in 0..block.nrows() {
            for c in 0..block.ncols() {
                let (gi, gc) = (r0 + i, c0 + c);
                let v = block[(i, c)];
                if self.window.in_band(gi, gc) && cmv_allowed(gi - o - 1, gc - o - 1, self.k) {
                    self.window.set(gi, gc, v)?;
                } else {
                    self.check_enforced(gi, gc, v)?;
                }
            }
        }
        Ok(())
    }

    fn check_enforced(&mut self, i: usize, c: usize, v: C64) -> Result<()> {
        let mag = v.norm();
        self.max_enforced = self.max_enforced.max(mag);
        self.step_enforced = self.step_enforced.max(mag);
        if mag > self.tol.structure_threshold(self.n, 1.0) {
            return Err(HessError::Integrity {
                step: self.shift,
                i,
                j: c,
                mag,
            });
        }
        Ok(())
    }

    /// Zero the pattern entries of the shifted window and the rows of `U`
    /// below its support, failing if any of them is not negligible.
    fn enforce_structure(&mut self) -> Result<()> {
        let (o, k, n) = (self.shift, self.k, self.n);
        let (lo, up) = (self.window.lower_bw(), self.window.upper_bw());
        for i in o + 1..n {
            for c in (o + 1).max(i.saturating_sub(lo))..n.min(i + up + 1) {
                if cmv_allowed(i - o - 1, c - o - 1, k) {
                    continue;
                }
                let v = self.m(i, c);
                if v == ZERO {
                    continue;
                }
                self.check_enforced(i, c, v)?;
                self.window.set(i, c, ZERO)?;
            }
        }
        let r = o + k + 1;
        if r < n {
            let scale = self.u.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let limit = self.tol.zero_threshold(n, scale);
            for t in 0..k {
                let v = self.u.get(r, t);
                if v.norm() > limit {
                    return Err(HessError::Integrity {
                        step: o,
                        i: r,
                        j: t,
                        mag: v.norm(),
                    });
                }
                self.u.set(r, t, ZERO);
            }
        }
        Ok(())
    }

    fn freeze_row(&mut self, j: usize) {
        let start = j.saturating_sub(1);
        let end = self.n.min(j + self.window.upper_bw() + 1);
        let mut values: Vec<C64> = (start..end).map(|c| self.m(j, c)).collect();
        while values.len() > 1 && *values.last().unwrap() == ZERO {
            values.pop();
        }
        let last = start + values.len() - 1;
        self.frontier = Some(self.frontier.map_or(last, |f| f.max(last)));
        self.frozen.push(WVector {
            start,
            values,
            first_rotation: self.right_log.len(),
        });
    }

    /// Dense `M + U V^H` as currently represented, with exact zeros below
    /// the subdiagonal in the reduced columns.
    pub fn to_dense(&self) -> CMat {
        let n = self.n;
        let gv = self.snapshot();
        let mut out = CMat::zeros(n, n);
        for i in 0..n {
            let first = if i < self.shift {
                let row = gv.unitary_row(i);
                out.row_mut(i).iter_mut().zip(row).for_each(|(o, v)| *o = v);
                i.saturating_sub(1)
            } else {
                let first = i.saturating_sub(1).min(self.shift);
                for c in first..n {
                    out[(i, c)] = self.m(i, c);
                }
                first
            };
            for c in first..n {
                out[(i, c)] += self.u.dot_h(i, &self.v, c);
            }
        }
        out
    }

    /// Unitary part of the trailing window, rows and columns `shift..`.
    pub fn trailing_unitary(&self) -> CMat {
        let o = self.shift;
        CMat::from_fn(self.n - o, self.n - o, |i, c| self.m(o + i, o + c))
    }

    fn snapshot(&self) -> GivensVectorHessenberg {
        GivensVectorHessenberg {
            n: self.n,
            k: self.k,
            w_vectors: self.frozen.clone(),
            rotation_sequences: self.right_log.clone(),
            step_starts: self.step_starts.clone(),
            pu: self.u.clone(),
            pv: self.v.clone(),
        }
    }

    /// Freeze the remaining rows and return the condensed output together
    /// with the journal.
    pub fn finish(mut self) -> (GivensVectorHessenberg, Journal) {
        for j in self.shift..self.n {
            self.freeze_row(j);
        }
        self.shift = self.n;
        let journal = std::mem::take(&mut self.journal);
        (self.snapshot(), journal)
    }
}

/// Result of a unitary-path reduction.
#[derive(Clone, Debug)]
pub struct UnitaryReduction {
    pub h: GivensVectorHessenberg,
    /// CMV reduction followed by all left rotations; replays to `Q` with
    /// `H = Q A Q^H`.
    pub rotation_log: Journal,
    pub q: Option<CMat>,
}

impl UnitaryReduction {
    pub fn h_dense(&self) -> CMat {
        gv_to_dense(&self.h)
    }
}

/// Bottom re-orthonormalization runs every `REPAIR_PERIOD` steps for
/// bandwidths up to this, and otherwise only after a visible defect.
const REPAIR_PERIODIC_MAX_K: usize = 4;
const REPAIR_PERIOD: usize = 4;
const REPAIR_ROWS_PER_K: usize = 10;

pub fn default_tail_order(k: usize) -> usize {
    128.max(8 * k + 2)
}

/// Rotation whose second row annihilates `[x0; x1]` and whose first row
/// annihilates every pair in `implied`, in the least-squares sense.
fn least_squares_rotation(explicit: (C64, C64), implied: &[(C64, C64)]) -> Givens {
    let scale = implied
        .iter()
        .chain(std::iter::once(&explicit))
        .map(|(a, b)| a.norm().max(b.norm()))
        .fold(0.0, f64::max);
    if implied.is_empty() || scale == 0.0 {
        return givens_compute(explicit.0, explicit.1).0;
    }
    // Rows of the constraint matrix acting on (s, c).
    let rows = std::iter::once((explicit.0 / scale, explicit.1 / scale))
        .chain(implied.iter().map(|(a, b)| (-b.conj() / scale, a.conj() / scale)));
    let (mut g00, mut g11, mut g01) = (0.0, 0.0, ZERO);
    for (a, b) in rows {
        g00 += a.norm_sqr();
        g11 += b.norm_sqr();
        g01 += a.conj() * b;
    }
    let lambda = 0.5 * (g00 + g11) - (0.5 * (g00 - g11)).hypot(g01.norm());
    let v1 = (g01, C64::new(lambda - g00, 0.0));
    let v2 = (C64::new(lambda - g11, 0.0), g01.conj());
    let (s, c) = if v1.0.norm_sqr() + v1.1.norm_sqr() >= v2.0.norm_sqr() + v2.1.norm_sqr() {
        v1
    } else {
        v2
    };
    let len = (s.norm_sqr() + c.norm_sqr()).sqrt();
    if len == 0.0 {
        return givens_compute(explicit.0, explicit.1).0;
    }
    let (s, c) = (s / len, c / len);
    if c.norm() == 0.0 {
        return Givens { c: 0.0, s: s / s.norm(), plane: 0 };
    }
    let phase = c.conj() / c.norm();
    Givens { c: c.norm(), s: s * phase, plane: 0 }
}

/// Initial chasing state for `problem`.
pub fn chasing_state(problem: &DPR1Problem, tol: &Tolerance) -> Result<ChasingState> {
    if problem.kind != Kind::Unitary {
        return Err(HessError::Kind(
            "hessenberg_reduce_unitary needs a unimodular diagonal".into(),
        ));
    }
    problem.check_kind(tol)?;
    let red = diagonal_to_cmv(&problem.d, &problem.u, tol)?;
    let mut v = Rows::from_cmat(&problem.v);
    red.journal.apply_rows(&mut v)?;
    ChasingState::new(&red.cmv, &red.u1, v, red.journal, *tol)
}

pub fn hessenberg_reduce_unitary(
    problem: &DPR1Problem,
    accumulate_q: bool,
    tol: &Tolerance,
) -> Result<UnitaryReduction> {
    hessenberg_reduce_unitary_observed(problem, accumulate_q, tol, None, |_| {})
}

/// [`hessenberg_reduce_unitary`] with an optional dense tail order, calling
/// `observe(state)` after every step.
pub fn hessenberg_reduce_unitary_observed<F>(
    problem: &DPR1Problem,
    accumulate_q: bool,
    tol: &Tolerance,
    tail_order: Option<usize>,
    mut observe: F,
) -> Result<UnitaryReduction>
where
    F: FnMut(&ChasingState),
{
    let n = problem.n();
    let mut state = chasing_state(problem, tol)?;
    if let Some(t) = tail_order {
        state.set_tail_order(t);
    }
    for _ in 0..n.saturating_sub(2) {
        state.chase_step()?;
        observe(&state);
    }
    let (h, rotation_log) = state.finish();
    let q = if accumulate_q {
        Some(rotation_log.replay(n)?)
    } else {
        None
    };
    Ok(UnitaryReduction { h, rotation_log, q })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmv::cmv_validate;
    use crate::dense::{frob, matmul};
    use crate::oracle::{backward_error, below_subdiagonal_max, dense_hessenberg};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    #[test]
    fn identity_problem_stays_identity() {
        let n = 8;
        let p = DPR1Problem::new(
            Kind::Unitary,
            vec![C64::new(1.0, 0.0); n],
            CMat::zeros(n, 2),
            CMat::zeros(n, 2),
        )
        .unwrap();
        let red = hessenberg_reduce_unitary(&p, true, &tol()).unwrap();
        assert_eq!(red.rotation_log.rotation_count(), 0);
        assert!(frob(&(red.h_dense() - CMat::identity(n, n))) < 1e-15);
    }

    #[test]
    fn scalar_case_has_no_cleaning_rotations() {
        let p = DPR1Problem::random(Kind::Unitary, 8, 1, 3);
        let mut state = chasing_state(&p, &tol()).unwrap();
        assert!(state.cleaning_rotations().unwrap().is_empty());
    }

    #[test]
    fn lockstep_with_dense_similarity() {
        for &(n, k, seed) in &[(8, 2, 1u64), (12, 3, 2), (16, 2, 3), (12, 1, 4), (16, 4, 5)] {
            let p = DPR1Problem::random(Kind::Unitary, n, k, seed);
            let a = p.dense();
            let na = frob(&a);
            let eps = f64::EPSILON;
            let mut steps = 0;
            hessenberg_reduce_unitary_observed(&p, false, &tol(), Some(0), |s| {
                steps += 1;
                let q = s.journal().replay(n).unwrap();
                let expect = matmul(&matmul(&q, &a), &q.adjoint());
                let got = s.to_dense();
                assert!(
                    frob(&(&got - &expect)) <= 1e3 * n as f64 * eps * na,
                    "n={n} k={k} step {}",
                    s.shift()
                );
                for c in 0..s.shift() {
                    for i in c + 2..n {
                        assert!(expect[(i, c)].norm() <= 1e3 * n as f64 * eps * na);
                    }
                }
                if s.in_dense_tail() {
                    return;
                }
                let t = s.trailing_unitary();
                for i in 0..t.nrows() {
                    for c in 0..t.ncols() {
                        if !cmv_allowed(i, c, k) {
                            assert_eq!(t[(i, c)], ZERO, "n={n} k={k} ({i}, {c})");
                        }
                    }
                }
                if t.nrows() % k == 0 {
                    let rep = cmv_validate(&t, k, 100.0 * n as f64 * eps).unwrap();
                    assert_eq!(rep.max_violation(), 0.0);
                }
                assert!(s.standby().is_empty());
                for r in s.shift() + k + 1..n {
                    assert!(s.u_active().is_row_zero(r));
                }
            })
            .unwrap();
            assert_eq!(steps, n - 2);
        }
    }

    #[test]
    fn backward_error_and_gv_fidelity() {
        let eps = f64::EPSILON;
        for &(n, k, seed) in &[(8, 2, 7u64), (24, 3, 8), (32, 4, 9), (16, 1, 10), (24, 6, 11)] {
            let p = DPR1Problem::random(Kind::Unitary, n, k, seed);
            let a = p.dense();
            let red = hessenberg_reduce_unitary(&p, true, &tol()).unwrap();
            let q = red.q.as_ref().unwrap();
            let h = red.h_dense();
            assert_eq!(below_subdiagonal_max(&h), 0.0);
            let be = backward_error(&a, &h, q);
            assert!(be <= 100.0 * n as f64 * eps, "n={n} k={k} backward error {be:e}");
            let direct = matmul(&matmul(q, &a), &q.adjoint());
            assert!(frob(&(&h - &direct)) <= 1e3 * n as f64 * eps * frob(&a));
            assert!(red.h.storage_entries() <= 16 * n * k + 8 * n);
        }
    }

    #[test]
    fn chase_and_dense_tail_agree_with_repair_active() {
        let eps = f64::EPSILON;
        for &(n, k, seed) in &[(96, 2, 31u64), (120, 3, 32), (70, 1, 33)] {
            let p = DPR1Problem::random(Kind::Unitary, n, k, seed);
            let a = p.dense();
            for tail in [Some(0), None, Some(n)] {
                let red = hessenberg_reduce_unitary_observed(&p, true, &tol(), tail, |_| {}).unwrap();
                let h = red.h_dense();
                assert_eq!(below_subdiagonal_max(&h), 0.0);
                let be = backward_error(&a, &h, red.q.as_ref().unwrap());
                assert!(be <= 100.0 * n as f64 * eps, "n={n} k={k} tail={tail:?} backward error {be:e}");
            }
        }
    }

    #[test]
    fn similarity_invariants_match_dense_oracle() {
        let p = DPR1Problem::random(Kind::Unitary, 8, 2, 21);
        let a = p.dense();
        let h = hessenberg_reduce_unitary(&p, false, &tol()).unwrap().h_dense();
        let (h2, _) = dense_hessenberg(&a);
        let scale = 1e3 * 8.0 * f64::EPSILON * frob(&a);
        assert!((frob(&h) - frob(&h2)).abs() <= scale);
        assert!((h.trace() - h2.trace()).norm() <= scale);
    }

    #[test]
    fn last_row_is_its_w_vector() {
        let p = DPR1Problem::random(Kind::Unitary, 8, 2, 22);
        let gv = hessenberg_reduce_unitary(&p, false, &tol()).unwrap().h;
        let w = &gv.w_vectors[7];
        assert_eq!(w.first_rotation, gv.rotation_sequences.len());
        let row = gv_reconstruct_row(&gv, 7).unwrap();
        for (t, v) in w.values.iter().enumerate() {
            let c = w.start + t;
            assert!((row[c] - v - gv.pu.dot_h(7, &gv.pv, c)).norm() < 1e-15);
        }
        assert!(gv_reconstruct_row(&gv, 8).is_err());
    }

    #[test]
    fn minimal_order_and_wrong_kind() {
        let p = DPR1Problem::random(Kind::Unitary, 4, 2, 23);
        let red = hessenberg_reduce_unitary(&p, true, &tol()).unwrap();
        let be = backward_error(&p.dense(), &red.h_dense(), red.q.as_ref().unwrap());
        assert!(be <= 100.0 * 4.0 * f64::EPSILON);
        let p = DPR1Problem::random(Kind::Real, 8, 2, 24);
        assert!(matches!(
            hessenberg_reduce_unitary(&p, false, &tol()),
            Err(HessError::Kind(_))
        ));
        let p = DPR1Problem::random(Kind::Unitary, 10, 2, 25);
        assert!(matches!(
            hessenberg_reduce_unitary(&p, false, &tol()),
            Err(HessError::Shape(_))
        ));
    }
}
