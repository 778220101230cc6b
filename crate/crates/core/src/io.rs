//! Plain-text formats for problems, polynomials, condensed outputs and
//! journals. Floats are written in shortest round-trip form, so parsing an
//! emitted file reproduces it bit for bit.

use std::fmt::Write as _;

use num_complex::Complex64 as C64;

use crate::companion::MatrixPolynomial;
use crate::dense::{CMat, Rows};
use crate::error::{HessError, Result};
use crate::givens::Tolerance;
use crate::journal::{Journal, JournalEntry};
use crate::problem::{DPR1Problem, Kind};
use crate::real::CondensedGenHessenberg;
use crate::unitary::GivensVectorHessenberg;

/// A generated problem together with its provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemFile {
    pub seed: u64,
    /// Number of trailing padding entries requested for the unitary path.
    pub pad: usize,
    pub problem: DPR1Problem,
}

impl ProblemFile {
    pub fn generate(kind: Kind, n: usize, k: usize, seed: u64, pad: usize) -> Result<Self> {
        if n == 0 || k == 0 || k > n {
            return Err(HessError::Shape(format!("need n >= 1 and 1 <= k <= n, got n={n} k={k}")));
        }
        Ok(ProblemFile {
            seed,
            pad,
            problem: DPR1Problem::random(kind, n, k, seed),
        })
    }

    pub fn emit(&self) -> String {
        let p = &self.problem;
        let mut s = format!(
            "DPR1 kind={} n={} k={} seed={} pad={}\nd\n",
            p.kind.name(),
            p.n(),
            p.k(),
            self.seed,
            self.pad
        );
        for z in &p.d {
            match p.kind {
                Kind::Real => writeln!(s, "{}", z.re).unwrap(),
                Kind::Unitary => writeln!(s, "{} {}", z.re, z.im).unwrap(),
            }
        }
        s.push_str("u\n");
        write_cmat_rows(&mut s, &p.u);
        s.push_str("v\n");
        write_cmat_rows(&mut s, &p.v);
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut t = Tokens::new(text);
        t.expect("DPR1")?;
        let kind: Kind = t.key("kind")?.parse()?;
        let n: usize = t.key_parsed("n")?;
        let k: usize = t.key_parsed("k")?;
        let seed: u64 = t.key_parsed("seed")?;
        let pad: usize = t.key_parsed("pad")?;
        t.expect("d")?;
        let mut d = Vec::with_capacity(n);
        for _ in 0..n {
            let re = t.float()?;
            let im = if kind == Kind::Unitary { t.float()? } else { 0.0 };
            d.push(C64::new(re, im));
        }
        t.expect("u")?;
        let u = t.cmat(n, k)?;
        t.expect("v")?;
        let v = t.cmat(n, k)?;
        t.end()?;
        let problem = DPR1Problem::new(kind, d, u, v)?;
        problem.check_kind(&Tolerance::default())?;
        Ok(ProblemFile { seed, pad, problem })
    }
}

/// `POLY m degree` followed by `degree + 1` coefficient blocks, lowest first,
/// each `m` rows of `2m` reals with real and imaginary parts interleaved.
pub fn parse_poly(text: &str) -> Result<MatrixPolynomial> {
    let mut t = Tokens::new(text);
    t.expect("POLY")?;
    let m: usize = t.parsed()?;
    let degree: usize = t.parsed()?;
    let coeffs = (0..=degree).map(|_| t.cmat(m, m)).collect::<Result<Vec<_>>>()?;
    t.end()?;
    MatrixPolynomial::new(coeffs)
}

pub fn emit_poly(p: &MatrixPolynomial) -> String {
    let mut s = format!("POLY {} {}\n", p.m, p.degree());
    for a in &p.coefficients {
        write_cmat_rows(&mut s, a);
    }
    s
}

/// Real-path output: lower band of `tril(A)` and the generators.
pub fn emit_condensed(h: &CondensedGenHessenberg) -> String {
    let n = h.n();
    let mut s = format!("HREAL n={n} k={} lbw={}\n", h.u.k, h.tril_a.lower_bw());
    for i in 0..n {
        let cells: Vec<String> = (i.saturating_sub(h.tril_a.lower_bw())..=i)
            .map(|j| fmt_c(h.tril_a.get(i, j)))
            .collect();
        writeln!(s, "{}", cells.join(" ")).unwrap();
    }
    s.push_str("u\n");
    write_rows(&mut s, &h.u);
    s.push_str("v\n");
    write_rows(&mut s, &h.v);
    s
}

/// Unitary-path output in Givens-Vector form.
pub fn emit_gv(h: &GivensVectorHessenberg) -> String {
    let mut s = format!(
        "HGV n={} k={} rows={} rotations={}\n",
        h.n,
        h.k,
        h.w_vectors.len(),
        h.rotation_sequences.len()
    );
    for w in &h.w_vectors {
        let cells: Vec<String> = w.values.iter().map(|z| fmt_c(*z)).collect();
        writeln!(s, "w {} {} {}", w.start, w.first_rotation, cells.join(" ")).unwrap();
    }
    for g in &h.rotation_sequences {
        writeln!(s, "g {} {} {} {}", g.plane, g.c, g.s.re, g.s.im).unwrap();
    }
    s.push_str("pu\n");
    write_rows(&mut s, &h.pu);
    s.push_str("pv\n");
    write_rows(&mut s, &h.pv);
    s
}

pub fn emit_journal(j: &Journal) -> String {
    let mut s = format!("JOURNAL entries={}\n", j.len());
    for e in j.entries() {
        match e {
            JournalEntry::Rotation(g) => {
                writeln!(s, "R {} {} {} {}", g.plane, g.c, g.s.re, g.s.im).unwrap()
            }
            JournalEntry::Block(b) => {
                writeln!(s, "B {} {}", b.offset, b.active.nrows()).unwrap();
                write_cmat_rows(&mut s, &b.active);
            }
        }
    }
    s
}

fn fmt_c(z: C64) -> String {
    format!("{} {}", z.re, z.im)
}

fn write_cmat_rows(s: &mut String, m: &CMat) {
    for i in 0..m.nrows() {
        let cells: Vec<String> = (0..m.ncols()).map(|j| fmt_c(m[(i, j)])).collect();
        writeln!(s, "{}", cells.join(" ")).unwrap();
    }
}

fn write_rows(s: &mut String, r: &Rows) {
    for i in 0..r.n {
        let cells: Vec<String> = r.row(i).iter().map(|z| fmt_c(*z)).collect();
        writeln!(s, "{}", cells.join(" ")).unwrap();
    }
}

/// Whitespace tokenizer skipping `#` comments, with line numbers for errors.
struct Tokens<'a> {
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let items = text
            .lines()
            .enumerate()
            .flat_map(|(ln, line)| {
                let body = line.split('#').next().unwrap_or("");
                body.split_whitespace().map(move |w| (ln + 1, w))
            })
            .collect();
        Tokens { items, pos: 0 }
    }

    fn next(&mut self) -> Result<(usize, &'a str)> {
        let t = self
            .items
            .get(self.pos)
            .copied()
            .ok_or_else(|| HessError::Parse("unexpected end of input".into()))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect(&mut self, word: &str) -> Result<()> {
        let (ln, w) = self.next()?;
        if w != word {
            return Err(HessError::Parse(format!("line {ln}: expected {word:?}, found {w:?}")));
        }
        Ok(())
    }

    fn key(&mut self, name: &str) -> Result<&'a str> {
        let (ln, w) = self.next()?;
        w.strip_prefix(name)
            .and_then(|r| r.strip_prefix('='))
            .ok_or_else(|| HessError::Parse(format!("line {ln}: expected {name}=..., found {w:?}")))
    }

    fn key_parsed<T: std::str::FromStr>(&mut self, name: &str) -> Result<T> {
        let ln = self.items.get(self.pos).map_or(0, |t| t.0);
        let v = self.key(name)?;
        v.parse()
            .map_err(|_| HessError::Parse(format!("line {ln}: bad value {v:?} for {name}")))
    }

    fn parsed<T: std::str::FromStr>(&mut self) -> Result<T> {
        let (ln, w) = self.next()?;
        w.parse()
            .map_err(|_| HessError::Parse(format!("line {ln}: cannot parse {w:?}")))
    }

    fn float(&mut self) -> Result<f64> {
        self.parsed()
    }

    fn cmat(&mut self, rows: usize, cols: usize) -> Result<CMat> {
        let mut m = CMat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = C64::new(self.float()?, self.float()?);
            }
        }
        Ok(m)
    }

    fn end(&self) -> Result<()> {
        match self.items.get(self.pos) {
            None => Ok(()),
            Some((ln, w)) => Err(HessError::Parse(format!("line {ln}: trailing token {w:?}"))),
        }
    }
}
