//! Timing sweeps, `.dat` tables and verification suites.

use std::fmt::Write as _;
use std::time::Instant;

use crate::dense::{frob, CMat};
use crate::error::{HessError, Result};
use crate::givens::Tolerance;
use crate::oracle::{backward_error, below_subdiagonal_max, dense_hessenberg, unitarity_error};
use crate::problem::{DPR1Problem, Kind};
use crate::real::hessenberg_reduce_real;
use crate::unitary::hessenberg_reduce_unitary;

/// Largest order for which the dense oracle is timed by default.
pub const DEFAULT_DENSE_CAP: usize = 2048;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    FastReal,
    FastUnitary,
    DenseOracle,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::FastReal => "fast_real",
            Method::FastUnitary => "fast_unitary",
            Method::DenseOracle => "dense_oracle",
        }
    }

    pub fn fast_for(kind: Kind) -> Self {
        match kind {
            Kind::Real => Method::FastReal,
            Kind::Unitary => Method::FastUnitary,
        }
    }
}

/// Output of a fast reduction in dense form.
#[derive(Clone, Debug)]
pub struct Reduced {
    pub h: CMat,
    pub q: Option<CMat>,
    pub rotation_count: usize,
}

/// Run the fast path matching the problem kind.
pub fn reduce_fast(problem: &DPR1Problem, accumulate_q: bool, tol: &Tolerance) -> Result<Reduced> {
    match problem.kind {
        Kind::Real => {
            let r = hessenberg_reduce_real(problem, accumulate_q, tol)?;
            Ok(Reduced {
                h: r.h_dense(),
                rotation_count: r.rotation_log.rotation_count(),
                q: r.q,
            })
        }
        Kind::Unitary => {
            let r = hessenberg_reduce_unitary(problem, accumulate_q, tol)?;
            Ok(Reduced {
                h: r.h_dense(),
                rotation_count: r.rotation_log.rotation_count(),
                q: r.q,
            })
        }
    }
}

/// Run the fast path without accumulating `Q` or expanding `H`.
pub fn reduce_condensed(problem: &DPR1Problem, tol: &Tolerance) -> Result<()> {
    match problem.kind {
        Kind::Real => hessenberg_reduce_real(problem, false, tol).map(|_| ()),
        Kind::Unitary => hessenberg_reduce_unitary(problem, false, tol).map(|_| ()),
    }
}

/// Median wall time of `reps` runs of `f`.
pub fn median_time<F>(reps: usize, mut f: F) -> Result<f64>
where
    F: FnMut() -> Result<()>,
{
    let mut times = Vec::with_capacity(reps.max(1));
    for _ in 0..reps.max(1) {
        let t = Instant::now();
        f()?;
        times.push(t.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    let m = times.len();
    Ok(if m % 2 == 1 {
        times[m / 2]
    } else {
        0.5 * (times[m / 2 - 1] + times[m / 2])
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let m = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// One cell of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    /// Median seconds per method; `None` when skipped.
    pub times: Vec<(Method, Option<f64>)>,
    pub backward_error: Option<f64>,
    pub unitarity_error: Option<f64>,
}

impl BenchRecord {
    pub fn time(&self, m: Method) -> Option<f64> {
        self.times.iter().find(|t| t.0 == m).and_then(|t| t.1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub kind: Kind,
    pub reps: usize,
    pub seed: u64,
    /// Time the dense oracle only up to this order.
    pub dense_cap: usize,
    /// Measure backward and unitarity errors only up to this order.
    pub error_cap: usize,
}

impl BenchConfig {
    pub fn new(kind: Kind) -> Self {
        BenchConfig {
            kind,
            reps: 3,
            seed: 1,
            dense_cap: DEFAULT_DENSE_CAP,
            error_cap: 1024,
        }
    }
}

/// Time one `(n, k)` cell. Generation and error checks are not timed.
pub fn run_cell(cfg: &BenchConfig, n: usize, k: usize) -> Result<BenchRecord> {
    let tol = Tolerance::default();
    let problem = DPR1Problem::random(cfg.kind, n, k, cfg.seed);
    let fast = median_time(cfg.reps, || reduce_condensed(&problem, &tol))?;
    let a = (n <= cfg.dense_cap || n <= cfg.error_cap).then(|| problem.dense());
    let dense = match &a {
        Some(a) if n <= cfg.dense_cap => Some(median_time(cfg.reps, || {
            dense_hessenberg(a);
            Ok(())
        })?),
        _ => None,
    };
    let (be, ue) = if n <= cfg.error_cap {
        let r = reduce_fast(&problem, true, &tol)?;
        let q = r.q.expect("requested");
        let a = a.as_ref().expect("built below the error cap");
        (Some(backward_error(a, &r.h, &q)), Some(unitarity_error(&q)))
    } else {
        (None, None)
    };
    Ok(BenchRecord {
        n,
        k,
        seed: cfg.seed,
        times: vec![(Method::fast_for(cfg.kind), Some(fast)), (Method::DenseOracle, dense)],
        backward_error: be,
        unitarity_error: ue,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Sweep {
    /// Vary `n` at fixed `k`.
    N { ns: Vec<usize>, k: usize },
    /// Vary `k` at fixed `n`.
    K { n: usize, ks: Vec<usize> },
}

impl Sweep {
    fn cells(&self) -> Vec<(usize, usize)> {
        match self {
            Sweep::N { ns, k } => ns.iter().map(|&n| (n, *k)).collect(),
            Sweep::K { n, ks } => ks.iter().map(|&k| (*n, k)).collect(),
        }
    }

    fn x(&self, r: &BenchRecord) -> usize {
        match self {
            Sweep::N { .. } => r.n,
            Sweep::K { .. } => r.k,
        }
    }

    fn axis(&self) -> &'static str {
        match self {
            Sweep::N { .. } => "n",
            Sweep::K { .. } => "k",
        }
    }
}

pub fn run_sweep(cfg: &BenchConfig, sweep: &Sweep) -> Result<Vec<BenchRecord>> {
    let cells = sweep.cells();
    for &(n, k) in &cells {
        if n == 0 || k == 0 || k > n {
            return Err(HessError::Shape(format!("invalid sweep cell n={n} k={k}")));
        }
    }
    cells.into_iter().map(|(n, k)| run_cell(cfg, n, k)).collect()
}

/// Slope of the fast-path time along the sweep axis.
pub fn sweep_slope(sweep: &Sweep, records: &[BenchRecord], method: Method) -> f64 {
    let (xs, ys): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter_map(|r| r.time(method).map(|t| (sweep.x(r) as f64, t)))
        .unzip();
    loglog_slope(&xs, &ys)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("nan".to_string(), |x| format!("{x:.6e}"))
}

/// Space-separated table: axis value, one time column per method, then the
/// error columns; slopes and skipped cells follow as comment lines.
pub fn format_dat(cfg: &BenchConfig, sweep: &Sweep, records: &[BenchRecord]) -> String {
    let fast = Method::fast_for(cfg.kind);
    let methods = [fast, Method::DenseOracle];
    let mut s = String::new();
    let fixed = match sweep {
        Sweep::N { k, .. } => format!("k={k}"),
        Sweep::K { n, .. } => format!("n={n}"),
    };
    writeln!(
        s,
        "# kind={} {fixed} seed={} reps={} dense_cap={}",
        cfg.kind.name(),
        cfg.seed,
        cfg.reps,
        cfg.dense_cap
    )
    .unwrap();
    let cols: Vec<&str> = methods.iter().map(|m| m.tag()).collect();
    writeln!(s, "# {} {} backward_error unitarity_error", sweep.axis(), cols.join(" ")).unwrap();
    for r in records {
        let times: Vec<String> = methods.iter().map(|m| fmt_opt(r.time(*m))).collect();
        writeln!(
            s,
            "{} {} {} {}",
            sweep.x(r),
            times.join(" "),
            fmt_opt(r.backward_error),
            fmt_opt(r.unitarity_error)
        )
        .unwrap();
    }
    for m in methods {
        let skipped: Vec<String> = records
            .iter()
            .filter(|r| r.time(m).is_none())
            .map(|r| sweep.x(r).to_string())
            .collect();
        if !skipped.is_empty() {
            writeln!(s, "# {} skipped above cap at {}={}", m.tag(), sweep.axis(), skipped.join(",")).unwrap();
        }
        let slope = sweep_slope(sweep, records, m);
        if slope.is_finite() {
            writeln!(s, "# slope {} log(time)/log({}) = {slope:.3}", m.tag(), sweep.axis()).unwrap();
        }
    }
    s
}

/// One verified instance.
#[derive(Clone, Debug, PartialEq)]
pub struct VerifyCase {
    pub kind: Kind,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub backward_error: f64,
    pub unitarity_error: f64,
    /// First failed check, if any.
    pub failure: Option<String>,
}

impl VerifyCase {
    pub fn line(&self) -> String {
        let status = match &self.failure {
            None => "PASS".to_string(),
            Some(f) => format!("FAIL {f}"),
        };
        format!(
            "{status} kind={} n={} k={} seed={} backward_error={:.3e} unitarity_error={:.3e}",
            self.kind.name(),
            self.n,
            self.k,
            self.seed,
            self.backward_error,
            self.unitarity_error
        )
    }
}

/// Suite selection for [`verify`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Real,
    Unitary,
    All,
}

impl std::str::FromStr for Suite {
    type Err = HessError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(Suite::Real),
            "unitary" => Ok(Suite::Unitary),
            "all" => Ok(Suite::All),
            other => Err(HessError::Parse(format!("unknown suite {other:?}"))),
        }
    }
}

pub const DEFAULT_VERIFY_SIZES: [usize; 4] = [8, 16, 32, 64];
const VERIFY_RANKS: [usize; 3] = [1, 2, 4];

/// Reduce random instances and check exact Hessenberg shape, backward error
/// and unitarity of `Q` at `c_s n u`. `corrupt` perturbs one entry below the
/// subdiagonal of every output as a negative control.
pub fn verify(suite: Suite, sizes: &[usize], seeds: &[u64], corrupt: bool) -> Result<Vec<VerifyCase>> {
    let tol = Tolerance::default();
    let kinds: &[Kind] = match suite {
        Suite::Real => &[Kind::Real],
        Suite::Unitary => &[Kind::Unitary],
        Suite::All => &[Kind::Real, Kind::Unitary],
    };
    let mut out = Vec::new();
    for &kind in kinds {
        for &n in sizes {
            for &k in &VERIFY_RANKS {
                if k > n || (kind == Kind::Unitary && n % (2 * k) != 0) {
                    continue;
                }
                for &seed in seeds {
                    out.push(verify_case(kind, n, k, seed, corrupt, &tol)?);
                }
            }
        }
    }
    Ok(out)
}

fn verify_case(kind: Kind, n: usize, k: usize, seed: u64, corrupt: bool, tol: &Tolerance) -> Result<VerifyCase> {
    let problem = DPR1Problem::random(kind, n, k, seed);
    let a = problem.dense();
    let mut r = reduce_fast(&problem, true, tol)?;
    if corrupt && n >= 3 {
        r.h[(n - 1, 0)] += crate::dense::ONE * (1e-8 * frob(&a));
    }
    let q = r.q.as_ref().expect("requested");
    let be = backward_error(&a, &r.h, q);
    let ue = unitarity_error(q);
    let bound = tol.structure_threshold(n, 1.0);
    let mut failure = None;
    let below = below_subdiagonal_max(&r.h);
    if below != 0.0 {
        let (i, j) = first_below_subdiagonal(&r.h);
        failure = Some(format!("hessenberg_shape at ({i}, {j}) magnitude {below:.3e}"));
    } else if !(be <= bound) {
        failure = Some(format!("backward_error {be:.3e} > {bound:.3e}"));
    } else if !(ue <= bound) {
        failure = Some(format!("unitarity_error {ue:.3e} > {bound:.3e}"));
    }
    Ok(VerifyCase {
        kind,
        n,
        k,
        seed,
        backward_error: be,
        unitarity_error: ue,
        failure,
    })
}

fn first_below_subdiagonal(h: &CMat) -> (usize, usize) {
    let n = h.nrows();
    for j in 0..n {
        for i in j + 2..n {
            if h[(i, j)].norm() != 0.0 {
                return (i, j);
            }
        }
    }
    (0, 0)
}
