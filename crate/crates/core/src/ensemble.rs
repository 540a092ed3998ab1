//! Random-ensemble certification runs and their CSV output.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{gap_report_with, GapReport};
use crate::channel::{derive_params, random_diamond, DiamondParams};
use crate::error::{Error, Result};
use crate::protocol::{brute_force_rmac, GammaForm};

pub const CSV_COLUMNS: [&str; 24] = [
    "seed_index",
    "n",
    "C01",
    "C02",
    "C13",
    "C23",
    "C012",
    "C123",
    "delta",
    "gamma",
    "branch",
    "t1",
    "t2",
    "t3",
    "r_ach",
    "r_up",
    "kappa",
    "theorem_bound",
    "lemma1_lhs",
    "lemma1_bound",
    "delta_term",
    "lemma2_bound",
    "method",
    "pass",
];

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleConfig {
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub scale: f64,
    pub gamma_form: GammaForm,
    /// Grid resolution of the brute-force oracle; 0 skips it.
    pub grid_steps: usize,
}

impl EnsembleConfig {
    pub fn new(n: usize, trials: usize, seed: u64) -> Self {
        Self {
            n,
            trials,
            seed,
            scale: 1.0,
            gamma_form: GammaForm::Corrected,
            grid_steps: 0,
        }
    }
}

/// One `delta > 0` instance.
#[derive(Clone, Debug)]
pub struct EnsembleRow {
    pub seed_index: u64,
    pub params: DiamondParams,
    pub report: GapReport,
    /// `LP - grid` when the grid oracle ran, with its allowed maximum.
    pub grid_gap: Option<(f64, f64)>,
}

impl EnsembleRow {
    /// Whether the grid oracle (if run) brackets the LP optimum.
    pub fn grid_ok(&self) -> bool {
        self.grid_gap
            .map_or(true, |(gap, allowed)| gap >= -1e-9 && gap <= allowed)
    }

    pub fn pass(&self) -> bool {
        self.report.all_checks_pass && self.grid_ok()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleSummary {
    pub n: usize,
    pub seed: u64,
    pub scale: f64,
    pub gamma_form: GammaForm,
    pub grid_steps: usize,
    pub trials: usize,
    pub delta_positive: usize,
    pub max_kappa: f64,
    pub max_lemma1_lhs: f64,
    pub max_delta_term: f64,
    pub theorem_bound: f64,
    pub falsifications: usize,
    /// Instances with `r_ach > r_up + 1e-7`; reported apart from the
    /// falsification count.
    pub unsound: usize,
    pub closed_form_rows: usize,
    pub runtime_seconds: f64,
}

pub struct EnsembleRun {
    pub rows: Vec<EnsembleRow>,
    pub summary: EnsembleSummary,
}

/// Evaluates `trials` channels `random_diamond(n, seed + i, scale)`, keeping
/// those with `delta > 0`. Rows come back in `seed_index` order whatever the
/// thread count.
pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<EnsembleRun> {
    if cfg.trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    if cfg.n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    if !(cfg.scale > 0.0 && cfg.scale.is_finite()) {
        return Err(Error::Domain(format!("scale must be positive, got {}", cfg.scale)));
    }
    if cfg.grid_steps != 0 && cfg.grid_steps < 10 {
        return Err(Error::Domain("grid_steps must be 0 or at least 10".into()));
    }
    let start = Instant::now();
    let rows: Vec<Option<EnsembleRow>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|i| evaluate(cfg, i))
        .collect::<Result<_>>()?;
    let rows: Vec<EnsembleRow> = rows.into_iter().flatten().collect();

    let max = |f: &dyn Fn(&EnsembleRow) -> f64| {
        rows.iter()
            .map(|r| round_sig(f(r)))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let summary = EnsembleSummary {
        n: cfg.n,
        seed: cfg.seed,
        scale: cfg.scale,
        gamma_form: cfg.gamma_form,
        grid_steps: cfg.grid_steps,
        trials: cfg.trials,
        delta_positive: rows.len(),
        max_kappa: max(&|r| r.report.kappa),
        max_lemma1_lhs: max(&|r| r.report.lemma1_lhs),
        max_delta_term: max(&|r| r.report.delta_term),
        theorem_bound: crate::bounds::theorem_bound(cfg.n),
        falsifications: rows.iter().filter(|r| !r.pass()).count(),
        unsound: rows.iter().filter(|r| !r.report.soundness.holds).count(),
        closed_form_rows: rows
            .iter()
            .filter(|r| r.report.method == crate::protocol::Method::ClosedForm)
            .count(),
        runtime_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(EnsembleRun { rows, summary })
}

fn evaluate(cfg: &EnsembleConfig, i: u64) -> Result<Option<EnsembleRow>> {
    let seed_index = cfg.seed.wrapping_add(i);
    let dc = random_diamond(cfg.n, seed_index, cfg.scale);
    let params = derive_params(&dc)?;
    if params.delta <= 0.0 {
        return Ok(None);
    }
    let report = gap_report_with(&dc, &params, cfg.gamma_form)?;
    let grid_gap = (cfg.grid_steps > 0).then(|| {
        let pent = &report.pentagon;
        let grid = brute_force_rmac(&params, pent, cfg.grid_steps);
        let allowed = (params.c01 + params.c02 + pent.cmacp) / cfg.grid_steps as f64;
        (report.r_ach - grid, allowed)
    });
    Ok(Some(EnsembleRow {
        seed_index,
        params,
        report,
        grid_gap,
    }))
}

/// `x` with 12 significant digits in the shortest of fixed or exponent form,
/// like C's `%.12g`.
pub fn fmt_sig(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-4..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// `x` rounded to the value its CSV cell encodes.
pub fn round_sig(x: f64) -> f64 {
    fmt_sig(x).parse().unwrap_or(x)
}

pub fn csv_header() -> String {
    CSV_COLUMNS.join(",")
}

pub fn csv_row(row: &EnsembleRow) -> String {
    let p = &row.params;
    let r = &row.report;
    let nums = [
        p.c01,
        p.c02,
        p.c13,
        p.c23,
        p.c012,
        p.c123,
        p.delta,
        r.gamma,
    ];
    let mut s = format!("{},{}", row.seed_index, r.n);
    for x in nums {
        write!(s, ",{}", fmt_sig(x)).unwrap();
    }
    write!(s, ",{}", r.branch.index()).unwrap();
    for x in [
        r.schedule.t1,
        r.schedule.t2,
        r.schedule.t3,
        r.r_ach,
        r.r_up,
        r.kappa,
        r.theorem_bound,
        r.lemma1_lhs,
        r.lemma1_bound,
        r.delta_term,
        r.lemma2_bound,
    ] {
        write!(s, ",{}", fmt_sig(x)).unwrap();
    }
    write!(s, ",{},{}", r.method, row.pass()).unwrap();
    s
}

pub fn to_csv(rows: &[EnsembleRow]) -> String {
    let mut out = csv_header();
    out.push('\n');
    for row in rows {
        out.push_str(&csv_row(row));
        out.push('\n');
    }
    out
}

pub fn write_csv(rows: &[EnsembleRow], path: &Path) -> Result<()> {
    std::fs::write(path, to_csv(rows)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
