//! Randomised and grid certification suites.
//!
//! Every suite is deterministic in `(trials, seed)` and returns a
//! [`SuiteReport`] of per-check falsification counts.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{
    check_delta_ratio, check_fiedler, check_prop1, verify_lemma_delta, verify_lemma_diff,
};
use crate::capacity::{rate_bits, waterfill};
use crate::channel::{derive_params, random_diamond};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, PsdMatrix};
use crate::protocol::{
    brute_force_rmac, closed_form_schedule, gamma_prime, lp_rmac, lp_violation, select_pentagon,
    Branch, GammaForm,
};
use crate::rng::SplitMix64;

/// Random feasible covariances compared against each water-filling result.
pub const WATERFILL_RIVALS: usize = 200;
pub const WATERFILL_RIVAL_TOL: f64 = 1e-8;
pub const WATERFILL_GRID_TOL: f64 = 1e-5;
pub const DEFAULT_LP_GRID_STEPS: usize = 2000;
/// `|LP - closed form|` tolerance.
pub const LP_MATCH_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Fiedler,
    Prop1,
    Lemmas,
    LpOracle,
    WaterfillOracle,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 6] = [
        "fiedler",
        "prop1",
        "lemmas",
        "lp-oracle",
        "waterfill-oracle",
        "all",
    ];
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "fiedler" => Suite::Fiedler,
            "prop1" => Suite::Prop1,
            "lemmas" => Suite::Lemmas,
            "lp-oracle" => Suite::LpOracle,
            "waterfill-oracle" => Suite::WaterfillOracle,
            "all" => Suite::All,
            other => {
                return Err(Error::Domain(format!(
                    "unknown suite '{other}'; valid suites: {}",
                    Suite::NAMES.join(", ")
                )))
            }
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = [
            Suite::Fiedler,
            Suite::Prop1,
            Suite::Lemmas,
            Suite::LpOracle,
            Suite::WaterfillOracle,
            Suite::All,
        ]
        .iter()
        .position(|s| s == self)
        .unwrap();
        f.write_str(Suite::NAMES[i])
    }
}

/// Outcome of one named check across a suite.
#[derive(Clone, Debug, Serialize)]
pub struct Tally {
    pub check: String,
    pub cases: usize,
    pub failures: usize,
    /// Largest `lhs - rhs` seen (positive means violated).
    pub worst_excess: f64,
    /// Reported but not counted as a falsification.
    pub informational: bool,
}

impl Tally {
    fn new(check: &str) -> Self {
        Self {
            check: check.to_string(),
            cases: 0,
            failures: 0,
            worst_excess: f64::NEG_INFINITY,
            informational: false,
        }
    }

    fn informational(check: &str) -> Self {
        Self {
            informational: true,
            ..Self::new(check)
        }
    }

    fn record(&mut self, failed: bool, excess: f64) {
        self.cases += 1;
        self.failures += failed as usize;
        self.worst_excess = self.worst_excess.max(excess);
    }

    fn merge(&mut self, other: &Tally) {
        self.cases += other.cases;
        self.failures += other.failures;
        self.worst_excess = self.worst_excess.max(other.worst_excess);
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub tallies: Vec<Tally>,
}

impl SuiteReport {
    pub fn falsifications(&self) -> usize {
        self.tallies
            .iter()
            .filter(|t| !t.informational)
            .map(|t| t.failures)
            .sum()
    }

    pub fn tally(&self, check: &str) -> Option<&Tally> {
        self.tallies.iter().find(|t| t.check == check)
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "suite {}: {} falsifications", self.suite, self.falsifications())?;
        for t in &self.tallies {
            writeln!(
                f,
                "  {:<28} {:>8} cases {:>6} {} (worst excess {:.3e})",
                t.check,
                t.cases,
                t.failures,
                if t.informational { "noted" } else { "failed" },
                t.worst_excess
            )?;
        }
        Ok(())
    }
}

/// Combines per-case tallies (in case order) into one list.
fn fold_tallies(template: Vec<Tally>, cases: Vec<Vec<Tally>>) -> Vec<Tally> {
    cases.iter().fold(template, |mut acc, case| {
        for (a, c) in acc.iter_mut().zip(case) {
            a.merge(c);
        }
        acc
    })
}

pub fn random_matrix(rng: &mut SplitMix64, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.normal())
}

/// `G G^T` for an `n x rank` Gaussian `G`, scaled by `10^u`, `u ~ U(-2, 2)`.
pub fn random_psd(rng: &mut SplitMix64, n: usize, rank: usize) -> PsdMatrix {
    let g = random_matrix(rng, n, rank);
    let scale = 10f64.powf(rng.uniform_in(-2.0, 2.0));
    PsdMatrix::gram(&g).scale(scale)
}

pub fn fiedler_suite(trials: usize, seed: u64) -> Result<SuiteReport> {
    let cases: Vec<Vec<Tally>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = SplitMix64::new(seed.wrapping_add(i as u64));
            let n = rng.int_in(1, 6);
            let ra = rng.int_in(1, n);
            let rb = rng.int_in(1, n);
            let a = random_psd(&mut rng, n, ra);
            let b = random_psd(&mut rng, n, rb);
            let c = check_fiedler(&a, &b)?;
            let mut t = Tally::new("fiedler");
            t.record(!c.holds, c.det - c.product - c.tolerance);
            Ok(vec![t])
        })
        .collect::<Result<_>>()?;
    let mut tallies = fold_tallies(vec![Tally::new("fiedler")], cases);

    let mut eq = Tally::new("fiedler-equality-identity");
    for n in 1..=6 {
        let i = PsdMatrix::identity(n);
        let c = check_fiedler(&i, &i)?;
        let exact = (c.det - c.product).abs() <= 1e-12 * c.product;
        eq.record(!(c.holds && exact), (c.det - c.product).abs() / c.product);
    }
    tallies.push(eq);
    Ok(SuiteReport {
        suite: Suite::Fiedler.to_string(),
        tallies,
    })
}

pub fn prop1_suite(max_n: usize) -> SuiteReport {
    let mut grid = Tally::new("prop1-grid");
    let mut limit = Tally::new("prop1-limit");
    for n in 1..=max_n {
        let c = check_prop1(n);
        let sup = 2.0 * n as f64;
        grid.record(c.violations > 0, c.max_f - sup);
        limit.record(!c.limit_ok, sup - c.limit_value);
    }
    SuiteReport {
        suite: Suite::Prop1.to_string(),
        tallies: vec![grid, limit],
    }
}

const LEMMA_CHECKS: [&str; 9] = [
    "lemma1",
    "lemma1-c123-full-power",
    "lemma1-csum-uniform",
    "lemma1-uniform-gap",
    "lemma1-one-step",
    "lemma2",
    "lemma2-ratio-bound",
    "lemma2-fiedler-step",
    "lemma2-ratio",
];

/// Lemma checks on `trials` random channels (`n = 1 + i mod 4`, both
/// pentagons) and the determinant-ratio bound on `trials` random `(A, B)`
/// pairs with `n <= 6`.
pub fn lemmas_suite(trials: usize, seed: u64) -> Result<SuiteReport> {
    let template = || {
        let mut v: Vec<Tally> = LEMMA_CHECKS.iter().map(|c| Tally::new(c)).collect();
        v.push(Tally::new("ratio-random-pairs"));
        v
    };
    let cases: Vec<Vec<Tally>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut t = template();
            let s = seed.wrapping_add(i as u64);
            let dc = random_diamond(1 + i % 4, s, 1.0);
            let p = derive_params(&dc)?;
            for branch in [Branch::Branch1, Branch::Branch2] {
                let pent = select_pentagon(&dc, &p, branch)?;
                let l1 = verify_lemma_diff(&dc, &p, &pent)?;
                for (k, c) in [l1.lemma, l1.c123_bound, l1.csum_bound, l1.uniform_gap, l1.one_step]
                    .iter()
                    .enumerate()
                {
                    t[k].record(!c.holds, -c.margin());
                }
            }
            let l2 = verify_lemma_delta(&dc, &p)?;
            for (k, c) in [l2.lemma, l2.ratio_bound, l2.ratio.fiedler_step, l2.ratio.ratio]
                .iter()
                .enumerate()
            {
                t[5 + k].record(!c.holds, -c.margin());
            }

            let mut rng = SplitMix64::new(s ^ 0xD1B5_4A32_D192_ED03);
            let n = rng.int_in(1, 6);
            let a = PsdMatrix::gram(&random_matrix(&mut rng, n, n));
            let b = PsdMatrix::gram(&random_matrix(&mut rng, n, n));
            let r = check_delta_ratio(&a, &b)?;
            t[9].record(!r.passed(), -r.ratio.margin());
            Ok(t)
        })
        .collect::<Result<_>>()?;
    Ok(SuiteReport {
        suite: Suite::Lemmas.to_string(),
        tallies: fold_tallies(template(), cases),
    })
}

/// First `count` channels with `delta > 0` among `random_diamond(1 + i mod 4,
/// seed + i, 1.0)`, `i = 0, 1, ...`, as `(i, channel)` pairs.
pub fn delta_positive_channels(
    count: usize,
    seed: u64,
) -> Result<Vec<(u64, crate::channel::DiamondChannel)>> {
    let mut out = Vec::with_capacity(count);
    let mut i = 0u64;
    while out.len() < count {
        let dc = random_diamond(1 + (i % 4) as usize, seed.wrapping_add(i), 1.0);
        if derive_params(&dc)?.delta > 0.0 {
            out.push((i, dc));
        }
        i += 1;
    }
    Ok(out)
}

/// Vertex-enumeration LP against the closed-form schedule and the grid
/// oracle on `trials` channels with `delta > 0`, active branch under the
/// corrected selector.
///
/// Falsifications: the grid exceeding the LP, the grid trailing the LP by
/// more than `(C01 + C02 + C'MAC) / grid_steps`, and a feasible closed-form
/// schedule that violates the LP or beats its optimum. A closed form that is
/// feasible but strictly below the LP optimum is tallied separately as
/// `closed-form-below-lp`.
pub fn lp_oracle_suite(trials: usize, seed: u64, grid_steps: usize) -> Result<SuiteReport> {
    let template = || {
        vec![
            Tally::new("grid-above-lp"),
            Tally::new("grid-below-lp-lipschitz"),
            Tally::new("closed-form-lp-violation"),
            Tally::new("closed-form-above-lp"),
            Tally::informational("closed-form-below-lp"),
            Tally::informational("closed-form-infeasible"),
        ]
    };
    let channels = delta_positive_channels(trials, seed)?;
    let cases: Vec<Vec<Tally>> = channels
        .par_iter()
        .map(|(_, dc)| {
            let mut t = template();
            let p = derive_params(dc)?;
            let branch = Branch::from_gamma(gamma_prime(&p, GammaForm::Corrected));
            let pent = select_pentagon(dc, &p, branch)?;
            let lp = lp_rmac(&p, &pent);
            let grid = brute_force_rmac(&p, &pent, grid_steps);
            let lipschitz = (p.c01 + p.c02 + pent.cmacp) / grid_steps as f64;
            t[0].record(grid > lp.r_mac + 1e-9, grid - lp.r_mac);
            t[1].record(lp.r_mac - grid > lipschitz, lp.r_mac - grid - lipschitz);
            let cf = closed_form_schedule(&p, &pent, branch);
            match cf.feasible() {
                Some(s) => {
                    let v = lp_violation(&p, &pent, &s.schedule, s.r_mac);
                    t[2].record(v > 1e-9, v);
                    t[3].record(s.r_mac > lp.r_mac + LP_MATCH_TOL, s.r_mac - lp.r_mac);
                    t[4].record(
                        lp.r_mac - s.r_mac > LP_MATCH_TOL,
                        lp.r_mac - s.r_mac,
                    );
                    t[5].record(false, 0.0);
                }
                None => t[5].record(true, 0.0),
            }
            Ok(t)
        })
        .collect::<Result<_>>()?;
    Ok(SuiteReport {
        suite: Suite::LpOracle.to_string(),
        tallies: fold_tallies(template(), cases),
    })
}

/// Best rate over a uniform grid of power splits of a diagonal channel with
/// `gains.len() <= 3` modes, all power spent.
pub fn diagonal_grid_capacity(gains: &[f64], power: f64, steps: usize) -> f64 {
    let rate = |p: &[f64]| {
        0.5 * p
            .iter()
            .zip(gains)
            .map(|(p, g)| (g * p).ln_1p())
            .sum::<f64>()
            / std::f64::consts::LN_2
    };
    let h = power / steps as f64;
    match gains.len() {
        1 => rate(&[power]),
        2 => (0..=steps)
            .map(|k| {
                let a = k as f64 * h;
                rate(&[a, power - a])
            })
            .fold(f64::NEG_INFINITY, f64::max),
        3 => (0..=steps)
            .flat_map(|k1| (0..=steps - k1).map(move |k2| (k1, k2)))
            .map(|(k1, k2)| {
                let a = k1 as f64 * h;
                let b = k2 as f64 * h;
                rate(&[a, b, (power - a - b).max(0.0)])
            })
            .fold(f64::NEG_INFINITY, f64::max),
        _ => panic!("grid oracle handles at most three modes"),
    }
}

/// Water-filling against `WATERFILL_RIVALS` random feasible covariances on
/// `trials` random `(H, P)` with `n = 1..=4`, and against the grid oracle on
/// diagonal channels with up to three modes.
pub fn waterfill_oracle_suite(trials: usize, seed: u64) -> Result<SuiteReport> {
    let cases: Vec<Vec<Tally>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = SplitMix64::new(seed.wrapping_add(i as u64));
            let n = 1 + i % 4;
            let h = random_matrix(&mut rng, n, n);
            let power = 10f64.powf(rng.uniform_in(-1.0, 1.5));
            let wf = waterfill(&h, power)?;
            let mut t = Tally::new("waterfill-vs-random-covariances");
            for _ in 0..WATERFILL_RIVALS {
                let rank = rng.int_in(1, n);
                let q = PsdMatrix::gram(&random_matrix(&mut rng, n, rank));
                let used = power * rng.uniform();
                let q = q.scale(used / q.trace());
                let rival = rate_bits(&h, &q)?;
                t.record(
                    rival > wf.capacity_bits + WATERFILL_RIVAL_TOL,
                    rival - wf.capacity_bits,
                );
            }
            Ok(vec![t])
        })
        .collect::<Result<_>>()?;
    let mut tallies = fold_tallies(vec![Tally::new("waterfill-vs-random-covariances")], cases);

    let diag_cases = (trials / 10).max(10);
    let diag: Vec<Vec<Tally>> = (0..diag_cases)
        .into_par_iter()
        .map(|i| {
            let mut rng = SplitMix64::new(seed.wrapping_add(1 << 32).wrapping_add(i as u64));
            let n = 1 + i % 3;
            let gains: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.uniform_in(-1.5, 1.5))).collect();
            let power = 10f64.powf(rng.uniform_in(-1.0, 1.0));
            let h = Matrix::diag(&gains.iter().map(|g| g.sqrt()).collect::<Vec<_>>());
            let wf = waterfill(&h, power)?;
            let steps = if n == 3 { 1500 } else { 100_000 };
            let grid = diagonal_grid_capacity(&gains, power, steps);
            let mut t = Tally::new("waterfill-vs-diagonal-grid");
            let gap = (wf.capacity_bits - grid).abs();
            t.record(gap > WATERFILL_GRID_TOL || grid > wf.capacity_bits + 1e-12, gap);
            Ok(vec![t])
        })
        .collect::<Result<_>>()?;
    tallies.extend(fold_tallies(vec![Tally::new("waterfill-vs-diagonal-grid")], diag));
    Ok(SuiteReport {
        suite: Suite::WaterfillOracle.to_string(),
        tallies,
    })
}

/// Runs `suite` (every suite for [`Suite::All`]).
pub fn run_suite(suite: Suite, trials: usize, seed: u64) -> Result<Vec<SuiteReport>> {
    Ok(match suite {
        Suite::Fiedler => vec![fiedler_suite(trials, seed)?],
        Suite::Prop1 => vec![prop1_suite(8)],
        Suite::Lemmas => vec![lemmas_suite(trials, seed)?],
        Suite::LpOracle => vec![lp_oracle_suite(trials, seed, DEFAULT_LP_GRID_STEPS)?],
        Suite::WaterfillOracle => vec![waterfill_oracle_suite(trials, seed)?],
        Suite::All => {
            let mut all = Vec::new();
            for s in [
                Suite::Fiedler,
                Suite::Prop1,
                Suite::Lemmas,
                Suite::LpOracle,
                Suite::WaterfillOracle,
            ] {
                all.extend(run_suite(s, trials, seed)?);
            }
            all
        }
    })
}
