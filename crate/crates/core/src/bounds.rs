//! Upper bounds, the gap between them and the MDF-MAC rate, and numerical
//! certificates for the inequalities the constant-gap argument rests on.
//!
//! Failed inequalities are recorded in [`Check`]s rather than raised, so an
//! ensemble run always completes and can count falsifications.

use serde::Serialize;

use crate::capacity::{mac_sum_capacity, DEFAULT_MAC_MAX_ITER, DEFAULT_MAC_TOL_BITS};
use crate::channel::{derive_params, DiamondChannel, DiamondParams, NODE_POWER};
use crate::error::{Error, Result};
use crate::linalg::{logdet_i_plus, PsdMatrix};
use crate::protocol::{
    branch_achievability, gamma_prime, Branch, GammaForm, MacPentagon, Method, Schedule,
};

/// Numerical slack for non-strict inequalities between computed quantities.
pub const CHECK_TOL: f64 = 1e-9;
/// Below this margin a strict inequality is flagged as near-equality.
pub const STRICT_MARGIN: f64 = 1e-12;
/// Agreement required between the direct gap and its closed-form expression.
pub const KAPPA_RECONCILE_TOL: f64 = 1e-7;
/// Slack for `r_ach <= r_up`.
pub const SOUNDNESS_TOL: f64 = 1e-7;

/// `lhs <= rhs` (within a tolerance), with the values kept for reporting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Check {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub near_equality: bool,
}

impl Check {
    pub fn le(lhs: f64, rhs: f64, tol: f64) -> Self {
        Self {
            lhs,
            rhs,
            holds: lhs <= rhs + tol,
            near_equality: lhs > rhs - tol,
        }
    }

    /// Strict `lhs < rhs`, accepted as `lhs <= rhs` when the two agree to
    /// within [`STRICT_MARGIN`]; such cases are flagged.
    pub fn lt(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            holds: lhs <= rhs,
            near_equality: lhs > rhs - STRICT_MARGIN,
        }
    }

    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

pub fn theorem_bound(n: usize) -> f64 {
    let n = n as f64;
    n * (8f64.sqrt() * n).log2()
}

pub fn lemma1_bound(n: usize) -> f64 {
    let n = n as f64;
    0.5 * n * (4.0 * n).log2()
}

pub fn lemma2_bound(n: usize) -> f64 {
    let n = n as f64;
    0.5 * n * (2.0 * n).log2()
}

/// Gap between one round of iterative water-filling and the MAC sum capacity.
pub fn one_step_bound(n: usize) -> f64 {
    0.5 * n as f64
}

/// `max(C123 - C13 - C23, 0)`.
pub fn delta_term(p: &DiamondParams) -> f64 {
    (p.c123 - p.c13 - p.c23).max(0.0)
}

/// Half-duplex cut-set upper bound for the given branch.
pub fn upper_bound(p: &DiamondParams, branch: Branch) -> Result<f64> {
    // branch 2 is branch 1 with the relays relabelled; delta is invariant
    let (a, b, ab) = match branch {
        Branch::Branch1 => (p.c01, p.c02, p.c13),
        Branch::Branch2 => (p.c02, p.c01, p.c23),
    };
    let d1 = a + ab;
    let d2 = p.c123 - ab + b;
    if d1 <= 0.0 || d2 <= 0.0 {
        return Err(Error::DegenerateChannel(format!(
            "upper bound for branch {branch} has a non-positive denominator ({d1}, {d2})"
        )));
    }
    Ok(a * (b + ab) / d1 - b * p.delta / (d2 * d1) + delta_term(p))
}

/// Closed-form gap between [`upper_bound`] and the branch's closed-form rate
/// for pentagon `pent`.
pub fn kappa_formula(p: &DiamondParams, pent: &MacPentagon) -> Result<f64> {
    let (a, b, ab) = match pent.branch {
        Branch::Branch1 => (p.c01, p.c02, p.c13),
        Branch::Branch2 => (p.c02, p.c01, p.c23),
    };
    let denom = (a + ab) * (pent.cmacp - ab + b) * (p.c123 - ab + b);
    if denom <= 0.0 {
        return Err(Error::DegenerateChannel(format!(
            "gap expression has non-positive denominator {denom}"
        )));
    }
    Ok(b * (p.c123 - pent.cmacp) * p.delta / denom + delta_term(p))
}

/// Certificate for `C123 - C'MAC < (n/2) log2(4n)` and the steps of its proof.
#[derive(Clone, Debug, Serialize)]
pub struct LemmaDiffCheck {
    pub n: usize,
    /// `C123 - C'MAC < (n/2) log2(4n)`
    pub lemma: Check,
    /// `C123 <= ½ log2 det(I + 2A)`, `A = H123 H123^T`
    pub c123_bound: Check,
    /// `½ log2 det(I + A/n) <= C_sum`
    pub csum_bound: Check,
    /// `C123 - C_sum <= (n/2) log2(2n)`
    pub uniform_gap: Check,
    /// `C_sum - C'MAC <= n/2`
    pub one_step: Check,
    pub c_sum: f64,
    pub mac_converged: bool,
}

impl LemmaDiffCheck {
    pub fn passed(&self) -> bool {
        self.lemma.holds
            && self.c123_bound.holds
            && self.csum_bound.holds
            && self.uniform_gap.holds
            && self.one_step.holds
    }
}

pub fn verify_lemma_diff(
    dc: &DiamondChannel,
    p: &DiamondParams,
    pent: &MacPentagon,
) -> Result<LemmaDiffCheck> {
    let n = dc.n;
    let h123 = dc.h123();
    let a = PsdMatrix::gram(&h123);
    let mac = mac_sum_capacity(
        &dc.h13,
        &dc.h23,
        NODE_POWER,
        NODE_POWER,
        DEFAULT_MAC_TOL_BITS,
        DEFAULT_MAC_MAX_ITER,
    )?;
    let full_power = 0.5 * logdet_i_plus(&a.scale(2.0))?;
    let uniform = 0.5 * logdet_i_plus(&a.scale(1.0 / n as f64))?;
    Ok(LemmaDiffCheck {
        n,
        lemma: Check::lt(p.c123 - pent.cmacp, lemma1_bound(n)),
        c123_bound: Check::le(p.c123, full_power, CHECK_TOL),
        csum_bound: Check::le(uniform, mac.c_sum, CHECK_TOL),
        uniform_gap: Check::le(p.c123 - mac.c_sum, lemma2_bound(n), CHECK_TOL),
        one_step: Check::le(mac.c_sum - pent.cmacp, one_step_bound(n), CHECK_TOL),
        c_sum: mac.c_sum,
        mac_converged: mac.converged,
    })
}

/// Certificate for the determinant ratio behind `delta <= (n/2) log2(2n)`.
///
/// With `A = H13 H13^T`, `B = H23 H23^T`:
/// `det(I + 2A + 2B) <= prod (1 + 2 a_i + 2 b_{n+1-i})` (Fiedler) and each
/// factor divided by `(1 + a_i/n)(1 + b_{n+1-i}/n)` is at most `2n`.
/// All quantities are log2.
#[derive(Clone, Debug, Serialize)]
pub struct DeltaRatioCheck {
    /// `log2 det(I + 2A + 2B) <= sum log2(1 + 2 a_i + 2 b_{n+1-i})`
    pub fiedler_step: Check,
    /// `log2 ratio <= n log2(2n)`
    pub ratio: Check,
    /// `½ log2 ratio`
    pub half_log_ratio: f64,
}

impl DeltaRatioCheck {
    pub fn passed(&self) -> bool {
        self.fiedler_step.holds && self.ratio.holds
    }
}

pub fn check_delta_ratio(a: &PsdMatrix, b: &PsdMatrix) -> Result<DeltaRatioCheck> {
    if a.dim() != b.dim() {
        return Err(Error::Domain(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let n = a.dim();
    let nf = n as f64;
    let joint = logdet_i_plus(&(a + b).scale(2.0))?;
    let alpha = a.eigenvalues();
    let beta = b.eigenvalues();
    let paired: f64 = (0..n)
        .map(|i| (2.0 * alpha[i] + 2.0 * beta[n - 1 - i]).ln_1p())
        .sum::<f64>()
        / std::f64::consts::LN_2;
    let uniform = logdet_i_plus(&a.scale(1.0 / nf))? + logdet_i_plus(&b.scale(1.0 / nf))?;
    let log_ratio = joint - uniform;
    Ok(DeltaRatioCheck {
        fiedler_step: Check::le(joint, paired, CHECK_TOL * paired.abs().max(1.0)),
        ratio: Check::le(log_ratio, nf * (2.0 * nf).log2(), CHECK_TOL),
        half_log_ratio: 0.5 * log_ratio,
    })
}

/// Certificate for `delta <= (n/2) log2(2n)`.
#[derive(Clone, Debug, Serialize)]
pub struct LemmaDeltaCheck {
    pub lemma: Check,
    /// `C123 - C13 - C23 <= ½ log2 [det(I + 2A + 2B) / (det(I + A/n) det(I + B/n))]`.
    /// Stated for the unclamped excess: the ratio can drop below 1, where
    /// the clamped `delta = 0` would exceed it.
    pub ratio_bound: Check,
    pub ratio: DeltaRatioCheck,
}

impl LemmaDeltaCheck {
    pub fn passed(&self) -> bool {
        self.lemma.holds && self.ratio_bound.holds && self.ratio.passed()
    }
}

pub fn verify_lemma_delta(dc: &DiamondChannel, p: &DiamondParams) -> Result<LemmaDeltaCheck> {
    let a = PsdMatrix::gram(&dc.h13);
    let b = PsdMatrix::gram(&dc.h23);
    let ratio = check_delta_ratio(&a, &b)?;
    let delta = delta_term(p);
    Ok(LemmaDeltaCheck {
        lemma: Check::le(delta, lemma2_bound(dc.n), CHECK_TOL),
        ratio_bound: Check::le(p.c123 - p.c13 - p.c23, ratio.half_log_ratio, CHECK_TOL),
        ratio,
    })
}

/// `det(A + B) <= prod (a_i + b_{n+1-i})` for PSD `A`, `B` with
/// eigenvalues sorted descending.
#[derive(Clone, Debug, Serialize)]
pub struct FiedlerCheck {
    /// `det(A + B)` by LU factorisation.
    pub det: f64,
    pub product: f64,
    pub holds: bool,
    /// `product - det` relative to `max(product, 1e-300)`.
    pub relative_slack: f64,
    /// Round-off allowance added to `product`.
    pub tolerance: f64,
}

pub fn check_fiedler(a: &PsdMatrix, b: &PsdMatrix) -> Result<FiedlerCheck> {
    if a.dim() != b.dim() {
        return Err(Error::Domain(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let n = a.dim();
    let alpha = a.eigenvalues();
    let beta = b.eigenvalues();
    let product: f64 = (0..n).map(|i| alpha[i] + beta[n - 1 - i]).product();
    let det = (a + b).matrix().det();
    // LU round-off on a (near-)singular sum scales with the spectrum.
    let spread = (alpha[0] + beta[0]).powi(n as i32);
    let tol = 1e-9 * product + 1e-12 * spread;
    Ok(FiedlerCheck {
        det,
        product,
        holds: det <= product + tol,
        relative_slack: (product - det) / product.max(1e-300),
        tolerance: tol,
    })
}

/// `f(x, y) = (1 + 2x + 2y) / ((1 + x/n)(1 + y/n))`.
pub fn prop1_f(n: usize, x: f64, y: f64) -> f64 {
    let n = n as f64;
    (1.0 + 2.0 * x + 2.0 * y) / ((1.0 + x / n) * (1.0 + y / n))
}

/// Grid certificate for `sup_{x, y >= 0} f(x, y) = 2n`.
#[derive(Clone, Debug, Serialize)]
pub struct Prop1Check {
    pub n: usize,
    pub grid_points: usize,
    pub max_f: f64,
    pub violations: usize,
    /// `f(1e9, 0)`, which must come within `6 n^2 1e-9` of `2n`.
    pub limit_value: f64,
    pub limit_ok: bool,
}

impl Prop1Check {
    pub fn passed(&self) -> bool {
        self.violations == 0 && self.limit_ok
    }
}

/// Grid over `{0} ∪ {10^(k/20) : k = -120..=180}`, i.e. `[1e-6, 1e9]`.
pub fn prop1_grid() -> Vec<f64> {
    std::iter::once(0.0)
        .chain((-120..=180).map(|k| 10f64.powf(k as f64 / 20.0)))
        .collect()
}

pub fn check_prop1(n: usize) -> Prop1Check {
    assert!(n >= 1, "n must be at least 1");
    let sup = 2.0 * n as f64;
    let grid = prop1_grid();
    let mut max_f = f64::NEG_INFINITY;
    let mut violations = 0;
    for &x in &grid {
        for &y in &grid {
            let f = prop1_f(n, x, y);
            max_f = max_f.max(f);
            if f > sup * (1.0 + 1e-15) {
                violations += 1;
            }
        }
    }
    let limit_value = prop1_f(n, 1e9, 0.0);
    let eps = 3.0 * (n * n) as f64 * 1e-9 * 2.0;
    Prop1Check {
        n,
        grid_points: grid.len() * grid.len(),
        max_f,
        violations,
        limit_value,
        limit_ok: limit_value >= sup - eps && limit_value <= sup,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub n: usize,
    pub gamma_form: GammaForm,
    pub gamma: f64,
    pub branch: Branch,
    /// `Gamma' == 0`: neither branch is singled out, `r_up` is the smaller.
    pub gamma_tie: bool,
    pub delta: f64,
    pub delta_term: f64,
    pub r_up: f64,
    pub r_up_branch1: f64,
    pub r_up_branch2: f64,
    pub r_ach: f64,
    pub method: Method,
    pub schedule: Schedule,
    pub pentagon: MacPentagon,
    pub kappa: f64,
    /// Closed-form gap expression on the active pentagon. It equals `kappa`
    /// when the closed-form schedule is LP-optimal and bounds it otherwise.
    pub kappa_formula: f64,
    /// Agreement of `kappa` and `kappa_formula`, evaluated only when the
    /// closed form is the reported method.
    pub kappa_reconciled: Option<bool>,
    pub theorem_bound: f64,
    pub theorem: Check,
    pub lemma1_lhs: f64,
    pub lemma1_bound: f64,
    pub lemma2_bound: f64,
    pub lemma1: LemmaDiffCheck,
    pub lemma2: LemmaDeltaCheck,
    /// `C'MAC >= C13` on branch 1, `C'MAC >= C23` on branch 2.
    pub mac_dominance: Check,
    /// `r_ach <= r_up`.
    pub soundness: Check,
    pub all_checks_pass: bool,
}

pub fn gap_report(dc: &DiamondChannel, form: GammaForm) -> Result<GapReport> {
    let p = derive_params(dc)?;
    gap_report_with(dc, &p, form)
}

/// [`gap_report`] for already derived parameters.
pub fn gap_report_with(
    dc: &DiamondChannel,
    p: &DiamondParams,
    form: GammaForm,
) -> Result<GapReport> {
    if p.delta <= 0.0 {
        return Err(Error::NotApplicable { delta: p.delta });
    }
    let n = dc.n;
    let gamma = gamma_prime(p, form);
    let branch = Branch::from_gamma(gamma);
    let gamma_tie = gamma == 0.0;
    let ach = branch_achievability(dc, p, branch)?;
    let report = ach.report;
    let pent = report.pentagon.clone();

    let r_up_branch1 = upper_bound(p, Branch::Branch1)?;
    let r_up_branch2 = upper_bound(p, Branch::Branch2)?;
    let r_up = if gamma_tie {
        r_up_branch1.min(r_up_branch2)
    } else {
        match branch {
            Branch::Branch1 => r_up_branch1,
            Branch::Branch2 => r_up_branch2,
        }
    };
    let r_ach = report.r_mac;
    let kappa = r_up - r_ach;
    let kappa_formula = kappa_formula(p, &pent)?;
    let kappa_reconciled = (report.method == Method::ClosedForm && !gamma_tie)
        .then(|| (kappa - kappa_formula).abs() <= KAPPA_RECONCILE_TOL);

    let lemma1 = verify_lemma_diff(dc, p, &pent)?;
    let lemma2 = verify_lemma_delta(dc, p)?;
    let theorem = Check::le(kappa, theorem_bound(n), CHECK_TOL);
    let kept_link = match branch {
        Branch::Branch1 => p.c13,
        Branch::Branch2 => p.c23,
    };
    let mac_dominance = Check::le(kept_link, pent.cmacp, CHECK_TOL);
    let soundness = Check::le(r_ach, r_up, SOUNDNESS_TOL);

    let all_checks_pass = theorem.holds
        && lemma1.passed()
        && lemma2.passed()
        && mac_dominance.holds
        && kappa_reconciled != Some(false);

    Ok(GapReport {
        n,
        gamma_form: form,
        gamma,
        branch,
        gamma_tie,
        delta: p.delta,
        delta_term: delta_term(p),
        r_up,
        r_up_branch1,
        r_up_branch2,
        r_ach,
        method: report.method,
        schedule: report.schedule,
        pentagon: pent,
        kappa,
        kappa_formula,
        kappa_reconciled,
        theorem_bound: theorem_bound(n),
        theorem,
        lemma1_lhs: lemma1.lemma.lhs,
        lemma1_bound: lemma1_bound(n),
        lemma2_bound: lemma2_bound(n),
        lemma1,
        lemma2,
        mac_dominance,
        soundness,
        all_checks_pass,
    })
}
