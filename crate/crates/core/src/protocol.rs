//! MDF-MAC achievability.
//!
//! The relays use three states: state 1 (S -> R1 while R2 -> D), state 2
//! (S -> R2 while R1 -> D) and state 3 (R1 and R2 -> D as a multiple-access
//! channel). For fixed relay covariances in state 3 the MAC region is a
//! pentagon, and the best rate is a small linear program in the time shares
//! `(t1, t2, t3)`:
//!
//! ```text
//! maximize R  s.t.  R <= t1 C01 + t2 C02                     (op1)
//!                   R <= t2 (C02 + C13) + t3 C'13            (op2)
//!                   R <= t1 (C01 + C23) + t3 C'23            (op3)
//!                   R <= t1 C23 + t2 C13 + t3 C'MAC          (op4)
//!                   t1 + t2 + t3 = 1,  t >= 0
//! ```

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::capacity::{mac_rate_bits, rate_bits, waterfill_colored};
use crate::channel::{derive_params, DiamondChannel, DiamondParams, NODE_POWER};
use crate::error::{Error, Result};
use crate::linalg::PsdMatrix;

/// Slack allowed when checking LP feasibility of a candidate point.
pub const FEAS_TOL: f64 = 1e-9;
/// Agreement required before the closed form is reported as the LP optimum.
pub const CLOSED_FORM_MATCH_TOL: f64 = 1e-8;

/// Which expression selects the upper-bound branch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaForm {
    /// `C02 (C123 - C13) - C01 (C123 - C23)`, antisymmetric under relay swap.
    Corrected,
    /// `(C02 - C01) (C123 - C23)`, with no relay-swap symmetry.
    Literal,
}

impl fmt::Display for GammaForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GammaForm::Corrected => "corrected",
            GammaForm::Literal => "literal",
        })
    }
}

impl FromStr for GammaForm {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "corrected" => Ok(GammaForm::Corrected),
            "literal" => Ok(GammaForm::Literal),
            other => Err(format!(
                "unknown gamma form `{other}` (expected `corrected` or `literal`)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// `Gamma' <= 0`: relay 1 keeps its single-user covariance.
    Branch1,
    /// `Gamma' > 0`: relay 2 keeps its single-user covariance.
    Branch2,
}

impl Branch {
    pub fn from_gamma(gamma: f64) -> Self {
        if gamma <= 0.0 {
            Branch::Branch1
        } else {
            Branch::Branch2
        }
    }

    pub fn mirrored(self) -> Self {
        match self {
            Branch::Branch1 => Branch::Branch2,
            Branch::Branch2 => Branch::Branch1,
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Branch::Branch1 => 1,
            Branch::Branch2 => 2,
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

pub fn gamma_prime(p: &DiamondParams, form: GammaForm) -> f64 {
    match form {
        GammaForm::Corrected => p.c02 * (p.c123 - p.c13) - p.c01 * (p.c123 - p.c23),
        GammaForm::Literal => p.c02 * (p.c123 - p.c23) - p.c01 * (p.c123 - p.c23),
    }
}

/// MAC-state rate region for fixed relay covariances `(q1, q2)`.
#[derive(Clone, Debug, Serialize)]
pub struct MacPentagon {
    /// `½ log det(I + H13 Q1 H13^T)`
    pub c13p: f64,
    /// `½ log det(I + H23 Q2 H23^T)`
    pub c23p: f64,
    /// `½ log det(I + H13 Q1 H13^T + H23 Q2 H23^T)`
    pub cmacp: f64,
    pub q1: PsdMatrix,
    pub q2: PsdMatrix,
    pub branch: Branch,
}

impl MacPentagon {
    pub fn from_covariances(
        dc: &DiamondChannel,
        q1: PsdMatrix,
        q2: PsdMatrix,
        branch: Branch,
    ) -> Result<Self> {
        Ok(Self {
            c13p: rate_bits(&dc.h13, &q1)?,
            c23p: rate_bits(&dc.h23, &q2)?,
            cmacp: mac_rate_bits(&dc.h13, &q1, &dc.h23, &q2)?,
            q1,
            q2,
            branch,
        })
    }

    /// Pentagon given directly by its three bounds (zero covariances).
    pub fn from_bounds(c13p: f64, c23p: f64, cmacp: f64, branch: Branch) -> Self {
        Self {
            c13p,
            c23p,
            cmacp,
            q1: PsdMatrix::zeros(1),
            q2: PsdMatrix::zeros(1),
            branch,
        }
    }

    /// Whether `(r1, r2)` lies in the pentagon scaled by `t3`.
    pub fn contains_scaled(&self, r1: f64, r2: f64, t3: f64, tol: f64) -> bool {
        r1 >= -tol
            && r2 >= -tol
            && r1 <= t3 * self.c13p + tol
            && r2 <= t3 * self.c23p + tol
            && r1 + r2 <= t3 * self.cmacp + tol
    }
}

/// Pentagon chosen for `branch`.
///
/// Branch 1 keeps relay 1 on its single-user optimum `K13` and gives relay 2
/// the covariance `K'23` water-filled against `I + H13 K13 H13^T`, i.e. the
/// first round of iterative water-filling. Branch 2 is the mirror image.
pub fn select_pentagon(
    dc: &DiamondChannel,
    p: &DiamondParams,
    branch: Branch,
) -> Result<MacPentagon> {
    let (q1, q2) = match branch {
        Branch::Branch1 => {
            let interference = PsdMatrix::congruence(&dc.h13, &p.k13).plus_identity();
            let k23p = waterfill_colored(&dc.h23, &interference, NODE_POWER)?.covariance;
            (p.k13.clone(), k23p)
        }
        Branch::Branch2 => {
            let interference = PsdMatrix::congruence(&dc.h23, &p.k23).plus_identity();
            let k13p = waterfill_colored(&dc.h13, &interference, NODE_POWER)?.covariance;
            (k13p, p.k23.clone())
        }
    };
    MacPentagon::from_covariances(dc, q1, q2, branch)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Schedule {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
}

impl Schedule {
    /// Clamps round-off negatives (down to -1e-12) to zero.
    fn clamped(t1: f64, t2: f64, t3: f64) -> Self {
        let c = |t: f64| if t < 0.0 && t >= -1e-12 { 0.0 } else { t };
        Self {
            t1: c(t1),
            t2: c(t2),
            t3: c(t3),
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.t1, self.t2, self.t3]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Method {
    ClosedForm,
    LpFallback,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ClosedForm => "closed_form",
            Method::LpFallback => "lp",
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AchievabilityReport {
    pub schedule: Schedule,
    /// Relay rates in the MAC state.
    pub r1: f64,
    pub r2: f64,
    pub r_mac: f64,
    pub method: Method,
    pub pentagon: MacPentagon,
}

/// Coefficients of `(t1, t2, t3)` in the right-hand sides of op1..op4.
pub fn rate_constraints(p: &DiamondParams, pent: &MacPentagon) -> [[f64; 3]; 4] {
    [
        [p.c01, p.c02, 0.0],
        [0.0, p.c02 + p.c13, pent.c13p],
        [p.c01 + p.c23, 0.0, pent.c23p],
        [p.c23, p.c13, pent.cmacp],
    ]
}

fn dot3(a: &[f64; 3], t: &[f64; 3]) -> f64 {
    a[0] * t[0] + a[1] * t[1] + a[2] * t[2]
}

/// Largest violation of op1..op4 and the simplex constraints by `(t, r)`.
pub fn lp_violation(p: &DiamondParams, pent: &MacPentagon, t: &Schedule, r: f64) -> f64 {
    let ts = t.as_array();
    let rates = rate_constraints(p, pent)
        .iter()
        .map(|row| r - dot3(row, &ts))
        .fold(f64::NEG_INFINITY, f64::max);
    let simplex = ts.iter().map(|x| -x).fold((ts.iter().sum::<f64>() - 1.0).abs(), f64::max);
    rates.max(simplex)
}

/// Solves `A x = b` for 3x3 `A` by Gaussian elimination with partial
/// pivoting; `None` when a pivot falls below `1e-12 * max|A|`.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    let scale = a.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return None;
    }
    for k in 0..3 {
        let piv = (k..3)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        if a[piv][k].abs() <= 1e-12 * scale {
            return None;
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for i in (k + 1)..3 {
            let f = a[i][k] / a[k][k];
            for j in k..3 {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = [0.0; 3];
    for k in (0..3).rev() {
        let tail: f64 = ((k + 1)..3).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - tail) / a[k][k];
    }
    Some(x)
}

/// Half-spaces of the LP in `x = (t1, t2, R)` after substituting
/// `t3 = 1 - t1 - t2`, each as `(g, h)` meaning `g . x <= h`.
fn halfspaces(p: &DiamondParams, pent: &MacPentagon) -> [([f64; 3], f64); 7] {
    let rows = rate_constraints(p, pent);
    let op = |r: &[f64; 3]| ([r[2] - r[0], r[2] - r[1], 1.0], r[2]);
    [
        op(&rows[0]),
        op(&rows[1]),
        op(&rows[2]),
        op(&rows[3]),
        ([-1.0, 0.0, 0.0], 0.0),
        ([0.0, -1.0, 0.0], 0.0),
        ([1.0, 1.0, 0.0], 1.0),
    ]
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LpVertex {
    pub schedule: Schedule,
    pub r_mac: f64,
    /// Indices (0-based, into op1..op4, t1 >= 0, t2 >= 0, t3 >= 0) of the
    /// constraints defining the vertex.
    pub active: [usize; 3],
}

/// Every feasible vertex of the scheduling LP.
pub fn lp_vertices(p: &DiamondParams, pent: &MacPentagon) -> Vec<LpVertex> {
    let hs = halfspaces(p, pent);
    let scale = rate_constraints(p, pent)
        .iter()
        .flatten()
        .fold(1.0_f64, |m, x| m.max(x.abs()));
    let mut out = Vec::new();
    for i in 0..7 {
        for j in (i + 1)..7 {
            for k in (j + 1)..7 {
                let a = [hs[i].0, hs[j].0, hs[k].0];
                let b = [hs[i].1, hs[j].1, hs[k].1];
                let Some(x) = solve3(a, b) else { continue };
                let feasible = hs
                    .iter()
                    .all(|(g, h)| g[0] * x[0] + g[1] * x[1] + g[2] * x[2] <= h + 1e-11 * scale);
                if feasible {
                    out.push(LpVertex {
                        schedule: Schedule::clamped(x[0], x[1], 1.0 - x[0] - x[1]),
                        r_mac: x[2],
                        active: [i, j, k],
                    });
                }
            }
        }
    }
    out
}

/// Lexicographically smallest MAC split `(r1, r2)` that supports rate `r`
/// under schedule `t`.
pub fn recover_split(p: &DiamondParams, pent: &MacPentagon, t: &Schedule, r: f64) -> (f64, f64) {
    let need1 = r - t.t2 * (p.c02 + p.c13);
    let need2 = r - t.t1 * (p.c01 + p.c23);
    let need_sum = r - t.t1 * p.c23 - t.t2 * p.c13;
    let r1 = need1.max(need_sum - t.t3 * pent.c23p).max(0.0);
    let r2 = need2.max(need_sum - r1).max(0.0);
    (r1, r2)
}

/// Optimum of the scheduling LP by exhaustive vertex enumeration.
pub fn lp_rmac(p: &DiamondParams, pent: &MacPentagon) -> AchievabilityReport {
    let vertices = lp_vertices(p, pent);
    // t = (1/3, 1/3, 1/3) with R = 0 is feasible and op1 bounds R, so the
    // polytope is non-empty and bounded.
    assert!(!vertices.is_empty(), "scheduling LP has no vertex");
    let best = vertices
        .iter()
        .copied()
        .reduce(|best, v| if v.r_mac > best.r_mac + 1e-12 { v } else { best })
        .unwrap();
    let (r1, r2) = recover_split(p, pent, &best.schedule, best.r_mac);
    AchievabilityReport {
        schedule: best.schedule,
        r1,
        r2,
        r_mac: best.r_mac,
        method: Method::LpFallback,
        pentagon: pent.clone(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosedFormSchedule {
    pub schedule: Schedule,
    pub r_mac: f64,
    /// Common denominator of the explicit time shares (`t3 = delta / c_den`).
    pub c_den: f64,
    /// `[C01 (C02 - C13) C'MAC - C01 C13 C'13 + C02 C'13 C23] / c_den` (or its
    /// mirror), the explicit rate expression in circulation.
    pub formula_r_mac: f64,
    /// `formula_r_mac - r_mac`. Non-zero whenever `C'MAC` differs from
    /// `C13` (or `C23`): eliminating the system gives `C02 + C13` where the
    /// expression has `C02 - C13`.
    pub formula_discrepancy: f64,
    /// Two sides of the sufficient feasibility condition
    /// `delta [C'13 + C'23 - C'MAC] >= C01 C02 (C13 - C'13)` (or its mirror),
    /// which coincides with `omitted_slack >= 0` only when `C'13 = C13`.
    pub feasibility_lhs: f64,
    pub feasibility_rhs: f64,
    /// Slack of the inequality left out of the equality system.
    pub omitted_slack: f64,
}

#[derive(Clone, Debug, Serialize)]
pub enum ClosedFormOutcome {
    Feasible(ClosedFormSchedule),
    /// The equality system has a solution but it leaves the LP's feasible set.
    Infeasible {
        candidate: ClosedFormSchedule,
        reason: String,
    },
    Singular {
        reason: String,
    },
}

impl ClosedFormOutcome {
    pub fn feasible(&self) -> Option<&ClosedFormSchedule> {
        match self {
            ClosedFormOutcome::Feasible(s) => Some(s),
            _ => None,
        }
    }
}

/// Branch schedule obtained by turning op1, op2 and op4 (branch 1) or
/// op1, op3 and op4 (branch 2) into equalities.
pub fn closed_form_schedule(
    p: &DiamondParams,
    pent: &MacPentagon,
    branch: Branch,
) -> ClosedFormOutcome {
    let rows = rate_constraints(p, pent);
    let (kept, omitted) = match branch {
        Branch::Branch1 => ([0, 1, 3], 2),
        Branch::Branch2 => ([0, 2, 3], 1),
    };
    // R - a.t = 0 with t3 = 1 - t1 - t2, unknowns (t1, t2, R)
    let eq = |r: &[f64; 3]| ([r[2] - r[0], r[2] - r[1], 1.0], r[2]);
    let (a0, b0) = eq(&rows[kept[0]]);
    let (a1, b1) = eq(&rows[kept[1]]);
    let (a2, b2) = eq(&rows[kept[2]]);
    let Some(x) = solve3([a0, a1, a2], [b0, b1, b2]) else {
        return ClosedFormOutcome::Singular {
            reason: format!("equality system for branch {branch} is singular"),
        };
    };
    let (t1, t2, r) = (x[0], x[1], x[2]);
    let t3 = 1.0 - t1 - t2;
    let schedule = Schedule::clamped(t1, t2, t3);

    let (c_den, numerator, feas_lhs, feas_rhs) = match branch {
        Branch::Branch1 => (
            (pent.cmacp - pent.c13p) * (p.c01 + p.c13)
                + p.c02 * (p.c01 + pent.c13p)
                + (pent.c13p - p.c13) * p.c23,
            p.c01 * (p.c02 - p.c13) * pent.cmacp - p.c01 * p.c13 * pent.c13p
                + p.c02 * pent.c13p * p.c23,
            p.delta * (pent.c13p + pent.c23p - pent.cmacp),
            p.c01 * p.c02 * (p.c13 - pent.c13p),
        ),
        Branch::Branch2 => (
            (pent.cmacp - pent.c23p) * (p.c02 + p.c23)
                + p.c01 * (p.c02 + pent.c23p)
                + (pent.c23p - p.c23) * p.c13,
            p.c02 * (p.c01 - p.c23) * pent.cmacp - p.c02 * p.c23 * pent.c23p
                + p.c01 * p.c13 * pent.c23p,
            p.delta * (pent.c13p + pent.c23p - pent.cmacp),
            p.c01 * p.c02 * (p.c23 - pent.c23p),
        ),
    };
    let formula_r_mac = numerator / c_den;
    let omitted_slack = dot3(&rows[omitted], &schedule.as_array()) - r;
    let candidate = ClosedFormSchedule {
        schedule,
        r_mac: r,
        c_den,
        formula_r_mac,
        formula_discrepancy: formula_r_mac - r,
        feasibility_lhs: feas_lhs,
        feasibility_rhs: feas_rhs,
        omitted_slack,
    };

    if let Some((i, t)) = schedule
        .as_array()
        .iter()
        .enumerate()
        .find(|(_, &t)| t < 0.0)
    {
        return ClosedFormOutcome::Infeasible {
            candidate,
            reason: format!("t{} = {t:e} is negative", i + 1),
        };
    }
    if omitted_slack < -FEAS_TOL {
        return ClosedFormOutcome::Infeasible {
            candidate,
            reason: format!("op{} violated by {:e}", omitted + 1, -omitted_slack),
        };
    }
    ClosedFormOutcome::Feasible(candidate)
}

/// Grid oracle for the max-min rate.
///
/// Evaluates
/// `max_{(R1, R2) in t3 * pentagon} min{t1 C01, t2 C13 + R1} + min{t2 C02, t1 C23 + R2}`
/// at every `t` on the simplex grid with spacing `1 / grid_steps`. For fixed
/// `t` the inner maximum is exact: `R1` beyond `t1 C01 - t2 C13` (and `R2`
/// beyond `t2 C02 - t1 C23`) buys nothing, and what remains is a box clipped
/// by the sum-rate face.
pub fn brute_force_rmac(p: &DiamondParams, pent: &MacPentagon, grid_steps: usize) -> f64 {
    assert!(grid_steps >= 10, "grid needs at least 10 steps");
    let step = 1.0 / grid_steps as f64;
    let mut best = f64::NEG_INFINITY;
    for k1 in 0..=grid_steps {
        let t1 = k1 as f64 * step;
        for k2 in 0..=(grid_steps - k1) {
            let t2 = k2 as f64 * step;
            let t3 = (grid_steps - k1 - k2) as f64 * step;
            let direct1 = t1 * p.c01;
            let relay1 = t2 * p.c13;
            let direct2 = t2 * p.c02;
            let relay2 = t1 * p.c23;
            let want1 = (direct1 - relay1).max(0.0).min(t3 * pent.c13p);
            let want2 = (direct2 - relay2).max(0.0).min(t3 * pent.c23p);
            let value = direct1.min(relay1)
                + direct2.min(relay2)
                + (want1 + want2).min(t3 * pent.cmacp);
            if value > best {
                best = value;
            }
        }
    }
    best
}

/// Achievability for one branch, with both solution routes kept.
#[derive(Clone, Debug, Serialize)]
pub struct BranchAchievability {
    pub branch: Branch,
    pub closed_form: ClosedFormOutcome,
    pub lp: AchievabilityReport,
    /// What gets reported: the closed form when it reproduces the LP
    /// optimum, the LP solution otherwise.
    pub report: AchievabilityReport,
}

pub fn branch_achievability(
    dc: &DiamondChannel,
    p: &DiamondParams,
    branch: Branch,
) -> Result<BranchAchievability> {
    let pent = select_pentagon(dc, p, branch)?;
    let lp = lp_rmac(p, &pent);
    let closed_form = closed_form_schedule(p, &pent, branch);
    let report = match closed_form.feasible() {
        Some(cf) if (cf.r_mac - lp.r_mac).abs() <= CLOSED_FORM_MATCH_TOL => {
            let (r1, r2) = recover_split(p, &pent, &cf.schedule, cf.r_mac);
            AchievabilityReport {
                schedule: cf.schedule,
                r1,
                r2,
                r_mac: lp.r_mac,
                method: Method::ClosedForm,
                pentagon: pent.clone(),
            }
        }
        _ => lp.clone(),
    };
    Ok(BranchAchievability {
        branch,
        closed_form,
        lp,
        report,
    })
}

/// MDF-MAC rate for a channel with `delta > 0`, on the branch picked by the
/// sign of `Gamma'`.
pub fn achievable_rate(dc: &DiamondChannel, form: GammaForm) -> Result<AchievabilityReport> {
    let p = derive_params(dc)?;
    if p.delta <= 0.0 {
        return Err(Error::NotApplicable { delta: p.delta });
    }
    let branch = Branch::from_gamma(gamma_prime(&p, form));
    Ok(branch_achievability(dc, &p, branch)?.report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::random_diamond;

    fn params(c01: f64, c02: f64, c13: f64, c23: f64, c123: f64) -> DiamondParams {
        DiamondParams::from_capacities(c01, c02, c13, c23, c01 + c02, c123)
    }

    #[test]
    fn gamma_arithmetic() {
        let p = params(1.0, 2.0, 0.5, 0.5, 1.5);
        assert_eq!(gamma_prime(&p, GammaForm::Literal), 1.0);
        assert_eq!(gamma_prime(&p, GammaForm::Corrected), 1.0);
    }

    #[test]
    fn gamma_vanishes_on_symmetric_channel() {
        let dc = DiamondChannel::scalar(2.0, 2.0, 1.0, 1.0);
        let p = derive_params(&dc).unwrap();
        assert_eq!(gamma_prime(&p, GammaForm::Corrected), 0.0);
        assert_eq!(gamma_prime(&p, GammaForm::Literal), 0.0);
        assert_eq!(Branch::from_gamma(0.0), Branch::Branch1);
    }

    #[test]
    fn gamma_form_parsing() {
        assert_eq!("literal".parse::<GammaForm>().unwrap(), GammaForm::Literal);
        assert!("bogus".parse::<GammaForm>().is_err());
    }

    #[test]
    fn scalar_pentagon_uses_full_power() {
        let dc = DiamondChannel::scalar(3.0, 2.0, 1.5, 0.7);
        let p = derive_params(&dc).unwrap();
        let pent = select_pentagon(&dc, &p, Branch::Branch1).unwrap();
        assert!((pent.q2.matrix()[(0, 0)] - 1.0).abs() < 1e-15);
        let (g13, g23) = (1.5f64 * 1.5, 0.7f64 * 0.7);
        assert!((pent.c13p - 0.5 * (1.0 + g13).log2()).abs() < 1e-14);
        assert!((pent.c23p - 0.5 * (1.0 + g23).log2()).abs() < 1e-14);
        assert!((pent.cmacp - 0.5 * (1.0 + g13 + g23).log2()).abs() < 1e-14);
    }

    #[test]
    fn solve3_matches_hand_solution() {
        let x = solve3(
            [[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]],
            [3.0, 5.0, 5.0],
        )
        .unwrap();
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
        assert!(solve3([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 0.0, 1.0]], [1.0; 3]).is_none());
    }

    #[test]
    fn dead_first_link_shifts_time_to_second_relay() {
        let p = params(0.0, 1.0, 0.4, 0.3, 0.9);
        let pent = MacPentagon::from_bounds(0.4, 0.3, 0.6, Branch::Branch1);
        let lp = lp_rmac(&p, &pent);
        assert!(lp.schedule.t1.abs() < 1e-12);
        assert!(lp.r_mac <= lp.schedule.t2 * p.c02 + 1e-12);
        assert!(lp.r_mac > 0.0);
    }

    #[test]
    fn zero_pentagon_matches_grid() {
        let p = params(1.0, 1.0, 1.0, 1.0, 1.5);
        let pent = MacPentagon::from_bounds(0.0, 0.0, 0.0, Branch::Branch1);
        let lp = lp_rmac(&p, &pent);
        let grid = brute_force_rmac(&p, &pent, 1000);
        // two-state multihop: t1 = t2 = 1/2 gives min(c,c)/2 + min(c,c)/2
        assert!((lp.r_mac - 1.0).abs() < 1e-12);
        assert!((grid - 1.0).abs() < 1e-12);
        assert!(lp.schedule.t3.abs() < 1e-12);
    }

    #[test]
    fn lp_report_is_feasible() {
        for seed in 0..40 {
            let dc = random_diamond(1 + (seed % 3) as usize, seed, 1.0);
            let p = derive_params(&dc).unwrap();
            for branch in [Branch::Branch1, Branch::Branch2] {
                let pent = select_pentagon(&dc, &p, branch).unwrap();
                let lp = lp_rmac(&p, &pent);
                assert!(lp_violation(&p, &pent, &lp.schedule, lp.r_mac) <= 1e-9);
                assert!(pent.contains_scaled(lp.r1, lp.r2, lp.schedule.t3, 1e-8));
                let t = lp.schedule;
                let eq2 = (t.t1 * p.c01).min(t.t2 * p.c13 + lp.r1)
                    + (t.t2 * p.c02).min(t.t1 * p.c23 + lp.r2);
                assert!(eq2 >= lp.r_mac - 1e-8, "split does not support R");
            }
        }
    }

    #[test]
    fn relay_swap_mirrors_branches() {
        let dc = DiamondChannel::scalar(2.0, 1.7, 1.0, 0.9);
        let sw = dc.swap_relays();
        let (p, ps) = (derive_params(&dc).unwrap(), derive_params(&sw).unwrap());
        let pent = select_pentagon(&dc, &p, Branch::Branch1).unwrap();
        let pent_s = select_pentagon(&sw, &ps, Branch::Branch2).unwrap();
        let a = closed_form_schedule(&p, &pent, Branch::Branch1);
        let b = closed_form_schedule(&ps, &pent_s, Branch::Branch2);
        let (a, b) = (a.feasible().expect("feasible"), b.feasible().expect("feasible"));
        assert!((a.schedule.t1 - b.schedule.t2).abs() < 1e-12);
        assert!((a.schedule.t2 - b.schedule.t1).abs() < 1e-12);
        assert!((a.r_mac - b.r_mac).abs() < 1e-12);
    }

    #[test]
    fn single_antenna_specialisation() {
        // with C'13 = C13 the explicit shares are exact
        let p = params(2.0, 1.5, 0.8, 0.6, 1.9);
        let pent = MacPentagon::from_bounds(0.8, 0.6, 1.1, Branch::Branch1);
        let cf = closed_form_schedule(&p, &pent, Branch::Branch1);
        let cf = cf.feasible().unwrap();
        assert!((cf.schedule.t3 - p.delta / cf.c_den).abs() < 1e-14);
        let t2 = (p.c01 * (pent.cmacp - pent.c13p) + pent.c13p * p.c23) / cf.c_den;
        let t1 = (p.c13 * (pent.cmacp - p.c13) + pent.c13p * p.c02) / cf.c_den;
        assert!((cf.schedule.t2 - t2).abs() < 1e-14);
        assert!((cf.schedule.t1 - t1).abs() < 1e-14);
        // omitted constraint slack equals delta (C'13 + C'23 - C'MAC) / C_den
        let slack = p.delta * (pent.c13p + pent.c23p - pent.cmacp) / cf.c_den;
        assert!((cf.omitted_slack - slack).abs() < 1e-14);
    }

    #[test]
    fn rate_expression_needs_plus_sign() {
        for (c13p, cmacp) in [(0.8, 1.1), (0.7, 1.3), (0.8, 0.95)] {
            let p = params(2.0, 1.5, 0.8, 0.6, 1.9);
            let pent = MacPentagon::from_bounds(c13p, 0.6, cmacp, Branch::Branch1);
            let cf = closed_form_schedule(&p, &pent, Branch::Branch1);
            let cf = match &cf {
                ClosedFormOutcome::Feasible(s) => s,
                ClosedFormOutcome::Infeasible { candidate, .. } => candidate,
                ClosedFormOutcome::Singular { reason } => panic!("{reason}"),
            };
            let plus = (p.c01 * (p.c02 + p.c13) * cmacp - p.c01 * p.c13 * c13p
                + p.c02 * c13p * p.c23)
                / cf.c_den;
            assert!((plus - cf.r_mac).abs() < 1e-13, "{plus} vs {}", cf.r_mac);
            assert!(cf.formula_discrepancy.abs() > 1e-3);
        }
    }

    #[test]
    fn singular_system_reported() {
        let p = params(0.0, 0.0, 0.0, 0.0, 0.0);
        let pent = MacPentagon::from_bounds(0.0, 0.0, 0.0, Branch::Branch1);
        assert!(matches!(
            closed_form_schedule(&p, &pent, Branch::Branch1),
            ClosedFormOutcome::Singular { .. }
        ));
    }

    #[test]
    fn not_applicable_when_delta_non_positive() {
        let err = achievable_rate(&DiamondChannel::identity(1), GammaForm::Corrected).unwrap_err();
        assert!(matches!(err, Error::NotApplicable { .. }));
        let weak = DiamondChannel::scalar(0.5, 0.5, 2.0, 2.0);
        assert!(achievable_rate(&weak, GammaForm::Corrected).is_err());
    }
}
