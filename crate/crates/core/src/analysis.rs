//! Single-channel analysis report.

use serde::Serialize;

use crate::bounds::{gap_report_with, GapReport};
use crate::channel::{derive_params, DiamondChannel, DiamondParams};
use crate::error::Result;
use crate::protocol::{branch_achievability, gamma_prime, Branch, BranchAchievability, GammaForm};

#[derive(Clone, Debug, Serialize)]
pub struct GammaValues {
    pub corrected: f64,
    pub literal: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Analysis {
    pub params: DiamondParams,
    pub gamma: GammaValues,
    pub branches: Vec<BranchAchievability>,
    /// `None` when `delta <= 0`.
    pub gap: Option<GapReport>,
}

impl Analysis {
    pub fn applicable(&self) -> bool {
        self.gap.is_some()
    }
}

/// Everything derivable for one channel. Both branches are evaluated
/// regardless of `delta`; the gap report needs `delta > 0`.
pub fn analyze(dc: &DiamondChannel, form: GammaForm) -> Result<Analysis> {
    let params = derive_params(dc)?;
    let branches = [Branch::Branch1, Branch::Branch2]
        .into_iter()
        .map(|b| branch_achievability(dc, &params, b))
        .collect::<Result<Vec<_>>>()?;
    let gap = if params.delta > 0.0 {
        Some(gap_report_with(dc, &params, form)?)
    } else {
        None
    };
    Ok(Analysis {
        gamma: GammaValues {
            corrected: gamma_prime(&params, GammaForm::Corrected),
            literal: gamma_prime(&params, GammaForm::Literal),
        },
        params,
        branches,
        gap,
    })
}
