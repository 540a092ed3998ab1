//! Water-filling capacities (bits per real channel use, with the ½ prefactor).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{inv_sqrt_psd, logdet_i_plus, sym_eig, Matrix, PsdMatrix};

/// Gains below this fraction of the strongest mode are numerical zeros.
const NULL_MODE_REL: f64 = 1e-13;

pub const DEFAULT_MAC_TOL_BITS: f64 = 1e-9;
pub const DEFAULT_MAC_MAX_ITER: usize = 10_000;

#[derive(Clone, Debug, Serialize)]
pub struct WaterfillResult {
    pub covariance: PsdMatrix,
    pub capacity_bits: f64,
    pub water_level: f64,
    pub active_modes: usize,
}

/// `½ log2 det(I + H Q H^T)`.
pub fn rate_bits(h: &Matrix, q: &PsdMatrix) -> Result<f64> {
    Ok(0.5 * logdet_i_plus(&PsdMatrix::congruence(h, q))?)
}

/// Sum-rate of a two-user MAC with fixed covariances:
/// `½ log2 det(I + H1 Q1 H1^T + H2 Q2 H2^T)`.
pub fn mac_rate_bits(h1: &Matrix, q1: &PsdMatrix, h2: &Matrix, q2: &PsdMatrix) -> Result<f64> {
    let total = &PsdMatrix::congruence(h1, q1) + &PsdMatrix::congruence(h2, q2);
    Ok(0.5 * logdet_i_plus(&total)?)
}

/// Capacity-achieving covariance of `y = H x + z`, `z ~ N(0, I)`, under
/// `tr(Q) <= power`.
pub fn waterfill(h: &Matrix, power: f64) -> Result<WaterfillResult> {
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::Domain(format!("power must be positive, got {power}")));
    }
    let nt = h.cols();
    if h.is_zero() {
        return Ok(WaterfillResult {
            covariance: PsdMatrix::identity(nt).scale(power / nt as f64),
            capacity_bits: 0.0,
            water_level: 0.0,
            active_modes: 0,
        });
    }

    // Right singular vectors of H and squared singular values.
    let eig = sym_eig(&(&h.transpose() * h))?;
    let strongest = eig.values[0];
    let gains: Vec<f64> = eig
        .values
        .iter()
        .map(|&g| if g > NULL_MODE_REL * strongest { g } else { 0.0 })
        .collect();

    // Modes are already sorted by decreasing gain, i.e. increasing 1/g.
    let usable = gains.iter().take_while(|&&g| g > 0.0).count();
    let mut level = 0.0;
    let mut active = 0;
    for k in (1..=usable).rev() {
        let floor_sum: f64 = gains[..k].iter().map(|g| 1.0 / g).sum();
        let mu = (power + floor_sum) / k as f64;
        if mu > 1.0 / gains[k - 1] {
            level = mu;
            active = k;
            break;
        }
    }
    debug_assert!(active >= 1);

    let powers: Vec<f64> = (0..nt)
        .map(|i| {
            if i < active {
                level - 1.0 / gains[i]
            } else {
                0.0
            }
        })
        .collect();
    let capacity_bits = 0.5
        * powers
            .iter()
            .zip(&gains)
            .map(|(p, g)| (p * g).ln_1p())
            .sum::<f64>()
        / std::f64::consts::LN_2;

    let v = &eig.vectors;
    let covariance = PsdMatrix::from_trusted(Matrix::from_fn(nt, nt, |i, j| {
        (0..active).map(|k| v[(i, k)] * powers[k] * v[(j, k)]).sum()
    }));

    Ok(WaterfillResult {
        covariance,
        capacity_bits,
        water_level: level,
        active_modes: active,
    })
}

/// Water-filling against a coloured noise covariance `noise`.
///
/// The returned covariance maximises `log det(N + H Q H^T)`; the capacity is
/// `½ [log2 det(N + H Q H^T) - log2 det N]`.
pub fn waterfill_colored(h: &Matrix, noise: &PsdMatrix, power: f64) -> Result<WaterfillResult> {
    if noise.dim() != h.rows() {
        return Err(Error::Contract(format!(
            "noise covariance is {0}x{0} but the channel has {1} outputs",
            noise.dim(),
            h.rows()
        )));
    }
    let whitener = inv_sqrt_psd(noise)?;
    waterfill(&(whitener.matrix() * h), power)
}

#[derive(Clone, Debug, Serialize)]
pub struct MacSumCapacity {
    pub c_sum: f64,
    pub q1: PsdMatrix,
    pub q2: PsdMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// Sum rate after the first round (user 1 alone, then user 2 against it).
    pub one_step: f64,
    /// Sum rate after each round.
    pub history: Vec<f64>,
}

/// Sum capacity of the two-user Gaussian MAC by iterative water-filling.
///
/// Round one water-fills user 1 against white noise and user 2 against user 1,
/// so `one_step` is the single-pass value; later rounds alternate until the
/// sum-rate gain falls below `tol_bits`.
pub fn mac_sum_capacity(
    h1: &Matrix,
    h2: &Matrix,
    p1: f64,
    p2: f64,
    tol_bits: f64,
    max_iter: usize,
) -> Result<MacSumCapacity> {
    if !(tol_bits > 0.0) {
        return Err(Error::Domain(format!("tol_bits must be positive, got {tol_bits}")));
    }
    if max_iter == 0 {
        return Err(Error::Domain("max_iter must be at least 1".into()));
    }
    if h1.rows() != h2.rows() {
        return Err(Error::Contract(format!(
            "MAC users reach receivers of different sizes ({} vs {})",
            h1.rows(),
            h2.rows()
        )));
    }
    let mut q2 = PsdMatrix::zeros(h2.cols());
    let mut q1 = PsdMatrix::zeros(h1.cols());
    let mut history = Vec::new();
    let mut converged = false;

    for _ in 0..max_iter {
        let noise1 = PsdMatrix::congruence(h2, &q2).plus_identity();
        q1 = waterfill_colored(h1, &noise1, p1)?.covariance;
        let noise2 = PsdMatrix::congruence(h1, &q1).plus_identity();
        q2 = waterfill_colored(h2, &noise2, p2)?.covariance;
        let rate = mac_rate_bits(h1, &q1, h2, &q2)?;
        let improved = history.last().map(|&prev| rate - prev);
        history.push(rate);
        if let Some(gain) = improved {
            if gain < tol_bits {
                converged = true;
                break;
            }
        }
    }

    let c_sum = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(MacSumCapacity {
        c_sum,
        q1,
        q2,
        iterations: history.len(),
        converged,
        one_step: history[0],
        history,
    })
}
