//! The diamond channel: four n x n links, the six cut/link capacities
//! derived from them, a seeded Gaussian ensemble and the JSON file format.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::capacity::waterfill;
use crate::error::{Error, Result};
use crate::linalg::{Matrix, PsdMatrix};
use crate::rng::SplitMix64;

/// Per-node transmit power. Fixed: the gap constants assume unit budgets.
pub const NODE_POWER: f64 = 1.0;
/// Budget of the joint relay transmitter behind `C123` (both relays).
pub const RELAY_PAIR_POWER: f64 = 2.0;

/// Source `S` (0), relays `R1` (1) and `R2` (2), destination `D` (3).
/// `h_ab` maps the signal of node `a` to the antennas of node `b`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiamondChannel {
    pub n: usize,
    #[serde(rename = "H01")]
    pub h01: Matrix,
    #[serde(rename = "H02")]
    pub h02: Matrix,
    #[serde(rename = "H13")]
    pub h13: Matrix,
    #[serde(rename = "H23")]
    pub h23: Matrix,
}

impl DiamondChannel {
    pub fn new(h01: Matrix, h02: Matrix, h13: Matrix, h23: Matrix) -> Result<Self> {
        let n = h01.rows();
        for (name, h) in [("H01", &h01), ("H02", &h02), ("H13", &h13), ("H23", &h23)] {
            if h.rows() != n || h.cols() != n {
                return Err(Error::Contract(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    h.rows(),
                    h.cols()
                )));
            }
        }
        Ok(Self { n, h01, h02, h13, h23 })
    }

    /// Every link equal to the identity.
    pub fn identity(n: usize) -> Self {
        let i = Matrix::identity(n);
        Self {
            n,
            h01: i.clone(),
            h02: i.clone(),
            h13: i.clone(),
            h23: i,
        }
    }

    /// Single-antenna channel from four scalar gains.
    pub fn scalar(h01: f64, h02: f64, h13: f64, h23: f64) -> Self {
        let m = |x| Matrix::diag(&[x]);
        Self {
            n: 1,
            h01: m(h01),
            h02: m(h02),
            h13: m(h13),
            h23: m(h23),
        }
    }

    /// Relabels the relays (R1 <-> R2).
    pub fn swap_relays(&self) -> Self {
        Self {
            n: self.n,
            h01: self.h02.clone(),
            h02: self.h01.clone(),
            h13: self.h23.clone(),
            h23: self.h13.clone(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n: self.n,
            h01: self.h01.scale(c),
            h02: self.h02.scale(c),
            h13: self.h13.scale(c),
            h23: self.h23.scale(c),
        }
    }

    /// `[H01; H02]`: the source seen by both relays jointly.
    pub fn h012(&self) -> Matrix {
        self.h01.vstack(&self.h02)
    }

    /// `[H13 H23]`: both relays seen by the destination jointly.
    pub fn h123(&self) -> Matrix {
        self.h13.hstack(&self.h23)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DiamondParams {
    pub n: usize,
    pub c01: f64,
    pub c02: f64,
    pub c13: f64,
    pub c23: f64,
    pub c012: f64,
    pub c123: f64,
    pub k01: PsdMatrix,
    pub k02: PsdMatrix,
    pub k13: PsdMatrix,
    pub k23: PsdMatrix,
    pub k012: PsdMatrix,
    pub k123: PsdMatrix,
    /// `C01 C02 - C13 C23`.
    pub delta: f64,
}

impl DiamondParams {
    /// Parameters with the given link capacities and placeholder covariances.
    ///
    /// Useful for exercising the scheduling and bound formulas on
    /// hand-picked numbers.
    pub fn from_capacities(c01: f64, c02: f64, c13: f64, c23: f64, c012: f64, c123: f64) -> Self {
        let z = PsdMatrix::zeros(1);
        Self {
            n: 1,
            c01,
            c02,
            c13,
            c23,
            c012,
            c123,
            k01: z.clone(),
            k02: z.clone(),
            k13: z.clone(),
            k23: z.clone(),
            k012: z.clone(),
            k123: PsdMatrix::zeros(2),
            delta: c01 * c02 - c13 * c23,
        }
    }
}

pub fn derive_params(dc: &DiamondChannel) -> Result<DiamondParams> {
    let l01 = waterfill(&dc.h01, NODE_POWER)?;
    let l02 = waterfill(&dc.h02, NODE_POWER)?;
    let l13 = waterfill(&dc.h13, NODE_POWER)?;
    let l23 = waterfill(&dc.h23, NODE_POWER)?;
    let l012 = waterfill(&dc.h012(), NODE_POWER)?;
    let l123 = waterfill(&dc.h123(), RELAY_PAIR_POWER)?;
    let delta = l01.capacity_bits * l02.capacity_bits - l13.capacity_bits * l23.capacity_bits;
    Ok(DiamondParams {
        n: dc.n,
        c01: l01.capacity_bits,
        c02: l02.capacity_bits,
        c13: l13.capacity_bits,
        c23: l23.capacity_bits,
        c012: l012.capacity_bits,
        c123: l123.capacity_bits,
        k01: l01.covariance,
        k02: l02.covariance,
        k13: l13.covariance,
        k23: l23.covariance,
        k012: l012.covariance,
        k123: l123.covariance,
        delta,
    })
}

/// Channel with i.i.d. `N(0, scale^2)` entries drawn from [`SplitMix64`]
/// seeded with `seed`, filling H01, H02, H13, H23 in that order, each row-major.
pub fn random_diamond(n: usize, seed: u64, scale: f64) -> DiamondChannel {
    assert!(n >= 1, "antenna count must be at least 1");
    assert!(scale > 0.0 && scale.is_finite(), "scale must be positive");
    let mut rng = SplitMix64::new(seed);
    let mut draw = || Matrix::from_fn(n, n, |_, _| scale * rng.normal());
    let h01 = draw();
    let h02 = draw();
    let h13 = draw();
    let h23 = draw();
    DiamondChannel { n, h01, h02, h13, h23 }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelDoc {
    n: i64,
    #[serde(rename = "H01")]
    h01: Vec<Vec<f64>>,
    #[serde(rename = "H02")]
    h02: Vec<Vec<f64>>,
    #[serde(rename = "H13")]
    h13: Vec<Vec<f64>>,
    #[serde(rename = "H23")]
    h23: Vec<Vec<f64>>,
}

/// Parses a channel document. `origin` only labels error messages.
pub fn parse_channel(text: &str, origin: &Path) -> Result<DiamondChannel> {
    let doc: ChannelDoc = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    let schema = |message: String| Error::Schema {
        path: origin.to_path_buf(),
        message,
    };
    if doc.n < 1 {
        return Err(schema(format!("field `n` must be at least 1, got {}", doc.n)));
    }
    let n = doc.n as usize;
    let field = |name: &str, rows: &[Vec<f64>]| -> Result<Matrix> {
        let ok = rows.len() == n && rows.iter().all(|r| r.len() == n);
        if !ok {
            let cols = rows.first().map_or(0, Vec::len);
            return Err(schema(format!(
                "field `{name}` must be {n}x{n}, got {}x{cols}{}",
                rows.len(),
                if rows.iter().any(|r| r.len() != cols) { " (ragged)" } else { "" }
            )));
        }
        Matrix::from_rows(rows).map_err(|e| schema(format!("field `{name}`: {e}")))
    };
    Ok(DiamondChannel {
        n,
        h01: field("H01", &doc.h01)?,
        h02: field("H02", &doc.h02)?,
        h13: field("H13", &doc.h13)?,
        h23: field("H23", &doc.h23)?,
    })
}

pub fn load_channel(path: impl AsRef<Path>) -> Result<DiamondChannel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_channel(&text, path)
}

/// Serialises with 17 significant digits per entry, so loading the result
/// reproduces every entry bit for bit.
pub fn channel_to_json(dc: &DiamondChannel) -> String {
    let mut out = String::new();
    let _ = write!(out, "{{\n  \"n\": {}", dc.n);
    for (name, h) in [("H01", &dc.h01), ("H02", &dc.h02), ("H13", &dc.h13), ("H23", &dc.h23)] {
        let _ = write!(out, ",\n  \"{name}\": [");
        for i in 0..h.rows() {
            out.push_str(if i == 0 { "[" } else { ", [" });
            for (j, x) in h.row(i).iter().enumerate() {
                if j > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{x:.16e}");
            }
            out.push(']');
        }
        out.push(']');
    }
    out.push_str("\n}\n");
    out
}

pub fn save_channel(dc: &DiamondChannel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, channel_to_json(dc)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HALF_LOG2_5: f64 = 1.160_964_047_443_681_2;

    #[test]
    fn identity_scalar_params() {
        let p = derive_params(&DiamondChannel::identity(1)).unwrap();
        for c in [p.c01, p.c02, p.c13, p.c23] {
            assert!((c - 0.5).abs() < 1e-15);
        }
        assert!(p.delta.abs() < 1e-15);
        // two unit inputs into one output with total power 2: 1 + 2*2
        assert!((p.c123 - HALF_LOG2_5).abs() < 1e-14);
        assert!((p.c012 - 0.5 * 3f64.log2()).abs() < 1e-14);
    }

    #[test]
    fn strong_first_hop_has_positive_delta() {
        let p = derive_params(&DiamondChannel::scalar(2.0, 2.0, 1.0, 1.0)).unwrap();
        let expected = (0.5 * 5f64.log2()).powi(2) - 0.25;
        assert!((p.delta - expected).abs() < 1e-14);
        assert!(p.delta > 0.0);
    }

    #[test]
    fn dead_second_hop() {
        let mut dc = random_diamond(2, 3, 1.0);
        dc.h13 = Matrix::zeros(2, 2);
        dc.h23 = Matrix::zeros(2, 2);
        let p = derive_params(&dc).unwrap();
        assert_eq!((p.c13, p.c23, p.c123), (0.0, 0.0, 0.0));
        assert_eq!(p.delta, p.c01 * p.c02);
    }

    #[test]
    fn random_is_deterministic_and_seed_sensitive() {
        assert_eq!(random_diamond(1, 0, 1.0), random_diamond(1, 0, 1.0));
        assert_ne!(random_diamond(2, 1, 1.0), random_diamond(2, 2, 1.0));
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let err = DiamondChannel::new(
            Matrix::identity(2),
            Matrix::identity(2),
            Matrix::zeros(2, 3),
            Matrix::identity(2),
        )
        .unwrap_err();
        assert!(err.to_string().contains("H13"));
    }

    #[test]
    fn swap_is_an_involution() {
        let dc = random_diamond(3, 8, 1.0);
        assert_eq!(dc.swap_relays().swap_relays(), dc);
        assert_eq!(dc.swap_relays().h01, dc.h02);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let dc = random_diamond(3, 77, 0.37);
        let back = parse_channel(&channel_to_json(&dc), Path::new("mem")).unwrap();
        assert_eq!(back, dc);
    }

    #[test]
    fn missing_field_is_named() {
        let text = r#"{"n": 1, "H01": [[1]], "H02": [[1]], "H13": [[1]]}"#;
        let err = parse_channel(text, Path::new("x.json")).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(err.to_string().contains("H23"), "{err}");
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn wrong_shape_is_schema_error() {
        let text = r#"{"n": 2, "H01": [[1, 0], [0, 1], [0, 0]],
            "H02": [[1, 0], [0, 1]], "H13": [[1, 0], [0, 1]], "H23": [[1, 0], [0, 1]]}"#;
        let err = parse_channel(text, Path::new("x.json")).unwrap_err();
        assert!(matches!(err, Error::Schema { .. }), "{err}");
        assert!(err.to_string().contains("H01"));
    }

    #[test]
    fn non_positive_n_is_schema_error() {
        let text = r#"{"n": 0, "H01": [], "H02": [], "H13": [], "H23": []}"#;
        assert!(matches!(
            parse_channel(text, Path::new("x.json")),
            Err(Error::Schema { .. })
        ));
    }
}
