//! Values frozen from an independent numpy/scipy implementation: its own
//! SplitMix64 and Box-Muller, SVD water-filling with bisection on the water
//! level, and the scheduling LP solved by HiGHS before eliminating the MAC
//! rates.

use diamond_gap::bounds::gap_report;
use diamond_gap::protocol::{Branch, GammaForm};
use diamond_gap::{derive_params, random_diamond};

struct Frozen {
    n: usize,
    seed: u64,
    h01_00: f64,
    h23_last: f64,
    c: [f64; 6],
    delta: f64,
    gamma: f64,
    pentagon: [f64; 3],
    r_ach: f64,
    r_up: f64,
    kappa: f64,
}

const FROZEN: [Frozen; 5] = [
    Frozen {
        n: 2,
        seed: 21,
        h01_00: 2.3216022427747443,
        h23_last: 0.06520223113840115,
        c: [
            1.5490571489171518,
            1.290340551138778,
            0.8579508319971326,
            1.007808438295014,
            1.9116069034128413,
            1.8180467472553765,
        ],
        delta: 1.1341611671502836,
        gamma: -0.01625475238118157,
        pentagon: [0.8579508319971326, 0.9984632562561129, 1.6163491288883438],
        r_ach: 1.085790586562939,
        r_up: 1.112388587678689,
        kappa: 0.02659800111575006,
    },
    Frozen {
        n: 3,
        seed: 17,
        h01_00: -0.9112702541667421,
        h23_last: -0.050777275096585604,
        c: [
            2.13769030431503,
            1.8108262662513974,
            1.50472039492394,
            1.518482167568929,
            3.094563065274543,
            3.0971126242836355,
        ],
        delta: 1.5860946652953203,
        gamma: -0.4910773463162794,
        pentagon: [1.50472039492394, 1.4233055724844426, 2.563485602833921],
        r_ach: 1.6710699818870316,
        r_up: 1.7880669074473126,
        kappa: 0.11699692556028096,
    },
    Frozen {
        n: 1,
        seed: 33,
        h01_00: 1.6703094178489541,
        h23_last: 1.3082678693899368,
        c: [
            0.96108627697244,
            0.3951970193598355,
            0.3864501815023387,
            0.7195628286953006,
            1.0880784481469532,
            1.2730499643853805,
        ],
        delta: 0.1017432462555144,
        gamma: -0.18156729903206315,
        pentagon: [0.3864501815023387, 0.7195628286953006, 0.8870543258280816],
        r_ach: 0.5241748617645197,
        r_up: 0.7012424946188807,
        kappa: 0.177067632854361,
    },
    Frozen {
        n: 2,
        seed: 9,
        h01_00: 0.0038172734243137993,
        h23_last: -0.4870696251284685,
        c: [
            1.0672640675184155,
            1.026476116658771,
            1.150411393204875,
            0.32069503779887987,
            1.4335255926278057,
            1.6136193963067276,
        ],
        delta: 0.7265898502476482,
        gamma: -0.9044197576254698,
        pentagon: [1.150411393204875, 0.3183181744420676, 1.3928950237297053],
        r_ach: 0.7883290609388062,
        r_up: 0.9643882085176294,
        kappa: 0.17605914757882324,
    },
    Frozen {
        n: 4,
        seed: 3,
        h01_00: -0.6410515695262362,
        h23_last: 0.25297911839667764,
        c: [
            2.15348581456491,
            1.8503747480902208,
            2.129190190332736,
            1.8502053179278495,
            2.941320603200537,
            3.9894572475802246,
        ],
        delta: 0.04531675860797124,
        gamma: -1.164657496852144,
        pentagon: [2.129190190332736, 1.6785617388483458, 3.5841042316346634],
        r_ach: 1.9951505653685135,
        r_up: 2.0058556447178155,
        kappa: 0.010705079349301982,
    },
];

fn close(a: f64, b: f64, tol: f64, what: &str) {
    assert!((a - b).abs() <= tol, "{what}: {a} vs {b}");
}

#[test]
fn generator_matches_reference_draws() {
    for f in &FROZEN {
        let dc = random_diamond(f.n, f.seed, 1.0);
        close(dc.h01[(0, 0)], f.h01_00, 1e-14, "H01[0][0]");
        close(dc.h23[(f.n - 1, f.n - 1)], f.h23_last, 1e-14, "H23[n-1][n-1]");
    }
}

#[test]
fn link_and_cut_capacities() {
    for f in &FROZEN {
        let p = derive_params(&random_diamond(f.n, f.seed, 1.0)).unwrap();
        let got = [p.c01, p.c02, p.c13, p.c23, p.c012, p.c123];
        for (k, (g, e)) in got.iter().zip(&f.c).enumerate() {
            close(*g, *e, 1e-9, &format!("seed {} capacity {k}", f.seed));
        }
        close(p.delta, f.delta, 1e-9, "delta");
    }
}

#[test]
fn pentagon_rates_and_gap() {
    for f in &FROZEN {
        let r = gap_report(&random_diamond(f.n, f.seed, 1.0), GammaForm::Corrected).unwrap();
        close(r.gamma, f.gamma, 1e-9, "gamma");
        assert_eq!(r.branch, Branch::Branch1);
        close(r.pentagon.c13p, f.pentagon[0], 1e-9, "C'13");
        close(r.pentagon.c23p, f.pentagon[1], 1e-9, "C'23");
        close(r.pentagon.cmacp, f.pentagon[2], 1e-9, "C'MAC");
        close(r.r_ach, f.r_ach, 1e-8, "r_ach");
        close(r.r_up, f.r_up, 1e-9, "r_up");
        close(r.kappa, f.kappa, 1e-8, "kappa");
        assert!(r.all_checks_pass);
    }
}
