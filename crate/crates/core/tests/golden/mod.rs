//! Hand-derived correlation matrices and mean vectors of the three-arm,
//! three-stage design with `n = 206` per stage. Shared by the core
//! covariance tests and the acceptance suite.

use dtl_core::{build_moment_problem, EffectConfig, StatCoord as C, TrialDesign};

pub const N: u32 = 206;
pub const THETA_PRIME: f64 = 0.594;
pub const THETA_ZERO: f64 = 0.098;

pub fn sigma() -> f64 {
    9.47f64.sqrt()
}

pub fn design() -> TrialDesign {
    TrialDesign::new(3, N, vec![3.47, 2.45, 2.0], 0.025, sigma()).unwrap()
}

pub struct Case {
    pub name: String,
    pub coords: Vec<C>,
    pub effects: EffectConfig,
    pub corr: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
}

impl Case {
    /// Largest absolute deviation of the built problem from the expected
    /// correlations and means.
    pub fn max_deviation(&self) -> f64 {
        let k = self.coords.len();
        let inf = f64::INFINITY;
        let p = build_moment_problem(&design(), &self.effects, &self.coords, &vec![-inf; k], &vec![inf; k]).unwrap();
        assert_eq!(self.corr.len(), k, "{}", self.name);
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                worst = worst.max((p.corr(i, j) - self.corr[i][j]).abs());
            }
            worst = worst.max((p.mean()[i] - self.mean[i]).abs());
        }
        worst
    }
}

const H: f64 = 0.5;

fn a() -> f64 {
    1.0 / (2.0 * 2f64.sqrt())
}

fn r2() -> f64 {
    1.0 / 2f64.sqrt()
}

/// `delta * sqrt(j n) / (sigma sqrt 2)`.
fn m(delta: f64, stage: u32) -> f64 {
    delta * f64::from(stage * N).sqrt() / (sigma() * 2f64.sqrt())
}

fn lfc() -> EffectConfig {
    EffectConfig::least_favorable(3, 1, THETA_PRIME, THETA_ZERO)
}

fn null() -> EffectConfig {
    EffectConfig::global_null(3)
}

/// Effects used for the stop-stage cases, distinct so that every order
/// gets its own mean vector.
fn mixed() -> EffectConfig {
    EffectConfig::new(vec![0.3, -0.1, 0.7])
}

fn stage_two_matrix() -> Vec<Vec<f64>> {
    let (a, r2) = (a(), r2());
    vec![
        vec![1.0, H, a, 0.0, r2, a],
        vec![H, 1.0, a, -a, a, -a],
        vec![a, a, 1.0, H, H, 0.0],
        vec![0.0, -a, H, 1.0, 0.0, H],
        vec![r2, a, H, 0.0, 1.0, H],
        vec![a, -a, 0.0, H, H, 1.0],
    ]
}

fn stage_three_matrix() -> Vec<Vec<f64>> {
    let (a, r2) = (a(), r2());
    let s3 = 3f64.sqrt();
    let b = 1.0 / (2.0 * s3);
    let c = 1.0 / 6f64.sqrt();
    let e = 1.0 / s3;
    let f = 2f64.sqrt() / s3;
    vec![
        vec![1.0, b, 0.0, c, e, b, f],
        vec![b, 1.0, H, a, H, 0.0, a],
        vec![0.0, H, 1.0, -a, 0.0, H, 0.0],
        vec![c, a, -a, 1.0, a, -a, H],
        vec![e, H, 0.0, a, 1.0, H, r2],
        vec![b, 0.0, H, -a, H, 1.0, a],
        vec![f, a, 0.0, H, r2, a, 1.0],
    ]
}

fn stage_three_coords() -> Vec<C> {
    vec![
        C::single(1, 3),
        C::diff(1, 3, 1),
        C::diff(2, 3, 1),
        C::diff(1, 2, 2),
        C::single(1, 1),
        C::single(2, 1),
        C::single(1, 2),
    ]
}

fn two_pair_matrix() -> Vec<Vec<f64>> {
    vec![
        vec![1.0, H, H, 0.0],
        vec![H, 1.0, 0.0, H],
        vec![H, 0.0, 1.0, H],
        vec![0.0, H, H, 1.0],
    ]
}

const ALL_ORDERS: [(usize, usize, usize); 6] = [(1, 2, 3), (1, 3, 2), (2, 3, 1), (3, 2, 1), (3, 1, 2), (2, 1, 3)];

pub fn cases() -> Vec<Case> {
    let (a, r2) = (a(), r2());
    let (tp, t0) = (THETA_PRIME, THETA_ZERO);
    let mut out = Vec::new();

    let s13 = (1.0f64 / 3.0).sqrt();
    let s23 = (2.0f64 / 3.0).sqrt();
    out.push(Case {
        name: "crossing of one arm".into(),
        coords: vec![C::single(1, 1), C::single(1, 2), C::single(1, 3)],
        effects: null(),
        corr: vec![vec![1.0, r2, s13], vec![r2, 1.0, s23], vec![s13, s23, 1.0]],
        mean: vec![0.0; 3],
    });

    out.push(Case {
        name: "recommendation at stage 1".into(),
        coords: vec![C::single(1, 1), C::diff(1, 2, 1), C::diff(1, 3, 1), C::single(2, 1), C::diff(2, 3, 1)],
        effects: lfc(),
        corr: vec![
            vec![1.0, H, H, H, 0.0],
            vec![H, 1.0, H, -H, -H],
            vec![H, H, 1.0, 0.0, H],
            vec![H, -H, 0.0, 1.0, H],
            vec![0.0, -H, H, H, 1.0],
        ],
        mean: vec![m(tp, 1), m(tp - t0, 1), m(tp - t0, 1), m(t0, 1), 0.0],
    });

    out.push(Case {
        name: "recommendation at stage 2".into(),
        coords: vec![
            C::single(1, 2),
            C::diff(1, 2, 2),
            C::diff(1, 3, 1),
            C::diff(2, 3, 1),
            C::single(1, 1),
            C::single(2, 1),
        ],
        effects: lfc(),
        corr: stage_two_matrix(),
        mean: vec![m(tp, 2), m(tp - t0, 2), m(tp - t0, 1), 0.0, m(tp, 1), m(t0, 1)],
    });

    out.push(Case {
        name: "recommendation at stage 3".into(),
        coords: stage_three_coords(),
        effects: lfc(),
        corr: stage_three_matrix(),
        mean: vec![m(tp, 3), m(tp - t0, 1), 0.0, m(tp - t0, 2), m(tp, 1), m(t0, 1), m(tp, 2)],
    });

    let e = mixed();
    let d = |k: usize| e.delta(k);
    for (i1, i2, i3) in [(1, 2, 3), (1, 3, 2), (2, 3, 1)] {
        out.push(Case {
            name: format!("stop at stage 1, arm {i3} dropped"),
            coords: vec![C::single(i1, 1), C::diff(i1, i3, 1), C::single(i2, 1), C::diff(i2, i3, 1)],
            effects: e.clone(),
            corr: two_pair_matrix(),
            mean: vec![m(d(i1), 1), m(d(i1) - d(i3), 1), m(d(i2), 1), m(d(i2) - d(i3), 1)],
        });
    }
    for (i1, i2, i3) in ALL_ORDERS {
        out.push(Case {
            name: format!("stop at stage 2, arms {i3} then {i2} dropped"),
            coords: vec![
                C::single(i1, 2),
                C::diff(i1, i2, 2),
                C::diff(i1, i3, 1),
                C::diff(i2, i3, 1),
                C::single(i1, 1),
                C::single(i2, 1),
            ],
            effects: e.clone(),
            corr: stage_two_matrix(),
            mean: vec![
                m(d(i1), 2),
                m(d(i1) - d(i2), 2),
                m(d(i1) - d(i3), 1),
                m(d(i2) - d(i3), 1),
                m(d(i1), 1),
                m(d(i2), 1),
            ],
        });
        out.push(Case {
            name: format!("stop at stage 3, arms {i3} then {i2} dropped"),
            coords: vec![
                C::diff(i1, i3, 1),
                C::diff(i2, i3, 1),
                C::diff(i1, i2, 2),
                C::single(i1, 1),
                C::single(i2, 1),
                C::single(i1, 2),
            ],
            effects: e.clone(),
            corr: vec![
                vec![1.0, H, a, H, 0.0, a],
                vec![H, 1.0, -a, 0.0, H, 0.0],
                vec![a, -a, 1.0, a, -a, H],
                vec![H, 0.0, a, 1.0, H, r2],
                vec![0.0, H, -a, H, 1.0, a],
                vec![a, 0.0, H, r2, a, 1.0],
            ],
            mean: vec![
                m(d(i1) - d(i3), 1),
                m(d(i2) - d(i3), 1),
                m(d(i1) - d(i2), 2),
                m(d(i1), 1),
                m(d(i2), 1),
                m(d(i1), 2),
            ],
        });
    }

    out.push(Case {
        name: "rejection at stage 1, another arm dropped".into(),
        coords: vec![C::single(1, 1), C::diff(1, 3, 1), C::single(2, 1), C::diff(2, 3, 1)],
        effects: null(),
        corr: two_pair_matrix(),
        mean: vec![0.0; 4],
    });
    out.push(Case {
        name: "rejection at stage 1, focal arm dropped".into(),
        coords: vec![C::single(1, 1), C::diff(1, 2, 1), C::diff(1, 3, 1), C::single(2, 1), C::single(3, 1)],
        effects: null(),
        corr: vec![
            vec![1.0, H, H, H, H],
            vec![H, 1.0, H, -H, 0.0],
            vec![H, H, 1.0, 0.0, -H],
            vec![H, -H, 0.0, 1.0, H],
            vec![H, 0.0, -H, H, 1.0],
        ],
        mean: vec![0.0; 5],
    });
    out.push(Case {
        name: "rejection at stage 2".into(),
        coords: vec![C::single(1, 2), C::diff(1, 3, 1), C::diff(2, 3, 1), C::single(1, 1), C::single(2, 1)],
        effects: null(),
        corr: vec![
            vec![1.0, a, 0.0, r2, a],
            vec![a, 1.0, H, H, 0.0],
            vec![0.0, H, 1.0, 0.0, H],
            vec![r2, H, 0.0, 1.0, H],
            vec![a, 0.0, H, H, 1.0],
        ],
        mean: vec![0.0; 5],
    });
    out.push(Case {
        name: "rejection at stage 3".into(),
        coords: stage_three_coords(),
        effects: null(),
        corr: stage_three_matrix(),
        mean: vec![0.0; 7],
    });
    out
}
