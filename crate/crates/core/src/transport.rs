//! Branching particle transport in the square `[0,1] × [-1/2, 1/2]`.
//!
//! A particle enters at the origin moving along `+x`, flies an exponential
//! free path, and if still inside the square splits into two offspring whose
//! directions are the parent's plus independent uniform angles on
//! `[-π/2, π/2]`. Offspring behave like the parent. The tree is walked depth
//! first, first-drawn child first, which fixes the order in which tape cells
//! are read:
//!
//! * one cell per particle for its free path (memo id 1 caches `-ln(1 - u)`),
//! * two cells per split for the offspring angles, both read at the split
//!   (memo ids 2 and 3 cache `cos` and `sin` of the angle `π(u - 1/2)`).
//!
//! Directions are carried as unit vectors and turned by rotation, so the only
//! transcendental work per particle sits in memo slots.

use std::f64::consts::PI;

use thiserror::Error;

use crate::estimators::{ConsumptionModel, Evaluation, ModelError};
use crate::tape::{TapeCursor, TransformId};

pub const FREE_PATH_TRANSFORM: TransformId = TransformId::constant(1);
pub const ANGLE_COS_TRANSFORM: TransformId = TransformId::constant(2);
pub const ANGLE_SIN_TRANSFORM: TransformId = TransformId::constant(3);

/// The λ grid of the benchmark table, in column order.
pub const PAPER_LAMBDAS: [f64; 5] = [0.98, 0.96, 0.94, 0.92, 0.90];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransportParamError {
    #[error("lambda must be positive and finite (got {0})")]
    Lambda(f64),
    #[error("depth and particle caps must be at least 1")]
    Cap,
}

/// How λ parameterizes the exponential free path.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FreePathLaw {
    /// λ is the mean free path: `distance = λ · (-ln(1 - u))`.
    #[default]
    Mean,
    /// λ is the rate: `distance = -ln(1 - u) / λ`.
    Rate,
}

impl FreePathLaw {
    pub fn as_str(self) -> &'static str {
        match self {
            FreePathLaw::Mean => "mean",
            FreePathLaw::Rate => "rate",
        }
    }
}

impl std::str::FromStr for FreePathLaw {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mean" => Ok(Self::Mean),
            "rate" => Ok(Self::Rate),
            other => Err(format!("unknown free-path law {other:?} (expected mean or rate)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransportParams {
    pub lambda: f64,
    pub law: FreePathLaw,
    pub max_depth: u32,
    pub max_particles: u64,
}

impl TransportParams {
    pub fn new(lambda: f64) -> Result<Self, TransportParamError> {
        Self {
            lambda,
            law: FreePathLaw::default(),
            max_depth: 64,
            max_particles: 1_000_000,
        }
        .validated()
    }

    pub fn with_law(mut self, law: FreePathLaw) -> Self {
        self.law = law;
        self
    }

    pub fn with_caps(mut self, max_depth: u32, max_particles: u64) -> Result<Self, TransportParamError> {
        self.max_depth = max_depth;
        self.max_particles = max_particles;
        self.validated()
    }

    fn validated(self) -> Result<Self, TransportParamError> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(TransportParamError::Lambda(self.lambda));
        }
        if self.max_depth == 0 || self.max_particles == 0 {
            return Err(TransportParamError::Cap);
        }
        Ok(self)
    }

    #[inline]
    fn distance(&self, standard_exponential: f64) -> f64 {
        match self.law {
            FreePathLaw::Mean => self.lambda * standard_exponential,
            FreePathLaw::Rate => standard_exponential / self.lambda,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParticleState {
    pub x: f64,
    pub y: f64,
    /// Unit direction vector; `(1, 0)` is `+x`.
    pub cos: f64,
    pub sin: f64,
    pub depth: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Right,
    Left,
    Top,
    Bottom,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TransportOutcome {
    pub splittings: u64,
    pub exits_right: u64,
    pub exits_left: u64,
    pub exits_top: u64,
    pub exits_bottom: u64,
    pub particles: u64,
    pub consumed: u64,
    pub depth_reached: u32,
    pub truncated: bool,
}

impl TransportOutcome {
    pub fn exits(&self) -> u64 {
        self.exits_right + self.exits_left + self.exits_top + self.exits_bottom
    }

    fn tally(&mut self, side: Side) {
        match side {
            Side::Right => self.exits_right += 1,
            Side::Left => self.exits_left += 1,
            Side::Top => self.exits_top += 1,
            Side::Bottom => self.exits_bottom += 1,
        }
    }
}

/// Distance along `(cos, sin)` from `(x, y)` to the square's boundary and the
/// side crossed. Corner ties go to the vertical side.
pub fn boundary_crossing(x: f64, y: f64, cos: f64, sin: f64) -> (f64, Side) {
    let (tx, vertical) = if cos > 0.0 {
        ((1.0 - x) / cos, Side::Right)
    } else if cos < 0.0 {
        (-x / cos, Side::Left)
    } else {
        (f64::INFINITY, Side::Right)
    };
    let (ty, horizontal) = if sin > 0.0 {
        ((0.5 - y) / sin, Side::Top)
    } else if sin < 0.0 {
        ((-0.5 - y) / sin, Side::Bottom)
    } else {
        (f64::INFINITY, Side::Top)
    };
    if tx <= ty {
        (tx, vertical)
    } else {
        (ty, horizontal)
    }
}

/// Observer of split and exit events, used by geometry tests.
pub trait TreeObserver {
    fn split(&mut self, _x: f64, _y: f64) {}
    fn exit(&mut self, _x: f64, _y: f64, _side: Side) {}
}

impl TreeObserver for () {}

pub fn simulate_tree(params: &TransportParams, cursor: &mut TapeCursor<'_>) -> Result<TransportOutcome, ModelError> {
    simulate_tree_observed(params, cursor, &mut ())
}

pub fn simulate_tree_observed<O: TreeObserver>(
    params: &TransportParams,
    cursor: &mut TapeCursor<'_>,
    observer: &mut O,
) -> Result<TransportOutcome, ModelError> {
    let first = cursor.consumed();
    let mut out = TransportOutcome {
        particles: 1,
        ..Default::default()
    };
    thread_local!(static STACK: std::cell::RefCell<Vec<ParticleState>> = const { std::cell::RefCell::new(Vec::new()) });
    let mut stack = STACK.take();
    stack.push(ParticleState {
        x: 0.0,
        y: 0.0,
        cos: 1.0,
        sin: 0.0,
        depth: 0,
    });

    while let Some(p) = stack.pop() {
        out.depth_reached = out.depth_reached.max(p.depth);
        let e = cursor.next_transformed(FREE_PATH_TRANSFORM, |u| -(1.0 - u).ln())?;
        let distance = params.distance(e);
        let (cos, sin) = (p.cos, p.sin);
        let (t, side) = boundary_crossing(p.x, p.y, cos, sin);
        if t <= distance {
            out.tally(side);
            observer.exit(p.x + t * cos, p.y + t * sin, side);
            continue;
        }
        if p.depth >= params.max_depth || out.particles + 2 > params.max_particles {
            out.truncated = true;
            continue;
        }
        let (x, y) = (p.x + distance * cos, p.y + distance * sin);
        out.splittings += 1;
        observer.split(x, y);
        let phi1 = cursor.next_transformed_pair(
            (ANGLE_COS_TRANSFORM, |u| (PI * (u - 0.5)).cos()),
            (ANGLE_SIN_TRANSFORM, |u| (PI * (u - 0.5)).sin()),
        )?;
        let phi2 = cursor.next_transformed_pair(
            (ANGLE_COS_TRANSFORM, |u| (PI * (u - 0.5)).cos()),
            (ANGLE_SIN_TRANSFORM, |u| (PI * (u - 0.5)).sin()),
        )?;
        out.particles += 2;
        let child = |(c, s): (f64, f64)| ParticleState {
            x,
            y,
            cos: cos * c - sin * s,
            sin: sin * c + cos * s,
            depth: p.depth + 1,
        };
        stack.push(child(phi2));
        stack.push(child(phi1));
    }
    out.consumed = cursor.consumed() - first;
    STACK.set(stack);
    Ok(out)
}

/// The transport tree as a two-payoff consumption model:
/// `["splittings", "right_exits"]`.
#[derive(Clone, Copy, Debug)]
pub struct TransportModel {
    pub params: TransportParams,
}

pub fn transport_model(params: TransportParams) -> TransportModel {
    TransportModel { params }
}

impl ConsumptionModel for TransportModel {
    fn payoff_names(&self) -> Vec<String> {
        vec!["splittings".into(), "right_exits".into()]
    }

    fn evaluate(&self, cursor: &mut TapeCursor<'_>, payoff: &mut [f64]) -> Result<Evaluation, ModelError> {
        let out = simulate_tree(&self.params, cursor)?;
        payoff[0] = out.splittings as f64;
        payoff[1] = out.exits_right as f64;
        Ok(Evaluation {
            truncated: out.truncated,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{mc_estimate, shift_estimate};
    use crate::tape::Tape;

    #[derive(Default)]
    struct Geometry {
        splits: Vec<(f64, f64)>,
        exits: Vec<(f64, f64, Side)>,
    }

    impl TreeObserver for Geometry {
        fn split(&mut self, x: f64, y: f64) {
            self.splits.push((x, y));
        }
        fn exit(&mut self, x: f64, y: f64, side: Side) {
            self.exits.push((x, y, side));
        }
    }

    #[test]
    fn param_validation() {
        assert!(TransportParams::new(0.0).is_err());
        assert!(TransportParams::new(-1.0).is_err());
        assert!(TransportParams::new(f64::NAN).is_err());
        assert!(TransportParams::new(0.98).unwrap().with_caps(0, 10).is_err());
        assert_eq!("rate".parse::<FreePathLaw>(), Ok(FreePathLaw::Rate));
        assert!("x".parse::<FreePathLaw>().is_err());
    }

    #[test]
    fn crossing_geometry() {
        assert_eq!(boundary_crossing(0.0, 0.0, 1.0, 0.0), (1.0, Side::Right));
        assert_eq!(boundary_crossing(0.5, 0.0, -1.0, 0.0), (0.5, Side::Left));
        assert_eq!(boundary_crossing(0.5, 0.0, 0.0, 1.0), (0.5, Side::Top));
        assert_eq!(boundary_crossing(0.5, 0.25, 0.0, -1.0), (0.75, Side::Bottom));
        // exact corner: right and top lines at the same t
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (t, side) = boundary_crossing(0.5, 0.0, s, s);
        assert_eq!(side, Side::Right);
        assert!((t - 0.5 / s).abs() < 1e-15);
    }

    /// Finds a tape start whose first cell gives a free path of at least 1.
    fn long_first_path(tape: &mut Tape, lambda: f64) -> u64 {
        (1..).find(|&i| lambda * -(1.0 - tape.cell_value(i).unwrap()).ln() >= 1.0).unwrap()
    }

    #[test]
    fn long_root_path_exits_right() {
        let params = TransportParams::new(0.98).unwrap();
        let mut tape = Tape::new(42);
        let start = long_first_path(&mut tape, 0.98);
        let out = simulate_tree(&params, &mut tape.cursor(start).unwrap()).unwrap();
        assert_eq!(out.splittings, 0);
        assert_eq!(out.exits_right, 1);
        assert_eq!(out.consumed, 1);
        assert_eq!(out.particles, 1);
    }

    #[test]
    fn rate_law_divides() {
        let params = TransportParams::new(2.0).unwrap().with_law(FreePathLaw::Rate);
        assert_eq!(params.distance(3.0), 1.5);
        assert_eq!(TransportParams::new(2.0).unwrap().distance(3.0), 6.0);
    }

    #[test]
    fn tree_identities_and_containment() {
        for law in [FreePathLaw::Mean, FreePathLaw::Rate] {
            let params = TransportParams::new(0.9).unwrap().with_law(law);
            let mut tape = Tape::new(17);
            for start in 1..5000 {
                let mut geo = Geometry::default();
                let out = simulate_tree_observed(&params, &mut tape.cursor(start).unwrap(), &mut geo).unwrap();
                assert!(!out.truncated);
                assert_eq!(out.particles, 2 * out.splittings + 1);
                assert_eq!(out.exits(), out.splittings + 1);
                assert_eq!(out.consumed, out.particles + 2 * out.splittings);
                assert_eq!(out.consumed, 4 * out.splittings + 1);
                for &(x, y) in &geo.splits {
                    assert!(x > 0.0 && x < 1.0 && y > -0.5 && y < 0.5, "split at ({x}, {y})");
                }
                assert_eq!(geo.exits.len() as u64, out.exits());
                for &(x, y, side) in &geo.exits {
                    let on_side = match side {
                        Side::Right => (x - 1.0).abs() < 1e-12,
                        Side::Left => x.abs() < 1e-12,
                        Side::Top => (y - 0.5).abs() < 1e-12,
                        Side::Bottom => (y + 0.5).abs() < 1e-12,
                    };
                    assert!(on_side, "{side:?} exit at ({x}, {y})");
                }
            }
        }
    }

    #[test]
    fn caps_truncate() {
        let params = TransportParams::new(0.05).unwrap().with_caps(3, 1_000_000).unwrap();
        let mut tape = Tape::new(5);
        let out = simulate_tree(&params, &mut tape.cursor(1).unwrap()).unwrap();
        assert!(out.truncated);
        assert!(out.depth_reached <= 3);

        let params = TransportParams::new(0.05).unwrap().with_caps(64, 7).unwrap();
        let out = simulate_tree(&params, &mut tape.cursor(1).unwrap()).unwrap();
        assert!(out.truncated);
        assert!(out.particles <= 7);
    }

    #[test]
    fn memo_is_transparent_for_trees() {
        let params = TransportParams::new(0.94).unwrap();
        let mut on = Tape::new(8);
        let mut off = Tape::new(8).with_memo(false);
        for start in 1..=10_000 {
            let a = simulate_tree(&params, &mut on.cursor(start).unwrap()).unwrap();
            let b = simulate_tree(&params, &mut off.cursor(start).unwrap()).unwrap();
            assert_eq!(a, b);
        }
        assert!(on.stats().memo_hits > on.stats().memo_misses);
    }

    #[test]
    fn model_payoffs_and_small_runs() {
        let model = transport_model(TransportParams::new(0.98).unwrap());
        assert_eq!(model.payoff_names(), vec!["splittings", "right_exits"]);
        let mc = mc_estimate(&model, 20_000, &mut Tape::new(1)).unwrap();
        let sh = shift_estimate(&model, 20_000, &mut Tape::new(2)).unwrap();
        for name in ["splittings", "right_exits"] {
            let diff = (mc.mean(name).unwrap() - sh.mean(name).unwrap()).abs();
            let se = mc.stderr(name).unwrap().hypot(sh.stderr(name).unwrap());
            assert!(diff < 4.0 * se, "{name}: {diff} vs {se}");
        }
        assert!(sh.calls_per_sample() < mc.calls_per_sample() / 4.0);
    }
}
