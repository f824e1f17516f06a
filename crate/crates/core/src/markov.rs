//! Chains `X_{n+1} = F(X_n, n, U_{n+1})` run until they hit a target set,
//! packaged as consumption models.

use std::sync::Arc;

use thiserror::Error;

use crate::estimators::{ConsumptionModel, Evaluation, ModelError};
use crate::tape::{TapeCursor, TransformId};

pub const DEFAULT_CAP: u64 = 10_000_000;

/// Transform id used by the gambler's-ruin fixture to cache the step sign.
pub const RUIN_STEP_TRANSFORM: TransformId = TransformId::constant(3);

pub type Transition = Arc<dyn Fn(&[f64], u64, f64, &mut [f64]) + Send + Sync>;
pub type StatePredicate = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;
pub type Payoff = Arc<dyn Fn(&[f64], u64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainParamError {
    #[error("need N >= 2 states above zero (got {0})")]
    TooFewStates(u64),
    #[error("start {start} must lie in 1..{n}")]
    Start { start: u64, n: u64 },
    #[error("p_up must lie strictly between 0 and 1 (got {0})")]
    Probability(f64),
    #[error("cap must be at least 1")]
    Cap,
}

/// A memoizable per-cell transform: `(id, g)` where the transition consumes
/// `g(u)` instead of `u`.
#[derive(Clone, Copy)]
pub struct MemoTransform {
    pub id: TransformId,
    pub map: fn(f64) -> f64,
}

#[derive(Clone)]
pub struct ChainModel {
    pub initial_state: Vec<f64>,
    /// `transition(x, n, v, out)` writes `X_{n+1}` into `out`, where `v` is
    /// the raw uniform or its memo transform.
    pub transition: Transition,
    pub memo: Option<MemoTransform>,
}

#[derive(Clone)]
pub struct HittingSpec {
    /// Membership in the target set `A`.
    pub target: StatePredicate,
    /// Named payoffs `G(X_T, T)`, all evaluated on the same path.
    pub payoffs: Vec<(String, Payoff)>,
    pub cap: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainOutcome {
    pub payoffs: Vec<f64>,
    pub steps: u64,
    pub consumed: u64,
    pub censored: bool,
    pub final_state: Vec<f64>,
}

/// Iterates the chain one cell per step until the first `n > 0` with
/// `X_n ∈ A`, or until `cap` steps (censored).
pub fn run_chain(
    model: &ChainModel,
    spec: &HittingSpec,
    cursor: &mut TapeCursor<'_>,
) -> Result<ChainOutcome, ModelError> {
    let mut state = model.initial_state.clone();
    let mut next = vec![0.0; state.len()];
    let first = cursor.consumed();
    let mut steps = 0;
    let mut hit = false;
    while steps < spec.cap {
        let v = match model.memo {
            Some(m) => cursor.next_transformed(m.id, m.map)?,
            None => cursor.next_uniform()?,
        };
        (model.transition)(&state, steps, v, &mut next);
        steps += 1;
        std::mem::swap(&mut state, &mut next);
        if state.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFinite { step: steps, state });
        }
        if (spec.target)(&state) {
            hit = true;
            break;
        }
    }
    Ok(ChainOutcome {
        payoffs: spec.payoffs.iter().map(|(_, g)| g(&state, steps)).collect(),
        steps,
        consumed: cursor.consumed() - first,
        censored: !hit,
        final_state: state,
    })
}

/// A chain plus hitting rule viewed as a consumption model.
#[derive(Clone)]
pub struct ChainConsumption {
    pub model: ChainModel,
    pub spec: HittingSpec,
}

impl ChainConsumption {
    pub fn new(model: ChainModel, spec: HittingSpec) -> Self {
        Self { model, spec }
    }
}

impl ConsumptionModel for ChainConsumption {
    fn payoff_names(&self) -> Vec<String> {
        self.spec.payoffs.iter().map(|(n, _)| n.clone()).collect()
    }

    fn evaluate(&self, cursor: &mut TapeCursor<'_>, payoff: &mut [f64]) -> Result<Evaluation, ModelError> {
        let out = run_chain(&self.model, &self.spec, cursor)?;
        payoff.copy_from_slice(&out.payoffs);
        Ok(Evaluation {
            truncated: out.censored,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuinPayoff {
    /// `G(x, T) = T`.
    Duration,
    /// `G(x, T) = 1{x = N}`.
    HitTop,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RuinParams {
    pub n_states: u64,
    pub start: u64,
    pub p_up: f64,
    pub cap: u64,
    /// Cache the ±1 step in the cell instead of comparing `u < p_up` each time.
    pub memoize_step: bool,
}

impl RuinParams {
    pub fn new(n_states: u64, start: u64, p_up: f64) -> Self {
        Self {
            n_states,
            start,
            p_up,
            cap: DEFAULT_CAP,
            memoize_step: false,
        }
    }
}

/// Simple random walk on `{0..N}` absorbed at both ends.
pub fn gamblers_ruin(
    params: RuinParams,
    payoff: RuinPayoff,
) -> Result<(ChainModel, HittingSpec), ChainParamError> {
    let RuinParams {
        n_states,
        start,
        p_up,
        cap,
        memoize_step,
    } = params;
    if n_states < 2 {
        return Err(ChainParamError::TooFewStates(n_states));
    }
    if start == 0 || start >= n_states {
        return Err(ChainParamError::Start {
            start,
            n: n_states,
        });
    }
    if !(p_up > 0.0 && p_up < 1.0) {
        return Err(ChainParamError::Probability(p_up));
    }
    if cap == 0 {
        return Err(ChainParamError::Cap);
    }

    let (transition, memo): (Transition, Option<MemoTransform>) = if memoize_step {
        // the cached sign depends on p_up, so the fixture only memoizes the
        // symmetric walk, where the map is a plain fn
        if p_up != 0.5 {
            (raw_ruin_transition(p_up), None)
        } else {
            (
                Arc::new(|x: &[f64], _n, step: f64, out: &mut [f64]| out[0] = x[0] + step),
                Some(MemoTransform {
                    id: RUIN_STEP_TRANSFORM,
                    map: symmetric_step,
                }),
            )
        }
    } else {
        (raw_ruin_transition(p_up), None)
    };

    let top = n_states as f64;
    let mut payoffs: Vec<(String, Payoff)> = Vec::new();
    if matches!(payoff, RuinPayoff::Duration | RuinPayoff::Both) {
        payoffs.push(("duration".into(), Arc::new(|_, t| t as f64)));
    }
    if matches!(payoff, RuinPayoff::HitTop | RuinPayoff::Both) {
        payoffs.push((
            "hit_top".into(),
            Arc::new(move |x: &[f64], _| if x[0] == top { 1.0 } else { 0.0 }),
        ));
    }
    Ok((
        ChainModel {
            initial_state: vec![start as f64],
            transition,
            memo,
        },
        HittingSpec {
            target: Arc::new(move |x: &[f64]| x[0] == 0.0 || x[0] == top),
            payoffs,
            cap,
        },
    ))
}

fn raw_ruin_transition(p_up: f64) -> Transition {
    Arc::new(move |x: &[f64], _n, u: f64, out: &mut [f64]| {
        out[0] = x[0] + if u < p_up { 1.0 } else { -1.0 }
    })
}

fn symmetric_step(u: f64) -> f64 {
    if u < 0.5 {
        1.0
    } else {
        -1.0
    }
}

/// Expected absorption time `E_i[T]` of the walk, from the linear recurrence
/// `E_i = 1 + p E_{i+1} + q E_{i-1}`, `E_0 = E_N = 0`.
pub fn ruin_expected_duration(n_states: u64, start: u64, p_up: f64) -> f64 {
    let (n, i) = (n_states as f64, start as f64);
    if p_up == 0.5 {
        return i * (n - i);
    }
    let r = (1.0 - p_up) / p_up;
    i / (1.0 - 2.0 * p_up) - n / (1.0 - 2.0 * p_up) * (1.0 - r.powf(i)) / (1.0 - r.powf(n))
}

/// Probability of absorption at `N` starting from `start`.
pub fn ruin_hit_top_probability(n_states: u64, start: u64, p_up: f64) -> f64 {
    let (n, i) = (n_states as f64, start as f64);
    if p_up == 0.5 {
        return i / n;
    }
    let r = (1.0 - p_up) / p_up;
    (1.0 - r.powf(i)) / (1.0 - r.powf(n))
}
