//! The multi-drawing urn: draw `m` balls without replacement, look at the
//! number `xi` of white ones, then add balls according to the model variant.
//!
//! * Opposite reinforcement with independent laws: `W += X (m - xi)`,
//!   `B += Y xi`.
//! * Equal addition with a step-indexed law: `W += X xi`, `B += X (m - xi)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::{hypergeometric_sample, AdditionLaw, DistributionError, LawSchedule};
use crate::rng::RandomStream;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UrnError {
    #[error("invalid urn configuration: {0}")]
    InvalidConfig(String),
    #[error("step {step}: cannot draw {draw} balls from an urn of {total}")]
    DrawImpossible { step: u64, draw: u64, total: u64 },
    #[error("step {step}: ball counter overflowed 64 bits")]
    Overflow { step: u64 },
    #[error("step {step}: {source}")]
    Law {
        step: u64,
        #[source]
        source: DistributionError,
    },
}

/// How balls are added after each draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Variant {
    /// i.i.d. `X` and `Y`; white drawn balls trigger black additions and
    /// vice versa.
    Opposite {
        law_x: AdditionLaw,
        law_y: AdditionLaw,
    },
    /// A single `X_n` per step, drawn from `schedule.law_at_step(n)`, scales
    /// both colors.
    EqualAddition { schedule: LawSchedule },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrnConfig {
    pub draw_size: u64,
    pub initial_white: u64,
    pub initial_black: u64,
    pub variant: Variant,
    pub horizon: u64,
}

impl UrnConfig {
    pub fn new(
        draw_size: u64,
        initial_white: u64,
        initial_black: u64,
        variant: Variant,
        horizon: u64,
    ) -> Result<Self, UrnError> {
        let config = Self {
            draw_size,
            initial_white,
            initial_black,
            variant,
            horizon,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), UrnError> {
        if self.draw_size == 0 {
            return Err(UrnError::InvalidConfig(
                "draw_size must be at least 1".into(),
            ));
        }
        let total = self
            .initial_white
            .checked_add(self.initial_black)
            .ok_or_else(|| UrnError::InvalidConfig("initial total overflows".into()))?;
        if total < self.draw_size {
            return Err(UrnError::InvalidConfig(format!(
                "initial total {total} is smaller than draw_size {}; the first draw is impossible",
                self.draw_size
            )));
        }
        if self.horizon == 0 {
            return Err(UrnError::InvalidConfig("horizon must be at least 1".into()));
        }
        if let Variant::EqualAddition { schedule } = &self.variant {
            schedule
                .validate()
                .map_err(|e| UrnError::InvalidConfig(e.to_string()))?;
        }
        Ok(())
    }

    pub fn initial_state(&self) -> UrnState {
        UrnState {
            step: 0,
            white: self.initial_white,
            black: self.initial_black,
        }
    }

    pub fn initial_total(&self) -> u64 {
        self.initial_white + self.initial_black
    }

    /// `min(L_X, L_Y)` for the opposite variant; `None` otherwise.
    pub fn growth_floor(&self) -> Option<u64> {
        match &self.variant {
            Variant::Opposite { law_x, law_y } => {
                Some(law_x.lower_bound().min(law_y.lower_bound()))
            }
            Variant::EqualAddition { .. } => None,
        }
    }
}

/// Urn composition after `step` draws. The proportion is derived on read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UrnState {
    pub step: u64,
    pub white: u64,
    pub black: u64,
}

impl UrnState {
    pub fn total(&self) -> u64 {
        self.white + self.black
    }

    pub fn proportion(&self) -> f64 {
        self.white as f64 / self.total() as f64
    }
}

/// The random inputs consumed by one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepDraw {
    /// White balls among the drawn ones.
    pub xi: u64,
    pub x: u64,
    /// Equals `x` in the equal-addition variant.
    pub y: u64,
}

/// Advance the urn by one draw.
pub fn step(
    state: &UrnState,
    config: &UrnConfig,
    stream: &mut RandomStream,
) -> Result<(UrnState, StepDraw), UrnError> {
    let next_step = state.step + 1;
    let m = config.draw_size;
    let total = state.total();
    if total < m {
        return Err(UrnError::DrawImpossible {
            step: next_step,
            draw: m,
            total,
        });
    }
    let xi =
        hypergeometric_sample(state.white, total, m, stream).map_err(|source| UrnError::Law {
            step: next_step,
            source,
        })?;
    let overflow = || UrnError::Overflow { step: next_step };
    let (white_add, black_add, draw) = match &config.variant {
        Variant::Opposite { law_x, law_y } => {
            let x = law_x.sample(stream);
            let y = law_y.sample(stream);
            (
                x.checked_mul(m - xi).ok_or_else(overflow)?,
                y.checked_mul(xi).ok_or_else(overflow)?,
                StepDraw { xi, x, y },
            )
        }
        Variant::EqualAddition { schedule } => {
            let law = schedule
                .law_at_step(next_step)
                .map_err(|source| UrnError::Law {
                    step: next_step,
                    source,
                })?;
            let x = law.sample(stream);
            (
                x.checked_mul(xi).ok_or_else(overflow)?,
                x.checked_mul(m - xi).ok_or_else(overflow)?,
                StepDraw { xi, x, y: x },
            )
        }
    };
    let white = state.white.checked_add(white_add).ok_or_else(overflow)?;
    let black = state.black.checked_add(black_add).ok_or_else(overflow)?;
    white.checked_add(black).ok_or_else(overflow)?;
    Ok((
        UrnState {
            step: next_step,
            white,
            black,
        },
        draw,
    ))
}

/// Steps at which a trajectory is recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckpointGrid {
    /// `0`, `ceil(ratio^k)` for k = 0, 1, ... and every power of ten; the
    /// final step is always included.
    Geometric { ratio: f64 },
    /// Every `every` steps, plus `0` and the final step.
    Linear { every: u64 },
    /// Explicit list; clipped to the horizon, with `0` and the final step
    /// added.
    Explicit { steps: Vec<u64> },
}

impl Default for CheckpointGrid {
    fn default() -> Self {
        CheckpointGrid::Geometric { ratio: 1.2 }
    }
}

impl CheckpointGrid {
    pub fn validate(&self) -> Result<(), UrnError> {
        match self {
            CheckpointGrid::Geometric { ratio } if !(*ratio > 1.0 && ratio.is_finite()) => {
                Err(UrnError::InvalidConfig(format!(
                    "geometric checkpoint ratio {ratio} must exceed 1"
                )))
            }
            CheckpointGrid::Linear { every: 0 } => Err(UrnError::InvalidConfig(
                "linear checkpoint spacing must be positive".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Strictly increasing checkpoint steps in `0..=horizon`.
    pub fn points(&self, horizon: u64) -> Vec<u64> {
        let mut out = vec![0u64];
        match self {
            CheckpointGrid::Geometric { ratio } => {
                let mut x = 1.0f64;
                loop {
                    let n = x.ceil() as u64;
                    if n > horizon {
                        break;
                    }
                    out.push(n);
                    x *= ratio;
                }
                let mut decade = 10u64;
                while decade <= horizon {
                    out.push(decade);
                    decade = match decade.checked_mul(10) {
                        Some(d) => d,
                        None => break,
                    };
                }
            }
            CheckpointGrid::Linear { every } => {
                let mut n = *every;
                while n <= horizon {
                    out.push(n);
                    n += every;
                }
            }
            CheckpointGrid::Explicit { steps } => {
                out.extend(steps.iter().copied().filter(|&n| n <= horizon));
            }
        }
        out.push(horizon);
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Per-step inputs `xi_k, X_k, Y_k` for `k = 1..=N` (index `k - 1`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DrawLog {
    pub xi: Vec<u64>,
    pub x: Vec<u64>,
    pub y: Vec<u64>,
}

impl DrawLog {
    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    fn push(&mut self, d: StepDraw) {
        self.xi.push(d.xi);
        self.x.push(d.x);
        self.y.push(d.y);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub initial: UrnState,
    /// States at the checkpoint steps, increasing.
    pub checkpoints: Vec<UrnState>,
    pub final_state: UrnState,
    pub draws: Option<DrawLog>,
}

/// Run `config.horizon` steps.
pub fn run_trajectory(
    config: &UrnConfig,
    stream: &mut RandomStream,
    grid: &CheckpointGrid,
    log_draws: bool,
) -> Result<TrajectoryRecord, UrnError> {
    run_steps(config, stream, grid, config.horizon, log_draws)
}

/// Run an explicit number of steps (zero allowed).
pub fn run_steps(
    config: &UrnConfig,
    stream: &mut RandomStream,
    grid: &CheckpointGrid,
    steps: u64,
    log_draws: bool,
) -> Result<TrajectoryRecord, UrnError> {
    grid.validate()?;
    let points = grid.points(steps);
    let initial = config.initial_state();
    let mut state = initial;
    let mut checkpoints = Vec::with_capacity(points.len());
    let mut next = points.iter().copied().peekable();
    let mut draws = log_draws.then(|| DrawLog {
        xi: Vec::with_capacity(steps as usize),
        x: Vec::with_capacity(steps as usize),
        y: Vec::with_capacity(steps as usize),
    });
    if next.peek() == Some(&0) {
        checkpoints.push(state);
        next.next();
    }
    for _ in 0..steps {
        let (s, d) = step(&state, config, stream)?;
        state = s;
        if let Some(log) = draws.as_mut() {
            log.push(d);
        }
        if next.peek() == Some(&state.step) {
            checkpoints.push(state);
            next.next();
        }
    }
    Ok(TrajectoryRecord {
        initial,
        checkpoints,
        final_state: state,
        draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opposite(x: AdditionLaw, y: AdditionLaw, m: u64, w: u64, b: u64, n: u64) -> UrnConfig {
        UrnConfig::new(m, w, b, Variant::Opposite { law_x: x, law_y: y }, n).unwrap()
    }

    #[test]
    fn config_rejects_impossible_first_draw() {
        let v = Variant::Opposite {
            law_x: AdditionLaw::constant(1),
            law_y: AdditionLaw::constant(1),
        };
        assert!(matches!(
            UrnConfig::new(3, 1, 1, v.clone(), 5),
            Err(UrnError::InvalidConfig(_))
        ));
        assert!(matches!(
            UrnConfig::new(0, 1, 1, v.clone(), 5),
            Err(UrnError::InvalidConfig(_))
        ));
        assert!(matches!(
            UrnConfig::new(1, 1, 1, v, 0),
            Err(UrnError::InvalidConfig(_))
        ));
    }

    #[test]
    fn forced_arithmetic_step() {
        // X = Y = 1, m = 2, (2,2): xi = 1 gives (3,3); xi in {0,2} gives (4,2)/(2,4)
        let c = opposite(
            AdditionLaw::constant(1),
            AdditionLaw::constant(1),
            2,
            2,
            2,
            1,
        );
        let mut s = RandomStream::from_seed(5);
        let mut saw_one = false;
        for _ in 0..200 {
            let (next, d) = step(&c.initial_state(), &c, &mut s).unwrap();
            match d.xi {
                1 => {
                    assert_eq!((next.white, next.black), (3, 3));
                    saw_one = true;
                }
                0 => assert_eq!((next.white, next.black), (4, 2)),
                2 => assert_eq!((next.white, next.black), (2, 4)),
                _ => unreachable!(),
            }
        }
        assert!(saw_one);
    }

    #[test]
    fn all_white_draw_adds_only_black() {
        let c = opposite(
            AdditionLaw::uniform(1, 3).unwrap(),
            AdditionLaw::uniform(2, 6).unwrap(),
            3,
            5,
            0,
            1,
        );
        let mut s = RandomStream::from_seed(9);
        for _ in 0..100 {
            let (next, d) = step(&c.initial_state(), &c, &mut s).unwrap();
            assert_eq!(d.xi, 3);
            assert_eq!(next.white, 5);
            assert_eq!(next.black, 3 * d.y);
        }
    }

    #[test]
    fn zero_horizon_has_only_initial_state() {
        let c = opposite(
            AdditionLaw::constant(1),
            AdditionLaw::constant(1),
            1,
            1,
            1,
            10,
        );
        let rec = run_steps(
            &c,
            &mut RandomStream::from_seed(1),
            &CheckpointGrid::default(),
            0,
            true,
        )
        .unwrap();
        assert_eq!(rec.checkpoints, vec![c.initial_state()]);
        assert_eq!(rec.final_state, c.initial_state());
        assert!(rec.draws.unwrap().is_empty());
    }

    #[test]
    fn unit_additions_grow_by_one_per_step() {
        let c = opposite(
            AdditionLaw::constant(1),
            AdditionLaw::constant(1),
            1,
            3,
            4,
            500,
        );
        let rec = run_trajectory(
            &c,
            &mut RandomStream::from_seed(2),
            &CheckpointGrid::default(),
            false,
        )
        .unwrap();
        assert_eq!(rec.final_state.total(), 7 + 500);
        for s in &rec.checkpoints {
            assert_eq!(s.total(), 7 + s.step);
        }
    }

    #[test]
    fn recursion_identity_with_draw_log() {
        let c = opposite(
            AdditionLaw::uniform(1, 3).unwrap(),
            AdditionLaw::uniform(2, 6).unwrap(),
            2,
            5,
            5,
            2000,
        );
        let rec = run_trajectory(
            &c,
            &mut RandomStream::from_seed(4),
            &CheckpointGrid::default(),
            true,
        )
        .unwrap();
        let log = rec.draws.as_ref().unwrap();
        let added: u64 = (0..log.len())
            .map(|i| log.x[i] * (2 - log.xi[i]) + log.xi[i] * log.y[i])
            .sum();
        assert_eq!(rec.final_state.total() - c.initial_total(), added);
        // growth floor with L = 1
        for s in &rec.checkpoints {
            assert!(s.total() >= c.initial_total() + s.step * 2);
        }
    }

    #[test]
    fn equal_addition_total_is_m_times_sum() {
        let c = UrnConfig::new(
            2,
            5,
            5,
            Variant::EqualAddition {
                schedule: LawSchedule::Binomial { p: 0.5 },
            },
            300,
        )
        .unwrap();
        let rec = run_trajectory(
            &c,
            &mut RandomStream::from_seed(8),
            &CheckpointGrid::default(),
            true,
        )
        .unwrap();
        let log = rec.draws.unwrap();
        assert_eq!(log.x, log.y);
        let sum: u64 = log.x.iter().sum();
        assert_eq!(rec.final_state.total() - 10, 2 * sum);
    }

    #[test]
    fn overflow_is_reported() {
        let c = opposite(
            AdditionLaw::constant(u64::MAX / 2),
            AdditionLaw::constant(u64::MAX / 2),
            1,
            1,
            1,
            10,
        );
        let err = run_trajectory(
            &c,
            &mut RandomStream::from_seed(1),
            &CheckpointGrid::default(),
            false,
        )
        .unwrap_err();
        assert!(matches!(err, UrnError::Overflow { step } if step <= 3));
    }

    #[test]
    fn grid_points() {
        assert_eq!(
            CheckpointGrid::Linear { every: 3 }.points(10),
            vec![0, 3, 6, 9, 10]
        );
        let g = CheckpointGrid::Geometric { ratio: 1.2 }.points(100);
        assert_eq!(g[..4], [0, 1, 2, 3]);
        assert_eq!(*g.last().unwrap(), 100);
        assert!(g.contains(&10));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(
            CheckpointGrid::Explicit {
                steps: vec![50, 5, 500]
            }
            .points(100),
            vec![0, 5, 50, 100]
        );
        assert!(CheckpointGrid::Geometric { ratio: 1.0 }.validate().is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let c = opposite(
            AdditionLaw::uniform(1, 3).unwrap(),
            AdditionLaw::uniform(2, 6).unwrap(),
            2,
            5,
            5,
            1000,
        );
        let a = run_trajectory(
            &c,
            &mut RandomStream::substream(1, 7),
            &CheckpointGrid::default(),
            true,
        )
        .unwrap();
        let b = run_trajectory(
            &c,
            &mut RandomStream::substream(1, 7),
            &CheckpointGrid::default(),
            true,
        )
        .unwrap();
        assert_eq!(a, b);
    }
}
