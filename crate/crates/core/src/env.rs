//! Deterministic 2D lunar-lander environment.
//!
//! The hull is a point mass with an orientation and two legs. Observations
//! are 8-vectors `[x, y, vx, vy, theta, omega, leg_left, leg_right]`,
//! normalized by [`EnvConfig`]'s scales. Actions: 0 noop, 1 left engine,
//! 2 main engine, 3 right engine.
//!
//! Per-frame reward is the change in a shaping potential minus engine cost,
//! plus a terminal bonus or penalty on the last frame.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const OBS_DIM: usize = 8;
pub const NUM_ACTIONS: usize = 4;

/// Mean 100-episode reward at which the task counts as solved.
pub const SOLVED_THRESHOLD: f64 = 200.0;

/// Observation components other than theta and the leg flags are clamped
/// to this magnitude.
pub const OBS_CLAMP: f64 = 2.0;

pub type Observation = [f64; OBS_DIM];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Noop = 0,
    LeftEngine = 1,
    MainEngine = 2,
    RightEngine = 3,
}

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] = [
        Action::Noop,
        Action::LeftEngine,
        Action::MainEngine,
        Action::RightEngine,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl TryFrom<usize> for Action {
    type Error = Error;

    fn try_from(value: usize) -> Result<Self> {
        Action::ALL
            .get(value)
            .copied()
            .ok_or_else(|| Error::Argument(format!("action {value} is not in 0..{NUM_ACTIONS}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Running,
    Landed,
    Crashed,
    OutOfBounds,
    Timeout,
}

impl Outcome {
    pub fn is_terminal(self) -> bool {
        self != Outcome::Running
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Running => "running",
            Outcome::Landed => "landed",
            Outcome::Crashed => "crashed",
            Outcome::OutOfBounds => "out_of_bounds",
            Outcome::Timeout => "timeout",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub dt: f64,
    pub gravity: f64,
    pub main_thrust: f64,
    pub side_angular_accel: f64,
    pub side_lateral_accel: f64,
    /// Leg attachment points in the body frame; the right leg mirrors `x`.
    pub leg_offset_x: f64,
    pub leg_offset_y: f64,
    /// Fraction of horizontal and angular velocity kept per frame while a
    /// leg rests on the ground.
    pub ground_friction: f64,
    /// Fraction of the hull angle kept per frame while a leg rests on the
    /// ground; below `settle_snap` the hull snaps upright.
    pub ground_settle: f64,
    pub settle_snap: f64,

    pub init_x_range: f64,
    pub init_y: f64,
    pub init_vx_range: f64,
    pub init_vy_min: f64,
    pub init_vy_max: f64,
    pub init_theta_range: f64,
    pub init_omega_range: f64,

    pub pad_half_width: f64,
    pub crash_speed: f64,
    pub crash_angle: f64,
    pub land_speed: f64,
    pub land_omega: f64,
    pub x_limit: f64,
    pub y_limit: f64,
    pub max_steps: usize,

    pub main_engine_cost: f64,
    pub side_engine_cost: f64,
    pub leg_contact_bonus: f64,
    pub crash_reward: f64,
    pub land_reward: f64,
    pub out_of_bounds_reward: f64,
    pub shaping_distance: f64,
    pub shaping_speed: f64,
    pub shaping_angle: f64,

    pub position_scale: f64,
    pub velocity_scale: f64,
    pub omega_scale: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            gravity: 10.0,
            main_thrust: 13.0,
            side_angular_accel: 0.4,
            side_lateral_accel: 0.6,
            leg_offset_x: 0.35,
            leg_offset_y: -0.25,
            ground_friction: 0.8,
            ground_settle: 0.8,
            settle_snap: 0.005,

            init_x_range: 0.2,
            init_y: 10.0,
            init_vx_range: 0.5,
            init_vy_min: -1.0,
            init_vy_max: 0.0,
            init_theta_range: 0.1,
            init_omega_range: 0.1,

            pad_half_width: 1.0,
            crash_speed: 2.0,
            crash_angle: 0.5,
            land_speed: 0.1,
            land_omega: 0.1,
            x_limit: 10.0,
            y_limit: 20.0,
            max_steps: 1000,

            main_engine_cost: 0.03,
            side_engine_cost: 0.003,
            leg_contact_bonus: 10.0,
            crash_reward: -100.0,
            land_reward: 100.0,
            out_of_bounds_reward: -100.0,
            shaping_distance: 1.0,
            shaping_speed: 10.0,
            shaping_angle: 100.0,

            position_scale: 10.0,
            velocity_scale: 5.0,
            omega_scale: 2.0,
        }
    }
}

impl EnvConfig {
    // Negated comparisons so that NaN fields are rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.dt > 0.0) {
            return fail("dt must be positive");
        }
        if !(self.main_thrust > self.gravity) {
            return fail("main thrust must exceed gravity");
        }
        if self.max_steps == 0 {
            return fail("max_steps must be at least 1");
        }
        if self.init_vy_min > self.init_vy_max {
            return fail("init_vy_min exceeds init_vy_max");
        }
        if !(self.init_y > 0.0) {
            return fail("initial height must be positive");
        }
        if !(self.position_scale > 0.0 && self.velocity_scale > 0.0 && self.omega_scale > 0.0) {
            return fail("observation scales must be positive");
        }
        if !(0.0..=1.0).contains(&self.ground_friction)
            || !(0.0..=1.0).contains(&self.ground_settle)
        {
            return fail("ground_friction and ground_settle must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub theta: f64,
    pub omega: f64,
    pub leg_left: bool,
    pub leg_right: bool,
    pub step_count: usize,
    pub prev_shaping: Option<f64>,
}

impl EnvState {
    /// World-frame heights of the (left, right) feet.
    pub fn foot_heights(&self, cfg: &EnvConfig) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        let drop = cfg.leg_offset_y * c;
        (
            self.y + (-cfg.leg_offset_x * s + drop),
            self.y + (cfg.leg_offset_x * s + drop),
        )
    }

    pub fn on_pad(&self, cfg: &EnvConfig) -> bool {
        self.x.abs() <= cfg.pad_half_width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub outcome: Outcome,
}

/// Potential used for reward shaping. Higher is better.
pub fn shaping(state: &EnvState, cfg: &EnvConfig) -> f64 {
    let legs = state.leg_left as u8 as f64 + state.leg_right as u8 as f64;
    -cfg.shaping_distance * state.x.hypot(state.y)
        - cfg.shaping_speed * state.vx.hypot(state.vy)
        - cfg.shaping_angle * state.theta.abs()
        + cfg.leg_contact_bonus * legs
}

pub fn is_solved(mean_reward_100: f64) -> bool {
    mean_reward_100 >= SOLVED_THRESHOLD
}

#[derive(Debug, Clone)]
pub struct LanderEnv {
    cfg: EnvConfig,
    state: EnvState,
    outcome: Outcome,
}

impl LanderEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let state = EnvState {
            x: 0.0,
            y: cfg.init_y,
            vx: 0.0,
            vy: 0.0,
            theta: 0.0,
            omega: 0.0,
            leg_left: false,
            leg_right: false,
            step_count: 0,
            prev_shaping: None,
        };
        let mut env = Self {
            cfg,
            state,
            outcome: Outcome::Running,
        };
        env.state.prev_shaping = Some(shaping(&env.state, &env.cfg));
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn outcome(&self) -> Outcome {
        self.outcome
    }

    pub fn is_done(&self) -> bool {
        self.outcome.is_terminal()
    }

    /// Start a new episode from an initial state drawn from `seed`.
    pub fn reset(&mut self, seed: u64) -> Observation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = &self.cfg;
        let mut sym = |r: f64| {
            if r > 0.0 {
                rng.random_range(-r..=r)
            } else {
                0.0
            }
        };
        let x = sym(cfg.init_x_range);
        let vx = sym(cfg.init_vx_range);
        let theta = sym(cfg.init_theta_range);
        let omega = sym(cfg.init_omega_range);
        let vy = if cfg.init_vy_max > cfg.init_vy_min {
            rng.random_range(cfg.init_vy_min..=cfg.init_vy_max)
        } else {
            cfg.init_vy_min
        };
        self.set_state(EnvState {
            x,
            y: cfg.init_y,
            vx,
            vy,
            theta,
            omega,
            leg_left: false,
            leg_right: false,
            step_count: 0,
            prev_shaping: None,
        })
    }

    /// Place the lander in an explicit airborne state and start an episode there.
    pub fn set_state(&mut self, mut state: EnvState) -> Observation {
        let (fl, fr) = state.foot_heights(&self.cfg);
        state.leg_left = fl <= 0.0;
        state.leg_right = fr <= 0.0;
        state.prev_shaping = Some(shaping(&state, &self.cfg));
        self.state = state;
        self.outcome = Outcome::Running;
        self.observation()
    }

    pub fn observation(&self) -> Observation {
        let s = &self.state;
        let c = &self.cfg;
        let clamp = |v: f64| v.clamp(-OBS_CLAMP, OBS_CLAMP);
        [
            clamp(s.x / c.position_scale),
            clamp(s.y / c.position_scale),
            clamp(s.vx / c.velocity_scale),
            clamp(s.vy / c.velocity_scale),
            s.theta,
            clamp(s.omega / c.omega_scale),
            s.leg_left as u8 as f64,
            s.leg_right as u8 as f64,
        ]
    }

    pub fn step(&mut self, action: Action) -> Result<StepResult> {
        if self.is_done() {
            return Err(Error::State(format!(
                "episode already ended ({}); call reset first",
                self.outcome.as_str()
            )));
        }
        let cfg = &self.cfg;
        let s = &mut self.state;

        let (sin, cos) = s.theta.sin_cos();
        let mut ax = 0.0;
        let mut ay = -cfg.gravity;
        let mut alpha = 0.0;
        let mut engine_cost = 0.0;
        match action {
            Action::Noop => {}
            Action::MainEngine => {
                ax -= sin * cfg.main_thrust;
                ay += cos * cfg.main_thrust;
                engine_cost = cfg.main_engine_cost;
            }
            Action::LeftEngine | Action::RightEngine => {
                // The left engine pushes the hull right and spins it clockwise.
                let side = if action == Action::LeftEngine {
                    1.0
                } else {
                    -1.0
                };
                ax += side * cos * cfg.side_lateral_accel;
                ay += side * sin * cfg.side_lateral_accel;
                alpha = -side * cfg.side_angular_accel;
                engine_cost = cfg.side_engine_cost;
            }
        }

        s.vx += ax * cfg.dt;
        s.vy += ay * cfg.dt;
        s.omega += alpha * cfg.dt;
        s.x += s.vx * cfg.dt;
        s.y += s.vy * cfg.dt;
        s.theta += s.omega * cfg.dt;
        s.step_count += 1;

        let mut outcome = Outcome::Running;
        let (fl, fr) = s.foot_heights(cfg);
        if s.y <= 0.0 {
            outcome = Outcome::Crashed;
        } else if fl <= 0.0 || fr <= 0.0 {
            if s.vy.abs() > cfg.crash_speed || s.theta.abs() > cfg.crash_angle {
                outcome = Outcome::Crashed;
            } else {
                s.vy = s.vy.max(0.0);
                s.vx *= cfg.ground_friction;
                s.omega *= cfg.ground_friction;
                s.theta *= cfg.ground_settle;
                if s.theta.abs() < cfg.settle_snap {
                    s.theta = 0.0;
                }
                // Rest the lowest foot exactly on the ground.
                let (sin, cos) = s.theta.sin_cos();
                let lowest = cfg.leg_offset_y * cos - (cfg.leg_offset_x * sin).abs();
                s.y = -lowest;
            }
        }
        let (fl, fr) = s.foot_heights(cfg);
        s.leg_left = fl <= 0.0;
        s.leg_right = fr <= 0.0;

        if outcome == Outcome::Running {
            if s.x.abs() > cfg.x_limit || s.y > cfg.y_limit {
                outcome = Outcome::OutOfBounds;
            } else if s.leg_left
                && s.leg_right
                && s.vx.abs() < cfg.land_speed
                && s.vy.abs() < cfg.land_speed
                && s.omega.abs() < cfg.land_omega
            {
                outcome = Outcome::Landed;
            } else if s.step_count >= cfg.max_steps {
                outcome = Outcome::Timeout;
            }
        }

        let potential = shaping(s, cfg);
        let prev = s.prev_shaping.unwrap_or(potential);
        s.prev_shaping = Some(potential);
        let terminal = match outcome {
            Outcome::Landed => cfg.land_reward,
            Outcome::Crashed => cfg.crash_reward,
            Outcome::OutOfBounds => cfg.out_of_bounds_reward,
            Outcome::Running | Outcome::Timeout => 0.0,
        };
        let reward = potential - prev - engine_cost + terminal;

        self.outcome = outcome;
        Ok(StepResult {
            observation: self.observation(),
            reward,
            done: outcome.is_terminal(),
            outcome,
        })
    }
}

/// One row of a debug trajectory dump.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub step: usize,
    pub state: EnvState,
    pub action: usize,
    pub reward: f64,
    pub done: bool,
}

pub const TRAJECTORY_HEADER: &str = "step,x,y,vx,vy,theta,omega,legL,legR,action,reward,done";

pub fn write_trajectory_csv<W: std::io::Write>(mut out: W, rows: &[TrajectoryRow]) -> Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for r in rows {
        let s = &r.state;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.step,
            s.x,
            s.y,
            s.vx,
            s.vy,
            s.theta,
            s.omega,
            s.leg_left as u8,
            s.leg_right as u8,
            r.action,
            r.reward,
            r.done as u8
        )?;
    }
    Ok(())
}
