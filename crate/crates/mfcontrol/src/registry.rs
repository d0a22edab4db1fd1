//! Built-in models addressable by string name.
//!
//! Three models ship with the crate:
//!
//! - `"paper-example"`: the control-free drift `x' = x + E[X]` whose team
//!   value from an all-ones start is the geometric series `sum (2 beta)^t`:
//!   exactly `2` at `beta = 0.25`, divergent once `beta >= 0.5`. State
//!   bounds are `[0, 2^42]` so a 40-step horizon never touches the clamp
//!   and every trajectory value is a power of two, exact in `f64`.
//! - `"crowd-1d"`: a smooth 1-D congestion toy. Agents drift toward the
//!   population mean, steer with a bounded control, and pay a quadratic
//!   tracking-plus-effort cost that couples to the mean, so feedback
//!   quality genuinely matters. Both noises have small finite supports,
//!   keeping every kernel exact.
//! - `"switch-2state"`: a two-point lattice `{0, 1}` with flip actions and
//!   a 20% idiosyncratic flip, small enough for brute-force oracles. Its
//!   declared Lipschitz constants describe the dynamics on the lattice the
//!   model actually visits; the threshold form used off-lattice is only a
//!   tie-breaking convention.

use crate::grid::{ActionGrid, BoxBounds, StateGrid};
use crate::model::{AgentModel, Noise};
use crate::Result;

/// Upper state bound of `"paper-example"`: 2^42.
pub const PAPER_EXAMPLE_HI: f64 = 4_398_046_511_104.0;

const NAMES: [&str; 3] = ["paper-example", "crowd-1d", "switch-2state"];

/// Names accepted by [`build`], [`default_grid`] and [`default_actions`].
pub fn names() -> &'static [&'static str] {
    &NAMES
}

/// Builds a named model, optionally overriding its discount factor.
pub fn build(name: &str, beta_override: Option<f64>) -> Result<AgentModel> {
    let model = match name {
        "paper-example" => paper_example()?,
        "crowd-1d" => crowd_1d()?,
        "switch-2state" => switch_2state()?,
        other => return Err(crate::Error::UnknownModel(other.to_string())),
    };
    match beta_override {
        Some(beta) => model.with_beta(beta),
        None => Ok(model),
    }
}

/// Default state grid for a named model, optionally overriding the cell
/// count per dimension.
pub fn default_grid(name: &str, cells: Option<usize>) -> Result<StateGrid> {
    match name {
        "paper-example" => StateGrid::uniform(
            BoxBounds::interval(0.0, PAPER_EXAMPLE_HI)?,
            &[cells.unwrap_or(2)],
        ),
        "crowd-1d" => StateGrid::uniform(BoxBounds::interval(-1.0, 1.0)?, &[cells.unwrap_or(8)]),
        "switch-2state" => match cells {
            // default: two cells represented by the lattice points themselves
            None | Some(2) => StateGrid::from_edges(vec![vec![0.0, 0.5, 1.0]])?
                .with_representatives(vec![vec![0.0], vec![1.0]]),
            Some(m) => StateGrid::uniform(BoxBounds::interval(0.0, 1.0)?, &[m]),
        },
        other => Err(crate::Error::UnknownModel(other.to_string())),
    }
}

/// Default action grid for a named model.
pub fn default_actions(name: &str) -> Result<ActionGrid> {
    match name {
        "paper-example" => {
            // control-free: the action box is the single point 0
            ActionGrid::new(vec![vec![0.0]], BoxBounds::interval(0.0, 0.0)?)
        }
        "crowd-1d" => ActionGrid::new(
            vec![vec![-1.0], vec![0.0], vec![1.0]],
            BoxBounds::interval(-1.0, 1.0)?,
        ),
        "switch-2state" => {
            ActionGrid::new(vec![vec![0.0], vec![1.0]], BoxBounds::interval(0.0, 1.0)?)
        }
        other => Err(crate::Error::UnknownModel(other.to_string())),
    }
}

fn paper_example() -> Result<AgentModel> {
    let hi = PAPER_EXAMPLE_HI;
    AgentModel::builder()
        .name("paper-example")
        .state_bounds(BoxBounds::interval(0.0, hi)?)
        .action_bounds(BoxBounds::interval(0.0, 0.0)?)
        .dynamics(move |x, _u, mf, _w, _w0| vec![(x[0] + mf.mean(0)).clamp(0.0, hi)])
        .stage_cost(|_x, _u, mf| mf.mean(0))
        .idio_noise(Noise::none())
        .common_noise(Noise::none())
        .lipschitz(1.0, 1.0)
        .beta(0.25)
        .build()
}

fn crowd_1d() -> Result<AgentModel> {
    AgentModel::builder()
        .name("crowd-1d")
        .state_bounds(BoxBounds::interval(-1.0, 1.0)?)
        .action_bounds(BoxBounds::interval(-1.0, 1.0)?)
        .dynamics(|x, u, mf, w, w0| {
            let drift = x[0] + 0.35 * (mf.mean(0) - x[0]) + 0.3 * u[0];
            vec![(drift + w + w0).clamp(-1.0, 1.0)]
        })
        .stage_cost(|x, u, mf| {
            let gap = x[0] - 0.3 * mf.mean(0);
            gap * gap + 0.1 * u[0] * u[0]
        })
        .idio_noise(Noise::atoms(vec![(-0.05, 0.25), (0.0, 0.5), (0.05, 0.25)])?)
        .common_noise(Noise::atoms(vec![(-0.02, 0.5), (0.02, 0.5)])?)
        .lipschitz(0.9, 3.0)
        .beta(0.5)
        .build()
}

fn switch_2state() -> Result<AgentModel> {
    AgentModel::builder()
        .name("switch-2state")
        .state_bounds(BoxBounds::interval(0.0, 1.0)?)
        .action_bounds(BoxBounds::interval(0.0, 1.0)?)
        .dynamics(|x, u, _mf, w, _w0| {
            let on = x[0] >= 0.5;
            let flipped = if u[0] >= 0.5 { !on } else { on };
            let out = if w >= 0.5 { !flipped } else { flipped };
            vec![if out { 1.0 } else { 0.0 }]
        })
        .stage_cost(|x, u, mf| {
            let gap = x[0] - mf.mean(0);
            gap * gap + 0.3 * u[0]
        })
        .idio_noise(Noise::atoms(vec![(0.0, 0.8), (1.0, 0.2)])?)
        .common_noise(Noise::none())
        .lipschitz(1.0, 2.0)
        .beta(0.4)
        .build()
}
