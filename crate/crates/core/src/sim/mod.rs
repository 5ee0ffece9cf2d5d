//! Procedural worlds, vehicle dynamics, collision checks and episode rollout.

pub mod dynamics;
pub mod episode;
pub mod gen;
pub mod poisson;
pub mod world;
pub mod worldfile;

pub use dynamics::{step_dynamics, Action, DynamicsParams, PartialState, RobotState, StateCovariance};
pub use episode::{rollout_episode, CollisionEpisode, EpisodeConfig, EpisodeStep};
pub use gen::{generate_world, Environment, WorldGenParams};
pub use poisson::poisson_disc_sample;
pub use world::{Bounds, Obstacle, Rect, Shape, World};
