//! Environments: the Four Rooms gridworld, a seeded random MDP generator,
//! and an episodic simulator over any [`TabularMdp`].

mod four_rooms;
mod random;
mod sim;

pub use four_rooms::{Action, Cell, FourRooms, DOORWAYS, GAMMA, GOAL, GRID_SIZE, START, WALL_INDEX};
pub use random::{random_mdp, random_mdp_with_gamma};
pub use sim::{rollout, EpisodeSimulator, Rollout, StepOutcome, DEFAULT_HORIZON};
pub(crate) use sim::sample_index as sim_sample;
