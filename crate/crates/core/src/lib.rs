//! Collision-avoidance decision support for ships: geometry, ship dynamics,
//! COLREGs rules, scene depiction, a ReAct agent harness, a scenario
//! simulator and dataset generators.

pub mod agent;
pub mod colregs;
pub mod datasets;
pub mod depiction;
pub mod dynamics;
pub mod kinematics;
pub mod simulator;
pub mod zones;
