//! Constraint-based rigid-body simulation.
//!
//! Everything the tracker asks of the physics (joints, angular limits,
//! boundary planes, inter-bone contact, data attachments) is lowered to
//! scalar [`ConstraintRow`]s and resolved by a sequential-impulse solver.

mod body;
mod constraint;
mod solver;

pub use body::{BodySet, RigidBody, SolverBody};
pub use constraint::{
    limit_violation, lower_constraints, measure_joint_angles, Constraint, ConstraintRow, JointAngles,
    JointLimits, RowKind,
};
pub use solver::{close_joint_tree, integrate, project_joints, relative_velocity, solve, StepStats};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DynamicsError {
    #[error("constraint references unknown body {0}")]
    UnknownBody(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Time step, seconds.
    pub dt: f64,
    /// Gauss-Seidel sweeps per step.
    pub iterations: usize,
    /// Baumgarte factor: fraction of positional error fed back per step.
    pub beta: f64,
    /// Fraction of velocity removed after each step.
    pub damping: f64,
    /// Fraction of a surface attachment's gap closed per step.
    pub fit_gain: f64,
    /// Fraction of a pose nudge's orientation error closed per step.
    pub nudge_gain: f64,
    /// Contacts within this distance (m) get speculative rows.
    pub speculative_margin: f64,
    /// Angular limits within this angle (rad) get speculative rows.
    pub angular_margin: f64,
    /// Position-level passes over ball joints after integration.
    pub position_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1.0 / 60.0,
            iterations: 16,
            beta: 0.2,
            damping: 0.5,
            fit_gain: 1.0,
            nudge_gain: 0.5,
            speculative_margin: 0.005,
            angular_margin: 0.25,
            position_iterations: 2,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let bad = |m: &str| Err(DynamicsError::InvalidParameter(m.into()));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if self.iterations == 0 {
            return bad("iterations must be >= 1");
        }
        for (name, v) in [
            ("beta", self.beta),
            ("damping", self.damping),
            ("fit_gain", self.fit_gain),
            ("nudge_gain", self.nudge_gain),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(DynamicsError::InvalidParameter(format!("{name} must lie in [0, 1]")));
            }
        }
        if !(self.speculative_margin >= 0.0 && self.angular_margin >= 0.0) {
            return bad("margins must be non-negative");
        }
        Ok(())
    }
}

/// One full lower, solve, integrate cycle.
pub fn step_world(
    bodies: &mut BodySet,
    constraints: &[Constraint],
    config: &SolverConfig,
) -> Result<StepStats, DynamicsError> {
    config.validate()?;
    let mut rows = lower_constraints(constraints, bodies, config)?;
    let mut solver_bodies = bodies.solver_bodies();
    solve(&mut rows, &mut solver_bodies, config.iterations);
    bodies.write_back(&solver_bodies);
    integrate(bodies, config);
    project_joints(bodies, constraints, config.position_iterations);
    close_joint_tree(bodies, constraints);
    Ok(StepStats::from_rows(&rows))
}

/// Like [`step_world`] over the concatenation of two constraint lists,
/// avoiding a copy of the persistent list every frame.
pub fn step_world_split(
    bodies: &mut BodySet,
    persistent: &[Constraint],
    transient: &[Constraint],
    config: &SolverConfig,
) -> Result<StepStats, DynamicsError> {
    config.validate()?;
    let mut rows = lower_constraints(persistent, bodies, config)?;
    rows.extend(lower_constraints(transient, bodies, config)?);
    rows.sort_by_key(|r| r.kind);
    let mut solver_bodies = bodies.solver_bodies();
    solve(&mut rows, &mut solver_bodies, config.iterations);
    bodies.write_back(&solver_bodies);
    integrate(bodies, config);
    project_joints(bodies, persistent, config.position_iterations);
    project_joints(bodies, transient, config.position_iterations);
    close_joint_tree(bodies, persistent);
    Ok(StepStats::from_rows(&rows))
}
