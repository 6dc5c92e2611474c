//! Seeded ALS team scenarios: profiles, starting actions and placement.

use serde::{Deserialize, Serialize};

use crate::clinical::sample_initial_state;
use crate::error::{Error, Result};
use crate::game::{ActionProfile, ConstraintSpec, Game, DECISION_DIM, DEFAULT_THRESHOLD};
use crate::network::{ProximityGraph, DEFAULT_RADIUS_FT};

pub const DEFAULT_ARENA_FT: f64 = 300.0;
pub const ARENA_REFERENCE_N: usize = 7;
const PLACEMENT_SALT: u64 = 0x706c_6163_6500_0001;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub n: usize,
    pub seed: u64,
    pub radius_ft: f64,
    /// Arena side at the reference team size; scaled by `sqrt(n / n_ref)`.
    pub arena_ft: f64,
    pub arena_reference_n: usize,
    pub thresholds: [f64; DECISION_DIM],
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            n: 7,
            seed: 1,
            radius_ft: DEFAULT_RADIUS_FT,
            arena_ft: DEFAULT_ARENA_FT,
            arena_reference_n: ARENA_REFERENCE_N,
            thresholds: [DEFAULT_THRESHOLD; DECISION_DIM],
        }
    }
}

impl ScenarioParams {
    pub fn with_size(n: usize, seed: u64) -> Self {
        Self {
            n,
            seed,
            ..Self::default()
        }
    }

    pub fn arena_side(&self) -> f64 {
        self.arena_ft * (self.n as f64 / self.arena_reference_n as f64).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub game: Game,
    pub x0: ActionProfile,
    pub graph: ProximityGraph,
}

/// Game with the team-wide threshold constraint, seeded starting actions
/// and a connected seeded placement.
pub fn build_scenario(params: &ScenarioParams) -> Result<Scenario> {
    if params.n < 2 {
        return Err(Error::Configuration(format!(
            "team size {} below 2",
            params.n
        )));
    }
    if params.arena_reference_n == 0 {
        return Err(Error::Configuration(
            "arena reference size must be positive".into(),
        ));
    }
    let (profiles, x0) = sample_initial_state(params.n, params.seed)?;
    let spec = ConstraintSpec::with_thresholds(params.thresholds).aggregated(params.n);
    let game = Game::new(profiles, spec)?;
    if !game.constraints.slater_holds(&game.boxes()) {
        return Err(Error::Configuration(
            "thresholds leave no strictly feasible action".into(),
        ));
    }
    let graph = ProximityGraph::place_uniform(
        params.n,
        params.arena_side(),
        params.radius_ft,
        params.seed ^ PLACEMENT_SALT,
    )?;
    Ok(Scenario { game, x0, graph })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_shape() {
        let s = build_scenario(&ScenarioParams::default()).unwrap();
        assert_eq!(s.game.player_count(), 7);
        assert_eq!(s.x0.len(), 7);
        assert!(s.graph.is_connected());
        assert_eq!(s.game.constraints.multiplier_dim(), 3);
        assert_eq!(build_scenario(&ScenarioParams::default()).unwrap(), s);
    }

    #[test]
    fn arena_scales_with_team() {
        let p = ScenarioParams::with_size(28, 0);
        assert!((p.arena_side() - 600.0).abs() < 1e-9);
        assert!(build_scenario(&ScenarioParams::with_size(1, 0)).is_err());
        let infeasible = ScenarioParams {
            thresholds: [1.0; 3],
            ..ScenarioParams::default()
        };
        assert!(build_scenario(&infeasible).is_err());
    }
}
