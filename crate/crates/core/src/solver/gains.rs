use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{gradient_scale, Game, DECISION_DIM};
use crate::network::ProximityGraph;
use crate::solver::signum::SignumMode;

pub const DEFAULT_STEP: f64 = 0.05;
pub const DEFAULT_ALPHA: f64 = 0.7;
pub const DEFAULT_CONSENSUS_ROUNDS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverGains {
    /// Primal step scale.
    pub alpha: f64,
    /// Constraint coupling; the primal flow sees `(gamma / n) lambda_i`.
    pub gamma: f64,
    /// Dual sign-consensus gain.
    pub kappa: f64,
    /// Averaging-channel consensus gain.
    pub rho: f64,
    /// Integrator step `h`.
    pub step: f64,
    /// Consensus sub-rounds of length `h / m` per iteration.
    pub consensus_rounds: usize,
}

impl SolverGains {
    /// Consensus gain keeping one explicit round of the linearized sign
    /// consensus at the edge of its stability region:
    /// `kappa = m / (h * slope * lambda_max(L))`.
    pub fn consensus_gain(
        step: f64,
        rounds: usize,
        mode: SignumMode,
        graph: &ProximityGraph,
    ) -> f64 {
        let lmax = graph.lambda_max();
        if lmax <= 0.0 {
            return 1.0;
        }
        rounds as f64 / (step * mode.gain_slope() * lmax)
    }

    /// Defaults for a team on `graph`: `gamma = n`, derived `kappa = rho`.
    pub fn derive(
        graph: &ProximityGraph,
        mode: SignumMode,
        alpha: f64,
        step: f64,
        rounds: usize,
    ) -> Self {
        let c = Self::consensus_gain(step, rounds.max(1), mode, graph);
        Self {
            alpha,
            gamma: graph.node_count() as f64,
            kappa: c,
            rho: c,
            step,
            consensus_rounds: rounds,
        }
    }

    pub fn with_defaults(graph: &ProximityGraph, mode: SignumMode) -> Self {
        Self::derive(
            graph,
            mode,
            DEFAULT_ALPHA,
            DEFAULT_STEP,
            DEFAULT_CONSENSUS_ROUNDS,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("kappa", self.kappa),
            ("rho", self.rho),
            ("step", self.step),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parameter(format!(
                    "gain {name} = {v} must be positive"
                )));
            }
        }
        if self.consensus_rounds == 0 {
            return Err(Error::Parameter(
                "consensus_rounds must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn round_step(&self) -> f64 {
        self.step / self.consensus_rounds as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainBounds {
    pub h1: f64,
    pub h2: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Corner enumeration of `h1 = max_i max ||grad J_i|| * diam(Omega)` and
/// `h2 = max_i max ||g_i(x_i)||`. Both extrema sit at box corners because
/// the gradient and the constraints are affine in `x_i`.
pub fn estimate_gain_bounds(game: &Game, graph: &ProximityGraph) -> Result<GainBounds> {
    if graph.node_count() != game.player_count() {
        return Err(Error::Shape(format!(
            "graph has {} nodes, game has {} players",
            graph.node_count(),
            game.player_count()
        )));
    }
    let mut diameter_sq = 0.0;
    let mut max_grad: f64 = 0.0;
    let mut h2: f64 = 0.0;
    for (i, p) in game.profiles.iter().enumerate() {
        let b = &p.action_box;
        if b.0
            .iter()
            .any(|iv| !(iv.lo.is_finite() && iv.hi.is_finite()))
        {
            return Err(Error::Parameter(format!(
                "unbounded action box for player {}",
                i + 1
            )));
        }
        diameter_sq += b.diameter_sq();
        let scale = gradient_scale(graph.degree(i));
        for corner in b.corners() {
            let g: [f64; DECISION_DIM] = corner.0.map(|v| scale * v);
            max_grad = max_grad.max(norm(&g));
            h2 = h2.max(norm(&game.constraints.local_share(i, &corner)));
        }
    }
    Ok(GainBounds {
        h1: max_grad * diameter_sq.sqrt(),
        h2,
    })
}

/// Continuous-time sufficient conditions `kappa > (n-1) h1`, `rho > gamma (n-1) h2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainCheck {
    pub bounds: GainBounds,
    pub kappa_required: f64,
    pub rho_required: f64,
    pub kappa: f64,
    pub rho: f64,
}

impl GainCheck {
    pub fn new(bounds: GainBounds, gains: &SolverGains, n: usize) -> Self {
        let m = n.saturating_sub(1) as f64;
        Self {
            bounds,
            kappa_required: m * bounds.h1,
            rho_required: gains.gamma * m * bounds.h2,
            kappa: gains.kappa,
            rho: gains.rho,
        }
    }

    pub fn kappa_ok(&self) -> bool {
        self.kappa > self.kappa_required
    }

    pub fn rho_ok(&self) -> bool {
        self.rho > self.rho_required
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.kappa_ok() {
            out.push(format!(
                "kappa = {:.6} is below the continuous-time bound (n-1)h1 = {:.6}",
                self.kappa, self.kappa_required
            ));
        }
        if !self.rho_ok() {
            out.push(format!(
                "rho = {:.6} is below the continuous-time bound gamma(n-1)h2 = {:.6}",
                self.rho, self.rho_required
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{ActionBox, ConstraintSpec, PlayerProfile};
    use crate::network::Position;
    use approx::assert_relative_eq;

    fn two_isolated(b: ActionBox) -> (Game, ProximityGraph) {
        let profiles = (1..=2)
            .map(|id| PlayerProfile::new(id, 0.5, 60.0, 0.5, b).unwrap())
            .collect();
        let game = Game::new(profiles, ConstraintSpec::default()).unwrap();
        let graph = ProximityGraph::build(
            vec![Position::new(0.0, 0.0), Position::new(1000.0, 0.0)],
            200.0,
        )
        .unwrap();
        (game, graph)
    }

    #[test]
    fn bounds_on_unit_boxes() {
        let (game, graph) = two_isolated(ActionBox::unit());
        let b = estimate_gain_bounds(&game, &graph).unwrap();
        assert_relative_eq!(b.h2, 0.8 * 3f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(b.h1, 4.0 * 18f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn degenerate_box_has_zero_h1() {
        let (game, graph) = two_isolated(ActionBox::new([0.0; 3], [0.0; 3]).unwrap());
        assert_eq!(estimate_gain_bounds(&game, &graph).unwrap().h1, 0.0);
    }

    #[test]
    fn derived_gains_and_check() {
        let graph = ProximityGraph::build(
            vec![Position::new(0.0, 0.0), Position::new(100.0, 0.0)],
            200.0,
        )
        .unwrap();
        let g = SolverGains::with_defaults(&graph, SignumMode::default());
        // lambda_max of a single edge is 2
        assert_relative_eq!(g.kappa, 8.0 / (0.05 * 50.0 * 2.0), epsilon = 1e-12);
        assert_eq!(g.gamma, 2.0);
        g.validate().unwrap();
        let check = GainCheck::new(GainBounds { h1: 10.0, h2: 1.0 }, &g, 2);
        assert!(!check.kappa_ok());
        assert_eq!(check.warnings().len(), 2);
        let mut bad = g;
        bad.consensus_rounds = 0;
        assert!(bad.validate().is_err());
        bad = g;
        bad.kappa = 0.0;
        assert!(bad.validate().is_err());
    }
}
