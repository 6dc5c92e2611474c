//! Distributed projected primal-dual dynamics with sign consensus.
//!
//! One iteration advances every player from the iteration-`k` snapshot
//! (Jacobi order):
//!
//! ```text
//! x_i   <- x_i + h [ P_Omega_i(x_i - alpha grad J_i + (alpha gamma / n) Dg_i^T lambda_i) - x_i ]
//! lambda_i <- max(0, lambda_i + dt [ kappa sum_j s(lambda_j - lambda_i) - g_i(x_i) ])
//! zeta_i   <- zeta_i + dt rho sum_j s(eta_j - eta_i)
//! eta_i    <- eta_i + dt (zeta_i + Jbar_i(x))
//! ```
//!
//! The multiplier and averaging channels run `m` rounds of `dt = h / m`
//! per iteration against the iteration-`k` primal, with `eta` advanced from
//! the freshly updated `zeta`.

pub mod gains;
pub mod signum;
pub mod trace;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};
use crate::game::{ActionProfile, DecisionVector, Game, DECISION_DIM};
use crate::network::ProximityGraph;

pub use gains::{estimate_gain_bounds, GainBounds, GainCheck, SolverGains};
pub use signum::{signum, SignumMode};
pub use trace::{read_final_state_csv, write_final_state_csv, ConvergenceTrace, TraceRow};

pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_MAX_ITER: usize = 5000;
pub const DEFAULT_DRIFT_STEP_FT: f64 = 5.0;
pub const DEFAULT_DRIFT_DECAY: f64 = 0.98;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverState {
    pub x: ActionProfile,
    pub lambda: Vec<Vec<f64>>,
    pub zeta: Vec<f64>,
    pub eta: Vec<f64>,
}

impl SolverState {
    /// `lambda = 0`, `zeta = 0`, `eta = 0`.
    pub fn initial(x: ActionProfile, multiplier_dim: usize) -> Self {
        let n = x.len();
        Self {
            x,
            lambda: vec![vec![0.0; multiplier_dim]; n],
            zeta: vec![0.0; n],
            eta: vec![0.0; n],
        }
    }

    pub fn player_count(&self) -> usize {
        self.x.len()
    }

    pub fn check_shape(&self, game: &Game) -> Result<()> {
        let n = game.player_count();
        let p = game.constraints.multiplier_dim();
        if self.x.len() != n
            || self.lambda.len() != n
            || self.zeta.len() != n
            || self.eta.len() != n
        {
            return Err(Error::Shape(format!(
                "solver state does not describe {n} players"
            )));
        }
        if self.lambda.iter().any(|l| l.len() != p) {
            return Err(Error::Shape(format!("multipliers must have length {p}")));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().all(DecisionVector::is_finite)
            && self.lambda.iter().flatten().all(|v| v.is_finite())
            && self.zeta.iter().chain(&self.eta).all(|v| v.is_finite())
    }

    /// Multipliers of the game's KKT system, `(gamma / n) lambda_i`.
    pub fn game_multipliers(&self, gains: &SolverGains) -> Vec<Vec<f64>> {
        let c = gains.gamma / self.player_count() as f64;
        self.lambda
            .iter()
            .map(|l| l.iter().map(|v| c * v).collect())
            .collect()
    }

    pub fn dual_norms(&self) -> Vec<f64> {
        self.lambda
            .iter()
            .map(|l| l.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }
}

/// Forward-Euler projected primal update of player `i`.
pub fn primal_step(
    game: &Game,
    i: usize,
    state: &SolverState,
    neighbors: &[usize],
    gains: &SolverGains,
) -> Result<DecisionVector> {
    check_index(i, game.player_count())?;
    let xi = state.x.get(i)?;
    let grad = game.grad_local(i, &state.x, neighbors)?;
    let coupling = game.constraints.coupling(i, &state.lambda[i]);
    let c = gains.alpha * gains.gamma / game.player_count() as f64;
    let mut trial = *xi;
    for k in 0..DECISION_DIM {
        trial.0[k] += -gains.alpha * grad[k] + c * coupling[k];
    }
    let projected = game.profiles[i].action_box.project(&trial);
    let mut out = *xi;
    for k in 0..DECISION_DIM {
        out.0[k] += gains.step * (projected.0[k] - xi.0[k]);
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn dual_update(
    game: &Game,
    i: usize,
    x: &ActionProfile,
    lambda: &[Vec<f64>],
    neighbors: &[usize],
    kappa: f64,
    dt: f64,
    mode: SignumMode,
) -> Vec<f64> {
    let g = game.constraints.local_share(i, &x.0[i]);
    let li = &lambda[i];
    (0..li.len())
        .map(|r| {
            let consensus: f64 = neighbors
                .iter()
                .map(|&j| mode.apply(lambda[j][r] - li[r]))
                .sum();
            (li[r] + dt * (kappa * consensus - g[r])).max(0.0)
        })
        .collect()
}

/// One multiplier round of length `h / m` for player `i`, projected onto
/// the nonnegative orthant.
pub fn dual_step(
    game: &Game,
    i: usize,
    state: &SolverState,
    neighbors: &[usize],
    gains: &SolverGains,
    mode: SignumMode,
) -> Result<Vec<f64>> {
    check_index(i, game.player_count())?;
    state.check_shape(game)?;
    Ok(dual_update(
        game,
        i,
        &state.x,
        &state.lambda,
        neighbors,
        gains.kappa,
        gains.round_step(),
        mode,
    ))
}

#[allow(clippy::too_many_arguments)]
fn consensus_update(
    i: usize,
    zeta: &[f64],
    eta: &[f64],
    neighbors: &[usize],
    rho: f64,
    dt: f64,
    mode: SignumMode,
    cost: f64,
) -> (f64, f64) {
    let pull: f64 = neighbors.iter().map(|&j| mode.apply(eta[j] - eta[i])).sum();
    let z = zeta[i] + dt * rho * pull;
    (z, eta[i] + dt * (z + cost))
}

/// One averaging round of length `h / m` for player `i`, returning `(zeta_i, eta_i)`.
pub fn consensus_step(
    game: &Game,
    i: usize,
    state: &SolverState,
    neighbors: &[usize],
    gains: &SolverGains,
    mode: SignumMode,
) -> Result<(f64, f64)> {
    state.check_shape(game)?;
    let cost = game.neighbor_avg_cost(i, &state.x, neighbors)?;
    Ok(consensus_update(
        i,
        &state.zeta,
        &state.eta,
        neighbors,
        gains.rho,
        gains.round_step(),
        mode,
        cost,
    ))
}

fn map_players<T, F>(n: usize, parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if parallel {
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

/// Advances all players by one iteration on `graph`.
pub fn iterate(
    game: &Game,
    state: &SolverState,
    graph: &ProximityGraph,
    gains: &SolverGains,
    mode: SignumMode,
    parallel: bool,
) -> Result<SolverState> {
    state.check_shape(game)?;
    let n = game.player_count();
    if graph.node_count() != n {
        return Err(Error::Shape(format!(
            "graph has {} nodes, game has {n} players",
            graph.node_count()
        )));
    }
    let nb = graph.neighbor_lists();
    let x_next = map_players(n, parallel, |i| primal_step(game, i, state, &nb[i], gains))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let costs = map_players(n, parallel, |i| game.neighbor_avg_cost(i, &state.x, &nb[i]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let dt = gains.round_step();
    let mut lambda = state.lambda.clone();
    let mut zeta = state.zeta.clone();
    let mut eta = state.eta.clone();
    for _ in 0..gains.consensus_rounds {
        lambda = map_players(n, parallel, |i| {
            dual_update(game, i, &state.x, &lambda, &nb[i], gains.kappa, dt, mode)
        });
        let ze = map_players(n, parallel, |i| {
            consensus_update(i, &zeta, &eta, &nb[i], gains.rho, dt, mode, costs[i])
        });
        (zeta, eta) = ze.into_iter().unzip();
    }
    Ok(SolverState {
        x: ActionProfile::new(x_next),
        lambda,
        zeta,
        eta,
    })
}

/// `(1/h) max |change|` over primal and multiplier components.
pub fn fixed_point_residual(before: &SolverState, after: &SolverState, step: f64) -> Result<f64> {
    if before.x.len() != after.x.len()
        || before.lambda.len() != after.lambda.len()
        || before
            .lambda
            .iter()
            .zip(&after.lambda)
            .any(|(a, b)| a.len() != b.len())
    {
        return Err(Error::Shape("states of different shape".into()));
    }
    let dx = before.x.max_abs_diff(&after.x)?;
    let dl = before
        .lambda
        .iter()
        .flatten()
        .zip(after.lambda.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(dx.max(dl) / step)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: SignumMode,
    pub gains: SolverGains,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub drift_step_ft: f64,
    /// Drift amplitude at iteration `k` is `drift_step_ft * drift_decay^k`.
    pub drift_decay: f64,
    /// Write measured cumulative wall time into the trace (otherwise 0).
    pub record_wall_time: bool,
    /// Keep per-iteration multipliers and neighbor-averaged costs.
    pub record_history: bool,
    pub parallel: bool,
}

impl RunConfig {
    pub fn new(gains: SolverGains, mode: SignumMode, seed: u64) -> Self {
        Self {
            mode,
            gains,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            seed,
            drift_step_ft: DEFAULT_DRIFT_STEP_FT,
            drift_decay: DEFAULT_DRIFT_DECAY,
            record_wall_time: false,
            record_history: false,
            parallel: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.gains.validate()?;
        self.mode.validate()?;
        if !(self.tol >= 0.0) {
            return Err(Error::Parameter(format!(
                "tolerance {} must be nonnegative",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Parameter("max_iter must be positive".into()));
        }
        if !(self.drift_step_ft.is_finite() && self.drift_step_ft >= 0.0) {
            return Err(Error::Parameter("drift step must be nonnegative".into()));
        }
        if !(self.drift_decay > 0.0 && self.drift_decay <= 1.0) {
            return Err(Error::Parameter("drift decay must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn drift_step_at(&self, k: usize) -> f64 {
        self.drift_step_ft * self.drift_decay.powi(k.min(i32::MAX as usize) as i32)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub lambda: Vec<Vec<f64>>,
    pub neighbor_costs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub trace: ConvergenceTrace,
    pub final_state: SolverState,
    pub initial_graph: ProximityGraph,
    pub final_graph: ProximityGraph,
    pub iterations: usize,
    pub converged: bool,
    pub gain_check: GainCheck,
    /// Measured time spent in the iteration loop.
    pub elapsed_s: f64,
    pub history: Vec<IterationRecord>,
}

impl RunOutput {
    pub fn game_multipliers(&self, gains: &SolverGains) -> Vec<Vec<f64>> {
        self.final_state.game_multipliers(gains)
    }
}

/// Runs the dynamics from `x0` on the drifting graph until the fixed-point
/// residual drops below `tol` or `max_iter` iterations have been taken.
///
/// Iteration `k` (0-based) uses the graph after `k` drift steps. The gain
/// check against the continuous-time bounds is reported, not enforced.
pub fn run(
    game: &Game,
    x0: ActionProfile,
    graph0: &ProximityGraph,
    cfg: &RunConfig,
) -> Result<RunOutput> {
    cfg.validate()?;
    let n = game.player_count();
    if x0.len() != n || graph0.node_count() != n {
        return Err(Error::Shape(format!(
            "initial profile ({}) and graph ({}) must match {n} players",
            x0.len(),
            graph0.node_count()
        )));
    }
    for (i, (xi, p)) in x0.iter().zip(&game.profiles).enumerate() {
        if !p.action_box.contains(xi) {
            return Err(Error::Parameter(format!(
                "initial action of player {} outside its box",
                i + 1
            )));
        }
    }
    let gain_check = GainCheck::new(estimate_gain_bounds(game, graph0)?, &cfg.gains, n);

    let mut state = SolverState::initial(x0, game.constraints.multiplier_dim());
    let mut graph = graph0.clone();
    let mut trace = ConvergenceTrace::default();
    let mut history = Vec::new();
    let mut converged = false;
    let mut elapsed = 0.0;

    for k in 0..cfg.max_iter {
        let started = Instant::now();
        if k > 0 {
            graph = graph.drift(k as u64, cfg.seed, cfg.drift_step_at(k))?;
        }
        let next = iterate(game, &state, &graph, &cfg.gains, cfg.mode, cfg.parallel)?;
        elapsed += started.elapsed().as_secs_f64();
        if !next.is_finite() {
            return Err(Error::Divergence { iteration: k + 1 });
        }
        let residual = fixed_point_residual(&state, &next, cfg.gains.step)?;
        let nb = graph.neighbor_lists();
        let objectives = (0..n)
            .map(|i| game.total_cost(i, &next.x, &nb[i]))
            .collect::<Result<Vec<_>>>()?;
        if cfg.record_history {
            history.push(IterationRecord {
                lambda: next.lambda.clone(),
                neighbor_costs: (0..n)
                    .map(|i| game.neighbor_avg_cost(i, &next.x, &nb[i]))
                    .collect::<Result<Vec<_>>>()?,
            });
        }
        trace.rows.push(TraceRow {
            k: k + 1,
            residual,
            wall_time_s: if cfg.record_wall_time { elapsed } else { 0.0 },
            dual_norms: next.dual_norms(),
            objectives,
        });
        state = next;
        if residual < cfg.tol {
            converged = true;
            break;
        }
    }

    Ok(RunOutput {
        iterations: trace.len(),
        trace,
        final_state: state,
        initial_graph: graph0.clone(),
        final_graph: graph,
        converged,
        gain_check,
        elapsed_s: elapsed,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{ActionBox, ConstraintSpec, PlayerProfile};
    use crate::network::Position;

    fn game(n: usize, spec: ConstraintSpec) -> Game {
        let profiles = (1..=n)
            .map(|id| PlayerProfile::new(id, 0.7, 70.0, 0.6, ActionBox::unit()).unwrap())
            .collect();
        Game::new(profiles, spec).unwrap()
    }

    fn gains(alpha: f64, gamma: f64, kappa: f64, step: f64) -> SolverGains {
        SolverGains {
            alpha,
            gamma,
            kappa,
            rho: kappa,
            step,
            consensus_rounds: 1,
        }
    }

    fn state(xs: Vec<DecisionVector>, lambdas: Vec<Vec<f64>>) -> SolverState {
        let n = xs.len();
        SolverState {
            x: ActionProfile::new(xs),
            lambda: lambdas,
            zeta: vec![0.0; n],
            eta: vec![0.0; n],
        }
    }

    #[test]
    fn primal_examples() {
        let g = game(1, ConstraintSpec::default());
        let s = state(vec![DecisionVector::splat(0.5)], vec![vec![0.0; 3]]);
        // gamma = 0 is outside the validated range but isolates the gradient term
        let x = primal_step(&g, 0, &s, &[], &gains(0.1, 0.0, 1.0, 1.0)).unwrap();
        for v in x.0 {
            assert!((v - 0.3).abs() < 1e-15);
        }

        let zero = state(vec![DecisionVector::splat(0.0)], vec![vec![0.0; 3]]);
        let x = primal_step(&g, 0, &zero, &[], &gains(0.1, 1.0, 1.0, 0.5)).unwrap();
        assert_eq!(x, DecisionVector::splat(0.0));

        // x = theta with lambda = grad J (n = 1, gamma = 1) is a fixed point
        let fixed = state(vec![DecisionVector::splat(0.2)], vec![vec![0.8; 3]]);
        let x = primal_step(&g, 0, &fixed, &[], &gains(0.3, 1.0, 1.0, 0.5)).unwrap();
        for v in x.0 {
            assert!((v - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn dual_examples() {
        let g1 = game(1, ConstraintSpec::default());
        let s = state(vec![DecisionVector::new(0.1, 0.3, 0.3)], vec![vec![0.0; 3]]);
        let l = dual_step(
            &g1,
            0,
            &s,
            &[],
            &gains(0.1, 1.0, 7.0, 1.0),
            SignumMode::Discontinuous,
        )
        .unwrap();
        assert!((l[0] - 0.1).abs() < 1e-15);
        assert_eq!(&l[1..], &[0.0, 0.0]);

        let feasible = state(vec![DecisionVector::splat(0.5)], vec![vec![0.2; 3]]);
        let l = dual_step(
            &g1,
            0,
            &feasible,
            &[],
            &gains(0.1, 1.0, 1.0, 0.5),
            SignumMode::default(),
        )
        .unwrap();
        assert!(l.iter().all(|v| *v < 0.2 && *v >= 0.0));

        let g2 = game(2, ConstraintSpec::default());
        let s = state(
            vec![DecisionVector::splat(0.2); 2],
            vec![vec![1.0; 3], vec![0.0; 3]],
        );
        let gn = gains(0.1, 1.0, 1.0, 0.1);
        let a = dual_step(&g2, 0, &s, &[1], &gn, SignumMode::Discontinuous).unwrap();
        let b = dual_step(&g2, 1, &s, &[0], &gn, SignumMode::Discontinuous).unwrap();
        for k in 0..3 {
            assert!(((a[k] - b[k]) - 0.8).abs() < 1e-12);
        }
    }

    #[test]
    fn consensus_examples() {
        let g = game(2, ConstraintSpec::default());
        let gn = gains(0.1, 1.0, 2.0, 0.1);
        let mut s = state(vec![DecisionVector::splat(0.5); 2], vec![vec![0.0; 3]; 2]);
        let (z0, e0) = consensus_step(&g, 0, &s, &[1], &gn, SignumMode::default()).unwrap();
        let (z1, e1) = consensus_step(&g, 1, &s, &[0], &gn, SignumMode::default()).unwrap();
        assert_eq!((z0, z1), (0.0, 0.0));
        assert_eq!(e0, e1);
        assert!(e0 > 0.0);

        s.eta = vec![1.0, 0.0];
        let (z0, _) = consensus_step(&g, 0, &s, &[1], &gn, SignumMode::default()).unwrap();
        let (z1, _) = consensus_step(&g, 1, &s, &[0], &gn, SignumMode::default()).unwrap();
        assert!(z0 < 0.0 && z1 > 0.0);
        assert_eq!(z0, -z1);

        s.eta = vec![0.0, 0.0];
        let cost = g.local_cost(0, &s.x).unwrap();
        let (z, e) = consensus_step(&g, 0, &s, &[], &gn, SignumMode::default()).unwrap();
        assert_eq!(z, 0.0);
        assert!((e - 0.1 * cost).abs() < 1e-15);
    }

    #[test]
    fn residual_examples() {
        let s = state(vec![DecisionVector::splat(0.5)], vec![vec![0.0; 3]]);
        assert_eq!(fixed_point_residual(&s, &s, 0.05).unwrap(), 0.0);
        let mut t = s.clone();
        t.x.0[0].0[1] += 0.05 * 0.5;
        assert!((fixed_point_residual(&s, &t, 0.05).unwrap() - 0.5).abs() < 1e-12);
        let mut u = s.clone();
        u.lambda.push(vec![0.0; 3]);
        u.x.0.push(DecisionVector::default());
        assert!(matches!(
            fixed_point_residual(&s, &u, 0.05),
            Err(Error::Shape(_))
        ));
    }

    fn pair_graph() -> ProximityGraph {
        ProximityGraph::build(
            vec![Position::new(0.0, 0.0), Position::new(50.0, 0.0)],
            200.0,
        )
        .unwrap()
    }

    #[test]
    fn symmetric_pair_stays_symmetric() {
        let g = game(2, ConstraintSpec::default().aggregated(2));
        let graph = pair_graph();
        let mut cfg = RunConfig::new(
            SolverGains::with_defaults(&graph, SignumMode::default()),
            SignumMode::default(),
            3,
        );
        cfg.drift_step_ft = 0.0;
        let x0 = ActionProfile::new(vec![DecisionVector::new(0.9, 0.85, 0.95); 2]);
        let out = run(&g, x0, &graph, &cfg).unwrap();
        assert!(out.converged);
        let x = &out.final_state.x;
        assert!(x.0[0]
            .0
            .iter()
            .zip(x.0[1].0.iter())
            .all(|(a, b)| (a - b).abs() < 1e-6));
        for v in x.0[0].0 {
            assert!((v - 0.2).abs() < 5e-3);
        }
    }

    #[test]
    fn divergence_is_reported() {
        let g = game(2, ConstraintSpec::default().aggregated(2));
        let graph = pair_graph();
        let mut gn = SolverGains::with_defaults(&graph, SignumMode::default());
        gn.alpha = 1e300;
        gn.step = 1e300;
        let cfg = RunConfig::new(gn, SignumMode::default(), 0);
        let x0 = ActionProfile::new(vec![DecisionVector::splat(0.5); 2]);
        assert!(
            matches!(run(&g, x0, &graph, &cfg), Err(Error::Divergence { iteration }) if iteration <= 3)
        );
    }

    #[test]
    fn rejects_out_of_box_start() {
        let g = game(2, ConstraintSpec::default().aggregated(2));
        let graph = pair_graph();
        let cfg = RunConfig::new(
            SolverGains::with_defaults(&graph, SignumMode::default()),
            SignumMode::default(),
            0,
        );
        let x0 = ActionProfile::new(vec![DecisionVector::splat(1.5); 2]);
        assert!(run(&g, x0, &graph, &cfg).is_err());
    }
}
