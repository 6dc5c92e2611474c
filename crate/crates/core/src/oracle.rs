//! Centralized reference solutions for small games.
//!
//! The variational equilibrium solves the monotone variational inequality
//! on `z = (x, lambda)` with
//!
//! ```text
//! F(z) = ( grad J(x) - C^T lambda ,  C x - d )   over  Omega x R_+^p
//! ```
//!
//! which is handled with projected extragradient steps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{gradient_scale, ActionProfile, DecisionVector, Game, Topology, DECISION_DIM};

pub const MAX_ORACLE_ITERATIONS: usize = 1_000_000;
pub const LIPSCHITZ_SAMPLES: usize = 1000;
pub const MAX_ORACLE_PLAYERS: usize = 10;
pub const MAX_BRUTE_FORCE_PLAYERS: usize = 3;
pub const MIN_GRID_STEP: f64 = 0.05;
pub const DEFAULT_SLACK: f64 = 1e-3;
const LIPSCHITZ_SEED: u64 = 0x6f72_6163_6c65;
const GRID_FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub x: ActionProfile,
    /// One multiplier per constraint row, shared by all players.
    pub lambda: Vec<f64>,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub step: f64,
}

/// Stacked affine constraint `C x - d >= 0` of the game.
struct StackedConstraint {
    rows: Vec<Vec<f64>>,
    offsets: Vec<f64>,
}

impl StackedConstraint {
    fn of(game: &Game) -> Self {
        let n = game.player_count();
        match &game.constraints.shared {
            Some(shared) => Self {
                rows: shared.rows.iter().map(|r| r.coeffs.clone()).collect(),
                offsets: shared.rows.iter().map(|r| r.offset).collect(),
            },
            None => {
                let mut rows = Vec::with_capacity(DECISION_DIM * n);
                let mut offsets = Vec::with_capacity(DECISION_DIM * n);
                for i in 0..n {
                    for k in 0..DECISION_DIM {
                        let mut row = vec![0.0; DECISION_DIM * n];
                        row[i * DECISION_DIM + k] = 1.0;
                        rows.push(row);
                        offsets.push(game.constraints.thresholds[k]);
                    }
                }
                Self { rows, offsets }
            }
        }
    }

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.offsets)
            .map(|(r, d)| r.iter().zip(x).map(|(c, v)| c * v).sum::<f64>() - d)
            .collect()
    }
}

struct StackedVi {
    scales: Vec<f64>,
    constraint: StackedConstraint,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl StackedVi {
    fn new<T: Topology + ?Sized>(game: &Game, topology: &T) -> Self {
        let n = game.player_count();
        let mut lo = Vec::with_capacity(DECISION_DIM * n);
        let mut hi = Vec::with_capacity(DECISION_DIM * n);
        for p in &game.profiles {
            for iv in &p.action_box.0 {
                lo.push(iv.lo);
                hi.push(iv.hi);
            }
        }
        Self {
            scales: (0..n)
                .map(|i| gradient_scale(topology.neighbors_of(i).len()))
                .collect(),
            constraint: StackedConstraint::of(game),
            lo,
            hi,
        }
    }

    fn primal_dim(&self) -> usize {
        self.lo.len()
    }

    fn map(&self, z: &[f64]) -> Vec<f64> {
        let m = self.primal_dim();
        let (x, lambda) = z.split_at(m);
        let mut out: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(j, v)| self.scales[j / DECISION_DIM] * v)
            .collect();
        for (row, l) in self.constraint.rows.iter().zip(lambda) {
            for (o, c) in out.iter_mut().zip(row) {
                *o -= c * l;
            }
        }
        out.extend(self.constraint.eval(x));
        out
    }

    fn project(&self, z: &mut [f64]) {
        let m = self.primal_dim();
        for (j, v) in z.iter_mut().enumerate() {
            *v = if j < m {
                v.clamp(self.lo[j], self.hi[j])
            } else {
                v.max(0.0)
            };
        }
    }

    /// `||z - P(z - F(z))||_inf`, zero exactly at KKT points.
    fn natural_residual(&self, z: &[f64]) -> f64 {
        let f = self.map(z);
        let mut t: Vec<f64> = z.iter().zip(&f).map(|(a, b)| a - b).collect();
        self.project(&mut t);
        z.iter()
            .zip(&t)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest sampled ratio `||F(z) - F(z')|| / ||z - z'||`.
    fn lipschitz_estimate(&self, samples: usize) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(LIPSCHITZ_SEED);
        let m = self.primal_dim();
        let p = self.constraint.rows.len();
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            let mut z: Vec<f64> = (0..m)
                .map(|j| {
                    if self.hi[j] > self.lo[j] {
                        rng.random_range(self.lo[j]..self.hi[j])
                    } else {
                        self.lo[j]
                    }
                })
                .collect();
            z.extend((0..p).map(|_| rng.random_range(0.0..10.0)));
            z
        };
        let mut best: f64 = 0.0;
        for _ in 0..samples {
            let a = draw(&mut rng);
            let b = draw(&mut rng);
            let fa = self.map(&a);
            let fb = self.map(&b);
            let num: f64 = fa
                .iter()
                .zip(&fb)
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt();
            let den: f64 = a
                .iter()
                .zip(&b)
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt();
            if den > 0.0 {
                best = best.max(num / den);
            }
        }
        best
    }
}

/// Projected extragradient on the stacked primal-dual system with step
/// `1 / (2 L)`, `L` the sampled Lipschitz ratio of `F`.
pub fn solve_centralized<T: Topology + ?Sized>(
    game: &Game,
    topology: &T,
    tol: f64,
) -> Result<OracleSolution> {
    let n = game.player_count();
    if n > MAX_ORACLE_PLAYERS {
        return Err(Error::Configuration(format!(
            "oracle limited to {MAX_ORACLE_PLAYERS} players, got {n}"
        )));
    }
    if topology.node_count() != n {
        return Err(Error::Shape(
            "topology size differs from player count".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!(
            "oracle tolerance {tol} must be positive"
        )));
    }
    let vi = StackedVi::new(game, topology);
    let lipschitz = vi.lipschitz_estimate(LIPSCHITZ_SAMPLES);
    let step = if lipschitz > 0.0 {
        0.5 / lipschitz
    } else {
        0.5
    };

    let m = vi.primal_dim();
    let mut z: Vec<f64> = (0..m).map(|j| 0.5 * (vi.lo[j] + vi.hi[j])).collect();
    z.extend(vec![0.0; vi.constraint.rows.len()]);

    let mut residual = vi.natural_residual(&z);
    let mut iterations = 0;
    while residual >= tol {
        if iterations == MAX_ORACLE_ITERATIONS {
            return Err(Error::OracleFailure {
                iterations,
                tol,
                residual,
            });
        }
        let f = vi.map(&z);
        let mut half: Vec<f64> = z.iter().zip(&f).map(|(a, b)| a - step * b).collect();
        vi.project(&mut half);
        let fh = vi.map(&half);
        let mut next: Vec<f64> = z.iter().zip(&fh).map(|(a, b)| a - step * b).collect();
        vi.project(&mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::OracleFailure {
                iterations,
                tol,
                residual: f64::INFINITY,
            });
        }
        z = next;
        iterations += 1;
        residual = vi.natural_residual(&z);
    }

    Ok(OracleSolution {
        x: ActionProfile::from_stacked(&z[..m])?,
        lambda: z[m..].to_vec(),
        iterations,
        kkt_residual: residual,
        step,
    })
}

fn feasible(game: &Game, x: &ActionProfile, slack: f64) -> Result<bool> {
    match &game.constraints.shared {
        Some(shared) => Ok(shared.eval(x)?.iter().all(|g| *g >= -slack)),
        None => Ok(x
            .iter()
            .all(|xi| game.constraints.local(xi).iter().all(|g| *g >= -slack))),
    }
}

fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut pts: Vec<f64> = (0..=count).map(|k| lo + k as f64 * step).collect();
    if hi - pts[count] > 1e-12 {
        pts.push(hi);
    }
    pts
}

/// Checks `candidate` against every grid point of each player's feasible
/// set `K_i(x_-i)`: no unilateral grid deviation may lower `J_i` by more
/// than `slack`. A candidate violating the constraints by more than
/// `slack` fails, so an asymptotically converging iterate can be certified;
/// an empty feasible grid is a configuration error.
pub fn brute_force_check<T: Topology + ?Sized>(
    game: &Game,
    topology: &T,
    candidate: &ActionProfile,
    grid_step: f64,
    slack: f64,
) -> Result<bool> {
    let n = game.player_count();
    if n > MAX_BRUTE_FORCE_PLAYERS {
        return Err(Error::Configuration(format!(
            "brute-force check limited to {MAX_BRUTE_FORCE_PLAYERS} players, got {n}"
        )));
    }
    if !(grid_step >= MIN_GRID_STEP) {
        return Err(Error::Configuration(format!(
            "grid step {grid_step} below {MIN_GRID_STEP}"
        )));
    }
    if candidate.len() != n || topology.node_count() != n {
        return Err(Error::Shape(
            "candidate, topology and game sizes differ".into(),
        ));
    }
    let in_boxes = candidate
        .iter()
        .zip(&game.profiles)
        .all(|(xi, p)| p.action_box.contains(xi));
    if !in_boxes || !feasible(game, candidate, slack)? {
        return Ok(false);
    }

    for i in 0..n {
        let nb = topology.neighbors_of(i);
        let best = game.total_cost(i, candidate, nb)?;
        let b = &game.profiles[i].action_box.0;
        let axes: Vec<Vec<f64>> = (0..DECISION_DIM)
            .map(|k| axis(b[k].lo, b[k].hi, grid_step))
            .collect();
        let mut trial = candidate.clone();
        let mut any_feasible = false;
        for &a in &axes[0] {
            for &f in &axes[1] {
                for &u in &axes[2] {
                    trial.0[i] = DecisionVector::new(a, f, u);
                    if !feasible(game, &trial, GRID_FEASIBILITY_TOL)? {
                        continue;
                    }
                    any_feasible = true;
                    if game.total_cost(i, &trial, nb)? < best - slack {
                        return Ok(false);
                    }
                }
            }
        }
        if !any_feasible {
            return Err(Error::Configuration(format!(
                "empty feasible grid for player {}",
                i + 1
            )));
        }
    }
    Ok(true)
}
