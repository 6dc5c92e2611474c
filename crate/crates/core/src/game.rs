//! Game primitives: player profiles, decision vectors, the quadratic
//! neighbor-averaged cost, threshold constraints and KKT certification.
//!
//! Each player `i` chooses `x_i = [a_i, f_i, upsilon_i]` (alacrity, fairness,
//! communication efficiency) inside a box `Omega_i`. The skill index `s_i`
//! is a fixed parameter; it shifts the cost but never the gradient.
//!
//! The total cost of player `i` on a neighbor set `N_i` is
//!
//! ```text
//! J_i(x) = c_i(x_i) + (c_i(x_i) + sum_{j in N_i} c_j(x_j)) / (1 + |N_i|)
//! c_i(x_i) = s_i^2 + a_i^2 + f_i^2 + upsilon_i^2
//! ```
//!
//! so `grad_{x_i} J_i = 2 (1 + 1/(1+|N_i|)) x_i`.

use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};

/// Number of decision components per player (`a`, `f`, `upsilon`).
pub const DECISION_DIM: usize = 3;

/// Default minimum operational threshold on every decision component.
pub const DEFAULT_THRESHOLD: f64 = 0.2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DecisionVector(pub [f64; DECISION_DIM]);

impl DecisionVector {
    pub fn new(alacrity: f64, fairness: f64, comm_efficiency: f64) -> Self {
        Self([alacrity, fairness, comm_efficiency])
    }

    pub fn splat(v: f64) -> Self {
        Self([v; DECISION_DIM])
    }

    pub fn alacrity(&self) -> f64 {
        self.0[0]
    }

    pub fn fairness(&self) -> f64 {
        self.0[1]
    }

    pub fn comm_efficiency(&self) -> f64 {
        self.0[2]
    }

    pub fn as_array(&self) -> &[f64; DECISION_DIM] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }
}

impl std::ops::Index<usize> for DecisionVector {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

impl std::ops::IndexMut<usize> for DecisionVector {
    fn index_mut(&mut self, k: usize) -> &mut f64 {
        &mut self.0[k]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::Parameter(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Closed box `Omega_i`, one interval per decision component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionBox(pub [Interval; DECISION_DIM]);

impl ActionBox {
    pub fn unit() -> Self {
        Self([Interval { lo: 0.0, hi: 1.0 }; DECISION_DIM])
    }

    pub fn new(lo: [f64; DECISION_DIM], hi: [f64; DECISION_DIM]) -> Result<Self> {
        Ok(Self([
            Interval::new(lo[0], hi[0])?,
            Interval::new(lo[1], hi[1])?,
            Interval::new(lo[2], hi[2])?,
        ]))
    }

    /// Euclidean projection (componentwise clamp for a box).
    pub fn project(&self, x: &DecisionVector) -> DecisionVector {
        let mut out = *x;
        for (k, iv) in self.0.iter().enumerate() {
            out.0[k] = iv.clamp(x.0[k]);
        }
        out
    }

    pub fn contains(&self, x: &DecisionVector) -> bool {
        self.0
            .iter()
            .zip(x.0.iter())
            .all(|(iv, v)| *v >= iv.lo && *v <= iv.hi)
    }

    /// The `2^3` vertices of the box.
    pub fn corners(&self) -> impl Iterator<Item = DecisionVector> + '_ {
        (0..1usize << DECISION_DIM).map(move |mask| {
            let mut v = DecisionVector::default();
            for k in 0..DECISION_DIM {
                v.0[k] = if mask & (1 << k) != 0 {
                    self.0[k].hi
                } else {
                    self.0[k].lo
                };
            }
            v
        })
    }

    /// Squared diameter of the box.
    pub fn diameter_sq(&self) -> f64 {
        self.0.iter().map(|iv| iv.width() * iv.width()).sum()
    }

    pub fn within_unit(&self) -> bool {
        self.0.iter().all(|iv| iv.lo >= 0.0 && iv.hi <= 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerProfile {
    /// 1-based player id.
    pub id: usize,
    pub skill: f64,
    /// Resting heart rate in beats per minute.
    pub resting_heart_rate: f64,
    pub damping_ratio: f64,
    pub action_box: ActionBox,
}

impl PlayerProfile {
    pub fn new(
        id: usize,
        skill: f64,
        resting_heart_rate: f64,
        damping_ratio: f64,
        action_box: ActionBox,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&skill) {
            return Err(Error::Parameter(format!("skill {skill} outside [0, 1]")));
        }
        if !(resting_heart_rate.is_finite() && resting_heart_rate > 0.0) {
            return Err(Error::Parameter(format!(
                "resting heart rate {resting_heart_rate} must be positive"
            )));
        }
        if !(damping_ratio > 0.0 && damping_ratio < 1.0) {
            return Err(Error::Parameter(format!(
                "damping ratio {damping_ratio} outside (0, 1)"
            )));
        }
        if !action_box.within_unit() {
            return Err(Error::Parameter(
                "action box must lie inside [0, 1]^3".to_string(),
            ));
        }
        Ok(Self {
            id,
            skill,
            resting_heart_rate,
            damping_ratio,
            action_box,
        })
    }
}

/// Stacked decision vectors of all players.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionProfile(pub Vec<DecisionVector>);

impl ActionProfile {
    pub fn new(players: Vec<DecisionVector>) -> Self {
        Self(players)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> Result<&DecisionVector> {
        check_index(i, self.0.len())?;
        Ok(&self.0[i])
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DecisionVector> {
        self.0.iter()
    }

    /// Flattened `3n` vector.
    pub fn stacked(&self) -> Vec<f64> {
        self.0.iter().flat_map(|x| x.0).collect()
    }

    pub fn from_stacked(z: &[f64]) -> Result<Self> {
        if !z.len().is_multiple_of(DECISION_DIM) {
            return Err(Error::Shape(format!(
                "stacked length {} is not a multiple of {DECISION_DIM}",
                z.len()
            )));
        }
        Ok(Self(
            z.chunks_exact(DECISION_DIM)
                .map(|c| DecisionVector([c[0], c[1], c[2]]))
                .collect(),
        ))
    }

    /// Infinity-norm distance between two profiles.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::Shape(format!(
                "profiles of length {} and {}",
                self.len(),
                other.len()
            )));
        }
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .flat_map(|(a, b)| a.0.iter().zip(b.0.iter()).map(|(u, v)| (u - v).abs()))
            .fold(0.0, f64::max))
    }
}

/// One affine row `c^T x - d` of a shared constraint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearRow {
    /// Stacked coefficients, length `3n`.
    pub coeffs: Vec<f64>,
    pub offset: f64,
}

/// Shared affine constraint `g(x) = C x - d >= 0` coupling all players.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SharedConstraint {
    pub rows: Vec<LinearRow>,
}

impl SharedConstraint {
    pub fn single(coeffs: Vec<f64>, offset: f64) -> Self {
        Self {
            rows: vec![LinearRow { coeffs, offset }],
        }
    }

    /// `g_k(x) = sum_i (x_{i,k} - theta_k)`: the per-player thresholds summed
    /// over the team, one row per decision component.
    pub fn aggregate_thresholds(n: usize, thresholds: [f64; DECISION_DIM]) -> Self {
        let rows = (0..DECISION_DIM)
            .map(|k| {
                let mut coeffs = vec![0.0; DECISION_DIM * n];
                for i in 0..n {
                    coeffs[i * DECISION_DIM + k] = 1.0;
                }
                LinearRow {
                    coeffs,
                    offset: n as f64 * thresholds[k],
                }
            })
            .collect();
        Self { rows }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    fn check_width(&self, n: usize) -> Result<()> {
        for row in &self.rows {
            if row.coeffs.len() != DECISION_DIM * n {
                return Err(Error::Shape(format!(
                    "shared row has {} coefficients, expected {}",
                    row.coeffs.len(),
                    DECISION_DIM * n
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &ActionProfile) -> Result<Vec<f64>> {
        self.check_width(x.len())?;
        let z = x.stacked();
        Ok(self
            .rows
            .iter()
            .map(|row| row.coeffs.iter().zip(&z).map(|(c, v)| c * v).sum::<f64>() - row.offset)
            .collect())
    }

    /// Rows of `d g / d x_i`, one `[f64; 3]` per constraint row.
    pub fn player_jacobian(&self, i: usize) -> Vec<[f64; DECISION_DIM]> {
        self.rows
            .iter()
            .map(|row| {
                let b = i * DECISION_DIM;
                [row.coeffs[b], row.coeffs[b + 1], row.coeffs[b + 2]]
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    /// Lower bounds `theta` on `[a, f, upsilon]`.
    pub thresholds: [f64; DECISION_DIM],
    /// When present, KKT certification is done against this shared form
    /// instead of the per-player thresholds.
    pub shared: Option<SharedConstraint>,
}

impl Default for ConstraintSpec {
    fn default() -> Self {
        Self {
            thresholds: [DEFAULT_THRESHOLD; DECISION_DIM],
            shared: None,
        }
    }
}

impl ConstraintSpec {
    pub fn with_thresholds(thresholds: [f64; DECISION_DIM]) -> Self {
        Self {
            thresholds,
            shared: None,
        }
    }

    /// Same thresholds, coupled through their team-wide sum.
    pub fn aggregated(&self, n: usize) -> Self {
        Self {
            thresholds: self.thresholds,
            shared: Some(SharedConstraint::aggregate_thresholds(n, self.thresholds)),
        }
    }

    /// Number of inequality components carried by each multiplier.
    pub fn multiplier_dim(&self) -> usize {
        self.shared.as_ref().map_or(DECISION_DIM, |s| s.dim())
    }

    /// `g_i(x_i) = x_i - theta`; nonnegative components are satisfied.
    pub fn local(&self, x_i: &DecisionVector) -> [f64; DECISION_DIM] {
        std::array::from_fn(|k| x_i.0[k] - self.thresholds[k])
    }

    /// Player `i`'s share of the constraint: `x_i - theta` without a shared
    /// form, otherwise `c_{r,i}^T x_i - d_r / n` for every shared row `r`, so
    /// that the shares sum to `g(x)`.
    pub fn local_share(&self, i: usize, x_i: &DecisionVector) -> Vec<f64> {
        match &self.shared {
            None => self.local(x_i).to_vec(),
            Some(shared) => shared
                .rows
                .iter()
                .map(|row| {
                    let n = (row.coeffs.len() / DECISION_DIM) as f64;
                    let b = i * DECISION_DIM;
                    (0..DECISION_DIM)
                        .map(|k| row.coeffs[b + k] * x_i.0[k])
                        .sum::<f64>()
                        - row.offset / n
                })
                .collect(),
        }
    }

    /// `Dg_i(x_i)^T lambda`.
    pub fn coupling(&self, i: usize, lambda: &[f64]) -> [f64; DECISION_DIM] {
        match &self.shared {
            None => [lambda[0], lambda[1], lambda[2]],
            Some(shared) => {
                let mut out = [0.0; DECISION_DIM];
                for (row, l) in shared.player_jacobian(i).iter().zip(lambda) {
                    for k in 0..DECISION_DIM {
                        out[k] += row[k] * l;
                    }
                }
                out
            }
        }
    }

    /// Slater check: some point of `Omega` satisfies every constraint strictly.
    ///
    /// For shared rows the witness takes each coordinate at the bound favored
    /// by the sign of its summed coefficients, which is exact whenever every
    /// coordinate enters the rows with one sign (as in the aggregate form).
    pub fn slater_holds(&self, boxes: &[ActionBox]) -> bool {
        match &self.shared {
            None => boxes
                .iter()
                .all(|b| (0..DECISION_DIM).all(|k| b.0[k].hi > self.thresholds[k])),
            Some(shared) => {
                let n = boxes.len();
                if shared.check_width(n).is_err() {
                    return false;
                }
                let mut witness = Vec::with_capacity(n);
                for (i, b) in boxes.iter().enumerate() {
                    let mut v = DecisionVector::default();
                    for k in 0..DECISION_DIM {
                        let weight: f64 = shared
                            .rows
                            .iter()
                            .map(|r| r.coeffs[i * DECISION_DIM + k])
                            .sum();
                        v.0[k] = if weight >= 0.0 { b.0[k].hi } else { b.0[k].lo };
                    }
                    witness.push(v);
                }
                shared
                    .eval(&ActionProfile(witness))
                    .map(|g| g.iter().all(|v| *v > 0.0))
                    .unwrap_or(false)
            }
        }
    }
}

/// Neighbor structure the costs are evaluated on.
pub trait Topology {
    fn node_count(&self) -> usize;
    fn neighbors_of(&self, i: usize) -> &[usize];
}

impl Topology for Vec<Vec<usize>> {
    fn node_count(&self) -> usize {
        self.len()
    }

    fn neighbors_of(&self, i: usize) -> &[usize] {
        &self[i]
    }
}

/// `s^2 + a^2 + f^2 + upsilon^2`.
pub fn local_cost(skill: f64, x_i: &DecisionVector) -> f64 {
    skill * skill + x_i.norm_sq()
}

/// Gradient multiplier `2 (1 + 1/(1 + degree))` of the total cost.
pub fn gradient_scale(degree: usize) -> f64 {
    2.0 * (1.0 + 1.0 / (1.0 + degree as f64))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    pub stationarity_residual: f64,
    pub complementarity_residual: f64,
    pub primal_feasibility_violation: f64,
    pub dual_feasibility_violation: f64,
    pub multiplier_spread: f64,
}

impl KktReport {
    /// Largest of the four first-order residuals (spread excluded).
    pub fn max_residual(&self) -> f64 {
        self.stationarity_residual
            .max(self.complementarity_residual)
            .max(self.primal_feasibility_violation)
            .max(self.dual_feasibility_violation)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Game {
    pub profiles: Vec<PlayerProfile>,
    pub constraints: ConstraintSpec,
}

impl Game {
    pub fn new(profiles: Vec<PlayerProfile>, constraints: ConstraintSpec) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::Parameter("a game needs at least one player".into()));
        }
        if let Some(shared) = &constraints.shared {
            shared.check_width(profiles.len())?;
        }
        Ok(Self {
            profiles,
            constraints,
        })
    }

    pub fn player_count(&self) -> usize {
        self.profiles.len()
    }

    pub fn boxes(&self) -> Vec<ActionBox> {
        self.profiles.iter().map(|p| p.action_box).collect()
    }

    fn check_profile(&self, x: &ActionProfile) -> Result<()> {
        if x.len() != self.player_count() {
            return Err(Error::Shape(format!(
                "action profile has {} players, game has {}",
                x.len(),
                self.player_count()
            )));
        }
        Ok(())
    }

    pub fn local_cost(&self, i: usize, x: &ActionProfile) -> Result<f64> {
        check_index(i, self.player_count())?;
        Ok(local_cost(self.profiles[i].skill, x.get(i)?))
    }

    /// Own cost averaged with the neighbors' local costs; equals the own
    /// local cost for an isolated player.
    pub fn neighbor_avg_cost(
        &self,
        i: usize,
        x: &ActionProfile,
        neighbors: &[usize],
    ) -> Result<f64> {
        let mut sum = self.local_cost(i, x)?;
        for &j in neighbors {
            sum += self.local_cost(j, x)?;
        }
        Ok(sum / (1.0 + neighbors.len() as f64))
    }

    pub fn total_cost(&self, i: usize, x: &ActionProfile, neighbors: &[usize]) -> Result<f64> {
        Ok(self.local_cost(i, x)? + self.neighbor_avg_cost(i, x, neighbors)?)
    }

    /// `grad_{x_i}` of [`Game::total_cost`].
    pub fn grad_local(
        &self,
        i: usize,
        x: &ActionProfile,
        neighbors: &[usize],
    ) -> Result<[f64; DECISION_DIM]> {
        check_index(i, self.player_count())?;
        let xi = x.get(i)?;
        let scale = gradient_scale(neighbors.len());
        Ok(xi.0.map(|v| scale * v))
    }

    /// Stacked pseudo-gradient `F(x) = [grad_{x_i} J_i(x)]_i`.
    pub fn pseudo_gradient<T: Topology + ?Sized>(
        &self,
        x: &ActionProfile,
        topology: &T,
    ) -> Result<Vec<[f64; DECISION_DIM]>> {
        self.check_profile(x)?;
        if topology.node_count() != self.player_count() {
            return Err(Error::Shape(
                "topology size differs from player count".into(),
            ));
        }
        (0..self.player_count())
            .map(|i| self.grad_local(i, x, topology.neighbors_of(i)))
            .collect()
    }

    pub fn constraint_eval(&self, x_i: &DecisionVector) -> [f64; DECISION_DIM] {
        self.constraints.local(x_i)
    }

    /// First-order certificate of `x` with per-player multipliers.
    ///
    /// With a shared constraint the multipliers have the shared row count
    /// and complementarity/feasibility are measured on `g(x)`; otherwise on
    /// each `g_i(x_i)`. Stationarity is the projected-gradient residual
    /// `||x_i - P(x_i - (grad J_i - Dg_i^T lambda_i))||_inf`, so optima on the
    /// box boundary report zero.
    pub fn kkt_report<T: Topology + ?Sized>(
        &self,
        x: &ActionProfile,
        multipliers: &[Vec<f64>],
        topology: &T,
    ) -> Result<KktReport> {
        let n = self.player_count();
        self.check_profile(x)?;
        if multipliers.len() != n {
            return Err(Error::Shape(format!(
                "{} multiplier vectors for {n} players",
                multipliers.len()
            )));
        }
        let p = self.constraints.multiplier_dim();
        if let Some(bad) = multipliers.iter().find(|m| m.len() != p) {
            return Err(Error::Shape(format!(
                "multiplier of length {}, expected {p}",
                bad.len()
            )));
        }
        let grads = self.pseudo_gradient(x, topology)?;

        let shared_g = match &self.constraints.shared {
            Some(shared) => Some(shared.eval(x)?),
            None => None,
        };

        let mut report = KktReport::default();
        for i in 0..n {
            let lambda = &multipliers[i];
            let xi = &x.0[i];
            let mut r = grads[i];
            let g_i: Vec<f64> = match (&self.constraints.shared, &shared_g) {
                (Some(shared), Some(g)) => {
                    for (row, l) in shared.player_jacobian(i).iter().zip(lambda) {
                        for k in 0..DECISION_DIM {
                            r[k] -= row[k] * l;
                        }
                    }
                    g.clone()
                }
                _ => {
                    for (rk, lk) in r.iter_mut().zip(lambda) {
                        *rk -= lk;
                    }
                    self.constraints.local(xi).to_vec()
                }
            };
            let mut trial = *xi;
            for (t, rk) in trial.0.iter_mut().zip(&r) {
                *t -= rk;
            }
            let projected = self.profiles[i].action_box.project(&trial);
            let stat = (0..DECISION_DIM)
                .map(|k| (xi.0[k] - projected.0[k]).abs())
                .fold(0.0, f64::max);
            let comp: f64 = lambda
                .iter()
                .zip(&g_i)
                .map(|(l, g)| l * g)
                .sum::<f64>()
                .abs();
            let primal = g_i.iter().map(|g| (-g).max(0.0)).fold(0.0, f64::max);
            let dual = lambda.iter().map(|l| (-l).max(0.0)).fold(0.0, f64::max);

            report.stationarity_residual = report.stationarity_residual.max(stat);
            report.complementarity_residual = report.complementarity_residual.max(comp);
            report.primal_feasibility_violation = report.primal_feasibility_violation.max(primal);
            report.dual_feasibility_violation = report.dual_feasibility_violation.max(dual);
        }
        report.multiplier_spread = multiplier_spread(multipliers);
        Ok(report)
    }
}

/// `max_{i,j} ||lambda_i - lambda_j||_inf`, i.e. the widest per-component range.
pub fn multiplier_spread(multipliers: &[Vec<f64>]) -> f64 {
    let Some(first) = multipliers.first() else {
        return 0.0;
    };
    (0..first.len())
        .map(|k| {
            let (lo, hi) = multipliers
                .iter()
                .map(|m| m[k])
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            hi - lo
        })
        .fold(0.0, f64::max)
}
