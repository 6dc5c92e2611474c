//! Proximity communication graphs and their seeded drift.

use std::collections::VecDeque;
use std::io::Write;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};
use crate::game::Topology;

pub const DEFAULT_RADIUS_FT: f64 = 200.0;
pub const DRIFT_RETRIES: usize = 100;
const PLACEMENT_ATTEMPTS: usize = 10_000;
const DRIFT_SALT: u64 = 0x6472_6966_7400_0001;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Undirected unit-weight graph linking players within `radius` feet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProximityGraph {
    positions: Vec<Position>,
    radius: f64,
    /// Sorted neighbor lists.
    neighbors: Vec<Vec<usize>>,
    edge_count: usize,
}

fn cell_of(p: &Position, size: f64) -> (i64, i64) {
    ((p.x / size).floor() as i64, (p.y / size).floor() as i64)
}

impl ProximityGraph {
    pub fn build(positions: Vec<Position>, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Parameter(format!(
                "radius {radius} must be positive"
            )));
        }
        if positions.is_empty() {
            return Err(Error::Parameter("graph needs at least one node".into()));
        }
        if positions
            .iter()
            .any(|p| !(p.x.is_finite() && p.y.is_finite()))
        {
            return Err(Error::Parameter("non-finite position".into()));
        }
        let n = positions.len();
        // Bucket nodes into radius-sized cells; only the 3x3 block around a
        // node can hold its neighbors.
        let mut order: Vec<((i64, i64), usize)> = positions
            .iter()
            .enumerate()
            .map(|(i, p)| (cell_of(p, radius), i))
            .collect();
        order.sort_unstable();
        let mut neighbors = vec![Vec::new(); n];
        let mut edge_count = 0;
        for i in 0..n {
            let (cx, cy) = cell_of(&positions[i], radius);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let cell = (cx + dx, cy + dy);
                    let start = order.partition_point(|(c, _)| *c < cell);
                    for &(c, j) in &order[start..] {
                        if c != cell {
                            break;
                        }
                        if j != i && positions[i].distance(&positions[j]) <= radius {
                            neighbors[i].push(j);
                            if j > i {
                                edge_count += 1;
                            }
                        }
                    }
                }
            }
            neighbors[i].sort_unstable();
        }
        Ok(Self {
            positions,
            radius,
            neighbors,
            edge_count,
        })
    }

    pub fn node_count(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn neighbors(&self, i: usize) -> Result<&[usize]> {
        check_index(i, self.node_count())?;
        Ok(&self.neighbors[i])
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn neighbor_lists(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    /// Edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(i, ns)| ns.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn adjacency(&self) -> DMatrix<f64> {
        let n = self.node_count();
        let mut a = DMatrix::zeros(n, n);
        for (i, ns) in self.neighbors.iter().enumerate() {
            for &j in ns {
                a[(i, j)] = 1.0;
            }
        }
        a
    }

    /// `L = D - A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = -self.adjacency();
        for i in 0..self.node_count() {
            l[(i, i)] = self.degree(i) as f64;
        }
        l
    }

    /// Laplacian spectrum in ascending order.
    pub fn laplacian_eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .laplacian()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn lambda_max(&self) -> f64 {
        self.laplacian_eigenvalues().last().copied().unwrap_or(0.0)
    }

    pub fn algebraic_connectivity(&self) -> f64 {
        self.laplacian_eigenvalues().get(1).copied().unwrap_or(0.0)
    }

    /// Breadth-first reachability from node 0.
    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(i) = queue.pop_front() {
            for &j in &self.neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    reached += 1;
                    queue.push_back(j);
                }
            }
        }
        reached == n
    }

    /// Perturbs every position by an independent uniform draw in
    /// `[-step_ft, step_ft]` per axis. Draws that disconnect the graph are
    /// rejected; after [`DRIFT_RETRIES`] rejections the graph is returned
    /// unchanged. The stream depends only on `(seed, k)`.
    pub fn drift(&self, k: u64, seed: u64, step_ft: f64) -> Result<ProximityGraph> {
        if !(step_ft.is_finite() && step_ft >= 0.0) {
            return Err(Error::Parameter(format!(
                "drift step {step_ft} must be nonnegative"
            )));
        }
        if step_ft == 0.0 {
            return Ok(self.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ DRIFT_SALT);
        rng.set_stream(k);
        for _ in 0..DRIFT_RETRIES {
            let moved: Vec<Position> = self
                .positions
                .iter()
                .map(|p| {
                    Position::new(
                        p.x + rng.random_range(-step_ft..=step_ft),
                        p.y + rng.random_range(-step_ft..=step_ft),
                    )
                })
                .collect();
            let g = ProximityGraph::build(moved, self.radius)?;
            if g.is_connected() {
                return Ok(g);
            }
        }
        Ok(self.clone())
    }

    /// Seeded uniform placement in a `side x side` square, redrawn until connected.
    pub fn place_uniform(n: usize, side_ft: f64, radius: f64, seed: u64) -> Result<ProximityGraph> {
        if n == 0 {
            return Err(Error::Configuration("team size must be positive".into()));
        }
        if !(side_ft.is_finite() && side_ft > 0.0) {
            return Err(Error::Configuration(format!(
                "arena side {side_ft} must be positive"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..PLACEMENT_ATTEMPTS {
            let positions = (0..n)
                .map(|_| {
                    Position::new(
                        rng.random_range(0.0..side_ft),
                        rng.random_range(0.0..side_ft),
                    )
                })
                .collect();
            let g = ProximityGraph::build(positions, radius)?;
            if g.is_connected() {
                return Ok(g);
            }
        }
        Err(Error::Configuration(format!(
            "no connected placement of {n} players in a {side_ft} ft arena with radius {radius} ft"
        )))
    }
}

impl Topology for ProximityGraph {
    fn node_count(&self) -> usize {
        self.positions.len()
    }

    fn neighbors_of(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }
}

/// Edge list `k,i,j,weight` (1-based ids, `i < j`) for each snapshot.
pub fn write_edges_csv<W: Write>(out: W, snapshots: &[(usize, &ProximityGraph)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "i", "j", "weight"])?;
    for (k, g) in snapshots {
        for (i, j) in g.edges() {
            w.write_record([
                k.to_string(),
                (i + 1).to_string(),
                (j + 1).to_string(),
                "1".into(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Node positions `k,i,x_ft,y_ft` (1-based ids) for each snapshot.
pub fn write_nodes_csv<W: Write>(out: W, snapshots: &[(usize, &ProximityGraph)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "i", "x_ft", "y_ft"])?;
    for (k, g) in snapshots {
        for (i, p) in g.positions().iter().enumerate() {
            w.write_record([
                k.to_string(),
                (i + 1).to_string(),
                format!("{}", p.x),
                format!("{}", p.y),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(xs: &[f64]) -> ProximityGraph {
        ProximityGraph::build(xs.iter().map(|&x| Position::new(x, 0.0)).collect(), 200.0).unwrap()
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(line(&[0.0, 150.0]).edge_count(), 1);
        assert_eq!(line(&[0.0, 250.0]).edge_count(), 0);
        assert_eq!(line(&[0.0, 200.0]).edge_count(), 1);
    }

    #[test]
    fn neighbor_examples() {
        let isolated = line(&[0.0, 1000.0]);
        assert!(isolated.neighbors(0).unwrap().is_empty());
        let complete = line(&[0.0, 10.0, 20.0]);
        assert_eq!(complete.neighbors(0).unwrap(), &[1, 2]);
        let path = line(&[0.0, 150.0, 300.0]);
        assert_eq!(path.neighbors(1).unwrap(), &[0, 2]);
        assert!(path.neighbors(3).is_err());
    }

    #[test]
    fn connectivity_examples() {
        assert!(line(&[5.0]).is_connected());
        assert!(!line(&[0.0, 100.0, 900.0, 1000.0]).is_connected());
        assert!(line(&[0.0, 150.0, 300.0, 450.0]).is_connected());
        assert_eq!(line(&[5.0]).lambda_max(), 0.0);
    }

    #[test]
    fn invalid_inputs() {
        assert!(ProximityGraph::build(vec![Position::new(0.0, 0.0)], 0.0).is_err());
        assert!(ProximityGraph::build(vec![], 1.0).is_err());
        assert!(ProximityGraph::build(vec![Position::new(f64::NAN, 0.0)], 1.0).is_err());
        assert!(line(&[0.0, 1.0]).drift(0, 0, -1.0).is_err());
    }

    #[test]
    fn drift_zero_step_and_determinism() {
        let g = ProximityGraph::place_uniform(7, 300.0, 200.0, 4).unwrap();
        assert_eq!(g.drift(3, 9, 0.0).unwrap(), g);
        assert_eq!(g.drift(3, 9, 5.0).unwrap(), g.drift(3, 9, 5.0).unwrap());
        assert_ne!(g.drift(3, 9, 5.0).unwrap(), g.drift(4, 9, 5.0).unwrap());
    }

    #[test]
    fn drift_rejects_disconnecting_moves() {
        // Two nodes exactly at the radius: almost every draw separates them.
        let g = line(&[0.0, 200.0]);
        for k in 0..20 {
            assert!(g.drift(k, 1, 50.0).unwrap().is_connected());
        }
    }

    #[test]
    fn default_layout_stays_connected() {
        let mut g = ProximityGraph::place_uniform(7, 300.0, 200.0, 1).unwrap();
        for k in 1..=500 {
            g = g.drift(k, 1, 5.0).unwrap();
            assert!(g.is_connected());
        }
    }

    #[test]
    fn csv_exports() {
        let g = line(&[0.0, 150.0, 300.0]);
        let mut edges = Vec::new();
        write_edges_csv(&mut edges, &[(0, &g)]).unwrap();
        assert_eq!(
            String::from_utf8(edges).unwrap(),
            "k,i,j,weight\n0,1,2,1\n0,2,3,1\n"
        );
        let mut nodes = Vec::new();
        write_nodes_csv(&mut nodes, &[(2, &g)]).unwrap();
        assert!(String::from_utf8(nodes)
            .unwrap()
            .starts_with("k,i,x_ft,y_ft\n2,1,0,0\n"));
    }

    fn brute_neighbors(ps: &[Position], r: f64) -> Vec<Vec<usize>> {
        (0..ps.len())
            .map(|i| {
                (0..ps.len())
                    .filter(|&j| j != i && ps[i].distance(&ps[j]) <= r)
                    .collect()
            })
            .collect()
    }

    proptest! {
        #[test]
        fn graph_invariants(
            coords in proptest::collection::vec((-500.0..500.0f64, -500.0..500.0f64), 1..30),
            r in 10.0..400.0f64,
        ) {
            let ps: Vec<Position> = coords.iter().map(|&(x, y)| Position::new(x, y)).collect();
            let g = ProximityGraph::build(ps.clone(), r).unwrap();
            let expected = brute_neighbors(&ps, r);
            prop_assert_eq!(g.neighbor_lists(), expected.as_slice());
            let a = g.adjacency();
            prop_assert_eq!(&a, &a.transpose());
            let l = g.laplacian();
            for i in 0..g.node_count() {
                prop_assert_eq!(l.row(i).sum(), 0.0);
                prop_assert_eq!(a[(i, i)], 0.0);
            }
            let spectral = g.node_count() == 1 || g.algebraic_connectivity() > 1e-9;
            prop_assert_eq!(g.is_connected(), spectral);
        }
    }
}
