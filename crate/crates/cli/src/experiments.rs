//! Experiment drivers: convergence run, scalability sweep, chattering
//! comparison and oracle verification. Each writes its data files into
//! the configured output directory and returns a serializable report.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use resus_gne::clinical::generate_episode;
use resus_gne::network::{write_edges_csv, write_nodes_csv};
use resus_gne::oracle::{
    brute_force_check, solve_centralized, DEFAULT_SLACK, MAX_BRUTE_FORCE_PLAYERS,
};
use resus_gne::solver::{run, write_final_state_csv, IterationRecord};
use resus_gne::{
    build_scenario, KktReport, RunConfig, RunOutput, Scenario, SignumMode, SolverGains,
};

use crate::config::ScenarioConfig;
use crate::error::{CliError, CliResult};

/// Primal gap accepted by `verify`.
pub const VERIFY_GAP: f64 = 1e-3;
pub const ORACLE_TOL: f64 = 1e-9;
pub const BRUTE_FORCE_GRID: f64 = 0.05;

fn create(dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Output {
            path: path.display().to_string(),
            source,
        })
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Output {
        path: dir.display().to_string(),
        source,
    })
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|source| CliError::Output {
            path: dir.join(name).display().to_string(),
            source,
        })
}

/// Gains derived from the initial graph, with explicit config values
/// taking precedence.
pub fn gains_for(cfg: &ScenarioConfig, scenario: &Scenario, mode: SignumMode) -> SolverGains {
    let mut g = SolverGains::derive(
        &scenario.graph,
        mode,
        cfg.alpha,
        cfg.h,
        cfg.consensus_rounds,
    );
    if let Some(v) = cfg.gamma {
        g.gamma = v;
    }
    if let Some(v) = cfg.kappa {
        g.kappa = v;
    }
    if let Some(v) = cfg.rho {
        g.rho = v;
    }
    g
}

pub fn run_config(cfg: &ScenarioConfig, gains: SolverGains, mode: SignumMode) -> RunConfig {
    RunConfig {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
        drift_step_ft: cfg.drift_step_ft,
        drift_decay: cfg.drift_decay,
        record_wall_time: cfg.record_wall_time,
        parallel: cfg.parallel,
        ..RunConfig::new(gains, mode, cfg.seed)
    }
}

/// A solved scenario together with the gains it was solved with.
pub struct Solved {
    pub scenario: Scenario,
    pub gains: SolverGains,
    pub output: RunOutput,
}

impl Solved {
    pub fn kkt(&self) -> CliResult<KktReport> {
        let mult = self.output.game_multipliers(&self.gains);
        Ok(self.scenario.game.kkt_report(
            &self.output.final_state.x,
            &mult,
            &self.output.final_graph,
        )?)
    }
}

/// Builds the size-`n` scenario and runs the dynamics under `cfg`.
pub fn solve(cfg: &ScenarioConfig, n: usize) -> CliResult<Solved> {
    cfg.validate()?;
    let scenario = build_scenario(&cfg.scenario_params(n))?;
    let gains = gains_for(cfg, &scenario, cfg.signum);
    let output = run(
        &scenario.game,
        scenario.x0.clone(),
        &scenario.graph,
        &run_config(cfg, gains, cfg.signum),
    )?;
    Ok(Solved {
        scenario,
        gains,
        output,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub n: usize,
    pub seed: u64,
    pub signum: String,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: f64,
    pub max_dual_norm: f64,
    pub initial_edge_count: usize,
    pub final_edge_count: usize,
    pub kkt: KktReport,
    pub gain_warnings: Vec<String>,
}

impl RunReport {
    pub fn render(&self) -> String {
        let status = if self.converged {
            "converged"
        } else {
            "not converged"
        };
        let mut s = format!(
            "run n={} seed={} signum={}: {status} after {} iterations\n\
             final residual {:.3e}, max dual norm {:.4}, edges {} -> {}\n\
             kkt: stationarity {:.3e}, complementarity {:.3e}, feasibility {:.3e}, spread {:.3e}\n",
            self.n,
            self.seed,
            self.signum,
            self.iterations,
            self.final_residual,
            self.max_dual_norm,
            self.initial_edge_count,
            self.final_edge_count,
            self.kkt.stationarity_residual,
            self.kkt.complementarity_residual,
            self.kkt.primal_feasibility_violation,
            self.kkt.multiplier_spread,
        );
        for w in &self.gain_warnings {
            s.push_str(&format!("warning: {w}\n"));
        }
        s
    }
}

/// Default convergence experiment: trace, final state, graph snapshots,
/// the team's synthetic episode and a JSON summary.
pub fn cmd_run(cfg: &ScenarioConfig) -> CliResult<RunReport> {
    let solved = solve(cfg, cfg.n)?;
    let out = &solved.output;
    let dir = cfg.out.as_path();
    ensure_dir(dir)?;

    out.trace.write_csv(create(dir, "trace.csv")?)?;
    write_final_state_csv(
        create(dir, "final_state.csv")?,
        &out.final_state.x,
        &out.final_state.lambda,
    )?;
    // iteration k ran on the graph after k - 1 drift steps
    let last = out.iterations.saturating_sub(1);
    let mut snaps = vec![(0, &out.initial_graph)];
    if last > 0 {
        snaps.push((last, &out.final_graph));
    }
    write_edges_csv(create(dir, "edges.csv")?, &snaps)?;
    write_nodes_csv(create(dir, "nodes.csv")?, &snaps)?;
    generate_episode(cfg.n, cfg.duration_s, cfg.seed)?.write_csv(create(dir, "episode.csv")?)?;

    let report = RunReport {
        n: cfg.n,
        seed: cfg.seed,
        signum: cfg.signum.to_string(),
        iterations: out.iterations,
        converged: out.converged,
        final_residual: out.trace.last_residual().unwrap_or(f64::NAN),
        max_dual_norm: out.trace.max_dual_norm(),
        initial_edge_count: out.initial_graph.edge_count(),
        final_edge_count: out.final_graph.edge_count(),
        kkt: solved.kkt()?,
        gain_warnings: out.gain_check.warnings(),
    };
    write_json(dir, "summary.json", &report)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub iterations: usize,
    pub mean_iter_wall_time_s: f64,
    pub edge_count: usize,
}

/// Least-squares fit `t = intercept + slope * z`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub sse: f64,
}

pub fn fit_line(z: &[f64], t: &[f64]) -> CliResult<LineFit> {
    if z.len() != t.len() || z.len() < 2 {
        return Err(CliError::Config(
            "a line fit needs at least two points".into(),
        ));
    }
    let m = z.len() as f64;
    let zbar = z.iter().sum::<f64>() / m;
    let tbar = t.iter().sum::<f64>() / m;
    let szz: f64 = z.iter().map(|v| (v - zbar).powi(2)).sum();
    let szt: f64 = z.iter().zip(t).map(|(a, b)| (a - zbar) * (b - tbar)).sum();
    let slope = if szz > 0.0 { szt / szz } else { 0.0 };
    let intercept = tbar - slope * zbar;
    let sse = z
        .iter()
        .zip(t)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    Ok(LineFit {
        intercept,
        slope,
        sse,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// `t = a + b (n + |E|)`.
    pub linear: Option<LineFit>,
    /// `t = a + c n^2`.
    pub quadratic: Option<LineFit>,
    /// Iterations at the largest size over iterations at the smallest.
    pub iteration_ratio: f64,
}

impl SweepReport {
    pub fn render(&self) -> String {
        let mut s = String::from("n,iterations,mean_iter_wall_time_s,edge_count\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{:.3e},{}\n",
                r.n, r.iterations, r.mean_iter_wall_time_s, r.edge_count
            ));
        }
        s.push_str(&format!("iteration ratio {:.3}\n", self.iteration_ratio));
        if let (Some(l), Some(q)) = (&self.linear, &self.quadratic) {
            s.push_str(&format!(
                "linear in n+|E|: sse {:.3e}; quadratic in n: sse {:.3e}\n",
                l.sse, q.sse
            ));
        }
        s
    }
}

/// Runs each team size, keeping the fastest of `sweep_repeats` timings.
/// Repeats are interleaved across sizes so that a burst of load on the
/// machine slows one repeat of every size rather than every repeat of one.
/// Iteration counts are identical across repeats.
pub fn cmd_sweep(cfg: &ScenarioConfig) -> CliResult<SweepReport> {
    cfg.validate()?;
    let dir = cfg.out.as_path();
    ensure_dir(dir)?;
    let mut rows: Vec<SweepRow> = Vec::new();
    for rep in 0..cfg.sweep_repeats {
        for (idx, &n) in cfg.sweep_n.iter().enumerate() {
            let solved = solve(cfg, n)?;
            let out = &solved.output;
            let t = out.elapsed_s / out.iterations.max(1) as f64;
            if rep == 0 {
                rows.push(SweepRow {
                    n,
                    iterations: out.iterations,
                    mean_iter_wall_time_s: t,
                    edge_count: solved.scenario.graph.edge_count(),
                });
            } else {
                let row = &mut rows[idx];
                row.mean_iter_wall_time_s = row.mean_iter_wall_time_s.min(t);
            }
        }
    }

    let mut w = csv::Writer::from_writer(create(dir, "sweep.csv")?);
    w.write_record(["n", "iterations", "mean_iter_wall_time_s", "edge_count"])
        .map_err(resus_gne::Error::from)?;
    for r in &rows {
        w.write_record([
            r.n.to_string(),
            r.iterations.to_string(),
            format!("{}", r.mean_iter_wall_time_s),
            r.edge_count.to_string(),
        ])
        .map_err(resus_gne::Error::from)?;
    }
    w.flush().map_err(resus_gne::Error::from)?;

    let t: Vec<f64> = rows.iter().map(|r| r.mean_iter_wall_time_s).collect();
    let (linear, quadratic) = if rows.len() >= 2 {
        let lin: Vec<f64> = rows.iter().map(|r| (r.n + r.edge_count) as f64).collect();
        let quad: Vec<f64> = rows.iter().map(|r| (r.n * r.n) as f64).collect();
        (Some(fit_line(&lin, &t)?), Some(fit_line(&quad, &t)?))
    } else {
        (None, None)
    };
    let smallest = rows.iter().min_by_key(|r| r.n).expect("nonempty sweep");
    let largest = rows.iter().max_by_key(|r| r.n).expect("nonempty sweep");
    let report = SweepReport {
        iteration_ratio: largest.iterations as f64 / smallest.iterations as f64,
        rows,
        linear,
        quadratic,
    };
    write_json(dir, "sweep_fit.json", &report)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct ChatterMode {
    pub signum: String,
    pub iterations: usize,
    /// Sum of `|lambda_k - lambda_{k-1}|` over players, components and
    /// iterations after the convergence point.
    pub total_variation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChatterReport {
    pub n: usize,
    /// Iteration at which the smoothed run first met `tol`.
    pub convergence_iteration: usize,
    pub discontinuous: ChatterMode,
    pub smoothed: ChatterMode,
    pub primal_gap: f64,
}

impl ChatterReport {
    pub fn variation_ratio(&self) -> f64 {
        self.smoothed.total_variation / self.discontinuous.total_variation
    }

    pub fn render(&self) -> String {
        format!(
            "chatter n={} (converged at iteration {}):\n\
             {}: total variation {:.4e}\n{}: total variation {:.4e}\n\
             ratio {:.4}, final primal gap {:.3e}\n",
            self.n,
            self.convergence_iteration,
            self.discontinuous.signum,
            self.discontinuous.total_variation,
            self.smoothed.signum,
            self.smoothed.total_variation,
            self.variation_ratio(),
            self.primal_gap,
        )
    }
}

pub fn total_variation(history: &[IterationRecord], from: usize) -> f64 {
    (from.max(1)..history.len())
        .map(|k| {
            history[k]
                .lambda
                .iter()
                .flatten()
                .zip(history[k - 1].lambda.iter().flatten())
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
        })
        .sum()
}

/// `k,lambda_<i>_<r>...,neighbor_cost_<i>...` with 1-based `k`, `i`, `r`.
pub fn write_history_csv<W: Write>(out: W, history: &[IterationRecord]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    let (n, p) = history.first().map_or((0, 0), |h| {
        (h.lambda.len(), h.lambda.first().map_or(0, Vec::len))
    });
    let mut header = vec!["k".to_string()];
    for i in 1..=n {
        header.extend((1..=p).map(|r| format!("lambda_{i}_{r}")));
    }
    header.extend((1..=n).map(|i| format!("neighbor_cost_{i}")));
    w.write_record(&header).map_err(resus_gne::Error::from)?;
    for (k, h) in history.iter().enumerate() {
        let mut rec = vec![(k + 1).to_string()];
        rec.extend(h.lambda.iter().flatten().map(|v| format!("{v}")));
        rec.extend(h.neighbor_costs.iter().map(|v| format!("{v}")));
        w.write_record(&rec).map_err(resus_gne::Error::from)?;
    }
    w.flush().map_err(resus_gne::Error::from)?;
    Ok(())
}

/// Same scenario and gains under discontinuous and smoothed signum. The
/// smoothed run fixes the convergence point; both runs then continue for
/// `chatter_tail` iterations past it with the stopping test disabled.
pub fn cmd_chatter(cfg: &ScenarioConfig) -> CliResult<ChatterReport> {
    cfg.validate()?;
    let smooth = match cfg.signum {
        SignumMode::Discontinuous => SignumMode::default(),
        m => m,
    };
    let scenario = build_scenario(&cfg.scenario_params(cfg.chatter_n))?;
    let gains = gains_for(cfg, &scenario, smooth);
    let probe = run(
        &scenario.game,
        scenario.x0.clone(),
        &scenario.graph,
        &run_config(cfg, gains, smooth),
    )?;
    let k_conv = probe.iterations;

    let dir = cfg.out.as_path();
    ensure_dir(dir)?;
    let mut modes = Vec::new();
    for (mode, file) in [
        (SignumMode::Discontinuous, "chatter_discontinuous.csv"),
        (smooth, "chatter_smoothed.csv"),
    ] {
        let rc = RunConfig {
            tol: 0.0,
            max_iter: k_conv + cfg.chatter_tail,
            record_history: true,
            ..run_config(cfg, gains, mode)
        };
        let out = run(&scenario.game, scenario.x0.clone(), &scenario.graph, &rc)?;
        write_history_csv(create(dir, file)?, &out.history)?;
        modes.push((
            ChatterMode {
                signum: mode.to_string(),
                iterations: out.iterations,
                total_variation: total_variation(&out.history, k_conv),
            },
            out.final_state.x,
        ));
    }
    let (smoothed, xs) = modes.pop().expect("two modes");
    let (discontinuous, xd) = modes.pop().expect("two modes");
    let report = ChatterReport {
        n: cfg.chatter_n,
        convergence_iteration: k_conv,
        primal_gap: xd.max_abs_diff(&xs)?,
        discontinuous,
        smoothed,
    };
    write_json(dir, "chatter.json", &report)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub n: usize,
    pub iterations: usize,
    pub converged: bool,
    pub primal_gap: f64,
    /// Largest difference between a player's multiplier and the oracle's.
    pub multiplier_gap: f64,
    pub kkt: KktReport,
    pub oracle_iterations: usize,
    pub oracle_kkt_residual: f64,
    pub brute_force_ok: bool,
    pub gain_warnings: Vec<String>,
    pub passed: bool,
}

impl VerifyReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        for w in &self.gain_warnings {
            s.push_str(&format!("warning: {w}\n"));
        }
        s.push_str(&format!(
            "verify n={}: distributed {} iterations ({}), oracle {} iterations\n\
             primal gap {:.3e}, multiplier gap {:.3e}, spread {:.3e}\n\
             kkt: stationarity {:.3e}, complementarity {:.3e}, feasibility {:.3e}\n\
             brute force at grid {BRUTE_FORCE_GRID}: {}\n{}\n",
            self.n,
            self.iterations,
            if self.converged {
                "converged"
            } else {
                "not converged"
            },
            self.oracle_iterations,
            self.primal_gap,
            self.multiplier_gap,
            self.kkt.multiplier_spread,
            self.kkt.stationarity_residual,
            self.kkt.complementarity_residual,
            self.kkt.primal_feasibility_violation,
            if self.brute_force_ok { "pass" } else { "fail" },
            if self.passed { "PASS" } else { "FAIL" },
        ));
        s
    }
}

/// Distributed run at `verify_tol` against the centralized oracle on the
/// run's final graph.
pub fn cmd_verify(cfg: &ScenarioConfig) -> CliResult<VerifyReport> {
    cfg.validate()?;
    if cfg.n > MAX_BRUTE_FORCE_PLAYERS {
        return Err(CliError::Config(format!(
            "verify supports at most {MAX_BRUTE_FORCE_PLAYERS} players, got n = {}",
            cfg.n
        )));
    }
    let tight = ScenarioConfig {
        tol: cfg.verify_tol,
        ..cfg.clone()
    };
    let solved = solve(&tight, cfg.n)?;
    let out = &solved.output;
    let game = &solved.scenario.game;
    let oracle = solve_centralized(game, &out.final_graph, ORACLE_TOL)?;
    let mult = out.game_multipliers(&solved.gains);
    let multiplier_gap = mult
        .iter()
        .flat_map(|l| l.iter().zip(&oracle.lambda).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    let primal_gap = out.final_state.x.max_abs_diff(&oracle.x)?;
    let brute_force_ok = brute_force_check(
        game,
        &out.final_graph,
        &out.final_state.x,
        BRUTE_FORCE_GRID,
        DEFAULT_SLACK,
    )?;
    let report = VerifyReport {
        n: cfg.n,
        iterations: out.iterations,
        converged: out.converged,
        primal_gap,
        multiplier_gap,
        kkt: solved.kkt()?,
        oracle_iterations: oracle.iterations,
        oracle_kkt_residual: oracle.kkt_residual,
        brute_force_ok,
        gain_warnings: out.gain_check.warnings(),
        passed: primal_gap < VERIFY_GAP,
    };
    let dir = cfg.out.as_path();
    ensure_dir(dir)?;
    write_json(dir, "verify.json", &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn line_fit_recovers_exact_line() {
        let z = [1.0, 2.0, 4.0, 8.0];
        let t: Vec<f64> = z.iter().map(|v| 0.5 + 3.0 * v).collect();
        let f = fit_line(&z, &t).unwrap();
        assert_relative_eq!(f.slope, 3.0, epsilon = 1e-12);
        assert_relative_eq!(f.intercept, 0.5, epsilon = 1e-12);
        assert!(f.sse < 1e-20);
        assert!(fit_line(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn line_fit_sse_matches_hand_computation() {
        // points (0,0), (1,1), (2,0): best line t = 1/3, residuals -1/3, 2/3, -1/3
        let f = fit_line(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.0]).unwrap();
        assert_relative_eq!(f.slope, 0.0, epsilon = 1e-15);
        assert_relative_eq!(f.sse, 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn total_variation_counts_tail_only() {
        let rec = |v: f64| IterationRecord {
            lambda: vec![vec![v, 0.0], vec![0.0, -v]],
            neighbor_costs: vec![0.0, 0.0],
        };
        let h: Vec<_> = [0.0, 1.0, 0.5, 0.5, 2.0].into_iter().map(rec).collect();
        assert_eq!(total_variation(&h, 0), 2.0 * (1.0 + 0.5 + 0.0 + 1.5));
        assert_eq!(total_variation(&h, 3), 2.0 * 1.5);
        assert_eq!(total_variation(&h, 10), 0.0);
    }

    #[test]
    fn history_csv_layout() {
        let h = vec![IterationRecord {
            lambda: vec![vec![0.5, 0.25]; 2],
            neighbor_costs: vec![1.0, 2.0],
        }];
        let mut buf = Vec::new();
        write_history_csv(&mut buf, &h).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "k,lambda_1_1,lambda_1_2,lambda_2_1,lambda_2_2,neighbor_cost_1,neighbor_cost_2\n\
             1,0.5,0.25,0.5,0.25,1,2\n"
        );
    }
}
