//! Synthetic advanced-life-support episodes.
//!
//! The team acts on a fixed time grid with one atomic action per agent per
//! step. Two-minute CPR cycles are punctuated by rhythm checks; a shockable
//! rhythm leads to a shock on the following step, epinephrine is given every
//! four minutes and the last step is a ROSC assessment. Remaining agents
//! fill in with airway management or team communication.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_index, Error, Result};

pub const DEFAULT_DURATION_S: f64 = 1200.0;
pub const GRID_STEP_S: f64 = 10.0;
pub const CPR_CYCLE_S: f64 = 120.0;
pub const EPI_INTERVAL_S: f64 = 240.0;
pub const EPI_OFFSET_S: f64 = 20.0;
pub const SHOCKABLE_PROBABILITY: f64 = 0.5;
pub const PENALTY_PROBABILITY: f64 = 0.05;
const WEIGHT_JITTER: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Cpr,
    Shock,
    RhythmCheck,
    AirwayMgmt,
    Epi,
    TeamComm,
    RoscAssess,
}

impl Action {
    pub const ALL: [Action; 7] = [
        Action::Cpr,
        Action::Shock,
        Action::RhythmCheck,
        Action::AirwayMgmt,
        Action::Epi,
        Action::TeamComm,
        Action::RoscAssess,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Action::Cpr => "CPR",
            Action::Shock => "SHOCK",
            Action::RhythmCheck => "RHYTHM_CHECK",
            Action::AirwayMgmt => "AIRWAY_MGMT",
            Action::Epi => "EPI",
            Action::TeamComm => "TEAM_COMM",
            Action::RoscAssess => "ROSC_ASSESS",
        }
    }

    /// Nominal task weight before jitter.
    pub fn base_weight(self) -> f64 {
        match self {
            Action::Cpr => 0.9,
            Action::Shock => 1.0,
            Action::RhythmCheck => 0.7,
            Action::AirwayMgmt => 0.6,
            Action::Epi => 0.8,
            Action::TeamComm => 0.4,
            Action::RoscAssess => 0.7,
        }
    }

    fn role(self) -> Role {
        match self {
            Action::Cpr => Role::Compressor,
            Action::Shock | Action::RhythmCheck => Role::Monitor,
            Action::AirwayMgmt => Role::Airway,
            Action::Epi => Role::Medication,
            Action::TeamComm | Action::RoscAssess => Role::Leader,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Action::ALL
            .into_iter()
            .find(|a| a.label() == s)
            .ok_or_else(|| Error::Parse(format!("unknown action {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Penalty {
    SuboptimalRole,
    LowAlacrity,
    LowEnergy,
}

impl Penalty {
    pub const ALL: [Penalty; 3] = [
        Penalty::SuboptimalRole,
        Penalty::LowAlacrity,
        Penalty::LowEnergy,
    ];

    pub fn value(self) -> f64 {
        match self {
            Penalty::SuboptimalRole => -1.0,
            Penalty::LowAlacrity | Penalty::LowEnergy => -0.5,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Penalty::SuboptimalRole => "suboptimal_role",
            Penalty::LowAlacrity => "low_alacrity",
            Penalty::LowEnergy => "low_energy",
        }
    }
}

impl FromStr for Penalty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Penalty::ALL
            .into_iter()
            .find(|p| p.label() == s)
            .ok_or_else(|| Error::Parse(format!("unknown penalty {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    Compressor,
    Airway,
    Monitor,
    Medication,
    Leader,
}

const ROLE_CYCLE: [Role; 6] = [
    Role::Compressor,
    Role::Compressor,
    Role::Airway,
    Role::Monitor,
    Role::Medication,
    Role::Leader,
];

fn role_of(agent: usize) -> Role {
    ROLE_CYCLE[agent % ROLE_CYCLE.len()]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskEvent {
    pub timestamp_s: f64,
    /// 0-based agent index.
    pub agent: usize,
    pub action: Action,
    pub delta: f64,
    pub penalties: Vec<Penalty>,
}

impl TaskEvent {
    pub fn penalty_total(&self) -> f64 {
        self.penalties.iter().map(|p| p.value()).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub team_size: usize,
    pub duration_s: f64,
    pub seed: u64,
    pub events: Vec<TaskEvent>,
}

fn grid_steps(duration_s: f64) -> usize {
    (duration_s / GRID_STEP_S).floor() as usize
}

fn is_multiple(t: f64, period: f64, offset: f64) -> bool {
    ((t - offset) / period).fract() == 0.0 && t >= offset
}

pub fn generate_episode(n: usize, duration_s: f64, seed: u64) -> Result<Episode> {
    if n < 2 {
        return Err(Error::Parameter(format!("team size {n} below 2")));
    }
    if !(duration_s.is_finite() && duration_s >= GRID_STEP_S) {
        return Err(Error::Parameter(format!(
            "duration {duration_s} s shorter than one grid step"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = grid_steps(duration_s);
    let mut events = Vec::with_capacity(steps * n);
    let mut shock_due = false;

    for k in 0..steps {
        let t = k as f64 * GRID_STEP_S;
        let cycle = (t / CPR_CYCLE_S).floor() as usize;
        let check = is_multiple(t, CPR_CYCLE_S, 0.0);

        let mut required = Vec::new();
        if k + 1 == steps {
            required.push(Action::RoscAssess);
        }
        if check {
            required.push(Action::RhythmCheck);
        }
        if shock_due {
            required.push(Action::Shock);
            shock_due = false;
        }
        if is_multiple(t, EPI_INTERVAL_S, EPI_OFFSET_S) {
            required.push(Action::Epi);
        }
        // compressions pause for rhythm checks and the final pulse check
        let last = k + 1 == steps;
        if !check && !last {
            required.push(Action::Cpr);
        }
        if check {
            shock_due = rng.random_bool(SHOCKABLE_PROBABILITY);
        }

        let mut assigned: Vec<Option<(Action, bool)>> = vec![None; n];
        for action in required {
            // compressors swap every cycle
            let matching = (0..n)
                .map(|j| {
                    if action == Action::Cpr {
                        (j + cycle) % n
                    } else {
                        j
                    }
                })
                .find(|&j| assigned[j].is_none() && role_of(j) == action.role());
            match matching {
                Some(j) => assigned[j] = Some((action, false)),
                None => {
                    if let Some(j) = (0..n).find(|&j| assigned[j].is_none()) {
                        assigned[j] = Some((action, true));
                    }
                }
            }
        }

        for (agent, slot) in assigned.into_iter().enumerate() {
            let (action, mismatched) = slot.unwrap_or_else(|| {
                let fill = if role_of(agent) == Role::Airway {
                    Action::AirwayMgmt
                } else {
                    Action::TeamComm
                };
                (fill, false)
            });
            let jitter = rng.random_range(-WEIGHT_JITTER..=WEIGHT_JITTER);
            let delta = (action.base_weight() + jitter).clamp(0.0, 1.0);
            let mut penalties = Vec::new();
            if mismatched {
                penalties.push(Penalty::SuboptimalRole);
            }
            if rng.random_bool(PENALTY_PROBABILITY) {
                penalties.push(Penalty::LowAlacrity);
            }
            if rng.random_bool(PENALTY_PROBABILITY) {
                penalties.push(Penalty::LowEnergy);
            }
            events.push(TaskEvent {
                timestamp_s: t,
                agent,
                action,
                delta,
                penalties,
            });
        }
    }

    Ok(Episode {
        team_size: n,
        duration_s,
        seed,
        events,
    })
}

impl Episode {
    pub fn grid_steps(&self) -> usize {
        grid_steps(self.duration_s)
    }

    /// Checks ordering, grid coverage, weights, penalties and the ALS cycle.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        let n = self.team_size;
        let steps = self.grid_steps();
        if self.events.len() != n * steps {
            return bad(format!(
                "{} events, expected {} ({} agents x {} steps)",
                self.events.len(),
                n * steps,
                n,
                steps
            ));
        }
        for (k, block) in self.events.chunks(n).enumerate() {
            let t = k as f64 * GRID_STEP_S;
            let mut seen = vec![false; n];
            let count = |a: Action| block.iter().filter(|e| e.action == a).count();
            let checks = count(Action::RhythmCheck);
            let cprs = count(Action::Cpr);
            let shocks = count(Action::Shock);
            let epis = count(Action::Epi);
            let roscs = count(Action::RoscAssess);
            for e in block {
                if e.timestamp_s != t {
                    return bad(format!("event at {} s in grid step {t} s", e.timestamp_s));
                }
                if e.timestamp_s < 0.0 || e.timestamp_s > self.duration_s {
                    return bad(format!("timestamp {} outside episode", e.timestamp_s));
                }
                if e.agent >= n || seen[e.agent] {
                    return bad(format!(
                        "agent {} repeated or out of range at {t} s",
                        e.agent
                    ));
                }
                seen[e.agent] = true;
                if !(0.0..=1.0).contains(&e.delta) {
                    return bad(format!("weight {} outside [0, 1]", e.delta));
                }
                let mut p = e.penalties.clone();
                p.sort();
                p.dedup();
                if p.len() != e.penalties.len() {
                    return bad(format!("duplicate penalty at {t} s"));
                }
            }
            let is_check = is_multiple(t, CPR_CYCLE_S, 0.0);
            if is_check != (checks == 1) || checks > 1 {
                return bad(format!("rhythm check misplaced at {t} s"));
            }
            let expect_cpr = !is_check && k + 1 != steps;
            if expect_cpr != (cprs == 1) || cprs > 1 {
                return bad(format!("CPR block broken at {t} s"));
            }
            if shocks > 0 {
                let follows_check = k > 0 && is_multiple(t - GRID_STEP_S, CPR_CYCLE_S, 0.0);
                if shocks > 1 || !follows_check {
                    return bad(format!("shock without preceding rhythm check at {t} s"));
                }
            }
            if is_multiple(t, EPI_INTERVAL_S, EPI_OFFSET_S) != (epis == 1) || epis > 1 {
                return bad(format!("epinephrine schedule broken at {t} s"));
            }
            if (k + 1 == steps) != (roscs == 1) || roscs > 1 {
                return bad(format!("ROSC assessment misplaced at {t} s"));
            }
        }
        Ok(())
    }

    /// Writes `timestamp_s,agent_id,action,delta,penalties` with 1-based ids.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["timestamp_s", "agent_id", "action", "delta", "penalties"])?;
        for e in &self.events {
            let penalties: Vec<&str> = e.penalties.iter().map(|p| p.label()).collect();
            w.write_record([
                format!("{}", e.timestamp_s),
                (e.agent + 1).to_string(),
                e.action.label().to_string(),
                format!("{}", e.delta),
                penalties.join(";"),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(
        input: R,
        team_size: usize,
        duration_s: f64,
        seed: u64,
    ) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut events = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != 5 {
                return Err(Error::Parse(format!(
                    "expected 5 fields, got {}",
                    rec.len()
                )));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse()
                    .map_err(|_| Error::Parse(format!("bad number {s:?}")))
            };
            let agent: usize = rec[1]
                .parse()
                .map_err(|_| Error::Parse(format!("bad agent id {:?}", &rec[1])))?;
            if agent == 0 {
                return Err(Error::Parse("agent ids are 1-based".into()));
            }
            let penalties = if rec[4].is_empty() {
                Vec::new()
            } else {
                rec[4]
                    .split(';')
                    .map(Penalty::from_str)
                    .collect::<Result<_>>()?
            };
            events.push(TaskEvent {
                timestamp_s: num(&rec[0])?,
                agent: agent - 1,
                action: rec[2].parse()?,
                delta: num(&rec[3])?,
                penalties,
            });
        }
        Ok(Self {
            team_size,
            duration_s,
            seed,
            events,
        })
    }
}

/// Sum of task weights plus penalties for `agent` over events up to time `t`.
pub fn workload(agent: usize, episode: &Episode, t: f64) -> Result<f64> {
    check_index(agent, episode.team_size)?;
    Ok(episode
        .events
        .iter()
        .filter(|e| e.agent == agent && e.timestamp_s <= t)
        .map(|e| e.delta + e.penalty_total())
        .sum())
}

/// Workloads of every agent at time `t`.
pub fn workloads(episode: &Episode, t: f64) -> Vec<f64> {
    let mut w = vec![0.0; episode.team_size];
    for e in episode.events.iter().filter(|e| e.timestamp_s <= t) {
        w[e.agent] += e.delta + e.penalty_total();
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    fn episode_of(events: Vec<TaskEvent>) -> Episode {
        Episode {
            team_size: 2,
            duration_s: 20.0,
            seed: 0,
            events,
        }
    }

    fn ev(agent: usize, delta: f64, penalties: Vec<Penalty>) -> TaskEvent {
        TaskEvent {
            timestamp_s: 0.0,
            agent,
            action: Action::Cpr,
            delta,
            penalties,
        }
    }

    #[test]
    fn workload_examples() {
        let none = episode_of(vec![ev(1, 0.5, vec![])]);
        assert_eq!(workload(0, &none, 20.0).unwrap(), 0.0);

        let two = episode_of(vec![ev(0, 0.6, vec![]), ev(0, 0.8, vec![])]);
        assert!((workload(0, &two, 20.0).unwrap() - 1.4).abs() < 1e-12);

        let penalized = episode_of(vec![ev(0, 0.6, vec![Penalty::SuboptimalRole])]);
        assert!((workload(0, &penalized, 20.0).unwrap() + 0.4).abs() < 1e-12);
        assert!(workload(2, &penalized, 20.0).is_err());
    }

    #[test]
    fn grid_arithmetic() {
        let e = generate_episode(7, DEFAULT_DURATION_S, 3).unwrap();
        assert_eq!(e.grid_steps(), 120);
        assert_eq!(e.events.len(), 840);
        e.validate().unwrap();
    }

    #[test]
    fn rhythm_checks_on_two_minute_grid() {
        let e = generate_episode(7, DEFAULT_DURATION_S, 11).unwrap();
        let checks: Vec<f64> = e
            .events
            .iter()
            .filter(|ev| ev.action == Action::RhythmCheck)
            .map(|ev| ev.timestamp_s)
            .collect();
        assert_eq!(checks.len(), 10);
        assert!(checks.iter().all(|t| t % 120.0 == 0.0));
    }

    #[test]
    fn same_seed_same_bytes() {
        let mut a = Vec::new();
        let mut b = Vec::new();
        generate_episode(5, 600.0, 42)
            .unwrap()
            .write_csv(&mut a)
            .unwrap();
        generate_episode(5, 600.0, 42)
            .unwrap()
            .write_csv(&mut b)
            .unwrap();
        assert_eq!(a, b);
        let mut c = Vec::new();
        generate_episode(5, 600.0, 43)
            .unwrap()
            .write_csv(&mut c)
            .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn csv_round_trip() {
        let e = generate_episode(4, 300.0, 9).unwrap();
        let mut buf = Vec::new();
        e.write_csv(&mut buf).unwrap();
        let back = Episode::read_csv(buf.as_slice(), 4, 300.0, 9).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn small_teams_flag_role_mismatch() {
        let e = generate_episode(2, 300.0, 1).unwrap();
        e.validate().unwrap();
        assert!(e
            .events
            .iter()
            .any(|ev| ev.penalties.contains(&Penalty::SuboptimalRole)));
    }

    #[test]
    fn validate_catches_corruption() {
        let mut e = generate_episode(3, 240.0, 5).unwrap();
        e.events[4].agent = e.events[3].agent;
        assert!(e.validate().is_err());

        let mut e = generate_episode(3, 240.0, 5).unwrap();
        e.events.pop();
        assert!(e.validate().is_err());

        let mut e = generate_episode(3, 240.0, 5).unwrap();
        let cpr = e
            .events
            .iter()
            .position(|ev| ev.action == Action::Cpr)
            .unwrap();
        e.events[cpr].action = Action::RhythmCheck;
        assert!(e.validate().is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(generate_episode(1, 1200.0, 0).is_err());
        assert!(generate_episode(3, 0.0, 0).is_err());
    }
}
