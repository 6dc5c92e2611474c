//! Physiological and behavioral player model.

pub mod episode;
pub mod metrics;
pub mod transient;

pub use episode::{generate_episode, workload, workloads, Action, Episode, Penalty, TaskEvent};
pub use metrics::{comm_efficiency, engagement, jain_fairness, response_time, VisitLog};
pub use transient::{alacrity, rise_time, settling_time, step_response, TransientParams};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::game::{ActionBox, ActionProfile, DecisionVector, PlayerProfile};

pub const ALACRITY_RANGE: (f64, f64) = (0.5, 1.0);
pub const FAIRNESS_RANGE: (f64, f64) = (0.8, 0.95);
pub const COMM_RANGE: (f64, f64) = (0.9, 1.0);
pub const SKILL_RANGE: (f64, f64) = (0.6, 0.9);
pub const HEART_RATE_RANGE: (f64, f64) = (60.0, 100.0);
pub const DAMPING_RANGE: (f64, f64) = (0.4, 0.8);

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    rng.random_range(lo..=hi)
}

/// Seeded player profiles (unit action boxes) and starting actions.
pub fn sample_initial_state(n: usize, seed: u64) -> Result<(Vec<PlayerProfile>, ActionProfile)> {
    if n < 2 {
        return Err(Error::Parameter(format!("team size {n} below 2")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut profiles = Vec::with_capacity(n);
    let mut actions = Vec::with_capacity(n);
    for i in 0..n {
        let skill = draw(&mut rng, SKILL_RANGE);
        let heart_rate = draw(&mut rng, HEART_RATE_RANGE);
        let damping = draw(&mut rng, DAMPING_RANGE);
        profiles.push(PlayerProfile::new(
            i + 1,
            skill,
            heart_rate,
            damping,
            ActionBox::unit(),
        )?);
        actions.push(DecisionVector::new(
            draw(&mut rng, ALACRITY_RANGE),
            draw(&mut rng, FAIRNESS_RANGE),
            draw(&mut rng, COMM_RANGE),
        ));
    }
    Ok((profiles, ActionProfile::new(actions)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn within((lo, hi): (f64, f64), v: f64) -> bool {
        v >= lo && v <= hi
    }

    #[test]
    fn initial_state_ranges_and_shape() {
        for seed in 0..20 {
            let (profiles, x) = sample_initial_state(7, seed).unwrap();
            assert_eq!(profiles.len(), 7);
            assert_eq!(x.len(), 7);
            for (p, xi) in profiles.iter().zip(x.iter()) {
                assert!(within(SKILL_RANGE, p.skill));
                assert!(within(HEART_RATE_RANGE, p.resting_heart_rate));
                assert!(within(DAMPING_RANGE, p.damping_ratio));
                assert!(within(ALACRITY_RANGE, xi.alacrity()));
                assert!(within(FAIRNESS_RANGE, xi.fairness()));
                assert!(within(COMM_RANGE, xi.comm_efficiency()));
            }
        }
    }

    #[test]
    fn initial_state_deterministic() {
        assert_eq!(
            sample_initial_state(5, 8).unwrap(),
            sample_initial_state(5, 8).unwrap()
        );
        assert_ne!(
            sample_initial_state(5, 8).unwrap().1,
            sample_initial_state(5, 9).unwrap().1
        );
        assert!(sample_initial_state(1, 0).is_err());
    }
}
