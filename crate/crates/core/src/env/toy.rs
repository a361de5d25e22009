//! Tiny two-armed sanity environment for the training loop: pressing the
//! beneficial arm and then stopping earns 1.0, anything else earns 0.

use super::{EnvError, Environment, EpisodeSummary, StepInfo, StepOutcome};
use crate::manip::Action;
use alloc::vec;
use alloc::vec::Vec;

pub const TOY_OBS_DIM: usize = 8;

/// Reward 1 for stopping at t >= 1 after the beneficial action, else 0.
#[derive(Debug, Clone)]
pub struct ToyEnv {
    t: u32,
    did_beneficial: bool,
    time_limit: u32,
    beneficial_action: usize,
}

impl Default for ToyEnv {
    fn default() -> Self {
        ToyEnv::new(15)
    }
}

impl ToyEnv {
    pub fn new(time_limit: u32) -> Self {
        ToyEnv {
            t: 0,
            did_beneficial: false,
            time_limit,
            beneficial_action: Action::DeleteFnBodiesAll.index(),
        }
    }

    fn observation(&self) -> Vec<f64> {
        let mut obs = vec![0.0; TOY_OBS_DIM];
        obs[0] = self.t as f64 / self.time_limit as f64;
        obs[1] = if self.did_beneficial { 1.0 } else { 0.0 };
        obs[2] = 1.0;
        obs
    }
}

impl Environment for ToyEnv {
    fn obs_dim(&self) -> usize {
        TOY_OBS_DIM
    }

    fn n_actions(&self) -> usize {
        Action::COUNT
    }

    fn reset(&mut self) -> Result<Vec<f64>, EnvError> {
        self.t = 0;
        self.did_beneficial = false;
        Ok(self.observation())
    }

    fn step(&mut self, action: usize) -> Result<StepOutcome, EnvError> {
        if action >= Action::COUNT {
            return Err(EnvError::BadAction(action));
        }
        let stop = Action::from_index(action).is_some_and(Action::is_terminal);
        let (reward, done) = if stop {
            let r = if self.did_beneficial && self.t >= 1 { 1.0 } else { 0.0 };
            (r, true)
        } else {
            if action == self.beneficial_action {
                self.did_beneficial = true;
            }
            self.t += 1;
            (0.0, self.t >= self.time_limit)
        };
        let info = StepInfo {
            episode: done.then_some(EpisodeSummary {
                suggestion_similarity: reward,
                prompt_similarity: 0.0,
                final_rscore: reward,
                steps: self.t,
            }),
            applied: !stop,
        };
        Ok(StepOutcome { obs: self.observation(), reward, done, info })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beneficial_then_stop_earns_one() {
        let mut env = ToyEnv::new(15);
        env.reset().unwrap();
        let mid = env.step(Action::DeleteFnBodiesAll.index()).unwrap();
        assert_eq!(mid.reward, 0.0);
        assert!(!mid.done);
        let end = env.step(Action::StopManipulations.index()).unwrap();
        assert_eq!(end.reward, 1.0);
        assert!(end.done);
    }

    #[test]
    fn immediate_stop_earns_zero() {
        let mut env = ToyEnv::new(15);
        env.reset().unwrap();
        let end = env.step(Action::StopManipulations.index()).unwrap();
        assert_eq!(end.reward, 0.0);
        assert!(end.done);
    }

    #[test]
    fn time_limit_forces_done() {
        let mut env = ToyEnv::new(15);
        env.reset().unwrap();
        let mut steps = 0;
        loop {
            let out = env.step(Action::ReplacePii.index()).unwrap();
            steps += 1;
            if out.done {
                break;
            }
        }
        assert_eq!(steps, 15);
    }
}
