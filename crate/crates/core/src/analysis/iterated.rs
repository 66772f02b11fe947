//! The iterated balls-into-bins process behind lazy reshuffling.
//!
//! Every ball holds a slot in `[0, t_lease)`. In round `r > 1` the balls whose
//! slot equals `r mod t_lease` are re-thrown; all others stay put. An
//! adaptive adversary repaints balls as its attacks complete.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::adversary::{plan_attack, validate_lease, AdversaryState, AdversaryStrategy};
use super::bins::{red_balls, BinSnapshot};
use crate::rng::{stream, SimRng};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IteratedConfig {
    pub n: u64,
    pub m: u32,
    pub t_lease: u64,
    /// `None` means corruption never completes.
    pub t_takeover: Option<u64>,
    pub rounds: u64,
    pub red_fraction: f64,
    pub strategy: AdversaryStrategy,
    /// Nodes per attack. Defaults to `capacity / t_takeover`, at least 1.
    pub attack_batch: Option<usize>,
    pub seed: u64,
    /// Keep a snapshot every this many rounds; 0 keeps none.
    pub sample_every: u64,
}

impl IteratedConfig {
    pub fn new(n: u64, m: u32, t_lease: u64, rounds: u64, seed: u64) -> Self {
        IteratedConfig {
            n,
            m,
            t_lease,
            t_takeover: None,
            rounds,
            red_fraction: 0.25,
            strategy: AdversaryStrategy::Static,
            attack_batch: None,
            seed,
            sample_every: 0,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::InvalidConfig("n and m must be positive".into()));
        }
        if self.t_lease == 0 {
            return Err(Error::InvalidConfig("t_lease must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.red_fraction) {
            return Err(Error::InvalidConfig("red fraction must lie in [0, 1)".into()));
        }
        validate_lease(self.strategy, self.t_lease, self.t_takeover)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IteratedReport {
    pub rounds: u64,
    pub failed_rounds: u64,
    /// Maximal runs of consecutive failed rounds.
    pub failure_episodes: u64,
    /// Failures first seen right after an attack completed.
    pub completion_failures: u64,
    pub first_failure: Option<u64>,
    pub max_red_fraction: f64,
    pub attacks_launched: u64,
    pub attacks_completed: u64,
    pub capacity: usize,
    pub max_committed: usize,
    pub snapshots: Vec<(u64, BinSnapshot)>,
    pub seed: u64,
}

/// Outcome of one round of [`IteratedProcess::step`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundOutcome {
    pub round: u64,
    pub failed: bool,
    pub failed_after_completion: bool,
    pub completed: usize,
    pub launched: bool,
}

pub struct IteratedProcess {
    cfg: IteratedConfig,
    rng: SimRng,
    bins: Vec<u32>,
    by_slot: Vec<Vec<u32>>,
    snapshot: BinSnapshot,
    adversary: AdversaryState,
    batch: usize,
    round: u64,
}

impl IteratedProcess {
    pub fn new(cfg: IteratedConfig) -> Result<Self, Error> {
        Self::with_rng(cfg, stream(cfg.seed, "iterated", 0))
    }

    /// Like [`IteratedProcess::new`] but drawing from `rng`.
    pub fn with_rng(cfg: IteratedConfig, mut rng: SimRng) -> Result<Self, Error> {
        cfg.validate()?;
        let n = cfg.n as usize;
        let red = if cfg.strategy == AdversaryStrategy::None {
            0
        } else {
            red_balls(cfg.n, cfg.red_fraction) as usize
        };
        let t_takeover = if cfg.strategy.is_adaptive() { cfg.t_takeover } else { None };
        // colours are independent of the throws, so the first `red` balls are red
        let adversary = AdversaryState::new(n, red, t_takeover, 0..red as u32)?;
        let mut by_slot = vec![Vec::new(); cfg.t_lease as usize];
        for ball in 0..n as u32 {
            by_slot[rng.random_range(0..cfg.t_lease) as usize].push(ball);
        }
        let batch = match (cfg.attack_batch, t_takeover) {
            (Some(b), _) => b.max(1),
            (None, Some(t)) => (red / t as usize).max(1),
            (None, None) => 0,
        };
        Ok(IteratedProcess {
            cfg,
            rng,
            bins: vec![0; n],
            by_slot,
            snapshot: BinSnapshot::new(cfg.m),
            adversary,
            batch,
            round: 0,
        })
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn snapshot(&self) -> &BinSnapshot {
        &self.snapshot
    }

    pub fn adversary(&self) -> &AdversaryState {
        &self.adversary
    }

    /// Current bin of every ball, 0-based.
    pub fn bins(&self) -> &[u32] {
        &self.bins
    }

    fn throw(&mut self, ball: u32) {
        let bin = self.rng.random_range(0..self.cfg.m);
        self.bins[ball as usize] = bin;
        self.count(ball, bin, true);
    }

    fn count(&mut self, ball: u32, bin: u32, add: bool) {
        let side = if self.adversary.is_red(ball) {
            &mut self.snapshot.byzantine
        } else {
            &mut self.snapshot.honest
        };
        if add {
            side[bin as usize] += 1;
        } else {
            side[bin as usize] -= 1;
        }
    }

    pub fn step(&mut self) -> RoundOutcome {
        self.round += 1;
        let r = self.round;
        if r == 1 {
            for ball in 0..self.bins.len() as u32 {
                self.throw(ball);
            }
        } else {
            let slot = (r % self.cfg.t_lease) as usize;
            let movers = std::mem::take(&mut self.by_slot[slot]);
            for &ball in &movers {
                let old = self.bins[ball as usize];
                self.count(ball, old, false);
                self.throw(ball);
            }
            self.by_slot[slot] = movers;
        }
        let failed = self.snapshot.failed();
        let mut out = RoundOutcome {
            round: r,
            failed,
            failed_after_completion: false,
            completed: 0,
            launched: false,
        };
        if !self.cfg.strategy.is_adaptive() {
            return out;
        }
        let done = self.adversary.complete_due(r);
        if !done.is_empty() {
            for attack in &done {
                for &b in &attack.targets {
                    let bin = self.bins[b as usize];
                    self.snapshot.honest[bin as usize] -= 1;
                    self.snapshot.byzantine[bin as usize] += 1;
                }
                for &b in &attack.release {
                    let bin = self.bins[b as usize];
                    self.snapshot.byzantine[bin as usize] -= 1;
                    self.snapshot.honest[bin as usize] += 1;
                }
            }
            out.completed = done.len();
            if self.snapshot.failed() {
                out.failed = true;
                out.failed_after_completion = !failed;
            }
        }
        if let Some((targets, release)) = plan_attack(
            self.cfg.strategy,
            &self.adversary,
            &self.bins,
            self.cfg.m,
            self.batch,
            &mut self.rng,
        ) {
            self.adversary
                .launch(targets, release, r)
                .expect("planned attacks are valid");
            out.launched = true;
        }
        out
    }
}

/// Bin occupancy at `round` in `replicates` independent runs of the process.
/// Replicate `k` draws from stream `k` of the family `"iterated-replicate"`.
pub fn occupancy_at_round(cfg: &IteratedConfig, round: u64, replicates: u64) -> Result<Vec<BinSnapshot>, Error> {
    cfg.validate()?;
    (0..replicates)
        .into_par_iter()
        .map(|k| {
            let mut p = IteratedProcess::with_rng(*cfg, stream(cfg.seed, "iterated-replicate", k))?;
            for _ in 0..round {
                p.step();
            }
            Ok(p.snapshot.clone())
        })
        .collect()
}

/// Runs the iterated process for `cfg.rounds` rounds.
pub fn mc_iterated_lazy(cfg: &IteratedConfig) -> Result<IteratedReport, Error> {
    let mut p = IteratedProcess::new(*cfg)?;
    let mut report = IteratedReport {
        rounds: cfg.rounds,
        failed_rounds: 0,
        failure_episodes: 0,
        completion_failures: 0,
        first_failure: None,
        max_red_fraction: 0.0,
        attacks_launched: 0,
        attacks_completed: 0,
        capacity: p.adversary.capacity(),
        max_committed: 0,
        snapshots: Vec::new(),
        seed: cfg.seed,
    };
    let mut prev_failed = false;
    for _ in 0..cfg.rounds {
        let o = p.step();
        if o.failed {
            report.failed_rounds += 1;
            report.first_failure.get_or_insert(o.round);
            if !prev_failed {
                report.failure_episodes += 1;
            }
        }
        prev_failed = o.failed;
        report.completion_failures += o.failed_after_completion as u64;
        report.attacks_launched += o.launched as u64;
        report.attacks_completed += o.completed as u64;
        report.max_red_fraction = report.max_red_fraction.max(p.snapshot.max_red_fraction());
        if cfg.sample_every > 0 && o.round % cfg.sample_every == 0 {
            report.snapshots.push((o.round, p.snapshot.clone()));
        }
    }
    report.max_committed = p.adversary.max_committed();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lease_longer_than_takeover_is_rejected() {
        let mut cfg = IteratedConfig::new(100, 2, 11, 10, 0);
        cfg.strategy = AdversaryStrategy::AdaptiveGreedy;
        cfg.t_takeover = Some(10);
        assert!(IteratedProcess::new(cfg).is_err());
        cfg.t_lease = 10;
        assert!(IteratedProcess::new(cfg).is_ok());
    }

    #[test]
    fn only_scheduled_balls_move() {
        let cfg = IteratedConfig::new(500, 4, 5, 0, 1);
        let mut p = IteratedProcess::new(cfg).unwrap();
        p.step();
        for _ in 0..20 {
            let before = p.bins().to_vec();
            let next = p.round() + 1;
            p.step();
            let slot = (next % 5) as usize;
            for (ball, (&a, &b)) in before.iter().zip(p.bins()).enumerate() {
                if a != b {
                    assert!(p.by_slot[slot].contains(&(ball as u32)));
                }
            }
            assert_eq!(p.snapshot().total(), 500);
        }
    }

    #[test]
    fn counts_track_positions() {
        let mut cfg = IteratedConfig::new(300, 3, 4, 0, 2);
        cfg.strategy = AdversaryStrategy::AdaptiveGreedy;
        cfg.t_takeover = Some(4);
        let mut p = IteratedProcess::new(cfg).unwrap();
        for _ in 0..60 {
            p.step();
            let mut snap = BinSnapshot::new(3);
            for (ball, &bin) in p.bins().iter().enumerate() {
                if p.adversary().is_red(ball as u32) {
                    snap.byzantine[bin as usize] += 1;
                } else {
                    snap.honest[bin as usize] += 1;
                }
            }
            assert_eq!(&snap, p.snapshot());
            assert!(p.adversary().committed() <= p.adversary().capacity());
        }
    }

    #[test]
    fn unit_lease_moves_every_ball_every_round() {
        let cfg = IteratedConfig::new(300, 4, 1, 0, 4);
        let mut p = IteratedProcess::new(cfg).unwrap();
        p.step();
        let mut moved = 0;
        for _ in 0..10 {
            let before = p.bins().to_vec();
            p.step();
            moved += before.iter().zip(p.bins()).filter(|(a, b)| a != b).count();
        }
        // each re-throw lands elsewhere with probability 3/4
        assert!((moved as f64 / 3000.0 - 0.75).abs() < 0.05);
        assert_eq!(p.by_slot.len(), 1);
        assert_eq!(p.by_slot[0].len(), 300);
    }

    #[test]
    fn replicates_are_independent_streams() {
        let cfg = IteratedConfig::new(100, 2, 3, 0, 1);
        let snaps = occupancy_at_round(&cfg, 4, 8).unwrap();
        assert_eq!(snaps.len(), 8);
        assert!(snaps.iter().any(|s| s != &snaps[0]));
        assert_eq!(snaps, occupancy_at_round(&cfg, 4, 8).unwrap());
    }

    #[test]
    fn report_is_deterministic() {
        let mut cfg = IteratedConfig::new(200, 4, 3, 500, 7);
        cfg.strategy = AdversaryStrategy::AdaptiveRandom;
        cfg.t_takeover = Some(3);
        cfg.sample_every = 100;
        let a = mc_iterated_lazy(&cfg).unwrap();
        assert_eq!(a, mc_iterated_lazy(&cfg).unwrap());
        assert_eq!(a.snapshots.len(), 5);
        assert!(a.attacks_completed > 0);
        assert!(a.failure_episodes <= a.failed_rounds);
    }
}
