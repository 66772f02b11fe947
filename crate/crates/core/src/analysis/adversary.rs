//! Adversary bookkeeping and attack strategies.
//!
//! The adversary controls a set of nodes (red balls) and may corrupt more,
//! but corruption takes `t_takeover` rounds and cannot be aborted. To attack
//! a target set `B` it earmarks an equally sized release set `R` of its own
//! nodes; when the attack completes every node of `B` turns red and every
//! node of `R` turns blue. Earmarked nodes stay red until then but no longer
//! count as controlled, so `controlled + under_attack` never exceeds the
//! capacity `⌊b·n⌋`.

use std::collections::VecDeque;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AdversaryStrategy {
    /// No Byzantine nodes at all.
    None,
    /// A fixed Byzantine set.
    #[default]
    Static,
    /// Corrupt honest nodes in the shard with the highest Byzantine ratio,
    /// releasing Byzantine nodes from the shard with the lowest.
    AdaptiveGreedy,
    /// Corrupt and release uniformly random nodes.
    AdaptiveRandom,
}

impl AdversaryStrategy {
    pub fn is_adaptive(self) -> bool {
        matches!(self, AdversaryStrategy::AdaptiveGreedy | AdversaryStrategy::AdaptiveRandom)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AdversaryStrategy::None => "none",
            AdversaryStrategy::Static => "static",
            AdversaryStrategy::AdaptiveGreedy => "adaptive-greedy",
            AdversaryStrategy::AdaptiveRandom => "adaptive-random",
        }
    }
}

impl FromStr for AdversaryStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(AdversaryStrategy::None),
            "static" => Ok(AdversaryStrategy::Static),
            "adaptive-greedy" => Ok(AdversaryStrategy::AdaptiveGreedy),
            "adaptive-random" => Ok(AdversaryStrategy::AdaptiveRandom),
            other => Err(format!("unknown adversary strategy `{other}`")),
        }
    }
}

/// Checks the `t_lease ≤ t_takeover` requirement for adaptive adversaries.
pub fn validate_lease(
    strategy: AdversaryStrategy,
    t_lease: u64,
    t_takeover: Option<u64>,
) -> Result<(), Error> {
    if !strategy.is_adaptive() {
        return Ok(());
    }
    match t_takeover {
        None => Err(Error::InvalidConfig(
            "an adaptive adversary needs a finite t_takeover".into(),
        )),
        Some(0) => Err(Error::InvalidConfig("t_takeover must be at least 1".into())),
        Some(t) if t_lease > t => Err(Error::InvalidConfig(format!(
            "t_lease ({t_lease}) must not exceed t_takeover ({t}) under an adaptive adversary"
        ))),
        Some(_) => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attack {
    pub targets: Vec<u32>,
    pub release: Vec<u32>,
    pub start: u64,
}

#[derive(Debug, Clone)]
pub struct AdversaryState {
    capacity: usize,
    t_takeover: Option<u64>,
    red: Vec<bool>,
    red_count: usize,
    targeted: Vec<bool>,
    releasing: Vec<bool>,
    under_attack: usize,
    in_release: usize,
    in_flight: VecDeque<Attack>,
    max_committed: usize,
}

impl AdversaryState {
    /// `n` nodes, the listed ones red. `t_takeover = None` is a static
    /// adversary.
    pub fn new(
        n: usize,
        capacity: usize,
        t_takeover: Option<u64>,
        initial_red: impl IntoIterator<Item = u32>,
    ) -> Result<Self, Error> {
        let mut red = vec![false; n];
        let mut red_count = 0;
        for i in initial_red {
            let slot = red
                .get_mut(i as usize)
                .ok_or_else(|| Error::InvalidConfig(format!("node {i} out of range")))?;
            if !*slot {
                *slot = true;
                red_count += 1;
            }
        }
        if red_count > capacity {
            return Err(Error::InvalidConfig(format!(
                "{red_count} initial Byzantine nodes exceed capacity {capacity}"
            )));
        }
        Ok(AdversaryState {
            capacity,
            t_takeover,
            red,
            red_count,
            targeted: vec![false; n],
            releasing: vec![false; n],
            under_attack: 0,
            in_release: 0,
            in_flight: VecDeque::new(),
            max_committed: red_count,
        })
    }

    pub fn node_count(&self) -> usize {
        self.red.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn t_takeover(&self) -> Option<u64> {
        self.t_takeover
    }

    pub fn is_red(&self, node: u32) -> bool {
        self.red[node as usize]
    }

    pub fn colors(&self) -> &[bool] {
        &self.red
    }

    pub fn red_count(&self) -> usize {
        self.red_count
    }

    /// Red nodes not earmarked for release.
    pub fn controlled(&self) -> usize {
        self.red_count - self.in_release
    }

    pub fn under_attack(&self) -> usize {
        self.under_attack
    }

    pub fn committed(&self) -> usize {
        self.controlled() + self.under_attack
    }

    pub fn max_committed(&self) -> usize {
        self.max_committed
    }

    pub fn is_targeted(&self, node: u32) -> bool {
        self.targeted[node as usize]
    }

    pub fn is_releasing(&self, node: u32) -> bool {
        self.releasing[node as usize]
    }

    pub fn in_flight(&self) -> impl Iterator<Item = &Attack> + '_ {
        self.in_flight.iter()
    }

    /// Starts an attack in round `round`. It completes in round
    /// `round + t_takeover`.
    pub fn launch(&mut self, targets: Vec<u32>, release: Vec<u32>, round: u64) -> Result<(), Error> {
        if self.t_takeover.is_none() {
            return Err(Error::InvalidConfig("a static adversary cannot attack".into()));
        }
        if release.len() > targets.len() {
            return Err(Error::InvalidConfig("release set larger than target set".into()));
        }
        let growth = targets.len() - release.len();
        if self.committed() + growth > self.capacity {
            return Err(Error::InvalidConfig(format!(
                "attack would commit {} nodes, capacity is {}",
                self.committed() + growth,
                self.capacity
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for &t in &targets {
            let t_idx = t as usize;
            if t_idx >= self.red.len() || self.red[t_idx] || self.targeted[t_idx] || !seen.insert(t) {
                return Err(Error::InvalidConfig(format!("node {t} cannot be targeted")));
            }
        }
        for &r in &release {
            let r_idx = r as usize;
            if r_idx >= self.red.len() || !self.red[r_idx] || self.releasing[r_idx] || !seen.insert(r) {
                return Err(Error::InvalidConfig(format!("node {r} cannot be released")));
            }
        }
        for &t in &targets {
            self.targeted[t as usize] = true;
        }
        for &r in &release {
            self.releasing[r as usize] = true;
        }
        self.under_attack += targets.len();
        self.in_release += release.len();
        self.max_committed = self.max_committed.max(self.committed());
        self.in_flight.push_back(Attack {
            targets,
            release,
            start: round,
        });
        Ok(())
    }

    /// Completes every attack due by `round`, repainting its nodes.
    pub fn complete_due(&mut self, round: u64) -> Vec<Attack> {
        let Some(t) = self.t_takeover else {
            return Vec::new();
        };
        let mut done = Vec::new();
        while self.in_flight.front().is_some_and(|a| a.start + t <= round) {
            let attack = self.in_flight.pop_front().expect("front exists");
            for &b in &attack.targets {
                self.targeted[b as usize] = false;
                self.red[b as usize] = true;
            }
            for &r in &attack.release {
                self.releasing[r as usize] = false;
                self.red[r as usize] = false;
            }
            self.under_attack -= attack.targets.len();
            self.in_release -= attack.release.len();
            self.red_count = self.red_count + attack.targets.len() - attack.release.len();
            done.push(attack);
        }
        done
    }
}

/// Picks the next attack, if any, given where every node currently sits.
/// `bins[node]` is the node's bin, 0-based.
pub fn plan_attack<R: Rng + ?Sized>(
    strategy: AdversaryStrategy,
    state: &AdversaryState,
    bins: &[u32],
    m: u32,
    batch: usize,
    rng: &mut R,
) -> Option<(Vec<u32>, Vec<u32>)> {
    let releasable = state.controlled();
    let k = batch.min(releasable);
    if k == 0 || !strategy.is_adaptive() {
        return None;
    }
    match strategy {
        AdversaryStrategy::AdaptiveGreedy => plan_greedy(state, bins, m, k),
        AdversaryStrategy::AdaptiveRandom => plan_random(state, k, rng),
        _ => None,
    }
}

fn plan_greedy(state: &AdversaryState, bins: &[u32], m: u32, k: usize) -> Option<(Vec<u32>, Vec<u32>)> {
    let mut blue = vec![0u64; m as usize];
    let mut red = vec![0u64; m as usize];
    for (node, &bin) in bins.iter().enumerate() {
        if state.red[node] {
            red[bin as usize] += 1;
        } else {
            blue[bin as usize] += 1;
        }
    }
    // compare red/(red+blue) exactly by cross-multiplication
    let ratio_cmp = |a: usize, b: usize| {
        let (ra, ta) = (red[a] as u128, (red[a] + blue[a]) as u128);
        let (rb, tb) = (red[b] as u128, (red[b] + blue[b]) as u128);
        (ra * tb.max(1)).cmp(&(rb * ta.max(1)))
    };
    let mut order: Vec<usize> = (0..m as usize).collect();
    order.sort_by(|&a, &b| ratio_cmp(b, a).then(a.cmp(&b)));
    let hot = order[0] as u32;
    let targets: Vec<u32> = bins
        .iter()
        .enumerate()
        .filter(|&(node, &bin)| bin == hot && !state.red[node] && !state.targeted[node])
        .map(|(node, _)| node as u32)
        .take(k)
        .collect();
    if targets.is_empty() {
        return None;
    }
    let mut release = Vec::with_capacity(targets.len());
    for &cold in order.iter().rev() {
        if release.len() == targets.len() {
            break;
        }
        let need = targets.len() - release.len();
        release.extend(
            bins.iter()
                .enumerate()
                .filter(|&(node, &bin)| bin as usize == cold && state.red[node] && !state.releasing[node])
                .map(|(node, _)| node as u32)
                .take(need),
        );
    }
    let mut targets = targets;
    targets.truncate(release.len());
    if targets.is_empty() {
        return None;
    }
    Some((targets, release))
}

fn plan_random<R: Rng + ?Sized>(state: &AdversaryState, k: usize, rng: &mut R) -> Option<(Vec<u32>, Vec<u32>)> {
    let n = state.red.len();
    let blue: Vec<u32> = (0..n)
        .filter(|&i| !state.red[i] && !state.targeted[i])
        .map(|i| i as u32)
        .collect();
    let reds: Vec<u32> = (0..n)
        .filter(|&i| state.red[i] && !state.releasing[i])
        .map(|i| i as u32)
        .collect();
    let k = k.min(blue.len()).min(reds.len());
    if k == 0 {
        return None;
    }
    let targets = sample(rng, blue.len(), k).into_iter().map(|i| blue[i]).collect();
    let release = sample(rng, reds.len(), k).into_iter().map(|i| reds[i]).collect();
    Some((targets, release))
}
