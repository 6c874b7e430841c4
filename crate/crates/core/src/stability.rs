//! Stability notions: envy-free outcomes and Nash equilibria.
//!
//! Every negative verdict carries a machine-checkable certificate. Envy
//! checks are exact evaluations of the definition. Nash checks search a
//! finite candidate grid: for fixed opponents a player's price is piecewise
//! constant in his own value-bid, changing only where the bid crosses an
//! opponent bid or an affordability threshold, so probing every breakpoint
//! and every midpoint between consecutive breakpoints samples every piece.
//! Budget-bids act only through affordability comparisons against slot
//! totals, so their probes are the derived totals. A seeded random sweep
//! cross-validates every positive (Nash) verdict.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::mechanisms::Mechanism;
use crate::model::{Bid, BidProfile, ExtendedUtility, Instance, Outcome, utility};
use crate::rational::Rat;

/// Evidence attached to a negative stability verdict.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Certificate {
    /// `envier` would rather hold `target_slot` at its current price than
    /// his own outcome; `gain` is the strictly positive utility shortfall.
    EnvyViolation {
        envier: usize,
        target_player: usize,
        target_slot: usize,
        gain: Rat,
    },
    /// An assigned player's total charge exceeds his true budget, so his
    /// utility is minus infinity.
    BudgetExceeded {
        player: usize,
        slot: usize,
        excess: Rat,
    },
    /// A slot nobody holds; envy-free assignments must fill every slot.
    UnassignedSlot { slot: usize },
    /// Replaying `value_bid`/`budget_bid` for `player` through the named
    /// mechanism strictly raises his utility.
    ImprovingDeviation {
        player: usize,
        value_bid: Rat,
        budget_bid: Rat,
        old_utility: ExtendedUtility,
        new_utility: ExtendedUtility,
    },
}

/// Checks the envy-free conditions: every slot assigned, and no player
/// (assigned or not) prefers any affordable occupied slot at its price to
/// his own outcome. Returns every violated constraint.
pub fn is_envy_free(instance: &Instance, outcome: &Outcome) -> Result<(), Vec<Certificate>> {
    let mut certs = Vec::new();
    for slot in 0..instance.slot_count() {
        if outcome.occupant_of(slot).is_none() {
            certs.push(Certificate::UnassignedSlot { slot });
        }
    }
    let assigned: Vec<usize> = outcome.assigned_players().collect();
    for i in 0..instance.player_count() {
        let u_i = utility(i, outcome, instance);
        let u_i = match u_i {
            ExtendedUtility::NegInfinity => {
                let slot = outcome.slot_of(i).expect("neg-infinity implies assigned");
                certs.push(Certificate::BudgetExceeded {
                    player: i,
                    slot,
                    excess: instance.ctr(slot) * outcome.price_of(i) - instance.player(i).budget,
                });
                continue;
            }
            ExtendedUtility::Finite(u) => u,
        };
        for &j in &assigned {
            let slot = outcome.slot_of(j).expect("assigned");
            let theta = instance.ctr(slot);
            let price = outcome.price_of(j);
            let affordable = theta * price <= instance.player(i).budget;
            let required = if affordable {
                (theta * (instance.player(i).value - price)).max(Rat::ZERO)
            } else {
                Rat::ZERO
            };
            if u_i < required {
                certs.push(Certificate::EnvyViolation {
                    envier: i,
                    target_player: j,
                    target_slot: slot,
                    gain: required - u_i,
                });
            }
        }
    }
    if certs.is_empty() {
        Ok(())
    } else {
        Err(certs)
    }
}

/// Which coordinates a deviating player may move.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeviationPolicy {
    /// Private budgets: value-bid and budget-bid both strategic.
    ValueAndBudget,
    /// Public budgets: the budget-bid is pinned, only the value-bid moves.
    ValueOnly,
}

/// Finite probe grid that samples every reachable outcome for one player.
#[derive(Clone, Debug)]
pub struct CandidateSet {
    pub breakpoints: Vec<Rat>,
    /// Breakpoints plus every midpoint of consecutive breakpoints.
    pub value_probes: Vec<Rat>,
    /// Derived slot totals; the player's current budget-bid is first so that
    /// pure value deviations are reported when they suffice.
    pub budget_probes: Vec<Rat>,
    /// Half the minimum gap between breakpoints; the exact-arithmetic
    /// stand-in for "shade the bid by epsilon".
    pub gap_radius: Rat,
}

/// Assembles the candidate set for `player` against the fixed opponents in
/// `bids`: zero, every opponent value-bid, every affordability threshold
/// `g_j/theta_s` and `B_i/theta_s`, the player's own current bid, and a
/// point past the maximum.
pub fn candidate_set(instance: &Instance, bids: &BidProfile, player: usize) -> CandidateSet {
    let mut set: BTreeSet<Rat> = BTreeSet::new();
    set.insert(Rat::ZERO);
    for j in 0..instance.player_count() {
        if j == player {
            continue;
        }
        set.insert(bids.bid(j).value_bid);
        for s in 0..instance.slot_count() {
            set.insert(bids.bid(j).budget_bid / instance.ctr(s));
        }
    }
    for s in 0..instance.slot_count() {
        set.insert(instance.player(player).budget / instance.ctr(s));
    }
    set.insert(bids.bid(player).value_bid);
    let max = *set.iter().next_back().expect("non-empty");
    set.insert(max + Rat::ONE);
    let breakpoints: Vec<Rat> = set.into_iter().collect();

    let mut value_probes = Vec::with_capacity(2 * breakpoints.len());
    let mut gap_radius: Option<Rat> = None;
    for w in breakpoints.windows(2) {
        value_probes.push(w[0]);
        let gap = w[1] - w[0];
        value_probes.push(w[0] + gap * Rat::new(1, 2));
        gap_radius = Some(match gap_radius {
            Some(g) => g.min(gap),
            None => gap,
        });
    }
    value_probes.push(*breakpoints.last().expect("non-empty"));
    let gap_radius = gap_radius.map_or(Rat::ONE, |g| g * Rat::new(1, 2));

    let mut totals: BTreeSet<Rat> = BTreeSet::new();
    totals.insert(Rat::ZERO);
    totals.insert(instance.player(player).budget);
    for &p in &value_probes {
        for s in 0..instance.slot_count() {
            totals.insert(instance.ctr(s) * p);
        }
    }
    let current_budget_bid = bids.bid(player).budget_bid;
    let mut budget_probes = vec![current_budget_bid];
    budget_probes.extend(totals.into_iter().filter(|t| *t != current_budget_bid));

    CandidateSet {
        breakpoints,
        value_probes,
        budget_probes,
        gap_radius,
    }
}

/// Maximizes `player`'s utility over the candidate grid, opponents fixed.
/// Returns the best utility (at least his current one, since the current bid
/// is in the grid) and one bid achieving it.
pub fn best_response(
    instance: &Instance,
    mechanism: Mechanism,
    bids: &BidProfile,
    player: usize,
    policy: DeviationPolicy,
) -> (ExtendedUtility, Bid) {
    let candidates = candidate_set(instance, bids, player);
    let current = bids.bid(player);
    let mut best = utility(player, &mechanism.run(instance, bids), instance);
    let mut witness = current;
    for_each_probe(&candidates, current, policy, |bid| {
        let u = utility(
            player,
            &mechanism.run(instance, &bids.with_bid(player, bid)),
            instance,
        );
        if u > best {
            best = u;
            witness = bid;
        }
        true
    });
    (best, witness)
}

fn for_each_probe(
    candidates: &CandidateSet,
    current: Bid,
    policy: DeviationPolicy,
    mut f: impl FnMut(Bid) -> bool,
) {
    let budget_probes: &[Rat] = match policy {
        DeviationPolicy::ValueAndBudget => &candidates.budget_probes,
        DeviationPolicy::ValueOnly => std::slice::from_ref(&current.budget_bid),
    };
    for &value_bid in &candidates.value_probes {
        for &budget_bid in budget_probes {
            if !f(Bid {
                value_bid,
                budget_bid,
            }) {
                return;
            }
        }
    }
}

/// Verdict of a Nash check; negative verdicts carry a replayable deviation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NashVerdict {
    Nash,
    NotNash(Certificate),
}

impl NashVerdict {
    pub fn is_nash(&self) -> bool {
        matches!(self, NashVerdict::Nash)
    }
}

/// Knobs for [`check_nash`]; the defaults match the library-wide contract of
/// 1000 seeded random deviations per player backing every Nash verdict.
#[derive(Clone, Copy, Debug)]
pub struct NashCheckConfig {
    pub policy: DeviationPolicy,
    pub cross_validation_samples: u32,
    pub seed: u64,
}

impl Default for NashCheckConfig {
    fn default() -> Self {
        NashCheckConfig {
            policy: DeviationPolicy::ValueAndBudget,
            cross_validation_samples: 1000,
            seed: 0,
        }
    }
}

/// Decides whether `bids` is a Nash equilibrium of `mechanism` by exhausting
/// the candidate grid of every player. A found improvement is replayed before
/// it is returned. A Nash verdict is additionally cross-validated with
/// uniformly random deviations inside the probe hull; a random hit is
/// returned as a counterexample like any other.
pub fn check_nash(
    instance: &Instance,
    mechanism: Mechanism,
    bids: &BidProfile,
    config: NashCheckConfig,
) -> NashVerdict {
    let baseline = mechanism.run(instance, bids);
    for player in 0..instance.player_count() {
        let current_utility = utility(player, &baseline, instance);
        let candidates = candidate_set(instance, bids, player);
        let mut found: Option<Bid> = None;
        for_each_probe(&candidates, bids.bid(player), config.policy, |bid| {
            let u = utility(
                player,
                &mechanism.run(instance, &bids.with_bid(player, bid)),
                instance,
            );
            if u > current_utility {
                found = Some(bid);
                false
            } else {
                true
            }
        });
        if let Some(bid) = found {
            return NashVerdict::NotNash(certify_deviation(
                instance,
                mechanism,
                bids,
                player,
                bid,
                current_utility,
            ));
        }
    }

    // Candidate grid found nothing; sweep random deviations before trusting it.
    for player in 0..instance.player_count() {
        let candidates = candidate_set(instance, bids, player);
        let value_hull = *candidates.value_probes.last().expect("non-empty");
        let budget_hull = candidates
            .budget_probes
            .iter()
            .copied()
            .max()
            .expect("non-empty");
        let current_utility = utility(player, &baseline, instance);
        let mut rng =
            ChaCha8Rng::seed_from_u64(config.seed ^ (player as u64).wrapping_mul(0x9E3779B97F4A7C15));
        for _ in 0..config.cross_validation_samples {
            const GRAIN: i128 = 1 << 20;
            let value_bid = value_hull * Rat::new(rng.gen_range(0..=GRAIN), GRAIN);
            let budget_bid = match config.policy {
                DeviationPolicy::ValueAndBudget => {
                    budget_hull * Rat::new(rng.gen_range(0..=GRAIN), GRAIN)
                }
                DeviationPolicy::ValueOnly => bids.bid(player).budget_bid,
            };
            let bid = Bid {
                value_bid,
                budget_bid,
            };
            let u = utility(
                player,
                &mechanism.run(instance, &bids.with_bid(player, bid)),
                instance,
            );
            if u > current_utility {
                return NashVerdict::NotNash(certify_deviation(
                    instance,
                    mechanism,
                    bids,
                    player,
                    bid,
                    current_utility,
                ));
            }
        }
    }
    NashVerdict::Nash
}

fn certify_deviation(
    instance: &Instance,
    mechanism: Mechanism,
    bids: &BidProfile,
    player: usize,
    bid: Bid,
    old_utility: ExtendedUtility,
) -> Certificate {
    let new_utility = utility(
        player,
        &mechanism.run(instance, &bids.with_bid(player, bid)),
        instance,
    );
    assert!(
        new_utility > old_utility,
        "improving deviation failed to replay"
    );
    Certificate::ImprovingDeviation {
        player,
        value_bid: bid.value_bid,
        budget_bid: bid.budget_bid,
        old_utility,
        new_utility,
    }
}

/// Replays an [`Certificate::ImprovingDeviation`] and confirms it strictly
/// improves the deviator.
pub fn replay_deviation(
    instance: &Instance,
    mechanism: Mechanism,
    bids: &BidProfile,
    certificate: &Certificate,
) -> bool {
    match certificate {
        Certificate::ImprovingDeviation {
            player,
            value_bid,
            budget_bid,
            old_utility,
            new_utility,
        } => {
            let before = utility(*player, &mechanism.run(instance, bids), instance);
            let deviated = bids.with_bid(
                *player,
                Bid {
                    value_bid: *value_bid,
                    budget_bid: *budget_bid,
                },
            );
            let after = utility(*player, &mechanism.run(instance, &deviated), instance);
            before == *old_utility && after == *new_utility && after > before
        }
        _ => false,
    }
}
