//! The four second-price mechanisms.
//!
//! All of them are deterministic pure functions from (instance, profile) to
//! an [`Outcome`]. Ties anywhere are broken by the instance's a priori
//! priority order.
//!
//! * `Bosp` ranks by value-bid and assigns slots in rank order, ignoring
//!   budgets entirely; winners may end up violating their true budget.
//! * `Bcp` fixes prices from the ranking first, then hands each player the
//!   highest still-free slot whose total at *his assigned price* fits his
//!   budget-bid.
//! * `Bcb` is identical except affordability is tested at the player's *own
//!   value-bid*.
//! * `Bcbo` sells slots top-down to the best offer `min(b, g/theta)` and
//!   charges the second-best offer.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{BidProfile, Instance, Outcome};
use crate::rational::Rat;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Bosp,
    Bcp,
    Bcb,
    Bcbo,
}

impl Mechanism {
    pub const ALL: [Mechanism; 4] = [
        Mechanism::Bosp,
        Mechanism::Bcp,
        Mechanism::Bcb,
        Mechanism::Bcbo,
    ];

    pub fn run(self, instance: &Instance, bids: &BidProfile) -> Outcome {
        match self {
            Mechanism::Bosp => run_bosp(instance, bids),
            Mechanism::Bcp => run_bcp(instance, bids),
            Mechanism::Bcb => run_bcb(instance, bids),
            Mechanism::Bcbo => run_bcbo(instance, bids),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Bosp => "bosp",
            Mechanism::Bcp => "bcp",
            Mechanism::Bcb => "bcb",
            Mechanism::Bcbo => "bcbo",
        }
    }
}

impl std::fmt::Display for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mechanism {
    type Err = String;
    fn from_str(s: &str) -> Result<Mechanism, String> {
        match s.to_ascii_lowercase().as_str() {
            "bosp" => Ok(Mechanism::Bosp),
            "bcp" => Ok(Mechanism::Bcp),
            "bcb" => Ok(Mechanism::Bcb),
            "bcbo" => Ok(Mechanism::Bcbo),
            other => Err(format!(
                "unknown mechanism {other:?}; expected bosp, bcp, bcb, or bcbo"
            )),
        }
    }
}

/// Players in descending value-bid order with the second-price schedule:
/// each player's price is the value-bid of the next player in the order,
/// zero for the last.
#[derive(Clone, Debug)]
pub struct RankedBids {
    order: Vec<usize>,
    price_by_player: Vec<Rat>,
}

impl RankedBids {
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// The price the ranking assigns to `player`, whether or not any
    /// mechanism ends up seating him.
    pub fn price_of(&self, player: usize) -> Rat {
        self.price_by_player[player]
    }
}

/// Sorts players by descending value-bid, ties by priority, and derives the
/// next-lower-bid price schedule.
pub fn rank_bids(instance: &Instance, bids: &BidProfile) -> RankedBids {
    let mut order: Vec<usize> = (0..bids.len()).collect();
    order.sort_by(|&i, &j| {
        bids.bid(j)
            .value_bid
            .cmp(&bids.bid(i).value_bid)
            .then_with(|| instance.prefers(i, j))
    });
    let mut price_by_player = vec![Rat::ZERO; bids.len()];
    for (r, &i) in order.iter().enumerate() {
        price_by_player[i] = match order.get(r + 1) {
            Some(&next) => bids.bid(next).value_bid,
            None => Rat::ZERO,
        };
    }
    RankedBids {
        order,
        price_by_player,
    }
}

/// Budget-oblivious: slot `j` goes to the `j`-th ranked player at the
/// next-lower bid. Budget-bids never matter.
pub fn run_bosp(instance: &Instance, bids: &BidProfile) -> Outcome {
    let ranked = rank_bids(instance, bids);
    let n = bids.len();
    let mut slot_of = vec![None; n];
    let mut price_of = vec![Rat::ZERO; n];
    for (slot, &player) in ranked.order().iter().take(instance.slot_count()).enumerate() {
        slot_of[player] = Some(slot);
        price_of[player] = ranked.price_of(player);
    }
    Outcome::new(slot_of, price_of)
}

fn run_budget_conscious(
    instance: &Instance,
    bids: &BidProfile,
    affordable: impl Fn(usize, usize, &RankedBids) -> bool,
) -> Outcome {
    let ranked = rank_bids(instance, bids);
    let n = bids.len();
    let mut slot_of = vec![None; n];
    let mut price_of = vec![Rat::ZERO; n];
    let mut taken = vec![false; instance.slot_count()];
    for &player in ranked.order() {
        // Highest-CTR free slot the player can afford; one pass, no retries.
        let slot = (0..instance.slot_count())
            .find(|&s| !taken[s] && affordable(player, s, &ranked));
        if let Some(s) = slot {
            taken[s] = true;
            slot_of[player] = Some(s);
            price_of[player] = ranked.price_of(player);
        }
    }
    Outcome::new(slot_of, price_of)
}

/// Budget-conscious by price: affordability of a slot is tested at the
/// player's assigned price. Skipped players are never charged.
pub fn run_bcp(instance: &Instance, bids: &BidProfile) -> Outcome {
    run_budget_conscious(instance, bids, |player, slot, ranked| {
        instance.ctr(slot) * ranked.price_of(player) <= bids.bid(player).budget_bid
    })
}

/// Budget-conscious by bid: affordability is tested as if the player paid
/// his own value-bid; the charge is still the next-lower bid.
pub fn run_bcb(instance: &Instance, bids: &BidProfile) -> Outcome {
    run_budget_conscious(instance, bids, |player, slot, _| {
        instance.ctr(slot) * bids.bid(player).value_bid <= bids.bid(player).budget_bid
    })
}

/// Per-click offer of `player` for `slot` under the best-offer rule.
pub fn bcbo_offer(instance: &Instance, bids: &BidProfile, player: usize, slot: usize) -> Rat {
    let bid = bids.bid(player);
    bid.value_bid.min(bid.budget_bid / instance.ctr(slot))
}

/// Best-offer budget-conscious: each slot, from the highest CTR down, goes
/// to the unassigned player with the largest `min(b, g/theta)` and is priced
/// at the second largest such offer among the then-unassigned players.
/// Computed on total offers `min(theta*b, g)`, which order identically and
/// avoid a division per comparison.
pub fn run_bcbo(instance: &Instance, bids: &BidProfile) -> Outcome {
    let n = bids.len();
    let mut slot_of = vec![None; n];
    let mut price_of = vec![Rat::ZERO; n];
    let mut unassigned: Vec<usize> = (0..n).collect();
    for slot in 0..instance.slot_count() {
        if unassigned.is_empty() {
            break;
        }
        let theta = instance.ctr(slot);
        let total = |i: usize| (theta * bids.bid(i).value_bid).min(bids.bid(i).budget_bid);
        let winner = *unassigned
            .iter()
            .max_by(|&&i, &&j| total(i).cmp(&total(j)).then_with(|| instance.prefers(j, i)))
            .expect("non-empty");
        let second = unassigned
            .iter()
            .filter(|&&i| i != winner)
            .map(|&i| total(i))
            .max();
        slot_of[winner] = Some(slot);
        price_of[winner] = match second {
            Some(t) => t / theta,
            None => Rat::ZERO,
        };
        unassigned.retain(|&i| i != winner);
    }
    Outcome::new(slot_of, price_of)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Bid, Player};
    use crate::rational::rat;

    fn player(value: Rat, budget: Rat) -> Player {
        Player { value, budget }
    }

    fn profile(instance: &Instance, pairs: &[(Rat, Rat)]) -> BidProfile {
        BidProfile::new(
            pairs
                .iter()
                .map(|&(value_bid, budget_bid)| Bid {
                    value_bid,
                    budget_bid,
                })
                .collect(),
            instance,
        )
        .unwrap()
    }

    /// Non-existence setting: two slots at CTR 1 and 1/100, three players.
    fn steep_ctr_instance() -> Instance {
        Instance::new(
            vec![rat(1, 1), rat(1, 100)],
            vec![
                player(rat(10, 1), rat(12, 1)),
                player(rat(9, 1), rat(10, 1)),
                player(rat(14, 1), rat(8, 1)),
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn bosp_assigns_in_bid_order() {
        let inst = steep_ctr_instance();
        let bids = BidProfile::with_true_budgets(vec![rat(10, 1), rat(9, 1), rat(8, 1)], &inst);
        let out = run_bosp(&inst, &bids);
        assert_eq!(out.slot_of(0), Some(0));
        assert_eq!(out.price_of(0), rat(9, 1));
        assert_eq!(out.slot_of(1), Some(1));
        assert_eq!(out.price_of(1), rat(8, 1));
        assert_eq!(out.slot_of(2), None);
        assert_eq!(out.price_of(2), Rat::ZERO);
    }

    #[test]
    fn bosp_single_player_pays_zero() {
        let inst = Instance::new(
            vec![rat(1, 1)],
            vec![player(rat(5, 1), rat(5, 1))],
            None,
        )
        .unwrap();
        let bids = profile(&inst, &[(rat(3, 1), rat(5, 1))]);
        let out = run_bosp(&inst, &bids);
        assert_eq!(out.slot_of(0), Some(0));
        assert_eq!(out.price_of(0), Rat::ZERO);
    }

    #[test]
    fn bosp_equal_bids_follow_priority() {
        let inst = Instance::new(
            vec![rat(1, 1), rat(1, 2)],
            vec![player(rat(5, 1), rat(9, 1)), player(rat(5, 1), rat(8, 1))],
            Some(vec![1, 0]),
        )
        .unwrap();
        let bids = profile(&inst, &[(rat(5, 1), rat(9, 1)), (rat(5, 1), rat(8, 1))]);
        let out = run_bosp(&inst, &bids);
        assert_eq!(out.slot_of(1), Some(0));
        assert_eq!(out.price_of(1), rat(5, 1));
        assert_eq!(out.slot_of(0), Some(1));
    }

    /// One-slot setting where under-bidding wins the slot for free.
    fn single_slot_instance() -> Instance {
        Instance::new(
            vec![rat(1, 1)],
            vec![player(rat(10, 1), rat(5, 1)), player(rat(5, 1), rat(3, 1))],
            None,
        )
        .unwrap()
    }

    #[test]
    fn bcp_skips_priced_out_rival() {
        let inst = single_slot_instance();
        // Low bid 7/2 prices the rival at 7/2 > 3, so he is skipped and the
        // low bidder takes the slot for free.
        let bids = profile(&inst, &[(rat(7, 2), rat(5, 1)), (rat(4, 1), rat(3, 1))]);
        let out = run_bcp(&inst, &bids);
        assert_eq!(out.slot_of(1), None);
        assert_eq!(out.slot_of(0), Some(0));
        assert_eq!(out.price_of(0), Rat::ZERO);
    }

    #[test]
    fn bcp_straight_win_at_second_price() {
        let inst = single_slot_instance();
        let bids = profile(&inst, &[(rat(5, 1), rat(5, 1)), (rat(4, 1), rat(3, 1))]);
        let out = run_bcp(&inst, &bids);
        assert_eq!(out.slot_of(0), Some(0));
        assert_eq!(out.price_of(0), rat(4, 1));
        assert_eq!(out.slot_of(1), None);
    }

    #[test]
    fn bcp_single_player_always_affords_zero() {
        let inst = Instance::new(
            vec![rat(1, 1)],
            vec![player(rat(5, 1), rat(1, 10))],
            None,
        )
        .unwrap();
        let bids = profile(&inst, &[(rat(100, 1), rat(1, 10))]);
        let out = run_bcp(&inst, &bids);
        assert_eq!(out.slot_of(0), Some(0));
        assert_eq!(out.price_of(0), Rat::ZERO);
    }

    #[test]
    fn bcb_tests_affordability_at_own_bid() {
        let inst = Instance::new(
            vec![rat(1, 1), rat(1, 2)],
            vec![
                player(rat(10, 1), rat(6, 1)),
                player(rat(8, 1), rat(3, 1)),
                player(rat(4, 1), rat(9, 10)),
            ],
            None,
        )
        .unwrap();
        let bids = profile(
            &inst,
            &[
                (rat(5, 1), rat(5, 1)),
                (rat(4, 1), rat(2, 1)),
                (rat(2, 1), Rat::ZERO),
            ],
        );
        let out = run_bcb(&inst, &bids);
        assert_eq!(out.slot_of(0), Some(0));
        assert_eq!(out.price_of(0), rat(4, 1));
        assert_eq!(out.slot_of(1), Some(1));
        assert_eq!(out.price_of(1), rat(2, 1));
        assert_eq!(out.slot_of(2), None);
    }

    #[test]
    fn bcb_lone_bidder_slides_to_affordable_slot() {
        // Degenerate shape (one player, two slots) to isolate the own-bid
        // test: slot 1 needs 1*5 <= 3 and fails, slot 2 needs 5/2 <= 3.
        let inst = Instance::unchecked(
            vec![rat(1, 1), rat(1, 2)],
            vec![player(rat(5, 1), rat(3, 1))],
        );
        let bids = BidProfile::with_true_budgets(vec![rat(5, 1)], &inst);
        let out = run_bcb(&inst, &bids);
        assert_eq!(out.slot_of(0), Some(1));
        assert_eq!(out.price_of(0), Rat::ZERO);
        assert_eq!(out.occupant_of(0), None);
    }

    #[test]
    fn bcb_single_player_single_slot() {
        let inst = Instance::new(
            vec![rat(1, 1)],
            vec![player(rat(1, 1), rat(1, 1))],
            None,
        )
        .unwrap();
        let bids = profile(&inst, &[(rat(1, 1), rat(1, 1))]);
        let out = run_bcb(&inst, &bids);
        assert_eq!(out.slot_of(0), Some(0));
        assert_eq!(out.price_of(0), Rat::ZERO);
    }

    #[test]
    fn bcbo_awards_to_best_offer() {
        let inst = Instance::new(
            vec![rat(1, 1)],
            vec![player(rat(10, 1), rat(5, 1)), player(rat(8, 1), rat(7, 1))],
            None,
        )
        .unwrap();
        let bids = profile(&inst, &[(rat(10, 1), rat(5, 1)), (rat(8, 1), rat(7, 1))]);
        let out = run_bcbo(&inst, &bids);
        // Offers are min(10,5)=5 and min(8,7)=7.
        assert_eq!(out.slot_of(1), Some(0));
        assert_eq!(out.price_of(1), rat(5, 1));
        assert_eq!(out.slot_of(0), None);
    }

    #[test]
    fn bcbo_two_slot_trace() {
        let inst = Instance::new(
            vec![rat(1, 1), rat(1, 2)],
            vec![
                player(rat(10, 1), rat(6, 1)),
                player(rat(9, 1), rat(5, 1)),
                player(rat(3, 1), rat(2, 1)),
            ],
            None,
        )
        .unwrap();
        let bids = profile(
            &inst,
            &[
                (rat(5, 1), rat(5, 1)),
                (rat(8, 1), rat(4, 1)),
                (rat(2, 1), rat(1, 1)),
            ],
        );
        let out = run_bcbo(&inst, &bids);
        // Slot 1 offers: min(5,5)=5, min(8,4)=4, min(2,1)=1 -> player 1 at 4.
        assert_eq!(out.slot_of(0), Some(0));
        assert_eq!(out.price_of(0), rat(4, 1));
        // Slot 2 offers among the rest: min(8,8)=8, min(2,2)=2 -> player 2 at 2.
        assert_eq!(out.slot_of(1), Some(1));
        assert_eq!(out.price_of(1), rat(2, 1));
        assert_eq!(out.slot_of(2), None);
    }

    #[test]
    fn bcbo_single_player_pays_zero() {
        let inst = Instance::new(
            vec![rat(1, 1)],
            vec![player(rat(4, 1), rat(2, 1))],
            None,
        )
        .unwrap();
        let bids = profile(&inst, &[(rat(4, 1), rat(2, 1))]);
        let out = run_bcbo(&inst, &bids);
        assert_eq!(out.slot_of(0), Some(0));
        assert_eq!(out.price_of(0), Rat::ZERO);
    }

    #[test]
    fn mechanisms_are_deterministic() {
        let inst = steep_ctr_instance();
        let bids = BidProfile::with_true_budgets(vec![rat(7, 1), rat(7, 1), rat(3, 2)], &inst);
        for mech in Mechanism::ALL {
            assert_eq!(mech.run(&inst, &bids), mech.run(&inst, &bids));
        }
    }
}

#[cfg(test)]
mod property_tests {
    use super::*;
    use crate::model::{Bid, Player};
    use crate::rational::rat;
    use proptest::prelude::*;

    prop_compose! {
        fn arb_setup()(
            k in 1..=3usize,
            ctr_gaps in proptest::collection::vec(1..=40i128, 3),
            values in proptest::collection::vec(0..=200i128, 5),
            budgets in proptest::collection::vec(1..=200i128, 5),
            value_bids in proptest::collection::vec(0..=200i128, 5),
            budget_bids in proptest::collection::vec(0..=200i128, 5),
            extra in 1..=4usize,
        ) -> (Instance, BidProfile) {
            let n = (k + extra).min(5);
            // Strictly decreasing positive CTRs from cumulative gaps.
            let mut ctrs = Vec::with_capacity(k);
            let mut level = 130i128;
            for gap in ctr_gaps.iter().take(k) {
                level -= gap;
                ctrs.push(rat(level, 130));
            }
            let players: Vec<Player> = (0..n)
                .map(|i| Player {
                    value: rat(values[i], 2),
                    budget: rat(budgets[i], 2),
                })
                .collect();
            let instance = Instance::new(ctrs, players, None).unwrap();
            let bids = BidProfile::new(
                (0..n)
                    .map(|i| Bid {
                        value_bid: rat(value_bids[i], 2),
                        budget_bid: rat(budget_bids[i], 2),
                    })
                    .collect(),
                &instance,
            )
            .unwrap();
            (instance, bids)
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn outcomes_are_injective_and_uncharged_when_unassigned((instance, bids) in arb_setup()) {
            for mech in Mechanism::ALL {
                let outcome = mech.run(&instance, &bids);
                let mut seen = std::collections::BTreeSet::new();
                for player in 0..bids.len() {
                    match outcome.slot_of(player) {
                        Some(slot) => {
                            prop_assert!(seen.insert(slot), "{} double-assigned slot {}", mech, slot);
                            prop_assert!(!outcome.price_of(player).is_negative());
                        }
                        None => prop_assert!(outcome.price_of(player).is_zero()),
                    }
                }
            }
        }

        #[test]
        fn rank_based_rules_charge_the_next_lower_bid((instance, bids) in arb_setup()) {
            let ranked = rank_bids(&instance, &bids);
            for mech in [Mechanism::Bosp, Mechanism::Bcp, Mechanism::Bcb] {
                let outcome = mech.run(&instance, &bids);
                for player in 0..bids.len() {
                    if outcome.slot_of(player).is_some() {
                        prop_assert_eq!(outcome.price_of(player), ranked.price_of(player));
                    }
                }
            }
        }
    }
}
