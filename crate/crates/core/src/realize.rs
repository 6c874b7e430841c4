//! Bid profiles realizing a given envy-free assignment.
//!
//! Each constructor returns a profile whose mechanism run reproduces the
//! assignment's allocation and prices exactly. Under the price rule the
//! profile is generally *not* an equilibrium; under the own-bid and
//! best-offer rules it is built to be one.
//!
//! The own-bid construction needs care beyond next-lower-bid chaining.
//! Giving each winner a budget-bid that covers only his own slot pins every
//! rival in place, and then the top player can under-bid into second rank
//! and keep a top slot at the lower price. Two repairs make deviations
//! unprofitable:
//!
//! * each winner's budget-bid covers his *predecessor's* slot at his own
//!   bid, so when someone drops out of line the queue shifts up and the
//!   vacated slot is absorbed at the deviator's old price;
//! * where the price order disagrees with the slot order (a budget-blocked
//!   player paying more per click at a lower slot), the shift-up punishment
//!   cannot work, so a spare losing player is parked at the exact support
//!   price with a budget-bid pinning him to the contested slot; he absorbs
//!   the slot the moment its holder under-bids.

use serde::{Deserialize, Serialize};

use crate::mechanisms::{run_bcb, run_bcbo, run_bcp};
use crate::model::{Bid, BidProfile, Instance, Outcome};
use crate::rational::Rat;
use crate::stability::{is_envy_free, Certificate};

#[derive(Clone, Debug, thiserror::Error)]
pub enum RealizeError {
    #[error("target outcome is not envy-free ({} violated constraints)", .0.len())]
    NotEnvyFree(Vec<Certificate>),
}

/// How a realization lined the players up, for reports and tests.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Realization {
    pub bids: BidProfile,
    /// Players acting as gap guards (losers parked at a support price).
    pub guards: Vec<usize>,
}

fn ensure_envy_free(instance: &Instance, ef: &Outcome) -> Result<(), RealizeError> {
    is_envy_free(instance, ef).map_err(RealizeError::NotEnvyFree)
}

/// Winners by non-increasing price (ties by priority), then losers by
/// priority.
fn price_order(instance: &Instance, ef: &Outcome) -> Vec<usize> {
    let mut order: Vec<usize> = (0..instance.player_count()).collect();
    order.sort_by(|&i, &j| {
        let iw = ef.slot_of(i).is_some();
        let jw = ef.slot_of(j).is_some();
        jw.cmp(&iw)
            .then_with(|| ef.price_of(j).cmp(&ef.price_of(i)))
            .then_with(|| instance.prefers(i, j))
    });
    order
}

/// Realizes `ef` under the price rule: winners bid the previous winner's
/// price, the top bid sits just above the top price, and every player
/// declares his true budget.
pub fn realize_bcp(instance: &Instance, ef: &Outcome) -> Result<BidProfile, RealizeError> {
    ensure_envy_free(instance, ef)?;
    let order = price_order(instance, ef);
    let mut value_bids = vec![Rat::ZERO; instance.player_count()];
    for (rank, &player) in order.iter().enumerate() {
        value_bids[player] = if rank == 0 {
            ef.price_of(player) + Rat::ONE
        } else {
            ef.price_of(order[rank - 1])
        };
    }
    let bids = BidProfile::new(
        value_bids
            .into_iter()
            .zip(instance.players())
            .map(|(value_bid, p)| Bid {
                value_bid,
                budget_bid: p.budget,
            })
            .collect(),
        instance,
    )
    .expect("realization bids are well-formed");
    debug_assert_eq!(&run_bcp(instance, &bids), ef, "price-rule realization must reproduce");
    Ok(bids)
}

/// The slot index whose CTR pins a winner's budget-bid: as high (small
/// index) as the predecessor's slot when that cannot misroute the scan, but
/// always strictly below any slot a later winner still holds.
fn pin_slot(order: &[usize], ef: &Outcome, rank: usize, k: usize) -> usize {
    let own = ef.slot_of(order[rank]).expect("winner");
    let later_below = (rank + 1..k)
        .filter_map(|m| ef.slot_of(order[m]))
        .filter(|&s| s < own)
        .max();
    let reach = match rank {
        0 => own,
        _ => own.min(ef.slot_of(order[rank - 1]).expect("winner")),
    };
    match later_below {
        Some(s) => reach.max(s + 1),
        None => reach,
    }
}

/// Realizes `ef` under the own-bid rule as an equilibrium profile (see the
/// module docs for the punishment structure).
pub fn realize_bcb(instance: &Instance, ef: &Outcome) -> Result<Realization, RealizeError> {
    ensure_envy_free(instance, ef)?;
    let n = instance.player_count();
    let k = instance.slot_count();
    let order = price_order(instance, ef);
    let mut bids = vec![
        Bid {
            value_bid: Rat::ZERO,
            budget_bid: Rat::ZERO,
        };
        n
    ];

    // Spare losers (beyond the first) are the guard pool, weakest priority
    // first so guards outrank as few real players as possible.
    let mut spares: Vec<usize> = order.iter().copied().skip(k + 1).collect();
    spares.sort_by_key(|&p| std::cmp::Reverse(instance.priority(p)));
    let mut guards: Vec<usize> = Vec::new();

    for rank in 0..k {
        let player = order[rank];
        let price = ef.price_of(player);
        let value_bid = if rank == 0 {
            price + Rat::ONE
        } else {
            let prev = order[rank - 1];
            let prev_price = ef.price_of(prev);
            let own_slot = ef.slot_of(player).expect("winner");
            let prev_slot = ef.slot_of(prev).expect("winner");
            let inverted = prev_slot > own_slot && prev_price > price;
            let guard_safe = (rank..k)
                .filter_map(|m| ef.slot_of(order[m]))
                .all(|s| s < prev_slot);
            if inverted && guard_safe {
                if let Some(guard) = spares.pop() {
                    // The guard sits at the exact support price, pinned to
                    // the contested slot; the winner bids inside the gap.
                    bids[guard] = Bid {
                        value_bid: prev_price,
                        budget_bid: instance.ctr(prev_slot) * prev_price,
                    };
                    guards.push(guard);
                    (price + prev_price) * Rat::new(1, 2)
                } else {
                    prev_price
                }
            } else {
                prev_price
            }
        };
        let pin = pin_slot(&order, ef, rank, k);
        bids[player] = Bid {
            value_bid,
            budget_bid: instance.ctr(pin) * value_bid,
        };
    }
    if n > k {
        let first_loser = order[k];
        let last_winner = order[k - 1];
        let support = ef.price_of(last_winner);
        bids[first_loser] = Bid {
            value_bid: support,
            budget_bid: instance.ctr(ef.slot_of(last_winner).expect("winner")) * support,
        };
    }
    let bids = BidProfile::new(bids, instance).expect("realization bids are well-formed");
    debug_assert_eq!(&run_bcb(instance, &bids), ef, "own-bid realization must reproduce");
    Ok(Realization { bids, guards })
}

/// Realizes `ef` under the best-offer rule: players are lined up by slot,
/// each offering exactly the previous slot's price there, so every slot's
/// second-best offer is its target price.
pub fn realize_bcbo(instance: &Instance, ef: &Outcome) -> Result<BidProfile, RealizeError> {
    ensure_envy_free(instance, ef)?;
    let n = instance.player_count();
    let k = instance.slot_count();
    let by_slot: Vec<usize> = (0..k)
        .map(|s| ef.occupant_of(s).expect("envy-free outcomes fill every slot"))
        .collect();
    let mut losers: Vec<usize> = (0..n).filter(|&p| ef.slot_of(p).is_none()).collect();
    losers.sort_by_key(|&p| instance.priority(p));

    let mut bids = vec![
        Bid {
            value_bid: Rat::ZERO,
            budget_bid: Rat::ZERO,
        };
        n
    ];
    for slot in 1..k {
        let player = by_slot[slot];
        let prev_price = ef.price_of(by_slot[slot - 1]);
        let value_bid = prev_price * instance.ctr(slot - 1) / instance.ctr(slot);
        bids[player] = Bid {
            value_bid,
            budget_bid: instance.ctr(slot - 1) * prev_price,
        };
    }
    if let Some(&first_loser) = losers.first() {
        // Only his offer at the last slot matters; make it exactly its price.
        let support = ef.price_of(by_slot[k - 1]);
        bids[first_loser] = Bid {
            value_bid: support,
            budget_bid: instance.ctr(k - 1) * support,
        };
    }
    // The top bid strictly dominates every offer anyone can make for slot 1.
    let mut cap = ef.price_of(by_slot[0]);
    for p in instance.players() {
        cap = cap.max(p.value);
    }
    for (player, bid) in bids.iter().enumerate() {
        if player != by_slot[0] {
            cap = cap.max(bid.value_bid).max(bid.budget_bid / instance.ctr(0));
        }
    }
    let top = cap + Rat::ONE;
    bids[by_slot[0]] = Bid {
        value_bid: top,
        budget_bid: instance.ctr(0) * top,
    };
    let bids = BidProfile::new(bids, instance).expect("realization bids are well-formed");
    debug_assert_eq!(&run_bcbo(instance, &bids), ef, "best-offer realization must reproduce");
    Ok(bids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::Mechanism;
    use crate::model::Player;
    use crate::rational::rat;
    use crate::stability::{check_nash, DeviationPolicy, NashCheckConfig};

    fn worked_instance() -> Instance {
        Instance::new(
            vec![rat(1, 1), rat(1, 2)],
            vec![
                Player {
                    value: rat(10, 1),
                    budget: rat(6, 1),
                },
                Player {
                    value: rat(8, 1),
                    budget: rat(3, 1),
                },
                Player {
                    value: rat(4, 1),
                    budget: rat(9, 10),
                },
            ],
            None,
        )
        .unwrap()
    }

    fn worked_ef() -> Outcome {
        Outcome::new(
            vec![Some(0), Some(1), None],
            vec![rat(4, 1), rat(2, 1), Rat::ZERO],
        )
    }

    fn one_slot_instance() -> Instance {
        Instance::new(
            vec![rat(1, 1)],
            vec![
                Player {
                    value: rat(10, 1),
                    budget: rat(5, 1),
                },
                Player {
                    value: rat(5, 1),
                    budget: rat(3, 1),
                },
            ],
            None,
        )
        .unwrap()
    }

    fn one_slot_ef() -> Outcome {
        Outcome::new(vec![Some(0), None], vec![rat(5, 1), Rat::ZERO])
    }

    #[test]
    fn bcp_one_slot_round_trip() {
        let inst = one_slot_instance();
        let bids = realize_bcp(&inst, &one_slot_ef()).unwrap();
        assert_eq!(bids.bid(0), Bid { value_bid: rat(6, 1), budget_bid: rat(5, 1) });
        assert_eq!(bids.bid(1), Bid { value_bid: rat(5, 1), budget_bid: rat(3, 1) });
        assert_eq!(run_bcp(&inst, &bids), one_slot_ef());
    }

    #[test]
    fn bcp_worked_round_trip() {
        let inst = worked_instance();
        let bids = realize_bcp(&inst, &worked_ef()).unwrap();
        let value_bids: Vec<Rat> = (0..3).map(|i| bids.bid(i).value_bid).collect();
        assert_eq!(value_bids, vec![rat(5, 1), rat(4, 1), rat(2, 1)]);
        let budget_bids: Vec<Rat> = (0..3).map(|i| bids.bid(i).budget_bid).collect();
        assert_eq!(budget_bids, vec![rat(6, 1), rat(3, 1), rat(9, 10)]);
        assert_eq!(run_bcp(&inst, &bids), worked_ef());
    }

    #[test]
    fn bcp_single_player_round_trip() {
        let inst = Instance::new(
            vec![rat(1, 1)],
            vec![Player {
                value: rat(10, 1),
                budget: rat(5, 1),
            }],
            None,
        )
        .unwrap();
        let ef = Outcome::new(vec![Some(0)], vec![Rat::ZERO]);
        let bids = realize_bcp(&inst, &ef).unwrap();
        assert_eq!(bids.bid(0).value_bid, rat(1, 1));
        assert_eq!(run_bcp(&inst, &bids), ef);
    }

    #[test]
    fn bcp_rejects_non_envy_free_targets() {
        let inst = worked_instance();
        let not_ef = Outcome::new(
            vec![Some(0), None, None],
            vec![rat(4, 1), Rat::ZERO, Rat::ZERO],
        );
        assert!(matches!(
            realize_bcp(&inst, &not_ef),
            Err(RealizeError::NotEnvyFree(_))
        ));
    }

    #[test]
    fn bcb_worked_round_trip_and_nash() {
        let inst = worked_instance();
        let real = realize_bcb(&inst, &worked_ef()).unwrap();
        let value_bids: Vec<Rat> = (0..3).map(|i| real.bids.bid(i).value_bid).collect();
        assert_eq!(value_bids, vec![rat(5, 1), rat(4, 1), rat(2, 1)]);
        // Budget-bids cover the predecessor's slot at the own bid; the first
        // loser supports the last winner's price at that winner's slot.
        let budget_bids: Vec<Rat> = (0..3).map(|i| real.bids.bid(i).budget_bid).collect();
        assert_eq!(budget_bids, vec![rat(5, 1), rat(4, 1), rat(1, 1)]);
        assert!(real.guards.is_empty());
        assert_eq!(run_bcb(&inst, &real.bids), worked_ef());
        assert!(check_nash(&inst, Mechanism::Bcb, &real.bids, NashCheckConfig::default()).is_nash());
    }

    #[test]
    fn bcb_one_slot_round_trip_and_nash() {
        let inst = one_slot_instance();
        let real = realize_bcb(&inst, &one_slot_ef()).unwrap();
        assert_eq!(real.bids.bid(0), Bid { value_bid: rat(6, 1), budget_bid: rat(6, 1) });
        assert_eq!(real.bids.bid(1), Bid { value_bid: rat(5, 1), budget_bid: rat(5, 1) });
        assert_eq!(run_bcb(&inst, &real.bids), one_slot_ef());
        assert!(check_nash(&inst, Mechanism::Bcb, &real.bids, NashCheckConfig::default()).is_nash());
    }

    #[test]
    fn bcb_single_player_round_trip() {
        let inst = Instance::new(
            vec![rat(1, 1)],
            vec![Player {
                value: rat(10, 1),
                budget: rat(5, 1),
            }],
            None,
        )
        .unwrap();
        let ef = Outcome::new(vec![Some(0)], vec![Rat::ZERO]);
        let real = realize_bcb(&inst, &ef).unwrap();
        assert_eq!(real.bids.bid(0).value_bid, rat(1, 1));
        assert_eq!(real.bids.bid(0).budget_bid, rat(1, 1));
        assert_eq!(run_bcb(&inst, &real.bids), ef);
    }

    #[test]
    fn bcb_guarded_inversion_round_trip_and_nash() {
        // Budget-blocked player pays 29/5 per click at slot 2 while slot 1
        // costs 3; a guard loser must absorb slot 2 if its holder under-bids.
        let inst = Instance::new(
            vec![rat(1, 1), rat(1, 2)],
            vec![
                Player {
                    value: rat(100, 1),
                    budget: rat(3, 1),
                },
                Player {
                    value: rat(9, 1),
                    budget: rat(29, 10),
                },
                Player {
                    value: rat(1, 10),
                    budget: rat(1, 100),
                },
                Player {
                    value: rat(1, 5),
                    budget: rat(1, 50),
                },
            ],
            None,
        )
        .unwrap();
        let ef = Outcome::new(
            vec![Some(0), Some(1), None, None],
            vec![rat(3, 1), rat(29, 5), Rat::ZERO, Rat::ZERO],
        );
        assert!(is_envy_free(&inst, &ef).is_ok());
        let real = realize_bcb(&inst, &ef).unwrap();
        assert_eq!(real.guards.len(), 1);
        assert_eq!(run_bcb(&inst, &real.bids), ef);
        assert!(check_nash(&inst, Mechanism::Bcb, &real.bids, NashCheckConfig::default()).is_nash());
    }

    #[test]
    fn bcbo_worked_round_trip_and_nash() {
        let inst = worked_instance();
        let bids = realize_bcbo(&inst, &worked_ef()).unwrap();
        // Slot-2 holder offers the slot-1 price there: bid 4*(1)/(1/2) = 8,
        // budget-bid 1*4 = 4; the first loser supports price 2 at slot 2.
        assert_eq!(bids.bid(1), Bid { value_bid: rat(8, 1), budget_bid: rat(4, 1) });
        assert_eq!(bids.bid(2), Bid { value_bid: rat(2, 1), budget_bid: rat(1, 1) });
        assert_eq!(run_bcbo(&inst, &bids), worked_ef());
        assert!(check_nash(&inst, Mechanism::Bcbo, &bids, NashCheckConfig::default()).is_nash());
    }

    #[test]
    fn bcbo_one_slot_round_trip() {
        let inst = one_slot_instance();
        let bids = realize_bcbo(&inst, &one_slot_ef()).unwrap();
        assert_eq!(bids.bid(1), Bid { value_bid: rat(5, 1), budget_bid: rat(5, 1) });
        assert_eq!(run_bcbo(&inst, &bids), one_slot_ef());
        assert!(check_nash(&inst, Mechanism::Bcbo, &bids, NashCheckConfig::default()).is_nash());
    }

    #[test]
    fn bcbo_single_player_round_trip() {
        let inst = Instance::new(
            vec![rat(1, 1)],
            vec![Player {
                value: rat(10, 1),
                budget: rat(5, 1),
            }],
            None,
        )
        .unwrap();
        let ef = Outcome::new(vec![Some(0)], vec![Rat::ZERO]);
        let bids = realize_bcbo(&inst, &ef).unwrap();
        assert_eq!(run_bcbo(&inst, &bids), ef);
    }

    #[test]
    fn realized_ef_under_price_rule_need_not_be_nash() {
        let inst = one_slot_instance();
        let bids = realize_bcp(&inst, &one_slot_ef()).unwrap();
        let verdict = check_nash(&inst, Mechanism::Bcp, &bids, NashCheckConfig::default());
        assert!(!verdict.is_nash());
    }

    #[test]
    fn value_only_deviations_also_fail_to_improve_on_bcb_realizations() {
        let inst = worked_instance();
        let real = realize_bcb(&inst, &worked_ef()).unwrap();
        let config = NashCheckConfig {
            policy: DeviationPolicy::ValueOnly,
            ..NashCheckConfig::default()
        };
        assert!(check_nash(&inst, Mechanism::Bcb, &real.bids, config).is_nash());
    }
}
