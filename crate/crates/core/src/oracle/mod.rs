//! Brute-force ground truth at desk scale.
//!
//! `ef_exists` decides envy-free existence exactly: it enumerates every full
//! injective allocation and every affordability pattern, encodes the
//! envy-free conditions as a linear system over slot prices (not-afford is
//! strict), and asks the Fourier-Motzkin core. `grid_nash_search` exhausts a
//! bid grid and runs the Nash checker on every profile; an empty result is
//! refutation evidence consistent with non-existence, never a proof.

pub mod fm;

use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use itertools::Itertools;
use rayon::prelude::*;

use crate::mechanisms::Mechanism;
use crate::model::{BidProfile, Instance, Outcome};
use crate::rational::Rat;
use crate::stability::{
    check_nash, is_envy_free, Certificate, DeviationPolicy, NashCheckConfig, NashVerdict,
};
use fm::{fm_feasible, Feasibility, LinearSystem, Relation};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("instance too large for exhaustive search: {players} players / {slots} slots (max {MAX_PLAYERS}/{MAX_SLOTS})")]
    InstanceTooLarge { players: usize, slots: usize },
    #[error("grid spans {0} profiles, above the {MAX_GRID_PROFILES} cap")]
    GridTooLarge(u64),
}

pub const MAX_PLAYERS: usize = 4;
pub const MAX_SLOTS: usize = 3;
pub const MAX_GRID_PROFILES: u64 = 10_000_000;

/// Exact envy-free existence for desk-scale instances. Returns a witness
/// outcome (which is re-checked against the envy-free definition) or `None`
/// when every allocation/affordability combination is infeasible.
pub fn ef_exists(instance: &Instance) -> Result<Option<Outcome>, OracleError> {
    let n = instance.player_count();
    let k = instance.slot_count();
    if n > MAX_PLAYERS || k > MAX_SLOTS {
        return Err(OracleError::InstanceTooLarge {
            players: n,
            slots: k,
        });
    }

    for occupants in (0..n).permutations(k) {
        // Affordability pattern: bit (i*k + t) says player i can afford slot
        // t at its final price.
        'pattern: for pattern in 0..(1u32 << (n * k)) {
            let affords = |player: usize, slot: usize| pattern & (1 << (player * k + slot)) != 0;
            // An occupant must afford his own slot.
            for (slot, &occ) in occupants.iter().enumerate() {
                if !affords(occ, slot) {
                    continue 'pattern;
                }
            }
            let system = envy_system(instance, &occupants, &affords);
            if let Feasibility::Feasible(prices) = fm_feasible(&system).expect("at most 3 vars") {
                let mut slot_of = vec![None; n];
                let mut price_of = vec![Rat::ZERO; n];
                for (slot, &occ) in occupants.iter().enumerate() {
                    slot_of[occ] = Some(slot);
                    price_of[occ] = prices[slot];
                }
                let outcome = Outcome::new(slot_of, price_of);
                assert!(
                    is_envy_free(instance, &outcome).is_ok(),
                    "oracle witness failed the envy-free checker"
                );
                return Ok(Some(outcome));
            }
        }
    }
    Ok(None)
}

/// Envy-free feasibility constraints for a fixed allocation and
/// affordability pattern, over one price variable per slot.
fn envy_system(
    instance: &Instance,
    occupants: &[usize],
    affords: &impl Fn(usize, usize) -> bool,
) -> LinearSystem {
    let n = instance.player_count();
    let k = instance.slot_count();
    let mut sys = LinearSystem::new(k);
    let unit = |slot: usize, scale: Rat| {
        let mut coeffs = vec![Rat::ZERO; k];
        coeffs[slot] = scale;
        coeffs
    };
    let slot_of = |player: usize| occupants.iter().position(|&o| o == player);

    for slot in 0..k {
        // Prices are per-click and non-negative.
        sys.push(unit(slot, -Rat::ONE), Relation::Le, Rat::ZERO);
        // Rationality for the occupant: p_s <= v.
        sys.push(
            unit(slot, Rat::ONE),
            Relation::Le,
            instance.player(occupants[slot]).value,
        );
    }
    for player in 0..n {
        for slot in 0..k {
            // Pattern consistency; the afford side owns the boundary.
            if affords(player, slot) {
                sys.push(
                    unit(slot, instance.ctr(slot)),
                    Relation::Le,
                    instance.player(player).budget,
                );
            } else {
                sys.push(
                    unit(slot, instance.ctr(slot)),
                    Relation::Gt,
                    instance.player(player).budget,
                );
            }
        }
    }
    // No envy toward any affordable occupied slot.
    for player in 0..n {
        for slot in 0..k {
            if occupants[slot] == player || !affords(player, slot) {
                continue;
            }
            let theta_t = instance.ctr(slot);
            let v = instance.player(player).value;
            match slot_of(player) {
                Some(own) => {
                    // theta_own (v - p_own) >= theta_t (v - p_t)
                    let mut coeffs = vec![Rat::ZERO; k];
                    coeffs[own] = coeffs[own] + instance.ctr(own);
                    coeffs[slot] = coeffs[slot] - theta_t;
                    sys.push(coeffs, Relation::Le, (instance.ctr(own) - theta_t) * v);
                }
                None => {
                    // 0 >= theta_t (v - p_t)  <=>  p_t >= v
                    sys.push(unit(slot, Rat::ONE), Relation::Ge, v);
                }
            }
        }
    }
    sys
}

/// Which budget-bids a grid enumerates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BudgetBidPolicy {
    /// Budget-bids are pinned to the true budgets (the public-budget game);
    /// Nash checks then restrict deviations to value-bids as well.
    TrueBudgets,
    /// Budget-bids range over the same grid as value-bids.
    Grid,
}

#[derive(Clone, Debug)]
pub struct GridSpec {
    pub lo: Rat,
    pub hi: Rat,
    pub step: Rat,
    pub policy: BudgetBidPolicy,
}

impl GridSpec {
    pub fn true_budgets(lo: Rat, hi: Rat, step: Rat) -> GridSpec {
        GridSpec {
            lo,
            hi,
            step,
            policy: BudgetBidPolicy::TrueBudgets,
        }
    }

    pub fn values(&self) -> Vec<Rat> {
        assert!(self.step.is_positive(), "grid step must be positive");
        let mut out = Vec::new();
        let mut x = self.lo;
        while x <= self.hi {
            out.push(x);
            x += self.step;
        }
        out
    }
}

/// Result of an exhaustive grid sweep.
#[derive(Clone, Debug)]
pub struct GridSearch {
    pub total_profiles: u64,
    /// Profiles the Nash checker accepted, in enumeration order.
    pub nash_profiles: Vec<(u64, BidProfile)>,
    /// Deterministic sample of refuted profiles with their deviations.
    pub sampled_refutations: Vec<(u64, BidProfile, Certificate)>,
}

/// Runs [`check_nash`] on every profile of the grid and returns all profiles
/// that pass. The sweep is partitioned across worker threads by profile
/// index; results merge in index order, so the outcome is deterministic.
/// Progress goes to stderr roughly once per percent.
pub fn grid_nash_search(
    instance: &Instance,
    mechanism: Mechanism,
    grid: &GridSpec,
    config: NashCheckConfig,
    progress: bool,
) -> Result<GridSearch, OracleError> {
    let n = instance.player_count();
    let values = grid.values();
    let v = values.len() as u64;
    let dims = match grid.policy {
        BudgetBidPolicy::TrueBudgets => n as u32,
        BudgetBidPolicy::Grid => 2 * n as u32,
    };
    let total = match v.checked_pow(dims) {
        Some(t) if t <= MAX_GRID_PROFILES => t,
        Some(t) => return Err(OracleError::GridTooLarge(t)),
        None => return Err(OracleError::GridTooLarge(u64::MAX)),
    };
    let config = NashCheckConfig {
        policy: match grid.policy {
            BudgetBidPolicy::TrueBudgets => DeviationPolicy::ValueOnly,
            BudgetBidPolicy::Grid => DeviationPolicy::ValueAndBudget,
        },
        ..config
    };
    let sample_stride = (total / 16).max(1);
    let done = AtomicU64::new(0);
    let tick = (total / 100).max(1);

    let decode = |index: u64| -> BidProfile {
        let mut rest = index;
        let mut value_bids = Vec::with_capacity(n);
        let mut budget_bids = Vec::with_capacity(n);
        for _ in 0..n {
            value_bids.push(values[(rest % v) as usize]);
            rest /= v;
        }
        match grid.policy {
            BudgetBidPolicy::TrueBudgets => {
                for p in instance.players() {
                    budget_bids.push(p.budget);
                }
            }
            BudgetBidPolicy::Grid => {
                for _ in 0..n {
                    budget_bids.push(values[(rest % v) as usize]);
                    rest /= v;
                }
            }
        }
        BidProfile::new(
            value_bids
                .into_iter()
                .zip(budget_bids)
                .map(|(value_bid, budget_bid)| crate::model::Bid {
                    value_bid,
                    budget_bid,
                })
                .collect(),
            instance,
        )
        .expect("grid profiles are well-formed")
    };

    let hits: Vec<(u64, BidProfile, Option<Certificate>)> = (0..total)
        .into_par_iter()
        .filter_map(|index| {
            let count = done.fetch_add(1, AtomicOrdering::Relaxed) + 1;
            if progress && count % tick == 0 {
                eprintln!("grid-search: {count}/{total} profiles");
            }
            let bids = decode(index);
            match check_nash(instance, mechanism, &bids, config) {
                NashVerdict::Nash => Some((index, bids, None)),
                NashVerdict::NotNash(cert) => {
                    if index % sample_stride == 0 {
                        Some((index, bids, Some(cert)))
                    } else {
                        None
                    }
                }
            }
        })
        .collect();

    let mut nash_profiles = Vec::new();
    let mut sampled_refutations = Vec::new();
    for (index, bids, cert) in hits {
        match cert {
            None => nash_profiles.push((index, bids)),
            Some(c) => sampled_refutations.push((index, bids, c)),
        }
    }
    Ok(GridSearch {
        total_profiles: total,
        nash_profiles,
        sampled_refutations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Player;
    use crate::rational::rat;

    fn equal_budget_instance(b2: Rat) -> Instance {
        Instance::new(
            vec![rat(1, 1), rat(1, 2)],
            vec![
                Player {
                    value: rat(8, 1),
                    budget: rat(2, 1),
                },
                Player {
                    value: rat(6, 1),
                    budget: b2,
                },
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn equal_budgets_admit_no_envy_free_assignment() {
        let inst = equal_budget_instance(rat(2, 1));
        assert_eq!(ef_exists(&inst).unwrap(), None);
    }

    #[test]
    fn slightly_split_budgets_restore_existence() {
        let inst = equal_budget_instance(rat(199, 100));
        let witness = ef_exists(&inst).unwrap().expect("feasible");
        assert!(is_envy_free(&inst, &witness).is_ok());
    }

    #[test]
    fn single_player_single_slot_exists_at_zero() {
        let inst = Instance::new(
            vec![rat(1, 1)],
            vec![Player {
                value: rat(10, 1),
                budget: rat(5, 1),
            }],
            None,
        )
        .unwrap();
        let witness = ef_exists(&inst).unwrap().expect("feasible");
        assert_eq!(witness.slot_of(0), Some(0));
        assert_eq!(witness.price_of(0), Rat::ZERO);
    }

    #[test]
    fn worked_instance_envy_system_is_feasible() {
        // Allocation player 0 -> slot 1, player 1 -> slot 2 on the worked
        // instance; the independent checker confirms the witness.
        let inst = Instance::new(
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
        .unwrap();
        let witness = ef_exists(&inst).unwrap().expect("feasible");
        assert!(witness.covers_all_slots(&inst));
        assert!(is_envy_free(&inst, &witness).is_ok());
    }

    #[test]
    fn oversized_instances_are_rejected() {
        let inst = Instance::new(
            vec![rat(1, 1)],
            (0..5)
                .map(|i| Player {
                    value: rat(1, 1),
                    budget: rat(i as i128 + 1, 1),
                })
                .collect(),
            None,
        )
        .unwrap();
        assert!(matches!(
            ef_exists(&inst),
            Err(OracleError::InstanceTooLarge { .. })
        ));
    }

    #[test]
    fn single_player_grid_is_all_nash() {
        let inst = Instance::new(
            vec![rat(1, 1)],
            vec![Player {
                value: rat(10, 1),
                budget: rat(5, 1),
            }],
            None,
        )
        .unwrap();
        let grid = GridSpec::true_budgets(Rat::ZERO, rat(2, 1), rat(1, 1));
        for mech in Mechanism::ALL {
            let search =
                grid_nash_search(&inst, mech, &grid, NashCheckConfig::default(), false).unwrap();
            assert_eq!(search.total_profiles, 3, "{mech}");
            assert_eq!(search.nash_profiles.len(), 3, "{mech}");
        }
    }

    #[test]
    fn oversized_grid_is_rejected() {
        let inst = equal_budget_instance(rat(3, 1));
        let grid = GridSpec::true_budgets(Rat::ZERO, rat(10000, 1), rat(1, 1000));
        assert!(matches!(
            grid_nash_search(
                &inst,
                Mechanism::Bosp,
                &grid,
                NashCheckConfig::default(),
                false
            ),
            Err(OracleError::GridTooLarge(_))
        ));
    }
}
