//! Auction environment: slots with click-through rates, players with values
//! and budgets, bid profiles, outcomes, and the budget-aware utility.
//!
//! An assigned player pays a per-click price; the period total is
//! `ctr * price`. Exceeding the *true* budget makes the slot worthless
//! (utility minus infinity), which is strictly worse than staying out.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rational::Rat;

/// One advertiser: per-click value and a total budget for the period.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Player {
    pub value: Rat,
    pub budget: Rat,
}

/// A validated auction environment.
///
/// Invariants enforced by [`Instance::new`]: CTRs strictly decreasing and
/// positive, player values non-negative, budgets positive, at least as many
/// players as slots, and `tie_break` a permutation of the player indices.
/// Duplicate budgets are legal here (checkers accept them) but are surfaced
/// as a warning because the envy-free constructor refuses them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    ctrs: Vec<Rat>,
    players: Vec<Player>,
    /// Priority list: `tie_break[0]` wins every tie.
    tie_break: Vec<usize>,
    /// Inverse of `tie_break`: `priority[i]` is the rank of player `i`.
    priority: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ValidationError {
    #[error("slot {0} has CTR {1} which does not strictly decrease from the previous slot")]
    NonIncreasingCtr(usize, Rat),
    #[error("slot {0} has non-positive CTR {1}")]
    NonPositiveCtr(usize, Rat),
    #[error("player {0} has negative value {1}")]
    NegativeValue(usize, Rat),
    #[error("player {0} has non-positive budget {1}")]
    NonPositiveBudget(usize, Rat),
    #[error("{players} players cannot fill {slots} slots")]
    TooFewPlayers { players: usize, slots: usize },
    #[error("tie-break order is not a permutation of the player indices")]
    BadTieBreak,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValidationWarning {
    /// Two players declared identical budgets; `construct_envy_free` will
    /// refuse this instance, every checker accepts it.
    DuplicateBudget(usize, usize),
}

impl fmt::Display for ValidationWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationWarning::DuplicateBudget(i, j) => {
                write!(f, "players {i} and {j} declare the same budget")
            }
        }
    }
}

impl Instance {
    /// Validates and normalizes an instance description. Returns every
    /// violated invariant, not just the first.
    pub fn new(
        ctrs: Vec<Rat>,
        players: Vec<Player>,
        tie_break: Option<Vec<usize>>,
    ) -> Result<Instance, Vec<ValidationError>> {
        let mut errors = Vec::new();
        for (s, ctr) in ctrs.iter().enumerate() {
            if !ctr.is_positive() {
                errors.push(ValidationError::NonPositiveCtr(s, *ctr));
            }
            if s > 0 && *ctr >= ctrs[s - 1] {
                errors.push(ValidationError::NonIncreasingCtr(s, *ctr));
            }
        }
        for (i, p) in players.iter().enumerate() {
            if p.value.is_negative() {
                errors.push(ValidationError::NegativeValue(i, p.value));
            }
            if !p.budget.is_positive() {
                errors.push(ValidationError::NonPositiveBudget(i, p.budget));
            }
        }
        if players.len() < ctrs.len() {
            errors.push(ValidationError::TooFewPlayers {
                players: players.len(),
                slots: ctrs.len(),
            });
        }
        let tie_break = tie_break.unwrap_or_else(|| (0..players.len()).collect());
        let mut seen = vec![false; players.len()];
        let mut tie_ok = tie_break.len() == players.len();
        if tie_ok {
            for &i in &tie_break {
                if i >= players.len() || seen[i] {
                    tie_ok = false;
                    break;
                }
                seen[i] = true;
            }
        }
        if !tie_ok {
            errors.push(ValidationError::BadTieBreak);
        }
        if !errors.is_empty() {
            return Err(errors);
        }
        let mut priority = vec![0usize; players.len()];
        for (rank, &i) in tie_break.iter().enumerate() {
            priority[i] = rank;
        }
        Ok(Instance {
            ctrs,
            players,
            tie_break,
            priority,
        })
    }

    /// Warnings that do not invalidate the instance.
    pub fn warnings(&self) -> Vec<ValidationWarning> {
        let mut out = Vec::new();
        for i in 0..self.players.len() {
            for j in i + 1..self.players.len() {
                if self.players[i].budget == self.players[j].budget {
                    out.push(ValidationWarning::DuplicateBudget(i, j));
                }
            }
        }
        out
    }

    pub fn has_distinct_budgets(&self) -> bool {
        self.warnings().is_empty()
    }

    pub fn slot_count(&self) -> usize {
        self.ctrs.len()
    }

    pub fn player_count(&self) -> usize {
        self.players.len()
    }

    pub fn ctr(&self, slot: usize) -> Rat {
        self.ctrs[slot]
    }

    pub fn ctrs(&self) -> &[Rat] {
        &self.ctrs
    }

    pub fn player(&self, i: usize) -> Player {
        self.players[i]
    }

    pub fn players(&self) -> &[Player] {
        &self.players
    }

    pub fn tie_break(&self) -> &[usize] {
        &self.tie_break
    }

    /// Tie rank of player `i`; lower wins disputes.
    pub fn priority(&self, i: usize) -> usize {
        self.priority[i]
    }

    /// Orders `i` before `j` when `i` holds the stronger tie priority.
    pub fn prefers(&self, i: usize, j: usize) -> Ordering {
        self.priority[i].cmp(&self.priority[j])
    }

    /// Test-only constructor that skips validation; lets unit tests probe
    /// mechanism behavior on degenerate shapes (e.g. fewer players than
    /// slots) that `new` rejects.
    #[cfg(test)]
    pub(crate) fn unchecked(ctrs: Vec<Rat>, players: Vec<Player>) -> Instance {
        let n = players.len();
        Instance {
            ctrs,
            players,
            tie_break: (0..n).collect(),
            priority: (0..n).collect(),
        }
    }
}

/// One strategy entry: declared per-click willingness and declared total cap.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bid {
    pub value_bid: Rat,
    pub budget_bid: Rat,
}

/// A full strategy profile, one [`Bid`] per player.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BidProfile {
    bids: Vec<Bid>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ProfileError {
    #[error("profile has {got} bids for {expected} players")]
    WrongLength { got: usize, expected: usize },
    #[error("player {0} bids a negative amount")]
    NegativeBid(usize),
}

impl BidProfile {
    pub fn new(bids: Vec<Bid>, instance: &Instance) -> Result<BidProfile, ProfileError> {
        if bids.len() != instance.player_count() {
            return Err(ProfileError::WrongLength {
                got: bids.len(),
                expected: instance.player_count(),
            });
        }
        for (i, b) in bids.iter().enumerate() {
            if b.value_bid.is_negative() || b.budget_bid.is_negative() {
                return Err(ProfileError::NegativeBid(i));
            }
        }
        Ok(BidProfile { bids })
    }

    /// Truthful budget declarations with the given value bids.
    pub fn with_true_budgets(value_bids: Vec<Rat>, instance: &Instance) -> BidProfile {
        let bids = value_bids
            .into_iter()
            .zip(instance.players())
            .map(|(value_bid, p)| Bid {
                value_bid,
                budget_bid: p.budget,
            })
            .collect();
        BidProfile { bids }
    }

    pub fn bid(&self, i: usize) -> Bid {
        self.bids[i]
    }

    pub fn bids(&self) -> &[Bid] {
        &self.bids
    }

    pub fn len(&self) -> usize {
        self.bids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bids.is_empty()
    }

    /// Copy of the profile with player `i`'s bid replaced.
    pub fn with_bid(&self, i: usize, bid: Bid) -> BidProfile {
        let mut bids = self.bids.clone();
        bids[i] = bid;
        BidProfile { bids }
    }
}

/// Partial injective assignment of players to slots plus per-click prices.
/// Unassigned players carry price zero and are charged nothing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    slot_of: Vec<Option<usize>>,
    price_of: Vec<Rat>,
}

impl Outcome {
    /// Builds an outcome, checking injectivity and price non-negativity.
    pub fn new(slot_of: Vec<Option<usize>>, price_of: Vec<Rat>) -> Outcome {
        assert_eq!(slot_of.len(), price_of.len());
        let mut taken = std::collections::BTreeSet::new();
        for (i, slot) in slot_of.iter().enumerate() {
            if let Some(s) = slot {
                assert!(taken.insert(*s), "slot {s} assigned twice");
            } else {
                assert!(price_of[i].is_zero(), "unassigned player {i} carries a price");
            }
            assert!(!price_of[i].is_negative(), "negative price for player {i}");
        }
        Outcome { slot_of, price_of }
    }

    pub fn empty(n: usize) -> Outcome {
        Outcome {
            slot_of: vec![None; n],
            price_of: vec![Rat::ZERO; n],
        }
    }

    pub fn player_count(&self) -> usize {
        self.slot_of.len()
    }

    pub fn slot_of(&self, player: usize) -> Option<usize> {
        self.slot_of[player]
    }

    /// Per-click price charged to `player` (zero when unassigned).
    pub fn price_of(&self, player: usize) -> Rat {
        self.price_of[player]
    }

    pub fn occupant_of(&self, slot: usize) -> Option<usize> {
        self.slot_of.iter().position(|s| *s == Some(slot))
    }

    pub fn assigned_players(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.slot_of.len()).filter(|&i| self.slot_of[i].is_some())
    }

    /// True when every slot of `instance` has an occupant.
    pub fn covers_all_slots(&self, instance: &Instance) -> bool {
        (0..instance.slot_count()).all(|s| self.occupant_of(s).is_some())
    }
}

/// Utility that is either a finite rational or the budget-violation sentinel.
/// `NegInfinity` compares below every finite value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExtendedUtility {
    NegInfinity,
    Finite(Rat),
}

impl ExtendedUtility {
    pub fn finite(self) -> Option<Rat> {
        match self {
            ExtendedUtility::Finite(x) => Some(x),
            ExtendedUtility::NegInfinity => None,
        }
    }
}

impl fmt::Display for ExtendedUtility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedUtility::NegInfinity => f.write_str("-inf"),
            ExtendedUtility::Finite(x) => write!(f, "{x}"),
        }
    }
}

impl Serialize for ExtendedUtility {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ExtendedUtility {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        if s == "-inf" {
            Ok(ExtendedUtility::NegInfinity)
        } else {
            s.parse::<Rat>()
                .map(ExtendedUtility::Finite)
                .map_err(serde::de::Error::custom)
        }
    }
}

/// Utility of `player` under `outcome`: zero when unassigned, the click-rate
/// weighted surplus when the assignment respects the player's true budget,
/// minus infinity otherwise.
pub fn utility(player: usize, outcome: &Outcome, instance: &Instance) -> ExtendedUtility {
    match outcome.slot_of(player) {
        None => ExtendedUtility::Finite(Rat::ZERO),
        Some(slot) => {
            let theta = instance.ctr(slot);
            let price = outcome.price_of(player);
            let p = instance.player(player);
            if theta * price <= p.budget {
                ExtendedUtility::Finite(theta * (p.value - price))
            } else {
                ExtendedUtility::NegInfinity
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    fn fig1_instance() -> Result<Instance, Vec<ValidationError>> {
        Instance::new(
            vec![rat(1, 1), rat(1, 2)],
            vec![
                Player {
                    value: rat(8, 1),
                    budget: rat(2, 1),
                },
                Player {
                    value: rat(6, 1),
                    budget: rat(2, 1),
                },
            ],
            None,
        )
    }

    #[test]
    fn equal_budgets_validate_with_warning() {
        let inst = fig1_instance().unwrap();
        assert_eq!(
            inst.warnings(),
            vec![ValidationWarning::DuplicateBudget(0, 1)]
        );
        assert!(!inst.has_distinct_budgets());
    }

    #[test]
    fn well_formed_instance_validates() {
        let inst = Instance::new(
            vec![rat(1, 1), rat(1, 2)],
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
        .unwrap();
        assert!(inst.warnings().is_empty());
        assert_eq!(inst.tie_break(), &[0, 1]);
    }

    #[test]
    fn equal_ctrs_rejected() {
        let err = Instance::new(
            vec![rat(1, 1), rat(1, 1)],
            vec![
                Player {
                    value: rat(1, 1),
                    budget: rat(1, 1),
                },
                Player {
                    value: rat(1, 1),
                    budget: rat(2, 1),
                },
            ],
            None,
        )
        .unwrap_err();
        assert!(matches!(err[0], ValidationError::NonIncreasingCtr(1, _)));
    }

    #[test]
    fn all_violations_reported_at_once() {
        let err = Instance::new(
            vec![rat(1, 2), rat(1, 1), rat(0, 1)],
            vec![Player {
                value: rat(-1, 1),
                budget: Rat::ZERO,
            }],
            Some(vec![0, 0]),
        )
        .unwrap_err();
        assert!(err.len() >= 5);
        assert!(err.contains(&ValidationError::TooFewPlayers {
            players: 1,
            slots: 3
        }));
        assert!(err.contains(&ValidationError::BadTieBreak));
    }

    #[test]
    fn revalidation_is_idempotent() {
        let inst = fig1_instance().unwrap();
        let again = Instance::new(
            inst.ctrs().to_vec(),
            inst.players().to_vec(),
            Some(inst.tie_break().to_vec()),
        )
        .unwrap();
        assert_eq!(inst, again);
    }

    #[test]
    fn utility_branches() {
        let inst = Instance::new(
            vec![rat(1, 1)],
            vec![
                Player {
                    value: rat(10, 1),
                    budget: rat(5, 1),
                },
                Player {
                    value: rat(3, 1),
                    budget: rat(1, 1),
                },
            ],
            None,
        )
        .unwrap();

        // Unassigned player sits at zero.
        let out = Outcome::new(vec![None, None], vec![Rat::ZERO, Rat::ZERO]);
        assert_eq!(utility(0, &out, &inst), ExtendedUtility::Finite(Rat::ZERO));

        // theta=1, v=10, p=4, B=5: within budget.
        let out = Outcome::new(vec![Some(0), None], vec![rat(4, 1), Rat::ZERO]);
        assert_eq!(utility(0, &out, &inst), ExtendedUtility::Finite(rat(6, 1)));

        // p=6 blows the budget of 5.
        let out = Outcome::new(vec![Some(0), None], vec![rat(6, 1), Rat::ZERO]);
        assert_eq!(utility(0, &out, &inst), ExtendedUtility::NegInfinity);
    }

    #[test]
    fn neg_infinity_below_every_finite() {
        assert!(ExtendedUtility::NegInfinity < ExtendedUtility::Finite(rat(-1000, 1)));
        assert!(ExtendedUtility::Finite(Rat::ZERO) > ExtendedUtility::NegInfinity);
    }
}
