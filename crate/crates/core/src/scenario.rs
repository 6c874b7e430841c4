//! Scenario files: a single JSON document describing the auction
//! environment, optionally with a bid profile and/or a target outcome.
//! All numeric fields are exact-rational strings ("10", "1/2", "0.4");
//! floating point literals are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{Bid, BidProfile, Instance, Outcome, Player, ValidationWarning};
use crate::rational::Rat;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioPlayer {
    pub name: String,
    pub value: Rat,
    pub budget: Rat,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioBid {
    pub value_bid: Rat,
    pub budget_bid: Rat,
}

/// One row of a target outcome; slots are 1-based in scenario files.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScenarioAssignment {
    pub player: String,
    pub slot: usize,
    pub price: Rat,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scenario {
    /// Slot CTRs, highest first.
    pub slots: Vec<Rat>,
    pub players: Vec<ScenarioPlayer>,
    /// Priority order by player name; first name wins every tie. Defaults
    /// to the order the players were listed in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tie_break: Option<Vec<String>>,
    /// Bid profile aligned with `players`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bids: Option<Vec<ScenarioBid>>,
    /// Target outcome for the envy-free checker.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Vec<ScenarioAssignment>>,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("instance invalid: {}", format_list(.0))]
    Invalid(Vec<crate::model::ValidationError>),
    #[error("unknown player name {0:?}")]
    UnknownPlayer(String),
    #[error("bid list has {got} entries for {expected} players")]
    BidCount { got: usize, expected: usize },
    #[error("bad bid profile: {0}")]
    BadBids(#[from] crate::model::ProfileError),
    #[error("outcome slot {0} is out of range (1..={1})")]
    SlotOutOfRange(usize, usize),
    #[error("outcome assigns slot {0} twice")]
    SlotTakenTwice(usize),
    #[error("outcome price for {0:?} is negative")]
    NegativePrice(String),
    #[error("scenario has no {0} section but the command requires one")]
    MissingSection(&'static str),
}

fn format_list(errors: &[crate::model::ValidationError]) -> String {
    errors
        .iter()
        .map(|e| e.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn player_names(&self) -> Vec<String> {
        self.players.iter().map(|p| p.name.clone()).collect()
    }

    pub fn player_index(&self, name: &str) -> Result<usize, ScenarioError> {
        self.players
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| ScenarioError::UnknownPlayer(name.to_string()))
    }

    /// Validates into an [`Instance`] plus warning flags.
    pub fn instance(&self) -> Result<(Instance, Vec<ValidationWarning>), ScenarioError> {
        let players = self
            .players
            .iter()
            .map(|p| Player {
                value: p.value,
                budget: p.budget,
            })
            .collect();
        let tie_break = match &self.tie_break {
            None => None,
            Some(names) => {
                let mut order = Vec::with_capacity(names.len());
                for name in names {
                    order.push(self.player_index(name)?);
                }
                Some(order)
            }
        };
        let instance = Instance::new(self.slots.clone(), players, tie_break)
            .map_err(ScenarioError::Invalid)?;
        let warnings = instance.warnings();
        Ok((instance, warnings))
    }

    pub fn bid_profile(&self, instance: &Instance) -> Result<BidProfile, ScenarioError> {
        let bids = self
            .bids
            .as_ref()
            .ok_or(ScenarioError::MissingSection("bids"))?;
        if bids.len() != instance.player_count() {
            return Err(ScenarioError::BidCount {
                got: bids.len(),
                expected: instance.player_count(),
            });
        }
        Ok(BidProfile::new(
            bids.iter()
                .map(|b| Bid {
                    value_bid: b.value_bid,
                    budget_bid: b.budget_bid,
                })
                .collect(),
            instance,
        )?)
    }

    pub fn target_outcome(&self, instance: &Instance) -> Result<Outcome, ScenarioError> {
        let rows = self
            .outcome
            .as_ref()
            .ok_or(ScenarioError::MissingSection("outcome"))?;
        let mut slot_of = vec![None; instance.player_count()];
        let mut price_of = vec![Rat::ZERO; instance.player_count()];
        let mut taken = BTreeMap::new();
        for row in rows {
            let player = self.player_index(&row.player)?;
            if row.slot == 0 || row.slot > instance.slot_count() {
                return Err(ScenarioError::SlotOutOfRange(row.slot, instance.slot_count()));
            }
            if taken.insert(row.slot, player).is_some() {
                return Err(ScenarioError::SlotTakenTwice(row.slot));
            }
            if row.price.is_negative() {
                return Err(ScenarioError::NegativePrice(row.player.clone()));
            }
            slot_of[player] = Some(row.slot - 1);
            price_of[player] = row.price;
        }
        Ok(Outcome::new(slot_of, price_of))
    }
}

/// Built-in demonstration scenarios.
pub mod demos {
    use super::*;

    fn player(name: &str, value: &str, budget: &str) -> ScenarioPlayer {
        ScenarioPlayer {
            name: name.to_string(),
            value: value.parse().unwrap(),
            budget: budget.parse().unwrap(),
        }
    }

    /// Two players with equal budgets on two slots: no envy-free assignment.
    pub fn fig1() -> Scenario {
        Scenario {
            slots: vec!["1".parse().unwrap(), "1/2".parse().unwrap()],
            players: vec![player("P1", "8", "2"), player("P2", "6", "2")],
            tie_break: None,
            bids: None,
            outcome: None,
        }
    }

    /// One slot; the envy-free bids are not an equilibrium of the price rule.
    pub fn fig2() -> Scenario {
        Scenario {
            slots: vec!["1".parse().unwrap()],
            players: vec![player("P1", "10", "5"), player("P2", "5", "3")],
            tie_break: None,
            bids: Some(vec![
                ScenarioBid {
                    value_bid: "5".parse().unwrap(),
                    budget_bid: "5".parse().unwrap(),
                },
                ScenarioBid {
                    value_bid: "4".parse().unwrap(),
                    budget_bid: "3".parse().unwrap(),
                },
            ]),
            outcome: None,
        }
    }

    /// Steep-CTR three-player setting for the budget-oblivious rule.
    pub fn fig3() -> Scenario {
        Scenario {
            slots: vec!["1".parse().unwrap(), "1/100".parse().unwrap()],
            players: vec![
                player("P1", "10", "12"),
                player("P2", "9", "10"),
                player("P3", "14", "8"),
            ],
            tie_break: None,
            bids: None,
            outcome: None,
        }
    }

    /// Three players, two slots; no public-budget equilibrium under the
    /// price rule. Ties favor P3, then P2.
    pub fn fig4() -> Scenario {
        Scenario {
            slots: vec!["1".parse().unwrap(), "2/5".parse().unwrap()],
            players: vec![
                player("P1", "50", "50"),
                player("P2", "16", "5"),
                player("P3", "8", "2"),
            ],
            tie_break: Some(vec!["P3".into(), "P2".into(), "P1".into()]),
            bids: None,
            outcome: None,
        }
    }

    /// Four players on three steep slots with a full affordability-threshold
    /// chain: every slot-1 threshold sits below every slot-2 threshold,
    /// which sit below every slot-3 threshold. Ties favor larger budgets.
    pub fn thm6() -> Scenario {
        Scenario {
            slots: vec![
                "100".parse().unwrap(),
                "10".parse().unwrap(),
                "1".parse().unwrap(),
            ],
            players: vec![
                player("P1", "2001", "1000"),
                player("P2", "2002", "999"),
                player("P3", "2003", "998"),
                player("P4", "2004", "997"),
            ],
            tie_break: Some(vec!["P1".into(), "P2".into(), "P3".into(), "P4".into()]),
            bids: None,
            outcome: None,
        }
    }

    /// Asserts the threshold chain the four-player demo is built around:
    /// thresholds B_i/theta_j grouped by slot, strictly increasing across
    /// slot groups and within each group by descending budget.
    pub fn thm6_chain_holds(instance: &Instance) -> bool {
        let mut chain = Vec::new();
        for slot in 0..instance.slot_count() {
            for player in (0..instance.player_count()).rev() {
                chain.push(instance.player(player).budget / instance.ctr(slot));
            }
        }
        chain.windows(2).all(|w| w[0] < w[1])
    }

    pub fn by_name(name: &str) -> Option<Scenario> {
        match name {
            "fig1" => Some(fig1()),
            "fig2" => Some(fig2()),
            "fig3" => Some(fig3()),
            "fig4" => Some(fig4()),
            "thm6" => Some(thm6()),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_budget_scenario_surfaces_warning() {
        let scenario = demos::fig1();
        let (_, warnings) = scenario.instance().unwrap();
        assert_eq!(warnings.len(), 1);
        assert!(matches!(warnings[0], ValidationWarning::DuplicateBudget(0, 1)));
    }

    #[test]
    fn decimal_strings_parse_exactly() {
        let json = r#"{
            "slots": ["1", "0.4"],
            "players": [
                {"name": "A", "value": "50", "budget": "50"},
                {"name": "B", "value": "16", "budget": "5"}
            ]
        }"#;
        let scenario: Scenario = serde_json::from_str(json).unwrap();
        assert_eq!(scenario.slots[1], Rat::new(2, 5));
    }

    #[test]
    fn missing_players_is_a_parse_error() {
        let json = r#"{"slots": ["1"]}"#;
        assert!(serde_json::from_str::<Scenario>(json).is_err());
    }

    #[test]
    fn float_literals_are_rejected() {
        let json = r#"{
            "slots": [0.4],
            "players": [{"name": "A", "value": "1", "budget": "1"}]
        }"#;
        assert!(serde_json::from_str::<Scenario>(json).is_err());
    }

    #[test]
    fn outcome_rows_map_to_zero_based_slots() {
        let json = r#"{
            "slots": ["1", "1/2"],
            "players": [
                {"name": "A", "value": "10", "budget": "6"},
                {"name": "B", "value": "8", "budget": "3"},
                {"name": "C", "value": "4", "budget": "9/10"}
            ],
            "outcome": [
                {"player": "A", "slot": 1, "price": "4"},
                {"player": "B", "slot": 2, "price": "2"}
            ]
        }"#;
        let scenario: Scenario = serde_json::from_str(json).unwrap();
        let (instance, _) = scenario.instance().unwrap();
        let outcome = scenario.target_outcome(&instance).unwrap();
        assert_eq!(outcome.slot_of(0), Some(0));
        assert_eq!(outcome.price_of(1), Rat::new(2, 1));
        assert_eq!(outcome.slot_of(2), None);
    }

    #[test]
    fn thm6_demo_satisfies_the_threshold_chain() {
        let (instance, warnings) = demos::thm6().instance().unwrap();
        assert!(warnings.is_empty());
        assert!(demos::thm6_chain_holds(&instance));
    }

    #[test]
    fn demo_scenarios_validate() {
        for name in ["fig1", "fig2", "fig3", "fig4", "thm6"] {
            let scenario = demos::by_name(name).unwrap();
            scenario.instance().unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }
}
