//! Analysis reports: a human-readable rendering plus a machine block with
//! stable field names and exact rationals throughout.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::{ExtendedUtility, Instance, Outcome, utility};
use crate::rational::Rat;
use crate::stability::Certificate;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub player: String,
    /// 1-based slot, absent when unassigned.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slot: Option<usize>,
    pub price: Rat,
    pub price_decimal: String,
    pub total_charge: Rat,
    pub utility: ExtendedUtility,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mechanism: Option<String>,
    pub players: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Vec<OutcomeRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub certificates: Vec<Certificate>,
    /// Command-specific machine-readable extras, all values exact strings.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub data: BTreeMap<String, String>,
}

impl Report {
    pub fn new(command: impl Into<String>, players: Vec<String>) -> Report {
        Report {
            command: command.into(),
            mechanism: None,
            players,
            warnings: Vec::new(),
            outcome: None,
            verdict: None,
            certificates: Vec::new(),
            data: BTreeMap::new(),
        }
    }

    pub fn outcome_rows(instance: &Instance, outcome: &Outcome, names: &[String]) -> Vec<OutcomeRow> {
        (0..instance.player_count())
            .map(|i| {
                let slot = outcome.slot_of(i);
                let price = outcome.price_of(i);
                let total = match slot {
                    Some(s) => instance.ctr(s) * price,
                    None => Rat::ZERO,
                };
                OutcomeRow {
                    player: names[i].clone(),
                    slot: slot.map(|s| s + 1),
                    price,
                    price_decimal: price.to_decimal_string(6),
                    total_charge: total,
                    utility: utility(i, outcome, instance),
                }
            })
            .collect()
    }

    fn describe_certificate(&self, certificate: &Certificate) -> String {
        let name = |i: usize| {
            self.players
                .get(i)
                .cloned()
                .unwrap_or_else(|| format!("player {i}"))
        };
        match certificate {
            Certificate::EnvyViolation {
                envier,
                target_player,
                target_slot,
                gain,
            } => format!(
                "{} envies slot {} (held by {}), gaining {} ({})",
                name(*envier),
                target_slot + 1,
                name(*target_player),
                gain,
                gain.to_decimal_string(6),
            ),
            Certificate::BudgetExceeded {
                player,
                slot,
                excess,
            } => format!(
                "{} is charged {} beyond budget at slot {}",
                name(*player),
                excess,
                slot + 1,
            ),
            Certificate::UnassignedSlot { slot } => format!("slot {} is unassigned", slot + 1),
            Certificate::ImprovingDeviation {
                player,
                value_bid,
                budget_bid,
                old_utility,
                new_utility,
            } => format!(
                "{} deviates to value-bid {}, budget-bid {}: utility {} -> {}",
                name(*player),
                value_bid,
                budget_bid,
                old_utility,
                new_utility,
            ),
        }
    }

    /// Machine block only.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    /// Human rendering; ends with the same machine block.
    pub fn render(&self, json_only: bool) -> String {
        if json_only {
            return self.to_json();
        }
        let mut out = String::new();
        out.push_str(&format!("command: {}\n", self.command));
        if let Some(m) = &self.mechanism {
            out.push_str(&format!("mechanism: {m}\n"));
        }
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        if let Some(rows) = &self.outcome {
            out.push_str("outcome:\n");
            out.push_str("  player  slot  price/click        total     utility\n");
            for row in rows {
                let slot = row
                    .slot
                    .map(|s| s.to_string())
                    .unwrap_or_else(|| "-".to_string());
                out.push_str(&format!(
                    "  {:<7} {:<5} {:<18} {:<9} {}\n",
                    row.player,
                    slot,
                    format!("{} ({})", row.price, row.price_decimal),
                    row.total_charge.to_string(),
                    row.utility,
                ));
            }
        }
        if let Some(v) = &self.verdict {
            out.push_str(&format!("verdict: {v}\n"));
        }
        if !self.certificates.is_empty() {
            out.push_str("certificates:\n");
            for c in &self.certificates {
                out.push_str(&format!("  - {}\n", self.describe_certificate(c)));
            }
        }
        for (k, v) in &self.data {
            out.push_str(&format!("{k}: {v}\n"));
        }
        out.push_str(&self.to_json());
        out.push('\n');
        out
    }
}
