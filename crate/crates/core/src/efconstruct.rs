//! Envy-free assignment construction by iterative price lowering.
//!
//! Prices start at a finite stand-in for "unaffordable for everyone" and only
//! ever decrease. Each free slot is lowered to the largest price at which some
//! player wants it (wants = can afford it and would get at least his running
//! value `U_i` there). Strict enviers take the slot; unassigned players who
//! are exactly indifferent take it; when only *assigned* players are
//! indifferent, their slots and the free slot are lowered concurrently and
//! proportionally until an outside player triggers, after which seats shift
//! along the indifference chain so the free slot fills.
//!
//! The lowering is event-driven: every stopping point is computed in closed
//! form, so all prices stay exact rationals. Distinct budgets make the
//! affordability trigger unique; residual ties fall back to the priority
//! order.

use serde::{Deserialize, Serialize};

use crate::model::{Instance, Outcome};
use crate::rational::Rat;
use crate::stability::is_envy_free;

/// Default bound on process events; the existence argument guarantees
/// termination, so exceeding this signals an implementation defect.
pub const DEFAULT_EVENT_CAP: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EfError {
    #[error("envy-free construction requires pairwise-distinct budgets")]
    DistinctBudgetsRequired,
    #[error("price-lowering process exceeded {0} events; internal defect")]
    IterationCapExceeded(usize),
    #[error("price-lowering process stalled: {0}; internal defect")]
    Stalled(&'static str),
}

/// Which rule fired at an event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventCase {
    /// A free slot's price dropped to its first want-point.
    Lower,
    /// A strict envier took the free slot.
    EnvierTakes,
    /// An unassigned indifferent player took the free slot.
    BarelyWantingTakes,
    /// Concurrent proportional lowering advanced by some amount.
    ConcurrentLower,
    /// An assigned indifferent player joined the lowering set.
    JoinsLoweringSet,
    /// A claimant (envier or unassigned wanter) was served a slot.
    ClaimantServed,
    /// A displaced player shifted along the indifference chain.
    ChainShift,
    /// A displaced player could not be re-seated and left the assignment.
    Displaced,
}

/// One record per event, for debugging and the monotonicity assertions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EfEvent {
    pub case: EventCase,
    pub slot: usize,
    pub price: Rat,
    pub player: Option<usize>,
}

struct Lowering<'a> {
    instance: &'a Instance,
    price: Vec<Rat>,
    /// Running value per player; never decreases.
    running: Vec<Rat>,
    seat: Vec<Option<usize>>,    // slot -> player
    slot_of: Vec<Option<usize>>, // player -> slot
    events: Vec<EfEvent>,
    cap: usize,
}

impl<'a> Lowering<'a> {
    fn new(instance: &'a Instance, cap: usize) -> Lowering<'a> {
        // Start above every affordability threshold and every value, so that
        // no player can afford (or wants) any slot.
        let k = instance.slot_count();
        let smallest_ctr = instance.ctr(k - 1);
        let mut start = Rat::ZERO;
        for p in instance.players() {
            start = start.max(p.value).max(p.budget / smallest_ctr);
        }
        let start = start + Rat::ONE;
        Lowering {
            instance,
            price: vec![start; k],
            running: vec![Rat::ZERO; instance.player_count()],
            seat: vec![None; k],
            slot_of: vec![None; instance.player_count()],
            events: Vec::new(),
            cap,
        }
    }

    fn record(&mut self, case: EventCase, slot: usize, player: Option<usize>) -> Result<(), EfError> {
        self.events.push(EfEvent {
            case,
            slot,
            price: self.price[slot],
            player,
        });
        if self.events.len() > self.cap {
            return Err(EfError::IterationCapExceeded(self.cap));
        }
        Ok(())
    }

    fn utility_at(&self, player: usize, slot: usize, price: Rat) -> Rat {
        self.instance.ctr(slot) * (self.instance.player(player).value - price)
    }

    fn affords(&self, player: usize, slot: usize, price: Rat) -> bool {
        self.instance.ctr(slot) * price <= self.instance.player(player).budget
    }

    fn wants(&self, player: usize, slot: usize, price: Rat) -> bool {
        self.affords(player, slot, price)
            && self.utility_at(player, slot, price) >= self.running[player]
    }

    fn envies(&self, player: usize, slot: usize, price: Rat) -> bool {
        self.affords(player, slot, price)
            && self.utility_at(player, slot, price) > self.running[player]
    }

    /// Highest price at which `player` would want `slot`.
    fn want_price(&self, player: usize, slot: usize) -> Rat {
        let p = self.instance.player(player);
        let theta = self.instance.ctr(slot);
        (p.budget / theta).min(p.value - self.running[player] / theta)
    }

    fn seat_player(&mut self, player: usize, slot: usize) {
        if let Some(old) = self.slot_of[player] {
            self.seat[old] = None;
        }
        if let Some(evicted) = self.seat[slot] {
            self.slot_of[evicted] = None;
        }
        self.seat[slot] = Some(player);
        self.slot_of[player] = Some(slot);
        let u = self.utility_at(player, slot, self.price[slot]);
        debug_assert!(u >= self.running[player], "running value may only increase");
        self.running[player] = u;
    }

    fn free_slots(&self) -> Vec<usize> {
        (0..self.instance.slot_count())
            .filter(|&s| self.seat[s].is_none())
            .collect()
    }

    fn run(mut self) -> Result<(Outcome, Vec<EfEvent>), EfError> {
        while !self.free_slots().is_empty() {
            let mut progressed = false;
            for slot in self.free_slots() {
                if self.handle_free_slot(slot)? {
                    progressed = true;
                    break;
                }
            }
            if !progressed {
                return Err(EfError::Stalled("no free slot admits a non-negative want price"));
            }
        }
        let price_of = (0..self.instance.player_count())
            .map(|i| match self.slot_of[i] {
                Some(s) => self.price[s],
                None => Rat::ZERO,
            })
            .collect();
        let outcome = Outcome::new(self.slot_of.clone(), price_of);
        Ok((outcome, self.events))
    }

    /// Lowers `slot` to its first want-point and applies the case analysis.
    /// Returns false when nobody would want the slot at any non-negative
    /// price, which the existence argument rules out for at least one free
    /// slot.
    fn handle_free_slot(&mut self, slot: usize) -> Result<bool, EfError> {
        let stop = (0..self.instance.player_count())
            .map(|i| self.want_price(i, slot))
            .max()
            .expect("at least one player");
        if stop.is_negative() {
            return Ok(false);
        }
        if stop < self.price[slot] {
            self.price[slot] = stop;
            self.record(EventCase::Lower, slot, None)?;
        }
        let price = self.price[slot];

        // Case 1: a strict envier takes the slot.
        if let Some(envier) = self.pick_by_priority(|i| self.envies(i, slot, price)) {
            self.seat_player(envier, slot);
            self.record(EventCase::EnvierTakes, slot, Some(envier))?;
            return Ok(true);
        }
        // Case 2: an unassigned player barely wants it.
        if let Some(taker) =
            self.pick_by_priority(|i| self.slot_of[i].is_none() && self.wants(i, slot, price))
        {
            self.seat_player(taker, slot);
            self.record(EventCase::BarelyWantingTakes, slot, Some(taker))?;
            return Ok(true);
        }
        // Case 3: only assigned players are indifferent toward the slot.
        self.concurrent_lowering(slot)?;
        Ok(true)
    }

    fn pick_by_priority(&self, mut pred: impl FnMut(usize) -> bool) -> Option<usize> {
        (0..self.instance.player_count())
            .filter(|&i| pred(i))
            .min_by_key(|&i| self.instance.priority(i))
    }

    /// Concurrent proportional lowering: the free slot and the seats of the
    /// indifferent set drop together (each by X/theta) until some player
    /// newly wants one of them, then claimants are served and seats shift
    /// along the join chain so the free slot fills.
    ///
    /// Inside the set a player's running value rises exactly with X, as does
    /// his utility at every lowering slot, so his envy gap toward a lowering
    /// slot is constant; only affordability arrivals can make a member newly
    /// (and then strictly) envy another lowering slot. Outsiders' running
    /// values stay put, so both affordability and indifference arrivals
    /// trigger for them.
    fn concurrent_lowering(&mut self, free_slot: usize) -> Result<(), EfError> {
        // Members joined the set because they barely want `join_target`;
        // targets always point at an earlier member's seat or the free slot,
        // so chains of shifts terminate at the free slot.
        let mut members: Vec<usize> = Vec::new();
        let mut join_target: Vec<Option<usize>> = vec![None; self.instance.player_count()];
        let mut lowering_slots: Vec<usize> = vec![free_slot];
        let price = self.price[free_slot];
        for i in 0..self.instance.player_count() {
            if self.slot_of[i].is_some() && self.wants(i, free_slot, price) {
                members.push(i);
                join_target[i] = Some(free_slot);
                lowering_slots.push(self.slot_of[i].expect("assigned"));
            }
        }
        debug_assert!(!members.is_empty());

        loop {
            // Next trigger: the smallest X at which some player starts
            // wanting a lowering slot he does not sit on. For outsiders,
            // wanting starts at
            //   X >= theta_t*p_t - B_j   (affordability reached) and
            //   X >= U_j - theta_t*(v_j - p_t)   (indifference reached).
            // For members only an affordability arrival with a positive
            // static envy gap is an event.
            let mut next: Option<Rat> = None;
            for j in 0..self.instance.player_count() {
                for &t in &lowering_slots {
                    if self.slot_of[j] == Some(t) {
                        continue;
                    }
                    let theta = self.instance.ctr(t);
                    let afford_at = theta * self.price[t] - self.instance.player(j).budget;
                    let x = if members.contains(&j) {
                        let gap = self.utility_at(j, t, self.price[t]) - self.running[j];
                        if gap.is_positive() && afford_at.is_positive() {
                            afford_at
                        } else {
                            continue;
                        }
                    } else {
                        let indiff_at = self.running[j] - self.utility_at(j, t, self.price[t]);
                        afford_at.max(indiff_at).max(Rat::ZERO)
                    };
                    next = Some(match next {
                        Some(cur) => cur.min(x),
                        None => x,
                    });
                }
            }
            let x = next.ok_or(EfError::Stalled("no candidate trigger in concurrent lowering"))?;
            let floor = lowering_slots
                .iter()
                .map(|&t| self.instance.ctr(t) * self.price[t])
                .min()
                .expect("non-empty");
            if x > floor {
                return Err(EfError::Stalled("concurrent lowering hit the zero-price floor"));
            }
            if x.is_positive() {
                for &t in &lowering_slots {
                    self.price[t] = self.price[t] - x / self.instance.ctr(t);
                }
                for &m in &members {
                    self.running[m] += x;
                }
                self.record(EventCase::ConcurrentLower, free_slot, None)?;
            }

            // Classify the players that now want a lowering slot.
            let mut new_members: Vec<(usize, usize)> = Vec::new(); // (player, slot)
            let mut claimants: Vec<(usize, bool)> = Vec::new(); // (player, is_envier)
            for j in 0..self.instance.player_count() {
                let mut wanted: Vec<usize> = lowering_slots
                    .iter()
                    .copied()
                    .filter(|&t| self.slot_of[j] != Some(t) && self.wants(j, t, self.price[t]))
                    .collect();
                wanted.sort_unstable();
                let envies_some = wanted.iter().any(|&t| self.envies(j, t, self.price[t]));
                if members.contains(&j) {
                    // Standing members count only as strict enviers; their
                    // barely-wanted slots are already part of the set.
                    if envies_some {
                        claimants.push((j, true));
                    }
                    continue;
                }
                if wanted.is_empty() {
                    continue;
                }
                if self.slot_of[j].is_some() && !envies_some {
                    new_members.push((j, wanted[0]));
                } else {
                    claimants.push((j, envies_some));
                }
            }
            if claimants.is_empty() {
                if new_members.is_empty() {
                    return Err(EfError::Stalled("trigger produced no wanting player"));
                }
                for (j, target) in new_members {
                    members.push(j);
                    join_target[j] = Some(target);
                    lowering_slots.push(self.slot_of[j].expect("assigned"));
                    self.record(EventCase::JoinsLoweringSet, self.slot_of[j].unwrap(), Some(j))?;
                }
                continue;
            }

            // Serve claimants, enviers before barely-wanting unassigned
            // players, both by priority. Displaced members shift along their
            // join chain toward the free slot; anyone whose chain is blocked
            // becomes unassigned (keeping his running value).
            claimants.sort_by_key(|&(j, is_envier)| (!is_envier, self.instance.priority(j)));
            let mut displaced: Vec<usize> = Vec::new();
            for (claimant, _) in claimants {
                // Assigned claimants move only for strict gains; unassigned
                // ones also accept exact indifference.
                let assigned = self.slot_of[claimant].is_some();
                let mut options: Vec<usize> = lowering_slots
                    .iter()
                    .copied()
                    .filter(|&t| {
                        self.slot_of[claimant] != Some(t)
                            && if assigned {
                                self.envies(claimant, t, self.price[t])
                            } else {
                                self.wants(claimant, t, self.price[t])
                            }
                    })
                    .collect();
                options.sort_unstable();
                let best = options.into_iter().max_by(|&a, &b| {
                    self.utility_at(claimant, a, self.price[a])
                        .cmp(&self.utility_at(claimant, b, self.price[b]))
                        .then(b.cmp(&a)) // prefer the lower index on ties
                });
                let Some(target) = best else { continue };
                if let Some(occupant) = self.seat[target] {
                    if !members.contains(&occupant) {
                        // Taken by an earlier claimant in this event.
                        continue;
                    }
                    displaced.push(occupant);
                }
                members.retain(|&m| m != claimant);
                self.seat_player(claimant, target);
                self.record(EventCase::ClaimantServed, target, Some(claimant))?;
            }
            while let Some(player) = displaced.pop() {
                let mut shifted = false;
                if let Some(target) = join_target[player] {
                    if self.seat[target].is_none() && self.wants(player, target, self.price[target]) {
                        self.seat_player(player, target);
                        self.record(EventCase::ChainShift, target, Some(player))?;
                        shifted = true;
                    } else if let Some(occupant) = self.seat[target] {
                        if members.contains(&occupant) && occupant != player {
                            displaced.push(occupant);
                            self.seat_player(player, target);
                            self.record(EventCase::ChainShift, target, Some(player))?;
                            shifted = true;
                        }
                    }
                }
                if !shifted {
                    // Last resort: the free slot itself, if still open.
                    if self.seat[free_slot].is_none()
                        && self.wants(player, free_slot, self.price[free_slot])
                    {
                        self.seat_player(player, free_slot);
                        self.record(EventCase::ChainShift, free_slot, Some(player))?;
                    } else {
                        self.record(
                            EventCase::Displaced,
                            self.slot_of[player].unwrap_or(free_slot),
                            Some(player),
                        )?;
                    }
                }
            }
            return Ok(());
        }
    }
}

/// Constructs an envy-free assignment for an instance with pairwise-distinct
/// budgets. The returned outcome fills every slot, respects every true
/// budget, and is re-checked against [`is_envy_free`] before it is returned.
pub fn construct_envy_free(instance: &Instance) -> Result<Outcome, EfError> {
    construct_envy_free_with_trace(instance, DEFAULT_EVENT_CAP).map(|(o, _)| o)
}

/// Same as [`construct_envy_free`] but returns the event trace and takes an
/// explicit event cap.
pub fn construct_envy_free_with_trace(
    instance: &Instance,
    cap: usize,
) -> Result<(Outcome, Vec<EfEvent>), EfError> {
    let (outcome, events) = construct_envy_free_unchecked(instance, cap)?;
    if is_envy_free(instance, &outcome).is_err() {
        return Err(EfError::Stalled("constructed outcome failed the envy-free check"));
    }
    Ok((outcome, events))
}

/// Runs the process without the final envy-free re-check; only useful for
/// inspecting traces of defective runs.
#[doc(hidden)]
pub fn construct_envy_free_unchecked(
    instance: &Instance,
    cap: usize,
) -> Result<(Outcome, Vec<EfEvent>), EfError> {
    if !instance.has_distinct_budgets() {
        return Err(EfError::DistinctBudgetsRequired);
    }
    Lowering::new(instance, cap).run()
}
