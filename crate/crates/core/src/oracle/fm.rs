//! Exact Fourier-Motzkin elimination over the rationals with strict and
//! weak inequalities, plus witness extraction by back-substitution.
//!
//! Desk-scale only: systems are capped at four variables, which covers every
//! envy-feasibility system this crate builds (one variable per slot price).

use crate::rational::Rat;

/// Comparison direction of one constraint; `coeffs . x REL rhs`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Lt,
    Ge,
    Gt,
}

#[derive(Clone, Debug)]
pub struct Constraint {
    pub coeffs: Vec<Rat>,
    pub relation: Relation,
    pub rhs: Rat,
}

impl Constraint {
    pub fn new(coeffs: Vec<Rat>, relation: Relation, rhs: Rat) -> Constraint {
        Constraint {
            coeffs,
            relation,
            rhs,
        }
    }

    fn satisfied_by(&self, point: &[Rat]) -> bool {
        let lhs: Rat = self
            .coeffs
            .iter()
            .zip(point)
            .map(|(&c, &x)| c * x)
            .sum();
        match self.relation {
            Relation::Le => lhs <= self.rhs,
            Relation::Lt => lhs < self.rhs,
            Relation::Ge => lhs >= self.rhs,
            Relation::Gt => lhs > self.rhs,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct LinearSystem {
    pub num_vars: usize,
    pub constraints: Vec<Constraint>,
}

impl LinearSystem {
    pub fn new(num_vars: usize) -> LinearSystem {
        LinearSystem {
            num_vars,
            constraints: Vec::new(),
        }
    }

    pub fn push(&mut self, coeffs: Vec<Rat>, relation: Relation, rhs: Rat) {
        debug_assert_eq!(coeffs.len(), self.num_vars);
        self.constraints.push(Constraint::new(coeffs, relation, rhs));
    }

    pub fn satisfied_by(&self, point: &[Rat]) -> bool {
        self.constraints.iter().all(|c| c.satisfied_by(point))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Feasibility {
    Infeasible,
    /// A rational point satisfying every constraint.
    Feasible(Vec<Rat>),
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum FmError {
    #[error("{0} variables exceed the supported maximum of {MAX_VARIABLES}")]
    TooManyVariables(usize),
}

pub const MAX_VARIABLES: usize = 4;

/// Internal row form: `coeffs . x  <=  rhs`, strict when `strict` is set.
#[derive(Clone, Debug)]
struct Row {
    coeffs: Vec<Rat>,
    rhs: Rat,
    strict: bool,
}

/// A bound on one variable as an affine function of earlier variables:
/// `x {<=,<,>=,>} rhs - coeffs . x[..var]`.
#[derive(Clone, Debug)]
struct Bound {
    coeffs: Vec<Rat>,
    rhs: Rat,
    strict: bool,
}

impl Bound {
    fn value_at(&self, point: &[Rat]) -> Rat {
        self.rhs
            - self
                .coeffs
                .iter()
                .zip(point)
                .map(|(&c, &x)| c * x)
                .sum::<Rat>()
    }
}

/// Decides feasibility exactly; on success returns a witness point that is
/// checked against every original constraint before being handed back.
pub fn fm_feasible(system: &LinearSystem) -> Result<Feasibility, FmError> {
    if system.num_vars > MAX_VARIABLES {
        return Err(FmError::TooManyVariables(system.num_vars));
    }
    let mut rows: Vec<Row> = Vec::with_capacity(system.constraints.len());
    for c in &system.constraints {
        debug_assert_eq!(c.coeffs.len(), system.num_vars);
        let (flip, strict) = match c.relation {
            Relation::Le => (false, false),
            Relation::Lt => (false, true),
            Relation::Ge => (true, false),
            Relation::Gt => (true, true),
        };
        let coeffs = if flip {
            c.coeffs.iter().map(|&x| -x).collect()
        } else {
            c.coeffs.clone()
        };
        let rhs = if flip { -c.rhs } else { c.rhs };
        rows.push(Row { coeffs, rhs, strict });
    }

    // Eliminate the highest variable first, remembering its bounds for the
    // back-substitution pass.
    let mut bounds_stack: Vec<(Vec<Bound>, Vec<Bound>)> = Vec::new(); // (lowers, uppers)
    for var in (0..system.num_vars).rev() {
        let mut lowers: Vec<Bound> = Vec::new(); // x >= value
        let mut uppers: Vec<Bound> = Vec::new(); // x <= value
        let mut rest: Vec<Row> = Vec::new();
        for row in rows {
            let a = row.coeffs[var];
            if a.is_zero() {
                rest.push(row);
                continue;
            }
            // a*x + tail . x[..var] (<=,<) rhs
            let coeffs: Vec<Rat> = row.coeffs[..var].iter().map(|&c| c / a).collect();
            let bound = Bound {
                coeffs,
                rhs: row.rhs / a,
                strict: row.strict,
            };
            if a.is_positive() {
                uppers.push(bound);
            } else {
                lowers.push(bound);
            }
        }
        // Every (lower, upper) pair projects to lower (<=,<) upper.
        for lo in &lowers {
            for hi in &uppers {
                let coeffs: Vec<Rat> = lo
                    .coeffs
                    .iter()
                    .zip(&hi.coeffs)
                    .map(|(&l, &h)| h - l)
                    .collect();
                rest.push(Row {
                    coeffs,
                    rhs: hi.rhs - lo.rhs,
                    strict: lo.strict || hi.strict,
                });
            }
        }
        bounds_stack.push((lowers, uppers));
        rows = rest;
    }

    // Variable-free residue: 0 (<=,<) rhs.
    for row in &rows {
        debug_assert!(row.coeffs.iter().all(|c| c.is_zero()));
        let ok = if row.strict {
            row.rhs.is_positive()
        } else {
            !row.rhs.is_negative()
        };
        if !ok {
            return Ok(Feasibility::Infeasible);
        }
    }

    // Back-substitute from the first variable up.
    let mut point: Vec<Rat> = Vec::with_capacity(system.num_vars);
    for var in 0..system.num_vars {
        let (lowers, uppers) = &bounds_stack[system.num_vars - 1 - var];
        let lo = lowers
            .iter()
            .map(|b| (b.value_at(&point), b.strict))
            .max_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        let hi = uppers
            .iter()
            .map(|b| (b.value_at(&point), b.strict))
            .min_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        let x = pick_in_interval(lo, hi);
        point.push(x);
    }
    assert!(
        system.satisfied_by(&point),
        "feasibility witness violates the system; elimination defect"
    );
    Ok(Feasibility::Feasible(point))
}

/// Deterministic choice inside a non-empty interval: prefer a weak endpoint
/// (lower first), fall back to the midpoint of an open interval.
fn pick_in_interval(lo: Option<(Rat, bool)>, hi: Option<(Rat, bool)>) -> Rat {
    match (lo, hi) {
        (None, None) => Rat::ZERO,
        (Some((l, strict)), None) => {
            if strict {
                l + Rat::ONE
            } else {
                l
            }
        }
        (None, Some((h, strict))) => {
            if strict {
                h - Rat::ONE
            } else {
                h
            }
        }
        (Some((l, ls)), Some((h, hs))) => {
            if !ls {
                l
            } else if !hs {
                h
            } else {
                (l + h) * Rat::new(1, 2)
            }
        }
    }
}
