//! Conditioning and Boolean constraint propagation.
//!
//! [`FormulaState`] is the mutable search-time view of one parsed formula:
//! an assignment trail plus per-clause counters of satisfied and unassigned
//! literals. Clauses are never rewritten — a clause id always resolves to
//! the original literals, with satisfied clauses masked out of the residual
//! and falsified literals skipped. All effects are undone in reverse trail
//! order, one mark per search node.

use crate::formula::{ClauseId, Lit, ProjectedFormula, Var};

/// Outcome of one conditioning or propagation step.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BcpResult {
    /// Every literal assigned during the step, triggering literals included,
    /// in assignment order.
    pub units: Vec<Lit>,
    /// Ids of clauses newly satisfied during the step, ascending. Only
    /// clauses that were part of the active residual are reported.
    pub satisfied: Vec<ClauseId>,
    /// True when some active clause lost its last literal.
    pub conflict: bool,
}

impl BcpResult {
    pub fn absorb(&mut self, other: BcpResult) {
        self.units.extend(other.units);
        self.satisfied.extend(other.satisfied);
        self.satisfied.sort_unstable();
        self.conflict |= other.conflict;
    }
}

/// Undo point for [`FormulaState::undo_to`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateMark {
    trail_len: usize,
    removed_len: usize,
}

/// One clause of a residual view: the surviving (unassigned) literals of an
/// active, unsatisfied clause.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidualClause {
    pub id: ClauseId,
    pub literals: Vec<Lit>,
}

/// Mutable assignment/activation state over a borrowed formula.
#[derive(Debug, Clone)]
pub struct FormulaState<'f> {
    formula: &'f ProjectedFormula,
    values: Vec<Option<bool>>,
    trail: Vec<Lit>,
    num_true: Vec<u32>,
    num_unassigned: Vec<u32>,
    removed: Vec<bool>,
    removed_log: Vec<ClauseId>,
}

impl<'f> FormulaState<'f> {
    pub fn new(formula: &'f ProjectedFormula) -> FormulaState<'f> {
        let num_unassigned = formula.clauses().map(|c| c.len() as u32).collect();
        FormulaState {
            formula,
            values: vec![None; formula.num_vars() as usize + 1],
            trail: Vec::new(),
            num_true: vec![0; formula.num_clauses()],
            num_unassigned,
            removed: vec![false; formula.num_clauses()],
            removed_log: Vec::new(),
        }
    }

    pub fn formula(&self) -> &'f ProjectedFormula {
        self.formula
    }

    pub fn value(&self, var: Var) -> Option<bool> {
        self.values[var.index() as usize]
    }

    pub fn lit_value(&self, lit: Lit) -> Option<bool> {
        self.value(lit.var()).map(|v| v == lit.is_positive())
    }

    pub fn is_removed(&self, id: ClauseId) -> bool {
        self.removed[id.slot()]
    }

    /// Part of the active residual: not removed, not a tautology, not
    /// satisfied by the current assignment.
    pub fn in_residual(&self, id: ClauseId) -> bool {
        !self.removed[id.slot()]
            && !self.formula.clause(id).is_tautology()
            && self.num_true[id.slot()] == 0
    }

    /// The unfalsified literals of a clause under the current assignment.
    pub fn surviving_literals(&self, id: ClauseId) -> Vec<Lit> {
        self.formula
            .clause(id)
            .literals()
            .iter()
            .copied()
            .filter(|&l| self.lit_value(l).is_none())
            .collect()
    }

    /// Residual view of `scope`: every in-scope clause still in the active
    /// residual, with falsified literals masked, ascending by id.
    pub fn residual_view(&self, scope: &[ClauseId]) -> Vec<ResidualClause> {
        scope
            .iter()
            .copied()
            .filter(|&id| self.in_residual(id))
            .map(|id| ResidualClause {
                id,
                literals: self.surviving_literals(id),
            })
            .collect()
    }

    pub fn mark(&self) -> StateMark {
        StateMark {
            trail_len: self.trail.len(),
            removed_len: self.removed_log.len(),
        }
    }

    /// Rolls assignments and removals back to `mark`, newest first.
    pub fn undo_to(&mut self, mark: StateMark) {
        assert!(
            mark.trail_len <= self.trail.len() && mark.removed_len <= self.removed_log.len(),
            "undo mark is ahead of the current state"
        );
        while self.trail.len() > mark.trail_len {
            let lit = self.trail.pop().unwrap();
            self.values[lit.var().index() as usize] = None;
            for &id in self.formula.occurrences(lit) {
                self.num_true[id.slot()] -= 1;
                self.num_unassigned[id.slot()] += 1;
            }
            for &id in self.formula.occurrences(!lit) {
                self.num_unassigned[id.slot()] += 1;
            }
        }
        while self.removed_log.len() > mark.removed_len {
            let id = self.removed_log.pop().unwrap();
            self.removed[id.slot()] = false;
        }
    }

    /// Marks clauses as removed (deleted as blocked). Reversed by
    /// [`undo_to`](Self::undo_to) if a mark was taken before.
    pub fn remove_clauses(&mut self, ids: &[ClauseId]) {
        for &id in ids {
            assert!(!self.removed[id.slot()], "clause {id} removed twice");
            self.removed[id.slot()] = true;
            self.removed_log.push(id);
        }
    }

    /// Conditions the state by a consistent term of unassigned literals.
    /// Satisfied clauses leave the residual; complementary literals count
    /// as falsified. Does not propagate — follow with [`bcp`](Self::bcp).
    pub fn condition(&mut self, term: &[Lit]) -> BcpResult {
        for (i, &lit) in term.iter().enumerate() {
            assert!(
                self.lit_value(lit).is_none(),
                "conditioning literal {lit} is already assigned"
            );
            assert!(
                !term[i + 1..].contains(&!lit),
                "conditioning term contains a complementary pair"
            );
        }
        let mut result = BcpResult::default();
        for &lit in term {
            self.assign(lit, &mut result);
        }
        result.satisfied.sort_unstable();
        result
    }

    /// Runs unit propagation to fixpoint, FIFO over clause ids. A conflict
    /// stops the run; it is a result state, not an error.
    pub fn bcp(&mut self) -> BcpResult {
        let mut result = BcpResult::default();
        let mut queue = std::collections::VecDeque::new();
        for id in self.formula.clause_ids() {
            if !self.in_residual(id) {
                continue;
            }
            match self.num_unassigned[id.slot()] {
                0 => result.conflict = true,
                1 => queue.push_back(self.first_surviving(id)),
                _ => {}
            }
        }
        while let Some(lit) = queue.pop_front() {
            if result.conflict {
                break;
            }
            match self.lit_value(lit) {
                Some(true) => continue,
                Some(false) => {
                    result.conflict = true;
                    break;
                }
                None => {}
            }
            self.assign(lit, &mut result);
            if result.conflict {
                break;
            }
            for &id in self.formula.occurrences(!lit) {
                if self.in_residual(id) && self.num_unassigned[id.slot()] == 1 {
                    queue.push_back(self.first_surviving(id));
                }
            }
        }
        result.satisfied.sort_unstable();
        result
    }

    fn first_surviving(&self, id: ClauseId) -> Lit {
        self.formula
            .clause(id)
            .literals()
            .iter()
            .copied()
            .find(|&l| self.lit_value(l).is_none())
            .expect("unit clause lost its literal")
    }

    fn assign(&mut self, lit: Lit, result: &mut BcpResult) {
        debug_assert!(self.lit_value(lit).is_none());
        self.values[lit.var().index() as usize] = Some(lit.is_positive());
        self.trail.push(lit);
        result.units.push(lit);
        for &id in self.formula.occurrences(lit) {
            let slot = id.slot();
            self.num_unassigned[slot] -= 1;
            self.num_true[slot] += 1;
            if self.num_true[slot] == 1
                && !self.removed[slot]
                && !self.formula.clause(id).is_tautology()
            {
                result.satisfied.push(id);
            }
        }
        for &id in self.formula.occurrences(!lit) {
            let slot = id.slot();
            self.num_unassigned[slot] -= 1;
            if self.num_unassigned[slot] == 0 && self.in_residual(id) {
                result.conflict = true;
            }
        }
    }
}
