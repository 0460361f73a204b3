//! Detection and dynamic removal of clauses blocked over the projection set.
//!
//! A clause `α` is blocked by a literal `ℓ ∈ α` when every resolvent of `α`
//! on `ℓ` with a clause containing `ℓ̄` is a tautology; removal is
//! count-preserving only for `Var(ℓ) ∈ X`. The manager precomputes, per
//! candidate pair `(ℓ, α)`, the set `C = {α} ⊕ S_ℓ̄` of partners whose
//! resolvent is *not* tautological. As long as some clause of `C` is active,
//! it witnesses that `α` is not blocked on `ℓ`, so the triple `(ℓ, α, C)`
//! is parked on one such witness, in the style of watched literals. Work is
//! only needed when a watcher is deactivated: the triple either moves to the
//! smallest remaining active witness or, if none is left, `α` is reported
//! blocked and deactivated in turn, which can cascade.
//!
//! Non-live triples (literal assigned, or owner already inactive) stay
//! parked on their dying watcher: owner and watcher reactivate together on
//! backtracking, which is what makes the structure backtrack-free — undoing
//! a propagation only flips the activation and assignment flags recorded in
//! its frame, and never touches the watch lists.

use std::collections::VecDeque;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::formula::{ClauseId, Lit, ProjectedFormula, Var};

/// A candidate pair `(ℓ, α)` with its precomputed witness set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtectedTriple {
    lit: Lit,
    clause: ClauseId,
    candidates: Vec<ClauseId>,
}

impl ProtectedTriple {
    /// The potential blocking literal; `Var(ℓ) ∈ X`.
    pub fn lit(&self) -> Lit {
        self.lit
    }

    /// The clause that would be blocked.
    pub fn clause(&self) -> ClauseId {
        self.clause
    }

    /// Ids of partners with a non-tautological resolvent, ascending.
    /// Immutable after construction; computed against the original formula.
    pub fn candidates(&self) -> &[ClauseId] {
        &self.candidates
    }
}

impl fmt::Display for ProtectedTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {{", self.lit, self.clause)?;
        for (i, c) in self.candidates.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "}})")
    }
}

/// Builds one triple per `(ℓ, α)` with `Var(ℓ) ∈ X`, `ℓ ∈ α` and `α` not
/// tautological.
pub fn init_protected_triples(formula: &ProjectedFormula) -> Vec<ProtectedTriple> {
    let mut triples = Vec::new();
    for x in formula.projection() {
        for positive in [true, false] {
            let lit = Lit::new(x, positive);
            for &clause in formula.occurrences(lit) {
                if formula.clause(clause).is_tautology() {
                    continue;
                }
                triples.push(ProtectedTriple {
                    lit,
                    clause,
                    candidates: formula.resolvent_set(clause, lit),
                });
            }
        }
    }
    triples
}

/// Worklist discipline for [`BlockedClauseManager::propagate_with_order`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorklistOrder {
    /// First in, first out — the default, and the deterministic contract.
    Fifo,
    /// Seeded random picks; the result must not depend on the order.
    Shuffled(u64),
}

/// State delta of one `propagate` call, for exact restoration.
#[derive(Debug, Clone)]
struct Frame {
    vars: Vec<Var>,
    clauses: Vec<ClauseId>,
}

/// Comparable view of the reversible manager state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManagerSnapshot {
    pub assigned_vars: Vec<Var>,
    pub inactive_clauses: Vec<ClauseId>,
}

/// A watch-structure consistency violation, carrying the offending triple.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum InvariantViolation {
    #[error("triple {triple} is watched by no clause")]
    Unwatched { triple: String },
    #[error("triple {triple} is watched by {count} clauses")]
    MultiplyWatched { triple: String, count: usize },
    #[error("triple {triple} was consumed at init but sits in a watch list")]
    ConsumedTripleWatched { triple: String },
    #[error("live triple {triple} is watched by inactive clause {watcher}")]
    InactiveWatcher { triple: String, watcher: ClauseId },
    #[error("live triple {triple} is watched by {watcher}, not one of its candidates")]
    ForeignWatcher { triple: String, watcher: ClauseId },
}

/// Watched-triple manager for dynamic blocked-clause detection.
///
/// Construction builds the triples and the initial watch table. [`init`]
/// must run once before [`propagate`]; it deactivates the clauses that are
/// blocked in the unconditioned formula and returns them for deletion.
/// After that, every search node pairs one `propagate` with one
/// `backtrack`, last in, first out.
///
/// [`init`]: Self::init
/// [`propagate`]: Self::propagate
pub struct BlockedClauseManager {
    triples: Vec<ProtectedTriple>,
    watches: Vec<Vec<u32>>,
    is_assigned: Vec<bool>,
    is_active: Vec<bool>,
    projected: Vec<bool>,
    frames: Vec<Frame>,
    pending_initial: Vec<ClauseId>,
    initialized: bool,
}

impl BlockedClauseManager {
    /// Builds the triples and parks each one on the smallest id in its
    /// candidate set; triples with an empty candidate set contribute their
    /// clause to the immediately blocked set instead.
    pub fn new(formula: &ProjectedFormula) -> BlockedClauseManager {
        let triples = init_protected_triples(formula);
        let mut watches = vec![Vec::new(); formula.num_clauses()];
        let mut pending_initial = Vec::new();
        for (index, triple) in triples.iter().enumerate() {
            match triple.candidates.first() {
                Some(&watcher) => watches[watcher.slot()].push(index as u32),
                None => pending_initial.push(triple.clause),
            }
        }
        pending_initial.sort_unstable();
        pending_initial.dedup();
        let mut projected = vec![false; formula.num_vars() as usize + 1];
        for v in formula.projection() {
            projected[v.index() as usize] = true;
        }
        BlockedClauseManager {
            triples,
            watches,
            is_assigned: vec![false; formula.num_vars() as usize + 1],
            is_active: vec![true; formula.num_clauses()],
            projected,
            frames: Vec::new(),
            pending_initial,
            initialized: false,
        }
    }

    /// The clauses whose candidate set was empty at construction — blocked
    /// before any assignment, before cascading.
    pub fn immediately_blocked(&self) -> &[ClauseId] {
        &self.pending_initial
    }

    /// Deactivates the immediately blocked clauses and cascades. Returns
    /// every clause deactivated during initialization, ascending; the
    /// caller deletes them from its formula state.
    pub fn init(&mut self) -> Vec<ClauseId> {
        assert!(!self.initialized, "init must run exactly once");
        self.initialized = true;
        let seed = self.pending_initial.clone();
        let mut all = self.propagate_impl(seed, Vec::new(), WorklistOrder::Fifo);
        all.extend_from_slice(&self.pending_initial);
        all.sort_unstable();
        all
    }

    /// Records `newly_inactive` (satisfied or otherwise deactivated by the
    /// caller) and `newly_assigned` (fresh X-variable assignments), then
    /// reports every clause that thereby became blocked, ascending. Pushes
    /// one frame covering all deactivations of this call.
    pub fn propagate(
        &mut self,
        newly_inactive: &[ClauseId],
        newly_assigned: &[Var],
    ) -> Vec<ClauseId> {
        self.propagate_with_order(newly_inactive, newly_assigned, WorklistOrder::Fifo)
    }

    /// [`propagate`](Self::propagate) with an explicit worklist discipline;
    /// blocked-clause detection converges to the same set either way.
    pub fn propagate_with_order(
        &mut self,
        newly_inactive: &[ClauseId],
        newly_assigned: &[Var],
        order: WorklistOrder,
    ) -> Vec<ClauseId> {
        assert!(self.initialized, "propagate requires init");
        self.propagate_impl(newly_inactive.to_vec(), newly_assigned.to_vec(), order)
    }

    fn propagate_impl(
        &mut self,
        newly_inactive: Vec<ClauseId>,
        newly_assigned: Vec<Var>,
        order: WorklistOrder,
    ) -> Vec<ClauseId> {
        for &var in &newly_assigned {
            let slot = var.index() as usize;
            assert!(
                self.projected[slot],
                "assigned variable {var} is not projected"
            );
            assert!(!self.is_assigned[slot], "variable {var} assigned twice");
            self.is_assigned[slot] = true;
        }
        for &id in &newly_inactive {
            assert!(self.is_active[id.slot()], "clause {id} deactivated twice");
            self.is_active[id.slot()] = false;
        }

        let mut rng = match order {
            WorklistOrder::Fifo => None,
            WorklistOrder::Shuffled(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        let mut blocked = Vec::new();
        let mut worklist: VecDeque<ClauseId> = newly_inactive.iter().copied().collect();
        while !worklist.is_empty() {
            let dying = match rng.as_mut() {
                None => worklist.pop_front().unwrap(),
                Some(rng) => {
                    let at = rng.gen_range(0..worklist.len());
                    worklist.swap_remove_back(at).unwrap()
                }
            };
            let entries = std::mem::take(&mut self.watches[dying.slot()]);
            let mut parked = Vec::new();
            for index in entries {
                let triple = &self.triples[index as usize];
                if self.is_assigned[triple.lit.var().index() as usize]
                    || !self.is_active[triple.clause.slot()]
                {
                    // Not live: keep it here so owner and watcher come back
                    // together on backtrack.
                    parked.push(index);
                } else if let Some(&target) =
                    triple.candidates.iter().find(|c| self.is_active[c.slot()])
                {
                    self.watches[target.slot()].push(index);
                } else {
                    // No active witness left: the owner is blocked.
                    parked.push(index);
                    blocked.push(triple.clause);
                    worklist.push_back(triple.clause);
                    self.is_active[triple.clause.slot()] = false;
                }
            }
            self.watches[dying.slot()] = parked;
        }

        let mut deactivated = newly_inactive;
        deactivated.extend_from_slice(&blocked);
        self.frames.push(Frame {
            vars: newly_assigned,
            clauses: deactivated,
        });
        blocked.sort_unstable();
        blocked
    }

    /// Pops the newest frame: unassigns its variables and reactivates its
    /// clauses. Watch lists are left untouched.
    pub fn backtrack(&mut self) {
        let frame = self
            .frames
            .pop()
            .expect("backtrack on an empty frame stack");
        for var in frame.vars {
            debug_assert!(self.is_assigned[var.index() as usize]);
            self.is_assigned[var.index() as usize] = false;
        }
        for id in frame.clauses {
            debug_assert!(!self.is_active[id.slot()]);
            self.is_active[id.slot()] = true;
        }
    }

    pub fn frame_depth(&self) -> usize {
        self.frames.len()
    }

    pub fn is_clause_active(&self, id: ClauseId) -> bool {
        self.is_active[id.slot()]
    }

    pub fn is_var_assigned(&self, var: Var) -> bool {
        self.is_assigned[var.index() as usize]
    }

    pub fn triples(&self) -> &[ProtectedTriple] {
        &self.triples
    }

    /// The triples currently parked on `id`'s watch list.
    pub fn watched_triples(&self, id: ClauseId) -> Vec<&ProtectedTriple> {
        self.watches[id.slot()]
            .iter()
            .map(|&i| &self.triples[i as usize])
            .collect()
    }

    /// The reversible portion of the state, for round-trip comparisons.
    pub fn snapshot(&self) -> ManagerSnapshot {
        ManagerSnapshot {
            assigned_vars: (1..self.is_assigned.len())
                .filter(|&i| self.is_assigned[i])
                .map(|i| Var::new(i as u32))
                .collect(),
            inactive_clauses: (0..self.is_active.len())
                .filter(|&s| !self.is_active[s])
                .map(|s| ClauseId::new(s as u32 + 1))
                .collect(),
        }
    }

    /// Diagnostic back door: flips an activation flag without maintaining
    /// the watch structure. Exists so tests can exercise
    /// [`verify_invariants`](Self::verify_invariants) on corrupted state.
    pub fn force_clause_activation(&mut self, id: ClauseId, active: bool) {
        self.is_active[id.slot()] = active;
    }

    /// Exhaustive check of the watch discipline.
    ///
    /// Every triple with candidates must sit in exactly one watch list, and
    /// a live triple — literal unassigned, owner active — must be watched
    /// by an active member of its candidate set. Triples whose candidate
    /// set was empty were consumed at init and must be in no list.
    pub fn verify_invariants(&self) -> Result<(), InvariantViolation> {
        let mut watcher_of: Vec<Option<ClauseId>> = vec![None; self.triples.len()];
        let mut watch_count = vec![0usize; self.triples.len()];
        for (slot, list) in self.watches.iter().enumerate() {
            for &index in list {
                watch_count[index as usize] += 1;
                watcher_of[index as usize] = Some(ClauseId::new(slot as u32 + 1));
            }
        }
        for (i, triple) in self.triples.iter().enumerate() {
            if triple.candidates.is_empty() {
                if watch_count[i] != 0 {
                    return Err(InvariantViolation::ConsumedTripleWatched {
                        triple: triple.to_string(),
                    });
                }
                continue;
            }
            if watch_count[i] == 0 {
                return Err(InvariantViolation::Unwatched {
                    triple: triple.to_string(),
                });
            }
            if watch_count[i] > 1 {
                return Err(InvariantViolation::MultiplyWatched {
                    triple: triple.to_string(),
                    count: watch_count[i],
                });
            }
            let live = !self.is_assigned[triple.lit.var().index() as usize]
                && self.is_active[triple.clause.slot()];
            if live {
                let watcher = watcher_of[i].unwrap();
                if !triple.candidates.contains(&watcher) {
                    return Err(InvariantViolation::ForeignWatcher {
                        triple: triple.to_string(),
                        watcher,
                    });
                }
                if !self.is_active[watcher.slot()] {
                    return Err(InvariantViolation::InactiveWatcher {
                        triple: triple.to_string(),
                        watcher,
                    });
                }
            }
        }
        Ok(())
    }
}
