//! The projected model counting engine.
//!
//! DPLL-style recursion: propagate, decompose the residual into
//! variable-disjoint components, count each component by branching on a
//! non-projected variable (or a plain satisfiability test once only
//! projected variables remain), multiply, cache. Blocked-clause elimination
//! plugs in per [`BceMode`]: not at all, once at the root, or dynamically at
//! every decision level through the watched-triple manager, whose frames
//! are pushed and popped in lockstep with the recursion.
//!
//! Counting is over the declared non-projected variables: any such variable
//! that drops out of the residual unassigned — all its clauses satisfied or
//! deleted as blocked — doubles the count of the node where it vanished.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::bce::BlockedClauseManager;
use crate::bcp::{BcpResult, FormulaState, ResidualClause};
use crate::formula::{ClauseId, Lit, ProjectedFormula, Var};

/// When blocked-clause elimination runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BceMode {
    /// Never; no manager is constructed.
    Off,
    /// Once, before the search starts; root-level deletions only.
    Pre,
    /// At every decision level.
    Dyn,
}

impl fmt::Display for BceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BceMode::Off => "off",
            BceMode::Pre => "pre",
            BceMode::Dyn => "dyn",
        })
    }
}

impl FromStr for BceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<BceMode, String> {
        match s {
            "off" => Ok(BceMode::Off),
            "pre" => Ok(BceMode::Pre),
            "dyn" => Ok(BceMode::Dyn),
            other => Err(format!("unknown mode {other:?}, expected off, pre or dyn")),
        }
    }
}

/// Run counters; all monotone over a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CountStats {
    pub decisions: u64,
    pub blocked_removed: u64,
    pub cache_hits: u64,
    pub cache_stores: u64,
    pub max_depth: usize,
    pub sat_leaf_calls: u64,
}

/// An exact count plus the statistics of the run that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountResult {
    pub count: BigUint,
    pub stats: CountStats,
}

/// Engine configuration beyond the mode.
#[derive(Debug, Clone)]
pub struct CounterOptions {
    pub mode: BceMode,
    /// Component cache on/off; disabling never changes counts.
    pub cache_enabled: bool,
    /// Entry cap; reaching it resets the whole cache.
    pub cache_cap: Option<usize>,
    /// Cooperative deadline, checked at each decision.
    pub deadline: Option<Instant>,
    /// Re-derive every node's component product with the brute-force oracle
    /// (small instances only); panics on any mismatch.
    pub audit: bool,
}

impl Default for CounterOptions {
    fn default() -> CounterOptions {
        CounterOptions {
            mode: BceMode::Dyn,
            cache_enabled: true,
            cache_cap: None,
            deadline: None,
            audit: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum CountError {
    #[error("deadline exceeded after {} decisions", stats.decisions)]
    Timeout { stats: CountStats },
}

/// Counts the models of `∃X.Σ` over the declared non-projected variables.
pub fn count(formula: &ProjectedFormula, mode: BceMode) -> CountResult {
    let options = CounterOptions {
        mode,
        ..CounterOptions::default()
    };
    count_with(formula, &options).expect("count without a deadline cannot time out")
}

/// [`count`] with full configuration; fails only by deadline.
pub fn count_with(
    formula: &ProjectedFormula,
    options: &CounterOptions,
) -> Result<CountResult, CountError> {
    Engine::new(formula, options).run()
}

/// A variable-disjoint group of residual clauses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    /// Indices into the residual view this component was cut from.
    pub positions: Vec<usize>,
    /// The same clauses by id, ascending.
    pub clause_ids: Vec<ClauseId>,
    /// Variables occurring in the component, ascending.
    pub vars: Vec<Var>,
    /// The non-projected subset of `vars`, ascending.
    pub branch_vars: Vec<Var>,
}

/// Splits a residual view along the connected components of its primal
/// graph (variables as vertices, co-occurrence as edges). Components are
/// ordered by their smallest variable; clause ids stay global.
pub fn connected_components(
    residual: &[ResidualClause],
    formula: &ProjectedFormula,
) -> Vec<Component> {
    let mut uf = UnionFind::new(formula.num_vars() as usize + 1);
    for clause in residual {
        let mut lits = clause.literals.iter();
        if let Some(first) = lits.next() {
            let anchor = first.var().index() as usize;
            for lit in lits {
                uf.union(anchor, lit.var().index() as usize);
            }
        }
    }
    let mut component_of_root: HashMap<usize, usize> = HashMap::new();
    let mut components: Vec<Component> = Vec::new();
    for (position, clause) in residual.iter().enumerate() {
        let root = uf.find(clause.literals[0].var().index() as usize);
        let index = *component_of_root.entry(root).or_insert_with(|| {
            components.push(Component {
                positions: Vec::new(),
                clause_ids: Vec::new(),
                vars: Vec::new(),
                branch_vars: Vec::new(),
            });
            components.len() - 1
        });
        components[index].positions.push(position);
        components[index].clause_ids.push(clause.id);
        components[index]
            .vars
            .extend(clause.literals.iter().map(|l| l.var()));
    }
    for component in &mut components {
        component.vars.sort_unstable();
        component.vars.dedup();
        component.branch_vars = component
            .vars
            .iter()
            .copied()
            .filter(|&v| !formula.is_projected(v))
            .collect();
    }
    components.sort_by_key(|c| c.vars[0]);
    components
}

/// Canonical byte encoding of a residual view: clauses sorted
/// lexicographically over their (already normalized) surviving literals,
/// literals as little-endian DIMACS integers, `0` as clause boundary. Two
/// views encode equally exactly when their residual clause sets are equal.
pub fn cache_key(residual: &[ResidualClause]) -> Vec<u8> {
    let mut lists: Vec<&Vec<Lit>> = residual.iter().map(|c| &c.literals).collect();
    lists.sort_unstable();
    let mut bytes = Vec::with_capacity(residual.len() * 12);
    for literals in lists {
        for lit in literals {
            bytes.extend_from_slice(&lit.to_dimacs().to_le_bytes());
        }
        bytes.extend_from_slice(&0i32.to_le_bytes());
    }
    bytes
}

/// The non-projected variable occurring in the most component clauses,
/// smallest index on ties.
pub fn select_branch_variable(component: &Component, residual: &[ResidualClause]) -> Var {
    assert!(
        !component.branch_vars.is_empty(),
        "branch selection on a projected-only component"
    );
    let mut best = (0usize, component.branch_vars[0]);
    for &var in &component.branch_vars {
        let occurrences = component
            .positions
            .iter()
            .filter(|&&p| residual[p].literals.iter().any(|l| l.var() == var))
            .count();
        if occurrences > best.0 {
            best = (occurrences, var);
        }
    }
    best.1
}

/// Plain DPLL satisfiability for projected-only components: unit
/// propagation, then branch on the smallest variable, positive phase first.
/// Independent of the manager and the cache.
pub fn dpll_sat(clauses: &[Vec<Lit>]) -> bool {
    fn reduce(clauses: &[Vec<Lit>], lit: Lit) -> Vec<Vec<Lit>> {
        clauses
            .iter()
            .filter(|c| !c.contains(&lit))
            .map(|c| c.iter().copied().filter(|&l| l != !lit).collect())
            .collect()
    }

    fn go(mut clauses: Vec<Vec<Lit>>) -> bool {
        loop {
            if clauses.is_empty() {
                return true;
            }
            if clauses.iter().any(|c| c.is_empty()) {
                return false;
            }
            match clauses.iter().find(|c| c.len() == 1) {
                Some(unit) => clauses = reduce(&clauses, unit[0]),
                None => break,
            }
        }
        let var = clauses
            .iter()
            .flat_map(|c| c.iter().map(|l| l.var()))
            .min()
            .unwrap();
        [true, false]
            .into_iter()
            .any(|phase| go(reduce(&clauses, Lit::new(var, phase))))
    }

    go(clauses.to_vec())
}

struct Engine<'f, 'o> {
    formula: &'f ProjectedFormula,
    options: &'o CounterOptions,
    state: FormulaState<'f>,
    manager: Option<BlockedClauseManager>,
    cache: HashMap<Vec<u8>, BigUint>,
    stats: CountStats,
}

impl<'f, 'o> Engine<'f, 'o> {
    fn new(formula: &'f ProjectedFormula, options: &'o CounterOptions) -> Engine<'f, 'o> {
        let mut state = FormulaState::new(formula);
        let mut stats = CountStats::default();
        let manager = match options.mode {
            BceMode::Off => None,
            BceMode::Pre | BceMode::Dyn => {
                let mut manager = BlockedClauseManager::new(formula);
                let blocked = manager.init();
                stats.blocked_removed += blocked.len() as u64;
                state.remove_clauses(&blocked);
                (options.mode == BceMode::Dyn).then_some(manager)
            }
        };
        Engine {
            formula,
            options,
            state,
            manager,
            cache: HashMap::new(),
            stats,
        }
    }

    /// On a deadline error the engine is abandoned mid-recursion; neither
    /// the state nor the manager is unwound.
    fn run(mut self) -> Result<CountResult, CountError> {
        let scope: Vec<ClauseId> = self
            .formula
            .clause_ids()
            .filter(|&id| self.state.in_residual(id))
            .collect();
        let mut present = vec![false; self.formula.num_vars() as usize + 1];
        for &id in &scope {
            for var in self.formula.clause(id).vars() {
                present[var.index() as usize] = true;
            }
        }
        let owned: Vec<Var> = self
            .formula
            .counting_vars()
            .filter(|v| present[v.index() as usize])
            .collect();
        let top_free = self.formula.counting_vars().count() - owned.len();
        let core = self.node(&scope, &owned, None, 0)?;
        Ok(CountResult {
            count: core << top_free,
            stats: self.stats,
        })
    }

    /// One search node. Accounts for exactly the unassigned non-projected
    /// variables in `owned`: branch variables through the phase sum, unit
    /// variables as forced, vanished variables by a factor 2 each.
    fn node(
        &mut self,
        scope: &[ClauseId],
        owned: &[Var],
        assumption: Option<Lit>,
        depth: usize,
    ) -> Result<BigUint, CountError> {
        self.stats.max_depth = self.stats.max_depth.max(depth);
        assert!(
            depth <= self.formula.num_vars() as usize + 1,
            "recursion deeper than the variable count"
        );
        let formula = self.formula;
        let mark = self.state.mark();
        let mut prop = match assumption {
            Some(lit) => self.state.condition(&[lit]),
            None => BcpResult::default(),
        };
        if !prop.conflict {
            prop.absorb(self.state.bcp());
        }

        if let Some(manager) = self.manager.as_mut() {
            let assigned_x: Vec<Var> = prop
                .units
                .iter()
                .map(|l| l.var())
                .filter(|&v| formula.is_projected(v))
                .collect();
            let blocked = manager.propagate(&prop.satisfied, &assigned_x);
            debug_assert_eq!(manager.frame_depth(), depth + 2);
            if !prop.conflict {
                self.stats.blocked_removed += blocked.len() as u64;
                self.state.remove_clauses(&blocked);
            }
        }
        if prop.conflict {
            self.unwind(mark);
            return Ok(BigUint::zero());
        }

        let residual = self.state.residual_view(scope);
        let mut present = vec![false; formula.num_vars() as usize + 1];
        for clause in &residual {
            for lit in &clause.literals {
                present[lit.var().index() as usize] = true;
            }
        }
        let free = owned
            .iter()
            .filter(|v| self.state.value(**v).is_none() && !present[v.index() as usize])
            .count();

        let key = cache_key(&residual);
        if self.options.cache_enabled {
            if let Some(hit) = self.cache.get(&key) {
                self.stats.cache_hits += 1;
                let result = hit.clone() << free;
                self.unwind(mark);
                return Ok(result);
            }
        }

        let components = connected_components(&residual, formula);
        let mut product = BigUint::one();
        for component in &components {
            if component.branch_vars.is_empty() {
                self.stats.sat_leaf_calls += 1;
                let clauses: Vec<Vec<Lit>> = component
                    .positions
                    .iter()
                    .map(|&p| residual[p].literals.clone())
                    .collect();
                if !dpll_sat(&clauses) {
                    product = BigUint::zero();
                }
            } else {
                let var = select_branch_variable(component, &residual);
                self.check_deadline()?;
                let child_owned: Vec<Var> = component
                    .branch_vars
                    .iter()
                    .copied()
                    .filter(|&v| v != var)
                    .collect();
                let mut phase_sum = BigUint::zero();
                for phase in [true, false] {
                    self.stats.decisions += 1;
                    phase_sum += self.node(
                        &component.clause_ids,
                        &child_owned,
                        Some(Lit::new(var, phase)),
                        depth + 1,
                    )?;
                }
                product *= phase_sum;
            }
        }

        if self.options.audit {
            self.audit_node(&residual, &product);
        }
        if self.options.cache_enabled {
            if let Some(cap) = self.options.cache_cap {
                if self.cache.len() >= cap {
                    self.cache.clear();
                }
            }
            self.cache.insert(key, product.clone());
            self.stats.cache_stores += 1;
        }
        let result = product << free;
        self.unwind(mark);
        Ok(result)
    }

    fn unwind(&mut self, mark: crate::bcp::StateMark) {
        if let Some(manager) = self.manager.as_mut() {
            manager.backtrack();
        }
        self.state.undo_to(mark);
    }

    fn check_deadline(&self) -> Result<(), CountError> {
        match self.options.deadline {
            Some(deadline) if Instant::now() >= deadline => Err(CountError::Timeout {
                stats: self.stats.clone(),
            }),
            _ => Ok(()),
        }
    }

    /// Recomputes this node's component product with the enumeration oracle
    /// over the residual's own variables (everything absent is projected
    /// away so the universes match). Skipped when the residual exceeds the
    /// oracle's bound.
    fn audit_node(&self, residual: &[ResidualClause], product: &BigUint) {
        let mut occurring = vec![false; self.formula.num_vars() as usize + 1];
        for clause in residual {
            for lit in &clause.literals {
                occurring[lit.var().index() as usize] = true;
            }
        }
        let projection: Vec<u32> = (1..=self.formula.num_vars())
            .filter(|&v| self.formula.is_projected(Var::new(v)) || !occurring[v as usize])
            .collect();
        let clauses: Vec<Vec<i32>> = residual
            .iter()
            .map(|c| c.literals.iter().map(|l| l.to_dimacs()).collect())
            .collect();
        let audit_formula = ProjectedFormula::new(self.formula.num_vars(), clauses, &projection);
        if let Ok(expected) = crate::oracle::brute_force_projected_count(&audit_formula) {
            assert_eq!(
                *product, expected,
                "component product diverges from the oracle at this node"
            );
        }
    }
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new(len: usize) -> UnionFind {
        UnionFind {
            parent: (0..len as u32).collect(),
        }
    }

    fn find(&mut self, item: usize) -> usize {
        let mut at = item;
        while self.parent[at] as usize != at {
            let grandparent = self.parent[self.parent[at] as usize];
            self.parent[at] = grandparent;
            at = grandparent as usize;
        }
        at
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb) as u32;
        }
    }
}
