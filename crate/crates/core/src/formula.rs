//! CNF formulas with stable clause identifiers and a projection set.
//!
//! Clause identifiers are assigned once at construction (1-based, in input
//! order) and are never changed by any later simplification; every other
//! module relies on that stability. The projection set `X` holds the
//! variables to be forgotten: the count queried is the number of models of
//! `∃X.Σ` over the remaining (declared) variables.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// A propositional variable, 1-based to match DIMACS numbering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(u32);

impl Var {
    pub fn new(index: u32) -> Var {
        assert!(index >= 1, "variable indices are 1-based");
        Var(index)
    }

    pub fn index(self) -> u32 {
        self.0
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A literal: a variable together with a polarity.
///
/// Encoded as `2v` for the positive and `2v + 1` for the negative literal,
/// so the derived order sorts by variable index with the positive literal
/// first — exactly the normalized in-clause order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: Var, positive: bool) -> Lit {
        Lit(var.0 * 2 + u32::from(!positive))
    }

    /// Builds a literal from its DIMACS integer form (nonzero).
    pub fn from_dimacs(value: i32) -> Lit {
        assert!(value != 0, "0 is the clause terminator, not a literal");
        Lit::new(Var::new(value.unsigned_abs()), value > 0)
    }

    pub fn to_dimacs(self) -> i32 {
        let v = (self.0 / 2) as i32;
        if self.is_positive() {
            v
        } else {
            -v
        }
    }

    pub fn var(self) -> Var {
        Var(self.0 / 2)
    }

    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    pub fn complement(self) -> Lit {
        Lit(self.0 ^ 1)
    }

    /// Dense index usable for occurrence tables.
    pub(crate) fn code(self) -> usize {
        self.0 as usize
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;

    fn not(self) -> Lit {
        self.complement()
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// Identifier of a clause within one formula; 1-based, stable for the
/// formula's whole lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClauseId(u32);

impl ClauseId {
    pub fn new(id: u32) -> ClauseId {
        assert!(id >= 1, "clause ids are 1-based");
        ClauseId(id)
    }

    pub fn get(self) -> u32 {
        self.0
    }

    /// Position of the clause in the formula's clause store.
    pub(crate) fn slot(self) -> usize {
        (self.0 - 1) as usize
    }
}

impl fmt::Display for ClauseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A clause: an identifier plus a duplicate-free, normalized literal set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    id: ClauseId,
    literals: Vec<Lit>,
    tautological: bool,
}

impl Clause {
    fn new(id: ClauseId, mut literals: Vec<Lit>) -> Clause {
        literals.sort_unstable();
        literals.dedup();
        let tautological = literals.windows(2).any(|w| w[0] == !w[1]);
        Clause {
            id,
            literals,
            tautological,
        }
    }

    pub fn id(&self) -> ClauseId {
        self.id
    }

    /// Literals in normalized order: ascending variable index, positive
    /// polarity before negative.
    pub fn literals(&self) -> &[Lit] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn contains(&self, lit: Lit) -> bool {
        self.literals.binary_search(&lit).is_ok()
    }

    /// True when the clause holds some complementary pair `x`, `¬x`.
    pub fn is_tautology(&self) -> bool {
        self.tautological
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        // A tautological clause yields its pair variable twice; callers
        // treating the result as a set must dedup.
        self.literals.iter().map(|l| l.var())
    }
}

/// Outcome of resolving two clauses on a literal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolvent {
    /// The merged literal set `(a ∖ {ℓ}) ∪ (b ∖ {ℓ̄})`, normalized.
    Clause(Vec<Lit>),
    /// The merge contains a complementary pair.
    Tautology,
}

impl Resolvent {
    pub fn is_tautology(&self) -> bool {
        matches!(self, Resolvent::Tautology)
    }
}

/// Resolves `a` and `b` on `lit`, which must occur positively in `a` and
/// complemented in `b`.
pub fn resolvent(a: &Clause, b: &Clause, lit: Lit) -> Resolvent {
    assert!(
        a.contains(lit),
        "resolution literal must occur in the first clause"
    );
    assert!(
        b.contains(!lit),
        "complement of the resolution literal must occur in the second clause"
    );
    let mut merged: Vec<Lit> = Vec::with_capacity(a.len() + b.len() - 2);
    merged.extend(a.literals().iter().copied().filter(|&l| l != lit));
    merged.extend(b.literals().iter().copied().filter(|&l| l != !lit));
    merged.sort_unstable();
    merged.dedup();
    if merged.windows(2).any(|w| w[0] == !w[1]) {
        Resolvent::Tautology
    } else {
        Resolvent::Clause(merged)
    }
}

/// Errors raised while reading the DIMACS dialect.
#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: expected header `p cnf <vars> <clauses>`, found {found:?}")]
    MalformedHeader { line: usize, found: String },
    #[error("line {line}: content before the `p cnf` header")]
    MissingHeader { line: usize },
    #[error("line {line}: second `p cnf` header")]
    DuplicateHeader { line: usize },
    #[error("line {line}: invalid token {token:?}")]
    InvalidToken { line: usize, token: String },
    #[error("line {line}: literal {value} out of range for {num_vars} variables")]
    LiteralOutOfRange {
        line: usize,
        value: i64,
        num_vars: u32,
    },
    #[error("line {line}: unterminated clause at end of input")]
    UnterminatedClause { line: usize },
    #[error("line {line}: unterminated `c p show` declaration at end of input")]
    UnterminatedShow { line: usize },
    #[error("line {line}: header declared {declared} clauses but the file holds {found}")]
    ClauseCountMismatch {
        line: usize,
        declared: usize,
        found: usize,
    },
}

/// A CNF formula `Σ` paired with the projection set `X` of variables to
/// forget, plus the static occurrence index `S_ℓ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectedFormula {
    num_vars: u32,
    clauses: Vec<Clause>,
    projected: Vec<bool>,
    occurrences: Vec<Vec<ClauseId>>,
}

impl ProjectedFormula {
    /// Builds a formula from DIMACS-style literal lists. Intended for tests
    /// and the instance generator; `projection` lists the variables of `X`.
    pub fn new<I, C>(num_vars: u32, clauses: I, projection: &[u32]) -> ProjectedFormula
    where
        I: IntoIterator<Item = C>,
        C: AsRef<[i32]>,
    {
        let clauses: Vec<Clause> = clauses
            .into_iter()
            .enumerate()
            .map(|(i, lits)| {
                let lits: Vec<Lit> = lits
                    .as_ref()
                    .iter()
                    .map(|&v| {
                        assert!(
                            v != 0 && v.unsigned_abs() <= num_vars,
                            "literal {v} out of range"
                        );
                        Lit::from_dimacs(v)
                    })
                    .collect();
                Clause::new(ClauseId::new(i as u32 + 1), lits)
            })
            .collect();
        let mut projected = vec![false; num_vars as usize + 1];
        for &v in projection {
            assert!(
                v >= 1 && v <= num_vars,
                "projected variable {v} out of range"
            );
            projected[v as usize] = true;
        }
        Self::assemble(num_vars, clauses, projected)
    }

    fn assemble(num_vars: u32, clauses: Vec<Clause>, projected: Vec<bool>) -> ProjectedFormula {
        let mut occurrences = vec![Vec::new(); 2 * (num_vars as usize + 1)];
        for clause in &clauses {
            for &lit in clause.literals() {
                occurrences[lit.code()].push(clause.id());
            }
        }
        ProjectedFormula {
            num_vars,
            clauses,
            projected,
            occurrences,
        }
    }

    /// Reads the model-counting dialect: `p cnf` header, zero-terminated
    /// clauses, and `c p show v… 0` lines naming the variables to count
    /// over. `X` is the complement of the shown variables; without any show
    /// declaration `X = ∅`. A show list may span several `c p show` lines
    /// until its `0` terminator.
    pub fn parse_dimacs(input: &str) -> Result<ProjectedFormula, ParseError> {
        let mut header: Option<(u32, usize)> = None;
        let mut clauses: Vec<Clause> = Vec::new();
        let mut pending: Vec<Lit> = Vec::new();
        let mut shown: BTreeSet<u32> = BTreeSet::new();
        let mut show_open = false;
        let mut line_no = 0;

        for (idx, line) in input.lines().enumerate() {
            line_no = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('c') {
                let rest = rest.trim_start();
                let show_list = rest
                    .strip_prefix("p show")
                    .filter(|l| l.is_empty() || l.starts_with(char::is_whitespace));
                if let Some(list) = show_list {
                    let (_, num_vars) = parsed_header(&header, line_no)?;
                    for token in list.split_whitespace() {
                        let value: i64 = token.parse().map_err(|_| ParseError::InvalidToken {
                            line: line_no,
                            token: token.to_string(),
                        })?;
                        if value == 0 {
                            show_open = false;
                        } else if value < 0 || value > i64::from(num_vars) {
                            return Err(ParseError::LiteralOutOfRange {
                                line: line_no,
                                value,
                                num_vars,
                            });
                        } else {
                            show_open = true;
                            shown.insert(value as u32);
                        }
                    }
                    if !list.split_whitespace().any(|t| t == "0") {
                        show_open = true;
                    }
                }
                continue;
            }
            if trimmed.starts_with('p') {
                if header.is_some() {
                    return Err(ParseError::DuplicateHeader { line: line_no });
                }
                let fields: Vec<&str> = trimmed.split_whitespace().collect();
                let parsed = match fields.as_slice() {
                    ["p", "cnf", nv, nc] => nv
                        .parse::<u32>()
                        .ok()
                        .filter(|&n| n <= (u32::MAX - 2) / 2)
                        .zip(nc.parse::<usize>().ok()),
                    _ => None,
                };
                header = Some(parsed.ok_or_else(|| ParseError::MalformedHeader {
                    line: line_no,
                    found: trimmed.to_string(),
                })?);
                continue;
            }
            let (declared, num_vars) = parsed_header(&header, line_no)?;
            for token in trimmed.split_whitespace() {
                let value: i64 = token.parse().map_err(|_| ParseError::InvalidToken {
                    line: line_no,
                    token: token.to_string(),
                })?;
                if value == 0 {
                    let id = ClauseId::new(clauses.len() as u32 + 1);
                    clauses.push(Clause::new(id, std::mem::take(&mut pending)));
                    if clauses.len() > declared {
                        return Err(ParseError::ClauseCountMismatch {
                            line: line_no,
                            declared,
                            found: clauses.len(),
                        });
                    }
                } else if value.unsigned_abs() > u64::from(num_vars) {
                    return Err(ParseError::LiteralOutOfRange {
                        line: line_no,
                        value,
                        num_vars,
                    });
                } else {
                    pending.push(Lit::from_dimacs(value as i32));
                }
            }
        }

        let (declared, num_vars) = parsed_header(&header, line_no.max(1))?;
        if !pending.is_empty() {
            return Err(ParseError::UnterminatedClause { line: line_no });
        }
        if show_open {
            return Err(ParseError::UnterminatedShow { line: line_no });
        }
        if clauses.len() != declared {
            return Err(ParseError::ClauseCountMismatch {
                line: line_no,
                declared,
                found: clauses.len(),
            });
        }
        let mut projected = vec![false; num_vars as usize + 1];
        if !shown.is_empty() || show_declared(input) {
            for v in 1..=num_vars {
                projected[v as usize] = !shown.contains(&v);
            }
        }
        Ok(Self::assemble(num_vars, clauses, projected))
    }

    /// Emits the same dialect the parser reads; reparsing the output yields
    /// an identical formula.
    pub fn to_dimacs(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("p cnf {} {}\n", self.num_vars, self.clauses.len()));
        if self.projection().next().is_some() {
            out.push_str("c p show");
            for v in 1..=self.num_vars {
                if !self.projected[v as usize] {
                    out.push_str(&format!(" {v}"));
                }
            }
            out.push_str(" 0\n");
        }
        for clause in &self.clauses {
            for &lit in clause.literals() {
                out.push_str(&format!("{} ", lit.to_dimacs()));
            }
            out.push_str("0\n");
        }
        out
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clause(&self, id: ClauseId) -> &Clause {
        &self.clauses[id.slot()]
    }

    pub fn clauses(&self) -> impl Iterator<Item = &Clause> {
        self.clauses.iter()
    }

    pub fn clause_ids(&self) -> impl Iterator<Item = ClauseId> + '_ {
        (1..=self.clauses.len() as u32).map(ClauseId)
    }

    pub fn vars(&self) -> impl Iterator<Item = Var> + '_ {
        (1..=self.num_vars).map(Var)
    }

    /// `Var(ℓ) ∈ X`?
    pub fn is_projected(&self, var: Var) -> bool {
        self.projected[var.0 as usize]
    }

    /// The projection set `X`, ascending.
    pub fn projection(&self) -> impl Iterator<Item = Var> + '_ {
        self.vars().filter(|v| self.is_projected(*v))
    }

    /// Declared variables outside `X`, ascending.
    pub fn counting_vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.vars().filter(|v| !self.is_projected(*v))
    }

    /// The occurrence set `S_ℓ`: ids of the clauses containing `lit`, in
    /// ascending id order.
    pub fn occurrences(&self, lit: Lit) -> &[ClauseId] {
        &self.occurrences[lit.code()]
    }

    /// The set `{α} ⊕ S_ℓ̄` in id form: clauses whose resolvent with `id` on
    /// `lit` is not a tautology, computed against the original formula.
    /// Tautological partner clauses are vacuous (≡ ⊤) and never serve as
    /// witnesses, so they are skipped.
    pub fn resolvent_set(&self, id: ClauseId, lit: Lit) -> Vec<ClauseId> {
        let clause = self.clause(id);
        assert!(
            clause.contains(lit),
            "resolution literal must occur in the clause"
        );
        self.occurrences(!lit)
            .iter()
            .copied()
            .filter(|&other| {
                let partner = self.clause(other);
                !partner.is_tautology() && !resolvent(clause, partner, lit).is_tautology()
            })
            .collect()
    }
}

fn parsed_header(header: &Option<(u32, usize)>, line: usize) -> Result<(usize, u32), ParseError> {
    match header {
        Some((nv, nc)) => Ok((*nc, *nv)),
        None => Err(ParseError::MissingHeader { line }),
    }
}

fn show_declared(input: &str) -> bool {
    input.lines().any(|l| {
        l.trim()
            .strip_prefix('c')
            .map(|r| r.trim_start().starts_with("p show"))
            .unwrap_or(false)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_instances::DEMO;

    fn lit(v: i32) -> Lit {
        Lit::from_dimacs(v)
    }

    #[test]
    fn literal_encoding_round_trips() {
        for v in [1, -1, 5, -42] {
            assert_eq!(lit(v).to_dimacs(), v);
            assert_eq!(!(!lit(v)), lit(v));
            assert_eq!((!lit(v)).var(), lit(v).var());
        }
    }

    #[test]
    fn parses_demo_instance() {
        let f = ProjectedFormula::parse_dimacs(DEMO).unwrap();
        assert_eq!(f.num_vars(), 6);
        assert_eq!(f.num_clauses(), 11);
        let x: Vec<u32> = f.projection().map(Var::index).collect();
        assert_eq!(x, vec![4, 5, 6]);
        let s_x1: Vec<u32> = f.occurrences(lit(1)).iter().map(|c| c.get()).collect();
        assert_eq!(s_x1, vec![1, 4, 6, 9, 10]);
        assert_eq!(f.clause(ClauseId::new(2)).literals(), &[lit(-2), lit(3)]);
    }

    #[test]
    fn parses_empty_formula() {
        let f = ProjectedFormula::parse_dimacs("p cnf 0 0\n").unwrap();
        assert_eq!(f.num_vars(), 0);
        assert_eq!(f.num_clauses(), 0);
        assert_eq!(f.projection().count(), 0);
    }

    #[test]
    fn no_show_line_means_full_count() {
        let input = "p cnf 3 1\n1 -2 3 0\n";
        let f = ProjectedFormula::parse_dimacs(input).unwrap();
        assert_eq!(f.projection().count(), 0);
    }

    #[test]
    fn show_list_may_span_lines() {
        let input = "p cnf 4 1\nc p show 1 2\nc p show 3 0\n1 2 0\n";
        let f = ProjectedFormula::parse_dimacs(input).unwrap();
        let x: Vec<u32> = f.projection().map(Var::index).collect();
        assert_eq!(x, vec![4]);
    }

    #[test]
    fn empty_show_list_projects_everything() {
        let input = "p cnf 2 1\nc p show 0\n1 2 0\n";
        let f = ProjectedFormula::parse_dimacs(input).unwrap();
        assert_eq!(f.projection().count(), 2);
    }

    #[test]
    fn clauses_may_span_and_share_lines() {
        let input = "p cnf 3 2\n1 2\n3 0 -1\n-2 0\n";
        let f = ProjectedFormula::parse_dimacs(input).unwrap();
        assert_eq!(
            f.clause(ClauseId::new(1)).literals(),
            &[lit(1), lit(2), lit(3)]
        );
        assert_eq!(f.clause(ClauseId::new(2)).literals(), &[lit(-1), lit(-2)]);
    }

    #[test]
    fn duplicate_literals_dedup_and_tautologies_flag() {
        let input = "p cnf 2 2\n1 1 2 0\n1 -1 2 0\n";
        let f = ProjectedFormula::parse_dimacs(input).unwrap();
        assert_eq!(f.clause(ClauseId::new(1)).literals(), &[lit(1), lit(2)]);
        assert!(!f.clause(ClauseId::new(1)).is_tautology());
        assert!(f.clause(ClauseId::new(2)).is_tautology());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match ProjectedFormula::parse_dimacs("p cnf x 2\n") {
            Err(ParseError::MalformedHeader { line: 1, .. }) => {}
            other => panic!("unexpected: {other:?}"),
        }
        match ProjectedFormula::parse_dimacs("p cnf 2 1\n1 7 0\n") {
            Err(ParseError::LiteralOutOfRange {
                line: 2, value: 7, ..
            }) => {}
            other => panic!("unexpected: {other:?}"),
        }
        match ProjectedFormula::parse_dimacs("p cnf 2 2\n1 0\n") {
            Err(ParseError::ClauseCountMismatch {
                declared: 2,
                found: 1,
                ..
            }) => {}
            other => panic!("unexpected: {other:?}"),
        }
        match ProjectedFormula::parse_dimacs("p cnf 2 1\n1 2\n") {
            Err(ParseError::UnterminatedClause { line: 2 }) => {}
            other => panic!("unexpected: {other:?}"),
        }
        match ProjectedFormula::parse_dimacs("1 0\np cnf 1 1\n") {
            Err(ParseError::MissingHeader { line: 1 }) => {}
            other => panic!("unexpected: {other:?}"),
        }
        match ProjectedFormula::parse_dimacs("p cnf 2 1\nc p show 1\n1 2 0\n") {
            Err(ParseError::UnterminatedShow { .. }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn resolvent_of_overlapping_clauses() {
        // (y3 ∨ x2) ⊕ (¬y3 ∨ x1) on y3 = (x1 ∨ x2)
        let f = ProjectedFormula::parse_dimacs(DEMO).unwrap();
        let r = resolvent(
            f.clause(ClauseId::new(7)),
            f.clause(ClauseId::new(9)),
            lit(6),
        );
        assert_eq!(r, Resolvent::Clause(vec![lit(1), lit(2)]));
    }

    #[test]
    fn resolvent_detects_tautology() {
        // (y3 ∨ x2) ⊕ (¬y3 ∨ ¬x2 ∨ ¬x3) on y3 forces the pair x2/¬x2.
        let f = ProjectedFormula::parse_dimacs(DEMO).unwrap();
        let r = resolvent(
            f.clause(ClauseId::new(7)),
            f.clause(ClauseId::new(8)),
            lit(6),
        );
        assert!(r.is_tautology());
    }

    #[test]
    fn unit_resolution_gives_empty_clause() {
        let f = ProjectedFormula::new(1, [[1], [-1]], &[]);
        let r = resolvent(
            f.clause(ClauseId::new(1)),
            f.clause(ClauseId::new(2)),
            lit(1),
        );
        assert_eq!(r, Resolvent::Clause(vec![]));
    }

    #[test]
    #[should_panic(expected = "resolution literal")]
    fn resolvent_rejects_missing_literal() {
        let f = ProjectedFormula::new(2, [[1], [-1]], &[]);
        resolvent(
            f.clause(ClauseId::new(1)),
            f.clause(ClauseId::new(2)),
            lit(2),
        );
    }

    #[test]
    fn resolvent_set_on_demo_instance() {
        let f = ProjectedFormula::parse_dimacs(DEMO).unwrap();
        // α5 = (x2 ∨ ¬x3 ∨ y2) on y2: only α6 survives.
        let c5: Vec<u32> = f
            .resolvent_set(ClauseId::new(5), lit(5))
            .iter()
            .map(|c| c.get())
            .collect();
        assert_eq!(c5, vec![6]);
        // α4 = (x1 ∨ ¬x3 ∨ y1) on y1: the single partner resolves to a tautology.
        assert!(f.resolvent_set(ClauseId::new(4), lit(4)).is_empty());
    }

    #[test]
    fn resolvent_set_empty_when_all_partners_tautologize() {
        // (x1 ∨ x2) against S_{¬x1} = {(¬x1 ∨ ¬x2 ∨ ¬y1)} on x1.
        let f = ProjectedFormula::new(3, [vec![1, 2], vec![-1, -2, -3]], &[3]);
        assert!(f.resolvent_set(ClauseId::new(1), lit(1)).is_empty());
    }

    #[test]
    fn occurrence_index_matches_membership() {
        let f = ProjectedFormula::parse_dimacs(DEMO).unwrap();
        for v in 1..=6i32 {
            for l in [lit(v), lit(-v)] {
                for id in f.clause_ids() {
                    let listed = f.occurrences(l).contains(&id);
                    assert_eq!(listed, f.clause(id).contains(l));
                }
            }
        }
    }

    #[test]
    fn serialization_round_trips_bit_exactly() {
        let f = ProjectedFormula::parse_dimacs(DEMO).unwrap();
        let text = f.to_dimacs();
        let g = ProjectedFormula::parse_dimacs(&text).unwrap();
        assert_eq!(f, g);
        assert_eq!(text, g.to_dimacs());
    }
}
