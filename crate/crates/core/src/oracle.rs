//! Brute-force references and a seeded instance generator.
//!
//! Everything here trades time for auditability: projected counts by double
//! enumeration, blocked-clause fixpoints by repeated scanning. The engine
//! and the manager are validated against these on small instances; nothing
//! here is used on the counting path itself.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use thiserror::Error;

use crate::bcp::ResidualClause;
use crate::formula::{ClauseId, Lit, ProjectedFormula, Var};

/// Enumeration limit of [`brute_force_projected_count`].
pub const ENUMERATION_BOUND: usize = 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("{vars} counting variables exceed the enumeration bound of {ENUMERATION_BOUND}")]
    TooManyCountingVars { vars: usize },
}

/// Counts the models of `∃X.Σ` over the declared non-projected variables by
/// double enumeration: every assignment of the counting variables is tested
/// for an extension over the occurring projected variables that satisfies
/// every clause. Declared variables occurring in no clause contribute their
/// factor 2 automatically. Refuses more than [`ENUMERATION_BOUND`] counting
/// variables.
pub fn brute_force_projected_count(formula: &ProjectedFormula) -> Result<BigUint, OracleError> {
    let counting: Vec<Var> = formula.counting_vars().collect();
    if counting.len() > ENUMERATION_BOUND {
        return Err(OracleError::TooManyCountingVars {
            vars: counting.len(),
        });
    }
    let mut occurs = vec![false; formula.num_vars() as usize + 1];
    for clause in formula.clauses() {
        for var in clause.vars() {
            occurs[var.index() as usize] = true;
        }
    }
    let hidden: Vec<Var> = formula
        .projection()
        .filter(|v| occurs[v.index() as usize])
        .collect();
    let clauses: Vec<&[Lit]> = formula.clauses().map(|c| c.literals()).collect();

    let outer_total: u64 = 1 << counting.len();
    let scratch = vec![None; formula.num_vars() as usize + 1];
    let test = |values: &mut Vec<Option<bool>>, outer: u64| -> bool {
        for (bit, var) in counting.iter().enumerate() {
            values[var.index() as usize] = Some(outer >> bit & 1 == 1);
        }
        let extendable = (0u64..1 << hidden.len()).any(|inner| {
            for (bit, var) in hidden.iter().enumerate() {
                values[var.index() as usize] = Some(inner >> bit & 1 == 1);
            }
            clauses.iter().all(|clause| {
                clause
                    .iter()
                    .any(|&l| values[l.var().index() as usize] == Some(l.is_positive()))
            })
        });
        for var in counting.iter().chain(&hidden) {
            values[var.index() as usize] = None;
        }
        extendable
    };

    #[cfg(feature = "parallel")]
    let count = (0..outer_total)
        .into_par_iter()
        .map_init(
            || scratch.clone(),
            |values, outer| u64::from(test(values, outer)),
        )
        .sum::<u64>();

    #[cfg(not(feature = "parallel"))]
    let count = {
        let mut values = scratch;
        (0..outer_total)
            .filter(|&outer| test(&mut values, outer))
            .count() as u64
    };

    Ok(BigUint::from(count))
}

/// True when `(a ∖ {on}) ∪ (b ∖ {¬on})` contains a complementary pair.
fn resolvent_is_tautology(a: &[Lit], b: &[Lit], on: Lit) -> bool {
    a.iter()
        .filter(|&&l| l != on)
        .any(|&l| b.iter().any(|&m| m == !l && m != !on))
}

/// Computes the set of clauses removed by iterating blocked-clause
/// elimination to fixpoint, with blocking literals restricted to unassigned
/// variables satisfying `is_projected`. `residual` holds active clauses
/// with falsified literals already removed; tautological clauses are
/// vacuous and ignored both as removal candidates and as witnesses.
pub fn brute_force_blocked_fixpoint(
    residual: &[ResidualClause],
    is_projected: impl Fn(Var) -> bool,
    is_assigned: impl Fn(Var) -> bool,
) -> BTreeSet<ClauseId> {
    blocked_fixpoint_impl(residual, &is_projected, &is_assigned, None)
}

/// [`brute_force_blocked_fixpoint`] with a seeded random removal order; by
/// confluence the result must be identical for every seed.
pub fn blocked_fixpoint_with_seed(
    residual: &[ResidualClause],
    is_projected: impl Fn(Var) -> bool,
    is_assigned: impl Fn(Var) -> bool,
    seed: u64,
) -> BTreeSet<ClauseId> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    blocked_fixpoint_impl(residual, &is_projected, &is_assigned, Some(&mut rng))
}

fn blocked_fixpoint_impl(
    residual: &[ResidualClause],
    is_projected: &dyn Fn(Var) -> bool,
    is_assigned: &dyn Fn(Var) -> bool,
    mut rng: Option<&mut ChaCha8Rng>,
) -> BTreeSet<ClauseId> {
    let is_taut = |lits: &[Lit]| lits.iter().any(|&l| lits.contains(&!l));
    let mut alive: Vec<bool> = residual.iter().map(|c| !is_taut(&c.literals)).collect();
    let mut removed = BTreeSet::new();
    loop {
        let removable: Vec<usize> = (0..residual.len())
            .filter(|&i| alive[i])
            .filter(|&i| {
                residual[i].literals.iter().any(|&lit| {
                    is_projected(lit.var())
                        && !is_assigned(lit.var())
                        && (0..residual.len())
                            .filter(|&j| alive[j] && j != i)
                            .filter(|&j| residual[j].literals.contains(&!lit))
                            .all(|j| {
                                resolvent_is_tautology(
                                    &residual[i].literals,
                                    &residual[j].literals,
                                    lit,
                                )
                            })
                })
            })
            .collect();
        if removable.is_empty() {
            return removed;
        }
        let pick = match rng.as_mut() {
            None => removable[0],
            Some(rng) => removable[rng.gen_range(0..removable.len())],
        };
        alive[pick] = false;
        removed.insert(residual[pick].id);
    }
}

/// Parameters of the seeded random-instance generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub seed: u64,
    /// Declared variables, at most 16.
    pub num_vars: u32,
    pub num_clauses: usize,
    /// Inclusive clause-length bounds; lengths are clamped to `num_vars`.
    pub clause_len: (u32, u32),
    /// Probability for each variable to land in the projection set `X`.
    pub projection_density: f64,
}

/// Draws a random instance; identical configs give identical formulas.
/// Clauses are non-empty and sample distinct variables, so they carry no
/// duplicate literals and no complementary pair.
pub fn generate(config: &GeneratorConfig) -> ProjectedFormula {
    assert!(
        (1..=16).contains(&config.num_vars),
        "generator supports 1..=16 variables"
    );
    let (lo, hi) = config.clause_len;
    assert!(lo >= 1 && lo <= hi, "invalid clause length range");
    assert!(
        (0.0..=1.0).contains(&config.projection_density),
        "projection density must lie in [0, 1]"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut clauses: Vec<Vec<i32>> = Vec::with_capacity(config.num_clauses);
    for _ in 0..config.num_clauses {
        let len = rng.gen_range(lo..=hi).min(config.num_vars) as usize;
        let vars = rand::seq::index::sample(&mut rng, config.num_vars as usize, len);
        let clause = vars
            .iter()
            .map(|v| {
                let var = v as i32 + 1;
                if rng.gen_bool(0.5) {
                    var
                } else {
                    -var
                }
            })
            .collect();
        clauses.push(clause);
    }
    let projection: Vec<u32> = (1..=config.num_vars)
        .filter(|_| rng.gen_bool(config.projection_density))
        .collect();
    ProjectedFormula::new(config.num_vars, clauses, &projection)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bcp::FormulaState;

    fn demo() -> ProjectedFormula {
        ProjectedFormula::parse_dimacs(crate::test_instances::DEMO).unwrap()
    }

    fn demo_without_projection() -> ProjectedFormula {
        let text = crate::test_instances::DEMO.replace("c p show 1 2 3 0\n", "");
        ProjectedFormula::parse_dimacs(&text).unwrap()
    }

    fn full_residual(f: &ProjectedFormula) -> Vec<ResidualClause> {
        let state = FormulaState::new(f);
        state.residual_view(&f.clause_ids().collect::<Vec<_>>())
    }

    #[test]
    fn projected_count_on_demo() {
        assert_eq!(
            brute_force_projected_count(&demo()).unwrap(),
            BigUint::from(4u32)
        );
    }

    #[test]
    fn unprojected_count_on_demo() {
        assert_eq!(
            brute_force_projected_count(&demo_without_projection()).unwrap(),
            BigUint::from(9u32)
        );
    }

    #[test]
    fn unsatisfiable_projected_instance_counts_zero() {
        let f = ProjectedFormula::new(1, [[1], [-1]], &[1]);
        assert_eq!(
            brute_force_projected_count(&f).unwrap(),
            BigUint::from(0u32)
        );
    }

    #[test]
    fn refuses_past_the_enumeration_bound() {
        let f = ProjectedFormula::new(21, Vec::<Vec<i32>>::new(), &[]);
        assert_eq!(
            brute_force_projected_count(&f),
            Err(OracleError::TooManyCountingVars { vars: 21 })
        );
    }

    #[test]
    fn unconstrained_counting_vars_double_the_count() {
        let f = ProjectedFormula::new(3, [[1]], &[]);
        assert_eq!(
            brute_force_projected_count(&f).unwrap(),
            BigUint::from(4u32)
        );
    }

    #[test]
    fn root_fixpoint_on_demo() {
        let f = demo();
        let removed =
            brute_force_blocked_fixpoint(&full_residual(&f), |v| f.is_projected(v), |_| false);
        let expected: BTreeSet<ClauseId> =
            [3, 4, 8, 10].iter().map(|&i| ClauseId::new(i)).collect();
        assert_eq!(removed, expected);
    }

    #[test]
    fn fixpoint_after_root_removal_and_decision() {
        let f = demo();
        let mut state = FormulaState::new(&f);
        state.remove_clauses(&[3, 4, 8, 10].map(ClauseId::new));
        state.condition(&[Lit::from_dimacs(1)]);
        let residual = state.residual_view(&f.clause_ids().collect::<Vec<_>>());
        let removed = brute_force_blocked_fixpoint(
            &residual,
            |v| f.is_projected(v),
            |v| state.value(v).is_some(),
        );
        let expected: BTreeSet<ClauseId> = [5, 7, 11].iter().map(|&i| ClauseId::new(i)).collect();
        assert_eq!(removed, expected);
    }

    #[test]
    fn fixpoint_without_projected_literals_is_empty() {
        let f = ProjectedFormula::new(3, [[1, 2], [-2, 3]], &[]);
        let removed =
            brute_force_blocked_fixpoint(&full_residual(&f), |v| f.is_projected(v), |_| false);
        assert!(removed.is_empty());
    }

    #[test]
    fn unrestricted_fixpoint_empties_the_demo_instance() {
        // With every variable treated as projected, plain blocked-clause
        // elimination erases the whole instance, which would imply
        // 2^6 = 64 models over its variables — not the true 9. The engine
        // must never remove clauses blocked only on counting literals.
        let f = demo_without_projection();
        let removed = brute_force_blocked_fixpoint(&full_residual(&f), |_| true, |_| false);
        assert_eq!(removed.len(), 11);
        assert_eq!(
            brute_force_projected_count(&f).unwrap(),
            BigUint::from(9u32)
        );
    }

    #[test]
    fn fixpoint_is_order_independent() {
        for instance_seed in 0..20 {
            let f = generate(&GeneratorConfig {
                seed: instance_seed,
                num_vars: 8,
                num_clauses: 20,
                clause_len: (1, 4),
                projection_density: 0.5,
            });
            let residual = full_residual(&f);
            let canonical =
                brute_force_blocked_fixpoint(&residual, |v| f.is_projected(v), |_| false);
            for seed in 0..4 {
                let shuffled =
                    blocked_fixpoint_with_seed(&residual, |v| f.is_projected(v), |_| false, seed);
                assert_eq!(shuffled, canonical);
            }
        }
    }

    #[test]
    fn removing_the_fixpoint_preserves_the_projected_count() {
        for seed in 0..30 {
            let f = generate(&GeneratorConfig {
                seed,
                num_vars: 8,
                num_clauses: 16,
                clause_len: (1, 3),
                projection_density: 0.5,
            });
            let removed =
                brute_force_blocked_fixpoint(&full_residual(&f), |v| f.is_projected(v), |_| false);
            let kept: Vec<Vec<i32>> = f
                .clauses()
                .filter(|c| !removed.contains(&c.id()))
                .map(|c| c.literals().iter().map(|l| l.to_dimacs()).collect())
                .collect();
            let projection: Vec<u32> = f.projection().map(Var::index).collect();
            let reduced = ProjectedFormula::new(f.num_vars(), kept, &projection);
            assert_eq!(
                brute_force_projected_count(&f),
                brute_force_projected_count(&reduced),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let config = GeneratorConfig {
            seed: 7,
            num_vars: 10,
            num_clauses: 25,
            clause_len: (1, 4),
            projection_density: 0.3,
        };
        assert_eq!(generate(&config).to_dimacs(), generate(&config).to_dimacs());
    }

    #[test]
    fn projection_density_extremes() {
        let mut config = GeneratorConfig {
            seed: 11,
            num_vars: 9,
            num_clauses: 18,
            clause_len: (2, 3),
            projection_density: 0.0,
        };
        assert_eq!(generate(&config).projection().count(), 0);
        config.projection_density = 1.0;
        let f = generate(&config);
        assert_eq!(f.projection().count(), 9);
        let count = brute_force_projected_count(&f).unwrap();
        assert!(count == BigUint::from(0u32) || count == BigUint::from(1u32));
    }
}
