use crate::cnf::{Assignment, CnfFormula, Var};
use crate::encodings::VarMap;

use super::{random_values, Budget, Rng, SearchOutcome, SearchParams, SearchState};

/// WalkSAT from a uniformly random start.
pub fn walksat(f: &CnfFormula, p: &SearchParams) -> SearchOutcome {
    let mut rng = Rng::new(p.seed);
    let init = Assignment::from_bools(&random_values(f.num_vars(), &mut rng));
    walksat_inner(f, &init, p, rng)
}

/// WalkSAT from `init`; unassigned variables start false.
pub fn walksat_from(f: &CnfFormula, init: &Assignment, p: &SearchParams) -> SearchOutcome {
    walksat_inner(f, init, p, Rng::new(p.seed))
}

fn walksat_inner(f: &CnfFormula, init: &Assignment, p: &SearchParams, mut rng: Rng) -> SearchOutcome {
    let mut st = SearchState::new(f, init);
    let mut budget = Budget::new(p, &st);
    while st.num_unsat() > 0 && !budget.exhausted() {
        let ci = *rng.pick(st.unsat()) as usize;
        let clause = f.clause(ci);
        let v = if rng.chance(p.noise) {
            rng.pick(clause).var()
        } else {
            let mut best = clause[0].var();
            let mut best_score = st.score(best).score;
            for lit in &clause[1..] {
                let s = st.score(lit.var()).score;
                if s > best_score {
                    best = lit.var();
                    best_score = s;
                }
            }
            best
        };
        st.flip(v);
        budget.record(&st);
    }
    budget.finish(f)
}

/// GSAT from a random start: flip the globally best variable (random
/// tie-break), restarting from a fresh random assignment on stagnation.
pub fn gsat(f: &CnfFormula, p: &SearchParams) -> SearchOutcome {
    let mut rng = Rng::new(p.seed);
    let init = Assignment::from_bools(&random_values(f.num_vars(), &mut rng));
    gsat_inner(f, &init, p, rng)
}

pub fn gsat_from(f: &CnfFormula, init: &Assignment, p: &SearchParams) -> SearchOutcome {
    gsat_inner(f, init, p, Rng::new(p.seed))
}

fn gsat_inner(f: &CnfFormula, init: &Assignment, p: &SearchParams, mut rng: Rng) -> SearchOutcome {
    let mut st = SearchState::new(f, init);
    let mut budget = Budget::new(p, &st);
    let vars: Vec<Var> = f.vars().filter(|&v| !f.occurrences(v).is_empty()).collect();
    let mut ties = Vec::new();
    let mut since_restart = 0u64;
    while st.num_unsat() > 0 && !budget.exhausted() && !vars.is_empty() {
        if since_restart >= p.stagnation_window.max(1) && budget.since_improvement >= p.stagnation_window {
            let fresh = random_values(f.num_vars(), &mut rng);
            st.reset(&fresh);
            since_restart = 0;
        }
        ties.clear();
        let mut best_score = i64::MIN;
        for &v in &vars {
            let s = st.score(v).score;
            if s > best_score {
                best_score = s;
                ties.clear();
            }
            if s == best_score {
                ties.push(v);
            }
        }
        let v = *rng.pick(&ties);
        st.flip(v);
        since_restart += 1;
        budget.record(&st);
    }
    budget.finish(f)
}

/// Sampled tabu search from a random start. `vm` restricts the pool to
/// registered variables; an empty map means every variable.
pub fn tabu_sampled(f: &CnfFormula, p: &SearchParams, vm: &VarMap) -> SearchOutcome {
    let mut rng = Rng::new(p.seed);
    let init = Assignment::from_bools(&random_values(f.num_vars(), &mut rng));
    tabu_inner(f, &init, p, vm, rng)
}

pub fn tabu_sampled_from(f: &CnfFormula, init: &Assignment, p: &SearchParams, vm: &VarMap) -> SearchOutcome {
    tabu_inner(f, init, p, vm, Rng::new(p.seed))
}

fn tabu_inner(f: &CnfFormula, init: &Assignment, p: &SearchParams, vm: &VarMap, mut rng: Rng) -> SearchOutcome {
    let mut st = SearchState::new(f, init);
    let mut budget = Budget::new(p, &st);
    let registered = vm.reverse();
    let pool: Vec<Var> = f
        .vars()
        .filter(|v| !f.occurrences(*v).is_empty())
        .filter(|v| registered.is_empty() || registered.contains_key(v))
        .collect();
    let n = f.num_vars() as usize;
    let mut tabu_until = vec![0u64; n];
    let mut improvements = vec![0u64; n];
    let mut candidates: Vec<Var> = Vec::with_capacity(pool.len());

    while st.num_unsat() > 0 && !budget.exhausted() && !pool.is_empty() {
        let iter = budget.flips;
        candidates.clear();
        candidates.extend(pool.iter().copied().filter(|v| tabu_until[v.index()] <= iter));
        if candidates.is_empty() {
            candidates.extend_from_slice(&pool);
        }
        let take = p.sample_size.min(candidates.len());
        if budget.since_improvement >= p.stagnation_window {
            candidates.sort_by_key(|v| (std::cmp::Reverse(improvements[v.index()]), v.id()));
        } else {
            rng.partial_shuffle(&mut candidates, take);
        }
        let mut best = candidates[0];
        let mut best_score = st.score(best).score;
        for &v in &candidates[1..take] {
            let s = st.score(v).score;
            if s > best_score {
                best = v;
                best_score = s;
            }
        }
        st.flip(best);
        if best_score > 0 {
            improvements[best.index()] += 1;
        }
        tabu_until[best.index()] = iter + 1 + p.tabu_tenure as u64;
        budget.record(&st);
    }
    budget.finish(f)
}
