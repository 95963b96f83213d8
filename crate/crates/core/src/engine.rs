//! Multi-school deferred acceptance.
//!
//! Both entry points run batch rounds: every unassigned student proposes to
//! the best option that has not rejected her, each school re-evaluates its
//! full pool of held and new applicants, and rejected students move down
//! their lists. Rounds are synchronous, so identical inputs produce identical
//! matchings and traces.
//!
//! [`da_run`] drives applicant-pool rules (one pool per school per round);
//! [`da_run_subschool`] drives the split rules, where students propose to a
//! school's open or reserved side explicitly.

use std::collections::{BTreeMap, BTreeSet};

use crate::choice::{self, ChoiceResult, SchoolRule, SplitApplicants};
use crate::model::{
    Assignment, AugmentedMatching, Instance, PreferenceProfile, SchoolId, SeatType, StudentId,
};

/// One choice-rule configuration per school, indexed by `SchoolId`.
#[derive(Debug, Clone)]
pub struct RulePerSchool {
    rules: Vec<SchoolRule>,
}

impl RulePerSchool {
    pub fn new(rules: Vec<SchoolRule>) -> Self {
        RulePerSchool { rules }
    }

    pub fn uniform(instance: &Instance, rule: SchoolRule) -> Self {
        RulePerSchool {
            rules: vec![rule; instance.num_schools()],
        }
    }

    pub fn get(&self, school: SchoolId) -> &SchoolRule {
        &self.rules[school.idx()]
    }
}

/// One recorded round: the pool each school faced and what it chose.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRound {
    /// Applications on each school's table this round: everything it has
    /// received so far, held and rejected alike. Only schools with a
    /// nonempty pool appear.
    pub pools: BTreeMap<SchoolId, BTreeSet<StudentId>>,
    /// What each such school selected.
    pub results: BTreeMap<SchoolId, ChoiceResult>,
}

/// Round-by-round record of a run. The final round's tentative admissions
/// equal the returned matching.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DaTrace {
    pub rounds: Vec<TraceRound>,
}

/// One recorded round of a subschool run: per-school split pools.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubschoolTraceRound {
    pub open_pools: BTreeMap<SchoolId, BTreeSet<StudentId>>,
    pub reserve_pools: BTreeMap<SchoolId, BTreeSet<StudentId>>,
    pub results: BTreeMap<SchoolId, ChoiceResult>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SubschoolTrace {
    pub rounds: Vec<SubschoolTraceRound>,
}

/// Runs deferred acceptance with an applicant-pool rule at every school.
///
/// The rules are assumed substitutable; all rules shipped in
/// [`crate::choice`] are, which
/// [`choice::check_choice_properties`] verifies exhaustively on small
/// universes (the engine does not re-check per run).
pub fn da_run(
    instance: &Instance,
    prefs: &PreferenceProfile,
    rules: &RulePerSchool,
) -> AugmentedMatching {
    da_run_with(instance, prefs, |s, pool| rules.get(s).choose(s, pool, instance), false).0
}

/// [`da_run`] with the round-by-round trace retained.
pub fn da_run_traced(
    instance: &Instance,
    prefs: &PreferenceProfile,
    rules: &RulePerSchool,
) -> (AugmentedMatching, DaTrace) {
    let (matching, trace) = da_run_with(
        instance,
        prefs,
        |s, pool| rules.get(s).choose(s, pool, instance),
        true,
    );
    (matching, trace.expect("trace was requested"))
}

/// The round loop behind [`da_run`], generic over the per-school chooser so
/// stage mechanisms can run with adjusted quotas.
///
/// Runs as a cumulative offer process: once a student has applied to a
/// school, her application stays in its pool even after rejection, and the
/// school re-chooses from everything it has ever received. With the
/// substitutable quota-filling rules used here the held sets evolve exactly
/// as under held-plus-new re-evaluation, but seat types stay faithful: a
/// school's labeling must reflect everyone it turned away, not just the
/// survivors, or a reserve can be silently released the moment its
/// competition leaves (which would break the reserve axioms the outputs are
/// audited against).
pub(crate) fn da_run_with<F>(
    instance: &Instance,
    prefs: &PreferenceProfile,
    choose: F,
    record: bool,
) -> (AugmentedMatching, Option<DaTrace>)
where
    F: Fn(SchoolId, &BTreeSet<StudentId>) -> ChoiceResult,
{
    let n = instance.num_students();
    // Next list position each student will propose to.
    let mut next: Vec<usize> = vec![0; n];
    // School currently holding the student, if any.
    let mut held_at: Vec<Option<SchoolId>> = vec![None; n];
    // Every application each school has received so far.
    let mut offers: Vec<BTreeSet<StudentId>> = vec![BTreeSet::new(); instance.num_schools()];
    let mut last_results: BTreeMap<SchoolId, ChoiceResult> = BTreeMap::new();
    let mut trace = record.then(DaTrace::default);

    loop {
        let mut proposed = false;
        for i in instance.student_ids() {
            if held_at[i.idx()].is_some() {
                continue;
            }
            let list = prefs.get(i).ranked();
            if next[i.idx()] < list.len() {
                let school = list[next[i.idx()]];
                next[i.idx()] += 1;
                offers[school.idx()].insert(i);
                proposed = true;
            }
        }
        if !proposed {
            break;
        }

        let mut pools: BTreeMap<SchoolId, BTreeSet<StudentId>> = BTreeMap::new();
        let mut results: BTreeMap<SchoolId, ChoiceResult> = BTreeMap::new();
        for s in instance.school_ids() {
            if offers[s.idx()].is_empty() {
                continue;
            }
            let pool = offers[s.idx()].clone();
            let result = choose(s, &pool);
            let chosen = result.chosen();
            for &i in &pool {
                if chosen.contains(&i) {
                    held_at[i.idx()] = Some(s);
                } else if held_at[i.idx()] == Some(s) {
                    held_at[i.idx()] = None;
                }
            }
            last_results.insert(s, result.clone());
            pools.insert(s, pool);
            results.insert(s, result);
        }
        if let Some(trace) = trace.as_mut() {
            trace.rounds.push(TraceRound { pools, results });
        }
    }

    // Seat types come from each school's final selection, which saw the
    // school's complete application history.
    let mut matching = AugmentedMatching::empty(instance);
    for (s, result) in last_results {
        for (&i, &seat) in &result.seats {
            matching.set(i, Assignment::Matched { school: s, seat });
        }
    }
    (matching, trace)
}

/// Which split rule evaluates each school's two sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    /// Quotas stay apart; unfilled reserves are wasted.
    Separate,
    /// Unfilled reserves convert to open seats.
    Flexible,
}

/// A ranking over subschools: each entry targets one school's open or
/// reserved side.
pub type SubschoolList = Vec<(SchoolId, SeatType)>;

/// One subschool list per student, indexed by `StudentId`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubschoolProfile {
    lists: Vec<SubschoolList>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SubschoolError {
    #[error("subschool listed twice in one preference list")]
    DuplicateSubschool,
}

impl SubschoolProfile {
    /// Builds a profile, rejecting duplicate subschool entries per student.
    pub fn new(lists: Vec<SubschoolList>) -> Result<Self, SubschoolError> {
        for list in &lists {
            let mut seen = BTreeSet::new();
            for entry in list {
                if !seen.insert(*entry) {
                    return Err(SubschoolError::DuplicateSubschool);
                }
            }
        }
        Ok(SubschoolProfile { lists })
    }

    pub fn get(&self, student: StudentId) -> &SubschoolList {
        &self.lists[student.idx()]
    }

    pub fn lists(&self) -> &[SubschoolList] {
        &self.lists
    }
}

/// Runs deferred acceptance over subschools. Students propose to one side of
/// one school at a time; each school evaluates its accumulated split pool
/// with [`choice::separate`] or [`choice::flexible`] per `mode`. Seat types
/// follow the admitting side, so seats converted by the flexible rule are
/// recorded open.
pub fn da_run_subschool(
    instance: &Instance,
    prefs: &SubschoolProfile,
    mode: SplitMode,
) -> AugmentedMatching {
    run_subschool_da(instance, prefs, mode, false).0
}

/// [`da_run_subschool`] with the round-by-round trace retained.
pub fn da_run_subschool_traced(
    instance: &Instance,
    prefs: &SubschoolProfile,
    mode: SplitMode,
) -> (AugmentedMatching, SubschoolTrace) {
    let (matching, trace) = run_subschool_da(instance, prefs, mode, true);
    (matching, trace.expect("trace was requested"))
}

fn run_subschool_da(
    instance: &Instance,
    prefs: &SubschoolProfile,
    mode: SplitMode,
    record: bool,
) -> (AugmentedMatching, Option<SubschoolTrace>) {
    let n = instance.num_students();
    let mut next: Vec<usize> = vec![0; n];
    let mut held_at: Vec<Option<(SchoolId, SeatType)>> = vec![None; n];
    let mut trace = record.then(SubschoolTrace::default);
    let mut last_results: BTreeMap<SchoolId, ChoiceResult> = BTreeMap::new();

    loop {
        let mut proposals: BTreeMap<(SchoolId, SeatType), BTreeSet<StudentId>> = BTreeMap::new();
        for i in instance.student_ids() {
            if held_at[i.idx()].is_some() {
                continue;
            }
            let list = prefs.get(i);
            if next[i.idx()] < list.len() {
                let target = list[next[i.idx()]];
                next[i.idx()] += 1;
                proposals.entry(target).or_default().insert(i);
            }
        }
        if proposals.is_empty() {
            break;
        }

        let mut open_pools: BTreeMap<SchoolId, BTreeSet<StudentId>> = BTreeMap::new();
        let mut reserve_pools: BTreeMap<SchoolId, BTreeSet<StudentId>> = BTreeMap::new();
        for i in instance.student_ids() {
            if let Some((s, side)) = held_at[i.idx()] {
                match side {
                    SeatType::Open => open_pools.entry(s).or_default().insert(i),
                    SeatType::Reserved => reserve_pools.entry(s).or_default().insert(i),
                };
            }
        }
        for ((s, side), students) in &proposals {
            let map = match side {
                SeatType::Open => &mut open_pools,
                SeatType::Reserved => &mut reserve_pools,
            };
            map.entry(*s).or_default().extend(students.iter().copied());
        }

        let active: BTreeSet<SchoolId> = open_pools
            .keys()
            .chain(reserve_pools.keys())
            .copied()
            .collect();
        let mut results: BTreeMap<SchoolId, ChoiceResult> = BTreeMap::new();
        for &s in &active {
            let open_side = open_pools.get(&s).cloned().unwrap_or_default();
            let reserve_side = reserve_pools.get(&s).cloned().unwrap_or_default();
            let split = SplitApplicants::new(open_side.clone(), reserve_side.clone())
                .expect("held and proposal pools are disjoint by construction");
            let result = match mode {
                SplitMode::Separate => choice::separate(s, &split, instance),
                SplitMode::Flexible => choice::flexible(s, &split, instance),
            };
            for &i in open_side.union(&reserve_side) {
                match result.seats.get(&i) {
                    // Held on the side that admitted her: from the open side
                    // the seat is open (including converted seats), from the
                    // reserve side it is reserved.
                    Some(_) => {
                        let side = if open_side.contains(&i) {
                            SeatType::Open
                        } else {
                            SeatType::Reserved
                        };
                        held_at[i.idx()] = Some((s, side));
                    }
                    None => {
                        if held_at[i.idx()].map(|(h, _)| h) == Some(s) {
                            held_at[i.idx()] = None;
                        }
                    }
                }
            }
            results.insert(s, result);
        }
        last_results.extend(results.clone());
        if let Some(trace) = trace.as_mut() {
            trace.rounds.push(SubschoolTraceRound {
                open_pools,
                reserve_pools,
                results,
            });
        }
    }

    let mut matching = AugmentedMatching::empty(instance);
    for (_, result) in last_results {
        for (&i, &seat) in &result.seats {
            matching.set(
                i,
                Assignment::Matched {
                    school: result.school,
                    seat,
                },
            );
        }
    }
    (matching, trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::PreferenceList;

    fn simultaneous_profile(fx: &fixtures::Fixture, instance: &Instance) -> PreferenceProfile {
        let mut profile = PreferenceProfile::new(vec![PreferenceList::empty(); instance.num_students()]);
        for (student, list) in &fx.prefs {
            let ranked = list
                .iter()
                .map(|s| instance.find_school(s).unwrap())
                .collect();
            profile.set(
                instance.find_student(student).unwrap(),
                PreferenceList::new(ranked).unwrap(),
            );
        }
        profile
    }

    fn subschool_profile(fx: &fixtures::Fixture, instance: &Instance) -> SubschoolProfile {
        let mut lists = vec![Vec::new(); instance.num_students()];
        for (student, entries) in &fx.subschool_prefs {
            let i = instance.find_student(student).unwrap();
            lists[i.idx()] = entries
                .iter()
                .map(|e| {
                    let (school, side) = e.rsplit_once('.').unwrap();
                    let side = match side {
                        "o" => SeatType::Open,
                        "r" => SeatType::Reserved,
                        other => panic!("bad side {other}"),
                    };
                    (instance.find_school(school).unwrap(), side)
                })
                .collect();
        }
        SubschoolProfile::new(lists).unwrap()
    }

    #[test]
    fn ex3_truthful_open_first_reaches_the_dominant_stable_matching() {
        let fx = fixtures::ex3();
        let instance = fx.instance();
        let prefs = simultaneous_profile(&fx, &instance);
        let rules = RulePerSchool::uniform(&instance, SchoolRule::OpenFirst);
        let matching = da_run(&instance, &prefs, &rules);
        let expected = fixtures::ex3_stable_matchings(&instance)[1].clone();
        assert_eq!(matching, expected);
    }

    #[test]
    fn single_school_run_is_one_round_of_the_rule() {
        let fx = fixtures::ex1();
        let instance = fx.instance();
        let prefs = PreferenceProfile::uniform(&instance, &[SchoolId(0)]);
        let rules = RulePerSchool::uniform(&instance, SchoolRule::ReserveFirst);
        let (matching, trace) = da_run_traced(&instance, &prefs, &rules);
        assert_eq!(trace.rounds.len(), 1);
        let direct = choice::reserve_first(SchoolId(0), &instance.all_students(), &instance);
        for (&i, &seat) in &direct.seats {
            assert_eq!(
                matching.assignment(i),
                Assignment::Matched {
                    school: SchoolId(0),
                    seat
                }
            );
        }
    }

    #[test]
    fn empty_preferences_leave_everyone_unmatched() {
        let fx = fixtures::ex3();
        let instance = fx.instance();
        let prefs = PreferenceProfile::new(vec![PreferenceList::empty(); 4]);
        let rules = RulePerSchool::uniform(&instance, SchoolRule::OpenFirst);
        let matching = da_run(&instance, &prefs, &rules);
        assert_eq!(matching, AugmentedMatching::empty(&instance));
    }

    #[test]
    fn ex12_flexible_run_matches_the_published_table() {
        let fx = fixtures::ex12();
        let instance = fx.instance();
        let prefs = subschool_profile(&fx, &instance);
        let (matching, trace) = da_run_subschool_traced(&instance, &prefs, SplitMode::Flexible);
        assert_eq!(trace.rounds.len(), 6);
        assert_eq!(matching, fixtures::ex12_final_matching(&instance));
    }

    #[test]
    fn ex12_separate_run_rejects_at_the_fully_reserved_school() {
        let fx = fixtures::ex12();
        let instance = fx.instance();
        let prefs = subschool_profile(&fx, &instance);
        let matching = da_run_subschool(&instance, &prefs, SplitMode::Separate);
        // No transfer at the third school: its open side has zero quota, so
        // the late open-side applicants fall through to the last school or
        // out of the market entirely.
        let s3 = instance.find_school("s3").unwrap();
        let s4 = instance.find_school("s4").unwrap();
        assert!(matching.admitted(s3).is_empty());
        let at_s4: BTreeSet<StudentId> = matching.admitted(s4).into_iter().collect();
        let i3 = instance.find_student("i3").unwrap();
        let i4 = instance.find_student("i4").unwrap();
        assert_eq!(at_s4, BTreeSet::from([i3, i4]));
        for name in ["i7", "i8"] {
            let i = instance.find_student(name).unwrap();
            assert_eq!(matching.assignment(i), Assignment::Unmatched);
        }
        assert_ne!(
            matching,
            da_run_subschool(&instance, &prefs, SplitMode::Flexible)
        );
    }

    #[test]
    fn empty_subschool_lists_leave_everyone_unmatched() {
        let fx = fixtures::ex12();
        let instance = fx.instance();
        let prefs = SubschoolProfile::new(vec![Vec::new(); instance.num_students()]).unwrap();
        for mode in [SplitMode::Separate, SplitMode::Flexible] {
            assert_eq!(
                da_run_subschool(&instance, &prefs, mode),
                AugmentedMatching::empty(&instance)
            );
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let fx = fixtures::ex3();
        let instance = fx.instance();
        let prefs = simultaneous_profile(&fx, &instance);
        let rules = RulePerSchool::uniform(&instance, SchoolRule::OpenFirst);
        let (m1, t1) = da_run_traced(&instance, &prefs, &rules);
        let (m2, t2) = da_run_traced(&instance, &prefs, &rules);
        assert_eq!(m1, m2);
        assert_eq!(t1, t2);
    }

    #[test]
    fn trace_final_round_agrees_with_the_matching() {
        let fx = fixtures::ex12();
        let instance = fx.instance();
        let prefs = subschool_profile(&fx, &instance);
        let (matching, trace) = da_run_subschool_traced(&instance, &prefs, SplitMode::Flexible);
        let mut from_trace = AugmentedMatching::empty(&instance);
        // Take each school's latest recorded selection.
        let mut latest: BTreeMap<SchoolId, &ChoiceResult> = BTreeMap::new();
        for round in &trace.rounds {
            for (&s, result) in &round.results {
                latest.insert(s, result);
            }
        }
        for (_, result) in latest {
            for (&i, &seat) in &result.seats {
                from_trace.set(
                    i,
                    Assignment::Matched {
                        school: result.school,
                        seat,
                    },
                );
            }
        }
        assert_eq!(from_trace, matching);
    }

    #[test]
    fn rejected_students_never_return_to_a_school() {
        let fx = fixtures::ex12();
        let instance = fx.instance();
        let prefs = subschool_profile(&fx, &instance);
        let (_, trace) = da_run_subschool_traced(&instance, &prefs, SplitMode::Flexible);
        // Once a student leaves a subschool's pool she must not reappear in it.
        let mut rejected: BTreeSet<(StudentId, SchoolId, SeatType)> = BTreeSet::new();
        for round in &trace.rounds {
            for (pools, side) in [
                (&round.open_pools, SeatType::Open),
                (&round.reserve_pools, SeatType::Reserved),
            ] {
                for (&s, pool) in pools {
                    for &i in pool {
                        assert!(
                            !rejected.contains(&(i, s, side)),
                            "{i:?} reappears at {s:?}"
                        );
                    }
                    let result = &round.results[&s];
                    for &i in pool {
                        if !result.seats.contains_key(&i) {
                            rejected.insert((i, s, side));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn proposal_count_is_bounded_by_total_list_length() {
        let fx = fixtures::ex3();
        let instance = fx.instance();
        let prefs = simultaneous_profile(&fx, &instance);
        let rules = RulePerSchool::uniform(&instance, SchoolRule::OpenFirst);
        let (_, trace) = da_run_traced(&instance, &prefs, &rules);
        let total: usize = prefs.lists().iter().map(|l| l.len()).sum();
        assert!(trace.rounds.len() <= total.max(1));
    }
}
