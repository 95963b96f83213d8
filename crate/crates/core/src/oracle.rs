//! Brute-force ground truth for small markets: exhaustive matching
//! enumeration, stable sets, verifiable single-school choice sets, pure-Nash
//! sweeps for the two-stage mechanisms, misreport audits, and cross-mechanism
//! equivalence checks.
//!
//! Every size guard is an explicit error, never silent sampling. Randomized
//! sweeps live with the generator and always take a caller-provided seed.

use std::collections::BTreeSet;

use crate::audit::{
    is_or_verifiable, is_ro_verifiable, stability_report, SequentialPreferences,
    SequentialProfile,
};
use crate::choice::{self, ChoiceResult, SchoolRule};
use crate::engine::RulePerSchool;
use crate::mechanisms::{self, MechanismId};
use crate::model::{
    Assignment, AugmentedMatching, Instance, PreferenceList, PreferenceProfile, SchoolId,
    SeatType, StudentId,
};

/// Student limit for whole-instance matching enumeration.
pub const ENUMERATION_STUDENT_LIMIT: usize = 8;
/// Configuration limit for whole-instance matching enumeration.
pub const ENUMERATION_CONFIG_LIMIT: u128 = 4_000_000;
/// Applicant limit for single-school choice-set enumeration.
pub const CHOICE_SET_LIMIT: usize = 12;
/// Profile limit for equilibrium sweeps.
pub const PROFILE_LIMIT: u128 = 2_000_000;
/// School limit for exhaustive misreport audits.
pub const MISREPORT_SCHOOL_LIMIT: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("instance too large to enumerate ({students} students, {configs} configurations)")]
    EnumerationGuard { students: usize, configs: u128 },
    #[error("choice-set pool has {size} applicants, above the limit of {limit}")]
    ChoiceSetGuard { size: usize, limit: usize },
    #[error("strategy space spans {profiles} profiles, above the limit of {limit}")]
    ProfileGuard { profiles: u128, limit: u128 },
    #[error("misreport audit limited to {limit} schools, instance has {schools}")]
    MisreportGuard { schools: usize, limit: usize },
    #[error("equilibrium sweeps are defined for the two-stage mechanisms, not {0}")]
    NotSequential(MechanismId),
}

/// Enumerates every seat-typed matching of the instance (per-student school
/// and seat choices respecting capacities and reserve caps), each exactly
/// once with unmatched students canonicalized.
pub fn enumerate_matchings(instance: &Instance) -> Result<Vec<AugmentedMatching>, OracleError> {
    let mut out = Vec::new();
    visit_matchings(instance, &mut |m| out.push(m.clone()))?;
    Ok(out)
}

/// Streaming form of [`enumerate_matchings`].
pub fn visit_matchings<F>(instance: &Instance, visit: &mut F) -> Result<(), OracleError>
where
    F: FnMut(&AugmentedMatching),
{
    let n = instance.num_students();
    let options = 2 * instance.num_schools() as u128 + 1;
    let configs = options.checked_pow(n as u32).unwrap_or(u128::MAX);
    if n > ENUMERATION_STUDENT_LIMIT || configs > ENUMERATION_CONFIG_LIMIT {
        return Err(OracleError::EnumerationGuard {
            students: n,
            configs,
        });
    }

    let mut capacity: Vec<u32> = instance
        .school_ids()
        .map(|s| instance.school(s).capacity)
        .collect();
    let mut reserve: Vec<Vec<u32>> = instance
        .school_ids()
        .map(|s| instance.school(s).reserves.clone())
        .collect();
    let mut assignments = vec![Assignment::Unmatched; n];

    fn recurse<F: FnMut(&AugmentedMatching)>(
        instance: &Instance,
        k: usize,
        capacity: &mut [u32],
        reserve: &mut [Vec<u32>],
        assignments: &mut Vec<Assignment>,
        visit: &mut F,
    ) {
        if k == instance.num_students() {
            visit(&AugmentedMatching::new(assignments.clone()));
            return;
        }
        let student = StudentId(k as u32);
        let ty = instance.student(student).ty;

        assignments[k] = Assignment::Unmatched;
        recurse(instance, k + 1, capacity, reserve, assignments, visit);

        for s in instance.school_ids() {
            if capacity[s.idx()] == 0 {
                continue;
            }
            capacity[s.idx()] -= 1;
            assignments[k] = Assignment::Matched {
                school: s,
                seat: SeatType::Open,
            };
            recurse(instance, k + 1, capacity, reserve, assignments, visit);
            if reserve[s.idx()][ty.idx()] > 0 {
                reserve[s.idx()][ty.idx()] -= 1;
                assignments[k] = Assignment::Matched {
                    school: s,
                    seat: SeatType::Reserved,
                };
                recurse(instance, k + 1, capacity, reserve, assignments, visit);
                reserve[s.idx()][ty.idx()] += 1;
            }
            capacity[s.idx()] += 1;
        }
        assignments[k] = Assignment::Unmatched;
    }

    recurse(
        instance,
        0,
        &mut capacity,
        &mut reserve,
        &mut assignments,
        visit,
    );
    Ok(())
}

/// All stable matchings of the instance under the given preferences, in the
/// enumeration order.
pub fn stable_set(
    instance: &Instance,
    prefs: &PreferenceProfile,
) -> Result<Vec<AugmentedMatching>, OracleError> {
    let mut out = Vec::new();
    visit_matchings(instance, &mut |m| {
        if stability_report(m, prefs, instance).is_stable() {
            out.push(m.clone());
        }
    })?;
    Ok(out)
}

fn verifiable_choice_set(
    school: SchoolId,
    applicants: &BTreeSet<StudentId>,
    instance: &Instance,
    open_first_rule: bool,
) -> Result<Vec<ChoiceResult>, OracleError> {
    if applicants.len() > CHOICE_SET_LIMIT {
        return Err(OracleError::ChoiceSetGuard {
            size: applicants.len(),
            limit: CHOICE_SET_LIMIT,
        });
    }
    let members: Vec<StudentId> = applicants.iter().copied().collect();
    let capacity = instance.school(school).capacity as usize;
    let economy = instance.single_school_economy(school, applicants);
    let mut enumerator = SelectionEnumerator {
        instance,
        economy,
        school,
        seats: vec![None; members.len()],
        reserve: instance.school(school).reserves.clone(),
        target: members.len().min(capacity),
        capacity,
        open_first_rule,
        out: Vec::new(),
        members,
    };
    enumerator.recurse(0, 0);
    Ok(enumerator.out)
}

/// Depth-first walk over the seat-typed selections from one applicant pool,
/// keeping only selections that pass the requested verification audit.
///
/// Only selections seating exactly min(capacity, applicants) can pass either
/// audit (anything smaller leaves the school affordable to a rejected
/// applicant, breaking her school clause), so shorter branches are pruned.
struct SelectionEnumerator<'a> {
    instance: &'a Instance,
    economy: crate::model::SingleSchoolEconomy,
    school: SchoolId,
    members: Vec<StudentId>,
    seats: Vec<Option<SeatType>>,
    reserve: Vec<u32>,
    target: usize,
    capacity: usize,
    open_first_rule: bool,
    out: Vec<ChoiceResult>,
}

impl SelectionEnumerator<'_> {
    fn recurse(&mut self, k: usize, chosen: usize) {
        if chosen + (self.members.len() - k) < self.target {
            return;
        }
        if k == self.members.len() {
            self.audit_leaf();
            return;
        }
        let ty = self.instance.student(self.members[k]).ty;

        self.seats[k] = None;
        self.recurse(k + 1, chosen);

        if chosen < self.capacity {
            self.seats[k] = Some(SeatType::Open);
            self.recurse(k + 1, chosen + 1);
            if self.reserve[ty.idx()] > 0 {
                self.reserve[ty.idx()] -= 1;
                self.seats[k] = Some(SeatType::Reserved);
                self.recurse(k + 1, chosen + 1);
                self.reserve[ty.idx()] += 1;
            }
            self.seats[k] = None;
        }
    }

    fn audit_leaf(&mut self) {
        let selection: std::collections::BTreeMap<StudentId, SeatType> = self
            .members
            .iter()
            .zip(self.seats.iter())
            .filter_map(|(&i, seat)| seat.map(|t| (i, t)))
            .collect();
        let matching = self.economy.matching_from_selection(&selection);
        let verdict = if self.open_first_rule {
            is_or_verifiable(&matching, &self.economy.prefs, &self.economy.economy)
        } else {
            is_ro_verifiable(&matching, &self.economy.prefs, &self.economy.economy)
        };
        if verdict.passed() {
            self.out.push(ChoiceResult {
                school: self.school,
                seats: selection,
            });
        }
    }
}

/// Every seat-typed selection from `applicants` that passes the open-first
/// verification audit in the one-school economy.
pub fn or_verifiable_choice_set(
    school: SchoolId,
    applicants: &BTreeSet<StudentId>,
    instance: &Instance,
) -> Result<Vec<ChoiceResult>, OracleError> {
    verifiable_choice_set(school, applicants, instance, true)
}

/// Every seat-typed selection from `applicants` that passes the
/// reserved-first verification audit in the one-school economy.
pub fn ro_verifiable_choice_set(
    school: SchoolId,
    applicants: &BTreeSet<StudentId>,
    instance: &Instance,
) -> Result<Vec<ChoiceResult>, OracleError> {
    verifiable_choice_set(school, applicants, instance, false)
}

/// Per-student strategy sets for an equilibrium sweep of a two-stage
/// mechanism.
#[derive(Debug, Clone)]
pub struct StrategySpace {
    strategies: Vec<Vec<SequentialPreferences>>,
}

/// All orderings of all subsets of `schools` (the empty list included).
pub fn ordered_sublists(schools: &[SchoolId]) -> Vec<PreferenceList> {
    let mut out = vec![PreferenceList::empty()];
    let mut stack: Vec<Vec<SchoolId>> = vec![Vec::new()];
    while let Some(prefix) = stack.pop() {
        for &s in schools {
            if prefix.contains(&s) {
                continue;
            }
            let mut next = prefix.clone();
            next.push(s);
            out.push(PreferenceList::new(next.clone()).expect("prefix is duplicate-free"));
            stack.push(next);
        }
    }
    out.sort();
    out
}

impl StrategySpace {
    /// The full space: every student may submit any pair of ordered sublists
    /// of the school set, one per stage.
    pub fn full_sequential(instance: &Instance) -> Self {
        let schools: Vec<SchoolId> = instance.school_ids().collect();
        let lists = ordered_sublists(&schools);
        let pairs: Vec<SequentialPreferences> = lists
            .iter()
            .flat_map(|reserve| {
                lists.iter().map(move |open| SequentialPreferences {
                    reserve: reserve.clone(),
                    open: open.clone(),
                })
            })
            .collect();
        StrategySpace {
            strategies: vec![pairs; instance.num_students()],
        }
    }

    /// A caller-restricted space.
    pub fn new(strategies: Vec<Vec<SequentialPreferences>>) -> Self {
        StrategySpace { strategies }
    }

    pub fn profile_count(&self) -> u128 {
        self.strategies
            .iter()
            .map(|s| s.len() as u128)
            .product()
    }

    pub fn strategies(&self, student: StudentId) -> &[SequentialPreferences] {
        &self.strategies[student.idx()]
    }
}

/// One deduplicated equilibrium outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeOutcome {
    pub matching: AugmentedMatching,
    /// Stability under the true preferences.
    pub stable: bool,
    /// Violates non-wastefulness under the true preferences.
    pub wasteful: bool,
    /// One supporting equilibrium profile, as strategy indices per student.
    pub witness: Vec<usize>,
}

/// Result of an exhaustive pure-equilibrium sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeResult {
    /// Every equilibrium profile, as strategy indices per student.
    pub equilibria: Vec<Vec<usize>>,
    /// Distinct equilibrium matchings with their flags.
    pub outcomes: Vec<NeOutcome>,
}

/// Exhaustively evaluates every profile of `space` under a two-stage
/// mechanism and keeps the profiles from which no student can strictly
/// improve her school (judged by `true_prefs`) with any unilateral switch
/// inside her strategy set. `jobs` caps the worker threads; zero means one
/// per available core.
pub fn ne_outcomes(
    instance: &Instance,
    true_prefs: &PreferenceProfile,
    mechanism: MechanismId,
    space: &StrategySpace,
    jobs: usize,
) -> Result<NeResult, OracleError> {
    if !mechanism.is_sequential() {
        return Err(OracleError::NotSequential(mechanism));
    }
    let total_u128 = space.profile_count();
    if total_u128 > PROFILE_LIMIT {
        return Err(OracleError::ProfileGuard {
            profiles: total_u128,
            limit: PROFILE_LIMIT,
        });
    }
    let total = total_u128 as usize;
    let n = instance.num_students();
    let counts: Vec<usize> = (0..n)
        .map(|i| space.strategies(StudentId(i as u32)).len())
        .collect();
    let mut strides = vec![1usize; n];
    for i in 1..n {
        strides[i] = strides[i - 1] * counts[i - 1];
    }

    let run_profile = |index: usize| -> AugmentedMatching {
        let mut profile = SequentialProfile::empty(instance);
        for i in 0..n {
            let which = (index / strides[i]) % counts[i];
            profile.set(
                StudentId(i as u32),
                space.strategies(StudentId(i as u32))[which].clone(),
            );
        }
        match mechanism {
            MechanismId::SeqRo => mechanisms::seq_ro(instance, &profile).matching,
            MechanismId::SeqOr => mechanisms::seq_or(instance, &profile).matching,
            _ => unreachable!("guarded above"),
        }
    };

    // Assigned school per (profile, student): the school's index, or the
    // school count for unmatched.
    let unmatched_code = instance.num_schools() as u8;
    let mut outcomes = vec![0u8; total * n];
    let workers = effective_jobs(jobs, total);
    if workers <= 1 {
        fill_outcomes(&mut outcomes, 0, total, n, unmatched_code, &run_profile);
    } else {
        let chunk = total.div_ceil(workers);
        std::thread::scope(|scope| {
            for (w, slice) in outcomes.chunks_mut(chunk * n).enumerate() {
                let run_profile = &run_profile;
                scope.spawn(move || {
                    let start = w * chunk;
                    let len = slice.len() / n;
                    fill_outcomes(slice, start, len, n, unmatched_code, run_profile);
                });
            }
        });
    }

    let rank_tables: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let list = true_prefs.get(StudentId(i as u32));
            (0..=instance.num_schools())
                .map(|code| {
                    if code == instance.num_schools() {
                        list.rank(None)
                    } else {
                        list.rank(Some(SchoolId(code as u32)))
                    }
                })
                .collect()
        })
        .collect();

    let is_equilibrium = |index: usize| -> bool {
        for i in 0..n {
            let here = rank_tables[i][outcomes[index * n + i] as usize];
            let base = index - ((index / strides[i]) % counts[i]) * strides[i];
            for alt in 0..counts[i] {
                let deviated = base + alt * strides[i];
                if rank_tables[i][outcomes[deviated * n + i] as usize] < here {
                    return false;
                }
            }
        }
        true
    };

    let equilibria: Vec<Vec<usize>> = (0..total)
        .filter(|&p| is_equilibrium(p))
        .map(|p| (0..n).map(|i| (p / strides[i]) % counts[i]).collect())
        .collect();

    let mut seen: BTreeSet<AugmentedMatching> = BTreeSet::new();
    let mut distinct = Vec::new();
    for profile in &equilibria {
        let index: usize = profile
            .iter()
            .zip(&strides)
            .map(|(&which, &stride)| which * stride)
            .sum();
        let matching = run_profile(index);
        if seen.insert(matching.clone()) {
            let report = stability_report(&matching, true_prefs, instance);
            distinct.push(NeOutcome {
                stable: report.is_stable(),
                wasteful: !report.non_wasteful(),
                matching,
                witness: profile.clone(),
            });
        }
    }

    Ok(NeResult {
        equilibria,
        outcomes: distinct,
    })
}

fn effective_jobs(jobs: usize, work: usize) -> usize {
    let jobs = if jobs == 0 {
        std::thread::available_parallelism()
            .map(|p| p.get())
            .unwrap_or(1)
    } else {
        jobs
    };
    jobs.min(work.max(1))
}

fn fill_outcomes<F>(
    slice: &mut [u8],
    start: usize,
    len: usize,
    n: usize,
    unmatched_code: u8,
    run_profile: &F,
) where
    F: Fn(usize) -> AugmentedMatching,
{
    for k in 0..len {
        let matching = run_profile(start + k);
        for i in 0..n {
            slice[k * n + i] = match matching.school_of(StudentId(i as u32)) {
                Some(s) => s.0 as u8,
                None => unmatched_code,
            };
        }
    }
}

/// How a student misreported in a strategy-proofness violation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Misreport {
    List(PreferenceList),
    Pair(SequentialPreferences),
}

/// One profitable misreport found by [`strategyproofness_audit`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpViolation {
    pub student: StudentId,
    pub misreport: Misreport,
    pub truthful_school: Option<SchoolId>,
    pub deviation_school: Option<SchoolId>,
}

/// Sweeps every unilateral misreport of every student and records the strict
/// improvements (judged by the true preferences). One-stage mechanisms take
/// list misreports; two-stage mechanisms submit the true list in both stages
/// and deviate over all stage-list pairs, asymmetric pairs included.
pub fn strategyproofness_audit(
    mechanism: MechanismId,
    instance: &Instance,
    true_prefs: &PreferenceProfile,
) -> Result<Vec<SpViolation>, OracleError> {
    if instance.num_schools() > MISREPORT_SCHOOL_LIMIT {
        return Err(OracleError::MisreportGuard {
            schools: instance.num_schools(),
            limit: MISREPORT_SCHOOL_LIMIT,
        });
    }
    let schools: Vec<SchoolId> = instance.school_ids().collect();
    let lists = ordered_sublists(&schools);
    let mut violations = Vec::new();

    if mechanism.is_sequential() {
        let truth = SequentialProfile::new(
            true_prefs
                .lists()
                .iter()
                .map(|l| SequentialPreferences {
                    reserve: l.clone(),
                    open: l.clone(),
                })
                .collect(),
        );
        let run = |profile: &SequentialProfile| match mechanism {
            MechanismId::SeqRo => mechanisms::seq_ro(instance, profile).matching,
            MechanismId::SeqOr => mechanisms::seq_or(instance, profile).matching,
            _ => unreachable!(),
        };
        let baseline = run(&truth);
        for i in instance.student_ids() {
            let list = true_prefs.get(i);
            for reserve in &lists {
                for open in &lists {
                    let pair = SequentialPreferences {
                        reserve: reserve.clone(),
                        open: open.clone(),
                    };
                    if *reserve == truth.get(i).reserve && *open == truth.get(i).open {
                        continue;
                    }
                    let mut deviated = truth.clone();
                    deviated.set(i, pair.clone());
                    let outcome = run(&deviated);
                    if list.prefers(outcome.school_of(i), baseline.school_of(i)) {
                        violations.push(SpViolation {
                            student: i,
                            misreport: Misreport::Pair(pair),
                            truthful_school: baseline.school_of(i),
                            deviation_school: outcome.school_of(i),
                        });
                    }
                }
            }
        }
    } else {
        let rule = match mechanism {
            MechanismId::SimRo => SchoolRule::ReserveFirst,
            MechanismId::SimOro => SchoolRule::OpenReserveOpen,
            MechanismId::SimOr => SchoolRule::OpenFirst,
            MechanismId::SimSep | MechanismId::SimFlex | MechanismId::SeqRo | MechanismId::SeqOr => {
                return Err(OracleError::NotSequential(mechanism))
            }
        };
        let rules = RulePerSchool::uniform(instance, rule);
        let baseline = crate::engine::da_run(instance, true_prefs, &rules);
        for i in instance.student_ids() {
            let list = true_prefs.get(i);
            for misreport in &lists {
                if misreport == list {
                    continue;
                }
                let mut deviated = true_prefs.clone();
                deviated.set(i, misreport.clone());
                let outcome = crate::engine::da_run(instance, &deviated, &rules);
                if list.prefers(outcome.school_of(i), baseline.school_of(i)) {
                    violations.push(SpViolation {
                        student: i,
                        misreport: Misreport::List(misreport.clone()),
                        truthful_school: baseline.school_of(i),
                        deviation_school: outcome.school_of(i),
                    });
                }
            }
        }
    }

    Ok(violations)
}

/// The cross-mechanism identities checked by [`equivalence_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquivalencePair {
    /// Flexible subschool run on open-leading consistent lists equals the
    /// open-first mechanism, seat types included.
    FlexOpenFirst,
    /// Flexible subschool run on reserve-leading consistent lists equals the
    /// reserves-first mechanism, seat types included.
    FlexReserveFirst,
    /// The backward-transfer rule selects like the open-first rule and
    /// reserves at least as much, school by school.
    BackwardTransferSelection,
}

/// Outcome of one equivalence check; `mismatch` carries both matchings when
/// the identity fails.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquivalenceReport {
    pub pair: EquivalencePair,
    pub holds: bool,
    pub mismatch: Option<(AugmentedMatching, AugmentedMatching)>,
}

/// Runs both sides of the chosen identity on one preference profile.
pub fn equivalence_check(
    instance: &Instance,
    prefs: &PreferenceProfile,
    pair: EquivalencePair,
) -> EquivalenceReport {
    let (left, right, holds) = match pair {
        EquivalencePair::FlexOpenFirst | EquivalencePair::FlexReserveFirst => {
            let first = match pair {
                EquivalencePair::FlexOpenFirst => SeatType::Open,
                _ => SeatType::Reserved,
            };
            let subschool = mechanisms::consistent_profile(instance, prefs, first);
            let flex = mechanisms::sim_flex(instance, &subschool).matching;
            let direct = match pair {
                EquivalencePair::FlexOpenFirst => mechanisms::sim_or(instance, prefs).matching,
                _ => mechanisms::sim_ro(instance, prefs).matching,
            };
            let holds = flex == direct;
            (flex, direct, holds)
        }
        EquivalencePair::BackwardTransferSelection => {
            let bt = crate::engine::da_run(
                instance,
                prefs,
                &RulePerSchool::uniform(instance, SchoolRule::BackwardTransfer),
            );
            let or = mechanisms::sim_or(instance, prefs).matching;
            let same_selection = bt.to_standard(instance) == or.to_standard(instance);
            let reserved_superset = instance.school_ids().all(|s| {
                instance.type_ids().all(|t| {
                    let bt_reserved: BTreeSet<StudentId> =
                        bt.reserved_of_type(instance, s, t).into_iter().collect();
                    or.reserved_of_type(instance, s, t)
                        .into_iter()
                        .all(|i| bt_reserved.contains(&i))
                })
            });
            let holds = same_selection && reserved_superset;
            (bt, or, holds)
        }
    };
    EquivalenceReport {
        pair,
        holds,
        mismatch: (!holds).then_some((left, right)),
    }
}

/// Report of the reserved-seat minimality check against the enumerated
/// open-first-verifiable choice set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinReservedReport {
    /// Reserved seats used by the open-first rule.
    pub baseline_reserved: BTreeSet<StudentId>,
    /// Reserved-set sizes across the enumerated verifiable selections,
    /// ascending.
    pub reserved_sizes: Vec<usize>,
    /// Every enumerated selection picks the same students as the open-first
    /// rule and reserves a superset of its reserved seats.
    pub holds: bool,
}

/// Asserts the open-first rule's reserved set is contained in the reserved
/// set of every open-first-verifiable selection on the same pool.
pub fn min_reserved_check(
    school: SchoolId,
    applicants: &BTreeSet<StudentId>,
    instance: &Instance,
) -> Result<MinReservedReport, OracleError> {
    let baseline = choice::open_first(school, applicants, instance);
    let verifiable = or_verifiable_choice_set(school, applicants, instance)?;
    let baseline_chosen = baseline.chosen();
    let baseline_reserved = baseline.reserved();
    let mut reserved_sizes: Vec<usize> = verifiable.iter().map(|c| c.reserved().len()).collect();
    reserved_sizes.sort_unstable();
    let holds = verifiable.iter().all(|c| {
        c.chosen() == baseline_chosen && baseline_reserved.is_subset(&c.reserved())
    });
    Ok(MinReservedReport {
        baseline_reserved,
        reserved_sizes,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::{RawInstance, RawSchool, RawStudent};

    #[test]
    fn enumeration_counts_trivial_cases() {
        // One student, one seat, no reserves: unmatched or the open seat.
        let raw = RawInstance {
            types: vec!["m1".into()],
            schools: vec![RawSchool {
                id: "s".into(),
                capacity: 1,
                reserves: Default::default(),
            }],
            students: vec![RawStudent {
                id: "i1".into(),
                ty: "m1".into(),
                scores: [("s".to_string(), 1u64)].into_iter().collect(),
            }],
        };
        let instance = raw.validate_structural().unwrap();
        let all = enumerate_matchings(&instance).unwrap();
        assert_eq!(all.len(), 2);

        // No students at all: just the empty matching.
        let raw = RawInstance {
            types: vec!["m1".into()],
            schools: vec![RawSchool {
                id: "s".into(),
                capacity: 1,
                reserves: Default::default(),
            }],
            students: vec![],
        };
        let instance = raw.validate_structural().unwrap();
        assert_eq!(enumerate_matchings(&instance).unwrap().len(), 1);
    }

    #[test]
    fn enumeration_guard_fires() {
        let instance = fixtures::ex5().instance();
        assert!(matches!(
            enumerate_matchings(&instance),
            Err(OracleError::EnumerationGuard { students: 10, .. })
        ));
    }

    #[test]
    fn stable_set_of_ex1_is_the_published_table_plus_the_all_open_labeling() {
        let fx = fixtures::ex1();
        let instance = fx.instance();
        let prefs = PreferenceProfile::uniform(&instance, &[SchoolId(0)]);
        let found = stable_set(&instance, &prefs).unwrap();
        let published = fixtures::ex1_stable_matchings(&instance);
        for m in &published {
            assert!(found.contains(m));
        }
        // The axioms admit one labeling beyond the published table: the same
        // top four students with the first type's reserve left unused. The
        // reserve binds nobody (every student of that type is admitted) and
        // the unmatched students outrank no one, so all four axioms hold.
        assert_eq!(found.len(), 6);
        let extra = found.iter().find(|m| !published.contains(m)).unwrap();
        let mut expected = AugmentedMatching::empty(&instance);
        for (name, seat) in [
            ("i1", SeatType::Open),
            ("i2", SeatType::Open),
            ("i3", SeatType::Open),
            ("i4", SeatType::Reserved),
        ] {
            expected.set(
                instance.find_student(name).unwrap(),
                Assignment::Matched {
                    school: SchoolId(0),
                    seat,
                },
            );
        }
        assert_eq!(*extra, expected);
    }

    #[test]
    fn stable_set_of_ex3_is_the_pair_plus_one_relabeling() {
        let fx = fixtures::ex3();
        let instance = fx.instance();
        let mut prefs = PreferenceProfile::uniform(&instance, &[]);
        for (name, list) in &fx.prefs {
            prefs.set(
                instance.find_student(name).unwrap(),
                PreferenceList::new(
                    list.iter()
                        .map(|s| instance.find_school(s).unwrap())
                        .collect(),
                )
                .unwrap(),
            );
        }
        let found = stable_set(&instance, &prefs).unwrap();
        let published = fixtures::ex3_stable_matchings(&instance);
        for m in &published {
            assert!(found.contains(m));
        }
        // Same phenomenon as the six-student market: the reserved-seat
        // matching also survives with the first school's reserve unused.
        assert_eq!(found.len(), 3);
        let extra = found.iter().find(|m| !published.contains(m)).unwrap();
        let mut expected = published[0].clone();
        let i1 = instance.find_student("i1").unwrap();
        expected.set(
            i1,
            Assignment::Matched {
                school: instance.find_school("s1").unwrap(),
                seat: SeatType::Open,
            },
        );
        assert_eq!(*extra, expected);
    }

    #[test]
    fn zero_capacity_school_leaves_only_the_empty_matching() {
        let raw = RawInstance {
            types: vec!["m1".into()],
            schools: vec![RawSchool {
                id: "s".into(),
                capacity: 0,
                reserves: Default::default(),
            }],
            students: vec![RawStudent {
                id: "i1".into(),
                ty: "m1".into(),
                scores: [("s".to_string(), 1u64)].into_iter().collect(),
            }],
        };
        let instance = raw.validate_structural().unwrap();
        let prefs = PreferenceProfile::uniform(&instance, &[SchoolId(0)]);
        let found = stable_set(&instance, &prefs).unwrap();
        assert_eq!(found, vec![AugmentedMatching::empty(&instance)]);
    }

    #[test]
    fn ex5_or_verifiable_choice_set_has_three_members() {
        let instance = fixtures::ex5().instance();
        let found =
            or_verifiable_choice_set(SchoolId(0), &instance.all_students(), &instance).unwrap();
        assert_eq!(found.len(), 3);
        let mut sizes: Vec<usize> = found.iter().map(|c| c.reserved().len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 3, 4]);
        let baseline = choice::open_first(SchoolId(0), &instance.all_students(), &instance);
        assert!(found.contains(&baseline));
        // The published alternatives: reserve also i9, or also i4 and i9.
        let ids = |names: &[&str]| -> BTreeSet<StudentId> {
            fixtures::students(&instance, names).into_iter().collect()
        };
        let reserved_sets: BTreeSet<BTreeSet<StudentId>> =
            found.iter().map(|c| c.reserved()).collect();
        assert!(reserved_sets.contains(&ids(&["i6", "i10"])));
        assert!(reserved_sets.contains(&ids(&["i9", "i6", "i10"])));
        assert!(reserved_sets.contains(&ids(&["i4", "i9", "i6", "i10"])));
    }

    #[test]
    fn small_pools_admit_exactly_one_or_verifiable_selection() {
        let instance = fixtures::ex5().instance();
        let pool: BTreeSet<StudentId> = fixtures::students(&instance, &["i1", "i7", "i10"])
            .into_iter()
            .collect();
        let found = or_verifiable_choice_set(SchoolId(0), &pool, &instance).unwrap();
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].reserved(), BTreeSet::new());
        assert_eq!(found[0].chosen(), pool);
    }

    #[test]
    fn ex4_or_verifiable_members_follow_the_minimal_rule() {
        let instance = fixtures::ex4().instance();
        let report =
            min_reserved_check(SchoolId(0), &instance.all_students(), &instance).unwrap();
        assert!(report.holds);
    }

    #[test]
    fn ro_verifiable_choice_set_is_the_reserve_first_singleton() {
        for fx in [fixtures::ex1(), fixtures::ex4()] {
            let instance = fx.instance();
            let found =
                ro_verifiable_choice_set(SchoolId(0), &instance.all_students(), &instance)
                    .unwrap();
            let expected =
                choice::reserve_first(SchoolId(0), &instance.all_students(), &instance);
            assert_eq!(found, vec![expected], "fixture {}", fx.id);
        }
    }

    #[test]
    fn choice_set_guard_fires() {
        let instance = fixtures::ex5().instance();
        let mut big = instance.all_students();
        for k in 10..13 {
            big.insert(StudentId(k));
        }
        assert!(matches!(
            or_verifiable_choice_set(SchoolId(0), &big, &instance),
            Err(OracleError::ChoiceSetGuard { size: 13, .. })
        ));
    }

    #[test]
    fn ordered_sublists_of_two_schools() {
        let lists = ordered_sublists(&[SchoolId(0), SchoolId(1)]);
        assert_eq!(lists.len(), 5);
    }

    #[test]
    fn min_reserved_on_ex5() {
        let instance = fixtures::ex5().instance();
        let report =
            min_reserved_check(SchoolId(0), &instance.all_students(), &instance).unwrap();
        assert!(report.holds);
        assert_eq!(report.reserved_sizes, vec![2, 3, 4]);
        assert_eq!(report.baseline_reserved.len(), 2);
    }

    #[test]
    fn min_reserved_trivial_when_capacity_covers_everyone() {
        let instance = fixtures::ex5().instance();
        let pool: BTreeSet<StudentId> = fixtures::students(&instance, &["i1", "i2"])
            .into_iter()
            .collect();
        let report = min_reserved_check(SchoolId(0), &pool, &instance).unwrap();
        assert!(report.holds);
        assert!(report.baseline_reserved.is_empty());
        assert_eq!(report.reserved_sizes, vec![0]);
    }

    #[test]
    fn equivalences_on_ex3() {
        let fx = fixtures::ex3();
        let instance = fx.instance();
        let mut prefs = PreferenceProfile::uniform(&instance, &[]);
        for (name, list) in &fx.prefs {
            prefs.set(
                instance.find_student(name).unwrap(),
                PreferenceList::new(
                    list.iter()
                        .map(|s| instance.find_school(s).unwrap())
                        .collect(),
                )
                .unwrap(),
            );
        }
        for pair in [
            EquivalencePair::FlexOpenFirst,
            EquivalencePair::FlexReserveFirst,
            EquivalencePair::BackwardTransferSelection,
        ] {
            let report = equivalence_check(&instance, &prefs, pair);
            assert!(report.holds, "{pair:?}: {:?}", report.mismatch);
        }
    }

    #[test]
    fn backward_transfer_equivalence_on_the_bt_market() {
        let fx = fixtures::ex_bt();
        let instance = fx.instance();
        let prefs = PreferenceProfile::uniform(&instance, &[SchoolId(0)]);
        let report =
            equivalence_check(&instance, &prefs, EquivalencePair::BackwardTransferSelection);
        assert!(report.holds);
        // The two sides differ as seat-typed matchings: transfers kept both
        // reserves, the open-first run used none.
        let bt = crate::engine::da_run(
            &instance,
            &prefs,
            &RulePerSchool::uniform(&instance, SchoolRule::BackwardTransfer),
        );
        let or = mechanisms::sim_or(&instance, &prefs).matching;
        assert_ne!(bt, or);
        let reserved: BTreeSet<StudentId> = instance
            .student_ids()
            .filter(|&i| bt.seat_of(i) == Some(SeatType::Reserved))
            .collect();
        assert_eq!(
            reserved,
            fixtures::students(&instance, &["i2", "i3"])
                .into_iter()
                .collect()
        );
    }

    #[test]
    fn sp_audit_finds_no_violation_for_one_stage_mechanisms_on_ex3() {
        let fx = fixtures::ex3();
        let instance = fx.instance();
        let mut prefs = PreferenceProfile::uniform(&instance, &[]);
        for (name, list) in &fx.prefs {
            prefs.set(
                instance.find_student(name).unwrap(),
                PreferenceList::new(
                    list.iter()
                        .map(|s| instance.find_school(s).unwrap())
                        .collect(),
                )
                .unwrap(),
            );
        }
        for id in [MechanismId::SimOr, MechanismId::SimRo] {
            let violations = strategyproofness_audit(id, &instance, &prefs).unwrap();
            assert!(violations.is_empty(), "{id}: {violations:?}");
        }
    }

    #[test]
    fn sp_audit_exposes_the_two_stage_manipulation_on_ex2() {
        let fx = fixtures::ex2();
        let instance = fx.instance();
        let s1 = instance.find_school("s1").unwrap();
        let s2 = instance.find_school("s2").unwrap();
        let prefs = PreferenceProfile::uniform(&instance, &[s1, s2]);
        let violations =
            strategyproofness_audit(MechanismId::SeqRo, &instance, &prefs).unwrap();
        let i2 = instance.find_student("i2").unwrap();
        assert!(violations.iter().any(|v| v.student == i2
            && v.truthful_school == Some(s2)
            && v.deviation_school == Some(s1)));
    }

    #[test]
    fn ne_guard_fires_on_oversized_spaces() {
        let fx = fixtures::ex2();
        let instance = fx.instance();
        let prefs = PreferenceProfile::uniform(
            &instance,
            &[
                instance.find_school("s1").unwrap(),
                instance.find_school("s2").unwrap(),
            ],
        );
        let lists = ordered_sublists(&instance.school_ids().collect::<Vec<_>>());
        let huge: Vec<SequentialPreferences> = lists
            .iter()
            .flat_map(|r| {
                lists.iter().map(move |o| SequentialPreferences {
                    reserve: r.clone(),
                    open: o.clone(),
                })
            })
            .collect();
        // Five students' worth of the 25-pair space on a 4-student market
        // would overflow the guard; emulate by inflating one student's set.
        let mut strategies = vec![huge.clone(); 4];
        strategies[0] = huge
            .iter()
            .cloned()
            .cycle()
            .take(huge.len() * huge.len())
            .collect();
        let space = StrategySpace::new(strategies);
        assert!(matches!(
            ne_outcomes(&instance, &prefs, MechanismId::SeqRo, &space, 1),
            Err(OracleError::ProfileGuard { .. })
        ));
    }
}
