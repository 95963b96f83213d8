//! Auditors: cutoff computation, the stability axioms with witnesses, the two
//! seat-type verification rules for one-stage outcomes, and the stage replay
//! check for two-stage outcomes.
//!
//! Every check emits witnesses, not just booleans; these are diagnostic tools.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{
    best_affordable, AugmentedMatching, Cutoff, CutoffProfile, Instance, PreferenceProfile,
    SchoolCutoffs, SchoolId, SeatType, StudentId,
};

/// Which convention fills the open-seat cutoff.
///
/// Under `Pooled`, any vacancy at a school counts as an open vacancy (unfilled
/// reserves convert to open seats), so the open cutoff drops to zero unless
/// the school is completely full. Under `SetAside`, reserves are held apart:
/// the open cutoff tracks only the open quota itself.
///
/// Reserve cutoffs are the same under both: the lowest score on a full
/// reserve, zero on an unfilled positive reserve, infinite where the quota is
/// zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutoffMode {
    Pooled,
    SetAside,
}

/// Computes the published cutoff profile of a matching.
pub fn compute_cutoffs(
    matching: &AugmentedMatching,
    instance: &Instance,
    mode: CutoffMode,
) -> CutoffProfile {
    let schools = instance
        .school_ids()
        .map(|s| school_cutoffs(matching, instance, s, mode))
        .collect();
    CutoffProfile { schools }
}

fn school_cutoffs(
    matching: &AugmentedMatching,
    instance: &Instance,
    school: SchoolId,
    mode: CutoffMode,
) -> SchoolCutoffs {
    let admitted = matching.admitted(school);
    let open_scores: Vec<u64> = admitted
        .iter()
        .filter(|&&i| matching.seat_of(i) == Some(SeatType::Open))
        .map(|&i| instance.student(i).score(school))
        .collect();

    let open_full = match mode {
        CutoffMode::Pooled => admitted.len() as u64 >= u64::from(instance.school(school).capacity),
        CutoffMode::SetAside => {
            open_scores.len() as u64 >= u64::from(instance.school(school).open_quota())
        }
    };
    let open = if open_full {
        // A full category with no open occupant admits nobody over it.
        match open_scores.iter().min() {
            Some(&min) => Cutoff::Finite(min),
            None => Cutoff::Infinite,
        }
    } else {
        Cutoff::ZERO
    };

    let reserve = instance
        .type_ids()
        .map(|ty| {
            let quota = instance.school(school).reserve(ty);
            if quota == 0 {
                return Cutoff::Infinite;
            }
            let holders = matching.reserved_of_type(instance, school, ty);
            if holders.len() as u64 >= u64::from(quota) {
                Cutoff::Finite(
                    holders
                        .iter()
                        .map(|&i| instance.student(i).score(school))
                        .min()
                        .expect("full reserve has at least one holder"),
                )
            } else {
                Cutoff::ZERO
            }
        })
        .collect();

    SchoolCutoffs { open, reserve }
}

/// One justified-envy witness: `envier` prefers `envied`'s school, outranks
/// her there, and either shares her type or `envied` holds an open seat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct EnvyWitness {
    pub envier: StudentId,
    pub envied: StudentId,
    pub school: SchoolId,
}

/// Outcome of the four stability axioms, with witnesses for each failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilityReport {
    /// Students assigned to a school they did not list.
    pub unacceptable: Vec<StudentId>,
    /// (student, school) pairs where the preferred school has an empty seat.
    pub waste: Vec<(StudentId, SchoolId)>,
    /// (student, school) pairs where the preferred school has an unfilled
    /// reserve for the student's own type.
    pub reserve_waste: Vec<(StudentId, SchoolId)>,
    pub justified_envy: Vec<EnvyWitness>,
}

impl StabilityReport {
    pub fn individually_rational(&self) -> bool {
        self.unacceptable.is_empty()
    }

    pub fn non_wasteful(&self) -> bool {
        self.waste.is_empty()
    }

    pub fn reserve_non_wasteful(&self) -> bool {
        self.reserve_waste.is_empty()
    }

    pub fn envy_free(&self) -> bool {
        self.justified_envy.is_empty()
    }

    pub fn is_stable(&self) -> bool {
        self.individually_rational()
            && self.non_wasteful()
            && self.reserve_non_wasteful()
            && self.envy_free()
    }
}

/// Runs all four stability axioms against a matching and the preferences it
/// is judged by.
pub fn stability_report(
    matching: &AugmentedMatching,
    prefs: &PreferenceProfile,
    instance: &Instance,
) -> StabilityReport {
    let mut report = StabilityReport {
        unacceptable: Vec::new(),
        waste: Vec::new(),
        reserve_waste: Vec::new(),
        justified_envy: Vec::new(),
    };

    let fill: Vec<usize> = instance
        .school_ids()
        .map(|s| matching.admitted(s).len())
        .collect();
    let reserve_fill: Vec<Vec<usize>> = instance
        .school_ids()
        .map(|s| {
            instance
                .type_ids()
                .map(|t| matching.reserved_of_type(instance, s, t).len())
                .collect()
        })
        .collect();

    for i in instance.student_ids() {
        let assigned = matching.school_of(i);
        let list = prefs.get(i);
        if let Some(s) = assigned {
            if !list.accepts(s) {
                report.unacceptable.push(i);
            }
        }
        let ty = instance.student(i).ty;
        for &s in list.ranked() {
            if !list.prefers(Some(s), assigned) {
                continue;
            }
            if fill[s.idx()] < instance.school(s).capacity as usize {
                report.waste.push((i, s));
            }
            if reserve_fill[s.idx()][ty.idx()] < instance.school(s).reserve(ty) as usize {
                report.reserve_waste.push((i, s));
            }
        }
    }

    for i in instance.student_ids() {
        let list = prefs.get(i);
        for j in instance.student_ids() {
            if i == j {
                continue;
            }
            let (s, seat_j) = match matching.assignment(j) {
                crate::model::Assignment::Matched { school, seat } => (school, seat),
                crate::model::Assignment::Unmatched => continue,
            };
            if !list.prefers(Some(s), matching.school_of(i)) {
                continue;
            }
            let outranks = instance.student(i).score(s) > instance.student(j).score(s);
            let protected = seat_j == SeatType::Reserved
                && instance.student(i).ty != instance.student(j).ty;
            if outranks && !protected {
                report.justified_envy.push(EnvyWitness {
                    envier: i,
                    envied: j,
                    school: s,
                });
            }
        }
    }

    report
}

/// Which seat-type verification rule a verdict was produced under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerificationRule {
    /// Reserved seats verified first: a matched student holds a reserved seat
    /// exactly when her score meets her type's reserve cutoff at her school.
    ReservedFirst,
    /// Open seats verified first: a matched student holds an open seat
    /// exactly when her score meets the open cutoff at her school.
    OpenFirst,
    /// Two-stage replay (see [`verify_sequential`]).
    Sequential,
}

/// Per-student outcome of a verification audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StudentVerdict {
    /// Assigned school equals the best affordable (or submitted-rule) school.
    pub school_ok: bool,
    /// Seat type matches what the rule dictates.
    pub seat_ok: bool,
}

impl StudentVerdict {
    pub fn ok(&self) -> bool {
        self.school_ok && self.seat_ok
    }
}

/// Full audit outcome: one verdict per student.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerificationVerdict {
    pub rule: VerificationRule,
    /// Indexed by `StudentId`.
    pub students: Vec<StudentVerdict>,
}

impl VerificationVerdict {
    pub fn passed(&self) -> bool {
        self.students.iter().all(|v| v.ok())
    }

    pub fn failing_students(&self) -> Vec<StudentId> {
        self.students
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.ok())
            .map(|(i, _)| StudentId(i as u32))
            .collect()
    }

    pub fn seat_failures(&self) -> Vec<StudentId> {
        self.students
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.seat_ok)
            .map(|(i, _)| StudentId(i as u32))
            .collect()
    }
}

/// Audits a matching under the reserved-first verification rule: every
/// student must sit at her best affordable school (pooled cutoffs), and a
/// matched student holds a reserved seat exactly when her score meets her
/// type's reserve cutoff there.
pub fn is_ro_verifiable(
    matching: &AugmentedMatching,
    prefs: &PreferenceProfile,
    instance: &Instance,
) -> VerificationVerdict {
    verify_simultaneous(matching, prefs, instance, VerificationRule::ReservedFirst)
}

/// Audits a matching under the open-first verification rule: every student
/// must sit at her best affordable school (pooled cutoffs), and a matched
/// student holds an open seat exactly when her score meets the open cutoff
/// there.
pub fn is_or_verifiable(
    matching: &AugmentedMatching,
    prefs: &PreferenceProfile,
    instance: &Instance,
) -> VerificationVerdict {
    verify_simultaneous(matching, prefs, instance, VerificationRule::OpenFirst)
}

fn verify_simultaneous(
    matching: &AugmentedMatching,
    prefs: &PreferenceProfile,
    instance: &Instance,
    rule: VerificationRule,
) -> VerificationVerdict {
    let cutoffs = compute_cutoffs(matching, instance, CutoffMode::Pooled);
    let students = instance
        .student_ids()
        .map(|i| {
            let affordable = instance.affordable_set(i, &cutoffs);
            let expected = best_affordable(prefs.get(i), &affordable);
            let assigned = matching.school_of(i);
            let school_ok = assigned == expected;
            let seat_ok = match matching.assignment(i) {
                crate::model::Assignment::Unmatched => true,
                crate::model::Assignment::Matched { school, seat } => {
                    let score = instance.student(i).score(school);
                    let expected_seat = match rule {
                        VerificationRule::ReservedFirst => {
                            let c = cutoffs.reserve(school, instance.student(i).ty);
                            if c.met_by(score) {
                                SeatType::Reserved
                            } else {
                                SeatType::Open
                            }
                        }
                        VerificationRule::OpenFirst => {
                            if cutoffs.open(school).met_by(score) {
                                SeatType::Open
                            } else {
                                SeatType::Reserved
                            }
                        }
                        VerificationRule::Sequential => unreachable!(),
                    };
                    seat == expected_seat
                }
            };
            StudentVerdict { school_ok, seat_ok }
        })
        .collect();
    VerificationVerdict { rule, students }
}

/// Stage-tagged cutoffs published by a two-stage mechanism. The reserve map
/// and open map come from the combined final matching; `first` records which
/// stage ran first and therefore which map a student consults first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequentialCutoffs {
    /// Reserve cutoffs per school and type (the reserve stage's disclosure).
    pub reserve: Vec<Vec<Cutoff>>,
    /// Open cutoffs per school (the open stage's disclosure).
    pub open: Vec<Cutoff>,
    /// Seat category allocated in stage 1.
    pub first: SeatType,
}

impl SequentialCutoffs {
    /// Splits a combined profile into the stage-tagged form.
    pub fn from_profile(profile: &CutoffProfile, first: SeatType) -> Self {
        SequentialCutoffs {
            reserve: profile.schools.iter().map(|s| s.reserve.clone()).collect(),
            open: profile.schools.iter().map(|s| s.open).collect(),
            first,
        }
    }

    /// Reassembles the combined per-school profile.
    pub fn combined(&self) -> CutoffProfile {
        CutoffProfile {
            schools: self
                .open
                .iter()
                .zip(&self.reserve)
                .map(|(&open, reserve)| SchoolCutoffs {
                    open,
                    reserve: reserve.clone(),
                })
                .collect(),
        }
    }
}

/// A per-student pair of stage lists for two-stage mechanisms.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct SequentialPreferences {
    pub reserve: crate::model::PreferenceList,
    pub open: crate::model::PreferenceList,
}

/// One `SequentialPreferences` per student, indexed by `StudentId`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequentialProfile {
    pairs: Vec<SequentialPreferences>,
}

impl SequentialProfile {
    pub fn new(pairs: Vec<SequentialPreferences>) -> Self {
        SequentialProfile { pairs }
    }

    pub fn empty(instance: &Instance) -> Self {
        SequentialProfile {
            pairs: vec![SequentialPreferences::default(); instance.num_students()],
        }
    }

    pub fn get(&self, student: StudentId) -> &SequentialPreferences {
        &self.pairs[student.idx()]
    }

    pub fn set(&mut self, student: StudentId, pair: SequentialPreferences) {
        self.pairs[student.idx()] = pair;
    }

    pub fn pairs(&self) -> &[SequentialPreferences] {
        &self.pairs
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AuditError {
    #[error("stage cutoffs were produced by the other two-stage mechanism")]
    StageOrderMismatch,
    #[error("not a two-stage mechanism id")]
    NotSequential,
}

/// Replays the student-side verification rule for a two-stage outcome.
///
/// With the reserve stage first: a student who clears some acceptable
/// school's reserve cutoff (for her type, from her stage-1 list) must hold a
/// reserved seat at the best such school; otherwise she consults the open
/// cutoffs with her stage-2 list; otherwise she must be unmatched. With the
/// open stage first the two checks swap.
pub fn verify_sequential(
    matching: &AugmentedMatching,
    cutoffs: &SequentialCutoffs,
    seq_prefs: &SequentialProfile,
    instance: &Instance,
    first: SeatType,
) -> Result<VerificationVerdict, AuditError> {
    if cutoffs.first != first {
        return Err(AuditError::StageOrderMismatch);
    }
    let students = instance
        .student_ids()
        .map(|i| {
            let ty = instance.student(i).ty;
            let pair = seq_prefs.get(i);
            let reserve_eligible: BTreeSet<SchoolId> = pair
                .reserve
                .ranked()
                .iter()
                .copied()
                .filter(|&s| {
                    cutoffs.reserve[s.idx()][ty.idx()].met_by(instance.student(i).score(s))
                })
                .collect();
            let open_eligible: BTreeSet<SchoolId> = pair
                .open
                .ranked()
                .iter()
                .copied()
                .filter(|&s| cutoffs.open[s.idx()].met_by(instance.student(i).score(s)))
                .collect();

            let stages = match first {
                SeatType::Reserved => [
                    (SeatType::Reserved, &pair.reserve, &reserve_eligible),
                    (SeatType::Open, &pair.open, &open_eligible),
                ],
                SeatType::Open => [
                    (SeatType::Open, &pair.open, &open_eligible),
                    (SeatType::Reserved, &pair.reserve, &reserve_eligible),
                ],
            };

            let mut expected: Option<(SchoolId, SeatType)> = None;
            for (seat, list, eligible) in stages {
                if let Some(s) = best_affordable(list, eligible) {
                    expected = Some((s, seat));
                    break;
                }
            }

            let (school_ok, seat_ok) = match (matching.assignment(i), expected) {
                (crate::model::Assignment::Unmatched, None) => (true, true),
                (crate::model::Assignment::Matched { school, seat }, Some((es, et))) => {
                    (school == es, seat == et)
                }
                (crate::model::Assignment::Unmatched, Some(_)) => (false, true),
                (crate::model::Assignment::Matched { .. }, None) => (false, false),
            };
            StudentVerdict { school_ok, seat_ok }
        })
        .collect();
    Ok(VerificationVerdict {
        rule: VerificationRule::Sequential,
        students,
    })
}
