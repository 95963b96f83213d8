//! End-to-end named mechanisms.
//!
//! Two-stage mechanisms take a pair of lists per student and allocate the two
//! seat categories across all schools in separate deferred-acceptance stages:
//! `seq-ro` fills reserves first and rolls unfilled reserve quota into the
//! open stage; `seq-or` fills open seats first and sets reserves aside, so
//! reserves unfilled in its second stage are wasted (no supplementary round
//! is run).
//!
//! One-stage mechanisms take a single list per student and differ only in the
//! school-side choice rule: `sim-ro`, `sim-oro` and `sim-or` run over school
//! lists; `sim-sep` and `sim-flex` run over explicit subschool lists.
//!
//! Every result carries the cutoffs recomputed from its final matching:
//! pooled for mechanisms whose vacancies are open to anyone, set-aside for
//! `seq-or`, and, by extrapolation, for `sim-sep`, whose reserves are also
//! held apart from the open quota.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::audit::{
    compute_cutoffs, CutoffMode, SequentialCutoffs, SequentialProfile,
};
use crate::choice::{ChoiceResult, SchoolRule};
use crate::engine::{
    da_run_with, DaTrace, RulePerSchool, SplitMode, SubschoolList, SubschoolProfile, SubschoolTrace,
};
use crate::model::{
    Assignment, AugmentedMatching, CutoffProfile, Instance, PreferenceList, PreferenceProfile,
    SchoolId, SeatType, StudentId,
};

/// Wire identifiers of the seven mechanisms, shared with the CLI and result
/// files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MechanismId {
    SeqRo,
    SeqOr,
    SimRo,
    SimOro,
    SimSep,
    SimFlex,
    SimOr,
}

impl MechanismId {
    pub const ALL: [MechanismId; 7] = [
        MechanismId::SeqRo,
        MechanismId::SeqOr,
        MechanismId::SimRo,
        MechanismId::SimOro,
        MechanismId::SimSep,
        MechanismId::SimFlex,
        MechanismId::SimOr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MechanismId::SeqRo => "seq-ro",
            MechanismId::SeqOr => "seq-or",
            MechanismId::SimRo => "sim-ro",
            MechanismId::SimOro => "sim-oro",
            MechanismId::SimSep => "sim-sep",
            MechanismId::SimFlex => "sim-flex",
            MechanismId::SimOr => "sim-or",
        }
    }

    pub fn is_sequential(self) -> bool {
        matches!(self, MechanismId::SeqRo | MechanismId::SeqOr)
    }

    pub fn is_subschool(self) -> bool {
        matches!(self, MechanismId::SimSep | MechanismId::SimFlex)
    }
}

impl fmt::Display for MechanismId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MechanismId {
    type Err = MechanismError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MechanismId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| MechanismError::UnknownMechanism(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MechanismError {
    #[error("unknown mechanism id {0:?}")]
    UnknownMechanism(String),
    #[error("preference input shape does not fit mechanism {0}")]
    InputShapeMismatch(MechanismId),
}

/// Cutoffs attached to a mechanism result: one profile for one-stage
/// mechanisms, a stage-tagged pair for two-stage ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MechanismCutoffs {
    Simultaneous(CutoffProfile),
    Sequential(SequentialCutoffs),
}

impl MechanismCutoffs {
    /// The combined per-school profile, whichever form is carried.
    pub fn profile(&self) -> CutoffProfile {
        match self {
            MechanismCutoffs::Simultaneous(p) => p.clone(),
            MechanismCutoffs::Sequential(s) => s.combined(),
        }
    }
}

/// A mechanism's output: the matching and the cutoffs recomputed from it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MechanismResult {
    pub mechanism: MechanismId,
    pub matching: AugmentedMatching,
    pub cutoffs: MechanismCutoffs,
}

/// Trace of a mechanism run, matching its stage structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MechanismTrace {
    Rounds(DaTrace),
    SubschoolRounds(SubschoolTrace),
    Stages { stage1: DaTrace, stage2: DaTrace },
}

/// Preference input for [`run`], one variant per mechanism family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MechanismInput {
    Simultaneous(PreferenceProfile),
    Sequential(SequentialProfile),
    Subschool(SubschoolProfile),
}

/// Runs any mechanism by id, checking the input shape.
pub fn run(
    id: MechanismId,
    instance: &Instance,
    input: &MechanismInput,
) -> Result<MechanismResult, MechanismError> {
    run_impl(id, instance, input, false).map(|(r, _)| r)
}

/// [`run`] with the trace retained.
pub fn run_traced(
    id: MechanismId,
    instance: &Instance,
    input: &MechanismInput,
) -> Result<(MechanismResult, MechanismTrace), MechanismError> {
    run_impl(id, instance, input, true).map(|(r, t)| (r, t.expect("trace was requested")))
}

fn run_impl(
    id: MechanismId,
    instance: &Instance,
    input: &MechanismInput,
    record: bool,
) -> Result<(MechanismResult, Option<MechanismTrace>), MechanismError> {
    match (id, input) {
        (MechanismId::SeqRo, MechanismInput::Sequential(prefs)) => {
            Ok(seq_stage_run(instance, prefs, SeatType::Reserved, record))
        }
        (MechanismId::SeqOr, MechanismInput::Sequential(prefs)) => {
            Ok(seq_stage_run(instance, prefs, SeatType::Open, record))
        }
        (MechanismId::SimRo, MechanismInput::Simultaneous(prefs)) => {
            Ok(sim_run(MechanismId::SimRo, instance, prefs, SchoolRule::ReserveFirst, record))
        }
        (MechanismId::SimOro, MechanismInput::Simultaneous(prefs)) => Ok(sim_run(
            MechanismId::SimOro,
            instance,
            prefs,
            SchoolRule::OpenReserveOpen,
            record,
        )),
        (MechanismId::SimOr, MechanismInput::Simultaneous(prefs)) => {
            Ok(sim_run(MechanismId::SimOr, instance, prefs, SchoolRule::OpenFirst, record))
        }
        (MechanismId::SimSep, MechanismInput::Subschool(prefs)) => {
            Ok(subschool_run(MechanismId::SimSep, instance, prefs, record))
        }
        (MechanismId::SimFlex, MechanismInput::Subschool(prefs)) => {
            Ok(subschool_run(MechanismId::SimFlex, instance, prefs, record))
        }
        _ => Err(MechanismError::InputShapeMismatch(id)),
    }
}

/// Reserve-then-open two-stage mechanism.
pub fn seq_ro(instance: &Instance, prefs: &SequentialProfile) -> MechanismResult {
    seq_stage_run(instance, prefs, SeatType::Reserved, false).0
}

/// Open-then-reserve two-stage mechanism.
pub fn seq_or(instance: &Instance, prefs: &SequentialProfile) -> MechanismResult {
    seq_stage_run(instance, prefs, SeatType::Open, false).0
}

/// One-stage mechanism with the reserves-first school rule.
pub fn sim_ro(instance: &Instance, prefs: &PreferenceProfile) -> MechanismResult {
    sim_run(MechanismId::SimRo, instance, prefs, SchoolRule::ReserveFirst, false).0
}

/// One-stage mechanism with the open-reserve-open school rule.
pub fn sim_oro(instance: &Instance, prefs: &PreferenceProfile) -> MechanismResult {
    sim_run(MechanismId::SimOro, instance, prefs, SchoolRule::OpenReserveOpen, false).0
}

/// One-stage mechanism with the open-first school rule.
pub fn sim_or(instance: &Instance, prefs: &PreferenceProfile) -> MechanismResult {
    sim_run(MechanismId::SimOr, instance, prefs, SchoolRule::OpenFirst, false).0
}

/// One-stage mechanism over subschool lists with quotas kept apart.
pub fn sim_sep(instance: &Instance, prefs: &SubschoolProfile) -> MechanismResult {
    subschool_run(MechanismId::SimSep, instance, prefs, false).0
}

/// One-stage mechanism over subschool lists with reserve-to-open conversion.
pub fn sim_flex(instance: &Instance, prefs: &SubschoolProfile) -> MechanismResult {
    subschool_run(MechanismId::SimFlex, instance, prefs, false).0
}

fn sim_run(
    id: MechanismId,
    instance: &Instance,
    prefs: &PreferenceProfile,
    rule: SchoolRule,
    record: bool,
) -> (MechanismResult, Option<MechanismTrace>) {
    let rules = RulePerSchool::uniform(instance, rule);
    let (matching, trace) = da_run_with(
        instance,
        prefs,
        |s, pool| rules.get(s).choose(s, pool, instance),
        record,
    );
    let cutoffs = compute_cutoffs(&matching, instance, CutoffMode::Pooled);
    (
        MechanismResult {
            mechanism: id,
            matching,
            cutoffs: MechanismCutoffs::Simultaneous(cutoffs),
        },
        trace.map(MechanismTrace::Rounds),
    )
}

fn subschool_run(
    id: MechanismId,
    instance: &Instance,
    prefs: &SubschoolProfile,
    record: bool,
) -> (MechanismResult, Option<MechanismTrace>) {
    let (mode, cutoff_mode) = match id {
        MechanismId::SimSep => (SplitMode::Separate, CutoffMode::SetAside),
        MechanismId::SimFlex => (SplitMode::Flexible, CutoffMode::Pooled),
        _ => unreachable!("subschool_run only drives the split mechanisms"),
    };
    let (matching, trace) = if record {
        let (m, t) = crate::engine::da_run_subschool_traced(instance, prefs, mode);
        (m, Some(MechanismTrace::SubschoolRounds(t)))
    } else {
        (crate::engine::da_run_subschool(instance, prefs, mode), None)
    };
    let cutoffs = compute_cutoffs(&matching, instance, cutoff_mode);
    (
        MechanismResult {
            mechanism: id,
            matching,
            cutoffs: MechanismCutoffs::Simultaneous(cutoffs),
        },
        trace,
    )
}

/// Selects each type's top applicants up to the school's reserve quota, all
/// on reserved seats. The stage rule for reserve stages.
fn reserve_stage_choice(
    school: SchoolId,
    pool: &BTreeSet<StudentId>,
    instance: &Instance,
) -> ChoiceResult {
    let split = crate::choice::SplitApplicants::new(BTreeSet::new(), pool.clone())
        .expect("one pool cannot overlap itself");
    crate::choice::flexible(school, &split, instance)
}

/// Selects the top applicants up to `quota`, all on open seats. The stage
/// rule for open stages.
fn open_stage_choice(
    school: SchoolId,
    pool: &BTreeSet<StudentId>,
    quota: u32,
    instance: &Instance,
) -> ChoiceResult {
    let mut seats = std::collections::BTreeMap::new();
    let mut sorted = instance.by_priority(school, pool);
    sorted.truncate(quota as usize);
    for i in sorted {
        seats.insert(i, SeatType::Open);
    }
    ChoiceResult { school, seats }
}

fn seq_stage_run(
    instance: &Instance,
    prefs: &SequentialProfile,
    first: SeatType,
    record: bool,
) -> (MechanismResult, Option<MechanismTrace>) {
    let reserve_lists = |participants: &dyn Fn(StudentId) -> bool| {
        PreferenceProfile::new(
            instance
                .student_ids()
                .map(|i| {
                    if participants(i) {
                        prefs.get(i).reserve.clone()
                    } else {
                        PreferenceList::empty()
                    }
                })
                .collect(),
        )
    };
    let open_lists = |participants: &dyn Fn(StudentId) -> bool| {
        PreferenceProfile::new(
            instance
                .student_ids()
                .map(|i| {
                    if participants(i) {
                        prefs.get(i).open.clone()
                    } else {
                        PreferenceList::empty()
                    }
                })
                .collect(),
        )
    };

    let (stage1, trace1) = match first {
        SeatType::Reserved => da_run_with(
            instance,
            &reserve_lists(&|_| true),
            |s, pool| reserve_stage_choice(s, pool, instance),
            record,
        ),
        SeatType::Open => da_run_with(
            instance,
            &open_lists(&|_| true),
            |s, pool| open_stage_choice(s, pool, instance.school(s).open_quota(), instance),
            record,
        ),
    };

    let unmatched_in_stage1 =
        |i: StudentId| -> bool { stage1.assignment(i) == Assignment::Unmatched };

    let (stage2, trace2) = match first {
        SeatType::Reserved => {
            // Unassigned reserve quota joins the open stage.
            let stage2_quota: Vec<u32> = instance
                .school_ids()
                .map(|s| instance.school(s).capacity - stage1.admitted(s).len() as u32)
                .collect();
            da_run_with(
                instance,
                &open_lists(&unmatched_in_stage1),
                |s, pool| open_stage_choice(s, pool, stage2_quota[s.idx()], instance),
                record,
            )
        }
        // Reserve quotas were set aside; whatever they fail to admit now is
        // wasted.
        SeatType::Open => da_run_with(
            instance,
            &reserve_lists(&unmatched_in_stage1),
            |s, pool| reserve_stage_choice(s, pool, instance),
            record,
        ),
    };

    let mut matching = stage1;
    for (i, a) in stage2.iter() {
        if let Assignment::Matched { .. } = a {
            matching.set(i, a);
        }
    }

    let (id, mode) = match first {
        SeatType::Reserved => (MechanismId::SeqRo, CutoffMode::Pooled),
        SeatType::Open => (MechanismId::SeqOr, CutoffMode::SetAside),
    };
    let profile = compute_cutoffs(&matching, instance, mode);
    let result = MechanismResult {
        mechanism: id,
        matching,
        cutoffs: MechanismCutoffs::Sequential(SequentialCutoffs::from_profile(&profile, first)),
    };
    let trace = match (trace1, trace2) {
        (Some(stage1), Some(stage2)) => Some(MechanismTrace::Stages { stage1, stage2 }),
        _ => None,
    };
    (result, trace)
}

/// Builds a subschool list from a school list: each school expands to its two
/// sides adjacently, the school order is preserved, and `first` picks which
/// side leads per school.
pub fn consistent_subschool_list(
    prefs: &PreferenceList,
    mut first: impl FnMut(SchoolId) -> SeatType,
) -> SubschoolList {
    let mut out = Vec::with_capacity(prefs.len() * 2);
    for &s in prefs.ranked() {
        let lead = first(s);
        let tail = match lead {
            SeatType::Open => SeatType::Reserved,
            SeatType::Reserved => SeatType::Open,
        };
        out.push((s, lead));
        out.push((s, tail));
    }
    out
}

/// Expands a whole profile through [`consistent_subschool_list`] with one
/// side leading everywhere.
pub fn consistent_profile(
    instance: &Instance,
    prefs: &PreferenceProfile,
    first: SeatType,
) -> SubschoolProfile {
    SubschoolProfile::new(
        instance
            .student_ids()
            .map(|i| consistent_subschool_list(prefs.get(i), |_| first))
            .collect(),
    )
    .expect("expanding a duplicate-free list keeps it duplicate-free")
}
