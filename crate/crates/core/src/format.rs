//! JSON interchange: instance files, the three preference-file shapes, and
//! result files with cutoffs, optional stage profiles, and optional traces.
//!
//! Matching entries serialize sorted by student id and unmatched students
//! carry null school and seat, so equal matchings produce byte-equal JSON.
//! Infinite cutoffs serialize as the string `"inf"` (JSON has no infinity
//! literal).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::audit::{SequentialCutoffs, SequentialPreferences, SequentialProfile};
use crate::engine::{SubschoolList, SubschoolProfile};
use crate::mechanisms::{MechanismCutoffs, MechanismId, MechanismResult, MechanismTrace};
use crate::model::{
    Assignment, AugmentedMatching, Cutoff, CutoffProfile, Instance, PreferenceList,
    PreferenceProfile, SchoolCutoffs, SeatType, StudentId,
};

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum FormatError {
    #[error("unknown student id {0:?}")]
    UnknownStudent(String),
    #[error("unknown school id {0:?}")]
    UnknownSchool(String),
    #[error("unknown type id {0:?}")]
    UnknownType(String),
    #[error("duplicate entry {0:?} in a preference list")]
    DuplicateEntry(String),
    #[error("subschool id {0:?} must look like `<school>.o` or `<school>.r`")]
    BadSubschoolId(String),
    #[error("student {0:?} listed twice in the matching")]
    DuplicateMatchEntry(String),
    #[error("matched student {0:?} has no seat type")]
    MissingSeat(String),
    #[error("result file carries no stage cutoffs")]
    MissingStages,
    #[error("stage cutoffs are not in first-stage-then-second order for {0}")]
    BadStageOrder(MechanismId),
    #[error("result file cutoffs do not cover school {0:?}")]
    MissingSchoolCutoffs(String),
    #[error(transparent)]
    Json(#[from] JsonError),
}

/// Wrapper keeping `serde_json::Error` comparable for tests.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct JsonError(#[from] pub serde_json::Error);

impl PartialEq for JsonError {
    fn eq(&self, other: &Self) -> bool {
        self.0.to_string() == other.0.to_string()
    }
}

impl Eq for JsonError {}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        FormatError::Json(JsonError(e))
    }
}

// ---------------------------------------------------------------------------
// Cutoff wire form
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CutoffWire {
    Finite(u64),
    Word(String),
}

impl Serialize for Cutoff {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Cutoff::Finite(v) => serializer.serialize_u64(*v),
            Cutoff::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Cutoff {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        match CutoffWire::deserialize(deserializer)? {
            CutoffWire::Finite(v) => Ok(Cutoff::Finite(v)),
            CutoffWire::Word(w) if w == "inf" => Ok(Cutoff::Infinite),
            CutoffWire::Word(w) => Err(serde::de::Error::custom(format!(
                "expected an integer or \"inf\", got {w:?}"
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// Preference files
// ---------------------------------------------------------------------------

/// Simultaneous shape: `{"student": ["school", ...]}`.
pub fn parse_simultaneous_prefs(
    json: &str,
    instance: &Instance,
) -> Result<PreferenceProfile, FormatError> {
    let raw: BTreeMap<String, Vec<String>> = serde_json::from_str(json)?;
    let mut profile =
        PreferenceProfile::new(vec![PreferenceList::empty(); instance.num_students()]);
    for (student, schools) in raw {
        let id = resolve_student(instance, &student)?;
        profile.set(id, school_list(instance, &schools)?);
    }
    Ok(profile)
}

/// Sequential shape: `{"student": {"reserve": [...], "open": [...]}}`.
pub fn parse_sequential_prefs(
    json: &str,
    instance: &Instance,
) -> Result<SequentialProfile, FormatError> {
    #[derive(Deserialize)]
    struct Entry {
        #[serde(default)]
        reserve: Vec<String>,
        #[serde(default)]
        open: Vec<String>,
    }
    let raw: BTreeMap<String, Entry> = serde_json::from_str(json)?;
    let mut profile = SequentialProfile::empty(instance);
    for (student, entry) in raw {
        let id = resolve_student(instance, &student)?;
        profile.set(
            id,
            SequentialPreferences {
                reserve: school_list(instance, &entry.reserve)?,
                open: school_list(instance, &entry.open)?,
            },
        );
    }
    Ok(profile)
}

/// Subschool shape: `{"student": ["s1.o", "s1.r", ...]}`.
pub fn parse_subschool_prefs(
    json: &str,
    instance: &Instance,
) -> Result<SubschoolProfile, FormatError> {
    let raw: BTreeMap<String, Vec<String>> = serde_json::from_str(json)?;
    let mut lists: Vec<SubschoolList> = vec![Vec::new(); instance.num_students()];
    for (student, entries) in raw {
        let id = resolve_student(instance, &student)?;
        let mut list = Vec::with_capacity(entries.len());
        for entry in &entries {
            let target = parse_subschool_id(instance, entry)?;
            if list.contains(&target) {
                return Err(FormatError::DuplicateEntry(entry.clone()));
            }
            list.push(target);
        }
        lists[id.idx()] = list;
    }
    SubschoolProfile::new(lists)
        .map_err(|_| FormatError::DuplicateEntry("subschool".to_string()))
}

/// Parses `<school>.o` / `<school>.r`.
pub fn parse_subschool_id(
    instance: &Instance,
    entry: &str,
) -> Result<(crate::model::SchoolId, SeatType), FormatError> {
    let (school, side) = entry
        .rsplit_once('.')
        .ok_or_else(|| FormatError::BadSubschoolId(entry.to_string()))?;
    let side = match side {
        "o" => SeatType::Open,
        "r" => SeatType::Reserved,
        _ => return Err(FormatError::BadSubschoolId(entry.to_string())),
    };
    let school = instance
        .find_school(school)
        .ok_or_else(|| FormatError::UnknownSchool(school.to_string()))?;
    Ok((school, side))
}

/// Formats one subschool target as `<school>.o` / `<school>.r`.
pub fn subschool_id(instance: &Instance, target: (crate::model::SchoolId, SeatType)) -> String {
    let side = match target.1 {
        SeatType::Open => "o",
        SeatType::Reserved => "r",
    };
    format!("{}.{}", instance.school(target.0).id, side)
}

fn resolve_student(instance: &Instance, id: &str) -> Result<StudentId, FormatError> {
    instance
        .find_student(id)
        .ok_or_else(|| FormatError::UnknownStudent(id.to_string()))
}

fn school_list(instance: &Instance, names: &[String]) -> Result<PreferenceList, FormatError> {
    let mut ranked = Vec::with_capacity(names.len());
    for name in names {
        let id = instance
            .find_school(name)
            .ok_or_else(|| FormatError::UnknownSchool(name.clone()))?;
        ranked.push(id);
    }
    PreferenceList::new(ranked).map_err(|_| {
        FormatError::DuplicateEntry(
            names
                .iter()
                .find(|n| names.iter().filter(|m| m == n).count() > 1)
                .cloned()
                .unwrap_or_default(),
        )
    })
}

/// Serializes a simultaneous profile back to its file shape.
pub fn simultaneous_prefs_to_value(
    prefs: &PreferenceProfile,
    instance: &Instance,
) -> serde_json::Value {
    let map: BTreeMap<String, Vec<String>> = instance
        .student_ids()
        .map(|i| {
            (
                instance.student(i).id.clone(),
                prefs
                    .get(i)
                    .ranked()
                    .iter()
                    .map(|&s| instance.school(s).id.clone())
                    .collect(),
            )
        })
        .collect();
    serde_json::to_value(map).expect("string maps always serialize")
}

// ---------------------------------------------------------------------------
// Result files
// ---------------------------------------------------------------------------

/// One student's line in a result file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchEntry {
    pub student: String,
    pub school: Option<String>,
    pub seat: Option<SeatType>,
}

/// Per-school cutoffs in a result file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchoolCutoffsFile {
    pub open: Cutoff,
    pub reserve: BTreeMap<String, Cutoff>,
}

/// One stage's disclosed cutoffs for a two-stage mechanism.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "allocates", content = "cutoffs", rename_all = "lowercase")]
pub enum StageFile {
    Reserved(BTreeMap<String, BTreeMap<String, Cutoff>>),
    Open(BTreeMap<String, Cutoff>),
}

/// A mechanism outcome on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultFile {
    pub mechanism: String,
    pub matching: Vec<MatchEntry>,
    pub cutoffs: BTreeMap<String, SchoolCutoffsFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<Vec<StageFile>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceFile>,
}

/// Round-by-round record, in the run's own structure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TraceFile {
    Rounds(Vec<TraceRoundFile>),
    Stages {
        stage1: Vec<TraceRoundFile>,
        stage2: Vec<TraceRoundFile>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRoundFile {
    pub round: usize,
    pub schools: BTreeMap<String, SchoolRoundFile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchoolRoundFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub applicants: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub open_applicants: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reserve_applicants: Option<Vec<String>>,
    pub admitted: Vec<AdmitEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdmitEntry {
    pub student: String,
    pub seat: SeatType,
}

/// Canonical matching entries: sorted by student id, unmatched students with
/// null school and seat.
pub fn matching_to_entries(matching: &AugmentedMatching, instance: &Instance) -> Vec<MatchEntry> {
    let mut entries: Vec<MatchEntry> = matching
        .iter()
        .map(|(i, a)| MatchEntry {
            student: instance.student(i).id.clone(),
            school: a.school().map(|s| instance.school(s).id.clone()),
            seat: a.seat(),
        })
        .collect();
    entries.sort_by(|a, b| a.student.cmp(&b.student));
    entries
}

/// Rebuilds a matching from file entries. Students absent from the entries
/// are unmatched; a matched entry must carry a seat.
pub fn entries_to_matching(
    entries: &[MatchEntry],
    instance: &Instance,
) -> Result<AugmentedMatching, FormatError> {
    let mut matching = AugmentedMatching::empty(instance);
    let mut seen = std::collections::BTreeSet::new();
    for entry in entries {
        let id = resolve_student(instance, &entry.student)?;
        if !seen.insert(id) {
            return Err(FormatError::DuplicateMatchEntry(entry.student.clone()));
        }
        match (&entry.school, entry.seat) {
            (Some(school), seat) => {
                let school = instance
                    .find_school(school)
                    .ok_or_else(|| FormatError::UnknownSchool(school.clone()))?;
                let seat = seat.ok_or_else(|| FormatError::MissingSeat(entry.student.clone()))?;
                matching.set(id, Assignment::Matched { school, seat });
            }
            (None, _) => matching.set(id, Assignment::Unmatched),
        }
    }
    Ok(matching)
}

/// Serializes a cutoff profile keyed by school and type ids. Every type
/// appears for every school; zero-quota reserves show as `"inf"`.
pub fn cutoffs_to_file(
    profile: &CutoffProfile,
    instance: &Instance,
) -> BTreeMap<String, SchoolCutoffsFile> {
    instance
        .school_ids()
        .map(|s| {
            (
                instance.school(s).id.clone(),
                SchoolCutoffsFile {
                    open: profile.open(s),
                    reserve: instance
                        .type_ids()
                        .map(|t| (instance.student_type(t).id.clone(), profile.reserve(s, t)))
                        .collect(),
                },
            )
        })
        .collect()
}

/// Rebuilds a cutoff profile from its file form. Missing type entries mean a
/// zero-quota reserve (infinite cutoff).
pub fn file_to_cutoffs(
    map: &BTreeMap<String, SchoolCutoffsFile>,
    instance: &Instance,
) -> Result<CutoffProfile, FormatError> {
    let schools = instance
        .school_ids()
        .map(|s| {
            let entry = map
                .get(&instance.school(s).id)
                .ok_or_else(|| FormatError::MissingSchoolCutoffs(instance.school(s).id.clone()))?;
            for ty in entry.reserve.keys() {
                if instance.find_type(ty).is_none() {
                    return Err(FormatError::UnknownType(ty.clone()));
                }
            }
            Ok(SchoolCutoffs {
                open: entry.open,
                reserve: instance
                    .type_ids()
                    .map(|t| {
                        entry
                            .reserve
                            .get(&instance.student_type(t).id)
                            .copied()
                            .unwrap_or(Cutoff::Infinite)
                    })
                    .collect(),
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(CutoffProfile { schools })
}

/// Serializes a full mechanism outcome, with its trace when given.
pub fn result_to_file(
    result: &MechanismResult,
    trace: Option<&MechanismTrace>,
    instance: &Instance,
) -> ResultFile {
    let stages = match &result.cutoffs {
        MechanismCutoffs::Sequential(stage) => Some(stage_files(stage, instance)),
        MechanismCutoffs::Simultaneous(_) => None,
    };
    ResultFile {
        mechanism: result.mechanism.as_str().to_string(),
        matching: matching_to_entries(&result.matching, instance),
        cutoffs: cutoffs_to_file(&result.cutoffs.profile(), instance),
        stages,
        trace: trace.map(|t| trace_to_file(t, instance)),
    }
}

fn stage_files(stage: &SequentialCutoffs, instance: &Instance) -> Vec<StageFile> {
    let reserve = StageFile::Reserved(
        instance
            .school_ids()
            .map(|s| {
                (
                    instance.school(s).id.clone(),
                    instance
                        .type_ids()
                        .map(|t| {
                            (
                                instance.student_type(t).id.clone(),
                                stage.reserve[s.idx()][t.idx()],
                            )
                        })
                        .collect(),
                )
            })
            .collect(),
    );
    let open = StageFile::Open(
        instance
            .school_ids()
            .map(|s| (instance.school(s).id.clone(), stage.open[s.idx()]))
            .collect(),
    );
    match stage.first {
        SeatType::Reserved => vec![reserve, open],
        SeatType::Open => vec![open, reserve],
    }
}

/// Rebuilds stage-tagged cutoffs from a result file for replay audits. The
/// stage order must match the mechanism.
pub fn file_to_sequential_cutoffs(
    file: &ResultFile,
    instance: &Instance,
    mechanism: MechanismId,
) -> Result<SequentialCutoffs, FormatError> {
    let stages = file.stages.as_ref().ok_or(FormatError::MissingStages)?;
    let expected_first = match mechanism {
        MechanismId::SeqRo => SeatType::Reserved,
        MechanismId::SeqOr => SeatType::Open,
        other => return Err(FormatError::BadStageOrder(other)),
    };
    let (reserve_map, open_map) = match (stages.first(), stages.get(1), expected_first) {
        (Some(StageFile::Reserved(r)), Some(StageFile::Open(o)), SeatType::Reserved)
        | (Some(StageFile::Open(o)), Some(StageFile::Reserved(r)), SeatType::Open) => (r, o),
        _ => return Err(FormatError::BadStageOrder(mechanism)),
    };
    let reserve = instance
        .school_ids()
        .map(|s| {
            let school_id = &instance.school(s).id;
            let per_type = reserve_map
                .get(school_id)
                .ok_or_else(|| FormatError::MissingSchoolCutoffs(school_id.clone()))?;
            Ok(instance
                .type_ids()
                .map(|t| {
                    per_type
                        .get(&instance.student_type(t).id)
                        .copied()
                        .unwrap_or(Cutoff::Infinite)
                })
                .collect())
        })
        .collect::<Result<_, FormatError>>()?;
    let open = instance
        .school_ids()
        .map(|s| {
            let school_id = &instance.school(s).id;
            open_map
                .get(school_id)
                .copied()
                .ok_or_else(|| FormatError::MissingSchoolCutoffs(school_id.clone()))
        })
        .collect::<Result<_, FormatError>>()?;
    Ok(SequentialCutoffs {
        reserve,
        open,
        first: expected_first,
    })
}

fn trace_to_file(trace: &MechanismTrace, instance: &Instance) -> TraceFile {
    let names = |set: &std::collections::BTreeSet<StudentId>| -> Vec<String> {
        set.iter().map(|&i| instance.student(i).id.clone()).collect()
    };
    let admitted = |result: &crate::choice::ChoiceResult| -> Vec<AdmitEntry> {
        result
            .seats
            .iter()
            .map(|(&i, &seat)| AdmitEntry {
                student: instance.student(i).id.clone(),
                seat,
            })
            .collect()
    };
    let school_rounds = |rounds: &crate::engine::DaTrace| -> Vec<TraceRoundFile> {
        rounds
            .rounds
            .iter()
            .enumerate()
            .map(|(k, round)| TraceRoundFile {
                round: k + 1,
                schools: round
                    .pools
                    .iter()
                    .map(|(&s, pool)| {
                        (
                            instance.school(s).id.clone(),
                            SchoolRoundFile {
                                applicants: Some(names(pool)),
                                open_applicants: None,
                                reserve_applicants: None,
                                admitted: admitted(&round.results[&s]),
                            },
                        )
                    })
                    .collect(),
            })
            .collect()
    };
    match trace {
        MechanismTrace::Rounds(rounds) => TraceFile::Rounds(school_rounds(rounds)),
        MechanismTrace::Stages { stage1, stage2 } => TraceFile::Stages {
            stage1: school_rounds(stage1),
            stage2: school_rounds(stage2),
        },
        MechanismTrace::SubschoolRounds(rounds) => TraceFile::Rounds(
            rounds
                .rounds
                .iter()
                .enumerate()
                .map(|(k, round)| {
                    let schools: std::collections::BTreeSet<_> = round
                        .open_pools
                        .keys()
                        .chain(round.reserve_pools.keys())
                        .copied()
                        .collect();
                    TraceRoundFile {
                        round: k + 1,
                        schools: schools
                            .into_iter()
                            .map(|s| {
                                (
                                    instance.school(s).id.clone(),
                                    SchoolRoundFile {
                                        applicants: None,
                                        open_applicants: round.open_pools.get(&s).map(&names),
                                        reserve_applicants: round
                                            .reserve_pools
                                            .get(&s)
                                            .map(&names),
                                        admitted: admitted(&round.results[&s]),
                                    },
                                )
                            })
                            .collect(),
                    }
                })
                .collect(),
        ),
    }
}
