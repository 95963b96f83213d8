//! Domain model: students, schools, reserve quotas, seat-typed matchings, and
//! the shared primitives (affordability, best-affordable school, projection to
//! a standard matching) every other module builds on.
//!
//! All types are immutable after construction and all operations are pure, so
//! everything here is safe to share across threads.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// Priority score a student holds at a school. Scores are compared only by
/// order; any strictly order-preserving integer encoding of a priority ranking
/// gives the same results.
pub type Score = u64;

macro_rules! index_newtype {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u32);

        impl $name {
            pub fn idx(self) -> usize {
                self.0 as usize
            }
        }
    };
}

index_newtype!(
    /// Index of a student within its [`Instance`].
    StudentId
);
index_newtype!(
    /// Index of a school within its [`Instance`].
    SchoolId
);
index_newtype!(
    /// Index of a student type within its [`Instance`].
    TypeId
);

/// Whether a seat counts against a type-specific reserve quota or against the
/// school's general (open) quota.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeatType {
    Reserved,
    Open,
}

/// A cutoff score for a seat category at a school. `Infinite` marks a
/// category nobody can enter (a reserve with zero quota); every finite score
/// fails against it. The derived ordering places `Infinite` above every
/// finite value, so `min` and comparisons behave like extended integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cutoff {
    Finite(Score),
    Infinite,
}

impl Cutoff {
    pub const ZERO: Cutoff = Cutoff::Finite(0);

    /// Does a score meet this cutoff? Nothing meets `Infinite`.
    pub fn met_by(self, score: Score) -> bool {
        match self {
            Cutoff::Finite(c) => score >= c,
            Cutoff::Infinite => false,
        }
    }
}

impl fmt::Display for Cutoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cutoff::Finite(c) => write!(f, "{c}"),
            Cutoff::Infinite => write!(f, "inf"),
        }
    }
}

/// Published cutoffs for one school: one open-seat cutoff plus one reserve
/// cutoff per student type. A reserve cutoff is `Infinite` exactly when the
/// school has no reserve for that type. The null school is not stored; it is
/// affordable to everyone by convention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchoolCutoffs {
    pub open: Cutoff,
    /// Indexed by `TypeId`.
    pub reserve: Vec<Cutoff>,
}

/// Cutoffs for every school in an instance, indexed by `SchoolId`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CutoffProfile {
    pub schools: Vec<SchoolCutoffs>,
}

impl CutoffProfile {
    pub fn open(&self, school: SchoolId) -> Cutoff {
        self.schools[school.idx()].open
    }

    pub fn reserve(&self, school: SchoolId, ty: TypeId) -> Cutoff {
        self.schools[school.idx()].reserve[ty.idx()]
    }

    /// The relevant cutoff for one student at one school: the lower of her
    /// type's reserve cutoff and the open cutoff.
    pub fn effective(&self, school: SchoolId, ty: TypeId) -> Cutoff {
        self.reserve(school, ty).min(self.open(school))
    }
}

/// A strict ranking of acceptable schools. Schools absent from the list are
/// unacceptable (ranked below staying unmatched).
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct PreferenceList {
    ranked: Vec<SchoolId>,
}

impl PreferenceList {
    /// Builds a list, rejecting duplicates.
    pub fn new(ranked: Vec<SchoolId>) -> Result<Self, PreferenceError> {
        let mut seen = BTreeSet::new();
        for &s in &ranked {
            if !seen.insert(s) {
                return Err(PreferenceError::DuplicateSchool(s));
            }
        }
        Ok(PreferenceList { ranked })
    }

    pub fn empty() -> Self {
        PreferenceList::default()
    }

    pub fn ranked(&self) -> &[SchoolId] {
        &self.ranked
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn accepts(&self, school: SchoolId) -> bool {
        self.ranked.contains(&school)
    }

    /// Rank of an assignment for utility comparisons: position in the list
    /// for acceptable schools, `len` for staying unmatched, `len + 1` for any
    /// unacceptable school. Lower is better.
    pub fn rank(&self, assigned: Option<SchoolId>) -> usize {
        match assigned {
            Some(s) => self
                .ranked
                .iter()
                .position(|&t| t == s)
                .unwrap_or(self.ranked.len() + 1),
            None => self.ranked.len(),
        }
    }

    /// Does this list strictly prefer `a` over `b`?
    pub fn prefers(&self, a: Option<SchoolId>, b: Option<SchoolId>) -> bool {
        self.rank(a) < self.rank(b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PreferenceError {
    #[error("school listed twice in one preference list")]
    DuplicateSchool(SchoolId),
}

/// One preference list per student, indexed by `StudentId`. Students without
/// an entry rank every school unacceptable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreferenceProfile {
    lists: Vec<PreferenceList>,
}

impl PreferenceProfile {
    pub fn new(lists: Vec<PreferenceList>) -> Self {
        PreferenceProfile { lists }
    }

    /// Every student ranks exactly the given schools, in the given order.
    pub fn uniform(instance: &Instance, ranked: &[SchoolId]) -> Self {
        let list = PreferenceList::new(ranked.to_vec()).expect("duplicate school in uniform list");
        PreferenceProfile {
            lists: vec![list; instance.num_students()],
        }
    }

    pub fn get(&self, student: StudentId) -> &PreferenceList {
        &self.lists[student.idx()]
    }

    pub fn set(&mut self, student: StudentId, list: PreferenceList) {
        self.lists[student.idx()] = list;
    }

    pub fn lists(&self) -> &[PreferenceList] {
        &self.lists
    }
}

/// Where one student ended up: unmatched, or holding a seat of a given type
/// at a school. Unmatched students carry no seat type, which makes matching
/// equality ignore the irrelevant placeholder automatically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Assignment {
    Unmatched,
    Matched { school: SchoolId, seat: SeatType },
}

impl Assignment {
    pub fn school(self) -> Option<SchoolId> {
        match self {
            Assignment::Matched { school, .. } => Some(school),
            Assignment::Unmatched => None,
        }
    }

    pub fn seat(self) -> Option<SeatType> {
        match self {
            Assignment::Matched { seat, .. } => Some(seat),
            Assignment::Unmatched => None,
        }
    }
}

/// A seat-typed matching: every student is either unmatched or holds an open
/// or reserved seat at one school. Capacity and per-type reserve caps are
/// checked by [`AugmentedMatching::check`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AugmentedMatching {
    assignments: Vec<Assignment>,
}

impl AugmentedMatching {
    pub fn new(assignments: Vec<Assignment>) -> Self {
        AugmentedMatching { assignments }
    }

    pub fn empty(instance: &Instance) -> Self {
        AugmentedMatching {
            assignments: vec![Assignment::Unmatched; instance.num_students()],
        }
    }

    pub fn assignment(&self, student: StudentId) -> Assignment {
        self.assignments[student.idx()]
    }

    pub fn school_of(&self, student: StudentId) -> Option<SchoolId> {
        self.assignment(student).school()
    }

    pub fn seat_of(&self, student: StudentId) -> Option<SeatType> {
        self.assignment(student).seat()
    }

    pub fn set(&mut self, student: StudentId, assignment: Assignment) {
        self.assignments[student.idx()] = assignment;
    }

    pub fn iter(&self) -> impl Iterator<Item = (StudentId, Assignment)> + '_ {
        self.assignments
            .iter()
            .enumerate()
            .map(|(i, &a)| (StudentId(i as u32), a))
    }

    /// Students admitted to `school`, any seat type.
    pub fn admitted(&self, school: SchoolId) -> Vec<StudentId> {
        self.iter()
            .filter(|(_, a)| a.school() == Some(school))
            .map(|(i, _)| i)
            .collect()
    }

    /// Students on reserved seats at `school` whose own type is `ty`.
    pub fn reserved_of_type(
        &self,
        instance: &Instance,
        school: SchoolId,
        ty: TypeId,
    ) -> Vec<StudentId> {
        self.iter()
            .filter(|&(i, a)| {
                a == Assignment::Matched {
                    school,
                    seat: SeatType::Reserved,
                } && instance.student(i).ty == ty
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// Verifies the capacity and per-type reserve conditions against an
    /// instance.
    pub fn check(&self, instance: &Instance) -> Result<(), MatchingViolation> {
        debug_assert_eq!(self.assignments.len(), instance.num_students());
        for school in instance.school_ids() {
            let admitted = self.admitted(school);
            if admitted.len() > instance.school(school).capacity as usize {
                return Err(MatchingViolation::CapacityExceeded { school });
            }
            let mut reserved_per_type = vec![0u32; instance.num_types()];
            for &i in &admitted {
                if self.seat_of(i) == Some(SeatType::Reserved) {
                    reserved_per_type[instance.student(i).ty.idx()] += 1;
                }
            }
            for ty in instance.type_ids() {
                if reserved_per_type[ty.idx()] > instance.school(school).reserve(ty) {
                    return Err(MatchingViolation::ReserveExceeded { school, ty });
                }
            }
        }
        Ok(())
    }

    /// Erases seat types: per-school admitted sets plus the unmatched set.
    pub fn to_standard(&self, instance: &Instance) -> StandardMatching {
        let mut schools = vec![BTreeSet::new(); instance.num_schools()];
        let mut unmatched = BTreeSet::new();
        for (i, a) in self.iter() {
            match a.school() {
                Some(s) => {
                    schools[s.idx()].insert(i);
                }
                None => {
                    unmatched.insert(i);
                }
            }
        }
        StandardMatching { schools, unmatched }
    }

    pub fn num_students(&self) -> usize {
        self.assignments.len()
    }
}

/// A matching with seat types erased.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StandardMatching {
    /// Indexed by `SchoolId`.
    pub schools: Vec<BTreeSet<StudentId>>,
    pub unmatched: BTreeSet<StudentId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MatchingViolation {
    #[error("school capacity exceeded")]
    CapacityExceeded { school: SchoolId },
    #[error("per-type reserved seat count exceeds the reserve quota")]
    ReserveExceeded { school: SchoolId, ty: TypeId },
}

#[derive(Debug, Clone)]
pub struct Student {
    pub id: String,
    pub ty: TypeId,
    /// Indexed by `SchoolId`.
    pub scores: Vec<Score>,
}

impl Student {
    pub fn score(&self, school: SchoolId) -> Score {
        self.scores[school.idx()]
    }
}

#[derive(Debug, Clone)]
pub struct School {
    pub id: String,
    pub capacity: u32,
    /// Reserve quota per student type, indexed by `TypeId`.
    pub reserves: Vec<u32>,
}

impl School {
    pub fn reserve(&self, ty: TypeId) -> u32 {
        self.reserves[ty.idx()]
    }

    pub fn total_reserve(&self) -> u32 {
        self.reserves.iter().sum()
    }

    /// Seats not committed to any reserve.
    pub fn open_quota(&self) -> u32 {
        self.capacity.saturating_sub(self.total_reserve())
    }
}

#[derive(Debug, Clone)]
pub struct StudentType {
    pub id: String,
}

/// A validated market: student types, students with per-school scores, and
/// schools with capacities and per-type reserve quotas. Construct through
/// [`RawInstance::validate`] (full model assumptions) or
/// [`RawInstance::validate_structural`] (well-formedness only).
#[derive(Debug, Clone)]
pub struct Instance {
    types: Vec<StudentType>,
    students: Vec<Student>,
    schools: Vec<School>,
}

impl Instance {
    pub fn num_students(&self) -> usize {
        self.students.len()
    }

    pub fn num_schools(&self) -> usize {
        self.schools.len()
    }

    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn student(&self, id: StudentId) -> &Student {
        &self.students[id.idx()]
    }

    pub fn school(&self, id: SchoolId) -> &School {
        &self.schools[id.idx()]
    }

    pub fn student_type(&self, id: TypeId) -> &StudentType {
        &self.types[id.idx()]
    }

    pub fn student_ids(&self) -> impl Iterator<Item = StudentId> {
        (0..self.students.len() as u32).map(StudentId)
    }

    pub fn school_ids(&self) -> impl Iterator<Item = SchoolId> {
        (0..self.schools.len() as u32).map(SchoolId)
    }

    pub fn type_ids(&self) -> impl Iterator<Item = TypeId> {
        (0..self.types.len() as u32).map(TypeId)
    }

    pub fn all_students(&self) -> BTreeSet<StudentId> {
        self.student_ids().collect()
    }

    pub fn find_student(&self, id: &str) -> Option<StudentId> {
        self.students
            .iter()
            .position(|s| s.id == id)
            .map(|i| StudentId(i as u32))
    }

    pub fn find_school(&self, id: &str) -> Option<SchoolId> {
        self.schools
            .iter()
            .position(|s| s.id == id)
            .map(|i| SchoolId(i as u32))
    }

    pub fn find_type(&self, id: &str) -> Option<TypeId> {
        self.types
            .iter()
            .position(|t| t.id == id)
            .map(|i| TypeId(i as u32))
    }

    /// Students of one type.
    pub fn students_of_type(&self, ty: TypeId) -> Vec<StudentId> {
        self.student_ids()
            .filter(|&i| self.student(i).ty == ty)
            .collect()
    }

    /// Sorts student ids by descending score at `school`.
    pub fn by_priority(&self, school: SchoolId, students: &BTreeSet<StudentId>) -> Vec<StudentId> {
        let mut v: Vec<StudentId> = students.iter().copied().collect();
        v.sort_by_key(|&i| std::cmp::Reverse(self.student(i).score(school)));
        v
    }

    /// The set of schools affordable to a student under published cutoffs: a
    /// school is affordable when her score meets the lower of her type's
    /// reserve cutoff and the open cutoff there. Staying unmatched is always
    /// affordable and is not listed.
    pub fn affordable_set(
        &self,
        student: StudentId,
        cutoffs: &CutoffProfile,
    ) -> BTreeSet<SchoolId> {
        let ty = self.student(student).ty;
        self.school_ids()
            .filter(|&s| {
                cutoffs
                    .effective(s, ty)
                    .met_by(self.student(student).score(s))
            })
            .collect()
    }

    /// Builds the one-school market a choice rule faces: the given school and
    /// the applicants, who all rank exactly that school.
    pub fn single_school_economy(
        &self,
        school: SchoolId,
        applicants: &BTreeSet<StudentId>,
    ) -> SingleSchoolEconomy {
        let members: Vec<StudentId> = applicants.iter().copied().collect();
        let students = members
            .iter()
            .map(|&i| {
                let s = self.student(i);
                Student {
                    id: s.id.clone(),
                    ty: s.ty,
                    scores: vec![s.score(school)],
                }
            })
            .collect();
        let economy = Instance {
            types: self.types.clone(),
            students,
            schools: vec![School {
                id: self.school(school).id.clone(),
                capacity: self.school(school).capacity,
                reserves: self.school(school).reserves.clone(),
            }],
        };
        let prefs = PreferenceProfile::uniform(&economy, &[SchoolId(0)]);
        SingleSchoolEconomy {
            economy,
            prefs,
            members,
        }
    }
}

/// Highest-ranked acceptable school within an affordable set; `None` when no
/// acceptable school is affordable.
pub fn best_affordable(
    prefs: &PreferenceList,
    affordable: &BTreeSet<SchoolId>,
) -> Option<SchoolId> {
    prefs
        .ranked()
        .iter()
        .copied()
        .find(|s| affordable.contains(s))
}

/// A one-school artificial market derived from a parent instance.
pub struct SingleSchoolEconomy {
    pub economy: Instance,
    /// Everyone ranks the single school.
    pub prefs: PreferenceProfile,
    /// Parent-instance id of each economy student, indexed by the economy's
    /// `StudentId`.
    pub members: Vec<StudentId>,
}

impl SingleSchoolEconomy {
    /// Translates a parent-indexed (student, seat) selection into a matching
    /// over the economy: selected students hold their seats, the remaining
    /// applicants are unmatched.
    pub fn matching_from_selection(
        &self,
        selection: &BTreeMap<StudentId, SeatType>,
    ) -> AugmentedMatching {
        let assignments = self
            .members
            .iter()
            .map(|parent| match selection.get(parent) {
                Some(&seat) => Assignment::Matched {
                    school: SchoolId(0),
                    seat,
                },
                None => Assignment::Unmatched,
            })
            .collect();
        AugmentedMatching::new(assignments)
    }
}

// ---------------------------------------------------------------------------
// Raw data and validation
// ---------------------------------------------------------------------------

/// Unvalidated instance data, as read from an instance file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawInstance {
    pub types: Vec<String>,
    pub schools: Vec<RawSchool>,
    pub students: Vec<RawStudent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSchool {
    pub id: String,
    pub capacity: u32,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub reserves: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawStudent {
    pub id: String,
    #[serde(rename = "type")]
    pub ty: String,
    pub scores: BTreeMap<String, Score>,
}

/// One violated invariant found while validating raw instance data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ValidationError {
    #[error("duplicate type id {id:?}")]
    DuplicateType { id: String },
    #[error("duplicate school id {id:?}")]
    DuplicateSchool { id: String },
    #[error("duplicate student id {id:?}")]
    DuplicateStudent { id: String },
    #[error("school id {id:?} is empty or contains '.'")]
    BadSchoolId { id: String },
    #[error("student {student:?} references unknown type {ty:?}")]
    UnknownType { student: String, ty: String },
    #[error("school {school:?} reserves seats for unknown type {ty:?}")]
    UnknownReserveType { school: String, ty: String },
    #[error("student {student:?} scores unknown school {school:?}")]
    UnknownScoreSchool { student: String, school: String },
    #[error("student {student:?} has no score at school {school:?}")]
    MissingScore { student: String, school: String },
    #[error("tied scores at school {school:?} between {a:?} and {b:?}")]
    TiedScores { school: String, a: String, b: String },
    #[error("reserves at school {school:?} exceed its capacity")]
    ReservesExceedCapacity { school: String },
    #[error("school {school:?} leaves no open seat after reserves")]
    NoOpenSeat { school: String },
    #[error("reserve quota not below type size: school {school:?}, type {ty:?}")]
    ReserveNotBelowTypeSize { school: String, ty: String },
    #[error("instance has no students")]
    NoStudents,
    #[error("instance has no schools")]
    NoSchools,
}

/// The complete list of invariants an instance violates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("invalid instance: {}", errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
pub struct ValidationReport {
    pub errors: Vec<ValidationError>,
}

/// How much of the model to enforce. `Structural` accepts any well-formed
/// market the algorithms can run on; `Full` additionally enforces the
/// assumptions the theory is stated under (at least one open seat per school,
/// each positive reserve strictly below its type's population, nonempty
/// instance).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strictness {
    Structural,
    Full,
}

impl RawInstance {
    /// Validates against the full model assumptions. Returns the instance or
    /// the complete list of violated invariants.
    pub fn validate(&self) -> Result<Instance, ValidationReport> {
        self.build(Strictness::Full)
    }

    /// Validates well-formedness only: unique and resolvable ids, one score
    /// per school with no ties, reserves fitting within capacity. Boundary
    /// markets (zero open quota, reserves matching type sizes) are accepted.
    pub fn validate_structural(&self) -> Result<Instance, ValidationReport> {
        self.build(Strictness::Structural)
    }

    fn build(&self, strictness: Strictness) -> Result<Instance, ValidationReport> {
        let mut errors = Vec::new();

        if strictness == Strictness::Full {
            if self.students.is_empty() {
                errors.push(ValidationError::NoStudents);
            }
            if self.schools.is_empty() {
                errors.push(ValidationError::NoSchools);
            }
        }

        let mut type_index: BTreeMap<&str, TypeId> = BTreeMap::new();
        for (k, id) in self.types.iter().enumerate() {
            if type_index.insert(id, TypeId(k as u32)).is_some() {
                errors.push(ValidationError::DuplicateType { id: id.clone() });
            }
        }
        let mut school_index: BTreeMap<&str, SchoolId> = BTreeMap::new();
        for (k, school) in self.schools.iter().enumerate() {
            if school_index
                .insert(&school.id, SchoolId(k as u32))
                .is_some()
            {
                errors.push(ValidationError::DuplicateSchool {
                    id: school.id.clone(),
                });
            }
            // Dots are reserved for subschool naming (`s.o` / `s.r`).
            if school.id.contains('.') || school.id.is_empty() {
                errors.push(ValidationError::BadSchoolId {
                    id: school.id.clone(),
                });
            }
        }
        let mut student_index: BTreeMap<&str, StudentId> = BTreeMap::new();
        for (k, student) in self.students.iter().enumerate() {
            if student_index
                .insert(&student.id, StudentId(k as u32))
                .is_some()
            {
                errors.push(ValidationError::DuplicateStudent {
                    id: student.id.clone(),
                });
            }
        }

        // Cross-references.
        let mut type_sizes = vec![0usize; self.types.len()];
        for student in &self.students {
            match type_index.get(student.ty.as_str()) {
                Some(ty) => type_sizes[ty.idx()] += 1,
                None => errors.push(ValidationError::UnknownType {
                    student: student.id.clone(),
                    ty: student.ty.clone(),
                }),
            }
            for school in student.scores.keys() {
                if !school_index.contains_key(school.as_str()) {
                    errors.push(ValidationError::UnknownScoreSchool {
                        student: student.id.clone(),
                        school: school.clone(),
                    });
                }
            }
            for school in &self.schools {
                if !student.scores.contains_key(&school.id) {
                    errors.push(ValidationError::MissingScore {
                        student: student.id.clone(),
                        school: school.id.clone(),
                    });
                }
            }
        }

        for school in &self.schools {
            let mut total = 0u64;
            for (ty, &quota) in &school.reserves {
                total += u64::from(quota);
                match type_index.get(ty.as_str()) {
                    Some(t) => {
                        if strictness == Strictness::Full
                            && quota > 0
                            && u64::from(quota) >= type_sizes[t.idx()] as u64
                        {
                            errors.push(ValidationError::ReserveNotBelowTypeSize {
                                school: school.id.clone(),
                                ty: ty.clone(),
                            });
                        }
                    }
                    None => errors.push(ValidationError::UnknownReserveType {
                        school: school.id.clone(),
                        ty: ty.clone(),
                    }),
                }
            }
            if total > u64::from(school.capacity) {
                errors.push(ValidationError::ReservesExceedCapacity {
                    school: school.id.clone(),
                });
            } else if strictness == Strictness::Full && total == u64::from(school.capacity) {
                errors.push(ValidationError::NoOpenSeat {
                    school: school.id.clone(),
                });
            }
        }

        // Strict priorities within each school.
        for school in &self.schools {
            let mut seen: BTreeMap<Score, &str> = BTreeMap::new();
            for student in &self.students {
                if let Some(&score) = student.scores.get(&school.id) {
                    if let Some(other) = seen.insert(score, &student.id) {
                        errors.push(ValidationError::TiedScores {
                            school: school.id.clone(),
                            a: other.to_string(),
                            b: student.id.clone(),
                        });
                    }
                }
            }
        }

        if !errors.is_empty() {
            return Err(ValidationReport { errors });
        }

        let types = self
            .types
            .iter()
            .map(|id| StudentType { id: id.clone() })
            .collect();
        let schools: Vec<School> = self
            .schools
            .iter()
            .map(|s| {
                let mut reserves = vec![0u32; self.types.len()];
                for (ty, &quota) in &s.reserves {
                    reserves[type_index[ty.as_str()].idx()] = quota;
                }
                School {
                    id: s.id.clone(),
                    capacity: s.capacity,
                    reserves,
                }
            })
            .collect();
        let students = self
            .students
            .iter()
            .map(|st| Student {
                id: st.id.clone(),
                ty: type_index[st.ty.as_str()],
                scores: self.schools.iter().map(|sc| st.scores[&sc.id]).collect(),
            })
            .collect();

        Ok(Instance {
            types,
            students,
            schools,
        })
    }
}
