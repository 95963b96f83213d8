//! Single-school augmented choice rules.
//!
//! A rule selects students from an applicant pool and labels each selected
//! seat reserved or open. The rules here differ in the order they work
//! through the seat categories:
//!
//! - [`reserve_first`]: fill each type's reserve from the top, then all
//!   remaining seats as open seats (the rule behind the `sim-ro` mechanism).
//! - [`open_reserve_open`]: fill the open quota, then the reserves, then
//!   convert unfilled reserves to open seats (`sim-oro`).
//! - [`separate`] / [`flexible`]: split-pool rules where one side applies for
//!   open seats and the other for reserved seats; `separate` keeps the two
//!   quotas apart, `flexible` lets unfilled reserves become open seats.
//! - [`subschool_da`]: the fixed point of the within-school deferred
//!   acceptance over the two seat sides, with each round evaluated by
//!   [`flexible`].
//! - [`open_first`]: `subschool_da` with everyone starting on the open side
//!   (`sim-or`); seats turn reserved only when necessary.
//! - [`precedence`]: fill an exogenously ordered seat list one seat at a time.
//! - [`backward_transfer`]: iterate the open-then-reserve fill, moving
//!   unfilled reserve quota into the open quota between passes.

use std::collections::{BTreeMap, BTreeSet};

use crate::audit::{is_or_verifiable, is_ro_verifiable, stability_report};
use crate::model::{Instance, SchoolId, SeatType, StudentId, TypeId};

/// Selection made by a choice rule at one school: the chosen students and the
/// type of seat each occupies.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ChoiceResult {
    pub school: SchoolId,
    pub seats: BTreeMap<StudentId, SeatType>,
}

impl ChoiceResult {
    fn new(school: SchoolId) -> Self {
        ChoiceResult {
            school,
            seats: BTreeMap::new(),
        }
    }

    /// All chosen students.
    pub fn chosen(&self) -> BTreeSet<StudentId> {
        self.seats.keys().copied().collect()
    }

    /// Chosen students holding reserved seats.
    pub fn reserved(&self) -> BTreeSet<StudentId> {
        self.of_seat(SeatType::Reserved)
    }

    /// Chosen students holding open seats.
    pub fn open(&self) -> BTreeSet<StudentId> {
        self.of_seat(SeatType::Open)
    }

    fn of_seat(&self, seat: SeatType) -> BTreeSet<StudentId> {
        self.seats
            .iter()
            .filter(|&(_, &t)| t == seat)
            .map(|(&i, _)| i)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.seats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seats.is_empty()
    }
}

/// A disjoint pair of applicant pools for the split rules: `open_side`
/// applies for open seats, `reserve_side` for reserved seats.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitApplicants {
    open_side: BTreeSet<StudentId>,
    reserve_side: BTreeSet<StudentId>,
}

impl SplitApplicants {
    pub fn new(
        open_side: BTreeSet<StudentId>,
        reserve_side: BTreeSet<StudentId>,
    ) -> Result<Self, ChoiceError> {
        if open_side.intersection(&reserve_side).next().is_some() {
            return Err(ChoiceError::OverlappingSplit);
        }
        Ok(SplitApplicants {
            open_side,
            reserve_side,
        })
    }

    pub fn open_side(&self) -> &BTreeSet<StudentId> {
        &self.open_side
    }

    pub fn reserve_side(&self) -> &BTreeSet<StudentId> {
        &self.reserve_side
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChoiceError {
    #[error("split applicant pools overlap")]
    OverlappingSplit,
    #[error("seat precedence does not match the school's quotas")]
    PrecedenceQuotaMismatch,
    #[error("property check universe has {size} students, above the limit of {limit}")]
    UniverseTooLarge { size: usize, limit: usize },
}

fn top_by_priority(
    instance: &Instance,
    school: SchoolId,
    pool: &BTreeSet<StudentId>,
    count: usize,
) -> Vec<StudentId> {
    let mut sorted = instance.by_priority(school, pool);
    sorted.truncate(count);
    sorted
}

fn of_type(instance: &Instance, pool: &BTreeSet<StudentId>, ty: TypeId) -> BTreeSet<StudentId> {
    pool.iter()
        .copied()
        .filter(|&i| instance.student(i).ty == ty)
        .collect()
}

/// Reserves first: for each type, the top applicants of that type fill its
/// reserve; every remaining seat is then an open seat for the best remaining
/// applicants regardless of type.
pub fn reserve_first(
    school: SchoolId,
    applicants: &BTreeSet<StudentId>,
    instance: &Instance,
) -> ChoiceResult {
    let mut result = ChoiceResult::new(school);
    let mut remaining = applicants.clone();
    for ty in instance.type_ids() {
        let quota = instance.school(school).reserve(ty) as usize;
        for i in top_by_priority(instance, school, &of_type(instance, &remaining, ty), quota) {
            result.seats.insert(i, SeatType::Reserved);
            remaining.remove(&i);
        }
    }
    let spots = (instance.school(school).capacity as usize).saturating_sub(result.len());
    for i in top_by_priority(instance, school, &remaining, spots) {
        result.seats.insert(i, SeatType::Open);
    }
    result
}

/// Open quota first, then each type's reserve from the remainder, then any
/// unfilled reserves convert to open seats for the best remaining applicants.
pub fn open_reserve_open(
    school: SchoolId,
    applicants: &BTreeSet<StudentId>,
    instance: &Instance,
) -> ChoiceResult {
    let mut result = ChoiceResult::new(school);
    let mut remaining = applicants.clone();
    for i in top_by_priority(
        instance,
        school,
        &remaining,
        instance.school(school).open_quota() as usize,
    ) {
        result.seats.insert(i, SeatType::Open);
        remaining.remove(&i);
    }
    for ty in instance.type_ids() {
        let quota = instance.school(school).reserve(ty) as usize;
        for i in top_by_priority(instance, school, &of_type(instance, &remaining, ty), quota) {
            result.seats.insert(i, SeatType::Reserved);
            remaining.remove(&i);
        }
    }
    let spots = (instance.school(school).capacity as usize).saturating_sub(result.len());
    for i in top_by_priority(instance, school, &remaining, spots) {
        result.seats.insert(i, SeatType::Open);
    }
    result
}

/// Split rule with the two quotas kept apart: the open side competes for the
/// open quota only, the reserve side for the per-type reserves only. Unfilled
/// reserved seats stay empty.
pub fn separate(
    school: SchoolId,
    split: &SplitApplicants,
    instance: &Instance,
) -> ChoiceResult {
    let mut result = ChoiceResult::new(school);
    for i in top_by_priority(
        instance,
        school,
        split.open_side(),
        instance.school(school).open_quota() as usize,
    ) {
        result.seats.insert(i, SeatType::Open);
    }
    for ty in instance.type_ids() {
        let quota = instance.school(school).reserve(ty) as usize;
        for i in top_by_priority(
            instance,
            school,
            &of_type(instance, split.reserve_side(), ty),
            quota,
        ) {
            result.seats.insert(i, SeatType::Reserved);
        }
    }
    result
}

/// Split rule with conversion: each type's reserve fills from the reserve
/// side, then every seat still empty goes to the open side as an open seat.
pub fn flexible(
    school: SchoolId,
    split: &SplitApplicants,
    instance: &Instance,
) -> ChoiceResult {
    let mut result = ChoiceResult::new(school);
    for ty in instance.type_ids() {
        let quota = instance.school(school).reserve(ty) as usize;
        for i in top_by_priority(
            instance,
            school,
            &of_type(instance, split.reserve_side(), ty),
            quota,
        ) {
            result.seats.insert(i, SeatType::Reserved);
        }
    }
    let spots = (instance.school(school).capacity as usize).saturating_sub(result.len());
    for i in top_by_priority(instance, school, split.open_side(), spots) {
        result.seats.insert(i, SeatType::Open);
    }
    result
}

/// The fixed point of within-school deferred acceptance over the two seat
/// sides: open-side students propose to open seats then reserved seats,
/// reserve-side students the other way around, and each round is evaluated by
/// [`flexible`]. The rounds are batch-synchronous, so the result is
/// deterministic and independent of applicant order.
pub fn subschool_da(
    school: SchoolId,
    split: &SplitApplicants,
    instance: &Instance,
) -> ChoiceResult {
    // Proposal order per student: the side she starts on, then the other.
    let order = |i: StudentId| -> [SeatType; 2] {
        if split.open_side().contains(&i) {
            [SeatType::Open, SeatType::Reserved]
        } else {
            [SeatType::Reserved, SeatType::Open]
        }
    };
    let applicants: Vec<StudentId> = split
        .open_side()
        .iter()
        .chain(split.reserve_side().iter())
        .copied()
        .collect();
    let mut position: BTreeMap<StudentId, usize> = applicants.iter().map(|&i| (i, 0)).collect();
    let mut held: BTreeMap<StudentId, SeatType> = BTreeMap::new();

    loop {
        if applicants
            .iter()
            .all(|i| held.contains_key(i) || position[i] >= 2)
        {
            break;
        }
        let mut pool_open = BTreeSet::new();
        let mut pool_reserve = BTreeSet::new();
        for &i in &applicants {
            let side = match held.get(&i) {
                Some(&side) => side,
                None if position[&i] < 2 => order(i)[position[&i]],
                None => continue,
            };
            match side {
                SeatType::Open => pool_open.insert(i),
                SeatType::Reserved => pool_reserve.insert(i),
            };
        }
        let round_split = SplitApplicants {
            open_side: pool_open.clone(),
            reserve_side: pool_reserve.clone(),
        };
        let result = flexible(school, &round_split, instance);
        let chosen = result.chosen();
        for i in pool_open.union(&pool_reserve) {
            if !chosen.contains(i) {
                held.remove(i);
                *position.get_mut(i).unwrap() += 1;
            }
        }
        held = result.seats;
    }

    ChoiceResult {
        school,
        seats: held,
    }
}

/// Every applicant starts on the open side: students take open seats before
/// reserved ones and seats turn reserved only when needed. Defined as
/// [`subschool_da`] with an empty reserve side.
pub fn open_first(
    school: SchoolId,
    applicants: &BTreeSet<StudentId>,
    instance: &Instance,
) -> ChoiceResult {
    let split = SplitApplicants {
        open_side: applicants.clone(),
        reserve_side: BTreeSet::new(),
    };
    subschool_da(school, &split, instance)
}

/// One seat in a precedence order: open, or designated for one type's
/// reserve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeatLabel {
    Open,
    Reserved(TypeId),
}

/// An exogenous fill order over a school's seats. Label counts must match the
/// school's quotas exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrecedenceSpec {
    order: Vec<SeatLabel>,
}

impl PrecedenceSpec {
    pub fn new(
        order: Vec<SeatLabel>,
        school: SchoolId,
        instance: &Instance,
    ) -> Result<Self, ChoiceError> {
        let sch = instance.school(school);
        if order.len() != sch.capacity as usize {
            return Err(ChoiceError::PrecedenceQuotaMismatch);
        }
        let open_count = order.iter().filter(|l| matches!(l, SeatLabel::Open)).count();
        if open_count != sch.open_quota() as usize {
            return Err(ChoiceError::PrecedenceQuotaMismatch);
        }
        for ty in instance.type_ids() {
            let count = order
                .iter()
                .filter(|l| matches!(l, SeatLabel::Reserved(t) if *t == ty))
                .count();
            if count != sch.reserve(ty) as usize {
                return Err(ChoiceError::PrecedenceQuotaMismatch);
            }
        }
        Ok(PrecedenceSpec { order })
    }

    pub fn order(&self) -> &[SeatLabel] {
        &self.order
    }
}

/// Fills seats one by one in precedence order. An open seat takes the best
/// remaining applicant outright. A seat designated for a type uses the
/// promoted order (that type's applicants first, then everyone else, each
/// side by score); when it lands on an applicant of another type it is
/// recorded as an open seat.
pub fn precedence(
    school: SchoolId,
    spec: &PrecedenceSpec,
    applicants: &BTreeSet<StudentId>,
    instance: &Instance,
) -> ChoiceResult {
    let mut result = ChoiceResult::new(school);
    let mut remaining = applicants.clone();
    for &label in spec.order() {
        if remaining.is_empty() {
            break;
        }
        let pick = match label {
            SeatLabel::Open => top_by_priority(instance, school, &remaining, 1)[0],
            SeatLabel::Reserved(ty) => {
                let members = of_type(instance, &remaining, ty);
                if members.is_empty() {
                    top_by_priority(instance, school, &remaining, 1)[0]
                } else {
                    top_by_priority(instance, school, &members, 1)[0]
                }
            }
        };
        let seat = match label {
            SeatLabel::Reserved(ty) if instance.student(pick).ty == ty => SeatType::Reserved,
            _ => SeatType::Open,
        };
        result.seats.insert(pick, seat);
        remaining.remove(&pick);
    }
    result
}

/// Iterated open-then-reserve fill: run the open quota, then each type's
/// reserve; while some reserve stays unfilled and applicants remain rejected,
/// move the unfilled quota into the open quota and restart the fill. Selects
/// the same students as [`open_first`] but never de-reserves a seat it
/// managed to fill.
pub fn backward_transfer(
    school: SchoolId,
    applicants: &BTreeSet<StudentId>,
    instance: &Instance,
) -> ChoiceResult {
    let mut open_quota = instance.school(school).open_quota() as usize;
    let mut reserve_quota: Vec<usize> = instance
        .school(school)
        .reserves
        .iter()
        .map(|&q| q as usize)
        .collect();

    loop {
        let mut result = ChoiceResult::new(school);
        let mut remaining = applicants.clone();
        for i in top_by_priority(instance, school, &remaining, open_quota) {
            result.seats.insert(i, SeatType::Open);
            remaining.remove(&i);
        }
        let mut unfilled = 0usize;
        for ty in instance.type_ids() {
            let quota = reserve_quota[ty.idx()];
            let taken = top_by_priority(instance, school, &of_type(instance, &remaining, ty), quota);
            unfilled += quota - taken.len();
            reserve_quota[ty.idx()] = taken.len();
            for i in taken {
                result.seats.insert(i, SeatType::Reserved);
                remaining.remove(&i);
            }
        }
        if unfilled == 0 || remaining.is_empty() {
            return result;
        }
        open_quota += unfilled;
    }
}

/// The applicant-pool rules, as selectable configuration for the engine and
/// the property checker. Split rules are driven through the subschool engine
/// instead.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchoolRule {
    ReserveFirst,
    OpenReserveOpen,
    OpenFirst,
    BackwardTransfer,
    Precedence(PrecedenceSpec),
}

impl SchoolRule {
    pub fn choose(
        &self,
        school: SchoolId,
        applicants: &BTreeSet<StudentId>,
        instance: &Instance,
    ) -> ChoiceResult {
        match self {
            SchoolRule::ReserveFirst => reserve_first(school, applicants, instance),
            SchoolRule::OpenReserveOpen => open_reserve_open(school, applicants, instance),
            SchoolRule::OpenFirst => open_first(school, applicants, instance),
            SchoolRule::BackwardTransfer => backward_transfer(school, applicants, instance),
            SchoolRule::Precedence(spec) => precedence(school, spec, applicants, instance),
        }
    }
}

/// Outcome of one exhaustively checked property.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropertyOutcome {
    Holds,
    /// The property fails on this applicant set.
    Fails { witness: BTreeSet<StudentId> },
}

impl PropertyOutcome {
    pub fn holds(&self) -> bool {
        matches!(self, PropertyOutcome::Holds)
    }
}

/// Exhaustive single-school property report for a choice rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChoicePropertyReport {
    pub substitutable: PropertyOutcome,
    pub q_acceptant: PropertyOutcome,
    pub stable: PropertyOutcome,
    pub ro_verifiable: PropertyOutcome,
    pub or_verifiable: PropertyOutcome,
}

/// Hard limit for exhaustive subset enumeration. Larger universes are an
/// error: these checkers are oracles, never samplers.
pub const PROPERTY_UNIVERSE_LIMIT: usize = 12;

/// Checks substitutability, quota-acceptance, stability, and both
/// verifiability notions of a rule by enumerating every subset of `universe`
/// and auditing each selection inside the one-school economy it defines.
pub fn check_choice_properties(
    rule: &SchoolRule,
    school: SchoolId,
    universe: &BTreeSet<StudentId>,
    instance: &Instance,
) -> Result<ChoicePropertyReport, ChoiceError> {
    if universe.len() > PROPERTY_UNIVERSE_LIMIT {
        return Err(ChoiceError::UniverseTooLarge {
            size: universe.len(),
            limit: PROPERTY_UNIVERSE_LIMIT,
        });
    }
    let members: Vec<StudentId> = universe.iter().copied().collect();
    let n = members.len();
    let subset = |mask: u32| -> BTreeSet<StudentId> {
        members
            .iter()
            .enumerate()
            .filter(|&(k, _)| mask & (1 << k) != 0)
            .map(|(_, &i)| i)
            .collect()
    };

    let results: Vec<ChoiceResult> = (0..1u32 << n)
        .map(|mask| rule.choose(school, &subset(mask), instance))
        .collect();
    let chosen_mask = |mask: u32| -> u32 {
        let chosen = results[mask as usize].chosen();
        members
            .iter()
            .enumerate()
            .filter(|&(_, i)| chosen.contains(i))
            .fold(0, |acc, (k, _)| acc | (1 << k))
    };

    let capacity = instance.school(school).capacity as usize;
    let mut q_acceptant = PropertyOutcome::Holds;
    let mut substitutable = PropertyOutcome::Holds;
    let mut stable = PropertyOutcome::Holds;
    let mut ro = PropertyOutcome::Holds;
    let mut or = PropertyOutcome::Holds;

    for mask in 0..1u32 << n {
        let size = mask.count_ones() as usize;
        if q_acceptant.holds() && results[mask as usize].len() != size.min(capacity) {
            q_acceptant = PropertyOutcome::Fails {
                witness: subset(mask),
            };
        }
        if substitutable.holds() {
            let chosen = chosen_mask(mask);
            for k in 0..n {
                let bit = 1u32 << k;
                if mask & bit == 0 {
                    continue;
                }
                let without = mask & !bit;
                // Everyone chosen from the larger pool (other than the one
                // removed) must stay chosen from the smaller pool.
                if chosen & !bit & !chosen_mask(without) != 0 {
                    substitutable = PropertyOutcome::Fails {
                        witness: subset(mask),
                    };
                    break;
                }
            }
        }
        let pool = subset(mask);
        let economy = instance.single_school_economy(school, &pool);
        let matching = economy.matching_from_selection(&results[mask as usize].seats);
        if stable.holds()
            && !stability_report(&matching, &economy.prefs, &economy.economy).is_stable()
        {
            stable = PropertyOutcome::Fails {
                witness: pool.clone(),
            };
        }
        if ro.holds() && !is_ro_verifiable(&matching, &economy.prefs, &economy.economy).passed() {
            ro = PropertyOutcome::Fails {
                witness: pool.clone(),
            };
        }
        if or.holds() && !is_or_verifiable(&matching, &economy.prefs, &economy.economy).passed() {
            or = PropertyOutcome::Fails { witness: pool };
        }
    }

    Ok(ChoicePropertyReport {
        substitutable,
        q_acceptant,
        stable,
        ro_verifiable: ro,
        or_verifiable: or,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn ids(instance: &Instance, names: &[&str]) -> BTreeSet<StudentId> {
        fixtures::students(instance, names).into_iter().collect()
    }

    fn assert_selection(
        result: &ChoiceResult,
        instance: &Instance,
        open: &[&str],
        reserved: &[&str],
    ) {
        assert_eq!(result.open(), ids(instance, open), "open seats differ");
        assert_eq!(
            result.reserved(),
            ids(instance, reserved),
            "reserved seats differ"
        );
    }

    #[test]
    fn reserve_first_on_ex1() {
        let instance = fixtures::ex1().instance();
        let result = reserve_first(SchoolId(0), &instance.all_students(), &instance);
        assert_selection(&result, &instance, &["i2", "i3"], &["i1", "i4"]);
    }

    #[test]
    fn reserve_first_on_empty_pool() {
        let instance = fixtures::ex1().instance();
        let result = reserve_first(SchoolId(0), &BTreeSet::new(), &instance);
        assert!(result.is_empty());
    }

    #[test]
    fn reserve_first_on_ex5() {
        let instance = fixtures::ex5().instance();
        let result = reserve_first(SchoolId(0), &instance.all_students(), &instance);
        assert_selection(
            &result,
            &instance,
            &["i3", "i4", "i6"],
            &["i1", "i2", "i5", "i9", "i10"],
        );
    }

    #[test]
    fn open_reserve_open_on_ex6() {
        let instance = fixtures::ex6().instance();
        let result = open_reserve_open(SchoolId(0), &instance.all_students(), &instance);
        assert_selection(
            &result,
            &instance,
            &["i1", "i2", "i3", "i4", "i6", "i7"],
            &["i5", "i9"],
        );
    }

    #[test]
    fn open_reserve_open_within_open_quota_admits_everyone_open() {
        let instance = fixtures::ex6().instance();
        let pool = ids(&instance, &["i5", "i9", "i10"]);
        let result = open_reserve_open(SchoolId(0), &pool, &instance);
        assert_selection(&result, &instance, &["i5", "i9", "i10"], &[]);
    }

    #[test]
    fn open_reserve_open_on_ex1() {
        let instance = fixtures::ex1().instance();
        let result = open_reserve_open(SchoolId(0), &instance.all_students(), &instance);
        assert_selection(&result, &instance, &["i1", "i4"], &["i2", "i5"]);
    }

    fn ex4_split(instance: &Instance) -> SplitApplicants {
        SplitApplicants::new(
            ids(instance, &["i1", "i2", "i5", "i6"]),
            ids(instance, &["i3", "i4"]),
        )
        .unwrap()
    }

    #[test]
    fn separate_wastes_unfilled_reserves_on_ex4() {
        let instance = fixtures::ex4().instance();
        let result = separate(SchoolId(0), &ex4_split(&instance), &instance);
        assert_selection(&result, &instance, &["i1", "i2"], &["i3", "i4"]);
        // One first-type reserve seat stays empty; i5 and i6 are rejected.
        assert_eq!(result.len(), 4);
    }

    #[test]
    fn separate_on_empty_split() {
        let instance = fixtures::ex4().instance();
        let split = SplitApplicants::new(BTreeSet::new(), BTreeSet::new()).unwrap();
        assert!(separate(SchoolId(0), &split, &instance).is_empty());
    }

    #[test]
    fn separate_with_no_reserve_side_fills_open_quota_only() {
        let instance = fixtures::ex4().instance();
        let split = SplitApplicants::new(instance.all_students(), BTreeSet::new()).unwrap();
        let result = separate(SchoolId(0), &split, &instance);
        assert_selection(&result, &instance, &["i1", "i2"], &[]);
    }

    #[test]
    fn flexible_converts_the_unfilled_reserve_on_ex4() {
        let instance = fixtures::ex4().instance();
        let result = flexible(SchoolId(0), &ex4_split(&instance), &instance);
        assert_selection(&result, &instance, &["i1", "i2", "i5"], &["i3", "i4"]);
    }

    #[test]
    fn flexible_with_empty_reserve_side_is_a_plain_open_fill() {
        let instance = fixtures::ex4().instance();
        let split = SplitApplicants::new(instance.all_students(), BTreeSet::new()).unwrap();
        let result = flexible(SchoolId(0), &split, &instance);
        assert_selection(&result, &instance, &["i1", "i2", "i3", "i4", "i5"], &[]);
    }

    #[test]
    fn flexible_with_empty_open_side_fills_reserves_only() {
        let instance = fixtures::ex4().instance();
        let split = SplitApplicants::new(BTreeSet::new(), instance.all_students()).unwrap();
        let result = flexible(SchoolId(0), &split, &instance);
        assert_selection(&result, &instance, &[], &["i1", "i2", "i4"]);
    }

    #[test]
    fn expansion_separate_within_flexible_on_all_ex4_splits() {
        let instance = fixtures::ex4().instance();
        let members: Vec<StudentId> = instance.student_ids().collect();
        // Every way to deal six students onto {open side, reserve side, out}.
        for code in 0..3usize.pow(6) {
            let mut c = code;
            let mut open_side = BTreeSet::new();
            let mut reserve_side = BTreeSet::new();
            for &i in &members {
                match c % 3 {
                    0 => {
                        open_side.insert(i);
                    }
                    1 => {
                        reserve_side.insert(i);
                    }
                    _ => {}
                }
                c /= 3;
            }
            let split = SplitApplicants::new(open_side, reserve_side).unwrap();
            let sep = separate(SchoolId(0), &split, &instance);
            let flex = flexible(SchoolId(0), &split, &instance);
            assert!(
                sep.chosen().is_subset(&flex.chosen()),
                "expansion fails on {split:?}"
            );
        }
    }

    #[test]
    fn subschool_da_on_ex4_rejects_the_last_open_side_student() {
        let instance = fixtures::ex4().instance();
        let result = subschool_da(SchoolId(0), &ex4_split(&instance), &instance);
        assert_selection(&result, &instance, &["i1", "i2", "i5"], &["i3", "i4"]);
    }

    #[test]
    fn subschool_da_on_ex8_type_split() {
        let instance = fixtures::ex8().instance();
        let m3 = ids(&instance, &["i9", "i10", "i11"]);
        let rest: BTreeSet<StudentId> = instance
            .all_students()
            .difference(&m3)
            .copied()
            .collect();
        let split = SplitApplicants::new(m3, rest).unwrap();
        let result = subschool_da(SchoolId(0), &split, &instance);
        assert_eq!(
            result.chosen(),
            ids(
                &instance,
                &["i1", "i2", "i3", "i4", "i5", "i6", "i9", "i10", "i11"]
            )
        );
    }

    #[test]
    fn subschool_da_with_empty_reserve_side_equals_open_first() {
        let instance = fixtures::ex5().instance();
        let all = instance.all_students();
        let split = SplitApplicants::new(all.clone(), BTreeSet::new()).unwrap();
        assert_eq!(
            subschool_da(SchoolId(0), &split, &instance),
            open_first(SchoolId(0), &all, &instance)
        );
    }

    #[test]
    fn subschool_da_with_empty_open_side_matches_reserve_first() {
        for fx in [fixtures::ex1(), fixtures::ex5(), fixtures::ex6()] {
            let instance = fx.instance();
            let all = instance.all_students();
            let split = SplitApplicants::new(BTreeSet::new(), all.clone()).unwrap();
            assert_eq!(
                subschool_da(SchoolId(0), &split, &instance),
                reserve_first(SchoolId(0), &all, &instance),
                "mismatch on {}",
                fx.id
            );
        }
    }

    #[test]
    fn open_first_on_ex5() {
        let instance = fixtures::ex5().instance();
        let result = open_first(SchoolId(0), &instance.all_students(), &instance);
        assert_selection(
            &result,
            &instance,
            &["i1", "i2", "i3", "i5", "i4", "i9"],
            &["i6", "i10"],
        );
    }

    #[test]
    fn open_first_on_ex1_matches_row_four() {
        let instance = fixtures::ex1().instance();
        let result = open_first(SchoolId(0), &instance.all_students(), &instance);
        assert_selection(&result, &instance, &["i1", "i4"], &["i2", "i5"]);
    }

    #[test]
    fn open_first_within_capacity_uses_no_reserves() {
        let instance = fixtures::ex1().instance();
        let pool = ids(&instance, &["i1", "i4", "i5", "i6"]);
        let result = open_first(SchoolId(0), &pool, &instance);
        assert_selection(&result, &instance, &["i1", "i4", "i5", "i6"], &[]);
    }

    #[test]
    fn open_first_on_ex8() {
        let instance = fixtures::ex8().instance();
        let result = open_first(SchoolId(0), &instance.all_students(), &instance);
        assert_eq!(
            result.chosen(),
            ids(
                &instance,
                &["i1", "i2", "i3", "i4", "i5", "i9", "i6", "i10", "i7"]
            )
        );
        assert_selection(
            &result,
            &instance,
            &["i1", "i2", "i3", "i4", "i5", "i9"],
            &["i6", "i7", "i10"],
        );
    }

    #[test]
    fn precedence_on_ex7_with_open_seats_first() {
        let instance = fixtures::ex7().instance();
        let spec = PrecedenceSpec::new(
            vec![
                SeatLabel::Open,
                SeatLabel::Open,
                SeatLabel::Open,
                SeatLabel::Reserved(instance.find_type("m1").unwrap()),
                SeatLabel::Reserved(instance.find_type("m2").unwrap()),
                SeatLabel::Reserved(instance.find_type("m3").unwrap()),
            ],
            SchoolId(0),
            &instance,
        )
        .unwrap();
        let result = precedence(SchoolId(0), &spec, &instance.all_students(), &instance);
        assert_selection(&result, &instance, &["i1", "i2", "i3", "i4"], &["i5", "i7"]);
        // Same selected set as the open-first rule on this pool.
        assert_eq!(
            result.chosen(),
            open_first(SchoolId(0), &instance.all_students(), &instance).chosen()
        );
    }

    #[test]
    fn precedence_quota_mismatch_is_an_error() {
        let instance = fixtures::ex7().instance();
        assert_eq!(
            PrecedenceSpec::new(vec![SeatLabel::Open; 6], SchoolId(0), &instance).unwrap_err(),
            ChoiceError::PrecedenceQuotaMismatch
        );
    }

    #[test]
    fn precedence_trivia() {
        let instance = fixtures::ex7().instance();
        let m1 = instance.find_type("m1").unwrap();
        let m2 = instance.find_type("m2").unwrap();
        let m3 = instance.find_type("m3").unwrap();
        let spec = PrecedenceSpec::new(
            vec![
                SeatLabel::Reserved(m3),
                SeatLabel::Open,
                SeatLabel::Open,
                SeatLabel::Open,
                SeatLabel::Reserved(m1),
                SeatLabel::Reserved(m2),
            ],
            SchoolId(0),
            &instance,
        )
        .unwrap();
        assert!(precedence(SchoolId(0), &spec, &BTreeSet::new(), &instance).is_empty());
        // A single applicant lands on the first seat; the m3 seat taken by an
        // m1 student is recorded as open.
        let solo = ids(&instance, &["i1"]);
        let result = precedence(SchoolId(0), &spec, &solo, &instance);
        assert_selection(&result, &instance, &["i1"], &[]);
        let solo_m3 = ids(&instance, &["i8"]);
        let result = precedence(SchoolId(0), &spec, &solo_m3, &instance);
        assert_selection(&result, &instance, &[], &["i8"]);
    }

    #[test]
    fn backward_transfer_keeps_filled_reserves_on_ex_bt() {
        let instance = fixtures::ex_bt().instance();
        let result = backward_transfer(SchoolId(0), &instance.all_students(), &instance);
        assert_selection(&result, &instance, &["i1"], &["i2", "i3"]);
        // The open-first rule seats the same students entirely on open seats.
        let or = open_first(SchoolId(0), &instance.all_students(), &instance);
        assert_eq!(or.chosen(), result.chosen());
        assert_selection(&or, &instance, &["i1", "i2", "i3"], &[]);
        assert!(or.reserved().is_subset(&result.reserved()));
    }

    #[test]
    fn backward_transfer_selects_like_open_first_on_ex6() {
        let instance = fixtures::ex6().instance();
        let all = instance.all_students();
        let bt = backward_transfer(SchoolId(0), &all, &instance);
        let or = open_first(SchoolId(0), &all, &instance);
        assert_eq!(bt.chosen(), or.chosen());
        assert!(or.reserved().is_subset(&bt.reserved()));
    }

    #[test]
    fn backward_transfer_admits_a_small_single_type_pool() {
        let instance = fixtures::ex_bt().instance();
        // Both m1 students: count 2 <= open quota (1) + m1 reserve (1).
        let pool = ids(&instance, &["i1", "i3"]);
        let result = backward_transfer(SchoolId(0), &pool, &instance);
        assert_eq!(result.chosen(), pool);
    }

    #[test]
    fn property_checker_on_ex1_reserve_first() {
        let instance = fixtures::ex1().instance();
        let report = check_choice_properties(
            &SchoolRule::ReserveFirst,
            SchoolId(0),
            &instance.all_students(),
            &instance,
        )
        .unwrap();
        assert!(report.substitutable.holds());
        assert!(report.q_acceptant.holds());
        assert!(report.stable.holds());
        assert!(report.ro_verifiable.holds());
        assert!(!report.or_verifiable.holds());
    }

    #[test]
    fn property_checker_on_ex5_open_first() {
        let instance = fixtures::ex5().instance();
        let report = check_choice_properties(
            &SchoolRule::OpenFirst,
            SchoolId(0),
            &instance.all_students(),
            &instance,
        )
        .unwrap();
        assert!(report.substitutable.holds());
        assert!(report.q_acceptant.holds());
        assert!(report.stable.holds());
        assert!(report.or_verifiable.holds());
        assert!(!report.ro_verifiable.holds());
    }

    #[test]
    fn property_checker_on_ex6_open_reserve_open() {
        let instance = fixtures::ex6().instance();
        let report = check_choice_properties(
            &SchoolRule::OpenReserveOpen,
            SchoolId(0),
            &instance.all_students(),
            &instance,
        )
        .unwrap();
        assert!(report.stable.holds());
        assert!(!report.ro_verifiable.holds());
        match &report.or_verifiable {
            // The full pool is a witness; smaller ones may fire first.
            PropertyOutcome::Fails { witness } => assert!(witness.len() <= 10),
            PropertyOutcome::Holds => panic!("expected an or-verifiability failure"),
        }
    }

    #[test]
    fn property_checker_guards_large_universes() {
        let instance = fixtures::ex1().instance();
        let mut big = BTreeSet::new();
        for k in 0..13 {
            big.insert(StudentId(k));
        }
        assert!(matches!(
            check_choice_properties(&SchoolRule::ReserveFirst, SchoolId(0), &big, &instance),
            Err(ChoiceError::UniverseTooLarge { size: 13, .. })
        ));
    }
}
