//! Seeded random market generator.
//!
//! Determinism is part of the contract: the generator carries its own
//! splitmix-style PRNG so a (parameters, seed) pair produces the same
//! instance on every platform and toolchain.

use std::collections::BTreeMap;

use crate::model::{
    Instance, PreferenceList, PreferenceProfile, RawInstance, RawSchool, RawStudent, SchoolId,
};

/// Parameters for [`generate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenParams {
    pub students: u32,
    pub schools: u32,
    pub types: u32,
    pub seed: u64,
    /// Probability that a given (school, type) pair carries a positive
    /// reserve, in [0, 1].
    pub reserve_density: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GenError {
    #[error("student, school and type counts must be positive")]
    ZeroSize,
    #[error("reserve density must lie in [0, 1]")]
    BadDensity,
    #[error("more types than students: positive reserves cannot stay below type sizes")]
    TooManyTypes,
    #[error("no valid draw within {0} attempts")]
    RetriesExhausted(u32),
}

const MAX_RETRIES: u32 = 64;

pub(crate) struct Rng(u64);

impl Rng {
    pub(crate) fn new(seed: u64) -> Self {
        Rng(seed)
    }

    pub(crate) fn next_u64(&mut self) -> u64 {
        // splitmix64 step.
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform draw in `0..bound`.
    pub(crate) fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        self.next_u64() % bound
    }

    pub(crate) fn chance(&mut self, p: f64) -> bool {
        (self.next_u64() as f64 / u64::MAX as f64) < p
    }

    pub(crate) fn shuffle<T>(&mut self, items: &mut [T]) {
        for k in (1..items.len()).rev() {
            let j = self.below(k as u64 + 1) as usize;
            items.swap(k, j);
        }
    }
}

/// Draws a market satisfying the full model assumptions: every type
/// populated, distinct scores per school, reserves strictly below both the
/// school capacity and the owning type's population. Deterministic in
/// (parameters, seed); infeasible parameters and exhausted retry budgets are
/// errors.
pub fn generate(params: GenParams) -> Result<RawInstance, GenError> {
    if params.students == 0 || params.schools == 0 || params.types == 0 {
        return Err(GenError::ZeroSize);
    }
    if !(0.0..=1.0).contains(&params.reserve_density) {
        return Err(GenError::BadDensity);
    }
    if params.types > params.students {
        return Err(GenError::TooManyTypes);
    }

    let mut rng = Rng::new(params.seed);
    for _ in 0..MAX_RETRIES {
        if let Some(raw) = try_draw(&params, &mut rng) {
            if raw.validate().is_ok() {
                return Ok(raw);
            }
        }
    }
    Err(GenError::RetriesExhausted(MAX_RETRIES))
}

fn try_draw(params: &GenParams, rng: &mut Rng) -> Option<RawInstance> {
    let type_names: Vec<String> = (1..=params.types).map(|k| format!("m{k}")).collect();
    let school_names: Vec<String> = (1..=params.schools).map(|k| format!("s{k}")).collect();
    let student_names: Vec<String> = (1..=params.students).map(|k| format!("i{k}")).collect();

    // Round-robin guarantees every type is populated; the rest is random.
    let mut type_of: Vec<usize> = (0..params.students as usize)
        .map(|k| {
            if k < params.types as usize {
                k
            } else {
                rng.below(params.types as u64) as usize
            }
        })
        .collect();
    rng.shuffle(&mut type_of);
    let mut type_sizes = vec![0u32; params.types as usize];
    for &t in &type_of {
        type_sizes[t] += 1;
    }

    // Distinct scores per school: a shuffled 1..=n ranking.
    let mut scores: Vec<BTreeMap<String, u64>> =
        vec![BTreeMap::new(); params.students as usize];
    for school in &school_names {
        let mut ranking: Vec<u64> = (1..=params.students as u64).collect();
        rng.shuffle(&mut ranking);
        for (k, score) in ranking.into_iter().enumerate() {
            scores[k].insert(school.clone(), score);
        }
    }

    let schools = school_names
        .iter()
        .map(|name| {
            // Capacity 1..=students, reserves strictly below capacity and
            // strictly below the owning type's population.
            let capacity = 1 + rng.below(params.students as u64) as u32;
            let mut budget = capacity.saturating_sub(1);
            let mut reserves = BTreeMap::new();
            for (t, ty) in type_names.iter().enumerate() {
                if budget == 0 || type_sizes[t] <= 1 {
                    continue;
                }
                if rng.chance(params.reserve_density) {
                    let cap = budget.min(type_sizes[t] - 1);
                    let quota = 1 + rng.below(cap as u64) as u32;
                    budget -= quota;
                    reserves.insert(ty.clone(), quota);
                }
            }
            RawSchool {
                id: name.clone(),
                capacity,
                reserves,
            }
        })
        .collect();

    let students = student_names
        .iter()
        .enumerate()
        .map(|(k, name)| RawStudent {
            id: name.clone(),
            ty: type_names[type_of[k]].clone(),
            scores: scores[k].clone(),
        })
        .collect();

    Some(RawInstance {
        types: type_names,
        schools,
        students,
    })
}

/// Draws one random preference list per student: a shuffled subset of the
/// schools, never empty. Deterministic in (instance shape, seed).
pub fn generate_preferences(instance: &Instance, seed: u64) -> PreferenceProfile {
    // Domain-separate the stream from the instance draw.
    let mut rng = Rng::new(seed ^ 0x70e6_15f5_u64);
    let lists = instance
        .student_ids()
        .map(|_| {
            let mut schools: Vec<SchoolId> = instance.school_ids().collect();
            rng.shuffle(&mut schools);
            let len = 1 + rng.below(schools.len() as u64) as usize;
            schools.truncate(len);
            PreferenceList::new(schools).expect("shuffled prefix has no duplicates")
        })
        .collect();
    PreferenceProfile::new(lists)
}
