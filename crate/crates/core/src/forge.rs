//! Game-instance generation and validation.
//!
//! Instances are found by seeded rejection sampling: draw a matrix, a target
//! valence, four hidden cells and a two-cell witness, and keep the draw when
//! the three reference states (nothing revealed, witness revealed, everything
//! revealed) each have a strict and distinct utility maximum.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    knownness_from, strict_argmax, utility_vector, Cell, CellMask, Effect,
    GameInstance, KnownnessMask, ModelError, PayoffMatrix, Valence, ValenceVector,
};
use crate::scenario::Scenario;

pub const HIDDEN_CELLS: usize = 4;
pub const WITNESS_CELLS: usize = 2;
pub const DEFAULT_MAX_ATTEMPTS: u64 = 5_000_000;

#[derive(Debug, Error)]
pub enum ForgeError {
    #[error("count must be at least 1")]
    ZeroCount,
    #[error("search exhausted after {attempts} attempts: found {found} of {requested} instances")]
    Exhausted {
        attempts: u64,
        found: usize,
        requested: usize,
    },
    #[error("instance is not canonical: {0} winning disclosure subsets")]
    NotCanonical(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Per-constraint outcome of [`check_instance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintReport {
    /// Full information: `p_full` is the strict maximum.
    pub c1_full_choice: bool,
    /// Nothing revealed: `p_init` is the strict maximum.
    pub c2_initial_choice: bool,
    /// Witness revealed: `persuader_goal` is the strict maximum.
    pub c3_witness_choice: bool,
    /// Exactly four hidden cells.
    pub c4_hidden_size: bool,
    /// Two witness cells, all of them hidden.
    pub c5_witness_subset: bool,
    /// `p_init`, `p_full` and `persuader_goal` pairwise distinct.
    pub distinct: bool,
    /// When a persuader valence is present, the goal is its strict full-information maximum.
    pub persuader_consistent: bool,
}

impl ConstraintReport {
    pub fn is_valid(&self) -> bool {
        self.c1_full_choice
            && self.c2_initial_choice
            && self.c3_witness_choice
            && self.c4_hidden_size
            && self.c5_witness_subset
            && self.distinct
            && self.persuader_consistent
    }
}

pub fn check_instance(candidate: &GameInstance) -> ConstraintReport {
    let GameInstance {
        matrix,
        target_valence,
        hidden,
        witness,
        ..
    } = candidate;
    let strict_under = |known: Option<KnownnessMask>| {
        known.and_then(|k| strict_argmax(&utility_vector(matrix, target_valence, &k)))
    };

    let full = strict_under(Some(KnownnessMask::ALL_KNOWN));
    let initial = strict_under(knownness_from(*hidden, CellMask::EMPTY).ok());
    let revealed = strict_under(knownness_from(*hidden, *witness).ok());

    let persuader_consistent = match &candidate.persuader_valence {
        None => true,
        Some(v) => {
            strict_argmax(&utility_vector(matrix, v, &KnownnessMask::ALL_KNOWN))
                == Some(candidate.persuader_goal)
        }
    };

    ConstraintReport {
        c1_full_choice: full == Some(candidate.p_full),
        c2_initial_choice: initial == Some(candidate.p_init),
        c3_witness_choice: revealed == Some(candidate.persuader_goal),
        c4_hidden_size: hidden.len() == HIDDEN_CELLS,
        c5_witness_subset: witness.len() == WITNESS_CELLS && witness.is_subset(*hidden),
        distinct: candidate.p_init != candidate.p_full
            && candidate.p_init != candidate.persuader_goal
            && candidate.p_full != candidate.persuader_goal,
        persuader_consistent,
    }
}

/// Subsets of the hidden cells whose truthful disclosure makes the goal the strict maximum.
///
/// Exhaustive over all `2^|hidden|` subsets, returned in increasing bit order.
pub fn winning_subsets(instance: &GameInstance) -> Vec<CellMask> {
    instance
        .hidden
        .subsets()
        .into_iter()
        .filter(|s| {
            instance
                .target_utilities(*s)
                .ok()
                .and_then(|u| strict_argmax(&u))
                == Some(instance.persuader_goal)
        })
        .collect()
}

/// True when the witness is the only disclosure subset that makes the goal the strict maximum.
pub fn is_canonical(instance: &GameInstance) -> bool {
    winning_subsets(instance) == [instance.witness]
}

/// Classification of all nine cells for a canonical instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PieceTaxonomy {
    pub critical: CellMask,
    pub poison: CellMask,
    pub inert: CellMask,
}

pub fn piece_taxonomy(instance: &GameInstance) -> Result<PieceTaxonomy, ForgeError> {
    let wins = winning_subsets(instance);
    if wins != [instance.witness] {
        return Err(ForgeError::NotCanonical(wins.len()));
    }
    Ok(PieceTaxonomy {
        critical: instance.witness,
        poison: instance.hidden.difference(instance.witness),
        inert: instance.hidden.complement(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerateOptions {
    /// Keep only instances where the witness is the unique winning subset.
    pub canonical_only: bool,
    /// Attach a persuader valence (off for the real-persuasion mode).
    pub persuader_valence: bool,
    pub max_attempts: u64,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        GenerateOptions {
            canonical_only: false,
            persuader_valence: true,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

/// Stable 64-bit FNV-1a, used to give each scenario its own stream under one seed.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ *b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

pub fn scenario_rng(seed: u64, scenario: &Scenario) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a(scenario.id.as_bytes()))
}

fn random_mask<R: Rng>(rng: &mut R, within: CellMask, size: usize) -> CellMask {
    let pool: Vec<Cell> = within.cells().collect();
    sample(rng, pool.len(), size)
        .into_iter()
        .map(|i| pool[i])
        .collect()
}

fn random_effect<R: Rng>(rng: &mut R) -> Effect {
    Effect::ALL[rng.gen_range(0..3)]
}

fn random_valence<R: Rng>(rng: &mut R) -> ValenceVector {
    ValenceVector::new([(); 3].map(|_| Valence::ALL[rng.gen_range(0..3)]))
}

/// Draw one candidate and return it if it satisfies every constraint.
fn try_candidate<R: Rng>(
    rng: &mut R,
    scenario: &Scenario,
    opts: &GenerateOptions,
) -> Option<GameInstance> {
    let matrix = PayoffMatrix::new([(); 3].map(|_| [(); 3].map(|_| random_effect(rng))));
    let target_valence = random_valence(rng);
    let strict = |known: KnownnessMask| strict_argmax(&utility_vector(&matrix, &target_valence, &known));
    // Every attempt is an independent draw, so rejecting early keeps outputs uniform over valid tuples.
    let p_full = strict(KnownnessMask::ALL_KNOWN)?;
    let hidden = random_mask(rng, CellMask::FULL, HIDDEN_CELLS);
    let p_init = strict(knownness_from(hidden, CellMask::EMPTY).ok()?)?;
    if p_init == p_full {
        return None;
    }
    let witness = random_mask(rng, hidden, WITNESS_CELLS);
    let goal = strict(knownness_from(hidden, witness).ok()?)?;
    if p_init == p_full || p_init == goal || p_full == goal {
        return None;
    }

    let mut instance = GameInstance {
        scenario_id: scenario.id.clone(),
        matrix,
        target_valence,
        persuader_valence: None,
        persuader_goal: goal,
        hidden,
        witness,
        p_init,
        p_full,
    };
    if opts.canonical_only && !is_canonical(&instance) {
        return None;
    }
    if opts.persuader_valence {
        let fitting: Vec<ValenceVector> = ValenceVector::all()
            .filter(|v| {
                strict_argmax(&utility_vector(&matrix, v, &KnownnessMask::ALL_KNOWN)) == Some(goal)
            })
            .collect();
        if fitting.is_empty() {
            return None;
        }
        instance.persuader_valence = Some(fitting[rng.gen_range(0..fitting.len())]);
    }
    Some(instance)
}

/// Generate `count` distinct valid instances for `scenario`, deterministically from `seed`.
pub fn generate(
    seed: u64,
    scenario: &Scenario,
    count: usize,
    opts: &GenerateOptions,
) -> Result<Vec<GameInstance>, ForgeError> {
    if count == 0 {
        return Err(ForgeError::ZeroCount);
    }
    let mut rng = scenario_rng(seed, scenario);
    let mut out = Vec::with_capacity(count);
    let mut seen = HashSet::new();
    let mut attempts = 0u64;
    while out.len() < count {
        if attempts >= opts.max_attempts {
            return Err(ForgeError::Exhausted {
                attempts,
                found: out.len(),
                requested: count,
            });
        }
        attempts += 1;
        if let Some(instance) = try_candidate(&mut rng, scenario, opts) {
            let key = (instance.matrix, instance.target_valence, instance.hidden, instance.witness);
            if seen.insert(key) {
                debug_assert!(check_instance(&instance).is_valid());
                out.push(instance);
            }
        }
    }
    Ok(out)
}
