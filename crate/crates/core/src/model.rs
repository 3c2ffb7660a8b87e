//! Domain types and the utility/choice arithmetic shared by every other module.
//!
//! Everything here is integer-valued. A game has exactly three proposals and
//! three attributes, so cell sets are stored as 9-bit masks.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PROPOSALS: usize = 3;
pub const ATTRIBUTES: usize = 3;
pub const CELLS: usize = PROPOSALS * ATTRIBUTES;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("effect value {0} is not one of -1, 0, +1")]
    Effect(i64),
    #[error("valence value {0} is not one of -1, 0, +1")]
    Valence(i64),
    #[error("proposal index {0} out of range")]
    ProposalIndex(usize),
    #[error("unknown proposal label {0:?}")]
    ProposalLabel(String),
    #[error("attribute index {0} out of range")]
    AttributeIndex(usize),
    #[error("revealed cells {0} are not a subset of hidden cells {1}")]
    RevealedNotHidden(CellMask, CellMask),
}

/// Effect of a proposal on an attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Effect {
    Decrease,
    NoEffect,
    Increase,
}

impl Effect {
    pub const ALL: [Effect; 3] = [Effect::Decrease, Effect::NoEffect, Effect::Increase];

    pub fn value(self) -> i32 {
        match self {
            Effect::Decrease => -1,
            Effect::NoEffect => 0,
            Effect::Increase => 1,
        }
    }

    /// Structured-grammar token: `+1`, `0` or `-1`.
    pub fn token(self) -> &'static str {
        match self {
            Effect::Decrease => "-1",
            Effect::NoEffect => "0",
            Effect::Increase => "+1",
        }
    }
}

impl TryFrom<i64> for Effect {
    type Error = ModelError;

    fn try_from(v: i64) -> Result<Self, Self::Error> {
        match v {
            -1 => Ok(Effect::Decrease),
            0 => Ok(Effect::NoEffect),
            1 => Ok(Effect::Increase),
            other => Err(ModelError::Effect(other)),
        }
    }
}

impl From<Effect> for i64 {
    fn from(e: Effect) -> i64 {
        e.value() as i64
    }
}

/// How a player feels about an attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Valence {
    Dislike,
    Indifferent,
    Like,
}

impl Valence {
    pub const ALL: [Valence; 3] = [Valence::Dislike, Valence::Indifferent, Valence::Like];

    pub fn value(self) -> i32 {
        match self {
            Valence::Dislike => -1,
            Valence::Indifferent => 0,
            Valence::Like => 1,
        }
    }
}

impl TryFrom<i64> for Valence {
    type Error = ModelError;

    fn try_from(v: i64) -> Result<Self, Self::Error> {
        match v {
            -1 => Ok(Valence::Dislike),
            0 => Ok(Valence::Indifferent),
            1 => Ok(Valence::Like),
            other => Err(ModelError::Valence(other)),
        }
    }
}

impl From<Valence> for i64 {
    fn from(v: Valence) -> i64 {
        v.value() as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Proposal {
    A,
    B,
    C,
}

impl Proposal {
    pub const ALL: [Proposal; 3] = [Proposal::A, Proposal::B, Proposal::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Self, ModelError> {
        Self::ALL
            .get(index)
            .copied()
            .ok_or(ModelError::ProposalIndex(index))
    }

    pub fn label(self) -> &'static str {
        ["A", "B", "C"][self.index()]
    }

    pub fn from_label(label: &str) -> Result<Self, ModelError> {
        match label {
            "A" => Ok(Proposal::A),
            "B" => Ok(Proposal::B),
            "C" => Ok(Proposal::C),
            other => Err(ModelError::ProposalLabel(other.to_string())),
        }
    }
}

impl fmt::Display for Proposal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl TryFrom<String> for Proposal {
    type Error = ModelError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Proposal::from_label(&s)
    }
}

impl From<Proposal> for String {
    fn from(p: Proposal) -> String {
        p.label().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct AttributeId(u8);

impl AttributeId {
    pub const ALL: [AttributeId; 3] = [AttributeId(0), AttributeId(1), AttributeId(2)];

    pub fn new(index: usize) -> Result<Self, ModelError> {
        if index < ATTRIBUTES {
            Ok(AttributeId(index as u8))
        } else {
            Err(ModelError::AttributeIndex(index))
        }
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl TryFrom<usize> for AttributeId {
    type Error = ModelError;

    fn try_from(i: usize) -> Result<Self, Self::Error> {
        AttributeId::new(i)
    }
}

impl From<AttributeId> for usize {
    fn from(a: AttributeId) -> usize {
        a.index()
    }
}

/// One (proposal, attribute) position of the payoff matrix.
///
/// Serialized as `[proposal_index, attribute_index]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[usize; 2]", into = "[usize; 2]")]
pub struct Cell {
    pub proposal: Proposal,
    pub attribute: AttributeId,
}

impl Cell {
    pub fn new(proposal: Proposal, attribute: AttributeId) -> Self {
        Cell {
            proposal,
            attribute,
        }
    }

    /// Row-major position in `0..9`.
    pub fn index(self) -> usize {
        self.proposal.index() * ATTRIBUTES + self.attribute.index()
    }

    pub fn from_index(index: usize) -> Result<Self, ModelError> {
        if index >= CELLS {
            return Err(ModelError::ProposalIndex(index / ATTRIBUTES));
        }
        Ok(Cell {
            proposal: Proposal::from_index(index / ATTRIBUTES)?,
            attribute: AttributeId::new(index % ATTRIBUTES)?,
        })
    }

    pub fn all() -> impl Iterator<Item = Cell> {
        (0..CELLS).map(|i| Cell::from_index(i).expect("in range"))
    }
}

impl TryFrom<[usize; 2]> for Cell {
    type Error = ModelError;

    fn try_from([p, a]: [usize; 2]) -> Result<Self, Self::Error> {
        Ok(Cell::new(Proposal::from_index(p)?, AttributeId::new(a)?))
    }
}

impl From<Cell> for [usize; 2] {
    fn from(c: Cell) -> [usize; 2] {
        [c.proposal.index(), c.attribute.index()]
    }
}

/// Effects of each proposal (rows) on each attribute (columns).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PayoffMatrix {
    pub effects: [[Effect; ATTRIBUTES]; PROPOSALS],
}

impl PayoffMatrix {
    pub fn new(effects: [[Effect; ATTRIBUTES]; PROPOSALS]) -> Self {
        PayoffMatrix { effects }
    }

    pub fn from_values(values: [[i64; ATTRIBUTES]; PROPOSALS]) -> Result<Self, ModelError> {
        let mut effects = [[Effect::NoEffect; ATTRIBUTES]; PROPOSALS];
        for (row, vals) in effects.iter_mut().zip(values) {
            for (slot, v) in row.iter_mut().zip(vals) {
                *slot = Effect::try_from(v)?;
            }
        }
        Ok(PayoffMatrix { effects })
    }

    pub fn effect(&self, cell: Cell) -> Effect {
        self.effects[cell.proposal.index()][cell.attribute.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValenceVector {
    pub coefficients: [Valence; ATTRIBUTES],
}

impl ValenceVector {
    pub fn new(coefficients: [Valence; ATTRIBUTES]) -> Self {
        ValenceVector { coefficients }
    }

    pub fn from_values(values: [i64; ATTRIBUTES]) -> Result<Self, ModelError> {
        Ok(ValenceVector {
            coefficients: [
                Valence::try_from(values[0])?,
                Valence::try_from(values[1])?,
                Valence::try_from(values[2])?,
            ],
        })
    }

    pub fn get(&self, attribute: AttributeId) -> Valence {
        self.coefficients[attribute.index()]
    }

    /// All 27 ternary valence vectors in lexicographic order.
    pub fn all() -> impl Iterator<Item = ValenceVector> {
        (0..27).map(|mut i| {
            let mut coefficients = [Valence::Indifferent; ATTRIBUTES];
            for slot in coefficients.iter_mut().rev() {
                *slot = Valence::ALL[i % 3];
                i /= 3;
            }
            ValenceVector { coefficients }
        })
    }
}

/// A set of matrix cells, stored as a 9-bit mask (bit `p * 3 + a`).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct CellMask(u16);

impl CellMask {
    pub const EMPTY: CellMask = CellMask(0);
    pub const FULL: CellMask = CellMask((1 << CELLS) - 1);

    pub fn from_bits(bits: u16) -> Self {
        CellMask(bits & Self::FULL.0)
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, cell: Cell) -> bool {
        self.0 & (1 << cell.index()) != 0
    }

    pub fn insert(&mut self, cell: Cell) {
        self.0 |= 1 << cell.index();
    }

    pub fn with(mut self, cell: Cell) -> Self {
        self.insert(cell);
        self
    }

    pub fn is_subset(self, other: CellMask) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(self, other: CellMask) -> Self {
        CellMask(self.0 | other.0)
    }

    pub fn intersection(self, other: CellMask) -> Self {
        CellMask(self.0 & other.0)
    }

    pub fn difference(self, other: CellMask) -> Self {
        CellMask(self.0 & !other.0)
    }

    pub fn complement(self) -> Self {
        CellMask(!self.0 & Self::FULL.0)
    }

    /// Cells in row-major order.
    pub fn cells(self) -> impl Iterator<Item = Cell> {
        Cell::all().filter(move |c| self.contains(*c))
    }

    /// Every subset of this mask, in increasing bit order, starting with the empty set.
    pub fn subsets(self) -> Vec<CellMask> {
        let mut out = Vec::with_capacity(1 << self.len());
        let mut sub: u16 = 0;
        loop {
            out.push(CellMask(sub));
            if sub == self.0 {
                break;
            }
            sub = (sub.wrapping_sub(self.0)) & self.0;
        }
        out
    }
}

impl FromIterator<Cell> for CellMask {
    fn from_iter<I: IntoIterator<Item = Cell>>(iter: I) -> Self {
        let mut m = CellMask::EMPTY;
        for c in iter {
            m.insert(c);
        }
        m
    }
}

impl fmt::Debug for CellMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set()
            .entries(self.cells().map(<[usize; 2]>::from))
            .finish()
    }
}

impl fmt::Display for CellMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl Serialize for CellMask {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.cells())
    }
}

impl<'de> Deserialize<'de> for CellMask {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let cells = Vec::<Cell>::deserialize(deserializer)?;
        let mask: CellMask = cells.iter().copied().collect();
        if mask.len() != cells.len() {
            return Err(serde::de::Error::custom("duplicate cell in mask"));
        }
        Ok(mask)
    }
}

/// Which cells a player currently knows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KnownnessMask(CellMask);

impl KnownnessMask {
    pub const ALL_KNOWN: KnownnessMask = KnownnessMask(CellMask::FULL);

    pub fn from_known(known: CellMask) -> Self {
        KnownnessMask(known)
    }

    pub fn is_known(&self, cell: Cell) -> bool {
        self.0.contains(cell)
    }

    pub fn known_cells(&self) -> CellMask {
        self.0
    }

    pub fn count(&self) -> usize {
        self.0.len()
    }
}

/// Knownness after `revealed` has been disclosed out of `hidden`: a cell is
/// known when it was never hidden or has been revealed (`1 - H + R`).
pub fn knownness_from(hidden: CellMask, revealed: CellMask) -> Result<KnownnessMask, ModelError> {
    if !revealed.is_subset(hidden) {
        return Err(ModelError::RevealedNotHidden(revealed, hidden));
    }
    Ok(KnownnessMask(hidden.complement().union(revealed)))
}

pub type Utilities = [i32; PROPOSALS];

/// `U_p = sum_a valence(a) * effect(p, a) * known(p, a)`.
pub fn utility_vector(
    matrix: &PayoffMatrix,
    valence: &ValenceVector,
    known: &KnownnessMask,
) -> Utilities {
    let mut out = [0; PROPOSALS];
    for cell in known.known_cells().cells() {
        out[cell.proposal.index()] += valence.get(cell.attribute).value() * matrix.effect(cell).value();
    }
    out
}

/// Proposals attaining the maximum utility, in index order.
pub fn argmax_set(utilities: &Utilities) -> Vec<Proposal> {
    let best = utilities.iter().copied().max().unwrap_or(0);
    Proposal::ALL
        .into_iter()
        .filter(|p| utilities[p.index()] == best)
        .collect()
}

pub fn strict_argmax(utilities: &Utilities) -> Option<Proposal> {
    match argmax_set(utilities).as_slice() {
        [only] => Some(*only),
        _ => None,
    }
}

/// Choose a maximal-utility proposal, preferring to stay with earlier choices.
///
/// The most recent choice wins if it is still maximal, then the earliest
/// historical choice that is maximal, then the lowest-index maximal proposal.
pub fn choose(utilities: &Utilities, history: &[Proposal]) -> Proposal {
    let best = argmax_set(utilities);
    if let Some(last) = history.last() {
        if best.contains(last) {
            return *last;
        }
    }
    history
        .iter()
        .find(|p| best.contains(p))
        .copied()
        .unwrap_or(best[0])
}

/// A fully specified game: matrix, values, and what the target cannot see.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GameInstance {
    pub scenario_id: String,
    pub matrix: PayoffMatrix,
    pub target_valence: ValenceVector,
    pub persuader_valence: Option<ValenceVector>,
    pub persuader_goal: Proposal,
    pub hidden: CellMask,
    pub witness: CellMask,
    pub p_init: Proposal,
    pub p_full: Proposal,
}

impl GameInstance {
    /// Target utilities when `revealed` (a subset of the hidden cells) has been disclosed truthfully.
    pub fn target_utilities(&self, revealed: CellMask) -> Result<Utilities, ModelError> {
        let known = knownness_from(self.hidden, revealed)?;
        Ok(utility_vector(&self.matrix, &self.target_valence, &known))
    }

    pub fn full_utilities(&self) -> Utilities {
        utility_vector(&self.matrix, &self.target_valence, &KnownnessMask::ALL_KNOWN)
    }

    /// The cells the target sees before any disclosure.
    pub fn visible(&self) -> CellMask {
        self.hidden.complement()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(p: usize, a: usize) -> Cell {
        Cell::try_from([p, a]).unwrap()
    }

    #[test]
    fn knownness_examples() {
        let all = knownness_from(CellMask::EMPTY, CellMask::EMPTY).unwrap();
        assert_eq!(all, KnownnessMask::ALL_KNOWN);

        let hidden: CellMask = [cell(0, 0), cell(1, 2), cell(2, 1), cell(2, 2)].into_iter().collect();
        assert_eq!(knownness_from(hidden, hidden).unwrap(), KnownnessMask::ALL_KNOWN);

        let revealed: CellMask = [cell(0, 0), cell(2, 2)].into_iter().collect();
        let k = knownness_from(hidden, revealed).unwrap();
        let ones = Cell::all()
            .filter(|c| !hidden.contains(*c) || revealed.contains(*c))
            .count();
        assert_eq!(ones, 7);
        assert_eq!(k.count(), 7);
    }

    #[test]
    fn knownness_rejects_revealed_outside_hidden() {
        let hidden: CellMask = [cell(0, 0)].into_iter().collect();
        let revealed: CellMask = [cell(1, 1)].into_iter().collect();
        assert!(matches!(
            knownness_from(hidden, revealed),
            Err(ModelError::RevealedNotHidden(..))
        ));
    }

    #[test]
    fn utility_examples() {
        let m = PayoffMatrix::from_values([[1, 1, -1], [-1, 0, 1], [0, -1, 1]]).unwrap();
        let zero = ValenceVector::from_values([0, 0, 0]).unwrap();
        assert_eq!(utility_vector(&m, &zero, &KnownnessMask::ALL_KNOWN), [0, 0, 0]);
        let first = ValenceVector::from_values([1, 0, 0]).unwrap();
        assert_eq!(utility_vector(&m, &first, &KnownnessMask::ALL_KNOWN), [1, -1, 0]);
    }

    #[test]
    fn choose_examples() {
        assert_eq!(choose(&[1, 1, 2], &[]), Proposal::C);
        assert_eq!(choose(&[2, 2, 1], &[Proposal::C, Proposal::B]), Proposal::B);
        assert_eq!(choose(&[0, 0, 0], &[]), Proposal::A);
        // earliest history member wins when the latest fell out of the argmax
        assert_eq!(
            choose(&[3, 1, 3], &[Proposal::C, Proposal::A, Proposal::B]),
            Proposal::C
        );
    }

    #[test]
    fn serde_shapes() {
        let m = PayoffMatrix::from_values([[1, 0, -1], [0, 0, 0], [1, 1, 1]]).unwrap();
        assert_eq!(serde_json::to_string(&m).unwrap(), "[[1,0,-1],[0,0,0],[1,1,1]]");
        let mask: CellMask = [cell(2, 1), cell(0, 2)].into_iter().collect();
        assert_eq!(serde_json::to_string(&mask).unwrap(), "[[0,2],[2,1]]");
        assert_eq!(serde_json::to_string(&Proposal::B).unwrap(), "\"B\"");
        assert!(serde_json::from_str::<Effect>("2").is_err());
        assert!(serde_json::from_str::<CellMask>("[[0,0],[0,0]]").is_err());
        assert!(serde_json::from_str::<CellMask>("[[3,0]]").is_err());
    }

    #[test]
    fn subsets_enumeration() {
        let mask: CellMask = [cell(0, 0), cell(1, 1), cell(2, 2), cell(0, 1)].into_iter().collect();
        let subs = mask.subsets();
        assert_eq!(subs.len(), 16);
        assert!(subs.iter().all(|s| s.is_subset(mask)));
        assert_eq!(subs[0], CellMask::EMPTY);
        assert_eq!(*subs.last().unwrap(), mask);
    }

    #[test]
    fn all_valences_distinct() {
        let all: Vec<_> = ValenceVector::all().collect();
        assert_eq!(all.len(), 27);
        let set: std::collections::HashSet<_> = all.iter().collect();
        assert_eq!(set.len(), 27);
    }

    #[test]
    fn proposal_label_bijection() {
        for p in Proposal::ALL {
            assert_eq!(Proposal::from_label(p.label()).unwrap(), p);
            assert_eq!(Proposal::from_index(p.index()).unwrap(), p);
        }
        assert!(Proposal::from_label("D").is_err());
    }
}
