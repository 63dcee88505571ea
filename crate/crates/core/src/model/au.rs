use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::ModelError;

/// One of the twenty facial Action Units the detector predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionUnit {
    InnerBrowRaiser,
    OuterBrowRaiser,
    BrowLowerer,
    UpperLidRaiser,
    CheekRaiser,
    LidTightener,
    NoseWrinkler,
    UpperLipRaiser,
    NasolabialDeepener,
    LipCornerPuller,
    Dimpler,
    LipCornerDepressor,
    ChinRaiser,
    LipStretcher,
    LipTightener,
    LipPressor,
    LipsPart,
    JawDrop,
    LipSuck,
    EyesClosed,
}

/// Number of Action Units in the catalog.
pub const AU_COUNT: usize = 20;

impl ActionUnit {
    /// The full catalog in ascending code order. The position of a unit in
    /// this array is its [`index`](Self::index).
    pub const ALL: [ActionUnit; AU_COUNT] = [
        ActionUnit::InnerBrowRaiser,
        ActionUnit::OuterBrowRaiser,
        ActionUnit::BrowLowerer,
        ActionUnit::UpperLidRaiser,
        ActionUnit::CheekRaiser,
        ActionUnit::LidTightener,
        ActionUnit::NoseWrinkler,
        ActionUnit::UpperLipRaiser,
        ActionUnit::NasolabialDeepener,
        ActionUnit::LipCornerPuller,
        ActionUnit::Dimpler,
        ActionUnit::LipCornerDepressor,
        ActionUnit::ChinRaiser,
        ActionUnit::LipStretcher,
        ActionUnit::LipTightener,
        ActionUnit::LipPressor,
        ActionUnit::LipsPart,
        ActionUnit::JawDrop,
        ActionUnit::LipSuck,
        ActionUnit::EyesClosed,
    ];

    /// FACS code, e.g. 12 for the lip corner puller.
    pub fn code(self) -> u8 {
        use ActionUnit::*;
        match self {
            InnerBrowRaiser => 1,
            OuterBrowRaiser => 2,
            BrowLowerer => 4,
            UpperLidRaiser => 5,
            CheekRaiser => 6,
            LidTightener => 7,
            NoseWrinkler => 9,
            UpperLipRaiser => 10,
            NasolabialDeepener => 11,
            LipCornerPuller => 12,
            Dimpler => 14,
            LipCornerDepressor => 15,
            ChinRaiser => 17,
            LipStretcher => 20,
            LipTightener => 23,
            LipPressor => 24,
            LipsPart => 25,
            JawDrop => 26,
            LipSuck => 28,
            EyesClosed => 43,
        }
    }

    pub fn name(self) -> &'static str {
        use ActionUnit::*;
        match self {
            InnerBrowRaiser => "Inner Brow Raiser",
            OuterBrowRaiser => "Outer Brow Raiser",
            BrowLowerer => "Brow Lowerer",
            UpperLidRaiser => "Upper Lid Raiser",
            CheekRaiser => "Cheek Raiser",
            LidTightener => "Lid Tightener",
            NoseWrinkler => "Nose Wrinkler",
            UpperLipRaiser => "Upper Lip Raiser",
            NasolabialDeepener => "Nasolabial Deepener",
            LipCornerPuller => "Lip Corner Puller",
            Dimpler => "Dimpler",
            LipCornerDepressor => "Lip Corner Depressor",
            ChinRaiser => "Chin Raiser",
            LipStretcher => "Lip Stretcher",
            LipTightener => "Lip Tightener",
            LipPressor => "Lip Pressor",
            LipsPart => "Lips Part",
            JawDrop => "Jaw Drop",
            LipSuck => "Lip Suck",
            EyesClosed => "Eyes Closed",
        }
    }

    /// Position in [`ActionUnit::ALL`], 0..20.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<ActionUnit> {
        Self::ALL.get(index).copied()
    }

    pub fn from_code(code: u32) -> Result<ActionUnit, ModelError> {
        Self::ALL
            .iter()
            .copied()
            .find(|au| u32::from(au.code()) == code)
            .ok_or(ModelError::UnknownAuCode(code))
    }
}

impl fmt::Display for ActionUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AU{}", self.code())
    }
}

impl Serialize for ActionUnit {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.code())
    }
}

impl<'de> Deserialize<'de> for ActionUnit {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let code = u32::deserialize(deserializer)?;
        ActionUnit::from_code(code).map_err(serde::de::Error::custom)
    }
}

/// An unordered set of Action Units, stored as a 20-bit mask over the
/// catalog indices.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct AuSet(u32);

impl AuSet {
    const FULL_MASK: u32 = (1 << AU_COUNT) - 1;

    pub const fn empty() -> AuSet {
        AuSet(0)
    }

    pub const fn full() -> AuSet {
        AuSet(Self::FULL_MASK)
    }

    /// Builds a set from FACS codes, collapsing duplicates.
    pub fn from_codes<I>(codes: I) -> Result<AuSet, ModelError>
    where
        I: IntoIterator,
        I::Item: Into<u32>,
    {
        codes.into_iter().try_fold(AuSet::empty(), |set, code| {
            Ok(set.with(ActionUnit::from_code(code.into())?))
        })
    }

    /// Builds a set from a raw catalog-index bitmask; bits above the
    /// catalog are dropped.
    pub fn from_bits(bits: u32) -> AuSet {
        AuSet(bits & Self::FULL_MASK)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn with(self, au: ActionUnit) -> AuSet {
        AuSet(self.0 | (1 << au.index()))
    }

    pub fn without(self, au: ActionUnit) -> AuSet {
        AuSet(self.0 & !(1 << au.index()))
    }

    pub fn insert(&mut self, au: ActionUnit) {
        *self = self.with(au);
    }

    pub fn contains(self, au: ActionUnit) -> bool {
        self.0 & (1 << au.index()) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: AuSet) -> AuSet {
        AuSet(self.0 | other.0)
    }

    pub fn intersection(self, other: AuSet) -> AuSet {
        AuSet(self.0 & other.0)
    }

    /// Members of `self` that are not in `other`.
    pub fn difference(self, other: AuSet) -> AuSet {
        AuSet(self.0 & !other.0)
    }

    pub fn symmetric_difference(self, other: AuSet) -> AuSet {
        AuSet(self.0 ^ other.0)
    }

    pub fn is_subset(self, other: AuSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Members in ascending code order.
    pub fn iter(self) -> impl Iterator<Item = ActionUnit> {
        ActionUnit::ALL
            .into_iter()
            .filter(move |au| self.contains(*au))
    }

    pub fn codes(self) -> Vec<u8> {
        self.iter().map(ActionUnit::code).collect()
    }
}

impl FromIterator<ActionUnit> for AuSet {
    fn from_iter<I: IntoIterator<Item = ActionUnit>>(iter: I) -> Self {
        iter.into_iter().fold(AuSet::empty(), AuSet::with)
    }
}

impl fmt::Debug for AuSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set()
            .entries(self.iter().map(|au| au.code()))
            .finish()
    }
}

impl fmt::Display for AuSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, au) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{au}")?;
        }
        f.write_str("}")
    }
}

impl Serialize for AuSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter().map(ActionUnit::code))
    }
}

impl<'de> Deserialize<'de> for AuSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let codes = Vec::<u32>::deserialize(deserializer)?;
        AuSet::from_codes(codes).map_err(serde::de::Error::custom)
    }
}
