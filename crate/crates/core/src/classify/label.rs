use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::tactile::ShapeKind;
use crate::Error;

pub const NUM_CLASSES: usize = 9;

/// Shape under the gel and whether sand is stuck around it, plus the empty gel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ClassLabel {
    TriangleClean,
    SquareClean,
    HexagonClean,
    CircleClean,
    TriangleSand,
    SquareSand,
    HexagonSand,
    CircleSand,
    ZeroContact,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; NUM_CLASSES] = [
        ClassLabel::TriangleClean,
        ClassLabel::SquareClean,
        ClassLabel::HexagonClean,
        ClassLabel::CircleClean,
        ClassLabel::TriangleSand,
        ClassLabel::SquareSand,
        ClassLabel::HexagonSand,
        ClassLabel::CircleSand,
        ClassLabel::ZeroContact,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn shape(self) -> Option<ShapeKind> {
        match self {
            ClassLabel::ZeroContact => None,
            other => Some(ShapeKind::ALL[other.index() % 4]),
        }
    }

    pub fn sandy(self) -> bool {
        matches!(
            self,
            ClassLabel::TriangleSand
                | ClassLabel::SquareSand
                | ClassLabel::HexagonSand
                | ClassLabel::CircleSand
        )
    }

    /// The same shape with the other sand state (`None` for the empty gel).
    pub fn twin(self) -> Option<Self> {
        match self {
            ClassLabel::ZeroContact => None,
            other => Self::from_index((other.index() + 4) % 8),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::TriangleClean => "TriangleClean",
            ClassLabel::SquareClean => "SquareClean",
            ClassLabel::HexagonClean => "HexagonClean",
            ClassLabel::CircleClean => "CircleClean",
            ClassLabel::TriangleSand => "TriangleSand",
            ClassLabel::SquareSand => "SquareSand",
            ClassLabel::HexagonSand => "HexagonSand",
            ClassLabel::CircleSand => "CircleSand",
            ClassLabel::ZeroContact => "ZeroContact",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Self::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::config(format!("unknown class label {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn nine_distinct_labels() {
        let names: BTreeSet<_> = ClassLabel::ALL.iter().map(|l| l.name()).collect();
        assert_eq!(names.len(), NUM_CLASSES);
        for (i, l) in ClassLabel::ALL.iter().enumerate() {
            assert_eq!(l.index(), i);
            assert_eq!(l.name().parse::<ClassLabel>().unwrap(), *l);
        }
    }

    #[test]
    fn twins_pair_clean_and_sand() {
        assert_eq!(
            ClassLabel::HexagonClean.twin(),
            Some(ClassLabel::HexagonSand)
        );
        assert_eq!(ClassLabel::CircleSand.twin(), Some(ClassLabel::CircleClean));
        assert_eq!(ClassLabel::ZeroContact.twin(), None);
        assert_eq!(ClassLabel::SquareSand.shape(), Some(ShapeKind::Square));
        assert!(ClassLabel::SquareSand.sandy() && !ClassLabel::SquareClean.sandy());
    }
}
