//! Body segments and their degrees of freedom.

use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SegmentId {
    Cou,
    Tete,
    Epaules,
    Buste,
}

impl SegmentId {
    pub const ALL: [SegmentId; 4] = [SegmentId::Cou, SegmentId::Tete, SegmentId::Epaules, SegmentId::Buste];

    pub fn as_str(self) -> &'static str {
        match self {
            SegmentId::Cou => "COU",
            SegmentId::Tete => "TETE",
            SegmentId::Epaules => "EPAULES",
            SegmentId::Buste => "BUSTE",
        }
    }

    /// Whether ABDADD/RINREX on this segment may carry a left/right side.
    ///
    /// EPAULES accepts a side flag but nothing downstream interprets it.
    pub fn allows_side(self) -> bool {
        !matches!(self, SegmentId::Tete)
    }
}

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SegmentId {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SegmentId::ALL.into_iter().find(|seg| seg.as_str() == s).ok_or(())
    }
}

/// One rotational direction with two opposite senses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DofKind {
    FlxExt,
    AbdAdd,
    RinRex,
}

impl DofKind {
    pub const ALL: [DofKind; 3] = [DofKind::FlxExt, DofKind::AbdAdd, DofKind::RinRex];

    pub fn as_str(self) -> &'static str {
        match self {
            DofKind::FlxExt => "FLXEXT",
            DofKind::AbdAdd => "ABDADD",
            DofKind::RinRex => "RINREX",
        }
    }

    /// Mnemonics for the positive and negative senses, e.g. `("FLX", "EXT")`.
    pub fn senses(self) -> (&'static str, &'static str) {
        match self {
            DofKind::FlxExt => ("FLX", "EXT"),
            DofKind::AbdAdd => ("ABD", "ADD"),
            DofKind::RinRex => ("RIN", "REX"),
        }
    }
}

impl FromStr for DofKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DofKind::ALL.into_iter().find(|d| d.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Side {
    Left,
    Right,
    #[default]
    None,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "LEFT",
            Side::Right => "RIGHT",
            Side::None => "NONE",
        }
    }
}

impl FromStr for Side {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "LEFT" => Ok(Side::Left),
            "RIGHT" => Ok(Side::Right),
            "NONE" => Ok(Side::None),
            _ => Err(()),
        }
    }
}

/// A degree of freedom with its optional side qualifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DofId {
    pub kind: DofKind,
    #[serde(default)]
    pub side: Side,
}

impl DofId {
    pub const FLXEXT: DofId = DofId { kind: DofKind::FlxExt, side: Side::None };

    pub fn new(kind: DofKind, side: Side) -> Self {
        DofId { kind, side }
    }

    /// FLXEXT is never sided; sided ABDADD/RINREX only on segments that allow it.
    pub fn is_legal_on(self, segment: SegmentId) -> bool {
        match (self.kind, self.side) {
            (_, Side::None) => true,
            (DofKind::FlxExt, _) => false,
            _ => segment.allows_side(),
        }
    }
}

impl fmt::Display for DofId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.as_str())?;
        if self.side != Side::None {
            write!(f, ":{}", self.side.as_str())?;
        }
        Ok(())
    }
}

impl FromStr for DofId {
    type Err = ();

    /// Parses the [`Display`](fmt::Display) form, e.g. `FLXEXT` or `ABDADD:LEFT`.
    fn from_str(s: &str) -> Result<Self, ()> {
        match s.split_once(':') {
            None => Ok(DofId::new(s.parse()?, Side::None)),
            Some((kind, side)) => {
                let side: Side = side.parse()?;
                if side == Side::None {
                    return Err(());
                }
                Ok(DofId::new(kind.parse()?, side))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn dof_text_round_trip() {
        for kind in DofKind::ALL {
            for side in [Side::None, Side::Left, Side::Right] {
                let dof = DofId::new(kind, side);
                assert_eq!(dof.to_string().parse::<DofId>(), Ok(dof));
            }
        }
        assert!("FLXEXT:NONE".parse::<DofId>().is_err());
        assert!("FLXEXT:".parse::<DofId>().is_err());
    }

    #[test]
    fn side_legality() {
        assert!(DofId::FLXEXT.is_legal_on(SegmentId::Cou));
        assert!(!DofId::new(DofKind::FlxExt, Side::Left).is_legal_on(SegmentId::Cou));
        assert!(DofId::new(DofKind::AbdAdd, Side::Left).is_legal_on(SegmentId::Cou));
        assert!(DofId::new(DofKind::RinRex, Side::Right).is_legal_on(SegmentId::Buste));
        assert!(!DofId::new(DofKind::RinRex, Side::Right).is_legal_on(SegmentId::Tete));
        assert!(DofId::new(DofKind::AbdAdd, Side::Right).is_legal_on(SegmentId::Epaules));
    }

    #[test]
    fn names_parse_back() {
        for seg in SegmentId::ALL {
            assert_eq!(seg.as_str().parse::<SegmentId>(), Ok(seg));
        }
        for dof in DofKind::ALL {
            assert_eq!(dof.as_str().parse::<DofKind>(), Ok(dof));
        }
        assert!("NECK".parse::<SegmentId>().is_err());
    }
}
