use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The five basic single-subject filming styles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StyleLabel {
    FlyThrough,
    FlyBy,
    Follow,
    Orbiting,
    SuperDolly,
}

impl StyleLabel {
    pub const COUNT: usize = 5;
    pub const ALL: [StyleLabel; 5] = [
        StyleLabel::FlyThrough,
        StyleLabel::FlyBy,
        StyleLabel::Follow,
        StyleLabel::Orbiting,
        StyleLabel::SuperDolly,
    ];
    /// Row order of the per-style action error table.
    pub const TABLE_ORDER: [StyleLabel; 5] = [
        StyleLabel::FlyBy,
        StyleLabel::FlyThrough,
        StyleLabel::Orbiting,
        StyleLabel::Follow,
        StyleLabel::SuperDolly,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            StyleLabel::FlyThrough => "fly-through",
            StyleLabel::FlyBy => "fly-by",
            StyleLabel::Follow => "follow",
            StyleLabel::Orbiting => "orbiting",
            StyleLabel::SuperDolly => "super-dolly",
        }
    }

    pub fn one_hot(self) -> [f64; 5] {
        let mut y = [0.0; 5];
        y[self.index()] = 1.0;
        y
    }

    /// Whether the generator keeps the camera aimed at the subject.
    pub fn is_aimed(self) -> bool {
        !matches!(self, StyleLabel::FlyThrough)
    }
}

impl fmt::Display for StyleLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StyleLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|l| l.name() == norm || l.name().replace('-', "") == norm)
            .ok_or_else(|| Error::Argument(format!("unknown style `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in StyleLabel::ALL {
            assert_eq!(s.name().parse::<StyleLabel>().unwrap(), s);
            assert_eq!(StyleLabel::from_index(s.index()), Some(s));
            assert_eq!(s.one_hot().iter().sum::<f64>(), 1.0);
        }
        assert_eq!("superdolly".parse::<StyleLabel>().unwrap(), StyleLabel::SuperDolly);
        assert!("pan".parse::<StyleLabel>().is_err());
    }
}
