use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Color vocabulary shared by the simulator and the policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Red,
    Blue,
    Green,
    Yellow,
    Brown,
    Gray,
    Cyan,
    Orange,
    Purple,
    Pink,
    White,
}

pub const BACKGROUND: [u8; 3] = [128, 128, 128];

impl Color {
    pub const ALL: [Color; 11] = [
        Color::Red,
        Color::Blue,
        Color::Green,
        Color::Yellow,
        Color::Brown,
        Color::Gray,
        Color::Cyan,
        Color::Orange,
        Color::Purple,
        Color::Pink,
        Color::White,
    ];

    pub const C_ALL: [Color; 3] = [Color::Red, Color::Blue, Color::Green];
    pub const C_SEEN: [Color; 4] = [Color::Yellow, Color::Brown, Color::Gray, Color::Cyan];
    pub const C_UNSEEN: [Color; 4] = [Color::Orange, Color::Purple, Color::Pink, Color::White];

    // Unseen colors sit close to seen ones (orange between red and yellow,
    // purple near blue, pink near red) so a model trained on the seen set
    // responds to them with competing peaks.
    pub const fn rgb(self) -> [u8; 3] {
        match self {
            Color::Red => [220, 30, 30],
            Color::Blue => [30, 60, 220],
            Color::Green => [30, 180, 50],
            Color::Yellow => [240, 220, 40],
            Color::Brown => [140, 80, 30],
            Color::Gray => [60, 60, 60],
            Color::Cyan => [40, 210, 220],
            Color::Orange => [240, 130, 20],
            Color::Purple => [140, 40, 180],
            Color::Pink => [240, 120, 170],
            Color::White => [240, 240, 240],
        }
    }

    pub const fn token(self) -> &'static str {
        match self {
            Color::Red => "red",
            Color::Blue => "blue",
            Color::Green => "green",
            Color::Yellow => "yellow",
            Color::Brown => "brown",
            Color::Gray => "gray",
            Color::Cyan => "cyan",
            Color::Orange => "orange",
            Color::Purple => "purple",
            Color::Pink => "pink",
            Color::White => "white",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_rgb(rgb: [u8; 3]) -> Option<Color> {
        Color::ALL.into_iter().find(|c| c.rgb() == rgb)
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Color {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Color::ALL.into_iter().find(|c| c.token() == s).ok_or_else(|| Error::UnknownToken(s.to_string()))
    }
}

/// Which color pool scenes draw from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorMode {
    /// `C_all ∪ C_seen`
    Seen,
    /// `C_all ∪ C_unseen`
    Unseen,
}

impl ColorMode {
    pub fn palette(self) -> Vec<Color> {
        let extra: &[Color] = match self {
            ColorMode::Seen => &Color::C_SEEN,
            ColorMode::Unseen => &Color::C_UNSEEN,
        };
        Color::C_ALL.iter().chain(extra).copied().collect()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ColorMode::Seen => "seen",
            ColorMode::Unseen => "unseen",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sets_are_disjoint_and_cover_vocabulary() {
        let mut all: Vec<Color> = Color::C_ALL.iter().chain(&Color::C_SEEN).chain(&Color::C_UNSEEN).copied().collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 11);
        assert_eq!(all, Color::ALL.to_vec());
    }

    #[test]
    fn rgb_values_are_unique_and_not_background() {
        for a in Color::ALL {
            assert_ne!(a.rgb(), BACKGROUND);
            assert_eq!(Color::from_rgb(a.rgb()), Some(a));
        }
    }

    #[test]
    fn token_round_trip() {
        for c in Color::ALL {
            assert_eq!(c.token().parse::<Color>().unwrap(), c);
        }
        assert!(matches!("teal".parse::<Color>(), Err(Error::UnknownToken(_))));
    }
}
