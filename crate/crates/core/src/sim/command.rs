use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::Color;

const PREFIX: &str = "Pick the ";
const MIDDLE: &str = " box and place it in the ";
const SUFFIX: &str = " bowl.";

/// Templated language command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Command {
    pub pick: Color,
    pub place: Color,
}

impl Command {
    pub fn new(pick: Color, place: Color) -> Self {
        Command { pick, place }
    }

    pub fn text(&self) -> String {
        format!("{PREFIX}{}{MIDDLE}{}{SUFFIX}", self.pick, self.place)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let malformed = || Error::invalid(format!("command does not match template: {text:?}"));
        let rest = text.strip_prefix(PREFIX).ok_or_else(malformed)?;
        let rest = rest.strip_suffix(SUFFIX).ok_or_else(malformed)?;
        let (pick, place) = rest.split_once(MIDDLE).ok_or_else(malformed)?;
        Ok(Command { pick: pick.parse()?, place: place.parse()? })
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text())
    }
}

impl TryFrom<String> for Command {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        Command::parse(&s)
    }
}

impl From<Command> for String {
    fn from(c: Command) -> String {
        c.text()
    }
}
