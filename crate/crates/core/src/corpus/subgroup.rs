use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Demographics, Gender, Race, TriState};
use crate::Error;

/// A demographic dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Axis {
    Gender,
    Race,
    Ell,
    Disability,
    Economic,
}

impl Axis {
    pub const ALL: [Axis; 5] = [Axis::Gender, Axis::Race, Axis::Ell, Axis::Disability, Axis::Economic];

    pub fn name(self) -> &'static str {
        match self {
            Axis::Gender => "gender",
            Axis::Race => "race",
            Axis::Ell => "ell",
            Axis::Disability => "disability",
            Axis::Economic => "economic",
        }
    }

    pub fn keys(self) -> Vec<SubgroupKey> {
        match self {
            Axis::Gender => Gender::ALL.iter().map(|&g| SubgroupKey::Gender(g)).collect(),
            Axis::Race => Race::ALL.iter().map(|&r| SubgroupKey::Race(r)).collect(),
            Axis::Ell => TriState::ALL.iter().map(|&t| SubgroupKey::Ell(t)).collect(),
            Axis::Disability => TriState::ALL.iter().map(|&t| SubgroupKey::Disability(t)).collect(),
            Axis::Economic => TriState::ALL.iter().map(|&t| SubgroupKey::Economic(t)).collect(),
        }
    }
}

/// One category on one axis, including the `Unknown` categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SubgroupKey {
    Gender(Gender),
    Race(Race),
    Ell(TriState),
    Disability(TriState),
    Economic(TriState),
}

impl SubgroupKey {
    /// Every key on every axis, axis-major.
    pub fn all() -> Vec<SubgroupKey> {
        Axis::ALL.iter().flat_map(|a| a.keys()).collect()
    }

    pub fn axis(self) -> Axis {
        match self {
            SubgroupKey::Gender(_) => Axis::Gender,
            SubgroupKey::Race(_) => Axis::Race,
            SubgroupKey::Ell(_) => Axis::Ell,
            SubgroupKey::Disability(_) => Axis::Disability,
            SubgroupKey::Economic(_) => Axis::Economic,
        }
    }

    pub fn value_label(self) -> &'static str {
        match self {
            SubgroupKey::Gender(g) => g.label(),
            SubgroupKey::Race(r) => r.code(),
            SubgroupKey::Ell(t) | SubgroupKey::Disability(t) | SubgroupKey::Economic(t) => t.label(),
        }
    }

    /// Human-readable row label for report tables.
    pub fn description(self) -> String {
        match self {
            SubgroupKey::Gender(g) => g.label().to_string(),
            SubgroupKey::Race(r) => r.description().to_string(),
            SubgroupKey::Ell(TriState::Yes) => "English Language Learner".into(),
            SubgroupKey::Ell(TriState::No) => "Native English Speaker".into(),
            SubgroupKey::Disability(TriState::Yes) => "With Disability".into(),
            SubgroupKey::Disability(TriState::No) => "No Disability".into(),
            SubgroupKey::Economic(TriState::Yes) => "Economically Disadvantaged".into(),
            SubgroupKey::Economic(TriState::No) => "No Economic Disadvantage".into(),
            other => format!("{} Unknown", other.axis().name()),
        }
    }

    /// The key of `d` on `axis`.
    pub fn of(d: &Demographics, axis: Axis) -> SubgroupKey {
        match axis {
            Axis::Gender => SubgroupKey::Gender(d.gender),
            Axis::Race => SubgroupKey::Race(d.race),
            Axis::Ell => SubgroupKey::Ell(d.ell),
            Axis::Disability => SubgroupKey::Disability(d.disability),
            Axis::Economic => SubgroupKey::Economic(d.econ_disadvantage),
        }
    }

    pub fn matches(self, d: &Demographics) -> bool {
        SubgroupKey::of(d, self.axis()) == self
    }
}

impl fmt::Display for SubgroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.axis().name(), self.value_label())
    }
}

impl FromStr for SubgroupKey {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        let (axis, value) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("subgroup `{s}` is not axis=value")))?;
        let value = value.trim();
        let unknown = value.eq_ignore_ascii_case("unknown");
        let tri = |v: &str| {
            let t = TriState::parse_lenient(v);
            if t == TriState::Unknown && !unknown {
                Err(Error::Config(format!("bad flag value `{v}` in `{s}`")))
            } else {
                Ok(t)
            }
        };
        match axis.trim().to_ascii_lowercase().as_str() {
            "gender" => {
                let g = Gender::parse_lenient(value);
                if g == Gender::Unknown && !unknown {
                    return Err(Error::Config(format!("bad gender `{value}`")));
                }
                Ok(SubgroupKey::Gender(g))
            }
            "race" => {
                let r = Race::parse_lenient(value);
                if r == Race::Unknown && !unknown {
                    return Err(Error::Config(format!("bad race `{value}`")));
                }
                Ok(SubgroupKey::Race(r))
            }
            "ell" => Ok(SubgroupKey::Ell(tri(value)?)),
            "disability" => Ok(SubgroupKey::Disability(tri(value)?)),
            "economic" | "econ" => Ok(SubgroupKey::Economic(tri(value)?)),
            other => Err(Error::Config(format!("unknown demographic axis `{other}`"))),
        }
    }
}

impl TryFrom<String> for SubgroupKey {
    type Error = Error;
    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}

impl From<SubgroupKey> for String {
    fn from(k: SubgroupKey) -> String {
        k.to_string()
    }
}
