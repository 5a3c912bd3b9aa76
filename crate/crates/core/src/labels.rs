//! Class vocabularies of the three recognition stages.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

macro_rules! label_enum {
    ($(#[$meta:meta])* $name:ident, $what:literal { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];
            pub const COUNT: usize = Self::ALL.len();

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            pub fn index(self) -> usize {
                self as usize
            }

            pub fn from_index(i: usize) -> Option<$name> {
                Self::ALL.get(i).copied()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Error> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::Domain(format!("unknown {} label `{other}`", $what))),
                }
            }
        }
    };
}

label_enum! {
    /// Common activities recognized by the first stage.
    AdlLabel, "activity" {
        Walking => "walking",
        Running => "running",
        Standing => "standing",
        GoingUpstairs => "going_upstairs",
        GoingDownstairs => "going_downstairs",
    }
}

label_enum! {
    /// Acoustic environments recognized by the second stage.
    EnvLabel, "environment" {
        Bar => "bar",
        Classroom => "classroom",
        Gym => "gym",
        Kitchen => "kitchen",
        Library => "library",
        Street => "street",
        Hall => "hall",
        WatchingTvRoom => "watching_tv_room",
        Bedroom => "bedroom",
    }
}

label_enum! {
    /// Refinements of `standing` recognized by the third stage.
    ///
    /// `WatchingTv` is unrelated to [`EnvLabel::WatchingTvRoom`]; the two live in
    /// separate namespaces.
    StandingLabel, "standing activity" {
        WatchingTv => "watching_tv",
        Sleeping => "sleeping",
        Driving => "driving",
    }
}

/// One of the three recognition stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Adl,
    Env,
    Standing,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Adl, Stage::Env, Stage::Standing];

    /// 1-based position in the hierarchy.
    pub fn index(self) -> usize {
        match self {
            Stage::Adl => 1,
            Stage::Env => 2,
            Stage::Standing => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Adl => "adl",
            Stage::Env => "env",
            Stage::Standing => "standing",
        }
    }

    pub fn class_count(self) -> usize {
        match self {
            Stage::Adl => AdlLabel::COUNT,
            Stage::Env => EnvLabel::COUNT,
            Stage::Standing => StandingLabel::COUNT,
        }
    }

    pub fn class_names(self) -> Vec<&'static str> {
        match self {
            Stage::Adl => AdlLabel::ALL.iter().map(|l| l.as_str()).collect(),
            Stage::Env => EnvLabel::ALL.iter().map(|l| l.as_str()).collect(),
            Stage::Standing => StandingLabel::ALL.iter().map(|l| l.as_str()).collect(),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "adl" => Ok(Stage::Adl),
            "env" => Ok(Stage::Env),
            "standing" => Ok(Stage::Standing),
            other => Err(Error::Domain(format!("unknown stage `{other}`"))),
        }
    }
}

/// Ground truth attached to a window, one slot per stage namespace.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adl: Option<AdlLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env: Option<EnvLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standing: Option<StandingLabel>,
}

impl Labels {
    /// Class index of this window for `stage`, if labelled.
    pub fn class_index(&self, stage: Stage) -> Option<usize> {
        match stage {
            Stage::Adl => self.adl.map(AdlLabel::index),
            Stage::Env => self.env.map(EnvLabel::index),
            Stage::Standing => self.standing.map(StandingLabel::index),
        }
    }
}
