//! Fixed label sets. Declaration order is part of the format: it drives
//! tie-breaks, output-layer indices and serialization.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Common surface of every closed label set.
pub trait Label: Copy + Eq + Ord + fmt::Debug + 'static {
    const ALL: &'static [Self];
    fn name(self) -> &'static str;
    fn index(self) -> usize;

    fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|l| l.name() == s)
    }

    fn count() -> usize {
        Self::ALL.len()
    }
}

macro_rules! label_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl Label for $name {
            const ALL: &'static [Self] = &[$(Self::$variant),+];

            fn name(self) -> &'static str {
                match self {
                    $(Self::$variant => $text),+
                }
            }

            fn index(self) -> usize {
                self as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                <Self as Label>::parse(s).ok_or_else(|| format!("unknown {} label `{}`", stringify!($name), s))
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.name())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

label_enum! {
    /// Utterance-level passenger intent.
    Intent {
        SetChangeDest => "SetChangeDest",
        SetChangeRoute => "SetChangeRoute",
        GoFaster => "GoFaster",
        GoSlower => "GoSlower",
        Stop => "Stop",
        Park => "Park",
        PullOver => "PullOver",
        DropOff => "DropOff",
        OpenDoor => "OpenDoor",
        Other => "Other",
    }
}

label_enum! {
    /// Per-token slot type; flat, no BIO prefixes.
    SlotLabel {
        Location => "Location",
        Position => "Position",
        Person => "Person",
        Object => "Object",
        TimeGuidance => "TimeGuidance",
        Gesture => "Gesture",
        None => "None",
    }
}

label_enum! {
    /// Per-token intent keyword flag.
    KeywordLabel {
        Intent => "Intent",
        NonIntent => "NonIntent",
    }
}

label_enum! {
    /// Token label of the joint model: the slot and keyword label sets
    /// side by side. Fusion picks the slot type when it is not `None`,
    /// else `Intent` for keywords, else `None`; `NonIntent` is never a
    /// fusion target.
    TokenLabel {
        Location => "Location",
        Position => "Position",
        Person => "Person",
        Object => "Object",
        TimeGuidance => "TimeGuidance",
        Gesture => "Gesture",
        None => "None",
        Intent => "Intent",
        NonIntent => "NonIntent",
    }
}

impl TokenLabel {
    pub fn fuse(slot: SlotLabel, keyword: KeywordLabel) -> Self {
        if slot != SlotLabel::None {
            Self::ALL[slot.index()]
        } else if keyword == KeywordLabel::Intent {
            Self::Intent
        } else {
            Self::None
        }
    }

    /// Slot view of a fused label.
    pub fn slot(self) -> SlotLabel {
        SlotLabel::from_index(self.index()).unwrap_or(SlotLabel::None)
    }

    /// Keyword view of a fused label.
    pub fn keyword(self) -> KeywordLabel {
        if self == Self::Intent {
            KeywordLabel::Intent
        } else {
            KeywordLabel::NonIntent
        }
    }
}

impl Intent {
    /// Catch-all class, used whenever there is no evidence to go on.
    pub const FALLBACK: Intent = Intent::Other;
}

/// Name used when a label appears in a rendered results table.
pub fn display_name<L: Label>(label: L) -> &'static str {
    match label.name() {
        "TimeGuidance" => "Time Guidance",
        "NonIntent" => "Non-Intent",
        "SetChangeDest" => "Set/ChangeDest",
        "SetChangeRoute" => "Set/ChangeRoute",
        other => other,
    }
}
