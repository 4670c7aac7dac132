use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// How the outputs of several classifiers are fused on the common frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// DS-layer mass functions, vacuously extended and combined by Dempster's rule.
    Mfe,
    /// Softmax outputs read as Bayesian mass functions, extended and combined.
    Pmf,
    /// Extended DS-layer masses flattened to probabilities, then multiplied.
    Bf,
    /// Concatenated features into a softmax over the common frame.
    Pfc,
    /// Concatenated features into a DS layer over the common frame.
    Efc,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [Strategy::Mfe, Strategy::Pmf, Strategy::Bf, Strategy::Pfc, Strategy::Efc];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Mfe => "mfe",
            Strategy::Pmf => "pmf",
            Strategy::Bf => "bf",
            Strategy::Pfc => "pfc",
            Strategy::Efc => "efc",
        }
    }

    /// Whether member classifiers must carry DS-layer heads.
    pub fn needs_evidential_members(self) -> bool {
        matches!(self, Strategy::Mfe | Strategy::Bf)
    }

    pub fn has_joint_head(self) -> bool {
        matches!(self, Strategy::Pfc | Strategy::Efc)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown strategy `{s}` (expected mfe, pmf, bf, pfc or efc)"))
    }
}
