//! The seven null-model kinds and their static properties.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Null-model kind, named by the acronym the CLI accepts.
///
/// Binary models constrain link counts, weighted models constrain link
/// weights, and the reciprocal ones split directed pair content into
/// non-reciprocated and reciprocated parts. `Uecm` constrains degrees
/// and strengths jointly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    #[serde(rename = "UBCM")]
    Ubcm,
    #[serde(rename = "DBCM")]
    Dbcm,
    #[serde(rename = "RBCM")]
    Rbcm,
    #[serde(rename = "UWCM")]
    Uwcm,
    #[serde(rename = "DWCM")]
    Dwcm,
    #[serde(rename = "RWCM")]
    Rwcm,
    #[serde(rename = "UECM")]
    Uecm,
}

pub const ALL_MODELS: [Model; 7] = [
    Model::Ubcm,
    Model::Dbcm,
    Model::Rbcm,
    Model::Uwcm,
    Model::Dwcm,
    Model::Rwcm,
    Model::Uecm,
];

impl Model {
    pub fn acronym(self) -> &'static str {
        match self {
            Model::Ubcm => "UBCM",
            Model::Dbcm => "DBCM",
            Model::Rbcm => "RBCM",
            Model::Uwcm => "UWCM",
            Model::Dwcm => "DWCM",
            Model::Rwcm => "RWCM",
            Model::Uecm => "UECM",
        }
    }

    /// Number of constraint vectors (and parameter vectors) per node.
    pub fn arity(self) -> usize {
        match self {
            Model::Ubcm | Model::Uwcm => 1,
            Model::Dbcm | Model::Dwcm | Model::Uecm => 2,
            Model::Rbcm | Model::Rwcm => 3,
        }
    }

    pub fn directed(self) -> bool {
        matches!(self, Model::Dbcm | Model::Rbcm | Model::Dwcm | Model::Rwcm)
    }

    pub fn weighted(self) -> bool {
        matches!(self, Model::Uwcm | Model::Dwcm | Model::Rwcm | Model::Uecm)
    }

    /// Column labels of the constraint vectors, in file order.
    pub fn constraint_names(self) -> &'static [&'static str] {
        match self {
            Model::Ubcm => &["k"],
            Model::Dbcm => &["k_out", "k_in"],
            Model::Rbcm => &["k_right", "k_left", "k_recip"],
            Model::Uwcm => &["s"],
            Model::Dwcm => &["s_out", "s_in"],
            Model::Rwcm => &["s_right", "s_left", "s_recip"],
            Model::Uecm => &["k", "s"],
        }
    }

    /// Parameter vectors in use: x always, y for arity >= 2, z for arity 3.
    pub fn uses_y(self) -> bool {
        self.arity() >= 2
    }

    pub fn uses_z(self) -> bool {
        self.arity() == 3
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.acronym())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_uppercase().as_str() {
            "UBCM" => Ok(Model::Ubcm),
            "DBCM" => Ok(Model::Dbcm),
            "RBCM" => Ok(Model::Rbcm),
            "UWCM" => Ok(Model::Uwcm),
            "DWCM" => Ok(Model::Dwcm),
            "RWCM" => Ok(Model::Rwcm),
            "UECM" => Ok(Model::Uecm),
            other => Err(Error::InvalidArgument(format!(
                "unknown model acronym '{other}' (valid: UBCM, DBCM, RBCM, UWCM, DWCM, RWCM, UECM)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn acronym_round_trip() {
        for m in ALL_MODELS {
            assert_eq!(m.acronym().parse::<Model>().unwrap(), m);
        }
    }

    #[test]
    fn unknown_acronym_lists_valid_ones() {
        let err = "XBCM".parse::<Model>().unwrap_err().to_string();
        for m in ALL_MODELS {
            assert!(err.contains(m.acronym()), "{err}");
        }
    }

    #[test]
    fn arity_table() {
        assert_eq!(Model::Ubcm.arity(), 1);
        assert_eq!(Model::Uecm.arity(), 2);
        assert_eq!(Model::Rwcm.arity(), 3);
        assert!(Model::Rwcm.directed() && Model::Rwcm.weighted());
        assert!(!Model::Ubcm.weighted() && !Model::Ubcm.directed());
    }
}
