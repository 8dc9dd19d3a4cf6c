//! Bundled IEEE test systems (topologies from MATPOWER) and case loading.
//!
//! Built-in cases are addressed as `builtin:<name>`; anything else is read
//! as a path to a JSON case file.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::netmodel::{parse_case, Case, CaseError};

/// `(name, file contents)` of every bundled case.
pub const BUILTIN: &[(&str, &str)] = &[
    ("ieee6", include_str!("../cases/ieee6_full.json")),
    ("ieee14", include_str!("../cases/ieee14_full.json")),
    ("ieee14-sparse", include_str!("../cases/ieee14_sparse_reconstruction.json")),
    ("ieee57", include_str!("../cases/ieee57_full.json")),
    ("ieee118", include_str!("../cases/ieee118_full.json")),
    ("ieee118-2x", include_str!("../cases/ieee118_full2.json")),
];

const PREFIX: &str = "builtin:";

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("unknown built-in case `{0}` (known: {known})", known = builtin_names().join(", "))]
    UnknownBuiltin(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{origin}: {source}")]
    Invalid {
        origin: String,
        #[source]
        source: CaseError,
    },
}

pub fn builtin_names() -> Vec<&'static str> {
    BUILTIN.iter().map(|(n, _)| *n).collect()
}

/// A bundled case by bare name (`ieee14`) or prefixed (`builtin:ieee14`).
pub fn builtin(name: &str) -> Option<Case> {
    let name = name.strip_prefix(PREFIX).unwrap_or(name);
    BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| parse_case(text).expect("bundled case is valid"))
}

pub fn load_case(name_or_path: &str) -> Result<Case, LoadError> {
    if let Some(name) = name_or_path.strip_prefix(PREFIX) {
        return builtin(name).ok_or_else(|| LoadError::UnknownBuiltin(name.to_string()));
    }
    let text = fs::read_to_string(Path::new(name_or_path)).map_err(|source| LoadError::Io {
        path: name_or_path.to_string(),
        source,
    })?;
    parse_case(&text).map_err(|source| LoadError::Invalid {
        origin: name_or_path.to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_parses() {
        let sizes: Vec<(usize, usize, usize)> = BUILTIN
            .iter()
            .map(|(n, _)| {
                let c = builtin(n).unwrap();
                (c.network.bus_count(), c.network.lines().len(), c.measurements.len())
            })
            .collect();
        assert_eq!(
            sizes,
            vec![(6, 11, 17), (14, 20, 34), (14, 20, 15), (57, 80, 137), (118, 186, 304), (118, 186, 490)]
        );
    }

    #[test]
    fn load_errors_are_distinct() {
        assert!(matches!(load_case("builtin:nope"), Err(LoadError::UnknownBuiltin(_))));
        assert!(matches!(load_case("/definitely/missing.json"), Err(LoadError::Io { .. })));
        assert!(load_case("builtin:ieee6").is_ok());
    }
}
