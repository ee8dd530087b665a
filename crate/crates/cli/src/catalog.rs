//! Built-in problems, embedded from `catalog/*.problem`.

use crate::spec::ProblemSpec;

macro_rules! catalog {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../catalog/", $name, ".problem")))),*]
    };
}

/// `(name, file text)` pairs.
pub const ENTRIES: &[(&str, &str)] = catalog![
    "free_particle",
    "sho",
    "pendulum",
    "martinet",
    "rigid_body",
    "so3_lie_poisson",
    "lq_pontryagin",
    "knife_edge",
    "discrete_free_particle",
    "discrete_sho",
    "discrete_lqr",
    "discrete_planar_pendulum",
    "so3_discrete_lie_poisson",
    "pair_groupoid_del",
];

pub fn text(name: &str) -> Option<&'static str> {
    ENTRIES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    ENTRIES.iter().map(|(n, _)| *n)
}

pub fn load(name: &str) -> Option<ProblemSpec> {
    text(name).map(|t| ProblemSpec::parse(t).expect("catalog entries parse"))
}

/// One-line description from the entry's `description` key.
pub fn description(name: &str) -> Option<String> {
    load(name).map(|s| s.description().unwrap_or_default().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_entry_parses_and_is_named_after_itself() {
        for (name, text) in ENTRIES {
            let spec = ProblemSpec::parse(text).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(spec.name(), Some(*name));
            assert!(!spec.description().unwrap_or_default().is_empty());
        }
    }
}
