//! Built-in experiments, one or more per acceptance criterion.

pub const PRESETS: &[(&str, &str)] = &[
    (
        "c01-asep-single-shock",
        include_str!("../presets/c01-asep-single-shock.toml"),
    ),
    (
        "c01-asep-single-shock-negative",
        include_str!("../presets/c01-asep-single-shock-negative.toml"),
    ),
    (
        "c02-blp-single-shock",
        include_str!("../presets/c02-blp-single-shock.toml"),
    ),
    (
        "c02-gzrp-single-shock",
        include_str!("../presets/c02-gzrp-single-shock.toml"),
    ),
    (
        "c03-asep-multi-shock",
        include_str!("../presets/c03-asep-multi-shock.toml"),
    ),
    (
        "c03-asep-multi-shock-negative",
        include_str!("../presets/c03-asep-multi-shock-negative.toml"),
    ),
    (
        "c03-blp-multi-shock",
        include_str!("../presets/c03-blp-multi-shock.toml"),
    ),
    (
        "c03-blp-multi-shock-negative",
        include_str!("../presets/c03-blp-multi-shock-negative.toml"),
    ),
    ("c04-bcrw-shock", include_str!("../presets/c04-bcrw-shock.toml")),
    (
        "c04-bcrw-shock-mirror",
        include_str!("../presets/c04-bcrw-shock-mirror.toml"),
    ),
    (
        "c04-bcrw-shock-negative",
        include_str!("../presets/c04-bcrw-shock-negative.toml"),
    ),
    (
        "c05-asep-proof-terms",
        include_str!("../presets/c05-asep-proof-terms.toml"),
    ),
    (
        "c05-blp-proof-terms",
        include_str!("../presets/c05-blp-proof-terms.toml"),
    ),
    (
        "c05-gzrp-proof-terms",
        include_str!("../presets/c05-gzrp-proof-terms.toml"),
    ),
    (
        "c06-asep-stationary",
        include_str!("../presets/c06-asep-stationary.toml"),
    ),
    (
        "c06-bcrw-stationary",
        include_str!("../presets/c06-bcrw-stationary.toml"),
    ),
    ("c06-blp-stationary", include_str!("../presets/c06-blp-stationary.toml")),
    (
        "c06-gzrp-stationary",
        include_str!("../presets/c06-gzrp-stationary.toml"),
    ),
    ("c07-blp-shift", include_str!("../presets/c07-blp-shift.toml")),
    ("c07-gzrp-shift", include_str!("../presets/c07-gzrp-shift.toml")),
    (
        "c08-bound-state-velocity",
        include_str!("../presets/c08-bound-state-velocity.toml"),
    ),
    ("c09-asep-drift", include_str!("../presets/c09-asep-drift.toml")),
    ("c09-blp-drift", include_str!("../presets/c09-blp-drift.toml")),
    ("c09-gzrp-drift", include_str!("../presets/c09-gzrp-drift.toml")),
    (
        "c10-asep-shock-simulation",
        include_str!("../presets/c10-asep-shock-simulation.toml"),
    ),
    (
        "c11-bcrw-simulation",
        include_str!("../presets/c11-bcrw-simulation.toml"),
    ),
    (
        "c12-asep-multi-shock-simulation",
        include_str!("../presets/c12-asep-multi-shock-simulation.toml"),
    ),
    ("c13-asep-mixture", include_str!("../presets/c13-asep-mixture.toml")),
    ("c13-bcrw-mixture", include_str!("../presets/c13-bcrw-mixture.toml")),
];

pub fn find(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}
