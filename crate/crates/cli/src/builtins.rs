//! Scenarios shipped with the binary.

pub const NAMES: [&str; 8] = [
    "unfold_f11",
    "unfold_f121_stable",
    "unfold_f121_unstable",
    "unfold_f122",
    "d4_ccw",
    "d4_cw",
    "d4_census_grid",
    "double_demo",
];

const SOURCES: [&str; 8] = [
    include_str!("../scenarios/unfold_f11.json"),
    include_str!("../scenarios/unfold_f121_stable.json"),
    include_str!("../scenarios/unfold_f121_unstable.json"),
    include_str!("../scenarios/unfold_f122.json"),
    include_str!("../scenarios/d4_ccw.json"),
    include_str!("../scenarios/d4_cw.json"),
    include_str!("../scenarios/d4_census_grid.json"),
    include_str!("../scenarios/double_demo.json"),
];

pub fn source(name: &str) -> Option<&'static str> {
    NAMES.iter().position(|n| *n == name).map(|i| SOURCES[i])
}
