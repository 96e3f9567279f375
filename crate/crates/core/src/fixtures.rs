//! Bundled HDDL fixtures used by tests, benches, and the CLI examples.

/// Agent-centric Transport domain.
pub const TRANSPORT_DOMAIN: &str = include_str!("../assets/transport.hddl");
/// One truck, two packages, three locations.
pub const TRANSPORT_P01: &str = include_str!("../assets/transport-p01.hddl");
/// Two trucks, four packages, four locations.
pub const TRANSPORT_P02: &str = include_str!("../assets/transport-p02.hddl");
/// Three trucks, nine packages, eight locations.
pub const TRANSPORT_P03: &str = include_str!("../assets/transport-p03.hddl");
/// Difficulty benchmark: one truck, four packages, four locations.
pub const TRANSPORT_D1: &str = include_str!("../assets/transport-d1.hddl");
/// Difficulty benchmark: two trucks, fifteen packages, eight locations.
pub const TRANSPORT_D2: &str = include_str!("../assets/transport-d2.hddl");
/// Collaborative Transport domain with the joint transfer action.
pub const TRANSPORT_COLLAB_DOMAIN: &str = include_str!("../assets/transport-collab.hddl");
/// Collaborative restatement of the two-truck instance.
pub const TRANSPORT_COLLAB_P02: &str = include_str!("../assets/transport-collab-p02.hddl");
/// Heterogeneous instance solvable only with a package handover.
pub const TRANSPORT_COLLAB_HETERO: &str = include_str!("../assets/transport-collab-hetero.hddl");
/// Stock IPC-style Transport domain, deliberately unadapted.
pub const TRANSPORT_STOCK_DOMAIN: &str = include_str!("../assets/transport-stock.hddl");
/// Task effect hints that make the stock domain lint-clean after adaptation.
pub const TRANSPORT_STOCK_EFFECTS: &str = include_str!("../assets/transport-stock-effects.txt");
/// Two-robot handoff domain with agentless environment actions.
pub const HANDOFF_DOMAIN: &str = include_str!("../assets/handoff.hddl");
/// Two robots, two items.
pub const HANDOFF_P01: &str = include_str!("../assets/handoff-p01.hddl");

/// Named fixtures, usable from the CLI via `fixture:<name>` paths.
pub const ALL: &[(&str, &str)] = &[
    ("transport", TRANSPORT_DOMAIN),
    ("transport-p01", TRANSPORT_P01),
    ("transport-p02", TRANSPORT_P02),
    ("transport-p03", TRANSPORT_P03),
    ("transport-d1", TRANSPORT_D1),
    ("transport-d2", TRANSPORT_D2),
    ("transport-collab", TRANSPORT_COLLAB_DOMAIN),
    ("transport-collab-p02", TRANSPORT_COLLAB_P02),
    ("transport-collab-hetero", TRANSPORT_COLLAB_HETERO),
    ("transport-stock", TRANSPORT_STOCK_DOMAIN),
    ("transport-stock-effects", TRANSPORT_STOCK_EFFECTS),
    ("handoff", HANDOFF_DOMAIN),
    ("handoff-p01", HANDOFF_P01),
];

/// Looks up a bundled fixture by name.
pub fn by_name(name: &str) -> Option<&'static str> {
    ALL.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}
