//! Small hand-built networks used by tests, examples and the CLI smoke runs.
//!
//! The six-node corridor has a direct road route `O → M → D` (520 mi) and an
//! intermodal route `O → S1 ⇒ R1 ⇒ S2 → D` (10 + 250 + 250 + 10 mi).

use crate::netmodel::{
    derive_link, CommodityDemand, IntermodalNetwork, LinkRecord, Mode, NodeIx, NodeKind, NodeRecord, OdPair,
    RateConfig, TerminalRecord,
};

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub network: IntermodalNetwork,
    pub demands: Vec<CommodityDemand>,
}

/// Capacity placed on every element of the six-node corridor unless overridden.
pub const AMPLE_CAPACITY: f64 = 1000.0;

/// Terminal processing time in hours.
pub const PROCESSING_HOURS: f64 = 4.0;

/// The six-node corridor with `containers` of one commodity from `O` to `D`.
pub fn six_node(containers: u64) -> Fixture {
    six_node_with(containers, AMPLE_CAPACITY)
}

/// Same corridor with both terminals limited to `terminal_capacity`.
pub fn six_node_with(containers: u64, terminal_capacity: f64) -> Fixture {
    let rates = RateConfig::default();
    let node = |id: &str, kind| NodeRecord {
        id: id.into(),
        kind,
        latitude: None,
        longitude: None,
    };
    use NodeKind::*;
    let nodes = vec![
        node("O", HighwayIntersection),
        node("M", HighwayIntersection),
        node("D", HighwayIntersection),
        node("S1", IntermodalTerminal),
        node("R1", RailJunction),
        node("S2", IntermodalTerminal),
    ];
    let link = |id: &str, from: usize, to: usize, mode: Mode, len: f64| -> LinkRecord {
        derive_link(
            id.into(),
            NodeIx(from),
            NodeIx(to),
            mode,
            len,
            AMPLE_CAPACITY,
            rates.speed(mode),
            &rates,
        )
    };
    let links = vec![
        link("OM", 0, 1, Mode::Road, 260.0),
        link("MD", 1, 2, Mode::Road, 260.0),
        link("OS1", 0, 3, Mode::Road, 10.0),
        link("S1R1", 3, 4, Mode::Rail, 250.0),
        link("R1S2", 4, 5, Mode::Rail, 250.0),
        link("S2D", 5, 2, Mode::Road, 10.0),
    ];
    let terminal = |n: usize| TerminalRecord {
        node: NodeIx(n),
        capacity: terminal_capacity,
        transfer_cost: rates.default_transfer_cost_usd,
        processing_time: PROCESSING_HOURS,
    };
    let terminals = vec![terminal(3), terminal(5)];
    let network = IntermodalNetwork::from_parts(nodes, links, terminals).expect("fixture indices are valid");
    let demands = vec![CommodityDemand {
        od: OdPair {
            id: "1".into(),
            origin: NodeIx(0),
            destination: NodeIx(2),
        },
        commodity: "coal".into(),
        containers,
        deadline: rates.default_deadline_hours,
    }];
    Fixture { network, demands }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::validate_network;

    #[test]
    fn corridor_is_valid() {
        let f = six_node(10);
        assert!(validate_network(&f.network).is_empty());
        assert!(crate::netmodel::validate_demands(&f.network, &f.demands).is_empty());
    }
}
