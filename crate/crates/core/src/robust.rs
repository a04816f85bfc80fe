//! Distribution-free capacity reductions.
//!
//! If the realized capacity of an element is `Q(1 + λξ)` with `ξ` symmetric on
//! `[-1, 1]`, then reserving `θ = √(-2 ln q)·Q·λ` containers keeps the
//! probability of overloading the element at most `q`.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::netmodel::{IntermodalNetwork, LinkIx, Mode, TerminalIx};

/// Safety factor `√(-2 ln q)`.
pub fn safety_factor(q: f64) -> Result<f64> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::Domain(format!("guarantee level q = {q} must lie in (0, 1]")));
    }
    if q == 1.0 {
        return Ok(0.0);
    }
    Ok((-2.0 * q.ln()).sqrt())
}

/// Reserved capacity `θ`.
pub fn capacity_reduction(nominal_capacity: f64, lambda: f64, q: f64) -> Result<f64> {
    if !(nominal_capacity >= 0.0 && nominal_capacity.is_finite()) {
        return Err(Error::Domain(format!(
            "capacity {nominal_capacity} must be finite and non-negative"
        )));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!(
            "uncertainty level lambda = {lambda} must lie in [0, 1]"
        )));
    }
    let k = safety_factor(q)?;
    if lambda == 0.0 || k == 0.0 {
        return Ok(0.0);
    }
    Ok(k * nominal_capacity * lambda)
}

/// `max(Q - θ, 0)`.
pub fn effective_capacity(nominal_capacity: f64, lambda: f64, q: f64) -> Result<f64> {
    let theta = capacity_reduction(nominal_capacity, lambda, q)?;
    Ok((nominal_capacity - theta).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElementRef {
    Link(LinkIx),
    Terminal(TerminalIx),
}

/// Element type tag used in scenario and report files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElementType {
    RoadLink,
    RailLink,
    Terminal,
}

impl ElementType {
    pub fn as_str(self) -> &'static str {
        match self {
            ElementType::RoadLink => "road_link",
            ElementType::RailLink => "rail_link",
            ElementType::Terminal => "terminal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "road_link" => Some(ElementType::RoadLink),
            "rail_link" => Some(ElementType::RailLink),
            "terminal" => Some(ElementType::Terminal),
            _ => None,
        }
    }
}

impl fmt::Display for ElementType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl ElementRef {
    pub fn element_type(self, net: &IntermodalNetwork) -> ElementType {
        match self {
            ElementRef::Link(l) => match net.link(l).mode {
                Mode::Road => ElementType::RoadLink,
                Mode::Rail => ElementType::RailLink,
            },
            ElementRef::Terminal(_) => ElementType::Terminal,
        }
    }

    /// The user-facing id: link id or terminal node id.
    pub fn id(self, net: &IntermodalNetwork) -> &str {
        match self {
            ElementRef::Link(l) => &net.link(l).id,
            ElementRef::Terminal(t) => &net.node(net.terminal(t).node).id,
        }
    }

    pub fn nominal_capacity(self, net: &IntermodalNetwork) -> f64 {
        match self {
            ElementRef::Link(l) => net.link(l).capacity,
            ElementRef::Terminal(t) => net.terminal(t).capacity,
        }
    }

    pub fn resolve(net: &IntermodalNetwork, kind: ElementType, id: &str) -> Result<Self> {
        let found = match kind {
            ElementType::RoadLink | ElementType::RailLink => {
                let want = if kind == ElementType::RoadLink {
                    Mode::Road
                } else {
                    Mode::Rail
                };
                net.link_ix(id)
                    .filter(|&l| net.link(l).mode == want)
                    .map(ElementRef::Link)
            }
            ElementType::Terminal => net.terminal_ix(id).map(ElementRef::Terminal),
        };
        found.ok_or_else(|| Error::Reference(format!("no {kind} with id {id}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintySpec {
    pub element: ElementRef,
    pub lambda: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityReduction {
    pub element: ElementRef,
    pub nominal: f64,
    pub lambda: f64,
    pub q: f64,
    pub theta: f64,
    pub effective: f64,
}

impl CapacityReduction {
    fn deterministic(element: ElementRef, nominal: f64) -> Self {
        CapacityReduction {
            element,
            nominal,
            lambda: 0.0,
            q: 1.0,
            theta: 0.0,
            effective: nominal,
        }
    }
}

/// One reduction per capacitated element, indexed like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionTable {
    pub links: Vec<CapacityReduction>,
    pub terminals: Vec<CapacityReduction>,
}

impl ReductionTable {
    /// All thetas zero.
    pub fn deterministic(net: &IntermodalNetwork) -> Self {
        reduction_table(net, &[]).expect("empty spec list is always valid")
    }

    pub fn get(&self, element: ElementRef) -> &CapacityReduction {
        match element {
            ElementRef::Link(l) => &self.links[l.0],
            ElementRef::Terminal(t) => &self.terminals[t.0],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &CapacityReduction> {
        self.links.iter().chain(self.terminals.iter())
    }

    /// Forces `θ = Q` on `element`, leaving zero effective capacity.
    pub fn knock_out(&mut self, element: ElementRef) {
        let r = match element {
            ElementRef::Link(l) => &mut self.links[l.0],
            ElementRef::Terminal(t) => &mut self.terminals[t.0],
        };
        r.theta = r.nominal;
        r.effective = 0.0;
    }
}

/// Builds the reduction for every capacitated element; elements without a spec keep θ = 0.
pub fn reduction_table(net: &IntermodalNetwork, specs: &[UncertaintySpec]) -> Result<ReductionTable> {
    let mut links: Vec<CapacityReduction> = net
        .link_ixs()
        .map(|l| CapacityReduction::deterministic(ElementRef::Link(l), net.link(l).capacity))
        .collect();
    let mut terminals: Vec<CapacityReduction> = (0..net.terminals().len())
        .map(|t| {
            let e = ElementRef::Terminal(TerminalIx(t));
            CapacityReduction::deterministic(e, e.nominal_capacity(net))
        })
        .collect();
    let mut seen = HashMap::new();
    for spec in specs {
        if seen.insert(spec.element, ()).is_some() {
            return Err(Error::Config(format!(
                "duplicate uncertainty spec for {} {}",
                spec.element.element_type(net),
                spec.element.id(net)
            )));
        }
        let slot = match spec.element {
            ElementRef::Link(l) if l.0 < links.len() => &mut links[l.0],
            ElementRef::Terminal(t) if t.0 < terminals.len() => &mut terminals[t.0],
            e => return Err(Error::Reference(format!("uncertainty spec for unknown element {e:?}"))),
        };
        let nominal = slot.nominal;
        let theta = capacity_reduction(nominal, spec.lambda, spec.q)?;
        *slot = CapacityReduction {
            element: spec.element,
            nominal,
            lambda: spec.lambda,
            q: spec.q,
            theta,
            effective: (nominal - theta).max(0.0),
        };
    }
    Ok(ReductionTable { links, terminals })
}

#[derive(Debug, Deserialize)]
struct ScenarioRow {
    element_type: String,
    element_id: String,
    lambda: f64,
    q: f64,
}

/// Reads `scenario.csv` into uncertainty specs.
pub fn load_scenario(path: &Path, net: &IntermodalNetwork) -> Result<Vec<UncertaintySpec>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<ScenarioRow>().enumerate() {
        let row_no = i + 1;
        let r = row.map_err(|e| Error::schema(path, row_no, e.to_string()))?;
        let kind = ElementType::parse(&r.element_type)
            .ok_or_else(|| Error::schema(path, row_no, format!("unknown element_type {:?}", r.element_type)))?;
        let element = ElementRef::resolve(net, kind, &r.element_id)?;
        capacity_reduction(0.0, r.lambda, r.q).map_err(|e| Error::schema(path, row_no, e.to_string()))?;
        out.push(UncertaintySpec {
            element,
            lambda: r.lambda,
            q: r.q,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // Reference values evaluated with 30-digit arbitrary-precision arithmetic.
    const THETA_100_01_005: f64 = 24.477_468_306_808_165;
    const THETA_100_03_02: f64 = 53.823_677_339_823_04;
    const THETA_100_05_005: f64 = 122.387_341_534_040_83;
    const SQRT_M2LN_02: f64 = 1.794_122_577_994_101_5;

    #[test]
    fn theta_reference_values() {
        assert_relative_eq!(
            capacity_reduction(100.0, 0.1, 0.05).unwrap(),
            THETA_100_01_005,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            capacity_reduction(100.0, 0.3, 0.2).unwrap(),
            THETA_100_03_02,
            max_relative = 1e-14
        );
        assert_relative_eq!(safety_factor(0.2).unwrap(), SQRT_M2LN_02, max_relative = 1e-15);
        assert_relative_eq!(
            effective_capacity(100.0, 0.1, 0.05).unwrap(),
            100.0 - THETA_100_01_005,
            max_relative = 1e-14
        );
        assert!(capacity_reduction(100.0, 0.5, 0.05).unwrap() > THETA_100_05_005 - 1e-9);
    }

    #[test]
    fn exact_zeros() {
        assert_eq!(capacity_reduction(100.0, 0.0, 0.1).unwrap(), 0.0);
        assert_eq!(capacity_reduction(250.0, 0.2, 1.0).unwrap(), 0.0);
        assert_eq!(effective_capacity(0.0, 0.3, 0.05).unwrap(), 0.0);
    }

    #[test]
    fn clamps_at_zero() {
        assert_eq!(effective_capacity(100.0, 0.5, 0.05).unwrap(), 0.0);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(capacity_reduction(100.0, 0.1, 0.0), Err(Error::Domain(_))));
        assert!(matches!(capacity_reduction(100.0, 0.1, -0.1), Err(Error::Domain(_))));
        assert!(matches!(capacity_reduction(100.0, 0.1, 1.5), Err(Error::Domain(_))));
        assert!(matches!(capacity_reduction(100.0, -0.1, 0.5), Err(Error::Domain(_))));
        assert!(matches!(capacity_reduction(100.0, 1.1, 0.5), Err(Error::Domain(_))));
        assert!(matches!(
            capacity_reduction(100.0, f64::NAN, 0.5),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn table_defaults_and_locality() {
        let net = fixtures::six_node(10).network;
        let t = reduction_table(&net, &[]).unwrap();
        assert_eq!(t.links.len(), net.links().len());
        assert_eq!(t.terminals.len(), net.terminals().len());
        assert!(t.iter().all(|r| r.theta == 0.0 && r.effective == r.nominal));

        let s1 = ElementRef::Terminal(net.terminal_ix("S1").unwrap());
        let t = reduction_table(
            &net,
            &[UncertaintySpec {
                element: s1,
                lambda: 0.2,
                q: 0.1,
            }],
        )
        .unwrap();
        for r in t.iter() {
            assert_eq!(r.theta > 0.0, r.element == s1);
        }
    }

    #[test]
    fn duplicate_spec_is_config_error() {
        let net = fixtures::six_node(10).network;
        let e = ElementRef::Link(LinkIx(0));
        let spec = UncertaintySpec {
            element: e,
            lambda: 0.1,
            q: 0.1,
        };
        assert!(matches!(reduction_table(&net, &[spec, spec]), Err(Error::Config(_))));
    }

    #[test]
    fn thetas_scale_with_capacity() {
        let net = fixtures::six_node(10).network;
        let caps = [50.0, 100.0, 200.0];
        let net = net.with_link_capacities(|l, rec| caps.get(l.0).copied().unwrap_or(rec.capacity));
        let specs: Vec<_> = (0..3)
            .map(|i| UncertaintySpec {
                element: ElementRef::Link(LinkIx(i)),
                lambda: 0.3,
                q: 0.05,
            })
            .collect();
        let t = reduction_table(&net, &specs).unwrap();
        assert_relative_eq!(t.links[1].theta / t.links[0].theta, 2.0, max_relative = 1e-14);
        assert_relative_eq!(t.links[2].theta / t.links[0].theta, 4.0, max_relative = 1e-14);
    }

    #[test]
    fn scenario_file_round_trip() {
        let net = fixtures::six_node(10).network;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scenario.csv");
        std::fs::write(
            &p,
            "element_type,element_id,lambda,q\nterminal,S1,0.1,0.05\nrail_link,S1R1,0.2,0.1\n",
        )
        .unwrap();
        let specs = load_scenario(&p, &net).unwrap();
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[0].element, ElementRef::Terminal(net.terminal_ix("S1").unwrap()));

        std::fs::write(&p, "element_type,element_id,lambda,q\nroad_link,S1R1,0.2,0.1\n").unwrap();
        assert!(matches!(load_scenario(&p, &net), Err(Error::Reference(_))));
        std::fs::write(&p, "element_type,element_id,lambda,q\nterminal,S1,0.2,0\n").unwrap();
        assert!(matches!(load_scenario(&p, &net), Err(Error::Schema { .. })));
    }

    proptest! {
        #[test]
        fn increasing_in_lambda(q in 0.001f64..0.999, a in 0.0f64..1.0, b in 0.0f64..1.0, cap in 1.0f64..1e4) {
            prop_assume!((a - b).abs() > 1e-9);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(capacity_reduction(cap, lo, q).unwrap() < capacity_reduction(cap, hi, q).unwrap());
        }

        #[test]
        fn decreasing_in_q(lambda in 0.01f64..1.0, a in 0.001f64..1.0, b in 0.001f64..1.0, cap in 1.0f64..1e4) {
            prop_assume!((a - b).abs() > 1e-9);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(capacity_reduction(cap, lambda, lo).unwrap() > capacity_reduction(cap, lambda, hi).unwrap());
        }

        #[test]
        fn homogeneous_in_capacity(lambda in 0.0f64..1.0, q in 0.001f64..1.0, cap in 0.0f64..1e4, s in 0.0f64..100.0) {
            let a = capacity_reduction(cap * s, lambda, q).unwrap();
            let b = s * capacity_reduction(cap, lambda, q).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }

        #[test]
        fn effective_never_negative(lambda in 0.0f64..=1.0, q in 1e-12f64..=1.0, cap in 0.0f64..1e6) {
            prop_assert!(effective_capacity(cap, lambda, q).unwrap() >= 0.0);
        }
    }
}
