//! Maps a grid, a breaker design and an optional fault onto circuit elements.

use serde::{Deserialize, Serialize};

use crate::breaker::{AssemblyBreakerParams, HybridBreakerParams};
use crate::circuit::{
    dc_operating_point, Circuit, ElementId, ElementKind, NodeId, SolverConfig, SolverState, GROUND,
};
use crate::error::{Result, SimError};
use crate::grid::{BreakerSlot, ControlMode, GridTopology, Pole, SLACK_SOURCE_RESISTANCE};

pub const SWITCH_ON_RESISTANCE: f64 = 1e-3;
pub const OFF_CONDUCTANCE: f64 = 1e-9;
/// The open fault branch bridges the full pole-to-pole voltage; at the
/// ordinary off-conductance it would leak about a milliampere into the
/// pre-fault solution.
pub const FAULT_OFF_CONDUCTANCE: f64 = 1e-15;

fn switch(on_resistance: f64) -> ElementKind {
    ElementKind::IdealSwitch {
        on_resistance,
        off_conductance: OFF_CONDUCTANCE,
    }
}

fn diode(on_resistance: f64) -> ElementKind {
    ElementKind::Diode {
        on_resistance,
        off_conductance: OFF_CONDUCTANCE,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BreakerDesign {
    Hybrid,
    Assembly,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FaultKind {
    PoleToPole,
    PoleToGround { pole: Pole },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FaultSpec {
    pub line: usize,
    /// Fraction of the line length from its `from` end.
    pub position: f64,
    pub kind: FaultKind,
    pub resistance: f64,
    #[serde(alias = "time")]
    pub inception_time: f64,
}

impl Default for FaultSpec {
    /// Bolted pole-to-pole fault mid-way along line 4 at 20 ms.
    fn default() -> Self {
        FaultSpec {
            line: 4,
            position: 0.5,
            kind: FaultKind::PoleToPole,
            resistance: 0.0,
            inception_time: 0.02,
        }
    }
}

impl FaultSpec {
    pub fn validate(&self, topology: &GridTopology) -> Result<()> {
        if topology.line(self.line).is_none() {
            return Err(SimError::config(
                "fault.line",
                format!("unknown line {}", self.line),
            ));
        }
        if !(0.0..=1.0).contains(&self.position) {
            return Err(SimError::config(
                "fault.position",
                format!("must be in [0, 1], got {}", self.position),
            ));
        }
        if !(self.resistance >= 0.0 && self.resistance.is_finite()) {
            return Err(SimError::config("fault.resistance", "must be >= 0"));
        }
        if !(self.inception_time >= 0.0 && self.inception_time.is_finite()) {
            return Err(SimError::config("fault.inception_time", "must be >= 0"));
        }
        Ok(())
    }

    /// Lines whose conductors are part of the fault path.
    pub fn faulted_lines(&self, topology: &GridTopology) -> Vec<usize> {
        let Some(line) = topology.line(self.line) else {
            return Vec::new();
        };
        let mut out = match self.kind {
            FaultKind::PoleToPole => {
                let mut v = vec![line.id];
                v.extend(topology.partner(line.id).map(|p| p.id));
                v
            }
            FaultKind::PoleToGround { pole } => topology
                .corridor_line(line.corridor, pole)
                .map(|l| vec![l.id])
                .unwrap_or_default(),
        };
        out.sort_unstable();
        out
    }
}

/// Circuit elements of one converter pole.
#[derive(Debug, Clone, PartialEq)]
pub struct StationPole {
    pub station: usize,
    pub pole: Pole,
    pub capacitor: ElementId,
    pub valve: ElementId,
    /// Lets the DC side recharge the capacitor through a blocked valve.
    pub charge_diode: ElementId,
    pub freewheel: ElementId,
    /// Power-controlled injection into the capacitor node.
    pub drive: ElementId,
    /// Grid-side in-feed into the bus while blocked.
    pub feed: ElementId,
    pub reactor: ElementId,
    /// Slack source and the switch that disconnects it on block.
    pub slack: Option<(ElementId, ElementId)>,
    pub terminal: NodeId,
    pub bus: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EndBreaker {
    None,
    Hybrid {
        ufd: ElementId,
        lcs: ElementId,
        main: ElementId,
        mov: ElementId,
    },
    Assembly {
        main: ElementId,
        mov: ElementId,
        disconnect: ElementId,
        ads_diode: ElementId,
        ads_gate: ElementId,
        ads_resistor: ElementId,
        /// Index into [`Network::ascbs`].
        ascb: usize,
    },
}

/// One line end: the breaker at the bus plus the current probe.
#[derive(Debug, Clone, PartialEq)]
pub struct LineEnd {
    pub name: String,
    pub line: usize,
    pub bus: usize,
    pub pole: Pole,
    /// Series element adjacent to this end and the sign that turns its branch
    /// current into "bus into line".
    pub probe: Vec<(ElementId, f64)>,
    pub breaker: EndBreaker,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ascb {
    pub name: String,
    pub bus: usize,
    pub pole: Pole,
    pub switch: ElementId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub circuit: Circuit,
    pub topology: GridTopology,
    pub design: BreakerDesign,
    pub stations: Vec<StationPole>,
    pub ends: Vec<LineEnd>,
    pub ascbs: Vec<Ascb>,
    pub fault_switch: Option<ElementId>,
    pub fault: Option<FaultSpec>,
    /// `[bus][pole index]`.
    pub bus_nodes: Vec<[NodeId; 2]>,
}

fn pole_index(pole: Pole) -> usize {
    match pole {
        Pole::Positive => 0,
        Pole::Negative => 1,
    }
}

/// Breaker construction data for the chosen design.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreakerSet {
    pub hybrid: HybridBreakerParams,
    pub assembly: AssemblyBreakerParams,
}

impl Network {
    pub fn bus_node(&self, bus: usize, pole: Pole) -> NodeId {
        self.bus_nodes[bus][pole_index(pole)]
    }

    pub fn build(
        topology: &GridTopology,
        design: BreakerDesign,
        breakers: &BreakerSet,
        fault: Option<&FaultSpec>,
    ) -> Result<Network> {
        topology.validate()?;
        if let Some(f) = fault {
            f.validate(topology)?;
        }
        let mut c = Circuit::new();
        let mut bus_nodes = Vec::new();
        for name in &topology.buses {
            let mut pair = [GROUND; 2];
            for pole in Pole::BOTH {
                let n = c.node(&format!("{name}{}", pole.suffix()));
                c.add(
                    &format!("Cbus.{name}{}", pole.suffix()),
                    ElementKind::Capacitor {
                        farads: topology.bus_capacitance,
                    },
                    n,
                    GROUND,
                )?;
                pair[pole_index(pole)] = n;
            }
            bus_nodes.push(pair);
        }

        let mut stations = Vec::new();
        for (k, st) in topology.converters.iter().enumerate() {
            for pole in Pole::BOTH {
                let s = pole.sign();
                let tag = format!("{}{}", st.id, pole.suffix());
                let cap = c.node(&format!("{tag}.dc"));
                let term = c.node(&format!("{tag}.t"));
                let bus = bus_nodes[st.bus][pole_index(pole)];
                let capacitor = c.add(
                    &format!("C.{tag}"),
                    ElementKind::Capacitor {
                        farads: st.dc_capacitance,
                    },
                    cap,
                    GROUND,
                )?;
                let valve = c.add(
                    &format!("Valve.{tag}"),
                    switch(SWITCH_ON_RESISTANCE),
                    cap,
                    term,
                )?;
                let (a, k2) = if s > 0.0 { (term, cap) } else { (cap, term) };
                let charge_diode =
                    c.add(&format!("Dc.{tag}"), diode(SWITCH_ON_RESISTANCE), a, k2)?;
                let (a, k2) = if s > 0.0 {
                    (GROUND, term)
                } else {
                    (term, GROUND)
                };
                let freewheel =
                    c.add(&format!("Dfw.{tag}"), diode(st.freewheel_resistance), a, k2)?;
                let drive = c.add(
                    &format!("I.{tag}"),
                    ElementKind::CurrentSource { amperes: 0.0 },
                    GROUND,
                    cap,
                )?;
                let feed = c.add(
                    &format!("Ifeed.{tag}"),
                    ElementKind::CurrentSource { amperes: 0.0 },
                    GROUND,
                    bus,
                )?;
                let (reactor, _) =
                    damped_inductor(&mut c, &format!("Lconv.{tag}"), st.reactor, term, bus)?;
                let slack = if let ControlMode::VoltageControl { setpoint_v } = st.control {
                    let src = c.node(&format!("{tag}.src"));
                    let mid = c.node(&format!("{tag}.rs"));
                    let v = c.add(
                        &format!("V.{tag}"),
                        ElementKind::VoltageSource {
                            volts: s * setpoint_v,
                        },
                        src,
                        GROUND,
                    )?;
                    c.add(
                        &format!("Rs.{tag}"),
                        ElementKind::Resistor {
                            ohms: SLACK_SOURCE_RESISTANCE,
                        },
                        src,
                        mid,
                    )?;
                    let sw = c.add(
                        &format!("Sslack.{tag}"),
                        switch(SWITCH_ON_RESISTANCE),
                        mid,
                        cap,
                    )?;
                    Some((v, sw))
                } else {
                    None
                };
                stations.push(StationPole {
                    station: k,
                    pole,
                    capacitor,
                    valve,
                    charge_diode,
                    freewheel,
                    drive,
                    feed,
                    reactor,
                    slack,
                    terminal: term,
                    bus,
                });
            }
        }

        let mut ascbs = Vec::new();
        if design == BreakerDesign::Assembly {
            for slot in &topology.breaker_slots {
                if let BreakerSlot::Bus { bus, pole } = *slot {
                    let name = format!("ASCB.{}{}", topology.buses[bus], pole.suffix());
                    let b = bus_nodes[bus][pole_index(pole)];
                    let mid = c.node(&format!("{name}.m"));
                    let sw = c.add(&name, switch(SWITCH_ON_RESISTANCE), b, mid)?;
                    c.add(
                        &format!("R{name}"),
                        ElementKind::Resistor {
                            ohms: breakers.assembly.ascb_resistance,
                        },
                        mid,
                        GROUND,
                    )?;
                    ascbs.push(Ascb {
                        name,
                        bus,
                        pole,
                        switch: sw,
                    });
                }
            }
        }

        let faulted = fault.map(|f| f.faulted_lines(topology)).unwrap_or_default();
        let mut fault_nodes: Vec<(usize, NodeId)> = Vec::new();
        let mut ends = Vec::new();
        for line in &topology.lines {
            let mut built = Vec::new();
            for bus in [line.from_bus, line.to_bus] {
                let name = format!("L{}@{}", line.id, topology.buses[bus]);
                let b = bus_nodes[bus][pole_index(line.pole)];
                let (x, breaker) =
                    build_end(&mut c, &name, b, line.pole, design, breakers, &ascbs, bus)?;
                built.push((name, bus, x, breaker));
            }
            let split = if faulted.contains(&line.id) {
                fault.map(|f| f.position)
            } else {
                None
            };
            let chain = line_chain(line, topology, split);
            let (start, stop) = (built[0].2, built[1].2);
            let mut node = start;
            let mut ids = Vec::new();
            for (i, (name, kind, fault_before)) in chain.iter().enumerate() {
                if *fault_before {
                    fault_nodes.push((line.id, node));
                }
                let next = if i + 1 == chain.len() {
                    stop
                } else {
                    c.node(&format!("{name}.n"))
                };
                ids.push(match *kind {
                    ElementKind::Inductor { henries } => {
                        damped_inductor(&mut c, name, henries, node, next)?
                    }
                    kind => (c.add(name, kind, node, next)?, None),
                });
                node = next;
            }
            if split == Some(1.0) {
                fault_nodes.push((line.id, stop));
            }
            let mut it = built.into_iter();
            let (name, bus, _, breaker) = it.next().unwrap();
            ends.push(LineEnd {
                name,
                line: line.id,
                bus,
                pole: line.pole,
                probe: branch_probe(ids[0], 1.0),
                breaker,
            });
            let (name, bus, _, breaker) = it.next().unwrap();
            ends.push(LineEnd {
                name,
                line: line.id,
                bus,
                pole: line.pole,
                probe: branch_probe(*ids.last().unwrap(), -1.0),
                breaker,
            });
        }

        let fault_switch = match fault {
            None => None,
            Some(f) => {
                let node_of =
                    |id: usize| fault_nodes.iter().find(|(l, _)| *l == id).map(|&(_, n)| n);
                let lines = f.faulted_lines(topology);
                let a = node_of(lines[0])
                    .ok_or_else(|| SimError::config("fault.line", "fault node missing"))?;
                let b = match f.kind {
                    FaultKind::PoleToPole => node_of(lines[1])
                        .ok_or_else(|| SimError::config("fault.line", "pole partner missing"))?,
                    FaultKind::PoleToGround { .. } => GROUND,
                };
                let fault_switch = ElementKind::IdealSwitch {
                    on_resistance: SWITCH_ON_RESISTANCE,
                    off_conductance: FAULT_OFF_CONDUCTANCE,
                };
                if f.resistance > 0.0 {
                    let mid = c.node("F.m");
                    let sw = c.add("Sfault", fault_switch, a, mid)?;
                    c.add(
                        "Rfault",
                        ElementKind::Resistor { ohms: f.resistance },
                        mid,
                        b,
                    )?;
                    Some(sw)
                } else {
                    Some(c.add("Sfault", fault_switch, a, b)?)
                }
            }
        };

        Ok(Network {
            circuit: c,
            topology: topology.clone(),
            design,
            stations,
            ends,
            ascbs,
            fault_switch,
            fault: fault.copied(),
            bus_nodes,
        })
    }

    /// Switch flags for normal operation: valves and breakers closed, fault
    /// open, diodes off.
    pub fn normal_flags(&self) -> Vec<Option<bool>> {
        let mut flags: Vec<Option<bool>> = self
            .circuit
            .elements()
            .iter()
            .map(|e| e.kind.is_switch_like().then_some(false))
            .collect();
        let mut on = |id: ElementId| flags[id.0] = Some(true);
        for s in &self.stations {
            on(s.valve);
            if let Some((_, sw)) = s.slack {
                on(sw);
            }
        }
        for e in &self.ends {
            match e.breaker {
                EndBreaker::None => {}
                EndBreaker::Hybrid { ufd, lcs, .. } => {
                    on(ufd);
                    on(lcs);
                }
                EndBreaker::Assembly {
                    main, disconnect, ..
                } => {
                    on(main);
                    on(disconnect);
                }
            }
        }
        flags
    }

    /// Current from the bus into the line at `end`.
    pub fn end_current(&self, end: &LineEnd, state: &SolverState) -> f64 {
        end.probe
            .iter()
            .map(|&(id, sign)| sign * state.branch_currents[id.0])
            .sum()
    }

    pub fn end(&self, line: usize, bus: usize) -> Option<&LineEnd> {
        self.ends.iter().find(|e| e.line == line && e.bus == bus)
    }
}

/// Sets the time constant of the resistor placed across every lumped
/// inductor. It damps the two-step ringing of trapezoidal integration when
/// a diode or switch interrupts an inductor current, while acting only far
/// above the frequencies a 10 µs step resolves.
pub const BLEED_RESISTANCE: f64 = 1e6;

pub const DAMPING_TIME_CONSTANT: f64 = 2e-6;

fn damped_inductor(
    c: &mut Circuit,
    name: &str,
    henries: f64,
    from: NodeId,
    to: NodeId,
) -> Result<(ElementId, Option<ElementId>)> {
    let l = c.add(name, ElementKind::Inductor { henries }, from, to)?;
    let r = c.add(
        &format!("Rd.{name}"),
        ElementKind::Resistor {
            ohms: henries / DAMPING_TIME_CONSTANT,
        },
        from,
        to,
    )?;
    Ok((l, Some(r)))
}

fn branch_probe(
    (main, parallel): (ElementId, Option<ElementId>),
    sign: f64,
) -> Vec<(ElementId, f64)> {
    std::iter::once((main, sign))
        .chain(parallel.map(|p| (p, sign)))
        .collect()
}

/// Series elements of one line from its `from` end, each flagged when the
/// fault node sits right before it.
fn line_chain(
    line: &crate::grid::DcLine,
    topology: &GridTopology,
    split: Option<f64>,
) -> Vec<(String, ElementKind, bool)> {
    let mut chain = Vec::new();
    let reactor = |bus: usize| {
        (
            format!("Lsr.L{}@{}", line.id, topology.buses[bus]),
            ElementKind::Inductor {
                henries: line.series_reactor,
            },
            false,
        )
    };
    if line.series_reactor > 0.0 {
        chain.push(reactor(line.from_bus));
    }
    let segments: Vec<f64> = match split {
        Some(p) => vec![p, 1.0 - p],
        None => vec![1.0],
    };
    for (si, frac) in segments.iter().enumerate() {
        if *frac <= 0.0 {
            continue;
        }
        let fault_before = split.is_some() && si == 1;
        chain.push((
            format!("R.L{}.{si}", line.id),
            ElementKind::Resistor {
                ohms: line.resistance * frac,
            },
            fault_before,
        ));
        chain.push((
            format!("L.L{}.{si}", line.id),
            ElementKind::Inductor {
                henries: line.inductance * frac,
            },
            false,
        ));
    }
    if split == Some(0.0) {
        // Fault at the `from` end of the line proper (after the reactor).
        let at = usize::from(line.series_reactor > 0.0);
        chain[at].2 = true;
    }
    if line.series_reactor > 0.0 {
        chain.push(reactor(line.to_bus));
    }
    chain
}

#[allow(clippy::too_many_arguments)]
fn build_end(
    c: &mut Circuit,
    name: &str,
    bus: NodeId,
    pole: Pole,
    design: BreakerDesign,
    breakers: &BreakerSet,
    ascbs: &[Ascb],
    bus_index: usize,
) -> Result<(NodeId, EndBreaker)> {
    match design {
        BreakerDesign::None => Ok((bus, EndBreaker::None)),
        BreakerDesign::Hybrid => {
            let p = &breakers.hybrid;
            let x = c.node(&format!("{name}.x"));
            let m = c.node(&format!("{name}.aux"));
            let half = 0.5 * p.lcs_on_resistance;
            let ufd = c.add(&format!("UFD.{name}"), switch(half), bus, m)?;
            let lcs = c.add(&format!("LCS.{name}"), switch(half), m, x)?;
            let main = c.add(&format!("MB.{name}"), switch(p.main_on_resistance), bus, x)?;
            let mov = c.add(
                &format!("MOV.{name}"),
                ElementKind::Varistor(p.mov.varistor()),
                bus,
                x,
            )?;
            Ok((
                x,
                EndBreaker::Hybrid {
                    ufd,
                    lcs,
                    main,
                    mov,
                },
            ))
        }
        BreakerDesign::Assembly => {
            let p = &breakers.assembly;
            let m = c.node(&format!("{name}.m"));
            let x = c.node(&format!("{name}.x"));
            let main = c.add(&format!("MB.{name}"), switch(p.main_on_resistance), bus, m)?;
            let mov = c.add(
                &format!("MOV.{name}"),
                ElementKind::Varistor(p.mov.varistor()),
                bus,
                m,
            )?;
            let disconnect = c.add(&format!("DS.{name}"), switch(SWITCH_ON_RESISTANCE), m, x)?;
            // The ADS carries line current from ground into the line on the
            // positive pole and back to ground on the negative pole.
            let a1 = c.node(&format!("{name}.ads1"));
            let a2 = c.node(&format!("{name}.ads2"));
            let ads_resistor = c.add(
                &format!("Rads.{name}"),
                ElementKind::Resistor {
                    ohms: p.ads_discharge_resistance,
                },
                GROUND,
                a2,
            )?;
            let ads_gate = c.add(
                &format!("ADSg.{name}"),
                switch(SWITCH_ON_RESISTANCE),
                a2,
                a1,
            )?;
            // Keeps the node between gate and diode from floating once the
            // gate is off.
            c.add(
                &format!("Rbleed.{name}"),
                ElementKind::Resistor {
                    ohms: BLEED_RESISTANCE,
                },
                a1,
                GROUND,
            )?;
            let (an, ca) = if pole == Pole::Positive {
                (a1, x)
            } else {
                (x, a1)
            };
            let ads_diode = c.add(&format!("ADS.{name}"), diode(SWITCH_ON_RESISTANCE), an, ca)?;
            let ascb = ascbs
                .iter()
                .position(|a| a.bus == bus_index && a.pole == pole)
                .ok_or_else(|| {
                    SimError::config("topology.breaker_slots", format!("no ASCB slot for {name}"))
                })?;
            Ok((
                x,
                EndBreaker::Assembly {
                    main,
                    mov,
                    disconnect,
                    ads_diode,
                    ads_gate,
                    ads_resistor,
                    ascb,
                },
            ))
        }
    }
}

/// Per-pole source values for an unblocked station.
pub fn apply_setpoints(net: &mut Network) -> Result<()> {
    let v = net.topology.pole_voltage;
    for sp in net.stations.clone() {
        let st = &net.topology.converters[sp.station];
        if let ControlMode::PowerControl { setpoint_mw } = st.control {
            let i = setpoint_mw * 1e6 / (2.0 * v);
            net.circuit.set_source(sp.drive, sp.pole.sign() * i)?;
        }
        net.circuit.set_source(sp.feed, 0.0)?;
    }
    Ok(())
}

/// Resistive DC power flow of the pre-fault grid, with every inductor and
/// capacitor history seeded so a transient run starts in equilibrium.
pub fn steady_state_init(net: &mut Network, config: &SolverConfig) -> Result<SolverState> {
    apply_setpoints(net)?;
    let mut seed = SolverState::zero(&net.circuit);
    seed.conduction = net.normal_flags();
    let state = dc_operating_point(&net.circuit, &seed, config).map_err(|e| match e {
        SimError::Topology { .. } => SimError::Infeasible("DC power flow is singular".into()),
        other => other,
    })?;
    let v = net.topology.pole_voltage;
    for (b, name) in net.topology.buses.iter().enumerate() {
        for pole in Pole::BOTH {
            let vb = state.node_voltages[net.bus_node(b, pole)] * pole.sign();
            if !vb.is_finite() || !(0.8 * v..=1.2 * v).contains(&vb) {
                return Err(SimError::Infeasible(format!(
                    "bus {name}{} settles at {vb} V; setpoints cannot be carried by the network",
                    pole.suffix()
                )));
            }
        }
    }
    Ok(state)
}
