//! Stepped fault simulations, their metrics and design comparisons.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::breaker::{
    assembly_transition, hybrid_transition, mov_energy_accumulate, AssemblyBreakerParams,
    AssemblyBreakerState, AssemblyCurrents, Event, HybridBreakerParams, HybridBreakerState,
    HybridCurrents,
};
use crate::circuit::{
    solve_step_at, varistor_current, ElementId, ElementKind, NodeId, SolverConfig, SolverState,
};
use crate::error::{Result, SimError};
use crate::grid::{build_three_terminal_default, converter_step, ConverterDrive, GridTopology};
use crate::network::{
    steady_state_init, BreakerDesign, BreakerSet, EndBreaker, FaultSpec, Network,
};
use crate::protection::{DetectorConfig, DetectorKind, Relay, TripDecision};

pub const DEFAULT_TOPOLOGY: &str = "three-terminal-default";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TopologySpec {
    Builtin(String),
    Inline(GridTopology),
}

impl TopologySpec {
    pub fn resolve(&self) -> Result<GridTopology> {
        match self {
            TopologySpec::Builtin(name) if name == DEFAULT_TOPOLOGY => {
                Ok(build_three_terminal_default())
            }
            TopologySpec::Builtin(name) => Err(SimError::config(
                "topology",
                format!("unknown built-in topology `{name}`"),
            )),
            TopologySpec::Inline(t) => Ok(t.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub topology: TopologySpec,
    pub breaker_design: BreakerDesign,
    /// Required to run with `breaker_design = "none"`.
    pub allow_no_breakers: bool,
    pub duration: f64,
    pub fault: Option<FaultSpec>,
    pub detector: DetectorConfig,
    pub solver: SolverConfig,
    pub hybrid: HybridBreakerParams,
    pub assembly: AssemblyBreakerParams,
    /// Extra probes on top of the default set: `i:<element>`, `v:<node>` or
    /// `end:<line end>`.
    pub probes: Vec<String>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            topology: TopologySpec::Builtin(DEFAULT_TOPOLOGY.into()),
            breaker_design: BreakerDesign::Hybrid,
            allow_no_breakers: false,
            duration: 0.12,
            fault: Some(FaultSpec::default()),
            detector: DetectorConfig::default(),
            solver: SolverConfig::default(),
            hybrid: HybridBreakerParams::default(),
            assembly: AssemblyBreakerParams::default(),
            probes: Vec::new(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<GridTopology> {
        let topology = self.topology.resolve()?;
        topology.validate()?;
        self.solver.validate()?;
        self.detector.validate()?;
        self.hybrid.validate()?;
        self.assembly.validate()?;
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(SimError::config("duration", "must be > 0"));
        }
        if self.breaker_design == BreakerDesign::None && !self.allow_no_breakers {
            return Err(SimError::config(
                "breaker_design",
                "`none` requires allow_no_breakers = true",
            ));
        }
        if let Some(f) = &self.fault {
            f.validate(&topology)?;
            if f.inception_time > self.duration {
                return Err(SimError::config(
                    "fault.inception_time",
                    "must lie within the run duration",
                ));
            }
        }
        Ok(topology)
    }

    pub fn step_count(&self) -> usize {
        (self.duration / self.solver.dt - 1e-9).ceil() as usize
    }
}

/// Time of sample `k`, computed from an integer nanosecond step so that
/// every run prints identical timestamps.
pub fn sample_time(k: usize, dt: f64) -> f64 {
    let dt_ns = (dt * 1e9).round() as u64;
    (k as u64 * dt_ns) as f64 / 1e9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub peak_fault_current: Option<f64>,
    pub interruption_time: Option<f64>,
    pub rise_ratio_10ms: Option<f64>,
    pub mov_energy: f64,
    pub max_main_breaker_current: Option<f64>,
    pub min_bus_voltage: f64,
}

/// Which probe columns each metric is computed from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricInputs {
    pub faulted_ends: Vec<String>,
    pub main_breakers: Vec<String>,
    pub buses: Vec<String>,
    pub mov_energy: String,
    pub inception_time: Option<f64>,
    pub current_epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelayTrip {
    pub end: String,
    pub decision: TripDecision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub config: ScenarioConfig,
    pub times: Vec<f64>,
    pub probes: Vec<Probe>,
    pub events: Vec<Event>,
    pub trips: Vec<RelayTrip>,
    pub faulted_lines: Vec<usize>,
    pub metric_inputs: MetricInputs,
    pub metrics: Metrics,
}

impl SimulationResult {
    pub fn probe(&self, name: &str) -> Option<&[f64]> {
        self.probes
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.values.as_slice())
    }

    /// Earliest relay trip decision, if any.
    pub fn first_trip(&self) -> Option<f64> {
        self.trips
            .iter()
            .map(|t| t.decision.decided_at)
            .reduce(f64::min)
    }
}

/// Recomputes every metric from waveform columns.
pub fn compute_metrics(
    times: &[f64],
    column: &dyn Fn(&str) -> Option<Vec<f64>>,
    inputs: &MetricInputs,
) -> Result<Metrics> {
    let get = |name: &str| {
        column(name).ok_or_else(|| SimError::config("probes", format!("missing column `{name}`")))
    };
    let n = times.len();
    let mut buses_min = f64::INFINITY;
    for b in &inputs.buses {
        for v in get(b)? {
            buses_min = buses_min.min(v.abs());
        }
    }
    let mov_energy = get(&inputs.mov_energy)?.last().copied().unwrap_or(0.0);
    let mut metrics = Metrics {
        mov_energy,
        min_bus_voltage: buses_min,
        ..Default::default()
    };
    if !inputs.main_breakers.is_empty() {
        let mut m = 0.0f64;
        for b in &inputs.main_breakers {
            for v in get(b)? {
                m = m.max(v.abs());
            }
        }
        metrics.max_main_breaker_current = Some(m);
    }
    let Some(t_inc) = inputs.inception_time else {
        return Ok(metrics);
    };
    let mut fault = vec![0.0f64; n];
    for e in &inputs.faulted_ends {
        for (f, v) in fault.iter_mut().zip(get(e)?) {
            *f = f.max(v.abs());
        }
    }
    let first_post = times.iter().position(|&t| t > t_inc + 1e-12).unwrap_or(n);
    if first_post == n || first_post == 0 {
        return Ok(metrics);
    }
    metrics.peak_fault_current = Some(fault[first_post..].iter().copied().fold(0.0, f64::max));
    let last_high = (first_post..n)
        .rev()
        .find(|&k| fault[k] >= inputs.current_epsilon);
    metrics.interruption_time = match last_high {
        None => Some(times[first_post] - t_inc),
        Some(k) if k + 1 < n => Some(times[k + 1] - t_inc),
        Some(_) => None,
    };
    let pre = fault[first_post - 1];
    let target = t_inc + 10e-3;
    if let Some(k) = times.iter().position(|&t| t >= target - 1e-12) {
        if pre > 0.0 {
            metrics.rise_ratio_10ms = Some(fault[k] / pre);
        }
    }
    Ok(metrics)
}

// ------------------------------------------------------------------ probes

#[derive(Debug, Clone, PartialEq)]
enum ProbeKind {
    /// Signed sum of branch currents.
    Current(Vec<(ElementId, f64)>),
    Voltage(NodeId),
    MovEnergy,
}

const MOV_ENERGY_PROBE: &str = "mov_energy";

fn resolve_probe(net: &Network, name: &str) -> Result<ProbeKind> {
    let bad = || SimError::config("probes", format!("unknown probe `{name}`"));
    if name == MOV_ENERGY_PROBE {
        return Ok(ProbeKind::MovEnergy);
    }
    if let Some(el) = name.strip_prefix("i:") {
        return net
            .circuit
            .find_element(el)
            .map(|id| ProbeKind::Current(vec![(id, 1.0)]))
            .ok_or_else(bad);
    }
    if let Some(node) = name.strip_prefix("v:") {
        return net
            .circuit
            .find_node(node)
            .map(ProbeKind::Voltage)
            .ok_or_else(bad);
    }
    if let Some(end) = name.strip_prefix("end:") {
        return net
            .ends
            .iter()
            .find(|e| e.name == end)
            .map(|e| ProbeKind::Current(e.probe.clone()))
            .ok_or_else(bad);
    }
    Err(bad())
}

fn main_breaker(b: &EndBreaker) -> Option<ElementId> {
    match *b {
        EndBreaker::None => None,
        EndBreaker::Hybrid { main, .. } | EndBreaker::Assembly { main, .. } => Some(main),
    }
}

fn default_probes(net: &Network) -> Vec<String> {
    let mut out: Vec<String> = net.ends.iter().map(|e| format!("end:{}", e.name)).collect();
    for (b, name) in net.topology.buses.iter().enumerate() {
        for pole in crate::grid::Pole::BOTH {
            let _ = net.bus_node(b, pole);
            out.push(format!("v:{name}{}", pole.suffix()));
        }
    }
    for e in &net.ends {
        if let Some(id) = main_breaker(&e.breaker) {
            out.push(format!("i:{}", net.circuit.element(id).name));
        }
    }
    out.push(MOV_ENERGY_PROBE.into());
    out
}

// --------------------------------------------------------------------- run

#[derive(Debug, Clone, PartialEq)]
enum EndState {
    None,
    Hybrid(HybridBreakerState),
    Assembly(AssemblyBreakerState),
}

fn current(state: &SolverState, id: ElementId) -> f64 {
    state.branch_currents[id.0]
}

/// Runs one scenario from steady state to `duration`.
pub fn run(config: &ScenarioConfig) -> Result<SimulationResult> {
    let topology = config.validate()?;
    let solver = config.solver;
    let dt = solver.dt;
    let eps = solver.current_epsilon;
    let breakers = BreakerSet {
        hybrid: config.hybrid,
        assembly: config.assembly,
    };
    let mut net = Network::build(
        &topology,
        config.breaker_design,
        &breakers,
        config.fault.as_ref(),
    )?;
    let mut state = steady_state_init(&mut net, &solver)?;
    state.time = 0.0;

    let mut probe_names = default_probes(&net);
    for p in &config.probes {
        if !probe_names.contains(p) {
            probe_names.push(p.clone());
        }
    }
    let kinds = probe_names
        .iter()
        .map(|n| resolve_probe(&net, n))
        .collect::<Result<Vec<_>>>()?;

    let steps = config.step_count();
    let mut times = Vec::with_capacity(steps + 1);
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(steps + 1); kinds.len()];
    let mut events = Vec::new();
    let mut trips = Vec::new();
    let mut relays: Vec<Relay> = net
        .ends
        .iter()
        .map(|e| Relay::new(e.line, config.detector))
        .collect();
    let mut ends: Vec<EndState> = net
        .ends
        .iter()
        .map(|e| match e.breaker {
            EndBreaker::None => EndState::None,
            EndBreaker::Hybrid { .. } => EndState::Hybrid(HybridBreakerState::default()),
            EndBreaker::Assembly { .. } => EndState::Assembly(AssemblyBreakerState::default()),
        })
        .collect();
    let max_line = topology.lines.iter().map(|l| l.id).max().unwrap_or(0);
    let mut line_tripped = vec![false; max_line + 1];
    let mut mov_energy = vec![0.0; net.ends.len()];
    let faulted_lines = config
        .fault
        .map(|f| f.faulted_lines(&topology))
        .unwrap_or_default();
    let inception = config.fault.map(|f| f.inception_time);
    let mut fault_closed = false;

    let record = |state: &SolverState, energy: f64, columns: &mut Vec<Vec<f64>>| {
        for (col, kind) in columns.iter_mut().zip(&kinds) {
            col.push(match kind {
                ProbeKind::Current(parts) => parts
                    .iter()
                    .map(|&(id, sign)| sign * current(state, id))
                    .sum(),
                ProbeKind::Voltage(n) => state.node_voltages[*n],
                ProbeKind::MovEnergy => energy,
            });
        }
    };

    times.push(0.0);
    record(&state, 0.0, &mut columns);
    control(
        &mut net,
        &mut state,
        0.0,
        config,
        &mut relays,
        &mut ends,
        &mut line_tripped,
        &mut events,
        &mut trips,
    )?;

    for k in 1..=steps {
        let t_prev = sample_time(k - 1, dt);
        let t = sample_time(k, dt);
        if let (Some(sw), Some(ti)) = (net.fault_switch, inception) {
            let on = t_prev >= ti - 1e-12;
            if on && !fault_closed {
                fault_closed = true;
                events.push(Event::new(t_prev, "fault", "inception", "open", "closed"));
            }
            state.command(sw, on);
        }
        let next = solve_step_at(&net.circuit, &state, &solver, t)?;
        if next.node_voltages.iter().any(|v| !v.is_finite()) {
            return Err(SimError::Divergence {
                time: t,
                component: "network".into(),
            });
        }
        for id in &next.frozen {
            events.push(Event::new(
                t,
                &net.circuit.element(*id).name,
                "frozen",
                "",
                "",
            ));
        }
        for (e, end) in net.ends.iter().enumerate() {
            let mov = match end.breaker {
                EndBreaker::Hybrid { mov, .. } | EndBreaker::Assembly { mov, .. } => mov,
                EndBreaker::None => continue,
            };
            let el = net.circuit.element(mov);
            let ElementKind::Varistor(law) = el.kind else {
                unreachable!("arrester is a varistor")
            };
            // Step-averaged voltage times step-averaged current: the product
            // the trapezoidal rule conserves. Currents come from the arrester
            // law at the solved voltages, since the linearized branch current
            // can carry the wrong sign near zero. A step in which the voltage
            // changes sign falls back to the endpoint powers, which cannot be
            // negative.
            let (v0, v1) = (state.branch_voltage(el), next.branch_voltage(el));
            let (i0, i1) = (varistor_current(v0, &law), varistor_current(v1, &law));
            let increment = if v0 * v1 >= 0.0 {
                mov_energy_accumulate(mov_energy[e], 0.5 * (v0 + v1), 0.5 * (i0 + i1), dt)
            } else {
                mov_energy_accumulate(mov_energy[e], v0, i0, 0.5 * dt)
                    .and_then(|x| mov_energy_accumulate(x, v1, i1, 0.5 * dt))
            };
            mov_energy[e] = increment.map_err(|err| match err {
                SimError::InvariantViolation { reason, .. } => SimError::InvariantViolation {
                    time: t,
                    component: el.name.clone(),
                    reason,
                },
                other => other,
            })?;
        }
        state = next;
        times.push(t);
        record(&state, mov_energy.iter().sum(), &mut columns);
        control(
            &mut net,
            &mut state,
            t,
            config,
            &mut relays,
            &mut ends,
            &mut line_tripped,
            &mut events,
            &mut trips,
        )?;
    }

    for (e, end) in ends.iter_mut().enumerate() {
        match end {
            EndState::Hybrid(s) => s.mov_energy = mov_energy[e],
            EndState::Assembly(s) => s.mov_energy = mov_energy[e],
            EndState::None => {}
        }
    }

    let probes: Vec<Probe> = probe_names
        .into_iter()
        .zip(columns)
        .map(|(name, values)| Probe { name, values })
        .collect();
    let metric_inputs = MetricInputs {
        faulted_ends: net
            .ends
            .iter()
            .filter(|e| faulted_lines.contains(&e.line))
            .map(|e| format!("end:{}", e.name))
            .collect(),
        main_breakers: net
            .ends
            .iter()
            .filter(|e| faulted_lines.contains(&e.line))
            .filter_map(|e| main_breaker(&e.breaker))
            .map(|id| format!("i:{}", net.circuit.element(id).name))
            .collect(),
        buses: net
            .topology
            .buses
            .iter()
            .flat_map(|b| crate::grid::Pole::BOTH.map(|p| format!("v:{b}{}", p.suffix())))
            .collect(),
        mov_energy: MOV_ENERGY_PROBE.into(),
        inception_time: inception,
        current_epsilon: eps,
    };
    let column = |name: &str| {
        probes
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.values.clone())
    };
    let metrics = compute_metrics(&times, &column, &metric_inputs)?;
    Ok(SimulationResult {
        config: config.clone(),
        times,
        probes,
        events,
        trips,
        faulted_lines,
        metric_inputs,
        metrics,
    })
}

/// Relays, breakers and converters at time `t`; the resulting commands act
/// from the next step on.
#[allow(clippy::too_many_arguments)]
fn control(
    net: &mut Network,
    state: &mut SolverState,
    t: f64,
    config: &ScenarioConfig,
    relays: &mut [Relay],
    ends: &mut [EndState],
    line_tripped: &mut [bool],
    events: &mut Vec<Event>,
    trips: &mut Vec<RelayTrip>,
) -> Result<()> {
    let eps = config.solver.current_epsilon;
    for (e, relay) in relays.iter_mut().enumerate() {
        let end = &net.ends[e];
        let i = net.end_current(end, state);
        let (detections, decision) = relay.sample(t, i)?;
        let component = format!("relay.{}", end.name);
        for d in detections {
            let to = match d.detector {
                DetectorKind::Threshold => "threshold",
                DetectorKind::Direction => "direction",
            };
            events.push(Event::new(t, &component, "detection", "armed", to));
        }
        if let Some(decision) = decision {
            events.push(Event::new(t, &component, "vote", "armed", "trip"));
            trips.push(RelayTrip {
                end: end.name.clone(),
                decision,
            });
            line_tripped[decision.line] = true;
        }
    }

    let mut ascb_on = vec![false; net.ascbs.len()];
    for (e, end_state) in ends.iter_mut().enumerate() {
        let end = &net.ends[e];
        let trip = line_tripped[end.line];
        let component = format!("breaker.{}", end.name);
        match (end_state, &end.breaker) {
            (EndState::None, _) => {}
            (
                EndState::Hybrid(s),
                &EndBreaker::Hybrid {
                    ufd,
                    lcs,
                    main,
                    mov,
                },
            ) => {
                let currents = HybridCurrents {
                    aux: current(state, lcs),
                    main: current(state, main),
                    mov: current(state, mov),
                };
                let (next, sw, ev) =
                    hybrid_transition(s, &config.hybrid, trip, &currents, t, eps, &component)?;
                *s = next;
                events.extend(ev);
                state.command(ufd, sw.ufd);
                state.command(lcs, sw.lcs);
                state.command(main, sw.main);
            }
            (
                EndState::Assembly(s),
                &EndBreaker::Assembly {
                    main,
                    disconnect,
                    ads_diode,
                    ads_gate,
                    ascb,
                    ..
                },
            ) => {
                let currents = AssemblyCurrents {
                    main: current(state, main),
                    breaker_path: current(state, disconnect),
                    ads: current(state, ads_diode),
                };
                let (next, sw, ev) =
                    assembly_transition(s, &config.assembly, trip, &currents, t, eps, &component)?;
                *s = next;
                events.extend(ev);
                state.command(main, sw.main);
                state.command(disconnect, sw.disconnect);
                state.command(ads_gate, sw.ads);
                ascb_on[ascb] |= sw.ascb;
            }
            _ => unreachable!("breaker state matches its elements"),
        }
    }
    for (a, on) in net.ascbs.iter().zip(ascb_on) {
        state.command(a.switch, on);
    }

    let v_pole = net.topology.pole_voltage;
    for k in 0..net.topology.converters.len() {
        let poles: Vec<_> = net
            .stations
            .iter()
            .filter(|s| s.station == k)
            .cloned()
            .collect();
        let station_current = poles
            .iter()
            .map(|p| current(state, p.reactor).abs())
            .fold(0.0, f64::max);
        let was_blocked = net.topology.converters[k].blocked;
        let mut blocked = was_blocked;
        let mut drives = Vec::new();
        for p in &poles {
            let st = &net.topology.converters[k];
            let vt = p.pole.sign() * state.node_voltages[p.bus];
            let out = converter_step(st, v_pole, vt, station_current).map_err(|e| match e {
                SimError::Divergence { component, .. } => {
                    SimError::Divergence { time: t, component }
                }
                other => other,
            })?;
            blocked |= out.blocked;
            drives.push(out.drive);
        }
        if blocked && !was_blocked {
            events.push(Event::new(
                t,
                &net.topology.converters[k].id,
                "block",
                "running",
                "blocked",
            ));
            net.topology.converters[k].blocked = true;
            // Re-evaluate so both poles see the blocked behavior this step.
            drives.clear();
            for p in &poles {
                let st = &net.topology.converters[k];
                let vt = p.pole.sign() * state.node_voltages[p.bus];
                drives.push(converter_step(st, v_pole, vt, station_current)?.drive);
            }
        }
        for (p, drive) in poles.iter().zip(drives) {
            let s = p.pole.sign();
            state.command(p.valve, !blocked);
            if let Some((_, sw)) = p.slack {
                state.command(sw, !blocked);
            }
            match drive {
                ConverterDrive::Current(i) if blocked => {
                    net.circuit.set_source(p.drive, 0.0)?;
                    net.circuit.set_source(p.feed, s * i)?;
                }
                ConverterDrive::Current(i) => {
                    net.circuit.set_source(p.drive, s * i)?;
                    net.circuit.set_source(p.feed, 0.0)?;
                }
                ConverterDrive::Voltage(_) => {}
            }
        }
    }
    Ok(())
}

// ----------------------------------------------------------------- compare

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a_design: BreakerDesign,
    pub b_design: BreakerDesign,
    pub rows: Vec<ComparisonRow>,
    /// `b / a` of the peak main-breaker current.
    pub main_breaker_stress_ratio: Option<f64>,
    /// `a - b`.
    pub interruption_time_difference: Option<f64>,
    /// `a - b`.
    pub mov_energy_difference: f64,
}

/// Side-by-side metrics of two runs of the same grid and fault.
pub fn compare(a: &SimulationResult, b: &SimulationResult) -> Result<Comparison> {
    let (ca, cb) = (&a.config, &b.config);
    if ca.topology.resolve()? != cb.topology.resolve()? {
        return Err(SimError::Mismatch("runs use different topologies".into()));
    }
    if ca.fault != cb.fault {
        return Err(SimError::Mismatch("runs use different faults".into()));
    }
    if ca.solver.dt != cb.solver.dt || a.times.len() != b.times.len() {
        return Err(SimError::Mismatch("runs use different time grids".into()));
    }
    let (ma, mb) = (&a.metrics, &b.metrics);
    let row = |label: &str, a: Option<f64>, b: Option<f64>, unit: &str| ComparisonRow {
        label: label.into(),
        a,
        b,
        unit: unit.into(),
    };
    let rows = vec![
        row(
            "Current breaking capability",
            ma.peak_fault_current,
            mb.peak_fault_current,
            "A",
        ),
        row(
            "Main-breaker stress",
            ma.max_main_breaker_current,
            mb.max_main_breaker_current,
            "A",
        ),
        row(
            "Speed of operation",
            ma.interruption_time,
            mb.interruption_time,
            "s",
        ),
        row("MOV energy", Some(ma.mov_energy), Some(mb.mov_energy), "J"),
        row(
            "Minimum bus voltage",
            Some(ma.min_bus_voltage),
            Some(mb.min_bus_voltage),
            "V",
        ),
    ];
    let main_breaker_stress_ratio = match (ma.max_main_breaker_current, mb.max_main_breaker_current)
    {
        (Some(x), Some(y)) if x > 0.0 => Some(y / x),
        _ => None,
    };
    let interruption_time_difference = match (ma.interruption_time, mb.interruption_time) {
        (Some(x), Some(y)) => Some(x - y),
        _ => None,
    };
    Ok(Comparison {
        a_design: ca.breaker_design,
        b_design: cb.breaker_design,
        rows,
        main_breaker_stress_ratio,
        interruption_time_difference,
        mov_energy_difference: ma.mov_energy - mb.mov_energy,
    })
}

/// One independent run per value of the numeric field at `path`, in the
/// order given. Runs execute in parallel.
pub fn sweep(base: &ScenarioConfig, path: &str, values: &[f64]) -> Result<Vec<SimulationResult>> {
    let configs = values
        .iter()
        .map(|v| crate::config::with_override(base, path, &v.to_string()))
        .collect::<Result<Vec<_>>>()?;
    configs.par_iter().map(run).collect()
}
