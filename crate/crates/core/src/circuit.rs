//! Fixed-step companion-model transient solver.
//!
//! Every element is reduced to a conductance in parallel with a history
//! current source (trapezoidal rule for L and C), voltage sources are kept
//! as extra unknowns of a modified nodal system. Within a step the solver
//! iterates diode conduction flags to a fixpoint and linearizes varistors
//! with a current-limited Newton update.
//!
//! Sign convention: an element's branch current flows from `from` to `to`
//! through the element, and its branch voltage is `v(from) - v(to)`.

use std::cell::RefCell;

use nalgebra::{DMatrix, DVector, Dyn, LU};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

pub type NodeId = usize;

/// The reference node.
pub const GROUND: NodeId = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ElementId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaristorParams {
    pub reference_voltage: f64,
    pub reference_current: f64,
    pub exponent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ElementKind {
    Resistor {
        ohms: f64,
    },
    Inductor {
        henries: f64,
    },
    Capacitor {
        farads: f64,
    },
    VoltageSource {
        volts: f64,
    },
    CurrentSource {
        amperes: f64,
    },
    IdealSwitch {
        on_resistance: f64,
        off_conductance: f64,
    },
    Diode {
        on_resistance: f64,
        off_conductance: f64,
    },
    Varistor(VaristorParams),
}

impl ElementKind {
    pub fn is_switch_like(&self) -> bool {
        matches!(
            self,
            ElementKind::IdealSwitch { .. } | ElementKind::Diode { .. }
        )
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let positive = |name: &str, x: f64| {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(format!("{name} must be strictly positive, got {x}"))
            }
        };
        match *self {
            ElementKind::Resistor { ohms } => positive("resistance", ohms),
            ElementKind::Inductor { henries } => positive("inductance", henries),
            ElementKind::Capacitor { farads } => positive("capacitance", farads),
            // Sources may legitimately be zero or negative.
            ElementKind::VoltageSource { volts } if volts.is_finite() => Ok(()),
            ElementKind::CurrentSource { amperes } if amperes.is_finite() => Ok(()),
            ElementKind::VoltageSource { .. } | ElementKind::CurrentSource { .. } => {
                Err("source value must be finite".into())
            }
            ElementKind::IdealSwitch {
                on_resistance,
                off_conductance,
            }
            | ElementKind::Diode {
                on_resistance,
                off_conductance,
            } => {
                positive("on-resistance", on_resistance)?;
                positive("off-conductance", off_conductance)?;
                if on_resistance >= 1.0 / off_conductance {
                    return Err("on-resistance must be below 1/off-conductance".into());
                }
                Ok(())
            }
            ElementKind::Varistor(p) => {
                positive("reference voltage", p.reference_voltage)?;
                positive("reference current", p.reference_current)?;
                if !(p.exponent >= 1.0 && p.exponent.is_finite()) {
                    return Err(format!(
                        "varistor exponent must be >= 1, got {}",
                        p.exponent
                    ));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub name: String,
    pub kind: ElementKind,
    pub from: NodeId,
    pub to: NodeId,
}

/// A lumped network: named nodes (index 0 is ground) and elements.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Circuit {
    nodes: Vec<String>,
    elements: Vec<Element>,
}

impl Circuit {
    pub fn new() -> Self {
        Circuit {
            nodes: vec!["gnd".to_string()],
            elements: Vec::new(),
        }
    }

    /// Returns the node with this name, creating it if needed.
    pub fn node(&mut self, name: &str) -> NodeId {
        if let Some(id) = self.find_node(name) {
            return id;
        }
        self.nodes.push(name.to_string());
        self.nodes.len() - 1
    }

    pub fn find_node(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n == name)
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.nodes[id]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn add(
        &mut self,
        name: &str,
        kind: ElementKind,
        from: NodeId,
        to: NodeId,
    ) -> Result<ElementId> {
        let invalid = |reason: String| SimError::InvalidElement {
            element: name.to_string(),
            reason,
        };
        kind.validate().map_err(invalid)?;
        if from == to {
            return Err(invalid("node_from and node_to must differ".into()));
        }
        if from >= self.nodes.len() || to >= self.nodes.len() {
            return Err(invalid("unknown node".into()));
        }
        if self.find_element(name).is_some() {
            return Err(invalid("duplicate element name".into()));
        }
        self.elements.push(Element {
            name: name.to_string(),
            kind,
            from,
            to,
        });
        Ok(ElementId(self.elements.len() - 1))
    }

    pub fn element(&self, id: ElementId) -> &Element {
        &self.elements[id.0]
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn find_element(&self, name: &str) -> Option<ElementId> {
        self.elements
            .iter()
            .position(|e| e.name == name)
            .map(ElementId)
    }

    /// Updates the value of a voltage or current source.
    pub fn set_source(&mut self, id: ElementId, value: f64) -> Result<()> {
        let element = &mut self.elements[id.0];
        if !value.is_finite() {
            return Err(SimError::Divergence {
                time: f64::NAN,
                component: element.name.clone(),
            });
        }
        match &mut element.kind {
            ElementKind::VoltageSource { volts } => *volts = value,
            ElementKind::CurrentSource { amperes } => *amperes = value,
            _ => {
                return Err(SimError::InvalidElement {
                    element: element.name.clone(),
                    reason: "not a source".into(),
                })
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ChatterPolicy {
    /// Keep the oscillating elements in their previous state for the step.
    #[default]
    Freeze,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub dt: f64,
    pub max_switch_iterations: usize,
    pub max_newton_iterations: usize,
    /// Relative voltage tolerance of the varistor Newton loop.
    pub newton_tolerance: f64,
    pub kcl_tolerance: f64,
    /// The "zero current" threshold used by mechanical switching logic.
    pub current_epsilon: f64,
    pub chatter_policy: ChatterPolicy,
}

/// Largest time step that still resolves a 0.1 ms commutation.
pub const MAX_DT: f64 = 50e-6;

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 10e-6,
            max_switch_iterations: 20,
            max_newton_iterations: 10,
            newton_tolerance: 1e-6,
            kcl_tolerance: 1e-9,
            current_epsilon: 5.0,
            chatter_policy: ChatterPolicy::Freeze,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(SimError::config(
                "solver.dt",
                format!("must be in (0, {MAX_DT}] s"),
            ));
        }
        if !(self.current_epsilon > 0.0) {
            return Err(SimError::config("solver.current_epsilon", "must be > 0"));
        }
        if self.max_switch_iterations == 0 || self.max_newton_iterations == 0 {
            return Err(SimError::config("solver", "iteration caps must be >= 1"));
        }
        if !(self.kcl_tolerance > 0.0 && self.newton_tolerance > 0.0) {
            return Err(SimError::config("solver", "tolerances must be > 0"));
        }
        Ok(())
    }
}

/// Everything the solver knows at one accepted time point.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub time: f64,
    /// Indexed by node; entry 0 (ground) is always 0.
    pub node_voltages: Vec<f64>,
    /// Indexed by element.
    pub branch_currents: Vec<f64>,
    /// `Some` only for switches and diodes.
    pub conduction: Vec<Option<bool>>,
    /// Companion history current each L/C element carries into the next step.
    pub history_terms: Vec<f64>,
    /// Worst relative KCL residual of the step that produced this state.
    pub kcl_residual: f64,
    /// Elements frozen by the chattering guard during this step.
    pub frozen: Vec<ElementId>,
}

impl SolverState {
    /// All-zero state with every switch and diode non-conducting.
    pub fn zero(circuit: &Circuit) -> Self {
        SolverState {
            time: 0.0,
            node_voltages: vec![0.0; circuit.node_count()],
            branch_currents: vec![0.0; circuit.elements().len()],
            conduction: circuit
                .elements()
                .iter()
                .map(|e| e.kind.is_switch_like().then_some(false))
                .collect(),
            history_terms: vec![0.0; circuit.elements().len()],
            kcl_residual: 0.0,
            frozen: Vec::new(),
        }
    }

    pub fn branch_voltage(&self, element: &Element) -> f64 {
        self.node_voltages[element.from] - self.node_voltages[element.to]
    }

    pub fn is_on(&self, id: ElementId) -> bool {
        self.conduction[id.0].unwrap_or(false)
    }

    /// Sets the commanded state of a switch. Ignored for non-switch elements.
    pub fn command(&mut self, id: ElementId, on: bool) {
        if let Some(flag) = self.conduction[id.0].as_mut() {
            *flag = on;
        }
    }

    /// Recomputes the L/C history terms from stored branch voltages and currents.
    pub fn refresh_history(&mut self, circuit: &Circuit, dt: f64) {
        for (k, element) in circuit.elements().iter().enumerate() {
            let v = self.branch_voltage(element);
            let i = self.branch_currents[k];
            self.history_terms[k] = history_term(&element.kind, v, i, dt);
        }
    }
}

fn history_term(kind: &ElementKind, v: f64, i: f64, dt: f64) -> f64 {
    match *kind {
        ElementKind::Inductor { henries } => i + dt / (2.0 * henries) * v,
        ElementKind::Capacitor { farads } => -(i + 2.0 * farads / dt * v),
        _ => 0.0,
    }
}

/// Conductance plus parallel history current: `i = conductance * v + history_current`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Companion {
    pub conductance: f64,
    pub history_current: f64,
}

/// Power-law varistor characteristic.
pub fn varistor_current(v: f64, params: &VaristorParams) -> f64 {
    let ratio = (v / params.reference_voltage).abs();
    params.reference_current * v.signum() * ratio.powf(params.exponent)
}

fn varistor_voltage_for(i: f64, params: &VaristorParams) -> f64 {
    let ratio = (i / params.reference_current).abs();
    params.reference_voltage * i.signum() * ratio.powf(1.0 / params.exponent)
}

/// Smallest conductance a varistor linearization may take; keeps a
/// non-conducting varistor from vanishing out of the Newton update.
const VARISTOR_MIN_CONDUCTANCE: f64 = 1e-9;

fn varistor_companion(v0: f64, params: &VaristorParams) -> Companion {
    let i0 = varistor_current(v0, params);
    let slope = if v0 == 0.0 {
        0.0
    } else {
        params.exponent * i0 / v0
    };
    let g = slope.max(VARISTOR_MIN_CONDUCTANCE);
    Companion {
        conductance: g,
        history_current: i0 - g * v0,
    }
}

/// Companion model of one element at the operating point held in `state`.
///
/// For a varistor the linearization point is the branch voltage in `state`.
pub fn stamp(
    element: &Element,
    id: ElementId,
    state: &SolverState,
    config: &SolverConfig,
) -> Result<Companion> {
    let dt = config.dt;
    let c = match element.kind {
        ElementKind::Resistor { ohms } => Companion {
            conductance: 1.0 / ohms,
            history_current: 0.0,
        },
        ElementKind::Inductor { henries } => Companion {
            conductance: dt / (2.0 * henries),
            history_current: state.history_terms[id.0],
        },
        ElementKind::Capacitor { farads } => Companion {
            conductance: 2.0 * farads / dt,
            history_current: state.history_terms[id.0],
        },
        ElementKind::CurrentSource { amperes } => Companion {
            conductance: 0.0,
            history_current: amperes,
        },
        ElementKind::IdealSwitch {
            on_resistance,
            off_conductance,
        }
        | ElementKind::Diode {
            on_resistance,
            off_conductance,
        } => Companion {
            conductance: if state.is_on(id) {
                1.0 / on_resistance
            } else {
                off_conductance
            },
            history_current: 0.0,
        },
        ElementKind::Varistor(p) => varistor_companion(state.branch_voltage(element), &p),
        ElementKind::VoltageSource { .. } => {
            return Err(SimError::NoCompanion {
                element: element.name.clone(),
            })
        }
    };
    Ok(c)
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Transient,
    /// Inductors are shorts, capacitors open.
    Dc,
    /// Inductors carry fixed currents, capacitors hold fixed voltages.
    Consistent,
}

thread_local! {
    /// Last factorized matrix. Between switching events the system matrix
    /// repeats step after step, so the factorization is reused on an exact
    /// match.
    static LU_CACHE: RefCell<Option<(DMatrix<f64>, LU<f64, Dyn, Dyn>)>> = const { RefCell::new(None) };
}

/// One linear solve of the nodal system.
struct Assembly<'a> {
    circuit: &'a Circuit,
    mode: Mode,
    /// Elements stamped as voltage constraints, with their imposed voltage.
    constrained: Vec<(usize, f64)>,
}

impl<'a> Assembly<'a> {
    fn new(circuit: &'a Circuit, mode: Mode, capacitor_voltages: &[f64]) -> Self {
        let constrained = circuit
            .elements()
            .iter()
            .enumerate()
            .filter_map(|(k, e)| match (e.kind, mode) {
                (ElementKind::VoltageSource { volts }, _) => Some((k, volts)),
                (ElementKind::Inductor { .. }, Mode::Dc) => Some((k, 0.0)),
                (ElementKind::Capacitor { .. }, Mode::Consistent) => {
                    Some((k, capacitor_voltages[k]))
                }
                _ => None,
            })
            .collect();
        Assembly {
            circuit,
            mode,
            constrained,
        }
    }

    /// Companion used for element `k`, or `None` if it is a constraint.
    fn companion(
        &self,
        k: usize,
        element: &Element,
        flags: &[Option<bool>],
        vop: &[f64],
        history: &[f64],
        config: &SolverConfig,
    ) -> Option<Companion> {
        let kind = element.kind;
        match (kind, self.mode) {
            (ElementKind::VoltageSource { .. }, _) => None,
            (ElementKind::Inductor { .. }, Mode::Dc) => None,
            (ElementKind::Capacitor { .. }, Mode::Consistent) => None,
            (ElementKind::Capacitor { .. }, Mode::Dc) => Some(Companion {
                conductance: 0.0,
                history_current: 0.0,
            }),
            (ElementKind::Inductor { .. }, Mode::Consistent) => Some(Companion {
                conductance: 0.0,
                history_current: history[k],
            }),
            (ElementKind::Varistor(p), _) => Some(varistor_companion(vop[k], &p)),
            (ElementKind::Inductor { henries }, Mode::Transient) => Some(Companion {
                conductance: config.dt / (2.0 * henries),
                history_current: history[k],
            }),
            (ElementKind::Capacitor { farads }, Mode::Transient) => Some(Companion {
                conductance: 2.0 * farads / config.dt,
                history_current: history[k],
            }),
            (
                ElementKind::IdealSwitch {
                    on_resistance,
                    off_conductance,
                }
                | ElementKind::Diode {
                    on_resistance,
                    off_conductance,
                },
                _,
            ) => Some(Companion {
                conductance: if flags[k] == Some(true) {
                    1.0 / on_resistance
                } else {
                    off_conductance
                },
                history_current: 0.0,
            }),
            (ElementKind::Resistor { ohms }, _) => Some(Companion {
                conductance: 1.0 / ohms,
                history_current: 0.0,
            }),
            (ElementKind::CurrentSource { amperes }, _) => Some(Companion {
                conductance: 0.0,
                history_current: amperes,
            }),
        }
    }

    /// Solves for node voltages and branch currents.
    fn solve(
        &self,
        flags: &[Option<bool>],
        vop: &[f64],
        history: &[f64],
        config: &SolverConfig,
        time: f64,
    ) -> Result<Solution> {
        let n = self.circuit.node_count() - 1;
        let m = self.constrained.len();
        let size = n + m;
        let mut a = DMatrix::<f64>::zeros(size, size);
        let mut b = DVector::<f64>::zeros(size);
        let row = |node: NodeId| (node != GROUND).then(|| node - 1);

        let elements = self.circuit.elements();
        let mut companions = vec![None; elements.len()];
        for (k, e) in elements.iter().enumerate() {
            let Some(c) = self.companion(k, e, flags, vop, history, config) else {
                continue;
            };
            companions[k] = Some(c);
            let (f, t) = (row(e.from), row(e.to));
            if let Some(f) = f {
                a[(f, f)] += c.conductance;
                b[f] -= c.history_current;
            }
            if let Some(t) = t {
                a[(t, t)] += c.conductance;
                b[t] += c.history_current;
            }
            if let (Some(f), Some(t)) = (f, t) {
                a[(f, t)] -= c.conductance;
                a[(t, f)] -= c.conductance;
            }
        }
        for (j, &(k, volts)) in self.constrained.iter().enumerate() {
            let e = &elements[k];
            let col = n + j;
            if let Some(f) = row(e.from) {
                a[(f, col)] += 1.0;
                a[(col, f)] += 1.0;
            }
            if let Some(t) = row(e.to) {
                a[(t, col)] -= 1.0;
                a[(col, t)] -= 1.0;
            }
            b[col] = volts;
        }

        let x = LU_CACHE
            .with(|cache| {
                let mut cache = cache.borrow_mut();
                let hit = matches!(&*cache, Some((m, _)) if *m == a);
                if !hit {
                    *cache = Some((a.clone(), a.clone().lu()));
                }
                let (_, lu) = cache.as_ref().expect("cache filled above");
                let mut x = lu.solve(&b)?;
                // One round of iterative refinement.
                let r = &b - &a * &x;
                if let Some(dx) = lu.solve(&r) {
                    x += dx;
                }
                Some(x)
            })
            .ok_or(SimError::Topology { time })?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SimError::Topology { time });
        }

        let mut node_voltages = vec![0.0; n + 1];
        node_voltages[1..].copy_from_slice(&x.as_slice()[..n]);
        let mut currents = vec![0.0; elements.len()];
        for (k, e) in elements.iter().enumerate() {
            if let Some(c) = companions[k] {
                let v = node_voltages[e.from] - node_voltages[e.to];
                currents[k] = c.conductance * v + c.history_current;
            }
        }
        for (j, &(k, _)) in self.constrained.iter().enumerate() {
            currents[k] = x[n + j];
        }
        Ok(Solution {
            node_voltages,
            currents,
            companions,
        })
    }
}

struct Solution {
    node_voltages: Vec<f64>,
    currents: Vec<f64>,
    companions: Vec<Option<Companion>>,
}

/// Worst KCL residual over non-ground nodes, each normalized by the largest
/// branch current meeting at that node. Every node is also allowed the
/// rounding noise of its largest stamped term, since an on-switch current
/// is the difference of two nearly equal conductance products.
fn kcl_check(circuit: &Circuit, sol: &Solution, config: &SolverConfig, time: f64) -> Result<f64> {
    let nodes = circuit.node_count();
    let mut sum = vec![0.0; nodes];
    let mut largest = vec![0.0f64; nodes];
    let mut term = vec![0.0f64; nodes];
    for (k, e) in circuit.elements().iter().enumerate() {
        let i = sol.currents[k];
        let t = match sol.companions[k] {
            Some(c) => (c.conductance * sol.node_voltages[e.from])
                .abs()
                .max((c.conductance * sol.node_voltages[e.to]).abs())
                .max(c.history_current.abs()),
            None => i.abs(),
        };
        for (node, sign) in [(e.from, 1.0), (e.to, -1.0)] {
            sum[node] += sign * i;
            largest[node] = largest[node].max(i.abs());
            term[node] = term[node].max(t);
        }
    }
    let mut worst = 0.0f64;
    for node in 1..nodes {
        let allowance = 64.0 * f64::EPSILON * term[node];
        let excess = (sum[node].abs() - allowance).max(0.0);
        if excess == 0.0 {
            continue;
        }
        let rel = excess / largest[node].max(f64::MIN_POSITIVE);
        if rel > config.kcl_tolerance {
            return Err(SimError::KclViolation {
                time,
                node: circuit.node_name(node).to_string(),
                residual: rel,
            });
        }
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Runs the diode fixpoint and varistor Newton loops in the given mode.
fn solve_consistent(
    circuit: &Circuit,
    prev: &SolverState,
    config: &SolverConfig,
    mode: Mode,
    time: f64,
    capacitor_voltages: &[f64],
) -> Result<SolverState> {
    let elements = circuit.elements();
    let assembly = Assembly::new(circuit, mode, capacitor_voltages);
    let mut flags = prev.conduction.clone();
    let mut vop: Vec<f64> = elements.iter().map(|e| prev.branch_voltage(e)).collect();
    let varistors: Vec<usize> = elements
        .iter()
        .enumerate()
        .filter(|(_, e)| matches!(e.kind, ElementKind::Varistor(_)))
        .map(|(k, _)| k)
        .collect();
    let diodes: Vec<usize> = elements
        .iter()
        .enumerate()
        .filter(|(_, e)| matches!(e.kind, ElementKind::Diode { .. }))
        .map(|(k, _)| k)
        .collect();

    let mut frozen = Vec::new();
    let mut solution = None;
    for iteration in 0..=config.max_switch_iterations {
        let sol = newton_solve(
            &assembly,
            &flags,
            &mut vop,
            &varistors,
            &prev.history_terms,
            config,
            time,
        )?;
        if iteration == config.max_switch_iterations {
            // Out of iterations: the frozen flags below were used for this solve.
            solution = Some(sol);
            break;
        }
        let mut changed = Vec::new();
        for &k in &diodes {
            let on = flags[k] == Some(true);
            let v = sol.node_voltages[elements[k].from] - sol.node_voltages[elements[k].to];
            let next = if on { sol.currents[k] > 0.0 } else { v > 0.0 };
            if next != on {
                changed.push(k);
            }
        }
        if changed.is_empty() {
            solution = Some(sol);
            break;
        }
        for &k in &changed {
            flags[k] = Some(flags[k] != Some(true));
        }
        if iteration + 1 == config.max_switch_iterations {
            let culprit = changed[0];
            if config.chatter_policy == ChatterPolicy::Error {
                return Err(SimError::Chattering {
                    time,
                    element: elements[culprit].name.clone(),
                });
            }
            for &k in &changed {
                flags[k] = prev.conduction[k];
                frozen.push(ElementId(k));
            }
            log::warn!(
                "t={time}: freezing {} chattering element(s), first `{}`",
                frozen.len(),
                elements[culprit].name
            );
        }
    }
    let sol = solution.expect("fixpoint loop always yields a solution");
    let kcl_residual = kcl_check(circuit, &sol, config, time)?;
    let mut state = SolverState {
        time,
        node_voltages: sol.node_voltages,
        branch_currents: sol.currents,
        conduction: flags,
        history_terms: vec![0.0; elements.len()],
        kcl_residual,
        frozen,
    };
    state.refresh_history(circuit, config.dt);
    Ok(state)
}

fn newton_solve(
    assembly: &Assembly,
    flags: &[Option<bool>],
    vop: &mut [f64],
    varistors: &[usize],
    history: &[f64],
    config: &SolverConfig,
    time: f64,
) -> Result<Solution> {
    let elements = assembly.circuit.elements();
    let mut sol = assembly.solve(flags, vop, history, config, time)?;
    for _ in 1..config.max_newton_iterations.max(1) {
        let mut converged = true;
        for &k in varistors {
            let e = &elements[k];
            let ElementKind::Varistor(p) = e.kind else {
                unreachable!()
            };
            let v_new = sol.node_voltages[e.from] - sol.node_voltages[e.to];
            let v0 = vop[k];
            let mut next = v_new;
            // Current limiting: when the linear model pushes the voltage
            // outward, move to the voltage that carries the predicted current.
            if v_new.abs() > v0.abs() && (v0 == 0.0 || v_new.signum() == v0.signum()) {
                let c = sol.companions[k].expect("varistor has a companion");
                let i_lin = c.conductance * v_new + c.history_current;
                if i_lin.signum() == v_new.signum() {
                    next = varistor_voltage_for(i_lin, &p);
                }
            }
            let scale = next.abs().max(v0.abs()).max(1e-6 * p.reference_voltage);
            let c = sol.companions[k].expect("varistor has a companion");
            let exact = varistor_current(v_new, &p);
            let current_error = (c.conductance * v_new + c.history_current - exact).abs();
            let current_ok =
                current_error <= 1e-6 * p.reference_current + config.newton_tolerance * exact.abs();
            if (next - v0).abs() > config.newton_tolerance * scale && !current_ok {
                converged = false;
            }
            vop[k] = next;
        }
        if converged {
            return Ok(sol);
        }
        sol = assembly.solve(flags, vop, history, config, time)?;
    }
    Ok(sol)
}

/// Advances the network by one time step.
pub fn solve_step(
    circuit: &Circuit,
    state: &SolverState,
    config: &SolverConfig,
) -> Result<SolverState> {
    solve_consistent(
        circuit,
        state,
        config,
        Mode::Transient,
        state.time + config.dt,
        &[],
    )
}

/// Like [`solve_step`] but with an explicit time for the new state.
pub fn solve_step_at(
    circuit: &Circuit,
    state: &SolverState,
    config: &SolverConfig,
    time: f64,
) -> Result<SolverState> {
    solve_consistent(circuit, state, config, Mode::Transient, time, &[])
}

/// DC operating point: inductors shorted, capacitors open. Switch flags are
/// taken from `seed`; diodes are iterated.
pub fn dc_operating_point(
    circuit: &Circuit,
    seed: &SolverState,
    config: &SolverConfig,
) -> Result<SolverState> {
    solve_consistent(circuit, seed, config, Mode::Dc, seed.time, &[])
}

/// Builds a self-consistent state at `time` from given inductor currents and
/// capacitor voltages; everything not listed starts at zero.
pub fn initial_state(
    circuit: &Circuit,
    config: &SolverConfig,
    inductor_currents: &[(ElementId, f64)],
    capacitor_voltages: &[(ElementId, f64)],
    time: f64,
) -> Result<SolverState> {
    let mut seed = SolverState::zero(circuit);
    seed.time = time;
    for &(id, i) in inductor_currents {
        seed.history_terms[id.0] = i;
    }
    let mut fixed = vec![0.0; circuit.elements().len()];
    for &(id, v) in capacitor_voltages {
        fixed[id.0] = v;
    }
    let mut state = solve_consistent(circuit, &seed, config, Mode::Consistent, time, &fixed)?;
    for &(id, i) in inductor_currents {
        state.branch_currents[id.0] = i;
    }
    state.refresh_history(circuit, config.dt);
    Ok(state)
}
