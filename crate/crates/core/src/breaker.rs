//! Hybrid and assembly DC breaker sequencing.
//!
//! Both breakers are timed state machines that read local measurements once
//! per step and emit switch commands for the next step. They know nothing
//! about the circuit; the network layer maps commands onto switch elements.

use serde::{Deserialize, Serialize};

use crate::circuit::VaristorParams;
use crate::error::{Result, SimError};

/// Slack on delay comparisons so delays that are exact multiples of the
/// step fire on the intended sample.
const TIME_SLACK: f64 = 1e-12;

/// One entry of the run's event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub component: String,
    pub kind: String,
    pub from: String,
    pub to: String,
}

impl Event {
    pub fn new(t: f64, component: &str, kind: &str, from: &str, to: &str) -> Self {
        Event {
            t,
            component: component.to_string(),
            kind: kind.to_string(),
            from: from.to_string(),
            to: to.to_string(),
        }
    }
}

/// Surge arrester data shared by both designs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovParams {
    pub mov_reference_voltage: f64,
    pub mov_reference_current: f64,
    pub mov_exponent: f64,
}

impl MovParams {
    /// Arrester rated at 1.5 times the pole voltage.
    pub fn for_pole_voltage(pole_voltage: f64) -> Self {
        MovParams {
            mov_reference_voltage: 1.5 * pole_voltage,
            mov_reference_current: 1000.0,
            mov_exponent: 25.0,
        }
    }

    pub fn varistor(&self) -> VaristorParams {
        VaristorParams {
            reference_voltage: self.mov_reference_voltage,
            reference_current: self.mov_reference_current,
            exponent: self.mov_exponent,
        }
    }

    fn validate(&self, prefix: &str) -> Result<()> {
        if !(self.mov_reference_voltage > 0.0) {
            return Err(SimError::config(
                format!("{prefix}.mov_reference_voltage"),
                "must be > 0",
            ));
        }
        if !(self.mov_reference_current > 0.0) {
            return Err(SimError::config(
                format!("{prefix}.mov_reference_current"),
                "must be > 0",
            ));
        }
        if !(self.mov_exponent >= 1.0) {
            return Err(SimError::config(
                format!("{prefix}.mov_exponent"),
                "must be >= 1",
            ));
        }
        Ok(())
    }
}

impl Default for MovParams {
    fn default() -> Self {
        MovParams::for_pole_voltage(420e3)
    }
}

/// Adds `v * i * dt` of arrester energy. Simulations call it once per step
/// end with `dt / 2`, which integrates power by the trapezoid rule. Increments within `1e-6` J of zero on the negative
/// side are rounding noise at a current zero and count as zero.
pub fn mov_energy_accumulate(energy: f64, v: f64, i: f64, dt: f64) -> Result<f64> {
    let inc = v * i * dt;
    if inc < -1e-6 || !inc.is_finite() {
        return Err(SimError::InvariantViolation {
            time: f64::NAN,
            component: "mov".into(),
            reason: format!("negative energy increment {inc:e} J"),
        });
    }
    Ok(energy + inc.max(0.0))
}

fn elapsed(now: f64, since: f64, delay: f64) -> bool {
    now - since >= delay - TIME_SLACK
}

fn check_time(now: f64, last: f64, component: &str) -> Result<()> {
    if !now.is_finite() || now + TIME_SLACK < last {
        return Err(SimError::InvariantViolation {
            time: now,
            component: component.to_string(),
            reason: format!("time went backwards (previous {last})"),
        });
    }
    Ok(())
}

fn positive_delay(field: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(SimError::config(field, "must be a finite positive time"));
    }
    Ok(())
}

fn delay_in(field: &str, v: f64, lo: f64, hi: f64) -> Result<()> {
    if !(v >= lo - TIME_SLACK && v <= hi + TIME_SLACK) {
        return Err(SimError::config(
            field,
            format!("must be in [{lo}, {hi}] s"),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------- hybrid

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HybridBreakerParams {
    pub lcs_commutation_delay: f64,
    pub ufd_opening_time: f64,
    /// From the open command to the main-breaker IGBTs ceasing to conduct.
    pub main_breaker_turnoff_delay: f64,
    /// UFD plus LCS, the normally conducting auxiliary path.
    pub lcs_on_resistance: f64,
    pub main_on_resistance: f64,
    pub mov: MovParams,
}

impl Default for HybridBreakerParams {
    fn default() -> Self {
        HybridBreakerParams {
            lcs_commutation_delay: 0.1e-3,
            ufd_opening_time: 2e-3,
            main_breaker_turnoff_delay: 1.0e-3,
            lcs_on_resistance: 1e-3,
            main_on_resistance: 0.01,
            mov: MovParams::default(),
        }
    }
}

impl HybridBreakerParams {
    pub fn validate(&self) -> Result<()> {
        positive_delay("hybrid.lcs_commutation_delay", self.lcs_commutation_delay)?;
        positive_delay("hybrid.ufd_opening_time", self.ufd_opening_time)?;
        delay_in("hybrid.ufd_opening_time", self.ufd_opening_time, 1e-3, 4e-3)?;
        positive_delay(
            "hybrid.main_breaker_turnoff_delay",
            self.main_breaker_turnoff_delay,
        )?;
        if !(self.lcs_on_resistance > 0.0) {
            return Err(SimError::config("hybrid.lcs_on_resistance", "must be > 0"));
        }
        if !(self.main_on_resistance > 0.0) {
            return Err(SimError::config("hybrid.main_on_resistance", "must be > 0"));
        }
        self.mov.validate("hybrid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HybridPhase {
    Normal,
    CommutatingToMain,
    UfdOpening,
    Interrupting,
    MovAbsorbing,
    Open,
}

impl HybridPhase {
    pub const CHAIN: [HybridPhase; 6] = [
        HybridPhase::Normal,
        HybridPhase::CommutatingToMain,
        HybridPhase::UfdOpening,
        HybridPhase::Interrupting,
        HybridPhase::MovAbsorbing,
        HybridPhase::Open,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HybridPhase::Normal => "normal",
            HybridPhase::CommutatingToMain => "commutating_to_main",
            HybridPhase::UfdOpening => "ufd_opening",
            HybridPhase::Interrupting => "interrupting",
            HybridPhase::MovAbsorbing => "mov_absorbing",
            HybridPhase::Open => "open",
        }
    }
}

/// Conduction commands for the hybrid breaker's switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HybridSwitches {
    pub ufd: bool,
    pub lcs: bool,
    pub main: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HybridCurrents {
    /// UFD/LCS auxiliary path.
    pub aux: f64,
    pub main: f64,
    pub mov: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridBreakerState {
    pub phase: HybridPhase,
    pub phase_entry_time: f64,
    pub mov_energy: f64,
    pub trip_time: Option<f64>,
    pub main_open_command: Option<f64>,
    pub max_main_current: f64,
    last_time: f64,
}

impl Default for HybridBreakerState {
    fn default() -> Self {
        HybridBreakerState {
            phase: HybridPhase::Normal,
            phase_entry_time: 0.0,
            mov_energy: 0.0,
            trip_time: None,
            main_open_command: None,
            max_main_current: 0.0,
            last_time: f64::NEG_INFINITY,
        }
    }
}

impl HybridBreakerState {
    /// Commands valid from `now` until the next call. The main breaker is
    /// gated on at the trip so the LCS can hand its current over.
    pub fn switches(&self, params: &HybridBreakerParams, now: f64) -> HybridSwitches {
        use HybridPhase::*;
        match self.phase {
            Normal => HybridSwitches {
                ufd: true,
                lcs: true,
                main: false,
            },
            CommutatingToMain => HybridSwitches {
                ufd: true,
                lcs: !elapsed(now, self.phase_entry_time, params.lcs_commutation_delay),
                main: true,
            },
            UfdOpening | Interrupting => HybridSwitches {
                ufd: false,
                lcs: false,
                main: true,
            },
            MovAbsorbing | Open => HybridSwitches {
                ufd: false,
                lcs: false,
                main: false,
            },
        }
    }
}

/// Advances a hybrid breaker to `now` and returns the commands for the next
/// step. At most one phase change happens per call, so no phase is skipped.
pub fn hybrid_transition(
    state: &HybridBreakerState,
    params: &HybridBreakerParams,
    trip: bool,
    currents: &HybridCurrents,
    now: f64,
    epsilon: f64,
    component: &str,
) -> Result<(HybridBreakerState, HybridSwitches, Vec<Event>)> {
    use HybridPhase::*;
    check_time(now, state.last_time, component)?;
    let mut next = state.clone();
    next.last_time = now;
    next.max_main_current = next.max_main_current.max(currents.main.abs());
    let entered = state.phase_entry_time;
    let target = match state.phase {
        Normal if trip => {
            next.trip_time = Some(now);
            Some(CommutatingToMain)
        }
        CommutatingToMain
            if elapsed(now, entered, params.lcs_commutation_delay)
                && currents.aux.abs() < epsilon =>
        {
            Some(UfdOpening)
        }
        UfdOpening if elapsed(now, entered, params.ufd_opening_time) => {
            next.main_open_command = Some(now);
            Some(Interrupting)
        }
        Interrupting if elapsed(now, entered, params.main_breaker_turnoff_delay) => {
            Some(MovAbsorbing)
        }
        MovAbsorbing if currents.mov.abs() < epsilon => Some(Open),
        _ => None,
    };
    let mut events = Vec::new();
    if let Some(to) = target {
        if to == UfdOpening && currents.aux.abs() >= epsilon {
            return Err(SimError::InvariantViolation {
                time: now,
                component: component.to_string(),
                reason: format!("UFD opened carrying {} A", currents.aux),
            });
        }
        events.push(Event::new(
            now,
            component,
            "phase",
            state.phase.name(),
            to.name(),
        ));
        next.phase = to;
        next.phase_entry_time = now;
    }
    let switches = next.switches(params, now);
    Ok((next, switches, events))
}

// -------------------------------------------------------------- assembly

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssemblyBreakerParams {
    pub ascb_turnon_delay: f64,
    /// Counted from ASCB closure.
    pub main_breaker_turnoff_delay: f64,
    pub disconnect_opening_time: f64,
    /// Counted from ASCB closure.
    pub ascb_hold_time: f64,
    pub ads_discharge_resistance: f64,
    /// Series resistance of the ASCB shunt branch.
    pub ascb_resistance: f64,
    pub main_on_resistance: f64,
    pub mov: MovParams,
}

impl Default for AssemblyBreakerParams {
    fn default() -> Self {
        AssemblyBreakerParams {
            ascb_turnon_delay: 0.3e-3,
            main_breaker_turnoff_delay: 0.2e-3,
            disconnect_opening_time: 2.5e-3,
            ascb_hold_time: 1.5e-3,
            ads_discharge_resistance: 100.0,
            ascb_resistance: 1.0,
            main_on_resistance: 1e-3,
            mov: MovParams::default(),
        }
    }
}

impl AssemblyBreakerParams {
    pub fn validate(&self) -> Result<()> {
        positive_delay("assembly.ascb_turnon_delay", self.ascb_turnon_delay)?;
        positive_delay(
            "assembly.main_breaker_turnoff_delay",
            self.main_breaker_turnoff_delay,
        )?;
        delay_in(
            "assembly.disconnect_opening_time",
            self.disconnect_opening_time,
            2e-3,
            3e-3,
        )?;
        delay_in("assembly.ascb_hold_time", self.ascb_hold_time, 1e-3, 2e-3)?;
        for (field, v) in [
            (
                "assembly.ads_discharge_resistance",
                self.ads_discharge_resistance,
            ),
            ("assembly.ascb_resistance", self.ascb_resistance),
            ("assembly.main_on_resistance", self.main_on_resistance),
        ] {
            if !(v > 0.0) {
                return Err(SimError::config(field, "must be > 0"));
            }
        }
        self.mov.validate("assembly")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssemblyPhase {
    Normal,
    ShuntClosing,
    MainOff,
    DisconnectOpening,
    ShuntOpening,
    Isolated,
}

impl AssemblyPhase {
    pub const CHAIN: [AssemblyPhase; 6] = [
        AssemblyPhase::Normal,
        AssemblyPhase::ShuntClosing,
        AssemblyPhase::MainOff,
        AssemblyPhase::DisconnectOpening,
        AssemblyPhase::ShuntOpening,
        AssemblyPhase::Isolated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AssemblyPhase::Normal => "normal",
            AssemblyPhase::ShuntClosing => "shunt_closing",
            AssemblyPhase::MainOff => "main_off",
            AssemblyPhase::DisconnectOpening => "disconnect_opening",
            AssemblyPhase::ShuntOpening => "shunt_opening",
            AssemblyPhase::Isolated => "isolated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssemblySwitches {
    pub main: bool,
    pub disconnect: bool,
    pub ascb: bool,
    /// Thyristor gate of the ADS; its diode still blocks reverse current.
    pub ads: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AssemblyCurrents {
    pub main: f64,
    /// Through the disconnect: main breaker plus its arrester.
    pub breaker_path: f64,
    pub ads: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssemblyBreakerState {
    pub phase: AssemblyPhase,
    pub phase_entry_time: f64,
    pub ads_conducting: bool,
    pub mov_energy: f64,
    pub trip_time: Option<f64>,
    pub shunt_closed_at: Option<f64>,
    pub max_main_current: f64,
    last_time: f64,
}

impl Default for AssemblyBreakerState {
    fn default() -> Self {
        AssemblyBreakerState {
            phase: AssemblyPhase::Normal,
            phase_entry_time: 0.0,
            ads_conducting: false,
            mov_energy: 0.0,
            trip_time: None,
            shunt_closed_at: None,
            max_main_current: 0.0,
            last_time: f64::NEG_INFINITY,
        }
    }
}

impl AssemblyBreakerState {
    pub fn switches(&self) -> AssemblySwitches {
        use AssemblyPhase::*;
        AssemblySwitches {
            main: matches!(self.phase, Normal | ShuntClosing),
            disconnect: matches!(self.phase, Normal | ShuntClosing | MainOff),
            ascb: self.shunt_closed_at.is_some()
                && matches!(self.phase, ShuntClosing | MainOff | DisconnectOpening),
            ads: self.ads_conducting,
        }
    }
}

/// ADS gate after the latest sample. The thyristor is fired with the ASCB;
/// once the shunt opens it keeps conducting only while current flows and
/// latches off at the first sample below `epsilon`.
pub fn ads_update(state: &AssemblyBreakerState, ads_current: f64, epsilon: f64) -> bool {
    use AssemblyPhase::*;
    match state.phase {
        Normal | Isolated => false,
        ShuntClosing | MainOff | DisconnectOpening => state.shunt_closed_at.is_some(),
        ShuntOpening => state.ads_conducting && ads_current.abs() >= epsilon,
    }
}

/// Advances an assembly breaker to `now`; at most one phase change per call.
pub fn assembly_transition(
    state: &AssemblyBreakerState,
    params: &AssemblyBreakerParams,
    trip: bool,
    currents: &AssemblyCurrents,
    now: f64,
    epsilon: f64,
    component: &str,
) -> Result<(AssemblyBreakerState, AssemblySwitches, Vec<Event>)> {
    use AssemblyPhase::*;
    check_time(now, state.last_time, component)?;
    let mut next = state.clone();
    next.last_time = now;
    next.max_main_current = next.max_main_current.max(currents.main.abs());
    let mut events = Vec::new();

    if state.phase == ShuntClosing
        && state.shunt_closed_at.is_none()
        && elapsed(now, state.phase_entry_time, params.ascb_turnon_delay)
    {
        next.shunt_closed_at = Some(now);
        events.push(Event::new(now, component, "ascb", "open", "closed"));
    }
    let closed_at = next.shunt_closed_at;
    let since_closure = |delay: f64| closed_at.is_some_and(|tc| elapsed(now, tc, delay));

    let target = match state.phase {
        Normal if trip => {
            next.trip_time = Some(now);
            Some(ShuntClosing)
        }
        ShuntClosing if since_closure(params.main_breaker_turnoff_delay) => Some(MainOff),
        MainOff if currents.breaker_path.abs() < epsilon => Some(DisconnectOpening),
        DisconnectOpening if since_closure(params.ascb_hold_time) => Some(ShuntOpening),
        ShuntOpening if !state.ads_conducting || currents.ads.abs() < epsilon => Some(Isolated),
        _ => None,
    };
    if let Some(to) = target {
        if to == DisconnectOpening && currents.breaker_path.abs() >= epsilon {
            return Err(SimError::InvariantViolation {
                time: now,
                component: component.to_string(),
                reason: format!("disconnect opened carrying {} A", currents.breaker_path),
            });
        }
        events.push(Event::new(
            now,
            component,
            "phase",
            state.phase.name(),
            to.name(),
        ));
        if to == ShuntOpening
            && !elapsed(now, state.phase_entry_time, params.disconnect_opening_time)
        {
            events.push(Event::new(
                now,
                component,
                "overlap",
                "disconnect_moving",
                "shunt_opening",
            ));
        }
        next.phase = to;
        next.phase_entry_time = now;
    }
    let was = next.ads_conducting;
    next.ads_conducting = ads_update(&next, currents.ads, epsilon);
    if was != next.ads_conducting {
        let (from, to) = if was { ("on", "off") } else { ("off", "on") };
        events.push(Event::new(now, component, "ads", from, to));
    }
    Ok((next.clone(), next.switches(), events))
}
