//! Multi-terminal DC grid description and converter behavior.
//!
//! A grid is a set of buses joined by pole lines, with one converter
//! station per bus. Both poles are modeled as symmetric networks sharing
//! ground; the negative pole mirrors the positive one.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pole {
    Positive,
    Negative,
}

impl Pole {
    pub fn sign(self) -> f64 {
        match self {
            Pole::Positive => 1.0,
            Pole::Negative => -1.0,
        }
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Pole::Positive => "+",
            Pole::Negative => "-",
        }
    }

    pub fn other(self) -> Pole {
        match self {
            Pole::Positive => Pole::Negative,
            Pole::Negative => Pole::Positive,
        }
    }

    pub const BOTH: [Pole; 2] = [Pole::Positive, Pole::Negative];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ControlMode {
    /// Power into the DC side, in megawatts (negative = withdrawal).
    PowerControl { setpoint_mw: f64 },
    /// Pole-to-ground voltage held by the slack station.
    VoltageControl { setpoint_v: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConverterStation {
    pub id: String,
    pub bus: usize,
    pub control: ControlMode,
    /// Used to derive rated current for the slack station.
    pub rated_power_mw: f64,
    /// Per pole.
    pub dc_capacitance: f64,
    /// Valve current above which the IGBTs block for the rest of the run.
    pub block_current: f64,
    /// Grid-side in-feed through the freewheeling diodes once blocked.
    pub acside_feed_current: f64,
    /// Arm/smoothing inductance between the valve and the DC bus.
    pub reactor: f64,
    /// Resistance of the freewheeling diode path (arm plus AC-side).
    pub freewheel_resistance: f64,
    #[serde(skip)]
    pub blocked: bool,
}

/// Internal resistance of the slack station's voltage source.
pub const SLACK_SOURCE_RESISTANCE: f64 = 0.1;

impl ConverterStation {
    pub fn rated_current(&self, pole_voltage: f64) -> f64 {
        self.rated_power_mw.abs() * 1e6 / (2.0 * pole_voltage)
    }

    pub fn is_slack(&self) -> bool {
        matches!(self.control, ControlMode::VoltageControl { .. })
    }
}

/// What drives the DC side of a station during one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConverterDrive {
    /// Stiff current injected into the positive pole (mirrored on the negative).
    Current(f64),
    /// Slack: pole voltage behind [`SLACK_SOURCE_RESISTANCE`].
    Voltage(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConverterOutput {
    pub drive: ConverterDrive,
    pub blocked: bool,
}

/// Evaluates a station for the next step.
///
/// `terminal_voltage` is the positive-pole DC terminal voltage and
/// `station_current` the largest valve current magnitude over both poles,
/// both from the latest accepted step. A station whose current exceeds
/// `block_current` latches into the blocked state; a blocked station only
/// feeds `acside_feed_current` while the diode rectifier is forward-biased,
/// that is while the DC terminal sits below the AC-side peak (taken as the
/// pole voltage).
pub fn converter_step(
    station: &ConverterStation,
    pole_voltage: f64,
    terminal_voltage: f64,
    station_current: f64,
) -> Result<ConverterOutput> {
    if !terminal_voltage.is_finite() || !station_current.is_finite() {
        return Err(SimError::Divergence {
            time: f64::NAN,
            component: station.id.clone(),
        });
    }
    let blocked = station.blocked || station_current.abs() > station.block_current;
    let drive = if blocked {
        let forward = terminal_voltage.abs() < pole_voltage;
        ConverterDrive::Current(if forward {
            station.acside_feed_current
        } else {
            0.0
        })
    } else {
        match station.control {
            ControlMode::PowerControl { setpoint_mw } => {
                ConverterDrive::Current(setpoint_mw * 1e6 / (2.0 * pole_voltage))
            }
            ControlMode::VoltageControl { setpoint_v } => ConverterDrive::Voltage(setpoint_v),
        }
    };
    Ok(ConverterOutput { drive, blocked })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DcLine {
    /// 1-based line number.
    pub id: usize,
    pub corridor: usize,
    pub pole: Pole,
    pub from_bus: usize,
    pub to_bus: usize,
    pub resistance: f64,
    pub inductance: f64,
    /// Per end.
    #[serde(default)]
    pub series_reactor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BreakerSlot {
    LineEnd { line: usize, bus: usize },
    Bus { bus: usize, pole: Pole },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridTopology {
    pub buses: Vec<String>,
    pub lines: Vec<DcLine>,
    pub converters: Vec<ConverterStation>,
    pub breaker_slots: Vec<BreakerSlot>,
    pub pole_voltage: f64,
    /// Shunt capacitance of each bus, per pole.
    pub bus_capacitance: f64,
}

/// Construction constants of the three-terminal default grid.
///
/// Per-km line data, corridor lengths and station sizing. The station
/// quantities marked "calibrated" were tuned together so that a bolted
/// pole-to-pole fault with breakers disabled lifts the faulted-line current
/// to 3-5 times its pre-fault value 10 ms after inception.
pub mod defaults {
    pub const POLE_VOLTAGE: f64 = 420e3;
    pub const LINE_RESISTANCE_PER_KM: f64 = 0.01;
    pub const LINE_INDUCTANCE_PER_KM: f64 = 0.16e-3;
    /// Corridors 1..3: (from station, to station, length km).
    pub const CORRIDORS: [(usize, usize, f64); 3] = [(0, 2, 100.0), (0, 1, 150.0), (1, 2, 120.0)];
    pub const CORRIDOR_COUNT: usize = 3;
    pub const LINE_COUNT: usize = 6;
    pub const DC_CAPACITANCE: f64 = 150e-6;
    pub const SLACK_RATED_MW: f64 = 200.0;
    /// Multiple of rated current (calibrated).
    pub const BLOCK_CURRENT_FACTOR: f64 = 8.0;
    /// Multiple of rated current (calibrated).
    pub const FEED_CURRENT_FACTOR: f64 = 1.5;
    /// Calibrated.
    pub const CONVERTER_REACTOR: f64 = 50e-3;
    /// Calibrated.
    pub const FREEWHEEL_RESISTANCE: f64 = 50.0;
    /// Calibrated.
    pub const SERIES_REACTOR: f64 = 40e-3;
    pub const BUS_CAPACITANCE: f64 = 1e-6;
}

impl GridTopology {
    pub fn line(&self, id: usize) -> Option<&DcLine> {
        self.lines.iter().find(|l| l.id == id)
    }

    /// The other pole line of the same corridor.
    pub fn partner(&self, id: usize) -> Option<&DcLine> {
        let line = self.line(id)?;
        self.lines
            .iter()
            .find(|l| l.corridor == line.corridor && l.pole != line.pole)
    }

    pub fn corridor_line(&self, corridor: usize, pole: Pole) -> Option<&DcLine> {
        self.lines
            .iter()
            .find(|l| l.corridor == corridor && l.pole == pole)
    }

    pub fn corridor_count(&self) -> usize {
        let mut c: Vec<usize> = self.lines.iter().map(|l| l.corridor).collect();
        c.sort_unstable();
        c.dedup();
        c.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pole_voltage > 0.0) {
            return Err(SimError::config("topology.pole_voltage", "must be > 0"));
        }
        if !(self.bus_capacitance > 0.0) {
            return Err(SimError::config("topology.bus_capacitance", "must be > 0"));
        }
        let slack = self.converters.iter().filter(|c| c.is_slack()).count();
        if slack != 1 {
            return Err(SimError::config(
                "topology.converters",
                format!("exactly one voltage-controlled station required, found {slack}"),
            ));
        }
        for c in &self.converters {
            let field = |f: &str| format!("topology.converters.{}.{f}", c.id);
            if c.bus >= self.buses.len() {
                return Err(SimError::config(field("bus"), "unknown bus"));
            }
            let rated = match c.control {
                ControlMode::PowerControl { setpoint_mw } => {
                    setpoint_mw.abs().max(c.rated_power_mw.abs())
                }
                ControlMode::VoltageControl { .. } => c.rated_power_mw.abs(),
            } * 1e6
                / (2.0 * self.pole_voltage);
            if !(c.block_current > rated) {
                return Err(SimError::config(
                    field("block_current"),
                    "must exceed rated DC current",
                ));
            }
            if !(c.acside_feed_current >= 0.0) {
                return Err(SimError::config(
                    field("acside_feed_current"),
                    "must be >= 0",
                ));
            }
            for (name, v) in [
                ("dc_capacitance", c.dc_capacitance),
                ("reactor", c.reactor),
                ("freewheel_resistance", c.freewheel_resistance),
            ] {
                if !(v > 0.0) {
                    return Err(SimError::config(field(name), "must be > 0"));
                }
            }
        }
        let mut ids: Vec<usize> = self.lines.iter().map(|l| l.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.lines.len() {
            return Err(SimError::config("topology.lines", "duplicate line id"));
        }
        for l in &self.lines {
            let field = |f: &str| format!("topology.lines.{}.{f}", l.id);
            if !(l.resistance > 0.0) {
                return Err(SimError::config(field("resistance"), "must be > 0"));
            }
            if !(l.inductance > 0.0) {
                return Err(SimError::config(field("inductance"), "must be > 0"));
            }
            if !(l.series_reactor >= 0.0) {
                return Err(SimError::config(field("series_reactor"), "must be >= 0"));
            }
            if l.from_bus >= self.buses.len()
                || l.to_bus >= self.buses.len()
                || l.from_bus == l.to_bus
            {
                return Err(SimError::config(field("buses"), "invalid bus pair"));
            }
            for bus in [l.from_bus, l.to_bus] {
                let slot = BreakerSlot::LineEnd { line: l.id, bus };
                if !self.breaker_slots.contains(&slot) {
                    return Err(SimError::config(
                        field("breaker_slots"),
                        "every line end needs a breaker slot",
                    ));
                }
            }
        }
        if !self.is_connected() {
            return Err(SimError::config("topology", "grid is not connected"));
        }
        Ok(())
    }

    fn is_connected(&self) -> bool {
        if self.buses.is_empty() {
            return false;
        }
        let mut seen = vec![false; self.buses.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(b) = stack.pop() {
            for l in &self.lines {
                let next = if l.from_bus == b {
                    l.to_bus
                } else if l.to_bus == b {
                    l.from_bus
                } else {
                    continue;
                };
                if !seen[next] {
                    seen[next] = true;
                    stack.push(next);
                }
            }
        }
        seen.iter().all(|&s| s)
    }
}

fn station(id: &str, bus: usize, control: ControlMode, rated_mw: f64) -> ConverterStation {
    let rated = rated_mw * 1e6 / (2.0 * defaults::POLE_VOLTAGE);
    ConverterStation {
        id: id.to_string(),
        bus,
        control,
        rated_power_mw: rated_mw,
        dc_capacitance: defaults::DC_CAPACITANCE,
        block_current: defaults::BLOCK_CURRENT_FACTOR * rated,
        acside_feed_current: defaults::FEED_CURRENT_FACTOR * rated,
        reactor: defaults::CONVERTER_REACTOR,
        freewheel_resistance: defaults::FREEWHEEL_RESISTANCE,
        blocked: false,
    }
}

/// The three-terminal bipolar grid: an offshore station injecting 150 MW,
/// a receiving station drawing 200 MW and a slack station holding ±420 kV.
///
/// Corridor `k` carries line `2k-1` on the positive pole and line `2k` on
/// the negative pole.
pub fn build_three_terminal_default() -> GridTopology {
    let v = defaults::POLE_VOLTAGE;
    let converters = vec![
        station(
            "C1",
            0,
            ControlMode::PowerControl { setpoint_mw: 150.0 },
            150.0,
        ),
        station(
            "C2",
            1,
            ControlMode::PowerControl {
                setpoint_mw: -200.0,
            },
            200.0,
        ),
        station(
            "C3",
            2,
            ControlMode::VoltageControl { setpoint_v: v },
            defaults::SLACK_RATED_MW,
        ),
    ];
    let mut lines = Vec::new();
    let mut breaker_slots = Vec::new();
    for (k, &(from, to, km)) in defaults::CORRIDORS.iter().enumerate() {
        for (p, pole) in Pole::BOTH.into_iter().enumerate() {
            let id = 2 * k + p + 1;
            lines.push(DcLine {
                id,
                corridor: k + 1,
                pole,
                from_bus: from,
                to_bus: to,
                resistance: defaults::LINE_RESISTANCE_PER_KM * km,
                inductance: defaults::LINE_INDUCTANCE_PER_KM * km,
                series_reactor: defaults::SERIES_REACTOR,
            });
            breaker_slots.push(BreakerSlot::LineEnd {
                line: id,
                bus: from,
            });
            breaker_slots.push(BreakerSlot::LineEnd { line: id, bus: to });
        }
    }
    for bus in 0..3 {
        for pole in Pole::BOTH {
            breaker_slots.push(BreakerSlot::Bus { bus, pole });
        }
    }
    GridTopology {
        buses: vec!["B1".into(), "B2".into(), "B3".into()],
        lines,
        converters,
        breaker_slots,
        pole_voltage: v,
        bus_capacitance: defaults::BUS_CAPACITANCE,
    }
}
