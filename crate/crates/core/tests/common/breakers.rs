//! Breaker sequence checks against a synthetic plant and inside grid runs.

use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use mtdc_sim::breaker::{
    assembly_transition, hybrid_transition, mov_energy_accumulate, AssemblyBreakerParams,
    AssemblyBreakerState, AssemblyCurrents, AssemblyPhase, HybridBreakerParams, HybridBreakerState,
    HybridCurrents, HybridPhase,
};
use mtdc_sim::network::{BreakerDesign, FaultSpec};
use mtdc_sim::scenario::{run, ScenarioConfig};

const DT: f64 = 10e-6;
const EPS: f64 = 5.0;

type CaseResult = Result<(), TestCaseError>;

/// True when `seen` walks the chain from its start without skipping or
/// revisiting a phase.
pub fn is_chain_prefix<T: PartialEq>(seen: &[T], chain: &[T]) -> bool {
    seen.len() <= chain.len() && seen.iter().zip(chain).all(|(a, b)| a == b)
}

/// Linear decay from `i0` to zero over `tau` seconds after `t0`.
fn decay(i0: f64, t0: Option<f64>, tau: f64, now: f64) -> f64 {
    match t0 {
        None => i0,
        Some(t0) if tau <= 0.0 => {
            if now > t0 {
                0.0
            } else {
                i0
            }
        }
        Some(t0) => i0 * (1.0 - (now - t0) / tau).clamp(0.0, 1.0),
    }
}

#[derive(Debug, Clone)]
pub struct HybridCase {
    pub trip_at: f64,
    pub ufd: f64,
    pub lcs: f64,
    pub turnoff: f64,
    pub commutation: f64,
    pub absorb: f64,
    pub line: f64,
}

pub fn hybrid_cases() -> impl Strategy<Value = HybridCase> {
    (
        0.0f64..0.01,
        1e-3f64..4e-3,
        0.05e-3f64..0.3e-3,
        0.1e-3f64..2e-3,
        0.0f64..0.5e-3,
        0.0f64..2e-3,
        500.0f64..4000.0,
    )
        .prop_map(
            |(trip_at, ufd, lcs, turnoff, commutation, absorb, line)| HybridCase {
                trip_at,
                ufd,
                lcs,
                turnoff,
                commutation,
                absorb,
                line,
            },
        )
}

pub fn hybrid_against_plant(c: &HybridCase) -> CaseResult {
    let p = HybridBreakerParams {
        ufd_opening_time: c.ufd,
        lcs_commutation_delay: c.lcs,
        main_breaker_turnoff_delay: c.turnoff,
        ..Default::default()
    };
    let mut s = HybridBreakerState::default();
    let mut phases = vec![s.phase];
    let (mut lcs_off_at, mut main_off_at) = (None, None);
    let mut ufd_was_closed = true;
    let mut energy = 0.0;
    for k in 0..3000 {
        let t = k as f64 * DT;
        // Plant: the aux path sheds its current some time after the LCS
        // opens; the arrester takes the line current once the main breaker
        // stops conducting and decays it.
        let aux = decay(c.line, lcs_off_at, c.commutation, t);
        let mov = if main_off_at.is_some() {
            decay(c.line, main_off_at, c.absorb, t)
        } else {
            0.0
        };
        let main = if main_off_at.is_some() {
            0.0
        } else {
            c.line - aux
        };
        let currents = HybridCurrents { aux, main, mov };
        let (n, sw, _) =
            hybrid_transition(&s, &p, t >= c.trip_at, &currents, t, EPS, "HB").unwrap();
        if ufd_was_closed && !sw.ufd {
            prop_assert!(aux.abs() < EPS, "UFD opened at {t} carrying {aux}");
        }
        ufd_was_closed = sw.ufd;
        if !sw.lcs && lcs_off_at.is_none() {
            lcs_off_at = Some(t);
        }
        if !sw.main && n.phase >= HybridPhase::MovAbsorbing && main_off_at.is_none() {
            main_off_at = Some(t);
        }
        let before = energy;
        energy = mov_energy_accumulate(energy, 1.5 * 420e3, mov, DT).unwrap();
        prop_assert!(energy >= before);
        if n.phase != s.phase {
            phases.push(n.phase);
        }
        s = n;
    }
    prop_assert!(is_chain_prefix(&phases, &HybridPhase::CHAIN), "{phases:?}");
    prop_assert_eq!(s.phase, HybridPhase::Open);
    Ok(())
}

#[derive(Debug, Clone)]
pub struct AssemblyCase {
    pub trip_at: f64,
    pub disconnect: f64,
    pub hold: f64,
    pub turnon: f64,
    pub turnoff: f64,
    pub path_decay: f64,
    pub ads_decay: f64,
    pub line: f64,
}

pub fn assembly_cases() -> impl Strategy<Value = AssemblyCase> {
    (
        0.0f64..0.01,
        2e-3f64..3e-3,
        1e-3f64..2e-3,
        0.1e-3f64..0.5e-3,
        0.1e-3f64..0.4e-3,
        0.0f64..1e-3,
        0.0f64..3e-3,
        500.0f64..4000.0,
    )
        .prop_map(
            |(trip_at, disconnect, hold, turnon, turnoff, path_decay, ads_decay, line)| {
                AssemblyCase {
                    trip_at,
                    disconnect,
                    hold,
                    turnon,
                    turnoff,
                    path_decay,
                    ads_decay,
                    line,
                }
            },
        )
}

pub fn assembly_against_plant(c: &AssemblyCase) -> CaseResult {
    let p = AssemblyBreakerParams {
        disconnect_opening_time: c.disconnect,
        ascb_hold_time: c.hold,
        ascb_turnon_delay: c.turnon,
        main_breaker_turnoff_delay: c.turnoff,
        ..Default::default()
    };
    let mut s = AssemblyBreakerState::default();
    let mut phases = vec![s.phase];
    let (mut main_off_at, mut shunt_open_at) = (None, None);
    let mut ds_was_closed = true;
    for k in 0..3000 {
        let t = k as f64 * DT;
        let path = decay(c.line, main_off_at, c.path_decay, t);
        let ads = if s.shunt_closed_at.is_some() {
            decay(c.line, shunt_open_at, c.ads_decay, t)
        } else {
            0.0
        };
        let main = if main_off_at.is_some() { 0.0 } else { path };
        let currents = AssemblyCurrents {
            main,
            breaker_path: path,
            ads,
        };
        let (n, sw, _) =
            assembly_transition(&s, &p, t >= c.trip_at, &currents, t, EPS, "AB").unwrap();
        if ds_was_closed && !sw.disconnect {
            prop_assert!(path.abs() < EPS, "disconnect opened at {t} carrying {path}");
        }
        ds_was_closed = sw.disconnect;
        if !sw.main && main_off_at.is_none() {
            main_off_at = Some(t);
        }
        if n.phase == AssemblyPhase::ShuntOpening && shunt_open_at.is_none() {
            shunt_open_at = Some(t);
        }
        if n.ads_conducting {
            prop_assert!(matches!(
                n.phase,
                AssemblyPhase::ShuntClosing
                    | AssemblyPhase::MainOff
                    | AssemblyPhase::DisconnectOpening
                    | AssemblyPhase::ShuntOpening
            ));
        }
        if n.phase != s.phase {
            phases.push(n.phase);
        }
        s = n;
    }
    prop_assert!(
        is_chain_prefix(&phases, &AssemblyPhase::CHAIN),
        "{phases:?}"
    );
    prop_assert_eq!(s.phase, AssemblyPhase::Isolated);
    Ok(())
}

pub fn negative_mov_rejected(v: f64, i: f64, dt: f64) -> CaseResult {
    prop_assert!(mov_energy_accumulate(0.0, v, -i, dt).is_err());
    prop_assert!(mov_energy_accumulate(0.0, v, i, dt).unwrap() > 0.0);
    Ok(())
}

pub fn mov_cases() -> impl Strategy<Value = (f64, f64, f64)> {
    (1.0f64..1e6, 1.0f64..1e4, 1e-7f64..1e-4)
}

fn chain_names(design: BreakerDesign) -> Vec<&'static str> {
    match design {
        BreakerDesign::Hybrid => HybridPhase::CHAIN.iter().map(|p| p.name()).collect(),
        _ => AssemblyPhase::CHAIN.iter().map(|p| p.name()).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct GridCase {
    pub hybrid: bool,
    pub line: usize,
    pub position: f64,
    pub inception: f64,
    pub ufd: f64,
    pub disconnect: f64,
    pub hold: f64,
}

pub fn grid_cases() -> impl Strategy<Value = GridCase> {
    (
        any::<bool>(),
        1usize..=6,
        0.05f64..0.95,
        0.015f64..0.025,
        1e-3f64..4e-3,
        2e-3f64..3e-3,
        1e-3f64..2e-3,
    )
        .prop_map(
            |(hybrid, line, position, inception, ufd, disconnect, hold)| GridCase {
                hybrid,
                line,
                position,
                inception,
                ufd,
                disconnect,
                hold,
            },
        )
}

/// Full grid run: phase chains, zero-current contact parting, no current
/// after the final phase, faulted ends finishing, monotone MOV energy.
pub fn grid_run_invariants(g: &GridCase) -> CaseResult {
    let design = if g.hybrid {
        BreakerDesign::Hybrid
    } else {
        BreakerDesign::Assembly
    };
    let mut c = ScenarioConfig {
        breaker_design: design,
        duration: g.inception + 0.015,
        fault: Some(FaultSpec {
            line: g.line,
            position: g.position,
            inception_time: g.inception,
            ..Default::default()
        }),
        ..Default::default()
    };
    c.hybrid.ufd_opening_time = g.ufd;
    c.assembly.disconnect_opening_time = g.disconnect;
    c.assembly.ascb_hold_time = g.hold;
    let topo = c.topology.resolve().unwrap();
    let prefix = if g.hybrid { "UFD" } else { "DS" };
    let mut ends = Vec::new();
    for l in &topo.lines {
        for b in [l.from_bus, l.to_bus] {
            ends.push(format!("L{}@{}", l.id, topo.buses[b]));
        }
    }
    c.probes = ends.iter().map(|e| format!("i:{prefix}.{e}")).collect();
    let eps = c.solver.current_epsilon;
    let r = run(&c).unwrap();

    let chain = chain_names(design);
    let opening = if g.hybrid {
        "ufd_opening"
    } else {
        "disconnect_opening"
    };
    let last = if g.hybrid { "open" } else { "isolated" };
    for end in &ends {
        let component = format!("breaker.{end}");
        let mut seen = vec!["normal"];
        for e in r
            .events
            .iter()
            .filter(|e| e.component == component && e.kind == "phase")
        {
            prop_assert_eq!(e.from.as_str(), *seen.last().unwrap());
            seen.push(chain.iter().copied().find(|n| *n == e.to).unwrap());
            let k = r
                .times
                .iter()
                .position(|&t| (t - e.t).abs() < 1e-12)
                .unwrap();
            if e.to == opening {
                let i = r.probe(&format!("i:{prefix}.{end}")).unwrap()[k];
                prop_assert!(i.abs() < eps, "{} opened carrying {} A", component, i);
            }
            if e.to == last {
                let w = r.probe(&format!("end:{end}")).unwrap();
                prop_assert!(
                    w[k..].iter().all(|i| i.abs() < eps),
                    "{} conducts after {}",
                    end,
                    last
                );
            }
        }
        prop_assert!(is_chain_prefix(&seen, &chain), "{}: {:?}", end, seen);
        if end.starts_with(&format!("L{}@", g.line)) {
            prop_assert_eq!(
                *seen.last().unwrap(),
                last,
                "faulted end {} did not finish",
                end
            );
        }
    }
    let mov = r.probe("mov_energy").unwrap();
    prop_assert!(mov.windows(2).all(|w| w[1] >= w[0]));
    prop_assert!(mov[0] >= 0.0);
    Ok(())
}
