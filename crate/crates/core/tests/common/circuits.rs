//! Small circuits with closed-form solutions.

use mtdc_sim::circuit::{
    initial_state, solve_step, Circuit, ElementId, ElementKind, SolverConfig, SolverState, GROUND,
};

pub fn config(dt: f64) -> SolverConfig {
    SolverConfig {
        dt,
        ..SolverConfig::default()
    }
}

/// 100 V step into 1 ohm + 0.1 H.
fn rl() -> (Circuit, ElementId) {
    let mut c = Circuit::new();
    let s = c.node("s");
    let m = c.node("m");
    c.add("V", ElementKind::VoltageSource { volts: 100.0 }, s, GROUND)
        .unwrap();
    c.add("R", ElementKind::Resistor { ohms: 1.0 }, s, m)
        .unwrap();
    let inductor = c
        .add("L", ElementKind::Inductor { henries: 0.1 }, m, GROUND)
        .unwrap();
    (c, inductor)
}

pub fn rl_exact(t: f64) -> f64 {
    100.0 * (1.0 - (-10.0 * t).exp())
}

/// Samples (t, i_L) of the RL step up to `t_end`.
pub fn run_rl(dt: f64, t_end: f64) -> Vec<(f64, f64)> {
    let (circuit, inductor) = rl();
    let cfg = config(dt);
    let mut state = initial_state(&circuit, &cfg, &[(inductor, 0.0)], &[], 0.0).unwrap();
    let steps = (t_end / dt).round() as usize;
    let mut out = vec![(0.0, state.branch_currents[inductor.0])];
    for k in 1..=steps {
        state = solve_step(&circuit, &state, &cfg).unwrap();
        out.push((k as f64 * dt, state.branch_currents[inductor.0]));
    }
    out
}

pub const V0: f64 = 1000.0;
const R: f64 = 1.0;
const L: f64 = 0.1;
const C: f64 = 1e-3;

pub struct Rlc {
    pub circuit: Circuit,
    pub cap: ElementId,
    pub ind: ElementId,
    pub res: ElementId,
}

/// Charged capacitor discharging through series R and L (underdamped).
fn rlc() -> Rlc {
    let mut c = Circuit::new();
    let a = c.node("a");
    let b = c.node("b");
    let cap = c
        .add("C", ElementKind::Capacitor { farads: C }, a, GROUND)
        .unwrap();
    let ind = c
        .add("L", ElementKind::Inductor { henries: L }, a, b)
        .unwrap();
    let res = c
        .add("R", ElementKind::Resistor { ohms: R }, b, GROUND)
        .unwrap();
    Rlc {
        circuit: c,
        cap,
        ind,
        res,
    }
}

/// Damping rate and damped angular frequency.
pub fn rlc_constants() -> (f64, f64) {
    let alpha = R / (2.0 * L);
    let w0 = 1.0 / (L * C).sqrt();
    (alpha, (w0 * w0 - alpha * alpha).sqrt())
}

pub fn rlc_exact(t: f64) -> f64 {
    let (alpha, wd) = rlc_constants();
    V0 / (wd * L) * (-alpha * t).exp() * (wd * t).sin()
}

pub fn run_rlc(dt: f64, t_end: f64) -> (Vec<(f64, f64)>, Vec<SolverState>, Rlc) {
    let net = rlc();
    let cfg = config(dt);
    let mut state =
        initial_state(&net.circuit, &cfg, &[(net.ind, 0.0)], &[(net.cap, V0)], 0.0).unwrap();
    let steps = (t_end / dt).round() as usize;
    let mut samples = vec![(0.0, 0.0)];
    let mut states = vec![state.clone()];
    for k in 1..=steps {
        state = solve_step(&net.circuit, &state, &cfg).unwrap();
        samples.push((k as f64 * dt, state.branch_currents[net.ind.0]));
        states.push(state.clone());
    }
    (samples, states, net)
}

pub fn max_error(samples: &[(f64, f64)], exact: impl Fn(f64) -> f64) -> f64 {
    samples
        .iter()
        .map(|&(t, i)| (i - exact(t)).abs())
        .fold(0.0, f64::max)
}

/// Relative error of the RL current at 0.1 s, dt = 10 us.
pub fn rl_relative_error() -> f64 {
    let (t, i) = *run_rl(10e-6, 0.1).last().unwrap();
    assert!((t - 0.1).abs() < 1e-12);
    let exact = rl_exact(0.1);
    ((i - exact) / exact).abs()
}

/// Relative errors of the first current peak and its time, dt = 10 us.
pub fn rlc_peak_errors() -> (f64, f64) {
    let (samples, _, _) = run_rlc(10e-6, 0.04);
    let (alpha, wd) = rlc_constants();
    let t_peak = (wd / alpha).atan() / wd;
    let i_peak = rlc_exact(t_peak);
    let k = (0..samples.len())
        .max_by(|&a, &b| samples[a].1.total_cmp(&samples[b].1))
        .unwrap();
    // Parabola through the three samples around the maximum.
    let (y0, y1, y2) = (samples[k - 1].1, samples[k].1, samples[k + 1].1);
    let offset = 0.5 * (y0 - y2) / (y0 - 2.0 * y1 + y2);
    let t_est = samples[k].0 + offset * 10e-6;
    let i_est = y1 - 0.25 * (y0 - y2) * offset;
    (
        ((i_est - i_peak) / i_peak).abs(),
        ((t_est - t_peak) / t_peak).abs(),
    )
}

/// Max-error ratios for dt = 20 us against 10 us, RL then RLC.
pub fn convergence_ratios() -> (f64, f64) {
    let rl = max_error(&run_rl(20e-6, 0.1), rl_exact) / max_error(&run_rl(10e-6, 0.1), rl_exact);
    let rlc = max_error(&run_rlc(20e-6, 0.04).0, rlc_exact)
        / max_error(&run_rlc(10e-6, 0.04).0, rlc_exact);
    (rl, rlc)
}

/// |initial - final - dissipated| / initial for the free RLC discharge.
pub fn energy_mismatch() -> f64 {
    let dt = 10e-6;
    let (_, states, net) = run_rlc(dt, 0.1);
    let c = &net.circuit;
    let stored = |s: &SolverState| {
        let v = s.branch_voltage(c.element(net.cap));
        let i = s.branch_currents[net.ind.0];
        0.5 * C * v * v + 0.5 * L * i * i
    };
    let mut dissipated = 0.0;
    for w in states.windows(2) {
        let v = 0.5
            * (w[0].branch_voltage(c.element(net.res)) + w[1].branch_voltage(c.element(net.res)));
        let i = 0.5 * (w[0].branch_currents[net.res.0] + w[1].branch_currents[net.res.0]);
        dissipated += v * i * dt;
    }
    let initial = stored(&states[0]);
    let last = stored(states.last().unwrap());
    (initial - last - dissipated).abs() / initial
}

pub fn max_kcl_residual() -> f64 {
    let (_, states, _) = run_rlc(10e-6, 0.02);
    states.iter().map(|s| s.kcl_residual).fold(0.0, f64::max)
}

/// Most negative diode current under a 50 Hz source into R-L, and the
/// current epsilon it is judged against.
pub fn diode_min_current() -> (f64, f64) {
    let mut c = Circuit::new();
    let s = c.node("s");
    let k = c.node("k");
    let m = c.node("m");
    let src = c
        .add("V", ElementKind::VoltageSource { volts: 0.0 }, s, GROUND)
        .unwrap();
    let d = c
        .add(
            "D",
            ElementKind::Diode {
                on_resistance: 1e-3,
                off_conductance: 1e-9,
            },
            s,
            k,
        )
        .unwrap();
    c.add("R", ElementKind::Resistor { ohms: 10.0 }, k, m)
        .unwrap();
    c.add("L", ElementKind::Inductor { henries: 0.02 }, m, GROUND)
        .unwrap();
    let cfg = SolverConfig::default();
    let mut state = SolverState::zero(&c);
    let mut min = f64::INFINITY;
    for n in 1..=4000 {
        let t = n as f64 * cfg.dt;
        c.set_source(src, 1000.0 * (2.0 * std::f64::consts::PI * 50.0 * t).sin())
            .unwrap();
        state = solve_step(&c, &state, &cfg).unwrap();
        min = min.min(state.branch_currents[d.0]);
    }
    (min, cfg.current_epsilon)
}
