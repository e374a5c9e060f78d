use super::efficiency::{Direction, EfficiencyModel};
use super::GridConfig;

/// Result of one hour of battery operation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EssOutcome {
    pub charge_next: f64,
    /// Executed power, MW; positive charges.
    pub x_executed: f64,
    /// Energy by which the request would have left `[0, C_max]`, MWh.
    pub overflow: f64,
    pub efficiency: f64,
    /// Signed battery term of the DC balance: stored energy when charging,
    /// minus delivered energy when discharging.
    pub bus_energy: f64,
    pub clamped: bool,
}

/// Advance the battery charge by one hour.
///
/// Charging `x` stores `x·η_ch`; discharging `x` removes `x` from the charge
/// and delivers `x·η_dis`. Requests that would leave `[0, C_max]` are clamped
/// to the feasible boundary and the violation is reported as `overflow`.
/// Self-discharge applies to the post-action charge.
pub fn ess_step(c: f64, x_requested: f64, grid: &GridConfig, eff: &EfficiencyModel) -> EssOutcome {
    let cap = grid.capacity_mwh;
    let c = c.clamp(0.0, cap);
    let x = x_requested.clamp(-grid.max_power_mw, grid.max_power_mw);

    let (pre, x_executed, overflow, efficiency, bus_energy, clamped) = if x > 0.0 {
        let eta = eff.ess_efficiency(c, x, Direction::Charge, grid);
        let excess = c + x * eta - cap;
        if excess > 0.0 {
            let x_exec = max_feasible_charge(c, x, grid, eff);
            let eta_exec = eff.ess_efficiency(c, x_exec, Direction::Charge, grid);
            let stored = x_exec * eta_exec;
            ((c + stored).min(cap), x_exec, excess, eta_exec, stored, true)
        } else {
            (c + x * eta, x, 0.0, eta, x * eta, false)
        }
    } else if x < 0.0 {
        let draw = -x;
        let (draw_exec, overflow) = if draw > c { (c, draw - c) } else { (draw, 0.0) };
        let eta = eff.ess_efficiency(c, draw_exec, Direction::Discharge, grid);
        (
            c - draw_exec,
            -draw_exec,
            overflow,
            eta,
            -draw_exec * eta,
            overflow > 0.0,
        )
    } else {
        (c, 0.0, 0.0, 1.0, 0.0, false)
    };

    EssOutcome {
        charge_next: (pre * eff.self_discharge).clamp(0.0, cap),
        x_executed,
        overflow,
        efficiency,
        bus_energy,
        clamped,
    }
}

/// Largest charging power in `[0, x]` that keeps `c + x·η_ch(c, x) <= C_max`.
fn max_feasible_charge(c: f64, x: f64, grid: &GridConfig, eff: &EfficiencyModel) -> f64 {
    let stored = |p: f64| p * eff.ess_efficiency(c, p, Direction::Charge, grid);
    let room = grid.capacity_mwh - c;
    let (mut lo, mut hi) = (0.0, x);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if stored(mid) <= room {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 {
            break;
        }
    }
    lo
}
