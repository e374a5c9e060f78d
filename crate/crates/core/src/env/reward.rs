use super::efficiency::{converter_efficiency, select_inverter, EfficiencyModel};
use super::ess::EssOutcome;
use super::GridConfig;

/// Exogenous energy flows during one hour, MWh (equivalently MW).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exogenous {
    pub demand: f64,
    pub price: f64,
    pub pv: f64,
    pub wt: f64,
}

/// Diagnostic breakdown of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub x_requested: f64,
    pub x_executed: f64,
    pub overflow: f64,
    pub clamped: bool,
    pub charge_before: f64,
    pub charge_after: f64,
    /// PV used to charge the battery.
    pub pv_used: f64,
    /// `X_PV+`: PV left after charging.
    pub pv_excess: f64,
    /// `X_WT+`: wind left after covering the DC-side demand.
    pub wt_excess: f64,
    /// `X_dc`: DC-side demand seen from the AC bus.
    pub x_dc: f64,
    /// `X_in`: energy imported from the utility grid.
    pub x_in: f64,
    /// `X_base`: import with the battery idle.
    pub x_base: f64,
    pub inverter_rating: f64,
    pub inverter_overloaded: bool,
    /// `P (X_base - X_in) / (P_max C_max)`.
    pub savings_term: f64,
    /// `overflow² / X_max`.
    pub punishment: f64,
    pub reward: f64,
    /// Unnormalised savings `P (X_base - X_in)`, GBP.
    pub savings_gbp: f64,
}

fn utility_import(x_dc: f64, exo: &Exogenous, wt_eta: f64, grid: &GridConfig, eff: &EfficiencyModel) -> f64 {
    let ac = x_dc + exo.demand - exo.wt * wt_eta;
    ac * converter_efficiency(ac.abs(), grid.utility_transformer_mw, &eff.transformer)
}

/// Reward for one hour given the executed battery action.
///
/// The battery charges from PV first; the remaining DC balance crosses the
/// cheaper inverter, nets with demand and wind on the AC bus, and crosses the
/// utility transformer. The same chain with the battery idle gives the
/// baseline import, so exogenous demand and generation cancel out of the
/// savings term.
pub fn compute_reward(
    exo: &Exogenous,
    ess: &EssOutcome,
    x_requested: f64,
    charge_before: f64,
    grid: &GridConfig,
    eff: &EfficiencyModel,
) -> (f64, StepInfo) {
    let e = ess.bus_energy;
    let pv_used = exo.pv.min(e.max(0.0));
    let pv_excess = exo.pv - pv_used;
    let dc_net = (e - pv_used) - pv_excess;
    let inverter = select_inverter(dc_net.abs(), grid, &eff.inverter);
    let x_dc = dc_net * inverter.efficiency;

    let wt_eta = converter_efficiency(exo.wt, grid.wt_transformer_mw, &eff.transformer);
    let x_in = utility_import(x_dc, exo, wt_eta, grid, eff);

    let base_inverter = select_inverter(exo.pv, grid, &eff.inverter);
    let base_dc = -exo.pv * base_inverter.efficiency;
    let x_base = utility_import(base_dc, exo, wt_eta, grid, eff);

    let savings_gbp = exo.price * (x_base - x_in);
    let savings_term = savings_gbp / (grid.price_cap * grid.capacity_mwh);
    let punishment = ess.overflow * ess.overflow / grid.max_power_mw;
    let reward = savings_term - punishment;

    let info = StepInfo {
        x_requested,
        x_executed: ess.x_executed,
        overflow: ess.overflow,
        clamped: ess.clamped,
        charge_before,
        charge_after: ess.charge_next,
        pv_used,
        pv_excess,
        wt_excess: (exo.wt * wt_eta - x_dc.max(0.0)).max(0.0),
        x_dc,
        x_in,
        x_base,
        inverter_rating: inverter.rating_mw,
        inverter_overloaded: inverter.overloaded,
        savings_term,
        punishment,
        reward,
        savings_gbp,
    };
    (reward, info)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ess::ess_step;

    fn exo(demand: f64, price: f64, pv: f64, wt: f64) -> Exogenous {
        Exogenous {
            demand,
            price,
            pv,
            wt,
        }
    }

    #[test]
    fn idle_battery_earns_exactly_zero() {
        let g = GridConfig::default();
        let m = EfficiencyModel::default();
        for (d, p, pv, wt) in [(2.0, 40.0, 1.3, 0.7), (0.0, 250.0, 0.0, 0.0), (4.2, 13.0, 4.9, 2.3)] {
            let out = ess_step(1.0, 0.0, &g, &m);
            let (r, info) = compute_reward(&exo(d, p, pv, wt), &out, 0.0, 1.0, &g, &m);
            assert_eq!(r, 0.0);
            assert_eq!(info.x_in, info.x_base);
        }
    }

    #[test]
    fn squared_overflow_punishment() {
        let g = GridConfig::default();
        let m = EfficiencyModel::ideal();
        // 2 MWh over the top: charge 2 into a full battery.
        let out = ess_step(5.0, 2.0, &g, &m);
        assert_eq!(out.overflow, 2.0);
        let (r, info) = compute_reward(&exo(0.0, 100.0, 0.0, 0.0), &out, 2.0, 5.0, &g, &m);
        assert_eq!(info.punishment, 2.0);
        assert_eq!(info.savings_term, 0.0);
        assert_eq!(r, -2.0);
    }

    #[test]
    fn unit_efficiency_discharge_at_cap() {
        let g = GridConfig::default();
        let m = EfficiencyModel::ideal();
        let out = ess_step(3.0, -1.0, &g, &m);
        let (r, info) = compute_reward(&exo(0.0, 250.0, 0.0, 0.0), &out, -1.0, 3.0, &g, &m);
        // 250 * 1 / (250 * 5)
        assert!((info.savings_term - 0.2).abs() < 1e-15);
        assert_eq!(r, info.savings_term);
        assert_eq!(info.savings_gbp, 250.0);
    }

    #[test]
    fn constant_efficiencies_reduce_to_pure_arbitrage() {
        let g = GridConfig::default();
        let m = EfficiencyModel::ideal();
        for (d, p, pv, wt, x) in [(2.0, 80.0, 1.5, 0.4, 1.0), (3.0, 35.0, 0.0, 1.9, -2.0), (0.5, 120.0, 3.0, 0.0, 2.0)] {
            let out = ess_step(2.0, x, &g, &m);
            let (r, _) = compute_reward(&exo(d, p, pv, wt), &out, x, 2.0, &g, &m);
            let expected = -p * out.bus_energy / (g.price_cap * g.capacity_mwh);
            assert!((r - expected).abs() < 1e-12, "{r} vs {expected}");
        }
    }

    #[test]
    fn charging_prefers_pv() {
        let g = GridConfig::default();
        let m = EfficiencyModel::default();
        let out = ess_step(1.0, 1.0, &g, &m);
        let (_, info) = compute_reward(&exo(1.0, 50.0, 3.0, 0.0), &out, 1.0, 1.0, &g, &m);
        assert!((info.pv_used - out.bus_energy).abs() < 1e-15);
        assert!((info.pv_excess - (3.0 - out.bus_energy)).abs() < 1e-15);
        // Charging from surplus PV costs less than charging from the grid.
        let (_, from_grid) = compute_reward(&exo(1.0, 50.0, 0.0, 0.0), &out, 1.0, 1.0, &g, &m);
        assert!(info.savings_gbp > from_grid.savings_gbp);
    }
}
