use std::f64::consts::PI;

use super::{GridConfig, WindTurbineParams};

fn cubic_mw(v: f64, p: &WindTurbineParams) -> f64 {
    0.5 * p.air_density * PI * p.rotor_radius * p.rotor_radius * p.power_coefficient * v.powi(3)
        / 1e6
}

/// Rated output of one turbine: the cubic curve evaluated at the rated speed.
pub fn rated_wind_power(p: &WindTurbineParams) -> f64 {
    cubic_mw(p.rated, p)
}

/// Output of one turbine in MW for wind speed `v` (m/s).
pub fn wind_power(v: f64, p: &WindTurbineParams) -> f64 {
    if v < p.cut_in || v > p.cut_out {
        0.0
    } else if v < p.rated {
        cubic_mw(v, p)
    } else {
        rated_wind_power(p)
    }
}

/// PV farm output in MW: linear in irradiance, saturating at capacity.
pub fn pv_power(radiation: f64, grid: &GridConfig) -> f64 {
    (radiation.max(0.0) / grid.reference_irradiance * grid.pv_capacity_mw)
        .min(grid.pv_capacity_mw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn below_cut_in_and_above_cut_out_is_zero() {
        let p = WindTurbineParams::default();
        assert_eq!(wind_power(2.0, &p), 0.0);
        assert_eq!(wind_power(26.0, &p), 0.0);
    }

    #[test]
    fn cubic_band_matches_direct_evaluation() {
        let p = WindTurbineParams::default();
        let watts = 0.5 * 1.225 * PI * 30.0 * 30.0 * 0.4 * 8.0f64.powi(3);
        let mw = wind_power(8.0, &p);
        assert!((mw - watts / 1e6).abs() < 1e-12);
        assert!((mw - 0.3547).abs() < 1e-4);
    }

    #[test]
    fn rated_band_is_flat() {
        let p = WindTurbineParams::default();
        let r = rated_wind_power(&p);
        assert_eq!(wind_power(12.0, &p), r);
        assert_eq!(wind_power(25.0, &p), r);
        assert!(wind_power(11.999, &p) < r);
    }

    #[test]
    fn pv_scaling() {
        let g = GridConfig::default();
        assert_eq!(pv_power(0.0, &g), 0.0);
        assert_eq!(pv_power(1000.0, &g), 5.0);
        assert_eq!(pv_power(2000.0, &g), 5.0);
        assert_eq!(pv_power(500.0, &g), 2.5);
    }
}
