use super::EnvError;

/// Physical constants of the microgrid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    /// ESS capacity `C_max`, MWh.
    pub capacity_mwh: f64,
    /// ESS power limit `X_max`, MW (energy per hourly step).
    pub max_power_mw: f64,
    /// Price cap `P_max`, GBP/MWh.
    pub price_cap: f64,
    pub pv_capacity_mw: f64,
    /// Irradiance at which the PV farm reaches `pv_capacity_mw`.
    pub reference_irradiance: f64,
    pub wt_count: usize,
    /// Rating of the transformer between the microgrid and the utility grid.
    pub utility_transformer_mw: f64,
    /// Rating of the transformer on the wind turbine connection.
    pub wt_transformer_mw: f64,
    /// Ratings of the parallel AC/DC inverters, ascending.
    pub inverter_ratings_mw: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            capacity_mwh: 5.0,
            max_power_mw: 2.0,
            price_cap: 250.0,
            pv_capacity_mw: 5.0,
            reference_irradiance: 1000.0,
            wt_count: 2,
            utility_transformer_mw: 2.0,
            wt_transformer_mw: 2.0,
            inverter_ratings_mw: vec![2.0, 5.0],
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let positive = [
            ("capacity_mwh", self.capacity_mwh),
            ("max_power_mw", self.max_power_mw),
            ("price_cap", self.price_cap),
            ("pv_capacity_mw", self.pv_capacity_mw),
            ("reference_irradiance", self.reference_irradiance),
            ("utility_transformer_mw", self.utility_transformer_mw),
            ("wt_transformer_mw", self.wt_transformer_mw),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(EnvError::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.max_power_mw > self.capacity_mwh {
            return Err(EnvError::Config(
                "max_power_mw cannot exceed capacity_mwh for hourly steps".into(),
            ));
        }
        if self.inverter_ratings_mw.is_empty()
            || self.inverter_ratings_mw.iter().any(|r| !(*r > 0.0))
            || self.inverter_ratings_mw.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(EnvError::Config(
                "inverter_ratings_mw must be positive and strictly ascending".into(),
            ));
        }
        Ok(())
    }
}

/// Power-curve parameters of one wind turbine.
#[derive(Debug, Clone, PartialEq)]
pub struct WindTurbineParams {
    /// Cut-in speed, m/s.
    pub cut_in: f64,
    /// Rated speed, m/s.
    pub rated: f64,
    /// Cut-out speed, m/s.
    pub cut_out: f64,
    /// Blade radius, m.
    pub rotor_radius: f64,
    pub power_coefficient: f64,
    /// kg/m³.
    pub air_density: f64,
}

impl Default for WindTurbineParams {
    fn default() -> Self {
        Self {
            cut_in: 3.0,
            rated: 12.0,
            cut_out: 25.0,
            rotor_radius: 30.0,
            power_coefficient: 0.4,
            air_density: 1.225,
        }
    }
}

/// Betz limit, the maximum extractable fraction of wind power.
pub const BETZ_LIMIT: f64 = 16.0 / 27.0;

impl WindTurbineParams {
    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.cut_in < self.rated && self.rated < self.cut_out) {
            return Err(EnvError::Config(
                "wind speeds must satisfy cut_in < rated < cut_out".into(),
            ));
        }
        if !(self.power_coefficient > 0.0 && self.power_coefficient < BETZ_LIMIT) {
            return Err(EnvError::Config(format!(
                "power_coefficient must lie in (0, {BETZ_LIMIT:.3})"
            )));
        }
        if !(self.rotor_radius > 0.0 && self.air_density > 0.0) {
            return Err(EnvError::Config(
                "rotor_radius and air_density must be > 0".into(),
            ));
        }
        Ok(())
    }
}
