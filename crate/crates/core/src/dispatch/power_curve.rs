//! Piecewise cubic wind turbine power curve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    /// m/s
    pub cut_in: f64,
    pub rated_speed: f64,
    pub cut_out: f64,
    /// MW
    pub rated_power: f64,
}

impl Default for PowerCurve {
    fn default() -> Self {
        Self {
            cut_in: 3.0,
            rated_speed: 13.0,
            cut_out: 25.0,
            rated_power: 21.02,
        }
    }
}

impl PowerCurve {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 <= self.cut_in
            && self.cut_in < self.rated_speed
            && self.rated_speed < self.cut_out
            && self.rated_power > 0.0
            && self.cut_out.is_finite()
            && self.rated_power.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid power curve {self:?}")))
        }
    }
}

/// Output in MW at wind speed `speed` (m/s).
pub fn wind_to_power(speed: f64, curve: &PowerCurve) -> Result<f64> {
    curve.validate()?;
    if !(speed >= 0.0) {
        return Err(Error::Domain(format!("wind speed {speed} is negative or NaN")));
    }
    let PowerCurve { cut_in, rated_speed, cut_out, rated_power } = *curve;
    Ok(if speed < cut_in || speed >= cut_out {
        0.0
    } else if speed >= rated_speed {
        rated_power
    } else {
        let c3 = cut_in.powi(3);
        rated_power * (speed.powi(3) - c3) / (rated_speed.powi(3) - c3)
    })
}
