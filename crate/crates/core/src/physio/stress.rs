use serde::{Deserialize, Serialize};

/// Linear heart-rate/breathing-rate blend standing in for a stress model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StressParams {
    pub hr_rest: f64,
    pub hr_range: f64,
    pub br_rest: f64,
    pub br_range: f64,
    pub w_hr: f64,
    pub w_br: f64,
    pub threshold_stressed: f64,
    pub threshold_relaxed: f64,
    pub relaxed_hold_ms: u64,
}

impl Default for StressParams {
    fn default() -> Self {
        Self {
            hr_rest: 70.0,
            hr_range: 30.0,
            br_rest: 12.0,
            br_range: 12.0,
            w_hr: 0.5,
            w_br: 0.5,
            threshold_stressed: 0.5,
            threshold_relaxed: 0.3,
            relaxed_hold_ms: 5000,
        }
    }
}

impl StressParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.hr_range > 0.0 && self.br_range > 0.0) {
            return Err("stress ranges must be positive".into());
        }
        if (self.w_hr + self.w_br - 1.0).abs() > 1e-9 || self.w_hr < 0.0 || self.w_br < 0.0 {
            return Err("stress weights must be non-negative and sum to 1".into());
        }
        if self.threshold_relaxed >= self.threshold_stressed {
            return Err("relaxed threshold must be below stressed threshold".into());
        }
        Ok(())
    }
}

/// `clamp01(w_hr·(hr−hr_rest)/hr_range + w_br·(br−br_rest)/br_range)`
pub fn stress_index(hr: f64, br: f64, p: &StressParams) -> f64 {
    let s = p.w_hr * (hr - p.hr_rest) / p.hr_range + p.w_br * (br - p.br_rest) / p.br_range;
    s.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_points() {
        let p = StressParams::default();
        assert_eq!(stress_index(70.0, 12.0, &p), 0.0);
        assert_eq!(stress_index(100.0, 24.0, &p), 1.0);
        assert_eq!(stress_index(85.0, 12.0, &p), 0.25);
        assert_eq!(stress_index(40.0, 6.0, &p), 0.0);
        assert_eq!(stress_index(200.0, 60.0, &p), 1.0);
        assert!(p.validate().is_ok());
    }
}
