//! Power and SNR unit conversions. Files carry SI values; dBm and dB only
//! appear in sweep axes and output columns.

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts / 1e-3).log10()
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_points() {
        assert!((dbm_to_watts(20.0) - 0.1).abs() < 1e-15);
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((watts_to_dbm(1.0) - 30.0).abs() < 1e-12);
        assert!((db_to_linear(5.0) - 3.162_277_660_168_379_5).abs() < 1e-15);
        assert!((linear_to_db(200.0) - 23.010_299_956_639_81).abs() < 1e-12);
    }

    #[test]
    fn round_trip() {
        for x in [-30.0, 0.0, 17.5, 60.0] {
            assert!((watts_to_dbm(dbm_to_watts(x)) - x).abs() < 1e-12);
            assert!((linear_to_db(db_to_linear(x)) - x).abs() < 1e-12);
        }
    }
}
