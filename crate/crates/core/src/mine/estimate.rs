use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EstimateError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuntimeEstimate {
    pub seconds: f64,
    pub human: String,
}

const MINUTE: f64 = 60.0;
const HOUR: f64 = 3600.0;
const DAY: f64 = 86_400.0;
const YEAR: f64 = 365.25 * DAY;

/// Renders a duration, switching unit at 120 s, 120 min, 48 h and 730 days.
pub fn human_duration(seconds: f64) -> String {
    if seconds < 120.0 {
        format!("{seconds:.1} s")
    } else if seconds < 120.0 * MINUTE {
        format!("{:.1} min", seconds / MINUTE)
    } else if seconds < 48.0 * HOUR {
        format!("{:.1} h", seconds / HOUR)
    } else if seconds < 730.0 * DAY {
        format!("{:.1} days", seconds / DAY)
    } else {
        let years = seconds / YEAR;
        if years < 1.0e4 {
            format!("{years:.1} years")
        } else {
            format!("{years:.2e} years")
        }
    }
}

/// Serial request time for `probes` requests at `rtt_s` each, split over
/// `workers`, stopping after `fraction` of the space.
pub fn estimate_runtime(
    probes: u64,
    rtt_s: f64,
    workers: u64,
    fraction: f64,
) -> Result<RuntimeEstimate, EstimateError> {
    if !(rtt_s.is_finite() && rtt_s > 0.0) {
        return Err(EstimateError::InvalidParameter(format!(
            "rtt must be positive, got {rtt_s}"
        )));
    }
    if workers == 0 {
        return Err(EstimateError::InvalidParameter("workers must be at least 1".into()));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(EstimateError::InvalidParameter(format!(
            "fraction must be in (0, 1], got {fraction}"
        )));
    }
    let seconds = probes as f64 * fraction * rtt_s / workers as f64;
    Ok(RuntimeEstimate {
        seconds,
        human: human_duration(seconds),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn prefix_sweep_estimate() {
        let e = estimate_runtime(46_656, 0.2, 1, 1.0).unwrap();
        assert!((e.seconds - 9331.2).abs() < 1e-6);
        assert_eq!(e.human, "2.6 h");
    }

    #[test]
    fn suffix_space_in_years() {
        let e = estimate_runtime(36u64.pow(9), 0.2, 1, 1.0).unwrap();
        let years = e.seconds / (365.25 * 86_400.0);
        // 101_559_956_668_416 * 0.2 / 31_557_600
        assert!((years - 643_648.165).abs() < 1e-3, "{years}");
        assert_eq!(e.human, "6.44e5 years");
    }

    #[test]
    fn half_fraction() {
        assert_eq!(estimate_runtime(1000, 0.1, 1, 0.5).unwrap().seconds, 50.0);
    }

    #[test]
    fn unit_boundaries() {
        assert_eq!(human_duration(119.0), "119.0 s");
        assert_eq!(human_duration(120.0), "2.0 min");
        assert_eq!(human_duration(7200.0), "2.0 h");
        assert_eq!(human_duration(48.0 * 3600.0), "2.0 days");
        assert_eq!(human_duration(730.0 * 86_400.0), "2.0 years");
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(estimate_runtime(1, 0.0, 1, 1.0).is_err());
        assert!(estimate_runtime(1, 0.1, 0, 1.0).is_err());
        assert!(estimate_runtime(1, 0.1, 1, 0.0).is_err());
        assert!(estimate_runtime(1, 0.1, 1, 1.5).is_err());
        assert!(estimate_runtime(1, f64::NAN, 1, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn linear_in_probes_and_fraction_inverse_in_workers(
            probes in 1u64..1_000_000, rtt in 0.001f64..2.0, workers in 1u64..64, fraction in 0.01f64..1.0,
        ) {
            let base = estimate_runtime(probes, rtt, workers, fraction).unwrap().seconds;
            let doubled = estimate_runtime(probes * 2, rtt, workers, fraction).unwrap().seconds;
            prop_assert!((doubled - 2.0 * base).abs() <= 1e-9 * doubled.max(1.0));
            let more = estimate_runtime(probes, rtt, workers * 2, fraction).unwrap().seconds;
            prop_assert!((more * 2.0 - base).abs() <= 1e-9 * base.max(1.0));
            let half = estimate_runtime(probes, rtt, workers, fraction / 2.0).unwrap().seconds;
            prop_assert!((half * 2.0 - base).abs() <= 1e-9 * base.max(1.0));
        }
    }
}
