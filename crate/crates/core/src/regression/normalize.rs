use serde::{Deserialize, Serialize};

use super::RegressionError;
use crate::domain::{CrtSeconds, DatasetManifest, RecordingPointId};

/// Offset and scale of the target normalization
/// `(crt - min_start) / max_crt`.
///
/// `min_start` is the smallest CRT at the first recording point and `max_crt`
/// the largest CRT anywhere in the fitting population. The scale is the raw
/// maximum, not `max - min`, so in-population values land in
/// `[0, (max_crt - min_start) / max_crt]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub min_start: f64,
    pub max_crt: f64,
}

impl NormalizationParams {
    pub fn new(min_start: f64, max_crt: f64) -> Result<Self, RegressionError> {
        if !(max_crt > 0.0 && max_crt.is_finite()) {
            return Err(RegressionError::InvalidParams(format!("max_crt must be > 0, got {max_crt}")));
        }
        if !(min_start.is_finite() && min_start <= max_crt) {
            return Err(RegressionError::InvalidParams(format!(
                "min_start {min_start} must not exceed max_crt {max_crt}"
            )));
        }
        Ok(Self { min_start, max_crt })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NormalizedCrt(pub f64);

impl NormalizedCrt {
    pub fn value(self) -> f64 {
        self.0
    }

    /// Out-of-population CRTs can leave `[0, 1]`; they are kept, not clamped.
    pub fn in_unit_range(self) -> bool {
        (0.0..=1.0).contains(&self.0)
    }
}

/// Fits the parameters on `(recording point, CRT)` samples.
pub fn fit_normalization_from<I>(samples: I) -> Result<NormalizationParams, RegressionError>
where
    I: IntoIterator<Item = (RecordingPointId, CrtSeconds)>,
{
    let mut any = false;
    let mut min_start = f64::INFINITY;
    let mut max_crt = f64::NEG_INFINITY;
    for (rp, crt) in samples {
        any = true;
        if rp.index() == 0 {
            min_start = min_start.min(crt.seconds());
        }
        max_crt = max_crt.max(crt.seconds());
    }
    if !any {
        return Err(RegressionError::EmptyPopulation);
    }
    if min_start == f64::INFINITY {
        return Err(RegressionError::NoFirstPointObservations);
    }
    NormalizationParams::new(min_start, max_crt)
}

/// Fits the parameters on the manifest observations listed in `population`.
pub fn fit_normalization(
    manifest: &DatasetManifest,
    population: &[usize],
) -> Result<NormalizationParams, RegressionError> {
    let crts = manifest.crts();
    let samples = population
        .iter()
        .map(|&i| {
            let crt = crts[i].as_ref().map_err(|e| RegressionError::Crt {
                index: i,
                message: e.to_string(),
            })?;
            Ok((manifest.observations[i].rp, *crt))
        })
        .collect::<Result<Vec<_>, RegressionError>>()?;
    fit_normalization_from(samples)
}

/// ```
/// use racecrt::regression::{normalize_crt, NormalizationParams};
/// use racecrt::CrtSeconds;
///
/// let params = NormalizationParams::new(28_800.0, 72_000.0)?;
/// assert_eq!(normalize_crt(CrtSeconds::new(43_200.0)?, &params).value(), 0.2);
/// # Ok::<(), Box<dyn std::error::Error>>(())
/// ```
pub fn normalize_crt(crt: CrtSeconds, params: &NormalizationParams) -> NormalizedCrt {
    NormalizedCrt((crt.seconds() - params.min_start) / params.max_crt)
}

/// Converts a normalized quantity (typically an MAE) back to minutes.
pub fn minutes_from_normalized(value: f64, params: &NormalizationParams) -> f64 {
    value * params.max_crt / 60.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{FootageRef, Observation, RunnerId};
    use proptest::prelude::*;

    fn crt(s: f64) -> CrtSeconds {
        CrtSeconds::new(s).unwrap()
    }

    #[test]
    fn single_observation() {
        let p = fit_normalization_from([(RecordingPointId(0), crt(5000.0))]).unwrap();
        assert_eq!((p.min_start, p.max_crt), (5000.0, 5000.0));
        assert_eq!(normalize_crt(crt(5000.0), &p).value(), 0.0);
    }

    #[test]
    fn race_endpoints() {
        let p = fit_normalization_from([(RecordingPointId(0), crt(28_800.0)), (RecordingPointId(2), crt(72_000.0))])
            .unwrap();
        assert_eq!((p.min_start, p.max_crt), (28_800.0, 72_000.0));
        assert_eq!(normalize_crt(crt(43_200.0), &p).value(), 0.2);
        assert_eq!(normalize_crt(crt(72_000.0), &p).value(), 0.6);
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(
            fit_normalization_from(std::iter::empty()),
            Err(RegressionError::EmptyPopulation)
        ));
        assert!(matches!(
            fit_normalization_from([(RecordingPointId(1), crt(10.0))]),
            Err(RegressionError::NoFirstPointObservations)
        ));
        assert!(NormalizationParams::new(10.0, 0.0).is_err());
        assert!(NormalizationParams::new(20.0, 10.0).is_err());
    }

    #[test]
    fn minutes() {
        let p = NormalizationParams::new(0.0, 75_000.0).unwrap();
        assert_eq!(minutes_from_normalized(0.0, &p), 0.0);
        assert!((minutes_from_normalized(0.010, &p) - 12.5).abs() < 1e-12);
        let p = NormalizationParams::new(0.0, 72_000.0).unwrap();
        assert!((minutes_from_normalized(0.010, &p) - 12.0).abs() < 1e-12);
    }

    #[test]
    fn fit_on_train_ignores_test() {
        let obs = |runner: &str, rp: u32, t: f64| Observation {
            runner: RunnerId::new(runner).unwrap(),
            rp: RecordingPointId(rp),
            footage: FootageRef {
                path: "f".into(),
                frames: 175,
                fps: 25.0,
            },
            passing_time: t,
            tracks: "t.csv".into(),
        };
        let rps = vec![RecordingPointId(0), RecordingPointId(1)];
        let a = DatasetManifest::new(0.0, rps.clone(), vec![obs("a", 0, 100.0), obs("a", 1, 300.0), obs("b", 0, 50.0)])
            .unwrap();
        let b = DatasetManifest::new(0.0, rps, vec![obs("a", 0, 100.0), obs("a", 1, 300.0), obs("b", 0, 90.0)]).unwrap();
        let pa = fit_normalization(&a, &[0, 1]).unwrap();
        let pb = fit_normalization(&b, &[0, 1]).unwrap();
        assert_eq!(pa, pb);
        assert_eq!((pa.min_start, pa.max_crt), (100.0, 300.0));
        assert_eq!(fit_normalization(&a, &[0, 1, 2]).unwrap().min_start, 50.0);
    }

    proptest! {
        #[test]
        fn affine_and_order_preserving(values in proptest::collection::vec(1.0f64..100_000.0, 2..50)) {
            let samples: Vec<_> = values.iter().enumerate()
                .map(|(i, &v)| (RecordingPointId((i % 3) as u32), crt(v)))
                .collect();
            let p = fit_normalization_from(samples).unwrap();
            let norm: Vec<f64> = values.iter().map(|&v| normalize_crt(crt(v), &p).value()).collect();
            let argmax = |xs: &[f64]| xs.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            let argmin = |xs: &[f64]| xs.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
            prop_assert_eq!(argmax(&values), argmax(&norm));
            prop_assert_eq!(argmin(&values), argmin(&norm));
            for (v, n) in values.iter().zip(&norm) {
                prop_assert!((n - (v - p.min_start) / p.max_crt).abs() <= 1e-15);
            }
        }
    }
}
