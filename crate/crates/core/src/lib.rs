//! Conditional statistics for joint wind speed and direction.
//!
//! Directions are modelled with von Mises mixtures ([`vonmises`]). Speed
//! given direction is modelled two ways: quantile regression on a periodic
//! B-spline basis ([`quantreg`]), and per-sector Weibull fits smoothed by
//! harmonic regression ([`weibull`]). [`bootstrap`] puts seasonal block
//! bootstrap bands on any of these, and [`ivstats`] compares projected
//! changes with the internal variability of an ensemble.
//!
//! Angles are radians in `[-pi, pi)` with north at zero and east at
//! `pi/2`; see [`circular::Angle`] for the bearing conversion.
//!
//! ```
//! use windcond::circular::{Angle, PeriodicSplineBasis};
//! use windcond::quantreg::fit_quantile_curve_pairs;
//!
//! let dirs: Vec<Angle> = (0..400).map(|i| Angle::new(-3.1 + 0.0155 * i as f64).unwrap()).collect();
//! let speeds: Vec<f64> = dirs.iter().map(|d| 6.0 + d.radians().cos()).collect();
//! let median = fit_quantile_curve_pairs(&dirs, &speeds, 0.5, &PeriodicSplineBasis::default()).unwrap();
//! assert!((median.eval(Angle::new(0.0).unwrap()) - 7.0).abs() < 0.01);
//! ```

pub mod bootstrap;
pub mod circular;
pub mod ingest;
pub mod ivstats;
pub mod quantreg;
pub mod stats;
pub mod vonmises;
pub mod weibull;

use thiserror::Error;

/// Any error raised by the library, grouped by where it comes from.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Circular(#[from] circular::CircularError),
    #[error(transparent)]
    VonMises(#[from] vonmises::VonMisesError),
    #[error(transparent)]
    Weibull(#[from] weibull::WeibullError),
    #[error(transparent)]
    QuantReg(#[from] quantreg::QuantRegError),
    #[error(transparent)]
    Bootstrap(#[from] bootstrap::BootstrapError),
    #[error(transparent)]
    Iv(#[from] ivstats::IvError),
    #[error(transparent)]
    Ingest(#[from] ingest::IngestError),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input data: unreadable files, too few records, misaligned members.
    Data,
    /// A fit or solver failed on otherwise valid data.
    Numerical,
    /// Invalid parameters.
    Config,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use ErrorKind::*;
        match self {
            Error::Circular(circular::CircularError::InvalidBasis(_)) => Config,
            Error::Circular(_) => Data,
            Error::VonMises(e) => match e {
                vonmises::VonMisesError::InvalidKappa(_)
                | vonmises::VonMisesError::InvalidWeights { .. }
                | vonmises::VonMisesError::NoComponents => Config,
                vonmises::VonMisesError::InsufficientData { .. } | vonmises::VonMisesError::TooFewDistinct { .. } => {
                    Data
                }
                _ => Numerical,
            },
            Error::Weibull(e) => match e {
                weibull::WeibullError::TooFewBins(_) | weibull::WeibullError::InvalidTau(_) => Config,
                weibull::WeibullError::TooFewSpeeds(_) | weibull::WeibullError::InsufficientBins { .. } => Data,
                _ => Numerical,
            },
            Error::QuantReg(quantreg::QuantRegError::PerTau(errs)) if !errs.is_empty() => {
                Error::QuantReg(errs[0].1.clone()).kind()
            }
            Error::QuantReg(e) => match e {
                quantreg::QuantRegError::InvalidTau(_)
                | quantreg::QuantRegError::TooFewCandidates(_)
                | quantreg::QuantRegError::InvalidCandidates(_) => Config,
                quantreg::QuantRegError::TooFewObservations { .. }
                | quantreg::QuantRegError::InsufficientTail { .. }
                | quantreg::QuantRegError::NonFinite(_) => Data,
                _ => Numerical,
            },
            Error::Bootstrap(e) => match e {
                bootstrap::BootstrapError::NoReplicates | bootstrap::BootstrapError::InvalidAlpha(_) => Config,
                bootstrap::BootstrapError::InsufficientSeasons { .. } => Data,
                _ => Numerical,
            },
            Error::Iv(e) => match e {
                ivstats::IvError::StatisticMismatch { .. } | ivstats::IvError::SeasonMismatch { .. } => Config,
                _ => Data,
            },
            Error::Ingest(ingest::IngestError::InvalidArgument(_)) => Config,
            Error::Ingest(ingest::IngestError::InvalidHeight { .. }) => Config,
            Error::Ingest(_) => Data,
        }
    }
}
