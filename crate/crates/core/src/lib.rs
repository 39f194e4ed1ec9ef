//! Nonparametric survival and mean residual life estimation for right-censored data.
//!
//! The central estimator smooths the Efron-modified Kaplan–Meier curve with Poisson
//! weights and evaluates the resulting mean residual life in closed form:
//!
//! ```
//! use mrl_core::{km, mrl_smooth, sample::CensoredSample, smoother::PoissonSmoother};
//!
//! let s = CensoredSample::from_records(&[(1.0, true), (2.0, false), (3.0, true), (4.0, true)]).unwrap();
//! let step = km::product_limit(&s, true).unwrap();
//! assert_eq!(step.step_mrl(2.0).unwrap(), Some(1.5));
//! let smooth = mrl_smooth::smooth_mrl(&step, PoissonSmoother::new(1e5).unwrap(), 2.0).unwrap();
//! assert!((smooth - 1.5).abs() < 0.02);
//! ```

pub mod inference;
pub mod km;
pub mod law;
pub mod mrl_smooth;
pub mod sample;
pub mod sim;
pub mod smoother;

pub use inference::{attach_inference, InferenceError, InfluenceDecomposition};
pub use km::{product_limit, KmError, StepSurvival};
pub use law::Law;
pub use mrl_smooth::{MrlError, MrlEstimate, SmoothMrl};
pub use sample::{CensoredSample, Observation, SampleError, TieRule};
pub use sim::{Scenario, SimulationReport};
pub use smoother::{PoissonSmoother, SmootherError};
