//! Ramsey discount schedules, certainty-equivalent declining rates, and
//! gamma / zero-inflated gamma discounting.

pub mod certainty;
pub mod gamma;
pub mod ramsey;

pub use certainty::certainty_equivalent_rate;
pub use gamma::{
    fit_zig, fit_zig_binning_sensitivity, gamma_ce_rate, gamma_mixture_factor, zig_rate,
    zig_rate_moment, RateUnits, ZeroInflatedGammaFit, ZigFitOptions,
};
pub use ramsey::{ramsey_schedule, DiscountSchedule, PopulationTreatment, RateConvention};
