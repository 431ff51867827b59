//! Long-memory models: periodogram, Whittle estimation and simulation.

mod periodogram;
mod simulate;
mod whittle;

pub use periodogram::{periodogram, Periodogram, MIN_PERIODOGRAM_LEN};
pub use simulate::{default_burn_in, innovations, simulate_longmem, SIMULATION_TAU};
pub use whittle::{
    spectral_shape, whittle_fit, LongMemFit, LongMemModel, WhittleObjective, ARFIMA_D_BOUND, ARTFIMA_D_RANGE,
    ARTFIMA_LAMBDA_RANGE, MIN_WHITTLE_LEN,
};
