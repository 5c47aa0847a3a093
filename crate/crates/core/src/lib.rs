//! Two-timescale RIS-aided cell-free massive MIMO uplink simulator.
//!
//! * [`geometry`] / [`channel`]: array responses, path loss, Rician statistics and realizations.
//! * [`estimation`]: pilot assignment and the LMMSE estimator of the aggregated channel.
//! * [`closed_form`]: exact moments of the MRC statistics, CPU weights, SINR and SE.
//! * [`montecarlo`]: sampling oracle for every closed-form quantity and the centralized baseline.
//! * [`optimize`]: RIS phase optimization (soft actor-critic, random search, coordinate ascent).
//! * [`experiment`]: config-driven scenarios behind the `simulate` binary.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below fix `f64`.

#![allow(
    clippy::needless_range_loop,
    clippy::neg_cmp_op_on_partial_ord,
    clippy::too_many_arguments,
    clippy::type_complexity
)]

pub mod channel;
pub mod closed_form;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod geometry;
pub mod linalg;
pub mod montecarlo;
pub mod optimize;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{Cx, Real};

pub type ChannelStatistics = channel::ChannelStatistics<f64>;
pub type PhaseConfig = channel::PhaseConfig<f64>;
pub type ChannelRealization = channel::ChannelRealization<f64>;
pub type LmmseOperator = estimation::LmmseOperator<f64>;
pub type MomentSet = closed_form::MomentSet<f64>;
pub type SystemModel = closed_form::se::SystemModel<f64>;
pub type LinkParams = closed_form::se::LinkParams<f64>;
pub type SeReport = closed_form::se::SeReport<f64>;
pub type CMatrix = linalg::CMatrix<f64>;
