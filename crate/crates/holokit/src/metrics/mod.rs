//! Infinitesimal Kobayashi and Carathéodory metrics, Kobayashi distance and ball probes.

mod caratheodory;
mod closed_form;
mod distance;
mod kobayashi;
mod probe;

pub use caratheodory::{caratheodory_inf_lower, LowerConfig};
pub use closed_form::{cayley_to_ball, cayley_from_ball, closed_form_distance, closed_form_inf_metric, ModelKind};
pub use distance::{kobayashi_distance_estimate, segment_length, DistanceEstimate, PathConfig};
pub use kobayashi::{kobayashi_inf_estimate, kobayashi_inf_estimate_in_frame, kobayashi_inf_estimate_warm, localization_ratio, AnalyticDisc, DiscConfig};
pub use probe::{kobayashi_ball_probe, probe_directions, BallProber, ProbeExtent, RayProfile};

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BoundKind {
    Exact,
    UpperBound,
    LowerBound,
}

impl BoundKind {
    pub fn label(self) -> &'static str {
        match self {
            BoundKind::Exact => "Exact",
            BoundKind::UpperBound => "UpperBound",
            BoundKind::LowerBound => "LowerBound",
        }
    }
}

#[derive(Clone, Debug)]
pub enum Witness {
    ClosedForm(ModelKind),
    Disc(AnalyticDisc),
    Functional(String),
    None,
}

#[derive(Clone, Debug)]
pub struct MetricEstimate {
    pub value: f64,
    pub bound: BoundKind,
    pub witness: Witness,
    pub config: Option<DiscConfig>,
    /// Diagnostics such as `RadialContainment` or `Vacuous`.
    pub flags: Vec<String>,
}
