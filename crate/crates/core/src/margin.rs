use serde::Serialize;

/// Slack allowed on sampled condition ratios for floating-point rounding.
pub const MARGIN_TOLERANCE: f64 = 1e-9;

/// Worst sampled ratio of a functional against its claimed bound. A ratio of
/// at most one (up to [`MARGIN_TOLERANCE`]) means the bound held at every
/// sampled point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginReport {
    pub worst: f64,
    pub samples: usize,
}

impl MarginReport {
    pub fn holds(&self) -> bool {
        self.worst <= 1.0 + MARGIN_TOLERANCE
    }
}
