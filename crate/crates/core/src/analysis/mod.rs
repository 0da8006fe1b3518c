//! Risk functionals, total variation, bound checks, ensemble diversity and cost accounting.

mod bounds;
mod cost;
mod risk;
mod tv;

pub use bounds::{da_bound_report, defense_bound_report, BoundStatus, DefenseBoundReport, Paired, RiskReport, TotalVariation};
pub use cost::{cost_report, fixed4, CostRatio, CostReport};
pub use risk::{disagreement_risk, ensemble_diversity, Domain, EvalSet, Source, TabularSupport};
pub use tv::{tv_discriminator, tv_distance, tv_exact};

/// Slack allowed when checking an inequality between computed risks.
pub const BOUND_TOL: f64 = 1e-9;
