//! Black-box victim endpoints: a trained model behind a defense policy and a billing meter.
//!
//! An endpoint answers queries and nothing else; callers never see the
//! parameters. Each endpoint owns its noise stream and meter, so a single
//! instance needs exclusive (`&mut`) access per query.

use rand_distr::{Distribution, Normal};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::data::FeatureVector;
use crate::error::{invalid, Error, Result};
use crate::models::{argmax, validate_distribution, Model};
use crate::rng::{self, LabRng};

/// Lower clamp applied to noisy scores before renormalizing.
pub const NOISE_FLOOR: f64 = 1e-6;
pub const DEFAULT_MAX_RESAMPLES: u32 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DefenseMode {
    #[default]
    None,
    HardLabel,
    Gaussian,
    GaussianLabelPreserving,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DefensePolicy {
    pub mode: DefenseMode,
    pub sigma: f64,
    /// Distortion budget, tracked for auditing only.
    pub delta: Option<f64>,
    pub max_resamples: u32,
}

impl Default for DefensePolicy {
    fn default() -> Self {
        Self::none()
    }
}

impl DefensePolicy {
    pub fn none() -> Self {
        Self {
            mode: DefenseMode::None,
            sigma: 0.0,
            delta: None,
            max_resamples: DEFAULT_MAX_RESAMPLES,
        }
    }

    pub fn hard_label() -> Self {
        Self {
            mode: DefenseMode::HardLabel,
            ..Self::none()
        }
    }

    pub fn gaussian(sigma: f64) -> Self {
        Self {
            mode: DefenseMode::Gaussian,
            sigma,
            ..Self::none()
        }
    }

    pub fn gaussian_label_preserving(sigma: f64, max_resamples: u32) -> Self {
        Self {
            mode: DefenseMode::GaussianLabelPreserving,
            sigma,
            max_resamples,
            ..Self::none()
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(invalid(format!("sigma must be non-negative, got {}", self.sigma)));
        }
        if let Some(d) = self.delta {
            if !(d.is_finite() && d >= 0.0) {
                return Err(invalid(format!("delta must be non-negative, got {d}")));
            }
        }
        if self.mode == DefenseMode::GaussianLabelPreserving && self.max_resamples == 0 {
            return Err(invalid("max_resamples must be positive"));
        }
        Ok(())
    }
}

fn noisy(probs: &[f64], noise: &Normal<f64>, rng: &mut LabRng) -> Vec<f64> {
    let clamped: Vec<f64> = probs
        .iter()
        .map(|p| (p + noise.sample(rng)).clamp(NOISE_FLOOR, 1.0))
        .collect();
    let total: f64 = clamped.iter().sum();
    clamped.into_iter().map(|v| v / total).collect()
}

/// Perturb a score vector according to `policy`.
///
/// Gaussian modes add i.i.d. `N(0, sigma^2)` noise to every entry, clamp to
/// `[1e-6, 1]` and renormalize. The label-preserving mode redraws until the
/// argmax is unchanged and falls back to the clean scores after
/// `max_resamples` failed draws.
pub fn apply_defense(policy: &DefensePolicy, probs: &[f64], rng: &mut LabRng) -> Result<Vec<f64>> {
    policy.validate()?;
    validate_distribution(probs)?;
    let gaussian = || -> Result<Option<Normal<f64>>> {
        if policy.sigma == 0.0 {
            return Ok(None);
        }
        Normal::new(0.0, policy.sigma).map(Some).map_err(|e| invalid(e.to_string()))
    };
    match policy.mode {
        DefenseMode::None => Ok(probs.to_vec()),
        DefenseMode::HardLabel => Ok(crate::models::one_hot(probs.len(), argmax(probs))),
        DefenseMode::Gaussian => match gaussian()? {
            None => Ok(probs.to_vec()),
            Some(noise) => Ok(noisy(probs, &noise, rng)),
        },
        DefenseMode::GaussianLabelPreserving => match gaussian()? {
            None => Ok(probs.to_vec()),
            Some(noise) => {
                let label = argmax(probs);
                for _ in 0..policy.max_resamples {
                    let candidate = noisy(probs, &noise, rng);
                    if argmax(&candidate) == label {
                        return Ok(candidate);
                    }
                }
                Ok(probs.to_vec())
            }
        },
    }
}

/// Query count and spend. `total_cost` is always `query_count * price_per_query`, exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meter {
    pub query_count: u64,
    pub price_per_query: Decimal,
    pub total_cost: Decimal,
}

impl Meter {
    pub fn new(price_per_query: Decimal) -> Result<Self> {
        if price_per_query.is_sign_negative() && !price_per_query.is_zero() {
            return Err(invalid("price_per_query must be non-negative"));
        }
        Ok(Self {
            query_count: 0,
            price_per_query,
            total_cost: Decimal::ZERO,
        })
    }

    fn bill(&mut self) {
        self.query_count += 1;
        self.total_cost = Decimal::from(self.query_count) * self.price_per_query;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiResponse {
    pub probs: Vec<f64>,
    pub hard: usize,
}

impl ApiResponse {
    fn new(probs: Vec<f64>) -> Self {
        let hard = argmax(&probs);
        Self { probs, hard }
    }
}

pub struct VictimEndpoint {
    name: String,
    model: Model,
    policy: DefensePolicy,
    meter: Meter,
    rng: LabRng,
    distortion_sum: f64,
}

impl std::fmt::Debug for VictimEndpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // parameters stay hidden
        f.debug_struct("VictimEndpoint")
            .field("name", &self.name)
            .field("policy", &self.policy)
            .field("meter", &self.meter)
            .finish_non_exhaustive()
    }
}

impl VictimEndpoint {
    pub fn new(
        name: impl Into<String>,
        model: Model,
        policy: DefensePolicy,
        price_per_query: Decimal,
        seed: u64,
    ) -> Result<Self> {
        policy.validate()?;
        Ok(Self {
            name: name.into(),
            model,
            policy,
            meter: Meter::new(price_per_query)?,
            rng: rng::seeded(seed),
            distortion_sum: 0.0,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn input_dim(&self) -> usize {
        self.model.input_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.model.num_classes()
    }

    pub fn policy(&self) -> &DefensePolicy {
        &self.policy
    }

    pub fn check_input(&self, x: &FeatureVector) -> Result<()> {
        if x.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.dim(),
            });
        }
        Ok(())
    }

    /// Answer one query. Rejected queries are not billed.
    pub fn query(&mut self, x: &FeatureVector) -> Result<ApiResponse> {
        self.check_input(x)?;
        let raw = self.model.predict(x)?.probs;
        let defended = apply_defense(&self.policy, &raw, &mut self.rng)?;
        self.distortion_sum += half_l1(&raw, &defended);
        self.meter.bill();
        Ok(ApiResponse::new(defended))
    }

    /// Answer a batch in order. Every input is checked before any is billed.
    pub fn query_batch(&mut self, inputs: &[FeatureVector]) -> Result<Vec<ApiResponse>> {
        inputs.iter().try_for_each(|x| self.check_input(x))?;
        inputs.iter().map(|x| self.query(x)).collect()
    }

    pub fn usage(&self) -> Meter {
        self.meter
    }

    /// Running mean half-L1 distance between clean and served scores.
    pub fn mean_distortion(&self) -> f64 {
        if self.meter.query_count == 0 {
            0.0
        } else {
            self.distortion_sum / self.meter.query_count as f64
        }
    }

    /// `None` when no budget is configured.
    pub fn within_distortion_budget(&self) -> Option<bool> {
        self.policy.delta.map(|d| self.mean_distortion() <= d)
    }
}

pub(crate) fn half_l1(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}
