use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::risk::{disagreement_risk, Domain, Source};
use super::BOUND_TOL;
use crate::error::{invalid, Result};
use crate::models::LabelMode;

/// Source/target distance, tagged by how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TotalVariation {
    /// Computed from known distributions; the bound can be checked.
    Exact(f64),
    /// Empirical lower-bound-style estimate; the bound is not evaluable.
    Estimated(f64),
}

impl TotalVariation {
    pub fn value(&self) -> f64 {
        match *self {
            TotalVariation::Exact(v) | TotalVariation::Estimated(v) => v,
        }
    }
}

/// Serialized as `true`, `false`, or `"not_evaluable"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundStatus {
    Holds,
    Violated,
    NotEvaluable,
}

impl BoundStatus {
    fn check(lhs: f64, rhs: f64) -> Self {
        if lhs <= rhs + BOUND_TOL {
            BoundStatus::Holds
        } else {
            BoundStatus::Violated
        }
    }
}

impl Serialize for BoundStatus {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            BoundStatus::Holds => s.serialize_bool(true),
            BoundStatus::Violated => s.serialize_bool(false),
            BoundStatus::NotEvaluable => s.serialize_str("not_evaluable"),
        }
    }
}

impl<'de> Deserialize<'de> for BoundStatus {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Bool(bool),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Bool(true) => Ok(BoundStatus::Holds),
            Raw::Bool(false) => Ok(BoundStatus::Violated),
            Raw::Str(s) if s == "not_evaluable" => Ok(BoundStatus::NotEvaluable),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("unexpected bound status {s:?}"))),
        }
    }
}

/// Terms of the attacker-risk bound `eps_a <= eps_v + 2 tv + gap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub epsilon_v: f64,
    pub epsilon_a: f64,
    pub imitation_gap: f64,
    pub tv: f64,
    pub bound_rhs: f64,
    pub bound_holds: BoundStatus,
    pub mode: LabelMode,
}

/// A predictor's outputs on the source and on the target evaluation inputs.
///
/// Models answer anywhere, so [`Paired::same`] covers them; recorded endpoint
/// responses only exist for the inputs that were queried.
#[derive(Debug, Clone, Copy)]
pub struct Paired<'a> {
    pub source: Source<'a>,
    pub target: Source<'a>,
}

impl<'a> Paired<'a> {
    pub fn same(s: Source<'a>) -> Self {
        Self { source: s, target: s }
    }
}

/// Fill every term of the domain-adaptation bound.
///
/// The imitation gap is the smaller of the victim/attacker disagreements on
/// the two domains.
pub fn da_bound_report(
    victim: &Paired,
    attacker: &Paired,
    source: &Domain,
    target: &Domain,
    tv: TotalVariation,
    mode: LabelMode,
) -> Result<RiskReport> {
    let d = tv.value();
    if !(0.0..=1.0).contains(&d) {
        return Err(invalid(format!("total variation must lie in [0,1], got {d}")));
    }
    let epsilon_v = disagreement_risk(&source.oracle(), &victim.source, &source.eval, mode)?;
    let epsilon_a = disagreement_risk(&target.oracle(), &attacker.target, &target.eval, mode)?;
    let gap_source = disagreement_risk(&victim.source, &attacker.source, &source.eval, mode)?;
    let gap_target = disagreement_risk(&victim.target, &attacker.target, &target.eval, mode)?;
    let imitation_gap = gap_source.min(gap_target);
    let bound_rhs = epsilon_v + 2.0 * d + imitation_gap;
    let bound_holds = match tv {
        TotalVariation::Exact(_) => BoundStatus::check(epsilon_a, bound_rhs),
        TotalVariation::Estimated(_) => BoundStatus::NotEvaluable,
    };
    Ok(RiskReport {
        epsilon_v,
        epsilon_a,
        imitation_gap,
        tv: d,
        bound_rhs,
        bound_holds,
        mode,
    })
}

/// Terms of the distortion bound `eps_v(defended) <= eps_v(raw) + delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefenseBoundReport {
    pub epsilon_v_raw: f64,
    pub epsilon_v_defended: f64,
    pub delta: f64,
    pub holds: bool,
    pub mode: LabelMode,
}

/// All terms are taken on the source domain.
pub fn defense_bound_report(source: &Domain, raw: &Source, defended: &Source, mode: LabelMode) -> Result<DefenseBoundReport> {
    let epsilon_v_raw = disagreement_risk(&source.oracle(), raw, &source.eval, mode)?;
    let epsilon_v_defended = disagreement_risk(&source.oracle(), defended, &source.eval, mode)?;
    let delta = disagreement_risk(raw, defended, &source.eval, mode)?;
    Ok(DefenseBoundReport {
        epsilon_v_raw,
        epsilon_v_defended,
        delta,
        holds: epsilon_v_defended <= epsilon_v_raw + delta + BOUND_TOL,
        mode,
    })
}
