use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Result};

/// Round to the 4-decimal fixed-point grid used for all currency amounts.
pub fn fixed4(d: Decimal) -> Decimal {
    d.round_dp_with_strategy(4, RoundingStrategy::MidpointAwayFromZero).normalize()
}

/// Human-to-API cost ratio; `Infinite` when the API was free.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CostRatio {
    Finite(Decimal),
    Infinite,
}

impl Serialize for CostRatio {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CostRatio::Finite(d) => rust_decimal::serde::float::serialize(d, s),
            CostRatio::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for CostRatio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Str(s) if s == "inf" => Ok(CostRatio::Infinite),
            Raw::Str(s) => s.parse().map(CostRatio::Finite).map_err(serde::de::Error::custom),
            Raw::Num(v) => Decimal::try_from(v).map(CostRatio::Finite).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub n_queries: u64,
    #[serde(with = "rust_decimal::serde::float")]
    pub api_cost: Decimal,
    #[serde(with = "rust_decimal::serde::float")]
    pub human_cost: Decimal,
    pub ratio: CostRatio,
}

/// API spend versus paying annotators for the same number of labels.
pub fn cost_report(n_queries: u64, price_per_query: Decimal, human_price_per_label: Decimal) -> Result<CostReport> {
    if price_per_query < Decimal::ZERO || human_price_per_label < Decimal::ZERO {
        return Err(invalid("prices must be non-negative"));
    }
    let n = Decimal::from(n_queries);
    let api_cost = fixed4(n * price_per_query);
    let human_cost = fixed4(n * human_price_per_label);
    let ratio = if api_cost.is_zero() {
        CostRatio::Infinite
    } else {
        CostRatio::Finite(fixed4(human_cost / api_cost))
    };
    Ok(CostReport {
        n_queries,
        api_cost,
        human_cost,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::str::FromStr;

    fn dec(s: &str) -> Decimal {
        Decimal::from_str(s).unwrap()
    }

    #[test]
    fn free_tier_is_infinite_ratio() {
        let r = cost_report(1968, Decimal::ZERO, dec("0.05")).unwrap();
        assert_eq!(r.api_cost, Decimal::ZERO);
        assert_eq!(r.human_cost, dec("98.4"));
        assert_eq!(r.ratio, CostRatio::Infinite);
        assert_eq!(serde_json::to_value(r).unwrap()["ratio"], "inf");
    }

    #[test]
    fn human_cost_sst() {
        let r = cost_report(9613, dec("0.01"), dec("0.05")).unwrap();
        assert_eq!(r.human_cost, dec("480.65"));
    }

    #[test]
    fn json_keys() {
        let r = cost_report(10, dec("0.5"), dec("0.05")).unwrap();
        let v = serde_json::to_value(r).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["api_cost", "human_cost", "n_queries", "ratio"]);
        assert_eq!(v["api_cost"], 5.0);
        assert_eq!(v["ratio"], 0.1);
        let back: CostReport = serde_json::from_value(v).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn negative_price_rejected() {
        assert!(cost_report(1, dec("-1"), Decimal::ZERO).is_err());
    }
}
