use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MeterSnapshot;
use crate::error::{Error, Result};

pub const DEFAULT_PRICES: &str = include_str!("../../data/prices.toml");

/// USD per 1,000 tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitPrices {
    pub input_per_1k: f64,
    pub output_per_1k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceTable {
    pub models: BTreeMap<String, UnitPrices>,
}

impl PriceTable {
    pub fn parse(text: &str) -> Result<Self> {
        let table: PriceTable =
            toml::from_str(text).map_err(|e| Error::Config(format!("price table: {e}")))?;
        for (model, p) in &table.models {
            let ok = |v: f64| v.is_finite() && v >= 0.0;
            if !ok(p.input_per_1k) || !ok(p.output_per_1k) {
                return Err(Error::Config(format!("price table: bad prices for `{model}`")));
            }
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn lookup(&self, model: &str) -> Option<UnitPrices> {
        self.models.get(model).copied()
    }
}

impl Default for PriceTable {
    fn default() -> Self {
        Self::parse(DEFAULT_PRICES).expect("shipped price table is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub total_requests: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub estimated_dollars: f64,
    pub wall_seconds: f64,
}

/// Dollar cost of the metered tokens at `prices`.
pub fn estimate_cost(meter: &MeterSnapshot, prices: UnitPrices) -> CostReport {
    let dollars = meter.prompt_tokens as f64 / 1000.0 * prices.input_per_1k
        + meter.completion_tokens as f64 / 1000.0 * prices.output_per_1k;
    CostReport {
        total_requests: meter.requests,
        prompt_tokens: meter.prompt_tokens,
        completion_tokens: meter.completion_tokens,
        estimated_dollars: dollars,
        wall_seconds: meter.wall_seconds(),
    }
}
