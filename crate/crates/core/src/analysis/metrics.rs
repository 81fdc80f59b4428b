use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A metric value, or an explicit marker when its precondition fails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric(pub Option<f64>);

impl Metric {
    pub const UNDEFINED: Metric = Metric(None);

    pub fn value(self) -> Option<f64> {
        self.0
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v}"),
            None => f.write_str("undefined"),
        }
    }
}

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Some(v) => s.serialize_f64(v),
            None => s.serialize_str("undefined"),
        }
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Metric(Some(v))),
            Raw::Text(t) if t == "undefined" => Ok(Metric::UNDEFINED),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("unexpected metric value {t:?}"))),
        }
    }
}

/// Agreement between predicted and reference heart rates (bpm).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mae: Metric,
    pub rmse: Metric,
    /// Percent.
    pub mape: Metric,
    pub pearson: Metric,
    pub n: usize,
}

pub fn compute_metrics(pred: &[f64], reference: &[f64]) -> Result<MetricsReport> {
    if pred.len() != reference.len() {
        return Err(Error::input(format!(
            "{} predictions vs {} reference values",
            pred.len(),
            reference.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::input("metrics need at least one pair"));
    }
    let n = pred.len() as f64;
    let errs = || pred.iter().zip(reference).map(|(p, r)| p - r);

    let mae = errs().map(f64::abs).sum::<f64>() / n;
    let rmse = (errs().map(|e| e * e).sum::<f64>() / n).sqrt();
    let mape = if reference.contains(&0.0) {
        Metric::UNDEFINED
    } else {
        let s: f64 = pred
            .iter()
            .zip(reference)
            .map(|(p, r)| ((p - r) / r).abs())
            .sum();
        Metric(Some(100.0 * s / n))
    };

    Ok(MetricsReport {
        mae: Metric(Some(mae)),
        rmse: Metric(Some(rmse)),
        mape,
        pearson: Metric(pearson(pred, reference)),
        n: pred.len(),
    })
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}
