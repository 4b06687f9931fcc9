//! Sensor wire format: one JSON record per line or datagram.
//!
//! `{"t":1000,"src":"bits","sig":"breath","v":0.42}` carries a continuous
//! value normalized to `[0,1]`; `{"t":2000,"src":"polar","sig":"heart","ev":"beat"}`
//! carries a discrete event.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: u64,
    pub src: String,
    pub sig: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ev: Option<String>,
}

impl Sample {
    pub fn value(t: u64, src: &str, sig: &str, v: f64) -> Self {
        Self {
            t,
            src: src.to_string(),
            sig: sig.to_string(),
            v: Some(v),
            ev: None,
        }
    }

    pub fn event(t: u64, src: &str, sig: &str, ev: &str) -> Self {
        Self {
            t,
            src: src.to_string(),
            sig: sig.to_string(),
            v: None,
            ev: Some(ev.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("malformed sample: {0}")]
pub struct MalformedSample(pub String);

pub fn decode_sample(line: &str) -> Result<Sample, MalformedSample> {
    let sample: Sample =
        serde_json::from_str(line.trim()).map_err(|e| MalformedSample(e.to_string()))?;
    match (&sample.v, &sample.ev) {
        (Some(_), Some(_)) => Err(MalformedSample("both `v` and `ev` present".into())),
        (None, None) => Err(MalformedSample("neither `v` nor `ev` present".into())),
        _ => Ok(sample),
    }
}

pub fn encode_sample(sample: &Sample) -> String {
    serde_json::to_string(sample).expect("sample serializes")
}
