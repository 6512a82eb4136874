use serde::{Deserialize, Serialize};

use super::streams::{BenchmarkStream, StreamTag};
use crate::adapter::Event;
use crate::error::Result;
use crate::fedsim::ClientState;
use crate::method::AdaptationMethod;

/// One row of an evaluation trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub client_id: usize,
    pub stream_tag: StreamTag,
    pub sample_idx: usize,
    pub true_label: usize,
    pub pred_label: usize,
    pub e: f64,
    pub tau_hat: Option<f64>,
    pub event: Option<Event>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub records: Vec<TraceRecord>,
    pub accuracy: f64,
}

/// Runs `method` over the stream in order. The method should be fresh.
pub fn evaluate(method: &mut dyn AdaptationMethod, client: &ClientState, stream: &BenchmarkStream) -> Result<EvalResult> {
    let mut records = Vec::with_capacity(stream.samples.len());
    let mut hits = 0usize;
    for (i, s) in stream.samples.iter().enumerate() {
        let l = client.personal_head.logits(s.z.as_slice());
        let g = client.global_head.logits(s.z.as_slice());
        let out = method.predict(&s.z, &l, &g, s.label)?;
        let pred = out.y.argmax();
        let correct = pred == s.label;
        hits += correct as usize;
        records.push(TraceRecord {
            client_id: stream.client_id,
            stream_tag: stream.tag,
            sample_idx: i,
            true_label: s.label,
            pred_label: pred,
            e: out.e,
            tau_hat: out.tau_hat,
            event: out.event,
            alpha: out.prior.map(|p| p.alpha),
            beta: out.prior.map(|p| p.beta),
            correct,
        });
    }
    let accuracy = if records.is_empty() {
        0.0
    } else {
        hits as f64 / records.len() as f64
    };
    Ok(EvalResult { records, accuracy })
}
