//! Threshold-stopped progressive inference and filter training data.
//!
//! Decoding visits levels in order, classifies each reconstruction and stops
//! at the first level whose filter probability reaches the threshold. If no
//! level qualifies the last level's prediction is returned.

use std::io::Write;

use rayon::prelude::*;

use super::features::{extract_features, FeatureVector};
use super::filter::FilterModel;
use crate::codec::{encode, Budget, EncodeOptions, ProgressiveBitstream, StreamHeader};
use crate::error::{Error, Result};
use crate::task::{argmax, TaskOracle};
use crate::tensor::LatentGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LevelGrid {
    /// Uniform checkpoints from the cut table.
    #[default]
    Checkpoints,
    /// Plane boundaries.
    Planes,
}

impl std::str::FromStr for LevelGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "checkpoints" => Ok(LevelGrid::Checkpoints),
            "planes" => Ok(LevelGrid::Planes),
            _ => Err(Error::InvalidArgument(format!("unknown level grid {s:?}"))),
        }
    }
}

/// Budgets for levels 1..=L of a stream.
pub fn level_budgets(header: &StreamHeader, grid: LevelGrid) -> Vec<Budget> {
    match grid {
        LevelGrid::Checkpoints => (1..=header.checkpoints.len() as u32)
            .map(Budget::Level)
            .collect(),
        LevelGrid::Planes => (1..=header.plane_ends.len() as u32)
            .map(Budget::Plane)
            .collect(),
    }
}

/// One encoded input with its reference label: the classifier's decision
/// on the losslessly decoded latent.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub stream: ProgressiveBitstream,
    pub label: usize,
}

impl Sample {
    pub fn prepare(
        id: impl Into<String>,
        grid: &LatentGrid,
        oracle: &dyn TaskOracle,
        opts: &EncodeOptions,
    ) -> Result<Self> {
        let (stream, _) = encode(grid, opts)?;
        let full = stream.decode(Budget::Full)?;
        let label = oracle.predict(&full.latent)?;
        Ok(Sample {
            id: id.into(),
            stream,
            label,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRow {
    pub sample_id: String,
    pub level: u32,
    pub bytes: u64,
    pub logits: Vec<f64>,
    pub features: FeatureVector,
    pub correct: bool,
}

/// Decodes every sample at every level and records features and
/// correctness. Rows come out sample-major, level-minor.
pub fn build_training_set(
    samples: &[Sample],
    oracle: &dyn TaskOracle,
    grid: LevelGrid,
) -> Result<Vec<TrainingRow>> {
    let jobs: Vec<(usize, u32, Budget)> = samples
        .iter()
        .enumerate()
        .flat_map(|(i, s)| {
            level_budgets(s.stream.header(), grid)
                .into_iter()
                .enumerate()
                .map(move |(l, b)| (i, l as u32 + 1, b))
        })
        .collect();
    jobs.par_iter()
        .map(|&(i, level, budget)| {
            let s = &samples[i];
            let d = s.stream.decode(budget)?;
            let logits = oracle.logits(&d.latent)?;
            let features = extract_features(&logits)?;
            Ok(TrainingRow {
                sample_id: s.id.clone(),
                level,
                bytes: d.report.budget_bytes as u64,
                correct: argmax(&logits) == s.label,
                logits,
                features,
            })
        })
        .collect()
}

/// Index of the first probability reaching `tau`, else the last index.
pub fn first_crossing(ps: &[f64], tau: f64) -> Result<usize> {
    if ps.is_empty() {
        return Err(Error::InvalidArgument("no levels".into()));
    }
    Ok(ps.iter().position(|&p| p >= tau).unwrap_or(ps.len() - 1))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub level: u32,
    pub bytes: Option<u64>,
    pub p: f64,
    pub pred: usize,
    pub stop: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveOutcome {
    pub prediction: usize,
    /// Chosen level, 1-based.
    pub level: u32,
    pub bytes: Option<u64>,
    /// Whether the threshold was reached, as opposed to the fallback.
    pub crossed: bool,
    pub trace: Vec<TraceRow>,
}

fn check_tau(tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::InvalidArgument(format!(
            "threshold {tau} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Runs the stopping rule over precomputed per-level `(bytes, logits)`.
pub fn stop_on_levels(
    levels: &[(Option<u64>, Vec<f64>)],
    model: &FilterModel,
    tau: f64,
) -> Result<AdaptiveOutcome> {
    check_tau(tau)?;
    if levels.is_empty() {
        return Err(Error::InvalidArgument("no levels".into()));
    }
    let mut trace = Vec::new();
    for (i, (bytes, z)) in levels.iter().enumerate() {
        let p = model.predict(&extract_features(z)?);
        let last = i + 1 == levels.len();
        let stop = p >= tau || last;
        trace.push(TraceRow {
            level: i as u32 + 1,
            bytes: *bytes,
            p,
            pred: argmax(z),
            stop,
        });
        if stop {
            let t = trace.last().unwrap();
            return Ok(AdaptiveOutcome {
                prediction: t.pred,
                level: t.level,
                bytes: t.bytes,
                crossed: p >= tau,
                trace,
            });
        }
    }
    unreachable!()
}

/// Decodes `stream` level by level, stopping once the filter reaches `tau`.
pub fn adaptive_decode(
    stream: &ProgressiveBitstream,
    oracle: &dyn TaskOracle,
    model: &FilterModel,
    tau: f64,
    levels: &[Budget],
) -> Result<AdaptiveOutcome> {
    check_tau(tau)?;
    if levels.is_empty() {
        return Err(Error::InvalidArgument("no levels".into()));
    }
    let mut trace = Vec::new();
    for (i, &b) in levels.iter().enumerate() {
        let d = stream.decode(b)?;
        let z = oracle.logits(&d.latent)?;
        let p = model.predict(&extract_features(&z)?);
        let last = i + 1 == levels.len();
        let stop = p >= tau || last;
        trace.push(TraceRow {
            level: i as u32 + 1,
            bytes: Some(d.report.budget_bytes as u64),
            p,
            pred: argmax(&z),
            stop,
        });
        if stop {
            let t = trace.last().unwrap();
            return Ok(AdaptiveOutcome {
                prediction: t.pred,
                level: t.level,
                bytes: t.bytes,
                crossed: p >= tau,
                trace,
            });
        }
    }
    unreachable!()
}

/// Writes traces as `sample_id,level,bytes,p,pred,stop`.
pub fn write_trace<W: Write>(writer: W, traces: &[(String, Vec<TraceRow>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["sample_id", "level", "bytes", "p", "pred", "stop"])?;
    for (id, rows) in traces {
        for r in rows {
            w.write_record([
                id.clone(),
                r.level.to_string(),
                r.bytes.map_or(String::new(), |b| b.to_string()),
                format!("{:.9}", r.p),
                r.pred.to_string(),
                (r.stop as u8).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
