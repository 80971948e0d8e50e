//! Downstream classifiers: a seeded synthetic linear head, and a CSV bridge
//! for logits computed by external models.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Anything mapping a reconstruction to class logits.
pub trait TaskOracle: Sync {
    fn classes(&self) -> usize;
    fn logits(&self, input: &[f64]) -> Result<Vec<f64>>;

    fn predict(&self, input: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(input)?))
    }
}

/// `z = W x + b` with `W ~ N(0, 1/dim)` and `b ~ N(0, 0.01)` drawn once
/// from the seed.
#[derive(Debug, Clone)]
pub struct SyntheticClassifier {
    seed: u64,
    classes: usize,
    dim: usize,
    // row-major, classes x dim
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl SyntheticClassifier {
    pub fn new(seed: u64, classes: usize, dim: usize) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 classes, got {classes}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "input dimension must be positive".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Normal::new(0.0, (1.0 / dim as f64).sqrt()).unwrap();
        let weights = (0..classes * dim).map(|_| w.sample(&mut rng)).collect();
        let b = Normal::new(0.0, 0.1).unwrap();
        let bias = (0..classes).map(|_| b.sample(&mut rng)).collect();
        Ok(SyntheticClassifier {
            seed,
            classes,
            dim,
            weights,
            bias,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

impl TaskOracle for SyntheticClassifier {
    fn classes(&self) -> usize {
        self.classes
    }

    fn logits(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: input.len(),
            });
        }
        Ok(self
            .weights
            .chunks_exact(self.dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect())
    }
}

/// Index of the largest entry; the first one on ties.
pub fn argmax(z: &[f64]) -> usize {
    z.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
        .0
}

/// ln softmax(z)[label]: the negative cross-entropy of the true label, used
/// as the confidence signal for the oracle orderings.
pub fn log_prob(z: &[f64], label: usize) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
    z[label] - lse
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogitRecord {
    pub sample_id: String,
    pub level: u32,
    pub label: usize,
    pub logits: Vec<f64>,
}

impl LogitRecord {
    pub fn prediction(&self) -> usize {
        argmax(&self.logits)
    }

    pub fn correct(&self) -> bool {
        self.prediction() == self.label
    }
}

/// Streaming reader over a logits CSV. Checks the header, row shape,
/// finiteness, label range, per-sample grouping, and that each sample's
/// levels form a contiguous ascending run.
pub struct LogitReader<R: Read> {
    rows: csv::StringRecordsIntoIter<R>,
    classes: usize,
    line: u64,
    current: Option<(String, u32)>,
    finished: HashSet<String>,
}

impl<R: Read> LogitReader<R> {
    pub fn new(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        let cols: Vec<&str> = header.iter().collect();
        if cols.len() < 3 || cols[0] != "sample_id" || cols[1] != "level" || cols[2] != "label" {
            return Err(Error::Schema(format!(
                "header must start with sample_id,level,label; got {}",
                cols.join(",")
            )));
        }
        let classes = cols.len() - 3;
        if classes < 2 {
            return Err(Error::Schema(format!(
                "need at least 2 logit columns, got {classes}"
            )));
        }
        for (k, c) in cols[3..].iter().enumerate() {
            if *c != format!("z{k}") {
                return Err(Error::Schema(format!(
                    "column {} should be z{k}, got {c}",
                    k + 3
                )));
            }
        }
        Ok(LogitReader {
            rows: rdr.into_records(),
            classes,
            line: 1,
            current: None,
            finished: HashSet::new(),
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    fn parse(&mut self, row: csv::StringRecord) -> Result<LogitRecord> {
        let line = self.line;
        let err = |msg: String| Error::Schema(format!("line {line}: {msg}"));
        if row.len() != self.classes + 3 {
            return Err(err(format!(
                "expected {} fields, got {}",
                self.classes + 3,
                row.len()
            )));
        }
        let sample_id = row[0].to_string();
        let level: u32 = row[1]
            .parse()
            .map_err(|_| err(format!("bad level {:?}", &row[1])))?;
        let label: usize = row[2]
            .parse()
            .map_err(|_| err(format!("bad label {:?}", &row[2])))?;
        if label >= self.classes {
            return Err(err(format!(
                "label {label} out of range for {} classes",
                self.classes
            )));
        }
        let logits = row
            .iter()
            .skip(3)
            .map(|v| match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(err(format!("bad logit {v:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        match &self.current {
            Some((id, prev)) if *id == sample_id => {
                if level != prev + 1 {
                    return Err(err(format!(
                        "sample {sample_id}: level {level} does not follow {prev}"
                    )));
                }
            }
            _ => {
                if let Some((id, _)) = self.current.take() {
                    self.finished.insert(id);
                }
                if self.finished.contains(&sample_id) {
                    return Err(err(format!("sample {sample_id} rows are not contiguous")));
                }
            }
        }
        self.current = Some((sample_id.clone(), level));
        Ok(LogitRecord {
            sample_id,
            level,
            label,
            logits,
        })
    }
}

impl<R: Read> Iterator for LogitReader<R> {
    type Item = Result<LogitRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        let row = self.rows.next()?;
        self.line += 1;
        Some(row.map_err(Error::from).and_then(|r| self.parse(r)))
    }
}

pub fn load_logits(path: impl AsRef<Path>) -> Result<Vec<LogitRecord>> {
    let f = std::fs::File::open(path)?;
    LogitReader::new(std::io::BufReader::new(f))?.collect()
}

/// Groups records into per-sample level sequences, keeping file order.
pub fn group_by_sample(records: Vec<LogitRecord>) -> Vec<Vec<LogitRecord>> {
    let mut out: Vec<Vec<LogitRecord>> = Vec::new();
    for r in records {
        match out.last_mut() {
            Some(g) if g[0].sample_id == r.sample_id => g.push(r),
            _ => out.push(vec![r]),
        }
    }
    out
}

pub fn write_logits<W: Write>(writer: W, records: &[LogitRecord]) -> Result<()> {
    let k = records.first().map_or(0, |r| r.logits.len());
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["sample_id".to_string(), "level".into(), "label".into()];
    header.extend((0..k).map(|i| format!("z{i}")));
    w.write_record(&header)?;
    for r in records {
        if r.logits.len() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: r.logits.len(),
            });
        }
        let mut row = vec![
            r.sample_id.clone(),
            r.level.to_string(),
            r.label.to_string(),
        ];
        row.extend(r.logits.iter().map(|z| format!("{z:e}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
