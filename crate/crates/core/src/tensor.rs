//! Latent tensors, their side fields, and the `PICL` tensor file format.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// Smallest admissible Gaussian scale. Smaller scales are clamped on load.
pub const SCALE_FLOOR: f64 = 1e-6;

pub const TENSOR_MAGIC: [u8; 4] = *b"PICL";
pub const TENSOR_VERSION: u8 = 1;
const TENSOR_HEADER_LEN: usize = 4 + 1 + 3 * 4;
/// Upper bound on coefficient count accepted from a file header.
const MAX_ELEMENTS: u64 = 1 << 30;

/// Position of a coefficient in h-major, then w, then c raster order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FlatIndex(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl Dims {
    pub fn new(height: usize, width: usize, channels: usize) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::InvalidArgument(format!(
                "dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        let count = (height as u64)
            .checked_mul(width as u64)
            .and_then(|n| n.checked_mul(channels as u64));
        match count {
            Some(n) if n <= MAX_ELEMENTS => Ok(Dims {
                height,
                width,
                channels,
            }),
            _ => Err(Error::DimensionOverflow {
                height: height as u32,
                width: width as u32,
                channels: channels as u32,
            }),
        }
    }

    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flat(&self, h: usize, w: usize, c: usize) -> FlatIndex {
        debug_assert!(h < self.height && w < self.width && c < self.channels);
        FlatIndex((h * self.width + w) * self.channels + c)
    }

    pub fn unflat(&self, index: FlatIndex) -> (usize, usize, usize) {
        let c = index.0 % self.channels;
        let rest = index.0 / self.channels;
        (rest / self.width, rest % self.width, c)
    }

    /// Nominal image pixel count for a stride-16 analysis transform.
    pub fn nominal_pixels(&self) -> u64 {
        256 * self.height as u64 * self.width as u64
    }
}

/// Centered latent coefficients with their mean and scale side fields.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentGrid {
    dims: Dims,
    values: Vec<f32>,
    means: Vec<f32>,
    scales: Vec<f32>,
}

impl LatentGrid {
    /// Builds a grid, clamping scales to [`SCALE_FLOOR`].
    pub fn new(
        dims: Dims,
        values: Vec<f32>,
        means: Vec<f32>,
        mut scales: Vec<f32>,
    ) -> Result<Self> {
        let n = dims.len();
        for len in [values.len(), means.len(), scales.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: len,
                });
            }
        }
        for (index, s) in scales.iter_mut().enumerate() {
            if !s.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if (*s as f64) < SCALE_FLOOR {
                *s = SCALE_FLOOR as f32;
            }
        }
        Ok(LatentGrid {
            dims,
            values,
            means,
            scales,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn means(&self) -> &[f32] {
        &self.means
    }

    pub fn scales(&self) -> &[f32] {
        &self.scales
    }

    /// Same side fields, new coefficient values.
    pub fn with_values(&self, values: Vec<f32>) -> Result<Self> {
        LatentGrid::new(self.dims, values, self.means.clone(), self.scales.clone())
    }

    /// Rounds every value half away from zero. Means and scales are untouched.
    pub fn quantize(&self) -> Result<Self> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(index, v)| {
                if v.is_finite() {
                    Ok(v.round())
                } else {
                    Err(Error::NonFinite { index })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LatentGrid {
            dims: self.dims,
            values,
            means: self.means.clone(),
            scales: self.scales.clone(),
        })
    }

    /// Squared error between this grid's values and `other`, summed.
    pub fn squared_error(&self, other: &[f64]) -> f64 {
        self.values
            .iter()
            .zip(other)
            .map(|(&a, &b)| {
                let d = a as f64 - b;
                d * d
            })
            .sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.len();
        let mut out = Vec::with_capacity(TENSOR_HEADER_LEN + 12 * n);
        out.extend_from_slice(&TENSOR_MAGIC);
        out.push(TENSOR_VERSION);
        for d in [self.dims.height, self.dims.width, self.dims.channels] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for field in [&self.values, &self.means, &self.scales] {
            for v in field.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::CorruptHeader("file shorter than magic".into()));
        }
        let found: [u8; 4] = bytes[..4].try_into().unwrap();
        if found != TENSOR_MAGIC {
            return Err(Error::BadMagic {
                expected: TENSOR_MAGIC,
                found,
            });
        }
        if bytes.len() < TENSOR_HEADER_LEN {
            return Err(Error::CorruptHeader("header truncated".into()));
        }
        if bytes[4] != TENSOR_VERSION {
            return Err(Error::UnsupportedVersion(bytes[4]));
        }
        let read_u32 = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        let (h, w, c) = (read_u32(5), read_u32(9), read_u32(13));
        let dims = Dims::new(h as usize, w as usize, c as usize).map_err(|e| match e {
            Error::DimensionOverflow { .. } => Error::DimensionOverflow {
                height: h,
                width: w,
                channels: c,
            },
            other => Error::CorruptHeader(other.to_string()),
        })?;
        let n = dims.len();
        let expected = TENSOR_HEADER_LEN + 12 * n;
        if bytes.len() < expected {
            return Err(Error::TruncatedPayload {
                expected: expected - TENSOR_HEADER_LEN,
                found: bytes.len() - TENSOR_HEADER_LEN,
            });
        }
        if bytes.len() > expected {
            return Err(Error::CorruptHeader(format!(
                "{} trailing bytes after payload",
                bytes.len() - expected
            )));
        }
        let field = |k: usize| -> Vec<f32> {
            let start = TENSOR_HEADER_LEN + 4 * n * k;
            bytes[start..start + 4 * n]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
                .collect()
        };
        LatentGrid::new(dims, field(0), field(1), field(2))
    }
}

pub fn save_grid(grid: &LatentGrid, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, grid.to_bytes())?;
    Ok(())
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<LatentGrid> {
    LatentGrid::from_bytes(&fs::read(path)?)
}

/// How synthetic scales are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleLaw {
    Constant(f64),
    LogUniform { lo: f64, hi: f64 },
}

impl ScaleLaw {
    fn validate(&self) -> Result<()> {
        match *self {
            ScaleLaw::Constant(s) if !(s > 0.0 && s.is_finite()) => Err(Error::InvalidArgument(
                format!("constant scale must be positive, got {s}"),
            )),
            ScaleLaw::LogUniform { lo, hi } if !(lo > 0.0 && hi >= lo && hi.is_finite()) => {
                Err(Error::InvalidArgument(format!(
                    "log-uniform bounds must satisfy 0 < lo <= hi, got [{lo}, {hi}]"
                )))
            }
            _ => Ok(()),
        }
    }
}

impl std::str::FromStr for ScaleLaw {
    type Err = Error;

    /// `constant:SIGMA` or `loguniform:LO:HI`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| {
            t.parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad number {t:?} in scale law")))
        };
        let law = match parts.as_slice() {
            ["constant", s] => ScaleLaw::Constant(num(s)?),
            ["loguniform", lo, hi] => ScaleLaw::LogUniform {
                lo: num(lo)?,
                hi: num(hi)?,
            },
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "scale law {s:?}: expected constant:S or loguniform:LO:HI"
                )))
            }
        };
        law.validate()?;
        Ok(law)
    }
}

/// Deterministic synthetic grid standing in for an analysis transform.
///
/// Each coefficient draws its scale from `law`, its centered value from
/// N(0, scale^2) and its mean from N(0, 1).
pub fn synth_grid(seed: u64, dims: Dims, law: ScaleLaw) -> Result<LatentGrid> {
    law.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let n = dims.len();
    let mut values = Vec::with_capacity(n);
    let mut means = Vec::with_capacity(n);
    let mut scales = Vec::with_capacity(n);
    for _ in 0..n {
        let scale = match law {
            ScaleLaw::Constant(s) => s as f32,
            ScaleLaw::LogUniform { lo, hi } => {
                let u: f64 = rng.random_range(lo.ln()..=hi.ln());
                (u.exp() as f32).clamp(lo as f32, hi as f32)
            }
        };
        let z: f64 = std_normal.sample(&mut rng);
        values.push((z * scale as f64) as f32);
        means.push(std_normal.sample(&mut rng) as f32);
        scales.push(scale);
    }
    LatentGrid::new(dims, values, means, scales)
}
