//! Ternary decomposition of quantized coefficients into trit-planes.
//!
//! Coefficient `c` with `L_c` digits is least-significant aligned: its digit
//! `l` (1-based, most significant first) lives in global plane
//! `L_max - L_c + l`. Early planes therefore carry only the widest
//! coefficients, and every coefficient finishes in plane `L_max`.

use crate::error::{Error, Result};
use crate::gaussian::{bin_offset, plane_length, pow3, BinPmf};
use crate::tensor::{FlatIndex, LatentGrid};

/// Marks a plane slot the coefficient does not occupy.
pub const SENTINEL: u8 = u8::MAX;

/// Per-coefficient digit counts and the resulting plane occupancy. Both
/// sides derive this from the shared scale field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaneLayout {
    lengths: Vec<u32>,
    max_length: u32,
}

impl PlaneLayout {
    pub fn new(lengths: Vec<u32>) -> Self {
        let max_length = lengths.iter().copied().max().unwrap_or(0);
        PlaneLayout {
            lengths,
            max_length,
        }
    }

    pub fn from_scales<I: IntoIterator<Item = f64>>(scales: I) -> Self {
        Self::new(scales.into_iter().map(plane_length).collect())
    }

    pub fn lengths(&self) -> &[u32] {
        &self.lengths
    }

    pub fn max_length(&self) -> u32 {
        self.max_length
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    /// First global plane (1-based) coefficient `c` occupies.
    pub fn first_plane(&self, c: usize) -> u32 {
        self.max_length - self.lengths[c] + 1
    }

    /// Digit position within coefficient `c` that sits in global `plane`.
    pub fn local_digit(&self, c: usize, plane: u32) -> Option<u32> {
        let first = self.first_plane(c);
        (plane >= first && plane <= self.max_length).then(|| plane - first + 1)
    }

    /// Coefficients occupying global `plane` (1-based), in raster order.
    pub fn plane_iter(&self, plane: u32) -> impl Iterator<Item = FlatIndex> + '_ {
        let min_len = (self.max_length + 1).saturating_sub(plane);
        let valid = plane >= 1 && plane <= self.max_length;
        self.lengths
            .iter()
            .enumerate()
            .filter(move |&(_, &l)| valid && l >= min_len)
            .map(|(c, _)| FlatIndex(c))
    }

    pub fn total_digits(&self) -> u64 {
        self.lengths.iter().map(|&l| l as u64).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TritPlaneStack {
    layout: PlaneLayout,
    // S x L_max, row per coefficient, indexed by global plane - 1
    digits: Vec<u8>,
}

impl TritPlaneStack {
    /// Decomposes a quantized grid using plane lengths from its own scales.
    pub fn decompose(grid: &LatentGrid, clamp: bool) -> Result<Self> {
        let layout = PlaneLayout::from_scales(grid.scales().iter().map(|&s| s as f64));
        Self::from_layout(grid.values(), layout, clamp)
    }

    /// Decomposes integer-valued `values` with the given layout. Values
    /// outside +/-floor(3^L/2) are an error unless `clamp` is set.
    pub fn from_layout(values: &[f32], layout: PlaneLayout, clamp: bool) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::DimensionMismatch {
                expected: layout.len(),
                got: values.len(),
            });
        }
        let l_max = layout.max_length() as usize;
        let mut digits = vec![SENTINEL; values.len() * l_max];
        for (index, (&v, &l)) in values.iter().zip(layout.lengths()).enumerate() {
            if !v.is_finite() || v.fract() != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "coefficient {index} value {v} is not quantized"
                )));
            }
            let limit = bin_offset(l) as i64;
            let mut q = v as i64;
            if q.abs() > limit {
                if !clamp {
                    return Err(Error::OutOfRange {
                        index,
                        value: q,
                        limit,
                    });
                }
                q = q.clamp(-limit, limit);
            }
            let mut s = (q + limit) as u32;
            let row = &mut digits[index * l_max..(index + 1) * l_max];
            for slot in row[l_max - l as usize..].iter_mut().rev() {
                *slot = (s % 3) as u8;
                s /= 3;
            }
        }
        Ok(TritPlaneStack { layout, digits })
    }

    pub fn layout(&self) -> &PlaneLayout {
        &self.layout
    }

    /// Digit of coefficient `c` in global `plane`, or [`SENTINEL`].
    pub fn digit(&self, c: usize, plane: u32) -> u8 {
        let l_max = self.layout.max_length() as usize;
        self.digits[c * l_max + plane as usize - 1]
    }

    /// Symbol index `s_c` rebuilt from the digits.
    pub fn symbol(&self, c: usize) -> u32 {
        let l_max = self.layout.max_length() as usize;
        self.digits[c * l_max..(c + 1) * l_max]
            .iter()
            .filter(|&&d| d != SENTINEL)
            .fold(0, |s, &d| s * 3 + d as u32)
    }

    /// Quantized value of coefficient `c`.
    pub fn value(&self, c: usize) -> i64 {
        self.symbol(c) as i64 - bin_offset(self.layout.lengths()[c]) as i64
    }

    pub fn plane_iter(&self, plane: u32) -> impl Iterator<Item = FlatIndex> + '_ {
        self.layout.plane_iter(plane)
    }

    /// Reconstruction when coefficient `c` has its leading `known[c]` trits:
    /// exact when all are known, otherwise the conditional mean of its PMF
    /// refined by the known trits.
    pub fn recompose(&self, known: &[u32], pmfs: &[BinPmf]) -> Result<Vec<f64>> {
        let lengths = self.layout.lengths();
        if known.len() != lengths.len() || pmfs.len() != lengths.len() {
            return Err(Error::DimensionMismatch {
                expected: lengths.len(),
                got: known.len().min(pmfs.len()),
            });
        }
        let l_max = self.layout.max_length();
        (0..lengths.len())
            .map(|c| {
                let l = lengths[c];
                if known[c] > l {
                    return Err(Error::InvalidArgument(format!(
                        "coefficient {c}: {} trits known but length is {l}",
                        known[c]
                    )));
                }
                if known[c] == l {
                    return Ok(self.value(c) as f64);
                }
                let mut pmf = pmfs[c].clone();
                for k in 1..=known[c] {
                    pmf = pmf.refine(self.digit(c, l_max - l + k))?;
                }
                Ok(pmf.conditional_mean())
            })
            .collect()
    }
}

/// Base-3 digits of `s` over `length` positions, most significant first.
pub fn ternary_digits(s: u32, length: u32) -> Vec<u8> {
    debug_assert!(s < pow3(length));
    (0..length)
        .rev()
        .map(|i| ((s / pow3(i)) % 3) as u8)
        .collect()
}
