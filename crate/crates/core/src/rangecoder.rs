//! Range coder for trit symbols under integer frequency models.
//!
//! Layout: 64-bit range renormalized byte-wise to stay in `[2^56, 2^64)`, a
//! 128-bit `low` whose bit 64 is the carry, and LZMA-style cache/pending
//! byte handling for carry propagation. The top sub-interval absorbs the
//! `range mod total` remainder. The integer part of the code value is always
//! zero, so its byte is never written.
//!
//! The decoder tracks the code value twice: once with unread bytes assumed
//! `0x00` and once with them assumed `0xFF`. A symbol is emitted only when
//! both bounds select it, so decoding any byte prefix yields a correct
//! symbol prefix and then reports [`DecodeError::Truncated`].

use std::fmt;

use crate::error::Error;
use crate::gaussian::TritMasses;

const RANGE_BOTTOM: u64 = 1 << 56;
const TOP_BYTE_FF: u128 = 0xFF00_0000_0000_0000;
const CARRY: u128 = 1 << 64;
const WINDOW_MASK: u128 = 0x00FF_FFFF_FFFF_FFFF;
/// Largest model total the coder accepts.
pub const MAX_TOTAL: u32 = 1 << 16;

fn validate(trit: Option<u8>, m: &TritMasses) -> Result<(), Error> {
    if m.total == 0 || m.total > MAX_TOTAL {
        return Err(Error::Coder(format!(
            "model total {} outside 1..=2^16",
            m.total
        )));
    }
    if m.freqs.iter().map(|&f| f as u64).sum::<u64>() != m.total as u64 {
        return Err(Error::Coder(format!(
            "masses {:?} do not sum to {}",
            m.freqs, m.total
        )));
    }
    if let Some(d) = trit {
        if d > 2 || m.freqs[d as usize] == 0 {
            return Err(Error::Coder(format!(
                "trit {d} has zero mass in {:?}",
                m.freqs
            )));
        }
    }
    Ok(())
}

/// Whether symbol `d` is the last one with non-zero mass, which owns the
/// remainder of the range.
fn owns_remainder(m: &TritMasses, d: usize) -> bool {
    m.freqs[d + 1..].iter().all(|&f| f == 0)
}

#[derive(Debug)]
pub struct Encoder {
    low: u128,
    range: u64,
    cache: Option<u8>,
    pending: u64,
    out: Vec<u8>,
    symbols: u64,
    ideal_bits: f64,
    flushed: bool,
}

impl Default for Encoder {
    fn default() -> Self {
        Self::new()
    }
}

impl Encoder {
    pub fn new() -> Self {
        Encoder {
            low: 0,
            range: u64::MAX,
            cache: None,
            pending: 0,
            out: Vec::new(),
            symbols: 0,
            ideal_bits: 0.0,
            flushed: false,
        }
    }

    pub fn encode(&mut self, trit: u8, masses: &TritMasses) -> Result<(), Error> {
        if self.flushed {
            return Err(Error::Coder("encode after flush".into()));
        }
        validate(Some(trit), masses)?;
        let d = trit as usize;
        let cum: u32 = masses.freqs[..d].iter().sum();
        let r = self.range / masses.total as u64;
        let base = r * cum as u64;
        self.low += base as u128;
        self.range = if owns_remainder(masses, d) {
            self.range - base
        } else {
            r * masses.freqs[d] as u64
        };
        while self.range < RANGE_BOTTOM {
            self.range <<= 8;
            self.shift_low();
        }
        self.symbols += 1;
        self.ideal_bits += masses.cost(trit);
        Ok(())
    }

    fn shift_low(&mut self) {
        if self.low < TOP_BYTE_FF || self.low >= CARRY {
            let carry = (self.low >> 64) as u8;
            match self.cache {
                Some(c) => self.out.push(c.wrapping_add(carry)),
                None => debug_assert_eq!(carry, 0, "carry into the integer part"),
            }
            for _ in 0..self.pending {
                self.out.push(0xFFu8.wrapping_add(carry));
            }
            self.pending = 0;
            self.cache = Some((self.low >> 56) as u8);
        } else {
            self.pending += 1;
        }
        self.low = (self.low & WINDOW_MASK) << 8;
    }

    /// Writes the shortest tail that pins the final interval: the value with
    /// the most trailing zero bytes whose every continuation stays inside.
    pub fn flush(&mut self) -> Result<Vec<u8>, Error> {
        if self.flushed {
            return Err(Error::Coder("flush called twice".into()));
        }
        self.flushed = true;
        let end = self.low + self.range as u128;
        let mut keep = 8;
        for dropped in (0..8u32).rev() {
            let unit = 1u128 << (8 * dropped);
            let v = self.low.div_ceil(unit) * unit;
            if v + unit <= end {
                self.low = v;
                keep = 8 - dropped;
                break;
            }
        }
        for _ in 0..=keep {
            self.shift_low();
        }
        Ok(std::mem::take(&mut self.out))
    }

    pub fn symbols(&self) -> u64 {
        self.symbols
    }

    /// Sum of -log2 p over the encoded symbols, under the integer models.
    pub fn ideal_bits(&self) -> f64 {
        self.ideal_bits
    }

    /// Bytes committed so far, including cached and carry-pending ones.
    pub fn bytes_committed(&self) -> u64 {
        self.out.len() as u64 + self.pending + self.cache.is_some() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeError {
    /// The prefix ends before the next symbol is determined. Recoverable.
    Truncated {
        symbols: u64,
    },
    Contract(String),
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecodeError::Truncated { symbols } => {
                write!(f, "payload truncated after {symbols} symbols")
            }
            DecodeError::Contract(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<DecodeError> for Error {
    fn from(e: DecodeError) -> Self {
        Error::Coder(e.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct Decoder<'a> {
    data: &'a [u8],
    // index of the next byte to shift in; may run past the end
    pos: usize,
    lo: u64,
    hi: u64,
    range: u64,
    symbols: u64,
    truncated: bool,
}

impl<'a> Decoder<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        let mut d = Decoder {
            data,
            pos: 0,
            lo: 0,
            hi: 0,
            range: u64::MAX,
            symbols: 0,
            truncated: false,
        };
        for _ in 0..8 {
            d.shift_in();
        }
        d.hi = d.hi.min(d.range - 1);
        d
    }

    fn shift_in(&mut self) {
        let (a, b) = match self.data.get(self.pos) {
            Some(&byte) => (byte, byte),
            None => (0x00, 0xFF),
        };
        self.lo = (self.lo << 8) | a as u64;
        self.hi = (self.hi << 8) | b as u64;
        self.pos += 1;
    }

    fn select(code: u64, r: u64, m: &TritMasses) -> usize {
        let mut cum = 0u64;
        let mut chosen = 0;
        for (d, &f) in m.freqs.iter().enumerate() {
            if f == 0 {
                continue;
            }
            if r * cum <= code {
                chosen = d;
            } else {
                break;
            }
            cum += f as u64;
        }
        chosen
    }

    pub fn decode(&mut self, masses: &TritMasses) -> Result<u8, DecodeError> {
        if self.truncated {
            return Err(DecodeError::Truncated {
                symbols: self.symbols,
            });
        }
        validate(None, masses).map_err(|e| DecodeError::Contract(e.to_string()))?;
        let r = self.range / masses.total as u64;
        let d = Self::select(self.lo, r, masses);
        if Self::select(self.hi, r, masses) != d {
            self.truncated = true;
            return Err(DecodeError::Truncated {
                symbols: self.symbols,
            });
        }
        let cum: u32 = masses.freqs[..d].iter().sum();
        let base = r * cum as u64;
        let range = if owns_remainder(masses, d) {
            self.range - base
        } else {
            r * masses.freqs[d] as u64
        };
        self.lo -= base;
        self.hi = (self.hi - base).min(range - 1);
        self.range = range;
        while self.range < RANGE_BOTTOM {
            self.range <<= 8;
            self.shift_in();
        }
        self.symbols += 1;
        Ok(d as u8)
    }

    pub fn symbols(&self) -> u64 {
        self.symbols
    }

    /// Bytes of the input actually read.
    pub fn bytes_consumed(&self) -> usize {
        self.pos.min(self.data.len())
    }

    /// Length of a byte prefix that is guaranteed to decode every symbol
    /// decoded so far. Exact up to the conservative check that the prefix's
    /// continuation interval lies inside the current coding interval.
    pub fn sufficient_prefix(&self) -> usize {
        let avail = self.pos.min(self.data.len());
        let mut best = avail;
        let mut tail: u128 = 0;
        let mut p = avail;
        while p > 0 {
            let cand = p - 1;
            let shift = self.pos - cand;
            if shift > 8 {
                break;
            }
            tail += (self.data[cand] as u128) << (8 * (shift - 1));
            let lo = self.lo as i128 - tail as i128;
            let hi = lo + (1i128 << (8 * shift)) - 1;
            if lo < 0 || hi >= self.range as i128 {
                break;
            }
            best = cand;
            p = cand;
        }
        best
    }
}
