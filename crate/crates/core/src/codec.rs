//! Progressive encode/decode and the `PICM` container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "PICM" | version u8 | H' W' C u32 | strategy u8 | seed u64
//! | sigma_lo sigma_hi mean_lo mean_hi f32
//! | sigma codes u16 x S | mean codes u16 x S
//! | [group count u32 | group ranks u32 x n]   (oracle strategies only)
//! | cut count u32 | cut offsets u64 x n
//! | payload
//! ```
//!
//! Scales travel as 16-bit codes of log-scale, means as 16-bit uniform codes.
//! These side fields stand in for a hyperprior stream and count towards the
//! rate. Plane lengths and PMFs are derived from the dequantized scales on
//! both sides, so encoder and decoder always share the model.
//!
//! The cut table holds one absolute byte offset per plane end followed by `K`
//! checkpoints spread uniformly over the payload's symbol count. Each offset
//! is a stream prefix length that decodes every symbol up to that point. The
//! table is advisory: any prefix at least as long as the header decodes.

use crate::error::{Error, Result};
use crate::gaussian::{build_pmfs, plane_length, BinPmf, TritMasses, MAX_PLANE_LENGTH};
use crate::priority::{order_plane, permutation_hash, OrderContext, PlaneOrder, Strategy};
use crate::rangecoder::{DecodeError, Decoder, Encoder};
use crate::tensor::{Dims, FlatIndex, LatentGrid, SCALE_FLOOR};
use crate::trit::{PlaneLayout, TritPlaneStack};

pub const STREAM_MAGIC: [u8; 4] = *b"PICM";
pub const STREAM_VERSION: u8 = 1;
pub const DEFAULT_CHECKPOINTS: u32 = 16;
const CODE_MAX: f64 = u16::MAX as f64;

// ---------------------------------------------------------------------------
// side fields

/// Scale quantizer: uniform in log-scale over `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleQuantizer {
    pub lo: f32,
    pub hi: f32,
}

impl ScaleQuantizer {
    pub fn fit(scales: &[f32]) -> Self {
        let hi = scales.iter().copied().fold(SCALE_FLOOR as f32, f32::max);
        ScaleQuantizer {
            lo: SCALE_FLOOR as f32,
            hi,
        }
    }

    fn log_bounds(&self) -> (f64, f64) {
        (libm::log(self.lo as f64), libm::log(self.hi as f64))
    }

    pub fn encode(&self, scale: f32) -> u16 {
        let (a, b) = self.log_bounds();
        if b <= a {
            return 0;
        }
        let t = (libm::log(scale.max(self.lo) as f64) - a) / (b - a);
        (t.clamp(0.0, 1.0) * CODE_MAX).round() as u16
    }

    pub fn decode(&self, code: u16) -> f64 {
        let (a, b) = self.log_bounds();
        if b <= a {
            return (self.lo as f64).max(SCALE_FLOOR);
        }
        libm::exp(a + code as f64 * ((b - a) / CODE_MAX)).max(SCALE_FLOOR)
    }
}

/// Mean quantizer: uniform over `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanQuantizer {
    pub lo: f32,
    pub hi: f32,
}

impl MeanQuantizer {
    pub fn fit(means: &[f32]) -> Self {
        let m = means.iter().fold(0f32, |a, &v| a.max(v.abs()));
        MeanQuantizer { lo: -m, hi: m }
    }

    pub fn encode(&self, mean: f32) -> u16 {
        let (a, b) = (self.lo as f64, self.hi as f64);
        if b <= a {
            return 0;
        }
        (((mean as f64 - a) / (b - a)).clamp(0.0, 1.0) * CODE_MAX).round() as u16
    }

    pub fn decode(&self, code: u16) -> f64 {
        let (a, b) = (self.lo as f64, self.hi as f64);
        if b <= a {
            return a;
        }
        a + code as f64 * ((b - a) / CODE_MAX)
    }
}

// ---------------------------------------------------------------------------
// header

#[derive(Debug, Clone, PartialEq)]
pub struct StreamHeader {
    pub dims: Dims,
    pub strategy: Strategy,
    pub seed: u64,
    pub scale_q: ScaleQuantizer,
    pub mean_q: MeanQuantizer,
    pub scale_codes: Vec<u16>,
    pub mean_codes: Vec<u16>,
    pub group_ranks: Option<Vec<u32>>,
    /// Absolute stream offsets at each plane end.
    pub plane_ends: Vec<u64>,
    /// Absolute stream offsets at the uniform checkpoints.
    pub checkpoints: Vec<u64>,
}

impl StreamHeader {
    pub fn scales(&self) -> Vec<f64> {
        self.scale_codes
            .iter()
            .map(|&c| self.scale_q.decode(c))
            .collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.mean_codes
            .iter()
            .map(|&c| self.mean_q.decode(c))
            .collect()
    }

    /// Serialized size, which is also the payload's start offset.
    pub fn byte_len(&self) -> usize {
        let s = self.dims.len();
        let ranks = self.group_ranks.as_ref().map_or(0, |r| 4 + 4 * r.len());
        4 + 1
            + 12
            + 1
            + 8
            + 16
            + 4 * s
            + ranks
            + 4
            + 8 * (self.plane_ends.len() + self.checkpoints.len())
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&STREAM_MAGIC);
        out.push(STREAM_VERSION);
        for d in [self.dims.height, self.dims.width, self.dims.channels] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.push(self.strategy.tag());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for b in [
            self.scale_q.lo,
            self.scale_q.hi,
            self.mean_q.lo,
            self.mean_q.hi,
        ] {
            out.extend_from_slice(&b.to_le_bytes());
        }
        for &c in self.scale_codes.iter().chain(&self.mean_codes) {
            out.extend_from_slice(&c.to_le_bytes());
        }
        if let Some(r) = &self.group_ranks {
            out.extend_from_slice(&(r.len() as u32).to_le_bytes());
            for &x in r {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let n = self.plane_ends.len() + self.checkpoints.len();
        out.extend_from_slice(&(n as u32).to_le_bytes());
        for &o in self.plane_ends.iter().chain(&self.checkpoints) {
            out.extend_from_slice(&o.to_le_bytes());
        }
    }

    /// Parses a header from the front of `bytes`.
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
        if magic != STREAM_MAGIC {
            return Err(Error::BadMagic {
                expected: STREAM_MAGIC,
                found: magic,
            });
        }
        let version = r.u8()?;
        if version != STREAM_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let (h, w, c) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
        let dims = Dims::new(h, w, c)?;
        let strategy = Strategy::from_tag(r.u8()?)?;
        let seed = r.u64()?;
        let b: Vec<f32> = (0..4).map(|_| r.f32()).collect::<Result<_>>()?;
        if b.iter().any(|x| !x.is_finite()) || b[0] <= 0.0 || b[0] > b[1] || b[2] > b[3] {
            return Err(Error::CorruptHeader(format!("bad quantizer bounds {b:?}")));
        }
        let s = dims.len();
        let scale_codes = (0..s).map(|_| r.u16()).collect::<Result<Vec<_>>>()?;
        let mean_codes = (0..s).map(|_| r.u16()).collect::<Result<Vec<_>>>()?;
        let group_ranks = match strategy.grouping() {
            None => None,
            Some(g) => {
                let n = r.u32()? as usize;
                if n != g.group_count(dims) {
                    return Err(Error::CorruptHeader(format!(
                        "{n} group ranks for {} groups",
                        g.group_count(dims)
                    )));
                }
                let ranks = (0..n).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
                check_ranks(&ranks).map_err(|e| Error::CorruptHeader(e.to_string()))?;
                Some(ranks)
            }
        };
        let header = StreamHeader {
            dims,
            strategy,
            seed,
            scale_q: ScaleQuantizer { lo: b[0], hi: b[1] },
            mean_q: MeanQuantizer { lo: b[2], hi: b[3] },
            scale_codes,
            mean_codes,
            group_ranks,
            plane_ends: Vec::new(),
            checkpoints: Vec::new(),
        };
        let l_max = header.layout()?.max_length() as usize;
        let n = r.u32()? as usize;
        if n < l_max {
            return Err(Error::CorruptHeader(format!(
                "cut table has {n} entries for {l_max} planes"
            )));
        }
        let cuts = (0..n).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        if cuts
            .windows(2)
            .enumerate()
            .any(|(i, w)| i + 1 != l_max && w[0] > w[1])
        {
            return Err(Error::CorruptHeader("cut offsets not monotone".into()));
        }
        Ok(StreamHeader {
            plane_ends: cuts[..l_max].to_vec(),
            checkpoints: cuts[l_max..].to_vec(),
            ..header
        })
    }

    /// Plane layout from the dequantized scales; rejects scales whose plane
    /// length exceeds the supported maximum.
    pub fn layout(&self) -> Result<PlaneLayout> {
        layout_for(&self.scales())
    }
}

fn layout_for(scales: &[f64]) -> Result<PlaneLayout> {
    let lengths = scales
        .iter()
        .enumerate()
        .map(|(index, &s)| {
            let length = plane_length(s);
            if length > MAX_PLANE_LENGTH {
                Err(Error::ScaleTooLarge {
                    index,
                    scale: s,
                    length,
                    max: MAX_PLANE_LENGTH,
                })
            } else {
                Ok(length)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PlaneLayout::new(lengths))
}

fn check_ranks(ranks: &[u32]) -> Result<()> {
    let mut seen = vec![false; ranks.len()];
    for &r in ranks {
        match seen.get_mut(r as usize) {
            Some(s) if !*s => *s = true,
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "group ranks are not a permutation (rank {r})"
                )))
            }
        }
    }
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::TruncatedPayload {
                expected: end,
                found: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

// ---------------------------------------------------------------------------
// traversal shared by encoder and decoder

struct Walk<'a> {
    ctx: OrderContext<'a>,
    layout: &'a PlaneLayout,
    states: Vec<BinPmf>,
    known: Vec<u32>,
    orders: Vec<PlaneOrder>,
    per_plane: Vec<u64>,
    symbols: u64,
}

impl<'a> Walk<'a> {
    fn new(ctx: OrderContext<'a>, layout: &'a PlaneLayout, pmfs: Vec<BinPmf>) -> Self {
        let n = layout.len();
        Walk {
            ctx,
            layout,
            states: pmfs,
            known: vec![0; n],
            orders: Vec::new(),
            per_plane: Vec::new(),
            symbols: 0,
        }
    }

    /// Visits every coded slot in transmission order. `step` gets the slot
    /// and its trit masses and returns the trit, or `None` to stop.
    /// Returns whether the whole stack was traversed.
    fn run<F>(&mut self, mut step: F) -> Result<bool>
    where
        F: FnMut(u32, FlatIndex, &TritMasses) -> Result<Option<u8>>,
    {
        for plane in 1..=self.layout.max_length() {
            let slots: Vec<FlatIndex> = self.layout.plane_iter(plane).collect();
            let order = order_plane(&self.ctx, plane, &slots, &self.states)?;
            let mut done = 0u64;
            for &i in &order.skipped {
                let d = self.states[i.0].trit_masses()?.certain().ok_or_else(|| {
                    Error::Invariant(format!("skipped slot {} has an uncertain trit", i.0))
                })?;
                self.apply(i, d)?;
                done += 1;
            }
            let coded = order.slots.clone();
            self.orders.push(order);
            self.per_plane.push(done);
            for i in coded {
                let masses = self.states[i.0].trit_masses()?;
                match step(plane, i, &masses)? {
                    Some(d) => {
                        self.apply(i, d)?;
                        self.symbols += 1;
                        *self.per_plane.last_mut().unwrap() += 1;
                    }
                    None => return Ok(false),
                }
            }
        }
        Ok(true)
    }

    fn apply(&mut self, i: FlatIndex, d: u8) -> Result<()> {
        self.states[i.0] = self.states[i.0].refine(d)?;
        self.known[i.0] += 1;
        Ok(())
    }

    fn reconstruction(&self) -> Vec<f64> {
        self.states.iter().map(|p| p.conditional_mean()).collect()
    }

    fn hash(&self) -> u64 {
        permutation_hash(self.orders.iter())
    }
}

// ---------------------------------------------------------------------------
// encoding

#[derive(Debug, Clone)]
pub struct EncodeOptions {
    pub strategy: Strategy,
    pub seed: u64,
    /// Uniform checkpoints in the cut table.
    pub checkpoints: u32,
    /// Clamp out-of-range coefficients instead of failing.
    pub clamp: bool,
    /// Group ranks for the oracle strategies; written to the header.
    pub group_ranks: Option<Vec<u32>>,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions {
            strategy: Strategy::ExpectedVariance,
            seed: 0,
            checkpoints: DEFAULT_CHECKPOINTS,
            clamp: false,
            group_ranks: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodeSummary {
    pub header_bytes: usize,
    pub payload_bytes: usize,
    pub total_bytes: usize,
    pub symbols: u64,
    /// Sum of -log2 p over coded trits under the integer models.
    pub ideal_bits: f64,
    /// Sum over coefficients of the real-valued Gaussian bit estimate.
    pub estimated_bits: f64,
    /// Squared error between the centered input and its quantization.
    pub quantization_sse: f64,
    pub permutation_hash: u64,
    pub pixels: u64,
}

impl EncodeSummary {
    pub fn bpp(&self) -> f64 {
        self.total_bytes as f64 * 8.0 / self.pixels as f64
    }
}

/// A complete encoded stream with its parsed header.
#[derive(Debug, Clone)]
pub struct ProgressiveBitstream {
    header: StreamHeader,
    bytes: Vec<u8>,
}

impl ProgressiveBitstream {
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self> {
        let header = StreamHeader::parse(&bytes)?;
        Ok(ProgressiveBitstream { header, bytes })
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn header_len(&self) -> usize {
        self.header.byte_len()
    }

    pub fn decode(&self, budget: Budget) -> Result<Decoded> {
        decode(&self.bytes, budget)
    }
}

/// Encodes a grid of centered latents. Values are rounded first, so an
/// already quantized grid passes through unchanged.
pub fn encode(
    grid: &LatentGrid,
    opts: &EncodeOptions,
) -> Result<(ProgressiveBitstream, EncodeSummary)> {
    let dims = grid.dims();
    let q = grid.quantize()?;
    let scale_q = ScaleQuantizer::fit(grid.scales());
    let mean_q = MeanQuantizer::fit(grid.means());
    let scale_codes: Vec<u16> = grid.scales().iter().map(|&s| scale_q.encode(s)).collect();
    let mean_codes: Vec<u16> = grid.means().iter().map(|&m| mean_q.encode(m)).collect();
    let scales: Vec<f64> = scale_codes.iter().map(|&c| scale_q.decode(c)).collect();
    let layout = layout_for(&scales)?;
    let stack = TritPlaneStack::from_layout(q.values(), layout.clone(), opts.clamp)?;
    let pmfs = build_pmfs(&scales)?;

    let group_ranks = match opts.strategy.grouping() {
        None => None,
        Some(g) => {
            let ranks = opts.group_ranks.clone().ok_or_else(|| {
                Error::InvalidArgument(format!("{} needs group ranks", opts.strategy))
            })?;
            if ranks.len() != g.group_count(dims) {
                return Err(Error::DimensionMismatch {
                    expected: g.group_count(dims),
                    got: ranks.len(),
                });
            }
            check_ranks(&ranks)?;
            Some(ranks)
        }
    };
    let ctx = OrderContext {
        strategy: opts.strategy,
        seed: opts.seed,
        dims,
        scales: &scales,
        group_ranks: group_ranks.as_deref(),
    };

    let l_max = layout.max_length() as usize;
    let mut header = StreamHeader {
        dims,
        strategy: opts.strategy,
        seed: opts.seed,
        scale_q,
        mean_q,
        scale_codes,
        mean_codes,
        group_ranks: group_ranks.clone(),
        plane_ends: vec![0; l_max],
        checkpoints: vec![0; opts.checkpoints as usize],
    };
    let header_len = header.byte_len();

    let mut enc = Encoder::new();
    let mut walk = Walk::new(ctx, &layout, pmfs.clone());
    walk.run(|plane, i, m| {
        let d = stack.digit(i.0, plane);
        enc.encode(d, m)?;
        Ok(Some(d))
    })?;
    let symbols = enc.symbols();
    let ideal_bits = enc.ideal_bits();
    let payload = enc.flush()?;
    let hash = walk.hash();

    // Replay the payload to find prefix lengths for the cut table.
    let per_plane = walk.per_plane.clone();
    let mut plane_targets = Vec::with_capacity(l_max);
    let mut acc = 0u64;
    for (p, order) in walk.orders.iter().enumerate() {
        acc += per_plane[p] - order.skipped.len() as u64;
        plane_targets.push(acc);
    }
    let k = opts.checkpoints as u64;
    let check_targets: Vec<u64> = (1..=k).map(|j| (j * symbols).div_ceil(k)).collect();
    let marks = prefix_marks(
        &ctx,
        &layout,
        pmfs,
        &payload,
        &plane_targets,
        &check_targets,
    )?;
    let total = (header_len + payload.len()) as u64;
    let absolute = |v: Vec<usize>| -> Vec<u64> {
        let mut run = header_len as u64;
        let mut out: Vec<u64> = v
            .into_iter()
            .map(|o| {
                run = run.max((header_len + o) as u64);
                run
            })
            .collect();
        if let Some(last) = out.last_mut() {
            *last = total;
        }
        out
    };
    header.plane_ends = absolute(marks.0);
    header.checkpoints = absolute(marks.1);

    let mut bytes = Vec::with_capacity(total as usize);
    header.write(&mut bytes);
    debug_assert_eq!(bytes.len(), header_len);
    bytes.extend_from_slice(&payload);

    let estimated_bits = (0..dims.len())
        .map(|c| crate::gaussian::bit_estimate(stack.value(c), scales[c]))
        .sum();
    let quantization_sse = grid
        .values()
        .iter()
        .zip(q.values())
        .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
        .sum();
    let summary = EncodeSummary {
        header_bytes: header_len,
        payload_bytes: payload.len(),
        total_bytes: bytes.len(),
        symbols,
        ideal_bits,
        estimated_bits,
        quantization_sse,
        permutation_hash: hash,
        pixels: dims.nominal_pixels(),
    };
    Ok((ProgressiveBitstream { header, bytes }, summary))
}

/// Payload prefix lengths after the given symbol counts.
fn prefix_marks(
    ctx: &OrderContext<'_>,
    layout: &PlaneLayout,
    pmfs: Vec<BinPmf>,
    payload: &[u8],
    plane_targets: &[u64],
    check_targets: &[u64],
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut dec = Decoder::new(payload);
    let mut planes = vec![0usize; plane_targets.len()];
    let mut checks = vec![0usize; check_targets.len()];
    let (mut pi, mut ci) = (0, 0);
    while pi < plane_targets.len() && plane_targets[pi] == 0 {
        pi += 1;
    }
    while ci < check_targets.len() && check_targets[ci] == 0 {
        ci += 1;
    }
    let mut walk = Walk::new(*ctx, layout, pmfs);
    walk.run(|_, _, m| {
        let d = dec.decode(m).map_err(Error::from)?;
        let n = dec.symbols();
        let prefix = dec.sufficient_prefix();
        while pi < plane_targets.len() && plane_targets[pi] <= n {
            planes[pi] = prefix;
            pi += 1;
        }
        while ci < check_targets.len() && check_targets[ci] <= n {
            checks[ci] = prefix;
            ci += 1;
        }
        Ok(Some(d))
    })?;
    Ok((planes, checks))
}

// ---------------------------------------------------------------------------
// decoding

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    /// Total stream bytes, header included.
    Bytes(u64),
    /// Checkpoint `k` of the cut table; 0 means header only.
    Level(u32),
    /// End of plane `p` (1-based); 0 means header only.
    Plane(u32),
    Full,
}

impl std::str::FromStr for Budget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::InvalidArgument(format!(
                "bad budget {s:?}; expected bytes:N, level:K, plane:P or full"
            ))
        };
        if s == "full" {
            return Ok(Budget::Full);
        }
        let (kind, n) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "bytes" => n.parse().map(Budget::Bytes).map_err(|_| bad()),
            "level" => n.parse().map(Budget::Level).map_err(|_| bad()),
            "plane" => n.parse().map(Budget::Plane).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeReport {
    pub symbols: u64,
    /// Stream bytes read, header included.
    pub bytes_consumed: usize,
    /// Budget in bytes after resolving levels.
    pub budget_bytes: usize,
    /// Trits resolved per plane (coded and free), with the plane's size.
    pub plane_completion: Vec<(u64, u64)>,
    /// Leading trits known per coefficient.
    pub known: Vec<u32>,
    pub complete: bool,
    /// Hash of the plane orders entered so far.
    pub permutation_hash: u64,
}

impl DecodeReport {
    /// Whether coefficient `c` has all its trits.
    pub fn fully_decoded(&self, c: usize, lengths: &[u32]) -> bool {
        self.known[c] == lengths[c]
    }
}

#[derive(Debug, Clone)]
pub struct Decoded {
    pub header: StreamHeader,
    /// Centered reconstruction: exact where fully decoded, conditional means
    /// elsewhere.
    pub centered: Vec<f64>,
    /// `centered` plus the dequantized means.
    pub latent: Vec<f64>,
    pub lengths: Vec<u32>,
    pub report: DecodeReport,
}

impl Decoded {
    pub fn mse_against(&self, centered_truth: &[f32]) -> f64 {
        let sse: f64 = self
            .centered
            .iter()
            .zip(centered_truth)
            .map(|(&a, &b)| (a - b as f64).powi(2))
            .sum();
        sse / self.centered.len() as f64
    }
}

/// Resolves a budget to a stream length in bytes.
pub fn budget_bytes(header: &StreamHeader, budget: Budget, stream_len: usize) -> Result<usize> {
    let header_len = header.byte_len();
    let pick = |table: &[u64], k: u32, what: &str| -> Result<usize> {
        match k {
            0 => Ok(header_len),
            k if k as usize <= table.len() => Ok(table[k as usize - 1] as usize),
            k => Err(Error::InvalidArgument(format!(
                "{what} {k} out of range 0..={}",
                table.len()
            ))),
        }
    };
    let n = match budget {
        Budget::Full => stream_len,
        Budget::Bytes(n) => usize::try_from(n).unwrap_or(usize::MAX),
        Budget::Level(k) => pick(&header.checkpoints, k, "level")?,
        Budget::Plane(p) => pick(&header.plane_ends, p, "plane")?,
    };
    if n < header_len {
        return Err(Error::BudgetTooSmall {
            budget: n,
            required: header_len,
        });
    }
    Ok(n.min(stream_len))
}

/// Decodes the prefix of `bytes` allowed by `budget`. Never reads past it.
pub fn decode(bytes: &[u8], budget: Budget) -> Result<Decoded> {
    let header = StreamHeader::parse(bytes)?;
    let header_len = header.byte_len();
    let limit = budget_bytes(&header, budget, bytes.len())?;
    let payload = &bytes[header_len..limit];
    let scales = header.scales();
    let means = header.means();
    let layout = header.layout()?;
    let pmfs = build_pmfs(&scales)?;
    let ctx = OrderContext {
        strategy: header.strategy,
        seed: header.seed,
        dims: header.dims,
        scales: &scales,
        group_ranks: header.group_ranks.as_deref(),
    };
    let mut dec = Decoder::new(payload);
    let mut walk = Walk::new(ctx, &layout, pmfs);
    let complete = walk.run(|_, _, m| match dec.decode(m) {
        Ok(d) => Ok(Some(d)),
        Err(DecodeError::Truncated { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    })?;
    let centered = walk.reconstruction();
    let latent = centered.iter().zip(&means).map(|(c, m)| c + m).collect();
    let plane_completion = walk
        .per_plane
        .iter()
        .enumerate()
        .map(|(p, &n)| (n, layout.plane_iter(p as u32 + 1).count() as u64))
        .chain(
            (walk.per_plane.len() as u32 + 1..=layout.max_length())
                .map(|p| (0, layout.plane_iter(p).count() as u64)),
        )
        .collect();
    let report = DecodeReport {
        symbols: walk.symbols,
        bytes_consumed: header_len + dec.bytes_consumed(),
        budget_bytes: limit,
        plane_completion,
        known: walk.known.clone(),
        complete,
        permutation_hash: walk.hash(),
    };
    Ok(Decoded {
        lengths: layout.lengths().to_vec(),
        header,
        centered,
        latent,
        report,
    })
}

// ---------------------------------------------------------------------------
// rate accounting

#[derive(Debug, Clone, PartialEq)]
pub struct RatePoint {
    /// Plane number or checkpoint number, 1-based.
    pub index: u32,
    /// Absolute stream offset.
    pub offset: u64,
    /// Payload bits added since the previous point.
    pub bits: u64,
    /// Total stream bits at `offset` over nominal pixels.
    pub cumulative_bpp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub header_bytes: u64,
    pub payload_bytes: u64,
    pub total_bytes: u64,
    pub pixels: u64,
    pub planes: Vec<RatePoint>,
    pub checkpoints: Vec<RatePoint>,
}

impl RateReport {
    pub fn bpp(&self) -> f64 {
        self.total_bytes as f64 * 8.0 / self.pixels as f64
    }
}

pub fn rate_report(stream: &ProgressiveBitstream) -> RateReport {
    let h = stream.header();
    let header_bytes = stream.header_len() as u64;
    let pixels = h.dims.nominal_pixels();
    let points = |offsets: &[u64]| -> Vec<RatePoint> {
        let mut prev = header_bytes;
        offsets
            .iter()
            .enumerate()
            .map(|(i, &o)| {
                let p = RatePoint {
                    index: i as u32 + 1,
                    offset: o,
                    bits: (o - prev) * 8,
                    cumulative_bpp: o as f64 * 8.0 / pixels as f64,
                };
                prev = o;
                p
            })
            .collect()
    };
    RateReport {
        header_bytes,
        payload_bytes: stream.len() as u64 - header_bytes,
        total_bytes: stream.len() as u64,
        pixels,
        planes: points(&h.plane_ends),
        checkpoints: points(&h.checkpoints),
    }
}
