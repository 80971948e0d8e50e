//! Zero-mean Gaussian prior: CDF, plane lengths, integer bin PMFs, trit
//! conditionals, moments and bit-cost estimates.
//!
//! The normal tails come from `libm`'s `erfc`, a pure-Rust port of musl, so
//! encoder and decoder build bit-identical frequency tables on every target
//! regardless of the platform math library.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::tensor::SCALE_FLOOR;

/// Total of every quantized bin PMF.
pub const FREQ_TOTAL: u32 = 1 << 16;
/// Longest admissible plane length: 3^10 bins still fit FREQ_TOTAL with
/// every bin at frequency >= 1.
pub const MAX_PLANE_LENGTH: u32 = 10;
/// Returned by [`bit_estimate`] when the bin mass underflows.
pub const BIT_ESTIMATE_CAP: f64 = 64.0;
/// Two-sided tail probability left outside the coded range.
pub const TAIL_MASS: f64 = 1e-9;

/// Q(t) = 1 - Phi(t) for t >= 0.
fn upper_tail(t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    0.5 * libm::erfc(t * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal CDF.
pub fn std_cdf(x: f64) -> f64 {
    if x < 0.0 {
        upper_tail(-x)
    } else {
        1.0 - upper_tail(x)
    }
}

/// Phi(b) - Phi(a) for a <= b, computed from the tail nearer to the interval
/// so small masses keep their relative precision.
pub fn interval_mass(a: f64, b: f64) -> f64 {
    debug_assert!(a <= b);
    if a >= 0.0 {
        upper_tail(a) - upper_tail(b)
    } else if b <= 0.0 {
        upper_tail(-b) - upper_tail(-a)
    } else {
        1.0 - upper_tail(-a) - upper_tail(b)
    }
}

/// kappa = -Phi^{-1}(TAIL_MASS / 2), by bisection on [`std_cdf`].
pub fn kappa() -> f64 {
    static KAPPA: OnceLock<f64> = OnceLock::new();
    *KAPPA.get_or_init(|| {
        let target = TAIL_MASS / 2.0;
        let (mut lo, mut hi) = (-10.0_f64, 0.0_f64);
        while hi - lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if std_cdf(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        -0.5 * (lo + hi)
    })
}

/// Number of trits needed to cover the +/-kappa*scale range: the smallest
/// L >= 1 with 3^L >= 2*kappa*scale.
pub fn plane_length(scale: f64) -> u32 {
    let tail = 2.0 * kappa() * scale;
    let mut length = 1;
    let mut span = 3.0;
    while span < tail {
        length += 1;
        span *= 3.0;
    }
    length
}

pub fn pow3(length: u32) -> u32 {
    3u32.pow(length)
}

/// Index of the zero-valued bin in a 3^L-bin table.
pub fn bin_offset(length: u32) -> u32 {
    pow3(length) / 2
}

/// Integer frequency table of one quantized Gaussian, with prefix moments so
/// every sub-interval query is O(1). Shared by every coefficient with the
/// same (scale, length).
#[derive(Debug, PartialEq)]
pub struct PmfTable {
    length: u32,
    freqs: Vec<u32>,
    // prefix sums of f, f*k, f*k^2 with k the bin index
    m0: Vec<u64>,
    m1: Vec<u64>,
    m2: Vec<u128>,
}

impl PmfTable {
    pub fn from_freqs(length: u32, freqs: Vec<u32>) -> Self {
        let n = freqs.len();
        debug_assert_eq!(n as u32, pow3(length));
        let mut m0 = Vec::with_capacity(n + 1);
        let mut m1 = Vec::with_capacity(n + 1);
        let mut m2 = Vec::with_capacity(n + 1);
        let (mut a, mut b, mut c) = (0u64, 0u64, 0u128);
        m0.push(0);
        m1.push(0);
        m2.push(0);
        for (k, &f) in freqs.iter().enumerate() {
            let k = k as u64;
            a += f as u64;
            b += f as u64 * k;
            c += f as u128 * (k * k) as u128;
            m0.push(a);
            m1.push(b);
            m2.push(c);
        }
        PmfTable {
            length,
            freqs,
            m0,
            m1,
            m2,
        }
    }

    pub fn length(&self) -> u32 {
        self.length
    }

    pub fn freqs(&self) -> &[u32] {
        &self.freqs
    }

    pub fn offset(&self) -> u32 {
        bin_offset(self.length)
    }

    fn moments(&self, lo: u32, hi: u32) -> Moments {
        let (lo, hi) = (lo as usize, hi as usize);
        Moments {
            s0: self.m0[hi] - self.m0[lo],
            s1: self.m1[hi] - self.m1[lo],
            s2: self.m2[hi] - self.m2[lo],
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Moments {
    s0: u64,
    s1: u64,
    s2: u128,
}

impl Moments {
    fn mean_index(&self) -> f64 {
        self.s1 as f64 / self.s0 as f64
    }

    fn variance(&self) -> f64 {
        let s0 = self.s0 as u128;
        let s1 = self.s1 as u128;
        // exact: s2*s0 >= s1^2 by Cauchy-Schwarz
        let num = self.s2 * s0 - s1 * s1;
        num as f64 / (s0 * s0) as f64
    }
}

/// A coefficient's bin PMF restricted to its current support `[lo, hi)`.
#[derive(Debug, Clone)]
pub struct BinPmf {
    table: Arc<PmfTable>,
    lo: u32,
    hi: u32,
}

impl BinPmf {
    pub fn new(table: Arc<PmfTable>) -> Self {
        let hi = table.freqs.len() as u32;
        BinPmf { table, lo: 0, hi }
    }

    pub fn table(&self) -> &Arc<PmfTable> {
        &self.table
    }

    pub fn length(&self) -> u32 {
        self.table.length
    }

    pub fn offset(&self) -> u32 {
        self.table.offset()
    }

    pub fn support(&self) -> (u32, u32) {
        (self.lo, self.hi)
    }

    pub fn width(&self) -> u32 {
        self.hi - self.lo
    }

    /// Trits already consumed by refinement.
    pub fn refined_planes(&self) -> u32 {
        let mut w = self.width();
        let mut remaining = 0;
        while w > 1 {
            w /= 3;
            remaining += 1;
        }
        self.length() - remaining
    }

    fn thirds(&self) -> Result<u32> {
        let w = self.width();
        if w < 3 || !is_pow3(w) {
            return Err(Error::Invariant(format!(
                "support width {w} is not a power of three >= 3"
            )));
        }
        Ok(w / 3)
    }

    /// Masses of the next trit: frequency sums over the three thirds of the
    /// support, with their total as the coding scale.
    pub fn trit_masses(&self) -> Result<TritMasses> {
        let third = self.thirds()?;
        let mut freqs = [0u32; 3];
        for (d, f) in freqs.iter_mut().enumerate() {
            let lo = self.lo + d as u32 * third;
            *f = self.table.moments(lo, lo + third).s0 as u32;
        }
        let total = freqs.iter().sum();
        Ok(TritMasses { freqs, total })
    }

    /// Narrows the support to third `trit`. Frequencies are not touched.
    pub fn refine(&self, trit: u8) -> Result<BinPmf> {
        if trit > 2 {
            return Err(Error::InvalidArgument(format!("trit {trit} not in 0..=2")));
        }
        let third = self.thirds()?;
        let lo = self.lo + trit as u32 * third;
        Ok(BinPmf {
            table: Arc::clone(&self.table),
            lo,
            hi: lo + third,
        })
    }

    /// E[value] over the support, in coefficient units.
    pub fn conditional_mean(&self) -> f64 {
        self.table.moments(self.lo, self.hi).mean_index() - self.offset() as f64
    }

    /// Var[value] over the support; exactly 0 for a single bin.
    pub fn conditional_variance(&self) -> f64 {
        self.table.moments(self.lo, self.hi).variance()
    }

    /// Expected variance removed by revealing the next trit, i.e. the
    /// between-thirds variance `sum_d P(d) (mu_d - mu)^2`. Zero for a single bin.
    pub fn variance_drop(&self) -> f64 {
        let Ok(third) = self.thirds() else {
            return 0.0;
        };
        let all = self.table.moments(self.lo, self.hi);
        let parts: Vec<Moments> = (0..3)
            .map(|d| {
                let lo = self.lo + d * third;
                self.table.moments(lo, lo + third)
            })
            .collect();
        // sum_d s1_d^2 / s0_d - s1^2 / s0 over a common denominator, exact in i128
        let s0 = all.s0 as i128;
        let nonzero: Vec<&Moments> = parts.iter().filter(|m| m.s0 > 0).collect();
        let prod: i128 = nonzero.iter().map(|m| m.s0 as i128).product();
        let mut num: i128 = 0;
        for m in &nonzero {
            let s1 = m.s1 as i128;
            num += s1 * s1 * (prod / m.s0 as i128) * s0;
        }
        let s1 = all.s1 as i128;
        num -= s1 * s1 * prod;
        let den = prod as f64 * (s0 * s0) as f64;
        (num.max(0) as f64) / den
    }
}

fn is_pow3(mut w: u32) -> bool {
    while w > 1 && w.is_multiple_of(3) {
        w /= 3;
    }
    w == 1
}

/// Integer frequencies of the three trit outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TritMasses {
    pub freqs: [u32; 3],
    pub total: u32,
}

impl TritMasses {
    pub fn prob(&self, trit: u8) -> f64 {
        self.freqs[trit as usize] as f64 / self.total as f64
    }

    /// Ideal code length of `trit` in bits.
    pub fn cost(&self, trit: u8) -> f64 {
        libm::log2(self.total as f64) - libm::log2(self.freqs[trit as usize] as f64)
    }

    /// Shannon entropy in bits. Zero when a single outcome holds all mass.
    pub fn entropy(&self) -> f64 {
        let t = self.total as f64;
        let weighted: f64 = self
            .freqs
            .iter()
            .filter(|&&f| f > 0)
            .map(|&f| f as f64 * libm::log2(f as f64))
            .sum();
        (libm::log2(t) - weighted / t).max(0.0)
    }

    /// The only possible outcome, when entropy is zero.
    pub fn certain(&self) -> Option<u8> {
        let mut nonzero = self.freqs.iter().enumerate().filter(|(_, &f)| f > 0);
        match (nonzero.next(), nonzero.next()) {
            (Some((d, _)), None) => Some(d as u8),
            _ => None,
        }
    }
}

/// Quantized PMF of N(0, scale^2) over the 3^L integer bins centred on the
/// middle bin. Bins get real masses from the CDF, are renormalized, then
/// quantized to FREQ_TOTAL with every bin >= 1 by largest remainder
/// (ties to the lower index).
pub fn build_table(scale: f64, length: u32) -> Result<PmfTable> {
    if length == 0 || length > MAX_PLANE_LENGTH {
        return Err(Error::InvalidArgument(format!(
            "plane length {length} outside 1..={MAX_PLANE_LENGTH}"
        )));
    }
    let masses = real_bin_masses(scale.max(SCALE_FLOOR), length);
    Ok(PmfTable::from_freqs(length, quantize_masses(&masses)))
}

pub fn build_pmf(scale: f64, length: u32) -> Result<BinPmf> {
    Ok(BinPmf::new(Arc::new(build_table(scale, length)?)))
}

/// One [`BinPmf`] per scale. Coefficients with bit-identical scales share a
/// table; distinct tables are built in parallel.
pub fn build_pmfs(scales: &[f64]) -> Result<Vec<BinPmf>> {
    use rayon::prelude::*;
    use std::collections::HashMap;

    let mut keys: Vec<u64> = scales.iter().map(|s| s.to_bits()).collect();
    keys.sort_unstable();
    keys.dedup();
    let tables: HashMap<u64, Arc<PmfTable>> = keys
        .par_iter()
        .map(|&k| {
            let scale = f64::from_bits(k);
            let length = plane_length(scale);
            build_table(scale, length).map(|t| (k, Arc::new(t)))
        })
        .collect::<Result<_>>()?;
    Ok(scales
        .iter()
        .map(|s| BinPmf::new(Arc::clone(&tables[&s.to_bits()])))
        .collect())
}

/// Unnormalized real bin masses over the 3^L bins.
pub fn real_bin_masses(scale: f64, length: u32) -> Vec<f64> {
    let n = pow3(length);
    let off = bin_offset(length) as f64;
    // (edge, Q(|edge|)); edges are symmetric about zero, so each tail is
    // evaluated once for the upper half and mirrored
    let mut edges: Vec<(f64, f64)> = (0..=n)
        .map(|j| ((j as f64 - 0.5 - off) / scale, 0.0))
        .collect();
    let n = n as usize;
    for j in n.div_ceil(2)..=n {
        let q = upper_tail(edges[j].0);
        edges[j].1 = q;
        edges[n - j].1 = q;
    }
    edges
        .windows(2)
        .map(|w| {
            let ((a, qa), (b, qb)) = (w[0], w[1]);
            if a >= 0.0 {
                qa - qb
            } else if b <= 0.0 {
                qb - qa
            } else {
                1.0 - qa - qb
            }
        })
        .collect()
}

fn quantize_masses(masses: &[f64]) -> Vec<u32> {
    let n = masses.len() as u32;
    debug_assert!(n <= FREQ_TOTAL);
    let spare = (FREQ_TOTAL - n) as f64;
    let sum: f64 = masses.iter().sum();
    let mut freqs = vec![1u32; masses.len()];
    let mut fracs = Vec::with_capacity(masses.len());
    let mut assigned = 0u32;
    for (k, &m) in masses.iter().enumerate() {
        let target = if sum > 0.0 { m / sum * spare } else { 0.0 };
        let whole = target.floor();
        freqs[k] += whole as u32;
        assigned += whole as u32;
        fracs.push((target - whole, k));
    }
    let left = (FREQ_TOTAL - n - assigned) as usize;
    // the `left` largest remainders, ties to the lower bin; only membership
    // matters, so a selection is enough
    if left > 0 {
        let cmp = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
        if left < fracs.len() {
            fracs.select_nth_unstable_by(left - 1, cmp);
        }
        for &(_, k) in &fracs[..left] {
            freqs[k] += 1;
        }
    }
    freqs
}

/// -log2 P(value - 1/2 <= y < value + 1/2) for y ~ N(0, scale^2), capped at
/// [`BIT_ESTIMATE_CAP`] when the mass underflows.
pub fn bit_estimate(value: i64, scale: f64) -> f64 {
    let s = scale.max(SCALE_FLOOR);
    let v = value as f64;
    let mass = interval_mass((v - 0.5) / s, (v + 0.5) / s);
    if mass <= 0.0 {
        return BIT_ESTIMATE_CAP;
    }
    (-libm::log2(mass)).clamp(0.0, BIT_ESTIMATE_CAP)
}
