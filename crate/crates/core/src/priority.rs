//! Intra-plane transmission order.
//!
//! Planes are always sent in global order; only the order of slots inside a
//! plane changes between strategies. Scores are computed once when a plane is
//! entered, from each slot's PMF refined through the planes already coded.
//! Slots are sorted by descending score with ties broken by ascending flat
//! index. Slots whose next trit has zero entropy are skipped: both sides know
//! the trit already.

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::{build_pmfs, BinPmf};
use crate::task::{log_prob, TaskOracle};
use crate::tensor::{Dims, FlatIndex, LatentGrid};
use crate::trit::TritPlaneStack;

/// Scores closer than this are ordered by flat index.
pub const SCORE_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    ExpectedVariance,
    Sigma,
    Random,
    OracleChannel,
    OraclePatch,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::ExpectedVariance,
        Strategy::Sigma,
        Strategy::Random,
        Strategy::OracleChannel,
        Strategy::OraclePatch,
    ];

    pub fn tag(self) -> u8 {
        match self {
            Strategy::ExpectedVariance => 0,
            Strategy::Sigma => 1,
            Strategy::Random => 2,
            Strategy::OracleChannel => 3,
            Strategy::OraclePatch => 4,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|s| s.tag() == tag)
            .ok_or_else(|| Error::CorruptHeader(format!("unknown strategy tag {tag}")))
    }

    /// Whether the decoder can rebuild the order without side information.
    pub fn decoder_accessible(self) -> bool {
        !matches!(self, Strategy::OracleChannel | Strategy::OraclePatch)
    }

    pub fn grouping(self) -> Option<Grouping> {
        match self {
            Strategy::OracleChannel => Some(Grouping::Channel),
            Strategy::OraclePatch => Some(Grouping::Patch),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::ExpectedVariance => "expvar",
            Strategy::Sigma => "sigma",
            Strategy::Random => "random",
            Strategy::OracleChannel => "oracle-channel",
            Strategy::OraclePatch => "oracle-patch",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    /// One group per channel: an H' x W' x 1 slice.
    Channel,
    /// One group per spatial position: a 1 x 1 x C column.
    Patch,
}

impl Grouping {
    pub fn group_count(self, dims: Dims) -> usize {
        match self {
            Grouping::Channel => dims.channels,
            Grouping::Patch => dims.height * dims.width,
        }
    }

    pub fn group_of(self, dims: Dims, index: FlatIndex) -> usize {
        match self {
            Grouping::Channel => index.0 % dims.channels,
            Grouping::Patch => index.0 / dims.channels,
        }
    }
}

/// Everything a plane ordering may depend on. All of it is available to the
/// decoder once the header and side fields are read.
#[derive(Debug, Clone, Copy)]
pub struct OrderContext<'a> {
    pub strategy: Strategy,
    pub seed: u64,
    pub dims: Dims,
    /// Dequantized scales.
    pub scales: &'a [f64],
    /// Rank of each group, for the oracle strategies.
    pub group_ranks: Option<&'a [u32]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneOrder {
    pub plane: u32,
    /// Coded slots in transmission order.
    pub slots: Vec<FlatIndex>,
    /// Score of each entry of `slots`.
    pub scores: Vec<f64>,
    /// Slots with a certain next trit, resolved without coding.
    pub skipped: Vec<FlatIndex>,
}

impl PlaneOrder {
    pub fn len(&self) -> usize {
        self.slots.len() + self.skipped.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Per-slot score with the state of that slot's PMF at plane entry. `None`
/// means the next trit carries no information.
pub fn slot_score(ctx: &OrderContext<'_>, index: FlatIndex, state: &BinPmf) -> Result<Option<f64>> {
    let masses = state.trit_masses()?;
    let entropy = masses.entropy();
    if entropy <= 0.0 {
        return Ok(None);
    }
    let score = match ctx.strategy {
        Strategy::ExpectedVariance => state.variance_drop() / entropy,
        Strategy::Sigma => ctx.scales[index.0] / entropy,
        Strategy::Random => unreachable!("random scores are drawn per plane"),
        Strategy::OracleChannel | Strategy::OraclePatch => {
            let ranks = ctx.group_ranks.ok_or_else(|| {
                Error::InvalidArgument(format!("{} order needs group ranks", ctx.strategy))
            })?;
            let g = ctx.strategy.grouping().unwrap().group_of(ctx.dims, index);
            -(ranks[g] as f64)
        }
    };
    Ok(Some(score))
}

fn plane_rng(seed: u64, plane: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(plane as u64);
    rng
}

fn tie_key(score: f64) -> f64 {
    (score / SCORE_TIE_TOLERANCE).round()
}

/// Orders the occupied `slots` of `plane` given every coefficient's current
/// PMF state.
pub fn order_plane(
    ctx: &OrderContext<'_>,
    plane: u32,
    slots: &[FlatIndex],
    states: &[BinPmf],
) -> Result<PlaneOrder> {
    let mut scored: Vec<(FlatIndex, Option<f64>)> = if ctx.strategy == Strategy::Random {
        let mut rng = plane_rng(ctx.seed, plane);
        slots
            .iter()
            .map(|&i| {
                let key = (rng.next_u64() >> 11) as f64;
                let informative = states[i.0].trit_masses()?.entropy() > 0.0;
                Ok((i, informative.then_some(key)))
            })
            .collect::<Result<_>>()?
    } else {
        slots
            .par_iter()
            .map(|&i| Ok((i, slot_score(ctx, i, &states[i.0])?)))
            .collect::<Result<_>>()?
    };
    let skipped = scored
        .iter()
        .filter(|(_, s)| s.is_none())
        .map(|(i, _)| *i)
        .collect();
    scored.retain(|(_, s)| s.is_some());
    let mut keyed: Vec<(f64, FlatIndex, f64)> = scored
        .into_iter()
        .map(|(i, s)| {
            let s = s.unwrap();
            (tie_key(s), i, s)
        })
        .collect();
    keyed.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(PlaneOrder {
        plane,
        slots: keyed.iter().map(|k| k.1).collect(),
        scores: keyed.iter().map(|k| k.2).collect(),
        skipped,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriorityOrder {
    pub strategy: Strategy,
    pub planes: Vec<PlaneOrder>,
    /// Set for oracle strategies: the group ranking must travel as side info.
    pub requires_side_info: bool,
}

impl PriorityOrder {
    pub fn permutation_hash(&self) -> u64 {
        permutation_hash(self.planes.iter())
    }
}

pub fn permutation_hash<'a>(planes: impl Iterator<Item = &'a PlaneOrder>) -> u64 {
    let mut h = DefaultHasher::new();
    for p in planes {
        p.plane.hash(&mut h);
        for s in &p.slots {
            s.0.hash(&mut h);
        }
        0xFFFF_FFFFusize.hash(&mut h);
        for s in &p.skipped {
            s.0.hash(&mut h);
        }
    }
    h.finish()
}

/// Full transmission order for a quantized grid, following each plane with
/// the true trits so later planes see the same states the decoder will.
pub fn build_order(
    ctx: &OrderContext<'_>,
    stack: &TritPlaneStack,
    pmfs: &[BinPmf],
) -> Result<PriorityOrder> {
    let layout = stack.layout();
    let mut states = pmfs.to_vec();
    let mut planes = Vec::with_capacity(layout.max_length() as usize);
    for plane in 1..=layout.max_length() {
        let slots: Vec<FlatIndex> = layout.plane_iter(plane).collect();
        let order = order_plane(ctx, plane, &slots, &states)?;
        for &i in &slots {
            states[i.0] = states[i.0].refine(stack.digit(i.0, plane))?;
        }
        planes.push(order);
    }
    Ok(PriorityOrder {
        strategy: ctx.strategy,
        planes,
        requires_side_info: !ctx.strategy.decoder_accessible(),
    })
}

/// Convenience wrapper: order for a quantized grid using its own scales.
/// Oracle strategies need `group_ranks`.
pub fn build_order_for_grid(
    strategy: Strategy,
    seed: u64,
    grid: &LatentGrid,
    group_ranks: Option<&[u32]>,
) -> Result<PriorityOrder> {
    let scales: Vec<f64> = grid.scales().iter().map(|&s| s as f64).collect();
    let stack = TritPlaneStack::decompose(grid, false)?;
    let pmfs = build_pmfs(&scales)?;
    let ctx = OrderContext {
        strategy,
        seed,
        dims: grid.dims(),
        scales: &scales,
        group_ranks,
    };
    build_order(&ctx, &stack, &pmfs)
}

/// Greedy group ranking for the oracle strategies.
///
/// Starts from the mean-only reconstruction (every coefficient at the
/// conditional mean of its full PMF) and repeatedly reveals the group whose
/// exact values most increase `confidence`. Returns each group's rank.
pub fn oracle_group_ranks<F>(
    grouping: Grouping,
    dims: Dims,
    exact: &[f64],
    pmfs: &[BinPmf],
    mut confidence: F,
) -> Result<Vec<u32>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n_groups = grouping.group_count(dims);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_groups];
    for c in 0..dims.len() {
        members[grouping.group_of(dims, FlatIndex(c))].push(c);
    }
    let mut recon: Vec<f64> = pmfs.iter().map(|p| p.conditional_mean()).collect();
    let mut remaining: Vec<usize> = (0..n_groups).collect();
    let mut ranks = vec![0u32; n_groups];
    let mut rank = 0;
    while !remaining.is_empty() {
        let mut best: Option<(usize, f64)> = None;
        for (pos, &g) in remaining.iter().enumerate() {
            let mut candidate = recon.clone();
            for &c in &members[g] {
                candidate[c] = exact[c];
            }
            let value = confidence(&candidate)?;
            if !value.is_finite() {
                return Err(Error::Oracle(format!(
                    "non-finite confidence for group {g}"
                )));
            }
            if best.is_none_or(|(_, b)| value > b) {
                best = Some((pos, value));
            }
        }
        let (pos, _) = best.unwrap();
        let g = remaining.remove(pos);
        for &c in &members[g] {
            recon[c] = exact[c];
        }
        ranks[g] = rank;
        rank += 1;
    }
    Ok(ranks)
}

/// Oracle group ranks driven by a classifier: the label is the classifier's
/// decision on the quantized grid (means included) and confidence is the log
/// probability of that label. Costs O(groups^2) classifier evaluations.
pub fn classifier_group_ranks(
    grouping: Grouping,
    grid: &LatentGrid,
    oracle: &dyn TaskOracle,
) -> Result<Vec<u32>> {
    let q = grid.quantize()?;
    let exact: Vec<f64> = q.values().iter().map(|&v| v as f64).collect();
    let means: Vec<f64> = q.means().iter().map(|&m| m as f64).collect();
    let scales: Vec<f64> = q.scales().iter().map(|&s| s as f64).collect();
    let pmfs = build_pmfs(&scales)?;
    let with_means = |r: &[f64]| -> Vec<f64> { r.iter().zip(&means).map(|(a, b)| a + b).collect() };
    let label = oracle.predict(&with_means(&exact))?;
    oracle_group_ranks(grouping, grid.dims(), &exact, &pmfs, |r| {
        let z = oracle
            .logits(&with_means(r))
            .map_err(|e| Error::Oracle(e.to_string()))?;
        Ok(log_prob(&z, label))
    })
}
