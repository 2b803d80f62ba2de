//! Plug-in transfer entropy between binary series.
//!
//! TE from a source series J into a target series I with history orders
//! (k, l) is estimated from empirical frequencies of the joint states
//! (i_{t+1}, i_t^(k), j_t^(l)):
//!
//!   TE = sum p(i_{t+1}, ik, jl) * log2[ p(i_{t+1} | ik, jl) / p(i_{t+1} | ik) ]
//!
//! in bits, with zero-count states contributing nothing. Histories pack the
//! most recent bit into the lowest position. All summation runs in ascending
//! (next, ik, jl) state order so results are reproducible bit for bit, and the
//! log argument is formed from exact integer count products, which makes the
//! estimate exactly 0.0 (not merely tiny) for constant sources and for targets
//! that are a deterministic function of their own history.

use std::collections::BTreeMap;

use crate::capture::BinaryMatrix;
use crate::error::{Error, Result};

/// (next target bit, target history, source history)
pub type StateTriple = (u8, u64, u64);

/// A validated 0/1 series with at least two steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinarySeries {
    bits: Vec<u8>,
}

impl BinarySeries {
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if bits.len() < 2 {
            return Err(Error::SeriesTooShort {
                len: bits.len(),
                order: 1,
            });
        }
        for (index, &value) in bits.iter().enumerate() {
            if value > 1 {
                return Err(Error::NotBinary { value, index });
            }
        }
        Ok(BinarySeries { bits })
    }

    pub fn from_bools(bools: &[bool]) -> Result<Self> {
        Self::from_bits(bools.iter().map(|&b| b as u8).collect())
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length >= 2 by construction
    }

    pub fn as_bits(&self) -> &[u8] {
        &self.bits
    }
}

/// History orders (k for the target, l for the source), both at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HistoryOrder {
    k: usize,
    l: usize,
}

impl HistoryOrder {
    pub fn new(k: usize, l: usize) -> Result<Self> {
        if k == 0 || l == 0 {
            return Err(Error::ZeroHistoryOrder { k, l });
        }
        Ok(HistoryOrder { k, l })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn max(&self) -> usize {
        self.k.max(self.l)
    }
}

impl Default for HistoryOrder {
    fn default() -> Self {
        HistoryOrder { k: 1, l: 1 }
    }
}

/// Joint state tallies for one (target, source) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointCounts {
    counts: BTreeMap<StateTriple, u64>,
    total: u64,
}

impl JointCounts {
    pub fn counts(&self) -> &BTreeMap<StateTriple, u64> {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Transfer entropy from these tallies, in bits.
    pub fn transfer_entropy(&self) -> TeResult {
        let mut c_ik: BTreeMap<u64, u64> = BTreeMap::new();
        let mut c_ikjl: BTreeMap<(u64, u64), u64> = BTreeMap::new();
        let mut c_nik: BTreeMap<(u8, u64), u64> = BTreeMap::new();
        for (&(next, ik, jl), &c) in &self.counts {
            *c_ik.entry(ik).or_insert(0) += c;
            *c_ikjl.entry((ik, jl)).or_insert(0) += c;
            *c_nik.entry((next, ik)).or_insert(0) += c;
        }
        let mut value = 0.0;
        for (&(next, ik, jl), &c) in &self.counts {
            value += te_term(
                c,
                c_ik[&ik],
                c_ikjl[&(ik, jl)],
                c_nik[&(next, ik)],
                self.total,
            );
        }
        TeResult {
            value,
            samples_used: self.total as usize,
        }
    }
}

/// One TE estimate plus the number of transitions it was scored on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeResult {
    pub value: f64,
    pub samples_used: usize,
}

#[inline]
fn te_term(c: u64, c_ik: u64, c_ikjl: u64, c_nik: u64, total: u64) -> f64 {
    // log2[(c/c_ikjl) / (c_nik/c_ik)] over exact integer products: when the
    // two conditionals agree as rationals the ratio is exactly 1.0 and the
    // term contributes an exact zero.
    let num = c as u128 * c_ik as u128;
    let den = c_ikjl as u128 * c_nik as u128;
    (c as f64 / total as f64) * (num as f64 / den as f64).log2()
}

fn validate_pair(target: &[u8], source: &[u8], order: HistoryOrder) -> Result<()> {
    if target.len() != source.len() {
        return Err(Error::LengthMismatch {
            target_len: target.len(),
            source_len: source.len(),
        });
    }
    if target.len() <= order.max() {
        return Err(Error::SeriesTooShort {
            len: target.len(),
            order: order.max(),
        });
    }
    Ok(())
}

/// Walks both series once, yielding (next, ik, jl) per scored transition.
/// Histories are rolled forward with shift-and-mask updates.
fn for_each_state(target: &[u8], source: &[u8], order: HistoryOrder, mut f: impl FnMut(u8, u64, u64)) {
    let (k, l) = (order.k, order.l);
    let m = order.max();
    let n = target.len();
    let k_mask = (1u64 << k) - 1;
    let l_mask = (1u64 << l) - 1;
    let mut ik = 0u64;
    for i in 0..k {
        ik |= (target[m - 1 - i] as u64) << i;
    }
    let mut jl = 0u64;
    for i in 0..l {
        jl |= (source[m - 1 - i] as u64) << i;
    }
    for t in (m - 1)..(n - 1) {
        let next = target[t + 1];
        f(next, ik, jl);
        ik = ((ik << 1) | target[t + 1] as u64) & k_mask;
        jl = ((jl << 1) | source[t + 1] as u64) & l_mask;
    }
}

/// Tally joint states over all scorable transitions. The total is
/// n - max(k, l).
pub fn count_joint(
    target: &BinarySeries,
    source: &BinarySeries,
    order: HistoryOrder,
) -> Result<JointCounts> {
    count_joint_bits(target.as_bits(), source.as_bits(), order)
}

fn count_joint_bits(target: &[u8], source: &[u8], order: HistoryOrder) -> Result<JointCounts> {
    validate_pair(target, source, order)?;
    let mut counts: BTreeMap<StateTriple, u64> = BTreeMap::new();
    let mut total = 0u64;
    for_each_state(target, source, order, |next, ik, jl| {
        *counts.entry((next, ik, jl)).or_insert(0) += 1;
        total += 1;
    });
    Ok(JointCounts { counts, total })
}

/// Plug-in transfer entropy source -> target in bits.
pub fn transfer_entropy(
    target: &BinarySeries,
    source: &BinarySeries,
    order: HistoryOrder,
) -> Result<TeResult> {
    te_bits(target.as_bits(), source.as_bits(), order)
}

// State spaces up to 2^16 go through flat tables; anything wider falls back
// to the map-based route. Both iterate states in the same ascending order and
// share te_term, so they agree bit for bit.
const DENSE_STATE_BITS: usize = 16;

pub(crate) fn te_bits(target: &[u8], source: &[u8], order: HistoryOrder) -> Result<TeResult> {
    let (k, l) = (order.k, order.l);
    if 1 + k + l > DENSE_STATE_BITS {
        return Ok(count_joint_bits(target, source, order)?.transfer_entropy());
    }
    validate_pair(target, source, order)?;

    let kl = k + l;
    let mut counts = vec![0u64; 1 << (1 + kl)];
    let mut total = 0u64;
    for_each_state(target, source, order, |next, ik, jl| {
        counts[((next as usize) << kl) | ((ik as usize) << l) | jl as usize] += 1;
        total += 1;
    });

    let mut c_ik = vec![0u64; 1 << k];
    let mut c_ikjl = vec![0u64; 1 << kl];
    let mut c_nik = vec![0u64; 1 << (1 + k)];
    for next in 0..2usize {
        for ik in 0..1usize << k {
            for jl in 0..1usize << l {
                let c = counts[(next << kl) | (ik << l) | jl];
                c_ik[ik] += c;
                c_ikjl[(ik << l) | jl] += c;
                c_nik[(next << k) | ik] += c;
            }
        }
    }

    let mut value = 0.0;
    for next in 0..2usize {
        for ik in 0..1usize << k {
            for jl in 0..1usize << l {
                let c = counts[(next << kl) | (ik << l) | jl];
                if c == 0 {
                    continue;
                }
                value += te_term(c, c_ik[ik], c_ikjl[(ik << l) | jl], c_nik[(next << k) | ik], total);
            }
        }
    }
    Ok(TeResult {
        value,
        samples_used: total as usize,
    })
}

/// TE for every (source neuron, target neuron) pair between two layers, plus
/// the mean over all m*q pairs.
#[derive(Debug, Clone)]
pub struct LayerPairTe {
    /// Indexed [source neuron][target neuron].
    pub pair_values: Vec<Vec<TeResult>>,
    pub mean: f64,
}

fn layer_pair_validate(source: &BinaryMatrix, target: &BinaryMatrix) -> Result<()> {
    if source.neurons() == 0 {
        return Err(Error::EmptyLayer { side: "source" });
    }
    if target.neurons() == 0 {
        return Err(Error::EmptyLayer { side: "target" });
    }
    if source.steps() != target.steps() {
        return Err(Error::StepMismatch {
            source_steps: source.steps(),
            target_steps: target.steps(),
        });
    }
    Ok(())
}

fn layer_pair_assemble(flat: Vec<TeResult>, m: usize, q: usize) -> LayerPairTe {
    let mean = flat.iter().map(|r| r.value).sum::<f64>() / (m * q) as f64;
    let pair_values = flat.chunks(q).map(<[TeResult]>::to_vec).collect();
    LayerPairTe { pair_values, mean }
}

/// Sequential reference implementation. Always available; `layer_pair_te`
/// matches it bit for bit.
pub fn layer_pair_te_seq(
    source: &BinaryMatrix,
    target: &BinaryMatrix,
    order: HistoryOrder,
) -> Result<LayerPairTe> {
    layer_pair_validate(source, target)?;
    let (m, q) = (source.neurons(), target.neurons());
    let mut flat = Vec::with_capacity(m * q);
    for a in 0..m {
        for b in 0..q {
            flat.push(te_bits(target.row(b), source.row(a), order)?);
        }
    }
    Ok(layer_pair_assemble(flat, m, q))
}

#[cfg(feature = "parallel")]
pub fn layer_pair_te(
    source: &BinaryMatrix,
    target: &BinaryMatrix,
    order: HistoryOrder,
) -> Result<LayerPairTe> {
    use rayon::prelude::*;

    layer_pair_validate(source, target)?;
    let (m, q) = (source.neurons(), target.neurons());
    let flat = (0..m * q)
        .into_par_iter()
        .map(|i| te_bits(target.row(i % q), source.row(i / q), order))
        .collect::<Result<Vec<_>>>()?;
    Ok(layer_pair_assemble(flat, m, q))
}

#[cfg(not(feature = "parallel"))]
pub fn layer_pair_te(
    source: &BinaryMatrix,
    target: &BinaryMatrix,
    order: HistoryOrder,
) -> Result<LayerPairTe> {
    layer_pair_te_seq(source, target, order)
}
