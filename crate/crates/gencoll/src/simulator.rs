//! Per-link reliable-throughput evaluation under arbitrary time offsets.
//!
//! A packet sent by link `i` at slot `t` survives unless some interferer
//! `j in I(i)` has a transmission whose arrival interval at `i`'s receiver
//! overlaps the packet's by a positive amount: collision iff
//! `|(t + d_ii) - (m + d_ij)| < 1` for some slot `m` with `S(j, m mod L) = 1`.
//! Touching intervals (difference exactly one slot) do not collide.
//!
//! Only the differences `d_ij - d_ii` matter, and for each interferer the
//! collision pattern depends on just the integer part of that difference
//! modulo the period plus one bit saying whether a fractional misalignment
//! is present (a misaligned interferer smears each of its slots over two of
//! the receiver's). Worst-case sweeps therefore enumerate a finite space:
//! `L` choices per interferer in the slot-synchronized model, `2L` in the
//! unsynchronized one.

use rayon::prelude::*;

use crate::collision_graph::CollisionGraph;
use crate::protocol::{OffsetAssignment, ProtocolMatrix, DEFAULT_MAX_SPACE};
use crate::rational::{integer_mod, is_integer, rat, Rat};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimError {
    LinkMismatch {
        matrix_links: usize,
        graph_links: usize,
    },
    SpaceExceeded {
        required: u128,
        bound: u64,
    },
    FractionalOffset {
        receiver: usize,
        transmitter: usize,
    },
    MissingOffsetPair {
        receiver: usize,
        transmitter: usize,
    },
}

impl std::fmt::Display for SimError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SimError::LinkMismatch {
                matrix_links,
                graph_links,
            } => write!(
                f,
                "matrix has {matrix_links} rows but the profile has {graph_links} links"
            ),
            SimError::SpaceExceeded { required, bound } => write!(
                f,
                "sweep needs {required} offset combinations, above the bound of {bound}; \
                 raise the bound to proceed"
            ),
            SimError::FractionalOffset {
                receiver,
                transmitter,
            } => write!(
                f,
                "offset ({receiver},{transmitter}) is fractional; the slot-synchronized \
                 model needs integers"
            ),
            SimError::MissingOffsetPair {
                receiver,
                transmitter,
            } => write!(f, "missing offset for pair ({receiver},{transmitter})"),
        }
    }
}

impl std::error::Error for SimError {}

/// Exact per-link success rates, each in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThroughputVector(pub Vec<Rat>);

impl ThroughputVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Componentwise `self >= other`.
    pub fn dominates(&self, other: &ThroughputVector) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a >= b)
    }
}

impl std::ops::Deref for ThroughputVector {
    type Target = [Rat];

    fn deref(&self) -> &[Rat] {
        &self.0
    }
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    /// Cap on the total number of offset combinations across all receivers.
    pub max_space: u64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            max_space: DEFAULT_MAX_SPACE,
        }
    }
}

/// One receiver's minimizing offsets: `(transmitter, offset)` pairs over
/// `J(link)` in ascending transmitter order. Offsets are exact rationals;
/// fractional misalignment is witnessed by a half-slot representative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkWitness {
    pub link: usize,
    pub offsets: Vec<(usize, Rat)>,
}

impl LinkWitness {
    /// Expands the witness into a full assignment (zero everywhere else) so
    /// it can be fed back to the simulator.
    pub fn to_assignment(&self, graph: &CollisionGraph) -> OffsetAssignment {
        let mut d = OffsetAssignment::zero(graph);
        for (j, v) in &self.offsets {
            d.set(self.link, *j, v.clone()).expect("witness pair valid");
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepResult {
    pub worst_case: ThroughputVector,
    pub witnesses: Vec<LinkWitness>,
    pub offsets_examined: u64,
}

fn check_links(s: &ProtocolMatrix, graph: &CollisionGraph) -> Result<(), SimError> {
    if s.num_links() != graph.num_links() {
        return Err(SimError::LinkMismatch {
            matrix_links: s.num_links(),
            graph_links: graph.num_links(),
        });
    }
    Ok(())
}

fn integer_shift(
    d: &OffsetAssignment,
    receiver: usize,
    transmitter: usize,
    period: u64,
) -> Result<usize, SimError> {
    let v = d
        .get(receiver, transmitter)
        .ok_or(SimError::MissingOffsetPair {
            receiver: receiver + 1,
            transmitter: transmitter + 1,
        })?;
    if !is_integer(v) {
        return Err(SimError::FractionalOffset {
            receiver: receiver + 1,
            transmitter: transmitter + 1,
        });
    }
    Ok(integer_mod(v, period) as usize)
}

/// Success count for one receiver under integer shifts: slots where the
/// receiver's own delayed row is 1 and every interferer's delayed row is 0.
fn sync_success_count(
    s: &ProtocolMatrix,
    receiver: usize,
    own_shift: usize,
    interferers: &[usize],
    shifts: &[usize],
) -> u64 {
    let l = s.period();
    let own = s.row(receiver);
    let mut count = 0u64;
    'slots: for t in 0..l {
        if own[(t + l - own_shift) % l] == 0 {
            continue;
        }
        for (slot, &j) in interferers.iter().enumerate() {
            if s.row(j)[(t + l - shifts[slot]) % l] == 1 {
                continue 'slots;
            }
        }
        count += 1;
    }
    count
}

/// Per-interferer collision pattern after reduction: the integer part of the
/// relative offset modulo the period, and whether a fractional misalignment
/// makes the interferer cover two adjacent slots instead of one.
#[derive(Debug, Clone, Copy)]
struct ReducedOffset {
    delay: usize,
    misaligned: bool,
}

fn nonsync_success_count(
    s: &ProtocolMatrix,
    receiver: usize,
    interferers: &[usize],
    reduced: &[ReducedOffset],
) -> u64 {
    let l = s.period();
    let own = s.row(receiver);
    let mut count = 0u64;
    'slots: for t in 0..l {
        if own[t] == 0 {
            continue;
        }
        for (slot, &j) in interferers.iter().enumerate() {
            let row = s.row(j);
            let r = reduced[slot];
            if row[(t + l - r.delay) % l] == 1 {
                continue 'slots;
            }
            if r.misaligned && row[(t + 2 * l - r.delay - 1) % l] == 1 {
                continue 'slots;
            }
        }
        count += 1;
    }
    count
}

/// Throughput under the slot-synchronized model: all offsets integer.
pub fn sync_throughput(
    s: &ProtocolMatrix,
    graph: &CollisionGraph,
    offsets: &OffsetAssignment,
) -> Result<ThroughputVector, SimError> {
    check_links(s, graph)?;
    let l = s.period() as u64;
    let mut out = Vec::with_capacity(graph.num_links());
    for i in 0..graph.num_links() {
        let own_shift = integer_shift(offsets, i, i, l)?;
        let interferers: Vec<usize> = graph.collision_set(i).iter().copied().collect();
        let shifts = interferers
            .iter()
            .map(|&j| integer_shift(offsets, i, j, l))
            .collect::<Result<Vec<_>, _>>()?;
        let count = sync_success_count(s, i, own_shift, &interferers, &shifts);
        out.push(rat(count as i64, l as i64));
    }
    Ok(ThroughputVector(out))
}

/// Throughput under arbitrary rational offsets. Only the differences
/// `d_ij - d_ii` enter; each is split into an integer delay and a
/// misalignment flag, which captures the collision pattern exactly.
pub fn nonsync_throughput(
    s: &ProtocolMatrix,
    graph: &CollisionGraph,
    offsets: &OffsetAssignment,
) -> Result<ThroughputVector, SimError> {
    check_links(s, graph)?;
    let l = s.period() as u64;
    let mut out = Vec::with_capacity(graph.num_links());
    for i in 0..graph.num_links() {
        let own = offsets.get(i, i).ok_or(SimError::MissingOffsetPair {
            receiver: i + 1,
            transmitter: i + 1,
        })?;
        let interferers: Vec<usize> = graph.collision_set(i).iter().copied().collect();
        let mut reduced = Vec::with_capacity(interferers.len());
        for &j in &interferers {
            let dij = offsets.get(i, j).ok_or(SimError::MissingOffsetPair {
                receiver: i + 1,
                transmitter: j + 1,
            })?;
            let delta = dij - own;
            let floor = delta.floor();
            reduced.push(ReducedOffset {
                delay: integer_mod(&floor, l) as usize,
                misaligned: delta != floor,
            });
        }
        let count = nonsync_success_count(s, i, &interferers, &reduced);
        out.push(rat(count as i64, l as i64));
    }
    Ok(ThroughputVector(out))
}

fn checked_space(base: u64, exp: usize, bound: u64) -> Result<u64, SimError> {
    let space = (base as u128)
        .checked_pow(exp as u32)
        .unwrap_or(u128::MAX);
    if space > bound as u128 {
        return Err(SimError::SpaceExceeded {
            required: space,
            bound,
        });
    }
    Ok(space as u64)
}

fn total_space(
    s: &ProtocolMatrix,
    graph: &CollisionGraph,
    per_interferer: u64,
    bound: u64,
) -> Result<Vec<u64>, SimError> {
    check_links(s, graph)?;
    let mut spaces = Vec::with_capacity(graph.num_links());
    let mut total: u128 = 0;
    for i in 0..graph.num_links() {
        let space = checked_space(per_interferer, graph.collision_set(i).len(), bound)?;
        total += space as u128;
        if total > bound as u128 {
            return Err(SimError::SpaceExceeded {
                required: total,
                bound,
            });
        }
        spaces.push(space);
    }
    Ok(spaces)
}

fn decode_mixed(mut index: u64, base: u64, out: &mut [u64]) {
    for slot in out.iter_mut() {
        *slot = index % base;
        index /= base;
    }
    debug_assert_eq!(index, 0);
}

/// Minimum over all (count, index) pairs; ties broken by the smallest index
/// so the result does not depend on how rayon partitions the range.
fn min_pair(a: (u64, u64), b: (u64, u64)) -> (u64, u64) {
    std::cmp::min(a, b)
}

/// Worst-case throughput over every integer offset combination. The
/// receiver's own offset is pinned to zero: shifting all of a receiver's
/// offsets together permutes slots and leaves its throughput unchanged.
pub fn sweep_sync_worstcase(
    s: &ProtocolMatrix,
    graph: &CollisionGraph,
    options: &SweepOptions,
) -> Result<SweepResult, SimError> {
    let l = s.period() as u64;
    let spaces = total_space(s, graph, l, options.max_space)?;
    let mut worst = Vec::new();
    let mut witnesses = Vec::new();
    let mut examined = 0u64;

    for i in 0..graph.num_links() {
        let interferers: Vec<usize> = graph.collision_set(i).iter().copied().collect();
        let space = spaces[i];
        let (min_count, min_index) = (0..space)
            .into_par_iter()
            .map_init(
                || vec![0u64; interferers.len()],
                |digits, index| {
                    decode_mixed(index, l, digits);
                    let shifts: Vec<usize> = digits.iter().map(|&d| d as usize).collect();
                    (sync_success_count(s, i, 0, &interferers, &shifts), index)
                },
            )
            .reduce(|| (u64::MAX, u64::MAX), min_pair);

        let mut digits = vec![0u64; interferers.len()];
        decode_mixed(min_index, l, &mut digits);
        let mut offsets: Vec<(usize, Rat)> = interferers
            .iter()
            .zip(&digits)
            .map(|(&j, &d)| (j, rat(d as i64, 1)))
            .collect();
        offsets.push((i, rat(0, 1)));
        offsets.sort_by_key(|(j, _)| *j);

        worst.push(rat(min_count as i64, l as i64));
        witnesses.push(LinkWitness { link: i, offsets });
        examined += space;
    }

    Ok(SweepResult {
        worst_case: ThroughputVector(worst),
        witnesses,
        offsets_examined: examined,
    })
}

/// Worst-case throughput over the unsynchronized model: per interferer, all
/// `L` integer delays with and without fractional misalignment.
pub fn sweep_nonsync_worstcase(
    s: &ProtocolMatrix,
    graph: &CollisionGraph,
    options: &SweepOptions,
) -> Result<SweepResult, SimError> {
    let l = s.period() as u64;
    let spaces = total_space(s, graph, 2 * l, options.max_space)?;
    let mut worst = Vec::new();
    let mut witnesses = Vec::new();
    let mut examined = 0u64;

    for i in 0..graph.num_links() {
        let interferers: Vec<usize> = graph.collision_set(i).iter().copied().collect();
        let space = spaces[i];
        let (min_count, min_index) = (0..space)
            .into_par_iter()
            .map_init(
                || vec![0u64; interferers.len()],
                |digits, index| {
                    decode_mixed(index, 2 * l, digits);
                    let reduced: Vec<ReducedOffset> = digits
                        .iter()
                        .map(|&d| ReducedOffset {
                            delay: (d / 2) as usize,
                            misaligned: d % 2 == 1,
                        })
                        .collect();
                    (
                        nonsync_success_count(s, i, &interferers, &reduced),
                        index,
                    )
                },
            )
            .reduce(|| (u64::MAX, u64::MAX), min_pair);

        let mut digits = vec![0u64; interferers.len()];
        decode_mixed(min_index, 2 * l, &mut digits);
        let mut offsets: Vec<(usize, Rat)> = interferers
            .iter()
            .zip(&digits)
            .map(|(&j, &d)| {
                let delay = rat((d / 2) as i64, 1);
                let v = if d % 2 == 1 { delay + rat(1, 2) } else { delay };
                (j, v)
            })
            .collect();
        offsets.push((i, rat(0, 1)));
        offsets.sort_by_key(|(j, _)| *j);

        worst.push(rat(min_count as i64, l as i64));
        witnesses.push(LinkWitness { link: i, offsets });
        examined += space;
    }

    Ok(SweepResult {
        worst_case: ThroughputVector(worst),
        witnesses,
        offsets_examined: examined,
    })
}

/// Exact mean of each link's synchronized throughput over all integer offset
/// combinations at its receiver. By offset-translation invariance the mean
/// over interferer offsets with the receiver's own offset pinned equals the
/// mean over the full offset space.
pub fn average_throughput_over_offsets(
    s: &ProtocolMatrix,
    graph: &CollisionGraph,
    options: &SweepOptions,
) -> Result<ThroughputVector, SimError> {
    let l = s.period() as u64;
    let spaces = total_space(s, graph, l, options.max_space)?;
    let mut out = Vec::new();
    for i in 0..graph.num_links() {
        let interferers: Vec<usize> = graph.collision_set(i).iter().copied().collect();
        let space = spaces[i];
        let total: u128 = (0..space)
            .into_par_iter()
            .map_init(
                || vec![0u64; interferers.len()],
                |digits, index| {
                    decode_mixed(index, l, digits);
                    let shifts: Vec<usize> = digits.iter().map(|&d| d as usize).collect();
                    sync_success_count(s, i, 0, &interferers, &shifts) as u128
                },
            )
            .sum();
        let denom = Rat::new(
            num::BigInt::from(space) * num::BigInt::from(l),
            1.into(),
        );
        out.push(Rat::new(num::BigInt::from(total), 1.into()) / denom);
    }
    Ok(ThroughputVector(out))
}
