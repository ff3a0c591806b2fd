//! Deterministic transmission schedules and their offset bookkeeping.
//!
//! The radix construction builds an `M x q^M` digit matrix whose columns run
//! through every M-digit radix-q value in descending order, least significant
//! digit in the first row. Thresholding row `i` at `q - q_i` turns it into a
//! binary schedule whose row-`i` duty factor is exactly `q_i / q`, and cyclic
//! shifts of distinct rows stay combinatorially balanced: over one period,
//! every digit tuple appears the same number of times no matter how the rows
//! are shifted against each other. That balance is what the simulator's
//! worst-case guarantees rest on, and `verify_shift_invariance` checks it
//! exhaustively for small sizes.

use std::collections::BTreeMap;
use std::fmt;

use crate::collision_graph::CollisionGraph;
use crate::rational::{format_rational, integer_mod, is_integer, parse_rational, Rat};

/// Default cap on `rows * columns` for constructed matrices and on the total
/// number of offset combinations enumerated by exhaustive verification.
pub const DEFAULT_MAX_SPACE: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    EmptySpec,
    ZeroDenominator,
    NumeratorExceedsDenominator {
        link: usize,
        numerator: u64,
        denominator: u64,
    },
    RadixTooSmall {
        q: u32,
    },
    SizeBoundExceeded {
        entries: u128,
        bound: u64,
    },
    ExpansionTooSmall {
        k: usize,
    },
    EmptyMatrix,
    RaggedRow {
        row: usize,
        expected: usize,
        got: usize,
    },
    InvalidEntry {
        row: usize,
        col: usize,
        value: u8,
    },
    MatrixSyntax {
        line: usize,
        message: String,
    },
    ReceiverOutOfRange {
        index: usize,
        links: usize,
    },
    LinkMismatch {
        matrix_links: usize,
        graph_links: usize,
    },
    FractionalOffset {
        receiver: usize,
        transmitter: usize,
    },
    OffsetSyntax {
        line: usize,
        message: String,
    },
    UnknownOffsetPair {
        line: usize,
        receiver: usize,
        transmitter: usize,
    },
    DuplicateOffsetPair {
        line: usize,
        receiver: usize,
        transmitter: usize,
    },
    MissingOffsetPair {
        receiver: usize,
        transmitter: usize,
    },
    RadixTooWideForText {
        q: u32,
    },
}

impl fmt::Display for ProtocolError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolError::EmptySpec => write!(f, "duty factor spec needs at least one link"),
            ProtocolError::ZeroDenominator => write!(f, "duty factor denominator must be positive"),
            ProtocolError::NumeratorExceedsDenominator {
                link,
                numerator,
                denominator,
            } => write!(
                f,
                "duty numerator {numerator}/{denominator} for link {link} exceeds one"
            ),
            ProtocolError::RadixTooSmall { q } => {
                write!(f, "radix construction needs q >= 2, got {q}")
            }
            ProtocolError::SizeBoundExceeded { entries, bound } => write!(
                f,
                "requested size needs {entries} entries, above the bound of {bound}; \
                 raise the bound to proceed"
            ),
            ProtocolError::ExpansionTooSmall { k } => {
                write!(f, "expansion factor must be at least 2, got {k}")
            }
            ProtocolError::EmptyMatrix => write!(f, "matrix must have at least one row and column"),
            ProtocolError::RaggedRow { row, expected, got } => {
                write!(f, "row {row} has {got} entries, expected {expected}")
            }
            ProtocolError::InvalidEntry { row, col, value } => {
                write!(f, "entry ({row},{col}) = {value} is not a bit")
            }
            ProtocolError::MatrixSyntax { line, message } => {
                write!(f, "matrix syntax error on line {line}: {message}")
            }
            ProtocolError::ReceiverOutOfRange { index, links } => {
                write!(f, "receiver index {index} out of range for {links} links")
            }
            ProtocolError::LinkMismatch {
                matrix_links,
                graph_links,
            } => write!(
                f,
                "matrix has {matrix_links} rows but the profile has {graph_links} links"
            ),
            ProtocolError::FractionalOffset {
                receiver,
                transmitter,
            } => write!(
                f,
                "offset ({receiver},{transmitter}) is fractional where an integer is required"
            ),
            ProtocolError::OffsetSyntax { line, message } => {
                write!(f, "offsets syntax error on line {line}: {message}")
            }
            ProtocolError::UnknownOffsetPair {
                line,
                receiver,
                transmitter,
            } => write!(
                f,
                "line {line}: pair ({receiver},{transmitter}) is not receiver/interferer \
                 under this profile"
            ),
            ProtocolError::DuplicateOffsetPair {
                line,
                receiver,
                transmitter,
            } => write!(f, "line {line}: duplicate offset for ({receiver},{transmitter})"),
            ProtocolError::MissingOffsetPair {
                receiver,
                transmitter,
            } => write!(f, "missing offset for pair ({receiver},{transmitter})"),
            ProtocolError::RadixTooWideForText { q } => {
                write!(f, "radix {q} does not fit the single-character file format")
            }
        }
    }
}

impl std::error::Error for ProtocolError {}

/// Per-link duty factors `q_i / q` with a shared denominator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DutyFactorSpec {
    numerators: Vec<u64>,
    denominator: u64,
}

impl DutyFactorSpec {
    pub fn new(numerators: Vec<u64>, denominator: u64) -> Result<Self, ProtocolError> {
        if numerators.is_empty() {
            return Err(ProtocolError::EmptySpec);
        }
        if denominator == 0 {
            return Err(ProtocolError::ZeroDenominator);
        }
        for (i, &n) in numerators.iter().enumerate() {
            if n > denominator {
                return Err(ProtocolError::NumeratorExceedsDenominator {
                    link: i,
                    numerator: n,
                    denominator,
                });
            }
        }
        Ok(DutyFactorSpec {
            numerators,
            denominator,
        })
    }

    pub fn num_links(&self) -> usize {
        self.numerators.len()
    }

    pub fn numerators(&self) -> &[u64] {
        &self.numerators
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    pub fn duty_factor(&self, link: usize) -> Rat {
        Rat::new(
            self.numerators[link].into(),
            self.denominator.into(),
        )
    }

    pub fn duty_factors(&self) -> Vec<Rat> {
        (0..self.num_links()).map(|i| self.duty_factor(i)).collect()
    }
}

/// The `M x q^M` digit matrix: column `c` (0-based) holds `q^M - 1 - c` in
/// radix `q`, least significant digit in row 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RadixMatrix {
    q: u32,
    rows: Vec<Vec<u32>>,
}

impl RadixMatrix {
    pub fn new(m: usize, q: u32) -> Result<Self, ProtocolError> {
        Self::with_bound(m, q, DEFAULT_MAX_SPACE)
    }

    pub fn with_bound(m: usize, q: u32, max_entries: u64) -> Result<Self, ProtocolError> {
        if q < 2 {
            return Err(ProtocolError::RadixTooSmall { q });
        }
        if m == 0 {
            return Err(ProtocolError::EmptyMatrix);
        }
        let columns = (q as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
        let entries = columns.saturating_mul(m as u128);
        if entries > max_entries as u128 {
            return Err(ProtocolError::SizeBoundExceeded {
                entries,
                bound: max_entries,
            });
        }
        let columns = columns as u64;
        let mut rows = vec![vec![0u32; columns as usize]; m];
        for c in 0..columns {
            let mut value = columns - 1 - c;
            for row in rows.iter_mut() {
                row[c as usize] = (value % q as u64) as u32;
                value /= q as u64;
            }
        }
        Ok(RadixMatrix { q, rows })
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn period(&self) -> usize {
        self.rows[0].len()
    }

    pub fn radix(&self) -> u32 {
        self.q
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.rows[i]
    }

    pub fn entry(&self, row: usize, col: usize) -> u32 {
        self.rows[row][col]
    }

    /// File form: header `M L q`, then one digit-character row per link.
    pub fn to_text(&self) -> Result<String, ProtocolError> {
        if self.q > 10 {
            return Err(ProtocolError::RadixTooWideForText { q: self.q });
        }
        let mut out = format!("{} {} {}\n", self.num_rows(), self.period(), self.q);
        for row in &self.rows {
            for &d in row {
                out.push(char::from_digit(d, 10).expect("digit below radix"));
            }
            out.push('\n');
        }
        Ok(out)
    }
}

/// A periodic binary schedule: row `i` is link `i`'s transmission pattern
/// over one period of `L` slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolMatrix {
    rows: Vec<Vec<u8>>,
    built_from: Option<DutyFactorSpec>,
    expansion: Option<usize>,
}

impl ProtocolMatrix {
    pub fn from_rows(rows: Vec<Vec<u8>>) -> Result<Self, ProtocolError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(ProtocolError::EmptyMatrix);
        }
        let period = rows[0].len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != period {
                return Err(ProtocolError::RaggedRow {
                    row: i,
                    expected: period,
                    got: row.len(),
                });
            }
            for (t, &v) in row.iter().enumerate() {
                if v > 1 {
                    return Err(ProtocolError::InvalidEntry {
                        row: i,
                        col: t,
                        value: v,
                    });
                }
            }
        }
        Ok(ProtocolMatrix {
            rows,
            built_from: None,
            expansion: None,
        })
    }

    /// Thresholds the radix construction: entry `(i, t)` is 1 exactly when
    /// the digit matrix has `A(i, t) >= q - q_i`, so row `i` carries
    /// `q_i * q^(M-1)` ones per period.
    pub fn from_duty_spec(spec: &DutyFactorSpec) -> Result<Self, ProtocolError> {
        Self::from_duty_spec_with_bound(spec, DEFAULT_MAX_SPACE)
    }

    pub fn from_duty_spec_with_bound(
        spec: &DutyFactorSpec,
        max_entries: u64,
    ) -> Result<Self, ProtocolError> {
        let q64 = spec.denominator();
        let q = u32::try_from(q64).map_err(|_| ProtocolError::SizeBoundExceeded {
            entries: u128::MAX,
            bound: max_entries,
        })?;
        let radix = RadixMatrix::with_bound(spec.num_links(), q, max_entries)?;
        let rows = radix
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let threshold = q64 - spec.numerators()[i];
                row.iter()
                    .map(|&d| u8::from(u64::from(d) >= threshold))
                    .collect()
            })
            .collect();
        Ok(ProtocolMatrix {
            rows,
            built_from: Some(spec.clone()),
            expansion: None,
        })
    }

    pub fn num_links(&self) -> usize {
        self.rows.len()
    }

    pub fn period(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn entry(&self, row: usize, col: usize) -> u8 {
        self.rows[row][col]
    }

    pub fn built_from(&self) -> Option<&DutyFactorSpec> {
        self.built_from.as_ref()
    }

    pub fn expansion(&self) -> Option<usize> {
        self.expansion
    }

    pub fn duty_factors(&self) -> Vec<Rat> {
        self.rows.iter().map(|r| duty_factor(r).unwrap()).collect()
    }

    /// Stretches every slot to `k` slots: a 1 becomes `k-1` ones and a
    /// trailing zero, a 0 becomes `k` zeros. The period grows to `k * L` and
    /// every duty factor scales by `(k-1)/k`. The trailing idle slot is what
    /// lets a schedule tolerate arbitrary fractional misalignment.
    pub fn k_expand(&self, k: usize) -> Result<Self, ProtocolError> {
        if k < 2 {
            return Err(ProtocolError::ExpansionTooSmall { k });
        }
        let entries = (self.num_links() as u128) * (self.period() as u128) * (k as u128);
        if entries > u32::MAX as u128 {
            return Err(ProtocolError::SizeBoundExceeded {
                entries,
                bound: u32::MAX as u64,
            });
        }
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut out = Vec::with_capacity(row.len() * k);
                for &v in row {
                    if v == 1 {
                        out.extend(std::iter::repeat(1u8).take(k - 1));
                        out.push(0);
                    } else {
                        out.extend(std::iter::repeat(0u8).take(k));
                    }
                }
                out
            })
            .collect();
        Ok(ProtocolMatrix {
            rows,
            built_from: self.built_from.clone(),
            expansion: Some(self.expansion.unwrap_or(1) * k),
        })
    }

    /// File form: header `M L`, then one 0/1-character row per link.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.num_links(), self.period());
        for row in &self.rows {
            for &v in row {
                out.push(if v == 1 { '1' } else { '0' });
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self, ProtocolError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .by_ref()
            .find(|(_, l)| !l.trim().is_empty())
            .ok_or(ProtocolError::MatrixSyntax {
                line: 1,
                message: "empty matrix file".to_string(),
            })?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(ProtocolError::MatrixSyntax {
                line: 1,
                message: "expected header `M L`".to_string(),
            });
        }
        let m: usize = parts[0].parse().map_err(|_| ProtocolError::MatrixSyntax {
            line: 1,
            message: "row count is not an integer".to_string(),
        })?;
        let period: usize = parts[1].parse().map_err(|_| ProtocolError::MatrixSyntax {
            line: 1,
            message: "period is not an integer".to_string(),
        })?;
        let mut rows = Vec::with_capacity(m);
        for _ in 0..m {
            let (idx, line) = lines
                .by_ref()
                .find(|(_, l)| !l.trim().is_empty())
                .ok_or(ProtocolError::MatrixSyntax {
                    line: text.lines().count(),
                    message: format!("expected {m} rows"),
                })?;
            let line = line.trim();
            let mut row = Vec::with_capacity(period);
            for ch in line.chars() {
                match ch {
                    '0' => row.push(0u8),
                    '1' => row.push(1u8),
                    other => {
                        return Err(ProtocolError::MatrixSyntax {
                            line: idx + 1,
                            message: format!("invalid character {other:?} in row"),
                        })
                    }
                }
            }
            if row.len() != period {
                return Err(ProtocolError::MatrixSyntax {
                    line: idx + 1,
                    message: format!("row has {} entries, expected {period}", row.len()),
                });
            }
            rows.push(row);
        }
        if let Some((idx, _)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(ProtocolError::MatrixSyntax {
                line: idx + 1,
                message: "trailing content after matrix rows".to_string(),
            });
        }
        Self::from_rows(rows)
    }
}

/// Fraction of slots in which the row transmits.
pub fn duty_factor(row: &[u8]) -> Result<Rat, ProtocolError> {
    if row.is_empty() {
        return Err(ProtocolError::EmptyMatrix);
    }
    let ones = row.iter().filter(|&&v| v == 1).count() as u64;
    Ok(Rat::new(ones.into(), (row.len() as u64).into()))
}

/// Exact per-pair time offsets `(receiver i, transmitter j in J(i))`.
/// The key set is fixed by the profile; every pair is always present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OffsetAssignment {
    offsets: BTreeMap<(usize, usize), Rat>,
}

impl OffsetAssignment {
    /// All-zero offsets for every `(i, j in J(i))` pair of the profile.
    pub fn zero(graph: &CollisionGraph) -> Self {
        let mut offsets = BTreeMap::new();
        for i in 0..graph.num_links() {
            for j in graph.index_set(i).expect("receiver in range") {
                offsets.insert((i, j), Rat::from_integer(0.into()));
            }
        }
        OffsetAssignment { offsets }
    }

    /// Replaces the offset for an existing pair. Unknown pairs are rejected
    /// so an assignment can never drift away from its profile's key set.
    pub fn set(&mut self, receiver: usize, transmitter: usize, value: Rat) -> Result<(), ProtocolError> {
        match self.offsets.get_mut(&(receiver, transmitter)) {
            Some(slot) => {
                *slot = value;
                Ok(())
            }
            None => Err(ProtocolError::UnknownOffsetPair {
                line: 0,
                receiver: receiver + 1,
                transmitter: transmitter + 1,
            }),
        }
    }

    pub fn get(&self, receiver: usize, transmitter: usize) -> Option<&Rat> {
        self.offsets.get(&(receiver, transmitter))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(usize, usize), &Rat)> {
        self.offsets.iter()
    }

    /// True when every offset is an integer number of slots.
    pub fn is_synchronized(&self) -> bool {
        self.offsets.values().all(is_integer)
    }

    /// Parses the offsets file format: one `<i> <j> <value>` line per pair,
    /// 1-based indices, values integer, decimal, or `p/q`. Every pair of the
    /// profile must appear exactly once.
    pub fn parse(text: &str, graph: &CollisionGraph) -> Result<Self, ProtocolError> {
        let mut assignment = OffsetAssignment::zero(graph);
        let mut seen: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let mut tokens = line.split_whitespace();
            let (i_tok, j_tok, v_tok) = match (tokens.next(), tokens.next(), tokens.next()) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => {
                    return Err(ProtocolError::OffsetSyntax {
                        line: line_no,
                        message: "expected `<receiver> <transmitter> <offset>`".to_string(),
                    })
                }
            };
            if tokens.next().is_some() {
                return Err(ProtocolError::OffsetSyntax {
                    line: line_no,
                    message: "trailing tokens after offset value".to_string(),
                });
            }
            let parse_idx = |tok: &str| -> Result<usize, ProtocolError> {
                let v: usize = tok.parse().map_err(|_| ProtocolError::OffsetSyntax {
                    line: line_no,
                    message: format!("invalid link index {tok:?}"),
                })?;
                if v == 0 {
                    return Err(ProtocolError::OffsetSyntax {
                        line: line_no,
                        message: "link indices are 1-based".to_string(),
                    });
                }
                Ok(v)
            };
            let i = parse_idx(i_tok)?;
            let j = parse_idx(j_tok)?;
            let value = parse_rational(v_tok).map_err(|e| ProtocolError::OffsetSyntax {
                line: line_no,
                message: e.to_string(),
            })?;
            let key = (i - 1, j - 1);
            if !assignment.offsets.contains_key(&key) {
                return Err(ProtocolError::UnknownOffsetPair {
                    line: line_no,
                    receiver: i,
                    transmitter: j,
                });
            }
            if seen.insert(key, line_no).is_some() {
                return Err(ProtocolError::DuplicateOffsetPair {
                    line: line_no,
                    receiver: i,
                    transmitter: j,
                });
            }
            assignment.offsets.insert(key, value);
        }
        for &(i, j) in assignment.offsets.keys() {
            if !seen.contains_key(&(i, j)) {
                return Err(ProtocolError::MissingOffsetPair {
                    receiver: i + 1,
                    transmitter: j + 1,
                });
            }
        }
        Ok(assignment)
    }

    /// Renders in the same file format, offsets as exact rationals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (&(i, j), v) in &self.offsets {
            out.push_str(&format!("{} {} {}\n", i + 1, j + 1, format_rational(v)));
        }
        out
    }
}

/// What receiver `i` sees of the schedule under integer offsets: the rows of
/// `J(i)` in ascending link order, row `j` cyclically delayed by its offset,
/// so entry `(j, t)` is `S(j, (t - d_ij) mod L)`.
pub fn observed_submatrix(
    s: &ProtocolMatrix,
    graph: &CollisionGraph,
    receiver: usize,
    offsets: &OffsetAssignment,
) -> Result<Vec<Vec<u8>>, ProtocolError> {
    if s.num_links() != graph.num_links() {
        return Err(ProtocolError::LinkMismatch {
            matrix_links: s.num_links(),
            graph_links: graph.num_links(),
        });
    }
    if receiver >= graph.num_links() {
        return Err(ProtocolError::ReceiverOutOfRange {
            index: receiver,
            links: graph.num_links(),
        });
    }
    let period = s.period() as u64;
    let mut out = Vec::new();
    for j in graph.index_set(receiver).expect("receiver in range") {
        let delta = offsets
            .get(receiver, j)
            .ok_or(ProtocolError::MissingOffsetPair {
                receiver: receiver + 1,
                transmitter: j + 1,
            })?;
        if !is_integer(delta) {
            return Err(ProtocolError::FractionalOffset {
                receiver: receiver + 1,
                transmitter: j + 1,
            });
        }
        let shift = integer_mod(delta, period) as usize;
        let row = s.row(j);
        let l = row.len();
        let shifted = (0..l).map(|t| row[(t + l - shift) % l]).collect();
        out.push(shifted);
    }
    Ok(out)
}

/// Options for exhaustive shift-invariance verification.
#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Sweep the receiver's own offset too instead of pinning it to zero.
    /// Pinning loses nothing because only offset differences matter, but the
    /// full sweep is available for direct checks of the stated property.
    pub full_sweep: bool,
    /// Cap on the total number of offset combinations across receivers.
    pub max_space: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            full_sweep: false,
            max_space: DEFAULT_MAX_SPACE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftCounterexample {
    pub receiver: usize,
    /// `(transmitter, shift)` pairs in ascending transmitter order.
    pub offsets: Vec<(usize, u64)>,
    pub tuple: Vec<u32>,
    pub expected: u64,
    pub actual: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftInvarianceReport {
    pub passed: bool,
    pub combos_checked: u64,
    pub counterexample: Option<ShiftCounterexample>,
}

/// Exhaustively checks, for every receiver `i` of the profile and every
/// integer offset combination over `J(i)`, that the shifted digit rows of
/// the radix construction contain every tuple of `{0..q-1}^{|J(i)|}` exactly
/// `q^(M-|J(i)|)` times among their `q^M` columns.
pub fn verify_shift_invariance(
    m: usize,
    q: u32,
    graph: &CollisionGraph,
    options: &VerifyOptions,
) -> Result<ShiftInvarianceReport, ProtocolError> {
    if m != graph.num_links() {
        return Err(ProtocolError::LinkMismatch {
            matrix_links: m,
            graph_links: graph.num_links(),
        });
    }
    let radix = RadixMatrix::with_bound(m, q, options.max_space)?;
    verify_digit_matrix(&radix, graph, options)
}

pub(crate) fn verify_digit_matrix(
    radix: &RadixMatrix,
    graph: &CollisionGraph,
    options: &VerifyOptions,
) -> Result<ShiftInvarianceReport, ProtocolError> {
    let m = radix.num_rows();
    let q = radix.radix() as u64;
    let period = radix.period() as u64;

    let mut total_space: u128 = 0;
    for i in 0..graph.num_links() {
        let j_len = graph.index_set(i).expect("receiver in range").len();
        let swept = if options.full_sweep { j_len } else { j_len - 1 };
        total_space += (period as u128).pow(swept as u32);
    }
    if total_space > options.max_space as u128 {
        return Err(ProtocolError::SizeBoundExceeded {
            entries: total_space,
            bound: options.max_space,
        });
    }

    let mut combos_checked = 0u64;
    for i in 0..graph.num_links() {
        let members: Vec<usize> = graph.index_set(i).expect("receiver in range").into_iter().collect();
        let j_len = members.len();
        let swept = if options.full_sweep { j_len } else { j_len - 1 };
        let expected = q.pow((m - j_len) as u32);
        let tuple_count = q.pow(j_len as u32) as usize;
        let space = (period).pow(swept as u32);

        let mut counts = vec![0u64; tuple_count];
        let mut shifts = vec![0u64; j_len];
        for combo in 0..space {
            // Mixed-radix decode of the combo index into per-row shifts.
            // In reduced mode the receiver's own row keeps shift zero; it is
            // always the row of `i` itself, which sits somewhere in members.
            let mut rem = combo;
            for (slot, shift) in shifts.iter_mut().enumerate() {
                if !options.full_sweep && members[slot] == i {
                    *shift = 0;
                    continue;
                }
                *shift = rem % period;
                rem /= period;
            }
            debug_assert_eq!(rem, 0);

            counts.iter_mut().for_each(|c| *c = 0);
            for t in 0..period {
                let mut key = 0u64;
                for (slot, &j) in members.iter().enumerate() {
                    let col = ((t + period - shifts[slot]) % period) as usize;
                    key = key * q + u64::from(radix.entry(j, col));
                }
                counts[key as usize] += 1;
            }
            combos_checked += 1;

            if let Some(bad) = counts.iter().position(|&c| c != expected) {
                let mut tuple = vec![0u32; j_len];
                let mut rem_key = bad as u64;
                for slot in (0..j_len).rev() {
                    tuple[slot] = (rem_key % q) as u32;
                    rem_key /= q;
                }
                return Ok(ShiftInvarianceReport {
                    passed: false,
                    combos_checked,
                    counterexample: Some(ShiftCounterexample {
                        receiver: i,
                        offsets: members.iter().copied().zip(shifts.iter().copied()).collect(),
                        tuple,
                        expected,
                        actual: counts[bad],
                    }),
                });
            }
        }
    }

    Ok(ShiftInvarianceReport {
        passed: true,
        combos_checked,
        counterexample: None,
    })
}

/// Duty factors scaled by the expansion identity `(k-1)/k`.
pub fn expanded_duty_factor(original: &Rat, k: usize) -> Rat {
    original * Rat::new((k as u64 - 1).into(), (k as u64).into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    pub(crate) fn star3() -> CollisionGraph {
        CollisionGraph::parse_profile("M 3\nI 1: 2 3\nI 2: 1\nI 3: 1\n", false).unwrap()
    }

    fn spec(nums: &[u64], den: u64) -> DutyFactorSpec {
        DutyFactorSpec::new(nums.to_vec(), den).unwrap()
    }

    const S32_ROWS: [[u8; 8]; 3] = [
        [1, 0, 1, 0, 1, 0, 1, 0],
        [1, 1, 0, 0, 1, 1, 0, 0],
        [1, 1, 1, 1, 0, 0, 0, 0],
    ];

    pub(crate) fn s32() -> ProtocolMatrix {
        ProtocolMatrix::from_duty_spec(&spec(&[1, 1, 1], 2)).unwrap()
    }

    #[test]
    fn radix_3_2_matches_descending_binary_columns() {
        let a = RadixMatrix::new(3, 2).unwrap();
        assert_eq!(a.num_rows(), 3);
        assert_eq!(a.period(), 8);
        let expected: [[u32; 8]; 3] = [
            [1, 0, 1, 0, 1, 0, 1, 0],
            [1, 1, 0, 0, 1, 1, 0, 0],
            [1, 1, 1, 1, 0, 0, 0, 0],
        ];
        for (i, row) in expected.iter().enumerate() {
            assert_eq!(a.row(i), row);
        }
    }

    #[test]
    fn radix_single_row_counts_down() {
        let a = RadixMatrix::new(1, 5).unwrap();
        assert_eq!(a.row(0), &[4, 3, 2, 1, 0]);
    }

    #[test]
    fn radix_columns_match_independent_base_conversion() {
        // Oracle: most-significant-first division loop, reversed at the end.
        fn to_digits_lsd_first(mut value: u64, q: u64, width: usize) -> Vec<u32> {
            let mut digits = Vec::with_capacity(width);
            for _ in 0..width {
                digits.push((value % q) as u32);
                value /= q;
            }
            digits
        }
        for (m, q) in [(2usize, 3u32), (3, 3), (2, 5)] {
            let a = RadixMatrix::new(m, q).unwrap();
            let l = (q as u64).pow(m as u32);
            for c in 0..l {
                let digits = to_digits_lsd_first(l - 1 - c, q as u64, m);
                for i in 0..m {
                    assert_eq!(a.entry(i, c as usize), digits[i], "col {c} row {i}");
                }
            }
        }
    }

    #[test]
    fn radix_rejects_small_q_and_huge_sizes() {
        assert!(matches!(
            RadixMatrix::new(3, 1),
            Err(ProtocolError::RadixTooSmall { q: 1 })
        ));
        assert!(matches!(
            RadixMatrix::new(30, 10),
            Err(ProtocolError::SizeBoundExceeded { .. })
        ));
    }

    #[test]
    fn duty_spec_validates_inputs() {
        assert!(matches!(
            DutyFactorSpec::new(vec![], 2),
            Err(ProtocolError::EmptySpec)
        ));
        assert!(matches!(
            DutyFactorSpec::new(vec![1], 0),
            Err(ProtocolError::ZeroDenominator)
        ));
        assert!(matches!(
            DutyFactorSpec::new(vec![3], 2),
            Err(ProtocolError::NumeratorExceedsDenominator { .. })
        ));
        assert_eq!(spec(&[1, 2], 4).duty_factor(1), rat(1, 2));
    }

    #[test]
    fn protocol_from_all_half_duty_equals_binary_radix_rows() {
        let s = s32();
        for (i, row) in S32_ROWS.iter().enumerate() {
            assert_eq!(s.row(i), row);
        }
        assert_eq!(s.duty_factors(), vec![rat(1, 2), rat(1, 2), rat(1, 2)]);
    }

    #[test]
    fn zero_and_full_duty_rows_are_constant() {
        let s = ProtocolMatrix::from_duty_spec(&spec(&[0, 2, 1], 2)).unwrap();
        assert!(s.row(0).iter().all(|&v| v == 0));
        assert!(s.row(1).iter().all(|&v| v == 1));
        assert_eq!(duty_factor(s.row(2)).unwrap(), rat(1, 2));
    }

    #[test]
    fn ones_count_is_numerator_times_power() {
        for (nums, den) in [(vec![1u64, 2, 3], 3u64), (vec![0, 1, 2], 2), (vec![2, 3], 4)] {
            let sp = spec(&nums, den);
            let s = ProtocolMatrix::from_duty_spec(&sp).unwrap();
            let m = sp.num_links() as u32;
            for i in 0..sp.num_links() {
                let ones = s.row(i).iter().filter(|&&v| v == 1).count() as u64;
                assert_eq!(ones, nums[i] * den.pow(m - 1), "row {i} of {nums:?}/{den}");
                assert_eq!(duty_factor(s.row(i)).unwrap(), sp.duty_factor(i));
            }
        }
    }

    #[test]
    fn k_expand_rewrites_symbols() {
        let s = s32();
        let e = s.k_expand(2).unwrap();
        assert_eq!(e.period(), 16);
        assert_eq!(
            e.row(2),
            &[1, 0, 1, 0, 1, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0]
        );
        assert_eq!(e.expansion(), Some(2));
        assert!(matches!(
            s.k_expand(1),
            Err(ProtocolError::ExpansionTooSmall { k: 1 })
        ));
    }

    #[test]
    fn k_expand_scales_duty_by_k_minus_one_over_k() {
        let s = ProtocolMatrix::from_duty_spec(&spec(&[1, 2, 3], 3)).unwrap();
        for k in [2usize, 3, 5] {
            let e = s.k_expand(k).unwrap();
            let scaled: Vec<Rat> = s
                .duty_factors()
                .iter()
                .map(|f| expanded_duty_factor(f, k))
                .collect();
            assert_eq!(e.duty_factors(), scaled, "k = {k}");
        }
    }

    #[test]
    fn matrix_text_roundtrip() {
        let s = s32();
        let text = s.to_text();
        assert!(text.starts_with("3 8\n10101010\n"));
        let back = ProtocolMatrix::parse_text(&text).unwrap();
        assert_eq!(back.rows(), s.rows());

        assert!(matches!(
            ProtocolMatrix::parse_text("2 4\n1010\n10x0\n"),
            Err(ProtocolError::MatrixSyntax { line: 3, .. })
        ));
        assert!(matches!(
            ProtocolMatrix::parse_text("2 4\n1010\n101\n"),
            Err(ProtocolError::MatrixSyntax { line: 3, .. })
        ));
        assert!(matches!(
            ProtocolMatrix::parse_text("2\n10\n01\n"),
            Err(ProtocolError::MatrixSyntax { line: 1, .. })
        ));
    }

    #[test]
    fn radix_text_uses_digit_characters() {
        let a = RadixMatrix::new(2, 3).unwrap();
        let text = a.to_text().unwrap();
        assert_eq!(text, "2 9 3\n210210210\n222111000\n");
        let wide = RadixMatrix::new(1, 11).unwrap();
        assert!(matches!(
            wide.to_text(),
            Err(ProtocolError::RadixTooWideForText { q: 11 })
        ));
    }

    #[test]
    fn from_rows_validates_shape_and_entries() {
        assert!(matches!(
            ProtocolMatrix::from_rows(vec![]),
            Err(ProtocolError::EmptyMatrix)
        ));
        assert!(matches!(
            ProtocolMatrix::from_rows(vec![vec![1, 0], vec![1]]),
            Err(ProtocolError::RaggedRow { row: 1, .. })
        ));
        assert!(matches!(
            ProtocolMatrix::from_rows(vec![vec![2]]),
            Err(ProtocolError::InvalidEntry { .. })
        ));
    }

    fn cycle3() -> CollisionGraph {
        CollisionGraph::parse_profile("M 3\nI 1: 2\nI 2: 3\nI 3: 1\n", false).unwrap()
    }

    #[test]
    fn observed_submatrix_applies_right_cyclic_shifts() {
        // 3x4 schedule observed at receiver 1 (0-based), J = {1, 2},
        // offsets 1 and 3.
        let a = ProtocolMatrix::from_rows(vec![
            vec![1, 0, 1, 0],
            vec![1, 1, 0, 0],
            vec![0, 1, 0, 1],
        ])
        .unwrap();
        let g = cycle3();
        let mut d = OffsetAssignment::zero(&g);
        d.set(1, 1, rat(1, 1)).unwrap();
        d.set(1, 2, rat(3, 1)).unwrap();
        let obs = observed_submatrix(&a, &g, 1, &d).unwrap();
        assert_eq!(obs, vec![vec![0, 1, 1, 0], vec![1, 0, 1, 0]]);
    }

    #[test]
    fn observed_submatrix_star_receiver_sees_all_rows() {
        let s = s32();
        let g = star3();
        let mut d = OffsetAssignment::zero(&g);
        d.set(0, 0, rat(1, 1)).unwrap();
        d.set(0, 1, rat(2, 1)).unwrap();
        d.set(0, 2, rat(3, 1)).unwrap();
        let obs = observed_submatrix(&s, &g, 0, &d).unwrap();
        assert_eq!(
            obs,
            vec![
                vec![0, 1, 0, 1, 0, 1, 0, 1],
                vec![0, 0, 1, 1, 0, 0, 1, 1],
                vec![0, 0, 0, 1, 1, 1, 1, 0],
            ]
        );
    }

    #[test]
    fn observed_submatrix_zero_offsets_is_identity_selection() {
        let s = s32();
        let g = star3();
        let d = OffsetAssignment::zero(&g);
        let obs = observed_submatrix(&s, &g, 0, &d).unwrap();
        assert_eq!(obs, s.rows().to_vec());
    }

    #[test]
    fn observed_submatrix_rejects_fractional_offsets() {
        let s = s32();
        let g = star3();
        let mut d = OffsetAssignment::zero(&g);
        d.set(0, 1, rat(1, 2)).unwrap();
        assert!(matches!(
            observed_submatrix(&s, &g, 0, &d),
            Err(ProtocolError::FractionalOffset {
                receiver: 1,
                transmitter: 2
            })
        ));
    }

    #[test]
    fn offsets_parse_roundtrip_and_validation() {
        let g = star3();
        let text = "\
# receiver transmitter offset
1 1 0
1 2 1
1 3 -3/2
2 1 0.5
2 2 0
3 1 2
3 3 0
";
        let d = OffsetAssignment::parse(text, &g).unwrap();
        assert_eq!(d.get(0, 2), Some(&rat(-3, 2)));
        assert_eq!(d.get(1, 0), Some(&rat(1, 2)));
        assert!(!d.is_synchronized());
        let back = OffsetAssignment::parse(&d.to_text(), &g).unwrap();
        assert_eq!(back, d);

        let missing = "1 1 0\n1 2 1\n1 3 0\n2 1 0\n2 2 0\n3 1 0\n";
        assert!(matches!(
            OffsetAssignment::parse(missing, &g),
            Err(ProtocolError::MissingOffsetPair {
                receiver: 3,
                transmitter: 3
            })
        ));

        let unknown = "2 3 1\n";
        assert!(matches!(
            OffsetAssignment::parse(unknown, &g),
            Err(ProtocolError::UnknownOffsetPair {
                line: 1,
                receiver: 2,
                transmitter: 3
            })
        ));

        let dup = "1 1 0\n1 1 1\n";
        assert!(matches!(
            OffsetAssignment::parse(dup, &g),
            Err(ProtocolError::DuplicateOffsetPair { line: 2, .. })
        ));
    }

    #[test]
    fn zero_assignment_is_synchronized_and_complete() {
        let g = star3();
        let d = OffsetAssignment::zero(&g);
        assert!(d.is_synchronized());
        assert_eq!(d.entries().count(), 3 + 2 + 2);
        assert!(d.get(1, 2).is_none());
    }

    #[test]
    fn shift_invariance_holds_for_small_cases() {
        let g = star3();
        let report =
            verify_shift_invariance(3, 2, &g, &VerifyOptions::default()).unwrap();
        assert!(report.passed);
        assert_eq!(report.combos_checked, 64 + 8 + 8);

        let full = verify_shift_invariance(
            3,
            2,
            &g,
            &VerifyOptions {
                full_sweep: true,
                ..VerifyOptions::default()
            },
        )
        .unwrap();
        assert!(full.passed);
        assert_eq!(full.combos_checked, 512 + 64 + 64);

        let mutual = CollisionGraph::multiple_access(2).unwrap();
        let r = verify_shift_invariance(2, 3, &mutual, &VerifyOptions::default()).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn shift_invariance_counts_single_member_index_sets() {
        // Link 1 (0-based 0) interferes with nobody: J(0) = {0}, so each of
        // its digit values must appear q^(M-1) times in its own row.
        let g = CollisionGraph::parse_profile("M 2\nI 2: 1\n", false).unwrap();
        let r = verify_shift_invariance(2, 3, &g, &VerifyOptions::default()).unwrap();
        assert!(r.passed);
    }

    #[test]
    fn shift_invariance_detects_unbalanced_matrices() {
        let mut radix = RadixMatrix::new(2, 2).unwrap();
        radix.rows[0][0] = 0; // break the balance by hand
        let g = CollisionGraph::multiple_access(2).unwrap();
        let r = verify_digit_matrix(&radix, &g, &VerifyOptions::default()).unwrap();
        assert!(!r.passed);
        let ce = r.counterexample.unwrap();
        assert_eq!(ce.expected, 1);
        assert_ne!(ce.actual, 1);
    }

    #[test]
    fn shift_invariance_respects_space_bound() {
        let g = star3();
        let err = verify_shift_invariance(
            3,
            2,
            &g,
            &VerifyOptions {
                full_sweep: false,
                max_space: 10,
            },
        )
        .unwrap_err();
        assert!(matches!(err, ProtocolError::SizeBoundExceeded { .. }));
    }

    #[test]
    fn verify_rejects_link_count_mismatch() {
        let g = star3();
        assert!(matches!(
            verify_shift_invariance(2, 2, &g, &VerifyOptions::default()),
            Err(ProtocolError::LinkMismatch { .. })
        ));
    }
}
