//! Orthogonal arrays: representation, the parity-check construction, the
//! replicated-and-shuffled benchmark generator, tuple counting, row removal
//! and the plain-text format.
//!
//! An `OA(N, k, s, t)` is an `N x k` array over `{0, .., s-1}` in which every
//! projection onto `t` columns contains each of the `s^t` tuples exactly
//! `λ = N / s^t` times.
//!
//! Rows are kept as an indexed list. Benchmark instances repeat every row
//! `λ` times and removal masks address rows by position, so duplicates must
//! stay individually addressable.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::mask::RemovalMask;

/// Largest strength accepted by the constructors. `2^t` rows must stay
/// addressable and the tuple tables must stay small.
pub const MAX_STRENGTH: usize = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OaError {
    #[error("strength must be at least 1")]
    ZeroStrength,
    #[error("strength {strength} exceeds the supported maximum of {MAX_STRENGTH}")]
    StrengthTooLarge { strength: usize },
    #[error("strength {strength} exceeds the number of columns {n_cols}")]
    StrengthExceedsColumns { strength: usize, n_cols: usize },
    #[error("alphabet size must be between 2 and 256, got {0}")]
    BadAlphabet(usize),
    #[error("array must have at least one column")]
    NoColumns,
    #[error("row {row} has {found} symbols, expected {expected}")]
    RowWidth { row: usize, found: usize, expected: usize },
    #[error("symbol {symbol} at row {row}, column {col} is outside the alphabet 0..{alphabet}")]
    SymbolOutOfRange { row: usize, col: usize, symbol: usize, alphabet: usize },
    #[error("{n_rows} rows is not a multiple of s^t = {tuples}")]
    IndexNotIntegral { n_rows: usize, tuples: usize },
    #[error("column subset must have exactly {expected} entries, got {found}")]
    SubsetSize { expected: usize, found: usize },
    #[error("column subset entry {col} is out of range for {n_cols} columns")]
    SubsetColumnOutOfRange { col: usize, n_cols: usize },
    #[error("column subset contains column {0} more than once")]
    SubsetDuplicate(usize),
    #[error("index multiplier must be at least 1")]
    ZeroMultiplier,
    #[error("mask length {mask} does not match the array's {rows} rows")]
    MaskLength { mask: usize, rows: usize },
    #[error("mask weight {weight} cannot reduce {n_rows} rows to a smaller OA of strength {strength} (need a positive multiple of {tuples} below {n_rows})")]
    MaskWeight { weight: usize, n_rows: usize, strength: usize, tuples: usize },
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Validated parameters of an orthogonal array candidate whose row count is a
/// multiple of `s^t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct OaParams {
    pub n_rows: usize,
    pub n_cols: usize,
    pub alphabet: usize,
    pub strength: usize,
    pub index: usize,
}

impl OaParams {
    pub fn new(n_rows: usize, n_cols: usize, alphabet: usize, strength: usize) -> Result<Self, OaError> {
        check_shape(n_cols, alphabet, strength)?;
        let tuples = alphabet.pow(strength as u32);
        if n_rows == 0 || !n_rows.is_multiple_of(tuples) {
            return Err(OaError::IndexNotIntegral { n_rows, tuples });
        }
        Ok(OaParams { n_rows, n_cols, alphabet, strength, index: n_rows / tuples })
    }

    /// `s^t`, the number of distinct tuples per column subset.
    pub fn tuples(&self) -> usize {
        self.alphabet.pow(self.strength as u32)
    }
}

fn check_shape(n_cols: usize, alphabet: usize, strength: usize) -> Result<(), OaError> {
    if n_cols == 0 {
        return Err(OaError::NoColumns);
    }
    if !(2..=256).contains(&alphabet) {
        return Err(OaError::BadAlphabet(alphabet));
    }
    if strength == 0 {
        return Err(OaError::ZeroStrength);
    }
    if strength > MAX_STRENGTH {
        return Err(OaError::StrengthTooLarge { strength });
    }
    if strength > n_cols {
        return Err(OaError::StrengthExceedsColumns { strength, n_cols });
    }
    Ok(())
}

/// An `N x k` array together with the alphabet size and the strength it is
/// meant to have. Whether it actually is an orthogonal array is answered by
/// [`is_orthogonal_array`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrthogonalArray {
    n_cols: usize,
    alphabet: usize,
    strength: usize,
    // row-major, n_rows * n_cols symbols
    cells: Vec<u8>,
}

impl OrthogonalArray {
    pub fn new<R: AsRef<[u8]>>(rows: &[R], n_cols: usize, alphabet: usize, strength: usize) -> Result<Self, OaError> {
        check_shape(n_cols, alphabet, strength)?;
        let mut cells = Vec::with_capacity(rows.len() * n_cols);
        for (r, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_cols {
                return Err(OaError::RowWidth { row: r, found: row.len(), expected: n_cols });
            }
            for (c, &sym) in row.iter().enumerate() {
                if sym as usize >= alphabet {
                    return Err(OaError::SymbolOutOfRange { row: r, col: c, symbol: sym as usize, alphabet });
                }
            }
            cells.extend_from_slice(row);
        }
        Ok(OrthogonalArray { n_cols, alphabet, strength, cells })
    }

    pub fn n_rows(&self) -> usize {
        self.cells.len() / self.n_cols
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn strength(&self) -> usize {
        self.strength
    }

    /// `s^t`.
    pub fn tuples(&self) -> usize {
        self.alphabet.pow(self.strength as u32)
    }

    /// `λ = N / s^t`, or `None` when `N` is not a positive multiple of `s^t`.
    pub fn index(&self) -> Option<usize> {
        let n = self.n_rows();
        let tuples = self.tuples();
        (n > 0 && n.is_multiple_of(tuples)).then(|| n / tuples)
    }

    pub fn params(&self) -> Result<OaParams, OaError> {
        OaParams::new(self.n_rows(), self.n_cols, self.alphabet, self.strength)
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.cells[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[u8]> + '_ {
        self.cells.chunks_exact(self.n_cols)
    }

    /// The same rows reinterpreted at another strength.
    pub fn with_strength(&self, strength: usize) -> Result<Self, OaError> {
        check_shape(self.n_cols, self.alphabet, strength)?;
        Ok(OrthogonalArray { strength, ..self.clone() })
    }

    /// Reorders rows so that row `i` of the result is row `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.n_rows(), "permutation length mismatch");
        self.gather(perm)
    }

    /// Array whose row `i` is row `picks[i]` of `self`; rows may repeat.
    fn gather(&self, picks: &[usize]) -> Self {
        let mut cells = Vec::with_capacity(picks.len() * self.n_cols);
        for &p in picks {
            cells.extend_from_slice(self.row(p));
        }
        OrthogonalArray { cells, ..*self }
    }

    /// Mixed-radix code of the row's projection onto `cols`, lowest column
    /// first as the most significant digit.
    pub(crate) fn tuple_code(&self, row: usize, cols: &[usize]) -> usize {
        let r = self.row(row);
        cols.iter().fold(0, |acc, &c| acc * self.alphabet + r[c] as usize)
    }
}

/// The parity-check (zero-sum) array of order `t`: all `2^t` binary vectors
/// in lexicographic order, followed by a column holding their XOR. It is an
/// `OA(2^t, t+1, 2, t)`.
pub fn parity_check_array(strength: usize) -> Result<OrthogonalArray, OaError> {
    if strength == 0 {
        return Err(OaError::ZeroStrength);
    }
    if strength > MAX_STRENGTH {
        return Err(OaError::StrengthTooLarge { strength });
    }
    let n_cols = strength + 1;
    let mut cells = Vec::with_capacity((1 << strength) * n_cols);
    for v in 0usize..(1 << strength) {
        let mut parity = 0u8;
        for bit in (0..strength).rev() {
            let b = ((v >> bit) & 1) as u8;
            parity ^= b;
            cells.push(b);
        }
        cells.push(parity);
    }
    Ok(OrthogonalArray { n_cols, alphabet: 2, strength, cells })
}

/// Concatenates `multiplier` copies of `base` and shuffles the rows with a
/// Fisher-Yates permutation driven by `seed`.
pub fn replicate_and_shuffle(base: &OrthogonalArray, multiplier: usize, seed: u64) -> Result<OrthogonalArray, OaError> {
    if multiplier == 0 {
        return Err(OaError::ZeroMultiplier);
    }
    let n = base.n_rows();
    let mut order: Vec<usize> = (0..n * multiplier).map(|i| i % n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    Ok(base.gather(&order))
}

/// Occurrence counts of every tuple in the projection onto one column subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TupleCountTable {
    /// Sorted, zero-based column indices.
    pub column_subset: Vec<usize>,
    /// `counts[v]` for the tuple `v` read as a base-`s` number, first column
    /// most significant.
    pub counts: Vec<usize>,
}

fn normalize_subset(arr: &OrthogonalArray, subset: &[usize]) -> Result<Vec<usize>, OaError> {
    if subset.len() != arr.strength {
        return Err(OaError::SubsetSize { expected: arr.strength, found: subset.len() });
    }
    let mut cols = subset.to_vec();
    cols.sort_unstable();
    for w in cols.windows(2) {
        if w[0] == w[1] {
            return Err(OaError::SubsetDuplicate(w[0]));
        }
    }
    if let Some(&c) = cols.iter().find(|&&c| c >= arr.n_cols) {
        return Err(OaError::SubsetColumnOutOfRange { col: c, n_cols: arr.n_cols });
    }
    Ok(cols)
}

pub fn tuple_counts(arr: &OrthogonalArray, column_subset: &[usize]) -> Result<TupleCountTable, OaError> {
    let cols = normalize_subset(arr, column_subset)?;
    let mut counts = vec![0usize; arr.tuples()];
    for r in 0..arr.n_rows() {
        counts[arr.tuple_code(r, &cols)] += 1;
    }
    Ok(TupleCountTable { column_subset: cols, counts })
}

/// All `C(n, k)` sorted `k`-subsets of `0..n` in lexicographic order.
pub fn column_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        // rightmost slot that can still advance
        let Some(i) = (0..k).rev().find(|&i| cur[i] < n - k + i) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// True iff every `t`-column projection holds every tuple exactly
/// `λ = N / s^t` times. False when `N` is not a positive multiple of `s^t`.
pub fn is_orthogonal_array(arr: &OrthogonalArray) -> bool {
    let Some(lambda) = arr.index() else {
        return false;
    };
    column_subsets(arr.n_cols, arr.strength).iter().all(|cols| {
        let mut counts = vec![0usize; arr.tuples()];
        for r in 0..arr.n_rows() {
            counts[arr.tuple_code(r, cols)] += 1;
        }
        counts.iter().all(|&c| c == lambda)
    })
}

/// Checks that `mask` is a legal removal for `arr` and returns the target
/// index `λ′ = (N - p) / s^t`.
pub fn target_index_for(arr: &OrthogonalArray, mask: &RemovalMask) -> Result<usize, OaError> {
    let n = arr.n_rows();
    if mask.len() != n {
        return Err(OaError::MaskLength { mask: mask.len(), rows: n });
    }
    let p = mask.weight();
    let tuples = arr.tuples();
    if p == 0 || p >= n || !p.is_multiple_of(tuples) || !(n - p).is_multiple_of(tuples) {
        return Err(OaError::MaskWeight { weight: p, n_rows: n, strength: arr.strength, tuples });
    }
    Ok((n - p) / tuples)
}

/// Deletes the rows marked with a one in `mask`, keeping the others in their
/// original order. Removal is positional, so repeated rows go one at a time.
pub fn remove_rows(arr: &OrthogonalArray, mask: &RemovalMask) -> Result<OrthogonalArray, OaError> {
    target_index_for(arr, mask)?;
    Ok(remove_rows_unchecked(arr, mask))
}

pub(crate) fn remove_rows_unchecked(arr: &OrthogonalArray, mask: &RemovalMask) -> OrthogonalArray {
    let mut cells = Vec::with_capacity((arr.n_rows() - mask.weight()) * arr.n_cols);
    for (i, row) in arr.rows().enumerate() {
        if !mask.get(i) {
            cells.extend_from_slice(row);
        }
    }
    OrthogonalArray { cells, ..*arr }
}

impl fmt::Display for OrthogonalArray {
    /// Text format: a header line `N k s t`, then one line per row with `k`
    /// space-separated symbols.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {} {} {}", self.n_rows(), self.n_cols, self.alphabet, self.strength)?;
        for row in self.rows() {
            let mut first = true;
            for sym in row {
                if !first {
                    f.write_str(" ")?;
                }
                first = false;
                write!(f, "{sym}")?;
            }
            f.write_str("\n")?;
        }
        Ok(())
    }
}

/// Renders `arr` in the text format.
pub fn serialize(arr: &OrthogonalArray) -> String {
    arr.to_string()
}

/// Parses the text format produced by [`serialize`]. One trailing blank line
/// is tolerated.
pub fn parse(text: &str) -> Result<OrthogonalArray, OaError> {
    let perr = |line: usize, msg: String| OaError::Parse { line, msg };
    let mut lines: Vec<&str> = text.split('\n').collect();
    // "a\nb\n" splits into [.., ""]; allow that plus one genuinely blank line
    if lines.last() == Some(&"") {
        lines.pop();
        if lines.last() == Some(&"") {
            lines.pop();
        }
    }
    let header = lines.first().ok_or_else(|| perr(1, "missing header".into()))?;
    let fields: Vec<usize> = header
        .split(' ')
        .map(|f| f.parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|e| perr(1, format!("header must be four decimal integers `N k s t`: {e}")))?;
    let [n_rows, n_cols, alphabet, strength] = fields[..] else {
        return Err(perr(1, format!("header must have 4 fields, found {}", fields.len())));
    };
    check_shape(n_cols, alphabet, strength).map_err(|e| perr(1, e.to_string()))?;
    let body = &lines[1..];
    if body.len() != n_rows {
        return Err(perr(body.len() + 1, format!("header declares {n_rows} rows but {} were found", body.len())));
    }
    let mut rows = Vec::with_capacity(n_rows);
    for (i, line) in body.iter().enumerate() {
        let lineno = i + 2;
        let row: Vec<u8> = line
            .split(' ')
            .map(|tok| {
                let v = tok.parse::<usize>().map_err(|_| perr(lineno, format!("invalid symbol {tok:?}")))?;
                if v >= alphabet {
                    return Err(perr(lineno, format!("symbol {v} outside alphabet 0..{alphabet}")));
                }
                Ok(v as u8)
            })
            .collect::<Result<_, _>>()?;
        if row.len() != n_cols {
            return Err(perr(lineno, format!("expected {n_cols} symbols, found {}", row.len())));
        }
        rows.push(row);
    }
    OrthogonalArray::new(&rows, n_cols, alphabet, strength)
}

impl FromStr for OrthogonalArray {
    type Err = OaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}
