//! Null-diagonal symmetric bistochastic (NSB) matrices.
//!
//! Every optimal conjugation channel in dimension `d` is indexed by one NSB
//! matrix `b`: nonnegative, symmetric, zero on the diagonal, with every row
//! summing to one. The set is a convex polytope. For `d = 2, 3` it is a single
//! point; for `d = 4` it is the triangle spanned by the three perfect
//! matchings of `{0, 1, 2, 3}`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;
use thiserror::Error;

use crate::linalg::ComplexMatrix;

/// Slack allowed on negative entries, the diagonal, and symmetry.
pub const ENTRY_SLACK: f64 = 1e-12;
/// Default row-sum tolerance.
pub const ROW_SUM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NsbError {
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("matrix is not square: row {row} has {len} entries, expected {d}")]
    NotSquare { row: usize, len: usize, d: usize },
    #[error("entry ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("negative entry {value:e} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("nonzero diagonal entry {value:e} at ({index}, {index})")]
    NonzeroDiagonal { index: usize, value: f64 },
    #[error("asymmetric entries at ({row}, {col}): {upper} vs {lower}")]
    Asymmetric {
        row: usize,
        col: usize,
        upper: f64,
        lower: f64,
    },
    #[error("row {row} sums to {sum}, expected 1")]
    RowSum { row: usize, sum: f64 },
    #[error("expected {expected} lower-triangle entries for d = {d}, got {got}")]
    LowerLength {
        d: usize,
        expected: usize,
        got: usize,
    },
    #[error("parameters out of range: p1 = {p1}, p2 = {p2} (need p1, p2 >= 0, p1 + p2 <= 1)")]
    ParameterRange { p1: f64, p2: f64 },
    #[error("operation needs d = {expected}, got {got}")]
    WrongDimension { expected: usize, got: usize },
    #[error("barycentric reconstruction failed (error {error:e})")]
    Reconstruction { error: f64 },
    #[error("perfect matchings need an even dimension, got {0}")]
    OddDimension(usize),
    #[error("invalid matching: {0}")]
    InvalidMatching(String),
    #[error("cannot parse matrix: {0}")]
    Parse(String),
}

/// A validated NSB matrix, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NsbMatrix {
    d: usize,
    entries: Vec<f64>,
}

impl NsbMatrix {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.d + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.d).map(<[f64]>::to_vec).collect()
    }

    /// Weights `b_ij` for `i > j`, in row-major lower-triangle order.
    pub fn lower_pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (1..self.d).flat_map(move |i| (0..i).map(move |j| (i, j, self.get(i, j))))
    }

    pub fn to_complex(&self) -> ComplexMatrix {
        ComplexMatrix::from_real(self.d, self.d, &self.entries).expect("square by construction")
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.d != other.d {
            return f64::INFINITY;
        }
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `Σ_k w_k · m_k`; the weights are normalized to sum to one.
    pub fn convex_combination(parts: &[(f64, &NsbMatrix)]) -> Result<Self, NsbError> {
        let d = parts
            .first()
            .map(|(_, m)| m.d)
            .ok_or(NsbError::DimensionTooSmall(0))?;
        if let Some((_, m)) = parts.iter().find(|(_, m)| m.d != d) {
            return Err(NsbError::WrongDimension {
                expected: d,
                got: m.d,
            });
        }
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        let mut entries = vec![0.0; d * d];
        for (w, m) in parts {
            for (e, x) in entries.iter_mut().zip(&m.entries) {
                *e += w / total * x;
            }
        }
        validate_flat(d, entries, ROW_SUM_TOL)
    }
}

impl fmt::Display for NsbMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.entries.chunks(self.d) {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:.6}")).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

/// Check a square real matrix against the NSB constraints.
///
/// Entries within [`ENTRY_SLACK`] of zero (negatives, the diagonal) are
/// clamped to zero and the matrix is symmetrized; row sums must be within
/// `tol` of one. Violations are reported in the order: shape, finiteness,
/// negativity, diagonal, symmetry, row sums.
pub fn validate(rows: &[Vec<f64>], tol: f64) -> Result<NsbMatrix, NsbError> {
    let d = rows.len();
    if d < 2 {
        return Err(NsbError::DimensionTooSmall(d));
    }
    if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
        return Err(NsbError::NotSquare {
            row,
            len: r.len(),
            d,
        });
    }
    validate_flat(d, rows.concat(), tol)
}

fn validate_flat(d: usize, mut e: Vec<f64>, tol: f64) -> Result<NsbMatrix, NsbError> {
    for i in 0..d {
        for j in 0..d {
            let x = e[i * d + j];
            if !x.is_finite() {
                return Err(NsbError::NonFinite { row: i, col: j });
            }
            if x < -ENTRY_SLACK {
                return Err(NsbError::NegativeEntry {
                    row: i,
                    col: j,
                    value: x,
                });
            }
        }
    }
    for i in 0..d {
        let x = e[i * d + i];
        if x.abs() > ENTRY_SLACK {
            return Err(NsbError::NonzeroDiagonal { index: i, value: x });
        }
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let (upper, lower) = (e[i * d + j], e[j * d + i]);
            if (upper - lower).abs() > ENTRY_SLACK {
                return Err(NsbError::Asymmetric {
                    row: i,
                    col: j,
                    upper,
                    lower,
                });
            }
        }
    }
    for i in 0..d {
        e[i * d + i] = 0.0;
        for j in (i + 1)..d {
            let v = (0.5 * (e[i * d + j] + e[j * d + i])).max(0.0);
            e[i * d + j] = v;
            e[j * d + i] = v;
        }
    }
    for i in 0..d {
        let sum: f64 = e[i * d..(i + 1) * d].iter().sum();
        if (sum - 1.0).abs() > tol {
            return Err(NsbError::RowSum { row: i, sum });
        }
    }
    Ok(NsbMatrix { d, entries: e })
}

/// Complete the strictly-lower triangle `b_ij` (`i > j`, row-major order
/// `b_10, b_20, b_21, b_30, …`) to a symmetric zero-diagonal matrix and validate.
pub fn complete_lower_triangle(lower: &[f64], d: usize) -> Result<NsbMatrix, NsbError> {
    if d < 2 {
        return Err(NsbError::DimensionTooSmall(d));
    }
    let expected = d * (d - 1) / 2;
    if lower.len() != expected {
        return Err(NsbError::LowerLength {
            d,
            expected,
            got: lower.len(),
        });
    }
    let mut e = vec![0.0; d * d];
    let mut it = lower.iter();
    for i in 1..d {
        for j in 0..i {
            let &x = it.next().expect("length checked");
            e[i * d + j] = x;
            e[j * d + i] = x;
        }
    }
    validate_flat(d, e, ROW_SUM_TOL)
}

/// The canonical representative: the unique point for `d = 2, 3`, and the
/// uniform matrix `(J − I)/(d − 1)` for larger `d`.
///
/// For `d = 2, 3` the uniform matrix is that unique point, so one formula covers all `d`.
pub fn canonical(d: usize) -> Result<NsbMatrix, NsbError> {
    if d < 2 {
        return Err(NsbError::DimensionTooSmall(d));
    }
    let w = 1.0 / (d - 1) as f64;
    let e = (0..d * d)
        .map(|k| if k / d == k % d { 0.0 } else { w })
        .collect();
    validate_flat(d, e, ROW_SUM_TOL)
}

/// The two-parameter family covering every NSB matrix at `d = 4`.
pub fn family_d4(p1: f64, p2: f64) -> Result<NsbMatrix, NsbError> {
    if !(p1.is_finite() && p2.is_finite()) || p1 < 0.0 || p2 < 0.0 || p1 + p2 > 1.0 + ENTRY_SLACK {
        return Err(NsbError::ParameterRange { p1, p2 });
    }
    let p3 = (1.0 - p1 - p2).max(0.0);
    let rows = vec![
        vec![0.0, p1, p2, p3],
        vec![p1, 0.0, p3, p2],
        vec![p2, p3, 0.0, p1],
        vec![p3, p2, p1, 0.0],
    ];
    validate(&rows, ROW_SUM_TOL)
}

/// Barycentric coordinates `(p1, p2, p3)` of a `d = 4` NSB matrix with
/// respect to the matchings `{01,23}`, `{02,13}`, `{03,12}`.
///
/// Row sums force `b23 = b01`, `b13 = b02`, `b12 = b03`, so the coordinates
/// are read off row 0 and the reconstruction is checked.
pub fn decompose_d4(b: &NsbMatrix) -> Result<(f64, f64, f64), NsbError> {
    if b.d != 4 {
        return Err(NsbError::WrongDimension {
            expected: 4,
            got: b.d,
        });
    }
    let (p1, p2, p3) = (b.get(0, 1), b.get(0, 2), b.get(0, 3));
    let extremals = matchings(4)?;
    let mut error: f64 = (p1 + p2 + p3 - 1.0).abs();
    let weights = [p1, p2, p3];
    for i in 0..4 {
        for j in 0..4 {
            let rebuilt: f64 = extremals
                .iter()
                .zip(weights)
                .map(|(m, w)| w * m.entry(i, j))
                .sum();
            error = error.max((rebuilt - b.get(i, j)).abs());
        }
    }
    if error > 1e-10 {
        return Err(NsbError::Reconstruction { error });
    }
    Ok((p1, p2, p3))
}

/// A perfect matching of `{0, …, d−1}`.
///
/// Pairs are stored as `(i, j)` with `i > j`, sorted by the smaller index `j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct MatchingPermutation {
    d: usize,
    pairs: Vec<(usize, usize)>,
}

impl MatchingPermutation {
    pub fn new(d: usize, pairs: &[(usize, usize)]) -> Result<Self, NsbError> {
        if d == 0 || d % 2 == 1 {
            return Err(NsbError::OddDimension(d));
        }
        if pairs.len() != d / 2 {
            return Err(NsbError::InvalidMatching(format!(
                "need {} pairs for d = {d}, got {}",
                d / 2,
                pairs.len()
            )));
        }
        let mut seen = vec![false; d];
        let mut norm = Vec::with_capacity(pairs.len());
        for &(a, b) in pairs {
            if a == b {
                return Err(NsbError::InvalidMatching(format!(
                    "pair ({a}, {b}) is a loop"
                )));
            }
            for x in [a, b] {
                if x >= d {
                    return Err(NsbError::InvalidMatching(format!("index {x} out of range")));
                }
                if std::mem::replace(&mut seen[x], true) {
                    return Err(NsbError::InvalidMatching(format!("index {x} used twice")));
                }
            }
            norm.push((a.max(b), a.min(b)));
        }
        norm.sort_by_key(|&(_, lo)| lo);
        Ok(Self { d, pairs: norm })
    }

    /// Parse `"01,23"` (single-digit indices, `d ≤ 10`) or `"0:11,1:10,…"`.
    pub fn parse(d: usize, text: &str) -> Result<Self, NsbError> {
        let bad = |tok: &str| NsbError::Parse(format!("bad matching token {tok:?}"));
        let mut pairs = Vec::new();
        for tok in text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (a, b) = match tok.split_once(':') {
                Some((a, b)) => (
                    a.trim().parse().map_err(|_| bad(tok))?,
                    b.trim().parse().map_err(|_| bad(tok))?,
                ),
                None => {
                    let digits: Vec<usize> = tok
                        .chars()
                        .map(|c| c.to_digit(10).map(|v| v as usize))
                        .collect::<Option<_>>()
                        .ok_or_else(|| bad(tok))?;
                    match digits[..] {
                        [a, b] => (a, b),
                        _ => return Err(bad(tok)),
                    }
                }
            };
            pairs.push((a, b));
        }
        Self::new(d, &pairs)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Partner of index `i`.
    pub fn partner(&self, i: usize) -> usize {
        self.pairs
            .iter()
            .find_map(|&(a, b)| {
                if a == i {
                    Some(b)
                } else if b == i {
                    Some(a)
                } else {
                    None
                }
            })
            .expect("matching covers every index")
    }

    /// Entry of the induced permutation matrix.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i != j && self.partner(i) == j {
            1.0
        } else {
            0.0
        }
    }

    pub fn to_nsb(&self) -> NsbMatrix {
        let d = self.d;
        let e = (0..d * d).map(|k| self.entry(k / d, k % d)).collect();
        validate_flat(d, e, ROW_SUM_TOL).expect("matchings are NSB")
    }
}

impl fmt::Display for MatchingPermutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sep = if self.d > 10 { ":" } else { "" };
        let tokens: Vec<String> = self
            .pairs
            .iter()
            .map(|&(hi, lo)| format!("{lo}{sep}{hi}"))
            .collect();
        write!(f, "{}", tokens.join(","))
    }
}

/// All `(d−1)!!` perfect matchings, in lexicographic order of their sorted pair lists.
pub fn matchings(d: usize) -> Result<Vec<MatchingPermutation>, NsbError> {
    if d == 0 || d % 2 == 1 {
        return Err(NsbError::OddDimension(d));
    }
    let mut out = Vec::new();
    let mut used = vec![false; d];
    let mut current = Vec::with_capacity(d / 2);
    enumerate(d, &mut used, &mut current, &mut out);
    Ok(out)
}

fn enumerate(
    d: usize,
    used: &mut [bool],
    current: &mut Vec<(usize, usize)>,
    out: &mut Vec<MatchingPermutation>,
) {
    let Some(first) = used.iter().position(|u| !u) else {
        out.push(MatchingPermutation {
            d,
            pairs: current.clone(),
        });
        return;
    };
    used[first] = true;
    for partner in (first + 1)..d {
        if used[partner] {
            continue;
        }
        used[partner] = true;
        current.push((partner, first));
        enumerate(d, used, current, out);
        current.pop();
        used[partner] = false;
    }
    used[first] = false;
}

/// `(C + Cᵀ)/2` for the cyclic shift `C: i ↦ i + s mod d`. For odd `d` and
/// `0 < s < d/2` this is NSB with weight 1/2 on `(i, i ± s)`.
fn symmetrized_shift(d: usize, s: usize) -> NsbMatrix {
    let mut e = vec![0.0; d * d];
    for i in 0..d {
        e[i * d + (i + s) % d] += 0.5;
        e[i * d + (i + d - s) % d] += 0.5;
    }
    validate_flat(d, e, ROW_SUM_TOL).expect("symmetrized shifts are NSB for odd d")
}

fn simplex_weights<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Deterministic random NSB matrix.
///
/// Even `d`: a flat-Dirichlet convex combination of every perfect matching.
/// Odd `d`: a flat-Dirichlet combination of `canonical(d)` and the
/// symmetrized cyclic shifts. The odd-`d` sampler covers a convex subset of
/// the polytope, not all of it.
pub fn random_nsb(d: usize, seed: u64) -> Result<NsbMatrix, NsbError> {
    if d < 2 {
        return Err(NsbError::DimensionTooSmall(d));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let generators: Vec<NsbMatrix> = if d.is_multiple_of(2) {
        matchings(d)?
            .iter()
            .map(MatchingPermutation::to_nsb)
            .collect()
    } else {
        std::iter::once(canonical(d)?)
            .chain((1..=(d - 1) / 2).map(|s| symmetrized_shift(d, s)))
            .collect()
    };
    let weights = simplex_weights(generators.len(), &mut rng);
    let parts: Vec<(f64, &NsbMatrix)> = weights.into_iter().zip(&generators).collect();
    NsbMatrix::convex_combination(&parts)
}

/// Parse a real matrix from CSV text (one row per line) or matrix JSON.
///
/// JSON input must follow the complex matrix schema with zero imaginary parts.
pub fn parse_real_matrix(text: &str) -> Result<Vec<Vec<f64>>, NsbError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let m: ComplexMatrix =
            serde_json::from_str(trimmed).map_err(|e| NsbError::Parse(e.to_string()))?;
        let mut rows = Vec::with_capacity(m.rows());
        for r in 0..m.rows() {
            let mut row = Vec::with_capacity(m.cols());
            for c in 0..m.cols() {
                let z = m.get(r, c);
                if z.im != 0.0 {
                    return Err(NsbError::Parse(format!(
                        "entry ({r}, {c}) has nonzero imaginary part"
                    )));
                }
                row.push(z.re);
            }
            rows.push(row);
        }
        return Ok(rows);
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| NsbError::Parse(e.to_string()))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field
                    .parse::<f64>()
                    .map_err(|e| NsbError::Parse(format!("entry ({r}, {c}) = {field:?}: {e}")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Parse and validate an NSB matrix from CSV or JSON text.
pub fn load_nsb(text: &str, tol: f64) -> Result<NsbMatrix, NsbError> {
    validate(&parse_real_matrix(text)?, tol)
}

/// CSV rendering with full round-trip precision.
pub fn to_csv(b: &NsbMatrix) -> String {
    let mut out = String::new();
    for row in b.rows() {
        let cells: Vec<String> = row.iter().map(|x| format!("{x}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
