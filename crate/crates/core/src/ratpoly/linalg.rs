//! Exact linear algebra over the rationals.
//!
//! Dense routines use fraction-free (Bareiss) elimination: every intermediate
//! entry is a minor of the original integer matrix, so divisions are exact and
//! no rational blow-up occurs. The sparse engine used for large orthogonality
//! systems keeps primitive integer rows and a companion modular echelon that
//! selects a maximal independent row set before the exact pass.

use std::collections::HashSet;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::scalar::ExactScalar;

/// Row-major rational matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Vec<ExactScalar>>,
}

impl RatMatrix {
    pub fn new(data: Vec<Vec<ExactScalar>>, cols: usize) -> Self {
        assert!(data.iter().all(|r| r.len() == cols), "ragged matrix");
        Self {
            rows: data.len(),
            cols,
            data,
        }
    }

    pub fn from_rows(data: Vec<Vec<ExactScalar>>) -> Self {
        let cols = data.first().map_or(0, Vec::len);
        Self::new(data, cols)
    }

    pub fn from_i64(rows: &[&[i64]]) -> Self {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| ExactScalar::from_int(x)).collect())
                .collect(),
        )
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(vec![vec![ExactScalar::zero(); cols]; rows], cols)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i][i] = ExactScalar::one();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[ExactScalar] {
        &self.data[i]
    }

    pub fn get(&self, i: usize, j: usize) -> &ExactScalar {
        &self.data[i][j]
    }

    pub fn transpose(&self) -> Self {
        let data = (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.data[i][j].clone()).collect())
            .collect();
        Self::new(data, self.rows)
    }

    pub fn mul_vec(&self, x: &[ExactScalar]) -> Vec<ExactScalar> {
        assert_eq!(x.len(), self.cols);
        self.data
            .iter()
            .map(|r| r.iter().zip(x).fold(ExactScalar::zero(), |acc, (a, b)| acc + a * b))
            .collect()
    }
}

/// Scales a rational row by the lcm of its denominators.
fn integer_row(row: &[ExactScalar]) -> Vec<BigInt> {
    let lcm = row.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    row.iter().map(|x| x.numer() * (&lcm / x.denom())).collect()
}

/// Fraction-free echelon form; returns the pivot `(row, col)` positions.
fn bareiss(a: &mut [Vec<BigInt>], cols: usize) -> Vec<usize> {
    let rows = a.len();
    let mut pivots = Vec::new();
    let mut prev = BigInt::one();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, p);
        let (top, rest) = a.split_at_mut(r + 1);
        let pivot_row = &top[r];
        for row in rest.iter_mut() {
            let lead = std::mem::take(&mut row[c]);
            for j in c + 1..cols {
                let v = &pivot_row[c] * &row[j] - &lead * &pivot_row[j];
                row[j] = v / &prev;
            }
        }
        prev = pivot_row[c].clone();
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Rank over ℚ.
pub fn exact_rank(m: &RatMatrix) -> usize {
    if m.rows == 0 || m.cols == 0 {
        return 0;
    }
    let mut a: Vec<Vec<BigInt>> = m.data.iter().map(|r| integer_row(r)).collect();
    bareiss(&mut a, m.cols).len()
}

/// Basis of the right nullspace. Each basis vector has a `1` at its own free
/// column and `0` at every other free column.
pub fn exact_nullspace(m: &RatMatrix) -> Vec<Vec<ExactScalar>> {
    if m.cols == 0 {
        return Vec::new();
    }
    let mut a: Vec<Vec<BigInt>> = m.data.iter().map(|r| integer_row(r)).collect();
    let pivots = bareiss(&mut a, m.cols);
    let echelon: Vec<(usize, Vec<(usize, BigInt)>)> = pivots
        .iter()
        .enumerate()
        .map(|(i, &pc)| {
            let entries = (pc..m.cols)
                .filter(|&j| !a[i][j].is_zero())
                .map(|j| (j, a[i][j].clone()))
                .collect();
            (pc, entries)
        })
        .collect();
    back_substitute(m.cols, &echelon)
}

/// Solves for one nullspace vector per free column of an echelon system given
/// as `(pivot column, sorted entries)` rows with distinct pivot columns.
fn back_substitute(cols: usize, echelon: &[(usize, Vec<(usize, BigInt)>)]) -> Vec<Vec<ExactScalar>> {
    let pivot_cols: HashSet<usize> = echelon.iter().map(|(c, _)| *c).collect();
    let mut order: Vec<usize> = (0..echelon.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(echelon[i].0));
    let free: Vec<usize> = (0..cols).filter(|c| !pivot_cols.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut x = vec![ExactScalar::zero(); cols];
            x[f] = ExactScalar::one();
            for &i in &order {
                let (pc, entries) = &echelon[i];
                let mut acc = ExactScalar::zero();
                let mut lead = None;
                for (j, v) in entries {
                    if j == pc {
                        lead = Some(v);
                    } else if !x[*j].is_zero() {
                        acc += &(&x[*j] * &ExactScalar::from(v.clone()));
                    }
                }
                let lead = ExactScalar::from(lead.expect("pivot entry").clone());
                x[*pc] = -(acc / lead);
            }
            x
        })
        .collect()
}

/// Sparse integer row with strictly increasing column indices and nonzero
/// entries.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SparseRow {
    entries: Vec<(usize, BigInt)>,
}

impl SparseRow {
    /// Builds a primitive integer row from rational entries (any order,
    /// duplicates summed).
    pub fn from_rational(mut entries: Vec<(usize, ExactScalar)>) -> Self {
        entries.sort_by_key(|(c, _)| *c);
        let mut merged: Vec<(usize, ExactScalar)> = Vec::with_capacity(entries.len());
        for (c, v) in entries {
            match merged.last_mut() {
                Some((lc, lv)) if *lc == c => *lv += &v,
                _ => merged.push((c, v)),
            }
        }
        merged.retain(|(_, v)| !v.is_zero());
        let lcm = merged.iter().fold(BigInt::one(), |acc, (_, x)| acc.lcm(x.denom()));
        let mut row = Self {
            entries: merged
                .into_iter()
                .map(|(c, x)| (c, x.numer() * (&lcm / x.denom())))
                .collect(),
        };
        row.make_primitive();
        row
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, BigInt)] {
        &self.entries
    }

    fn lead(&self) -> Option<&(usize, BigInt)> {
        self.entries.first()
    }

    fn make_primitive(&mut self) {
        let mut g = BigInt::zero();
        for (_, v) in &self.entries {
            g = g.gcd(v);
            if g.is_one() {
                break;
            }
        }
        if !g.is_zero() && !g.is_one() {
            for (_, v) in &mut self.entries {
                *v /= &g;
            }
        }
        if let Some((_, v)) = self.entries.first() {
            if v.is_negative() {
                for (_, v) in &mut self.entries {
                    *v = -&*v;
                }
            }
        }
    }

    /// `a·self − b·other`, where both share their lead column; the result
    /// has that column eliminated.
    fn eliminate(&self, other: &SparseRow) -> SparseRow {
        let (c0, a0) = self.lead().expect("nonempty");
        let (c1, b0) = other.lead().expect("nonempty");
        debug_assert_eq!(c0, c1);
        let g = a0.gcd(b0);
        let a = b0 / &g;
        let b = a0 / &g;
        // self·a − other·b where self.lead·a == other.lead·b.
        let mut out = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut i, mut j) = (1, 1);
        while i < self.entries.len() || j < other.entries.len() {
            let ci = self.entries.get(i).map(|e| e.0).unwrap_or(usize::MAX);
            let cj = other.entries.get(j).map(|e| e.0).unwrap_or(usize::MAX);
            if ci < cj {
                out.push((ci, &self.entries[i].1 * &a));
                i += 1;
            } else if cj < ci {
                out.push((cj, -(&other.entries[j].1 * &b)));
                j += 1;
            } else {
                let v = &self.entries[i].1 * &a - &other.entries[j].1 * &b;
                if !v.is_zero() {
                    out.push((ci, v));
                }
                i += 1;
                j += 1;
            }
        }
        let mut row = SparseRow { entries: out };
        row.make_primitive();
        row
    }
}

/// Incremental fraction-free row echelon over ℤ with distinct pivot columns.
#[derive(Clone, Debug)]
pub struct IntEchelon {
    cols: usize,
    rows: Vec<SparseRow>,
    pivot_of: Vec<Option<usize>>,
}

impl IntEchelon {
    pub fn new(cols: usize) -> Self {
        Self {
            cols,
            rows: Vec::new(),
            pivot_of: vec![None; cols],
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Grows the column count (new columns start empty).
    pub fn extend_cols(&mut self, cols: usize) {
        if cols > self.cols {
            self.pivot_of.resize(cols, None);
            self.cols = cols;
        }
    }

    /// Reduces `row` until its lead column carries no pivot.
    pub fn reduce(&self, mut row: SparseRow) -> SparseRow {
        while let Some(&(c, _)) = row.lead() {
            match self.pivot_of[c] {
                Some(k) => row = row.eliminate(&self.rows[k]),
                None => break,
            }
        }
        row
    }

    /// Inserts `row`; returns `true` when it increased the rank.
    pub fn insert(&mut self, row: SparseRow) -> bool {
        debug_assert!(row.entries.iter().all(|(c, _)| *c < self.cols));
        let row = self.reduce(row);
        match row.lead() {
            None => false,
            Some(&(c, _)) => {
                self.pivot_of[c] = Some(self.rows.len());
                self.rows.push(row);
                true
            }
        }
    }

    pub fn nullspace(&self) -> Vec<Vec<ExactScalar>> {
        let echelon: Vec<_> = self.rows.iter().map(|r| (r.entries[0].0, r.entries.clone())).collect();
        back_substitute(self.cols, &echelon)
    }
}

/// Mersenne prime 2^61 − 1.
pub const MODULUS: u64 = (1 << 61) - 1;

fn mul_mod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % MODULUS as u128) as u64
}

fn pow_mod(mut a: u64, mut e: u64) -> u64 {
    let mut acc = 1;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, a);
        }
        a = mul_mod(a, a);
        e >>= 1;
    }
    acc
}

fn inv_mod(a: u64) -> u64 {
    pow_mod(a, MODULUS - 2)
}

fn bigint_mod(x: &BigInt) -> u64 {
    let m = BigInt::from(MODULUS);
    let r = x.mod_floor(&m);
    r.to_u64().expect("reduced")
}

/// Image of a rational in 𝔽_p, or `None` when the denominator vanishes mod p.
pub fn rational_mod(x: &ExactScalar) -> Option<u64> {
    let d = bigint_mod(x.denom());
    if d == 0 {
        return None;
    }
    Some(mul_mod(bigint_mod(x.numer()), inv_mod(d)))
}

/// Incremental echelon over 𝔽_p with monic pivot rows.
#[derive(Clone, Debug)]
pub struct ModEchelon {
    rows: Vec<Vec<(usize, u64)>>,
    pivot_of: Vec<Option<usize>>,
}

impl ModEchelon {
    pub fn new(cols: usize) -> Self {
        Self {
            rows: Vec::new(),
            pivot_of: vec![None; cols],
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Inserts a row given by its (sorted, nonzero) entries mod p.
    pub fn insert(&mut self, mut row: Vec<(usize, u64)>) -> bool {
        while let Some(&(c, v)) = row.first() {
            let Some(k) = self.pivot_of[c] else { break };
            let pivot = &self.rows[k];
            let f = MODULUS - v;
            let mut out = Vec::with_capacity(row.len() + pivot.len());
            let (mut i, mut j) = (1, 1);
            while i < row.len() || j < pivot.len() {
                let ci = row.get(i).map(|e| e.0).unwrap_or(usize::MAX);
                let cj = pivot.get(j).map(|e| e.0).unwrap_or(usize::MAX);
                if ci < cj {
                    out.push(row[i]);
                    i += 1;
                } else if cj < ci {
                    out.push((cj, mul_mod(f, pivot[j].1)));
                    j += 1;
                } else {
                    let s = (row[i].1 + mul_mod(f, pivot[j].1)) % MODULUS;
                    if s != 0 {
                        out.push((ci, s));
                    }
                    i += 1;
                    j += 1;
                }
            }
            row = out;
        }
        match row.first() {
            None => false,
            Some(&(c, v)) => {
                let inv = inv_mod(v);
                for e in &mut row {
                    e.1 = mul_mod(e.1, inv);
                }
                self.pivot_of[c] = Some(self.rows.len());
                self.rows.push(row);
                true
            }
        }
    }
}

/// Converts a primitive integer row to 𝔽_p.
pub fn row_mod(row: &SparseRow) -> Vec<(usize, u64)> {
    row.entries
        .iter()
        .filter_map(|(c, v)| {
            let m = bigint_mod(v);
            (m != 0).then_some((*c, m))
        })
        .collect()
}

/// Outcome of a sparse nullspace computation.
#[derive(Clone, Debug)]
pub struct SparseNullspace {
    pub basis: Vec<Vec<ExactScalar>>,
    pub rank: usize,
    /// Rank seen modulo p; equal to `rank` unless p was unlucky.
    pub modular_rank: usize,
}

/// Right nullspace of the sparse system `rows · x = 0` over `cols` unknowns.
///
/// Rows independent mod p are independent over ℚ, so a modular pass picks at
/// most `cols` rows; when it already reaches full column rank the nullspace is
/// trivially empty. Otherwise the selected rows are eliminated exactly. With
/// `all_rows` set, every row is eliminated exactly (used as a fallback when
/// the modular selection proved insufficient).
pub fn sparse_nullspace(cols: usize, rows: &[SparseRow], all_rows: bool) -> SparseNullspace {
    let mut modular = ModEchelon::new(cols);
    let mut selected = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        if modular.rank() == cols {
            break;
        }
        if modular.insert(row_mod(r)) {
            selected.push(i);
        }
    }
    let modular_rank = modular.rank();
    if modular_rank == cols {
        return SparseNullspace {
            basis: Vec::new(),
            rank: cols,
            modular_rank,
        };
    }
    let mut exact = IntEchelon::new(cols);
    if all_rows {
        for r in rows {
            if exact.rank() == cols {
                break;
            }
            exact.insert(r.clone());
        }
    } else {
        for &i in &selected {
            let grew = exact.insert(rows[i].clone());
            debug_assert!(grew, "row independent mod p must be independent over Q");
        }
    }
    SparseNullspace {
        basis: exact.nullspace(),
        rank: exact.rank(),
        modular_rank,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> ExactScalar {
        ExactScalar::from_int(n)
    }

    #[test]
    fn rank_examples() {
        assert_eq!(exact_rank(&RatMatrix::from_i64(&[&[1, 2], &[2, 4]])), 1);
        assert_eq!(exact_rank(&RatMatrix::identity(3)), 3);
        assert_eq!(exact_rank(&RatMatrix::zeros(2, 5)), 0);
    }

    #[test]
    fn nullspace_examples() {
        let ns = exact_nullspace(&RatMatrix::from_i64(&[&[1, 1]]));
        assert_eq!(ns, vec![vec![q(-1), q(1)]]);
        assert!(exact_nullspace(&RatMatrix::identity(2)).is_empty());
        let m = RatMatrix::from_i64(&[&[1, 2, 3]]);
        let ns = exact_nullspace(&m);
        assert_eq!(ns.len(), 2);
        for b in &ns {
            assert!(m.mul_vec(b).iter().all(ExactScalar::is_zero));
        }
    }

    #[test]
    fn sparse_matches_dense() {
        let m = RatMatrix::from_i64(&[&[1, 2, 3, 0], &[2, 4, 6, 0], &[0, 1, 0, 1]]);
        let rows: Vec<SparseRow> = (0..m.rows())
            .map(|i| SparseRow::from_rational(m.row(i).iter().cloned().enumerate().collect()))
            .collect();
        for all in [false, true] {
            let ns = sparse_nullspace(4, &rows, all);
            assert_eq!(ns.rank, 2);
            assert_eq!(ns.basis.len(), 2);
            for b in &ns.basis {
                assert!(m.mul_vec(b).iter().all(ExactScalar::is_zero));
            }
        }
    }

    #[test]
    fn rational_rows_are_cleared() {
        let r = SparseRow::from_rational(vec![
            (2, ExactScalar::ratio(-1, 2)),
            (0, ExactScalar::ratio(1, 3)),
            (2, ExactScalar::ratio(-1, 2)),
        ]);
        assert_eq!(r.entries(), &[(0, BigInt::from(1)), (2, BigInt::from(-3))]);
        assert_eq!(rational_mod(&ExactScalar::ratio(1, 2)).map(|x| mul_mod(x, 2)), Some(1));
    }
}
