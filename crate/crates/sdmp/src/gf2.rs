//! Bit vectors and Gaussian elimination over GF(2).
//!
//! Coefficient rows of the combination scheme live here, along with the
//! row-space machinery the leakage analysis needs: insert rows into a
//! basis, then test whether a unit vector lies in their span.

/// A fixed-width row vector over GF(2), packed into 64-bit words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitRow {
    width: usize,
    words: Vec<u64>,
}

impl BitRow {
    pub fn zero(width: usize) -> Self {
        Self {
            width,
            words: vec![0; width.div_ceil(64)],
        }
    }

    /// The unit vector with a single one at `bit`.
    pub fn unit(width: usize, bit: usize) -> Self {
        let mut row = Self::zero(width);
        row.set(bit);
        row
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn set(&mut self, bit: usize) {
        assert!(bit < self.width);
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        assert!(bit < self.width);
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Index of the lowest set bit, if any.
    pub fn first_set(&self) -> Option<usize> {
        for (i, &w) in self.words.iter().enumerate() {
            if w != 0 {
                return Some(i * 64 + w.trailing_zeros() as usize);
            }
        }
        None
    }

    pub fn xor_assign(&mut self, other: &BitRow) {
        assert_eq!(self.width, other.width);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }
}

/// A row basis over GF(2), kept in echelon form by pivot position.
#[derive(Debug, Default, Clone)]
pub struct Basis {
    // (pivot bit, row) sorted by pivot.
    rows: Vec<(usize, BitRow)>,
}

impl Basis {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduce `row` against the basis; the remainder has no pivot in common
    /// with any basis row.
    fn reduce(&self, mut row: BitRow) -> BitRow {
        for (pivot, basis_row) in &self.rows {
            if row.get(*pivot) {
                row.xor_assign(basis_row);
            }
        }
        row
    }

    /// Insert a row. Returns false when the row was already in the span.
    pub fn insert(&mut self, row: BitRow) -> bool {
        let reduced = self.reduce(row);
        match reduced.first_set() {
            None => false,
            Some(pivot) => {
                let at = self
                    .rows
                    .partition_point(|(p, _)| *p < pivot);
                self.rows.insert(at, (pivot, reduced));
                true
            }
        }
    }

    pub fn contains(&self, row: &BitRow) -> bool {
        self.reduce(row.clone()).is_zero()
    }
}

/// Rank of an arbitrary set of rows.
pub fn rank(rows: &[BitRow]) -> usize {
    let mut basis = Basis::new();
    for row in rows {
        basis.insert(row.clone());
    }
    basis.rank()
}
