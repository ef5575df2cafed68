//! Small exact linear algebra over the rationals: incremental rank and
//! null spaces, enough for linear-independence certificates and face
//! computations.

use crate::scalar::Scalar;

/// Incremental row-echelon basis. Rows are inserted one at a time; the
/// basis keeps reduced pivot rows so rank queries and null spaces are exact.
#[derive(Debug, Clone, Default)]
pub struct RowBasis {
    rows: Vec<Vec<Scalar>>,     // echelon rows, normalized to pivot 1
    pivots: Vec<usize>,         // pivot column per row
}

impl RowBasis {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduces `row` against the basis; inserts it if independent.
    /// Returns true when the rank grew.
    pub fn insert(&mut self, mut row: Vec<Scalar>) -> bool {
        for (basis_row, &pivot) in self.rows.iter().zip(&self.pivots) {
            if !row[pivot].is_zero() {
                let factor = row[pivot].clone();
                for (r, b) in row.iter_mut().zip(basis_row) {
                    *r = &*r - &(&factor * b);
                }
            }
        }
        match row.iter().position(|v| !v.is_zero()) {
            Some(pivot) => {
                let lead = row[pivot].clone();
                for v in row.iter_mut() {
                    *v = &*v / &lead;
                }
                self.rows.push(row);
                self.pivots.push(pivot);
                true
            }
            None => false,
        }
    }

    /// A basis of the space orthogonal to all inserted rows (standard
    /// free-variable construction on the echelon form).
    pub fn null_space(&self, dim: usize) -> Vec<Vec<Scalar>> {
        let mut is_pivot = vec![false; dim];
        for &p in &self.pivots {
            is_pivot[p] = true;
        }
        let mut basis = Vec::new();
        for free in 0..dim {
            if is_pivot[free] {
                continue;
            }
            // Solve for pivot variables with x_free = 1, other free = 0.
            let mut vec = vec![Scalar::zero(); dim];
            vec[free] = Scalar::one();
            // Back-substitute rows in reverse pivot order.
            let mut order: Vec<usize> = (0..self.rows.len()).collect();
            order.sort_by_key(|&i| std::cmp::Reverse(self.pivots[i]));
            for i in order {
                let p = self.pivots[i];
                let mut acc = Scalar::zero();
                for (j, item) in vec.iter().enumerate().skip(p + 1) {
                    if !item.is_zero() && !self.rows[i][j].is_zero() {
                        acc = acc + &self.rows[i][j] * item;
                    }
                }
                vec[p] = -acc;
            }
            basis.push(vec);
        }
        basis
    }
}

/// Exact rank of a family of rational vectors.
pub fn rank(rows: impl IntoIterator<Item = Vec<Scalar>>) -> usize {
    let mut basis = RowBasis::new();
    for row in rows {
        basis.insert(row);
    }
    basis.rank()
}
