/// Square tridiagonal matrix stored by diagonals.
///
/// Row `i` reads `lower[i] * x[i-1] + diag[i] * x[i] + upper[i] * x[i+1]`;
/// `lower[0]` and `upper[n-1]` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Self {
        assert!(lower.len() == diag.len() && upper.len() == diag.len());
        Tridiagonal { lower, diag, upper }
    }

    pub fn identity(n: usize) -> Self {
        Tridiagonal::new(vec![0.0; n], vec![1.0; n], vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// Entry `(row, col)`; zero off the three diagonals.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        if row == col {
            self.diag[row]
        } else if col + 1 == row {
            self.lower[row]
        } else if row + 1 == col {
            self.upper[row]
        } else {
            0.0
        }
    }

    /// Row `i` of `A x`.
    #[inline]
    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let n = self.len();
        let mut acc = self.diag[i] * x[i];
        if i > 0 {
            acc += self.lower[i] * x[i - 1];
        }
        if i + 1 < n {
            acc += self.upper[i] * x[i + 1];
        }
        acc
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|i| self.row_dot(i, x)).collect()
    }

    /// Rows where `|diag| <= |lower| + |upper|`.
    pub fn non_dominant_rows(&self) -> Vec<usize> {
        let n = self.len();
        (0..n)
            .filter(|&i| {
                let off =
                    if i > 0 { self.lower[i].abs() } else { 0.0 } + if i + 1 < n { self.upper[i].abs() } else { 0.0 };
                self.diag[i].abs() <= off
            })
            .collect()
    }

    /// Thomas algorithm. Stable for diagonally dominant matrices.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.len();
        assert_eq!(rhs.len(), n);
        if n == 0 {
            return Vec::new();
        }
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        c[0] = self.upper[0] / self.diag[0];
        d[0] = rhs[0] / self.diag[0];
        for i in 1..n {
            let denom = self.diag[i] - self.lower[i] * c[i - 1];
            c[i] = if i + 1 < n { self.upper[i] / denom } else { 0.0 };
            d[i] = (rhs[i] - self.lower[i] * d[i - 1]) / denom;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = d[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = d[i] - c[i] * x[i + 1];
        }
        x
    }
}
