//! Symmetric positive-definite banded systems via Cholesky factorization.

/// Lower band of a symmetric matrix: `lower[i][k]` holds entry `(i, i - k)`.
#[derive(Debug, Clone)]
pub(crate) struct BandedMatrix {
    n: usize,
    bw: usize,
    lower: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedMatrix { n, bw, lower: vec![0.0; n * (bw + 1)] }
    }

    fn idx(&self, i: usize, k: usize) -> usize {
        i * (self.bw + 1) + k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            return 0.0;
        }
        self.lower[self.idx(i, i - j)]
    }

    /// Adds `v` to entries `(i, j)` and `(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(i - j <= self.bw, "entry outside band");
        let k = self.idx(i, i - j);
        self.lower[k] += v;
    }

    pub fn add_diagonal(&mut self, v: f64) {
        for i in 0..self.n {
            let k = self.idx(i, 0);
            self.lower[k] += v;
        }
    }

    /// Zeroes row and column `i` and puts 1 on the diagonal.
    pub fn pin(&mut self, i: usize) {
        for j in i.saturating_sub(self.bw)..(i + self.bw + 1).min(self.n) {
            if j != i {
                let (a, b) = if i >= j { (i, j) } else { (j, i) };
                let k = self.idx(a, a - b);
                self.lower[k] = 0.0;
            }
        }
        let k = self.idx(i, 0);
        self.lower[k] = 1.0;
    }

    /// Solves `A x = b` in place. Returns `false` if `A` is not numerically
    /// positive definite.
    pub fn solve(&self, b: &mut [f64]) -> bool {
        let (n, bw) = (self.n, self.bw);
        let mut l = vec![0.0; n * (bw + 1)];
        for j in 0..n {
            let mut d = self.get(j, j);
            for k in 1..=bw.min(j) {
                let v = l[self.idx(j, k)];
                d -= v * v;
            }
            if !(d > 0.0) || !d.is_finite() {
                return false;
            }
            let dj = d.sqrt();
            l[self.idx(j, 0)] = dj;
            for i in j + 1..(j + bw + 1).min(n) {
                let mut s = self.get(i, j);
                // sum over m < j of L[i][m] * L[j][m]
                let lo = i.saturating_sub(bw);
                for m in lo..j {
                    s -= l[self.idx(i, i - m)] * l[self.idx(j, j - m)];
                }
                l[self.idx(i, i - j)] = s / dj;
            }
        }
        // Forward: L y = b
        for i in 0..n {
            let mut s = b[i];
            for m in i.saturating_sub(bw)..i {
                s -= l[self.idx(i, i - m)] * b[m];
            }
            b[i] = s / l[self.idx(i, 0)];
        }
        // Backward: L^T x = y
        for i in (0..n).rev() {
            let mut s = b[i];
            for m in i + 1..(i + bw + 1).min(n) {
                s -= l[self.idx(m, m - i)] * b[m];
            }
            b[i] = s / l[self.idx(i, 0)];
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_dense_solution() {
        // Pentadiagonal SPD matrix; compare A x against b.
        let n = 9;
        let mut a = BandedMatrix::zeros(n, 2);
        for i in 0..n {
            a.add(i, i, 6.0 + i as f64);
            if i >= 1 {
                a.add(i, i - 1, -1.5);
            }
            if i >= 2 {
                a.add(i, i - 2, 0.7);
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 1.0).collect();
        let mut x = b.clone();
        assert!(a.solve(&mut x));
        for i in 0..n {
            let ax: f64 = (0..n).map(|j| a.get(i, j) * x[j]).sum();
            assert!((ax - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_indefinite() {
        let mut a = BandedMatrix::zeros(2, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, 1.0);
        a.add(1, 0, 2.0);
        assert!(!a.solve(&mut [1.0, 1.0]));
    }
}
