//! Square band matrices and their LU factorisation with partial pivoting.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row-major, `data[i * width + (j + kl − i)]`.
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandMatrix {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0, 0);
        m.data.iter_mut().for_each(|v| *v = 1.0);
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> usize {
        self.kl
    }

    pub fn upper(&self) -> usize {
        self.ku
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i >= self.n || j >= self.n || !self.in_band(i, j) {
            return 0.0;
        }
        self.data[i * self.width() + (j + self.kl - i)]
    }

    /// Panics outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i},{j}) outside band");
        let w = self.width();
        self.data[i * w + (j + self.kl - i)] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let cur = self.get(i, j);
        self.set(i, j, cur + v);
    }

    /// Column range of row `i` inside the band.
    fn row_span(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut acc = 0.0;
            for j in self.row_span(i) {
                acc += self.get(i, j) * x[j];
            }
            *yi = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// `self · other`.
    pub fn mul(&self, other: &BandMatrix) -> BandMatrix {
        assert_eq!(self.n, other.n);
        let mut out = BandMatrix::zeros(self.n, self.kl + other.kl, self.ku + other.ku);
        for i in 0..self.n {
            for k in self.row_span(i) {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in other.row_span(k) {
                    out.add(i, j, a * other.get(k, j));
                }
            }
        }
        out
    }

    /// `alpha·self + beta·other`, widening the band as needed.
    pub fn combine(&self, alpha: f64, other: &BandMatrix, beta: f64) -> BandMatrix {
        assert_eq!(self.n, other.n);
        let mut out = BandMatrix::zeros(self.n, self.kl.max(other.kl), self.ku.max(other.ku));
        for i in 0..self.n {
            for j in self.row_span(i) {
                out.add(i, j, alpha * self.get(i, j));
            }
            for j in other.row_span(i) {
                out.add(i, j, beta * other.get(i, j));
            }
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn lu(&self) -> Result<BandLu> {
        BandLu::factor(self)
    }

    /// `R A R` with `R` the index reversal.
    pub fn reversed(&self) -> BandMatrix {
        let mut out = BandMatrix::zeros(self.n, self.ku, self.kl);
        for i in 0..self.n {
            for j in self.row_span(i) {
                out.set(self.n - 1 - i, self.n - 1 - j, self.get(i, j));
            }
        }
        out
    }

    /// LU of the reversed matrix, so elimination starts at the last row.
    /// Preferable when the trailing rows are larger by many orders of
    /// magnitude: the final pivots then come from the small rows.
    pub fn lu_reversed(&self) -> Result<BandLu> {
        let mut lu = BandLu::factor(&self.reversed())?;
        lu.reversed = true;
        Ok(lu)
    }
}

/// LU factors in band storage with `kl` extra upper diagonals for fill-in.
#[derive(Clone, Debug)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
    reversed: bool,
}

impl BandLu {
    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width() + (j + self.kl - i)
    }

    fn factor(a: &BandMatrix) -> Result<Self> {
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        let mut lu = BandLu {
            n,
            kl,
            ku,
            data: vec![0.0; n * (2 * kl + ku + 1)],
            pivots: vec![0; n],
            reversed: false,
        };
        for i in 0..n {
            for j in a.row_span(i) {
                let k = lu.idx(i, j);
                lu.data[k] = a.get(i, j);
            }
        }
        let row_scale: Vec<f64> = (0..n)
            .map(|i| a.row_span(i).map(|j| a.get(i, j).abs()).fold(0.0, f64::max))
            .collect();
        let upper = kl + ku;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.data[lu.idx(k, k)].abs();
            for i in k + 1..=last {
                let v = lu.data[lu.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            let scale = row_scale[k..=last].iter().fold(0.0f64, |m, v| m.max(*v));
            if best == 0.0 || best <= f64::EPSILON * scale * 1e-6 {
                return Err(Error::SingularSystem(k));
            }
            lu.pivots[k] = p;
            let col_end = (k + upper).min(n - 1);
            if p != k {
                for j in k..=col_end {
                    let (x, y) = (lu.idx(k, j), lu.idx(p, j));
                    lu.data.swap(x, y);
                }
            }
            let d = lu.data[lu.idx(k, k)];
            for i in k + 1..=last {
                let ik = lu.idx(i, k);
                let l = lu.data[ik] / d;
                lu.data[ik] = l;
                if l != 0.0 {
                    for j in k + 1..=col_end {
                        let kj = lu.data[lu.idx(k, j)];
                        let ij = lu.idx(i, j);
                        lu.data[ij] -= l * kj;
                    }
                }
            }
        }
        Ok(lu)
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        if self.reversed {
            b.reverse();
        }
        self.solve_forward(b);
        if self.reversed {
            b.reverse();
        }
    }

    fn solve_forward(&self, b: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + self.kl).min(n - 1) {
                    b[i] -= self.data[self.idx(i, k)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut acc = b[k];
            for j in k + 1..=(k + self.kl + self.ku).min(n - 1) {
                acc -= self.data[self.idx(k, j)] * b[j];
            }
            b[k] = acc / self.data[self.idx(k, k)];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_band(n: usize, kl: usize, ku: usize, seed: &[f64]) -> BandMatrix {
        let mut m = BandMatrix::zeros(n, kl, ku);
        let mut k = 0;
        for i in 0..n {
            for j in i.saturating_sub(kl)..(i + ku + 1).min(n) {
                m.set(i, j, seed[k % seed.len()] + if i == j { 0.1 } else { 0.0 });
                k += 1;
            }
        }
        m
    }

    #[test]
    fn product_matches_dense() {
        let a = random_band(7, 1, 1, &[0.3, -1.2, 2.0, 0.7, -0.4]);
        let b = random_band(7, 1, 1, &[1.1, 0.5, -0.9]);
        let c = a.mul(&b);
        let (da, db) = (a.to_dense(), b.to_dense());
        for i in 0..7 {
            for j in 0..7 {
                let want: f64 = (0..7).map(|k| da[i][k] * db[k][j]).sum();
                assert!((c.get(i, j) - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let mut a = BandMatrix::zeros(3, 1, 1);
        a.set(0, 1, 1.0);
        a.set(1, 0, 1.0);
        a.set(1, 2, 2.0);
        a.set(2, 1, 3.0);
        a.set(2, 2, 1.0);
        let x = [1.0, -2.0, 0.5];
        let b = a.apply(&x);
        let got = a.lu().unwrap().solve(&b);
        for (g, w) in got.iter().zip(x) {
            assert!((g - w).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_detected() {
        let a = BandMatrix::zeros(4, 1, 1);
        assert!(matches!(a.lu(), Err(Error::SingularSystem(0))));
    }

    proptest! {
        #[test]
        fn solve_roundtrip(vals in proptest::collection::vec(-1.0f64..1.0, 30), n in 3usize..20) {
            let mut a = random_band(n, 2, 2, &vals);
            for i in 0..n {
                a.add(i, i, 6.0);
            }
            let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
            let b = a.apply(&x);
            let got = a.lu().unwrap().solve(&b);
            for (g, w) in got.iter().zip(&x) {
                prop_assert!((g - w).abs() < 1e-12);
            }
            let got = a.lu_reversed().unwrap().solve(&b);
            for (g, w) in got.iter().zip(&x) {
                prop_assert!((g - w).abs() < 1e-12);
            }
        }
    }
}
