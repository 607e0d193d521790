//! Banded LU factorization with partial pivoting.
//!
//! Storage follows the LAPACK `gbtrf` layout: column `c` holds rows
//! `c - ku - kl ..= c + kl`, leaving `kl` extra superdiagonals for the fill
//! produced by row interchanges.

use nalgebra::DMatrix;

/// Square band matrix with `kl` sub- and `ku` superdiagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        BandedMatrix {
            n,
            kl,
            ku,
            ldab,
            ab: vec![0.0; ldab * n],
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn kl(&self) -> usize {
        self.kl
    }

    #[inline]
    pub fn ku(&self) -> usize {
        self.ku
    }

    #[inline]
    fn slot(&self, r: usize, c: usize) -> usize {
        c * self.ldab + (self.kl + self.ku + r - c)
    }

    #[inline]
    pub fn in_band(&self, r: usize, c: usize) -> bool {
        r < self.n && c < self.n && r + self.ku >= c && c + self.kl >= r
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        if self.in_band(r, c) {
            self.ab[self.slot(r, c)]
        } else {
            0.0
        }
    }

    /// Panics if `(r, c)` lies outside the band.
    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        assert!(self.in_band(r, c), "({r}, {c}) outside band");
        let s = self.slot(r, c);
        self.ab[s] = v;
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        assert!(self.in_band(r, c), "({r}, {c}) outside band");
        let s = self.slot(r, c);
        self.ab[s] += v;
    }

    /// Row `r` as `(column, value)` pairs inside the band.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = r.saturating_sub(self.kl);
        let hi = (r + self.ku).min(self.n - 1);
        (lo..=hi).map(move |c| (c, self.ab[self.slot(r, c)]))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|r| self.row(r).map(|(c, a)| a * x[c]).sum())
            .collect()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|r| self.row(r).map(|(_, a)| a.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |r, c| self.get(r, c))
    }

    /// `self + s * I`
    pub fn shifted(&self, s: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            out.add(i, i, s);
        }
        out
    }

    /// `a * self + b * other` for matrices of identical shape.
    pub fn combine(&self, a: f64, other: &BandedMatrix, b: f64) -> Self {
        assert_eq!((self.n, self.kl, self.ku), (other.n, other.kl, other.ku));
        let mut out = self.clone();
        for (o, (x, y)) in out.ab.iter_mut().zip(self.ab.iter().zip(&other.ab)) {
            *o = a * x + b * y;
        }
        out
    }

    pub fn scale(&mut self, s: f64) {
        self.ab.iter_mut().for_each(|v| *v *= s);
    }

    /// In-place LU factorization (unblocked `gbtf2`).
    pub fn factor(mut self) -> Option<BandedLu> {
        let n = self.n;
        let kl = self.kl;
        let ku = self.ku;
        let mut piv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = 0;
            let mut best = self.ab[self.slot(j, j)].abs();
            for i in 1..=km {
                let v = self.ab[self.slot(j + i, j)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[j] = j + p;
            if best == 0.0 || !best.is_finite() {
                return None;
            }
            ju = ju.max((j + ku + p).min(n - 1));
            if p != 0 {
                for c in j..=ju {
                    let a = self.slot(j, c);
                    let b = self.slot(j + p, c);
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.ab[self.slot(j, j)];
            for i in 1..=km {
                let s = self.slot(j + i, j);
                self.ab[s] /= pivot;
            }
            for c in j + 1..=ju {
                let a = self.ab[self.slot(j, c)];
                if a != 0.0 {
                    for i in 1..=km {
                        let l = self.ab[self.slot(j + i, j)];
                        let s = self.slot(j + i, c);
                        self.ab[s] -= l * a;
                    }
                }
            }
        }
        Some(BandedLu { lu: self, piv })
    }

    /// Factor and solve in one go.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        let lu = self.clone().factor()?;
        let x = lu.solve(b);
        x.iter().all(|v| v.is_finite()).then_some(x)
    }

    /// Solve followed by `steps` rounds of iterative refinement.
    pub fn solve_refined(&self, b: &[f64], steps: usize) -> Option<Vec<f64>> {
        let lu = self.clone().factor()?;
        let mut x = lu.solve(b);
        for _ in 0..steps {
            let ax = self.matvec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let d = lu.solve(&r);
            x.iter_mut().zip(&d).for_each(|(x, d)| *x += d);
        }
        x.iter().all(|v| v.is_finite()).then_some(x)
    }
}

/// LU factors of a [`BandedMatrix`] with the row-interchange record.
#[derive(Debug, Clone)]
pub struct BandedLu {
    lu: BandedMatrix,
    piv: Vec<usize>,
}

impl BandedLu {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let m = &self.lu;
        let n = m.n;
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for j in 0..n {
            let p = self.piv[j];
            if p != j {
                x.swap(j, p);
            }
            let km = m.kl.min(n - 1 - j);
            let xj = x[j];
            if xj != 0.0 {
                for i in 1..=km {
                    x[j + i] -= m.ab[m.slot(j + i, j)] * xj;
                }
            }
        }
        let kv = m.kl + m.ku;
        for j in (0..n).rev() {
            x[j] /= m.ab[m.slot(j, j)];
            let xj = x[j];
            if xj != 0.0 {
                for r in j.saturating_sub(kv)..j {
                    x[r] -= m.ab[m.slot(r, j)] * xj;
                }
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: usize, kl: usize, ku: usize, seed: u64, dominant: bool) -> BandedMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = BandedMatrix::zeros(n, kl, ku);
        for r in 0..n {
            for c in r.saturating_sub(kl)..=(r + ku).min(n - 1) {
                a.set(r, c, rng.random_range(-1.0..1.0));
            }
            if dominant {
                a.add(r, r, 10.0);
            }
        }
        a
    }

    #[test]
    fn matches_dense_solve() {
        for (n, kl, ku) in [(1, 0, 0), (7, 1, 1), (40, 3, 2), (60, 5, 7)] {
            let a = random_band(n, kl, ku, n as u64, false);
            let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
            let x = a.solve(&b).unwrap();
            let r = a.matvec(&x);
            let err = r.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(err < 1e-10, "n={n} err={err}");
            let dense = a.to_dense().lu().solve(&nalgebra::DVector::from_vec(b.clone())).unwrap();
            for i in 0..n {
                assert!((dense[i] - x[i]).abs() < 1e-8 * (1.0 + x[i].abs()));
            }
        }
    }

    #[test]
    fn pivoting_needed() {
        // Zero on the diagonal forces a row interchange.
        let mut a = BandedMatrix::zeros(3, 1, 1);
        a.set(0, 0, 0.0);
        a.set(0, 1, 1.0);
        a.set(1, 0, 2.0);
        a.set(1, 1, 1.0);
        a.set(1, 2, 1.0);
        a.set(2, 1, 1.0);
        a.set(2, 2, 3.0);
        let x = a.solve(&[1.0, 4.0, 7.0]).unwrap();
        let r = a.matvec(&x);
        for (p, q) in r.iter().zip([1.0, 4.0, 7.0]) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_detected() {
        let a = BandedMatrix::zeros(4, 1, 1);
        assert!(a.factor().is_none());
    }

    #[test]
    fn shift_and_combine() {
        let a = random_band(10, 2, 2, 3, true);
        let s = a.shifted(2.0);
        assert_eq!(s.get(4, 4), a.get(4, 4) + 2.0);
        let c = a.combine(2.0, &a, -1.0);
        assert_eq!(c.get(3, 5), a.get(3, 5));
        assert_eq!(a.get(0, 9), 0.0);
    }
}
