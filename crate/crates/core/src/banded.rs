//! Banded matrices: LU with partial pivoting, and inertia counts for
//! symmetric banded matrices.

use nalgebra::DVector;

/// Row-major band storage with room for pivoting fill-in.
///
/// Entry `(i, j)` is stored when `-kl <= j - i <= kl + ku`; the extra `kl`
/// superdiagonals hold the fill produced by row interchanges.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPivot {
    pub row: usize,
    pub pivot: f64,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Declared `(kl, ku)`.
    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        let d = j as isize - i as isize;
        d >= -(self.kl as isize) && d <= (self.kl + self.ku) as isize
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i >= self.n || j >= self.n || !self.in_band(i, j) {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Adds `value` at `(i, j)`. Panics outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let d = j as isize - i as isize;
        assert!(
            d >= -(self.kl as isize) && d <= self.ku as isize,
            "entry ({i}, {j}) outside band kl={} ku={}",
            self.kl,
            self.ku
        );
        let k = self.idx(i, j);
        self.data[k] += value;
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let k = {
            assert!(self.in_band(i, j));
            self.idx(i, j)
        };
        self.data[k] = value;
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        self.data
            .chunks(self.width)
            .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.kl + self.ku).min(self.n - 1);
            (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
        })
    }

    /// LU factorisation with partial pivoting. Pivots with magnitude at or below
    /// `pivot_floor` are reported as singular.
    pub fn lu(mut self, pivot_floor: f64) -> Result<BandLu, SingularPivot> {
        let n = self.n;
        let mut perm = vec![0usize; n];
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for r in (k + 1)..=last {
                let v = self.get(r, k).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            perm[k] = p;
            if best <= pivot_floor {
                return Err(SingularPivot {
                    row: k,
                    pivot: self.get(p, k),
                });
            }
            let right = (k + self.kl + self.ku).min(n - 1);
            if p != k {
                for j in k..=right {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.get(k, k);
            for r in (k + 1)..=last {
                let ir = self.idx(r, k);
                let factor = self.data[ir] / pivot;
                if factor == 0.0 {
                    continue;
                }
                self.data[ir] = factor;
                for j in (k + 1)..=right {
                    let kj = self.data[self.idx(k, j)];
                    if kj != 0.0 {
                        let rj = self.idx(r, j);
                        self.data[rj] -= factor * kj;
                    }
                }
            }
        }
        Ok(BandLu { m: self, perm })
    }

    /// Number of negative pivots of an unpivoted LDL^T (equivalently LU)
    /// factorisation of the symmetric matrix `self - sigma I`. By Sylvester's
    /// law of inertia this counts eigenvalues below `sigma`.
    pub fn count_below(&self, sigma: f64) -> usize {
        let n = self.n;
        let b = self.kl;
        let mut a = self.clone();
        for i in 0..n {
            let k = a.idx(i, i);
            a.data[k] -= sigma;
        }
        let tiny = f64::EPSILON * f64::EPSILON * (1.0 + self.max_abs());
        let mut negatives = 0;
        for k in 0..n {
            let mut pivot = a.get(k, k);
            if pivot.abs() < tiny {
                pivot = -tiny;
                let kk = a.idx(k, k);
                a.data[kk] = pivot;
            }
            if pivot < 0.0 {
                negatives += 1;
            }
            let last = (k + b).min(n - 1);
            for r in (k + 1)..=last {
                let factor = a.get(r, k) / pivot;
                if factor == 0.0 {
                    continue;
                }
                for j in (k + 1)..=last {
                    let kj = a.get(k, j);
                    if kj != 0.0 {
                        let rj = a.idx(r, j);
                        a.data[rj] -= factor * kj;
                    }
                }
            }
        }
        negatives
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    perm: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let m = &self.m;
        let n = m.n;
        let mut x = rhs.clone();
        for k in 0..n {
            let p = self.perm[k];
            if p != k {
                x.swap_rows(k, p);
            }
            let last = (k + m.kl).min(n - 1);
            for r in (k + 1)..=last {
                let l = m.get(r, k);
                if l != 0.0 {
                    x[r] -= l * x[k];
                }
            }
        }
        for k in (0..n).rev() {
            let right = (k + m.kl + m.ku).min(n - 1);
            let mut s = x[k];
            for j in (k + 1)..=right {
                s -= m.get(k, j) * x[j];
            }
            x[k] = s / m.get(k, k);
        }
        x
    }
}
