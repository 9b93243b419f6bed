//! Dense small tensors indexed by frame labels.

use std::ops::{Index, IndexMut};

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tensor3 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize) -> Self {
        Tensor3 {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Tensor3::zeros(n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    t[(a, b, c)] = f(a, b, c);
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Entries in row-major `(a, b, c)` order.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize, usize), f64)> + '_ {
        let n = self.n;
        self.data
            .iter()
            .enumerate()
            .map(move |(idx, v)| ((idx / (n * n), (idx / n) % n, idx % n), *v))
    }

    /// Largest entrywise deviation and where it occurs.
    pub fn max_abs_diff(&self, other: &Tensor3) -> (f64, (usize, usize, usize)) {
        assert_eq!(self.n, other.n);
        let mut worst = (0.0, (0, 0, 0));
        for (idx, v) in self.iter() {
            let d = (v - other[idx]).abs();
            if d > worst.0 || d.is_nan() {
                worst = (d, idx);
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;
    fn index(&self, (a, b, c): (usize, usize, usize)) -> &f64 {
        &self.data[(a * self.n + b) * self.n + c]
    }
}

impl IndexMut<(usize, usize, usize)> for Tensor3 {
    fn index_mut(&mut self, (a, b, c): (usize, usize, usize)) -> &mut f64 {
        &mut self.data[(a * self.n + b) * self.n + c]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tensor4 {
    n: usize,
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(n: usize) -> Self {
        Tensor4 {
            n,
            data: vec![0.0; n * n * n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize, usize, usize), f64)> + '_ {
        let n = self.n;
        self.data.iter().enumerate().map(move |(idx, v)| {
            (
                (
                    idx / (n * n * n),
                    (idx / (n * n)) % n,
                    (idx / n) % n,
                    idx % n,
                ),
                *v,
            )
        })
    }

    pub fn max_abs_diff(&self, other: &Tensor4) -> (f64, (usize, usize, usize, usize)) {
        assert_eq!(self.n, other.n);
        let mut worst = (0.0, (0, 0, 0, 0));
        for (idx, v) in self.iter() {
            let d = (v - other[idx]).abs();
            if d > worst.0 || d.is_nan() {
                worst = (d, idx);
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<(usize, usize, usize, usize)> for Tensor4 {
    type Output = f64;
    fn index(&self, (a, b, c, d): (usize, usize, usize, usize)) -> &f64 {
        &self.data[((a * self.n + b) * self.n + c) * self.n + d]
    }
}

impl IndexMut<(usize, usize, usize, usize)> for Tensor4 {
    fn index_mut(&mut self, (a, b, c, d): (usize, usize, usize, usize)) -> &mut f64 {
        &mut self.data[((a * self.n + b) * self.n + c) * self.n + d]
    }
}
