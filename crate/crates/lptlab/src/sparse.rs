//! Compressed-row complex matrices, connected-component blocking and a banded LU.

use ndarray::Array2;

use crate::{LabError, Result, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<C64>,
}

impl CsrMatrix {
    /// Sums duplicate entries and drops exact zeros.
    pub fn from_triplets(n: usize, mut trips: Vec<(usize, usize, C64)>) -> Self {
        trips.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; n + 1];
        let mut indices = Vec::with_capacity(trips.len());
        let mut data: Vec<C64> = Vec::with_capacity(trips.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in trips {
            if last == Some((i, j)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(j);
                data.push(v);
                indptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            indptr[i + 1] += indptr[i];
        }
        let mut m = Self { n, indptr, indices, data };
        m.prune();
        m
    }

    pub fn from_dense(a: &Array2<C64>) -> Self {
        let n = a.nrows();
        let trips = a
            .indexed_iter()
            .filter(|(_, v)| **v != C64::new(0.0, 0.0))
            .map(|((i, j), v)| (i, j, *v))
            .collect();
        Self::from_triplets(n, trips)
    }

    fn prune(&mut self) {
        let zero = C64::new(0.0, 0.0);
        let mut indptr = vec![0usize; self.n + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut data = Vec::with_capacity(self.data.len());
        for i in 0..self.n {
            for k in self.indptr[i]..self.indptr[i + 1] {
                if self.data[k] != zero {
                    indices.push(self.indices[k]);
                    data.push(self.data[k]);
                }
            }
            indptr[i + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.data = data;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.indptr[i]..self.indptr[i + 1]).map(move |k| (self.indices[k], self.data[k]))
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let r = &self.indices[self.indptr[i]..self.indptr[i + 1]];
        match r.binary_search(&j) {
            Ok(k) => self.data[self.indptr[i] + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        for i in 0..self.n {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.indptr[i]..self.indptr[i + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            y[i] = acc;
        }
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.n];
        self.matvec(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> Array2<C64> {
        let mut a = Array2::zeros((self.n, self.n));
        for (i, j, v) in self.triplets() {
            a[[i, j]] = v;
        }
        a
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Maximum absolute row sum (induced ∞-norm).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn add_diagonal(&self, shift: C64) -> Self {
        let trips = self.triplets().chain((0..self.n).map(|i| (i, i, shift))).collect();
        Self::from_triplets(self.n, trips)
    }

    pub fn map_values(&self, f: impl Fn(C64) -> C64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = f(*v));
        out.prune();
        out
    }

    pub fn scale_add(&self, a: C64, other: &CsrMatrix, b: C64) -> Self {
        let trips = self
            .triplets()
            .map(|(i, j, v)| (i, j, a * v))
            .chain(other.triplets().map(|(i, j, v)| (i, j, b * v)))
            .collect();
        Self::from_triplets(self.n, trips)
    }

    pub fn matmul(&self, other: &CsrMatrix) -> Self {
        let mut trips = Vec::new();
        for i in 0..self.n {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    trips.push((i, j, a * b));
                }
            }
        }
        Self::from_triplets(self.n, trips)
    }

    /// Lower and upper bandwidths.
    pub fn bandwidth(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for (i, j, _) in self.triplets() {
            if i > j {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
        (kl, ku)
    }

    /// Connected components of the undirected sparsity graph, each sorted, ordered by first index.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (i, j, _) in self.triplets() {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut label = vec![usize::MAX; self.n];
        let mut comps: Vec<Vec<usize>> = Vec::new();
        for i in 0..self.n {
            let r = find(&mut parent, i);
            if label[r] == usize::MAX {
                label[r] = comps.len();
                comps.push(Vec::new());
            }
            comps[label[r]].push(i);
        }
        comps
    }

    /// Principal submatrix on sorted `idx`, as a sparse matrix in local numbering.
    pub fn submatrix(&self, idx: &[usize]) -> CsrMatrix {
        let mut local = vec![usize::MAX; self.n];
        for (k, &i) in idx.iter().enumerate() {
            local[i] = k;
        }
        let mut trips = Vec::new();
        for (k, &i) in idx.iter().enumerate() {
            for (j, v) in self.row(i) {
                if local[j] != usize::MAX {
                    trips.push((k, local[j], v));
                }
            }
        }
        CsrMatrix::from_triplets(idx.len(), trips)
    }
}

/// LU factorization with partial pivoting for banded matrices.
///
/// Row `i` keeps columns `i − kl ..= i + kl + ku` so that fill from row
/// interchanges fits without reallocation.
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<C64>,
    mult: Vec<C64>,
    piv: Vec<usize>,
    min_pivot: f64,
    max_pivot: f64,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n();
        let (kl, ku) = a.bandwidth();
        let width = 2 * kl + ku + 1;
        let mut band = vec![C64::new(0.0, 0.0); n * width];
        for (i, j, v) in a.triplets() {
            band[i * width + (j + kl - i)] = v;
        }
        let mut lu = Self {
            n,
            kl,
            ku,
            width,
            band,
            mult: vec![C64::new(0.0, 0.0); n * kl.max(1)],
            piv: vec![0; n],
            min_pivot: f64::INFINITY,
            max_pivot: 0.0,
        };
        lu.eliminate()?;
        Ok(lu)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn eliminate(&mut self) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = self.band[self.at(k, k)].norm();
            for i in k + 1..=last_row {
                let v = self.band[self.at(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            self.piv[k] = p;
            if best == 0.0 {
                return Err(LabError::Numerical(format!("banded LU: exactly singular at column {k}")));
            }
            self.min_pivot = self.min_pivot.min(best);
            self.max_pivot = self.max_pivot.max(best);
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.at(k, j), self.at(p, j));
                    self.band.swap(a, b);
                }
            }
            let pivot = self.band[self.at(k, k)];
            let inv = 1.0 / pivot;
            let row_k: Vec<C64> = (k + 1..=last_col).map(|j| self.band[self.at(k, j)]).collect();
            for i in k + 1..=last_row {
                let idx = self.at(i, k);
                let l = self.band[idx] * inv;
                self.band[idx] = C64::new(0.0, 0.0);
                self.mult[k * kl + (i - k - 1)] = l;
                if l == C64::new(0.0, 0.0) {
                    continue;
                }
                for (off, &u) in row_k.iter().enumerate() {
                    let j = k + 1 + off;
                    let t = self.at(i, j);
                    self.band[t] -= l * u;
                }
            }
        }
        Ok(())
    }

    /// Ratio of smallest to largest pivot magnitude (a cheap singularity indicator).
    pub fn pivot_ratio(&self) -> f64 {
        self.min_pivot / self.max_pivot
    }

    pub fn solve_in_place(&self, b: &mut [C64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            let last_row = (k + kl).min(n - 1);
            for i in k + 1..=last_row {
                b[i] -= self.mult[k * kl + (i - k - 1)] * bk;
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + kl + ku).min(n - 1);
            let mut acc = b[k];
            for j in k + 1..=last_col {
                acc -= self.band[self.at(k, j)] * b[j];
            }
            b[k] = acc / self.band[self.at(k, k)];
        }
    }
}
