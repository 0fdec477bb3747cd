use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Rows above this many output entries are computed on the rayon pool.
const PAR_THRESHOLD: usize = 1 << 14;

/// Compressed sparse row matrix, square, used for per-relation adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    pub fn identity(n: usize) -> Self {
        Csr {
            n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Symmetric 0/1 matrix from unordered pairs. Pairs must already be deduplicated
    /// and free of self-pairs.
    pub fn symmetric_from_pairs(n: usize, pairs: &[(usize, usize)]) -> Self {
        let mut degree = vec![0usize; n];
        for &(a, b) in pairs {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut indptr = Vec::with_capacity(n + 1);
        indptr.push(0);
        for d in &degree {
            indptr.push(indptr.last().unwrap() + d);
        }
        let nnz = *indptr.last().unwrap();
        let mut fill = indptr[..n].to_vec();
        let mut indices = vec![0usize; nnz];
        for &(a, b) in pairs {
            indices[fill[a]] = b;
            fill[a] += 1;
            indices[fill[b]] = a;
            fill[b] += 1;
        }
        for i in 0..n {
            indices[indptr[i]..indptr[i + 1]].sort_unstable();
        }
        Csr {
            n,
            indptr,
            indices,
            values: vec![1.0; nnz],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn row_indices(&self, i: usize) -> &[usize] {
        &self.indices[self.indptr[i]..self.indptr[i + 1]]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let cols = self.row_indices(i);
        match cols.binary_search(&j) {
            Ok(pos) => self.values[self.indptr[i] + pos],
            Err(_) => 0.0,
        }
    }

    /// Upper-triangle pairs (i < j), i.e. each undirected edge once.
    pub fn upper_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.nnz() / 2);
        for i in 0..self.n {
            for &j in self.row_indices(i) {
                if i < j {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Same sparsity pattern with every stored value set to 1.
    pub fn structure(&self) -> Self {
        Csr {
            values: vec![1.0; self.values.len()],
            ..self.clone()
        }
    }

    /// `D^{-1/2} A D^{-1/2}` with degrees taken from this matrix.
    pub fn sym_normalized(&self) -> Self {
        let deg: Vec<f64> = (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum::<f64>()).collect();
        let mut values = Vec::with_capacity(self.values.len());
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                values.push(v / (deg[i].sqrt() * deg[j].sqrt()));
            }
        }
        Csr { values, ..self.clone() }
    }

    /// Principal submatrix on `nodes` (given in the order of the new indices).
    pub fn submatrix(&self, nodes: &[usize]) -> Self {
        let mut local = vec![usize::MAX; self.n];
        for (k, &g) in nodes.iter().enumerate() {
            local[g] = k;
        }
        let mut indptr = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for &g in nodes {
            let mut row: Vec<(usize, f64)> = self
                .row(g)
                .filter(|&(j, _)| local[j] != usize::MAX)
                .map(|(j, v)| (local[j], v))
                .collect();
            row.sort_unstable_by_key(|&(j, _)| j);
            for (j, v) in row {
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Csr {
            n: nodes.len(),
            indptr,
            indices,
            values,
        }
    }

    /// `self · x`. Each output row is an ordered sum over the stored row, so the
    /// result does not depend on the thread count.
    pub fn matmul(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.nrows() != self.n {
            return Err(Error::Dimension(format!(
                "adjacency is {}x{}, features have {} rows",
                self.n,
                self.n,
                x.nrows()
            )));
        }
        let cols = x.ncols();
        let mut out = Array2::<f64>::zeros((self.n, cols));
        if cols == 0 {
            return Ok(out);
        }
        let kernel = |(i, row): (usize, &mut [f64])| {
            for (j, v) in self.row(i) {
                for (o, x) in row.iter_mut().zip(x.row(j).iter()) {
                    *o += v * x;
                }
            }
        };
        let data = out.as_slice_mut().expect("fresh array is contiguous");
        if self.n * cols >= PAR_THRESHOLD {
            data.par_chunks_mut(cols).enumerate().for_each(kernel);
        } else {
            data.chunks_mut(cols).enumerate().for_each(kernel);
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut d = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[[i, j]] = v;
            }
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn path_graph_hand_sum() {
        let a = Csr::symmetric_from_pairs(3, &[(0, 1), (1, 2)]);
        let x = array![[1.0], [2.0], [3.0]];
        let y = a.matmul(x.view()).unwrap();
        assert_eq!(y, array![[2.0], [4.0], [2.0]]);
    }

    #[test]
    fn identity_is_noop() {
        let x = array![[1.5, -2.0], [0.25, 4.0]];
        assert_eq!(Csr::identity(2).matmul(x.view()).unwrap(), x);
    }

    #[test]
    fn dimension_mismatch() {
        let a = Csr::identity(3);
        let x = Array2::<f64>::zeros((2, 4));
        assert!(matches!(a.matmul(x.view()), Err(Error::Dimension(_))));
    }

    #[test]
    fn normalized_star() {
        let a = Csr::symmetric_from_pairs(3, &[(0, 1), (0, 2)]).sym_normalized();
        let expect = 1.0 / 2f64.sqrt();
        assert!((a.get(0, 1) - expect).abs() < 1e-15);
        assert!((a.get(2, 0) - expect).abs() < 1e-15);
        assert_eq!(a.get(1, 2), 0.0);
    }

    #[test]
    fn submatrix_keeps_internal_edges() {
        let a = Csr::symmetric_from_pairs(4, &[(0, 1), (1, 2), (2, 3)]);
        let s = a.submatrix(&[2, 1, 3]);
        assert_eq!(s.get(0, 1), 1.0);
        assert_eq!(s.get(0, 2), 1.0);
        assert_eq!(s.get(1, 2), 0.0);
        assert_eq!(s.nnz(), 4);
    }
}
