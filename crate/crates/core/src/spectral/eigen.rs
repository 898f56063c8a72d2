use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::DiscreteOperator;
use crate::error::{Error, Result};

/// Residual tolerance `|A v - lambda v|_w <= tol |v|_w`.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Relative gap below which neighbouring eigenvalues are clustered.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-6;

/// Largest operator solved densely.
pub const DENSE_LIMIT: usize = 1500;

const MAX_ITER: usize = 500;

/// Smallest eigenpairs of a discrete operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub tag: String,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Weighted residual norms of the unit eigenvectors.
    pub residuals: Vec<f64>,
    /// Size of the cluster each eigenvalue belongs to.
    pub multiplicities: Vec<usize>,
    /// Largest grid spacing, when the operator comes from a grid.
    pub h: Option<f64>,
    /// Extrapolated `h -> 0` value of the first nonzero eigenvalue.
    pub extrapolated: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Eigenvectors as node values, unit in the weighted norm.
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<f64>>,
}

impl SpectrumResult {
    /// First eigenvalue above the zero mode.
    pub fn lambda1(&self) -> f64 {
        self.eigenvalues.get(1).copied().unwrap_or(f64::NAN)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }

    /// Reclusters with a different relative tolerance.
    pub fn recluster(&mut self, rel_tol: f64) {
        self.multiplicities = cluster(&self.eigenvalues, rel_tol);
    }
}

/// Groups eigenvalues whose relative distance to the previous one is below
/// `rel_tol`; the scale is the largest magnitude in the list.
pub fn cluster(eig: &[f64], rel_tol: f64) -> Vec<usize> {
    let scale = eig.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1e-300);
    let mut groups: Vec<(usize, usize)> = Vec::new();
    for (i, w) in eig.windows(2).enumerate() {
        let close = (w[1] - w[0]).abs() <= (rel_tol * w[1].abs().max(w[0].abs())).max(1e-12 * scale);
        match groups.last_mut() {
            Some(g) if close && g.1 == i => g.1 = i + 1,
            _ if close => groups.push((i, i + 1)),
            _ => {}
        }
    }
    let mut out = vec![1; eig.len()];
    for (a, b) in groups {
        for m in out.iter_mut().take(b + 1).skip(a) {
            *m = b - a + 1;
        }
    }
    out
}

/// The `m` smallest eigenpairs of `A = M^{-1} K`.
///
/// Small operators are solved densely. Larger ones use block inverse
/// iteration on the shifted symmetrised operator with a sparse Cholesky
/// factor and Rayleigh–Ritz extraction; when `K` annihilates constants the
/// constant mode is deflated and reported exactly.
pub fn smallest_eigenvalues(op: &DiscreteOperator, m: usize, tol: f64) -> Result<SpectrumResult> {
    let n = op.len();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!("asked for {m} eigenpairs of an operator of size {n}")));
    }
    let (values, vectors, iterations, converged) = if n <= DENSE_LIMIT {
        let (v, y) = dense(op, m);
        (v, y, 0, true)
    } else {
        sparse(op, m, tol)?
    };
    let root: Vec<f64> = op.mass().iter().map(|x| x.sqrt()).collect();
    let residuals: Vec<f64> = values
        .iter()
        .zip(&vectors)
        .map(|(l, y)| {
            let sy = op.symmetrized_apply(y);
            sy.iter().zip(y).map(|(a, b)| (a - l * b).powi(2)).sum::<f64>().sqrt()
        })
        .collect();
    let converged = converged && residuals.iter().all(|r| *r <= tol);
    let eigenvectors = vectors
        .into_iter()
        .map(|y| y.iter().zip(&root).map(|(a, r)| a / r).collect())
        .collect();
    Ok(SpectrumResult {
        tag: op.tag.clone(),
        multiplicities: cluster(&values, DEFAULT_CLUSTER_TOL),
        eigenvalues: values,
        residuals,
        h: None,
        extrapolated: None,
        converged,
        iterations,
        eigenvectors,
    })
}

fn dense(op: &DiscreteOperator, m: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = op.len();
    let mut s = Mat::<f64>::zeros(n, n);
    for (i, j, v) in op.symmetrized_lower() {
        s[(i, j)] = v;
        s[(j, i)] = v;
    }
    let evd = s.self_adjoint_eigen(Side::Lower).expect("dense symmetric eigendecomposition");
    let u = evd.U();
    let w = evd.S().column_vector();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| w[*a].total_cmp(&w[*b]));
    let values = order[..m].iter().map(|&i| w[i]).collect();
    let vectors = order[..m].iter().map(|&i| (0..n).map(|r| u[(r, i)]).collect()).collect();
    (values, vectors)
}

type SparseOut = (Vec<f64>, Vec<Vec<f64>>, usize, bool);

fn sparse(op: &DiscreteOperator, m: usize, tol: f64) -> Result<SparseOut> {
    let n = op.len();
    let deflate = op.annihilates_constants();
    let null: Vec<f64> = if deflate {
        let total: f64 = op.mass().iter().sum();
        op.mass().iter().map(|x| (x / total).sqrt()).collect()
    } else {
        Vec::new()
    };
    let wanted = if deflate { m - 1 } else { m };
    let block = (wanted + 6).max(2 * wanted).min(n - usize::from(deflate));

    let shift = 1e-9 * op.max_diagonal().max(1e-300);
    let triplets: Vec<Triplet<usize, usize, f64>> = op
        .symmetrized_lower()
        .into_iter()
        .map(|(i, j, v)| Triplet::new(i, j, if i == j { v + shift } else { v }))
        .collect();
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::Factorization(format!("{e:?}")))?;
    let llt = mat
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::Factorization(format!("{e:?}")))?;

    let project = |x: &mut Mat<f64>| {
        if deflate {
            for c in 0..x.ncols() {
                for _ in 0..2 {
                    let d: f64 = (0..n).map(|r| x[(r, c)] * null[r]).sum();
                    for r in 0..n {
                        x[(r, c)] -= d * null[r];
                    }
                }
            }
        }
    };

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    let mut y = Mat::<f64>::from_fn(n, block, |_, _| StandardNormal.sample(&mut rng));
    project(&mut y);
    y = orthonormal(&y);

    let mut values = vec![0.0; block];
    let mut iterations = 0;
    let mut converged = false;
    let mut tail = vec![f64::INFINITY; wanted];
    while iterations < MAX_ITER {
        iterations += 1;
        llt.solve_in_place(y.as_mut());
        project(&mut y);
        let z = orthonormal(&y);
        let sz = Mat::<f64>::from_fn(n, block, |_, _| 0.0);
        let mut sz = sz;
        for c in 0..block {
            let col: Vec<f64> = (0..n).map(|r| z[(r, c)]).collect();
            let out = op.symmetrized_apply(&col);
            for r in 0..n {
                sz[(r, c)] = out[r];
            }
        }
        let h = z.transpose() * &sz;
        let h = Mat::<f64>::from_fn(block, block, |i, j| 0.5 * (h[(i, j)] + h[(j, i)]));
        let evd = h.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let w = evd.U().to_owned();
        let s = evd.S().column_vector();
        for i in 0..block {
            values[i] = s[i];
        }
        y = &z * &w;
        let sy = &sz * &w;
        for (i, t) in tail.iter_mut().enumerate() {
            *t = (0..n).map(|r| (sy[(r, i)] - values[i] * y[(r, i)]).powi(2)).sum::<f64>().sqrt();
        }
        if tail.iter().all(|r| *r <= 0.1 * tol) {
            converged = true;
            break;
        }
    }

    let mut out_values = Vec::with_capacity(m);
    let mut out_vectors = Vec::with_capacity(m);
    if deflate {
        let s0 = op.symmetrized_apply(&null);
        out_values.push(s0.iter().zip(&null).map(|(a, b)| a * b).sum());
        out_vectors.push(null.clone());
    }
    for i in 0..wanted {
        out_values.push(values[i]);
        out_vectors.push((0..n).map(|r| y[(r, i)]).collect());
    }
    Ok((out_values, out_vectors, iterations, converged))
}

fn orthonormal(x: &Mat<f64>) -> Mat<f64> {
    // two passes of modified Gram-Schmidt
    let (n, b) = (x.nrows(), x.ncols());
    let mut q = x.to_owned();
    for _ in 0..2 {
        for c in 0..b {
            for p in 0..c {
                let d: f64 = (0..n).map(|r| q[(r, c)] * q[(r, p)]).sum();
                for r in 0..n {
                    let v = q[(r, p)];
                    q[(r, c)] -= d * v;
                }
            }
            let norm = (0..n).map(|r| q[(r, c)].powi(2)).sum::<f64>().sqrt();
            if norm > 0.0 {
                for r in 0..n {
                    q[(r, c)] /= norm;
                }
            }
        }
    }
    q
}
