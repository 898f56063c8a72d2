use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `A = M^{-1} K` with `K` symmetric positive semidefinite and `M` a positive
/// diagonal mass. `A` is self-adjoint in the inner product weighted by `M`.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub tag: String,
    /// Symmetric stiffness, CSR with sorted column indices per row.
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    mass: Vec<f64>,
    /// Location of each unknown, when the operator comes from a grid.
    pub points: Vec<Vec<f64>>,
    annihilates_constants: bool,
}

/// Relative row-sum size below which `K 1 = 0` is taken to hold.
pub const ZERO_MODE_TOL: f64 = 1e-10;

impl DiscreteOperator {
    /// From off-diagonal couplings `(i, j, c)` with `c >= 0` and per-node
    /// potential terms. `K_ii = sum_j c_ij + potential_i`, `K_ij = -c_ij`.
    pub fn from_couplings(
        tag: impl Into<String>,
        mass: Vec<f64>,
        couplings: &[(usize, usize, f64)],
        potential: Option<&[f64]>,
    ) -> Result<Self> {
        let n = mass.len();
        if mass.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::InvalidArgument("mass weights must be positive and finite".into()));
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut diag = vec![0.0; n];
        for &(i, j, c) in couplings {
            if i == j || i >= n || j >= n || !(c >= 0.0) || !c.is_finite() {
                return Err(Error::InvalidArgument(format!("bad coupling ({i}, {j}, {c})")));
            }
            rows[i].push((j, -c));
            rows[j].push((i, -c));
            diag[i] += c;
            diag[j] += c;
        }
        let mut annihilates = true;
        if let Some(p) = potential {
            for (d, v) in diag.iter_mut().zip(p) {
                *d += v;
                if *v != 0.0 {
                    annihilates = false;
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for (i, row) in rows.iter_mut().enumerate() {
            row.push((i, diag[i]));
            row.sort_by_key(|e| e.0);
            let mut last = usize::MAX;
            for &(j, v) in row.iter() {
                if j == last {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                    last = j;
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            tag: tag.into(),
            row_ptr,
            col_idx,
            values,
            mass,
            points: Vec::new(),
            annihilates_constants: annihilates,
        })
    }

    /// Diagonal operator with unit weights.
    pub fn diagonal(tag: impl Into<String>, diag: &[f64]) -> Result<Self> {
        Self::from_couplings(tag, vec![1.0; diag.len()], &[], Some(diag))
    }

    pub fn with_points(mut self, points: Vec<Vec<f64>>) -> Self {
        self.points = points;
        self
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn annihilates_constants(&self) -> bool {
        self.annihilates_constants
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Rows of `K` as `(column, value)` pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn stiffness_apply(&self, x: &[f64]) -> Vec<f64> {
        let rows = 0..self.len();
        let f = |i: usize| self.row(i).map(|(j, v)| v * x[j]).sum::<f64>();
        if self.len() > 4096 {
            rows.into_par_iter().map(f).collect()
        } else {
            rows.map(f).collect()
        }
    }

    /// `A x = M^{-1} K x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.stiffness_apply(x);
        y.iter_mut().zip(&self.mass).for_each(|(a, m)| *a /= m);
        y
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.mass).map(|((x, y), m)| x * y * m).sum()
    }

    /// Entries of the symmetrised operator `M^{-1/2} K M^{-1/2}`, lower
    /// triangle including the diagonal.
    pub(crate) fn symmetrized_lower(&self) -> Vec<(usize, usize, f64)> {
        let root: Vec<f64> = self.mass.iter().map(|m| m.sqrt()).collect();
        let mut out = Vec::with_capacity(self.nnz() / 2 + self.len());
        for i in 0..self.len() {
            for (j, v) in self.row(i) {
                if j <= i {
                    out.push((i, j, v / (root[i] * root[j])));
                }
            }
        }
        out
    }

    pub(crate) fn symmetrized_apply(&self, y: &[f64]) -> Vec<f64> {
        let root: Vec<f64> = self.mass.iter().map(|m| m.sqrt()).collect();
        let x: Vec<f64> = y.iter().zip(&root).map(|(a, r)| a / r).collect();
        let mut out = self.stiffness_apply(&x);
        out.iter_mut().zip(&root).for_each(|(a, r)| *a /= r);
        out
    }

    pub(crate) fn max_diagonal(&self) -> f64 {
        (0..self.len())
            .map(|i| self.row(i).find(|e| e.0 == i).map_or(0.0, |e| e.1) / self.mass[i])
            .fold(0.0, f64::max)
    }

    /// Largest relative defect `|<Af, g>_w - <f, Ag>_w| / (|Af|_w |g|_w)`
    /// over `pairs` random vector pairs.
    pub fn symmetry_defect(&self, pairs: usize, seed: u64) -> f64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let f: Vec<f64> = (0..self.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g: Vec<f64> = (0..self.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (af, ag) = (self.apply(&f), self.apply(&g));
            let lhs = self.inner(&af, &g);
            let rhs = self.inner(&f, &ag);
            let scale = (self.inner(&af, &af) * self.inner(&g, &g)).sqrt().max(1e-300);
            worst = worst.max((lhs - rhs).abs() / scale);
        }
        worst
    }

    /// `|A 1|_w / (|A|_diag |1|_w)`: zero for operators with a constant null mode.
    pub fn zero_mode_residual(&self) -> f64 {
        let one = vec![1.0; self.len()];
        let a1 = self.apply(&one);
        (self.inner(&a1, &a1) / self.inner(&one, &one)).sqrt() / self.max_diagonal().max(1e-300)
    }
}

/// Mean-zero test function and its Rayleigh quotient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RayleighWitness {
    pub values: Vec<f64>,
    pub mean_zero: bool,
    pub quotient: f64,
}

/// `<A u, u>_w / <u, u>_w` after projecting out the weighted mean. An upper
/// bound on the first nonzero eigenvalue for any admissible `u`.
pub fn rayleigh_quotient(op: &DiscreteOperator, u: &[f64]) -> Result<RayleighWitness> {
    if u.len() != op.len() {
        return Err(Error::InvalidArgument(format!(
            "witness has {} values, operator has {} unknowns",
            u.len(),
            op.len()
        )));
    }
    crate::error::ensure_finite(u, "witness")?;
    let total: f64 = op.mass().iter().sum();
    let mean = op.inner(u, &vec![1.0; u.len()]) / total;
    let v: Vec<f64> = u.iter().map(|x| x - mean).collect();
    let norm2 = op.inner(&v, &v);
    let raw = op.inner(u, u);
    if !(norm2 > 1e-24 * raw.max(f64::MIN_POSITIVE)) {
        return Err(Error::ZeroProjection);
    }
    let kv = op.stiffness_apply(&v);
    let quotient = kv.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / norm2;
    let residual_mean = op.inner(&v, &vec![1.0; v.len()]) / total;
    Ok(RayleighWitness {
        mean_zero: residual_mean.abs() <= 1e-10 * (norm2 / total).sqrt().max(1e-300),
        values: v,
        quotient,
    })
}
