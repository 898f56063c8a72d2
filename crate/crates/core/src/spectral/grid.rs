use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::DiscreteOperator;
use crate::error::{Error, Result};

/// How the outer boundary of a grid is treated. Both are zero-flux in the
/// discretization; the tag records whether the boundary is physical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Neumann,
    Truncation,
}

/// Volume fractions and face apertures of cells cut by a level set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutCells {
    pub fraction: Vec<f64>,
    /// `aperture[axis][cell]`: open fraction of the face between `cell` and
    /// its upper neighbour along `axis`.
    pub aperture: Vec<Vec<f64>>,
}

/// Cell-centred tensor grid with a cell mask, optional periodic axes, and
/// optional cut-cell geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub cells: Vec<usize>,
    pub periodic: Vec<bool>,
    pub mask: Vec<bool>,
    pub boundary: BoundaryKind,
    pub cut: Option<CutCells>,
}

/// Run-length encoding of a grid and its mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRle {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub cells: Vec<usize>,
    pub periodic: Vec<bool>,
    pub boundary: BoundaryKind,
    /// Value of the first run; runs alternate from there.
    pub first: bool,
    pub runs: Vec<usize>,
}

impl GridDomain {
    pub fn new(lo: &[f64], hi: &[f64], cells: &[usize], boundary: BoundaryKind) -> Result<Self> {
        let d = lo.len();
        if d == 0 || hi.len() != d || cells.len() != d {
            return Err(Error::InvalidArgument("grid bounds and cell counts disagree in dimension".into()));
        }
        if d > 3 {
            return Err(Error::InvalidArgument(format!("grids support d <= 3, got {d}")));
        }
        for k in 0..d {
            if !(hi[k] > lo[k]) || cells[k] == 0 {
                return Err(Error::InvalidArgument(format!("empty grid axis {k}")));
            }
        }
        let total = cells.iter().product();
        Ok(Self {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            cells: cells.to_vec(),
            periodic: vec![false; d],
            mask: vec![true; total],
            boundary,
            cut: None,
        })
    }

    /// Box split into cells no wider than `h` on every axis.
    pub fn with_spacing(lo: &[f64], hi: &[f64], h: f64, boundary: BoundaryKind) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(format!("spacing must be positive, got {h}")));
        }
        let cells: Vec<usize> = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| (((b - a) / h) - 1e-9).ceil().max(1.0) as usize)
            .collect();
        Self::new(lo, hi, &cells, boundary)
    }

    pub fn with_periodic(mut self, periodic: &[bool]) -> Self {
        self.periodic = periodic.to_vec();
        self
    }

    /// Keeps the cells whose centres satisfy `keep`.
    pub fn masked(mut self, keep: impl Fn(&[f64]) -> bool + Sync) -> Self {
        let mask: Vec<bool> = (0..self.len()).into_par_iter().map(|i| keep(&self.centre(i))).collect();
        self.mask = mask;
        self
    }

    /// Narrows the current mask: `keep(centre, active)` decides each cell.
    pub fn masked_with(mut self, keep: impl Fn(&[f64], bool) -> bool + Sync) -> Self {
        let mask: Vec<bool> = (0..self.len())
            .into_par_iter()
            .map(|i| keep(&self.centre(i), self.mask[i]))
            .collect();
        self.mask = mask;
        self
    }

    /// Cut-cell geometry for the region `phi <= 0`, with `sub` sample points
    /// per axis in every cell and on every face. Only cells near the zero
    /// level are subsampled.
    pub fn cut_by(mut self, phi: impl Fn(&[f64]) -> f64 + Sync, sub: usize) -> Self {
        let d = self.dim();
        let h = self.spacing();
        let diag = h.iter().map(|x| x * x).sum::<f64>().sqrt();
        let sub = sub.max(1);
        let offsets = |dims: usize| -> Vec<Vec<f64>> {
            let total = sub.pow(dims as u32);
            (0..total)
                .map(|mut idx| {
                    let mut o = vec![0.0; dims];
                    for c in (0..dims).rev() {
                        o[c] = ((idx % sub) as f64 + 0.5) / sub as f64 - 0.5;
                        idx /= sub;
                    }
                    o
                })
                .collect()
        };
        let vol_offsets = offsets(d);
        let face_offsets = offsets(d - 1);
        let this = &self;
        let per_cell: Vec<(f64, Vec<f64>)> = (0..self.len())
            .into_par_iter()
            .map(|i| {
                let c = this.centre(i);
                let near = phi(&c).abs() <= diag;
                let fraction = if near {
                    let inside = vol_offsets
                        .iter()
                        .filter(|o| {
                            let p: Vec<f64> = c.iter().zip(*o).zip(&h).map(|((x, t), hk)| x + t * hk).collect();
                            phi(&p) <= 0.0
                        })
                        .count();
                    inside as f64 / vol_offsets.len() as f64
                } else if phi(&c) <= 0.0 {
                    1.0
                } else {
                    0.0
                };
                let apertures = (0..d)
                    .map(|axis| {
                        let mut f = c.clone();
                        f[axis] += 0.5 * h[axis];
                        if phi(&f).abs() > diag {
                            return if phi(&f) <= 0.0 { 1.0 } else { 0.0 };
                        }
                        let inside = face_offsets
                            .iter()
                            .filter(|o| {
                                let mut p = f.clone();
                                let mut t = o.iter();
                                for (k, pk) in p.iter_mut().enumerate() {
                                    if k != axis {
                                        *pk += t.next().unwrap() * h[k];
                                    }
                                }
                                phi(&p) <= 0.0
                            })
                            .count();
                        inside as f64 / face_offsets.len() as f64
                    })
                    .collect();
                (fraction, apertures)
            })
            .collect();
        let fraction: Vec<f64> = per_cell.iter().map(|p| p.0).collect();
        let aperture = (0..d).map(|a| per_cell.iter().map(|p| p.1[a]).collect()).collect();
        self.mask = fraction.iter().map(|f| *f > 0.0).collect();
        self.cut = Some(CutCells { fraction, aperture });
        self
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn active(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn spacing(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|k| (self.hi[k] - self.lo[k]) / self.cells[k] as f64)
            .collect()
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing().into_iter().fold(0.0, f64::max)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    fn strides(&self) -> Vec<usize> {
        let d = self.dim();
        let mut s = vec![1; d];
        for k in (0..d.saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.cells[k + 1];
        }
        s
    }

    pub fn multi_index(&self, mut i: usize) -> Vec<usize> {
        let d = self.dim();
        let mut out = vec![0; d];
        for k in (0..d).rev() {
            out[k] = i % self.cells[k];
            i /= self.cells[k];
        }
        out
    }

    pub fn centre(&self, i: usize) -> Vec<f64> {
        let h = self.spacing();
        self.multi_index(i)
            .iter()
            .enumerate()
            .map(|(k, &j)| self.lo[k] + (j as f64 + 0.5) * h[k])
            .collect()
    }

    /// Upper neighbour of cell `i` along `axis`, wrapping on periodic axes.
    pub fn upper(&self, i: usize, axis: usize) -> Option<usize> {
        let j = self.multi_index(i)[axis];
        let stride = self.strides()[axis];
        if j + 1 < self.cells[axis] {
            Some(i + stride)
        } else if self.periodic[axis] && self.cells[axis] > 1 {
            Some(i - j * stride)
        } else {
            None
        }
    }

    /// Cells on the outer (non-periodic) boundary of the box.
    pub fn on_box_boundary(&self, i: usize) -> bool {
        self.multi_index(i)
            .iter()
            .enumerate()
            .any(|(k, &j)| !self.periodic[k] && (j == 0 || j + 1 == self.cells[k]))
    }

    fn face_open(&self, i: usize, axis: usize) -> f64 {
        match &self.cut {
            Some(c) => c.aperture[axis][i],
            None => 1.0,
        }
    }

    /// Face-connected components of the active cells.
    pub fn components(&self) -> usize {
        let n = self.len();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            if !self.mask[i] {
                continue;
            }
            for axis in 0..self.dim() {
                if let Some(j) = self.upper(i, axis) {
                    if self.mask[j] && self.face_open(i, axis) > 0.0 {
                        adj[i].push(j);
                        adj[j].push(i);
                    }
                }
            }
        }
        let mut seen = vec![false; n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for s in 0..n {
            if !self.mask[s] || seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            queue.push_back(s);
            while let Some(i) = queue.pop_front() {
                for &j in &adj[i] {
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        count
    }

    pub fn ensure_connected(&self) -> Result<()> {
        match self.components() {
            1 => Ok(()),
            c => Err(Error::DisconnectedMask(c)),
        }
    }

    pub fn to_rle(&self) -> MaskRle {
        let mut runs = Vec::new();
        let first = self.mask.first().copied().unwrap_or(false);
        let mut current = first;
        let mut len = 0;
        for &m in &self.mask {
            if m == current {
                len += 1;
            } else {
                runs.push(len);
                current = m;
                len = 1;
            }
        }
        runs.push(len);
        MaskRle {
            lo: self.lo.clone(),
            hi: self.hi.clone(),
            cells: self.cells.clone(),
            periodic: self.periodic.clone(),
            boundary: self.boundary,
            first,
            runs,
        }
    }

    pub fn from_rle(rle: &MaskRle) -> Result<Self> {
        let mut g = Self::new(&rle.lo, &rle.hi, &rle.cells, rle.boundary)?.with_periodic(&rle.periodic);
        let total: usize = rle.runs.iter().sum();
        if total != g.len() {
            return Err(Error::InvalidArgument(format!(
                "mask runs cover {total} cells, grid has {}",
                g.len()
            )));
        }
        let mut value = rle.first;
        let mut pos = 0;
        for &r in &rle.runs {
            g.mask[pos..pos + r].iter_mut().for_each(|m| *m = value);
            pos += r;
            value = !value;
        }
        Ok(g)
    }
}

/// Cell-centred finite volumes on the active cells of `grid`:
/// `mass(i, centre)` per cell and `conductance(axis, face_centre)` per open
/// face, scaled by face apertures and volume fractions when the grid is cut.
pub(crate) fn assemble_fv(
    grid: &GridDomain,
    tag: &str,
    mass: impl Fn(&[f64]) -> f64 + Sync,
    conductance: impl Fn(usize, &[f64]) -> f64 + Sync,
) -> Result<DiscreteOperator> {
    grid.ensure_connected()?;
    let n = grid.len();
    let mut index = vec![usize::MAX; n];
    let mut cells = Vec::with_capacity(grid.active());
    for i in 0..n {
        if grid.mask[i] {
            index[i] = cells.len();
            cells.push(i);
        }
    }
    let h = grid.spacing();
    let vol = grid.cell_volume();
    let frac = |i: usize| grid.cut.as_ref().map_or(1.0, |c| c.fraction[i]);
    let masses: Vec<f64> = cells
        .par_iter()
        .map(|&i| mass(&grid.centre(i)) * vol * frac(i))
        .collect();
    let couplings: Vec<(usize, usize, f64)> = cells
        .par_iter()
        .flat_map_iter(|&i| {
            let c = grid.centre(i);
            let index = &index;
            let conductance = &conductance;
            let h = &h;
            (0..grid.dim()).filter_map(move |axis| {
                let j = grid.upper(i, axis)?;
                if !grid.mask[j] {
                    return None;
                }
                let open = grid.face_open(i, axis);
                if open <= 0.0 {
                    return None;
                }
                let mut f = c.clone();
                f[axis] += 0.5 * h[axis];
                let w = conductance(axis, &f) * open * vol / (h[axis] * h[axis]);
                (w > 0.0).then_some((index[i], index[j], w))
            })
        })
        .collect();
    let points: Vec<Vec<f64>> = cells.iter().map(|&i| grid.centre(i)).collect();
    Ok(DiscreteOperator::from_couplings(tag, masses, &couplings, None)?.with_points(points))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rle_round_trip() {
        let g = GridDomain::new(&[-1.0, -1.0], &[1.0, 1.0], &[40, 30], BoundaryKind::Neumann)
            .unwrap()
            .masked(|x| {
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                (0.4..=0.8).contains(&r)
            });
        let rle = g.to_rle();
        let json = serde_json::to_string(&rle).unwrap();
        let back = GridDomain::from_rle(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.mask, g.mask);
        assert_eq!(back.cells, g.cells);
        assert_eq!(g.components(), 1);
    }

    #[test]
    fn disconnected_masks_are_rejected() {
        let g = GridDomain::new(&[0.0], &[1.0], &[10], BoundaryKind::Neumann)
            .unwrap()
            .masked(|x| (x[0] - 0.5).abs() > 0.2);
        assert_eq!(g.components(), 2);
        assert!(matches!(
            assemble_fv(&g, "t", |_| 1.0, |_, _| 1.0),
            Err(Error::DisconnectedMask(2))
        ));
    }

    #[test]
    fn periodic_neighbours_wrap() {
        let g = GridDomain::new(&[0.0, 0.0], &[1.0, 1.0], &[4, 5], BoundaryKind::Neumann)
            .unwrap()
            .with_periodic(&[false, true]);
        assert_eq!(g.upper(4, 1), Some(0));
        assert_eq!(g.upper(15, 0), None);
        assert_eq!(g.upper(0, 0), Some(5));
    }

    #[test]
    fn cut_cells_measure_the_disc() {
        let g = GridDomain::new(&[-1.0, -1.0], &[1.0, 1.0], &[50, 50], BoundaryKind::Neumann)
            .unwrap()
            .cut_by(|x| (x[0] * x[0] + x[1] * x[1]).sqrt() - 0.7, 16);
        let area: f64 = g.cut.as_ref().unwrap().fraction.iter().sum::<f64>() * g.cell_volume();
        assert!((area - std::f64::consts::PI * 0.49).abs() < 1e-3, "{area}");
    }
}
