//! Path ensembles on a time grid, sampled either from the truncated Hermite
//! representation `G_t ≈ Σ_k c_k(t) Z_k` or from a Cholesky factor of the
//! model's grid covariance.
//!
//! Every path draws from its own ChaCha stream keyed by `(seed, path index)`,
//! so results do not depend on how paths are scheduled across threads.

use std::io::Write;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::PivotedCholesky;
use crate::procmodel::{DefectRow, ProcessModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Spacing {
    Uniform,
    /// `t_i = start + (T − start)(i/n)^power`, clustering steps at the start.
    RefinedAtStart {
        power: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub start: f64,
    pub horizon: f64,
    pub steps: usize,
    #[serde(default = "uniform")]
    pub spacing: Spacing,
}

fn uniform() -> Spacing {
    Spacing::Uniform
}

impl GridSpec {
    pub fn uniform(horizon: f64, steps: usize) -> Self {
        Self {
            start: 0.0,
            horizon,
            steps,
            spacing: Spacing::Uniform,
        }
    }

    pub fn times(&self) -> Result<Vec<f64>> {
        if self.steps == 0 {
            return Err(Error::Grid("at least one step is required".into()));
        }
        if !(self.horizon > self.start) || !self.horizon.is_finite() {
            return Err(Error::Grid(format!(
                "horizon {} must exceed start {}",
                self.horizon, self.start
            )));
        }
        let span = self.horizon - self.start;
        let n = self.steps as f64;
        let times: Vec<f64> = (0..=self.steps)
            .map(|i| match self.spacing {
                Spacing::Uniform => self.start + span * i as f64 / n,
                Spacing::RefinedAtStart { power } => self.start + span * (i as f64 / n).powf(power),
            })
            .collect();
        if let Spacing::RefinedAtStart { power } = self.spacing {
            if !(power >= 1.0) {
                return Err(Error::Grid("refinement power must be at least 1".into()));
            }
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Grid("grid is not strictly increasing".into()));
        }
        Ok(times)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    Hermite,
    Cholesky,
}

/// Covariance of the sampled process on the grid: the truncated sum
/// `Σ_k c_k(t_i) c_k(t_j)` for Hermite ensembles, the model covariance for
/// Cholesky ensembles.
#[derive(Debug, Clone)]
pub enum GridCovariance {
    Coefficients(Arc<Vec<Vec<f64>>>),
    Matrix(Arc<Vec<Vec<f64>>>),
}

impl GridCovariance {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            GridCovariance::Coefficients(c) => c[i].iter().zip(&c[j]).map(|(a, b)| a * b).sum(),
            GridCovariance::Matrix(m) => m[i][j],
        }
    }

    fn select(&self, idx: &[usize]) -> Self {
        match self {
            GridCovariance::Coefficients(c) => {
                GridCovariance::Coefficients(Arc::new(idx.iter().map(|&i| c[i].clone()).collect()))
            }
            GridCovariance::Matrix(m) => GridCovariance::Matrix(Arc::new(
                idx.iter().map(|&i| idx.iter().map(|&j| m[i][j]).collect()).collect(),
            )),
        }
    }
}

/// `M` sampled paths on a common grid.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub grid: Vec<f64>,
    /// `paths[m][i]` is path `m` at `grid[i]`.
    pub paths: Vec<Vec<f64>>,
    /// Gaussian coordinates `Z_k` per path (Hermite sampler only).
    pub coords: Option<Vec<Vec<f64>>>,
    pub seed: u64,
    pub sampler: Sampler,
    pub covariance: GridCovariance,
    variance: Vec<f64>,
}

fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// `len` standard Gaussian draws from the stream of path `path`.
pub fn gaussian_draws(seed: u64, path: usize, len: usize) -> Vec<f64> {
    let mut rng = path_rng(seed, path);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Samples `paths` paths of `model` on `grid`.
pub fn sample_paths(model: &ProcessModel, grid: &GridSpec, paths: usize, seed: u64, sampler: Sampler) -> Result<PathEnsemble> {
    sample_on_times(model, &grid.times()?, paths, seed, sampler)
}

pub fn sample_on_times(model: &ProcessModel, times: &[f64], paths: usize, seed: u64, sampler: Sampler) -> Result<PathEnsemble> {
    if paths == 0 {
        return Err(Error::param("paths", "at least one path is required"));
    }
    match sampler {
        Sampler::Hermite => {
            let table = model.coeff_table(times)?;
            let k = model.order();
            let coords: Vec<Vec<f64>> = (0..paths).into_par_iter().map(|m| gaussian_draws(seed, m, k)).collect();
            let values: Vec<Vec<f64>> = coords
                .par_iter()
                .map(|z| table.iter().map(|c| c.iter().zip(z).map(|(a, b)| a * b).sum()).collect())
                .collect();
            let cov = GridCovariance::Coefficients(Arc::new(table));
            Ok(PathEnsemble::assemble(
                times.to_vec(),
                values,
                Some(coords),
                seed,
                sampler,
                cov,
            ))
        }
        Sampler::Cholesky => {
            let gram: Vec<Vec<f64>> = times
                .par_iter()
                .map(|&t| times.iter().map(|&s| model.covariance(t, s)).collect::<Result<Vec<f64>>>())
                .collect::<Result<_>>()?;
            let chol = PivotedCholesky::new(&gram, 1e-13)?;
            let values: Vec<Vec<f64>> = (0..paths)
                .into_par_iter()
                .map(|m| chol.apply(&gaussian_draws(seed, m, chol.rank)))
                .collect();
            let cov = GridCovariance::Matrix(Arc::new(gram));
            Ok(PathEnsemble::assemble(times.to_vec(), values, None, seed, sampler, cov))
        }
    }
}

impl PathEnsemble {
    fn assemble(
        grid: Vec<f64>,
        paths: Vec<Vec<f64>>,
        coords: Option<Vec<Vec<f64>>>,
        seed: u64,
        sampler: Sampler,
        covariance: GridCovariance,
    ) -> Self {
        let variance = (0..grid.len()).map(|i| covariance.get(i, i)).collect();
        Self {
            grid,
            paths,
            coords,
            seed,
            sampler,
            covariance,
            variance,
        }
    }

    /// Ensemble built from given paths, e.g. a deterministic test double.
    pub fn from_paths(grid: Vec<f64>, paths: Vec<Vec<f64>>, covariance: Vec<Vec<f64>>) -> Result<Self> {
        let n = grid.len();
        if paths.iter().any(|p| p.len() != n) || covariance.len() != n {
            return Err(Error::Grid("paths and covariance must match the grid".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Grid("grid is not strictly increasing".into()));
        }
        Ok(Self::assemble(
            grid,
            paths,
            None,
            0,
            Sampler::Cholesky,
            GridCovariance::Matrix(Arc::new(covariance)),
        ))
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        *self.grid.last().expect("grid is non-empty")
    }

    /// Variance of the sampled process at `grid[i]`.
    pub fn variance(&self, i: usize) -> f64 {
        self.variance[i]
    }

    pub fn cov(&self, i: usize, j: usize) -> f64 {
        self.covariance.get(i, j)
    }

    /// `cov(t_i, t_{i+1}) − var(t_i)` for each step: the discrete Wick
    /// compensator increments.
    pub fn compensator_increments(&self) -> Vec<f64> {
        (0..self.steps()).map(|i| self.cov(i, i + 1) - self.variance[i]).collect()
    }

    /// `var(t_{i+1}) − var(t_i)` for each step.
    pub fn variance_increments(&self) -> Vec<f64> {
        self.variance.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Keeps every `stride`-th grid point.
    pub fn coarsen(&self, stride: usize) -> Result<Self> {
        if stride == 0 || !self.steps().is_multiple_of(stride) {
            return Err(Error::Grid(format!("stride {stride} does not divide {} steps", self.steps())));
        }
        let idx: Vec<usize> = (0..self.grid.len()).step_by(stride).collect();
        Ok(Self {
            grid: idx.iter().map(|&i| self.grid[i]).collect(),
            paths: self.paths.iter().map(|p| idx.iter().map(|&i| p[i]).collect()).collect(),
            coords: self.coords.clone(),
            seed: self.seed,
            sampler: self.sampler,
            covariance: self.covariance.select(&idx),
            variance: idx.iter().map(|&i| self.variance[i]).collect(),
        })
    }

    /// Index of the grid point equal to `t` (within rounding).
    pub fn index_of(&self, t: f64) -> Result<usize> {
        self.grid
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
            .ok_or_else(|| Error::Grid(format!("time {t} is not a grid point")))
    }

    /// Sample covariance of the path values at `grid[i]` and `grid[j]`.
    pub fn sample_cov(&self, i: usize, j: usize) -> f64 {
        let xi: Vec<f64> = self.paths.iter().map(|p| p[i]).collect();
        let xj: Vec<f64> = self.paths.iter().map(|p| p[j]).collect();
        let (mi, _) = crate::stats::mean_stderr(&xi);
        let (mj, _) = crate::stats::mean_stderr(&xj);
        let prod: Vec<f64> = xi.iter().zip(&xj).map(|(a, b)| (a - mi) * (b - mj)).collect();
        crate::stats::mean_stderr(&prod).0 * self.len() as f64 / (self.len() as f64 - 1.0)
    }

    /// CSV with columns `path_id,t,value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["path_id", "t", "value"])?;
        for (m, path) in self.paths.iter().enumerate() {
            for (t, v) in self.grid.iter().zip(path) {
                out.write_record(&[m.to_string(), t.to_string(), v.to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// CSV with columns `path_id,k,z`.
    pub fn write_coords_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["path_id", "k", "z"])?;
        if let Some(coords) = &self.coords {
            for (m, z) in coords.iter().enumerate() {
                for (k, v) in z.iter().enumerate() {
                    out.write_record(&[m.to_string(), k.to_string(), v.to_string()])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// `D_K(t) = R_t − Σ_{k<K} c_k(t)²` on the grid.
pub fn truncation_defect(model: &ProcessModel, grid: &GridSpec, order: usize) -> Result<Vec<DefectRow>> {
    let m = model.with_order(order)?;
    let times = grid.times()?;
    let table = m.coeff_table(&times)?;
    times
        .iter()
        .zip(&table)
        .map(|(&t, c)| {
            let variance = m.variance(t)?;
            let captured: f64 = c.iter().map(|x| x * x).sum();
            let defect = variance - captured;
            if defect < -1e-8 {
                return Err(Error::NegativeDefect { t, defect });
            }
            Ok(DefectRow {
                t,
                variance,
                captured,
                defect,
            })
        })
        .collect()
}

/// Largest relative defect `D_K(t)/R_t` over rows with `R_t > 0`.
pub fn max_relative_defect(rows: &[DefectRow]) -> f64 {
    rows.iter()
        .filter(|r| r.variance > 0.0)
        .map(|r| r.defect / r.variance)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spacings() {
        let g = GridSpec::uniform(1.0, 4).times().unwrap();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let r = GridSpec {
            start: 0.0,
            horizon: 1.0,
            steps: 2,
            spacing: Spacing::RefinedAtStart { power: 2.0 },
        };
        assert_eq!(r.times().unwrap(), vec![0.0, 0.25, 1.0]);
        assert!(GridSpec::uniform(0.0, 4).times().is_err());
    }

    #[test]
    fn streams_are_independent_of_order() {
        let a = gaussian_draws(7, 3, 5);
        let b = gaussian_draws(7, 3, 5);
        assert_eq!(a, b);
        assert_ne!(a, gaussian_draws(7, 4, 5));
        assert_ne!(a, gaussian_draws(8, 3, 5));
    }

    #[test]
    fn coarsen_keeps_endpoints() {
        let m = ProcessModel::bm(8).unwrap();
        let e = sample_paths(&m, &GridSpec::uniform(1.0, 8), 3, 1, Sampler::Hermite).unwrap();
        let c = e.coarsen(4).unwrap();
        assert_eq!(c.grid, vec![0.0, 0.5, 1.0]);
        assert_eq!(c.paths[2][2], e.paths[2][8]);
        assert_eq!(c.cov(1, 2), e.cov(4, 8));
        assert!(e.coarsen(3).is_err());
    }
}
