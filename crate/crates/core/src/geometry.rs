//! Cluster geometry diagnostics and estimation of the optimal chaotic-evolution interval.
//!
//! The interval estimate is built from the ratio curve `r(t)`: the mean, over classes and
//! lifting dimensions, of each class's average distance from its centroid divided by its
//! average centroid distance to the other classes. `r` is smoothed, differentiated with
//! backward differences, smoothed again, differentiated again and smoothed a last time.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::WeightMatrix;
use crate::dataset::{class_indices, LabeledDataset};
use crate::dynamics::{evolve_row, steps_for, ChaosConfig, Rk4};
use crate::error::{Error, Result};
use crate::io;
use crate::lifting::{lift_dataset, CoefficientSharing, LiftConfig, MIN_EXTRA_DIMS};
use crate::matrix::{euclidean, Matrix};
use crate::seed::{self, role};

/// Literature Lyapunov time of Lorenz 96 at `F = 8`, kept for reference only.
pub const LYAPUNOV_TIME: f64 = 0.6;

fn nonempty(points: &Matrix) -> Result<()> {
    if points.rows() == 0 {
        return Err(Error::validation("point set is empty"));
    }
    Ok(())
}

/// Coordinate-wise mean of the rows of `points`.
pub fn cluster_centroid(points: &Matrix) -> Result<Vec<f64>> {
    nonempty(points)?;
    let mut c = vec![0.0; points.cols()];
    for row in points.iter_rows() {
        for (ci, &x) in c.iter_mut().zip(row) {
            *ci += x;
        }
    }
    let n = points.rows() as f64;
    c.iter_mut().for_each(|x| *x /= n);
    Ok(c)
}

/// Mean Euclidean distance of the rows of `points` from their centroid.
pub fn average_distance_from_centroid(points: &Matrix) -> Result<f64> {
    let c = cluster_centroid(points)?;
    Ok(spread_about(points, &c))
}

fn spread_about(points: &Matrix, centroid: &[f64]) -> f64 {
    points.iter_rows().map(|r| euclidean(r, centroid)).sum::<f64>() / points.rows() as f64
}

/// Groups the rows of `samples` into one point set per class `0..m`.
pub fn clusters_by_class(samples: &Matrix, labels: &[usize], m: usize) -> Vec<Matrix> {
    (0..m)
        .map(|c| samples.select_rows(&class_indices(labels, c)))
        .collect()
}

fn check_clusters(clusters: &[Matrix]) -> Result<()> {
    if clusters.len() < 2 {
        return Err(Error::validation("need at least two clusters"));
    }
    let cols = clusters[0].cols();
    for (i, c) in clusters.iter().enumerate() {
        if c.rows() == 0 {
            return Err(Error::validation(format!("cluster {} is empty", i + 1)));
        }
        if c.cols() != cols {
            return Err(Error::validation("clusters have different dimensions"));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CentroidDistances {
    /// Symmetric `m x m` matrix of centroid distances.
    pub matrix: Matrix,
    /// For each class, the mean distance to the other `m - 1` centroids.
    pub per_class_average: Vec<f64>,
}

pub fn centroid_distances(clusters: &[Matrix]) -> Result<CentroidDistances> {
    check_clusters(clusters)?;
    let centroids = clusters
        .iter()
        .map(cluster_centroid)
        .collect::<Result<Vec<_>>>()?;
    Ok(distances_between(&centroids))
}

fn distances_between(centroids: &[Vec<f64>]) -> CentroidDistances {
    let m = centroids.len();
    let mut matrix = Matrix::zeros(m, m);
    for i in 0..m {
        for j in i + 1..m {
            let d = euclidean(&centroids[i], &centroids[j]);
            matrix[(i, j)] = d;
            matrix[(j, i)] = d;
        }
    }
    let per_class_average = (0..m)
        .map(|i| matrix.row(i).iter().sum::<f64>() / (m - 1) as f64)
        .collect();
    CentroidDistances {
        matrix,
        per_class_average,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinMaxDistances {
    pub min: Matrix,
    pub max: Matrix,
}

/// Minimum and maximum pointwise distance for every pair of clusters.
///
/// A cluster paired with itself includes each point's zero distance to itself, so its
/// minimum is 0.
pub fn intercluster_min_max(clusters: &[Matrix]) -> Result<MinMaxDistances> {
    check_clusters(clusters)?;
    let m = clusters.len();
    let mut min = Matrix::zeros(m, m);
    let mut max = Matrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for p in clusters[a].iter_rows() {
                for q in clusters[b].iter_rows() {
                    let d = euclidean(p, q);
                    lo = lo.min(d);
                    hi = hi.max(d);
                }
            }
            min[(a, b)] = lo;
            min[(b, a)] = lo;
            max[(a, b)] = hi;
            max[(b, a)] = hi;
        }
    }
    Ok(MinMaxDistances { min, max })
}

/// Per-class geometry of a labelled point cloud.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterSummary {
    pub centroids: Matrix,
    pub average_spread: Vec<f64>,
    pub centroid_distances: CentroidDistances,
    pub min_max: MinMaxDistances,
}

impl ClusterSummary {
    pub fn compute(samples: &Matrix, labels: &[usize], m: usize) -> Result<Self> {
        let clusters = clusters_by_class(samples, labels, m);
        check_clusters(&clusters)?;
        let centroids: Vec<Vec<f64>> = clusters
            .iter()
            .map(cluster_centroid)
            .collect::<Result<_>>()?;
        let average_spread = clusters
            .iter()
            .zip(&centroids)
            .map(|(c, ctr)| spread_about(c, ctr))
            .collect();
        let centroid_distances = distances_between(&centroids);
        let min_max = intercluster_min_max(&clusters)?;
        Ok(Self {
            centroids: Matrix::from_rows(&centroids)?,
            average_spread,
            centroid_distances,
            min_max,
        })
    }

    /// Writes `centroid_distance.csv`, `min_distance.csv`, `max_distance.csv` (rows and
    /// columns keyed by 1-based class) and `spread.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        write_keyed(&dir.join("centroid_distance.csv"), &self.centroid_distances.matrix)?;
        write_keyed(&dir.join("min_distance.csv"), &self.min_max.min)?;
        write_keyed(&dir.join("max_distance.csv"), &self.min_max.max)?;
        let rows: Vec<[f64; 2]> = self
            .average_spread
            .iter()
            .zip(&self.centroid_distances.per_class_average)
            .map(|(&s, &d)| [s, d])
            .collect();
        io::write_indexed_table(
            &dir.join("spread.csv"),
            &["class", "average_distance", "mean_centroid_distance"],
            &rows,
        )
    }
}

fn write_keyed(path: &Path, m: &Matrix) -> Result<()> {
    let header: Vec<String> = std::iter::once("class".to_string())
        .chain((1..=m.cols()).map(|j| format!("class{j}")))
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<&[f64]> = m.iter_rows().collect();
    io::write_indexed_table(path, &header, &rows)
}

/// Uniform grid of evolution intervals `start, start + step, ...`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TGrid {
    pub start: f64,
    pub step: f64,
    pub len: usize,
}

impl Default for TGrid {
    /// 0.1 to 3.0 in steps of 0.1.
    fn default() -> Self {
        Self {
            start: 0.1,
            step: 0.1,
            len: 30,
        }
    }
}

impl TGrid {
    pub fn times(&self) -> Vec<f64> {
        (0..self.len).map(|k| self.start + k as f64 * self.step).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start >= 0.0) || !(self.step > 0.0) || self.len < 2 {
            return Err(Error::validation(
                "t-grid needs start >= 0, step > 0 and at least two points",
            ));
        }
        Ok(())
    }
}

/// Inputs to [`ratio_curve`] besides the dataset.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioCurveConfig {
    pub lift_min: usize,
    pub lift_max: usize,
    pub forcing: f64,
    pub dt: f64,
    pub grid: TGrid,
    /// Lifting dimension `j` uses lift seed `child_seed(lift_seed, "lift", j)`.
    pub lift_seed: u64,
    #[serde(default)]
    pub sharing: CoefficientSharing,
}

impl RatioCurveConfig {
    /// Lifting range `[m + 6, 50]`, `F = 8`, `dt = 1e-2` and the default grid.
    pub fn with_defaults(m: usize, lift_seed: u64) -> Self {
        Self {
            lift_min: m + MIN_EXTRA_DIMS,
            lift_max: 50.max(m + MIN_EXTRA_DIMS),
            forcing: 8.0,
            dt: 1e-2,
            grid: TGrid::default(),
            lift_seed,
            sharing: CoefficientSharing::Shared,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioCurve {
    pub t_grid: Vec<f64>,
    pub r: Vec<f64>,
    pub r_smooth: Vec<f64>,
    pub rp_smooth: Vec<f64>,
    pub rpp_smooth: Vec<f64>,
}

pub const CURVE_HEADER: [&str; 5] = ["t", "r", "r_smooth", "rp_smooth", "rpp_smooth"];

impl RatioCurve {
    /// Derives the smoothed series from a raw `r` sampled on a uniform grid.
    pub fn from_raw(t_grid: Vec<f64>, r: Vec<f64>) -> Result<Self> {
        if t_grid.len() != r.len() || t_grid.len() < 2 {
            return Err(Error::validation(
                "ratio curve needs equal-length grid and values with at least two points",
            ));
        }
        let spacing = t_grid[1] - t_grid[0];
        let r_smooth = smooth3(&r);
        let rp_smooth = smooth3(&one_sided_derivative(&r_smooth, spacing)?);
        let rpp_smooth = smooth3(&one_sided_derivative(&rp_smooth, spacing)?);
        Ok(Self {
            t_grid,
            r,
            r_smooth,
            rp_smooth,
            rpp_smooth,
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<[f64; 5]> = (0..self.t_grid.len())
            .map(|i| {
                [
                    self.t_grid[i],
                    self.r[i],
                    self.r_smooth[i],
                    self.rp_smooth[i],
                    self.rpp_smooth[i],
                ]
            })
            .collect();
        io::write_table(path, &CURVE_HEADER, &rows)
    }
}

/// Class-averaged `average_class_i / d_centroid,i` for one point cloud.
fn class_ratio(samples: &Matrix, labels: &[usize], m: usize, t: f64, m_lift: usize) -> Result<f64> {
    let clusters = clusters_by_class(samples, labels, m);
    check_clusters(&clusters)?;
    let centroids: Vec<Vec<f64>> = clusters
        .iter()
        .map(cluster_centroid)
        .collect::<Result<_>>()?;
    let dist = distances_between(&centroids);
    for i in 0..m {
        for j in i + 1..m {
            if dist.matrix[(i, j)] == 0.0 {
                return Err(Error::DegenerateGeometry {
                    t,
                    m_lift,
                    class_a: i + 1,
                    class_b: j + 1,
                });
            }
        }
    }
    let total: f64 = clusters
        .iter()
        .zip(&centroids)
        .zip(&dist.per_class_average)
        .map(|((c, ctr), &d)| spread_about(c, ctr) / d)
        .sum();
    Ok(total / m as f64)
}

/// Ratio curve averaged over every lifting dimension in `[lift_min, lift_max]`.
///
/// Each lifted dataset is integrated once along the grid: the state reached at one grid
/// time is the starting point for the next.
pub fn ratio_curve(ds: &LabeledDataset, config: &RatioCurveConfig) -> Result<RatioCurve> {
    let m = ds.m();
    config.grid.validate()?;
    if config.lift_min < m + MIN_EXTRA_DIMS || config.lift_max < config.lift_min {
        return Err(Error::validation(format!(
            "lifting range [{}, {}] must satisfy m + {MIN_EXTRA_DIMS} <= min <= max",
            config.lift_min, config.lift_max
        )));
    }
    let times = config.grid.times();
    let first_steps = steps_for(config.grid.start, config.dt)?;
    let step_steps = steps_for(config.grid.step, config.dt)?;

    let per_dim: Vec<Vec<f64>> = (config.lift_min..=config.lift_max)
        .into_par_iter()
        .map(|m_lift| -> Result<Vec<f64>> {
            let lift = LiftConfig {
                m_lift,
                seed: seed::child_seed(config.lift_seed, role::LIFT, m_lift as u64),
                sharing: config.sharing,
            };
            let chaos = ChaosConfig {
                forcing: config.forcing,
                dt: config.dt,
                horizon: 0.0,
                k: m_lift - 3,
            };
            chaos.validate()?;
            let mut state = lift_dataset(ds, lift)?.samples;
            let mut rk = Rk4::new(chaos.k, chaos.forcing)?;
            let mut out = Vec::with_capacity(times.len());
            for (idx, &t) in times.iter().enumerate() {
                let steps = if idx == 0 { first_steps } else { step_steps };
                for i in 0..state.rows() {
                    evolve_row(state.row_mut(i), &mut rk, config.dt, steps, i)?;
                }
                out.push(class_ratio(&state, &ds.labels, m, t, m_lift)?);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let n_lift = per_dim.len() as f64;
    let r = (0..times.len())
        .map(|k| per_dim.iter().map(|v| v[k]).sum::<f64>() / n_lift)
        .collect();
    RatioCurve::from_raw(times, r)
}

/// Nearest-neighbour moving average; endpoints average with their single neighbour.
pub fn smooth3(series: &[f64]) -> Vec<f64> {
    let n = series.len();
    if n < 2 {
        return series.to_vec();
    }
    let mut out = Vec::with_capacity(n);
    out.push(0.5 * (series[0] + series[1]));
    for i in 1..n - 1 {
        out.push((series[i - 1] + series[i] + series[i + 1]) / 3.0);
    }
    out.push(0.5 * (series[n - 2] + series[n - 1]));
    out
}

/// Backward difference `(s_i - s_{i-1}) / spacing`; the first entry copies the second.
pub fn one_sided_derivative(series: &[f64], spacing: f64) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::validation("derivative needs at least two points"));
    }
    if !(spacing > 0.0) {
        return Err(Error::validation("grid spacing must be positive"));
    }
    let mut out = Vec::with_capacity(series.len());
    out.push((series[1] - series[0]) / spacing);
    out.extend(series.windows(2).map(|w| (w[1] - w[0]) / spacing));
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub t_init: f64,
    pub t_final: f64,
    pub t_optimal: f64,
    pub lyapunov_reference: f64,
}

impl IntervalEstimate {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }
}

fn is_peak(s: &[f64], k: usize) -> bool {
    k >= 1 && k + 1 < s.len() && s[k - 1] < s[k] && s[k] >= s[k + 1]
}

/// Locates the onset and end of the growth phase of `r` and returns the `r_smooth`-weighted
/// mean time between them.
///
/// The onset is the earliest grid point from which `rp_smooth` stays strictly positive up
/// to and including the next local maximum of `rpp_smooth`; that maximum is the end.
pub fn estimate_optimal_interval(curve: &RatioCurve) -> Result<IntervalEstimate> {
    let n = curve.t_grid.len();
    if [&curve.r, &curve.r_smooth, &curve.rp_smooth, &curve.rpp_smooth]
        .iter()
        .any(|s| s.len() != n)
        || n < 3
    {
        return Err(Error::validation("ratio curve series are incomplete"));
    }
    let rp = &curve.rp_smooth;
    let rpp = &curve.rpp_smooth;
    let mut found = None;
    for i in 0..n {
        if rp[i] <= 0.0 {
            continue;
        }
        let Some(k) = (i.max(1)..n - 1).find(|&k| is_peak(rpp, k)) else {
            break;
        };
        if rp[i..=k].iter().all(|&x| x > 0.0) {
            found = Some((i, k));
            break;
        }
    }
    let (i, k) = found.ok_or_else(|| {
        Error::EstimationFailed(
            "no persistently positive r' onset followed by an r'' peak".to_string(),
        )
    })?;
    let weights = &curve.r_smooth[i..=k];
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::EstimationFailed("r_smooth is not positive".to_string()));
    }
    let t_optimal = weights
        .iter()
        .zip(&curve.t_grid[i..=k])
        .map(|(w, t)| w / total * t)
        .sum();
    Ok(IntervalEstimate {
        t_init: curve.t_grid[i],
        t_final: curve.t_grid[k],
        t_optimal,
        lyapunov_reference: LYAPUNOV_TIME,
    })
}

/// Per-row `std(|w_ij|) / mean(|w_ij|)` (population standard deviation).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSpreadReport {
    pub ratios: Vec<f64>,
}

impl WeightSpreadReport {
    pub fn mean(&self) -> f64 {
        self.ratios.iter().sum::<f64>() / self.ratios.len() as f64
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let rows: Vec<[f64; 1]> = self.ratios.iter().map(|&r| [r]).collect();
        io::write_indexed_table(path, &["class", "spread_ratio"], &rows)
    }
}

pub fn weight_spread(w: &WeightMatrix) -> Result<WeightSpreadReport> {
    let ratios = w
        .matrix()
        .iter_rows()
        .enumerate()
        .map(|(i, row)| {
            let n = row.len() as f64;
            let mean = row.iter().map(|x| x.abs()).sum::<f64>() / n;
            if !(mean > 0.0) {
                return Err(Error::validation(format!("row {} has zero mean |w|", i + 1)));
            }
            let var = row.iter().map(|x| (x.abs() - mean).powi(2)).sum::<f64>() / n;
            Ok(var.sqrt() / mean)
        })
        .collect::<Result<_>>()?;
    Ok(WeightSpreadReport { ratios })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centroid_basics() {
        let single = Matrix::from_rows(&[[1.0, -2.0, 3.0]]).unwrap();
        assert_eq!(cluster_centroid(&single).unwrap(), vec![1.0, -2.0, 3.0]);
        let pair = Matrix::from_rows(&[[1.5, -2.0], [-1.5, 2.0]]).unwrap();
        assert_eq!(cluster_centroid(&pair).unwrap(), vec![0.0, 0.0]);
        assert!(cluster_centroid(&Matrix::zeros(0, 3)).is_err());
    }

    #[test]
    fn average_distance_basics() {
        let same = Matrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]).unwrap();
        assert_eq!(average_distance_from_centroid(&same).unwrap(), 0.0);
        let pair = Matrix::from_rows(&[[0.0, 0.0], [6.0, 8.0]]).unwrap();
        assert_eq!(average_distance_from_centroid(&pair).unwrap(), 5.0);
    }

    #[test]
    fn basis_clusters_are_sqrt2_apart() {
        let clusters: Vec<Matrix> = (0..4)
            .map(|i| {
                let mut e = vec![0.0; 4];
                e[i] = 1.0;
                Matrix::from_rows(&[e.clone(), e]).unwrap()
            })
            .collect();
        let d = centroid_distances(&clusters).unwrap();
        for i in 0..4 {
            assert_eq!(d.matrix[(i, i)], 0.0);
            for j in 0..4 {
                if i != j {
                    assert!((d.matrix[(i, j)] - 2f64.sqrt()).abs() < 1e-15);
                }
            }
            assert!((d.per_class_average[i] - 2f64.sqrt()).abs() < 1e-15);
        }
        let same = vec![clusters[0].clone(), clusters[0].clone()];
        assert_eq!(centroid_distances(&same).unwrap().matrix, Matrix::zeros(2, 2));
    }

    #[test]
    fn min_max_singletons_and_self() {
        let a = Matrix::from_rows(&[[0.0, 0.0]]).unwrap();
        let b = Matrix::from_rows(&[[3.0, 4.0]]).unwrap();
        let mm = intercluster_min_max(&[a, b]).unwrap();
        assert_eq!(mm.min[(0, 1)], 5.0);
        assert_eq!(mm.max[(0, 1)], 5.0);
        assert_eq!(mm.min[(0, 0)], 0.0);
        assert!(intercluster_min_max(&[Matrix::zeros(0, 2), Matrix::zeros(1, 2)]).is_err());
    }

    #[test]
    fn smoothing_examples() {
        assert_eq!(smooth3(&[2.0, 2.0, 2.0, 2.0]), vec![2.0; 4]);
        assert_eq!(smooth3(&[0.0, 3.0, 0.0]), vec![1.5, 1.0, 1.5]);
        let ramp: Vec<f64> = (0..6).map(|i| 0.5 * i as f64 + 1.0).collect();
        let s = smooth3(&ramp);
        for i in 1..5 {
            assert!((s[i] - ramp[i]).abs() < 1e-15);
        }
        assert_eq!(smooth3(&[4.0]), vec![4.0]);
    }

    #[test]
    fn derivative_examples() {
        let ramp: Vec<f64> = (0..5).map(|i| 3.0 * i as f64 * 0.5).collect();
        for d in one_sided_derivative(&ramp, 0.5).unwrap() {
            assert!((d - 3.0).abs() < 1e-14);
        }
        assert_eq!(one_sided_derivative(&[1.0, 1.0, 1.0], 0.1).unwrap(), vec![0.0; 3]);
        assert!(one_sided_derivative(&[1.0], 0.1).is_err());
    }

    #[test]
    fn quadratic_backward_difference() {
        let t: Vec<f64> = (0..10).map(|i| 0.1 * i as f64).collect();
        let s: Vec<f64> = t.iter().map(|x| x * x).collect();
        let d = one_sided_derivative(&s, 0.1).unwrap();
        for i in 1..10 {
            assert!((d[i] - (2.0 * t[i] - 0.1)).abs() < 1e-12);
        }
        assert_eq!(d[0], d[1]);
    }

    #[test]
    fn constant_curve_fails_estimation() {
        let t = TGrid::default().times();
        let curve = RatioCurve::from_raw(t, vec![0.3; 30]).unwrap();
        assert!(matches!(
            estimate_optimal_interval(&curve),
            Err(Error::EstimationFailed(_))
        ));
    }

    #[test]
    fn weight_spread_examples() {
        let w = WeightMatrix::from_matrix(
            Matrix::from_rows(&[[2.0, -2.0, 2.0, 2.0], [1.0, 0.0, 0.0, 0.0]]).unwrap(),
        )
        .unwrap();
        let r = weight_spread(&w).unwrap();
        assert_eq!(r.ratios[0], 0.0);
        // |w| = (1,0,0,0): mean 1/4, population std sqrt(3)/4.
        assert!((r.ratios[1] - 3f64.sqrt()).abs() < 1e-12);
        assert!(weight_spread(&WeightMatrix::zeros(2, 3)).is_err());
    }
}
