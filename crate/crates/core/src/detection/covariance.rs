use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;

use super::{PointScorer, PointScores};
use crate::error::{Error, Result};
use crate::geometry::{KdTree, PointCloud, Vec3};

/// Surface variation at which the edge score starts to rise.
const EDGE_SIGMA_LO: f64 = 0.02;
/// Surface variation at which the edge score saturates.
const EDGE_SIGMA_HI: f64 = 0.07;
/// Corner response needs the neighbourhood to be spread in all three
/// directions: both `λ2/λ1` and the surface variation must be large.
const CORNER_RATIO_LO: f64 = 0.55;
const CORNER_RATIO_HI: f64 = 0.85;
const CORNER_SIGMA_LO: f64 = 0.10;
const CORNER_SIGMA_HI: f64 = 0.16;

fn smoothstep(lo: f64, hi: f64, x: f64) -> f64 {
    let t = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Eigenvalues of the neighbourhood covariance, descending.
fn local_spectrum(points: &[crate::geometry::Point3], neighbours: &[(usize, f64)]) -> [f64; 3] {
    let n = neighbours.len() as f64;
    let mean: Vec3 = neighbours
        .iter()
        .map(|&(j, _)| points[j].coords)
        .sum::<Vec3>()
        / n;
    let mut cov = Matrix3::zeros();
    for &(j, _) in neighbours {
        let d = points[j].coords - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    let mut ev: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().map(|x| x.max(0.0)).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    [ev[0], ev[1], ev[2]]
}

/// Classical edge/corner scorer from local PCA over `k` nearest neighbours.
///
/// Edge probability is a smoothstep of the surface variation
/// `σ = λ3 / (λ1 + λ2 + λ3)`; corner probability requires both a large
/// `λ2/λ1` and a large `σ`. Offsets are zero.
pub fn covariance_scorer(cloud: &PointCloud, k_neighbors: usize) -> Result<PointScores> {
    if k_neighbors < 4 {
        return Err(Error::InvalidInput("k_neighbors must be at least 4".into()));
    }
    if cloud.len() < k_neighbors + 1 {
        return Err(Error::CloudTooSmall {
            points: cloud.len(),
            needed: k_neighbors + 1,
        });
    }
    let pts = cloud.points();
    let tree = KdTree::new(pts);
    let scale = cloud.diagonal();
    let per_point: Vec<(f64, f64)> = pts
        .par_iter()
        .map(|p| {
            let nb = tree.knn(p, k_neighbors + 1);
            let [l1, l2, l3] = local_spectrum(pts, &nb);
            let total = l1 + l2 + l3;
            if !(total > 1e-24 * scale * scale) || l1 <= 0.0 {
                return (0.0, 0.0);
            }
            let sigma = l3 / total;
            let te = smoothstep(EDGE_SIGMA_LO, EDGE_SIGMA_HI, sigma);
            let tc = smoothstep(CORNER_RATIO_LO, CORNER_RATIO_HI, l2 / l1)
                * smoothstep(CORNER_SIGMA_LO, CORNER_SIGMA_HI, sigma);
            (te, tc)
        })
        .collect();
    let n = pts.len();
    Ok(PointScores {
        edge_prob: per_point.iter().map(|s| s.0).collect(),
        corner_prob: per_point.iter().map(|s| s.1).collect(),
        edge_offset: vec![Vec3::zeros(); n],
        corner_offset: vec![Vec3::zeros(); n],
    })
}

#[derive(Debug, Clone, Copy)]
pub struct CovarianceScorer {
    pub k_neighbors: usize,
}

impl Default for CovarianceScorer {
    fn default() -> Self {
        Self { k_neighbors: 16 }
    }
}

impl PointScorer for CovarianceScorer {
    fn score(&self, cloud: &PointCloud) -> Result<PointScores> {
        covariance_scorer(cloud, self.k_neighbors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn flat_plane_scores_low() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Point3> = (0..2000)
            .map(|_| Point3::new(rng.random(), rng.random(), 0.0))
            .collect();
        let s = covariance_scorer(&PointCloud::new(pts).unwrap(), 16).unwrap();
        assert!(s.edge_prob.iter().all(|&t| t <= 0.1));
        assert!(s.corner_prob.iter().all(|&t| t <= 0.1));
    }

    #[test]
    fn coincident_points_score_zero() {
        let pts = vec![Point3::new(0.3, 0.3, 0.3); 17];
        let s = covariance_scorer(&PointCloud::new(pts).unwrap(), 16).unwrap();
        assert!(s.edge_prob.iter().all(|&t| t == 0.0));
        assert!(s.corner_prob.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn too_small_cloud() {
        let pts = vec![Point3::origin(); 5];
        let r = covariance_scorer(&PointCloud::new(pts).unwrap(), 16);
        assert!(matches!(r, Err(Error::CloudTooSmall { .. })));
    }
}
