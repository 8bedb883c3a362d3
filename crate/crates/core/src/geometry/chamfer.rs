use super::{dist2, KdTree, Point3};
use crate::error::{Error, Result};

/// Mean over `from` of the distance to the nearest point of `to`.
pub fn directed_mean_distance(from: &[Point3], to: &[Point3]) -> Result<f64> {
    if from.is_empty() || to.is_empty() {
        return Err(Error::EmptySet);
    }
    // Small targets are cheaper to scan than to index.
    let sum: f64 = if to.len() <= 32 {
        from.iter()
            .map(|a| to.iter().map(|b| dist2(a, b)).fold(f64::INFINITY, f64::min).sqrt())
            .sum()
    } else {
        let tree = KdTree::new(to);
        from.iter()
            .map(|a| tree.nearest(a).map_or(f64::INFINITY, |(_, d2)| d2.sqrt()))
            .sum()
    };
    Ok(sum / from.len() as f64)
}

/// Symmetric Chamfer distance: the sum of the two directed mean
/// nearest-neighbour distances (non-squared).
pub fn chamfer_distance(a: &[Point3], b: &[Point3]) -> Result<f64> {
    let ab = directed_mean_distance(a, b)?;
    let ba = directed_mean_distance(b, a)?;
    Ok(ab + ba)
}

/// O(|A|·|B|) reference implementation.
pub fn chamfer_distance_brute(a: &[Point3], b: &[Point3]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let directed = |from: &[Point3], to: &[Point3]| {
        let mut sum = 0.0;
        for p in from {
            let mut best = f64::INFINITY;
            for q in to {
                let d = dist2(p, q).sqrt();
                if d < best {
                    best = d;
                }
            }
            sum += best;
        }
        sum / from.len() as f64
    };
    let ab = directed(a, b);
    let ba = directed(b, a);
    Ok(ab + ba)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_sets_have_zero_distance() {
        let a = vec![Point3::new(0., 1., 2.), Point3::new(3., 4., 5.)];
        assert_eq!(chamfer_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn unit_separation() {
        let a = [Point3::origin()];
        let b = [Point3::new(1., 0., 0.)];
        assert_eq!(chamfer_distance(&a, &b).unwrap(), 2.0);
    }

    #[test]
    fn empty_is_error() {
        assert!(matches!(chamfer_distance(&[], &[Point3::origin()]), Err(Error::EmptySet)));
    }

    #[test]
    fn fifty_point_sets_match_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let gen = |rng: &mut ChaCha8Rng| -> Vec<Point3> {
            (0..50)
                .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
                .collect()
        };
        let a = gen(&mut rng);
        let b = gen(&mut rng);
        assert_eq!(chamfer_distance(&a, &b).unwrap(), chamfer_distance_brute(&a, &b).unwrap());
        assert_eq!(chamfer_distance(&a, &b).unwrap(), chamfer_distance(&b, &a).unwrap());
    }
}
