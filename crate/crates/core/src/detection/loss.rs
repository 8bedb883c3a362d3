use super::{DetectionConfig, GroundTruthLabels, PointScores};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

const PROB_CLAMP: f64 = 1e-7;

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, actual })
    }
}

/// Mean focal loss `−α_t (1 − p_t)^γ ln p_t` with probabilities clamped to
/// `[1e-7, 1 − 1e-7]`. `alpha` weights positives and `1 − alpha` negatives;
/// `alpha = 1` switches class balancing off so that `γ = 0` gives plain
/// binary cross-entropy.
pub fn focal_loss(probs: &[f64], labels: &[bool], gamma: f64, alpha: f64) -> Result<f64> {
    check_len(probs.len(), labels.len())?;
    if probs.is_empty() {
        return Ok(0.0);
    }
    let (w_pos, w_neg) = if alpha >= 1.0 { (1.0, 1.0) } else { (alpha, 1.0 - alpha) };
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            let (pt, w) = if y { (p, w_pos) } else { (1.0 - p, w_neg) };
            -w * (1.0 - pt).powf(gamma) * pt.ln()
        })
        .sum();
    Ok(total / probs.len() as f64)
}

/// Mean binary cross-entropy with the same clamping as [`focal_loss`].
pub fn binary_cross_entropy(probs: &[f64], labels: &[bool]) -> Result<f64> {
    check_len(probs.len(), labels.len())?;
    if probs.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            if y {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    Ok(total / probs.len() as f64)
}

/// Smooth-L1 summed over the three components, averaged over masked points.
pub fn smooth_l1(pred: &[Vec3], target: &[Vec3], mask: &[bool]) -> Result<f64> {
    check_len(pred.len(), target.len())?;
    check_len(pred.len(), mask.len())?;
    let mut total = 0.0;
    let mut count = 0usize;
    for ((d, t), &m) in pred.iter().zip(target).zip(mask) {
        if !m {
            continue;
        }
        count += 1;
        total += (d - t)
            .iter()
            .map(|x| {
                let a = x.abs();
                if a < 1.0 {
                    0.5 * a * a
                } else {
                    a - 0.5
                }
            })
            .sum::<f64>();
    }
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}

/// `L_edge + L_corner`, each a focal classification term plus a
/// label-masked smooth-L1 offset term weighted by λ.
pub fn detection_loss(
    scores: &PointScores,
    gt: &GroundTruthLabels,
    cfg: &DetectionConfig,
) -> Result<f64> {
    check_len(scores.len(), gt.len())?;
    scores.validate()?;
    gt.validate()?;
    let (g, a) = (cfg.focal_gamma, cfg.focal_alpha);
    let edge = focal_loss(&scores.edge_prob, &gt.edge, g, a)?
        + cfg.lambda_e * smooth_l1(&scores.edge_offset, &gt.edge_offset, &gt.edge)?;
    let corner = focal_loss(&scores.corner_prob, &gt.corner, g, a)?
        + cfg.lambda_c * smooth_l1(&scores.corner_offset, &gt.corner_offset, &gt.corner)?;
    Ok(edge + corner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::oracle_scorer;

    #[test]
    fn single_positive_at_half() {
        let l = focal_loss(&[0.5], &[true], 2.0, 0.25).unwrap();
        let expected = 0.25 * 0.25 * 2f64.ln();
        assert!((l - expected).abs() < 1e-15);
        assert!((l - 0.04332).abs() < 1e-5);
    }

    #[test]
    fn perfect_predictions_near_zero() {
        let l = focal_loss(&[1.0, 0.0, 1.0], &[true, false, true], 2.0, 0.25).unwrap();
        assert!(l <= 1e-5);
    }

    #[test]
    fn gamma_zero_alpha_one_is_cross_entropy() {
        let p = [0.1, 0.35, 0.8, 0.999, 0.5];
        let y = [true, false, true, false, false];
        let f = focal_loss(&p, &y, 0.0, 1.0).unwrap();
        let ce = binary_cross_entropy(&p, &y).unwrap();
        assert!((f - ce).abs() < 1e-12);
    }

    #[test]
    fn smooth_l1_branches() {
        let z = [Vec3::zeros()];
        let l = smooth_l1(&[Vec3::new(0.5, 0., 0.)], &z, &[true]).unwrap();
        assert_eq!(l, 0.125);
        let l = smooth_l1(&[Vec3::new(2.0, 0., 0.)], &z, &[true]).unwrap();
        assert_eq!(l, 1.5);
        assert_eq!(smooth_l1(&z, &z, &[true]).unwrap(), 0.0);
        assert_eq!(smooth_l1(&[Vec3::new(5., 5., 5.)], &z, &[false]).unwrap(), 0.0);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            focal_loss(&[0.5], &[true, false], 2.0, 0.25),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn oracle_detection_loss_vanishes() {
        let gt = GroundTruthLabels {
            edge: vec![true, false, true],
            corner: vec![false, false, true],
            edge_offset: vec![Vec3::new(0.1, 0., 0.), Vec3::zeros(), Vec3::new(0., 0.2, 0.)],
            corner_offset: vec![Vec3::zeros(), Vec3::zeros(), Vec3::new(0.3, 0.3, 0.)],
            curve_id: vec![Some(0), None, Some(0)],
        };
        let cfg = DetectionConfig::default();
        assert!(detection_loss(&oracle_scorer(&gt), &gt, &cfg).unwrap() <= 1e-5);
        let no_reg = DetectionConfig { lambda_e: 0.0, lambda_c: 0.0, ..cfg.clone() };
        let mut s = oracle_scorer(&gt);
        s.edge_prob[0] = 0.4;
        s.edge_offset[0] = Vec3::new(3.0, 0.0, 0.0);
        let expected = focal_loss(&s.edge_prob, &gt.edge, 2.0, 0.25).unwrap()
            + focal_loss(&s.corner_prob, &gt.corner, 2.0, 0.25).unwrap();
        assert_eq!(detection_loss(&s, &gt, &no_reg).unwrap(), expected);
    }
}
