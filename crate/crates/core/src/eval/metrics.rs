//! Error metrics between predicted and reference amplitudes.

use serde::{Deserialize, Serialize};

use crate::acoustics::to_db_clamped;
use crate::error::{Error, Result};

fn check_pair(predicted: &[f64], truth: &[f64]) -> Result<()> {
    if predicted.len() != truth.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} predictions vs {} reference values",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::invalid("metrics need at least one point"));
    }
    if predicted.iter().chain(truth).any(|v| v.is_nan()) {
        return Err(Error::invalid("metrics inputs contain NaN"));
    }
    Ok(())
}

/// Root-mean-square difference in dB; both sides are clamped at the dB floor.
pub fn rms_error_db(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(predicted, truth)?;
    let sum: f64 = predicted
        .iter()
        .zip(truth)
        .map(|(&p, &t)| (to_db_clamped(p) - to_db_clamped(t)).powi(2))
        .sum();
    Ok((sum / predicted.len() as f64).sqrt())
}

/// Mean absolute error in linear units.
pub fn mate(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(predicted, truth)?;
    let sum: f64 = predicted.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum();
    Ok(sum / predicted.len() as f64)
}

/// Mean absolute error in dB.
pub fn mate_db(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(predicted, truth)?;
    let sum: f64 = predicted
        .iter()
        .zip(truth)
        .map(|(&p, &t)| (to_db_clamped(p) - to_db_clamped(t)).abs())
        .sum();
    Ok(sum / predicted.len() as f64)
}

/// 1-based ranks; ties share their mean rank.
fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation.
pub fn spearman(predicted: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(predicted, truth)?;
    if predicted.len() < 2 {
        return Err(Error::invalid("rank correlation needs at least two points"));
    }
    let a = average_ranks(predicted);
    let b = average_ranks(truth);
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(&b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation("one of the inputs is constant".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub count: usize,
    /// Points left out because a value was missing.
    pub skipped: usize,
    pub rms_error_db: f64,
    pub mate_linear: f64,
    pub mate_db: f64,
    /// Absent when either input is constant.
    pub spearman_rho: Option<f64>,
}

impl MetricsReport {
    pub fn compute(predicted: &[f64], truth: &[f64]) -> Result<Self> {
        check_pair(predicted, truth)?;
        let spearman_rho = if predicted.len() < 2 {
            None
        } else {
            match spearman(predicted, truth) {
                Ok(r) => Some(r),
                Err(Error::UndefinedCorrelation(_)) => None,
                Err(e) => return Err(e),
            }
        };
        Ok(Self {
            count: predicted.len(),
            skipped: 0,
            rms_error_db: rms_error_db(predicted, truth)?,
            mate_linear: mate(predicted, truth)?,
            mate_db: mate_db(predicted, truth)?,
            spearman_rho,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rms_examples() {
        let t = [0.3, 1.0, 2.5];
        assert_eq!(rms_error_db(&t, &t).unwrap(), 0.0);
        let doubled: Vec<f64> = t.iter().map(|v| 2.0 * v).collect();
        assert!((rms_error_db(&doubled, &t).unwrap() - 20.0 * 2f64.log10()).abs() < 1e-12);
        assert!((rms_error_db(&doubled, &t).unwrap() - 6.0206).abs() < 1e-4);
        let r = rms_error_db(&[10.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!((r - 200f64.sqrt()).abs() < 1e-12);
        assert!(rms_error_db(&[1.0], &[1.0, 2.0]).is_err());
        assert!(rms_error_db(&[0.0], &[1.0]).unwrap().is_finite());
    }

    #[test]
    fn mate_examples() {
        let t = [0.5, 0.7];
        assert_eq!(mate(&t, &t).unwrap(), 0.0);
        assert!((mate(&[0.51, 0.71], &t).unwrap() - 0.01).abs() < 1e-12);
        assert!((mate(&[0.6, 0.4], &t).unwrap() - 0.2).abs() < 1e-12);
        assert!((mate_db(&[2.0, 1.0], &[1.0, 1.0]).unwrap() - 10.0 * 2f64.log10()).abs() < 1e-12);
        assert!(mate(&[], &[]).is_err());
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&[1.0, 5.0, 9.0], &[0.1, 0.2, 7.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        assert!((spearman(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(spearman(&[1.0, 1.0], &[1.0, 2.0]), Err(Error::UndefinedCorrelation(_))));
        assert!(spearman(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn ties_share_mean_rank() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn report_tolerates_constant_prediction() {
        let r = MetricsReport::compute(&[1.0, 1.0], &[1.0, 2.0]).unwrap();
        assert_eq!(r.spearman_rho, None);
        assert_eq!(r.count, 2);
        assert!(MetricsReport::compute(&[1.0], &[1.0, 2.0]).is_err());
    }

    fn pairs() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((1e-3f64..10.0, 1e-3f64..10.0), 2..40)
    }

    proptest! {
        #[test]
        fn spearman_is_rank_invariant(v in pairs()) {
            let (a, b): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            if let Ok(r) = spearman(&a, &b) {
                prop_assert!((-1.0..=1.0).contains(&r));
                let a2: Vec<f64> = a.iter().map(|x| x.ln() * 3.0 + 1.0).collect();
                let b2: Vec<f64> = b.iter().map(|x| -(-x).exp()).collect();
                let r2 = spearman(&a2, &b2).unwrap();
                prop_assert!((r - r2).abs() < 1e-12);
            }
        }

        #[test]
        fn errors_vanish_only_on_equality(v in pairs()) {
            let (a, b): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            prop_assert_eq!(rms_error_db(&a, &a).unwrap(), 0.0);
            prop_assert_eq!(mate(&b, &b).unwrap(), 0.0);
            let differ = a.iter().zip(&b).any(|(x, y)| x != y);
            prop_assert_eq!(rms_error_db(&a, &b).unwrap() > 0.0, differ);
            prop_assert_eq!(mate(&a, &b).unwrap() > 0.0, differ);
        }
    }
}
