//! Cumulative distribution of normalized loss.
//!
//! Losses of one population are sorted ascending; point `k` pairs the fraction
//! of samples `(k + 1) / n` with the share of the total loss carried by those
//! `k + 1` smallest samples. A curve that hugs zero until the far right means a
//! few hard samples dominate the loss.

use alloc::vec::Vec;

// Unused when std is linked into the build, whose inherent float methods win.
#[allow(unused_imports)]
use num_traits::Float;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::losses::{alpha_t, focal_term};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Population {
    Foreground,
    Background,
}

impl Population {
    pub fn name(self) -> &'static str {
        match self {
            Population::Foreground => "foreground",
            Population::Background => "background",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfPoint {
    pub sample_fraction: f64,
    pub cumulative_loss_share: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfCurve {
    pub gamma: f64,
    pub population: Population,
    pub points: Vec<CdfPoint>,
}

impl CdfCurve {
    /// Loss share held by the smallest `fraction` of samples.
    pub fn share_at(&self, fraction: f64) -> f64 {
        let n = self.points.len();
        let k = ((fraction * n as f64).ceil() as usize).clamp(1, n);
        self.points[k - 1].cumulative_loss_share
    }

    /// Evenly spaced subset of at most `max_points` points, always keeping the
    /// last one.
    pub fn downsample(&self, max_points: usize) -> Vec<CdfPoint> {
        let n = self.points.len();
        if max_points == 0 || n <= max_points {
            return self.points.clone();
        }
        (1..=max_points).map(|i| self.points[i * n / max_points - 1]).collect()
    }
}

pub fn loss_cdf(losses: &[f64]) -> Result<Vec<CdfPoint>> {
    if losses.is_empty() {
        return Err(Error::Empty("loss_cdf"));
    }
    if losses.iter().any(|&l| !(l >= 0.0 && l.is_finite())) {
        return Err(crate::error::invalid("losses", "must be finite and non-negative"));
    }
    let mut sorted = losses.to_vec();
    sorted.sort_by(f64::total_cmp);
    let total: f64 = sorted.iter().fold(0.0, |acc, &l| acc + l);
    if total <= 0.0 {
        return Err(Error::ZeroLoss);
    }
    let n = sorted.len() as f64;
    let mut acc = 0.0;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            acc += l;
            CdfPoint {
                sample_fraction: (k + 1) as f64 / n,
                cumulative_loss_share: acc / total,
            }
        })
        .collect())
}

/// One binary prediction: its logit and whether the target is foreground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledLogit {
    pub logit: f64,
    pub is_foreground: bool,
}

/// Focal-loss CDFs of both populations for each gamma, with `alpha` held
/// fixed. Curves come out as `[fg(g0), bg(g0), fg(g1), bg(g1), ...]`.
pub fn cdf_gamma_sweep(samples: &[LabeledLogit], gammas: &[f64], alpha: f64) -> Result<Vec<CdfCurve>> {
    let fg: Vec<f64> = samples.iter().filter(|s| s.is_foreground).map(|s| s.logit).collect();
    let bg: Vec<f64> = samples.iter().filter(|s| !s.is_foreground).map(|s| s.logit).collect();
    if fg.is_empty() {
        return Err(Error::Empty("foreground population"));
    }
    if bg.is_empty() {
        return Err(Error::Empty("background population"));
    }
    let mut curves = Vec::with_capacity(2 * gammas.len());
    for &gamma in gammas {
        if !(gamma >= 0.0) {
            return Err(crate::error::invalid("gamma", "must be non-negative"));
        }
        for (population, logits, is_fg) in [
            (Population::Foreground, &fg, true),
            (Population::Background, &bg, false),
        ] {
            let losses: Vec<f64> = logits
                .iter()
                .map(|&x| focal_term(x, is_fg, gamma, alpha_t(is_fg, alpha)))
                .collect();
            curves.push(CdfCurve {
                gamma,
                population,
                points: loss_cdf(&losses)?,
            });
        }
    }
    Ok(curves)
}

/// Seeded logits resembling a trained dense detector: background logits drawn
/// from N(-4, 1.5^2) (mostly easy negatives with a hard tail), foreground from
/// N(0, 3^2) (positives spread from confidently right to confidently wrong).
pub fn synthetic_logit_population(n_background: usize, n_foreground: usize, seed: u64) -> Vec<LabeledLogit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bg = Normal::new(-4.0, 1.5).expect("valid normal");
    let fg = Normal::new(0.0, 3.0).expect("valid normal");
    let mut out = Vec::with_capacity(n_background + n_foreground);
    for _ in 0..n_background {
        out.push(LabeledLogit {
            logit: bg.sample(&mut rng),
            is_foreground: false,
        });
    }
    for _ in 0..n_foreground {
        out.push(LabeledLogit {
            logit: fg.sample(&mut rng),
            is_foreground: true,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::bce;
    use alloc::vec;

    fn pairs(points: &[CdfPoint]) -> Vec<(f64, f64)> {
        points
            .iter()
            .map(|p| (p.sample_fraction, p.cumulative_loss_share))
            .collect()
    }

    #[test]
    fn uniform_losses() {
        let p = loss_cdf(&[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(pairs(&p), vec![(0.25, 0.25), (0.5, 0.5), (0.75, 0.75), (1.0, 1.0)]);
    }

    #[test]
    fn two_losses() {
        let p = loss_cdf(&[3.0, 1.0]).unwrap();
        assert_eq!(pairs(&p), vec![(0.5, 0.25), (1.0, 1.0)]);
    }

    #[test]
    fn errors() {
        assert_eq!(loss_cdf(&[]), Err(Error::Empty("loss_cdf")));
        assert_eq!(loss_cdf(&[0.0, 0.0]), Err(Error::ZeroLoss));
        let only_bg = [LabeledLogit {
            logit: 1.0,
            is_foreground: false,
        }];
        assert!(cdf_gamma_sweep(&only_bg, &[0.0], 0.25).is_err());
    }

    #[test]
    fn gamma_zero_background_is_cross_entropy_cdf() {
        let pop = synthetic_logit_population(500, 20, 3);
        let curves = cdf_gamma_sweep(&pop, &[0.0], 0.25).unwrap();
        let bg_ce: Vec<f64> = pop
            .iter()
            .filter(|s| !s.is_foreground)
            .map(|s| bce(s.logit, false))
            .collect();
        // alpha_t = 0.75 scales every loss equally, so shares are unchanged.
        let want = loss_cdf(&bg_ce).unwrap();
        for (a, b) in curves[1].points.iter().zip(&want) {
            assert_eq!(a.sample_fraction, b.sample_fraction);
            assert!((a.cumulative_loss_share - b.cumulative_loss_share).abs() < 1e-12);
        }
    }

    #[test]
    fn share_at_ninety_percent() {
        let c = CdfCurve {
            gamma: 0.0,
            population: Population::Background,
            points: loss_cdf(&[1.0; 10]).unwrap(),
        };
        assert!((c.share_at(0.9) - 0.9).abs() < 1e-15);
        assert_eq!(c.downsample(5).len(), 5);
        assert_eq!(c.downsample(5).last().unwrap().sample_fraction, 1.0);
    }
}
