//! Simulated object detector and the probabilistic-detection filter.
//!
//! Each real step produces a per-frame likelihood over candidate locations
//! (reset every frame). The running posterior is the normalized product of
//! those likelihoods, and exploration may stop once a location in the
//! current field of view reaches the threshold `tau = c / k`.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::GridMap;

/// Detections at or below this score are discarded before use.
pub const SCORE_THRESHOLD: f64 = 0.9;

/// Upper bound applied to `c / k`.
pub const MAX_TAU: f64 = 0.99;

#[derive(Debug, Error, PartialEq)]
pub enum DetectionError {
    #[error("invalid detector statistics: {0}")]
    InvalidStats(String),
    #[error("detection at location {0} lies outside the field of view")]
    DetectionOutsideFov(usize),
    #[error("likelihood field is zero everywhere")]
    AllZeroField,
    #[error("prior and likelihood have disjoint support")]
    DegeneratePosterior,
    #[error("field length {found} does not match {expected} locations")]
    LengthMismatch { expected: usize, found: usize },
    #[error("confidence constant c={c} must be in 1..={k}")]
    InvalidThreshold { c: u32, k: usize },
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Detector confidence scores, uniform on `(min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistribution {
    pub min: f64,
    pub max: f64,
}

impl Default for ScoreDistribution {
    fn default() -> Self {
        ScoreDistribution { min: 0.9, max: 1.0 }
    }
}

impl ScoreDistribution {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        self.min + (self.max - self.min) * (1.0 - u)
    }

    /// Probability that a sampled score clears [`SCORE_THRESHOLD`].
    pub fn pass_probability(&self) -> f64 {
        if self.max <= self.min {
            return if self.max > SCORE_THRESHOLD { 1.0 } else { 0.0 };
        }
        ((self.max - self.min.max(SCORE_THRESHOLD)) / (self.max - self.min)).clamp(0.0, 1.0)
    }
}

/// Post-threshold confusion statistics of the detector for one target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorStats {
    pub precision: f64,
    pub recall: f64,
    /// Per-frame probability of a false positive when the target is not
    /// detected and some candidate is in view.
    pub fp_rate: f64,
    #[serde(default)]
    pub scores: ScoreDistribution,
}

impl Default for DetectorStats {
    fn default() -> Self {
        DetectorStats::ground_truth()
    }
}

impl DetectorStats {
    /// Perfect detector: every visible target found, no false positives.
    pub fn ground_truth() -> Self {
        DetectorStats {
            precision: 1.0,
            recall: 1.0,
            fp_rate: 0.0,
            scores: ScoreDistribution::default(),
        }
    }

    pub fn f1(&self) -> f64 {
        f1_score(self.precision, self.recall)
    }

    pub fn validate(&self) -> Result<(), DetectionError> {
        for (name, v) in [
            ("precision", self.precision),
            ("recall", self.recall),
            ("fp_rate", self.fp_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(DetectionError::InvalidStats(format!("{name}={v} outside [0, 1]")));
            }
        }
        let pass = self.scores.pass_probability();
        if (self.recall > 0.0 || self.fp_rate > 0.0) && pass <= 0.0 {
            return Err(DetectionError::InvalidStats(
                "score distribution never clears the threshold".into(),
            ));
        }
        if self.recall > pass || self.fp_rate > pass {
            return Err(DetectionError::InvalidStats(format!(
                "rates above the score pass probability {pass}"
            )));
        }
        Ok(())
    }

    fn raw_rate(&self, rate: f64) -> f64 {
        if rate == 0.0 {
            0.0
        } else {
            (rate / self.scores.pass_probability()).min(1.0)
        }
    }
}

/// A surfaced detection: the estimated floor location and its score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub location: usize,
    pub score: f64,
}

/// One detector frame.
#[derive(Debug, Clone, Copy)]
pub struct Frame<'a> {
    pub step: usize,
    /// Locations in the current field of view, ascending.
    pub fov: &'a [usize],
    pub true_location: usize,
}

/// Source of detections for the real-world loop.
pub trait Detector {
    fn detect(&mut self, frame: &Frame<'_>, rng: &mut dyn RngCore) -> Option<Detection>;
}

/// Samples detections from [`DetectorStats`]. Raw emission rates are scaled
/// by the score pass probability so the surfaced rates match the stats.
pub fn simulate_detection<R: Rng + ?Sized>(
    fov: &[usize],
    true_location: usize,
    stats: &DetectorStats,
    rng: &mut R,
) -> Option<Detection> {
    if fov.binary_search(&true_location).is_ok() && rng.random_bool(stats.raw_rate(stats.recall)) {
        let score = stats.scores.sample(rng);
        if score > SCORE_THRESHOLD {
            return Some(Detection {
                location: true_location,
                score,
            });
        }
    }
    if fov.is_empty() || stats.fp_rate == 0.0 {
        return None;
    }
    if rng.random_bool(stats.raw_rate(stats.fp_rate)) {
        let location = fov[rng.random_range(0..fov.len())];
        let score = stats.scores.sample(rng);
        if score > SCORE_THRESHOLD {
            return Some(Detection { location, score });
        }
    }
    None
}

/// [`Detector`] backed by [`simulate_detection`].
#[derive(Debug, Clone)]
pub struct SimulatedDetector {
    pub stats: DetectorStats,
}

impl Detector for SimulatedDetector {
    fn detect(&mut self, frame: &Frame<'_>, rng: &mut dyn RngCore) -> Option<Detection> {
        simulate_detection(frame.fov, frame.true_location, &self.stats, rng)
    }
}

/// How a frame without detections weighs locations inside the view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LikelihoodConvention {
    /// `1 - F1` inside the view, `F1` outside: not seeing the target is
    /// evidence against the locations in view.
    #[default]
    Figure,
    /// `F1` inside, `1 - F1` outside.
    Text,
}

fn normalize(mut values: Vec<f64>) -> Result<Vec<f64>, DetectionError> {
    let total: f64 = values.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(DetectionError::AllZeroField);
    }
    values.iter_mut().for_each(|v| *v /= total);
    Ok(values)
}

/// Per-frame likelihood over the `k` locations, summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodField(Vec<f64>);

impl LikelihoodField {
    /// Normalizes arbitrary non-negative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self, DetectionError> {
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(DetectionError::InvalidStats("negative likelihood weight".into()));
        }
        normalize(weights).map(LikelihoodField)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Posterior over the `k` locations given every frame so far.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityField(Vec<f64>);

impl ProbabilityField {
    pub fn uniform(k: usize) -> Self {
        ProbabilityField(vec![1.0 / k as f64; k])
    }

    pub fn from_weights(weights: Vec<f64>) -> Result<Self, DetectionError> {
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(DetectionError::InvalidStats("negative probability".into()));
        }
        normalize(weights).map(ProbabilityField)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, location: usize) -> f64 {
        self.0[location]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Location of highest probability, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (j, p) in self.0.iter().enumerate() {
            if *p > self.0[best] {
                best = j;
            }
        }
        best
    }
}

/// Builds the per-frame likelihood from the view and the detection, if any.
///
/// With a detection, locations outside the view get zero and those inside
/// an isotropic Gaussian of their cell distance to the detected location.
/// Without one, inside and outside get the F1-derived weights of `convention`.
pub fn step_likelihood(
    fov: &[usize],
    detection: Option<&Detection>,
    f1: f64,
    sigma: f64,
    map: &GridMap,
    convention: LikelihoodConvention,
) -> Result<LikelihoodField, DetectionError> {
    let k = map.num_candidates();
    let mut in_view = vec![false; k];
    for &j in fov {
        in_view[j] = true;
    }
    let weights = match detection {
        Some(det) => {
            if det.location >= k || !in_view[det.location] {
                return Err(DetectionError::DetectionOutsideFov(det.location));
            }
            let (cx, cy) = map.candidate_cell(det.location);
            let two_var = 2.0 * sigma * sigma;
            (0..k)
                .map(|j| {
                    if !in_view[j] {
                        return 0.0;
                    }
                    let (x, y) = map.candidate_cell(j);
                    let dx = x as f64 - cx as f64;
                    let dy = y as f64 - cy as f64;
                    (-(dx * dx + dy * dy) / two_var).exp()
                })
                .collect()
        }
        None => {
            let (inside, outside) = match convention {
                LikelihoodConvention::Figure => (1.0 - f1, f1),
                LikelihoodConvention::Text => (f1, 1.0 - f1),
            };
            in_view.iter().map(|&v| if v { inside } else { outside }).collect()
        }
    };
    normalize(weights).map(LikelihoodField)
}

/// Bayesian update `p_j <- p_j d_j / sum_i p_i d_i`.
pub fn update_posterior(
    prior: &ProbabilityField,
    likelihood: &LikelihoodField,
) -> Result<ProbabilityField, DetectionError> {
    if prior.len() != likelihood.len() {
        return Err(DetectionError::LengthMismatch {
            expected: prior.len(),
            found: likelihood.len(),
        });
    }
    let product: Vec<f64> = prior.0.iter().zip(&likelihood.0).map(|(p, d)| p * d).collect();
    normalize(product)
        .map(ProbabilityField)
        .map_err(|_| DetectionError::DegeneratePosterior)
}

/// Exit threshold `tau = c / k`, capped at [`MAX_TAU`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitThreshold {
    c: u32,
    tau: f64,
}

impl ExitThreshold {
    pub fn new(c: u32, k: usize) -> Result<Self, DetectionError> {
        if c == 0 || c as usize > k {
            return Err(DetectionError::InvalidThreshold { c, k });
        }
        Ok(ExitThreshold {
            c,
            tau: (f64::from(c) / k as f64).min(MAX_TAU),
        })
    }

    pub fn c(&self) -> u32 {
        self.c
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

/// Probabilities closer than this are equal for the exit test, so the
/// decision survives renormalization round-off.
const EXIT_EPS: f64 = 1e-12;

/// Most probable location that is both in view and at or above `tau`; the
/// lowest index wins ties.
pub fn check_exit(field: &ProbabilityField, visible: &[bool], threshold: &ExitThreshold) -> Option<usize> {
    debug_assert_eq!(field.len(), visible.len());
    let mut best: Option<usize> = None;
    for (j, (&p, &seen)) in field.0.iter().zip(visible).enumerate() {
        if seen && p >= threshold.tau - EXIT_EPS && best.is_none_or(|b| p > field.0[b] + EXIT_EPS) {
            best = Some(j);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn f1_cases() {
        assert_eq!(f1_score(1.0, 1.0), 1.0);
        assert!(close(f1_score(0.5, 1.0), 2.0 / 3.0, 1e-15));
        assert_eq!(f1_score(0.0, 0.0), 0.0);
    }

    #[test]
    fn perfect_detector_in_view() {
        let stats = DetectorStats::ground_truth();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let det = simulate_detection(&[1, 3], 3, &stats, &mut rng).unwrap();
            assert_eq!(det.location, 3);
            assert!(det.score > SCORE_THRESHOLD);
        }
    }

    #[test]
    fn no_false_positive_rate_means_silence_when_out_of_view() {
        let stats = DetectorStats {
            recall: 0.7,
            fp_rate: 0.0,
            ..DetectorStats::ground_truth()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..1000).all(|_| simulate_detection(&[0, 1, 2], 5, &stats, &mut rng).is_none()));
    }

    #[test]
    fn true_positive_frequency() {
        let stats = DetectorStats {
            precision: 0.8,
            recall: 0.8,
            fp_rate: 0.05,
            scores: ScoreDistribution::default(),
        };
        let fov: Vec<usize> = (0..10).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let hits = (0..100_000)
            .filter(|_| simulate_detection(&fov, 4, &stats, &mut rng).is_some_and(|d| d.location == 4))
            .count();
        let freq = hits as f64 / 100_000.0;
        assert!(close(freq, 0.8, 0.01), "{freq}");
    }

    #[test]
    fn suppressed_scores_are_folded_into_rates() {
        // half the scores fall at or below 0.9, so raw rates are doubled
        let stats = DetectorStats {
            precision: 0.8,
            recall: 0.4,
            fp_rate: 0.1,
            scores: ScoreDistribution { min: 0.8, max: 1.0 },
        };
        stats.validate().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let tp = (0..n)
            .filter(|_| simulate_detection(&[2], 2, &stats, &mut rng).is_some())
            .count() as f64
            / n as f64;
        // in view: recall plus false positives on the missed frames, all at 2
        assert!(close(tp, 0.4 + 0.6 * 0.1, 0.01), "{tp}");
        let fp = (0..n)
            .filter(|_| simulate_detection(&[2], 7, &stats, &mut rng).is_some())
            .count() as f64
            / n as f64;
        assert!(close(fp, 0.1, 0.006), "{fp}");
        assert!(DetectorStats { recall: 0.6, ..stats }.validate().is_err());
    }

    fn ten_location_row() -> GridMap {
        GridMap::parse("oooooooooo").unwrap()
    }

    #[test]
    fn no_detection_likelihood_figure_convention() {
        let map = ten_location_row();
        let d = step_likelihood(&[3, 4], None, 0.8, 1.0, &map, LikelihoodConvention::Figure).unwrap();
        let s = d.as_slice();
        assert!(close(s[3], 0.2 / 6.8, 1e-12) && close(s[4], 0.2 / 6.8, 1e-12));
        for j in [0, 1, 2, 5, 6, 7, 8, 9] {
            assert!(close(s[j], 0.8 / 6.8, 1e-12));
        }
        assert!(close(s.iter().sum::<f64>(), 1.0, 1e-12));
        assert!(close(s[3], 0.02941, 1e-5) && close(s[0], 0.11765, 1e-5));

        let t = step_likelihood(&[3, 4], None, 0.8, 1.0, &map, LikelihoodConvention::Text).unwrap();
        assert!(close(t.as_slice()[3], 0.8 / 3.2, 1e-12));
    }

    #[test]
    fn detection_likelihood_cases() {
        let map = ten_location_row();
        let det = Detection {
            location: 5,
            score: 0.95,
        };
        let d = step_likelihood(&[5], Some(&det), 0.8, 3.0, &map, LikelihoodConvention::Figure).unwrap();
        let mut expected = [0.0; 10];
        expected[5] = 1.0;
        assert_eq!(d.as_slice(), &expected[..]);

        let d = step_likelihood(&[5, 6], Some(&det), 0.8, 1.0, &map, LikelihoodConvention::Figure).unwrap();
        let s = d.as_slice();
        assert!(close(s[5] / s[6], 1.6487, 1e-4));
        assert!(close(s[5], 0.6225, 1e-4));
        assert_eq!(s.iter().filter(|v| **v > 0.0).count(), 2);

        assert_eq!(
            step_likelihood(&[4], Some(&det), 0.8, 1.0, &map, LikelihoodConvention::Figure),
            Err(DetectionError::DetectionOutsideFov(5))
        );
    }

    #[test]
    fn perfect_detector_with_everything_in_view_is_contradictory() {
        let map = GridMap::parse("oo").unwrap();
        assert_eq!(
            step_likelihood(&[0, 1], None, 1.0, 1.0, &map, LikelihoodConvention::Figure),
            Err(DetectionError::AllZeroField)
        );
    }

    #[test]
    fn posterior_updates() {
        let uniform = ProbabilityField::uniform(4);
        let d = LikelihoodField::from_weights(vec![0.4, 0.2, 0.2, 0.2]).unwrap();
        let post = update_posterior(&uniform, &d).unwrap();
        for (a, b) in post.as_slice().iter().zip([0.4, 0.2, 0.2, 0.2]) {
            assert!(close(*a, b, 1e-15));
        }

        let prior = ProbabilityField::from_weights(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let flat = LikelihoodField::from_weights(vec![1.0; 4]).unwrap();
        let same = update_posterior(&prior, &flat).unwrap();
        for (a, b) in same.as_slice().iter().zip(prior.as_slice()) {
            assert!(close(*a, *b, 1e-15));
        }

        let prior = ProbabilityField::from_weights(vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let d = LikelihoodField::from_weights(vec![0.1, 0.3, 0.3, 0.3]).unwrap();
        let post = update_posterior(&prior, &d).unwrap();
        // 0.05 / 0.20 and 0.15 / 0.20
        let expected = [0.25, 0.75, 0.0, 0.0];
        for (a, b) in post.as_slice().iter().zip(expected) {
            assert!(close(*a, b, 1e-12));
        }

        let disjoint = LikelihoodField::from_weights(vec![0.0, 0.0, 0.5, 0.5]).unwrap();
        assert_eq!(
            update_posterior(&prior, &disjoint),
            Err(DetectionError::DegeneratePosterior)
        );
    }

    #[test]
    fn exit_check_cases() {
        let field = ProbabilityField::from_weights(vec![0.1, 0.1, 0.5, 0.3]).unwrap();
        let tau = ExitThreshold::new(1, 10).unwrap();
        assert!(close(tau.tau(), 0.1, 1e-15));
        assert_eq!(check_exit(&field, &[false, true, true, false], &tau), Some(2));

        let field = ProbabilityField::from_weights(vec![0.05, 0.05, 0.85, 0.05]).unwrap();
        let tau = ExitThreshold::new(1, 4).unwrap();
        assert_eq!(check_exit(&field, &[true, true, false, true], &tau), None);

        // k = 100, c = 10: two visible locations clear tau = 0.1
        let mut p = vec![0.0; 100];
        p[10] = 0.12;
        p[20] = 0.30;
        let rest = (1.0 - 0.42) / 98.0;
        for (j, v) in p.iter_mut().enumerate() {
            if j != 10 && j != 20 {
                *v = rest;
            }
        }
        let field = ProbabilityField::from_weights(p).unwrap();
        let tau = ExitThreshold::new(10, 100).unwrap();
        let mut visible = vec![false; 100];
        visible[10] = true;
        visible[20] = true;
        visible[30] = true;
        assert_eq!(check_exit(&field, &visible, &tau), Some(20));
    }

    #[test]
    fn threshold_bounds() {
        assert!(ExitThreshold::new(0, 5).is_err());
        assert!(ExitThreshold::new(6, 5).is_err());
        assert_eq!(ExitThreshold::new(5, 5).unwrap().tau(), MAX_TAU);
    }
}
