use serde::{Deserialize, Serialize};

use super::episode::{EpisodeResult, FailureClass};

/// The per-episode quantities the metrics need.
pub trait Outcome {
    fn success(&self) -> bool;
    fn steps(&self) -> usize;
    fn shortest(&self) -> usize;
    fn failure(&self) -> Option<FailureClass>;

    /// Success-weighted path-length term `S * l / max(p, l)`.
    fn spl_term(&self) -> f64 {
        if !self.success() {
            return 0.0;
        }
        let (l, p) = (self.shortest(), self.steps());
        if p.max(l) == 0 {
            1.0
        } else {
            l as f64 / p.max(l) as f64
        }
    }
}

impl Outcome for EpisodeResult {
    fn success(&self) -> bool {
        self.success
    }
    fn steps(&self) -> usize {
        self.steps_taken
    }
    fn shortest(&self) -> usize {
        self.shortest_possible
    }
    fn failure(&self) -> Option<FailureClass> {
        self.failure_class
    }
}

/// One CSV row of a suite run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub scenario: String,
    pub variant: String,
    pub target: String,
    pub seed: u64,
    pub success: bool,
    pub steps: usize,
    pub shortest: usize,
    pub spl_term: f64,
    pub failure_class: String,
    pub exit_step: Option<usize>,
    pub docking_steps: usize,
}

impl From<&EpisodeResult> for EpisodeRecord {
    fn from(r: &EpisodeResult) -> Self {
        EpisodeRecord {
            scenario: r.scenario.clone(),
            variant: r.variant.to_string(),
            target: r.target.clone(),
            seed: r.seed,
            success: r.success,
            steps: r.steps_taken,
            shortest: r.shortest_possible,
            spl_term: r.spl_term(),
            failure_class: r.failure_class.map_or("none", FailureClass::name).to_string(),
            exit_step: r.exit_step,
            docking_steps: r.docking_steps,
        }
    }
}

impl Outcome for EpisodeRecord {
    fn success(&self) -> bool {
        self.success
    }
    fn steps(&self) -> usize {
        self.steps
    }
    fn shortest(&self) -> usize {
        self.shortest
    }
    fn failure(&self) -> Option<FailureClass> {
        match self.failure_class.as_str() {
            "localisation" => Some(FailureClass::Localisation),
            "docking" => Some(FailureClass::Docking),
            "other" => Some(FailureClass::Other),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureCounts {
    pub localisation: usize,
    pub docking: usize,
    pub other: usize,
}

impl FailureCounts {
    pub fn get(&self, class: FailureClass) -> usize {
        match class {
            FailureClass::Localisation => self.localisation,
            FailureClass::Docking => self.docking,
            FailureClass::Other => self.other,
        }
    }

    pub fn total(&self) -> usize {
        self.localisation + self.docking + self.other
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub episodes: usize,
    pub successes: usize,
    pub sr: f64,
    /// Mean steps over successful episodes; absent without any.
    pub apl: Option<f64>,
    pub spl: f64,
    pub failures: FailureCounts,
}

/// Success rate, average successful path length and SPL over `results`.
/// An empty input gives zero rates.
pub fn compute_metrics<'a, T, I>(results: I) -> MetricsReport
where
    T: Outcome + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let mut episodes = 0;
    let mut successes = 0;
    let mut success_steps = 0usize;
    let mut spl_sum = 0.0;
    let mut failures = FailureCounts::default();
    for r in results {
        episodes += 1;
        if r.success() {
            successes += 1;
            success_steps += r.steps();
        }
        spl_sum += r.spl_term();
        match r.failure() {
            Some(FailureClass::Localisation) => failures.localisation += 1,
            Some(FailureClass::Docking) => failures.docking += 1,
            Some(FailureClass::Other) => failures.other += 1,
            None => {}
        }
    }
    let n = episodes.max(1) as f64;
    MetricsReport {
        episodes,
        successes,
        sr: successes as f64 / n,
        apl: (successes > 0).then(|| success_steps as f64 / successes as f64),
        spl: spl_sum / n,
        failures,
    }
}
