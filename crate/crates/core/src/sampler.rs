//! Randomized problem sampling and held-out-scenario splits.
//!
//! Sample `i` of a dataset draws from stream `i` of a ChaCha generator seeded
//! with the global seed, so a sample does not depend on which worker made it
//! or in what order. The split shuffle uses its own reserved stream.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{BcScenario, DesignDomain, ProblemSpec, ANGLE_STEPS, VF_GRID};

/// Stream reserved for the split shuffle; sample streams count up from zero.
pub const SPLIT_STREAM: u64 = u64::MAX;

/// Number of scenarios held out for the test split.
pub const TEST_SCENARIOS: usize = 4;

pub const TRAIN_FRACTION: f64 = 0.8;

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("need at least {needed} distinct scenarios to split, found {found}")]
    InsufficientScenarios { needed: usize, found: usize },
    #[error("duplicate sample id {0}")]
    DuplicateId(u64),
    #[error("scenario catalog is empty")]
    EmptyCatalog,
    #[error("scenario {0} has no admissible load node")]
    NoLoadNode(usize),
}

/// Generator for one sample's random stream.
pub fn sample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws one problem: volume fraction, scenario, load node and load angle,
/// each uniform over its admissible set. Node and angle pairs whose load acts
/// only on constrained dofs are redrawn, which keeps the pair uniform over the
/// admissible pairs.
pub fn sample_problem<R: Rng + ?Sized>(
    rng: &mut R,
    catalog: &[BcScenario],
    domain: &DesignDomain,
) -> Result<ProblemSpec, SamplerError> {
    let vf_target = *VF_GRID.choose(rng).expect("grid is not empty");
    let scenario = catalog.choose(rng).ok_or(SamplerError::EmptyCatalog)?;
    let nodes = scenario.admissible_load_nodes(domain);
    if nodes.is_empty() {
        return Err(SamplerError::NoLoadNode(scenario.id));
    }
    loop {
        let spec = ProblemSpec {
            vf_target,
            scenario: scenario.clone(),
            load_node: *nodes.choose(rng).expect("not empty"),
            load_angle_step: rng.random_range(0..ANGLE_STEPS),
            load_magnitude: 1.0,
        };
        // every unpinned node has a free direction, so this terminates
        if !spec.load_is_resisted_only_by_supports(domain) {
            return Ok(spec);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitLabel {
    Train,
    Val,
    Test,
}

impl SplitLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitLabel::Train => "train",
            SplitLabel::Val => "val",
            SplitLabel::Test => "test",
        }
    }
}

impl fmt::Display for SplitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(SplitLabel::Train),
            "val" => Ok(SplitLabel::Val),
            "test" => Ok(SplitLabel::Test),
            other => Err(format!("unknown split label `{other}` (expected train, val or test)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    /// Held-out scenario ids, ascending.
    pub test_scenarios: Vec<usize>,
    pub train_fraction: f64,
    pub seed: u64,
}

/// Labels every sample. The four test scenarios and the 80/20 train/val
/// partition of the remaining samples depend only on the `(id, scenario)`
/// pairs and the seed, not on their order.
pub fn plan_splits(
    samples: &[(u64, usize)],
    seed: u64,
) -> Result<(SplitPlan, BTreeMap<u64, SplitLabel>), SamplerError> {
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    for w in sorted.windows(2) {
        if w[0].0 == w[1].0 {
            return Err(SamplerError::DuplicateId(w[0].0));
        }
    }
    let scenarios: Vec<usize> = sorted
        .iter()
        .map(|s| s.1)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if scenarios.len() <= TEST_SCENARIOS {
        return Err(SamplerError::InsufficientScenarios {
            needed: TEST_SCENARIOS + 1,
            found: scenarios.len(),
        });
    }
    let mut rng = sample_rng(seed, SPLIT_STREAM);
    let mut test: Vec<usize> = scenarios
        .choose_multiple(&mut rng, TEST_SCENARIOS)
        .copied()
        .collect();
    test.sort_unstable();

    let mut rest: Vec<u64> = sorted
        .iter()
        .filter(|s| test.binary_search(&s.1).is_err())
        .map(|s| s.0)
        .collect();
    rest.shuffle(&mut rng);
    let n_train = (TRAIN_FRACTION * rest.len() as f64).round() as usize;

    let mut labels = BTreeMap::new();
    for &(id, scenario) in &sorted {
        if test.binary_search(&scenario).is_ok() {
            labels.insert(id, SplitLabel::Test);
        }
    }
    for (k, id) in rest.into_iter().enumerate() {
        let label = if k < n_train { SplitLabel::Train } else { SplitLabel::Val };
        labels.insert(id, label);
    }
    let plan = SplitPlan {
        test_scenarios: test,
        train_fraction: TRAIN_FRACTION,
        seed,
    };
    Ok((plan, labels))
}
