use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Role};
use crate::error::{LapsvmError, Result};

/// Stratified k-fold cross-validation repeated over several random fold
/// assignments. Within each split the training folds are divided into
/// labeled, validation and unlabeled points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitPlan {
    /// With `folds = 1` the test set is taken from the dataset's own
    /// partition (points marked `Test`), or is empty.
    pub folds: usize,
    pub randomizations: usize,
    pub labeled: usize,
    pub validation: usize,
    pub seed: u64,
}

impl SplitPlan {
    pub fn new(labeled: usize, validation: usize, seed: u64) -> Self {
        SplitPlan {
            folds: 4,
            randomizations: 3,
            labeled,
            validation,
            seed,
        }
    }

    /// Plan for data with a predefined test portion.
    pub fn presplit(labeled: usize, validation: usize, randomizations: usize, seed: u64) -> Self {
        SplitPlan {
            folds: 1,
            randomizations,
            labeled,
            validation,
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.folds * self.randomizations
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Dataset indices of each role in one split, each list increasing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Split {
    pub randomization: usize,
    pub fold: usize,
    pub labeled: Vec<usize>,
    pub unlabeled: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn indices(&self, role: Role) -> &[usize] {
        match role {
            Role::Labeled => &self.labeled,
            Role::Unlabeled => &self.unlabeled,
            Role::Validation => &self.validation,
            Role::Test => &self.test,
        }
    }

    pub fn indices_mut(&mut self, role: Role) -> &mut Vec<usize> {
        match role {
            Role::Labeled => &mut self.labeled,
            Role::Unlabeled => &mut self.unlabeled,
            Role::Validation => &mut self.validation,
            Role::Test => &mut self.test,
        }
    }

    /// Role of every dataset point; `None` for points outside the split.
    pub fn roles(&self, n: usize) -> Vec<Option<Role>> {
        let mut roles = vec![None; n];
        for role in [Role::Labeled, Role::Unlabeled, Role::Validation, Role::Test] {
            for &i in self.indices(role) {
                roles[i] = Some(role);
            }
        }
        roles
    }

    /// The dataset restricted to this split with its roles attached.
    pub fn apply(&self, ds: &Dataset) -> Dataset {
        let mut idx: Vec<(usize, Role)> = Vec::new();
        for role in [Role::Labeled, Role::Unlabeled, Role::Validation, Role::Test] {
            idx.extend(self.indices(role).iter().map(|&i| (i, role)));
        }
        idx.sort_unstable_by_key(|&(i, _)| i);
        let indices: Vec<usize> = idx.iter().map(|&(i, _)| i).collect();
        let mut out = ds.subset(&indices);
        out.partition = Some(idx.into_iter().map(|(_, r)| r).collect());
        out
    }
}

pub fn make_splits(ds: &Dataset, plan: &SplitPlan) -> Result<Vec<Split>> {
    ds.validate()?;
    if plan.folds == 0 || plan.randomizations == 0 {
        return Err(LapsvmError::invalid("folds and randomizations must be >= 1"));
    }
    if ds.is_empty() {
        return Err(LapsvmError::Empty("dataset"));
    }
    let classes = ds.classes();
    if plan.labeled < classes.len() {
        return Err(LapsvmError::invalid(format!(
            "{} labeled points cannot cover {} classes",
            plan.labeled,
            classes.len()
        )));
    }
    if plan.validation > 0 && plan.validation < classes.len() {
        return Err(LapsvmError::invalid(format!(
            "{} validation points cannot cover {} classes",
            plan.validation,
            classes.len()
        )));
    }

    let mut splits = Vec::with_capacity(plan.len());
    for r in 0..plan.randomizations {
        let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
        rng.set_stream(r as u64);
        let fold_of = if plan.folds == 1 {
            match &ds.partition {
                Some(p) => p.iter().map(|&role| usize::from(role != Role::Test)).collect(),
                None => vec![1; ds.len()],
            }
        } else {
            stratified_folds(ds, &classes, plan.folds, &mut rng)
        };
        let test_folds: Vec<usize> = if plan.folds == 1 { vec![0] } else { (0..plan.folds).collect() };
        for f in test_folds {
            let test: Vec<usize> = (0..ds.len()).filter(|&i| fold_of[i] == f).collect();
            let mut pool: Vec<usize> = (0..ds.len()).filter(|&i| fold_of[i] != f).collect();
            let labeled = draw_covering(ds, &classes, &mut pool, plan.labeled, &mut rng, "labeled")?;
            let validation =
                draw_covering(ds, &classes, &mut pool, plan.validation, &mut rng, "validation")?;
            pool.sort_unstable();
            splits.push(Split {
                randomization: r,
                fold: f,
                labeled,
                unlabeled: pool,
                validation,
                test,
            });
        }
    }
    Ok(splits)
}

/// Deals each class's shuffled members round-robin over the folds,
/// continuing the count across classes, so fold sizes and per-fold class
/// counts are both within one of proportional.
fn stratified_folds(ds: &Dataset, classes: &[i64], folds: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut fold_of = vec![0; ds.len()];
    let mut next = 0;
    for &c in classes {
        let mut members: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == c).collect();
        members.shuffle(rng);
        for i in members {
            fold_of[i] = next % folds;
            next += 1;
        }
    }
    fold_of
}

/// Removes `count` points from `pool`: one per class first, the rest
/// uniformly at random. Returns them sorted.
fn draw_covering(
    ds: &Dataset,
    classes: &[i64],
    pool: &mut Vec<usize>,
    count: usize,
    rng: &mut ChaCha8Rng,
    what: &str,
) -> Result<Vec<usize>> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if count > pool.len() {
        return Err(LapsvmError::invalid(format!(
            "{count} {what} points requested but only {} available",
            pool.len()
        )));
    }
    let mut chosen = Vec::with_capacity(count);
    for &c in classes {
        let members: Vec<usize> = (0..pool.len()).filter(|&k| ds.labels[pool[k]] == c).collect();
        if members.is_empty() {
            return Err(LapsvmError::MissingClass(c));
        }
        let k = members[rng.random_range(0..members.len())];
        chosen.push(pool.swap_remove(k));
    }
    pool.shuffle(rng);
    chosen.extend(pool.drain(..count - classes.len()));
    chosen.sort_unstable();
    Ok(chosen)
}
