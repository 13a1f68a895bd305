//! Leave-one-subject-out evaluation.

use std::collections::BTreeSet;

use rayon::prelude::*;

use super::{
    accuracy, macro_f1, train_experience, EvalReport, ExperienceError, ExperienceTrainConfig, Result,
    SleepExperience, StageSequence, SubjectScore,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectDataset {
    pub id: String,
    pub samples: Vec<(StageSequence, SleepExperience)>,
}

/// One fold: the held-out subject and the subjects trained on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub test: usize,
    pub train: Vec<usize>,
}

fn validate_corpus(corpus: &[SubjectDataset]) -> Result<()> {
    if corpus.len() < 2 {
        return Err(ExperienceError::TooFewSubjects(corpus.len()));
    }
    let mut seen = BTreeSet::new();
    for s in corpus {
        if !seen.insert(s.id.as_str()) {
            return Err(ExperienceError::DuplicateSubject(s.id.clone()));
        }
        if s.samples.is_empty() {
            return Err(ExperienceError::EmptySubject(s.id.clone()));
        }
    }
    Ok(())
}

/// Fold indices into `corpus`, after checking that ids are unique, that
/// no fold trains on its test subject and that the test sets cover the
/// corpus exactly once.
pub fn loso_folds(corpus: &[SubjectDataset]) -> Result<Vec<Fold>> {
    validate_corpus(corpus)?;
    let folds: Vec<Fold> = (0..corpus.len())
        .map(|test| Fold {
            test,
            train: (0..corpus.len()).filter(|&i| i != test).collect(),
        })
        .collect();
    let mut covered = BTreeSet::new();
    for f in &folds {
        let id = &corpus[f.test].id;
        if f.train.iter().any(|&i| corpus[i].id == *id) || f.train.len() + 1 != corpus.len() {
            return Err(ExperienceError::Leak(id.clone()));
        }
        covered.insert(f.test);
    }
    if covered.len() != corpus.len() {
        return Err(ExperienceError::Leak("<partition>".into()));
    }
    Ok(folds)
}

/// Train one model per held-out subject and score it on that subject.
/// Folds run in parallel; each owns its model and optimizer.
pub fn loso_evaluate(corpus: &[SubjectDataset], config: &ExperienceTrainConfig) -> Result<EvalReport> {
    let folds = loso_folds(corpus)?;
    let rows = folds
        .par_iter()
        .map(|fold| {
            let test = &corpus[fold.test];
            let train: Vec<SubjectDataset> = fold.train.iter().map(|&i| corpus[i].clone()).collect();
            if train.iter().any(|s| s.id == test.id) {
                return Err(ExperienceError::Leak(test.id.clone()));
            }
            let (net, _) = train_experience(&train, config)?;
            let preds: Vec<SleepExperience> = test.samples.iter().map(|(s, _)| net.predict(s).0).collect();
            let labels: Vec<SleepExperience> = test.samples.iter().map(|(_, y)| *y).collect();
            Ok(SubjectScore {
                subject: test.id.clone(),
                accuracy: accuracy(&preds, &labels)?,
                f1: macro_f1(&preds, &labels, &SleepExperience::ALL)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_rows(rows))
}
