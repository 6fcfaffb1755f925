//! Learning analytics on a recovered score matrix, and prediction metrics
//! on held-out responses.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantized_model::{inverse_logit, FactorMatrix, ObservedResponses, Quantizer};

/// Binary question-tag associations, `Q × M`.
#[derive(Debug, Clone, PartialEq)]
pub struct TagMatrix {
    matrix: DMatrix<u8>,
    tag_names: Vec<String>,
}

impl TagMatrix {
    /// Every question needs at least one tag and every tag at least one question.
    pub fn new(matrix: DMatrix<u8>, tag_names: Vec<String>) -> Result<Self> {
        if matrix.ncols() != tag_names.len() {
            return Err(Error::InvalidTags(format!(
                "{} tag columns but {} tag names",
                matrix.ncols(),
                tag_names.len()
            )));
        }
        if matrix.iter().any(|&v| v > 1) {
            return Err(Error::InvalidTags("entries must be 0 or 1".into()));
        }
        for (m, col) in matrix.column_iter().enumerate() {
            if col.iter().all(|&v| v == 0) {
                return Err(Error::DegenerateTag(tag_names[m].clone()));
            }
        }
        if let Some(i) = matrix
            .row_iter()
            .position(|row| row.iter().all(|&v| v == 0))
        {
            return Err(Error::InvalidTags(format!("question {i} has no tag")));
        }
        Ok(TagMatrix { matrix, tag_names })
    }

    pub fn num_questions(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn num_tags(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn tag_names(&self) -> &[String] {
        &self.tag_names
    }

    pub fn matrix(&self) -> &DMatrix<u8> {
        &self.matrix
    }
}

/// Per-learner tag knowledge `B` (`N × M`, entries in `[0, 1]`).
#[derive(Debug, Clone, PartialEq)]
pub struct TagKnowledge {
    pub knowledge: DMatrix<f64>,
    pub tag_names: Vec<String>,
    /// Column means of `knowledge`.
    pub class_average: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionMetrics {
    pub cor: f64,
    pub lik: f64,
    /// Only for binary quantizers.
    pub auc: Option<f64>,
}

/// `A = Φ(Z)` entrywise.
pub fn denoised_grades(z: &FactorMatrix) -> DMatrix<f64> {
    z.as_matrix().map(inverse_logit)
}

/// `B_{j,m}` = mean of `A_{i,j}` over the questions `i` carrying tag `m`,
/// i.e. `Aᵀ T` with each column divided by its tag count.
pub fn tag_knowledge(grades: &DMatrix<f64>, tags: &TagMatrix) -> Result<TagKnowledge> {
    if grades.nrows() != tags.num_questions() {
        return Err(Error::DimensionMismatch {
            expected: (tags.num_questions(), grades.ncols()),
            actual: grades.shape(),
        });
    }
    let t = tags.matrix.map(f64::from);
    let mut knowledge = grades.transpose() * &t;
    for (m, mut col) in knowledge.column_iter_mut().enumerate() {
        let count: f64 = t.column(m).sum();
        if count == 0.0 {
            return Err(Error::DegenerateTag(tags.tag_names[m].clone()));
        }
        col /= count;
    }
    let learners = knowledge.nrows().max(1) as f64;
    let class_average = knowledge
        .column_iter()
        .map(|c| c.sum() / learners)
        .collect();
    Ok(TagKnowledge {
        knowledge,
        tag_names: tags.tag_names.clone(),
        class_average,
    })
}

/// Learners picked for the tag report, ranked by the mean of their column of `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectedLearners {
    pub best: usize,
    /// Closest to the class mean of per-learner averages.
    pub average: usize,
    pub worst: usize,
}

pub fn select_learners(grades: &DMatrix<f64>) -> Option<SelectedLearners> {
    if grades.ncols() == 0 || grades.nrows() == 0 {
        return None;
    }
    let means: Vec<f64> = grades.column_iter().map(|c| c.mean()).collect();
    let overall = means.iter().sum::<f64>() / means.len() as f64;
    // ties go to the lower index
    let pick = |key: &dyn Fn(f64) -> f64| {
        means
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (j, &m)| {
                if key(m) < acc.1 {
                    (j, key(m))
                } else {
                    acc
                }
            })
            .0
    };
    Some(SelectedLearners {
        best: pick(&|m| -m),
        average: pick(&|m| (m - overall).abs()),
        worst: pick(&|m| m),
    })
}

/// Maximum-likelihood label; ties go to the smaller label.
pub fn predict_label(z: f64, q: &Quantizer) -> usize {
    let mut best = (1, f64::NEG_INFINITY);
    for p in 1..=q.num_labels() {
        let lik = q.label_likelihood(z, p).expect("label in range");
        if lik > best.1 {
            best = (p, lik);
        }
    }
    best.0
}

fn check_test(z: &FactorMatrix, test: &ObservedResponses, q: &Quantizer) -> Result<()> {
    if test.is_empty() {
        return Err(Error::EmptyObservations);
    }
    if z.shape() != test.shape() {
        return Err(Error::DimensionMismatch {
            expected: test.shape(),
            actual: z.shape(),
        });
    }
    test.check_labels(q)
}

/// Fraction of test responses whose predicted label is correct (COR).
pub fn accuracy(z: &FactorMatrix, test: &ObservedResponses, q: &Quantizer) -> Result<f64> {
    check_test(z, test, q)?;
    let hits = test
        .entries()
        .iter()
        .filter(|r| predict_label(z.get(r.question, r.learner), q) == r.label)
        .count();
    Ok(hits as f64 / test.len() as f64)
}

/// Mean predicted probability of the observed test labels (LIK).
pub fn mean_likelihood(z: &FactorMatrix, test: &ObservedResponses, q: &Quantizer) -> Result<f64> {
    check_test(z, test, q)?;
    let mut total = 0.0;
    for r in test.entries() {
        total += q.label_likelihood(z.get(r.question, r.learner), r.label)?;
    }
    Ok(total / test.len() as f64)
}

/// ROC AUC of the scores `Φ(Z_ij)` with label 2 as the positive class.
pub fn auc(z: &FactorMatrix, test: &ObservedResponses, q: &Quantizer) -> Result<f64> {
    if q.num_labels() != 2 {
        return Err(Error::UnsupportedQuantizer {
            num_labels: q.num_labels(),
        });
    }
    check_test(z, test, q)?;
    let scored: Vec<(f64, bool)> = test
        .entries()
        .iter()
        .map(|r| (inverse_logit(z.get(r.question, r.learner)), r.label == 2))
        .collect();
    rank_auc(&scored)
}

/// Mann-Whitney AUC: `(R₊ − n₊(n₊+1)/2) / (n₊ n₋)` with mid-ranks for ties.
pub fn rank_auc(scored: &[(f64, bool)]) -> Result<f64> {
    let positives = scored.iter().filter(|s| s.1).count();
    let negatives = scored.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedAuc);
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[a].0.total_cmp(&scored[b].0));

    let mut positive_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scored[order[end]].0 == scored[order[start]].0 {
            end += 1;
        }
        // 1-based ranks start+1 ..= end share their mean
        let mid_rank = (start + 1 + end) as f64 / 2.0;
        let tied_positives = order[start..end].iter().filter(|&&k| scored[k].1).count();
        positive_rank_sum += mid_rank * tied_positives as f64;
        start = end;
    }
    let np = positives as f64;
    Ok((positive_rank_sum - np * (np + 1.0) / 2.0) / (np * negatives as f64))
}

/// COR and LIK (and AUC when binary) on a test set.
pub fn evaluate(
    z: &FactorMatrix,
    test: &ObservedResponses,
    q: &Quantizer,
) -> Result<PredictionMetrics> {
    let auc = if q.num_labels() == 2 {
        match auc(z, test, q) {
            Ok(v) => Some(v),
            Err(Error::UndefinedAuc) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(PredictionMetrics {
        cor: accuracy(z, test, q)?,
        lik: mean_likelihood(z, test, q)?,
        auc,
    })
}

/// Constant predictors fitted to the training label frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineMetrics {
    /// Accuracy of always predicting the most frequent training label.
    pub majority_cor: f64,
    /// Mean probability assigned to the test labels by the empirical
    /// training label distribution.
    pub constant_lik: f64,
}

pub fn baseline(
    train: &ObservedResponses,
    test: &ObservedResponses,
    q: &Quantizer,
) -> Result<BaselineMetrics> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptyObservations);
    }
    train.check_labels(q)?;
    test.check_labels(q)?;
    let p = q.num_labels();
    let counts = train.label_counts(p);
    let majority = counts
        .iter()
        .enumerate()
        .fold((0, 0), |acc, (k, &c)| if c > acc.1 { (k, c) } else { acc })
        .0
        + 1;
    let freq: Vec<f64> = counts
        .iter()
        .map(|&c| c as f64 / train.len() as f64)
        .collect();
    let hits = test
        .entries()
        .iter()
        .filter(|r| r.label == majority)
        .count();
    let lik: f64 = test.entries().iter().map(|r| freq[r.label - 1]).sum();
    Ok(BaselineMetrics {
        majority_cor: hits as f64 / test.len() as f64,
        constant_lik: lik / test.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantized_model::Response;
    use approx::assert_relative_eq;

    fn tags(rows: usize, cols: usize, data: &[u8]) -> TagMatrix {
        let names = (0..cols).map(|m| format!("t{m}")).collect();
        TagMatrix::new(DMatrix::from_row_slice(rows, cols, data), names).unwrap()
    }

    #[test]
    fn denoised_examples() {
        let a = denoised_grades(&FactorMatrix::zeros(2, 3));
        assert!(a.iter().all(|&v| v == 0.5));
        let a = denoised_grades(&FactorMatrix::from_row_slice(1, 1, &[1.0]).unwrap());
        assert_relative_eq!(a[(0, 0)], 0.731_058_578_630_004_9, epsilon = 1e-15);
    }

    #[test]
    fn tag_knowledge_examples() {
        let ones = DMatrix::from_element(3, 2, 1.0);
        let b = tag_knowledge(&ones, &tags(3, 2, &[1, 0, 1, 1, 0, 1])).unwrap();
        assert!(b.knowledge.iter().all(|&v| v == 1.0));

        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 0.5]);
        let b = tag_knowledge(&a, &tags(2, 1, &[1, 1])).unwrap();
        assert_eq!(b.knowledge, DMatrix::from_row_slice(2, 1, &[0.5, 0.5]));
        assert_eq!(b.class_average, vec![0.5]);
    }

    #[test]
    fn tag_matrix_invariants() {
        let names = vec!["a".to_string(), "b".to_string()];
        let err = TagMatrix::new(DMatrix::from_row_slice(2, 2, &[1, 0, 1, 0]), names.clone());
        assert!(matches!(err, Err(Error::DegenerateTag(ref t)) if t == "b"));
        assert!(
            TagMatrix::new(DMatrix::from_row_slice(2, 2, &[1, 1, 0, 0]), names.clone()).is_err()
        );
        assert!(TagMatrix::new(DMatrix::from_row_slice(1, 2, &[2, 1]), names).is_err());
    }

    #[test]
    fn predict_examples() {
        let b = Quantizer::binary();
        assert_eq!(predict_label(2.0, &b), 2);
        assert_eq!(predict_label(0.0, &b), 1);
        assert_eq!(predict_label(-2.0, &b), 1);
        let four = Quantizer::from_interior(vec![-1.0, 0.0, 1.0]).unwrap();
        // bin masses at 0.5 are (0.182, 0.195, 0.245, 0.378): the open top bin wins
        assert_eq!(predict_label(0.5, &four), 4);
        // outer bins tie exactly at 0
        assert_eq!(predict_label(0.0, &four), 1);
        assert_eq!(predict_label(5.0, &four), 4);
    }

    fn obs(shape: (usize, usize), entries: &[(usize, usize, usize)]) -> ObservedResponses {
        ObservedResponses::new(
            shape.0,
            shape.1,
            entries
                .iter()
                .map(|&(i, j, l)| Response::new(i, j, l))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn accuracy_examples() {
        let b = Quantizer::binary();
        let z = FactorMatrix::from_row_slice(2, 2, &[2.0, -2.0, 1.0, -1.0]).unwrap();
        let all = obs((2, 2), &[(0, 0, 2), (0, 1, 1), (1, 0, 2), (1, 1, 1)]);
        assert_eq!(accuracy(&z, &all, &b).unwrap(), 1.0);
        let three = obs((2, 2), &[(0, 0, 2), (0, 1, 1), (1, 0, 2), (1, 1, 2)]);
        assert_eq!(accuracy(&z, &three, &b).unwrap(), 0.75);
        let half = obs((2, 2), &[(0, 0, 2), (0, 1, 2)]);
        assert_eq!(accuracy(&z, &half, &b).unwrap(), 0.5);
        assert!(matches!(
            accuracy(&z, &obs((2, 2), &[]), &b),
            Err(Error::EmptyObservations)
        ));
    }

    #[test]
    fn likelihood_examples() {
        let b = Quantizer::binary();
        let z = FactorMatrix::zeros(2, 2);
        let t = obs((2, 2), &[(0, 0, 2), (0, 1, 1), (1, 1, 1)]);
        assert_eq!(mean_likelihood(&z, &t, &b).unwrap(), 0.5);
        let z = FactorMatrix::from_row_slice(1, 2, &[1.0, -0.5]).unwrap();
        let one = obs((1, 2), &[(0, 0, 2)]);
        assert_relative_eq!(
            mean_likelihood(&z, &one, &b).unwrap(),
            0.731_058_578_630_004_9,
            epsilon = 1e-15
        );
        let two = obs((1, 2), &[(0, 0, 2), (0, 1, 1)]);
        let expect = (inverse_logit(1.0) + inverse_logit(0.5)) / 2.0;
        assert_relative_eq!(
            mean_likelihood(&z, &two, &b).unwrap(),
            expect,
            epsilon = 1e-15
        );
    }

    #[test]
    fn auc_examples() {
        assert_eq!(
            rank_auc(&[(0.9, true), (0.4, false), (0.6, false)]).unwrap(),
            1.0
        );
        assert_eq!(
            rank_auc(&[(0.5, true), (0.5, false), (0.5, true)]).unwrap(),
            0.5
        );
        assert_eq!(rank_auc(&[(0.1, true), (0.4, false)]).unwrap(), 0.0);
        assert!(matches!(rank_auc(&[(0.1, true)]), Err(Error::UndefinedAuc)));

        let four = Quantizer::evenly_spaced(4).unwrap();
        let z = FactorMatrix::zeros(1, 2);
        let t = obs((1, 2), &[(0, 0, 1), (0, 1, 2)]);
        assert!(matches!(
            auc(&z, &t, &four),
            Err(Error::UnsupportedQuantizer { num_labels: 4 })
        ));
        assert!(evaluate(&z, &t, &four).unwrap().auc.is_none());
    }

    #[test]
    fn baseline_values() {
        let b = Quantizer::binary();
        let train = obs(
            (1, 5),
            &[(0, 0, 2), (0, 1, 2), (0, 2, 2), (0, 3, 1), (0, 4, 1)],
        );
        let test = obs((1, 5), &[(0, 0, 2), (0, 1, 1)]);
        let base = baseline(&train, &test, &b).unwrap();
        assert_eq!(base.majority_cor, 0.5);
        assert_relative_eq!(base.constant_lik, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn learner_selection() {
        let a = DMatrix::from_row_slice(2, 4, &[0.9, 0.1, 0.5, 0.6, 0.9, 0.1, 0.5, 0.4]);
        let s = select_learners(&a).unwrap();
        assert_eq!(
            s,
            SelectedLearners {
                best: 0,
                average: 2,
                worst: 1
            }
        );
        assert!(select_learners(&DMatrix::zeros(0, 0)).is_none());
    }
}
