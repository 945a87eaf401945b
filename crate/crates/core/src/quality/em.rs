//! Iterative truth inference with per-worker confusion matrices.
//!
//! Each worker `w` is modelled by a confusion matrix `pi[w][j][l]`, the
//! probability of answering candidate index `l` when the truth is candidate
//! index `j`, and the truth by a class prior `rho[j]`. Posteriors over the
//! true label start at the majority-vote fractions; every iteration runs an
//! M-step (smoothed re-estimation of `pi` and `rho`) followed by an E-step
//! (posterior update). Labels are compared by their position in each
//! question's candidate list, so questions may have different arities.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::QualityError;
use crate::domain::{Label, WorkerId};

const SMOOTHING: f64 = 1.0;
/// Extra pseudocount on the confusion diagonal. Without it a worker with no
/// counter-evidence drifts to an uninformative matrix.
const DIAGONAL: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmParams {
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for EmParams {
    fn default() -> Self {
        EmParams { max_iters: 100, tol: 1e-6 }
    }
}

/// One question's candidates and the votes it received.
#[derive(Debug, Clone, PartialEq)]
pub struct EmQuestion {
    pub candidates: Vec<Label>,
    pub votes: Vec<(WorkerId, Label)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmOutcome {
    /// Estimated label per question, in input order.
    pub labels: Vec<Label>,
    /// Posterior over candidate positions per question.
    pub posteriors: Vec<Vec<f64>>,
    /// Row-stochastic confusion matrix per worker (true index x answer index).
    pub confusion: BTreeMap<WorkerId, Vec<Vec<f64>>>,
    pub priors: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

struct Indexed {
    arity: usize,
    votes: Vec<(usize, usize)>,
}

pub fn em_aggregate(questions: &[EmQuestion], params: EmParams) -> Result<EmOutcome, QualityError> {
    if questions.is_empty() {
        return Err(QualityError::EmptyMatrix);
    }
    if params.max_iters == 0 || !(params.tol > 0.0) {
        return Err(QualityError::EmParams);
    }

    let mut worker_ids: Vec<WorkerId> = questions.iter().flat_map(|q| q.votes.iter().map(|v| v.0)).collect();
    worker_ids.sort_unstable();
    worker_ids.dedup();
    let worker_index = |w: WorkerId| worker_ids.binary_search(&w).expect("collected above");

    let mut indexed = Vec::with_capacity(questions.len());
    for q in questions {
        if q.votes.is_empty() {
            return Err(QualityError::NoAnswers);
        }
        let mut votes = Vec::with_capacity(q.votes.len());
        for &(w, l) in &q.votes {
            let pos = q.candidates.iter().position(|&c| c == l).ok_or(QualityError::NotCandidate(l))?;
            votes.push((worker_index(w), pos));
        }
        indexed.push(Indexed { arity: q.candidates.len(), votes });
    }
    let n_labels = indexed.iter().map(|q| q.arity).max().unwrap_or(0);
    let n_workers = worker_ids.len();

    // Majority-vote initialisation.
    let mut post: Vec<Vec<f64>> = indexed
        .iter()
        .map(|q| {
            let mut row = vec![0.0; q.arity];
            for &(_, l) in &q.votes {
                row[l] += 1.0;
            }
            let n = q.votes.len() as f64;
            row.iter_mut().for_each(|x| *x /= n);
            row
        })
        .collect();

    let mut confusion = vec![vec![vec![0.0; n_labels]; n_labels]; n_workers];
    let mut priors = vec![0.0; n_labels];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < params.max_iters {
        iterations += 1;

        // M-step.
        for row in priors.iter_mut() {
            *row = SMOOTHING;
        }
        for m in confusion.iter_mut() {
            for (j, row) in m.iter_mut().enumerate() {
                row.iter_mut().for_each(|x| *x = SMOOTHING);
                row[j] += DIAGONAL;
            }
        }
        for (q, p) in indexed.iter().zip(&post) {
            for (j, &pj) in p.iter().enumerate() {
                priors[j] += pj;
            }
            for &(w, l) in &q.votes {
                for (j, &pj) in p.iter().enumerate() {
                    confusion[w][j][l] += pj;
                }
            }
        }
        let prior_total: f64 = priors.iter().sum();
        priors.iter_mut().for_each(|x| *x /= prior_total);
        for m in confusion.iter_mut() {
            for row in m.iter_mut() {
                let s: f64 = row.iter().sum();
                row.iter_mut().for_each(|x| *x /= s);
            }
        }

        // E-step, in log space.
        let mut delta: f64 = 0.0;
        for (q, p) in indexed.iter().zip(post.iter_mut()) {
            let mut logp: Vec<f64> = (0..q.arity).map(|j| libm::log(priors[j])).collect();
            for &(w, l) in &q.votes {
                for (j, lp) in logp.iter_mut().enumerate() {
                    *lp += libm::log(confusion[w][j][l]);
                }
            }
            let top = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for lp in logp.iter_mut() {
                *lp = libm::exp(*lp - top);
                z += *lp;
            }
            for (old, new) in p.iter_mut().zip(&logp) {
                let v = new / z;
                delta = delta.max((v - *old).abs());
                *old = v;
            }
        }
        if delta < params.tol {
            converged = true;
            break;
        }
    }

    let labels = questions
        .iter()
        .zip(&post)
        .map(|(q, p)| {
            let mut best = 0;
            for (j, &v) in p.iter().enumerate() {
                if v > p[best] {
                    best = j;
                }
            }
            q.candidates[best]
        })
        .collect();

    Ok(EmOutcome {
        labels,
        posteriors: post,
        confusion: worker_ids.into_iter().zip(confusion).collect(),
        priors,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quality::majority_vote;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn binary(votes: &[(u32, u16)]) -> EmQuestion {
        EmQuestion {
            candidates: vec![Label(0), Label(1)],
            votes: votes.iter().map(|&(w, l)| (WorkerId(w), Label(l))).collect(),
        }
    }

    #[test]
    fn unanimous_answers_are_a_fixed_point() {
        let qs: Vec<EmQuestion> =
            (0..20).map(|i| binary(&[(0, (i % 2) as u16), (1, (i % 2) as u16), (2, (i % 2) as u16)])).collect();
        let out = em_aggregate(&qs, EmParams { max_iters: 50, tol: 1e-3 }).unwrap();
        for (i, l) in out.labels.iter().enumerate() {
            assert_eq!(*l, Label((i % 2) as u16));
        }
        assert!(out.iterations <= 2, "took {}", out.iterations);
        assert!(out.converged);
    }

    #[test]
    fn single_worker_is_echoed() {
        let qs: Vec<EmQuestion> = (0..15).map(|i| binary(&[(7, ((i * 7) % 3 == 0) as u16)])).collect();
        let out = em_aggregate(&qs, EmParams::default()).unwrap();
        for (q, l) in qs.iter().zip(&out.labels) {
            assert_eq!(q.votes[0].1, *l);
        }
    }

    proptest::proptest! {
        #[test]
        fn any_single_worker_is_echoed(votes in proptest::collection::vec(0u16..3, 1..40)) {
            let qs: Vec<EmQuestion> = votes
                .iter()
                .map(|&l| EmQuestion { candidates: vec![Label(0), Label(1), Label(2)], votes: vec![(WorkerId(0), Label(l))] })
                .collect();
            let out = em_aggregate(&qs, EmParams::default()).unwrap();
            let echoed: Vec<Label> = votes.iter().map(|&l| Label(l)).collect();
            proptest::prop_assert_eq!(out.labels, echoed);
        }
    }

    #[test]
    fn errors() {
        assert_eq!(em_aggregate(&[], EmParams::default()), Err(QualityError::EmptyMatrix));
        assert_eq!(em_aggregate(&[binary(&[])], EmParams::default()), Err(QualityError::NoAnswers));
        assert_eq!(em_aggregate(&[binary(&[(0, 5)])], EmParams::default()), Err(QualityError::NotCandidate(Label(5))));
        assert_eq!(
            em_aggregate(&[binary(&[(0, 1)])], EmParams { max_iters: 0, tol: 1e-6 }),
            Err(QualityError::EmParams)
        );
    }

    #[test]
    fn confusion_rows_are_stochastic() {
        let qs: Vec<EmQuestion> = (0..10).map(|i| binary(&[(0, (i % 2) as u16), (1, 0)])).collect();
        let out = em_aggregate(&qs, EmParams::default()).unwrap();
        for m in out.confusion.values() {
            for row in m {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        assert!((out.priors.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    /// Binary questions answered by every worker; worker `i` is correct with
    /// probability `reliabilities[i]`.
    fn planted(reliabilities: &[f64], n: usize, seed: u64) -> (Vec<EmQuestion>, Vec<Label>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut qs = Vec::new();
        let mut truth = Vec::new();
        for _ in 0..n {
            let t: u16 = rng.random_range(0..2);
            let votes = reliabilities
                .iter()
                .enumerate()
                .map(|(w, &p)| {
                    let l = if rng.random_bool(p) { t } else { 1 - t };
                    (WorkerId(w as u32), Label(l))
                })
                .collect();
            qs.push(EmQuestion { candidates: vec![Label(0), Label(1)], votes });
            truth.push(Label(t));
        }
        (qs, truth)
    }

    fn hits(est: &[Label], truth: &[Label]) -> usize {
        est.iter().zip(truth).filter(|(a, b)| a == b).count()
    }

    #[test]
    fn planted_instance_beats_majority() {
        let (qs, truth) = planted(&[0.95, 0.9, 0.85, 0.6, 0.55], 50, 2024);
        let em = em_aggregate(&qs, EmParams::default()).unwrap();
        let mv: Vec<Label> =
            qs.iter().map(|q| majority_vote(&q.votes.iter().map(|v| v.1).collect::<Vec<_>>()).unwrap()).collect();
        assert!(
            hits(&em.labels, &truth) >= hits(&mv, &truth),
            "em {} mv {}",
            hits(&em.labels, &truth),
            hits(&mv, &truth)
        );
    }

    #[test]
    fn noiseless_workers_recover_truth() {
        let (qs, truth) = planted(&[1.0, 1.0, 1.0], 40, 3);
        let em = em_aggregate(&qs, EmParams::default()).unwrap();
        assert_eq!(em.labels, truth);
    }
}
