use super::{CandidateGenerator, QaError};

/// Fraction of `(clue, answer)` pairs whose answer is among the generator's top `k` for a slot of
/// the answer's length.
pub fn topk_recall<G: CandidateGenerator + ?Sized>(
    generator: &G,
    eval_pairs: &[(String, String)],
    k: usize,
) -> Result<f64, QaError> {
    Ok(recall_at_ks(generator, eval_pairs, &[k])?[0].1)
}

/// Recall at several cutoffs from one generation per pair at the largest cutoff.
/// Returned in the order of `ks`.
pub fn recall_at_ks<G: CandidateGenerator + ?Sized>(
    generator: &G,
    eval_pairs: &[(String, String)],
    ks: &[usize],
) -> Result<Vec<(usize, f64)>, QaError> {
    if eval_pairs.is_empty() {
        return Err(QaError::EmptyEval);
    }
    if ks.contains(&0) {
        return Err(QaError::ZeroK);
    }
    let Some(&kmax) = ks.iter().max() else { return Ok(Vec::new()) };
    let mut hits = vec![0usize; ks.len()];
    for (clue, answer) in eval_pairs {
        let list = generator.generate(clue, answer.len(), kmax);
        if let Some(rank) = list.rank_of(answer) {
            for (h, &k) in hits.iter_mut().zip(ks) {
                if rank < k {
                    *h += 1;
                }
            }
        }
    }
    let n = eval_pairs.len() as f64;
    Ok(ks.iter().zip(hits).map(|(&k, h)| (k, h as f64 / n)).collect())
}
