use super::trak::ConceptAttribution;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Orders positions by descending score, ties by ascending id.
fn descending<T: Scalar>(ids: &[u64], scores: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..ids.len()).collect();
    idx.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(ids[a].cmp(&ids[b]))
    });
    idx
}

/// The `t` ids with the highest scores; ties go to the lower id.
pub fn top_ids<T: Scalar>(ids: &[u64], scores: &[T], t: usize) -> Vec<u64> {
    descending(ids, scores).into_iter().take(t).map(|i| ids[i]).collect()
}

/// `(top, bottom)`: the `t` highest-attributed ids in descending order and
/// the `t` lowest in ascending order. Ties go to the lower id in both lists.
pub fn rank_training_points<T: Scalar>(tc: &ConceptAttribution<T>, t: usize) -> Result<(Vec<u64>, Vec<u64>)> {
    let n = tc.ids.len();
    if t > n {
        return Err(Error::InvalidConfig(format!("cannot rank {t} of {n} training points")));
    }
    let top = top_ids(&tc.ids, &tc.tau_c, t);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| {
        tc.tau_c[a]
            .partial_cmp(&tc.tau_c[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(tc.ids[a].cmp(&tc.ids[b]))
    });
    let bottom = idx.into_iter().take(t).map(|i| tc.ids[i]).collect();
    Ok((top, bottom))
}

/// `τ_c` sorted from highest to lowest.
pub fn sorted_scores<T: Scalar>(tc: &ConceptAttribution<T>) -> Vec<T> {
    descending(&tc.ids, &tc.tau_c)
        .into_iter()
        .map(|i| tc.tau_c[i])
        .collect()
}
