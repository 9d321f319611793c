use crate::projective::IndexUniverse;
use crate::Label;

/// Canonical order on finite subsets: by largest label, then size, then
/// lexicographically.
pub fn canonical_cmp(a: &[Label], b: &[Label]) -> std::cmp::Ordering {
    (a.last(), a.len(), a).cmp(&(b.last(), b.len(), b))
}

/// The first `limit` nonempty finite subsets of the universe in canonical order.
pub fn canonical_subsets(universe: &IndexUniverse, limit: usize) -> Vec<Vec<Label>> {
    let mut out = Vec::with_capacity(limit);
    let mut top = 0usize;
    while out.len() < limit {
        let Some(max_label) = universe.label_at(top) else {
            break;
        };
        if top >= 63 {
            break;
        }
        let below: Vec<Label> = (0..top).filter_map(|p| universe.label_at(p)).collect();
        let mut block: Vec<Vec<Label>> = (0u64..1 << top)
            .map(|mask| {
                let mut s: Vec<Label> = (0..top)
                    .filter(|&b| mask >> b & 1 == 1)
                    .map(|b| below[b])
                    .collect();
                s.push(max_label);
                s
            })
            .collect();
        block.sort_by(|a, b| canonical_cmp(a, b));
        out.extend(block.into_iter().take(limit - out.len()));
        top += 1;
    }
    out
}

/// Every nonempty subset of `labels` (sorted input), in canonical order.
pub fn all_subsets(labels: &[Label]) -> Vec<Vec<Label>> {
    let u = IndexUniverse::finite(labels.to_vec()).expect("labels are unique");
    canonical_subsets(&u, (1usize << labels.len()) - 1)
}
