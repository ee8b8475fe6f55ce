use rayon::prelude::*;

use crate::pointset::PointSet;
use crate::scalar::Scalar;

/// Greedy `radius`-net of `ids` (visited in the given order): the net is
/// `radius`-separated and every input point lies strictly within `radius` of
/// some net point. Returns the net and, for every input, its closest net point
/// (ties to the smallest id).
pub fn greedy_net<T: Scalar>(set: &PointSet<T>, ids: &[usize], radius: T) -> (Vec<usize>, Vec<usize>) {
    let mut net: Vec<usize> = Vec::new();
    for &v in ids {
        if net.iter().all(|&u| set.dist(u, v) >= radius) {
            net.push(v);
        }
    }
    let owner = ids.par_iter().map(|&v| closest_in(set, &net, v).0).collect();
    (net, owner)
}

/// Closest member of `among` to point `v`; ties to the smallest id.
pub(crate) fn closest_in<T: Scalar>(set: &PointSet<T>, among: &[usize], v: usize) -> (usize, T) {
    let mut best: Option<(usize, T)> = None;
    for &u in among {
        let d = set.dist(u, v);
        best = match best {
            Some((bu, bd)) if bd < d || (bd == d && bu < u) => Some((bu, bd)),
            _ => Some((u, d)),
        };
    }
    best.expect("non-empty net")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::PNorm;

    #[test]
    fn net_of_separated_set_is_itself() {
        let set = PointSet::from_rows(&[vec![0.0], vec![3.0], vec![7.0]], PNorm::new(3.0).unwrap()).unwrap();
        let (net, owner) = greedy_net(&set, &[0, 1, 2], 2.0);
        assert_eq!(net, vec![0, 1, 2]);
        assert_eq!(owner, vec![0, 1, 2]);
    }

    #[test]
    fn clusters_collapse_to_one_point_each() {
        let mut rows = Vec::new();
        for c in 0..4 {
            for j in 0..5 {
                rows.push(vec![100.0 * c as f64 + 0.1 * j as f64, 0.0]);
            }
        }
        let set = PointSet::from_rows(&rows, PNorm::new(3.0).unwrap()).unwrap();
        let ids: Vec<usize> = (0..20).collect();
        let (net, owner) = greedy_net(&set, &ids, 1.0);
        assert_eq!(net, vec![0, 5, 10, 15]);
        assert!(owner.iter().enumerate().all(|(i, &o)| o == 5 * (i / 5)));
    }
}
