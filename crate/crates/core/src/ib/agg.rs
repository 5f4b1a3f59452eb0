use super::IbDesign;
use crate::error::{invalid, Result};
use crate::info::{kl_slices, JointXY};
use crate::quantizer::Quantizer;

struct Cluster {
    weight: f64,
    post: Vec<f64>,
    members: Vec<usize>,
}

/// Exact loss of `I(x;z)` from merging two clusters:
/// `w_a D(p_a || m) + w_b D(p_b || m)` with `m` the weighted mixture.
fn merge_cost(a: &Cluster, b: &Cluster) -> f64 {
    if a.weight <= 0.0 || b.weight <= 0.0 {
        return 0.0;
    }
    let w = a.weight + b.weight;
    let mix: Vec<f64> = a
        .post
        .iter()
        .zip(&b.post)
        .map(|(pa, pb)| (a.weight * pa + b.weight * pb) / w)
        .collect();
    a.weight * kl_slices(&a.post, &mix) + b.weight * kl_slices(&b.post, &mix)
}

fn merge(a: &mut Cluster, b: Cluster) {
    let w = a.weight + b.weight;
    if w > 0.0 {
        for (pa, pb) in a.post.iter_mut().zip(&b.post) {
            *pa = (a.weight * *pa + b.weight * pb) / w;
        }
    } else if a.post.iter().all(|&p| p == 0.0) {
        a.post = b.post;
    }
    a.weight = w;
    a.members.extend(b.members);
}

/// Greedy bottom-up merging from the identity partition down to `n`
/// clusters, always merging the pair whose merge loses the least relevant
/// information (lowest index pair on ties). Fully deterministic.
///
/// Clusters are labelled in the order of their smallest member.
pub fn agglomerative_ib(j: &JointXY, n: usize) -> Result<IbDesign> {
    if n == 0 {
        return Err(invalid("cluster count must be >= 1"));
    }
    if n > j.ny() {
        return Err(invalid(format!(
            "cannot form {n} clusters from {} observations",
            j.ny()
        )));
    }
    let py = j.y_marginal();
    let mut clusters: Vec<Option<Cluster>> = j
        .posteriors()
        .into_iter()
        .enumerate()
        .map(|(y, post)| {
            Some(Cluster {
                weight: py.probs()[y],
                post: post.unwrap_or_else(|| vec![0.0; j.nx()]),
                members: vec![y],
            })
        })
        .collect();
    let m = clusters.len();
    let mut cost = vec![f64::INFINITY; m * m];
    for a in 0..m {
        for b in (a + 1)..m {
            cost[a * m + b] =
                merge_cost(clusters[a].as_ref().unwrap(), clusters[b].as_ref().unwrap());
        }
    }
    let mut alive = m;
    while alive > n {
        let (mut ba, mut bb, mut bc) = (0, 0, f64::INFINITY);
        for a in 0..m {
            if clusters[a].is_none() {
                continue;
            }
            for b in (a + 1)..m {
                if clusters[b].is_some() && cost[a * m + b] < bc {
                    (ba, bb, bc) = (a, b, cost[a * m + b]);
                }
            }
        }
        let absorbed = clusters[bb].take().unwrap();
        merge(clusters[ba].as_mut().unwrap(), absorbed);
        alive -= 1;
        for o in 0..m {
            if o == ba || clusters[o].is_none() {
                continue;
            }
            let (lo, hi) = (o.min(ba), o.max(ba));
            cost[lo * m + hi] =
                merge_cost(clusters[lo].as_ref().unwrap(), clusters[hi].as_ref().unwrap());
        }
    }
    let mut labels = vec![0; m];
    for (z, c) in clusters.iter().flatten().enumerate() {
        for &y in &c.members {
            labels[y] = z;
        }
    }
    IbDesign::evaluate(j, Quantizer::from_labels(&labels, n)?, f64::INFINITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::mutual_information;

    #[test]
    fn identical_posteriors_merge_first() {
        // columns 1 and 3 share the posterior (0.25, 0.75)
        let j = JointXY::new(vec![
            vec![0.20, 0.05, 0.10, 0.10],
            vec![0.05, 0.15, 0.05, 0.30],
        ])
        .unwrap();
        let d = agglomerative_ib(&j, 3).unwrap();
        let l = d.quantizer.labels();
        assert_eq!(l[1], l[3]);
        assert!(d.info_loss.abs() < 1e-12);
    }

    #[test]
    fn identity_when_no_merges_needed() {
        let j = JointXY::new(vec![vec![0.1, 0.2, 0.3], vec![0.2, 0.1, 0.1]]).unwrap();
        let d = agglomerative_ib(&j, 3).unwrap();
        assert_eq!(d.quantizer.labels(), vec![0, 1, 2]);
        assert!(d.info_loss.abs() < 1e-15);
        assert!(agglomerative_ib(&j, 4).is_err());
        assert!(agglomerative_ib(&j, 0).is_err());
    }

    #[test]
    fn merge_cost_matches_information_drop() {
        let j = JointXY::new(vec![
            vec![0.12, 0.08, 0.20, 0.05],
            vec![0.10, 0.25, 0.05, 0.15],
        ])
        .unwrap();
        let base = mutual_information(&j);
        let d = agglomerative_ib(&j, 3).unwrap();
        // one merge: its loss is the cheapest pairwise merge loss
        let mut best = f64::INFINITY;
        for a in 0..4 {
            for b in (a + 1)..4 {
                let labels: Vec<usize> = (0..4)
                    .map(|y| if y == b { a } else { y })
                    .collect();
                let mut remap = labels.clone();
                remap.sort();
                remap.dedup();
                let labels: Vec<usize> =
                    labels.iter().map(|l| remap.binary_search(l).unwrap()).collect();
                let e = IbDesign::evaluate(&j, Quantizer::from_labels(&labels, 3).unwrap(), 1.0)
                    .unwrap();
                best = best.min(base - e.relevant_info);
            }
        }
        assert!((d.info_loss - best).abs() < 1e-12);
    }

    #[test]
    fn deterministic() {
        let j = JointXY::new(vec![
            vec![0.05, 0.1, 0.05, 0.1, 0.05, 0.1],
            vec![0.1, 0.05, 0.1, 0.05, 0.1, 0.15],
        ])
        .unwrap();
        assert_eq!(agglomerative_ib(&j, 2).unwrap(), agglomerative_ib(&j, 2).unwrap());
    }
}
