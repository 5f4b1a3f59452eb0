use std::cmp::Ordering;

use super::{IbDesign, Support};
use crate::error::{invalid, Error, Result};
use crate::info::JointXY;
use crate::quantizer::Quantizer;

/// Adjacent LLR-sorted symbols closer than this are fused before the search.
const LLR_TIE: f64 = 1e-12;

/// Contribution of one cluster with joint column `pxz` to `I(X;Z)`.
fn cluster_info(pxz: &[f64], px: &[f64]) -> f64 {
    let pz: f64 = pxz.iter().sum();
    if pz <= 0.0 {
        return 0.0;
    }
    pxz.iter()
        .zip(px)
        .filter(|(&p, _)| p > 0.0)
        .map(|(&p, &q)| p * (p / q / pz).log2())
        .sum()
}

/// Best partition of `atoms` (each a joint column over `x`) into at most `n`
/// contiguous runs, maximizing `I(X;Z)`. Returns the run index of every atom.
fn contiguous_runs(atoms: &[Vec<f64>], px: &[f64], n: usize) -> Vec<usize> {
    let m = atoms.len();
    let nx = px.len();
    let k_max = n.min(m);
    // prefix[i][x] = sum of atoms[..i] at x
    let mut prefix = vec![vec![0.0; nx]; m + 1];
    for (i, a) in atoms.iter().enumerate() {
        for x in 0..nx {
            prefix[i + 1][x] = prefix[i][x] + a[x];
        }
    }
    let mut seg = vec![0.0; nx];
    let mut cost = |i: usize, j: usize| {
        for x in 0..nx {
            seg[x] = (prefix[j][x] - prefix[i][x]).max(0.0);
        }
        cluster_info(&seg, px)
    };
    // best[k][j]: best value covering the first j atoms with k runs
    let neg = f64::NEG_INFINITY;
    let mut best = vec![vec![neg; m + 1]; k_max + 1];
    let mut back = vec![vec![0usize; m + 1]; k_max + 1];
    best[0][0] = 0.0;
    for k in 1..=k_max {
        // leave room for the remaining k_max - k runs
        for j in k..=(m - (k_max - k)) {
            let mut b = neg;
            let mut arg = k - 1;
            for i in (k - 1)..j {
                if best[k - 1][i] == neg {
                    continue;
                }
                let v = best[k - 1][i] + cost(i, j);
                if v > b {
                    b = v;
                    arg = i;
                }
            }
            best[k][j] = b;
            back[k][j] = arg;
        }
    }
    let mut runs = vec![0; m];
    let mut j = m;
    for k in (1..=k_max).rev() {
        let i = back[k][j];
        runs[i..j].iter_mut().for_each(|r| *r = k - 1);
        j = i;
    }
    runs
}

/// Best contiguous partition of the observation alphabet in its natural
/// index order, for any relevance alphabet. Zero-probability observations are
/// attached to their nearest neighbor's cluster.
///
/// For binary relevance use [`dp_optimal_quantizer`], which sorts by LLR
/// first and is then globally optimal.
pub fn contiguous_dp_quantizer(j: &JointXY, n: usize) -> Result<IbDesign> {
    if n == 0 {
        return Err(invalid("cluster count must be >= 1"));
    }
    let support = Support::of(j)?;
    let red = &support.reduced;
    let atoms: Vec<Vec<f64>> = (0..red.ny()).map(|y| red.column(y)).collect();
    let runs = contiguous_runs(&atoms, j.x_marginal().probs(), n);
    let labels = support.expand_labels(&runs);
    IbDesign::evaluate(j, Quantizer::from_labels(&labels, n)?, f64::INFINITY)
}

/// Log posterior ratio `ln p(x=0|y) / p(x=1|y)` (infinite when one side is 0).
pub(crate) fn llr(p0: f64, p1: f64) -> f64 {
    match (p0 > 0.0, p1 > 0.0) {
        (true, true) => p0.ln() - p1.ln(),
        (true, false) => f64::INFINITY,
        (false, true) => f64::NEG_INFINITY,
        (false, false) => 0.0,
    }
}

/// Globally optimal deterministic quantizer for a binary relevance variable.
///
/// Observations are stably sorted by descending LLR; the optimum over all
/// partitions is contiguous in that order, so a dynamic program over run
/// boundaries finds it. Cluster labels follow the LLR order: cluster 0 holds
/// the strongest evidence for `x = 0`.
pub fn dp_optimal_quantizer(j: &JointXY, n: usize) -> Result<IbDesign> {
    if j.nx() != 2 {
        return Err(Error::NonBinary(j.nx()));
    }
    let labels = llr_sorted_labels(j, n)?;
    IbDesign::evaluate(j, Quantizer::from_labels(&labels, n)?, f64::INFINITY)
}

/// Cluster label per observation for the LLR-ordered DP optimum.
pub(crate) fn llr_sorted_labels(j: &JointXY, n: usize) -> Result<Vec<usize>> {
    llr_sorted_labels_keyed(j, n, None)
}

/// As [`llr_sorted_labels`], but with the sort key of every observation
/// supplied by the caller (an LLR computed another way, e.g. structurally).
/// Zero-probability observations then join the cluster whose key range
/// covers their key instead of their nearest index.
pub(crate) fn llr_sorted_labels_keyed(
    j: &JointXY,
    n: usize,
    keys: Option<&[f64]>,
) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(invalid("cluster count must be >= 1"));
    }
    if j.nx() != 2 {
        return Err(Error::NonBinary(j.nx()));
    }
    if let Some(k) = keys {
        crate::error::check_dim(j.ny(), k.len())?;
    }
    let key_of = |y: usize| keys.map(|k| if k[y].is_nan() { 0.0 } else { k[y] });
    let support = Support::of(j)?;
    let red = &support.reduced;
    let llrs: Vec<f64> = (0..red.ny())
        .map(|y| key_of(support.kept[y]).unwrap_or_else(|| llr(red.get(0, y), red.get(1, y))))
        .collect();
    let mut order: Vec<usize> = (0..red.ny()).collect();
    // stable: ties keep the original index order
    order.sort_by(|&a, &b| llrs[b].partial_cmp(&llrs[a]).unwrap_or(Ordering::Equal));

    // fuse runs of (numerically) tied LLRs into atoms
    let mut atom_of = vec![0usize; red.ny()];
    let mut atoms: Vec<Vec<f64>> = Vec::new();
    let mut prev = f64::NAN;
    for &y in &order {
        let l = llrs[y];
        let tied = l == prev || (l - prev).abs() <= LLR_TIE;
        if !tied || atoms.is_empty() {
            atoms.push(vec![0.0, 0.0]);
        }
        let a = atoms.last_mut().unwrap();
        a[0] += red.get(0, y);
        a[1] += red.get(1, y);
        atom_of[y] = atoms.len() - 1;
        prev = l;
    }
    let runs = contiguous_runs(&atoms, j.x_marginal().probs(), n);
    let reduced_labels: Vec<usize> = (0..red.ny()).map(|y| runs[atom_of[y]]).collect();
    if keys.is_none() {
        return Ok(support.expand_labels(&reduced_labels));
    }
    // smallest key in every used cluster, in label order (keys descend)
    let used = runs.last().map_or(0, |&r| r + 1);
    let mut floor = vec![f64::INFINITY; used];
    for (y, &l) in reduced_labels.iter().enumerate() {
        floor[l] = floor[l].min(llrs[y]);
    }
    let mut labels = vec![0; j.ny()];
    for (r, &y) in support.kept.iter().enumerate() {
        labels[y] = reduced_labels[r];
    }
    let py = j.y_marginal();
    for (y, label) in labels.iter_mut().enumerate() {
        if py.probs()[y] > 0.0 {
            continue;
        }
        let k = key_of(y).unwrap();
        *label = floor.iter().position(|&f| f <= k).unwrap_or(used - 1);
    }
    Ok(labels)
}

/// Labels for a binary joint that is symmetric under the involution
/// `mirror` (`p(o|0) = p(mirror(o)|1)`), given sort keys that change sign
/// under it. The optimum is searched over the positive half only and then
/// mirrored, so `label(mirror(o)) = n - 1 - label(o)`. `n` must be even.
///
/// Outcomes with zero key are split between the halves by comparing their
/// index with their mirror's.
pub(crate) fn symmetric_llr_labels(
    j: &JointXY,
    n: usize,
    keys: &[f64],
    mirror: &[usize],
) -> Result<Vec<usize>> {
    if n < 2 || n % 2 != 0 {
        return Err(invalid(format!("symmetric quantizer needs an even size, got {n}")));
    }
    if j.nx() != 2 {
        return Err(Error::NonBinary(j.nx()));
    }
    let ny = j.ny();
    crate::error::check_dim(ny, keys.len())?;
    crate::error::check_dim(ny, mirror.len())?;
    let key = |o: usize| if keys[o].is_nan() { 0.0 } else { keys[o] };
    let upper: Vec<bool> = (0..ny)
        .map(|o| {
            let k = key(o);
            k > LLR_TIE || (k.abs() <= LLR_TIE && mirror[o] >= o)
        })
        .collect();
    if (0..ny).any(|o| !upper[o] && !upper[mirror[o]]) {
        return Err(invalid("keys are not antisymmetric under the mirror map"));
    }
    let py = j.y_marginal();
    let mut order: Vec<usize> = (0..ny).filter(|&o| upper[o] && py.probs()[o] > 0.0).collect();
    if order.is_empty() {
        return Err(Error::InvalidDistribution("joint has no mass".into()));
    }
    order.sort_by(|&a, &b| key(b).partial_cmp(&key(a)).unwrap_or(Ordering::Equal));
    let mut atom_of = vec![0usize; ny];
    let mut atoms: Vec<Vec<f64>> = Vec::new();
    let mut prev = f64::NAN;
    for &o in &order {
        let l = key(o);
        if !(l == prev || (l - prev).abs() <= LLR_TIE) || atoms.is_empty() {
            atoms.push(vec![0.0, 0.0]);
        }
        let a = atoms.last_mut().unwrap();
        a[0] += j.get(0, o);
        a[1] += j.get(1, o);
        atom_of[o] = atoms.len() - 1;
        prev = l;
    }
    let runs = contiguous_runs(&atoms, j.x_marginal().probs(), n / 2);
    let used = runs.last().map_or(0, |&r| r + 1);
    let mut labels = vec![usize::MAX; ny];
    let mut floor = vec![f64::INFINITY; used];
    for &o in &order {
        labels[o] = runs[atom_of[o]];
        floor[labels[o]] = floor[labels[o]].min(key(o));
    }
    for o in 0..ny {
        if upper[o] && labels[o] == usize::MAX {
            let k = key(o);
            labels[o] = floor.iter().position(|&f| f <= k).unwrap_or(used - 1);
        }
    }
    for o in 0..ny {
        if !upper[o] {
            labels[o] = n - 1 - labels[mirror[o]];
        }
    }
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_bpsk_awgn, build_bsc};
    use crate::info::mutual_information;

    #[test]
    fn full_resolution_is_lossless() {
        let dmc = build_bpsk_awgn(1.0, 0.5, 12, 3.0).unwrap();
        let d = dp_optimal_quantizer(&dmc.joint(), 12).unwrap();
        assert!(d.info_loss.abs() < 1e-12);
    }

    #[test]
    fn bsc_stays_binary() {
        let j = build_bsc(0.1).unwrap().joint();
        let d = dp_optimal_quantizer(&j, 2).unwrap();
        let h = -(0.1f64 * 0.1f64.log2() + 0.9 * 0.9f64.log2());
        assert!((d.relevant_info - (1.0 - h)).abs() < 1e-12);
        assert_eq!(d.quantizer.labels(), vec![0, 1]);
    }

    #[test]
    fn rejects_non_binary() {
        let j = JointXY::new(vec![vec![0.2, 0.1], vec![0.1, 0.2], vec![0.2, 0.2]]).unwrap();
        assert!(matches!(dp_optimal_quantizer(&j, 2), Err(Error::NonBinary(3))));
        assert!(contiguous_dp_quantizer(&j, 2).is_ok());
        assert!(contiguous_dp_quantizer(&j, 0).is_err());
    }

    #[test]
    fn labels_follow_descending_llr() {
        let dmc = build_bpsk_awgn(2.0, 0.5, 32, 3.0).unwrap();
        let d = dp_optimal_quantizer(&dmc.joint(), 4).unwrap();
        let labels = d.quantizer.labels();
        // bin 31 is the most positive received value, i.e. strongest bit 0
        assert_eq!(labels[31], 0);
        assert_eq!(labels[0], 3);
        assert!(labels.windows(2).all(|w| w[0] >= w[1]));
        assert!(d.relevant_info <= mutual_information(&dmc.joint()));
    }

    #[test]
    fn contiguous_runs_never_beaten_by_coarser() {
        let dmc = build_bpsk_awgn(0.5, 0.5, 40, 3.0).unwrap();
        let j = dmc.joint();
        let mut last = 0.0;
        for n in 1..10 {
            let d = dp_optimal_quantizer(&j, n).unwrap();
            assert!(d.relevant_info >= last - 1e-12);
            last = d.relevant_info;
        }
    }
}
