use iblut::ib::{
    agglomerative_ib, contiguous_dp_quantizer, dp_optimal_quantizer, kl_means_ib, iterative_ib, ItIbInit,
    ItIbParams, KlMeansParams,
};
use iblut::info::{mutual_information, push_through_quantizer};
use iblut::maxlut::{build_max_lut, node_joint, MessageDist, NodeFunction};
use iblut::{ConditionalDist, JointXY, Quantizer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_pmf(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..len).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

fn random_binary_joint(rng: &mut ChaCha8Rng, ny: usize) -> JointXY {
    let w = random_pmf(rng, 2 * ny);
    JointXY::new(vec![w[..ny].to_vec(), w[ny..].to_vec()]).unwrap()
}

/// Best `I(x;z)` over every map from `ny` symbols to `n` labels.
fn exhaustive_best(j: &JointXY, n: usize) -> f64 {
    let ny = j.ny();
    let mut labels = vec![0usize; ny];
    let mut best = 0.0f64;
    loop {
        let q = Quantizer::from_labels(&labels, n).unwrap();
        best = best.max(mutual_information(&push_through_quantizer(j, &q).unwrap()));
        let mut i = 0;
        while i < ny {
            labels[i] += 1;
            if labels[i] < n {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
        if i == ny {
            return best;
        }
    }
}

#[test]
fn dp_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let j = random_binary_joint(&mut rng, 8);
        for n in [2, 3] {
            let d = dp_optimal_quantizer(&j, n).unwrap();
            assert!((d.relevant_info - exhaustive_best(&j, n)).abs() < 1e-12);
        }
    }
}

#[test]
fn contiguous_dp_matches_dp_on_llr_sorted_joints() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        // columns already in increasing LLR order, so contiguous runs are optimal
        let j = random_binary_joint(&mut rng, 10);
        let mut cols: Vec<(f64, f64)> = (0..10).map(|y| (j.get(0, y), j.get(1, y))).collect();
        cols.sort_by(|a, b| (a.0 / a.1).partial_cmp(&(b.0 / b.1)).unwrap());
        let sorted = JointXY::new(vec![
            cols.iter().map(|c| c.0).collect(),
            cols.iter().map(|c| c.1).collect(),
        ])
        .unwrap();
        for n in [2, 4] {
            let a = contiguous_dp_quantizer(&sorted, n).unwrap().relevant_info;
            let b = dp_optimal_quantizer(&sorted, n).unwrap().relevant_info;
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn heuristics_land_near_the_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let j = random_binary_joint(&mut rng, 8);
        let opt = dp_optimal_quantizer(&j, 3).unwrap().relevant_info;
        let agg = agglomerative_ib(&j, 3).unwrap().relevant_info;
        let km = (0..20)
            .map(|s| kl_means_ib(&j, 3, &KlMeansParams::new(0.0), s).unwrap().relevant_info)
            .fold(0.0, f64::max);
        let it = (0..20)
            .map(|s| {
                iterative_ib(&j, 3, &ItIbParams::new(400.0), ItIbInit::Seed(s))
                    .unwrap()
                    .relevant_info
            })
            .fold(0.0, f64::max);
        for got in [agg, km, it] {
            assert!(got <= opt + 1e-12);
            assert!(opt - got < 0.05, "{got} vs {opt}");
        }
    }
}

fn random_message(rng: &mut ChaCha8Rng, size: usize) -> MessageDist {
    MessageDist::from_rows(random_pmf(rng, size), random_pmf(rng, size)).unwrap()
}

fn node_info(cond: &ConditionalDist, labels: &[usize], out: usize) -> f64 {
    let rows: Vec<Vec<f64>> = (0..2)
        .map(|x| {
            let mut r = vec![0.0; out];
            for (o, &v) in labels.iter().enumerate() {
                r[v] += 0.5 * cond.get(x, o);
            }
            r
        })
        .collect();
    mutual_information(&JointXY::new(rows).unwrap())
}

#[test]
fn max_lut_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for (ls, zs) in [(2, 2), (2, 3), (2, 4), (4, 2)] {
        for _ in 0..6 {
            let a = random_message(&mut rng, ls);
            let b = random_message(&mut rng, zs);
            for f in [NodeFunction::CheckXor, NodeFunction::VariableEqual] {
                let cond = node_joint(f, &a, &b);
                for out in [2, 3] {
                    let lut = build_max_lut(f, &a, &b, out).unwrap();
                    let mut labels = vec![0usize; ls * zs];
                    let mut best = 0.0f64;
                    'enumerate: loop {
                        best = best.max(node_info(&cond, &labels, out));
                        for l in labels.iter_mut() {
                            *l += 1;
                            if *l < out {
                                continue 'enumerate;
                            }
                            *l = 0;
                        }
                        break;
                    }
                    let table: Vec<usize> = lut.table.iter().map(|&v| v as usize).collect();
                    assert!((node_info(&cond, &table, out) - lut.relevant_info).abs() < 1e-12);
                    assert!((lut.relevant_info - best).abs() < 1e-12, "{f:?} {ls}x{zs}->{out}");
                }
            }
        }
    }
}

fn symmetric_message(rng: &mut ChaCha8Rng, size: usize) -> MessageDist {
    let g0 = random_pmf(rng, size);
    let g1: Vec<f64> = g0.iter().rev().copied().collect();
    MessageDist::from_rows(g0, g1).unwrap()
}

/// Outcome `(l, z)` is the image of the mirrored outcome under swapping the
/// roles of bit 0 and bit 1.
fn mirror(f: NodeFunction, ls: usize, zs: usize, o: usize) -> usize {
    let (l, z) = (o / zs, o % zs);
    match f {
        NodeFunction::CheckXor => (ls - 1 - l) * zs + z,
        NodeFunction::VariableEqual => (ls - 1 - l) * zs + (zs - 1 - z),
    }
}

#[test]
fn symmetric_tables_are_optimal_among_symmetric_partitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for (ls, zs) in [(2, 2), (2, 4), (4, 2), (4, 4)] {
        for _ in 0..8 {
            let a = symmetric_message(&mut rng, ls);
            let b = symmetric_message(&mut rng, zs);
            for f in [NodeFunction::CheckXor, NodeFunction::VariableEqual] {
                let cond = node_joint(f, &a, &b);
                let lut = build_max_lut(f, &a, &b, 2).unwrap();
                let table: Vec<usize> = lut.table.iter().map(|&v| v as usize).collect();
                let outcomes = ls * zs;
                let mut best_sym = 0.0f64;
                let mut best_any = 0.0f64;
                for w in 0u32..1 << outcomes {
                    let labels: Vec<usize> = (0..outcomes).map(|o| (w >> o & 1) as usize).collect();
                    let info = node_info(&cond, &labels, 2);
                    best_any = best_any.max(info);
                    if (0..outcomes).all(|o| labels[mirror(f, ls, zs, o)] == 1 - labels[o]) {
                        best_sym = best_sym.max(info);
                    }
                }
                assert!(lut.out_cond.is_symmetric());
                assert!((0..outcomes).all(|o| table[mirror(f, ls, zs, o)] == 1 - table[o]));
                assert!((lut.relevant_info - best_sym).abs() < 1e-12, "{f:?} {ls}x{zs}");
                assert!(lut.relevant_info <= best_any + 1e-12);
            }
        }
    }
}
