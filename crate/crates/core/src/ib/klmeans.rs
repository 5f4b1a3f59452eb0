use rand::seq::index::sample;
use rand::Rng;

use super::{IbDesign, Support};
use crate::error::{invalid, Result};
use crate::info::{kl_slices, JointXY};
use crate::quantizer::Quantizer;

#[derive(Debug, Clone)]
pub struct KlMeansParams {
    /// Weight of the code-length term `-log2 p(z)`.
    pub lambda: f64,
    pub max_sweeps: usize,
    pub tol: f64,
}

impl KlMeansParams {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            max_sweeps: super::itib::DEFAULT_MAX_SWEEPS,
            tol: super::itib::DEFAULT_TOL,
        }
    }
}

struct Lloyd<'a> {
    py: &'a [f64],
    post_y: &'a [Vec<f64>],
    nx: usize,
    n: usize,
    lambda: f64,
}

struct Codebook {
    /// `None` for clusters that have never held a member.
    reps: Vec<Option<Vec<f64>>>,
    lengths: Vec<f64>,
}

impl Lloyd<'_> {
    fn cost(&self, y: usize, z: usize, book: &Codebook) -> f64 {
        match &book.reps[z] {
            None => f64::INFINITY,
            Some(rep) => {
                let d = kl_slices(&self.post_y[y], rep);
                if self.lambda == 0.0 {
                    d
                } else {
                    d + self.lambda * book.lengths[z]
                }
            }
        }
    }

    /// Step (c): argmin over clusters, lowest index on ties.
    fn assign(&self, book: &Codebook) -> Vec<usize> {
        (0..self.py.len())
            .map(|y| {
                let mut best = (0, f64::INFINITY);
                for z in 0..self.n {
                    let c = self.cost(y, z, book);
                    if c < best.1 {
                        best = (z, c);
                    }
                }
                best.0
            })
            .collect()
    }

    /// Steps (a) and (b): KL centroids (weighted posterior mixtures) and
    /// ideal code lengths. Clusters that empty out keep their last centroid.
    fn update(&self, labels: &[usize], book: &mut Codebook) -> Vec<f64> {
        let mut pz = vec![0.0; self.n];
        let mut acc = vec![vec![0.0; self.nx]; self.n];
        for (y, &z) in labels.iter().enumerate() {
            pz[z] += self.py[y];
            for (a, p) in acc[z].iter_mut().zip(&self.post_y[y]) {
                *a += self.py[y] * p;
            }
        }
        for z in 0..self.n {
            if pz[z] > 0.0 {
                book.reps[z] = Some(acc[z].iter().map(|v| v / pz[z]).collect());
                book.lengths[z] = -pz[z].log2();
            } else {
                book.lengths[z] = f64::INFINITY;
            }
        }
        pz
    }

    /// Mean distortion plus `lambda` times mean code length.
    fn objective(&self, labels: &[usize], book: &Codebook, pz: &[f64]) -> f64 {
        let distortion: f64 = labels
            .iter()
            .enumerate()
            .map(|(y, &z)| self.py[y] * kl_slices(&self.post_y[y], book.reps[z].as_ref().unwrap()))
            .sum();
        let length: f64 = pz
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.log2())
            .sum();
        distortion + self.lambda * length
    }

    /// Moves the worst-served observation (taken from a cluster with other
    /// members) into an empty cluster. Returns whether anything moved.
    fn reseed(&self, labels: &mut [usize], book: &mut Codebook, pz: &[f64]) -> bool {
        let Some(empty) = (0..self.n).find(|&z| pz[z] <= 0.0) else {
            return false;
        };
        let mut sizes = vec![0usize; self.n];
        labels.iter().for_each(|&z| sizes[z] += 1);
        let mut worst: Option<(usize, f64)> = None;
        for (y, &z) in labels.iter().enumerate() {
            if sizes[z] < 2 {
                continue;
            }
            let c = kl_slices(&self.post_y[y], book.reps[z].as_ref().unwrap());
            if c > 0.0 && worst.is_none_or(|(_, w)| c > w) {
                worst = Some((y, c));
            }
        }
        match worst {
            Some((y, _)) => {
                labels[y] = empty;
                book.reps[empty] = Some(self.post_y[y].clone());
                true
            }
            None => false,
        }
    }
}

/// Modified Lloyd iteration with KL distortion: alternate centroid update,
/// code-length update and penalized reassignment until the assignment stops
/// changing.
///
/// With `lambda = 0` empty clusters are re-seeded from the observation with
/// the largest distortion; with `lambda > 0` empty clusters carry infinite
/// code length and stay empty.
pub fn kl_means_with_rng<R: Rng + ?Sized>(
    j: &JointXY,
    n: usize,
    params: &KlMeansParams,
    rng: &mut R,
) -> Result<IbDesign> {
    if n == 0 {
        return Err(invalid("cluster count must be >= 1"));
    }
    if !(params.lambda >= 0.0) || params.lambda.is_infinite() {
        return Err(invalid(format!("lambda must be finite and >= 0, got {}", params.lambda)));
    }
    let support = Support::of(j)?;
    let red = &support.reduced;
    let py = red.y_marginal().probs().to_vec();
    let post_y: Vec<Vec<f64>> = red.posteriors().into_iter().flatten().collect();
    let m = py.len();
    let lloyd = Lloyd {
        py: &py,
        post_y: &post_y,
        nx: j.nx(),
        n,
        lambda: params.lambda,
    };

    let mut book = Codebook {
        reps: vec![None; n],
        lengths: vec![(n as f64).log2(); n],
    };
    for (z, y) in sample(rng, m, n.min(m)).into_iter().enumerate() {
        book.reps[z] = Some(post_y[y].clone());
    }

    let mut labels = lloyd.assign(&book);
    let mut pz = lloyd.update(&labels, &mut book);
    if params.lambda == 0.0 {
        while lloyd.reseed(&mut labels, &mut book, &pz) {
            pz = lloyd.update(&labels, &mut book);
        }
    }
    let mut trace = vec![lloyd.objective(&labels, &book, &pz)];
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < params.max_sweeps {
        sweeps += 1;
        let next = lloyd.assign(&book);
        let changed = next != labels;
        labels = next;
        pz = lloyd.update(&labels, &mut book);
        let mut reseeded = false;
        if params.lambda == 0.0 {
            while lloyd.reseed(&mut labels, &mut book, &pz) {
                pz = lloyd.update(&labels, &mut book);
                reseeded = true;
            }
        }
        let obj = lloyd.objective(&labels, &book, &pz);
        let prev = *trace.last().unwrap();
        trace.push(obj);
        if !reseeded && (!changed || prev - obj < params.tol) {
            converged = true;
            break;
        }
    }

    let full = support.expand_labels(&labels);
    let mut design = IbDesign::evaluate(j, Quantizer::from_labels(&full, n)?, f64::INFINITY)?;
    design.sweeps = sweeps;
    design.converged = converged;
    design.objective_trace = trace;
    Ok(design)
}

/// Seeded convenience wrapper around [`kl_means_with_rng`].
pub fn kl_means_ib(j: &JointXY, n: usize, params: &KlMeansParams, seed: u64) -> Result<IbDesign> {
    kl_means_with_rng(j, n, params, &mut super::stream_rng(seed, 0, 0))
}
