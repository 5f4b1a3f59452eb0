
use rand::Rng;

use super::{objective_value, IbDesign, Support, DEAD_CLUSTER};
use crate::error::{check_dim, invalid, Result};
use crate::info::{ConditionalDist, JointXY, Pmf, ZERO_PROB};
use crate::quantizer::Quantizer;

pub(crate) const DEFAULT_MAX_SWEEPS: usize = 500;
pub(crate) const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct ItIbParams {
    pub beta: f64,
    pub max_sweeps: usize,
    /// Convergence threshold on both the per-sweep objective decrease and the
    /// largest change of any mapping entry.
    pub tol: f64,
}

impl ItIbParams {
    pub fn new(beta: f64) -> Self {
        Self {
            beta,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            tol: DEFAULT_TOL,
        }
    }
}

/// Starting point of an It-IB run.
#[derive(Debug, Clone)]
pub enum ItIbInit {
    /// Rows of i.i.d. uniform(0, 1) entries, normalized, from this seed.
    Seed(u64),
    Mapping(Quantizer),
}

/// Cluster statistics derived from a mapping: `p(z)`, `p(x|z)`, and the
/// resulting `I(y;z)` and `I(x;z)`.
struct Marginals {
    pz: Vec<f64>,
    post: Vec<Vec<f64>>,
    rate: f64,
    relevant: f64,
}

struct Engine<'a> {
    j: &'a JointXY,
    py: Vec<f64>,
    px: Vec<f64>,
    /// `(x, p(x|y), ln p(x|y))` over the support of every posterior
    post_y: Vec<Vec<(usize, f64, f64)>>,
    n: usize,
    beta: f64,
}

impl<'a> Engine<'a> {
    fn new(j: &'a JointXY, n: usize, beta: f64) -> Self {
        let py = j.y_marginal().probs().to_vec();
        let post_y = j
            .posteriors()
            .into_iter()
            .map(|p| {
                let p = p.expect("support reduced");
                p.iter()
                    .enumerate()
                    .filter(|(_, &v)| v > 0.0)
                    .map(|(x, &v)| (x, v, v.ln()))
                    .collect()
            })
            .collect();
        Self {
            px: j.x_marginal().probs().to_vec(),
            j,
            py,
            post_y,
            n,
            beta,
        }
    }

    /// p(z) and p(x|z); dead clusters keep `last` posteriors when given.
    fn marginals(&self, map: &[f64], last: Option<&[Vec<f64>]>) -> Marginals {
        let (n, nx) = (self.n, self.j.nx());
        let mut pz = vec![0.0; n];
        let mut pxz = vec![vec![0.0; nx]; n];
        for (y, &py) in self.py.iter().enumerate() {
            let row = &map[y * n..(y + 1) * n];
            for z in 0..n {
                let w = row[z];
                if w == 0.0 {
                    continue;
                }
                pz[z] += py * w;
                for x in 0..nx {
                    pxz[z][x] += self.j.get(x, y) * w;
                }
            }
        }
        let mut relevant = 0.0;
        let mut post = Vec::with_capacity(n);
        for z in 0..n {
            for x in 0..nx {
                let p = pxz[z][x];
                if p > 0.0 {
                    relevant += p * (p / self.px[x] / pz[z]).log2();
                }
            }
            if pz[z] >= DEAD_CLUSTER || last.is_none() && pz[z] > 0.0 {
                post.push(pxz[z].iter().map(|v| v / pz[z]).collect());
            } else if let Some(last) = last {
                post.push(last[z].clone());
            } else {
                post.push(vec![1.0 / nx as f64; nx]);
            }
        }
        let mut rate = 0.0;
        for (y, &py) in self.py.iter().enumerate() {
            for z in 0..n {
                let w = map[y * n + z];
                let m = py * w;
                if m > 0.0 {
                    rate += m * (w / pz[z]).log2();
                }
            }
        }
        Marginals {
            pz,
            post,
            rate: rate.max(0.0),
            relevant: relevant.max(0.0),
        }
    }

    /// The stationary-point map `p(z) exp(-beta D(p(x|y) || p(x|z))) / psi(y)`
    /// with the divergence in nats, so that the multiplier matches the
    /// objective's scale.
    fn update(&self, m: &Marginals) -> Vec<f64> {
        let n = self.n;
        let mut out = Vec::with_capacity(self.py.len() * n);
        let mut logits = vec![0.0; n];
        let log_pz: Vec<f64> = m.pz.iter().map(|p| p.ln()).collect();
        // ln p(x|z), or None where the divergence floor applies
        let log_post: Vec<Vec<Option<f64>>> = m
            .post
            .iter()
            .map(|q| q.iter().map(|&v| (v >= ZERO_PROB).then(|| v.ln())).collect())
            .collect();
        for post in &self.post_y {
            for z in 0..n {
                let lp = log_pz[z];
                logits[z] = if self.beta == 0.0 || lp == f64::NEG_INFINITY {
                    lp
                } else {
                    lp - self.beta * kl_nats(post, &log_post[z])
                };
            }
            let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let start = out.len();
            out.extend(logits.iter().map(|&l| (l - top).exp()));
            // psi(y, beta)
            let psi: f64 = out[start..].iter().sum();
            out[start..].iter_mut().for_each(|v| *v /= psi);
        }
        out
    }
}

/// `D(p || q)` in nats from precomputed logarithms, with the same
/// zero-mass conventions as `info::kl_divergence`.
fn kl_nats(p: &[(usize, f64, f64)], log_q: &[Option<f64>]) -> f64 {
    let mut acc = 0.0;
    for &(x, px, lpx) in p {
        match log_q[x] {
            Some(lq) => acc += px * (lpx - lq),
            None if px < ZERO_PROB => {}
            None => return f64::INFINITY,
        }
    }
    acc.max(0.0)
}

/// Largest absolute difference between a mapping and its recomputation from
/// the stationarity condition, over every `(y, z)` with `p(y) > 0`.
pub fn eq2_residual(j: &JointXY, q: &Quantizer, beta: f64) -> Result<f64> {
    check_dim(j.ny(), q.input_size())?;
    let support = Support::of(j)?;
    let map = support.reduce_rows(q);
    let eng = Engine::new(&support.reduced, q.output_size(), beta);
    let flat: Vec<f64> = map.rows().flatten().copied().collect();
    let m = eng.marginals(&flat, None);
    let next = eng.update(&m);
    Ok(flat
        .iter()
        .zip(&next)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

fn random_mapping<R: Rng + ?Sized>(rows: usize, n: usize, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * n);
    for _ in 0..rows {
        let row: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let s: f64 = row.iter().sum();
        out.extend(row.into_iter().map(|v| v / s));
    }
    out
}

pub fn iterative_ib(j: &JointXY, n: usize, params: &ItIbParams, init: ItIbInit) -> Result<IbDesign> {
    match init {
        ItIbInit::Seed(seed) => iterative_ib_with_rng(j, n, params, &mut super::stream_rng(seed, 0, 0)),
        ItIbInit::Mapping(q) => {
            check_dim(j.ny(), q.input_size())?;
            check_dim(n, q.output_size())?;
            let support = Support::of(j)?;
            let map = support.reduce_rows(&q).rows().flatten().copied().collect();
            run(j, &support, n, params, map)
        }
    }
}

pub fn iterative_ib_with_rng<R: Rng + ?Sized>(
    j: &JointXY,
    n: usize,
    params: &ItIbParams,
    rng: &mut R,
) -> Result<IbDesign> {
    check_args(n, params)?;
    let support = Support::of(j)?;
    let map = random_mapping(support.kept.len(), n, rng);
    run(j, &support, n, params, map)
}

fn check_args(n: usize, params: &ItIbParams) -> Result<()> {
    if n == 0 {
        return Err(invalid("cluster count must be >= 1"));
    }
    if !(params.beta >= 0.0) || params.beta.is_infinite() {
        return Err(invalid(format!("beta must be finite and >= 0, got {}", params.beta)));
    }
    Ok(())
}

fn run(
    j: &JointXY,
    support: &Support,
    n: usize,
    params: &ItIbParams,
    mut map: Vec<f64>,
) -> Result<IbDesign> {
    check_args(n, params)?;
    let eng = Engine::new(&support.reduced, n, params.beta);
    let mut state = eng.marginals(&map, None);
    let mut trace = vec![objective_value(state.rate, state.relevant, params.beta)];
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < params.max_sweeps {
        let next = eng.update(&state);
        let residual = map
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let prev_obj = *trace.last().unwrap();
        map = next;
        state = eng.marginals(&map, Some(&state.post));
        let obj = objective_value(state.rate, state.relevant, params.beta);
        trace.push(obj);
        sweeps += 1;
        if residual < params.tol && prev_obj - obj < params.tol {
            converged = true;
            break;
        }
    }

    let nx = j.nx();
    let reduced_map = ConditionalDist::from_flat(support.kept.len(), n, map);
    let quantizer = Quantizer::new(support.expand_rows(&reduced_map));
    let mut design = IbDesign::evaluate(j, quantizer, params.beta)?;
    // dead clusters report their last valid representative and zero prior
    let pz: Vec<f64> = state
        .pz
        .iter()
        .map(|&p| if p < DEAD_CLUSTER { 0.0 } else { p })
        .collect();
    let total: f64 = pz.iter().sum();
    design.cluster_prior = Pmf::from_raw(pz.into_iter().map(|p| p / total).collect());
    let posts: Vec<f64> = (0..n)
        .flat_map(|z| {
            if design.cluster_prior.probs()[z] > 0.0 {
                design.cluster_posteriors.row(z).to_vec()
            } else {
                state.post[z].clone()
            }
        })
        .collect();
    design.cluster_posteriors = ConditionalDist::from_flat(n, nx, posts);
    design.sweeps = sweeps;
    design.converged = converged;
    design.objective_trace = trace;
    Ok(design)
}
