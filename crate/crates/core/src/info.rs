//! Finite-alphabet probability arithmetic and information measures.
//!
//! All logarithms are base 2; every information quantity is in bits. The
//! conventions `0 log 0 = 0` and `0 log(0/0) = 0` are applied entrywise.

use crate::error::{check_dim, Error, Result};
use crate::quantizer::Quantizer;

/// Probabilities below this are treated as exact zeros when testing
/// absolute continuity.
pub const ZERO_PROB: f64 = 1e-15;

/// Inputs whose total deviates from one by less than this are renormalized.
pub const NORMALIZE_SLACK: f64 = 1e-6;

fn normalized(mut v: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::InvalidDistribution(format!("{what}: empty alphabet")));
    }
    if let Some(bad) = v.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidDistribution(format!(
            "{what}: entry {bad} is not a non-negative finite number"
        )));
    }
    let total: f64 = v.iter().sum();
    if (total - 1.0).abs() >= NORMALIZE_SLACK {
        return Err(Error::InvalidDistribution(format!(
            "{what}: entries sum to {total}"
        )));
    }
    if (total - 1.0).abs() > 1e-12 {
        v.iter_mut().for_each(|p| *p /= total);
    }
    Ok(v)
}

#[inline]
pub(crate) fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

/// A probability mass function over an indexed alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf(Vec<f64>);

impl Pmf {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        normalized(probs, "pmf").map(Pmf)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDistribution("pmf: empty alphabet".into()));
        }
        Ok(Pmf(vec![1.0 / n as f64; n]))
    }

    pub fn point_mass(n: usize, at: usize) -> Result<Self> {
        if at >= n {
            return Err(Error::InvalidParameter(format!(
                "point mass at {at} outside alphabet of size {n}"
            )));
        }
        let mut v = vec![0.0; n];
        v[at] = 1.0;
        Ok(Pmf(v))
    }

    /// Wraps a vector known to be normalized; callers inside the crate only.
    pub(crate) fn from_raw(v: Vec<f64>) -> Self {
        Pmf(v)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entropy(&self) -> f64 {
        entropy(self)
    }
}

/// Shannon entropy in bits.
pub fn entropy(p: &Pmf) -> f64 {
    entropy_of(p.probs())
}

pub(crate) fn entropy_of(p: &[f64]) -> f64 {
    (-p.iter().map(|&v| plogp(v)).sum::<f64>()).max(0.0)
}

/// Kullback-Leibler divergence `D(p || q)` in bits; `+inf` when `p` is not
/// absolutely continuous with respect to `q`.
pub fn kl_divergence(p: &Pmf, q: &Pmf) -> Result<f64> {
    check_dim(p.len(), q.len())?;
    Ok(kl_slices(p.probs(), q.probs()))
}

pub(crate) fn kl_slices(p: &[f64], q: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi <= 0.0 {
            continue;
        }
        if qi < ZERO_PROB {
            if pi < ZERO_PROB {
                continue;
            }
            return f64::INFINITY;
        }
        acc += pi * (pi / qi).log2();
    }
    acc.max(0.0)
}

/// A row-stochastic matrix: one conditional pmf per conditioning symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalDist {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ConditionalDist {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.into_iter().enumerate() {
            check_dim(cols, row.len())?;
            data.extend(normalized(row, &format!("conditional row {i}"))?);
        }
        if data.is_empty() {
            return Err(Error::InvalidDistribution("conditional: no rows".into()));
        }
        Ok(Self {
            rows: data.len() / cols,
            cols,
            data,
        })
    }

    pub(crate) fn from_flat(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(rows * cols, data.len());
        Self { rows, cols, data }
    }

    pub fn num_rows(&self) -> usize {
        self.rows
    }

    pub fn num_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.cols)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }
}

/// Joint distribution `p(x, y)`; rows are source symbols, columns observations.
#[derive(Debug, Clone, PartialEq)]
pub struct JointXY {
    nx: usize,
    ny: usize,
    data: Vec<f64>,
}

impl JointXY {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let ny = rows.first().map_or(0, Vec::len);
        let nx = rows.len();
        let mut flat = Vec::with_capacity(nx * ny);
        for row in rows {
            check_dim(ny, row.len())?;
            flat.extend(row);
        }
        let data = normalized(flat, "joint")?;
        Ok(Self { nx, ny, data })
    }

    /// `p(x, y) = p(x) p(y|x)`.
    pub fn from_channel(prior: &Pmf, channel: &ConditionalDist) -> Result<Self> {
        check_dim(prior.len(), channel.num_rows())?;
        let ny = channel.num_cols();
        let data = channel
            .rows()
            .zip(prior.probs())
            .flat_map(|(row, &px)| row.iter().map(move |&p| px * p))
            .collect();
        Ok(Self {
            nx: prior.len(),
            ny,
            data,
        })
    }

    pub(crate) fn from_flat(nx: usize, ny: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(nx * ny, data.len());
        Self { nx, ny, data }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[x * self.ny + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.data[x * self.ny..(x + 1) * self.ny]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.ny).map(<[f64]>::to_vec).collect()
    }

    pub fn x_marginal(&self) -> Pmf {
        Pmf::from_raw(self.data.chunks(self.ny).map(|r| r.iter().sum()).collect())
    }

    pub fn y_marginal(&self) -> Pmf {
        let mut py = vec![0.0; self.ny];
        for row in self.data.chunks(self.ny) {
            py.iter_mut().zip(row).for_each(|(a, b)| *a += b);
        }
        Pmf::from_raw(py)
    }

    /// Column `y` of the joint, i.e. `p(x, y)` for every `x`.
    pub fn column(&self, y: usize) -> Vec<f64> {
        (0..self.nx).map(|x| self.get(x, y)).collect()
    }

    /// `p(x|y)` for every `y`; `None` where `p(y) = 0`.
    pub fn posteriors(&self) -> Vec<Option<Vec<f64>>> {
        (0..self.ny)
            .map(|y| {
                let col = self.column(y);
                let py: f64 = col.iter().sum();
                (py > 0.0).then(|| col.into_iter().map(|v| v / py).collect())
            })
            .collect()
    }

    /// Swaps the roles of the two variables.
    pub fn transpose(&self) -> JointXY {
        let data = (0..self.ny)
            .flat_map(|y| (0..self.nx).map(move |x| (x, y)))
            .map(|(x, y)| self.get(x, y))
            .collect();
        JointXY::from_flat(self.ny, self.nx, data)
    }

    /// The observation-side identity joint `p(y, y')` = `p(y)` on the diagonal.
    pub(crate) fn y_self_joint(&self) -> JointXY {
        let py = self.y_marginal();
        let n = self.ny;
        let mut data = vec![0.0; n * n];
        for (i, &p) in py.probs().iter().enumerate() {
            data[i * n + i] = p;
        }
        JointXY::from_flat(n, n, data)
    }
}

/// `I(X;Y)` in bits.
pub fn mutual_information(j: &JointXY) -> f64 {
    let px = j.x_marginal();
    let py = j.y_marginal();
    let mut acc = 0.0;
    for x in 0..j.nx() {
        for y in 0..j.ny() {
            let p = j.get(x, y);
            if p > 0.0 {
                // divided one marginal at a time: the product can underflow
                acc += p * (p / px.probs()[x] / py.probs()[y]).log2();
            }
        }
    }
    acc.max(0.0)
}

/// `p(x, z) = sum_y p(x, y) p(z|y)`.
pub fn push_through_quantizer(j: &JointXY, q: &Quantizer) -> Result<JointXY> {
    check_dim(j.ny(), q.input_size())?;
    let nz = q.output_size();
    let map = q.mapping();
    let mut data = vec![0.0; j.nx() * nz];
    for x in 0..j.nx() {
        let out = &mut data[x * nz..(x + 1) * nz];
        for (y, &pxy) in j.row(x).iter().enumerate() {
            if pxy == 0.0 {
                continue;
            }
            for (o, &pz) in out.iter_mut().zip(map.row(y)) {
                *o += pxy * pz;
            }
        }
    }
    Ok(JointXY::from_flat(j.nx(), nz, data))
}

/// Expected KL distortion `E[D(p(x|y) || p(x|z))]` incurred by the quantizer.
///
/// Equals `I(X;Y) - I(X;Z)` for any quantizer obeying the Markov chain
/// `x - y - z`.
pub fn avg_kl_distortion(j: &JointXY, q: &Quantizer) -> Result<f64> {
    let xz = push_through_quantizer(j, q)?;
    let post_y = j.posteriors();
    let post_z = xz.posteriors();
    let py = j.y_marginal();
    let map = q.mapping();
    let mut acc = 0.0;
    for (y, post) in post_y.iter().enumerate() {
        let Some(post) = post else { continue };
        for (z, &pz_y) in map.row(y).iter().enumerate() {
            if pz_y == 0.0 {
                continue;
            }
            // p(z) > 0 whenever p(y) p(z|y) > 0
            let pxz = post_z[z].as_ref().expect("cluster with mass has a posterior");
            acc += py.probs()[y] * pz_y * kl_slices(post, pxz);
        }
    }
    Ok(acc)
}
