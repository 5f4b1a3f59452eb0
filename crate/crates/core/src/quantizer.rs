use crate::error::{Error, Result};
use crate::info::ConditionalDist;

const POINT_MASS: f64 = 1.0 - 1e-12;

/// A mapping `p(z|y)` from an observation alphabet onto a cluster alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantizer {
    mapping: ConditionalDist,
    deterministic: bool,
}

impl Quantizer {
    /// Wraps a stochastic mapping; the deterministic flag is inferred.
    pub fn new(mapping: ConditionalDist) -> Self {
        let deterministic = mapping
            .rows()
            .all(|r| r.iter().any(|&p| p >= POINT_MASS));
        Self {
            mapping,
            deterministic,
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        ConditionalDist::new(rows).map(Self::new)
    }

    /// A deterministic partition: observation `y` goes to cluster `labels[y]`.
    pub fn from_labels(labels: &[usize], num_clusters: usize) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidParameter("quantizer with no inputs".into()));
        }
        if num_clusters == 0 {
            return Err(Error::InvalidParameter("quantizer with no clusters".into()));
        }
        let mut data = vec![0.0; labels.len() * num_clusters];
        for (y, &z) in labels.iter().enumerate() {
            if z >= num_clusters {
                return Err(Error::InvalidParameter(format!(
                    "label {z} for input {y} exceeds {num_clusters} clusters"
                )));
            }
            data[y * num_clusters + z] = 1.0;
        }
        Ok(Self {
            mapping: ConditionalDist::from_flat(labels.len(), num_clusters, data),
            deterministic: true,
        })
    }

    pub fn identity(n: usize) -> Self {
        let labels: Vec<usize> = (0..n).collect();
        Self::from_labels(&labels, n).expect("identity is a valid partition")
    }

    pub fn mapping(&self) -> &ConditionalDist {
        &self.mapping
    }

    pub fn is_deterministic(&self) -> bool {
        self.deterministic
    }

    pub fn input_size(&self) -> usize {
        self.mapping.num_rows()
    }

    pub fn output_size(&self) -> usize {
        self.mapping.num_cols()
    }

    /// Hard labels: the most likely cluster for every input (lowest index on ties).
    pub fn labels(&self) -> Vec<usize> {
        self.mapping
            .rows()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, &p)| {
                        if p > best.1 {
                            (i, p)
                        } else {
                            best
                        }
                    })
                    .0
            })
            .collect()
    }
}
