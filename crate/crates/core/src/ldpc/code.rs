use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

/// A binary LDPC code stored as its Tanner graph.
///
/// Edges are numbered check by check: the edges of check `c` are
/// `check_start[c]..check_start[c + 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LdpcCode {
    n: usize,
    /// Column weight, or 0 when columns are irregular.
    pub var_degree: usize,
    /// Row weight, or 0 when rows are irregular.
    pub check_degree: usize,
    pub seed: u64,
    /// Length-4 cycles left after construction.
    pub four_cycles: usize,
    check_start: Vec<usize>,
    edge_var: Vec<usize>,
    var_start: Vec<usize>,
    var_edges: Vec<usize>,
}

impl LdpcCode {
    /// Builds a code from the variable indices of every parity check.
    pub fn from_check_rows(n: usize, rows: &[Vec<usize>]) -> Result<Self> {
        let mut check_start = vec![0];
        let mut edge_var: Vec<usize> = Vec::new();
        for (c, row) in rows.iter().enumerate() {
            let mut sorted = row.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Construction(format!("check {c} repeats a variable")));
            }
            if let Some(&v) = sorted.last() {
                if v >= n {
                    return Err(invalid(format!("check {c} references variable {v} >= {n}")));
                }
            }
            edge_var.extend(row);
            check_start.push(edge_var.len());
        }
        let mut var_lists: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (e, &v) in edge_var.iter().enumerate() {
            var_lists[v].push(e);
        }
        let mut var_start = vec![0];
        let mut var_edges = Vec::with_capacity(edge_var.len());
        for l in &var_lists {
            var_edges.extend(l);
            var_start.push(var_edges.len());
        }
        let uniform = |starts: &[usize]| {
            let d = starts.get(1).copied().unwrap_or(0);
            starts.windows(2).all(|w| w[1] - w[0] == d).then_some(d).unwrap_or(0)
        };
        let mut code = Self {
            n,
            var_degree: uniform(&var_start),
            check_degree: uniform(&check_start),
            seed: 0,
            four_cycles: 0,
            check_start,
            edge_var,
            var_start,
            var_edges,
        };
        code.four_cycles = code.count_four_cycles();
        Ok(code)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.check_start.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.edge_var.len()
    }

    pub fn check_edges(&self, c: usize) -> std::ops::Range<usize> {
        self.check_start[c]..self.check_start[c + 1]
    }

    pub fn check_vars(&self, c: usize) -> &[usize] {
        &self.edge_var[self.check_edges(c)]
    }

    pub fn var_edges(&self, v: usize) -> &[usize] {
        &self.var_edges[self.var_start[v]..self.var_start[v + 1]]
    }

    pub fn edge_var(&self, e: usize) -> usize {
        self.edge_var[e]
    }

    /// `true` when every parity check is satisfied by `bits`.
    pub fn syndrome_ok(&self, bits: &[u8]) -> bool {
        (0..self.m()).all(|c| self.check_vars(c).iter().fold(0u8, |a, &v| a ^ bits[v]) == 0)
    }

    pub fn dense_rows(&self) -> Vec<Vec<u8>> {
        (0..self.m())
            .map(|c| {
                let mut r = vec![0u8; self.n];
                for &v in self.check_vars(c) {
                    r[v] = 1;
                }
                r
            })
            .collect()
    }

    fn count_four_cycles(&self) -> usize {
        let mut total = 0;
        for c in 0..self.m() {
            total += overlaps_with_later(self, c);
        }
        total
    }

    /// Rank of the parity-check matrix over GF(2).
    pub fn rank(&self) -> usize {
        self.encoder().pivots.len()
    }

    pub fn rate(&self) -> f64 {
        (self.n - self.rank()) as f64 / self.n as f64
    }

    pub fn encoder(&self) -> Encoder {
        Encoder::new(self)
    }
}

/// Number of later checks sharing at least two variables with check `c`
/// (each such pair of checks closes a length-4 cycle).
fn overlaps_with_later(code: &LdpcCode, c: usize) -> usize {
    let mut seen: Vec<(usize, usize)> = Vec::new();
    for &v in code.check_vars(c) {
        for &e in code.var_edges(v) {
            let other = check_of_edge(code, e);
            if other <= c {
                continue;
            }
            match seen.iter_mut().find(|(o, _)| *o == other) {
                Some(entry) => entry.1 += 1,
                None => seen.push((other, 1)),
            }
        }
    }
    seen.iter().filter(|(_, k)| *k >= 2).count()
}

fn check_of_edge(code: &LdpcCode, e: usize) -> usize {
    code.check_start.partition_point(|&s| s <= e) - 1
}

/// Socket assignment under repair: `sockets[c * dc + k]` is the variable on
/// slot `k` of check `c`.
struct Sockets {
    sockets: Vec<usize>,
    dc: usize,
    /// checks of every variable, one entry per socket
    var_checks: Vec<Vec<usize>>,
}

impl Sockets {
    fn check_of(&self, p: usize) -> usize {
        p / self.dc
    }

    fn vars(&self, c: usize) -> &[usize] {
        &self.sockets[c * self.dc..(c + 1) * self.dc]
    }

    /// Weighted conflict count local to check `c`: repeated variables weigh
    /// far more than 4-cycles.
    fn conflicts(&self, c: usize) -> usize {
        let vars = self.vars(c);
        let mut dups = 0;
        for i in 0..vars.len() {
            for j in (i + 1)..vars.len() {
                if vars[i] == vars[j] {
                    dups += 1;
                }
            }
        }
        let mut shared: Vec<(usize, usize)> = Vec::new();
        let mut distinct: Vec<usize> = vars.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        for &v in &distinct {
            let mut others: Vec<usize> = self.var_checks[v].iter().copied().filter(|&o| o != c).collect();
            others.sort_unstable();
            others.dedup();
            for o in others {
                match shared.iter_mut().find(|(x, _)| *x == o) {
                    Some(e) => e.1 += 1,
                    None => shared.push((o, 1)),
                }
            }
        }
        let cycles: usize = shared.iter().map(|&(_, k)| k * (k - 1) / 2).sum();
        1000 * dups + cycles
    }

    fn swap(&mut self, p: usize, q: usize) {
        let (vp, vq) = (self.sockets[p], self.sockets[q]);
        let (cp, cq) = (self.check_of(p), self.check_of(q));
        replace_one(&mut self.var_checks[vp], cp, cq);
        replace_one(&mut self.var_checks[vq], cq, cp);
        self.sockets.swap(p, q);
    }
}

fn replace_one(list: &mut [usize], from: usize, to: usize) {
    if let Some(x) = list.iter_mut().find(|x| **x == from) {
        *x = to;
    }
}

/// Random `(dv, dc)`-regular code by socket permutation, followed by swap
/// repair that removes every repeated edge and as many 4-cycles as it can
/// within a bounded number of attempts. Deterministic given `seed`.
pub fn construct_regular_ldpc(n: usize, dv: usize, dc: usize, seed: u64) -> Result<LdpcCode> {
    if n == 0 || dv == 0 || dc == 0 {
        return Err(invalid("code length and degrees must be positive"));
    }
    if (n * dv) % dc != 0 {
        return Err(invalid(format!("n * dv = {} is not divisible by dc = {dc}", n * dv)));
    }
    if dc > n {
        return Err(invalid(format!("check degree {dc} exceeds code length {n}")));
    }
    let m = n * dv / dc;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sockets: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, dv)).collect();
    sockets.shuffle(&mut rng);
    let mut var_checks = vec![Vec::with_capacity(dv); n];
    for (p, &v) in sockets.iter().enumerate() {
        var_checks[v].push(p / dc);
    }
    let mut st = Sockets {
        sockets,
        dc,
        var_checks,
    };

    let total = n * dv;
    let budget = 200 * total;
    let mut attempts = 0;
    'repair: loop {
        let bad: Vec<usize> = (0..m).filter(|&c| st.conflicts(c) > 0).collect();
        if bad.is_empty() {
            break;
        }
        let mut improved = false;
        for c in bad {
            if st.conflicts(c) == 0 {
                continue;
            }
            for k in 0..dc {
                if attempts >= budget {
                    break 'repair;
                }
                attempts += 1;
                let p = c * dc + k;
                let q = rng.random_range(0..total);
                let cq = st.check_of(q);
                if cq == c {
                    continue;
                }
                let before = st.conflicts(c) + st.conflicts(cq);
                st.swap(p, q);
                let after = st.conflicts(c) + st.conflicts(cq);
                if after < before {
                    improved = true;
                    if st.conflicts(c) == 0 {
                        break;
                    }
                } else {
                    st.swap(p, q);
                }
            }
        }
        if !improved && attempts >= budget {
            break;
        }
    }

    let rows: Vec<Vec<usize>> = (0..m).map(|c| st.vars(c).to_vec()).collect();
    let mut code = LdpcCode::from_check_rows(n, &rows).map_err(|_| {
        Error::Construction(format!(
            "could not remove repeated edges for n={n}, dv={dv}, dc={dc}"
        ))
    })?;
    code.seed = seed;
    code.var_degree = dv;
    code.check_degree = dc;
    Ok(code)
}

/// Systematic encoder from the reduced row-echelon form of the parity-check
/// matrix over GF(2). Information bits occupy the non-pivot columns.
#[derive(Debug, Clone)]
pub struct Encoder {
    n: usize,
    pivots: Vec<usize>,
    free: Vec<usize>,
    rows: Vec<Vec<u64>>,
}

fn bit(row: &[u64], j: usize) -> bool {
    row[j / 64] >> (j % 64) & 1 == 1
}

impl Encoder {
    fn new(code: &LdpcCode) -> Self {
        let n = code.n();
        let words = n.div_ceil(64);
        let mut rows: Vec<Vec<u64>> = (0..code.m())
            .map(|c| {
                let mut r = vec![0u64; words];
                for &v in code.check_vars(c) {
                    r[v / 64] ^= 1 << (v % 64);
                }
                r
            })
            .collect();
        let mut pivots = Vec::new();
        let mut r = 0;
        for col in 0..n {
            if r == rows.len() {
                break;
            }
            let Some(p) = (r..rows.len()).find(|&i| bit(&rows[i], col)) else {
                continue;
            };
            rows.swap(r, p);
            let pivot = rows[r].clone();
            for (i, row) in rows.iter_mut().enumerate() {
                if i != r && bit(row, col) {
                    row.iter_mut().zip(&pivot).for_each(|(a, b)| *a ^= b);
                }
            }
            pivots.push(col);
            r += 1;
        }
        rows.truncate(r);
        let free = (0..n).filter(|c| pivots.binary_search(c).is_err()).collect();
        Self {
            n,
            pivots,
            free,
            rows,
        }
    }

    /// Number of information bits.
    pub fn dimension(&self) -> usize {
        self.free.len()
    }

    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                got: info.len(),
            });
        }
        let mut cw = vec![0u8; self.n];
        for (&col, &b) in self.free.iter().zip(info) {
            cw[col] = b & 1;
        }
        for (row, &pc) in self.rows.iter().zip(&self.pivots) {
            let mut acc = 0u8;
            for &col in &self.free {
                if cw[col] == 1 && bit(row, col) {
                    acc ^= 1;
                }
            }
            cw[pc] = acc;
        }
        Ok(cw)
    }

    pub fn random_codeword<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u8> {
        let info: Vec<u8> = (0..self.dimension()).map(|_| rng.random::<u8>() & 1).collect();
        self.encode(&info).expect("length matches")
    }
}
