//! Mutual-information-maximizing lookup tables for two-input factor-graph
//! nodes.
//!
//! A node with input messages `l` (about code symbol `x1`) and `z` (about
//! `x2`) is reduced to a binary-input DMC from `x3` to the pair `(l, z)`,
//! which has `|L| * |Z|` outputs. Quantizing that channel optimally to `|V|`
//! levels yields the table `v = LUT(l, z)`.

use std::fmt::Write as _;

use crate::channel::parse_floats;
use crate::error::{check_dim, invalid, Error, Result};
use crate::ib::dp::{llr, llr_sorted_labels_keyed, symmetric_llr_labels};
use crate::info::{mutual_information, ConditionalDist, JointXY};

/// The relation a node enforces between its code symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeFunction {
    /// `x3 = x1 xor x2` (check node).
    CheckXor,
    /// `x3 = x1 = x2` (variable node).
    VariableEqual,
}

/// Conditional distribution `p(m|x)` of a message given the binary code
/// symbol it describes.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageDist {
    cond: ConditionalDist,
}

impl MessageDist {
    pub fn new(cond: ConditionalDist) -> Result<Self> {
        if cond.num_rows() != 2 {
            return Err(Error::NonBinary(cond.num_rows()));
        }
        Ok(Self { cond })
    }

    pub fn from_rows(given0: Vec<f64>, given1: Vec<f64>) -> Result<Self> {
        Self::new(ConditionalDist::new(vec![given0, given1])?)
    }

    pub fn size(&self) -> usize {
        self.cond.num_cols()
    }

    pub fn given(&self, x: usize) -> &[f64] {
        self.cond.row(x)
    }

    pub fn cond(&self) -> &ConditionalDist {
        &self.cond
    }

    /// Joint with a uniform code-symbol prior.
    pub fn joint(&self) -> JointXY {
        let data = self.cond.rows().flatten().map(|p| 0.5 * p).collect();
        JointXY::from_flat(2, self.size(), data)
    }

    /// `I(M;X)` under a uniform code-symbol prior.
    pub fn mutual_information(&self) -> f64 {
        mutual_information(&self.joint())
    }

    /// MAP hard decision per label. Labels with equal likelihoods decide 0
    /// in the lower half of the alphabet and 1 in the upper half.
    pub fn decisions(&self) -> Vec<u8> {
        let half = self.size() / 2;
        self.given(0)
            .iter()
            .zip(self.given(1))
            .enumerate()
            .map(|(m, (a, b))| u8::from(b > a || (b == a && m >= half && 2 * half == self.size())))
            .collect()
    }

    /// Error probability of a fixed per-label decision rule under a uniform
    /// code-symbol prior.
    pub fn error_prob_with(&self, bits: &[u8]) -> f64 {
        let wrong: f64 = bits
            .iter()
            .enumerate()
            .map(|(m, &b)| if b == 0 { self.given(1)[m] } else { self.given(0)[m] })
            .sum();
        0.5 * wrong
    }

    /// `true` when reversing the labels swaps the two conditionals exactly:
    /// `p(m|0) = p(M-1-m|1)`.
    pub fn is_symmetric(&self) -> bool {
        let (g0, g1) = (self.given(0), self.given(1));
        g0.iter().zip(g1.iter().rev()).all(|(a, b)| a == b)
    }

    /// The exactly symmetric version of a distribution that is symmetric up
    /// to `tol` (relative, with an absolute floor of `tol * 1e-6`), or `None`.
    pub fn symmetrized(&self, tol: f64) -> Option<Self> {
        let (g0, g1) = (self.given(0), self.given(1));
        let close = g0
            .iter()
            .zip(g1.iter().rev())
            .all(|(a, b)| (a - b).abs() <= tol * a.max(*b) + tol * 1e-6);
        close.then(|| symmetric_from(g0, g1))
    }

    /// MAP decision error under a uniform prior.
    pub fn error_prob(&self) -> f64 {
        0.5 * self
            .given(0)
            .iter()
            .zip(self.given(1))
            .map(|(a, b)| a.min(*b))
            .sum::<f64>()
    }
}

/// Averages `g0` with the reversed `g1` and mirrors the result.
fn symmetric_from(g0: &[f64], g1: &[f64]) -> MessageDist {
    let n = g0.len();
    let h0: Vec<f64> = (0..n).map(|m| 0.5 * (g0[m] + g1[n - 1 - m])).collect();
    let h1: Vec<f64> = h0.iter().rev().copied().collect();
    MessageDist {
        cond: ConditionalDist::from_flat(2, n, [h0, h1].concat()),
    }
}

/// `p((l, z) | x3)`, flattened row-major over `(l, z)`.
///
/// For the check node the satisfying pairs `(x1, x2)` are taken as equally
/// likely given `x3`.
pub fn node_joint(f: NodeFunction, a: &MessageDist, b: &MessageDist) -> ConditionalDist {
    let (nl, nz) = (a.size(), b.size());
    let mut data = Vec::with_capacity(2 * nl * nz);
    for x3 in 0..2 {
        for l in 0..nl {
            for z in 0..nz {
                let p = match f {
                    NodeFunction::VariableEqual => a.given(x3)[l] * b.given(x3)[z],
                    NodeFunction::CheckXor => {
                        0.5 * (a.given(0)[l] * b.given(x3)[z] + a.given(1)[l] * b.given(1 - x3)[z])
                    }
                };
                data.push(p);
            }
        }
    }
    ConditionalDist::from_flat(2, nl * nz, data)
}

/// A two-input lookup table with the output distribution it induces.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeLut {
    /// Output label for `(l, z)` at index `l * z_size + z`.
    pub table: Vec<u8>,
    pub l_size: usize,
    pub z_size: usize,
    pub out_cond: MessageDist,
    /// `I(V;X3)` in bits.
    pub relevant_info: f64,
}

impl NodeLut {
    pub fn out_size(&self) -> usize {
        self.out_cond.size()
    }

    #[inline]
    pub fn lookup(&self, l: u8, z: u8) -> u8 {
        self.table[l as usize * self.z_size + z as usize]
    }

    /// `lut <|L|> <|Z|> <|V|>`, then `|L|` rows of `|Z|` labels, then
    /// `p(v|0)` and `p(v|1)`.
    pub fn to_text(&self) -> String {
        let mut s = format!("lut {} {} {}\n", self.l_size, self.z_size, self.out_size());
        for row in self.table.chunks(self.z_size) {
            let labels: Vec<String> = row.iter().map(u8::to_string).collect();
            s.push_str(&labels.join(" "));
            s.push('\n');
        }
        for x in 0..2 {
            let probs: Vec<String> = self
                .out_cond
                .given(x)
                .iter()
                .map(|p| format!("{p:.17e}"))
                .collect();
            s.push_str(&probs.join(" "));
            s.push('\n');
        }
        s
    }

    /// Parses one table from a line iterator positioned at its header.
    pub(crate) fn parse<'a, I>(lines: &mut I) -> Result<Self>
    where
        I: Iterator<Item = (usize, &'a str)>,
    {
        let (ln, header) = next_line(lines)?;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 4 || f[0] != "lut" {
            return Err(parse_err(ln, "expected `lut <L> <Z> <V>`"));
        }
        let nums: Vec<usize> = f[1..]
            .iter()
            .map(|t| t.parse().map_err(|_| parse_err(ln, "bad table size")))
            .collect::<Result<_>>()?;
        let (nl, nz, nv) = (nums[0], nums[1], nums[2]);
        if nv == 0 || nv > 256 {
            return Err(parse_err(ln, "output size must lie in 1..=256"));
        }
        let mut table = Vec::with_capacity(nl * nz);
        for _ in 0..nl {
            let (ln, l) = next_line(lines)?;
            let row: Vec<u8> = l
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| parse_err(ln, "bad label")))
                .collect::<Result<_>>()?;
            if row.len() != nz || row.iter().any(|&v| v as usize >= nv) {
                return Err(parse_err(ln, "table row has wrong length or label range"));
            }
            table.extend(row);
        }
        let mut rows = Vec::with_capacity(2);
        for _ in 0..2 {
            let (ln, l) = next_line(lines)?;
            let r = parse_floats(l).map_err(|m| parse_err(ln, &m))?;
            if r.len() != nv {
                return Err(parse_err(ln, "output distribution has wrong length"));
            }
            rows.push(r);
        }
        let g1 = rows.pop().unwrap();
        let g0 = rows.pop().unwrap();
        let out_cond = MessageDist::from_rows(g0, g1)?;
        Ok(Self {
            relevant_info: out_cond.mutual_information(),
            table,
            l_size: nl,
            z_size: nz,
            out_cond,
        })
    }
}

pub(crate) fn parse_err(line: usize, msg: &str) -> Error {
    Error::Parse {
        line,
        msg: msg.to_string(),
    }
}

pub(crate) fn next_line<'a, I>(lines: &mut I) -> Result<(usize, &'a str)>
where
    I: Iterator<Item = (usize, &'a str)>,
{
    lines
        .find(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(n, l)| (n, l.trim()))
        .ok_or(parse_err(0, "unexpected end of input"))
}

/// Distribution of the output labels. Rows are renormalized so rounding
/// does not compound through long cascades.
pub(crate) fn output_dist(cond: &ConditionalDist, labels: &[usize], out_size: usize) -> MessageDist {
    let mut rows = vec![vec![0.0; out_size]; 2];
    for (x, row) in rows.iter_mut().enumerate() {
        for (o, &v) in labels.iter().enumerate() {
            row[v] += cond.get(x, o);
        }
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|p| *p /= total);
        }
    }
    let data = rows.into_iter().flatten().collect();
    MessageDist {
        cond: ConditionalDist::from_flat(2, out_size, data),
    }
}

/// `ln p(m|0) / p(m|1)` for every label (0 for labels with no mass).
fn label_llrs(m: &MessageDist) -> Vec<f64> {
    m.given(0).iter().zip(m.given(1)).map(|(&a, &b)| llr(a, b)).collect()
}

/// Check-node combination of two LLRs, exact for finite inputs and taking
/// the limit when either is infinite. Negating one argument negates the
/// result bit for bit.
fn boxplus_limit(a: f64, b: f64) -> f64 {
    let m = a.abs().min(b.abs());
    let s = if (a < 0.0) != (b < 0.0) { -m } else { m };
    if a.is_infinite() || b.is_infinite() {
        return s;
    }
    let (c1, c2) = ((-(a + b).abs()).exp().ln_1p(), (-(a - b).abs()).exp().ln_1p());
    let corr = if s < 0.0 { -(c2 - c1) } else { c1 - c2 };
    s + corr
}

/// Outcome `(l, z)` that plays the role of `(l, z)` with `x3` flipped when
/// both inputs are symmetric.
fn node_mirror(f: NodeFunction, nl: usize, nz: usize) -> Vec<usize> {
    let mut m = Vec::with_capacity(nl * nz);
    for l in 0..nl {
        for z in 0..nz {
            let (ml, mz) = match f {
                NodeFunction::VariableEqual => (nl - 1 - l, nz - 1 - z),
                NodeFunction::CheckXor => (nl - 1 - l, z),
            };
            m.push(ml * nz + mz);
        }
    }
    m
}

/// LLR of `x3` for every `(l, z)`, derived from the input label LLRs rather
/// than from the (possibly underflowed) joint probabilities.
fn node_keys(f: NodeFunction, a: &MessageDist, b: &MessageDist) -> Vec<f64> {
    let (la, lb) = (label_llrs(a), label_llrs(b));
    la.iter()
        .flat_map(|&x| {
            lb.iter().map(move |&y| match f {
                NodeFunction::VariableEqual => x + y,
                NodeFunction::CheckXor => boxplus_limit(x, y),
            })
        })
        .collect()
}

/// Optimal LUT for node `f` with inputs `a`, `b` and `out_size` output
/// labels. Labels are ordered by descending LLR of `x3`.
pub fn build_max_lut(
    f: NodeFunction,
    a: &MessageDist,
    b: &MessageDist,
    out_size: usize,
) -> Result<NodeLut> {
    if out_size == 0 || out_size > 256 {
        return Err(invalid(format!("LUT output size must lie in 1..=256, got {out_size}")));
    }
    let cond = node_joint(f, a, b);
    let joint = MessageDist { cond: cond.clone() }.joint();
    let keys = node_keys(f, a, b);
    let symmetric = out_size % 2 == 0 && a.is_symmetric() && b.is_symmetric();
    let labels = if symmetric {
        symmetric_llr_labels(&joint, out_size, &keys, &node_mirror(f, a.size(), b.size()))?
    } else {
        llr_sorted_labels_keyed(&joint, out_size, Some(&keys))?
    };
    let mut out_cond = output_dist(&cond, &labels, out_size);
    if symmetric {
        out_cond = symmetric_from(out_cond.given(0), out_cond.given(1));
    }
    Ok(NodeLut {
        table: labels.iter().map(|&v| v as u8).collect(),
        l_size: a.size(),
        z_size: b.size(),
        relevant_info: out_cond.mutual_information(),
        out_cond,
    })
}

/// Optimal requantization of one message to `out_size` labels, with the
/// induced output distribution. Symmetric inputs give symmetric tables.
pub fn requantize(m: &MessageDist, out_size: usize) -> Result<(Vec<usize>, MessageDist)> {
    let joint = m.joint();
    let keys = label_llrs(m);
    if out_size % 2 == 0 && m.is_symmetric() {
        let mirror: Vec<usize> = (0..m.size()).rev().collect();
        let labels = symmetric_llr_labels(&joint, out_size, &keys, &mirror)?;
        let out = output_dist(m.cond(), &labels, out_size);
        Ok((labels, symmetric_from(out.given(0), out.given(1))))
    } else {
        let labels = llr_sorted_labels_keyed(&joint, out_size, Some(&keys))?;
        let out = output_dist(m.cond(), &labels, out_size);
        Ok((labels, out))
    }
}

/// Order in which a multi-input node is decomposed into two-input stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    /// `((in0 . in1) . in2) . ...`
    LeftFold,
    /// Pairwise tree; an odd operand is carried to the next level.
    BalancedTree,
}

impl Schedule {
    pub fn tag(&self) -> &'static str {
        match self {
            Schedule::LeftFold => "left-fold",
            Schedule::BalancedTree => "balanced-tree",
        }
    }

    pub(crate) fn from_tag(s: &str) -> Option<Self> {
        match s {
            "left-fold" => Some(Schedule::LeftFold),
            "balanced-tree" => Some(Schedule::BalancedTree),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operand {
    Input(usize),
    Stage(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub left: Operand,
    pub right: Operand,
    pub lut: NodeLut,
}

/// A multi-input node realized as a chain of two-input LUT stages.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeCascade {
    pub node: NodeFunction,
    pub schedule: Schedule,
    pub num_inputs: usize,
    /// Stages in evaluation order; the last one produces the output.
    pub stages: Vec<Stage>,
    /// Single-input requantization table, present only when `num_inputs == 1`.
    pub requant: Option<Vec<u8>>,
    pub output: MessageDist,
}

impl NodeCascade {
    /// Output distribution of the fixed tables when fed independent inputs
    /// with the given distributions.
    pub fn propagate(&self, inputs: &[MessageDist]) -> Result<MessageDist> {
        check_dim(self.num_inputs, inputs.len())?;
        if let Some(t) = &self.requant {
            check_dim(t.len(), inputs[0].size())?;
            let labels: Vec<usize> = t.iter().map(|&v| v as usize).collect();
            return Ok(output_dist(inputs[0].cond(), &labels, self.output.size()));
        }
        let mut outs: Vec<MessageDist> = Vec::with_capacity(self.stages.len());
        for st in &self.stages {
            let get = |o: Operand| match o {
                Operand::Input(i) => &inputs[i],
                Operand::Stage(i) => &outs[i],
            };
            let (a, b) = (get(st.left), get(st.right));
            check_dim(st.lut.l_size * st.lut.z_size, a.size() * b.size())?;
            let labels: Vec<usize> = st.lut.table.iter().map(|&v| v as usize).collect();
            let out = output_dist(&node_joint(self.node, a, b), &labels, st.lut.out_size());
            outs.push(out);
        }
        Ok(outs.pop().unwrap())
    }

    /// Output label for the given input labels. Integer lookups only.
    pub fn evaluate(&self, inputs: &[u8]) -> u8 {
        debug_assert_eq!(inputs.len(), self.num_inputs);
        if let Some(t) = &self.requant {
            return t[inputs[0] as usize];
        }
        let mut vals = [0u8; 32];
        for (k, s) in self.stages.iter().enumerate() {
            let get = |o: Operand| match o {
                Operand::Input(i) => inputs[i],
                Operand::Stage(i) => vals[i],
            };
            vals[k] = s.lut.lookup(get(s.left), get(s.right));
        }
        vals[self.stages.len() - 1]
    }
}

/// Decomposes an `inputs.len()`-input node into two-input max-LUT stages,
/// each with `out_size` output labels.
pub fn cascade_node(
    f: NodeFunction,
    inputs: &[MessageDist],
    out_size: usize,
    schedule: Schedule,
) -> Result<NodeCascade> {
    if inputs.is_empty() {
        return Err(invalid("cascade needs at least one input"));
    }
    if out_size < 2 || out_size > 256 {
        return Err(invalid(format!("cascade output size must lie in 2..=256, got {out_size}")));
    }
    if inputs.len() == 1 {
        let (labels, output) = requantize(&inputs[0], out_size)?;
        return Ok(NodeCascade {
            node: f,
            schedule,
            num_inputs: 1,
            stages: Vec::new(),
            output,
            requant: Some(labels.into_iter().map(|v| v as u8).collect()),
        });
    }
    if inputs.len() > 32 {
        return Err(invalid("cascade supports at most 32 inputs"));
    }
    let mut stages: Vec<Stage> = Vec::new();
    let dist = |o: Operand, stages: &[Stage]| match o {
        Operand::Input(i) => inputs[i].clone(),
        Operand::Stage(i) => stages[i].lut.out_cond.clone(),
    };
    let push = |l: Operand, r: Operand, stages: &mut Vec<Stage>| -> Result<Operand> {
        let lut = build_max_lut(f, &dist(l, stages), &dist(r, stages), out_size)?;
        stages.push(Stage {
            left: l,
            right: r,
            lut,
        });
        Ok(Operand::Stage(stages.len() - 1))
    };
    match schedule {
        Schedule::LeftFold => {
            let mut acc = Operand::Input(0);
            for i in 1..inputs.len() {
                acc = push(acc, Operand::Input(i), &mut stages)?;
            }
        }
        Schedule::BalancedTree => {
            let mut level: Vec<Operand> = (0..inputs.len()).map(Operand::Input).collect();
            while level.len() > 1 {
                let mut next = Vec::with_capacity(level.len().div_ceil(2));
                for pair in level.chunks(2) {
                    match pair {
                        [l, r] => next.push(push(*l, *r, &mut stages)?),
                        [odd] => next.push(*odd),
                        _ => unreachable!(),
                    }
                }
                level = next;
            }
        }
    }
    let output = stages.last().unwrap().lut.out_cond.clone();
    Ok(NodeCascade {
        node: f,
        schedule,
        num_inputs: inputs.len(),
        stages,
        requant: None,
        output,
    })
}

impl NodeCascade {
    pub(crate) fn write_text(&self, s: &mut String) {
        let node = match self.node {
            NodeFunction::CheckXor => "check",
            NodeFunction::VariableEqual => "var",
        };
        writeln!(
            s,
            "cascade {node} {} {} {}",
            self.schedule.tag(),
            self.num_inputs,
            self.stages.len()
        )
        .unwrap();
        if let Some(t) = &self.requant {
            writeln!(s, "requant {} {}", t.len(), self.output.size()).unwrap();
            let labels: Vec<String> = t.iter().map(u8::to_string).collect();
            s.push_str(&labels.join(" "));
            s.push('\n');
            for x in 0..2 {
                let probs: Vec<String> =
                    self.output.given(x).iter().map(|p| format!("{p:.17e}")).collect();
                s.push_str(&probs.join(" "));
                s.push('\n');
            }
        }
        let op = |o: Operand| match o {
            Operand::Input(i) => format!("i{i}"),
            Operand::Stage(i) => format!("s{i}"),
        };
        for st in &self.stages {
            writeln!(s, "stage {} {}", op(st.left), op(st.right)).unwrap();
            s.push_str(&st.lut.to_text());
        }
    }

    pub(crate) fn parse<'a, I>(lines: &mut I) -> Result<Self>
    where
        I: Iterator<Item = (usize, &'a str)>,
    {
        let (ln, header) = next_line(lines)?;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 5 || f[0] != "cascade" {
            return Err(parse_err(ln, "expected `cascade <node> <schedule> <inputs> <stages>`"));
        }
        let node = match f[1] {
            "check" => NodeFunction::CheckXor,
            "var" => NodeFunction::VariableEqual,
            _ => return Err(parse_err(ln, "unknown node type")),
        };
        let schedule = Schedule::from_tag(f[2]).ok_or(parse_err(ln, "unknown schedule"))?;
        let num_inputs: usize = f[3].parse().map_err(|_| parse_err(ln, "bad input count"))?;
        let num_stages: usize = f[4].parse().map_err(|_| parse_err(ln, "bad stage count"))?;
        if num_inputs == 0 || num_inputs > 32 || num_inputs > 1 && num_stages != num_inputs - 1 {
            return Err(parse_err(ln, "inconsistent cascade shape"));
        }
        if num_inputs == 1 {
            let (ln, h) = next_line(lines)?;
            let hf: Vec<&str> = h.split_whitespace().collect();
            let sizes: Vec<usize> = hf
                .iter()
                .skip(1)
                .map(|t| t.parse().map_err(|_| parse_err(ln, "bad requant size")))
                .collect::<Result<_>>()?;
            if hf.first() != Some(&"requant") || sizes.len() != 2 {
                return Err(parse_err(ln, "expected `requant <in> <out>`"));
            }
            let (ln, l) = next_line(lines)?;
            let t: Vec<u8> = l
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| parse_err(ln, "bad label")))
                .collect::<Result<_>>()?;
            if t.len() != sizes[0] || t.iter().any(|&v| v as usize >= sizes[1]) {
                return Err(parse_err(ln, "requant table malformed"));
            }
            let (l0, g0) = next_line(lines)?;
            let (l1, g1) = next_line(lines)?;
            let output = MessageDist::from_rows(
                parse_floats(g0).map_err(|m| parse_err(l0, &m))?,
                parse_floats(g1).map_err(|m| parse_err(l1, &m))?,
            )?;
            return Ok(Self {
                node,
                schedule,
                num_inputs,
                stages: Vec::new(),
                requant: Some(t),
                output,
            });
        }
        let mut stages: Vec<Stage> = Vec::with_capacity(num_stages);
        for k in 0..num_stages {
            let (ln, l) = next_line(lines)?;
            let sf: Vec<&str> = l.split_whitespace().collect();
            if sf.len() != 3 || sf[0] != "stage" {
                return Err(parse_err(ln, "expected `stage <op> <op>`"));
            }
            let op = |t: &str| -> Result<Operand> {
                let (kind, idx) = t.split_at(1);
                let i: usize = idx.parse().map_err(|_| parse_err(ln, "bad operand"))?;
                match kind {
                    "i" if i < num_inputs => Ok(Operand::Input(i)),
                    "s" if i < k => Ok(Operand::Stage(i)),
                    _ => Err(parse_err(ln, "operand out of range")),
                }
            };
            let (left, right) = (op(sf[1])?, op(sf[2])?);
            let lut = NodeLut::parse(lines)?;
            let size_of = |o: Operand| match o {
                Operand::Input(_) => None,
                Operand::Stage(i) => Some(stages[i].lut.out_size()),
            };
            for (o, have) in [(left, lut.l_size), (right, lut.z_size)] {
                if let Some(expected) = size_of(o) {
                    check_dim(expected, have)?;
                }
            }
            stages.push(Stage { left, right, lut });
        }
        let output = stages.last().unwrap().lut.out_cond.clone();
        Ok(Self {
            node,
            schedule,
            num_inputs,
            stages,
            requant: None,
            output,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bsc_msg(e: f64) -> MessageDist {
        MessageDist::from_rows(vec![1.0 - e, e], vec![e, 1.0 - e]).unwrap()
    }

    fn asym_msg() -> MessageDist {
        MessageDist::from_rows(vec![0.6, 0.3, 0.1], vec![0.15, 0.25, 0.6]).unwrap()
    }

    #[test]
    fn noiseless_equality_node() {
        let j = node_joint(NodeFunction::VariableEqual, &bsc_msg(0.0), &bsc_msg(0.0));
        assert_eq!(j.row(0), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(j.row(1), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn xor_hard_decision_error() {
        for (e1, e2) in [(0.1, 0.2), (0.05, 0.3), (0.0, 0.25)] {
            let j = node_joint(NodeFunction::CheckXor, &bsc_msg(e1), &bsc_msg(e2));
            // hard decision l xor z disagrees with x3 when exactly one input errs
            let err0 = j.get(0, 1) + j.get(0, 2);
            let err1 = j.get(1, 0) + j.get(1, 3);
            let expected = e1 + e2 - 2.0 * e1 * e2;
            assert!((err0 - expected).abs() < 1e-15);
            assert!((err1 - expected).abs() < 1e-15);
            for x in 0..2 {
                assert!((j.row(x).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn xor_with_perfect_input_is_relabeling() {
        let a = asym_msg();
        let j = node_joint(NodeFunction::CheckXor, &bsc_msg(0.0), &a);
        // l = 0 means x1 = 0, so z describes x3 directly
        for z in 0..3 {
            assert!((j.get(0, z) - 0.5 * a.given(0)[z]).abs() < 1e-15);
            assert!((j.get(0, 3 + z) - 0.5 * a.given(1)[z]).abs() < 1e-15);
        }
    }

    #[test]
    fn lut_limits() {
        let a = asym_msg();
        let b = bsc_msg(0.2);
        for f in [NodeFunction::CheckXor, NodeFunction::VariableEqual] {
            let full = build_max_lut(f, &a, &b, 6).unwrap();
            let cond = node_joint(f, &a, &b);
            let all = MessageDist { cond }.mutual_information();
            assert!((full.relevant_info - all).abs() < 1e-12);
            let one = build_max_lut(f, &a, &b, 1).unwrap();
            assert!(one.table.iter().all(|&v| v == 0));
            assert!(one.relevant_info.abs() < 1e-15);
        }
        assert!(build_max_lut(NodeFunction::CheckXor, &a, &b, 0).is_err());
    }

    #[test]
    fn lut_text_round_trip() {
        let lut = build_max_lut(NodeFunction::VariableEqual, &asym_msg(), &asym_msg(), 4).unwrap();
        let text = lut.to_text();
        assert!(text.starts_with("lut 3 3 4\n"));
        let mut lines = text.lines().enumerate();
        let back = NodeLut::parse(&mut lines).unwrap();
        assert_eq!(back.table, lut.table);
        assert_eq!(back.out_cond, lut.out_cond);
    }

    #[test]
    fn xor_cascade_error_accumulates() {
        let e: f64 = 0.07;
        let inputs = vec![bsc_msg(e); 5];
        for sched in [Schedule::LeftFold, Schedule::BalancedTree] {
            let c = cascade_node(NodeFunction::CheckXor, &inputs, 2, sched).unwrap();
            assert_eq!(c.stages.len(), 4);
            let expected = (1.0 - (1.0 - 2.0 * e).powi(5)) / 2.0;
            assert!((c.output.error_prob() - expected).abs() < 1e-12);
            // brute force over all 2^5 error patterns
            let mut brute = 0.0;
            for pat in 0u32..32 {
                let k = pat.count_ones() as i32;
                if k % 2 == 1 {
                    brute += e.powi(k) * (1.0 - e).powi(5 - k);
                }
            }
            assert!((brute - expected).abs() < 1e-15);
            // evaluation agrees with hard xor on all input patterns
            for pat in 0u8..32 {
                let ins: Vec<u8> = (0..5).map(|i| (pat >> i) & 1).collect();
                let x = ins.iter().fold(0, |a, b| a ^ b);
                assert_eq!(c.output.decisions()[c.evaluate(&ins) as usize], x);
            }
        }
    }

    #[test]
    fn single_input_cascade_requantizes() {
        let c = cascade_node(NodeFunction::VariableEqual, &[asym_msg()], 4, Schedule::LeftFold)
            .unwrap();
        assert!(c.stages.is_empty());
        assert_eq!(c.requant.as_ref().unwrap().len(), 3);
        assert!((c.output.mutual_information() - asym_msg().mutual_information()).abs() < 1e-12);
        assert!(cascade_node(NodeFunction::CheckXor, &[], 4, Schedule::LeftFold).is_err());
    }

    #[test]
    fn cascade_text_round_trip() {
        let ins = vec![asym_msg(), bsc_msg(0.1), asym_msg()];
        for sched in [Schedule::LeftFold, Schedule::BalancedTree] {
            let c = cascade_node(NodeFunction::CheckXor, &ins, 4, sched).unwrap();
            let mut s = String::new();
            c.write_text(&mut s);
            let back = NodeCascade::parse(&mut s.lines().enumerate()).unwrap();
            assert_eq!(back.stages.len(), c.stages.len());
            for (a, b) in back.stages.iter().zip(&c.stages) {
                assert_eq!(a.left, b.left);
                assert_eq!(a.right, b.right);
                assert_eq!(a.lut.table, b.lut.table);
            }
        }
        let c = cascade_node(NodeFunction::VariableEqual, &[asym_msg()], 2, Schedule::LeftFold)
            .unwrap();
        let mut s = String::new();
        c.write_text(&mut s);
        let back = NodeCascade::parse(&mut s.lines().enumerate()).unwrap();
        assert_eq!(back.requant, c.requant);
    }

    #[test]
    fn propagate_reproduces_design_output() {
        let ins = vec![asym_msg(), bsc_msg(0.1), asym_msg(), bsc_msg(0.2)];
        for (f, sched) in [
            (NodeFunction::CheckXor, Schedule::BalancedTree),
            (NodeFunction::VariableEqual, Schedule::LeftFold),
        ] {
            let c = cascade_node(f, &ins, 4, sched).unwrap();
            let out = c.propagate(&ins).unwrap();
            for x in 0..2 {
                for (a, b) in out.given(x).iter().zip(c.output.given(x)) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
            let bits = c.output.decisions();
            assert!((out.error_prob_with(&bits) - c.output.error_prob()).abs() < 1e-12);
            // cleaner inputs through the same tables cannot hurt an xor chain
            if f == NodeFunction::CheckXor {
                let perfect3 =
                    MessageDist::from_rows(vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]).unwrap();
                let clean = vec![perfect3.clone(), bsc_msg(0.0), perfect3, bsc_msg(0.0)];
                let e = c.propagate(&clean).unwrap().error_prob_with(&bits);
                assert!(e < c.output.error_prob());
            }
            assert!(c.propagate(&ins[..3]).is_err());
        }
        let r = cascade_node(NodeFunction::VariableEqual, &[asym_msg()], 2, Schedule::LeftFold)
            .unwrap();
        let out = r.propagate(&[asym_msg()]).unwrap();
        assert!((out.mutual_information() - r.output.mutual_information()).abs() < 1e-12);
    }

    #[test]
    fn non_binary_messages_rejected() {
        let c = ConditionalDist::new(vec![vec![1.0], vec![1.0], vec![1.0]]).unwrap();
        assert!(matches!(MessageDist::new(c), Err(Error::NonBinary(3))));
    }
}
