use std::fmt::Write as _;

use crate::channel::{parse_floats, AwgnDiscretization, DmcSpec};
use crate::error::{invalid, Error, Result};
use crate::maxlut::{cascade_node, next_line, parse_err, requantize, MessageDist, NodeCascade, NodeFunction, Schedule};

/// Hard-decision rule: the cascade combines the channel message with every
/// incoming check message, `bits` maps its output label to a bit.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRule {
    pub cascade: NodeCascade,
    pub bits: Vec<u8>,
}

/// Per-iteration lookup tables of a discrete message-passing decoder for a
/// `(dv, dc)`-regular ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct LdpcEnsembleDesign {
    pub message_bits: usize,
    pub dv: usize,
    pub dc: usize,
    /// Channel output bin to channel message label.
    pub channel_table: Vec<u8>,
    pub channel_dist: MessageDist,
    /// Discretization of the design channel, when it came from one.
    pub discretization: Option<AwgnDiscretization>,
    /// `check_luts[t]` maps `dc - 1` variable messages to a check message.
    pub check_luts: Vec<NodeCascade>,
    /// `var_luts[t]` maps the channel message and `dv - 1` check messages to
    /// a variable message.
    pub var_luts: Vec<NodeCascade>,
    pub decision_luts: Vec<DecisionRule>,
    /// Bit error probability of the decision rule after each iteration.
    pub error_prob_trace: Vec<f64>,
}

impl LdpcEnsembleDesign {
    pub fn levels(&self) -> usize {
        1 << self.message_bits
    }

    pub fn max_iter(&self) -> usize {
        self.check_luts.len()
    }

    /// Tables for iteration `t` (0-based); iterations past the design reuse
    /// the last one.
    pub fn iteration(&self, t: usize) -> (&NodeCascade, &NodeCascade, &DecisionRule) {
        let t = t.min(self.max_iter() - 1);
        (&self.check_luts[t], &self.var_luts[t], &self.decision_luts[t])
    }

    /// Hard decision of each channel message label.
    pub fn channel_decisions(&self) -> Vec<u8> {
        self.channel_dist.decisions()
    }
}

/// Decision error below which density evolution stops building new tables.
/// Tables designed for nearly error-free messages are overconfident on short
/// codes, where cycles keep the messages far from that ideal.
pub const REFINE_FLOOR: f64 = 1e-4;

/// Relative tolerance for treating the channel as output-symmetric.
const SYMMETRY_TOL: f64 = 1e-9;

/// Discrete density evolution for a `(dv, dc)`-regular ensemble under the
/// all-zero codeword convention.
///
/// The channel is quantized optimally to `2^message_bits` labels. Each
/// iteration builds the check tables (balanced tree over `dc - 1` copies of
/// the variable message), the variable tables (channel message first, then
/// `dv - 1` check messages) and the decision tables (channel message and `dv`
/// check messages), and propagates message distributions through them.
/// Once the decision error falls below [`REFINE_FLOOR`] the remaining
/// iterations reuse the last tables, and the trace keeps following the
/// message distributions through them.
pub fn design_decoder(
    dmc: &DmcSpec,
    dv: usize,
    dc: usize,
    message_bits: usize,
    max_iter: usize,
) -> Result<LdpcEnsembleDesign> {
    if dmc.num_inputs() != 2 {
        return Err(Error::NonBinary(dmc.num_inputs()));
    }
    if !(1..=8).contains(&message_bits) {
        return Err(invalid(format!("message bits must lie in 1..=8, got {message_bits}")));
    }
    if max_iter == 0 {
        return Err(invalid("design needs at least one iteration"));
    }
    if dv == 0 || dc < 2 || dv + 1 > 32 || dc > 32 {
        return Err(invalid(format!("unsupported degrees dv={dv}, dc={dc}")));
    }
    let levels = 1usize << message_bits;
    let raw = MessageDist::new(dmc.transition.clone())?;
    let channel = raw.symmetrized(SYMMETRY_TOL).unwrap_or(raw);
    let (labels, channel_dist) = requantize(&channel, levels)?;

    let mut v2c = channel_dist.clone();
    let mut check_luts: Vec<NodeCascade> = Vec::with_capacity(max_iter);
    let mut var_luts: Vec<NodeCascade> = Vec::with_capacity(max_iter);
    let mut decision_luts: Vec<DecisionRule> = Vec::with_capacity(max_iter);
    let mut trace = Vec::with_capacity(max_iter);
    let mut frozen = false;
    for _ in 0..max_iter {
        if frozen {
            // keep tracking the distributions through the last tables
            let (check, var, decide) = (
                check_luts.last().unwrap().clone(),
                var_luts.last().unwrap().clone(),
                decision_luts.last().unwrap().clone(),
            );
            let c2v = check.propagate(&vec![v2c.clone(); dc - 1])?;
            let mut inputs = vec![channel_dist.clone()];
            inputs.extend(std::iter::repeat_n(c2v, dv));
            let err = decide.cascade.propagate(&inputs)?.error_prob_with(&decide.bits);
            inputs.pop();
            v2c = var.propagate(&inputs)?;
            trace.push(err.clamp(0.0, 0.5));
            check_luts.push(check);
            var_luts.push(var);
            decision_luts.push(decide);
            continue;
        }
        let check = cascade_node(
            NodeFunction::CheckXor,
            &vec![v2c.clone(); dc - 1],
            levels,
            Schedule::BalancedTree,
        )?;
        let c2v = check.output.clone();
        let mut inputs = vec![channel_dist.clone()];
        inputs.extend(std::iter::repeat_n(c2v, dv));
        let decide = cascade_node(NodeFunction::VariableEqual, &inputs, levels, Schedule::LeftFold)?;
        inputs.pop();
        let var = cascade_node(NodeFunction::VariableEqual, &inputs, levels, Schedule::LeftFold)?;
        let err = decide.output.error_prob().clamp(0.0, 0.5);
        trace.push(err);
        v2c = var.output.clone();
        decision_luts.push(DecisionRule {
            bits: decide.output.decisions(),
            cascade: decide,
        });
        check_luts.push(check);
        var_luts.push(var);
        frozen = err < REFINE_FLOOR;
    }
    Ok(LdpcEnsembleDesign {
        message_bits,
        dv,
        dc,
        channel_table: labels.iter().map(|&l| l as u8).collect(),
        channel_dist,
        discretization: dmc.discretization.clone(),
        check_luts,
        var_luts,
        decision_luts,
        error_prob_trace: trace,
    })
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

fn float_row(v: &[f64]) -> String {
    v.iter().map(|p| format!("{p:.17e}")).collect::<Vec<_>>().join(" ")
}

impl LdpcEnsembleDesign {
    /// Plain-text bundle: a `design <bits> <max_iter> <dv> <dc>` header, the
    /// channel block, the error trace, then for every iteration its check,
    /// variable and decision cascades.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "design {} {} {} {}",
            self.message_bits,
            self.max_iter(),
            self.dv,
            self.dc
        )
        .unwrap();
        match &self.discretization {
            Some(d) => writeln!(
                s,
                "awgn {:.17e} {:.17e} {} {:.17e}",
                d.noise_std, d.clip_multiplier, d.num_bins, d.max_amplitude
            )
            .unwrap(),
            None => s.push_str("awgn none\n"),
        }
        writeln!(s, "channel {}", self.channel_table.len()).unwrap();
        writeln!(s, "{}", join(&self.channel_table)).unwrap();
        writeln!(s, "{}", float_row(self.channel_dist.given(0))).unwrap();
        writeln!(s, "{}", float_row(self.channel_dist.given(1))).unwrap();
        writeln!(s, "trace {}", float_row(&self.error_prob_trace)).unwrap();
        for t in 0..self.max_iter() {
            writeln!(s, "iteration {t}").unwrap();
            self.check_luts[t].write_text(&mut s);
            self.var_luts[t].write_text(&mut s);
            writeln!(s, "decide {}", join(&self.decision_luts[t].bits)).unwrap();
            self.decision_luts[t].cascade.write_text(&mut s);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (ln, h) = next_line(&mut lines)?;
        let f: Vec<&str> = h.split_whitespace().collect();
        if f.len() != 5 || f[0] != "design" {
            return Err(parse_err(ln, "expected `design <bits> <max_iter> <dv> <dc>`"));
        }
        let nums: Vec<usize> = f[1..]
            .iter()
            .map(|t| t.parse().map_err(|_| parse_err(ln, "bad header number")))
            .collect::<Result<_>>()?;
        let (message_bits, max_iter, dv, dc) = (nums[0], nums[1], nums[2], nums[3]);
        if !(1..=8).contains(&message_bits) || max_iter == 0 || dv == 0 || dc < 2 {
            return Err(parse_err(ln, "header values out of range"));
        }
        let levels = 1usize << message_bits;

        let (ln, l) = next_line(&mut lines)?;
        let af: Vec<&str> = l.split_whitespace().collect();
        let discretization = match af.as_slice() {
            ["awgn", "none"] => None,
            ["awgn", sigma, clip, bins, amp] => {
                let num = |t: &str| t.parse::<f64>().map_err(|_| parse_err(ln, "bad number"));
                Some(AwgnDiscretization {
                    noise_std: num(sigma)?,
                    clip_multiplier: num(clip)?,
                    num_bins: bins.parse().map_err(|_| parse_err(ln, "bad bin count"))?,
                    max_amplitude: num(amp)?,
                })
            }
            _ => return Err(parse_err(ln, "expected `awgn ...`")),
        };

        let (ln, l) = next_line(&mut lines)?;
        let bins: usize = l
            .strip_prefix("channel ")
            .and_then(|t| t.trim().parse().ok())
            .ok_or(parse_err(ln, "expected `channel <bins>`"))?;
        let (ln, l) = next_line(&mut lines)?;
        let channel_table: Vec<u8> = l
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err(ln, "bad label")))
            .collect::<Result<_>>()?;
        if channel_table.len() != bins || channel_table.iter().any(|&v| v as usize >= levels) {
            return Err(parse_err(ln, "channel table malformed"));
        }
        if discretization.as_ref().is_some_and(|d| d.num_bins != bins) {
            return Err(parse_err(ln, "channel table disagrees with the discretization"));
        }
        let mut rows = Vec::new();
        for _ in 0..2 {
            let (ln, l) = next_line(&mut lines)?;
            let r = parse_floats(l).map_err(|m| parse_err(ln, &m))?;
            if r.len() != levels {
                return Err(parse_err(ln, "channel distribution has wrong length"));
            }
            rows.push(r);
        }
        let g1 = rows.pop().unwrap();
        let channel_dist = MessageDist::from_rows(rows.pop().unwrap(), g1)?;

        let (ln, l) = next_line(&mut lines)?;
        let trace = l
            .strip_prefix("trace")
            .ok_or(parse_err(ln, "expected `trace ...`"))
            .and_then(|t| parse_floats(t).map_err(|m| parse_err(ln, &m)))?;
        if trace.len() != max_iter {
            return Err(parse_err(ln, "trace length disagrees with the header"));
        }

        let mut check_luts = Vec::with_capacity(max_iter);
        let mut var_luts = Vec::with_capacity(max_iter);
        let mut decision_luts = Vec::with_capacity(max_iter);
        for t in 0..max_iter {
            let (ln, l) = next_line(&mut lines)?;
            if l != format!("iteration {t}") {
                return Err(parse_err(ln, "expected iteration marker"));
            }
            let check = NodeCascade::parse(&mut lines)?;
            let var = NodeCascade::parse(&mut lines)?;
            let (ln, l) = next_line(&mut lines)?;
            let bits: Vec<u8> = l
                .strip_prefix("decide")
                .ok_or(parse_err(ln, "expected `decide ...`"))?
                .split_whitespace()
                .map(|t| match t {
                    "0" => Ok(0),
                    "1" => Ok(1),
                    _ => Err(parse_err(ln, "decision bits must be 0 or 1")),
                })
                .collect::<Result<_>>()?;
            let cascade = NodeCascade::parse(&mut lines)?;
            let shape_ok = check.num_inputs == dc - 1
                && var.num_inputs == dv
                && cascade.num_inputs == dv + 1
                && [&check, &var, &cascade].iter().all(|c| c.output.size() == levels)
                && bits.len() == levels;
            if !shape_ok {
                return Err(parse_err(ln, "iteration tables disagree with the header"));
            }
            check_luts.push(check);
            var_luts.push(var);
            decision_luts.push(DecisionRule { cascade, bits });
        }
        Ok(Self {
            message_bits,
            dv,
            dc,
            channel_table,
            channel_dist,
            discretization,
            check_luts,
            var_luts,
            decision_luts,
            error_prob_trace: trace,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_bpsk_awgn, build_bsc};

    #[test]
    fn noiseless_limit() {
        let dmc = build_bpsk_awgn(20.0, 0.5, 64, 3.0).unwrap();
        let d = design_decoder(&dmc, 3, 6, 4, 4).unwrap();
        assert!(d.error_prob_trace[1] < 1e-9);
        assert_eq!(d.channel_table.len(), 64);
        assert_eq!(d.check_luts.len(), 4);
    }

    #[test]
    fn trace_tracks_frozen_tables() {
        let dmc = build_bpsk_awgn(2.0, 0.5, 128, 3.0).unwrap();
        let d = design_decoder(&dmc, 3, 6, 4, 20).unwrap();
        let tr = &d.error_prob_trace;
        assert!(tr.windows(2).all(|w| w[1] <= w[0]));
        assert!(tr[19] < 1e-6);
        let k = tr.iter().position(|&e| e < REFINE_FLOOR).unwrap();
        assert!(k < 19);
        for t in k + 1..20 {
            assert_eq!(d.check_luts[t].stages[0].lut.table, d.check_luts[k].stages[0].lut.table);
            assert_eq!(d.decision_luts[t].bits, d.decision_luts[k].bits);
        }
        assert!(tr[k + 1] < tr[k]);
    }

    #[test]
    fn below_threshold_plateaus() {
        let dmc = build_bpsk_awgn(0.2, 0.5, 128, 3.0).unwrap();
        let d = design_decoder(&dmc, 3, 6, 4, 30).unwrap();
        assert!(d.error_prob_trace[29] > 1e-3);
    }

    #[test]
    fn shapes() {
        let dmc = build_bpsk_awgn(2.0, 0.5, 32, 3.0).unwrap();
        let d = design_decoder(&dmc, 3, 6, 3, 2).unwrap();
        assert_eq!(d.levels(), 8);
        for t in 0..2 {
            assert_eq!(d.check_luts[t].num_inputs, 5);
            assert_eq!(d.check_luts[t].stages.len(), 4);
            assert_eq!(d.var_luts[t].num_inputs, 3);
            assert_eq!(d.decision_luts[t].cascade.num_inputs, 4);
            assert_eq!(d.decision_luts[t].bits.len(), 8);
        }
        assert!(std::ptr::eq(d.iteration(7).0, &d.check_luts[1]));
        assert!(d.error_prob_trace.iter().all(|p| (0.0..=0.5).contains(p)));
    }

    #[test]
    fn rejects_bad_arguments() {
        let dmc = build_bsc(0.05).unwrap();
        assert!(design_decoder(&dmc, 3, 6, 0, 5).is_err());
        assert!(design_decoder(&dmc, 3, 6, 9, 5).is_err());
        assert!(design_decoder(&dmc, 3, 6, 2, 0).is_err());
        let ask = crate::channel::build_ask_awgn(4, 1.0, 16, 3.0, None).unwrap();
        assert!(matches!(design_decoder(&ask, 3, 6, 2, 1), Err(Error::NonBinary(4))));
    }

    #[test]
    fn text_round_trip() {
        let dmc = build_bpsk_awgn(1.5, 0.5, 32, 3.0).unwrap();
        let d = design_decoder(&dmc, 3, 6, 4, 3).unwrap();
        let text = d.to_text();
        let back = LdpcEnsembleDesign::from_text(&text).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.channel_table, d.channel_table);
        assert_eq!(back.error_prob_trace, d.error_prob_trace);
        assert!(LdpcEnsembleDesign::from_text("design 4 1 3").is_err());
    }

    #[test]
    fn bsc_design_without_discretization() {
        let d = design_decoder(&build_bsc(0.02).unwrap(), 3, 6, 2, 3).unwrap();
        assert!(d.discretization.is_none());
        let back = LdpcEnsembleDesign::from_text(&d.to_text()).unwrap();
        assert_eq!(back, d);
    }
}
