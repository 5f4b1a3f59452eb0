use super::code::LdpcCode;
use super::design::LdpcEnsembleDesign;
use crate::channel::DmcSpec;
use crate::error::{invalid, Error, Result};

/// Saturation level for every real-valued LLR in the baseline decoders.
pub const LLR_CLAMP: f64 = 25.0;

/// Result of decoding one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutcome {
    pub bits: Vec<u8>,
    /// Message-passing iterations performed; 0 when the channel decision was
    /// already a codeword.
    pub iterations: usize,
    /// Whether `bits` satisfies every parity check.
    pub converged: bool,
}

fn check_frame(code: &LdpcCode, bins: &[usize], num_bins: usize) -> Result<()> {
    if bins.len() != code.n() {
        return Err(Error::DimensionMismatch {
            expected: code.n(),
            got: bins.len(),
        });
    }
    if let Some(&b) = bins.iter().find(|&&b| b >= num_bins) {
        return Err(invalid(format!("channel bin {b} out of range 0..{num_bins}")));
    }
    Ok(())
}

/// Discrete message passing with the designed tables. After the channel
/// mapping, every node update is an integer table lookup.
pub fn decode_lut(
    code: &LdpcCode,
    design: &LdpcEnsembleDesign,
    channel_bins: &[usize],
    max_iter: usize,
) -> Result<DecodeOutcome> {
    check_frame(code, channel_bins, design.channel_table.len())?;
    if code.var_degree != design.dv || code.check_degree != design.dc {
        return Err(invalid(format!(
            "design is for a ({}, {}) ensemble, code is ({}, {})",
            design.dv, design.dc, code.var_degree, code.check_degree
        )));
    }
    let ch: Vec<u8> = channel_bins.iter().map(|&b| design.channel_table[b]).collect();
    let ch_bits = design.channel_decisions();
    let mut bits: Vec<u8> = ch.iter().map(|&m| ch_bits[m as usize]).collect();
    if code.syndrome_ok(&bits) {
        return Ok(DecodeOutcome {
            bits,
            iterations: 0,
            converged: true,
        });
    }
    let mut v2c: Vec<u8> = (0..code.num_edges()).map(|e| ch[code.edge_var(e)]).collect();
    let mut c2v = vec![0u8; code.num_edges()];
    let mut buf = [0u8; 32];
    for it in 0..max_iter {
        let (check, var, decide) = design.iteration(it);
        for c in 0..code.m() {
            let edges = code.check_edges(c);
            for e in edges.clone() {
                let mut k = 0;
                for o in edges.clone().filter(|&o| o != e) {
                    buf[k] = v2c[o];
                    k += 1;
                }
                c2v[e] = check.evaluate(&buf[..k]);
            }
        }
        for (v, bit) in bits.iter_mut().enumerate() {
            let edges = code.var_edges(v);
            buf[0] = ch[v];
            for (k, &e) in edges.iter().enumerate() {
                buf[k + 1] = c2v[e];
            }
            *bit = decide.bits[decide.cascade.evaluate(&buf[..edges.len() + 1]) as usize];
            for &e in edges {
                let mut k = 1;
                for &o in edges.iter().filter(|&&o| o != e) {
                    buf[k] = c2v[o];
                    k += 1;
                }
                v2c[e] = var.evaluate(&buf[..k]);
            }
        }
        if code.syndrome_ok(&bits) {
            return Ok(DecodeOutcome {
                bits,
                iterations: it + 1,
                converged: true,
            });
        }
    }
    Ok(DecodeOutcome {
        bits,
        iterations: max_iter,
        converged: false,
    })
}

/// Check-node rule of the min-sum decoders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinSumCorrection {
    Plain,
    /// Adds the Jacobian-logarithm correction from a 64-entry table.
    TableCorrected,
}

const CORR_STEP: f64 = 0.125;
const CORR_ENTRIES: usize = 64;

/// `ln(1 + e^-x)` sampled at the midpoints of `[k/8, (k+1)/8)`, `k < 64`.
fn correction_table() -> [f64; CORR_ENTRIES] {
    let mut t = [0.0; CORR_ENTRIES];
    for (k, v) in t.iter_mut().enumerate() {
        *v = (-(k as f64 + 0.5) * CORR_STEP).exp().ln_1p();
    }
    t
}

#[inline]
fn corr_lookup(table: &[f64; CORR_ENTRIES], x: f64) -> f64 {
    let k = (x / CORR_STEP) as usize;
    if k < CORR_ENTRIES {
        table[k]
    } else {
        0.0
    }
}

#[inline]
fn min_sum(a: f64, b: f64) -> f64 {
    let m = a.abs().min(b.abs());
    if (a < 0.0) != (b < 0.0) {
        -m
    } else {
        m
    }
}

/// Exact pairwise check-node combination `2 atanh(tanh(a/2) tanh(b/2))`.
#[inline]
pub fn boxplus(a: f64, b: f64) -> f64 {
    min_sum(a, b) + (-(a + b).abs()).exp().ln_1p() - (-(a - b).abs()).exp().ln_1p()
}

/// Real-valued flooding decoder with a pluggable pairwise check rule.
struct FloodingDecoder<'a, F> {
    code: &'a LdpcCode,
    op: F,
}

impl<F: Fn(f64, f64) -> f64> FloodingDecoder<'_, F> {
    fn check_update(&self, v2c: &[f64], c2v: &mut [f64], fwd: &mut Vec<f64>, bwd: &mut Vec<f64>) {
        for c in 0..self.code.m() {
            let r = self.code.check_edges(c);
            let d = r.len();
            if d == 1 {
                c2v[r.start] = LLR_CLAMP;
                continue;
            }
            let msgs = &v2c[r.clone()];
            fwd.clear();
            bwd.clear();
            fwd.push(msgs[0]);
            for k in 1..d {
                fwd.push((self.op)(fwd[k - 1], msgs[k]));
            }
            bwd.resize(d, 0.0);
            bwd[d - 1] = msgs[d - 1];
            for k in (0..d - 1).rev() {
                bwd[k] = (self.op)(msgs[k], bwd[k + 1]);
            }
            for k in 0..d {
                let m = if k == 0 {
                    bwd[1]
                } else if k == d - 1 {
                    fwd[d - 2]
                } else {
                    (self.op)(fwd[k - 1], bwd[k + 1])
                };
                c2v[r.start + k] = m.clamp(-LLR_CLAMP, LLR_CLAMP);
            }
        }
    }

    /// Runs `iters` iterations (stopping early on a codeword when `stop` is
    /// set) and returns the outcome with the final posterior LLRs.
    fn run(&self, llr: &[f64], iters: usize, stop: bool) -> (DecodeOutcome, Vec<f64>) {
        let code = self.code;
        let hard = |l: &[f64]| l.iter().map(|&x| u8::from(x < 0.0)).collect::<Vec<u8>>();
        let mut bits = hard(llr);
        if stop && code.syndrome_ok(&bits) {
            let out = DecodeOutcome {
                bits,
                iterations: 0,
                converged: true,
            };
            return (out, llr.to_vec());
        }
        let mut v2c: Vec<f64> = (0..code.num_edges()).map(|e| llr[code.edge_var(e)]).collect();
        let mut c2v = vec![0.0; code.num_edges()];
        let mut total = llr.to_vec();
        let (mut fwd, mut bwd) = (Vec::new(), Vec::new());
        let mut done = 0;
        for it in 0..iters {
            self.check_update(&v2c, &mut c2v, &mut fwd, &mut bwd);
            for v in 0..code.n() {
                let edges = code.var_edges(v);
                let t = llr[v] + edges.iter().map(|&e| c2v[e]).sum::<f64>();
                total[v] = t;
                for &e in edges {
                    v2c[e] = (t - c2v[e]).clamp(-LLR_CLAMP, LLR_CLAMP);
                }
            }
            bits = hard(&total);
            done = it + 1;
            if stop && code.syndrome_ok(&bits) {
                break;
            }
        }
        let converged = code.syndrome_ok(&bits);
        let out = DecodeOutcome {
            bits,
            iterations: done,
            converged,
        };
        (out, total)
    }
}

fn channel_llrs(code: &LdpcCode, dmc: &DmcSpec, bins: &[usize]) -> Result<Vec<f64>> {
    let table = dmc.llrs(LLR_CLAMP)?;
    check_frame(code, bins, table.len())?;
    Ok(bins.iter().map(|&b| table[b]).collect())
}

/// Min-sum decoding with LLRs taken from the discrete channel.
pub fn decode_min_sum(
    code: &LdpcCode,
    dmc: &DmcSpec,
    channel_bins: &[usize],
    max_iter: usize,
    correction: MinSumCorrection,
) -> Result<DecodeOutcome> {
    let llr = channel_llrs(code, dmc, channel_bins)?;
    Ok(match correction {
        MinSumCorrection::Plain => FloodingDecoder { code, op: min_sum }.run(&llr, max_iter, true).0,
        MinSumCorrection::TableCorrected => {
            let t = correction_table();
            let op = |a: f64, b: f64| {
                min_sum(a, b) + corr_lookup(&t, (a + b).abs()) - corr_lookup(&t, (a - b).abs())
            };
            FloodingDecoder { code, op }.run(&llr, max_iter, true).0
        }
    })
}

/// Log-domain sum-product decoding.
pub fn decode_bp(
    code: &LdpcCode,
    dmc: &DmcSpec,
    channel_bins: &[usize],
    max_iter: usize,
) -> Result<DecodeOutcome> {
    let llr = channel_llrs(code, dmc, channel_bins)?;
    Ok(FloodingDecoder { code, op: boxplus }.run(&llr, max_iter, true).0)
}

/// Posterior LLRs after exactly `iters` sum-product iterations, without
/// early stopping.
pub fn bp_posterior_llrs(code: &LdpcCode, channel_llrs: &[f64], iters: usize) -> Result<Vec<f64>> {
    if channel_llrs.len() != code.n() {
        return Err(Error::DimensionMismatch {
            expected: code.n(),
            got: channel_llrs.len(),
        });
    }
    let llr: Vec<f64> = channel_llrs.iter().map(|l| l.clamp(-LLR_CLAMP, LLR_CLAMP)).collect();
    Ok(FloodingDecoder { code, op: boxplus }.run(&llr, iters, false).1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::build_bpsk_awgn;
    use crate::ldpc::code::construct_regular_ldpc;
    use crate::ldpc::design::design_decoder;

    #[test]
    fn boxplus_matches_tanh_rule() {
        for &(a, b) in &[(0.3, -1.2), (2.0, 5.0), (-7.5, -0.01), (12.0, 0.0)] {
            let exact = 2.0 * ((a / 2.0_f64).tanh() * (b / 2.0_f64).tanh()).atanh();
            assert!((boxplus(a, b) - exact).abs() < 1e-9, "{a} {b}");
        }
    }

    #[test]
    fn bp_is_exact_on_a_tree() {
        let code =
            LdpcCode::from_check_rows(7, &[vec![0, 1, 2], vec![2, 3, 4], vec![4, 5, 6]]).unwrap();
        assert_eq!(code.four_cycles, 0);
        for llr in [
            [0.8, -0.3, 1.7, -2.2, 0.1, 0.9, -1.1],
            [-3.0, -0.2, 0.4, 2.5, -0.7, 0.05, 1.3],
        ] {
            // brute-force bitwise MAP over the 16 codewords
            let mut num = [0.0f64; 7];
            let mut den = [0.0f64; 7];
            for w in 0u32..128 {
                let bits: Vec<u8> = (0..7).map(|i| (w >> i & 1) as u8).collect();
                if !code.syndrome_ok(&bits) {
                    continue;
                }
                let weight = (-(0..7).map(|i| bits[i] as f64 * llr[i]).sum::<f64>()).exp();
                for i in 0..7 {
                    if bits[i] == 0 {
                        num[i] += weight;
                    } else {
                        den[i] += weight;
                    }
                }
            }
            let post = bp_posterior_llrs(&code, &llr, 6).unwrap();
            for i in 0..7 {
                let map = (num[i] / den[i]).ln();
                assert!((post[i] - map).abs() < 1e-9, "bit {i}: {} vs {map}", post[i]);
            }
        }
        assert!(bp_posterior_llrs(&code, &[0.0; 6], 3).is_err());
    }

    #[test]
    fn correction_table_shape() {
        let t = correction_table();
        assert!((t[0] - (1.0 + (-0.0625f64).exp()).ln()).abs() < 1e-15);
        assert!(t.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(corr_lookup(&t, 8.0), 0.0);
    }

    fn noiseless_setup() -> (LdpcCode, DmcSpec, Vec<usize>) {
        let code = construct_regular_ldpc(96, 3, 6, 1).unwrap();
        let dmc = build_bpsk_awgn(3.0, 0.5, 32, 3.0).unwrap();
        // all-zero codeword: every symbol is +1, the top bin
        let bins = vec![31; 96];
        (code, dmc, bins)
    }

    #[test]
    fn noiseless_frames_need_no_iterations() {
        let (code, dmc, bins) = noiseless_setup();
        let design = design_decoder(&dmc, 3, 6, 4, 5).unwrap();
        let lut = decode_lut(&code, &design, &bins, 50).unwrap();
        let ms = decode_min_sum(&code, &dmc, &bins, 50, MinSumCorrection::Plain).unwrap();
        let bp = decode_bp(&code, &dmc, &bins, 50).unwrap();
        for out in [lut, ms, bp] {
            assert!(out.converged);
            assert_eq!(out.iterations, 0);
            assert!(out.bits.iter().all(|&b| b == 0));
        }
    }

    #[test]
    fn single_flip_corrected() {
        let (code, dmc, mut bins) = noiseless_setup();
        bins[17] = 0;
        let design = design_decoder(&dmc, 3, 6, 4, 5).unwrap();
        let outs = [
            decode_lut(&code, &design, &bins, 50).unwrap(),
            decode_min_sum(&code, &dmc, &bins, 50, MinSumCorrection::TableCorrected).unwrap(),
            decode_bp(&code, &dmc, &bins, 50).unwrap(),
        ];
        for out in outs {
            assert!(out.converged);
            assert!(out.iterations >= 1);
            assert!(out.bits.iter().all(|&b| b == 0));
        }
    }

    #[test]
    fn frame_errors_reported() {
        let (code, dmc, bins) = noiseless_setup();
        let design = design_decoder(&dmc, 3, 6, 4, 2).unwrap();
        assert!(decode_lut(&code, &design, &bins[..10], 5).is_err());
        let mut bad = bins.clone();
        bad[0] = 32;
        assert!(decode_lut(&code, &design, &bad, 5).is_err());
        assert!(decode_bp(&code, &dmc, &bad, 5).is_err());
        assert!(decode_min_sum(&code, &dmc, &bins[1..], 5, MinSumCorrection::Plain).is_err());
    }

    #[test]
    fn lut_rejects_mismatched_ensemble() {
        let code = construct_regular_ldpc(96, 3, 6, 1).unwrap();
        let dmc = build_bpsk_awgn(3.0, 0.5, 32, 3.0).unwrap();
        let design = design_decoder(&dmc, 4, 8, 3, 2).unwrap();
        assert!(decode_lut(&code, &design, &[31; 96], 5).is_err());
    }
}
