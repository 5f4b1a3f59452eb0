use std::fmt::Write as _;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::code::LdpcCode;
use super::decode::{decode_bp, decode_lut, decode_min_sum, DecodeOutcome, MinSumCorrection};
use super::design::{design_decoder, LdpcEnsembleDesign};
use crate::channel::{build_bpsk_awgn, bpsk_noise_std, AwgnDiscretization};
use crate::error::{invalid, Result};
use crate::ib::stream_rng;

/// Frames decoded in parallel between stopping-rule checks.
const BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoderKind {
    Lut,
    MinSum,
    MinSumCorrected,
    Bp,
}

impl DecoderKind {
    pub fn tag(&self) -> &'static str {
        match self {
            DecoderKind::Lut => "lut",
            DecoderKind::MinSum => "minsum",
            DecoderKind::MinSumCorrected => "minsum-corrected",
            DecoderKind::Bp => "bp",
        }
    }
}

impl std::str::FromStr for DecoderKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lut" => Ok(DecoderKind::Lut),
            "minsum" => Ok(DecoderKind::MinSum),
            "minsum-corrected" => Ok(DecoderKind::MinSumCorrected),
            "bp" => Ok(DecoderKind::Bp),
            _ => Err(invalid(format!(
                "unknown decoder `{s}` (expected lut, minsum, minsum-corrected or bp)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub max_frames: usize,
    /// Stop a point once this many frame errors have been seen.
    pub max_errors: usize,
    pub max_iter: usize,
    pub seed: u64,
    pub num_bins: usize,
    pub clip_multiplier: f64,
    /// Message width of per-point LUT designs.
    pub message_bits: usize,
    /// Iterations of per-point LUT designs.
    pub design_iters: usize,
    /// LUT design used at every point instead of designing per point.
    pub fixed_design: Option<LdpcEnsembleDesign>,
    /// Send random codewords instead of the all-zero word.
    pub random_codewords: bool,
}

impl SimConfig {
    pub fn new(max_frames: usize, seed: u64) -> Self {
        Self {
            max_frames,
            max_errors: usize::MAX,
            max_iter: 50,
            seed,
            num_bins: 128,
            clip_multiplier: 3.0,
            message_bits: 4,
            design_iters: 50,
            fixed_design: None,
            random_codewords: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerPoint {
    pub ebn0_db: f64,
    pub frames: usize,
    pub bit_errors: usize,
    pub frame_errors: usize,
    pub avg_iterations: f64,
    /// Converged frames whose output violated a parity check (always 0 for a
    /// sound decoder).
    pub false_convergences: usize,
}

impl BerPoint {
    pub fn ber(&self, n: usize) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            self.bit_errors as f64 / (self.frames * n) as f64
        }
    }

    pub fn fer(&self) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            self.frame_errors as f64 / self.frames as f64
        }
    }
}

/// Received bins and transmitted bits of one frame; a pure function of
/// `(seed, frame)`. Noise has standard deviation `noise_std` and samples are
/// binned with `disc`.
pub fn simulate_frame(
    code: &LdpcCode,
    noise_std: f64,
    disc: &AwgnDiscretization,
    random_codeword: Option<&super::code::Encoder>,
    seed: u64,
    frame: u64,
) -> (Vec<u8>, Vec<usize>) {
    let mut rng = stream_rng(seed, 0, frame);
    let bits = match random_codeword {
        Some(enc) => enc.random_codeword(&mut rng),
        None => vec![0; code.n()],
    };
    let bins = bits
        .iter()
        .map(|&b| {
            let x = if b == 0 { 1.0 } else { -1.0 };
            let noise: f64 = StandardNormal.sample(&mut rng);
            disc.bin_of(x + noise_std * noise)
        })
        .collect();
    (bits, bins)
}

struct FrameResult {
    bit_errors: usize,
    iterations: usize,
    false_convergence: bool,
}

/// Monte-Carlo bit and frame error rates of `decoder` on `code` over
/// quantized BPSK/AWGN at each `Eb/N0` (dB, design rate `1 - dv/dc`).
///
/// Frames are independent with per-frame random streams, so results do not
/// depend on thread count. Each point stops after `max_frames` frames or
/// once `max_errors` frame errors are reached, checked in batches.
pub fn ber_sweep(
    code: &LdpcCode,
    decoder: DecoderKind,
    ebn0_list: &[f64],
    cfg: &SimConfig,
) -> Result<Vec<BerPoint>> {
    if cfg.max_frames == 0 {
        return Ok(Vec::new());
    }
    if code.var_degree == 0 || code.check_degree == 0 {
        return Err(invalid("simulation needs a regular code"));
    }
    let rate = 1.0 - code.var_degree as f64 / code.check_degree as f64;
    let encoder = cfg.random_codewords.then(|| code.encoder());
    let mut points = Vec::with_capacity(ebn0_list.len());
    for &ebn0 in ebn0_list {
        let dmc = build_bpsk_awgn(ebn0, rate, cfg.num_bins, cfg.clip_multiplier)?;
        let disc = dmc.discretization.clone().expect("AWGN channel is discretized");
        debug_assert_eq!(disc.noise_std, bpsk_noise_std(ebn0, rate));
        // a fixed design keeps the quantizer it was designed with
        let mut quantizer = disc.clone();
        let design = match (decoder, &cfg.fixed_design) {
            (DecoderKind::Lut, Some(d)) => {
                if d.channel_table.len() != cfg.num_bins {
                    return Err(invalid(format!(
                        "design expects {} channel bins, simulation uses {}",
                        d.channel_table.len(),
                        cfg.num_bins
                    )));
                }
                if let Some(q) = &d.discretization {
                    quantizer = q.clone();
                }
                Some(d.clone())
            }
            (DecoderKind::Lut, None) => Some(design_decoder(
                &dmc,
                code.var_degree,
                code.check_degree,
                cfg.message_bits,
                cfg.design_iters,
            )?),
            _ => None,
        };
        let decode = |bins: &[usize]| -> Result<DecodeOutcome> {
            match decoder {
                DecoderKind::Lut => decode_lut(code, design.as_ref().unwrap(), bins, cfg.max_iter),
                DecoderKind::MinSum => {
                    decode_min_sum(code, &dmc, bins, cfg.max_iter, MinSumCorrection::Plain)
                }
                DecoderKind::MinSumCorrected => {
                    decode_min_sum(code, &dmc, bins, cfg.max_iter, MinSumCorrection::TableCorrected)
                }
                DecoderKind::Bp => decode_bp(code, &dmc, bins, cfg.max_iter),
            }
        };
        let mut pt = BerPoint {
            ebn0_db: ebn0,
            frames: 0,
            bit_errors: 0,
            frame_errors: 0,
            avg_iterations: 0.0,
            false_convergences: 0,
        };
        let mut total_iters = 0usize;
        'frames: while pt.frames < cfg.max_frames {
            let start = pt.frames;
            let end = (start + BATCH).min(cfg.max_frames);
            let results: Vec<FrameResult> = (start..end)
                .into_par_iter()
                .map(|f| {
                    let (sent, bins) =
                        simulate_frame(
                        code,
                        disc.noise_std,
                        &quantizer,
                        encoder.as_ref(),
                        cfg.seed,
                        f as u64,
                    );
                    let out = decode(&bins)?;
                    Ok(FrameResult {
                        bit_errors: sent.iter().zip(&out.bits).filter(|(a, b)| a != b).count(),
                        iterations: out.iterations,
                        false_convergence: out.converged && !code.syndrome_ok(&out.bits),
                    })
                })
                .collect::<Result<_>>()?;
            for r in results {
                pt.frames += 1;
                pt.bit_errors += r.bit_errors;
                pt.frame_errors += usize::from(r.bit_errors > 0);
                pt.false_convergences += usize::from(r.false_convergence);
                total_iters += r.iterations;
                if pt.frame_errors >= cfg.max_errors {
                    break 'frames;
                }
            }
        }
        pt.avg_iterations = total_iters as f64 / pt.frames as f64;
        points.push(pt);
    }
    Ok(points)
}

pub const BER_CSV_HEADER: &str = "decoder,ebn0_db,frames,bit_errors,frame_errors,ber,fer,avg_iterations";

pub fn ber_csv(decoder: DecoderKind, n: usize, points: &[BerPoint]) -> String {
    let mut s = String::from(BER_CSV_HEADER);
    s.push('\n');
    for p in points {
        writeln!(
            s,
            "{},{},{},{},{},{:.6e},{:.6e},{:.4}",
            decoder.tag(),
            p.ebn0_db,
            p.frames,
            p.bit_errors,
            p.frame_errors,
            p.ber(n),
            p.fer(),
            p.avg_iterations
        )
        .unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldpc::code::construct_regular_ldpc;

    #[test]
    fn zero_frames_is_empty() {
        let code = construct_regular_ldpc(96, 3, 6, 0).unwrap();
        let cfg = SimConfig::new(0, 1);
        assert!(ber_sweep(&code, DecoderKind::Bp, &[2.0], &cfg).unwrap().is_empty());
    }

    #[test]
    fn high_snr_is_error_free() {
        let code = construct_regular_ldpc(96, 3, 6, 0).unwrap();
        let mut cfg = SimConfig::new(300, 1);
        cfg.design_iters = 10;
        for dec in [DecoderKind::Lut, DecoderKind::MinSum, DecoderKind::Bp] {
            let pts = ber_sweep(&code, dec, &[9.0], &cfg).unwrap();
            assert_eq!(pts[0].frames, 300);
            assert_eq!(pts[0].bit_errors, 0);
        }
    }

    #[test]
    fn frames_are_reproducible() {
        let code = construct_regular_ldpc(96, 3, 6, 0).unwrap();
        let disc = build_bpsk_awgn(1.0, 0.5, 64, 3.0).unwrap().discretization.unwrap();
        let s = disc.noise_std;
        let a = simulate_frame(&code, s, &disc, None, 9, 4);
        let b = simulate_frame(&code, s, &disc, None, 9, 4);
        let c = simulate_frame(&code, s, &disc, None, 9, 5);
        assert_eq!(a, b);
        assert_ne!(a.1, c.1);
    }

    #[test]
    fn fixed_design_matches_per_point_design() {
        let code = construct_regular_ldpc(96, 3, 6, 0).unwrap();
        let mut cfg = SimConfig::new(200, 4);
        cfg.num_bins = 32;
        cfg.design_iters = 8;
        cfg.max_iter = 8;
        let per_point = ber_sweep(&code, DecoderKind::Lut, &[1.5], &cfg).unwrap();
        let dmc = build_bpsk_awgn(1.5, 0.5, 32, 3.0).unwrap();
        cfg.fixed_design = Some(design_decoder(&dmc, 3, 6, 4, 8).unwrap());
        let fixed = ber_sweep(&code, DecoderKind::Lut, &[1.5], &cfg).unwrap();
        assert_eq!(per_point, fixed);
        cfg.num_bins = 64;
        assert!(ber_sweep(&code, DecoderKind::Lut, &[1.5], &cfg).is_err());
    }

    #[test]
    fn error_cap_stops_early() {
        let code = construct_regular_ldpc(96, 3, 6, 0).unwrap();
        let mut cfg = SimConfig::new(10_000, 2);
        cfg.max_errors = 5;
        let pts = ber_sweep(&code, DecoderKind::MinSum, &[-2.0], &cfg).unwrap();
        assert_eq!(pts[0].frame_errors, 5);
        assert!(pts[0].frames < 10_000);
        assert!(pts[0].bit_errors <= pts[0].frames * 96);
    }

    #[test]
    fn csv_layout() {
        let p = BerPoint {
            ebn0_db: 2.5,
            frames: 10,
            bit_errors: 3,
            frame_errors: 1,
            avg_iterations: 4.5,
            false_convergences: 0,
        };
        let csv = ber_csv(DecoderKind::Lut, 100, &[p]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(BER_CSV_HEADER));
        assert_eq!(lines.next(), Some("lut,2.5,10,3,1,3.000000e-3,1.000000e-1,4.5000"));
    }
}
