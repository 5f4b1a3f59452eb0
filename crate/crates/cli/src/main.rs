//! `iblut`: quantizer design, max-LUT construction, discrete LDPC decoder
//! design and BER simulation from the command line.

mod channel_spec;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use channel_spec::{AwgnArgs, ChannelSpec};
use iblut::ib::{curve_csv, ib_curve, Algorithm, CurveConfig};
use iblut::info::{entropy, mutual_information};
use iblut::ldpc::{
    ber_csv, ber_sweep, construct_regular_ldpc, design_decoder, DecoderKind, LdpcEnsembleDesign,
    SimConfig,
};
use iblut::maxlut::{build_max_lut, requantize, MessageDist, NodeFunction};

const CHANNEL_HELP: &str = "Channel: askM (M-ASK over AWGN with --sigma), bsc:EPS, \
bpsk:EBN0 (Eb/N0 in dB at --rate) or dmc:PATH (matrix file)";

#[derive(Parser, Debug)]
#[command(name = "iblut", version, about = "Mutual-information-maximizing quantizers and LUT decoders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Design channel quantizers for one or more cluster counts (CSV).
    Quantize(QuantizeArgs),
    /// Build one two-input node lookup table.
    Maxlut(MaxlutArgs),
    /// Discrete LDPC decoders.
    #[command(subcommand)]
    Ldpc(LdpcCommand),
    /// Print I(x;y) and entropies of a channel (CSV).
    Info(InfoArgs),
}

#[derive(Subcommand, Debug)]
enum LdpcCommand {
    /// Design per-iteration decoder tables by discrete density evolution.
    Design(DesignArgs),
    /// Monte-Carlo BER of a regular code (CSV).
    Simulate(SimulateArgs),
}

#[derive(Args, Debug, Clone)]
struct ChannelArgs {
    #[arg(long, help = CHANNEL_HELP)]
    channel: ChannelSpec,
    /// AWGN noise standard deviation for askM.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Number of uniform output bins for AWGN channels.
    #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u32).range(2..))]
    bins: u32,
    /// Clip range beyond the largest signal point, in noise standard deviations.
    #[arg(long, default_value_t = 3.0)]
    clip: f64,
    /// Code rate used to convert Eb/N0 for bpsk.
    #[arg(long, default_value_t = 0.5)]
    rate: f64,
}

impl ChannelArgs {
    fn build(&self) -> anyhow::Result<iblut::channel::DmcSpec> {
        self.channel.build(&AwgnArgs {
            sigma: self.sigma,
            bins: self.bins as usize,
            clip: self.clip,
            rate: self.rate,
        })
    }
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum AlgArg {
    ItIb,
    AggIb,
    KlMeans,
    Dp,
}

impl From<AlgArg> for Algorithm {
    fn from(a: AlgArg) -> Self {
        match a {
            AlgArg::ItIb => Algorithm::ItIb,
            AlgArg::AggIb => Algorithm::AggIb,
            AlgArg::KlMeans => Algorithm::KlMeans,
            AlgArg::Dp => Algorithm::Dp,
        }
    }
}

#[derive(Args, Debug)]
struct QuantizeArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long, value_enum)]
    alg: AlgArg,
    /// Trade-off parameter; required for it-ib, reported as inf otherwise.
    #[arg(long)]
    beta: Option<f64>,
    /// Rate penalty for kl-means.
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    /// Cluster counts, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// Random initializations per cluster count (it-ib, kl-means).
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    restarts: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output path (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the quantizer mappings here.
    #[arg(long)]
    mapping: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum NodeArg {
    Check,
    Var,
}

#[derive(Args, Debug)]
struct MaxlutArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long, value_enum)]
    node: NodeArg,
    /// Width of both input messages; the channel is quantized to 2^bits labels.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u8).range(1..=8))]
    in_bits: u8,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u8).range(1..=8))]
    out_bits: u8,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DesignArgs {
    /// Code length the design is meant for; recorded in the header only.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 3)]
    dv: usize,
    #[arg(long, default_value_t = 6)]
    dc: usize,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u8).range(1..=8))]
    bits: u8,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    iters: u64,
    /// Design Eb/N0 in dB.
    #[arg(long, allow_negative_numbers = true)]
    ebn0: f64,
    #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u32).range(2..))]
    bins: u32,
    #[arg(long, default_value_t = 3.0)]
    clip: f64,
    /// Design file path (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Density evolution error trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum DecoderArg {
    Lut,
    Minsum,
    MinsumCorrected,
    Bp,
}

impl From<DecoderArg> for DecoderKind {
    fn from(d: DecoderArg) -> Self {
        match d {
            DecoderArg::Lut => DecoderKind::Lut,
            DecoderArg::Minsum => DecoderKind::MinSum,
            DecoderArg::MinsumCorrected => DecoderKind::MinSumCorrected,
            DecoderArg::Bp => DecoderKind::Bp,
        }
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    decoder: DecoderArg,
    /// Fixed LUT design; without it LUT decoders are designed at every point.
    #[arg(long)]
    design: Option<PathBuf>,
    /// Eb/N0 points in dB, comma separated.
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    ebn0: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Column weight (defaults to the design's, else 3).
    #[arg(long)]
    dv: Option<usize>,
    /// Row weight (defaults to the design's, else 6).
    #[arg(long)]
    dc: Option<usize>,
    /// Seed of the code construction.
    #[arg(long, default_value_t = 7)]
    code_seed: u64,
    #[arg(long, default_value_t = 10_000)]
    max_frames: usize,
    /// Stop a point after this many frame errors.
    #[arg(long)]
    max_errors: Option<usize>,
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 128, value_parser = clap::value_parser!(u32).range(2..))]
    bins: u32,
    #[arg(long, default_value_t = 3.0)]
    clip: f64,
    /// Message width of per-point LUT designs.
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u8).range(1..=8))]
    bits: u8,
    /// Iterations of per-point LUT designs.
    #[arg(long, default_value_t = 50)]
    design_iters: usize,
    /// Transmit random codewords instead of the all-zero word.
    #[arg(long)]
    random_codewords: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InfoArgs {
    #[command(flatten)]
    channel: ChannelArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Rejected arguments that clap cannot see.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// `# iblut <args> [seed=S]`, the first line of every output.
fn header(seed: Option<u64>) -> String {
    let mut s = String::from("# iblut");
    for a in std::env::args().skip(1) {
        s.push(' ');
        s.push_str(&a);
    }
    if let Some(seed) = seed {
        write!(s, " seed={seed}").unwrap();
    }
    s.push('\n');
    s
}

fn emit(path: Option<&PathBuf>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_quantize(a: &QuantizeArgs) -> anyhow::Result<()> {
    let algorithm = Algorithm::from(a.alg);
    let beta = match (algorithm, a.beta) {
        (Algorithm::ItIb, None) => return Err(usage("it-ib needs --beta")),
        (_, Some(b)) => b,
        (_, None) => f64::INFINITY,
    };
    let joint = a.channel.build()?.joint();
    let mut cfg = CurveConfig::new(algorithm, beta);
    cfg.lambda = a.lambda;
    cfg.restarts = a.restarts as usize;
    cfg.seed = a.seed;
    let points = ib_curve(&joint, &cfg, &a.n)?;
    let head = header(Some(a.seed));
    emit(a.out.as_ref(), &format!("{head}{}", curve_csv(&cfg, &points)))?;
    if let Some(path) = &a.mapping {
        let mut s = head;
        for p in &points {
            let q = &p.design.quantizer;
            writeln!(s, "quantizer {} {} {}", p.n, q.input_size(), q.output_size()).unwrap();
            if q.is_deterministic() {
                let labels: Vec<String> = q.labels().iter().map(usize::to_string).collect();
                writeln!(s, "labels {}", labels.join(" ")).unwrap();
            } else {
                for row in q.mapping().rows() {
                    let r: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
                    writeln!(s, "{}", r.join(" ")).unwrap();
                }
            }
        }
        emit(Some(path), &s)?;
    }
    Ok(())
}

fn cmd_maxlut(a: &MaxlutArgs) -> anyhow::Result<()> {
    let dmc = a.channel.build()?;
    let raw = MessageDist::new(dmc.transition.clone())?;
    let channel = raw.symmetrized(1e-9).unwrap_or(raw);
    let (_, msg) = requantize(&channel, 1 << a.in_bits)?;
    let f = match a.node {
        NodeArg::Check => NodeFunction::CheckXor,
        NodeArg::Var => NodeFunction::VariableEqual,
    };
    let lut = build_max_lut(f, &msg, &msg, 1 << a.out_bits)?;
    let full = MessageDist::new(iblut::maxlut::node_joint(f, &msg, &msg))?.mutual_information();
    let mut s = header(None);
    writeln!(s, "# input_info_bits {:.12}", msg.mutual_information()).unwrap();
    writeln!(s, "# node_info_bits {full:.12}").unwrap();
    writeln!(s, "# lut_info_bits {:.12}", lut.relevant_info).unwrap();
    s.push_str(&lut.to_text());
    emit(a.out.as_ref(), &s)
}

fn cmd_design(a: &DesignArgs) -> anyhow::Result<()> {
    if a.dc <= a.dv {
        return Err(usage(format!("need dc > dv for a positive rate, got dv={}, dc={}", a.dv, a.dc)));
    }
    let rate = 1.0 - a.dv as f64 / a.dc as f64;
    let dmc = iblut::channel::build_bpsk_awgn(a.ebn0, rate, a.bins as usize, a.clip)?;
    let d = design_decoder(&dmc, a.dv, a.dc, a.bits as usize, a.iters as usize)?;
    let head = header(None);
    emit(a.out.as_ref(), &format!("{head}{}", d.to_text()))?;
    if let Some(path) = &a.trace {
        let mut s = head;
        s.push_str("iteration,error_prob\n");
        for (t, e) in d.error_prob_trace.iter().enumerate() {
            writeln!(s, "{},{e:.6e}", t + 1).unwrap();
        }
        emit(Some(path), &s)?;
    }
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> anyhow::Result<()> {
    let design = match &a.design {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(LdpcEnsembleDesign::from_text(&text)?)
        }
        None => None,
    };
    if design.is_some() && !matches!(a.decoder, DecoderArg::Lut) {
        return Err(usage("--design only applies to --decoder lut"));
    }
    let dv = a.dv.or(design.as_ref().map(|d| d.dv)).unwrap_or(3);
    let dc = a.dc.or(design.as_ref().map(|d| d.dc)).unwrap_or(6);
    if dc <= dv {
        return Err(usage(format!("need dc > dv for a positive rate, got dv={dv}, dc={dc}")));
    }
    let code = construct_regular_ldpc(a.n, dv, dc, a.code_seed)?;
    let mut cfg = SimConfig::new(a.max_frames, a.seed);
    cfg.max_errors = a.max_errors.unwrap_or(usize::MAX);
    cfg.max_iter = a.max_iter;
    cfg.num_bins = match &design {
        Some(d) => d.channel_table.len(),
        None => a.bins as usize,
    };
    cfg.clip_multiplier = a.clip;
    cfg.message_bits = a.bits as usize;
    cfg.design_iters = a.design_iters;
    cfg.random_codewords = a.random_codewords;
    cfg.fixed_design = design;
    let decoder = DecoderKind::from(a.decoder);
    let points = ber_sweep(&code, decoder, &a.ebn0, &cfg)?;
    let bad: usize = points.iter().map(|p| p.false_convergences).sum();
    if bad > 0 {
        bail!("{bad} frames stopped early with unsatisfied parity checks");
    }
    let mut s = header(Some(a.seed));
    writeln!(s, "# code n={} dv={dv} dc={dc} code_seed={} four_cycles={}", a.n, a.code_seed, code.four_cycles)
        .unwrap();
    s.push_str(&ber_csv(decoder, code.n(), &points));
    emit(a.out.as_ref(), &s)
}

fn cmd_info(a: &InfoArgs) -> anyhow::Result<()> {
    let j = a.channel.build()?.joint();
    let mut s = header(None);
    s.push_str("inputs,outputs,h_x_bits,h_y_bits,mutual_info_bits\n");
    writeln!(
        s,
        "{},{},{:.12},{:.12},{:.12}",
        j.nx(),
        j.ny(),
        entropy(&j.x_marginal()),
        entropy(&j.y_marginal()),
        mutual_information(&j)
    )
    .unwrap();
    emit(a.out.as_ref(), &s)
}

/// 2 for bad arguments, 1 for everything that failed while computing.
fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<UsageError>().is_some() || e.downcast_ref::<channel_spec::SpecError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<iblut::Error>() {
        Some(iblut::Error::InvalidParameter(_) | iblut::Error::NonBinary(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Quantize(a) => cmd_quantize(a),
        Command::Maxlut(a) => cmd_maxlut(a),
        Command::Ldpc(LdpcCommand::Design(a)) => cmd_design(a),
        Command::Ldpc(LdpcCommand::Simulate(a)) => cmd_simulate(a),
        Command::Info(a) => cmd_info(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
