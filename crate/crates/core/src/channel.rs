//! Discrete memoryless channels: exact small channels and clipped, uniformly
//! discretized AWGN channels with ASK/BPSK inputs.

use std::f64::consts::SQRT_2;
use std::fmt::Write as _;

use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::info::{ConditionalDist, JointXY, Pmf};

/// Uniform discretization of a clipped real-valued channel output.
#[derive(Debug, Clone, PartialEq)]
pub struct AwgnDiscretization {
    pub noise_std: f64,
    pub clip_multiplier: f64,
    pub num_bins: usize,
    /// Largest input amplitude, `max |x|`.
    pub max_amplitude: f64,
}

impl AwgnDiscretization {
    /// Half-width of the clip range, `max|x| + clip_multiplier * sigma`.
    pub fn clip_level(&self) -> f64 {
        self.max_amplitude + self.clip_multiplier * self.noise_std
    }

    /// Position of edge `k` in units of the clip level, in `[-1, 1]`.
    ///
    /// Computed as `(2k - K) / K` so that edge `K - k` is the exact negation
    /// of edge `k`.
    fn unit_edge(&self, k: usize) -> f64 {
        let kk = self.num_bins as f64;
        (2.0 * k as f64 - kk) / kk
    }

    /// The `num_bins + 1` edges spanning the clip range.
    pub fn bin_edges(&self) -> Vec<f64> {
        let a = self.clip_level();
        (0..=self.num_bins).map(|k| a * self.unit_edge(k)).collect()
    }

    pub fn bin_width(&self) -> f64 {
        2.0 * self.clip_level() / self.num_bins as f64
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        let e = self.bin_edges();
        e.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Bin index of a received real value; values outside the clip range
    /// saturate into the outermost bins.
    pub fn bin_of(&self, y: f64) -> usize {
        let a = self.clip_level();
        let k = ((y + a) / self.bin_width()).floor();
        if k.is_nan() || k < 0.0 {
            0
        } else {
            (k as usize).min(self.num_bins - 1)
        }
    }
}

/// Probability that a Gaussian with the given mean and deviation lands in
/// `[lo, hi)`. Either edge may be infinite.
pub(crate) fn gaussian_mass(lo: f64, hi: f64, mean: f64, std: f64) -> f64 {
    let a = (lo - mean) / std;
    let b = (hi - mean) / std;
    // upper tail Q(t) = erfc(t / sqrt 2) / 2, evaluated on the side that keeps
    // relative precision
    let q = |t: f64| {
        if t == f64::INFINITY {
            0.0
        } else if t == f64::NEG_INFINITY {
            1.0
        } else {
            0.5 * erfc(t / SQRT_2)
        }
    };
    let m = if a >= 0.0 {
        q(a) - q(b)
    } else if b <= 0.0 {
        q(-b) - q(-a)
    } else {
        1.0 - q(-a) - q(b)
    };
    m.max(0.0)
}

/// A discrete memoryless channel with its input signal points and prior.
#[derive(Debug, Clone, PartialEq)]
pub struct DmcSpec {
    pub input_alphabet: Vec<f64>,
    pub transition: ConditionalDist,
    pub input_prior: Pmf,
    pub discretization: Option<AwgnDiscretization>,
}

impl DmcSpec {
    pub fn num_inputs(&self) -> usize {
        self.transition.num_rows()
    }

    pub fn num_outputs(&self) -> usize {
        self.transition.num_cols()
    }

    pub fn joint(&self) -> JointXY {
        JointXY::from_channel(&self.input_prior, &self.transition)
            .expect("prior and transition sizes agree by construction")
    }

    /// Per-output LLR `ln p(y|x=0) / p(y|x=1)` of a binary-input channel,
    /// clamped to `[-clamp, clamp]`.
    pub fn llrs(&self, clamp: f64) -> Result<Vec<f64>> {
        if self.num_inputs() != 2 {
            return Err(Error::NonBinary(self.num_inputs()));
        }
        let (p0, p1) = (self.transition.row(0), self.transition.row(1));
        Ok(p0
            .iter()
            .zip(p1)
            .map(|(&a, &b)| {
                let l = if a == 0.0 && b == 0.0 {
                    0.0
                } else {
                    a.ln() - b.ln()
                };
                l.clamp(-clamp, clamp)
            })
            .collect())
    }

    /// Plain-text matrix form: a `dmc <inputs> <outputs>` header, the prior
    /// row, then one transition row per input.
    pub fn to_text(&self) -> String {
        let mut s = format!("dmc {} {}\n", self.num_inputs(), self.num_outputs());
        write_row(&mut s, self.input_prior.probs());
        for row in self.transition.rows() {
            write_row(&mut s, row);
        }
        s
    }

    /// Parses [`DmcSpec::to_text`] output. Signal points are not part of the
    /// format, so the parsed input alphabet is the symbol index.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (ln, header) = lines.next().ok_or(Error::Parse {
            line: 0,
            msg: "empty input".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let parse_err = |line: usize, msg: &str| Error::Parse {
            line,
            msg: msg.to_string(),
        };
        if fields.len() != 3 || fields[0] != "dmc" {
            return Err(parse_err(ln, "expected `dmc <inputs> <outputs>`"));
        }
        let ni: usize = fields[1].parse().map_err(|_| parse_err(ln, "bad input count"))?;
        let no: usize = fields[2].parse().map_err(|_| parse_err(ln, "bad output count"))?;
        let mut rows = Vec::with_capacity(ni + 1);
        for _ in 0..=ni {
            let (ln, l) = lines.next().ok_or(parse_err(ln, "truncated matrix"))?;
            let row = parse_floats(l).map_err(|m| parse_err(ln, &m))?;
            let expected = if rows.is_empty() { ni } else { no };
            if row.len() != expected {
                return Err(parse_err(ln, "row has the wrong length"));
            }
            rows.push(row);
        }
        let prior = Pmf::new(rows.remove(0))?;
        Ok(Self {
            input_alphabet: (0..ni).map(|i| i as f64).collect(),
            transition: ConditionalDist::new(rows)?,
            input_prior: prior,
            discretization: None,
        })
    }
}

fn write_row(s: &mut String, row: &[f64]) {
    let mut first = true;
    for v in row {
        if !first {
            s.push(' ');
        }
        first = false;
        write!(s, "{v:.17e}").unwrap();
    }
    s.push('\n');
}

pub(crate) fn parse_floats(line: &str) -> std::result::Result<Vec<f64>, String> {
    line.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| format!("bad number `{t}`")))
        .collect()
}

fn awgn_rows(inputs: &[f64], disc: &AwgnDiscretization) -> ConditionalDist {
    let edges = disc.bin_edges();
    let k = disc.num_bins;
    let mut data = Vec::with_capacity(inputs.len() * k);
    for &x in inputs {
        for b in 0..k {
            let lo = if b == 0 { f64::NEG_INFINITY } else { edges[b] };
            let hi = if b + 1 == k { f64::INFINITY } else { edges[b + 1] };
            data.push(gaussian_mass(lo, hi, x, disc.noise_std));
        }
    }
    ConditionalDist::from_flat(inputs.len(), k, data)
}

/// M-ASK inputs `{-(M-1), ..., -1, +1, ..., M-1}` (ascending) over AWGN,
/// clipped at `max|x| + clip_multiplier * sigma` and uniformly binned.
pub fn build_ask_awgn(
    levels: usize,
    noise_std: f64,
    num_bins: usize,
    clip_multiplier: f64,
    prior: Option<Pmf>,
) -> Result<DmcSpec> {
    if levels < 2 || levels % 2 != 0 {
        return Err(invalid(format!("ASK order must be even and >= 2, got {levels}")));
    }
    check_awgn_args(noise_std, num_bins, clip_multiplier)?;
    let inputs: Vec<f64> = (0..levels)
        .map(|i| 2.0 * i as f64 - (levels as f64 - 1.0))
        .collect();
    let prior = match prior {
        Some(p) if p.len() != levels => {
            return Err(Error::DimensionMismatch {
                expected: levels,
                got: p.len(),
            })
        }
        Some(p) => p,
        None => Pmf::uniform(levels)?,
    };
    let disc = AwgnDiscretization {
        noise_std,
        clip_multiplier,
        num_bins,
        max_amplitude: levels as f64 - 1.0,
    };
    Ok(DmcSpec {
        transition: awgn_rows(&inputs, &disc),
        input_alphabet: inputs,
        input_prior: prior,
        discretization: Some(disc),
    })
}

fn check_awgn_args(noise_std: f64, num_bins: usize, clip_multiplier: f64) -> Result<()> {
    if !(noise_std > 0.0) || !noise_std.is_finite() {
        return Err(invalid(format!("noise std must be positive, got {noise_std}")));
    }
    if num_bins < 2 {
        return Err(invalid(format!("need at least 2 bins, got {num_bins}")));
    }
    if !(clip_multiplier >= 0.0) || !clip_multiplier.is_finite() {
        return Err(invalid(format!(
            "clip multiplier must be non-negative, got {clip_multiplier}"
        )));
    }
    Ok(())
}

/// Noise standard deviation for unit-energy antipodal signaling at the
/// given `Eb/N0` (dB) and code rate.
pub fn bpsk_noise_std(ebn0_db: f64, code_rate: f64) -> f64 {
    let ebn0 = 10f64.powf(ebn0_db / 10.0);
    (1.0 / (2.0 * code_rate * ebn0)).sqrt()
}

/// BPSK over AWGN with bit 0 sent as `+1` (input index 0) and bit 1 as `-1`.
pub fn build_bpsk_awgn(
    ebn0_db: f64,
    code_rate: f64,
    num_bins: usize,
    clip_multiplier: f64,
) -> Result<DmcSpec> {
    if !(code_rate > 0.0 && code_rate <= 1.0) {
        return Err(invalid(format!("code rate must lie in (0, 1], got {code_rate}")));
    }
    if !ebn0_db.is_finite() {
        return Err(invalid("Eb/N0 must be finite"));
    }
    let sigma = bpsk_noise_std(ebn0_db, code_rate);
    check_awgn_args(sigma, num_bins, clip_multiplier)?;
    let inputs = vec![1.0, -1.0];
    let disc = AwgnDiscretization {
        noise_std: sigma,
        clip_multiplier,
        num_bins,
        max_amplitude: 1.0,
    };
    Ok(DmcSpec {
        transition: awgn_rows(&inputs, &disc),
        input_alphabet: inputs,
        input_prior: Pmf::uniform(2)?,
        discretization: Some(disc),
    })
}

/// Binary symmetric channel with crossover `eps` and uniform prior.
pub fn build_bsc(eps: f64) -> Result<DmcSpec> {
    if !(0.0..=0.5).contains(&eps) {
        return Err(invalid(format!("BSC crossover must lie in [0, 0.5], got {eps}")));
    }
    Ok(DmcSpec {
        input_alphabet: vec![1.0, -1.0],
        transition: ConditionalDist::from_flat(2, 2, vec![1.0 - eps, eps, eps, 1.0 - eps]),
        input_prior: Pmf::uniform(2)?,
        discretization: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::mutual_information;

    fn h2(p: f64) -> f64 {
        if p == 0.0 || p == 1.0 {
            0.0
        } else {
            -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
        }
    }

    #[test]
    fn ask4_setup_geometry() {
        let dmc = build_ask_awgn(4, 1.0, 128, 3.0, None).unwrap();
        assert_eq!(dmc.input_alphabet, vec![-3.0, -1.0, 1.0, 3.0]);
        let disc = dmc.discretization.as_ref().unwrap();
        let e = disc.bin_edges();
        assert_eq!(e.len(), 129);
        assert_eq!(e[0], -6.0);
        assert_eq!(e[128], 6.0);
        assert!((disc.bin_width() - 12.0 / 128.0).abs() < 1e-15);
        for row in dmc.transition.rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn vanishing_noise_concentrates_mass() {
        let dmc = build_ask_awgn(2, 1e-6, 8, 3.0, None).unwrap();
        let disc = dmc.discretization.clone().unwrap();
        for (i, &x) in dmc.input_alphabet.iter().enumerate() {
            let b = disc.bin_of(x);
            assert!(dmc.transition.get(i, b) >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn ask_output_symmetry() {
        let dmc = build_ask_awgn(4, 0.8, 37, 3.0, None).unwrap();
        let k = dmc.num_outputs();
        for i in 0..4 {
            for b in 0..k {
                let d = dmc.transition.get(i, b) - dmc.transition.get(3 - i, k - 1 - b);
                assert!(d.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ask_argument_errors() {
        assert!(build_ask_awgn(4, 0.0, 16, 3.0, None).is_err());
        assert!(build_ask_awgn(4, -1.0, 16, 3.0, None).is_err());
        assert!(build_ask_awgn(4, 1.0, 1, 3.0, None).is_err());
        assert!(build_ask_awgn(3, 1.0, 16, 3.0, None).is_err());
        assert!(build_ask_awgn(4, 1.0, 16, 3.0, Some(Pmf::uniform(3).unwrap())).is_err());
    }

    #[test]
    fn bpsk_sigma_formula() {
        let s = bpsk_noise_std(2.0, 0.5);
        assert!((s * s - 0.630957344480193).abs() < 1e-12);
        let dmc = build_bpsk_awgn(2.0, 0.5, 16, 3.0).unwrap();
        let d = dmc.discretization.unwrap();
        assert!((d.noise_std.powi(2) - 0.6310).abs() < 1e-4);
    }

    #[test]
    fn bpsk_near_noiseless_and_symmetric() {
        let dmc = build_bpsk_awgn(20.0, 0.5, 16, 3.0).unwrap();
        assert!(mutual_information(&dmc.joint()) >= 0.999);
        for (ebn0, bins) in [(0.0, 7), (2.0, 64), (5.0, 128)] {
            let dmc = build_bpsk_awgn(ebn0, 0.5, bins, 3.0).unwrap();
            let (a, b) = (dmc.transition.row(0), dmc.transition.row(1));
            for k in 0..bins {
                assert!((a[k] - b[bins - 1 - k]).abs() < 1e-12);
            }
        }
        assert!(build_bpsk_awgn(2.0, 0.0, 16, 3.0).is_err());
        assert!(build_bpsk_awgn(2.0, 1.5, 16, 3.0).is_err());
        assert!(build_bpsk_awgn(2.0, 0.5, 1, 3.0).is_err());
    }

    #[test]
    fn bsc_examples() {
        let mi = |e| mutual_information(&build_bsc(e).unwrap().joint());
        assert!((mi(0.0) - 1.0).abs() < 1e-15);
        assert!(mi(0.5).abs() < 1e-15);
        assert!((mi(0.11) - (1.0 - h2(0.11))).abs() < 1e-12);
        assert!(build_bsc(-0.1).is_err());
        assert!(build_bsc(0.6).is_err());
    }

    #[test]
    fn llrs_are_antisymmetric() {
        let dmc = build_bpsk_awgn(1.0, 0.5, 20, 3.0).unwrap();
        let l = dmc.llrs(25.0).unwrap();
        for k in 0..20 {
            assert!((l[k] + l[19 - k]).abs() < 1e-9);
        }
        // bin 0 holds the most negative outputs, which favour x = -1 (bit 1)
        assert!(l[0] < 0.0 && l[19] > 0.0);
        let ask = build_ask_awgn(4, 1.0, 8, 3.0, None).unwrap();
        assert!(matches!(ask.llrs(25.0), Err(Error::NonBinary(4))));
    }

    #[test]
    fn bin_of_saturates() {
        let dmc = build_bpsk_awgn(2.0, 0.5, 16, 3.0).unwrap();
        let d = dmc.discretization.unwrap();
        assert_eq!(d.bin_of(-100.0), 0);
        assert_eq!(d.bin_of(100.0), 15);
        assert_eq!(d.bin_of(0.0), 8);
        let edges = d.bin_edges();
        for k in 0..16 {
            assert_eq!(d.bin_of(0.5 * (edges[k] + edges[k + 1])), k);
        }
    }

    #[test]
    fn text_format_round_trip() {
        let dmc = build_ask_awgn(4, 1.0, 9, 3.0, None).unwrap();
        let text = dmc.to_text();
        assert!(text.starts_with("dmc 4 9\n"));
        let back = DmcSpec::from_text(&format!("# comment\n{text}")).unwrap();
        assert_eq!(back.transition, dmc.transition);
        assert_eq!(back.input_prior, dmc.input_prior);
        assert!(DmcSpec::from_text("dmc 2 2\n0.5 0.5\n1 0\n").is_err());
        assert!(DmcSpec::from_text("dmx 2 2\n").is_err());
    }

    fn gauss_pdf(y: f64, mu: f64, s: f64) -> f64 {
        (-(y - mu).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
    }

    /// Composite Simpson rule.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, steps: usize) -> f64 {
        let h = (b - a) / steps as f64;
        let mut acc = f(a) + f(b);
        for k in 1..steps {
            acc += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    }

    #[test]
    fn ask4_bins_match_quadrature() {
        let sigma = 1.0;
        let dmc = build_ask_awgn(4, sigma, 128, 3.0, None).unwrap();
        let edges = dmc.discretization.as_ref().unwrap().bin_edges();
        let far = 20.0;
        let mut rows = vec![vec![0.0; 128]; 4];
        for (i, &x) in dmc.input_alphabet.iter().enumerate() {
            for b in 0..128 {
                let lo = if b == 0 { -far } else { edges[b] };
                let hi = if b == 127 { far } else { edges[b + 1] };
                let steps = if b == 0 || b == 127 { 4000 } else { 40 };
                rows[i][b] = simpson(|y| gauss_pdf(y, x, sigma), lo, hi, steps);
                assert!((rows[i][b] - dmc.transition.get(i, b)).abs() < 1e-9);
            }
        }
        let oracle = JointXY::new(rows.iter().map(|r| r.iter().map(|p| p / 4.0).collect()).collect())
            .unwrap();
        assert!((mutual_information(&oracle) - mutual_information(&dmc.joint())).abs() < 1e-6);
    }

    #[test]
    fn refining_bins_approaches_continuous_information() {
        // I(x;y) of unquantized 4-ASK by quadrature of p(y) log p(y|x)/p(y)
        let xs = [-3.0, -1.0, 1.0, 3.0];
        let py = |y: f64| xs.iter().map(|&x| gauss_pdf(y, x, 1.0)).sum::<f64>() / 4.0;
        let integrand = |y: f64| {
            let p = py(y);
            xs.iter()
                .map(|&x| {
                    let c = gauss_pdf(y, x, 1.0);
                    if c > 0.0 { 0.25 * c * (c / p).log2() } else { 0.0 }
                })
                .sum::<f64>()
        };
        let continuous = simpson(integrand, -14.0, 14.0, 20_000);
        let mut last = 0.0;
        for bins in [8, 16, 32, 64, 128, 256, 512] {
            let mi = mutual_information(&build_ask_awgn(4, 1.0, bins, 3.0, None).unwrap().joint());
            assert!(mi >= last - 1e-12, "{bins}: {mi} < {last}");
            assert!(mi <= continuous + 1e-9);
            last = mi;
        }
        assert!(continuous - last < 2e-3, "{continuous} vs {last}");
    }
}
