//! The `--channel` mini-language.

use std::fmt;
use std::str::FromStr;

use iblut::channel::{build_ask_awgn, build_bpsk_awgn, build_bsc, DmcSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSpec {
    /// `askM`: M-ASK over AWGN with noise std `--sigma`.
    Ask(usize),
    /// `bsc:EPS`
    Bsc(f64),
    /// `bpsk:EBN0`: Eb/N0 in dB at code rate `--rate`.
    Bpsk(f64),
    /// `dmc:PATH`: a matrix in the `dmc <inputs> <outputs>` text format.
    File(String),
}

/// Discretization flags shared by the AWGN channels.
#[derive(Debug, Clone, Copy)]
pub struct AwgnArgs {
    pub sigma: f64,
    pub bins: usize,
    pub clip: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecError(String);

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for SpecError {}

impl FromStr for ChannelSpec {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, SpecError> {
        let bad = |what: &str| SpecError(format!("bad channel `{s}`: {what}"));
        if let Some(m) = s.strip_prefix("ask") {
            let m: usize = m.parse().map_err(|_| bad("expected askM, e.g. ask4"))?;
            return Ok(ChannelSpec::Ask(m));
        }
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| bad("expected askM, bsc:EPS, bpsk:EBN0 or dmc:PATH"))?;
        match kind {
            "bsc" => arg.parse().map(ChannelSpec::Bsc).map_err(|_| bad("crossover is not a number")),
            "bpsk" => arg.parse().map(ChannelSpec::Bpsk).map_err(|_| bad("Eb/N0 is not a number")),
            "dmc" if !arg.is_empty() => Ok(ChannelSpec::File(arg.to_string())),
            _ => Err(bad("unknown channel kind")),
        }
    }
}

impl ChannelSpec {
    pub fn build(&self, a: &AwgnArgs) -> anyhow::Result<DmcSpec> {
        Ok(match self {
            ChannelSpec::Ask(m) => build_ask_awgn(*m, a.sigma, a.bins, a.clip, None)?,
            ChannelSpec::Bsc(e) => build_bsc(*e)?,
            ChannelSpec::Bpsk(ebn0) => build_bpsk_awgn(*ebn0, a.rate, a.bins, a.clip)?,
            ChannelSpec::File(path) => DmcSpec::from_text(&std::fs::read_to_string(path)?)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_each_kind() {
        assert_eq!("ask4".parse(), Ok(ChannelSpec::Ask(4)));
        assert_eq!("bsc:0.11".parse(), Ok(ChannelSpec::Bsc(0.11)));
        assert_eq!("bpsk:-1.5".parse(), Ok(ChannelSpec::Bpsk(-1.5)));
        assert_eq!("dmc:a.txt".parse(), Ok(ChannelSpec::File("a.txt".into())));
        for bad in ["ask", "askx", "bsc", "bsc:x", "awgn:1", "dmc:"] {
            assert!(bad.parse::<ChannelSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn builds_channels() {
        let a = AwgnArgs {
            sigma: 1.0,
            bins: 32,
            clip: 3.0,
            rate: 0.5,
        };
        assert_eq!(ChannelSpec::Ask(4).build(&a).unwrap().num_inputs(), 4);
        assert_eq!(ChannelSpec::Bpsk(2.0).build(&a).unwrap().num_outputs(), 32);
        assert!(ChannelSpec::Bsc(0.7).build(&a).is_err());
        assert!(ChannelSpec::Ask(3).build(&a).is_err());
    }
}
