//! Regular LDPC codes with lookup-table, min-sum and sum-product decoders.

pub mod code;
pub mod decode;
pub mod design;
pub mod sim;

pub use code::{construct_regular_ldpc, Encoder, LdpcCode};
pub use decode::{
    boxplus, bp_posterior_llrs, decode_bp, decode_lut, decode_min_sum, DecodeOutcome,
    MinSumCorrection, LLR_CLAMP,
};
pub use design::{design_decoder, DecisionRule, LdpcEnsembleDesign, REFINE_FLOOR};
pub use sim::{ber_csv, ber_sweep, simulate_frame, BerPoint, DecoderKind, SimConfig, BER_CSV_HEADER};
