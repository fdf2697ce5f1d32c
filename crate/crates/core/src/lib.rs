//! Block Markov superposition transmission of short codes.
//!
//! Short codes and their Cartesian products live in [`codes`], the
//! superposition encoder in [`encoder`], the BPSK/AWGN channel in
//! [`channel`], the two iterative receivers in [`swd`] and [`tpd`], closed
//! form performance bounds in [`analysis`] and the Monte Carlo driver in
//! [`harness`].

pub mod analysis;
pub mod bits;
pub mod channel;
pub mod codes;
pub mod encoder;
pub mod error;
pub mod harness;
pub mod llr;
pub mod swd;
pub mod tpd;

pub use bits::BitBlock;
pub use channel::{ChannelParams, ReceivedBlock};
pub use codes::{CartesianCode, CodeFamily, Iowef, ShortCode};
pub use encoder::{BmstSystem, EncodedFrame, EncoderState, InterleaverSet};
pub use error::{Error, Result};
