//! Purpose-tagged random streams.
//!
//! Every random draw in a trial is addressed by `(seed, round, tag)`. The
//! environment (contexts, oracle contexts, per-round graphs) and the agent
//! (action sampling) read from disjoint streams, so two algorithms run under
//! the same seed face the exact same environment.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamTag {
    Context,
    OracleContext,
    Action,
    Graph,
}

impl StreamTag {
    fn salt(self) -> u64 {
        match self {
            StreamTag::Context => 0x636f_6e74_6578_7431,
            StreamTag::OracleContext => 0x6f72_6163_6c65_7832,
            StreamTag::Action => 0x6163_7469_6f6e_7333,
            StreamTag::Graph => 0x6772_6170_6867_7434,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic generator for one `(seed, round, tag)` cell.
pub fn stream(seed: u64, round: u64, tag: StreamTag) -> ChaCha8Rng {
    let mut state = seed ^ tag.salt();
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(round);
    rng
}
