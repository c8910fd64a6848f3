//! Fan-out of the master seed into per-task streams.
//!
//! A task is identified by `(subcommand, p, n, θ-index)`. Its stream id is
//! `splitmix64` folded over the FNV-1a hash of the subcommand name, the bit
//! pattern of `p`, `n` and the index, in that order.

use lpproj::sampling::{splitmix64, RngStream};

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

pub fn task_id(command: &str, p: f64, n: usize, index: usize) -> u64 {
    [p.to_bits(), n as u64, index as u64].into_iter().fold(splitmix64(fnv1a(command)), |h, x| splitmix64(h ^ x))
}

pub fn task_stream(seed: u64, command: &str, p: f64, n: usize, index: usize) -> RngStream {
    RngStream::new(seed, task_id(command, p, n, index))
}

/// Stream for the `index`-th Haar direction in dimension `n`; shared by every `p`
/// so sweeps over `p` see the same hyperplanes.
pub fn direction_stream(seed: u64, n: usize, index: usize) -> RngStream {
    task_stream(seed, "theta", 0.0, n, index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_separate_tasks() {
        let base = task_id("ratio", 2.0, 8, 0);
        assert_eq!(base, task_id("ratio", 2.0, 8, 0));
        for other in [task_id("orlicz", 2.0, 8, 0), task_id("ratio", 2.5, 8, 0), task_id("ratio", 2.0, 9, 0), task_id("ratio", 2.0, 8, 1)] {
            assert_ne!(base, other);
        }
    }
}
