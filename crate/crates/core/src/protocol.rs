//! Keyed derivation of the per-step shared randomness `(s, b^m)`.
//!
//! This is a wire-level contract: any implementation that follows it
//! byte-for-byte derives the same side information and partition.
//!
//! ```text
//! digest  = SHA-256( key
//!                 || u32_le(ctx[0]) || ... || u32_le(ctx[h-1])
//!                 || u64_le(step)            -- only if no previous tokens )
//! ctx     = the last h previous token ids, left-padded with 0xFFFF_FFFF
//! s       = u64_le(digest[0..8]) mod k
//! seed    = u64_le(digest[8..16])
//! b^m     = partition sampler driven by RngStream(seed, 0)
//! sampler = RngStream(seed, 1)   (watermark coin, then token)
//! ```

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::partition::{sample, PartitionSeq, PartitionStrategy};
use crate::rng::RngStream;

/// Token id used to left-pad contexts shorter than the window.
pub const PAD_TOKEN: u32 = u32::MAX;

pub const MIN_KEY_BYTES: usize = 16;

pub const DEFAULT_CONTEXT_WINDOW: usize = 4;

/// Stream of the derived seed that drives the partition sampler.
pub const PARTITION_STREAM: u64 = 0;
/// Stream of the derived seed that drives the coin and token draws.
pub const SAMPLING_STREAM: u64 = 1;

#[derive(Clone, PartialEq, Eq)]
pub struct SharedKey {
    key_bytes: Vec<u8>,
    h: usize,
}

impl std::fmt::Debug for SharedKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SharedKey")
            .field("key_bytes", &format_args!("<{} bytes>", self.key_bytes.len()))
            .field("h", &self.h)
            .finish()
    }
}

impl SharedKey {
    pub fn new(key_bytes: Vec<u8>, h: usize) -> Result<Self> {
        if key_bytes.len() < MIN_KEY_BYTES {
            return Err(Error::InvalidParameter(format!(
                "key must be at least {MIN_KEY_BYTES} bytes, got {}",
                key_bytes.len()
            )));
        }
        if h < 1 {
            return Err(Error::InvalidParameter("context window h must be >= 1".into()));
        }
        Ok(Self { key_bytes, h })
    }

    pub fn key_bytes(&self) -> &[u8] {
        &self.key_bytes
    }

    pub fn h(&self) -> usize {
        self.h
    }
}

/// Everything derived for one generation step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepRandomness {
    pub digest: [u8; 32],
    pub s: usize,
    pub seed: u64,
}

impl StepRandomness {
    pub fn partition_rng(&self) -> RngStream {
        RngStream::new(self.seed, PARTITION_STREAM)
    }

    pub fn sampling_rng(&self) -> RngStream {
        RngStream::new(self.seed, SAMPLING_STREAM)
    }

    pub fn partition(&self, m: usize, k: usize, strategy: PartitionStrategy) -> Result<PartitionSeq> {
        sample(strategy, m, k, &mut self.partition_rng())
    }
}

pub fn step_digest(key: &SharedKey, prev_tokens: &[u32], step: u64) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(&key.key_bytes);
    let h = key.h;
    let tail = &prev_tokens[prev_tokens.len().saturating_sub(h)..];
    for _ in tail.len()..h {
        hasher.update(PAD_TOKEN.to_le_bytes());
    }
    for &t in tail {
        hasher.update(t.to_le_bytes());
    }
    if prev_tokens.is_empty() {
        hasher.update(step.to_le_bytes());
    }
    hasher.finalize().into()
}

pub fn derive_step_randomness(
    key: &SharedKey,
    prev_tokens: &[u32],
    step: u64,
    k: usize,
) -> Result<StepRandomness> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k must be >= 2, got {k}")));
    }
    let digest = step_digest(key, prev_tokens, step);
    let head = u64::from_le_bytes(digest[0..8].try_into().expect("8 bytes"));
    let seed = u64::from_le_bytes(digest[8..16].try_into().expect("8 bytes"));
    Ok(StepRandomness {
        digest,
        s: (head % k as u64) as usize,
        seed,
    })
}

/// One entry of the published interoperability vectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolVector {
    pub key_hex: String,
    pub h: usize,
    pub context: Vec<u32>,
    pub step: u64,
    pub k: usize,
    pub m: usize,
    pub strategy: PartitionStrategy,
    pub digest_hex: String,
    pub s: usize,
    pub seed: u64,
    pub bins: Vec<usize>,
}

fn to_hex(bytes: &[u8]) -> String {
    use std::fmt::Write;
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn from_hex(s: &str) -> Result<Vec<u8>> {
    if !s.len().is_multiple_of(2) || !s.is_ascii() {
        return Err(Error::InvalidParameter(format!("malformed hex string '{s}'")));
    }
    (0..s.len())
        .step_by(2)
        .map(|i| {
            u8::from_str_radix(&s[i..i + 2], 16)
                .map_err(|_| Error::InvalidParameter(format!("malformed hex string '{s}'")))
        })
        .collect()
}

impl ProtocolVector {
    /// Derives a vector entry from its inputs.
    pub fn compute(
        key: &SharedKey,
        context: Vec<u32>,
        step: u64,
        k: usize,
        m: usize,
        strategy: PartitionStrategy,
    ) -> Result<Self> {
        let r = derive_step_randomness(key, &context, step, k)?;
        let bins = r.partition(m, k, strategy)?.bins().to_vec();
        Ok(Self {
            key_hex: to_hex(key.key_bytes()),
            h: key.h(),
            context,
            step,
            k,
            m,
            strategy,
            digest_hex: to_hex(&r.digest),
            s: r.s,
            seed: r.seed,
            bins,
        })
    }

    /// Recomputes the outputs from this entry's inputs.
    pub fn recompute(&self) -> Result<Self> {
        let key = SharedKey::new(from_hex(&self.key_hex)?, self.h)?;
        Self::compute(&key, self.context.clone(), self.step, self.k, self.m, self.strategy)
    }
}

/// The 100 published interoperability vectors. Inputs are drawn from a fixed
/// stream so the set is reproducible; they cover empty, short, exact and long
/// contexts, both partition strategies, and a spread of `(k, m)`.
pub fn reference_vectors() -> Result<Vec<ProtocolVector>> {
    let mut rng = RngStream::new(0x5eed_cc00, 0);
    let shapes = [(2, 10), (2, 32), (3, 12), (4, 20), (5, 17), (8, 64)];
    (0..100)
        .map(|i| {
            let key_len = MIN_KEY_BYTES + rng.index(17);
            let key: Vec<u8> = (0..key_len).map(|_| rng.next_u32() as u8).collect();
            let h = 1 + rng.index(6);
            let ctx_len = match i % 4 {
                0 => 0,
                1 => rng.index(h),
                2 => h,
                _ => h + 1 + rng.index(8),
            };
            let context = (0..ctx_len).map(|_| rng.below(50_000) as u32).collect();
            let step = rng.below(1_000);
            let (k, m) = shapes[i % shapes.len()];
            let strategy = if i % 3 == 0 {
                PartitionStrategy::Iid
            } else {
                PartitionStrategy::Balanced
            };
            ProtocolVector::compute(&SharedKey::new(key, h)?, context, step, k, m, strategy)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(h: usize) -> SharedKey {
        SharedKey::new((0u8..16).collect(), h).unwrap()
    }

    #[test]
    fn key_validation() {
        assert!(SharedKey::new(vec![1; 15], 4).is_err());
        assert!(SharedKey::new(vec![1; 16], 0).is_err());
        assert!(!format!("{:?}", key(2)).contains("[0, 1"));
    }

    #[test]
    fn digest_layout() {
        let k = key(2);
        let mut manual = Sha256::new();
        manual.update(k.key_bytes());
        manual.update(PAD_TOKEN.to_le_bytes());
        manual.update(7u32.to_le_bytes());
        let want: [u8; 32] = manual.finalize().into();
        assert_eq!(step_digest(&k, &[7], 99), want);

        let mut manual = Sha256::new();
        manual.update(k.key_bytes());
        manual.update(PAD_TOKEN.to_le_bytes());
        manual.update(PAD_TOKEN.to_le_bytes());
        manual.update(99u64.to_le_bytes());
        let want: [u8; 32] = manual.finalize().into();
        assert_eq!(step_digest(&k, &[], 99), want);
    }

    #[test]
    fn only_last_h_tokens_matter() {
        let k = key(2);
        assert_eq!(step_digest(&k, &[1, 2, 3], 0), step_digest(&k, &[9, 2, 3], 5));
        assert_ne!(step_digest(&k, &[1, 2, 3], 0), step_digest(&k, &[1, 2, 4], 0));
    }

    #[test]
    fn step_matters_only_at_cold_start() {
        let k = key(3);
        assert_ne!(step_digest(&k, &[], 0), step_digest(&k, &[], 1));
        assert_eq!(step_digest(&k, &[5], 0), step_digest(&k, &[5], 1));
    }

    #[test]
    fn generator_and_detector_agree() {
        let a = derive_step_randomness(&key(4), &[10, 11, 12], 3, 2).unwrap();
        let b = derive_step_randomness(&key(4), &[10, 11, 12], 3, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a.partition(10, 2, PartitionStrategy::Balanced).unwrap(),
            b.partition(10, 2, PartitionStrategy::Balanced).unwrap()
        );
    }

    #[test]
    fn hex_round_trip() {
        assert_eq!(from_hex(&to_hex(&[0, 1, 254, 255])).unwrap(), vec![0, 1, 254, 255]);
        assert!(from_hex("abc").is_err());
        assert!(from_hex("zz").is_err());
    }
}
