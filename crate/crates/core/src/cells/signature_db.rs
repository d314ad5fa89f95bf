//! Compressed signature store carried by detector cells: a Bloom filter over
//! fixed-length signature windows.

use std::collections::BTreeSet;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DbError {
    #[error("cannot compress an empty signature set")]
    EmptySignatureSet,
    #[error("target false-positive rate must lie in (0, 1), got {0}")]
    InvalidFpr(f64),
    #[error("signatures must be non-empty")]
    EmptySignature,
}

/// Bit budget of an optimally sized Bloom filter: `1.44 * n * log2(1/p)`, rounded up.
pub fn bloom_bits(n: usize, target_fpr: f64) -> usize {
    (1.44 * n as f64 * (1.0 / target_fpr).log2()).ceil() as usize
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompressedSignatureDb {
    words: Vec<u64>,
    bits: usize,
    hashes: u32,
    lengths: BTreeSet<usize>,
    signature_count: usize,
    target_fpr: f64,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl CompressedSignatureDb {
    /// Empty filter sized for `capacity` signatures at `target_fpr`.
    pub fn with_capacity(capacity: usize, target_fpr: f64) -> Result<Self, DbError> {
        if !(target_fpr > 0.0 && target_fpr < 1.0) {
            return Err(DbError::InvalidFpr(target_fpr));
        }
        let capacity = capacity.max(1);
        let bits = bloom_bits(capacity, target_fpr).max(1);
        let hashes = ((bits as f64 / capacity as f64) * std::f64::consts::LN_2).round().max(1.0) as u32;
        Ok(CompressedSignatureDb {
            words: vec![0; bits.div_ceil(64)],
            bits,
            hashes,
            lengths: BTreeSet::new(),
            signature_count: 0,
            target_fpr,
        })
    }

    /// Bit positions for `window`. Each probe re-mixes the base hash
    /// independently; plain double hashing degenerates on tiny filters
    /// whenever the step shares a factor with the bit count.
    fn probes(&self, window: &[u8]) -> impl Iterator<Item = usize> + '_ {
        let base = fnv1a(window);
        let m = self.bits as u64;
        (0..self.hashes as u64).map(move |i| (splitmix(base ^ i.wrapping_mul(0x9e37_79b9_7f4a_7c15)) % m) as usize)
    }

    pub fn insert(&mut self, signature: &[u8]) -> Result<(), DbError> {
        if signature.is_empty() {
            return Err(DbError::EmptySignature);
        }
        let idx: Vec<usize> = self.probes(signature).collect();
        for i in idx {
            self.words[i / 64] |= 1 << (i % 64);
        }
        self.lengths.insert(signature.len());
        self.signature_count += 1;
        Ok(())
    }

    /// Approximate membership of one exact window.
    pub fn contains(&self, window: &[u8]) -> bool {
        self.lengths.contains(&window.len()) && self.probes(window).all(|i| self.words[i / 64] & (1 << (i % 64)) != 0)
    }

    /// First payload window (shortest length first, then leftmost) that tests positive.
    pub fn scan<'p>(&self, payload: &'p [u8]) -> Option<&'p [u8]> {
        self.lengths
            .iter()
            .filter(|&&len| len <= payload.len())
            .find_map(|&len| payload.windows(len).find(|w| self.contains(w)))
    }

    pub fn size_bits(&self) -> usize {
        self.bits
    }

    pub fn hash_count(&self) -> u32 {
        self.hashes
    }

    pub fn signature_count(&self) -> usize {
        self.signature_count
    }

    pub fn target_fpr(&self) -> f64 {
        self.target_fpr
    }

    pub fn window_lengths(&self) -> impl Iterator<Item = usize> + '_ {
        self.lengths.iter().copied()
    }
}

pub fn compress_signatures<S: AsRef<[u8]>>(signatures: &[S], target_fpr: f64) -> Result<CompressedSignatureDb, DbError> {
    if signatures.is_empty() {
        return Err(DbError::EmptySignatureSet);
    }
    let mut db = CompressedSignatureDb::with_capacity(signatures.len(), target_fpr)?;
    for s in signatures {
        db.insert(s.as_ref())?;
    }
    Ok(db)
}
