use std::collections::BTreeSet;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::receptor::{PrivateReceptor, PublicReceptor};
use super::Topic;
use crate::ids::{NodeId, StationId, SubstanceId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SealError {
    #[error("a substance needs at least one receptor")]
    EmptyReceptorSet,
}

/// An encrypted message addressed to a set of public receptors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Substance {
    pub id: SubstanceId,
    pub topic: Topic,
    pub required: BTreeSet<PublicReceptor>,
    pub ciphertext: Vec<u8>,
    pub tag: [u8; 8],
    /// Remaining station-to-station forwards.
    pub hop_ttl: u32,
    pub origin: NodeId,
    /// Station the carrying packet is addressed to; `None` for the administrator sink.
    pub recipient: Option<StationId>,
    /// Stations that already failed to open it.
    pub visited: Vec<StationId>,
}

/// Pluggable cipher behind `seal` / `try_open`. The receptor coverage check
/// happens before `open` is called, so an implementation only has to
/// reject tampered ciphertexts.
pub trait SealScheme {
    fn seal(&self, required: &BTreeSet<PublicReceptor>, nonce: u64, plaintext: &[u8]) -> (Vec<u8>, [u8; 8]);
    fn open(&self, required: &BTreeSet<PublicReceptor>, nonce: u64, ciphertext: &[u8], tag: &[u8; 8]) -> Option<Vec<u8>>;
}

/// Default scheme: SHA-256 counter-mode keystream keyed on the sorted
/// receptor set, with a truncated 64-bit integrity tag. It provides the
/// gating semantics only; it is not an asymmetric cipher.
#[derive(Clone, Copy, Debug, Default)]
pub struct KeyedStream;

impl KeyedStream {
    fn key(required: &BTreeSet<PublicReceptor>) -> [u8; 32] {
        let mut h = Sha256::new().chain_update(b"sana/substance/key/v1");
        for r in required {
            h.update(r.0);
        }
        h.finalize().into()
    }

    fn apply(key: &[u8; 32], nonce: u64, data: &[u8]) -> Vec<u8> {
        let mut out = Vec::with_capacity(data.len());
        for (block, chunk) in data.chunks(32).enumerate() {
            let pad = Sha256::new()
                .chain_update(key)
                .chain_update(nonce.to_le_bytes())
                .chain_update((block as u64).to_le_bytes())
                .finalize();
            out.extend(chunk.iter().zip(pad.iter()).map(|(b, p)| b ^ p));
        }
        out
    }

    fn tag(key: &[u8; 32], nonce: u64, plaintext: &[u8]) -> [u8; 8] {
        let digest = Sha256::new()
            .chain_update(b"sana/substance/tag/v1")
            .chain_update(key)
            .chain_update(nonce.to_le_bytes())
            .chain_update(plaintext)
            .finalize();
        let mut tag = [0u8; 8];
        tag.copy_from_slice(&digest[..8]);
        tag
    }
}

impl SealScheme for KeyedStream {
    fn seal(&self, required: &BTreeSet<PublicReceptor>, nonce: u64, plaintext: &[u8]) -> (Vec<u8>, [u8; 8]) {
        let key = Self::key(required);
        (Self::apply(&key, nonce, plaintext), Self::tag(&key, nonce, plaintext))
    }

    fn open(&self, required: &BTreeSet<PublicReceptor>, nonce: u64, ciphertext: &[u8], tag: &[u8; 8]) -> Option<Vec<u8>> {
        let key = Self::key(required);
        let plaintext = Self::apply(&key, nonce, ciphertext);
        (Self::tag(&key, nonce, &plaintext) == *tag).then_some(plaintext)
    }
}

pub fn seal(
    id: SubstanceId,
    topic: Topic,
    payload: &[u8],
    required: BTreeSet<PublicReceptor>,
    hop_ttl: u32,
    origin: NodeId,
) -> Result<Substance, SealError> {
    seal_with(&KeyedStream, id, topic, payload, required, hop_ttl, origin)
}

pub fn seal_with<S: SealScheme + ?Sized>(
    scheme: &S,
    id: SubstanceId,
    topic: Topic,
    payload: &[u8],
    required: BTreeSet<PublicReceptor>,
    hop_ttl: u32,
    origin: NodeId,
) -> Result<Substance, SealError> {
    if required.is_empty() {
        return Err(SealError::EmptyReceptorSet);
    }
    let (ciphertext, tag) = scheme.seal(&required, id.0, payload);
    Ok(Substance {
        id,
        topic,
        required,
        ciphertext,
        tag,
        hop_ttl,
        origin,
        recipient: None,
        visited: Vec::new(),
    })
}

/// Opens iff `held` covers every required receptor.
pub fn try_open(sub: &Substance, held: &[PrivateReceptor]) -> Option<Vec<u8>> {
    try_open_with(&KeyedStream, sub, held)
}

pub fn try_open_with<S: SealScheme + ?Sized>(scheme: &S, sub: &Substance, held: &[PrivateReceptor]) -> Option<Vec<u8>> {
    let publics: BTreeSet<PublicReceptor> = held.iter().map(PrivateReceptor::public).collect();
    if !sub.required.is_subset(&publics) {
        return None;
    }
    scheme.open(&sub.required, sub.id.0, &sub.ciphertext, &sub.tag)
}
