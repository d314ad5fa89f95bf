use std::fmt;

use rand::Rng;
use sha2::{Digest, Sha256};

/// Public half of a receptor: a 128-bit digest of the private half.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PublicReceptor(pub [u8; 16]);

/// Private half of a receptor: 128 random bits.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PrivateReceptor(pub [u8; 16]);

impl fmt::Debug for PublicReceptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pub:{}", hex::encode(&self.0[..4]))
    }
}

impl fmt::Debug for PrivateReceptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("priv:****")
    }
}

impl PrivateReceptor {
    pub fn public(&self) -> PublicReceptor {
        let digest = Sha256::new()
            .chain_update(b"sana/receptor/v1")
            .chain_update(self.0)
            .finalize();
        let mut out = [0u8; 16];
        out.copy_from_slice(&digest[..16]);
        PublicReceptor(out)
    }

    pub fn matches(&self, public: &PublicReceptor) -> bool {
        self.public() == *public
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Receptor {
    pub public: PublicReceptor,
    pub private: PrivateReceptor,
}

pub fn gen_receptor<R: Rng + ?Sized>(rng: &mut R) -> Receptor {
    let private = PrivateReceptor(rng.random());
    Receptor {
        public: private.public(),
        private,
    }
}
