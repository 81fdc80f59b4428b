//! Index-addressed random streams.
//!
//! Every random draw in the crate comes from a stream addressed by the
//! master seed plus a path of `(label, index, sub_index)` coordinates. The
//! address is hashed with SHA-256 into a ChaCha8 key, so a stream depends
//! only on its address and never on which thread asks for it or when.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const DOMAIN_TAG: &[u8] = b"pulseaug/stream/v1";

/// One step of a stream address.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StreamCoord {
    pub label: String,
    pub index: u64,
    pub sub_index: u64,
}

/// A deterministic random stream identified by its address.
#[derive(Debug, Clone)]
pub struct SeededRng {
    master_seed: u64,
    path: Vec<StreamCoord>,
    inner: ChaCha8Rng,
}

/// Stream for `operator_index` of `sample_index` within a processing stage.
pub fn derive_rng(master_seed: u64, stage: &str, sample_index: u64, operator_index: u64) -> SeededRng {
    SeededRng::from_path(
        master_seed,
        vec![StreamCoord {
            label: stage.to_owned(),
            index: sample_index,
            sub_index: operator_index,
        }],
    )
}

impl SeededRng {
    pub fn from_path(master_seed: u64, path: Vec<StreamCoord>) -> Self {
        let inner = ChaCha8Rng::from_seed(key_for(master_seed, &path));
        Self {
            master_seed,
            path,
            inner,
        }
    }

    /// An independent child stream. The child's address extends this
    /// stream's address, so it does not depend on how many values were
    /// already drawn from the parent.
    pub fn substream(&self, label: &str, index: u64) -> SeededRng {
        let mut path = self.path.clone();
        path.push(StreamCoord {
            label: label.to_owned(),
            index,
            sub_index: 0,
        });
        SeededRng::from_path(self.master_seed, path)
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[StreamCoord] {
        &self.path
    }
}

fn key_for(master_seed: u64, path: &[StreamCoord]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(DOMAIN_TAG);
    h.update(master_seed.to_le_bytes());
    h.update((path.len() as u64).to_le_bytes());
    for c in path {
        h.update((c.label.len() as u64).to_le_bytes());
        h.update(c.label.as_bytes());
        h.update(c.index.to_le_bytes());
        h.update(c.sub_index.to_le_bytes());
    }
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    key
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
