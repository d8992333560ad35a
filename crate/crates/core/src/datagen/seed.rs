use sha2::{Digest, Sha256};

/// Sub-seed for a labeled purpose: the first eight bytes of
/// `sha256(master_le || purpose)`, little endian.
pub fn derive_seed(master: u64, purpose: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(purpose.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
