//! Checkpoint bytes: magic, version, shape header, little-endian f32 weight
//! blob, then the observation-statistics block. File IO lives in the std
//! companion crate; this module only shapes bytes.

use super::net::NetConfig;
use super::PolicyParams;
use crate::env::RunningStats;
use alloc::vec::Vec;

const MAGIC: &[u8; 4] = b"PCLK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckpointError {
    #[error("not a policy checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0} (expected {VERSION})")]
    UnsupportedVersion(u32),
    #[error("checkpoint is truncated or corrupt")]
    Truncated,
    #[error("shape fingerprint mismatch: header says {stored:#018x}, shape hashes to {computed:#018x}")]
    FingerprintMismatch { stored: u64, computed: u64 },
    #[error("checkpoint shape {got:?} does not fit the requested ({expected:?})")]
    ShapeMismatch { expected: (usize, usize), got: (usize, usize) },
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn shape_fingerprint(cfg: &NetConfig) -> u64 {
    let mut bytes = Vec::new();
    for v in [cfg.obs_dim, cfg.n_actions, cfg.recurrent_dim] {
        bytes.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for d in cfg.pi_dims.iter().chain(cfg.vf_dims.iter()) {
        bytes.extend_from_slice(&(*d as u64).to_le_bytes());
    }
    fnv1a64(&bytes)
}

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32(&mut self, v: f32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn dims(&mut self, dims: &[usize]) {
        self.u32(dims.len() as u32);
        for d in dims {
            self.u32(*d as u32);
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.bytes.len() {
            return Err(CheckpointError::Truncated);
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f32(&mut self) -> Result<f32, CheckpointError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn dims(&mut self) -> Result<Vec<usize>, CheckpointError> {
        let n = self.u32()? as usize;
        if n > 64 {
            return Err(CheckpointError::Truncated);
        }
        (0..n).map(|_| Ok(self.u32()? as usize)).collect()
    }
}

/// Serializes a policy. Weights are stored as 32-bit floats; parameters that
/// are f32-representable round-trip bit-exactly (see
/// [`PolicyParams::quantize_to_f32`]).
pub fn save_policy(policy: &PolicyParams) -> Vec<u8> {
    let cfg = policy.config();
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION);
    w.u64(shape_fingerprint(cfg));
    w.u32(cfg.obs_dim as u32);
    w.u32(cfg.n_actions as u32);
    w.u32(cfg.recurrent_dim as u32);
    w.dims(&cfg.pi_dims);
    w.dims(&cfg.vf_dims);
    w.u64(policy.raw().len() as u64);
    for p in policy.raw() {
        w.f32(*p as f32);
    }
    let stats = policy.stats();
    w.u64(stats.count());
    w.u32(stats.dim() as u32);
    for m in stats.mean() {
        w.f64(*m);
    }
    for v in stats.variance() {
        w.f64(v);
    }
    w.0
}

pub fn load_policy(bytes: &[u8]) -> Result<PolicyParams, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let stored = r.u64()?;
    let config = NetConfig {
        obs_dim: r.u32()? as usize,
        n_actions: r.u32()? as usize,
        recurrent_dim: r.u32()? as usize,
        pi_dims: r.dims()?,
        vf_dims: r.dims()?,
    };
    let computed = shape_fingerprint(&config);
    if stored != computed {
        return Err(CheckpointError::FingerprintMismatch { stored, computed });
    }
    let n_params = r.u64()? as usize;
    let expected = super::net::Layout::new(&config).total;
    if n_params != expected {
        return Err(CheckpointError::Truncated);
    }
    let mut params = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        params.push(r.f32()? as f64);
    }
    let count = r.u64()?;
    let dim = r.u32()? as usize;
    if dim != config.obs_dim {
        return Err(CheckpointError::Truncated);
    }
    let mut mean = Vec::with_capacity(dim);
    for _ in 0..dim {
        mean.push(r.f64()?);
    }
    let mut variance = Vec::with_capacity(dim);
    for _ in 0..dim {
        variance.push(r.f64()?);
    }
    let stats = RunningStats::from_moments(count, mean, variance);
    Ok(PolicyParams::new(config, params, stats))
}

/// Guards a loaded policy against an environment with a different interface.
pub fn expect_shape(
    policy: &PolicyParams,
    obs_dim: usize,
    n_actions: usize,
) -> Result<(), CheckpointError> {
    let cfg = policy.config();
    if cfg.obs_dim != obs_dim || cfg.n_actions != n_actions {
        return Err(CheckpointError::ShapeMismatch {
            expected: (obs_dim, n_actions),
            got: (cfg.obs_dim, cfg.n_actions),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn small_policy() -> PolicyParams {
        let cfg = NetConfig {
            obs_dim: 5,
            n_actions: 3,
            recurrent_dim: 4,
            pi_dims: vec![6],
            vf_dims: vec![6],
        };
        let mut p = PolicyParams::init(cfg, 42);
        let mut stats = RunningStats::new(5);
        stats.update(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        stats.update(&[2.0, 1.0, 0.0, -1.0, -2.0]);
        p.set_stats(stats);
        p
    }

    #[test]
    fn round_trip_preserves_forward_outputs() {
        let policy = small_policy();
        let bytes = save_policy(&policy);
        let loaded = load_policy(&bytes).unwrap();
        let obs = [0.3, -0.4, 1.5, 0.0, 2.0];
        let h = policy.initial_recurrent_state();
        let (l1, v1, h1) = policy.forward(&obs, &h);
        let (l2, v2, h2) = loaded.forward(&obs, &h);
        assert_eq!(l1, l2);
        assert_eq!(v1, v2);
        assert_eq!(h1, h2);
        assert_eq!(policy.stats().count(), loaded.stats().count());
        // byte-exact second save
        assert_eq!(bytes, save_policy(&loaded));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let bytes = save_policy(&small_policy());
        for cut in [0, 3, 10, bytes.len() / 2, bytes.len() - 1] {
            let err = load_policy(&bytes[..cut]).unwrap_err();
            assert!(
                matches!(err, CheckpointError::Truncated | CheckpointError::BadMagic),
                "cut {cut}: {err:?}"
            );
        }
    }

    #[test]
    fn version_and_magic_mismatches_are_refused() {
        let mut bytes = save_policy(&small_policy());
        bytes[0] = b'X';
        assert!(matches!(load_policy(&bytes), Err(CheckpointError::BadMagic)));

        let mut bytes2 = save_policy(&small_policy());
        bytes2[4] = 99;
        assert!(matches!(
            load_policy(&bytes2),
            Err(CheckpointError::UnsupportedVersion(_))
        ));
    }

    #[test]
    fn corrupted_shape_header_is_refused() {
        let mut bytes = save_policy(&small_policy());
        // obs_dim lives right after magic+version+fingerprint
        bytes[16] = 7;
        let err = load_policy(&bytes).unwrap_err();
        assert!(matches!(err, CheckpointError::FingerprintMismatch { .. }), "{err:?}");
    }

    #[test]
    fn shape_guard_rejects_wrong_interface() {
        let policy = small_policy();
        expect_shape(&policy, 5, 3).unwrap();
        assert!(matches!(
            expect_shape(&policy, 8, 3),
            Err(CheckpointError::ShapeMismatch { .. })
        ));
    }
}
