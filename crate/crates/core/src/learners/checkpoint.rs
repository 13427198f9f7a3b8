//! Flat binary network snapshots.
//!
//! Layout: 8-byte magic, u64 layer count `L`, `L + 1` u64 layer sizes,
//! `L` activation codes (one byte each), u64 parameter count, then the
//! parameters as little-endian f64.

use std::io::{Read, Write};

use super::nn::{Activation, Mlp};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SMGMLP01";

pub fn save_mlp(net: &Mlp, mut w: impl Write) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&(net.activations().len() as u64).to_le_bytes())?;
    for &s in net.sizes() {
        w.write_all(&(s as u64).to_le_bytes())?;
    }
    for a in net.activations() {
        w.write_all(&[a.code()])?;
    }
    w.write_all(&(net.n_params() as u64).to_le_bytes())?;
    for p in net.params() {
        w.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn load_mlp(mut r: impl Read) -> Result<Mlp> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let layers = read_u64(&mut r)? as usize;
    if layers == 0 || layers > 1024 {
        return Err(Error::Checkpoint(format!("implausible layer count {layers}")));
    }
    let sizes = (0..=layers)
        .map(|_| read_u64(&mut r).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let mut codes = vec![0u8; layers];
    r.read_exact(&mut codes)?;
    let activations = codes
        .into_iter()
        .map(|c| Activation::from_code(c).ok_or_else(|| Error::Checkpoint(format!("unknown activation {c}"))))
        .collect::<Result<Vec<_>>>()?;
    let n = read_u64(&mut r)? as usize;
    let expected: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    if n != expected {
        return Err(Error::Checkpoint(format!("parameter count {n}, layers imply {expected}")));
    }
    let mut params = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut b)?;
        params.push(f64::from_le_bytes(b));
    }
    Mlp::from_params(sizes, activations, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::env_rng;

    #[test]
    fn round_trip_is_bitwise() {
        let net = Mlp::with_hidden(5, &[32, 16], 7, Activation::Elu, &mut env_rng(0));
        let mut buf = Vec::new();
        save_mlp(&net, &mut buf).unwrap();
        assert_eq!(&buf[..8], CHECKPOINT_MAGIC);
        assert_eq!(buf.len(), 8 + 8 + 4 * 8 + 3 + 8 + 8 * net.n_params());
        let back = load_mlp(&buf[..]).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn rejects_corruption() {
        let net = Mlp::with_hidden(2, &[3], 1, Activation::Tanh, &mut env_rng(0));
        let mut buf = Vec::new();
        save_mlp(&net, &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(load_mlp(&bad[..]), Err(Error::Checkpoint(_))));
        assert!(load_mlp(&buf[..buf.len() - 1]).is_err());
    }
}
