//! Binary parameter checkpoints: the magic `MGAMSGD1`, little-endian `u32`
//! `N_h` and `N_nh`, then every parameter as a little-endian `f64` in flat
//! order.

use std::path::Path;

use mgamsgd::network::{unflatten, Architecture, NetworkParams};

use crate::CliError;

pub const MAGIC: &[u8; 8] = b"MGAMSGD1";
const HEADER_LEN: usize = 16;

pub fn encode(params: &NetworkParams) -> Vec<u8> {
    let arch = params.arch();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(arch.n_hidden as u32).to_le_bytes());
    out.extend_from_slice(&(arch.n_neurons as u32).to_le_bytes());
    for v in params.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<NetworkParams, CliError> {
    let corrupt = |msg: String| CliError::Checkpoint(msg);
    if bytes.len() < HEADER_LEN || &bytes[..8] != MAGIC {
        return Err(corrupt("missing checkpoint header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let arch = Architecture::new(word(8), word(12)).map_err(|e| corrupt(e.to_string()))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != 8 * arch.param_count() {
        return Err(corrupt(format!(
            "expected {} parameters, found {} bytes",
            arch.param_count(),
            body.len()
        )));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(corrupt("non-finite parameter".into()));
    }
    unflatten(values, arch).map_err(|e| corrupt(e.to_string()))
}

pub fn save(path: &Path, params: &NetworkParams) -> Result<(), CliError> {
    std::fs::write(path, encode(params)).map_err(|e| CliError::io(path, e))
}

pub fn load(path: &Path) -> Result<NetworkParams, CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Checkpoint(format!("{}: {e}", path.display())))?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mgamsgd::network::{forward, init_params};

    #[test]
    fn roundtrip_is_bitwise() {
        let p = init_params(Architecture::new(2, 10).unwrap(), 3);
        let q = decode(&encode(&p)).unwrap();
        assert_eq!(p, q);
        let x = [0.3, 0.7, 0.1];
        assert_eq!(
            forward(&p, x).map(f64::to_bits),
            forward(&q, x).map(f64::to_bits)
        );
    }

    #[test]
    fn header_layout() {
        let p = NetworkParams::zeros(Architecture::new(1, 2).unwrap());
        let b = encode(&p);
        assert_eq!(&b[..8], b"MGAMSGD1");
        assert_eq!(&b[8..16], &[1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(b.len(), 16 + 8 * 14);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let p = init_params(Architecture::new(1, 3).unwrap(), 1);
        let good = encode(&p);
        assert!(decode(&good[..good.len() - 1]).is_err());
        assert!(decode(b"NOTMAGIC").is_err());
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut zero_layers = good.clone();
        zero_layers[8..12].copy_from_slice(&0u32.to_le_bytes());
        assert!(decode(&zero_layers).is_err());
        let mut nan = good;
        nan[16..24].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(decode(&nan).is_err());
    }
}
