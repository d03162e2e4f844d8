//! Binary snapshot persistence.
//!
//! Layout (all little-endian):
//! ```text
//! magic    8 bytes  "PCFLOW01"
//! version  u32
//! n        u32
//! N        u32
//! flags    u32      bit 0: phi present
//! t        f64
//! payload  complex f64 pairs, row-major: g components then phi components
//! crc      u32      CRC-32 of the payload bytes
//! ```
//! Round trips are bit-exact.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::chart::TorusChart;
use crate::error::{Error, Result};
use crate::flow::FlowState;
use crate::metric::HermitianMetric;
use crate::tensor::TensorField;

const MAGIC: &[u8; 8] = b"PCFLOW01";
const VERSION: u32 = 1;

pub fn write_snapshot(path: &Path, state: &FlowState) -> Result<()> {
    let mut payload = Vec::new();
    push_field(&mut payload, state.metric.g());
    let mut flags = 0u32;
    if let Some(phi) = &state.phi {
        flags |= 1;
        push_field(&mut payload, phi);
    }
    let crc = crc32fast::hash(&payload);

    let mut out = Vec::with_capacity(payload.len() + 36);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(state.metric.n() as u32).to_le_bytes());
    out.extend_from_slice(&(state.metric.chart().grid() as u32).to_le_bytes());
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&state.t.to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc.to_le_bytes());

    let mut f = std::fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<FlowState> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 36 {
        return Err(Error::Format("snapshot too short".into()));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::Format("bad magic (not a PCFLOW01 snapshot)".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(8);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let n = u32_at(12) as usize;
    let grid = u32_at(16) as usize;
    let flags = u32_at(20);
    let t = f64::from_le_bytes(bytes[24..32].try_into().unwrap());

    let chart = TorusChart::new(n, grid)?;
    let points = chart.points();
    let g_values = n * n * points;
    let phi_values = if flags & 1 != 0 { n * n * points } else { 0 };
    let payload_len = (g_values + phi_values) * 16;
    let expect = 32 + payload_len + 4;
    if bytes.len() != expect {
        return Err(Error::Format(format!(
            "snapshot length {} != expected {expect}",
            bytes.len()
        )));
    }
    let payload = &bytes[32..32 + payload_len];
    let crc_stored = u32_at(32 + payload_len);
    let crc = crc32fast::hash(payload);
    if crc != crc_stored {
        return Err(Error::Format(format!(
            "payload checksum mismatch: stored {crc_stored:08x}, computed {crc:08x}"
        )));
    }

    let mut values = payload.chunks_exact(16).map(|c| {
        Complex64::new(
            f64::from_le_bytes(c[..8].try_into().unwrap()),
            f64::from_le_bytes(c[8..].try_into().unwrap()),
        )
    });
    let g_data: Vec<Complex64> = values.by_ref().take(g_values).collect();
    let g = TensorField::from_data(chart.clone(), 1, 1, g_data)?;
    let metric = HermitianMetric::new(g)?;
    let phi = if flags & 1 != 0 {
        let phi_data: Vec<Complex64> = values.take(phi_values).collect();
        Some(TensorField::from_data(chart, 2, 0, phi_data)?)
    } else {
        None
    };
    let mut state = FlowState::new(metric, phi)?;
    state.t = t;
    Ok(state)
}

fn push_field(buf: &mut Vec<u8>, f: &TensorField) {
    for v in f.data() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial::{self, DataKind, DataSpec};

    #[test]
    fn round_trip_is_bit_exact() {
        let chart = TorusChart::new(2, 8).unwrap();
        let mut spec = DataSpec::defaults(DataKind::HermitianSymplectic, 2);
        spec.epsilon = 0.02;
        let hs = initial::make_hermitian_symplectic(&chart, &spec).unwrap();
        let mut state = FlowState::from_hs(hs).unwrap();
        state.t = 0.125;

        let dir = std::env::temp_dir().join("pcflow_snap_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("s.bin");
        write_snapshot(&path, &state).unwrap();
        let back = read_snapshot(&path).unwrap();
        assert_eq!(back.t, state.t);
        assert_eq!(back.metric.g().data(), state.metric.g().data());
        assert_eq!(
            back.phi.as_ref().unwrap().data(),
            state.phi.as_ref().unwrap().data()
        );
        // writing the reloaded state reproduces the file byte for byte
        let path2 = dir.join("s2.bin");
        write_snapshot(&path2, &back).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn corrupted_payload_is_rejected() {
        let chart = TorusChart::new(2, 4).unwrap();
        let m = initial::make_flat(&chart).unwrap();
        let state = FlowState::new(m, None).unwrap();
        let dir = std::env::temp_dir().join("pcflow_snap_test2");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.bin");
        write_snapshot(&path, &state).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        std::fs::write(&path, &bytes).unwrap();
        match read_snapshot(&path) {
            // flipping a byte either breaks the checksum or (if it lands in
            // the header) the structural checks
            Err(Error::Format(_)) | Err(Error::Argument(_)) => {}
            other => panic!("expected rejection, got {:?}", other.map(|s| s.t)),
        }
    }
}
