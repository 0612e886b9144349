//! Grayscale portable float maps (`Pf`), little-endian, bottom row first.

use std::fs;
use std::path::Path;

use super::raster::Raster;
use crate::error::{Error, Result};

pub fn encode(raster: &Raster<f64>) -> Vec<u8> {
    let (w, h) = raster.dims();
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    for y in (0..h).rev() {
        for x in 0..w {
            out.extend_from_slice(&(raster.get(x, y) as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> std::result::Result<Raster<f64>, String> {
    // Three whitespace-separated header tokens after the magic, then exactly
    // one whitespace byte before the payload.
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        tokens.push(std::str::from_utf8(&bytes[start..pos]).map_err(|e| e.to_string())?);
    }
    pos += 1;
    match tokens[0] {
        "Pf" => {}
        "PF" => return Err("color PFM not supported for depth".into()),
        other => return Err(format!("bad magic {other:?}")),
    }
    let w: usize = tokens[1].parse().map_err(|_| "bad width")?;
    let h: usize = tokens[2].parse().map_err(|_| "bad height")?;
    let scale: f64 = tokens[3].parse().map_err(|_| "bad scale")?;
    let little = scale < 0.0;
    let payload = bytes.get(pos..).unwrap_or(&[]);
    if payload.len() < w * h * 4 {
        return Err(format!(
            "payload has {} bytes, expected {}",
            payload.len(),
            w * h * 4
        ));
    }
    let mut data = vec![0.0; w * h];
    for (k, chunk) in payload.chunks_exact(4).take(w * h).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (x, y_from_bottom) = (k % w, k / w);
        data[(h - 1 - y_from_bottom) * w + x] = v as f64;
    }
    Raster::from_vec(w, h, data).map_err(|e| e.to_string())
}

pub fn read(path: &Path) -> Result<Raster<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|reason| Error::decode(path, reason))
}

pub fn write(path: &Path, raster: &Raster<f64>) -> std::io::Result<()> {
    fs::write(path, encode(raster))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_orientation() {
        let data: Vec<f64> = (0..12).map(|k| k as f64 + 0.25).collect();
        let r = Raster::from_vec(4, 3, data).unwrap();
        let bytes = encode(&r);
        assert!(bytes.starts_with(b"Pf\n4 3\n-1.0\n"));
        // bottom row first: first stored float is node (0, 2)
        assert_eq!(&bytes[12..16], &8.25f32.to_le_bytes());
        assert_eq!(decode(&bytes).unwrap(), r);
    }

    #[test]
    fn big_endian_accepted() {
        let mut bytes = b"Pf\n1 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&2.5f32.to_be_bytes());
        assert_eq!(decode(&bytes).unwrap().get(0, 0), 2.5);
    }

    #[test]
    fn truncated_payload_rejected() {
        let bytes = b"Pf\n2 2\n-1.0\n\0\0\0\0".to_vec();
        assert!(decode(&bytes).is_err());
    }
}
