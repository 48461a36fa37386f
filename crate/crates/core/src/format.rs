//! Geometry files.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! magic              8 bytes  "PTREEGEO"
//! format version     u16      1
//! generator version  u16 length + UTF-8 bytes
//! params             e f64, b f64, branching_angle f64 (rad), v f64,
//!                    flip_probability f64, depth u32, seed u64, golden u8
//! count              u64
//! quads              count × (8 × f64 x1 y1 x2 y2 x3 y3 x4 y4, u16 depth)
//! ```
//!
//! The JSON-lines form has a header object on the first line followed by one
//! `{"depth": k, "v": [[x, y], ...]}` object per quad. Both forms round-trip
//! exactly; transform constants are re-derived from the parameters on load.

use std::io::{self, BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::FormatError;
use crate::generator::TreeGeometry;
use crate::geometry::{Point, Quad};
use crate::math::{derive_transforms, TreeParams};

pub const MAGIC: &[u8; 8] = b"PTREEGEO";
pub const FORMAT_VERSION: u16 = 1;
pub const JSONL_FORMAT: &str = "ptree-geometry-jsonl";

/// Bytes per quad record in the binary format.
pub const QUAD_RECORD_LEN: usize = 8 * 8 + 2;

/// Incremental binary writer, usable as a streaming sink.
pub struct BinaryWriter<W: Write> {
    out: W,
    remaining: u64,
}

impl<W: Write> BinaryWriter<W> {
    pub fn new(
        mut out: W,
        params: &TreeParams,
        generator_version: &str,
        count: u64,
    ) -> io::Result<Self> {
        out.write_all(MAGIC)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes())?;
        let gv = generator_version.as_bytes();
        let len = u16::try_from(gv.len()).map_err(|_| {
            io::Error::new(io::ErrorKind::InvalidInput, "generator version too long")
        })?;
        out.write_all(&len.to_le_bytes())?;
        out.write_all(gv)?;
        for x in [
            params.e,
            params.b,
            params.branching_angle,
            params.v,
            params.flip_probability,
        ] {
            out.write_all(&x.to_le_bytes())?;
        }
        out.write_all(&params.depth.to_le_bytes())?;
        out.write_all(&params.seed.to_le_bytes())?;
        out.write_all(&[params.golden_mode as u8])?;
        out.write_all(&count.to_le_bytes())?;
        Ok(Self {
            out,
            remaining: count,
        })
    }

    pub fn push(&mut self, q: &Quad) -> io::Result<()> {
        if self.remaining == 0 {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                "more quads than declared",
            ));
        }
        self.remaining -= 1;
        let mut rec = [0u8; QUAD_RECORD_LEN];
        for (i, p) in q.vertices.iter().enumerate() {
            rec[16 * i..16 * i + 8].copy_from_slice(&p.x.to_le_bytes());
            rec[16 * i + 8..16 * i + 16].copy_from_slice(&p.y.to_le_bytes());
        }
        let depth = u16::try_from(q.depth)
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "depth exceeds u16"))?;
        rec[64..].copy_from_slice(&depth.to_le_bytes());
        self.out.write_all(&rec)
    }

    pub fn finish(mut self) -> io::Result<W> {
        if self.remaining != 0 {
            return Err(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                format!("{} declared quads never written", self.remaining),
            ));
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn write_binary<W: Write>(geometry: &TreeGeometry, out: W) -> io::Result<W> {
    let mut w = BinaryWriter::new(
        out,
        &geometry.params,
        &geometry.generator_version,
        geometry.quads.len() as u64,
    )?;
    for q in &geometry.quads {
        w.push(q)?;
    }
    w.finish()
}

pub fn to_binary_bytes(geometry: &TreeGeometry) -> Vec<u8> {
    let mut buf = Vec::with_capacity(128 + geometry.quads.len() * QUAD_RECORD_LEN);
    write_binary(geometry, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N], FormatError> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => FormatError::Malformed("truncated file".into()),
        _ => FormatError::Io(e),
    })?;
    Ok(b)
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64, FormatError> {
    Ok(f64::from_le_bytes(read_array(r)?))
}

pub fn read_binary<R: Read>(mut r: R) -> Result<TreeGeometry, FormatError> {
    let magic: [u8; 8] = read_array(&mut r)?;
    if &magic != MAGIC {
        return Err(FormatError::Magic);
    }
    let version = u16::from_le_bytes(read_array(&mut r)?);
    if version != FORMAT_VERSION {
        return Err(FormatError::Version(version));
    }
    let gv_len = u16::from_le_bytes(read_array(&mut r)?) as usize;
    let mut gv = vec![0u8; gv_len];
    r.read_exact(&mut gv)
        .map_err(|_| FormatError::Malformed("truncated generator version".into()))?;
    let generator_version = String::from_utf8(gv)
        .map_err(|_| FormatError::Malformed("generator version is not UTF-8".into()))?;

    let e = read_f64(&mut r)?;
    let b = read_f64(&mut r)?;
    let branching_angle = read_f64(&mut r)?;
    let v = read_f64(&mut r)?;
    let flip_probability = read_f64(&mut r)?;
    let depth = u32::from_le_bytes(read_array(&mut r)?);
    let seed = u64::from_le_bytes(read_array(&mut r)?);
    let golden_mode = match read_array::<1, _>(&mut r)?[0] {
        0 => false,
        1 => true,
        x => return Err(FormatError::Malformed(format!("golden flag {x}"))),
    };
    let params = TreeParams {
        e,
        b,
        branching_angle,
        v,
        depth,
        seed,
        golden_mode,
        flip_probability,
    };
    let transform_constants = derive_transforms(&params)?;

    let count = u64::from_le_bytes(read_array(&mut r)?);
    // Cap the up-front allocation; a corrupt count fails on truncation instead.
    let mut quads = Vec::with_capacity(count.min(1 << 20) as usize);
    for _ in 0..count {
        let rec: [u8; QUAD_RECORD_LEN] = read_array(&mut r)?;
        let f = |i: usize| f64::from_le_bytes(rec[8 * i..8 * i + 8].try_into().unwrap());
        let vertices = [
            Point::new(f(0), f(1)),
            Point::new(f(2), f(3)),
            Point::new(f(4), f(5)),
            Point::new(f(6), f(7)),
        ];
        let depth = u16::from_le_bytes([rec[64], rec[65]]) as u32;
        quads.push(Quad::new(vertices, depth));
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(FormatError::Malformed(
            "trailing bytes after last quad".into(),
        ));
    }
    Ok(TreeGeometry {
        quads,
        params,
        transform_constants,
        generator_version,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonlHeader {
    format: String,
    version: u16,
    generator_version: String,
    params: TreeParams,
    count: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonlQuad {
    depth: u32,
    v: [[f64; 2]; 4],
}

pub fn write_jsonl<W: Write>(geometry: &TreeGeometry, mut out: W) -> Result<W, FormatError> {
    let header = JsonlHeader {
        format: JSONL_FORMAT.to_string(),
        version: FORMAT_VERSION,
        generator_version: geometry.generator_version.clone(),
        params: geometry.params,
        count: geometry.quads.len() as u64,
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for q in &geometry.quads {
        let rec = JsonlQuad {
            depth: q.depth,
            v: q.vertices.map(|p| [p.x, p.y]),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(out)
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<TreeGeometry, FormatError> {
    let mut lines = r.lines();
    let first = lines
        .next()
        .ok_or_else(|| FormatError::Malformed("empty file".into()))??;
    let header: JsonlHeader = serde_json::from_str(&first)?;
    if header.format != JSONL_FORMAT {
        return Err(FormatError::Magic);
    }
    if header.version != FORMAT_VERSION {
        return Err(FormatError::Version(header.version));
    }
    let transform_constants = derive_transforms(&header.params)?;
    let mut quads = Vec::with_capacity(header.count.min(1 << 20) as usize);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonlQuad = serde_json::from_str(&line)?;
        quads.push(Quad::new(rec.v.map(|[x, y]| Point::new(x, y)), rec.depth));
    }
    if quads.len() as u64 != header.count {
        return Err(FormatError::Malformed(format!(
            "header declares {} quads, found {}",
            header.count,
            quads.len()
        )));
    }
    Ok(TreeGeometry {
        quads,
        params: header.params,
        transform_constants,
        generator_version: header.generator_version,
    })
}

/// Reads either format, sniffing the magic bytes.
pub fn read_any<R: BufRead>(mut r: R) -> Result<TreeGeometry, FormatError> {
    let head = r.fill_buf()?;
    if head.starts_with(MAGIC) {
        read_binary(r)
    } else {
        read_jsonl(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::grow;
    use proptest::prelude::*;

    fn sample(seed: u64) -> TreeGeometry {
        grow(&TreeParams::new(2.5, 1.3, 72.0, 1.1, 6).with_seed(seed)).unwrap()
    }

    #[test]
    fn binary_size_and_roundtrip() {
        let g = sample(3);
        let bytes = to_binary_bytes(&g);
        let header = 8 + 2 + 2 + g.generator_version.len() + 5 * 8 + 4 + 8 + 1 + 8;
        assert_eq!(bytes.len(), header + 127 * QUAD_RECORD_LEN);
        assert_eq!(read_binary(&bytes[..]).unwrap(), g);
        assert_eq!(read_any(&bytes[..]).unwrap(), g);
    }

    #[test]
    fn jsonl_roundtrip() {
        let g = sample(4);
        let buf = write_jsonl(&g, Vec::new()).unwrap();
        assert_eq!(buf.iter().filter(|&&c| c == b'\n').count(), 128);
        assert_eq!(read_jsonl(&buf[..]).unwrap(), g);
        assert_eq!(read_any(&buf[..]).unwrap(), g);
    }

    #[test]
    fn corrupt_inputs() {
        let bytes = to_binary_bytes(&sample(5));
        assert!(matches!(
            read_binary(&b"NOTATREE"[..]),
            Err(FormatError::Magic)
        ));
        assert!(matches!(
            read_binary(&bytes[..bytes.len() - 3]),
            Err(FormatError::Malformed(_))
        ));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(
            read_binary(&extra[..]),
            Err(FormatError::Malformed(_))
        ));
        let mut bad_version = bytes.clone();
        bad_version[8] = 9;
        assert!(matches!(
            read_binary(&bad_version[..]),
            Err(FormatError::Version(9))
        ));

        let text = String::from_utf8(write_jsonl(&sample(5), Vec::new()).unwrap()).unwrap();
        let cut: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(matches!(
            read_jsonl(cut.as_bytes()),
            Err(FormatError::Malformed(_))
        ));
    }

    #[test]
    fn writer_enforces_declared_count() {
        let g = sample(1);
        let mut w = BinaryWriter::new(Vec::new(), &g.params, "x", 1).unwrap();
        w.push(&g.quads[0]).unwrap();
        assert!(w.push(&g.quads[1]).is_err());
        let w = BinaryWriter::new(Vec::new(), &g.params, "x", 2).unwrap();
        assert!(w.finish().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn both_formats_roundtrip(
            e in 0.1..10.0f64, b in 1.0..10.0f64, angle in 10.0..170.0f64,
            v in 0.5..1.5f64, depth in 0u32..6, seed: u64, golden: bool,
        ) {
            let mut p = TreeParams::new(e, b, angle, v, depth).with_seed(seed);
            p.golden_mode = golden;
            let g = grow(&p).unwrap();
            prop_assert_eq!(read_binary(&to_binary_bytes(&g)[..]).unwrap(), g.clone());
            let text = write_jsonl(&g, Vec::new()).unwrap();
            prop_assert_eq!(read_jsonl(&text[..]).unwrap(), g);
        }
    }
}
