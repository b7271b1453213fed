//! Binary dataset files.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic    16 bytes  "SVM-ASYM-DATA\0\0\0"
//! version  u32
//! flags    u32       bit 0: a0 block present
//! n, p     u64, u64
//! seed     u64
//! features n*p f64   row-major
//! labels   n   i8
//! a0       p   f64   only when flagged
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::dataset::Dataset;

pub const MAGIC: [u8; 16] = *b"SVM-ASYM-DATA\0\0\0";
pub const VERSION: u32 = 1;
const HAS_A0: u32 = 1;

pub fn write_dataset<W: Write>(data: &Dataset, mut w: W) -> Result<()> {
    data.validate()?;
    w.write_all(&MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let flags = if data.a0.is_some() { HAS_A0 } else { 0 };
    w.write_all(&flags.to_le_bytes())?;
    for v in [data.n as u64, data.p as u64, data.seed] {
        w.write_all(&v.to_le_bytes())?;
    }
    for x in &data.features {
        w.write_all(&x.to_le_bytes())?;
    }
    let labels: Vec<u8> = data.labels.iter().map(|&y| y as u8).collect();
    w.write_all(&labels)?;
    if let Some(a0) = &data.a0 {
        for x in a0 {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    Ok(buf)
}

fn read_f64s<R: Read>(r: &mut R, len: usize, what: &str) -> Result<Vec<f64>> {
    let bytes = len
        .checked_mul(8)
        .ok_or_else(|| Error::Format(format!("{what} block too large")))?;
    let mut buf = vec![0u8; bytes];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated {what} block: {e}")))?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

pub fn read_dataset<R: Read>(mut r: R) -> Result<Dataset> {
    if read_array::<16, _>(&mut r)? != MAGIC {
        return Err(Error::Format("not a dataset file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let flags = u32::from_le_bytes(read_array(&mut r)?);
    let n = u64::from_le_bytes(read_array(&mut r)?);
    let p = u64::from_le_bytes(read_array(&mut r)?);
    let seed = u64::from_le_bytes(read_array(&mut r)?);
    let (n, p) = match (usize::try_from(n), usize::try_from(p)) {
        (Ok(n), Ok(p)) if n.checked_mul(p).is_some() => (n, p),
        _ => return Err(Error::Format(format!("dimensions n={n}, p={p} too large"))),
    };
    let features = read_f64s(&mut r, n * p, "feature")?;
    let mut labels = vec![0u8; n];
    r.read_exact(&mut labels)
        .map_err(|e| Error::Format(format!("truncated label block: {e}")))?;
    let a0 = if flags & HAS_A0 != 0 {
        Some(read_f64s(&mut r, p, "a0")?)
    } else {
        None
    };
    let data = Dataset {
        n,
        p,
        features,
        labels: labels.into_iter().map(|b| b as i8).collect(),
        a0,
        seed,
    };
    data.validate()?;
    Ok(data)
}

pub fn save(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_dataset(data, BufWriter::new(File::create(path)?))
}

pub fn load(path: impl AsRef<Path>) -> Result<Dataset> {
    read_dataset(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lab::generate_dataset;
    use crate::models::ModelKind;

    #[test]
    fn round_trip() {
        for kind in [ModelKind::GlobalNull, ModelKind::Logistic(3.0)] {
            let d = generate_dataset(&kind, 7, 5, 3).unwrap();
            let mut buf = Vec::new();
            write_dataset(&d, &mut buf).unwrap();
            assert_eq!(&buf[..16], &MAGIC);
            assert_eq!(read_dataset(&buf[..]).unwrap(), d);
        }
    }

    #[test]
    fn corrupt_input_is_rejected() {
        let d = generate_dataset(&ModelKind::GlobalNull, 4, 3, 1).unwrap();
        let mut buf = Vec::new();
        write_dataset(&d, &mut buf).unwrap();
        assert!(read_dataset(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_dataset(&bad[..]).is_err());
        let mut bad = buf.clone();
        let last = bad.len() - 1;
        bad[last] = 7;
        assert!(matches!(read_dataset(&bad[..]), Err(Error::Format(_))));
    }
}
