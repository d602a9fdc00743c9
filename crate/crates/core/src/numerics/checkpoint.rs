//! Parameter checkpoints.
//!
//! Layout: an ASCII manifest, then the payload.
//!
//! ```text
//! HSICKPT1 <count>\n
//! <name> <rank> <d0> <d1> ...\n      (one line per parameter)
//! <little-endian f32 values, parameters concatenated in manifest order>
//! ```

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::params::ParamSet;
use crate::numerics::tensor::Tensor;

const MAGIC: &str = "HSICKPT1";

pub fn write_checkpoint<W: Write>(params: &ParamSet, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{MAGIC} {}", params.len())?;
    for p in params.iter() {
        write!(out, "{} {}", p.name, p.value.rank())?;
        for d in p.value.shape() {
            write!(out, " {d}")?;
        }
        writeln!(out)?;
    }
    for p in params.iter() {
        for &v in p.value.data() {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(mut input: R) -> Result<Vec<(String, Tensor)>> {
    let mut line = String::new();
    input
        .read_line(&mut line)
        .map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
    let mut head = line.split_whitespace();
    if head.next() != Some(MAGIC) {
        return Err(Error::Format("checkpoint magic missing".into()));
    }
    let count: usize = head
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format("checkpoint parameter count".into()))?;
    let mut manifest = Vec::with_capacity(count);
    for _ in 0..count {
        line.clear();
        input
            .read_line(&mut line)
            .map_err(|e| Error::Format(format!("checkpoint manifest: {e}")))?;
        let mut fields = line.split_whitespace();
        let name = fields
            .next()
            .ok_or_else(|| Error::Format("empty manifest line".into()))?
            .to_string();
        let nums: Vec<usize> = fields
            .map(|f| f.parse().map_err(|_| Error::Format(format!("bad manifest field {f:?}"))))
            .collect::<Result<_>>()?;
        let (&rank, dims) = nums
            .split_first()
            .ok_or_else(|| Error::Format(format!("manifest line for {name} has no rank")))?;
        if dims.len() != rank {
            return Err(Error::Format(format!("manifest rank mismatch for {name}")));
        }
        manifest.push((name, dims.to_vec()));
    }
    let mut out = Vec::with_capacity(count);
    for (name, shape) in manifest {
        let n: usize = shape.iter().product();
        let mut bytes = vec![0u8; n * 4];
        input.read_exact(&mut bytes).map_err(|_| Error::Length {
            expected: n,
            found: 0,
        })?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        out.push((name, Tensor::new(&shape, data)?));
    }
    Ok(out)
}

pub fn save(params: &ParamSet, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_checkpoint(params, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(std::io::BufReader::new(file))
}
