//! Grid file format (little-endian):
//!
//! ```text
//! magic    8 bytes  "LFGRIDS\0"
//! version  u32      1
//! h        u32
//! k        u32      codebook size
//! count    u32
//! count x { class u32 (0xFFFF_FFFF = none), h*h x token u32 row-major }
//! ```

use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{Example, TokenGrid};
use crate::error::{Error, Result};
use crate::lgrid::GridShape;

const MAGIC: &[u8; 8] = b"LFGRIDS\0";
const VERSION: u32 = 1;

/// Class marker for grids stored without a condition.
pub const NO_CLASS: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridFile {
    pub k: usize,
    pub entries: Vec<(Option<usize>, TokenGrid)>,
}

impl GridFile {
    pub fn from_examples(k: usize, examples: &[Example]) -> Self {
        Self {
            k,
            entries: examples
                .iter()
                .map(|e| (Some(e.class), e.grid.clone()))
                .collect(),
        }
    }

    pub fn into_examples(self) -> Vec<Example> {
        self.entries
            .into_iter()
            .map(|(class, grid)| Example {
                class: class.unwrap_or(0),
                grid,
            })
            .collect()
    }
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save_grids(path: &Path, file: &GridFile) -> Result<()> {
    let h = file.entries.first().map(|(_, g)| g.side()).unwrap_or(1);
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.write_u32::<LittleEndian>(VERSION)?;
    buf.write_u32::<LittleEndian>(h as u32)?;
    buf.write_u32::<LittleEndian>(file.k as u32)?;
    buf.write_u32::<LittleEndian>(file.entries.len() as u32)?;
    for (class, grid) in &file.entries {
        if grid.side() != h {
            return Err(Error::ShapeMismatch {
                expected: format!("{h}x{h}"),
                actual: format!("{0}x{0}", grid.side()),
            });
        }
        buf.write_u32::<LittleEndian>(class.map_or(NO_CLASS, |c| c as u32))?;
        for &t in grid.tokens() {
            buf.write_u32::<LittleEndian>(t)?;
        }
    }
    write_atomic(path, &buf)
}

pub fn load_grids(path: &Path) -> Result<GridFile> {
    let bytes = fs::read(path)?;
    let corrupt = |reason: String| Error::Corrupt {
        path: path.to_path_buf(),
        reason,
    };
    let mut cur = Cursor::new(bytes.as_slice());
    let mut magic = [0u8; 8];
    cur.read_exact(&mut magic)
        .map_err(|_| corrupt("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(corrupt("bad magic".into()));
    }
    let mut header = [0u32; 4];
    for v in header.iter_mut() {
        *v = cur
            .read_u32::<LittleEndian>()
            .map_err(|_| corrupt("truncated header".into()))?;
    }
    let [version, h, k, count] = header.map(|v| v as usize);
    if version != VERSION as usize {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let shape = GridShape::new(h).map_err(|_| corrupt("zero grid side".into()))?;
    let record = h
        .checked_mul(h)
        .and_then(|n| n.checked_add(1))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| corrupt(format!("grid side {h} too large")))?;
    let remaining = bytes.len() - cur.position() as usize;
    if count.checked_mul(record) != Some(remaining) {
        return Err(corrupt(format!(
            "expected {count} records of {record} bytes, found {remaining} bytes"
        )));
    }
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let class = cur.read_u32::<LittleEndian>()?;
        let mut tokens = vec![0u32; h * h];
        cur.read_u32_into::<LittleEndian>(&mut tokens)?;
        let grid = TokenGrid::from_vec(shape, tokens)?;
        grid.validate(k).map_err(|e| corrupt(e.to_string()))?;
        entries.push(((class != NO_CLASS).then_some(class as usize), grid));
    }
    Ok(GridFile { k, entries })
}

/// Plain (ASCII) PGM with each token drawn as a `scale x scale` gray square.
pub fn write_pgm(path: &Path, grid: &TokenGrid, k: usize, scale: usize) -> Result<()> {
    let scale = scale.max(1);
    let h = grid.side();
    let side = h * scale;
    let mut out = format!("P2\n{side} {side}\n255\n");
    let denom = (k.max(2) - 1) as u64;
    for r in 0..side {
        let row: Vec<String> = (0..side)
            .map(|c| {
                let t = grid.get(r / scale, c / scale) as u64;
                (t * 255 / denom).min(255).to_string()
            })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}
