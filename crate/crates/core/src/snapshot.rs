//! EULB binary snapshots.
//!
//! Layout: a 32-byte little-endian header `magic "EULB" | version u32 | nx u32 | ny u32 |
//! count u32 | reserved u32 (zero) | time f64`, then `count` blocks of `nx * ny` f64
//! samples in row-major order. Particle snapshots use `ny = 1` and four blocks
//! `(x, y, x_lift, y_lift)`.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EULB";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub nx: u32,
    pub ny: u32,
    pub time: f64,
    pub components: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn new(nx: usize, ny: usize, time: f64, components: Vec<Vec<f64>>) -> Result<Self> {
        let nx32 = u32::try_from(nx).map_err(|_| Error::Snapshot(format!("nx = {nx} too large")))?;
        let ny32 = u32::try_from(ny).map_err(|_| Error::Snapshot(format!("ny = {ny} too large")))?;
        for (k, c) in components.iter().enumerate() {
            if c.len() != nx * ny {
                return Err(Error::Snapshot(format!(
                    "component {k} has {} samples, expected {}",
                    c.len(),
                    nx * ny
                )));
            }
        }
        Ok(Self { nx: nx32, ny: ny32, time, components })
    }

    /// Four-component particle block `(x, y, x_lift, y_lift)`.
    pub fn particles(time: f64, positions: &[[f64; 2]], lifts: &[[f64; 2]]) -> Result<Self> {
        let comp = |pts: &[[f64; 2]], d: usize| pts.iter().map(|p| p[d]).collect::<Vec<_>>();
        Self::new(
            positions.len(),
            1,
            time,
            vec![comp(positions, 0), comp(positions, 1), comp(lifts, 0), comp(lifts, 1)],
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.nx as usize * self.ny as usize;
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * n * self.components.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.nx.to_le_bytes());
        out.extend_from_slice(&self.ny.to_le_bytes());
        out.extend_from_slice(&(self.components.len() as u32).to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        out.extend_from_slice(&self.time.to_le_bytes());
        for c in &self.components {
            for v in c {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)?;
        if &header[0..4] != MAGIC {
            return Err(Error::Snapshot("bad magic".into()));
        }
        let word = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
        let version = word(4);
        if version != VERSION {
            return Err(Error::Snapshot(format!("unsupported version {version}")));
        }
        let (nx, ny, count) = (word(8), word(12), word(16));
        let time = f64::from_le_bytes(header[24..32].try_into().unwrap());
        let n = nx as usize * ny as usize;
        let mut components = Vec::with_capacity(count as usize);
        let mut buf = vec![0u8; 8 * n];
        for _ in 0..count {
            r.read_exact(&mut buf)?;
            components.push(buf.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())).collect());
        }
        Ok(Self { nx, ny, time, components })
    }
}
