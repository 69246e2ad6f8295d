//! Seeded mask generation and the binary mask file.
//!
//! File layout (integers little-endian):
//!
//! ```text
//! "C2FM" | version u8 = 1 | ndims u8 | dims: ndims x u32 | seed u64
//!        | missing ratio f64 | indicator bits, storage order, LSB first
//! ```
//!
//! A set bit marks an observed entry; trailing pad bits are zero.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::ObservationMask;

const MAGIC: &[u8; 4] = b"C2FM";
const VERSION: u8 = 1;

/// How missing entries are drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskMode {
    /// Each entry is eligible independently.
    #[default]
    PerEntry,
    /// Spatial sites (first two modes) go missing with all their channels.
    PerPixel,
}

impl FromStr for MaskMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-entry" | "entry" => Ok(MaskMode::PerEntry),
            "per-pixel" | "pixel" => Ok(MaskMode::PerPixel),
            other => Err(Error::Config(format!("unknown mask mode {other:?}"))),
        }
    }
}

/// Marks exactly `floor(ratio * n)` of the `n` sampling units missing,
/// chosen uniformly without replacement.
pub fn generate_mask(
    dims: &[usize],
    ratio: f64,
    seed: u64,
    mode: MaskMode,
) -> Result<ObservationMask> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::InvalidRatio(ratio));
    }
    let full = ObservationMask::full(dims)?;
    let len = full.len();
    let (units, per_unit) = match mode {
        MaskMode::PerEntry => (len, 1),
        MaskMode::PerPixel => {
            let sites: usize = dims.iter().take(2).product();
            (sites, len / sites)
        }
    };
    let missing = (ratio * units as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut observed = vec![true; len];
    for u in sample(&mut rng, units, missing) {
        match mode {
            MaskMode::PerEntry => observed[u] = false,
            MaskMode::PerPixel => {
                for c in 0..per_unit {
                    observed[u + units * c] = false;
                }
            }
        }
    }
    ObservationMask::from_indicator(dims, observed)
}

/// A mask with the parameters it was drawn with.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskFile {
    pub seed: u64,
    pub missing_ratio: f64,
    pub mask: ObservationMask,
}

impl MaskFile {
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let dims = self.mask.dims();
        let ndims = u8::try_from(dims.len()).map_err(|_| {
            Error::MaskFormat(format!("{} modes exceed the format limit", dims.len()))
        })?;
        w.write_all(MAGIC)?;
        w.write_all(&[VERSION, ndims])?;
        for &d in dims {
            let d = u32::try_from(d)
                .map_err(|_| Error::MaskFormat(format!("dimension {d} exceeds u32")))?;
            w.write_all(&d.to_le_bytes())?;
        }
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.missing_ratio.to_le_bytes())?;
        let mut bits = vec![0u8; self.mask.len().div_ceil(8)];
        for (i, &o) in self.mask.indicator().iter().enumerate() {
            if o {
                bits[i / 8] |= 1 << (i % 8);
            }
        }
        w.write_all(&bits)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let bad = |m: &str| Error::MaskFormat(m.to_string());
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let mut cur = bytes.as_slice();
        let mut take = |n: usize| -> Result<&[u8]> {
            if cur.len() < n {
                return Err(bad("truncated header"));
            }
            let (head, rest) = cur.split_at(n);
            cur = rest;
            Ok(head)
        };
        if take(4)? != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = take(1)?[0];
        if version != VERSION {
            return Err(Error::MaskFormat(format!("unsupported version {version}")));
        }
        let ndims = take(1)?[0] as usize;
        let mut dims = Vec::with_capacity(ndims);
        for _ in 0..ndims {
            dims.push(u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize);
        }
        let seed = u64::from_le_bytes(take(8)?.try_into().unwrap());
        let missing_ratio = f64::from_le_bytes(take(8)?.try_into().unwrap());
        let len = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| bad("dims overflow"))?;
        let bits = cur;
        if bits.len() != len.div_ceil(8) {
            return Err(Error::MaskFormat(format!(
                "expected {} indicator bytes, found {}",
                len.div_ceil(8),
                bits.len()
            )));
        }
        if len % 8 != 0 && bits[len / 8] >> (len % 8) != 0 {
            return Err(bad("nonzero padding bits"));
        }
        let observed = (0..len).map(|i| bits[i / 8] >> (i % 8) & 1 == 1).collect();
        let mask = ObservationMask::from_indicator(&dims, observed)
            .map_err(|e| Error::MaskFormat(e.to_string()))?;
        Ok(Self {
            seed,
            missing_ratio,
            mask,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(fs::File::open(path)?)
    }
}
