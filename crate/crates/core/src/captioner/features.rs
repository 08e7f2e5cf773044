//! Feature-grid ingestion.
//!
//! Binary layout (all integers little-endian): magic `CAPF`, version `u16`,
//! then records until end of file, each `name_len u16`, UTF-8 name,
//! `L u16`, `D u16`, `L·D` `f32` values row-major.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CAPF";
pub const VERSION: u16 = 1;
pub const DEFAULT_LOCATIONS: usize = 196;

/// Spatial encoder output for one image: `locations` rows of `channels` values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    pub filename: String,
    pub locations: usize,
    pub channels: usize,
    pub values: Vec<f64>,
}

impl FeatureGrid {
    pub fn new(
        filename: impl Into<String>,
        locations: usize,
        channels: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        let filename = filename.into();
        if locations == 0 || channels == 0 {
            return Err(Error::Features(format!(
                "{filename}: grid must have L, D > 0"
            )));
        }
        if values.len() != locations * channels {
            return Err(Error::Features(format!(
                "{filename}: {} values for a {locations}x{channels} grid",
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::Features(format!(
                "{filename}: non-finite feature value"
            )));
        }
        Ok(FeatureGrid {
            filename,
            locations,
            channels,
            values,
        })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.channels..(i + 1) * self.channels]
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.channels];
        for i in 0..self.locations {
            super::tensor::axpy(1.0, self.row(i), &mut m);
        }
        let n = self.locations as f64;
        m.iter_mut().for_each(|x| *x /= n);
        m
    }
}

/// Deterministic grid for `filename`: values uniform in [0, 1), drawn from a
/// generator seeded by SHA-256 of the seed and the filename.
pub fn synthetic_grid(
    filename: &str,
    seed: u64,
    locations: usize,
    channels: usize,
) -> Result<FeatureGrid> {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(filename.as_bytes());
    let key: [u8; 32] = h.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(key);
    let values = (0..locations * channels)
        .map(|_| rng.random::<f32>() as f64)
        .collect();
    FeatureGrid::new(filename, locations, channels, values)
}

pub fn write_features<W: Write>(grids: &[FeatureGrid], mut out: W) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for g in grids {
        let fits = |n: usize| u16::try_from(n).ok();
        let (Some(name_len), Some(l), Some(d)) =
            (fits(g.filename.len()), fits(g.locations), fits(g.channels))
        else {
            return Err(Error::Features(format!(
                "{}: name or shape exceeds u16",
                g.filename
            )));
        };
        buf.extend_from_slice(&name_len.to_le_bytes());
        buf.extend_from_slice(g.filename.as_bytes());
        buf.extend_from_slice(&l.to_le_bytes());
        buf.extend_from_slice(&d.to_le_bytes());
        for v in &g.values {
            buf.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    out.write_all(&buf)
        .map_err(|e| Error::io("<feature output>", e))
}

pub fn save_features(path: &Path, grids: &[FeatureGrid]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_features(grids, std::io::BufWriter::new(file))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Features(format!(
                "truncated at byte {} while reading {what}: need {n} bytes, {} left",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }
}

/// Parse a feature file; grids keyed by filename.
pub fn parse_features(bytes: &[u8]) -> Result<BTreeMap<String, FeatureGrid>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic").ok() != Some(MAGIC.as_slice()) {
        return Err(Error::Features("bad magic bytes (expected CAPF)".into()));
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(Error::Features(format!("unsupported version {version}")));
    }
    let mut grids = BTreeMap::new();
    while r.pos < bytes.len() {
        let name_len = r.u16("name length")? as usize;
        let name = std::str::from_utf8(r.take(name_len, "name")?)
            .map_err(|_| {
                Error::Features(format!(
                    "record name at byte {} is not UTF-8",
                    r.pos - name_len
                ))
            })?
            .to_string();
        let l = r.u16("locations")? as usize;
        let d = r.u16("channels")? as usize;
        let raw = r.take(l * d * 4, &format!("values of {name} ({l}x{d})"))?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        let grid = FeatureGrid::new(name.clone(), l, d, values)?;
        if grids.insert(name.clone(), grid).is_some() {
            return Err(Error::Features(format!("duplicate record `{name}`")));
        }
    }
    Ok(grids)
}

pub fn load_features(path: &Path) -> Result<BTreeMap<String, FeatureGrid>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_features(&bytes)
}

/// Where grids come from: a loaded file, or seeded synthetic generation.
#[derive(Debug, Clone)]
pub enum FeatureSource {
    Loaded(HashMap<String, FeatureGrid>),
    Synthetic {
        seed: u64,
        locations: usize,
        channels: usize,
    },
}

impl FeatureSource {
    pub fn from_path(path: &Path) -> Result<Self> {
        Ok(FeatureSource::Loaded(
            load_features(path)?.into_iter().collect(),
        ))
    }

    pub fn grid(&self, filename: &str) -> Result<FeatureGrid> {
        match self {
            FeatureSource::Loaded(map) => map
                .get(filename)
                .cloned()
                .ok_or_else(|| Error::Features(format!("no feature grid for `{filename}`"))),
            FeatureSource::Synthetic {
                seed,
                locations,
                channels,
            } => synthetic_grid(filename, *seed, *locations, *channels),
        }
    }

    /// Shape shared by every grid; errors on a mixed-shape file.
    pub fn shape(&self) -> Result<(usize, usize)> {
        match self {
            FeatureSource::Synthetic {
                locations,
                channels,
                ..
            } => Ok((*locations, *channels)),
            FeatureSource::Loaded(map) => {
                let mut shapes = map.values().map(|g| (g.locations, g.channels));
                let first = shapes
                    .next()
                    .ok_or_else(|| Error::Features("feature file has no records".into()))?;
                if shapes.any(|s| s != first) {
                    return Err(Error::Features("grids have differing shapes".into()));
                }
                Ok(first)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_identical() {
        let grids = vec![
            synthetic_grid("a.jpg", 3, 4, 5).unwrap(),
            synthetic_grid("b.jpg", 3, 2, 7).unwrap(),
        ];
        let mut buf = Vec::new();
        write_features(&grids, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"CAPF");
        assert_eq!(buf.len(), 6 + (2 + 5 + 4 + 80) + (2 + 5 + 4 + 56));
        let back = parse_features(&buf).unwrap();
        for g in &grids {
            let b = &back[&g.filename];
            assert_eq!(b.locations, g.locations);
            let same = b
                .values
                .iter()
                .zip(&g.values)
                .all(|(x, y)| x.to_bits() == y.to_bits());
            assert!(same);
        }
    }

    #[test]
    fn truncated_and_bad_magic() {
        let mut buf = Vec::new();
        write_features(&[synthetic_grid("a.jpg", 1, 3, 3).unwrap()], &mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        let err = parse_features(&buf).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
        assert!(matches!(
            parse_features(b"NOPE\x01\x00"),
            Err(Error::Features(_))
        ));
        assert!(matches!(parse_features(b"CA"), Err(Error::Features(_))));
        assert!(parse_features(b"CAPF\x01\x00").unwrap().is_empty());
    }

    #[test]
    fn synthetic_is_deterministic() {
        let a = synthetic_grid("x.jpg", 9, 4, 4).unwrap();
        assert_eq!(a, synthetic_grid("x.jpg", 9, 4, 4).unwrap());
        assert_ne!(a.values, synthetic_grid("y.jpg", 9, 4, 4).unwrap().values);
        assert_ne!(a.values, synthetic_grid("x.jpg", 10, 4, 4).unwrap().values);
        assert!(a.values.iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn grid_validation() {
        assert!(FeatureGrid::new("a", 2, 2, vec![0.0; 3]).is_err());
        assert!(FeatureGrid::new("a", 0, 2, vec![]).is_err());
        assert!(FeatureGrid::new("a", 1, 1, vec![f64::NAN]).is_err());
        let g = FeatureGrid::new("a", 2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(g.mean(), vec![2.0, 3.0]);
    }
}
