//! On-disk cache of convolution powers: a binary record stream
//! (u32 length, normal-form bytes, f64 mass, all little endian) plus a JSON
//! sidecar describing the entry.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use super::SparseDistribution;
use crate::error::{Error, Result};
use crate::group::Group;

pub const CACHE_ENV: &str = "HYPERWALK_CACHE";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheSidecar {
    pub group_hash: String,
    pub measure_hash: String,
    pub n: usize,
    pub prune_eps: f64,
    pub pruned_mass: f64,
    pub atoms: usize,
}

#[derive(Clone, Debug)]
pub struct DistributionCache {
    root: PathBuf,
}

impl DistributionCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DistributionCache { root: root.into() }
    }

    /// Cache rooted at `$HYPERWALK_CACHE`, if set.
    pub fn from_env() -> Option<Self> {
        std::env::var_os(CACHE_ENV).map(Self::new)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Stable key of a (group, measure, n, prune_eps) entry.
    pub fn key(group_hash: &str, measure_hash: &str, n: usize, prune_eps: f64) -> String {
        let raw = format!("{group_hash}/{measure_hash}/{n}/{:016x}", prune_eps.to_bits());
        crate::io::short_hash(raw.as_bytes())
    }

    fn paths(&self, key: &str) -> (PathBuf, PathBuf) {
        (
            self.root.join(format!("{key}.bin")),
            self.root.join(format!("{key}.json")),
        )
    }

    pub fn store(&self, group: &Group, measure_hash: &str, prune_eps: f64, dist: &SparseDistribution) -> Result<String> {
        fs::create_dir_all(&self.root)?;
        let key = Self::key(group.hash(), measure_hash, dist.step(), prune_eps);
        let (bin, side) = self.paths(&key);
        let mut w = BufWriter::new(fs::File::create(&bin)?);
        for (x, p) in dist.sorted() {
            w.write_all(&(x.len() as u32).to_le_bytes())?;
            w.write_all(x.as_bytes())?;
            w.write_all(&p.to_le_bytes())?;
        }
        w.flush()?;
        let meta = CacheSidecar {
            group_hash: group.hash().to_string(),
            measure_hash: measure_hash.to_string(),
            n: dist.step(),
            prune_eps,
            pruned_mass: dist.pruned_mass(),
            atoms: dist.len(),
        };
        fs::write(&side, serde_json::to_string_pretty(&meta)?)?;
        Ok(key)
    }

    pub fn load(&self, group: &Group, measure_hash: &str, n: usize, prune_eps: f64) -> Result<Option<SparseDistribution>> {
        let key = Self::key(group.hash(), measure_hash, n, prune_eps);
        let (bin, side) = self.paths(&key);
        if !bin.exists() || !side.exists() {
            return Ok(None);
        }
        let meta: CacheSidecar = serde_json::from_str(&fs::read_to_string(&side)?)?;
        if meta.group_hash != group.hash() || meta.measure_hash != measure_hash || meta.n != n {
            return Err(Error::Parse(format!("cache entry {key} does not match its key")));
        }
        let mut r = BufReader::new(fs::File::open(&bin)?);
        let mut masses = FxHashMap::default();
        let mut len_buf = [0u8; 4];
        loop {
            match r.read_exact(&mut len_buf) {
                Ok(()) => {}
                Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
                Err(e) => return Err(e.into()),
            }
            let len = u32::from_le_bytes(len_buf) as usize;
            let mut letters = vec![0u8; len];
            r.read_exact(&mut letters)?;
            let mut p = [0u8; 8];
            r.read_exact(&mut p)?;
            masses.insert(group.from_canonical_letters(&letters), f64::from_le_bytes(p));
        }
        if masses.len() != meta.atoms {
            return Err(Error::Parse(format!(
                "cache entry {key} holds {} atoms, sidecar says {}",
                masses.len(),
                meta.atoms
            )));
        }
        Ok(Some(SparseDistribution::from_parts(masses, meta.pruned_mass, n)))
    }
}
