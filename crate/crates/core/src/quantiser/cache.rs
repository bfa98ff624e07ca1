//! On-disk and in-process cache of generated grids.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::Result;

use super::{
    build_gaussian_1d, build_gaussian_2d, load_grid, save_grid, QuantiserGrid, ALGORITHM_VERSION,
};

/// Environment variable overriding the cache directory.
pub const CACHE_ENV: &str = "MIXVIX_CACHE_DIR";

/// Stationarity tolerance of cached 1-D grids.
pub const TOL_1D: f64 = 1e-12;
/// Codeword movement tolerance of cached 2-D grids.
pub const TOL_2D: f64 = 1e-4;

pub fn default_cache_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os(CACHE_ENV) {
        return PathBuf::from(dir);
    }
    if let Some(dir) = std::env::var_os("XDG_CACHE_HOME") {
        return PathBuf::from(dir).join("mixvix");
    }
    if let Some(home) = std::env::var_os("HOME") {
        return PathBuf::from(home).join(".cache").join("mixvix");
    }
    std::env::temp_dir().join("mixvix")
}

type Key = (usize, usize, u64);

/// Grids keyed by `(dim, n, seed)` and the generator version. Files are
/// written once and never modified.
#[derive(Debug, Clone)]
pub struct GridCache {
    dir: PathBuf,
}

impl Default for GridCache {
    fn default() -> Self {
        Self::new(default_cache_dir())
    }
}

impl GridCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, dim: usize, n: usize, seed: u64) -> PathBuf {
        let name = if dim == 1 {
            format!("gauss1d_n{n}_v{ALGORITHM_VERSION}.grid")
        } else {
            format!("gauss2d_n{n}_s{seed}_v{ALGORITHM_VERSION}.grid")
        };
        self.dir.join(name)
    }

    pub fn gaussian_1d(&self, n: usize) -> Result<Arc<QuantiserGrid>> {
        self.get_or_build((1, n, 0), || build_gaussian_1d(n, TOL_1D))
    }

    pub fn gaussian_2d(&self, n: usize, seed: u64) -> Result<Arc<QuantiserGrid>> {
        self.get_or_build((2, n, seed), || build_gaussian_2d(n, TOL_2D, seed))
    }

    pub fn gaussian(&self, dim: usize, n: usize, seed: u64) -> Result<Arc<QuantiserGrid>> {
        if dim == 1 {
            self.gaussian_1d(n)
        } else {
            self.gaussian_2d(n, seed)
        }
    }

    fn get_or_build(
        &self,
        key: Key,
        build: impl FnOnce() -> Result<QuantiserGrid>,
    ) -> Result<Arc<QuantiserGrid>> {
        type Memo = Mutex<HashMap<(PathBuf, Key), Arc<QuantiserGrid>>>;
        static MEMO: OnceLock<Memo> = OnceLock::new();
        let memo = MEMO.get_or_init(Default::default);
        let path = self.path_for(key.0, key.1, key.2);
        // held across generation so concurrent callers build each grid once
        let mut guard = memo.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(g) = guard.get(&(path.clone(), key)) {
            return Ok(g.clone());
        }
        let grid = match load_grid(&path) {
            Ok(g) if g.dim() == key.0 && g.len() == key.1 => g,
            _ => {
                let g = build()?;
                if let Err(e) = save_grid(&g, &path) {
                    log::warn!("could not cache grid at {}: {e}", path.display());
                }
                g
            }
        };
        let grid = Arc::new(grid);
        guard.insert((path, key), grid.clone());
        Ok(grid)
    }
}
