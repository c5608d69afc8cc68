use super::block::{assemble_block, KernelBlock};
use super::product::ShProductTable;
use crate::error::Result;
use crate::io::container::{into_f64, into_u32, into_u64, ArrayData, Container};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

/// Tag for the harmonic, quadrature and storage conventions baked into
/// cached blocks. Bump when any of them change.
pub const CONVENTION_TAG: &str = "ylm-cs.gl-theta.csr-rowmajor.v1";

/// Hands out kernel blocks one at a time, assembling on demand and
/// optionally persisting them under a cache directory.
#[derive(Debug)]
pub struct BlockProvider {
    k_max: usize,
    table: OnceLock<Arc<ShProductTable>>,
    cache_dir: Option<PathBuf>,
}

impl BlockProvider {
    pub fn new(k_max: usize, cache_dir: Option<PathBuf>) -> Self {
        Self {
            k_max,
            table: OnceLock::new(),
            cache_dir,
        }
    }

    /// Shares an existing product table.
    pub fn with_table(table: Arc<ShProductTable>, cache_dir: Option<PathBuf>) -> Self {
        let k_max = table.l_max();
        let cell = OnceLock::new();
        let _ = cell.set(table);
        Self {
            k_max,
            table: cell,
            cache_dir,
        }
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn table(&self) -> &ShProductTable {
        self.table.get_or_init(|| Arc::new(ShProductTable::new(self.k_max)))
    }

    fn meta(&self, k1: usize, k2: usize) -> serde_json::Value {
        json!({ "k_max": self.k_max, "k1": k1, "k2": k2, "convention": CONVENTION_TAG })
    }

    pub fn cache_path(&self, k1: usize, k2: usize) -> Option<PathBuf> {
        self.cache_dir
            .as_ref()
            .map(|d| d.join(format!("kernel_K{}_{}_{}.tmcv", self.k_max, k1, k2)))
    }

    pub fn block(&self, k1: usize, k2: usize) -> Result<KernelBlock> {
        if let Some(path) = self.cache_path(k1, k2) {
            if path.exists() {
                match load_block(&path, &self.meta(k1, k2)) {
                    Ok(b) => return Ok(b),
                    Err(e) => log::warn!("ignoring cached block {}: {e}", path.display()),
                }
            }
            let b = assemble_block(k1, k2, self.table())?;
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir)?;
            }
            save_block(&b, &path, self.meta(k1, k2))?;
            return Ok(b);
        }
        assemble_block(k1, k2, self.table())
    }
}

pub fn save_block(block: &KernelBlock, path: &Path, meta: serde_json::Value) -> Result<()> {
    Container::new("kernel_block", meta)
        .with("row_ptr", ArrayData::U64(block.row_ptr.iter().map(|&v| v as u64).collect()))
        .with("cols", ArrayData::U32(block.cols.clone()))
        .with("vals", ArrayData::F64(block.vals.clone()))
        .write(path)
}

pub fn load_block(path: &Path, meta: &serde_json::Value) -> Result<KernelBlock> {
    let mut c = Container::read_expecting(path, "kernel_block", meta)?;
    let k1 = meta["k1"].as_u64().unwrap_or(0) as usize;
    let k2 = meta["k2"].as_u64().unwrap_or(0) as usize;
    let block = KernelBlock {
        k1,
        k2,
        dim1: crate::basis::index::v_block_dim(k1),
        dim2: crate::basis::index::v_block_dim(k2),
        row_ptr: into_u64(c.take("row_ptr")?)?.into_iter().map(|v| v as usize).collect(),
        cols: into_u32(c.take("cols")?)?,
        vals: into_f64(c.take("vals")?)?,
    };
    block.check_shape(k1, k2)?;
    Ok(block)
}
