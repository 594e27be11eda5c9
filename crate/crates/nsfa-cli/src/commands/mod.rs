pub mod ibp_draw;
pub mod metrics;
pub mod run;
pub mod simulate;
pub mod timing;

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Create `path` if needed and insist it is empty, so a manifest can claim
/// every file inside it.
pub(crate) fn ensure_fresh_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
    let occupied = fs::read_dir(path)?.next().is_some();
    if occupied {
        bail!(
            "output directory {} is not empty; pick a fresh one",
            path.display()
        );
    }
    Ok(())
}
