//! Regenerates the committed fixtures under `fixtures/`.
//!
//! Usage: `cargo run -p licensekit-core --example build_fixtures [out_dir]`

#[allow(dead_code)]
#[path = "../tests/common/fixtures.rs"]
mod fixtures;

use std::path::PathBuf;

fn main() -> std::io::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures"));
    fixtures::write_committed(&out)?;
    println!("fixtures written to {}", out.display());
    Ok(())
}
