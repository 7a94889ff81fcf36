//! Regenerates the bundled world fixture under `data/`.

use std::path::Path;

use ruleke_core::fixtures::{generate_world, render_world, WORLD_SEED};

fn main() -> std::io::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let kb = generate_world(WORLD_SEED);
    let (triples, aliases) = render_world(&kb);
    std::fs::write(dir.join("world_kb.tsv"), triples)?;
    std::fs::write(dir.join("world_aliases.tsv"), aliases)?;
    eprintln!("{} facts, {} entities", kb.len(), kb.entities().len());
    Ok(())
}
