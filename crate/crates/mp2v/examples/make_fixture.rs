//! Regenerates the bundled fixture: `cargo run --example make_fixture -- <dir>`

use std::path::PathBuf;

use mp2v::io;
use mp2v::synthetic::{generate, SyntheticSpec};

fn main() -> mp2v::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "crates/mp2v/fixtures".into()));
    let corpus = generate(&SyntheticSpec {
        sessions: 500,
        categories: 8,
        items_per_category: 25,
        noise: 0.3,
        cold_fraction: 0.3,
        seed: 7,
        ..SyntheticSpec::default()
    })?;
    io::write_sessions(&dir.join("sessions.tsv"), &corpus.sessions)?;
    io::write_metadata(
        &dir.join("categories.tsv"),
        corpus.categories.iter().map(|(i, c)| (i.as_str(), c.as_str())),
    )?;
    Ok(())
}
