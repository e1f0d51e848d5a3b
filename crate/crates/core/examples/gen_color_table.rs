//! Regenerates the bundled color-name table from the prototype model.
//!
//! `cargo run -p keytrack-core --example gen_color_table -- <out>`

use keytrack::features::ColorNameTable;

fn main() -> std::io::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/resources/color_names.bin").to_string());
    std::fs::write(&out, ColorNameTable::prototype().to_bytes())?;
    println!("wrote {out}");
    Ok(())
}
