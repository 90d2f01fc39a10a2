//! Regenerates the bundled demo and its golden image.
//!
//! cargo run -p plateink --example make_demo [DIR]

use std::path::PathBuf;

use plateink::asset_library::AssetLibrary;
use plateink::composition::load_state;
use plateink::data_model::load_dataset;
use plateink::demo;
use plateink::renderer::{render_composition, RenderSettings};

fn main() {
    let dir = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("demo"));
    demo::write_demo(&dir).expect("write demo");
    let ds = load_dataset(dir.join(demo::DATASET_FILE)).expect("load dataset");
    let (lib, _) = AssetLibrary::open(dir.join(demo::ASSETS_DIR)).expect("open assets");
    let state = load_state(dir.join(demo::STATE_FILE)).expect("load state");
    let size = demo::GOLDEN_SIZE;
    let out = render_composition(
        &state.composition,
        &ds,
        &lib,
        None,
        size,
        size,
        &RenderSettings::default(),
    )
    .expect("render");
    std::fs::write(dir.join(demo::GOLDEN_FILE), &out.png).expect("write golden");
    println!("wrote {}", dir.display());
}
