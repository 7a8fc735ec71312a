//! Writing, reloading and splitting a dataset in the text format.
//!
//! cargo run --example dataset_io -- [out_dir]

use std::path::PathBuf;

use lcm_pmrf::dataset::{
    gen_sbm, load_dataset, read_split_file, sample_split, write_dataset, write_split_file,
    TestSelection,
};

fn main() -> lcm_pmrf::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("lcm-sbm"));
    let ds = gen_sbm(120, 3, 0.15, 0.01, 42)?;
    write_dataset(&ds, &out)?;
    let back = load_dataset(&out)?;
    println!(
        "{}: {} nodes, {} edges, {} classes",
        out.display(),
        back.node_count(),
        back.graph.edge_count(),
        back.classes
    );

    let split = sample_split(&back, 5, 30, &TestSelection::Count(60), 7)?;
    let path = out.join("split.txt");
    write_split_file(&split, &path)?;
    let again = read_split_file(&path, back.node_count())?;
    println!(
        "split: {} train, {} val, {} test (reloaded {} / {} / {})",
        split.train.len(),
        split.val.len(),
        split.test.len(),
        again.train.len(),
        again.val.len(),
        again.test.len()
    );
    Ok(())
}
