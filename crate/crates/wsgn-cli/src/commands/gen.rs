use std::path::Path;

use wsgn_core::datagen::{generate, write_dataset};
use wsgn_core::Result;

use crate::commands::create_dir;
use crate::config::RunConfig;

pub fn run(config: &RunConfig, out: &Path) -> Result<()> {
    let (train_split, test_split) = generate(&config.synth)?;
    create_dir(out)?;
    write_dataset(out.join("train"), &train_split)?;
    write_dataset(out.join("test"), &test_split)?;
    println!("split,videos,classes,segments");
    for dataset in [&train_split, &test_split] {
        let segments: usize = dataset.videos.iter().map(|v| v.gt_segments.len()).sum();
        println!(
            "{},{},{},{}",
            dataset.split,
            dataset.len(),
            dataset.num_classes,
            segments
        );
    }
    Ok(())
}
