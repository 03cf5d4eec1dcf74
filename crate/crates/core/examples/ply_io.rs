//! Write a cloud as ASCII and binary PLY and read both back.
use superpoint::io::{read_ply, write_ply, PlyFormat};
use superpoint::synth::bench_cloud;

fn main() -> superpoint::Result<()> {
    let cloud = bench_cloud(10_000, 4)?;
    let dir = std::env::temp_dir();
    for (name, format) in [("cloud_ascii.ply", PlyFormat::Ascii), ("cloud_binary.ply", PlyFormat::BinaryLittleEndian)] {
        let path = dir.join(name);
        write_ply(&path, &cloud, format)?;
        let back = read_ply(&path)?;
        let bytes = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
        println!(
            "{name}: {bytes} bytes, positions identical: {}, labels identical: {}",
            back.positions == cloud.positions,
            back.labels == cloud.labels
        );
    }
    Ok(())
}
