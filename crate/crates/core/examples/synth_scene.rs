//! Generate the bundled three-class scene and save it as PLY.
//!
//! cargo run --release --example synth_scene -- [out.ply] [seed]
use superpoint::io::{write_ply, PlyFormat};
use superpoint::synth::{synth_scene, SceneSpec, QUALITY_SCENE, QUALITY_SEED};

fn main() -> superpoint::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "scene.ply".into());
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(QUALITY_SEED);

    let spec = SceneSpec::parse(QUALITY_SCENE)?;
    let cloud = synth_scene(seed, &spec)?;
    let mut per_class = vec![0usize; cloud.num_classes as usize];
    for &l in cloud.labels.as_ref().unwrap() {
        per_class[l as usize] += 1;
    }
    write_ply(&out, &cloud, PlyFormat::BinaryLittleEndian)?;
    println!("{} points written to {out}, per class {per_class:?}", cloud.len());
    Ok(())
}
