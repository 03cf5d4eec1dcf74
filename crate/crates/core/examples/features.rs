//! Handcrafted point features, averaged per class.
use superpoint::features::{geometric_features, FeatureConfig};
use superpoint::synth::{synth_scene, SceneSpec, QUALITY_SCENE};

fn main() -> superpoint::Result<()> {
    let cloud = synth_scene(5, &SceneSpec::parse(QUALITY_SCENE)?)?;
    let cfg = FeatureConfig::default();
    let f = geometric_features(&cloud, &cfg)?;
    let labels = cloud.labels.as_ref().unwrap();

    let names = ["lin", "plan", "scat", "vert", "elev", "r", "g", "b"];
    print!("{:<8}", "class");
    for n in &names[..f.cols()] {
        print!("{n:>7}");
    }
    println!();
    for class in 0..cloud.num_classes {
        let rows: Vec<usize> = (0..f.rows()).filter(|&i| labels[i] == class).collect();
        print!("{class:<8}");
        for c in 0..f.cols() {
            let mean = rows.iter().map(|&i| f.get(i, c)).sum::<f64>() / rows.len() as f64;
            print!("{mean:>7.3}");
        }
        println!();
    }
    Ok(())
}
