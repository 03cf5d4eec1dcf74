//! Per-stage throughput of the full pipeline.
//!
//! cargo run --release --example bench -- [points] [repeats]
use superpoint::config::RunConfig;
use superpoint::pipeline::bench;
use superpoint::synth::bench_cloud;

fn main() -> superpoint::Result<()> {
    let mut args = std::env::args().skip(1);
    let points = args.next().and_then(|s| s.parse().ok()).unwrap_or(1_000_000);
    let repeats = args.next().and_then(|s| s.parse().ok()).unwrap_or(3);
    let cloud = bench_cloud(points, 1)?;
    let result = bench(&cloud, &RunConfig::default(), repeats)?;
    print!("{}", result.to_table());
    Ok(())
}
