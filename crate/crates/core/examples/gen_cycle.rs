//! Regenerates `data/congested_city.csv` from the synthetic leg table.

use iptm::cycle::{synthesize_congested, RoadLoad};

fn main() -> anyhow::Result<()> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/congested_city.csv");
    let cycle = synthesize_congested(&RoadLoad::default());
    cycle.write_csv(std::fs::File::create(&path)?)?;
    eprintln!(
        "wrote {} samples, mean speed {:.2} m/s, {:.1} % stopped",
        cycle.len(),
        cycle.mean_speed(),
        100.0 * cycle.stopped_fraction()
    );
    Ok(())
}
