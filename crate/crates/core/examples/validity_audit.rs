//! Sampling audit: does every in-set state admit a control inside the
//! acceleration box?

use std::path::Path;

use barrier_compose::commands::check_scenario;
use barrier_compose::scenario::Scenario;
use barrier_compose::Result;

fn main() -> Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    for name in ["exp1_safety", "exp2_safety_connectivity", "contradictory"] {
        let scenario = Scenario::load(dir.join(format!("{name}.toml")))?;
        let report = check_scenario(&scenario, Some(1000), None)?;
        println!("{}\n", report.render());
    }
    Ok(())
}
