//! One step of the minimally invasive safety filter on a head-on approach.

use barrier_compose::prelude::*;

fn main() -> Result<()> {
    let params = TeamParams::new(2, 2.0, 0.5, 0.15, 0.6)?;
    let tree = build_safety_certificate(&params)?;
    let filter = SafetyFilter::new(tree, ClassKappa::default(), params, ControllerGains::default());

    for gap in [1.0, 0.6, 0.4] {
        let x = EnsembleState::new(vec![[-gap / 2.0, 0.0], [gap / 2.0, 0.0]], vec![[0.45, 0.0], [-0.45, 0.0]])?;
        // both robots keep pushing toward each other
        let nominal = vec![1.0, 0.0, -1.0, 0.0];
        let (u, diag) = filter.safe_control(&x, &nominal)?;
        println!(
            "gap {gap:.1} m: B = {:.4}, u* = [{:+.3}, {:+.3}, {:+.3}, {:+.3}], modified {}, QP iterations {}",
            filter.tree.eval_value(&x)?.value,
            u[0],
            u[1],
            u[2],
            u[3],
            diag.modified,
            diag.iterations
        );
    }
    Ok(())
}
