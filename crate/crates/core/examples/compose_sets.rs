//! Product nodes intersect sets, sum nodes unite them.
//!
//! Two half-planes on robot 1's x coordinate, `x > 0` and `x < 1`, give a band
//! under AND and the whole line under OR.

use barrier_compose::prelude::*;

fn half_plane(label: &str, sign: f64, offset: f64) -> BarrierTree {
    // state layout is [p1x, p1y, p2x, p2y, v1x, v1y, v2x, v2y]
    let mut w = vec![0.0; 8];
    w[0] = sign;
    BarrierTree::atom(AffineAtom::new(label, w, offset))
}

fn main() -> Result<()> {
    let right = half_plane("Bright", 1.0, 0.0);
    let left = half_plane("Bleft", -1.0, 1.0);
    let band = BarrierTree::compose_and(vec![right.clone(), left.clone()])?;
    let either = BarrierTree::compose_or(vec![right, left])?;
    println!("AND: {band}\nOR:  {either}");

    for px in [-0.5, 0.25, 0.5, 1.5] {
        let x = EnsembleState::at_rest(vec![[px, 0.0], [5.0, 5.0]]);
        let e = band.eval_value(&x)?;
        println!(
            "p1x = {px:5}: band {} (B = {:.4}, ln B = {:.4}), union {}",
            band.membership(&x)?,
            e.value,
            e.log_value,
            either.membership(&x)?
        );
    }

    // membership survives products of tiny factors because it is decided in the log domain
    let deep = BarrierTree::compose_and(
        (0..400)
            .map(|k| half_plane(&format!("B{k}"), 1.0, 0.0))
            .collect(),
    )?;
    let x = EnsembleState::at_rest(vec![[1e-3, 0.0], [5.0, 5.0]]);
    let e = deep.eval_value(&x)?;
    println!("400 factors of 1e-3: B = {:e}, ln B = {:.2}, member = {}", e.value, e.log_value, e.is_member());
    Ok(())
}
