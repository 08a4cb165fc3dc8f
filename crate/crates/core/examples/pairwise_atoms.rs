//! Pairwise safety and connectivity atoms and their Lie derivatives.

use barrier_compose::certificates::{connectivity_h, safety_h};
use barrier_compose::prelude::*;

fn main() -> Result<()> {
    let params = TeamParams::new(2, 2.0, 0.5, 0.15, 0.6)?;
    let x = EnsembleState::new(vec![[0.0, 0.0], [0.4, 0.1]], vec![[0.2, 0.0], [-0.1, 0.05]])?;
    println!("distance {:.4}", x.distance(0, 1));

    let (h, grad) = safety_h(&x, 0, 1, &params)?;
    println!("safety       h = {h:.6}");
    println!("  gradient     {grad:.4?}");
    let (hc, grad_c) = connectivity_h(&x, 0, 1, &params)?;
    println!("connectivity h = {hc:.6}");
    println!("  gradient     {grad_c:.4?}");

    let atom = SafetyPairAtom::new(0, 1, &params)?;
    let lin = atom.linearize(&x)?;
    println!("{}: L_f h = {:.6}, L_g h = {:.4?}", atom.label(), lin.drift, lin.control_row);
    let atom = ConnectivityPairAtom::new(0, 1, &params)?;
    let lin = atom.linearize(&x)?;
    println!("{}: L_f h = {:.6}, L_g h = {:.4?}", atom.label(), lin.drift, lin.control_row);

    // past the connectivity radius the square root is undefined and the atom reads -inf
    let far = EnsembleState::at_rest(vec![[0.0, 0.0], [0.7, 0.0]]);
    println!("at 0.7 m: connectivity h = {}", connectivity_h(&far, 0, 1, &params)?.0);
    Ok(())
}
