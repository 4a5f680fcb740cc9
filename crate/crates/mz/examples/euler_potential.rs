//! The second-order potential of the linearized isentropic Euler system:
//! build a state field from random potential components, verify the
//! constraint residual, and check symbol-level exactness.
//!
//! Run with: cargo run --release --example euler_potential

use mz::euler;

fn main() -> mz::Result<()> {
    let d = 3;
    println!("state components N       : {}", euler::n_components(d));
    println!("potential components     : {}", euler::potential_component_count(d));

    // Random trigonometric potential on a 12^4 periodic space-time grid.
    let report = mz::harness::run_euler_potential(d, 12, 42, None, None)?;
    println!("sup |state|              : {:.4}", report.sup_state);
    println!("sup |constraint residual|: {:.3e}", report.sup_residual);
    println!("relative residual        : {:.3e}", report.relative_residual);

    // Symbol exactness: im B(xi) = ker A(xi) at random frequencies.
    let a_op = euler::build_euler_a(d);
    let b_op = euler::build_euler_b(d)?;
    let check = euler::exactness_check(&a_op, &b_op, 50, 1e-12, 1)?;
    println!(
        "symbol ranks             : rank A = {}, rank B = {} = N - rank A, ok = {}",
        check.rank_a, check.rank_b, check.ok
    );

    // The symmetric gradient with its second-order annihilator.
    let (e_op, annihilator) = euler::symgrad_pair(3);
    let check = euler::exactness_check(&annihilator, &e_op, 50, 1e-12, 2)?;
    println!(
        "symmetric gradient pair  : composition max {:.2e}, rank e = {}, ok = {}",
        check.max_composition_norm, check.rank_b, check.ok
    );
    Ok(())
}
