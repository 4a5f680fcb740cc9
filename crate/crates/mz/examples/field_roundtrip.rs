//! Grid fields: construction, the FLD1 file format, finite-difference
//! operator application and discrete integrals.
//!
//! Run with: cargo run --release --example field_roundtrip

use mz::convex::ConvexBody;
use mz::field::{apply_operator, l1_dist_integral, read_field, write_field, Boundary, Grid, GridField, HomogeneousOperator};

fn main() -> mz::Result<()> {
    let grid = Grid::cube(2, 65, 1.0, Boundary::Extend)?;
    let u = GridField::from_fn(grid, 1, |x, out| {
        out[0] = (2.0 * x[0] - x[1]).sin() + 0.5 * x[0] * x[1]
    });

    let path = std::env::temp_dir().join("mz_example_field.fld");
    write_field(&path, &u)?;
    let back = read_field(&path)?;
    assert_eq!(u.data, back.data);
    println!("FLD1 round trip: {} nodes, payload identical", back.grid.node_count());

    let grad = HomogeneousOperator::gradient(2);
    let g = apply_operator(&grad, &u)?;
    println!("gradient field components: {}", g.components);

    let k = ConvexBody::ball(vec![0.0, 0.0], 1.0);
    let (raw, lambda) = l1_dist_integral(&g, &k)?;
    println!("distance mass of Du against the unit ball: raw {raw:.6}, normalized {lambda:.6}");
    std::fs::remove_file(&path).ok();
    Ok(())
}
