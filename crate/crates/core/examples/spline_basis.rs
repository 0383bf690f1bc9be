//! Clamped cubic B-spline bases and the structured smooth design `X`.

use tensor_hotspot::basis::{bspline_basis, default_basis_set, default_knot_counts, equally_spaced_knots};

fn main() -> tensor_hotspot::Result<()> {
    let knots = equally_spaced_knots(5, (1.0, 50.0));
    let b = bspline_basis(12, &knots, 4)?;
    println!("knots {knots:?}");
    println!("basis {}x{}; rows sum to one:", b.rows(), b.cols());
    for i in 0..b.rows() {
        let row = b.row(i);
        let cells: Vec<String> = row.iter().map(|v| format!("{v:5.3}")).collect();
        println!("  {} | sum {:.15}", cells.join(" "), row.iter().sum::<f64>());
    }

    let dims = [49, 10, 26];
    let set = default_basis_set(dims)?;
    println!("default knot counts for {dims:?}: {:?}", default_knot_counts(dims));
    println!(
        "smooth design X: {} x {} (factors {:?} -> {:?}); hot-spot design Z is identity: {}",
        set.smooth.nrows(),
        set.smooth.ncols(),
        set.smooth.row_dims(),
        set.smooth.col_dims(),
        set.hotspot.is_identity()
    );
    Ok(())
}
