//! Mode-n products, Tucker reconstruction and the vec/Kronecker identity.

use tensor_hotspot::tensor::{frontal_slice, kron, mode_n_product, tucker_reconstruct, vectorize, Matrix, Tensor3};

fn main() -> tensor_hotspot::Result<()> {
    let core = Tensor3::from_fn([2, 2, 2], |i, j, k| (1 + i + 2 * j + 4 * k) as f64);
    let b1 = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 2.0]])?;
    let b2 = Matrix::identity(2);
    let b3 = Matrix::from_rows(&[vec![1.0, -1.0], vec![0.5, 0.5]])?;

    let t = tucker_reconstruct(&core, &b1, &b2, &b3)?;
    println!("core {:?} -> tensor {:?}", core.dims(), t.dims());

    let stepwise = mode_n_product(&mode_n_product(&mode_n_product(&core, &b1, 0)?, &b2, 1)?, &b3, 2)?;
    println!("stepwise equals Tucker form: {}", stepwise == t);

    // vec(core x1 B1 x2 B2 x3 B3) = (B1 kron B2 kron B3) vec(core)
    let k = kron(&kron(&b1, &b2), &b3);
    let via_kron = k.matvec(&vectorize(&core))?;
    let err = via_kron.iter().zip(vectorize(&t)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("max |Kronecker - Tucker| = {err:e}");

    let s = frontal_slice(&t, 1)?;
    println!("frontal slice 2 ({}x{}):", s.rows(), s.cols());
    for i in 0..s.rows() {
        println!("  {:?}", s.row(i));
    }
    Ok(())
}
