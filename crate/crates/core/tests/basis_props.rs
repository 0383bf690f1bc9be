mod common;

use common::oracles::*;
use common::*;
use proptest::prelude::*;
use tensor_hotspot::basis::*;
use tensor_hotspot::tensor::{kron, Matrix};

fn knot_set() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, 1..8).prop_map(|gaps| {
        let mut k = vec![1.0];
        for g in gaps {
            let last = *k.last().unwrap();
            k.push(last + g * 10.0);
        }
        k
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn matches_recursion(n in 2usize..40, knots in knot_set(), order in 1usize..6) {
        let b = bspline_basis(n, &knots, order).unwrap();
        let o = bspline_oracle(n, &knots, order);
        prop_assert_eq!((b.rows(), b.cols()), (o.rows(), o.cols()));
        prop_assert!(b.max_abs_diff(&o) < 1e-12, "diff {}", b.max_abs_diff(&o));
    }

    #[test]
    fn partition_of_unity(n in 2usize..60, knots in knot_set(), order in 1usize..6) {
        let b = bspline_basis(n, &knots, order).unwrap();
        for i in 0..n {
            let row = b.row(i);
            prop_assert!(row.iter().all(|&v| v >= 0.0), "row {:?}", row);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().filter(|&&v| v != 0.0).count() <= order + 1);
        }
    }

    #[test]
    fn structured_x_equals_kron(d in [2usize..7, 1usize..6, 2usize..9], seed in any::<u64>()) {
        let set = default_basis_set(d).unwrap();
        let f = set.smooth.factors();
        let dense = kron(&kron(&f[0], &f[1]), &f[2]);
        prop_assert!(set.x_dense().max_abs_diff(&dense) < 1e-12);
        prop_assert!(set.z_dense().is_identity());
        prop_assert!(f.iter().zip(d).all(|(m, n)| m.rows() == n && m.cols() <= n));

        let mut g = rng(seed);
        let theta = random_vec(&mut g, set.smooth.ncols(), 1.0);
        let v = random_vec(&mut g, set.smooth.nrows(), 1.0);
        let w: Vec<f64> = random_vec(&mut g, set.smooth.nrows(), 1.0).iter().map(|x| x.abs() + 0.1).collect();
        prop_assert!(max_abs_diff(&set.smooth.apply(&theta), &dense.matvec(&theta).unwrap()) < 1e-12);
        prop_assert!(max_abs_diff(&set.smooth.apply_transpose(&v), &dense.transpose().matvec(&v).unwrap()) < 1e-12);
        let gram = set.smooth.weighted_gram(&w);
        let dw = Matrix::from_fn(dense.rows(), dense.cols(), |i, j| dense.get(i, j) * w[i]);
        let want = dense.transpose().matmul(&dw).unwrap();
        prop_assert!(gram.max_abs_diff(&want) < 1e-11);
    }
}

#[test]
fn full_size_knots() {
    let set = default_basis_set([49, 10, 26]).unwrap();
    let f = set.smooth.factors();
    assert_eq!([f[0].cols(), f[1].cols(), f[2].cols()], [10, 9, 9]);
    assert_eq!(set.smooth.ncols(), 810);
    let k = equally_spaced_knots(8, KNOT_RANGE);
    assert_eq!(k, vec![1.0, 8.0, 15.0, 22.0, 29.0, 36.0, 43.0, 50.0]);
    let k = equally_spaced_knots(7, KNOT_RANGE);
    assert!((k[1] - 9.1667).abs() < 1e-4 && (k[2] - 17.3333).abs() < 1e-4);
}

#[test]
fn invalid_knots() {
    assert!(bspline_basis(5, &[1.0, 1.0, 2.0], 4).is_err());
    assert!(bspline_basis(1, &[1.0, 2.0], 4).is_err());
    assert!(bspline_basis(5, &[1.0, 2.0], 0).is_err());
}
