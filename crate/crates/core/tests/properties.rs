use d2rnn::backprop::relative_error;
use d2rnn::cells::dos;
use d2rnn::numerics::{pca_fit, softmax, Matrix, Vector};
use proptest::prelude::*;

fn vector(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0..50.0f64, len)
}

proptest! {
    #[test]
    fn softmax_is_shift_invariant(v in prop::collection::vec(-30.0..30.0f64, 1..8), c in -100.0..100.0f64) {
        let p = softmax(&Vector::from(v.clone())).unwrap();
        let q = softmax(&v.iter().map(|x| x + c).collect()).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, b) in p.iter().zip(q.iter()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn matvec_distributes_over_addition((rows, cols) in (1usize..6, 1usize..6), seed in any::<u64>()) {
        let mut rng = d2rnn::numerics::Rng::new(seed);
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.uniform(-3.0, 3.0)).collect() };
        let m = Matrix::from_vec(rows, cols, draw(rows * cols)).unwrap();
        let a = Vector::from(draw(cols));
        let b = Vector::from(draw(cols));
        let lhs = m.matvec(&a.add(&b).unwrap()).unwrap();
        let rhs = m.matvec(&a).unwrap().add(&m.matvec(&b).unwrap()).unwrap();
        for (x, y) in lhs.iter().zip(rhs.iter()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let t = m.transpose();
        prop_assert_eq!(t.tr_matvec(&a).unwrap(), m.matvec(&a).unwrap());
    }

    #[test]
    fn dos_is_linear(a in vector(3), b in vector(3), c in vector(3), k in -4.0..4.0f64, order in 0usize..4) {
        let (a, b, c) = (Vector::from(a), Vector::from(b), Vector::from(c));
        let lagged = [&b, &c];
        let sum = dos(order, &a.add(&b).unwrap(), &[&b.add(&c).unwrap(), &c.add(&a).unwrap()]);
        let parts = dos(order, &a, &[&c, &a]).add(&dos(order, &b, &lagged)).unwrap();
        for (x, y) in sum.iter().zip(parts.iter()) {
            prop_assert!((x - y).abs() < 1e-9);
        }
        let scaled = dos(order, &a.scale(k), &[&b.scale(k), &c.scale(k)]);
        for (x, y) in scaled.iter().zip(dos(order, &a, &lagged).iter()) {
            prop_assert!((x - k * y).abs() < 1e-9);
        }
    }

    #[test]
    fn relative_error_is_symmetric_and_bounded(a in -1e3..1e3f64, n in -1e3..1e3f64) {
        let e = relative_error(a, n);
        prop_assert_eq!(e, relative_error(n, a));
        prop_assert!((0.0..=2.0).contains(&e));
    }

    #[test]
    fn argmax_prefers_lowest_index(v in prop::collection::vec(-5i32..5, 1..10)) {
        let x: Vector = v.iter().map(|&i| i as f64).collect();
        let best = *v.iter().max().unwrap();
        prop_assert_eq!(x.argmax(), v.iter().position(|&i| i == best));
    }

    #[test]
    fn pca_basis_is_orthonormal(seed in any::<u64>(), dim in 2usize..6, energy in 0.5..1.0f64) {
        let mut rng = d2rnn::numerics::Rng::new(seed);
        let samples: Vec<Vector> = (0..30)
            .map(|_| (0..dim).map(|d| rng.normal() * (d + 1) as f64).collect())
            .collect();
        let t = pca_fit(&samples, energy).unwrap();
        let b = &t.basis;
        let gram = b.matmul(&b.transpose()).unwrap();
        for r in 0..gram.rows() {
            for c in 0..gram.cols() {
                let want = if r == c { 1.0 } else { 0.0 };
                prop_assert!((gram.get(r, c) - want).abs() <= 1e-8);
            }
        }
        prop_assert!(t.energy_retained >= energy - 1e-12);
    }
}
