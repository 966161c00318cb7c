use caputo_core::mlf::{ml_eval, FractionalOrder};
use caputo_core::mlzeros::{count_zeros, find_zero, smallest_upper_zero, ZeroSearchRegion, ZERO_RESIDUAL};
use caputo_core::Complex64;

fn reference_zeros() -> Vec<(f64, Complex64)> {
    include_str!("data/zeros.csv")
        .lines()
        .skip(1)
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
            (v[0], Complex64::new(v[1], v[2]))
        })
        .collect()
}

fn order(a: f64) -> FractionalOrder {
    FractionalOrder::new(a).unwrap()
}

#[test]
fn exp_has_no_zeros_in_any_disk() {
    // α = 1 itself is not a valid order; close to it E_α behaves like exp
    let r = ZeroSearchRegion::new(Complex64::new(0.5, -0.3), 3.0, 4).unwrap();
    assert_eq!(count_zeros(order(0.99), &r).unwrap(), 0);
}

#[test]
fn half_order_counts() {
    let (_, z) = reference_zeros()[0];
    let lower = ZeroSearchRegion::new(z.conj(), 1.0, 4).unwrap();
    assert_eq!(count_zeros(order(0.5), &lower).unwrap(), 1);
    let both = ZeroSearchRegion::new(Complex64::new(z.re, 0.0), 2.5, 4).unwrap();
    assert_eq!(count_zeros(order(0.5), &both).unwrap(), 2);
}

#[test]
fn newton_matches_reference_zeros() {
    for (a, z) in reference_zeros() {
        let seed = z * Complex64::new(1.02, 0.01);
        let found = find_zero(order(a), seed).unwrap();
        assert!((found.z_star - z).norm() < 1e-9 * z.norm().max(1.0), "alpha {a}: {} vs {z}", found.z_star);
        assert!(found.residual <= ZERO_RESIDUAL);
        let mirrored = find_zero(order(a), seed.conj()).unwrap();
        assert!((mirrored.z_star - found.z_star.conj()).norm() < 1e-9);
    }
}

#[test]
fn half_order_lower_zero_from_conjugate_seed() {
    let found = find_zero(order(0.5), Complex64::new(1.3, -2.0)).unwrap();
    assert!((found.z_star - Complex64::new(1.354_810_13, -1.991_466_84)).norm() < 1e-8);
}

#[test]
fn smallest_zero_is_certified() {
    for a in [0.3, 0.5, 0.6, 0.75, 0.9] {
        let z = smallest_upper_zero(order(a)).unwrap();
        assert!(z.z_star.im > 1e-6);
        assert!(z.residual <= ZERO_RESIDUAL);
        assert!(ml_eval(order(a).ml(), z.z_star).unwrap().value.norm() <= ZERO_RESIDUAL);
        // nothing strictly inside the disk through z*
        let inner = ZeroSearchRegion::new(Complex64::new(0.0, 0.0), 0.98 * z.z_star.norm(), 4).unwrap();
        assert_eq!(count_zeros(order(a), &inner).unwrap(), 0, "alpha {a}");
        // and a small circle around it winds once
        let around = ZeroSearchRegion::new(z.z_star, 0.05 * z.z_star.norm(), 4).unwrap();
        assert!(count_zeros(order(a), &around).unwrap() >= 1);
    }
    let half = smallest_upper_zero(order(0.5)).unwrap();
    assert!((half.z_star - reference_zeros()[0].1).norm() < 1e-6);
}
