use std::f64::consts::TAU;

use coliseum::field::{estimate_points, render_t, PointEstimate, Sampling};
use coliseum::reference;
use num_complex::Complex64;
use proptest::prelude::*;

const N: u32 = 4000;

fn sampling(seed: u64) -> Sampling {
    Sampling::new(N, 300, seed)
}

// Differences of estimates get 5 combined standard errors plus a
// few counts of slack for the all-or-nothing cases.
fn within_noise(lhs: f64, rhs: f64, variance: f64) -> bool {
    (lhs - rhs).abs() <= 5.0 * variance.sqrt() + 3.0 / N as f64
}

fn var(e: &PointEstimate) -> f64 {
    e.stderr * e.stderr
}

#[test]
fn field_pixels_equal_point_estimates() {
    let sys = reference::system();
    let grid = reference::window(40);
    let s = Sampling::new(64, 200, 9);
    let t = render_t(&sys, grid, s);
    let points: Vec<Complex64> = (0..grid.len()).map(|k| grid.point(k)).collect();
    let est = estimate_points(&sys, &points, s);
    for (k, e) in est.iter().enumerate() {
        assert_eq!(t.values[k], e.value, "pixel {k}");
        assert_eq!(t.undecided[k], e.undecided, "pixel {k}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn escape_probability_solves_the_averaging_equation(r in 0.3f64..4.6, theta in 0.0f64..TAU) {
        let sys = reference::system();
        let z = Complex64::from_polar(r, theta);
        let [h1, h2] = [reference::inner_map(), reference::outer_map()];
        let est = estimate_points(&sys, &[z, h1.eval(z), h2.eval(z)], sampling(3));
        let rhs = 0.5 * est[1].value + 0.5 * est[2].value;
        let variance = var(&est[0]) + 0.25 * (var(&est[1]) + var(&est[2]));
        prop_assert!(within_noise(est[0].value, rhs, variance), "z={z} T={} rhs={rhs}", est[0].value);
    }

    #[test]
    fn generator_order_does_not_change_the_field(r in 0.3f64..4.6, theta in 0.0f64..TAU) {
        let sys = reference::system();
        let swapped = sys.permuted(&[1, 0]).unwrap();
        let z = Complex64::from_polar(r, theta);
        let a = estimate_points(&sys, &[z], sampling(5))[0];
        let b = estimate_points(&swapped, &[z], sampling(6))[0];
        prop_assert!(within_noise(a.value, b.value, var(&a) + var(&b)), "z={z} {} vs {}", a.value, b.value);
    }
}
