//! The two-generator reference system used throughout the tests, reports and
//! default configuration.
//!
//! `h1 = z⁴ − 2z²` is the second iterate of the basilica map `z² − 1`, and
//! `h2 = z⁴/64` is the second iterate of `z²/4`. Weights are equal.
//! `J(h2)` is the circle of radius 4 and `K(h1)` is the filled basilica.

use num_complex::Complex64;

use crate::grid::{GridSpec, RegionMask};
use crate::poly::{escape_radius, filled_julia_membership, Polynomial, VerdictKind};
use crate::semigroup::{build_system, certify_trap, Disk, GeneratorSystem, TrapRegion};

/// Radius of the circle `J(h2)`; also the positive fixed point of `h2`.
pub const OUTER_RADIUS: f64 = 4.0;
/// Positive fixed point of `z² − 1`, a repelling point of `J(h1)`.
pub const INNER_FIXED_POINT: f64 = 1.618_033_988_749_895;
/// Radius of the inner disk removed from `K(h2)` to form the annulus.
pub const HOLE_RADIUS: f64 = 0.4;

pub fn inner_map() -> Polynomial {
    Polynomial::from_real(&[0.0, 0.0, -2.0, 0.0, 1.0])
}

pub fn outer_map() -> Polynomial {
    Polynomial::from_real(&[0.0, 0.0, 0.0, 0.0, 1.0 / 64.0])
}

/// The reference system without a trap certificate.
pub fn bare_system() -> GeneratorSystem {
    build_system(vec![inner_map(), outer_map()], vec![0.5, 0.5]).expect("reference system is valid")
}

/// `D(0, 0.4) ∪ D(−1, 0.15)`: neighborhoods of the two superattracting fixed
/// points of `h1`, both mapped into `D(0, 0.4)` by `h2`.
pub fn trap_disks() -> TrapRegion {
    TrapRegion::Disks(vec![
        Disk::new(Complex64::new(0.0, 0.0), HOLE_RADIUS),
        Disk::new(Complex64::new(-1.0, 0.0), 0.15),
    ])
}

/// The reference system with its disk trap certified.
pub fn system() -> GeneratorSystem {
    let sys = bare_system();
    let cert = certify_trap(&sys, trap_disks(), 720).expect("reference trap certifies");
    sys.with_trap(cert)
}

/// Half width of the default window: `K(h2)` plus a thin border.
pub const WINDOW_HALF_WIDTH: f64 = 4.05;

/// Square `n × n` window around `K(h2)`.
pub fn window(n: usize) -> GridSpec {
    GridSpec::square(Complex64::new(0.0, 0.0), WINDOW_HALF_WIDTH, n).expect("valid window")
}

/// Raster of `K(g)` by escape-time at `n_max` iterations.
pub fn filled_julia_mask(g: &Polynomial, grid: GridSpec, n_max: u32) -> RegionMask {
    let r = escape_radius(std::slice::from_ref(g));
    RegionMask::from_fn(grid, |z| {
        filled_julia_membership(g, z, n_max, r).kind != VerdictKind::Escaped
    })
}

/// `A = K(h2) ∖ D(0, 0.4)` on `grid`.
pub fn annulus_mask(grid: GridSpec) -> RegionMask {
    RegionMask::from_fn(grid, |z| z.norm() > HOLE_RADIUS && z.norm() <= OUTER_RADIUS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_constants() {
        let h1 = inner_map();
        let h2 = outer_map();
        let phi = Complex64::new(INNER_FIXED_POINT, 0.0);
        assert!((h1.eval(phi) - phi).norm() < 1e-12);
        assert_eq!(
            h2.eval(Complex64::new(OUTER_RADIUS, 0.0)),
            Complex64::new(OUTER_RADIUS, 0.0)
        );
        assert_eq!(bare_system().escape_radius(), 128.0);
        assert!(system().trap().unwrap().margin > 0.0);
    }

    #[test]
    fn annulus_matches_escape_time_raster() {
        let grid = window(128);
        let k2 = filled_julia_mask(&outer_map(), grid, 200);
        let hole = RegionMask::from_fn(grid, |z| z.norm() <= HOLE_RADIUS);
        let a = k2.and_not(&hole).unwrap();
        let exact = annulus_mask(grid);
        let diff = a.and_not(&exact).unwrap().count() + exact.and_not(&a).unwrap().count();
        assert!(diff <= 8, "{diff}");
    }
}
