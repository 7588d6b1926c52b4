//! Real affine maps: the degree/leading-coefficient shadow of a polynomial
//! system, its Cantor attractor, and the one-dimensional singular functions
//! (Cantor staircase, Lebesgue's `L_a`) given by random affine iteration.

use serde::Serialize;
use thiserror::Error;

use crate::poly::Polynomial;
use crate::rng::StreamRng;
use crate::semigroup::GeneratorSystem;

/// Default recursion depth for [`StaircaseMode::Exact`].
pub const DEFAULT_DEPTH: usize = 48;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AffineError {
    #[error("affine slope must be nonzero")]
    ZeroSlope,
    #[error("unsupported system: {0}")]
    UnsupportedSystem(String),
    #[error("probabilities must be positive, one per map, summing to 1")]
    Probabilities,
}

/// `x ↦ a·x + b` with `a ≠ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AffineMap {
    a: f64,
    b: f64,
}

impl AffineMap {
    pub fn new(a: f64, b: f64) -> Result<Self, AffineError> {
        if a == 0.0 || !a.is_finite() || !b.is_finite() {
            return Err(AffineError::ZeroSlope);
        }
        Ok(Self { a, b })
    }

    pub fn slope(&self) -> f64 {
        self.a
    }

    pub fn intercept(&self) -> f64 {
        self.b
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        self.a.mul_add(x, self.b)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &AffineMap) -> AffineMap {
        AffineMap {
            a: self.a * inner.a,
            b: self.a.mul_add(inner.b, self.b),
        }
    }

    pub fn inverse(&self) -> AffineMap {
        AffineMap {
            a: 1.0 / self.a,
            b: -self.b / self.a,
        }
    }

    /// Fixed point, `None` for slope 1.
    pub fn fixed_point(&self) -> Option<f64> {
        (self.a != 1.0).then(|| self.b / (1.0 - self.a))
    }
}

/// `x ↦ deg(g)·x + log|a(g)|` where `a(g)` is the leading coefficient.
pub fn psi(g: &Polynomial) -> AffineMap {
    AffineMap {
        a: g.degree() as f64,
        b: g.leading().norm().ln(),
    }
}

/// Contractions with a common invariant interval.
#[derive(Clone, Debug, Serialize)]
pub struct IntervalIFS {
    pub maps: Vec<AffineMap>,
    pub hull: (f64, f64),
}

impl IntervalIFS {
    /// Inverse shadows of the generators; hull spanned by their fixed points.
    pub fn from_system(sys: &GeneratorSystem) -> Self {
        let shadows: Vec<AffineMap> = sys.generators().iter().map(psi).collect();
        // x* = −log|a| / (d − 1), exactly
        let fixed: Vec<f64> = shadows.iter().map(|m| -m.b / (m.a - 1.0)).collect();
        let lo = fixed.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = fixed.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self {
            maps: shadows.iter().map(AffineMap::inverse).collect(),
            hull: (lo, hi),
        }
    }

    /// Image of `[lo, hi]` under map `j`.
    pub fn image(&self, j: usize, interval: (f64, f64)) -> (f64, f64) {
        let (p, q) = (
            self.maps[j].apply(interval.0),
            self.maps[j].apply(interval.1),
        );
        (p.min(q), p.max(q))
    }

    /// All intervals `φ_w(hull)` with `|w| = depth`, sorted by left end.
    pub fn level(&self, depth: usize) -> Vec<(f64, f64)> {
        let mut level = vec![self.hull];
        for _ in 0..depth {
            level = level
                .iter()
                .flat_map(|&iv| (0..self.maps.len()).map(move |j| (j, iv)))
                .map(|(j, iv)| self.image(j, iv))
                .collect();
        }
        level.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));
        level
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AttractorReport {
    pub hull: (f64, f64),
    pub depth: usize,
    /// Sorted endpoints of the depth-`depth` intervals.
    pub points: Vec<f64>,
    /// Open gaps between consecutive depth-`depth` intervals.
    pub gaps: Vec<(f64, f64)>,
    pub first_level: Vec<(f64, f64)>,
    pub cantor_verdict: bool,
    pub sum_inv_deg: f64,
}

fn sorted_endpoints(level: &[(f64, f64)]) -> Vec<f64> {
    let mut points: Vec<f64> = level.iter().flat_map(|&(p, q)| [p, q]).collect();
    points.sort_by(f64::total_cmp);
    points.dedup_by(|x, y| (*x - *y).abs() <= 1e-15 * (1.0 + y.abs()));
    points
}

/// Attractor of the inverse shadows, resolved to `depth` levels
/// (`m^depth` intervals).
pub fn mpsi_attractor(sys: &GeneratorSystem, depth: usize) -> AttractorReport {
    let ifs = IntervalIFS::from_system(sys);
    let mut first_level: Vec<(f64, f64)> = (0..ifs.maps.len())
        .map(|j| ifs.image(j, ifs.hull))
        .collect();
    let cantor_verdict = first_level
        .iter()
        .enumerate()
        .all(|(i, a)| first_level[i + 1..].iter().all(|b| a.1 < b.0 || b.1 < a.0));
    first_level.sort_by(|x, y| x.0.total_cmp(&y.0));
    let level = ifs.level(depth);
    let mut gaps = Vec::new();
    let mut reach = f64::NEG_INFINITY;
    for &(p, q) in &level {
        if reach.is_finite() && p > reach {
            gaps.push((reach, p));
        }
        reach = reach.max(q);
    }
    AttractorReport {
        hull: ifs.hull,
        depth,
        points: sorted_endpoints(&level),
        gaps,
        first_level,
        cantor_verdict,
        sum_inv_deg: sys.degrees().iter().map(|&d| 1.0 / d as f64).sum(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StaircaseMode {
    /// Self-similar recursion to `depth` levels.
    Exact { depth: usize },
    /// Fraction of random orbits reaching `[1, ∞)` within `max_steps`.
    MonteCarlo {
        samples: u32,
        max_steps: u32,
        seed: u64,
    },
}

impl Default for StaircaseMode {
    fn default() -> Self {
        StaircaseMode::Exact {
            depth: DEFAULT_DEPTH,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StaircaseValue {
    pub value: f64,
    /// Zero in exact mode.
    pub stderr: f64,
}

fn check_staircase(maps: &[AffineMap], probs: &[f64]) -> Result<(), AffineError> {
    if maps.len() != probs.len()
        || probs.iter().any(|&p| !(p > 0.0))
        || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(AffineError::Probabilities);
    }
    let mut fixes = [false; 2];
    for (j, m) in maps.iter().enumerate() {
        if !(m.a > 1.0) {
            return Err(AffineError::UnsupportedSystem(format!(
                "branch {} is not expanding and orientation preserving",
                j + 1
            )));
        }
        let fixed = m.fixed_point().expect("slope differs from 1");
        match () {
            _ if fixed.abs() < 1e-12 => fixes[0] = true,
            _ if (fixed - 1.0).abs() < 1e-12 => fixes[1] = true,
            _ => {
                return Err(AffineError::UnsupportedSystem(format!(
                    "branch {} fixes {fixed}, not 0 or 1",
                    j + 1
                )))
            }
        }
    }
    if fixes != [true, true] {
        return Err(AffineError::UnsupportedSystem(
            "branches must fix both 0 and 1".into(),
        ));
    }
    Ok(())
}

/// Probability that the random orbit of `x` tends to `+∞`, with branch `j`
/// chosen with probability `probs[j]` at each step.
///
/// Every branch fixes 0 or 1 and expands, so `(−∞, 0]` and `[1, ∞)` are
/// absorbing with values 0 and 1.
pub fn staircase_t(
    maps: &[AffineMap],
    probs: &[f64],
    x: f64,
    mode: StaircaseMode,
) -> Result<StaircaseValue, AffineError> {
    check_staircase(maps, probs)?;
    Ok(match mode {
        StaircaseMode::Exact { depth } => StaircaseValue {
            value: recursion(maps, probs, x, depth),
            stderr: 0.0,
        },
        StaircaseMode::MonteCarlo {
            samples,
            max_steps,
            seed,
        } => monte_carlo(maps, probs, x, samples, max_steps, seed),
    })
}

// The orbit point along a branch path is evaluated as one fused
// multiply-add of the composed path map on the original x, so branch
// decisions carry a single rounding instead of one per level.
fn recursion(maps: &[AffineMap], probs: &[f64], x: f64, depth: usize) -> f64 {
    fn go(
        maps: &[AffineMap],
        probs: &[f64],
        x: f64,
        path: AffineMap,
        weight: f64,
        left: usize,
    ) -> f64 {
        let y = path.apply(x);
        if y <= 0.0 {
            return 0.0;
        }
        if y >= 1.0 {
            return 1.0;
        }
        if left == 0 || weight < 1e-18 {
            return y;
        }
        maps.iter()
            .zip(probs)
            .map(|(m, &p)| p * go(maps, probs, x, m.compose(&path), weight * p, left - 1))
            .sum()
    }
    go(maps, probs, x, AffineMap { a: 1.0, b: 0.0 }, 1.0, depth)
}

fn monte_carlo(
    maps: &[AffineMap],
    probs: &[f64],
    x: f64,
    samples: u32,
    max_steps: u32,
    seed: u64,
) -> StaircaseValue {
    let stream = x.to_bits();
    let hits = (0..samples)
        .filter(|&s| {
            let mut rng = StreamRng::new(seed, stream, s as u64);
            let mut y = x;
            for _ in 0..max_steps {
                if y <= 0.0 {
                    return false;
                }
                if y >= 1.0 {
                    return true;
                }
                let u = rng.next_f64();
                let mut acc = 0.0;
                let j = probs.iter().position(|&p| {
                    acc += p;
                    u < acc
                });
                y = maps[j.unwrap_or(maps.len() - 1)].apply(y);
            }
            false
        })
        .count();
    let n = samples.max(1) as f64;
    let value = hits as f64 / n;
    StaircaseValue {
        value,
        stderr: (value * (1.0 - value) / n).sqrt(),
    }
}

/// `3x` and `3(x − 1) + 1`.
pub fn cantor_maps() -> Vec<AffineMap> {
    vec![AffineMap { a: 3.0, b: 0.0 }, AffineMap { a: 3.0, b: -2.0 }]
}

/// `2x` and `2(x − 1) + 1`.
pub fn lebesgue_maps() -> Vec<AffineMap> {
    vec![AffineMap { a: 2.0, b: 0.0 }, AffineMap { a: 2.0, b: -1.0 }]
}

fn fixed_point_fraction(x: f64) -> u128 {
    (x.clamp(0.0, 1.0) * 2f64.powi(64)).min(u64::MAX as f64) as u128
}

/// Cantor function from the ternary digits of `x`, read as a 64-bit
/// fixed-point fraction and expanded in exact integer arithmetic.
pub fn cantor_by_digits(x: f64) -> f64 {
    if x >= 1.0 {
        return 1.0;
    }
    let one = 1u128 << 64;
    let mut r = fixed_point_fraction(x);
    let (mut acc, mut scale) = (0.0, 1.0);
    while r != 0 && scale > 1e-300 {
        r *= 3;
        let digit = r >> 64;
        r &= one - 1;
        scale *= 0.5;
        match digit {
            0 => {}
            1 => return acc + scale,
            _ => acc += scale,
        }
    }
    acc
}

/// Lebesgue's singular function `L_a` from the binary digits of `x`.
pub fn lebesgue_by_digits(x: f64, a: f64) -> f64 {
    if x >= 1.0 {
        return 1.0;
    }
    let m = fixed_point_fraction(x) as u64;
    let (mut acc, mut scale) = (0.0, 1.0);
    for k in (0..64).rev() {
        if (m >> k) & 1 == 1 {
            acc += scale * a;
            scale *= 1.0 - a;
        } else {
            scale *= a;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;
    use crate::semigroup::build_system;
    use num_complex::Complex64;
    use proptest::prelude::*;

    const EXACT: StaircaseMode = StaircaseMode::Exact {
        depth: DEFAULT_DEPTH,
    };

    fn dyadic(rng: &mut StreamRng) -> f64 {
        (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    #[test]
    fn psi_examples() {
        let g = Polynomial::from_real(&[1.0, 0.0, -2.0, 0.0, 1.0]);
        assert_eq!(psi(&g), AffineMap { a: 4.0, b: 0.0 });
        let h = psi(&Polynomial::from_real(&[0.0, 0.0, 0.0, 0.0, 1.0 / 16.0]));
        assert_eq!(h.slope(), 4.0);
        assert!((h.intercept() + 16f64.ln()).abs() < 1e-15);
        assert!(AffineMap::new(0.0, 1.0).is_err());
    }

    fn random_poly(rng: &mut StreamRng) -> Polynomial {
        let d = 2 + rng.below(3);
        let mut c: Vec<Complex64> = (0..=d)
            .map(|_| Complex64::new(rng.next_f64() - 0.5, rng.next_f64() - 0.5))
            .collect();
        c[d] = Complex64::from_polar(0.2 + 2.0 * rng.next_f64(), 6.0 * rng.next_f64());
        Polynomial::new(c)
    }

    #[test]
    fn psi_is_a_homomorphism() {
        let mut rng = StreamRng::new(5, 0, 0);
        for _ in 0..50 {
            let (g, h) = (random_poly(&mut rng), random_poly(&mut rng));
            let lhs = psi(&g.compose(&h).unwrap());
            let rhs = psi(&g).compose(&psi(&h));
            assert_eq!(lhs.slope(), rhs.slope());
            assert!((lhs.intercept() - rhs.intercept()).abs() < 1e-12);
        }
        for _ in 0..20 {
            let chain: Vec<Polynomial> = (0..5)
                .map(|_| Polynomial::new(random_poly(&mut rng).coeffs()[..3].to_vec()))
                .collect();
            let mut composed = chain[4].clone();
            let mut shadow = psi(&chain[4]);
            for g in chain[..4].iter().rev() {
                composed = g.compose(&composed).unwrap();
                shadow = psi(g).compose(&shadow);
            }
            let direct = psi(&composed);
            assert_eq!(direct.slope(), 32.0);
            assert!(
                (direct.intercept() - shadow.intercept()).abs()
                    < 1e-10 * (1.0 + shadow.intercept().abs())
            );
        }
    }

    #[test]
    fn reference_attractor() {
        let report = mpsi_attractor(&reference::bare_system(), 6);
        let top = 64f64.ln() / 3.0;
        assert!(report.hull.0.abs() < 1e-15 && (report.hull.1 - top).abs() < 1e-15);
        let [a, b] = [report.first_level[0], report.first_level[1]];
        assert!(a.0.abs() < 1e-15 && (a.1 - top / 4.0).abs() < 1e-15);
        assert!((b.0 - 64f64.ln() / 4.0).abs() < 1e-15 && (b.1 - top).abs() < 1e-15);
        assert!(report.cantor_verdict);
        assert_eq!(report.sum_inv_deg, 0.5);
        assert_eq!(report.points.len(), 2 * 64);
        assert_eq!(report.gaps.len(), 63);
    }

    #[test]
    fn degenerate_attractors() {
        let z2 = Polynomial::from_real(&[0.0, 0.0, 1.0]);
        let tiny = Polynomial::from_real(&[1e-9, 0.0, 1.0]);
        let report = mpsi_attractor(
            &build_system(vec![z2.clone(), tiny], vec![0.5, 0.5]).unwrap(),
            3,
        );
        assert_eq!(report.sum_inv_deg, 1.0);
        assert!(!report.cantor_verdict);
        let single = mpsi_attractor(&build_system(vec![z2], vec![1.0]).unwrap(), 4);
        assert!(single.cantor_verdict);
        assert_eq!(single.points, vec![0.0]);
    }

    #[test]
    fn attractor_is_self_similar() {
        let sys = reference::bare_system();
        let ifs = IntervalIFS::from_system(&sys);
        let d = 5;
        let deep = mpsi_attractor(&sys, d).points;
        let shallow = mpsi_attractor(&sys, d - 1).points;
        for j in 0..2 {
            let piece = ifs.image(j, ifs.hull);
            let inside: Vec<f64> = deep
                .iter()
                .copied()
                .filter(|&x| x >= piece.0 - 1e-12 && x <= piece.1 + 1e-12)
                .collect();
            let mut mapped: Vec<f64> = shallow.iter().map(|&x| ifs.maps[j].apply(x)).collect();
            mapped.sort_by(f64::total_cmp);
            assert_eq!(inside.len(), mapped.len());
            assert!(inside
                .iter()
                .zip(&mapped)
                .all(|(x, y)| (x - y).abs() < 1e-12));
        }
    }

    #[test]
    fn staircase_examples() {
        let c = cantor_maps();
        let half = [0.5, 0.5];
        assert_eq!(staircase_t(&c, &half, 0.5, EXACT).unwrap().value, 0.5);
        assert!((staircase_t(&c, &half, 1.0 / 3.0, EXACT).unwrap().value - 0.5).abs() < 1e-12);
        assert_eq!(staircase_t(&c, &half, -0.2, EXACT).unwrap().value, 0.0);
        assert_eq!(staircase_t(&c, &half, 1.7, EXACT).unwrap().value, 1.0);
        let l = lebesgue_maps();
        for k in 1..10 {
            let a = k as f64 / 10.0;
            let v = staircase_t(&l, &[a, 1.0 - a], 0.5, EXACT).unwrap().value;
            assert!((v - a).abs() < 1e-15, "{a} {v}");
        }
    }

    #[test]
    fn staircase_rejects_other_systems() {
        let bad = [AffineMap { a: 3.0, b: 0.5 }, AffineMap { a: 3.0, b: -2.0 }];
        assert!(matches!(
            staircase_t(&bad, &[0.5, 0.5], 0.3, EXACT),
            Err(AffineError::UnsupportedSystem(_))
        ));
        let contracting = [AffineMap { a: 0.5, b: 0.0 }, AffineMap { a: 3.0, b: -2.0 }];
        assert!(matches!(
            staircase_t(&contracting, &[0.5, 0.5], 0.3, EXACT),
            Err(AffineError::UnsupportedSystem(_))
        ));
        let both_zero = [AffineMap { a: 3.0, b: 0.0 }, AffineMap { a: 2.0, b: 0.0 }];
        assert!(matches!(
            staircase_t(&both_zero, &[0.5, 0.5], 0.3, EXACT),
            Err(AffineError::UnsupportedSystem(_))
        ));
        assert_eq!(
            staircase_t(&cantor_maps(), &[0.5, 0.4], 0.3, EXACT),
            Err(AffineError::Probabilities)
        );
    }

    #[test]
    fn recursion_matches_digit_oracles() {
        let mut rng = StreamRng::new(11, 0, 0);
        for _ in 0..200 {
            let x = dyadic(&mut rng);
            let c = staircase_t(&cantor_maps(), &[0.5, 0.5], x, EXACT)
                .unwrap()
                .value;
            assert!((c - cantor_by_digits(x)).abs() < 1e-9, "{x}");
            let l = staircase_t(
                &lebesgue_maps(),
                &[0.3, 0.7],
                x,
                StaircaseMode::Exact { depth: 64 },
            )
            .unwrap()
            .value;
            assert!((l - lebesgue_by_digits(x, 0.3)).abs() < 1e-9, "{x}");
            let id = staircase_t(&lebesgue_maps(), &[0.5, 0.5], x, EXACT)
                .unwrap()
                .value;
            assert!((id - x).abs() < 1e-9);
        }
    }

    #[test]
    fn monte_carlo_agrees_with_recursion() {
        let mode = StaircaseMode::MonteCarlo {
            samples: 4000,
            max_steps: 200,
            seed: 3,
        };
        let mut rng = StreamRng::new(12, 0, 0);
        for _ in 0..10 {
            let x = rng.next_f64();
            let exact = staircase_t(&cantor_maps(), &[0.5, 0.5], x, EXACT)
                .unwrap()
                .value;
            let mc = staircase_t(&cantor_maps(), &[0.5, 0.5], x, mode).unwrap();
            assert!((mc.value - exact).abs() <= 4.0 * mc.stderr.max(1e-3), "{x}");
        }
    }

    proptest! {
        #[test]
        fn staircase_is_monotone(x in 0.0f64..1.0, dx in 0.0f64..0.01, a in 0.05f64..0.95) {
            let probs = [a, 1.0 - a];
            for maps in [cantor_maps(), lebesgue_maps()] {
                let lo = staircase_t(&maps, &probs, x, EXACT).unwrap().value;
                let hi = staircase_t(&maps, &probs, x + dx, EXACT).unwrap().value;
                prop_assert!(lo <= hi + 1e-12);
            }
        }
    }
}
