//! Raster computations driven by a generator system: Monte Carlo escape
//! probabilities, the averaging operator, Julia-set rasters, backward orbit
//! clouds and Green potentials.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::grid::{FieldMeta, GridSpec, RegionMask, ScalarField};
use crate::poly::{is_at_infinity, PolyError};
use crate::rng::StreamRng;
use crate::semigroup::{Disk, GeneratorSystem};
use crate::word::Word;

/// Consecutive steps inside the target disk needed to count as captured.
pub const TARGET_DWELL: u32 = 10;
/// Chaos-game points discarded before emission.
pub const CLOUD_BURN_IN: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("word has {available} letters, {needed} needed")]
    ShortWord { available: usize, needed: usize },
    #[error("root solve failed {0} times in a row")]
    RootSolveFailure(usize),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleOutcome {
    Escaped,
    Trapped,
    Target,
    Undecided,
}

/// Per-pixel tally of sample outcomes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Counts {
    pub escaped: u32,
    pub trapped: u32,
    pub target: u32,
    pub undecided: u32,
}

impl Counts {
    pub fn total(&self) -> u32 {
        self.escaped + self.trapped + self.target + self.undecided
    }

    fn add(&mut self, outcome: SampleOutcome) {
        match outcome {
            SampleOutcome::Escaped => self.escaped += 1,
            SampleOutcome::Trapped => self.trapped += 1,
            SampleOutcome::Target => self.target += 1,
            SampleOutcome::Undecided => self.undecided += 1,
        }
    }
}

/// Follows one random orbit from `z`.
///
/// Without a target, entering the certified trap ends the orbit. With a
/// target, the orbit runs until it has spent [`TARGET_DWELL`] consecutive
/// steps inside the target disk.
#[inline]
pub fn follow_orbit(
    sys: &GeneratorSystem,
    z: Complex64,
    n_max: u32,
    rng: &mut StreamRng,
    target: Option<&Disk>,
) -> SampleOutcome {
    let r2 = sys.escape_radius() * sys.escape_radius();
    let gens = sys.generators();
    let use_trap = target.is_none() && sys.trap().is_some();
    let mut w = z;
    let mut dwell = 0;
    for _ in 0..=n_max {
        if !(w.norm_sqr() <= r2) {
            return SampleOutcome::Escaped;
        }
        if let Some(disk) = target {
            if disk.contains(w) {
                dwell += 1;
                if dwell >= TARGET_DWELL {
                    return SampleOutcome::Target;
                }
            } else {
                dwell = 0;
            }
        } else if use_trap && sys.in_trap(w) {
            return SampleOutcome::Trapped;
        }
        w = gens[sys.pick(rng.next_f64())].eval(w);
    }
    SampleOutcome::Undecided
}

/// Sampling parameters shared by all Monte Carlo estimators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Sampling {
    pub samples: u32,
    pub n_max: u32,
    pub seed: u64,
}

impl Sampling {
    pub fn new(samples: u32, n_max: u32, seed: u64) -> Self {
        Self {
            samples: samples.max(1),
            n_max: n_max.max(1),
            seed,
        }
    }
}

/// Outcome counts at arbitrary points; the stream index is the point index.
pub fn count_points(
    sys: &GeneratorSystem,
    points: &[Complex64],
    sampling: Sampling,
    target: Option<&Disk>,
) -> Vec<Counts> {
    points
        .par_iter()
        .enumerate()
        .map(|(k, &z)| count_at(sys, z, k as u64, sampling, target))
        .collect()
}

fn count_at(
    sys: &GeneratorSystem,
    z: Complex64,
    stream: u64,
    sampling: Sampling,
    target: Option<&Disk>,
) -> Counts {
    let mut counts = Counts::default();
    for s in 0..sampling.samples {
        let mut rng = StreamRng::new(sampling.seed, stream, s as u64);
        counts.add(follow_orbit(sys, z, sampling.n_max, &mut rng, target));
    }
    counts
}

/// Outcome counts at every pixel; the stream index is the pixel index.
pub fn render_counts(
    sys: &GeneratorSystem,
    grid: GridSpec,
    sampling: Sampling,
    target: Option<&Disk>,
) -> Vec<Counts> {
    grid.map_points(|k, z| count_at(sys, z, k as u64, sampling, target))
}

fn meta(sys: &GeneratorSystem, sampling: Sampling) -> FieldMeta {
    FieldMeta {
        seed: sampling.seed,
        samples: sampling.samples,
        n_max: sampling.n_max,
        system_hash: sys.hash_hex(),
    }
}

/// Monte Carlo estimate of the escape probability at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PointEstimate {
    pub value: f64,
    pub undecided: f64,
    pub stderr: f64,
}

impl PointEstimate {
    fn from_counts(c: Counts, n: u32) -> Self {
        let n = n as f64;
        let value = c.escaped as f64 / n;
        Self {
            value,
            undecided: c.undecided as f64 / n,
            stderr: (value * (1.0 - value) / n).sqrt(),
        }
    }
}

pub fn estimate_points(
    sys: &GeneratorSystem,
    points: &[Complex64],
    sampling: Sampling,
) -> Vec<PointEstimate> {
    count_points(sys, points, sampling, None)
        .into_iter()
        .map(|c| PointEstimate::from_counts(c, sampling.samples))
        .collect()
}

/// Escape-probability field: value is the escaped fraction, undecided counts
/// against escape.
pub fn render_t(sys: &GeneratorSystem, grid: GridSpec, sampling: Sampling) -> ScalarField {
    let counts = render_counts(sys, grid, sampling, None);
    let n = sampling.samples as f64;
    ScalarField {
        grid,
        values: counts.iter().map(|c| c.escaped as f64 / n).collect(),
        undecided: counts.iter().map(|c| c.undecided as f64 / n).collect(),
        meta: meta(sys, sampling),
    }
}

/// Probability of settling in `target`: value is the captured fraction.
pub fn render_t_target(
    sys: &GeneratorSystem,
    grid: GridSpec,
    target: Disk,
    sampling: Sampling,
) -> ScalarField {
    let counts = render_counts(sys, grid, sampling, Some(&target));
    let n = sampling.samples as f64;
    ScalarField {
        grid,
        values: counts.iter().map(|c| c.target as f64 / n).collect(),
        undecided: counts.iter().map(|c| c.undecided as f64 / n).collect(),
        meta: meta(sys, sampling),
    }
}

/// One application of the averaging operator `φ ↦ Σ p_j φ∘h_j`, with bilinear
/// lookups inside the window and `boundary_value` outside it.
pub fn operator_apply(
    sys: &GeneratorSystem,
    field: &ScalarField,
    boundary_value: f64,
) -> ScalarField {
    let gens = sys.generators();
    let weights = sys.weights();
    let values = field.grid.map_points(|_, z| {
        gens.iter()
            .zip(weights)
            .map(|(g, p)| p * field.bilinear(g.eval(z)).unwrap_or(boundary_value))
            .sum::<f64>()
    });
    ScalarField {
        grid: field.grid,
        values,
        undecided: field.undecided.clone(),
        meta: field.meta.clone(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OperatorLimitReport {
    /// Sup-norm error after each iterate, over the selected pixels.
    pub errors: Vec<f64>,
    pub final_error: f64,
    /// Errors never increase over the last half of the run.
    pub eventually_decreasing: bool,
    pub pixels: usize,
}

/// Iterates the operator on `phi` and compares each iterate with
/// `T·φ(∞) + (1 − T)·φ(mu_point)`.
///
/// Only pixels where `t` has undecided fraction below `undecided_cap` enter the
/// sup norm. The limit `φ(mu_point)` is read from `phi` by interpolation.
///
/// `phi` may live on an odd refinement of `t.grid` (see [`GridSpec::refined`]);
/// the iterates are then compared at the shared pixel centers. Bilinear
/// lookups smear the field across steep parts of `T`, and a finer raster for
/// the iterates keeps that bias below the Monte Carlo noise of `t`.
pub fn operator_limit_check(
    sys: &GeneratorSystem,
    phi: &ScalarField,
    t: &ScalarField,
    phi_infinity: f64,
    mu_point: Complex64,
    steps: usize,
    undecided_cap: f64,
) -> OperatorLimitReport {
    let phi_mu = phi.bilinear(mu_point).unwrap_or(phi_infinity);
    let factor = phi
        .grid
        .refinement_of(&t.grid)
        .expect("phi on t's grid or an odd refinement of it");
    let fine_index = |k: usize| {
        let (c, r) = t.grid.col_row(k);
        (r * factor + factor / 2) * phi.grid.width + c * factor + factor / 2
    };
    let selected: Vec<usize> = (0..t.grid.len())
        .filter(|&k| t.undecided[k] < undecided_cap)
        .collect();
    let limit: Vec<f64> = t
        .values
        .iter()
        .map(|&v| v * phi_infinity + (1.0 - v) * phi_mu)
        .collect();
    let mut current = phi.clone();
    let mut errors = Vec::with_capacity(steps);
    for _ in 0..steps {
        current = operator_apply(sys, &current, phi_infinity);
        let err = selected
            .par_iter()
            .map(|&k| (current.values[fine_index(k)] - limit[k]).abs())
            .reduce(|| 0.0, f64::max);
        errors.push(err);
    }
    let tail = &errors[errors.len() / 2..];
    let eventually_decreasing = tail.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    OperatorLimitReport {
        final_error: errors.last().copied().unwrap_or(0.0),
        eventually_decreasing,
        pixels: selected.len(),
        errors,
    }
}

/// Raster Julia-set estimate: pixels whose neighborhood shows variation of
/// the escape field beyond Monte Carlo noise.
///
/// The threshold at a pixel is `4·√2·σ`, with `σ = √(T(1−T)/N)` maximized
/// over the window, so it bounds the noise of a difference of two estimates.
pub fn classify_julia(t: &ScalarField, window: usize) -> RegionMask {
    let n = t.meta.samples.max(1) as f64;
    let g = t.grid;
    let w = window as isize;
    let bits = g.map_points(|k, _| {
        let (c, r) = g.col_row(k);
        let (mut lo, mut hi, mut sigma) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
        for dr in -w..=w {
            for dc in -w..=w {
                let (cc, rr) = (c as isize + dc, r as isize + dr);
                if cc < 0 || rr < 0 || cc >= g.width as isize || rr >= g.height as isize {
                    continue;
                }
                let v = t.get(cc as usize, rr as usize);
                lo = lo.min(v);
                hi = hi.max(v);
                sigma = sigma.max((v * (1.0 - v) / n).sqrt());
            }
        }
        hi - lo > 4.0 * std::f64::consts::SQRT_2 * sigma
    });
    RegionMask { grid: g, bits }
}

/// Backward chaos game: at each step pick `h_j` by weight and move to a
/// uniformly chosen solution of `h_j(ζ) = current`.
///
/// Failed root solves restart the walk at the seed point; emission resumes
/// after a fresh burn-in.
pub fn julia_backward_cloud(
    sys: &GeneratorSystem,
    seed_point: Complex64,
    iters: usize,
    rng_seed: u64,
) -> Result<Vec<Complex64>, FieldError> {
    const MAX_FAILURES: usize = 32;
    let mut rng = StreamRng::new(rng_seed, u64::MAX, 0);
    let gens = sys.generators();
    let mut out = Vec::with_capacity(iters);
    let mut current = seed_point;
    let mut warm = 0;
    let mut failures = 0;
    while out.len() < iters {
        let j = sys.pick(rng.next_f64());
        match backward_step(&gens[j], current, &mut rng) {
            Some(z) => {
                failures = 0;
                current = z;
                warm += 1;
                if warm > CLOUD_BURN_IN {
                    out.push(z);
                }
            }
            None => {
                failures += 1;
                if failures >= MAX_FAILURES {
                    return Err(FieldError::RootSolveFailure(failures));
                }
                current = seed_point;
                warm = 0;
            }
        }
    }
    Ok(out)
}

/// One uniformly chosen preimage, or `None` when the solve fails or its
/// residual exceeds `1e−8·(1 + |w|)`.
pub(crate) fn backward_step(
    g: &crate::poly::Polynomial,
    w: Complex64,
    rng: &mut StreamRng,
) -> Option<Complex64> {
    let roots = g.preimages(w).ok()?;
    let z = roots[rng.below(roots.len())];
    ((g.eval(z) - w).norm() <= 1e-8 * (1.0 + w.norm())).then_some(z)
}

/// `deg(γ_n∘⋯∘γ_1)^{-1} · log⁺|γ_n∘⋯∘γ_1(y)|` for the first `n` letters of `word`.
///
/// Once an orbit passes `|z| > 1e100` (or would saturate) the remaining letters advance
/// `log|z| ↦ d·log|z| + log|a|`, which is exact to `O(1/|z|)`.
pub fn green_field(
    sys: &GeneratorSystem,
    word: &Word,
    grid: GridSpec,
    n: usize,
) -> Result<ScalarField, FieldError> {
    let letters = word.expand(n);
    if letters.len() < n || letters.iter().any(|&d| d as usize > sys.len()) {
        return Err(FieldError::ShortWord {
            available: letters.len(),
            needed: n,
        });
    }
    let gens = sys.generators();
    let log_leading: Vec<f64> = gens.iter().map(|g| g.leading().norm().ln()).collect();
    const SWITCH: f64 = 1e100;
    let values = grid.map_points(|_, y| {
        let mut z = y;
        let mut log_deg = 0.0f64;
        let mut log_mod: Option<f64> = None;
        for &d in &letters {
            let j = d as usize - 1;
            let deg = gens[j].degree() as f64;
            log_deg += deg.ln();
            match log_mod {
                Some(lm) => log_mod = Some(deg * lm + log_leading[j]),
                None => {
                    let next = gens[j].eval(z);
                    if is_at_infinity(next) {
                        log_mod = Some(deg * z.norm().ln() + log_leading[j]);
                    } else if next.norm() > SWITCH {
                        log_mod = Some(next.norm().ln());
                    } else {
                        z = next;
                    }
                }
            }
        }
        let lm = log_mod.unwrap_or_else(|| z.norm().ln());
        lm.max(0.0) * (-log_deg).exp()
    });
    Ok(ScalarField {
        grid,
        undecided: vec![0.0; grid.len()],
        values,
        meta: FieldMeta {
            system_hash: sys.hash_hex(),
            ..FieldMeta::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial;
    use crate::reference::{self, OUTER_RADIUS};
    use crate::semigroup::build_system;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sq() -> GeneratorSystem {
        build_system(vec![Polynomial::from_real(&[0.0, 0.0, 1.0])], vec![1.0]).unwrap()
    }

    #[test]
    fn point_values_at_known_locations() {
        let sys = reference::system();
        let est = estimate_points(
            &sys,
            &[c(0.0, 0.0), c(50.0, 0.0), c(0.0, -50.0)],
            Sampling::new(1000, 300, 1),
        );
        assert_eq!(est[0].value, 0.0);
        assert_eq!(est[0].undecided, 0.0);
        assert_eq!(est[1].value, 1.0);
        assert_eq!(est[2].value, 1.0);
        let on_circle =
            estimate_points(&sys, &[c(OUTER_RADIUS, 0.0)], Sampling::new(4000, 300, 2))[0];
        assert!(on_circle.value >= 0.98, "{on_circle:?}");
    }

    #[test]
    fn partition_of_samples() {
        let sys = reference::system();
        let grid = GridSpec::square(c(0.3, 0.2), 2.5, 12).unwrap();
        let s = Sampling::new(64, 200, 9);
        for cnt in render_counts(&sys, grid, s, None) {
            assert_eq!(cnt.total(), 64);
            assert_eq!(cnt.target, 0);
        }
        let target = Disk::new(c(0.0, 0.0), 0.05);
        let t = render_t(&sys, grid, s);
        let l = render_t_target(&sys, grid, target, s);
        for k in 0..grid.len() {
            let sum = t.values[k] + l.values[k] + l.undecided[k];
            assert!((sum - 1.0).abs() < 1e-12, "pixel {k}: {sum}");
        }
    }

    #[test]
    fn target_field_examples() {
        let sys = reference::system();
        let target = Disk::new(c(0.0, 0.0), 0.05);
        let counts = count_points(
            &sys,
            &[c(0.0, 0.0), c(50.0, 0.0), c(-1.0, 0.0)],
            Sampling::new(1000, 300, 3),
            Some(&target),
        );
        assert_eq!(counts[0].target, 1000);
        assert_eq!(counts[1].target, 0);
        assert_eq!(counts[2].target, 1000);
    }

    #[test]
    fn untrapped_system_never_traps() {
        let sys = reference::bare_system();
        let cnt = count_points(&sys, &[c(0.0, 0.0)], Sampling::new(50, 40, 3), None)[0];
        assert_eq!(cnt.trapped, 0);
        assert_eq!(cnt.undecided, 50);
    }

    #[test]
    fn render_is_deterministic_and_monotone_in_budget() {
        let sys = reference::system();
        let grid = GridSpec::square(c(1.0, 0.5), 1.5, 10).unwrap();
        let a = render_t(&sys, grid, Sampling::new(40, 20, 5));
        let b = render_t(&sys, grid, Sampling::new(40, 20, 5));
        assert_eq!(a, b);
        let longer = render_t(&sys, grid, Sampling::new(40, 200, 5));
        for k in 0..grid.len() {
            assert!(longer.undecided[k] <= a.undecided[k]);
            assert!(longer.values[k] >= a.values[k]);
        }
        let other = render_t(&sys, grid, Sampling::new(40, 20, 6));
        assert_ne!(a.values, other.values);
    }

    #[test]
    fn operator_preserves_constants_and_range() {
        let sys = reference::system();
        let grid = reference::window(24);
        let k = ScalarField::constant(grid, 0.37);
        let mk = operator_apply(&sys, &k, 0.37);
        assert!(mk.values.iter().all(|v| (v - 0.37).abs() < 1e-15));
        let f = ScalarField::from_fn(grid, |z| (z.re.sin() * 0.5 + 0.5).clamp(0.0, 1.0));
        let mf = operator_apply(&sys, &f, 1.0);
        assert!(mf.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn operator_single_term() {
        let sys = sq();
        let grid = GridSpec::square(c(0.0, 0.0), 3.0, 61).unwrap();
        let f = ScalarField::from_fn(grid, |z| 1.0 / (1.0 + (-(z.norm() - 2.0) * 4.0).exp()));
        let mf = operator_apply(&sys, &f, 1.0);
        for (k, z) in (0..grid.len()).map(|k| (k, grid.point(k))) {
            let expected = f.bilinear(z * z).unwrap_or(1.0);
            assert_eq!(mf.values[k], expected);
        }
    }

    #[test]
    fn operator_limit_of_constant_is_exact() {
        let sys = reference::system();
        let grid = reference::window(32);
        let t = render_t(&sys, grid, Sampling::new(16, 100, 1));
        let one = ScalarField::constant(grid, 1.0);
        let report = operator_limit_check(&sys, &one, &t, 1.0, c(0.0, 0.0), 5, 1.0);
        assert!(report.errors.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn operator_limit_on_refined_raster() {
        let sys = reference::system();
        let grid = reference::window(24);
        let t = render_t(&sys, grid, Sampling::new(16, 100, 1));
        let fine = grid.refined(3);
        assert_eq!(fine.refinement_of(&grid), Some(3));
        assert_eq!(grid.refined(2).refinement_of(&grid), None);
        let one = ScalarField::constant(fine, 1.0);
        let report = operator_limit_check(&sys, &one, &t, 1.0, c(0.0, 0.0), 3, 1.0);
        assert!(report.errors.iter().all(|&e| e == 0.0));
        let shared = (0..grid.len()).all(|k| {
            let (col, row) = grid.col_row(k);
            (fine.point((row * 3 + 1) * fine.width + col * 3 + 1) - grid.point(k)).norm() < 1e-12
        });
        assert!(shared);
    }

    #[test]
    fn julia_mask_examples() {
        let sys = reference::system();
        let grid = reference::window(96);
        let t = render_t(&sys, grid, Sampling::new(200, 200, 11));
        let mask = classify_julia(&t, 1);
        let (c4, r4) = grid.locate(c(OUTER_RADIUS, 0.0)).unwrap();
        assert!(mask.dilate().get(c4, r4));
        let (c1, r1) = grid.locate(c(reference::INNER_FIXED_POINT, 0.0)).unwrap();
        assert!(mask.dilate().get(c1, r1));
        let trap = sys.trap().unwrap();
        for k in 0..grid.len() {
            let z = grid.point(k);
            if z.norm() > 4.3
                || trap
                    .region
                    .contains_with_clearance(z, 2.0 * grid.pixel_size())
            {
                assert!(!mask.bits[k], "{z}");
            }
        }
    }

    #[test]
    fn cloud_for_single_square_lies_on_circle() {
        let cloud = julia_backward_cloud(&sq(), c(1.0, 0.0), 500, 4).unwrap();
        assert_eq!(cloud.len(), 500);
        for z in cloud {
            assert!((z.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn reference_cloud_stays_in_annulus() {
        let sys = reference::system();
        let cloud = julia_backward_cloud(&sys, c(OUTER_RADIUS, 0.0), 2000, 8).unwrap();
        let grid = reference::window(256);
        let a = reference::annulus_mask(grid).dilate_n(2);
        let inside = cloud.iter().filter(|&&z| a.contains_point(z)).count();
        assert!(inside as f64 >= 0.99 * cloud.len() as f64);
    }

    #[test]
    fn green_field_on_outer_map() {
        let sys = reference::system();
        let word: Word = "(2)".parse().unwrap();
        let grid = GridSpec::new(3.9, 8.1, -0.1, 0.1, 43, 3).unwrap();
        let g = green_field(&sys, &word, grid, 14).unwrap();
        let at = |x: f64| {
            let k = (0..grid.len())
                .min_by(|&a, &b| {
                    (grid.point(a) - c(x, 0.0))
                        .norm()
                        .total_cmp(&(grid.point(b) - c(x, 0.0)).norm())
                })
                .unwrap();
            (grid.point(k), g.values[k])
        };
        let closed = |z: Complex64| (z.norm().ln() - 64f64.ln() / 3.0).max(0.0);
        let (z, v) = at(4.0);
        assert!((v - closed(z)).abs() < 1e-6);
        let (z, v) = at(8.0);
        assert!((v - closed(z)).abs() < 1e-6);
        let on_circle = green_field(
            &sys,
            &word,
            GridSpec::new(3.99, 4.01, -0.01, 0.01, 3, 3).unwrap(),
            14,
        )
        .unwrap();
        assert!(on_circle.get(1, 1).abs() < 1e-6);
        assert!((v - 2f64.ln()).abs() < 0.02);
        for col in 1..grid.width {
            assert!(g.get(col, 1) >= g.get(col - 1, 1));
        }
        assert!(green_field(&sys, &"12".parse().unwrap(), grid, 5).is_err());
    }
}
