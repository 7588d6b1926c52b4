//! Symbolic coding of Julia components, level sets of the escape field,
//! Hölder exponents and the order-theoretic audits.

use std::cmp::Ordering;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::field::backward_step;
use crate::grid::{GridSpec, RegionMask, ScalarField};
use crate::poly::{
    escape_radius, filled_julia_membership, PolyError, Polynomial, VerdictKind, DEGREE_CAP,
};
use crate::rng::StreamRng;
use crate::semigroup::{GeneratorSystem, SystemError};
use crate::word::Word;

/// Tolerance for ties in the greedy level-set inversion.
pub const INVERT_TOL: f64 = 1e-12;
/// Overlap fraction (of the proxy raster) above which two preimage rasters meet.
pub const OVERLAP_FRACTION: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymbolicError {
    #[error("weights must be positive and sum to 1: {0:?}")]
    Weight(Vec<f64>),
    #[error("degrees must be at least 2: {0:?}")]
    Degree(Vec<usize>),
    #[error("operation needs {expected} generators, system has {found}")]
    Alphabet { expected: usize, found: usize },
    #[error("word {0} uses a letter outside the alphabet")]
    Letter(String),
    #[error("word {0} is finite; an infinite address is required")]
    FiniteWord(String),
    #[error("composed degree {degree} exceeds cap {cap}")]
    DegreeCap { degree: usize, cap: usize },
    #[error("mask {0} is not connected")]
    DisconnectedMask(&'static str),
    #[error("no trichotomy case matches the overlap pattern {0:?}")]
    TrichotomyViolation([bool; 3]),
    #[error("single-map Julia rasters are not totally ordered by surrounding")]
    Unordered,
    #[error(
        "annuli {first} and {second} are out of order: means {mean_first:.4} then {mean_second:.4}"
    )]
    OrderViolation {
        first: usize,
        second: usize,
        mean_first: f64,
        mean_second: f64,
    },
    #[error("root solve failed repeatedly")]
    RootSolveFailure,
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

fn check_weights(degs: &[usize], p: &[f64]) -> Result<(), SymbolicError> {
    if p.is_empty()
        || p.len() != degs.len()
        || p.iter().any(|&x| !(x > 0.0))
        || (p.iter().sum::<f64>() - 1.0).abs() > 1e-12
    {
        return Err(SymbolicError::Weight(p.to_vec()));
    }
    if degs.iter().any(|&d| d < 2) {
        return Err(SymbolicError::Degree(degs.to_vec()));
    }
    Ok(())
}

fn entropy_and_drift(degs: &[usize], p: &[f64]) -> (f64, f64) {
    let entropy = -p.iter().map(|&x| x * x.ln()).sum::<f64>();
    let drift = p
        .iter()
        .zip(degs)
        .map(|(&x, &d)| x * (d as f64).ln())
        .sum::<f64>();
    (entropy, drift)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UExponent {
    pub value: f64,
    pub sum_inv_deg: f64,
    /// `Σ 1/deg ≥ 1`: the bound `u < 1` is not guaranteed in this regime.
    pub warning: bool,
}

/// `u = (−Σ p log p) / (Σ p log deg)`.
pub fn u_exponent(degs: &[usize], p: &[f64]) -> Result<UExponent, SymbolicError> {
    check_weights(degs, p)?;
    let (entropy, drift) = entropy_and_drift(degs, p);
    let sum_inv_deg = degs.iter().map(|&d| 1.0 / d as f64).sum::<f64>();
    Ok(UExponent {
        value: entropy / drift,
        sum_inv_deg,
        warning: sum_inv_deg >= 1.0,
    })
}

/// `(Σ p log deg − Σ p log p) / (Σ p log deg)`, a lower bound for the Hausdorff
/// dimension of the Julia set.
pub fn dim_lower_bound(degs: &[usize], p: &[f64]) -> Result<f64, SymbolicError> {
    check_weights(degs, p)?;
    let (entropy, drift) = entropy_and_drift(degs, p);
    Ok((drift + entropy) / drift)
}

fn check_pair(p: &[f64]) -> Result<(f64, f64), SymbolicError> {
    if p.len() != 2 {
        return Err(SymbolicError::Alphabet {
            expected: 2,
            found: p.len(),
        });
    }
    check_weights(&[2, 2], p)?;
    Ok((p[0], p[1]))
}

/// Escape probability on the component coded by `w` in the two-generator
/// disjoint regime: `T(w) = [w₁=2]·p₁ + p_{w₁}·T(σw)`, summed in closed form
/// over the cycle.
pub fn t_value_of_word(p: &[f64], w: &Word) -> Result<f64, SymbolicError> {
    let (p1, p2) = check_pair(p)?;
    if w.max_digit() > 2 {
        return Err(SymbolicError::Letter(w.to_string()));
    }
    if w.is_finite() {
        return Err(SymbolicError::FiniteWord(w.to_string()));
    }
    // affine map t ↦ a + b·t of a finite block
    let block = |letters: &[u8]| {
        letters.iter().rev().fold((0.0, 1.0), |(a, b), &d| {
            if d == 1 {
                (p1 * a, p1 * b)
            } else {
                (p1 + p2 * a, p2 * b)
            }
        })
    };
    let (ca, cb) = block(w.cycle());
    let periodic = ca / (1.0 - cb);
    let (pa, pb) = block(w.prefix());
    Ok((pa + pb * periodic).clamp(0.0, 1.0))
}

/// Result of inverting the level-set coding.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum LevelSet {
    /// A single component; `exact` is false when the word was truncated at the depth limit.
    Unique { word: Word, exact: bool },
    /// A Fatou gap bounded by two components `(prefix,1,2̄)` and `(prefix,2,1̄)`.
    GapPair(Word, Word),
}

/// Greedy digit extraction for `t ∈ (0,1)`.
pub fn invert_t(p: &[f64], t: f64, depth: usize) -> Result<LevelSet, SymbolicError> {
    let (p1, p2) = check_pair(p)?;
    let mut digits: Vec<u8> = Vec::new();
    let mut history: Vec<f64> = Vec::new();
    let mut t = t.clamp(0.0, 1.0);
    for _ in 0..depth {
        if (t - p1).abs() <= INVERT_TOL {
            let mut lo = digits.clone();
            lo.push(1);
            let mut hi = digits;
            hi.push(2);
            let a = Word::new(lo, vec![2]).expect("binary digits");
            let b = Word::new(hi, vec![1]).expect("binary digits");
            return Ok(LevelSet::GapPair(a, b));
        }
        if t <= INVERT_TOL || t >= 1.0 - INVERT_TOL {
            let tail = if t <= INVERT_TOL { 1 } else { 2 };
            return Ok(LevelSet::Unique {
                word: Word::new(digits, vec![tail]).expect("binary digits"),
                exact: true,
            });
        }
        if let Some(i) = history.iter().position(|&h| (h - t).abs() <= INVERT_TOL) {
            let cycle = digits.split_off(i);
            return Ok(LevelSet::Unique {
                word: Word::new(digits, cycle).expect("binary digits"),
                exact: true,
            });
        }
        history.push(t);
        if t < p1 {
            digits.push(1);
            t /= p1;
        } else {
            digits.push(2);
            t = (t - p1) / p2;
        }
        t = t.clamp(0.0, 1.0);
    }
    Ok(LevelSet::Unique {
        word: Word::finite(digits).expect("binary digits"),
        exact: false,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ComponentDescriptor {
    pub word: Word,
    /// Closed-form escape probability (two-generator systems only).
    pub t_value: Option<f64>,
    pub cloud: Vec<Complex64>,
    #[serde(skip)]
    pub mask: Option<RegionMask>,
    /// Largest relative residual of any backward step.
    pub residual: f64,
    /// Degree of the return composition over one cycle.
    pub cycle_degree: usize,
}

/// Samples the fiberwise Julia set of an eventually periodic word: a backward
/// chaos game for the return composition over one cycle, pulled back through
/// the prefix maps.
///
/// The return composition is inverted one letter at a time, which picks a
/// uniform root of the composed map without ever expanding it.
pub fn component_of_word(
    sys: &GeneratorSystem,
    w: &Word,
    iters: usize,
    rng_seed: u64,
) -> Result<ComponentDescriptor, SymbolicError> {
    if w.is_finite() {
        return Err(SymbolicError::FiniteWord(w.to_string()));
    }
    if w.max_digit() as usize > sys.len() {
        return Err(SymbolicError::Letter(w.to_string()));
    }
    let gens = sys.generators();
    let cycle_degree = w.cycle().iter().try_fold(1usize, |acc, &d| {
        let next = acc.saturating_mul(gens[d as usize - 1].degree());
        (next <= DEGREE_CAP)
            .then_some(next)
            .ok_or(SymbolicError::DegreeCap {
                degree: next,
                cap: DEGREE_CAP,
            })
    })?;
    let mut rng = StreamRng::new(rng_seed, u64::MAX - 1, 0);
    let mut residual = 0.0f64;
    let mut pull = |g: &Polynomial,
                    target: Complex64,
                    rng: &mut StreamRng|
     -> Result<Complex64, SymbolicError> {
        for _ in 0..8 {
            if let Some(z) = backward_step(g, target, rng) {
                residual = residual.max((g.eval(z) - target).norm() / (1.0 + target.norm()));
                return Ok(z);
            }
        }
        Err(SymbolicError::RootSolveFailure)
    };
    // start outside everything; backward orbits accumulate on the Julia set
    let mut current = Complex64::new(sys.escape_radius(), 0.0);
    let burn_in = crate::field::CLOUD_BURN_IN;
    let mut cycle_points = Vec::with_capacity(iters);
    for step in 0..burn_in + iters {
        for &d in w.cycle().iter().rev() {
            current = pull(&gens[d as usize - 1], current, &mut rng)?;
        }
        if step >= burn_in {
            cycle_points.push(current);
        }
    }
    let mut cloud = Vec::with_capacity(iters);
    for z in cycle_points {
        let mut x = z;
        for &d in w.prefix().iter().rev() {
            x = pull(&gens[d as usize - 1], x, &mut rng)?;
        }
        cloud.push(x);
    }
    let t_value = if sys.len() == 2 {
        Some(t_value_of_word(sys.weights(), w)?)
    } else {
        None
    };
    Ok(ComponentDescriptor {
        word: w.clone(),
        t_value,
        cloud,
        mask: None,
        residual,
        cycle_degree,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Surround {
    /// The first mask lies in a bounded complementary component of the second.
    Inside,
    /// The second mask lies in a bounded complementary component of the first.
    Outside,
    Equal,
    Incomparable,
}

/// Surrounding order of two connected rasters on the same grid.
pub fn surrounding_compare(a: &RegionMask, b: &RegionMask) -> Result<Surround, SymbolicError> {
    if !a.is_connected() {
        return Err(SymbolicError::DisconnectedMask("first"));
    }
    if !b.is_connected() {
        return Err(SymbolicError::DisconnectedMask("second"));
    }
    if a.grid != b.grid {
        return Ok(Surround::Incomparable);
    }
    if a == b {
        return Ok(Surround::Equal);
    }
    let inside = |x: &RegionMask, y: &RegionMask| {
        !x.is_empty() && x.is_subset_of(&y.bounded_complement()).unwrap_or(false)
    };
    if inside(a, b) {
        Ok(Surround::Inside)
    } else if inside(b, a) {
        Ok(Surround::Outside)
    } else {
        Ok(Surround::Incomparable)
    }
}

/// Raster of `J(g)`: escaping pixels 8-adjacent to the escape-time raster of
/// `K(g)`. This ring stays connected across the one-pixel necks where a raster
/// of `K(g)` itself can break apart.
pub fn single_julia_mask(g: &Polynomial, grid: GridSpec, n_max: u32) -> RegionMask {
    let r = escape_radius(std::slice::from_ref(g));
    let k = RegionMask::from_fn(grid, |z| {
        filled_julia_membership(g, z, n_max, r).kind != VerdictKind::Escaped
    });
    k.dilate().and_not(&k).expect("same grid")
}

/// Reorders a two-generator system so that `J(h₁)` is surrounded by `J(h₂)`.
/// Returns the (possibly swapped) system and whether a swap happened.
pub fn canonical_orientation(
    sys: &GeneratorSystem,
    grid: GridSpec,
) -> Result<(GeneratorSystem, bool), SymbolicError> {
    if sys.len() != 2 {
        return Err(SymbolicError::Alphabet {
            expected: 2,
            found: sys.len(),
        });
    }
    let j1 = single_julia_mask(&sys.generators()[0], grid, 400);
    let j2 = single_julia_mask(&sys.generators()[1], grid, 400);
    match surrounding_compare(&j1, &j2)? {
        Surround::Inside => Ok((sys.clone(), false)),
        Surround::Outside => Ok((sys.permuted(&[1, 0])?, true)),
        _ => Err(SymbolicError::Unordered),
    }
}

/// The annular Fatou component between the two first-level pieces of the
/// Julia set, pulled back along `prefix` (first letter applied first).
///
/// Base gap: points sent by `h₁` outside both the annulus raster and its
/// hole (or off the grid), and by `h₂` into the hole.
pub fn fatou_gap_mask(
    sys: &GeneratorSystem,
    annulus: &RegionMask,
    prefix: &[u8],
) -> Result<RegionMask, SymbolicError> {
    if sys.len() != 2 {
        return Err(SymbolicError::Alphabet {
            expected: 2,
            found: sys.len(),
        });
    }
    let hole = annulus.bounded_complement();
    let grid = annulus.grid;
    let gens = sys.generators();
    Ok(RegionMask::from_fn(grid, |z| {
        let y = sys.apply_word(z, prefix);
        let escapes = match grid.locate(gens[0].eval(y)) {
            Some((c, r)) => !annulus.get(c, r) && !hole.get(c, r),
            None => true,
        };
        escapes && hole.contains_point(gens[1].eval(y))
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HolderEstimate {
    pub exponent: f64,
    /// Coefficient of determination of the log–log fit.
    pub fit_quality: f64,
    pub radii: Vec<f64>,
    pub z0: Complex64,
    pub reliable: bool,
    pub oscillations: Vec<f64>,
}

/// Radii `32, 16, …, 1` pixels of `grid`.
pub fn default_radii(grid: &GridSpec) -> Vec<f64> {
    (0..6)
        .map(|k| grid.pixel_size() * (32 >> k) as f64)
        .collect()
}

/// Pointwise Hölder exponent by regressing `log max_{|z−z0|≤r} |T(z) − T(z0)|`
/// on `log r`. Oscillations at or below `noise_floor` are dropped; fewer than
/// three usable radii, or `R² < 0.5`, mark the estimate unreliable.
pub fn empirical_holder(
    t: &ScalarField,
    z0: Complex64,
    radii: &[f64],
    noise_floor: f64,
) -> HolderEstimate {
    let grid = t.grid;
    let center = t.nearest(z0);
    let oscillations: Vec<f64> = radii
        .iter()
        .map(|&r| {
            let Some(v0) = center else { return f64::NAN };
            let (px, py) = (
                (r / grid.dx()).ceil() as isize,
                (r / grid.dy()).ceil() as isize,
            );
            let Some((c0, r0)) = grid.locate(z0) else {
                return f64::NAN;
            };
            let mut best = 0.0f64;
            for dy in -py..=py {
                for dx in -px..=px {
                    let (c, rr) = (c0 as isize + dx, r0 as isize + dy);
                    if c < 0 || rr < 0 || c >= grid.width as isize || rr >= grid.height as isize {
                        continue;
                    }
                    let z = grid.pixel_center(c as usize, rr as usize);
                    if (z - z0).norm() <= r {
                        best = best.max((t.get(c as usize, rr as usize) - v0).abs());
                    }
                }
            }
            best
        })
        .collect();
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(&oscillations)
        .filter(|(_, &o)| o > noise_floor && o.is_finite())
        .map(|(&r, &o)| (r.ln(), o.ln()))
        .collect();
    let (exponent, fit_quality) = linear_fit(&pts);
    let strictly_decreasing = radii.windows(2).all(|w| w[1] < w[0]);
    HolderEstimate {
        exponent,
        fit_quality,
        radii: radii.to_vec(),
        z0,
        reliable: pts.len() >= 3 && fit_quality >= 0.5 && strictly_decreasing,
        oscillations,
    }
}

/// Least-squares slope and R².
fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    if pts.len() < 2 {
        return (f64::NAN, 0.0);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx = pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
    let syy = pts.iter().map(|p| (p.1 - my).powi(2)).sum::<f64>();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    (slope, r2)
}

/// Approximate samples of the natural measure on the Julia set: draw a word by
/// the weights, then pull a far-away point back along the reversed word with a
/// uniform root choice at every step.
pub fn sample_lambda_typical(
    sys: &GeneratorSystem,
    n_points: usize,
    word_len: usize,
    rng_seed: u64,
) -> Result<Vec<Complex64>, SymbolicError> {
    let gens = sys.generators();
    let start = Complex64::new(2.0 * sys.escape_radius(), 0.0);
    (0..n_points)
        .into_par_iter()
        .map(|k| {
            'attempt: for attempt in 0..8u64 {
                let mut rng = StreamRng::new(rng_seed, k as u64, attempt);
                let word: Vec<usize> = (0..word_len).map(|_| sys.pick(rng.next_f64())).collect();
                let mut z = start;
                for &j in word.iter().rev() {
                    match backward_step(&gens[j], z, &mut rng) {
                        Some(next) => z = next,
                        None => continue 'attempt,
                    }
                }
                return Ok(z);
            }
            Err(SymbolicError::RootSolveFailure)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trichotomy {
    /// All three preimage rasters pairwise disjoint.
    Case1,
    /// The innermost is disjoint from the others; the outer two meet.
    Case2,
    /// The outermost is disjoint from the others; the inner two meet.
    Case3,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrichotomyReport {
    pub case: Trichotomy,
    /// Original generator indices, innermost first.
    pub order: [usize; 3],
    pub proxy_pixels: usize,
    pub preimage_pixels: [usize; 3],
    /// Overlap counts for the sorted pairs (1,2), (1,3), (2,3).
    pub overlaps: [usize; 3],
    pub threshold: f64,
}

/// Raster proxy of `J(G)`: pixels hit by a backward chaos-game cloud.
pub fn julia_proxy_mask(
    sys: &GeneratorSystem,
    grid: GridSpec,
    iters: usize,
    rng_seed: u64,
) -> Result<RegionMask, SymbolicError> {
    let seed_point = Complex64::new(sys.escape_radius(), 0.0);
    let cloud = crate::field::julia_backward_cloud(sys, seed_point, iters, rng_seed)
        .map_err(|_| SymbolicError::RootSolveFailure)?;
    Ok(RegionMask::from_points(grid, &cloud))
}

/// Decides which of the three configurations a three-generator system is in,
/// from overlaps of the rasters `h_i^{-1}(proxy)`.
///
/// Generators are first sorted by the surrounding order of their single-map
/// Julia rasters. Two preimage rasters meet when they share more than
/// [`OVERLAP_FRACTION`] of the proxy pixel count.
pub fn classify_3gen(
    sys: &GeneratorSystem,
    proxy: &RegionMask,
) -> Result<TrichotomyReport, SymbolicError> {
    if sys.len() != 3 {
        return Err(SymbolicError::Alphabet {
            expected: 3,
            found: sys.len(),
        });
    }
    let grid = proxy.grid;
    let julia: Vec<RegionMask> = sys
        .generators()
        .iter()
        .map(|g| single_julia_mask(g, grid, 400))
        .collect();
    let mut order = [0usize, 1, 2];
    let mut failure = None;
    order.sort_by(|&i, &j| match surrounding_compare(&julia[i], &julia[j]) {
        Ok(Surround::Inside) => Ordering::Less,
        Ok(Surround::Outside) => Ordering::Greater,
        Ok(Surround::Equal) => Ordering::Equal,
        Ok(Surround::Incomparable) => {
            failure.get_or_insert(SymbolicError::Unordered);
            Ordering::Equal
        }
        Err(e) => {
            failure.get_or_insert(e);
            Ordering::Equal
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    for w in order.windows(2) {
        if surrounding_compare(&julia[w[0]], &julia[w[1]])? != Surround::Inside {
            return Err(SymbolicError::Unordered);
        }
    }
    let pre: Vec<RegionMask> = order
        .iter()
        .map(|&i| crate::semigroup::preimage_mask(&sys.generators()[i], proxy))
        .collect();
    let threshold = OVERLAP_FRACTION * proxy.count() as f64;
    let overlaps = [
        pre[0].intersection_count(&pre[1]).unwrap(),
        pre[0].intersection_count(&pre[2]).unwrap(),
        pre[1].intersection_count(&pre[2]).unwrap(),
    ];
    let meet = overlaps.map(|o| o as f64 > threshold);
    let case = match meet {
        [false, false, false] => Trichotomy::Case1,
        [false, false, true] => Trichotomy::Case2,
        [true, false, false] => Trichotomy::Case3,
        other => return Err(SymbolicError::TrichotomyViolation(other)),
    };
    Ok(TrichotomyReport {
        case,
        order,
        proxy_pixels: proxy.count(),
        preimage_pixels: [pre[0].count(), pre[1].count(), pre[2].count()],
        overlaps,
        threshold,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelProbe {
    pub fraction: f64,
    /// Per point: a word (first letter applied first) whose image lies in the
    /// basin of infinity or the certified trap.
    pub witnesses: Vec<Option<String>>,
}

/// For each point, searches words of length ≤ `depth` that push it into the
/// Fatou set: beyond the escape radius or into the certified trap.
pub fn kernel_julia_probe(
    sys: &GeneratorSystem,
    points: &[Complex64],
    depth: usize,
    budget: usize,
) -> KernelProbe {
    let witnesses: Vec<Option<String>> = points
        .par_iter()
        .map(|&z| {
            let mut word = Vec::new();
            let mut nodes = 0;
            fatou_witness(sys, z, depth, budget, &mut word, &mut nodes)
                .then(|| word.iter().map(|&d| char::from(b'0' + d)).collect())
        })
        .collect();
    let hits = witnesses.iter().filter(|w| w.is_some()).count();
    KernelProbe {
        fraction: if points.is_empty() {
            0.0
        } else {
            hits as f64 / points.len() as f64
        },
        witnesses,
    }
}

fn fatou_witness(
    sys: &GeneratorSystem,
    z: Complex64,
    depth: usize,
    budget: usize,
    word: &mut Vec<u8>,
    nodes: &mut usize,
) -> bool {
    *nodes += 1;
    if sys.escaped(z) || sys.in_trap(z) {
        return true;
    }
    if word.len() >= depth || *nodes >= budget {
        return false;
    }
    for (j, g) in sys.generators().iter().enumerate() {
        word.push(j as u8 + 1);
        if fatou_witness(sys, g.eval(z), depth, budget, word, nodes) {
            return true;
        }
        word.pop();
    }
    false
}

#[derive(Clone, Debug, Serialize)]
pub struct AnnulusStat {
    pub pixels: usize,
    pub mean: f64,
    pub max_deviation: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityReport {
    pub stats: Vec<AnnulusStat>,
    /// `(mean gap, 3·stderr)` per consecutive pair.
    pub gaps: Vec<(f64, f64)>,
}

/// Checks that mean escape probability strictly increases across a list of
/// annuli ordered from inside out, each step by more than three standard errors.
pub fn monotonicity_audit(
    t: &ScalarField,
    annuli: &[RegionMask],
) -> Result<MonotonicityReport, SymbolicError> {
    let n = t.meta.samples.max(1) as f64;
    let stats: Vec<AnnulusStat> = annuli
        .iter()
        .map(|mask| {
            let vals: Vec<f64> = (0..mask.bits.len())
                .filter(|&k| mask.bits[k])
                .map(|k| t.values[k])
                .collect();
            let k = vals.len().max(1) as f64;
            let mean = vals.iter().sum::<f64>() / k;
            let max_deviation = vals.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
            let var = vals.iter().map(|v| v * (1.0 - v) / n).sum::<f64>();
            AnnulusStat {
                pixels: vals.len(),
                mean,
                max_deviation,
                stderr: var.sqrt() / k,
            }
        })
        .collect();
    for (i, w) in annuli.windows(2).enumerate() {
        if surrounding_compare(&w[0], &w[1])? != Surround::Inside {
            return Err(SymbolicError::OrderViolation {
                first: i,
                second: i + 1,
                mean_first: stats[i].mean,
                mean_second: stats[i + 1].mean,
            });
        }
    }
    let mut gaps = Vec::new();
    for i in 1..stats.len() {
        let (a, b) = (&stats[i - 1], &stats[i]);
        let tol = 3.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
        let gap = b.mean - a.mean;
        gaps.push((gap, tol));
        if !(gap > tol) {
            return Err(SymbolicError::OrderViolation {
                first: i - 1,
                second: i,
                mean_first: a.mean,
                mean_second: b.mean,
            });
        }
    }
    Ok(MonotonicityReport { stats, gaps })
}
