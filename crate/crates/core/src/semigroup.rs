//! Weighted generator systems and the semigroup-level geometry built on them:
//! trapping regions, membership in the smallest filled-in Julia set, the
//! postcritical orbit sample, and preimage disjointness.

use std::collections::HashSet;
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::RegionMask;
use crate::poly::{escape_radius, OrbitVerdict, PolyError, Polynomial};

const WEIGHT_TOL: f64 = 1e-12;

/// Default word-tree depth for [`khat_membership`].
pub const DEFAULT_KHAT_DEPTH: usize = 24;
/// Default node budget for tree searches.
pub const DEFAULT_BUDGET: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("weights must be in (0,1) and sum to 1: {0}")]
    Weight(String),
    #[error("generator {index} has degree {degree} < 2")]
    Degree { index: usize, degree: usize },
    #[error("generators {0} and {1} are identical")]
    DuplicateGenerator(usize, usize),
    #[error("{polys} polynomials but {weights} weights")]
    LengthMismatch { polys: usize, weights: usize },
    #[error("empty generator list")]
    Empty,
    #[error(transparent)]
    Poly(#[from] PolyError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: Complex64,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: Complex64, radius: f64) -> Self {
        Self { center, radius }
    }

    #[inline]
    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.center).norm_sqr() <= self.radius * self.radius
    }
}

/// A candidate trapping region.
#[derive(Clone, Debug, PartialEq)]
pub enum TrapRegion {
    /// Union of closed disks.
    Disks(Vec<Disk>),
    /// A raster set together with the slack (in pixels) it is allowed to
    /// grow by under the generators. The certified region is the mask dilated
    /// by `slack`; samples are the pixels of `mask` itself.
    Mask { mask: RegionMask, slack: usize },
}

impl TrapRegion {
    pub fn disk(center: Complex64, radius: f64) -> Self {
        TrapRegion::Disks(vec![Disk::new(center, radius)])
    }

    /// Membership used during orbit classification.
    #[inline]
    pub fn contains(&self, z: Complex64) -> bool {
        match self {
            TrapRegion::Disks(disks) => disks.iter().any(|d| d.contains(z)),
            TrapRegion::Mask { mask, .. } => mask.contains_point(z),
        }
    }

    /// Membership with an inward clearance (used as "interior" evidence).
    pub fn contains_with_clearance(&self, z: Complex64, clearance: f64) -> bool {
        match self {
            TrapRegion::Disks(disks) => disks
                .iter()
                .any(|d| (z - d.center).norm() + clearance <= d.radius),
            TrapRegion::Mask { mask, .. } => {
                let px = mask.grid.pixel_size();
                let r = (clearance / px).ceil() as usize;
                let core = (0..r).fold(mask.clone(), |m, _| m.erode());
                core.contains_point(z)
            }
        }
    }
}

/// Numerical evidence that a region is mapped into itself by every generator.
#[derive(Clone, Debug, PartialEq)]
pub struct TrapCertificate {
    pub region: TrapRegion,
    /// Smallest clearance observed, in plane units.
    pub margin: f64,
    pub samples: usize,
}

/// Why a candidate failed: the sample with the worst clearance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrapFailure {
    pub generator: usize,
    pub point: Complex64,
    pub image: Complex64,
    pub clearance: f64,
}

#[derive(Clone, Debug)]
pub struct GeneratorSystem {
    generators: Vec<Polynomial>,
    weights: Vec<f64>,
    cumulative: Vec<f64>,
    escape_radius: f64,
    trap: Option<TrapCertificate>,
}

/// Validates generators and weights and computes the escape radius.
pub fn build_system(
    polys: Vec<Polynomial>,
    weights: Vec<f64>,
) -> Result<GeneratorSystem, SystemError> {
    if polys.is_empty() {
        return Err(SystemError::Empty);
    }
    if polys.len() != weights.len() {
        return Err(SystemError::LengthMismatch {
            polys: polys.len(),
            weights: weights.len(),
        });
    }
    for (index, g) in polys.iter().enumerate() {
        if g.degree() < 2 {
            return Err(SystemError::Degree {
                index,
                degree: g.degree(),
            });
        }
    }
    for i in 0..polys.len() {
        for j in i + 1..polys.len() {
            if polys[i].coeffs() == polys[j].coeffs() {
                return Err(SystemError::DuplicateGenerator(i, j));
            }
        }
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_TOL {
        return Err(SystemError::Weight(format!("sum is {sum}")));
    }
    if weights.len() >= 2 && weights.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
        return Err(SystemError::Weight(format!(
            "{weights:?} has an entry outside (0,1)"
        )));
    }
    let mut acc = 0.0;
    let mut cumulative: Vec<f64> = weights
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    *cumulative.last_mut().unwrap() = f64::INFINITY;
    let escape_radius = escape_radius(&polys);
    Ok(GeneratorSystem {
        generators: polys,
        weights,
        cumulative,
        escape_radius,
        trap: None,
    })
}

impl GeneratorSystem {
    pub fn generators(&self) -> &[Polynomial] {
        &self.generators
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.generators.iter().map(Polynomial::degree).collect()
    }

    pub fn escape_radius(&self) -> f64 {
        self.escape_radius
    }

    pub fn trap(&self) -> Option<&TrapCertificate> {
        self.trap.as_ref()
    }

    pub fn with_trap(mut self, certificate: TrapCertificate) -> Self {
        self.trap = Some(certificate);
        self
    }

    pub fn without_trap(mut self) -> Self {
        self.trap = None;
        self
    }

    /// Generator index for a uniform draw `u ∈ [0,1)` (inverse CDF).
    #[inline]
    pub fn pick(&self, u: f64) -> usize {
        self.cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.len() - 1)
    }

    #[inline]
    pub fn in_trap(&self, z: Complex64) -> bool {
        self.trap.as_ref().is_some_and(|t| t.region.contains(z))
    }

    #[inline]
    pub fn escaped(&self, z: Complex64) -> bool {
        !(z.norm_sqr() <= self.escape_radius * self.escape_radius)
    }

    /// Applies letters (1-based) in order: the first letter acts first.
    pub fn apply_word(&self, z: Complex64, letters: &[u8]) -> Complex64 {
        letters
            .iter()
            .fold(z, |w, &d| self.generators[d as usize - 1].eval(w))
    }

    /// Same system with generators (and weights) reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> Result<GeneratorSystem, SystemError> {
        let polys = order.iter().map(|&i| self.generators[i].clone()).collect();
        let weights = order.iter().map(|&i| self.weights[i]).collect();
        let mut sys = build_system(polys, weights)?;
        sys.trap = self.trap.clone();
        Ok(sys)
    }

    /// Stable 64-bit FNV-1a digest of generators and weights, as hex.
    pub fn hash_hex(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for (g, p) in self.generators.iter().zip(&self.weights) {
            feed(g.coeffs().len() as u64);
            for c in g.coeffs() {
                feed(c.re.to_bits());
                feed(c.im.to_bits());
            }
            feed(p.to_bits());
        }
        let mut s = String::new();
        write!(s, "{h:016x}").unwrap();
        s
    }
}

/// Checks forward invariance of `candidate` under every generator.
///
/// Disks: `samples` points on each boundary circle; each generator must map the
/// whole circle into a single disk of the union with clearance exceeding the
/// Lipschitz slack between neighboring samples (maximum modulus then covers the
/// interior). Masks: up to `samples` pixels of the mask, whose images must land
/// in the mask dilated by its slack.
pub fn certify_trap(
    sys: &GeneratorSystem,
    candidate: TrapRegion,
    samples: usize,
) -> Result<TrapCertificate, TrapFailure> {
    let samples = samples.max(8);
    let margin = match &candidate {
        TrapRegion::Disks(disks) => certify_disks(sys, disks, samples)?,
        TrapRegion::Mask { mask, slack } => certify_mask(sys, mask, *slack, samples)?,
    };
    Ok(TrapCertificate {
        region: candidate,
        margin,
        samples,
    })
}

fn certify_disks(
    sys: &GeneratorSystem,
    disks: &[Disk],
    samples: usize,
) -> Result<f64, TrapFailure> {
    let mut margin = f64::INFINITY;
    for disk in disks {
        let boundary: Vec<Complex64> = (0..samples)
            .map(|k| {
                disk.center
                    + Complex64::from_polar(
                        disk.radius,
                        std::f64::consts::TAU * k as f64 / samples as f64,
                    )
            })
            .collect();
        let spacing = std::f64::consts::TAU * disk.radius / samples as f64;
        for (j, g) in sys.generators.iter().enumerate() {
            let dg = g.derivative();
            let images: Vec<Complex64> = boundary.iter().map(|&z| g.eval(z)).collect();
            let lipschitz = boundary
                .iter()
                .map(|&z| dg.eval(z).norm())
                .fold(0.0, f64::max);
            let slack = lipschitz * spacing / 2.0;
            // best single target disk for this circle
            let (clearance, worst) = disks
                .iter()
                .map(|t| {
                    images
                        .iter()
                        .enumerate()
                        .map(|(k, w)| (t.radius - (w - t.center).norm(), k))
                        .fold((f64::INFINITY, 0), |a, b| if b.0 < a.0 { b } else { a })
                })
                .fold((f64::NEG_INFINITY, 0), |a, b| if b.0 > a.0 { b } else { a });
            let effective = clearance - slack;
            if !(effective > 0.0) {
                return Err(TrapFailure {
                    generator: j,
                    point: boundary[worst],
                    image: images[worst],
                    clearance: effective,
                });
            }
            margin = margin.min(effective);
        }
    }
    Ok(margin)
}

fn certify_mask(
    sys: &GeneratorSystem,
    mask: &RegionMask,
    slack: usize,
    samples: usize,
) -> Result<f64, TrapFailure> {
    let region = mask.dilate_n(slack);
    let dist = region.distance_to_complement();
    let pixels: Vec<usize> = (0..mask.bits.len()).filter(|&k| mask.bits[k]).collect();
    if pixels.is_empty() {
        return Err(TrapFailure {
            generator: 0,
            point: Complex64::new(f64::NAN, f64::NAN),
            image: Complex64::new(f64::NAN, f64::NAN),
            clearance: f64::NEG_INFINITY,
        });
    }
    let stride = pixels.len().div_ceil(samples).max(1);
    let px = mask.grid.pixel_size();
    let dist = &dist;
    let region = &region;
    let worst = pixels
        .par_iter()
        .step_by(stride)
        .flat_map_iter(|&k| {
            let z = mask.grid.point(k);
            sys.generators.iter().enumerate().map(move |(j, g)| {
                let w = g.eval(z);
                let d = match region.grid.locate(w) {
                    Some((c, r)) => dist[region.grid.index(c, r)] as f64,
                    None => 0.0,
                };
                (d, j, z, w)
            })
        })
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)))
        .unwrap();
    let clearance = (worst.0 - 0.5) * px;
    if worst.0 < 1.0 {
        Err(TrapFailure {
            generator: worst.1,
            point: worst.2,
            image: worst.3,
            clearance,
        })
    } else {
        Ok(clearance)
    }
}

/// Result of a word-tree search from one point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KhatResult {
    pub verdict: OrbitVerdict,
    /// 1-based letters of an escaping word, when one was found.
    pub witness: Option<Vec<u8>>,
    pub budget_exceeded: bool,
    pub nodes: usize,
}

impl KhatResult {
    pub fn witness_string(&self) -> String {
        self.witness
            .as_ref()
            .map(|w| w.iter().map(|d| char::from(b'0' + d)).collect())
            .unwrap_or_default()
    }
}

struct TreeSearch<'a> {
    sys: &'a GeneratorSystem,
    depth: usize,
    budget: usize,
    nodes: usize,
    exceeded: bool,
    all_trapped: bool,
    trap_depth: usize,
    word: Vec<u8>,
}

impl TreeSearch<'_> {
    fn visit(&mut self, z: Complex64) -> bool {
        if self.nodes >= self.budget {
            self.exceeded = true;
            self.all_trapped = false;
            return false;
        }
        self.nodes += 1;
        if self.sys.escaped(z) {
            return true;
        }
        if self.sys.in_trap(z) {
            self.trap_depth = self.trap_depth.max(self.word.len());
            return false;
        }
        if self.word.len() == self.depth {
            self.all_trapped = false;
            return false;
        }
        for (j, g) in self.sys.generators.iter().enumerate() {
            self.word.push(j as u8 + 1);
            if self.visit(g.eval(z)) {
                return true;
            }
            self.word.pop();
        }
        false
    }
}

/// Explores the word tree from `z` to decide membership in `K̂(G)`.
///
/// `Escaped` carries a witness word (so `z ∉ K̂(G)`); `Trapped` means every
/// branch reached the certified trap by `depth`; anything else is `Undecided`.
pub fn khat_membership(
    sys: &GeneratorSystem,
    z: Complex64,
    depth: usize,
    budget: usize,
) -> KhatResult {
    let mut search = TreeSearch {
        sys,
        depth,
        budget,
        nodes: 0,
        exceeded: false,
        all_trapped: true,
        trap_depth: 0,
        word: Vec::new(),
    };
    let escaped = search.visit(z);
    let verdict = if escaped {
        OrbitVerdict::escaped(search.word.len() as u32)
    } else if search.all_trapped && sys.trap.is_some() {
        OrbitVerdict::trapped(search.trap_depth as u32)
    } else {
        OrbitVerdict::undecided(depth as u32)
    };
    KhatResult {
        verdict,
        witness: escaped.then(|| search.word.clone()),
        budget_exceeded: search.exceeded,
        nodes: search.nodes,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundedness {
    Bounded,
    Unbounded,
    Undecided,
}

#[derive(Clone, Debug, Serialize)]
pub struct PostcriticalReport {
    pub points: Vec<Complex64>,
    pub verdict: Boundedness,
    /// Every surviving orbit point ended inside the certified trap.
    pub trap_certified: bool,
    pub depth: usize,
    pub label: String,
}

/// Forward orbits of all finite critical values under all words up to `depth`.
pub fn postcritical_sample(
    sys: &GeneratorSystem,
    depth: usize,
    budget: usize,
) -> Result<PostcriticalReport, PolyError> {
    let mut frontier = Vec::new();
    for g in &sys.generators {
        frontier.extend(g.critical_values()?);
    }
    let key = |z: Complex64| (z.re.to_bits(), z.im.to_bits());
    let mut seen: HashSet<(u64, u64)> = frontier.iter().map(|&z| key(z)).collect();
    let mut points = frontier.clone();
    let report = |points, verdict, certified, label: String| PostcriticalReport {
        points,
        verdict,
        trap_certified: certified,
        depth,
        label,
    };
    for level in 0..=depth {
        if frontier.iter().any(|&z| sys.escaped(z)) {
            return Ok(report(
                points,
                Boundedness::Unbounded,
                false,
                format!("unbounded (escape by depth {level})"),
            ));
        }
        frontier.retain(|&z| !sys.in_trap(z));
        if frontier.is_empty() {
            return Ok(report(
                points,
                Boundedness::Bounded,
                sys.trap.is_some(),
                format!("bounded (trapped by depth {level})"),
            ));
        }
        if level == depth {
            break;
        }
        let mut next = Vec::new();
        for &z in &frontier {
            for g in &sys.generators {
                let w = g.eval(z);
                if seen.insert(key(w)) {
                    next.push(w);
                    points.push(w);
                }
            }
        }
        if next.is_empty() {
            return Ok(report(
                points,
                Boundedness::Bounded,
                false,
                format!("bounded (orbit closed at depth {level})"),
            ));
        }
        if points.len() > budget {
            return Ok(report(
                points,
                Boundedness::Undecided,
                false,
                format!("undecided (budget hit at depth {level})"),
            ));
        }
        frontier = next;
    }
    Ok(report(
        points,
        Boundedness::Bounded,
        false,
        format!("bounded (depth-{depth} evidence)"),
    ))
}

/// Raster of `g^{-1}(mask)` by forward evaluation.
pub fn preimage_mask(g: &Polynomial, mask: &RegionMask) -> RegionMask {
    RegionMask::from_fn(mask.grid, |z| mask.contains_point(g.eval(z)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Disjointness {
    Disjoint,
    Overlapping,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct DisjointnessReport {
    pub verdict: Disjointness,
    pub annulus_pixels: usize,
    pub preimage_pixels: Vec<usize>,
    /// `(i, j, eroded overlap, dilated overlap)` per pair, 0-based.
    pub pairs: Vec<(usize, usize, usize, usize)>,
    /// Eroded preimage pixels outside the annulus.
    pub outside_annulus: usize,
}

/// Tests `h_i^{-1}(A) ∩ h_j^{-1}(A) = ∅` and `⋃ h_j^{-1}(A) ⊂ A` on the raster of `A`.
pub fn preimage_disjointness(sys: &GeneratorSystem, annulus: &RegionMask) -> DisjointnessReport {
    let masks: Vec<RegionMask> = sys
        .generators
        .iter()
        .map(|g| preimage_mask(g, annulus))
        .collect();
    let eroded: Vec<RegionMask> = masks.iter().map(RegionMask::erode).collect();
    let dilated: Vec<RegionMask> = masks.iter().map(RegionMask::dilate).collect();
    let mut pairs = Vec::new();
    for i in 0..masks.len() {
        for j in i + 1..masks.len() {
            let e = eroded[i].intersection_count(&eroded[j]).unwrap();
            let d = dilated[i].intersection_count(&dilated[j]).unwrap();
            pairs.push((i, j, e, d));
        }
    }
    let outside_annulus: usize = eroded
        .iter()
        .map(|m| m.and_not(annulus).unwrap().count())
        .sum();
    let annulus_pixels = annulus.count();
    let verdict = if sys.len() == 1 || (pairs.iter().all(|p| p.2 == 0) && outside_annulus == 0) {
        Disjointness::Disjoint
    } else if pairs
        .iter()
        .any(|p| p.3 as f64 > 1e-3 * annulus_pixels as f64)
    {
        Disjointness::Overlapping
    } else {
        Disjointness::Inconclusive
    };
    DisjointnessReport {
        verdict,
        annulus_pixels,
        preimage_pixels: masks.iter().map(RegionMask::count).collect(),
        pairs,
        outside_annulus,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::poly::{filled_julia_membership, VerdictKind};
    use crate::reference;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sq() -> Polynomial {
        Polynomial::from_real(&[0.0, 0.0, 1.0])
    }

    #[test]
    fn build_system_validation() {
        let sys = reference::bare_system();
        assert_eq!(sys.escape_radius(), 128.0);
        assert!(sys.trap().is_none());
        assert!(build_system(vec![sq()], vec![1.0]).is_ok());
        assert_eq!(
            build_system(vec![sq(), sq()], vec![0.5, 0.5]).unwrap_err(),
            SystemError::DuplicateGenerator(0, 1)
        );
        assert!(matches!(
            build_system(vec![sq(), sq().mul(&sq())], vec![0.6, 0.5]),
            Err(SystemError::Weight(_))
        ));
        assert!(matches!(
            build_system(vec![sq(), sq().mul(&sq())], vec![1.0, 0.0]),
            Err(SystemError::Weight(_))
        ));
        assert!(matches!(
            build_system(vec![Polynomial::from_real(&[0.0, 1.0])], vec![1.0]),
            Err(SystemError::Degree {
                index: 0,
                degree: 1
            })
        ));
        assert!(matches!(
            build_system(vec![sq()], vec![0.5, 0.5]),
            Err(SystemError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn pick_follows_weights() {
        let sys = build_system(
            vec![
                sq(),
                Polynomial::from_real(&[0.1, 0.0, 1.0]),
                Polynomial::from_real(&[0.2, 0.0, 1.0]),
            ],
            vec![0.2, 0.3, 0.5],
        )
        .unwrap();
        assert_eq!(sys.pick(0.0), 0);
        assert_eq!(sys.pick(0.19), 0);
        assert_eq!(sys.pick(0.2), 1);
        assert_eq!(sys.pick(0.49), 1);
        assert_eq!(sys.pick(0.999_999), 2);
    }

    #[test]
    fn disk_certificates() {
        let sys = reference::bare_system();
        let cert = certify_trap(&sys, reference::trap_disks(), 720).unwrap();
        assert!(cert.margin > 0.0);
        let single = certify_trap(&sys, TrapRegion::disk(c(0.0, 0.0), 0.4), 720).unwrap();
        assert!(single.margin > 0.04);
        let z2 = build_system(vec![sq()], vec![1.0]).unwrap();
        assert!(certify_trap(&z2, TrapRegion::disk(c(0.0, 0.0), 0.5), 256).is_ok());
        assert!(certify_trap(&z2, TrapRegion::disk(c(0.0, 0.0), 1.2), 256).is_err());
    }

    #[test]
    fn squared_variant_fails_small_disk() {
        // h1 = (z²−1)² sends 0.4 to (0.16−1)² ≈ 0.7056, outside D(0, 0.4)
        let sys = build_system(
            vec![
                Polynomial::from_real(&[1.0, 0.0, -2.0, 0.0, 1.0]),
                Polynomial::monomial(c(1.0 / 16.0, 0.0), 4),
            ],
            vec![0.5, 0.5],
        )
        .unwrap();
        let fail = certify_trap(&sys, TrapRegion::disk(c(0.0, 0.0), 0.4), 720).unwrap_err();
        assert_eq!(fail.generator, 0);
        assert!(fail.clearance < 0.0);
    }

    #[test]
    fn trap_spot_check_words_stay_inside() {
        let sys = reference::system();
        let TrapRegion::Disks(disks) = &sys.trap().unwrap().region else {
            panic!()
        };
        let mut rng = crate::rng::StreamRng::new(5, 0, 0);
        for _ in 0..500 {
            let d = disks[rng.below(disks.len())];
            let z = d.center
                + Complex64::from_polar(
                    d.radius * rng.next_f64().sqrt(),
                    std::f64::consts::TAU * rng.next_f64(),
                );
            let mut w = z;
            for _ in 0..10 {
                w = sys.generators()[rng.below(2)].eval(w);
                assert!(sys.in_trap(w), "{z} left the trap at {w}");
            }
        }
    }

    #[test]
    fn khat_examples() {
        let sys = reference::system();
        let zero = khat_membership(&sys, c(0.0, 0.0), DEFAULT_KHAT_DEPTH, DEFAULT_BUDGET);
        assert_eq!(zero.verdict.kind, VerdictKind::Trapped);
        let three = khat_membership(&sys, c(3.0, 0.0), DEFAULT_KHAT_DEPTH, DEFAULT_BUDGET);
        assert_eq!(three.verdict.kind, VerdictKind::Escaped);
        let j2 = khat_membership(&sys, c(4.0, 0.0), DEFAULT_KHAT_DEPTH, DEFAULT_BUDGET);
        assert_eq!(j2.verdict.kind, VerdictKind::Escaped);
        assert_eq!(j2.witness.as_deref().unwrap()[0], 1);
        // without a certificate nothing can be certified inside
        let plain = reference::bare_system();
        assert_eq!(
            khat_membership(&plain, c(0.0, 0.0), 6, 1000).verdict.kind,
            VerdictKind::Undecided
        );
    }

    #[test]
    fn khat_escape_is_stable_under_depth() {
        let sys = reference::system();
        for k in 0..40 {
            let z = c(-2.2 + 0.11 * k as f64, 0.37);
            let shallow = khat_membership(&sys, z, 8, DEFAULT_BUDGET);
            if shallow.verdict.kind == VerdictKind::Escaped {
                let deep = khat_membership(&sys, z, 20, DEFAULT_BUDGET);
                assert_eq!(deep.verdict.kind, VerdictKind::Escaped);
            }
        }
    }

    #[test]
    fn khat_budget_is_reported() {
        let sys = reference::system();
        let r = khat_membership(&sys, c(1.5, 0.0), 30, 3);
        assert!(r.budget_exceeded);
        assert_eq!(r.verdict.kind, VerdictKind::Undecided);
        assert_eq!(r.nodes, 3);
    }

    #[test]
    fn khat_agrees_with_inner_filled_julia_set() {
        let sys = reference::system();
        let h1 = &sys.generators()[0];
        let r1 = escape_radius(std::slice::from_ref(h1));
        let grid = GridSpec::square(c(0.0, 0.0), 2.0, 64).unwrap();
        let inner = RegionMask::from_fn(grid, |z| {
            filled_julia_membership(h1, z, 200, r1).kind != VerdictKind::Escaped
        });
        let band = inner.dilate_n(2).and_not(&inner.erode().erode()).unwrap();
        let khat = RegionMask::from_fn(grid, |z| {
            khat_membership(&sys, z, DEFAULT_KHAT_DEPTH, DEFAULT_BUDGET)
                .verdict
                .kind
                == VerdictKind::Trapped
        });
        let mut disagree = 0;
        for k in 0..grid.len() {
            if khat.bits[k] != inner.bits[k] && !band.bits[k] {
                disagree += 1;
            }
        }
        assert_eq!(disagree, 0);
    }

    #[test]
    fn postcritical_examples() {
        let sys = reference::system();
        let pc = postcritical_sample(&sys, 12, 100_000).unwrap();
        assert_eq!(pc.verdict, Boundedness::Bounded);
        assert!(pc.trap_certified);
        let h1 = &sys.generators()[0];
        for &z in &pc.points {
            assert_eq!(
                filled_julia_membership(h1, z, 200, 4.0).kind,
                VerdictKind::Undecided
            );
        }

        let escaping = build_system(
            vec![Polynomial::from_real(&[10.0, 0.0, 1.0]), sq()],
            vec![0.5, 0.5],
        )
        .unwrap();
        assert_eq!(
            postcritical_sample(&escaping, 12, 100_000).unwrap().verdict,
            Boundedness::Unbounded
        );

        let single = build_system(vec![sq()], vec![1.0]).unwrap();
        let r = postcritical_sample(&single, 12, 100_000).unwrap();
        assert_eq!(r.verdict, Boundedness::Bounded);
        assert!(r.label.contains("orbit closed"));

        let wandering = build_system(
            vec![Polynomial::new(vec![c(0.3, 0.1), c(0.0, 0.0), c(1.0, 0.0)])],
            vec![1.0],
        )
        .unwrap();
        let r = postcritical_sample(&wandering, 12, 100_000).unwrap();
        assert_eq!(r.verdict, Boundedness::Bounded);
        assert!(!r.trap_certified);
        assert!(r.label.contains("depth-12 evidence"), "{}", r.label);
    }

    #[test]
    fn postcritical_verdict_is_permutation_invariant() {
        let sys = reference::system();
        let swapped = sys.permuted(&[1, 0]).unwrap();
        assert_eq!(
            postcritical_sample(&sys, 10, 100_000).unwrap().verdict,
            postcritical_sample(&swapped, 10, 100_000).unwrap().verdict
        );
    }

    #[test]
    fn disjointness_examples() {
        let grid = GridSpec::square(c(0.0, 0.0), 1.6, 160).unwrap();
        let ring = RegionMask::from_fn(grid, |z| (0.7..1.4).contains(&z.norm()));
        let near = build_system(
            vec![sq(), Polynomial::from_real(&[0.01, 0.0, 1.0])],
            vec![0.5, 0.5],
        )
        .unwrap();
        assert_eq!(
            preimage_disjointness(&near, &ring).verdict,
            Disjointness::Overlapping
        );
        let single = build_system(vec![sq()], vec![1.0]).unwrap();
        assert_eq!(
            preimage_disjointness(&single, &ring).verdict,
            Disjointness::Disjoint
        );
    }

    #[test]
    fn squared_variant_breaks_preimage_containment() {
        // With h1 = (z²−1)², h1(0) = 1 lies in A, so 0 ∈ h1^{-1}(A) although 0 ∉ A.
        let h1 = Polynomial::from_real(&[1.0, 0.0, -2.0, 0.0, 1.0]);
        let h2 = Polynomial::monomial(c(1.0 / 16.0, 0.0), 4);
        let sys = build_system(vec![h1, h2.clone()], vec![0.5, 0.5]).unwrap();
        let grid = GridSpec::square(c(0.0, 0.0), 2.8, 256).unwrap();
        let r2 = escape_radius(std::slice::from_ref(&h2));
        let annulus = RegionMask::from_fn(grid, |z| {
            z.norm() > 0.4 && filled_julia_membership(&h2, z, 300, r2).kind != VerdictKind::Escaped
        });
        let report = preimage_disjointness(&sys, &annulus);
        assert_ne!(report.verdict, Disjointness::Disjoint);
        assert!(report.outside_annulus > 0);
    }
}
