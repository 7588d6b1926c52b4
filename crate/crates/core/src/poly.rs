//! Complex polynomials and single-map dynamics.
//!
//! Coefficients are stored in ascending degree order. Evaluation saturates to
//! a point-at-infinity sentinel once a modulus exceeds [`SATURATION`], so long
//! escaping orbits never produce NaN.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Modulus beyond which a value is treated as the point at infinity.
pub const SATURATION: f64 = 1e150;

/// Largest degree produced by explicit composition.
pub const DEGREE_CAP: usize = 4096;

const ROOT_TOL: f64 = 1e-12;
const ROOT_MAX_SWEEPS: usize = 200;

/// The sentinel returned for values at (or beyond) saturation.
pub const AT_INFINITY: Complex64 = Complex64::new(f64::INFINITY, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("composition degree {degree} exceeds cap {cap}")]
    DegreeCap { degree: usize, cap: usize },
    #[error("root iteration did not converge after {sweeps} sweeps (worst residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },
    #[error("cannot parse coefficient `{0}`")]
    Parse(String),
    #[error("empty coefficient list")]
    Empty,
}

/// True for the saturation sentinel, NaN, or any modulus above [`SATURATION`].
#[inline]
pub fn is_at_infinity(z: Complex64) -> bool {
    !(z.norm() <= SATURATION)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl Polynomial {
    /// Builds a polynomial from ascending coefficients, trimming trailing zeros.
    pub fn new(mut coeffs: Vec<Complex64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == Complex64::new(0.0, 0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(Complex64::new(0.0, 0.0));
        }
        Self { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    /// `c * z^degree`.
    pub fn monomial(c: Complex64, degree: usize) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); degree + 1];
        coeffs[degree] = c;
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Leading coefficient `a(g)`.
    pub fn leading(&self) -> Complex64 {
        self.coeffs[self.degree()]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == Complex64::new(0.0, 0.0)
    }

    /// Horner evaluation with saturation.
    #[inline]
    pub fn eval(&self, z: Complex64) -> Complex64 {
        if is_at_infinity(z) {
            return if self.degree() == 0 {
                self.coeffs[0]
            } else {
                AT_INFINITY
            };
        }
        let mut acc = self.coeffs[self.degree()];
        for c in self.coeffs[..self.degree()].iter().rev() {
            acc = acc * z + c;
        }
        if is_at_infinity(acc) {
            AT_INFINITY
        } else {
            acc
        }
    }

    /// Value and first derivative in one Horner pass (no saturation).
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = self.coeffs[self.degree()];
        let mut dp = Complex64::new(0.0, 0.0);
        for c in self.coeffs[..self.degree()].iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.degree() == 0 {
            return Polynomial::new(vec![Complex64::new(0.0, 0.0)]);
        }
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * k as f64)
                .collect(),
        )
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = vec![Complex64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }

    fn add_constant(&self, c: Complex64) -> Polynomial {
        let mut coeffs = self.coeffs.clone();
        coeffs[0] += c;
        Polynomial::new(coeffs)
    }

    /// `self ∘ inner`, i.e. `z ↦ self(inner(z))`.
    pub fn compose(&self, inner: &Polynomial) -> Result<Polynomial, PolyError> {
        let degree = self.degree() * inner.degree();
        if degree > DEGREE_CAP {
            return Err(PolyError::DegreeCap {
                degree,
                cap: DEGREE_CAP,
            });
        }
        let mut acc = Polynomial::new(vec![self.leading()]);
        for c in self.coeffs[..self.degree()].iter().rev() {
            acc = acc.mul(inner).add_constant(*c);
        }
        Ok(acc)
    }

    /// `‖Dg_z‖` in the spherical metric: `|g'(z)| (1+|z|²) / (1+|g(z)|²)`.
    pub fn spherical_deriv_norm(&self, z: Complex64) -> f64 {
        let (gz, dgz) = self.eval_with_derivative(z);
        let num = dgz.norm() * (1.0 + z.norm_sqr());
        let den = 1.0 + gz.norm_sqr();
        if den.is_infinite() {
            0.0
        } else {
            num / den
        }
    }

    /// All complex roots, by Aberth–Ehrlich simultaneous iteration.
    pub fn roots(&self) -> Result<Vec<Complex64>, PolyError> {
        aberth(self)
    }

    /// Solutions of `self(ζ) = w`.
    pub fn preimages(&self, w: Complex64) -> Result<Vec<Complex64>, PolyError> {
        aberth(&self.add_constant(-w))
    }

    pub fn critical_points(&self) -> Result<Vec<Complex64>, PolyError> {
        self.derivative().roots()
    }

    pub fn critical_values(&self) -> Result<Vec<Complex64>, PolyError> {
        Ok(self
            .critical_points()?
            .into_iter()
            .map(|c| self.eval(c))
            .collect())
    }
}

/// Abs-sum of coefficients weighted by `|z|^k`, the natural scale for residuals.
fn magnitude_scale(p: &Polynomial, z: Complex64) -> f64 {
    let r = z.norm();
    p.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.norm())
}

fn aberth(p: &Polynomial) -> Result<Vec<Complex64>, PolyError> {
    let n = p.degree();
    match n {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![-p.coeffs[0] / p.coeffs[1]]),
        _ => {}
    }
    let lead = p.leading();
    let monic = Polynomial::new(p.coeffs.iter().map(|c| c / lead).collect());
    let center = -monic.coeffs[n - 1] / n as f64;
    // geometric mean of root distances from the centroid
    let radius = monic.eval(center).norm().powf(1.0 / n as f64);
    if (radius == 0.0 || !radius.is_finite())
        && radius == 0.0 {
            // p(z) = (z - c)^n up to rounding; check and return the repeated root
            let shifted = (0..=n).all(|k| {
                let expect = binomial(n, k) * (-center).powu((n - k) as u32);
                (monic.coeffs[k] - expect).norm() <= 1e-12 * (1.0 + expect.norm())
            });
            if shifted {
                return Ok(vec![center; n]);
            }
        }
    let radius = if radius > 0.0 && radius.is_finite() {
        radius
    } else {
        1.0
    };
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let theta = std::f64::consts::TAU * k as f64 / n as f64 + 0.4;
            center + Complex64::from_polar(radius, theta)
        })
        .collect();

    for _ in 0..ROOT_MAX_SWEEPS {
        let mut converged = true;
        for k in 0..n {
            let (pv, dpv) = monic.eval_with_derivative(z[k]);
            if pv == Complex64::new(0.0, 0.0) {
                continue;
            }
            let ratio = pv / dpv;
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != k)
                .map(|j| (z[k] - z[j]).inv())
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if !step.is_finite() {
                continue;
            }
            z[k] -= step;
            if step.norm() > ROOT_TOL * (1.0 + z[k].norm()) {
                converged = false;
            }
        }
        if converged {
            return Ok(z);
        }
    }
    // slow convergence near multiple roots: accept if every residual is at rounding level
    let residual = z
        .iter()
        .map(|&r| monic.eval(r).norm() / magnitude_scale(&monic, r).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    if residual <= 1e-10 {
        Ok(z)
    } else {
        Err(PolyError::NoConvergence {
            sweeps: ROOT_MAX_SWEEPS,
            residual,
        })
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Radius `R` with `|z| ≥ R ⇒ |h(z)| ≥ 2|z|` for every generator.
pub fn escape_radius(gs: &[Polynomial]) -> f64 {
    gs.iter()
        .map(|g| {
            let d = g.degree();
            let lower: f64 = g.coeffs[..d].iter().map(|c| c.norm()).sum();
            f64::max(1.0, (2.0 + lower) / g.leading().norm())
        })
        .fold(1.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictKind {
    Escaped,
    Trapped,
    Undecided,
}

impl fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            VerdictKind::Escaped => "Escaped",
            VerdictKind::Trapped => "Trapped",
            VerdictKind::Undecided => "Undecided",
        };
        f.write_str(s)
    }
}

/// Outcome of following an orbit: what was decided and at which step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrbitVerdict {
    pub kind: VerdictKind,
    pub steps: u32,
}

impl OrbitVerdict {
    pub fn escaped(steps: u32) -> Self {
        Self {
            kind: VerdictKind::Escaped,
            steps,
        }
    }
    pub fn trapped(steps: u32) -> Self {
        Self {
            kind: VerdictKind::Trapped,
            steps,
        }
    }
    pub fn undecided(steps: u32) -> Self {
        Self {
            kind: VerdictKind::Undecided,
            steps,
        }
    }
}

/// Escape-time test for `z ∈ K(g)`. `Undecided(n_max)` reads as "inside at this resolution".
pub fn filled_julia_membership(
    g: &Polynomial,
    z: Complex64,
    n_max: u32,
    radius: f64,
) -> OrbitVerdict {
    let mut w = z;
    for n in 0..=n_max {
        if !(w.norm() <= radius) {
            return OrbitVerdict::escaped(n);
        }
        if n < n_max {
            w = g.eval(w);
        }
    }
    OrbitVerdict::undecided(n_max)
}

fn format_real(x: f64) -> String {
    // Rust's shortest round-trip representation (at most 17 significant digits).
    format!("{x:?}")
}

fn format_complex(c: Complex64) -> String {
    if c.im == 0.0 && c.im.is_sign_positive() {
        format_real(c.re)
    } else if c.im.is_sign_negative() {
        format!("{}-{}i", format_real(c.re), format_real(-c.im))
    } else {
        format!("{}+{}i", format_real(c.re), format_real(c.im))
    }
}

fn parse_complex(tok: &str) -> Result<Complex64, PolyError> {
    let s = tok.trim();
    let err = || PolyError::Parse(tok.to_string());
    if s.is_empty() {
        return Err(err());
    }
    let Some(body) = s.strip_suffix('i') else {
        return s
            .parse::<f64>()
            .map(|re| Complex64::new(re, 0.0))
            .map_err(|_| err());
    };
    // split at the last sign that is not the leading sign and not an exponent sign
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    match split {
        Some(i) => {
            let re = body[..i].parse::<f64>().map_err(|_| err())?;
            let im_str = &body[i..];
            let im = match im_str {
                "+" => 1.0,
                "-" => -1.0,
                _ => im_str.parse::<f64>().map_err(|_| err())?,
            };
            Ok(Complex64::new(re, im))
        }
        None => {
            let im = match body {
                "" | "+" => 1.0,
                "-" => -1.0,
                _ => body.parse::<f64>().map_err(|_| err())?,
            };
            Ok(Complex64::new(0.0, im))
        }
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coeffs.iter().map(|&c| format_complex(c)).collect();
        f.write_str(&parts.join(","))
    }
}

impl FromStr for Polynomial {
    type Err = PolyError;

    /// Comma-separated ascending coefficients, each `re` or `re+imi`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().is_empty() {
            return Err(PolyError::Empty);
        }
        let coeffs = s
            .split(',')
            .map(parse_complex)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Polynomial::new(coeffs))
    }
}

impl Serialize for Polynomial {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Polynomial {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
