//! Verification checks on the reference system and the 1-D systems.
//!
//! Each check measures something against a tolerance and never panics on a
//! failed measurement; the outcome is a [`CheckResult`].

use std::cell::OnceCell;
use std::time::Instant;

use coliseum::affine::{self, StaircaseMode};
use coliseum::field::{self, Sampling};
use coliseum::reference;
use coliseum::semigroup::{
    build_system, certify_trap, preimage_disjointness, Disjointness, GeneratorSystem, TrapRegion,
};
use coliseum::symbolic::{self, LevelSet, Surround, Trichotomy};
use coliseum::{GridSpec, Polynomial, RegionMask, ScalarField, StreamRng, Word};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::config::{RunConfig, VerifyConfig};

pub const CHECK_NAMES: [&str; 11] = [
    "closed_forms",
    "geometry",
    "boundary_values",
    "fixed_point",
    "word_agreement",
    "order_audit",
    "staircase",
    "holder",
    "kernel_probe",
    "trichotomy",
    "determinism",
];

/// One measured quantity and its bound.
#[derive(Clone, Debug, Serialize)]
pub struct Measurement {
    pub label: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub measurements: Vec<Measurement>,
    pub seconds: f64,
    pub detail: serde_json::Value,
}

impl CheckResult {
    /// One-line summary: status, name, and each measurement.
    pub fn line(&self) -> String {
        let parts: Vec<String> = self
            .measurements
            .iter()
            .map(|m| {
                format!(
                    "{}={}{}{}",
                    m.label,
                    fmt_value(m.measured),
                    if m.passed { "" } else { "!" },
                    fmt_tol(m.tolerance)
                )
            })
            .collect();
        format!(
            "{} {} ({:.1}s) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.seconds,
            parts.join(" ")
        )
    }
}

fn fmt_value(v: f64) -> String {
    if v == 0.0 || v == 1.0 || (1e-3..1e4).contains(&v.abs()) {
        format!("{v:.4}")
    } else {
        format!("{v:.3e}")
    }
}

fn fmt_tol(t: f64) -> String {
    if t.is_nan() {
        String::new()
    } else {
        format!("[tol {}]", fmt_value(t))
    }
}

#[derive(Default)]
struct Builder {
    measurements: Vec<Measurement>,
    detail: serde_json::Map<String, serde_json::Value>,
}

impl Builder {
    /// Records `measured ≤ tolerance`.
    fn at_most(&mut self, label: &str, measured: f64, tolerance: f64) -> &mut Self {
        self.push(label, measured, tolerance, measured <= tolerance)
    }

    /// Records `measured ≥ bound`.
    fn at_least(&mut self, label: &str, measured: f64, bound: f64) -> &mut Self {
        self.push(label, measured, bound, measured >= bound)
    }

    /// Records a pass/fail flag as 1/0.
    fn holds(&mut self, label: &str, ok: bool) -> &mut Self {
        self.push(label, if ok { 1.0 } else { 0.0 }, f64::NAN, ok)
    }

    fn push(&mut self, label: &str, measured: f64, tolerance: f64, passed: bool) -> &mut Self {
        self.measurements.push(Measurement {
            label: label.into(),
            measured,
            tolerance,
            passed,
        });
        self
    }

    fn note(&mut self, key: &str, value: serde_json::Value) -> &mut Self {
        self.detail.insert(key.into(), value);
        self
    }

    fn finish(self, name: &str, started: Instant) -> CheckResult {
        CheckResult {
            name: name.into(),
            passed: !self.measurements.is_empty() && self.measurements.iter().all(|m| m.passed),
            measurements: self.measurements,
            seconds: started.elapsed().as_secs_f64(),
            detail: serde_json::Value::Object(self.detail),
        }
    }
}

/// Shared state: the reference system and lazily rendered fields.
pub struct Context {
    pub scale: VerifyConfig,
    system: GeneratorSystem,
    field: OnceCell<ScalarField>,
    limit_field: OnceCell<ScalarField>,
}

impl Context {
    pub fn new(scale: VerifyConfig) -> Self {
        Self {
            scale,
            system: reference::system(),
            field: OnceCell::new(),
            limit_field: OnceCell::new(),
        }
    }

    pub fn grid(&self) -> GridSpec {
        reference::window(self.scale.grid)
    }

    /// Escape field at the main scale.
    pub fn field(&self) -> &ScalarField {
        self.field.get_or_init(|| {
            let s = &self.scale;
            field::render_t(
                &self.system,
                self.grid(),
                Sampling::new(s.samples, s.n_max, s.seed),
            )
        })
    }

    /// Escape field with the larger sample count used by the operator limit.
    fn limit_field(&self) -> &ScalarField {
        if self.scale.limit_samples == self.scale.samples {
            return self.field();
        }
        self.limit_field.get_or_init(|| {
            let s = &self.scale;
            field::render_t(
                &self.system,
                self.grid(),
                Sampling::new(s.limit_samples, s.n_max, s.seed.wrapping_add(1)),
            )
        })
    }

    /// Runs one check by name; unknown names are `None`.
    pub fn run(&self, name: &str) -> Option<CheckResult> {
        let started = Instant::now();
        let mut b = Builder::default();
        match name {
            "closed_forms" => self.closed_forms(&mut b),
            "geometry" => self.geometry(&mut b),
            "boundary_values" => self.boundary_values(&mut b),
            "fixed_point" => self.fixed_point(&mut b),
            "word_agreement" => self.word_agreement(&mut b),
            "order_audit" => self.order_audit(&mut b),
            "staircase" => staircase_oracles(&mut b, self.scale.seed),
            "holder" => self.holder(&mut b),
            "kernel_probe" => self.kernel_probe(&mut b),
            "trichotomy" => self.trichotomy(&mut b),
            "determinism" => self.determinism(&mut b),
            _ => return None,
        }
        Some(b.finish(name, started))
    }

    fn closed_forms(&self, b: &mut Builder) {
        let degs = self.system.degrees();
        let p = self.system.weights();
        match (
            symbolic::u_exponent(&degs, p),
            symbolic::dim_lower_bound(&degs, p),
        ) {
            (Ok(u), Ok(dim)) => {
                b.at_most("u_exponent_error", (u.value - 0.5).abs(), 1e-12);
                b.at_most("dim_bound_error", (dim - 1.5).abs(), 1e-12);
                b.note("u_exponent", json!(u.value))
                    .note("dim_lower_bound", json!(dim));
            }
            (u, d) => {
                b.holds("closed_forms_defined", false);
                b.note("error", json!(format!("{:?} {:?}", u.err(), d.err())));
            }
        }
        let attractor = affine::mpsi_attractor(&self.system, 4);
        b.at_most(
            "sum_inv_deg_error",
            (attractor.sum_inv_deg - 0.5).abs(),
            1e-12,
        );
        b.holds("sum_inv_deg_below_one", attractor.sum_inv_deg < 1.0);
        b.holds("cantor_attractor", attractor.cantor_verdict);
        b.note("attractor_hull", json!(attractor.hull));
    }

    fn geometry(&self, b: &mut Builder) {
        let grid = self.grid();
        let h1 = reference::inner_map();
        let k = reference::filled_julia_mask(&h1, grid, self.scale.n_max);
        let bare = reference::bare_system();
        // samples come from the raster itself; the target is dilated by one
        // pixel plus one pixel of sampling slack
        match certify_trap(
            &bare,
            TrapRegion::Mask {
                mask: k.clone(),
                slack: 2,
            },
            k.count(),
        ) {
            Ok(cert) => {
                b.at_least("trap_margin", cert.margin, f64::MIN_POSITIVE);
                b.note("trap_samples", json!(cert.samples));
            }
            Err(f) => {
                b.holds("trap_certified", false);
                b.note("trap_failure", serde_json::to_value(f).unwrap_or_default());
            }
        }
        let disk = RegionMask::from_fn(grid, |z| z.norm() <= reference::HOLE_RADIUS);
        let missing = disk.and_not(&k).map(|m| m.count()).unwrap_or(usize::MAX);
        b.at_most("hole_pixels_outside_k", missing as f64, 0.0);
        let report = preimage_disjointness(&self.system, &reference::annulus_mask(grid));
        b.holds(
            "preimages_disjoint",
            report.verdict == Disjointness::Disjoint,
        );
        b.note(
            "disjointness",
            serde_json::to_value(&report).unwrap_or_default(),
        );
    }

    fn boundary_values(&self, b: &mut Builder) {
        let t = self.field();
        let grid = t.grid;
        let trap = self.system.trap().expect("reference trap").region.clone();
        let trap_pixels: Vec<usize> = (0..grid.len())
            .filter(|&k| trap.contains_with_clearance(grid.point(k), 1e-9))
            .collect();
        let mut rng = StreamRng::new(self.scale.seed, 0xB0B, 0);
        let chosen: Vec<usize> = (0..100)
            .map(|_| trap_pixels[rng.below(trap_pixels.len())])
            .collect();
        let trap_max = chosen.iter().map(|&k| t.values[k]).fold(0.0, f64::max);
        b.at_most("trap_interior_max", trap_max, 0.0);

        let r = self.system.escape_radius();
        let far: Vec<Complex64> = (0..100)
            .map(|_| {
                Complex64::from_polar(
                    r * (1.0 + 1e-9 + 10.0 * rng.next_f64()),
                    std::f64::consts::TAU * rng.next_f64(),
                )
            })
            .collect();
        let sampling = Sampling::new(self.scale.samples, self.scale.n_max, self.scale.seed);
        let far_min = field::estimate_points(&self.system, &far, sampling)
            .iter()
            .map(|e| e.value)
            .fold(1.0, f64::min);
        b.at_least("outside_escape_radius_min", far_min, 1.0);

        let fixed = Complex64::new(reference::OUTER_RADIUS, 0.0);
        let at_fixed = field::estimate_points(&self.system, &[fixed], sampling)[0];
        b.at_least("outer_fixed_point", at_fixed.value, 0.95);
        b.note("outer_fixed_point_bilinear", json!(t.bilinear(fixed)));
        b.note("trap_pixels_available", json!(trap_pixels.len()));
    }

    fn fixed_point(&self, b: &mut Builder) {
        let t = self.field();
        let n = t.meta.samples as f64;
        let jump = t.max_adjacent_jump();
        let mt = field::operator_apply(&self.system, t, 1.0);
        let mut worst_ratio = 0.0f64;
        let mut worst_residual = 0.0f64;
        let mut pixels = 0usize;
        for k in 0..t.grid.len() {
            if t.undecided[k] >= 0.01 {
                continue;
            }
            pixels += 1;
            let v = t.values[k];
            let residual = (mt.values[k] - v).abs();
            let tol = 3.0 * ((v * (1.0 - v) / n).sqrt() + jump);
            worst_residual = worst_residual.max(residual);
            worst_ratio = worst_ratio.max(residual / tol);
        }
        b.at_most("residual_to_tolerance_ratio", worst_ratio, 1.0);
        b.note("residual_sup", json!(worst_residual))
            .note("max_adjacent_jump", json!(jump))
            .note("pixels", json!(pixels));

        let g = self.limit_field();
        let phi = ScalarField::from_fn(g.grid.refined(self.scale.limit_refine), |z| {
            1.0 / (1.0 + z.norm_sqr())
        });
        let report = field::operator_limit_check(
            &self.system,
            &phi,
            g,
            0.0,
            Complex64::new(0.0, 0.0),
            self.scale.limit_steps,
            0.01,
        );
        b.at_most("operator_limit_error", report.final_error, 0.05);
        b.note("operator_limit_samples", json!(g.meta.samples))
            .note("operator_limit_refine", json!(self.scale.limit_refine))
            .note("operator_limit_errors", json!(report.errors))
            .note(
                "operator_limit_decreasing",
                json!(report.eventually_decreasing),
            );
    }

    fn word_agreement(&self, b: &mut Builder) {
        const WORDS: [&str; 10] = [
            "1(2)", "2(1)", "(12)", "(21)", "12(1)", "21(2)", "(112)", "22(1)", "11(2)", "(122)",
        ];
        let s = &self.scale;
        let mut rows = Vec::new();
        let mut worst = 0.0f64;
        for (i, text) in WORDS.iter().enumerate() {
            let w: Word = text.parse().expect("word literal");
            let comp = match symbolic::component_of_word(
                &self.system,
                &w,
                s.word_cloud,
                s.seed.wrapping_add(50 + i as u64),
            ) {
                Ok(c) => c,
                Err(e) => {
                    b.holds(&format!("cloud_{text}"), false);
                    b.note(&format!("error_{text}"), json!(e.to_string()));
                    continue;
                }
            };
            let t = comp.t_value.expect("two generators");
            let est = field::estimate_points(
                &self.system,
                &comp.cloud,
                Sampling::new(s.word_samples, s.n_max, s.seed.wrapping_add(77 + i as u64)),
            );
            let k = est.len() as f64;
            let mean = est.iter().map(|e| e.value).sum::<f64>() / k;
            let stderr = est
                .iter()
                .map(|e| e.value * (1.0 - e.value) / s.word_samples as f64)
                .sum::<f64>()
                .sqrt()
                / k;
            let ratio = if stderr > 0.0 {
                (mean - t).abs() / (3.0 * stderr)
            } else if mean == t {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(ratio);
            if i < 2 {
                b.at_most(
                    &format!("gap_word_{text}_deviation"),
                    (mean - 0.5).abs(),
                    0.03,
                );
            }
            rows.push(json!({"word": text, "t_value": t, "mean": mean, "stderr": stderr, "points": est.len()}));
        }
        b.at_most("worst_deviation_in_3_stderr", worst, 1.0);
        b.note("words", json!(rows));
    }

    fn order_audit(&self, b: &mut Builder) {
        let t = self.field();
        let annulus = reference::annulus_mask(t.grid);
        let mut annuli = Vec::new();
        for p in &self.scale.gap_prefixes {
            let prefix: Vec<u8> = p.bytes().map(|c| c.wrapping_sub(b'0')).collect();
            match symbolic::fatou_gap_mask(&self.system, &annulus, &prefix) {
                Ok(m) => annuli.push(m),
                Err(e) => {
                    b.holds(&format!("gap_{p}"), false);
                    b.note(&format!("gap_{p}_error"), json!(e.to_string()));
                    return;
                }
            }
        }
        match symbolic::monotonicity_audit(t, &annuli) {
            Ok(report) => {
                b.holds("means_strictly_increasing", true);
                let margin = report
                    .gaps
                    .iter()
                    .map(|(g, tol)| g - tol)
                    .fold(f64::INFINITY, f64::min);
                b.at_least("smallest_gap_margin", margin, 0.0);
                b.note("audit", serde_json::to_value(&report).unwrap_or_default());
            }
            Err(e) => {
                b.holds("means_strictly_increasing", false);
                let kind = format!("{e:?}");
                let kind = kind
                    .split(|c: char| !c.is_alphanumeric())
                    .next()
                    .unwrap_or_default()
                    .to_string();
                b.note("audit_error", json!(e.to_string()))
                    .note("audit_error_kind", json!(kind));
            }
        }
        let pair = symbolic::invert_t(self.system.weights(), 0.5, 40);
        let expected: (Word, Word) = ("1(2)".parse().unwrap(), "2(1)".parse().unwrap());
        let ok = matches!(&pair, Ok(LevelSet::GapPair(a, c))
            if (a, c) == (&expected.0, &expected.1) || (c, a) == (&expected.0, &expected.1));
        b.holds("half_level_is_gap_pair", ok);
        b.note("half_level", json!(format!("{pair:?}")));
    }

    fn holder(&self, b: &mut Builder) {
        let s = &self.scale;
        let big = reference::window(s.holder_grid);
        let points = match symbolic::sample_lambda_typical(
            &self.system,
            s.holder_points,
            40,
            s.seed.wrapping_add(7),
        ) {
            Ok(p) => p,
            Err(e) => {
                b.holds("lambda_samples", false);
                b.note("error", json!(e.to_string()));
                return;
            }
        };
        let radii: Vec<f64> = (0..6)
            .map(|k| big.pixel_size() * (s.holder_half_pixels >> k).max(1) as f64)
            .collect();
        let noise_floor = 4.0 * 0.5 / (s.holder_samples as f64).sqrt();
        let mut reliable = Vec::new();
        let mut rows = Vec::new();
        for (i, &z) in points.iter().enumerate() {
            let Ok(patch) = big.patch(z, s.holder_half_pixels) else {
                continue;
            };
            let t = field::render_t(
                &self.system,
                patch,
                Sampling::new(
                    s.holder_samples,
                    s.n_max,
                    s.seed.wrapping_add(100 + i as u64),
                ),
            );
            let est = symbolic::empirical_holder(&t, z, &radii, noise_floor);
            if est.reliable {
                reliable.push(est.exponent);
            }
            rows.push(json!({"z": [z.re, z.im], "exponent": est.exponent, "r2": est.fit_quality, "reliable": est.reliable}));
        }
        reliable.sort_by(f64::total_cmp);
        let median = if reliable.is_empty() {
            f64::NAN
        } else {
            reliable[reliable.len() / 2]
        };
        b.holds("median_in_0.3_0.7", (0.3..=0.7).contains(&median));
        b.note("median_exponent", json!(median));
        let below_one =
            reliable.iter().filter(|&&e| e < 1.0).count() as f64 / reliable.len().max(1) as f64;
        b.at_least("fraction_below_one", below_one, 0.6);
        b.note("reliable_fits", json!(reliable.len()))
            .note("samples", json!(rows));
        b.note(
            "lambda_sampling",
            json!(
                "uniform root choice along random words, an approximation of the natural measure"
            ),
        );

        let cal = GridSpec::square(Complex64::new(0.0, 0.0), 1.0, 257).expect("calibration grid");
        let z0 = cal.point(cal.index(128, 128));
        let cal_radii = symbolic::default_radii(&cal);
        let linear =
            symbolic::empirical_holder(&ScalarField::from_fn(cal, |z| z.re), z0, &cal_radii, 0.0);
        let root = symbolic::empirical_holder(
            &ScalarField::from_fn(cal, |z| (z - z0).norm().sqrt()),
            z0,
            &cal_radii,
            0.0,
        );
        b.at_most(
            "calibration_linear_error",
            (linear.exponent - 1.0).abs(),
            0.05,
        );
        b.at_most("calibration_sqrt_error", (root.exponent - 0.5).abs(), 0.05);
    }

    fn kernel_probe(&self, b: &mut Builder) {
        let s = &self.scale;
        let seed_point = Complex64::new(self.system.escape_radius(), 0.0);
        let cloud = field::julia_backward_cloud(
            &self.system,
            seed_point,
            s.kernel_points,
            s.seed.wrapping_add(9),
        );
        let circle = build_system(vec![Polynomial::from_real(&[0.0, 0.0, 1.0])], vec![1.0])
            .expect("z² system");
        let control = field::julia_backward_cloud(
            &circle,
            Complex64::new(2.0, 0.0),
            s.kernel_points,
            s.seed.wrapping_add(10),
        );
        match (cloud, control) {
            (Ok(cloud), Ok(control)) => {
                let probe = symbolic::kernel_julia_probe(
                    &self.system,
                    &cloud,
                    s.kernel_depth,
                    coliseum::semigroup::DEFAULT_BUDGET,
                );
                b.at_least("witness_fraction", probe.fraction, 1.0);
                let ctl = symbolic::kernel_julia_probe(
                    &circle,
                    &control,
                    s.kernel_depth,
                    coliseum::semigroup::DEFAULT_BUDGET,
                );
                b.at_most("single_map_fraction", ctl.fraction, 0.0);
                b.note(
                    "first_witnesses",
                    json!(probe.witnesses.iter().take(5).collect::<Vec<_>>()),
                );
            }
            (a, c) => {
                b.holds("clouds", false);
                b.note("error", json!(format!("{:?} {:?}", a.err(), c.err())));
            }
        }
    }

    fn trichotomy(&self, b: &mut Builder) {
        let s = &self.scale;
        let monomial = |c: f64| Polynomial::from_real(&[0.0, 0.0, 0.0, 0.0, c]);
        let third = vec![1.0 / 3.0; 3];
        let three = build_system(
            vec![
                reference::inner_map(),
                reference::outer_map(),
                monomial(1.0 / 20.0),
            ],
            third.clone(),
        )
        .expect("3 generators");
        let mut cases = Vec::new();
        for &n in &s.trichotomy_grids {
            let grid = GridSpec::square(Complex64::new(0.0, 0.0), 4.3, n).expect("grid");
            let verdict = symbolic::julia_proxy_mask(
                &three,
                grid,
                s.trichotomy_cloud,
                s.seed.wrapping_add(11),
            )
            .and_then(|proxy| symbolic::classify_3gen(&three, &proxy));
            match verdict {
                Ok(r) => {
                    b.note(
                        &format!("grid_{n}"),
                        serde_json::to_value(&r).unwrap_or_default(),
                    );
                    cases.push(Some(r.case));
                }
                Err(e) => {
                    b.note(&format!("grid_{n}_error"), json!(e.to_string()));
                    cases.push(None);
                }
            }
        }
        b.holds(
            "single_case_at_every_grid",
            cases.iter().all(Option::is_some),
        );
        b.holds(
            "stable_under_refinement",
            cases.windows(2).all(|w| w[0] == w[1]) && !cases.is_empty(),
        );

        let nested = build_system(
            vec![
                reference::inner_map(),
                monomial(1.0 / 64.0),
                monomial(1.0 / 4096.0),
            ],
            third,
        )
        .expect("3 generators");
        let n = *s.trichotomy_grids.last().unwrap_or(&512);
        let grid = GridSpec::square(Complex64::new(0.0, 0.0), 16.5, n).expect("grid");
        let outcome =
            symbolic::julia_proxy_mask(&nested, grid, s.trichotomy_cloud, s.seed.wrapping_add(12))
                .and_then(|proxy| {
                    let report = symbolic::classify_3gen(&nested, &proxy)?;
                    Ok((proxy, report))
                });
        match outcome {
            Ok((proxy, report)) => {
                b.holds(
                    "nested_instance_is_case_1",
                    report.case == Trichotomy::Case1,
                );
                b.holds(
                    "innermost_and_outermost_generators",
                    report.order == [0, 1, 2],
                );
                let near = proxy.dilate_n(2);
                for (label, idx) in [
                    ("innermost_on_proxy", report.order[0]),
                    ("outermost_on_proxy", report.order[2]),
                ] {
                    let j = symbolic::single_julia_mask(&nested.generators()[idx], grid, 400);
                    let on = j.and(&near).map(|m| m.count()).unwrap_or(0) as f64
                        / j.count().max(1) as f64;
                    b.at_least(label, on, 0.95);
                }
                let j: Vec<RegionMask> = report
                    .order
                    .iter()
                    .map(|&i| symbolic::single_julia_mask(&nested.generators()[i], grid, 400))
                    .collect();
                let surround = [
                    symbolic::surrounding_compare(&j[0], &j[1]),
                    symbolic::surrounding_compare(&j[1], &j[2]),
                ];
                b.holds(
                    "surrounding_chain",
                    surround.iter().all(|r| matches!(r, Ok(Surround::Inside))),
                );
                b.note("nested", serde_json::to_value(&report).unwrap_or_default());
            }
            Err(e) => {
                b.holds("nested_instance_is_case_1", false);
                b.note("nested_error", json!(e.to_string()));
            }
        }
    }

    fn determinism(&self, b: &mut Builder) {
        let s = &self.scale;
        let config = RunConfig::from_toml_str(
            "",
            &[
                format!("grid.size={}", s.determinism_grid),
                format!("sampling.samples={}", s.determinism_samples),
                format!("sampling.seed={}", s.seed),
            ],
        )
        .expect("reference config");
        let mut outputs = Vec::new();
        for &threads in &s.determinism_threads {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .expect("thread pool");
            match pool.install(|| crate::commands::render_artifacts(&config)) {
                Ok(a) => outputs.push(a),
                Err(e) => {
                    b.holds(&format!("render_{threads}_threads"), false);
                    b.note("error", json!(e.to_string()));
                    return;
                }
            }
        }
        let images = |a: &Vec<crate::output::Artifact>| -> Vec<(String, String)> {
            a.iter()
                .filter(|x| !x.name.ends_with(".json"))
                .map(|x| (x.name.clone(), x.sha256()))
                .collect()
        };
        let first = images(&outputs[0]);
        b.holds(
            "identical_artifacts",
            outputs.iter().all(|o| images(o) == first),
        );
        b.note("threads", json!(s.determinism_threads))
            .note("artifacts", json!(first));
    }
}

/// Digit-expansion oracles against the recursion and Monte Carlo modes.
///
/// Monte Carlo agreement is judged on the mean deviation over all points,
/// against three standard errors of that mean; the per-point count beyond
/// three standard errors is reported alongside.
fn staircase_oracles(b: &mut Builder, seed: u64) {
    let exact = StaircaseMode::Exact {
        depth: affine::DEFAULT_DEPTH,
    };
    let cantor = affine::cantor_maps();
    let lebesgue = affine::lebesgue_maps();
    let half = [0.5, 0.5];
    let eval = |maps: &[affine::AffineMap], p: &[f64], x: f64, mode| {
        affine::staircase_t(maps, p, x, mode)
            .map(|v| v.value)
            .unwrap_or(f64::NAN)
    };
    let mut rng = StreamRng::new(seed, 0x1D, 0);
    let xs: Vec<f64> = (0..100).map(|_| rng.next_f64()).collect();

    let cantor_err = xs
        .iter()
        .map(|&x| (eval(&cantor, &half, x, exact) - affine::cantor_by_digits(x)).abs())
        .fold(0.0, f64::max);
    b.at_most("cantor_vs_ternary_digits", cantor_err, 1e-9);
    let sweep: Vec<f64> = (0..=10_000).map(|k| k as f64 / 10_000.0).collect();
    let identity_err = sweep
        .iter()
        .map(|&x| (eval(&lebesgue, &half, x, exact) - x).abs())
        .fold(0.0, f64::max);
    b.at_most("lebesgue_half_identity", identity_err, 1e-9);
    let la_err = (1..10)
        .map(|k| {
            let a = k as f64 / 10.0;
            (eval(&lebesgue, &[a, 1.0 - a], 0.5, exact) - a).abs()
        })
        .fold(0.0, f64::max);
    b.at_most("lebesgue_at_half_equals_a", la_err, 1e-12);
    let monotone = [(&cantor, [0.5, 0.5]), (&lebesgue, [0.3, 0.7])]
        .iter()
        .all(|(maps, p)| {
            let vals: Vec<f64> = sweep.iter().map(|&x| eval(maps, p, x, exact)).collect();
            vals.windows(2).all(|w| w[1] >= w[0])
        });
    b.holds("monotone_sweeps", monotone);

    const MC_SAMPLES: u32 = 4000;
    let mc = StaircaseMode::MonteCarlo {
        samples: MC_SAMPLES,
        max_steps: 200,
        seed,
    };
    for (label, maps, p) in [
        ("cantor", &cantor, [0.5, 0.5]),
        ("lebesgue", &lebesgue, [0.3, 0.7]),
    ] {
        let mut sum = 0.0;
        let mut var = 0.0;
        let mut outliers = 0;
        for &x in &xs {
            let e = eval(maps, &p, x, exact);
            let m = eval(maps, &p, x, mc);
            let v = e * (1.0 - e) / MC_SAMPLES as f64;
            sum += m - e;
            var += v;
            if (m - e).abs() > 3.0 * v.sqrt() {
                outliers += 1;
            }
        }
        let k = xs.len() as f64;
        let ratio = (sum / k).abs() / (3.0 * var.sqrt() / k);
        b.at_most(&format!("{label}_monte_carlo_mean_in_3_stderr"), ratio, 1.0);
        b.note(
            &format!("{label}_pointwise_beyond_3_stderr"),
            json!(outliers),
        );
    }
}
