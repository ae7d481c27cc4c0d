//! Cross-checks of the closed forms against independent numerical routes.
//!
//! The closed forms under test are passed in through [`Formulas`] so a
//! deliberately broken variant can be checked to fail.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::entanglement::threshold_theta;
use crate::model::{
    axis_optimum, build_povm, det_e3, optimum, pmax_oracle, tangent_optimum, tr_e3, OptimumResult, PovmWeights,
    ProtocolParams,
};
use crate::protocol::{analytic, initial_register, monte_carlo, random_input, step1_alice, step2_bob, step3_bob};
use crate::protocol::{InputSpec, Protocol, RunMode, TrialRng};
use crate::qmath::fidelity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Quick,
    Full,
}

/// The closed forms being verified.
#[derive(Clone, Copy)]
pub struct Formulas {
    pub tr_e3: fn(&ProtocolParams, &PovmWeights) -> f64,
    pub det_e3: fn(&ProtocolParams, &PovmWeights) -> f64,
    pub optimum: fn(&ProtocolParams) -> OptimumResult,
}

impl Default for Formulas {
    fn default() -> Self {
        Formulas {
            tr_e3,
            det_e3,
            optimum,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub level: Level,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn first_failure(&self) -> Option<&CheckResult> {
        self.checks.iter().find(|c| !c.passed)
    }
}

/// Tolerances shared with the acceptance suite.
pub mod tol {
    pub const ALGEBRA: f64 = 1e-12;
    pub const FEASIBILITY: f64 = 1e-9;
    pub const BOUNDARY: f64 = 1e-12;
    pub const ORACLE: f64 = 1e-5;
    pub const ORACLE_RESOLUTION: f64 = 1e-7;
    pub const Z_MAX: f64 = 4.0;
    pub const RESIDUAL: f64 = 1e-10;
    pub const THRESHOLD_LO: f64 = 0.232;
    pub const THRESHOLD_HI: f64 = 0.236;
}

/// Lower edge of the random parameter box, in units of π.
const LOW_ANGLE: f64 = 0.05;

fn check(name: &'static str, worst: f64, bound: f64, what: &str) -> CheckResult {
    CheckResult {
        name,
        passed: worst <= bound,
        detail: format!("{what}: worst {worst:.3e} (bound {bound:.0e})"),
    }
}

fn random_params(rng: &mut impl Rng) -> ProtocolParams {
    let t = rng.random_range(LOW_ANGLE * PI..=FRAC_PI_2);
    let a = rng.random_range(LOW_ANGLE * PI..=FRAC_PI_2);
    ProtocolParams::new(t, a).expect("inside domain")
}

/// Uniform grid `lo, …, hi` with `n` nodes, both ends included.
pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect()
}

/// Largest relative deviation of the closed forms from the trace and
/// determinant of the constructed `E3`, over `draws` random points.
pub fn algebra_deviation(f: &Formulas, draws: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut tr_worst, mut det_worst) = (0.0_f64, 0.0_f64);
    for _ in 0..draws {
        let p = random_params(&mut rng);
        let w = PovmWeights::new(rng.random_range(0.0..=1.2), rng.random_range(0.0..=1.2)).expect("nonnegative");
        let e3 = build_povm(&p, &w).e3;
        let (tr, det) = (e3.trace().re, e3.det().re);
        tr_worst = tr_worst.max(((f.tr_e3)(&p, &w) - tr).abs() / tr.abs().max(1.0));
        det_worst = det_worst.max(((f.det_e3)(&p, &w) - det).abs() / det.abs().max(1.0));
    }
    (tr_worst, det_worst)
}

fn optimum_feasibility(f: &Formulas) -> CheckResult {
    let mut worst = 0.0_f64;
    for &t in &grid(LOW_ANGLE * PI, FRAC_PI_2, 30) {
        for &a in &grid(LOW_ANGLE * PI, FRAC_PI_2, 30) {
            let p = ProtocolParams::new(t, a).expect("inside domain");
            let r = (f.optimum)(&p);
            let bad_weights = r.x < 0.0 || r.y < 0.0 || (r.x + r.y - r.p_max).abs() > tol::ALGEBRA;
            let Ok(w) = PovmWeights::new(r.x, r.y) else {
                worst = f64::INFINITY;
                continue;
            };
            let set = build_povm(&p, &w);
            let dev = (-set.e3_min_eigenvalue).max(set.e3.det().norm());
            worst = worst.max(if bad_weights { f64::INFINITY } else { dev });
        }
    }
    check("optimum_feasibility", worst, tol::FEASIBILITY, "E3 positivity / Det E3 at optimum, 30x30 grid")
}

/// Largest gap between the two optimum formulas on the curve
/// `cosα(sinθ+cosθ) = 1`, over `n` points.
pub fn boundary_gap(n: usize) -> f64 {
    (1..=n)
        .map(|k| {
            let t = k as f64 * FRAC_PI_2 / (n + 1) as f64;
            let a = (1.0 / (t.sin() + t.cos())).acos();
            let p = ProtocolParams::new(t, a).expect("inside domain");
            (tangent_optimum(&p).2 - axis_optimum(&p).2).abs()
        })
        .fold(0.0, f64::max)
}

/// Largest `|p_max − oracle|` over an `n × n` grid of `[0.05π, 0.5π]²`.
pub fn oracle_gap(f: &Formulas, n: usize) -> f64 {
    let mut worst = 0.0_f64;
    for &t in &grid(LOW_ANGLE * PI, FRAC_PI_2, n) {
        for &a in &grid(LOW_ANGLE * PI, FRAC_PI_2, n) {
            let p = ProtocolParams::new(t, a).expect("inside domain");
            let oracle = pmax_oracle(&p, tol::ORACLE_RESOLUTION).expect("resolution in range");
            worst = worst.max(((f.optimum)(&p).p_max - oracle.p).abs());
        }
    }
    worst
}

/// The three parameter points used for outcome statistics.
pub const MC_POINTS: [(f64, f64); 3] = [(FRAC_PI_2, FRAC_PI_3), (FRAC_PI_4, FRAC_PI_6), (FRAC_PI_4, FRAC_PI_3)];

fn monte_carlo_check(trials: u64) -> CheckResult {
    let mut worst = 0.0_f64;
    for &(t, a) in &MC_POINTS {
        let p = ProtocolParams::new(t, a).expect("inside domain");
        for seed in 1..=3 {
            match monte_carlo(p, trials, seed, RunMode::Probabilistic, InputSpec::Random) {
                Ok(s) => worst = worst.max(s.z_score.abs()),
                Err(_) => worst = f64::INFINITY,
            }
        }
    }
    check("monte_carlo", worst, tol::Z_MAX, &format!("|z| of success frequency, N={trials}, 3 points x 3 seeds"))
}

/// Worst `1 − fidelity` between the state left after outcome 3 plus the
/// basis measurement of `b` and `U(θ_f)Φ`, over `cases` random parameter
/// points, feasible weights and inputs.
pub fn residual_defect(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    let mut done = 0;
    while done < cases {
        let p = random_params(&mut rng);
        let w = PovmWeights::new(rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0)).expect("nonnegative");
        let Ok(protocol) = Protocol::new(p, w) else {
            continue;
        };
        let mut trial = TrialRng::new(seed, done as u64);
        let phi = random_input(&mut trial);
        let Ok(mut reg) = initial_register(p.alpha(), &phi) else {
            return f64::INFINITY;
        };
        let defect = (|| {
            let m = step1_alice(&mut reg, &mut trial)?;
            step2_bob(&mut reg, &m)?;
            step3_bob(&mut reg)?;
            if protocol.postselect(&mut reg, 3)? < 1e-9 {
                return Ok(None);
            }
            let (r, _) = protocol.failure_residual(&mut reg, 3, &mut trial)?;
            let want = analytic::target_output(r.theta_f, &phi)?;
            Ok::<_, crate::Error>(Some(1.0 - fidelity(&want, reg.state())?))
        })();
        match defect {
            Ok(Some(d)) => {
                worst = worst.max(d);
                done += 1;
            }
            Ok(None) => continue,
            Err(_) => return f64::INFINITY,
        }
    }
    worst
}

/// Worst `1 − fidelity` against `U(θ)Φ` in deterministic mode, plus whether
/// Bell-pair accounting matched the branch on every run.
pub fn deterministic_defect(cases: usize, seed: u64) -> (f64, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    let mut accounting = true;
    for k in 0..cases {
        let p = random_params(&mut rng);
        let Ok(protocol) = Protocol::optimal(p) else {
            return (f64::INFINITY, false);
        };
        let mut trial = TrialRng::new(seed, k as u64);
        let phi = random_input(&mut trial);
        let Ok(out) = protocol.run_once(&phi, RunMode::Deterministic, &mut trial) else {
            return (f64::INFINITY, false);
        };
        let want = analytic::target_output(p.theta(), &phi).expect("two-qubit input");
        worst = worst.max(1.0 - fidelity(&want, &out.final_state).unwrap_or(0.0));
        let expected_pairs = u32::from(out.branch == 3);
        accounting &= out.bell_pairs_consumed == expected_pairs && out.residual.is_some() == (out.branch == 3);
    }
    (worst, accounting)
}

pub fn run(level: Level, f: &Formulas) -> VerifyReport {
    let mut checks = Vec::new();
    let (tr_dev, det_dev) = algebra_deviation(f, 1000, 0x5eed);
    checks.push(check("tr_e3", tr_dev, tol::ALGEBRA, "closed form vs trace of E3, 1000 draws"));
    checks.push(check("det_e3", det_dev, tol::ALGEBRA, "closed form vs determinant of E3, 1000 draws"));
    checks.push(optimum_feasibility(f));
    checks.push(check(
        "boundary_continuity",
        boundary_gap(100),
        tol::BOUNDARY,
        "tangent vs axis optimum on the case boundary, 100 points",
    ));

    if level == Level::Full {
        checks.push(check(
            "pmax_oracle",
            oracle_gap(f, 20),
            tol::ORACLE,
            "closed form vs eigenvalue-feasible grid search, 20x20",
        ));
        checks.push(monte_carlo_check(100_000));
        checks.push(check(
            "residual_reconstruction",
            residual_defect(100, 0xfa11),
            tol::RESIDUAL,
            "1 - fidelity of U(theta_f) reconstruction, 100 random weights",
        ));
        let (det_worst, accounting) = deterministic_defect(100, 0xbe11);
        let mut c = check(
            "deterministic_recovery",
            det_worst,
            tol::RESIDUAL,
            "1 - fidelity after Bell recovery, 100 runs",
        );
        if !accounting {
            c.passed = false;
            c.detail.push_str("; Bell pair accounting mismatch");
        }
        checks.push(c);
        let threshold = threshold_theta(1e-4).map(|t| t / PI);
        checks.push(match threshold {
            Ok(t) => CheckResult {
                name: "threshold",
                passed: (tol::THRESHOLD_LO..=tol::THRESHOLD_HI).contains(&t),
                detail: format!(
                    "theta*/pi = {t:.6} (expected in [{}, {}])",
                    tol::THRESHOLD_LO,
                    tol::THRESHOLD_HI
                ),
            },
            Err(e) => CheckResult {
                name: "threshold",
                passed: false,
                detail: e.to_string(),
            },
        });
    }
    VerifyReport { level, checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn broken_det(p: &ProtocolParams, w: &PovmWeights) -> f64 {
        // sign error on the constant term
        let c_a = p.alpha().cos();
        let (s_t, c_t) = p.theta().sin_cos();
        let cc = c_t * c_a;
        4.0 / p.alpha().sin().powi(2)
            * ((w.x() - 0.5 * (1.0 + cc)) * (w.y() - 0.5 * (1.0 - cc)) + 0.25 * c_a * c_a * s_t * s_t)
    }

    #[test]
    fn quick_passes() {
        let r = run(Level::Quick, &Formulas::default());
        assert!(r.passed(), "{:#?}", r.checks);
        assert_eq!(r.checks.len(), 4);
    }

    #[test]
    fn mutated_determinant_is_caught() {
        let f = Formulas {
            det_e3: broken_det,
            ..Formulas::default()
        };
        let r = run(Level::Quick, &f);
        assert_eq!(r.first_failure().map(|c| c.name), Some("det_e3"));
    }

    #[test]
    fn grid_includes_both_ends() {
        let g = grid(0.1, 0.5, 5);
        assert_eq!(g.len(), 5);
        assert_eq!(g[0], 0.1);
        assert_eq!(g[4], 0.5);
    }
}
