//! The three-outcome measurement on Bob's half of the resource pair, its
//! positivity algebra and the optimal success probability.
//!
//! With target angle θ and resource angle α, the two success elements are
//! `E1 = x|φ1⟩⟨φ1|` and `E2 = y|φ2⟩⟨φ2|` for the (unnormalized, real) vectors
//! returned by [`phi_vectors`]; `E3 = I − E1 − E2` is the failure outcome.
//! The success probability is `x + y` for every input state, so the problem
//! reduces to maximizing `x + y` subject to `E3 ⪰ 0`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmath::{hermitian_eig2, Mat2, PSD_CLAMP};

/// Half-width of the band around `cosα(sinθ+cosθ) = 1` that is labelled
/// [`CaseLabel::Boundary`].
pub const CASE_BAND: f64 = 1e-12;

/// Target rotation angle θ and resource angle α, in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    theta: f64,
    alpha: f64,
}

impl ProtocolParams {
    /// Partial resource: θ ∈ (0, π/2], α ∈ (0, π/2].
    pub fn new(theta: f64, alpha: f64) -> Result<Self> {
        check_theta(theta)?;
        check_alpha(alpha)?;
        Ok(ProtocolParams { theta, alpha })
    }

    /// Maximally entangled resource (α = π/2), which may carry any
    /// θ ∈ (−π, π]. Used for recovery after a failed run.
    pub fn bell(theta: f64) -> Result<Self> {
        if !(theta > -PI && theta <= PI) {
            return Err(Error::OutOfDomain {
                name: "theta",
                value: theta,
                range: "(-pi, pi] for a Bell resource",
            });
        }
        Ok(ProtocolParams {
            theta,
            alpha: FRAC_PI_2,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn is_bell(&self) -> bool {
        self.alpha == FRAC_PI_2
    }

    /// `cos α`, exactly zero for the Bell resource.
    pub fn cos_alpha(&self) -> f64 {
        cos_alpha(self.alpha)
    }

    /// `(cos(α/2), sin(α/2))`
    pub fn alpha_half(&self) -> (f64, f64) {
        alpha_half(self.alpha)
    }

    /// `cosα(sinθ + cosθ)`; the case split compares this with 1.
    pub fn case_indicator(&self) -> f64 {
        self.cos_alpha() * (self.theta.sin() + self.theta.cos())
    }
}

pub(crate) fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta <= FRAC_PI_2 {
        Ok(())
    } else {
        Err(Error::OutOfDomain {
            name: "theta",
            value: theta,
            range: "(0, pi/2]",
        })
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= FRAC_PI_2 {
        Ok(())
    } else {
        Err(Error::OutOfDomain {
            name: "alpha",
            value: alpha,
            range: "(0, pi/2]",
        })
    }
}

pub(crate) fn cos_alpha(alpha: f64) -> f64 {
    if alpha == FRAC_PI_2 {
        0.0
    } else {
        alpha.cos()
    }
}

pub(crate) fn alpha_half(alpha: f64) -> (f64, f64) {
    if alpha == FRAC_PI_2 {
        (FRAC_1_SQRT_2, FRAC_1_SQRT_2)
    } else {
        let h = 0.5 * alpha;
        (h.cos(), h.sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PovmWeights {
    x: f64,
    y: f64,
}

impl PovmWeights {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        for (name, v) in [("x", x), ("y", y)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::OutOfDomain {
                    name,
                    value: v,
                    range: "[0, inf)",
                });
            }
        }
        Ok(PovmWeights { x, y })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn success_probability(&self) -> f64 {
        self.x + self.y
    }
}

/// The two success directions `(φ1, φ2)`, real and unnormalized.
pub fn phi_vectors(params: &ProtocolParams) -> ([f64; 2], [f64; 2]) {
    let (ca, sa) = params.alpha_half();
    let (st, ct) = (0.5 * params.theta).sin_cos();
    ([ct / ca, st / sa], [st / ca, -ct / sa])
}

/// `E1, E2, E3` for given weights, with the positivity verdict on `E3`.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmSet {
    pub e1: Mat2,
    pub e2: Mat2,
    pub e3: Mat2,
    pub weights: PovmWeights,
    pub params: ProtocolParams,
    /// Smallest eigenvalue of `E3`.
    pub e3_min_eigenvalue: f64,
}

impl PovmSet {
    /// All three elements positive (E1, E2 are by construction).
    pub fn is_valid(&self) -> bool {
        self.e3_min_eigenvalue >= -PSD_CLAMP
    }

    pub fn elements(&self) -> [&Mat2; 3] {
        [&self.e1, &self.e2, &self.e3]
    }
}

pub fn build_povm(params: &ProtocolParams, weights: &PovmWeights) -> PovmSet {
    let (phi1, phi2) = phi_vectors(params);
    let e1 = Mat2::real_outer(phi1, weights.x);
    let e2 = Mat2::real_outer(phi2, weights.y);
    let e3 = Mat2::identity() - e1 - e2;
    let e3_min_eigenvalue = hermitian_eig2(&e3).map(|e| e.min()).unwrap_or(f64::NEG_INFINITY);
    PovmSet {
        e1,
        e2,
        e3,
        weights: *weights,
        params: *params,
        e3_min_eigenvalue,
    }
}

/// Closed-form `Tr E3`.
pub fn tr_e3(params: &ProtocolParams, weights: &PovmWeights) -> f64 {
    let (ca, sa) = params.alpha_half();
    let (st, ct) = (0.5 * params.theta).sin_cos();
    let (ca2, sa2, st2, ct2) = (ca * ca, sa * sa, st * st, ct * ct);
    2.0 - weights.x * (ct2 / ca2 + st2 / sa2) - weights.y * (st2 / ca2 + ct2 / sa2)
}

/// Closed-form `Det E3`.
///
/// Equal to `(4/sin²α)[(x − (1+cosθcosα)/2)(y − (1−cosθcosα)/2) − cos²α sin²θ/4]`;
/// expanded here so the constant term cancels exactly, which keeps small
/// angles accurate.
pub fn det_e3(params: &ProtocolParams, weights: &PovmWeights) -> f64 {
    let c_a = params.cos_alpha();
    let sin2_a = if c_a == 0.0 { 1.0 } else { params.alpha.sin().powi(2) };
    let (s_th, s_ah) = ((0.5 * params.theta).sin(), (0.5 * params.alpha).sin());
    let c_t = params.theta.cos();
    // 1 − cosθ cosα without cancellation
    let one_minus_cc = 2.0 * s_th * s_th + c_t * 2.0 * s_ah * s_ah;
    let one_plus_cc = 1.0 + c_t * c_a;
    let (x, y) = (weights.x, weights.y);
    1.0 + 4.0 / sin2_a * (x * y - 0.5 * x * one_minus_cc - 0.5 * y * one_plus_cc)
}

/// Signed gap between the tangent-point abscissa and the largest feasible
/// `x`; its sign decides which optimum applies.
pub fn delta(params: &ProtocolParams) -> f64 {
    let c_a = params.cos_alpha();
    if c_a == 0.0 {
        return 0.0;
    }
    let (s_t, c_t) = params.theta.sin_cos();
    c_a * s_t * (c_a * (s_t + c_t) - 1.0) / (2.0 * (1.0 - c_t * c_a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseLabel {
    /// `cosα(sinθ+cosθ) < 1`: optimum at the tangent point of `Det E3 = 0`.
    CaseI,
    /// `cosα(sinθ+cosθ) > 1`: optimum on the `x` axis, `y = 0`.
    CaseII,
    Boundary,
}

impl CaseLabel {
    pub fn of(params: &ProtocolParams) -> Self {
        let s = params.case_indicator();
        if s < 1.0 - CASE_BAND {
            CaseLabel::CaseI
        } else if s > 1.0 + CASE_BAND {
            CaseLabel::CaseII
        } else {
            CaseLabel::Boundary
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            CaseLabel::CaseI => "I",
            CaseLabel::CaseII => "II",
            CaseLabel::Boundary => "boundary",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimumResult {
    pub case: CaseLabel,
    pub x: f64,
    pub y: f64,
    pub p_max: f64,
}

impl OptimumResult {
    pub fn weights(&self) -> PovmWeights {
        PovmWeights {
            x: self.x,
            y: self.y,
        }
    }
}

/// Tangent-point optimum `(x, y, p)`; valid when `cosα(sinθ+cosθ) ≤ 1`.
pub fn tangent_optimum(params: &ProtocolParams) -> (f64, f64, f64) {
    let c_a = params.cos_alpha();
    let (s_t, c_t) = params.theta.sin_cos();
    let x = 0.5 * (1.0 + c_t * c_a - s_t * c_a);
    let y = 0.5 * (1.0 - c_t * c_a - s_t * c_a);
    (x, y, 1.0 - s_t * c_a)
}

/// Axis optimum `(x, 0, x)`; valid when `cosα(sinθ+cosθ) ≥ 1`.
pub fn axis_optimum(params: &ProtocolParams) -> (f64, f64, f64) {
    let c_a = params.cos_alpha();
    let sin2_a = 1.0 - c_a * c_a;
    let x = sin2_a / (2.0 * (1.0 - params.theta.cos() * c_a));
    (x, 0.0, x)
}

pub fn optimum(params: &ProtocolParams) -> OptimumResult {
    let case = CaseLabel::of(params);
    let (x, y, p_max) = match case {
        CaseLabel::CaseI | CaseLabel::Boundary => tangent_optimum(params),
        CaseLabel::CaseII => axis_optimum(params),
    };
    OptimumResult { case, x, y, p_max }
}

/// Best probability of first distilling a Bell pair from the resource.
pub fn bell_conversion_prob(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(1.0 - cos_alpha(alpha))
}

/// Result of the brute-force search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    pub x: f64,
    pub y: f64,
    pub p: f64,
}

const ORACLE_BOX: f64 = 1.2;
const ORACLE_COARSE: usize = 120;
const ORACLE_HALF_WINDOW: usize = 40;
const ORACLE_MAX_MOVES: usize = 500;
/// Ratio of the y step to the x step. Irrational, so that `x + y` over the
/// lattice is not quantized to multiples of the step.
const ORACLE_Y_RATIO: f64 = 0.618_033_988_749_894_9;

fn feasible(params: &ProtocolParams, x: f64, y: f64) -> bool {
    // weights are nonnegative by construction of the grid
    let w = PovmWeights { x, y };
    build_povm(params, &w).is_valid()
}

fn better(a: OracleResult, b: OracleResult) -> OracleResult {
    if a.p > b.p || (a.p == b.p && (a.x, a.y) < (b.x, b.y)) {
        a
    } else {
        b
    }
}

/// Feasible maximum over the lattice `(x0 + i·step, y0 + j·step·ratio)`.
fn scan(params: &ProtocolParams, x0: f64, y0: f64, step: f64, nx: usize, ny: usize) -> Option<OracleResult> {
    let y_step = step * ORACLE_Y_RATIO;
    (0..=nx)
        .into_par_iter()
        .flat_map_iter(|i| {
            let x = (x0 + i as f64 * step).min(ORACLE_BOX);
            (0..=ny).filter_map(move |j| {
                let y = (y0 + j as f64 * y_step).min(ORACLE_BOX);
                feasible(params, x, y).then_some(OracleResult { x, y, p: x + y })
            })
        })
        .reduce_with(better)
}

/// Maximize `x + y` over `[0, 1.2]²` subject to `E3 ⪰ 0`, deciding
/// feasibility from the eigenvalues of the constructed `E3` only.
///
/// A coarse grid is refined around the incumbent. At each step size the
/// window is re-centred until the incumbent stops moving, then the step is
/// halved until it drops below `resolution`.
pub fn pmax_oracle(params: &ProtocolParams, resolution: f64) -> Result<OracleResult> {
    if !(1e-7..=1e-2).contains(&resolution) {
        return Err(Error::OutOfDomain {
            name: "resolution",
            value: resolution,
            range: "[1e-7, 1e-2]",
        });
    }
    let mut step = ORACLE_BOX / ORACLE_COARSE as f64;
    let ny = (ORACLE_COARSE as f64 / ORACLE_Y_RATIO).ceil() as usize;
    // the origin is always feasible
    let mut best = scan(params, 0.0, 0.0, step, ORACLE_COARSE, ny).unwrap_or(OracleResult { x: 0.0, y: 0.0, p: 0.0 });
    let n = 2 * ORACLE_HALF_WINDOW;
    while step >= resolution {
        step *= 0.5;
        for _ in 0..ORACLE_MAX_MOVES {
            let x0 = (best.x - ORACLE_HALF_WINDOW as f64 * step).max(0.0);
            let y0 = (best.y - ORACLE_HALF_WINDOW as f64 * step * ORACLE_Y_RATIO).max(0.0);
            let Some(found) = scan(params, x0, y0, step, n, n) else {
                break;
            };
            let next = better(found, best);
            if (next.x, next.y) == (best.x, best.y) {
                break;
            }
            best = next;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, FRAC_PI_6};

    fn params(t: f64, a: f64) -> ProtocolParams {
        ProtocolParams::new(t, a).unwrap()
    }

    #[test]
    fn domain_checks() {
        assert!(ProtocolParams::new(0.0, 0.5).is_err());
        assert!(ProtocolParams::new(0.5, 0.0).is_err());
        assert!(ProtocolParams::new(FRAC_PI_2 + 1e-9, 0.5).is_err());
        assert!(ProtocolParams::new(0.5, FRAC_PI_2 + 1e-9).is_err());
        assert!(ProtocolParams::new(f64::NAN, 0.5).is_err());
        assert!(ProtocolParams::new(FRAC_PI_2, FRAC_PI_2).is_ok());
        assert!(ProtocolParams::bell(-3.0).is_ok());
        assert!(ProtocolParams::bell(PI).is_ok());
        assert!(ProtocolParams::bell(-PI).is_err());
        assert!(PovmWeights::new(-1e-3, 0.0).is_err());
    }

    #[test]
    fn phi_vector_examples() {
        let (p1, p2) = phi_vectors(&params(FRAC_PI_2, FRAC_PI_2));
        for (got, want) in p1.iter().chain(&p2).zip([1.0, 1.0, 1.0, -1.0]) {
            assert!((got - want).abs() < 1e-15);
        }

        // the dot product vanishes only for the Bell resource
        for &(t, a) in &[(0.3, 0.4), (1.0, 1.2), (FRAC_PI_4, FRAC_PI_6)] {
            let (p1, p2) = phi_vectors(&params(t, a));
            let dot = p1[0] * p2[0] + p1[1] * p2[1];
            let (ca, sa) = ((a / 2.0).cos(), (a / 2.0).sin());
            let want = (t / 2.0).cos() * (t / 2.0).sin() * (1.0 / (ca * ca) - 1.0 / (sa * sa));
            assert!((dot - want).abs() < 1e-12);
            assert!(dot.abs() > 1e-3);
        }

        let (p1, _) = phi_vectors(&params(1e-12, FRAC_PI_3));
        assert!((p1[0] - 1.154_700_538_379_251_5).abs() < 1e-11);
        assert!(p1[1].abs() < 1e-11);
    }

    #[test]
    fn povm_examples() {
        let half = PovmWeights::new(0.5, 0.5).unwrap();
        for t in [0.1, 0.7, FRAC_PI_2] {
            let set = build_povm(&params(t, FRAC_PI_2), &half);
            assert!(set.e3.max_abs_diff(&Mat2::zero()) < 1e-12);
        }
        let zero = PovmWeights::new(0.0, 0.0).unwrap();
        let set = build_povm(&params(0.4, 0.9), &zero);
        assert_eq!(set.e3, Mat2::identity());

        let p = params(FRAC_PI_4, FRAC_PI_6);
        let opt = optimum(&p);
        let set = build_povm(&p, &opt.weights());
        assert!(set.is_valid());
        assert!(set.e3_min_eigenvalue.abs() < 1e-9);
        assert!(set.e1.is_real() && set.e2.is_real());
        let sum = set.e1 + set.e2 + set.e3;
        assert!(sum.max_abs_diff(&Mat2::identity()) < 1e-12);

        let too_much = PovmWeights::new(0.9, 0.9).unwrap();
        assert!(!build_povm(&p, &too_much).is_valid());
    }

    #[test]
    fn trace_det_examples() {
        let p = params(0.8, 0.6);
        let zero = PovmWeights::new(0.0, 0.0).unwrap();
        assert!((tr_e3(&p, &zero) - 2.0).abs() < 1e-15);
        assert!((det_e3(&p, &zero) - 1.0).abs() < 1e-12);

        let p = params(FRAC_PI_2, FRAC_PI_4);
        let opt = optimum(&p);
        assert!((opt.x - 0.146_446_609_406_726_24).abs() < 1e-12);
        assert!((opt.x - opt.y).abs() < 1e-15);
        let w = opt.weights();
        assert!(det_e3(&p, &w).abs() < 1e-9);
        assert!(build_povm(&p, &w).e3.det().norm() < 1e-9);
    }

    #[test]
    fn det_matches_factored_form() {
        for &(t, a) in &[(0.3, 0.4), (1.2, 0.7), (0.9, 1.5), (FRAC_PI_2, FRAC_PI_3)] {
            let p = params(t, a);
            let (ca, sa2) = (a.cos(), a.sin().powi(2));
            for &(x, y) in &[(0.0, 0.0), (0.2, 0.1), (0.5, 0.7), (1.1, 0.3)] {
                let factored = 4.0 / sa2
                    * ((x - 0.5 * (1.0 + t.cos() * ca)) * (y - 0.5 * (1.0 - t.cos() * ca))
                        - 0.25 * ca * ca * t.sin().powi(2));
                let w = PovmWeights::new(x, y).unwrap();
                assert!((det_e3(&p, &w) - factored).abs() < 1e-12, "{t} {a} {x} {y}");
            }
        }
    }

    #[test]
    fn delta_examples() {
        let on_boundary = params(FRAC_PI_4, FRAC_PI_4);
        assert!(delta(&on_boundary).abs() < 1e-15);
        assert_eq!(CaseLabel::of(&on_boundary), CaseLabel::Boundary);
        assert!(delta(&params(FRAC_PI_4, FRAC_PI_3)) < 0.0);
        assert!(delta(&params(FRAC_PI_4, FRAC_PI_6)) > 0.0);
        assert_eq!(delta(&params(0.3, FRAC_PI_2)), 0.0);

        // both printed forms of the gap agree
        for &(t, a) in &[(0.2, 0.3), (0.9, 0.2), (1.4, 1.1)] {
            let p = params(t, a);
            let (ct, ca) = (t.cos(), a.cos());
            let first = (0.5 * (1.0 + ct * ca) - (ca * ca * t.sin().powi(2) / 4.0).sqrt())
                - a.sin().powi(2) / (2.0 * (1.0 - ct * ca));
            assert!((first - delta(&p)).abs() < 1e-14);
        }
    }

    #[test]
    fn optimum_examples() {
        let r = optimum(&params(FRAC_PI_2, FRAC_PI_3));
        assert_eq!(r.case, CaseLabel::CaseI);
        assert!((r.p_max - 0.5).abs() < 1e-15);

        for t in [0.01, 0.5, FRAC_PI_2] {
            let r = optimum(&params(t, FRAC_PI_2));
            assert_eq!(r.p_max, 1.0);
            assert_eq!((r.x, r.y), (0.5, 0.5));
        }

        let r = optimum(&params(FRAC_PI_4, FRAC_PI_6));
        assert_eq!(r.case, CaseLabel::CaseII);
        assert!((r.x - 0.322_474_487_139_158_9).abs() < 1e-12);
        assert_eq!(r.y, 0.0);
        assert_eq!(r.p_max, r.x);

        let r = optimum(&params(FRAC_PI_2, FRAC_PI_4));
        assert!((r.x - 0.146_446_609_406_726_24).abs() < 1e-12);
        assert!((r.p_max - (1.0 - FRAC_PI_4.cos())).abs() < 1e-15);
        assert!((r.p_max - 0.292_893_218_813_452_5).abs() < 1e-12);
    }

    #[test]
    fn oracle_examples() {
        let r = pmax_oracle(&params(FRAC_PI_2, FRAC_PI_3), 1e-7).unwrap();
        assert!((r.p - 0.5).abs() < 1e-5, "{r:?}");
        let r = pmax_oracle(&params(FRAC_PI_4, FRAC_PI_6), 1e-7).unwrap();
        assert!((r.p - 0.322_474_487_139_158_9).abs() < 1e-5, "{r:?}");
        let r = pmax_oracle(&params(0.3, FRAC_PI_2), 1e-7).unwrap();
        assert!((r.p - 1.0).abs() < 1e-5, "{r:?}");
        assert!(pmax_oracle(&params(0.3, 0.3), 1e-1).is_err());
    }

    #[test]
    fn bell_conversion_examples() {
        assert_eq!(bell_conversion_prob(FRAC_PI_2).unwrap(), 1.0);
        assert!((bell_conversion_prob(FRAC_PI_3).unwrap() - 0.5).abs() < 1e-15);
        assert!(bell_conversion_prob(2.0).is_err());
        for i in 1..=40 {
            let a = i as f64 * FRAC_PI_2 / 40.0;
            let floor = bell_conversion_prob(a).unwrap();
            for j in 1..=40 {
                let t = j as f64 * FRAC_PI_2 / 40.0;
                assert!(optimum(&params(t, a)).p_max >= floor - 1e-12);
            }
        }
    }

    #[test]
    fn optimum_sits_on_hyperbola() {
        for i in 1..=30 {
            for j in 1..=30 {
                let p = params(i as f64 * FRAC_PI_2 / 30.0, j as f64 * FRAC_PI_2 / 30.0);
                let r = optimum(&p);
                let set = build_povm(&p, &r.weights());
                assert!(set.e3_min_eigenvalue >= -1e-9, "{p:?}");
                assert!(set.e3.det().norm() < 1e-9, "{p:?}");
                assert!((r.p_max - (r.x + r.y)).abs() < 1e-12);
                assert!(r.p_max > 0.0 && r.p_max <= 1.0);
            }
        }
    }

    #[test]
    fn boundary_continuity() {
        for k in 1..=100 {
            let t = k as f64 * FRAC_PI_2 / 101.0;
            let a = (1.0 / (t.sin() + t.cos())).acos();
            let p = params(t, a);
            let (_, _, tangent) = tangent_optimum(&p);
            let (_, _, axis) = axis_optimum(&p);
            assert!((tangent - axis).abs() < 1e-12, "theta={t}");
        }
    }

    #[test]
    fn monotone_in_resources() {
        let n = 50;
        let grid: Vec<f64> = (1..=n).map(|k| k as f64 * FRAC_PI_2 / n as f64).collect();
        let p = |t: f64, a: f64| optimum(&params(t, a)).p_max;
        for &t in &grid {
            for w in grid.windows(2) {
                assert!(p(t, w[1]) > p(t, w[0]), "alpha step at theta={t}");
            }
        }
        // a Bell resource gives p = 1 for every angle, so exclude it here
        for &a in &grid[..n - 1] {
            for w in grid.windows(2) {
                assert!(p(w[1], a) < p(w[0], a), "theta step at alpha={a}");
            }
        }
    }

    #[test]
    fn limits() {
        for k in 1..=10 {
            let a = k as f64 * 0.05 * PI;
            assert!(optimum(&params(1e-4, a)).p_max > 1.0 - 2e-4);
        }
        for k in 1..=10 {
            let t = k as f64 * 0.05 * PI;
            assert!(optimum(&params(t, FRAC_PI_2 - 1e-4)).p_max > 1.0 - 2e-4);
        }
        for k in 1..=50 {
            let a = k as f64 * FRAC_PI_2 / 50.0;
            assert_eq!(optimum(&params(FRAC_PI_2, a)).p_max, 1.0 - cos_alpha(a));
        }
    }

    fn theta_alpha() -> impl Strategy<Value = ProtocolParams> {
        (1e-3..=FRAC_PI_2, 1e-3..=FRAC_PI_2).prop_map(|(t, a)| params(t, a))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn closed_forms_match_matrices(p in theta_alpha(), x in 0.0..1.2f64, y in 0.0..1.2f64) {
            let w = PovmWeights::new(x, y).unwrap();
            let e3 = build_povm(&p, &w).e3;
            // matrix-side rounding grows with the entry size
            let (a, b, d) = (e3.get(0, 0).re, e3.get(0, 1).re, e3.get(1, 1).re);
            prop_assert!((tr_e3(&p, &w) - e3.trace().re).abs() < 1e-12 * (1.0 + a.abs() + d.abs()));
            prop_assert!((det_e3(&p, &w) - e3.det().re).abs() < 1e-12 * (1.0 + (a * d).abs() + b * b));
            let first_form = tr_e3(&p, &w) - 1.0 + 4.0 * x * y / p.alpha().sin().powi(2);
            prop_assert!((first_form - det_e3(&p, &w)).abs() < 1e-9 * (1.0 + first_form.abs()));
        }
    }
}
