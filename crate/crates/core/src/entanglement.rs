//! Entanglement bookkeeping for the deterministic scheme: use one partially
//! entangled pair, and on failure one extra Bell pair.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_alpha, check_theta, optimum, ProtocolParams};
use crate::search::{bisect, golden_section_min};

/// Grid points used before the golden-section refinement in
/// [`min_cost_over_alpha`].
pub const ALPHA_GRID: usize = 1000;

/// Bracket (in units of π) searched by [`threshold_theta`].
pub const THRESHOLD_BRACKET: (f64, f64) = (0.1, 0.4);

/// Inner minimization width used while bisecting for the threshold.
const THRESHOLD_INNER_TOL: f64 = 1e-8;

/// `−p log₂ p − (1−p) log₂(1−p)`, with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.log2() };
    term(p) + term(1.0 - p)
}

/// Von Neumann entropy of the resource pair, in ebits.
pub fn e_alpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let p = if alpha == FRAC_PI_2 {
        0.5
    } else {
        (0.5 * alpha).sin().powi(2)
    };
    Ok(binary_entropy(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntanglementReport {
    pub theta: f64,
    pub alpha: f64,
    pub e_alpha: f64,
    pub p_max: f64,
    /// Mean ebits per implemented gate, `1 − p_max + e_alpha`.
    pub avg_cost: f64,
}

/// `p E_α + (1 − p)(1 + E_α)`, written in its reduced form `1 − p + E_α`.
pub fn average_ebits(p_success: f64, e_alpha: f64) -> f64 {
    1.0 - p_success + e_alpha
}

pub fn avg_cost(params: &ProtocolParams) -> Result<EntanglementReport> {
    let e = e_alpha(params.alpha())?;
    let p_max = optimum(params).p_max;
    Ok(EntanglementReport {
        theta: params.theta(),
        alpha: params.alpha(),
        e_alpha: e,
        p_max,
        avg_cost: average_ebits(p_max, e),
    })
}

fn cost_at(theta: f64, alpha: f64) -> f64 {
    ProtocolParams::new(theta, alpha)
        .and_then(|p| avg_cost(&p))
        .map(|r| r.avg_cost)
        .unwrap_or(f64::INFINITY)
}

/// Cheapest resource for a given rotation angle.
///
/// Scans α on a uniform grid over `(0, π/2]`, then refines the best cell by
/// golden-section search to width `tol`. Returns `(α*, E(θ, α*))`.
pub fn min_cost_over_alpha(theta: f64, tol: f64) -> Result<(f64, f64)> {
    check_theta(theta)?;
    if !(1e-8..=1e-3).contains(&tol) {
        return Err(Error::OutOfDomain {
            name: "tol",
            value: tol,
            range: "[1e-8, 1e-3]",
        });
    }
    let step = FRAC_PI_2 / ALPHA_GRID as f64;
    let node = |i: usize| if i == ALPHA_GRID { FRAC_PI_2 } else { i as f64 * step };
    let (best_i, best_cost) = (1..=ALPHA_GRID)
        .map(|i| (i, cost_at(theta, node(i))))
        .fold((0, f64::INFINITY), |acc, (i, c)| if c < acc.1 { (i, c) } else { acc });

    let lo = node(best_i - 1);
    let hi = node((best_i + 1).min(ALPHA_GRID));
    let (a, c) = golden_section_min(|a| cost_at(theta, a), lo, hi, tol);
    Ok(if c < best_cost { (a, c) } else { (node(best_i), best_cost) })
}

/// Largest rotation angle (radians) for which some resource brings the
/// average cost below one ebit, bisected to a bracket of `tol · π`.
///
/// Below the threshold `min_α E(θ, α) < 1`; above it the minimum is the Bell
/// resource itself at exactly one ebit.
pub fn threshold_theta(tol: f64) -> Result<f64> {
    if !(1e-6..=1e-3).contains(&tol) {
        return Err(Error::OutOfDomain {
            name: "tol",
            value: tol,
            range: "[1e-6, 1e-3]",
        });
    }
    let below = |theta: f64| {
        min_cost_over_alpha(theta, THRESHOLD_INNER_TOL)
            .map(|(_, c)| c - 1.0 < 0.0)
            .unwrap_or(false)
    };
    bisect(below, THRESHOLD_BRACKET.0 * PI, THRESHOLD_BRACKET.1 * PI, tol * PI)
}

/// `min_α E(θ, α) − 1`; negative below the threshold.
pub fn threshold_gap(theta: f64) -> Result<f64> {
    Ok(min_cost_over_alpha(theta, THRESHOLD_INNER_TOL)?.1 - 1.0)
}
