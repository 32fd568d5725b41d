//! Energy functions, admissible parameter ranges and the perturbed-decrease check
//! used to certify the convergence rates of the fast forward-backward iteration.

use crate::error::{Error, Result};
use crate::linalg::Vector;

use super::{FfbParams, FfbState};

/// `3(α-2)/(4(α-1))`, the growth rate of the energy weights.
fn growth(alpha: f64) -> f64 {
    3.0 * (alpha - 2.0) / (4.0 * (alpha - 1.0))
}

/// `(5α-2)/(4(α-1))`.
fn velocity_weight(alpha: f64) -> f64 {
    (5.0 * alpha - 2.0) / (4.0 * (alpha - 1.0))
}

/// Open interval of admissible `η`, or a domain error when it is empty (`α <= 2`).
pub fn admissible_eta_interval(alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 2.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!("eta interval needs alpha > 2, got {alpha}")));
    }
    let base = alpha * alpha / (16.0 * (alpha - 1.0)) + (2.0 * alpha - 1.0) / 4.0;
    let spread = (alpha - 2.0) * ((9.0 * alpha - 2.0) * (5.0 * alpha - 10.0)).sqrt() / (16.0 * (alpha - 1.0));
    let lo = (base - spread).max(0.0);
    let hi = (base + spread).min((5.0 * alpha - 2.0) / 8.0);
    if lo < hi {
        Ok((lo, hi))
    } else {
        Err(Error::Domain(format!("empty eta interval at alpha = {alpha}")))
    }
}

/// Midpoint of [`admissible_eta_interval`].
pub fn default_eta(alpha: f64) -> Result<f64> {
    let (lo, hi) = admissible_eta_interval(alpha)?;
    Ok(0.5 * (lo + hi))
}

/// Open interval of `ε` compatible with both `ε < 3(α-2)/(4(α-1))` and
/// `γ < 2β/(2-ε)`.
pub fn admissible_epsilon_interval(alpha: f64, beta: f64, gamma: f64) -> Result<(f64, f64)> {
    let hi = growth(alpha);
    let lo = if beta.is_finite() { (2.0 - 2.0 * beta / gamma).max(0.0) } else { 0.0 };
    if lo < hi {
        Ok((lo, hi))
    } else {
        Err(Error::Domain(format!(
            "no admissible epsilon for alpha = {alpha}, beta = {beta}, gamma = {gamma}"
        )))
    }
}

/// Midpoint of [`admissible_epsilon_interval`]. When `γ <= β` this is
/// `3(α-2)/(8(α-1))`.
pub fn default_epsilon(alpha: f64, beta: f64, gamma: f64) -> Result<f64> {
    let (lo, hi) = admissible_epsilon_interval(alpha, beta, gamma)?;
    Ok(0.5 * (lo + hi))
}

/// Closed-form constants appearing in the energy decrease estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuConstants {
    pub alpha: f64,
    pub eta: f64,
    pub epsilon: f64,
    pub nu0: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub nu3: f64,
    pub nu4: f64,
    pub nu5: f64,
    pub nu6: f64,
    pub nu7: f64,
    /// Undefined when `η >= (5α-2)/8`.
    pub nu8: Option<f64>,
}

impl NuConstants {
    pub fn new(alpha: f64, eta: f64, epsilon: f64) -> Result<Self> {
        if !(alpha > 2.0) || !alpha.is_finite() {
            return Err(Error::Domain(format!("alpha > 2 required, got {alpha}")));
        }
        if !(0.0..=alpha - 1.0).contains(&eta) {
            return Err(Error::Domain(format!("0 <= eta <= alpha - 1 required, got {eta}")));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Domain(format!("0 < epsilon < 1 required, got {epsilon}")));
        }
        let a = alpha;
        let am1 = a - 1.0;
        let nu0 = 3.0 * (a - 2.0) * eta / (4.0 * am1) + (5.0 * a - 2.0) * (eta + 1.0 - a) / (4.0 * am1)
            - (4.0 * a - 1.0) * (a - 2.0) / (4.0 * am1);
        let nu1 = a * (eta + 1.0 - a) + (eta - 1.0) * a + (5.0 * a - 2.0) / (4.0 * am1);
        let nu2 = 2.0 * (eta + 1.0 - a);
        let nu3 = (5.0 * a - 2.0) * (2.0 - a) / (2.0 * am1);
        let nu4 = (4.0 * a * a + a - 2.0) / (2.0 * am1) - a * a;
        let nu5 = growth(a);
        let nu6 = (1.0 - epsilon) / (2.0 - epsilon);
        let nu7 = (3.0 - 2.0 * epsilon) * a / (2.0 * (2.0 - epsilon));
        let shrink = 1.0 - 8.0 * eta / (5.0 * a - 2.0);
        let nu8 = (shrink > 0.0).then(|| 4.0 / 3.0 * (a - 2.0) * eta / shrink);
        Ok(Self { alpha, eta, epsilon, nu0, nu1, nu2, nu3, nu4, nu5, nu6, nu7, nu8 })
    }

    /// `(2β - (2-ε)γ) · 3(α-2)γ / (8(α-1))`.
    pub fn nu9(&self, beta: f64, gamma: f64) -> f64 {
        (2.0 * beta - (2.0 - self.epsilon) * gamma) * 3.0 * (self.alpha - 2.0) * gamma / (8.0 * (self.alpha - 1.0))
    }

    /// Coefficient multiplying `||C(z_{k+1}) - C(z_k)||²` in the decrease estimate.
    pub fn omega(&self, k: usize, beta: f64, gamma: f64) -> f64 {
        let (a, e, q) = (self.alpha, self.epsilon, self.nu5);
        let k1 = k as f64 + 1.0;
        let inner = q * k1 + a;
        (2.0 * beta - (2.0 - e) * gamma) * q * gamma * k1 * k1 - q * gamma * gamma * k1 * k1.sqrt()
            - 0.5 * a * gamma * gamma * inner * inner.sqrt()
            - 0.5 * (2.0 - e) * gamma * gamma * a * a
            + (2.0 * beta - (2.0 - e) * (11.0 * a - 14.0) * gamma / (8.0 * (a - 1.0))) * a * gamma * k1
    }
}

/// Parameters shared by the energy functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    pub alpha: f64,
    pub gamma: f64,
    pub eta: f64,
    pub epsilon: f64,
}

impl EnergyParams {
    /// Default `η` and `ε` for the given solver parameters and cocoercivity modulus.
    pub fn for_solver(params: &FfbParams, beta: f64) -> Result<Self> {
        Ok(Self {
            alpha: params.alpha,
            gamma: params.gamma,
            eta: default_eta(params.alpha)?,
            epsilon: default_epsilon(params.alpha, beta, params.gamma)?,
        })
    }
}

/// Energy `E_{η,k}`, built from `z_k - z*`, `z_k - z_{k-1}` and `ξ_k + C(z_{k-1})`.
pub fn energy_e(state: &FfbState, z_star: &Vector, p: &EnergyParams) -> f64 {
    let k = state.k as f64;
    let (a, g, eta) = (p.alpha, p.gamma, p.eta);
    let q = growth(a);
    let w = velocity_weight(a);
    let e = &state.z - z_star;
    let dz = &state.z - &state.z_prev;
    let s = state.shifted_xi();
    let lead = &e * (2.0 * eta) + &dz * (2.0 * k) + &s * (w * g * k);
    0.5 * lead.norm_squared()
        + 2.0 * eta * (a - 1.0 - eta) * e.norm_squared()
        + 2.0 * eta * g * (q * k + a) * e.dot(&s)
        + 0.5 * g * g * (q * k + a) * (w * k + a) * s.norm_squared()
}

/// Expanded form of [`energy_e`]; the two agree up to rounding.
pub fn energy_e_expanded(state: &FfbState, z_star: &Vector, p: &EnergyParams) -> f64 {
    let k = state.k as f64;
    let (a, g, eta) = (p.alpha, p.gamma, p.eta);
    let q = growth(a);
    let w = velocity_weight(a);
    let e = &state.z - z_star;
    let dz = &state.z - &state.z_prev;
    let s = state.shifted_xi();
    let vel = &dz * 2.0 + &s * (w * g);
    2.0 * eta * (a - 1.0) * e.norm_squared()
        + 4.0 * eta * k * e.dot(&(&dz + &s * g))
        + 2.0 * eta * g * a * e.dot(&s)
        + 0.5 * k * k * vel.norm_squared()
        + 0.5 * g * g * (q * k + a) * (w * k + a) * s.norm_squared()
}

/// Energy `F_{η,ε,k}`: [`energy_e`] corrected by the change of the cocoercive part.
pub fn energy_f(state: &FfbState, z_star: &Vector, p: &EnergyParams) -> f64 {
    let k = state.k as f64;
    let (a, g) = (p.alpha, p.gamma);
    let q = growth(a);
    let dz = &state.z - &state.z_prev;
    let dc = &state.c - &state.c_prev;
    let weight = q * k + a;
    energy_e(state, z_star, p) - 2.0 * g * weight * k * dz.dot(&dc)
        + 0.5 * g * g * weight * ((2.0 - p.epsilon) * (2.0 * k + a) + a * weight.sqrt()) * dc.norm_squared()
}

/// Lower bound `η(α-1)(1 - 8η/(5α-2)) ||z_k - z*||²` on [`energy_f`].
pub fn energy_lower_bound(state: &FfbState, z_star: &Vector, p: &EnergyParams) -> f64 {
    let a = p.alpha;
    p.eta * (a - 1.0) * (1.0 - 8.0 * p.eta / (5.0 * a - 2.0)) * (&state.z - z_star).norm_squared()
}

/// Auxiliary quadratic form `S_k` dominated by [`energy_f`].
pub fn auxiliary_energy(state: &FfbState, z_star: &Vector, p: &EnergyParams) -> f64 {
    let k = state.k as f64;
    let (a, g, eta) = (p.alpha, p.gamma, p.eta);
    let e = &state.z - z_star;
    let s = state.shifted_xi();
    eta * (a - 1.0) * (1.0 - 8.0 * eta / (5.0 * a - 2.0)) * e.norm_squared()
        + 2.0 * eta * a * g * e.dot(&s)
        + 0.5 * a * g * g * k * s.norm_squared()
}

/// Nonnegative remainder `R_k` of the decrease estimate, evaluated on the state at
/// `k+1` (it involves `z_{k+1} - z_k` and `ξ_{k+1} + C(z_k)`).
pub fn decrease_remainder(next: &FfbState, p: &EnergyParams) -> Result<f64> {
    if next.k < 2 {
        return Err(Error::Domain("decrease remainder needs a state with k >= 2".into()));
    }
    let nu = NuConstants::new(p.alpha, p.eta, p.epsilon)?;
    let k = (next.k - 1) as f64;
    let (a, g) = (p.alpha, p.gamma);
    let scale = ((9.0 * a - 2.0) / (2.0 * (5.0 * a - 2.0))).sqrt();
    let dz = &next.z - &next.z_prev;
    let s = next.shifted_xi();
    Ok(2.0 * scale * nu.nu2 * k * dz.norm_squared()
        + 2.0 * g * (nu.nu0 * k + nu.nu1) * dz.dot(&s)
        + 0.5 * scale * g * g * (nu.nu3 * k + a * (nu.nu5 * k + a).sqrt() + nu.nu4) * s.norm_squared())
}

/// Outcome of [`perturbed_decrease_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedDecreaseReport {
    /// Smallest `K` such that `F_{k+1} <= (1 + d_k) F_k` holds for all checked `k >= K`.
    pub k_start: usize,
    /// Indices `k` where the inequality failed.
    pub violations: Vec<usize>,
    pub checked: usize,
}

/// Checks `F_{k+1} <= (1 + d_k) F_k` with `d_k = ν8/((k+1)^{3/2} - ν8)` along a
/// series of energies, where `energies[i]` holds `F_{i+1}`.
///
/// A relative slack of `rel_tol · max(|F_k|, |F_{k+1}|)` absorbs rounding. Indices
/// where `(k+1)^{3/2} <= ν8` cannot be certified and count as violations.
pub fn perturbed_decrease_check(energies: &[f64], alpha: f64, eta: f64, rel_tol: f64) -> Result<PerturbedDecreaseReport> {
    let shrink = 1.0 - 8.0 * eta / (5.0 * alpha - 2.0);
    if !(alpha > 2.0) || !(eta >= 0.0) || !(shrink > 0.0) {
        return Err(Error::Domain(format!("perturbation constant undefined for alpha = {alpha}, eta = {eta}")));
    }
    let nu8 = 4.0 / 3.0 * (alpha - 2.0) * eta / shrink;
    let mut violations = Vec::new();
    for (i, pair) in energies.windows(2).enumerate() {
        let k = i + 1;
        let denom = ((k + 1) as f64).powf(1.5) - nu8;
        let ok = denom > 0.0 && {
            let d = nu8 / denom;
            let slack = rel_tol * pair[0].abs().max(pair[1].abs());
            pair[1] <= (1.0 + d) * pair[0] + slack
        };
        if !ok {
            violations.push(k);
        }
    }
    let k_start = violations.last().map_or(1, |&k| k + 1);
    Ok(PerturbedDecreaseReport { k_start, violations, checked: energies.len().saturating_sub(1) })
}
