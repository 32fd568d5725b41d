//! Comparison schemes for `0 ∈ M(z) + C(z)`: forward-backward, inertial and relaxed
//! variants, corrected inertial schemes and the fast Krasnosel'skii-Mann iteration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_dim, is_finite, Vector};
use crate::operators::InclusionProblem;

/// Coefficient sequence indexed by `k >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Schedule {
    Constant { value: f64 },
    /// `min(cap, 1 - num/(k + shift))`.
    Harmonic {
        num: f64,
        shift: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<f64>,
    },
}

impl Schedule {
    pub fn at(&self, k: usize) -> f64 {
        match *self {
            Schedule::Constant { value } => value,
            Schedule::Harmonic { num, shift, cap } => {
                let v = 1.0 - num / (k as f64 + shift);
                cap.map_or(v, |c| v.min(c))
            }
        }
    }

    /// `k/(k+3)`.
    pub fn ratio3() -> Self {
        Schedule::Harmonic { num: 3.0, shift: 3.0, cap: None }
    }

    /// `min(1/3 - 1e-3, k/(k+3))`.
    pub fn capped_ratio3() -> Self {
        Schedule::Harmonic { num: 3.0, shift: 3.0, cap: Some(1.0 / 3.0 - 1e-3) }
    }

    fn check_range(&self, name: &str, lo: f64, hi: f64, hi_inclusive: bool, horizon: usize) -> Result<()> {
        // Schedules here are monotone in k, so checking the ends of the horizon suffices.
        for k in [1, horizon.max(1)] {
            let v = self.at(k);
            let ok = v >= lo && if hi_inclusive { v <= hi } else { v < hi };
            if !ok {
                let close = if hi_inclusive { ']' } else { ')' };
                return Err(Error::Config(format!("{name}_k in [{lo}, {hi}{close} violated at k = {k}: {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineKind {
    Fbs,
    InertialPpm,
    MoudafiOliny,
    LorenzPock,
    RelaxedInertial,
    Crifba,
    FastKm,
    Appm,
}

/// A baseline scheme with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum BaselineMethod {
    /// `z+ = J(z - γ C z)`.
    Fbs { gamma: f64 },
    /// `z+ = J(z_k + α_k (z_k - z_{k-1}))`; requires `C = 0`.
    InertialPpm { gamma: f64, momentum: Schedule },
    /// `z+ = J(z_k + α_k (z_k - z_{k-1}) - γ C z_k)`.
    MoudafiOliny { gamma: f64, momentum: Schedule },
    /// `y = z_k + α_k (z_k - z_{k-1})`, `z+ = J(y - γ C y)`.
    LorenzPock { gamma: f64, momentum: Schedule },
    /// `y = z_k + α_k (z_k - z_{k-1})`, `z+ = (1-ρ_k) y + ρ_k J_{μ_k M}(y - μ_k C y)`.
    RelaxedInertial { momentum: Schedule, relaxation: Schedule, step: Schedule },
    /// `y_k = z_k + α_k (z_k - z_{k-1}) + δ_k (y_{k-1} - z_k)`,
    /// `z+ = (1-ρ) y_k + ρ J(y_k - γ C y_k)`.
    Crifba { gamma: f64, momentum: Schedule, correction: Schedule, rho: f64 },
    /// Fast Krasnosel'skii-Mann iteration on `T = J(. - γ C .)`.
    FastKm { gamma: f64, alpha: f64, s: f64 },
    /// `y_k = z_k + α_k (z_k - z_{k-1}) + α_k (y_{k-2} - z_{k-1})`, `z+ = J(y_k)`;
    /// requires `C = 0`.
    Appm { gamma: f64, momentum: Schedule },
}

/// Default `α` of the fast Krasnosel'skii-Mann scheme.
pub const FAST_KM_ALPHA: f64 = 5.0;
/// Default constant relaxation for the relaxed schemes.
pub const DEFAULT_RELAXATION: f64 = 0.9;

impl BaselineMethod {
    /// The variant with its documented default schedules at step size `gamma`.
    pub fn with_defaults(kind: BaselineKind, gamma: f64, beta: f64) -> Self {
        match kind {
            BaselineKind::Fbs => Self::Fbs { gamma },
            BaselineKind::InertialPpm => Self::InertialPpm { gamma, momentum: Schedule::capped_ratio3() },
            BaselineKind::MoudafiOliny => Self::MoudafiOliny { gamma, momentum: Schedule::capped_ratio3() },
            BaselineKind::LorenzPock => Self::LorenzPock { gamma, momentum: Schedule::capped_ratio3() },
            BaselineKind::RelaxedInertial => Self::RelaxedInertial {
                momentum: Schedule::capped_ratio3(),
                relaxation: Schedule::Constant { value: DEFAULT_RELAXATION },
                step: Schedule::Constant { value: gamma },
            },
            BaselineKind::Crifba => Self::Crifba {
                gamma,
                momentum: Schedule::ratio3(),
                correction: Schedule::ratio3(),
                rho: DEFAULT_RELAXATION,
            },
            BaselineKind::FastKm => {
                let s_max = if beta.is_finite() { 2.0 - gamma / (2.0 * beta) } else { 2.0 };
                Self::FastKm { gamma, alpha: FAST_KM_ALPHA, s: 0.5 * s_max }
            }
            BaselineKind::Appm => Self::Appm { gamma, momentum: Schedule::Harmonic { num: 2.0, shift: 1.0, cap: None } },
        }
    }

    pub fn kind(&self) -> BaselineKind {
        match self {
            Self::Fbs { .. } => BaselineKind::Fbs,
            Self::InertialPpm { .. } => BaselineKind::InertialPpm,
            Self::MoudafiOliny { .. } => BaselineKind::MoudafiOliny,
            Self::LorenzPock { .. } => BaselineKind::LorenzPock,
            Self::RelaxedInertial { .. } => BaselineKind::RelaxedInertial,
            Self::Crifba { .. } => BaselineKind::Crifba,
            Self::FastKm { .. } => BaselineKind::FastKm,
            Self::Appm { .. } => BaselineKind::Appm,
        }
    }

    /// Step size used for the fixed-point residual of this scheme at iteration `k`.
    pub fn gamma(&self, k: usize) -> f64 {
        match self {
            Self::Fbs { gamma }
            | Self::InertialPpm { gamma, .. }
            | Self::MoudafiOliny { gamma, .. }
            | Self::LorenzPock { gamma, .. }
            | Self::Crifba { gamma, .. }
            | Self::FastKm { gamma, .. }
            | Self::Appm { gamma, .. } => *gamma,
            Self::RelaxedInertial { step, .. } => step.at(k),
        }
    }

    /// Checks the parameter ranges of the variant against `problem` for iterations
    /// `1..=horizon`.
    pub fn validate(&self, problem: &InclusionProblem, horizon: usize) -> Result<()> {
        let beta = problem.beta();
        let step_ok = |gamma: f64| -> Result<()> {
            if gamma > 0.0 && gamma.is_finite() && gamma < 2.0 * beta {
                problem.m.check_step(gamma)
            } else {
                Err(Error::Config(format!("0 < gamma < 2 beta violated: gamma = {gamma}, beta = {beta}")))
            }
        };
        let require_zero_c = || -> Result<()> {
            if problem.c.is_zero() {
                Ok(())
            } else {
                Err(Error::Config(format!("{:?} is a proximal-point scheme and requires C = 0", self.kind())))
            }
        };
        let positive = |gamma: f64| -> Result<()> {
            if gamma > 0.0 && gamma.is_finite() {
                problem.m.check_step(gamma)
            } else {
                Err(Error::Config(format!("gamma > 0 violated: {gamma}")))
            }
        };
        match self {
            Self::Fbs { gamma } => step_ok(*gamma),
            Self::InertialPpm { gamma, momentum } => {
                require_zero_c()?;
                positive(*gamma)?;
                momentum.check_range("alpha", 0.0, 1.0, false, horizon)
            }
            Self::MoudafiOliny { gamma, momentum } | Self::LorenzPock { gamma, momentum } => {
                step_ok(*gamma)?;
                momentum.check_range("alpha", 0.0, 1.0, false, horizon)
            }
            Self::RelaxedInertial { momentum, relaxation, step } => {
                momentum.check_range("alpha", 0.0, 1.0, false, horizon)?;
                relaxation.check_range("rho", f64::MIN_POSITIVE, 1.0, true, horizon)?;
                for k in [1, horizon.max(1)] {
                    step_ok(step.at(k))?;
                }
                Ok(())
            }
            Self::Crifba { gamma, momentum, correction, rho } => {
                step_ok(*gamma)?;
                momentum.check_range("alpha", 0.0, 1.0, false, horizon)?;
                correction.check_range("delta", 0.0, 1.0, false, horizon)?;
                if *rho > 0.0 && *rho <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::Config(format!("0 < rho <= 1 violated: {rho}")))
                }
            }
            Self::FastKm { gamma, alpha, s } => {
                step_ok(*gamma)?;
                if !(*alpha > 2.0) {
                    return Err(Error::Config(format!("alpha > 2 violated: {alpha}")));
                }
                let s_max = 2.0 - gamma / (2.0 * beta);
                if *s > 0.0 && *s < s_max {
                    Ok(())
                } else {
                    Err(Error::Config(format!("0 < s < 2 - gamma/(2 beta) violated: s = {s}, bound = {s_max}")))
                }
            }
            Self::Appm { gamma, momentum } => {
                require_zero_c()?;
                positive(*gamma)?;
                momentum.check_range("alpha", 0.0, 1.0, false, horizon)
            }
        }
    }

    /// State at `k = 1` with `z_0 = z_1 = y_0 = y_{-1} = z0` (no momentum history).
    pub fn init(&self, problem: &InclusionProblem, z0: Vector) -> Result<BaselineState> {
        self.validate(problem, 1)?;
        check_dim(problem.dim(), z0.len())?;
        let mut state = BaselineState {
            k: 1,
            z_prev: z0.clone(),
            z: z0.clone(),
            y_prev: None,
            y_prev2: None,
            t_prev: None,
        };
        match self {
            Self::Crifba { .. } => state.y_prev = Some(z0),
            Self::Appm { .. } => {
                state.y_prev = Some(z0.clone());
                state.y_prev2 = Some(z0);
            }
            Self::FastKm { gamma, .. } => {
                let t = forward_backward(problem, *gamma, &state.z);
                state.t_prev = Some(t);
            }
            _ => {}
        }
        Ok(state)
    }

    /// Advances `state` by one iteration. On divergence the state is left unchanged.
    pub fn step(&self, state: &mut BaselineState, problem: &InclusionProblem) -> Result<()> {
        let k = state.k;
        let momentum = &state.z - &state.z_prev;
        let mut y_new = None;
        let mut t_new = None;
        let z_next = match self {
            Self::Fbs { gamma } => forward_backward(problem, *gamma, &state.z),
            Self::InertialPpm { gamma, momentum: a } => {
                problem.m.resolvent(*gamma, &(&state.z + &momentum * a.at(k)))
            }
            Self::MoudafiOliny { gamma, momentum: a } => {
                let cz = problem.c.apply(&state.z);
                problem.m.resolvent(*gamma, &(&state.z + &momentum * a.at(k) - cz * *gamma))
            }
            Self::LorenzPock { gamma, momentum: a } => {
                let y = &state.z + &momentum * a.at(k);
                forward_backward(problem, *gamma, &y)
            }
            Self::RelaxedInertial { momentum: a, relaxation, step } => {
                let y = &state.z + &momentum * a.at(k);
                let rho = relaxation.at(k);
                let t = forward_backward(problem, step.at(k), &y);
                &y * (1.0 - rho) + t * rho
            }
            Self::Crifba { gamma, momentum: a, correction: d, rho } => {
                let y_prev = state.y_prev.as_ref().expect("CRIFBA state carries y_{k-1}");
                let y = &state.z + &momentum * a.at(k) + (y_prev - &state.z) * d.at(k);
                let t = forward_backward(problem, *gamma, &y);
                let z = &y * (1.0 - rho) + t * *rho;
                y_new = Some(y);
                z
            }
            Self::FastKm { gamma, alpha, s } => {
                let t_prev = state.t_prev.as_ref().expect("fast KM state carries T(z_{k-1})");
                let t = forward_backward(problem, *gamma, &state.z);
                let (kf, a) = (k as f64, *alpha);
                let z = &state.z * (1.0 - s * a / (2.0 * (kf + a)))
                    + &momentum * ((1.0 - s) * kf / (kf + a))
                    + &t * (s * (a + 2.0 * kf) / (2.0 * (kf + a)))
                    - t_prev * (s * kf / (kf + a));
                t_new = Some(t);
                z
            }
            Self::Appm { gamma, momentum: a } => {
                let y_prev2 = state.y_prev2.as_ref().expect("APPM state carries y_{k-2}");
                let ak = a.at(k);
                let y = &state.z + &momentum * ak + (y_prev2 - &state.z_prev) * ak;
                let z = problem.m.resolvent(*gamma, &y);
                y_new = Some(y);
                z
            }
        };
        let finite = is_finite(&z_next)
            && y_new.as_ref().is_none_or(is_finite)
            && t_new.as_ref().is_none_or(is_finite);
        if !finite {
            return Err(Error::Diverged { k: k + 1 });
        }
        state.z_prev = std::mem::replace(&mut state.z, z_next);
        if let Some(y) = y_new {
            if matches!(self, Self::Appm { .. }) {
                state.y_prev2 = state.y_prev.take();
            }
            state.y_prev = Some(y);
        }
        if t_new.is_some() {
            // The next step needs T(z_k), computed from the new z_k.
            state.t_prev = t_new;
        }
        state.k += 1;
        Ok(())
    }
}

fn forward_backward(problem: &InclusionProblem, gamma: f64, v: &Vector) -> Vector {
    let cv = problem.c.apply(v);
    problem.forward_backward(gamma, v, &cv)
}

/// Shared iteration record for all baselines. Slots that a variant does not use stay `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineState {
    pub k: usize,
    pub z_prev: Vector,
    pub z: Vector,
    /// `y_{k-1}` (CRIFBA, APPM).
    pub y_prev: Option<Vector>,
    /// `y_{k-2}` (APPM).
    pub y_prev2: Option<Vector>,
    /// `T(z_{k-1})` (fast KM).
    pub t_prev: Option<Vector>,
}

impl BaselineState {
    pub fn velocity(&self) -> f64 {
        (&self.z - &self.z_prev).norm()
    }
}
