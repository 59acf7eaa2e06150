//! Closed-form costs of the cyclic multiaccess scheme and of its superposition
//! across access levels.
//!
//! Everything here is generic over [`Scalar`]: exact rationals reproduce the
//! packet simulator bit for bit, floats feed the optimizer.

use thiserror::Error;

use crate::scalar::Scalar;
use crate::system::SystemConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("level {level} outside [1, {max}]")]
    LevelOutOfRange { level: usize, max: usize },
    #[error("gamma {gamma} for level {level} outside [{lower}, {upper}]")]
    GammaOutOfRange {
        level: usize,
        gamma: f64,
        lower: f64,
        upper: f64,
    },
    #[error("memory ratio {ratio} outside the baseline range [{lower}, {upper}]")]
    MemoryOutOfRange { ratio: f64, lower: f64, upper: f64 },
    #[error("singular pair: gamma_i == gamma_j")]
    Singular,
    #[error("memory ratio is not between the two caching ratios (alpha = ({alpha_i}, {alpha_j}))")]
    AlphaOutOfRange { alpha_i: f64, alpha_j: f64 },
    #[error("infeasible design: {0}")]
    Infeasible(String),
}

/// Per-level cost split into broadcast, direct-retrieval and decode-retrieval
/// terms, all normalized per file.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelCost<T> {
    pub r_b: T,
    pub r_c1: T,
    pub r_c2: T,
    pub total: T,
}

fn check_level<T: Scalar>(l: usize, cfg: &SystemConfig<T>) -> Result<(), CostError> {
    if l == 0 || l > cfg.level {
        return Err(CostError::LevelOutOfRange {
            level: l,
            max: cfg.level,
        });
    }
    Ok(())
}

fn check_gamma<T: Scalar>(l: usize, gamma: &T, cfg: &SystemConfig<T>) -> Result<(), CostError> {
    check_level(l, cfg)?;
    let (lo, hi) = cfg.gamma_bounds(l);
    if *gamma < lo || *gamma > hi {
        return Err(CostError::GammaOutOfRange {
            level: l,
            gamma: gamma.to_f64_lossy(),
            lower: lo.to_f64_lossy(),
            upper: hi.to_f64_lossy(),
        });
    }
    Ok(())
}

/// Cost of running the level-`l` scheme at caching ratio `γ` on the whole
/// library: `R_b = K(1−lγ)/(Kγ+1)·ρ`, `R_c1 = Kγ·Σ_{ℓ≤l} μ_ℓ`,
/// `R_c2 = K²γ(1−lγ)/(Kγ+1)·(μ_1+μ_l)`.
pub fn level_cost<T: Scalar>(
    l: usize,
    gamma: &T,
    cfg: &SystemConfig<T>,
) -> Result<LevelCost<T>, CostError> {
    check_gamma(l, gamma, cfg)?;
    Ok(level_cost_unchecked(l, gamma, cfg))
}

pub(crate) fn level_cost_unchecked<T: Scalar>(
    l: usize,
    gamma: &T,
    cfg: &SystemConfig<T>,
) -> LevelCost<T> {
    let k = T::from_count(cfg.k);
    let kg = k.clone() * gamma.clone();
    let spare = T::one() - T::from_count(l) * gamma.clone();
    let load = k.clone() * spare / (kg.clone() + T::one());
    let r_b = load.clone() * cfg.rho.clone();
    let r_c1 = kg.clone() * cfg.mu_prefix_sum(l);
    let r_c2 = kg * load * (cfg.mu_at(1).clone() + cfg.mu_at(l).clone());
    let total = r_b.clone() + r_c1.clone() + r_c2.clone();
    LevelCost {
        r_b,
        r_c1,
        r_c2,
        total,
    }
}

/// One active level of a superposition design.
#[derive(Debug, Clone, PartialEq)]
pub struct Support<T> {
    pub level: usize,
    pub alpha: T,
    pub gamma: T,
}

/// Weights `α_l` and caching ratios `γ_l` over a set of levels, with its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpositionDesign<T> {
    pub supports: Vec<Support<T>>,
    pub objective: T,
}

impl<T: Scalar> SuperpositionDesign<T> {
    /// Checks feasibility and evaluates the objective.
    pub fn new(supports: Vec<Support<T>>, cfg: &SystemConfig<T>) -> Result<Self, CostError> {
        let objective = superposition_objective(&supports, cfg)?;
        Ok(Self {
            supports,
            objective,
        })
    }

    /// All weight on level `l` at `γ_l = M/N`.
    pub fn single(l: usize, cfg: &SystemConfig<T>) -> Result<Self, CostError> {
        Self::new(
            vec![Support {
                level: l,
                alpha: T::one(),
                gamma: cfg.memory_ratio(),
            }],
            cfg,
        )
    }

    /// Levels carrying nonzero weight.
    pub fn active(&self) -> impl Iterator<Item = &Support<T>> {
        self.supports.iter().filter(|s| !s.alpha.is_zero())
    }
}

/// `Σ_l α_l·level_cost(l, γ_l).total`, after checking `Σα = 1`,
/// `Σαγ = M/N` (to [`Scalar::feasibility_tol`]), `α ∈ [0,1]` and the `γ` boxes.
pub fn superposition_objective<T: Scalar>(
    supports: &[Support<T>],
    cfg: &SystemConfig<T>,
) -> Result<T, CostError> {
    if supports.is_empty() || supports.len() > cfg.level {
        return Err(CostError::Infeasible(format!(
            "support size {} outside [1, {}]",
            supports.len(),
            cfg.level
        )));
    }
    let mut seen = vec![false; cfg.level + 1];
    let mut weight = T::zero();
    let mut memory = T::zero();
    let mut objective = T::zero();
    for s in supports {
        check_level(s.level, cfg)?;
        if std::mem::replace(&mut seen[s.level], true) {
            return Err(CostError::Infeasible(format!("level {} repeated", s.level)));
        }
        if s.alpha.is_negative() || s.alpha > T::one() {
            return Err(CostError::Infeasible(format!(
                "alpha {} for level {} outside [0, 1]",
                s.alpha, s.level
            )));
        }
        let cost = level_cost(s.level, &s.gamma, cfg)?;
        weight = weight + s.alpha.clone();
        memory = memory + s.alpha.clone() * s.gamma.clone();
        objective = objective + s.alpha.clone() * cost.total;
    }
    if !T::approx_eq(&weight, &T::one()) {
        return Err(CostError::Infeasible(format!("weights sum to {weight}, not 1")));
    }
    let ratio = cfg.memory_ratio();
    if !T::approx_eq(&memory, &ratio) {
        return Err(CostError::Infeasible(format!(
            "memory use {memory} differs from M/N = {ratio}"
        )));
    }
    Ok(objective)
}

/// The plain level-`L` scheme at `γ = M/N`.
pub fn baseline_cost<T: Scalar>(cfg: &SystemConfig<T>) -> Result<T, CostError> {
    let ratio = cfg.memory_ratio();
    let (lo, hi) = cfg.gamma_bounds(cfg.level);
    if ratio < lo || ratio > hi {
        return Err(CostError::MemoryOutOfRange {
            ratio: ratio.to_f64_lossy(),
            lower: lo.to_f64_lossy(),
            upper: hi.to_f64_lossy(),
        });
    }
    Ok(level_cost_unchecked(cfg.level, &ratio, cfg).total)
}

/// Coefficients of the per-level numerator `A γ² + B γ + Kρ`, which equals
/// `level_cost(l, γ).total·(Kγ + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedCoefficients<T> {
    pub a: T,
    pub b: T,
}

impl<T: Scalar> ReducedCoefficients<T> {
    /// `A = K²Σ_{ℓ≤l}μ_ℓ − K²l(μ_1+μ_l)`, `B = KΣ_{ℓ≤l}μ_ℓ − Klρ + K²(μ_1+μ_l)`.
    pub fn new(l: usize, cfg: &SystemConfig<T>) -> Self {
        let k = T::from_count(cfg.k);
        let k2 = k.clone() * k.clone();
        let lf = T::from_count(l);
        let prefix = cfg.mu_prefix_sum(l);
        let ends = cfg.mu_at(1).clone() + cfg.mu_at(l).clone();
        Self {
            a: k2.clone() * prefix.clone() - k2.clone() * lf.clone() * ends.clone(),
            b: k.clone() * prefix - k * lf * cfg.rho.clone() + k2 * ends,
        }
    }

    /// `(Aγ² + Bγ + Kρ)/(Kγ + 1)`.
    pub fn per_level(&self, gamma: &T, cfg: &SystemConfig<T>) -> T {
        let k = T::from_count(cfg.k);
        let g = gamma.clone();
        (self.a.clone() * g.clone() * g.clone() + self.b.clone() * g.clone() + k.clone() * cfg.rho.clone())
            / (k * g + T::one())
    }
}

/// `(α_i, α_j)` solving `α_i + α_j = 1`, `α_iγ_i + α_jγ_j = M/N`.
pub fn alpha_from_gammas<T: Scalar>(
    gamma_i: &T,
    gamma_j: &T,
    memory_ratio: &T,
) -> Result<(T, T), CostError> {
    let span = gamma_j.clone() - gamma_i.clone();
    if span.is_zero() {
        return Err(CostError::Singular);
    }
    let alpha_i = (gamma_j.clone() - memory_ratio.clone()) / span.clone();
    let alpha_j = (memory_ratio.clone() - gamma_i.clone()) / span;
    let unit = |a: &T| !a.is_negative() && *a <= T::one();
    if !unit(&alpha_i) || !unit(&alpha_j) {
        return Err(CostError::AlphaOutOfRange {
            alpha_i: alpha_i.to_f64_lossy(),
            alpha_j: alpha_j.to_f64_lossy(),
        });
    }
    Ok((alpha_i, alpha_j))
}

/// Two-level objective as a function of `(γ_i, γ_j)` alone:
/// `[(γ_j − M/N)·P_i(γ_i) + (M/N − γ_i)·P_j(γ_j)]/(γ_j − γ_i)` with
/// `P_l(γ) = (A_lγ² + B_lγ + Kρ)/(Kγ + 1)`.
pub fn reduced_objective<T: Scalar>(
    i: usize,
    j: usize,
    gamma_i: &T,
    gamma_j: &T,
    cfg: &SystemConfig<T>,
) -> Result<T, CostError> {
    if i == j {
        return Err(CostError::Infeasible("levels of a pair must differ".into()));
    }
    check_gamma(i, gamma_i, cfg)?;
    check_gamma(j, gamma_j, cfg)?;
    let ratio = cfg.memory_ratio();
    alpha_from_gammas(gamma_i, gamma_j, &ratio)?;
    Ok(reduced_objective_unchecked(i, j, gamma_i, gamma_j, cfg))
}

pub(crate) fn reduced_objective_unchecked<T: Scalar>(
    i: usize,
    j: usize,
    gamma_i: &T,
    gamma_j: &T,
    cfg: &SystemConfig<T>,
) -> T {
    let ratio = cfg.memory_ratio();
    let pi = ReducedCoefficients::new(i, cfg).per_level(gamma_i, cfg);
    let pj = ReducedCoefficients::new(j, cfg).per_level(gamma_j, cfg);
    ((gamma_j.clone() - ratio.clone()) * pi + (ratio - gamma_i.clone()) * pj)
        / (gamma_j.clone() - gamma_i.clone())
}
