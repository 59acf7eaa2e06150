//! Minimization of the superposition cost over level weights and caching
//! ratios.
//!
//! A minimizer is supported on at most two levels. A pair `(i, j)` below always
//! means level `i` caches at most `M/N` and level `j` at least `M/N`, so the
//! weights follow from the two caching ratios and the search is over
//! `(γ_i, γ_j)` only.

use num_traits::{Float, Signed};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::cost::{
    alpha_from_gammas, level_cost, level_cost_unchecked, reduced_objective_unchecked,
    superposition_objective, CostError, ReducedCoefficients, SuperpositionDesign, Support,
};
use crate::scalar::{Rational, Real, Scalar};
use crate::system::SystemConfig;

/// Default cap on the number of grid points the oracle evaluates.
pub const DEFAULT_MAX_GRID_POINTS: usize = 50_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("invalid solver settings: {0}")]
    InvalidSettings(String),
    #[error("oracle grid has {points} points, above the limit {limit}")]
    GridTooLarge { points: usize, limit: usize },
}

/// How the greedy search picks candidate levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CandidateMode {
    /// Levels closest in index to the incumbent pair, ties to the smaller.
    #[default]
    Nearest,
    /// A seeded random sample of the non-incumbent levels.
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    /// Candidate-set size; `None` picks `max(1, ⌊L/2⌋)` capped at `L − 2`.
    pub budget_b: Option<usize>,
    /// Relative stationarity tolerance.
    pub tol: f64,
    /// Iteration cap of one local solve.
    pub max_iter: usize,
    /// Cap on greedy passes.
    pub max_outer: usize,
    pub seed: u64,
    /// Oracle resolution; `None` means `1/K`.
    pub grid_step: Option<Rational>,
    pub candidate_mode: CandidateMode,
    pub max_grid_points: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            budget_b: None,
            tol: 1e-10,
            max_iter: 200,
            max_outer: 1000,
            seed: 0,
            grid_step: None,
            candidate_mode: CandidateMode::Nearest,
            max_grid_points: DEFAULT_MAX_GRID_POINTS,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self, level: usize) -> Result<(), OptimizeError> {
        let bad = |m: String| Err(OptimizeError::InvalidSettings(m));
        if !(self.tol > 0.0) {
            return bad("tol must be positive".into());
        }
        if self.max_iter == 0 || self.max_outer == 0 {
            return bad("iteration caps must be positive".into());
        }
        if let Some(b) = self.budget_b {
            if b == 0 {
                return bad("budget B must be positive".into());
            }
            if level > 2 && b > level - 2 {
                return bad(format!("budget B={b} exceeds L-2={}", level - 2));
            }
        }
        if let Some(step) = &self.grid_step {
            if !step.is_positive() {
                return bad("grid step must be positive".into());
            }
        }
        Ok(())
    }

    /// Effective candidate-set size for `L` levels.
    pub fn budget(&self, level: usize) -> usize {
        match self.budget_b {
            Some(b) => b,
            None if level > 2 => (level / 2).max(1).min(level - 2),
            None => level.saturating_sub(2),
        }
    }
}

/// One evaluated candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord<T> {
    /// Levels `(i, j)`; equal for a single-support candidate.
    pub pair: (usize, usize),
    pub gamma: (T, T),
    pub objective: T,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult<T> {
    pub i_star: usize,
    pub j_star: usize,
    pub gamma_star: (T, T),
    pub alpha_star: (T, T),
    pub objective: T,
    /// Greedy passes (`I`).
    pub outer_iterations: usize,
    /// Local-solver steps summed over all calls (`T`).
    pub solver_iterations_total: usize,
    pub trace: Vec<TraceRecord<T>>,
    /// Whether every local solve met its stopping rule.
    pub converged: bool,
}

impl<T: Real> OptimizationResult<T> {
    fn single(l: usize, m: T, objective: T) -> Self {
        Self {
            i_star: l,
            j_star: l,
            gamma_star: (m, m),
            alpha_star: (T::one(), T::zero()),
            objective,
            outer_iterations: 0,
            solver_iterations_total: 0,
            trace: Vec::new(),
            converged: true,
        }
    }

    pub fn is_single(&self) -> bool {
        self.i_star == self.j_star
    }

    /// Levels with nonzero weight.
    pub fn support(&self) -> Vec<Support<T>> {
        if self.is_single() {
            return vec![Support {
                level: self.i_star,
                alpha: T::one(),
                gamma: self.gamma_star.0,
            }];
        }
        [
            (self.i_star, self.alpha_star.0, self.gamma_star.0),
            (self.j_star, self.alpha_star.1, self.gamma_star.1),
        ]
        .into_iter()
        .filter(|&(_, a, _)| a > T::zero())
        .map(|(level, alpha, gamma)| Support {
            level,
            alpha,
            gamma,
        })
        .collect()
    }

    pub fn support_size(&self) -> usize {
        self.support().len()
    }

    pub fn design(&self, cfg: &SystemConfig<T>) -> Result<SuperpositionDesign<T>, CostError> {
        SuperpositionDesign::new(self.support(), cfg)
    }
}

/// Exact optimum of the weight LP for fixed caching ratios, by enumerating its
/// basic solutions: single levels with `γ_l = M/N` and pairs strictly
/// bracketing `M/N`. Returns the full weight vector and its cost.
pub fn lp_alpha<T: Scalar>(
    gammas: &[T],
    cfg: &SystemConfig<T>,
) -> Result<(Vec<T>, T), OptimizeError> {
    if gammas.len() != cfg.level {
        return Err(OptimizeError::Infeasible(format!(
            "expected {} caching ratios, found {}",
            cfg.level,
            gammas.len()
        )));
    }
    let costs = gammas
        .iter()
        .enumerate()
        .map(|(l0, g)| level_cost(l0 + 1, g, cfg).map(|c| c.total))
        .collect::<Result<Vec<T>, _>>()?;
    let m = cfg.memory_ratio();
    let mut best: Option<(Vec<T>, T)> = None;
    let mut offer = |alpha: Vec<T>, value: T| {
        if best.as_ref().map_or(true, |(_, b)| value < *b) {
            best = Some((alpha, value));
        }
    };
    let n = gammas.len();
    for l in 0..n {
        if T::approx_eq(&gammas[l], &m) {
            let mut alpha = vec![T::zero(); n];
            alpha[l] = T::one();
            offer(alpha, costs[l].clone());
        }
    }
    for i in 0..n {
        for j in 0..n {
            if !(gammas[i] < m && m < gammas[j]) {
                continue;
            }
            let (ai, aj) = alpha_from_gammas(&gammas[i], &gammas[j], &m)?;
            let value = ai.clone() * costs[i].clone() + aj.clone() * costs[j].clone();
            let mut alpha = vec![T::zero(); n];
            alpha[i] = ai;
            alpha[j] = aj;
            offer(alpha, value);
        }
    }
    best.ok_or_else(|| OptimizeError::Infeasible("no level or pair brackets M/N".into()))
}

/// Feasible region of `(γ_i, γ_j)` for an ordered pair.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PairDomain<T> {
    i: usize,
    j: usize,
    x_lo: T,
    x_hi: T,
    y_lo: T,
    y_hi: T,
    gap: T,
}

/// Smallest allowed `γ_j − γ_i`, also used as the margin of [`PairDomain::interior`].
fn singularity_gap<T: Real>(k: usize) -> T {
    T::one() / T::lit(100.0 * k as f64)
}

impl<T: Real> PairDomain<T> {
    fn new(i: usize, j: usize, cfg: &SystemConfig<T>) -> Option<Self> {
        if i == j || i == 0 || j == 0 || i > cfg.level || j > cfg.level {
            return None;
        }
        let m = cfg.memory_ratio();
        let (lo_i, ub_i) = cfg.gamma_bounds(i);
        let (lo_j, ub_j) = cfg.gamma_bounds(j);
        let gap = singularity_gap(cfg.k);
        let x_hi = Float::min(m, ub_i);
        let y_lo = Float::max(m, lo_j);
        if x_hi < lo_i || y_lo > ub_j || ub_j - lo_i < gap {
            return None;
        }
        Some(Self {
            i,
            j,
            x_lo: lo_i,
            x_hi,
            y_lo,
            y_hi: ub_j,
            gap,
        })
    }

    fn contains(&self, x: T, y: T) -> bool {
        let eps = T::lit(1e-12);
        x >= self.x_lo - eps && x <= self.x_hi + eps && y >= self.y_lo - eps && y <= self.y_hi + eps
    }

    /// Projection onto the box intersected with `y − x ≥ gap`.
    fn project(&self, x: T, y: T) -> (T, T) {
        let clamp = |v: T, lo: T, hi: T| Float::min(Float::max(v, lo), hi);
        let mut x = clamp(x, self.x_lo, self.x_hi);
        let mut y = clamp(y, self.y_lo, self.y_hi);
        if y - x < self.gap {
            let two = T::lit(2.0);
            let mid = (x + y) / two;
            x = clamp(mid - self.gap / two, self.x_lo, self.x_hi);
            y = clamp(mid + self.gap / two, self.y_lo, self.y_hi);
            if y - x < self.gap {
                if y - self.gap >= self.x_lo {
                    x = y - self.gap;
                } else {
                    y = Float::min(x + self.gap, self.y_hi);
                }
            }
        }
        (x, y)
    }

    /// The part of the region at least `gap` away from `γ = M/N` on both
    /// sides. On `γ = M/N` one weight is 1 and the objective is flat in the
    /// other coordinate; the searches leave that limit to the single-level
    /// candidates.
    fn interior(&self, m: T) -> Option<Self> {
        let x_hi = Float::min(self.x_hi, m - self.gap);
        let y_lo = Float::max(self.y_lo, m + self.gap);
        (x_hi >= self.x_lo && y_lo <= self.y_hi).then_some(Self {
            x_hi,
            y_lo,
            ..*self
        })
    }

    fn width(&self) -> T {
        Float::max(self.x_hi - self.x_lo, self.y_hi - self.y_lo)
    }

    /// A central starting point.
    fn center(&self) -> (T, T) {
        let two = T::lit(2.0);
        self.project((self.x_lo + self.x_hi) / two, (self.y_lo + self.y_hi) / two)
    }
}

/// `f(γ) = p(γ)/q(γ)` for one level, with its first two derivatives.
struct LevelCurve<T> {
    a: T,
    b: T,
    c: T,
    k: T,
}

impl<T: Real> LevelCurve<T> {
    fn new(l: usize, cfg: &SystemConfig<T>) -> Self {
        let coeffs = ReducedCoefficients::new(l, cfg);
        let k = T::from_count(cfg.k);
        Self {
            a: coeffs.a,
            b: coeffs.b,
            c: k * cfg.rho,
            k,
        }
    }

    fn eval(&self, g: T) -> (T, T, T) {
        let p = self.a * g * g + self.b * g + self.c;
        let dp = T::lit(2.0) * self.a * g + self.b;
        let ddp = T::lit(2.0) * self.a;
        let q = self.k * g + T::one();
        let f = p / q;
        let df = (dp * q - p * self.k) / (q * q);
        let ddf = (ddp - T::lit(2.0) * df * self.k) / q;
        (f, df, ddf)
    }
}

struct PairObjective<T> {
    left: LevelCurve<T>,
    right: LevelCurve<T>,
    m: T,
}

struct Local<T> {
    value: T,
    grad: [T; 2],
    hess: [[T; 2]; 2],
}

impl<T: Real> PairObjective<T> {
    fn new(i: usize, j: usize, cfg: &SystemConfig<T>) -> Self {
        Self {
            left: LevelCurve::new(i, cfg),
            right: LevelCurve::new(j, cfg),
            m: cfg.memory_ratio(),
        }
    }

    fn value(&self, x: T, y: T) -> T {
        let (fi, _, _) = self.left.eval(x);
        let (fj, _, _) = self.right.eval(y);
        ((y - self.m) * fi + (self.m - x) * fj) / (y - x)
    }

    fn local(&self, x: T, y: T) -> Local<T> {
        let (fi, dfi, ddfi) = self.left.eval(x);
        let (fj, dfj, ddfj) = self.right.eval(y);
        let d = y - x;
        let two = T::lit(2.0);
        let r = ((y - self.m) * fi + (self.m - x) * fj) / d;
        let rx = ((y - self.m) * dfi - fj + r) / d;
        let ry = (fi + (self.m - x) * dfj - r) / d;
        let rxx = ((y - self.m) * ddfi + two * rx) / d;
        let ryy = ((self.m - x) * ddfj - two * ry) / d;
        let rxy = (dfi - dfj + ry - rx) / d;
        Local {
            value: r,
            grad: [rx, ry],
            hess: [[rxx, rxy], [rxy, ryy]],
        }
    }
}

/// Outcome of one local solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSolution<T> {
    pub gamma: (T, T),
    pub objective: T,
    pub iterations: usize,
    pub converged: bool,
}

fn inf_norm<T: Real>(v: [T; 2]) -> T {
    Float::max(Float::abs(v[0]), Float::abs(v[1]))
}

/// Minimizes the two-level objective of `(i, j)` from `init` by projected
/// Newton steps with Armijo backtracking, falling back to projected gradient
/// steps when the reduced Hessian is not positive definite.
pub fn local_solve<T: Real>(
    i: usize,
    j: usize,
    init: (T, T),
    cfg: &SystemConfig<T>,
    settings: &SolverSettings,
) -> Result<LocalSolution<T>, OptimizeError> {
    let domain = PairDomain::new(i, j, cfg).ok_or_else(|| {
        OptimizeError::Infeasible(format!("pair ({i},{j}) has no feasible caching ratios"))
    })?;
    if !domain.contains(init.0, init.1) {
        return Err(OptimizeError::Infeasible(format!(
            "initial point ({}, {}) outside the feasible box of ({i},{j})",
            init.0, init.1
        )));
    }
    Ok(solve_in(&domain, init, cfg, settings))
}

fn solve_in<T: Real>(
    domain: &PairDomain<T>,
    init: (T, T),
    cfg: &SystemConfig<T>,
    settings: &SolverSettings,
) -> LocalSolution<T> {
    let obj = PairObjective::new(domain.i, domain.j, cfg);
    let tol = T::lit(settings.tol);
    let armijo = T::lit(1e-4);
    let half = T::lit(0.5);
    let eps = T::epsilon();
    let (mut x, mut y) = domain.project(init.0, init.1);
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..settings.max_iter {
        let loc = obj.local(x, y);
        let r = loc.value;
        let g = loc.grad;
        let scale = Float::max(T::one(), Float::abs(r));
        let bound_eps = T::lit(64.0) * eps * Float::max(T::one(), domain.width());
        let at_lo = [x <= domain.x_lo + bound_eps, y <= domain.y_lo + bound_eps];
        let at_hi = [x >= domain.x_hi - bound_eps, y >= domain.y_hi - bound_eps];
        let gap_active = (y - x) <= domain.gap + bound_eps && g[0] < g[1];

        let mut pg = g;
        if gap_active {
            let avg = (g[0] + g[1]) / T::lit(2.0);
            pg = [avg, avg];
        }
        let mut free = [true; 2];
        for v in 0..2 {
            if (at_lo[v] && pg[v] > T::zero()) || (at_hi[v] && pg[v] < T::zero()) {
                pg[v] = T::zero();
                free[v] = false;
            }
        }
        if inf_norm(pg) <= tol * scale {
            converged = true;
            break;
        }

        let mut directions: Vec<([T; 2], T)> = Vec::with_capacity(2);
        if !gap_active {
            if let Some(d) = newton_direction(&loc, free) {
                directions.push((d, T::one()));
            }
        }
        let steepest = [-pg[0], -pg[1]];
        directions.push((steepest, domain.width() / inf_norm(pg)));

        let mut moved = None;
        'dirs: for (d, s0) in directions {
            let mut s = s0;
            while s * inf_norm(d) > eps * Float::max(T::one(), Float::abs(x) + Float::abs(y)) {
                let (nx, ny) = domain.project(x + s * d[0], y + s * d[1]);
                let predicted = g[0] * (nx - x) + g[1] * (ny - y);
                if predicted < T::zero() {
                    let nr = obj.value(nx, ny);
                    if nr <= r + armijo * predicted {
                        moved = Some((nx, ny, nr));
                        break 'dirs;
                    }
                }
                s = s * half;
            }
        }
        let Some((nx, ny, nr)) = moved else {
            // No representable descent step remains.
            converged = true;
            break;
        };
        iterations += 1;
        let step = Float::max(Float::abs(nx - x), Float::abs(ny - y));
        let tiny = step <= T::lit(4.0) * eps * Float::max(T::one(), domain.width())
            && r - nr <= T::lit(4.0) * eps * scale;
        x = nx;
        y = ny;
        if tiny {
            converged = true;
            break;
        }
    }
    LocalSolution {
        gamma: (x, y),
        objective: obj.value(x, y),
        iterations,
        converged,
    }
}

fn newton_direction<T: Real>(loc: &Local<T>, free: [bool; 2]) -> Option<[T; 2]> {
    let g = loc.grad;
    let h = loc.hess;
    match free {
        [true, true] => {
            let det = h[0][0] * h[1][1] - h[0][1] * h[0][1];
            if !(h[0][0] > T::zero() && det > T::zero()) {
                return None;
            }
            Some([
                -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
                -(h[0][0] * g[1] - h[0][1] * g[0]) / det,
            ])
        }
        [true, false] if h[0][0] > T::zero() => Some([-g[0] / h[0][0], T::zero()]),
        [false, true] if h[1][1] > T::zero() => Some([T::zero(), -g[1] / h[1][1]]),
        _ => None,
    }
}

/// Levels whose scheme can run at `γ = M/N`, with their cost.
fn single_candidates<T: Real>(cfg: &SystemConfig<T>) -> Vec<(usize, T)> {
    let m = cfg.memory_ratio();
    (1..=cfg.level)
        .filter(|&l| {
            let (lo, hi) = cfg.gamma_bounds(l);
            m >= lo && m <= hi
        })
        .map(|l| (l, level_cost_unchecked(l, &m, cfg).total))
        .collect()
}

fn improves<T: Real>(candidate: T, incumbent: T) -> bool {
    if !incumbent.is_finite() {
        return candidate.is_finite();
    }
    candidate < incumbent - T::lit(1e-12) * Float::max(T::one(), Float::abs(incumbent))
}

/// Picks the starting pair: `(1, L)` if feasible, else the pair with the
/// widest bracket around `M/N`.
fn initial_pair<T: Real>(cfg: &SystemConfig<T>) -> Option<PairDomain<T>> {
    let m = cfg.memory_ratio();
    let two_point = |i, j| PairDomain::new(i, j, cfg).and_then(|d| d.interior(m));
    if let Some(d) = two_point(1, cfg.level) {
        return Some(d);
    }
    let mut best: Option<PairDomain<T>> = None;
    for i in 1..=cfg.level {
        for j in 1..=cfg.level {
            if let Some(d) = two_point(i, j) {
                if best.map_or(true, |b| d.y_hi - d.x_lo > b.y_hi - b.x_lo) {
                    best = Some(d);
                }
            }
        }
    }
    best
}

fn candidate_levels(
    level: usize,
    incumbent: (usize, usize),
    budget: usize,
    settings: &SolverSettings,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let mut pool: Vec<usize> = (1..=level)
        .filter(|&k| k != incumbent.0 && k != incumbent.1)
        .collect();
    match settings.candidate_mode {
        CandidateMode::Nearest => pool.sort_by_key(|&k| {
            (k.abs_diff(incumbent.0).min(k.abs_diff(incumbent.1)), k)
        }),
        CandidateMode::Random => pool.shuffle(rng),
    }
    pool.truncate(budget);
    pool
}

/// Greedy search over level pairs with a restricted neighborhood, finished
/// by a comparison against every single-level candidate.
pub fn greedy_search<T: Real>(
    cfg: &SystemConfig<T>,
    settings: &SolverSettings,
) -> Result<OptimizationResult<T>, OptimizeError> {
    cfg.validate()
        .map_err(|e| OptimizeError::Infeasible(e.to_string()))?;
    settings.validate(cfg.level)?;
    let m = cfg.memory_ratio();
    let mut trace = Vec::new();
    let mut solver_total = 0;
    let mut outer = 0;
    let mut all_converged = true;
    let mut best_pair: Option<(PairDomain<T>, LocalSolution<T>)> = None;

    let mut solve_pair = |a: usize, b: usize, warm: Option<(T, T)>| {
        let mut best: Option<(PairDomain<T>, LocalSolution<T>)> = None;
        for (p, q) in [(a, b), (b, a)] {
            let Some(dom) = PairDomain::new(p, q, cfg).and_then(|d| d.interior(m)) else {
                continue;
            };
            let init = match warm {
                Some((x, y)) => dom.project(x, y),
                None => dom.center(),
            };
            let sol = solve_in(&dom, init, cfg, settings);
            solver_total += sol.iterations;
            all_converged &= sol.converged;
            if best.as_ref().map_or(true, |(_, b)| sol.objective < b.objective) {
                best = Some((dom, sol));
            }
        }
        best
    };

    if let Some(start) = initial_pair(cfg) {
        let first = solve_pair(start.i, start.j, None).expect("initial pair is feasible");
        trace.push(TraceRecord {
            pair: (first.0.i, first.0.j),
            gamma: first.1.gamma,
            objective: first.1.objective,
            accepted: true,
        });
        let mut incumbent = first;
        let budget = settings.budget(cfg.level);
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
        while outer < settings.max_outer {
            outer += 1;
            let (dom, sol) = &incumbent;
            let candidates = candidate_levels(cfg.level, (dom.i, dom.j), budget, settings, &mut rng);
            let mut accepted = None;
            'search: for k in candidates {
                for (a, b) in [(k, dom.j), (dom.i, k)] {
                    let Some((next, cand)) = solve_pair(a, b, Some(sol.gamma)) else {
                        continue;
                    };
                    let better = improves(cand.objective, sol.objective);
                    trace.push(TraceRecord {
                        pair: (next.i, next.j),
                        gamma: cand.gamma,
                        objective: cand.objective,
                        accepted: better,
                    });
                    if better {
                        accepted = Some((next, cand));
                        break 'search;
                    }
                }
            }
            match accepted {
                Some(next) => incumbent = next,
                None => break,
            }
        }
        best_pair = Some(incumbent);
    }

    let mut result = match best_pair {
        Some((dom, sol)) => pair_result(&dom, &sol, m)?,
        None => {
            let mut r = OptimizationResult::single(0, m, T::infinity());
            r.converged = true;
            r
        }
    };
    for (l, value) in single_candidates(cfg) {
        let better = improves(value, result.objective);
        trace.push(TraceRecord {
            pair: (l, l),
            gamma: (m, m),
            objective: value,
            accepted: better,
        });
        if better {
            result = OptimizationResult::single(l, m, value);
        }
    }
    if result.i_star == 0 {
        return Err(OptimizeError::Infeasible(
            "no level pair or single level can hold M/N".into(),
        ));
    }
    result.outer_iterations = outer;
    result.solver_iterations_total = solver_total;
    result.trace = trace;
    result.converged = all_converged;
    Ok(result)
}

fn pair_result<T: Real>(
    dom: &PairDomain<T>,
    sol: &LocalSolution<T>,
    m: T,
) -> Result<OptimizationResult<T>, OptimizeError> {
    let (x, y) = sol.gamma;
    let (ai, aj) = alpha_from_gammas(&x, &y, &m)?;
    Ok(OptimizationResult {
        i_star: dom.i,
        j_star: dom.j,
        gamma_star: (x, y),
        alpha_star: (ai, aj),
        objective: sol.objective,
        outer_iterations: 0,
        solver_iterations_total: sol.iterations,
        trace: Vec::new(),
        converged: sol.converged,
    })
}

fn grid_axis<T: Real>(lo: T, hi: T, step: T) -> Vec<T> {
    let mut out = Vec::new();
    let mut n = 0usize;
    loop {
        let v = lo + T::from_count(n) * step;
        if v > hi + step * T::lit(1e-9) {
            break;
        }
        out.push(Float::min(v, hi));
        n += 1;
    }
    if out.last().map_or(true, |&v| v < hi) {
        out.push(hi);
    }
    out
}

/// Best grid candidate of the oracle, before refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct GridBest<T> {
    pub pair: (usize, usize),
    pub gamma: (T, T),
    pub objective: T,
    pub points: usize,
}

/// Best grid point of each feasible ordered pair.
type PairCells<T> = Vec<(PairDomain<T>, (T, T), T)>;

fn pair_cells<T: Real>(
    cfg: &SystemConfig<T>,
    settings: &SolverSettings,
) -> Result<(PairCells<T>, usize), OptimizeError> {
    let k_inv = Rational::new(1.into(), (cfg.k as i64).into());
    let step_q = settings.grid_step.clone().unwrap_or_else(|| k_inv.clone());
    if !step_q.is_positive() || step_q > k_inv {
        return Err(OptimizeError::InvalidSettings(format!(
            "grid step {step_q} must lie in (0, 1/K]"
        )));
    }
    let step = T::convert(&step_q);
    let m = cfg.memory_ratio();
    let mut domains = Vec::new();
    for i in 1..=cfg.level {
        for j in 1..=cfg.level {
            if let Some(d) = PairDomain::new(i, j, cfg) {
                if let Some(g) = d.interior(m) {
                    let xs = grid_axis(g.x_lo, g.x_hi, step);
                    let ys = grid_axis(g.y_lo, g.y_hi, step);
                    domains.push((g, xs, ys));
                }
            }
        }
    }
    let points: usize = domains.iter().map(|(_, xs, ys)| xs.len() * ys.len()).sum();
    if points > settings.max_grid_points {
        return Err(OptimizeError::GridTooLarge {
            points,
            limit: settings.max_grid_points,
        });
    }
    let cells = domains
        .par_iter()
        .filter_map(|(d, xs, ys)| {
            let obj = PairObjective::new(d.i, d.j, cfg);
            let mut best: Option<((T, T), T)> = None;
            for &x in xs {
                for &y in ys {
                    if y - x < d.gap {
                        continue;
                    }
                    let v = obj.value(x, y);
                    if best.map_or(true, |(_, b)| v < b) {
                        best = Some(((x, y), v));
                    }
                }
            }
            best.map(|(g, v)| (*d, g, v))
        })
        .collect();
    Ok((cells, points))
}

/// Exhaustive grid evaluation: every ordered pair on an axis grid of the
/// given step (box endpoints and `M/N` included), plus every single level.
pub fn grid_search<T: Real>(
    cfg: &SystemConfig<T>,
    settings: &SolverSettings,
) -> Result<GridBest<T>, OptimizeError> {
    let (cells, points) = pair_cells(cfg, settings)?;
    let m = cfg.memory_ratio();
    let mut best: Option<GridBest<T>> = None;
    for (d, gamma, objective) in cells {
        if best.as_ref().map_or(true, |b| objective < b.objective) {
            best = Some(GridBest {
                pair: (d.i, d.j),
                gamma,
                objective,
                points,
            });
        }
    }
    for (l, value) in single_candidates(cfg) {
        if best.as_ref().map_or(true, |b| value < b.objective) {
            best = Some(GridBest {
                pair: (l, l),
                gamma: (m, m),
                objective: value,
                points,
            });
        }
    }
    best.ok_or_else(|| OptimizeError::Infeasible("no feasible grid point".into()))
}

/// Global reference: the grid of [`grid_search`], a local refinement from the
/// best grid point of every pair, and every single level.
pub fn brute_force_oracle<T: Real>(
    cfg: &SystemConfig<T>,
    settings: &SolverSettings,
) -> Result<OptimizationResult<T>, OptimizeError> {
    cfg.validate()
        .map_err(|e| OptimizeError::Infeasible(e.to_string()))?;
    settings.validate(cfg.level)?;
    let (cells, _) = pair_cells(cfg, settings)?;
    let m = cfg.memory_ratio();
    let refined: Vec<(PairDomain<T>, (T, T), T, LocalSolution<T>)> = cells
        .into_par_iter()
        .map(|(d, g, v)| {
            let sol = solve_in(&d, g, cfg, settings);
            (d, g, v, sol)
        })
        .collect();
    let mut trace = Vec::new();
    let mut result: Option<OptimizationResult<T>> = None;
    let mut total = 0;
    let mut converged = true;
    for (d, g, v, sol) in &refined {
        total += sol.iterations;
        converged &= sol.converged;
        trace.push(TraceRecord { pair: (d.i, d.j), gamma: *g, objective: *v, accepted: false });
        let better = result.as_ref().map_or(true, |r| sol.objective < r.objective);
        trace.push(TraceRecord {
            pair: (d.i, d.j),
            gamma: sol.gamma,
            objective: sol.objective,
            accepted: better,
        });
        if better {
            result = Some(pair_result(d, sol, m)?);
        }
    }
    for (l, value) in single_candidates(cfg) {
        let better = result.as_ref().map_or(true, |r| value < r.objective);
        trace.push(TraceRecord { pair: (l, l), gamma: (m, m), objective: value, accepted: better });
        if better {
            result = Some(OptimizationResult::single(l, m, value));
        }
    }
    let mut result =
        result.ok_or_else(|| OptimizeError::Infeasible("no feasible candidate".into()))?;
    result.solver_iterations_total = total;
    result.converged = converged;
    result.trace = trace;
    Ok(result)
}

/// A design on the `t/K` grid together with its exact cost.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedDesign {
    pub design: SuperpositionDesign<Rational>,
    pub cost: Rational,
    /// Exact cost minus the continuous objective.
    pub delta: f64,
}

fn grid_neighbors(gamma: f64, k: usize) -> (i64, i64) {
    let scaled = gamma * k as f64;
    let near = scaled.round();
    // Snap values within rounding error of a grid point.
    if (scaled - near).abs() < 1e-9 {
        (near as i64, near as i64)
    } else {
        (scaled.floor() as i64, scaled.ceil() as i64)
    }
}

/// Rounds a continuous result to realizable caching ratios `t/K` and
/// recomputes the weights exactly.
pub fn quantize_design<T: Real>(
    result: &OptimizationResult<T>,
    cfg: &SystemConfig<Rational>,
) -> Result<QuantizedDesign, OptimizeError> {
    let k = cfg.k;
    let m = cfg.memory_ratio();
    let grid = |t: i64| Rational::ratio(t, k as i64);
    let continuous = result.objective.to_f64_lossy();
    let finish = |supports: Vec<Support<Rational>>| -> Result<QuantizedDesign, OptimizeError> {
        let design = SuperpositionDesign::new(supports, cfg)?;
        let cost = design.objective.clone();
        Ok(QuantizedDesign {
            delta: cost.to_f64_lossy() - continuous,
            design,
            cost,
        })
    };
    let support = result.support();
    if support.len() == 1 {
        let l = support[0].level;
        if !(m.clone() * Rational::from_count(k)).is_integer() {
            return Err(OptimizeError::Infeasible(format!(
                "single level {l} needs M/N = {m} on the 1/K grid"
            )));
        }
        return finish(vec![Support {
            level: l,
            alpha: Rational::from_int(1),
            gamma: m,
        }]);
    }

    let (i, j) = (result.i_star, result.j_star);
    let (xi_lo, xi_hi) = cfg.gamma_bounds(i);
    let (yj_lo, yj_hi) = cfg.gamma_bounds(j);
    let in_box = |g: &Rational, lo: &Rational, hi: &Rational| g >= lo && g <= hi;
    let round = |gamma: f64, lo: &Rational, hi: &Rational| -> Rational {
        let (f, c) = grid_neighbors(gamma, k);
        let (gf, gc) = (grid(f), grid(c));
        let pick = if f == c {
            gf
        } else {
            let df = gamma - gf.to_f64_lossy();
            let dc = gc.to_f64_lossy() - gamma;
            if (df - dc).abs() <= 1e-12 {
                // Tie: toward M/N.
                if (gf.clone() - m.clone()).abs() <= (gc.clone() - m.clone()).abs() {
                    gf
                } else {
                    gc
                }
            } else if df < dc {
                gf
            } else {
                gc
            }
        };
        pick.max(lo.clone()).min(hi.clone())
    };
    let pair_supports = |gi: Rational, gj: Rational| -> Option<Vec<Support<Rational>>> {
        if !in_box(&gi, &xi_lo, &xi_hi) || !in_box(&gj, &yj_lo, &yj_hi) {
            return None;
        }
        if gi == m {
            return Some(vec![Support { level: i, alpha: Rational::from_int(1), gamma: gi }]);
        }
        if gj == m {
            return Some(vec![Support { level: j, alpha: Rational::from_int(1), gamma: gj }]);
        }
        let (ai, aj) = alpha_from_gammas(&gi, &gj, &m).ok()?;
        Some(vec![
            Support { level: i, alpha: ai, gamma: gi },
            Support { level: j, alpha: aj, gamma: gj },
        ])
    };
    let gx = result.gamma_star.0.to_f64_lossy();
    let gy = result.gamma_star.1.to_f64_lossy();
    if let Some(s) = pair_supports(round(gx, &xi_lo, &xi_hi), round(gy, &yj_lo, &yj_hi)) {
        return finish(s);
    }
    let (xf, xc) = grid_neighbors(gx, k);
    let (yf, yc) = grid_neighbors(gy, k);
    let mut best: Option<(Rational, Vec<Support<Rational>>)> = None;
    for tx in [xf, xc] {
        for ty in [yf, yc] {
            let Some(s) = pair_supports(grid(tx), grid(ty)) else {
                continue;
            };
            let Ok(value) = superposition_objective(&s, cfg) else {
                continue;
            };
            if best.as_ref().map_or(true, |(b, _)| value < *b) {
                best = Some((value, s));
            }
        }
    }
    match best {
        Some((_, s)) => finish(s),
        None => Err(OptimizeError::Infeasible(format!(
            "no grid neighbors of ({gx}, {gy}) bracket M/N = {m}"
        ))),
    }
}

/// Cost of a pair at a point, checked against the feasible region.
pub fn pair_objective<T: Real>(
    i: usize,
    j: usize,
    gamma: (T, T),
    cfg: &SystemConfig<T>,
) -> Result<T, OptimizeError> {
    let dom = PairDomain::new(i, j, cfg)
        .ok_or_else(|| OptimizeError::Infeasible(format!("pair ({i},{j}) infeasible")))?;
    if !dom.contains(gamma.0, gamma.1) {
        return Err(OptimizeError::Infeasible("point outside the pair's box".into()));
    }
    Ok(reduced_objective_unchecked(i, j, &gamma.0, &gamma.1, cfg))
}
