use std::fmt;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid system configuration: {0}")]
pub struct ConfigError(pub String);

/// A `(K, μ, ρ, M, N)` cost-aware multiaccess system where each user reaches
/// `L = |μ|` consecutive cache nodes on a ring.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig<T> {
    /// Users, and cache nodes.
    pub k: usize,
    /// Cache nodes each user is connected to.
    pub level: usize,
    pub n_files: usize,
    /// Cache size in files.
    pub m: T,
    /// `μ_1..μ_L`, cost per file fetched from the `l`-th connected node.
    pub mu: Vec<T>,
    /// Cost per broadcast file.
    pub rho: T,
}

impl<T: Scalar> SystemConfig<T> {
    pub fn new(
        k: usize,
        level: usize,
        n_files: usize,
        m: T,
        mu: Vec<T>,
        rho: T,
    ) -> Result<Self, ConfigError> {
        let cfg = Self {
            k,
            level,
            n_files,
            m,
            mu,
            rho,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError(msg));
        if self.k == 0 {
            return fail("K must be positive".into());
        }
        if self.n_files == 0 {
            return fail("N must be positive".into());
        }
        if self.level == 0 || self.level > self.k {
            return fail(format!("L={} must lie in [1, K={}]", self.level, self.k));
        }
        if self.mu.len() != self.level {
            return fail(format!(
                "expected {} access costs, found {}",
                self.level,
                self.mu.len()
            ));
        }
        if self.mu.iter().any(|x| x.is_negative()) || self.rho.is_negative() {
            return fail("costs must be nonnegative".into());
        }
        let cap = T::from_count(self.n_files) / T::from_count(self.level);
        if !self.m.is_positive() || self.m > cap {
            return fail(format!("M={} must lie in (0, N/L = {cap}]", self.m));
        }
        Ok(())
    }

    /// `M/N`.
    pub fn memory_ratio(&self) -> T {
        self.m.clone() / T::from_count(self.n_files)
    }

    /// `μ_l`, 1-indexed.
    pub fn mu_at(&self, l: usize) -> &T {
        &self.mu[l - 1]
    }

    /// `Σ_{ℓ ≤ l} μ_ℓ`.
    pub fn mu_prefix_sum(&self, l: usize) -> T {
        self.mu[..l].iter().fold(T::zero(), |acc, x| acc + x.clone())
    }

    /// Admissible caching ratios `[1/K, ⌊K/l⌋/K]` for level `l`.
    pub fn gamma_bounds(&self, l: usize) -> (T, T) {
        let k = T::from_count(self.k);
        (T::one() / k.clone(), T::from_count(self.k / l) / k)
    }

    /// The same system with users reaching only their first `level` nodes.
    pub fn truncated(&self, level: usize) -> Result<Self, ConfigError> {
        if level == 0 || level > self.level {
            return Err(ConfigError(format!(
                "cannot truncate L={} to {level}",
                self.level
            )));
        }
        Self::new(
            self.k,
            level,
            self.n_files,
            self.m.clone(),
            self.mu[..level].to_vec(),
            self.rho.clone(),
        )
    }

    /// The same system with a different cache size.
    pub fn with_memory(&self, m: T) -> Result<Self, ConfigError> {
        Self::new(
            self.k,
            self.level,
            self.n_files,
            m,
            self.mu.clone(),
            self.rho.clone(),
        )
    }

    pub fn cast<U: Scalar>(&self) -> SystemConfig<U> {
        SystemConfig {
            k: self.k,
            level: self.level,
            n_files: self.n_files,
            m: U::convert(&self.m),
            mu: self.mu.iter().map(U::convert).collect(),
            rho: U::convert(&self.rho),
        }
    }
}

impl<T: Scalar> fmt::Display for SystemConfig<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mu: Vec<String> = self.mu.iter().map(|x| x.to_string()).collect();
        write!(
            f,
            "K={} L={} N={} M={} mu=({}) rho={}",
            self.k,
            self.level,
            self.n_files,
            self.m,
            mu.join(","),
            self.rho
        )
    }
}
