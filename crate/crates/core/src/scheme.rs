//! Construction of the node-placement (`C`), user-retrieve (`U`) and
//! user-delivery (`Q`) arrays of the cyclic multiaccess scheme, plus the
//! structural checks that make one-shot delivery work.
//!
//! Public user, cache-node and subset labels are 1-indexed. Row indices are
//! 0-based positions in the canonical row order: subsets `𝒯` in lexicographic
//! order, and for each `𝒯` the shift `g` from 1 to `K`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::combin::{binomial, lex_rank, lex_unrank, Subsets};
use crate::scalar::{Rational, Scalar};

/// Default cap on the subpacketization `F`.
pub const DEFAULT_MAX_SUBPACKETIZATION: u128 = 10_000_000;
/// Default cap on the number of cells `F·K` of one dense array.
pub const DEFAULT_MAX_CELLS: u128 = 100_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemeError {
    #[error("invalid scheme parameters: {0}")]
    InvalidParams(String),
    #[error("malformed subset {subset:?}: {reason}")]
    MalformedSubset { subset: Vec<usize>, reason: String },
    #[error("{what} {value} is outside {domain}")]
    OutOfDomain {
        what: &'static str,
        value: usize,
        domain: String,
    },
    #[error("subpacketization F={f} exceeds the limit {limit} (set MACC_MAX_F to raise it)")]
    SubpacketizationLimit { f: u128, limit: u128 },
    #[error("dense arrays need {cells} cells, above the limit {limit} (set MACC_MAX_CELLS to raise it)")]
    CellLimit { cells: u128, limit: u128 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl SchemeError {
    pub fn is_resource_limit(&self) -> bool {
        matches!(
            self,
            SchemeError::SubpacketizationLimit { .. } | SchemeError::CellLimit { .. }
        )
    }
}

/// 1-indexed residue: the `r ∈ [1, q]` with `r ≡ a (mod q)`.
pub fn cyc(a: i64, q: i64) -> i64 {
    assert!(q >= 1, "modulus must be positive");
    let r = a.rem_euclid(q);
    if r == 0 {
        q
    } else {
        r
    }
}

fn wrap(a: usize, q: usize) -> usize {
    cyc(a as i64, q as i64) as usize
}

/// Resource guardrails for dense array construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_subpacketization: u128,
    pub max_cells: u128,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            max_subpacketization: DEFAULT_MAX_SUBPACKETIZATION,
            max_cells: DEFAULT_MAX_CELLS,
        }
    }
}

impl Limits {
    /// Defaults, overridden by `MACC_MAX_F` and `MACC_MAX_CELLS` when set.
    pub fn from_env() -> Self {
        let read = |name: &str, default: u128| {
            std::env::var(name)
                .ok()
                .and_then(|v| v.trim().parse::<u128>().ok())
                .unwrap_or(default)
        };
        Self {
            max_subpacketization: read("MACC_MAX_F", DEFAULT_MAX_SUBPACKETIZATION),
            max_cells: read("MACC_MAX_CELLS", DEFAULT_MAX_CELLS),
        }
    }

    pub fn check(&self, p: &LevelParams) -> Result<(), SchemeError> {
        let f = p.subpacketization();
        if f > self.max_subpacketization {
            return Err(SchemeError::SubpacketizationLimit {
                f,
                limit: self.max_subpacketization,
            });
        }
        let cells = f.saturating_mul(p.k() as u128);
        if cells > self.max_cells {
            return Err(SchemeError::CellLimit {
                cells,
                limit: self.max_cells,
            });
        }
        Ok(())
    }
}

/// One `(K′, t, L)` instance with derived `K = K′ + t(L−1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LevelParams {
    k_prime: usize,
    t: usize,
    level: usize,
    k: usize,
    tee_count: u128,
    label_sets: u128,
}

impl LevelParams {
    pub fn new(k_prime: usize, t: usize, level: usize) -> Result<Self, SchemeError> {
        if t == 0 {
            return Err(SchemeError::InvalidParams("t must be positive".into()));
        }
        if level == 0 {
            return Err(SchemeError::InvalidParams("L must be positive".into()));
        }
        if k_prime < t {
            return Err(SchemeError::InvalidParams(format!(
                "K'={k_prime} must be at least t={t}"
            )));
        }
        let k = t
            .checked_mul(level - 1)
            .and_then(|x| x.checked_add(k_prime))
            .filter(|&k| k <= u32::MAX as usize)
            .ok_or_else(|| SchemeError::InvalidParams("K overflows".into()))?;
        let overflow = || SchemeError::InvalidParams("binomial coefficient overflows".into());
        let tee_count = binomial(k_prime as u64, t as u64).ok_or_else(overflow)?;
        let label_sets = binomial(k_prime as u64, t as u64 + 1).ok_or_else(overflow)?;
        tee_count.checked_mul(k as u128).ok_or_else(overflow)?;
        label_sets.checked_mul(k as u128).ok_or_else(overflow)?;
        Ok(Self {
            k_prime,
            t,
            level,
            k,
            tee_count,
            label_sets,
        })
    }

    /// Parameters of the level-`level` scheme with `K` users and `γ = t/K`.
    pub fn for_users(k: usize, t: usize, level: usize) -> Result<Self, SchemeError> {
        let used = t
            .checked_mul(level.saturating_sub(1))
            .ok_or_else(|| SchemeError::InvalidParams("t(L-1) overflows".into()))?;
        if level == 0 || used > k {
            return Err(SchemeError::InvalidParams(format!(
                "no scheme with K={k}, t={t}, L={level}"
            )));
        }
        let p = Self::new(k - used, t, level)?;
        debug_assert_eq!(p.k, k);
        Ok(p)
    }

    pub fn k_prime(&self) -> usize {
        self.k_prime
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `F = C(K′, t)·K`.
    pub fn subpacketization(&self) -> u128 {
        self.tee_count * self.k as u128
    }

    /// `S = K·C(K′, t+1)`, the number of broadcast messages.
    pub fn message_count(&self) -> u128 {
        self.label_sets * self.k as u128
    }

    /// `C(K′, t)`.
    pub fn tee_count(&self) -> u128 {
        self.tee_count
    }

    /// `C(K′, t+1)`.
    pub fn label_sets_per_shift(&self) -> u128 {
        self.label_sets
    }

    /// `γ = t/K`.
    pub fn gamma<T: Scalar>(&self) -> T {
        T::from_count(self.t) / T::from_count(self.k)
    }

    /// Worst-case load `(K − tL)/(t+1)`.
    pub fn load(&self) -> Rational {
        Rational::from_count(self.k - self.t * self.level) / Rational::from_count(self.t + 1)
    }

    /// `K′ = t`: every user retrieves every packet and nothing is broadcast.
    pub fn is_degenerate(&self) -> bool {
        self.k_prime == self.t
    }

    /// The `l`-th cache node user `user` is connected to.
    pub fn connected_node(&self, user: usize, l: usize) -> usize {
        wrap(user + l - 1, self.k)
    }

    fn header(&self) -> String {
        format!(
            "K'={} t={} L={} K={} F={} S={}",
            self.k_prime,
            self.t,
            self.level,
            self.k,
            self.subpacketization(),
            self.message_count()
        )
    }

    fn parse_header(line: &str, line_no: usize) -> Result<Self, SchemeError> {
        let err = |message: String| SchemeError::Parse {
            line: line_no,
            message,
        };
        let mut fields = BTreeMap::new();
        for token in line.split(' ') {
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| err(format!("malformed header token `{token}`")))?;
            let value: u128 = value
                .parse()
                .map_err(|_| err(format!("non-numeric header value `{token}`")))?;
            fields.insert(key, value);
        }
        let get = |key: &str| {
            fields
                .get(key)
                .copied()
                .ok_or_else(|| err(format!("header is missing `{key}`")))
        };
        let as_usize = |v: u128| usize::try_from(v).map_err(|_| err("header value too large".into()));
        let p = Self::new(
            as_usize(get("K'")?)?,
            as_usize(get("t")?)?,
            as_usize(get("L")?)?,
        )
        .map_err(|e| err(e.to_string()))?;
        if fields.len() != 6 {
            return Err(err("header must have exactly K', t, L, K, F, S".into()));
        }
        if get("K")? != p.k as u128
            || get("F")? != p.subpacketization()
            || get("S")? != p.message_count()
        {
            return Err(err("header K/F/S inconsistent with K', t, L".into()));
        }
        if p.header() != line {
            return Err(err("header is not in canonical form".into()));
        }
        Ok(p)
    }

    fn rows(&self) -> Vec<RowLabel> {
        let mut rows = Vec::with_capacity(self.subpacketization() as usize);
        for tee in Subsets::new(self.k_prime, self.t) {
            let tee = Subset(tee);
            for g in 1..=self.k {
                rows.push(RowLabel { tee: tee.clone(), g });
            }
        }
        rows
    }

    fn row_index(&self, tee: &Subset, g: usize) -> usize {
        lex_rank(&tee.0, self.k_prime) as usize * self.k + (g - 1)
    }
}

impl fmt::Display for LevelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.header())
    }
}

/// Strictly increasing set of 1-indexed integers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subset(Vec<usize>);

impl Subset {
    /// Validates that `elems` is strictly increasing within `[1, universe]`.
    pub fn new(elems: Vec<usize>, universe: usize) -> Result<Self, SchemeError> {
        let malformed = |reason: &str| SchemeError::MalformedSubset {
            subset: elems.clone(),
            reason: reason.to_string(),
        };
        if elems.windows(2).any(|w| w[0] >= w[1]) {
            return Err(malformed("elements must be strictly increasing"));
        }
        if elems.iter().any(|&x| x == 0 || x > universe) {
            return Err(malformed(&format!("elements must lie in [1, {universe}]")));
        }
        Ok(Self(elems))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.0.binary_search(&x).is_ok()
    }

    /// Number of elements strictly smaller than `x`.
    pub fn count_below(&self, x: usize) -> usize {
        self.0.partition_point(|&e| e < x)
    }

    /// The set with `x` added.
    pub fn with(&self, x: usize) -> Subset {
        let mut v = self.0.clone();
        if let Err(pos) = v.binary_search(&x) {
            v.insert(pos, x);
        }
        Subset(v)
    }

    /// The set with `x` removed.
    pub fn without(&self, x: usize) -> Subset {
        Subset(self.0.iter().copied().filter(|&e| e != x).collect())
    }

    fn parse(text: &str, universe: usize) -> Option<Self> {
        let inner = text.strip_prefix('{')?.strip_suffix('}')?;
        let elems = if inner.is_empty() {
            Vec::new()
        } else {
            inner
                .split(',')
                .map(|x| x.parse::<usize>().ok())
                .collect::<Option<Vec<_>>>()?
        };
        Self::new(elems, universe).ok()
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{x}")?;
        }
        f.write_str("}")
    }
}

/// Row label `(𝒯, g)`: a packet index within every file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowLabel {
    pub tee: Subset,
    pub g: usize,
}

impl fmt::Display for RowLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.tee, self.g)
    }
}

/// Broadcast message label `(𝒯⁺, g)` with `|𝒯⁺| = t + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MessageLabel {
    pub tee_plus: Subset,
    pub g: usize,
}

impl fmt::Display for MessageLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.tee_plus, self.g)
    }
}

/// Dense identifier of a [`MessageLabel`]: labels are numbered shift-major,
/// then by lexicographic rank of `𝒯⁺`, so `({1,2,3},1)` is 0 when `K′ = 4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MessageId(pub u32);

fn check_row(tee: &Subset, g: usize, p: &LevelParams) -> Result<(), SchemeError> {
    let tee = Subset::new(tee.0.clone(), p.k_prime)?;
    if tee.len() != p.t {
        return Err(SchemeError::MalformedSubset {
            subset: tee.0,
            reason: format!("expected {} elements", p.t),
        });
    }
    if g == 0 || g > p.k {
        return Err(SchemeError::OutOfDomain {
            what: "shift g",
            value: g,
            domain: format!("[1, {}]", p.k),
        });
    }
    Ok(())
}

fn node_set_unchecked(tee: &Subset, g: usize, p: &LevelParams) -> Vec<usize> {
    let mut nodes: Vec<usize> = tee
        .0
        .iter()
        .enumerate()
        .map(|(h0, &x)| wrap(x + (h0 + 1) * (p.level - 1) + g - 1, p.k))
        .collect();
    nodes.sort_unstable();
    nodes
}

fn intervals_unchecked(tee: &Subset, g: usize, p: &LevelParams) -> Vec<Vec<usize>> {
    tee.0
        .iter()
        .enumerate()
        .map(|(h0, &x)| {
            let start = x + h0 * (p.level - 1) + g - 1;
            (0..p.level).map(|r0| wrap(start + r0, p.k)).collect()
        })
        .collect()
}

/// `𝒞_{𝒯,g}`: the cache nodes storing packet `(𝒯, g)`, ascending.
pub fn cache_node_set(tee: &Subset, g: usize, p: &LevelParams) -> Result<Vec<usize>, SchemeError> {
    check_row(tee, g, p)?;
    Ok(node_set_unchecked(tee, g, p))
}

/// The `t` disjoint intervals `I_{𝒯,g,h}` of `L` consecutive users (cyclic)
/// that can retrieve packet `(𝒯, g)`. Element `r−1` of interval `h−1` is the
/// user at position `r`, which reaches the packet through its `(L−r+1)`-th
/// connected node.
pub fn retrieve_intervals(
    tee: &Subset,
    g: usize,
    p: &LevelParams,
) -> Result<Vec<Vec<usize>>, SchemeError> {
    check_row(tee, g, p)?;
    Ok(intervals_unchecked(tee, g, p))
}

/// `𝒰_{𝒯,g}`: the users able to retrieve packet `(𝒯, g)`, ascending.
pub fn user_retrieve_set(
    tee: &Subset,
    g: usize,
    p: &LevelParams,
) -> Result<Vec<usize>, SchemeError> {
    let mut users: Vec<usize> = retrieve_intervals(tee, g, p)?.concat();
    users.sort_unstable();
    Ok(users)
}

fn psi_inv_unchecked(tee: &Subset, g: usize, r: usize, p: &LevelParams) -> usize {
    let below = tee.count_below(r);
    wrap(below * (p.level - 1) + r + g - 1, p.k)
}

/// `ψ⁻¹_{𝒯,g}(r) = ⟨(n−1)(L−1) + r + g − 1⟩_K` where `r` is the `n`-th
/// smallest element of `𝒯 ∪ {r}`.
pub fn psi_inv(tee: &Subset, g: usize, r: usize, p: &LevelParams) -> Result<usize, SchemeError> {
    check_row(tee, g, p)?;
    if r == 0 || r > p.k_prime || tee.contains(r) {
        return Err(SchemeError::OutOfDomain {
            what: "index r",
            value: r,
            domain: format!("[{}] \\ {}", p.k_prime, tee),
        });
    }
    Ok(psi_inv_unchecked(tee, g, r, p))
}

/// `ψ_{𝒯,g}(k)`: the element of `[K′] \ 𝒯` that user `k ∉ 𝒰_{𝒯,g}` joins to
/// `𝒯` to form its message label. Defined as the inverse of [`psi_inv`].
pub fn psi(tee: &Subset, g: usize, k: usize, p: &LevelParams) -> Result<usize, SchemeError> {
    check_row(tee, g, p)?;
    let domain_err = || SchemeError::OutOfDomain {
        what: "user",
        value: k,
        domain: format!("[{}] \\ U_({},{})", p.k, tee, g),
    };
    if k == 0 || k > p.k {
        return Err(domain_err());
    }
    (1..=p.k_prime)
        .filter(|r| !tee.contains(*r))
        .find(|&r| psi_inv_unchecked(tee, g, r, p) == k)
        .ok_or_else(domain_err)
}

/// `F × K` array over `{star, null}`: the node-placement or user-retrieve array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StarArray {
    params: LevelParams,
    rows: Arc<[RowLabel]>,
    stars: Vec<bool>,
}

impl StarArray {
    pub fn params(&self) -> &LevelParams {
        &self.params
    }

    pub fn rows(&self) -> &[RowLabel] {
        &self.rows
    }

    pub fn height(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.params.k
    }

    /// Whether entry `(row, col)` is a star; `row` is 0-based, `col ∈ [1, K]`.
    pub fn is_star(&self, row: usize, col: usize) -> bool {
        self.stars[row * self.params.k + col - 1]
    }

    pub fn set(&mut self, row: usize, col: usize, star: bool) {
        let k = self.params.k;
        self.stars[row * k + col - 1] = star;
    }

    /// Columns holding a star in `row`, ascending.
    pub fn star_columns(&self, row: usize) -> Vec<usize> {
        (1..=self.params.k).filter(|&c| self.is_star(row, c)).collect()
    }

    pub fn to_text(&self) -> String {
        let k = self.params.k;
        let mut out = self.params.header();
        out.push('\n');
        for row in self.stars.chunks(k) {
            let line: Vec<&str> = row.iter().map(|&s| if s { "*" } else { "." }).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SchemeError> {
        Self::parse_lines(text.lines().enumerate(), text)
    }

    fn parse_lines<'a>(
        mut lines: impl Iterator<Item = (usize, &'a str)>,
        whole: &str,
    ) -> Result<Self, SchemeError> {
        let (idx, header) = lines.next().ok_or(SchemeError::Parse {
            line: 1,
            message: "empty input".into(),
        })?;
        let params = LevelParams::parse_header(header, idx + 1)?;
        let rows: Arc<[RowLabel]> = params.rows().into();
        let mut stars = Vec::with_capacity(rows.len() * params.k);
        for _ in 0..rows.len() {
            let (idx, line) = lines.next().ok_or(SchemeError::Parse {
                line: idx + 2,
                message: "missing rows".into(),
            })?;
            let parsed = line
                .split(' ')
                .map(|tok| match tok {
                    "*" => Ok(true),
                    "." => Ok(false),
                    other => Err(SchemeError::Parse {
                        line: idx + 1,
                        message: format!("unexpected entry `{other}`"),
                    }),
                })
                .collect::<Result<Vec<_>, _>>()?;
            if parsed.len() != params.k {
                return Err(SchemeError::Parse {
                    line: idx + 1,
                    message: format!("expected {} entries, found {}", params.k, parsed.len()),
                });
            }
            stars.extend(parsed);
        }
        if let Some((idx, _)) = lines.next() {
            return Err(SchemeError::Parse {
                line: idx + 1,
                message: "trailing content".into(),
            });
        }
        let array = Self {
            params,
            rows,
            stars,
        };
        if array.to_text() != whole {
            return Err(SchemeError::Parse {
                line: 0,
                message: "input is not in canonical form".into(),
            });
        }
        Ok(array)
    }
}

/// Entry of the user-delivery array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Entry {
    Star,
    Message(MessageId),
}

const STAR_CELL: u32 = u32::MAX;

/// `F × K` array over `{star} ∪ labels`: the user-delivery array `Q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveryArray {
    params: LevelParams,
    rows: Arc<[RowLabel]>,
    cells: Vec<u32>,
}

impl DeliveryArray {
    pub fn params(&self) -> &LevelParams {
        &self.params
    }

    pub fn rows(&self) -> &[RowLabel] {
        &self.rows
    }

    pub fn height(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.params.k
    }

    /// Entry at `(row, col)`; `row` is 0-based, `col ∈ [1, K]`.
    pub fn get(&self, row: usize, col: usize) -> Entry {
        match self.cells[row * self.params.k + col - 1] {
            STAR_CELL => Entry::Star,
            id => Entry::Message(MessageId(id)),
        }
    }

    /// Overwrites one entry. Panics if the message id is not a valid label id.
    pub fn set(&mut self, row: usize, col: usize, entry: Entry) {
        let cell = match entry {
            Entry::Star => STAR_CELL,
            Entry::Message(id) => {
                assert!(
                    u128::from(id.0) < self.params.message_count(),
                    "message id out of range"
                );
                id.0
            }
        };
        let k = self.params.k;
        self.cells[row * k + col - 1] = cell;
    }

    pub fn is_star(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.params.k + col - 1] == STAR_CELL
    }

    /// Decodes a message id into its `(𝒯⁺, g)` label.
    pub fn label(&self, id: MessageId) -> MessageLabel {
        let per_g = self.params.label_sets;
        let id = u128::from(id.0);
        let g = (id / per_g) as usize + 1;
        let tee_plus = Subset(lex_unrank(id % per_g, self.params.k_prime, self.params.t + 1));
        MessageLabel { tee_plus, g }
    }

    /// Id of a label, if it is a valid `(t+1)`-subset label for these parameters.
    pub fn id_of(&self, label: &MessageLabel) -> Option<MessageId> {
        let p = &self.params;
        if label.tee_plus.len() != p.t + 1 || label.g == 0 || label.g > p.k {
            return None;
        }
        if label.tee_plus.0.iter().any(|&x| x == 0 || x > p.k_prime) {
            return None;
        }
        let id = (label.g as u128 - 1) * p.label_sets + lex_rank(&label.tee_plus.0, p.k_prime);
        u32::try_from(id).ok().map(MessageId)
    }

    /// Positions `(row, col)` of every occurrence of each label, indexed by id.
    /// Within a label positions are row-ascending.
    pub fn occurrences(&self) -> Vec<Vec<(usize, usize)>> {
        let k = self.params.k;
        let mut out = vec![Vec::new(); self.params.message_count() as usize];
        for (i, &cell) in self.cells.iter().enumerate() {
            if cell != STAR_CELL {
                out[cell as usize].push((i / k, i % k + 1));
            }
        }
        out
    }

    /// Same star pattern as a star array (entries are stars or labels).
    pub fn star_pattern(&self) -> Vec<bool> {
        self.cells.iter().map(|&c| c == STAR_CELL).collect()
    }

    pub fn to_text(&self) -> String {
        let k = self.params.k;
        let mut out = self.params.header();
        out.push('\n');
        for row in self.cells.chunks(k) {
            let line: Vec<String> = row
                .iter()
                .map(|&c| match c {
                    STAR_CELL => "*".to_string(),
                    id => self.label(MessageId(id)).to_string(),
                })
                .collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SchemeError> {
        Self::parse_lines(text.lines().enumerate(), text)
    }

    fn parse_lines<'a>(
        mut lines: impl Iterator<Item = (usize, &'a str)>,
        whole: &str,
    ) -> Result<Self, SchemeError> {
        let (idx, header) = lines.next().ok_or(SchemeError::Parse {
            line: 1,
            message: "empty input".into(),
        })?;
        let params = LevelParams::parse_header(header, idx + 1)?;
        let rows: Arc<[RowLabel]> = params.rows().into();
        let mut array = Self {
            params,
            rows: rows.clone(),
            cells: Vec::with_capacity(rows.len() * params.k),
        };
        for _ in 0..rows.len() {
            let (idx, line) = lines.next().ok_or(SchemeError::Parse {
                line: idx + 2,
                message: "missing rows".into(),
            })?;
            let mut count = 0;
            for tok in line.split(' ') {
                count += 1;
                let cell = if tok == "*" {
                    STAR_CELL
                } else {
                    parse_message_label(tok, &params)
                        .and_then(|label| array.id_of(&label))
                        .ok_or_else(|| SchemeError::Parse {
                            line: idx + 1,
                            message: format!("invalid entry `{tok}`"),
                        })?
                        .0
                };
                array.cells.push(cell);
            }
            if count != params.k {
                return Err(SchemeError::Parse {
                    line: idx + 1,
                    message: format!("expected {} entries, found {count}", params.k),
                });
            }
        }
        if let Some((idx, _)) = lines.next() {
            return Err(SchemeError::Parse {
                line: idx + 1,
                message: "trailing content".into(),
            });
        }
        if array.to_text() != whole {
            return Err(SchemeError::Parse {
                line: 0,
                message: "input is not in canonical form".into(),
            });
        }
        Ok(array)
    }
}

fn parse_message_label(tok: &str, p: &LevelParams) -> Option<MessageLabel> {
    let inner = tok.strip_prefix('(')?.strip_suffix(')')?;
    let (set, g) = inner.rsplit_once(',')?;
    let tee_plus = Subset::parse(set, p.k_prime)?;
    let g = g.parse().ok()?;
    Some(MessageLabel { tee_plus, g })
}

/// The three arrays of one scheme instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scheme {
    pub params: LevelParams,
    pub node: StarArray,
    pub user: StarArray,
    pub delivery: DeliveryArray,
}

const SECTION_NODE: &str = "[C]";
const SECTION_USER: &str = "[U]";
const SECTION_DELIVERY: &str = "[Q]";

impl Scheme {
    /// Builds `C`, `U` and `Q` under the default [`Limits`].
    pub fn build(p: &LevelParams) -> Result<Self, SchemeError> {
        Self::build_with(p, &Limits::default())
    }

    pub fn build_with(p: &LevelParams, limits: &Limits) -> Result<Self, SchemeError> {
        limits.check(p)?;
        let rows: Arc<[RowLabel]> = p.rows().into();
        let k = p.k;
        let cells = rows.len() * k;
        let mut node = vec![false; cells];
        let mut user = vec![false; cells];
        let mut delivery = vec![STAR_CELL; cells];
        let mut scratch = DeliveryArray {
            params: *p,
            rows: rows.clone(),
            cells: Vec::new(),
        };
        for (i, row) in rows.iter().enumerate() {
            let base = i * k;
            for c in node_set_unchecked(&row.tee, row.g, p) {
                node[base + c - 1] = true;
            }
            for c in intervals_unchecked(&row.tee, row.g, p).concat() {
                user[base + c - 1] = true;
            }
            for r in (1..=p.k_prime).filter(|r| !row.tee.contains(*r)) {
                let col = psi_inv_unchecked(&row.tee, row.g, r, p);
                debug_assert!(!user[base + col - 1] && delivery[base + col - 1] == STAR_CELL);
                let label = MessageLabel {
                    tee_plus: row.tee.with(r),
                    g: row.g,
                };
                delivery[base + col - 1] = scratch.id_of(&label).expect("valid label").0;
            }
        }
        scratch.cells = delivery;
        Ok(Self {
            params: *p,
            node: StarArray {
                params: *p,
                rows: rows.clone(),
                stars: node,
            },
            user: StarArray {
                params: *p,
                rows,
                stars: user,
            },
            delivery: scratch,
        })
    }

    /// Row index of `(𝒯, g)` in canonical order.
    pub fn row_index(&self, tee: &Subset, g: usize) -> usize {
        self.params.row_index(tee, g)
    }

    /// The three arrays in text form, each preceded by its section marker.
    pub fn to_text(&self) -> String {
        format!(
            "{SECTION_NODE}\n{}{SECTION_USER}\n{}{SECTION_DELIVERY}\n{}",
            self.node.to_text(),
            self.user.to_text(),
            self.delivery.to_text()
        )
    }

    pub fn from_text(text: &str) -> Result<Self, SchemeError> {
        let lines: Vec<&str> = text.lines().collect();
        let find = |marker: &str| {
            lines
                .iter()
                .position(|l| *l == marker)
                .ok_or_else(|| SchemeError::Parse {
                    line: 0,
                    message: format!("missing section {marker}"),
                })
        };
        let (c, u, q) = (find(SECTION_NODE)?, find(SECTION_USER)?, find(SECTION_DELIVERY)?);
        if !(c == 0 && c < u && u < q) {
            return Err(SchemeError::Parse {
                line: 0,
                message: "sections must appear in the order [C], [U], [Q]".into(),
            });
        }
        let section = |from: usize, to: usize| {
            let mut s = lines[from + 1..to].join("\n");
            s.push('\n');
            (from + 1, s)
        };
        let shift = |e: SchemeError, offset: usize| match e {
            SchemeError::Parse { line, message } if line > 0 => SchemeError::Parse {
                line: line + offset,
                message,
            },
            other => other,
        };
        let (co, ct) = section(c, u);
        let (uo, ut) = section(u, q);
        let (qo, qt) = section(q, lines.len());
        let node = StarArray::from_text(&ct).map_err(|e| shift(e, co))?;
        let user = StarArray::from_text(&ut).map_err(|e| shift(e, uo))?;
        let delivery = DeliveryArray::from_text(&qt).map_err(|e| shift(e, qo))?;
        if node.params != user.params || user.params != delivery.params {
            return Err(SchemeError::Parse {
                line: 0,
                message: "sections disagree on parameters".into(),
            });
        }
        let scheme = Self {
            params: node.params,
            node,
            user,
            delivery,
        };
        if scheme.to_text() != text {
            return Err(SchemeError::Parse {
                line: 0,
                message: "input is not in canonical form".into(),
            });
        }
        Ok(scheme)
    }

    /// Runs [`validate_pda`] plus the consistency checks between the arrays.
    pub fn validate(&self) -> SchemeReport {
        let p = &self.params;
        let pda = validate_pda(&self.delivery, p);
        let stars_match_user = self.delivery.star_pattern() == self.user.stars;
        let mut cyclic_access = true;
        for row in 0..self.node.height() {
            for user in 1..=p.k {
                let reachable =
                    (1..=p.level).any(|l| self.node.is_star(row, p.connected_node(user, l)));
                if reachable != self.user.is_star(row, user) {
                    cyclic_access = false;
                }
            }
        }
        let expected_column = p.tee_count * p.t as u128;
        let uniform_memory = (1..=p.k).all(|col| {
            (0..self.node.height())
                .filter(|&r| self.node.is_star(r, col))
                .count() as u128
                == expected_column
        });
        let row_counts = (0..self.node.height()).all(|r| {
            self.node.star_columns(r).len() == p.t
                && self.user.star_columns(r).len() == p.t * p.level
        });
        SchemeReport {
            pda,
            stars_match_user,
            cyclic_access,
            uniform_memory,
            row_counts,
            shift_structure: check_shift_structure(self),
        }
    }
}

/// Outcome of [`Scheme::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemeReport {
    pub pda: PdaReport,
    /// Stars of `Q` sit exactly where `U` has stars.
    pub stars_match_user: bool,
    /// `U(row,k) = *` iff some connected node of `k` has a star in `C`.
    pub cyclic_access: bool,
    /// Every column of `C` holds `t·C(K′,t)` stars.
    pub uniform_memory: bool,
    /// `t` stars per row of `C`, `tL` per row of `U`.
    pub row_counts: bool,
    pub shift_structure: bool,
}

impl SchemeReport {
    pub fn passed(&self) -> bool {
        self.pda.passed()
            && self.stars_match_user
            && self.cyclic_access
            && self.uniform_memory
            && self.row_counts
            && self.shift_structure
    }
}

/// A reason `Q` fails to be a valid delivery array.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PdaViolation {
    /// The array's shape does not match the parameters it is checked against.
    Dimensions { expected: String, found: String },
    /// C1: two occurrences of one label share a row or a column.
    SharedLine {
        label: MessageId,
        first: (usize, usize),
        second: (usize, usize),
    },
    /// C2: the cross position of two occurrences is not a star.
    CrossNotStar {
        label: MessageId,
        first: (usize, usize),
        second: (usize, usize),
        cross: (usize, usize),
    },
    /// A label does not occur exactly `t + 1` times.
    Occurrences {
        label: MessageId,
        found: usize,
        expected: usize,
    },
    /// The number of distinct labels differs from `K·C(K′, t+1)`.
    LabelCount { found: usize, expected: u128 },
    /// The occurrences of a label cannot be permuted into diagonal form.
    NotCanonical { label: MessageId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PdaReport {
    pub distinct_labels: usize,
    pub expected_labels: u128,
    pub violations: Vec<PdaViolation>,
}

impl PdaReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn c1_holds(&self) -> bool {
        !self
            .violations
            .iter()
            .any(|v| matches!(v, PdaViolation::SharedLine { .. }))
    }

    pub fn c2_holds(&self) -> bool {
        !self
            .violations
            .iter()
            .any(|v| matches!(v, PdaViolation::CrossNotStar { .. }))
    }

    pub fn first_violation(&self) -> Option<&PdaViolation> {
        self.violations.first()
    }
}

/// Checks C1, C2, occurrence counts, the label count and diagonal form.
pub fn validate_pda(q: &DeliveryArray, p: &LevelParams) -> PdaReport {
    let mut violations = Vec::new();
    if q.params != *p {
        violations.push(PdaViolation::Dimensions {
            expected: p.header(),
            found: q.params.header(),
        });
        return PdaReport {
            distinct_labels: 0,
            expected_labels: p.message_count(),
            violations,
        };
    }
    let occurrences = q.occurrences();
    let mut distinct = 0;
    for (id, positions) in occurrences.iter().enumerate() {
        if positions.is_empty() {
            continue;
        }
        distinct += 1;
        let label = MessageId(id as u32);
        if positions.len() != p.t + 1 {
            violations.push(PdaViolation::Occurrences {
                label,
                found: positions.len(),
                expected: p.t + 1,
            });
        }
        let mut c1 = true;
        for (a, &first) in positions.iter().enumerate() {
            for &second in &positions[a + 1..] {
                if first.0 == second.0 || first.1 == second.1 {
                    c1 = false;
                    violations.push(PdaViolation::SharedLine {
                        label,
                        first,
                        second,
                    });
                    continue;
                }
                for cross in [(first.0, second.1), (second.0, first.1)] {
                    if !q.is_star(cross.0, cross.1) {
                        violations.push(PdaViolation::CrossNotStar {
                            label,
                            first,
                            second,
                            cross,
                        });
                    }
                }
            }
        }
        if !c1 || !is_diagonal_block(q, positions, id as u32) {
            violations.push(PdaViolation::NotCanonical { label });
        }
    }
    if distinct as u128 != p.message_count() {
        violations.push(PdaViolation::LabelCount {
            found: distinct,
            expected: p.message_count(),
        });
    }
    PdaReport {
        distinct_labels: distinct,
        expected_labels: p.message_count(),
        violations,
    }
}

/// With rows in the order given and columns permuted to match, the label
/// sits on the diagonal and stars everywhere else.
fn is_diagonal_block(q: &DeliveryArray, positions: &[(usize, usize)], id: u32) -> bool {
    positions.iter().enumerate().all(|(a, &(row, _))| {
        positions.iter().enumerate().all(|(b, &(_, col))| {
            let entry = q.get(row, col);
            if a == b {
                entry == Entry::Message(MessageId(id))
            } else {
                entry == Entry::Star
            }
        })
    })
}

/// True iff every shift block `(·, g)` of `C`, `U` and `Q` equals the block
/// `(·, 1)` cyclically right-shifted by `g − 1` columns (labels carrying `g`
/// in place of 1).
pub fn check_shift_structure(scheme: &Scheme) -> bool {
    let p = &scheme.params;
    let q = &scheme.delivery;
    for (row, label) in q.rows().iter().enumerate() {
        if label.g == 1 {
            continue;
        }
        let base = row - (label.g - 1);
        for col in 1..=p.k {
            let src = wrap(col + p.k - (label.g - 1), p.k);
            if scheme.node.is_star(row, col) != scheme.node.is_star(base, src)
                || scheme.user.is_star(row, col) != scheme.user.is_star(base, src)
            {
                return false;
            }
            match (q.get(row, col), q.get(base, src)) {
                (Entry::Star, Entry::Star) => {}
                (Entry::Message(a), Entry::Message(b)) => {
                    let (a, b) = (q.label(a), q.label(b));
                    if a.tee_plus != b.tee_plus || a.g != label.g || b.g != 1 {
                        return false;
                    }
                }
                _ => return false,
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[usize], n: usize) -> Subset {
        Subset::new(v.to_vec(), n).unwrap()
    }

    fn example() -> LevelParams {
        LevelParams::new(4, 2, 3).unwrap()
    }

    #[test]
    fn cyc_is_one_indexed() {
        assert_eq!(cyc(9, 8), 1);
        assert_eq!(cyc(8, 8), 8);
        assert_eq!(cyc(3, 8), 3);
        assert_eq!(cyc(0, 8), 8);
        assert_eq!(cyc(-1, 8), 7);
        assert_eq!(cyc(5, 1), 1);
    }

    #[test]
    fn params_derive_k_f_s() {
        let p = example();
        assert_eq!(p.k(), 8);
        assert_eq!(p.subpacketization(), 48);
        assert_eq!(p.message_count(), 32);
        assert_eq!(p.gamma::<Rational>(), Rational::ratio(1, 4));
        assert_eq!(p.load(), Rational::ratio(2, 3));
        assert!(LevelParams::new(1, 2, 1).is_err());
        assert!(LevelParams::new(3, 0, 1).is_err());
        assert!(LevelParams::new(3, 1, 0).is_err());
        assert_eq!(LevelParams::for_users(8, 2, 3).unwrap(), p);
        assert!(LevelParams::for_users(8, 3, 4).is_err());
    }

    #[test]
    fn cache_node_examples() {
        let p = example();
        assert_eq!(cache_node_set(&set(&[1, 2], 4), 1, &p).unwrap(), vec![3, 6]);
        assert_eq!(cache_node_set(&set(&[1, 2], 4), 2, &p).unwrap(), vec![4, 7]);
        let single = LevelParams::new(1, 1, 1).unwrap();
        assert_eq!(cache_node_set(&set(&[1], 1), 1, &single).unwrap(), vec![1]);
    }

    #[test]
    fn retrieve_set_examples() {
        let p = example();
        assert_eq!(
            user_retrieve_set(&set(&[1, 2], 4), 1, &p).unwrap(),
            vec![1, 2, 3, 4, 5, 6]
        );
        assert_eq!(
            user_retrieve_set(&set(&[1, 2], 4), 3, &p).unwrap(),
            vec![3, 4, 5, 6, 7, 8]
        );
        let q = LevelParams::new(2, 1, 2).unwrap();
        assert_eq!(user_retrieve_set(&set(&[1], 2), 1, &q).unwrap(), vec![1, 2]);
    }

    #[test]
    fn malformed_rows_are_rejected() {
        let p = example();
        let bad = Subset(vec![2, 1]);
        assert!(matches!(
            cache_node_set(&bad, 1, &p),
            Err(SchemeError::MalformedSubset { .. })
        ));
        assert!(cache_node_set(&Subset(vec![1, 5]), 1, &p).is_err());
        assert!(cache_node_set(&Subset(vec![1]), 1, &p).is_err());
        assert!(user_retrieve_set(&set(&[1, 2], 4), 9, &p).is_err());
        assert!(Subset::new(vec![0, 1], 4).is_err());
    }

    #[test]
    fn psi_examples() {
        let p = example();
        let t12 = set(&[1, 2], 4);
        assert_eq!(psi(&t12, 1, 7, &p).unwrap(), 3);
        assert_eq!(psi(&t12, 1, 8, &p).unwrap(), 4);
        assert_eq!(psi_inv(&t12, 1, 3, &p).unwrap(), 7);
        assert_eq!(psi_inv(&set(&[1, 3], 4), 1, 2, &p).unwrap(), 4);
        assert!(psi(&t12, 1, 2, &p).is_err());
        assert!(psi_inv(&t12, 1, 2, &p).is_err());
        assert!(psi_inv(&t12, 1, 5, &p).is_err());
    }

    #[test]
    fn psi_round_trips_everywhere() {
        for (kp, t, l) in [(4, 2, 3), (5, 2, 2), (6, 3, 2), (3, 1, 4), (7, 2, 1)] {
            let p = LevelParams::new(kp, t, l).unwrap();
            for tee in Subsets::new(kp, t) {
                let tee = Subset(tee);
                for g in 1..=p.k() {
                    let u = user_retrieve_set(&tee, g, &p).unwrap();
                    let mut image = Vec::new();
                    for k in (1..=p.k()).filter(|k| !u.contains(k)) {
                        let r = psi(&tee, g, k, &p).unwrap();
                        assert!(!tee.contains(r));
                        assert_eq!(psi_inv(&tee, g, r, &p).unwrap(), k);
                        image.push(r);
                    }
                    image.sort_unstable();
                    let rest: Vec<usize> = (1..=kp).filter(|r| !tee.contains(*r)).collect();
                    assert_eq!(image, rest);
                }
            }
        }
    }

    #[test]
    fn example_arrays_match_golden_entries() {
        let p = example();
        let s = Scheme::build(&p).unwrap();
        assert_eq!(s.delivery.height(), 48);
        let row = s.row_index(&set(&[1, 2], 4), 1);
        assert_eq!(row, 0);
        assert_eq!(s.node.star_columns(row), vec![3, 6]);
        assert_eq!(s.user.star_columns(row), vec![1, 2, 3, 4, 5, 6]);
        match s.delivery.get(row, 7) {
            Entry::Message(id) => {
                assert_eq!(id, MessageId(0));
                assert_eq!(s.delivery.label(id).to_string(), "({1,2,3},1)");
            }
            Entry::Star => panic!("expected a label"),
        }
        // The s = 1 block of the worked example.
        let r13 = s.row_index(&set(&[1, 3], 4), 1);
        let r23 = s.row_index(&set(&[2, 3], 4), 1);
        assert_eq!(s.delivery.get(r13, 4), Entry::Message(MessageId(0)));
        assert_eq!(s.delivery.get(r23, 1), Entry::Message(MessageId(0)));
        // Paper numbering: ({1,2,4},1), ({1,3,4},1), ({2,3,4},1) are 2, 3, 4.
        for (i, txt) in ["({1,2,4},1)", "({1,3,4},1)", "({2,3,4},1)", "({1,2,3},2)"]
            .iter()
            .enumerate()
        {
            assert_eq!(s.delivery.label(MessageId(i as u32 + 1)).to_string(), *txt);
        }
        let report = s.validate();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.pda.distinct_labels, 32);
    }

    #[test]
    fn classical_reduction_at_l1() {
        let p = LevelParams::new(2, 1, 1).unwrap();
        assert_eq!((p.k(), p.subpacketization(), p.message_count()), (2, 4, 2));
        let s = Scheme::build(&p).unwrap();
        assert!(s.validate().passed());
        // With L = 1 each user reads exactly its own cache: C equals U.
        assert_eq!(s.node, s.user);
    }

    #[test]
    fn degenerate_scheme_has_no_messages() {
        let p = LevelParams::new(2, 2, 2).unwrap();
        assert!(p.is_degenerate());
        let s = Scheme::build(&p).unwrap();
        assert_eq!(p.message_count(), 0);
        assert!((0..s.delivery.height()).all(|r| (1..=p.k()).all(|c| s.delivery.is_star(r, c))));
        assert!(s.validate().passed());
    }

    #[test]
    fn validate_five_two_two() {
        let p = LevelParams::new(5, 2, 2).unwrap();
        let s = Scheme::build(&p).unwrap();
        let report = validate_pda(&s.delivery, &p);
        assert!(report.passed());
        assert_eq!(p.k(), 7);
        assert_eq!(report.distinct_labels, 70);
        // Independent count straight from the array.
        let mut seen = std::collections::HashSet::new();
        for r in 0..s.delivery.height() {
            for c in 1..=p.k() {
                if let Entry::Message(id) = s.delivery.get(r, c) {
                    seen.insert(id);
                }
            }
        }
        assert_eq!(seen.len(), 7 * 10);
    }

    #[test]
    fn injected_duplicate_breaks_c2() {
        let p = example();
        let mut s = Scheme::build(&p).unwrap();
        // Row ({1,2},1) holds label 0 at column 7; put it on a star of a row
        // that already carries label 0, sharing no line with the others.
        let r13 = s.row_index(&set(&[1, 3], 4), 1);
        assert!(s.delivery.is_star(r13, 1));
        s.delivery.set(r13, 1, Entry::Message(MessageId(0)));
        let report = validate_pda(&s.delivery, &p);
        assert!(!report.passed());
        assert!(!report.c1_holds() || !report.c2_holds());
        // A star overwritten at a fresh row and column triggers C2 proper.
        let mut s = Scheme::build(&p).unwrap();
        let r14 = s.row_index(&set(&[1, 4], 4), 1);
        let star_col = (1..=8)
            .find(|&c| s.delivery.is_star(r14, c) && ![7, 4, 1].contains(&c))
            .unwrap();
        s.delivery.set(r14, star_col, Entry::Message(MessageId(0)));
        let report = validate_pda(&s.delivery, &p);
        assert!(!report.c2_holds());
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, PdaViolation::Occurrences { found: 4, .. })));
    }

    #[test]
    fn shift_structure_detects_perturbation() {
        let s = Scheme::build(&example()).unwrap();
        assert!(check_shift_structure(&s));
        let small = Scheme::build(&LevelParams::new(3, 1, 2).unwrap()).unwrap();
        assert!(check_shift_structure(&small));
        let mut broken = s.clone();
        let row = broken.row_index(&set(&[2, 4], 4), 5);
        let col = broken.node.star_columns(row)[0];
        broken.node.set(row, col, false);
        assert!(!check_shift_structure(&broken));
    }

    #[test]
    fn guard_rejects_large_subpacketization() {
        let p = LevelParams::new(30, 10, 3).unwrap();
        let err = Scheme::build(&p).unwrap_err();
        assert!(matches!(err, SchemeError::SubpacketizationLimit { .. }));
        assert!(err.is_resource_limit());
        let tight = Limits {
            max_subpacketization: 10,
            max_cells: u128::MAX,
        };
        assert!(Scheme::build_with(&example(), &tight).is_err());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let s = Scheme::build(&example()).unwrap();
        let text = s.to_text();
        assert!(text.starts_with("[C]\nK'=4 t=2 L=3 K=8 F=48 S=32\n. . * . . * . .\n"));
        let q_first = s.delivery.to_text().lines().nth(1).unwrap().to_string();
        assert_eq!(q_first, "* * * * * * ({1,2,3},1) ({1,2,4},1)");
        let back = Scheme::from_text(&text).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn text_parse_errors_carry_lines() {
        let s = Scheme::build(&LevelParams::new(3, 1, 2).unwrap()).unwrap();
        let text = s.delivery.to_text();
        let broken = text.replacen("*", "?", 1);
        match DeliveryArray::from_text(&broken) {
            Err(SchemeError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(DeliveryArray::from_text("K'=3 t=1 L=2 K=4 F=12 S=99\n").is_err());
        assert!(StarArray::from_text("").is_err());
    }
}
