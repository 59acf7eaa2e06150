//! Packet-level replay of one delivery round.
//!
//! Packets are symbolic `(file, row)` pairs and a coded message is the set of
//! packets XORed into it, so XOR is symmetric difference. Every retrieval is
//! logged with the level it was served from, and the total cost is summed in
//! exact rationals.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::cost::{CostError, SuperpositionDesign};
use crate::scalar::{Rational, Scalar};
use crate::scheme::{Entry, LevelParams, Limits, MessageId, Scheme, SchemeError};
use crate::system::{ConfigError, SystemConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("scheme and system disagree: {0}")]
    Mismatch(String),
    #[error("invalid demand: {0}")]
    Demand(String),
    #[error("user {user} cannot decode row {row}: {reason}")]
    Decode {
        user: usize,
        row: usize,
        reason: String,
    },
    #[error("user {user} is missing {missing} packets of its file")]
    Incomplete { user: usize, missing: usize },
    #[error("caching ratio {gamma} of level {level} is not a multiple of 1/K")]
    OffGrid { level: usize, gamma: String },
}

impl SimError {
    pub fn is_resource_limit(&self) -> bool {
        matches!(self, SimError::Scheme(e) if e.is_resource_limit())
    }
}

/// Requested file of each user, 1-indexed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandVector(Vec<usize>);

impl DemandVector {
    pub fn new(files: Vec<usize>, n_files: usize) -> Result<Self, SimError> {
        if let Some((k, &d)) = files.iter().enumerate().find(|(_, &d)| d == 0 || d > n_files) {
            return Err(SimError::Demand(format!(
                "user {} requests file {d} outside [1, {n_files}]",
                k + 1
            )));
        }
        Ok(Self(files))
    }

    /// `d_k = cyc(k, N)`: all demands distinct whenever `N ≥ K`.
    pub fn worst_case(k: usize, n_files: usize) -> Self {
        Self((0..k).map(|i| i % n_files + 1).collect())
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

    /// File requested by `user ∈ [1, K]`.
    pub fn file_of(&self, user: usize) -> usize {
        self.0[user - 1]
    }

    pub fn distinct_files(&self) -> usize {
        self.0.iter().collect::<BTreeSet<_>>().len()
    }
}

/// Packet `row` (0-based canonical row index) of file `file`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PacketId {
    pub file: usize,
    pub row: usize,
}

impl fmt::Display for PacketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "W{}[{}]", self.file, self.row)
    }
}

/// XOR of distinct packets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PacketSet(BTreeSet<PacketId>);

impl PacketSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn toggle(&mut self, p: PacketId) {
        if !self.0.remove(&p) {
            self.0.insert(p);
        }
    }

    pub fn xor(&mut self, other: &PacketSet) {
        for &p in &other.0 {
            self.toggle(p);
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, p: &PacketId) -> bool {
        self.0.contains(p)
    }

    pub fn iter(&self) -> impl Iterator<Item = &PacketId> {
        self.0.iter()
    }

    /// The only packet, if there is exactly one.
    pub fn single(&self) -> Option<PacketId> {
        match self.0.len() {
            1 => self.0.first().copied(),
            _ => None,
        }
    }
}

impl FromIterator<PacketId> for PacketSet {
    fn from_iter<I: IntoIterator<Item = PacketId>>(iter: I) -> Self {
        let mut s = PacketSet::new();
        for p in iter {
            s.toggle(p);
        }
        s
    }
}

/// Builds every broadcast message: message `id` is the XOR of
/// `W_{d_k, row}` over its occurrences `(row, k)` in `Q`.
pub fn broadcast_messages(
    scheme: &Scheme,
    demand: &DemandVector,
) -> Result<BTreeMap<MessageId, PacketSet>, SimError> {
    check_demand(scheme.params.k(), demand)?;
    let mut out: BTreeMap<MessageId, PacketSet> = BTreeMap::new();
    for (id, positions) in scheme.delivery.occurrences().into_iter().enumerate() {
        if positions.is_empty() {
            continue;
        }
        let set = positions
            .iter()
            .map(|&(row, col)| PacketId {
                file: demand.file_of(col),
                row,
            })
            .collect();
        out.insert(MessageId(id as u32), set);
    }
    Ok(out)
}

fn check_demand(k: usize, demand: &DemandVector) -> Result<(), SimError> {
    if demand.len() != k {
        return Err(SimError::Demand(format!(
            "expected {k} demands, found {}",
            demand.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FetchKind {
    Direct,
    Decode,
}

/// One retrieval from a connected cache node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fetch {
    pub user: usize,
    pub node: usize,
    /// Position of `node` among the user's connected nodes.
    pub level: usize,
    pub kind: FetchKind,
    /// Row being recovered.
    pub row: usize,
    /// Message being decoded, for decode fetches.
    pub message: Option<MessageId>,
    /// Packets XORed into the retrieved file.
    pub packets: PacketSet,
}

impl Fetch {
    /// `FETCH user=.. node=.. level=.. kind=.. label=..`; the label is the row
    /// for direct fetches and the message for decode fetches.
    pub fn trace_line(&self, scheme: &Scheme) -> String {
        let (kind, label) = match (self.kind, self.message) {
            (FetchKind::Decode, Some(id)) => ("decode", scheme.delivery.label(id).to_string()),
            _ => ("direct", scheme.node.rows()[self.row].to_string()),
        };
        format!(
            "FETCH user={} node={} level={} kind={kind} label={label}",
            self.user, self.node, self.level
        )
    }
}

/// Calls `visit(row, level, node)` for every row where `U` has a star for
/// `user`, with the unique connected node caching that row.
fn for_each_direct(
    scheme: &Scheme,
    user: usize,
    mut visit: impl FnMut(usize, usize, usize),
) -> Result<(), SimError> {
    let p = &scheme.params;
    let connected: Vec<(usize, usize)> = (1..=p.level())
        .map(|l| (l, p.connected_node(user, l)))
        .collect();
    for row in 0..scheme.user.height() {
        if !scheme.user.is_star(row, user) {
            continue;
        }
        let mut holders = connected
            .iter()
            .copied()
            .filter(|&(_, node)| scheme.node.is_star(row, node));
        let (level, node) = holders.next().ok_or_else(|| SimError::Decode {
            user,
            row,
            reason: "no connected node caches this packet".into(),
        })?;
        if holders.next().is_some() {
            return Err(SimError::Decode {
                user,
                row,
                reason: "packet cached at two connected nodes".into(),
            });
        }
        visit(row, level, node);
    }
    Ok(())
}

/// Direct retrievals of `user`: every packet of its file in a row where `U`
/// has a star, each from the unique connected node caching it.
pub fn direct_retrievals(
    scheme: &Scheme,
    demand: &DemandVector,
    user: usize,
) -> Result<Vec<Fetch>, SimError> {
    let mut out = Vec::new();
    for_each_direct(scheme, user, |row, level, node| {
        let packet = PacketId {
            file: demand.file_of(user),
            row,
        };
        out.push(Fetch {
            user,
            node,
            level,
            kind: FetchKind::Direct,
            row,
            message: None,
            packets: std::iter::once(packet).collect(),
        });
    })?;
    Ok(out)
}

/// What one user recovers from the broadcast.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutcome {
    pub recovered: Vec<PacketId>,
    pub fetches: Vec<Fetch>,
}

fn added_element(plus: &[usize], tee: &[usize]) -> usize {
    plus.iter()
        .copied()
        .find(|x| tee.binary_search(x).is_err())
        .expect("label extends the row subset")
}

/// Decodes every message addressed to `user`.
///
/// For message `(𝒯⁺, g)` at `(row, user)` with added element `r`, the side
/// packets from occurrences with a larger added element are XORed into one
/// file read from the user's last node; those with a smaller one come from its
/// first node.
pub fn decode_user(
    scheme: &Scheme,
    demand: &DemandVector,
    messages: &BTreeMap<MessageId, PacketSet>,
    occurrences: &[Vec<(usize, usize)>],
    user: usize,
) -> Result<DecodeOutcome, SimError> {
    let p = &scheme.params;
    let rows = scheme.delivery.rows();
    let last = p.level();
    let far = p.connected_node(user, last);
    let mut out = DecodeOutcome {
        recovered: Vec::new(),
        fetches: Vec::new(),
    };
    for row in 0..scheme.delivery.height() {
        let Entry::Message(id) = scheme.delivery.get(row, user) else {
            continue;
        };
        let fail = |reason: String| SimError::Decode { user, row, reason };
        let label = scheme.delivery.label(id);
        let plus = label.tee_plus.as_slice();
        let own = added_element(plus, rows[row].tee.as_slice());
        let mut low = PacketSet::new();
        let mut high = PacketSet::new();
        for &(other_row, other_user) in &occurrences[id.0 as usize] {
            if other_row == row {
                continue;
            }
            let r = added_element(plus, rows[other_row].tee.as_slice());
            let (side, node) = if r > own { (&mut high, far) } else { (&mut low, user) };
            if !scheme.node.is_star(other_row, node) {
                return Err(fail(format!(
                    "side packet of row {other_row} not cached at node {node}"
                )));
            }
            side.toggle(PacketId {
                file: demand.file_of(other_user),
                row: other_row,
            });
        }
        let mut residual = messages
            .get(&id)
            .cloned()
            .ok_or_else(|| fail(format!("message {label} was not broadcast")))?;
        residual.xor(&low);
        residual.xor(&high);
        let wanted = PacketId {
            file: demand.file_of(user),
            row,
        };
        if residual.single() != Some(wanted) {
            return Err(fail(format!("residual of {label} is not the demanded packet")));
        }
        out.recovered.push(wanted);
        for (set, node, level) in [(low, user, 1), (high, far, last)] {
            if !set.is_empty() {
                out.fetches.push(Fetch {
                    user,
                    node,
                    level,
                    kind: FetchKind::Decode,
                    row,
                    message: Some(id),
                    packets: set,
                });
            }
        }
    }
    Ok(out)
}

/// Counts and exact cost of one delivery round.
#[derive(Debug, Clone, PartialEq)]
pub struct CostBreakdown {
    pub subpacketization: u128,
    pub broadcast_packets: u128,
    /// `Δ_l`: packet-sized retrievals from each connected-node position.
    pub access_packets_per_level: Vec<u128>,
    pub direct_packets_per_level: Vec<u128>,
    pub decode_packets_per_level: Vec<u128>,
    /// `ρ·S/F`.
    pub broadcast_cost: Rational,
    /// Direct retrievals, per file.
    pub direct_cost: Rational,
    /// Decoding retrievals, per file.
    pub decode_cost: Rational,
    pub total_cost: Rational,
}

/// Everything observed while replaying a round.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub cost: CostBreakdown,
    /// Levels used by decode fetches.
    pub decode_levels: BTreeSet<usize>,
    /// Trace lines in user-major, row-minor order, if requested.
    pub trace: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    pub limits: Limits,
    pub trace: bool,
}

struct UserTally {
    direct: Vec<u128>,
    decode: Vec<u128>,
    decode_levels: BTreeSet<usize>,
    trace: Vec<String>,
}

/// Replays the round for `cfg` with the scheme `p`, which must match `K`,
/// `L` and `M/N = t/K`.
pub fn simulate(
    p: &LevelParams,
    cfg: &SystemConfig<Rational>,
    demand: &DemandVector,
) -> Result<CostBreakdown, SimError> {
    simulate_with(p, cfg, demand, &SimOptions::default()).map(|r| r.cost)
}

pub fn simulate_with(
    p: &LevelParams,
    cfg: &SystemConfig<Rational>,
    demand: &DemandVector,
    options: &SimOptions,
) -> Result<SimulationReport, SimError> {
    cfg.validate()?;
    if cfg.k != p.k() || cfg.level != p.level() {
        return Err(SimError::Mismatch(format!(
            "system has K={} L={}, scheme has K={} L={}",
            cfg.k,
            cfg.level,
            p.k(),
            p.level()
        )));
    }
    if cfg.memory_ratio() != p.gamma::<Rational>() {
        return Err(SimError::Mismatch(format!(
            "M/N = {} but the scheme caches t/K = {}/{}",
            cfg.memory_ratio(),
            p.t(),
            p.k()
        )));
    }
    check_demand(p.k(), demand)?;
    let _ = DemandVector::new(demand.as_slice().to_vec(), cfg.n_files)?;
    let mut warnings = Vec::new();
    if demand.distinct_files() < p.k() {
        warnings.push(format!(
            "only {} distinct demands among K={} users; the round is not worst case",
            demand.distinct_files(),
            p.k()
        ));
    }

    let scheme = Scheme::build_with(p, &options.limits)?;
    let messages = broadcast_messages(&scheme, demand)?;
    if messages.len() as u128 != p.message_count() {
        return Err(SimError::Mismatch(format!(
            "{} messages broadcast, expected {}",
            messages.len(),
            p.message_count()
        )));
    }
    let occurrences = scheme.delivery.occurrences();
    let f = p.subpacketization() as usize;

    let level = p.level();
    // Each user is reduced to counts right away so fetch lists never pile up.
    let per_user: Vec<UserTally> = (1..=p.k())
        .into_par_iter()
        .map(|user| {
            let mut tally = UserTally {
                direct: vec![0; level],
                decode: vec![0; level],
                decode_levels: BTreeSet::new(),
                trace: Vec::new(),
            };
            let mut covered = vec![false; f];
            let direct = if options.trace {
                direct_retrievals(&scheme, demand, user)?
            } else {
                Vec::new()
            };
            if options.trace {
                for x in &direct {
                    covered[x.row] = true;
                    tally.direct[x.level - 1] += 1;
                }
            } else {
                for_each_direct(&scheme, user, |row, l, _| {
                    covered[row] = true;
                    tally.direct[l - 1] += 1;
                })?;
            }
            let decoded = decode_user(&scheme, demand, &messages, &occurrences, user)?;
            for x in &decoded.recovered {
                covered[x.row] = true;
            }
            let missing = covered.iter().filter(|c| !**c).count();
            if missing > 0 {
                return Err(SimError::Incomplete { user, missing });
            }
            for x in &decoded.fetches {
                tally.decode[x.level - 1] += 1;
                tally.decode_levels.insert(x.level);
            }
            if options.trace {
                let mut all: Vec<&Fetch> = direct.iter().chain(&decoded.fetches).collect();
                all.sort_by_key(|x| (x.row, x.level));
                tally.trace = all.into_iter().map(|x| x.trace_line(&scheme)).collect();
            }
            Ok(tally)
        })
        .collect::<Result<_, SimError>>()?;

    let mut direct_counts = vec![0u128; level];
    let mut decode_counts = vec![0u128; level];
    let mut decode_levels = BTreeSet::new();
    let mut trace = Vec::new();
    for tally in per_user {
        for l in 0..level {
            direct_counts[l] += tally.direct[l];
            decode_counts[l] += tally.decode[l];
        }
        decode_levels.extend(tally.decode_levels);
        trace.extend(tally.trace);
    }
    if decode_levels.iter().any(|&l| l != 1 && l != level) {
        return Err(SimError::Mismatch(format!(
            "decode fetches used levels {decode_levels:?}"
        )));
    }

    let weighted = |counts: &[u128]| {
        counts
            .iter()
            .enumerate()
            .fold(Rational::from_int(0), |acc, (i, &c)| {
                acc + cfg.mu[i].clone() * Rational::from_count(c as usize)
            })
    };
    let ff = Rational::from_count(f);
    let s = p.message_count();
    let broadcast_cost = cfg.rho.clone() * Rational::from_count(s as usize) / ff.clone();
    let direct_cost = weighted(&direct_counts) / ff.clone();
    let decode_cost = weighted(&decode_counts) / ff;
    let total_cost = broadcast_cost.clone() + direct_cost.clone() + decode_cost.clone();
    let access = direct_counts
        .iter()
        .zip(&decode_counts)
        .map(|(a, b)| a + b)
        .collect();
    Ok(SimulationReport {
        cost: CostBreakdown {
            subpacketization: p.subpacketization(),
            broadcast_packets: s,
            access_packets_per_level: access,
            direct_packets_per_level: direct_counts,
            decode_packets_per_level: decode_counts,
            broadcast_cost,
            direct_cost,
            decode_cost,
            total_cost,
        },
        decode_levels,
        trace,
        warnings,
    })
}

/// Scheme parameters of level `l` at caching ratio `γ`, if `Kγ` is an integer.
pub fn level_params_for(k: usize, l: usize, gamma: &Rational) -> Result<LevelParams, SimError> {
    let t = gamma.clone() * Rational::from_count(k);
    if !t.is_integer() || t <= Rational::from_int(0) {
        return Err(SimError::OffGrid {
            level: l,
            gamma: crate::scalar::format_rational(gamma),
        });
    }
    let t = t.to_integer().try_into().map_err(|_| SimError::OffGrid {
        level: l,
        gamma: crate::scalar::format_rational(gamma),
    })?;
    Ok(LevelParams::for_users(k, t, l)?)
}

/// Result of replaying a superposition design level by level.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpositionReport {
    /// `(level, α, breakdown)` per active level.
    pub levels: Vec<(usize, Rational, CostBreakdown)>,
    /// `Σ α_l · total_l`.
    pub total_cost: Rational,
}

/// Splits every file by the weights `α` and replays each active level as a
/// separate system with `M_l = γ_l N` and costs `μ_1..μ_l`.
pub fn simulate_superposition(
    design: &SuperpositionDesign<Rational>,
    cfg: &SystemConfig<Rational>,
    demand: &DemandVector,
    options: &SimOptions,
) -> Result<SuperpositionReport, SimError> {
    let objective = crate::cost::superposition_objective(&design.supports, cfg)?;
    debug_assert_eq!(objective, design.objective);
    let mut levels = Vec::new();
    let mut total = Rational::from_int(0);
    for s in design.active() {
        let p = level_params_for(cfg.k, s.level, &s.gamma)?;
        let sub = cfg
            .truncated(s.level)?
            .with_memory(s.gamma.clone() * Rational::from_count(cfg.n_files))?;
        let report = simulate_with(&p, &sub, demand, options)?;
        total = total + s.alpha.clone() * report.cost.total_cost.clone();
        levels.push((s.level, s.alpha.clone(), report.cost));
    }
    Ok(SuperpositionReport {
        levels,
        total_cost: total,
    })
}
