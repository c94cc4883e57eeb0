//! Config format and the studies run by the command-line driver.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{sample_fading, FadingState, Geometry, Link, NoiseLevels, PowerBudget, SubchannelParams};
use crate::dm::{
    self, degraded_capacity_grid, eval_inner, eval_outer, random_aux_law, random_subchannel, AuxCards, DmChannel,
    DmDistribution, DmGrid,
};
use crate::error::{Error, Result};
use crate::modes::{resolve_modes, subchannel_contributions, ModeRule};
use crate::optimizer::{
    fading_params, grid_oracle, optimize_deaf_relay, optimize_upper, GridOptions, Objective, OptimizerConfig,
    Problem,
};
use crate::rates::{self, Bandwidth, Mode, ModePartition, RateBounds};
use crate::channel::partition_seed;

/// Default number of fading states per experiment point.
pub const DEFAULT_STATES: usize = 64;

/// A single JSON document describing one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_geometry")]
    pub geometry: Geometry,
    #[serde(default)]
    pub noise: NoiseLevels,
    pub budgets: Budgets,
    /// Explicit Gaussian subchannels; mutually exclusive with `fading`.
    #[serde(default)]
    pub subchannels: Option<Vec<SubchannelConfig>>,
    #[serde(default)]
    pub fading: Option<FadingConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_mode_rule")]
    pub mode_rule: String,
    #[serde(default)]
    pub seed: u64,
    /// 1 for real subchannels, 2 for complex ones. Explicit subchannels only.
    #[serde(default = "default_bandwidth")]
    pub bandwidth: u32,
}

fn default_geometry() -> Geometry {
    Geometry::line_with_relay_at(0.5, 2.0)
}

fn default_mode_rule() -> String {
    "threshold".into()
}

fn default_bandwidth() -> u32 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    pub p1: f64,
    pub p2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubchannelConfig {
    pub sigma_sq: f64,
    /// A number or the string `"inf"`.
    #[serde(deserialize_with = "number_or_inf", serialize_with = "serialize_number_or_inf")]
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub rho1: f64,
    pub rho2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FadingConfig {
    #[serde(default = "default_states")]
    pub states: usize,
}

fn default_states() -> usize {
    DEFAULT_STATES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Relay positions `(d, 0)`.
    pub d: Vec<f64>,
}

fn number_or_inf<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(x) => Ok(x),
        Raw::Text(s) if matches!(s.to_ascii_lowercase().as_str(), "inf" | "infinity" | "+inf") => Ok(f64::INFINITY),
        Raw::Text(s) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got \"{s}\""))),
    }
}

fn serialize_number_or_inf<S: serde::Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*x)
    }
}

impl ExperimentConfig {
    /// Parses and validates a config document.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::parse(format!("line {}, column {}", e.line(), e.column()), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, e: Error| Error::parse(format!("field `{name}`"), e.to_string());
        PowerBudget::new(self.budgets.p1, self.budgets.p2).map_err(|e| field("budgets", e))?;
        NoiseLevels::validate_levels(&self.noise).map_err(|e| field("noise", e))?;
        self.optimizer.validate().map_err(|e| field("optimizer", e))?;
        self.mode_rule().map_err(|e| field("mode_rule", e))?;
        Bandwidth::from_factor(self.bandwidth).map_err(|e| field("bandwidth", e))?;
        if self.subchannels.is_some() && self.fading.is_some() {
            return Err(Error::parse("field `subchannels`", "`subchannels` and `fading` are mutually exclusive"));
        }
        if let Some(subs) = &self.subchannels {
            if subs.is_empty() {
                return Err(Error::parse("field `subchannels`", "list is empty"));
            }
            for (i, s) in subs.iter().enumerate() {
                s.params().map_err(|e| field(&format!("subchannels[{i}]"), e))?;
            }
        }
        if let Some(f) = &self.fading {
            if f.states == 0 {
                return Err(Error::parse("field `fading.states`", "must be >= 1"));
            }
        }
        if let Some(s) = &self.sweep {
            if s.d.is_empty() {
                return Err(Error::parse("field `sweep.d`", "list is empty"));
            }
            if let Some(d) = s.d.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
                return Err(Error::parse("field `sweep.d`", format!("relay position must be > 0, got {d}")));
            }
        }
        Ok(())
    }

    pub fn mode_rule(&self) -> Result<ModeRule> {
        self.mode_rule.parse()
    }

    pub fn budget(&self) -> PowerBudget {
        PowerBudget {
            p1_total: self.budgets.p1,
            p2_total: self.budgets.p2,
        }
    }

    fn states(&self) -> usize {
        self.fading.map_or(DEFAULT_STATES, |f| f.states)
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex(&Sha256::digest(canonical.as_bytes()))
    }
}

impl NoiseLevels {
    fn validate_levels(&self) -> Result<()> {
        for (name, v) in [
            ("relay", self.relay),
            ("destination", self.destination),
            ("eavesdropper", self.eavesdropper),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("{name} noise variance must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }
}

impl SubchannelConfig {
    pub fn params(&self) -> Result<SubchannelParams> {
        SubchannelParams::new(self.sigma_sq, self.sigma1_sq, self.sigma2_sq, self.rho1, self.rho2)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Reproducibility record written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub mode_rule: String,
    pub restarts: usize,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, cfg: &ExperimentConfig, outputs: Vec<String>) -> Self {
        Manifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_sha256: cfg.hash(),
            seed: cfg.seed,
            mode_rule: cfg.mode_rule.clone(),
            restarts: cfg.optimizer.restarts,
            outputs,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}

/// Optimizer settings with the run seed applied.
fn optimizer_for(cfg: &ExperimentConfig) -> OptimizerConfig {
    OptimizerConfig {
        seed: cfg.seed,
        ..cfg.optimizer.clone()
    }
}

/// Output of the `bounds` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsRecord {
    #[serde(flatten)]
    pub bounds: RateBounds,
    /// Whether the rates are ergodic means over sampled fading states.
    pub ergodic: bool,
    /// Present when no subchannel's relay hears the source.
    pub deaf_relay: Option<DeafRelayRecord>,
    /// Grid-oracle cross-check for one or two subchannels.
    pub grid: Option<GridRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeafRelayRecord {
    pub capacity: f64,
    pub all_nf_lower: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub grid_points: usize,
    pub lower: f64,
    pub upper: f64,
    pub resolution: f64,
}

/// Optimizes both bounds for the config's subchannels, or for fading states
/// sampled at its geometry.
pub fn cmd_bounds(cfg: &ExperimentConfig, grid_points: Option<usize>) -> Result<BoundsRecord> {
    let opt = optimizer_for(cfg);
    let rule = cfg.mode_rule()?;
    match &cfg.subchannels {
        Some(list) => {
            let subs = list.iter().map(|s| s.params()).collect::<Result<Vec<_>>>()?;
            let bw = Bandwidth::from_factor(cfg.bandwidth)?;
            let problem = Problem::new(&subs, cfg.budget()).with_bandwidth(bw);
            let (modes, lower) = resolve_modes(&rule, &problem, None, &opt)?;
            let upper = optimize_upper(&problem, &opt)?;
            let eval = rates::lower_bound(&subs, &lower.allocation, &modes, bw)?;
            let (_, per_upper) = rates::upper_bound(&subs, &upper.allocation, bw)?;
            let deaf_relay = if subs.iter().all(|s| s.is_deaf_relay()) {
                let d = optimize_deaf_relay(&problem, &opt)?;
                Some(DeafRelayRecord {
                    capacity: d.capacity,
                    all_nf_lower: d.all_nf_lower.rate,
                })
            } else {
                None
            };
            let grid = match grid_points {
                Some(n) if subs.len() <= 2 => {
                    let g_lo = grid_oracle(&problem, &Objective::Lower(modes.clone()), &GridOptions::new(n))?;
                    let g_up = grid_oracle(&problem, &Objective::Upper, &GridOptions::new(n))?;
                    Some(GridRecord {
                        grid_points: n,
                        lower: g_lo.rate,
                        upper: g_up.rate,
                        resolution: g_lo.resolution.max(g_up.resolution),
                    })
                }
                _ => None,
            };
            Ok(BoundsRecord {
                bounds: RateBounds {
                    lower: lower.rate,
                    upper: upper.rate,
                    per_subchannel_lower: eval.per_subchannel,
                    per_subchannel_upper: per_upper,
                    modes,
                    allocation: lower.allocation,
                    upper_allocation: upper.allocation,
                },
                ergodic: false,
                deaf_relay,
                grid,
            })
        }
        None => {
            let states = sample_fading(&cfg.geometry, cfg.seed, cfg.states())?;
            let point = fading_point(cfg, &states, &rule, &opt)?;
            Ok(BoundsRecord {
                bounds: point.bounds,
                ergodic: true,
                deaf_relay: None,
                grid: None,
            })
        }
    }
}

struct FadingPoint {
    bounds: RateBounds,
}

/// Ergodic bounds for one set of fading states. Per-subchannel values are
/// per-state rates; `lower`/`upper` are their means.
fn fading_point(
    cfg: &ExperimentConfig,
    states: &[FadingState],
    rule: &ModeRule,
    opt: &OptimizerConfig,
) -> Result<FadingPoint> {
    let params = fading_params(states, &cfg.noise)?;
    let n = states.len() as f64;
    let budget = cfg.budget();
    let problem = Problem::new(&params, budget.scaled(n)).with_bandwidth(Bandwidth::Complex);
    let (modes, lower) = resolve_modes(rule, &problem, Some(states), opt)?;
    let upper = optimize_upper(&problem, opt)?;
    let lower_mean = rates::ergodic_lower(states, &lower.allocation, &modes, &cfg.noise, &budget)?;
    let upper_mean = rates::ergodic_upper(states, &upper.allocation, &cfg.noise, &budget)?;
    let eval = rates::lower_bound(&params, &lower.allocation, &modes, Bandwidth::Complex)?;
    let (_, per_upper) = rates::upper_bound(&params, &upper.allocation, Bandwidth::Complex)?;
    Ok(FadingPoint {
        bounds: RateBounds {
            lower: lower_mean,
            upper: upper_mean,
            per_subchannel_lower: eval.per_subchannel,
            per_subchannel_upper: per_upper,
            modes,
            allocation: lower.allocation,
            upper_allocation: upper.allocation,
        },
    })
}

/// One row of the relay-position sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub d: f64,
    pub lower: f64,
    pub upper: f64,
    pub n_df: usize,
    pub n_nf: usize,
}

pub const SWEEP_HEADER: &str = "d,lower,upper,n_df,n_nf";

/// Ergodic bounds with the relay at `(d, 0)` for every `d` of the sweep.
/// The same seed is used at every position.
pub fn cmd_sweep_relay(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::parse("field `sweep`", "sweep-relay needs a `sweep.d` list"))?;
    let rule = cfg.mode_rule()?;
    let opt = optimizer_for(cfg);
    sweep
        .d
        .par_iter()
        .map(|&d| {
            let geometry = Geometry {
                relay: [d, 0.0],
                ..cfg.geometry
            };
            let states = sample_fading(&geometry, cfg.seed, cfg.states())?;
            let p = fading_point(cfg, &states, &rule, &opt)?;
            Ok(SweepRow {
                d,
                lower: p.bounds.lower,
                upper: p.bounds.upper,
                n_df: p.bounds.modes.count(Mode::DecodeForward),
                n_nf: p.bounds.modes.count(Mode::NoiseForward),
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", num(r.d), num(r.lower), num(r.upper), r.n_df, r.n_nf);
    }
    out
}

/// One row of the per-subchannel map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapRow {
    pub subchannel: usize,
    pub mode: Mode,
    pub p1: f64,
    pub p2: f64,
    pub rate: f64,
    pub g_rd: f64,
    pub g_re: f64,
}

pub const MAP_HEADER: &str = "subchannel,mode,p1,p2,rate,g_rd,g_re";

/// Optimized per-state powers, modes and rates at the config's geometry.
/// `rate` is the state's own `min([a]+, [b]+)` under its mode, in bits per
/// channel use of that state.
pub fn cmd_subchannel_map(cfg: &ExperimentConfig) -> Result<Vec<MapRow>> {
    let rule = cfg.mode_rule()?;
    let opt = optimizer_for(cfg);
    let states = sample_fading(&cfg.geometry, cfg.seed, cfg.states())?;
    let p = fading_point(cfg, &states, &rule, &opt)?;
    let b = &p.bounds;
    let params = fading_params(&states, &cfg.noise)?;
    let rates = subchannel_contributions(&params, &b.allocation, &b.modes, Bandwidth::Complex);
    Ok(states
        .iter()
        .enumerate()
        .map(|(l, h)| MapRow {
            subchannel: l,
            mode: b.modes.0[l],
            p1: b.allocation.p1[l],
            p2: b.allocation.p2[l],
            rate: rates[l],
            g_rd: h.power(Link::RelayDest),
            g_re: h.power(Link::RelayEve),
        })
        .collect())
}

pub fn map_csv(rows: &[MapRow]) -> String {
    let mut out = String::from(MAP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.subchannel,
            r.mode.label(),
            num(r.p1),
            num(r.p2),
            num(r.rate),
            num(r.g_rd),
            num(r.g_re)
        );
    }
    out
}

/// Fixed ten-decimal formatting with `.` as separator.
pub fn num(x: f64) -> String {
    let s = format!("{x:.10}");
    if s == "-0.0000000000" {
        "0.0000000000".into()
    } else {
        s
    }
}

/// Outcome of one property in the DM check suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckLine {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub lines: Vec<CheckLine>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.passed)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for l in &self.lines {
            let _ = writeln!(out, "{} {}: {}", if l.passed { "PASS" } else { "FAIL" }, l.name, l.detail);
        }
        out
    }
}

/// Source of channels for the DM check.
#[derive(Debug, Clone, PartialEq)]
pub enum DmSource {
    /// A text fixture; degraded fixtures additionally get the capacity check.
    Fixture(DmChannel),
    /// `count` random binary single-subchannel channels.
    Random { count: usize },
}

const DM_TOL: f64 = 1e-12;

/// Runs the DM-oracle property suite.
pub fn cmd_dm_check(source: &DmSource, seed: u64, grid: &DmGrid) -> Result<CheckReport> {
    let mut lines = Vec::new();
    match source {
        DmSource::Random { count } => {
            if *count == 0 {
                return Err(Error::domain("--random needs at least one channel"));
            }
            let results: Vec<(f64, usize)> = (0..*count)
                .into_par_iter()
                .map(|i| {
                    let ch = DmChannel::new(vec![random_subchannel(
                        dm::Alphabets::BINARY,
                        partition_seed(seed, 2 * i as u64),
                    )?])?;
                    let law = random_aux_law(AuxCards::default(), 2, 2, partition_seed(seed, 2 * i as u64 + 1))?;
                    let dist = DmDistribution::new(vec![law]);
                    termwise_violation(&ch, &dist).map(|v| (v, i))
                })
                .collect::<Result<Vec<_>>>()?;
            let worst = results.iter().cloned().fold((f64::NEG_INFINITY, 0), |a, b| if b.0 > a.0 { b } else { a });
            lines.push(CheckLine {
                name: "inner DF terms <= outer terms".into(),
                passed: worst.0 <= DM_TOL,
                detail: format!("{count} random binary channels, worst excess {:.3e} (channel {})", worst.0, worst.1),
            });
            lines.push(mi_bounds_line(seed, *count)?);
        }
        DmSource::Fixture(ch) => {
            let mut worst: f64 = f64::NEG_INFINITY;
            let trials = 50;
            for i in 0..trials {
                let laws = ch
                    .subchannels
                    .iter()
                    .enumerate()
                    .map(|(l, s)| {
                        let a = s.alphabets();
                        random_aux_law(AuxCards::default(), a.x1, a.x2, partition_seed(seed, (i * 64 + l) as u64))
                    })
                    .collect::<Result<Vec<_>>>()?;
                worst = worst.max(termwise_violation(ch, &DmDistribution::new(laws))?);
            }
            lines.push(CheckLine {
                name: "inner DF terms <= outer terms".into(),
                passed: worst <= DM_TOL,
                detail: format!("{trials} random laws, worst excess {worst:.3e}"),
            });
            if ch.is_degraded() {
                let grid = DmGrid { seed, ..grid.clone() };
                let est = degraded_capacity_grid(ch, &grid)?;
                let ok = est.inner_best <= est.capacity + DM_TOL && est.capacity <= est.outer_best + DM_TOL;
                lines.push(CheckLine {
                    name: "capacity sandwich".into(),
                    passed: ok,
                    detail: format!(
                        "inner {:.6} <= capacity {:.6} <= outer {:.6} (resolution {}, {} laws per subchannel)",
                        est.inner_best, est.capacity, est.outer_best, est.resolution, est.candidates
                    ),
                });
            } else {
                lines.push(CheckLine {
                    name: "capacity sandwich".into(),
                    passed: true,
                    detail: "skipped: channel is not degraded".into(),
                });
            }
        }
    }
    Ok(CheckReport { lines })
}

/// Largest amount by which an all-DF inner term exceeds its outer
/// counterpart.
pub fn termwise_violation(ch: &DmChannel, dist: &DmDistribution) -> Result<f64> {
    let df = ModePartition::uniform(ch.len(), Mode::DecodeForward);
    let inner = eval_inner(ch, dist, &df)?;
    let outer = eval_outer(ch, dist)?;
    let pairs = [
        (inner.df_rate_sums[0], outer.rate_sums[0]),
        (inner.df_rate_sums[1], outer.rate_sums[1]),
        (inner.df_equivocation_sums[0], outer.equivocation_sums[0]),
        (inner.df_equivocation_sums[1], outer.equivocation_sums[1]),
    ];
    Ok(pairs.iter().map(|(i, o)| i - o).fold(f64::NEG_INFINITY, f64::max))
}

fn mi_bounds_line(seed: u64, count: usize) -> Result<CheckLine> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = f64::NEG_INFINITY;
    for _ in 0..count {
        let (ra, rb) = (rng.random_range(1..=4usize), rng.random_range(1..=4usize));
        let mut t: Vec<Vec<f64>> = (0..ra).map(|_| (0..rb).map(|_| rng.random::<f64>()).collect()).collect();
        let s: f64 = t.iter().flatten().sum();
        t.iter_mut().flatten().for_each(|p| *p /= s);
        let mi = dm::mutual_information(&t)?;
        let ha = dm::entropy(&t.iter().map(|r| r.iter().sum()).collect::<Vec<f64>>());
        let hb = dm::entropy(&(0..rb).map(|j| t.iter().map(|r| r[j]).sum()).collect::<Vec<f64>>());
        worst = worst.max(-mi).max(mi - ha.min(hb));
    }
    Ok(CheckLine {
        name: "0 <= I(A;B) <= min(H(A), H(B))".into(),
        passed: worst <= DM_TOL,
        detail: format!("{count} random tables, worst excess {worst:.3e}"),
    })
}
