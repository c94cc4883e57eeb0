//! Choice of the DF/NF partition of the subchannels.

use std::fmt;
use std::str::FromStr;

use crate::channel::{FadingState, Link, SubchannelParams};
use crate::error::{Error, Result};
use crate::optimizer::{optimize_from, optimize_lower, Objective, OptimizerConfig, Problem, Solution};
use crate::rates::{df_terms, nf_terms, Allocation, Bandwidth, Mode, ModePartition};

/// Largest `L` accepted by [`exhaustive_modes`].
pub const EXHAUSTIVE_MAX: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModeRule {
    /// DF where the relay hears the source better than the destination does.
    Threshold,
    /// Threshold start, then per-subchannel switching while the optimized
    /// bound improves.
    Best,
    Fixed(ModePartition),
    /// All `2^L` partitions; `L <= 12` only.
    Exhaustive,
}

impl FromStr for ModeRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "threshold" => return Ok(ModeRule::Threshold),
            "best" => return Ok(ModeRule::Best),
            "exhaustive" => return Ok(ModeRule::Exhaustive),
            _ => {}
        }
        if let Some(rest) = t.strip_prefix("fixed:") {
            let modes = rest
                .split(',')
                .map(|m| m.trim().parse::<Mode>())
                .collect::<Result<Vec<_>>>()?;
            if modes.is_empty() {
                return Err(Error::domain("fixed mode list is empty"));
            }
            return Ok(ModeRule::Fixed(ModePartition(modes)));
        }
        Err(Error::domain(format!(
            "unknown mode rule '{t}' (expected threshold, best, exhaustive or fixed:DF,NF,...)"
        )))
    }
}

impl fmt::Display for ModeRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeRule::Threshold => f.write_str("threshold"),
            ModeRule::Best => f.write_str("best"),
            ModeRule::Exhaustive => f.write_str("exhaustive"),
            ModeRule::Fixed(p) => {
                let labels: Vec<&str> = p.0.iter().map(|m| m.label()).collect();
                write!(f, "fixed:{}", labels.join(","))
            }
        }
    }
}

/// DF iff `|h_sd|^2 < |h_sr|^2`; equality goes to NF.
pub fn threshold_modes(states: &[FadingState]) -> ModePartition {
    ModePartition(
        states
            .iter()
            .map(|h| {
                if h.power(Link::SourceDest) < h.power(Link::SourceRelay) {
                    Mode::DecodeForward
                } else {
                    Mode::NoiseForward
                }
            })
            .collect(),
    )
}

/// Threshold rule on canonical parameters: DF iff `sigma1^2 < sigma^2`.
pub fn threshold_modes_params(subs: &[SubchannelParams]) -> ModePartition {
    ModePartition(
        subs.iter()
            .map(|s| {
                if s.sigma1_sq < s.sigma_sq {
                    Mode::DecodeForward
                } else {
                    Mode::NoiseForward
                }
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubchannelChoice {
    pub mode: Mode,
    /// Contribution `min([a]+, [b]+)` of the chosen mode.
    pub rate: f64,
    /// Best DF split at these powers.
    pub alpha: f64,
}

/// DF split maximizing the single-subchannel DF contribution.
pub fn best_alpha(sub: &SubchannelParams, p1: f64, p2: f64, bw: Bandwidth) -> (f64, f64) {
    let f = |a: f64| df_terms(sub, p1, p2, a, bw).contribution();
    const N: usize = 256;
    let mut best = (1.0, f(1.0));
    let mut best_k = N;
    for k in 0..N {
        let a = k as f64 / N as f64;
        let v = f(a);
        if v > best.1 {
            best = (a, v);
            best_k = k;
        }
    }
    // golden-section search on the bracketing cells
    let lo = best_k.saturating_sub(1) as f64 / N as f64;
    let hi = ((best_k + 1).min(N)) as f64 / N as f64;
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        }
    }
    for (x, v) in [(x1, f1), (x2, f2)] {
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

/// Mode with the larger single-subchannel contribution at fixed powers;
/// ties go to NF.
pub fn best_per_subchannel(sub: &SubchannelParams, p1: f64, p2: f64, bw: Bandwidth) -> SubchannelChoice {
    let nf = nf_terms(sub, p1, p2, bw).contribution();
    let (alpha, df) = best_alpha(sub, p1, p2, bw);
    if df > nf {
        SubchannelChoice {
            mode: Mode::DecodeForward,
            rate: df,
            alpha,
        }
    } else {
        SubchannelChoice {
            mode: Mode::NoiseForward,
            rate: nf,
            alpha,
        }
    }
}

/// Starting from `initial`, switches every subchannel to its locally best
/// mode at the current optimal powers and re-optimizes, keeping the switch
/// only when the optimized lower bound strictly improves.
pub fn refine_modes(
    problem: &Problem,
    initial: ModePartition,
    config: &OptimizerConfig,
) -> Result<(ModePartition, Solution)> {
    let mut modes = initial;
    let mut sol = optimize_lower(problem, &modes, config)?;
    for _ in 0..problem.subchannels.len() + 2 {
        let mut warm = sol.allocation.clone();
        let choices: Vec<SubchannelChoice> = problem
            .subchannels
            .iter()
            .enumerate()
            .map(|(l, s)| best_per_subchannel(s, warm.p1[l], warm.p2[l], problem.bandwidth))
            .collect();
        let candidate = ModePartition(choices.iter().map(|c| c.mode).collect());
        if candidate == modes {
            break;
        }
        for (l, c) in choices.iter().enumerate() {
            if c.mode == Mode::DecodeForward && modes.0[l] == Mode::NoiseForward {
                warm.alpha[l] = c.alpha;
            }
        }
        let next = optimize_from(problem, &Objective::Lower(candidate.clone()), config, &[warm])?;
        if next.rate > sol.rate + 1e-12 {
            modes = candidate;
            sol = next;
        } else {
            break;
        }
    }
    Ok((modes, sol))
}

/// Optimizes every one of the `2^L` partitions.
pub fn exhaustive_modes(problem: &Problem, config: &OptimizerConfig) -> Result<(ModePartition, Solution)> {
    let l = problem.subchannels.len();
    if l > EXHAUSTIVE_MAX {
        return Err(Error::Unsupported(format!(
            "exhaustive mode search handles at most {EXHAUSTIVE_MAX} subchannels, got {l}"
        )));
    }
    let mut best: Option<(ModePartition, Solution)> = None;
    for mask in 0u32..(1u32 << l) {
        let modes = ModePartition(
            (0..l)
                .map(|i| {
                    if mask >> i & 1 == 1 {
                        Mode::DecodeForward
                    } else {
                        Mode::NoiseForward
                    }
                })
                .collect(),
        );
        let sol = optimize_lower(problem, &modes, config)?;
        if best.as_ref().is_none_or(|(_, b)| sol.rate > b.rate) {
            best = Some((modes, sol));
        }
    }
    best.ok_or_else(|| Error::shape("no subchannels"))
}

/// Applies `rule` and returns the partition with its optimized lower bound.
/// `states` supplies raw gains for the threshold rule when available.
pub fn resolve_modes(
    rule: &ModeRule,
    problem: &Problem,
    states: Option<&[FadingState]>,
    config: &OptimizerConfig,
) -> Result<(ModePartition, Solution)> {
    let threshold = || match states {
        Some(s) => threshold_modes(s),
        None => threshold_modes_params(problem.subchannels),
    };
    match rule {
        ModeRule::Threshold => {
            let modes = threshold();
            let sol = optimize_lower(problem, &modes, config)?;
            Ok((modes, sol))
        }
        ModeRule::Best => refine_modes(problem, threshold(), config),
        ModeRule::Fixed(modes) => {
            if modes.len() != problem.subchannels.len() {
                return Err(Error::shape(format!(
                    "{} subchannels but {} fixed modes",
                    problem.subchannels.len(),
                    modes.len()
                )));
            }
            let sol = optimize_lower(problem, modes, config)?;
            Ok((modes.clone(), sol))
        }
        ModeRule::Exhaustive => exhaustive_modes(problem, config),
    }
}

/// Per-subchannel allocation value `min([a]+, [b]+)` at a fixed allocation.
pub fn subchannel_contributions(
    subs: &[SubchannelParams],
    alloc: &Allocation,
    modes: &ModePartition,
    bw: Bandwidth,
) -> Vec<f64> {
    subs.iter()
        .enumerate()
        .map(|(l, s)| match modes.0[l] {
            Mode::DecodeForward => df_terms(s, alloc.p1[l], alloc.p2[l], alloc.alpha[l], bw).contribution(),
            Mode::NoiseForward => nf_terms(s, alloc.p1[l], alloc.p2[l], bw).contribution(),
        })
        .collect()
}
