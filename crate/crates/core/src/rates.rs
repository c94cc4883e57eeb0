//! Closed-form secrecy-rate bounds at a fixed power allocation.
//!
//! All rates are in bits per channel use with base-2 logarithms. Real
//! subchannels use `C(x) = 1/2 log2(1 + x)`; complex (fading) subchannels
//! carry twice that, selected through [`Bandwidth`].

use serde::{Deserialize, Serialize};

use crate::channel::{FadingState, Link, NoiseLevels, PowerBudget, SubchannelParams};
use crate::error::{Error, Result};

/// Relative slack allowed on the sum-power constraints.
pub const BUDGET_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Bandwidth {
    /// Real-valued channel, `C(x)`.
    #[default]
    Real,
    /// Complex-valued channel, `2 C(x)`.
    Complex,
}

impl Bandwidth {
    pub fn factor(self) -> f64 {
        match self {
            Bandwidth::Real => 1.0,
            Bandwidth::Complex => 2.0,
        }
    }

    pub fn from_factor(f: u32) -> Result<Self> {
        match f {
            1 => Ok(Bandwidth::Real),
            2 => Ok(Bandwidth::Complex),
            _ => Err(Error::domain(format!("bandwidth factor must be 1 or 2, got {f}"))),
        }
    }
}

/// `factor * 1/2 * log2(1 + x)`.
pub fn cap(x: f64, bw: Bandwidth) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::domain(format!("capacity argument must be >= 0, got {x}")));
    }
    Ok(bw.factor() * c(x))
}

#[inline]
pub(crate) fn c(x: f64) -> f64 {
    0.5 * x.ln_1p() / std::f64::consts::LN_2
}

#[inline]
pub(crate) fn pos(x: f64) -> f64 {
    x.max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Decode-and-forward: the relay decodes and coherently re-sends.
    #[serde(rename = "DF")]
    DecodeForward,
    /// Noise forwarding: the relay jams the eavesdropper.
    #[serde(rename = "NF")]
    NoiseForward,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::DecodeForward => "DF",
            Mode::NoiseForward => "NF",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "DF" => Ok(Mode::DecodeForward),
            "NF" => Ok(Mode::NoiseForward),
            other => Err(Error::domain(format!("unknown relay mode `{other}` (expected DF or NF)"))),
        }
    }
}

/// Assignment of every subchannel to the DF set or its NF complement.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModePartition(pub Vec<Mode>);

impl ModePartition {
    pub fn uniform(len: usize, mode: Mode) -> Self {
        ModePartition(vec![mode; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self, mode: Mode) -> usize {
        self.0.iter().filter(|&&m| m == mode).count()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.0
    }
}

/// Per-subchannel decision variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    /// DF power split; the coherent share is `1 - alpha`.
    pub alpha: Vec<f64>,
    /// Source/relay input correlation used by the upper bound.
    pub psi: Vec<f64>,
}

impl Allocation {
    pub fn zeros(len: usize) -> Self {
        Allocation {
            p1: vec![0.0; len],
            p2: vec![0.0; len],
            alpha: vec![1.0; len],
            psi: vec![0.0; len],
        }
    }

    /// Equal split of both budgets, `alpha = 1`, `psi = 0`.
    pub fn uniform(budget: &PowerBudget, len: usize) -> Self {
        let n = len.max(1) as f64;
        Allocation {
            p1: vec![budget.p1_total / n; len],
            p2: vec![budget.p2_total / n; len],
            alpha: vec![1.0; len],
            psi: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.p1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p1.is_empty()
    }

    fn check_shape(&self, len: usize) -> Result<()> {
        let lens = [self.p1.len(), self.p2.len(), self.alpha.len(), self.psi.len()];
        if lens.iter().any(|&l| l != len) {
            return Err(Error::shape(format!(
                "allocation lists have lengths {lens:?}, expected {len}"
            )));
        }
        Ok(())
    }

    fn check_boxes(&self) -> Result<()> {
        for (l, ((&p1, &p2), (&a, &s))) in self
            .p1
            .iter()
            .zip(&self.p2)
            .zip(self.alpha.iter().zip(&self.psi))
            .enumerate()
        {
            if !(p1 >= 0.0 && p1.is_finite()) || !(p2 >= 0.0 && p2.is_finite()) {
                return Err(Error::domain(format!("subchannel {l}: powers must be finite and >= 0")));
            }
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::domain(format!("subchannel {l}: alpha = {a} outside [0, 1]")));
            }
            if !(-1.0..=1.0).contains(&s) {
                return Err(Error::domain(format!("subchannel {l}: psi = {s} outside [-1, 1]")));
            }
        }
        Ok(())
    }

    /// Shape, box and budget checks. `scale` multiplies the budgets, so a
    /// mean-power constraint over `L` states is `scale = L`.
    pub fn validate(&self, len: usize, budget: &PowerBudget, scale: f64) -> Result<()> {
        self.check_shape(len)?;
        self.check_boxes()?;
        let s1: f64 = self.p1.iter().sum();
        let s2: f64 = self.p2.iter().sum();
        let b1 = budget.p1_total * scale;
        let b2 = budget.p2_total * scale;
        if s1 > b1 * (1.0 + BUDGET_TOL) + f64::MIN_POSITIVE {
            return Err(Error::Infeasible(format!("source power {s1} exceeds budget {b1}")));
        }
        if s2 > b2 * (1.0 + BUDGET_TOL) + f64::MIN_POSITIVE {
            return Err(Error::Infeasible(format!("relay power {s2} exceeds budget {b2}")));
        }
        Ok(())
    }
}

/// Two competing rate terms of one subchannel, before and after `[.]+`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermPair {
    pub first: f64,
    pub second: f64,
}

impl TermPair {
    pub fn clamped(&self) -> TermPair {
        TermPair {
            first: pos(self.first),
            second: pos(self.second),
        }
    }

    /// `min([first]+, [second]+)`, the single-subchannel contribution.
    pub fn contribution(&self) -> f64 {
        let c = self.clamped();
        c.first.min(c.second)
    }
}

/// DF terms of one subchannel: the destination-side secrecy term and the
/// relay-decoding-limited term.
pub fn df_terms(sub: &SubchannelParams, p1: f64, p2: f64, alpha: f64, bw: Bandwidth) -> TermPair {
    let coherent = (1.0 - alpha).max(0.0);
    let q = (coherent * p1 * p2).sqrt();
    let s_dest = p1 + sub.rho1 * p2 + 2.0 * sub.rho1.sqrt() * q;
    let s_eve = p1 + sub.rho2 * p2 + 2.0 * sub.rho2.sqrt() * q;
    let leak = c(s_eve / sub.sigma2_sq);
    let f = bw.factor();
    TermPair {
        first: f * (c(s_dest / sub.sigma_sq) - leak),
        second: f * (c(alpha * p1 / sub.sigma1_sq) - leak),
    }
}

/// NF terms of one subchannel: joint decoding of source and relay signals at
/// the destination, and the split form where the relay codeword is resolved
/// separately.
pub fn nf_terms(sub: &SubchannelParams, p1: f64, p2: f64, bw: Bandwidth) -> TermPair {
    let leak = c((p1 + sub.rho2 * p2) / sub.sigma2_sq);
    let f = bw.factor();
    TermPair {
        first: f * (c((p1 + sub.rho1 * p2) / sub.sigma_sq) - leak),
        second: f * (c(p1 / sub.sigma_sq) + c(sub.rho2 * p2 / sub.sigma2_sq) - leak),
    }
}

/// The split NF term in its jammed-wiretap form
/// `C(P1/sigma^2) - C(P1/(sigma2^2 + rho2 P2))`.
pub fn nf_split_identity(sub: &SubchannelParams, p1: f64, p2: f64, bw: Bandwidth) -> f64 {
    bw.factor() * (c(p1 / sub.sigma_sq) - c(p1 / (sub.sigma2_sq + sub.rho2 * p2)))
}

/// Capacity terms when the relay does not hear the source: cooperative
/// (relay as a helper to the destination) and interference (relay as a jammer
/// of the eavesdropper).
pub fn deaf_relay_terms(sub: &SubchannelParams, p1: f64, p2: f64, bw: Bandwidth) -> TermPair {
    let f = bw.factor();
    TermPair {
        first: f * (c((p1 + sub.rho1 * p2) / sub.sigma_sq) - c((p1 + sub.rho2 * p2) / sub.sigma2_sq)),
        second: f * (c(p1 / sub.sigma_sq) - c(p1 / (sub.sigma2_sq + sub.rho2 * p2))),
    }
}

/// Upper-bound term of one subchannel with correlated Gaussian inputs.
/// Not clamped: the term may be negative at a fixed allocation.
pub fn upper_term(sub: &SubchannelParams, p1: f64, p2: f64, psi: f64, bw: Bandwidth) -> f64 {
    let q = (p1 * p2).sqrt();
    let s_dest = (p1 + sub.rho1 * p2 + 2.0 * psi * sub.rho1.sqrt() * q).max(0.0);
    let s_eve = (p1 + sub.rho2 * p2 + 2.0 * psi * sub.rho2.sqrt() * q).max(0.0);
    bw.factor() * (c(s_dest / sub.sigma_sq) - c(s_eve / sub.sigma2_sq))
}

/// Correlation maximizing [`upper_term`] at fixed powers.
///
/// The term is monotone in `psi`: its derivative has the sign of
/// `sqrt(rho1) (sigma2^2 + P1 + rho2 P2) - sqrt(rho2) (sigma^2 + P1 + rho1 P2)`
/// for every `psi`, so the maximum is at `+1` or `-1`. Ties give `+1`.
pub fn best_correlation(sub: &SubchannelParams, p1: f64, p2: f64) -> f64 {
    let slope = sub.rho1.sqrt() * (sub.sigma2_sq + p1 + sub.rho2 * p2) - sub.rho2.sqrt() * (sub.sigma_sq + p1 + sub.rho1 * p2);
    if slope >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Which of the two competing sums of a mode group achieves the minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Binding {
    First,
    Second,
}

/// A lower-bound evaluation with its per-subchannel breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerEvaluation {
    pub value: f64,
    /// Clamped term of the binding sum for each subchannel; sums to `value`.
    pub per_subchannel: Vec<f64>,
    pub df_binding: Binding,
    pub nf_binding: Binding,
}

fn check_lengths(subs: &[SubchannelParams], alloc: &Allocation, modes: &ModePartition) -> Result<()> {
    if modes.len() != subs.len() {
        return Err(Error::shape(format!(
            "{} subchannels but {} modes",
            subs.len(),
            modes.len()
        )));
    }
    alloc.check_shape(subs.len())?;
    alloc.check_boxes()
}

/// Condensed lower bound on the perfect secrecy rate at a fixed allocation:
///
/// `min{ sum_A [df1]+, sum_A [df2]+ } + min{ sum_Ac [nf1]+, sum_Ac [nf2]+ }`.
///
/// Budgets are not checked here; see [`Allocation::validate`].
pub fn lower_bound(
    subs: &[SubchannelParams],
    alloc: &Allocation,
    modes: &ModePartition,
    bw: Bandwidth,
) -> Result<LowerEvaluation> {
    check_lengths(subs, alloc, modes)?;
    let terms: Vec<TermPair> = subs
        .iter()
        .enumerate()
        .map(|(l, s)| match modes.0[l] {
            Mode::DecodeForward => df_terms(s, alloc.p1[l], alloc.p2[l], alloc.alpha[l], bw),
            Mode::NoiseForward => nf_terms(s, alloc.p1[l], alloc.p2[l], bw),
        })
        .map(|t| t.clamped())
        .collect();
    Ok(combine_groups(&terms, modes))
}

pub(crate) fn combine_groups(clamped: &[TermPair], modes: &ModePartition) -> LowerEvaluation {
    let mut sums = [[0.0f64; 2]; 2];
    for (t, m) in clamped.iter().zip(&modes.0) {
        let g = group_index(*m);
        sums[g][0] += t.first;
        sums[g][1] += t.second;
    }
    // ties go to the first sum
    let binding = |s: [f64; 2]| if s[0] <= s[1] { Binding::First } else { Binding::Second };
    let df_binding = binding(sums[0]);
    let nf_binding = binding(sums[1]);
    let per_subchannel = clamped
        .iter()
        .zip(&modes.0)
        .map(|(t, m)| {
            let b = if *m == Mode::DecodeForward { df_binding } else { nf_binding };
            match b {
                Binding::First => t.first,
                Binding::Second => t.second,
            }
        })
        .collect();
    LowerEvaluation {
        value: sums[0][0].min(sums[0][1]) + sums[1][0].min(sums[1][1]),
        per_subchannel,
        df_binding,
        nf_binding,
    }
}

#[inline]
pub(crate) fn group_index(m: Mode) -> usize {
    match m {
        Mode::DecodeForward => 0,
        Mode::NoiseForward => 1,
    }
}

/// Un-condensed lower bound, evaluated literally:
///
/// ```text
/// min{ sum_A df1, sum_A df2 }
///   + sum_Ac C(P1/s^2)
///   + min{ sum_Ac C(r1 P2/(P1+s^2)), sum_Ac C(r2 P2/s2^2) }
///   - min{ sum_Ac C(r1 P2/(P1+s^2)), sum_Ac C(r2 P2/(P1+s2^2)) }
///   - sum_Ac C(P1/s2^2)
/// ```
///
/// No positive-part clamp appears anywhere, so the value can be negative.
pub fn lower_bound_uncondensed(
    subs: &[SubchannelParams],
    alloc: &Allocation,
    modes: &ModePartition,
    bw: Bandwidth,
) -> Result<f64> {
    check_lengths(subs, alloc, modes)?;
    let (mut df1, mut df2) = (0.0, 0.0);
    let (mut direct, mut relay_dest, mut relay_eve_clean, mut relay_eve_masked, mut leak) =
        (0.0, 0.0, 0.0, 0.0, 0.0);
    for (l, s) in subs.iter().enumerate() {
        let (p1, p2) = (alloc.p1[l], alloc.p2[l]);
        match modes.0[l] {
            Mode::DecodeForward => {
                let t = df_terms(s, p1, p2, alloc.alpha[l], bw);
                df1 += t.first;
                df2 += t.second;
            }
            Mode::NoiseForward => {
                direct += c(p1 / s.sigma_sq);
                relay_dest += c(s.rho1 * p2 / (p1 + s.sigma_sq));
                relay_eve_clean += c(s.rho2 * p2 / s.sigma2_sq);
                relay_eve_masked += c(s.rho2 * p2 / (p1 + s.sigma2_sq));
                leak += c(p1 / s.sigma2_sq);
            }
        }
    }
    let nf = direct + relay_dest.min(relay_eve_clean) - relay_dest.min(relay_eve_masked) - leak;
    Ok(df1.min(df2) + bw.factor() * nf)
}

/// Per-subchannel upper-bound terms and their sum.
pub fn upper_bound(subs: &[SubchannelParams], alloc: &Allocation, bw: Bandwidth) -> Result<(f64, Vec<f64>)> {
    alloc.check_shape(subs.len())?;
    alloc.check_boxes()?;
    let terms: Vec<f64> = subs
        .iter()
        .enumerate()
        .map(|(l, s)| upper_term(s, alloc.p1[l], alloc.p2[l], alloc.psi[l], bw))
        .collect();
    Ok((terms.iter().sum(), terms))
}

/// Sums of the two deaf-relay terms at a fixed allocation.
pub fn deaf_relay_sums(subs: &[SubchannelParams], alloc: &Allocation, bw: Bandwidth) -> Result<TermPair> {
    alloc.check_shape(subs.len())?;
    alloc.check_boxes()?;
    Ok(subs
        .iter()
        .enumerate()
        .map(|(l, s)| deaf_relay_terms(s, alloc.p1[l], alloc.p2[l], bw))
        .fold(TermPair { first: 0.0, second: 0.0 }, |acc, t| TermPair {
            first: acc.first + t.first,
            second: acc.second + t.second,
        }))
}

/// DF terms of one fading state, computed on the raw gains with `2 C(.)`.
pub fn fading_df_terms(h: &FadingState, noise: &NoiseLevels, p1: f64, p2: f64, alpha: f64) -> TermPair {
    let (g_sd, g_rd, g_se, g_re, g_sr) = gains(h);
    let coherent = (1.0 - alpha).max(0.0);
    let s_dest = g_sd * p1 + g_rd * p2 + 2.0 * (coherent * g_sd * p1 * g_rd * p2).sqrt();
    let s_eve = g_se * p1 + g_re * p2 + 2.0 * (coherent * g_se * p1 * g_re * p2).sqrt();
    let leak = 2.0 * c(s_eve / noise.eavesdropper);
    TermPair {
        first: 2.0 * c(s_dest / noise.destination) - leak,
        second: 2.0 * c(alpha * g_sr * p1 / noise.relay) - leak,
    }
}

/// NF terms of one fading state on the raw gains.
pub fn fading_nf_terms(h: &FadingState, noise: &NoiseLevels, p1: f64, p2: f64) -> TermPair {
    let (g_sd, g_rd, g_se, g_re, _) = gains(h);
    let leak = 2.0 * c((g_se * p1 + g_re * p2) / noise.eavesdropper);
    TermPair {
        first: 2.0 * c((g_sd * p1 + g_rd * p2) / noise.destination) - leak,
        second: 2.0 * c(g_sd * p1 / noise.destination) + 2.0 * c(g_re * p2 / noise.eavesdropper) - leak,
    }
}

/// Upper-bound term of one fading state on the raw gains.
pub fn fading_upper_term(h: &FadingState, noise: &NoiseLevels, p1: f64, p2: f64, psi: f64) -> f64 {
    let (g_sd, g_rd, g_se, g_re, _) = gains(h);
    let s_dest = g_sd * p1 + g_rd * p2 + 2.0 * psi * (g_sd * p1 * g_rd * p2).sqrt();
    let s_eve = g_se * p1 + g_re * p2 + 2.0 * psi * (g_se * p1 * g_re * p2).sqrt();
    2.0 * c(s_dest.max(0.0) / noise.destination) - 2.0 * c(s_eve.max(0.0) / noise.eavesdropper)
}

fn gains(h: &FadingState) -> (f64, f64, f64, f64, f64) {
    (
        h.power(Link::SourceDest),
        h.power(Link::RelayDest),
        h.power(Link::SourceEve),
        h.power(Link::RelayEve),
        h.power(Link::SourceRelay),
    )
}

fn check_fading(states: &[FadingState], alloc: &Allocation, budget: &PowerBudget) -> Result<()> {
    if states.is_empty() {
        return Err(Error::shape("no fading states"));
    }
    if let Some(i) = states.iter().position(|s| !s.is_finite()) {
        return Err(Error::domain(format!("fading state {i} has non-finite gains")));
    }
    alloc.validate(states.len(), budget, states.len() as f64)
}

/// Ergodic lower bound: empirical mean over the sampled states of the
/// condensed lower bound with `2 C(.)` terms. Expectations over the DF and
/// NF sets are `1/L` times the sum over the states in that set. Power
/// constraints apply to the mean per-state power.
pub fn ergodic_lower(
    states: &[FadingState],
    alloc: &Allocation,
    modes: &ModePartition,
    noise: &NoiseLevels,
    budget: &PowerBudget,
) -> Result<f64> {
    check_fading(states, alloc, budget)?;
    if modes.len() != states.len() {
        return Err(Error::shape(format!("{} states but {} modes", states.len(), modes.len())));
    }
    let terms: Vec<TermPair> = states
        .iter()
        .enumerate()
        .map(|(l, h)| match modes.0[l] {
            Mode::DecodeForward => fading_df_terms(h, noise, alloc.p1[l], alloc.p2[l], alloc.alpha[l]),
            Mode::NoiseForward => fading_nf_terms(h, noise, alloc.p1[l], alloc.p2[l]),
        })
        .map(|t| t.clamped())
        .collect();
    Ok(combine_groups(&terms, modes).value / states.len() as f64)
}

/// Ergodic upper bound: empirical mean of the per-state upper terms.
pub fn ergodic_upper(
    states: &[FadingState],
    alloc: &Allocation,
    noise: &NoiseLevels,
    budget: &PowerBudget,
) -> Result<f64> {
    check_fading(states, alloc, budget)?;
    let total: f64 = states
        .iter()
        .enumerate()
        .map(|(l, h)| fading_upper_term(h, noise, alloc.p1[l], alloc.p2[l], alloc.psi[l]))
        .sum();
    Ok(total / states.len() as f64)
}

/// Result record of a bound computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBounds {
    pub lower: f64,
    pub upper: f64,
    pub per_subchannel_lower: Vec<f64>,
    pub per_subchannel_upper: Vec<f64>,
    pub modes: ModePartition,
    /// Allocation attaining `lower`.
    pub allocation: Allocation,
    /// Allocation attaining `upper`.
    pub upper_allocation: Allocation,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sub(sigma_sq: f64, sigma1_sq: f64, sigma2_sq: f64, rho1: f64, rho2: f64) -> SubchannelParams {
        SubchannelParams::new(sigma_sq, sigma1_sq, sigma2_sq, rho1, rho2).unwrap()
    }

    fn half_log2(x: f64) -> f64 {
        0.5 * x.log2()
    }

    #[test]
    fn cap_values() {
        assert_eq!(cap(0.0, Bandwidth::Real).unwrap(), 0.0);
        assert_abs_diff_eq!(cap(3.0, Bandwidth::Real).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(cap(3.0, Bandwidth::Complex).unwrap(), 2.0, epsilon = 1e-15);
        assert!(cap(-1e-9, Bandwidth::Real).is_err());
        assert!(cap(f64::NAN, Bandwidth::Real).is_err());
        assert!(Bandwidth::from_factor(3).is_err());
    }

    #[test]
    fn df_terms_hand_values() {
        let s = sub(1.0, 0.25, 4.0, 1.0, 1.0);
        let t = df_terms(&s, 3.0, 1.0, 1.0, Bandwidth::Real);
        // alpha = 1 removes the coherent cross terms: C(4) - C(1), C(12) - C(1)
        assert_abs_diff_eq!(t.first, half_log2(2.5), epsilon = 1e-14);
        assert_abs_diff_eq!(t.second, half_log2(6.5), epsilon = 1e-14);
        assert_abs_diff_eq!(t.first, 0.6610, epsilon = 1e-4);
        assert_abs_diff_eq!(t.second, 1.3502, epsilon = 1e-4);
        assert_abs_diff_eq!(t.contribution(), half_log2(2.5), epsilon = 1e-14);
    }

    #[test]
    fn df_symmetric_and_silent() {
        let s = sub(2.0, 0.5, 2.0, 0.7, 0.7);
        for alpha in [0.0, 0.3, 1.0] {
            let t = df_terms(&s, 5.0, 2.0, alpha, Bandwidth::Real);
            assert_abs_diff_eq!(t.first, 0.0, epsilon = 1e-15);
        }
        let t = df_terms(&s, 0.0, 0.0, 0.4, Bandwidth::Real);
        assert_eq!((t.first, t.second), (0.0, 0.0));
    }

    #[test]
    fn nf_terms_hand_values() {
        let s = sub(1.0, 1.0, 4.0, 1.0, 1.0);
        let t = nf_terms(&s, 3.0, 1.0, Bandwidth::Real);
        // C(4) - C(1) and C(3) + C(1/4) - C(1)
        assert_abs_diff_eq!(t.first, half_log2(2.5), epsilon = 1e-14);
        assert_abs_diff_eq!(t.second, half_log2(4.0 * 1.25 / 2.0), epsilon = 1e-14);
        assert_abs_diff_eq!(t.contribution(), 0.6610, epsilon = 1e-4);

        let sym = sub(1.0, 1.0, 1.0, 1.0, 1.0);
        let t = nf_terms(&sym, 3.0, 1.0, Bandwidth::Real);
        assert_abs_diff_eq!(t.first, 0.0, epsilon = 1e-15);
        assert_eq!(t.contribution(), 0.0);
    }

    #[test]
    fn nf_relay_silent_is_wiretap() {
        let s = sub(1.3, 1.0, 2.9, 0.4, 2.2);
        let t = nf_terms(&s, 7.0, 0.0, Bandwidth::Real);
        let wiretap = c(7.0 / 1.3) - c(7.0 / 2.9);
        assert_abs_diff_eq!(t.first, wiretap, epsilon = 1e-14);
        assert_abs_diff_eq!(t.second, wiretap, epsilon = 1e-14);
    }

    #[test]
    fn lower_bound_examples() {
        let nf = sub(1.0, 1.0, 4.0, 1.0, 1.0);
        let df = sub(1.0, 0.25, 4.0, 1.0, 1.0);
        let single = lower_bound(
            &[nf],
            &Allocation {
                p1: vec![3.0],
                p2: vec![1.0],
                alpha: vec![1.0],
                psi: vec![0.0],
            },
            &ModePartition(vec![Mode::NoiseForward]),
            Bandwidth::Real,
        )
        .unwrap();
        assert_abs_diff_eq!(single.value, half_log2(2.5), epsilon = 1e-14);

        let both = lower_bound(
            &[df, nf],
            &Allocation {
                p1: vec![3.0, 3.0],
                p2: vec![1.0, 1.0],
                alpha: vec![1.0, 1.0],
                psi: vec![0.0, 0.0],
            },
            &ModePartition(vec![Mode::DecodeForward, Mode::NoiseForward]),
            Bandwidth::Real,
        )
        .unwrap();
        assert_abs_diff_eq!(both.value, 2.0 * half_log2(2.5), epsilon = 1e-14);
        assert_abs_diff_eq!(both.value, 1.3220, epsilon = 1e-4);
        assert_abs_diff_eq!(both.per_subchannel.iter().sum::<f64>(), both.value, epsilon = 1e-14);

        let sym = sub(2.0, 1.0, 2.0, 1.5, 1.5);
        let alloc = Allocation {
            p1: vec![1.0, 4.0],
            p2: vec![2.0, 0.5],
            alpha: vec![0.2, 0.9],
            psi: vec![0.0, 0.0],
        };
        for modes in [
            vec![Mode::DecodeForward, Mode::NoiseForward],
            vec![Mode::NoiseForward, Mode::NoiseForward],
        ] {
            let v = lower_bound(&[sym, sym], &alloc, &ModePartition(modes), Bandwidth::Real).unwrap();
            assert_abs_diff_eq!(v.value, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn lower_bound_shape_errors() {
        let s = sub(1.0, 1.0, 4.0, 1.0, 1.0);
        let alloc = Allocation::zeros(2);
        let err = lower_bound(&[s], &alloc, &ModePartition::uniform(1, Mode::NoiseForward), Bandwidth::Real);
        assert!(matches!(err, Err(Error::Shape(_))));
        let err = lower_bound(&[s, s], &alloc, &ModePartition::uniform(1, Mode::NoiseForward), Bandwidth::Real);
        assert!(matches!(err, Err(Error::Shape(_))));
    }

    #[test]
    fn uncondensed_examples() {
        let nf = sub(1.0, 1.0, 4.0, 1.0, 1.0);
        let df = sub(1.0, 0.25, 4.0, 1.0, 1.0);
        let modes = ModePartition(vec![Mode::NoiseForward, Mode::NoiseForward]);
        // relay silent on NF subchannels: both forms coincide
        let alloc = Allocation {
            p1: vec![3.0, 1.0],
            p2: vec![0.0, 0.0],
            alpha: vec![1.0, 1.0],
            psi: vec![0.0, 0.0],
        };
        let a = lower_bound_uncondensed(&[nf, nf], &alloc, &modes, Bandwidth::Real).unwrap();
        let b = lower_bound(&[nf, nf], &alloc, &modes, Bandwidth::Real).unwrap().value;
        assert_abs_diff_eq!(a, b, epsilon = 1e-14);

        let one = Allocation {
            p1: vec![3.0],
            p2: vec![1.0],
            alpha: vec![1.0],
            psi: vec![0.0],
        };
        let v = lower_bound_uncondensed(&[nf], &one, &ModePartition(vec![Mode::NoiseForward]), Bandwidth::Real)
            .unwrap();
        assert!(v <= 0.6610 + 1e-4, "{v}");
        assert_abs_diff_eq!(v, half_log2(2.5), epsilon = 1e-12);

        // all DF: identical DF parts
        let df_modes = ModePartition(vec![Mode::DecodeForward]);
        let u = lower_bound_uncondensed(&[df], &one, &df_modes, Bandwidth::Real).unwrap();
        let w = lower_bound(&[df], &one, &df_modes, Bandwidth::Real).unwrap().value;
        assert_abs_diff_eq!(u, w, epsilon = 1e-14);
    }

    #[test]
    fn upper_bound_examples() {
        let s = sub(1.0, 1.0, 4.0, 1.0, 1.0);
        let mut alloc = Allocation {
            p1: vec![3.0],
            p2: vec![1.0],
            alpha: vec![1.0],
            psi: vec![0.0],
        };
        let (v, _) = upper_bound(&[s], &alloc, Bandwidth::Real).unwrap();
        assert_abs_diff_eq!(v, half_log2(2.5), epsilon = 1e-14);

        alloc.psi[0] = 1.0;
        let (v, _) = upper_bound(&[s], &alloc, Bandwidth::Real).unwrap();
        // s = 4 + 2 sqrt 3: C(s) - C(s/4)
        let sum = 4.0 + 2.0 * 3f64.sqrt();
        let hand = half_log2((1.0 + sum) / (1.0 + sum / 4.0));
        assert_abs_diff_eq!(v, hand, epsilon = 1e-14);
        assert_abs_diff_eq!(v, 0.781153, epsilon = 1e-6);

        alloc.psi[0] = 1.5;
        assert!(matches!(upper_bound(&[s], &alloc, Bandwidth::Real), Err(Error::Domain(_))));

        let sym = sub(2.0, 1.0, 2.0, 0.5, 0.5);
        for psi in [-1.0, -0.2, 0.0, 0.6, 1.0] {
            assert_abs_diff_eq!(upper_term(&sym, 2.0, 3.0, psi, Bandwidth::Real), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn deaf_relay_examples() {
        let s = sub(1.0, f64::INFINITY, 4.0, 1.0, 1.0);
        let t = deaf_relay_terms(&s, 3.0, 0.0, Bandwidth::Real);
        let hand = half_log2(4.0 / 1.75);
        assert_abs_diff_eq!(t.first, hand, epsilon = 1e-14);
        assert_abs_diff_eq!(t.second, hand, epsilon = 1e-14);
        assert_abs_diff_eq!(hand, 0.596322, epsilon = 1e-6);

        // jamming: increasing in rho2 towards C(P1/sigma^2)
        let mut prev = f64::NEG_INFINITY;
        for rho2 in [0.0, 0.5, 1.0, 10.0, 1e3, 1e6] {
            let s = sub(1.0, f64::INFINITY, 4.0, 1.0, rho2);
            let v = deaf_relay_terms(&s, 3.0, 1.0, Bandwidth::Real).second;
            assert!(v > prev);
            prev = v;
        }
        assert_abs_diff_eq!(prev, c(3.0), epsilon = 1e-5);
    }

    #[test]
    fn ergodic_lower_examples() {
        let noise = NoiseLevels::default();
        let unit = FadingState::from_power_gains([1.0; 5]);
        let alloc = Allocation {
            p1: vec![3.0],
            p2: vec![1.0],
            alpha: vec![1.0],
            psi: vec![0.0],
        };
        let nf = ModePartition(vec![Mode::NoiseForward]);
        let budget = PowerBudget::new(3.0, 1.0).unwrap();
        let v = ergodic_lower(&[unit], &alloc, &nf, &noise, &budget).unwrap();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-15);
        let t = fading_nf_terms(&unit, &noise, 3.0, 1.0);
        assert_abs_diff_eq!(t.second, (8.0f64 / 5.0).log2(), epsilon = 1e-14);

        // over budget
        let tight = PowerBudget::new(2.0, 1.0).unwrap();
        assert!(matches!(
            ergodic_lower(&[unit], &alloc, &nf, &noise, &tight),
            Err(Error::Infeasible(_))
        ));

        // no leakage: the eavesdropper terms vanish
        let blind = FadingState::from_power_gains([1.0, 2.0, 0.0, 0.0, 1.0]);
        let v = ergodic_lower(&[blind], &alloc, &nf, &noise, &budget).unwrap();
        let joint = 2.0 * c(3.0 + 2.0);
        let split = 2.0 * c(3.0);
        assert_abs_diff_eq!(v, joint.min(split), epsilon = 1e-14);

        // identical states: invariant to L
        let state = FadingState::from_power_gains([1.0, 2.0, 0.5, 0.3, 0.7]);
        let mut prev = None;
        for l in [1usize, 2, 5, 17] {
            let a = Allocation::uniform(&PowerBudget::new(3.0, 1.0).unwrap(), l);
            let a = Allocation {
                p1: vec![3.0; l],
                p2: vec![1.0; l],
                ..a
            };
            let v = ergodic_lower(&vec![state; l], &a, &ModePartition::uniform(l, Mode::NoiseForward), &noise, &budget)
                .unwrap();
            if let Some(p) = prev {
                assert_abs_diff_eq!(v, p, epsilon = 1e-14);
            }
            prev = Some(v);
        }
    }

    #[test]
    fn ergodic_upper_examples() {
        let unit = FadingState::from_power_gains([1.0; 5]);
        let noise = NoiseLevels::default();
        let budget = PowerBudget::new(3.0, 1.0).unwrap();
        let alloc = Allocation {
            p1: vec![3.0],
            p2: vec![1.0],
            alpha: vec![1.0],
            psi: vec![0.0],
        };
        assert_abs_diff_eq!(ergodic_upper(&[unit], &alloc, &noise, &budget).unwrap(), 0.0, epsilon = 1e-15);

        let noise4 = NoiseLevels {
            relay: 1.0,
            destination: 1.0,
            eavesdropper: 4.0,
        };
        let alloc = Allocation {
            psi: vec![1.0],
            ..alloc
        };
        let sum = 4.0 + 2.0 * 3f64.sqrt();
        let hand = 2.0 * half_log2((1.0 + sum) / (1.0 + sum / 4.0));
        let v = ergodic_upper(&[unit], &alloc, &noise4, &budget).unwrap();
        assert_abs_diff_eq!(v, hand, epsilon = 1e-14);
        assert_abs_diff_eq!(v, 1.562306, epsilon = 1e-6);

        let zero = Allocation::zeros(1);
        assert_eq!(ergodic_upper(&[unit], &zero, &noise4, &budget).unwrap(), 0.0);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("df".parse::<Mode>().unwrap(), Mode::DecodeForward);
        assert_eq!(" NF ".parse::<Mode>().unwrap(), Mode::NoiseForward);
        assert!("AF".parse::<Mode>().is_err());
    }
}
