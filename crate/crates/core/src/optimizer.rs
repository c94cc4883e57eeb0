//! Constrained maximization of the rate bounds over power allocations, DF
//! splits and input correlations.
//!
//! The min-of-sums objectives are non-smooth (an outer `min` and per-term
//! `[.]+`). Each restart runs projected gradient ascent on a smoothed
//! surrogate in which `min` becomes a soft-min and `[.]+` a softplus, with
//! the temperature annealed from `1e-1` to `1e-3`. The best restarts are
//! then polished by a derivative-free coordinate search on the exact
//! objective. Powers are optimized in budget-normalized coordinates so that
//! the feasible set of each power vector is `{u >= 0, sum u <= 1}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{fading_to_subchannel, partition_seed, FadingState, NoiseLevels, PowerBudget, SubchannelParams};
use crate::error::{Error, Result};
use crate::rates::{
    self, best_correlation, deaf_relay_terms, df_terms, nf_terms, pos, upper_term, Allocation, Bandwidth, Mode,
    ModePartition,
};

/// Temperatures of the annealed surrogate.
const TAU_SCHEDULE: [f64; 5] = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];
/// Restarts handed to the exact-objective polish.
const POLISH_TOP: usize = 4;
/// Floor used inside gradients of `sqrt(P1 P2)`-type terms.
const GRAD_FLOOR: f64 = 1e-12;
/// Distinct coarse-grid incumbents refined by the grid oracle.
const ZOOM_SEEDS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub restarts: usize,
    pub max_iters: usize,
    pub step_init: f64,
    /// Convergence tolerance on the objective, in bits.
    pub tol: f64,
    /// Per-dimension resolution of the grid oracle.
    pub grid_points: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            restarts: 16,
            max_iters: 300,
            step_init: 0.1,
            tol: 1e-12,
            grid_points: 21,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts < 1 {
            return Err(Error::domain("restarts must be >= 1"));
        }
        if self.max_iters < 1 {
            return Err(Error::domain("max_iters must be >= 1"));
        }
        if !(self.step_init > 0.0 && self.step_init.is_finite()) {
            return Err(Error::domain("step_init must be > 0"));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::domain("tol must be > 0"));
        }
        if self.grid_points < 3 {
            return Err(Error::domain("grid_points must be >= 3"));
        }
        Ok(())
    }
}

/// Which bound to maximize.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Objective {
    /// Condensed lower bound under a fixed DF/NF partition; free split `alpha`.
    Lower(ModePartition),
    /// Upper bound; free correlation `psi`.
    Upper,
    /// Sum of the cooperative deaf-relay terms.
    DeafCooperative,
    /// Sum of the interference deaf-relay terms.
    DeafInterference,
}

/// A parallel channel with its budgets.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub subchannels: &'a [SubchannelParams],
    pub budget: PowerBudget,
    pub bandwidth: Bandwidth,
}

impl<'a> Problem<'a> {
    pub fn new(subchannels: &'a [SubchannelParams], budget: PowerBudget) -> Self {
        Problem {
            subchannels,
            budget,
            bandwidth: Bandwidth::Real,
        }
    }

    pub fn with_bandwidth(mut self, bandwidth: Bandwidth) -> Self {
        self.bandwidth = bandwidth;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.subchannels.is_empty() {
            return Err(Error::shape("no subchannels"));
        }
        for s in self.subchannels {
            s.validate()?;
        }
        PowerBudget::new(self.budget.p1_total, self.budget.p2_total)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub allocation: Allocation,
    pub rate: f64,
}

/// Exact value of `objective` at a physical allocation, via the public
/// evaluators in [`crate::rates`].
pub fn evaluate(problem: &Problem, objective: &Objective, alloc: &Allocation) -> Result<f64> {
    let subs = problem.subchannels;
    let bw = problem.bandwidth;
    match objective {
        Objective::Lower(modes) => Ok(rates::lower_bound(subs, alloc, modes, bw)?.value),
        Objective::Upper => Ok(rates::upper_bound(subs, alloc, bw)?.0),
        Objective::DeafCooperative => Ok(rates::deaf_relay_sums(subs, alloc, bw)?.first),
        Objective::DeafInterference => Ok(rates::deaf_relay_sums(subs, alloc, bw)?.second),
    }
}

/// Gradient of the smoothed objective in physical coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    /// With respect to `alpha` (lower bound) or `psi` (upper bound); zero
    /// where the objective does not depend on it.
    pub theta: Vec<f64>,
}

/// Smoothed surrogate value and its analytic gradient at `alloc`.
///
/// For the lower bound, `[x]+` is replaced by `tau ln(1 + e^(x/tau))` and
/// `min(a, b)` by `-tau ln(e^(-a/tau) + e^(-b/tau))`. The other objectives
/// are plain sums and are returned unsmoothed.
pub fn smoothed_objective(
    problem: &Problem,
    objective: &Objective,
    alloc: &Allocation,
    tau: f64,
) -> Result<(f64, Gradient)> {
    problem.validate()?;
    if !(tau > 0.0) {
        return Err(Error::domain("smoothing temperature must be > 0"));
    }
    let model = Model::new(problem, objective)?;
    let l = model.len();
    alloc.validate(l, &problem.budget, f64::INFINITY)?;
    let theta = match model.kind {
        Kind::Upper => alloc.psi.clone(),
        _ => alloc.alpha.clone(),
    };
    let (v, gp1, gp2, gth) = model.smooth_physical(&alloc.p1, &alloc.p2, &theta, tau);
    Ok((
        v,
        Gradient {
            p1: gp1,
            p2: gp2,
            theta: gth,
        },
    ))
}

/// Maximizes the condensed lower bound under a fixed partition.
pub fn optimize_lower(problem: &Problem, modes: &ModePartition, config: &OptimizerConfig) -> Result<Solution> {
    optimize(problem, &Objective::Lower(modes.clone()), config)
}

/// Maximizes the upper bound over powers and correlations.
pub fn optimize_upper(problem: &Problem, config: &OptimizerConfig) -> Result<Solution> {
    optimize(problem, &Objective::Upper, config)
}

/// Secrecy capacity when the relay does not hear the source, together with
/// the all-NF lower bound it should match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeafRelayCapacity {
    /// `min` of the two separately maximized sums.
    pub capacity: f64,
    pub cooperative: Solution,
    pub interference: Solution,
    /// Optimized lower bound with every subchannel in NF mode.
    pub all_nf_lower: Solution,
}

pub fn optimize_deaf_relay(problem: &Problem, config: &OptimizerConfig) -> Result<DeafRelayCapacity> {
    let cooperative = optimize(problem, &Objective::DeafCooperative, config)?;
    let interference = optimize(problem, &Objective::DeafInterference, config)?;
    let nf = ModePartition::uniform(problem.subchannels.len(), Mode::NoiseForward);
    let all_nf_lower = optimize_lower(problem, &nf, config)?;
    Ok(DeafRelayCapacity {
        capacity: cooperative.rate.min(interference.rate),
        cooperative,
        interference,
        all_nf_lower,
    })
}

/// Multi-start maximization of `objective`. Deterministic in `config.seed`.
pub fn optimize(problem: &Problem, objective: &Objective, config: &OptimizerConfig) -> Result<Solution> {
    optimize_from(problem, objective, config, &[])
}

/// As [`optimize`], with extra warm starts tried before the random ones.
pub fn optimize_from(
    problem: &Problem,
    objective: &Objective,
    config: &OptimizerConfig,
    warm: &[Allocation],
) -> Result<Solution> {
    problem.validate()?;
    config.validate()?;
    let model = Model::new(problem, objective)?;
    let mut warm_points = Vec::with_capacity(warm.len());
    for a in warm {
        a.validate(model.len(), &problem.budget, 1.0)?;
        warm_points.push(model.point_of(a));
    }

    // Deterministic candidates are all evaluated exactly; the best of them
    // seed the ascent alongside random starts.
    let deterministic = model.deterministic_starts();
    let mut scored: Vec<(f64, usize)> = deterministic
        .iter()
        .enumerate()
        .map(|(i, p)| (model.exact(p), i))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    let mut starts: Vec<Point> = warm_points;
    // the two uniform starts always run; then the best-scoring others
    starts.push(deterministic[0].clone());
    if deterministic.len() > 1 {
        starts.push(deterministic[1].clone());
    }
    for &(_, i) in &scored {
        if starts.len() >= config.restarts.max(warm.len() + 1) {
            break;
        }
        if i > 1 && starts.len() < warm.len() + config.restarts.div_ceil(2).max(2) {
            starts.push(deterministic[i].clone());
        }
    }
    let mut k = 0u64;
    while starts.len() < config.restarts.max(warm.len() + 1) {
        let mut rng = ChaCha8Rng::seed_from_u64(partition_seed(config.seed, k));
        starts.push(model.random_start(&mut rng));
        k += 1;
    }
    starts.truncate(config.restarts.max(warm.len() + 1));

    let ascended: Vec<(f64, Point)> = starts
        .into_par_iter()
        .map(|p| {
            let q = model.ascend(p, config);
            (model.exact(&q), q)
        })
        .collect();
    let mut order: Vec<usize> = (0..ascended.len()).collect();
    order.sort_by(|&a, &b| ascended[b].0.total_cmp(&ascended[a].0).then(a.cmp(&b)));
    let polished: Vec<(f64, Point)> = order
        .iter()
        .take(POLISH_TOP)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|&i| {
            let q = model.polish(ascended[i].1.clone(), config);
            (model.exact(&q), q)
        })
        .collect();

    let mut best: Option<(f64, Point)> = None;
    let candidates = polished
        .into_iter()
        .chain(ascended)
        .chain(scored.first().map(|&(v, i)| (v, deterministic[i].clone())));
    for (v, p) in candidates {
        if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
            best = Some((v, p));
        }
    }
    let (_, point) = best.expect("at least one start");
    let allocation = model.to_allocation(&point);
    let rate = evaluate(problem, objective, &allocation)?;
    Ok(Solution { allocation, rate })
}

/// Canonical parameters of sampled fading states.
pub fn fading_params(states: &[FadingState], noise: &NoiseLevels) -> Result<Vec<SubchannelParams>> {
    if states.is_empty() {
        return Err(Error::shape("no fading states"));
    }
    states
        .iter()
        .map(|h| fading_to_subchannel(h, noise).map(|(p, _)| p))
        .collect()
}

/// Maximizes the ergodic lower bound over per-state powers whose mean obeys
/// `budget`. The returned rate is evaluated on the raw gains.
pub fn optimize_ergodic_lower(
    states: &[FadingState],
    noise: &NoiseLevels,
    budget: &PowerBudget,
    modes: &ModePartition,
    config: &OptimizerConfig,
) -> Result<Solution> {
    let params = fading_params(states, noise)?;
    let total = budget.scaled(states.len() as f64);
    let problem = Problem::new(&params, total).with_bandwidth(Bandwidth::Complex);
    let sol = optimize_lower(&problem, modes, config)?;
    let rate = rates::ergodic_lower(states, &sol.allocation, modes, noise, budget)?;
    Ok(Solution {
        allocation: sol.allocation,
        rate,
    })
}

/// Maximizes the ergodic upper bound under the mean power constraint.
pub fn optimize_ergodic_upper(
    states: &[FadingState],
    noise: &NoiseLevels,
    budget: &PowerBudget,
    config: &OptimizerConfig,
) -> Result<Solution> {
    let params = fading_params(states, noise)?;
    let total = budget.scaled(states.len() as f64);
    let problem = Problem::new(&params, total).with_bandwidth(Bandwidth::Complex);
    let sol = optimize_upper(&problem, config)?;
    let rate = rates::ergodic_upper(states, &sol.allocation, noise, budget)?;
    Ok(Solution {
        allocation: sol.allocation,
        rate,
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Lower(Vec<Mode>),
    Upper,
    DeafCooperative,
    DeafInterference,
}

/// Decision variables in normalized coordinates.
#[derive(Debug, Clone, PartialEq)]
struct Point {
    u1: Vec<f64>,
    u2: Vec<f64>,
    th: Vec<f64>,
}

impl Point {
    fn dot(&self, o: &Point) -> f64 {
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        d(&self.u1, &o.u1) + d(&self.u2, &o.u2) + d(&self.th, &o.th)
    }

    fn sub(&self, o: &Point) -> Point {
        let s = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect();
        Point {
            u1: s(&self.u1, &o.u1),
            u2: s(&self.u2, &o.u2),
            th: s(&self.th, &o.th),
        }
    }

    fn axpy(&self, t: f64, d: &Point) -> Point {
        let s = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + t * y).collect();
        Point {
            u1: s(&self.u1, &d.u1),
            u2: s(&self.u2, &d.u2),
            th: s(&self.th, &d.th),
        }
    }
}

struct Model<'a> {
    subs: &'a [SubchannelParams],
    b1: f64,
    b2: f64,
    bw: Bandwidth,
    kind: Kind,
}

impl<'a> Model<'a> {
    fn new(problem: &Problem<'a>, objective: &Objective) -> Result<Self> {
        let l = problem.subchannels.len();
        let kind = match objective {
            Objective::Lower(m) => {
                if m.len() != l {
                    return Err(Error::shape(format!("{l} subchannels but {} modes", m.len())));
                }
                Kind::Lower(m.0.clone())
            }
            Objective::Upper => Kind::Upper,
            Objective::DeafCooperative => Kind::DeafCooperative,
            Objective::DeafInterference => Kind::DeafInterference,
        };
        Ok(Model {
            subs: problem.subchannels,
            b1: problem.budget.p1_total,
            b2: problem.budget.p2_total,
            bw: problem.bandwidth,
            kind,
        })
    }

    fn len(&self) -> usize {
        self.subs.len()
    }

    fn has_theta(&self, l: usize) -> bool {
        match &self.kind {
            Kind::Lower(m) => m[l] == Mode::DecodeForward,
            Kind::Upper => true,
            _ => false,
        }
    }

    fn theta_box(&self) -> (f64, f64) {
        match self.kind {
            Kind::Upper => (-1.0, 1.0),
            _ => (0.0, 1.0),
        }
    }

    fn theta_default(&self) -> f64 {
        match self.kind {
            Kind::Upper => 0.0,
            _ => 1.0,
        }
    }

    fn is_min_form(&self) -> bool {
        matches!(self.kind, Kind::Lower(_))
    }

    fn group(&self, l: usize) -> usize {
        match &self.kind {
            Kind::Lower(m) => rates::group_index(m[l]),
            _ => 0,
        }
    }

    /// Raw (unclamped) term pair of subchannel `l` at physical powers.
    fn raw_terms(&self, l: usize, p1: f64, p2: f64, th: f64) -> [f64; 2] {
        let s = &self.subs[l];
        match &self.kind {
            Kind::Lower(m) => {
                let t = match m[l] {
                    Mode::DecodeForward => df_terms(s, p1, p2, th, self.bw),
                    Mode::NoiseForward => nf_terms(s, p1, p2, self.bw),
                };
                [t.first, t.second]
            }
            Kind::Upper => {
                let v = upper_term(s, p1, p2, th, self.bw);
                [v, v]
            }
            Kind::DeafCooperative => {
                let v = deaf_relay_terms(s, p1, p2, self.bw).first;
                [v, v]
            }
            Kind::DeafInterference => {
                let v = deaf_relay_terms(s, p1, p2, self.bw).second;
                [v, v]
            }
        }
    }

    /// Term values and their gradients with respect to `(P1, P2, theta)`.
    fn term_grads(&self, l: usize, p1: f64, p2: f64, th: f64) -> ([f64; 2], [[f64; 3]; 2]) {
        let s = &self.subs[l];
        let k = self.bw.factor() / (2.0 * std::f64::consts::LN_2);
        // d/dx of factor * C(x / var) is k / (var + x)
        let dc = |x: f64, var: f64| if var.is_infinite() { 0.0 } else { k / (var + x) };
        let p1f = p1.max(GRAD_FLOOR);
        let p2f = p2.max(GRAD_FLOOR);
        let vals = self.raw_terms(l, p1, p2, th);
        match &self.kind {
            Kind::Lower(m) if m[l] == Mode::DecodeForward => {
                let coh = (1.0 - th).max(GRAD_FLOOR);
                let q = (coh * p1f * p2f).sqrt();
                let (r1, r2) = (s.rho1.sqrt(), s.rho2.sqrt());
                let s_d = p1 + s.rho1 * p2 + 2.0 * r1 * (1.0 - th).max(0.0).sqrt() * (p1 * p2).sqrt();
                let s_e = p1 + s.rho2 * p2 + 2.0 * r2 * (1.0 - th).max(0.0).sqrt() * (p1 * p2).sqrt();
                let gd = [1.0 + r1 * q / p1f, s.rho1 + r1 * q / p2f, -r1 * q / coh];
                let ge = [1.0 + r2 * q / p1f, s.rho2 + r2 * q / p2f, -r2 * q / coh];
                let kd = dc(s_d, s.sigma_sq);
                let ke = dc(s_e, s.sigma2_sq);
                let kr = dc(th * p1, s.sigma1_sq);
                let g1 = [kd * gd[0] - ke * ge[0], kd * gd[1] - ke * ge[1], kd * gd[2] - ke * ge[2]];
                let g2 = [kr * th - ke * ge[0], -ke * ge[1], kr * p1 - ke * ge[2]];
                (vals, [g1, g2])
            }
            Kind::Lower(_) => {
                let kd = dc(p1 + s.rho1 * p2, s.sigma_sq);
                let ke = dc(p1 + s.rho2 * p2, s.sigma2_sq);
                let g1 = [kd - ke, kd * s.rho1 - ke * s.rho2, 0.0];
                let k1 = dc(p1, s.sigma_sq);
                let k2 = dc(s.rho2 * p2, s.sigma2_sq);
                let g2 = [k1 - ke, k2 * s.rho2 - ke * s.rho2, 0.0];
                (vals, [g1, g2])
            }
            Kind::Upper => {
                let q = (p1f * p2f).sqrt();
                let (r1, r2) = (s.rho1.sqrt(), s.rho2.sqrt());
                let s_d = (p1 + s.rho1 * p2 + 2.0 * th * r1 * (p1 * p2).sqrt()).max(0.0);
                let s_e = (p1 + s.rho2 * p2 + 2.0 * th * r2 * (p1 * p2).sqrt()).max(0.0);
                let kd = dc(s_d, s.sigma_sq);
                let ke = dc(s_e, s.sigma2_sq);
                let g = [
                    kd * (1.0 + th * r1 * q / p1f) - ke * (1.0 + th * r2 * q / p1f),
                    kd * (s.rho1 + th * r1 * q / p2f) - ke * (s.rho2 + th * r2 * q / p2f),
                    kd * 2.0 * r1 * q - ke * 2.0 * r2 * q,
                ];
                (vals, [g, g])
            }
            Kind::DeafCooperative => {
                let kd = dc(p1 + s.rho1 * p2, s.sigma_sq);
                let ke = dc(p1 + s.rho2 * p2, s.sigma2_sq);
                let g = [kd - ke, kd * s.rho1 - ke * s.rho2, 0.0];
                (vals, [g, g])
            }
            Kind::DeafInterference => {
                let masked = s.sigma2_sq + s.rho2 * p2;
                let k1 = dc(p1, s.sigma_sq);
                let km = dc(p1, masked);
                // d/dP2 of -k ln(1 + P1/D) with D = sigma2^2 + rho2 P2
                let g = [k1 - km, km * p1 * s.rho2 / masked, 0.0];
                (vals, [g, g])
            }
        }
    }

    fn physical(&self, p: &Point, l: usize) -> (f64, f64, f64) {
        (p.u1[l] * self.b1, p.u2[l] * self.b2, p.th[l])
    }

    fn exact(&self, p: &Point) -> f64 {
        let terms: Vec<[f64; 2]> = (0..self.len())
            .map(|l| {
                let (p1, p2, th) = self.physical(p, l);
                self.raw_terms(l, p1, p2, th)
            })
            .collect();
        self.aggregate(&self.sums(&terms))
    }

    fn sums(&self, terms: &[[f64; 2]]) -> [[f64; 2]; 2] {
        let mut sums = [[0.0; 2]; 2];
        let clamp = self.is_min_form();
        for (l, t) in terms.iter().enumerate() {
            let g = self.group(l);
            for j in 0..2 {
                sums[g][j] += if clamp { pos(t[j]) } else { t[j] };
            }
        }
        sums
    }

    fn aggregate(&self, sums: &[[f64; 2]; 2]) -> f64 {
        if self.is_min_form() {
            sums[0][0].min(sums[0][1]) + sums[1][0].min(sums[1][1])
        } else {
            sums[0][0]
        }
    }

    /// Smoothed value and gradient in physical coordinates.
    fn smooth_physical(&self, p1: &[f64], p2: &[f64], th: &[f64], tau: f64) -> (f64, Vec<f64>, Vec<f64>, Vec<f64>) {
        let l = self.len();
        let mut tg = Vec::with_capacity(l);
        for i in 0..l {
            tg.push(self.term_grads(i, p1[i], p2[i], th[i]));
        }
        let mut gp1 = vec![0.0; l];
        let mut gp2 = vec![0.0; l];
        let mut gth = vec![0.0; l];
        if !self.is_min_form() {
            let mut v = 0.0;
            for (i, (vals, g)) in tg.iter().enumerate() {
                v += vals[0];
                gp1[i] = g[0][0];
                gp2[i] = g[0][1];
                gth[i] = if self.has_theta(i) { g[0][2] } else { 0.0 };
            }
            return (v, gp1, gp2, gth);
        }
        let mut sums = [[0.0; 2]; 2];
        let mut members = [0usize; 2];
        for (i, (vals, _)) in tg.iter().enumerate() {
            let g = self.group(i);
            members[g] += 1;
            for j in 0..2 {
                sums[g][j] += softplus(vals[j], tau);
            }
        }
        let mut weights = [[0.0; 2]; 2];
        let mut v = 0.0;
        for g in 0..2 {
            if members[g] == 0 {
                continue;
            }
            v += softmin(sums[g][0], sums[g][1], tau);
            let w = sigmoid((sums[g][1] - sums[g][0]) / tau);
            weights[g] = [w, 1.0 - w];
        }
        for (i, (vals, g)) in tg.iter().enumerate() {
            let grp = self.group(i);
            for j in 0..2 {
                let w = weights[grp][j] * sigmoid(vals[j] / tau);
                gp1[i] += w * g[j][0];
                gp2[i] += w * g[j][1];
                if self.has_theta(i) {
                    gth[i] += w * g[j][2];
                }
            }
        }
        (v, gp1, gp2, gth)
    }

    fn smooth(&self, p: &Point, tau: f64) -> (f64, Point) {
        let l = self.len();
        let p1: Vec<f64> = (0..l).map(|i| p.u1[i] * self.b1).collect();
        let p2: Vec<f64> = (0..l).map(|i| p.u2[i] * self.b2).collect();
        let (v, g1, g2, mut gt) = self.smooth_physical(&p1, &p2, &p.th, tau);
        if matches!(self.kind, Kind::Upper) {
            // psi follows the powers, see `project`
            gt.iter_mut().for_each(|g| *g = 0.0);
        }
        (
            v,
            Point {
                u1: g1.into_iter().map(|g| g * self.b1).collect(),
                u2: g2.into_iter().map(|g| g * self.b2).collect(),
                th: gt,
            },
        )
    }

    fn project(&self, p: &mut Point) {
        project_capped_simplex(&mut p.u1, 1.0);
        project_capped_simplex(&mut p.u2, 1.0);
        let (lo, hi) = self.theta_box();
        for (i, t) in p.th.iter_mut().enumerate() {
            *t = match self.kind {
                Kind::Upper => best_correlation(&self.subs[i], p.u1[i] * self.b1, p.u2[i] * self.b2),
                _ if self.has_theta(i) => t.clamp(lo, hi),
                _ => self.theta_default(),
            };
        }
    }

    fn point_of(&self, a: &Allocation) -> Point {
        let norm = |v: &[f64], b: f64| v.iter().map(|&x| if b > 0.0 { x / b } else { 0.0 }).collect();
        let th = match self.kind {
            Kind::Upper => a.psi.clone(),
            _ => a.alpha.clone(),
        };
        let mut p = Point {
            u1: norm(&a.p1, self.b1),
            u2: norm(&a.p2, self.b2),
            th,
        };
        self.project(&mut p);
        p
    }

    fn to_allocation(&self, p: &Point) -> Allocation {
        let l = self.len();
        let mut a = Allocation::zeros(l);
        for i in 0..l {
            a.p1[i] = p.u1[i] * self.b1;
            a.p2[i] = p.u2[i] * self.b2;
        }
        // sums of products can exceed the budget by an ulp
        rescale_to_budget(&mut a.p1, self.b1);
        rescale_to_budget(&mut a.p2, self.b2);
        match self.kind {
            Kind::Upper => a.psi = p.th.clone(),
            Kind::Lower(_) => a.alpha = p.th.clone(),
            _ => {}
        }
        a
    }

    fn point_with(&self, u1: Vec<f64>, u2: Vec<f64>, theta: f64) -> Point {
        let l = self.len();
        let th = (0..l)
            .map(|i| if self.has_theta(i) { theta } else { self.theta_default() })
            .collect();
        let mut p = Point { u1, u2, th };
        self.project(&mut p);
        p
    }

    /// Uniform splits with each `theta` setting, then every placement of the
    /// whole source and relay budgets on single subchannels, with the relay
    /// also tried silent.
    fn deterministic_starts(&self) -> Vec<Point> {
        let l = self.len();
        let uni = vec![1.0 / l as f64; l];
        let thetas: &[f64] = match self.kind {
            Kind::Upper => &[0.0],
            _ => &[1.0, 0.5, 0.0],
        };
        let mut v: Vec<Point> = thetas
            .iter()
            .map(|&t| self.point_with(uni.clone(), uni.clone(), t))
            .collect();
        let unit = |i: usize| {
            let mut e = vec![0.0; l];
            e[i] = 1.0;
            e
        };
        for &t in thetas {
            for i in 0..l {
                v.push(self.point_with(unit(i), vec![0.0; l], t));
                v.push(self.point_with(unit(i), uni.clone(), t));
                if l > 1 {
                    for j in 0..l {
                        v.push(self.point_with(unit(i), unit(j), t));
                    }
                }
            }
        }
        if matches!(self.kind, Kind::Upper) && self.b2 > 0.0 {
            // relay power that cancels the source at the eavesdropper when psi = -1
            let null = |u1: Vec<f64>| {
                let mut u2: Vec<f64> = (0..l).map(|i| u1[i] * self.b1 / (self.subs[i].rho2 * self.b2)).collect();
                let total: f64 = u2.iter().sum();
                if total > 1.0 {
                    u2.iter_mut().for_each(|x| *x /= total);
                }
                self.point_with(u1, u2, -1.0)
            };
            v.push(null(uni.clone()));
            if l > 1 {
                for i in 0..l {
                    v.push(null(unit(i)));
                }
            }
        }
        v
    }

    fn random_start(&self, rng: &mut ChaCha8Rng) -> Point {
        let l = self.len();
        let simplex = |rng: &mut ChaCha8Rng| {
            let w: Vec<f64> = (0..l).map(|_| Exp1.sample(rng)).collect();
            let s: f64 = w.iter().sum::<f64>().max(f64::MIN_POSITIVE);
            let scale = if rng.random_bool(0.5) { 1.0 } else { rng.random_range(0.2..1.0) };
            w.into_iter().map(|x| scale * x / s).collect::<Vec<f64>>()
        };
        let u1 = simplex(rng);
        let u2 = simplex(rng);
        let (lo, hi) = self.theta_box();
        let th = (0..l)
            .map(|i| {
                if self.has_theta(i) {
                    rng.random_range(lo..=hi)
                } else {
                    self.theta_default()
                }
            })
            .collect();
        let mut p = Point { u1, u2, th };
        self.project(&mut p);
        p
    }

    /// Projected gradient ascent with Armijo backtracking, annealed over the
    /// temperature schedule.
    fn ascend(&self, mut x: Point, cfg: &OptimizerConfig) -> Point {
        let schedule: &[f64] = if self.is_min_form() { &TAU_SCHEDULE } else { &TAU_SCHEDULE[..1] };
        for &tau in schedule {
            let mut step = cfg.step_init;
            let (mut f, mut g) = self.smooth(&x, tau);
            for _ in 0..cfg.max_iters {
                let mut moved = false;
                while step > 1e-16 {
                    let mut y = x.axpy(step, &g);
                    self.project(&mut y);
                    let d = y.sub(&x);
                    let decrease = g.dot(&d);
                    if decrease <= 0.0 {
                        break;
                    }
                    let (fy, gy) = self.smooth(&y, tau);
                    if fy >= f + 1e-4 * decrease {
                        let gain = fy - f;
                        x = y;
                        f = fy;
                        g = gy;
                        step = (step * 2.0).min(1e6);
                        moved = gain > cfg.tol;
                        break;
                    }
                    step *= 0.5;
                }
                if !moved {
                    break;
                }
            }
        }
        x
    }

    /// Coordinate and pairwise-transfer search on the exact objective.
    fn polish(&self, x: Point, cfg: &OptimizerConfig) -> Point {
        let mut t = Tracker::new(self, x);
        let mut delta = 0.05;
        let mut sweeps = 0;
        while delta > 1e-10 && sweeps < 400 {
            sweeps += 1;
            t.resync(self);
            if !t.sweep(self, delta, cfg.tol.min(1e-13)) {
                delta *= 0.5;
            }
        }
        t.point
    }
}

/// Exact-objective state with cached terms for cheap local moves.
struct Tracker {
    point: Point,
    terms: Vec<[f64; 2]>,
    sums: [[f64; 2]; 2],
    value: f64,
}

impl Tracker {
    fn new(m: &Model, point: Point) -> Self {
        let mut t = Tracker {
            point,
            terms: Vec::new(),
            sums: [[0.0; 2]; 2],
            value: 0.0,
        };
        t.resync(m);
        t
    }

    fn resync(&mut self, m: &Model) {
        self.terms = (0..m.len())
            .map(|l| {
                let (p1, p2, th) = m.physical(&self.point, l);
                m.raw_terms(l, p1, p2, th)
            })
            .collect();
        self.sums = m.sums(&self.terms);
        self.value = m.aggregate(&self.sums);
    }

    fn contribution(m: &Model, t: [f64; 2]) -> [f64; 2] {
        if m.is_min_form() {
            [pos(t[0]), pos(t[1])]
        } else {
            t
        }
    }

    /// Tries new `(u1, u2, th)` values for up to two subchannels; keeps them
    /// if the objective improves by more than `eps`.
    fn attempt(&mut self, m: &Model, changes: &[(usize, f64, f64, f64)], eps: f64) -> bool {
        let mut sums = self.sums;
        let mut new_terms = [[0.0; 2]; 2];
        let mut changes = changes.to_vec();
        if matches!(m.kind, Kind::Upper) {
            for c in changes.iter_mut() {
                c.3 = best_correlation(&m.subs[c.0], c.1 * m.b1, c.2 * m.b2);
            }
        }
        for (k, &(l, u1, u2, th)) in changes.iter().enumerate() {
            let g = m.group(l);
            let old = Self::contribution(m, self.terms[l]);
            let t = m.raw_terms(l, u1 * m.b1, u2 * m.b2, th);
            let new = Self::contribution(m, t);
            sums[g][0] += new[0] - old[0];
            sums[g][1] += new[1] - old[1];
            new_terms[k] = t;
        }
        let v = m.aggregate(&sums);
        if v > self.value + eps {
            for (k, &(l, u1, u2, th)) in changes.iter().enumerate() {
                self.point.u1[l] = u1;
                self.point.u2[l] = u2;
                self.point.th[l] = th;
                self.terms[l] = new_terms[k];
            }
            self.sums = sums;
            self.value = v;
            true
        } else {
            false
        }
    }

    fn sweep(&mut self, m: &Model, delta: f64, eps: f64) -> bool {
        let l = m.len();
        let mut improved = false;
        for which in 0..2 {
            let budget = if which == 0 { m.b1 } else { m.b2 };
            if budget <= 0.0 {
                continue;
            }
            for i in 0..l {
                // single-coordinate moves within {u >= 0, sum u <= 1}
                let total: f64 = if which == 0 {
                    self.point.u1.iter().sum()
                } else {
                    self.point.u2.iter().sum()
                };
                let cur = self.coord(which, i);
                let up = delta.min((1.0 - total).max(0.0));
                if up > 0.0 {
                    improved |= self.attempt(m, &[self.with(which, i, cur + up)], eps);
                }
                let cur = self.coord(which, i);
                let down = delta.min(cur);
                if down > 0.0 {
                    improved |= self.attempt(m, &[self.with(which, i, cur - down)], eps);
                }
                // transfers into i
                for j in 0..l {
                    if j == i {
                        continue;
                    }
                    let from = self.coord(which, j);
                    let t = delta.min(from);
                    if t <= 0.0 {
                        continue;
                    }
                    let to = self.coord(which, i);
                    let a = self.with(which, i, to + t);
                    let b = self.with(which, j, from - t);
                    improved |= self.attempt(m, &[a, b], eps);
                }
            }
        }
        if m.b1 > 0.0 && m.b2 > 0.0 {
            improved |= self.ratio_moves(m, delta, eps);
        }
        let (lo, hi) = m.theta_box();
        for i in 0..l {
            if !m.has_theta(i) || matches!(m.kind, Kind::Upper) {
                continue;
            }
            for dir in [1.0, -1.0] {
                let th = (self.point.th[i] + dir * delta).clamp(lo, hi);
                if th != self.point.th[i] {
                    let c = (i, self.point.u1[i], self.point.u2[i], th);
                    improved |= self.attempt(m, &[c], eps);
                }
            }
        }
        improved
    }

    /// Moves that keep each touched subchannel's `P2/P1` ratio: scaling one
    /// subchannel, and shifting source or relay power between two.
    fn ratio_moves(&mut self, m: &Model, delta: f64, eps: f64) -> bool {
        let l = m.len();
        let mut improved = false;
        for i in 0..l {
            for f in [1.0 + delta, 1.0 - delta] {
                let (u1, u2) = (self.point.u1[i], self.point.u2[i]);
                if u1 <= 0.0 || u2 <= 0.0 {
                    continue;
                }
                let s1: f64 = self.point.u1.iter().sum::<f64>() + u1 * (f - 1.0);
                let s2: f64 = self.point.u2.iter().sum::<f64>() + u2 * (f - 1.0);
                if s1 <= 1.0 && s2 <= 1.0 {
                    improved |= self.attempt(m, &[(i, u1 * f, u2 * f, self.point.th[i])], eps);
                }
            }
            for lead in 0..2 {
                for j in 0..l {
                    if j != i {
                        improved |= self.ratio_transfer(m, lead, i, j, delta, eps);
                    }
                }
            }
        }
        improved
    }

    /// Shifts `delta` of power type `lead` from `j` to `i`; the other power
    /// type follows so that both ratios are unchanged.
    fn ratio_transfer(&mut self, m: &Model, lead: usize, i: usize, j: usize, delta: f64, eps: f64) -> bool {
        let (a, b) = if lead == 0 {
            (&self.point.u1, &self.point.u2)
        } else {
            (&self.point.u2, &self.point.u1)
        };
        let (ai, aj) = (a[i], a[j]);
        if aj <= 0.0 {
            return false;
        }
        let t = delta.min(aj);
        let bi = if ai > 0.0 { b[i] * (ai + t) / ai } else { b[i] };
        let bj = b[j] * (aj - t) / aj;
        if b.iter().sum::<f64>() + bi - b[i] + bj - b[j] > 1.0 {
            return false;
        }
        let (ci, cj) = if lead == 0 {
            ((i, ai + t, bi, self.point.th[i]), (j, aj - t, bj, self.point.th[j]))
        } else {
            ((i, bi, ai + t, self.point.th[i]), (j, bj, aj - t, self.point.th[j]))
        };
        self.attempt(m, &[ci, cj], eps)
    }

    fn coord(&self, which: usize, i: usize) -> f64 {
        if which == 0 {
            self.point.u1[i]
        } else {
            self.point.u2[i]
        }
    }

    fn with(&self, which: usize, i: usize, v: f64) -> (usize, f64, f64, f64) {
        let v = v.max(0.0);
        if which == 0 {
            (i, v, self.point.u2[i], self.point.th[i])
        } else {
            (i, self.point.u1[i], v, self.point.th[i])
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(x: f64, tau: f64) -> f64 {
    x.max(0.0) + tau * (-(x.abs()) / tau).exp().ln_1p()
}

#[inline]
fn softmin(a: f64, b: f64, tau: f64) -> f64 {
    a.min(b) - tau * (-((a - b).abs()) / tau).exp().ln_1p()
}

fn rescale_to_budget(v: &mut [f64], budget: f64) {
    let s: f64 = v.iter().sum();
    if s > budget && s > 0.0 {
        let f = budget / s;
        v.iter_mut().for_each(|x| *x *= f);
    }
}

/// Euclidean projection onto `{v >= 0, sum v <= budget}`.
pub fn project_capped_simplex(values: &mut [f64], budget: f64) {
    let budget = budget.max(0.0);
    for v in values.iter_mut() {
        if !(*v > 0.0) {
            *v = 0.0;
        }
    }
    let total: f64 = values.iter().sum();
    if total <= budget {
        return;
    }
    if budget == 0.0 {
        values.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    // projection onto the face sum v = budget
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut shift = 0.0;
    for (k, &s) in sorted.iter().enumerate() {
        cumulative += s;
        let t = (cumulative - budget) / (k + 1) as f64;
        if s - t > 0.0 {
            shift = t;
        } else {
            break;
        }
    }
    for v in values.iter_mut() {
        *v = (*v - shift).max(0.0);
    }
}

/// Projection of the power vectors onto their budgets and of `alpha`,
/// `psi` onto their boxes.
pub fn project_allocation(alloc: &mut Allocation, budget: &PowerBudget) {
    project_capped_simplex(&mut alloc.p1, budget.p1_total);
    project_capped_simplex(&mut alloc.p2, budget.p2_total);
    alloc.alpha.iter_mut().for_each(|a| *a = a.clamp(0.0, 1.0));
    alloc.psi.iter_mut().for_each(|p| *p = p.clamp(-1.0, 1.0));
}

/// Options of the brute-force grid maximizer.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOptions {
    /// Points per dimension on the first, full-range level.
    pub grid_points: usize,
    /// Points per dimension on each zoomed level; 0 disables refinement.
    pub refine_points: usize,
    pub max_levels: usize,
    /// Pins every `alpha`/`psi` coordinate to this value instead of gridding it.
    pub pin_theta: Option<f64>,
}

impl GridOptions {
    pub fn new(grid_points: usize) -> Self {
        GridOptions {
            grid_points,
            refine_points: 7,
            max_levels: 80,
            pin_theta: None,
        }
    }

    pub fn coarse_only(grid_points: usize) -> Self {
        GridOptions {
            refine_points: 0,
            ..Self::new(grid_points)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub rate: f64,
    pub allocation: Allocation,
    pub evaluations: u64,
    /// Grid spacing of the finest level, as a fraction of each variable's range.
    pub resolution: f64,
}

/// Brute-force maximizer for `L <= 2` subchannels.
///
/// Enumerates a uniform grid over every feasible `(P1_l, P2_l, theta_l)`,
/// where `theta` is `alpha` for the lower bound (on every subchannel, NF ones
/// included) or `psi` for the upper bound, then repeatedly re-grids a shrinking
/// box around each of the best few well-separated grid points. Values come straight from the [`crate::rates`]
/// term functions and share no code with the gradient optimizer.
pub fn grid_oracle(problem: &Problem, objective: &Objective, options: &GridOptions) -> Result<GridResult> {
    problem.validate()?;
    let l = problem.subchannels.len();
    if l > 2 {
        return Err(Error::Unsupported(format!("grid oracle handles at most 2 subchannels, got {l}")));
    }
    if options.grid_points < 3 {
        return Err(Error::domain("grid_points must be >= 3"));
    }
    if let Objective::Lower(m) = objective {
        if m.len() != l {
            return Err(Error::shape(format!("{l} subchannels but {} modes", m.len())));
        }
    }
    let (b1, b2) = (problem.budget.p1_total, problem.budget.p2_total);
    let theta_range = match objective {
        Objective::Lower(_) => Some((0.0, 1.0)),
        Objective::Upper => Some((-1.0, 1.0)),
        _ => None,
    };
    // variable layout: p1[0..l], p2[0..l], theta[0..l]
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for _ in 0..l {
        lo.push(0.0);
        hi.push(b1);
    }
    for _ in 0..l {
        lo.push(0.0);
        hi.push(b2);
    }
    if let Some((a, b)) = theta_range {
        for _ in 0..l {
            match options.pin_theta {
                Some(t) => {
                    lo.push(t.clamp(a, b));
                    hi.push(t.clamp(a, b));
                }
                None => {
                    lo.push(a);
                    hi.push(b);
                }
            }
        }
    }
    let (full_lo, full_hi) = (lo, hi);
    let (lo, hi) = (&full_lo, &full_hi);
    let dims = lo.len();

    let eval = |x: &[f64]| -> f64 {
        let p1 = &x[0..l];
        let p2 = &x[l..2 * l];
        if p1.iter().sum::<f64>() > b1 * (1.0 + 1e-12) || p2.iter().sum::<f64>() > b2 * (1.0 + 1e-12) {
            return f64::NEG_INFINITY;
        }
        let th = |i: usize| if dims > 2 * l { x[2 * l + i] } else { 0.0 };
        oracle_value(problem, objective, p1, p2, &(0..l).map(th).collect::<Vec<_>>())
    };

    let axes_of = |lo: &[f64], hi: &[f64], n: usize| -> Vec<Vec<f64>> {
        (0..dims)
            .map(|d| {
                if hi[d] <= lo[d] {
                    vec![lo[d]]
                } else {
                    (0..n).map(|k| lo[d] + (hi[d] - lo[d]) * k as f64 / (n - 1) as f64).collect()
                }
            })
            .collect()
    };
    let digits = |axes: &[Vec<f64>], mut idx: usize| -> Vec<usize> {
        axes.iter()
            .map(|a| {
                let k = idx % a.len();
                idx /= a.len();
                k
            })
            .collect()
    };
    let point = |axes: &[Vec<f64>], idx: usize| -> Vec<f64> {
        digits(axes, idx).iter().enumerate().map(|(d, &k)| axes[d][k]).collect()
    };

    // coarse level over the full box
    let n0 = options.grid_points;
    let axes = axes_of(lo, hi, n0);
    let total: usize = axes.iter().map(|a| a.len()).product();
    let mut scores: Vec<(f64, usize)> = (0..total).into_par_iter().map(|i| (eval(&point(&axes, i)), i)).collect();
    let mut evaluations = total as u64;
    scores.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

    // distinct local incumbents: no two within one grid step in every dimension
    let mut seeds: Vec<Vec<usize>> = Vec::new();
    for &(v, i) in &scores {
        if seeds.len() >= ZOOM_SEEDS || v == f64::NEG_INFINITY {
            break;
        }
        let k = digits(&axes, i);
        let near = seeds
            .iter()
            .any(|s| s.iter().zip(&k).all(|(a, b)| a.abs_diff(*b) <= 1));
        if !near {
            seeds.push(k);
        }
    }
    drop(scores);

    let coarse_resolution = (0..dims)
        .filter(|&d| full_hi[d] > full_lo[d])
        .map(|_| 1.0 / (n0 - 1) as f64)
        .fold(0.0, f64::max);
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    for seed in &seeds {
        let mut x: Vec<f64> = seed.iter().enumerate().map(|(d, &k)| axes[d][k]).collect();
        let mut v = eval(&x);
        let (mut lo, mut hi) = (full_lo.clone(), full_hi.clone());
        let mut n = n0;
        let mut resolution = coarse_resolution;
        for _ in 0..options.max_levels {
            if options.refine_points < 3 {
                break;
            }
            // box of two previous steps around the incumbent
            let mut widest = 0.0f64;
            for d in 0..dims {
                let full = full_hi[d] - full_lo[d];
                let half = 2.0 * (hi[d] - lo[d]) / (n - 1) as f64;
                lo[d] = (x[d] - half).max(full_lo[d]);
                hi[d] = (x[d] + half).min(full_hi[d]);
                if full > 0.0 {
                    widest = widest.max((hi[d] - lo[d]) / full);
                }
            }
            if widest < 1e-11 {
                break;
            }
            n = options.refine_points;
            let axes = axes_of(&lo, &hi, n);
            let total: usize = axes.iter().map(|a| a.len()).product();
            let (bv, bi) = (0..total)
                .into_par_iter()
                .map(|i| (eval(&point(&axes, i)), i))
                .reduce(
                    || (f64::NEG_INFINITY, usize::MAX),
                    |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
                );
            evaluations += total as u64;
            if bv > v {
                v = bv;
                x = point(&axes, bi);
            }
            resolution = (0..dims)
                .filter(|&d| full_hi[d] > full_lo[d])
                .map(|d| (hi[d] - lo[d]) / (full_hi[d] - full_lo[d]) / (n - 1) as f64)
                .fold(0.0, f64::max);
        }
        if best.as_ref().is_none_or(|b| v > b.0) {
            best = Some((v, x, resolution));
        }
    }
    let (best_v, best_x, resolution) = best.unwrap_or_else(|| (eval(&full_lo), full_lo.clone(), coarse_resolution));

    let mut allocation = Allocation::zeros(l);
    for i in 0..l {
        allocation.p1[i] = best_x[i];
        allocation.p2[i] = best_x[l + i];
        if dims > 2 * l {
            match objective {
                Objective::Upper => allocation.psi[i] = best_x[2 * l + i],
                _ => allocation.alpha[i] = best_x[2 * l + i],
            }
        }
    }
    Ok(GridResult {
        rate: best_v,
        allocation,
        evaluations,
        resolution,
    })
}

fn oracle_value(problem: &Problem, objective: &Objective, p1: &[f64], p2: &[f64], th: &[f64]) -> f64 {
    let bw = problem.bandwidth;
    let subs = problem.subchannels;
    match objective {
        Objective::Lower(modes) => {
            let (mut a1, mut a2, mut n1, mut n2) = (0.0, 0.0, 0.0, 0.0);
            for (i, s) in subs.iter().enumerate() {
                match modes.0[i] {
                    Mode::DecodeForward => {
                        let t = df_terms(s, p1[i], p2[i], th[i], bw).clamped();
                        a1 += t.first;
                        a2 += t.second;
                    }
                    Mode::NoiseForward => {
                        let t = nf_terms(s, p1[i], p2[i], bw).clamped();
                        n1 += t.first;
                        n2 += t.second;
                    }
                }
            }
            f64::min(a1, a2) + f64::min(n1, n2)
        }
        Objective::Upper => subs
            .iter()
            .enumerate()
            .map(|(i, s)| upper_term(s, p1[i], p2[i], th[i], bw))
            .sum(),
        Objective::DeafCooperative => subs
            .iter()
            .enumerate()
            .map(|(i, s)| deaf_relay_terms(s, p1[i], p2[i], bw).first)
            .sum(),
        Objective::DeafInterference => subs
            .iter()
            .enumerate()
            .map(|(i, s)| deaf_relay_terms(s, p1[i], p2[i], bw).second)
            .sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sub(sigma_sq: f64, sigma1_sq: f64, sigma2_sq: f64, rho1: f64, rho2: f64) -> SubchannelParams {
        SubchannelParams::new(sigma_sq, sigma1_sq, sigma2_sq, rho1, rho2).unwrap()
    }

    fn fast() -> OptimizerConfig {
        OptimizerConfig {
            restarts: 8,
            ..OptimizerConfig::default()
        }
    }

    #[test]
    fn projection_examples() {
        let mut v = vec![0.2, 0.3];
        project_capped_simplex(&mut v, 1.0);
        assert_eq!(v, vec![0.2, 0.3]);

        let mut v = vec![3.0, 3.0];
        project_capped_simplex(&mut v, 2.0);
        assert_abs_diff_eq!(v[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 1.0, epsilon = 1e-15);

        let mut v = vec![3.0, -1.0, 0.5];
        project_capped_simplex(&mut v, 0.0);
        assert_eq!(v, vec![0.0, 0.0, 0.0]);

        let mut v = vec![2.0, 0.1, -4.0];
        project_capped_simplex(&mut v, 1.0);
        assert_abs_diff_eq!(v[0], 1.0, epsilon = 1e-15);
        assert_eq!(&v[1..], &[0.0, 0.0]);

        let mut a = Allocation {
            p1: vec![5.0, 5.0],
            p2: vec![0.5, 0.1],
            alpha: vec![1.5, -0.2],
            psi: vec![-3.0, 0.4],
        };
        project_allocation(&mut a, &PowerBudget::new(4.0, 1.0).unwrap());
        assert_eq!(a.p1, vec![2.0, 2.0]);
        assert_eq!(a.p2, vec![0.5, 0.1]);
        assert_eq!(a.alpha, vec![1.0, 0.0]);
        assert_eq!(a.psi, vec![-1.0, 0.4]);
    }

    #[test]
    fn single_nf_subchannel_beats_full_power_value() {
        let subs = [sub(1.0, 1.0, 4.0, 1.0, 1.0)];
        let p = Problem::new(&subs, PowerBudget::new(3.0, 1.0).unwrap());
        let sol = optimize_lower(&p, &ModePartition::uniform(1, Mode::NoiseForward), &fast()).unwrap();
        assert!(sol.rate >= 0.5 * 2.5f64.log2() - 1e-12, "{}", sol.rate);
        sol.allocation.validate(1, &p.budget, 1.0).unwrap();
    }

    #[test]
    fn zero_budgets_give_zero() {
        let subs = [sub(1.0, 0.3, 4.0, 1.0, 1.0), sub(2.0, 1.0, 3.0, 0.5, 2.0)];
        let p = Problem::new(&subs, PowerBudget::new(0.0, 0.0).unwrap());
        for modes in [
            ModePartition::uniform(2, Mode::NoiseForward),
            ModePartition::uniform(2, Mode::DecodeForward),
        ] {
            let sol = optimize_lower(&p, &modes, &fast()).unwrap();
            assert_eq!(sol.rate, 0.0);
            assert!(sol.allocation.p1.iter().chain(&sol.allocation.p2).all(|&x| x == 0.0));
        }
        assert_eq!(optimize_upper(&p, &fast()).unwrap().rate, 0.0);
    }

    #[test]
    fn upper_single_subchannel_reaches_full_correlation_value() {
        let subs = [sub(1.0, 1.0, 4.0, 1.0, 1.0)];
        let p = Problem::new(&subs, PowerBudget::new(3.0, 1.0).unwrap());
        let sol = optimize_upper(&p, &fast()).unwrap();
        let s = 4.0 + 2.0 * 3f64.sqrt();
        let at_psi_one = 0.5 * ((1.0 + s) / (1.0 + s / 4.0)).log2();
        assert!(sol.rate >= at_psi_one - 1e-12, "{} < {at_psi_one}", sol.rate);
    }

    #[test]
    fn symmetric_channels_are_flat_zero() {
        let subs = [sub(1.5, 1.0, 1.5, 0.8, 0.8), sub(0.5, 1.0, 0.5, 2.0, 2.0)];
        let p = Problem::new(&subs, PowerBudget::new(10.0, 5.0).unwrap());
        let up = optimize_upper(&p, &fast()).unwrap();
        assert!(up.rate.abs() <= 1e-9, "{}", up.rate);
        let deaf = optimize_deaf_relay(&p, &fast()).unwrap();
        assert!(deaf.capacity.abs() <= 1e-9);
    }

    #[test]
    fn deaf_relay_without_relay_power_is_wiretap() {
        let subs = [sub(1.0, f64::INFINITY, 3.0, 1.0, 2.0), sub(2.0, f64::INFINITY, 2.5, 0.5, 1.0)];
        let p = Problem::new(&subs, PowerBudget::new(6.0, 0.0).unwrap());
        let cfg = fast();
        let deaf = optimize_deaf_relay(&p, &cfg).unwrap();
        let wiretap = grid_oracle(&p, &Objective::DeafCooperative, &GridOptions::new(41)).unwrap();
        assert_abs_diff_eq!(deaf.cooperative.rate, wiretap.rate, epsilon = 1e-6);
        assert_abs_diff_eq!(deaf.interference.rate, wiretap.rate, epsilon = 1e-6);
        assert_abs_diff_eq!(deaf.capacity, wiretap.rate, epsilon = 1e-6);
    }

    #[test]
    fn deaf_relay_matches_all_nf_on_reference_channel() {
        let subs = [sub(1.0, f64::INFINITY, 4.0, 1.0, 1.0)];
        let p = Problem::new(&subs, PowerBudget::new(3.0, 1.0).unwrap());
        let deaf = optimize_deaf_relay(&p, &fast()).unwrap();
        assert_abs_diff_eq!(deaf.capacity, deaf.all_nf_lower.rate, epsilon = 1e-4);
    }

    #[test]
    fn grid_oracle_basics() {
        let subs = [sub(1.0, 1.0, 4.0, 1.0, 1.0)];
        let zero = Problem::new(&subs, PowerBudget::new(0.0, 0.0).unwrap());
        let g = grid_oracle(&zero, &Objective::Upper, &GridOptions::new(3)).unwrap();
        assert_eq!(g.rate, 0.0);

        let three = [subs[0]; 3];
        let p = Problem::new(&three, PowerBudget::new(1.0, 1.0).unwrap());
        assert!(matches!(
            grid_oracle(&p, &Objective::Upper, &GridOptions::new(3)),
            Err(Error::Unsupported(_))
        ));

        // alpha is inert on NF subchannels
        let p = Problem::new(&subs, PowerBudget::new(3.0, 1.0).unwrap());
        let nf = Objective::Lower(ModePartition::uniform(1, Mode::NoiseForward));
        let free = grid_oracle(&p, &nf, &GridOptions::coarse_only(21)).unwrap();
        for pin in [0.0, 0.37, 1.0] {
            let pinned = grid_oracle(
                &p,
                &nf,
                &GridOptions {
                    pin_theta: Some(pin),
                    ..GridOptions::coarse_only(21)
                },
            )
            .unwrap();
            assert_eq!(free.rate.to_bits(), pinned.rate.to_bits());
        }
    }

    #[test]
    fn grid_and_solver_agree_single_nf() {
        let subs = [sub(1.0, 1.0, 4.0, 1.0, 1.0)];
        let p = Problem::new(&subs, PowerBudget::new(3.0, 1.0).unwrap());
        let nf = ModePartition::uniform(1, Mode::NoiseForward);
        let g = grid_oracle(&p, &Objective::Lower(nf.clone()), &GridOptions::new(101)).unwrap();
        let s = optimize_lower(&p, &nf, &fast()).unwrap();
        assert!((g.rate - s.rate).abs() <= 1e-3, "{} vs {}", g.rate, s.rate);
    }

    #[test]
    fn determinism() {
        let subs = [sub(1.0, 0.4, 2.0, 1.3, 0.6), sub(0.7, 2.0, 1.1, 0.4, 1.9), sub(1.2, 0.9, 0.8, 2.5, 0.3)];
        let p = Problem::new(&subs, PowerBudget::new(7.0, 3.0).unwrap());
        let modes = ModePartition(vec![Mode::DecodeForward, Mode::NoiseForward, Mode::DecodeForward]);
        let cfg = OptimizerConfig {
            seed: 99,
            ..fast()
        };
        let a = optimize_lower(&p, &modes, &cfg).unwrap();
        let b = optimize_lower(&p, &modes, &cfg).unwrap();
        assert_eq!(a.rate.to_bits(), b.rate.to_bits());
        assert_eq!(a.allocation, b.allocation);
    }

    #[test]
    fn config_validation() {
        let bad = [
            OptimizerConfig { restarts: 0, ..Default::default() },
            OptimizerConfig { tol: 0.0, ..Default::default() },
            OptimizerConfig { grid_points: 2, ..Default::default() },
            OptimizerConfig { step_init: -1.0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
        let subs: [SubchannelParams; 0] = [];
        let p = Problem::new(&subs, PowerBudget::new(1.0, 1.0).unwrap());
        assert!(matches!(optimize_upper(&p, &fast()), Err(Error::Shape(_))));
    }

    #[test]
    fn smoothed_gradient_matches_central_differences() {
        let subs = [sub(1.0, 0.5, 2.0, 1.3, 0.6), sub(0.7, 2.0, 1.1, 0.4, 1.9)];
        let p = Problem::new(&subs, PowerBudget::new(8.0, 4.0).unwrap());
        let alloc = Allocation {
            p1: vec![2.0, 3.0],
            p2: vec![1.0, 1.5],
            alpha: vec![0.4, 0.7],
            psi: vec![0.3, -0.5],
        };
        let objectives = [
            Objective::Lower(ModePartition(vec![Mode::DecodeForward, Mode::NoiseForward])),
            Objective::Upper,
            Objective::DeafCooperative,
            Objective::DeafInterference,
        ];
        for obj in &objectives {
            let (_, g) = smoothed_objective(&p, obj, &alloc, 0.1).unwrap();
            let h = 1e-6;
            let f = |a: &Allocation| smoothed_objective(&p, obj, a, 0.1).unwrap().0;
            for i in 0..2 {
                for var in 0..3 {
                    let shifted = |dx: f64| {
                        let mut a = alloc.clone();
                        match (var, obj) {
                            (0, _) => a.p1[i] += dx,
                            (1, _) => a.p2[i] += dx,
                            (_, Objective::Upper) => a.psi[i] += dx,
                            _ => a.alpha[i] += dx,
                        }
                        a
                    };
                    let (plus, minus) = (shifted(h), shifted(-h));
                    let fd = (f(&plus) - f(&minus)) / (2.0 * h);
                    let an = [g.p1[i], g.p2[i], g.theta[i]][var];
                    assert!((fd - an).abs() <= 1e-6 * (1.0 + fd.abs()), "{obj:?} sub {i} var {var}: {fd} vs {an}");
                }
            }
        }
    }
}
