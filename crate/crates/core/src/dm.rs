//! Finite-alphabet evaluation of the discrete memoryless rate-equivocation
//! bounds.
//!
//! Every quantity is computed exactly from the joint law of
//! `(U, V1, V2, X1, X2, Y, Y1, Y2)` on one subchannel; subchannels are
//! independent, so sums over subchannels are sums of per-subchannel
//! information terms. Alphabets are limited to four symbols.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::partition_seed;
use crate::error::{Error, Result};
use crate::rates::{Mode, ModePartition};

/// Largest alphabet or auxiliary cardinality accepted.
pub const MAX_ALPHABET: usize = 4;
/// Tolerance on normalization of probability tables.
pub const NORM_TOL: f64 = 1e-12;
/// Tolerance on Markov-chain and factorization checks.
pub const STRUCTURE_TOL: f64 = 1e-10;

const U: usize = 0;
const V1: usize = 1;
const V2: usize = 2;
const Y: usize = 5;
const Y1: usize = 6;
const Y2: usize = 7;

/// `I(A;B)` in bits of a joint table `p[a][b]`.
pub fn mutual_information(joint: &[Vec<f64>]) -> Result<f64> {
    check_table(joint.iter().flatten().copied())?;
    let cols = joint.first().map_or(0, |r| r.len());
    if joint.iter().any(|r| r.len() != cols) {
        return Err(Error::shape("ragged joint table"));
    }
    let pa: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let pb: Vec<f64> = (0..cols).map(|j| joint.iter().map(|r| r[j]).sum()).collect();
    let mut mi = 0.0;
    for (i, row) in joint.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            if p > 0.0 {
                mi += p * (p / (pa[i] * pb[j])).log2();
            }
        }
    }
    Ok(mi.max(0.0))
}

/// `I(A;B|C)` in bits of a joint table `p[c][a][b]`, as the `p(c)`-weighted
/// average of the per-slice mutual informations.
pub fn conditional_mutual_information(joint: &[Vec<Vec<f64>>]) -> Result<f64> {
    check_table(joint.iter().flatten().flatten().copied())?;
    let mut total = 0.0;
    for slice in joint {
        let pc: f64 = slice.iter().flatten().sum();
        if pc <= 0.0 {
            continue;
        }
        let normalized: Vec<Vec<f64>> = slice.iter().map(|r| r.iter().map(|p| p / pc).collect()).collect();
        total += pc * mutual_information_unchecked(&normalized);
    }
    Ok(total)
}

fn mutual_information_unchecked(joint: &[Vec<f64>]) -> f64 {
    let cols = joint.first().map_or(0, |r| r.len());
    let pa: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let pb: Vec<f64> = (0..cols).map(|j| joint.iter().map(|r| r[j]).sum()).collect();
    let mut mi = 0.0;
    for (i, row) in joint.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            if p > 0.0 {
                mi += p * (p / (pa[i] * pb[j])).log2();
            }
        }
    }
    mi.max(0.0)
}

/// Shannon entropy in bits of a probability vector.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.log2()).sum::<f64>()
}

fn check_table(values: impl Iterator<Item = f64>) -> Result<()> {
    let mut sum = 0.0;
    for v in values {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::domain(format!("probability entry {v} is not a finite non-negative number")));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("probability table sums to {sum}, not 1")));
    }
    Ok(())
}

/// Dense joint law over several finite variables, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    dims: Vec<usize>,
    p: Vec<f64>,
}

impl JointTable {
    pub fn new(dims: Vec<usize>, p: Vec<f64>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != p.len() {
            return Err(Error::shape(format!("table has {} entries, dims {dims:?} need {n}", p.len())));
        }
        check_table(p.iter().copied())?;
        Ok(JointTable { dims, p })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Marginal over `vars` (in the given order), flattened row-major.
    pub fn marginal(&self, vars: &[usize]) -> Vec<f64> {
        let sizes: Vec<usize> = vars.iter().map(|&v| self.dims[v]).collect();
        let mut out = vec![0.0; sizes.iter().product()];
        let mut idx = vec![0usize; self.dims.len()];
        for &p in &self.p {
            if p > 0.0 {
                let mut flat = 0;
                for (&v, &s) in vars.iter().zip(&sizes) {
                    flat = flat * s + idx[v];
                }
                out[flat] += p;
            }
            for d in (0..self.dims.len()).rev() {
                idx[d] += 1;
                if idx[d] < self.dims[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        out
    }

    pub fn entropy(&self, vars: &[usize]) -> f64 {
        if vars.is_empty() {
            return 0.0;
        }
        entropy(&self.marginal(vars))
    }

    /// `I(A;B|C)` via `H(AC) + H(BC) - H(ABC) - H(C)`.
    pub fn cmi(&self, a: &[usize], b: &[usize], c: &[usize]) -> f64 {
        let cat = |x: &[usize], y: &[usize]| [x, y].concat();
        let h_ac = self.entropy(&cat(a, c));
        let h_bc = self.entropy(&cat(b, c));
        let h_abc = self.entropy(&cat(&cat(a, b), c));
        let h_c = self.entropy(c);
        (h_ac + h_bc - h_abc - h_c).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabets {
    pub x1: usize,
    pub x2: usize,
    pub y: usize,
    pub y1: usize,
    pub y2: usize,
}

impl Alphabets {
    pub const BINARY: Alphabets = Alphabets {
        x1: 2,
        x2: 2,
        y: 2,
        y1: 2,
        y2: 2,
    };

    fn validate(&self) -> Result<()> {
        for (name, n) in [("X1", self.x1), ("X2", self.x2), ("Y", self.y), ("Y1", self.y1), ("Y2", self.y2)] {
            if n == 0 {
                return Err(Error::domain(format!("alphabet {name} is empty")));
            }
            if n > MAX_ALPHABET {
                return Err(Error::Unsupported(format!("alphabet {name} has {n} > {MAX_ALPHABET} symbols")));
            }
        }
        Ok(())
    }

    fn outputs(&self) -> usize {
        self.y * self.y1 * self.y2
    }
}

/// Cardinalities of the auxiliary variables `U`, `V1`, `V2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuxCards {
    pub u: usize,
    pub v1: usize,
    pub v2: usize,
}

impl Default for AuxCards {
    fn default() -> Self {
        AuxCards { u: 2, v1: 2, v2: 2 }
    }
}

impl AuxCards {
    fn validate(&self) -> Result<()> {
        for (name, n) in [("U", self.u), ("V1", self.v1), ("V2", self.v2)] {
            if n == 0 {
                return Err(Error::domain(format!("cardinality of {name} is 0")));
            }
            if n > MAX_ALPHABET {
                return Err(Error::Unsupported(format!("cardinality of {name} is {n} > {MAX_ALPHABET}")));
            }
        }
        Ok(())
    }
}

/// Transition law `p(y, y1, y2 | x1, x2)` of one subchannel, indexed
/// `[x1][x2][y][y1][y2]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DmSubchannel {
    alphabets: Alphabets,
    law: Vec<f64>,
}

impl DmSubchannel {
    pub fn new(alphabets: Alphabets, law: Vec<f64>) -> Result<Self> {
        alphabets.validate()?;
        let n = alphabets.x1 * alphabets.x2 * alphabets.outputs();
        if law.len() != n {
            return Err(Error::shape(format!("transition table has {} entries, expected {n}", law.len())));
        }
        let out = alphabets.outputs();
        for (i, slice) in law.chunks(out).enumerate() {
            let (x1, x2) = (i / alphabets.x2, i % alphabets.x2);
            if let Some(v) = slice.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                return Err(Error::domain(format!("p(.|x1={x1},x2={x2}) has invalid entry {v}")));
            }
            let s: f64 = slice.iter().sum();
            if (s - 1.0).abs() > NORM_TOL {
                return Err(Error::domain(format!("p(.|x1={x1},x2={x2}) sums to {s}")));
            }
        }
        Ok(DmSubchannel { alphabets, law })
    }

    /// Builds the law from a function of `(x1, x2, y, y1, y2)`.
    pub fn from_fn(alphabets: Alphabets, f: impl Fn(usize, usize, usize, usize, usize) -> f64) -> Result<Self> {
        alphabets.validate()?;
        let a = alphabets;
        let mut law = Vec::with_capacity(a.x1 * a.x2 * a.outputs());
        for x1 in 0..a.x1 {
            for x2 in 0..a.x2 {
                for y in 0..a.y {
                    for y1 in 0..a.y1 {
                        for y2 in 0..a.y2 {
                            law.push(f(x1, x2, y, y1, y2));
                        }
                    }
                }
            }
        }
        Self::new(alphabets, law)
    }

    pub fn alphabets(&self) -> Alphabets {
        self.alphabets
    }

    pub fn prob(&self, x1: usize, x2: usize, y: usize, y1: usize, y2: usize) -> f64 {
        let a = &self.alphabets;
        self.law[(((x1 * a.x2 + x2) * a.y + y) * a.y1 + y1) * a.y2 + y2]
    }

    pub fn law(&self) -> &[f64] {
        &self.law
    }

    /// Whether the law factors as `p(y1|x1,x2) p(y|y1,x2) p(y2|y,y1,x1,x2)`,
    /// i.e. `p(y | y1, x1, x2)` does not depend on `x1`.
    pub fn is_degraded(&self) -> bool {
        let a = &self.alphabets;
        for x2 in 0..a.x2 {
            for y1 in 0..a.y1 {
                let mut reference: Option<Vec<f64>> = None;
                for x1 in 0..a.x1 {
                    let py1: f64 = (0..a.y)
                        .flat_map(|y| (0..a.y2).map(move |y2| (y, y2)))
                        .map(|(y, y2)| self.prob(x1, x2, y, y1, y2))
                        .sum();
                    if py1 <= STRUCTURE_TOL {
                        continue;
                    }
                    let cond: Vec<f64> = (0..a.y)
                        .map(|y| (0..a.y2).map(|y2| self.prob(x1, x2, y, y1, y2)).sum::<f64>() / py1)
                        .collect();
                    match &reference {
                        None => reference = Some(cond),
                        Some(r) => {
                            if r.iter().zip(&cond).any(|(p, q)| (p - q).abs() > STRUCTURE_TOL) {
                                return false;
                            }
                        }
                    }
                }
            }
        }
        true
    }
}

/// Product of independent subchannel laws.
#[derive(Debug, Clone, PartialEq)]
pub struct DmChannel {
    pub subchannels: Vec<DmSubchannel>,
}

impl DmChannel {
    pub fn new(subchannels: Vec<DmSubchannel>) -> Result<Self> {
        if subchannels.is_empty() {
            return Err(Error::shape("channel has no subchannels"));
        }
        Ok(DmChannel { subchannels })
    }

    pub fn len(&self) -> usize {
        self.subchannels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subchannels.is_empty()
    }

    pub fn is_degraded(&self) -> bool {
        self.subchannels.iter().all(|s| s.is_degraded())
    }

    /// Parses the dense-table text format.
    ///
    /// ```text
    /// # comment
    /// subchannel x1=2 x2=2 y=2 y1=2 y2=2
    /// 1 0 0 0 0 0 0 0
    /// ...
    /// ```
    ///
    /// Each `subchannel` header is followed by `x1 * x2` rows, one per input
    /// pair in the order `(0,0), (0,1), ..., (x1-1, x2-1)`. A row lists
    /// `p(y, y1, y2 | x1, x2)` over outputs with `y2` varying fastest, then
    /// `y1`, then `y`. Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut subs = Vec::new();
        let mut current: Option<(Alphabets, Vec<f64>, usize, usize)> = None;
        let finish = |cur: Option<(Alphabets, Vec<f64>, usize, usize)>, subs: &mut Vec<DmSubchannel>| -> Result<()> {
            if let Some((a, law, rows, line)) = cur {
                if rows != a.x1 * a.x2 {
                    return Err(Error::parse(
                        format!("line {line}"),
                        format!("subchannel has {rows} rows, expected {}", a.x1 * a.x2),
                    ));
                }
                let s = DmSubchannel::new(a, law).map_err(|e| Error::parse(format!("line {line}"), e.to_string()))?;
                subs.push(s);
            }
            Ok(())
        };
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("subchannel") {
                finish(current.take(), &mut subs)?;
                let mut a = Alphabets::BINARY;
                for tok in rest.split_whitespace() {
                    let (k, v) = tok
                        .split_once('=')
                        .ok_or_else(|| Error::parse(format!("line {lineno}"), format!("expected key=value, got `{tok}`")))?;
                    let n: usize = v
                        .parse()
                        .map_err(|_| Error::parse(format!("line {lineno}"), format!("bad size `{v}`")))?;
                    match k {
                        "x1" => a.x1 = n,
                        "x2" => a.x2 = n,
                        "y" => a.y = n,
                        "y1" => a.y1 = n,
                        "y2" => a.y2 = n,
                        _ => return Err(Error::parse(format!("line {lineno}"), format!("unknown alphabet `{k}`"))),
                    }
                }
                a.validate().map_err(|e| Error::parse(format!("line {lineno}"), e.to_string()))?;
                current = Some((a, Vec::new(), 0, lineno));
                continue;
            }
            let Some((a, law, rows, _)) = current.as_mut() else {
                return Err(Error::parse(format!("line {lineno}"), "row before any `subchannel` header"));
            };
            let values = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| Error::parse(format!("line {lineno}"), format!("bad probability `{t}`")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if values.len() != a.outputs() {
                return Err(Error::parse(
                    format!("line {lineno}"),
                    format!("row has {} entries, expected {}", values.len(), a.outputs()),
                ));
            }
            if *rows >= a.x1 * a.x2 {
                return Err(Error::parse(format!("line {lineno}"), "too many rows for subchannel"));
            }
            law.extend(values);
            *rows += 1;
        }
        finish(current, &mut subs)?;
        if subs.is_empty() {
            return Err(Error::parse("end of input", "no subchannels"));
        }
        DmChannel::new(subs)
    }

    /// Writes the channel in the format read by [`DmChannel::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.subchannels {
            let a = s.alphabets;
            let _ = writeln!(out, "subchannel x1={} x2={} y={} y1={} y2={}", a.x1, a.x2, a.y, a.y1, a.y2);
            for row in s.law.chunks(a.outputs()) {
                let cells: Vec<String> = row.iter().map(|p| format!("{p}")).collect();
                let _ = writeln!(out, "{}", cells.join(" "));
            }
        }
        out
    }
}

/// Joint law of `(U, V1, V2, X1, X2)` on one subchannel, indexed
/// `[u][v1][v2][x1][x2]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxLaw {
    cards: AuxCards,
    x1: usize,
    x2: usize,
    joint: Vec<f64>,
}

impl AuxLaw {
    /// Validates normalization and the Markov chain `U -> (V1,V2) -> (X1,X2)`.
    pub fn new(cards: AuxCards, x1: usize, x2: usize, joint: Vec<f64>) -> Result<Self> {
        cards.validate()?;
        if x1 == 0 || x2 == 0 || x1 > MAX_ALPHABET || x2 > MAX_ALPHABET {
            return Err(Error::domain(format!("input alphabets {x1}x{x2} out of range")));
        }
        let n = cards.u * cards.v1 * cards.v2 * x1 * x2;
        if joint.len() != n {
            return Err(Error::shape(format!("distribution has {} entries, expected {n}", joint.len())));
        }
        if joint.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidDistribution("negative or non-finite probability".into()));
        }
        let s: f64 = joint.iter().sum();
        if (s - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidDistribution(format!("distribution sums to {s}")));
        }
        let law = AuxLaw { cards, x1, x2, joint };
        law.check_markov()?;
        Ok(law)
    }

    /// Builds `p(u) p(v1,v2|u) p(x1,x2|v1,v2)`. Conditionals are row-major
    /// with the conditioning variables outermost.
    pub fn from_parts(cards: AuxCards, x1: usize, x2: usize, p_u: &[f64], p_v_u: &[f64], p_x_v: &[f64]) -> Result<Self> {
        cards.validate()?;
        let nv = cards.v1 * cards.v2;
        let nx = x1 * x2;
        if p_u.len() != cards.u || p_v_u.len() != cards.u * nv || p_x_v.len() != nv * nx {
            return Err(Error::shape("component tables do not match the cardinalities"));
        }
        let mut joint = Vec::with_capacity(cards.u * nv * nx);
        for u in 0..cards.u {
            for v in 0..nv {
                for x in 0..nx {
                    joint.push(p_u[u] * p_v_u[u * nv + v] * p_x_v[v * nx + x]);
                }
            }
        }
        Self::new(cards, x1, x2, joint)
    }

    /// Point mass on `u = v1 = v2 = 0` and inputs `(x1, x2)`.
    pub fn point(cards: AuxCards, x1_size: usize, x2_size: usize, x1: usize, x2: usize) -> Result<Self> {
        let mut joint = vec![0.0; cards.u * cards.v1 * cards.v2 * x1_size * x2_size];
        joint[x1 * x2_size + x2] = 1.0;
        Self::new(cards, x1_size, x2_size, joint)
    }

    pub fn cards(&self) -> AuxCards {
        self.cards
    }

    pub fn joint(&self) -> &[f64] {
        &self.joint
    }

    fn index(&self, u: usize, v1: usize, v2: usize, x1: usize, x2: usize) -> usize {
        (((u * self.cards.v1 + v1) * self.cards.v2 + v2) * self.x1 + x1) * self.x2 + x2
    }

    fn check_markov(&self) -> Result<()> {
        let c = self.cards;
        let nx = self.x1 * self.x2;
        for v1 in 0..c.v1 {
            for v2 in 0..c.v2 {
                let pv: f64 = (0..c.u)
                    .flat_map(|u| (0..nx).map(move |x| (u, x)))
                    .map(|(u, x)| self.joint[self.index(u, v1, v2, 0, 0) + x])
                    .sum();
                if pv <= 0.0 {
                    continue;
                }
                let q: Vec<f64> = (0..nx)
                    .map(|x| (0..c.u).map(|u| self.joint[self.index(u, v1, v2, 0, 0) + x]).sum::<f64>() / pv)
                    .collect();
                for u in 0..c.u {
                    let base = self.index(u, v1, v2, 0, 0);
                    let puv: f64 = self.joint[base..base + nx].iter().sum();
                    if puv <= 0.0 {
                        continue;
                    }
                    for x in 0..nx {
                        if (self.joint[base + x] / puv - q[x]).abs() > STRUCTURE_TOL {
                            return Err(Error::InvalidDistribution(format!(
                                "p(x1,x2|u,v1,v2) depends on u at v1={v1}, v2={v2}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Whether the law, with `U` marginalized out, factors as
    /// `p(v1) p(v2) p(x1|v1) p(x2|v2)`.
    pub fn check_independent_inputs(&self) -> Result<()> {
        let c = self.cards;
        let (a1, a2) = (self.x1, self.x2);
        // p(v1, v2, x1, x2)
        let mut m = vec![0.0; c.v1 * c.v2 * a1 * a2];
        for u in 0..c.u {
            for v1 in 0..c.v1 {
                for v2 in 0..c.v2 {
                    for x1 in 0..a1 {
                        for x2 in 0..a2 {
                            m[((v1 * c.v2 + v2) * a1 + x1) * a2 + x2] += self.joint[self.index(u, v1, v2, x1, x2)];
                        }
                    }
                }
            }
        }
        let at = |v1: usize, v2: usize, x1: usize, x2: usize| m[((v1 * c.v2 + v2) * a1 + x1) * a2 + x2];
        let mut p_v1x1 = vec![0.0; c.v1 * a1];
        let mut p_v2x2 = vec![0.0; c.v2 * a2];
        for v1 in 0..c.v1 {
            for v2 in 0..c.v2 {
                for x1 in 0..a1 {
                    for x2 in 0..a2 {
                        p_v1x1[v1 * a1 + x1] += at(v1, v2, x1, x2);
                        p_v2x2[v2 * a2 + x2] += at(v1, v2, x1, x2);
                    }
                }
            }
        }
        for v1 in 0..c.v1 {
            for v2 in 0..c.v2 {
                for x1 in 0..a1 {
                    for x2 in 0..a2 {
                        let product = p_v1x1[v1 * a1 + x1] * p_v2x2[v2 * a2 + x2];
                        if (at(v1, v2, x1, x2) - product).abs() > STRUCTURE_TOL {
                            return Err(Error::InvalidDistribution(format!(
                                "NF law does not factor as p(v1)p(v2)p(x1|v1)p(x2|v2) at v1={v1}, v2={v2}, x1={x1}, x2={x2}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn full_joint(&self, ch: &DmSubchannel) -> Result<JointTable> {
        let a = ch.alphabets;
        if a.x1 != self.x1 || a.x2 != self.x2 {
            return Err(Error::shape(format!(
                "distribution inputs {}x{} do not match channel inputs {}x{}",
                self.x1, self.x2, a.x1, a.x2
            )));
        }
        let c = self.cards;
        let out = a.outputs();
        let mut p = Vec::with_capacity(self.joint.len() * out);
        for u in 0..c.u {
            for v1 in 0..c.v1 {
                for v2 in 0..c.v2 {
                    for x1 in 0..a.x1 {
                        for x2 in 0..a.x2 {
                            let w = self.joint[self.index(u, v1, v2, x1, x2)];
                            let base = (x1 * a.x2 + x2) * out;
                            p.extend(ch.law[base..base + out].iter().map(|t| w * t));
                        }
                    }
                }
            }
        }
        Ok(JointTable {
            dims: vec![c.u, c.v1, c.v2, a.x1, a.x2, a.y, a.y1, a.y2],
            p,
        })
    }
}

/// Per-subchannel auxiliary laws.
#[derive(Debug, Clone, PartialEq)]
pub struct DmDistribution {
    pub subchannels: Vec<AuxLaw>,
}

impl DmDistribution {
    pub fn new(subchannels: Vec<AuxLaw>) -> Self {
        DmDistribution { subchannels }
    }

    fn check(&self, channel: &DmChannel) -> Result<()> {
        if self.subchannels.len() != channel.len() {
            return Err(Error::shape(format!(
                "{} subchannel laws for {} subchannels",
                self.subchannels.len(),
                channel.len()
            )));
        }
        Ok(())
    }
}

/// Information terms of one subchannel under one auxiliary law.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct InfoTerms {
    /// `I(V1V2;Y)`
    pub v_y: f64,
    /// `I(V1;YY1|V2)`
    pub v1_yy1_v2: f64,
    /// `I(V1V2;Y|U)`
    pub v_y_u: f64,
    /// `I(V1;YY1|V2U)`
    pub v1_yy1_v2u: f64,
    /// `I(V1;Y1|V2U)`
    pub v1_y1_v2u: f64,
    /// `I(V1V2;Y2|U)`
    pub v_y2_u: f64,
    /// `I(V1;Y|V2)`
    pub v1_y_v2: f64,
    /// `I(V2;Y)`
    pub v2_y: f64,
    /// `I(V2;Y2|V1)`
    pub v2_y2_v1: f64,
    /// `I(V2;Y2)`
    pub v2_y2: f64,
    /// `I(V1;Y2|V2)`
    pub v1_y2_v2: f64,
}

impl InfoTerms {
    pub fn compute(channel: &DmSubchannel, law: &AuxLaw) -> Result<Self> {
        let t = law.full_joint(channel)?;
        Ok(InfoTerms {
            v_y: t.cmi(&[V1, V2], &[Y], &[]),
            v1_yy1_v2: t.cmi(&[V1], &[Y, Y1], &[V2]),
            v_y_u: t.cmi(&[V1, V2], &[Y], &[U]),
            v1_yy1_v2u: t.cmi(&[V1], &[Y, Y1], &[V2, U]),
            v1_y1_v2u: t.cmi(&[V1], &[Y1], &[V2, U]),
            v_y2_u: t.cmi(&[V1, V2], &[Y2], &[U]),
            v1_y_v2: t.cmi(&[V1], &[Y], &[V2]),
            v2_y: t.cmi(&[V2], &[Y], &[]),
            v2_y2_v1: t.cmi(&[V2], &[Y2], &[V1]),
            v2_y2: t.cmi(&[V2], &[Y2], &[]),
            v1_y2_v2: t.cmi(&[V1], &[Y2], &[V2]),
        })
    }

    fn outer_rate(&self) -> [f64; 2] {
        [self.v_y, self.v1_yy1_v2]
    }

    fn outer_equivocation(&self) -> [f64; 2] {
        [self.v_y_u - self.v_y2_u, self.v1_yy1_v2u - self.v_y2_u]
    }

    fn df_rate(&self) -> [f64; 2] {
        [self.v_y_u, self.v1_y1_v2u]
    }

    fn df_equivocation(&self) -> [f64; 2] {
        [self.v_y_u - self.v_y2_u, self.v1_y1_v2u - self.v_y2_u]
    }
}

fn sum2(terms: &[InfoTerms], f: impl Fn(&InfoTerms) -> [f64; 2]) -> [f64; 2] {
    terms.iter().map(f).fold([0.0; 2], |a, b| [a[0] + b[0], a[1] + b[1]])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterBound {
    /// `min` of the two rate sums.
    pub rate: f64,
    /// `min(rate, equivocation sums)`.
    pub equivocation: f64,
    pub rate_sums: [f64; 2],
    pub equivocation_sums: [f64; 2],
    pub terms: Vec<InfoTerms>,
}

/// Outer bound on `(R, Re)` for one choice of auxiliary laws.
pub fn eval_outer(channel: &DmChannel, dist: &DmDistribution) -> Result<OuterBound> {
    dist.check(channel)?;
    let terms = channel
        .subchannels
        .iter()
        .zip(&dist.subchannels)
        .map(|(c, d)| InfoTerms::compute(c, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(outer_from_terms(terms))
}

fn outer_from_terms(terms: Vec<InfoTerms>) -> OuterBound {
    let rate_sums = sum2(&terms, InfoTerms::outer_rate);
    let equivocation_sums = sum2(&terms, InfoTerms::outer_equivocation);
    let rate = rate_sums[0].min(rate_sums[1]);
    OuterBound {
        rate,
        equivocation: rate.min(equivocation_sums[0]).min(equivocation_sums[1]),
        rate_sums,
        equivocation_sums,
        terms,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerBound {
    /// Achievable rate, clamped at 0.
    pub rate: f64,
    /// Achievable equivocation, `min(Re, R)` clamped at 0.
    pub equivocation: f64,
    /// Literal rate expression before clamping.
    pub rate_raw: f64,
    /// Literal equivocation expression before clamping and before `Re <= R`.
    pub equivocation_raw: f64,
    /// The two DF rate sums over the DF set.
    pub df_rate_sums: [f64; 2],
    /// The two DF equivocation sums over the DF set.
    pub df_equivocation_sums: [f64; 2],
    pub terms: Vec<InfoTerms>,
}

/// Achievable `(R, Re)` for a DF/NF partition and auxiliary laws.
pub fn eval_inner(channel: &DmChannel, dist: &DmDistribution, modes: &ModePartition) -> Result<InnerBound> {
    dist.check(channel)?;
    if modes.len() != channel.len() {
        return Err(Error::shape(format!("{} modes for {} subchannels", modes.len(), channel.len())));
    }
    for (l, (law, m)) in dist.subchannels.iter().zip(&modes.0).enumerate() {
        if *m == Mode::NoiseForward {
            law.check_independent_inputs()
                .map_err(|e| Error::InvalidDistribution(format!("subchannel {l}: {e}")))?;
        }
    }
    let terms = channel
        .subchannels
        .iter()
        .zip(&dist.subchannels)
        .map(|(c, d)| InfoTerms::compute(c, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(inner_from_terms(terms, modes))
}

fn inner_from_terms(terms: Vec<InfoTerms>, modes: &ModePartition) -> InnerBound {
    let (df, nf): (Vec<_>, Vec<_>) = terms
        .iter()
        .zip(&modes.0)
        .partition(|(_, m)| **m == Mode::DecodeForward);
    let df: Vec<InfoTerms> = df.into_iter().map(|(t, _)| *t).collect();
    let nf: Vec<InfoTerms> = nf.into_iter().map(|(t, _)| *t).collect();
    let df_rate_sums = sum2(&df, InfoTerms::df_rate);
    let df_equivocation_sums = sum2(&df, InfoTerms::df_equivocation);
    let s = |f: fn(&InfoTerms) -> f64| nf.iter().map(f).sum::<f64>();
    let nf_direct = s(|t| t.v1_y_v2);
    let relay_dest = s(|t| t.v2_y);
    let rate_raw = df_rate_sums[0].min(df_rate_sums[1]) + nf_direct;
    let equivocation_raw = df_equivocation_sums[0].min(df_equivocation_sums[1])
        + nf_direct
        + relay_dest.min(s(|t| t.v2_y2_v1))
        - relay_dest.min(s(|t| t.v2_y2))
        - s(|t| t.v1_y2_v2);
    let rate = rate_raw.max(0.0);
    InnerBound {
        rate,
        equivocation: equivocation_raw.min(rate).max(0.0),
        rate_raw,
        equivocation_raw,
        df_rate_sums,
        df_equivocation_sums,
        terms,
    }
}

/// Value of the degraded secrecy-capacity objective for fixed laws:
/// `min(sum [I(V1V2;Y|U) - I(V1V2;Y2|U)]+, sum [I(V1;Y1|V2U) - I(V1V2;Y2|U)]+)`.
pub fn degraded_objective(channel: &DmChannel, dist: &DmDistribution) -> Result<f64> {
    dist.check(channel)?;
    let mut sums = [0.0; 2];
    for (c, d) in channel.subchannels.iter().zip(&dist.subchannels) {
        let e = InfoTerms::compute(c, d)?.df_equivocation();
        sums[0] += e[0].max(0.0);
        sums[1] += e[1].max(0.0);
    }
    Ok(sums[0].min(sums[1]))
}

/// Distribution search settings for [`degraded_capacity_grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DmGrid {
    pub cards: AuxCards,
    /// Lattice denominator for `p(v1, v2)` when `U` is constant.
    pub lattice: usize,
    /// Dirichlet-random laws per subchannel.
    pub random: usize,
    pub seed: u64,
}

impl Default for DmGrid {
    fn default() -> Self {
        DmGrid {
            cards: AuxCards::default(),
            lattice: 4,
            random: 2000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityEstimate {
    /// Best value of the degraded capacity objective found.
    pub capacity: f64,
    /// Lattice spacing of the deterministic part of the search.
    pub resolution: f64,
    /// Candidate laws evaluated per subchannel.
    pub candidates: usize,
    /// Best clamped all-DF inner equivocation over the same candidates.
    pub inner_best: f64,
    /// Best outer equivocation cap over the same candidates.
    pub outer_best: f64,
    pub best: DmDistribution,
}

/// Estimates the secrecy capacity of a channel whose subchannels are all
/// degraded by maximizing over a lattice of structured laws plus seeded
/// Dirichlet-random laws.
pub fn degraded_capacity_grid(channel: &DmChannel, grid: &DmGrid) -> Result<CapacityEstimate> {
    if let Some(l) = channel.subchannels.iter().position(|s| !s.is_degraded()) {
        return Err(Error::Precondition(format!("subchannel {l} is not degraded")));
    }
    grid.cards.validate()?;
    if grid.lattice == 0 {
        return Err(Error::domain("lattice denominator must be >= 1"));
    }
    let per_sub: Vec<(Vec<AuxLaw>, Vec<InfoTerms>)> = channel
        .subchannels
        .iter()
        .enumerate()
        .map(|(l, ch)| {
            let a = ch.alphabets;
            let laws = candidate_laws(grid, a.x1, a.x2, partition_seed(grid.seed, l as u64))?;
            let terms = laws
                .par_iter()
                .map(|law| InfoTerms::compute(ch, law))
                .collect::<Result<Vec<_>>>()?;
            Ok((laws, terms))
        })
        .collect::<Result<Vec<_>>>()?;

    let candidates = per_sub.iter().map(|(l, _)| l.len()).min().unwrap_or(0);
    let score_eq6 = |t: &InfoTerms| {
        let e = t.df_equivocation();
        vec![e[0].max(0.0), e[1].max(0.0)]
    };
    let (capacity, pick) = best_product(&per_sub, score_eq6, |s| s[0].min(s[1]))?;
    let all_df = ModePartition::uniform(channel.len(), Mode::DecodeForward);
    let score_inner = |t: &InfoTerms| {
        let r = t.df_rate();
        let e = t.df_equivocation();
        vec![r[0], r[1], e[0], e[1]]
    };
    let (inner_best, _) = best_product(&per_sub, score_inner, |s| {
        let rate = s[0].min(s[1]).max(0.0);
        s[2].min(s[3]).min(rate).max(0.0)
    })?;
    let score_outer = |t: &InfoTerms| {
        let r = t.outer_rate();
        let e = t.outer_equivocation();
        vec![r[0], r[1], e[0], e[1]]
    };
    let (outer_best, _) = best_product(&per_sub, score_outer, |s| s[0].min(s[1]).min(s[2]).min(s[3]))?;
    let best = DmDistribution::new(pick.iter().zip(&per_sub).map(|(&i, (laws, _))| laws[i].clone()).collect());
    debug_assert_eq!(all_df.len(), channel.len());
    Ok(CapacityEstimate {
        capacity,
        resolution: 1.0 / grid.lattice as f64,
        candidates,
        inner_best,
        outer_best,
        best,
    })
}

/// Maximizes `combine(sum over subchannels of score)` over one candidate per
/// subchannel. Candidates dominated in every score coordinate are pruned
/// first, which is exact because `combine` is monotone.
fn best_product(
    per_sub: &[(Vec<AuxLaw>, Vec<InfoTerms>)],
    score: impl Fn(&InfoTerms) -> Vec<f64> + Sync,
    combine: impl Fn(&[f64]) -> f64 + Sync,
) -> Result<(f64, Vec<usize>)> {
    let fronts: Vec<Vec<(usize, Vec<f64>)>> = per_sub
        .iter()
        .map(|(_, terms)| pareto_front(terms.iter().map(&score).enumerate().collect()))
        .collect();
    let total = fronts.iter().try_fold(1usize, |acc, f| acc.checked_mul(f.len()));
    match total {
        Some(n) if n <= 50_000_000 => {}
        _ => return Err(Error::Unsupported("distribution grid too large for exhaustive combination".into())),
    }
    let n = total.unwrap_or(0);
    let dims = fronts.first().map_or(0, |f| f.first().map_or(0, |(_, s)| s.len()));
    let (value, idx) = (0..n)
        .into_par_iter()
        .map(|mut k| {
            let mut sums = vec![0.0; dims];
            let mut pick = Vec::with_capacity(fronts.len());
            for f in &fronts {
                let (i, s) = &f[k % f.len()];
                k /= f.len();
                pick.push(*i);
                for (acc, v) in sums.iter_mut().zip(s) {
                    *acc += v;
                }
            }
            (combine(&sums), pick)
        })
        .reduce(
            || (f64::NEG_INFINITY, Vec::new()),
            |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
        );
    Ok((value, idx))
}

fn pareto_front(mut items: Vec<(usize, Vec<f64>)>) -> Vec<(usize, Vec<f64>)> {
    items.sort_by(|a, b| {
        let sa: f64 = a.1.iter().sum();
        let sb: f64 = b.1.iter().sum();
        sb.total_cmp(&sa).then(a.0.cmp(&b.0))
    });
    let mut front: Vec<(usize, Vec<f64>)> = Vec::new();
    for (i, s) in items {
        let dominated = front.iter().any(|(_, f)| f.iter().zip(&s).all(|(a, b)| a >= b));
        if !dominated {
            front.push((i, s));
        }
    }
    front
}

/// Candidate auxiliary laws: point masses, constant-`U` lattice laws with
/// deterministic input maps, and Dirichlet-random laws.
fn candidate_laws(grid: &DmGrid, x1: usize, x2: usize, seed: u64) -> Result<Vec<AuxLaw>> {
    let c = grid.cards;
    let nv = c.v1 * c.v2;
    let nx = x1 * x2;
    let mut laws = Vec::new();
    for a in 0..x1 {
        for b in 0..x2 {
            laws.push(AuxLaw::point(c, x1, x2, a, b)?);
        }
    }
    let mut p_u = vec![0.0; c.u];
    p_u[0] = 1.0;
    let lattice = simplex_lattice(nv, grid.lattice);
    let maps = nx.checked_pow(nv as u32).filter(|&m| m <= 4096).unwrap_or(0);
    for pv in &lattice {
        let mut p_v_u = vec![0.0; c.u * nv];
        p_v_u[..nv].copy_from_slice(pv);
        for map in 0..maps {
            let mut p_x_v = vec![0.0; nv * nx];
            let mut m = map;
            for v in 0..nv {
                p_x_v[v * nx + m % nx] = 1.0;
                m /= nx;
            }
            laws.push(AuxLaw::from_parts(c, x1, x2, &p_u, &p_v_u, &p_x_v)?);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..grid.random {
        // alternate flat and sparse draws
        let conc = if k % 2 == 0 { 1.0 } else { 0.2 };
        let p_u = dirichlet(&mut rng, c.u, conc);
        let p_v_u: Vec<f64> = (0..c.u).flat_map(|_| dirichlet(&mut rng, nv, conc)).collect();
        let p_x_v: Vec<f64> = (0..nv).flat_map(|_| dirichlet(&mut rng, nx, conc)).collect();
        laws.push(AuxLaw::from_parts(c, x1, x2, &p_u, &p_v_u, &p_x_v)?);
    }
    Ok(laws)
}

/// All probability vectors of length `n` with entries in `{0, 1/d, ..., 1}`.
fn simplex_lattice(n: usize, d: usize) -> Vec<Vec<f64>> {
    fn rec(n: usize, left: usize, d: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() + 1 == n {
            cur.push(left);
            out.push(cur.iter().map(|&k| k as f64 / d as f64).collect());
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(n, left - k, d, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(n, d, d, &mut Vec::new(), &mut out);
    }
    out
}

fn dirichlet(rng: &mut ChaCha8Rng, n: usize, conc: f64) -> Vec<f64> {
    let g = Gamma::new(conc, 1.0).expect("positive shape");
    loop {
        let w: Vec<f64> = (0..n).map(|_| g.sample(rng)).collect();
        let s: f64 = w.iter().sum();
        if s > 0.0 && s.is_finite() {
            return w.into_iter().map(|x| x / s).collect();
        }
    }
}

/// Random subchannel law with Dirichlet(1) conditionals.
pub fn random_subchannel(alphabets: Alphabets, seed: u64) -> Result<DmSubchannel> {
    alphabets.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let law: Vec<f64> = (0..alphabets.x1 * alphabets.x2)
        .flat_map(|_| dirichlet(&mut rng, alphabets.outputs(), 1.0))
        .collect();
    DmSubchannel::new(alphabets, law)
}

/// Random degraded subchannel `p(y1|x1,x2) p(y|y1,x2) p(y2|y,y1,x1,x2)`.
pub fn random_degraded_subchannel(alphabets: Alphabets, seed: u64) -> Result<DmSubchannel> {
    alphabets.validate()?;
    let a = alphabets;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p_y1: Vec<Vec<f64>> = (0..a.x1 * a.x2).map(|_| dirichlet(&mut rng, a.y1, 1.0)).collect();
    let p_y: Vec<Vec<f64>> = (0..a.y1 * a.x2).map(|_| dirichlet(&mut rng, a.y, 1.0)).collect();
    let p_y2: Vec<Vec<f64>> = (0..a.y * a.y1 * a.x1 * a.x2).map(|_| dirichlet(&mut rng, a.y2, 1.0)).collect();
    DmSubchannel::from_fn(a, |x1, x2, y, y1, y2| {
        p_y1[x1 * a.x2 + x2][y1] * p_y[y1 * a.x2 + x2][y] * p_y2[((y * a.y1 + y1) * a.x1 + x1) * a.x2 + x2][y2]
    })
}

/// Random law satisfying the Markov chain, with Dirichlet(1) components.
pub fn random_aux_law(cards: AuxCards, x1: usize, x2: usize, seed: u64) -> Result<AuxLaw> {
    cards.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nv = cards.v1 * cards.v2;
    let p_u = dirichlet(&mut rng, cards.u, 1.0);
    let p_v_u: Vec<f64> = (0..cards.u).flat_map(|_| dirichlet(&mut rng, nv, 1.0)).collect();
    let p_x_v: Vec<f64> = (0..nv).flat_map(|_| dirichlet(&mut rng, x1 * x2, 1.0)).collect();
    AuxLaw::from_parts(cards, x1, x2, &p_u, &p_v_u, &p_x_v)
}

/// Random law of the form `p(u) p(v1) p(v2) p(x1|v1) p(x2|v2)`.
pub fn random_independent_law(cards: AuxCards, x1: usize, x2: usize, seed: u64) -> Result<AuxLaw> {
    cards.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p_u = dirichlet(&mut rng, cards.u, 1.0);
    let p_v1 = dirichlet(&mut rng, cards.v1, 1.0);
    let p_v2 = dirichlet(&mut rng, cards.v2, 1.0);
    let p_x1: Vec<Vec<f64>> = (0..cards.v1).map(|_| dirichlet(&mut rng, x1, 1.0)).collect();
    let p_x2: Vec<Vec<f64>> = (0..cards.v2).map(|_| dirichlet(&mut rng, x2, 1.0)).collect();
    let nv = cards.v1 * cards.v2;
    let p_v: Vec<f64> = (0..nv).map(|v| p_v1[v / cards.v2] * p_v2[v % cards.v2]).collect();
    let p_v_u: Vec<f64> = (0..cards.u).flat_map(|_| p_v.clone()).collect();
    let p_x_v: Vec<f64> = (0..nv)
        .flat_map(|v| {
            let (v1, v2) = (v / cards.v2, v % cards.v2);
            let (a, b) = (&p_x1[v1], &p_x2[v2]);
            (0..x1 * x2).map(move |x| a[x / x2] * b[x % x2])
        })
        .collect();
    AuxLaw::from_parts(cards, x1, x2, &p_u, &p_v_u, &p_x_v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn h2(p: f64) -> f64 {
        entropy(&[p, 1.0 - p])
    }

    #[test]
    fn mi_kernel_examples() {
        assert_abs_diff_eq!(mutual_information(&[vec![0.25, 0.25], vec![0.25, 0.25]]).unwrap(), 0.0);
        assert_abs_diff_eq!(mutual_information(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap(), 1.0);
        let bsc = mutual_information(&[vec![0.445, 0.055], vec![0.055, 0.445]]).unwrap();
        assert_abs_diff_eq!(bsc, 1.0 - h2(0.11), epsilon = 1e-12);
        assert_abs_diff_eq!(bsc, 0.5001, epsilon = 1e-4);
        assert!(matches!(mutual_information(&[vec![0.5, 0.4]]), Err(Error::Domain(_))));
        assert!(matches!(mutual_information(&[vec![1.5, -0.5]]), Err(Error::Domain(_))));
    }

    #[test]
    fn conditional_kernel_averages_slices() {
        let t = vec![
            vec![vec![0.25, 0.0], vec![0.0, 0.25]],
            vec![vec![0.125, 0.125], vec![0.125, 0.125]],
        ];
        assert_abs_diff_eq!(conditional_mutual_information(&t).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn table_route_matches_kernel() {
        let p = vec![0.1, 0.2, 0.3, 0.05, 0.05, 0.3];
        let t = JointTable::new(vec![2, 3], p.clone()).unwrap();
        let direct = mutual_information(&[p[0..3].to_vec(), p[3..6].to_vec()]).unwrap();
        assert_abs_diff_eq!(t.cmi(&[0], &[1], &[]), direct, epsilon = 1e-14);
    }

    fn noiseless_x1() -> DmChannel {
        // Y = Y1 = X1, Y2 constant
        let a = Alphabets {
            y2: 1,
            ..Alphabets::BINARY
        };
        DmChannel::new(vec![DmSubchannel::from_fn(a, |x1, _, y, y1, _| (y == x1 && y1 == x1) as u8 as f64).unwrap()])
            .unwrap()
    }

    fn uniform_v1_is_x1() -> DmDistribution {
        let c = AuxCards::default();
        let p_u = [1.0, 0.0];
        let p_v_u = [0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25, 0.25];
        // x1 = v1, x2 = v2
        let mut p_x_v = vec![0.0; 16];
        for v in 0..4 {
            p_x_v[v * 4 + v] = 1.0;
        }
        DmDistribution::new(vec![AuxLaw::from_parts(c, 2, 2, &p_u, &p_v_u, &p_x_v).unwrap()])
    }

    #[test]
    fn outer_on_noiseless_link() {
        let o = eval_outer(&noiseless_x1(), &uniform_v1_is_x1()).unwrap();
        assert_abs_diff_eq!(o.equivocation, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(o.rate, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn inner_nf_on_noiseless_link() {
        let c = AuxCards::default();
        // V1 = X1 uniform, V2 degenerate
        let law = AuxLaw::from_parts(
            c,
            2,
            2,
            &[1.0, 0.0],
            &[0.5, 0.0, 0.5, 0.0, 0.5, 0.0, 0.5, 0.0],
            &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        )
        .unwrap();
        let d = DmDistribution::new(vec![law]);
        let r = eval_inner(&noiseless_x1(), &d, &ModePartition::uniform(1, Mode::NoiseForward)).unwrap();
        assert_abs_diff_eq!(r.equivocation, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn nf_rejects_correlated_inputs() {
        let d = DmDistribution::new(vec![AuxLaw::from_parts(
            AuxCards::default(),
            2,
            2,
            &[1.0, 0.0],
            &[0.5, 0.0, 0.0, 0.5, 0.25, 0.25, 0.25, 0.25],
            &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        )
        .unwrap()]);
        let r = eval_inner(&noiseless_x1(), &d, &ModePartition::uniform(1, Mode::NoiseForward));
        assert!(matches!(r, Err(Error::InvalidDistribution(_))));
        assert!(eval_inner(&noiseless_x1(), &d, &ModePartition::uniform(1, Mode::DecodeForward)).is_ok());
    }

    #[test]
    fn markov_violation_rejected() {
        // x1 copies u while v is constant
        let mut joint = vec![0.0; 32];
        joint[0] = 0.5; // u=0, v=0, x=(0,0)
        joint[16 + 2] = 0.5; // u=1, v=0, x=(1,0)
        assert!(matches!(
            AuxLaw::new(AuxCards::default(), 2, 2, joint),
            Err(Error::InvalidDistribution(_))
        ));
    }

    #[test]
    fn degradedness_check() {
        assert!(noiseless_x1().is_degraded());
        // Y = X1 but Y1 constant: y depends on x1 given y1
        let a = Alphabets {
            y1: 1,
            y2: 1,
            ..Alphabets::BINARY
        };
        let s = DmSubchannel::from_fn(a, |x1, _, y, _, _| (y == x1) as u8 as f64).unwrap();
        assert!(!s.is_degraded());
        let ch = DmChannel::new(vec![s]).unwrap();
        assert!(matches!(
            degraded_capacity_grid(&ch, &DmGrid::default()),
            Err(Error::Precondition(_))
        ));
        for seed in 0..20 {
            assert!(random_degraded_subchannel(Alphabets::BINARY, seed).unwrap().is_degraded());
        }
    }

    #[test]
    fn text_round_trip_and_errors() {
        let ch = DmChannel::new(vec![
            random_subchannel(Alphabets::BINARY, 3).unwrap(),
            random_subchannel(
                Alphabets {
                    y: 3,
                    ..Alphabets::BINARY
                },
                4,
            )
            .unwrap(),
        ])
        .unwrap();
        let back = DmChannel::parse(&ch.to_text()).unwrap();
        assert_eq!(back, ch);

        let err = DmChannel::parse("subchannel x1=2 x2=1 y=2 y1=1 y2=1\n1 0\n0.5 0.4\n").unwrap_err();
        assert!(matches!(err, Error::Parse { ref location, .. } if location == "line 1"), "{err:?}");
        let err = DmChannel::parse("1 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { ref location, .. } if location == "line 1"));
        let err = DmChannel::parse("subchannel x1=2 x2=1 y=2 y1=1 y2=1\n1 0\n0 x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { ref location, .. } if location == "line 3"));
    }

    #[test]
    fn lattice_counts() {
        assert_eq!(simplex_lattice(4, 4).len(), 35);
        for p in simplex_lattice(3, 5) {
            assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        }
    }
}
