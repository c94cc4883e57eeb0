//! Physical data model: Gaussian subchannels, node geometry and fading.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One real Gaussian relay-eavesdropper subchannel in canonical form.
///
/// Destination, relay and eavesdropper observe
/// `Y = X1 + sqrt(rho1) X2 + Z`, `Y1 = X1 + Z1`, `Y2 = X1 + sqrt(rho2) X2 + Z2`
/// with noise variances `sigma_sq`, `sigma1_sq` and `sigma2_sq`.
/// `sigma1_sq = +inf` models a relay that does not hear the source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubchannelParams {
    pub sigma_sq: f64,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub rho1: f64,
    pub rho2: f64,
}

impl SubchannelParams {
    pub fn new(sigma_sq: f64, sigma1_sq: f64, sigma2_sq: f64, rho1: f64, rho2: f64) -> Result<Self> {
        let p = SubchannelParams {
            sigma_sq,
            sigma1_sq,
            sigma2_sq,
            rho1,
            rho2,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite_pos = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::domain(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        finite_pos("sigma_sq", self.sigma_sq)?;
        finite_pos("sigma2_sq", self.sigma2_sq)?;
        if self.sigma1_sq.is_nan() || self.sigma1_sq <= 0.0 {
            return Err(Error::domain(format!(
                "sigma1_sq must be > 0 (or +inf), got {}",
                self.sigma1_sq
            )));
        }
        for (name, v) in [("rho1", self.rho1), ("rho2", self.rho2)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::domain(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// True when the relay cannot hear the source at all.
    pub fn is_deaf_relay(&self) -> bool {
        self.sigma1_sq.is_infinite()
    }
}

/// Source and relay sum-power budgets (Watt).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    pub p1_total: f64,
    pub p2_total: f64,
}

impl PowerBudget {
    pub fn new(p1_total: f64, p2_total: f64) -> Result<Self> {
        for (name, v) in [("p1_total", p1_total), ("p2_total", p2_total)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::domain(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(PowerBudget { p1_total, p2_total })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        PowerBudget {
            p1_total: self.p1_total * factor,
            p2_total: self.p2_total * factor,
        }
    }
}

/// Noise variances at relay, destination and eavesdropper.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevels {
    pub relay: f64,
    pub destination: f64,
    pub eavesdropper: f64,
}

impl Default for NoiseLevels {
    fn default() -> Self {
        NoiseLevels {
            relay: 1.0,
            destination: 1.0,
            eavesdropper: 1.0,
        }
    }
}

/// Node positions in the plane and the path-loss exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub source: [f64; 2],
    pub relay: [f64; 2],
    pub destination: [f64; 2],
    pub eavesdropper: [f64; 2],
    pub gamma: f64,
}

/// The five links of the relay-eavesdropper channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    SourceDest,
    RelayDest,
    SourceEve,
    RelayEve,
    SourceRelay,
}

impl Link {
    pub const ALL: [Link; 5] = [
        Link::SourceDest,
        Link::RelayDest,
        Link::SourceEve,
        Link::RelayEve,
        Link::SourceRelay,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Link::SourceDest => "s-d",
            Link::RelayDest => "r-d",
            Link::SourceEve => "s-e",
            Link::RelayEve => "r-e",
            Link::SourceRelay => "s-r",
        }
    }
}

impl Geometry {
    /// The layout used by the relay-position studies: source at the origin,
    /// relay at `(d, 0)`, destination at `(1, 0)`, eavesdropper at `(0, 1)`.
    pub fn line_with_relay_at(d: f64, gamma: f64) -> Self {
        Geometry {
            source: [0.0, 0.0],
            relay: [d, 0.0],
            destination: [1.0, 0.0],
            eavesdropper: [0.0, 1.0],
            gamma,
        }
    }

    pub fn distance(&self, link: Link) -> f64 {
        let (a, b) = match link {
            Link::SourceDest => (self.source, self.destination),
            Link::RelayDest => (self.relay, self.destination),
            Link::SourceEve => (self.source, self.eavesdropper),
            Link::RelayEve => (self.relay, self.eavesdropper),
            Link::SourceRelay => (self.source, self.relay),
        };
        (a[0] - b[0]).hypot(a[1] - b[1])
    }

    /// Mean power gain `d^-gamma` of a link.
    pub fn mean_gain(&self, link: Link) -> f64 {
        self.distance(link).powf(-self.gamma)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::domain(format!("path-loss exponent must be >= 0, got {}", self.gamma)));
        }
        for link in Link::ALL {
            let d = self.distance(link);
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::domain(format!(
                    "{} distance must be > 0, got {d}",
                    link.name()
                )));
            }
        }
        Ok(())
    }
}

/// Complex gains of one fading realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingState {
    pub h_sd: Complex64,
    pub h_rd: Complex64,
    pub h_se: Complex64,
    pub h_re: Complex64,
    pub h_sr: Complex64,
}

impl FadingState {
    pub fn gain(&self, link: Link) -> Complex64 {
        match link {
            Link::SourceDest => self.h_sd,
            Link::RelayDest => self.h_rd,
            Link::SourceEve => self.h_se,
            Link::RelayEve => self.h_re,
            Link::SourceRelay => self.h_sr,
        }
    }

    /// `|h|^2` for a link.
    pub fn power(&self, link: Link) -> f64 {
        self.gain(link).norm_sqr()
    }

    /// A state with real gains `sqrt(g)` for the given power gains, ordered
    /// (s-d, r-d, s-e, r-e, s-r).
    pub fn from_power_gains(g: [f64; 5]) -> Self {
        let c = |x: f64| Complex64::new(x.sqrt(), 0.0);
        FadingState {
            h_sd: c(g[0]),
            h_rd: c(g[1]),
            h_se: c(g[2]),
            h_re: c(g[3]),
            h_sr: c(g[4]),
        }
    }

    pub fn is_finite(&self) -> bool {
        Link::ALL.iter().all(|&l| self.gain(l).is_finite())
    }
}

/// Draws `count` i.i.d. distance-dependent Rayleigh fading states.
///
/// Each gain is `h' * d^(-gamma/2)` with `h'` circularly-symmetric complex
/// Gaussian of unit variance (real and imaginary parts each of variance 1/2).
/// The stream is a ChaCha8 generator keyed by `seed`, so the output is a pure
/// function of `(geometry, seed, count)`.
pub fn sample_fading(geometry: &Geometry, seed: u64, count: usize) -> Result<Vec<FadingState>> {
    if count == 0 {
        return Err(Error::domain("fading sample count must be >= 1"));
    }
    geometry.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid std");
    let scale: [f64; 5] = Link::ALL.map(|l| geometry.distance(l).powf(-geometry.gamma / 2.0));
    let mut draw = |s: f64| Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)) * s;
    Ok((0..count)
        .map(|_| FadingState {
            h_sd: draw(scale[0]),
            h_rd: draw(scale[1]),
            h_se: draw(scale[2]),
            h_re: draw(scale[3]),
            h_sr: draw(scale[4]),
        })
        .collect())
}

/// Seed for partition `index` of a Monte Carlo batch keyed by `seed`.
pub fn partition_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Maps a fading state onto the canonical real-subchannel form by
/// normalizing the S-D and S-E links.
///
/// Returns the canonical parameters together with the S-D power gain
/// `|h_sd|^2`. A zero S-R gain maps to `sigma1_sq = +inf`. The fading
/// evaluators in [`crate::rates`] work on the raw gains directly; this
/// conversion lets the same parallel-channel optimizer handle fading states
/// (with a complex bandwidth factor of 2).
pub fn fading_to_subchannel(state: &FadingState, noise: &NoiseLevels) -> Result<(SubchannelParams, f64)> {
    let g_sd = state.power(Link::SourceDest);
    let g_se = state.power(Link::SourceEve);
    if !(g_sd > 0.0) || !(g_se > 0.0) {
        return Err(Error::DegenerateState(format!(
            "|h_sd|^2 = {g_sd}, |h_se|^2 = {g_se}; both must be > 0"
        )));
    }
    let g_sr = state.power(Link::SourceRelay);
    let sigma1_sq = if g_sr > 0.0 { noise.relay / g_sr } else { f64::INFINITY };
    let params = SubchannelParams::new(
        noise.destination / g_sd,
        sigma1_sq,
        noise.eavesdropper / g_se,
        state.power(Link::RelayDest) / g_sd,
        state.power(Link::RelayEve) / g_se,
    )?;
    Ok((params, g_sd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_geometry() -> Geometry {
        // equilateral-ish layout where every used pair is at distance 1
        let h = 3f64.sqrt() / 2.0;
        Geometry {
            source: [0.0, 0.0],
            relay: [1.0, 0.0],
            destination: [0.5, h],
            eavesdropper: [0.5, -h],
            gamma: 2.0,
        }
    }

    #[test]
    fn unit_distances_give_unit_mean_gain() {
        let g = unit_geometry();
        // d(dest, eve) is not a link, every used pair is at distance 1
        for l in [Link::SourceDest, Link::SourceEve, Link::SourceRelay, Link::RelayDest, Link::RelayEve] {
            assert_relative_eq!(g.distance(l), 1.0, epsilon = 1e-12);
        }
        let n = 100_000;
        let states = sample_fading(&g, 11, n).unwrap();
        for l in Link::ALL {
            let mean = states.iter().map(|s| s.power(l)).sum::<f64>() / n as f64;
            // |h|^2 ~ Exp(1): standard error 1/sqrt(n)
            assert!((mean - 1.0).abs() < 3.0 / (n as f64).sqrt(), "{}: {mean}", l.name());
        }
    }

    #[test]
    fn half_distance_quadruples_source_relay_gain() {
        let g = Geometry::line_with_relay_at(0.5, 2.0);
        assert_relative_eq!(g.mean_gain(Link::SourceRelay), 4.0, epsilon = 1e-12);
        let n = 100_000;
        let states = sample_fading(&g, 5, n).unwrap();
        let mean = states.iter().map(|s| s.power(Link::SourceRelay)).sum::<f64>() / n as f64;
        assert!((mean - 4.0).abs() < 3.0 * 4.0 / (n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn same_seed_same_bits() {
        let g = Geometry::line_with_relay_at(0.3, 2.0);
        let a = sample_fading(&g, 42, 257).unwrap();
        let b = sample_fading(&g, 42, 257).unwrap();
        let bits = |v: &[FadingState]| -> Vec<u64> {
            v.iter()
                .flat_map(|s| Link::ALL.map(|l| s.gain(l)))
                .flat_map(|c| [c.re.to_bits(), c.im.to_bits()])
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
        let c = sample_fading(&g, 43, 257).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn zero_distance_is_rejected() {
        let g = Geometry::line_with_relay_at(0.0, 2.0);
        assert!(matches!(sample_fading(&g, 1, 4), Err(Error::Domain(_))));
        let g = Geometry::line_with_relay_at(1.0, 2.0);
        assert!(matches!(sample_fading(&g, 1, 4), Err(Error::Domain(_))));
        assert!(sample_fading(&Geometry::line_with_relay_at(0.5, 2.0), 1, 0).is_err());
    }

    #[test]
    fn identity_normalization() {
        let s = FadingState::from_power_gains([1.0; 5]);
        let (p, g) = fading_to_subchannel(&s, &NoiseLevels::default()).unwrap();
        assert_eq!(g, 1.0);
        assert_eq!((p.rho1, p.rho2), (1.0, 1.0));
        assert_eq!((p.sigma_sq, p.sigma1_sq, p.sigma2_sq), (1.0, 1.0, 1.0));
    }

    #[test]
    fn rho1_is_gain_ratio() {
        let s = FadingState::from_power_gains([1.0, 4.0, 1.0, 1.0, 1.0]);
        let (p, _) = fading_to_subchannel(&s, &NoiseLevels::default()).unwrap();
        assert_relative_eq!(p.rho1, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn deaf_relay_and_degenerate_states() {
        let s = FadingState::from_power_gains([1.0, 1.0, 1.0, 1.0, 0.0]);
        let (p, _) = fading_to_subchannel(&s, &NoiseLevels::default()).unwrap();
        assert!(p.is_deaf_relay());
        let s = FadingState::from_power_gains([0.0, 1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            fading_to_subchannel(&s, &NoiseLevels::default()),
            Err(Error::DegenerateState(_))
        ));
        let s = FadingState::from_power_gains([1.0, 1.0, 0.0, 1.0, 1.0]);
        assert!(fading_to_subchannel(&s, &NoiseLevels::default()).is_err());
    }

    #[test]
    fn param_validation() {
        assert!(SubchannelParams::new(1.0, f64::INFINITY, 1.0, 0.0, 0.0).is_ok());
        assert!(SubchannelParams::new(0.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(SubchannelParams::new(1.0, 1.0, f64::INFINITY, 1.0, 1.0).is_err());
        assert!(SubchannelParams::new(1.0, 1.0, 1.0, -0.1, 1.0).is_err());
        assert!(SubchannelParams::new(1.0, 1.0, 1.0, 1.0, f64::NAN).is_err());
        assert!(PowerBudget::new(-1.0, 0.0).is_err());
    }

    #[test]
    fn partition_seeds_differ() {
        let s: Vec<u64> = (0..8).map(|i| partition_seed(7, i)).collect();
        for i in 0..s.len() {
            for j in 0..i {
                assert_ne!(s[i], s[j]);
            }
        }
    }
}
