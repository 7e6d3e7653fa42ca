//! Monte Carlo simulation of the jump SDEs behind the scenarios, and
//! distribution comparison against solved densities.
//!
//! Paths use Euler steps between exactly sampled compound-Poisson jump
//! times; a one-sided stable driver is handled by truncating jumps below ε,
//! simulating the remainder as compound Poisson and compensating the mean of
//! the removed small jumps. Each path owns a counter-based RNG seeded from
//! (seed, path index), so results are independent of scheduling and
//! bitwise reproducible.

use rand::distributions::Open01;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use thiserror::Error;

use crate::exec;
use crate::expr::ScalarFunction;

#[derive(Debug, Error, Clone)]
pub enum SdeError {
    #[error("{aborted} of {total} paths exceeded the blow-up bound")]
    TooManyBlowups { aborted: usize, total: usize },
}

/// Size distribution of the base jump J; the applied jump is phi(X₋)·J.
#[derive(Debug, Clone)]
pub enum JumpSize {
    /// Discrete distribution: (size, probability weight).
    Atoms(Vec<(f64, f64)>),
    Exponential { mean: f64 },
}

impl JumpSize {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            JumpSize::Atoms(atoms) => {
                let total: f64 = atoms.iter().map(|a| a.1).sum();
                let mut u = rng.gen::<f64>() * total;
                for &(y, w) in atoms {
                    u -= w;
                    if u <= 0.0 {
                        return y;
                    }
                }
                atoms.last().map(|a| a.0).unwrap_or(0.0)
            }
            JumpSize::Exponential { mean } => {
                let e: f64 = Exp1.sample(rng);
                mean * e
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum Jumps {
    None,
    /// Compound Poisson: rate λ, base size J, state amplitude phi.
    Compound {
        rate: f64,
        size: JumpSize,
        phi: Option<ScalarFunction>,
    },
    /// Spectrally positive stable driver with Lévy density c·y^{−1−α} on
    /// y > 0, α ∈ (0,1), added to X as-is (unit amplitude).
    StablePos { alpha: f64, c: f64 },
}

/// Pathwise SDE dX = drift(X)dt + sigma(X)dW + jumps; `drift` is the
/// uncompensated drift of the path, not the compensated triplet coefficient.
#[derive(Debug, Clone)]
pub struct SdeSpec {
    pub drift: ScalarFunction,
    pub sigma: ScalarFunction,
    pub jumps: Jumps,
    pub x0: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SimParams {
    pub n_paths: usize,
    pub t_final: f64,
    pub dt: f64,
    pub seed: u64,
    pub par: bool,
}

/// Samples at the three checkpoints T/2, 3T/4 and T (aborted paths drop out
/// of all three).
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub at_half: Vec<f64>,
    pub at_three_quarters: Vec<f64>,
    pub at_final: Vec<f64>,
    pub aborted: usize,
}

const BLOWUP: f64 = 1e12;
/// Truncation level for the stable driver's small jumps.
const STABLE_EPS: f64 = 1e-3;

struct PathDriver<'a> {
    spec: &'a SdeSpec,
    /// σ′, for the Milstein correction
    dsigma: ScalarFunction,
    /// compound-Poisson view of the jump part: (rate, compensation drift)
    rate: f64,
    comp: f64,
}

impl<'a> PathDriver<'a> {
    fn new(spec: &'a SdeSpec) -> Self {
        let (rate, comp) = match &spec.jumps {
            Jumps::None => (0.0, 0.0),
            Jumps::Compound { rate, .. } => (*rate, 0.0),
            Jumps::StablePos { alpha, c } => (
                c * STABLE_EPS.powf(-alpha) / alpha,
                c * STABLE_EPS.powf(1.0 - alpha) / (1.0 - alpha),
            ),
        };
        PathDriver {
            spec,
            dsigma: spec.sigma.derivative(),
            rate,
            comp,
        }
    }

    fn jump<R: Rng>(&self, x: f64, rng: &mut R) -> f64 {
        match &self.spec.jumps {
            Jumps::None => 0.0,
            Jumps::Compound { size, phi, .. } => {
                let j = size.sample(rng);
                match phi {
                    Some(p) => p.value(x) * j,
                    None => j,
                }
            }
            Jumps::StablePos { alpha, .. } => {
                // inverse of the conditional tail (y/ε)^{−α} given y > ε
                let u: f64 = rng.sample(Open01);
                STABLE_EPS * u.powf(-1.0 / alpha)
            }
        }
    }

    /// Milstein from t to t_stop with the step clamped so a single increment
    /// stays below a fixed fraction of the position scale 1+|x|. An absolute
    /// clamp fails for superlinear coefficients: it leaves O(1) increments
    /// that random-walk outward while simulated time freezes. The relative
    /// clamp turns excursions into a multiplicative walk that re-enters the
    /// bulk in O(log²) steps.
    fn diffuse<R: Rng>(&self, mut x: f64, mut t: f64, t_stop: f64, dt: f64, rng: &mut R) -> f64 {
        while t < t_stop && x.abs() <= BLOWUP {
            let a = self.spec.drift.value(x) + self.comp;
            let s = self.spec.sigma.value(x);
            let ds = if s == 0.0 { 0.0 } else { self.dsigma.value(x) };
            let scale = 0.2 * (1.0 + x.abs());
            let mut clamp = scale / (1.0 + a.abs());
            if s != 0.0 {
                clamp = clamp.min((scale / s) * (scale / s));
            }
            if ds != 0.0 {
                // keep the Milstein term subordinate to the diffusion term
                clamp = clamp.min(0.25 / (ds * ds));
            }
            let h = dt.min(clamp).min(t_stop - t);
            let z: f64 = StandardNormal.sample(rng);
            x += a * h + s * h.sqrt() * z + 0.5 * s * ds * h * (z * z - 1.0);
            t += h;
        }
        x
    }

    fn run<R: Rng>(&self, t_final: f64, dt: f64, rng: &mut R) -> Option<[f64; 3]> {
        let marks = [0.5 * t_final, 0.75 * t_final, t_final];
        let mut out = [0.0; 3];
        let mut x = self.spec.x0;
        let mut t = 0.0;
        let mut next_jump = if self.rate > 0.0 {
            let e: f64 = Exp1.sample(rng);
            e / self.rate
        } else {
            f64::INFINITY
        };
        for (k, &m) in marks.iter().enumerate() {
            while next_jump < m {
                x = self.diffuse(x, t, next_jump, dt, rng);
                t = next_jump;
                if x.abs() > BLOWUP {
                    return None;
                }
                x += self.jump(x, rng);
                let e: f64 = Exp1.sample(rng);
                next_jump = t + e / self.rate;
            }
            x = self.diffuse(x, t, m, dt, rng);
            t = m;
            if x.abs() > BLOWUP || !x.is_finite() {
                return None;
            }
            out[k] = x;
        }
        Some(out)
    }
}

/// Runs `n_paths` independent paths; fails when more than 1% blow up.
pub fn simulate(spec: &SdeSpec, p: &SimParams) -> Result<SimOutput, SdeError> {
    let driver = PathDriver::new(spec);
    let rows = exec::map_indexed(p.n_paths, p.par, |i| {
        let mut rng =
            ChaCha8Rng::seed_from_u64(p.seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        driver.run(p.t_final, p.dt, &mut rng)
    });
    let mut out = SimOutput {
        at_half: Vec::with_capacity(p.n_paths),
        at_three_quarters: Vec::with_capacity(p.n_paths),
        at_final: Vec::with_capacity(p.n_paths),
        aborted: 0,
    };
    for r in rows {
        match r {
            Some([a, b, c]) => {
                out.at_half.push(a);
                out.at_three_quarters.push(b);
                out.at_final.push(c);
            }
            None => out.aborted += 1,
        }
    }
    if out.aborted * 100 > p.n_paths {
        return Err(SdeError::TooManyBlowups {
            aborted: out.aborted,
            total: p.n_paths,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Comparison against a grid density

#[derive(Debug, Clone, Copy)]
pub struct CompareMetrics {
    /// L¹ distance between the sample histogram (on the grid cells) and the
    /// grid density; mass outside the grid counts in full.
    pub l1: f64,
    /// Kolmogorov-Smirnov distance of the CDFs at the cell edges.
    pub ks: f64,
}

pub fn compare(samples: &[f64], grid: &[f64], h: f64, eta: &[f64]) -> CompareMetrics {
    let n = grid.len();
    assert!(n > 0 && samples.len() > 0);
    let lo = grid[0] - 0.5 * h;
    let hi = grid[n - 1] + 0.5 * h;
    let mut counts = vec![0usize; n];
    let mut below = 0usize;
    let mut above = 0usize;
    for &s in samples {
        if s < lo {
            below += 1;
        } else if s >= hi {
            above += 1;
        } else {
            let j = (((s - lo) / h) as usize).min(n - 1);
            counts[j] += 1;
        }
    }
    let total = samples.len() as f64;
    let eta_mass: f64 = eta.iter().sum::<f64>() * h;
    let mut l1 = (below + above) as f64 / total;
    let mut ks = 0.0f64;
    let mut cdf_s = below as f64 / total;
    let mut cdf_e = 0.0;
    for j in 0..n {
        let p_hat = counts[j] as f64 / total;
        l1 += (p_hat - eta[j] * h).abs();
        cdf_s += p_hat;
        cdf_e += eta[j] * h / eta_mass.max(1e-300);
        ks = ks.max((cdf_s - cdf_e).abs());
    }
    CompareMetrics { l1, ks }
}

/// Two-sample Kolmogorov-Smirnov distance (stationarity diagnostic between
/// checkpoints).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        // advance past all entries tied at the current value before
        // measuring, so equal samples contribute no distance
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, t: f64, dt: f64) -> SimParams {
        SimParams {
            n_paths: n,
            t_final: t,
            dt,
            seed: 7,
            par: true,
        }
    }

    #[test]
    fn poisson_counting_mean() {
        // dX = dN with rate 2: X_T ~ Poisson(2T)
        let spec = SdeSpec {
            drift: ScalarFunction::constant(0.0),
            sigma: ScalarFunction::constant(0.0),
            jumps: Jumps::Compound {
                rate: 2.0,
                size: JumpSize::Atoms(vec![(1.0, 1.0)]),
                phi: None,
            },
            x0: 0.0,
        };
        let out = simulate(&spec, &params(20_000, 5.0, 0.1)).unwrap();
        let mean = out.at_final.iter().sum::<f64>() / out.at_final.len() as f64;
        let se = (10.0f64 / 20_000.0).sqrt();
        assert!((mean - 10.0).abs() < 4.0 * se, "mean {mean}");
    }

    #[test]
    fn jump_flip_orbit() {
        // jumps −2·sgn(X) from x0 = 1 stay on {−1, 1} exactly
        let spec = SdeSpec {
            drift: ScalarFunction::constant(0.0),
            sigma: ScalarFunction::constant(0.0),
            jumps: Jumps::Compound {
                rate: 1.0,
                size: JumpSize::Atoms(vec![(1.0, 1.0)]),
                phi: Some(ScalarFunction::parse("-2*sgn(x)").unwrap()),
            },
            x0: 1.0,
        };
        let out = simulate(&spec, &params(2_000, 12.0, 0.05)).unwrap();
        let ones = out.at_final.iter().filter(|&&x| x == 1.0).count();
        let negs = out.at_final.iter().filter(|&&x| x == -1.0).count();
        assert_eq!(ones + negs, out.at_final.len());
        // the two states are near-equally occupied
        let frac = ones as f64 / out.at_final.len() as f64;
        assert!((frac - 0.5).abs() < 0.05, "frac {frac}");
    }

    #[test]
    fn ou_stationary_variance() {
        let spec = SdeSpec {
            drift: ScalarFunction::parse("0-x").unwrap(),
            sigma: ScalarFunction::constant(1.0),
            jumps: Jumps::None,
            x0: 0.0,
        };
        let out = simulate(&spec, &params(20_000, 8.0, 0.01)).unwrap();
        let n = out.at_final.len() as f64;
        let mean = out.at_final.iter().sum::<f64>() / n;
        let var = out.at_final.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        assert!((var - 0.5).abs() < 0.02, "var {var}");
    }

    #[test]
    fn reproducible_across_scheduling() {
        let spec = SdeSpec {
            drift: ScalarFunction::parse("0-x").unwrap(),
            sigma: ScalarFunction::constant(1.0),
            jumps: Jumps::Compound {
                rate: 0.5,
                size: JumpSize::Exponential { mean: 1.0 },
                phi: None,
            },
            x0: 0.0,
        };
        let a = simulate(&spec, &params(500, 2.0, 0.02)).unwrap();
        let b = simulate(&spec, &params(500, 2.0, 0.02)).unwrap();
        assert_eq!(a.at_final, b.at_final);
        let mut p = params(500, 2.0, 0.02);
        p.par = false;
        let c = simulate(&spec, &p).unwrap();
        assert_eq!(a.at_final, c.at_final);
        p.seed = 8;
        let d = simulate(&spec, &p).unwrap();
        assert_ne!(a.at_final, d.at_final);
    }

    #[test]
    fn stable_tail_sampler() {
        // single truncated stable jumps have tail (y/ε)^{−α} above ε
        let spec = SdeSpec {
            drift: ScalarFunction::constant(0.0),
            sigma: ScalarFunction::constant(0.0),
            jumps: Jumps::StablePos { alpha: 0.5, c: 0.5 },
            x0: 0.0,
        };
        let driver = PathDriver::new(&spec);
        // rate λ_ε = c ε^{−α}/α = ε^{−1/2}, compensation 2c√ε = √ε·...
        assert!((driver.rate - STABLE_EPS.powf(-0.5)).abs() < 1e-12);
        assert!((driver.comp - STABLE_EPS.sqrt()).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = 100_000;
        let over = (0..m)
            .filter(|_| driver.jump(0.0, &mut rng) > 4.0 * STABLE_EPS)
            .count();
        let frac = over as f64 / m as f64;
        assert!((frac - 0.5).abs() < 0.01, "frac {frac}"); // 4^{−1/2}
    }

    #[test]
    fn compare_discriminates() {
        let n = 200;
        let h = 12.0 / n as f64;
        let grid: Vec<f64> = (0..n).map(|i| -6.0 + (i as f64 + 0.5) * h).collect();
        let dens =
            |v: f64, x: f64| (-x * x / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
        let eta: Vec<f64> = grid.iter().map(|&x| dens(0.5, x)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<f64> = (0..50_000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * 0.5f64.sqrt()
            })
            .collect();
        let good = compare(&samples, &grid, h, &eta);
        assert!(good.l1 < 0.03, "l1 {}", good.l1);
        assert!(good.ks < 0.01, "ks {}", good.ks);
        let wrong: Vec<f64> = grid.iter().map(|&x| dens(1.0, x)).collect();
        let bad = compare(&samples, &grid, h, &wrong);
        assert!(bad.l1 > 0.15 && bad.ks > 0.05);
        // two-sample KS of identical samples is 0, of shifted samples large
        assert_eq!(ks_two_sample(&samples, &samples), 0.0);
        let shifted: Vec<f64> = samples.iter().map(|x| x + 1.0).collect();
        assert!(ks_two_sample(&samples, &shifted) > 0.3);
    }
}
