//! The Lévy-type operator on smooth compactly supported test functions.
//!
//! Two equivalent forms are implemented: the raw compensated-jump form
//! (`apply_direct`) and the decomposed representation with drift correction
//! a_π and the tail-density jump terms (`apply_decomposed`). Their agreement
//! is the central correctness property of the crate. Candidate measures are
//! screened by the invariance residual ∫ Af dη over a fixed bump family.

use thiserror::Error;

use crate::exec;
use crate::expr::ScalarFunction;
use crate::levy::{a_pi, Decomposition, DensityPart, LevyKernel, LevyMeasureSpec, Measure1D};
use crate::quad::{self, QuadError, QuadResult, REL_TOL};

#[derive(Debug, Error, Clone)]
pub enum OperatorError {
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("residual window did not converge for bump(center={center}, width={width}): last increment {increment:.3e}")]
    WindowGrowth {
        center: f64,
        width: f64,
        increment: f64,
    },
}

/// Coefficients of the operator: drift a(x), diffusion b(x) ≥ 0 and the
/// jump kernel Π(x, ·).
#[derive(Debug, Clone)]
pub struct CharTriplet {
    pub a: ScalarFunction,
    pub b: ScalarFunction,
    pub kernel: LevyKernel,
}

// ---------------------------------------------------------------------------
// Bump test functions

/// f(x) = ψ((x−c)/w) with ψ(u) = exp(1 − 1/(1−u²)) on |u| < 1, 0 outside.
#[derive(Debug, Clone, Copy)]
pub struct BumpFunction {
    pub center: f64,
    pub width: f64,
}

fn psi(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

// ψ' = ψ·s with s = −2u/(1−u²)²; ψ'' = ψ·(s² + s') with
// s' = −2(1+3u²)/(1−u²)³.
fn psi_d1(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        return 0.0;
    }
    let d = 1.0 - u * u;
    psi(u) * (-2.0 * u / (d * d))
}

fn psi_d2(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        return 0.0;
    }
    let d = 1.0 - u * u;
    let s = -2.0 * u / (d * d);
    let sp = -2.0 * (1.0 + 3.0 * u * u) / (d * d * d);
    psi(u) * (s * s + sp)
}

impl BumpFunction {
    pub fn new(center: f64, width: f64) -> Self {
        assert!(width > 0.0);
        BumpFunction { center, width }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.width, self.center + self.width)
    }

    pub fn value(&self, x: f64) -> f64 {
        psi((x - self.center) / self.width)
    }

    pub fn d1(&self, x: f64) -> f64 {
        psi_d1((x - self.center) / self.width) / self.width
    }

    pub fn d2(&self, x: f64) -> f64 {
        psi_d2((x - self.center) / self.width) / (self.width * self.width)
    }
}

/// The fixed residual-check family: 17 uniformly spaced centers over
/// [lo, hi], widths 0.5, 1 and 2.
pub fn standard_bump_family(lo: f64, hi: f64) -> Vec<BumpFunction> {
    let mut fs = Vec::with_capacity(51);
    for &w in &[0.5, 1.0, 2.0] {
        for i in 0..17 {
            let c = lo + (hi - lo) * i as f64 / 16.0;
            fs.push(BumpFunction::new(c, w));
        }
    }
    fs
}

// ---------------------------------------------------------------------------
// Operator application

/// Integral over a finite or half-infinite interval whose only admissible
/// singularity sits at an endpoint equal to 0.
fn integrate_piece<F: Fn(f64) -> f64>(g: &F, a: f64, b: f64) -> QuadResult {
    if b <= a {
        return Ok(0.0);
    }
    if a == 0.0 {
        if b.is_infinite() {
            quad::integrate_half_line(g, REL_TOL)
        } else {
            quad::integrate_to_zero(g, b, REL_TOL)
        }
    } else if b == 0.0 {
        let m = |u: f64| g(-u);
        if a.is_infinite() {
            quad::integrate_half_line(&m, REL_TOL)
        } else {
            quad::integrate_to_zero(&m, -a, REL_TOL)
        }
    } else if b.is_infinite() {
        quad::integrate_to_inf(g, a, REL_TOL)
    } else if a.is_infinite() {
        let m = |u: f64| g(-u);
        quad::integrate_to_inf(&m, -b, REL_TOL)
    } else {
        quad::integrate(g, a, b, REL_TOL)
    }
}

/// Splits (0, ∞) (side = +1) or (−∞, 0) (side = −1) at the given interior
/// breakpoints and sums the pieces.
fn integrate_side<F: Fn(f64) -> f64>(g: &F, side: f64, breaks: &[f64]) -> QuadResult {
    let mut pts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|p| p.is_finite() && p * side > 0.0)
        .collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    let mut s = 0.0;
    if side > 0.0 {
        let mut lo = 0.0;
        for &p in &pts {
            s += integrate_piece(g, lo, p)?;
            lo = p;
        }
        s += integrate_piece(g, lo, f64::INFINITY)?;
    } else {
        let mut lo = f64::NEG_INFINITY;
        for &p in &pts {
            s += integrate_piece(g, lo, p)?;
            lo = p;
        }
        s += integrate_piece(g, lo, 0.0)?;
    }
    Ok(s)
}

/// The compensated jump integral of the density part of m at x.
fn jump_density_integral(
    m: &LevyMeasureSpec,
    f: &BumpFunction,
    x: f64,
    fx: f64,
    dfx: f64,
) -> QuadResult {
    let p = match &m.density {
        None => return Ok(0.0),
        Some(p) => p.clone(),
    };
    let (s0, s1) = m.support;
    let (blo, bhi) = f.support();
    let d2fx = f.d2(x);
    // below this the compensated difference is pure cancellation noise in
    // doubles; its Taylor form ½f''(x)y² is exact to O(y³)
    const EPS_TINY: f64 = 1e-6;
    let g = |y: f64| {
        if y < s0 || y > s1 {
            return 0.0;
        }
        if y.abs() < EPS_TINY {
            return 0.5 * d2fx * y * y * p.value(y);
        }
        let v = f.value(x + y) - fx;
        let v = if y.abs() < 1.0 { v - dfx * y } else { v };
        v * p.value(y)
    };
    // break at the compensation cutoff, the bump support edges and the
    // density support edges so every piece is smooth inside
    let breaks = [1.0, -1.0, blo - x, bhi - x, s0, s1];
    Ok(integrate_side(&g, 1.0, &breaks)? + integrate_side(&g, -1.0, &breaks)?)
}

/// Af(x) in the raw form
/// a(x)f'(x) + ½b(x)f''(x) + ∫(f(x+y) − f(x) − f'(x)y·1{|y|<1}) Π(x,dy).
/// Atoms exactly at |y| = 1 are not compensated (strict inequality).
pub fn apply_direct(t: &CharTriplet, f: &BumpFunction, x: f64) -> QuadResult {
    let fx = f.value(x);
    let dfx = f.d1(x);
    let mut s = t.a.value(x) * dfx + 0.5 * t.b.value(x) * f.d2(x);
    if !t.kernel.is_zero() {
        let m = t.kernel.at(x);
        for &(q, mass) in &m.atoms {
            let mut v = f.value(x + q) - fx;
            if q.abs() < 1.0 {
                v -= dfx * q;
            }
            s += mass * v;
        }
        s += jump_density_integral(&m, f, x, fx, dfx)?;
    }
    Ok(s)
}

/// Af(x) in the decomposed representation
/// (a+a_π)f' + ½bf'' + [∫f(x+y)ν − f·ν(ℝ)] + ∫sgn(y)f'(x+y)μ̃(y)dy
/// + ∫f''(x+y)ρ̄̃(y)dy, with μ̃ the radial tail of μ(x,·) and ρ̄̃ the
/// integrated radial tail of ρ(x,·).
pub fn apply_decomposed(
    t: &CharTriplet,
    d: &Decomposition,
    f: &BumpFunction,
    x: f64,
) -> QuadResult {
    let fx = f.value(x);
    let mut s = (t.a.value(x) + a_pi(&t.kernel, d, x)?) * f.d1(x) + 0.5 * t.b.value(x) * f.d2(x);
    if t.kernel.is_zero() {
        return Ok(s);
    }
    let (blo, bhi) = f.support();
    if !d.h_nu.is_zero() {
        let nu = d.nu_at(&t.kernel, x);
        s += nu.integrate_interval(&|y: f64| f.value(x + y), blo - x, bhi - x, true, true)?;
        if fx != 0.0 {
            s -= fx * nu.total_mass()?;
        }
    }
    if !d.h_mu.is_zero() {
        let mu = d.mu_at(&t.kernel, x);
        if !mu.is_empty() {
            let g = |y: f64| {
                if y <= blo - x || y >= bhi - x {
                    return 0.0;
                }
                y.signum() * f.d1(x + y) * mu.tail(y).unwrap_or(f64::NAN)
            };
            let mut breaks = vec![blo - x, bhi - x];
            breaks.extend(mu.atoms.iter().map(|&(q, _)| q));
            let v = integrate_side(&g, 1.0, &breaks)? + integrate_side(&g, -1.0, &breaks)?;
            if v.is_nan() {
                return Err(QuadError::NoConvergence {
                    a: blo - x,
                    b: bhi - x,
                    err: f64::NAN,
                });
            }
            s += v;
        }
    }
    if !d.h_rho.is_zero() {
        let rho = d.rho_at(&t.kernel, x);
        if !rho.is_empty() {
            let g = |y: f64| {
                if y <= blo - x || y >= bhi - x {
                    return 0.0;
                }
                f.d2(x + y) * rho.integrated_tail(y).unwrap_or(f64::NAN)
            };
            let mut breaks = vec![blo - x, bhi - x];
            breaks.extend(rho.atoms.iter().map(|&(q, _)| q));
            let v = integrate_side(&g, 1.0, &breaks)? + integrate_side(&g, -1.0, &breaks)?;
            if v.is_nan() {
                return Err(QuadError::NoConvergence {
                    a: blo - x,
                    b: bhi - x,
                    err: f64::NAN,
                });
            }
            s += v;
        }
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// Invariance residual

/// ∫ Af dη for each bump. Density parts are integrated over windows
/// [−W, W] with W doubling from 16 until the increment drops below tol/10;
/// atoms are summed exactly. Infinite (unnormalizable) measures are fine as
/// long as Af decays η-integrably.
pub fn invariance_residual(
    t: &CharTriplet,
    eta: &Measure1D,
    fs: &[BumpFunction],
    tol: f64,
    par: bool,
) -> Result<Vec<f64>, OperatorError> {
    let results = exec::map_indexed(fs.len(), par, |i| residual_one(t, eta, &fs[i], tol));
    results.into_iter().collect()
}

fn residual_one(
    t: &CharTriplet,
    eta: &Measure1D,
    f: &BumpFunction,
    tol: f64,
) -> Result<f64, OperatorError> {
    let mut s = 0.0;
    for &(q, mass) in &eta.atoms {
        s += mass * apply_direct(t, f, q)?;
    }
    match &eta.density {
        None => {}
        Some(DensityPart::Grid { nodes, values }) => {
            // trapezoid over the stored nodes
            let mut acc = 0.0;
            for j in 1..nodes.len() {
                let dx = nodes[j] - nodes[j - 1];
                let g0 = apply_direct(t, f, nodes[j - 1])? * values[j - 1];
                let g1 = apply_direct(t, f, nodes[j])? * values[j];
                acc += 0.5 * dx * (g0 + g1);
            }
            s += acc;
        }
        Some(DensityPart::Fun { f: dens, domain }) => {
            let g = |x: f64| apply_direct(t, f, x).unwrap_or(f64::NAN) * dens.value(x);
            let mut w = 16.0f64.max(f.support().0.abs()).max(f.support().1.abs());
            let clamp = |v: f64, lo: f64, hi: f64| v.max(lo).min(hi);
            let (dlo, dhi) = *domain;
            let mut total = quad::integrate(&g, clamp(-w, dlo, dhi), clamp(w, dlo, dhi), 1e-9)?;
            let mut converged = false;
            let mut last_inc = f64::INFINITY;
            for _ in 0..8 {
                let w2 = 2.0 * w;
                let lo_inc =
                    quad::integrate(&g, clamp(-w2, dlo, dhi), clamp(-w, dlo, dhi), 1e-9)?;
                let hi_inc = quad::integrate(&g, clamp(w, dlo, dhi), clamp(w2, dlo, dhi), 1e-9)?;
                let inc = lo_inc + hi_inc;
                total += inc;
                w = w2;
                last_inc = inc.abs();
                if last_inc < tol / 10.0 {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(OperatorError::WindowGrowth {
                    center: f.center,
                    width: f.width,
                    increment: last_inc,
                });
            }
            if total.is_nan() {
                return Err(OperatorError::Quad(QuadError::NoConvergence {
                    a: -w,
                    b: w,
                    err: f64::NAN,
                }));
            }
            s += total;
        }
    }
    Ok(s)
}
