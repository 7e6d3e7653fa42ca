//! The one-dimensional Volterra-Fredholm integral equation for invariant
//! densities.
//!
//! Integrating the stationarity (flux-balance) equation of the decomposed
//! operator twice turns ∫𝒜f dη = 0 into
//!
//!   F₁(x)η(x) = c₁x + c₂ + ∫ κ₁(x,z) η(z) dz + ∫_{(0,x]} κ₂(z) η(z) dz
//!
//! with F₁ = ½b, a Fredholm kernel κ₁ built from the radial tails of the
//! decomposition and a Volterra kernel κ₂ = a + a_π (for x ≤ 0 the
//! Volterra part reads −∫_{(x,0]}). The equation is collocated on a uniform
//! midpoint grid and solved as a constrained least-squares problem for
//! (η, c₁, c₂).

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::exec;
use crate::expr::ScalarFunction;
use crate::levy::{a_pi, Decomposition, LevyMeasureSpec};
use crate::operator::CharTriplet;
use crate::quad::{self, QuadError, QuadResult};

#[derive(Debug, Error, Clone)]
pub enum VfieError {
    #[error("kernel entry at x={x}, z={z} failed: {source}")]
    Entry { x: f64, z: f64, source: QuadError },
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("least-squares solve failed: {0}")]
    Solve(String),
    #[error("nonnegativity active set did not stabilize within {0} rounds")]
    ActiveSet(usize),
}

// ---------------------------------------------------------------------------
// Kernels

/// ∫_0^x sgn(w−z) m̃(z, w−z) dw for the signed radial tail m̃ of a fixed
/// measure, with the convention ∫_0^x = −∫_x^0 for x < 0. This is the
/// contribution of a tail-represented jump part to κ₁.
fn tail_window(m: &LevyMeasureSpec, x: f64, z: f64) -> QuadResult {
    if m.is_empty() {
        return Ok(0.0);
    }
    if x >= 0.0 {
        m.signed_tail_int(-z, x - z)
    } else {
        Ok(-m.signed_tail_int(x - z, -z)?)
    }
}

pub(crate) fn kappa1_parts(
    nu: &LevyMeasureSpec,
    mu: &LevyMeasureSpec,
    rho: &LevyMeasureSpec,
    x: f64,
    z: f64,
) -> QuadResult {
    let mut s = tail_window(nu, x, z)? + tail_window(mu, x, z)?;
    if !rho.is_empty() {
        let v = x - z;
        s -= if v == 0.0 {
            // the integrated tail jumps across 0; use the two-sided mean
            0.5 * (rho.tail_int_pos(0.0, f64::INFINITY)?
                + rho.tail_int_neg(f64::NEG_INFINITY, 0.0)?)
        } else {
            rho.integrated_tail(v)?
        };
    }
    Ok(s)
}

/// Fredholm kernel
/// κ₁(x,z) = ∫_0^x sgn(w−z)[ν̃ + μ̃](z, w−z) dw − ρ̄̃(z, x−z).
pub fn kappa1(t: &CharTriplet, d: &Decomposition, x: f64, z: f64) -> QuadResult {
    let nu = d.nu_at(&t.kernel, z);
    let mu = d.mu_at(&t.kernel, z);
    let rho = d.rho_at(&t.kernel, z);
    kappa1_parts(&nu, &mu, &rho, x, z)
}

/// Volterra kernel κ₂(z) = a(z) + a_π(z). The diffusion enters only
/// through F₁ = ½b on the left-hand side, and with the jump parts carried
/// by their radial tails in κ₁ no (x−z) term remains either, so the kernel
/// depends on z alone.
pub fn kappa2(t: &CharTriplet, d: &Decomposition, z: f64) -> QuadResult {
    Ok(t.a.value(z) + a_pi(&t.kernel, d, z)?)
}

// ---------------------------------------------------------------------------
// Discretization

/// Collocated system on the midpoint grid x_i = −R + (i+½)h, h = 2R/N.
/// `k1` and `k2` already carry the quadrature weights: row i of the
/// discrete equation is f1[i]·η_i = c₁x_i + c₂ + Σ_j (k1+k2)[i,j] η_j.
#[derive(Debug, Clone)]
pub struct VfieSystem {
    pub grid: Vec<f64>,
    pub h: f64,
    pub f1: Vec<f64>,
    pub k1: DMatrix<f64>,
    pub k2: DMatrix<f64>,
}

/// Width (in cells) of the band around the diagonal where κ₁ is integrated
/// over the cell instead of sampled at the midpoint; the integrated tail has
/// a kink of fractional order at x = z.
const DIAG_BAND: i64 = 4;

pub fn assemble(
    t: &CharTriplet,
    d: &Decomposition,
    r: f64,
    n: usize,
    par: bool,
) -> Result<VfieSystem, VfieError> {
    assert!(n >= 32 && r > 0.0);
    let h = 2.0 * r / n as f64;
    let grid: Vec<f64> = (0..n).map(|i| -r + (i as f64 + 0.5) * h).collect();
    let f1: Vec<f64> = grid.iter().map(|&x| 0.5 * t.b.value(x)).collect();
    let no_jumps = t.kernel.is_zero();

    // column-major assembly: materialize the z-dependent measures once per
    // column, then fill both kernels down the column
    let cols = exec::map_indexed(n, par, |j| -> Result<(Vec<f64>, f64), VfieError> {
        let z = grid[j];
        let wrap = |e: QuadError, x: f64| VfieError::Entry { x, z, source: e };
        let base2 = t.a.value(z) + a_pi(&t.kernel, d, z).map_err(|e| wrap(e, z))?;
        if no_jumps {
            return Ok((vec![0.0; n], base2));
        }
        let nu = d.nu_at(&t.kernel, z);
        let mu = d.mu_at(&t.kernel, z);
        let rho = d.rho_at(&t.kernel, z);
        let mut col = vec![0.0; n];
        for i in 0..n {
            let x = grid[i];
            col[i] = if (i as i64 - j as i64).abs() <= DIAG_BAND {
                // cell integral of z' ↦ κ₁(x, z') over cell j
                let g = |zp: f64| kappa1(t, d, x, zp).unwrap_or(f64::NAN);
                let v = quad::integrate(&g, z - 0.5 * h, z + 0.5 * h, 1e-7)
                    .map_err(|e| wrap(e, x))?;
                if !v.is_finite() {
                    return Err(VfieError::Entry {
                        x,
                        z,
                        source: QuadError::NoConvergence {
                            a: z - 0.5 * h,
                            b: z + 0.5 * h,
                            err: f64::NAN,
                        },
                    });
                }
                v
            } else {
                h * kappa1_parts(&nu, &mu, &rho, x, z).map_err(|e| wrap(e, x))?
            };
        }
        Ok((col, base2))
    });

    let mut k1 = DMatrix::zeros(n, n);
    let mut k2 = DMatrix::zeros(n, n);
    for (j, c) in cols.into_iter().enumerate() {
        let (col, base2) = c?;
        for i in 0..n {
            k1[(i, j)] = col[i];
        }
        // Volterra weights: full cells strictly between 0 and x, half weight
        // on the diagonal cell (the cell straddles the integration limit)
        let z = grid[j];
        for i in 0..n {
            let x = grid[i];
            let w = if x > 0.0 && z > 0.0 && z <= x {
                if i == j {
                    0.5 * h
                } else {
                    h
                }
            } else if x < 0.0 && z < 0.0 && z >= x {
                if i == j {
                    -0.5 * h
                } else {
                    -h
                }
            } else {
                0.0
            };
            k2[(i, j)] = w * base2;
        }
    }
    Ok(VfieSystem { grid, h, f1, k1, k2 })
}

// ---------------------------------------------------------------------------
// Least-squares solve

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Append a heavily weighted row forcing h·Ση = 1.
    pub normalize: bool,
    pub pin_c1: Option<f64>,
    pub pin_c2: Option<f64>,
    /// Clip-and-resolve active-set loop forcing η ≥ 0.
    pub nonneg: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            normalize: true,
            pin_c1: None,
            pin_c2: None,
            nonneg: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VfieSolution {
    pub grid: Vec<f64>,
    pub h: f64,
    pub eta: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
    /// RMS of the unweighted collocation residual rows.
    pub residual_norm: f64,
    /// Extrapolated density mass beyond the grid, from the log-linear decay
    /// over the last decade of each side; infinite when the solution does
    /// not decay (a non-normalizable invariant measure such as Lebesgue).
    pub mass_leak: f64,
    /// Numerical nullspace dimension of the stacked system.
    pub nullspace_dim: usize,
}

const NORMALIZE_WEIGHT: f64 = 1e6;
const MAX_ACTIVE_ROUNDS: usize = 50;

pub fn solve(sys: &VfieSystem, opts: &SolveOptions) -> Result<VfieSolution, VfieError> {
    let n = sys.grid.len();
    let free_c1 = opts.pin_c1.is_none();
    let free_c2 = opts.pin_c2.is_none();
    let nc = free_c1 as usize + free_c2 as usize;
    let nrows = n + opts.normalize as usize;

    // collocation block: (diag F₁ − K₁ − K₂ | −x | −1), rhs from pinned
    // constants
    let mut a0 = DMatrix::zeros(nrows, n + nc);
    let mut rhs = DVector::zeros(nrows);
    for i in 0..n {
        for j in 0..n {
            a0[(i, j)] = -sys.k1[(i, j)] - sys.k2[(i, j)];
        }
        a0[(i, i)] += sys.f1[i];
        let mut c = n;
        if free_c1 {
            a0[(i, c)] = -sys.grid[i];
            c += 1;
        }
        if free_c2 {
            a0[(i, c)] = -1.0;
        }
        rhs[i] = opts.pin_c1.unwrap_or(0.0) * sys.grid[i] + opts.pin_c2.unwrap_or(0.0);
    }
    if opts.normalize {
        for j in 0..n {
            a0[(n, j)] = NORMALIZE_WEIGHT * sys.h;
        }
        rhs[n] = NORMALIZE_WEIGHT;
    }

    // active-set loop: minimal-norm least squares, then pin negative nodes
    // to zero and re-solve until the sign pattern is clean
    let mut active = vec![false; n];
    let mut xi = DVector::zeros(n + nc);
    let mut nullspace_dim;
    let mut rounds = 0usize;
    loop {
        rounds += 1;
        if rounds > MAX_ACTIVE_ROUNDS {
            return Err(VfieError::ActiveSet(MAX_ACTIVE_ROUNDS));
        }
        let keep: Vec<usize> = (0..n + nc)
            .filter(|&j| j >= n || !active[j])
            .collect();
        let a = a0.select_columns(keep.iter());
        let svd = a.svd(true, true);
        let smax = svd.singular_values.max();
        let eps = 1e-12 * smax.max(1e-300);
        nullspace_dim = keep.len()
            - svd
                .singular_values
                .iter()
                .filter(|&&s| s > 1e-10 * smax)
                .count();
        let sol = svd
            .solve(&rhs, eps)
            .map_err(|e| VfieError::Solve(e.to_string()))?;
        xi.fill(0.0);
        for (t, &j) in keep.iter().enumerate() {
            xi[j] = sol[t];
        }
        if !opts.nonneg {
            break;
        }
        let scale = xi.rows(0, n).amax().max(1e-300);
        let mut dirty = false;
        // only meaningfully negative nodes force a re-solve; noise-level
        // negatives (underflowing density regions) are clipped at the end
        for j in 0..n {
            if !active[j] && xi[j] < -1e-8 * scale {
                active[j] = true;
                dirty = true;
            }
        }
        if !dirty {
            break;
        }
    }

    let mut eta: Vec<f64> = (0..n).map(|j| xi[j].max(0.0)).collect();
    if opts.nonneg {
        for (j, &on) in active.iter().enumerate() {
            if on {
                eta[j] = 0.0;
            }
        }
    }
    let mut c = n;
    let c1 = if free_c1 {
        let v = xi[c];
        c += 1;
        v
    } else {
        opts.pin_c1.unwrap()
    };
    let c2 = if free_c2 { xi[c] } else { opts.pin_c2.unwrap() };

    // collocation residual of the clipped solution
    let mut rss = 0.0;
    for i in 0..n {
        let mut s = sys.f1[i] * eta[i] - c1 * sys.grid[i] - c2;
        for j in 0..n {
            s -= (sys.k1[(i, j)] + sys.k2[(i, j)]) * eta[j];
        }
        rss += s * s;
    }
    let residual_norm = (rss / n as f64).sqrt();

    let mass_leak = leak_side(&sys.grid, &eta, false) + leak_side(&sys.grid, &eta, true);

    Ok(VfieSolution {
        grid: sys.grid.clone(),
        h: sys.h,
        eta,
        c1,
        c2,
        residual_norm,
        mass_leak,
        nullspace_dim,
    })
}

/// Log-linear fit of the density over the outermost decade of one side of
/// the grid, extrapolated beyond the boundary. Non-decaying fits report an
/// infinite leak.
fn leak_side(grid: &[f64], eta: &[f64], right: bool) -> f64 {
    let n = grid.len();
    let m = (n / 10).max(4).min(n);
    let idx: Vec<usize> = if right {
        (n - m..n).collect()
    } else {
        (0..m).collect()
    };
    let pts: Vec<(f64, f64)> = idx
        .iter()
        .filter(|&&j| eta[j] > 0.0)
        .map(|&j| {
            let s = if right { grid[j] } else { -grid[j] };
            (s, eta[j].ln())
        })
        .collect();
    if pts.len() < 4 {
        return 0.0; // the side has (numerically) died out already
    }
    let k = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let det = k * sxx - sx * sx;
    if det <= 0.0 {
        return f64::INFINITY;
    }
    let slope = (k * sxy - sx * sy) / det;
    let inter = (sy - slope * sx) / k;
    if slope >= -1e-9 {
        return f64::INFINITY;
    }
    let edge = grid[if right { n - 1 } else { 0 }].abs();
    // ∫_edge^∞ exp(inter + slope·s) ds
    (inter + slope * edge).exp() / (-slope)
}

// ---------------------------------------------------------------------------
// Fractional diagnostic

/// RMS over positive grid points of c + φ(x)η(x) − α⁻¹∫_0^x η(y)(x−y)^{−α}dy
/// with the Riemann-Liouville integral evaluated by product integration of
/// the piecewise-linear grid density (exact panel moments of (x−y)^{−α}).
pub fn fractional_check(sol: &VfieSolution, alpha: f64, phi: &ScalarFunction, c: f64) -> f64 {
    assert!(alpha > 0.0 && alpha < 1.0);
    let n = sol.grid.len();
    let mut rss = 0.0;
    let mut cnt = 0usize;
    for i in 0..n {
        let x = sol.grid[i];
        if x <= 0.0 {
            continue;
        }
        let rl = rl_integral(&sol.grid, &sol.eta, x, alpha) / alpha;
        let res = c + phi.value(x) * sol.eta[i] - rl;
        rss += res * res;
        cnt += 1;
    }
    if cnt == 0 {
        0.0
    } else {
        (rss / cnt as f64).sqrt()
    }
}

/// ∫_0^x η(y)(x−y)^{−α} dy for piecewise-linear η with knots on the grid.
fn rl_integral(grid: &[f64], eta: &[f64], x: f64, alpha: f64) -> f64 {
    let mut s = 0.0;
    for j in 1..grid.len() {
        let (a, b) = (grid[j - 1].max(0.0), grid[j].min(x));
        if b <= a {
            continue;
        }
        let hh = grid[j] - grid[j - 1];
        let ea = eta[j - 1] + (eta[j] - eta[j - 1]) * (a - grid[j - 1]) / hh;
        let slope = (eta[j] - eta[j - 1]) / hh;
        // moments of (x−y)^{−α} against 1 and (y−a) on [a, b]
        let (ua, ub) = (x - a, x - b);
        let p1 = 1.0 - alpha;
        let p2 = 2.0 - alpha;
        let i0 = (ua.powf(p1) - ub.powf(p1)) / p1;
        let i1 = ua * i0 - (ua.powf(p2) - ub.powf(p2)) / p2;
        s += ea * i0 + slope * i1;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ScalarFunction;
    use crate::levy::{
        default_decomposition, ActivityClass, DecompKind, Decomposition, LevyKernel, Weight,
    };
    use approx::assert_relative_eq;

    fn no_jump_triplet(a: &str, b: &str) -> CharTriplet {
        CharTriplet {
            a: ScalarFunction::parse(a).unwrap(),
            b: ScalarFunction::parse(b).unwrap(),
            kernel: LevyKernel::Zero,
        }
    }

    fn ou() -> CharTriplet {
        no_jump_triplet("0-x", "1")
    }

    fn gaussian_half(x: f64) -> f64 {
        (1.0 / std::f64::consts::PI).sqrt() * (-x * x).exp()
    }

    #[test]
    fn kappa1_small_jump_atom() {
        // ρ = δ₁: κ₁(x,z) = −(1 − (x−z)) for 0 < x−z < 1, 0 beyond, 0 for x < z
        let t = CharTriplet {
            a: ScalarFunction::constant(0.0),
            b: ScalarFunction::constant(0.0),
            kernel: LevyKernel::Constant(LevyMeasureSpec::from_atoms(vec![(1.0, 1.0)])),
        };
        let d = Decomposition {
            h_nu: Weight::Zero,
            h_mu: Weight::Zero,
            h_rho: Weight::One,
            kind: None,
        };
        assert_relative_eq!(kappa1(&t, &d, 1.5, 1.0).unwrap(), -0.5, max_relative = 1e-12);
        assert_relative_eq!(kappa1(&t, &d, 1.2, 0.4).unwrap(), -0.2, max_relative = 1e-12);
        assert_eq!(kappa1(&t, &d, 3.0, 1.0).unwrap(), 0.0);
        assert_eq!(kappa1(&t, &d, 0.5, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn kappa1_large_jump_atom() {
        // ν = δ₁: the tail window gives min(x−z, 1)₊ for x > 0
        let t = CharTriplet {
            a: ScalarFunction::constant(0.0),
            b: ScalarFunction::constant(0.0),
            kernel: LevyKernel::Constant(LevyMeasureSpec::from_atoms(vec![(1.0, 1.0)])),
        };
        let d = default_decomposition(DecompKind::AllLarge, ActivityClass::Finite).unwrap();
        assert_relative_eq!(kappa1(&t, &d, 1.5, 1.0).unwrap(), 0.5);
        assert_relative_eq!(kappa1(&t, &d, 3.0, 1.0).unwrap(), 1.0);
        assert_eq!(kappa1(&t, &d, 0.5, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn kappa1_medium_stable_tail() {
        // μ density y^{-3/2} on y>0 with tail 2v^{-1/2}:
        // κ₁(x,z) = ∫_0^{x−z} 2v^{-1/2} dv = 4√(x−z) for x > z > 0
        let m = LevyMeasureSpec::from_density(
            ScalarFunction::from_fn(|y| y.powf(-1.5)),
            (0.0, f64::INFINITY),
            ActivityClass::IntegrableJumps,
        )
        .with_tail_pos(ScalarFunction::from_fn(|z| 2.0 * z.powf(-0.5)));
        let t = CharTriplet {
            a: ScalarFunction::constant(0.0),
            b: ScalarFunction::constant(0.0),
            kernel: LevyKernel::Constant(m),
        };
        let d = default_decomposition(DecompKind::AllMedium, ActivityClass::IntegrableJumps)
            .unwrap();
        assert_relative_eq!(
            kappa1(&t, &d, 2.0, 1.0).unwrap(),
            4.0,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            kappa1(&t, &d, 1.25, 1.0).unwrap(),
            2.0,
            max_relative = 1e-9
        );
        // causal: no contribution from z above x
        assert_eq!(kappa1(&t, &d, 1.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn kappa2_forms() {
        // a(z) = −z, no jumps
        let d = default_decomposition(DecompKind::NoMedium, ActivityClass::Levy).unwrap();
        assert_relative_eq!(kappa2(&ou(), &d, 0.7).unwrap(), -0.7, max_relative = 1e-9);
        // b enters only through F₁, never the Volterra kernel
        let t = no_jump_triplet("0", "(1+x^4)^2");
        assert_eq!(kappa2(&t, &d, 1.3).unwrap(), 0.0);
        // atom at 1 under all-large: κ₂ = a_π = 0 (boundary atom is large)
        let t = CharTriplet {
            a: ScalarFunction::constant(0.0),
            b: ScalarFunction::constant(0.0),
            kernel: LevyKernel::Constant(LevyMeasureSpec::from_atoms(vec![(1.0, 1.0)])),
        };
        let dl = default_decomposition(DecompKind::AllLarge, ActivityClass::Finite).unwrap();
        assert_eq!(kappa2(&t, &dl, 0.4).unwrap(), 0.0);
    }

    #[test]
    fn assemble_structure() {
        let d = default_decomposition(DecompKind::NoMedium, ActivityClass::Levy).unwrap();
        let sys = assemble(&ou(), &d, 4.0, 64, false).unwrap();
        assert_eq!(sys.grid.len(), 64);
        assert_relative_eq!(sys.h, 0.125);
        // no jumps: κ₁ vanishes
        assert_eq!(sys.k1.amax(), 0.0);
        for f in &sys.f1 {
            assert_relative_eq!(*f, 0.5);
        }
        // Volterra causality: k2[i][j] = 0 unless z_j lies between 0 and x_i
        for i in 0..64 {
            for j in 0..64 {
                let (x, z) = (sys.grid[i], sys.grid[j]);
                let inside = (x > 0.0 && z > 0.0 && z <= x) || (x < 0.0 && z < 0.0 && z >= x);
                if !inside {
                    assert_eq!(sys.k2[(i, j)], 0.0, "i={i} j={j}");
                } else {
                    // κ₂ = −z with sign −1 on the negative branch
                    let sgn = if x > 0.0 { 1.0 } else { -1.0 };
                    let w = if i == j { 0.5 * sys.h } else { sys.h };
                    assert_relative_eq!(
                        sys.k2[(i, j)],
                        -z * sgn * w,
                        max_relative = 1e-9,
                        epsilon = 1e-15
                    );
                }
            }
        }
    }

    #[test]
    fn ou_gaussian_solved() {
        let d = default_decomposition(DecompKind::NoMedium, ActivityClass::Levy).unwrap();
        let sys = assemble(&ou(), &d, 6.0, 256, false).unwrap();
        let sol = solve(&sys, &SolveOptions::default()).unwrap();
        let mut max_err = 0.0f64;
        for (x, e) in sol.grid.iter().zip(&sol.eta) {
            max_err = max_err.max((e - gaussian_half(*x)).abs());
        }
        assert!(max_err <= 1e-3, "L∞ error {max_err}");
        assert!(sol.c1.abs() <= 1e-6, "c1 = {}", sol.c1);
        assert!(sol.mass_leak < 1e-6, "leak = {}", sol.mass_leak);
        assert!(sol.residual_norm < 1e-6);
    }

    #[test]
    fn ou_discretization_is_second_order() {
        // residual of the exact Gaussian under the assembled operator
        let d = default_decomposition(DecompKind::NoMedium, ActivityClass::Levy).unwrap();
        let err = |n: usize| {
            let sys = assemble(&ou(), &d, 6.0, n, false).unwrap();
            let c2 = 0.5 * gaussian_half(0.0);
            let mut worst = 0.0f64;
            for i in 0..n {
                let mut s = sys.f1[i] * gaussian_half(sys.grid[i]) - c2;
                for j in 0..n {
                    s -= (sys.k1[(i, j)] + sys.k2[(i, j)]) * gaussian_half(sys.grid[j]);
                }
                worst = worst.max(s.abs());
            }
            worst
        };
        let (e1, e2) = (err(128), err(256));
        assert!(e2 <= e1 / 3.0, "no h² decay: {e1} -> {e2}");
    }

    #[test]
    fn flat_solution_is_flagged_non_normalizable() {
        // a = 0, b = 1, no jumps: Lebesgue measure is invariant and the
        // normalized grid solution is flat
        let t = no_jump_triplet("0", "1");
        let d = default_decomposition(DecompKind::NoMedium, ActivityClass::Levy).unwrap();
        let sys = assemble(&t, &d, 6.0, 64, false).unwrap();
        let sol = solve(&sys, &SolveOptions::default()).unwrap();
        assert!(sol.mass_leak.is_infinite());
        let mean = sol.eta.iter().sum::<f64>() / 64.0;
        for e in &sol.eta {
            assert_relative_eq!(*e, mean, max_relative = 1e-6);
        }
    }

    #[test]
    fn pinned_constants_respected() {
        let d = default_decomposition(DecompKind::NoMedium, ActivityClass::Levy).unwrap();
        let sys = assemble(&ou(), &d, 6.0, 64, false).unwrap();
        let sol = solve(
            &sys,
            &SolveOptions {
                pin_c1: Some(0.0),
                ..SolveOptions::default()
            },
        )
        .unwrap();
        assert_eq!(sol.c1, 0.0);
        assert!(sol.residual_norm < 1e-6);
    }

    #[test]
    fn rl_integral_of_constant_density() {
        // η ≡ 1: α⁻¹∫_0^x (x−y)^{−α} dy = x^{1−α}/(α(1−α))
        let n = 200;
        let grid: Vec<f64> = (0..n).map(|i| -1.0 + (i as f64 + 0.5) * 0.02).collect();
        let alpha = 0.5;
        for &x in &[0.5, 1.0, 2.0] {
            let v = rl_integral(&grid, &vec![1.0; n], x, alpha) / alpha;
            assert_relative_eq!(
                v,
                x.powf(1.0 - alpha) / (alpha * (1.0 - alpha)),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn fractional_check_detects_wrong_density() {
        // the identity x·η(x) = α⁻¹∫_0^x η(y)(x−y)^{−α} dy holds for the
        // Lévy(γ) density with γ = 4√π and fails for other scales
        let n = 600;
        let r = 60.0;
        let h = 2.0 * r / n as f64;
        let grid: Vec<f64> = (0..n).map(|i| -r + (i as f64 + 0.5) * h).collect();
        let levy = |g: f64, x: f64| {
            if x <= 0.0 {
                0.0
            } else {
                g / (2.0 * std::f64::consts::PI.sqrt()) * x.powf(-1.5) * (-g * g / (4.0 * x)).exp()
            }
        };
        let gamma = 4.0 * std::f64::consts::PI.sqrt();
        let mk = |g: f64| VfieSolution {
            grid: grid.clone(),
            h,
            eta: grid.iter().map(|&x| levy(g, x)).collect(),
            c1: 0.0,
            c2: 0.0,
            residual_norm: 0.0,
            mass_leak: 0.0,
            nullspace_dim: 0,
        };
        let phi = ScalarFunction::parse("x").unwrap();
        let good = fractional_check(&mk(gamma), 0.5, &phi, 0.0);
        let bad = fractional_check(&mk(0.5 * gamma), 0.5, &phi, 0.0);
        let scale = |s: &VfieSolution| {
            let v: f64 = s
                .grid
                .iter()
                .zip(&s.eta)
                .filter(|(x, _)| **x > 0.0)
                .map(|(x, e)| (x * e) * (x * e))
                .sum::<f64>();
            (v / s.grid.len() as f64).sqrt()
        };
        assert!(good / scale(&mk(gamma)) < 1e-3, "good rms {good}");
        assert!(bad / scale(&mk(0.5 * gamma)) > 0.1, "bad rms {bad}");
    }
}
