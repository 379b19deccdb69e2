//! Oracles and property checks shared by the acceptance and property tests.
//!
//! Everything here is computed independently of the library's own
//! numerics: critical points by bisection, polynomial roots by a separate
//! Weierstrass iteration, J₁ by its integral representation.

#![allow(dead_code)]

use std::f64::consts::{PI, TAU};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use wallopt::avoidance::{constant_wall, pole_wall, AvoidanceSet, Region};
use wallopt::basins::{ppm_bytes, rasterize, BasinGrid, CYAN, MAGENTA, YELLOW};
use wallopt::functions::{builtin, Objective, SharedObjective};
use wallopt::numerics::{fd_gradient, jacobi_eigen, SymMatrix};
use wallopt::optimizers::{bnqn, bnqn_direction, minimize, Method, OptimizerConfig, Trace};

pub type Check = Result<(), String>;

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------- example 1

pub fn example1_value(x: f64, y: f64) -> f64 {
    -x * y * (-x * x - y * y).exp() + 0.5 * y * y
}

pub fn example1_grad(x: f64, y: f64) -> [f64; 2] {
    let e = (-x * x - y * y).exp();
    [-y * e * (1.0 - 2.0 * x * x), -x * e * (1.0 - 2.0 * y * y) + y]
}

/// The two minimizers `(±1/√2, ±y*)`. Off `y = 0` the x-derivative vanishes
/// only at `x² = 1/2`, and `y*` is the positive root of the y-derivative
/// there, found by bisection.
pub fn example1_minimizers() -> [[f64; 2]; 2] {
    let x = std::f64::consts::FRAC_1_SQRT_2;
    let phi = |y: f64| example1_grad(x, y)[1];
    let (mut lo, mut hi) = (0.1, 1.0);
    assert!(phi(lo) < 0.0 && phi(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y = 0.5 * (lo + hi);
    [[x, y], [-x, -y]]
}

// ---------------------------------------------------------------- example 2

/// Coefficients of `z⁵ − 3i z³ − (5+2i) z² + 3z + 1`, highest first.
pub fn example2_coefficients() -> Vec<Complex64> {
    let c = Complex64::new;
    vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, -3.0), c(-5.0, -2.0), c(3.0, 0.0), c(1.0, 0.0)]
}

fn horner(coeffs: &[Complex64], z: Complex64) -> Complex64 {
    coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
}

/// Weierstrass (Durand–Kerner) iteration for a monic polynomial, started on
/// a circle of radius one more than the largest coefficient.
pub fn dk_oracle(coeffs: &[Complex64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    let radius = 1.0 + coeffs[1..].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(radius, TAU * k as f64 / n as f64 + 0.4))
        .collect();
    for _ in 0..500 {
        for i in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if j != i {
                    denom *= z[i] - z[j];
                }
            }
            let step = horner(coeffs, z[i]) / denom;
            z[i] -= step;
        }
    }
    z
}

/// The five roots as published, p₁ to p₅.
pub const EXAMPLE2_PRINTED_ROOTS: [[f64; 2]; 5] = [
    [-1.28992, -1.87357],
    [-0.824853, 1.17353],
    [-0.23744, 0.0134729],
    [0.573868, -0.276869],
    [1.77834, 0.963437],
];

/// Oracle roots ordered to match [`EXAMPLE2_PRINTED_ROOTS`].
pub fn example2_roots() -> Vec<[f64; 2]> {
    let roots = dk_oracle(&example2_coefficients());
    EXAMPLE2_PRINTED_ROOTS
        .iter()
        .map(|p| {
            let r = roots
                .iter()
                .min_by(|a, b| {
                    let da = (*a - Complex64::new(p[0], p[1])).norm();
                    let db = (*b - Complex64::new(p[0], p[1])).norm();
                    da.total_cmp(&db)
                })
                .unwrap();
            [r.re, r.im]
        })
        .collect()
}

// ---------------------------------------------------------------- examples 3, 4

/// `y − x² − 2`, zero on the first curve of example 3.
pub fn c1_offset(x: &[f64]) -> f64 {
    x[1] - x[0] * x[0] - 2.0
}

pub fn example3_value(x: f64, y: f64) -> f64 {
    let d = |a: f64, b: f64| (x - a).powi(2) + (y - b).powi(2);
    (y - x * x - 2.0).powi(2) * (y + x.powi(4) + 2.0).powi(2) * d(0.0, 1.0) * d(1.0, -1.0) * d(-1.0, 4.0)
}

pub fn elliptic(x: &[f64]) -> f64 {
    x[1] * x[1] - x[0].powi(3) + x[0]
}

/// Distance to the bounded component `{y² = x³ − x, −1 ≤ x ≤ 0}`, from a
/// dense parametrization of both branches.
pub fn distance_to_oval(p: &[f64]) -> f64 {
    static SAMPLES: OnceLock<Vec<[f64; 2]>> = OnceLock::new();
    let pts = SAMPLES.get_or_init(|| {
        let n = 200_000;
        let mut v = Vec::with_capacity(2 * n + 2);
        for k in 0..=n {
            // denser near the vertical tangents at x = −1 and x = 0
            let t = 0.5 - 0.5 * (PI * k as f64 / n as f64).cos();
            let x = -t;
            let y = (x * x * x - x).max(0.0).sqrt();
            v.push([x, y]);
            v.push([x, -y]);
        }
        v
    });
    pts.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min)
}

// ---------------------------------------------------------------- example 8

/// `J₁(z) = (1/2π) ∫₀^{2π} exp(i(τ − z sin τ)) dτ` by the trapezoid rule,
/// which converges geometrically for this periodic analytic integrand.
pub fn j1_integral(z: Complex64) -> Complex64 {
    let m = 512;
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 0..m {
        let t = TAU * k as f64 / m as f64;
        sum += (Complex64::i() * (t - z * t.sin())).exp();
    }
    sum / m as f64
}

/// First positive zero of J₁, by bisection on the integral oracle.
pub fn j1_first_zero() -> f64 {
    let f = |x: f64| j1_integral(Complex64::new(x, 0.0)).re;
    let (mut lo, mut hi) = (3.5, 4.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------- properties

/// Values never increase, compared exactly.
pub fn descent(t: &Trace) -> Check {
    match t.values.windows(2).position(|w| w[1] > w[0]) {
        Some(k) => Err(format!("value rose at step {}: {} -> {}", k + 1, t.values[k], t.values[k + 1])),
        None => Ok(()),
    }
}

/// Runs every backtracking method from `x0` on builtin `name` and checks
/// descent.
pub fn descent_all_methods(name: &str, x0: &[f64]) -> Check {
    let f = builtin(name).map_err(|e| e.to_string())?;
    for m in [Method::Bgd, Method::Bnqn] {
        let cfg = OptimizerConfig {
            max_iters: 300,
            ..OptimizerConfig::with_method(m)
        };
        let t = minimize(f.as_ref(), x0, &cfg, None).map_err(|e| e.to_string())?;
        descent(&t).map_err(|e| format!("{name} {m} from {x0:?}: {e}"))?;
    }
    Ok(())
}

/// Constant-wall run: every value below `r` and every iterate inside.
pub fn constant_wall_avoids(name: &str, region: &Region, r: f64, x0: &[f64]) -> Check {
    let f = builtin(name).map_err(|e| e.to_string())?;
    if !region.contains(x0) || f.value(x0) >= r {
        return Ok(());
    }
    let wall = constant_wall(f, region.clone(), r).map_err(|e| e.to_string())?;
    let cfg = OptimizerConfig {
        max_iters: 500,
        ..OptimizerConfig::default()
    };
    let t = bnqn(&wall, x0, &cfg).map_err(|e| e.to_string())?;
    descent(&t)?;
    if let Some(k) = t.values.iter().position(|v| !(*v < r)) {
        return Err(format!("value {} at step {k} from {x0:?}", t.values[k]));
    }
    if let Some(x) = t.iterates.iter().find(|x| !region.contains(x)) {
        return Err(format!("iterate {x:?} outside from {x0:?}"));
    }
    Ok(())
}

/// Root-finding builtins with a root known in closed form or from an oracle.
pub fn floor_cases() -> Vec<(&'static str, Vec<f64>)> {
    let r2 = example2_roots();
    vec![
        ("example2_modulus", r2[2].to_vec()),
        ("example3", vec![0.0, 1.0]),
        ("example4", vec![0.0, 0.0]),
        ("example8_modulus", vec![j1_first_zero(), 0.0]),
    ]
}

/// The pole wall with `γ = 0` vanishes at the root and is nonnegative at
/// every sample.
pub fn pole_floor(name: &str, root: &[f64], avoid: Vec<Vec<f64>>, n: u32, samples: &[Vec<f64>]) -> Check {
    if avoid.iter().any(|a| dist(a, root) < 1e-3) {
        return Ok(());
    }
    let f = builtin(name).map_err(|e| e.to_string())?;
    let set = AvoidanceSet::points(avoid).map_err(|e| e.to_string())?;
    let g = pole_wall(f, set, n, 0.0).map_err(|e| e.to_string())?;
    let at_root = g.value(root);
    if !(at_root <= 1e-8) {
        return Err(format!("{name}: G(root) = {at_root}"));
    }
    for x in samples {
        let v = g.value(x);
        if v < 0.0 {
            return Err(format!("{name}: G({x:?}) = {v} < 0"));
        }
    }
    Ok(())
}

pub const BAND_GAMMA: f64 = -0.072728;
pub const BAND_STEP: f64 = 0.1;

/// `(f − γ)/|x + y|²` for example 1, the half-plane wall.
pub fn band_wall() -> SharedObjective {
    let f = builtin("example1").unwrap();
    let set = AvoidanceSet::scaled_hyperplane(vec![1.0, 1.0], 0.0, 1.0).unwrap();
    Arc::new(pole_wall(f, set, 2, BAND_GAMMA).unwrap())
}

/// Infimum of the wall over the band `0 < |x + y| < √2·r` in `[−4,4]²`, by
/// dense sampling. A Euclidean step shorter than `r` moves `x + y` by less
/// than `√2·r`, so a crossing step must land in the band.
pub fn band_infimum() -> f64 {
    static INF: OnceLock<f64> = OnceLock::new();
    *INF.get_or_init(|| {
        let g = band_wall();
        let band = std::f64::consts::SQRT_2 * BAND_STEP;
        let mut inf = f64::INFINITY;
        let n = 800;
        for i in 0..=n {
            let u = -4.0 + 8.0 * i as f64 / n as f64;
            for j in 1..=60 {
                for s in [-1.0, 1.0] {
                    let t = s * band * j as f64 / 60.0;
                    // u runs along the line, t across it
                    let x = [0.5 * (u + t), 0.5 * (t - u)];
                    inf = inf.min(g.value(&x));
                }
            }
        }
        inf
    })
}

/// From a start whose wall value is below the band infimum, capped BNQN
/// never changes the sign of `x + y`.
pub fn band_confined(x0: &[f64]) -> Check {
    let g = band_wall();
    let side = (x0[0] + x0[1]).signum();
    if side == 0.0 || !(g.value(x0) < band_infimum()) {
        return Ok(());
    }
    let cfg = OptimizerConfig {
        step_cap: Some(BAND_STEP),
        max_iters: 2000,
        ..OptimizerConfig::default()
    };
    let t = bnqn(g.as_ref(), x0, &cfg).map_err(|e| e.to_string())?;
    match t.iterates.iter().find(|x| (x[0] + x[1]) * side <= 0.0) {
        Some(x) => Err(format!("from {x0:?} the run crossed to {x:?}")),
        None => Ok(()),
    }
}

/// `⟨ŵ, g⟩ > 0` for the BNQN direction at a nonzero gradient.
pub fn bnqn_descends(g: &[f64], h: &SymMatrix) -> Check {
    if g.iter().all(|v| *v == 0.0) {
        return Ok(());
    }
    let w = bnqn_direction(g, h, &OptimizerConfig::default()).map_err(|e| e.to_string())?;
    let ip: f64 = w.iter().zip(g).map(|(a, b)| a * b).sum();
    if ip > 0.0 {
        Ok(())
    } else {
        Err(format!("<w,g> = {ip} for g = {g:?}"))
    }
}

/// Eigen round trip within `1e-10·(1 + max|entry|)` and orthonormal vectors
/// within `1e-12`.
pub fn eigen_round_trip(m: &SymMatrix) -> Check {
    let e = jacobi_eigen(m).map_err(|e| e.to_string())?;
    let n = m.dim();
    let tol = 1e-10 * (1.0 + m.max_abs());
    for i in 0..n {
        for j in 0..n {
            let r: f64 = (0..n).map(|k| e.eigenvectors[i][k] * e.eigenvalues[k] * e.eigenvectors[j][k]).sum();
            if (r - m.get(i, j)).abs() > tol {
                return Err(format!("entry ({i},{j}) off by {}", (r - m.get(i, j)).abs()));
            }
            let q: f64 = (0..n).map(|k| e.eigenvectors[k][i] * e.eigenvectors[k][j]).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            if (q - want).abs() > 1e-12 {
                return Err(format!("UᵀU ({i},{j}) = {q}"));
            }
        }
    }
    Ok(())
}

/// Analytic gradient against central differences, relative to `‖∇f‖`.
pub fn fd_agrees(name: &str, x: &[f64]) -> Check {
    let f = builtin(name).map_err(|e| e.to_string())?;
    if !f.has_analytic_derivatives() {
        return Ok(());
    }
    let g = f.gradient(x).map_err(|e| e.to_string())?;
    let fd = fd_gradient(|p| f.value(p), x, None).map_err(|e| e.to_string())?;
    let scale = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
    for i in 0..x.len() {
        if (g[i] - fd[i]).abs() > 1e-5 * scale {
            return Err(format!("{name} at {x:?}: analytic {g:?}, fd {fd:?}"));
        }
    }
    Ok(())
}

/// PPM bytes of example 1's BNQN basins at 1 and at `workers` threads.
pub fn worker_invariance(resolution: usize, workers: usize) -> Check {
    let [p2, p3] = example1_minimizers();
    let grid = BasinGrid::new([0.0, 0.0], 2.0, resolution)
        .and_then(|g| g.with_attractor(p2.to_vec(), "p2", CYAN))
        .and_then(|g| g.with_attractor(p3.to_vec(), "p3", YELLOW))
        .and_then(|g| g.with_attractor(vec![0.0, 0.0], "p1", MAGENTA))
        .map_err(|e| e.to_string())?;
    let f = builtin("example1").map_err(|e| e.to_string())?;
    let cfg = OptimizerConfig::default();
    let one = rasterize(f.as_ref(), &cfg, &grid, Some(1)).map_err(|e| e.to_string())?;
    let many = rasterize(f.as_ref(), &cfg, &grid, Some(workers)).map_err(|e| e.to_string())?;
    if ppm_bytes(&one, &grid) == ppm_bytes(&many, &grid) && one == many {
        Ok(())
    } else {
        Err(format!("1 and {workers} workers differ"))
    }
}
