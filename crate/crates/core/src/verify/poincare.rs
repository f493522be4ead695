//! Poincaré constants: the `p = 2` eigenvalue estimate and certified lower
//! bounds for general `p` by ascent on the quotient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fem::assembly::{mass_matrix, stiffness_matrix};
use crate::fem::{gradient, lp_norm, ScalarField};
use crate::geometry::{refinement_parents, Mesh};
use crate::linalg::{dot, pcg, CgOptions, CsrMatrix};
use nalgebra::{DMatrix, SymmetricEigen};

/// Which quotient [`poincare_constant_2`] bounds.
#[derive(Debug, Clone, PartialEq)]
pub enum PoincareMode {
    /// `inf_a ||u − a||_{L^2} ≤ C ||∂u||_{L^2}`.
    Wirtinger,
    /// `||u||_{L^2} ≤ C ||∂u||_{L^2}` for `u` vanishing on these vertices.
    Trace(Vec<usize>),
}

const EIGEN_TOL: f64 = 1e-12;
const EIGEN_MAX_ITER: usize = 500;
/// Subspace dimension; square-like domains have a double lowest mode.
const BLOCK: usize = 4;

/// `1/√λ₁` for the smallest admissible eigenvalue of `K x = λ M x`, by
/// block inverse iteration with Rayleigh–Ritz (deflating constants in the
/// Wirtinger mode).
pub fn poincare_constant_2(mesh: &Mesh, mode: &PoincareMode) -> Result<f64> {
    let k = stiffness_matrix(mesh);
    let m = mass_matrix(mesh);
    let n = mesh.n_vertices();
    let (k, m, deflate) = match mode {
        PoincareMode::Wirtinger => (k, m, true),
        PoincareMode::Trace(fixed) => {
            if fixed.is_empty() {
                return Err(Error::invalid("trace mode needs a nonempty vertex set"));
            }
            let mut is_fixed = vec![false; n];
            for &v in fixed {
                *is_fixed
                    .get_mut(v)
                    .ok_or_else(|| Error::invalid(format!("vertex {v} out of range")))? = true;
            }
            let free: Vec<usize> = (0..n).filter(|&v| !is_fixed[v]).collect();
            if free.is_empty() {
                return Err(Error::invalid("trace mode leaves no free vertex"));
            }
            (k.restrict(&free), m.restrict(&free), false)
        }
    };
    let lambda = subspace_iteration(&k, &m, deflate)?;
    Ok(1.0 / lambda.sqrt())
}

/// M-orthonormalizes `vs` in place (modified Gram–Schmidt), dropping
/// vectors that become negligible.
fn m_orthonormalize(m: &CsrMatrix, vs: &mut Vec<Vec<f64>>) {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(vs.len());
    for mut v in vs.drain(..) {
        let before = m.energy(&v).sqrt();
        for q in &out {
            let c = dot(&m.mul_vec(q), &v);
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
        }
        let norm = m.energy(&v).sqrt();
        if norm > 1e-10 * before && norm > 0.0 {
            v.iter_mut().for_each(|a| *a /= norm);
            out.push(v);
        }
    }
    *vs = out;
}

fn subspace_iteration(k: &CsrMatrix, m: &CsrMatrix, deflate: bool) -> Result<f64> {
    let n = k.nrows();
    let ones = vec![1.0; n];
    let m_ones = m.mul_vec(&ones);
    let total = dot(&ones, &m_ones);
    let project = |x: &mut Vec<f64>| {
        if deflate {
            let c = dot(x, &m_ones) / total;
            x.iter_mut().for_each(|v| *v -= c);
        }
    };
    let block = BLOCK.min(n - usize::from(deflate)).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut xs: Vec<Vec<f64>> = (0..block)
        .map(|_| {
            let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            project(&mut x);
            x
        })
        .collect();
    let cg = CgOptions {
        rel_tol: 1e-13,
        project_constants: deflate,
        ..CgOptions::for_size(n)
    };
    let mut lambda = f64::INFINITY;
    for _ in 0..EIGEN_MAX_ITER {
        let mut ys = Vec::with_capacity(xs.len());
        for x in &xs {
            let mut y = pcg(k, &m.mul_vec(x), x, cg)?.solution;
            project(&mut y);
            ys.push(y);
        }
        m_orthonormalize(m, &mut ys);
        if ys.is_empty() {
            return Err(Error::NonConvergence {
                what: "subspace iteration",
                iterations: 0,
                residual: f64::NAN,
            });
        }
        // Rayleigh–Ritz in the M-orthonormal basis
        let b = ys.len();
        let kys: Vec<Vec<f64>> = ys.iter().map(|y| k.mul_vec(y)).collect();
        let a = DMatrix::from_fn(b, b, |i, j| 0.5 * (dot(&ys[i], &kys[j]) + dot(&ys[j], &kys[i])));
        let eig = SymmetricEigen::new(a);
        let mut order: Vec<usize> = (0..b).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        xs = order
            .iter()
            .map(|&c| {
                let mut x = vec![0.0; n];
                for (r, y) in ys.iter().enumerate() {
                    let w = eig.eigenvectors[(r, c)];
                    x.iter_mut().zip(y).for_each(|(a, b)| *a += w * b);
                }
                x
            })
            .collect();
        let next = eig.eigenvalues[order[0]];
        if (lambda - next).abs() <= EIGEN_TOL * next {
            return Ok(next);
        }
        lambda = next;
    }
    Err(Error::NonConvergence {
        what: "subspace iteration",
        iterations: EIGEN_MAX_ITER,
        residual: f64::NAN,
    })
}

/// `a` minimizing `||u − a||_{L^p}` under the norm used by [`lp_norm`].
fn best_constant(mesh: &Mesh, u: &ScalarField, p: f64) -> f64 {
    if p == 2.0 {
        let mass: f64 = crate::fem::assembly::load_vector(mesh, u.values()).iter().sum();
        return mass / mesh.total_area();
    }
    let c = centroid_values(mesh, u);
    let slope = |a: f64| -> f64 {
        c.iter()
            .zip(mesh.areas())
            .map(|(&c, area)| area * (c - a).signum() * (c - a).abs().powf(p - 1.0))
            .sum()
    };
    let (mut lo, mut hi) = c
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn centroid_values(mesh: &Mesh, u: &ScalarField) -> Vec<f64> {
    let v = u.values();
    mesh.triangles()
        .iter()
        .map(|t| (v[t[0]] + v[t[1]] + v[t[2]]) / 3.0)
        .collect()
}

/// `inf_a ||u − a||_{L^p} / ||∂u||_{L^p}`, with norms as in [`lp_norm`]
/// (exact at `p = 2`, centroid rule otherwise). Zero for constant `u`.
pub fn poincare_quotient(mesh: &Mesh, u: &ScalarField, p: f64) -> Result<f64> {
    let den = lp_norm(mesh, &gradient(mesh, u)?, p)?;
    if den == 0.0 {
        return Ok(0.0);
    }
    let a = best_constant(mesh, u, p);
    Ok(lp_norm(mesh, &u.map(|v| v - a), p)? / den)
}

/// Nodal gradient of `log` of the quotient.
fn log_quotient_gradient(mesh: &Mesh, u: &ScalarField, p: f64) -> Result<Vec<f64>> {
    let n = mesh.n_vertices();
    let a = best_constant(mesh, u, p);
    let shifted = u.map(|v| v - a);
    let num = lp_norm(mesh, &shifted, p)?;
    let mut g_num = vec![0.0; n];
    if p == 2.0 {
        let mv = mass_matrix(mesh).mul_vec(shifted.values());
        for (g, m) in g_num.iter_mut().zip(mv) {
            *g = m / (num * num);
        }
    } else {
        let c = centroid_values(mesh, &shifted);
        let np = num.powf(p);
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let w = mesh.areas()[t] * c[t].signum() * c[t].abs().powf(p - 1.0) / 3.0 / np;
            for &v in tri {
                g_num[v] += w;
            }
        }
    }
    let grad = gradient(mesh, u)?;
    let den = lp_norm(mesh, &grad, p)?;
    let dp = den.powf(p);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = grad.values()[t];
        let mag = g[0].hypot(g[1]);
        if mag == 0.0 {
            continue;
        }
        let w = mesh.areas()[t] * mag.powf(p - 2.0) / dp;
        let bg = mesh.basis_gradients(t);
        for k in 0..3 {
            g_num[tri[k]] -= w * (g[0] * bg[k][0] + g[1] * bg[k][1]);
        }
    }
    Ok(g_num)
}

/// Preconditioned ascent on the quotient from `start`; returns the final
/// field and its quotient, never below the quotient of `start`.
fn ascend(mesh: &Mesh, p: f64, start: ScalarField, max_iter: usize) -> Result<(ScalarField, f64)> {
    let k = stiffness_matrix(mesh);
    let n = mesh.n_vertices();
    let mut u = start;
    let mut q = poincare_quotient(mesh, &u, p)?;
    let mut step = 0.1;
    let cg = CgOptions {
        rel_tol: 1e-8,
        project_constants: true,
        ..CgOptions::for_size(n)
    };
    for _ in 0..max_iter {
        let g = log_quotient_gradient(mesh, &u, p)?;
        let mean = g.iter().sum::<f64>() / n as f64;
        let g: Vec<f64> = g.iter().map(|v| v - mean).collect();
        let dir = pcg(&k, &g, &vec![0.0; n], cg)?.solution;
        let dir_size = k.energy(&dir).sqrt();
        let u_size = k.energy(u.values()).sqrt();
        if dir_size == 0.0 || u_size == 0.0 {
            break;
        }
        let dir = ScalarField::new(mesh, dir)?;
        let mut improved = None;
        for _ in 0..40 {
            let trial = u.axpby(1.0, step * u_size / dir_size, &dir)?;
            let tq = poincare_quotient(mesh, &trial, p)?;
            if tq > q {
                improved = Some((trial, tq));
                break;
            }
            step *= 0.5;
        }
        let Some((next, nq)) = improved else { break };
        let gain = (nq - q) / q;
        u = next;
        q = nq;
        step = (step * 2.0).min(1.0);
        if gain < 1e-10 {
            break;
        }
    }
    Ok((u, q))
}

/// Smooth random start: a seeded quadratic in the bounding-box coordinates.
fn seeded_start(mesh: &Mesh, seed: u64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let (lo, hi) = mesh.vertices().iter().fold(
        ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]),
        |(lo, hi), p| ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])]),
    );
    ScalarField::from_fn(mesh, |p| {
        let x = (p[0] - lo[0]) / (hi[0] - lo[0]).max(f64::MIN_POSITIVE) - 0.5;
        let y = (p[1] - lo[1]) / (hi[1] - lo[1]).max(f64::MIN_POSITIVE) - 0.5;
        c[0] * x + c[1] * y + c[2] * x * x + c[3] * y * y + c[4] * x * y
    })
}

#[derive(Debug, Clone)]
pub struct PoincareBound {
    /// Largest quotient reached; a quotient of an explicit field.
    pub value: f64,
    /// Quotients of the seeded starting fields.
    pub initial: Vec<f64>,
    pub best: ScalarField,
}

const ASCENT_ITERS: usize = 400;

/// Lower bound on the `L^p` Poincaré–Wirtinger constant by ascent from one
/// seeded smooth field per seed.
pub fn poincare_lower_bound_p(mesh: &Mesh, p: f64, seeds: &[u64]) -> Result<PoincareBound> {
    lower_bound_from(mesh, p, seeds, None)
}

fn lower_bound_from(mesh: &Mesh, p: f64, seeds: &[u64], warm: Option<ScalarField>) -> Result<PoincareBound> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::invalid(format!("Poincaré bound needs p in (1, inf), got {p}")));
    }
    if seeds.is_empty() && warm.is_none() {
        return Err(Error::invalid("need at least one seed"));
    }
    let mut initial = Vec::new();
    let mut best: Option<(ScalarField, f64)> = None;
    let starts = seeds.iter().map(|&s| seeded_start(mesh, s)).map(|f| (f, true));
    for (start, seeded) in starts.chain(warm.map(|w| (w, false))) {
        if seeded {
            initial.push(poincare_quotient(mesh, &start, p)?);
        }
        let (u, q) = ascend(mesh, p, start, ASCENT_ITERS)?;
        if best.as_ref().map_or(true, |(_, b)| q > *b) {
            best = Some((u, q));
        }
    }
    let (best, value) = best.expect("at least one start");
    Ok(PoincareBound { value, initial, best })
}

/// Lower bounds on a nested sequence `meshes[i + 1] = refine(meshes[i])`.
///
/// Each level also ascends from the previous level's optimum, so at
/// `p = 2`, where the quotient of a prolonged field is unchanged, the
/// sequence is nondecreasing.
pub fn poincare_lower_bound_nested(meshes: &[Mesh], p: f64, seeds: &[u64]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(meshes.len());
    let mut prev: Option<ScalarField> = None;
    for (i, mesh) in meshes.iter().enumerate() {
        let warm = match prev.take() {
            Some(f) => {
                let coarse = &meshes[i - 1];
                if refinement_parents(coarse).len() + coarse.n_vertices() != mesh.n_vertices() {
                    return Err(Error::invalid("levels must be successive red refinements"));
                }
                Some(f.prolong(coarse, mesh)?)
            }
            None => None,
        };
        let bound = lower_bound_from(mesh, p, seeds, warm)?;
        out.push(bound.value);
        prev = Some(bound.best);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::Region;
    use crate::geometry::{build_rectangle, build_unit_square, refine, BoundaryPartition};
    use std::f64::consts::PI;

    #[test]
    fn wirtinger_on_square_and_rectangle() {
        let c = poincare_constant_2(&build_unit_square(32).unwrap(), &PoincareMode::Wirtinger).unwrap();
        assert!((c - 1.0 / PI).abs() < 0.01 / PI, "{c}");
        let r = build_rectangle(2.0, 1.0, 32, 16).unwrap();
        let c = poincare_constant_2(&r, &PoincareMode::Wirtinger).unwrap();
        assert!((c - 2.0 / PI).abs() < 0.02 / PI, "{c}");
    }

    #[test]
    fn trace_mode_constants() {
        let m = build_unit_square(24).unwrap();
        let part = BoundaryPartition::all_dirichlet(&m);
        let all = Region::Whole.vertices(&m, &part).unwrap();
        let c = poincare_constant_2(&m, &PoincareMode::Trace(all)).unwrap();
        // first Dirichlet eigenvalue 2π²
        assert!((c - 1.0 / (PI * 2f64.sqrt())).abs() < 0.01 * c);
        let left = Region::Tag("left".into()).vertices(&m, &part).unwrap();
        let c = poincare_constant_2(&m, &PoincareMode::Trace(left)).unwrap();
        assert!((c - 2.0 / PI).abs() < 0.01 * c);
        assert!(poincare_constant_2(&m, &PoincareMode::Trace(vec![])).is_err());
    }

    #[test]
    fn wirtinger_grows_under_refinement() {
        let mut m = build_unit_square(4).unwrap();
        let mut prev = 0.0;
        for _ in 0..3 {
            let c = poincare_constant_2(&m, &PoincareMode::Wirtinger).unwrap();
            assert!(c >= prev);
            prev = c;
            m = refine(&m);
        }
    }

    #[test]
    fn quotient_of_linear_function() {
        let m = build_unit_square(8).unwrap();
        let x = ScalarField::from_fn(&m, |p| p[0]);
        // ||x − 1/2||_2 = 1/√12
        assert!((poincare_quotient(&m, &x, 2.0).unwrap() - 1.0 / 12f64.sqrt()).abs() < 1e-12);
        assert_eq!(poincare_quotient(&m, &ScalarField::constant(&m, 3.0), 3.0).unwrap(), 0.0);
        let q = poincare_quotient(&m, &x, 3.0).unwrap();
        let scaled = poincare_quotient(&m, &x.map(|v| -5.0 * v + 2.0), 3.0).unwrap();
        assert!((q - scaled).abs() < 1e-12 * q);
    }

    #[test]
    fn lower_bound_matches_eigen_estimate() {
        let m = build_unit_square(16).unwrap();
        let eig = poincare_constant_2(&m, &PoincareMode::Wirtinger).unwrap();
        let b = poincare_lower_bound_p(&m, 2.0, &[1, 2]).unwrap();
        assert!(b.value <= eig * (1.0 + 1e-9));
        assert!(b.value >= 0.95 * eig, "{} vs {eig}", b.value);
        assert!(b.initial.iter().all(|&q| q <= b.value));
        let again = poincare_quotient(&m, &b.best.map(|v| 7.0 * v), 2.0).unwrap();
        assert!((again - b.value).abs() < 1e-12 * b.value);
    }

    #[test]
    fn lower_bound_for_other_exponents() {
        let m = build_unit_square(8).unwrap();
        for p in [1.5, 4.0] {
            let b = poincare_lower_bound_p(&m, p, &[3]).unwrap();
            assert!(b.value >= b.initial[0]);
            assert!(b.value > 0.1 && b.value < 1.0);
        }
    }

    #[test]
    fn nested_bounds_do_not_decrease() {
        let m0 = build_unit_square(4).unwrap();
        let m1 = refine(&m0);
        let m2 = refine(&m1);
        let meshes = [m0, m1, m2];
        for p in [2.0, 3.0] {
            let v = poincare_lower_bound_nested(&meshes, p, &[9]).unwrap();
            assert!(v.windows(2).all(|w| w[1] >= w[0]), "p={p}: {v:?}");
        }
    }
}
