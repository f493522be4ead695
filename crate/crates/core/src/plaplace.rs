//! Trace-constrained minimization of the p-Dirichlet energy.
//!
//! Given a vertex set `A`, a datum `f` and `p ∈ (1, ∞)`, find the nodal `u`
//! with `u = f` on `A` minimizing `||∂u||_{L^p}`. The discrete energy
//! `Σ_T area (|∂u|² + ε²)^{p/2}` is minimized by damped reweighted Newton
//! steps, with continuation in `p` (starting from the quadratic `p = 2`
//! problem) and in the regularization `ε`.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::assembly::{stiffness_matrix, weighted_stiffness};
use crate::fem::{gradient, lp_norm, ScalarField, VectorField};
use crate::geometry::Mesh;
use crate::linalg::{dot, pcg, CgOptions};

/// `♯ₚβ = |β|^{p−2} β / ||β||_{L^p}^{p−2}`, with `0` wherever `β = 0`.
///
/// Homogeneous of degree one in `β`; the identity at `p = 2`.
pub fn sharp_p(mesh: &Mesh, beta: &VectorField, p: f64) -> Result<VectorField> {
    if !(p > 1.0) {
        return Err(Error::invalid(format!("sharp_p needs p > 1, got {p}")));
    }
    beta.check(mesh)?;
    if p == 2.0 {
        return Ok(beta.clone());
    }
    let norm = lp_norm(mesh, beta, p)?;
    if norm == 0.0 {
        return Ok(beta.scale(0.0));
    }
    let values = beta
        .values()
        .iter()
        .map(|b| {
            let mag = b[0].hypot(b[1]);
            if mag == 0.0 {
                [0.0, 0.0]
            } else {
                let w = (mag / norm).powf(p - 2.0);
                [w * b[0], w * b[1]]
            }
        })
        .collect();
    VectorField::new(mesh, values)
}

/// `||∂u||_{L^p}`.
pub fn p_energy(mesh: &Mesh, u: &ScalarField, p: f64) -> Result<f64> {
    lp_norm(mesh, &gradient(mesh, u)?, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlapOptions {
    /// Bound on the final [`p_stationarity`].
    pub tol: f64,
    /// Final regularization relative to the energy scale of the `p = 2` start.
    pub eps_final: f64,
    /// Regularization used during `p` continuation, relative to the same scale.
    pub eps_start: f64,
    /// Largest ratio between consecutive exponents of the continuation.
    pub p_step: f64,
    /// Newton iterations allowed per continuation stage.
    pub max_outer: usize,
    /// Perturbs the `p = 2` warm start with seeded noise when set.
    pub seed: Option<u64>,
}

impl Default for PlapOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            eps_final: 1e-8,
            eps_start: 1e-2,
            p_step: 1.5,
            max_outer: 200,
            seed: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlapProblem<'a> {
    pub mesh: &'a Mesh,
    pub constraint: BTreeSet<usize>,
    pub datum: ScalarField,
    pub p: f64,
    pub options: PlapOptions,
}

impl<'a> PlapProblem<'a> {
    pub fn new(mesh: &'a Mesh, constraint: impl IntoIterator<Item = usize>, datum: ScalarField, p: f64) -> Result<Self> {
        let constraint: BTreeSet<usize> = constraint.into_iter().collect();
        if constraint.is_empty() {
            return Err(Error::invalid("constraint set A must be nonempty"));
        }
        if let Some(&v) = constraint.iter().find(|&&v| v >= mesh.n_vertices()) {
            return Err(Error::invalid(format!("constraint vertex {v} out of range")));
        }
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::invalid(format!("p must lie in (1, inf), got {p}")));
        }
        datum.check(mesh)?;
        Ok(Self {
            mesh,
            constraint,
            datum,
            p,
            options: PlapOptions::default(),
        })
    }

    pub fn with_options(mut self, options: PlapOptions) -> Result<Self> {
        if !(options.eps_final >= 0.0 && options.eps_start >= options.eps_final) {
            return Err(Error::invalid("need 0 <= eps_final <= eps_start"));
        }
        if !(options.p_step > 1.0) {
            return Err(Error::invalid("p_step must exceed 1"));
        }
        if !(options.tol > 0.0) || options.max_outer == 0 {
            return Err(Error::invalid("tol must be positive and max_outer nonzero"));
        }
        self.options = options;
        Ok(self)
    }
}

/// One accepted Newton step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub p: f64,
    pub eps: f64,
    /// Regularized energy after the step.
    pub energy: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateOutcome {
    pub trials: usize,
    pub violations: usize,
    /// Smallest `||∂(u + tδ)||_p − ||∂u||_p` seen.
    pub worst_margin: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    pub p: f64,
    /// `||∂u||_{L^p}`.
    pub energy: f64,
    pub stationarity: f64,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
    pub certificate: Option<CertificateOutcome>,
}

/// Discrete p-energy with regularization, evaluated from element gradients.
struct Energy<'m> {
    mesh: &'m Mesh,
    p: f64,
    eps: f64,
}

impl Energy<'_> {
    fn grads(&self, u: &[f64]) -> Vec<[f64; 2]> {
        let mesh = self.mesh;
        mesh.triangles()
            .iter()
            .enumerate()
            .map(|(t, tri)| {
                let g = mesh.basis_gradients(t);
                let mut out = [0.0; 2];
                for k in 0..3 {
                    out[0] += u[tri[k]] * g[k][0];
                    out[1] += u[tri[k]] * g[k][1];
                }
                out
            })
            .collect()
    }

    fn value(&self, u: &[f64]) -> f64 {
        let e2 = self.eps * self.eps;
        self.grads(u)
            .iter()
            .zip(self.mesh.areas())
            .map(|(g, a)| a * (g[0] * g[0] + g[1] * g[1] + e2).powf(0.5 * self.p))
            .sum()
    }

    /// Nodal gradient of the energy and the element Hessian tensors.
    fn derivatives(&self, u: &[f64]) -> (Vec<f64>, Vec<[[f64; 2]; 2]>) {
        let mesh = self.mesh;
        let (p, e2) = (self.p, self.eps * self.eps);
        let grads = self.grads(u);
        let mut nodal = vec![0.0; mesh.n_vertices()];
        let mut tensors = Vec::with_capacity(grads.len());
        for (t, g) in grads.iter().enumerate() {
            let s = g[0] * g[0] + g[1] * g[1] + e2;
            let area = mesh.areas()[t];
            if s == 0.0 {
                // degenerate element: no first-order contribution and a
                // vanishing curvature (only reachable with eps = 0)
                tensors.push([[0.0; 2]; 2]);
                continue;
            }
            let w = p * s.powf(0.5 * p - 1.0);
            let bg = mesh.basis_gradients(t);
            for k in 0..3 {
                nodal[mesh.triangles()[t][k]] += area * w * (g[0] * bg[k][0] + g[1] * bg[k][1]);
            }
            let c = (p - 2.0) / s;
            tensors.push([
                [w * (1.0 + c * g[0] * g[0]), w * c * g[0] * g[1]],
                [w * c * g[0] * g[1], w * (1.0 + c * g[1] * g[1])],
            ]);
        }
        (nodal, tensors)
    }
}

/// Builds the exponents of the continuation from 2 to `target`.
fn p_schedule(target: f64, step: f64) -> Vec<f64> {
    let mut ps = vec![2.0];
    let mut p: f64 = 2.0;
    while p != target {
        p = if target > p { (p * step).min(target) } else { (p / step).max(target) };
        ps.push(p);
    }
    ps
}

fn eps_ladder(start: f64, end: f64) -> Vec<f64> {
    if start <= end {
        return vec![end];
    }
    if end == 0.0 {
        // one decade below the start then straight to zero
        return vec![start, 0.1 * start, 0.0];
    }
    let decades = ((start / end).log10() - 1e-9).ceil() as i32;
    let mut out: Vec<f64> = (0..decades).map(|k| start * 10f64.powi(-k)).collect();
    out.push(end);
    out
}

struct Stage<'a> {
    mesh: &'a Mesh,
    free: &'a [usize],
    p: f64,
    eps: f64,
    max_iter: usize,
    /// Stop once the Newton decrement falls below this fraction of the energy.
    decrement_tol: f64,
}

impl Stage<'_> {
    fn run(&self, u: &mut [f64], trace: &mut Vec<IterationRecord>) -> Result<usize> {
        let energy = Energy {
            mesh: self.mesh,
            p: self.p,
            eps: self.eps,
        };
        let mut current = energy.value(u);
        for it in 0..self.max_iter {
            let (grad, tensors) = energy.derivatives(u);
            let hess = weighted_stiffness(self.mesh, |t| tensors[t]).restrict(self.free);
            let rhs: Vec<f64> = self.free.iter().map(|&i| -grad[i]).collect();
            if rhs.iter().all(|&r| r == 0.0) {
                return Ok(it);
            }
            let cg = CgOptions {
                rel_tol: 1e-10,
                ..CgOptions::for_size(self.free.len())
            };
            let dir = pcg(&hess, &rhs, &vec![0.0; rhs.len()], cg)?.solution;
            // -grad . dir, nonnegative for a descent direction
            let decrement = dot(&dir, &rhs);
            if decrement <= self.decrement_tol * current.abs() {
                return Ok(it);
            }

            let mut step = 1.0;
            let mut trial = u.to_vec();
            let accepted = loop {
                for (&i, d) in self.free.iter().zip(&dir) {
                    trial[i] = u[i] + step * d;
                }
                let value = energy.value(&trial);
                if value < current && value <= current - 1e-4 * step * decrement {
                    break Some(value);
                }
                step *= 0.5;
                if step < 1e-12 {
                    break None;
                }
            };
            let Some(value) = accepted else {
                // no representable decrease left along the Newton direction
                return Ok(it);
            };
            assert!(value <= current, "regularized energy increased: {current} -> {value}");
            u.copy_from_slice(&trial);
            let stalled = current - value <= 4.0 * f64::EPSILON * current.abs();
            current = value;
            trace.push(IterationRecord {
                p: self.p,
                eps: self.eps,
                energy: value,
                step,
            });
            if stalled {
                // progress is below what the energy can resolve
                return Ok(it + 1);
            }
        }
        Ok(self.max_iter)
    }
}

/// Minimizes the p-energy subject to `u = f` on `A`.
pub fn solve_p_laplace(problem: &PlapProblem<'_>) -> Result<(ScalarField, OptimalityReport)> {
    let mesh = problem.mesh;
    let opts = &problem.options;
    let n = mesh.n_vertices();
    let mut fixed = vec![false; n];
    for &v in &problem.constraint {
        fixed[v] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&v| !fixed[v]).collect();
    let mut u: Vec<f64> = (0..n)
        .map(|v| if fixed[v] { problem.datum.values()[v] } else { 0.0 })
        .collect();

    let report = |field: &ScalarField, iterations, trace| -> Result<OptimalityReport> {
        Ok(OptimalityReport {
            p: problem.p,
            energy: p_energy(mesh, field, problem.p)?,
            stationarity: p_stationarity(mesh, field, problem.p, &problem.constraint)?,
            iterations,
            trace,
            certificate: None,
        })
    };

    if free.is_empty() {
        let field = ScalarField::new(mesh, u)?;
        let rep = report(&field, 0, Vec::new())?;
        return Ok((field, rep));
    }

    // harmonic warm start
    let k = stiffness_matrix(mesh);
    let ku = k.mul_vec(&u);
    let b: Vec<f64> = free.iter().map(|&i| -ku[i]).collect();
    let start = pcg(&k.restrict(&free), &b, &vec![0.0; free.len()], CgOptions::for_size(free.len()))?;
    for (&i, x) in free.iter().zip(&start.solution) {
        u[i] = *x;
    }
    let scale = p_energy(mesh, &ScalarField::new(mesh, u.clone())?, 2.0)?;
    if scale == 0.0 {
        let field = ScalarField::new(mesh, u)?;
        let rep = report(&field, 0, Vec::new())?;
        return Ok((field, rep));
    }
    if let Some(seed) = opts.seed {
        let (lo, hi) = problem
            .constraint
            .iter()
            .map(|&v| problem.datum.values()[v])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        let amp = 0.1 * (hi - lo).max(scale);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for &i in &free {
            u[i] += amp * rng.gen_range(-1.0..1.0);
        }
    }

    let mut trace = Vec::new();
    let mut iterations = 0;
    let schedule = p_schedule(problem.p, opts.p_step);
    let last = schedule.len() - 1;
    for (idx, &p) in schedule.iter().enumerate() {
        let eps_values = if idx == last {
            eps_ladder(opts.eps_start * scale, opts.eps_final * scale)
        } else {
            vec![opts.eps_start * scale]
        };
        let final_eps = eps_values.len() - 1;
        for (j, &eps) in eps_values.iter().enumerate() {
            let finishing = idx == last && j == final_eps;
            let stage = Stage {
                mesh,
                free: &free,
                p,
                eps,
                max_iter: opts.max_outer,
                decrement_tol: if finishing { 1e-26 } else { 1e-10 },
            };
            iterations += stage.run(&mut u, &mut trace)?;
        }
    }

    let field = ScalarField::new(mesh, u)?;
    let rep = report(&field, iterations, trace)?;
    if !(rep.stationarity <= opts.tol) {
        return Err(Error::PlapNotConverged {
            stationarity: rep.stationarity,
            tolerance: opts.tol,
            best: Box::new(field),
        });
    }
    Ok((field, rep))
}

/// `||∂φ_i||_{L^p}` for the hat function of vertex `i`, for all vertices.
fn hat_norms(mesh: &Mesh, p: f64) -> Vec<f64> {
    let mut acc = vec![0.0; mesh.n_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.basis_gradients(t);
        for k in 0..3 {
            acc[tri[k]] += mesh.areas()[t] * g[k][0].hypot(g[k][1]).powf(p);
        }
    }
    acc.into_iter().map(|s| s.powf(1.0 / p)).collect()
}

/// Discrete Euler–Lagrange residual of the constrained p-energy:
/// `max_i |<♯ₚ∂u, ∂φ_i>| / (||∂φ_i||_p ||∂u||_p)` over hat functions `φ_i`
/// of vertices outside `A`.
///
/// The extra division by `||∂u||_p` makes the value scale-free; by Hölder's
/// inequality it never exceeds one.
pub fn p_stationarity(mesh: &Mesh, u: &ScalarField, p: f64, constraint: &BTreeSet<usize>) -> Result<f64> {
    let grad = gradient(mesh, u)?;
    let norm = lp_norm(mesh, &grad, p)?;
    if norm == 0.0 {
        return Ok(0.0);
    }
    let sharp = sharp_p(mesh, &grad, p)?;
    let mut pairing = vec![0.0; mesh.n_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.basis_gradients(t);
        let s = sharp.values()[t];
        for k in 0..3 {
            pairing[tri[k]] += mesh.areas()[t] * (s[0] * g[k][0] + s[1] * g[k][1]);
        }
    }
    let norms = hat_norms(mesh, p);
    Ok((0..mesh.n_vertices())
        .filter(|v| !constraint.contains(v))
        .map(|v| pairing[v].abs() / norms[v])
        .fold(0.0, f64::max)
        / norm)
}

/// Step sizes tried along every direction, relative to `||∂u||_p`.
pub const CERTIFICATE_STEPS: [f64; 4] = [1e-3, -1e-3, 1e-2, -1e-2];

/// Checks `||∂u||_p <= ||∂(u + tδ)||_p + 1e-10 scale` along the supplied
/// admissible directions (normalized to `||∂δ||_p = 1`; zero directions
/// are used as they are) for every step in [`CERTIFICATE_STEPS`].
pub fn certificate_with_directions(
    mesh: &Mesh,
    u: &ScalarField,
    p: f64,
    constraint: &BTreeSet<usize>,
    directions: &[ScalarField],
) -> Result<CertificateOutcome> {
    let base = p_energy(mesh, u, p)?;
    let scale = if base > 0.0 { base } else { 1.0 };
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    let mut trials = 0;
    for delta in directions {
        delta.check(mesh)?;
        if let Some(&v) = constraint.iter().find(|&&v| delta.values()[v] != 0.0) {
            return Err(Error::invalid(format!("direction does not vanish on constraint vertex {v}")));
        }
        let dn = p_energy(mesh, delta, p)?;
        let delta = if dn > 0.0 { delta.map(|x| x / dn) } else { delta.clone() };
        trials += 1;
        let mut failed = false;
        for t in CERTIFICATE_STEPS {
            let moved = u.axpby(1.0, t * scale, &delta)?;
            let margin = p_energy(mesh, &moved, p)? - base;
            worst = worst.min(margin);
            if margin < -1e-10 * scale {
                failed = true;
            }
        }
        violations += usize::from(failed);
    }
    Ok(CertificateOutcome {
        trials,
        violations,
        worst_margin: if trials == 0 { 0.0 } else { worst },
        passed: violations == 0,
    })
}

/// Random-direction minimality test of `u` among fields agreeing with it
/// on `A`.
///
/// Even trials perturb along the hat function of a random vertex outside
/// `A`; odd trials along a dense random field vanishing on `A`.
pub fn minimality_certificate(
    mesh: &Mesh,
    u: &ScalarField,
    p: f64,
    constraint: &BTreeSet<usize>,
    trials: usize,
    seed: u64,
) -> Result<OptimalityReport> {
    if trials == 0 {
        return Err(Error::invalid("certificate needs at least one trial"));
    }
    let free: Vec<usize> = (0..mesh.n_vertices()).filter(|v| !constraint.contains(v)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let directions: Vec<ScalarField> = (0..trials)
        .map(|k| {
            let mut vals = vec![0.0; mesh.n_vertices()];
            if !free.is_empty() {
                if k % 2 == 0 {
                    vals[free[rng.gen_range(0..free.len())]] = 1.0;
                } else {
                    for &i in &free {
                        vals[i] = rng.gen_range(-1.0..1.0);
                    }
                }
            }
            ScalarField::new(mesh, vals)
        })
        .collect::<Result<_>>()?;
    let outcome = certificate_with_directions(mesh, u, p, constraint, &directions)?;
    Ok(OptimalityReport {
        p,
        energy: p_energy(mesh, u, p)?,
        stationarity: p_stationarity(mesh, u, p, constraint)?,
        iterations: 0,
        trace: Vec::new(),
        certificate: Some(outcome),
    })
}

/// Regularized element energy `Σ area (|∂u|² + ε²)^{p/2}`, exposed for
/// diagnostics.
pub fn regularized_energy(mesh: &Mesh, u: &ScalarField, p: f64, eps: f64) -> Result<f64> {
    u.check(mesh)?;
    Ok(Energy { mesh, p, eps }.value(u.values()))
}
