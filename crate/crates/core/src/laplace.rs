//! Mixed Dirichlet/Neumann and pure Neumann problems for `Δu = g`, with
//! `Δ = ∇∂` (divergence of the gradient).
//!
//! Both are solved in weak form: find `u` with
//! `<∂u, ∂v> = <θ, tr v> − <g, v>` for every admissible nodal `v`.
//! Dirichlet data is imposed strongly at every endpoint of a Dirichlet edge.

use crate::error::{Error, Result};
use crate::fem::assembly::{boundary_load, load_vector, stiffness_matrix};
use crate::fem::{lp_norm, scalar_inner, w12_norm, BoundaryTrace, Region, ScalarField, Support};
use crate::geometry::{BoundaryPartition, Condition, Mesh};
use crate::linalg::{compensated_residual, norm2, pcg, CgOptions, CsrMatrix};

/// `Δu = g` on the domain, `u = f` on `Γ_D`, `γ_ν ∂u = θ` on `Γ_N`.
#[derive(Debug, Clone)]
pub struct MixedProblem<'a> {
    pub mesh: &'a Mesh,
    pub partition: &'a BoundaryPartition,
    pub load: ScalarField,
    pub dirichlet: ScalarField,
    /// Edge flux data on Neumann edges; `None` means zero flux.
    pub flux: Option<BoundaryTrace>,
}

impl<'a> MixedProblem<'a> {
    pub fn new(
        mesh: &'a Mesh,
        partition: &'a BoundaryPartition,
        load: ScalarField,
        dirichlet: ScalarField,
        flux: Option<BoundaryTrace>,
    ) -> Result<Self> {
        partition.check_mesh(mesh)?;
        load.check(mesh)?;
        dirichlet.check(mesh)?;
        if !partition.has_dirichlet() {
            return Err(Error::invalid("mixed problem needs a nonempty Dirichlet part"));
        }
        if let Some(theta) = &flux {
            check_edge_data(mesh, theta)?;
            if let Some(&(e, _)) = theta
                .entries()
                .iter()
                .find(|&&(e, _)| partition.condition(e) != Condition::Neumann)
            {
                return Err(Error::invalid(format!("flux given on non-Neumann boundary edge {e}")));
            }
        }
        Ok(Self {
            mesh,
            partition,
            load,
            dirichlet,
            flux,
        })
    }
}

/// `Δu = g` with `γ_ν ∂u = θ` on the whole boundary.
#[derive(Debug, Clone)]
pub struct NeumannProblem<'a> {
    pub mesh: &'a Mesh,
    pub load: ScalarField,
    pub flux: BoundaryTrace,
    /// Compatibility band; `None` uses `1e-8 (||g||_{L^2} + ||θ|| + 1)`.
    pub tolerance: Option<f64>,
}

impl<'a> NeumannProblem<'a> {
    pub fn new(mesh: &'a Mesh, load: ScalarField, flux: BoundaryTrace) -> Result<Self> {
        load.check(mesh)?;
        check_edge_data(mesh, &flux)?;
        Ok(Self {
            mesh,
            load,
            flux,
            tolerance: None,
        })
    }

    pub fn default_tolerance(&self) -> Result<f64> {
        Ok(1e-8 * (lp_norm(self.mesh, &self.load, 2.0)? + self.flux.edge_l2_norm(self.mesh) + 1.0))
    }
}

fn check_edge_data(mesh: &Mesh, theta: &BoundaryTrace) -> Result<()> {
    theta.check(mesh)?;
    if theta.support() != Support::Edges {
        return Err(Error::invalid("flux data must be attached to boundary edges"));
    }
    if let Some(&(e, _)) = theta.entries().iter().find(|&&(e, _)| e >= mesh.boundary_edges().len()) {
        return Err(Error::invalid(format!("flux refers to missing boundary edge {e}")));
    }
    Ok(())
}

/// Zero flux on every boundary edge.
pub fn zero_flux(mesh: &Mesh) -> BoundaryTrace {
    let entries = (0..mesh.boundary_edges().len()).map(|e| (e, 0.0)).collect();
    BoundaryTrace::new(mesh, Region::Whole, Support::Edges, entries).expect("zero flux is valid")
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    /// Relative CG residual; default `1e-12`.
    pub rel_tol: Option<f64>,
    /// CG iteration cap; default `20 x` free node count.
    pub max_iter: Option<usize>,
    /// Starting nodal values for CG (free nodes only are used).
    pub initial: Option<Vec<f64>>,
}

impl SolveOptions {
    fn cg(&self, n: usize) -> CgOptions {
        let base = CgOptions::for_size(n);
        CgOptions {
            rel_tol: self.rel_tol.unwrap_or(base.rel_tol),
            max_iter: self.max_iter.unwrap_or(base.max_iter),
            project_constants: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub field: ScalarField,
    pub iterations: usize,
    pub cg_relative_residual: f64,
}

/// Solves the mixed problem with default options.
pub fn solve_mixed(problem: &MixedProblem<'_>) -> Result<ScalarField> {
    Ok(solve_mixed_with(problem, &SolveOptions::default())?.field)
}

pub fn solve_mixed_with(problem: &MixedProblem<'_>, opts: &SolveOptions) -> Result<Solution> {
    let mesh = problem.mesh;
    let n = mesh.n_vertices();
    let fixed = problem.partition.dirichlet_vertices(mesh);
    let mut is_fixed = vec![false; n];
    for &v in &fixed {
        is_fixed[v] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&v| !is_fixed[v]).collect();

    let mut u = vec![0.0; n];
    for &v in &fixed {
        u[v] = problem.dirichlet.values()[v];
    }
    let k = stiffness_matrix(mesh);
    let rhs = weak_rhs(mesh, &problem.load, problem.flux.as_ref());
    let ku = k.mul_vec(&u);
    let b: Vec<f64> = free.iter().map(|&i| rhs[i] - ku[i]).collect();
    let x0: Vec<f64> = match &opts.initial {
        Some(init) if init.len() == n => free.iter().map(|&i| init[i]).collect(),
        Some(_) => return Err(Error::invalid("initial guess has the wrong length")),
        None => vec![0.0; free.len()],
    };
    let kff = k.restrict(&free);
    let cg = opts.cg(free.len());
    let out = pcg(&kff, &b, &x0, cg)?;
    for (&i, x) in free.iter().zip(&out.solution) {
        u[i] = *x;
    }
    let (extra, rel) = refine_solution(&k, &rhs, &mut u, &free, &kff, cg, norm2(&b))?;
    Ok(Solution {
        field: ScalarField::new(mesh, u)?,
        iterations: out.iterations + extra,
        cg_relative_residual: rel,
    })
}

const REFINEMENT_SWEEPS: usize = 4;

/// Iterative refinement of the free values of `u`: the residual of the full
/// system is recomputed with compensated summation and the correction is
/// solved by CG on `kff`. On strongly anisotropic elements the plain
/// residual has a rounding floor far above the CG tolerance, and this
/// removes the dependence of the result on the starting guess.
///
/// Returns the extra CG iterations and the final relative residual.
fn refine_solution(
    k: &CsrMatrix,
    rhs: &[f64],
    u: &mut [f64],
    free: &[usize],
    kff: &CsrMatrix,
    cg: CgOptions,
    b_norm: f64,
) -> Result<(usize, f64)> {
    let mut iterations = 0;
    let mut rel = 0.0;
    for sweep in 0..=REFINEMENT_SWEEPS {
        let full = compensated_residual(k, u, rhs);
        let mut r: Vec<f64> = free.iter().map(|&i| full[i]).collect();
        if cg.project_constants {
            let mean = r.iter().sum::<f64>() / r.len().max(1) as f64;
            r.iter_mut().for_each(|x| *x -= mean);
        }
        let r_norm = norm2(&r);
        rel = if b_norm > 0.0 { r_norm / b_norm } else { r_norm };
        if sweep == REFINEMENT_SWEEPS || r_norm == 0.0 {
            break;
        }
        let d = pcg(kff, &r, &vec![0.0; r.len()], cg)?;
        iterations += d.iterations;
        let scale = free.iter().map(|&i| u[i].abs()).fold(0.0, f64::max);
        let step = d.solution.iter().map(|x| x.abs()).fold(0.0, f64::max);
        for (&i, di) in free.iter().zip(&d.solution) {
            u[i] += di;
        }
        if step <= f64::EPSILON * scale {
            break;
        }
    }
    Ok((iterations, rel))
}

/// `<θ, tr φ_i> − <g, φ_i>` for every vertex.
fn weak_rhs(mesh: &Mesh, g: &ScalarField, theta: Option<&BoundaryTrace>) -> Vec<f64> {
    let mut rhs = theta.map_or_else(|| vec![0.0; mesh.n_vertices()], |t| boundary_load(mesh, t.entries()));
    for (r, gl) in rhs.iter_mut().zip(load_vector(mesh, g.values())) {
        *r -= gl;
    }
    rhs
}

/// `<g, 1> − <θ, tr 1>`.
pub fn compatibility_defect(mesh: &Mesh, g: &ScalarField, theta: &BoundaryTrace) -> Result<f64> {
    check_edge_data(mesh, theta)?;
    let total_flux: f64 = theta
        .entries()
        .iter()
        .map(|&(e, v)| mesh.boundary_edges()[e].length * v)
        .sum();
    Ok(scalar_inner(mesh, g, &ScalarField::constant(mesh, 1.0))? - total_flux)
}

/// Normalization of the pure Neumann solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gauge {
    /// `∫ u = 0`.
    ZeroMean,
    /// `u(v) = 0`, solved as a reduced positive-definite system.
    PinVertex(usize),
}

/// Solves the pure Neumann problem with the zero-mean gauge.
pub fn solve_neumann(problem: &NeumannProblem<'_>) -> Result<ScalarField> {
    Ok(solve_neumann_with(problem, Gauge::ZeroMean, &SolveOptions::default())?.field)
}

pub fn solve_neumann_with(problem: &NeumannProblem<'_>, gauge: Gauge, opts: &SolveOptions) -> Result<Solution> {
    let mesh = problem.mesh;
    let defect = compatibility_defect(mesh, &problem.load, &problem.flux)?;
    let tolerance = match problem.tolerance {
        Some(t) => t,
        None => problem.default_tolerance()?,
    };
    if !(defect.abs() <= tolerance) {
        return Err(Error::Incompatible { defect, tolerance });
    }
    let n = mesh.n_vertices();
    let k = stiffness_matrix(mesh);
    let rhs = weak_rhs(mesh, &problem.load, Some(&problem.flux));
    match gauge {
        Gauge::ZeroMean => {
            let x0 = match &opts.initial {
                Some(init) if init.len() == n => init.clone(),
                Some(_) => return Err(Error::invalid("initial guess has the wrong length")),
                None => vec![0.0; n],
            };
            let cg = CgOptions {
                project_constants: true,
                ..opts.cg(n)
            };
            let out = pcg(&k, &rhs, &x0, cg)?;
            let u = ScalarField::new(mesh, out.solution)?;
            let mean = scalar_inner(mesh, &u, &ScalarField::constant(mesh, 1.0))? / mesh.total_area();
            Ok(Solution {
                field: u.map(|v| v - mean),
                iterations: out.iterations,
                cg_relative_residual: out.relative_residual,
            })
        }
        Gauge::PinVertex(pin) => {
            if pin >= n {
                return Err(Error::invalid(format!("pinned vertex {pin} out of range")));
            }
            let free: Vec<usize> = (0..n).filter(|&v| v != pin).collect();
            let b: Vec<f64> = free.iter().map(|&i| rhs[i]).collect();
            // remove the (tolerated) incompatibility so the reduced solve
            // matches the projected one up to a constant
            let shift = rhs.iter().sum::<f64>() / n as f64;
            let b: Vec<f64> = b.iter().map(|v| v - shift).collect();
            let out = pcg(&k.restrict(&free), &b, &vec![0.0; free.len()], opts.cg(free.len()))?;
            let mut u = vec![0.0; n];
            for (&i, x) in free.iter().zip(&out.solution) {
                u[i] = *x;
            }
            Ok(Solution {
                field: ScalarField::new(mesh, u)?,
                iterations: out.iterations,
                cg_relative_residual: out.relative_residual,
            })
        }
    }
}

/// Largest violation of the weak form over hat functions vanishing on the
/// Dirichlet vertices, normalized by `||u||_{W^{1,2}} + ||g||_{L^2} + 1`.
pub fn weak_residual(
    mesh: &Mesh,
    partition: &BoundaryPartition,
    u: &ScalarField,
    g: &ScalarField,
    theta: Option<&BoundaryTrace>,
) -> Result<f64> {
    partition.check_mesh(mesh)?;
    u.check(mesh)?;
    g.check(mesh)?;
    if let Some(t) = theta {
        check_edge_data(mesh, t)?;
    }
    let mut fixed = vec![false; mesh.n_vertices()];
    for v in partition.dirichlet_vertices(mesh) {
        fixed[v] = true;
    }
    let ku = stiffness_matrix(mesh).mul_vec(u.values());
    let rhs = weak_rhs(mesh, g, theta);
    let worst = (0..mesh.n_vertices())
        .filter(|&i| !fixed[i])
        .map(|i| (ku[i] - rhs[i]).abs())
        .fold(0.0, f64::max);
    Ok(worst / (w12_norm(mesh, u)? + lp_norm(mesh, g, 2.0)? + 1.0))
}
