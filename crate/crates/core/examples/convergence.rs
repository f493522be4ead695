//! Runs every refinement study and prints its table and verdict.

use varfem::verify::{convergence_study, ConvergenceProblem};

fn main() -> varfem::Result<()> {
    for problem in ConvergenceProblem::ALL {
        let levels: &[usize] = match problem {
            ConvergenceProblem::PlapAffine => &[4, 8, 16],
            _ => &[8, 16, 32, 64],
        };
        let report = convergence_study(problem, levels)?;
        println!("== {} (fitted {:?}, pass {})", problem.id(), report.fitted_value, report.pass());
        print!("{}", String::from_utf8_lossy(&report.to_csv(None)?));
    }
    Ok(())
}
