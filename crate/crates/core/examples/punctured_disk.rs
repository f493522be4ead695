//! The flux of `β = ∂ log r` through a shrinking puncture stays at `2π`
//! while `||β||_{L²}` blows up.

use varfem::verify::{counterexample_punctured, PuncturedSetup};

fn main() -> varfem::Result<()> {
    let report = counterexample_punctured(&PuncturedSetup::default())?;
    print!("{}", String::from_utf8_lossy(&report.to_csv(None)?));
    for c in &report.checks {
        println!("{:<28} {:>14.6} {}", c.name, c.value, if c.pass { "ok" } else { "FAIL" });
    }
    Ok(())
}
