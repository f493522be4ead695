fn main() -> std::process::ExitCode {
    varfem::cli::main_with(std::env::args_os())
}
