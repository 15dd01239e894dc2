fn main() -> std::process::ExitCode {
    tsch_model::cli::main()
}
