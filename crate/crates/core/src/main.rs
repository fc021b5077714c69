fn main() -> std::process::ExitCode {
    switchsde::cli::main()
}
