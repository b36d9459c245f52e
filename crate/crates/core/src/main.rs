fn main() -> std::process::ExitCode {
    semedge::cli::main()
}
