fn main() -> std::process::ExitCode {
    concmtf::cli::main()
}
