fn main() -> std::process::ExitCode {
    rebelfire::cli::main()
}
