fn main() -> std::process::ExitCode {
    dsi_cli::main_with(std::env::args_os())
}
