fn main() -> std::process::ExitCode {
    relaynet::cli::main_entry()
}
