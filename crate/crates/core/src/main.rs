fn main() {
    std::process::exit(seqrec_audit::cli::main_with_args(std::env::args_os()));
}
