fn main() {
    std::process::exit(vlasov_fsl::cli::main_with_args(std::env::args_os()));
}
