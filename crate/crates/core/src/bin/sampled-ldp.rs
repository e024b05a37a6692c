fn main() {
    std::process::exit(sampled_ldp::experiment::main_with_args(std::env::args_os()));
}
