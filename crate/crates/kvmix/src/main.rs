fn main() {
    std::process::exit(kvmix::cli::run());
}
