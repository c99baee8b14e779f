fn main() {
    let code = stm_sim::main_with(std::env::args_os(), std::env::var(stm_sim::OUT_ENV).ok());
    std::process::exit(code);
}
