fn main() {
    std::process::exit(d2rnn_cli::run(std::env::args_os()));
}
