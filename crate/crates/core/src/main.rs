fn main() {
    std::process::exit(qnn::qcli::run(std::env::args_os()));
}
