fn main() {
    std::process::exit(regunet_core::evalcli::cli_main(std::env::args_os()));
}
