// SPDX-License-Identifier: Apache-2.0

fn main() {
    std::process::exit(noc_qos::cli::main(std::env::args_os()));
}
