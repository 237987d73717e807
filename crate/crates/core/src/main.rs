use tracecheck::cli;
use tracecheck::graphs::bundled_catalog;

fn main() {
    let code = cli::run(
        std::env::args_os(),
        &bundled_catalog(),
        &mut std::io::stdout(),
        &mut std::io::stderr(),
    );
    std::process::exit(code);
}
