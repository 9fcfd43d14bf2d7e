use dla_lab::{cli, Error};

fn main() {
    let code = match cli::run_cli(std::env::args().collect()) {
        Ok(code) => code,
        Err(e @ Error::InvalidConfig(_)) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    };
    std::process::exit(code);
}
