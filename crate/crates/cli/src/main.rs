use clap::error::ErrorKind as ClapKind;
use clap::Parser;
use serde_json::{json, Value};
use windcond_cli::args::Cli;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => match e.kind() {
            ClapKind::DisplayHelp | ClapKind::DisplayVersion | ClapKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                e.exit()
            }
            _ => {
                let msg = e.render().to_string();
                let err = json!({ "error": { "kind": "config", "code": 2, "message": msg.trim_end() } });
                eprintln!("{err}");
                std::process::exit(2);
            }
        },
    };
    match windcond_cli::run(&cli) {
        Ok(Value::String(page)) => print!("{page}"),
        Ok(done) => println!("{done}"),
        Err(e) => {
            eprintln!("{}", e.to_json());
            std::process::exit(e.exit_code());
        }
    }
}
