//! Drives the runner from a TOML configuration, as the command line does.

use membranes::runner::{run, ConfigFile, RunConfig};

fn main() -> membranes::Result<()> {
    let out = std::env::temp_dir().join("membranes-run-config");
    let text = format!(
        "command = \"fixtures\"\ncategory = \"iv\"\nangle = 20.0\nn = 65\nout = {:?}\n",
        out.display().to_string()
    );
    let file: ConfigFile = toml::from_str(&text).map_err(|e| membranes::Error::InvalidArgument(e.to_string()))?;
    let outcome = run(&RunConfig::resolve(file)?)?;
    println!("{}", serde_json::to_string_pretty(&outcome.summary["results"]).unwrap_or_default());
    println!("artifacts in {}", out.display());
    Ok(())
}
