//! Print the canonical experiment configuration with every default
//! materialized; useful as a starting point for a new experiment file.

fn main() {
    let cfg = hearth::experiment::ExperimentConfig::new();
    print!("{}", cfg.to_toml().expect("default config serializes"));
}
