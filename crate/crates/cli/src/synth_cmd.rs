use anyhow::Context;
use windmarket::synthgen::{generate, SynthConfig, SynthError};
use windmarket::ClockRule;

use crate::exit::{data, usage, Exit};
use crate::output::write_all;
use crate::SynthArgs;

pub fn run(args: &SynthArgs, rule: &ClockRule) -> Result<(), Exit> {
    let config = match &args.config {
        None => SynthConfig::default(),
        Some(path) => {
            let text =
                std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(usage)?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display())).map_err(usage)?
        }
    };
    let out = generate(&config, rule).map_err(|e| match e {
        SynthError::Invalid(_) => usage(e),
        other => data(other),
    })?;
    let files = out.to_files().map_err(data)?.into_iter().collect();
    write_all(&args.out, &files)
}
