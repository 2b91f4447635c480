//! Drives the command-line front end in-process: forward solve, data
//! synthesis and a reconstruction, all written to a temporary directory.

use scatter_kalman::cli::{execute, SubcommandName};
use scatter_kalman::config::parse_config_str;

fn main() -> scatter_kalman::Result<()> {
    let out = std::env::temp_dir().join("scatter-kalman-pipeline");
    let config = parse_config_str(
        "[physics]\nk = 1.0\n[grid]\nM = 3\n[data]\nN = 8\nJ = 16\n[algorithm]\nalpha = 1.0\nouter_iterations = 3\n",
        &["algorithm=kfl_init".to_string()],
    )?;
    for cmd in [SubcommandName::Forward, SubcommandName::Synth, SubcommandName::Reconstruct] {
        let dir = out.join(cmd.name());
        execute(cmd, &config, &dir)?;
        let mut files: Vec<String> = std::fs::read_dir(&dir)
            .map_err(|e| scatter_kalman::Error::Internal(e.to_string()))?
            .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
            .collect();
        files.sort();
        println!("{}: {}", dir.display(), files.join(", "));
    }
    let mse = std::fs::read_to_string(out.join("reconstruct/mse.csv"))
        .map_err(|e| scatter_kalman::Error::Internal(e.to_string()))?;
    print!("{mse}");
    Ok(())
}
