//! Regenerates the bundled mask transcript by running the pipeline against
//! the scripted model.

use std::process::ExitCode;

use simforge_mask_fixture::{record_run, transcript_path, write_dataset, MaskScript, TRANSCRIPT_ITERATIONS};

fn main() -> ExitCode {
    let work = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => {
            eprintln!("cannot create a scratch directory: {e}");
            return ExitCode::FAILURE;
        }
    };
    let data = work.path().join("data");
    if let Err(e) = write_dataset(&data) {
        eprintln!("dataset: {e}");
        return ExitCode::FAILURE;
    }
    let path = transcript_path();
    match record_run(MaskScript::default(), &data, &work.path().join("run"), &path, TRANSCRIPT_ITERATIONS) {
        Ok(outcome) if !outcome.stop_reason.is_failure() => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Ok(outcome) => {
            eprintln!("recording run failed: {:?}", outcome.stop_reason);
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("recording run failed: {e}");
            ExitCode::FAILURE
        }
    }
}
