use std::io::Write;
use std::process::ExitCode;

use binoisy_cli::{parse_threads, render, run_sweep, SpecError, SweepSpec, THREADS_ENV};
use clap::error::ErrorKind;

const EXIT_PARTIAL: u8 = 1;
const EXIT_SPEC: u8 = 2;

fn spec_failure(e: &SpecError) -> ExitCode {
    eprintln!("binoisy: {e}");
    ExitCode::from(EXIT_SPEC)
}

fn main() -> ExitCode {
    let spec = match SweepSpec::from_argv(std::env::args_os()) {
        Ok(s) => s,
        Err(SpecError::Cli(e)) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(SpecError::Cli(e)) => {
            let _ = e.print();
            return ExitCode::from(EXIT_SPEC);
        }
        Err(e) => return spec_failure(&e),
    };

    let threads = match parse_threads(std::env::var(THREADS_ENV).ok().as_deref()) {
        Ok(t) => t,
        Err(e) => return spec_failure(&e),
    };
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("binoisy: cannot size worker pool: {e}");
            return ExitCode::from(EXIT_SPEC);
        }
    }

    let report = match run_sweep(&spec) {
        Ok(r) => r,
        Err(e) => return spec_failure(&e),
    };
    let text = render(&report, spec.format);
    let written = match &spec.output {
        Some(path) => std::fs::write(path, text).map_err(|source| SpecError::Output { path: path.display().to_string(), source }),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|source| SpecError::Output { path: "<stdout>".into(), source }),
    };
    if let Err(e) = written {
        return spec_failure(&e);
    }

    if report.failures > 0 {
        eprintln!("binoisy: {} of {} points did not converge", report.failures, report.table.rows.len());
        if !spec.allow_partial {
            return ExitCode::from(EXIT_PARTIAL);
        }
    }
    ExitCode::SUCCESS
}
