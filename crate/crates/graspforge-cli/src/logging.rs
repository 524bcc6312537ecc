//! Verbosity control via the `GRASPFORGE_LOG` environment variable:
//! `off`, `info` (default) or `debug`. Log lines go to stderr; stdout is
//! reserved for the machine-readable run summary.

use std::sync::OnceLock;

#[derive(PartialEq, PartialOrd, Clone, Copy)]
pub enum Level {
    Off = 0,
    Info = 1,
    Debug = 2,
}

fn level() -> Level {
    static LEVEL: OnceLock<Level> = OnceLock::new();
    *LEVEL.get_or_init(|| {
        match std::env::var("GRASPFORGE_LOG")
            .unwrap_or_default()
            .to_lowercase()
            .as_str()
        {
            "off" | "none" | "0" => Level::Off,
            "debug" | "trace" => Level::Debug,
            _ => Level::Info,
        }
    })
}

pub fn info(msg: &str) {
    if level() >= Level::Info {
        eprintln!("[graspforge] {msg}");
    }
}

pub fn debug(msg: &str) {
    if level() >= Level::Debug {
        eprintln!("[graspforge:debug] {msg}");
    }
}
