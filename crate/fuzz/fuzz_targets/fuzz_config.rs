//! TOML experiment-config parser and resolver: arbitrary text must produce
//! either a resolved config or a clean error, never a panic, for every
//! experiment kind.

#![no_main]

use ea_cli::config::{Experiment, RawConfig, ResolvedConfig};
use libfuzzer_sys::fuzz_target;

const EXPERIMENTS: [Experiment; 7] = [
    Experiment::GroundState,
    Experiment::Census,
    Experiment::LineMass,
    Experiment::BarrierVerify,
    Experiment::LowerBound,
    Experiment::Decorrelate,
    Experiment::ColumnsCheck,
];

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(raw) = RawConfig::parse(text) {
        for experiment in EXPERIMENTS {
            if let Ok(cfg) = ResolvedConfig::from_raw(&raw, experiment) {
                // The echo embedded in artifacts must serialize for any
                // accepted config.
                let _ = cfg.echo();
            }
        }
    }
});
