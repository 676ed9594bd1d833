#![no_main]

use ibgan::experiment::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_toml_str(text) {
        cfg.validate().expect("parsed configs are valid");
        let _ = cfg.losses_path();
    }
});
