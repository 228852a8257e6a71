#![no_main]

use libfuzzer_sys::fuzz_target;
use sddpde::experiment::ExperimentConfig;

// The experiment config loader must reject arbitrary text without panicking
// or building an inconsistent model.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = ExperimentConfig::parse_str(text) {
        // Any accepted config must describe a solvable delay and a
        // resolvable spectrum.
        assert!(cfg.model.n_modes() >= 1);
        assert!(cfg.model.horizon() > 0.0);
        assert!(cfg.model.delay.ensure_solvable().is_ok());
    }
});
