#![no_main]

use kickent::runner::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_toml_str(text) {
        // Anything accepted must survive a round trip with the same hash.
        let again = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).expect("serialised config reparses");
        assert_eq!(cfg.sha256(), again.sha256());
    }
});
