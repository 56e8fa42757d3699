#![no_main]

use equitrust_cli::parse_experiment;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(exp) = parse_experiment(text) {
        let _ = exp.seed_list();
        if let Ok(cfg) = exp.resolve() {
            // A resolved scenario always survives a TOML round trip.
            let again = toml::to_string(&cfg).expect("serializes");
            let back: equitrust_sim::ScenarioConfig = toml::from_str(&again).expect("reparses");
            assert_eq!(back, cfg);
        }
    }
});
