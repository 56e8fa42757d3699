#![no_main]

use equitrust_cli::experiment::apply_override;
use equitrust_cli::parse_override;
use equitrust_sim::{preset, preset_names};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&pick, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    let names = preset_names();
    let base = preset(names[pick as usize % names.len()]).expect("preset");
    if let Ok((key, value)) = parse_override(text) {
        if let Ok(cfg) = apply_override(&base, &key, value) {
            let _ = cfg.validate();
        }
    }
});
